import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import cli


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    return meta, list(csv.DictReader(lines[1:]))


def test_gap_scan_balanced_monotone(tmp_path):
    assert run(tmp_path, "gap-scan", "--model", "fredkin", "--sector", "balanced", "--n", "2..8", "--s", "1") == 0
    meta, rows = read_csv(tmp_path / "gap_scan.csv")
    assert list(rows[0])[:4] == ["n", "s", "sector", "gap"]
    gaps = [float(r["gap"]) for r in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert meta["version"] and meta["seed"] == 0 and meta["config"]["n"] == list(range(2, 9))
    summary = json.loads((tmp_path / "gap_scan.json").read_text())
    fit = summary["fits"][0]
    assert fit["slope"] < 0 and len(fit["ci95"]) == 2 and fit["monotone_decreasing"]


def test_gap_scan_motzkin_zero_ground_energy(tmp_path):
    assert run(tmp_path, "gap-scan", "--model", "motzkin", "--n", "1..4", "--s", "1") == 0
    _, rows = read_csv(tmp_path / "gap_scan.csv")
    assert all(abs(float(r["lambda_min"])) <= 1e-10 for r in rows)


def test_gap_scan_all_sectors(tmp_path):
    assert run(tmp_path, "gap-scan", "--sector", "all", "--n", "2..3") == 0
    _, rows = read_csv(tmp_path / "gap_scan.csv")
    sectors = {r["sector"] for r in rows}
    assert "p0q0" in sectors and len(sectors) > 3


@pytest.mark.parametrize("rng", ["5..2", "", ","])
def test_empty_range_is_usage_error(tmp_path, rng):
    assert run(tmp_path, "gap-scan", "--n", rng) == cli.EXIT_USAGE


def test_eps_zero_is_usage_error(tmp_path):
    assert run(tmp_path, "mixing", "--eps", "0") == cli.EXIT_USAGE
    assert run(tmp_path, "defect", "--eps", "0") == cli.EXIT_USAGE
    assert run(tmp_path, "mixing", "--eps", "abc") == cli.EXIT_USAGE


def test_unknown_flag_and_missing_subcommand(tmp_path):
    assert cli.main(["gap-scan", "--nope"]) == cli.EXIT_USAGE
    assert cli.main([]) == cli.EXIT_USAGE


def test_cap_exit_code(tmp_path, capsys):
    assert run(tmp_path, "gap-scan", "--n", "8", "--cap", "1000") == cli.EXIT_CAP
    assert "cap 1000" in capsys.readouterr().err


def test_mixing_fredkin_n2(tmp_path):
    assert run(tmp_path, "mixing", "--kind", "fredkin", "--n", "2..6") == 0
    rep = json.loads((tmp_path / "mixing_fredkin.json").read_text())
    chains = rep["chains"]
    assert chains[0]["n"] == 2 and chains[0]["tau_quarter"] == 1
    assert set(chains[0]) >= {"kind", "n", "s", "num_states", "gap", "tau_quarter", "bound_checks"}
    for c in chains:
        assert c["bound_checks"]["upper_bound"] >= c["tau_eps"]
    _, curve = read_csv(tmp_path / "mixing_fredkin_n2_s1.csv")
    assert list(curve[0]) == ["t", "tv_distance"]


def test_mixing_hamiltonian_chain(tmp_path):
    assert run(tmp_path, "mixing", "--kind", "hamiltonian", "--n", "2") == 0
    rep = json.loads((tmp_path / "mixing_hamiltonian.json").read_text())
    assert rep["chains"][0]["tau_quarter"] == 1


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": "2..3", "s": 2, "seed": 9}))
    assert cli.main(["gap-scan", "--config", str(cfg), "--n", "2..4", "--out", str(tmp_path)]) == 0
    meta, rows = read_csv(tmp_path / "gap_scan.csv")
    assert meta["config"]["n"] == [2, 3, 4] and meta["config"]["s"] == [2] and meta["seed"] == 9


def test_config_errors(tmp_path):
    assert cli.main(["gap-scan", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_NOINPUT
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 3}))
    assert cli.main(["gap-scan", "--config", str(bad)]) == cli.EXIT_USAGE


def test_compare_and_congestion(tmp_path):
    assert run(tmp_path, "compare-bound", "--n", "2..4", "--s", "1..2") == 0
    _, rows = read_csv(tmp_path / "compare_bound.csv")
    assert all(r["holds"] == "true" for r in rows)
    assert run(tmp_path, "congestion", "--m", "3..15:2") == 0
    assert run(tmp_path, "congestion", "--m", "4") == cli.EXIT_USAGE


def test_hopping_and_defect_reports(tmp_path):
    assert run(tmp_path, "hopping", "--m", "5..9:2", "--first-order-max-m", "5") == 0
    rep = json.loads((tmp_path / "hopping.json").read_text())["reports"][0]
    assert set(rep) >= {"m", "s", "lambda1_heff", "pinned_amplitude", "walk_bounds_ok", "first_order_slope"}
    assert rep["pinned_amplitude"] == pytest.approx(1 / 3)
    assert run(tmp_path, "defect", "--m", "5", "--variant", "projected") == 0
    d = json.loads((tmp_path / "defect.json").read_text())["reports"][0]
    assert d["first_order"]["projected"]["converges"] is True


def test_excursion_outputs(tmp_path):
    assert run(tmp_path, "excursion", "--x-grid", "0:2:0.25", "--mc-n", "300", "--samples", "3000") in (0, 2)
    _, rows = read_csv(tmp_path / "density.csv")
    assert list(rows[0]) == ["x", "f_A(x)"] and len(rows) == 9
    h = json.loads((tmp_path / "histogram.json").read_text())
    assert h["scaled"] is True and len(h["grid"]) == len(h["counts"]) + 1


def test_twisted_and_entropy(tmp_path):
    assert run(tmp_path, "twisted", "--n", "2..7") == 0
    _, rows = read_csv(tmp_path / "twisted.csv")
    assert list(rows[0]) == ["n", "energy", "overlap_sq"]
    assert run(tmp_path, "entropy", "--model", "motzkin", "--n", "1..4", "--s", "2") == 0
    _, rows = read_csv(tmp_path / "entropy.csv")
    assert [int(r["schmidt_rank"]) for r in rows] == [3, 7, 15, 31]


def test_verify_only_and_fault(tmp_path):
    assert run(tmp_path, "verify", "--only", "defect", "--quick") == 0
    res = json.loads((tmp_path / "verify.json").read_text())
    assert res["checks"] and all(c["module"] == "defect" for c in res["checks"])
    assert {"name", "status", "measured", "tolerance"} <= set(res["checks"][0])
    assert run(tmp_path, "verify", "--only", "hamiltonian", "--inject-fault", "flip-sign", "--quick") == cli.EXIT_INVARIANT
    assert run(tmp_path, "verify", "--only", "nonsense") == cli.EXIT_USAGE


def test_inject_fault_hidden_from_help(capsys):
    with pytest.raises(SystemExit):
        cli.main(["verify", "--help"])
    assert "inject" not in capsys.readouterr().out


def test_plot_outputs_and_errors(tmp_path):
    run(tmp_path, "gap-scan", "--n", "2..5")
    run(tmp_path, "mixing", "--n", "2..3")
    run(tmp_path, "excursion", "--x-grid", "0.1:2:0.1", "--mc-n", "200", "--samples", "1000")
    inputs = [str(tmp_path / f) for f in ("gap_scan.csv", "mixing_fredkin_n2_s1.csv", "density.csv", "histogram.json")]
    out = tmp_path / "fig"
    assert cli.main(["plot", *inputs, "--out", str(out)]) == 0
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert svgs == ["density_overlay.svg", "gap_scan.svg", "mixing_curves.svg"]
    first = {p.name: p.read_bytes() for p in out.glob("*.svg")}
    assert cli.main(["plot", *inputs, "--out", str(out)]) == 0
    assert first == {p.name: p.read_bytes() for p in out.glob("*.svg")}
    assert cli.main(["plot", str(tmp_path / "missing.csv")]) == cli.EXIT_NOINPUT
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b\n1\n")
    assert cli.main(["plot", str(junk), "--out", str(out)]) == cli.EXIT_DATAERR


def test_plots_flag(tmp_path):
    assert run(tmp_path, "gap-scan", "--n", "2..4", "--plots") == 0
    assert (tmp_path / "gap_scan.svg").is_file()


def test_byte_identical_reruns(tmp_path):
    for sub in ("a", "b"):
        d = tmp_path / sub
        cli.main(["excursion", "--x-grid", "0.1:1:0.3", "--mc-n", "250", "--samples", "2000", "--seed", "4", "--out", str(d)])
        cli.main(["mixing", "--n", "2..4", "--out", str(d), "--plots"])
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_workers_do_not_change_output(tmp_path):
    cli.main(["gap-scan", "--n", "2..5", "--out", str(tmp_path / "one")])
    cli.main(["gap-scan", "--n", "2..5", "--workers", "2", "--out", str(tmp_path / "two")])
    for name in ("gap_scan.csv", "gap_scan.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


@given(st.integers(-5, 40), st.integers(0, 40), st.integers(1, 4))
def test_parse_range_matches_python_range(a, b, step):
    spec = f"{a}..{b}:{step}"
    expected = list(range(a, b + 1, step))
    if expected:
        assert cli.parse_range(spec) == expected
    else:
        with pytest.raises(cli.UsageError):
            cli.parse_range(spec)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_roundtrips(x):
    assert float(cli.fmt(x)) == x
    assert float(cli.dumps({"v": x}, compact=True).split(": ")[1].rstrip("}")) == x


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fredkin_lab.cli", "gap-scan", "--n", "9..3"], capture_output=True, text=True)
    assert r.returncode == cli.EXIT_USAGE
