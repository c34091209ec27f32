"""Command-line experiment runner.

Every subcommand writes CSV and/or JSON reports into ``--out``.  Each file
starts with a metadata block ``{version, config, seed}``; floats are printed
with 17 significant digits; nothing time- or path-dependent is written, so
identical configurations give byte-identical files.

Exit codes: 0 ok, 2 invariant failure, 3 resource cap, 64 usage,
65 malformed report (``plot``), 66 missing input.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from . import combinatorics as cb
from . import defect as df
from . import excursion as ex
from . import hamiltonian as hm
from . import markov as mk
from . import verify as vf
from .linalg import SparseSymMatrix, extreme_eigs

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CAP = 3
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66


class UsageError(Exception):
    pass


class MissingInput(Exception):
    pass


# -- value parsing -----------------------------------------------------------------


def parse_range(value) -> list[int]:
    """``"2..8"``, ``"3..51:2"``, ``"5,7"``, an int, or a list of ints."""
    if isinstance(value, bool):
        raise UsageError(f"not an integer range: {value!r}")
    if isinstance(value, int):
        out = [value]
    elif isinstance(value, (list, tuple)):
        out = [parse_range(v)[0] if not isinstance(v, int) else v for v in value]
    else:
        out = []
        for part in str(value).split(","):
            part = part.strip()
            if not part:
                continue
            m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)(?::(\d+))?", part)
            try:
                if m:
                    step = int(m.group(3) or 1)
                    if step < 1:
                        raise UsageError(f"range step must be positive: {part!r}")
                    out.extend(range(int(m.group(1)), int(m.group(2)) + 1, step))
                else:
                    out.append(int(part))
            except ValueError:
                raise UsageError(f"not an integer range: {part!r}") from None
    if not out:
        raise UsageError(f"empty range: {value!r}")
    return out


def parse_floats(value) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        out = [float(p) for p in str(value).split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"not a number list: {value!r}") from None
    if not out:
        raise UsageError(f"empty list: {value!r}")
    return out


def parse_grid(value) -> list[float]:
    """``"start:stop:step"`` inclusive of ``stop``, or an explicit list."""
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    parts = str(value).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:step, got {value!r}")
    try:
        a, b, h = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"grid must be numeric: {value!r}") from None
    if h <= 0 or b < a:
        raise UsageError(f"empty grid: {value!r}")
    k = int(math.floor((b - a) / h + 1e-9)) + 1
    return [float(v) for v in np.round(a + h * np.arange(k), 12)]


def _float(v) -> float:
    if isinstance(v, bool):
        raise UsageError(f"not a number: {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(f"not a number: {v!r}") from None


def _positive(name):
    def f(v):
        x = _float(v)
        if not x > 0:
            raise UsageError(f"{name} must be positive, got {v!r}")
        return x

    return f


def _int(v):
    if isinstance(v, bool):
        raise UsageError(f"not an integer: {v!r}")
    try:
        return int(v)
    except (TypeError, ValueError):
        raise UsageError(f"not an integer: {v!r}") from None


def _bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _choice(*options):
    def f(v):
        if v not in options:
            raise UsageError(f"{v!r} is not one of {', '.join(options)}")
        return v

    return f


def _eps_open_unit(v):
    x = _float(v)
    if not 0 < x < 1:
        raise UsageError(f"eps must lie in (0, 1), got {v!r}")
    return x


def _eps_list(v):
    xs = parse_floats(v)
    if any(not x > 0 for x in xs):
        raise UsageError(f"eps values must be positive, got {v!r}")
    return xs


def _names(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [p.strip() for p in str(v).split(",") if p.strip()]


# -- configuration -----------------------------------------------------------------


@dataclass(frozen=True)
class Option:
    name: str
    parse: object
    default: object
    help: str
    flag: bool = False
    hidden: bool = False
    raw_in_meta: bool = False  # record the raw range string instead of its expansion


CHAIN_CHOICES = ("fredkin", "peak_displacing", "lattice", "positive_lattice", "hamiltonian")

COMMANDS: dict[str, tuple[str, list[Option]]] = {
    "gap-scan": ("Hamiltonian or chain gaps over a range of n.", [
        Option("model", _choice("fredkin", "motzkin", "chain"), "fredkin", "fredkin, motzkin, or chain"),
        Option("sector", _choice("balanced", "full", "all"), "balanced", "balanced block, full matrix, or every sector"),
        Option("kind", _choice(*CHAIN_CHOICES), "fredkin", "chain kind when --model chain"),
        Option("n", parse_range, "2..6", "n range, e.g. 2..8"),
        Option("s", parse_range, "1", "color count(s)"),
        Option("tol", _positive("tol"), 1e-10, "ground energy tolerance"),
        Option("cap", _int, 500_000, "largest matrix dimension"),
    ]),
    "mixing": ("Exact TV mixing curves and eigenvalue bounds.", [
        Option("kind", _choice(*CHAIN_CHOICES), "fredkin", "chain kind"),
        Option("n", parse_range, "2..6", "n range"),
        Option("s", parse_range, "1", "color count(s)"),
        Option("eps", _eps_open_unit, 0.25, "TV threshold in (0, 1)"),
        Option("start", _int, 0, "start state index for the curve"),
        Option("floor", _positive("floor"), 1e-4, "stop the curve below this TV distance"),
        Option("cap", _int, 500_000, "largest state space"),
    ]),
    "compare-bound": ("Comparison constant A and the transferred gap bound.", [
        Option("n", parse_range, "2..5", "n range"),
        Option("s", parse_range, "1..2", "color count(s)"),
    ]),
    "congestion": ("Canonical-path congestion of the hopping walk.", [
        Option("m", parse_range, "3..51:2", "odd chain lengths"),
        Option("s", parse_range, "1", "color count(s)"),
    ]),
    "hopping": ("Effective hopping model: ground state, walk bounds, energy scaling.", [
        Option("m", parse_range, "5..41:2", "odd chain lengths"),
        Option("s", parse_range, "1", "color count(s)"),
        Option("eps", _eps_list, "0.1,0.01,0.001", "defect weights for the first-order check"),
        Option("first_order_max_m", _int, 7, "run the first-order check only up to this m"),
    ]),
    "defect": ("Single-defect sector against first-order perturbation theory.", [
        Option("m", parse_range, "5,7", "odd chain lengths"),
        Option("s", parse_range, "1", "color count(s)"),
        Option("eps", _eps_list, "0.1,0.01,0.001", "defect weights"),
        Option("variant", _choice("literal", "projected", "both"), "both", "hopping coefficients to compare with"),
    ]),
    "excursion": ("Excursion-area density, moments, and Monte Carlo areas.", [
        Option("x_grid", parse_grid, "0:2.5:0.01", "density grid start:stop:step", raw_in_meta=True),
        Option("terms", _int, ex.DEFAULT_TERMS, "Airy zeros in the series"),
        Option("mc_n", _int, 0, "Dyck half-length for Monte Carlo (0 skips)"),
        Option("samples", _int, 100_000, "Monte Carlo sample count"),
        Option("hist_grid", parse_grid, "0:2:0.05", "histogram bin edges", raw_in_meta=True),
        Option("lattice_offset", _bool, False, "add 2n+1 to areas before scaling", flag=True),
    ]),
    "twisted": ("Area-twisted trial state energies and overlaps.", [
        Option("n", parse_range, "2..10", "n range"),
        Option("s", parse_range, "1", "color count(s)"),
        Option("fit_from", _int, 6, "smallest n in the log-log fit"),
    ]),
    "entropy": ("Half-chain entanglement entropy of the uniform ground state.", [
        Option("model", _choice("dyck", "motzkin"), "dyck", "ground-state support"),
        Option("n", parse_range, "1..8", "n range"),
        Option("s", parse_range, "1", "color count(s)"),
    ]),
    "verify": ("Run the invariant suite.", [
        Option("only", _names, [], "comma-separated modules or check names"),
        Option("quick", _bool, False, "smaller sizes", flag=True),
        Option("inject_fault", _choice(*vf.FAULTS), None, "test hook", hidden=True),
    ]),
}

COMMON = ("config", "seed", "out", "plots", "workers")


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    out: Path = Path("results")
    plots: bool = False
    workers: int = 1
    meta_params: dict | None = None

    def meta(self) -> dict:
        shown = self.params if self.meta_params is None else self.meta_params
        return {"version": __version__, "config": {"command": self.command, **shown}, "seed": self.seed}

    def __getattr__(self, key):
        try:
            return self.__dict__["params"][key]
        except KeyError:
            raise AttributeError(key) from None


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise MissingInput(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(command: str, ns: argparse.Namespace) -> RunConfig:
    """Merge defaults < config file < explicit flags, then validate."""
    options = COMMANDS[command][1]
    file_vals = load_config_file(ns.config) if ns.config else {}
    file_vals.pop("command", None)
    known = {o.name for o in options} | set(COMMON) - {"config"}
    unknown = sorted(set(file_vals) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")

    def pick(name, default):
        v = getattr(ns, name, None)
        if v is None:
            v = file_vals.get(name, default)
        return v

    params, shown = {}, {}
    for o in options:
        raw = pick(o.name, o.default)
        params[o.name] = None if raw is None else o.parse(raw)
        shown[o.name] = raw if o.raw_in_meta else params[o.name]
    seed = _int(pick("seed", 0))
    workers = _int(pick("workers", 1))
    if workers < 1:
        raise UsageError("workers must be >= 1")
    return RunConfig(command, params, seed, Path(pick("out", "results")), _bool(pick("plots", False)), workers, shown)


# -- output ------------------------------------------------------------------------

_FLOAT_TAG = "\x1ff17:"


def fmt(x) -> str:
    """CSV cell: floats with 17 significant digits, booleans lowercase."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating, Fraction)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def _tag_floats(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        x = float(obj)
        return _FLOAT_TAG + format(x, ".17g") if math.isfinite(x) else None
    if isinstance(obj, dict):
        return {str(k): _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_tag_floats(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, compact: bool = False) -> str:
    """JSON with sorted keys and 17-significant-digit floats; non-finite -> null."""
    text = json.dumps(_tag_floats(obj), sort_keys=True, indent=None if compact else 2)
    text = re.sub(r'"\\u001ff17:([^"]*)"', r"\1", text)
    return text if compact else text + "\n"


class Writer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = cfg.out
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def csv(self, name: str, header: list[str], rows) -> Path:
        lines = ["# " + dumps(self.cfg.meta(), compact=True)]
        lines.append(",".join(header))
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        return self._write(name, "\n".join(lines) + "\n")

    def json(self, name: str, payload: dict) -> Path:
        return self._write(name, dumps({"meta": self.cfg.meta(), **payload}))

    def _write(self, name, text) -> Path:
        p = self.dir / name
        p.write_text(text)
        self.written.append(p)
        return p


def _fan_out(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*items)))


def _fit(xs, ys) -> dict:
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y is not None and math.isfinite(y) and y > 0]
    if len(pts) < 2:
        return {"slope": None, "stderr": None, "ci95": None, "points": len(pts)}
    slope, se = mk.loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    ci = [slope - 1.96 * se, slope + 1.96 * se] if math.isfinite(se) else None
    return {"slope": slope, "stderr": se, "ci95": ci, "points": len(pts)}


# -- gap-scan ----------------------------------------------------------------------


def _lowest(M, k: int = 2) -> np.ndarray:
    A = M if isinstance(M, SparseSymMatrix) else SparseSymMatrix.from_sparse(M)
    if A.dim <= 1500:
        return np.linalg.eigvalsh(A.to_dense())[:k]
    return extreme_eigs(A, k, "smallest", vectors=False).eigenvalues


def _sector_name(label: hm.SectorLabel) -> str:
    return f"p{label.p}q{label.q}" + ("x" if label.mismatch else "")


def _gap_job(model, sector, kind, cap, n, s) -> dict:
    if model == "chain":
        if kind == "hamiltonian":
            ch = hm.to_markov(hm.build_balanced_sector(n, s, cap))
        else:
            ch = mk.build_chain(kind, n, s, cap=cap)
        v = ch.violations()
        gap = mk.spectral_gap(ch) if ch.size > 1 else math.nan
        return {"rows": [{"n": n, "s": s, "sector": kind, "gap": gap, "lambda_min": math.nan}],
                "violations": v, "num_states": ch.size}
    if model == "fredkin" and sector == "balanced":
        H = hm.build_balanced_sector(n, s, cap)
        vals = _lowest(H.matrix)
        return {"rows": [_ham_row(n, s, "balanced", vals)], "dim": H.matrix.dim}
    build = hm.build_fredkin if model == "fredkin" else hm.build_motzkin
    H = build(n, s, min(cap, hm.DEFAULT_DIM_CAP) if cap < hm.DEFAULT_DIM_CAP else cap)
    if sector == "full":
        return {"rows": [_ham_row(n, s, "full", _lowest(H.matrix))], "dim": H.matrix.dim}
    labels = hm.sector_labels(H.basis_words())
    if sector == "balanced":
        idx = np.nonzero(np.all(labels == 0, axis=1))[0]
        return {"rows": [_ham_row(n, s, "balanced", _lowest(H.matrix.submatrix(idx)))], "dim": len(idx)}
    blocks = hm.sector_decompose(H)
    rows = []
    for lab in sorted(blocks):
        b = blocks[lab]
        rows.append({"n": n, "s": s, "sector": _sector_name(lab), "gap": b.gap, "lambda_min": b.lambda_min,
                     "balanced": lab.balanced, "dim": b.dim})
    return {"rows": rows, "dim": H.matrix.dim, "sectors": [blocks[k].report() for k in sorted(blocks)]}


def _ham_row(n, s, sector, vals) -> dict:
    gap = float(vals[1] - vals[0]) if len(vals) > 1 else math.nan
    return {"n": n, "s": s, "sector": sector, "gap": gap, "lambda_min": float(vals[0])}


def run_gap_scan(cfg: RunConfig, out: Writer) -> list[str]:
    if cfg.model == "chain" and cfg.sector == "all":
        raise UsageError("--sector all applies to Hamiltonian models only")
    items = [(n, s) for s in cfg.s for n in cfg.n]
    if any(n < 1 or s < 1 for n, s in items):
        raise UsageError("n and s must be >= 1")
    jobs = _fan_out(partial(_gap_job, cfg.model, cfg.sector, cfg.kind, cfg.cap), items, cfg.workers)
    rows = [r for j in jobs for r in j["rows"]]
    failures = []
    for r in rows:
        if cfg.model == "chain":
            continue
        lam = r["lambda_min"]
        if r.get("balanced", r["sector"] in ("balanced", "full")):
            if abs(lam) > cfg.tol:
                failures.append(f"n={r['n']} s={r['s']} {r['sector']}: lambda_min = {lam:.3g}")
        elif lam <= cfg.tol:
            failures.append(f"n={r['n']} s={r['s']} sector {r['sector']}: lambda_min = {lam:.3g} not positive")
    for j, (n, s) in zip(jobs, items):
        v = j.get("violations")
        if v and (v["row_sum"] > 1e-12 or v["negative"] > 1e-12 or v["detailed_balance"] > 1e-12):
            failures.append(f"chain n={n} s={s} violates stochastic/reversible axioms: {v}")

    header = ["n", "s", "sector", "gap"] + (["lambda_min"] if cfg.model != "chain" else [])
    out.csv("gap_scan.csv", header, [[r[h] for h in header] for r in rows])
    series = {}
    for r in rows:
        series.setdefault((r["s"], r["sector"]), []).append(r)
    fits = []
    for (s, sector), rs in sorted(series.items()):
        gaps = [r["gap"] for r in rs if r["n"] > 1]
        fin = [g for g in gaps if math.isfinite(g)]
        fits.append({"s": s, "sector": sector, **_fit([r["n"] for r in rs if r["n"] > 1], gaps),
                     "monotone_decreasing": all(b < a for a, b in zip(fin, fin[1:]))})
    summary = {"fits": fits, "rows": rows, "invariant_failures": failures}
    if cfg.sector == "all":
        summary["sectors"] = [{"n": n, "s": s, "blocks": j["sectors"]} for j, (n, s) in zip(jobs, items)]
    out.json("gap_scan.json", summary)
    return failures


# -- mixing ------------------------------------------------------------------------


def _chain(kind, n, s, cap) -> mk.ChainSpec:
    if kind == "hamiltonian":
        return hm.to_markov(hm.build_balanced_sector(n, s, cap))
    return mk.build_chain(kind, n, s, cap=cap)


def _mixing_job(kind, eps, start, floor, cap, n, s) -> dict:
    ch = _chain(kind, n, s, cap)
    if not 0 <= start < ch.size:
        raise UsageError(f"start index {start} outside the {ch.size} states at n={n}, s={s}")
    curve = mk.tv_mixing_curve(ch, start, floor=min(floor, eps / 2))
    rep = {"kind": kind, "n": n, "s": s, "num_states": ch.size, "start": ch.state_label(start)}
    if ch.size == 1:
        rep.update(gap=math.nan, tau_quarter=0, tau_eps=0, eps=eps,
                   bound_checks={"upper_ok": True, "lower_ok": True, "upper_bound": 0.0, "lower_bound": 0.0})
        return {"report": rep, "curve": curve}
    quarter = mk.mixing_bounds(ch, 0.25)
    mb = quarter if eps == 0.25 else mk.mixing_bounds(ch, eps)
    rep.update(
        gap=1.0 - mb.lambda1,
        tau_quarter=quarter.tau,
        tau_eps=mb.tau,
        eps=eps,
        tau_start_curve=mk.mixing_time_from_curve(curve, eps),
        bound_checks={
            "upper_ok": mb.upper_ok,
            "lower_ok": mb.lower_ok,
            "upper_bound": float(mb.upper_x.max()),
            "lower_bound": float(mb.lower),
            "lambda_star": mb.lambda_star,
        },
    )
    return {"report": rep, "curve": curve}


def run_mixing(cfg: RunConfig, out: Writer) -> list[str]:
    items = [(n, s) for s in cfg.s for n in cfg.n]
    if any(n < 1 or s < 1 for n, s in items):
        raise UsageError("n and s must be >= 1")
    if cfg.kind in ("lattice", "positive_lattice") and any(s != 1 for _, s in items):
        raise UsageError("lattice chains are uncolored (s = 1)")
    jobs = _fan_out(partial(_mixing_job, cfg.kind, cfg.eps, cfg.start, cfg.floor, cfg.cap), items, cfg.workers)
    failures = []
    table = []
    for j in jobs:
        r = j["report"]
        out.csv(f"mixing_{cfg.kind}_n{r['n']}_s{r['s']}.csv", ["t", "tv_distance"], j["curve"])
        b = r["bound_checks"]
        if not (b["upper_ok"] and b["lower_ok"]):
            failures.append(f"mixing bound violated at n={r['n']} s={r['s']}: {b}")
        table.append([r["n"], r["s"], r["num_states"], r["gap"], r["tau_eps"], b["lower_bound"], b["upper_bound"]])
    out.csv(f"mixing_{cfg.kind}.csv", ["n", "s", "num_states", "gap", "tau", "lower_bound", "upper_bound"], table)
    out.json(f"mixing_{cfg.kind}.json", {"chains": [j["report"] for j in jobs], "invariant_failures": failures})
    return failures


# -- compare-bound / congestion ----------------------------------------------------


def _compare_job(n, s) -> dict:
    f = mk.build_chain("fredkin", n, s)
    p = mk.build_chain("peak_displacing", n, s)
    r = mk.comparison_constant(f, p, mk.walk_the_peak_paths(p))
    ref = mk.peak_displacing_reference_gap(n, s)
    return {"n": n, "s": s, "num_states": f.size, "A": r.A, "gap_fredkin": r.target_gap, "gap_peak": r.reference_gap,
            "bound": r.bound, "holds": r.holds, "peak_reference": ref, "peak_reference_ok": r.reference_gap >= ref,
            "max_path_length": r.max_path_length, "max_paths_through_edge": r.max_paths_through_edge}


def run_compare_bound(cfg: RunConfig, out: Writer) -> list[str]:
    items = [(n, s) for s in cfg.s for n in cfg.n]
    if any(n < 2 or s < 1 for n, s in items):
        raise UsageError("compare-bound needs n >= 2 and s >= 1")
    rows = _fan_out(_compare_job, items, cfg.workers)
    failures = [f"n={r['n']} s={r['s']}: comparison bound fails" for r in rows if not r["holds"]]
    failures += [f"n={r['n']} s={r['s']}: peak-displacing gap below reference" for r in rows if not r["peak_reference_ok"]]
    header = ["n", "s", "A", "gap_fredkin", "gap_peak", "bound", "holds", "peak_reference"]
    out.csv("compare_bound.csv", header, [[r[h] for h in header] for r in rows])
    out.json("compare_bound.json", {"rows": rows, "invariant_failures": failures})
    return failures


def _check_odd(ms):
    bad = [m for m in ms if m < 3 or m % 2 == 0]
    if bad:
        raise UsageError(f"m must be odd and >= 3, got {bad}")


def _congestion_job(m, s) -> dict:
    ch = df.mapped_walk(m, s)
    r = mk.congestion_rho(ch, mk.interval_paths(ch.size))
    return {"m": m, "s": s, "rho": r.rho, "path_length": r.length, "gap": r.gap, "bound": r.bound, "holds": r.holds}


def run_congestion(cfg: RunConfig, out: Writer) -> list[str]:
    _check_odd(cfg.m)
    rows = _fan_out(_congestion_job, [(m, s) for s in cfg.s for m in cfg.m], cfg.workers)
    failures = [f"m={r['m']} s={r['s']}: gap below 1/(rho L)" for r in rows if not r["holds"]]
    header = ["m", "s", "rho", "path_length", "gap", "bound", "holds"]
    out.csv("congestion.csv", header, [[r[h] for h in header] for r in rows])
    out.json("congestion.json", {"rows": rows, "invariant_failures": failures})
    return failures


# -- hopping / defect ----------------------------------------------------------------


def _hopping_job(eps, fo_max, m, s) -> dict:
    wb = df.walk_bounds(m, s)
    pin = df.pinned_amplitude(m, s)
    rep = {
        "m": m, "s": s,
        "lambda1_heff": df.heff_ground_energy(m, s, "literal"),
        "lambda1_heff_projected": df.heff_ground_energy(m, s, "projected"),
        "pinned_amplitude": pin.computed,
        "pinned_amplitude_stated": pin.stated,
        "walk_bounds_ok": wb.ok,
        "walk_min": wb.min_entry, "walk_max": wb.max_entry, "pi_ratio": wb.pi_ratio,
        "kernel_identity_exact": df.kernel_identity_exact(m, s) if m <= df.EXACT_LIMIT else None,
        "h_move_residual": df.h_move_residual(m, s),
        "first_order_slope": None,
        "first_order_slope_projected": None,
    }
    if m <= fo_max:
        rep["first_order_slope"] = df.first_order_check(m, s, eps, "literal").slope
        rep["first_order_slope_projected"] = df.first_order_check(m, s, eps, "projected").slope
    return rep


def run_hopping(cfg: RunConfig, out: Writer) -> list[str]:
    _check_odd(cfg.m)
    items = [(m, s) for s in cfg.s for m in cfg.m]
    reps = _fan_out(partial(_hopping_job, tuple(cfg.eps), cfg.first_order_max_m), items, cfg.workers)
    failures = []
    for r in reps:
        if r["kernel_identity_exact"] is False:
            failures.append(f"m={r['m']}: H_move g != 0 in exact arithmetic")
        if r["h_move_residual"] > 1e-12:
            failures.append(f"m={r['m']}: H_move residual {r['h_move_residual']:.3g}")
        if not r["walk_bounds_ok"]:
            failures.append(f"m={r['m']}: walk entries outside [1/(32s), 1/(2s)]")
    header = ["m", "s", "lambda1_heff", "lambda1_heff_projected", "pinned_amplitude", "pinned_amplitude_stated",
              "walk_bounds_ok", "h_move_residual"]
    out.csv("hopping.csv", header, [[r[h] for h in header] for r in reps])
    fits = {}
    for s in cfg.s:
        rs = [r for r in reps if r["s"] == s]
        fits[str(s)] = {v: _fit([r["m"] for r in rs], [r[k] for r in rs])
                        for v, k in (("literal", "lambda1_heff"), ("projected", "lambda1_heff_projected"))}
    out.json("hopping.json", {"reports": reps, "energy_fits": fits, "invariant_failures": failures})
    return failures


def _defect_job(eps, variants, m, s) -> dict:
    checks = {v: df.first_order_check(m, s, eps, v).report() for v in variants}
    wb = df.walk_bounds(m, s)
    lit = checks.get("literal")
    return {
        "m": m, "s": s,
        "lambda1_heff": df.heff_ground_energy(m, s, "literal"),
        "pinned_amplitude": df.pinned_amplitude(m, s).computed,
        "walk_bounds_ok": wb.ok,
        "first_order_slope": lit["slope"] if lit else None,
        "first_order": checks,
    }


def run_defect(cfg: RunConfig, out: Writer) -> list[str]:
    _check_odd(cfg.m)
    variants = df.VARIANTS if cfg.variant == "both" else (cfg.variant,)
    items = [(m, s) for s in cfg.s for m in cfg.m]
    for m, s in items:
        if df.defect_dimension(m, s) > df.DEFECT_CAP:
            raise cb.CapExceeded(f"defect sector at m={m}, s={s} exceeds cap {df.DEFECT_CAP}")
    reps = _fan_out(partial(_defect_job, tuple(cfg.eps), variants), items, cfg.workers)
    rows = []
    for r in reps:
        for v, c in r["first_order"].items():
            for e, ratio, err in zip(c["eps"], c["ratios"], c["errors"]):
                rows.append([r["m"], r["s"], v, e, ratio, c["target"], err])
    out.csv("defect.csv", ["m", "s", "variant", "eps", "ratio", "target", "error"], rows)
    out.json("defect.json", {"reports": reps})
    return []


# -- excursion ---------------------------------------------------------------------

MEAN_TARGET = 0.5 * math.sqrt(math.pi / 2)
STD_TARGET = math.sqrt(5 / 12 - math.pi / 8)


def run_excursion(cfg: RunConfig, out: Writer) -> list[str]:
    if cfg.terms < 1 or cfg.samples < 1 or cfg.mc_n < 0:
        raise UsageError("terms and samples must be positive, mc_n non-negative")
    # f_A vanishes faster than any power as x -> 0+
    rows = [(x, ex.density_f_A(x, cfg.terms).value if x > 0 else 0.0) for x in cfg.x_grid]
    out.csv("density.csv", ["x", "f_A(x)"], rows)
    total, mean, std = ex.density_moments()
    area_ok = all(ex.dyck_area_sum(n) == ex.dyck_area_closed_form(n) for n in range(1, 13))
    checks = {
        "integral": {"value": total, "target": 1.0, "tol": 1e-6},
        "mean": {"value": mean, "target": MEAN_TARGET, "tol": 1e-4},
        "std": {"value": std, "target": STD_TARGET, "tol": 1e-4},
    }
    failures = [f"{k} = {c['value']:.10g}, expected {c['target']:.10g}" for k, c in checks.items()
                if abs(c["value"] - c["target"]) > c["tol"]]
    if not area_ok:
        failures.append("Dyck area sums disagree with the closed form for some n <= 12")
    payload = {"checks": checks, "area_sum_exact_n_le_12": area_ok,
               "u_parameters": [ex.U_PARAM_A, ex.U_PARAM_B], "terms": cfg.terms}
    if cfg.mc_n > 0:
        smp = ex.mc_scaled_area(cfg.mc_n, 1, cfg.samples, cfg.seed, np.asarray(cfg.hist_grid), cfg.lattice_offset)
        mc = {"n": cfg.mc_n, "samples": cfg.samples, "mean": smp.mean, "std": smp.std,
              "mean_rel_err": abs(smp.mean / MEAN_TARGET - 1), "std_rel_err": abs(smp.std / STD_TARGET - 1),
              "sup_distance": ex.histogram_sup_distance(smp), "lattice_offset": cfg.lattice_offset}
        if mc["mean_rel_err"] > 0.02:
            failures.append(f"Monte Carlo mean off by {mc['mean_rel_err']:.3%}")
        if mc["std_rel_err"] > 0.05:
            failures.append(f"Monte Carlo std off by {mc['std_rel_err']:.3%}")
        payload["monte_carlo"] = mc
        out.json("histogram.json", {**smp.report(), "mean": smp.mean, "std": smp.std, "n": cfg.mc_n,
                                    "samples": cfg.samples, "lattice_offset": cfg.lattice_offset})
    payload["invariant_failures"] = failures
    out.json("excursion.json", payload)
    return failures


# -- twisted / entropy ---------------------------------------------------------------


def _twisted_job(n, s) -> dict:
    theta = ex.paper_theta(n)
    te = ex.twisted_energy(n, s, theta)
    ov = ex.overlap_with_ground(n, s, theta)
    return {"n": n, "s": s, "theta_tilde": theta, "energy": te.direct, "pair_formula": te.pair_formula,
            "small_angle": te.small_angle, "method": te.method, "mismatch": te.mismatch,
            "overlap_sq": abs(ov) ** 2}


def run_twisted(cfg: RunConfig, out: Writer) -> list[str]:
    items = [(n, s) for s in cfg.s for n in cfg.n]
    if any(n < 1 or s < 1 for n, s in items):
        raise UsageError("n and s must be >= 1")
    try:
        rows = _fan_out(_twisted_job, items, cfg.workers)
    except ArithmeticError as exc:
        out.json("twisted.json", {"invariant_failures": [str(exc)]})
        return [str(exc)]
    multi_s = len(cfg.s) > 1
    for s in cfg.s:
        rs = [r for r in rows if r["s"] == s]
        name = f"twisted_s{s}.csv" if multi_s else "twisted.csv"
        out.csv(name, ["n", "energy", "overlap_sq"], [[r["n"], r["energy"], r["overlap_sq"]] for r in rs])
    fits = {str(s): _fit(*zip(*[(r["n"], r["energy"]) for r in rows if r["s"] == s and r["n"] >= cfg.fit_from]))
            if any(r["s"] == s and r["n"] >= cfg.fit_from for r in rows) else _fit([], [])
            for s in cfg.s}
    out.json("twisted.json", {"rows": rows, "fits": fits, "fit_from": cfg.fit_from, "invariant_failures": []})
    return []


def _entropy_job(kind, n, s) -> dict:
    W, a = hm.uniform_state_words(n, s, kind)
    e = hm.half_chain_entropy(W, a)
    return {"n": n, "s": s, "entropy_bits": e.entropy_bits, "schmidt_rank": e.schmidt_rank}


def run_entropy(cfg: RunConfig, out: Writer) -> list[str]:
    items = [(n, s) for s in cfg.s for n in cfg.n]
    if any(n < 1 or s < 1 for n, s in items):
        raise UsageError("n and s must be >= 1")
    rows = _fan_out(partial(_entropy_job, cfg.model), items, cfg.workers)
    header = ["n", "s", "entropy_bits", "schmidt_rank"]
    out.csv("entropy.csv", header, [[r[h] for h in header] for r in rows])
    fits = {}
    for s in cfg.s:
        rs = [r for r in rows if r["s"] == s and r["n"] >= 2]
        if len(rs) >= 2:
            A = np.vstack([np.log2([r["n"] for r in rs]), np.ones(len(rs))]).T
            fits[str(s)] = {"slope_vs_log2_n": float(np.linalg.lstsq(A, [r["entropy_bits"] for r in rs], rcond=None)[0][0])}
    out.json("entropy.json", {"model": cfg.model, "rows": rows, "fits": fits})
    return []


# -- verify ------------------------------------------------------------------------


def run_verify(cfg: RunConfig, out: Writer) -> list[str]:
    names = set(vf.modules()) | {name for _, name, _ in vf.REGISTRY}
    unknown = [o for o in cfg.only if o not in names]
    if unknown:
        raise UsageError(f"unknown check or module: {', '.join(unknown)}")
    results = vf.run_checks(cfg.only or None, cfg.inject_fault, cfg.quick)
    for r in results:
        print(f"{r.status.upper():4s} {r.module}.{r.name}  measured={fmt(r.measured)} tol={fmt(r.tolerance)}")
    failures = [f"{r.module}.{r.name}: {r.detail}" for r in results if r.status != "pass"]
    out.json("verify.json", {"checks": [r.as_dict() for r in results],
                             "passed": len(results) - len(failures), "failed": len(failures)})
    return failures


# -- plot --------------------------------------------------------------------------


def run_plot(inputs: list[str], out_dir: Path) -> list[Path]:
    from . import plots

    missing = [p for p in inputs if not Path(p).is_file()]
    if missing:
        raise MissingInput(f"input not found: {', '.join(missing)}")
    out_dir.mkdir(parents=True, exist_ok=True)
    made, mixing, density, hist = [], [], [], None
    for p in inputs:
        if p.endswith(".json"):
            d = plots.read_json(p)
            if "grid" in d and "counts" in d:
                hist = p
            continue
        _, header, _ = plots.read_csv(p)
        if "gap" in header:
            made.append(plots.gap_plot(p, out_dir / f"{Path(p).stem}.svg"))
        elif "tv_distance" in header:
            mixing.append(p)
        elif "f_A(x)" in header:
            density.append(p)
        else:
            raise plots.ReportError(f"{p}: unrecognized report columns {header}")
    if mixing:
        made.append(plots.mixing_plot(mixing, out_dir / "mixing_curves.svg"))
    for p in density:
        made.append(plots.density_overlay(p, hist, out_dir / f"{Path(p).stem}_overlay.svg"))
    return made


def _auto_plots(cfg: RunConfig, written: list[Path]) -> list[Path]:
    sources = [str(p) for p in written
               if p.suffix == ".csv" and (p.name == "gap_scan.csv" or p.name == "density.csv"
                                          or (p.name.startswith("mixing_") and "_n" in p.name))]
    sources += [str(p) for p in written if p.name == "histogram.json"]
    return run_plot(sources, cfg.out) if sources else []


RUNNERS = {
    "gap-scan": run_gap_scan,
    "mixing": run_mixing,
    "compare-bound": run_compare_bound,
    "congestion": run_congestion,
    "hopping": run_hopping,
    "defect": run_defect,
    "excursion": run_excursion,
    "twisted": run_twisted,
    "entropy": run_entropy,
    "verify": run_verify,
}


# -- argument parsing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fredkin-lab", description="Fredkin spin-chain gap experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, (doc, options) in COMMANDS.items():
        sp_ = sub.add_parser(name, help=doc, description=doc)
        for o in options:
            flag = "--" + o.name.replace("_", "-")
            help_ = argparse.SUPPRESS if o.hidden else f"{o.help} (default: {o.default})"
            if o.flag:
                sp_.add_argument(flag, dest=o.name, action=argparse.BooleanOptionalAction, default=None, help=help_)
            else:
                sp_.add_argument(flag, dest=o.name, default=None, help=help_)
        sp_.add_argument("--config", default=None, help="JSON file with option values; flags override it")
        sp_.add_argument("--seed", default=None, help="random seed (default: 0)")
        sp_.add_argument("--out", default=None, help="output directory (default: results)")
        sp_.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None, help="also write SVG figures")
        sp_.add_argument("--workers", default=None, help="parallel worker processes (default: 1)")
    pp = sub.add_parser("plot", help="SVG figures from report files.")
    pp.add_argument("inputs", nargs="+", help="CSV/JSON report files")
    pp.add_argument("--out", default="plots", help="output directory (default: plots)")
    return p


def main(argv: list[str] | None = None) -> int:
    from .plots import ReportError

    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError("a subcommand is required (see --help)")
        if ns.command == "plot":
            for path in run_plot(ns.inputs, Path(ns.out)):
                print(path)
            return EXIT_OK
        cfg = resolve(ns.command, ns)
        writer = Writer(cfg)
        failures = RUNNERS[ns.command](cfg, writer)
        if cfg.plots:
            writer.written += _auto_plots(cfg, writer.written)
        for path in writer.written:
            print(path)
        if failures:
            for f in failures:
                print(f"invariant failure: {f}", file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingInput as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except cb.CapExceeded as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ReportError as exc:
        print(f"malformed report: {exc}", file=sys.stderr)
        return EXIT_DATAERR


if __name__ == "__main__":
    sys.exit(main())
