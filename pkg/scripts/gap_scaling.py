"""Balanced-sector gap of the Fredkin chain against n, next to the Markov-chain gaps.

Prints a table and the log-log slopes; the Hamiltonian gap is expected to
fall between the n^-2 upper bound and the polynomial lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from _config import parse, write_json

from fredkin_lab import hamiltonian as hm
from fredkin_lab import markov as mk


@dataclass
class Config:
    """Gap scaling of the Fredkin Hamiltonian and the two path chains."""

    n_max: int = 9
    colors: list = field(default_factory=lambda: [1, 2])
    chain_n_max: int = 7
    out: str = "results/gap_scaling.json"


def main(cfg: Config) -> None:
    rows = []
    for s in cfg.colors:
        top = cfg.n_max if s == 1 else min(cfg.n_max, 7)
        for n in range(2, top + 1):
            H = hm.build_balanced_sector(n, s)
            row = {"n": n, "s": s, "dim": H.dim, "hamiltonian_gap": hm.gap(H)}
            if n <= cfg.chain_n_max and (s == 1 or n <= 5):
                row["fredkin_chain_gap"] = mk.spectral_gap(mk.build_chain("fredkin", n, s))
                row["peak_chain_gap"] = mk.spectral_gap(mk.build_chain("peak_displacing", n, s))
            rows.append(row)
            print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    fits = {}
    for s in cfg.colors:
        for key in ("hamiltonian_gap", "fredkin_chain_gap", "peak_chain_gap"):
            pts = [(r["n"], r[key]) for r in rows if r["s"] == s and key in r and r["n"] >= 3]
            if len(pts) >= 2:
                slope, se = mk.loglog_slope(*zip(*pts))
                fits[f"s={s} {key}"] = {"slope": slope, "stderr": se}
                print(f"s={s} {key}: slope {slope:.3f} +- {se:.3f}")
    write_json(Path(cfg.out), cfg, {"rows": rows, "fits": fits})


if __name__ == "__main__":
    main(parse(Config))
