"""Registry of numerical invariants, run by ``fredkin-lab verify``.

Each check returns a :class:`CheckResult` carrying the measured quantity
and the tolerance it was held to.  A fault hook lets tests confirm that the
suite actually fails when a matrix is corrupted.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import combinatorics as cb
from . import defect as df
from . import excursion as ex
from . import hamiltonian as hm
from . import markov as mk
from .linalg import SparseSymMatrix, extreme_eigs, quadratic_form

FAULTS = ("flip-sign",)


@dataclass
class CheckResult:
    name: str
    module: str
    status: str  # "pass" | "fail"
    measured: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Context:
    fault: str | None = None
    quick: bool = False

    def corrupt(self, H: hm.HamiltonianSpec) -> hm.HamiltonianSpec:
        """Apply the injected fault (if any) to a Hamiltonian."""
        if self.fault != "flip-sign":
            return H
        A = H.matrix.csr.tolil(copy=True)
        C = H.matrix.csr.tocoo()
        off = np.nonzero(C.row != C.col)[0]
        k = int(off[0]) if len(off) else 0  # diagonal-only matrices: flip a diagonal entry
        i, j = int(C.row[k]), int(C.col[k])
        A[i, j] = -A[i, j]
        if i != j:
            A[j, i] = -A[j, i]
        return hm.HamiltonianSpec(SparseSymMatrix(A.tocsr()), H.model, H.n, H.s, H.basis, H.words, H.terms)


REGISTRY: list[tuple[str, str, Callable[[Context], tuple[float, float, bool, str]]]] = []


def check(module: str, name: str):
    def deco(fn):
        REGISTRY.append((module, name, fn))
        return fn

    return deco


def _result(module, name, fn, ctx) -> CheckResult:
    try:
        measured, tol, ok, detail = fn(ctx)
    except Exception as exc:  # a crashing check is a failed check
        return CheckResult(name, module, "fail", math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    return CheckResult(name, module, "pass" if ok else "fail", float(measured), float(tol), detail)


def run_checks(only: list[str] | None = None, fault: str | None = None, quick: bool = False) -> list[CheckResult]:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    ctx = Context(fault, quick)
    out = []
    for module, name, fn in REGISTRY:
        if only and module not in only and name not in only:
            continue
        out.append(_result(module, name, fn, ctx))
    return out


def modules() -> list[str]:
    return sorted({m for m, _, _ in REGISTRY})


# -- combinatorics ---------------------------------------------------------------


@check("combinatorics", "catalan_counts")
def _catalan_counts(ctx):
    worst = 0
    for s in (1, 2, 3):
        for n in range(0, 11 if s == 1 else (8 if s == 2 else 6)):
            got = len(cb.path_array(2 * n, s, "dyck")) if n else 1
            worst = max(worst, abs(got - s**n * cb.catalan(n)))
    return worst, 0, worst == 0, "n <= 10 (s=1), n <= 7 (s=2), n <= 5 (s=3)"


@check("combinatorics", "fredkin_neighbors_symmetric_connected")
def _neighbors(ctx):
    from scipy.sparse.csgraph import connected_components

    bad = 0
    for s in (1, 2):
        for n in range(1, 7 if not ctx.quick else 5):
            W = cb.path_array(2 * n, s, "dyck")
            r, c = mk.fredkin_edges(W, s)
            A = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(len(W), len(W))).tocsr()
            bad += int(abs(A - A.T).sum())
            if len(W) > 1:
                ncomp, _ = connected_components(A, directed=False)
                bad += ncomp - 1
    return bad, 0, bad == 0, "n <= 6, s <= 2"


@check("combinatorics", "area_difference_per_move")
def _area_moves(ctx):
    bad = 0
    for s in (1, 2):
        for n in range(2, 7):
            W = cb.path_array(2 * n, s, "dyck")
            r, c = mk.fredkin_edges(W, s)
            A = cb.areas(W).astype(np.int64)
            d = np.abs(A[r] - A[c])
            bad += int(np.sum(~np.isin(d, (0, 2))))
    return bad, 0, bad == 0, "|area change| in {0, 2}"


@check("combinatorics", "area_sum_closed_form")
def _area_sum(ctx):
    worst = max(abs(ex.dyck_area_sum(n) - ex.dyck_area_closed_form(n)) for n in range(1, 13))
    return worst, 0, worst == 0, "n <= 12"


# -- linalg ------------------------------------------------------------------------


@check("linalg", "dense_vs_lanczos")
def _dense_lanczos(ctx):
    rng = np.random.default_rng(12345)
    worst = 0.0
    for dim in (500, 2100):
        B = sp.random(dim, dim, density=5 / dim, random_state=rng)
        M = (B + B.T).tocsr()
        d = extreme_eigs(M, 3, "smallest", method="dense").eigenvalues
        l = extreme_eigs(M, 3, "smallest", method="lanczos").eigenvalues
        worst = max(worst, float(np.abs(d - l).max()))
    return worst, 1e-9, worst <= 1e-9, "random sparse symmetric, dims 500 and 2100"


@check("linalg", "rayleigh_bound")
def _rayleigh(ctx):
    rng = np.random.default_rng(7)
    H = hm.build_balanced_sector(5, 1).matrix
    lam = extreme_eigs(H, 1).eigenvalues[0]
    worst = math.inf
    for _ in range(50):
        v = rng.normal(size=H.dim) + 1j * rng.normal(size=H.dim)
        v /= np.linalg.norm(v)
        worst = min(worst, quadratic_form(H, v) - lam)
    return worst, -1e-9, worst >= -1e-9, "min over random unit v of <v|H|v> - lambda_min"


# -- markov ------------------------------------------------------------------------


@check("markov", "chain_axioms")
def _axioms(ctx):
    worst = 0.0
    nmax = 4 if ctx.quick else 6
    for kind in mk.CHAIN_KINDS[:4]:
        for s in (1, 2):
            if kind in ("lattice", "positive_lattice") and s > 1:
                continue
            for n in range(1, nmax + 1):
                v = mk.build_chain(kind, n, s).violations()
                worst = max(worst, v["row_sum"], v["negative"], v["detailed_balance"], v["stationarity_l1"] / 100)
    return worst, 1e-12, worst <= 1e-12, "all four chains, n <= 6, s <= 2"


@check("markov", "peak_displacing_gap_bound")
def _pd_gap(ctx):
    worst = math.inf
    for s in (1, 2):
        for n in range(2, 7 if s == 1 else 6):
            gap = mk.spectral_gap(mk.build_chain("peak_displacing", n, s))
            worst = min(worst, gap / mk.peak_displacing_reference_gap(n, s))
    return worst, 1.0, worst >= 1.0, "min gap / (s / (sqrt(pi) n^5.5))"


@check("markov", "comparison_theorem")
def _comparison(ctx):
    worst = math.inf
    for s in (1, 2):
        for n in range(2, 5 if ctx.quick else 6):
            f = mk.build_chain("fredkin", n, s)
            p = mk.build_chain("peak_displacing", n, s)
            r = mk.comparison_constant(f, p, mk.walk_the_peak_paths(p))
            worst = min(worst, r.target_gap / r.bound)
    return worst, 1.0, worst >= 1 - 1e-9, "min gap(P) / (gap(P~) / A), n <= 5, s <= 2"


@check("markov", "aldous_induced_chain")
def _aldous(ctx):
    worst = math.inf
    for n in range(1, 7):
        full = mk.build_chain("lattice", n)
        dyck = np.nonzero(np.all(cb.height_array(full.states) >= 0, axis=1))[0]
        ind = mk.induced_chain(full, dyck)
        g_ind = mk.spectral_gap(ind)
        if math.isinf(g_ind):
            continue
        worst = min(worst, g_ind - mk.spectral_gap(full))
    return worst, 0.0, worst >= -1e-12, "gap(induced) - gap(lattice), n <= 6"


@check("markov", "tv_monotone_and_mixing_bound")
def _mixing(ctx):
    bad = 0
    for kind in ("fredkin", "peak_displacing", "positive_lattice"):
        for n in range(2, 5):
            ch = mk.build_chain(kind, n, 1)
            rep = mk.mixing_bounds(ch, 0.25)
            bad += int(not (rep.upper_ok and rep.lower_ok))
            curve = mk.tv_mixing_curve(ch, 0, t_max=2000)
            tv = np.array([d for _, d in curve])
            bad += int(np.any(np.diff(tv) > 1e-12))
    return bad, 0, bad == 0, "monotone TV and tau(1/4) within spectral bounds"


# -- hamiltonian -------------------------------------------------------------------


def _fredkin_case(ctx, n, s):
    return ctx.corrupt(hm.build_fredkin(n, s))


@check("hamiltonian", "frustration_free")
def _ff(ctx):
    worst = 0.0
    cases = [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (1, 3)] if ctx.quick else [(n, 1) for n in range(1, 8)] + [(n, 2) for n in range(1, 4)] + [(1, 5), (2, 3)]
    for n, s in cases:
        H = _fredkin_case(ctx, n, s)
        r = hm.kernel_report(H, hm.dyck_state(H.basis))
        bad = r.kernel_dim != 1 or abs(r.overlap - 1) > 1e-9
        worst = max(worst, abs(r.lambda_min), r.term_residual, 1.0 if bad else 0.0)
    return worst, 1e-10, worst <= 1e-10, "unique zero mode = uniform colored Dyck state"


@check("hamiltonian", "stoquastic")
def _stoq(ctx):
    worst = -math.inf
    for n, s in [(2, 1), (3, 1), (2, 2)]:
        for H in (_fredkin_case(ctx, n, s), hm.build_motzkin(n, s)):
            C = H.matrix.csr.tocoo()
            off = C.data[C.row != C.col]
            worst = max(worst, float(off.max()) if off.size else 0.0)
    return worst, 0.0, worst <= 0.0, "max off-diagonal entry"


@check("hamiltonian", "balanced_block_matches_full")
def _balanced_block(ctx):
    worst = 0.0
    for n, s in [(2, 1), (3, 1), (4, 1), (5, 1), (2, 2), (3, 2)]:
        F = _fredkin_case(ctx, n, s)
        B = hm.build_balanced_sector(n, s)
        idx = F.basis.index(B.words)
        worst = max(worst, float(abs(F.matrix.csr[idx][:, idx] - B.matrix.csr).max()))
    return worst, 1e-15, worst <= 1e-15, "max |block of full H - direct build|"


@check("hamiltonian", "sector_invariance")
def _sectors(ctx):
    F = _fredkin_case(ctx, 3, 1)
    try:
        blocks = hm.sector_decompose(F)
    except ValueError as exc:
        return 1.0, 0.0, False, str(exc)
    bad = sum(1 for b in blocks.values() if (b.lambda_min > 1e-10) == b.label.balanced)
    return bad, 0, bad == 0, "balanced lambda_min = 0, all others > 0"


@check("hamiltonian", "gap_identity")
def _gap_identity(ctx):
    worst = 0.0
    cases = [(n, s) for s in (1, 2) for n in range(2, 8 if s == 1 else 6)]
    for n, s in cases:
        B = hm.build_balanced_sector(n, s)
        B = ctx.corrupt(B) if ctx.fault else B
        d = hm.gap(B)
        lam = mk.second_eigenvalue(hm.to_markov(B))
        worst = max(worst, abs(d - 2 * s * (n - 1) * (1 - lam)))
    return worst, 1e-9, worst <= 1e-9, "Delta(H) - 2s(n-1)(1 - lambda_2(P))"


@check("hamiltonian", "motzkin_schmidt_rank")
def _schmidt(ctx):
    bad = 0
    for n in range(1, 7):
        W, a = hm.uniform_state_words(n, 2, "motzkin")
        bad += int(hm.half_chain_entropy(W, a).schmidt_rank != 2 ** (n + 1) - 1)
    return bad, 0, bad == 0, "rank = (s^{n+1} - 1)/(s - 1), s = 2, n <= 6"


@check("hamiltonian", "entropy_log_growth")
def _entropy(ctx):
    ns = list(range(2, 9))
    S = [hm.half_chain_entropy(*hm.uniform_state_words(n, 1)).entropy_bits for n in ns]
    A = np.vstack([np.log2(ns), np.ones(len(ns))]).T
    slope = float(np.linalg.lstsq(A, S, rcond=None)[0][0])
    return slope, 0.5, 0.3 <= slope <= 0.8, "slope of S vs log2 n in [0.3, 0.8], n = 2..8"


# -- defect ------------------------------------------------------------------------


@check("defect", "kernel_identity_exact")
def _kid(ctx):
    bad = sum(not df.kernel_identity_exact(m) for m in range(3, df.EXACT_LIMIT + 1, 2))
    return bad, 0, bad == 0, "alpha_j g_j = beta_j g_{j+2} in rationals, m <= 51"


@check("defect", "h_move_residual")
def _hmr(ctx):
    worst = max(df.h_move_residual(m) for m in range(3, 202, 2))
    return worst, 1e-12, worst <= 1e-12, "||H_move g||, odd m <= 201"


@check("defect", "gamma_rank_one_psd")
def _gamma(ctx):
    worst = 0.0
    for m in (5, 11, 21):
        for v in df.build_heff(m).gamma_vectors():
            ev = np.linalg.eigvalsh(np.outer(v, v))
            worst = max(worst, -ev.min(), abs(ev[-1] - v @ v), np.sort(np.abs(ev))[-2])
    return worst, 1e-14, worst <= 1e-14, "Gamma_j spectrum {0, alpha^2 + beta^2}"


@check("defect", "walk_bounds")
def _wb(ctx):
    bad = sum(not df.walk_bounds(m, s).ok for m in range(3, 202, 2) for s in (1, 2))
    return bad, 0, bad == 0, "1/(32s) <= P(j, j+-2) <= 1/(2s)"


@check("defect", "walk_congestion")
def _cong(ctx):
    worst = math.inf
    for m in range(3, df.EXACT_LIMIT + 1, 2):
        ch = df.mapped_walk(m)
        ch.check()
        r = mk.congestion_rho(ch, mk.interval_paths(ch.size))
        worst = min(worst, r.gap / r.bound)
    return worst, 1.0, worst >= 1 - 1e-9, "min (1 - lambda_2) * rho * L, odd m <= 51"


@check("defect", "sublattice_decoupling")
def _sub(ctx):
    H = df.build_heff(21).matrix()
    worst = float(np.abs(H[0::2, 1::2]).max())
    return worst, 0.0, worst == 0.0, "H_eff between odd and even sites"


@check("defect", "zero_energy_positions")
def _zero(ctx):
    bad = 0
    for m in (3, 5, 7):
        H = df.build_single_defect(m, 1, 0.0)
        ev = np.linalg.eigvalsh(H.matrix.to_dense())
        bad += int(np.sum(np.abs(ev) < 1e-10) != (m + 1) // 2)
        bad += int(df.defect_ground_energy(m, 1, 1.0) <= 1e-10)
    return bad, 0, bad == 0, "kernel dim = #odd positions at eps = 0; gapped at eps = 1"


@check("defect", "first_order_projected")
def _fo(ctx):
    worst = 0.0
    for m in (5, 7):
        r = df.first_order_check(m, 1, variant="projected")
        worst = max(worst, abs(r.slope - 1))
    return worst, 0.2, worst <= 0.2, "|slope - 1| of |lambda/eps - lambda_1(projected)| vs eps"


# -- excursion ----------------------------------------------------------------------


@check("excursion", "airy_zeros")
def _airy(ctx):
    z = ex.airy_zeros()
    worst = max(abs(ex.airy_ai(a)) for a in z)
    ok = worst <= 1e-10 and abs(z[0] + 2.33811) <= 1e-5
    return worst, 1e-10, ok, "|Ai(a_j)|, j <= 40"


@check("excursion", "density_moments")
def _dens(ctx):
    z, m1, sd = ex.density_moments()
    mean, std = ex.excursion_moments()
    worst = max(abs(z - 1) / 1e-6, abs(m1 - mean) / 1e-4, abs(sd - std) / 1e-4)
    return worst, 1.0, worst <= 1.0, "normalization 1e-6, mean and std 1e-4 (scaled)"


@check("excursion", "density_positive")
def _pos(ctx):
    worst = min(
        (v.value + v.roundoff) for v in (ex.density_f_A(x) for x in np.linspace(0.05, 3.0, 60))
    )
    return worst, 0.0, worst >= 0.0, "min f_A + roundoff bound on [0.05, 3]"


@check("excursion", "twisted_dual_evaluation")
def _twist(ctx):
    worst = 0.0
    for s, nmax in ((1, 10), (2, 6 if ctx.quick else 8)):
        for n in range(2, nmax + 1):
            for th in (0.0, 0.01, 0.1, ex.paper_theta(n)):
                worst = max(worst, ex.twisted_energy(n, s, th, tol=math.inf).mismatch)
    return worst, 1e-10, worst <= 1e-10, "|direct - pair formula|"


@check("excursion", "variational_inequality")
def _var(ctx):
    worst = math.inf
    for n in range(2, 9):
        th = ex.paper_theta(n)
        e = ex.twisted_energy(n, 1, th).direct
        ov = abs(ex.overlap_with_ground(n, 1, th)) ** 2
        d = hm.gap(hm.build_balanced_sector(n, 1))
        worst = min(worst, e - d * (1 - ov))
    return worst, 0.0, worst >= -1e-10, "<phi|H|phi> - Delta (1 - |<D|phi>|^2), n <= 8"
