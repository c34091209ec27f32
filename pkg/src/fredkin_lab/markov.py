"""Reversible Markov chains on path spaces and their spectral bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import combinatorics as cb
from .linalg import extreme_eigs, symmetrize_chain

CHAIN_KINDS = (
    "fredkin",
    "peak_displacing",
    "lattice",
    "positive_lattice",
    "hamiltonian_mapped",
    "hopping_walk",
)
DEFAULT_STATE_CAP = 500_000


class ChainError(ValueError):
    """A chain violates stochasticity, stationarity or reversibility."""


@dataclass(frozen=True)
class ChainSpec:
    kind: str
    states: np.ndarray
    P: sp.csr_matrix
    pi: np.ndarray
    n: int = 0
    s: int = 1

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def violations(self) -> dict[str, float]:
        P, pi = self.P, self.pi
        rows = np.asarray(P.sum(axis=1)).ravel()
        flow = P.multiply(pi[:, None]).tocsr()
        return {
            "row_sum": float(np.max(np.abs(rows - 1.0))),
            "negative": float(max(0.0, -P.data.min())) if P.nnz else 0.0,
            "stationarity_l1": float(np.abs(P.T @ pi - pi).sum()),
            "detailed_balance": float(abs(flow - flow.T).max()) if flow.nnz else 0.0,
        }

    def check(self, tol: float = 1e-12, stationarity_tol: float = 1e-10) -> dict[str, float]:
        v = self.violations()
        if v["row_sum"] > tol or v["negative"] > tol:
            raise ChainError(f"{self.kind}: not stochastic {v}")
        if v["stationarity_l1"] > stationarity_tol:
            raise ChainError(f"{self.kind}: pi is not stationary {v}")
        if v["detailed_balance"] > tol:
            raise ChainError(f"{self.kind}: not reversible {v}")
        return v

    def state_label(self, i: int) -> str:
        row = self.states[i]
        if np.ndim(row) == 0:
            return str(int(row))
        return cb.format_word(row.tolist())


def _csr_from_counts(N: int, rows, cols, vals) -> sp.csr_matrix:
    P = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    P.sum_duplicates()
    return P


def _with_idle(N: int, rows, cols, vals) -> sp.csr_matrix:
    off = _csr_from_counts(N, rows, cols, vals)
    stay = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    return (off + sp.diags(stay)).tocsr()


def _check_cap(count: int, cap: int) -> None:
    if count > cap:
        raise cb.CapExceeded(f"state count {count} exceeds cap {cap}")


def fredkin_edges(W: np.ndarray, s: int, index: cb.WordIndex | None = None):
    """Distinct (row, col) Fredkin-move pairs of a sorted word array."""
    index = index or cb.WordIndex(W, s)
    N, L = W.shape
    rows, cols = [], []
    for j in range(L - 2):
        a, b, c = (W[:, j].astype(np.int16), W[:, j + 1].astype(np.int16), W[:, j + 2].astype(np.int16))
        for mask, tgt in (
            ((b > 0) & (c == -b) & (a != 0), (j + 1, j + 2, j)),
            ((a > 0) & (b == -a) & (c != 0), (j + 2, j, j + 1)),
        ):
            r = np.nonzero(mask)[0]
            if len(r):
                V = W[r].copy()
                V[:, j : j + 3] = W[r][:, list(tgt)]
                rows.append(r)
                cols.append(index.lookup(V))
    for j in range(L - 1):
        a, b = W[:, j].astype(np.int16), W[:, j + 1].astype(np.int16)
        r = np.nonzero((a > 0) & (b == -a))[0]
        for k2 in range(1, s + 1):
            rr = r[W[r, j] != k2]
            if len(rr):
                V = W[rr].copy()
                V[:, j] = k2
                V[:, j + 1] = -k2
                rows.append(rr)
                cols.append(index.lookup(V))
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    keep = (cols >= 0) & (cols != rows)
    pairs = np.unique(np.stack([rows[keep], cols[keep]], axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def peak_displace_counts(W: np.ndarray, s: int, index: cb.WordIndex | None = None):
    """Move counts (row, col, count) of the peak-displacing chain, idling included.

    Each count is out of (L-1)^2 * s equally likely (cut, insert, color) draws.
    """
    index = index or cb.WordIndex(W, s)
    N, L = W.shape
    rows, cols, vals = [], [], []
    for i in range(1, L):
        a, b = W[:, i - 1].astype(np.int16), W[:, i].astype(np.int16)
        has = (a > 0) & (b == -a)
        r = np.nonzero(has)[0]
        idle = np.nonzero(~has)[0]
        rows.append(idle)
        cols.append(idle)
        vals.append(np.full(len(idle), (L - 1) * s))
        if not len(r):
            continue
        reduced = np.delete(W[r], [i - 1, i], axis=1)
        for pos in range(L - 1):
            for c in range(1, s + 1):
                V = np.empty((len(r), L), dtype=W.dtype)
                V[:, :pos] = reduced[:, :pos]
                V[:, pos] = c
                V[:, pos + 1] = -c
                V[:, pos + 2 :] = reduced[:, pos:]
                rows.append(r)
                cols.append(index.lookup(V))
                vals.append(np.ones(len(r), dtype=np.int64))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def build_chain(
    kind: str,
    n: int,
    s: int = 1,
    move_prob: float = 0.5,
    cap: int = DEFAULT_STATE_CAP,
) -> ChainSpec:
    """Construct one of the path-space chains as an explicit transition matrix.

    ``fredkin``: each distinct Fredkin neighbor is reached with probability
    ``move_prob / Z`` where ``Z = max(2n - 2, max degree)``; for s = 1 this is
    "pick one of the 2n-2 windows, apply its move with probability 1/2".
    """
    if kind not in ("fredkin", "peak_displacing", "lattice", "positive_lattice"):
        raise ValueError(f"build_chain does not construct {kind!r} chains")
    if n < 1:
        raise ValueError("n must be >= 1")
    L = 2 * n
    space = "lattice" if kind == "lattice" else "dyck"
    if kind in ("lattice", "positive_lattice") and s != 1:
        raise ValueError("lattice chains are uncolored")
    _check_cap(cb.count_words(L, s, space), cap)
    W = cb.path_array(L, s, space, max_length=max(L, cb.DEFAULT_MAX_LENGTH))
    N = len(W)
    index = cb.WordIndex(W, s)
    if kind == "fredkin":
        if not 0 < move_prob <= 1:
            raise ValueError("move_prob must be in (0, 1]")
        r, c = fredkin_edges(W, s, index)
        deg = np.bincount(r, minlength=N) if len(r) else np.zeros(N, dtype=int)
        Z = max(1, L - 2, int(deg.max()) if N else 0)
        P = _with_idle(N, r, c, np.full(len(r), move_prob / Z))
    elif kind == "peak_displacing":
        r, c, v = peak_displace_counts(W, s, index)
        P = _csr_from_counts(N, r, c, v / ((L - 1) ** 2 * s))
    else:
        rows, cols = [], []
        for j in range(L - 1):
            a, b = W[:, j], W[:, j + 1]
            rr = np.nonzero(a != b)[0]
            V = W[rr].copy()
            V[:, j], V[:, j + 1] = W[rr, j + 1], W[rr, j]
            idx = index.lookup(V)
            keep = idx >= 0  # positive_lattice idles on moves that would go negative
            rows.append(rr[keep])
            cols.append(idx[keep])
        r, c = np.concatenate(rows), np.concatenate(cols)
        P = _with_idle(N, r, c, np.full(len(r), 1.0 / (2 * (L - 1))))
    pi = np.full(N, 1.0 / N)
    return ChainSpec(kind, W, P, pi, n, s)


def chain_from_matrix(kind: str, states, P, pi, n: int = 0, s: int = 1) -> ChainSpec:
    return ChainSpec(kind, np.asarray(states), sp.csr_matrix(P), np.asarray(pi, dtype=float), n, s)


# -- spectra --------------------------------------------------------------------


def chain_eigenvalues(chain: ChainSpec, k: int = 2, which: str = "largest", tol: float = 1e-10) -> np.ndarray:
    S = symmetrize_chain(chain.P, chain.pi)
    return extreme_eigs(S, min(k, chain.size), which, tol, vectors=False).eigenvalues


def second_eigenvalue(chain: ChainSpec, tol: float = 1e-10) -> float:
    """Second largest eigenvalue lambda_1 of P (lambda_0 = 1)."""
    if chain.size < 2:
        return -math.inf
    vals = chain_eigenvalues(chain, 2, "largest", tol)
    return float(vals[0])


def spectral_gap(chain: ChainSpec, tol: float = 1e-10) -> float:
    """1 - lambda_1; infinite for a single-state chain."""
    if chain.size < 2:
        return math.inf
    return 1.0 - second_eigenvalue(chain, tol)


def absolute_gap(chain: ChainSpec, tol: float = 1e-10) -> float:
    """1 - max(lambda_1, |lambda_min|)."""
    if chain.size < 2:
        return math.inf
    lam1 = second_eigenvalue(chain, tol)
    lam_min = float(chain_eigenvalues(chain, 1, "smallest", tol)[0])
    return 1.0 - max(lam1, abs(lam_min))


# -- total variation mixing -----------------------------------------------------


def tv_mixing_curve(
    chain: ChainSpec,
    start: int,
    t_max: int = 100_000,
    floor: float = 1e-4,
) -> list[tuple[int, float]]:
    """Exact (t, ||P^t(x0, .) - pi||_TV) until the distance drops below ``floor``."""
    if chain.size > 100_000:
        raise cb.CapExceeded(f"state count {chain.size} exceeds TV evolution cap 100000")
    PT = chain.P.T.tocsr()
    mu = np.zeros(chain.size)
    mu[start] = 1.0
    out = []
    for t in range(t_max + 1):
        d = 0.5 * np.abs(mu - chain.pi).sum()
        out.append((t, float(d)))
        if d <= floor:
            break
        mu = PT @ mu
    return out


def mixing_time_from_curve(curve: list[tuple[int, float]], eps: float) -> int:
    """First t after which the (non-increasing) TV distance stays <= eps."""
    last_bad = -1
    for t, d in curve:
        if d > eps:
            last_bad = t
    if last_bad == curve[-1][0]:
        raise ValueError("curve too short to resolve the mixing time")
    return last_bad + 1


def all_start_tv(chain: ChainSpec, eps: float, t_max: int = 1_000_000) -> np.ndarray:
    """tau_x(eps) for every start x, evolving all starts at once (dense)."""
    N = chain.size
    if N > 4000:
        raise cb.CapExceeded(f"all-start TV evolution limited to 4000 states, got {N}")
    P = chain.P.toarray()
    M = np.eye(N)
    tau = np.full(N, -1, dtype=np.int64)
    for t in range(t_max + 1):
        d = 0.5 * np.abs(M - chain.pi[None, :]).sum(axis=1)
        newly = (tau < 0) & (d <= eps)
        tau[newly] = t
        if np.all(tau >= 0):
            return tau
        M = M @ P
    raise RuntimeError("mixing did not complete within t_max")


@dataclass
class MixingReport:
    eps: float
    lambda1: float
    lambda_star: float
    tau_x: np.ndarray
    upper_x: np.ndarray
    lower: float

    @property
    def tau(self) -> int:
        return int(self.tau_x.max())

    @property
    def upper_ok(self) -> bool:
        return bool(np.all(self.tau_x <= self.upper_x + 1e-9))

    @property
    def lower_ok(self) -> bool:
        return self.tau >= self.lower - 1e-9


def mixing_bounds(chain: ChainSpec, eps: float = 0.25) -> MixingReport:
    """Measured tau_x(eps) against the eigenvalue bounds.

    Upper: tau_x <= log(1/(pi(x) eps)) / (1 - lambda_*), with lambda_* the
    largest non-unit eigenvalue modulus.  Lower: tau >= lambda_1 log(1/(2 eps))
    / (2 (1 - lambda_1)).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    lam1 = second_eigenvalue(chain)
    lam_min = float(chain_eigenvalues(chain, 1, "smallest")[0])
    lam_star = max(lam1, abs(lam_min))
    tau_x = all_start_tv(chain, eps)
    with np.errstate(divide="ignore"):
        upper = np.log(1.0 / (chain.pi * eps)) / (1.0 - lam_star)
    lower = lam1 / (2.0 * (1.0 - lam1)) * math.log(1.0 / (2.0 * eps)) if lam1 > 0 else 0.0
    return MixingReport(eps, lam1, lam_star, tau_x, upper, lower)


# -- canonical paths ------------------------------------------------------------


@dataclass
class CanonicalPathSet:
    """State-index paths keyed by (start, end) pairs of a reference chain."""

    paths: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    @property
    def max_length(self) -> int:
        return max((len(p) - 1 for p in self.paths.values()), default=0)

    def __len__(self) -> int:
        return len(self.paths)


def walk_the_peak_paths(reference: ChainSpec) -> CanonicalPathSet:
    """Walk-the-peak Fredkin paths for every peak-displacing edge x != y."""
    s = reference.s
    W = reference.states
    lookup = {tuple(int(v) for v in row): i for i, row in enumerate(W)}
    out = CanonicalPathSet()
    Pc = reference.P.tocoo()
    edges: dict[int, set[int]] = {}
    for a, b in zip(Pc.row, Pc.col):
        if a != b:
            edges.setdefault(int(a), set()).add(int(b))
    for x, targets in edges.items():
        xw = cb.PathWord(tuple(int(v) for v in W[x]))
        for y in targets:
            yw = cb.PathWord(tuple(int(v) for v in W[y]))
            path = cb.canonical_path(xw, yw, s)
            out.paths[(x, y)] = [lookup[p.steps] for p in path]
    return out


def interval_paths(size: int) -> CanonicalPathSet:
    """Paths i, i +- 1, ..., j on a path graph, for every ordered pair."""
    out = CanonicalPathSet()
    for i in range(size):
        for j in range(size):
            if i != j:
                step = 1 if j > i else -1
                out.paths[(i, j)] = list(range(i, j + step, step))
    return out


@dataclass
class ComparisonResult:
    A: float
    edge: tuple[int, int]
    load: float
    target_gap: float
    reference_gap: float
    approx_reference_rate: float
    max_path_length: int
    max_paths_through_edge: int

    @property
    def bound(self) -> float:
        return self.reference_gap / self.A

    @property
    def holds(self) -> bool:
        return self.target_gap >= self.bound * (1 - 1e-9)


def comparison_constant(target: ChainSpec, reference: ChainSpec, paths: CanonicalPathSet) -> ComparisonResult:
    """Comparison constant A for (target P, reference P~) and the implied gap bound.

    A = max over target edges (z, w) of
    sum_{gamma_xy containing (z, w)} |gamma_xy| pi~(x) P~(x, y) / (pi(z) P(z, w)).
    """
    if target.size != reference.size or not np.array_equal(target.states, reference.states):
        raise ValueError("chains must share the same state space")
    N = target.size
    R = reference.P.tocoo()
    zs, ws, weights = [], [], []
    for x, y, p in zip(R.row, R.col, R.data):
        if x == y or p == 0:
            continue
        key = (int(x), int(y))
        if key not in paths.paths:
            raise ValueError(f"reference edge {key} has no registered path")
        gamma = paths.paths[key]
        if gamma[0] != x or gamma[-1] != y:
            raise ValueError(f"path for {key} does not connect its endpoints")
        w = (len(gamma) - 1) * reference.pi[x] * p
        zs.extend(gamma[:-1])
        ws.extend(gamma[1:])
        weights.extend([w] * (len(gamma) - 1))
    zs = np.asarray(zs, dtype=np.int64)
    ws = np.asarray(ws, dtype=np.int64)
    keys = zs * N + ws
    uniq, inv = np.unique(keys, return_inverse=True)
    load = np.bincount(inv, weights=np.asarray(weights))
    count = np.bincount(inv)
    z, w = uniq // N, uniq % N
    Pzw = np.asarray(target.P[z, w]).ravel()
    if np.any(Pzw <= 0):
        raise ValueError("a canonical path uses a pair that is not a target-chain edge")
    ratio = load / (target.pi[z] * Pzw)
    k = int(np.argmax(ratio))
    L = 2 * target.n
    return ComparisonResult(
        A=float(ratio[k]),
        edge=(int(z[k]), int(w[k])),
        load=float(load[k]),
        target_gap=spectral_gap(target),
        reference_gap=spectral_gap(reference),
        approx_reference_rate=1.0 / (max(target.s, 1) * L**2) if L else math.nan,
        max_path_length=paths.max_length,
        max_paths_through_edge=int(count.max()),
    )


@dataclass
class CongestionResult:
    rho: float
    length: int
    gap: float

    @property
    def bound(self) -> float:
        return 1.0 / (self.rho * self.length)

    @property
    def holds(self) -> bool:
        return self.gap >= self.bound * (1 - 1e-9)


def congestion_rho(chain: ChainSpec, paths: CanonicalPathSet) -> CongestionResult:
    """Maximum edge load rho over paths between all ordered state pairs.

    Loads are accumulated on undirected edges {a, b}: each ordered pair (s, t)
    adds pi(s) pi(t) to every edge its path crosses, and the load is divided
    by the ergodic flow pi(a) P(a, b).
    """
    N = chain.size
    if N < 2:
        raise ValueError("congestion is undefined for a single-state chain")
    a_list, b_list, w_list = [], [], []
    for s_ in range(N):
        for t in range(N):
            if s_ == t:
                continue
            gamma = paths.paths.get((s_, t))
            if gamma is None:
                raise ValueError(f"no path between states {s_} and {t}")
            g = np.asarray(gamma)
            a_list.append(np.minimum(g[:-1], g[1:]))
            b_list.append(np.maximum(g[:-1], g[1:]))
            w_list.append(np.full(len(g) - 1, chain.pi[s_] * chain.pi[t]))
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    keys = a * N + b
    uniq, inv = np.unique(keys, return_inverse=True)
    load = np.bincount(inv, weights=np.concatenate(w_list))
    ea, eb = uniq // N, uniq % N
    Q = chain.pi[ea] * np.asarray(chain.P[ea, eb]).ravel()
    if np.any(Q <= 0):
        raise ValueError("a path crosses a pair with zero transition probability")
    rho = float(np.max(load / Q))
    return CongestionResult(rho, paths.max_length, spectral_gap(chain))


# -- induced chain --------------------------------------------------------------


def induced_chain(chain: ChainSpec, subset) -> ChainSpec:
    """Restriction to ``subset``: moves leaving the subset become idling."""
    idx = np.asarray(sorted(set(int(i) for i in subset)), dtype=np.int64)
    if len(idx) == 0:
        raise ValueError("subset must be non-empty")
    sub = chain.P[idx][:, idx].tocsr()
    off = sub - sp.diags(sub.diagonal())
    stay = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    P = (off + sp.diags(stay)).tocsr()
    pi = chain.pi[idx] / chain.pi[idx].sum()
    return ChainSpec(chain.kind, chain.states[idx], P, pi, chain.n, chain.s)


def gap_markov_constant(chain: ChainSpec, gap: float | None = None) -> float:
    """Implied c in gap >= s * min P(z, w) / (c n^{15/2})."""
    gap = spectral_gap(chain) if gap is None else gap
    P = chain.P.tocoo()
    off = P.data[(P.row != P.col) & (P.data > 0)]
    return chain.s * float(off.min()) / (gap * chain.n**7.5)


def peak_displacing_reference_gap(n: int, s: int) -> float:
    return s / (math.sqrt(math.pi) * n**5.5)


def loglog_slope(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log(y) against log(x), with its standard error."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(lx) - 2, 1)
    resid = ly - A @ coef
    se = math.sqrt((resid @ resid) / dof / ((lx - lx.mean()) ** 2).sum()) if len(lx) > 2 else 0.0
    return float(coef[0]), se

