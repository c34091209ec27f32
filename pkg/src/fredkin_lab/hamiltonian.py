"""Fredkin and Motzkin spin-chain Hamiltonians.

Two independent assemblies are provided.  :func:`build_fredkin` and
:func:`build_motzkin` sum Kronecker-embedded local projectors over the full
``d**(2n)`` spin basis.  :func:`word_hamiltonian` applies the same projectors
as rewrite rules to an explicit list of words, which is how the balanced
(colored-Dyck) sector and the defect sector are built without touching the
full space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import combinatorics as cb
from .linalg import SparseSymMatrix, blockwise_spectrum, extreme_eigs
from .markov import ChainError, ChainSpec

DEFAULT_DIM_CAP = 2**20
INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Term(NamedTuple):
    kind: str  # U, D, phi, cross, boundary
    site: int  # 1-based first site
    colors: tuple[int, ...]


@dataclass(frozen=True)
class SpinBasis:
    """Step-string basis of a chain of ``length`` sites.

    Local states are ordered ``0 < d^1 < ... < d^s < u^1 < ... < u^s`` (the
    flat state only for Motzkin chains), so integer index order equals the
    lexicographic order of the word serialization.
    """

    model: str
    s: int
    length: int

    @property
    def flat(self) -> bool:
        return self.model == "motzkin"

    @property
    def d(self) -> int:
        return 2 * self.s + (1 if self.flat else 0)

    @property
    def dim(self) -> int:
        return self.d**self.length

    def local_values(self) -> np.ndarray:
        """Signed step value of each local code."""
        s = self.s
        vals = [0] if self.flat else []
        vals += [-k for k in range(1, s + 1)] + list(range(1, s + 1))
        return np.asarray(vals, dtype=np.int16)

    def local_code(self, step: int) -> int:
        off = 1 if self.flat else 0
        if step == 0:
            if not self.flat:
                raise ValueError("flat step in a Fredkin basis")
            return 0
        return off + (-step - 1 if step < 0 else self.s + step - 1)

    def words(self, idx=None) -> np.ndarray:
        idx = np.arange(self.dim, dtype=np.int64) if idx is None else np.asarray(idx, dtype=np.int64)
        digits = np.empty((len(idx), self.length), dtype=np.int64)
        rem = idx.copy()
        for pos in range(self.length - 1, -1, -1):
            digits[:, pos] = rem % self.d
            rem //= self.d
        return self.local_values()[digits]

    def index(self, W) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W))
        lut = {int(v): c for c, v in enumerate(self.local_values())}
        codes = np.vectorize(lut.__getitem__, otypes=[np.int64])(W) if W.size else np.zeros(W.shape, np.int64)
        out = np.zeros(len(W), dtype=np.int64)
        for pos in range(self.length):
            out = out * self.d + codes[:, pos]
        return out


@dataclass
class HamiltonianSpec:
    matrix: SparseSymMatrix
    model: str
    n: int
    s: int
    basis: SpinBasis | None = None
    words: np.ndarray | None = None
    terms: list[Term] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def basis_words(self) -> np.ndarray:
        if self.words is not None:
            return self.words
        return self.basis.words()


# -- local projectors ------------------------------------------------------------


def _local_state(basis: SpinBasis, steps) -> int:
    idx = 0
    for x in steps:
        idx = idx * basis.d + basis.local_code(x)
    return idx


def _local_vector(basis: SpinBasis, vec) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array([_local_state(basis, st) for st, _ in vec])
    amp = np.array([a for _, a in vec])
    return idx, amp


def _projector(basis: SpinBasis, k: int, vec: list[tuple[tuple[int, ...], float]]) -> sp.coo_matrix:
    D = basis.d**k
    idx, amp = _local_vector(basis, vec)
    rows = np.repeat(idx, len(idx))
    cols = np.tile(idx, len(idx))
    vals = np.outer(amp, amp).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(D, D))


def fredkin_terms(n: int, s: int) -> list[Term]:
    L = 2 * n
    terms = []
    for j in range(1, L - 1):
        for k1 in range(1, s + 1):
            for k2 in range(1, s + 1):
                terms.append(Term("U", j, (k1, k2)))
                terms.append(Term("D", j, (k1, k2)))
    for j in range(1, L):
        for k1 in range(1, s + 1):
            for k2 in range(k1 + 1, s + 1):
                terms.append(Term("phi", j, (k1, k2)))
        for k1 in range(1, s + 1):
            for k2 in range(1, s + 1):
                if k1 != k2:
                    terms.append(Term("cross", j, (k1, k2)))
    for k in range(1, s + 1):
        terms.append(Term("boundary", 1, (-k,)))
        terms.append(Term("boundary", L, (k,)))
    return terms


def motzkin_terms(n: int, s: int) -> list[Term]:
    L = 2 * n
    terms = []
    for j in range(1, L):
        for k in range(1, s + 1):
            terms += [Term("U", j, (k,)), Term("D", j, (k,)), Term("phi", j, (k,))]
        for k1 in range(1, s + 1):
            for k2 in range(1, s + 1):
                if k1 != k2:
                    terms.append(Term("cross", j, (k1, k2)))
    for k in range(1, s + 1):
        terms.append(Term("boundary", 1, (-k,)))
        terms.append(Term("boundary", L, (k,)))
    return terms


def term_vector(term: Term, model: str) -> tuple[int, list[tuple[tuple[int, ...], float]]]:
    """(support size, [(local steps, amplitude)]) of a rank-1 projector term."""
    r = INV_SQRT2
    if term.kind in ("cross", "boundary"):
        if term.kind == "cross":
            k1, k2 = term.colors
            return 2, [((k1, -k2), 1.0)]
        return 1, [((term.colors[0],), 1.0)]
    if model == "fredkin":
        k1, k2 = term.colors
        if term.kind == "U":
            return 3, [((k1, k2, -k2), r), ((k2, -k2, k1), -r)]
        if term.kind == "D":
            return 3, [((-k1, k2, -k2), r), ((k2, -k2, -k1), -r)]
        return 2, [((k1, -k1), r), ((k2, -k2), -r)]
    (k,) = term.colors
    if term.kind == "U":
        return 2, [((0, k), r), ((k, 0), -r)]
    if term.kind == "D":
        return 2, [((0, -k), r), ((-k, 0), -r)]
    return 2, [((0, 0), r), ((k, -k), -r)]


def embed_term(term: Term, basis: SpinBasis) -> sp.csr_matrix:
    width, vec = term_vector(term, basis.model)
    local = _projector(basis, width, vec)
    left = basis.d ** (term.site - 1)
    right = basis.d ** (basis.length - term.site - width + 1)
    return sp.kron(sp.kron(sp.identity(left, format="csr"), local), sp.identity(right, format="csr"), format="csr")


def _assemble(basis: SpinBasis, terms: list[Term]) -> sp.csr_matrix:
    # sum the local operators per (site, width) first, then embed each group once
    groups: dict[tuple[int, int], tuple[list, list, list]] = {}
    for t in terms:
        width, vec = term_vector(t, basis.model)
        idx, amp = _local_vector(basis, vec)
        r, c, v = groups.setdefault((t.site, width), ([], [], []))
        r.append(np.repeat(idx, len(idx)))
        c.append(np.tile(idx, len(idx)))
        v.append(np.outer(amp, amp).ravel())
    H = sp.csr_matrix((basis.dim, basis.dim))
    for (site, width), (r, c, v) in sorted(groups.items()):
        D = basis.d**width
        local = sp.coo_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(D, D)).tocsr()
        left = basis.d ** (site - 1)
        right = basis.d ** (basis.length - site - width + 1)
        H = H + sp.kron(sp.kron(sp.identity(left, format="csr"), local), sp.identity(right, format="csr"), format="csr")
    return H.tocsr()


def term_residuals(H: "HamiltonianSpec", psi: np.ndarray) -> np.ndarray:
    """||T psi|| for every projector term T, without embedding the terms.

    For T = |v><v| acting on sites j..j+w-1, ||T psi|| = ||v^T Psi|| with Psi
    the state reshaped to (left, d^w, right).
    """
    basis = H.basis
    out = np.empty(len(H.terms))
    for k, t in enumerate(H.terms):
        width, vec = term_vector(t, basis.model)
        idx, amp = _local_vector(basis, vec)
        left = basis.d ** (t.site - 1)
        Psi = psi.reshape(left, basis.d**width, -1)
        out[k] = np.linalg.norm(np.tensordot(amp, Psi[:, idx, :], axes=([0], [1])))
    return out


def _check_dim(dim: int, cap: int) -> None:
    if dim > cap:
        raise cb.CapExceeded(f"Hilbert space dimension {dim} exceeds cap {cap}")


def build_fredkin(n: int, s: int = 1, cap: int = DEFAULT_DIM_CAP) -> HamiltonianSpec:
    """Full-basis Fredkin Hamiltonian on 2n sites with s colors.

    Exchange projectors act on three consecutive sites; the recoloring,
    crossing and boundary projectors are the one- and two-site terms.
    """
    basis = SpinBasis("fredkin", s, 2 * n)
    _check_dim(basis.dim, cap)
    terms = fredkin_terms(n, s)
    H = _assemble(basis, terms)
    return HamiltonianSpec(SparseSymMatrix.from_sparse(H), "fredkin", n, s, basis=basis, terms=terms)


def build_motzkin(n: int, s: int = 1, cap: int = DEFAULT_DIM_CAP) -> HamiltonianSpec:
    basis = SpinBasis("motzkin", s, 2 * n)
    _check_dim(basis.dim, cap)
    terms = motzkin_terms(n, s)
    H = _assemble(basis, terms)
    return HamiltonianSpec(SparseSymMatrix.from_sparse(H), "motzkin", n, s, basis=basis, terms=terms)


# -- rule-based assembly on word lists -------------------------------------------


def word_hamiltonian(
    W: np.ndarray,
    s: int,
    boundary: bool = True,
    cross: bool = True,
    defect_eps: float | None = None,
) -> sp.csr_matrix:
    """Fredkin Hamiltonian restricted to the span of the sorted words ``W``.

    Off-diagonal moves whose target lies outside ``W`` are dropped, so the
    result is the compression of H onto span(W); it equals the exact block
    when ``W`` is closed under the moves.  With ``defect_eps`` set, a step
    value 0 is read as the marked defect ``x``: the exchange moves
    ``u^k d^k x <-> x u^k d^k`` and the pinning term ``|x><x|`` at site 1 are
    added with weight ``defect_eps``.
    """
    W = np.asarray(W)
    index = cb.WordIndex(W, s)
    N, L = W.shape
    rows, cols, vals = [], [], []

    def pair(mask, tgt, j, weight=1.0):
        r = np.nonzero(mask)[0]
        if not len(r):
            return
        V = W[r].copy()
        V[:, j : j + len(tgt)] = W[r][:, [j + t for t in tgt]]
        c = index.lookup(V)
        rows.append(r)
        cols.append(r)
        vals.append(np.full(len(r), 0.5 * weight))
        ok = c >= 0
        rows.append(r[ok])
        cols.append(c[ok])
        vals.append(np.full(int(ok.sum()), -0.5 * weight))

    Wi = W.astype(np.int16)
    for j in range(L - 2):
        a, b, c = Wi[:, j], Wi[:, j + 1], Wi[:, j + 2]
        pair((b > 0) & (c == -b) & (a != 0), (1, 2, 0), j)
        pair((a > 0) & (b == -a) & (c != 0), (2, 0, 1), j)
        if defect_eps is not None:
            pair((b > 0) & (c == -b) & (a == 0), (1, 2, 0), j, defect_eps)
            pair((a > 0) & (b == -a) & (c == 0), (2, 0, 1), j, defect_eps)
    for j in range(L - 1):
        a, b = Wi[:, j], Wi[:, j + 1]
        peak = (a > 0) & (b == -a)
        r = np.nonzero(peak)[0]
        for k2 in range(1, s + 1):
            rr = r[Wi[r, j] != k2]
            if not len(rr):
                continue
            V = W[rr].copy()
            V[:, j], V[:, j + 1] = k2, -k2
            cc = index.lookup(V)
            rows += [rr, rr[cc >= 0]]
            cols += [rr, cc[cc >= 0]]
            vals += [np.full(len(rr), 0.5), np.full(int((cc >= 0).sum()), -0.5)]
        if cross:
            r = np.nonzero((a > 0) & (b < 0) & (b != -a))[0]
            rows.append(r)
            cols.append(r)
            vals.append(np.ones(len(r)))
    if boundary:
        for r in (np.nonzero(Wi[:, 0] < 0)[0], np.nonzero(Wi[:, -1] > 0)[0]):
            rows.append(r)
            cols.append(r)
            vals.append(np.ones(len(r)))
    if defect_eps is not None:
        r = np.nonzero(Wi[:, 0] == 0)[0]
        rows.append(r)
        cols.append(r)
        vals.append(np.full(len(r), float(defect_eps)))
    if not rows:
        return sp.csr_matrix((N, N))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    H.sum_duplicates()
    return H


def build_balanced_sector(n: int, s: int = 1, cap: int = 500_000) -> HamiltonianSpec:
    """Fredkin Hamiltonian on the s^n C_n colored Dyck words."""
    count = s**n * cb.catalan(n)
    if count > cap:
        raise cb.CapExceeded(f"balanced sector dimension {count} exceeds cap {cap}")
    W = cb.path_array(2 * n, s, "dyck", max_length=max(2 * n, cb.DEFAULT_MAX_LENGTH))
    H = word_hamiltonian(W, s)
    return HamiltonianSpec(SparseSymMatrix.from_sparse(H), "fredkin", n, s, words=W)


def dyck_state(basis: SpinBasis, n: int | None = None) -> np.ndarray:
    """Uniform superposition of the balanced words of the full basis.

    Balanced means no unmatched steps and no color mismatch; with flat steps
    allowed these are the colored Motzkin words.
    """
    lab = sector_labels(basis.words())
    psi = (lab.sum(axis=1) == 0).astype(float)
    return psi / np.linalg.norm(psi)


# -- sectors ---------------------------------------------------------------------


class SectorLabel(NamedTuple):
    p: int  # unmatched down steps
    q: int  # unmatched up steps
    mismatch: bool

    @property
    def balanced(self) -> bool:
        return self.p == 0 and self.q == 0 and not self.mismatch

    def as_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "mismatch": bool(self.mismatch)}


def sector_labels(W: np.ndarray) -> np.ndarray:
    """(p, q, mismatch) per word from color-blind bracket matching."""
    W = np.asarray(W).astype(np.int16)
    N, L = W.shape
    stack = np.zeros((N, L + 1), dtype=np.int16)
    h = np.zeros(N, dtype=np.int64)
    p = np.zeros(N, dtype=np.int64)
    mis = np.zeros(N, dtype=bool)
    rows = np.arange(N)
    for pos in range(L):
        x = W[:, pos]
        up = x > 0
        stack[rows[up], h[up]] = x[up]
        h[up] += 1
        dn = x < 0
        matched = dn & (h > 0)
        top = stack[rows, np.maximum(h - 1, 0)]
        mis |= matched & (top != -x)
        h[matched] -= 1
        p += dn & ~matched
    return np.stack([p, h, mis.astype(np.int64)], axis=1)


@dataclass
class SectorBlock:
    label: SectorLabel
    indices: np.ndarray
    lambda_min: float
    gap: float

    @property
    def dim(self) -> int:
        return len(self.indices)

    def report(self) -> dict:
        return {"sector": self.label.as_dict(), "dim": self.dim, "lambda_min": self.lambda_min, "gap": self.gap}


def sector_decompose(H: HamiltonianSpec, tol: float = 1e-10) -> dict[SectorLabel, SectorBlock]:
    """Split a full Hamiltonian into (p, q, mismatch) blocks.

    Raises if any matrix element couples two different sectors.
    """
    A = H.matrix.csr
    labels = sector_labels(H.basis_words())
    key = labels[:, 0] * 4 * (H.basis.length + 1) + labels[:, 1] * 2 + labels[:, 2]
    Ac = A.tocoo()
    leak = Ac.data[key[Ac.row] != key[Ac.col]]
    if leak.size and np.abs(leak).max() > 0:
        raise ValueError("Hamiltonian couples different sectors")
    out = {}
    for k in np.unique(key):
        idx = np.nonzero(key == k)[0]
        lab = SectorLabel(int(labels[idx[0], 0]), int(labels[idx[0], 1]), bool(labels[idx[0], 2]))
        vals, _ = blockwise_spectrum(A[idx][:, idx], 2, tol)
        gap = float(vals[1] - vals[0]) if len(vals) > 1 else math.nan
        out[lab] = SectorBlock(lab, idx, float(vals[0]), gap)
    return out


# -- kernel, gap, Markov map -----------------------------------------------------


@dataclass
class KernelReport:
    lambda_min: float
    kernel_dim: int
    overlap: float  # |<psi_expected|kernel projector|psi_expected>|
    term_residual: float


BATCH_BLOCK = 64


def _blocks_by_size(A: sp.csr_matrix) -> dict[int, np.ndarray]:
    ncomp, labels = connected_components(abs(A) + sp.eye(A.shape[0]), directed=False)
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    out: dict[int, list] = {}
    for c in range(ncomp):
        out.setdefault(int(sizes[c]), []).append(order[starts[c] : starts[c + 1]])
    return {k: np.array(v) for k, v in out.items()}


def kernel_report(H: HamiltonianSpec, expected: np.ndarray, zero_tol: float = 1e-10, check_terms: bool = True) -> KernelReport:
    """Zero-mode count of H (per connected block) and overlap with ``expected``.

    Blocks up to :data:`BATCH_BLOCK` states are diagonalized together in one
    batched dense call; larger ones go through :func:`extreme_eigs`.
    """
    A = H.matrix.csr
    kdim = 0
    lam_min = math.inf
    weight = 0.0
    for size, idx in sorted(_blocks_by_size(A).items()):
        if size == 1:
            vals = A.diagonal()[idx[:, 0]]
            lam_min = min(lam_min, float(vals.min()))
            zero = np.abs(vals) <= zero_tol
            kdim += int(zero.sum())
            weight += float(np.sum(expected[idx[zero, 0]] ** 2))
            continue
        if size <= BATCH_BLOCK:
            dense = np.stack([A[i][:, i].toarray() for i in idx])
            ev, evec = np.linalg.eigh(dense)
            lam_min = min(lam_min, float(ev[:, 0].min()))
            zero = np.abs(ev) <= zero_tol
            kdim += int(zero.sum())
            proj = np.einsum("bij,bi->bj", evec, expected[idx])
            weight += float(np.sum(proj[zero] ** 2))
            continue
        for i in idx:
            sub = A[i][:, i]
            spec = extreme_eigs(sub, 2, "smallest")
            vals, vecs = spec.eigenvalues, spec.eigenvectors
            lam_min = min(lam_min, float(vals[0]))
            zero = np.abs(vals) <= zero_tol
            if zero.all():
                # both computed modes vanish: count the whole null space densely
                vals, vecs = np.linalg.eigh(sub.toarray())
                zero = np.abs(vals) <= zero_tol
            kdim += int(zero.sum())
            if zero.any():
                proj = vecs[:, zero].T @ expected[i]
                weight += float(proj @ proj)
    res = 0.0
    if check_terms and H.terms and H.basis is not None:
        res = float(term_residuals(H, expected).max())
    return KernelReport(lam_min, kdim, weight, res)


def gap(H: HamiltonianSpec | SparseSymMatrix | sp.spmatrix, tol: float = 1e-10) -> float:
    """Difference of the two smallest eigenvalues."""
    A = H.matrix if isinstance(H, HamiltonianSpec) else H
    spec = extreme_eigs(A, 2, "smallest", tol, vectors=False)
    return float(spec.eigenvalues[1] - spec.eigenvalues[0])


def to_markov(H: HamiltonianSpec, psi: np.ndarray | None = None, beta: float | None = None) -> ChainSpec:
    """Stochastic matrix P = delta - beta sqrt(pi(y)/pi(x)) <x|H|y>, pi = psi^2.

    Defaults: ``psi`` uniform (the balanced-sector ground state) and
    ``beta = 1 / (2 s (n - 1))``.
    """
    if H.n < 2 and beta is None:
        raise ValueError("n must be >= 2 for the default beta")
    N = H.dim
    psi = np.full(N, 1.0 / math.sqrt(N)) if psi is None else np.asarray(psi, dtype=float)
    beta = 1.0 / (2 * H.s * (H.n - 1)) if beta is None else beta
    pi = psi**2
    A = H.matrix.csr.tocoo()
    vals = -beta * np.sqrt(pi[A.col] / pi[A.row]) * A.data
    P = sp.coo_matrix((vals, (A.row, A.col)), shape=(N, N)).tocsr() + sp.identity(N, format="csr")
    P = P.tocsr()
    P.sum_duplicates()
    if P.nnz and P.data.min() < -1e-12:
        raise ChainError(f"negative transition probability {P.data.min():.3g}: beta too large")
    states = H.words if H.words is not None else H.basis.words()
    return ChainSpec("hamiltonian_mapped", states, P, pi / pi.sum(), H.n, H.s)


# -- entanglement ------------------------------------------------------------------


@dataclass
class EntropyReport:
    entropy_bits: float
    schmidt_rank: int
    schmidt_coefficients: np.ndarray


def half_chain_entropy(W: np.ndarray, amplitudes: np.ndarray, cut: int | None = None, tol: float = 1e-12) -> EntropyReport:
    """Entanglement entropy (bits) of sum_w a_w |w> across the cut after ``cut`` sites.

    The coefficient matrix is split into the connected blocks of its
    bipartite support before the SVD, so only the nonzero part is touched.
    """
    W = np.asarray(W)
    amps = np.asarray(amplitudes)
    L = W.shape[1]
    cut = L // 2 if cut is None else cut
    keep = np.abs(amps) > 0
    W, amps = W[keep], amps[keep]
    amps = amps / np.linalg.norm(amps)

    def group(part):
        if part.shape[1] == 0:
            return np.zeros(len(part), dtype=np.int64), 1
        codes = np.ascontiguousarray(part.astype(np.int16) + 128).astype(np.uint8)
        keys = codes.view(np.dtype(("S", codes.shape[1]))).ravel()
        uniq, inv = np.unique(keys, return_inverse=True)
        return inv.ravel(), len(uniq)

    li, nl = group(W[:, :cut])
    ri, nr = group(W[:, cut:])
    M = sp.coo_matrix((amps, (li, ri)), shape=(nl, nr)).tocsr()
    bip = sp.bmat([[None, abs(M)], [abs(M).T, None]]).tocsr()
    ncomp, lab = connected_components(bip, directed=False)
    svals = []
    for c in range(ncomp):
        rows = np.nonzero(lab[:nl] == c)[0]
        cols = np.nonzero(lab[nl:] == c)[0]
        if not len(rows) or not len(cols):
            continue
        svals.append(np.linalg.svd(M[rows][:, cols].toarray(), compute_uv=False))
    sv = np.sort(np.concatenate(svals))[::-1]
    sv = sv[sv > tol * sv[0]]
    p = sv**2
    p = p / p.sum()
    S = float(-(p * np.log2(p)).sum())
    return EntropyReport(S, len(sv), sv)


def uniform_state_words(n: int, s: int, kind: str = "dyck") -> tuple[np.ndarray, np.ndarray]:
    W = cb.path_array(2 * n, s, kind, max_length=max(2 * n, cb.DEFAULT_MAX_LENGTH))
    return W, np.full(len(W), 1.0 / math.sqrt(len(W)))
