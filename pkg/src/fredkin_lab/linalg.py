"""Sparse symmetric matrices and extreme-eigenvalue solves."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_THRESHOLD = 2000
LANCZOS_TOL = 1e-10


class SolverError(RuntimeError):
    """An eigensolve did not reach its residual tolerance."""


@dataclass(frozen=True)
class SparseSymMatrix:
    """Real symmetric matrix in CSR form.

    Build with :meth:`from_triples` (duplicates are summed) or
    :meth:`from_sparse`; either checks symmetry and finiteness.
    """

    csr: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @classmethod
    def from_triples(cls, dim: int, rows, cols, vals, symmetrize: bool = False) -> "SparseSymMatrix":
        m = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(dim, dim))
        if symmetrize:
            # triples given for i <= j only
            diag = sp.diags(m.diagonal())
            m = m + m.T - diag
        return cls.from_sparse(m)

    @classmethod
    def from_sparse(cls, m, atol: float = 1e-12) -> "SparseSymMatrix":
        csr = sp.csr_matrix(m, dtype=float)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        if csr.shape[0] != csr.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("matrix has non-finite entries")
        asym = abs(csr - csr.T)
        if asym.nnz and asym.max() > atol:
            raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym.max():.3g})")
        return cls(csr)

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def triples(self):
        """Upper-triangle coordinates (i <= j) in row-major order."""
        up = sp.triu(self.csr).tocoo()
        order = np.lexsort((up.col, up.row))
        return up.row[order], up.col[order], up.data[order]

    def dump(self, fh: TextIO) -> None:
        i, j, v = self.triples()
        fh.write(f"{self.dim} {len(v)}\n")
        for a, b, x in zip(i, j, v):
            fh.write(f"{a} {b} {x:.17g}\n")

    @classmethod
    def load(cls, fh: TextIO) -> "SparseSymMatrix":
        dim, nnz = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
        if len(data) != nnz:
            raise ValueError(f"expected {nnz} entries, found {len(data)}")
        return cls.from_triples(dim, data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2], symmetrize=True)

    def submatrix(self, idx) -> "SparseSymMatrix":
        idx = np.asarray(idx)
        return SparseSymMatrix(self.csr[idx][:, idx].tocsr())


def matvec(M: SparseSymMatrix, v) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != M.dim:
        raise ValueError(f"dimension mismatch: matrix {M.dim}, vector {v.shape[0]}")
    return M.csr @ v


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "dense"


def residual_norms(M, vals, vecs) -> np.ndarray:
    A = M.csr if isinstance(M, SparseSymMatrix) else M
    R = A @ vecs - vecs * vals
    return np.linalg.norm(R, axis=0)


def _as_operator(M):
    if isinstance(M, SparseSymMatrix):
        return M.csr
    return M


def extreme_eigs(
    M,
    k: int = 1,
    which: str = "smallest",
    tol: float = LANCZOS_TOL,
    method: str = "auto",
    vectors: bool = True,
) -> Spectrum:
    """``k`` smallest or largest eigenpairs, with residuals re-checked.

    Dense ``eigh`` is used below :data:`DENSE_THRESHOLD` (or when
    ``method="dense"``); larger problems go to ARPACK's implicitly restarted
    Lanczos.  Residuals must satisfy ``||Mv - lv|| <= tol * max(1, ||M||_1)``.
    """
    A = _as_operator(M)
    dim = A.shape[0]
    if which not in ("smallest", "largest"):
        raise ValueError("which must be 'smallest' or 'largest'")
    if not 1 <= k <= dim:
        raise ValueError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    if method == "auto":
        method = "dense" if dim < DENSE_THRESHOLD or k >= dim - 1 else "lanczos"
    scale = max(1.0, float(abs(A).sum(axis=0).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=0).max()))
    if method == "dense":
        D = A.toarray() if sp.issparse(A) else np.asarray(A)
        sel = (0, k - 1) if which == "smallest" else (dim - k, dim - 1)
        vals, vecs = scipy.linalg.eigh(D, subset_by_index=sel)
    elif method == "lanczos":
        ncv = min(dim, max(2 * k + 1, 40))
        try:
            vals, vecs = spla.eigsh(
                A, k=k, which="SA" if which == "smallest" else "LA",
                tol=tol, ncv=ncv, maxiter=10 * dim, v0=np.ones(dim) / np.sqrt(dim) + 1e-3 * np.cos(np.arange(dim)),
            )
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"Lanczos did not converge for dim {dim}: {exc}") from exc
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = residual_norms(A, vals, vecs)
    bound = max(tol, 1e-12) * scale
    if method == "dense":
        bound = max(bound, 1e-10 * scale)
    if np.any(res > bound):
        raise SolverError(f"residual {res.max():.3g} exceeds tolerance {bound:.3g} ({method})")
    return Spectrum(vals, vecs if vectors else None, res, method)


def quadratic_form(M, v, imag_tol: float = 1e-12) -> float:
    """conj(v)^T M v for a real symmetric M; the imaginary part must vanish."""
    A = _as_operator(M)
    v = np.asarray(v)
    val = np.vdot(v, A @ v)
    scale = max(1.0, abs(val))
    if abs(val.imag) > imag_tol * scale:
        raise ValueError(f"quadratic form has imaginary part {val.imag:.3g}")
    return float(val.real)


def symmetrize_chain(P, pi) -> sp.csr_matrix:
    """D^{1/2} P D^{-1/2} with D = diag(pi); symmetric when P is reversible."""
    P = sp.csr_matrix(P)
    r = np.sqrt(np.asarray(pi, dtype=float))
    S = sp.diags(r) @ P @ sp.diags(1.0 / r)
    return sp.csr_matrix((S + S.T) / 2)


def connected_blocks(A) -> list[np.ndarray]:
    """Index sets of the connected components of the off-diagonal pattern."""
    from scipy.sparse.csgraph import connected_components

    A = sp.csr_matrix(A)
    ncomp, labels = connected_components(abs(A) + sp.eye(A.shape[0]), directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    return [order[bounds[i] : bounds[i + 1]] for i in range(ncomp)]


def blockwise_spectrum(A, count: int = 2, tol: float = LANCZOS_TOL) -> tuple[np.ndarray, list]:
    """Lowest ``count`` eigenvalues of every connected block of ``A``.

    Returns the merged sorted eigenvalue list and per-block results.
    """
    A = sp.csr_matrix(A)
    merged = []
    per_block = []
    for idx in connected_blocks(A):
        sub = A[idx][:, idx]
        kk = min(count, len(idx))
        if len(idx) == 1:
            vals = np.array([sub[0, 0]])
        else:
            vals = extreme_eigs(sub, kk, "smallest", tol, vectors=False).eigenvalues
        merged.extend(vals.tolist())
        per_block.append((idx, vals))
    return np.sort(np.array(merged)), per_block


def iter_dense_blocks(A, blocks: Iterable[np.ndarray]):
    A = sp.csr_matrix(A)
    for idx in blocks:
        yield idx, A[idx][:, idx].toarray()
