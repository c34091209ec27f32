import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab.linalg import (
    SolverError,
    SparseSymMatrix,
    blockwise_spectrum,
    connected_blocks,
    extreme_eigs,
    matvec,
    quadratic_form,
)


def _random_sym(dim, seed, density=None):
    rng = np.random.default_rng(seed)
    B = sp.random(dim, dim, density=density or min(1.0, 5 / dim), random_state=rng)
    return (B + B.T).tocsr()


def test_from_triples_symmetrizes():
    M = SparseSymMatrix.from_triples(3, [0, 1], [1, 2], [2.0, -1.0], symmetrize=True)
    D = M.to_dense()
    assert np.array_equal(D, D.T)
    assert D[1, 0] == 2.0 and D[2, 1] == -1.0


def test_asymmetric_input_rejected():
    with pytest.raises(ValueError):
        SparseSymMatrix.from_sparse(sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])))


def test_dump_load_roundtrip():
    M = SparseSymMatrix.from_sparse(_random_sym(40, 1))
    buf = io.StringIO()
    M.dump(buf)
    buf.seek(0)
    M2 = SparseSymMatrix.load(buf)
    assert np.array_equal(M.to_dense(), M2.to_dense())


@pytest.mark.parametrize("dim", [300, 2100])
def test_dense_and_lanczos_agree(dim):
    M = _random_sym(dim, dim)
    d = extreme_eigs(M, 3, "smallest", method="dense").eigenvalues
    l = extreme_eigs(M, 3, "smallest", method="lanczos").eigenvalues
    assert np.allclose(d, l, atol=1e-9)
    d = extreme_eigs(M, 2, "largest", method="dense").eigenvalues
    l = extreme_eigs(M, 2, "largest", method="lanczos").eigenvalues
    assert np.allclose(d, l, atol=1e-9)


def test_eigenvectors_have_small_residual():
    M = SparseSymMatrix.from_sparse(_random_sym(500, 3))
    spec = extreme_eigs(M, 2, "smallest", vectors=True)
    for k in range(2):
        v = spec.eigenvectors[:, k]
        assert np.linalg.norm(matvec(M, v) - spec.eigenvalues[k] * v) < 1e-8


def test_solver_error_on_bad_request():
    with pytest.raises((SolverError, ValueError)):
        extreme_eigs(_random_sym(10, 0), 11)


@given(st.integers(0, 2**31 - 1))
def test_rayleigh_quotient_bounded_by_lambda_min(seed):
    M = _random_sym(60, 11)
    lam = extreme_eigs(M, 1, method="dense").eigenvalues[0]
    rng = np.random.default_rng(seed)
    v = rng.normal(size=60) + 1j * rng.normal(size=60)
    v /= np.linalg.norm(v)
    assert quadratic_form(M, v) >= lam - 1e-10


def test_blocks_and_blockwise_spectrum():
    A = sp.block_diag([np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([[3.0]]), np.array([[0.5, 0.1], [0.1, 0.5]])]).tocsr()
    blocks = connected_blocks(A)
    assert sorted(len(b) for b in blocks) == [1, 2, 2]
    vals, _ = blockwise_spectrum(A, 2)
    assert np.allclose(vals, [0.0, 0.4, 0.6, 2.0, 3.0])
