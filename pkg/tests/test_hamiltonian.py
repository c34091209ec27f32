import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import combinatorics as cb
from fredkin_lab import hamiltonian as hm
from fredkin_lab import markov as mk
from fredkin_lab.linalg import extreme_eigs


def test_basis_index_roundtrip():
    b = hm.SpinBasis("motzkin", 2, 4)
    W = b.words()
    assert np.array_equal(b.index(W), np.arange(b.dim))
    assert b.d == 5


def test_n2_balanced_block():
    B = hm.build_balanced_sector(2, 1)
    assert np.allclose(B.matrix.to_dense(), [[1, -1], [-1, 1]])
    assert hm.gap(B) == pytest.approx(2.0)
    P = hm.to_markov(B)
    assert np.allclose(P.P.toarray(), 0.5)


@pytest.mark.parametrize("model,n,s", [("fredkin", 1, 1), ("fredkin", 2, 1), ("fredkin", 3, 1), ("fredkin", 2, 2),
                                       ("fredkin", 4, 1), ("motzkin", 1, 1), ("motzkin", 2, 1), ("motzkin", 3, 1),
                                       ("motzkin", 2, 2)])
def test_frustration_free_unique_kernel(model, n, s):
    H = (hm.build_fredkin if model == "fredkin" else hm.build_motzkin)(n, s)
    psi = hm.dyck_state(H.basis)
    rep = hm.kernel_report(H, psi)
    assert abs(rep.lambda_min) <= 1e-10
    assert rep.kernel_dim == 1
    assert rep.overlap == pytest.approx(1.0, abs=1e-10)
    assert rep.term_residual <= 1e-12


@pytest.mark.parametrize("build", [hm.build_fredkin, hm.build_motzkin])
def test_stoquastic(build):
    H = build(3, 1)
    C = H.matrix.csr.tocoo()
    assert C.data[C.row != C.col].max() <= 0


def test_balanced_block_equals_full_block():
    for n, s in [(2, 1), (3, 1), (2, 2), (3, 2)]:
        F = hm.build_fredkin(n, s)
        idx = np.nonzero(np.all(hm.sector_labels(F.basis_words()) == 0, axis=1))[0]
        B = hm.build_balanced_sector(n, s)
        assert np.array_equal(F.basis_words()[idx], B.basis_words())
        assert abs(F.matrix.csr[idx][:, idx] - B.matrix.csr).max() <= 1e-15


def test_sector_decomposition():
    blocks = hm.sector_decompose(hm.build_fredkin(3, 1))
    for lab, b in blocks.items():
        if lab.balanced:
            assert abs(b.lambda_min) <= 1e-10
        else:
            assert b.lambda_min > 1e-10


def test_sector_labels_examples():
    W = np.array([[1, -1, 1, -1], [-1, 1, 1, -1], [2, -1, 1, 1], [1, 1, -1, -1]])
    lab = hm.sector_labels(W)
    assert lab.tolist() == [[0, 0, 0], [1, 1, 0], [0, 2, 1], [0, 0, 0]]


@given(st.integers(2, 6), st.integers(1, 2))
def test_gap_identity(n, s):
    if n == 6 and s == 2:
        n = 5
    B = hm.build_balanced_sector(n, s)
    lam2 = mk.second_eigenvalue(hm.to_markov(B))
    assert hm.gap(B) == pytest.approx(2 * s * (n - 1) * (1 - lam2), abs=1e-9)


def test_to_markov_rejects_non_stoquastic():
    B = hm.build_balanced_sector(3, 1)
    A = B.matrix.csr.tolil()
    A[0, 1], A[1, 0] = -A[0, 1], -A[1, 0]
    from fredkin_lab.linalg import SparseSymMatrix

    bad = hm.HamiltonianSpec(SparseSymMatrix(A.tocsr()), "fredkin", 3, 1, None, B.words)
    with pytest.raises(mk.ChainError):
        hm.to_markov(bad)


def test_gap_decreases_with_n():
    gaps = [hm.gap(hm.build_balanced_sector(n, 1)) for n in range(2, 8)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_dimension_cap():
    with pytest.raises(cb.CapExceeded):
        hm.build_fredkin(6, 2, cap=1000)


def test_entropy_n2_one_bit():
    rep = hm.half_chain_entropy(*hm.uniform_state_words(2, 1))
    assert rep.entropy_bits == pytest.approx(1.0)
    assert rep.schmidt_rank == 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_motzkin_schmidt_rank(n):
    rep = hm.half_chain_entropy(*hm.uniform_state_words(n, 2, "motzkin"))
    assert rep.schmidt_rank == 2 ** (n + 1) - 1


def test_entropy_matches_dense_svd():
    W, a = hm.uniform_state_words(3, 2)
    basis = hm.SpinBasis("fredkin", 2, 6)
    psi = np.zeros(basis.dim)
    psi[basis.index(W)] = a
    sv = np.linalg.svd(psi.reshape(basis.d**3, basis.d**3), compute_uv=False)
    p = sv[sv > 1e-12] ** 2
    assert hm.half_chain_entropy(W, a).entropy_bits == pytest.approx(float(-(p * np.log2(p)).sum()))


def test_word_hamiltonian_matches_projector_build():
    F = hm.build_fredkin(3, 2)
    W = F.basis_words()
    H = hm.word_hamiltonian(W, 2)
    assert abs(H - F.matrix.csr).max() <= 1e-14


def test_lambda_min_positive_without_boundary_terms_is_zero():
    W = cb.path_array(6, 1, "lattice")
    H = hm.word_hamiltonian(cb.sort_words(W, 1), 1, boundary=False)
    lam = extreme_eigs(H, 1, method="dense").eigenvalues[0]
    assert abs(lam) <= 1e-12
    assert math.isfinite(lam)
