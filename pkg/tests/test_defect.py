import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import defect as df
from fredkin_lab import markov as mk

C = [1, 1, 2, 5, 14]


def test_m5_matrix_entries():
    H = df.build_heff(5, 1).h_move()
    r = math.sqrt(C[0] / C[4])
    expected = np.array([
        [C[2] / C[4], 0, -r, 0, 0],
        [0, C[1] / C[3], 0, -C[1] / C[3], 0],
        [-r, 0, 2 * C[0] / C[2], 0, -r],
        [0, -C[1] / C[3], 0, C[1] / C[3], 0],
        [0, 0, -r, 0, C[2] / C[4]],
    ]) / 2
    assert np.allclose(H, expected, atol=1e-15)


def test_m5_s2_scales():
    assert np.allclose(df.build_heff(5, 2).h_move(), df.build_heff(5, 1).h_move() / 2)


def test_even_m_rejected():
    with pytest.raises(ValueError):
        df.build_heff(6)


@pytest.mark.parametrize("m", [3, 5, 11, 25, 51])
def test_kernel_identity_exact(m):
    assert df.kernel_identity_exact(m)


@given(st.integers(1, 100).map(lambda k: 2 * k + 1), st.integers(1, 4))
def test_h_move_residual_float(m, s):
    assert df.h_move_residual(m, s) <= 1e-12


def test_ground_weights_m5():
    g2 = df.ground_weights_exact(5)
    assert g2 == [Fraction(14, 42), Fraction(5, 42), Fraction(4, 42), Fraction(5, 42), Fraction(14, 42)]


def test_pinned_amplitude_values():
    p = df.pinned_amplitude(5)
    assert p.computed == Fraction(1, 3)
    assert p.stated == Fraction(7, 22)


@given(st.integers(1, 25).map(lambda k: 2 * k + 1), st.integers(1, 3))
def test_walk_entries_in_bounds(m, s):
    assert df.walk_bounds(m, s).ok


def test_walk_m5_entry():
    ch = df.mapped_walk(5)
    ch.check()
    # odd sites 1, 3, 5; P(1 -> 3) = alpha_1^2
    assert ch.P[0, 1] == pytest.approx(1 / 14)


def test_gamma_terms_rank_one_psd():
    for v in df.build_heff(9).gamma_vectors():
        G = np.outer(v, v)
        assert np.linalg.matrix_rank(G) == 1
        assert np.linalg.eigvalsh(G).min() >= -1e-15


@pytest.mark.parametrize("m", [5, 9, 21])
def test_congestion_bound(m):
    ch = df.mapped_walk(m)
    r = mk.congestion_rho(ch, mk.interval_paths(ch.size))
    assert r.holds


def test_sublattices_decouple():
    H = df.build_heff(11).matrix()
    assert np.abs(H[0::2, 1::2]).max() == 0


def test_heff_energy_positive_and_decreasing():
    vals, slope = df.heff_energy_scan(range(5, 30, 2))
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert slope < 0


def test_defect_basis_dimension():
    for m in (3, 5, 7):
        assert len(df.defect_basis(m).words) == df.defect_dimension(m)


def test_zero_eps_kernel_counts_odd_positions():
    for m in (5, 7):
        H = df.build_single_defect(m, 1, 0.0)
        vals = np.linalg.eigvalsh(H.matrix.to_dense())
        assert int(np.sum(np.abs(vals) < 1e-10)) == (m + 1) // 2


def test_projected_perturbation_is_projected_heff():
    P = df.projected_perturbation(5)
    H = df.sublattice(df.build_heff(5, 1, "projected").matrix(), "odd")
    assert np.allclose(P, H, atol=1e-12)


def test_first_order_projected_converges():
    rep = df.first_order_check(5, 1, (1e-1, 1e-2, 1e-3), "projected")
    assert rep.converges
    assert rep.errors[-1] < 1e-2
