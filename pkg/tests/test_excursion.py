import math

import mpmath
import numpy as np
import pytest
import scipy.special as ss
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import excursion as ex


@given(st.floats(-30, 30))
def test_airy_matches_scipy(x):
    ref = ss.airy(x)[0]
    assert ex.airy_ai(x) == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_airy_zeros_match_scipy():
    ours = np.array(ex.airy_zeros(40))
    ref = ss.ai_zeros(40)[0]
    assert np.abs(ours - ref).max() < 1e-10


@given(st.floats(0.05, 40.0))
def test_tricomi_u_matches_mpmath(z):
    # scipy's hyperu loses ~8 digits near z = 30, so mpmath is the reference
    mpmath.mp.dps = 30
    ref = float(mpmath.hyperu(mpmath.mpf(-5) / 6, mpmath.mpf(4) / 3, z))
    assert ex.tricomi_u(ex.U_PARAM_A, ex.U_PARAM_B, z) == pytest.approx(ref, rel=1e-12)


def test_density_normalized_with_closed_form_moments():
    total, mean, std = ex.density_moments()
    assert total == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx(0.5 * math.sqrt(math.pi / 2), abs=1e-4)
    assert std == pytest.approx(math.sqrt(5 / 12 - math.pi / 8), abs=1e-4)


@given(st.floats(0.05, 3.0))
def test_density_nonnegative(x):
    v = ex.density_f_A(x)
    assert v.value + v.roundoff >= 0
    assert v.tail <= ex.DENSITY_TOL


def test_density_rejects_nonpositive():
    with pytest.raises(ValueError):
        ex.density_f_A(0.0)


def test_char_function_at_zero_and_modulus():
    assert ex.char_function(0.0) == pytest.approx(1.0, abs=1e-6)
    assert abs(ex.char_function(3.0)) < 1.0


def test_area_sum_closed_form():
    for n in range(1, 13):
        assert ex.dyck_area_sum(n) == ex.dyck_area_closed_form(n)


def test_expected_area_ratio_tends_to_one():
    r = [ex.expected_area_ratio(n) for n in (100, 1000, 5000)]
    assert all(b > a for a, b in zip(r, r[1:]))
    assert abs(r[-1] - 1) < 0.03


@pytest.mark.parametrize("n,s", [(2, 1), (4, 1), (6, 1), (3, 2), (5, 2)])
def test_twisted_energy_two_ways(n, s):
    te = ex.twisted_energy(n, s, ex.paper_theta(n))
    assert te.mismatch <= 1e-10 * max(1, abs(te.pair_formula))


def test_twisted_energy_streamed_matches_matrix():
    theta = ex.paper_theta(7)
    a = ex.twisted_energy(7, 1, theta)
    b = ex.twisted_energy(7, 1, theta, matrix_limit=0)
    assert a.method == "matrix" and b.method == "pairs"
    assert a.direct == pytest.approx(b.direct, rel=1e-12)


def test_twisted_n2_closed_form():
    th = 0.05
    te = ex.twisted_energy(2, 1, th)
    assert te.direct == pytest.approx(1 - math.cos(4 * math.pi * th), abs=1e-14)


def test_overlap_bounded():
    for n in (3, 5):
        assert abs(ex.overlap_with_ground(n, 1, ex.paper_theta(n))) <= 1 + 1e-12


def test_monte_carlo_reproducible():
    a = ex.mc_scaled_area(300, 1, 2000, seed=5)
    b = ex.mc_scaled_area(300, 1, 2000, seed=5)
    assert a.mean == b.mean and np.array_equal(a.hist, b.hist)
    assert a.report()["scaled"] is True


def test_lattice_offset_shifts_mean_up():
    a = ex.mc_scaled_area(400, 1, 5000, seed=1)
    b = ex.mc_scaled_area(400, 1, 5000, seed=1, lattice_offset=True)
    shift = (2 * 400 + 1) / (ex.SCALE * 400**1.5)
    assert b.mean - a.mean == pytest.approx(shift, rel=1e-9)
