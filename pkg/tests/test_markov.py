import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import combinatorics as cb
from fredkin_lab import markov as mk

KINDS = ("fredkin", "peak_displacing", "lattice", "positive_lattice")


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_chain_axioms(kind, n):
    ch = mk.build_chain(kind, n)
    v = ch.check()
    assert v["row_sum"] <= 1e-12


@given(st.sampled_from(KINDS[:2]), st.integers(1, 5), st.integers(1, 2))
def test_chain_axioms_colored(kind, n, s):
    mk.build_chain(kind, n, s).check()


def test_fredkin_n2_matrix():
    ch = mk.build_chain("fredkin", 2)
    assert np.allclose(ch.P.toarray(), [[0.75, 0.25], [0.25, 0.75]])
    assert mk.spectral_gap(ch) == pytest.approx(0.5)


def test_peak_displacing_n2_gap():
    assert mk.spectral_gap(mk.build_chain("peak_displacing", 2)) == pytest.approx(4 / 9, abs=1e-15)


def test_unknown_kind_and_cap():
    with pytest.raises(ValueError):
        mk.build_chain("glauber", 3)
    with pytest.raises(cb.CapExceeded):
        mk.build_chain("fredkin", 8, cap=100)


def test_tv_curve_monotone_and_mixing_time():
    ch = mk.build_chain("fredkin", 4)
    curve = mk.tv_mixing_curve(ch, 0)
    d = [x for _, x in curve]
    assert all(b <= a + 1e-15 for a, b in zip(d, d[1:]))
    tau = mk.mixing_time_from_curve(curve, 0.25)
    assert curve[tau][1] <= 0.25 < curve[tau - 1][1]


def test_mixing_bounds_hold():
    for kind in KINDS:
        for n in range(2, 6):
            rep = mk.mixing_bounds(mk.build_chain(kind, n), 0.25)
            assert rep.upper_ok and rep.lower_ok


def test_mixing_bounds_reject_eps():
    with pytest.raises(ValueError):
        mk.mixing_bounds(mk.build_chain("fredkin", 2), 0.0)


@pytest.mark.parametrize("s", [1, 2])
def test_comparison_theorem(s):
    for n in range(2, 5):
        f = mk.build_chain("fredkin", n, s)
        p = mk.build_chain("peak_displacing", n, s)
        r = mk.comparison_constant(f, p, mk.walk_the_peak_paths(p))
        assert r.holds


def test_congestion_two_state():
    P = sp.csr_matrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
    ch = mk.chain_from_matrix("two", np.array([0, 1]), P, np.array([0.5, 0.5]))
    r = mk.congestion_rho(ch, mk.interval_paths(2))
    assert r.rho == pytest.approx(2.0)
    assert r.length == 1
    assert r.bound == pytest.approx(0.5)
    assert r.gap == pytest.approx(1.0)


def test_congestion_single_state_rejected():
    ch = mk.chain_from_matrix("one", np.array([0]), sp.csr_matrix(np.ones((1, 1))), np.ones(1))
    with pytest.raises(ValueError):
        mk.congestion_rho(ch, mk.interval_paths(1))


def test_induced_chain_gap_dominates():
    for n in range(1, 7):
        full = mk.build_chain("lattice", n)
        dyck = np.nonzero(np.all(cb.height_array(full.states) >= 0, axis=1))[0]
        ind = mk.induced_chain(full, dyck)
        ind.check()
        if ind.size > 1:
            assert mk.spectral_gap(ind) >= mk.spectral_gap(full) - 1e-12


def test_loglog_slope_recovers_power():
    xs = np.arange(2, 12)
    slope, se = mk.loglog_slope(xs, 3.0 * xs**-2.5)
    assert slope == pytest.approx(-2.5)
    assert se < 1e-10


def test_reference_gap_formula():
    assert mk.peak_displacing_reference_gap(2, 1) == pytest.approx(1 / (math.sqrt(math.pi) * 2**5.5))
