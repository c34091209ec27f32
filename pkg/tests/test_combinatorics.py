import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fredkin_lab import combinatorics as cb


def test_catalan_values():
    assert [cb.catalan(n) for n in range(8)] == [1, 1, 2, 5, 14, 42, 132, 429]


@pytest.mark.parametrize("s,nmax", [(1, 10), (2, 7), (3, 5)])
def test_colored_dyck_counts(s, nmax):
    for n in range(1, nmax + 1):
        assert len(cb.path_array(2 * n, s, "dyck")) == s**n * cb.catalan(n)


def test_motzkin_and_lattice_counts():
    assert [len(cb.path_array(L, 1, "motzkin")) for L in range(1, 8)] == [1, 2, 4, 9, 21, 51, 127]
    assert len(cb.path_array(10, 1, "lattice")) == math.comb(10, 5)


def test_enumeration_sorted_and_valid():
    words = cb.enumerate_paths(8, 2)
    keys = [cb.word_sort_key(w.steps) for w in words]
    assert keys == sorted(keys)
    assert all(w.is_valid() for w in words)


def test_word_text_format():
    assert cb.format_word((1, -1)) == "u d"
    assert cb.format_word((2, 1, -1, -2)) == "u2 u d d2"
    assert cb.parse_word("uudd") == (1, 1, -1, -1)
    assert cb.parse_word("u2 u d d2") == (2, 1, -1, -2)
    with pytest.raises(ValueError):
        cb.parse_word("x1")


def test_cap_enforced():
    with pytest.raises(cb.CapExceeded):
        cb.path_array(26, 1, "dyck")


def test_area_closed_form_small():
    assert cb.area((1, -1)) == 1
    assert int(cb.areas(cb.path_array(4, 1)).sum()) == 6


def test_area_sum_closed_form():
    for n in range(1, 13):
        total = int(cb.areas(cb.path_array(2 * n, 1)).sum())
        assert total == 4**n - math.comb(2 * n + 2, n + 1) // 2


dyck_words = st.builds(
    lambda n, s, seed: (cb.sample_dyck_uniform(n, s, seed), s),
    st.integers(1, 9),
    st.integers(1, 3),
    st.integers(0, 2**32 - 1),
)


@given(dyck_words)
def test_text_roundtrip(ws):
    w, _ = ws
    assert cb.parse_word(cb.format_word(w.steps)) == w.steps


@given(dyck_words)
def test_neighbors_symmetric_valid_and_area_step(ws):
    w, s = ws
    a0 = cb.area(w)
    for y, move in cb.fredkin_neighbors(w, s):
        assert y.is_valid()
        assert abs(cb.area(y) - a0) in (0, 2)
        assert w in [z for z, _ in cb.fredkin_neighbors(y, s)]


@given(dyck_words)
def test_peak_displacement_preserves_validity(ws):
    w, s = ws
    targets = cb.peak_displace_targets(w, s)
    assert all(y.is_valid() for y, _ in targets)
    assert all(p > 0 for _, p in targets)


@given(st.integers(1, 6), st.integers(1, 2), st.integers(0, 10**6), st.data())
def test_canonical_path_is_a_fredkin_walk(n, s, seed, data):
    x = cb.sample_dyck_uniform(n, s, seed)
    targets = [y for y, _ in cb.peak_displace_targets(x, s) if y != x]
    if not targets:
        return
    y = data.draw(st.sampled_from(targets))
    path = cb.canonical_path(x, y, s)
    assert path[0] == x and path[-1] == y
    for a, b in zip(path, path[1:]):
        assert b in [z for z, _ in cb.fredkin_neighbors(a, s)]


def test_sampler_uniform_n2():
    rng = np.random.default_rng(0)
    W = cb.sample_dyck_batch(2, 100_000, rng)
    freq = Counter(cb.format_word(r) for r in W.tolist())
    assert set(freq) == {"u u d d", "u d u d"}
    for v in freq.values():
        assert abs(v / 100_000 - 0.5) <= 0.01


def test_sampler_n1_and_area_mean():
    assert cb.sample_dyck_uniform(1, 1, 5).steps == (1, -1)
    A = cb.sample_dyck_areas(2, 100_000, np.random.default_rng(1))
    assert abs(A.mean() - 3) <= 0.02


def test_area_sampler_matches_word_sampler():
    a = cb.sample_dyck_areas(7, 4000, np.random.default_rng(3))
    W = cb.sample_dyck_batch(7, 4000, np.random.default_rng(3))
    assert np.array_equal(a, cb.areas(W))


def test_colored_sampler_chi_square():
    n, s, N = 2, 2, 40_000
    freq = Counter(cb.sample_dyck_uniform(n, s, seed).steps for seed in range(N))
    assert len(freq) == s**n * cb.catalan(n)
    expected = N / len(freq)
    chi2 = sum((v - expected) ** 2 / expected for v in freq.values())
    assert chi2 < 24.3  # 7 dof, p = 0.001


def test_word_index_lookup():
    W = cb.path_array(8, 2)
    idx = cb.WordIndex(W, 2)
    perm = np.random.default_rng(0).permutation(len(W))
    assert np.array_equal(idx.lookup(W[perm]), perm)
