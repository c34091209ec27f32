"""Brownian-excursion area law, Dyck-area statistics and the twisted test state.

The Airy function and Tricomi's U are implemented here rather than taken from
a special-function library; the test suite cross-checks both against
``scipy.special``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import combinatorics as cb
from .hamiltonian import word_hamiltonian
from .linalg import quadratic_form

SCALE = 2.0 * math.sqrt(2.0)
DEFAULT_TERMS = 40
SERIES_LIMIT = 8.0
DENSITY_TOL = 1e-8

# Ai(0) and -Ai'(0) to 30 digits
_AI0 = Decimal("0.355028053887817239260063186004")
_DAI0 = Decimal("0.258819403792806798405183560189")


# -- Airy function ------------------------------------------------------------------


def _airy_maclaurin(x: float) -> float:
    # f and g series summed in 50-digit decimals; for x near -8 the terms
    # reach ~1e6 and cancel, which double precision cannot absorb
    with localcontext() as ctx:
        ctx.prec = 50
        X = Decimal(x)
        x3 = X**3
        f = t_f = Decimal(1)
        g = t_g = X
        k = 0
        eps = Decimal(10) ** -45
        while True:
            k += 1
            t_f = t_f * x3 / ((3 * k - 1) * (3 * k))
            t_g = t_g * x3 / ((3 * k) * (3 * k + 1))
            f += t_f
            g += t_g
            if abs(t_f) + abs(t_g) < eps * (abs(f) + abs(g) + 1):
                break
        return float(_AI0 * f - _DAI0 * g)


def _u_coeffs(count: int) -> list[float]:
    # u_k = (2k+1)(2k+3)...(6k-1) / (216^k k!)
    out = [1.0]
    for k in range(1, count):
        out.append(out[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return out


_U = _u_coeffs(40)


def _airy_asymptotic(x: float) -> float:
    if x > 0:
        zeta = 2.0 / 3.0 * x**1.5
        total, term_prev = 0.0, math.inf
        for k, u in enumerate(_U):
            term = (-1) ** k * u / zeta**k
            if abs(term) > term_prev:
                break
            total += term
            term_prev = abs(term)
        return math.exp(-zeta) / (2.0 * math.sqrt(math.pi) * x**0.25) * total
    z = -x
    zeta = 2.0 / 3.0 * z**1.5
    P = Q = 0.0
    prev = math.inf
    for k in range(len(_U) // 2):
        tp = (-1) ** k * _U[2 * k] / zeta ** (2 * k)
        tq = (-1) ** k * _U[2 * k + 1] / zeta ** (2 * k + 1)
        if abs(tp) + abs(tq) > prev:
            break
        P += tp
        Q += tq
        prev = abs(tp) + abs(tq)
    ph = zeta - math.pi / 4
    return (math.cos(ph) * P + math.sin(ph) * Q) / (math.sqrt(math.pi) * z**0.25)


def airy_ai(x: float) -> float:
    """Ai(x): Maclaurin series for |x| <= 8, asymptotic expansions beyond."""
    x = float(x)
    return _airy_maclaurin(x) if abs(x) <= SERIES_LIMIT else _airy_asymptotic(x)


def _zero_guess(k: int) -> float:
    t = 3 * math.pi / 8 * (4 * k - 1)
    return -(t ** (2 / 3)) * (1 + 5 / 48 * t**-2 - 5 / 36 * t**-4)


@lru_cache(maxsize=None)
def airy_zeros(count: int = DEFAULT_TERMS) -> tuple[float, ...]:
    """First ``count`` zeros a_1 > a_2 > ... of Ai, by bisection."""
    out = []
    for k in range(1, count + 1):
        g = _zero_guess(k)
        lo, hi = g - 0.1, g + 0.1
        flo, fhi = airy_ai(lo), airy_ai(hi)
        if flo * fhi > 0:
            raise ArithmeticError(f"no sign change bracketing Airy zero {k}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = airy_ai(mid)
            if fm == 0 or hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        out.append(0.5 * (lo + hi))
    return tuple(out)


# -- Tricomi U ---------------------------------------------------------------------


def _u_integral(a: float, b: float, z: float, power: float) -> float:
    # U(a,b,z) = z^-a / Gamma(a) int_0^inf e^-tau tau^(a-1) (1 + tau/z)^(b-a-1) dtau
    # with tau = u^power, which removes the endpoint singularity when power = 1/a
    q = power * a - 1

    def f(u):
        tau = u**power
        return power * u**q * math.exp(-tau) * (1.0 + tau / z) ** (b - a - 1)

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return z**-a / math.gamma(a) * val


def tricomi_u(a: float, b: float, z: float) -> float:
    """Tricomi's confluent hypergeometric U(a, b; z) for z > 0.

    For a <= 0 the integral representation is taken at a + k and a + k + 1
    (k the smallest shift making both positive) and brought down with
    U(a-1) = -(b - 2a - z) U(a) - a (a - b + 1) U(a + 1).
    """
    if z <= 0:
        raise ValueError("z must be positive")
    k = 0 if a > 0 else math.floor(-a) + 1
    base = a + k
    power = 1.0 / base
    u_mid = _u_integral(base, b, z, power)
    if k == 0:
        return u_mid
    u_hi = _u_integral(base + 1, b, z, power)
    c = base
    for _ in range(k):
        u_lo = -(b - 2 * c - z) * u_mid - c * (c - b + 1) * u_hi
        u_hi, u_mid = u_mid, u_lo
        c -= 1
    return u_mid


# Parameter of U in the excursion-area series.  -5/6 is the value for which
# the series is a probability density; the misprinted -5/4 goes negative.
U_PARAM_A = -5.0 / 6.0
U_PARAM_B = 4.0 / 3.0


def tricomi_u_excursion(z: float, a: float = U_PARAM_A) -> float:
    return tricomi_u(a, U_PARAM_B, z)


# -- excursion area density ------------------------------------------------------


def excursion_moments() -> tuple[float, float]:
    """Mean and standard deviation of the excursion area."""
    return 0.5 * math.sqrt(math.pi / 2), math.sqrt(5 / 12 - math.pi / 8)


@dataclass
class DensityValue:
    value: float
    tail: float
    roundoff: float  # double-precision error bound of the cancelling sum


def _term(x: float, zero: float, a: float = U_PARAM_A) -> float:
    v = 2 * abs(zero) ** 3 / (27 * x * x)
    if v > 700:
        return 0.0
    return v ** (2 / 3) * math.exp(-v) * tricomi_u_excursion(v, a)


def density_f_A(x: float, terms: int = DEFAULT_TERMS, tol: float = DENSITY_TOL, a: float = U_PARAM_A) -> DensityValue:
    """Excursion-area density as the Airy-zero series truncated at ``terms``.

    The tail estimate sums the next ten terms using asymptotic zero
    positions; :class:`ArithmeticError` is raised when it exceeds ``tol``.
    """
    if x <= 0:
        raise ValueError("density is defined for x > 0")
    pref = 2 * math.sqrt(6) / (x * x)
    terms_ = [_term(x, z, a) for z in airy_zeros(terms)]
    total = math.fsum(terms_)
    roundoff = pref * 1e-15 * sum(abs(v) for v in terms_)
    tail = pref * sum(abs(_term(x, _zero_guess(k), a)) for k in range(terms + 1, terms + 11))
    if tail > tol:
        raise ArithmeticError(f"series tail {tail:.3g} exceeds {tol:.3g} at x={x}")
    return DensityValue(pref * total, tail, roundoff)


def density(x: float) -> float:
    return density_f_A(x).value


# Integration range: f(2.5) ~ 3e-14, and past it the series is all roundoff.
SUPPORT = (0.0, 2.5)


def density_integral(weight=lambda x: 1.0) -> float:
    val, _ = integrate.quad(lambda x: weight(x) * density(x), 1e-3, SUPPORT[1], epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def density_moments() -> tuple[float, float, float]:
    """(normalization, mean, std) of the density by quadrature."""
    z = density_integral()
    m1 = density_integral(lambda x: x)
    m2 = density_integral(lambda x: x * x)
    return z, m1, math.sqrt(m2 - m1 * m1)


def char_function(theta: float) -> complex:
    """F_A(theta) = int f_A(x) exp(2 pi i x theta) dx."""
    w = 2 * math.pi * theta
    re, _ = integrate.quad(lambda x: density(x) * math.cos(w * x), 1e-3, SUPPORT[1], epsabs=1e-12, limit=400)
    im, _ = integrate.quad(lambda x: density(x) * math.sin(w * x), 1e-3, SUPPORT[1], epsabs=1e-12, limit=400)
    return complex(re, im)


def density_table(grid) -> list[tuple[float, float]]:
    return [(float(x), density(float(x))) for x in grid]


# -- Dyck areas --------------------------------------------------------------------


def dyck_area_closed_form(n: int) -> int:
    """Total area of all Dyck paths of length 2n: 4^n - binom(2n+2, n+1)/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4**n - math.comb(2 * n + 2, n + 1) // 2


def dyck_area_sum(n: int) -> int:
    return int(cb.areas(cb.path_array(2 * n, 1, "dyck", max_length=max(2 * n, 24))).astype(np.int64).sum())


def expected_area_ratio(n: int) -> float:
    """E[area] / (sqrt(pi) n^{3/2}), from the closed form."""
    from fractions import Fraction

    mean = Fraction(dyck_area_closed_form(n), cb.catalan(n))
    return float(mean) / (math.sqrt(math.pi) * n**1.5)


# -- twisted test state ------------------------------------------------------------


def paper_theta(n: int) -> float:
    """theta~ = n^{-3/2} / sqrt(10/3 - pi), i.e. theta = 1/sigma after scaling."""
    return n**-1.5 / math.sqrt(10 / 3 - math.pi)


@dataclass
class TwistedState:
    n: int
    s: int
    theta_tilde: float
    words: np.ndarray
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _area_phases(W: np.ndarray, theta_tilde: float) -> np.ndarray:
    A = cb.areas(W).astype(np.float64)
    return np.exp(2j * math.pi * A * theta_tilde)


def twisted_state(n: int, s: int, theta_tilde: float, cap: int = 3_000_000) -> TwistedState:
    N = s**n * cb.catalan(n)
    if N > cap:
        raise cb.CapExceeded(f"twisted state needs {N} amplitudes, cap {cap}")
    W = cb.path_array(2 * n, s, "dyck", max_length=max(2 * n, cb.DEFAULT_MAX_LENGTH))
    return TwistedState(n, s, theta_tilde, W, _area_phases(W, theta_tilde) / math.sqrt(N))


def move_pair_counts(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(a_j, b_j): exchange-move pairs at each window j = 1..2n-2.

    A pair is one unordered {uud, udu} (a) or {dud, udd} (b) exchange, counted
    once from the side whose last two steps form the peak.
    """
    Wi = np.asarray(W).astype(np.int16)
    a, b, c = Wi[:, :-2], Wi[:, 1:-1], Wi[:, 2:]
    peak_bc = (b > 0) & (c == -b)
    return (peak_bc & (a > 0)).sum(axis=0), (peak_bc & (a < 0)).sum(axis=0)


def _pair_quadratic_form(W: np.ndarray, s: int, amps: np.ndarray) -> float:
    # <phi|H|phi> summed over move pairs, without assembling H
    index = cb.WordIndex(W, s)
    Wi = W.astype(np.int16)
    total = 0.0
    for j in range(W.shape[1] - 2):
        a, b, c = Wi[:, j], Wi[:, j + 1], Wi[:, j + 2]
        r = np.nonzero((b > 0) & (c == -b) & (a != 0))[0]
        V = W[r].copy()
        V[:, j : j + 3] = W[r][:, [j + 1, j + 2, j]]
        t = index.lookup(V)
        total += 0.5 * float(np.sum(np.abs(amps[r] - amps[t]) ** 2))
    for j in range(W.shape[1] - 1):
        a, b = Wi[:, j], Wi[:, j + 1]
        r = np.nonzero((a > 0) & (b == -a))[0]
        for k2 in range(1, s + 1):
            rr = r[Wi[r, j] < k2]
            V = W[rr].copy()
            V[:, j], V[:, j + 1] = k2, -k2
            t = index.lookup(V)
            total += 0.5 * float(np.sum(np.abs(amps[rr] - amps[t]) ** 2))
    return total


@dataclass
class TwistedEnergy:
    direct: float
    pair_formula: float
    small_angle: float
    method: str

    @property
    def mismatch(self) -> float:
        return abs(self.direct - self.pair_formula)


def twisted_energy(n: int, s: int, theta_tilde: float, tol: float = 1e-10, matrix_limit: int = 200_000) -> TwistedEnergy:
    """<phi|H|phi> two ways: directly from the amplitudes and from pair counts.

    Below ``matrix_limit`` words the direct value is the quadratic form with
    the assembled balanced-sector H; above it the same sum is streamed over
    move pairs.  Raises when the two disagree by more than ``tol``.
    """
    st = twisted_state(n, s, theta_tilde)
    N = len(st.words)
    if N <= matrix_limit:
        direct = quadratic_form(word_hamiltonian(st.words, s), st.amplitudes)
        method = "matrix"
    else:
        direct = _pair_quadratic_form(st.words, s, st.amplitudes)
        method = "pairs"
    a, b = move_pair_counts(st.words)
    pairs = int(a.sum() + b.sum())
    formula = pairs / N * (1 - math.cos(4 * math.pi * theta_tilde))
    small = pairs / N * 8 * math.pi**2 * theta_tilde**2
    out = TwistedEnergy(direct, formula, small, method)
    if out.mismatch > tol * max(1.0, abs(formula)):
        raise ArithmeticError(f"twisted energy mismatch {out.mismatch:.3g} at n={n}, s={s}")
    return out


def overlap_with_ground(n: int, s: int, theta_tilde: float) -> complex:
    """<D|phi> = mean over Dyck paths of exp(2 pi i area theta~); colors do not
    change areas so s drops out."""
    W = cb.path_array(2 * n, 1, "dyck", max_length=max(2 * n, cb.DEFAULT_MAX_LENGTH))
    A = cb.areas(W).astype(np.int64)
    vals, counts = np.unique(A, return_counts=True)
    z = np.sum(counts * np.exp(2j * math.pi * vals * theta_tilde)) / len(A)
    return complex(z)


def matched_theta(n: int, theta_tilde: float) -> float:
    """Excursion-scale theta for a given lattice twist theta~."""
    return SCALE * n**1.5 * theta_tilde


# -- Monte Carlo -------------------------------------------------------------------


@dataclass
class AreaSample:
    n: int
    samples: int
    seed: int
    mean: float
    std: float
    grid: np.ndarray
    hist: np.ndarray  # density-normalized

    def report(self) -> dict:
        return {"grid": self.grid.tolist(), "counts": self.hist.tolist(), "scaled": True}


HIST_GRID = np.round(np.arange(0.0, 2.0 + 1e-9, 0.05), 10)


def mc_scaled_area(
    n: int, s: int = 1, samples: int = 100_000, seed: int = 0, grid=HIST_GRID, lattice_offset: bool = False
) -> AreaSample:
    """Areas of uniform Dyck samples scaled by 1 / (2 sqrt 2 n^{3/2}).

    Colors never change the area, so ``s`` does not enter the sampling.
    The exact mean area is 4^n / C_n - (2n + 1); with ``lattice_offset`` the
    2n + 1 is added back before scaling, removing the O(n^{-1/2}) shift
    of the lattice-point area against the continuum limit.
    """
    rng = np.random.default_rng(seed)
    A = cb.sample_dyck_areas(n, samples, rng).astype(np.float64)
    if lattice_offset:
        A += 2 * n + 1
    A /= SCALE * n**1.5
    hist, _ = np.histogram(A, bins=grid)
    dens = hist / (samples * np.diff(grid))
    return AreaSample(n, samples, seed, float(A.mean()), float(A.std(ddof=1)), np.asarray(grid), dens)


def histogram_sup_distance(sample: AreaSample, lo: float = 0.2, hi: float = 1.5) -> float:
    """Max |histogram - bin-averaged density| over bins inside [lo, hi]."""
    g = sample.grid
    worst = 0.0
    for i in range(len(g) - 1):
        a, b = g[i], g[i + 1]
        if a < lo - 1e-12 or b > hi + 1e-12:
            continue
        avg, _ = integrate.quad(density, a, b, epsabs=1e-12)
        worst = max(worst, abs(sample.hist[i] - avg / (b - a)))
    return worst
