"""Single-defect sector and the effective hopping model for the defect.

The minimal unbalanced sector holds words ``w0 x w1`` where ``w0`` and
``w1`` are colored Dyck words and ``x`` is one unmatched down step.  Inside
a word array the defect is stored as step value 0.

Two versions of the effective hopping Hamiltonian are built:

``literal``
    hopping amplitudes ``alpha_j^2 = C_{m-j-2} / (2s C_{m-j})`` and
    ``beta_j^2 = C_{j-1} / (2s C_{j+1})`` for every ``j = 1..m-2``.  This is
    the matrix whose ``m = 5`` instance is tabulated in the reference
    analysis.
``projected``
    the exact first-order projection of the defect perturbation onto the
    zero-energy states ``|omega_j>``.  Catalan indices are half-lengths,
    there is no ``1/s``, and only odd ``j`` hop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import combinatorics as cb
from .hamiltonian import HamiltonianSpec, word_hamiltonian
from .linalg import SparseSymMatrix, extreme_eigs
from .markov import ChainSpec, loglog_slope

VARIANTS = ("literal", "projected")
DEFECT_CAP = 200_000
EXACT_LIMIT = 51


def _check_m(m: int) -> None:
    if m < 3 or m % 2 == 0:
        raise ValueError(f"m must be odd and >= 3, got {m}")


# -- hopping model -------------------------------------------------------------


def hopping_coefficients(m: int, s: int = 1, variant: str = "literal") -> list[tuple[int, Fraction, Fraction]]:
    """(j, alpha_j^2, beta_j^2) for every hop j <-> j+2 (1-based sites)."""
    _check_m(m)
    C = cb.catalan
    out = []
    for j in range(1, m - 1):
        if variant == "literal":
            a2 = Fraction(C(m - j - 2), 2 * s * C(m - j))
            b2 = Fraction(C(j - 1), 2 * s * C(j + 1))
        elif variant == "projected":
            if j % 2 == 0:
                continue
            left, right = (j - 1) // 2, (m - j) // 2
            a2 = Fraction(C(right - 1), 2 * C(right))
            b2 = Fraction(C(left), 2 * C(left + 1))
        else:
            raise ValueError(f"unknown variant {variant!r}")
        out.append((j, a2, b2))
    return out


@dataclass(frozen=True)
class HoppingSpec:
    """H_eff = |1><1| + sum_j Gamma_j with Gamma_j = v_j v_j^T,
    v_j = alpha_j |j> - beta_j |j+2>."""

    m: int
    s: int
    variant: str
    coefficients: tuple[tuple[int, Fraction, Fraction], ...]

    @property
    def alpha2(self) -> list[Fraction]:
        return [a for _, a, _ in self.coefficients]

    @property
    def beta2(self) -> list[Fraction]:
        return [b for _, _, b in self.coefficients]

    def gamma_vectors(self) -> list[np.ndarray]:
        vecs = []
        for j, a2, b2 in self.coefficients:
            v = np.zeros(self.m)
            v[j - 1] = math.sqrt(a2)
            v[j + 1] = -math.sqrt(b2)
            vecs.append(v)
        return vecs

    def h_move(self) -> np.ndarray:
        H = np.zeros((self.m, self.m))
        for v in self.gamma_vectors():
            H += np.outer(v, v)
        return H

    def matrix(self) -> np.ndarray:
        H = self.h_move()
        H[0, 0] += 1.0
        return H


def build_heff(m: int, s: int = 1, variant: str = "literal") -> HoppingSpec:
    return HoppingSpec(m, s, variant, tuple(hopping_coefficients(m, s, variant)))


def sublattice(M: np.ndarray, which: str = "odd") -> np.ndarray:
    """Rows and columns of odd (1-based) sites, or all of them."""
    if which == "all":
        return M
    if which != "odd":
        raise ValueError("sublattice must be 'odd' or 'all'")
    return M[::2, ::2]


def ground_weights_exact(m: int) -> list[Fraction]:
    """g_j^2 = C_{j-1} C_{m-j} / C_m for j = 1..m."""
    C = cb.catalan
    return [Fraction(C(j - 1) * C(m - j), C(m)) for j in range(1, m + 1)]


def analytic_ground_state(m: int, s: int = 1) -> np.ndarray:
    """Normalized g_j proportional to sqrt(C_{j-1} C_{m-j})."""
    _check_m(m)
    return np.sqrt(np.array([float(w) for w in ground_weights_exact(m)]))


def kernel_identity_exact(m: int, s: int = 1) -> bool:
    """alpha_j g_j == beta_j g_{j+2} for every literal hop, in rational arithmetic.

    Both sides are non-negative, so comparing squares is exact.
    """
    g2 = ground_weights_exact(m)
    return all(a2 * g2[j - 1] == b2 * g2[j + 1] for j, a2, b2 in hopping_coefficients(m, s, "literal"))


def h_move_residual(m: int, s: int = 1) -> float:
    spec = build_heff(m, s)
    g = analytic_ground_state(m, s)
    return float(np.linalg.norm(spec.h_move() @ g))


def heff_ground_energy(m: int, s: int = 1, variant: str = "literal", which: str = "odd") -> float:
    """Smallest eigenvalue of H_eff on the chosen sublattice.

    The even sublattice carries no potential, so over all m sites the
    minimum is 0; the defect only visits odd sites.
    """
    H = sublattice(build_heff(m, s, variant).matrix(), which)
    return float(np.linalg.eigvalsh(H)[0])


@dataclass
class PinnedAmplitude:
    m: int
    computed: Fraction  # g_1^2 = C_{m-1} / C_m
    stated: Fraction  # C_m / C_{m+1}

    def report(self) -> dict:
        return {"m": self.m, "computed": float(self.computed), "stated": float(self.stated)}


def pinned_amplitude(m: int, s: int = 1) -> PinnedAmplitude:
    _check_m(m)
    C = cb.catalan
    return PinnedAmplitude(m, Fraction(C(m - 1), C(m)), Fraction(C(m), C(m + 1)))


def mapped_walk(m: int, s: int = 1, variant: str = "literal", which: str = "odd") -> ChainSpec:
    """Random walk P = 1 - H_move in the g-weighted frame.

    P(j, j+2) = alpha_j^2, P(j+2, j) = beta_j^2, the rest idles, and
    pi(j) is proportional to g_j^2.
    """
    spec = build_heff(m, s, variant)
    g2 = np.array([float(w) for w in ground_weights_exact(m)])
    P = np.zeros((m, m))
    for j, a2, b2 in spec.coefficients:
        P[j - 1, j + 1] = float(a2)
        P[j + 1, j - 1] = float(b2)
    P = sublattice(P, which)
    pi = sublattice(np.diag(g2), which).diagonal().copy()
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    sites = np.arange(1, m + 1)[:: 2 if which == "odd" else 1]
    return ChainSpec("hopping_walk", sites, sp.csr_matrix(P), pi / pi.sum(), m, s)


@dataclass
class WalkBounds:
    min_entry: float
    max_entry: float
    lower: float
    upper: float
    pi_ratio: float

    @property
    def ok(self) -> bool:
        return self.lower <= self.min_entry and self.max_entry <= self.upper


def walk_bounds(m: int, s: int = 1) -> WalkBounds:
    """Hop probabilities against [1/(32s), 1/(2s)], plus max pi(k)/pi(j)."""
    vals = [float(x) for _, a2, b2 in hopping_coefficients(m, s) for x in (a2, b2)]
    g2 = np.array([float(w) for w in ground_weights_exact(m)])
    return WalkBounds(min(vals), max(vals), 1 / (32 * s), 1 / (2 * s), float(g2.max() / g2.min()))


# -- the defect sector in the spin basis -------------------------------------------


def _dyck_or_empty(length: int, s: int) -> np.ndarray:
    if length == 0:
        return np.zeros((1, 0), dtype=np.int8)
    return cb.path_array(length, s, "dyck", max_length=max(length, cb.DEFAULT_MAX_LENGTH))


def defect_dimension(m: int, s: int = 1) -> int:
    C = cb.catalan
    return s ** ((m - 1) // 2) * sum(C((j - 1) // 2) * C((m - j) // 2) for j in range(1, m + 1, 2))


@dataclass(frozen=True)
class DefectBasis:
    m: int
    s: int
    words: np.ndarray  # sorted; defect stored as 0
    positions: np.ndarray  # 1-based site of the defect per word

    @property
    def dim(self) -> int:
        return len(self.words)

    def omega_states(self) -> np.ndarray:
        """Columns |omega_j>, uniform over words with the defect at odd j."""
        sites = np.arange(1, self.m + 1, 2)
        Om = np.zeros((self.dim, len(sites)))
        for c, j in enumerate(sites):
            mask = self.positions == j
            Om[mask, c] = 1.0 / math.sqrt(mask.sum())
        return Om


def defect_basis(m: int, s: int = 1, cap: int = DEFECT_CAP) -> DefectBasis:
    _check_m(m)
    dim = defect_dimension(m, s)
    if dim > cap:
        raise cb.CapExceeded(f"defect sector dimension {dim} exceeds cap {cap}")
    blocks = []
    for j in range(1, m + 1, 2):
        A = _dyck_or_empty(j - 1, s)
        B = _dyck_or_empty(m - j, s)
        left = np.repeat(A, len(B), axis=0)
        right = np.tile(B, (len(A), 1))
        mid = np.zeros((len(left), 1), dtype=np.int8)
        blocks.append(np.hstack([left, mid, right]))
    W = cb.sort_words(np.vstack(blocks).astype(np.int8), s)
    pos = np.argmax(W == 0, axis=1) + 1
    return DefectBasis(m, s, W, pos)


def build_single_defect(m: int, s: int = 1, eps: float = 0.0, cap: int = DEFECT_CAP) -> HamiltonianSpec:
    """H_eps = sum of Fredkin moves + eps (defect hops + pinning at site 1).

    Boundary and crossing penalties are left out: on this sector they either
    vanish or only raise the energy.
    """
    basis = defect_basis(m, s, cap)
    H = word_hamiltonian(basis.words, s, boundary=False, cross=False, defect_eps=eps)
    return HamiltonianSpec(SparseSymMatrix.from_sparse(H), "fredkin_defect", m, s, words=basis.words)


def projected_perturbation(m: int, s: int = 1) -> np.ndarray:
    """<omega_i| V |omega_j> with V the eps-coefficient of H_eps, computed numerically."""
    basis = defect_basis(m, s)
    V = (
        word_hamiltonian(basis.words, s, boundary=False, cross=False, defect_eps=1.0)
        - word_hamiltonian(basis.words, s, boundary=False, cross=False, defect_eps=0.0)
    )
    Om = basis.omega_states()
    return Om.T @ (V @ Om)


def defect_ground_energy(m: int, s: int, eps: float) -> float:
    H = build_single_defect(m, s, eps)
    return float(extreme_eigs(H.matrix, 1, "smallest", vectors=False).eigenvalues[0])


@dataclass
class FirstOrderReport:
    m: int
    s: int
    variant: str
    target: float
    eps: list[float]
    ratios: list[float]
    errors: list[float]
    slope: float

    @property
    def converges(self) -> bool:
        """Errors shrink linearly: log-log slope near 1 and monotone decrease."""
        decreasing = all(b < a for a, b in zip(self.errors, self.errors[1:]))
        return decreasing and 0.8 <= self.slope <= 1.2

    def report(self) -> dict:
        return {
            "m": self.m, "s": self.s, "variant": self.variant, "target": self.target,
            "eps": self.eps, "ratios": self.ratios, "errors": self.errors,
            "slope": self.slope, "converges": self.converges,
        }


def first_order_check(m: int, s: int = 1, eps_values=(1e-1, 1e-2, 1e-3), variant: str = "literal") -> FirstOrderReport:
    """Compare lambda_min(H_eps)/eps with lambda_1(H_eff) as eps shrinks."""
    target = heff_ground_energy(m, s, variant, "odd")
    ratios = [defect_ground_energy(m, s, e) / e for e in eps_values]
    errors = [abs(r - target) for r in ratios]
    if min(errors) > 0:
        slope, _ = loglog_slope(eps_values, errors)
    else:
        slope = math.inf
    return FirstOrderReport(m, s, variant, target, list(eps_values), ratios, errors, slope)


def hopping_report(m: int, s: int = 1, eps_values=(1e-1, 1e-2, 1e-3)) -> dict:
    wb = walk_bounds(m, s)
    rep = {
        "m": m,
        "s": s,
        "lambda1_heff": heff_ground_energy(m, s),
        "lambda1_heff_projected": heff_ground_energy(m, s, "projected"),
        "pinned_amplitude": float(pinned_amplitude(m, s).computed),
        "pinned_amplitude_stated": float(pinned_amplitude(m, s).stated),
        "walk_bounds_ok": wb.ok,
        "first_order_slope": None,
    }
    if defect_dimension(m, s) <= DEFECT_CAP:
        rep["first_order_slope"] = first_order_check(m, s, eps_values).slope
    return rep


def heff_energy_scan(ms, s: int = 1, variant: str = "literal") -> tuple[list[float], float]:
    """lambda_1(H_eff) over m and its log-log slope."""
    vals = [heff_ground_energy(m, s, variant) for m in ms]
    return vals, loglog_slope(ms, vals)[0]
