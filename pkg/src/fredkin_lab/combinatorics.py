"""Dyck, colored-Dyck, Motzkin and lattice path words.

A step is stored as a small signed integer: ``+k`` is an up step of color
``k``, ``-k`` a down step of color ``k`` and ``0`` a flat step.  Whole
state spaces are handled as ``int8`` arrays of shape ``(count, length)``
sorted lexicographically by the text serialization (``0 < d < u``, then by
color), which is also the basis order used for every matrix in the package.
"""
from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

KINDS = ("dyck", "motzkin", "lattice")
DEFAULT_MAX_LENGTH = 24
CACHE_ENV = "FREDKIN_LAB_CACHE"


class CapExceeded(ValueError):
    """A requested state space is larger than the configured cap."""


def catalan(n: int) -> int:
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.comb(2 * n, n) // (n + 1)


def motzkin_count(length: int, s: int = 1) -> int:
    """Number of s-colored Motzkin walks with ``length`` steps."""
    return sum(
        math.comb(length, 2 * k) * catalan(k) * s**k for k in range(length // 2 + 1)
    )


# -- single words -----------------------------------------------------------


@dataclass(frozen=True)
class PathWord:
    steps: tuple[int, ...]
    kind: str = "dyck"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return format_word(self.steps)

    @classmethod
    def parse(cls, text: str, kind: str = "dyck") -> "PathWord":
        return cls(parse_word(text), kind)

    def heights(self) -> list[int]:
        return heights(self.steps)

    def is_valid(self) -> bool:
        return is_valid(self.steps, self.kind)


def _token(step: int) -> str:
    if step == 0:
        return "0"
    letter = "u" if step > 0 else "d"
    color = abs(step)
    return letter if color == 1 else f"{letter}{color}"


def format_word(steps: Sequence[int]) -> str:
    """``u1 d1 u2 ...`` tokens; color 1 is written without suffix."""
    return " ".join(_token(int(x)) for x in steps)


def parse_word(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    if " " not in text and set(text) <= set("ud0"):
        tokens = list(text)
    else:
        tokens = text.split()
    steps = []
    for tok in tokens:
        if tok == "0":
            steps.append(0)
            continue
        letter, color = tok[0], tok[1:]
        if letter not in "ud" or (color and not color.isdigit()):
            raise ValueError(f"bad step token {tok!r}")
        k = int(color) if color else 1
        if k < 1:
            raise ValueError(f"bad color in {tok!r}")
        steps.append(k if letter == "u" else -k)
    return tuple(steps)


def heights(steps: Sequence[int]) -> list[int]:
    ys = [0]
    for x in steps:
        ys.append(ys[-1] + (x > 0) - (x < 0))
    return ys


def is_valid(steps: Sequence[int], kind: str = "dyck") -> bool:
    if kind == "lattice":
        return 0 not in steps and sum((x > 0) - (x < 0) for x in steps) == 0
    if kind == "dyck" and (0 in steps or len(steps) % 2):
        return False
    stack: list[int] = []
    for x in steps:
        if x > 0:
            stack.append(x)
        elif x < 0:
            if not stack or stack.pop() != -x:
                return False
    return not stack


def area(w: PathWord | Sequence[int]) -> int:
    """Sum of lattice-point heights y_0 + ... + y_L."""
    steps = w.steps if isinstance(w, PathWord) else w
    if isinstance(w, PathWord) and w.kind == "lattice":
        raise ValueError("area is defined for dyck and motzkin words")
    return sum(heights(steps))


def peaks(w: PathWord | Sequence[int]) -> list[int]:
    """1-based positions i with an up step at i and a down step at i+1."""
    steps = w.steps if isinstance(w, PathWord) else w
    return [i + 1 for i in range(len(steps) - 1) if steps[i] > 0 and steps[i + 1] < 0]


class Move(NamedTuple):
    kind: str  # "U", "D" or "recolor"
    position: int  # 1-based first site touched
    colors: tuple[int, ...]


def exchange_target(a: int, b: int, c: int) -> tuple[int, int, int] | None:
    """Partner of a three-step window under a peak/step exchange, if any.

    ``a (b c)`` with ``(b c)`` a same-colored peak becomes ``(b c) a`` and
    ``(a b) c`` becomes ``c (a b)``; the moving single step must be a
    non-flat step.
    """
    if b > 0 and c == -b and a != 0:
        return (b, c, a)
    if a > 0 and b == -a and c != 0:
        return (c, a, b)
    return None


def _exchange_kind(window: tuple[int, int, int]) -> str:
    # U moves exchange a peak with an up step, D moves with a down step.
    a, b, c = window
    single = a if (b > 0 and c == -b) else c
    return "U" if single > 0 else "D"


def fredkin_moves(steps: Sequence[int], s: int) -> list[tuple[tuple[int, ...], Move]]:
    """Every single Fredkin move from ``steps`` (duplicates by target kept)."""
    w = tuple(steps)
    out = []
    for j in range(len(w) - 2):
        win = w[j : j + 3]
        tgt = exchange_target(*win)
        if tgt is not None:
            new = w[:j] + tgt + w[j + 3 :]
            out.append((new, Move(_exchange_kind(win), j + 1, tuple(abs(x) for x in win))))
    for j in range(len(w) - 1):
        k = w[j]
        if k > 0 and w[j + 1] == -k:
            for k2 in range(1, s + 1):
                if k2 != k:
                    new = w[:j] + (k2, -k2) + w[j + 2 :]
                    out.append((new, Move("recolor", j + 1, (k, k2))))
    return out


def fredkin_neighbors(w: PathWord, s: int) -> list[tuple[PathWord, Move]]:
    """Distinct words one Fredkin move away, each with the first move found."""
    seen: dict[tuple[int, ...], Move] = {}
    for new, mv in fredkin_moves(w.steps, s):
        if new != w.steps and new not in seen:
            seen[new] = mv
    return [(PathWord(t, w.kind), seen[t]) for t in sorted(seen, key=word_sort_key)]


def word_sort_key(steps: Sequence[int]) -> tuple:
    return tuple((0, 0) if x == 0 else ((1, -x) if x < 0 else (2, x)) for x in steps)


# -- peak displacing moves and canonical paths -------------------------------


def _peak_displacements(steps: tuple[int, ...], s: int):
    """Yield (cut start i, insert pos, color, target) for every peak move."""
    L = len(steps)
    for i in range(1, L):
        if steps[i - 1] > 0 and steps[i] == -steps[i - 1]:
            reduced = steps[: i - 1] + steps[i + 1 :]
            for pos in range(L - 1):
                for c in range(1, s + 1):
                    yield i, pos, c, reduced[:pos] + (c, -c) + reduced[pos:]


def peak_displace_targets(w: PathWord, s: int) -> list[tuple[PathWord, Fraction]]:
    """Exact one-step distribution of the peak-displacing chain from ``w``.

    A cut position is drawn from 1..L-1; if no peak starts there the chain
    idles.  Otherwise the peak is reinserted at one of L-1 positions with a
    uniformly drawn color.
    """
    L = len(w.steps)
    if L < 2:
        return [(w, Fraction(1))]
    total = (L - 1) * (L - 1) * s
    counts: Counter = Counter()
    for i, pos, c, tgt in _peak_displacements(w.steps, s):
        counts[tgt] += 1
    n_peaks = len(peaks(w))
    counts[w.steps] += (L - 1 - n_peaks) * (L - 1) * s
    return [
        (PathWord(t, w.kind), Fraction(counts[t], total))
        for t in sorted(counts, key=word_sort_key)
    ]


def canonical_path(x: PathWord, y: PathWord, s: int | None = None) -> list[PathWord]:
    """Fredkin-move path from ``x`` to a peak-displace neighbor ``y``.

    The displaced peak is walked one site at a time to its insertion point,
    followed by a single recoloring step when its color changes.  Among
    the ways of realizing ``x -> y`` the shortest walk is used.
    """
    if x.steps == y.steps:
        return [x]
    if s is None:
        s = max(abs(v) for v in x.steps + y.steps)
    best = None
    for i, pos, c, tgt in _peak_displacements(x.steps, s):
        if tgt == y.steps:
            length = abs(pos + 1 - i) + (c != x.steps[i - 1])
            cand = (length, i, pos, c)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise ValueError(f"{x} and {y} are not peak-displace adjacent")
    _, i, pos, c = best
    cur = list(x.steps)
    path = [x]
    p, target = i, pos + 1
    while p != target:
        if p < target:
            cur[p - 1 : p + 2] = [cur[p + 1], cur[p - 1], cur[p]]
            p += 1
        else:
            cur[p - 2 : p + 1] = [cur[p - 1], cur[p], cur[p - 2]]
            p -= 1
        path.append(PathWord(tuple(cur), x.kind))
    if cur[p - 1] != c:
        cur[p - 1 : p + 1] = [c, -c]
        path.append(PathWord(tuple(cur), x.kind))
    assert path[-1].steps == y.steps
    return path


# -- whole state spaces as arrays --------------------------------------------


def step_codes(W: np.ndarray, s: int) -> np.ndarray:
    """Order-preserving codes: flat 0, d^k -> k, u^k -> s + k."""
    W = np.asarray(W)
    codes = np.where(W > 0, s + W, -W.astype(np.int16))
    return codes.astype(np.uint8)


def _void_rows(codes: np.ndarray) -> np.ndarray:
    # bytes keys; +1 keeps NUL out so numpy does not strip trailing steps
    codes = np.ascontiguousarray(codes + np.uint8(1))
    return codes.view(np.dtype(("S", codes.shape[1]))).ravel()


class WordIndex:
    """Row lookup for a lexicographically sorted word array."""

    def __init__(self, W: np.ndarray, s: int):
        self.W = W
        self.s = s
        self._keys = _void_rows(step_codes(W, s)) if W.shape[1] else None
        if self._keys is not None and len(self._keys) > 1:
            if not np.all(self._keys[1:] > self._keys[:-1]):
                raise ValueError("word array must be strictly sorted")

    def __len__(self) -> int:
        return len(self.W)

    def lookup(self, V: np.ndarray) -> np.ndarray:
        """Row indices of the words ``V``; -1 where absent."""
        V = np.atleast_2d(V)
        if self._keys is None:
            return np.zeros(len(V), dtype=np.int64)
        q = _void_rows(step_codes(V, self.s))
        idx = np.searchsorted(self._keys, q)
        idx = np.minimum(idx, len(self._keys) - 1)
        found = self._keys[idx] == q
        return np.where(found, idx, -1).astype(np.int64)


def sort_words(W: np.ndarray, s: int) -> np.ndarray:
    order = np.argsort(_void_rows(step_codes(W, s)), kind="stable")
    return W[order]


def _cache_path(L: int, s: int, kind: str) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"{kind}_L{L}_s{s}.npy"


def path_array(L: int, s: int = 1, kind: str = "dyck", max_length: int = DEFAULT_MAX_LENGTH) -> np.ndarray:
    """All words of length ``L`` as a sorted ``int8`` array."""
    if kind not in KINDS:
        raise ValueError(f"unknown path kind {kind!r}")
    if L < 0 or (kind != "motzkin" and L % 2):
        raise ValueError(f"length {L} is invalid for {kind} words")
    if L > max_length:
        raise CapExceeded(f"path length {L} exceeds cap max_length={max_length}")
    if s < 1 or 2 * s + 1 > 255:
        raise ValueError("colors must be in [1, 127]")
    if kind == "lattice" and s != 1:
        raise ValueError("lattice paths are uncolored")
    cache = _cache_path(L, s, kind)
    if cache is not None and cache.exists():
        return np.load(cache)
    W = _generate(L, s, kind)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        np.save(cache, W)
    return W


def _generate(L: int, s: int, kind: str) -> np.ndarray:
    n = L // 2
    depth = L // 2 + 1
    words = np.zeros((1, L), dtype=np.int8)
    height = np.zeros(1, dtype=np.int16)
    ups = np.zeros(1, dtype=np.int16)
    stack = np.zeros((1, depth + 1), dtype=np.int8)
    nopt = 2 * s + 1
    for pos in range(L):
        remaining = L - pos - 1
        parts = []  # (parent idx, code, step value)
        if kind == "motzkin":
            ok = np.nonzero(height <= remaining)[0]
            parts.append((ok, 0, np.zeros(len(ok), dtype=np.int8)))
        if kind == "lattice":
            ok = np.nonzero((pos - ups) < n)[0]
            parts.append((ok, 1, np.full(len(ok), -1, dtype=np.int8)))
        else:
            ok = np.nonzero(height >= 1)[0]
            top = stack[ok, height[ok] - 1]
            parts.append((ok, top.astype(np.int64), -top))
        if kind == "lattice":
            ok = np.nonzero(ups < n)[0]
            parts.append((ok, s + 1, np.ones(len(ok), dtype=np.int8)))
        else:
            ok0 = np.nonzero(height + 1 <= remaining)[0]
            for k in range(1, s + 1):
                parts.append((ok0, s + k, np.full(len(ok0), k, dtype=np.int8)))
        parent = np.concatenate([p[0] for p in parts])
        code = np.concatenate([np.broadcast_to(p[1], p[0].shape) for p in parts])
        value = np.concatenate([p[2] for p in parts]).astype(np.int8)
        order = np.argsort(parent.astype(np.int64) * nopt + code, kind="stable")
        parent, value = parent[order], value[order]
        words = words[parent]
        words[:, pos] = value
        height = height[parent] + np.sign(value).astype(np.int16)
        ups = ups[parent] + (value > 0)
        stack = stack[parent]
        up = np.nonzero(value > 0)[0]
        if kind != "lattice" and len(up):
            stack[up, height[up] - 1] = value[up]
    if kind != "lattice":
        words = words[height == 0]
    return words


def enumerate_paths(L: int, s: int = 1, kind: str = "dyck", max_length: int = DEFAULT_MAX_LENGTH) -> list[PathWord]:
    W = path_array(L, s, kind, max_length)
    return [PathWord(tuple(int(v) for v in row), kind) for row in W]


def height_array(W: np.ndarray) -> np.ndarray:
    """Heights y_1..y_L per row (y_0 = 0 is implicit)."""
    return np.cumsum(np.sign(W).astype(np.int32), axis=1)


def areas(W: np.ndarray) -> np.ndarray:
    return height_array(W).sum(axis=1).astype(np.int64)


def count_words(L: int, s: int, kind: str) -> int:
    if kind == "dyck":
        return s ** (L // 2) * catalan(L // 2)
    if kind == "lattice":
        return math.comb(L, L // 2)
    return motzkin_count(L, s)


# -- uniform sampling ---------------------------------------------------------


def _cycle_lemma_start(S: np.ndarray) -> np.ndarray:
    """Rotation start for rows of prefix sums S_0..S_{L-1} (first minimum)."""
    return np.argmin(S, axis=1)


def sample_dyck_batch(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent uniform Dyck words (uncolored) of length 2n."""
    L = 2 * n + 1
    base = np.concatenate([np.ones(n, dtype=np.int8), -np.ones(n + 1, dtype=np.int8)])
    X = rng.permuted(np.tile(base, (size, 1)), axis=1)
    S = np.zeros((size, L), dtype=np.int32)
    np.cumsum(X[:, :-1], axis=1, out=S[:, 1:])
    k = _cycle_lemma_start(S)
    idx = (k[:, None] + np.arange(L)) % L
    return np.take_along_axis(X, idx, axis=1)[:, :-1]


def sample_dyck_areas(n: int, size: int, rng: np.random.Generator, batch: int = 256) -> np.ndarray:
    """Areas of ``size`` uniform Dyck words of length 2n, without building them.

    With prefix sums S_j of a random arrangement of n ups and n+1 downs and
    k the first minimum, the rotated walk has area sum(S) - L*S_k - k.
    """
    L = 2 * n + 1
    base = np.concatenate([np.ones(n, dtype=np.int8), -np.ones(n + 1, dtype=np.int8)])
    out = np.empty(size, dtype=np.int64)
    done = 0
    while done < size:
        b = min(batch, size - done)
        X = rng.permuted(np.tile(base, (b, 1)), axis=1)
        S = np.zeros((b, L), dtype=np.int64)
        np.cumsum(X[:, :-1], axis=1, out=S[:, 1:])
        k = _cycle_lemma_start(S)
        Sk = S[np.arange(b), k]
        out[done : done + b] = S.sum(axis=1) - L * Sk - k
        done += b
    return out


def color_word(shape: Sequence[int], colors: Sequence[int]) -> tuple[int, ...]:
    """Color the matched pairs of an uncolored word, in order of their up steps."""
    out = []
    stack = []
    it = iter(colors)
    for x in shape:
        if x > 0:
            c = next(it)
            stack.append(c)
            out.append(c)
        elif x < 0:
            out.append(-stack.pop())
        else:
            out.append(0)
    return tuple(out)


def sample_dyck_uniform(n: int, s: int = 1, seed: int | None = None) -> PathWord:
    """Exactly uniform s-colored Dyck word of length 2n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    shape = sample_dyck_batch(n, 1, rng)[0]
    colors = rng.integers(1, s + 1, size=n)
    return PathWord(color_word(shape.tolist(), colors.tolist()), "dyck")
