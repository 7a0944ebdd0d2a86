"""Vectorised element encodings and the sparse convolution kernel.

A *coder* maps group elements to int64 codes so that a whole distribution
can be pushed through one generator letter with a handful of numpy ops.

* :class:`FreeCoder`  - arithmetic code for reduced words of a free group,
  the word's letters as base-2k digits behind a leading sentinel 1.
* :class:`TableCoder` - index into an enumerated ball, stepping through the
  ball's right-multiplication table.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .exceptions import BallEscapeError, SupportGuardError
from .groups import Ball, FreeGroup, GroupElement, GroupModel, enumerate_ball

_INT64_LIMIT = 2 ** 62


class FreeCoder:
    def __init__(self, model: FreeGroup):
        self.model = model
        self.base = B = 2 * model.rank
        powers = [1]
        while powers[-1] * B < _INT64_LIMIT:
            powers.append(powers[-1] * B)
        self.powers = np.array(powers, dtype=np.int64)
        # a word of length L needs B**L <= code < B**(L+1)
        self.max_length = len(powers) - 2

    def encode(self, word) -> int:
        if len(word) > self.max_length:
            raise SupportGuardError(f"word length {len(word)} exceeds int64 code range")
        code = 1
        for l in word:
            code = code * self.base + l
        return code

    def decode(self, code: int) -> tuple:
        code = int(code)
        out = []
        while code > 1:
            code, l = divmod(code, self.base)
            out.append(l)
        return tuple(reversed(out))

    def element(self, code) -> GroupElement:
        return GroupElement(self.model, self.decode(code))

    def lengths(self, codes: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.powers, codes, side="right") - 1

    def step(self, codes: np.ndarray, letter: int) -> np.ndarray:
        B = self.base
        last = codes % B
        cancel = (codes >= B) & (last == (letter ^ 1))
        if not cancel.all() and codes[~cancel].max(initial=0) >= self.powers[self.max_length]:
            raise SupportGuardError("free-group codes would overflow int64; "
                                    "use a smaller n or float sampling")
        return np.where(cancel, codes // B, codes * B + letter)

    def decode_matrix(self, codes: np.ndarray):
        """Left-aligned letter matrix ``W`` (``-1`` padded) and lengths ``L``."""
        L = self.lengths(codes)
        width = max(int(L.max(initial=0)), 1)
        rev = np.full((len(codes), width), -1, dtype=np.int8)
        c = codes.copy()
        for j in range(width):
            live = j < L
            rev[live, j] = (c[live] % self.base).astype(np.int8)
            c = np.where(live, c // self.base, c)
        # rev[:, j] is the j-th letter from the end
        W = np.full_like(rev, -1)
        rows = np.arange(len(codes))
        for j in range(width):
            live = j < L
            W[rows[live], L[live] - 1 - j] = rev[live, j]
        return W, L

    def encode_matrix(self, W: np.ndarray, L: np.ndarray) -> np.ndarray:
        if len(L) and int(L.max()) > self.max_length:
            raise SupportGuardError("words too long for int64 codes")
        code = np.ones(len(L), dtype=np.int64)
        for p in range(W.shape[1]):
            code = np.where(p < L, code * self.base + W[:, p], code)
        return code


class TableCoder:
    def __init__(self, ball: Ball):
        self.ball = ball
        self.model = ball.model
        self.table = ball.table
        self.ball_lengths = ball.lengths

    def encode(self, word) -> int:
        try:
            return self.ball.index[tuple(word)]
        except KeyError:
            raise BallEscapeError(f"{self.model.format_word(word)!r} outside the "
                                  f"coding ball of radius {self.ball.radius}") from None

    def decode(self, code) -> tuple:
        return self.ball.elements[int(code)].word

    def element(self, code) -> GroupElement:
        return self.ball.elements[int(code)]

    def lengths(self, codes: np.ndarray) -> np.ndarray:
        return self.ball_lengths[codes]

    def step(self, codes: np.ndarray, letter: int) -> np.ndarray:
        out = self.table[codes, letter]
        if (out < 0).any():
            raise BallEscapeError(f"walk left the coding ball of radius {self.ball.radius}")
        return out


@lru_cache(maxsize=32)
def _cached_ball(model: GroupModel, radius: int) -> Ball:
    return enumerate_ball(model, radius)


def coder_for(model: GroupModel, radius: int):
    """A coder able to represent every element of length <= radius."""
    if isinstance(model, FreeGroup):
        return FreeCoder(model)
    if model.validated_radius is not None:
        radius = min(radius, model.validated_radius)
    return TableCoder(_cached_ball(model, radius))


def cached_ball(model: GroupModel, radius: int) -> Ball:
    return _cached_ball(model, radius)


def apply_word(coder, codes: np.ndarray, letters) -> np.ndarray:
    for l in letters:
        codes = coder.step(codes, l)
    return codes


def convolve_step(coder, codes, values, steps, weights, max_support=None):
    """One convolution step ``values * mu`` on sparse (codes, values).

    ``steps`` are letter tuples of the support elements and ``weights`` the
    matching scalars (ints for exact numerators, floats otherwise).  The
    result is sorted by code.
    """
    if max_support is not None and len(codes) * len(steps) > max_support:
        raise SupportGuardError(
            f"predicted support {len(codes) * len(steps)} exceeds guard {max_support}")
    parts_c, parts_v = [], []
    for letters, w in zip(steps, weights):
        parts_c.append(apply_word(coder, codes, letters))
        parts_v.append(values * w)
    return aggregate(np.concatenate(parts_c), np.concatenate(parts_v))


def aggregate(codes: np.ndarray, values: np.ndarray):
    if len(codes) == 0:
        return codes, values
    order = np.argsort(codes, kind="stable")
    codes, values = codes[order], values[order]
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    return codes[starts], np.add.reduceat(values, starts)


# ---------------------------------------------------------------------------
# batched free-group words
# ---------------------------------------------------------------------------

class FreeWordStack:
    """``N`` reduced words held as a letter matrix, updated in place."""

    def __init__(self, count: int, width: int):
        self.W = np.full((count, max(width, 1)), -1, dtype=np.int8)
        self.L = np.zeros(count, dtype=np.int64)
        self._rows = np.arange(count)

    def push(self, letters: np.ndarray):
        """Right-multiply row i by letter ``letters[i]`` (negative = no-op)."""
        W, L, rows = self.W, self.L, self._rows
        act = letters >= 0
        last = W[rows, np.maximum(L - 1, 0)]
        cancel = act & (L > 0) & (last == (letters ^ 1))
        grow = act & ~cancel
        L[cancel] -= 1
        W[rows[cancel], L[cancel]] = -1
        idx = rows[grow]
        W[idx, L[idx]] = letters[idx]
        L[idx] += 1


def _prime_factors(m: int) -> list[int]:
    out, p = [], 2
    while p * p <= m:
        if m % p == 0:
            out.append(p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        out.append(m)
    return out


def cyclic_core_bounds(W: np.ndarray, L: np.ndarray):
    """Per row, the number ``k`` of letters stripped from each end by cyclic
    reduction and the core length ``L - 2k``."""
    N, width = W.shape
    rows = np.arange(N)
    k = np.zeros(N, dtype=np.int64)
    alive = np.ones(N, dtype=bool)
    for i in range(width // 2):
        inside = alive & (2 * i + 1 < L)
        if not inside.any():
            break
        j = np.where(inside, L - 1 - i, 0)
        ok = inside & (W[rows, i] == (W[rows, j] ^ 1))
        k += ok
        alive = ok
    return k, L - 2 * k


def free_power_mask(W: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Rows that are proper powers (the empty word counts, as e = e²).

    A reduced word is a proper power iff its cyclic core of length m has a
    period m/q for some prime q dividing m.
    """
    k, m = cyclic_core_bounds(W, L)
    mask = m == 0
    for mm in np.unique(m):
        mm = int(mm)
        if mm < 2:
            continue
        sel = np.flatnonzero(m == mm)
        C = W[sel[:, None], k[sel, None] + np.arange(mm)]
        hit = np.zeros(len(sel), dtype=bool)
        for q in _prime_factors(mm):
            p = mm // q
            hit |= np.all(C[:, p:] == C[:, :mm - p], axis=1)
        mask[sel] = hit
    return mask
