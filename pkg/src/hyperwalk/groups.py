"""Word arithmetic, canonical forms and ball enumeration for three backends.

Letters are small integers: generator ``i`` is letter ``2*i`` and its inverse
is ``2*i + 1``, so inverting a letter is ``l ^ 1`` and the natural integer
order is the shortlex alphabet ``a < A < b < B < ...``.

Backends
--------
``FreeGroup``            free group of rank k, canonical form = reduced word.
``FreeProductCyclics``   free product of finite cyclic groups and copies of Z.
``SmallCancellationBall`` finitely presented C'(1/6) group, known on a
                          finite ball built by BFS with Dehn's algorithm.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    BackendMismatchError,
    BallEscapeError,
    GuardError,
    InvalidWordError,
    SmallCancellationError,
)

# 'e' is reserved for the identity when printing words.
DEFAULT_NAMES = "abcdfghijklmnopqrstuvwxyz"


def inverse_letter(letter: int) -> int:
    return letter ^ 1


def invert_word(word: Sequence[int]) -> tuple:
    return tuple(l ^ 1 for l in reversed(word))


def free_reduce(word: Iterable[int]) -> tuple:
    out: list[int] = []
    for l in word:
        if out and out[-1] == l ^ 1:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


def shortlex_key(word: Sequence[int]):
    return (len(word), tuple(word))


def parse_word(text: str, names: str) -> tuple:
    """Parse ``"ab A b^-1"`` / ``"b⁻¹"`` style words; ``e`` or ``""`` is the identity."""
    text = text.replace("⁻¹", "^-1").replace(" ", "")
    if text in ("", "e", "1"):
        return ()
    out = []
    for m in re.finditer(r"([A-Za-z])(\^-1)?|(.)", text):
        if m.group(3) is not None:
            raise InvalidWordError(f"unexpected character {m.group(3)!r} in {text!r}")
        c = m.group(1)
        idx = names.find(c.lower())
        if idx < 0:
            raise InvalidWordError(f"unknown generator {c!r}")
        letter = 2 * idx + (1 if c.isupper() else 0)
        if m.group(2):
            letter ^= 1
        out.append(letter)
    return tuple(out)


def format_word(word: Sequence[int], names: str) -> str:
    if not word:
        return "e"
    return "".join(names[l >> 1].upper() if l & 1 else names[l >> 1] for l in word)


def _check_names(rank: int, names: str | None) -> str:
    names = names or DEFAULT_NAMES[:rank]
    if len(names) < rank or len(set(names[:rank])) < rank:
        raise ValueError(f"need {rank} distinct generator names, got {names!r}")
    if any(not c.isalpha() or not c.islower() or c == "e" for c in names[:rank]):
        raise ValueError("generator names must be lowercase letters other than 'e'")
    return names[:rank]


class Generator(NamedTuple):
    index: int
    inverse: bool = False

    @property
    def letter(self) -> int:
        return 2 * self.index + int(self.inverse)

    @classmethod
    def from_letter(cls, letter: int) -> "Generator":
        return cls(letter >> 1, bool(letter & 1))

    def __invert__(self) -> "Generator":
        return Generator(self.index, not self.inverse)


class GroupElement:
    """An element stored by its backend canonical word."""

    __slots__ = ("model", "word", "_hash")

    def __init__(self, model: "GroupModel", word: tuple):
        self.model = model
        self.word = word
        self._hash = hash(word)

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.word == other.word and self.model == other.model

    def __hash__(self):
        return self._hash

    def __lt__(self, other: "GroupElement"):
        return shortlex_key(self.word) < shortlex_key(other.word)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.model.multiply(self, other)

    def __pow__(self, d: int) -> "GroupElement":
        return self.model.power(self, d)

    def inverse(self) -> "GroupElement":
        return self.model.invert(self)

    @property
    def length(self) -> int:
        return self.model.word_length(self)

    @property
    def is_identity(self) -> bool:
        return not self.word

    def __str__(self):
        return self.model.format_word(self.word)

    def __repr__(self):
        return f"GroupElement({self.model.backend_id!r}, {str(self)!r})"


class GroupModel:
    """Common surface of the backends.

    Subclasses implement ``canonical_word``, ``length_of`` and
    ``geodesic_word`` on raw letter tuples; everything else is derived.
    """

    kind = "abstract"
    validated_radius: int | None = None

    def __init__(self, rank: int, names: str | None = None):
        if rank < 0:
            raise ValueError("rank must be nonnegative")
        self.rank = rank
        self.names = _check_names(rank, names)

    # -- identity and hashing -------------------------------------------
    @property
    def backend_id(self) -> str:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, GroupModel) and self.backend_id == other.backend_id

    def __hash__(self):
        return hash(self.backend_id)

    def __repr__(self):
        return f"<{type(self).__name__} {self.backend_id}>"

    # -- backend hooks ---------------------------------------------------
    def canonical_word(self, word: Sequence[int]) -> tuple:
        raise NotImplementedError

    def length_of(self, word: tuple) -> int:
        raise NotImplementedError

    def geodesic_word(self, word: tuple) -> tuple:
        raise NotImplementedError

    def multiply_words(self, u: tuple, v: tuple) -> tuple:
        return self.canonical_word(u + v)

    def invert_canonical(self, u: tuple) -> tuple:
        return self.canonical_word(invert_word(u))

    # -- letters ---------------------------------------------------------
    def _check_letters(self, word: Sequence[int]) -> tuple:
        word = tuple(int(l) for l in word)
        bound = 2 * self.rank
        for l in word:
            if not 0 <= l < bound:
                raise InvalidWordError(
                    f"letter {l} is not a generator of this {self.kind} group")
        return word

    @cached_property
    def edge_letters(self) -> tuple:
        """Letters labelling distinct Cayley-graph edges out of each vertex."""
        seen, out = set(), []
        for l in range(2 * self.rank):
            w = self.canonical_word((l,))
            if w and w not in seen:
                seen.add(w)
                out.append(l)
        return tuple(out)

    def generators(self) -> list[GroupElement]:
        """Distinct elements of the symmetric generating set, shortlex order."""
        return [GroupElement(self, self.canonical_word((l,))) for l in self.edge_letters]

    # -- parsing / printing ----------------------------------------------
    def parse_word(self, text: str) -> tuple:
        return parse_word(text, self.names)

    def format_word(self, word: Sequence[int]) -> str:
        return format_word(word, self.names)

    # -- group law on elements -------------------------------------------
    @cached_property
    def identity(self) -> GroupElement:
        return GroupElement(self, ())

    def canonicalize(self, word) -> GroupElement:
        if isinstance(word, str):
            word = self.parse_word(word)
        return GroupElement(self, self.canonical_word(self._check_letters(word)))

    element = canonicalize

    def _own(self, x: GroupElement) -> GroupElement:
        if x.model != self:
            raise BackendMismatchError(
                f"element of {x.model.backend_id} used with {self.backend_id}")
        return x

    def multiply(self, x: GroupElement, y: GroupElement) -> GroupElement:
        self._own(x), self._own(y)
        return GroupElement(self, self.multiply_words(x.word, y.word))

    def invert(self, x: GroupElement) -> GroupElement:
        return GroupElement(self, self.invert_canonical(self._own(x).word))

    def word_length(self, x: GroupElement) -> int:
        return self.length_of(self._own(x).word)

    def power(self, x: GroupElement, d: int) -> GroupElement:
        if d < 0:
            raise ValueError("power exponent must be >= 0")
        self._own(x)
        result, base = (), x.word
        while d:
            if d & 1:
                result = self.multiply_words(result, base)
            d >>= 1
            if d:
                base = self.multiply_words(base, base)
        return GroupElement(self, result)

    def conjugate(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """``g h g^-1``."""
        return self.multiply(self.multiply(g, h), self.invert(g))

    @property
    def is_free_type(self) -> bool:
        return False


class FreeGroup(GroupModel):
    kind = "free"

    def __init__(self, rank: int, names: str | None = None):
        if rank < 1:
            raise ValueError("free group rank must be >= 1")
        super().__init__(rank, names)

    @property
    def backend_id(self):
        return f"free:{self.rank}"

    @property
    def is_free_type(self):
        return True

    def canonical_word(self, word):
        return free_reduce(word)

    def multiply_words(self, u, v):
        i, n = 0, min(len(u), len(v))
        while i < n and u[-1 - i] == v[i] ^ 1:
            i += 1
        return u[:len(u) - i] + v[i:]

    def invert_canonical(self, u):
        return invert_word(u)

    def length_of(self, word):
        return len(word)

    def geodesic_word(self, word):
        return word

    def cyclic_reduce_word(self, word):
        """Return ``(core, conjugator)`` with word = conj·core·conj⁻¹."""
        i, n = 0, len(word)
        while 2 * i + 1 < n and word[i] == word[n - 1 - i] ^ 1:
            i += 1
        return word[i:n - i], word[:i]


class FreeProductCyclics(GroupModel):
    """Free product of cyclic groups ``Z/m_1 * ... * Z/m_r * Z^{*f}``.

    Canonical words write each syllable with a positive exponent in the
    residue window ``1..m-1`` for torsion factors (``t^-1`` in Z/3 is ``tt``);
    word length is still the geodesic length, a torsion syllable of exponent
    e costing ``min(e, m - e)`` letters.
    """

    kind = "cyclics"

    def __init__(self, orders: Sequence[int], free_rank: int = 0, names: str | None = None):
        orders = tuple(int(m) for m in orders)
        if any(m < 2 for m in orders):
            raise ValueError("cyclic factor orders must be >= 2")
        if free_rank < 0 or len(orders) + free_rank < 1:
            raise ValueError("need at least one factor")
        super().__init__(len(orders) + free_rank, names)
        self.orders = orders
        self.free_rank = free_rank
        self._mod = orders + (0,) * free_rank  # 0 marks an infinite cyclic factor

    @property
    def backend_id(self):
        tail = f"+{self.free_rank}" if self.free_rank else ""
        return "cyclics:" + ",".join(map(str, self.orders)) + tail

    @property
    def is_free_type(self):
        return True

    def order_of_factor(self, i: int) -> int:
        return self._mod[i]

    # syllables are (factor, exponent) pairs, exponent normalised
    def syllables(self, word) -> list:
        stack: list[list[int]] = []
        mod = self._mod
        for l in word:
            i, s = l >> 1, (-1 if l & 1 else 1)
            if stack and stack[-1][0] == i:
                e = stack[-1][1] + s
                if mod[i]:
                    e %= mod[i]
                if e == 0:
                    stack.pop()
                else:
                    stack[-1][1] = e
            else:
                stack.append([i, s % mod[i] if mod[i] else s])
        return [tuple(p) for p in stack]

    def word_from_syllables(self, syl) -> tuple:
        out: list[int] = []
        for i, e in syl:
            if e > 0:
                out.extend([2 * i] * e)
            else:
                out.extend([2 * i + 1] * (-e))
        return tuple(out)

    def canonical_word(self, word):
        return self.word_from_syllables(self.syllables(word))

    def _syllable_length(self, i, e):
        m = self._mod[i]
        return min(e, m - e) if m else abs(e)

    def length_of(self, word):
        return sum(self._syllable_length(i, e) for i, e in self.syllables(word))

    def geodesic_word(self, word):
        out: list[int] = []
        for i, e in self.syllables(word):
            m = self._mod[i]
            if m and e > m - e:
                out.extend([2 * i + 1] * (m - e))
            elif e > 0:
                out.extend([2 * i] * e)
            else:
                out.extend([2 * i + 1] * (-e))
        return tuple(out)

    def element_order(self, word) -> int:
        """Order of the element (0 for infinite order)."""
        core, _ = self.cyclic_reduce_word(word)
        syl = self.syllables(core)
        if not syl:
            return 1
        if len(syl) == 1:
            i, e = syl[0]
            m = self._mod[i]
            return m // math.gcd(m, e) if m else 0
        return 0

    def cyclic_reduce_word(self, word):
        syl = self.syllables(word)
        conj: list = []
        while len(syl) >= 2 and syl[0][0] == syl[-1][0]:
            first = syl[0]
            conj.append(first)
            merged = self.syllables(self.word_from_syllables([syl[-1], first]))
            syl = syl[1:-1] + merged
        return self.word_from_syllables(syl), self.canonical_word(self.word_from_syllables(conj))


# ---------------------------------------------------------------------------
# Finitely presented C'(1/6) groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Presentation:
    rank: int
    relators: tuple = ()
    orders: tuple = ()
    names: str = ""

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", DEFAULT_NAMES[:self.rank])

    def format(self) -> str:
        """Render in the plain-text presentation format."""
        head = f"rank={self.rank}"
        if self.orders:
            head += " orders=" + ",".join(map(str, self.orders))
        if self.names != DEFAULT_NAMES[:self.rank]:
            head += f" names={self.names}"
        return "\n".join([head] + [format_word(r, self.names) for r in self.relators]) + "\n"


def parse_presentation(text: str) -> Presentation:
    """Parse the plain-text presentation format.

    The first non-comment line is a header of ``key=value`` tokens
    (``rank`` required, ``orders`` and ``names`` optional); every following
    non-empty line is one relator, lowercase letters for generators and
    uppercase for their inverses.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty presentation")
    header = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise ValueError(f"bad header token {tok!r}")
        k, v = tok.split("=", 1)
        header[k.strip().lower()] = v.strip()
    if "rank" not in header:
        raise ValueError("presentation header must give rank=<k>")
    rank = int(header["rank"])
    orders = tuple(int(m) for m in header.get("orders", "").split(",") if m)
    names = _check_names(rank, header.get("names"))
    relators = []
    for ln in lines[1:]:
        if not re.fullmatch(r"[A-Za-z ]+", ln):
            raise ValueError(f"bad relator line {ln!r}")
        relators.append(parse_word(ln, names))
    return Presentation(rank, tuple(relators), orders, names)


def cyclic_permutations(word: tuple) -> list:
    return [word[i:] + word[:i] for i in range(len(word))]


def symmetrized_relators(relators: Iterable[tuple]) -> list:
    out = set()
    for r in relators:
        r = free_reduce(r)
        while len(r) >= 2 and r[0] == r[-1] ^ 1:
            r = r[1:-1]
        if not r:
            continue
        for w in (r, invert_word(r)):
            out.update(cyclic_permutations(w))
    return sorted(out, key=shortlex_key)


def small_cancellation_pieces(relators: Iterable[tuple]):
    """Yield ``(piece, r1, r2)`` for each maximal common prefix of two
    distinct words of the symmetrized relator set."""
    rs = symmetrized_relators(relators)
    for a in range(len(rs)):
        for b in range(a + 1, len(rs)):
            u, v = rs[a], rs[b]
            p = 0
            while p < min(len(u), len(v)) and u[p] == v[p]:
                p += 1
            if p:
                yield u[:p], u, v


def check_c16(relators: Iterable[tuple]) -> list:
    """Return the list of pieces violating C'(1/6); empty means it holds."""
    bad = []
    for piece, u, v in small_cancellation_pieces(relators):
        if 6 * len(piece) >= min(len(u), len(v)):
            bad.append((piece, u, v))
    return bad


class DehnReducer:
    """Dehn's algorithm for a symmetrized C'(1/6) relator set."""

    def __init__(self, relators: Iterable[tuple]):
        self.rules: dict[tuple, tuple] = {}
        for r in symmetrized_relators(relators):
            n = len(r)
            for p in range(n // 2 + 1, n + 1):
                u, rest = r[:p], r[p:]
                repl = invert_word(rest)
                old = self.rules.get(u)
                if old is None or shortlex_key(repl) < shortlex_key(old):
                    self.rules[u] = repl
        self.lengths = sorted({len(u) for u in self.rules}, reverse=True)

    def reduce(self, word: Sequence[int]) -> tuple:
        w = free_reduce(word)
        changed = True
        while changed:
            changed = False
            n = len(w)
            for p in self.lengths:
                if p > n:
                    continue
                for i in range(n - p + 1):
                    repl = self.rules.get(w[i:i + p])
                    if repl is not None:
                        w = free_reduce(w[:i] + repl + w[i + p:])
                        changed = True
                        break
                if changed:
                    break
        return w

    def is_trivial(self, word: Sequence[int]) -> bool:
        return not self.reduce(word)


def _nullspace_mod_p(rows: list, ncols: int, p: int) -> list:
    """Basis of {f : f·r ≡ 0 mod p for every row r}."""
    m = [[x % p for x in r] for r in rows]
    pivots, rank = [], 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][c], -1, p)
        m[rank] = [x * inv % p for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][c]:
                f = m[i][c]
                m[i] = [(x - f * y) % p for x, y in zip(m[i], m[rank])]
        pivots.append(c)
        rank += 1
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [0] * ncols
        v[fc] = 1
        for i, pc in enumerate(pivots):
            v[pc] = -m[i][fc] % p
        basis.append(v)
    return basis


class SmallCancellationBall(GroupModel):
    """A C'(1/6) group known on the ball of radius ``radius``.

    The ball is built by BFS in shortlex order; a new word is identified with
    a known element when Dehn's algorithm reduces their quotient to the empty
    word.  Candidates are bucketed by an abelianisation invariant so only a
    few quotients are tested.  Anything outside the ball raises
    :class:`BallEscapeError`.
    """

    kind = "small-cancellation"
    _P = 1_000_003

    def __init__(self, presentation: Presentation, radius: int):
        if radius < 1:
            raise ValueError("ball radius must be >= 1")
        super().__init__(presentation.rank, presentation.names)
        relators = list(presentation.relators)
        relators += [(2 * i,) * m for i, m in enumerate(presentation.orders)]
        relators = [self._check_letters(r) for r in relators]
        bad = check_c16(relators)
        if bad:
            piece, u, v = bad[0]
            raise SmallCancellationError(
                f"presentation is not C'(1/6): piece {self.format_word(piece)!r} "
                f"shared by {self.format_word(u)!r} and {self.format_word(v)!r} "
                f"({len(bad)} offending pairs)")
        self.presentation = presentation
        self.relators = tuple(relators)
        self.validated_radius = radius
        self.dehn = DehnReducer(relators)
        self._build(radius)

    @property
    def backend_id(self):
        h = hashlib.sha1(repr((self.rank, self.relators)).encode()).hexdigest()[:10]
        return f"scb:{h}:{self.validated_radius}"

    def _invariant(self, vec):
        return tuple(sum(f * x for f, x in zip(row, vec)) % self._P for row in self._functionals)

    def _build(self, R: int):
        r2 = 2 * self.rank
        exps = []
        for rel in self.relators:
            v = [0] * self.rank
            for l in rel:
                v[l >> 1] += -1 if l & 1 else 1
            exps.append(v)
        self._functionals = _nullspace_mod_p(exps, self.rank, self._P)

        words: list[tuple] = [()]
        vecs: list[tuple] = [(0,) * self.rank]
        layer = [0]
        index = {(): 0}
        buckets: dict[tuple, list[int]] = {self._invariant(vecs[0]): [0]}
        table: list[list[int]] = []
        start = 0
        for L in range(R + 1):
            end = len(words)
            for u in range(start, end):
                row = []
                uw = words[u]
                for l in range(r2):
                    if uw and uw[-1] == l ^ 1:
                        row.append(index[uw[:-1]])
                        continue
                    w = uw + (l,)
                    vec = list(vecs[u])
                    vec[l >> 1] += -1 if l & 1 else 1
                    vec = tuple(vec)
                    key = self._invariant(vec)
                    found = -1
                    for cand in buckets.get(key, ()):
                        if abs(layer[cand] - L) <= 1 and \
                                self.dehn.is_trivial(w + invert_word(words[cand])):
                            found = cand
                            break
                    if found < 0 and L + 1 <= R:
                        found = len(words)
                        words.append(w)
                        vecs.append(vec)
                        layer.append(L + 1)
                        index[w] = found
                        buckets.setdefault(key, []).append(found)
                    row.append(found)
                table.append(row)
            start = end
        self._words = words
        self._index = index
        self._lengths = np.array(layer, dtype=np.int64)
        self._table = np.array(table, dtype=np.int64).reshape(len(words), r2)

    # -- ball data used by Ball and the walk kernels --------------------
    @property
    def ball_words(self):
        return self._words

    @property
    def ball_table(self) -> np.ndarray:
        return self._table

    @property
    def ball_lengths(self) -> np.ndarray:
        return self._lengths

    def _walk(self, start: int, word) -> int:
        t = self._table
        i = start
        for l in word:
            i = t[i, l]
            if i < 0:
                return -1
        return int(i)

    def canonical_word(self, word):
        word = free_reduce(word)
        i = self._walk(0, word)
        if i < 0:
            i = self._walk(0, self.dehn.reduce(word))
        if i < 0:
            raise BallEscapeError(
                f"word {self.format_word(word)!r} is not known to lie in the "
                f"validated ball of radius {self.validated_radius}")
        return self._words[i]

    def multiply_words(self, u, v):
        i = self._walk(self._index[u], v)
        if i >= 0:
            return self._words[i]
        return self.canonical_word(u + v)

    def length_of(self, word):
        try:
            return int(self._lengths[self._index[word]])
        except KeyError:
            raise BallEscapeError(f"{self.format_word(word)!r} is outside the ball") from None

    def geodesic_word(self, word):
        return word

    def equal_by_dehn(self, u: Sequence[int], v: Sequence[int]) -> bool:
        return self.dehn.is_trivial(tuple(u) + invert_word(v))


def surface_presentation(genus: int) -> Presentation:
    """``<a1,b1,...,ag,bg | [a1,b1]...[ag,bg]>``."""
    rel = []
    for j in range(genus):
        a, b = 4 * j, 4 * j + 2
        rel += [a, b, a + 1, b + 1]
    return Presentation(2 * genus, (tuple(rel),))


def surface_group(genus: int = 2, radius: int = 3) -> SmallCancellationBall:
    return SmallCancellationBall(surface_presentation(genus), radius)


def model_from_presentation(p: Presentation, radius: int = 3) -> GroupModel:
    if not p.relators and not p.orders:
        return FreeGroup(p.rank, p.names)
    if not p.relators:
        return FreeProductCyclics(p.orders, p.rank - len(p.orders), p.names)
    return SmallCancellationBall(p, radius)


def parse_group(spec: str, radius: int = 3) -> GroupModel:
    """Build a model from a CLI spec.

    ``free:K``, ``cyclics:M1,M2[+F]``, ``surface:G`` or
    ``presentation:PATH`` (radius applies to ball-table backends).
    """
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "free":
        return FreeGroup(int(arg))
    if kind == "cyclics":
        orders, _, free = arg.partition("+")
        return FreeProductCyclics([int(m) for m in orders.split(",") if m], int(free or 0))
    if kind == "surface":
        return surface_group(int(arg or 2), radius)
    if kind == "presentation":
        with open(arg, encoding="utf-8") as fh:
            return model_from_presentation(parse_presentation(fh.read()), radius)
    raise ValueError(f"unknown group spec {spec!r}")


# ---------------------------------------------------------------------------
# Balls
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ball:
    """All elements of word length <= radius, sorted by (length, shortlex).

    ``table[i, l]`` is the index of ``elements[i] * letter l`` or -1 when
    that product lies outside the ball.
    """

    model: GroupModel
    radius: int
    elements: tuple
    lengths: np.ndarray
    table: np.ndarray
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, x):
        return isinstance(x, GroupElement) and x.model == self.model and x.word in self.index

    def index_of(self, x: GroupElement) -> int:
        try:
            return self.index[x.word]
        except KeyError:
            raise GuardError(f"{x} is outside the ball of radius {self.radius}") from None

    def sphere(self, r: int) -> list:
        return [x for x, l in zip(self.elements, self.lengths) if l == r]

    def distance(self, x: GroupElement, y: GroupElement) -> int:
        self.index_of(x), self.index_of(y)
        return self.model.word_length(self.model.multiply(self.model.invert(x), y))

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """``D[i, j] = d(x_i, x_j) = |x_i^-1 x_j|``."""
        return pairwise_distances(self.model, self.elements, self.elements)


def pairwise_distances(model: GroupModel, xs: Sequence[GroupElement],
                       ys: Sequence[GroupElement]) -> np.ndarray:
    if isinstance(model, FreeGroup):
        return _tree_distances(xs, ys)
    out = np.empty((len(xs), len(ys)), dtype=np.int64)
    for i, x in enumerate(xs):
        xi = model.invert_canonical(x.word)
        for j, y in enumerate(ys):
            out[i, j] = model.length_of(model.multiply_words(xi, y.word))
    return out


def _word_matrix(elements) -> tuple[np.ndarray, np.ndarray]:
    lens = np.array([len(x.word) for x in elements], dtype=np.int64)
    width = int(lens.max()) if len(lens) else 0
    W = np.full((len(elements), max(width, 1)), -1, dtype=np.int16)
    for i, x in enumerate(elements):
        W[i, :len(x.word)] = x.word
    return W, lens


def _tree_distances(xs, ys) -> np.ndarray:
    # in a tree d(x, y) = |x| + |y| - 2 * (common prefix length)
    Wx, lx = _word_matrix(xs)
    Wy, ly = _word_matrix(ys)
    width = min(Wx.shape[1], Wy.shape[1])
    lcp = np.zeros((len(xs), len(ys)), dtype=np.int64)
    alive = np.ones_like(lcp, dtype=bool)
    for p in range(width):
        eq = (Wx[:, p, None] == Wy[None, :, p]) & (Wx[:, p, None] >= 0)
        alive &= eq
        lcp += alive
    return lx[:, None] + ly[None, :] - 2 * lcp


def enumerate_ball(model: GroupModel, radius: int) -> Ball:
    """BFS over generator edges; exactly the elements with ``|g| <= radius``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if isinstance(model, SmallCancellationBall):
        if radius > model.validated_radius:
            raise GuardError(f"radius {radius} exceeds validated radius "
                             f"{model.validated_radius}")
        n = int(np.searchsorted(model.ball_lengths, radius, side="right"))
        words = model.ball_words[:n]
        table = model.ball_table[:n].copy()
        table[table >= n] = -1
        elements = tuple(GroupElement(model, w) for w in words)
        return Ball(model, radius, elements, model.ball_lengths[:n].copy(), table,
                    {w: i for i, w in enumerate(words)})

    layers = [[()]]
    seen = {(): 0}
    for r in range(radius):
        nxt = []
        for w in layers[-1]:
            for l in model.edge_letters:
                v = model.multiply_words(w, (l,))
                if v not in seen:
                    seen[v] = r + 1
                    nxt.append(v)
        layers.append(sorted(nxt, key=shortlex_key))
    words = [w for layer in layers for w in layer]
    index = {w: i for i, w in enumerate(words)}
    lengths = np.array([seen[w] for w in words], dtype=np.int64)
    table = np.full((len(words), 2 * model.rank), -1, dtype=np.int64)
    for i, w in enumerate(words):
        for l in range(2 * model.rank):
            table[i, l] = index.get(model.multiply_words(w, (l,)), -1)
    elements = tuple(GroupElement(model, w) for w in words)
    return Ball(model, radius, elements, lengths, table, index)


def free_ball_size(rank: int, radius: int) -> int:
    """Closed form ``1 + sum_{i=1}^R 2k (2k-1)^{i-1}``."""
    return 1 + sum(2 * rank * (2 * rank - 1) ** (i - 1) for i in range(1, radius + 1))
