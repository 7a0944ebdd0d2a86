"""Proper powers, conjugacy classes and the conjugate/power decompositions.

Convention: the identity counts as a proper power (e = e²); every witness
and census records it through ``by_convention``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import BallEscapeError, BoundViolation, GuardError
from .geometry import HyperbolicityConstant, default_delta
from .kernels import cached_ball
from .groups import (
    Ball,
    FreeGroup,
    FreeProductCyclics,
    GroupElement,
    GroupModel,
    enumerate_ball,
    shortlex_key,
)


def _delta(model, delta) -> Fraction:
    if delta is None:
        delta = default_delta(model)
    if isinstance(delta, HyperbolicityConstant):
        delta = delta.delta
    return Fraction(delta).limit_denominator(1000)


def _rank_key(x: GroupElement):
    return (x.length, shortlex_key(x.word))


def smallest_period(seq) -> int:
    """Smallest p such that ``seq[i] == seq[i + p]`` for all valid i
    (prefix-function / failure-function computation)."""
    n = len(seq)
    if n == 0:
        return 0
    fail = [0] * n
    k = 0
    for i in range(1, n):
        while k and seq[i] != seq[k]:
            k = fail[k - 1]
        if seq[i] == seq[k]:
            k += 1
        fail[i] = k
    return n - fail[-1]


def primitive_root_length(seq) -> int:
    """Length of the shortest u with ``seq == u^d``."""
    n = len(seq)
    p = smallest_period(seq)
    return p if p and n % p == 0 else n


# ---------------------------------------------------------------------------
# cyclic reduction and conjugacy classes
# ---------------------------------------------------------------------------

def cyclic_reduce(x: GroupElement) -> tuple[GroupElement, GroupElement]:
    """``(core, conjugator)`` with ``x = conjugator · core · conjugator⁻¹``.

    Exact for free groups and free products of cyclics; on ball tables the
    core is a shortest conjugate found by search inside the validated ball.
    """
    model = x.model
    if model.is_free_type:
        core, conj = model.cyclic_reduce_word(x.word)
        return model.element(core), model.element(conj)
    best = (x, model.identity)
    for g in _conjugators(model, (model.validated_radius - x.length) // 2):
        try:
            y = g.inverse() * x * g
        except BallEscapeError:
            continue
        if _rank_key(y) < _rank_key(best[0]):
            best = (y, g)
    return best


def _conjugators(model, r):
    if r < 0:
        return []
    return list(enumerate_ball(model, r))


def _rotations(model, word) -> set:
    return {model.element(word[i:] + word[:i]) for i in range(max(len(word), 1))}


@dataclass(frozen=True)
class ConjugacyClass:
    """A conjugacy class seen through its minimal-length representatives."""

    model: GroupModel = field(repr=False)
    representative: GroupElement
    length: int
    cyclic_conjugates: frozenset  # the set P_C
    delta: Fraction
    short_case: bool              # |C| <= 9 delta: P_C is all of C of length <= 9 delta
    minimal: frozenset = field(default=frozenset(), repr=False)

    def __contains__(self, y: GroupElement) -> bool:
        return class_key(y) == self.representative

    def to_dict(self):
        return {"representative": str(self.representative), "length": self.length,
                "cyclic_conjugates": sorted(str(h) for h in self.cyclic_conjugates),
                "delta": float(self.delta), "short_case": self.short_case}


def _minimal_conjugates(x: GroupElement) -> frozenset:
    """All elements of the class of x having minimal length (free types),
    obtained by rotating geodesic spellings of the cyclically reduced core."""
    model = x.model
    core, _ = cyclic_reduce(x)
    if core.is_identity:
        return frozenset({core})
    geo = model.geodesic_word(core.word)
    found = _rotations(model, geo)
    if isinstance(model, FreeProductCyclics):
        # rotating a spelled-out torsion syllable can produce other minimal spellings
        frontier = set(found)
        while frontier:
            nxt = set()
            for y in frontier:
                for z in _rotations(model, model.geodesic_word(y.word)):
                    if z.length == core.length and z not in found:
                        found.add(z)
                        nxt.add(z)
            frontier = nxt
    return frozenset(found)


def class_key(x: GroupElement) -> GroupElement:
    """Shortlex-least minimal-length element of the conjugacy class."""
    model = x.model
    if model.is_free_type:
        return min(_minimal_conjugates(x), key=_rank_key)
    return _scb_class(x)[0]


def _scb_class(x: GroupElement):
    model = x.model
    R = model.validated_radius
    if 3 * x.length > R:
        raise GuardError(f"|x| = {x.length} exceeds R/3 = {R / 3:.2f} for the ball backend")
    members = conjugation_orbit(x, R)
    m = min(members, key=_rank_key)
    minimal = frozenset(y for y in members if y.length == m.length)
    return m, minimal, members


def conjugation_orbit(x: GroupElement, bound: int) -> frozenset:
    """Elements of length <= bound reachable from x by successive
    conjugations by generators, every intermediate staying below bound."""
    model = x.model
    gens = model.generators()
    seen = {x}
    frontier = [x]
    while frontier:
        nxt = []
        for y in frontier:
            for s in gens:
                try:
                    z = s.inverse() * y * s
                except BallEscapeError:
                    continue
                if z.length <= bound and z not in seen:
                    seen.add(z)
                    nxt.append(z)
        frontier = nxt
    return frozenset(seen)


def conjugacy_class_of(x: GroupElement, b: Ball | None = None, delta=None) -> ConjugacyClass:
    model = x.model
    delta = _delta(model, delta)
    if model.is_free_type:
        minimal = _minimal_conjugates(x)
        rep = min(minimal, key=_rank_key)
    else:
        rep, minimal, _ = _scb_class(x)
    L = rep.length
    limit = int(math.floor(9 * delta))
    if L > 9 * delta:
        pc = _rotations(model, model.geodesic_word(rep.word)) if model.is_free_type else minimal
        short = False
    else:
        bound = limit + 2 if model.is_free_type else min(limit, model.validated_radius)
        orbit = set()
        for y in minimal:
            orbit |= conjugation_orbit(y, bound)
        pc = {y for y in orbit if y.length <= limit}
        short = True
    if b is not None:
        b.index_of(rep)
    return ConjugacyClass(model, rep, L, frozenset(pc), delta, short, frozenset(minimal))


# ---------------------------------------------------------------------------
# proper powers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerWitness:
    """``element = conjugator · base^exponent · conjugator⁻¹``."""

    element: GroupElement
    base: GroupElement
    exponent: int
    conjugator: GroupElement
    by_convention: bool = False

    def reassemble(self) -> GroupElement:
        g = self.conjugator
        return g * self.base ** self.exponent * g.inverse()

    def check(self) -> bool:
        return self.exponent >= 2 and self.reassemble() == self.element


def _torsion_witness(x: GroupElement, order: int) -> PowerWitness:
    # x = (x^j)^d with j·d = 1 mod order, smallest d >= 2 prime to the order
    d = 2
    while math.gcd(d, order) != 1:
        d += 1
    j = pow(d, -1, order)
    return PowerWitness(x, x ** j, d, x.model.identity)


def is_proper_power(x: GroupElement, b: Ball | None = None) -> PowerWitness | None:
    """A witness ``x = g h^d g⁻¹`` (d >= 2) or None.

    Free groups: the cyclic core is tested for a nontrivial period.  Free
    products of cyclics: torsion elements are always powers, otherwise the
    syllable sequence of the core is tested for a period.  Ball tables: the
    element is looked up in the census of ``b``.
    """
    model = x.model
    e = model.identity
    if x.is_identity:
        return PowerWitness(x, e, 2, e, by_convention=True)
    if isinstance(model, FreeGroup):
        core, conj = model.cyclic_reduce_word(x.word)
        p = primitive_root_length(core)
        if p == len(core):
            return None
        base = model.element(conj + core[:p] + model.invert_canonical(conj))
        return PowerWitness(x, base, len(core) // p, e)
    if isinstance(model, FreeProductCyclics):
        order = model.element_order(x.word)
        if order:
            return _torsion_witness(x, order)
        core, conj = model.cyclic_reduce_word(x.word)
        syl = model.syllables(core)
        if len(syl) == 1:
            i, k = syl[0]
            if abs(k) < 2:
                return None
            d = abs(k)
            u = ((i, 1 if k > 0 else -1),)
        else:
            p = primitive_root_length(syl)
            if p == len(syl):
                return None
            d, u = len(syl) // p, syl[:p]
        root = model.word_from_syllables(u)
        base = model.element(conj + root + model.invert_canonical(conj))
        return PowerWitness(x, base, d, e)
    if b is None:
        b = enumerate_ball(model, model.validated_radius)
    return proper_power_census(b).witnesses.get(x)


@dataclass(frozen=True)
class PowerCensus:
    ball: Ball = field(repr=False)
    witnesses: dict = field(repr=False)  # element -> PowerWitness
    complete_radius: int                 # census exact for |x| <= complete_radius
    by_convention: bool = True

    @property
    def elements(self) -> frozenset:
        return frozenset(self.witnesses)

    @property
    def complete(self) -> bool:
        return self.complete_radius >= self.ball.radius

    def __contains__(self, x):
        return x in self.witnesses

    def __len__(self):
        return len(self.witnesses)

    def rows(self) -> list:
        """``(word, is_proper_power, base, exponent, conjugator, complete)``."""
        out = []
        for x in self.ball.elements:
            w = self.witnesses.get(x)
            complete = x.length <= self.complete_radius
            if w is None:
                out.append((str(x), 0, "", "", "", int(complete)))
            else:
                out.append((str(x), 1, str(w.base), w.exponent, str(w.conjugator),
                            int(complete)))
        return out


def proper_power_census(b: Ball, delta=None) -> PowerCensus:
    """All proper powers in the ball with witnesses.

    Exact for free-type backends.  On ball tables the census is every
    ``g h^d g⁻¹`` reachable inside the ball (powers of ball elements, closed
    under conjugation by generators); it is only flagged complete for
    ``|x| + 34 delta <= R``.
    """
    model = b.model
    if model.is_free_type:
        wit = {}
        for x in b.elements:
            w = is_proper_power(x)
            if w is not None:
                wit[x] = w
        return PowerCensus(b, wit, b.radius)
    return _table_census(b, _delta(model, delta))


def _table_census(b: Ball, delta: Fraction) -> PowerCensus:
    model = b.model
    e = model.identity
    wit = {e: PowerWitness(e, e, 2, e, by_convention=True)}
    for h in b.elements[1:]:
        p, d = h, 1
        while True:
            try:
                p, d = p * h, d + 1
            except BallEscapeError:
                break
            if p.length > b.radius:
                break
            if p not in wit:
                wit[p] = PowerWitness(p, h, d, e, by_convention=p.is_identity)
    frontier = list(wit)
    gens = model.generators()
    while frontier:
        nxt = []
        for y in frontier:
            w = wit[y]
            for s in gens:
                try:
                    z = s.inverse() * y * s
                    g = s.inverse() * w.conjugator
                except BallEscapeError:
                    continue
                if z.length <= b.radius and z not in wit:
                    wit[z] = PowerWitness(z, w.base, w.exponent, g)
                    nxt.append(z)
        frontier = nxt
    complete = int(math.floor(b.radius - 34 * delta))
    return PowerCensus(b, wit, complete)


# ---------------------------------------------------------------------------
# decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    element: GroupElement
    g: GroupElement
    h: GroupElement
    exponent: int
    ledger: tuple          # the summed lengths, in order
    bound: Fraction        # right-hand side
    hypotheses_met: bool = True
    power_ledger: tuple = ()
    power_bound: Fraction | None = None

    @property
    def total(self) -> int:
        return sum(self.ledger)

    @property
    def slack(self) -> Fraction:
        return self.bound - self.total

    @property
    def defect(self) -> int:
        """Ledger minus |x|."""
        return self.total - self.element.length

    @property
    def power_slack(self) -> Fraction | None:
        return None if self.power_bound is None else self.power_bound - sum(self.power_ledger)

    @property
    def status(self) -> str:
        if not self.hypotheses_met:
            return "hypothesis-not-met"
        ok = self.slack >= 0 and (self.power_slack is None or self.power_slack >= 0)
        return "holds" if ok else "violated"

    def to_dict(self):
        d = {"x": str(self.element), "g": str(self.g), "h": str(self.h), "d": self.exponent,
             "ledger": list(self.ledger), "bound": str(self.bound), "slack": str(self.slack),
             "status": self.status}
        if self.power_bound is not None:
            d["power_ledger"] = list(self.power_ledger)
            d["power_bound"] = str(self.power_bound)
        return d


def decompose_conjugate(x: GroupElement, b: Ball | None = None, delta=None) -> Decomposition:
    """``x = g h g⁻¹`` with h a shortest element of P_C and |g| minimal;
    asserts ``|g| + |h| + |g⁻¹| <= |x| + 14 delta``."""
    model = x.model
    delta = _delta(model, delta)
    # the minimal-length conjugates lie in P_C in both cases of its definition
    targets = _minimal_conjugates(x) if model.is_free_type else _scb_class(x)[1]
    radius = x.length if model.is_free_type else model.validated_radius
    found = None
    for g in cached_ball(model, radius):
        try:
            y = g.inverse() * x * g
        except BallEscapeError:
            continue
        if y in targets:
            found = (g, y)
            break
    if found is None:
        raise GuardError(f"no conjugator of length <= {radius} found for {x}")
    g, h = found
    dec = Decomposition(x, g, h, 1, (g.length, h.length, g.length), x.length + 14 * delta)
    if dec.slack < 0:
        raise BoundViolation("conjugate-14delta", f"ledger {dec.total} > {dec.bound} at {x}",
                             dec.to_dict())
    return dec


def decompose_power(h: GroupElement, d: int, g: GroupElement, delta=None,
                    b: Ball | None = None, strict: bool = True) -> Decomposition:
    """Ledger ``|g| + |h| + |h^{d-2}| + |h| + |g⁻¹|`` against ``|x| + 34 delta``
    for ``x = g h^d g⁻¹``, and ``|h| + |h^{d-2}| + |h| <= |h^d| + 8 delta``.

    Needs the class of h to have length >= 16 delta; otherwise the result is
    returned with ``hypotheses_met=False``.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    model = h.model
    delta = _delta(model, delta)
    x = g * h ** d * g.inverse()
    if b is not None:
        for y in (x, g, h):
            b.index_of(y)
    cl = cyclic_reduce(h)[0].length if model.is_free_type else class_key(h).length
    hd2 = h ** (d - 2)
    ledger = (g.length, h.length, hd2.length, h.length, g.length)
    dec = Decomposition(x, g, h, d, ledger, x.length + 34 * delta, cl >= 16 * delta,
                        (h.length, hd2.length, h.length), (h ** d).length + 8 * delta)
    if strict and dec.status == "violated":
        raise BoundViolation("power-34delta" if dec.slack < 0 else "power-8delta",
                             f"decomposition bound fails for {x}", dec.to_dict())
    return dec


@dataclass(frozen=True)
class PowerGrowth:
    lengths: tuple           # |C^d| for d = 1..d_max
    checked: bool            # whether |C^d| >= d was asserted
    note: str = ""


def conjugacy_power_growth(C: ConjugacyClass, d_max: int) -> PowerGrowth:
    """``|C^d|`` for d = 1..d_max; ``|C^d| >= d`` is asserted for infinite
    order classes with ``|C| >= 16 delta``."""
    h = C.representative
    lengths = tuple(class_key(h ** d).length for d in range(1, d_max + 1))
    infinite = all(not (h ** d).is_identity for d in range(1, d_max + 1))
    checked = infinite and C.length >= 16 * C.delta
    note = ""
    if checked:
        bad = [d for d, L in enumerate(lengths, 1) if L < d]
        if bad:
            raise BoundViolation("power-growth", f"|C^d| < d for d = {bad}", {"class": str(h)})
    elif any(L < d for d, L in enumerate(lengths, 1)):
        note = "hypothesis |C| >= 16 delta not met; |C^d| < d observed"
    return PowerGrowth(lengths, checked, note)


def random_cyclically_reduced(model: FreeGroup, length: int, rng) -> GroupElement:
    """Uniform among cyclically reduced words of the given length (rejection)."""
    k2 = 2 * model.rank
    while True:
        word = [int(rng.integers(k2))]
        while len(word) < length:
            l = int(rng.integers(k2))
            if l != word[-1] ^ 1:
                word.append(l)
        if length < 2 or word[0] != word[-1] ^ 1:
            return model.element(tuple(word))


def power_decomposition_sweep(model: FreeGroup, samples: int = 1000, seed: int = 0,
                              radius: int = 3, lengths=(16, 20), exponents=(2, 3),
                              delta=None) -> dict:
    """Seeded sample of cyclically reduced h with lengths in the closed range,
    every d in ``exponents`` and every g in the ball: both power bounds."""
    if not isinstance(model, FreeGroup):
        raise GuardError("the power sweep samples reduced words and needs a free group")
    delta = _delta(model, delta)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
    gs = list(cached_ball(model, radius))
    rep = {"samples": samples, "seed": seed, "radius": radius, "lengths": list(lengths),
           "exponents": list(exponents), "delta": float(delta), "tuples_checked": 0,
           "hypotheses_met": 0, "violations": [], "min_slack_34": None, "min_slack_8": None}
    for _ in range(samples):
        h = random_cyclically_reduced(model, int(rng.integers(lengths[0], lengths[1] + 1)), rng)
        for d in exponents:
            for g in gs:
                dec = decompose_power(h, d, g, delta, strict=False)
                rep["tuples_checked"] += 1
                rep["hypotheses_met"] += dec.hypotheses_met
                s34, s8 = float(dec.slack), float(dec.power_slack)
                if rep["min_slack_34"] is None or s34 < rep["min_slack_34"]:
                    rep["min_slack_34"] = s34
                if rep["min_slack_8"] is None or s8 < rep["min_slack_8"]:
                    rep["min_slack_8"] = s8
                if dec.status == "violated":
                    rep["violations"].append(dec.to_dict())
    rep["status"] = "holds" if not rep["violations"] else "violated"
    return rep
