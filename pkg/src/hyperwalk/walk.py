"""Step measures, n-step laws, sampling and spectral-radius estimates.

The walk is ``g_n = s_1 s_2 ... s_n`` with i.i.d. steps ``s_i ~ mu``, so
``P(g_n = g)`` is the n-fold convolution power of ``mu`` at ``g``.

Exact laws are kept as integer numerators over the common denominator
``D**n`` where ``D`` is the least common denominator of the weights; the
convolution then never leaves integer arithmetic.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import mpmath
import numpy as np
from scipy import sparse

from .exceptions import BallEscapeError, GuardError, MeasureError
from .groups import (
    FreeGroup,
    GroupElement,
    GroupModel,
    enumerate_ball,
    pairwise_distances,
    shortlex_key,
)
from .kernels import (
    FreeCoder,
    FreeWordStack,
    TableCoder,
    apply_word,
    cached_ball,
    coder_for,
    convolve_step,
    free_power_mask,
)
from .stats import wilson_interval

logger = logging.getLogger(__name__)

DEFAULT_SUPPORT_GUARD = 50_000_000
SHARD_SIZE = 1 << 18


# ---------------------------------------------------------------------------
# step measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepMeasure:
    """Finitely supported probability measure with exact rational weights."""

    model: GroupModel
    atoms: tuple  # ((GroupElement, Fraction), ...) in shortlex order

    @classmethod
    def unchecked(cls, model: GroupModel, atoms: Mapping) -> "StepMeasure":
        """Build without validating the walk hypotheses (negative controls)."""
        items = []
        for g, w in atoms.items():
            if isinstance(g, str):
                g = model.element(g)
            items.append((g, Fraction(w)))
        items.sort(key=lambda t: shortlex_key(t[0].word))
        return cls(model, tuple(items))

    @property
    def support(self) -> list:
        return [g for g, _ in self.atoms]

    @property
    def weights(self) -> list:
        return [w for _, w in self.atoms]

    def __getitem__(self, g: GroupElement) -> Fraction:
        for h, w in self.atoms:
            if h == g:
                return w
        return Fraction(0)

    @property
    def c(self) -> Fraction:
        """Smallest atom, the constant of the splicing bound."""
        return min(self.weights)

    @property
    def denominator(self) -> int:
        return math.lcm(*(w.denominator for w in self.weights))

    @property
    def numerators(self) -> list[int]:
        D = self.denominator
        return [int(w * D) for w in self.weights]

    @property
    def identity_mass(self) -> Fraction:
        return self[self.model.identity]

    @property
    def max_step_length(self) -> int:
        return max(g.length for g in self.support)

    def step_words(self) -> list[tuple]:
        """Letter words applied by the convolution kernels (geodesic spelling)."""
        return [self.model.geodesic_word(g.word) for g in self.support]

    def isotropic_profile(self) -> dict | None:
        """``{length: weight}`` when mu lives on a free group and its weight
        depends only on word length (every sphere fully charged), else None."""
        if not isinstance(self.model, FreeGroup):
            return None
        k = self.model.rank
        by_len: dict[int, set] = {}
        for g, w in self.atoms:
            by_len.setdefault(g.length, set()).add(w)
        prof = {}
        for r, ws in by_len.items():
            size = 1 if r == 0 else 2 * k * (2 * k - 1) ** (r - 1)
            count = sum(1 for g in self.support if g.length == r)
            if len(ws) != 1 or count != size:
                return None
            prof[r] = next(iter(ws))
        return prof

    def lazy_uniform_shape(self):
        """``(k, alpha)`` if mu = alpha·δ_e + uniform on free generators."""
        prof = self.isotropic_profile()
        if prof is None or set(prof) - {0, 1} or 0 not in prof:
            return None
        return self.model.rank, prof[0]

    def describe(self) -> str:
        return ",".join(f"{g}={w}" for g, w in self.atoms)


def validate_measure(atoms: Mapping, model: GroupModel | None = None,
                     generation_radius: int = 3) -> StepMeasure:
    """Check positivity, total mass, symmetry, laziness and generation."""
    if model is None:
        model = next(iter(atoms)).model
    mu = StepMeasure.unchecked(model, atoms)
    for g, w in mu.atoms:
        if w <= 0:
            raise MeasureError("nonpositive", f"weight of {g} is {w}, must be > 0")
    total = sum(mu.weights, Fraction(0))
    if total != 1:
        raise MeasureError("total", f"weights sum to {total}, not 1")
    table = dict(mu.atoms)
    for g, w in mu.atoms:
        wi = table.get(g.inverse(), Fraction(0))
        if wi != w:
            raise MeasureError("non-symmetric",
                               f"mu({g}) = {w} but mu({g.inverse()}) = {wi}")
    if model.identity not in table:
        raise MeasureError("zero-identity", "mu(e) must be > 0")
    missing = _generation_gap(mu, generation_radius)
    if missing is not None:
        raise MeasureError("non-generating",
                           f"support does not reach {missing} within the search region")
    return mu


def _generation_gap(mu: StepMeasure, radius: int):
    """First element of the ball of ``radius`` not reached by products of the
    support inside the ball of ``radius + 2*max|s|``; None if all reached."""
    model = mu.model
    bound = radius + 2 * mu.max_step_length
    if model.validated_radius is not None:
        bound = min(bound, model.validated_radius)
        radius = min(radius, bound)
    target = enumerate_ball(model, radius)
    seen = {model.identity}
    frontier = [model.identity]
    while frontier:
        nxt = []
        for x in frontier:
            for s in mu.support:
                try:
                    y = x * s
                except BallEscapeError:
                    continue
                if y not in seen and y.length <= bound:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    for g in target:
        if g not in seen:
            return g
    return None


def lazy_uniform(model: GroupModel, laziness=None) -> StepMeasure:
    """``laziness`` at e, the rest uniform on the distinct generators^±1.

    Default laziness makes mu uniform on ``{e} ∪ S``.
    """
    gens = model.generators()
    a = Fraction(1, len(gens) + 1) if laziness is None else Fraction(str(laziness))
    if not 0 < a < 1:
        raise MeasureError("zero-identity" if a <= 0 else "total",
                           f"laziness must lie in (0, 1), got {a}")
    atoms = {model.identity: a}
    for g in gens:
        atoms[g] = (1 - a) / len(gens)
    return validate_measure(atoms, model)


def parse_measure(spec: str, model: GroupModel, validate: bool = True) -> StepMeasure:
    """``lazy-uniform[:alpha]`` or explicit ``word=p/q,word=p/q,...``."""
    spec = spec.strip()
    if spec.startswith("lazy-uniform"):
        _, _, arg = spec.partition(":")
        return lazy_uniform(model, arg or None)
    atoms = {}
    for part in spec.split(","):
        word, _, w = part.partition("=")
        if not w:
            raise ValueError(f"bad measure atom {part!r}")
        atoms[model.element(word.strip())] = Fraction(w.strip())
    if not validate:
        return StepMeasure.unchecked(model, atoms)
    return validate_measure(atoms, model)


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Distribution:
    """Sparse law of ``g_n``.

    ``values`` are integer numerators over ``denominator`` in exact mode and
    probabilities in float mode.  When ``within`` is set the law was pruned
    and is exact only on elements of length <= within.
    """

    model: GroupModel
    n: int
    mode: str
    codes: np.ndarray
    values: np.ndarray
    denominator: int
    coder: object = field(repr=False)
    within: int | None = None

    def __len__(self):
        return len(self.codes)

    @property
    def support_size(self) -> int:
        return len(self.codes)

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def _scalar(self, v):
        return Fraction(int(v), self.denominator) if self.exact else float(v)

    def _guard(self, g: GroupElement):
        if self.within is not None and g.length > self.within:
            raise GuardError(f"{g} lies outside the exact region |g| <= {self.within}")

    def code_of(self, g: GroupElement) -> int | None:
        try:
            return self.coder.encode(g.word)
        except Exception:
            return None

    def lookup_codes(self, codes: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, max(len(self.codes) - 1, 0))
        hit = (len(self.codes) > 0) & (self.codes[pos] == codes) if len(self.codes) else \
            np.zeros(len(codes), dtype=bool)
        out = np.zeros(len(codes), dtype=self.values.dtype)
        if len(self.codes):
            out[hit] = self.values[pos[hit]]
        return out

    def numerator(self, g: GroupElement):
        """Raw stored value at g (numerator in exact mode)."""
        self._guard(g)
        code = self.code_of(g)
        if code is None:
            return 0
        i = int(np.searchsorted(self.codes, code))
        if i < len(self.codes) and self.codes[i] == code:
            v = self.values[i]
            return int(v) if self.exact else float(v)
        return 0

    def probability(self, g: GroupElement):
        return self._scalar(self.numerator(g)) if self.exact else self.numerator(g)

    __getitem__ = probability

    def elements(self) -> list:
        return [self.coder.element(c) for c in self.codes]

    def items(self) -> Iterator:
        for c, v in zip(self.codes, self.values):
            yield self.coder.element(c), self._scalar(v)

    def total_mass(self):
        if self.exact:
            return Fraction(int(sum(int(v) for v in self.values)), self.denominator)
        return float(np.sum(self.values))

    def max_probability(self):
        i = int(np.argmax(self.values))
        return self._scalar(self.values[i]), self.coder.element(self.codes[i])

    def rows(self) -> list:
        """``(word, numerator, denominator)`` or ``(word, probability)``
        rows sorted shortlex, as written to CSV dumps."""
        rows = []
        for g, p in self.items():
            if self.exact:
                rows.append((g, p.numerator, p.denominator))
            else:
                rows.append((g, repr(float(p))))
        rows.sort(key=lambda r: shortlex_key(r[0].word))
        return [(str(r[0]),) + r[1:] for r in rows]


def _kernel_setup(mu: StepMeasure, mode: str, radius: int):
    coder = coder_for(mu.model, radius)
    steps = mu.step_words()
    if mode == "exact":
        weights = mu.numerators
        denom = mu.denominator
    elif mode == "float":
        weights = [float(w) for w in mu.weights]
        denom = 1
    else:
        raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
    return coder, steps, weights, denom


def iter_distributions(mu: StepMeasure, n_max: int, mode: str = "exact",
                       within: int | None = None,
                       max_support: int = DEFAULT_SUPPORT_GUARD) -> Iterator[Distribution]:
    """Yield the laws of ``g_0, ..., g_{n_max}``.

    With ``within`` set, elements that cannot come back to the ball of that
    radius by time ``n_max`` are pruned; the yielded laws are then exact on
    ``|g| <= within`` (and on everything kept) at every step.
    """
    if n_max < 0:
        raise ValueError("n must be >= 0")
    L = mu.max_step_length
    reach = n_max * L if within is None else min(n_max * L, within + (n_max * L) // 2 + L)
    coder, steps, weights, D = _kernel_setup(mu, mode, max(reach, 1))
    codes = np.array([coder.encode(())], dtype=np.int64)
    if mode == "exact":
        dtype = np.int64 if D ** n_max < 2 ** 62 else object
        values = np.array([1], dtype=dtype)
    else:
        values = np.array([1.0])
    for n in range(n_max + 1):
        yield Distribution(mu.model, n, mode, codes, values, D ** n if mode == "exact" else 1,
                           coder, within)
        if n == n_max:
            break
        codes, values = convolve_step(coder, codes, values, steps, weights, max_support)
        if within is not None:
            keep = coder.lengths(codes) <= within + (n_max - n - 1) * L
            codes, values = codes[keep], values[keep]


def n_step_distribution(mu: StepMeasure, n: int, mode: str = "exact",
                        within: int | None = None,
                        max_support: int = DEFAULT_SUPPORT_GUARD) -> Distribution:
    dist = None
    for dist in iter_distributions(mu, n, mode, within, max_support):
        pass
    return dist


# -- radial reduction for isotropic measures on free groups -----------------

def _tree_transition_counts(k: int, l: int, r: int) -> dict[int, int]:
    """``{m: #y}`` over y with d(x, y) = r and |y| = m, for any |x| = l,
    in the 2k-regular tree."""
    q = 2 * k - 1
    out: dict[int, int] = {}
    if r == 0:
        return {l: 1}
    for j in range(0, min(l, r) + 1):
        t = r - j
        if t == 0:
            out[l - r] = out.get(l - r, 0) + 1
            continue
        level = l - j
        if level == 0:
            first = 2 * k - (1 if j > 0 else 0)
        else:
            first = 2 * k - 1 - (1 if j > 0 else 0)
        if first <= 0:
            continue
        m = level + t
        out[m] = out.get(m, 0) + first * q ** (t - 1)
    return out


def sphere_size(k: int, l: int) -> int:
    return 1 if l == 0 else 2 * k * (2 * k - 1) ** (l - 1)


def radial_laws(mu: StepMeasure, n_max: int, mode: str = "exact") -> list:
    """Law of ``|g_n|`` for n <= n_max, for isotropic mu on a free group.

    Returns a list of arrays ``mass[n][l]`` (numerators over ``D**n`` in
    exact mode).  By isotropy ``P(g_n = g) = mass[n][|g|] / #sphere(|g|)``.
    """
    prof = mu.isotropic_profile()
    if prof is None:
        raise GuardError("radial reduction needs an isotropic measure on a free group")
    k = mu.model.rank
    D = mu.denominator
    if mode == "exact":
        w = {r: int(p * D) for r, p in prof.items()}
        cur = np.zeros(1, dtype=object)
        cur[0] = 1
    else:
        w = {r: float(p) for r, p in prof.items()}
        cur = np.array([1.0])
    rmax = max(prof)
    out = [cur]
    for _ in range(n_max):
        nxt = np.zeros(len(cur) + rmax, dtype=cur.dtype)
        for l, m_l in enumerate(cur):
            if not m_l:
                continue
            for r, wr in w.items():
                for m, cnt in _tree_transition_counts(k, l, r).items():
                    nxt[m] += m_l * wr * cnt
        cur = nxt
        out.append(cur)
    return out


def return_probabilities(mu: StepMeasure, n_max: int, mode: str = "exact",
                         method: str = "auto") -> list:
    """``[P(g_j = e) for j in 0..n_max]`` as Fractions (exact) or floats.

    ``method`` is ``radial`` (isotropic free measures), ``convolution`` or
    ``auto``.
    """
    if method == "auto":
        method = "radial" if mu.isotropic_profile() is not None else "convolution"
    if method == "radial":
        laws = radial_laws(mu, n_max, mode)
        D = mu.denominator
        if mode == "exact":
            return [Fraction(int(m[0]), D ** j) for j, m in enumerate(laws)]
        return [float(m[0]) for m in laws]
    e = mu.model.identity
    return [d.probability(e) for d in iter_distributions(mu, n_max, mode, within=0)]


# ---------------------------------------------------------------------------
# spectral radius
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralRadiusEstimate:
    value: float
    method: str  # return-probability | rayleigh-ball(R) | closed-form
    is_lower_bound: bool
    details: dict = field(default_factory=dict, compare=False)

    def mp_value(self, dps: int = 50):
        """High-precision value (exact formula for the closed form)."""
        with mpmath.workdps(dps):
            if self.method == "closed-form":
                k, a = self.details["k"], self.details["alpha"]
                if k == 1:
                    return mpmath.mpf(1)
                a = mpmath.mpf(a.numerator) / a.denominator
                return a + (1 - a) * mpmath.sqrt(2 * k - 1) / k
            return mpmath.mpf(self.value)


def rho_closed_form_free(k: int, laziness=0) -> SpectralRadiusEstimate:
    """``alpha + (1 - alpha) sqrt(2k - 1) / k``; 1 for k = 1."""
    a = Fraction(str(laziness)) if not isinstance(laziness, Fraction) else laziness
    if k < 1 or not 0 <= a <= 1:
        raise ValueError("need k >= 1 and laziness in [0, 1]")
    value = 1.0 if k == 1 else float(a) + (1 - float(a)) * math.sqrt(2 * k - 1) / k
    return SpectralRadiusEstimate(value, "closed-form", False, {"k": k, "alpha": a})


def rho_closed_form(mu: StepMeasure) -> SpectralRadiusEstimate:
    shape = mu.lazy_uniform_shape()
    if shape is None:
        raise GuardError("closed form needs alpha·δ_e + uniform on free generators")
    return rho_closed_form_free(*shape)


def rho_from_returns(mu: StepMeasure, n_max: int, returns: Sequence | None = None,
                     mode: str = "exact") -> SpectralRadiusEstimate:
    """``max_{2j <= n_max} P(g_{2j} = e)^{1/(2j)}``, a lower bound for rho."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if returns is None:
        returns = return_probabilities(mu, n_max, mode)
    series = {}
    for j in range(2, n_max + 1, 2):
        p = returns[j]
        series[j] = float(mpmath.power(mpmath.mpf(p.numerator) / p.denominator, 1.0 / j)) \
            if isinstance(p, Fraction) else float(p) ** (1.0 / j)
    best = max(series.values())
    return SpectralRadiusEstimate(best, "return-probability", True, {"series": series})


def ball_operator(mu: StepMeasure, R: int):
    """Compression of right convolution by mu to the ball of radius R, as a
    sparse symmetric matrix, together with the ball."""
    ball = cached_ball(mu.model, R)
    N = len(ball)
    rows, cols, vals = [], [], []
    idx = np.arange(N)
    for word, w in zip(mu.step_words(), mu.weights):
        tgt = idx.copy()
        ok = np.ones(N, dtype=bool)
        for l in word:
            tgt = np.where(ok, ball.table[tgt, l], -1)
            ok &= tgt >= 0
            tgt = np.where(ok, tgt, 0)
        rows.append(idx[ok])
        cols.append(tgt[ok])
        vals.append(np.full(int(ok.sum()), float(w)))
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
    return A, ball


def rho_rayleigh_ball(mu: StepMeasure, R: int, tol: float = 1e-12,
                      max_iter: int = 10_000) -> SpectralRadiusEstimate:
    """Power iteration on the ball compression; Rayleigh quotients of any
    vector are lower bounds for the operator norm, hence for rho."""
    A, ball = ball_operator(mu, R)
    v = np.ones(A.shape[0])
    v /= np.linalg.norm(v)
    prev = -np.inf
    q = float(v @ (A @ v))
    it = 0
    for it in range(1, max_iter + 1):
        w = A @ v
        q = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        if abs(q - prev) < tol:
            break
        prev = q
    return SpectralRadiusEstimate(q, f"rayleigh-ball({R})", True,
                                  {"iterations": it, "ball_size": len(ball)})


# ---------------------------------------------------------------------------
# pointwise bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointwiseReport:
    n: int
    max_probability: Fraction | float
    argmax: str
    bound: float
    slack: float
    holds: bool
    warning: str | None = None


def check_pointwise_bound(mu: StepMeasure, n: int, rho: SpectralRadiusEstimate,
                          dist: Distribution | None = None) -> PointwiseReport:
    """Verify ``max_g P(g_n = g) <= rho**n`` on the exact law (50-digit
    comparison against the possibly irrational rho)."""
    warning = None
    if rho.is_lower_bound:
        warning = "rho is only a lower bound; a violation would not be conclusive"
        logger.warning(warning)
    if dist is None:
        dist = n_step_distribution(mu, n)
    pmax, g = dist.max_probability()
    with mpmath.workdps(50):
        bound = rho.mp_value(50) ** n
        p = mpmath.mpf(pmax.numerator) / pmax.denominator if isinstance(pmax, Fraction) \
            else mpmath.mpf(pmax)
        slack = bound - p
        holds = bool(slack >= 0)
    return PointwiseReport(n, pmax, str(g), float(bound), float(slack), holds, warning)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def shard_rng(seed: int, shard: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, shard)."""
    ss = np.random.SeedSequence([int(seed), int(shard)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SampleResult:
    n: int
    count: int
    seed: int
    events: tuple
    hits: dict  # event -> int array of hit counts at times 0..n
    endpoints: Counter | None = None
    confidence: float = 0.99

    def frequency(self, event, t: int | None = None) -> float:
        t = self.n if t is None else t
        return self.hits[event][t] / self.count

    def interval(self, event, t: int | None = None, confidence: float | None = None):
        t = self.n if t is None else t
        lo, hi = wilson_interval(self.hits[event][t], self.count,
                                 confidence or self.confidence)
        return float(lo), float(hi)


def _event_name(ev) -> str:
    return ev if isinstance(ev, str) else getattr(ev, "__name__", repr(ev))


def _sample_shard_free(mu, n, size, rng, events, keep_endpoints, coder):
    steps = mu.step_words()
    maxw = max((len(w) for w in steps), default=0)
    letters = np.full((len(steps), max(maxw, 1)), -1, dtype=np.int8)
    for i, w in enumerate(steps):
        letters[i, :len(w)] = w
    cdf = np.cumsum([float(w) for w in mu.weights])
    cdf[-1] = 1.0
    stack = FreeWordStack(size, n * max(maxw, 1))
    hits = {_event_name(ev): np.zeros(n + 1, dtype=np.int64) for ev in events}
    sets = {}
    for ev in events:
        if not isinstance(ev, str):
            sets[_event_name(ev)] = np.array(sorted(coder.encode(g.word) for g in ev),
                                             dtype=np.int64)
    for t in range(n + 1):
        if t:
            idx = np.searchsorted(cdf, rng.random(size), side="right")
            for p in range(letters.shape[1]):
                stack.push(letters[idx, p].astype(np.int64))
        W, L = stack.W, stack.L
        for ev in events:
            name = _event_name(ev)
            if ev == "identity":
                hits[name][t] += int(np.count_nonzero(L == 0))
            elif ev == "proper-power":
                hits[name][t] += int(np.count_nonzero(free_power_mask(W, L)))
            else:
                codes = coder.encode_matrix(W, L)
                hits[name][t] += int(np.count_nonzero(np.isin(codes, sets[name])))
    ends = None
    if keep_endpoints:
        ends = Counter()
        for row, l in zip(stack.W, stack.L):
            ends[tuple(int(x) for x in row[:l])] += 1
    return hits, ends


def _sample_shard_table(mu, n, size, rng, events, keep_endpoints, coder, census_codes):
    steps = mu.step_words()
    cdf = np.cumsum([float(w) for w in mu.weights])
    cdf[-1] = 1.0
    codes = np.zeros(size, dtype=np.int64) + coder.encode(())
    hits = {_event_name(ev): np.zeros(n + 1, dtype=np.int64) for ev in events}
    sets = {_event_name(ev): np.array(sorted(coder.encode(g.word) for g in ev), dtype=np.int64)
            for ev in events if not isinstance(ev, str)}
    for t in range(n + 1):
        if t:
            idx = np.searchsorted(cdf, rng.random(size), side="right")
            new = codes.copy()
            for i, w in enumerate(steps):
                sel = idx == i
                if sel.any():
                    new[sel] = apply_word(coder, codes[sel], w)
            codes = new
        for ev in events:
            name = _event_name(ev)
            if ev == "identity":
                hits[name][t] += int(np.count_nonzero(codes == coder.encode(())))
            elif ev == "proper-power":
                hits[name][t] += int(np.count_nonzero(np.isin(codes, census_codes)))
            else:
                hits[name][t] += int(np.count_nonzero(np.isin(codes, sets[name])))
    ends = None
    if keep_endpoints:
        ends = Counter()
        u, c = np.unique(codes, return_counts=True)
        for code, k in zip(u, c):
            ends[coder.decode(code)] += int(k)
    return hits, ends


def sample_paths(mu: StepMeasure, n: int, count: int, seed: int,
                 events: Iterable = ("identity",), keep_endpoints: bool = False,
                 threads: int = 1, confidence: float = 0.99) -> SampleResult:
    """Seeded Monte Carlo over ``count`` independent paths of length n.

    Hit counts are recorded at every time 0..n.  Paths are split in fixed
    shards of ``SHARD_SIZE`` with one counter-based stream per shard, so the
    result does not depend on ``threads``.  ``events`` entries are
    ``"identity"``, ``"proper-power"`` or a (frozen)set of elements.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    events = tuple(events)
    model = mu.model
    free = isinstance(model, FreeGroup)
    radius = max(n * mu.max_step_length, 1)
    coder = FreeCoder(model) if free else coder_for(model, radius)
    census_codes = None
    if not free and "proper-power" in events:
        from .powers import proper_power_census
        census = proper_power_census(coder.ball)
        census_codes = np.array(sorted(coder.encode(g.word) for g in census.elements),
                                dtype=np.int64)
    sizes = [SHARD_SIZE] * (count // SHARD_SIZE)
    if count % SHARD_SIZE:
        sizes.append(count % SHARD_SIZE)

    def run(i):
        rng = shard_rng(seed, i)
        if free:
            return _sample_shard_free(mu, n, sizes[i], rng, events, keep_endpoints, coder)
        return _sample_shard_table(mu, n, sizes[i], rng, events, keep_endpoints, coder,
                                   census_codes)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    hits = {_event_name(ev): np.zeros(n + 1, dtype=np.int64) for ev in events}
    ends = Counter() if keep_endpoints else None
    for h, e in parts:
        for k in hits:
            hits[k] += h[k]
        if keep_endpoints:
            ends.update(e)
    return SampleResult(n, count, seed, tuple(_event_name(e) for e in events), hits, ends,
                        confidence)


# ---------------------------------------------------------------------------
# coupling and splitting
# ---------------------------------------------------------------------------

def splice_radius(K: float, n: int, delta: float) -> int:
    """Integer part of ``K/2 + delta (ln n + 1)`` (natural log, n >= 1)."""
    if n < 1:
        raise ValueError("splice radius is defined for n >= 1")
    return int(math.floor(K / 2 + delta * (math.log(n) + 1)))


@dataclass(frozen=True)
class CoupledWalkTrace:
    primary: tuple      # g_0 .. g_n
    copy: tuple         # g'_0 .. g'_{2 a0}
    hitting_time: int | None  # None means T = infinity
    a0: int
    spliced: tuple      # g~_0 .. g~_n
    target: GroupElement

    @property
    def T(self):
        return self.hitting_time


def _sample_steps(mu, rng, size) -> list:
    cdf = np.cumsum([float(w) for w in mu.weights])
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return [mu.support[i] for i in idx]


def spliced_element(primary, copy, T, a0, m):
    """The three-case splice ``g~_m`` built from the two paths."""
    if T is None or m <= T:
        return primary[m]
    gT = primary[T]
    if m <= T + 2 * a0:
        return gT * copy[m - T]
    return gT * copy[2 * a0] * gT.inverse() * primary[m - 2 * a0]


def simulate_coupled_walk(mu: StepMeasure, h1: GroupElement, a0: int, n: int,
                          seed: int) -> CoupledWalkTrace:
    """One coupled trace: T is the first time with d(g_T, h1) <= a0."""
    if a0 < 0:
        raise ValueError("a0 must be >= 0")
    rng = shard_rng(seed, 0)
    steps = _sample_steps(mu, rng, n)
    copy_steps = _sample_steps(mu, rng, 2 * a0)
    e = mu.model.identity
    primary = [e]
    for s in steps:
        primary.append(primary[-1] * s)
    copy = [e]
    for s in copy_steps:
        copy.append(copy[-1] * s)
    hinv = h1.inverse()
    T = next((i for i, g in enumerate(primary) if (hinv * g).length <= a0), None)
    spliced = tuple(spliced_element(primary, copy, T, a0, m) for m in range(n + 1))
    support = set(mu.support)
    for m in range(n):
        inc = spliced[m].inverse() * spliced[m + 1]
        if inc not in support:
            raise AssertionError(f"spliced increment {inc} at step {m} is not in supp(mu)")
    return CoupledWalkTrace(tuple(primary), tuple(copy), T, a0, spliced, h1)


def coupled_endpoint_counts(mu: StepMeasure, h1: GroupElement, a0: int, m: int,
                            count: int, seed: int) -> Counter:
    """Empirical law of ``g~_m`` over ``count`` coupled pairs (vectorised).

    The spliced path's increments are the first T steps of g, then the 2·a0
    steps of the copy, then the remaining steps of g; this reproduces the
    three-case splice exactly.
    """
    radius = max(m * mu.max_step_length, 1)
    ball = cached_ball(mu.model, radius)
    coder = TableCoder(ball)
    steps = mu.step_words()
    cdf = np.cumsum([float(w) for w in mu.weights])
    cdf[-1] = 1.0
    dist_h1 = pairwise_distances(mu.model, ball.elements, [h1])[:, 0]
    out: Counter = Counter()
    sizes = [SHARD_SIZE] * (count // SHARD_SIZE) + ([count % SHARD_SIZE] if count % SHARD_SIZE else [])
    for shard, size in enumerate(sizes):
        rng = shard_rng(seed, shard)
        inc = np.searchsorted(cdf, rng.random((size, m)), side="right")
        inc_copy = np.searchsorted(cdf, rng.random((size, 2 * a0)), side="right")
        codes = np.full(size, coder.encode(()), dtype=np.int64)
        T = np.where(dist_h1[codes] <= a0, 0, m + 1)
        for t in range(m):
            codes = _step_codes(coder, codes, inc[:, t], steps)
            newly = (T > m) & (dist_h1[codes] <= a0)
            T[newly] = t + 1
        rows = np.arange(size)
        tilde = np.empty((size, m), dtype=np.int64)
        for i in range(m):
            from_copy = (T <= i) & (i < T + 2 * a0)
            from_late = i >= T + 2 * a0
            j_copy = np.clip(i - T, 0, max(2 * a0 - 1, 0))
            j_late = min(max(i - 2 * a0, 0), m - 1)
            col = inc[:, i].copy()
            if a0 > 0:
                col[from_copy] = inc_copy[rows[from_copy], j_copy[from_copy]]
            col[from_late] = inc[rows[from_late], j_late]
            tilde[:, i] = col
        codes = np.full(size, coder.encode(()), dtype=np.int64)
        for i in range(m):
            codes = _step_codes(coder, codes, tilde[:, i], steps)
        u, c = np.unique(codes, return_counts=True)
        for code, k in zip(u, c):
            out[coder.element(code)] += int(k)
    return out


def _step_codes(coder, codes, idx, steps):
    new = codes.copy()
    for i, w in enumerate(steps):
        sel = idx == i
        if sel.any():
            new[sel] = apply_word(coder, codes[sel], w)
    return new


@dataclass(frozen=True)
class SplittingReport:
    h1: str
    h2: str
    K: float
    n: int
    delta: float
    a0: int
    lhs: Fraction
    rhs: Fraction
    holds: bool
    log_base: str = "e"

    @property
    def slack(self) -> Fraction:
        return self.rhs - self.lhs


class PointLaws:
    """Exact ``P(g_k = h)`` for ``|h| <= radius`` and ``k <= horizon`` from
    one pruned convolution run."""

    def __init__(self, mu: StepMeasure, horizon: int, radius: int):
        self.mu = mu
        self.horizon = horizon
        self.radius = radius
        self.laws = list(iter_distributions(mu, horizon, "exact", within=radius))
        self.D = mu.denominator

    def numerator(self, k: int, h: GroupElement) -> int:
        if k > self.horizon:
            raise GuardError(f"time {k} beyond horizon {self.horizon}")
        return self.laws[k].numerator(h)

    def series(self, h: GroupElement) -> list[int]:
        return [d.numerator(h) for d in self.laws]


def _splitting_sides(mu, h1, h2, K, n, delta, laws: PointLaws):
    a0 = splice_radius(K, n, delta)
    M = n + 2 * a0
    x = h1 * h2
    wmin = min(mu.numerators)
    lhs_num = wmin ** (2 * a0) * laws.numerator(n, x)
    s1, s2 = laws.series(h1), laws.series(h2)
    rhs_num = sum(s1[k] * s2[M - k] for k in range(M + 1))
    D = laws.D
    return a0, Fraction(lhs_num, D ** M), Fraction(rhs_num, D ** M), lhs_num <= rhs_num


def verify_splitting_inequality(mu: StepMeasure, h1: GroupElement, h2: GroupElement,
                                K: float, n: int, delta: float,
                                laws: PointLaws | None = None) -> SplittingReport:
    """Exact check of ``c^{2a0} P(g_n = h1 h2) <= sum_k P(g_k = h1) P(g_{n+2a0-k} = h2)``."""
    defect = h1.length + h2.length - (h1 * h2).length
    if defect > K:
        raise GuardError(f"|h1| + |h2| - |h1 h2| = {defect} exceeds K = {K}")
    a0 = splice_radius(K, n, delta)
    if laws is None or laws.horizon < n + 2 * a0 or \
            laws.radius < max(h1.length, h2.length, (h1 * h2).length):
        laws = PointLaws(mu, n + 2 * a0, max(h1.length, h2.length, (h1 * h2).length))
    a0, lhs, rhs, ok = _splitting_sides(mu, h1, h2, K, n, delta, laws)
    return SplittingReport(str(h1), str(h2), K, n, delta, a0, lhs, rhs, ok)


@dataclass
class SweepReport:
    name: str
    tuples_checked: int = 0
    hypotheses_met: int = 0
    violations: list = field(default_factory=list)
    min_slack: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        d = {"check": self.name, "tuples_checked": self.tuples_checked,
             "hypotheses_met": self.hypotheses_met, "violations": self.violations,
             "min_slack": self.min_slack}
        d.update(self.extra)
        return d


def splitting_sweep(mu: StepMeasure, radius: int = 3, K_values=(0, 1, 2),
                    n_values=range(1, 9), delta: float = 1) -> SweepReport:
    """All pairs in the ball with defect <= K, every K and n requested."""
    model = mu.model
    n_values = list(n_values)
    Kmax = max(K_values)
    horizon = max(n + 2 * splice_radius(Kmax, n, delta) for n in n_values)
    laws = PointLaws(mu, horizon, 2 * radius)
    ball = enumerate_ball(model, radius)
    series = {g: laws.series(g) for g in ball}
    wmin = min(mu.numerators)
    rep = SweepReport("splitting", extra={"radius": radius, "K_values": list(K_values),
                                          "n_values": n_values, "delta": delta,
                                          "log_base": "e", "horizon": horizon})
    worst = None
    for h1 in ball:
        s1 = series[h1]
        for h2 in ball:
            x = h1 * h2
            defect = h1.length + h2.length - x.length
            s2 = series[h2]
            conv_cache = {}
            for K in K_values:
                if defect > K:
                    continue
                for n in n_values:
                    rep.tuples_checked += 1
                    px = laws.numerator(n, x)
                    if px == 0:
                        continue
                    rep.hypotheses_met += 1
                    a0 = splice_radius(K, n, delta)
                    M = n + 2 * a0
                    if M not in conv_cache:
                        conv_cache[M] = sum(s1[k] * s2[M - k] for k in range(M + 1))
                    lhs, rhs = wmin ** (2 * a0) * px, conv_cache[M]
                    ratio = rhs / lhs
                    if worst is None or ratio < worst:
                        worst = ratio
                    if lhs > rhs:
                        rep.violations.append({"h1": str(h1), "h2": str(h2), "K": K, "n": n,
                                               "a0": a0, "lhs": str(Fraction(lhs, laws.D ** M)),
                                               "rhs": str(Fraction(rhs, laws.D ** M))})
    rep.min_slack = None if worst is None else float(worst)
    rep.extra["min_rhs_over_lhs"] = rep.min_slack
    return rep
