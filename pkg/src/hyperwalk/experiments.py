"""End-to-end experiments: return-probability rates, proper-power decay,
conjugacy-class bounds and the symmetry identity."""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exceptions import GuardError
from .groups import GroupElement, GroupModel, parse_group
from .kernels import FreeCoder, free_power_mask
from .powers import ConjugacyClass, conjugation_orbit, is_proper_power, proper_power_census
from .stats import bonferroni_level, wilson_interval
from .walk import (
    Distribution,
    StepMeasure,
    SpectralRadiusEstimate,
    iter_distributions,
    parse_measure,
    return_probabilities,
    rho_closed_form,
    rho_rayleigh_ball,
    sample_paths,
)


@dataclass
class ExperimentConfig:
    group: str = "free:2"
    measure: str = "lazy-uniform"
    n_max: int = 40
    exact_max: int = 12
    samples: int = 10_000_000
    seed: int = 0
    mode: str = "exact"
    A: float = 5
    tolerance: float = 0.02
    window_min: int = 5
    confidence: float = 0.99
    radius: int = 3
    threads: int = 1
    class_word: str = "ab"
    out_dir: str = ""

    def __post_init__(self):
        if self.n_max < 0 or self.exact_max < 0:
            raise GuardError("n ranges must be >= 0")
        if self.samples < 0:
            raise GuardError("samples must be >= 0")
        if self.mode not in ("exact", "float"):
            raise GuardError(f"mode must be exact or float, got {self.mode!r}")
        if not 0 < self.confidence < 1:
            raise GuardError("confidence must lie in (0, 1)")

    @classmethod
    def from_ini(cls, path: str, section: str = "experiment") -> "ExperimentConfig":
        """Read a ``[experiment]`` section; probabilities stay as ``p/q`` strings."""
        cp = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
        if not cp.has_section(section):
            raise GuardError(f"config has no [{section}] section")
        return cls.from_mapping(dict(cp[section]))

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        names = {k.lower(): k for k in kinds}  # configparser lowercases keys
        out = {}
        for given, raw in values.items():
            key = names.get(given.replace("-", "_").lower())
            if key is None:
                raise GuardError(f"unknown config key {given!r}")
            t = kinds[key]
            if t in ("int", int):
                out[key] = int(raw)
            elif t in ("float", float):
                out[key] = float(Fraction(str(raw)))
            else:
                out[key] = str(raw)
        return cls(**out)

    def to_dict(self) -> dict:
        return asdict(self)

    def model(self) -> GroupModel:
        return parse_group(self.group, self.radius)

    def step_measure(self, model: GroupModel | None = None) -> StepMeasure:
        return parse_measure(self.measure, model or self.model())


@dataclass
class ExperimentSeries:
    """Points ``(n, value, ci_low, ci_high, method)`` with n increasing."""

    label: str
    points: list = field(default_factory=list)

    def add(self, n: int, value: float, low: float | None = None, high: float | None = None,
            method: str = "exact"):
        if self.points and n <= self.points[-1][0]:
            raise ValueError("series indices must be strictly increasing")
        low = value if low is None else low
        high = value if high is None else high
        if not low <= value <= high:
            raise ValueError(f"interval [{low}, {high}] does not bracket {value}")
        self.points.append((int(n), float(value), float(low), float(high), method))

    @property
    def method(self) -> str:
        kinds = {p[4] for p in self.points}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    @property
    def ns(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def value_at(self, n: int) -> float:
        for p in self.points:
            if p[0] == n:
                return p[1]
        raise KeyError(n)

    def rows(self) -> list:
        return [(n, repr(v), repr(lo), repr(hi), m) for n, v, lo, hi, m in self.points]


@dataclass(frozen=True)
class RateFit:
    rho_hat: float
    c_hat: float
    intercept: float
    residual: float
    window: tuple

    def to_dict(self):
        return {"rho_hat": self.rho_hat, "c_hat": self.c_hat, "intercept": self.intercept,
                "residual": self.residual, "window": list(self.window)}


def fit_rate(series, window: tuple = (5, None), degree: int = 1) -> RateFit:
    """Least squares for ``log q_n = n log rho + c log n + b`` on the window.

    ``series`` is an :class:`ExperimentSeries` or a pair ``(ns, values)``.
    ``degree=0`` drops the ``log n`` correction.
    """
    if isinstance(series, ExperimentSeries):
        ns, vals = series.ns, series.values
    else:
        ns, vals = (np.asarray(a, dtype=float) for a in series)
    lo, hi = window
    hi = ns.max() if hi is None else hi
    sel = (ns >= lo) & (ns <= hi)
    ns, vals = ns[sel].astype(float), vals[sel]
    if len(ns) < 2 + degree:
        raise GuardError(f"fit window {window} holds only {len(ns)} points")
    if (vals <= 0).any():
        raise GuardError("nonpositive values in the fit window")
    cols = [ns, np.ones_like(ns)]
    if degree:
        cols.insert(1, np.log(ns))
    X = np.column_stack(cols)
    y = np.log(vals)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.linalg.norm(X @ coef - y))
    c = float(coef[1]) if degree else 0.0
    return RateFit(float(math.exp(coef[0])), c, float(coef[-1]), resid,
                   (int(lo), int(hi)))


def reference_rho(mu: StepMeasure) -> SpectralRadiusEstimate | None:
    """Closed form when mu is a lazy uniform measure on a free group."""
    try:
        return rho_closed_form(mu)
    except GuardError:
        return None


# ---------------------------------------------------------------------------
# return probabilities
# ---------------------------------------------------------------------------

@dataclass
class KestenResult:
    series: ExperimentSeries       # P(g_2j = e)^(1/2j)
    returns: list                  # exact P(g_j = e)
    fit: RateFit
    rho: SpectralRadiusEstimate | None
    checks: dict

    @property
    def verdict(self) -> str:
        return "PASS" if all(self.checks.values()) else "FAIL"


def run_kesten(cfg: ExperimentConfig, mu: StepMeasure | None = None) -> KestenResult:
    mu = mu or cfg.step_measure()
    returns = return_probabilities(mu, cfg.n_max, "exact")
    series = ExperimentSeries("return-rate")
    roots = {}
    for j in range(2, cfg.n_max + 1, 2):
        p = returns[j]
        roots[j] = math.exp((math.log(p.numerator) - math.log(p.denominator)) / j)
        series.add(j, roots[j])
    rho = reference_rho(mu)
    evens = [j for j in range(2, cfg.n_max + 1, 2)]
    fit = fit_rate(([j for j in evens], [float(returns[j]) for j in evens]),
                   (cfg.window_min, None))
    checks = {
        "doubling_monotone": all(roots[2 * j] >= roots[j] * (1 - 1e-12)
                                 for j in evens if 2 * j in roots),
    }
    if rho is not None:
        checks["below_rho"] = all(v <= rho.value + 1e-12 for v in roots.values())
    return KestenResult(series, returns, fit, rho, checks)


# ---------------------------------------------------------------------------
# proper powers along the walk
# ---------------------------------------------------------------------------

def proper_power_mass(dist: Distribution) -> tuple:
    """``(P(g_n is a proper power), complete)`` summed over the support."""
    model = dist.model
    coder = dist.coder
    if isinstance(coder, FreeCoder):
        W, L = coder.decode_matrix(dist.codes)
        mask = free_power_mask(W, L)
        complete = True
    elif model.is_free_type:
        mask = np.array([is_proper_power(coder.element(c)) is not None for c in dist.codes],
                        dtype=bool)
        complete = True
    else:
        census = proper_power_census(coder.ball)
        mask = np.array([coder.element(c) in census for c in dist.codes], dtype=bool)
        complete = census.complete
    vals = dist.values[mask]
    if dist.exact:
        return Fraction(int(sum(int(v) for v in vals)), dist.denominator), complete
    return float(np.sum(vals)), complete


@dataclass
class Theorem1Result:
    series: ExperimentSeries         # exact up to exact_max, Monte Carlo beyond
    exact: dict                      # n -> Fraction q_n
    returns: dict                    # n -> Fraction P(g_n = e)
    mc: ExperimentSeries | None
    fit: RateFit
    rho: float
    rho_source: str
    A: float
    A_star: float | None
    checks: dict
    complete: bool
    overlap: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if not all(self.checks.values()):
            return "FAIL"
        return "PASS" if self.complete and self.rho_source == "closed-form" else "ADVISORY"

    def summary(self) -> dict:
        d = self.fit.to_dict()
        d.update({"verdict": self.verdict, "A": self.A, "A_star": self.A_star,
                  "rho": self.rho, "rho_source": self.rho_source, "checks": self.checks,
                  "census_complete": self.complete,
                  "convention": "identity counted as proper power"})
        d.update(self.overlap)
        return d


def run_theorem1(cfg: ExperimentConfig, mu: StepMeasure | None = None) -> Theorem1Result:
    """q_n = P(g_n is a proper power): exact for n <= exact_max, Monte Carlo
    (``samples`` paths, Wilson intervals) up to n_max; rate fit on the
    combined series."""
    mu = mu or cfg.step_measure()
    model = mu.model
    exact_max = min(cfg.exact_max, cfg.n_max)
    exact, returns = {}, {}
    complete = True
    for dist in iter_distributions(mu, exact_max, "exact"):
        q, ok = proper_power_mass(dist)
        complete &= ok
        exact[dist.n] = q
        returns[dist.n] = dist.probability(model.identity)
    mc = None
    mc_hits = None
    if cfg.samples and (cfg.n_max > exact_max or cfg.samples):
        res = sample_paths(mu, cfg.n_max, cfg.samples, cfg.seed,
                           events=("proper-power",), threads=cfg.threads,
                           confidence=cfg.confidence)
        mc_hits = res.hits["proper-power"]
        lo, hi = wilson_interval(mc_hits, cfg.samples, cfg.confidence)
        mc = ExperimentSeries("proper-power")
        for n in range(cfg.n_max + 1):
            mc.add(n, mc_hits[n] / cfg.samples, lo[n], hi[n], "monte-carlo")

    series = ExperimentSeries("proper-power")
    for n in range(cfg.n_max + 1):
        if n in exact:
            series.add(n, float(exact[n]))
        elif mc is not None:
            series.add(n, *mc.points[n][1:4], "monte-carlo")

    ref = reference_rho(mu)
    if ref is not None:
        rho, source = ref.value, "closed-form"
    else:
        est = rho_rayleigh_ball(mu, cfg.radius)
        rho, source = est.value, est.method

    positive = [p for p in series.points if p[1] > 0 and p[0] >= cfg.window_min]
    fit = fit_rate(([p[0] for p in positive], [p[1] for p in positive]),
                   (cfg.window_min, None))
    checks = {
        "rho_within_tolerance": abs(fit.rho_hat - rho) <= cfg.tolerance,
        "power_bound_exact_points": all(float(exact[n]) <= n ** cfg.A * rho ** n
                                        for n in exact if n >= 1),
        "contains_returns": all(exact[n] >= returns[n] for n in exact),
    }
    overlap = {}
    if mc_hits is not None:
        ns = [n for n in exact if n >= 1]
        level = bonferroni_level(cfg.confidence, len(ns))
        lo, hi = wilson_interval(mc_hits[ns], cfg.samples, level)
        inside = [bool(l <= float(exact[n]) <= h) for n, l, h in zip(ns, lo, hi)]
        checks["mc_consistent_with_exact"] = all(inside)
        overlap = {"overlap_window": [min(ns), max(ns)] if ns else [],
                   "overlap_level": level, "overlap_outside": [n for n, ok in zip(ns, inside)
                                                               if not ok]}
    a_star = None
    logs = [(math.log(v / rho ** n) / math.log(n)) for n, v, *_ in series.points
            if n >= 2 and v > 0]
    if logs:
        a_star = max(logs)
    return Theorem1Result(series, exact, returns, mc, fit, rho, source, cfg.A, a_star,
                          checks, complete, overlap)


# ---------------------------------------------------------------------------
# conjugacy classes
# ---------------------------------------------------------------------------

def class_members(C: ConjugacyClass, max_length: int) -> list:
    """Elements of C with length <= max_length, shortlex sorted."""
    members = set()
    for y in C.minimal or {C.representative}:
        members |= conjugation_orbit(y, max_length + 2)
    out = [y for y in members if y.length <= max_length]
    out.sort(key=lambda y: (y.length, y.word))
    return out


def class_probability(dist: Distribution, members: Sequence[GroupElement]):
    codes = []
    for h in members:
        c = dist.code_of(h)
        if c is not None:
            codes.append(c)
    if not codes:
        return Fraction(0) if dist.exact else 0.0
    vals = dist.lookup_codes(np.array(codes, dtype=np.int64))
    if dist.exact:
        return Fraction(int(sum(int(v) for v in vals)), dist.denominator)
    return float(np.sum(vals))


@dataclass
class ConjClassResult:
    cls: ConjugacyClass
    series: ExperimentSeries
    exact: dict
    rho: float
    A: float
    violations: list

    @property
    def verdict(self) -> str:
        return "FAIL" if self.violations else "PASS"


def run_conjclass_bound(cfg: ExperimentConfig, C: ConjugacyClass,
                        mu: StepMeasure | None = None, laws: list | None = None,
                        A: float | None = None) -> ConjClassResult:
    """Exact ``P(g_n in C)`` for n = 1..n_max against ``n^A rho^n``."""
    mu = mu or cfg.step_measure(C.model)
    A = cfg.A if A is None else A
    if laws is None:
        laws = list(iter_distributions(mu, cfg.n_max, "exact"))
    ref = reference_rho(mu)
    rho = ref.value if ref is not None else rho_rayleigh_ball(mu, cfg.radius).value
    members = class_members(C, cfg.n_max * mu.max_step_length)
    series = ExperimentSeries(f"class:{C.representative}")
    exact, violations = {}, []
    for dist in laws[1:cfg.n_max + 1]:
        n = dist.n
        p = class_probability(dist, [h for h in members
                                     if h.length <= n * mu.max_step_length])
        exact[n] = p
        series.add(n, float(p))
        if float(p) > n ** A * rho ** n:
            violations.append({"n": n, "probability": str(p), "bound": n ** A * rho ** n})
    return ConjClassResult(C, series, exact, rho, A, violations)


@dataclass(frozen=True)
class SymmetryReport:
    k2: int
    k4: int
    lhs: Fraction
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs

    @property
    def difference(self) -> Fraction:
        return self.lhs - self.rhs


def verify_symmetry_identity(mu: StepMeasure, members: Sequence[GroupElement], k2: int,
                             k4: int, laws: list | None = None) -> SymmetryReport:
    """``sum_h P(g_k2 = h) P(g_k4 = h)`` against ``P(g_{k2+k4} = e, g_k2 in C)``.

    The right side is computed from paths: by the Markov property it is
    ``sum_h P(g_k2 = h) P(h g'_k4 = e)`` with g' an independent walk, i.e.
    ``P(g'_k4 = h⁻¹)``.  The two agree because mu is symmetric.
    """
    if laws is None or len(laws) <= max(k2, k4):
        laws = list(iter_distributions(mu, max(k2, k4), "exact"))
    lhs = rhs = Fraction(0)
    for h in members:
        p2 = laws[k2].probability(h) if h.length <= k2 * mu.max_step_length else 0
        if not p2:
            continue
        p4 = laws[k4].probability(h) if h.length <= k4 * mu.max_step_length else 0
        p4inv = laws[k4].probability(h.inverse()) if h.length <= k4 * mu.max_step_length else 0
        lhs += p2 * p4
        rhs += p2 * p4inv
    return SymmetryReport(k2, k4, Fraction(lhs), Fraction(rhs))
