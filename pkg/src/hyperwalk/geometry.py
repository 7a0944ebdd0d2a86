"""Gromov products, four-point hyperbolicity and geodesic checks on balls.

Distances are word-metric distances ``d(x, y) = |x^-1 y|``.  Gromov products
are half-integers; internally we work with the doubled integer
``2 (x,y)_z = d(x,z) + d(y,z) - d(x,y)`` and only convert at the edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exceptions import BoundViolation, GuardError
from .groups import (
    Ball,
    FreeGroup,
    GroupElement,
    GroupModel,
    SmallCancellationBall,
    enumerate_ball,
    pairwise_distances,
)

DEFAULT_MAX_EXHAUSTIVE = 10 ** 10
DEFAULT_SAMPLES = 10 ** 6


@dataclass(frozen=True)
class HyperbolicityConstant:
    delta: float
    provenance: str  # paper-default-free-group | estimated-on-ball(R)
    raw_defect: Fraction | None = None

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")

    def __float__(self):
        return float(self.delta)


def _dist(model: GroupModel, x: GroupElement, y: GroupElement) -> int:
    return model.length_of(model.multiply_words(model.invert_canonical(x.word), y.word))


def _in_ball(b: Ball | None, *xs):
    if b is None:
        return
    for x in xs:
        b.index_of(x)


def gromov_product(x: GroupElement, y: GroupElement, z: GroupElement,
                   b: Ball | None = None) -> Fraction:
    """``(x, y)_z = (d(x,z) + d(y,z) - d(x,y)) / 2``."""
    _in_ball(b, x, y, z)
    m = x.model
    return Fraction(_dist(m, x, z) + _dist(m, y, z) - _dist(m, x, y), 2)


# ---------------------------------------------------------------------------
# four-point condition
# ---------------------------------------------------------------------------

@dataclass
class ScanReport:
    check: str
    ball_radius: int
    mode: str = "exhaustive"
    tuples_checked: int = 0
    hypotheses_met: int | None = None
    max_defect: float | None = None
    min_slack: float | None = None
    violations: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        d = {"check": self.check, "ball_radius": self.ball_radius, "mode": self.mode,
             "tuples_checked": self.tuples_checked, "max_defect": self.max_defect,
             "violations": self.violations}
        if self.hypotheses_met is not None:
            d["hypotheses_met"] = self.hypotheses_met
        if self.min_slack is not None:
            d["min_slack"] = self.min_slack
        d.update(self.extra)
        return d


def _maxmin_defect(G2: np.ndarray, top: int) -> tuple[int, tuple]:
    """``max_{x,y,z} min(G2[x,z], G2[y,z]) - G2[x,y]`` for one base point.

    The inner max-min product is computed threshold by threshold as a
    boolean matrix product, which BLAS does quickly.
    """
    N = G2.shape[0]
    best = np.zeros((N, N), dtype=np.int64)
    for t in range(1, top + 1):
        B = (G2 >= t).astype(np.float32)
        if not B.any():
            break
        best[(B @ B.T) > 0.5] = t
    diff = best - G2
    i = int(np.argmax(diff))
    return int(diff.flat[i]), divmod(i, N)


def four_point_scan(b: Ball, max_exhaustive: int = DEFAULT_MAX_EXHAUSTIVE,
                    samples: int = DEFAULT_SAMPLES, seed: int = 0,
                    delta: float | None = None) -> ScanReport:
    """Largest four-point defect ``min((x,z)_w, (y,z)_w) - (x,y)_w`` on ``b``.

    Exhaustive when ``|b|**4 <= max_exhaustive``, otherwise over ``samples``
    uniformly drawn quadruples (seeded).  With ``delta`` given, quadruples
    whose defect exceeds it are reported as violations.
    """
    N = len(b)
    D = b.distance_matrix
    rep = ScanReport("four-point", b.radius)
    if N ** 4 <= max_exhaustive:
        best, witness = 0, None
        for w in range(N):
            G2 = D[:, w][:, None] + D[:, w][None, :] - D
            val, (x, y) = _maxmin_defect(G2, 2 * b.radius)
            if val > best or witness is None:
                row = np.minimum(G2[x], G2[y])
                best, witness = max(val, best), (x, y, int(np.argmax(row)), w)
        rep.tuples_checked = N ** 4
        raw2 = best
    else:
        rep.mode = "sampled"
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
        raw2, witness = 0, None
        done = 0
        while done < samples:
            m = min(1 << 20, samples - done)
            x, y, z, w = (rng.integers(0, N, m) for _ in range(4))
            g = lambda p, q: D[p, w] + D[q, w] - D[p, q]
            d2 = np.minimum(g(x, z), g(y, z)) - g(x, y)
            i = int(np.argmax(d2))
            if witness is None or d2[i] > raw2:
                raw2 = max(raw2, int(d2[i]))
                witness = (int(x[i]), int(y[i]), int(z[i]), int(w[i]))
            if delta is not None:
                for j in np.flatnonzero(d2 > 2 * delta)[:20]:
                    rep.violations.append(_quad(b, (x[j], y[j], z[j], w[j]), d2[j] / 2))
            done += m
        rep.tuples_checked = samples
    rep.max_defect = raw2 / 2
    if witness is not None and raw2 > 0:
        rep.extra["witness"] = _quad(b, witness, raw2 / 2)
    if delta is not None and rep.mode == "exhaustive" and raw2 > 2 * delta:
        rep.violations.append(_quad(b, witness, raw2 / 2))
    return rep


def _quad(b, idx, defect):
    x, y, z, w = (str(b.elements[int(i)]) for i in idx)
    return {"x": x, "y": y, "z": z, "w": w, "defect": float(defect)}


def estimate_delta_4point(b: Ball, **kw) -> HyperbolicityConstant:
    """``max(1, max four-point defect)`` over the ball."""
    rep = four_point_scan(b, **kw)
    raw = Fraction(rep.max_defect).limit_denominator(2)
    return HyperbolicityConstant(max(1.0, float(raw)),
                                 f"estimated-on-ball({b.radius})"
                                 + ("" if rep.mode == "exhaustive" else ",sampled"), raw)


@lru_cache(maxsize=16)
def default_delta(model: GroupModel) -> HyperbolicityConstant:
    """1 for free groups; otherwise the ceiling of the four-point defect on
    the largest affordable ball (floored at 1)."""
    if isinstance(model, FreeGroup):
        return HyperbolicityConstant(1.0, "paper-default-free-group", Fraction(0))
    if isinstance(model, SmallCancellationBall):
        # distances inside a ball of radius r need products up to length 2r
        R = max(model.validated_radius // 2, 0)
    else:
        R = 0
        while R < 8 and len(enumerate_ball(model, R + 1)) <= 200:
            R += 1
    est = estimate_delta_4point(enumerate_ball(model, R))
    return HyperbolicityConstant(float(max(1, math.ceil(est.delta))), est.provenance,
                                 est.raw_defect)


# ---------------------------------------------------------------------------
# geodesics and the distance to a geodesic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Geodesic:
    start: GroupElement
    end: GroupElement
    vertices: tuple

    @property
    def length(self) -> int:
        return len(self.vertices) - 1


def geodesic_between(x: GroupElement, y: GroupElement, b: Ball) -> Geodesic:
    """Vertex path from x to y inside ``b``; at each vertex the smallest
    generator letter that gets one step closer to y is taken."""
    _in_ball(b, x, y)
    model = b.model
    dist_to_y = pairwise_distances(model, b.elements, [y])[:, 0]
    cur = b.index_of(x)
    path = [b.elements[cur]]
    while dist_to_y[cur] > 0:
        for l in range(b.table.shape[1]):
            nxt = b.table[cur, l]
            if nxt >= 0 and dist_to_y[nxt] == dist_to_y[cur] - 1:
                cur = int(nxt)
                break
        else:
            raise GuardError(f"every geodesic from {path[-1]} to {y} leaves the ball "
                             f"of radius {b.radius}")
        path.append(b.elements[cur])
    return Geodesic(x, y, tuple(path))


@dataclass(frozen=True)
class GeodesicBoundReport:
    gromov: Fraction
    distance_to_geodesic: int
    left_slack: Fraction   # d(z, [x,y]) - (x,y)_z
    right_slack: Fraction  # (x,y)_z + delta - d(z, [x,y])

    @property
    def holds(self) -> bool:
        return self.left_slack >= 0 and self.right_slack >= 0


def check_geodesic_distance_bound(x, y, z, b: Ball, delta=None) -> GeodesicBoundReport:
    """Both sides of ``(x,y)_z <= d(z, [x,y]) <= (x,y)_z + delta``."""
    delta = _delta_value(b.model, delta)
    geo = geodesic_between(x, y, b)
    m = b.model
    dz = min(_dist(m, z, v) for v in geo.vertices)
    gp = gromov_product(x, y, z)
    return GeodesicBoundReport(gp, dz, dz - gp, gp + delta - dz)


def _delta_value(model, delta) -> Fraction:
    if delta is None:
        delta = default_delta(model)
    if isinstance(delta, HyperbolicityConstant):
        delta = delta.delta
    return Fraction(delta).limit_denominator(1000)


def geodesic_bound_scan(model: GroupModel, radius: int, delta=None) -> ScanReport:
    """All triples of the ball; geodesics are taken in the ball of radius
    ``2 * radius``, which contains every geodesic between two points of the
    inner ball."""
    delta = _delta_value(model, delta)
    inner = enumerate_ball(model, radius)
    outer = enumerate_ball(model, 2 * radius)
    Din = inner.distance_matrix
    Dz = pairwise_distances(model, inner.elements, outer.elements)
    rep = ScanReport("geodesic-distance", radius, extra={"delta": float(delta)})
    min_left, min_right = None, None
    N = len(inner)
    for i, x in enumerate(inner.elements):
        for j, y in enumerate(inner.elements):
            geo = geodesic_between(x, y, outer)
            cols = [outer.index_of(v) for v in geo.vertices]
            dz = Dz[:, cols].min(axis=1)
            gp2 = Din[:, i] + Din[:, j] - Din[i, j]
            left = 2 * dz - gp2
            right = gp2 + 2 * delta - 2 * dz
            rep.tuples_checked += N
            lo, ro = left.min(), right.min()
            min_left = lo if min_left is None else min(min_left, lo)
            min_right = ro if min_right is None else min(min_right, ro)
            for k in np.flatnonzero((left < 0) | (right < 0))[:5]:
                rep.violations.append({"x": str(x), "y": str(y), "z": str(inner.elements[k]),
                                       "gromov": float(gp2[k]) / 2, "distance": int(dz[k])})
    rep.extra["min_left_slack"] = float(min_left) / 2
    rep.extra["min_right_slack"] = float(min_right) / 2
    rep.min_slack = min(rep.extra["min_left_slack"], rep.extra["min_right_slack"])
    return rep


# ---------------------------------------------------------------------------
# concatenation of geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcatenationReport:
    hypotheses_met: bool
    lhs: int | None = None
    rhs: Fraction | None = None
    reason: str | None = None

    @property
    def status(self) -> str:
        if not self.hypotheses_met:
            return "hypotheses-not-met"
        return "holds" if self.lhs <= self.rhs else "violated"

    @property
    def slack(self):
        return None if self.lhs is None else self.rhs - self.lhs


def check_concatenation_criterion(x, y, z, w, alpha, delta=None,
                                  b: Ball | None = None) -> ConcatenationReport:
    """If ``(x,z)_y <= alpha``, ``(y,w)_z <= alpha`` and
    ``d(y,z) > 2 alpha + delta`` then
    ``d(x,y) + d(y,z) + d(z,w) <= d(x,w) + 4 alpha + 2 delta``."""
    _in_ball(b, x, y, z, w)
    model = x.model
    delta = _delta_value(model, delta)
    alpha = Fraction(alpha)
    g1, g2 = gromov_product(x, z, y), gromov_product(y, w, z)
    dyz = _dist(model, y, z)
    if g1 > alpha:
        return ConcatenationReport(False, reason=f"(x,z)_y = {g1} > alpha")
    if g2 > alpha:
        return ConcatenationReport(False, reason=f"(y,w)_z = {g2} > alpha")
    if not dyz > 2 * alpha + delta:
        return ConcatenationReport(False, reason=f"d(y,z) = {dyz} <= 2 alpha + delta")
    lhs = _dist(model, x, y) + dyz + _dist(model, z, w)
    rep = ConcatenationReport(True, lhs, _dist(model, x, w) + 4 * alpha + 2 * delta)
    if rep.status == "violated":
        raise BoundViolation("concatenation", f"{lhs} > {rep.rhs}",
                             {"x": str(x), "y": str(y), "z": str(z), "w": str(w)})
    return rep


def concatenation_scan(model: GroupModel, radius: int, alphas=(0, 1),
                       delta=None) -> ScanReport:
    """Every quadruple of the ball and every alpha; counterexamples listed."""
    delta = _delta_value(model, delta)
    b = enumerate_ball(model, radius)
    D = b.distance_matrix
    N = len(b)
    rep = ScanReport("concatenation", radius, hypotheses_met=0,
                     extra={"alphas": list(alphas), "delta": float(delta)})
    worst = None
    for alpha in alphas:
        a2 = 2 * Fraction(alpha)
        for j in range(N):          # y
            for k in range(N):      # z
                rep.tuples_checked += N * N
                if not D[j, k] > 2 * Fraction(alpha) + delta:
                    continue
                # 2 (x,z)_y and 2 (y,w)_z over all x resp. w
                xs = np.flatnonzero(D[:, j] + D[k, j] - D[:, k] <= a2)
                ws = np.flatnonzero(D[j, k] + D[:, k] - D[j, :] <= a2)
                if not len(xs) or not len(ws):
                    continue
                rep.hypotheses_met += len(xs) * len(ws)
                lhs = D[xs, j][:, None] + D[j, k] + D[k, ws][None, :]
                rhs = D[np.ix_(xs, ws)] + float(4 * Fraction(alpha) + 2 * delta)
                slack = rhs - lhs
                s = float(slack.min())
                worst = s if worst is None else min(worst, s)
                for p, q in np.argwhere(slack < 0)[:5]:
                    rep.violations.append({"x": str(b.elements[xs[p]]), "y": str(b.elements[j]),
                                           "z": str(b.elements[k]), "w": str(b.elements[ws[q]]),
                                           "alpha": float(alpha), "slack": float(slack[p, q])})
    rep.min_slack = worst
    return rep
