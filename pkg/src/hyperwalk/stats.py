"""Binomial confidence intervals for Monte Carlo event frequencies."""
from __future__ import annotations

import numpy as np
from scipy.stats import norm


def wilson_interval(hits, trials, confidence: float = 0.99):
    """Wilson score interval; vectorised over ``hits``.

    Returns ``(low, high)``; for ``trials == 0`` the interval is ``(0, 1)``.
    """
    hits = np.asarray(hits, dtype=float)
    if trials <= 0:
        return np.zeros_like(hits), np.ones_like(hits)
    z = norm.ppf(0.5 + confidence / 2)
    p = hits / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z * np.sqrt(p * (1 - p) / trials + z2n / (4 * trials)) / (1 + z2n)
    low = np.where(hits == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    high = np.where(hits == trials, 1.0, np.clip(centre + half, 0.0, 1.0))
    return low, high


def bonferroni_level(confidence: float, comparisons: int) -> float:
    """Per-comparison level giving family-wise ``confidence``."""
    return 1 - (1 - confidence) / max(comparisons, 1)
