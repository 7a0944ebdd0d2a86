import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from statsmodels.stats.proportion import proportion_confint

from hyperwalk.stats import bonferroni_level, wilson_interval


@given(st.integers(1, 10 ** 7), st.data())
def test_wilson_matches_statsmodels(trials, data):
    hits = data.draw(st.integers(0, trials))
    lo, hi = wilson_interval([hits], trials, 0.99)
    rlo, rhi = proportion_confint(hits, trials, alpha=0.01, method="wilson")
    assert lo[0] == pytest.approx(rlo, abs=1e-12)
    assert hi[0] == pytest.approx(rhi, abs=1e-12)
    assert lo[0] <= hits / trials <= hi[0]


def test_wilson_edges():
    lo, hi = wilson_interval(np.array([0, 10]), 10)
    assert lo[0] == 0 and hi[1] == 1
    lo, hi = wilson_interval([3], 0)
    assert (lo[0], hi[0]) == (0, 1)


def test_bonferroni():
    assert bonferroni_level(0.99, 10) == pytest.approx(0.999)
    assert bonferroni_level(0.99, 0) == 0.99
