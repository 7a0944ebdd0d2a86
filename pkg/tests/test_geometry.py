import itertools
from fractions import Fraction

import pytest

from hyperwalk.exceptions import GuardError
from hyperwalk.geometry import (
    check_concatenation_criterion,
    check_geodesic_distance_bound,
    concatenation_scan,
    default_delta,
    estimate_delta_4point,
    four_point_scan,
    geodesic_between,
    geodesic_bound_scan,
    gromov_product,
)
from hyperwalk.groups import FreeGroup, FreeProductCyclics, enumerate_ball

from oracles import four_point_defect

F2 = FreeGroup(2)
PSL = FreeProductCyclics((2, 3), names="st")
E = F2.element


def test_gromov_examples():
    e = F2.identity
    assert gromov_product(E("a"), E("b"), e) == 0
    assert gromov_product(E("ab"), E("abb"), e) == 2
    x = E("abA")
    assert gromov_product(x, x, x) == 0


@pytest.mark.parametrize("m", [F2, PSL])
def test_gromov_symmetry_and_bounds(m):
    b = enumerate_ball(m, 4 if m is F2 else 5)
    pts = list(b)[::3]
    for x, y, z in itertools.product(pts[:12], repeat=3):
        g = gromov_product(x, y, z)
        assert g == gromov_product(y, x, z)
        assert 0 <= g <= min(b.distance(x, z), b.distance(y, z))
        assert (2 * g).denominator == 1


@pytest.mark.parametrize("R", range(0, 7))
def test_tree_four_point_defect_zero(R):
    rep = four_point_scan(enumerate_ball(F2, R), samples=200_000)
    assert rep.max_defect == 0
    assert rep.mode == ("exhaustive" if R <= 4 else "sampled")


def test_four_point_floors_at_one():
    assert estimate_delta_4point(enumerate_ball(F2, 4)).delta == 1
    assert estimate_delta_4point(enumerate_ball(F2, 0)).delta == 1


def test_four_point_matches_loop_oracle():
    b = enumerate_ball(PSL, 3)
    D = b.distance_matrix.tolist()
    assert Fraction(four_point_scan(b).max_defect) == four_point_defect(D)


def test_psl_exhaustive_delta():
    rep = four_point_scan(enumerate_ball(PSL, 5))
    assert rep.mode == "exhaustive" and rep.tuples_checked == 34 ** 4
    assert default_delta(PSL).delta == max(1, rep.max_defect)


def test_default_delta_free():
    d = default_delta(F2)
    assert d.delta == 1 and d.provenance == "paper-default-free-group"


def test_geodesic_examples():
    e = F2.identity
    assert [str(v) for v in geodesic_between(e, E("ab"), enumerate_ball(F2, 2)).vertices] == \
        ["e", "a", "ab"]
    x = E("ab")
    assert geodesic_between(x, x, enumerate_ball(F2, 2)).vertices == (x,)
    s, t = PSL.element("s"), PSL.element("t")
    geo = geodesic_between(s, t, enumerate_ball(PSL, 2))
    assert geo.length == 2 and [str(v) for v in geo.vertices] == ["s", "e", "t"]


def test_geodesic_leaving_ball():
    b = enumerate_ball(PSL, 1)
    # s to tt: the only geodesics pass through e, inside; s to ts is outside
    with pytest.raises(GuardError):
        geodesic_between(PSL.element("s"), PSL.element("ts"), b)


def test_geodesic_bound_examples():
    b = enumerate_ball(F2, 3)
    x, y = E("ab"), E("bA")
    for z in list(b)[:30]:
        rep = check_geodesic_distance_bound(x, y, z, enumerate_ball(F2, 6), 1)
        assert rep.left_slack == 0 and rep.holds
    rep = check_geodesic_distance_bound(x, y, F2.identity, b, 1)
    assert rep.distance_to_geodesic == 0 and rep.gromov == 0


@pytest.mark.parametrize("m", [F2, PSL])
def test_geodesic_bound_scan(m):
    rep = geodesic_bound_scan(m, 3)
    assert rep.holds and rep.tuples_checked == len(enumerate_ball(m, 3)) ** 3


def test_concatenation_example():
    e = F2.identity
    rep = check_concatenation_criterion(e, E("a"), E("abb"), E("abba"), 0, 1)
    assert rep.hypotheses_met and rep.lhs == 4 and rep.rhs == 6
    x = E("a")
    assert check_concatenation_criterion(x, x, x, x, 0, 1).status == "hypotheses-not-met"


def test_concatenation_ball_guard():
    with pytest.raises(GuardError):
        check_concatenation_criterion(F2.identity, E("a"), E("abb"), E("abba"), 0, 1,
                                      enumerate_ball(F2, 3))


@pytest.mark.parametrize("m", [F2, PSL])
def test_concatenation_scan(m):
    rep = concatenation_scan(m, 3, (0, 1))
    assert rep.holds and rep.hypotheses_met > 0


def test_concatenation_scan_matches_pointwise():
    b = list(enumerate_ball(PSL, 2))
    count = 0
    for x, y, z, w in itertools.product(b, repeat=4):
        rep = check_concatenation_criterion(x, y, z, w, 0, 1)
        count += rep.hypotheses_met
    assert concatenation_scan(PSL, 2, (0,), 1).hypotheses_met == count
