import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperwalk.exceptions import BoundViolation, GuardError
from hyperwalk.groups import FreeGroup, FreeProductCyclics, enumerate_ball, surface_group
from hyperwalk.powers import (
    class_key,
    conjugacy_class_of,
    conjugacy_power_growth,
    cyclic_reduce,
    decompose_conjugate,
    decompose_power,
    is_proper_power,
    power_decomposition_sweep,
    primitive_root_length,
    proper_power_census,
    random_cyclically_reduced,
    smallest_period,
)

from oracles import brute_force_proper_powers, rotation_key

F2 = FreeGroup(2)
PSL = FreeProductCyclics((2, 3), names="st")
E = F2.element


@pytest.fixture(scope="module")
def surface():
    return surface_group(2, 4)


# -- periods -----------------------------------------------------------------

def test_period_helpers():
    assert smallest_period("abab") == 2
    assert smallest_period("aba") == 2
    assert primitive_root_length("aba") == 3
    assert primitive_root_length("aaaa") == 1
    assert primitive_root_length("") == 0


@given(st.text("ab", min_size=1, max_size=12), st.integers(1, 4))
def test_root_divides_repetition(u, d):
    r = primitive_root_length(u * d)
    assert (u * d)[:r] * (len(u) * d // r) == u * d
    assert len(u) % r == 0 or r <= len(u)


# -- cyclic reduction and classes ----------------------------------------------

@pytest.mark.parametrize("word,core,conj", [
    ("aba^-1", "b", "a"), ("ab", "ab", "e"), ("baaB", "aa", "b"),
])
def test_cyclic_reduce_examples(word, core, conj):
    c, g = cyclic_reduce(E(word))
    assert (str(c), str(g)) == (core, conj)
    assert g * c * g.inverse() == E(word)


def test_class_examples():
    C = conjugacy_class_of(E("aba^-1"))
    assert C.length == 1 and str(C.representative) == "b"
    assert {str(h) for h in C.minimal} == {"b"} and E("b") in C.cyclic_conjugates
    C = conjugacy_class_of(E("ab"))
    assert {str(h) for h in C.minimal} == {"ab", "ba"}
    assert conjugacy_class_of(PSL.element("s")).length == 1


def test_class_sets_lie_in_class():
    for x in (E("ab"), E("abA"), PSL.element("st")):
        C = conjugacy_class_of(x)
        assert all(h in C for h in C.cyclic_conjugates)
        assert all(h.length <= 9 * C.delta for h in C.cyclic_conjugates)
        assert x in C


def test_long_class_uses_rotations():
    x = E("ab" * 6)
    C = conjugacy_class_of(x)
    assert not C.short_case
    assert {str(h) for h in C.cyclic_conjugates} == {"ab" * 6, "ba" * 6}


@settings(max_examples=200)
@given(st.lists(st.integers(0, 3), max_size=14).map(tuple), st.lists(st.integers(0, 3), max_size=5).map(tuple))
def test_class_key_is_conjugation_invariant(w, g):
    x, g = F2.canonicalize(w), F2.canonicalize(g)
    assert class_key(g * x * g.inverse()) == class_key(x)
    assert class_key(x).length == cyclic_reduce(x)[0].length


def test_surface_class_guard(surface):
    with pytest.raises(GuardError):
        conjugacy_class_of(surface.element("abc"))
    C = conjugacy_class_of(surface.element("a"))
    assert C.length == 1 and str(C.representative) == "a"


# -- proper powers -------------------------------------------------------------

def test_power_examples():
    w = is_proper_power(E("abab"))
    assert (str(w.base), w.exponent, str(w.conjugator)) == ("ab", 2, "e")
    assert is_proper_power(E("ab")) is None
    w = is_proper_power(E("baaB"))
    assert str(w.base) == "baB" and w.exponent == 2 and w.check()
    w = is_proper_power(F2.identity)
    assert w.by_convention and w.check()


def test_torsion_witnesses():
    t = PSL.element("t")
    w = is_proper_power(t)
    assert str(w.base) == "tt" and w.exponent == 2 and w.check()
    assert is_proper_power(PSL.element("s")).check()
    assert is_proper_power(PSL.element("st")) is None
    assert is_proper_power(PSL.element("stst")).exponent == 2


@pytest.mark.parametrize("R", [4, 6, 8])
def test_free_matches_brute_force(R):
    found = {str(x) if not x.is_identity else "" for x in enumerate_ball(F2, R)
             if is_proper_power(x) is not None}
    assert found == brute_force_proper_powers(2, R)


def test_brute_force_key_sanity():
    assert rotation_key("baaB") == rotation_key("aa")


@pytest.mark.parametrize("m,R", [(F2, 6), (PSL, 8)])
def test_witnesses_reassemble(m, R):
    for x in enumerate_ball(m, R):
        w = is_proper_power(x)
        if w is not None:
            assert w.check()


def test_census_examples():
    assert {str(x) for x in proper_power_census(enumerate_ball(F2, 0)).elements} == {"e"}
    c = proper_power_census(enumerate_ball(PSL, 2))
    assert {"e", "s", "t", "tt"} <= {str(x) for x in c.elements}
    assert len(c) > len(proper_power_census(enumerate_ball(F2, 2)).elements & {F2.identity})


def test_census_free_r4():
    c = proper_power_census(enumerate_ball(F2, 4))
    assert {str(x) if not x.is_identity else "" for x in c.elements} == brute_force_proper_powers(2, 4)
    assert c.complete


def test_census_rows():
    rows = proper_power_census(enumerate_ball(F2, 2)).rows()
    assert rows[0] == ("e", 1, "e", 2, "e", 1)
    assert len(rows) == 17
    assert ("aa", 1, "a", 2, "e", 1) in rows


def test_table_census(surface):
    b = enumerate_ball(surface, 4)
    c = proper_power_census(b, delta=1)
    for w in c.witnesses.values():
        assert w.check()
    assert not c.complete
    again = proper_power_census(b, delta=1)
    assert again.witnesses == c.witnesses


# -- decompositions --------------------------------------------------------------

def test_decompose_conjugate_examples():
    dec = decompose_conjugate(E("aba^-1"), delta=1)
    assert (str(dec.g), str(dec.h), dec.ledger) == ("a", "b", (1, 1, 1))
    assert dec.slack == 14
    dec = decompose_conjugate(E("ab"), delta=1)
    assert dec.g.is_identity and dec.slack == 14


@pytest.mark.parametrize("m,R", [(F2, 6), (PSL, 6)])
def test_conjugate_bound_on_ball(m, R):
    for x in enumerate_ball(m, R):
        dec = decompose_conjugate(x)
        assert dec.g * dec.h * dec.g.inverse() == x
        assert dec.slack >= 0
        if m is F2:
            assert dec.defect == 0


def test_conjugate_bound_surface(surface):
    for x in enumerate_ball(surface, 1):
        dec = decompose_conjugate(x, delta=1)
        assert dec.g * dec.h * dec.g.inverse() == x and dec.slack >= 0


def test_decompose_power_examples():
    h = E("ab" * 8)
    dec = decompose_power(h, 2, F2.identity, 1)
    assert dec.ledger == (0, 16, 0, 16, 0) and dec.bound == 32 + 34
    dec = decompose_power(h, 3, F2.identity, 1)
    assert sum(dec.ledger) == 48 and dec.bound == 48 + 34
    assert dec.status == "holds" and dec.power_slack == 8


def test_decompose_power_hypothesis():
    dec = decompose_power(E("ab"), 2, E("a"), 1)
    assert not dec.hypotheses_met and dec.status == "hypothesis-not-met"
    with pytest.raises(ValueError):
        decompose_power(E("ab"), 1, F2.identity, 1)


def test_decompose_power_violation_raises():
    # an absurd negative delta forces the bound below the ledger
    with pytest.raises(BoundViolation):
        decompose_power(E("ab" * 8), 2, E("a"), -1)


def test_power_sweep_small():
    rep = power_decomposition_sweep(F2, samples=20, seed=3, radius=2)
    assert rep["status"] == "holds"
    assert rep["tuples_checked"] == 20 * 2 * 17
    assert rep["hypotheses_met"] == rep["tuples_checked"]
    assert rep == power_decomposition_sweep(F2, samples=20, seed=3, radius=2)


def test_random_cyclically_reduced():
    rng = np.random.default_rng(0)
    for L in (1, 2, 16, 20):
        x = random_cyclically_reduced(F2, L, rng)
        assert x.length == L and cyclic_reduce(x)[0] == x


# -- growth ----------------------------------------------------------------------

def test_growth_examples():
    g = conjugacy_power_growth(conjugacy_class_of(E("ab")), 5)
    assert g.lengths == (2, 4, 6, 8, 10)
    g = conjugacy_power_growth(conjugacy_class_of(PSL.element("s")), 3)
    assert g.lengths[:2] == (1, 0) and not g.checked and g.note
    h = conjugacy_class_of(E("ab" * 8), delta=1)
    g = conjugacy_power_growth(h, 3)
    assert g.checked and g.lengths == (16, 32, 48)
