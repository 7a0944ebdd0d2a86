import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperwalk.exceptions import (
    BackendMismatchError,
    BallEscapeError,
    GuardError,
    InvalidWordError,
    SmallCancellationError,
)
from hyperwalk.groups import (
    FreeGroup,
    FreeProductCyclics,
    Presentation,
    SmallCancellationBall,
    enumerate_ball,
    free_ball_size,
    parse_group,
    parse_presentation,
    surface_group,
)

from oracles import cayley_graph, free_words, reduce_str

F2 = FreeGroup(2)
PSL = FreeProductCyclics((2, 3), names="st")


@pytest.fixture(scope="module")
def surface():
    return surface_group(2, 4)


def backends(surface):
    return [F2, PSL, surface]


# -- examples ---------------------------------------------------------------

def test_free_reduction_examples():
    assert str(F2.element("a b b⁻¹ a")) == "aa"
    assert str(F2.element("a b") * F2.element("b^-1 a")) == "aa"
    assert str(F2.element("ab").inverse()) == "BA"
    assert F2.element("aba^-1").length == 3


def test_empty_word_is_identity(surface):
    for m in backends(surface):
        assert m.element("").is_identity
        assert m.element("") == m.identity
        assert m.identity.inverse() == m.identity


def test_torsion_examples():
    t, s = PSL.element("t"), PSL.element("s")
    assert PSL.element("ttt").is_identity
    assert str(PSL.element("st") * PSL.element("tt")) == "s"
    assert str(t.inverse()) == "tt"
    assert t.inverse().length == 1
    assert (t ** 3).is_identity and (s ** 2).is_identity


def test_powers():
    ab = F2.element("ab")
    assert str(ab ** 2) == "abab"
    assert ab ** 1 == ab
    assert (ab ** 0).is_identity


def test_surface_relator_lengths(surface):
    assert surface.element("abABcdCD").is_identity
    assert surface.element("abABcdCD").length == 0
    x = surface.element("abABcdC")
    assert x == surface.element("d") and x.length == 1


def test_invalid_letters_and_mismatch():
    with pytest.raises(InvalidWordError):
        F2.element("az")
    with pytest.raises(InvalidWordError):
        F2.canonicalize((0, 7))
    with pytest.raises(BackendMismatchError):
        F2.multiply(F2.element("a"), FreeGroup(3).element("a"))


def test_ball_escape_is_an_error(surface):
    with pytest.raises(BallEscapeError):
        surface.element("acacac")


def test_non_c16_presentation_rejected():
    with pytest.raises(SmallCancellationError, match="piece"):
        SmallCancellationBall(Presentation(2, ((0, 2, 1, 3),)), 2)


def test_presentation_roundtrip():
    text = "rank=4  # genus two\nabABcdCD\n"
    p = parse_presentation(text)
    assert p.rank == 4 and len(p.relators) == 1
    assert parse_presentation(p.format()) == p


def test_parse_group_specs():
    assert parse_group("free:3").backend_id == "free:3"
    assert parse_group("cyclics:2,3").backend_id == "cyclics:2,3"
    assert parse_group("cyclics:2+1").rank == 2
    assert parse_group("surface:2", 2).validated_radius == 2


# -- balls ------------------------------------------------------------------

@pytest.mark.parametrize("R", range(0, 9))
def test_free_ball_sizes(R):
    assert len(enumerate_ball(F2, R)) == free_ball_size(2, R) == len(free_words(2, R))


def test_small_balls():
    assert len(enumerate_ball(F2, 1)) == 5
    assert len(enumerate_ball(F2, 2)) == 17
    for m in (F2, PSL):
        assert [str(x) for x in enumerate_ball(m, 0)] == ["e"]


def test_radius_guard(surface):
    with pytest.raises(GuardError):
        enumerate_ball(surface, 5)


def test_ball_matches_oracle_words():
    assert {str(x) for x in enumerate_ball(F2, 4)} == {reduce_str(w) or "e" for w in free_words(2, 4)}


@pytest.mark.parametrize("which", ["psl", "surface"])
def test_ball_lengths_agree_with_networkx_bfs(which, surface):
    m = PSL if which == "psl" else surface
    R = 6 if which == "psl" else 4
    b = enumerate_ball(m, R)

    def neighbours(i):
        return [int(j) for j in b.table[i] if j >= 0]

    G = cayley_graph(range(len(b)), neighbours)
    dist = __import__("networkx").single_source_shortest_path_length(G, 0)
    # inside the ball, BFS distance from e can only be realised by paths in the ball
    assert all(dist[i] == b.lengths[i] for i in range(len(b)))


def test_ball_closed_under_inversion(surface):
    for m, R in ((F2, 4), (PSL, 6), (surface, 4)):
        b = enumerate_ball(m, R)
        assert all(x.inverse() in b for x in b)


# -- properties -------------------------------------------------------------

def words(rank, max_len=40):
    return st.lists(st.integers(0, 2 * rank - 1), max_size=max_len).map(tuple)


@given(words(2))
def test_free_canonicalize_idempotent(w):
    x = F2.canonicalize(w)
    assert F2.canonicalize(x.word) == x


@given(words(2))
def test_psl_canonicalize_idempotent(w):
    x = PSL.canonicalize(w)
    assert PSL.canonicalize(x.word) == x


@given(words(2))
def test_free_matches_string_reduction(w):
    text = "".join("aAbB"[l] for l in w)
    assert str(F2.canonicalize(w)).replace("e", "") == reduce_str(text)


@given(words(2, 30))
def test_psl_length_is_geodesic_word_length(w):
    x = PSL.canonicalize(w)
    assert len(PSL.geodesic_word(x.word)) == x.length


@settings(max_examples=50)
@given(words(4, 6))
def test_surface_idempotent(w):
    surface = _SURFACE
    try:
        x = surface.canonicalize(w)
    except BallEscapeError:
        return
    assert surface.canonicalize(x.word) == x


_SURFACE = surface_group(2, 4)


@pytest.mark.parametrize("which", ["free", "psl", "surface"])
def test_associativity(which):
    rng = random.Random(1)
    m = {"free": F2, "psl": PSL, "surface": _SURFACE}[which]
    pool = list(enumerate_ball(m, 1 if which == "surface" else 5))
    for _ in range(10_000):
        x, y, z = (rng.choice(pool) for _ in range(3))
        assert (x * y) * z == x * (y * z)


def test_inverse_products():
    rng = random.Random(2)
    pool = list(enumerate_ball(F2, 6))
    for _ in range(100):
        x = rng.choice(pool)
        assert (x * x.inverse()).is_identity


@pytest.mark.parametrize("which", ["free", "psl", "surface"])
def test_triangle_inequality(which):
    m = {"free": F2, "psl": PSL, "surface": _SURFACE}[which]
    b = enumerate_ball(m, 2 if which == "surface" else 4)
    for x in b:
        for y in b:
            assert (x * y).length <= x.length + y.length
            assert abs(x.length - y.length) <= (x * y.inverse()).length


@pytest.mark.parametrize("m", [F2, PSL])
def test_inversion_isometry(m):
    assert all(x.inverse().length == x.length for x in enumerate_ball(m, 6))


def test_surface_equality_agrees_with_dehn():
    m = surface_group(2, 3)
    b = enumerate_ball(m, 3)
    words = [x.word for x in b]
    for i, u in enumerate(words):
        for j, v in enumerate(words):
            assert m.equal_by_dehn(u, v) == (i == j)


def test_distance_matrix_matches_generic():
    b = enumerate_ball(F2, 3)
    D = b.distance_matrix
    for i in range(0, len(b), 7):
        for j in range(0, len(b), 5):
            assert D[i, j] == (b.elements[i].inverse() * b.elements[j]).length
    assert np.array_equal(D, D.T)
