import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigidlim.errors import CapacityError, InvalidWordError
from rigidlim.ifs.system import word_sup_norm
from rigidlim.symbolic import (
    Alphabet,
    concat,
    cylinders_at_depth,
    project,
    random_codes,
    word_index,
    words_array,
)


def test_concat_examples():
    assert concat((0, 1), (1,)) == (0, 1, 1)
    assert concat((), (2, 0)) == (2, 0)
    assert concat((1,), ()) == (1,)


def test_concat_checks_alphabet():
    with pytest.raises(InvalidWordError):
        concat((0, 3), (1,), Alphabet(3))
    with pytest.raises(InvalidWordError):
        concat((-1,), ())


def test_alphabet_needs_two_symbols():
    with pytest.raises(ValueError):
        Alphabet(1)
    with pytest.raises(InvalidWordError):
        Alphabet(2).word((0, 2))


def test_cylinders_counts():
    words = cylinders_at_depth(Alphabet(2), 3)
    assert len(words) == 8
    assert words[0] == (0, 0, 0) and words[-1] == (1, 1, 1)
    assert len(cylinders_at_depth(Alphabet(8), 2)) == 64
    assert cylinders_at_depth(Alphabet(2), 0) == [()]


def test_cylinders_cap():
    with pytest.raises(CapacityError):
        cylinders_at_depth(Alphabet(10), 9)
    with pytest.raises(CapacityError):
        words_array(10, 9)


@given(size=st.integers(2, 5), n=st.integers(0, 5))
def test_enumeration_complete(size, n):
    words = cylinders_at_depth(Alphabet(size), n)
    assert len(words) == size**n == len(set(words))
    arr = words_array(size, n)
    assert [tuple(w) for w in arr.tolist()] == words
    assert [word_index(w, size) for w in words] == list(range(size**n))


def test_random_codes_seeded():
    a = random_codes(3, 10, 5, seed=7)
    b = random_codes(3, 10, 5, seed=7)
    assert np.array_equal(a, b) and a.shape == (5, 10) and a.max() < 3


def test_project_cantor(systems):
    cantor = systems["cantor"]
    p = project(cantor, (0, 0, 0, 0))
    assert abs(p.point[0]) <= 3.0**-4
    p = project(cantor, (0, 1, 1, 1, 1, 1))
    assert abs(p.point[0] - 1 / 3) <= 3.0**-6
    for n in (1, 5, 12):
        assert abs(project(cantor, (1,) * n).point[0] - 1.0) <= 3.0**-n


def test_project_errors(systems):
    with pytest.raises(InvalidWordError):
        project(systems["cantor"], (0, 2))
    with pytest.raises(InvalidWordError):
        project(systems["cantor"], ())


def test_radius_bound_covers_cylinder(systems):
    # every deeper representative under word lies within its radius bound
    koch = systems["koch"]
    for word in [(0,), (1, 2), (3, 1, 0)]:
        p = project(koch, word)
        tails = words_array(4, 4)
        for tail in tails[::17]:
            q = project(koch, word + tuple(tail))
            assert np.linalg.norm(q.point - p.point) <= p.radius_bound + 1e-12


@settings(max_examples=40, deadline=None)
@given(
    name=st.sampled_from(["cantor", "koch", "dust", "conjugated_dust"]),
    i=st.lists(st.integers(0, 7), min_size=1, max_size=3),
    j=st.lists(st.integers(0, 7), min_size=1, max_size=3),
)
def test_nesting_and_shrinking(systems, name, i, j):
    system = systems[name]
    i = tuple(s % system.size for s in i)
    j = tuple(s % system.size for s in j)
    pi, pij = project(system, i), project(system, i + j)
    # L1 nesting: the two representative balls meet
    gap = np.linalg.norm(pi.point - pij.point)
    assert gap <= pi.radius_bound + pij.radius_bound + 1e-12
    # shrinking with length
    d_hat = system.constants().d_hat
    assert pij.radius_bound <= d_hat * system.s_up ** len(i + j) * 1.01 + 1e-15
    assert pij.radius_bound <= pi.radius_bound * (1 + 1e-12) or not system.is_similarity
    assert word_sup_norm(system, i + j) <= word_sup_norm(system, i) * 1.02
