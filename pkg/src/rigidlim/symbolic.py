"""Words over a finite alphabet, cylinder enumeration and the coding map."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidWordError
from .ifs.system import ENUMERATION_CAP, IFSystem, check_capacity, check_word, compose, word_sup_norm

Word = tuple  # tuple of ints; the empty tuple is the empty word


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) < 2:
            raise ValueError("an alphabet needs at least two symbols")

    def word(self, symbols):
        return check_word(symbols, self.size)


@dataclass(frozen=True, eq=False)
class CodedPoint:
    word: Word
    point: np.ndarray
    radius_bound: float


def concat(i, j, alphabet: Alphabet | None = None) -> Word:
    """Juxtapose two words."""
    i, j = tuple(i), tuple(j)
    if alphabet is not None:
        check_word(i, alphabet.size)
        check_word(j, alphabet.size)
    elif any(int(s) < 0 for s in i + j):
        raise InvalidWordError("negative symbol")
    return i + j


def cylinders_at_depth(alphabet: Alphabet, n: int, cap: int = ENUMERATION_CAP) -> list:
    """All words of length ``n`` in lexicographic order."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if alphabet.size**n > cap:
        check_capacity(alphabet.size, n)
    return list(itertools.product(range(alphabet.size), repeat=n))


def word_index(word, size):
    """Lexicographic index of ``word`` among words of its length."""
    idx = 0
    for s in word:
        idx = idx * size + int(s)
    return idx


def words_array(size, n):
    """``(size**n, n)`` integer array of all words, lexicographic."""
    check_capacity(size, n)
    if n == 0:
        return np.zeros((1, 0), dtype=int)
    idx = np.arange(size**n)
    cols = [(idx // size ** (n - 1 - k)) % size for k in range(n)]
    return np.stack(cols, axis=1)


def random_codes(size, length, count, seed):
    """``count`` random code prefixes of the given length (seeded)."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, size, size=(count, length))


def project(system: IFSystem, word) -> CodedPoint:
    """Point of the cylinder X_word approximating pi(word, ...)."""
    word = check_word(word, system.size)
    if not word:
        raise InvalidWordError("projection needs a nonempty word")
    point, _ = compose(system, word, system.anchor)
    bound = system.constants().d_hat * word_sup_norm(system, word)
    return CodedPoint(word, point, bound)
