"""Finite alphabets, words, admissible languages and letter weights.

Words are plain tuples of letter indices into an :class:`Alphabet`; the empty
tuple is the empty word. All operations here are pure and all containers are
immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import ValidationError

Word = tuple[int, ...]

EPSILON: Word = ()


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite alphabet with a letter-name table.

    The index order of ``names`` is the total order used by the lexicographic
    word enumeration.
    """

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise ValidationError("alphabet must have at least one letter")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("alphabet letters must be distinct")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown letter {name!r}") from None

    def word(self, names: Iterable[str]) -> Word:
        """Build a word from letter names, validating membership."""
        return tuple(self.index(s) for s in names)

    def word_str(self, word: Word) -> str:
        """Dotted-name form of a word; the empty word renders as ''."""
        return ".".join(self.names[i] for i in word)

    def parse_word(self, text: str) -> Word:
        if text == "":
            return EPSILON
        return self.word(text.split("."))

    def validate_word(self, word: Word) -> None:
        for i in word:
            if not 0 <= i < len(self.names):
                raise ValidationError(f"letter index {i} outside alphabet")


def count_words(d: int, N: int) -> int:
    """Number of non-empty words of length <= N over d letters."""
    return sum(d**k for k in range(1, N + 1))


def iter_words(alphabet: Alphabet, N: int) -> Iterator[Word]:
    """Yield all words of length <= N in lexicographic order.

    Shorter words come first; words of equal length are ordered by the first
    differing letter under the alphabet order. The first word is the empty
    word.
    """
    if N < 0:
        raise ValidationError("N must be nonnegative")
    d = len(alphabet)
    yield EPSILON
    level: list[Word] = [EPSILON]
    for _ in range(N):
        nxt = []
        for w in level:
            for s in range(d):
                nxt.append(w + (s,))
        yield from nxt
        level = nxt


def enumerate_words(alphabet: Alphabet, N: int) -> list[Word]:
    """All words of length <= N in lexicographic order (eager form)."""
    return list(iter_words(alphabet, N))


@dataclass(frozen=True)
class AdmissibleLanguage:
    """Pair-induced language: w = s1..sk is admissible iff every (si, si+1)
    is in ``pairs``. Single letters and the empty word are always admissible.
    """

    size: int
    pairs: frozenset[tuple[int, int]]

    @classmethod
    def full(cls, size: int) -> "AdmissibleLanguage":
        return cls(size, frozenset((a, b) for a in range(size) for b in range(size)))

    @classmethod
    def from_pairs(cls, size: int, pairs: Iterable[tuple[int, int]]) -> "AdmissibleLanguage":
        ps = frozenset((int(a), int(b)) for a, b in pairs)
        for a, b in ps:
            if not (0 <= a < size and 0 <= b < size):
                raise ValidationError(f"pair ({a},{b}) outside alphabet of size {size}")
        return cls(size, ps)

    def is_admissible(self, word: Word) -> bool:
        return all((word[i], word[i + 1]) in self.pairs for i in range(len(word) - 1))

    def allowed_next(self, letter: int) -> tuple[int, ...]:
        return tuple(b for (a, b) in sorted(self.pairs) if a == letter)

    def iter_admissible(self, N: int, min_len: int = 1) -> Iterator[Word]:
        """Admissible words with min_len <= |w| <= N, in lexicographic order."""
        if min_len <= 0:
            yield EPSILON
        level: list[Word] = [EPSILON]
        for length in range(1, N + 1):
            nxt = []
            for w in level:
                if w:
                    succ = (b for b in range(self.size) if (w[-1], b) in self.pairs)
                else:
                    succ = range(self.size)
                for s in succ:
                    nxt.append(w + (s,))
            if length >= min_len:
                yield from nxt
            level = nxt


def is_admissible(word: Word, language: AdmissibleLanguage) -> bool:
    """True iff every consecutive letter pair of ``word`` is admissible."""
    return language.is_admissible(word)


@dataclass(frozen=True)
class LetterWeights:
    """Strictly positive per-letter weights; p of a word is the product over
    its letters (1 for the empty word, 0 off the admissible language)."""

    values: np.ndarray = field()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("weights must be a nonempty vector")
        if not np.all(v > 0):
            raise ValidationError("letter weights must be strictly positive")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def word_weight(self, word: Word) -> float:
        return float(np.prod([self.values[i] for i in word])) if word else 1.0


def path_weight(word: Word, weights: LetterWeights, language: AdmissibleLanguage) -> float:
    """Product of letter weights if ``word`` is admissible, else 0."""
    if not language.is_admissible(word):
        return 0.0
    return weights.word_weight(word)
