"""User lexicon: forward maximum matching and emission biasing.

Matching produces a B/M/E/S skeleton over the input. Each position covered
by a matched word receives a nonnegative bias (max - mean of its emission
row, scaled by the lexicon weight) on the labels agreeing with the skeleton,
nudging the decoder toward the dictionary segmentation without overriding
the model elsewhere.
"""

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .core import LabelScheme
from .errors import EmptyWord, NegativeWeight

DEFAULT_WEIGHT = 0.05


class Lexicon:
    """User word set with a bias weight.

    Single-character entries are accepted but inert: they neither extend
    matching nor attract bias, since an uncovered character is labeled S
    anyway. Mutations must not interleave with decodes; concurrent decodes
    over a frozen lexicon are safe.
    """

    def __init__(self, words: Iterable[str] = (), weight: float = DEFAULT_WEIGHT):
        self._words: set[str] = set()
        self._max_len = 0
        self._weight = DEFAULT_WEIGHT
        self.set_weight(weight)
        for word in words:
            self.add_word(word)

    @classmethod
    def from_file(cls, path, weight: float = DEFAULT_WEIGHT) -> "Lexicon":
        """One word per line, UTF-8; blank lines ignored."""
        lex = cls(weight=weight)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.strip()
                if word:
                    lex.add_word(word)
        return lex

    def add_word(self, word: str) -> None:
        if not word:
            raise EmptyWord("cannot add an empty word")
        self._words.add(word)
        self._max_len = max(self._max_len, len(word))

    def set_weight(self, weight: float) -> None:
        if weight < 0:
            raise NegativeWeight(f"weight must be >= 0, got {weight}")
        self._weight = float(weight)

    @property
    def weight(self) -> float:
        return self._weight

    @property
    def max_word_len(self) -> int:
        return self._max_len

    def __contains__(self, word: str) -> bool:
        return word in self._words

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._words))


def max_match(chars: str, lexicon: Lexicon) -> list[str]:
    """Forward maximum matching: left to right, longest word first.

    Matched k-char words emit B, M*(k-2), E; everything else emits S.
    """
    n = len(chars)
    labels: list[str] = []
    i = 0
    while i < n:
        length = 1
        for k in range(min(lexicon.max_word_len, n - i), 1, -1):
            if chars[i:i + k] in lexicon:
                length = k
                break
        if length == 1:
            labels.append("S")
        else:
            labels.extend(["B"] + ["M"] * (length - 2) + ["E"])
        i += length
    return labels


@dataclass(frozen=True)
class BiasVector:
    """Per-position bias magnitudes plus the skeleton labels they push toward."""

    values: np.ndarray
    targets: tuple[str, ...]

    @property
    def covered(self) -> np.ndarray:
        """Positions inside a matched lexicon word (skeleton label != S)."""
        return np.array([t != "S" for t in self.targets], dtype=bool)


def compute_bias(emissions, skeleton: Iterable[str], weight: float) -> BiasVector:
    """Bias b_t = (max - mean of the position's label scores) * weight.

    Only positions covered by a matched word get a nonzero bias; default-S
    positions are left to the model's own judgment.
    """
    em = np.asarray(emissions, dtype=np.float64)
    targets = tuple(skeleton)
    if em.ndim != 2 or em.shape[0] != len(targets):
        raise ValueError("emissions must be (T, L) matching the skeleton length")
    spread = em.max(axis=1) - em.mean(axis=1)
    covered = np.array([t != "S" for t in targets], dtype=bool)
    values = np.where(covered, spread * weight, 0.0)
    return BiasVector(values, targets)


def bias_matrix(bias: BiasVector, scheme: LabelScheme) -> np.ndarray:
    """Expand a bias vector to (T, L): each covered position's bias lands on
    every label whose positional prefix matches the skeleton label."""
    t_len = len(bias.targets)
    out = np.zeros((t_len, len(scheme)), dtype=np.float64)
    positionals = [scheme.positional(label) for label in scheme.labels]
    for t, target in enumerate(bias.targets):
        if bias.values[t] == 0.0:
            continue
        for j, pos in enumerate(positionals):
            if pos == target:
                out[t, j] = bias.values[t]
    return out
