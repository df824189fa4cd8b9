"""Label schemes, linguistic structures, vocabulary and corpus tags.

A segmentation is encoded per character with positional labels B/M/E/S
(begin / middle / end / single). Word-level categories ride along as
cross-labels ``P-C`` (e.g. ``B-NN``); NER additionally uses a lone ``O``
for characters outside any entity. Dependency trees are stored as one
head id and one relation per token, with 0 denoting the virtual root.

Everything here is immutable after construction and safe for unrestricted
concurrent reads.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import IllegalSequence, InvalidGoldTree, UnknownTag


class Task(Enum):
    """The four analysis tasks."""

    CWS = "CWS"
    POS = "POS"
    NER = "NER"
    DEP = "DEP"


PAD = "<pad>"
UNK = "<unk>"

_POSITIONALS = frozenset("BMESO")
_START_OK = frozenset("BSO")
_END_OK = frozenset("ESO")


def split_label(label: str) -> tuple[str, Optional[str]]:
    """Split a label into (positional, category).

    ``"B-NN"`` -> ``("B", "NN")``; bare ``"S"`` or ``"O"`` -> category None.
    """
    head, sep, rest = label.partition("-")
    if head not in _POSITIONALS or (sep and not rest):
        raise ValueError(f"not a valid label: {label!r}")
    return head, (rest if sep else None)


def legal_start(label: str) -> bool:
    return split_label(label)[0] in _START_OK


def legal_end(label: str) -> bool:
    return split_label(label)[0] in _END_OK


def legal_transition(prev: str, cur: str) -> bool:
    """Whether ``prev -> cur`` keeps a label sequence well formed.

    B and M continue a word, so they must be followed by M/E of the same
    category; E, S and O close a unit, so anything that starts one (B, S,
    O) may follow.
    """
    p_pos, p_cat = split_label(prev)
    c_pos, c_cat = split_label(cur)
    if p_pos in ("B", "M"):
        return c_pos in ("M", "E") and p_cat == c_cat
    return c_pos in ("B", "S", "O")


def _check_sequence(labels: Sequence[str]) -> None:
    if not labels:
        return
    if not legal_start(labels[0]):
        raise IllegalSequence(f"label {labels[0]!r} cannot start a sequence")
    for i in range(len(labels) - 1):
        if not legal_transition(labels[i], labels[i + 1]):
            raise IllegalSequence(
                f"illegal transition {labels[i]!r} -> {labels[i + 1]!r} at position {i + 1}"
            )
    if not legal_end(labels[-1]):
        raise IllegalSequence(f"label {labels[-1]!r} cannot end a sequence")


class LabelScheme:
    """Tag inventory for one sequence-labeling task plus its legality rules.

    Label order is sorted once at construction so transition-matrix indices
    stay stable across save/load.
    """

    def __init__(self, task: Task, labels: Iterable[str]):
        self.task = task
        self.labels: tuple[str, ...] = tuple(sorted(set(labels)))
        if not self.labels:
            raise ValueError("a scheme needs at least one label")
        for label in self.labels:
            split_label(label)  # validates shape
        self.index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def cws(cls) -> "LabelScheme":
        return cls(Task.CWS, "BMES")

    @classmethod
    def cross(cls, task: Task, categories: Iterable[str]) -> "LabelScheme":
        cats = sorted(set(categories))
        if not cats:
            raise ValueError("cross-label scheme needs at least one category")
        return cls(task, [f"{p}-{c}" for p in "BMES" for c in cats])

    @classmethod
    def ner(cls, categories: Iterable[str]) -> "LabelScheme":
        cats = sorted(set(categories))
        if not cats:
            raise ValueError("NER scheme needs at least one entity category")
        return cls(Task.NER, [f"{p}-{c}" for p in "BMES" for c in cats] + ["O"])

    def positional(self, label: str) -> str:
        return split_label(label)[0]

    def category(self, label: str) -> Optional[str]:
        return split_label(label)[1]

    @property
    def categories(self) -> tuple[str, ...]:
        cats = {c for label in self.labels if (c := self.category(label)) is not None}
        return tuple(sorted(cats))

    def legal_start(self, label: str) -> bool:
        return legal_start(label)

    def legal_end(self, label: str) -> bool:
        return legal_end(label)

    def legal_transition(self, prev: str, cur: str) -> bool:
        return legal_transition(prev, cur)

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __repr__(self) -> str:
        return f"LabelScheme({self.task.value}, {len(self.labels)} labels)"


@dataclass(frozen=True)
class Segmentation:
    """A character string split into contiguous token spans."""

    chars: str
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple((int(s), int(e)) for s, e in self.spans))
        pos = 0
        for start, end in self.spans:
            if start != pos or end <= start:
                raise ValueError(f"spans must tile the string; bad span ({start}, {end})")
            pos = end
        if pos != len(self.chars):
            raise ValueError("spans do not cover the full string")

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Segmentation":
        spans = []
        pos = 0
        for tok in tokens:
            if not tok:
                raise ValueError("empty token")
            spans.append((pos, pos + len(tok)))
            pos += len(tok)
        return cls("".join(tokens), tuple(spans))

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.chars[s:e] for s, e in self.spans)

    def __len__(self) -> int:
        return len(self.spans)


@dataclass(frozen=True)
class DepTree:
    """Dependency tree: per-token head ids (0 = virtual root) and relations."""

    tokens: tuple[str, ...]
    heads: tuple[int, ...]
    rels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        object.__setattr__(self, "rels", tuple(self.rels))
        n = len(self.tokens)
        if len(self.heads) != n or len(self.rels) != n:
            raise InvalidGoldTree("tokens, heads and rels must have equal length")
        if n == 0:
            raise InvalidGoldTree("empty tree")
        if any(h < 0 or h > n for h in self.heads):
            raise InvalidGoldTree("head index out of range")
        if sum(1 for h in self.heads if h == 0) != 1:
            raise InvalidGoldTree("tree must have exactly one root child")
        # every token must reach the root without revisiting a node
        for i in range(1, n + 1):
            seen = set()
            node = i
            while node != 0:
                if node in seen:
                    raise InvalidGoldTree(f"cycle through token {i}")
                seen.add(node)
                node = self.heads[node - 1]

    def __len__(self) -> int:
        return len(self.tokens)


# --- conversions -------------------------------------------------------------

def encode_bmes(seg: Segmentation) -> list[str]:
    """Per-character B/M/E/S labels for a segmentation."""
    labels: list[str] = []
    for start, end in seg.spans:
        k = end - start
        if k == 1:
            labels.append("S")
        else:
            labels.extend(["B"] + ["M"] * (k - 2) + ["E"])
    return labels


def decode_bmes(chars: Sequence[str], labels: Sequence[str]) -> Segmentation:
    """Invert :func:`encode_bmes`; raises IllegalSequence on malformed labels."""
    text = "".join(chars)
    if len(labels) != len(text):
        raise ValueError("labels and chars must have equal length")
    _check_sequence(labels)
    spans: list[tuple[int, int]] = []
    start = 0
    for i, label in enumerate(labels):
        pos = split_label(label)[0]
        if pos in ("B", "S"):
            start = i
        if pos in ("E", "S"):
            spans.append((start, i + 1))
    return Segmentation(text, tuple(spans))


def encode_cross(seg: Segmentation, tags: Sequence[str]) -> list[str]:
    """Cross-labels (``B-NN`` ...) for a segmentation with one tag per token."""
    if len(tags) != len(seg.spans):
        raise ValueError("one tag per token required")
    labels: list[str] = []
    for (start, end), tag in zip(seg.spans, tags):
        k = end - start
        if k == 1:
            labels.append(f"S-{tag}")
        else:
            labels.extend([f"B-{tag}"] + [f"M-{tag}"] * (k - 2) + [f"E-{tag}"])
    return labels


def decode_cross(chars: Sequence[str], labels: Sequence[str]) -> list[tuple[str, str]]:
    """Invert :func:`encode_cross` into (token, category) pairs."""
    text = "".join(chars)
    if len(labels) != len(text):
        raise ValueError("labels and chars must have equal length")
    _check_sequence(labels)
    out: list[tuple[str, str]] = []
    start = 0
    for i, label in enumerate(labels):
        pos, cat = split_label(label)
        if cat is None:
            raise IllegalSequence(f"bare label {label!r} in cross-label sequence")
        if pos in ("B", "S"):
            start = i
        if pos in ("E", "S"):
            out.append((text[start:i + 1], cat))
    return out


def decode_ner(chars: Sequence[str], labels: Sequence[str]) -> list[tuple[tuple[int, int], str]]:
    """Entity spans from a BMES-O sequence as ((start, end), category) pairs."""
    text = "".join(chars)
    if len(labels) != len(text):
        raise ValueError("labels and chars must have equal length")
    _check_sequence(labels)
    out: list[tuple[tuple[int, int], str]] = []
    start = 0
    for i, label in enumerate(labels):
        pos, cat = split_label(label)
        if pos == "O":
            continue
        if cat is None:
            raise IllegalSequence(f"bare label {label!r} in NER sequence")
        if pos in ("B", "S"):
            start = i
        if pos in ("E", "S"):
            out.append(((start, i + 1), cat))
    return out


# --- vocabulary and corpus tags ----------------------------------------------

class Vocabulary:
    """Dense char-to-id map with reserved PAD/UNK rows and one row per corpus tag.

    Ids: 0 = PAD, 1 = UNK, then corpus tags in registration order, then
    characters. Unseen characters map to UNK.
    """

    pad_id = 0
    unk_id = 1

    def __init__(self, tag_names: Sequence[str], chars: Sequence[str]):
        if len(set(tag_names)) != len(tag_names):
            raise ValueError("duplicate corpus tag name")
        if len(set(chars)) != len(chars):
            raise ValueError("duplicate character")
        self.tag_names = tuple(tag_names)
        self.chars = tuple(chars)
        self._tag_ids = {name: 2 + i for i, name in enumerate(self.tag_names)}
        base = 2 + len(self.tag_names)
        self._char_ids = {ch: base + i for i, ch in enumerate(self.chars)}
        self.size = base + len(self.chars)

    @classmethod
    def build(cls, tag_names: Sequence[str], texts: Iterable[str]) -> "Vocabulary":
        chars = sorted({ch for text in texts for ch in text})
        return cls(tag_names, chars)

    def id_of(self, char: str) -> int:
        return self._char_ids.get(char, self.unk_id)

    def encode(self, text: str) -> list[int]:
        return [self.id_of(ch) for ch in text]

    def tag_id(self, name: str) -> int:
        try:
            return self._tag_ids[name]
        except KeyError:
            raise UnknownTag(f"corpus tag {name!r} not in vocabulary") from None

    def __contains__(self, char: str) -> bool:
        return char in self._char_ids

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class CorpusTag:
    """A registered corpus tag: the head token selecting task and criterion."""

    name: str
    task: Task
    vocab_id: int


class TagRegistry:
    """Name-to-tag registry; each tag belongs to exactly one task."""

    def __init__(self):
        self._tags: dict[str, CorpusTag] = {}

    def register(self, name: str, task: Task, vocab_id: int) -> CorpusTag:
        if name in self._tags:
            raise ValueError(f"corpus tag {name!r} already registered")
        tag = CorpusTag(name, task, vocab_id)
        self._tags[name] = tag
        return tag

    def get(self, name: str) -> CorpusTag:
        try:
            return self._tags[name]
        except KeyError:
            raise UnknownTag(f"unknown corpus tag {name!r}") from None

    def for_task(self, task: Task) -> tuple[CorpusTag, ...]:
        return tuple(t for t in self._tags.values() if t.task is task)

    def names(self) -> tuple[str, ...]:
        return tuple(self._tags)

    def __iter__(self):
        return iter(self._tags.values())

    def __contains__(self, name: str) -> bool:
        return name in self._tags

    def __len__(self) -> int:
        return len(self._tags)
