"""Corpus readers and writers for the four task formats (all UTF-8).

CWS: one sentence per line, tokens space-separated.
POS: one token per line as ``form<TAB>tag``, blank line between sentences.
NER: one char per line as ``char<TAB>label`` (BMES-O cross-labels), blank
line between sentences.
DEP: CoNLL-style ``id<TAB>form<TAB>pos<TAB>head<TAB>rel`` rows, blank line
between sentences.
"""

from dataclasses import dataclass
from typing import Iterator

from .core import Segmentation, split_label
from .errors import CorpusFormatError


@dataclass(frozen=True)
class PosSentence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    @property
    def seg(self) -> Segmentation:
        return Segmentation.from_tokens(self.tokens)


@dataclass(frozen=True)
class NerSentence:
    chars: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class DepSentence:
    tokens: tuple[str, ...]
    pos: tuple[str, ...]
    heads: tuple[int, ...]
    rels: tuple[str, ...]

    @property
    def seg(self) -> Segmentation:
        return Segmentation.from_tokens(self.tokens)


def _fail(path, lineno: int, message: str) -> None:
    raise CorpusFormatError(f"{path}:{lineno}: {message}")


def _blocks(path) -> Iterator[tuple[int, list[tuple[int, str]]]]:
    """Blank-line-separated blocks as (first line number, [(lineno, line), ...])."""
    block: list[tuple[int, str]] = []
    first = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if block:
                    yield first, block
                    block = []
                continue
            if not block:
                first = lineno
            block.append((lineno, line))
    if block:
        yield first, block


def read_cws(path) -> list[Segmentation]:
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                sentences.append(Segmentation.from_tokens(tokens))
            except ValueError as exc:
                _fail(path, lineno, str(exc))
    if not sentences:
        _fail(path, 1, "corpus contains no sentences")
    return sentences


def read_pos(path) -> list[PosSentence]:
    sentences = []
    for _, block in _blocks(path):
        tokens, tags = [], []
        for lineno, line in block:
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                _fail(path, lineno, f"expected 'form<TAB>tag', got {line!r}")
            tokens.append(cols[0])
            tags.append(cols[1])
        sentences.append(PosSentence(tuple(tokens), tuple(tags)))
    if not sentences:
        _fail(path, 1, "corpus contains no sentences")
    return sentences


def read_ner(path) -> list[NerSentence]:
    sentences = []
    for _, block in _blocks(path):
        chars, labels = [], []
        for lineno, line in block:
            cols = line.split("\t")
            if len(cols) != 2 or len(cols[0]) != 1 or not cols[1]:
                _fail(path, lineno, f"expected 'char<TAB>label', got {line!r}")
            try:
                split_label(cols[1])
            except ValueError as exc:
                _fail(path, lineno, str(exc))
            chars.append(cols[0])
            labels.append(cols[1])
        sentences.append(NerSentence("".join(chars), tuple(labels)))
    if not sentences:
        _fail(path, 1, "corpus contains no sentences")
    return sentences


def read_dep(path) -> list[DepSentence]:
    sentences = []
    for first, block in _blocks(path):
        tokens, pos, heads, rels = [], [], [], []
        for expected, (lineno, line) in enumerate(block, start=1):
            cols = line.split("\t")
            if len(cols) != 5:
                _fail(path, lineno, f"expected 5 columns, got {len(cols)}")
            idx_s, form, tag, head_s, rel = cols
            if not form or not tag or not rel:
                _fail(path, lineno, "empty field")
            try:
                idx, head = int(idx_s), int(head_s)
            except ValueError:
                _fail(path, lineno, "id and head must be integers")
            if idx != expected:
                _fail(path, lineno, f"token id {idx} out of order (expected {expected})")
            tokens.append(form)
            pos.append(tag)
            heads.append(head)
            rels.append(rel)
        n = len(tokens)
        if any(h < 0 or h > n for h in heads):
            _fail(path, first, "head index out of range")
        if sum(1 for h in heads if h == 0) != 1:
            _fail(path, first, "sentence must have exactly one root")
        sentences.append(DepSentence(tuple(tokens), tuple(pos), tuple(heads), tuple(rels)))
    if not sentences:
        _fail(path, 1, "corpus contains no sentences")
    return sentences


def write_cws(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seg in sentences:
            fh.write(" ".join(seg.tokens) + "\n")


def write_pos(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for form, tag in zip(sent.tokens, sent.tags):
                fh.write(f"{form}\t{tag}\n")
            fh.write("\n")


def write_ner(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for ch, label in zip(sent.chars, sent.labels):
                fh.write(f"{ch}\t{label}\n")
            fh.write("\n")


def write_dep(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for i, (form, tag, head, rel) in enumerate(
                zip(sent.tokens, sent.pos, sent.heads, sent.rels), start=1
            ):
                fh.write(f"{i}\t{form}\t{tag}\t{head}\t{rel}\n")
            fh.write("\n")
