"""Deterministic synthetic mini-corpora for desk-scale training and tests.

Sentences come from a small hand-built grammar over real Chinese vocabulary
and carry consistent gold annotations for all four tasks. Compound nouns are
written as one token in the coarse segmentation and as two in the fine one,
so two CWS corpora over the same sentences genuinely disagree and a corpus
tag has something to learn.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Segmentation
from .data import (DepSentence, NerSentence, PosSentence, write_cws, write_dep,
                   write_ner, write_pos)

_PRONOUNS = ["我", "你", "他", "她", "我们", "他们"]
_ADVERBS = ["很", "都", "也", "常常", "非常", "已经", "仍然", "马上"]
_VERBS = ["喜欢", "研究", "参观", "访问", "讨论", "支持", "观看", "介绍", "考虑", "分析"]
_NOUNS = ["苹果", "报告", "电影", "问题", "方法", "城市", "计划", "市场", "音乐", "历史"]
_COMPOUNDS = [
    ("足球", "比赛"), ("火车", "车站"), ("电脑", "游戏"), ("经济", "政策"),
    ("科学", "技术"), ("汉语", "词典"), ("网络", "安全"), ("数据", "系统"),
]
_PERSONS = ["王小明", "李华", "张伟", "刘芳", "陈静", "赵强"]
_PLACES = ["北京", "上海", "南京", "广州", "杭州", "深圳"]
_ORGS = ["复旦大学", "清华大学", "人民银行", "中国科学院"]
_STOP = "。"


@dataclass(frozen=True)
class Example:
    """One sentence with gold annotations for every task."""

    tokens: tuple[str, ...]
    pos: tuple[str, ...]
    heads: tuple[int, ...]
    rels: tuple[str, ...]
    fine_tokens: tuple[str, ...]
    entities: tuple[tuple[int, int, str], ...]  # char offsets

    @property
    def text(self) -> str:
        return "".join(self.tokens)


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


class _Builder:
    def __init__(self):
        self.tokens: list[str] = []
        self.pos: list[str] = []
        self.heads: list[int] = []
        self.rels: list[str] = []
        self.fine: list[str] = []
        self.entities: list[tuple[int, int, str]] = []
        self._chars = 0

    def add(self, token: str, pos: str, head: int, rel: str,
            fine=None, entity=None) -> int:
        """Append a token; returns its 1-based index."""
        self.tokens.append(token)
        self.pos.append(pos)
        self.heads.append(head)
        self.rels.append(rel)
        self.fine.extend(fine if fine is not None else [token])
        if entity is not None:
            self.entities.append((self._chars, self._chars + len(token), entity))
        self._chars += len(token)
        return len(self.tokens)

    def build(self) -> Example:
        return Example(tuple(self.tokens), tuple(self.pos), tuple(self.heads),
                       tuple(self.rels), tuple(self.fine), tuple(self.entities))


def _object(rng, builder: _Builder, head: int, rel: str) -> None:
    roll = rng.random()
    if roll < 0.5:
        first, second = _pick(rng, _COMPOUNDS)
        builder.add(first + second, "NN", head, rel, fine=[first, second])
    else:
        builder.add(_pick(rng, _NOUNS), "NN", head, rel)


def _subject(rng, builder: _Builder, head: int) -> None:
    if rng.random() < 0.4:
        builder.add(_pick(rng, _PERSONS), "NR", head, "nsubj", entity="PER")
    else:
        builder.add(_pick(rng, _PRONOUNS), "PN", head, "nsubj")


def sample_example(rng: np.random.Generator) -> Example:
    builder = _Builder()
    template = int(rng.integers(4))
    # head indices are known ahead of time because each template is fixed
    if template == 0:
        # subj [adv] verb obj .
        with_adv = rng.random() < 0.5
        verb_idx = 3 if with_adv else 2
        _subject(rng, builder, verb_idx)
        if with_adv:
            builder.add(_pick(rng, _ADVERBS), "AD", verb_idx, "advmod")
        builder.add(_pick(rng, _VERBS), "VV", 0, "root")
        _object(rng, builder, verb_idx, "dobj")
    elif template == 1:
        # subj zai place verb obj .
        verb_idx = 4
        _subject(rng, builder, verb_idx)
        prep_idx = builder.add("在", "P", verb_idx, "prep")
        builder.add(_pick(rng, _PLACES), "NR", prep_idx, "pobj", entity="LOC")
        builder.add(_pick(rng, _VERBS), "VV", 0, "root")
        _object(rng, builder, verb_idx, "dobj")
    elif template == 2:
        # subj verb org DE obj .
        verb_idx = 2
        obj_idx = 5
        _subject(rng, builder, verb_idx)
        builder.add(_pick(rng, _VERBS), "VV", 0, "root")
        org_idx = builder.add(_pick(rng, _ORGS), "NR", obj_idx, "assmod", entity="ORG")
        builder.add("的", "DEG", org_idx, "assm")
        _object(rng, builder, verb_idx, "dobj")
    else:
        # place DE obj [adv] verb obj .
        with_adv = rng.random() < 0.5
        verb_idx = 5 if with_adv else 4
        place_idx = builder.add(_pick(rng, _PLACES), "NR", 3, "assmod", entity="LOC")
        builder.add("的", "DEG", place_idx, "assm")
        builder.add(_pick(rng, _NOUNS), "NN", verb_idx, "nsubj")
        if with_adv:
            builder.add(_pick(rng, _ADVERBS), "AD", verb_idx, "advmod")
        builder.add(_pick(rng, _VERBS), "VV", 0, "root")
        _object(rng, builder, verb_idx, "dobj")
    root_idx = builder.rels.index("root") + 1
    builder.add(_STOP, "PU", root_idx, "punct")
    return builder.build()


def generate_examples(count: int, seed: int = 0) -> list[Example]:
    rng = np.random.default_rng(seed)
    return [sample_example(rng) for _ in range(count)]


def _ner_labels(example: Example) -> tuple[str, ...]:
    labels = ["O"] * len(example.text)
    for start, end, cat in example.entities:
        if end - start == 1:
            labels[start] = f"S-{cat}"
        else:
            labels[start] = f"B-{cat}"
            for i in range(start + 1, end - 1):
                labels[i] = f"M-{cat}"
            labels[end - 1] = f"E-{cat}"
    return tuple(labels)


def write_corpus_suite(directory, count: int = 300, seed: int = 0) -> dict[str, str]:
    """Write the five corpus files; returns a name -> path map.

    ``cws_coarse`` and ``cws_fine`` contain the same sentences segmented at
    different granularities; POS/NER/DEP annotate the coarse tokens.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    examples = generate_examples(count, seed)
    paths = {
        "cws_coarse": directory / "cws_coarse.txt",
        "cws_fine": directory / "cws_fine.txt",
        "pos": directory / "pos.tsv",
        "ner": directory / "ner.tsv",
        "dep": directory / "dep.conll",
    }
    write_cws(paths["cws_coarse"], [Segmentation.from_tokens(e.tokens) for e in examples])
    write_cws(paths["cws_fine"], [Segmentation.from_tokens(e.fine_tokens) for e in examples])
    write_pos(paths["pos"], [PosSentence(e.tokens, e.pos) for e in examples])
    write_ner(paths["ner"], [NerSentence(e.text, _ner_labels(e)) for e in examples])
    write_dep(paths["dep"], [DepSentence(e.tokens, e.pos, e.heads, e.rels)
                             for e in examples])
    return {name: str(path) for name, path in paths.items()}
