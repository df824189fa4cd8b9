"""Evaluation metrics: span F1 and span-aligned attachment scores.

Spans are compared exactly; a categorized span counts only when both the
offsets and the category match. Dependency scores align tokens by character
span so a segmentation mismatch counts against the parser instead of
crashing the evaluation; with identical segmentations they reduce to the
classic UAS/LAS.
"""

from dataclasses import dataclass
from typing import Sequence

from .core import DepTree, Segmentation


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _prf(num_gold: int, num_pred: int, num_correct: int) -> PRF:
    precision = num_correct / num_pred if num_pred else 0.0
    recall = num_correct / num_gold if num_gold else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    return PRF(precision, recall, f1)


def span_f1(gold_spans: Sequence[set], pred_spans: Sequence[set]) -> PRF:
    """Micro-averaged F1 over per-sentence span sets."""
    if len(gold_spans) != len(pred_spans):
        raise ValueError("gold and predicted sentence counts differ")
    num_gold = num_pred = num_correct = 0
    for gold, pred in zip(gold_spans, pred_spans):
        num_gold += len(gold)
        num_pred += len(pred)
        num_correct += len(gold & pred)
    return _prf(num_gold, num_pred, num_correct)


def cws_spans(seg: Segmentation) -> set:
    return set(seg.spans)


def tagged_spans(seg: Segmentation, tags: Sequence[str]) -> set:
    if len(tags) != len(seg.spans):
        raise ValueError("one tag per token required")
    return {(span, tag) for span, tag in zip(seg.spans, tags)}


def _token_spans(tree: DepTree) -> list[tuple[int, int]]:
    spans = []
    pos = 0
    for tok in tree.tokens:
        spans.append((pos, pos + len(tok)))
        pos += len(tok)
    return spans


def _arcs(tree: DepTree, labeled: bool) -> set:
    spans = _token_spans(tree)
    root_span = (-1, -1)
    arcs = set()
    for i, head in enumerate(tree.heads):
        head_span = root_span if head == 0 else spans[head - 1]
        arc = (spans[i], head_span)
        arcs.add(arc + (tree.rels[i],) if labeled else arc)
    return arcs


def uas_las(gold_trees: Sequence[DepTree], pred_trees: Sequence[DepTree]) -> tuple[float, float]:
    """Span-aligned attachment scores over all gold tokens."""
    if len(gold_trees) != len(pred_trees):
        raise ValueError("gold and predicted sentence counts differ")
    total = ua = la = 0
    for gold, pred in zip(gold_trees, pred_trees):
        total += len(gold.tokens)
        ua += len(_arcs(gold, labeled=False) & _arcs(pred, labeled=False))
        la += len(_arcs(gold, labeled=True) & _arcs(pred, labeled=True))
    if total == 0:
        return 0.0, 0.0
    return ua / total, la / total
