"""Joint multi-task model: one shared encoder plus per-task decoding heads.

A loaded model is immutable and shareable across threads for prediction;
training, fine-tuning and compression require exclusive ownership.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import nn

from .biaffine import BiaffineHead
from .core import CorpusTag, LabelScheme, Segmentation, TagRegistry, Task, Vocabulary
from .crf import CrfHead
from .encoder import EncoderConfig, TransformerEncoder
from .errors import BindingMismatch, ConfigError, UnknownPosLabel, UnknownTag


@dataclass
class DepInstance:
    """Gold annotation for one dependency-training sentence."""

    seg: Segmentation
    pos_ids: list[int]
    heads: list[int]
    rel_ids: list[int]


@dataclass
class TaskBatch:
    """One padded batch, always from a single corpus."""

    tag: CorpusTag
    ids: torch.Tensor      # (B, T+1) long, tag id at column 0
    mask: torch.Tensor     # (B, T+1) bool
    lengths: list[int]     # character counts per sentence
    sentences: list[str]
    labels: Optional[torch.Tensor] = None   # (B, T) long for CRF tasks
    dep: Optional[list[DepInstance]] = None

    @property
    def char_mask(self) -> torch.Tensor:
        return self.mask[:, 1:]


class JointModel(nn.Module):
    """Shared encoder, CRF heads for CWS/POS/NER, biaffine head for DEP."""

    def __init__(self, encoder: TransformerEncoder, vocab: Vocabulary,
                 tags: TagRegistry, schemes: dict[Task, LabelScheme],
                 pos_categories: Sequence[str] = (), rel_labels: Sequence[str] = (),
                 arc_dim: int = 64, rel_dim: int = 32,
                 heads: Optional[nn.ModuleDict] = None):
        super().__init__()
        self.encoder = encoder
        self.vocab = vocab
        self.tags = tags
        self.schemes = dict(schemes)
        self.pos_categories = tuple(pos_categories)
        self.rel_labels = tuple(rel_labels)
        self.arc_dim = arc_dim
        self.rel_dim = rel_dim
        self._pos_index = {c: i for i, c in enumerate(self.pos_categories)}
        self._rel_index = {r: i for i, r in enumerate(self.rel_labels)}
        self.default_cws_tag: Optional[str] = None
        if heads is None:
            dim = encoder.config.hidden_dim
            modules: dict[str, nn.Module] = {}
            for task in (Task.CWS, Task.POS, Task.NER):
                if task in self.schemes:
                    modules[task.value] = CrfHead(dim, len(self.schemes[task]))
            if self.rel_labels:
                if not self.pos_categories:
                    raise ConfigError("dependency head needs a POS category inventory")
                modules[Task.DEP.value] = BiaffineHead(
                    dim, len(self.pos_categories), len(self.rel_labels), arc_dim, rel_dim
                )
            heads = nn.ModuleDict(modules)
        self.heads = heads

    # --- lookups -------------------------------------------------------------

    def head_for(self, task: Task) -> nn.Module:
        try:
            return self.heads[task.value]
        except KeyError:
            raise ConfigError(f"model has no head for task {task.value}") from None

    def pos_id(self, category: str) -> int:
        try:
            return self._pos_index[category]
        except KeyError:
            raise UnknownPosLabel(f"POS category {category!r} not in inventory") from None

    def rel_id(self, rel: str) -> int:
        try:
            return self._rel_index[rel]
        except KeyError:
            raise ConfigError(f"relation {rel!r} not in inventory") from None

    def default_tag(self, task: Task) -> CorpusTag:
        if task is Task.CWS and self.default_cws_tag is not None:
            return self.tags.get(self.default_cws_tag)
        for tag in self.tags:
            if tag.task is task:
                return tag
        raise UnknownTag(f"no corpus tag registered for task {task.value}")

    # --- forward / loss --------------------------------------------------------

    def encode_batch(self, ids: torch.Tensor, mask: torch.Tensor,
                     layers=None) -> torch.Tensor:
        return self.encoder(ids, mask, layers=layers)

    def task_loss(self, batch: TaskBatch, layers=None) -> torch.Tensor:
        """Mean per-sentence loss for one single-corpus batch."""
        feats = self.encode_batch(batch.ids, batch.mask, layers=layers)
        char_feats = feats[:, 1:]
        task = batch.tag.task
        if task is Task.DEP:
            head = self.head_for(Task.DEP)
            assert batch.dep is not None
            total = char_feats.new_zeros(())
            for i, inst in enumerate(batch.dep):
                total = total + head.loss(
                    char_feats[i, :batch.lengths[i]], inst.seg,
                    inst.pos_ids, inst.heads, inst.rel_ids,
                )
            return total / len(batch.dep)
        head = self.head_for(task)
        assert batch.labels is not None
        return head.sequence_nll(char_feats, batch.labels, batch.char_mask).mean()

    # --- compression -----------------------------------------------------------

    def make_successor(self) -> "JointModel":
        """Half-depth model sharing embeddings and task heads with this one."""
        num = self.encoder.config.num_layers
        if num < 2 or num % 2 != 0:
            raise BindingMismatch(f"cannot halve a {num}-layer encoder")
        successor = JointModel(
            self.encoder.prune_layers(num // 2), self.vocab, self.tags, self.schemes,
            self.pos_categories, self.rel_labels, self.arc_dim, self.rel_dim,
            heads=self.heads,
        )
        successor.default_cws_tag = self.default_cws_tag
        return successor


def build_model(config: EncoderConfig, vocab: Vocabulary, tags: TagRegistry,
                schemes: dict[Task, LabelScheme], pos_categories: Sequence[str] = (),
                rel_labels: Sequence[str] = (), arc_dim: int = 64,
                rel_dim: int = 32, seed: Optional[int] = None) -> JointModel:
    """Fresh model with seeded parameter initialization."""
    if seed is not None:
        torch.manual_seed(seed)
    return JointModel(TransformerEncoder(config), vocab, tags, schemes,
                      pos_categories, rel_labels, arc_dim, rel_dim)
