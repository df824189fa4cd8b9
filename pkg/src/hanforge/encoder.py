"""Compact transformer encoder conditioned by a corpus tag at sequence head.

BERT-style stack: learned character and absolute position embeddings,
post-layer-norm residual blocks, GELU feed-forward. Row 0 of every input
carries the corpus tag id; attention mixes it into each character position.
Dropout is deliberately absent so identical parameters and inputs always
produce identical outputs.
"""

import copy
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import torch
from torch import nn

from .errors import BadLayerCount, LengthExceeded


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    num_layers: int = 4
    hidden_dim: int = 128
    num_heads: int = 4
    ffn_dim: int = 256
    max_len: int = 256

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must cover PAD and UNK")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.max_len < 2:
            raise ValueError("max_len must leave room for the tag slot")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "num_layers": self.num_layers,
            "hidden_dim": self.hidden_dim,
            "num_heads": self.num_heads,
            "ffn_dim": self.ffn_dim,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


class SelfAttention(nn.Module):
    """Multi-head self-attention with exact zero weight on masked keys."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.output = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor,
                attn_sink: Optional[list] = None) -> torch.Tensor:
        b, t, _ = x.shape

        def split(proj):
            return proj.view(b, t, self.num_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        if attn_sink is not None:
            attn_sink.append(weights.detach())
        ctx = (weights @ v).transpose(1, 2).reshape(b, t, -1)
        return self.output(ctx)


class TransformerLayer(nn.Module):
    def __init__(self, dim: int, num_heads: int, ffn_dim: int):
        super().__init__()
        self.attn = SelfAttention(dim, num_heads)
        self.attn_norm = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_dim), nn.GELU(), nn.Linear(ffn_dim, dim))
        self.ffn_norm = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor,
                attn_sink: Optional[list] = None) -> torch.Tensor:
        x = self.attn_norm(x + self.attn(x, key_mask, attn_sink))
        x = self.ffn_norm(x + self.ffn(x))
        return x


class TransformerEncoder(nn.Module):
    """Shared feature extractor for all tasks.

    ``forward`` is a pure function of (parameters, input); concurrent calls
    sharing read-only parameters are safe. Training mutates parameters and
    needs exclusive ownership.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.char_embed = nn.Embedding(config.vocab_size, config.hidden_dim, padding_idx=0)
        self.pos_embed = nn.Embedding(config.max_len, config.hidden_dim)
        self.embed_norm = nn.LayerNorm(config.hidden_dim)
        self.layers = nn.ModuleList(
            TransformerLayer(config.hidden_dim, config.num_heads, config.ffn_dim)
            for _ in range(config.num_layers)
        )

    def forward(self, ids: torch.Tensor, mask: torch.Tensor,
                layers: Optional[Sequence[nn.Module]] = None,
                attn_sink: Optional[list] = None) -> torch.Tensor:
        """Features for a batch; row 0 is the corpus tag slot.

        Args:
            ids: long tensor (batch, T+1) with the tag id at column 0.
            mask: bool tensor (batch, T+1), True on real positions.
            layers: optional replacement layer stack (used by compression).
            attn_sink: list collecting per-layer attention weights.
        """
        if ids.dim() != 2 or ids.shape[1] < 1:
            raise ValueError("ids must be (batch, length>=1)")
        if ids.shape[1] > self.config.max_len:
            raise LengthExceeded(
                f"sequence of {ids.shape[1]} positions exceeds max_len={self.config.max_len}"
            )
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.embed_norm(self.char_embed(ids) + self.pos_embed(positions))
        for layer in (self.layers if layers is None else layers):
            x = layer(x, mask, attn_sink)
        return x

    def prune_layers(self, k: int) -> "TransformerEncoder":
        """Encoder keeping the first ``k`` layers.

        Embedding tables and the embedding norm are shared with the source
        model; the kept layers are deep copies so the two stacks train
        independently.
        """
        if not 1 <= k <= self.config.num_layers:
            raise BadLayerCount(f"cannot keep {k} of {self.config.num_layers} layers")
        pruned = TransformerEncoder.__new__(TransformerEncoder)
        nn.Module.__init__(pruned)
        pruned.config = replace(self.config, num_layers=k)
        pruned.char_embed = self.char_embed
        pruned.pos_embed = self.pos_embed
        pruned.embed_norm = self.embed_norm
        pruned.layers = nn.ModuleList(copy.deepcopy(self.layers[i]) for i in range(k))
        return pruned

    def parameter_gradients(self, ids: torch.Tensor, mask: torch.Tensor,
                            upstream: torch.Tensor) -> dict[str, torch.Tensor]:
        """Gradient of sum(forward * upstream) for every parameter."""
        feats = self.forward(ids, mask)
        objective = (feats * upstream).sum()
        named = list(self.named_parameters())
        grads = torch.autograd.grad(objective, [p for _, p in named], allow_unused=True)
        return {
            name: (g if g is not None else torch.zeros_like(p))
            for (name, p), g in zip(named, grads)
        }
