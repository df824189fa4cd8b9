"""Linear-chain CRF: log-partition, NLL and constrained Viterbi decoding.

Path score = start[y_0] + sum_t em[t, y_t] + sum_{t<T-1} trans[y_t, y_{t+1}]
+ end[y_{T-1}]. Loss-side computations run on torch tensors in log space so
gradients flow; Viterbi runs on float64 numpy copies, since decoding needs
no gradient and the tie rule (lowest label index wins) must be exact.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .core import LabelScheme
from .errors import EmptySequence, LabelOutOfRange, NoLegalPath


def log_partition(emissions: torch.Tensor, transitions: torch.Tensor,
                  start: torch.Tensor, end: torch.Tensor) -> torch.Tensor:
    """log sum over all label paths of exp(path score), one sequence (T, L)."""
    t_len = emissions.shape[0]
    if t_len == 0:
        raise EmptySequence("cannot score an empty sequence")
    alpha = start + emissions[0]
    for t in range(1, t_len):
        alpha = torch.logsumexp(alpha[:, None] + transitions, dim=0) + emissions[t]
    return torch.logsumexp(alpha + end, dim=0)


def path_score(emissions: torch.Tensor, transitions: torch.Tensor,
               start: torch.Tensor, end: torch.Tensor,
               labels: Sequence[int]) -> torch.Tensor:
    t_len, num_labels = emissions.shape
    if t_len == 0:
        raise EmptySequence("cannot score an empty sequence")
    if len(labels) != t_len:
        raise ValueError("one label per position required")
    if any(y < 0 or y >= num_labels for y in labels):
        raise LabelOutOfRange(f"labels must lie in [0, {num_labels})")
    idx = torch.as_tensor(labels, dtype=torch.long, device=emissions.device)
    score = start[idx[0]] + emissions[torch.arange(t_len), idx].sum() + end[idx[-1]]
    if t_len > 1:
        score = score + transitions[idx[:-1], idx[1:]].sum()
    return score


def nll_loss(emissions: torch.Tensor, transitions: torch.Tensor,
             start: torch.Tensor, end: torch.Tensor,
             labels: Sequence[int]) -> torch.Tensor:
    """-log P(labels | emissions); always >= 0."""
    return log_partition(emissions, transitions, start, end) - path_score(
        emissions, transitions, start, end, labels
    )


def log_partition_batch(emissions: torch.Tensor, transitions: torch.Tensor,
                        start: torch.Tensor, end: torch.Tensor,
                        mask: torch.Tensor) -> torch.Tensor:
    """Batched forward recursion; mask True on real positions, column 0 all True."""
    if emissions.shape[1] == 0:
        raise EmptySequence("cannot score an empty sequence")
    alpha = start + emissions[:, 0]
    for t in range(1, emissions.shape[1]):
        nxt = torch.logsumexp(alpha[:, :, None] + transitions[None], dim=1) + emissions[:, t]
        alpha = torch.where(mask[:, t, None], nxt, alpha)
    return torch.logsumexp(alpha + end, dim=1)


def path_score_batch(emissions: torch.Tensor, transitions: torch.Tensor,
                     start: torch.Tensor, end: torch.Tensor,
                     labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    b, t_len, num_labels = emissions.shape
    if (labels < 0).any() or (labels >= num_labels).any():
        raise LabelOutOfRange(f"labels must lie in [0, {num_labels})")
    rows = torch.arange(b, device=emissions.device)
    score = start[labels[:, 0]] + emissions[:, 0].gather(1, labels[:, :1]).squeeze(1)
    for t in range(1, t_len):
        step = transitions[labels[:, t - 1], labels[:, t]] + emissions[:, t].gather(
            1, labels[:, t:t + 1]
        ).squeeze(1)
        score = score + step * mask[:, t]
    lengths = mask.sum(dim=1) - 1
    last = labels[rows, lengths]
    return score + end[last]


def nll_batch(emissions: torch.Tensor, transitions: torch.Tensor,
              start: torch.Tensor, end: torch.Tensor,
              labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Per-sequence negative log likelihood for a padded batch."""
    return log_partition_batch(emissions, transitions, start, end, mask) - path_score_batch(
        emissions, transitions, start, end, labels, mask
    )


@dataclass(frozen=True)
class Constraints:
    """Scheme legality as boolean masks over label indices."""

    start_ok: np.ndarray
    end_ok: np.ndarray
    transition_ok: np.ndarray

    @classmethod
    def from_scheme(cls, scheme: LabelScheme) -> "Constraints":
        labels = scheme.labels
        n = len(labels)
        start_ok = np.array([scheme.legal_start(l) for l in labels], dtype=bool)
        end_ok = np.array([scheme.legal_end(l) for l in labels], dtype=bool)
        trans = np.zeros((n, n), dtype=bool)
        for i, a in enumerate(labels):
            for j, b in enumerate(labels):
                trans[i, j] = scheme.legal_transition(a, b)
        return cls(start_ok, end_ok, trans)


def viterbi(emissions, transitions, start, end,
            constraints: Optional[Constraints] = None,
            bias: Optional[np.ndarray] = None) -> tuple[list[int], float]:
    """Highest-scoring label path, with optional legality constraints and bias.

    ``bias`` (T, L) is added to the emissions before decoding. Constraint
    violations score -inf, so the returned path is always legal; ties break
    toward the lowest label index at every backtrack step.
    """
    em = np.array(emissions, dtype=np.float64, copy=True)
    if em.ndim != 2:
        raise ValueError("emissions must be (T, L)")
    if bias is not None:
        em = em + np.asarray(bias, dtype=np.float64)
    t_len, num_labels = em.shape
    if t_len == 0:
        raise EmptySequence("cannot decode an empty sequence")
    trans = np.asarray(transitions, dtype=np.float64).copy()
    start = np.asarray(start, dtype=np.float64).copy()
    end = np.asarray(end, dtype=np.float64).copy()
    if constraints is not None:
        trans[~constraints.transition_ok] = -np.inf
        start[~constraints.start_ok] = -np.inf
        end[~constraints.end_ok] = -np.inf

    back = np.zeros((t_len, num_labels), dtype=np.intp)
    score = start + em[0]
    for t in range(1, t_len):
        cand = score[:, None] + trans
        back[t] = np.argmax(cand, axis=0)  # first occurrence = lowest prev index
        score = cand[back[t], np.arange(num_labels)] + em[t]
    final = score + end
    last = int(np.argmax(final))
    best = float(final[last])
    if best == -np.inf:
        raise NoLegalPath("all label paths violate the constraints")
    path = [last]
    for t in range(t_len - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, best


class CrfHead(nn.Module):
    """Emission projection (one hidden layer) plus transition tables for one task."""

    def __init__(self, input_dim: int, num_labels: int):
        super().__init__()
        self.num_labels = num_labels
        self.hidden = nn.Linear(input_dim, input_dim)
        self.out = nn.Linear(input_dim, num_labels)
        self.transitions = nn.Parameter(torch.empty(num_labels, num_labels))
        self.start = nn.Parameter(torch.empty(num_labels))
        self.end = nn.Parameter(torch.empty(num_labels))
        nn.init.uniform_(self.transitions, -0.1, 0.1)
        nn.init.uniform_(self.start, -0.1, 0.1)
        nn.init.uniform_(self.end, -0.1, 0.1)

    def emissions(self, feats: torch.Tensor) -> torch.Tensor:
        return self.out(torch.tanh(self.hidden(feats)))

    def sequence_nll(self, char_feats: torch.Tensor, labels: torch.Tensor,
                     mask: torch.Tensor) -> torch.Tensor:
        """Per-sequence NLL for a padded batch of character features."""
        em = self.emissions(char_feats)
        return nll_batch(em, self.transitions, self.start, self.end, labels, mask)

    def numpy_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Float64 copies of (transitions, start, end) for decoding."""
        return (
            self.transitions.detach().cpu().numpy().astype(np.float64),
            self.start.detach().cpu().numpy().astype(np.float64),
            self.end.detach().cpu().numpy().astype(np.float64),
        )
