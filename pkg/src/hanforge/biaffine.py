"""Biaffine dependency scoring and maximum-arborescence decoding.

Character features are pooled into token features using the segmentation
from the POS pass, POS-label embeddings are added per token, and arcs /
relations are scored bilinearly over projected head and dependent vectors.
Decoding finds the best arborescence rooted at the virtual node 0 with
exactly one root child (Chu-Liu/Edmonds, retrying each candidate root child
when the unconstrained optimum is multi-rooted).
"""

from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .core import Segmentation
from .errors import InvalidGoldTree, SpanMismatch, UnknownPosLabel


def pool_tokens(char_feats: torch.Tensor, seg: Segmentation,
                root: torch.Tensor) -> torch.Tensor:
    """Token features: ROOT vector at row 0, then the mean of each token's chars."""
    if char_feats.shape[0] != len(seg.chars):
        raise SpanMismatch(
            f"segmentation covers {len(seg.chars)} chars but got {char_feats.shape[0]} rows"
        )
    rows = [root] + [char_feats[s:e].mean(dim=0) for s, e in seg.spans]
    return torch.stack(rows)


def add_pos(tokens: torch.Tensor, pos_ids: Sequence[int],
            table: torch.Tensor) -> torch.Tensor:
    """Add the POS-label embedding to each token vector; ROOT stays untouched."""
    if len(pos_ids) != tokens.shape[0] - 1:
        raise ValueError("one POS id per token required")
    if any(i < 0 or i >= table.shape[0] for i in pos_ids):
        raise UnknownPosLabel(f"POS id outside table of {table.shape[0]} rows")
    if not pos_ids:
        return tokens
    idx = torch.as_tensor(pos_ids, dtype=torch.long, device=tokens.device)
    return torch.cat([tokens[:1], tokens[1:] + table[idx]], dim=0)


def arc_score_matrix(head_proj: torch.Tensor, dep_proj: torch.Tensor,
                     weight: torch.Tensor) -> torch.Tensor:
    """S[i, j] = [head_j; 1]^T W dep_i, the score of token j heading token i."""
    ones = head_proj.new_ones(head_proj.shape[0], 1)
    aug = torch.cat([head_proj, ones], dim=-1)
    return ((aug @ weight) @ dep_proj.T).T


def rel_score_matrix(head_proj: torch.Tensor, dep_proj: torch.Tensor,
                     weight: torch.Tensor) -> torch.Tensor:
    """scores[..., r] = [head; 1]^T U_r [dep; 1] for every relation r."""
    h_aug = torch.cat([head_proj, head_proj.new_ones(*head_proj.shape[:-1], 1)], dim=-1)
    d_aug = torch.cat([dep_proj, dep_proj.new_ones(*dep_proj.shape[:-1], 1)], dim=-1)
    return torch.einsum("...p,rpq,...q->...r", h_aug, weight, d_aug)


def mask_arc_scores(scores: torch.Tensor) -> torch.Tensor:
    """Forbid self-heads and ROOT-as-dependent with -inf."""
    m = scores.shape[0]
    eye = torch.eye(m, dtype=torch.bool, device=scores.device)
    masked = scores.masked_fill(eye, float("-inf"))
    row0 = torch.zeros(m, dtype=torch.bool, device=scores.device)
    row0[0] = True
    return masked.masked_fill(row0[:, None], float("-inf"))


def parse_loss(arc_scores: torch.Tensor, label_scores: torch.Tensor,
               heads: Sequence[int], rel_ids: Sequence[int]) -> torch.Tensor:
    """Softmax cross-entropy over heads plus relations at gold heads."""
    n = arc_scores.shape[0] - 1
    if len(heads) != n or len(rel_ids) != n:
        raise InvalidGoldTree("one head and one relation per token required")
    if any(h < 0 or h > n for h in heads):
        raise InvalidGoldTree("gold head index out of range")
    if any(h == i + 1 for i, h in enumerate(heads)):
        raise InvalidGoldTree("token cannot head itself")
    rows = torch.arange(n, device=arc_scores.device)
    head_idx = torch.as_tensor(heads, dtype=torch.long, device=arc_scores.device)
    rel_idx = torch.as_tensor(rel_ids, dtype=torch.long, device=arc_scores.device)
    head_lp = torch.log_softmax(arc_scores[1:], dim=-1)
    rel_lp = torch.log_softmax(label_scores, dim=-1)
    return -(head_lp[rows, head_idx].sum() + rel_lp[rows, rel_idx].sum())


# --- arborescence decoding ----------------------------------------------------

def _find_cycle(tree: np.ndarray) -> Optional[list[int]]:
    """First cycle among nodes 1..n of a head assignment, if any."""
    m = len(tree)
    state = np.zeros(m, dtype=np.int8)  # 0 new, 1 on current walk, 2 settled
    state[0] = 2
    for seed in range(1, m):
        if state[seed]:
            continue
        walk = []
        node = seed
        while state[node] == 0:
            state[node] = 1
            walk.append(node)
            node = int(tree[node])
        if state[node] == 1:  # closed a new cycle
            at = walk.index(node)
            cycle = walk[at:]
            for w in walk:
                state[w] = 2
            return cycle
        for w in walk:
            state[w] = 2
    return None


def _chuliu_edmonds(scores: np.ndarray) -> np.ndarray:
    """Maximum arborescence over scores[dep, head]; returns a head per node.

    Row 0 and the diagonal must already be -inf; greedy selection therefore
    never picks them, and tree[0] is pinned to 0.
    """
    tree = np.argmax(scores, axis=1)
    tree[0] = 0
    cycle = _find_cycle(tree)
    if cycle is None:
        return tree
    cycle_arr = np.asarray(cycle, dtype=np.intp)
    keep = np.ones(len(scores), dtype=bool)
    keep[cycle_arr] = False
    noncycle = np.where(keep)[0]

    cycle_edge = scores[cycle_arr, tree[cycle_arr]]
    cycle_total = cycle_edge.sum()
    # best cycle-internal endpoint for edges entering / leaving the cycle
    s_out = scores[noncycle][:, cycle_arr]                      # noncycle dep <- cycle head
    out_choice = np.argmax(s_out, axis=1)
    s_in = scores[cycle_arr][:, noncycle] - cycle_edge[:, None] + cycle_total
    in_choice = np.argmax(s_in, axis=0)

    nc = len(noncycle)
    contracted = np.full((nc + 1, nc + 1), -np.inf)
    contracted[:nc, :nc] = scores[noncycle][:, noncycle]
    contracted[:nc, nc] = s_out[np.arange(nc), out_choice]
    contracted[nc, :nc] = s_in[in_choice, np.arange(nc)]

    sub = _chuliu_edmonds(contracted)
    tree = tree.copy()
    for idx, node in enumerate(noncycle):
        h = sub[idx]
        tree[node] = cycle_arr[out_choice[idx]] if h == nc else noncycle[h]
    entry_src = int(sub[nc])                      # head of contracted node
    entry = cycle_arr[in_choice[entry_src]]       # cycle node whose head changes
    tree[entry] = noncycle[entry_src]
    tree[0] = 0
    return tree


def _tree_score(scores: np.ndarray, tree: np.ndarray) -> float:
    return float(scores[np.arange(1, len(tree)), tree[1:]].sum())


def decode_heads(arc_scores) -> list[int]:
    """Best single-root arborescence; heads for tokens 1..n."""
    s = np.array(arc_scores, dtype=np.float64, copy=True)
    m = s.shape[0]
    if s.ndim != 2 or s.shape[1] != m or m < 2:
        raise ValueError("arc scores must be (n+1, n+1) with n >= 1")
    orig_root_col = s[:, 0].copy()
    s[0, :] = -np.inf
    np.fill_diagonal(s, -np.inf)

    tree = _chuliu_edmonds(s)
    if int(np.sum(tree[1:] == 0)) != 1:
        best_tree, best_score = None, -np.inf
        for root in range(1, m):
            forced = s.copy()
            forced[:, 0] = -np.inf
            forced[root, 0] = orig_root_col[root]
            cand = _chuliu_edmonds(forced)
            if int(np.sum(cand[1:] == 0)) != 1:
                continue
            score = _tree_score(forced, cand)
            if score > best_score:
                best_tree, best_score = cand, score
        assert best_tree is not None, "forcing a root child always yields a tree"
        tree = best_tree
    return [int(h) for h in tree[1:]]


def decode_tree(arc_scores, label_scores) -> tuple[list[int], list[int]]:
    """Heads via maximum arborescence, then the best relation at each chosen head.

    ``label_scores`` holds scores for every (dependent, candidate head,
    relation) triple, shape (n, n+1, R).
    """
    heads = decode_heads(arc_scores)
    ls = np.asarray(label_scores, dtype=np.float64)
    rels = [int(np.argmax(ls[i, h])) for i, h in enumerate(heads)]
    return heads, rels


class BiaffineHead(nn.Module):
    """Dependency head: POS embeddings, ROOT vector, projections and biaffine weights."""

    def __init__(self, feat_dim: int, num_pos: int, num_rels: int,
                 arc_dim: int = 64, rel_dim: int = 32):
        super().__init__()
        self.num_rels = num_rels
        self.pos_embed = nn.Embedding(num_pos, feat_dim)
        self.root = nn.Parameter(torch.empty(feat_dim))
        self.arc_head = nn.Linear(feat_dim, arc_dim)
        self.arc_dep = nn.Linear(feat_dim, arc_dim)
        self.rel_head = nn.Linear(feat_dim, rel_dim)
        self.rel_dep = nn.Linear(feat_dim, rel_dim)
        self.arc_weight = nn.Parameter(torch.empty(arc_dim + 1, arc_dim))
        self.rel_weight = nn.Parameter(torch.empty(num_rels, rel_dim + 1, rel_dim + 1))
        nn.init.normal_(self.root, std=0.02)
        nn.init.uniform_(self.arc_weight, -0.1, 0.1)
        nn.init.uniform_(self.rel_weight, -0.1, 0.1)

    def token_features(self, char_feats: torch.Tensor, seg: Segmentation,
                       pos_ids: Sequence[int]) -> torch.Tensor:
        tokens = pool_tokens(char_feats, seg, self.root)
        return add_pos(tokens, pos_ids, self.pos_embed.weight)

    def score_arcs(self, tokens: torch.Tensor) -> torch.Tensor:
        head = torch.tanh(self.arc_head(tokens))
        dep = torch.tanh(self.arc_dep(tokens))
        return mask_arc_scores(arc_score_matrix(head, dep, self.arc_weight))

    def score_labels(self, tokens: torch.Tensor,
                     heads: Optional[Sequence[int]] = None) -> torch.Tensor:
        """(n, R) at given heads, or (n, n+1, R) over all candidates when heads is None."""
        head = torch.tanh(self.rel_head(tokens))
        dep = torch.tanh(self.rel_dep(tokens))
        if heads is not None:
            idx = torch.as_tensor(heads, dtype=torch.long, device=tokens.device)
            return rel_score_matrix(head[idx], dep[1:], self.rel_weight)
        n = tokens.shape[0] - 1
        h_all = head[None, :, :].expand(n, -1, -1)
        d_all = dep[1:, None, :].expand(-1, tokens.shape[0], -1)
        return rel_score_matrix(h_all, d_all, self.rel_weight)

    def loss(self, char_feats: torch.Tensor, seg: Segmentation,
             pos_ids: Sequence[int], heads: Sequence[int],
             rel_ids: Sequence[int]) -> torch.Tensor:
        tokens = self.token_features(char_feats, seg, pos_ids)
        arc = self.score_arcs(tokens)
        rel = self.score_labels(tokens, heads)
        return parse_loss(arc, rel, heads, rel_ids)

    def parse(self, char_feats: torch.Tensor, seg: Segmentation,
              pos_ids: Sequence[int]) -> tuple[list[int], list[int]]:
        """Decode (heads, relation ids) for one sentence."""
        with torch.no_grad():
            tokens = self.token_features(char_feats, seg, pos_ids)
            arc = self.score_arcs(tokens).double().cpu().numpy()
            rel = self.score_labels(tokens).double().cpu().numpy()
        return decode_tree(arc, rel)
