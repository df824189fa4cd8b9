"""Two-phase compression of a large encoder into a half-depth successor.

The successor is initialized from the first half of the large model's
layers and bound slot-wise: its layer i stands in for large layers 2i and
2i+1 (0-based). Phase 1 trains through stochastic module replacement with
the large layers frozen; the replacement probability starts at 0.5 and
decays linearly to 0. Phase 2 fine-tunes the successor alone.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .errors import BindingMismatch


@dataclass(frozen=True)
class TheseusSchedule:
    """Linear replacement-probability decay over phase 1, then plain fine-tuning."""

    phase1_steps: int
    phase2_steps: int
    initial_probability: float = 0.5

    def __post_init__(self):
        if self.phase1_steps < 0 or self.phase2_steps < 0:
            raise ValueError("step counts must be nonnegative")
        if not 0.0 <= self.initial_probability <= 1.0:
            raise ValueError("initial probability must lie in [0, 1]")

    def probability(self, step: int) -> float:
        if self.phase1_steps == 0:
            return 0.0
        frac = 1.0 - step / self.phase1_steps
        return self.initial_probability * min(max(frac, 0.0), 1.0)


@dataclass(frozen=True)
class ModuleBinding:
    """Slot map: base layer i <-> the pair of large layers it replaces."""

    pairs: tuple[tuple[int, tuple[int, int]], ...]

    @classmethod
    def halving(cls, num_large_layers: int) -> "ModuleBinding":
        if num_large_layers < 2 or num_large_layers % 2 != 0:
            raise BindingMismatch(
                f"halving needs an even layer count >= 2, got {num_large_layers}"
            )
        return cls(tuple((i, (2 * i, 2 * i + 1)) for i in range(num_large_layers // 2)))

    @property
    def num_slots(self) -> int:
        return len(self.pairs)

    def validate(self, num_base_layers: int, num_large_layers: int) -> None:
        if len(self.pairs) != num_base_layers:
            raise BindingMismatch(
                f"binding has {len(self.pairs)} slots for {num_base_layers} base layers"
            )
        base_seen = [i for i, _ in self.pairs]
        large_seen = [j for _, pair in self.pairs for j in pair]
        if sorted(base_seen) != list(range(num_base_layers)):
            raise BindingMismatch("every base layer must appear in exactly one slot")
        if sorted(large_seen) != list(range(num_large_layers)):
            raise BindingMismatch("every large layer must appear in exactly one slot")


def sample_replacements(num_slots: int, p: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(p) replacement choice per slot."""
    return rng.random(num_slots) < p


def compose_layers(base_encoder, large_encoder, binding: ModuleBinding,
                   replaced: Sequence[bool]) -> list[nn.Module]:
    """Layer stack with replaced slots running the large model's bound pair."""
    binding.validate(len(base_encoder.layers), len(large_encoder.layers))
    if len(replaced) != binding.num_slots:
        raise BindingMismatch("one replacement decision per slot required")
    stack: list[nn.Module] = []
    for (base_idx, (lo, hi)), use_large in zip(binding.pairs, replaced):
        if use_large:
            stack.extend([large_encoder.layers[lo], large_encoder.layers[hi]])
        else:
            stack.append(base_encoder.layers[base_idx])
    return stack


def sample_forward(base_encoder, large_encoder, binding: ModuleBinding,
                   p: float, rng: np.random.Generator,
                   ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """One stochastic mixed forward pass; fresh per-slot choices every call."""
    replaced = sample_replacements(binding.num_slots, p, rng)
    return base_encoder.forward(ids, mask, layers=compose_layers(
        base_encoder, large_encoder, binding, replaced))


def compress(large_model, data, schedule: TheseusSchedule, seed: int = 0,
             learning_rate: float = 1e-3, grad_clip: float = 5.0,
             log=None) -> "nn.Module":
    """Train a half-depth successor of ``large_model`` by module replacement.

    ``data`` must provide ``steps(rng)`` yielding an endless stream of task
    batches (see pipeline.TrainingData). Large-model layers are frozen for
    the whole run and restored to trainable afterwards; embeddings and task
    heads are shared with the successor and keep training.
    """
    base_model = large_model.make_successor()
    binding = ModuleBinding.halving(large_model.encoder.config.num_layers)
    binding.validate(len(base_model.encoder.layers), len(large_model.encoder.layers))

    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    large_layers = large_model.encoder.layers
    for param in large_layers.parameters():
        param.requires_grad_(False)
    try:
        params = [p for p in base_model.parameters() if p.requires_grad]
        optimizer = torch.optim.Adam(params, lr=learning_rate)
        stream = data.steps(rng)

        def step_once(step: int, probability: float) -> float:
            batch = next(stream)
            if probability > 0.0:
                replaced = sample_replacements(binding.num_slots, probability, rng)
                layers = compose_layers(base_model.encoder, large_model.encoder,
                                        binding, replaced)
            else:
                layers = None
            loss = base_model.task_loss(batch, layers=layers)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, grad_clip)
            optimizer.step()
            return float(loss.detach())

        for step in range(schedule.phase1_steps):
            loss = step_once(step, schedule.probability(step))
            if log is not None and step % 50 == 0:
                print(f"phase1 step {step} p={schedule.probability(step):.3f} "
                      f"loss={loss:.4f}", file=log)
        for step in range(schedule.phase2_steps):
            loss = step_once(step, 0.0)
            if log is not None and step % 50 == 0:
                print(f"phase2 step {step} loss={loss:.4f}", file=log)
    finally:
        for param in large_layers.parameters():
            param.requires_grad_(True)
    return base_model
