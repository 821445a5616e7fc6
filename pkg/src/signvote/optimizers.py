"""Update rules: plain distributed SGD, sign descent, and its momentum variant.

Workers fold each stochastic gradient estimate into a momentum buffer
``v <- (1 - beta) g + beta v`` and transmit either ``sign(v)`` (sign rules) or
the raw estimate (dist-sgd).  The server is a one-liner either way: the mean
of dense messages, or the sign of the coordinate-wise sign sum -- a majority
vote whose exact ties broadcast 0 and freeze the coordinate for the round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_vector, sequential_sum, sign, sum_signs

__all__ = [
    "OptimizerConfig",
    "RULES",
    "SIGN_RULES",
    "Schedule",
    "WorkerState",
    "apply_update",
    "effective_eta",
    "prescribed_hyperparams",
    "server_aggregate_sgd",
    "server_aggregate_signs",
    "worker_message",
]

RULES = ("dist-sgd", "signsgd", "signum")
SIGN_RULES = ("signsgd", "signum")


@dataclass(frozen=True)
class Schedule:
    """Step decay: the learning rate is divided by decay_factor every decay_every steps."""

    decay_factor: float = 10.0
    decay_every: int = 30

    def __post_init__(self):
        if self.decay_factor <= 0:
            raise ValueError("decay_factor must be > 0")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")


@dataclass(frozen=True)
class OptimizerConfig:
    rule: str
    eta: float
    beta: float = 0.0
    weight_decay: float = 0.0
    batch_size: int = 32
    schedule: Schedule = field(default_factory=Schedule)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}, expected one of {RULES}")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.rule == "signsgd" and self.beta != 0.0:
            raise ValueError("signsgd requires beta = 0; use rule 'signum' for momentum")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class WorkerState:
    """Per-worker momentum buffer, zero-initialized."""

    __slots__ = ("v",)

    def __init__(self, dim: int):
        self.v = np.zeros(dim, dtype=np.float64)


def effective_eta(cfg: OptimizerConfig, step: int) -> float:
    """Learning rate at a given step index under the decay schedule."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return cfg.eta / cfg.schedule.decay_factor ** (step // cfg.schedule.decay_every)


def worker_message(cfg: OptimizerConfig, state: WorkerState, grad_estimate) -> np.ndarray:
    """Fold the new gradient estimate into momentum and emit the wire message.

    Sign rules send ``sign(v)`` as an int8 sign vector; dist-sgd sends the
    dense estimate itself.  The momentum buffer is updated in both cases.
    """
    g = as_vector(grad_estimate, "gradient estimate")
    if g.size != state.v.size:
        raise ValueError(f"gradient length {g.size} != state length {state.v.size}")
    state.v = (1.0 - cfg.beta) * g + cfg.beta * state.v
    if cfg.rule in SIGN_RULES:
        return sign(state.v)
    return g


def server_aggregate_signs(messages) -> np.ndarray:
    """Majority vote: sign of the coordinate-wise sign sum (exact ties -> 0)."""
    return sign(sum_signs(messages))


def server_aggregate_sgd(messages) -> np.ndarray:
    """Coordinate-wise mean of dense messages.

    The sum runs strictly left to right (see :func:`core.sequential_sum`), so
    an attacker that negates the same running sum cancels it bit for bit.
    Entries need not be finite: an unbounded attack vector is legal input and
    poisons the mean, which is the point of the attack.
    """
    if len(messages) == 0:
        raise ValueError("cannot aggregate an empty message list")
    return sequential_sum(messages) / len(messages)


def apply_update(cfg: OptimizerConfig, x, direction, step: int) -> np.ndarray:
    """One descent step: ``x - eta_t * (direction + weight_decay * x)``.

    ``direction`` is the broadcast sign vector for sign rules or the mean
    gradient for dist-sgd; ``eta_t`` follows the decay schedule.
    """
    xv = as_vector(x, "parameters")
    dv = np.asarray(direction, dtype=np.float64)
    if dv.shape != xv.shape:
        raise ValueError(f"direction shape {dv.shape} != parameter shape {xv.shape}")
    return xv - effective_eta(cfg, step) * (dv + cfg.weight_decay * xv)


def prescribed_hyperparams(f0: float, fstar: float, smoothness_l1: float,
                           n_rounds: int) -> tuple[float, int]:
    """Learning rate and batch size under which the convergence-rate bounds hold.

    eta = sqrt((f0 - fstar) / (smoothness_l1 * n_rounds)) and the per-worker
    batch size equals the round count, so the total number of stochastic
    gradient calls per worker is n_rounds**2.
    """
    if f0 <= fstar:
        raise ValueError("initial objective f0 must exceed the lower bound fstar")
    if smoothness_l1 <= 0:
        raise ValueError("smoothness_l1 must be > 0")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    return math.sqrt((f0 - fstar) / (smoothness_l1 * n_rounds)), int(n_rounds)
