"""Attack strategies for compromised workers.

Rounds are two-phase: honest (and blind) workers commit their messages first,
omniscient adversaries observe them and answer.  Blind adversaries see
nothing, so all they can do is flip their own gradient estimate before it
enters their local momentum/sign pipeline.  Omniscient ones get the honest
messages (or the true gradient) handed to them and reply in kind: dense
vectors against mean aggregation, sign votes against the majority vote.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_vector, check_finite, sequential_sum, sign

__all__ = [
    "AdversarySpec",
    "COLLUDE_VARIANTS",
    "SGD_ONLY_STRATEGIES",
    "SIGN_ONLY_STRATEGIES",
    "STRATEGIES",
    "blind_invert",
    "byz_collude_signs",
    "byz_inverse_sum",
    "byz_oppose_true_sign",
]

STRATEGIES = (
    "none",
    "blind-invert",
    "byz-collude-zeroing",
    "byz-collude-alternating",
    "byz-oppose-true-sign",
    "byz-inverse-sum",
)

# sign votes only make sense against the majority vote; the gradient-cancelling
# attack only against mean aggregation
SIGN_ONLY_STRATEGIES = ("byz-collude-zeroing", "byz-collude-alternating", "byz-oppose-true-sign")
SGD_ONLY_STRATEGIES = ("byz-inverse-sum",)

COLLUDE_VARIANTS = ("zeroing", "alternating")


@dataclass(frozen=True)
class AdversarySpec:
    """Concrete adversary assignment for a run: strategy plus worker count f.

    A count of zero means the strategy is dormant (a clean run); the attack
    functions themselves require f >= 1.
    """

    strategy: str
    byzantine_count: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.byzantine_count < 0:
            raise ValueError("byzantine_count must be >= 0")
        if self.strategy == "none" and self.byzantine_count != 0:
            raise ValueError("strategy 'none' cannot have adversarial workers")


def blind_invert(grad_estimate) -> np.ndarray:
    """Flip the worker's own stochastic gradient estimate (applied before momentum)."""
    return -as_vector(grad_estimate, "gradient estimate")


def _integer_sign_sum(honest_sign_sum) -> np.ndarray:
    arr = np.asarray(honest_sign_sum)
    if arr.ndim != 1:
        raise ValueError(f"honest sign sum must be 1-D, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(arr == np.round(arr)):
            raise ValueError("honest sign sum must be integer-valued")
    return arr.astype(np.int64)


def byz_collude_signs(honest_sign_sum, f: int, variant: str = "zeroing"):
    """Colluding sign votes against the observed honest sign sum.

    Per coordinate with honest sum s:

    * ``|s| > f`` (both variants): the vote cannot be overturned, so all f
      adversaries oppose with -sign(s).
    * ``zeroing``, ``|s| <= f``: |s| adversaries cancel the honest sum exactly
      with -sign(s); the remaining f - |s| alternate -sign(s), +sign(s), ...
      starting with the opposition.  The total therefore lands on 0 when
      f and |s| share parity and flips to -sign(s) otherwise.
    * ``alternating``, ``0 <= s <= f``: f - s adversaries vote -1 and the
      remaining s alternate -1, +1, ... starting with -1; mirrored with +1
      for negative s.  Kept as a separate variant because it fails to cancel
      the honest sum in reachable cases (f=2, s=2 leaves the total at +2),
      unlike ``zeroing``.
    * ``s == 0`` (both variants): alternate -1, +1, ... starting with -1.

    Returns ``(messages, summed)``: the f individual sign vectors plus their
    coordinate-wise sum, the single dense message a designated adversary can
    send on behalf of the whole group to save f - 1 transmissions.
    """
    if f < 1:
        raise ValueError("collusion needs f >= 1 adversaries (use strategy 'none' otherwise)")
    if variant not in COLLUDE_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {COLLUDE_VARIANTS}")
    s = _integer_sign_sum(honest_sign_sum)
    sg = np.sign(s)
    abs_s = np.abs(s)
    # treat s == 0 as "sign +1" so the -base alternation starts at -1
    base = np.where(sg == 0, 1, sg)[None, :]
    if variant == "zeroing":
        cancel = abs_s[None, :]
    else:
        cancel = np.where(s == 0, 0, f - abs_s)[None, :]
    k = np.arange(f)[:, None]
    alternation = np.where((k - cancel) % 2 == 0, -base, base)
    votes = np.where(k < cancel, -base, alternation)
    votes = np.where((abs_s > f)[None, :], -sg[None, :], votes).astype(np.int8)
    summed = votes.sum(axis=0, dtype=np.int64).astype(np.float64)
    return [votes[j].copy() for j in range(f)], summed


def byz_inverse_sum(honest_grads, f: int, dim: int | None = None) -> list[np.ndarray]:
    """Gradient-cancelling attack on mean aggregation.

    The first adversary sends the negated left-to-right sum of the observed
    honest gradients; the remaining f - 1 send zero vectors.  The server sums
    messages in the same order with honest ones first, so the mean over all
    workers is the exact zero vector, bit for bit, and the round's update is
    a no-op (weight decay aside).

    ``dim`` is only needed when there are no honest gradients to infer it from.
    """
    if f < 1:
        raise ValueError("inverse-sum attack needs f >= 1 adversaries")
    honest = [as_vector(g, "honest gradient") for g in honest_grads]
    if honest:
        attack = -sequential_sum(honest)
        dim = attack.size
    else:
        if dim is None:
            raise ValueError("dim is required when there are no honest gradients")
        attack = np.zeros(dim, dtype=np.float64)
    return [attack] + [np.zeros(dim, dtype=np.float64) for _ in range(f - 1)]


def byz_oppose_true_sign(true_grad, f: int) -> list[np.ndarray]:
    """Every adversary votes the exact opposite of the true gradient's sign.

    This is the worst case against the majority vote: it wastes no votes on
    coordinates the honest workers already get wrong, so only healthy workers
    can still deliver the true sign.
    """
    if f < 1:
        raise ValueError("oppose-true-sign needs f >= 1 adversaries")
    g = as_vector(true_grad, "true gradient")
    check_finite(g, "true gradient")
    opposed = (-sign(g)).astype(np.int8)
    return [opposed.copy() for _ in range(f)]
