"""Vector primitives, the exact-zero sign operation, and reproducible random streams.

Workers and server exchange two kinds of values: dense float64 vectors and
sign vectors with entries in {-1, 0, +1}.  Both are plain numpy arrays; the
helpers here validate them and pin down the one convention everything else
leans on: the sign of an exact floating-point zero is 0, compared with no
epsilon.  Vote ties and the sign-cancelling collusion attack are only well
defined because sign sums are integers that can cancel to exactly zero.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "RngStream",
    "as_signs",
    "as_vector",
    "check_finite",
    "l1_norm",
    "sequential_sum",
    "sign",
    "sum_signs",
]


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, copying only if needed."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def check_finite(values: np.ndarray, name: str = "vector") -> None:
    """Reject NaN/inf entries, reporting the first offending coordinate."""
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"{name} has non-finite entry {values[i]!r} at coordinate {i}")


def as_signs(values, name: str = "sign vector") -> np.ndarray:
    """Coerce to a 1-D int8 array and verify every entry is -1, 0, or +1."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isin(arr, (-1, 0, 1)).all():
        raise ValueError(f"{name} entries must be -1, 0, or +1")
    return arr.astype(np.int8)


def sign(values) -> np.ndarray:
    """Coordinate-wise sign with sign(0) == 0 exactly.

    Returns an int8 array over {-1, 0, +1}.  Zero is matched exactly, not
    within a tolerance: a tied majority vote must broadcast 0 and leave the
    corresponding parameter untouched.
    """
    arr = as_vector(values, "sign input")
    check_finite(arr, "sign input")
    return np.sign(arr).astype(np.int8)


def sum_signs(signs) -> np.ndarray:
    """Coordinate-wise sum of sign vectors, accumulated in integers.

    The result is exposed as a float64 vector so it can flow through
    :func:`sign` and the update rules unchanged, but the arithmetic is exact
    integer addition (no rounding for any realistic worker count).
    """
    rows = [as_signs(s) for s in signs]
    if not rows:
        raise ValueError("sum_signs needs at least one sign vector")
    dim = rows[0].size
    total = np.zeros(dim, dtype=np.int64)
    for row in rows:
        if row.size != dim:
            raise ValueError(f"sign vector length mismatch: {row.size} != {dim}")
        total += row
    return total.astype(np.float64)


def l1_norm(values) -> float:
    """Sum of absolute values."""
    arr = as_vector(values, "l1_norm input")
    check_finite(arr, "l1_norm input")
    return float(np.abs(arr).sum())


def sequential_sum(vectors) -> np.ndarray:
    """Strict left-to-right sum of equal-length vectors.

    Floating-point addition is order sensitive.  Fixing the order lets an
    omniscient attacker reproduce the server's partial sums bit for bit, so
    the gradient-cancelling attack zeroes the aggregate exactly rather than
    merely approximately.  Both sides of that exchange must use this helper.
    """
    arrays = [as_vector(v) for v in vectors]
    if not arrays:
        raise ValueError("sequential_sum needs at least one vector")
    dim = arrays[0].size
    total = arrays[0].copy()
    for arr in arrays[1:]:
        if arr.size != dim:
            raise ValueError(f"vector length mismatch: {arr.size} != {dim}")
        total += arr
    return total


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Built on the counter-based Philox generator: streams with distinct ids are
    statistically independent, and a stream's draws depend only on its key,
    never on the order streams are created or consumed.  Two streams built
    with the same (seed, stream_id) produce identical sequences, which is what
    makes parallel and sequential execution bit-identical.

    The key is immutable; drawing from :attr:`generator` advances internal
    state as usual.
    """

    __slots__ = ("seed", "stream_id", "generator")

    def __init__(self, seed: int, stream_id: int = 0):
        for label, value in (("seed", seed), ("stream_id", stream_id)):
            value = int(value)
            if not 0 <= value < 2**64:
                raise ValueError(f"{label} must be an unsigned 64-bit integer, got {value}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
