"""Empirical joint distributions over finite alphabets and their divergence
transfer matrices (DTMs).

The DTM of a joint distribution P_{A,B} is the |B|x|A| matrix

    B(b, a) = P_{A,B}(a, b) / (sqrt(P_A(a)) * sqrt(P_B(b))),

whose largest singular value is always 1 with singular vectors equal to the
square-root marginals, and whose remaining singular values are the maximal
correlations between A and B.  Alphabets are dense 0-based index spaces;
category dictionaries live in :mod:`fairmaxcorr.datasets`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "JointPmf",
    "Dtm",
    "ProductEncoding",
    "estimate_joint",
    "build_dtm",
    "product_variable",
]

_SUM_TOL = 1e-12
_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class JointPmf:
    """Joint probability table over two finite alphabets.

    ``probs[a, b]`` is the probability of the pair ``(a, b)``.  Entries are
    nonnegative and sum to one; marginals are derived at construction.
    """

    probs: np.ndarray
    marginal_a: np.ndarray = field(init=False)
    marginal_b: np.ndarray = field(init=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise InputError(f"probs must be a 2-D table, got shape {probs.shape}")
        if np.any(probs < 0):
            raise InputError("probs contains negative entries")
        total = probs.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise InputError(f"probs sums to {total!r}, expected 1 within {_SUM_TOL}")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "marginal_a", probs.sum(axis=1))
        object.__setattr__(self, "marginal_b", probs.sum(axis=0))

    @property
    def card_a(self) -> int:
        return self.probs.shape[0]

    @property
    def card_b(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class Dtm:
    """Divergence transfer matrix with cached square-root marginals.

    ``matrix`` has shape (card_b, card_a); rows index the second variable.
    Cells whose row or column marginal is zero are set to zero so the shape
    stays static for any alphabet.
    """

    matrix: np.ndarray
    sqrt_marginal_a: np.ndarray
    sqrt_marginal_b: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        sa = np.asarray(self.sqrt_marginal_a, dtype=float)
        sb = np.asarray(self.sqrt_marginal_b, dtype=float)
        if m.shape != (sb.size, sa.size):
            raise InputError(
                f"matrix shape {m.shape} inconsistent with marginals "
                f"({sb.size}, {sa.size})"
            )
        # B * sqrt(P_A) = sqrt(P_B) holds for every valid DTM, including ones
        # with zero-marginal cells; it is cheap enough to check on every build.
        if not np.allclose(m @ sa, sb, atol=_CONSISTENCY_TOL):
            raise InputError("matrix does not map sqrt_marginal_a to sqrt_marginal_b")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sqrt_marginal_a", sa)
        object.__setattr__(self, "sqrt_marginal_b", sb)

    @property
    def card_a(self) -> int:
        return self.matrix.shape[1]

    @property
    def card_b(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ProductEncoding:
    """Bijection between pairs (d, y) and the flat index d * card_y + y."""

    card_d: int
    card_y: int

    def __post_init__(self):
        if self.card_d < 1 or self.card_y < 1:
            raise InputError("cardinalities must be positive")

    @property
    def card(self) -> int:
        return self.card_d * self.card_y

    def encode(self, d: int, y: int) -> int:
        if not (0 <= d < self.card_d and 0 <= y < self.card_y):
            raise InputError(f"pair ({d}, {y}) outside {self.card_d}x{self.card_y}")
        return d * self.card_y + y

    def decode(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.card):
            raise InputError(f"index {index} outside product alphabet of size {self.card}")
        return divmod(index, self.card_y)


def estimate_joint(pairs, card_a: int, card_b: int, smoothing: float = 0.0) -> JointPmf:
    """Estimate a joint pmf from index pairs with optional additive smoothing.

    probs[a, b] = (count(a, b) + smoothing) / (n + smoothing * card_a * card_b)
    """
    if card_a < 1 or card_b < 1:
        raise InputError("cardinalities must be positive")
    if smoothing < 0:
        raise InputError(f"smoothing must be nonnegative, got {smoothing}")
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs)
    if arr.size == 0:
        raise InputError("at least one sample pair is required")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError(f"pairs must be (n, 2)-shaped, got {arr.shape}")
    a = arr[:, 0].astype(np.int64)
    b = arr[:, 1].astype(np.int64)
    if np.any((a < 0) | (a >= card_a)):
        raise InputError("first-variable index out of range")
    if np.any((b < 0) | (b >= card_b)):
        raise InputError("second-variable index out of range")
    counts = np.bincount(a * card_b + b, minlength=card_a * card_b).reshape(card_a, card_b)
    n = len(a)
    probs = (counts + smoothing) / (n + smoothing * card_a * card_b)
    return JointPmf(probs)


def build_dtm(joint: JointPmf) -> Dtm:
    """Construct the divergence transfer matrix of a joint pmf."""
    sqrt_a = np.sqrt(joint.marginal_a)
    sqrt_b = np.sqrt(joint.marginal_b)
    denom = np.outer(sqrt_b, sqrt_a)
    matrix = np.divide(
        joint.probs.T,
        denom,
        out=np.zeros((joint.card_b, joint.card_a)),
        where=denom > 0,
    )
    return Dtm(matrix, sqrt_a, sqrt_b)


def product_variable(d_indices, y_indices, card_d: int, card_y: int) -> np.ndarray:
    """Combine two index sequences into the flat product alphabet d * card_y + y."""
    enc = ProductEncoding(card_d, card_y)
    d = np.asarray(d_indices, dtype=np.int64)
    y = np.asarray(y_indices, dtype=np.int64)
    if d.shape != y.shape or d.ndim != 1:
        raise InputError(f"index sequences must be equal-length 1-D, got {d.shape} and {y.shape}")
    if np.any((d < 0) | (d >= card_d)):
        raise InputError("d index out of range")
    if np.any((y < 0) | (y >= card_y)):
        raise InputError("y index out of range")
    return d * enc.card_y + y
