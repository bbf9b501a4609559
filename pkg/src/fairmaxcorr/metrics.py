"""Evaluation measures: ranking/classification performance, group-fairness
measures, and k-nearest-neighbor (KSG) mutual information estimators.

All information quantities are in nats.  Fairness measures raise semantic
errors (see :mod:`fairmaxcorr.errors`) instead of returning sentinel values:
an undefined conditioning cell raises ``UndefinedMetricError`` and a zero
positive rate raises ``InfiniteDiscriminationError``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma
from scipy.stats import rankdata

from .errors import InfiniteDiscriminationError, InputError, UndefinedMetricError

__all__ = [
    "GroupedPredictions",
    "auc",
    "accuracy",
    "balanced_accuracy",
    "mse",
    "discrimination_j",
    "deo",
    "knn_mi",
    "knn_cmi",
    "score_group_correlation",
]

_JITTER_SCALE = 1e-10
_JITTER_SEED = 0x5EED


@dataclass(frozen=True)
class GroupedPredictions:
    """Per-sample scores (or hard predictions), labels, and group membership."""

    score: np.ndarray
    label: np.ndarray
    group: np.ndarray

    def __post_init__(self):
        score = np.asarray(self.score)
        label = np.asarray(self.label)
        group = np.asarray(self.group)
        if not (score.shape == label.shape == group.shape) or score.ndim != 1:
            raise InputError("score, label, group must be equal-length 1-D arrays")
        if score.size == 0:
            raise InputError("at least one sample is required")
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "group", group)


def _as_equal_1d(*arrays):
    out = [np.asarray(a) for a in arrays]
    if any(a.ndim != 1 for a in out) or len({a.shape for a in out}) != 1:
        raise InputError("inputs must be equal-length 1-D arrays")
    if out[0].size == 0:
        raise InputError("empty input")
    return out


def auc(scores, binary_labels) -> float:
    """Area under the ROC curve as a rank statistic; ties count one half."""
    scores, labels = _as_equal_1d(scores, binary_labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(preds, labels) -> float:
    preds, labels = _as_equal_1d(preds, labels)
    return float(np.mean(preds == labels))


def balanced_accuracy(preds, labels) -> float:
    """Mean of per-class recalls over the classes present in the labels."""
    preds, labels = _as_equal_1d(preds, labels)
    recalls = [np.mean(preds[labels == c] == c) for c in np.unique(labels)]
    return float(np.mean(recalls))


def mse(preds, targets) -> float:
    preds, targets = _as_equal_1d(preds, targets)
    return float(np.mean((np.asarray(preds, float) - np.asarray(targets, float)) ** 2))


def discrimination_j(hard_preds, groups) -> float:
    """Largest positive-rate ratio deviation |P(Yhat=1|d)/P(Yhat=1|d') - 1|.

    Any group with zero positive rate makes some ratio diverge; that case is
    surfaced as ``InfiniteDiscriminationError`` rather than a large float.
    """
    preds, groups = _as_equal_1d(hard_preds, groups)
    values = np.unique(groups)
    if values.size < 2:
        raise UndefinedMetricError("discrimination needs at least two groups")
    rates = {g: float(np.mean(preds[groups == g] == 1)) for g in values}
    zero = [g for g, r in rates.items() if r == 0.0]
    if zero:
        raise InfiniteDiscriminationError(
            f"group(s) {zero} have zero positive rate; ratio diverges"
        )
    return float(
        max(abs(rates[a] / rates[b] - 1.0) for a, b in permutations(values, 2))
    )


def deo(hard_preds, labels, binary_groups) -> float:
    """Difference in true-positive rates, P(Yhat=1|D=1,Y=1) - P(Yhat=1|D=0,Y=1).

    Signed; callers wanting a magnitude take the absolute value.
    """
    preds, labels, groups = _as_equal_1d(hard_preds, labels, binary_groups)
    tprs = []
    for g in (0, 1):
        cell = (groups == g) & (labels == 1)
        if not np.any(cell):
            raise UndefinedMetricError(f"no samples with D={g}, Y=1")
        tprs.append(float(np.mean(preds[cell] == 1)))
    return tprs[1] - tprs[0]


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InputError(f"expected 1-D or 2-D array, got ndim={a.ndim}")
    return a


def _jittered(arrays):
    """Add tiny deterministic noise to break ties in discrete-ish columns."""
    rng = np.random.default_rng(_JITTER_SEED)
    return [a + _JITTER_SCALE * rng.standard_normal(a.shape) for a in arrays]


def _strict_counts(points: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Number of points strictly inside a max-norm ball around each point,
    excluding the point itself."""
    tree = cKDTree(points)
    shrunk = np.nextafter(radii, 0.0)
    return tree.query_ball_point(points, shrunk, p=np.inf, return_length=True) - 1


def knn_mi(a, b, k_neighbors: int = 3) -> float:
    """KSG mutual information estimate (max-norm neighborhoods), in nats.

    A degenerate input whose rows are all identical carries no usable
    geometry; the estimate is reported as 0 with a warning.
    """
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[0] != b.shape[0]:
        raise InputError("a and b must have the same number of rows")
    n = a.shape[0]
    if n <= k_neighbors + 1:
        raise InputError(f"need n > k_neighbors + 1, got n={n}, k={k_neighbors}")
    for name, arr in (("a", a), ("b", b)):
        if np.all(arr == arr[0]):
            warnings.warn(
                f"argument {name} is constant; mutual information reported as 0",
                RuntimeWarning,
                stacklevel=2,
            )
            return 0.0
    a, b = _jittered([a, b])
    joint = np.hstack([a, b])
    dist, _ = cKDTree(joint).query(joint, k=k_neighbors + 1, p=np.inf)
    eps = dist[:, -1]
    n_a = _strict_counts(a, eps)
    n_b = _strict_counts(b, eps)
    value = (
        digamma(k_neighbors)
        + digamma(n)
        - float(np.mean(digamma(n_a + 1) + digamma(n_b + 1)))
    )
    return float(value)


def knn_cmi(a, b, c, k_neighbors: int = 3) -> float:
    """Conditional mutual information I(A;B|C) via the conditional KSG variant.

    Neighborhood radii come from the (a, b, c) joint space; counts are taken
    in the (a, c), (b, c), and (c) subspaces.
    """
    a, b, c = _as_2d(a), _as_2d(b), _as_2d(c)
    if not (a.shape[0] == b.shape[0] == c.shape[0]):
        raise InputError("a, b, c must have the same number of rows")
    n = a.shape[0]
    if n <= k_neighbors + 1:
        raise InputError(f"need n > k_neighbors + 1, got n={n}, k={k_neighbors}")
    for name, arr in (("a", a), ("b", b)):
        if np.all(arr == arr[0]):
            warnings.warn(
                f"argument {name} is constant; conditional MI reported as 0",
                RuntimeWarning,
                stacklevel=2,
            )
            return 0.0
    a, b, c = _jittered([a, b, c])
    joint = np.hstack([a, b, c])
    dist, _ = cKDTree(joint).query(joint, k=k_neighbors + 1, p=np.inf)
    eps = dist[:, -1]
    n_ac = _strict_counts(np.hstack([a, c]), eps)
    n_bc = _strict_counts(np.hstack([b, c]), eps)
    n_c = _strict_counts(c, eps)
    value = digamma(k_neighbors) - float(
        np.mean(digamma(n_ac + 1) + digamma(n_bc + 1) - digamma(n_c + 1))
    )
    return float(value)


def score_group_correlation(scores, groups) -> float:
    """Maximal correlation between a real-valued score and a discrete attribute,
    with the score used as-is and the attribute side optimized.

    Equals the norm of the group-conditional means of the standardized score,
    sqrt(sum_g P(g) * E[score~ | g]^2); zero iff the group-conditional means
    coincide.  A constant score yields 0.
    """
    scores, groups = _as_equal_1d(scores, groups)
    scores = np.asarray(scores, dtype=float)
    std = scores.std()
    if std == 0:
        return 0.0
    z = (scores - scores.mean()) / std
    total = 0.0
    for g in np.unique(groups):
        mask = groups == g
        total += mask.mean() * float(z[mask].mean()) ** 2
    return float(np.sqrt(total))
