"""Soft-HGR penalty and alternating minimax training for continuous data.

The Soft-HGR value of two critic output batches g(A), h(B) is

    E[g^T h] - 1/2 * tr(cov(g) * cov(h)),

with outputs re-centered per batch and all (co)variances using the 1/(n-1)
estimator.  Maximized over critics it approximates half the sum of squared
maximal correlations, so it serves as a differentiable dependence penalty.

Training alternates one model step (feature net + head, minimizing
MSE + lambda * penalty) with several critic ascent steps per batch.  For the
independence criterion the penalty is the Soft-HGR between features and the
sensitive variable; for separation it is the difference between the
(features, sensitive-and-target) and (features, target) terms, each with its
own critic pair, which approximates the conditional dependence.  The
continuous analogue of the discrete product alphabet is vector concatenation
of the sensitive and target columns.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .nn import Mlp, backward, forward, mlp_from_dict, mlp_to_dict, sgd_step

__all__ = [
    "FEATURE_HIDDEN",
    "CRITIC_HIDDEN",
    "TrainConfig",
    "CriticPair",
    "ContinuousFairModel",
    "TrainHistory",
    "soft_hgr_value",
    "soft_hgr_terms",
    "make_critic_pair",
    "critic_ascent_step",
    "train_independence",
    "train_separation",
    "few_shot_adapt",
    "predict",
    "save_continuous_model",
    "load_continuous_model",
]

FEATURE_HIDDEN = 50
CRITIC_HIDDEN = 16

CRITERIA = ("independence", "separation")


@dataclass
class TrainConfig:
    """Hyperparameters for the alternating training loops."""

    epochs: int = 200
    batch_size: int = 128
    lr_model: float = 1e-3
    lr_critic: float = 1e-2
    critic_steps: int = 5
    k: int = 1
    seed: int = 0
    feature_dim: int = 8

    def __post_init__(self):
        if self.critic_steps < 1:
            raise InputError(f"critic_steps must be >= 1, got {self.critic_steps}")
        if self.epochs < 1 or self.batch_size < 2:
            raise InputError("epochs must be >= 1 and batch_size >= 2")
        if self.k < 1 or self.feature_dim < 1:
            raise InputError("k and feature_dim must be >= 1")
        if self.lr_model <= 0 or self.lr_critic <= 0:
            raise InputError("learning rates must be positive")


@dataclass
class CriticPair:
    """Critic networks g: R^m -> R^k on features and h on the compared side."""

    g: Mlp
    h: Mlp
    k: int

    def copy(self) -> "CriticPair":
        return CriticPair(self.g.copy(), self.h.copy(), self.k)


@dataclass
class ContinuousFairModel:
    """Feature network plus prediction head; prediction is head(features(x))."""

    feature_net: Mlp
    head: Mlp
    lam: float
    criterion: str
    feature_dim: int

    def copy(self) -> "ContinuousFairModel":
        return ContinuousFairModel(
            self.feature_net.copy(), self.head.copy(), self.lam, self.criterion,
            self.feature_dim,
        )


@dataclass
class TrainHistory:
    """Per-epoch training record; ``rows()`` yields (epoch, mse, penalty)."""

    mse: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str | None = None

    def rows(self):
        return [(i, m, p) for i, (m, p) in enumerate(zip(self.mse, self.penalty))]


def _centered(out: np.ndarray) -> np.ndarray:
    return out - out.mean(axis=0, keepdims=True)


def soft_hgr_terms(g_out, h_out) -> tuple[float, float]:
    """(correlation term, trace-of-covariances term) of the Soft-HGR value."""
    g = np.asarray(g_out, dtype=float)
    h = np.asarray(h_out, dtype=float)
    if g.ndim != 2 or h.ndim != 2 or g.shape[0] != h.shape[0]:
        raise InputError("critic outputs must be 2-D with equal row counts")
    n = g.shape[0]
    if n < 2:
        raise InputError(f"need at least 2 rows, got {n}")
    gc, hc = _centered(g), _centered(h)
    cross = float(np.sum(gc * hc) / (n - 1))
    cov_g = gc.T @ gc / (n - 1)
    cov_h = hc.T @ hc / (n - 1)
    quad = float(np.sum(cov_g * cov_h.T))  # tr(cov_g @ cov_h)
    return cross, quad


def soft_hgr_value(g_out, h_out) -> float:
    """Soft-HGR dependence value of two critic output batches."""
    cross, quad = soft_hgr_terms(g_out, h_out)
    return cross - 0.5 * quad


def _soft_hgr_grads(g_out: np.ndarray, h_out: np.ndarray):
    """Value plus its gradients with respect to the raw critic outputs."""
    n = g_out.shape[0]
    gc, hc = _centered(g_out), _centered(h_out)
    cov_g = gc.T @ gc / (n - 1)
    cov_h = hc.T @ hc / (n - 1)
    value = float(np.sum(gc * hc) / (n - 1)) - 0.5 * float(np.sum(cov_g * cov_h.T))
    # Centering projects gradients onto mean-zero columns; both terms below
    # are already column-centered, so the projection is a no-op.
    d_g = (hc - gc @ cov_h) / (n - 1)
    d_h = (gc - hc @ cov_g) / (n - 1)
    return value, d_g, d_h


def make_critic_pair(
    feature_dim: int, side_dim: int, k: int, rng: np.random.Generator
) -> CriticPair:
    """Fresh two-layer critics for the feature side and the compared side."""
    g = Mlp([feature_dim, CRITIC_HIDDEN, k], rng)
    h = Mlp([side_dim, CRITIC_HIDDEN, k], rng)
    return CriticPair(g, h, k)


def critic_ascent_step(
    pair: CriticPair, features: np.ndarray, side: np.ndarray, lr: float
) -> float:
    """One gradient-ascent step of both critics on their Soft-HGR value.

    Returns the value before the update.  Ascent is realized by descending on
    the negated output gradients.
    """
    g_out = forward(pair.g, features)
    h_out = forward(pair.h, side)
    value, d_g, d_h = _soft_hgr_grads(g_out, h_out)
    sgd_step(pair.g, backward(pair.g, features, -d_g), lr)
    sgd_step(pair.h, backward(pair.h, side, -d_h), lr)
    return value


def _as_column(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def _data_arrays(data):
    if isinstance(data, tuple):
        x, y, d = data
    else:
        x, y, d = data.x, data.y, data.d
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InputError(f"x must be 2-D, got shape {x.shape}")
    y = _as_column(y)
    d = _as_column(d)
    if y.shape[1] != 1:
        raise InputError("target must be a single column")
    if not (x.shape[0] == y.shape[0] == d.shape[0]):
        raise InputError("x, y, d row counts disagree")
    return x, y, d


def _penalty_sides(criterion: str, y: np.ndarray, d: np.ndarray):
    """(side array, sign) for each Soft-HGR term of the criterion."""
    if criterion == "independence":
        return [(d, 1.0)]
    return [(np.hstack([d, y]), 1.0), (y, -1.0)]


def _spawn_rngs(seed: int):
    """Independent streams for model init, critic init, and batch shuffling.

    Keeping the streams separate makes the lambda = 0 model trajectory
    bitwise identical to plain MSE training with the same seed.
    """
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def _model_step(f, head, critics, sides, signs, xb, yb, lam, lr):
    """One descent step on MSE + lambda * penalty; returns (mse, penalty)."""
    fx = forward(f, xb)
    pred = forward(head, fx)
    err = pred - yb
    mse_b = float(np.mean(err**2))
    tape_head = backward(head, fx, 2.0 * err / err.shape[0])
    fx_grad = tape_head.input_grad
    penalty = 0.0
    for pair, side_b, sign in zip(critics, sides, signs):
        g_out = forward(pair.g, fx)
        h_out = forward(pair.h, side_b)
        value, d_g, _ = _soft_hgr_grads(g_out, h_out)
        penalty += sign * value
        if lam != 0.0:
            fx_grad = fx_grad + backward(pair.g, fx, (lam * sign) * d_g).input_grad
    tape_f = backward(f, xb, fx_grad)
    sgd_step(head, tape_head, lr)
    sgd_step(f, tape_f, lr)
    return mse_b, penalty


def _train(data, lam: float, cfg: TrainConfig, criterion: str):
    if lam < 0:
        raise InputError(f"lambda must be nonnegative, got {lam}")
    x, y, d = _data_arrays(data)
    n = x.shape[0]
    if n < 2:
        raise InputError("need at least 2 training samples")
    model_rng, critic_rng, shuffle_rng = _spawn_rngs(cfg.seed)
    f = Mlp([x.shape[1], FEATURE_HIDDEN, cfg.feature_dim], model_rng)
    head = Mlp([cfg.feature_dim, 1], model_rng)
    sides_full = _penalty_sides(criterion, y, d)
    signs = [sign for _, sign in sides_full]
    critics = [
        make_critic_pair(cfg.feature_dim, side.shape[1], cfg.k, critic_rng)
        for side, _ in sides_full
    ]
    history = TrainHistory()
    for _ in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        mse_sum = pen_sum = weight = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if idx.size < 2:
                continue  # covariance needs two rows; drop a trailing singleton
            xb, yb = x[idx], y[idx]
            sides_b = [side[idx] for side, _ in sides_full]
            fx = forward(f, xb)
            for _ in range(cfg.critic_steps):
                for pair, side_b in zip(critics, sides_b):
                    critic_ascent_step(pair, fx, side_b, cfg.lr_critic)
            mse_b, pen_b = _model_step(
                f, head, critics, sides_b, signs, xb, yb, lam, cfg.lr_model
            )
            if not np.isfinite(mse_b) or not np.isfinite(pen_b):
                history.aborted = True
                history.abort_reason = (
                    f"non-finite loss (mse={mse_b}, penalty={pen_b}) at epoch "
                    f"{len(history.mse)}"
                )
                warnings.warn(history.abort_reason, RuntimeWarning, stacklevel=3)
                model = ContinuousFairModel(f, head, lam, criterion, cfg.feature_dim)
                return model, history
            mse_sum += mse_b * idx.size
            pen_sum += pen_b * idx.size
            weight += idx.size
        history.mse.append(mse_sum / weight)
        history.penalty.append(pen_sum / weight)
    model = ContinuousFairModel(f, head, lam, criterion, cfg.feature_dim)
    return model, history


def train_independence(data, lam: float, cfg: TrainConfig | None = None):
    """Train features + head with the Soft-HGR independence penalty.

    Returns ``(model, history)``; aborts with a partial history if the loss
    turns non-finite.
    """
    return _train(data, lam, cfg or TrainConfig(), "independence")


def train_separation(data, lam: float, cfg: TrainConfig | None = None):
    """Train with the conditional (separation) penalty: the Soft-HGR against
    the concatenated (sensitive, target) side minus the Soft-HGR against the
    target alone, each term with its own critic pair."""
    return _train(data, lam, cfg or TrainConfig(), "separation")


def few_shot_adapt(
    model: ContinuousFairModel,
    few,
    lam: float,
    steps: int = 5,
    cfg: TrainConfig | None = None,
    criterion: str | None = None,
) -> ContinuousFairModel:
    """Post-hoc debiasing: a handful of full-objective updates on a tiny
    sensitive-labeled batch.

    Critics are warm-started fresh and take ``cfg.critic_steps`` ascent steps
    before each of the ``steps`` model updates.  The input model is left
    untouched; with steps = 0 the returned copy is bit-identical to it.
    """
    if lam < 0:
        raise InputError(f"lambda must be nonnegative, got {lam}")
    if steps < 0:
        raise InputError(f"steps must be nonnegative, got {steps}")
    cfg = cfg or TrainConfig()
    criterion = criterion or model.criterion
    if criterion not in CRITERIA:
        raise InputError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    x, y, d = _data_arrays(few)
    if x.shape[0] == 0:
        raise InputError("few-shot set is empty")
    adapted = model.copy()
    if steps == 0:
        return adapted
    if x.shape[0] < 2:
        raise InputError("few-shot set needs at least 2 samples")
    _, critic_rng, _ = _spawn_rngs(cfg.seed)
    sides_full = _penalty_sides(criterion, y, d)
    signs = [sign for _, sign in sides_full]
    critics = [
        make_critic_pair(adapted.feature_dim, side.shape[1], cfg.k, critic_rng)
        for side, _ in sides_full
    ]
    sides = [side for side, _ in sides_full]
    for _ in range(steps):
        fx = forward(adapted.feature_net, x)
        for _ in range(cfg.critic_steps):
            for pair, side in zip(critics, sides):
                critic_ascent_step(pair, fx, side, cfg.lr_critic)
        _model_step(
            adapted.feature_net, adapted.head, critics, sides, signs, x, y, lam,
            cfg.lr_model,
        )
    return adapted


def predict(model: ContinuousFairModel, x) -> np.ndarray:
    """Point predictions head(features(x)) as a flat vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InputError(f"x must be 2-D, got shape {x.shape}")
    return forward(model.head, forward(model.feature_net, x)).ravel()


_CONTINUOUS_FORMAT = "fairmaxcorr/continuous-model"


def save_continuous_model(
    model: ContinuousFairModel, path, critics: list[CriticPair] | None = None
) -> None:
    """Write model (and optionally critics) as a self-describing JSON document."""
    payload = {
        "format": _CONTINUOUS_FORMAT,
        "version": 1,
        "lambda": model.lam,
        "criterion": model.criterion,
        "feature_dim": model.feature_dim,
        "feature_net": mlp_to_dict(model.feature_net),
        "head": mlp_to_dict(model.head),
    }
    if critics is not None:
        payload["critics"] = [
            {"g": mlp_to_dict(p.g), "h": mlp_to_dict(p.h), "k": p.k} for p in critics
        ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_continuous_model(path) -> ContinuousFairModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _CONTINUOUS_FORMAT:
        raise InputError(f"{path}: not a continuous model file")
    return ContinuousFairModel(
        feature_net=mlp_from_dict(payload["feature_net"]),
        head=mlp_from_dict(payload["head"]),
        lam=payload["lambda"],
        criterion=payload["criterion"],
        feature_dim=payload["feature_dim"],
    )
