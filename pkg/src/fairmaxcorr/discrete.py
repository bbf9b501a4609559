"""Fair feature learning on finite alphabets via DTM eigen-decomposition.

The target-relevance / sensitive-penalty objective

    max_{Phi orthonormal}  ||B_target Phi||_F^2 - lambda * ||B_sensitive Phi||_F^2

is solved exactly: both DTMs share sqrt(P_X) as a right singular vector, so
the solver deflates that direction and eigen-decomposes the penalized Gram
matrix on its orthogonal complement.  Feature functions come from dividing
the eigenvectors by sqrt(P_X); target-side functions are recovered with one
alternating-conditional-expectations step followed by whitening, and
predictions use the maximum-a-posteriori rule on the truncated conditional
decomposition P(y|x) = P(y) * [1 + sum_i sigma_i f_i(x) g_i(y)].

For the separation criterion the sensitive DTM is built on the product
alphabet of (sensitive, target), which penalizes the joint dependence and
hence the conditional one.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, InputError
from .probability import Dtm, JointPmf, build_dtm, estimate_joint, product_variable

__all__ = [
    "SvdResult",
    "DiscreteFairModel",
    "dtm_svd",
    "hgr_k",
    "solve_fair_features",
    "normalize_features",
    "ace_step_g",
    "posterior",
    "posterior_table",
    "predict_map",
    "fit_discrete",
    "save_discrete_model",
    "load_discrete_model",
]

_MARGINAL_MATCH_TOL = 1e-6
_ZERO_VARIANCE_TOL = 1e-12

CRITERIA = ("independence", "separation")
DEFAULT_K_CAP = 10


def _fix_signs(columns: np.ndarray, partners: np.ndarray | None = None):
    """Flip column signs so the first nonzero coordinate is positive.

    When ``partners`` is given (matched columns of a second basis), it is
    flipped jointly so paired singular vectors stay consistent.
    """
    cols = columns.copy()
    partners = None if partners is None else partners.copy()
    for j in range(cols.shape[1]):
        nonzero = np.nonzero(np.abs(cols[:, j]) > 1e-12)[0]
        if nonzero.size and cols[nonzero[0], j] < 0:
            cols[:, j] = -cols[:, j]
            if partners is not None:
                partners[:, j] = -partners[:, j]
    return cols if partners is None else (cols, partners)


@dataclass(frozen=True)
class SvdResult:
    """Full SVD of a DTM: descending singular values and orthonormal bases."""

    sigmas: np.ndarray
    psi_x: np.ndarray
    psi_y: np.ndarray


def dtm_svd(dtm: Dtm) -> SvdResult:
    """Singular value decomposition of a DTM.

    The leading triple is always (1, sqrt(P_X), sqrt(P_Y)); the remaining
    singular values are the maximal correlations of the underlying pair.
    """
    try:
        u, s, vt = np.linalg.svd(dtm.matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"SVD failed to converge: {exc}") from exc
    psi_x, psi_y = _fix_signs(vt.T, u)
    return SvdResult(sigmas=s, psi_x=psi_x, psi_y=psi_y)


def hgr_k(joint: JointPmf, k: int) -> float:
    """Sum of the top-k maximal correlations of a discrete pair.

    Zero iff the variables are independent; k must satisfy
    1 <= k <= min(card_a, card_b) - 1.
    """
    cap = min(joint.card_a, joint.card_b) - 1
    if not 1 <= k <= cap:
        raise InputError(f"k must be in [1, {cap}], got {k}")
    result = dtm_svd(build_dtm(joint))
    return float(result.sigmas[1 : k + 1].sum())


def _complement_basis(unit: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to a unit vector.

    Built from the Householder reflection mapping e_0 to ``unit``, which is
    deterministic and exactly orthogonal.
    """
    n = unit.size
    e0 = np.zeros(n)
    e0[0] = 1.0
    w = unit - e0
    norm = np.linalg.norm(w)
    if norm < 1e-14:
        h = np.eye(n)
    else:
        w = w / norm
        h = np.eye(n) - 2.0 * np.outer(w, w)
    return h[:, 1:]


def solve_fair_features(
    b_target: Dtm, b_sensitive: Dtm, lam: float, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the penalized Frobenius-norm maximization over orthonormal Phi.

    Returns ``(phi, eigenvalues)`` where phi is |X| x (k+1) with column 0
    equal to sqrt(P_X), columns 1..k the top-k eigenvectors of
    B_target^T B_target - lam * B_sensitive^T B_sensitive restricted to the
    orthogonal complement of sqrt(P_X), and ``eigenvalues`` their eigenvalues
    in descending order.

    sqrt(P_X) is a shared singular vector of both DTMs but its eigenvalue
    (1 - lam) need not be the largest once lam > 0, so the shared direction
    is deflated explicitly rather than trusted to sort first.
    """
    if b_target.card_a != b_sensitive.card_a:
        raise InputError(
            f"DTMs disagree on |X|: {b_target.card_a} vs {b_sensitive.card_a}"
        )
    if not np.allclose(
        b_target.sqrt_marginal_a, b_sensitive.sqrt_marginal_a, atol=_MARGINAL_MATCH_TOL
    ):
        raise InputError("DTMs were built from different X marginals")
    card_x = b_target.card_a
    if not 1 <= k <= card_x - 1:
        raise InputError(f"k must be in [1, {card_x - 1}], got {k}")

    sqrt_px = b_target.sqrt_marginal_a
    m = b_target.matrix.T @ b_target.matrix - lam * (
        b_sensitive.matrix.T @ b_sensitive.matrix
    )
    basis = _complement_basis(sqrt_px)
    reduced = basis.T @ m @ basis
    reduced = 0.5 * (reduced + reduced.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(reduced)
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(eigvals)[::-1][:k]
    top = _fix_signs(basis @ eigvecs[:, order])
    phi = np.column_stack([sqrt_px, top])
    return phi, eigvals[order]


def normalize_features(phi: np.ndarray, sqrt_px: np.ndarray) -> np.ndarray:
    """Turn orthonormal columns into feature functions f_i(x) = phi_i(x)/sqrt(P_X).

    Column 0 of ``phi`` must equal sqrt_px (it would normalize to the constant
    function and is dropped).  Cells with P_X(x) = 0 get feature value 0; such
    x never occur at training time and prediction falls back to the prior.
    """
    phi = np.asarray(phi, dtype=float)
    sqrt_px = np.asarray(sqrt_px, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != sqrt_px.size:
        raise InputError(f"phi shape {phi.shape} inconsistent with |X| = {sqrt_px.size}")
    if not np.allclose(phi[:, 0], sqrt_px, atol=1e-8):
        raise InputError("phi column 0 must equal sqrt(P_X)")
    denom = sqrt_px[:, None]
    return np.divide(
        phi[:, 1:], denom, out=np.zeros_like(phi[:, 1:]), where=denom > 0
    )


def ace_step_g(f_table: np.ndarray, joint_xy: JointPmf) -> tuple[np.ndarray, np.ndarray]:
    """One alternating-conditional-expectations step: recover g from f.

    Computes ghat_i(y) = E[f_i(X) | Y=y], whitens under P_Y so that
    E[g(Y) g(Y)^T] = I, and returns ``(g_table, sigma)`` with
    sigma_i = E[f_i(X) g_i(Y)] clipped to [0, 1].  Degenerate (zero-variance)
    directions are dropped from the whitening: the affected g columns and
    sigmas are zero and a warning is emitted.
    """
    f = np.asarray(f_table, dtype=float)
    if f.ndim != 2 or f.shape[0] != joint_xy.card_a:
        raise InputError(f"f_table shape {f.shape} inconsistent with |X| = {joint_xy.card_a}")
    px = joint_xy.marginal_a
    means = px @ f
    if np.any(np.abs(means) > 1e-6):
        raise InputError("feature columns are not mean-zero under P_X")

    py = joint_xy.marginal_b
    cond = np.divide(
        joint_xy.probs,
        py[None, :],
        out=np.zeros_like(joint_xy.probs),
        where=py[None, :] > 0,
    )
    ghat = cond.T @ f  # (|Y|, k), row y is E[f | Y=y]

    second_moment = (ghat * py[:, None]).T @ ghat
    second_moment = 0.5 * (second_moment + second_moment.T)
    eigvals, eigvecs = np.linalg.eigh(second_moment)
    keep = eigvals > _ZERO_VARIANCE_TOL
    if not np.all(keep):
        dropped = int((~keep).sum())
        warnings.warn(
            f"{dropped} degenerate target-side direction(s) had (near-)zero "
            "variance; the corresponding g columns and sigmas are zero",
            RuntimeWarning,
            stacklevel=2,
        )
    inv_sqrt = np.zeros_like(eigvals)
    inv_sqrt[keep] = 1.0 / np.sqrt(eigvals[keep])
    whitener = eigvecs @ np.diag(inv_sqrt) @ eigvecs.T
    g = ghat @ whitener

    sigma = np.einsum("xi,xy,yi->i", f, joint_xy.probs, g)
    return g, np.clip(sigma, 0.0, 1.0)


@dataclass(frozen=True)
class DiscreteFairModel:
    """Fitted fair feature tables plus everything needed to predict.

    ``f_table`` is |X| x k, ``g_table`` |Y| x k, ``sigma`` the k recovered
    correlations, ``prior_y`` the training label marginal.  Encoders (category
    dictionaries from the datasets module) ride along for serialization.
    """

    k: int
    lam: float
    criterion: str
    f_table: np.ndarray
    g_table: np.ndarray
    sigma: np.ndarray
    prior_y: np.ndarray
    x_encoder: dict | None = None
    y_encoder: dict | None = None

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise InputError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        object.__setattr__(self, "f_table", np.asarray(self.f_table, dtype=float))
        object.__setattr__(self, "g_table", np.asarray(self.g_table, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "prior_y", np.asarray(self.prior_y, dtype=float))

    @property
    def card_x(self) -> int:
        return self.f_table.shape[0]

    @property
    def card_y(self) -> int:
        return self.g_table.shape[0]


def posterior(model: DiscreteFairModel, x: int) -> np.ndarray:
    """Posterior over Y at a single x via the truncated decomposition.

    Raw scores P(y) * [1 + sum_i sigma_i f_i(x) g_i(y)] may go slightly
    negative after truncation to k terms; they are clamped at zero and
    renormalized, falling back to the prior when everything clamps (and for
    x unseen at training time, whose feature row is zero).
    """
    if not 0 <= int(x) < model.card_x:
        raise InputError(f"x = {x} outside alphabet of size {model.card_x}")
    scores = model.prior_y * (
        1.0 + model.g_table @ (model.sigma * model.f_table[int(x)])
    )
    scores = np.maximum(scores, 0.0)
    total = scores.sum()
    if total <= 0.0:
        return model.prior_y.copy()
    return scores / total


def posterior_table(model: DiscreteFairModel) -> np.ndarray:
    """Posterior over Y for every x at once; rows are posterior(model, x)."""
    scores = model.prior_y[None, :] * (
        1.0 + (model.f_table * model.sigma) @ model.g_table.T
    )
    scores = np.maximum(scores, 0.0)
    totals = scores.sum(axis=1, keepdims=True)
    fallback = np.broadcast_to(model.prior_y, scores.shape)
    return np.where(totals > 0, scores / np.where(totals > 0, totals, 1.0), fallback)


def predict_map(model: DiscreteFairModel, x: int) -> int:
    """Maximum-a-posteriori label; ties break toward the smallest index."""
    return int(np.argmax(posterior(model, x)))


def _default_k(card_x: int, card_target_side: int) -> int:
    return max(1, min(min(card_x, card_target_side) - 1, DEFAULT_K_CAP))


def fit_discrete(
    x,
    y,
    d,
    criterion: str = "independence",
    lam: float = 0.0,
    k: int | None = None,
    card_x: int | None = None,
    card_y: int | None = None,
    card_d: int | None = None,
    smoothing: float = 0.0,
    x_encoder: dict | None = None,
    y_encoder: dict | None = None,
) -> DiscreteFairModel:
    """Fit the full discrete pipeline on index sequences.

    estimate joints -> build DTMs -> solve penalized features -> normalize ->
    one ACE step.  The sensitive DTM is B_{D,X} for independence and
    B_{(D x Y),X} for separation; separation requires lam in [0, 1) because
    the target term carries weight (1 - lam) on the shared subspace.

    ``smoothing`` applies to the target joint; the sensitive joint receives
    the equivalent per-x pseudo-mass (scaled by the alphabet-size ratio) so
    both DTMs keep identical X marginals.
    """
    if criterion not in CRITERIA:
        raise InputError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if criterion == "separation":
        if not 0.0 <= lam < 1.0:
            raise InputError(f"separation requires lambda in [0, 1), got {lam}")
    elif lam < 0.0:
        raise InputError(f"independence requires lambda >= 0, got {lam}")

    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    if not (x.shape == y.shape == d.shape) or x.ndim != 1 or x.size == 0:
        raise InputError("x, y, d must be equal-length nonempty 1-D index sequences")
    card_x = int(card_x if card_x is not None else x.max() + 1)
    card_y = int(card_y if card_y is not None else y.max() + 1)
    card_d = int(card_d if card_d is not None else d.max() + 1)

    joint_xy = estimate_joint(np.column_stack([x, y]), card_x, card_y, smoothing)
    if criterion == "independence":
        sens, card_s = d, card_d
    else:
        sens = product_variable(d, y, card_d, card_y)
        card_s = card_d * card_y
    sens_smoothing = smoothing * card_y / card_s
    joint_xs = estimate_joint(np.column_stack([x, sens]), card_x, card_s, sens_smoothing)

    b_target = build_dtm(joint_xy)
    b_sensitive = build_dtm(joint_xs)
    if k is None:
        k = _default_k(card_x, card_y if criterion == "independence" else card_s)
    phi, _ = solve_fair_features(b_target, b_sensitive, lam, k)
    f_table = normalize_features(phi, b_target.sqrt_marginal_a)
    g_table, sigma = ace_step_g(f_table, joint_xy)
    return DiscreteFairModel(
        k=k,
        lam=lam,
        criterion=criterion,
        f_table=f_table,
        g_table=g_table,
        sigma=sigma,
        prior_y=joint_xy.marginal_b,
        x_encoder=x_encoder,
        y_encoder=y_encoder,
    )


_DISCRETE_FORMAT = "fairmaxcorr/discrete-model"


def save_discrete_model(model: DiscreteFairModel, path) -> None:
    """Write a model as a self-describing JSON document."""
    payload = {
        "format": _DISCRETE_FORMAT,
        "version": 1,
        "card_x": model.card_x,
        "card_y": model.card_y,
        "k": model.k,
        "lambda": model.lam,
        "criterion": model.criterion,
        "f_table": model.f_table.tolist(),
        "g_table": model.g_table.tolist(),
        "sigma": model.sigma.tolist(),
        "prior_y": model.prior_y.tolist(),
        "x_encoder": model.x_encoder,
        "y_encoder": model.y_encoder,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_discrete_model(path) -> DiscreteFairModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _DISCRETE_FORMAT:
        raise InputError(f"{path}: not a discrete model file")
    return DiscreteFairModel(
        k=payload["k"],
        lam=payload["lambda"],
        criterion=payload["criterion"],
        f_table=np.array(payload["f_table"]),
        g_table=np.array(payload["g_table"]),
        sigma=np.array(payload["sigma"]),
        prior_y=np.array(payload["prior_y"]),
        x_encoder=payload.get("x_encoder"),
        y_encoder=payload.get("y_encoder"),
    )
