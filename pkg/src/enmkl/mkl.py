"""Elastic-net multiple kernel learning with analytical weight updates.

The model learns a convex combination ``K = sum_j beta_j K_j`` jointly with
an SVM or kernel ridge regression on the combined kernel. A mixing
parameter ``mu`` in (0, 1] interpolates between sparsity-inducing l1
regularization of the kernel weights (mu = 1) and a uniform l2 blend
(mu -> 0). Training alternates between

1. solving the single-kernel dual on the current combined kernel, and
2. closed-form updates of the per-kernel weights from the block norms

    ||w_j||   = beta_j * sqrt(q' K_j q)          (q = alpha * y, or alpha)
    lambda_j  = ||w_j|| / (sqrt(mu) * sum_k ||w_k||)
    beta_j    = 1 / (sqrt(mu) / lambda_j + (1 - mu))

until the unit-sum-normalized weights stop moving. After the loop, alpha is
rescaled by ``sum_j beta_j`` and beta normalized to the unit simplex; the
rescaled pair produces bit-for-bit identical decision values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from . import solvers
from .kernels import (
    GroupedDataset,
    KernelStack,
    group_feature_means,
    preprocess_feature_rows,
    weighted_sum,
)

DEFAULT_CONV_TOL = 1e-4
DEFAULT_MAX_ITER = 200
# Weights this small are fixed to zero: beta_j = 0 is a fixed point of the
# update chain, so dropping the kernel from the weighted sum is inert.
BETA_DROP_TOL = 1e-12
# A kernel counts as selected when its normalized weight exceeds this.
SELECTION_THRESHOLD = 1e-5

_TASKS = ("classification", "regression")


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not (np.isfinite(mu) and 0.0 < mu <= 1.0):
        raise ValueError(
            f"mu must lie in (0, 1], got {mu!r}; "
            "mu = 0 corresponds to the unweighted-sum baseline (train_sum_baseline)"
        )
    return mu


def _check_task(task: str) -> str:
    if task not in _TASKS:
        raise ValueError(f"task must be one of {_TASKS}, got {task!r}")
    return task


@dataclass(frozen=True)
class BlockNormState:
    """One iteration's block norms and the weights derived from them.

    Invariants (checked when any norm is positive): ``lambdas`` follow from
    ``w_norms`` by the scaling rule above, so ``sqrt(mu) * sum(lambdas)``
    equals one.
    """

    w_norms: np.ndarray
    lambdas: np.ndarray
    beta_raw: np.ndarray
    mu: float

    def __post_init__(self):
        w = np.array(self.w_norms, dtype=np.float64, copy=True)
        lam = np.array(self.lambdas, dtype=np.float64, copy=True)
        beta = np.array(self.beta_raw, dtype=np.float64, copy=True)
        mu = _check_mu(self.mu)
        if not (w.shape == lam.shape == beta.shape) or w.ndim != 1:
            raise ValueError("w_norms, lambdas, and beta_raw must be parallel 1-d arrays")
        if (w < 0).any():
            raise ValueError("block norms must be nonnegative")
        total = float(w.sum())
        if total > 0:
            expected = w / (np.sqrt(mu) * total)
            if float(np.abs(lam - expected).max()) > 1e-10:
                raise ValueError("lambdas are inconsistent with the block norms")
            if abs(np.sqrt(mu) * float(lam.sum()) - 1.0) > 1e-10:
                raise ValueError("lambdas do not satisfy sqrt(mu) * sum(lambda) = 1")
        for arr in (w, lam, beta):
            arr.setflags(write=False)
        object.__setattr__(self, "w_norms", w)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "beta_raw", beta)
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class MklModel:
    """A trained multiple-kernel model.

    ``beta`` lives on the unit simplex and ``alpha`` is already rescaled to
    match, so decision values on a preprocessed cross stack are
    ``weighted_sum(stack, beta) @ coef + bias`` with ``coef = alpha *
    train_labels`` for classification and ``alpha`` for regression. For
    regression ``bias`` holds the training-target mean.

    ``beta_raw_sum`` preserves the pre-normalization weight total, so the
    raw pairing ``(alpha / beta_raw_sum, beta * beta_raw_sum)`` can be
    reconstructed. ``degenerate`` marks the all-zero-block-norm failure mode
    where uniform weights are returned.
    """

    beta: np.ndarray
    alpha: np.ndarray
    bias: float
    task: str
    mu: float
    C: float
    iterations: int
    converged: bool
    group_names: tuple[str, ...]
    sample_ids: tuple[str, ...]
    train_labels: np.ndarray | None = None
    group_sizes: tuple[int, ...] | None = None
    degenerate: bool = False
    centered: bool = True
    normalized: bool = True
    kernel_kind: str = "linear"
    beta_raw_sum: float = 1.0
    objective_history: tuple[float, ...] = ()

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64, copy=True)
        alpha = np.array(self.alpha, dtype=np.float64, copy=True)
        task = _check_task(self.task)
        if beta.ndim != 1 or beta.shape[0] != len(self.group_names):
            raise ValueError("beta must hold one weight per group")
        if (beta < 0).any():
            raise ValueError("kernel weights must be nonnegative")
        if abs(float(beta.sum()) - 1.0) > 1e-10:
            raise ValueError("kernel weights must sum to one")
        if alpha.ndim != 1 or alpha.shape[0] != len(self.sample_ids):
            raise ValueError("alpha must hold one coefficient per train sample")
        labels = self.train_labels
        if task == "classification":
            if labels is None:
                raise ValueError("classification models must carry their train labels")
            labels = np.array(labels, dtype=np.float64, copy=True)
            if labels.shape != alpha.shape:
                raise ValueError("train labels must be parallel to alpha")
            labels.setflags(write=False)
        elif labels is not None:
            raise ValueError("regression models do not carry train labels")
        sizes = self.group_sizes
        if sizes is not None:
            sizes = tuple(int(s) for s in sizes)
            if len(sizes) != len(self.group_names):
                raise ValueError("group_sizes must be parallel to group_names")
        beta.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "task", task)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "C", float(self.C))
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "converged", bool(self.converged))
        object.__setattr__(self, "group_names", tuple(str(g) for g in self.group_names))
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "train_labels", labels)
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "degenerate", bool(self.degenerate))
        object.__setattr__(self, "centered", bool(self.centered))
        object.__setattr__(self, "normalized", bool(self.normalized))
        object.__setattr__(self, "kernel_kind", str(self.kernel_kind))
        object.__setattr__(self, "beta_raw_sum", float(self.beta_raw_sum))
        object.__setattr__(
            self, "objective_history", tuple(float(v) for v in self.objective_history)
        )


def compute_block_norms(
    stack: KernelStack, alpha, labels=None, beta=None
) -> np.ndarray:
    """Per-kernel primal block norms from the dual coefficients.

    ``||w_j|| = beta_j * sqrt(q' K_j q)`` with ``q = alpha * labels`` for
    classification and ``q = alpha`` for regression. Tiny negative quadratic
    forms (round-off on PSD kernels) are clamped to zero; anything below
    ``-1e-8 * ||q||^2`` means the kernel is not PSD and is rejected.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (stack.n_rows,):
        raise ValueError("alpha must hold one coefficient per train sample")
    if beta is None:
        raise ValueError("beta is required; pass the current kernel weights")
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (stack.m,):
        raise ValueError("beta must hold one weight per kernel")
    q = alpha
    if labels is not None:
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != alpha.shape:
            raise ValueError("labels must be parallel to alpha")
        q = alpha * labels
    q_scale = float(q @ q)
    norms = np.empty(stack.m)
    for j, k in enumerate(stack.kernels):
        form = float(q @ (k.values @ q))
        if form < -1e-8 * max(q_scale, 1e-300):
            raise DataError(
                f"kernel '{stack.group_names[j]}' is not positive semidefinite "
                f"(q'Kq = {form!r})"
            )
        norms[j] = beta[j] * np.sqrt(max(form, 0.0))
    return norms


def update_lambda(w_norms, mu: float) -> np.ndarray:
    """Closed-form scale variables: ``lambda_j = ||w_j|| / (sqrt(mu) * sum)``.

    This is the minimizer of the weighted-norm objective over the constraint
    set ``sqrt(mu) * sum(lambda) = 1``, so the returned vector always
    satisfies that identity.
    """
    mu = _check_mu(mu)
    w = np.asarray(w_norms, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("block norms must be a 1-d array")
    if (w < 0).any():
        raise ValueError("block norms must be nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("all block norms are zero; lambda is undefined")
    return w / (np.sqrt(mu) * total)


def update_beta(lambdas, mu: float) -> np.ndarray:
    """Closed-form raw kernel weights from the scale variables.

    ``beta_j = 1 / (sqrt(mu) / lambda_j + (1 - mu))``, with ``beta_j = 0``
    where ``lambda_j = 0`` (the limit of the formula). At mu = 1 this
    reduces to ``beta = lambda``.
    """
    mu = _check_mu(mu)
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.ndim != 1:
        raise ValueError("lambdas must be a 1-d array")
    if (lam < 0).any():
        raise ValueError("lambdas must be nonnegative")
    safe = np.where(lam > 0, lam, 1.0)
    return np.where(lam > 0, 1.0 / (np.sqrt(mu) / safe + (1.0 - mu)), 0.0)


def _slack_loss(stack, targets, alpha, bias, beta, C, task, labels):
    """The loss term of the training objective at the given state."""
    combined = weighted_sum(stack, beta)
    if task == "classification":
        decisions = solvers.predict(alpha, bias, combined, labels=labels)
        slack = np.maximum(0.0, 1.0 - targets * decisions)
        return C * float(slack.sum())
    decisions = solvers.predict(alpha, 0.0, combined)
    residual = (targets - bias) - decisions
    return (C / stack.n_rows) * float(residual @ residual)


def enmkl_objective(
    stack: KernelStack, targets, alpha, bias: float, beta, mu: float, C: float, task: str
) -> float:
    """The elastic-net training objective at a model state.

    Evaluates ``1/2 sum_j (sqrt(mu)/lambda_j) ||w_j||^2 + (1-mu)/2 sum_j
    ||w_j||^2`` plus the task's loss, with the scale variables ``lambda`` at
    their closed-form optimum for the current block norms. Slacks are
    recomputed from the decision values, so any (alpha, bias, beta) triple
    can be scored. With every block norm zero the penalty vanishes and only
    the loss remains.
    """
    mu = _check_mu(mu)
    task = _check_task(task)
    targets = np.asarray(targets, dtype=np.float64)
    labels = targets if task == "classification" else None
    w = compute_block_norms(stack, alpha, labels=labels, beta=beta)
    total = float(w.sum())
    penalty = 0.5 * (1.0 - mu) * float(w @ w)
    if total > 0:
        lam = update_lambda(w, mu)
        pos = lam > 0
        penalty += 0.5 * np.sqrt(mu) * float((w[pos] ** 2 / lam[pos]).sum())
    return penalty + _slack_loss(stack, targets, alpha, bias, beta, C, task, labels)


def blocknorm_objective(
    stack: KernelStack, targets, alpha, bias: float, beta, mu: float, C: float, task: str
) -> float:
    """The equivalent block-norm form of the training objective.

    ``mu/2 (sum_j ||w_j||)^2 + (1-mu)/2 sum_j ||w_j||^2`` plus the loss.
    With the scale variables at their closed-form optimum the two forms
    coincide; keeping both on separate code paths lets tests check the
    identity numerically.
    """
    mu = _check_mu(mu)
    task = _check_task(task)
    targets = np.asarray(targets, dtype=np.float64)
    labels = targets if task == "classification" else None
    w = compute_block_norms(stack, alpha, labels=labels, beta=beta)
    total = float(w.sum())
    penalty = 0.5 * mu * total * total + 0.5 * (1.0 - mu) * float(w @ w)
    return penalty + _slack_loss(stack, targets, alpha, bias, beta, C, task, labels)


def _normalized(beta: np.ndarray) -> np.ndarray:
    total = float(beta.sum())
    if total <= 0:
        raise ValueError("kernel weights sum to zero")
    return beta / total


def _train_enmkl(
    stack: KernelStack,
    targets: np.ndarray,
    task: str,
    C: float,
    mu: float,
    conv_tol: float,
    max_iter: int,
    solver_tol: float,
    max_updates: int,
) -> MklModel:
    mu = _check_mu(mu)
    task = _check_task(task)
    C = float(C)
    if not (np.isfinite(C) and C > 0):
        raise ValueError("C must be a positive finite number")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (stack.n_rows,):
        raise ValueError("targets must hold one value per train sample")
    labels = None
    if task == "classification":
        labels = targets
        values = set(np.unique(labels).tolist())
        if not values <= {-1.0, 1.0} or len(values) != 2:
            raise DataError("classification targets must be -1/+1 with both classes present")

    m = stack.m
    beta = np.full(m, 1.0 / m)
    alpha = np.zeros(stack.n_rows)
    bias = 0.0
    warm = None
    history: list[float] = []
    converged = False
    degenerate = False
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        combined = weighted_sum(stack, beta)
        if task == "classification":
            sol = solvers.solve_svm_dual(
                combined, labels, C, tol=solver_tol, max_updates=max_updates, alpha0=warm
            )
            alpha, bias = sol.alpha, sol.bias
            warm = sol.alpha
        else:
            sol = solvers.solve_krr_dual(combined, targets, C)
            alpha, bias = sol.alpha, sol.target_offset

        w = compute_block_norms(stack, alpha, labels=labels, beta=beta)
        history.append(
            enmkl_objective(stack, targets, alpha, bias, beta, mu, C, task)
        )
        if not (w > 0).any():
            degenerate = True
            break
        lam = update_lambda(w, mu)
        beta_new = update_beta(lam, mu)
        beta_new = np.where(beta_new < BETA_DROP_TOL, 0.0, beta_new)
        delta = float(np.abs(_normalized(beta_new) - _normalized(beta)).max())
        beta = beta_new
        if delta <= conv_tol:
            converged = True
            break

    if degenerate:
        # No block carries weight; fall back to uniform mixing and flag it.
        beta_final = np.full(m, 1.0 / m)
        raw_sum = 1.0
        converged = False
    else:
        raw_sum = float(beta.sum())
        beta_final = beta / raw_sum

    return MklModel(
        beta=beta_final,
        alpha=alpha * raw_sum,
        bias=bias,
        task=task,
        mu=mu,
        C=C,
        iterations=iterations,
        converged=converged,
        group_names=stack.group_names,
        sample_ids=stack.row_ids,
        train_labels=labels,
        group_sizes=stack.group_sizes,
        degenerate=degenerate,
        centered=stack.centered,
        normalized=stack.normalized,
        beta_raw_sum=raw_sum,
        objective_history=tuple(history),
    )


def train_enmkl_svm(
    stack: KernelStack,
    labels,
    C: float,
    mu: float,
    conv_tol: float = DEFAULT_CONV_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    solver_tol: float = solvers.DEFAULT_SVM_TOL,
    max_updates: int = solvers.DEFAULT_MAX_UPDATES,
) -> MklModel:
    """Train an elastic-net MKL SVM classifier on a train stack.

    Alternates SMO solves with the closed-form weight updates until the
    normalized weights move less than ``conv_tol`` in any coordinate, or
    ``max_iter`` is reached (reported via ``converged``, not an error). The
    inner solver warm-starts from the previous iteration's coefficients.
    """
    return _train_enmkl(
        stack, labels, "classification", C, mu, conv_tol, max_iter, solver_tol, max_updates
    )


def train_enmkl_krr(
    stack: KernelStack,
    targets,
    C: float,
    mu: float,
    conv_tol: float = DEFAULT_CONV_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MklModel:
    """Train elastic-net MKL kernel ridge regression on a train stack."""
    return _train_enmkl(
        stack, targets, "regression", C, mu, conv_tol, max_iter,
        solvers.DEFAULT_SVM_TOL, solvers.DEFAULT_MAX_UPDATES,
    )


def train_sum_baseline(
    stack: KernelStack,
    targets,
    task: str,
    C: float,
    solver_tol: float = solvers.DEFAULT_SVM_TOL,
    max_updates: int = solvers.DEFAULT_MAX_UPDATES,
) -> MklModel:
    """Single-kernel baseline on the uniform kernel mixture.

    Fixes ``beta_j = 1/m`` and runs one plain SVM or ridge solve; the
    stored ``mu`` of 0 marks the model as the unweighted-sum baseline.
    """
    task = _check_task(task)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (stack.n_rows,):
        raise ValueError("targets must hold one value per train sample")
    beta = np.full(stack.m, 1.0 / stack.m)
    combined = weighted_sum(stack, beta)
    labels = None
    if task == "classification":
        labels = targets
        values = set(np.unique(labels).tolist())
        if not values <= {-1.0, 1.0} or len(values) != 2:
            raise DataError("classification targets must be -1/+1 with both classes present")
        sol = solvers.solve_svm_dual(
            combined, labels, C, tol=solver_tol, max_updates=max_updates
        )
        alpha, bias = sol.alpha, sol.bias
    else:
        sol = solvers.solve_krr_dual(combined, targets, C)
        alpha, bias = sol.alpha, sol.target_offset
    return MklModel(
        beta=beta,
        alpha=alpha,
        bias=bias,
        task=task,
        mu=0.0,
        C=float(C),
        iterations=1,
        converged=True,
        group_names=stack.group_names,
        sample_ids=stack.row_ids,
        train_labels=labels,
        group_sizes=stack.group_sizes,
        centered=stack.centered,
        normalized=stack.normalized,
    )


def predict_model(model: MklModel, stack: KernelStack) -> np.ndarray:
    """Decision values of a trained model on a (cross or train) stack.

    The stack must carry the same groups, the same train samples as
    columns, and the same preprocessing state the model was trained on.
    """
    if stack.group_names != model.group_names:
        raise ValueError("stack group names do not match the model")
    if stack.col_ids != model.sample_ids:
        raise ValueError("stack columns do not match the model's train samples")
    if stack.centered != model.centered or stack.normalized != model.normalized:
        raise ValueError(
            "stack preprocessing flags do not match the model "
            f"(model: centered={model.centered}, normalized={model.normalized})"
        )
    combined = weighted_sum(stack, model.beta)
    return solvers.predict(model.alpha, model.bias, combined, labels=model.train_labels)


def selected_kernel_count(beta, threshold: float = SELECTION_THRESHOLD) -> int:
    """How many kernels carry normalized weight above the threshold."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 1:
        raise ValueError("beta must be a 1-d array")
    return int(np.sum(beta > threshold))


@dataclass(frozen=True)
class PrimalModel:
    """Explicit per-group weight vectors recovered from a dual model.

    Self-contained for prediction from raw feature rows: it carries the
    group column indices, the train feature means, and the preprocessing
    flags needed to replay the pipeline in feature space.
    """

    weights: tuple[np.ndarray, ...]
    group_names: tuple[str, ...]
    group_columns: tuple[np.ndarray, ...]
    feature_means: tuple[np.ndarray, ...]
    bias: float
    centered: bool
    normalized: bool
    n_features: int

    def decision_values(self, features, sample_ids=None) -> np.ndarray:
        """Predict from raw feature rows via the recovered primal weights."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(f"features must have {self.n_features} columns")
        processed = preprocess_feature_rows(
            features,
            list(self.group_columns),
            list(self.feature_means),
            self.centered,
            self.normalized,
            sample_ids=sample_ids,
        )
        out = np.full(features.shape[0], self.bias)
        for cols, w in zip(self.group_columns, self.weights):
            out += processed[:, cols] @ w
        return out

    def to_dict(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "group_names": list(self.group_names),
            "group_columns": [c.tolist() for c in self.group_columns],
            "feature_means": [m.tolist() for m in self.feature_means],
            "bias": self.bias,
            "centered": self.centered,
            "normalized": self.normalized,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrimalModel":
        return cls(
            weights=tuple(np.asarray(w, dtype=np.float64) for w in d["weights"]),
            group_names=tuple(str(g) for g in d["group_names"]),
            group_columns=tuple(np.asarray(c, dtype=np.int64) for c in d["group_columns"]),
            feature_means=tuple(np.asarray(m, dtype=np.float64) for m in d["feature_means"]),
            bias=float(d["bias"]),
            centered=bool(d["centered"]),
            normalized=bool(d["normalized"]),
            n_features=int(d["n_features"]),
        )


def recover_primal_weights(model: MklModel, train_data: GroupedDataset) -> PrimalModel:
    """Reconstruct the explicit primal weight vectors of a linear MKL model.

    For linear kernels the group-j weight vector is ``w_j = beta_j * sum_i
    coef_i * psi_j(x_i)`` where ``psi_j`` applies the train preprocessing to
    the group-j feature slice and ``coef = alpha * y`` (classification) or
    ``alpha`` (regression). Decision values from these vectors match the
    dual path exactly, up to round-off.
    """
    if model.kernel_kind != "linear":
        raise NotImplementedError(
            f"primal recovery is only defined for linear kernels, not {model.kernel_kind!r}"
        )
    if train_data.sample_ids != model.sample_ids:
        raise ValueError("train data sample ids do not match the model")
    if train_data.group_names != model.group_names:
        raise ValueError("train data group names do not match the model")
    means = group_feature_means(train_data)
    group_cols = [train_data.group_columns(j) for j in range(train_data.n_groups)]
    processed = preprocess_feature_rows(
        train_data.features,
        group_cols,
        means,
        model.centered,
        model.normalized,
        sample_ids=train_data.sample_ids,
    )
    coef = model.alpha if model.train_labels is None else model.alpha * model.train_labels
    weights = []
    for j, cols in enumerate(group_cols):
        weights.append(model.beta[j] * (processed[:, cols].T @ coef))
    return PrimalModel(
        weights=tuple(weights),
        group_names=model.group_names,
        group_columns=tuple(group_cols),
        feature_means=tuple(np.asarray(m) for m in means),
        bias=model.bias,
        centered=model.centered,
        normalized=model.normalized,
        n_features=train_data.n_features,
    )


def model_to_dict(model: MklModel) -> dict:
    """A JSON-ready mapping of the model; floats survive round trips exactly."""
    return {
        "beta": model.beta.tolist(),
        "alpha": model.alpha.tolist(),
        "bias": model.bias,
        "task": model.task,
        "mu": model.mu,
        "C": model.C,
        "iterations": model.iterations,
        "converged": model.converged,
        "group_names": list(model.group_names),
        "sample_ids": list(model.sample_ids),
        "train_labels": None if model.train_labels is None else model.train_labels.tolist(),
        "group_sizes": None if model.group_sizes is None else list(model.group_sizes),
        "degenerate": model.degenerate,
        "centered": model.centered,
        "normalized": model.normalized,
        "kernel_kind": model.kernel_kind,
        "beta_raw_sum": model.beta_raw_sum,
        "objective_history": list(model.objective_history),
    }


def model_from_dict(d: dict) -> MklModel:
    """Rebuild a model from :func:`model_to_dict` output."""
    return MklModel(
        beta=np.asarray(d["beta"], dtype=np.float64),
        alpha=np.asarray(d["alpha"], dtype=np.float64),
        bias=float(d["bias"]),
        task=str(d["task"]),
        mu=float(d["mu"]),
        C=float(d["C"]),
        iterations=int(d["iterations"]),
        converged=bool(d["converged"]),
        group_names=tuple(d["group_names"]),
        sample_ids=tuple(d["sample_ids"]),
        train_labels=None if d["train_labels"] is None else np.asarray(d["train_labels"]),
        group_sizes=None if d["group_sizes"] is None else tuple(d["group_sizes"]),
        degenerate=bool(d["degenerate"]),
        centered=bool(d["centered"]),
        normalized=bool(d["normalized"]),
        kernel_kind=str(d["kernel_kind"]),
        beta_raw_sum=float(d["beta_raw_sum"]),
        objective_history=tuple(d["objective_history"]),
    )
