"""Single-kernel dual solvers: soft-margin SVM and kernel ridge regression.

These are the inner solvers the kernel-weight optimization alternates with.
The SVM dual

    max_a  sum_i a_i - 1/2 a' Q a,   Q_ij = y_i y_j K_ij,
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

is solved by sequential minimal optimization with maximal-violating-pair
selection and a second-order working-set heuristic. Kernel ridge regression
solves the regularized linear system ``(K + n/(2C) I) a = y - mean(y)``
directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError
from .kernels import KernelMatrix

# Fallback curvature for numerically flat working pairs, as in LIBSVM.
_TAU = 1e-12

DEFAULT_SVM_TOL = 1e-3
DEFAULT_MAX_UPDATES = 10_000_000


@dataclass(frozen=True)
class SvmDualSolution:
    """Optimal dual variables of the soft-margin SVM.

    ``alpha`` satisfies the box constraints exactly (updates clip to the
    bounds) and the equality constraint up to round-off. ``objective`` is the
    dual value ``sum(alpha) - 1/2 alpha' Q alpha`` and ``iterations`` counts
    two-variable updates.
    """

    alpha: np.ndarray
    bias: float
    objective: float
    iterations: int

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64, copy=True)
        if alpha.ndim != 1 or not np.isfinite(alpha).all():
            raise ValueError("alpha must be a finite 1-d array")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "objective", float(self.objective))
        object.__setattr__(self, "iterations", int(self.iterations))


@dataclass(frozen=True)
class KrrDualSolution:
    """Dual coefficients of kernel ridge regression on centered targets.

    Predictions are ``K_cross @ alpha + target_offset`` where
    ``target_offset`` is the training-target mean.
    """

    alpha: np.ndarray
    target_offset: float

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64, copy=True)
        if alpha.ndim != 1 or not np.isfinite(alpha).all():
            raise ValueError("alpha must be a finite 1-d array")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "target_offset", float(self.target_offset))


def _kernel_values(k, name: str = "kernel") -> np.ndarray:
    if isinstance(k, KernelMatrix):
        return k.values
    arr = np.asarray(k, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array")
    return arr


def _check_train_kernel(values: np.ndarray) -> None:
    n = values.shape[0]
    if values.shape != (n, n):
        raise ValueError("train kernel must be square")
    if not np.isfinite(values).all():
        raise ValueError("kernel contains non-finite entries")
    scale = max(1.0, float(np.abs(values).max())) if values.size else 1.0
    if values.size and float(np.abs(values - values.T).max()) > 1e-10 * scale:
        raise ValueError("train kernel is not symmetric")


def _check_labels(y: np.ndarray) -> None:
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("labels contain a single class; need both -1 and +1")


def solve_svm_dual(
    k,
    y,
    C: float,
    tol: float = DEFAULT_SVM_TOL,
    max_updates: int = DEFAULT_MAX_UPDATES,
    alpha0: np.ndarray | None = None,
) -> SvmDualSolution:
    """Solve the soft-margin SVM dual by SMO.

    Args:
        k: train kernel, as a :class:`KernelMatrix` or square array.
        y: -1/+1 labels, both classes present.
        C: box constraint, > 0.
        tol: stop once the maximal KKT violation ``m(a) - M(a)`` drops to
            this value or below.
        max_updates: hard cap on two-variable updates; exceeding it raises
            :class:`ConvergenceError`.
        alpha0: optional feasible warm start (defaults to zero).

    Returns:
        The dual solution. The bias is the mean of ``-y_i * grad_i`` over
        free support vectors; with no free support vector it falls back to
        the midpoint of the remaining KKT interval.
    """
    K = _kernel_values(k)
    _check_train_kernel(K)
    y = np.asarray(y, dtype=np.float64)
    n = K.shape[0]
    if y.shape != (n,):
        raise ValueError("labels must hold one value per kernel row")
    _check_labels(y)
    C = float(C)
    if not (np.isfinite(C) and C > 0):
        raise ValueError("C must be a positive finite number")
    if not (np.isfinite(tol) and tol > 0):
        raise ValueError("tol must be positive")

    if alpha0 is None:
        alpha = np.zeros(n)
        grad = -np.ones(n)  # grad of 1/2 a'Qa - e'a at a = 0
    else:
        alpha = np.array(alpha0, dtype=np.float64, copy=True)
        if alpha.shape != (n,):
            raise ValueError("alpha0 must hold one value per sample")
        if (alpha < -1e-12).any() or (alpha > C + 1e-12).any():
            raise ValueError("alpha0 violates the box constraints")
        alpha = np.clip(alpha, 0.0, C)
        if abs(float(alpha @ y)) > 1e-8 * max(1.0, float(np.abs(alpha).sum())):
            raise ValueError("alpha0 violates the equality constraint")
        grad = y * (K @ (alpha * y)) - 1.0

    diag = np.diagonal(K)
    updates = 0
    while True:
        minus_y_grad = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        # Initial feasible points always populate both sets (both classes
        # present), so the selection below is well defined.
        up_vals = np.where(up, minus_y_grad, -np.inf)
        i = int(np.argmax(up_vals))
        m_val = up_vals[i]
        low_vals = np.where(low, minus_y_grad, np.inf)
        M_val = float(np.min(low_vals))
        if m_val - M_val <= tol:
            break
        if updates >= max_updates:
            raise ConvergenceError(
                f"SMO exceeded {max_updates} updates "
                f"(KKT violation {m_val - M_val:.3e}, tol {tol:.3e})"
            )

        # Second-order choice of j: among violating candidates, maximize the
        # guaranteed objective decrease -b^2 / a for the pair (i, t).
        cand = low & (minus_y_grad < m_val)
        b_it = m_val - minus_y_grad
        a_it = diag[i] + diag - 2.0 * y[i] * y * K[i]
        a_it = np.where(a_it > 0, a_it, _TAU)
        gain = np.where(cand, -(b_it * b_it) / a_it, np.inf)
        j = int(np.argmin(gain))

        # Two-variable subproblem, clipped to the box (LIBSVM update rules).
        Qii, Qjj = diag[i], diag[j]
        Qij = y[i] * y[j] * K[i, j]
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            else:
                if ai < 0:
                    ai, aj = 0.0, total
        dai, daj = ai - ai_old, aj - aj_old
        alpha[i], alpha[j] = ai, aj
        grad += (y * K[:, i] * y[i]) * dai + (y * K[:, j] * y[j]) * daj
        updates += 1

    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(minus_y_grad[free]))
    else:
        bias = (m_val + M_val) / 2.0

    coef = alpha * y
    objective = float(alpha.sum() - 0.5 * coef @ (K @ coef))
    return SvmDualSolution(alpha=alpha, bias=bias, objective=objective, iterations=updates)


def solve_krr_dual(k, y, C: float) -> KrrDualSolution:
    """Solve kernel ridge regression in its dual form.

    Targets are centered by their mean, then ``(K + n/(2C) I) a = y_c`` is
    solved by Cholesky factorization. The ridge term keeps the system
    positive definite for any PSD kernel; if factorization still fails
    numerically, a least-squares solve takes over.
    """
    K = _kernel_values(k)
    _check_train_kernel(K)
    y = np.asarray(y, dtype=np.float64)
    n = K.shape[0]
    if y.shape != (n,):
        raise ValueError("targets must hold one value per kernel row")
    if not np.isfinite(y).all():
        raise ValueError("targets contain non-finite values")
    C = float(C)
    if not (np.isfinite(C) and C > 0):
        raise ValueError("C must be a positive finite number")

    offset = float(y.mean())
    y_c = y - offset
    A = K + (n / (2.0 * C)) * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
        alpha = scipy.linalg.cho_solve(factor, y_c)
    except np.linalg.LinAlgError:
        alpha = scipy.linalg.lstsq(A, y_c)[0]
    return KrrDualSolution(alpha=alpha, target_offset=offset)


def predict(alpha, bias: float, k_cross, labels=None) -> np.ndarray:
    """Decision values ``K_cross @ coef + bias`` for a dual model.

    For SVM models pass the train labels so that ``coef = alpha * y``; for
    ridge regression leave ``labels`` as None and pass the target offset as
    ``bias``. ``k_cross`` has test samples as rows and train samples as
    columns (the train kernel itself works for in-sample values).
    """
    values = _kernel_values(k_cross, "cross kernel")
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1:
        raise ValueError("alpha must be a 1-d array")
    if values.shape[1] != alpha.shape[0]:
        raise ValueError(
            f"cross kernel has {values.shape[1]} train columns "
            f"but alpha has {alpha.shape[0]} entries"
        )
    coef = alpha
    if labels is not None:
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != alpha.shape:
            raise ValueError("labels must be parallel to alpha")
        coef = alpha * labels
    return values @ coef + float(bias)
