"""Shared test fixtures: independent oracles and synthetic data builders.

The oracles deliberately avoid the library's own code paths wherever they
check one: the QP oracle enumerates active sets instead of running SMO, and
the preprocessing oracle works on raw feature rows instead of Gram-matrix
identities.
"""

import itertools

import numpy as np

from enmkl.kernels import GroupedDataset
from enmkl.solvers import solve_svm_dual


def svm_dual_bruteforce(K, y, C):
    """Globally solve the SVM dual by enumerating active sets.

    Every variable is assigned lower (0), upper (C), or free; for each of
    the 3^n patterns the equality-constrained stationarity system is solved
    for the free block and feasible candidates are scored by the dual
    objective. The best feasible candidate is the global optimum of the
    concave problem. Returns (alpha, objective).
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    best_obj = -np.inf
    best_alpha = None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        lower = pattern == 0
        upper = pattern == 1
        free = pattern == 2
        alpha = np.zeros(n)
        alpha[upper] = C
        nf = int(free.sum())
        if nf:
            # Stationarity over the free block plus the equality constraint:
            # [Q_FF  y_F] [a_F]   [e_F - Q_FU a_U]
            # [y_F'   0 ] [nu ] = [-y_U' a_U     ]
            A = np.zeros((nf + 1, nf + 1))
            A[:nf, :nf] = Q[np.ix_(free, free)]
            A[:nf, nf] = y[free]
            A[nf, :nf] = y[free]
            rhs = np.zeros(nf + 1)
            rhs[:nf] = 1.0 - Q[np.ix_(free, upper)] @ alpha[upper]
            rhs[nf] = -float(y[upper] @ alpha[upper])
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.abs(A @ sol - rhs).max() > 1e-7 * max(1.0, np.abs(rhs).max()):
                continue  # inconsistent system, not a stationary pattern
            a_free = sol[:nf]
            if (a_free < -1e-9).any() or (a_free > C + 1e-9).any():
                continue
            alpha[free] = np.clip(a_free, 0.0, C)
        if abs(float(y @ alpha)) > 1e-8 * max(1.0, C * n):
            continue
        obj = float(alpha.sum() - 0.5 * alpha @ Q @ alpha)
        if obj > best_obj:
            best_obj = obj
            best_alpha = alpha
    return best_alpha, best_obj


def oracle_feature_pipeline(train_X, group_cols, test_X=None, center=True, normalize=True):
    """Preprocess feature rows directly and recompute inner products.

    Returns per-group (train_kernel, cross_kernel) pairs; cross kernels are
    None when no test rows are given. Statistics come from the train rows
    only.
    """
    pairs = []
    for cols in group_cols:
        tr = np.array(train_X[:, cols], dtype=float)
        te = None if test_X is None else np.array(test_X[:, cols], dtype=float)
        if center:
            mean = tr.mean(axis=0)
            tr = tr - mean
            if te is not None:
                te = te - mean
        if normalize:
            tr = tr / np.linalg.norm(tr, axis=1, keepdims=True)
            if te is not None:
                te = te / np.linalg.norm(te, axis=1, keepdims=True)
        pairs.append((tr @ tr.T, None if te is None else te @ tr.T))
    return pairs


def mkl_svm_grid_oracle(stack, y, C, mu, step=0.01, svm_tol=1e-7):
    """Grid search over the two-kernel weight line for the best objective.

    Walks the constraint simplex of the scale variables (u = sqrt(mu) *
    lambda, which sums to one), maps each point through the closed-form
    weight formula, solves the inner SVM on the weighted kernel, and scores
    the block-norm objective at the achieved solution. Returns
    (unit-sum-normalized weights, objective) of the best grid point.
    """
    assert stack.m == 2
    y = np.asarray(y, dtype=float)
    best = None
    for u1 in np.arange(0.0, 1.0 + step / 2, step):
        u = np.array([u1, 1.0 - u1])
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(u > 0, u / (mu + (1.0 - mu) * u), 0.0)
        K = sum(b * k.values for b, k in zip(beta, stack.kernels) if b > 0)
        sol = solve_svm_dual(K, y, C, tol=svm_tol)
        q = sol.alpha * y
        w = np.array(
            [beta[j] * np.sqrt(max(float(q @ stack.kernels[j].values @ q), 0.0)) for j in range(2)]
        )
        decisions = K @ q + sol.bias
        slack = np.maximum(0.0, 1.0 - y * decisions)
        obj = (
            0.5 * mu * float(w.sum()) ** 2
            + 0.5 * (1.0 - mu) * float(w @ w)
            + C * float(slack.sum())
        )
        if best is None or obj < best[0]:
            best = (obj, beta / beta.sum())
    return best[1], best[0]


def _group_features(rng, n, dims, kind, y, shift):
    if kind == "signal":
        direction = rng.uniform(0.6, 1.4, size=dims)
        return y[:, None] * shift * direction[None, :] + rng.normal(size=(n, dims))
    if kind == "noise":
        return rng.normal(size=(n, dims))
    raise ValueError(kind)


def make_classification_data(n=30, seed=0, group_specs=None, shift=1.5):
    """Balanced -1/+1 dataset with named signal/noise/duplicate groups.

    group_specs is a list of (name, dims, kind) where kind is "signal",
    "noise", or ("dup", earlier_index) for an exact copy of a previous
    group's columns.
    """
    if group_specs is None:
        group_specs = [("sig", 4, "signal"), ("noise", 5, "noise")]
    rng = np.random.default_rng(seed)
    y = np.array([1.0, -1.0] * (n // 2) + ([1.0] if n % 2 else []))
    blocks = []
    for name, dims, kind in group_specs:
        if isinstance(kind, tuple) and kind[0] == "dup":
            blocks.append(blocks[kind[1]].copy())
        else:
            blocks.append(_group_features(rng, n, dims, kind, y, shift))
    features = np.hstack(blocks)
    groups = np.concatenate(
        [np.full(b.shape[1], j, dtype=np.int64) for j, b in enumerate(blocks)]
    )
    return GroupedDataset(
        features=features,
        groups=groups,
        group_names=tuple(name for name, _, _ in group_specs),
        targets=y,
        sample_ids=tuple(f"s{i:03d}" for i in range(n)),
    )


def make_regression_data(n=30, seed=0, group_specs=None, target_noise=0.2):
    """Regression dataset whose targets come from the signal groups only."""
    if group_specs is None:
        group_specs = [("sig", 4, "signal"), ("noise", 5, "noise")]
    rng = np.random.default_rng(seed)
    blocks = []
    contributions = []
    for name, dims, kind in group_specs:
        if isinstance(kind, tuple) and kind[0] == "dup":
            block = blocks[kind[1]].copy()
            kind_label = "dup"
        else:
            block = rng.normal(size=(n, dims))
            kind_label = kind
        blocks.append(block)
        if kind_label == "signal":
            weights = rng.uniform(0.5, 1.5, size=block.shape[1])
            contributions.append(block @ weights)
    if not contributions:
        raise ValueError("need at least one signal group")
    targets = np.sum(contributions, axis=0) + target_noise * rng.normal(size=n)
    features = np.hstack(blocks)
    groups = np.concatenate(
        [np.full(b.shape[1], j, dtype=np.int64) for j, b in enumerate(blocks)]
    )
    return GroupedDataset(
        features=features,
        groups=groups,
        group_names=tuple(name for name, _, _ in group_specs),
        targets=targets,
        sample_ids=tuple(f"s{i:03d}" for i in range(n)),
    )


def random_psd_kernel(rng, n, rank=None):
    """A random PSD Gram matrix from Gaussian feature rows."""
    rank = rank or n + 2
    X = rng.normal(size=(n, rank))
    return X @ X.T


def random_labels(rng, n):
    """Random -1/+1 labels guaranteed to contain both classes."""
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return y
