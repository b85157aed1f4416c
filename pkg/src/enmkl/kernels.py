"""Linear kernels over grouped features, and their preprocessing.

Each feature group (for example one brain region's voxels) contributes one
Gram matrix. The matrices of one dataset are carried together in a
:class:`KernelStack` so that centering, normalization, and weighted
combination stay aligned with sample identifiers and group names.

Centering and normalization operate on Gram matrices directly, but both are
exactly equivalent to transforming the underlying feature rows (subtracting
per-group train means, scaling each sample's group slice to unit norm) and
recomputing inner products. That feature-space view is what
:func:`preprocess_feature_rows` implements; the test suite checks the two
routes against each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

# Tolerances behind the type invariants. Train kernels must be symmetric to
# within SYMMETRY_TOL relative to their largest entry; a kernel flagged
# normalized must have a unit diagonal within UNIT_DIAG_TOL; one flagged
# centered must have row and column means below CENTERED_MEAN_TOL.
SYMMETRY_TOL = 1e-10
UNIT_DIAG_TOL = 1e-10
CENTERED_MEAN_TOL = 1e-8


def _as_float_matrix(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class KernelMatrix:
    """A Gram matrix with sample identifiers and preprocessing flags.

    Rows and columns are labeled by sample ids. When ``row_ids == col_ids``
    the matrix is a train kernel and must be symmetric; otherwise it is a
    cross kernel (test rows against train columns). The ``centered`` and
    ``normalized`` flags record which preprocessing steps have been applied,
    and the corresponding numeric invariants are checked at construction for
    train kernels.
    """

    values: np.ndarray
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    centered: bool = False
    normalized: bool = False

    def __post_init__(self):
        values = _as_float_matrix(self.values, "kernel")
        row_ids = tuple(str(i) for i in self.row_ids)
        col_ids = tuple(str(i) for i in self.col_ids)
        if values.shape != (len(row_ids), len(col_ids)):
            raise ValueError(
                f"kernel shape {values.shape} does not match "
                f"{len(row_ids)} row ids and {len(col_ids)} column ids"
            )
        if row_ids == col_ids:
            scale = max(1.0, float(np.abs(values).max())) if values.size else 1.0
            if values.size and float(np.abs(values - values.T).max()) > SYMMETRY_TOL * scale:
                raise ValueError("train kernel is not symmetric")
            if self.normalized:
                if float(np.abs(np.diagonal(values) - 1.0).max()) > UNIT_DIAG_TOL:
                    raise ValueError("kernel flagged normalized does not have a unit diagonal")
            if self.centered and not self.normalized:
                # Normalization rescales rows unevenly, so zero means are
                # only checkable before it; afterwards the flag just records
                # that centering happened earlier in the pipeline.
                worst = max(
                    float(np.abs(values.mean(axis=0)).max()),
                    float(np.abs(values.mean(axis=1)).max()),
                )
                if worst > CENTERED_MEAN_TOL:
                    raise ValueError("kernel flagged centered has nonzero row or column means")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "col_ids", col_ids)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def is_train(self) -> bool:
        return self.row_ids == self.col_ids


@dataclass(frozen=True)
class KernelStack:
    """An ordered collection of kernels sharing the same samples.

    All member kernels must carry identical row and column ids, group names
    must be unique, and ``group_sizes`` records how many feature columns fed
    each kernel (informational, used for reporting).
    """

    kernels: tuple[KernelMatrix, ...]
    group_names: tuple[str, ...]
    group_sizes: tuple[int, ...]

    def __post_init__(self):
        kernels = tuple(self.kernels)
        names = tuple(str(g) for g in self.group_names)
        sizes = tuple(int(s) for s in self.group_sizes)
        if not kernels:
            raise ValueError("a kernel stack needs at least one kernel")
        if not (len(kernels) == len(names) == len(sizes)):
            raise ValueError("kernels, group_names, and group_sizes must have equal length")
        if len(set(names)) != len(names):
            raise ValueError("group names must be unique")
        first = kernels[0]
        for k in kernels[1:]:
            if k.row_ids != first.row_ids or k.col_ids != first.col_ids:
                raise ValueError("all kernels in a stack must share the same sample ids")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "group_names", names)
        object.__setattr__(self, "group_sizes", sizes)

    @property
    def m(self) -> int:
        return len(self.kernels)

    @property
    def n_rows(self) -> int:
        return self.kernels[0].n_rows

    @property
    def n_cols(self) -> int:
        return self.kernels[0].n_cols

    @property
    def row_ids(self) -> tuple[str, ...]:
        return self.kernels[0].row_ids

    @property
    def col_ids(self) -> tuple[str, ...]:
        return self.kernels[0].col_ids

    @property
    def centered(self) -> bool:
        return all(k.centered for k in self.kernels)

    @property
    def normalized(self) -> bool:
        return all(k.normalized for k in self.kernels)


@dataclass(frozen=True)
class GroupedDataset:
    """Feature rows plus a partition of the columns into named groups.

    Attributes:
        features: (n_samples, n_features) float64 matrix.
        groups: (n_features,) int array mapping each column to a group index.
        group_names: one name per group, unique, in group-index order.
        targets: (n_samples,) float64 vector. Class labels are -1/+1 for
            classification; real values for regression.
        sample_ids: unique identifier per row.
        feature_names: optional column names, parallel to ``features``.
    """

    features: np.ndarray
    groups: np.ndarray
    group_names: tuple[str, ...]
    targets: np.ndarray
    sample_ids: tuple[str, ...]
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        features = _as_float_matrix(self.features, "features")
        groups = np.array(self.groups, dtype=np.int64, copy=True)
        names = tuple(str(g) for g in self.group_names)
        targets = np.array(self.targets, dtype=np.float64, copy=True)
        ids = tuple(str(i) for i in self.sample_ids)
        n, p = features.shape
        if groups.shape != (p,):
            raise ValueError("groups must map every feature column to a group index")
        if len(set(names)) != len(names):
            raise ValueError("group names must be unique")
        if groups.size and (groups.min() < 0 or groups.max() >= len(names)):
            raise ValueError("group indices must lie in [0, number of groups)")
        for j, name in enumerate(names):
            if not np.any(groups == j):
                raise DataError(f"group '{name}' has no feature columns")
        if targets.shape != (n,):
            raise ValueError("targets must hold one value per sample")
        if not np.isfinite(targets).all():
            raise ValueError("targets contain non-finite values")
        if len(ids) != n:
            raise ValueError("sample_ids must hold one id per row")
        if len(set(ids)) != len(ids):
            seen = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise DataError(f"duplicate sample id '{dup}'")
        fnames = self.feature_names
        if fnames is not None:
            fnames = tuple(str(f) for f in fnames)
            if len(fnames) != p:
                raise ValueError("feature_names must hold one name per column")
        features.setflags(write=False)
        groups.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_names", names)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "feature_names", fnames)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(int(np.sum(self.groups == j)) for j in range(self.n_groups))

    def group_columns(self, j: int) -> np.ndarray:
        """Column indices belonging to group ``j``, in column order."""
        return np.flatnonzero(self.groups == j)

    def subset(self, ids) -> "GroupedDataset":
        """A new dataset holding the given samples, in the given order."""
        index = {sid: i for i, sid in enumerate(self.sample_ids)}
        try:
            rows = np.array([index[str(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown sample id {exc.args[0]!r}") from None
        return GroupedDataset(
            features=self.features[rows],
            groups=self.groups,
            group_names=self.group_names,
            targets=self.targets[rows],
            sample_ids=tuple(str(i) for i in ids),
            feature_names=self.feature_names,
        )

    def require_binary_targets(self) -> None:
        """Check that targets are -1/+1 with both classes present."""
        values = set(np.unique(self.targets).tolist())
        if not values <= {-1.0, 1.0}:
            raise DataError(f"classification targets must be -1/+1, got {sorted(values)}")
        if len(values) != 2:
            raise DataError("classification targets contain a single class")


def build_linear_kernels(data: GroupedDataset) -> KernelStack:
    """Compute one raw linear kernel per feature group.

    Kernel j holds the inner products of the group-j feature slices:
    ``K_j[a, b] = <x_a[group j], x_b[group j]>``. Building the m kernels is
    independent across groups.
    """
    kernels = []
    for j, name in enumerate(data.group_names):
        cols = data.group_columns(j)
        if cols.size == 0:
            raise DataError(f"group '{name}' has no feature columns")
        block = data.features[:, cols]
        gram = block @ block.T
        gram = (gram + gram.T) / 2.0  # kill round-off asymmetry from BLAS
        kernels.append(KernelMatrix(gram, data.sample_ids, data.sample_ids))
    return KernelStack(tuple(kernels), data.group_names, data.group_sizes)


def build_linear_cross_kernels(
    train: GroupedDataset, test_features, test_ids
) -> tuple[KernelStack, list[np.ndarray]]:
    """Raw test-against-train kernels, plus each test sample's self-similarity.

    Returns a cross stack (rows = test samples, columns = train samples) and,
    per group, the raw ``<x, x>`` of every test sample. The self-similarities
    are what :meth:`StackPreprocessor.transform_cross` needs to replay
    normalization on unseen samples.
    """
    test_features = _as_float_matrix(test_features, "test features")
    test_ids = tuple(str(i) for i in test_ids)
    if test_features.shape[0] != len(test_ids):
        raise ValueError("test features and test ids disagree on sample count")
    if test_features.shape[1] != train.n_features:
        raise ValueError(
            f"test features have {test_features.shape[1]} columns, "
            f"train data has {train.n_features}"
        )
    kernels = []
    self_sims = []
    for j in range(train.n_groups):
        cols = train.group_columns(j)
        test_block = test_features[:, cols]
        cross = test_block @ train.features[:, cols].T
        kernels.append(KernelMatrix(cross, test_ids, train.sample_ids))
        self_sims.append(np.einsum("ij,ij->i", test_block, test_block))
    stack = KernelStack(tuple(kernels), train.group_names, train.group_sizes)
    return stack, self_sims


def center_train_kernel(k: KernelMatrix) -> KernelMatrix:
    """Double-center a train kernel in feature space.

    Equivalent to subtracting the train mean from the underlying features:
    ``K_c = K - rowmean - colmean + grandmean``. Idempotent in exact
    arithmetic; a second application is rejected via the ``centered`` flag.
    """
    if not k.is_train:
        raise ValueError("train centering requires a square train kernel")
    if k.centered:
        raise ValueError("kernel is already centered")
    v = k.values
    row_means = v.mean(axis=1, keepdims=True)
    col_means = v.mean(axis=0, keepdims=True)
    grand = v.mean()
    out = v - row_means - col_means + grand
    out = (out + out.T) / 2.0
    return KernelMatrix(out, k.row_ids, k.col_ids, centered=True, normalized=False)


def _center_cross_values(
    cross: np.ndarray, train_col_means: np.ndarray, train_grand_mean: float
) -> np.ndarray:
    # Test rows are centered with the *train* statistics: subtract each test
    # row's mean over train columns, subtract the train kernel's column means,
    # add back the train grand mean.
    row_means = cross.mean(axis=1, keepdims=True)
    return cross - row_means - train_col_means[None, :] + train_grand_mean


def center_test_kernel(k_test: KernelMatrix, k_train: KernelMatrix) -> KernelMatrix:
    """Center a cross kernel using the train kernel's statistics.

    ``k_train`` must be the raw (uncentered) train kernel whose samples are
    the columns of ``k_test``. A test sample identical to a train sample gets
    exactly that train sample's centered kernel row.
    """
    if not k_train.is_train:
        raise ValueError("k_train must be a square train kernel")
    if k_train.centered:
        raise ValueError("k_train must be uncentered; centering statistics come from raw values")
    if k_test.centered:
        raise ValueError("kernel is already centered")
    if k_test.col_ids != k_train.row_ids:
        raise ValueError("column ids of the test kernel do not match the train kernel's samples")
    out = _center_cross_values(
        k_test.values, k_train.values.mean(axis=0), float(k_train.values.mean())
    )
    return KernelMatrix(out, k_test.row_ids, k_test.col_ids, centered=True, normalized=False)


def normalize_kernel(
    k: KernelMatrix,
    self_diag_test: np.ndarray | None = None,
    self_diag_train: np.ndarray | None = None,
) -> KernelMatrix:
    """Scale kernel entries so every sample has unit self-similarity.

    ``K'[i, j] = K[i, j] / sqrt(s_i * s_j)``. For a train kernel the
    self-similarities ``s`` are its own diagonal and the two optional
    arguments must be omitted. For a cross kernel the caller must supply
    ``self_diag_test`` (one value per row) and ``self_diag_train`` (one per
    column), computed under the same centering state as ``k``.
    """
    if k.normalized:
        raise ValueError("kernel is already normalized")
    if k.is_train:
        if self_diag_test is not None or self_diag_train is not None:
            raise ValueError("train kernels are normalized by their own diagonal")
        s = np.diagonal(k.values).copy()
        _check_self_similarities(s, k.row_ids)
        scale = np.sqrt(s)
        out = k.values / np.outer(scale, scale)
        out = (out + out.T) / 2.0
        np.fill_diagonal(out, 1.0)  # exactly 1 by definition
    else:
        if self_diag_test is None or self_diag_train is None:
            raise ValueError(
                "cross kernels need self_diag_test and self_diag_train to be normalized"
            )
        s_test = np.asarray(self_diag_test, dtype=np.float64)
        s_train = np.asarray(self_diag_train, dtype=np.float64)
        if s_test.shape != (k.n_rows,):
            raise ValueError("self_diag_test must hold one value per test row")
        if s_train.shape != (k.n_cols,):
            raise ValueError("self_diag_train must hold one value per train column")
        _check_self_similarities(s_test, k.row_ids)
        _check_self_similarities(s_train, k.col_ids)
        out = k.values / np.outer(np.sqrt(s_test), np.sqrt(s_train))
    return KernelMatrix(out, k.row_ids, k.col_ids, centered=k.centered, normalized=True)


def _check_self_similarities(s: np.ndarray, ids: tuple[str, ...]) -> None:
    bad = np.flatnonzero(s <= 0.0)
    if bad.size:
        i = int(bad[0])
        raise DataError(
            f"sample '{ids[i]}' has non-positive self-similarity {s[i]!r}; "
            "a zero-norm sample cannot be normalized"
        )


def weighted_sum(stack: KernelStack, beta) -> KernelMatrix:
    """The combined kernel ``sum_j beta_j * K_j``.

    Weights must be nonnegative with at least one strictly positive entry.
    Exact zeros are skipped, so kernels dropped by the optimizer cost
    nothing. The result's flags claim only properties the combined values
    actually have: zero means survive any combination of centered-only
    kernels, and a unit diagonal survives a unit-sum combination of
    normalized ones; everything else is unflagged.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (stack.m,):
        raise ValueError(f"expected {stack.m} weights, got shape {beta.shape}")
    if not np.isfinite(beta).all():
        raise ValueError("kernel weights contain non-finite values")
    if (beta < 0).any():
        raise ValueError("kernel weights must be nonnegative")
    if not (beta > 0).any():
        raise ValueError("at least one kernel weight must be positive")
    acc = np.zeros((stack.n_rows, stack.n_cols))
    for b, k in zip(beta, stack.kernels):
        if b != 0.0:
            acc += b * k.values
    any_normalized = any(k.normalized for k in stack.kernels)
    centered = stack.centered and not any_normalized
    normalized = stack.normalized and abs(float(beta.sum()) - 1.0) <= 1e-12
    return KernelMatrix(acc, stack.row_ids, stack.col_ids, centered=centered, normalized=normalized)


@dataclass
class GroupKernelStats:
    """Per-group statistics fitted on a raw train kernel.

    ``col_means`` and ``grand_mean`` come from the raw train kernel and drive
    test-row centering. ``self_sim`` is the train diagonal under the fitted
    centering state and drives normalization of cross kernels.
    """

    col_means: np.ndarray
    grand_mean: float
    self_sim: np.ndarray

    def to_dict(self) -> dict:
        return {
            "col_means": self.col_means.tolist(),
            "grand_mean": self.grand_mean,
            "self_sim": self.self_sim.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupKernelStats":
        return cls(
            col_means=np.asarray(d["col_means"], dtype=np.float64),
            grand_mean=float(d["grand_mean"]),
            self_sim=np.asarray(d["self_sim"], dtype=np.float64),
        )


class StackPreprocessor:
    """Fits centering/normalization on a raw train stack and replays it.

    The pipeline order is fixed: center first (when enabled), then
    normalize. Statistics are always taken from the train kernels, so
    transforming a cross stack never peeks at test data.

    Example:
        pre = StackPreprocessor().fit(raw_train_stack)
        k_train = pre.train_stack_
        k_cross = pre.transform_cross(raw_cross_stack, raw_test_self_sims)
    """

    def __init__(self, center: bool = True, normalize: bool = True):
        self.center = bool(center)
        self.normalize = bool(normalize)
        self.stats_: list[GroupKernelStats] | None = None
        self.train_stack_: KernelStack | None = None
        self.group_names_: tuple[str, ...] | None = None

    def fit(self, raw_stack: KernelStack) -> "StackPreprocessor":
        if raw_stack.centered or raw_stack.normalized:
            raise ValueError("fit expects a raw (uncentered, unnormalized) train stack")
        if not raw_stack.kernels[0].is_train:
            raise ValueError("fit expects a train stack")
        stats = []
        processed = []
        for k in raw_stack.kernels:
            col_means = k.values.mean(axis=0)
            grand = float(k.values.mean())
            work = center_train_kernel(k) if self.center else k
            self_sim = np.diagonal(work.values).copy()
            if self.normalize:
                work = normalize_kernel(work)
            stats.append(GroupKernelStats(col_means, grand, self_sim))
            processed.append(work)
        self.stats_ = stats
        self.train_stack_ = KernelStack(
            tuple(processed), raw_stack.group_names, raw_stack.group_sizes
        )
        self.group_names_ = raw_stack.group_names
        return self

    def transform_cross(
        self, raw_cross: KernelStack, raw_self_sims: list[np.ndarray]
    ) -> KernelStack:
        """Apply the fitted pipeline to a raw cross stack.

        ``raw_self_sims`` holds, per group, each test sample's raw
        ``<x, x>``; under centering these are converted to centered
        self-similarities via the fitted train statistics.
        """
        if self.stats_ is None:
            raise ValueError("preprocessor has not been fitted")
        if raw_cross.group_names != self.group_names_:
            raise ValueError("cross stack group names do not match the fitted stack")
        if len(raw_self_sims) != raw_cross.m:
            raise ValueError("need one self-similarity vector per group")
        processed = []
        for k, st, sims in zip(raw_cross.kernels, self.stats_, raw_self_sims):
            sims = np.asarray(sims, dtype=np.float64)
            if sims.shape != (k.n_rows,):
                raise ValueError("self-similarities must hold one value per test sample")
            if k.centered or k.normalized:
                raise ValueError("transform_cross expects raw cross kernels")
            if len(st.col_means) != k.n_cols:
                raise ValueError("cross kernel columns do not match the fitted train samples")
            work = k
            if self.center:
                values = _center_cross_values(k.values, st.col_means, st.grand_mean)
                work = KernelMatrix(values, k.row_ids, k.col_ids, centered=True)
                # <x_c, x_c> = <x, x> - 2 * mean_t <x, x_t> + grand mean
                sims = sims - 2.0 * k.values.mean(axis=1) + st.grand_mean
            if self.normalize:
                work = normalize_kernel(work, self_diag_test=sims, self_diag_train=st.self_sim)
            processed.append(work)
        return KernelStack(tuple(processed), raw_cross.group_names, raw_cross.group_sizes)

    def stats_to_dict(self) -> dict:
        if self.stats_ is None:
            raise ValueError("preprocessor has not been fitted")
        return {
            "center": self.center,
            "normalize": self.normalize,
            "groups": [
                {"name": name, **st.to_dict()}
                for name, st in zip(self.group_names_, self.stats_)
            ],
        }

    @classmethod
    def from_stats_dict(cls, d: dict) -> "StackPreprocessor":
        pre = cls(center=bool(d["center"]), normalize=bool(d["normalize"]))
        pre.stats_ = [GroupKernelStats.from_dict(g) for g in d["groups"]]
        pre.group_names_ = tuple(str(g["name"]) for g in d["groups"])
        return pre


def group_feature_means(data: GroupedDataset) -> list[np.ndarray]:
    """Per-group column means of the train features, in group order."""
    return [data.features[:, data.group_columns(j)].mean(axis=0) for j in range(data.n_groups)]


def preprocess_feature_rows(
    features,
    group_columns: list[np.ndarray],
    group_means: list[np.ndarray] | None,
    center: bool,
    normalize: bool,
    sample_ids=None,
) -> np.ndarray:
    """Replay the kernel pipeline directly on feature rows.

    Per group: subtract the supplied train means (when centering), then scale
    each sample's group slice to unit Euclidean norm (when normalizing).
    Inner products of the returned rows reproduce the centered/normalized
    kernels exactly, which is what makes primal weights comparable to the
    dual model.
    """
    out = np.array(features, dtype=np.float64, copy=True)
    if out.ndim != 2:
        raise ValueError("features must be a 2-d array")
    if group_means is None:
        group_means = [None] * len(group_columns)
    for cols, mu in zip(group_columns, group_means):
        block = out[:, cols]
        if center:
            if mu is None:
                raise ValueError("centering requires per-group train means")
            block = block - np.asarray(mu, dtype=np.float64)[None, :]
        if normalize:
            norms = np.linalg.norm(block, axis=1)
            bad = np.flatnonzero(norms <= 0.0)
            if bad.size:
                i = int(bad[0])
                label = sample_ids[i] if sample_ids is not None else str(i)
                raise DataError(
                    f"sample '{label}' has zero norm in a feature group and cannot be normalized"
                )
            block = block / norms[:, None]
        out[:, cols] = block
    return out
