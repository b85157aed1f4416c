"""Command-line interface.

Subcommands cover the full workflow: ``kernels`` turns feature CSVs into
per-group Gram matrices, ``train`` fits a model on a kernel stack,
``predict`` scores new samples, ``cv`` runs nested cross-validation, and
``report`` renders stored models or reports as tables.

Exit codes: 0 on success, 1 for usage errors, 2 for data errors, 3 when a
solver fails to converge.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, mkl
from .errors import ConvergenceError, DataError, UsageError
from .evaluation import (
    DEFAULT_C_VALUES,
    DEFAULT_MU_VALUES,
    HyperGrid,
    make_fold_plan,
    nested_cv,
)
from .kernels import StackPreprocessor, build_linear_kernels


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures raise instead of exiting 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Validated, normalized options for one CLI invocation."""

    command: str
    task: str | None = None
    trainer: str = "enmkl"
    mu: float | None = None
    c_value: float | None = None
    mu_values: tuple[float, ...] | None = None
    c_values: tuple[float, ...] | None = None
    k_outer: int = 5
    k_inner: int = 5
    seed: int = 0
    center: bool = True
    normalize: bool = True
    kernel_format: str = "csv"
    conv_tol: float = mkl.DEFAULT_CONV_TOL
    max_iter: int = mkl.DEFAULT_MAX_ITER
    solver_tol: float = 1e-3
    smo_max_updates: int = 10_000_000
    baseline: bool = False

    def validate(self) -> "RunConfig":
        if self.task is not None and self.task not in ("classification", "regression"):
            raise UsageError(f"unknown task {self.task!r}")
        if self.trainer not in ("enmkl", "sum-baseline"):
            raise UsageError(f"unknown trainer {self.trainer!r}")
        if self.kernel_format not in ("csv", "binary"):
            raise UsageError(f"unknown kernel format {self.kernel_format!r}")
        if self.c_value is not None and not self.c_value > 0:
            raise UsageError("--C must be positive")
        if self.mu is not None and not 0.0 < self.mu <= 1.0:
            raise UsageError(
                "--mu must lie in (0, 1]; use '--trainer sum-baseline' for the "
                "unweighted-sum (mu = 0) model"
            )
        for c in self.c_values or ():
            if not c > 0:
                raise UsageError(f"--C value {c!r} must be positive")
        for m in self.mu_values or ():
            if not 0.0 < m <= 1.0:
                raise UsageError(
                    f"--mu value {m!r} is outside (0, 1]; the mu = 0 endpoint is the "
                    "sum baseline (--baseline)"
                )
        if self.k_outer < 2 or self.k_inner < 2:
            raise UsageError("--k-outer and --k-inner must both be at least 2")
        if not self.conv_tol > 0 or not self.solver_tol > 0:
            raise UsageError("tolerances must be positive")
        if self.max_iter < 1 or self.smo_max_updates < 1:
            raise UsageError("iteration limits must be at least 1")
        return self


def _float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects a number or comma-separated numbers, got {text!r}")


def _print_beta_table(group_names, beta, group_sizes=None, header="kernel weights"):
    order = sorted(range(len(beta)), key=lambda j: (-beta[j], group_names[j]))
    print(header)
    for j in order:
        size = "" if group_sizes is None else f"  ({group_sizes[j]} features)"
        print(f"  {group_names[j]:<24s} {beta[j]:.6f}{size}")


def cmd_kernels(args) -> None:
    cfg = RunConfig(command="kernels", kernel_format=args.format).validate()
    data, _ = io.load_grouped_dataset(args.features, args.groups)
    stack = build_linear_kernels(data)
    sources = {
        "features_file": str(Path(args.features).resolve()),
        "groups_file": str(Path(args.groups).resolve()),
        "features_sha256": io.sha256_file(args.features),
        "groups_sha256": io.sha256_file(args.groups),
    }
    manifest_path = io.write_stack(
        args.out, stack, fmt=cfg.kernel_format, kind="train", sources=sources
    )
    print(f"wrote {stack.m} kernels over {stack.n_rows} samples to {manifest_path}")


def _train_from_stack(stack, targets, cfg: RunConfig):
    if cfg.trainer == "sum-baseline":
        return mkl.train_sum_baseline(
            stack, targets, cfg.task, cfg.c_value,
            solver_tol=cfg.solver_tol, max_updates=cfg.smo_max_updates,
        )
    if cfg.task == "classification":
        return mkl.train_enmkl_svm(
            stack, targets, cfg.c_value, cfg.mu,
            conv_tol=cfg.conv_tol, max_iter=cfg.max_iter,
            solver_tol=cfg.solver_tol, max_updates=cfg.smo_max_updates,
        )
    return mkl.train_enmkl_krr(
        stack, targets, cfg.c_value, cfg.mu,
        conv_tol=cfg.conv_tol, max_iter=cfg.max_iter,
    )


def _recoverable_sources(manifest: dict):
    """Feature/group paths recorded at kernel-build time, when still intact."""
    sources = manifest.get("sources") or {}
    features = sources.get("features_file")
    groups = sources.get("groups_file")
    if not features or not groups:
        return None
    if not (Path(features).is_file() and Path(groups).is_file()):
        return None
    for path, key in ((features, "features_sha256"), (groups, "groups_sha256")):
        recorded = sources.get(key)
        if recorded and io.sha256_file(path) != recorded:
            raise DataError(
                f"{path}: contents changed since the kernel stack was built; "
                "rerun the kernels command"
            )
    return features, groups


def cmd_train(args) -> None:
    cfg = RunConfig(
        command="train",
        task=args.task,
        trainer=args.trainer,
        mu=args.mu,
        c_value=args.C,
        center=not args.no_center,
        normalize=not args.no_normalize,
        conv_tol=args.conv_tol,
        max_iter=args.max_iter,
        solver_tol=args.solver_tol,
        smo_max_updates=args.smo_max_updates,
    ).validate()
    if cfg.trainer == "enmkl" and cfg.mu is None:
        raise UsageError("--mu is required when training the enmkl model")
    if cfg.trainer == "sum-baseline" and cfg.mu is not None:
        raise UsageError("--mu does not apply to the sum baseline")

    raw_stack, _, manifest = io.read_stack(args.stack)
    if manifest["kind"] != "train":
        raise DataError(f"{args.stack}: training needs a train stack, got a cross stack")
    targets, label_mapping = io.parse_targets(args.targets, raw_stack.row_ids, cfg.task)
    pre = StackPreprocessor(center=cfg.center, normalize=cfg.normalize).fit(raw_stack)
    model = _train_from_stack(pre.train_stack_, targets, cfg)

    payload = {
        "format_version": io.MODEL_FORMAT_VERSION,
        "model": mkl.model_to_dict(model),
        "preprocessing": pre.stats_to_dict(),
        "label_mapping": None
        if label_mapping is None
        else {str(raw): value for raw, value in label_mapping.items()},
        "features": None,
        "primal": None,
    }

    sources = _recoverable_sources(manifest)
    if sources is not None:
        feature_data, _ = io.load_grouped_dataset(sources[0], sources[1])
        train_data = feature_data.subset(raw_stack.row_ids)
        primal = mkl.recover_primal_weights(model, train_data)
        payload["features"] = {
            "feature_names": list(train_data.feature_names),
            "group_index": train_data.groups.tolist(),
        }
        payload["primal"] = primal.to_dict()

    io.write_json(args.out, payload)
    if not model.converged:
        flavor = "degenerate (all block norms zero)" if model.degenerate else "not converged"
        print(f"warning: weight optimization {flavor} after {model.iterations} iterations")
    _print_beta_table(model.group_names, model.beta, model.group_sizes)
    print(f"wrote model to {args.out}")


def _load_model_payload(path):
    payload = io.read_json(path)
    if "model" not in payload:
        raise DataError(f"{path}: not a model file")
    return payload, mkl.model_from_dict(payload["model"])


def _decisions_to_output(model, payload, decisions):
    if model.task != "classification":
        return decisions, None
    mapping = payload.get("label_mapping") or {}
    reverse = {float(v): str(k) for k, v in mapping.items()}
    labels = [
        reverse.get(1.0 if d >= 0 else -1.0, "+1" if d >= 0 else "-1") for d in decisions
    ]
    return decisions, labels


def cmd_predict(args) -> None:
    if (args.features is None) == (args.stack is None):
        raise UsageError("predict needs exactly one of --features or --stack")
    payload, model = _load_model_payload(args.model)

    if args.features is not None:
        if payload.get("primal") is None:
            raise DataError(
                f"{args.model}: model carries no primal weights (the kernel stack it "
                "was trained from did not record a readable features file); "
                "predict from a cross-kernel stack instead"
            )
        sample_ids, feature_names, features = io.read_features_csv(args.features)
        stored = payload.get("features") or {}
        if tuple(stored.get("feature_names", ())) != feature_names:
            raise DataError(
                f"{args.features}: feature columns do not match the model's training features"
            )
        primal = mkl.PrimalModel.from_dict(payload["primal"])
        decisions = primal.decision_values(features, sample_ids=sample_ids)
    else:
        raw_stack, self_sims, manifest = io.read_stack(args.stack)
        if manifest["kind"] != "cross":
            raise DataError(f"{args.stack}: predict needs a cross stack (test rows, train columns)")
        if raw_stack.col_ids != model.sample_ids:
            raise DataError(
                f"{args.stack}: cross-kernel columns do not match the model's train samples"
            )
        pre = StackPreprocessor.from_stats_dict(payload["preprocessing"])
        cross = pre.transform_cross(raw_stack, self_sims)
        decisions = mkl.predict_model(model, cross)
        sample_ids = raw_stack.row_ids

    decisions, labels = _decisions_to_output(model, payload, decisions)
    io.write_predictions_csv(args.out, sample_ids, decisions, labels)
    print(f"wrote {len(sample_ids)} predictions to {args.out}")


def _report_to_weights_csv(path, report_dict) -> None:
    names = report_dict["group_names"]
    sizes = report_dict["group_sizes"]
    beta = report_dict["mean_beta"]
    order = sorted(range(len(names)), key=lambda j: (-beta[j], names[j]))
    lines = ["group,mean_weight,n_features"]
    for j in order:
        lines.append(f"{names[j]},{beta[j]!r},{sizes[j]}")
    io.atomic_write_text(path, "\n".join(lines) + "\n")


def _print_report(report_dict) -> None:
    print(f"task: {report_dict['task']}   trainer: {report_dict['trainer']}")
    for fold in report_dict["folds"]:
        metrics = "  ".join(
            f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
            for k, v in sorted(fold["metrics"].items())
        )
        mu = fold["selected_mu"]
        mu_text = "-" if mu is None else f"{mu:g}"
        print(
            f"  fold {fold['fold_index']}: C={fold['selected_c']:g} mu={mu_text}  {metrics}"
        )
    pooled = "  ".join(
        f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
        for k, v in sorted(report_dict["pooled_metrics"].items())
    )
    print(f"pooled: {pooled}")
    print(f"selected kernels: {report_dict['selected_count']} of {len(report_dict['group_names'])}")
    _print_beta_table(
        report_dict["group_names"],
        report_dict["mean_beta"],
        report_dict["group_sizes"],
        header="mean kernel weights",
    )


def cmd_cv(args) -> None:
    if args.grid and (args.C is not None or args.mu is not None):
        raise UsageError("--grid replaces --C/--mu; pass one or the other")
    c_values = _float_list(args.C, "--C") if args.C is not None else DEFAULT_C_VALUES
    mu_values = _float_list(args.mu, "--mu") if args.mu is not None else DEFAULT_MU_VALUES
    cfg = RunConfig(
        command="cv",
        task=args.task,
        trainer=args.trainer,
        c_values=c_values,
        mu_values=mu_values,
        k_outer=args.k_outer,
        k_inner=args.k_inner,
        seed=args.seed,
        center=not args.no_center,
        normalize=not args.no_normalize,
        conv_tol=args.conv_tol,
        max_iter=args.max_iter,
        solver_tol=args.solver_tol,
        smo_max_updates=args.smo_max_updates,
        baseline=args.baseline,
    ).validate()

    data, _ = io.load_grouped_dataset(args.features, args.groups, args.targets, cfg.task)
    blocks = io.read_blocks(args.blocks, data.sample_ids) if args.blocks else None
    labels = data.targets if cfg.task == "classification" else None
    plan = make_fold_plan(
        data.sample_ids, cfg.k_outer, cfg.k_inner,
        blocks=blocks, seed=cfg.seed, labels=labels,
    )
    grid = HyperGrid(c_values=cfg.c_values, mu_values=cfg.mu_values)
    common = dict(
        center=cfg.center, normalize=cfg.normalize,
        conv_tol=cfg.conv_tol, max_iter=cfg.max_iter,
        solver_tol=cfg.solver_tol, max_updates=cfg.smo_max_updates,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = nested_cv(data, cfg.task, plan, grid, trainer=cfg.trainer, **common)
    io.write_json(out_dir / "report.json", report.to_dict())
    _report_to_weights_csv(out_dir / "weights.csv", report.to_dict())
    _print_report(report.to_dict())

    if cfg.baseline and cfg.trainer != "sum-baseline":
        base = nested_cv(data, cfg.task, plan, grid, trainer="sum-baseline", **common)
        io.write_json(out_dir / "report_baseline.json", base.to_dict())
        print("\nsum-baseline comparison")
        for key, value in sorted(base.pooled_metrics.items()):
            main_value = report.pooled_metrics.get(key)
            main_text = "n/a" if main_value is None else f"{main_value:.4f}"
            base_text = "n/a" if value is None else f"{value:.4f}"
            print(f"  {key}: enmkl={main_text}  baseline={base_text}")
    print(f"wrote report to {out_dir / 'report.json'}")


def cmd_report(args) -> None:
    if (args.model is None) == (args.report is None):
        raise UsageError("report needs exactly one of --model or --report")
    if args.model is not None:
        payload, model = _load_model_payload(args.model)
        status = "converged" if model.converged else "not converged"
        print(
            f"task: {model.task}   mu: {model.mu:g}   C: {model.C:g}   "
            f"iterations: {model.iterations} ({status})"
        )
        _print_beta_table(model.group_names, model.beta, model.group_sizes)
        if args.csv:
            report_like = {
                "group_names": list(model.group_names),
                "group_sizes": list(model.group_sizes or [0] * len(model.group_names)),
                "mean_beta": model.beta.tolist(),
            }
            _report_to_weights_csv(args.csv, report_like)
            print(f"wrote weights to {args.csv}")
    else:
        report_dict = io.read_json(args.report)
        if "pooled_metrics" not in report_dict:
            raise DataError(f"{args.report}: not a cross-validation report")
        _print_report(report_dict)
        if args.csv:
            _report_to_weights_csv(args.csv, report_dict)
            print(f"wrote weights to {args.csv}")


def _add_solver_options(parser) -> None:
    parser.add_argument("--conv-tol", type=float, default=mkl.DEFAULT_CONV_TOL,
                        help="weight-update convergence tolerance")
    parser.add_argument("--max-iter", type=int, default=mkl.DEFAULT_MAX_ITER,
                        help="maximum alternating iterations")
    parser.add_argument("--solver-tol", type=float, default=1e-3,
                        help="inner SVM KKT tolerance")
    parser.add_argument("--smo-max-updates", type=int, default=10_000_000,
                        help="hard cap on SMO pair updates")
    parser.add_argument("--no-center", action="store_true",
                        help="skip kernel centering")
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip kernel normalization")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="enmkl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("kernels", help="build per-group linear kernels from feature CSVs")
    p.add_argument("--features", required=True, help="features CSV (id column first)")
    p.add_argument("--groups", required=True, help="feature-to-group map CSV")
    p.add_argument("--out", required=True, help="output directory for the kernel stack")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="kernel file format")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("train", help="train a model on a kernel stack")
    p.add_argument("--stack", required=True, help="stack manifest from the kernels command")
    p.add_argument("--targets", required=True, help="targets CSV (id,target)")
    p.add_argument("--task", required=True, choices=("classification", "regression"))
    p.add_argument("--C", type=float, required=True, help="regularization weight")
    p.add_argument("--mu", type=float, default=None,
                   help="elastic-net mixing value in (0, 1]")
    p.add_argument("--trainer", choices=("enmkl", "sum-baseline"), default="enmkl")
    p.add_argument("--out", required=True, help="output model JSON path")
    _add_solver_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score samples with a trained model")
    p.add_argument("--model", required=True, help="model JSON from the train command")
    p.add_argument("--features", default=None,
                   help="features CSV; uses the recovered primal weights")
    p.add_argument("--stack", default=None,
                   help="cross-kernel stack manifest (test rows, train columns)")
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="nested cross-validation with hyperparameter selection")
    p.add_argument("--features", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--task", required=True, choices=("classification", "regression"))
    p.add_argument("--trainer", choices=("enmkl", "sum-baseline"), default="enmkl")
    p.add_argument("--C", default=None,
                   help="C value or comma-separated C grid (default: 1e-3..1e3)")
    p.add_argument("--mu", default=None,
                   help="mu value or comma-separated mu grid (default: 0.1..1.0)")
    p.add_argument("--grid", action="store_true",
                   help="use the default hyperparameter grid (explicit form)")
    p.add_argument("--k-outer", type=int, default=5, help="outer folds")
    p.add_argument("--k-inner", type=int, default=5, help="inner folds")
    p.add_argument("--blocks", default=None,
                   help="CSV mapping sample ids to blocks that must not be split")
    p.add_argument("--seed", type=int, default=0, help="fold-plan RNG seed")
    p.add_argument("--baseline", action="store_true",
                   help="also run the sum baseline and print a comparison")
    p.add_argument("--out", required=True, help="output directory")
    _add_solver_options(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("report", help="print a stored model or CV report")
    p.add_argument("--model", default=None, help="model JSON")
    p.add_argument("--report", default=None, help="CV report JSON")
    p.add_argument("--csv", default=None, help="also write the weight table as CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return 0 if code in (None, 0) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
