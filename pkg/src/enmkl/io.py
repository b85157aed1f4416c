"""File formats: feature/target CSVs, kernel files, manifests, JSON.

All writes are atomic (write to a temporary sibling, then rename), and all
formatting is deterministic: floats are written with Python's shortest
round-trip representation, JSON keys are sorted, and no timestamps are
embedded. Rerunning a command on unchanged inputs reproduces its outputs
byte for byte.

Parse errors raise :class:`DataError` with the offending file and line
number in the message.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .kernels import GroupedDataset, KernelMatrix, KernelStack

KERNEL_BINARY_MAGIC = b"ENMKLKRN"
MANIFEST_VERSION = 1
MODEL_FORMAT_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes so that the target file is never seen half-written."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, two-space indent, lossless floats."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _format_float(x: float) -> str:
    return repr(float(x))


def _read_csv_rows(path) -> list[tuple[int, list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # skip blank lines
            rows.append((lineno, row))
    if not rows:
        raise DataError(f"{path}: file is empty")
    return rows


def _parse_float(path, lineno: int, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{lineno}: non-finite value: {text!r}")
    return value


def read_features_csv(path):
    """Parse a features CSV: header ``id,<name>,...`` then one row per sample.

    Returns (sample_ids, feature_names, features matrix).
    """
    rows = _read_csv_rows(path)
    header_line, header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}:{header_line}: need an id column and at least one feature")
    feature_names = tuple(h.strip() for h in header[1:])
    if len(set(feature_names)) != len(feature_names):
        raise DataError(f"{path}:{header_line}: duplicate feature name in header")
    if any(not f for f in feature_names):
        raise DataError(f"{path}:{header_line}: empty feature name in header")
    ids = []
    seen = set()
    data = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
            )
        sid = row[0].strip()
        if not sid:
            raise DataError(f"{path}:{lineno}: empty sample id")
        if sid in seen:
            raise DataError(f"{path}:{lineno}: duplicate sample id '{sid}'")
        seen.add(sid)
        ids.append(sid)
        data.append([_parse_float(path, lineno, v) for v in row[1:]])
    if not ids:
        raise DataError(f"{path}: no data rows")
    return tuple(ids), feature_names, np.array(data, dtype=np.float64)


def read_group_map_csv(path):
    """Parse a two-column ``feature,group`` map; keeps first-appearance order.

    Returns (feature -> group name mapping, group names in appearance order).
    """
    rows = _read_csv_rows(path)
    mapping: dict[str, str] = {}
    group_order: list[str] = []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        feature, group = row[0].strip(), row[1].strip()
        if not feature or not group:
            raise DataError(f"{path}:{lineno}: empty feature or group name")
        if feature in mapping:
            raise DataError(f"{path}:{lineno}: feature '{feature}' mapped twice")
        mapping[feature] = group
        if group not in group_order:
            group_order.append(group)
    if not mapping:
        raise DataError(f"{path}: no map entries")
    return mapping, tuple(group_order)


def read_column_csv(path, value_name: str = "value"):
    """Parse an ``id,value`` CSV into (id -> (raw string, line number))."""
    rows = _read_csv_rows(path)
    out: dict[str, tuple[str, int]] = {}
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        sid = row[0].strip()
        if not sid:
            raise DataError(f"{path}:{lineno}: empty sample id")
        if sid in out:
            raise DataError(f"{path}:{lineno}: duplicate sample id '{sid}'")
        out[sid] = (row[1].strip(), lineno)
    if not out:
        raise DataError(f"{path}: no {value_name} rows")
    return out


def parse_targets(targets_path, sample_ids, task: str):
    """Targets for the given samples, in the given order.

    Classification maps the two distinct raw labels onto -1/+1 in sorted
    order and returns the mapping; regression parses real values and
    returns None for the mapping.
    """
    raw = read_column_csv(targets_path, "target")
    for sid in sample_ids:
        if sid not in raw:
            raise DataError(f"{targets_path}: no target for sample '{sid}'")
    if task == "classification":
        distinct = sorted({raw[sid][0] for sid in sample_ids})
        if len(distinct) != 2:
            raise DataError(
                f"{targets_path}: classification needs exactly 2 distinct labels, "
                f"got {len(distinct)}: {distinct[:5]}"
            )
        label_mapping = {distinct[0]: -1.0, distinct[1]: 1.0}
        targets = np.array([label_mapping[raw[sid][0]] for sid in sample_ids])
        return targets, label_mapping
    values = []
    for sid in sample_ids:
        text, lineno = raw[sid]
        values.append(_parse_float(targets_path, lineno, text))
    return np.array(values), None


def load_grouped_dataset(
    features_path, groups_path, targets_path=None, task: str | None = None
):
    """Assemble a :class:`GroupedDataset` from feature, group, and target CSVs.

    Every feature column must appear in the group map, and every group in
    the map must match at least one present column. For classification the
    raw target labels (exactly two distinct values) are mapped onto -1/+1
    in sorted order; the mapping is returned so predictions can be written
    back in the caller's vocabulary.

    Returns (dataset, label_mapping) where label_mapping is None for
    regression or when no targets were given.
    """
    sample_ids, feature_names, features = read_features_csv(features_path)
    mapping, group_order = read_group_map_csv(groups_path)
    for name in feature_names:
        if name not in mapping:
            raise DataError(
                f"{features_path}: feature column '{name}' is missing from the group map"
            )
    present = {mapping[name] for name in feature_names}
    for group in group_order:
        if group not in present:
            raise DataError(
                f"{groups_path}: group '{group}' has no feature columns in {features_path}"
            )
    group_index = {g: j for j, g in enumerate(group_order)}
    groups = np.array([group_index[mapping[name]] for name in feature_names], dtype=np.int64)

    label_mapping = None
    targets = np.zeros(len(sample_ids))
    if targets_path is not None:
        targets, label_mapping = parse_targets(targets_path, sample_ids, task)

    data = GroupedDataset(
        features=features,
        groups=groups,
        group_names=group_order,
        targets=targets,
        sample_ids=sample_ids,
        feature_names=feature_names,
    )
    return data, label_mapping


def read_blocks(path, sample_ids) -> dict:
    """Block label per sample id from an ``id,block`` CSV."""
    raw = read_column_csv(path, "block")
    out = {}
    for sid in sample_ids:
        if sid not in raw:
            raise DataError(f"{path}: no block for sample '{sid}'")
        out[sid] = raw[sid][0]
    return out


def write_kernel_csv(path, kernel: KernelMatrix) -> None:
    lines = ["id," + ",".join(kernel.col_ids)]
    for rid, row in zip(kernel.row_ids, kernel.values):
        lines.append(rid + "," + ",".join(_format_float(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_kernel_csv(path, centered: bool = False, normalized: bool = False) -> KernelMatrix:
    rows = _read_csv_rows(path)
    header_line, header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}:{header_line}: need an id column and at least one value column")
    col_ids = tuple(h.strip() for h in header[1:])
    row_ids = []
    values = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        row_ids.append(row[0].strip())
        values.append([_parse_float(path, lineno, v) for v in row[1:]])
    if not row_ids:
        raise DataError(f"{path}: no data rows")
    return KernelMatrix(
        np.array(values), tuple(row_ids), col_ids, centered=centered, normalized=normalized
    )


def write_kernel_binary(path, kernel: KernelMatrix) -> None:
    """Binary kernel layout: 8-byte magic, two uint64 dims, float64 row-major."""
    rows, cols = kernel.values.shape
    payload = (
        KERNEL_BINARY_MAGIC
        + struct.pack("<QQ", rows, cols)
        + np.ascontiguousarray(kernel.values, dtype="<f8").tobytes()
    )
    atomic_write_bytes(path, payload)


def read_kernel_binary(
    path, row_ids, col_ids, centered: bool = False, normalized: bool = False
) -> KernelMatrix:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    blob = path.read_bytes()
    header = len(KERNEL_BINARY_MAGIC) + 16
    if len(blob) < header or not blob.startswith(KERNEL_BINARY_MAGIC):
        raise DataError(f"{path}: not a kernel binary file (bad magic)")
    rows, cols = struct.unpack("<QQ", blob[len(KERNEL_BINARY_MAGIC):header])
    expected = header + rows * cols * 8
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes for a {rows}x{cols} kernel, got {len(blob)}")
    values = np.frombuffer(blob[header:], dtype="<f8").reshape(rows, cols)
    return KernelMatrix(values, tuple(row_ids), tuple(col_ids), centered=centered, normalized=normalized)


def write_self_sim_csv(path, sample_ids, values) -> None:
    lines = ["id,self_similarity"]
    for sid, v in zip(sample_ids, values):
        lines.append(f"{sid},{_format_float(v)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_self_sim_csv(path, sample_ids) -> np.ndarray:
    raw = read_column_csv(path, "self-similarity")
    out = []
    for sid in sample_ids:
        if sid not in raw:
            raise DataError(f"{path}: no self-similarity for sample '{sid}'")
        text, lineno = raw[sid]
        out.append(_parse_float(path, lineno, text))
    return np.array(out)


def write_stack(
    out_dir,
    stack: KernelStack,
    fmt: str = "csv",
    kind: str = "train",
    self_sims=None,
    sources: dict | None = None,
) -> Path:
    """Write a kernel stack plus manifest into a directory.

    One data file and one sidecar per group; the manifest ties them
    together and records the source files. For cross stacks, per-group
    test self-similarities are written alongside. Returns the manifest path.
    """
    if fmt not in ("csv", "binary"):
        raise ValueError(f"unknown kernel format {fmt!r}")
    if kind not in ("train", "cross"):
        raise ValueError(f"unknown stack kind {kind!r}")
    if kind == "cross" and self_sims is None:
        raise ValueError("cross stacks need per-group self-similarities")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = []
    for j, (name, size, kernel) in enumerate(
        zip(stack.group_names, stack.group_sizes, stack.kernels)
    ):
        stem = f"kernel_{j:03d}"
        data_file = f"{stem}.{'csv' if fmt == 'csv' else 'bin'}"
        meta_file = f"{stem}.meta.json"
        if fmt == "csv":
            write_kernel_csv(out_dir / data_file, kernel)
        else:
            write_kernel_binary(out_dir / data_file, kernel)
        meta = {
            "group": name,
            "size": size,
            "format": fmt,
            "data_file": data_file,
            "rows": kernel.n_rows,
            "cols": kernel.n_cols,
            "row_ids": list(kernel.row_ids),
            "col_ids": list(kernel.col_ids),
            "centered": kernel.centered,
            "normalized": kernel.normalized,
        }
        write_json(out_dir / meta_file, meta)
        entry = {"name": name, "size": size, "data_file": data_file, "meta_file": meta_file}
        if kind == "cross":
            sim_file = f"{stem}.selfsim.csv"
            write_self_sim_csv(out_dir / sim_file, stack.row_ids, self_sims[j])
            entry["self_sim_file"] = sim_file
        groups.append(entry)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "kind": kind,
        "format": fmt,
        "sample_ids": list(stack.row_ids),
        "col_ids": list(stack.col_ids),
        "groups": groups,
        "sources": sources or {},
    }
    manifest_path = out_dir / "stack.json"
    write_json(manifest_path, manifest)
    return manifest_path


def read_stack(manifest_path):
    """Load a kernel stack written by :func:`write_stack`.

    Returns (stack, self_sims or None, manifest dict). Sidecar metadata is
    cross-checked against the actual kernel files.
    """
    manifest_path = Path(manifest_path)
    manifest = read_json(manifest_path)
    base = manifest_path.parent
    for key in ("kind", "format", "sample_ids", "col_ids", "groups"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: manifest is missing '{key}'")
    fmt = manifest["format"]
    row_ids = tuple(manifest["sample_ids"])
    col_ids = tuple(manifest["col_ids"])
    kernels = []
    names = []
    sizes = []
    self_sims = [] if manifest["kind"] == "cross" else None
    for entry in manifest["groups"]:
        meta = read_json(base / entry["meta_file"])
        flags = {"centered": bool(meta["centered"]), "normalized": bool(meta["normalized"])}
        data_path = base / entry["data_file"]
        if fmt == "csv":
            kernel = read_kernel_csv(data_path, **flags)
            if kernel.row_ids != row_ids or kernel.col_ids != col_ids:
                raise DataError(f"{data_path}: kernel ids do not match the manifest")
        else:
            kernel = read_kernel_binary(data_path, row_ids, col_ids, **flags)
        kernels.append(kernel)
        names.append(entry["name"])
        sizes.append(int(entry["size"]))
        if self_sims is not None:
            if "self_sim_file" not in entry:
                raise DataError(f"{manifest_path}: cross manifest lacks a self-similarity file")
            self_sims.append(read_self_sim_csv(base / entry["self_sim_file"], row_ids))
    stack = KernelStack(tuple(kernels), tuple(names), tuple(sizes))
    return stack, self_sims, manifest


def write_predictions_csv(path, sample_ids, decisions, labels=None) -> None:
    """Prediction rows: decision values plus, for classification, labels."""
    if labels is None:
        lines = ["id,prediction"]
        for sid, d in zip(sample_ids, decisions):
            lines.append(f"{sid},{_format_float(d)}")
    else:
        lines = ["id,decision_value,predicted_label"]
        for sid, d, l in zip(sample_ids, decisions, labels):
            lines.append(f"{sid},{_format_float(d)},{l}")
    atomic_write_text(path, "\n".join(lines) + "\n")
