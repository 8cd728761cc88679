"""Dataset directory ingestion and the citation content/cites converter.

Canonical on-disk form (all TSV, diff-friendly, no external parsers):
  edges.tsv      two integer columns, one undirected edge per line
  features.tsv   node id + d float columns
  labels.tsv     node id + integer class
  splits.tsv     optional: node id + one of train/val/test
  meta.json      optional: name, n_classes, feature_dim
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset, SPLIT_NAMES, stratified_splits
from .graph import build_graph
from .rng import SeededRng


class DataFormatError(ValueError):
    pass


def _fail(path, lineno, message):
    raise DataFormatError(f"{path}:{lineno}: {message}")


def _read_rows(path: Path, n_fields: int | None = None):
    if not path.is_file():
        raise DataFormatError(f"{path}: file not found")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if n_fields is not None and len(parts) != n_fields:
                _fail(path, lineno, f"expected {n_fields} fields, got {len(parts)}")
            rows.append((lineno, parts))
    return rows


def load_dataset(path, split_seed: int = 0) -> LabeledDataset:
    """Load a canonical dataset directory.

    Node ids must be dense 0..n-1 and agree across files. Splits come from
    splits.tsv when present; otherwise a seeded stratified 60/20/20 split is
    generated (and the report records which happened).
    """
    root = Path(path)
    if not root.is_dir():
        raise DataFormatError(f"{root}: not a directory")

    feat_path = root / "features.tsv"
    rows = _read_rows(feat_path)
    if not rows:
        raise DataFormatError(f"{feat_path}: no feature rows")
    width = len(rows[0][1]) - 1
    if width < 1:
        _fail(feat_path, rows[0][0], "need a node id and at least one feature")
    n = len(rows)
    features = np.zeros((n, width))
    seen = np.zeros(n, dtype=bool)
    for lineno, parts in rows:
        if len(parts) - 1 != width:
            _fail(feat_path, lineno, f"ragged row: {len(parts) - 1} features, expected {width}")
        try:
            node = int(parts[0])
            values = np.array(parts[1:], dtype=np.float64)
        except ValueError:
            _fail(feat_path, lineno, "unparseable number")
        if not 0 <= node < n:
            _fail(feat_path, lineno, f"node id {node} outside dense range [0, {n})")
        if seen[node]:
            _fail(feat_path, lineno, f"duplicate node id {node}")
        seen[node] = True
        features[node] = values

    meta = {}
    meta_path = root / "meta.json"
    if meta_path.is_file():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)

    label_path = root / "labels.tsv"
    labels = np.full(n, -1, dtype=np.int64)
    for lineno, parts in _read_rows(label_path, 2):
        try:
            node, label = int(parts[0]), int(parts[1])
        except ValueError:
            _fail(label_path, lineno, "unparseable integer")
        if not 0 <= node < n:
            _fail(label_path, lineno, f"node id {node} outside [0, {n})")
        if labels[node] != -1:
            _fail(label_path, lineno, f"duplicate label for node {node}")
        labels[node] = label
    if (labels < 0).any():
        missing = int(np.flatnonzero(labels < 0)[0])
        raise DataFormatError(f"{label_path}: node {missing} has no label")
    n_classes = int(meta.get("n_classes", labels.max() + 1))
    if labels.max() >= n_classes:
        raise DataFormatError(
            f"{label_path}: label {int(labels.max())} >= n_classes {n_classes}")

    edge_path = root / "edges.tsv"
    edges = []
    for lineno, parts in _read_rows(edge_path, 2):
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            _fail(edge_path, lineno, "unparseable integer")
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise DataFormatError(f"{edge_path}: edge ({u}, {v}) outside [0, {n})")

    split_path = root / "splits.tsv"
    if split_path.is_file():
        assigned = {}
        for lineno, parts in _read_rows(split_path, 2):
            try:
                node = int(parts[0])
            except ValueError:
                _fail(split_path, lineno, "unparseable node id")
            kind = parts[1].strip()
            if kind not in SPLIT_NAMES:
                _fail(split_path, lineno, f"unknown split {kind!r}")
            if node in assigned:
                _fail(split_path, lineno, f"node {node} assigned to two splits")
            assigned[node] = kind
        splits = {k: np.array(sorted(v for v, s in assigned.items() if s == k),
                              dtype=np.int64) for k in SPLIT_NAMES}
        splits_source = "file"
    else:
        splits = stratified_splits(labels, SeededRng(split_seed).fork("splits"))
        splits_source = "generated"

    name = meta.get("name", root.name)
    return LabeledDataset(name=name, graph=build_graph(edges, n),
                          features=features, labels=labels, splits=splits,
                          n_classes=n_classes, splits_source=splits_source)


def save_dataset(dataset: LabeledDataset, out_dir) -> Path:
    """Write a dataset in the canonical directory format (deterministic bytes)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        g = dataset.graph
        for v in range(g.n_nodes):
            for u in g.neighbors(v):
                if v < u:
                    fh.write(f"{v}\t{u}\n")
    with open(out / "features.tsv", "w", encoding="utf-8") as fh:
        for i, row in enumerate(dataset.features):
            fh.write(str(i) + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")
    with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
        for i, label in enumerate(dataset.labels):
            fh.write(f"{i}\t{int(label)}\n")
    with open(out / "splits.tsv", "w", encoding="utf-8") as fh:
        for kind in SPLIT_NAMES:
            for node in dataset.splits[kind]:
                fh.write(f"{int(node)}\t{kind}\n")
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump({"name": dataset.name, "n_classes": dataset.n_classes,
                   "feature_dim": dataset.feature_dim}, fh, sort_keys=True)
        fh.write("\n")
    return out


def convert_content_cites(content_path, cites_path, out_dir) -> dict:
    """Convert classic `<id> <features...> <label>` + `<id> <id>` files.

    String ids become dense integers in first-appearance order of the content
    file; label strings map to class indices in lexicographic order; citation
    lines naming unknown ids are dropped (the count is reported and stored in
    meta.json). Identical inputs produce byte-identical output directories.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    if not content_path.is_file():
        raise DataFormatError(f"{content_path}: file not found")
    if not cites_path.is_file():
        raise DataFormatError(f"{cites_path}: file not found")

    ids: dict[str, int] = {}
    feature_rows: list[np.ndarray] = []
    label_strings: list[str] = []
    width = None
    with open(content_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                _fail(content_path, lineno, "expected `<id> <features...> <label>`")
            raw_id, values, label = parts[0], parts[1:-1], parts[-1]
            if width is None:
                width = len(values)
            elif len(values) != width:
                _fail(content_path, lineno,
                      f"inconsistent feature width: {len(values)}, expected {width}")
            if raw_id in ids:
                _fail(content_path, lineno, f"duplicate node id {raw_id!r}")
            try:
                row = np.array(values, dtype=np.float64)
            except ValueError:
                _fail(content_path, lineno, "unparseable feature value")
            ids[raw_id] = len(feature_rows)
            feature_rows.append(row)
            label_strings.append(label)
    if not feature_rows:
        raise DataFormatError(f"{content_path}: no content rows")

    classes = sorted(set(label_strings))
    class_index = {c: i for i, c in enumerate(classes)}
    labels = [class_index[s] for s in label_strings]

    edges = []
    dropped = 0
    with open(cites_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                _fail(cites_path, lineno, "expected `<id> <id>`")
            if parts[0] not in ids or parts[1] not in ids:
                dropped += 1
                continue
            edges.append((ids[parts[0]], ids[parts[1]]))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")
    with open(out / "features.tsv", "w", encoding="utf-8") as fh:
        for i, row in enumerate(feature_rows):
            fh.write(str(i) + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")
    with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
        for i, label in enumerate(labels):
            fh.write(f"{i}\t{label}\n")
    stats = {
        "name": content_path.stem,
        "n_classes": len(classes),
        "feature_dim": width,
        "n_nodes": len(feature_rows),
        "n_cite_lines": len(edges),
        "dropped_cites": dropped,
        "class_names": classes,
    }
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return stats
