"""Feature file readers and writers.

CSV: header ``id,label,f0,...,f{d-1}``; the label column may be omitted, or
present and empty on every row for an unlabeled file.

Binary (little-endian)::

    b"SUBSEL01"
    u32 n, u32 d, u32 has_labels
    n*d f64, row-major
    n u32 labels              (only if has_labels)
    n x (u32 byte length, UTF-8 id)
"""

from __future__ import annotations

import csv
import io
import math
import struct
from pathlib import Path

import numpy as np

from .data import FeatureDataset, check_dataset
from .errors import FormatError

MAGIC = b"SUBSEL01"


def _fmt_float(x: float) -> str:
    return repr(float(x))


def write_csv(dataset: FeatureDataset, path):
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    header = ["id"] + (["label"] if dataset.has_labels else [])
    w.writerow(header + [f"f{j}" for j in range(dataset.d)])
    for i in range(dataset.n):
        row = [dataset.ids[i]]
        if dataset.has_labels:
            lab = int(dataset.labels[i])
            row.append(dataset.label_names[lab] if dataset.label_names else str(lab))
        row += [_fmt_float(v) for v in dataset.features[i]]
        w.writerow(row)
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_csv(path, validate=True) -> FeatureDataset:
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text, newline="")))
    if not rows:
        raise FormatError("empty file", row=1)
    header = rows[0]
    if not header or header[0] != "id":
        raise FormatError("first header column must be 'id'", row=1, column=1)
    has_label_col = len(header) > 1 and header[1] == "label"
    first_feat = 2 if has_label_col else 1
    feat_names = header[first_feat:]
    for j, name in enumerate(feat_names):
        if name != f"f{j}":
            raise FormatError(
                f"expected feature header 'f{j}', got {name!r}", row=1, column=first_feat + j + 1
            )
    if not feat_names:
        raise FormatError("no feature columns", row=1)
    d = len(feat_names)
    width = first_feat + d

    data = [r for r in rows[1:]]
    n = len(data)
    X = np.empty((n, d))
    ids, raw_labels = [], []
    for i, r in enumerate(data):
        line = i + 2
        if len(r) != width:
            raise FormatError(f"expected {width} fields, got {len(r)}", row=line)
        ids.append(r[0])
        if has_label_col:
            raw_labels.append(r[1].strip())
        for j in range(d):
            cell = r[first_feat + j]
            try:
                X[i, j] = float(cell)
            except ValueError:
                raise FormatError(
                    f"cannot parse {cell!r} as a number", row=line, column=first_feat + j + 1
                ) from None

    labels = names = None
    if has_label_col:
        empty = [i for i, v in enumerate(raw_labels) if v == ""]
        if len(empty) == n:
            pass
        elif empty:
            raise FormatError(
                "label column mixes labeled and unlabeled rows", row=empty[0] + 2, column=2
            )
        else:
            labels, names = _encode_labels(raw_labels)
    n_classes = len(names) if names else None
    ds = FeatureDataset(X, labels, ids, n_classes, names)
    return check_dataset(ds) if validate else ds


def _encode_labels(raw):
    try:
        ints = [int(v) for v in raw]
    except ValueError:
        ints = None
    if ints is not None:
        return np.asarray(ints, dtype=np.int64), None
    names = sorted(set(raw))
    code = {name: c for c, name in enumerate(names)}
    return np.asarray([code[v] for v in raw], dtype=np.int64), names


def write_bin(dataset: FeatureDataset, path):
    parts = [MAGIC, struct.pack("<III", dataset.n, dataset.d, int(dataset.has_labels))]
    parts.append(np.ascontiguousarray(dataset.features, dtype="<f8").tobytes())
    if dataset.has_labels:
        parts.append(np.asarray(dataset.labels, dtype="<u4").tobytes())
    for ident in dataset.ids:
        b = ident.encode("utf-8")
        parts.append(struct.pack("<I", len(b)) + b)
    Path(path).write_bytes(b"".join(parts))


def read_bin(path, validate=True) -> FeatureDataset:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise FormatError(f"bad magic {blob[:8]!r}, expected {MAGIC!r}")
    if len(blob) < 20:
        raise FormatError("truncated header")
    n, d, flag = struct.unpack_from("<III", blob, 8)
    if flag not in (0, 1):
        raise FormatError(f"label flag must be 0 or 1, got {flag}")
    off = 20
    need = 8 * n * d
    if len(blob) < off + need:
        raise FormatError(f"truncated feature block: need {need} bytes at offset {off}")
    X = np.frombuffer(blob, dtype="<f8", count=n * d, offset=off).reshape(n, d).astype(np.float64)
    off += need
    labels = None
    if flag:
        if len(blob) < off + 4 * n:
            raise FormatError("truncated label block")
        labels = np.frombuffer(blob, dtype="<u4", count=n, offset=off).astype(np.int64)
        off += 4 * n
    ids = []
    for i in range(n):
        if len(blob) < off + 4:
            raise FormatError(f"truncated id length", row=i + 1)
        (length,) = struct.unpack_from("<I", blob, off)
        off += 4
        if len(blob) < off + length:
            raise FormatError("truncated id bytes", row=i + 1)
        try:
            ids.append(blob[off : off + length].decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError(f"id is not valid UTF-8: {e}", row=i + 1) from None
        off += length
    if off != len(blob):
        raise FormatError(f"{len(blob) - off} trailing bytes after ids")
    ds = FeatureDataset(X, labels, ids)
    return check_dataset(ds) if validate else ds


def detect_format(path) -> str:
    p = Path(path)
    with p.open("rb") as fh:
        head = fh.read(8)
    return "bin" if head == MAGIC else "csv"


def read_features(path, fmt=None, validate=True) -> FeatureDataset:
    fmt = fmt or detect_format(path)
    return read_bin(path, validate) if fmt == "bin" else read_csv(path, validate)


def write_features(dataset: FeatureDataset, path, fmt="csv"):
    (write_bin if fmt == "bin" else write_csv)(dataset, path)


def write_matrix_csv(M, path):
    lines = [",".join(_fmt_float(v) if math.isfinite(v) else str(v) for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
