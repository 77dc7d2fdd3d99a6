"""Embedding sets, dense similarity kernels and the on-disk embedding format.

On-disk layout
--------------
An embedding file is a pair sharing a stem:

``<stem>.json``
    ``{"n": int, "d": int, "dtype": "f32", "labels": bool, "ids": bool}``
    plus an optional ``"num_classes"``.

``<stem>.bin``
    little-endian, no padding, in this order:

    * ``n*d`` float32 values, row-major (byte offset 0)
    * if ``labels``: ``n`` int32 class ids (offset ``4*n*d``)
    * if ``ids``: ``n`` int64 item ids (offset ``4*n*d + 4*n*labels``)

When ids are absent they default to ``0..n-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

METRICS = ("cosine", "dot")
DEFAULT_RIDGE = 1e-3


class EmbeddingFormatError(ValueError):
    """Malformed embedding header or binary payload."""


@dataclass
class EmbeddingSet:
    vectors: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None
    num_classes: int | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(1, -1) if v.size else v.reshape(0, 1)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError(f"vectors must be an n x d matrix with d >= 1, got shape {v.shape}")
        self.vectors = v
        n = v.shape[0]
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (n,):
                raise ValueError(f"expected {n} ids, got shape {self.ids.shape}")
            if np.unique(self.ids).size != n:
                raise ValueError("item ids must be unique")
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise ValueError(f"expected {n} labels, got shape {lab.shape}")
            if lab.size and not np.issubdtype(lab.dtype, np.integer):
                if not np.all(lab == np.round(lab)):
                    raise ValueError("labels must be integers")
            lab = lab.astype(np.int64)
            if lab.size and lab.min() < 0:
                raise ValueError("labels must be non-negative")
            if self.num_classes is None:
                self.num_classes = int(lab.max()) + 1 if lab.size else 0
            elif lab.size and lab.max() >= self.num_classes:
                raise ValueError(f"label {int(lab.max())} outside [0, {self.num_classes})")
            self.labels = lab

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, index) -> "EmbeddingSet":
        index = np.asarray(index, dtype=np.int64)
        return EmbeddingSet(
            self.vectors[index],
            None if self.labels is None else self.labels[index],
            self.ids[index],
            self.num_classes,
        )


@dataclass(frozen=True)
class Kernel:
    values: np.ndarray
    row_ids: np.ndarray
    col_ids: np.ndarray
    metric: str = "cosine"
    shifted: bool = False
    ridge: float = 0.0
    square: bool = field(default=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _as_array(k) -> np.ndarray:
    return np.asarray(k.values if isinstance(k, Kernel) else k, dtype=np.float64)


def _unit_rows(es: EmbeddingSet, allow_zero: bool) -> np.ndarray:
    norms = np.linalg.norm(es.vectors, axis=1)
    zero = norms == 0.0
    if zero.any() and not allow_zero:
        bad = int(es.ids[np.flatnonzero(zero)[0]])
        raise ValueError(f"item {bad} is an all-zero vector; cosine similarity is undefined")
    norms = np.where(zero, 1.0, norms)
    return es.vectors / norms[:, None]


def build_kernel(a: EmbeddingSet, b: EmbeddingSet | None = None, metric: str = "cosine",
                 allow_zero: bool = False) -> Kernel:
    """Dense similarity matrix between the rows of ``a`` and ``b``.

    With ``b`` omitted (or ``b is a``) the result is the square ground kernel,
    symmetrised exactly.  ``allow_zero`` makes zero rows under cosine
    similarity contribute 0 instead of raising.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    same = b is None or b is a
    b = a if b is None else b
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    if metric == "cosine":
        ua = _unit_rows(a, allow_zero)
        ub = ua if same else _unit_rows(b, allow_zero)
        vals = ua @ ub.T
        np.clip(vals, -1.0, 1.0, out=vals)
    else:
        vals = a.vectors @ b.vectors.T
    if same:
        vals = 0.5 * (vals + vals.T)
        if metric == "cosine":
            nz = np.linalg.norm(a.vectors, axis=1) > 0
            vals[np.flatnonzero(nz), np.flatnonzero(nz)] = 1.0
    return Kernel(vals, a.ids.copy(), b.ids.copy(), metric, square=same)


def shift_to_nonneg(k: Kernel, force: bool = False) -> Kernel:
    """Map cosine similarities into [0, 1] via ``(x + 1) / 2``.

    Applied only to cosine kernels holding a negative entry (or when
    ``force``); any other kernel is returned unchanged.
    """
    if k.metric != "cosine" or k.shifted:
        return k
    if not force and not (k.values < 0).any():
        return k
    return Kernel((k.values + 1.0) / 2.0, k.row_ids, k.col_ids, k.metric, True, k.ridge, k.square)


def regularize_spd(k: Kernel, ridge: float = DEFAULT_RIDGE) -> Kernel:
    vals = k.values
    if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
        raise ValueError(f"ridge regularization needs a square kernel, got shape {vals.shape}")
    out = vals + ridge * np.eye(vals.shape[0])
    return Kernel(out, k.row_ids, k.col_ids, k.metric, k.shifted, k.ridge + ridge, k.square)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".bin")


def write_embeddings(path, es: EmbeddingSet, with_ids: bool = True) -> tuple[Path, Path]:
    hdr_path, bin_path = _paths(path)
    header = {"n": es.n, "d": es.d, "dtype": "f32",
              "labels": es.labels is not None, "ids": bool(with_ids)}
    if es.num_classes is not None and es.labels is not None:
        header["num_classes"] = int(es.num_classes)
    hdr_path.write_text(json.dumps(header, indent=2) + "\n")
    with open(bin_path, "wb") as fh:
        fh.write(np.ascontiguousarray(es.vectors, dtype="<f4").tobytes())
        if es.labels is not None:
            fh.write(es.labels.astype("<i4").tobytes())
        if with_ids:
            fh.write(es.ids.astype("<i8").tobytes())
    return hdr_path, bin_path


def _field(header: dict, name: str, kind):
    if name not in header:
        raise EmbeddingFormatError(f"header field {name!r} is missing")
    value = header[name]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise EmbeddingFormatError(f"header field {name!r} must be an integer, got {value!r}")
    if kind is bool and not isinstance(value, bool):
        raise EmbeddingFormatError(f"header field {name!r} must be a boolean, got {value!r}")
    return value


def read_embeddings(path) -> EmbeddingSet:
    hdr_path, bin_path = _paths(path)
    try:
        header = json.loads(hdr_path.read_text())
    except FileNotFoundError:
        raise EmbeddingFormatError(f"{hdr_path}: header file not found") from None
    except json.JSONDecodeError as exc:
        raise EmbeddingFormatError(f"{hdr_path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(header, dict):
        raise EmbeddingFormatError(f"{hdr_path}: header must be a JSON object")
    n = _field(header, "n", int)
    d = _field(header, "d", int)
    if n < 0 or d < 1:
        raise EmbeddingFormatError(f"{hdr_path}: need n >= 0 and d >= 1, got n={n}, d={d}")
    if header.get("dtype") != "f32":
        raise EmbeddingFormatError(f"{hdr_path}: header field 'dtype' must be \"f32\", got {header.get('dtype')!r}")
    has_labels = _field(header, "labels", bool)
    has_ids = _field(header, "ids", bool)
    num_classes = header.get("num_classes")

    try:
        raw = bin_path.read_bytes()
    except FileNotFoundError:
        raise EmbeddingFormatError(f"{bin_path}: binary file not found") from None
    blocks = [("vectors", 4 * n * d)]
    if has_labels:
        blocks.append(("labels", 4 * n))
    if has_ids:
        blocks.append(("ids", 8 * n))
    offset = 0
    spans = {}
    for name, size in blocks:
        if len(raw) < offset + size:
            raise EmbeddingFormatError(
                f"{bin_path}: truncated in {name} block; block spans bytes [{offset}, {offset + size}) "
                f"but file ends at byte offset {len(raw)}")
        spans[name] = (offset, offset + size)
        offset += size
    if len(raw) != offset:
        raise EmbeddingFormatError(
            f"{bin_path}: {len(raw) - offset} trailing bytes after byte offset {offset}")

    def view(name, dtype):
        lo, hi = spans[name]
        return np.frombuffer(raw[lo:hi], dtype=dtype)

    vectors = view("vectors", "<f4").astype(np.float64).reshape(n, d)
    if not np.all(np.isfinite(vectors)):
        bad = int(np.flatnonzero(~np.isfinite(vectors).all(axis=1))[0])
        raise EmbeddingFormatError(f"{bin_path}: non-finite value in row {bad} (byte offset {4 * bad * d})")
    labels = view("labels", "<i4").astype(np.int64) if has_labels else None
    ids = view("ids", "<i8").astype(np.int64) if has_ids else None
    try:
        return EmbeddingSet(vectors, labels, ids, num_classes)
    except ValueError as exc:
        raise EmbeddingFormatError(f"{bin_path}: {exc}") from None
