"""Ingestion, windowing and feature extraction for tri-axial inertial data.

A CSV file becomes a :class:`RawStream`; :func:`window` cuts it into fixed
length :class:`Window` objects (never across a subject/device boundary) and
:func:`extract_features` maps each window to a 16-dimensional vector.  The
resulting matrices are bundled with labels in :class:`LabeledDataset`.
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DimensionMismatch

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 128
DEFAULT_OVERLAP = 0.5

AXES = ("ax", "ay", "az")
SIGNALS = AXES + ("mag",)
STATS = ("mean", "std", "min", "max")
FEATURE_NAMES = tuple(f"{sig}_{stat}" for sig in SIGNALS for stat in STATS)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class ColumnMap:
    """Names of the CSV columns holding each field of a sample."""

    timestamp: str = "timestamp"
    ax: str = "ax"
    ay: str = "ay"
    az: str = "az"
    label: str = "label"
    subject: str = "subject"
    device: str = "device"
    dataset: str | None = None

    @classmethod
    def from_dict(cls, mapping: dict | None) -> "ColumnMap":
        if not mapping:
            return cls()
        unknown = set(mapping) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**mapping)


@dataclass(frozen=True, eq=False)
class RawStream:
    """Samples from one CSV file, in file order.

    ``labels`` are integer ids into ``classes``.
    """

    timestamps: np.ndarray
    acc: np.ndarray
    labels: np.ndarray
    subjects: np.ndarray
    devices: np.ndarray
    datasets: np.ndarray
    classes: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True, eq=False)
class Window:
    frames: np.ndarray
    majority_label: int
    subject: str
    device: str
    dataset: str = ""
    start: int = 0


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix with integer labels in ``[0, num_classes)``.

    The provenance arrays are optional and, when present, have one entry
    per row.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    subjects: np.ndarray | None = None
    devices: np.ndarray | None = None
    datasets: np.ndarray | None = None
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(f"{len(y)} labels for {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite entries")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise DataError(f"labels outside [0, {self.num_classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, mask: np.ndarray) -> "LabeledDataset":
        def pick(a):
            return None if a is None else a[mask]

        return LabeledDataset(
            self.features[mask],
            self.labels[mask],
            self.num_classes,
            pick(self.subjects),
            pick(self.devices),
            pick(self.datasets),
            self.classes,
        )


def _sort_labels(names: set[str]) -> tuple[str, ...]:
    try:
        return tuple(sorted(names, key=lambda s: (float(s), s)))
    except ValueError:
        return tuple(sorted(names))


def load_csv(
    path: str | Path,
    schema: ColumnMap | dict | None = None,
    classes: Sequence[str] | None = None,
) -> RawStream:
    """Read one CSV file of accelerometer samples.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV with a header row.
    schema : ColumnMap or dict, optional
        Column names for each field; defaults to the field names.
    classes : sequence of str, optional
        Label alphabet.  Labels are mapped to their index in it.  When
        omitted, the sorted set of labels found in the file is used.

    Raises
    ------
    DataError
        Missing file or column, malformed row (with its line number),
        decreasing timestamps, or a file without samples.
    """
    path = Path(path)
    cols = schema if isinstance(schema, ColumnMap) else ColumnMap.from_dict(schema)
    if not path.is_file():
        raise DataError(f"no such file: {path}")

    ts, acc, labs, subs, devs, dsets = [], [], [], [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [cols.timestamp, cols.ax, cols.ay, cols.az, cols.label, cols.subject, cols.device]
        if cols.dataset:
            needed.append(cols.dataset)
        missing = [c for c in needed if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                t = float(row[cols.timestamp])
                a = (float(row[cols.ax]), float(row[cols.ay]), float(row[cols.az]))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{line}: malformed row {row!r}") from None
            if not (math.isfinite(t) and all(math.isfinite(v) for v in a)):
                raise DataError(f"{path}:{line}: non-finite value in row {row!r}")
            label = (row[cols.label] or "").strip()
            if not label:
                raise DataError(f"{path}:{line}: empty label")
            ts.append(t)
            acc.append(a)
            labs.append(label)
            subs.append(row[cols.subject])
            devs.append(row[cols.device])
            dsets.append(row[cols.dataset] if cols.dataset else path.stem)

    if not ts:
        raise DataError(f"{path}: no samples")

    alphabet = tuple(classes) if classes is not None else _sort_labels(set(labs))
    index = {name: i for i, name in enumerate(alphabet)}
    unknown = sorted(set(labs) - set(index))
    if unknown:
        raise DataError(f"{path}: labels {unknown} not in alphabet {alphabet}")

    stream = RawStream(
        timestamps=np.asarray(ts),
        acc=np.asarray(acc, dtype=float),
        labels=np.asarray([index[s] for s in labs], dtype=np.int64),
        subjects=np.asarray(subs, dtype=object),
        devices=np.asarray(devs, dtype=object),
        datasets=np.asarray(dsets, dtype=object),
        classes=alphabet,
    )
    for lo, hi in _runs(stream):
        dt = np.diff(stream.timestamps[lo:hi])
        if np.any(dt < 0):
            bad = lo + int(np.argmax(dt < 0)) + 1
            raise DataError(f"{path}: timestamps decrease at sample {bad}")
        if len(dt) > 2 and np.median(dt) > 0 and np.ptp(dt) > 0.5 * np.median(dt):
            # irregular sampling is flagged only; resampling is out of scope
            logger.warning(
                "%s: irregular sampling for subject=%s device=%s",
                path, stream.subjects[lo], stream.devices[lo],
            )
    return stream


def _runs(stream: RawStream) -> list[tuple[int, int]]:
    """Contiguous [lo, hi) ranges sharing subject, device and dataset."""
    n = len(stream)
    if n == 0:
        return []
    change = (
        (stream.subjects[1:] != stream.subjects[:-1])
        | (stream.devices[1:] != stream.devices[:-1])
        | (stream.datasets[1:] != stream.datasets[:-1])
    )
    cuts = [0, *(np.flatnonzero(change) + 1).tolist(), n]
    return list(zip(cuts[:-1], cuts[1:]))


def window_step(length: int, overlap: float) -> int:
    # rounding guards against 100 * (1 - 0.7) == 30.000000000000004
    return max(1, math.ceil(round(length * (1.0 - overlap), 9)))


def window(
    stream: RawStream,
    length: int = DEFAULT_WINDOW,
    overlap: float = DEFAULT_OVERLAP,
) -> list[Window]:
    """Segment a stream into fixed-length windows.

    Windows never straddle a change of subject, device or dataset; within
    each contiguous run they start every ``ceil(length * (1 - overlap))``
    samples and a trailing partial window is dropped.
    """
    if length < 2:
        raise ValueError("window length must be >= 2")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    step = window_step(length, overlap)
    n_classes = max(len(stream.classes), int(stream.labels.max()) + 1 if len(stream) else 1)

    out = []
    for lo, hi in _runs(stream):
        for start in range(lo, hi - length + 1, step):
            stop = start + length
            counts = np.bincount(stream.labels[start:stop], minlength=n_classes)
            out.append(
                Window(
                    frames=stream.acc[start:stop],
                    majority_label=int(np.argmax(counts)),
                    subject=str(stream.subjects[lo]),
                    device=str(stream.devices[lo]),
                    dataset=str(stream.datasets[lo]),
                    start=start,
                )
            )
    if not out:
        raise DataError(f"stream of {len(stream)} samples is shorter than one window of {length}")
    return out


def _features(frames: np.ndarray) -> np.ndarray:
    # frames: (..., W, 3) -> (..., 16)
    mag = np.sqrt(np.sum(frames**2, axis=-1, keepdims=True))
    sig = np.concatenate([frames, mag], axis=-1)
    stats = np.stack(
        [sig.mean(axis=-2), sig.std(axis=-2), sig.min(axis=-2), sig.max(axis=-2)],
        axis=-1,
    )
    return stats.reshape(*stats.shape[:-2], N_FEATURES)


def extract_features(w: Window | np.ndarray) -> np.ndarray:
    """16 summary statistics of one window, ordered as :data:`FEATURE_NAMES`.

    Standard deviations are population values (divide by W).
    """
    frames = np.asarray(w.frames if isinstance(w, Window) else w, dtype=float)
    if frames.ndim != 2 or frames.shape[1] != 3 or frames.shape[0] == 0:
        raise DataError(f"window frames must be a nonempty W x 3 array, got {frames.shape}")
    return _features(frames)


def feature_matrix(windows: Sequence[Window]) -> np.ndarray:
    if not windows:
        raise DataError("no windows")
    return _features(np.stack([np.asarray(w.frames, dtype=float) for w in windows]))


def windows_to_dataset(windows: Sequence[Window], classes: Sequence[str]) -> LabeledDataset:
    return LabeledDataset(
        features=feature_matrix(windows),
        labels=np.array([w.majority_label for w in windows], dtype=np.int64),
        num_classes=len(classes),
        subjects=np.array([w.subject for w in windows], dtype=object),
        devices=np.array([w.device for w in windows], dtype=object),
        datasets=np.array([w.dataset for w in windows], dtype=object),
        classes=tuple(classes),
    )


def synth_shift(
    source: LabeledDataset,
    gains,
    offsets,
    seed: int = 0,
    n_rows: int | None = None,
) -> LabeledDataset:
    """Affine covariate shift ``gain * x + offset`` applied per column.

    With ``n_rows`` set, rows are first drawn with replacement using
    ``seed``; otherwise every row is kept in order and the seed is unused.
    """
    gains = np.asarray(gains, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    if gains.shape != (source.dim,) or offsets.shape != (source.dim,):
        raise DimensionMismatch(
            f"gains {gains.shape} / offsets {offsets.shape} do not match d={source.dim}"
        )
    if np.any(gains <= 0):
        raise ValueError("gains must be strictly positive")
    ds = source
    if n_rows is not None:
        idx = np.random.default_rng(seed).integers(0, source.n, size=n_rows)
        ds = source.subset(idx)
    return LabeledDataset(
        ds.features * gains + offsets,
        ds.labels.copy(),
        ds.num_classes,
        ds.subjects,
        ds.devices,
        ds.datasets,
        ds.classes,
    )


def make_two_clusters(
    n_per_class: int,
    dim: int = 4,
    centers: tuple[float, float] = (0.0, 1.0),
    scale: float = 0.15,
    seed: int = 0,
) -> LabeledDataset:
    """Two isotropic Gaussian blobs centred at ``centers[k] * ones(dim)``."""
    rng = np.random.default_rng(seed)
    X = np.concatenate(
        [c + scale * rng.standard_normal((n_per_class, dim)) for c in centers]
    )
    y = np.repeat(np.arange(len(centers)), n_per_class)
    return LabeledDataset(X, y, len(centers))


# Shipped end-to-end fixture. Under the shift (gain 2, offset 1) the target's
# class-0 blob lands exactly on the source's class-1 blob.
SHIFT_FIXTURE = dict(n_per_class=100, dim=4, seed=20240601, gain=2.0, offset=1.0)


def affine_shift_fixture(
    n_per_class: int = SHIFT_FIXTURE["n_per_class"],
    dim: int = SHIFT_FIXTURE["dim"],
    seed: int = SHIFT_FIXTURE["seed"],
    gain: float = SHIFT_FIXTURE["gain"],
    offset: float = SHIFT_FIXTURE["offset"],
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded (source, target) pair for the two-cluster affine-shift task.

    The target is an independent draw from the source distribution pushed
    through ``gain * x + offset``.
    """
    source = make_two_clusters(n_per_class, dim, seed=seed)
    fresh = make_two_clusters(n_per_class, dim, seed=seed + 1)
    target = synth_shift(fresh, np.full(dim, gain), np.full(dim, offset))
    return source, target


_CACHE_HEADER = struct.Struct("<QQ")


def write_feature_cache(path: str | Path, X: np.ndarray) -> None:
    """Write ``X`` as two little-endian uint64 dims followed by float64 row-major data."""
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise DimensionMismatch("feature cache holds 2-D matrices only")
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(*X.shape))
        fh.write(X.tobytes(order="C"))


def read_feature_cache(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _CACHE_HEADER.size:
        raise DataError(f"{path}: truncated feature cache")
    n, d = _CACHE_HEADER.unpack_from(raw)
    body = raw[_CACHE_HEADER.size:]
    if len(body) != 8 * n * d:
        raise DataError(f"{path}: expected {n}x{d} doubles, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(n, d).astype(float)
