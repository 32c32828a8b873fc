# src/senres/dataset.py
from __future__ import annotations

"""
Recordings, window sets, loaders and splits.

A WindowSet keeps its windows as one n×T×C float32 stack (the SWND storage
precision) plus integer labels into a class-name table. Provenance rides
along for manifests but never takes part in equality.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .augment import AugmentSpec, Window, augment_array
from .errors import ConfigError, InvalidParamsError, ParseError, SchemaError, ShapeError
from .ids import make_rng
from .io import emit_verbose, emit_warn

CHANNELS: Tuple[str, ...] = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")

UCIHAR_CLASSES: Tuple[str, ...] = (
    "WALKING", "WALKING_UPSTAIRS", "WALKING_DOWNSTAIRS", "SITTING", "STANDING", "LAYING",
)
UCIHAR_SIGNALS: Tuple[str, ...] = (
    "total_acc_x", "total_acc_y", "total_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z",
)

# windowing used for each public dataset: (window length, overlap fraction)
WINDOWING: Dict[str, Tuple[int, float]] = {
    "ucihar": (128, 0.5),
    "motionsense": (200, 0.125),
    "uschad": (200, 0.25),
}

# ──────────────────────────────────────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Recording:
    subject: int
    activity: str
    data: np.ndarray          # L×C, one column per channel stream
    sample_rate_hz: float = 50.0
    source: str = ""

    def __post_init__(self) -> None:
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] < 1:
            raise ShapeError(f"recording must be L×C, got {d.shape}")
        object.__setattr__(self, "data", d)

    @property
    def length(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True, eq=False)
class WindowSet:
    data: np.ndarray                          # n×T×C float32
    labels: np.ndarray                        # n, int64 into class_names
    class_names: Tuple[str, ...]
    subjects: Optional[np.ndarray] = None     # n, int64
    sample_rate_hz: float = 50.0
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        d = np.ascontiguousarray(self.data, dtype=np.float32)
        if d.ndim != 3:
            raise ShapeError(f"window stack must be n×T×C, got {d.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != d.shape[0]:
            raise ShapeError(f"{labels.shape[0]} labels for {d.shape[0]} windows")
        names = tuple(str(c) for c in self.class_names)
        if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
            raise InvalidParamsError(f"labels outside class table of {len(names)} classes")
        subj = self.subjects
        if subj is not None:
            subj = np.asarray(subj, dtype=np.int64).reshape(-1)
            if subj.shape[0] != d.shape[0]:
                raise ShapeError(f"{subj.shape[0]} subject ids for {d.shape[0]} windows")
        if not np.isfinite(d).all():
            raise InvalidParamsError("window set contains non-finite values")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "subjects", subj)
        object.__setattr__(self, "provenance", dict(self.provenance))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WindowSet):
            return NotImplemented
        same_subjects = (
            (self.subjects is None and other.subjects is None)
            or (self.subjects is not None and other.subjects is not None
                and np.array_equal(self.subjects, other.subjects))
        )
        return (
            self.class_names == other.class_names
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
            and np.array_equal(self.labels, other.labels)
            and same_subjects
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return int(self.data.shape[0])

    @property
    def T(self) -> int:
        return int(self.data.shape[1])

    @property
    def C(self) -> int:
        return int(self.data.shape[2])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def window(self, i: int) -> Window:
        return Window(self.data[i], self.sample_rate_hz, int(self.labels[i]))

    @property
    def windows(self) -> List[Window]:
        return [self.window(i) for i in range(len(self))]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def histogram(self) -> Dict[str, int]:
        return {name: int(n) for name, n in zip(self.class_names, self.class_counts())}

    def subset(self, idx: Sequence[int] | np.ndarray, **provenance: Any) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowSet(
            self.data[idx],
            self.labels[idx],
            self.class_names,
            None if self.subjects is None else self.subjects[idx],
            self.sample_rate_hz,
            {**self.provenance, **provenance},
        )

    def with_data(self, data: np.ndarray, **provenance: Any) -> "WindowSet":
        return replace(self, data=data, provenance={**self.provenance, **provenance})


def concat(sets: Sequence[WindowSet], **provenance: Any) -> WindowSet:
    if not sets:
        raise InvalidParamsError("nothing to concatenate")
    head = sets[0]
    for ws in sets[1:]:
        if ws.class_names != head.class_names or ws.data.shape[1:] != head.data.shape[1:]:
            raise ShapeError("window sets differ in class table or window shape")
    subjects = None
    if all(ws.subjects is not None for ws in sets):
        subjects = np.concatenate([ws.subjects for ws in sets])  # type: ignore[misc]
    return WindowSet(
        np.concatenate([ws.data for ws in sets]),
        np.concatenate([ws.labels for ws in sets]),
        head.class_names,
        subjects,
        head.sample_rate_hz,
        {**head.provenance, **provenance},
    )


# ──────────────────────────────────────────────────────────────────────────────
# Segmentation
# ──────────────────────────────────────────────────────────────────────────────

def window_step(window_len: int, overlap_fraction: float) -> int:
    if not 0.0 <= overlap_fraction < 1.0:
        raise InvalidParamsError(f"overlap must be in [0, 1), got {overlap_fraction}")
    if window_len < 2:
        raise InvalidParamsError(f"window length must be >= 2, got {window_len}")
    step = int(math.floor(window_len * (1.0 - overlap_fraction) + 0.5))
    if step < 1:
        raise InvalidParamsError(f"overlap {overlap_fraction} leaves no step for window {window_len}")
    return step


def window_starts(length: int, window_len: int, overlap_fraction: float) -> List[int]:
    step = window_step(window_len, overlap_fraction)
    return list(range(0, length - window_len + 1, step)) if length >= window_len else []


def segment(
    rec: Recording,
    window_len: int,
    overlap_fraction: float,
    *,
    class_names: Optional[Sequence[str]] = None,
) -> WindowSet:
    """Sliding windows over one recording; a stream shorter than a window yields none."""
    names = tuple(class_names) if class_names is not None else (rec.activity,)
    if rec.activity not in names:
        raise InvalidParamsError(f"activity {rec.activity!r} not in class table")
    starts = window_starts(rec.length, window_len, overlap_fraction)
    if starts:
        data = np.stack([rec.data[s:s + window_len] for s in starts])
    else:
        data = np.zeros((0, window_len, rec.data.shape[1]), dtype=np.float32)
    n = len(starts)
    return WindowSet(
        data,
        np.full(n, names.index(rec.activity), dtype=np.int64),
        names,
        np.full(n, rec.subject, dtype=np.int64),
        rec.sample_rate_hz,
        {
            "source": rec.source,
            "window_len": window_len,
            "overlap": overlap_fraction,
            "step": window_step(window_len, overlap_fraction),
        },
    )


def segment_recordings(
    recs: Sequence[Recording],
    window_len: int,
    overlap_fraction: float,
    *,
    dataset: str = "csv",
) -> WindowSet:
    if not recs:
        raise InvalidParamsError("no recordings to segment")
    names = tuple(sorted({r.activity for r in recs}))
    parts = [segment(r, window_len, overlap_fraction, class_names=names) for r in recs]
    short = sum(1 for p in parts if len(p) == 0)
    if short:
        emit_warn(f"{short} recording(s) shorter than one window ({window_len} samples) were skipped")
    return concat(
        parts,
        dataset=dataset,
        window_len=window_len,
        overlap=overlap_fraction,
        step=window_step(window_len, overlap_fraction),
        recordings=len(recs),
        source="",
    )


# ──────────────────────────────────────────────────────────────────────────────
# UCI-HAR
# ──────────────────────────────────────────────────────────────────────────────

def _locate_bad_line(path: Path, width: Optional[int]) -> ParseError:
    """Scan a whitespace-separated matrix file for the first malformed line."""
    with open(path, "r", encoding="utf-8", errors="replace") as fp:
        for lineno, line in enumerate(fp, 1):
            cells = line.split()
            if not cells:
                return ParseError("empty line", path=str(path), line=lineno)
            try:
                vals = np.array(cells, dtype=np.float64)
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                return ParseError(f"not a number: {bad!r}", path=str(path), line=lineno)
            if width is not None and vals.size != width:
                return ParseError(f"expected {width} values, found {vals.size}", path=str(path), line=lineno)
            if not np.isfinite(vals).all():
                return ParseError("non-finite value", path=str(path), line=lineno)
            width = vals.size if width is None else width
    return ParseError("malformed matrix", path=str(path))


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_matrix(path: Path, width: Optional[int] = None) -> np.ndarray:
    """Whitespace-separated float matrix; any ragged or non-numeric line → ParseError(path:line)."""
    if not path.is_file():
        raise ParseError("missing file", path=str(path))
    try:
        frame = pd.read_csv(path, sep=r"\s+", header=None, dtype=np.float64, engine="c", skip_blank_lines=False)
    except (ValueError, pd.errors.ParserError):
        raise _locate_bad_line(path, width) from None
    except pd.errors.EmptyDataError:
        raise ParseError("empty file", path=str(path)) from None
    arr = frame.to_numpy()
    if (width is not None and arr.shape[1] != width) or not np.isfinite(arr).all():
        raise _locate_bad_line(path, width)
    return arr


def _ucihar_partition(root: Path, part: str) -> WindowSet:
    sig_dir = root / "Inertial Signals"
    if not sig_dir.is_dir():
        sig_dir = root
    channels = []
    width: Optional[int] = None
    for sig in UCIHAR_SIGNALS:
        m = read_matrix(sig_dir / f"{sig}_{part}.txt", width)
        if channels and m.shape[0] != channels[0].shape[0]:
            raise ParseError(
                f"{m.shape[0]} windows but {channels[0].shape[0]} in {UCIHAR_SIGNALS[0]}_{part}.txt",
                path=str(sig_dir / f"{sig}_{part}.txt"),
                line=min(m.shape[0], channels[0].shape[0]) + 1,
            )
        width = m.shape[1]
        channels.append(m)
    n = channels[0].shape[0]
    label_path = root / f"y_{part}.txt"
    labels = read_matrix(label_path, 1)[:, 0]
    if labels.shape[0] != n:
        raise ParseError(f"expected {n} labels, found {labels.shape[0]}", path=str(label_path),
                         line=min(n, labels.shape[0]) + 1)
    bad = np.flatnonzero((labels != np.round(labels)) | (labels < 1) | (labels > len(UCIHAR_CLASSES)))
    if bad.size:
        raise ParseError(f"label {labels[bad[0]]:g} outside 1..{len(UCIHAR_CLASSES)}",
                         path=str(label_path), line=int(bad[0]) + 1)
    subjects = None
    subj_path = root / f"subject_{part}.txt"
    if subj_path.is_file():
        s = read_matrix(subj_path, 1)[:, 0]
        if s.shape[0] != n:
            raise ParseError(f"expected {n} subject ids, found {s.shape[0]}", path=str(subj_path),
                             line=min(n, s.shape[0]) + 1)
        subjects = s.astype(np.int64)
    data = np.stack(channels, axis=-1)  # n×T×6
    emit_verbose(f"ucihar/{part}: {n} windows of {data.shape[1]}×{data.shape[2]}")
    return WindowSet(data, labels.astype(np.int64) - 1, UCIHAR_CLASSES, subjects, 50.0, {"partition": part})


def load_ucihar(directory: Union[str, Path]) -> WindowSet:
    """
    Official pre-segmented UCI-HAR text files. `directory` is the dataset root
    (holding train/ and test/) or a single partition directory.
    Channels: total acceleration xyz, body gyroscope xyz.
    """
    root = Path(directory)
    if not root.is_dir():
        raise ParseError("not a directory", path=str(root))
    parts = [p for p in ("train", "test") if (root / p).is_dir()]
    if parts:
        sets = [_ucihar_partition(root / p, p) for p in parts]
    else:
        part = next((p for p in ("train", "test") if (root / f"y_{p}.txt").is_file()), None)
        if part is None:
            raise ParseError("no y_train.txt / y_test.txt label file", path=str(root))
        sets = [_ucihar_partition(root, part)]
    ws = concat(sets, dataset="ucihar", window_len=sets[0].T, overlap=0.5, partitions=parts or ["single"])
    return ws


# ──────────────────────────────────────────────────────────────────────────────
# CSV recordings (MotionSense / USC-HAD exports)
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CsvSchema:
    """
    Maps the six canonical channels to CSV columns.

        {"channels": {"acc_x": "userAcceleration.x", ...},
         "subject": "subject", "activity": "act", "sample_rate_hz": 50}
    """
    channels: Mapping[str, str]
    subject: str = "subject"
    activity: str = "activity"
    sample_rate_hz: float = 50.0
    pattern: str = "*.csv"

    def __post_init__(self) -> None:
        missing = [c for c in CHANNELS if c not in self.channels]
        if missing:
            raise SchemaError(f"schema does not map channel(s): {', '.join(missing)}")
        extra = set(self.channels) - set(CHANNELS)
        if extra:
            raise SchemaError(f"schema maps unknown channel(s): {', '.join(sorted(extra))}")
        object.__setattr__(self, "channels", dict(self.channels))

    @property
    def columns(self) -> List[str]:
        return [self.channels[c] for c in CHANNELS]

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CsvSchema":
        if not isinstance(d, Mapping) or not isinstance(d.get("channels"), Mapping):
            raise SchemaError("schema needs a 'channels' object")
        known = {"channels", "subject", "activity", "sample_rate_hz", "pattern"}
        extra = set(d) - known
        if extra:
            raise SchemaError(f"unknown schema field(s): {', '.join(sorted(extra))}")
        return cls(**{k: d[k] for k in known if k in d})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CsvSchema":
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as e:
            raise SchemaError(f"{p}: cannot read schema ({e.strerror})") from None
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", path=str(p), line=e.lineno) from None
        return cls.from_dict(raw)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "channels": dict(self.channels), "subject": self.subject, "activity": self.activity,
            "sample_rate_hz": self.sample_rate_hz, "pattern": self.pattern,
        }


def _subject_id(value: Any, path: Path, line: int) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        f = math.nan
    if not math.isfinite(f) or f != int(f):
        raise ParseError(f"subject id {value!r} is not an integer", path=str(path), line=line)
    return int(f)


def read_csv_recording(path: Path, schema: CsvSchema) -> Recording:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError("empty file", path=str(path)) from None
    except pd.errors.ParserError as e:
        raise ParseError(str(e).strip(), path=str(path)) from None
    needed = [*schema.columns, schema.subject, schema.activity]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise ParseError("no data rows", path=str(path), line=2)
    values = frame[schema.columns].apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=np.float64))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        col = schema.columns[c]
        raise ParseError(f"non-numeric value {frame[col].iloc[r]!r}", path=str(path), line=int(r) + 2, column=col)
    activity = frame[schema.activity].astype(str)
    changed = np.flatnonzero(activity.to_numpy() != activity.iloc[0])
    if changed.size:
        r = int(changed[0])
        raise ParseError(
            f"activity changes from {activity.iloc[0]!r} to {activity.iloc[r]!r} within one recording",
            path=str(path), line=r + 2, column=schema.activity,
        )
    subjects = frame[schema.subject]
    changed = np.flatnonzero(subjects.to_numpy() != subjects.iloc[0])
    if changed.size:
        raise ParseError("subject changes within one recording", path=str(path),
                         line=int(changed[0]) + 2, column=schema.subject)
    return Recording(
        _subject_id(subjects.iloc[0], path, 2),
        str(activity.iloc[0]),
        values.to_numpy(dtype=np.float64),
        float(schema.sample_rate_hz),
        str(path),
    )


def load_csv_recordings(directory: Union[str, Path], schema: CsvSchema) -> List[Recording]:
    """One Recording per CSV file (one subject × trial), rows in file order, files in sorted path order."""
    root = Path(directory)
    if not root.is_dir():
        raise ParseError("not a directory", path=str(root))
    files = sorted(p for p in root.rglob(schema.pattern) if p.is_file())
    if not files:
        raise ParseError(f"no files matching {schema.pattern}", path=str(root))
    recs = [read_csv_recording(p, schema) for p in files]
    emit_verbose(f"csv: {len(recs)} recording(s) from {root}")
    return recs


# ──────────────────────────────────────────────────────────────────────────────
# Splits
# ──────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SplitSpec:
    fraction: float
    seed: int = 0
    stratified: bool = True
    test_subjects: int = 0    # > 0: hold out this many random subjects instead

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction < 1.0:
            raise InvalidParamsError(f"train fraction must be in (0, 1), got {self.fraction}")
        if self.test_subjects < 0:
            raise InvalidParamsError(f"test_subjects must be >= 0, got {self.test_subjects}")


def _take(n: int, fraction: float) -> int:
    return min(max(int(math.floor(n * fraction + 0.5)), 1), n - 1)


def split(ws: WindowSet, spec: SplitSpec) -> Tuple[WindowSet, WindowSet]:
    """
    Seeded partition into (train, test). Stratified by class unless a class is
    too small for the fraction, in which case the split falls back to a plain
    shuffle and records a warning in both halves' provenance.
    With test_subjects > 0 the test half is every window of that many random subjects.
    """
    n = len(ws)
    if n < 2:
        raise InvalidParamsError(f"cannot split {n} window(s)")
    rng = make_rng(spec.seed)
    warnings: List[str] = []
    if spec.test_subjects > 0:
        if ws.subjects is None:
            raise ConfigError("subject-held-out split needs per-window subject ids")
        subjects = np.unique(ws.subjects)
        if spec.test_subjects >= subjects.size:
            raise ConfigError(f"cannot hold out {spec.test_subjects} of {subjects.size} subjects")
        held = rng.choice(subjects, size=spec.test_subjects, replace=False)
        test_mask = np.isin(ws.subjects, held)
        train_idx, test_idx = np.flatnonzero(~test_mask), np.flatnonzero(test_mask)
        how = {"split": "subjects", "test_subject_ids": sorted(int(s) for s in held)}
    else:
        train_parts: List[np.ndarray] = []
        stratified = spec.stratified
        if stratified:
            counts = ws.class_counts()
            for c in np.flatnonzero(counts):
                if int(math.floor(counts[c] * spec.fraction + 0.5)) < 1 or counts[c] < 2:
                    warnings.append(
                        f"class {ws.class_names[c]!r} has {counts[c]} window(s), too few for a "
                        f"stratified {spec.fraction:g} split; fell back to unstratified"
                    )
                    stratified = False
                    break
        if stratified:
            for c in np.flatnonzero(ws.class_counts()):
                idx = rng.permutation(np.flatnonzero(ws.labels == c))
                train_parts.append(idx[:_take(idx.size, spec.fraction)])
            train_idx = np.sort(np.concatenate(train_parts))
        else:
            perm = rng.permutation(n)
            train_idx = np.sort(perm[:_take(n, spec.fraction)])
        test_mask = np.ones(n, dtype=bool)
        test_mask[train_idx] = False
        test_idx = np.flatnonzero(test_mask)
        how = {"split": "stratified" if stratified else "random", "fraction": spec.fraction}
    for w in warnings:
        emit_warn(w)
    meta = {**how, "split_seed": spec.seed, "split_warnings": warnings}
    return ws.subset(train_idx, role="train", **meta), ws.subset(test_idx, role="test", **meta)


# ──────────────────────────────────────────────────────────────────────────────
# Normalisation and augmentation expansion
# ──────────────────────────────────────────────────────────────────────────────

def standardize(train: WindowSet, test: WindowSet) -> Tuple[WindowSet, WindowSet, Dict[str, List[float]]]:
    """Per-channel z-score with train statistics; constant channels keep unit scale."""
    x = train.data.astype(np.float64)
    mu = x.mean(axis=(0, 1))
    sd = x.std(axis=(0, 1))
    sd = np.where(sd > 0, sd, 1.0)
    stats = {"mean": mu.tolist(), "std": sd.tolist()}

    def z(ws: WindowSet) -> WindowSet:
        return ws.with_data(((ws.data - mu) / sd).astype(np.float32), zscore=stats)

    return z(train), z(test), stats


def expand_training_set(
    ws: WindowSet,
    spec: AugmentSpec,
    times: int,
    seed: int,
    *,
    workers: int = 1,
) -> WindowSet:
    """Original windows followed by `times` augmented copies of every window."""
    if times < 0:
        raise InvalidParamsError(f"augment times must be >= 0, got {times}")
    if times == 0:
        return ws
    copies = [
        ws.with_data(augment_array(ws.data, spec, seed, k, workers=workers, sample_rate_hz=ws.sample_rate_hz))
        for k in range(1, times + 1)
    ]
    return concat([ws, *copies], augment=spec.to_dict(), augment_times=times, augment_seed=seed)


__all__ = [
    "CHANNELS", "UCIHAR_CLASSES", "UCIHAR_SIGNALS", "WINDOWING",
    "Recording", "WindowSet", "CsvSchema", "SplitSpec",
    "concat", "window_step", "window_starts", "segment", "segment_recordings",
    "read_matrix", "load_ucihar", "read_csv_recording", "load_csv_recordings",
    "split", "standardize", "expand_training_set",
]
