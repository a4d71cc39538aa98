"""Loading Bonn-format EEG segments and persisting feature matrices."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: 4097 samples over 23.6 s.
DEFAULT_FS = 173.61


class Label(enum.IntEnum):
    HEALTHY = 0
    EPILEPTIC = 1

    @classmethod
    def parse(cls, value: "Label | str | int") -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper()
        aliases = {"HEALTHY": cls.HEALTHY, "O": cls.HEALTHY, "0": cls.HEALTHY,
                   "EPILEPTIC": cls.EPILEPTIC, "S": cls.EPILEPTIC, "1": cls.EPILEPTIC}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown label {value!r}; expected Healthy or Epileptic") from None

    def __str__(self) -> str:
        return self.name.capitalize()


class SignalFormatError(ValueError):
    """A segment file could not be parsed."""


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    fs: float
    id: str
    label: Label

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError(f"segment {self.id!r}: samples must be a non-empty 1-D vector")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"segment {self.id!r}: non-finite sample values")
        if not self.fs > 0:
            raise ValueError(f"segment {self.id!r}: fs must be positive, got {self.fs}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", Label.parse(self.label))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class LabeledDataset:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        rates = {s.fs for s in segments}
        if len(rates) > 1:
            raise ValueError(f"segments have mixed sampling rates: {sorted(rates)}")
        object.__setattr__(self, "segments", segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __add__(self, other: "LabeledDataset") -> "LabeledDataset":
        return LabeledDataset(self.segments + other.segments)

    @property
    def fs(self) -> float | None:
        return self.segments[0].fs if self.segments else None

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(s.label) for s in self.segments], dtype=int)

    def require_both_labels(self) -> None:
        present = {s.label for s in self.segments}
        missing = set(Label) - present
        if missing:
            names = ", ".join(str(m) for m in sorted(missing))
            raise ValueError(f"dataset has no segments labelled {names}")


def load_segment(path, label, fs: float = DEFAULT_FS) -> Segment:
    """Read one plain-text segment (one number per line, Bonn layout).

    Tokens may be separated by any whitespace. Integer and decimal tokens
    are both accepted.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise SignalFormatError(f"{path}: not a text file ({exc})") from exc

    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        for token in line.split():
            try:
                values.append(float(token))
            except ValueError:
                raise SignalFormatError(
                    f"{path}:{lineno}: cannot parse {token!r} as a number") from None
    if not values:
        raise SignalFormatError(f"{path}: file contains no samples")
    return Segment(np.array(values), float(fs), path.stem, Label.parse(label))


def load_dataset(directory, label, fs: float = DEFAULT_FS) -> LabeledDataset:
    """Load every regular file in ``directory``, ordered by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    paths = sorted((p for p in directory.iterdir()
                    if p.is_file() and not p.name.startswith(".")),
                   key=lambda p: p.name)
    if not paths:
        raise ValueError(f"dataset directory is empty: {directory}")
    segments = []
    for p in paths:
        try:
            segments.append(load_segment(p, label, fs))
        except SignalFormatError:
            raise
        except (OSError, ValueError) as exc:
            raise SignalFormatError(f"{p}: {exc}") from exc
    return LabeledDataset(tuple(segments))


@dataclass
class FeatureMatrix:
    """Rows are segments; columns are named features."""

    values: np.ndarray
    columns: list[str]
    labels: np.ndarray
    ids: list[str]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D matrix")
        n, c = self.values.shape
        self.columns = [str(col) for col in self.columns]
        self.labels = np.array([int(Label.parse(v)) for v in self.labels], dtype=int)
        self.ids = [str(i) for i in self.ids]
        if len(self.columns) != c:
            raise ValueError(f"{len(self.columns)} column names for {c} columns")
        if self.labels.shape != (n,) or len(self.ids) != n:
            raise ValueError("labels and ids must have one entry per row")
        if len(set(self.columns)) != c:
            raise ValueError("column names must be unique")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, names: list[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise KeyError(f"unknown columns: {missing}")
        return self.values[:, [self.columns.index(n) for n in names]]

    def equals(self, other: "FeatureMatrix") -> bool:
        return (self.columns == other.columns and self.ids == other.ids
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.values, other.values, equal_nan=True))


def _format_float(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def write_feature_matrix(matrix: FeatureMatrix, path, format: str | None = None) -> None:
    """Write ``matrix`` as CSV or JSON; format defaults to the file suffix.

    CSV layout: optional ``# key=value`` metadata lines, then a header
    ``id,<columns...>,label`` and one row per segment.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            for key in sorted(matrix.metadata):
                fh.write(f"# {key}={matrix.metadata[key]}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", *matrix.columns, "label"])
            for i, row in enumerate(matrix.values):
                writer.writerow([matrix.ids[i], *(_format_float(v) for v in row),
                                 str(Label(matrix.labels[i]))])
    elif fmt == "json":
        records = []
        for i, row in enumerate(matrix.values):
            rec = {"id": matrix.ids[i]}
            rec.update({c: (float(v) if math.isfinite(v) else None)
                        for c, v in zip(matrix.columns, row)})
            rec["label"] = str(Label(matrix.labels[i]))
            records.append(rec)
        doc = {"metadata": dict(sorted(matrix.metadata.items())),
               "columns": matrix.columns, "records": records}
        path.write_text(json.dumps(doc, indent=1) + "\n")
    else:
        raise ValueError(f"unsupported feature-matrix format {fmt!r}")


def read_feature_matrix(path) -> FeatureMatrix:
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        columns = list(doc["columns"])
        records = doc["records"]
        values = np.array([[np.nan if r[c] is None else r[c] for c in columns]
                           for r in records], dtype=np.float64).reshape(len(records), len(columns))
        return FeatureMatrix(values, columns, [Label.parse(r["label"]) for r in records],
                             [r["id"] for r in records], dict(doc.get("metadata", {})))

    metadata: dict[str, str] = {}
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key] = value
        elif line.strip():
            body.append(line)
    if not body:
        raise SignalFormatError(f"{path}: no header row")
    rows = list(csv.reader(body))
    header = rows[0]
    if header[0] != "id" or header[-1] != "label":
        raise SignalFormatError(f"{path}: header must start with 'id' and end with 'label'")
    columns = header[1:-1]
    data = rows[1:]
    values = np.array([[float(v) for v in r[1:-1]] for r in data],
                      dtype=np.float64).reshape(len(data), len(columns))
    return FeatureMatrix(values, columns, [r[-1] for r in data], [r[0] for r in data], metadata)
