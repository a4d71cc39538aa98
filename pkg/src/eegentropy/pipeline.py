"""End-to-end feature extraction, statistics and classification reports."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ClassifierSpec, PerformanceReport, cross_validate
from .embedding import estimate_embedding
from .entropy import ENTROPY_NAMES, EntropyParams, entropy_features, samp_en_upper_bound
from .preprocess import (MODES, design_butterworth_bandpass, dwt_decompose, filter_zero_phase,
                         get_wavelet)
from .signal_io import (DEFAULT_FS, FeatureMatrix, Label, LabeledDataset, Segment,
                        load_dataset, read_feature_matrix, write_feature_matrix)
from .stats import GroupSummary, group_summary

log = logging.getLogger(__name__)

EMBEDDING_COLUMNS = ("EmbeddingDelay", "EmbeddingDimension")


class FeatureExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    healthy_dir: str = ""
    epileptic_dir: str = ""
    fs: float = DEFAULT_FS
    output_dir: str = "results"
    # preprocessing
    filter_order: int = 4
    band_low: float = 0.5
    band_high: float = 40.0
    wavelet: str = "db4"
    levels: int = 5
    dwt_mode: str = "periodization"
    # embedding
    tau_max: int = 50
    ami_bins: int = 16
    fnn_rtol: float = 10.0
    fnn_drop: float = 0.01
    dmax: int = 15
    # entropies
    m: int = 2
    r: float = 0.2
    fuzzy_r: float = 0.15
    fuzzy_n: int = 2
    perm_order: int = 3
    perm_delay: int = 1
    norm_p: float = 2.0
    thresh_p: float = 0.2
    sure_eps: float = 3.0
    shan_bins: int = 16
    # classification
    classifier: str = "svm"
    kernel: str = "rbf"
    C: float = 1.0
    gamma: float | None = None
    svm_tol: float = 1e-3
    lda_ridge: float = 1e-6
    k: int = 10
    seed: int = 42
    # execution only; excluded from the config hash
    workers: int = 0

    _UNHASHED = ("workers", "output_dir")

    def __post_init__(self):
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if not 0 < self.band_low < self.band_high < self.fs / 2:
            raise ValueError(f"band {self.band_low}:{self.band_high} Hz invalid at fs={self.fs}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.dwt_mode not in MODES:
            raise ValueError(f"dwt_mode must be one of {MODES}, got {self.dwt_mode!r}")
        get_wavelet(self.wavelet)
        if self.tau_max < 2 or self.dmax < 2 or self.ami_bins < 2:
            raise ValueError("tau_max, dmax and ami_bins must be >= 2")
        if not 0 < self.fnn_drop < 1 or not self.fnn_rtol > 0:
            raise ValueError("need 0 < fnn_drop < 1 and fnn_rtol > 0")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        self.entropy_params()
        self.classifier_spec()

    def entropy_params(self) -> EntropyParams:
        return EntropyParams(m=self.m, r=self.r, fuzzy_r=self.fuzzy_r, fuzzy_n=self.fuzzy_n,
                             perm_order=self.perm_order, perm_delay=self.perm_delay,
                             norm_p=self.norm_p, thresh_P=self.thresh_p,
                             sure_eps=self.sure_eps, shan_bins=self.shan_bins)

    def classifier_spec(self, kind: str | None = None) -> ClassifierSpec:
        return ClassifierSpec(kind or self.classifier, self.kernel, self.C, self.gamma,
                              self.svm_tol, self.lda_ridge)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    # --- key=value serialization ---

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            lines.append(f"{key}={_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
            values[key.strip()] = value.strip()
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict[str, str]) -> "PipelineConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            default = known[key].default
            kwargs[key] = _parse_value(key, raw, default)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_text(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    def hash(self) -> str:
        payload = "\n".join(f"{k}={_format_value(v)}" for k, v in self.to_dict().items()
                            if k not in self._UNHASHED)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key: str, raw: str, default):
    try:
        if key == "gamma":
            return None if raw.lower() in ("auto", "none", "scale", "") else float(raw)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def feature_columns(levels: int = 5) -> list[str]:
    bands = [f"D{i}" for i in range(1, levels + 1)] + [f"A{levels}"]
    return list(EMBEDDING_COLUMNS) + [f"{name}_{band}" for name in ENTROPY_NAMES for band in bands]


def feature_groups(columns: list[str]) -> dict[str, list[str]]:
    """Columns grouped by feature type (the prefix before ``_``), in column order."""
    groups: dict[str, list[str]] = {}
    for col in columns:
        groups.setdefault(col.split("_", 1)[0], []).append(col)
    return groups


def segment_features(samples: np.ndarray, fs: float, config: PipelineConfig
                     ) -> tuple[np.ndarray, dict[str, bool]]:
    """One feature row: (tau, m) of the filtered segment, then entropies per sub-band.

    An undefined SampEn (no template matches) is replaced by the largest
    finite value attainable at that band length.
    """
    coeffs = design_butterworth_bandpass(config.filter_order, config.band_low,
                                         config.band_high, fs)
    filtered = filter_zero_phase(samples, coeffs)
    emb = estimate_embedding(filtered, config.tau_max, config.ami_bins, config.dmax,
                             config.fnn_rtol, config.fnn_drop)
    bands = dwt_decompose(filtered, config.wavelet, config.levels, config.dwt_mode).bands()
    params = config.entropy_params()
    per_band = {band: entropy_features(coefs, params) for band, coefs in bands.items()}
    n_undefined = 0
    for band, values in per_band.items():
        if math.isnan(values["SampEn"]):
            values["SampEn"] = samp_en_upper_bound(bands[band].size, params.m)
            n_undefined += 1
    row = [float(emb.tau), float(emb.m)]
    for name in ENTROPY_NAMES:
        row.extend(per_band[band][name] for band in bands)
    flags = {"tau_fallback": not emb.tau_is_local_min, "m_fallback": not emb.m_reached_drop,
             "sampen_undefined": n_undefined}
    return np.array(row), flags


def _segment_job(args):
    seg, config = args
    try:
        return segment_features(seg.samples, seg.fs, config)
    except Exception as exc:
        raise FeatureExtractionError(f"segment {seg.id}: {exc}") from exc


def _worker_count(config: PipelineConfig, n_jobs: int) -> int:
    if config.workers > 0:
        return min(config.workers, n_jobs)
    return max(1, min(os.cpu_count() or 1, n_jobs))


def load_config_datasets(config: PipelineConfig) -> LabeledDataset:
    """Load both label directories; fails before any feature is computed."""
    if not config.healthy_dir and not config.epileptic_dir:
        raise ValueError("no dataset directories configured")
    parts = []
    if config.healthy_dir:
        parts.append(load_dataset(config.healthy_dir, Label.HEALTHY, config.fs))
    if config.epileptic_dir:
        parts.append(load_dataset(config.epileptic_dir, Label.EPILEPTIC, config.fs))
    dataset = parts[0]
    for p in parts[1:]:
        dataset = dataset + p
    return dataset


def extract_features(dataset: LabeledDataset, config: PipelineConfig) -> FeatureMatrix:
    """Feature matrix with one row per segment, in dataset order."""
    segments: list[Segment] = list(dataset)
    if not segments:
        raise ValueError("dataset is empty")
    jobs = [(seg, config) for seg in segments]
    workers = _worker_count(config, len(jobs))
    if workers == 1:
        results = [_segment_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_segment_job, jobs, chunksize=1))
    values = np.vstack([r[0] for r in results])
    tau_fb = sum(r[1]["tau_fallback"] for r in results)
    m_fb = sum(r[1]["m_fallback"] for r in results)
    se_undef = sum(r[1]["sampen_undefined"] for r in results)
    if se_undef:
        log.warning("SampEn undefined in %d sub-bands; upper bound substituted", se_undef)
    if tau_fb or m_fb:
        log.warning("embedding fallbacks: %d delay, %d dimension (of %d segments)",
                    tau_fb, m_fb, len(segments))
    metadata = {f"param.{k}": _format_value(v) for k, v in config.to_dict().items()
                if k not in PipelineConfig._UNHASHED}
    metadata.update({
        "config_hash": config.hash(),
        "seed": str(config.seed),
        "version": __version__,
        "n_segments": str(len(segments)),
        "embedding.tau_fallbacks": str(tau_fb),
        "embedding.m_fallbacks": str(m_fb),
        "sampen.undefined_bands": str(se_undef),
    })
    return FeatureMatrix(values, feature_columns(config.levels),
                         [s.label for s in segments], [s.id for s in segments], metadata)


# --- statistics report ---

def subband_means(matrix: FeatureMatrix) -> FeatureMatrix:
    """Per-segment mean over the sub-band columns of each multi-column feature."""
    groups = {g: cols for g, cols in feature_groups(matrix.columns).items() if len(cols) > 1}
    values = np.column_stack([matrix.select(cols).mean(axis=1) for cols in groups.values()]) \
        if groups else np.empty((matrix.shape[0], 0))
    return FeatureMatrix(values, [f"{g}_mean" for g in groups], matrix.labels, matrix.ids,
                         dict(matrix.metadata))


STATS_FIELDS = ("feature", "healthy_mean", "healthy_sd", "patient_mean", "patient_sd",
                "p_value", "u", "z", "n_healthy", "n_patient")


def stats_table(matrix: FeatureMatrix) -> GroupSummary:
    """Per-column rows followed by sub-band-mean rows."""
    per_column = group_summary(matrix)
    means = subband_means(matrix)
    extra = group_summary(means).rows if means.shape[1] else ()
    return GroupSummary(per_column.rows + tuple(extra))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}" if math.isfinite(v) else "nan"
    return str(v)


def write_stats(summary: GroupSummary, path, metadata: dict[str, str], fmt: str | None = None) -> None:
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    records = summary.as_records()
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in r.items()} for r in records]
        path.write_text(json.dumps({"metadata": dict(sorted(metadata.items())), "rows": clean},
                                   indent=1) + "\n")
        return
    if fmt != "csv":
        raise ValueError(f"unsupported stats format {fmt!r}")
    lines = [f"# {k}={v}" for k, v in sorted(metadata.items())]
    lines.append(",".join(STATS_FIELDS))
    for r in records:
        lines.append(",".join(_fmt(r[f]) for f in STATS_FIELDS))
    path.write_text("\n".join(lines) + "\n")


# --- classification report ---

def classify_features(matrix: FeatureMatrix, spec: ClassifierSpec, features: list[str] | None = None,
                      k: int = 10, seed: int = 42, combined: bool = False
                      ) -> list[PerformanceReport]:
    """One cross-validated report per feature type (or one over all selected columns).

    Rows with a non-finite value in the selected columns are left out.
    """
    groups = feature_groups(matrix.columns)
    names = list(groups) if not features or features == ["all"] else list(features)
    unknown = [n for n in names if n not in groups]
    if unknown:
        raise KeyError(f"unknown feature {unknown[0]!r}; valid names: {', '.join(groups)}, all")
    selections = ([("+".join(names), [c for n in names for c in groups[n]])] if combined
                  else [(n, groups[n]) for n in names])
    reports = []
    for name, cols in selections:
        X = matrix.select(cols)
        keep = np.all(np.isfinite(X), axis=1)
        if not keep.all():
            log.warning("%s: dropping %d rows with undefined values", name, int((~keep).sum()))
        reports.append(cross_validate(X[keep], matrix.labels[keep], spec, k, seed, name))
    return reports


def performance_table(reports: list[PerformanceReport], pooled: bool = False) -> str:
    """Text table with metrics as rows and features as columns."""
    names = [r.feature for r in reports]
    width = max([12] + [len(n) for n in names]) + 2
    lines = ["Performance criteria".ljust(22) + "".join(n.rjust(width) for n in names)]
    for key in ("accuracy", "specificity", "sensitivity"):
        vals = [(r.pooled if pooled else r.fold_mean)[key] for r in reports]
        lines.append(key.capitalize().ljust(22) + "".join(f"{v:{width}.2f}" for v in vals))
    return "\n".join(lines) + "\n"


def write_classification(reports: list[PerformanceReport], json_path, metadata: dict[str, str],
                         text_path=None) -> None:
    doc = {"metadata": dict(sorted(metadata.items())),
           "reports": [r.as_dict() for r in reports]}
    Path(json_path).write_text(json.dumps(doc, indent=1) + "\n")
    if text_path is not None:
        header = "".join(f"# {k}={v}\n" for k, v in sorted(metadata.items()))
        body = ("Fold-mean metrics (%)\n" + performance_table(reports)
                + "\nPooled-confusion metrics (%)\n" + performance_table(reports, pooled=True))
        Path(text_path).write_text(header + body)


def report_metadata(matrix: FeatureMatrix, extra: dict[str, str] | None = None) -> dict[str, str]:
    meta = {k: v for k, v in matrix.metadata.items() if k in ("config_hash", "seed", "version")}
    meta.setdefault("config_hash", "unknown")
    meta.update(extra or {})
    return meta


def run_report(config: PipelineConfig, out_dir=None) -> dict[str, Path]:
    """Extract, summarize and classify (LDA and SVM); returns written paths."""
    out = Path(out_dir or config.output_dir)
    dataset = load_config_datasets(config)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"config": out / "config.txt", "features": out / "features.csv",
             "stats": out / "stats.csv"}
    config.save(paths["config"])
    matrix = extract_features(dataset, config)
    write_feature_matrix(matrix, paths["features"])
    write_stats(stats_table(matrix), paths["stats"], report_metadata(matrix))
    for kind in ("lda", "svm"):
        reports = classify_features(matrix, config.classifier_spec(kind), None, config.k,
                                    config.seed)
        meta = report_metadata(matrix, {"seed": str(config.seed),
                                        "classifier": reports[0].classifier})
        paths[f"classify_{kind}"] = out / f"classify_{kind}.json"
        paths[f"classify_{kind}_table"] = out / f"classify_{kind}.txt"
        write_classification(reports, paths[f"classify_{kind}"], meta,
                             paths[f"classify_{kind}_table"])
    return paths


__all__ = [
    "PipelineConfig", "FeatureExtractionError", "feature_columns", "feature_groups",
    "segment_features", "extract_features", "load_config_datasets", "subband_means",
    "stats_table", "write_stats", "classify_features", "performance_table",
    "write_classification", "report_metadata", "run_report", "read_feature_matrix",
]
