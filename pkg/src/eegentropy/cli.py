"""Command-line interface: ``extract``, ``stats``, ``classify`` and ``report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import (PipelineConfig, classify_features, extract_features,
                       load_config_datasets, performance_table, report_metadata, run_report,
                       stats_table, write_classification, write_stats)
from .signal_io import read_feature_matrix, write_feature_matrix

log = logging.getLogger("eegentropy")

# flag -> (config key, type)
_CONFIG_FLAGS = {
    "--healthy": ("healthy_dir", str),
    "--epileptic": ("epileptic_dir", str),
    "--fs": ("fs", float),
    "--filter-order": ("filter_order", int),
    "--wavelet": ("wavelet", str),
    "--levels": ("levels", int),
    "--dwt-mode": ("dwt_mode", str),
    "--tau-max": ("tau_max", int),
    "--ami-bins": ("ami_bins", int),
    "--fnn-rtol": ("fnn_rtol", float),
    "--fnn-drop": ("fnn_drop", float),
    "--dmax": ("dmax", int),
    "--m": ("m", int),
    "--r": ("r", float),
    "--fuzzy-r": ("fuzzy_r", float),
    "--fuzzy-n": ("fuzzy_n", int),
    "--perm-order": ("perm_order", int),
    "--perm-delay": ("perm_delay", int),
    "--norm-p": ("norm_p", float),
    "--thresh-p": ("thresh_p", float),
    "--sure-eps": ("sure_eps", float),
    "--shan-bins": ("shan_bins", int),
    "--workers": ("workers", int),
}

_CLASSIFY_FLAGS = {
    "--classifier": ("classifier", str),
    "--kernel": ("kernel", str),
    "--C": ("C", float),
    "--gamma": ("gamma", str),
    "--k": ("k", int),
    "--seed": ("seed", int),
}


def _band(text: str) -> tuple[float, float]:
    try:
        low, high = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH in Hz, got {text!r}") from None
    return low, high


def _add_flags(parser: argparse.ArgumentParser, flags: dict) -> None:
    for flag, (key, typ) in flags.items():
        parser.add_argument(flag, dest=key, type=typ, default=argparse.SUPPRESS)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value config file; flags override it")
    parser.add_argument("--band", type=_band, default=argparse.SUPPRESS, metavar="LOW:HIGH")
    _add_flags(parser, _CONFIG_FLAGS)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for key, _ in list(_CONFIG_FLAGS.values()) + list(_CLASSIFY_FLAGS.values()):
        if key in vars(args):
            overrides[key] = getattr(args, key)
    if "band" in vars(args):
        overrides["band_low"], overrides["band_high"] = args.band
    if "gamma" in overrides:
        g = overrides["gamma"]
        overrides["gamma"] = None if g.lower() in ("auto", "scale") else float(g)
    return config.replace(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegentropy",
        description="Entropy and delay-embedding features for EEG seizure detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute the feature matrix from segment directories")
    _add_config_args(p)
    p.add_argument("-o", "--output", type=Path, required=True, help="output .csv or .json")
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("stats", help="group means, SDs and Mann-Whitney p-values")
    p.add_argument("matrix", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("classify", help="cross-validated LDA/SVM performance per feature")
    p.add_argument("matrix", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output JSON report")
    p.add_argument("--table", type=Path, help="also write a text table here")
    p.add_argument("--feature", action="append", default=None,
                   help="feature type name, repeatable, or 'all' (default)")
    p.add_argument("--combined", action="store_true",
                   help="one classifier over all selected features instead of one per feature")
    p.add_argument("--config", type=Path)
    _add_flags(p, _CLASSIFY_FLAGS)

    p = sub.add_parser("report", help="extract, stats and classify (LDA and SVM) in one go")
    _add_config_args(p)
    _add_flags(p, _CLASSIFY_FLAGS)
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    return parser


def cmd_extract(args) -> None:
    config = _config_from_args(args)
    dataset = load_config_datasets(config)
    log.info("extracting features from %d segments", len(dataset))
    matrix = extract_features(dataset, config)
    write_feature_matrix(matrix, args.output, args.format)
    print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} feature matrix to {args.output}")


def cmd_stats(args) -> None:
    matrix = read_feature_matrix(args.matrix)
    summary = stats_table(matrix)
    write_stats(summary, args.output, report_metadata(matrix), args.format)
    print(f"wrote {len(summary)} rows to {args.output}")


def cmd_classify(args) -> None:
    config = _config_from_args(args)
    matrix = read_feature_matrix(args.matrix)
    spec = config.classifier_spec()
    reports = classify_features(matrix, spec, args.feature, config.k, config.seed, args.combined)
    meta = report_metadata(matrix, {"seed": str(config.seed), "classifier": spec.describe()})
    write_classification(reports, args.output, meta, args.table)
    sys.stdout.write(performance_table(reports))


def cmd_report(args) -> None:
    config = _config_from_args(args)
    paths = run_report(config, args.output_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")


COMMANDS = {"extract": cmd_extract, "stats": cmd_stats, "classify": cmd_classify,
            "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, RuntimeError, ArithmeticError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"eegentropy {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
