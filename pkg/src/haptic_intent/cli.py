"""Command-line entry point ``haptic-intent``.

Each subcommand runs one pipeline stage on a work directory. Settings come
from defaults, then an optional ``--config`` JSON file, then flags. The
work directory defaults to ``$HAPTIC_INTENT_WORKDIR`` or ``./haptic-work``.

Exit codes: 0 success, 1 other error, 2 missing input, 3 fingerprint
mismatch, 4 format or version mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .pipeline import EXIT_ERROR, EXIT_OK, STAGES, PipelineConfig, run_pipeline, run_stage

# flag -> (config field, type, help)
_FLAGS = {
    "--workdir": ("workdir", str, "work directory holding all artifacts"),
    "--out": ("workdir", str, "alias of --workdir"),
    "--n": ("n_trials", int, "number of simulated trials"),
    "--seed": ("sim_seed", int, "simulation seed"),
    "--mix": ("mix", str, "role-pair mix, e.g. 'hard-soft=0.3,hard-hard=0.2'"),
    "--trials-per-dyad": ("trials_per_dyad", int, "simulated trials per dyad"),
    "--phase-mode": ("phase_mode", str, "per_participant or joint"),
    "--window": ("window_length", int, "window length L in samples"),
    "--feature-set": ("feature_set", int, "feature set 1, 2 or 3"),
    "--rate": ("rate_hz", float, "sampling rate in Hz"),
    "--n-uniform": ("n_uniform", int, "stage-1 windows per region"),
    "--n-skewed": ("n_skewed", int, "stage-2 windows per region (0 disables skewed sampling)"),
    "--sigma-skew": ("sigma_skew", float, "half-normal scale of stage-2 window ends (s)"),
    "--sampling-seed": ("sampling_seed", int, "window sampling seed"),
    "--split-seed": ("split_seed", int, "train/test split seed"),
    "--split-mode": ("split_mode", str, "dyad or interaction"),
    "--test-fraction": ("test_fraction", float, "share of trials held out"),
    "--variant": ("variant", str, "svm_ecoc, adaboost, random_forest or mlp"),
    "--reducer": ("reducer", str, "none, pca or lda"),
    "--n-components": ("n_components", int, "reduced dimension"),
    "--model-seed": ("model_seed", int, "classifier seed"),
    "--budget": ("search_budget", int, "hyperparameter points to score"),
    "--search-seed": ("search_seed", int, "search sampling seed"),
    "--folds": ("cv_folds", int, "cross-validation folds"),
    "--cv-seed": ("cv_seed", int, "fold assignment seed"),
    "--buffer": ("buffer", int, "voting buffer B"),
    "--trial": ("stream_trial", str, "trial id (in the work directory) or trial file to stream"),
    "--participant": ("stream_participant", int, "participant to stream (1 or 2)"),
}
_SWITCHES = {
    "--channels": ("export_channels", "also write per-trial power-channel CSVs"),
    "--csv": ("export_csv", "also write the corpus as CSV"),
    "--from-search": ("use_search", "train with the best point of search.json"),
    "--no-standardize": ("standardize", "skip feature standardization"),
}


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _key_values(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        out[key.strip()] = _value(val)
    return out


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON file with PipelineConfig fields")
    for flag, (_, typ, help_) in _FLAGS.items():
        p.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ, default=None, help=help_)
    for flag, (_, help_) in _SWITCHES.items():
        p.add_argument(flag, dest=flag[2:].replace("-", "_"), action="store_true", default=None, help=help_)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="classifier hyperparameter (repeatable)")
    p.add_argument("--space", metavar="JSON", help="search space, e.g. '{\"rounds\": [50, 100]}'")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haptic-intent", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    helps = {
        "simulate": "generate synthetic trials with ground truth",
        "detect-phase": "detect action phases of every trial",
        "build-dataset": "annotate trials and sample labeled windows",
        "search": "random hyperparameter search with trial-grouped CV",
        "train": "train a classifier on the training corpus",
        "evaluate": "window-level and signal-level evaluation report",
        "stream": "replay one trial sample by sample",
        "run": "simulate, detect-phase, build-dataset, train and evaluate",
    }
    for name in STAGES + ("run",):
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "evaluate":
            sp.add_argument("--format", choices=("text", "kv"), default="text", help="stdout report format")
    return parser


def config_from_args(args) -> PipelineConfig:
    d = PipelineConfig().to_dict()
    if args.config is not None:
        d.update(json.loads(args.config.read_text()))
    for flag, (name, _, _) in _FLAGS.items():
        v = getattr(args, flag[2:].replace("-", "_"))
        if v is not None:
            d[name] = v
    for flag, (name, _) in _SWITCHES.items():
        if getattr(args, flag[2:].replace("-", "_")):
            d[name] = flag != "--no-standardize"
    if args.param:
        d["params"] = {**d.get("params", {}), **_key_values(args.param)}
    if args.space:
        d["search_space"] = json.loads(args.space)
    return PipelineConfig.from_dict(d)


def _print_result(res, args) -> None:
    if res.stage == "evaluate" and res.ok:
        if getattr(args, "format", "text") == "kv":
            kv = res.data["kv"]
            for k in sorted(kv):
                v = kv[k]
                sys.stdout.write(f"{k}={'n/a' if v is None else v}\n")
        else:
            sys.stdout.write(res.message)
        return
    if res.stage == "stream" and res.ok:
        st = res.data["stream"]
        for t, r, f in zip(st.t, st.raw, st.filtered):
            sys.stdout.write(f"{t:.3f} {int(r)} {int(f)}\n")
        return
    stream = sys.stdout if res.ok else sys.stderr
    stream.write(f"{res.stage}: {res.message}\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError, argparse.ArgumentTypeError) as exc:
        sys.stderr.write(f"haptic-intent: {exc}\n")
        return EXIT_ERROR
    try:
        if args.command == "run":
            results = run_pipeline(cfg)
        else:
            results = [run_stage(args.command, cfg)]
    except Exception as exc:  # anything not mapped to a dedicated exit code
        sys.stderr.write(f"haptic-intent {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR
    for res in results:
        _print_result(res, args)
    return results[-1].exit_code if results else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
