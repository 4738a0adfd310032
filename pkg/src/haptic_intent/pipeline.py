"""Stage orchestration: simulate -> detect-phase -> build-dataset -> train/search -> evaluate -> stream.

Every stage reads its inputs completely before writing anything, writes each
output atomically, and records a manifest with input and output hashes, the
configuration and the tool version. Stages are pure functions of their
inputs and the configuration, so reruns reproduce every byte.

Layout of a work directory::

    trials/<id>.csv, trials/<id>.gt.json   simulate
    phases.json, phases.csv                detect-phase
    channels/<id>.p<k>.csv                 detect-phase (optional export)
    corpus/{train,test}.bin, annotations.json, corpus/*.csv (optional)
    search.json                            search
    model.json                             train
    report.txt, report.kv                  evaluate
    streams/<id>.p<k>.csv                  stream
    manifests/<stage>.json
"""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from . import formats
from .dataset import SamplingPlan, WindowSpec, build_corpus, feature_names, fingerprint
from .evaluation import confusion_matrix, format_report, scores, signal_level_report
from .learn.model import FingerprintError, ModelConfig, train_model
from .learn.selection import hyperparameter_search
from .phase import detect_trial_phases
from .signals import power_channels
from .simgen import generate_corpus
from .streaming import replay

log = logging.getLogger(__name__)

WORKDIR_ENV = "HAPTIC_INTENT_WORKDIR"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_INPUT = 2
EXIT_FINGERPRINT = 3
EXIT_VERSION = 4

STAGES = ("simulate", "detect-phase", "build-dataset", "search", "train", "evaluate", "stream")

DEFAULT_SPACES = {
    "svm_ecoc": {"C": [0.1, 1.0, 10.0, 100.0], "gamma": [None, 0.1, 0.5, 2.0]},
    "adaboost": {"rounds": [25, 50, 100, 200]},
    "random_forest": {"n_trees": [25, 50, 100], "min_leaf": [1, 3, 5, 10]},
    "mlp": {"alpha1": [0.5, 1.0, 2.0], "alpha2": [0.5, 1.0], "l2": [0.0, 1e-3, 1e-1]},
}


class MissingInputError(FileNotFoundError):
    """A stage input does not exist (run the upstream stage first)."""


def default_workdir() -> str:
    return os.environ.get(WORKDIR_ENV, "haptic-work")


@dataclass
class PipelineConfig:
    """Everything that determines the artifacts of a run (``workdir`` only locates them)."""

    workdir: str = field(default_factory=default_workdir)
    # simulate
    n_trials: int = 300
    sim_seed: int = 2026
    mix: str | None = None
    trials_per_dyad: int = 10
    # detect-phase
    phase_mode: str = "per_participant"
    export_channels: bool = False
    # build-dataset
    window_length: int = 60
    feature_set: int = 1
    rate_hz: float = 200.0
    n_uniform: int = 4
    n_skewed: int = 2
    sigma_skew: float = 0.15
    sampling_seed: int = 0
    split_seed: int = 0
    split_mode: str = "dyad"
    test_fraction: float = 0.15
    export_csv: bool = False
    # train / search
    variant: str = "adaboost"
    params: dict = field(default_factory=dict)
    reducer: str = "lda"
    n_components: int | None = None
    standardize: bool = True
    model_seed: int = 0
    use_search: bool = False
    search_budget: int = 8
    search_space: dict = field(default_factory=dict)
    search_seed: int = 0
    cv_folds: int = 5
    cv_seed: int = 0
    # evaluate / stream
    buffer: int = 25
    stream_trial: str | None = None
    stream_participant: int = 1

    def __post_init__(self):
        if self.buffer < 1:
            raise ValueError("buffer must be >= 1")
        if self.stream_participant not in (1, 2):
            raise ValueError("stream participant must be 1 or 2")
        ModelConfig(self.variant, dict(self.params), self.reducer, self.n_components, self.standardize,
                    self.model_seed)

    @property
    def window_spec(self) -> WindowSpec:
        return WindowSpec(self.window_length, self.feature_set, self.rate_hz)

    @property
    def sampling_plan(self) -> SamplingPlan:
        return SamplingPlan(self.n_uniform, self.n_skewed, self.sigma_skew, self.sampling_seed)

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(self.variant, dict(self.params), self.reducer, self.n_components, self.standardize,
                           self.model_seed)

    def to_dict(self, include_workdir: bool = True) -> dict:
        d = asdict(self)
        if not include_workdir:
            d.pop("workdir")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    # paths
    def path(self, *parts) -> Path:
        return Path(self.workdir).joinpath(*parts)

    @property
    def trials_dir(self) -> Path:
        return self.path("trials")


@dataclass
class StageResult:
    stage: str
    exit_code: int
    outputs: list = field(default_factory=list)
    message: str = ""
    data: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


# ---------------------------------------------------------------- helpers

def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInputError(f"missing input {path}")
    return path


def _rel(cfg: PipelineConfig, p: Path) -> str:
    return Path(os.path.relpath(p, cfg.workdir)).as_posix()


def _header(cfg: PipelineConfig, stage: str) -> dict:
    return {"stage": stage, "tool_version": __version__, "config": cfg.to_dict(include_workdir=False)}


def _digest(paths) -> str:
    """Order-independent hash over the contents of ``paths``."""
    h = hashlib.sha256()
    for p in sorted(paths, key=lambda q: Path(q).name):
        h.update(Path(p).name.encode())
        h.update(formats.file_sha256(p).encode())
    return h.hexdigest()[:16]


def write_manifest(cfg: PipelineConfig, stage: str, inputs, outputs) -> Path:
    """Hashes of inputs and outputs plus the config; no clocks, no absolute paths."""
    d = {
        "format": "haptic-intent/manifest",
        "version": formats.FORMAT_VERSION,
        **_header(cfg, stage),
        "inputs": {_rel(cfg, Path(p)): formats.file_sha256(p) for p in inputs},
        "outputs": {_rel(cfg, Path(p)): formats.file_sha256(p) for p in outputs},
    }
    return formats.atomic_write_text(cfg.path("manifests", f"{stage}.json"), formats.dumps(d))


def _replace_dir(tmp: Path, final: Path) -> None:
    """Swap a fully written directory into place."""
    old = None
    if final.exists():
        old = final.with_name(f".{final.name}.old")
        if old.exists():
            shutil.rmtree(old)
        os.replace(final, old)
    os.replace(tmp, final)
    if old is not None:
        shutil.rmtree(old)


def _load_trials(cfg: PipelineConfig):
    files = formats.trial_files(_require(cfg.trials_dir))
    return [formats.load_trial(p) for p in files], files


# ---------------------------------------------------------------- stages

def stage_simulate(cfg: PipelineConfig) -> StageResult:
    pairs = generate_corpus(cfg.n_trials, cfg.mix, cfg.sim_seed, cfg.trials_per_dyad)
    header = _header(cfg, "simulate")
    cfg.path().mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".trials.", dir=cfg.path()))
    tmp.chmod(0o755)
    try:
        for trial, gt in pairs:
            trial.extra["pipeline"] = header
            formats.save_trial(trial, tmp / f"{trial.trial_id}.csv")
            formats.save_ground_truth(gt, tmp / f"{trial.trial_id}.gt.json")
        _replace_dir(tmp, cfg.trials_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    outputs = sorted(cfg.trials_dir.iterdir())
    write_manifest(cfg, "simulate", [], outputs)
    n_opp = sum(any(gt.opposing) for _, gt in pairs)
    return StageResult("simulate", EXIT_OK, outputs, f"{len(pairs)} trials, {n_opp} with opposing episodes")


def stage_detect_phase(cfg: PipelineConfig) -> StageResult:
    trials, files = _load_trials(cfg)
    phases = {tr.trial_id: detect_trial_phases(tr, mode=cfg.phase_mode) for tr in trials}
    header = dict(_header(cfg, "detect-phase"), trials_digest=_digest(files))
    outputs = [formats.save_phases(phases, cfg.path("phases.json"), header)]
    outputs.append(formats.atomic_write_text(cfg.path("phases.csv"), formats.phases_csv(phases)))
    if cfg.export_channels:
        for tr in trials:
            for k in (1, 2):
                p = cfg.path("channels", f"{tr.trial_id}.p{k}.csv")
                outputs.append(formats.atomic_write_text(p, formats.power_channels_csv(power_channels(tr, k))))
    write_manifest(cfg, "detect-phase", files, outputs)
    found = sum(p is not None for per in phases.values() for p in per.values())
    return StageResult("detect-phase", EXIT_OK, outputs, f"{found} of {2 * len(trials)} action phases found")


def _check_phases(phases: dict, pheader: dict, files) -> None:
    if pheader.get("trials_digest") != _digest(files):
        raise FingerprintError("phases.json was computed from different trial files; rerun detect-phase")


def stage_build_dataset(cfg: PipelineConfig) -> StageResult:
    trials, files = _load_trials(cfg)
    phases_path = _require(cfg.path("phases.json"))
    phases, pheader = formats.load_phases(phases_path)
    _check_phases(phases, pheader, files)
    spec = cfg.window_spec
    build = build_corpus(trials, spec, cfg.sampling_plan, cfg.split_seed, cfg.split_mode, cfg.test_fraction,
                         phases=phases)
    header = dict(_header(cfg, "build-dataset"), trials_digest=_digest(files))
    for part in (build.train, build.test):
        part.header["pipeline"] = header
    outputs = [
        formats.save_corpus(build.train, cfg.path("corpus", "train.bin")),
        formats.save_corpus(build.test, cfg.path("corpus", "test.bin")),
        formats.save_annotations(build.annotations, build.split, cfg.path("annotations.json"), header),
    ]
    if cfg.export_csv:
        names = feature_names(spec.feature_set, trials[0].layout.n_goals)
        for name, part in (("train", build.train), ("test", build.test)):
            outputs.append(formats.atomic_write_text(cfg.path("corpus", f"{name}.csv"),
                                                     formats.corpus_csv(part, names)))
    write_manifest(cfg, "build-dataset", files + [phases_path], outputs)
    msg = (f"{len(build.train)} train / {len(build.test)} test windows, "
           f"{len(build.heldout)} held-out instances")
    return StageResult("build-dataset", EXIT_OK, outputs, msg)


def stage_search(cfg: PipelineConfig) -> StageResult:
    src = _require(cfg.path("corpus", "train.bin"))
    corpus = formats.load_corpus(src)
    space = cfg.search_space or DEFAULT_SPACES[cfg.variant]
    res = hyperparameter_search(corpus, space, cfg.model_config, cfg.search_budget, cfg.search_seed, cfg.cv_folds,
                                cfg.cv_seed)
    d = {
        "format": "haptic-intent/search",
        "version": formats.FORMAT_VERSION,
        **_header(cfg, "search"),
        "space": space,
        "best": res.best.to_dict(),
        "best_score": res.best_score,
        "evaluations": [{"updates": u, "cv_mean": m, "fold_scores": list(f)} for u, m, f in res.evaluations],
    }
    out = formats.atomic_write_text(cfg.path("search.json"), formats.dumps(d))
    write_manifest(cfg, "search", [src], [out])
    return StageResult("search", EXIT_OK, [out], f"best CV macro-F1 {res.best_score:.4f} with {res.best.params}",
                       {"best_score": res.best_score})


def _model_config(cfg: PipelineConfig) -> tuple[ModelConfig, list]:
    if not cfg.use_search:
        return cfg.model_config, []
    path = _require(cfg.path("search.json"))
    d = formats.read_json(path, "haptic-intent/search")
    return ModelConfig.from_dict(d["best"]), [path]


def stage_train(cfg: PipelineConfig) -> StageResult:
    src = _require(cfg.path("corpus", "train.bin"))
    corpus = formats.load_corpus(src)
    mcfg, extra_inputs = _model_config(cfg)
    model = train_model(corpus.X, corpus.y, mcfg, corpus.fingerprint)
    out = formats.save_model(model, cfg.path("model.json"), _header(cfg, "train"))
    write_manifest(cfg, "train", [src] + extra_inputs, [out])
    return StageResult("train", EXIT_OK, [out], f"{mcfg.variant} trained on {len(corpus)} windows")


def stage_evaluate(cfg: PipelineConfig) -> StageResult:
    model_path = _require(cfg.path("model.json"))
    test_path = _require(cfg.path("corpus", "test.bin"))
    ann_path = _require(cfg.path("annotations.json"))
    test = formats.load_corpus(test_path)
    model = formats.load_model(model_path, fingerprint=test.fingerprint)
    annotations, split, aheader = formats.load_annotations(ann_path)
    trials, files = _load_trials(cfg)
    if aheader.get("trials_digest") != _digest(files):
        raise FingerprintError("annotations.json was built from different trial files; rerun build-dataset")
    spec = WindowSpec(**test.header["spec"])
    n_classes = int(test.header["n_goals"]) + 1
    pred = model.predict(test.X, test.fingerprint)
    cm = confusion_matrix(test.y, pred, n_classes)
    sc = scores(cm)
    signal = signal_level_report(trials, annotations, split, model, spec, cfg.buffer)
    text, kv = format_report(sc, cm, signal, {"buffer": cfg.buffer, "variant": model.variant,
                                              "fingerprint": model.fingerprint})
    kv_text = "".join(f"{k}={_kv_value(kv[k])}\n" for k in sorted(kv))
    outputs = [formats.atomic_write_text(cfg.path("report.txt"), text),
               formats.atomic_write_text(cfg.path("report.kv"), kv_text)]
    write_manifest(cfg, "evaluate", [model_path, test_path, ann_path] + files, outputs)
    return StageResult("evaluate", EXIT_OK, outputs, text, {"kv": kv, "signal": signal, "scores": sc})


def _kv_value(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _stream_trial_path(cfg: PipelineConfig) -> Path:
    if cfg.stream_trial is None:
        raise MissingInputError("no trial selected for streaming (set stream_trial)")
    p = Path(cfg.stream_trial)
    if p.suffix != ".csv":
        p = cfg.trials_dir / f"{cfg.stream_trial}.csv"
    return _require(p)


def stage_stream(cfg: PipelineConfig) -> StageResult:
    model_path = _require(cfg.path("model.json"))
    trial_path = _stream_trial_path(cfg)
    trial = formats.load_trial(trial_path)
    spec = cfg.window_spec
    expected = fingerprint(spec, trial.layout.n_goals)
    model = formats.load_model(model_path, fingerprint=expected)
    stream = replay(model, trial, cfg.stream_participant, spec, cfg.buffer)
    out = formats.atomic_write_text(cfg.path("streams", f"{trial.trial_id}.p{cfg.stream_participant}.csv"),
                                    formats.stream_csv(stream))
    write_manifest(cfg, "stream", [model_path, trial_path], [out])
    return StageResult("stream", EXIT_OK, [out], f"{len(stream)} steps", {"stream": stream})


_RUNNERS = {
    "simulate": stage_simulate,
    "detect-phase": stage_detect_phase,
    "build-dataset": stage_build_dataset,
    "search": stage_search,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "stream": stage_stream,
}


def run_stage(name: str, cfg: PipelineConfig) -> StageResult:
    """Run one stage and map failures to exit codes (see module constants)."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown stage {name!r}; expected one of {STAGES}")
    try:
        res = _RUNNERS[name](cfg)
    except (MissingInputError, FileNotFoundError) as exc:
        return StageResult(name, EXIT_MISSING_INPUT, message=str(exc))
    except FingerprintError as exc:
        return StageResult(name, EXIT_FINGERPRINT, message=str(exc))
    except formats.FormatError as exc:
        return StageResult(name, EXIT_VERSION, message=str(exc))
    log.info("%s: %s", name, res.message.splitlines()[0] if res.message else "done")
    return res


def run_pipeline(cfg: PipelineConfig, stages=("simulate", "detect-phase", "build-dataset", "train", "evaluate")):
    """Run stages in order, stopping at the first failure."""
    results = []
    for name in stages:
        res = run_stage(name, cfg)
        results.append(res)
        if not res.ok:
            break
    return results


def outputs_digest(cfg: PipelineConfig) -> dict:
    """Hash of every file under the work directory, for reproducibility checks."""
    root = Path(cfg.workdir)
    return {p.relative_to(root).as_posix(): formats.file_sha256(p)
            for p in sorted(root.rglob("*")) if p.is_file()}

