"""On-disk formats for trials, ground truth, phases, corpora and models.

Every artifact carries a format name and version; corpora and models also
carry the feature fingerprint. Writes go to a temporary file in the target
directory followed by a rename, so a reader never sees a partial file.

Trial files are CSV with one ``#``-prefixed JSON metadata line; numbers use
``%.17g`` so a round trip is exact. Corpora are a small binary container
(magic, JSON header, raw little-endian arrays) with an optional CSV export.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataset import Annotation, Corpus
from .learn.model import FingerprintError, TrainedModel
from .phase import ActionPhase
from .signals import GoalLayout, TrialRecording
from .simgen import GroundTruth

FORMAT_VERSION = 1

TRIAL_FORMAT = "haptic-intent/trial"
TRUTH_FORMAT = "haptic-intent/ground-truth"
PHASES_FORMAT = "haptic-intent/phases"
ANNOTATIONS_FORMAT = "haptic-intent/annotations"
MODEL_FORMAT = "haptic-intent/model"
CORPUS_MAGIC = b"HICORPUS"

_TRIAL_COLUMNS = ["t"] + [f"{q}{k}.{c}" for q in ("F", "v", "p") for k in (1, 2) for c in ("x", "y")]
_CORPUS_ARRAYS = (("X", "<f8"), ("y", "<i8"), ("participant", "<i8"), ("t_end", "<f8"), ("stage", "<i8"))


class FormatError(ValueError):
    """File is truncated, corrupted or not the expected kind of artifact."""


class VersionError(FormatError):
    """Artifact was written with an unsupported format version."""


# ---------------------------------------------------------------- plumbing

def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _check_kind(d: dict, kind: str, path) -> None:
    if not isinstance(d, dict) or d.get("format") != kind:
        raise FormatError(f"{path}: not a {kind} file")
    version = d.get("version")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version!r}, this tool reads version {FORMAT_VERSION}")


def read_json(path, kind: str) -> dict:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable {kind} file ({exc})") from None
    _check_kind(d, kind, path)
    return d


def _fmt(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------- trials

def trial_metadata(trial: TrialRecording) -> dict:
    return {
        "format": TRIAL_FORMAT,
        "version": FORMAT_VERSION,
        "trial_id": trial.trial_id,
        "rate_hz": trial.rate_hz,
        "n_samples": trial.n_samples,
        "t_beep": trial.t_beep,
        "t_end": trial.t_end,
        "layout": trial.layout.to_dict(),
        "dyad": trial.dyad,
        "goal_index": list(trial.goal_index),
        "goal_type": list(trial.goal_type),
        "extra": trial.extra,
        "columns": _TRIAL_COLUMNS,
    }


def trial_to_csv(trial: TrialRecording) -> str:
    meta = json.dumps(trial_metadata(trial), sort_keys=True, default=_json_default)
    cols = [trial.t[:, None]]
    for q in (trial.force, trial.velocity, trial.grasp):
        cols.extend([q[0], q[1]])
    data = np.hstack(cols)
    buf = io.StringIO()
    buf.write(f"# {meta}\n")
    buf.write(",".join(_TRIAL_COLUMNS) + "\n")
    for row in data:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def save_trial(trial: TrialRecording, path) -> Path:
    return atomic_write_text(path, trial_to_csv(trial))


def load_trial(path) -> TrialRecording:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    first, _, body = text.partition("\n")
    if not first.startswith("# "):
        raise FormatError(f"{path}: missing metadata line")
    try:
        meta = json.loads(first[2:])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: corrupted metadata ({exc})") from None
    _check_kind(meta, TRIAL_FORMAT, path)
    rows = list(csv.reader(io.StringIO(body)))
    if not rows or rows[0] != _TRIAL_COLUMNS:
        raise FormatError(f"{path}: unexpected column header")
    rows = rows[1:]
    n = int(meta["n_samples"])
    if len(rows) != n or any(len(r) != len(_TRIAL_COLUMNS) for r in rows):
        raise FormatError(f"{path}: expected {n} complete rows, found {len(rows)} (truncated?)")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value ({exc})") from None
    blocks = [np.stack([data[:, 1 + 4 * q + 2 * k: 3 + 4 * q + 2 * k] for k in (0, 1)]) for q in range(3)]
    return TrialRecording(
        trial_id=meta["trial_id"],
        rate_hz=float(meta["rate_hz"]),
        t=data[:, 0],
        force=blocks[0],
        velocity=blocks[1],
        grasp=blocks[2],
        t_beep=float(meta["t_beep"]),
        t_end=float(meta["t_end"]),
        layout=GoalLayout.from_dict(meta["layout"]),
        dyad=meta.get("dyad", ""),
        goal_index=tuple(meta["goal_index"]),
        goal_type=tuple(meta["goal_type"]),
        extra=dict(meta.get("extra", {})),
    )


def save_ground_truth(gt: GroundTruth, path) -> Path:
    d = {"format": TRUTH_FORMAT, "version": FORMAT_VERSION, "truth": gt.to_dict()}
    return atomic_write_text(path, dumps(d))


def load_ground_truth(path) -> GroundTruth:
    return GroundTruth.from_dict(read_json(path, TRUTH_FORMAT)["truth"])


def truth_path(trial_path) -> Path:
    """Sidecar ground-truth file next to a trial file."""
    p = Path(trial_path)
    return p.with_name(p.name[: -len(".csv")] + ".gt.json" if p.name.endswith(".csv") else p.name + ".gt.json")


def trial_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"trial directory {d} does not exist")
    files = sorted(p for p in d.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no trial files in {d}")
    return files


def load_trials(directory) -> list[TrialRecording]:
    return [load_trial(p) for p in trial_files(directory)]


# ---------------------------------------------------------------- phases / annotations

def phases_to_dict(phases: dict) -> dict:
    """``{trial_id: {k: ActionPhase | None}}`` -> JSON-ready mapping."""
    out = {}
    for tid, per in phases.items():
        out[tid] = {str(k): (None if p is None else asdict(p)) for k, p in per.items()}
    return out


def phases_from_dict(d: dict) -> dict:
    return {tid: {int(k): (None if p is None else ActionPhase(**p)) for k, p in per.items()} for tid, per in d.items()}


def save_phases(phases: dict, path, header: dict | None = None) -> Path:
    d = {"format": PHASES_FORMAT, "version": FORMAT_VERSION, "header": header or {}, "phases": phases_to_dict(phases)}
    return atomic_write_text(path, dumps(d))


def load_phases(path) -> tuple[dict, dict]:
    d = read_json(path, PHASES_FORMAT)
    return phases_from_dict(d["phases"]), d.get("header", {})


def phases_csv(phases: dict) -> str:
    buf = io.StringIO()
    buf.write("trial_id,participant,t0,tf,strength,truncated\n")
    for tid in sorted(phases):
        for k in sorted(phases[tid]):
            p = phases[tid][k]
            if p is None:
                buf.write(f"{tid},{k},,,,\n")
            else:
                buf.write(f"{tid},{k},{_fmt(p.t0)},{_fmt(p.tf)},{_fmt(p.strength)},{int(p.truncated)}\n")
    return buf.getvalue()


def save_annotations(annotations: list, split: dict, path, header: dict | None = None) -> Path:
    d = {"format": ANNOTATIONS_FORMAT, "version": FORMAT_VERSION, "header": header or {},
         "annotations": [a.to_dict() for a in annotations], "split": split}
    return atomic_write_text(path, dumps(d))


def load_annotations(path) -> tuple[list, dict, dict]:
    d = read_json(path, ANNOTATIONS_FORMAT)
    return [Annotation.from_dict(a) for a in d["annotations"]], dict(d["split"]), d.get("header", {})


# ---------------------------------------------------------------- corpus

def corpus_to_bytes(corpus: Corpus) -> bytes:
    ids = [str(x) for x in corpus.trial_ids.tolist()]
    header = {"version": FORMAT_VERSION, "header": corpus.header, "n": len(corpus), "n_features": corpus.n_features,
              "trial_ids": ids}
    hjson = json.dumps(header, sort_keys=True, default=_json_default).encode("utf-8")
    parts = [CORPUS_MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(hjson)), hjson]
    for name, dtype in _CORPUS_ARRAYS:
        parts.append(np.ascontiguousarray(getattr(corpus, name), dtype=dtype).tobytes())
    payload = b"".join(parts)
    return payload + hashlib.sha256(payload).digest()


def corpus_from_bytes(data: bytes, source="corpus") -> Corpus:
    m = len(CORPUS_MAGIC)
    if len(data) < m + 12 + 32 or data[:m] != CORPUS_MAGIC:
        raise FormatError(f"{source}: not a corpus file")
    (version,) = struct.unpack("<I", data[m: m + 4])
    if version != FORMAT_VERSION:
        raise VersionError(f"{source}: format version {version}, this tool reads version {FORMAT_VERSION}")
    payload, digest = data[:-32], data[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise FormatError(f"{source}: checksum mismatch (truncated or corrupted)")
    (hlen,) = struct.unpack("<Q", data[m + 4: m + 12])
    pos = m + 12
    try:
        meta = json.loads(payload[pos: pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VersionError(f"{source}: unreadable header ({exc})") from None
    if meta.get("version") != FORMAT_VERSION:
        raise VersionError(f"{source}: header version {meta.get('version')!r}")
    pos += hlen
    n, f = int(meta["n"]), int(meta["n_features"])
    arrays = {}
    for name, dtype in _CORPUS_ARRAYS:
        shape = (n, f) if name == "X" else (n,)
        size = int(np.prod(shape)) * 8
        if pos + size > len(payload):
            raise FormatError(f"{source}: truncated array {name}")
        arrays[name] = np.frombuffer(payload[pos: pos + size], dtype=dtype).reshape(shape).astype(dtype[1:])
        pos += size
    if pos != len(payload):
        raise FormatError(f"{source}: {len(payload) - pos} trailing bytes")
    return Corpus(arrays["X"].astype(float), arrays["y"].astype(int), np.array(meta["trial_ids"], dtype=str),
                  arrays["participant"].astype(int), arrays["t_end"].astype(float), arrays["stage"].astype(int),
                  meta["header"])


def save_corpus(corpus: Corpus, path) -> Path:
    return atomic_write_bytes(path, corpus_to_bytes(corpus))


def load_corpus(path) -> Corpus:
    path = Path(path)
    return corpus_from_bytes(path.read_bytes(), path)


def corpus_csv(corpus: Corpus, feature_names: list[str]) -> str:
    """Plain-text export: one row per window with its provenance."""
    if len(feature_names) != corpus.n_features:
        raise ValueError("feature name count does not match the corpus")
    buf = io.StringIO()
    buf.write(",".join(["trial_id", "participant", "t_end", "stage", "label"] + feature_names) + "\n")
    for i in range(len(corpus)):
        head = [str(corpus.trial_ids[i]), str(int(corpus.participant[i])), _fmt(corpus.t_end[i]),
                str(int(corpus.stage[i])), str(int(corpus.y[i]))]
        buf.write(",".join(head + [_fmt(x) for x in corpus.X[i]]) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------- models

def model_to_json(model: TrainedModel, header: dict | None = None) -> str:
    d = {"format": MODEL_FORMAT, "version": FORMAT_VERSION, "variant": model.variant,
         "fingerprint": model.fingerprint, "header": header or {}, "model": model.to_dict()}
    return dumps(d)


def save_model(model: TrainedModel, path, header: dict | None = None) -> Path:
    return atomic_write_text(path, model_to_json(model, header))


def load_model(path, variant: str | None = None, fingerprint: str | None = None) -> TrainedModel:
    """Read a model; ``variant`` and ``fingerprint`` are checked when given."""
    d = read_json(path, MODEL_FORMAT)
    if variant is not None and d.get("variant") != variant:
        raise FormatError(f"{path}: model is a {d.get('variant')}, not a {variant}")
    if fingerprint is not None and d.get("fingerprint") != fingerprint:
        raise FingerprintError(f"{path}: model fingerprint {d.get('fingerprint')} does not match {fingerprint}")
    try:
        return TrainedModel.from_dict(d["model"], variant)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model ({exc})") from None


# ---------------------------------------------------------------- streams / channels

def stream_csv(stream) -> str:
    buf = io.StringIO()
    buf.write("t,raw,filtered\n")
    filtered = stream.filtered if stream.filtered is not None else stream.raw
    for t, r, f in zip(stream.t, stream.raw, filtered):
        buf.write(f"{_fmt(t)},{int(r)},{int(f)}\n")
    return buf.getvalue()


def power_channels_csv(channels) -> str:
    names, rows = channels.as_rows()
    buf = io.StringIO()
    buf.write(",".join(["t"] + names) + "\n")
    for j, t in enumerate(channels.t):
        buf.write(",".join([_fmt(t)] + [_fmt(x) for x in rows[:, j]]) + "\n")
    return buf.getvalue()
