"""Windowed training data from annotated trials.

Labels are ``0`` for idle and ``i`` for goal ``i``. A window ending at sample
``e`` covers samples ``e-L+1 .. e`` and is summarised per channel by
(min, max, mean, population std), channels in canonical order.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .phase import ActionPhase, EmptyIdleError, detect_trial_phases, idle_phase
from .signals import (
    TrialRecording,
    channel_names,
    derive_channel_matrix,
    moving_average,
    projected_power,
    raw_power,
)

log = logging.getLogger(__name__)

STATS = ("min", "max", "mean", "std")
MAX_WINDOW_SECONDS = 0.4


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    length: int = 60
    feature_set: int = 1
    rate_hz: float = 200.0

    def __post_init__(self):
        if self.feature_set not in (1, 2, 3):
            raise ValueError("feature_set must be 1, 2 or 3")
        if self.length < 2:
            raise ValueError("window length must be at least 2 samples")
        if self.length / self.rate_hz > MAX_WINDOW_SECONDS + 1e-12:
            raise ValueError(
                f"window of {self.length} samples exceeds {MAX_WINDOW_SECONDS} s at {self.rate_hz} Hz"
            )

    @property
    def seconds(self) -> float:
        return self.length / self.rate_hz


@dataclass(frozen=True)
class SamplingPlan:
    n_uniform: int = 4
    n_skewed: int = 2
    sigma_skew: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.n_uniform < 0 or self.n_skewed < 0:
            raise ValueError("sample counts must be non-negative")
        if self.sigma_skew <= 0:
            raise ValueError("sigma_skew must be positive")


@dataclass
class LabeledWindow:
    features: np.ndarray
    label: int
    trial_id: str
    participant: int
    t_end: float
    stage: int  # 1 uniform, 2 skewed toward the transition


@dataclass
class Annotation:
    """Outcome of phase detection and labelling for one participant of a trial."""

    trial_id: str
    participant: int
    status: str  # ok | opposing | weak | no_phase | no_idle | unlabeled | unusable
    phase: ActionPhase | None = None
    label: int | None = None
    assigned: int | None = None
    reannotated: bool = False
    heading_goal: int | None = None
    t_beep: float = 0.0

    @property
    def idle(self) -> tuple[float, float] | None:
        return None if self.phase is None else (self.t_beep, self.phase.t0)

    @property
    def conceded(self) -> bool:
        """Opposed, then ended up heading to a goal other than the assigned one."""
        return (self.status == "opposing" and self.assigned is not None and self.heading_goal is not None
                and self.heading_goal != self.assigned)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase"] = asdict(self.phase) if self.phase is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        d = dict(d)
        if d.get("phase") is not None:
            d["phase"] = ActionPhase(**d["phase"])
        return cls(**d)


def feature_names(feature_set: int, n_goals: int) -> list[str]:
    return [f"{s}({c})" for c in channel_names(feature_set, n_goals) for s in STATS]


def fingerprint(spec: WindowSpec, n_goals: int) -> str:
    """Short hash identifying the feature layout a model was trained on."""
    payload = {
        "channels": channel_names(spec.feature_set, n_goals),
        "stats": list(STATS),
        "feature_set": spec.feature_set,
        "length": spec.length,
        "rate_hz": spec.rate_hz,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def stable_int(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def window_stats_batch(values: np.ndarray, end_indices, length: int) -> np.ndarray:
    """Statistics of many windows of a (channels, T) matrix -> (n, 4 * channels)."""
    values = np.asarray(values, dtype=float)
    ends = np.asarray(end_indices, dtype=int).reshape(-1)
    C, T = values.shape
    if ends.size and (ends.min() < length - 1 or ends.max() >= T):
        raise IndexError(f"window of length {length} ending at {ends.min()}..{ends.max()} outside 0..{T - 1}")
    offsets = np.arange(-length + 1, 1)
    win = np.ascontiguousarray(values[:, ends[:, None] + offsets[None, :]])  # (C, n, L)
    out = np.empty((ends.size, C, 4))
    out[:, :, 0] = win.min(axis=2).T
    out[:, :, 1] = win.max(axis=2).T
    out[:, :, 2] = win.mean(axis=2).T
    out[:, :, 3] = win.std(axis=2).T
    return out.reshape(ends.size, 4 * C)


def window_stats(values, end_index: int, length: int) -> np.ndarray:
    values = getattr(values, "values", values)
    return window_stats_batch(values, [end_index], length)[0]


def _end_index(t: np.ndarray, rate_hz: float, te: float) -> int:
    return int(np.floor((te - t[0]) * rate_hz + 1e-6))


def _uniform_ends(rng, lo, hi, n):
    return rng.uniform(lo, hi, size=n) if n else np.empty(0)


def _half_normal_ends(rng, anchor, sigma, sign, lo, hi, n, max_tries=50):
    """Ends at ``anchor + sign*|N(0, sigma)|`` restricted to [lo, hi] by redrawing."""
    out = []
    for _ in range(n):
        for _ in range(max_tries):
            te = anchor + sign * abs(rng.normal(0.0, sigma))
            if lo <= te <= hi:
                out.append(te)
                break
    return np.array(out)


def neighborhood_sample(
    trial: TrialRecording,
    k: int,
    phase: ActionPhase,
    idle: tuple[float, float] | None,
    label: int,
    spec: WindowSpec,
    plan: SamplingPlan,
    rng: np.random.Generator | None = None,
    matrix=None,
) -> list[LabeledWindow]:
    """Two-stage window sampling around the idle-to-action transition.

    Stage 1 draws window ends uniformly over each region (the window fits in
    the region). Stage 2 draws ends from a half-normal anchored at ``t0``:
    into the idle region for idle windows, into the action phase for action
    windows (those may reach back across ``t0``).
    """
    if rng is None:
        rng = np.random.default_rng([plan.seed, stable_int(trial.trial_id), k])
    if matrix is None:
        matrix = derive_channel_matrix(trial, k, spec.feature_set)
    t, rate, L = trial.t, trial.rate_hz, spec.length
    w = L / rate
    t_first = t[0] + (L - 1) / rate
    t0, tf = phase.t0, phase.tf

    ends, labels, stages = [], [], []

    def add(te, lab, stage):
        ends.extend(te.tolist())
        labels.extend([lab] * len(te))
        stages.extend([stage] * len(te))

    if tf - t0 >= w:
        add(_uniform_ends(rng, t0 + w, tf, plan.n_uniform), label, 1)
        add(_half_normal_ends(rng, t0, plan.sigma_skew, +1, max(t0, t_first), tf, plan.n_skewed), label, 2)
    else:
        log.info(f"{trial.trial_id}/{k}: action phase shorter than the window, no action samples")

    if idle is not None:
        a, b = idle
        if b - a >= w:
            add(_uniform_ends(rng, a + w, b, plan.n_uniform), 0, 1)
            add(_half_normal_ends(rng, b, plan.sigma_skew, -1, a + w, b, plan.n_skewed), 0, 2)
        else:
            log.info(f"{trial.trial_id}/{k}: idle region shorter than the window, no idle samples")

    if not ends:
        return []
    idx = np.array([_end_index(t, rate, te) for te in ends])
    idx = np.clip(idx, L - 1, trial.n_samples - 1)
    feats = window_stats_batch(matrix.values, idx, L)
    return [
        LabeledWindow(feats[j], int(labels[j]), trial.trial_id, k, float(t[idx[j]]), int(stages[j]))
        for j in range(len(ends))
    ]


def heading_goal(trial: TrialRecording, tail_seconds: float = 0.5, min_speed: float = 0.05) -> int | None:
    """Goal best aligned with the dyad's mean heading over the last ``tail_seconds``."""
    n = max(1, int(round(tail_seconds * trial.rate_hz)))
    v = trial.velocity[:, -n:, :].mean(axis=(0, 1))
    speed = np.linalg.norm(v)
    if speed < min_speed:
        return None
    pos = trial.grasp[:, -1, :].mean(axis=0)
    d = trial.layout.goals - pos
    cos = (d @ v) / (np.linalg.norm(d, axis=1) * speed)
    return int(np.argmax(cos)) + 1


def opposing_behavior(trial: TrialRecording, k: int, phase: ActionPhase, window_seconds: float = 0.1,
                      fraction: float = 0.1) -> bool:
    """Sustained negative power after the phase onset (participant is being dragged).

    The smoothed raw power must fall below ``-fraction`` times the strength
    of the participant's action phase.
    """
    i = trial.participant(k)
    width = int(round(window_seconds * trial.rate_hz)) | 1
    p = moving_average(raw_power(trial.force[i], trial.velocity[i]), width)
    sel = trial.t >= phase.t0
    if not sel.any() or phase.strength <= 0:
        return False
    return bool(p[sel].min() < -fraction * phase.strength)


def annotate_trial(
    trial: TrialRecording,
    phases: dict | None = None,
    weak_threshold: float = 0.0,
    phase_mode: str = "per_participant",
) -> list[Annotation]:
    """Label each participant's action phase with its (re-annotated) goal."""
    if phases is None:
        phases = detect_trial_phases(trial, mode=phase_mode)
    heading = heading_goal(trial)
    usable = trial.extra.get("usable", True)
    out = []
    for k in (1, 2):
        assigned = trial.goal_index[k - 1]
        ph = phases.get(k)
        a = Annotation(trial.trial_id, k, "ok", ph, None, assigned, False, heading, trial.t_beep)
        out.append(a)
        if not usable:
            a.status = "unusable"
            continue
        if ph is None:
            a.status = "no_phase"
            continue
        try:
            idle_phase(trial, ph)
        except EmptyIdleError:
            a.status = "no_idle"
            continue
        if assigned is None:
            a.label = heading
        else:
            a.label = assigned
            if heading is not None and heading != assigned:
                ch = trial.participant(k)
                sel = (trial.t >= ph.t0) & (trial.t <= ph.tf)
                p_head = projected_power(trial.force[ch][sel], trial.velocity[ch][sel], trial.grasp[ch][sel],
                                         trial.layout.goals[heading - 1]).mean()
                p_own = projected_power(trial.force[ch][sel], trial.velocity[ch][sel], trial.grasp[ch][sel],
                                        trial.layout.goals[assigned - 1]).mean()
                if p_head > p_own:
                    a.label = heading
                    a.reannotated = True
        if a.label is None:
            a.status = "unlabeled"
        elif opposing_behavior(trial, k, ph):
            a.status = "opposing"
        elif ph.strength < weak_threshold:
            a.status = "weak"
    return out


@dataclass
class Corpus:
    X: np.ndarray
    y: np.ndarray
    trial_ids: np.ndarray
    participant: np.ndarray
    t_end: np.ndarray
    stage: np.ndarray
    header: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    @property
    def fingerprint(self) -> str:
        return self.header.get("fingerprint", "")

    def subset(self, mask) -> "Corpus":
        mask = np.asarray(mask)
        return Corpus(self.X[mask], self.y[mask], self.trial_ids[mask], self.participant[mask],
                      self.t_end[mask], self.stage[mask], dict(self.header))

    @classmethod
    def from_windows(cls, windows: list[LabeledWindow], n_features: int, header: dict) -> "Corpus":
        if windows:
            X = np.vstack([w.features for w in windows])
        else:
            X = np.empty((0, n_features))
        return cls(
            X=X,
            y=np.array([w.label for w in windows], dtype=int),
            trial_ids=np.array([w.trial_id for w in windows], dtype=str),
            participant=np.array([w.participant for w in windows], dtype=int),
            t_end=np.array([w.t_end for w in windows], dtype=float),
            stage=np.array([w.stage for w in windows], dtype=int),
            header=header,
        )


@dataclass
class CorpusBuild:
    train: Corpus
    test: Corpus
    annotations: list  # every Annotation, all statuses
    split: dict  # trial id -> "train" | "test"

    @property
    def heldout(self) -> list:
        """Instances excluded from training but kept for signal-level evaluation."""
        return [a for a in self.annotations if a.status in ("opposing", "weak")]


def split_trials(trials, mode: str = "dyad", test_fraction: float = 0.15, seed: int = 0) -> dict:
    """Assign whole trials to train/test; ``mode="dyad"`` keeps each dyad on one side."""
    ids = [tr.trial_id for tr in trials]
    if len(set(ids)) != len(ids):
        raise CorpusError("trial ids must be unique")
    n_test = int(np.floor(test_fraction * len(ids) + 0.5))
    rng = np.random.default_rng(seed)
    if mode == "interaction":
        order = rng.permutation(len(ids))
        test = {ids[i] for i in order[:n_test]}
    elif mode == "dyad":
        groups: dict[str, list[str]] = {}
        for tr in trials:
            groups.setdefault(tr.dyad or tr.trial_id, []).append(tr.trial_id)
        names = sorted(groups)
        test = set()
        for j in rng.permutation(len(names)):
            if len(test) >= n_test:
                break
            test.update(groups[names[j]])
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return {i: ("test" if i in test else "train") for i in ids}


def corpus_header(spec: WindowSpec, plan: SamplingPlan, n_goals: int, split_seed: int, extra=None) -> dict:
    h = {
        "spec": asdict(spec),
        "plan": asdict(plan),
        "channels": channel_names(spec.feature_set, n_goals),
        "stats": list(STATS),
        "labels": ["idle"] + [f"g{i + 1}" for i in range(n_goals)],
        "n_goals": n_goals,
        "split_seed": split_seed,
        "fingerprint": fingerprint(spec, n_goals),
    }
    if extra:
        h.update(extra)
    return h


def build_corpus(
    trials: list[TrialRecording],
    spec: WindowSpec = WindowSpec(),
    plan: SamplingPlan = SamplingPlan(),
    split_seed: int = 0,
    split_mode: str = "dyad",
    test_fraction: float = 0.15,
    phases: dict | None = None,
    phase_mode: str = "per_participant",
    weak_fraction: float = 0.2,
) -> CorpusBuild:
    """Annotate, split and window a list of trials.

    ``phases`` optionally maps trial id -> {k: ActionPhase | None} to reuse an
    earlier detection run.
    """
    if not trials:
        raise CorpusError("no trials")
    n_goals = trials[0].layout.n_goals
    if any(tr.layout.n_goals != n_goals for tr in trials):
        raise CorpusError("all trials must share the number of goals")
    if phases is None:
        phases = {tr.trial_id: detect_trial_phases(tr, mode=phase_mode) for tr in trials}
    strengths = [p.strength for tr in trials for p in phases[tr.trial_id].values() if p is not None]
    weak_threshold = weak_fraction * float(np.median(strengths)) if strengths else 0.0

    annotations = []
    for tr in trials:
        annotations.extend(annotate_trial(tr, phases[tr.trial_id], weak_threshold))

    trials_per_label: dict[int, set] = {}
    for a in annotations:
        if a.status == "ok":
            trials_per_label.setdefault(a.label, set()).add(a.trial_id)
            trials_per_label.setdefault(0, set()).add(a.trial_id)
    for label in range(n_goals + 1):
        if len(trials_per_label.get(label, ())) < 2:
            raise CorpusError(f"class {label} is present in fewer than 2 trials")

    split = split_trials(trials, split_mode, test_fraction, split_seed)
    by_id = {tr.trial_id: tr for tr in trials}
    sides: dict[str, list] = {"train": [], "test": []}
    for a in annotations:
        if a.status != "ok":
            continue
        tr = by_id[a.trial_id]
        rng = np.random.default_rng([plan.seed, stable_int(tr.trial_id), a.participant])
        windows = neighborhood_sample(tr, a.participant, a.phase, (tr.t_beep, a.phase.t0), a.label, spec, plan, rng)
        sides[split[tr.trial_id]].extend(windows)

    n_features = 4 * len(channel_names(spec.feature_set, n_goals))
    header = corpus_header(spec, plan, n_goals, split_seed, {"split_mode": split_mode})
    train = Corpus.from_windows(sides["train"], n_features, dict(header, part="train"))
    test = Corpus.from_windows(sides["test"], n_features, dict(header, part="test"))
    log.info("corpus: %d train / %d test windows, %d held-out instances",
             len(train), len(test), sum(a.status in ("opposing", "weak") for a in annotations))
    return CorpusBuild(train, test, annotations, split)
