"""Window-level scores and signal-level (per-trial stream) metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Annotation, WindowSpec, window_stats_batch
from .signals import TrialRecording, derive_channel_matrix

SUSTAIN_SECONDS = 0.1
FINAL_SECONDS = 0.5


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows true, columns predicted

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if y_true.shape != y_pred.shape:
            raise ValueError("label arrays differ in length")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    def normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    return ConfusionMatrix.from_labels(y_true, y_pred, n_classes)


@dataclass
class Scores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_f1: float  # over goal classes 1..N, idle excluded
    undefined: np.ndarray  # classes whose precision or recall had a zero denominator

    def as_dict(self) -> dict:
        return {"precision": self.precision.tolist(), "recall": self.recall.tolist(), "f1": self.f1.tolist(),
                "support": self.support.tolist(), "macro_f1": self.macro_f1,
                "undefined": self.undefined.tolist()}


def scores(cm: ConfusionMatrix) -> Scores:
    C = np.asarray(cm.counts, dtype=float)
    if C.sum() == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(C)
    pred = C.sum(axis=0)
    true = C.sum(axis=1)
    undefined = (pred == 0) | (true == 0)
    precision = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    recall = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return Scores(precision, recall, f1, true.astype(int), float(f1[1:].mean()), undefined)


def macro_f1(y_true, y_pred, n_classes: int) -> float:
    return scores(confusion_matrix(y_true, y_pred, n_classes)).macro_f1


def voting_filter(stream, buffer: int) -> np.ndarray:
    """Modal class of the last ``min(t + 1, buffer)`` raw predictions at each step.

    Ties go to the tied class that occurred most recently.
    """
    if buffer < 1:
        raise ValueError("buffer must be >= 1")
    raw = np.asarray(stream, dtype=int)
    n = raw.size
    if n == 0 or buffer == 1:
        return raw.copy()
    K = int(raw.max()) + 1
    onehot = np.zeros((n + 1, K), dtype=np.int64)
    onehot[np.arange(1, n + 1), raw] = 1
    cum = np.cumsum(onehot, axis=0)
    lo = np.maximum(np.arange(1, n + 1) - buffer, 0)
    counts = cum[1:] - cum[lo]
    seen = np.where(onehot[1:] == 1, np.arange(n)[:, None], -1)
    last = np.maximum.accumulate(seen, axis=0)
    tied = counts == counts.max(axis=1, keepdims=True)
    return np.argmax(np.where(tied, last, -2), axis=1)


def label_transitions(stream) -> int:
    s = np.asarray(stream)
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass
class PredictionStream:
    t: np.ndarray
    raw: np.ndarray
    filtered: np.ndarray | None = None
    trial_id: str = ""
    participant: int = 0

    def __len__(self) -> int:
        return int(self.raw.size)

    def with_filter(self, buffer: int) -> "PredictionStream":
        return PredictionStream(self.t, self.raw, voting_filter(self.raw, buffer), self.trial_id, self.participant)


def stream_start_index(trial: TrialRecording, length: int) -> int:
    """First sample with a complete window that does not end before the beep."""
    beep = int(np.searchsorted(trial.t, trial.t_beep - 1e-9))
    return max(length - 1, beep)


def predict_stream(model, trial: TrialRecording, k: int, spec: WindowSpec, buffer: int | None = None,
                   matrix=None) -> PredictionStream:
    """Raw per-step predictions from the beep to the end of the trial."""
    if matrix is None:
        matrix = derive_channel_matrix(trial, k, spec.feature_set)
    ends = np.arange(stream_start_index(trial, spec.length), trial.n_samples)
    feats = window_stats_batch(matrix.values, ends, spec.length)
    raw = np.asarray(model.predict(feats), dtype=int)
    s = PredictionStream(trial.t[ends], raw, None, trial.trial_id, k)
    return s.with_filter(buffer) if buffer else s


def transition_delay(filtered, t, t0: float, goal: int, sustain: float = SUSTAIN_SECONDS) -> float:
    """Seconds from ``t0`` until the stream shows ``goal`` and holds it for ``sustain``.

    Returns ``inf`` when that never happens.
    """
    s = np.asarray(filtered)
    t = np.asarray(t, dtype=float)
    n = s.size
    if n == 0:
        return float("inf")
    dt = float(t[1] - t[0]) if n > 1 else 1.0
    ok = s == goal
    bad = np.flatnonzero(~ok)
    pos = np.searchsorted(bad, np.arange(n))
    next_bad = np.append(bad, n)[pos]  # first non-goal sample at or after each position
    held = (next_bad - np.arange(n)) * dt  # duration of the run of goal samples starting here
    cand = np.flatnonzero(ok & (t >= t0 - 1e-9) & (held >= sustain - 1e-9))
    if cand.size == 0:
        return float("inf")
    return float(max(t[cand[0]] - t0, 0.0))


def reaches_goal(filtered, t, t0: float, tf: float, goal: int) -> bool:
    s = np.asarray(filtered)
    t = np.asarray(t)
    m = (t >= t0 - 1e-9) & (t <= tf + 1e-9)
    return bool(np.any(s[m] == goal))


def final_prediction(filtered, t, seconds: float = FINAL_SECONDS) -> int:
    """Modal filtered label over the last ``seconds`` (ties to the most recent)."""
    s = np.asarray(filtered, dtype=int)
    t = np.asarray(t)
    tail = s[t >= t[-1] - seconds + 1e-9]
    return int(voting_filter(tail, tail.size)[-1])


@dataclass
class SignalLevelReport:
    transition_rate: float | None
    n_transition: int
    n_transition_success: int
    n_excluded: int
    negotiated_rate: float | None
    n_negotiated: int
    n_negotiated_success: int
    mean_delay: float | None
    n_delay_miss: int
    delays: list = field(default_factory=list)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["delays"] = [float(x) for x in self.delays]
        return d


def _by_id(trials):
    return {tr.trial_id: tr for tr in trials}


def successful_transition_rate(trials, annotations: list[Annotation], model, spec: WindowSpec, buffer: int = 25):
    """Fraction of instances whose filtered stream shows their goal within the action phase.

    Returns ``(rate, successes, evaluated, excluded, delays)``; instances
    without a detected phase or label are excluded and counted.
    """
    by_id = _by_id(trials)
    succ = n = excluded = 0
    delays = []
    for a in annotations:
        if a.phase is None or a.label is None:
            excluded += 1
            continue
        tr = by_id[a.trial_id]
        st = predict_stream(model, tr, a.participant, spec, buffer)
        n += 1
        succ += reaches_goal(st.filtered, st.t, a.phase.t0, a.phase.tf, a.label)
        delays.append(transition_delay(st.filtered, st.t, a.phase.t0, a.label))
    rate = succ / n if n else None
    return rate, succ, n, excluded, delays


def negotiated_goal_prediction(trials, annotations: list[Annotation], model, spec: WindowSpec, buffer: int = 25):
    """Fraction of opposing instances whose filtered stream ends at the dyad's final goal.

    The final goal is the goal the dyad was heading to at the end of the
    trial. Returns ``(rate or None, successes, evaluated)``.
    """
    by_id = _by_id(trials)
    succ = n = 0
    for a in annotations:
        if a.heading_goal is None:
            continue
        tr = by_id[a.trial_id]
        st = predict_stream(model, tr, a.participant, spec, buffer)
        n += 1
        succ += final_prediction(st.filtered, st.t) == a.heading_goal
    return (succ / n if n else None), succ, n


def signal_level_report(trials, annotations, split: dict, model, spec: WindowSpec, buffer: int = 25):
    """Signal-level metrics on held-out data.

    Transition rate and delays use non-opposing instances of test trials;
    negotiated-goal prediction uses every opposing instance that later
    conceded to another goal (none of them were used for training).
    """
    transition = [a for a in annotations
                  if split.get(a.trial_id) == "test" and a.status in ("ok", "weak", "no_phase", "no_idle")]
    opposing = [a for a in annotations if a.conceded]
    rate, succ, n, excluded, delays = successful_transition_rate(trials, transition, model, spec, buffer)
    ngp, nsucc, nn = negotiated_goal_prediction(trials, opposing, model, spec, buffer)
    finite = [d for d in delays if np.isfinite(d)]
    return SignalLevelReport(
        transition_rate=rate,
        n_transition=n,
        n_transition_success=succ,
        n_excluded=excluded,
        negotiated_rate=ngp,
        n_negotiated=nn,
        n_negotiated_success=nsucc,
        mean_delay=float(np.mean(finite)) if finite else None,
        n_delay_miss=len(delays) - len(finite),
        delays=delays,
    )


def format_report(window_scores: Scores, cm: ConfusionMatrix, signal: SignalLevelReport | None = None,
                  extra: dict | None = None) -> tuple[str, dict]:
    """Human-readable text and a flat key/value mapping of the same numbers."""
    names = ["idle"] + [f"g{i}" for i in range(1, cm.n_classes)]
    kv: dict = {}
    lines = ["confusion matrix (rows true, columns predicted):"]
    lines.append("        " + " ".join(f"{n:>7}" for n in names))
    for i, n in enumerate(names):
        lines.append(f"{n:>7} " + " ".join(f"{c:>7d}" for c in cm.counts[i]))
        for j, m in enumerate(names):
            kv[f"cm.{n}.{m}"] = int(cm.counts[i, j])
    lines.append("")
    lines.append(f"{'class':>7} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}")
    for i, n in enumerate(names):
        lines.append(f"{n:>7} {window_scores.precision[i]:7.4f} {window_scores.recall[i]:7.4f} "
                     f"{window_scores.f1[i]:7.4f} {window_scores.support[i]:8d}")
        kv[f"precision.{n}"] = float(window_scores.precision[i])
        kv[f"recall.{n}"] = float(window_scores.recall[i])
        kv[f"f1.{n}"] = float(window_scores.f1[i])
    lines.append(f"goal macro-F1: {window_scores.macro_f1:.4f}")
    kv["macro_f1"] = window_scores.macro_f1
    if signal is not None:
        def fmt(x):
            return "n/a" if x is None else f"{x:.4f}"

        lines.append(f"successful transition rate: {fmt(signal.transition_rate)} "
                     f"({signal.n_transition_success}/{signal.n_transition}, {signal.n_excluded} excluded)")
        lines.append(f"negotiated goal prediction: {fmt(signal.negotiated_rate)} "
                     f"({signal.n_negotiated_success}/{signal.n_negotiated})")
        lines.append(f"mean transition delay: {fmt(signal.mean_delay)} s ({signal.n_delay_miss} missed)")
        kv.update({
            "transition_rate": signal.transition_rate,
            "transition_n": signal.n_transition,
            "transition_excluded": signal.n_excluded,
            "negotiated_rate": signal.negotiated_rate,
            "negotiated_n": signal.n_negotiated,
            "mean_delay": signal.mean_delay,
            "delay_misses": signal.n_delay_miss,
        })
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
        kv[k] = v
    return "\n".join(lines) + "\n", kv
