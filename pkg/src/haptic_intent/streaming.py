"""Sample-by-sample intent recognition with bounded state.

The recognizer reproduces the offline pipeline (channel derivation, window
statistics, classifier, voting filter) one sample at a time. Channel values
use a centered 5-sample average followed by a central difference, so the
value of sample ``j`` is final once sample ``j + 3`` has arrived; outputs
therefore trail the input by three samples and ``finish`` flushes the tail.

State is a handful of raw samples, ``L`` channel columns and ``B`` votes.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .dataset import WindowSpec, window_stats_batch
from .evaluation import PredictionStream
from .signals import FEATURE_SET_ROWS, SMOOTH_SAMPLES, GoalLayout, TrialRecording, signal_rows

_HALF = SMOOTH_SAMPLES // 2


@dataclass(frozen=True)
class StreamStep:
    index: int
    t: float
    raw: int
    filtered: int


class VotingBuffer:
    """Online majority vote over the last ``size`` labels; ties go to the most recent."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("buffer must be >= 1")
        self.size = size
        self.labels: deque = deque(maxlen=size)
        self.counts: Counter = Counter()

    def push(self, label: int) -> int:
        if len(self.labels) == self.size:
            old = self.labels[0]
            self.counts[old] -= 1
        self.labels.append(label)
        self.counts[label] += 1
        best = max(self.counts.values())
        for lab in reversed(self.labels):
            if self.counts[lab] == best:
                return lab
        raise AssertionError("unreachable")


class StreamingRecognizer:
    """Online recognizer for participant ``k`` of a dyad.

    Feed samples with ``push`` in time order, then call ``finish`` once the
    recording ends. Each call returns the steps whose outputs became final.
    """

    def __init__(self, model, layout: GoalLayout, k: int, spec: WindowSpec, buffer: int = 25,
                 t_beep: float = 0.0, fingerprint: str | None = None):
        if k not in (1, 2):
            raise ValueError("participant must be 1 or 2")
        model.check_fingerprint(fingerprint)
        self.model = model
        self.goals = np.asarray(layout.goals, dtype=float)
        self.k = k
        self.spec = spec
        self.t_beep = float(t_beep)
        self.rows = FEATURE_SET_ROWS[spec.feature_set]
        self.rate = float(spec.rate_hz)
        self.votes = VotingBuffer(buffer)
        self._raw: deque = deque(maxlen=2 * _HALF + 1)  # (index, t, signal vector)
        self._first_raw = None
        self._smooth: deque = deque(maxlen=3)  # (index, t, signal vector, smoothed)
        self._columns: deque = deque(maxlen=spec.length)
        self._n_in = 0
        self._n_smoothed = 0
        self._n_out = 0
        self._finished = False

    @property
    def state_size(self) -> int:
        """Stored sample vectors and votes, bounded by ``L + B + 8``."""
        return len(self._raw) + len(self._smooth) + len(self._columns) + len(self.votes.labels)

    def _signals(self, force, velocity, grasp) -> np.ndarray:
        i = self.k - 1
        F = np.asarray(force, dtype=float).reshape(2, 1, 2)
        v = np.asarray(velocity, dtype=float).reshape(1, 2)
        g = np.asarray(grasp, dtype=float).reshape(1, 2)
        rows = signal_rows(F[i], F[1 - i], v, g, self.goals)
        return np.concatenate([rows[r][:, 0] for r in self.rows])

    def push(self, t: float, force, velocity, grasp) -> list[StreamStep]:
        """Add one sample: ``force`` (2, 2) for both participants, own ``velocity`` and ``grasp`` (2,)."""
        if self._finished:
            raise RuntimeError("recognizer already finished")
        x = self._signals(force, velocity, grasp)
        if self._first_raw is None:
            self._first_raw = x
        self._raw.append((self._n_in, float(t), x))
        self._n_in += 1
        out = []
        # sample j is smoothed once j + 2 has arrived
        while self._n_smoothed + _HALF < self._n_in:
            out.extend(self._smooth_next(last=None))
        return out

    def finish(self) -> list[StreamStep]:
        """Flush the samples that were waiting for right-hand neighbours."""
        if self._finished:
            return []
        self._finished = True
        out = []
        last = self._n_in - 1
        while self._n_smoothed < self._n_in:
            out.extend(self._smooth_next(last=last))
        if self._smooth:
            out.extend(self._emit_last(last))
        return out

    def _raw_at(self, j: int, last: int | None) -> np.ndarray:
        if j < 0:
            return self._first_raw
        if last is not None and j > last:
            j = last
        for idx, _, x in self._raw:
            if idx == j:
                return x
        raise AssertionError(f"sample {j} no longer buffered")

    def _smooth_next(self, last: int | None) -> list[StreamStep]:
        j = self._n_smoothed
        acc = self._raw_at(j - _HALF, last).copy()
        for m in range(j - _HALF + 1, j + _HALF + 1):
            acc = acc + self._raw_at(m, last)
        s = acc / SMOOTH_SAMPLES
        t = next(tt for idx, tt, _ in self._raw if idx == j)
        x = self._raw_at(j, last)
        self._smooth.append((j, t, x, s))
        self._n_smoothed += 1
        # derivative of sample j-1 needs smoothed j-2 and j
        if len(self._smooth) >= 2:
            return self._emit_derivative()
        return []

    def _emit_derivative(self) -> list[StreamStep]:
        if len(self._smooth) == 2:
            (j, t, x, s0), (_, _, _, s1) = self._smooth
            if j != 0:
                raise AssertionError("unexpected smoothing state")
            d = (s1 - s0) * self.rate
            return self._column(j, t, x, d)
        (_, _, _, sa), (j, t, x, _), (_, _, _, sb) = self._smooth
        d = (sb - sa) * (self.rate / 2.0)
        return self._column(j, t, x, d)

    def _emit_last(self, last: int) -> list[StreamStep]:
        j, t, x, s = self._smooth[-1]
        if j != last:
            raise AssertionError("unexpected flush state")
        if len(self._smooth) == 1:
            d = np.zeros_like(s)
        else:
            d = (s - self._smooth[-2][3]) * self.rate
        return self._column(j, t, x, d)

    def _column(self, j: int, t: float, x: np.ndarray, d: np.ndarray) -> list[StreamStep]:
        col = np.empty(2 * x.size)
        col[0::2] = x
        col[1::2] = d
        self._columns.append(col)
        self._n_out = j + 1
        L = self.spec.length
        if len(self._columns) < L or t < self.t_beep - 1e-9:
            return []
        window = np.stack(list(self._columns), axis=1)
        feats = window_stats_batch(window, [L - 1], L)
        raw = int(self.model.predict(feats)[0])
        return [StreamStep(j, t, raw, int(self.votes.push(raw)))]


def replay(model, trial: TrialRecording, k: int, spec: WindowSpec, buffer: int = 25) -> PredictionStream:
    """Drive a ``StreamingRecognizer`` through a recorded trial."""
    rec = StreamingRecognizer(model, trial.layout, k, spec, buffer, trial.t_beep)
    i = trial.participant(k)
    steps: list[StreamStep] = []
    for s in range(trial.n_samples):
        steps.extend(rec.push(trial.t[s], trial.force[:, s], trial.velocity[i, s], trial.grasp[i, s]))
    steps.extend(rec.finish())
    t = np.array([st.t for st in steps])
    raw = np.array([st.raw for st in steps], dtype=int)
    filtered = np.array([st.filtered for st in steps], dtype=int)
    return PredictionStream(t, raw, filtered, trial.trial_id, k)
