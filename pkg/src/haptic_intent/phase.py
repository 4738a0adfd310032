"""Detection of the first action phase from interaction-power channels.

Each power channel is smoothed, its peaks are found, peaks closer than the
human reaction time are merged, small peaks are dropped, and the first
remaining peak defines a rise period ``[t_start, t_peak]`` where ``t_start``
is the latest upward crossing of ``tau * peak``. The action phase is the
first contiguous island of the union of the rise periods over all channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .signals import SMOOTH_SAMPLES, PowerChannels, TrialRecording, moving_average, power_channels

TAU = 0.1
REACTION_TIME = 0.25
ETA = 0.2


class EmptyIdleError(ValueError):
    """The action phase starts at (or before) the beep: no idle samples exist."""


@dataclass(frozen=True)
class PeakEvent:
    t_dominant: float
    magnitude: float
    channel: str = ""
    index: int = -1


@dataclass(frozen=True)
class RisePeriod:
    t_start: float
    t_dominant: float
    channel: str = ""
    truncated: bool = False


@dataclass(frozen=True)
class ActionPhase:
    t0: float
    tf: float
    strength: float
    participant: int
    truncated: bool = False

    @property
    def duration(self) -> float:
        return self.tf - self.t0


def merge_peaks(peaks: list[PeakEvent], delta_t: float) -> list[PeakEvent]:
    """Combine peaks closer than ``delta_t``, keeping the larger one.

    Peaks are swept in time order. The running representative absorbs every
    peak that lies within ``delta_t`` of it and is replaced by that peak when
    it is larger (earlier one wins ties). No two returned peaks are closer
    than ``delta_t``, so merging again changes nothing.
    """
    merged: list[PeakEvent] = []
    current = None
    for p in sorted(peaks, key=lambda p: p.t_dominant):
        if current is None:
            current = p
        elif p.t_dominant - current.t_dominant < delta_t - 1e-9:
            if p.magnitude > current.magnitude:
                current = p
        else:
            merged.append(current)
            current = p
    if current is not None:
        merged.append(current)
    return merged


def remove_small_peaks(peaks: list[PeakEvent], eta: float) -> list[PeakEvent]:
    if not peaks:
        return []
    top = max(p.magnitude for p in peaks)
    return [p for p in peaks if p.magnitude >= eta * top]


def find_filtered_peaks(
    channel,
    t,
    delta_t: float = REACTION_TIME,
    eta: float = ETA,
    name: str = "",
) -> list[PeakEvent]:
    """Positive local maxima of ``channel`` after merging and outlier removal.

    The channel is used as given; smoothing is the caller's business.
    """
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    x = np.asarray(channel, dtype=float)
    t = np.asarray(t, dtype=float)
    idx, _ = find_peaks(x)
    peaks = [PeakEvent(float(t[i]), float(x[i]), name, int(i)) for i in idx if x[i] > 0]
    return remove_small_peaks(merge_peaks(peaks, delta_t), eta)


def rising_onset(channel, t, peak: PeakEvent, tau: float = TAU) -> tuple[float, bool]:
    """Latest upward crossing of ``tau * peak.magnitude`` before the peak.

    Returns ``(t_start, truncated)``. When the channel never dips below the
    level before the peak, the first sample time is returned with
    ``truncated=True``.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    x = np.asarray(channel, dtype=float)
    t = np.asarray(t, dtype=float)
    level = tau * peak.magnitude
    ip = peak.index if peak.index >= 0 else int(np.searchsorted(t, peak.t_dominant))
    below = np.flatnonzero(x[: ip + 1] < level)
    if below.size == 0:
        return float(t[0]), True
    i = int(below[-1])
    if i >= ip:
        return float(t[ip]), False
    x0, x1 = x[i], x[i + 1]
    frac = (level - x0) / (x1 - x0)
    return float(t[i] + frac * (t[i + 1] - t[i])), False


def rise_periods(
    names: list[str],
    rows: np.ndarray,
    t: np.ndarray,
    tau: float = TAU,
    delta_t: float = REACTION_TIME,
    eta: float = ETA,
    smooth: int = SMOOTH_SAMPLES,
) -> list[RisePeriod]:
    """Rise period of the first surviving peak of every channel.

    Small peaks are judged against the largest peak over all channels, so a
    channel that only carries noise cannot contribute a period of its own.
    """
    smoothed = moving_average(rows, smooth)
    per_channel = []
    for name, x in zip(names, smoothed):
        idx, _ = find_peaks(x)
        peaks = [PeakEvent(float(t[i]), float(x[i]), name, int(i)) for i in idx if x[i] > 0]
        per_channel.append(merge_peaks(peaks, delta_t))
    top = max((p.magnitude for ps in per_channel for p in ps), default=0.0)
    periods = []
    for x, peaks in zip(smoothed, per_channel):
        peaks = [p for p in peaks if p.magnitude >= eta * top]
        if not peaks:
            continue
        dominant = peaks[0]
        t_start, truncated = rising_onset(x, t, dominant, tau)
        periods.append(RisePeriod(t_start, dominant.t_dominant, dominant.channel, truncated))
    return periods


def first_island(periods: list[RisePeriod], dt: float) -> tuple[float, float, bool] | None:
    """First contiguous run of the union of periods on a grid of step ``dt``."""
    if not periods:
        return None
    ps = sorted(periods, key=lambda p: (p.t_start, p.t_dominant))
    t0, tf = ps[0].t_start, ps[0].t_dominant
    truncated = ps[0].truncated
    for p in ps[1:]:
        if p.t_start - tf < dt:
            tf = max(tf, p.t_dominant)
        else:
            break
    return t0, tf, truncated


def detect_action_phase(
    channels: PowerChannels,
    t_frame: tuple[float, float] | None = None,
    tau: float = TAU,
    delta_t: float = REACTION_TIME,
    eta: float = ETA,
    smooth: int = SMOOTH_SAMPLES,
) -> ActionPhase | None:
    """First action phase of one participant, or ``None`` when no channel peaks."""
    return _detect([channels], t_frame, tau, delta_t, eta, smooth, channels.participant)


def _detect(channel_sets, t_frame, tau, delta_t, eta, smooth, participant):
    t = channel_sets[0].t
    if t_frame is None:
        t_frame = (t[0], t[-1])
    lo = int(np.searchsorted(t, t_frame[0] - 1e-9))
    hi = int(np.searchsorted(t, t_frame[1] + 1e-9, side="right"))
    tw = t[lo:hi]
    if tw.size < 3:
        return None
    names, rows, abs_rows = [], [], []
    for ch in channel_sets:
        n, r = ch.as_rows()
        names += [f"{ch.participant}:{x}" for x in n]
        rows.append(r[:, lo:hi])
        abs_rows.append(ch.abs_power[lo:hi])
    rows = np.vstack(rows)
    dt = float(t[1] - t[0])
    island = first_island(rise_periods(names, rows, tw, tau, delta_t, eta, smooth), dt)
    if island is None:
        return None
    t0, tf, truncated = island
    mask = (tw >= t0 - 1e-9) & (tw <= tf + 1e-9)
    abs_power = np.max(np.vstack(abs_rows), axis=0)
    strength = float(abs_power[mask].max()) if mask.any() else 0.0
    return ActionPhase(float(t0), float(tf), strength, participant, truncated)


def detect_trial_phases(
    trial: TrialRecording,
    mode: str = "per_participant",
    tau: float = TAU,
    delta_t: float = REACTION_TIME,
    eta: float = ETA,
    smooth: int = SMOOTH_SAMPLES,
) -> dict[int, ActionPhase | None]:
    """Phases of both participants over the frame ``[t_beep, t_end]``.

    ``mode="joint"`` pools the power channels of both participants into one
    detection whose phase is reported for each of them.
    """
    frame = (trial.t_beep, trial.t_end)
    chans = {k: power_channels(trial, k) for k in (1, 2)}
    if mode == "per_participant":
        return {k: detect_action_phase(chans[k], frame, tau, delta_t, eta, smooth) for k in (1, 2)}
    if mode == "joint":
        out = {}
        for k in (1, 2):
            ph = _detect([chans[1], chans[2]], frame, tau, delta_t, eta, smooth, k)
            out[k] = ph
        return out
    raise ValueError(f"unknown phase mode {mode!r}")


def idle_phase(trial: TrialRecording, phase: ActionPhase) -> tuple[float, float]:
    if phase.t0 <= trial.t_beep:
        raise EmptyIdleError(
            f"trial {trial.trial_id} participant {phase.participant}: action starts at the beep"
        )
    return (trial.t_beep, phase.t0)
