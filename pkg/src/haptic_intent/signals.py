"""Per-sample signal channels derived from a dyad trial recording.

All vectors are planar. Participants are numbered 1 and 2; goals 1..N.
The channel matrix for a feature set lists the signals in a fixed order,
each immediately followed by its time derivative::

    set 1: v, F, F_sum, F_str (x/y each), P, v@g, F@g, F_sum@g, F_str@g, P@g
    set 2: v@g, F@g, F_sum@g, F_str@g, P@g
    set 3: P, v@g, F@g, P@g

``X@g`` stands for N channels ``X@g1 .. X@gN`` (projection on the line from
the participant's current grasp point to each goal). ``F_sum = F_k + F_j``
and ``F_str = F_k - F_j`` with ``k`` the participant and ``j`` the partner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_DIR = 1e-6
SMOOTH_SAMPLES = 5

GOAL_TYPES = ("hard", "soft", "follower")

# (row name, is_vector) in table order; vector rows emit .x/.y
_ROWS = (
    ("v", True),
    ("F", True),
    ("F_sum", True),
    ("F_str", True),
    ("P", False),
    ("v@", False),
    ("F@", False),
    ("F_sum@", False),
    ("F_str@", False),
    ("P@", False),
)

FEATURE_SET_ROWS = {
    1: ("v", "F", "F_sum", "F_str", "P", "v@", "F@", "F_sum@", "F_str@", "P@"),
    2: ("v@", "F@", "F_sum@", "F_str@", "P@"),
    3: ("P", "v@", "F@", "P@"),
}


class DegenerateDirectionError(ValueError):
    """Grasp point coincides with a goal, so the goal direction is undefined."""


@dataclass(frozen=True)
class GoalLayout:
    start_position: np.ndarray
    goals: np.ndarray  # (N, 2)

    def __post_init__(self):
        start = np.asarray(self.start_position, dtype=float).reshape(2)
        goals = np.atleast_2d(np.asarray(self.goals, dtype=float))
        if goals.ndim != 2 or goals.shape[1] != 2 or goals.shape[0] < 1:
            raise ValueError("goals must be an (N, 2) array with N >= 1")
        if np.any(np.linalg.norm(goals - start, axis=1) < EPS_DIR):
            raise ValueError("every goal must differ from the start position")
        object.__setattr__(self, "start_position", start)
        object.__setattr__(self, "goals", goals)

    @property
    def n_goals(self) -> int:
        return self.goals.shape[0]

    def rotated(self, angle: float) -> "GoalLayout":
        R = rotation_matrix(angle)
        return GoalLayout(self.start_position @ R.T, self.goals @ R.T)

    def to_dict(self) -> dict:
        return {"start_position": self.start_position.tolist(), "goals": self.goals.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GoalLayout":
        return cls(np.array(d["start_position"], float), np.array(d["goals"], float))


@dataclass
class TrialRecording:
    """Synchronized recording of one dyad interaction.

    ``force``, ``velocity`` and ``grasp`` have shape (2, T, 2): participant,
    sample, planar component. ``goal_index`` holds the assigned goal per
    participant (``None`` for followers).
    """

    trial_id: str
    rate_hz: float
    t: np.ndarray
    force: np.ndarray
    velocity: np.ndarray
    grasp: np.ndarray
    t_beep: float
    t_end: float
    layout: GoalLayout
    dyad: str = ""
    goal_index: tuple = (None, None)
    goal_type: tuple = ("follower", "follower")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        for name in ("force", "velocity", "grasp"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (2, n, 2):
                raise ValueError(f"{name} must have shape (2, {n}, 2), got {arr.shape}")
            setattr(self, name, arr)
        if n < 2:
            raise ValueError("a trial needs at least two samples")
        dt = np.diff(self.t)
        if np.any(dt <= 0) or not np.allclose(dt, 1.0 / self.rate_hz, rtol=1e-6, atol=1e-9):
            raise ValueError("t must be strictly increasing with step 1/rate_hz")
        if not (self.t[0] - 1e-9 <= self.t_beep <= self.t_end + 1e-9):
            raise ValueError("t_beep must lie within [t[0], t_end]")
        for g in self.goal_type:
            if g not in GOAL_TYPES:
                raise ValueError(f"unknown goal type {g!r}")

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    def participant(self, k: int) -> int:
        if k not in (1, 2):
            raise ValueError(f"participant must be 1 or 2, got {k}")
        return k - 1

    def index_of(self, time: float) -> int:
        """Nearest sample index for a time instant, clipped to the recording."""
        i = int(round((time - self.t[0]) * self.rate_hz))
        return min(max(i, 0), self.n_samples - 1)

    def rotated(self, angle: float) -> "TrialRecording":
        """Copy of the trial with the world frame rotated by ``angle`` radians."""
        R = rotation_matrix(angle)
        return TrialRecording(
            trial_id=self.trial_id,
            rate_hz=self.rate_hz,
            t=self.t.copy(),
            force=self.force @ R.T,
            velocity=self.velocity @ R.T,
            grasp=self.grasp @ R.T,
            t_beep=self.t_beep,
            t_end=self.t_end,
            layout=self.layout.rotated(angle),
            dyad=self.dyad,
            goal_index=self.goal_index,
            goal_type=self.goal_type,
            extra=dict(self.extra),
        )


@dataclass
class PowerChannels:
    """Inputs of action-phase detection for one participant."""

    participant: int
    t: np.ndarray
    abs_power: np.ndarray  # (T,)
    projected: np.ndarray  # (N, T)

    def as_rows(self) -> tuple[list[str], np.ndarray]:
        names = ["|P|"] + [f"P@g{i + 1}" for i in range(self.projected.shape[0])]
        return names, np.vstack([self.abs_power[None, :], self.projected])


@dataclass
class SignalMatrix:
    names: list
    values: np.ndarray  # (channels, T)
    feature_set: int
    participant: int

    @property
    def n_channels(self) -> int:
        return len(self.names)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def raw_power(F, v):
    """Instantaneous interaction power ``F . v`` (broadcasts over leading axes)."""
    F = np.asarray(F, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum(F * v, axis=-1)


def goal_direction(grasp_pos, goal_pos, eps: float = EPS_DIR):
    """Unit vector(s) from grasp position(s) toward a goal."""
    d = np.asarray(goal_pos, dtype=float) - np.asarray(grasp_pos, dtype=float)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    if np.any(norm < eps):
        raise DegenerateDirectionError(
            f"grasp point within {eps:g} m of goal {np.asarray(goal_pos).tolist()}"
        )
    return d / norm


def project_to_goal(x, grasp_pos, goal_pos, eps: float = EPS_DIR):
    """Signed component of ``x`` along the grasp-to-goal direction."""
    u = goal_direction(grasp_pos, goal_pos, eps)
    return np.sum(np.asarray(x, dtype=float) * u, axis=-1)


def projected_power(F, v, grasp_pos, goal_pos, eps: float = EPS_DIR):
    """Power along one goal direction: product of the projected force and velocity."""
    u = goal_direction(grasp_pos, goal_pos, eps)
    return np.sum(np.asarray(F, float) * u, axis=-1) * np.sum(np.asarray(v, float) * u, axis=-1)


def projected_power_cosine_form(F, v, grasp_pos, goal_pos):
    """Same quantity as :func:`projected_power` written as |F||v|cos(F,u)cos(v,u).

    Used as an independent check of the projection form.
    """
    F = np.asarray(F, float)
    v = np.asarray(v, float)
    u = np.asarray(goal_pos, float) - np.asarray(grasp_pos, float)
    nF = np.linalg.norm(F, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    nu = np.linalg.norm(u, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_f = np.where(nF > 0, np.sum(F * u, axis=-1) / (nF * nu), 0.0)
        cos_v = np.where(nv > 0, np.sum(v * u, axis=-1) / (nv * nu), 0.0)
    return nF * nv * cos_f * cos_v


def pairwise_forces(F1, F2):
    """Return ``(F1 + F2, F1 - F2)``."""
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    return F1 + F2, F1 - F2


def moving_average(x, width: int = SMOOTH_SAMPLES):
    """Centered moving average along the last axis, edge samples replicated.

    The sum is taken term by term in a fixed order so that a value depends only
    on its neighbourhood, never on where the array starts.
    """
    x = np.asarray(x, dtype=float)
    if width <= 1:
        return x.copy()
    if width % 2 == 0:
        raise ValueError("smoothing width must be odd")
    h = width // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(h, h)]
    xp = np.pad(x, pad, mode="edge")
    n = x.shape[-1]
    acc = xp[..., 0:n].copy()
    for j in range(1, width):
        acc = acc + xp[..., j : j + n]
    return acc / width


def time_derivative(x, rate_hz: float, smooth: int = SMOOTH_SAMPLES):
    """Smoothed first derivative: central differences, one-sided at the ends."""
    s = moving_average(x, smooth)
    d = np.empty_like(s)
    if s.shape[-1] < 2:
        d[...] = 0.0
        return d
    d[..., 1:-1] = (s[..., 2:] - s[..., :-2]) * (rate_hz / 2.0)
    d[..., 0] = (s[..., 1] - s[..., 0]) * rate_hz
    d[..., -1] = (s[..., -1] - s[..., -2]) * rate_hz
    return d


def _projections(trial: TrialRecording, k: int, x: np.ndarray) -> np.ndarray:
    """Project a (T, 2) vector signal on every goal line of participant k -> (N, T)."""
    grasp = trial.grasp[trial.participant(k)]
    return np.stack([project_to_goal(x, grasp, g) for g in trial.layout.goals])


def power_channels(trial: TrialRecording, k: int) -> PowerChannels:
    i = trial.participant(k)
    F, v = trial.force[i], trial.velocity[i]
    Fp = _projections(trial, k, F)
    vp = _projections(trial, k, v)
    return PowerChannels(k, trial.t, np.abs(raw_power(F, v)), Fp * vp)


def signal_rows(F, F_other, v, grasp, goals) -> dict:
    """Table-style signals from (T, 2) arrays of one participant, keyed by row name.

    Vector rows are (2, T); projected rows are (N, T); ``P`` is (1, T). Every
    value depends on its own sample only.
    """
    F_sum, F_str = pairwise_forces(F, F_other)

    def proj(x):
        return np.stack([project_to_goal(x, grasp, g) for g in goals])

    vp = proj(v)
    Fp = proj(F)
    return {
        "v": v.T,
        "F": F.T,
        "F_sum": F_sum.T,
        "F_str": F_str.T,
        "P": raw_power(F, v)[None, :],
        "v@": vp,
        "F@": Fp,
        "F_sum@": proj(F_sum),
        "F_str@": proj(F_str),
        "P@": Fp * vp,
    }


def base_signals(trial: TrialRecording, k: int) -> dict:
    """All distinct signals for participant k (see ``signal_rows``)."""
    i = trial.participant(k)
    return signal_rows(trial.force[i], trial.force[1 - i], trial.velocity[i], trial.grasp[i], trial.layout.goals)


def _row_channel_names(row: str, n_goals: int) -> list[str]:
    vector = dict(_ROWS)[row]
    if vector:
        return [f"{row}.x", f"{row}.y"]
    if row.endswith("@"):
        return [f"{row}g{i + 1}" for i in range(n_goals)]
    return [row]


def channel_names(feature_set: int, n_goals: int) -> list[str]:
    """Canonical channel order; every signal is followed by ``d/<name>``."""
    if feature_set not in FEATURE_SET_ROWS:
        raise ValueError(f"feature set must be 1, 2 or 3, got {feature_set}")
    names = []
    for row in FEATURE_SET_ROWS[feature_set]:
        for name in _row_channel_names(row, n_goals):
            names.extend([name, f"d/{name}"])
    return names


def n_channels(feature_set: int, n_goals: int) -> int:
    return len(channel_names(feature_set, n_goals))


def derive_channel_matrix(trial: TrialRecording, k: int, feature_set: int) -> SignalMatrix:
    names = channel_names(feature_set, trial.layout.n_goals)
    rows = base_signals(trial, k)
    signals = np.vstack([rows[r] for r in FEATURE_SET_ROWS[feature_set]])
    deriv = time_derivative(signals, trial.rate_hz)
    values = np.empty((2 * signals.shape[0], signals.shape[1]))
    values[0::2] = signals
    values[1::2] = deriv
    return SignalMatrix(names, values, feature_set, k)
