"""Synthetic dyad co-manipulation trials with per-sample intent ground truth.

A planar point-mass tray is carried by two participants. After the beep each
participant with a goal pushes toward it with a raised-cosine force hump that
settles to a cruise force; a follower shares the partner's load with a short
lag. When two participants want different goals the non-dominant one resists
(negative power, it is being dragged) until it concedes with a fresh push
toward the winner's goal, or never does (stalemate, trial flagged unusable).
Recordings with a concession stop shortly after that push peaks.

Confounders: a squeezing grasp force along the handle axis, a walking
sinusoid once the dyad moves, and white sensor noise on force and velocity.
Every trial is simulated twice from the same draws, once with and once
without confounders; the clean run defines the ground truth.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .phase import detect_trial_phases
from .signals import GoalLayout, TrialRecording, power_channels, raw_power

ROLE_PAIRS = ("hard-follower", "soft-follower", "hard-soft", "soft-soft", "hard-hard")
DEFAULT_MIX = {
    "hard-follower": 0.2,
    "soft-follower": 0.1,
    "hard-soft": 0.3,
    "soft-soft": 0.2,
    "hard-hard": 0.2,
}
CONFLICT_STRETCH = 5.0


def default_layout(distance: float = 2.4, separation_deg: float = 40.0, n_goals: int = 3) -> GoalLayout:
    """Goals on an arc ahead of the start (+x), left to right, ``separation_deg`` apart."""
    half = (n_goals - 1) / 2.0
    angles = np.deg2rad([(half - i) * separation_deg for i in range(n_goals)])
    goals = distance * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GoalLayout(np.zeros(2), goals)


@dataclass(frozen=True)
class ParticipantSpec:
    role: str = "follower"  # hard | soft | follower
    goal: int | None = None
    behavior: str = "decisive"  # decisive | indecisive

    def __post_init__(self):
        if self.role not in ("hard", "soft", "follower"):
            raise ValueError(f"unknown role {self.role!r}")
        if (self.role == "follower") != (self.goal is None):
            raise ValueError("followers have no goal; hard/soft participants need one")
        if self.behavior not in ("decisive", "indecisive"):
            raise ValueError(f"unknown behavior {self.behavior!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    participants: tuple = (ParticipantSpec("hard", 1), ParticipantSpec())
    trial_id: str = "trial"
    dyad: str = "d0"
    seed: int = 0
    layout: GoalLayout = field(default_factory=default_layout)
    rate_hz: float = 200.0
    mass: float = 2.1
    damping: float = 8.0
    grasp_offset: float = 0.3
    t_beep: float = 0.5
    idle_range: tuple = (0.6, 1.4)
    hump_duration: tuple = (0.9, 1.4)
    amplitude_decisive: tuple = (4.0, 7.0)
    amplitude_indecisive: tuple = (3.0, 4.5)
    amplitude_scale: float = 1.0
    cruise_fraction: float = 0.35
    follower_gain: tuple = (0.85, 1.0)
    follower_lag: tuple = (0.03, 0.08)
    resist: tuple = (1.2, 1.6)
    conflict_duration: tuple = (0.3, 0.6)
    hard_extra_conflict: float = 0.5
    p_yield: float = 0.9
    p_hard_concede: float = 0.6
    tail: tuple = (1.0, 1.5)
    concession_tail: tuple = (0.15, 0.3)
    concession_stretch: float = 2.0  # concession push duration / own hump duration
    concession_gain: float = 1.0  # concession push amplitude / own amplitude
    concession_stop: float = 0.5  # recording ends this far through the concession push (plus tail)
    force_noise: float = 0.15
    velocity_noise: float = 0.01
    squeeze: float = 0.3
    walk_amplitude: float = 0.3
    walk_frequency: tuple = (1.5, 2.5)
    substeps: int = 2

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if len(self.participants) != 2:
            raise ValueError("a dyad has two participants")
        roles = [p.role for p in self.participants]
        if roles == ["follower", "follower"]:
            raise ValueError("at least one participant needs a goal")
        for p in self.participants:
            if p.goal is not None and not 1 <= p.goal <= self.layout.n_goals:
                raise ValueError(f"goal {p.goal} outside 1..{self.layout.n_goals}")

    def noiseless(self) -> "ScenarioConfig":
        """Same scenario without sensor noise; squeeze and walking forces are kept."""
        return replace(self, force_noise=0.0, velocity_noise=0.0)

    def ideal(self) -> "ScenarioConfig":
        """No sensor noise and no goal-irrelevant forces."""
        return replace(self.noiseless(), squeeze=0.0, walk_amplitude=0.0)


@dataclass
class GroundTruth:
    """Per-participant intent labels and event times; lists are indexed k-1."""

    trial_id: str
    labels: np.ndarray  # (2, T) ints, 0 = idle
    t_intent: list  # hump (or following) start per participant
    t_onset: list  # action-phase onset detected in the sensor-noise-free run
    t_peak: list  # end of the first action phase in the sensor-noise-free run
    opposing: list  # bool: sustained negative power episode
    opposing_interval: list  # (start, end) or None
    changed_intent: list  # bool: intent switched to the partner's goal
    snr_db: list
    final_goal: int | None
    consensus_time: float | None
    conflict: bool
    stalemate: bool
    max_stretch: float  # clean ||F1 - F2|| maximum
    roles: list
    goals: list

    @property
    def usable(self) -> bool:
        return not self.stalemate and self.final_goal is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["labels"] = self.labels.tolist()
        d["opposing_interval"] = [list(x) if x is not None else None for x in self.opposing_interval]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        d = dict(d)
        d["labels"] = np.array(d["labels"], dtype=int)
        d["opposing_interval"] = [tuple(x) if x is not None else None for x in d["opposing_interval"]]
        return cls(**d)


def _hump(s, duration):
    s = np.asarray(s, dtype=float)
    inside = (s >= 0) & (s <= duration)
    return np.where(inside, np.sin(np.pi * np.clip(s, 0, duration) / duration) ** 2, 0.0)


def _ramp(s, length):
    """0 before s=0, raised-cosine rise to 1 at s=length, 1 after."""
    s = np.asarray(s, dtype=float)
    x = np.clip(s / length, 0.0, 1.0)
    return np.sin(0.5 * np.pi * x) ** 2


@dataclass
class _Draws:
    onset: np.ndarray
    duration: np.ndarray
    amplitude: np.ndarray
    gain: float
    lag: float
    resist: float
    conflict_len: float
    yields: bool
    dominant: int | None  # 0-based index of the winner when goals differ
    tail: float
    concession_tail: float
    squeeze_phase: float
    squeeze_freq: float
    walk_freq: np.ndarray
    walk_phase: np.ndarray


def _draw(cfg: ScenarioConfig, rng: np.random.Generator) -> _Draws:
    specs = cfg.participants
    onset = cfg.t_beep + rng.uniform(*cfg.idle_range, size=2)
    duration = rng.uniform(*cfg.hump_duration, size=2)
    amp = np.empty(2)
    for i, p in enumerate(specs):
        lo, hi = cfg.amplitude_decisive if p.behavior == "decisive" else cfg.amplitude_indecisive
        amp[i] = rng.uniform(lo, hi) * cfg.amplitude_scale
    gain = rng.uniform(*cfg.follower_gain)
    lag = rng.uniform(*cfg.follower_lag)
    resist = rng.uniform(*cfg.resist)
    conflict_len = rng.uniform(*cfg.conflict_duration)
    u_yield = rng.uniform()
    u_dom = rng.uniform()
    tail = rng.uniform(*cfg.tail)
    concession_tail = rng.uniform(*cfg.concession_tail)
    squeeze_phase = rng.uniform(0, 2 * np.pi)
    squeeze_freq = rng.uniform(0.2, 0.6)
    walk_freq = rng.uniform(*cfg.walk_frequency, size=2)
    walk_phase = rng.uniform(0, 2 * np.pi, size=2)

    dominant, yields = None, True
    g = [p.goal for p in specs]
    if g[0] is not None and g[1] is not None and g[0] != g[1]:
        r = [p.role for p in specs]
        if r[0] != r[1]:
            dominant = 0 if r[0] == "hard" else 1
        elif amp[0] != amp[1]:
            dominant = int(np.argmax(amp))
        else:
            dominant = int(u_dom < 0.5)
        loser = specs[1 - dominant]
        p = cfg.p_yield if loser.role == "soft" else cfg.p_hard_concede
        yields = bool(u_yield < p)
        # the winner has to out-push the resisting partner
        amp[dominant] = max(amp[dominant], resist * amp[1 - dominant])
        if r[0] == r[1] == "hard":
            conflict_len += cfg.hard_extra_conflict
    return _Draws(onset, duration, amp, gain, lag, resist, conflict_len, yields, dominant, tail,
                  concession_tail, squeeze_phase, squeeze_freq, walk_freq, walk_phase)


class _Plan:
    """Force law of one trial.

    Each applied force is ``alpha_i(t) U_i + beta_i(t) U_j + c_i(t)`` where
    ``U_i`` is the unit vector from participant i's grasp point toward its own
    goal (leaders only) and ``c_i`` the confounders. Only the unit vectors
    depend on the object position.
    """

    def __init__(self, cfg: ScenarioConfig, d: _Draws):
        self.cfg, self.d = cfg, d
        specs = cfg.participants
        self.goals = [p.goal for p in specs]
        self.offsets = np.array([[0.0, cfg.grasp_offset], [0.0, -cfg.grasp_offset]])
        self.leader = [p.goal is not None for p in specs]
        self.conflict = d.dominant is not None
        if self.conflict:
            dom, opp = d.dominant, 1 - d.dominant
            self.dom, self.opp = dom, opp
            self.t_resist = max(d.onset[dom], d.onset[opp]) + 0.25
            self.t_concede = self.t_resist + d.conflict_len if d.yields else None
        else:
            self.dom = self.opp = None
            self.t_resist = self.t_concede = None
        self.intent_start = np.array(d.onset, dtype=float)
        for i in range(2):
            if not self.leader[i]:
                self.intent_start[i] = d.onset[1 - i] + d.lag
        # the dyad only starts walking once both participants are engaged
        self.t_walk = float(self.intent_start.max()) + 0.3
        events = [d.onset[i] + d.duration[i] for i in range(2) if self.leader[i]]
        self.t_end = max(events) + d.tail
        if self.t_concede is not None:
            # recording stops shortly after the concession push peaks
            self.t_end = self.t_concede + cfg.concession_stop * cfg.concession_stretch * d.duration[self.opp] + d.concession_tail

    def magnitude(self, i, t):
        d = self.d
        a = d.amplitude[i]
        s = t - d.onset[i]
        return a * _hump(s, d.duration[i]) + self.cfg.cruise_fraction * a * _ramp(s - d.duration[i] / 2, d.duration[i] / 2)

    def coefficients(self, t):
        """alpha (2, G), beta (2, G) and confounders (2, G, 2) on a time grid."""
        d = self.d
        t = np.asarray(t, dtype=float)
        alpha = np.zeros((2, t.size))
        beta = np.zeros((2, t.size))
        if not self.conflict:
            for i in range(2):
                if self.leader[i]:
                    alpha[i] = self.magnitude(i, t)
                else:
                    beta[i] = d.gain * self.magnitude(1 - i, t - d.lag)
        else:
            dom, opp = self.dom, self.opp
            m_opp = self.magnitude(opp, t)
            w_res = _ramp(t - self.t_resist, 0.25)
            w = _ramp(t - self.t_concede, 0.25) if self.t_concede is not None else np.zeros_like(t)
            alpha[dom] = self.magnitude(dom, t)
            alpha[opp] = (1 - w) * m_opp
            push = 0.0
            if self.t_concede is not None:
                push = self.cfg.concession_gain * d.amplitude[opp] * _hump(t - self.t_concede, self.cfg.concession_stretch * d.duration[opp])
            beta[opp] = -(1 - w) * m_opp * w_res * d.resist + w * (d.gain * self.magnitude(dom, t - d.lag) + push)
        return alpha, beta, self.confounders(t)

    def confounders(self, t):
        cfg, d = self.cfg, self.d
        F = np.zeros((2, t.size, 2))
        if cfg.squeeze:
            s = cfg.squeeze * (1.0 + 0.3 * np.sin(2 * np.pi * d.squeeze_freq * t + d.squeeze_phase))
            F[0, :, 1] += s
            F[1, :, 1] -= s
        if cfg.walk_amplitude:
            gate = _ramp(t - self.t_walk, 0.3)
            for i in range(2):
                F[i, :, 0] += cfg.walk_amplitude * gate * np.sin(2 * np.pi * d.walk_freq[i] * t + d.walk_phase[i])
        return F


def _simulate(plan: _Plan, n: int):
    """RK4 integration of m a = F1 + F2 - b v; returns per-sample pos, vel, forces."""
    cfg = plan.cfg
    S = cfg.substeps
    h = 1.0 / (cfg.rate_hz * S)
    grid = np.arange(2 * S * (n - 1) + 1) * (h / 2)
    alpha, beta, conf = plan.coefficients(grid)
    a0, a1 = alpha[0].tolist(), alpha[1].tolist()
    b0, b1 = beta[0].tolist(), beta[1].tolist()
    c0x, c0y = conf[0, :, 0].tolist(), conf[0, :, 1].tolist()
    c1x, c1y = conf[1, :, 0].tolist(), conf[1, :, 1].tolist()
    lead0, lead1 = plan.leader
    g0 = cfg.layout.goals[plan.goals[0] - 1] if lead0 else (0.0, 0.0)
    g1 = cfg.layout.goals[plan.goals[1] - 1] if lead1 else (0.0, 0.0)
    g0x, g0y = float(g0[0]), float(g0[1])
    g1x, g1y = float(g1[0]), float(g1[1])
    o0x, o0y = plan.offsets[0].tolist()
    o1x, o1y = plan.offsets[1].tolist()
    m, b = cfg.mass, cfg.damping
    hypot = math.hypot

    def forces(m_idx, px, py):
        u0x = u0y = u1x = u1y = 0.0
        if lead0:
            dx, dy = g0x - px - o0x, g0y - py - o0y
            r = hypot(dx, dy)
            if r > 1e-9:
                u0x, u0y = dx / r, dy / r
        if lead1:
            dx, dy = g1x - px - o1x, g1y - py - o1y
            r = hypot(dx, dy)
            if r > 1e-9:
                u1x, u1y = dx / r, dy / r
        f0x = a0[m_idx] * u0x + b0[m_idx] * u1x + c0x[m_idx]
        f0y = a0[m_idx] * u0y + b0[m_idx] * u1y + c0y[m_idx]
        f1x = a1[m_idx] * u1x + b1[m_idx] * u0x + c1x[m_idx]
        f1y = a1[m_idx] * u1y + b1[m_idx] * u0y + c1y[m_idx]
        return f0x, f0y, f1x, f1y

    def acc(m_idx, px, py, vx, vy):
        f0x, f0y, f1x, f1y = forces(m_idx, px, py)
        return (f0x + f1x - b * vx) / m, (f0y + f1y - b * vy) / m

    px, py = (float(x) for x in cfg.layout.start_position)
    vx = vy = 0.0
    P = np.zeros((n, 2))
    V = np.zeros((n, 2))
    Fs = np.zeros((n, 2, 2))
    for s in range(n):
        base = 2 * S * s
        P[s] = px, py
        V[s] = vx, vy
        f0x, f0y, f1x, f1y = forces(base, px, py)
        Fs[s, 0] = f0x, f0y
        Fs[s, 1] = f1x, f1y
        if s == n - 1:
            break
        for j in range(S):
            i0 = base + 2 * j
            k1ax, k1ay = acc(i0, px, py, vx, vy)
            k1px, k1py = vx, vy
            k2px, k2py = vx + 0.5 * h * k1ax, vy + 0.5 * h * k1ay
            k2ax, k2ay = acc(i0 + 1, px + 0.5 * h * k1px, py + 0.5 * h * k1py, k2px, k2py)
            k3px, k3py = vx + 0.5 * h * k2ax, vy + 0.5 * h * k2ay
            k3ax, k3ay = acc(i0 + 1, px + 0.5 * h * k2px, py + 0.5 * h * k2py, k3px, k3py)
            k4px, k4py = vx + h * k3ax, vy + h * k3ay
            k4ax, k4ay = acc(i0 + 2, px + h * k3px, py + h * k3py, k4px, k4py)
            px += h / 6 * (k1px + 2 * k2px + 2 * k3px + k4px)
            py += h / 6 * (k1py + 2 * k2py + 2 * k3py + k4py)
            vx += h / 6 * (k1ax + 2 * k2ax + 2 * k3ax + k4ax)
            vy += h / 6 * (k1ay + 2 * k2ay + 2 * k3ay + k4ay)
    return P, V, Fs


def _recording(cfg: ScenarioConfig, plan: _Plan, rng_noise: np.random.Generator, n: int):
    P, V, Fs = _simulate(plan, n)
    force = np.transpose(Fs, (1, 0, 2)).copy()
    velocity = np.stack([V, V])
    grasp = np.stack([P + plan.offsets[0], P + plan.offsets[1]])
    fn = rng_noise.normal(0.0, 1.0, size=force.shape)
    vn = rng_noise.normal(0.0, 1.0, size=velocity.shape)
    force = force + cfg.force_noise * fn
    velocity = velocity + cfg.velocity_noise * vn
    t = np.arange(n) / cfg.rate_hz
    specs = cfg.participants
    return TrialRecording(
        trial_id=cfg.trial_id,
        rate_hz=cfg.rate_hz,
        t=t,
        force=force,
        velocity=velocity,
        grasp=grasp,
        t_beep=cfg.t_beep,
        t_end=float(t[-1]),
        layout=cfg.layout,
        dyad=cfg.dyad,
        goal_index=tuple(p.goal for p in specs),
        goal_type=tuple(p.role for p in specs),
    ), P


def _opposing_episode(trial: TrialRecording, k: int, min_duration: float = 0.1):
    i = k - 1
    p = raw_power(trial.force[i], trial.velocity[i])
    scale = np.max(np.abs(p)) if p.size else 0.0
    if scale <= 0:
        return None
    neg = p < -0.1 * scale
    run_min = int(round(min_duration * trial.rate_hz))
    best = None
    start = None
    for s, flag in enumerate(np.append(neg, False)):
        if flag and start is None:
            start = s
        elif not flag and start is not None:
            if s - start >= run_min:
                best = (float(trial.t[start]), float(trial.t[s - 1]))
                break
            start = None
    return best


def generate_trial(config: ScenarioConfig) -> tuple[TrialRecording, GroundTruth]:
    """Simulate one trial and its ground truth from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    draws = _draw(config, rng)
    noise_seed = int(rng.integers(0, 2**63 - 1))

    clean_cfg = config.noiseless()
    plan = _Plan(config, draws)
    clean_plan = _Plan(clean_cfg, draws)
    n = int(round(plan.t_end * config.rate_hz)) + 1

    clean, pos = _recording(clean_cfg, clean_plan, np.random.default_rng(noise_seed), n)
    # stop before any grasp point comes near a goal
    grasp_all = np.concatenate([clean.grasp[0], clean.grasp[1]], axis=0)
    dist = np.min(np.linalg.norm(grasp_all[:, None, :] - config.layout.goals[None], axis=2), axis=1)
    close = np.flatnonzero(np.minimum(dist[:n], dist[n:]) < 0.3)
    if close.size:
        n = int(close[0])
        clean, pos = _recording(clean_cfg, clean_plan, np.random.default_rng(noise_seed), n)
    trial, _ = _recording(config, plan, np.random.default_rng(noise_seed), n)

    t = trial.t
    specs = config.participants
    final_goal = None
    if plan.conflict:
        final_goal = specs[plan.dom].goal if draws.yields else None
    else:
        final_goal = next(p.goal for p in specs if p.goal is not None)
        if all(p.goal is not None for p in specs):
            final_goal = specs[0].goal

    labels = np.zeros((2, n), dtype=int)
    changed = [False, False]
    for i, p in enumerate(specs):
        start = plan.intent_start[i]
        own = p.goal if p.goal is not None else final_goal
        if own is None:
            own = specs[1 - i].goal
        labels[i, t >= start] = own
        if plan.conflict and i == plan.opp and plan.t_concede is not None:
            labels[i, t >= plan.t_concede] = final_goal
            changed[i] = True

    t_onset, t_peak, snr, opposing, opp_int = [], [], [], [], []
    clean_phases = detect_trial_phases(clean)
    for k in (1, 2):
        i = k - 1
        ph = clean_phases[k]
        t_onset.append(None if ph is None else ph.t0)
        t_peak.append(None if ph is None else ph.tf)
        sel = t >= config.t_beep
        ref = power_channels(clean, k).abs_power[sel]
        noisy = power_channels(trial, k).abs_power[sel]
        err = np.var(noisy - ref)
        snr.append(float(10 * np.log10(np.var(ref) / err)) if err > 0 else float("inf"))
        ep = _opposing_episode(clean, k)
        opp_int.append(ep)
        opposing.append(ep is not None)

    stretch = np.linalg.norm(clean.force[0] - clean.force[1], axis=1)
    gt = GroundTruth(
        trial_id=config.trial_id,
        labels=labels,
        t_intent=[float(x) for x in plan.intent_start],
        t_onset=t_onset,
        t_peak=t_peak,
        opposing=opposing,
        opposing_interval=opp_int,
        changed_intent=changed,
        snr_db=snr,
        final_goal=final_goal,
        consensus_time=float(plan.t_concede) if plan.t_concede is not None else None,
        conflict=bool(plan.conflict),
        stalemate=bool(plan.conflict and not draws.yields),
        max_stretch=float(stretch.max()),
        roles=[p.role for p in specs],
        goals=[p.goal for p in specs],
    )
    trial.extra["usable"] = gt.usable
    return trial, gt


def parse_mix(text: str | dict | None) -> dict:
    """Role-pair distribution from ``"hard-soft=0.3,hard-hard=0.2"`` or a dict."""
    if text is None:
        return dict(DEFAULT_MIX)
    if isinstance(text, dict):
        mix = {k: float(v) for k, v in text.items()}
    else:
        mix = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            name, _, val = part.partition("=")
            mix[name.strip()] = float(val)
    for name in mix:
        if name not in ROLE_PAIRS:
            raise ValueError(f"unknown role pair {name!r}; expected one of {ROLE_PAIRS}")
    total = sum(mix.values())
    if total <= 0 or any(v < 0 for v in mix.values()):
        raise ValueError("mix weights must be non-negative with a positive sum")
    return {k: mix[k] / total for k in ROLE_PAIRS if k in mix}


def sample_scenario(index: int, mix: dict, seed: int, trials_per_dyad: int = 10, **overrides) -> ScenarioConfig:
    """Draw the role pair, goals and behaviors of trial ``index``."""
    rng = np.random.default_rng([seed, index])
    names = list(mix)
    pair = names[int(rng.choice(len(names), p=np.array([mix[k] for k in names])))]
    layout = overrides.get("layout", default_layout())
    roles = pair.split("-")
    if rng.uniform() < 0.5:
        roles = roles[::-1]
    specs = []
    for role in roles:
        if role == "follower":
            specs.append(ParticipantSpec())
            continue
        goal = int(rng.integers(1, layout.n_goals + 1))
        p_decisive = 0.8 if role == "hard" else 0.6
        behavior = "decisive" if rng.uniform() < p_decisive else "indecisive"
        specs.append(ParticipantSpec(role, goal, behavior))
    dyad = index // trials_per_dyad
    style = np.random.default_rng([seed, 1_000_003, dyad]).uniform(0.85, 1.15)
    trial_seed = int(rng.integers(0, 2**63 - 1))
    kw = dict(amplitude_scale=style)
    kw.update(overrides)
    return ScenarioConfig(
        participants=tuple(specs),
        trial_id=f"t{index:04d}",
        dyad=f"d{dyad:03d}",
        seed=trial_seed,
        **kw,
    )


def generate_corpus(n_trials: int, mix=None, seed: int = 0, trials_per_dyad: int = 10, **overrides):
    """Deterministic list of ``(TrialRecording, GroundTruth)`` pairs."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    mix = parse_mix(mix)
    return [
        generate_trial(sample_scenario(i, mix, seed, trials_per_dyad, **overrides))
        for i in range(n_trials)
    ]
