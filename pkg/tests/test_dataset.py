import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haptic_intent.dataset import (
    CorpusError,
    SamplingPlan,
    WindowSpec,
    build_corpus,
    feature_names,
    fingerprint,
    neighborhood_sample,
    split_trials,
    window_stats,
    window_stats_batch,
)
from haptic_intent.phase import ActionPhase
from haptic_intent.signals import GoalLayout, TrialRecording, derive_channel_matrix

RATE = 200.0


def _trial(seconds=3.0, trial_id="w", dyad="", seed=0):
    rng = np.random.default_rng(seed)
    n = int(seconds * RATE)
    t = np.arange(n) / RATE
    F = rng.normal(0, 2, (2, n, 2))
    v = rng.normal(0, 0.1, (2, n, 2))
    g = np.zeros((2, n, 2))
    g[0, :, 1], g[1, :, 1] = 0.3, -0.3
    layout = GoalLayout(np.zeros(2), [[2.0, 1.0], [2.4, 0.0], [2.0, -1.0]])
    return TrialRecording(trial_id, RATE, t, F, v, g, 0.0, t[-1], layout, dyad=dyad)


def test_window_stats_constant():
    np.testing.assert_array_equal(window_stats(np.full((1, 10), 2.5), 9, 10), [2.5, 2.5, 2.5, 0.0])


def test_window_stats_population_std():
    out = window_stats(np.array([[9.0, 1, 2, 3, 4]]), 4, 4)
    np.testing.assert_allclose(out, [1, 4, 2.5, np.sqrt(1.25)])
    assert out[3] == pytest.approx(1.118, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_batch_matches_loop(L, C, seed):
    x = np.random.default_rng(seed).normal(size=(C, 60))
    ends = np.arange(L - 1, 60, 7)
    batch = window_stats_batch(x, ends, L)
    for j, e in enumerate(ends):
        w = x[:, e - L + 1 : e + 1]
        ref = np.stack([w.min(1), w.max(1), w.mean(1), w.std(1)], axis=1).reshape(-1)
        np.testing.assert_allclose(batch[j], ref, rtol=1e-12, atol=1e-12)


def test_window_out_of_range():
    with pytest.raises(IndexError):
        window_stats_batch(np.zeros((1, 10)), [3], 5)


@pytest.mark.parametrize("feature_set,n", [(1, 192), (2, 120), (3, 80)])
def test_feature_lengths(feature_set, n):
    tr = _trial()
    m = derive_channel_matrix(tr, 1, feature_set)
    assert window_stats(m, 100, 60).size == n
    assert len(feature_names(feature_set, 3)) == n


def test_fingerprint_tracks_layout():
    a = fingerprint(WindowSpec(60, 1), 3)
    assert a == fingerprint(WindowSpec(60, 1), 3)
    assert a != fingerprint(WindowSpec(40, 1), 3)
    assert a != fingerprint(WindowSpec(60, 2), 3)
    assert a != fingerprint(WindowSpec(60, 1), 4)


def test_uniform_windows_inside_phase():
    tr = _trial()
    ph = ActionPhase(1.0, 2.0, 1.0, 1)
    plan = SamplingPlan(n_uniform=10, n_skewed=0)
    out = neighborhood_sample(tr, 1, ph, None, 2, WindowSpec(60, 1), plan)
    assert len(out) == 10
    for w in out:
        assert 1.3 - 1 / RATE <= w.t_end <= 2.0 and w.label == 2 and w.stage == 1


def test_uniform_idle_windows_inside_idle():
    tr = _trial()
    plan = SamplingPlan(n_uniform=50, n_skewed=0, seed=4)
    out = neighborhood_sample(tr, 1, ActionPhase(1.5, 2.5, 1.0, 1), (0.2, 1.5), 3, WindowSpec(60, 1), plan)
    idle = [w for w in out if w.label == 0]
    assert len(idle) == 50
    # window start must not precede the idle region
    assert all(w.t_end - 59 / RATE >= 0.2 - 1 / RATE and w.t_end <= 1.5 for w in idle)


def test_skewed_idle_ends_concentrate_near_transition():
    tr = _trial()
    plan = SamplingPlan(n_uniform=0, n_skewed=400, sigma_skew=0.1, seed=9)
    out = neighborhood_sample(tr, 1, ActionPhase(1.0, 2.0, 1.0, 1), (0.0, 1.0), 1, WindowSpec(60, 1), plan)
    idle = np.array([w.t_end for w in out if w.label == 0 and w.stage == 2])
    assert idle.size > 300
    assert np.mean((idle >= 0.8 - 1 / RATE) & (idle <= 1.0)) >= 0.8


def test_short_phase_gives_no_windows(caplog):
    tr = _trial()
    with caplog.at_level(logging.INFO, logger="haptic_intent.dataset"):
        out = neighborhood_sample(tr, 1, ActionPhase(1.0, 1.2, 1.0, 1), None, 1, WindowSpec(60, 1), SamplingPlan())
    assert out == []
    assert any("shorter than the window" in r.getMessage() for r in caplog.records)


def test_sampling_plan_validation():
    with pytest.raises(ValueError):
        SamplingPlan(sigma_skew=0.0)
    with pytest.raises(ValueError):
        SamplingPlan(n_uniform=-1)


def test_split_of_619_interactions():
    trials = [_trial(0.1, f"t{i:03d}", seed=i) for i in range(619)]
    split = split_trials(trials, "interaction", 0.15, seed=0)
    n_test = sum(v == "test" for v in split.values())
    assert abs(n_test - 93) <= 1 and len(split) - n_test == 619 - n_test
    assert abs((619 - n_test) - 526) <= 1


def test_dyad_split_keeps_dyads_together():
    trials = [_trial(0.1, f"t{i:03d}", dyad=f"d{i // 10}", seed=i) for i in range(100)]
    split = split_trials(trials, "dyad", 0.15, seed=2)
    for d in range(10):
        sides = {split[f"t{i:03d}"] for i in range(10 * d, 10 * d + 10)}
        assert len(sides) == 1
    assert split == split_trials(trials, "dyad", 0.15, seed=2)


def test_corpus_trials_on_one_side(small_build):
    train, test = set(small_build.train.trial_ids), set(small_build.test.trial_ids)
    assert train and test and not train & test
    for tid in train | test:
        assert small_build.split[tid] == ("train" if tid in train else "test")


def test_corpus_shapes_and_labels(small_build):
    c = small_build.train
    assert c.X.shape == (len(c), 192)
    assert set(np.unique(c.y)) == {0, 1, 2, 3}
    assert set(np.unique(c.stage)) == {1, 2}
    assert c.header["fingerprint"] == fingerprint(WindowSpec(60, 1), 3)


def test_corpus_deterministic(small_trials, small_build):
    again = build_corpus(small_trials, WindowSpec(60, 1), SamplingPlan(seed=1), split_seed=3)
    assert again.train.X.tobytes() == small_build.train.X.tobytes()
    assert again.test.y.tobytes() == small_build.test.y.tobytes()
    assert list(again.train.trial_ids) == list(small_build.train.trial_ids)


def test_uniform_windows_lie_in_labeled_region(small_build):
    ann = {(a.trial_id, a.participant): a for a in small_build.annotations}
    c = small_build.train
    w = 60 / RATE
    for j in np.flatnonzero(c.stage == 1):
        a = ann[(c.trial_ids[j], int(c.participant[j]))]
        start = c.t_end[j] - (60 - 1) / RATE
        if c.y[j] == 0:
            assert a.t_beep - 1 / RATE <= start and c.t_end[j] <= a.phase.t0 + 1e-9
        else:
            assert a.phase.t0 - 1 / RATE <= start + 1e-9 and c.t_end[j] <= a.phase.tf + 1e-9
            assert c.t_end[j] - a.phase.t0 >= w - 2 / RATE


def test_too_few_trials_per_class(small_trials):
    with pytest.raises(CorpusError):
        build_corpus(small_trials[:1], WindowSpec(60, 1))


@pytest.mark.parametrize("feature_set", [2, 3])
def test_rotation_leaves_set_2_3_features(small_trials, feature_set):
    tr = small_trials[0]
    rot = tr.rotated(1.1)
    spec = WindowSpec(60, feature_set)
    ph = ActionPhase(tr.t_beep + 0.5, tr.t_beep + 1.2, 1.0, 1)
    plan = SamplingPlan(4, 2, seed=0)
    a = neighborhood_sample(tr, 1, ph, (tr.t_beep, ph.t0), 1, spec, plan)
    b = neighborhood_sample(rot, 1, ph, (tr.t_beep, ph.t0), 1, spec, plan)
    A, B = np.vstack([w.features for w in a]), np.vstack([w.features for w in b])
    assert np.max(np.abs(A - B)) <= 1e-9 * max(1.0, np.max(np.abs(A)))


def test_annotations_round_trip(small_build):
    from haptic_intent.dataset import Annotation

    for a in small_build.annotations:
        assert Annotation.from_dict(a.to_dict()) == a
