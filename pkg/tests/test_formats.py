import json

import numpy as np
import pytest

from haptic_intent import formats
from haptic_intent.formats import FormatError, VersionError
from haptic_intent.learn import FingerprintError, ModelConfig, train_on_corpus
from haptic_intent.phase import ActionPhase, detect_trial_phases

QUICK = {
    "svm_ecoc": {"C": 1.0},
    "adaboost": {"rounds": 20},
    "random_forest": {"n_trees": 10},
    "mlp": {"max_iter": 100},
}


def test_trial_round_trip_is_exact(tmp_path, small_trials):
    tr = small_trials[2]
    path = formats.save_trial(tr, tmp_path / "a.csv")
    back = formats.load_trial(path)
    for name in ("t", "force", "velocity", "grasp"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))
    assert (back.trial_id, back.t_beep, back.dyad) == (tr.trial_id, tr.t_beep, tr.dyad)
    np.testing.assert_array_equal(back.layout.goals, tr.layout.goals)
    assert formats.trial_to_csv(back) == formats.trial_to_csv(tr)


def test_truncated_trial_is_rejected(tmp_path, small_trials):
    path = formats.save_trial(small_trials[0], tmp_path / "a.csv")
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[: len(lines) // 2]))
    with pytest.raises(FormatError, match="truncated"):
        formats.load_trial(path)


def test_corrupted_trial_header(tmp_path, small_trials):
    path = formats.save_trial(small_trials[0], tmp_path / "a.csv")
    text = path.read_text()
    path.write_text("# {not json" + text[text.index("\n"):])
    with pytest.raises(FormatError):
        formats.load_trial(path)


def test_ground_truth_round_trip(tmp_path, small_pairs):
    _, gt = small_pairs[0]
    path = formats.save_ground_truth(gt, formats.truth_path(tmp_path / "t0000.csv"))
    assert path.name == "t0000.gt.json"
    back = formats.load_ground_truth(path)
    np.testing.assert_array_equal(back.labels, gt.labels)
    assert formats.dumps(back.to_dict()) == formats.dumps(gt.to_dict())


def test_phases_round_trip(tmp_path, small_trials):
    phases = {tr.trial_id: detect_trial_phases(tr) for tr in small_trials[:4]}
    phases["empty"] = {1: None, 2: ActionPhase(1.0, 1.5, 2.0, 1, truncated=True)}
    path = formats.save_phases(phases, tmp_path / "p.json", {"seed": 1})
    back, header = formats.load_phases(path)
    assert back == phases and header == {"seed": 1}
    assert formats.phases_csv(phases).count("\n") == 1 + 2 * len(phases)


def test_annotations_round_trip(tmp_path, small_build):
    path = formats.save_annotations(small_build.annotations, small_build.split, tmp_path / "a.json")
    ann, split, _ = formats.load_annotations(path)
    assert ann == small_build.annotations and split == small_build.split


def test_corpus_round_trip(tmp_path, small_build):
    c = small_build.train
    back = formats.load_corpus(formats.save_corpus(c, tmp_path / "c.bin"))
    for name in ("X", "y", "participant", "t_end", "stage"):
        np.testing.assert_array_equal(getattr(back, name), getattr(c, name))
    assert list(back.trial_ids) == list(c.trial_ids) and back.header == c.header
    assert formats.corpus_to_bytes(back) == formats.corpus_to_bytes(c)


def test_truncated_corpus_is_rejected(tmp_path, small_build):
    data = formats.corpus_to_bytes(small_build.test)
    with pytest.raises(FormatError):
        formats.corpus_from_bytes(data[:-100])
    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    with pytest.raises(FormatError):
        formats.corpus_from_bytes(bytes(flipped))


def test_corpus_version_check(small_build):
    data = bytearray(formats.corpus_to_bytes(small_build.test))
    m = len(formats.CORPUS_MAGIC)
    data[m : m + 4] = (99).to_bytes(4, "little")
    with pytest.raises(VersionError):
        formats.corpus_from_bytes(bytes(data))


def test_corpus_csv_shape(small_build):
    from haptic_intent.dataset import feature_names

    text = formats.corpus_csv(small_build.test, feature_names(1, 3))
    rows = text.splitlines()
    assert len(rows) == len(small_build.test) + 1 and len(rows[0].split(",")) == 5 + 192


@pytest.fixture(scope="module")
def trained_variants(small_build):
    return {v: train_on_corpus(small_build.train, ModelConfig(v, QUICK[v])) for v in QUICK}


@pytest.mark.parametrize("variant", list(QUICK))
def test_model_round_trip_preserves_predictions(tmp_path, small_build, trained_variants, variant):
    model = trained_variants[variant]
    path = formats.save_model(model, tmp_path / f"{variant}.json")
    back = formats.load_model(path, variant=variant, fingerprint=model.fingerprint)
    X = np.random.default_rng(3).normal(size=(100, small_build.train.n_features)) * small_build.train.X.std(0)
    X += small_build.train.X.mean(0)
    np.testing.assert_array_equal(back.predict(X), model.predict(X))
    np.testing.assert_array_equal(back.predict(small_build.test.X), model.predict(small_build.test.X))
    assert formats.model_to_json(back) == formats.model_to_json(model)


def test_model_variant_and_fingerprint_checks(tmp_path, trained_variants):
    model = trained_variants["adaboost"]
    path = formats.save_model(model, tmp_path / "m.json")
    with pytest.raises(FormatError):
        formats.load_model(path, variant="mlp")
    with pytest.raises(FingerprintError):
        formats.load_model(path, fingerprint="0" * 16)
    d = json.loads(path.read_text())
    d["version"] = 2
    path.write_text(json.dumps(d))
    with pytest.raises(VersionError):
        formats.load_model(path)
    path.write_text("{")
    with pytest.raises(FormatError):
        formats.load_model(path)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    formats.atomic_write_text(tmp_path / "x.txt", "a")
    formats.atomic_write_text(tmp_path / "x.txt", "b")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
    assert (tmp_path / "x.txt").read_text() == "b"
