import shutil

import pytest

from haptic_intent import formats
from haptic_intent.pipeline import (
    EXIT_FINGERPRINT,
    EXIT_MISSING_INPUT,
    EXIT_OK,
    EXIT_VERSION,
    PipelineConfig,
    outputs_digest,
    run_pipeline,
    run_stage,
)

STAGES = ("simulate", "detect-phase", "build-dataset", "search", "train", "evaluate", "stream")


def _config(workdir, **kw):
    base = dict(workdir=str(workdir), n_trials=50, sim_seed=11, search_budget=2, cv_folds=3,
                params={"rounds": 30}, search_space={"rounds": [10, 30]}, stream_trial="t0003")
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    results = run_pipeline(_config(root), STAGES)
    assert [r.exit_code for r in results] == [EXIT_OK] * len(STAGES), [r.message for r in results]
    return root


def _copy(workdir, tmp_path):
    dst = tmp_path / "copy"
    shutil.copytree(workdir, dst)
    return dst


def test_end_to_end_emits_report(workdir):
    text = (workdir / "report.txt").read_text()
    assert "goal macro-F1" in text
    kv = dict(line.split("=", 1) for line in (workdir / "report.kv").read_text().splitlines())
    assert 0.0 <= float(kv["macro_f1"]) <= 1.0
    for stage in STAGES:
        assert (workdir / "manifests" / f"{stage}.json").exists()
    assert (workdir / "streams" / "t0003.p1.csv").exists()


def test_rerun_is_byte_identical(workdir, tmp_path):
    other = tmp_path / "again"
    results = run_pipeline(_config(other), STAGES)
    assert all(r.ok for r in results)
    assert outputs_digest(_config(other)) == outputs_digest(_config(workdir))


def test_rerun_in_place_is_byte_identical(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    before = outputs_digest(_config(dst))
    for stage in STAGES:
        assert run_stage(stage, _config(dst)).ok
    assert outputs_digest(_config(dst)) == before


def test_manifest_has_no_absolute_paths(workdir):
    text = (workdir / "manifests" / "evaluate.json").read_text()
    assert str(workdir) not in text


def test_missing_inputs(tmp_path):
    for stage in ("detect-phase", "build-dataset", "train", "evaluate", "stream"):
        res = run_stage(stage, _config(tmp_path / "empty"))
        assert res.exit_code == EXIT_MISSING_INPUT, (stage, res.message)


def test_corrupted_corpus_header_gives_version_exit(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    for name in ("report.txt", "report.kv", "manifests/evaluate.json"):
        (dst / name).unlink()
    path = dst / "corpus" / "test.bin"
    data = bytearray(path.read_bytes())
    m = len(formats.CORPUS_MAGIC)
    data[m + 12 : m + 20] = b"\x00garbage"
    path.write_bytes(bytes(data))
    before = sorted(p.relative_to(dst) for p in dst.rglob("*"))
    res = run_stage("evaluate", _config(dst))
    assert res.exit_code == EXIT_VERSION
    assert sorted(p.relative_to(dst) for p in dst.rglob("*")) == before


def test_version_bump_gives_version_exit(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    p = dst / "phases.json"
    p.write_text(p.read_text().replace('"version": 1', '"version": 7'))
    assert run_stage("build-dataset", _config(dst)).exit_code == EXIT_VERSION


def test_window_mismatch_gives_fingerprint_exit(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    res = run_stage("stream", _config(dst, window_length=40))
    assert res.exit_code == EXIT_FINGERPRINT
    assert "fingerprint" in res.message


def test_changed_trials_are_detected(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    for p in (dst / "trials").glob("t0000.*"):
        p.unlink()
    assert run_stage("build-dataset", _config(dst)).exit_code == EXIT_FINGERPRINT


def test_trained_from_search(workdir, tmp_path):
    dst = _copy(workdir, tmp_path)
    res = run_stage("train", _config(dst, use_search=True))
    assert res.ok
    model = formats.load_model(dst / "model.json")
    assert model.config.params["rounds"] in (10, 30)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        PipelineConfig(workdir=str(tmp_path), buffer=0)
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"workdir": str(tmp_path), "bogus": 1})
    with pytest.raises(ValueError):
        run_stage("nope", _config(tmp_path))
