"""Shared fixtures: small seeded corpora and trained models, cached per session."""

import numpy as np
import pytest

from haptic_intent.dataset import SamplingPlan, WindowSpec, build_corpus
from haptic_intent.learn import ModelConfig, train_on_corpus
from haptic_intent.simgen import generate_corpus


@pytest.fixture(scope="session")
def small_pairs():
    return generate_corpus(40, seed=5)


@pytest.fixture(scope="session")
def small_trials(small_pairs):
    return [tr for tr, _ in small_pairs]


@pytest.fixture(scope="session")
def small_build(small_trials):
    return build_corpus(small_trials, WindowSpec(60, 1), SamplingPlan(seed=1), split_seed=3)


@pytest.fixture(scope="session")
def small_model(small_build):
    return train_on_corpus(small_build.train, ModelConfig("adaboost", {"rounds": 30}))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one acceptance criterion per test")


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    item = report.nodeid
    if "test_acceptance.py" not in item:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = dict(report.user_properties).get("measured", "")
        _ACCEPTANCE[item] = ("PASS" if report.passed else "FAIL", measured)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for item, (verdict, measured) in _ACCEPTANCE.items():
        name = item.split("::")[-1][len("test_"):]
        terminalreporter.write_line(f"{verdict}  {name}: {measured}")
