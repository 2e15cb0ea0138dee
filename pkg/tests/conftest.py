from __future__ import annotations

import os
import socket
from pathlib import Path

import pytest

from graphtune.corpus import QAInstance, load_benchmark
from graphtune.gateway import make_gateway
from graphtune.runner import StudySettings, build_trial, bundled_dataset, run_study
from graphtune.space import baseline_config
from graphtune.stores import TrialStores

# The whole suite runs without network access.
os.environ["GT_OFFLINE"] = "1"


class NetworkBlocked(RuntimeError):
    pass


def _refuse(*args, **kwargs):
    raise NetworkBlocked("network access attempted during tests")


@pytest.fixture(autouse=True)
def _no_network(monkeypatch):
    monkeypatch.setenv("GT_OFFLINE", "1")
    monkeypatch.setattr(socket.socket, "connect", _refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", _refuse)
    monkeypatch.setattr(socket, "create_connection", _refuse)


TOY_PASSAGES = {
    "Paris": "Paris is the capital of France. The city lies on the Seine.",
    "Ada Lovelace": "Ada Lovelace was born in London. She wrote notes on the Analytical Engine.",
    "Acme Corp": "Acme Corp was founded by Wile Coyote. Acme Corp is headquartered in Phoenix.",
}


def toy_instance(id_: str, question: str, answer: str, titles: list[str]) -> QAInstance:
    return QAInstance(id_, question, answer, tuple((t, TOY_PASSAGES[t]) for t in titles))


@pytest.fixture
def toy3() -> list[QAInstance]:
    """Three-document corpus with one question per document."""
    return [
        toy_instance("q-paris", "What is the capital of France?", "Paris", ["Paris", "Ada Lovelace"]),
        toy_instance("q-ada", "Where was Ada Lovelace born?", "London", ["Ada Lovelace", "Acme Corp"]),
        toy_instance("q-acme", "Who founded Acme Corp?", "Wile Coyote", ["Acme Corp", "Paris"]),
    ]


@pytest.fixture
def gateway():
    return make_gateway("mock")


@pytest.fixture
def built(toy3, gateway):
    """Frozen stores built from the toy corpus with the baseline config."""
    stores = TrialStores(gateway)
    build_trial(baseline_config(), toy3, gateway, stores, toy3)
    return stores


@pytest.fixture(scope="session")
def toy_benchmark() -> list[QAInstance]:
    return load_benchmark(bundled_dataset(), "hotpotqa")


GOLDEN_DIR = Path(__file__).parent / "golden"


def golden_settings(out_dir) -> StudySettings:
    """The fixed mock study behind the files in tests/golden/."""
    return StudySettings(metric="f1", n_trials=20, resamples=500, output_dir=Path(out_dir))


@pytest.fixture(scope="session")
def golden_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("golden-study")
    report = run_study(golden_settings(out))
    return report, out


# Acceptance criteria append (number, name, passed, detail) here; the lines are
# printed together at the end of the run.
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")
