from __future__ import annotations

import json

import numpy as np
import pytest

from graphtune.corpus import CorpusSplit, corpus_documents
from graphtune.errors import ConfigError, OutOfDomain
from graphtune.gateway import make_gateway
from graphtune.runner import (
    StudySettings,
    evaluate_config,
    load_split,
    relative_gain,
    run_study,
    run_trial,
    settings_from_mapping,
)
from graphtune.space import baseline_config, default_search_space
from graphtune.stores import TrialStores
from graphtune.tpe import Study, random_config

SPACE = default_search_space()


@pytest.fixture
def toy_split(toy3):
    return CorpusSplit(tuple(toy3), (), seed=0)


@pytest.fixture(scope="module")
def bundled_split():
    return load_split(StudySettings())


def some_configs(n, seed=5):
    rng = np.random.default_rng(seed)
    return [random_config(SPACE, rng) for _ in range(n)]


@pytest.mark.parametrize("config", some_configs(6) + [baseline_config()])
def test_run_trial_contract(toy_split, config):
    rec = run_trial(config, toy_split, "f1", make_gateway("mock"))
    assert rec.state == "complete"
    assert 0.0 <= rec.objective <= 1.0
    assert len(rec.per_question) == 3
    again = run_trial(config, toy_split, "f1", make_gateway("mock"))
    assert again.objective == rec.objective and again.per_question == rec.per_question


@pytest.mark.parametrize("task_getter, expect_calls", [("without_summaries", False), ("with_summaries", True)])
def test_summary_calls_follow_task_getter(toy_split, task_getter, expect_calls):
    gw = make_gateway("mock")
    run_trial(baseline_config().replace(task_getter=task_getter), toy_split, "f1", gw)
    assert (gw.calls.get("summarization", 0) > 0) == expect_calls


def test_run_trial_rejects_invalid_config(toy_split):
    with pytest.raises(OutOfDomain):
        run_trial(baseline_config().replace(top_k=0), toy_split, "f1", make_gateway("mock"))


def test_trial_isolation(bundled_split):
    gw = make_gateway("mock")
    stores = TrialStores(gw)
    target = baseline_config().replace(search_type="graph_completion", top_k=8, qa_prompt="concise")
    fresh = run_trial(target, bundled_split, "f1", gw, TrialStores(gw))
    for history in (some_configs(3, seed=1), some_configs(3, seed=1)[::-1]):
        for config in history:
            run_trial(config, bundled_split, "f1", gw, stores)
        again = run_trial(target, bundled_split, "f1", gw, stores)
        assert again.objective == fresh.objective
        assert again.per_question == fresh.per_question


def test_holdout_indexes_no_test_passages(bundled_split):
    gw = make_gateway("mock")
    stores = TrialStores(gw)
    ev = evaluate_config(baseline_config(), bundled_split.train, bundled_split.test, "f1", gw, stores)
    train_docs = {d.doc_id for d in corpus_documents(bundled_split.train)}
    test_only = {d.doc_id for d in corpus_documents(bundled_split.test)} - train_docs
    assert test_only, "fixture should have passages unique to the test side"
    assert set(ev.build["documents"]) == train_docs
    chunk_ids = stores.collections["chunks"].ids
    assert chunk_ids and not {cid.rsplit(":", 1)[0] for cid in chunk_ids} & test_only
    test_texts = {d.text for d in corpus_documents(bundled_split.test) if d.doc_id in test_only}
    indexed = " ".join(stores.text_of("chunks", cid) for cid in chunk_ids)
    assert not any(t in indexed for t in test_texts)
    assert {s.instance_id for s in ev.scores} == {q.id for q in bundled_split.test}


def test_relative_gain():
    assert relative_gain(0.9, 0.25) == pytest.approx(260.0)
    assert relative_gain(0.5, 0.0) is None
    assert relative_gain(0.0, 0.0) is None


def _report_bytes(out):
    return (out / "report.json").read_bytes()


def test_single_trial_study(tmp_path):
    settings = StudySettings(n_trials=1, output_dir=tmp_path / "one", resamples=200)
    report = run_study(settings)
    assert len(report.running_max) == 1
    assert report.best_trial_index == 0
    for name in ("report.json", "summary.csv", "running_max.csv", "dashboard.html", "study.jsonl"):
        assert (tmp_path / "one" / name).exists()


class Interrupt(Exception):
    pass


def test_resume_after_interrupt(tmp_path):
    whole = StudySettings(n_trials=50, output_dir=tmp_path / "whole", resamples=200)
    run_study(whole)

    cut = StudySettings(n_trials=50, output_dir=tmp_path / "cut", resamples=200)

    def stop_at_30(study, rec):
        if len(study.trials) == 30:
            raise Interrupt

    with pytest.raises(Interrupt):
        run_study(cut, on_trial=stop_at_30)
    assert len(Study.load(tmp_path / "cut" / "study.jsonl").trials) == 30
    assert not (tmp_path / "cut" / "report.json").exists()

    resumed = []
    run_study(cut, on_trial=lambda s, r: resumed.append(r.trial_index))
    assert resumed[0] == 30 and resumed[-1] == 49
    assert _report_bytes(tmp_path / "cut") == _report_bytes(tmp_path / "whole")


def test_refuses_to_clobber_without_resume(tmp_path):
    settings = StudySettings(n_trials=1, output_dir=tmp_path, resamples=50)
    run_study(settings)
    with pytest.raises(ConfigError):
        run_study(settings, resume=False)
    other = StudySettings(n_trials=2, output_dir=tmp_path, resamples=50, optimizer_seed=9)
    with pytest.raises(ConfigError):
        run_study(other)


def test_settings_validation():
    with pytest.raises(ConfigError):
        StudySettings(n_trials=0)
    with pytest.raises(ConfigError):
        StudySettings(metric="bleu")
    with pytest.raises(ConfigError):
        StudySettings(backend="cloud")


def test_settings_from_mapping(tmp_path):
    s = settings_from_mapping(
        {"metric": "em", "n_trials": 3, "output_dir": "out", "seeds": {"split": 1}, "space": {"top_k": {"high": 10}}},
        base_dir=tmp_path,
    )
    assert s.metric == "em" and s.output_dir == tmp_path / "out" and s.split_seed == 1
    assert s.space["top_k"].bounds == (1, 10)
    for bad in ({"n_trails": 3}, {"seeds": {"shuffle": 1}}, {"tpe": {"alpha": 1}}, {"baseline": {"foo": 1}}):
        with pytest.raises(ConfigError):
            settings_from_mapping(bad)


def test_settings_round_trip():
    s = StudySettings(metric="correctness", n_trials=7, split_seed=3)
    again = StudySettings.from_dict(json.loads(json.dumps(s.to_dict())))
    assert again.to_dict() == s.to_dict()
