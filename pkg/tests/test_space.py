from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from graphtune.errors import OutOfDomain, UnknownTemplate
from graphtune.space import (
    Categorical,
    IntegerRange,
    PipelineConfig,
    SearchSpace,
    baseline_config,
    default_search_space,
    override_space,
    validate_config,
)


def test_default_space_bounds():
    space = default_search_space()
    assert len(space) == 6
    assert space["chunk_size"].bounds == (200, 2000)
    assert space["top_k"].bounds == (1, 20)
    assert space["search_type"].choices == ("chunk_completion", "graph_completion")
    assert space["task_getter"].choices == ("with_summaries", "without_summaries")
    assert len(space["qa_prompt"].choices) == 3
    assert len(space["graph_prompt"].choices) == 3


def test_canonical_dimension_order():
    assert default_search_space().names == (
        "chunk_size", "search_type", "top_k", "qa_prompt", "graph_prompt", "task_getter",
    )


def test_chunk_size_grid():
    grid = default_search_space()["chunk_size"].grid()
    assert grid[0] == 200 and grid[-1] == 2000 and len(grid) == 19


def test_baseline_is_fixed_and_valid():
    b = baseline_config()
    assert b is baseline_config()
    assert b == PipelineConfig(1024, "chunk_completion", 5, "default", "default", "with_summaries")
    assert validate_config(b, default_search_space()) is b


def test_validate_boundaries():
    b = baseline_config()
    validate_config(b.replace(chunk_size=200))
    validate_config(b.replace(chunk_size=2000))
    with pytest.raises(OutOfDomain) as err:
        validate_config(b.replace(chunk_size=2001))
    assert err.value.field == "chunk_size" and err.value.bounds == (200, 2000)
    with pytest.raises(OutOfDomain) as err:
        validate_config(b.replace(top_k=0))
    assert err.value.field == "top_k"


def test_unknown_template_and_bad_symbol():
    b = baseline_config()
    with pytest.raises(UnknownTemplate):
        validate_config(b.replace(qa_prompt="shouty"))
    with pytest.raises(OutOfDomain):
        validate_config(b.replace(search_type="summary_based"))
    with pytest.raises(OutOfDomain):
        validate_config(b.replace(top_k=True))


def test_serialization_round_trip_keeps_order():
    space = default_search_space()
    blob = json.dumps(space.to_dict(), sort_keys=True)
    again = SearchSpace.from_dict(json.loads(blob))
    assert again == space
    assert again.names == space.names


def test_override_space():
    space = override_space(default_search_space(), {"top_k": {"high": 10}, "qa_prompt": {"choices": ["concise"]}})
    assert space["top_k"].bounds == (1, 10)
    assert space["qa_prompt"].choices == ("concise",)
    assert space["chunk_size"] == default_search_space()["chunk_size"]


@given(st.permutations(list(default_search_space())))
def test_order_independent_of_construction(dims):
    assert SearchSpace(tuple(dims)).names == default_search_space().names


@given(
    chunk=st.integers(0, 3000),
    top_k=st.integers(-2, 30),
)
def test_validate_accepts_iff_in_bounds(chunk, top_k):
    cfg = baseline_config().replace(chunk_size=chunk, top_k=top_k)
    inside = 200 <= chunk <= 2000 and 1 <= top_k <= 20
    if inside:
        validate_config(cfg)
    else:
        with pytest.raises(OutOfDomain):
            validate_config(cfg)


def test_bad_dimensions_rejected():
    from graphtune.errors import ConfigError

    with pytest.raises(ConfigError):
        IntegerRange("x", 5, 1)
    with pytest.raises(ConfigError):
        IntegerRange("x", 0, 10, step=3)
    with pytest.raises(ConfigError):
        Categorical("x", ())
    with pytest.raises(ConfigError):
        SearchSpace((Categorical("x", ("a",)), Categorical("x", ("b",))))
