"""Every corpus game: pipeline against the oracle and the frozen values."""

import pytest

from bwr.cli import RunConfig, compare

from conftest import corpus_game, corpus_names, expected


@pytest.mark.parametrize("name", corpus_names())
def test_compare_has_no_diffs(name):
    report = compare(corpus_game(name), RunConfig())
    assert report["diffs"] == [] and report["certified"] and report["class_conditions_ok"]
    want = expected()[name]
    assert report["oracle"] == {key: want[key] for key in ("t_max", "t_min", "T", "B")}
