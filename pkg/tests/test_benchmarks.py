from fractions import Fraction

import pytest

from oracles import tree_win_prob
from winhalt.benchmarks import (DERANDOMIZE_SUITE, SEARCH_SUITE, derandomize_benchmark,
                                matching_pennies, rock_paper_scissors, search_benchmark)
from winhalt.engine import exact_win_prob


@pytest.mark.parametrize("bench", DERANDOMIZE_SUITE, ids=lambda b: b.name)
def test_frozen_win_prob_matches_oracle(bench):
    agent, env, cfg = bench.build()
    assert exact_win_prob(agent, env, cfg) == bench.win_prob
    assert tree_win_prob(agent, env, cfg.horizon) == bench.win_prob
    assert bench.win_prob > Fraction(1, 2**bench.s)
    assert bench.s in (1, 2, 3)


def test_suite_sizes_and_lookup():
    assert len(DERANDOMIZE_SUITE) == 10 and len(SEARCH_SUITE) == 10
    names = [b.name for b in DERANDOMIZE_SUITE] + [b.name for b in SEARCH_SUITE]
    assert len(set(names)) == len(names)
    assert derandomize_benchmark("coin-echo-h3").s == 2
    assert search_benchmark("halt-iff-7").max_bits == 12
    with pytest.raises(KeyError):
        derandomize_benchmark("nope")
    with pytest.raises(KeyError):
        search_benchmark("nope")


def test_bundled_stage_games():
    assert matching_pennies().payoff == ((1, -1), (-1, 1))
    assert rock_paper_scissors().n == 3
