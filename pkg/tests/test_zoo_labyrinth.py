import math
from fractions import Fraction
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import float_occupancy, tree_win_prob
from winhalt.engine import HALT, DeterministicAgent, GameConfig, exact_win_prob, mc_win_prob
from winhalt.errors import Bipartite
from winhalt.zoo.labyrinth import (FORFEIT, Labyrinth, RotatingMinotaur, TricksterMinotaur,
                                   format_labyrinth, is_bipartite, labyrinth_env, load_labyrinth,
                                   mixing_distance, mixing_time, occupancy, parse_labyrinth,
                                   stationary_distribution, transition_matrix, uniform_hero)

F = Fraction

K3 = [(0, 1), (1, 2), (0, 2)]
PATH = [(0, 1), (1, 2)]


def crete6() -> Labyrinth:
    return parse_labyrinth(resources.files("winhalt.data").joinpath("crete6.lab").read_text())


def hero_win(lab, policy=None):
    return exact_win_prob(uniform_hero(lab), labyrinth_env(lab, policy), lab.config())


# -- structure -------------------------------------------------------------------


def test_rejects_disconnected_and_out_of_range():
    with pytest.raises(ValueError):
        Labyrinth(4, [(0, 1), (2, 3)], 0, 3, 2)
    with pytest.raises(ValueError):
        Labyrinth(2, [(0, 2)], 0, 1, 2)
    with pytest.raises(ValueError):
        Labyrinth(2, [(0, 1)], 0, 1, -1)


def test_self_loop_counts_twice():
    lab = Labyrinth(2, [(0, 0), (0, 1)], 0, 1, 1)
    assert lab.degree(0) == 3 and lab.degree(1) == 1
    assert lab.incident()[0] == [0, 0, 1]
    assert sum(stationary_distribution(lab).values()) == 1


def test_crete6_counts():
    lab = crete6()
    assert (lab.rooms, lab.c, lab.d, lab.start, lab.goal, lab.turns) == (6, 12, 5, 0, 5, 4)
    assert not is_bipartite(lab)


def test_format_parse_round_trip_golden():
    lab = crete6()
    text = format_labyrinth(lab)
    assert text.splitlines()[0] == "0 5 4"
    assert text.splitlines()[1:] == [f"{u} {v}" for u, v in lab.edges]
    assert parse_labyrinth(text) == lab


def test_load_from_file(tmp_path):
    p = tmp_path / "k3.lab"
    p.write_text("# triangle\n0 2 5\n0 1\n1 2  # middle\n0 2\n")
    assert load_labyrinth(p) == Labyrinth(3, K3, 0, 2, 5)


@pytest.mark.parametrize("text", ["", "0 1\n0 1\n", "0 1 2\n0 1 2\n", "0 1 2\nx y\n"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_labyrinth(text)


# -- env ---------------------------------------------------------------------------


def test_start_is_goal_with_no_turns_wins_surely():
    lab = Labyrinth(3, K3, 1, 1, 0)
    assert hero_win(lab) == 1
    assert exact_win_prob(DeterministicAgent(lambda h: 2), labyrinth_env(lab), lab.config()) == 1


def test_triangle_converges_to_one_third():
    for n in (20, 21, 25):
        lab = Labyrinth(3, K3, 0, 2, n)
        assert abs(hero_win(lab) - F(1, 3)) < F(1, 100)


def test_path_exact_matches_matrix_power_and_mc():
    for n in (1, 2, 3, 4, 6):
        lab = Labyrinth(3, PATH, 0, 2, n)
        exact = hero_win(lab)
        assert exact == occupancy(lab, n)[2]
        assert math.isclose(float(exact), float_occupancy(3, PATH, 0, n)[2], abs_tol=1e-12)
        assert exact == tree_win_prob(uniform_hero(lab), labyrinth_env(lab), n)
    lab = Labyrinth(3, PATH, 0, 2, 4)
    est = mc_win_prob(uniform_hero(lab), labyrinth_env(lab), lab.config(3), 20_000)
    # exact is 1/2 at even N; 4 standard errors of slack
    assert abs(est.estimate - 0.5) < 4 * math.sqrt(0.25 / 20_000)


def test_invalid_door_forfeits():
    lab = Labyrinth(3, K3, 0, 1, 3)
    bad = DeterministicAgent(lambda h: 2)  # every room has two doors
    assert exact_win_prob(bad, labyrinth_env(lab), lab.config()) == 0
    env = labyrinth_env(lab)
    assert env.transitions(0, (), 5) == ((0, F(1), FORFEIT),)


def test_response_is_door_count_of_new_room():
    lab = Labyrinth(3, [(0, 1), (1, 2), (1, 1)], 0, 2, 3)
    env = labyrinth_env(lab)
    assert env.transitions(0, (), 0) == ((4, F(1), 1),)


def test_rotating_minotaur_relabels_doors():
    lab = Labyrinth(3, K3, 0, 2, 2)
    env = labyrinth_env(lab, RotatingMinotaur())
    # round 2 rotates by one: door 0 of room 1 now leads to room 2, the goal
    assert env.transitions(1, ((0, 2),), 0) == ((HALT, F(1), None),)
    assert labyrinth_env(lab).transitions(1, ((0, 2),), 0) == ((2, F(1), 0),)


def test_uniform_hero_win_is_policy_independent_for_deterministic_minotaurs():
    # a uniform door choice composed with any fixed relabelling is still uniform
    lab = crete6()
    assert hero_win(lab) == hero_win(lab, RotatingMinotaur()) == occupancy(lab, lab.turns)[5]


def test_trickster_is_probabilistic_and_uniform_hero_unchanged():
    lab = crete6()
    env = labyrinth_env(lab, TricksterMinotaur())
    assert env.kind == "probabilistic"
    assert hero_win(lab, TricksterMinotaur()) == F(134843, 648000)


def test_reach_anytime_flag_dominates_end_occupancy():
    lab = Labyrinth(3, PATH, 0, 2, 3)
    hero = uniform_hero(lab)
    end = exact_win_prob(hero, labyrinth_env(lab), lab.config())
    anytime = exact_win_prob(hero, labyrinth_env(lab, reach_anytime=True), lab.config())
    assert end == 0 and anytime == F(1, 2)


# -- walk utilities --------------------------------------------------------------


def test_stationary_values():
    assert stationary_distribution(Labyrinth(3, K3, 0, 2, 1)) == {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)}
    assert stationary_distribution(Labyrinth(3, PATH, 0, 2, 1)) == {0: F(1, 4), 1: F(1, 2), 2: F(1, 4)}
    lab = crete6()
    assert stationary_distribution(lab)[lab.goal] == F(lab.d, 2 * lab.c)


def test_stationary_is_fixed_point():
    lab = crete6()
    pi = stationary_distribution(lab)
    P = transition_matrix(lab)
    for w in range(lab.rooms):
        assert sum(pi[u] * P[u][w] for u in range(lab.rooms)) == pi[w]


def test_distance_at_zero_is_point_mass_gap():
    lab = Labyrinth(3, K3, 0, 2, 1)
    assert mixing_distance(lab, 0) == pytest.approx(2 / 3, abs=1e-15)


def test_triangle_distance_at_ten():
    lab = Labyrinth(3, K3, 0, 2, 1)
    d10 = mixing_distance(lab, 10)
    assert d10 < 0.01
    # eigenvalue -1/2 with multiplicity two: TV = (2/3) * 2^-10
    assert d10 == pytest.approx((2 / 3) / 1024, rel=1e-12)


def test_bipartite_raises_unless_lazy():
    lab = Labyrinth(3, PATH, 0, 2, 1)
    with pytest.raises(Bipartite):
        mixing_distance(lab, 3)
    with pytest.raises(Bipartite):
        mixing_time(lab, 0.01)
    assert mixing_distance(lab, 40, lazy=True) < 1e-6


@given(st.integers(0, 10_000))
def test_lazy_distance_is_monotone(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    edges = [(i, i + 1) for i in range(n - 1)]
    edges += [tuple(int(x) for x in rng.integers(0, n, 2)) for _ in range(int(rng.integers(0, 4)))]
    lab = Labyrinth(n, edges, 0, n - 1, 1)
    ds = [mixing_distance(lab, t, lazy=True) for t in range(12)]
    assert all(b <= a + 1e-15 for a, b in zip(ds, ds[1:]))


@given(st.integers(0, 30))
def test_exact_occupancy_matches_numpy(t):
    lab = crete6()
    exact = occupancy(lab, t)
    approx = float_occupancy(lab.rooms, lab.edges, lab.start, t)
    assert np.allclose([float(x) for x in exact], approx, atol=1e-12)


def test_crete6_occupancy_at_mixing_time():
    lab = crete6()
    n = mixing_time(lab, 0.005)
    p_goal = occupancy(lab, n)[lab.goal]
    assert abs(p_goal - F(lab.d, 2 * lab.c)) < F(5, 1000)
    assert p_goal > F(100 * lab.d, 201 * lab.c)
    assert mixing_distance(lab, n) < 0.005 <= mixing_distance(lab, n - 1)


def test_labyrinth_config_ranges():
    lab = crete6()
    assert lab.config() == GameConfig(4, lab.max_degree + 1, 0)
