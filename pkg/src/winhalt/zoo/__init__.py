"""Concrete game families: labyrinth, Even-Odds and repeated zero-sum games."""
from .evenodds import (EvenOddsEnv, EvenOddsSpec, even_odds_env, even_odds_mc, even_odds_tail,
                       rademacher_distribution, score_distribution)
from .labyrinth import (IdentityMinotaur, Labyrinth, LabyrinthEnv, RotatingMinotaur,
                        TricksterMinotaur, is_bipartite, labyrinth_env, load_labyrinth,
                        mixing_distance, mixing_time, occupancy, parse_labyrinth,
                        stationary_distribution, uniform_hero)
from .normal import Z_TWO_THIRDS, erf, normal_cdf, normal_quantile, normal_sf
from .strategies import make_strategy
from .zerosum import (KappaResult, StageGame, kappa_constant, load_stage_game,
                      repeated_zero_sum_env, zero_sum_mc)

__all__ = [
    "EvenOddsEnv", "EvenOddsSpec", "even_odds_env", "even_odds_mc", "even_odds_tail",
    "rademacher_distribution", "score_distribution",
    "IdentityMinotaur", "Labyrinth", "LabyrinthEnv", "RotatingMinotaur", "TricksterMinotaur",
    "is_bipartite", "labyrinth_env", "load_labyrinth", "mixing_distance", "mixing_time",
    "occupancy", "parse_labyrinth", "stationary_distribution", "uniform_hero",
    "Z_TWO_THIRDS", "erf", "normal_cdf", "normal_quantile", "normal_sf", "make_strategy",
    "KappaResult", "StageGame", "kappa_constant", "load_stage_game",
    "repeated_zero_sum_env", "zero_sum_mc",
]
