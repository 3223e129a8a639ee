"""Even-Odds: the env commits a bit, the agent guesses, mismatches score.

Each round the environment fixes ``e_i`` from the earlier rounds only, the
agent plays ``b_i`` and scores +1 if ``e_i xor b_i = 1`` and -1 otherwise.
The env answers with ``e_i``.  After round ``N`` it halts iff the score
reached ``score_target`` (default ``ceil(sqrt(N))``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..engine import (HALT, Agent, Environment, GameConfig, MCEstimate, ProbabilisticAgent,
                      _Uniform, binomial_estimate)
from ..errors import ActionOutOfRange
from ..seeding import derive_seed
from .strategies import Strategy, StrategyAgent, Uniform, env_view

__all__ = [
    "EvenOddsSpec", "EvenOddsEnv", "even_odds_env", "even_odds_tail", "rademacher_tail",
    "score_distribution", "rademacher_distribution", "even_odds_mc",
]

BLOCK = 10_000


@dataclass(frozen=True)
class EvenOddsSpec:
    rounds: int
    env_strategy: Strategy
    score_target: int | None = None

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("Even-Odds needs at least one round")
        if self.env_strategy.n != 2:
            raise ValueError("Even-Odds commitments are bits")

    @property
    def target(self) -> int:
        return math.isqrt(self.rounds - 1) + 1 if self.score_target is None else self.score_target

    def config(self, master_seed: int = 0) -> GameConfig:
        return GameConfig(horizon=self.rounds, max_action=2, master_seed=master_seed)


class EvenOddsEnv(Environment):
    """Hidden state is the running score."""

    def __init__(self, spec: EvenOddsSpec):
        self.spec = spec
        self.kind = "deterministic" if spec.env_strategy.deterministic else "probabilistic"
        self.memo_key = self._key if spec.env_strategy.has_memo else None

    def _key(self, history):
        return self.spec.env_strategy.memo_key(env_view(history))

    def initial_state(self):
        return 0

    def commit(self, history):
        # the current action is deliberately not an argument
        return self.spec.env_strategy.distribution(env_view(history))

    def _step(self, score, history, action):
        if action not in (0, 1):
            raise ActionOutOfRange(f"Even-Odds action {action} is not a bit")
        last = len(history) + 1 == self.spec.rounds
        out = []
        for e, p in self.commit(history).items():
            s2 = score + (1 if e ^ action else -1)
            if last:
                out.append((HALT if s2 >= self.spec.target else e, p, s2))
            else:
                out.append((e, p, s2))
        return out


def even_odds_env(spec: EvenOddsSpec) -> EvenOddsEnv:
    return EvenOddsEnv(spec)


def rademacher_tail(n: int, target: int) -> Fraction:
    """P(sum of n fair +-1 steps >= target), exactly."""
    # S = 2K - n with K ~ Bin(n, 1/2)
    k_min = max(0, -(-(n + target) // 2))
    return Fraction(sum(math.comb(n, k) for k in range(k_min, n + 1)), 2**n)


even_odds_tail = rademacher_tail


def rademacher_distribution(n: int) -> dict[int, Fraction]:
    return {2 * k - n: Fraction(math.comb(n, k), 2**n) for k in range(n + 1)}


def score_distribution(spec: EvenOddsSpec, agent: Agent | None = None) -> dict[int, Fraction]:
    """Final score law by explicit enumeration of every agent bit string.

    ``agent`` defaults to the uniform one.  The env strategy must be
    deterministic.  Costs ``2^N`` plays, so keep ``N`` small.
    """
    if not spec.env_strategy.deterministic:
        raise ValueError("enumeration needs a deterministic env strategy")
    strat = spec.env_strategy
    out: dict[int, Fraction] = {}
    for bits in itertools.product((0, 1), repeat=spec.rounds):
        history = ()
        prob = Fraction(1)
        score = 0
        for b in bits:
            if agent is not None:
                prob *= agent.probability(history, b)
                if not prob:
                    break
            e = strat.move(env_view(history))
            score += 1 if e ^ b else -1
            history = history + ((b, e),)
        else:
            if agent is None:
                prob = Fraction(1, 2**spec.rounds)
            out[score] = out.get(score, Fraction(0)) + prob
    return {k: out[k] for k in sorted(out)}


def _agent_strategy(agent) -> Strategy | None:
    if isinstance(agent, StrategyAgent) and agent.strategy.vectorised:
        return agent.strategy
    if isinstance(agent, ProbabilisticAgent) and isinstance(agent.policy, _Uniform):
        return Uniform(agent.policy.k)
    return None


def even_odds_mc(spec: EvenOddsSpec, agent, trials: int, seed: int = 0,
                 block: int = BLOCK) -> MCEstimate:
    """Vectorised Monte-Carlo win rate.

    Trials run in blocks of ``block`` games; block ``j`` draws from
    ``numpy.random.default_rng(derive_seed(seed, j))``.  Needs a vectorised
    env strategy and an agent that is uniform or a vectorised strategy.
    """
    a_strat = _agent_strategy(agent)
    e_strat = spec.env_strategy
    if a_strat is None or not e_strat.vectorised:
        raise TypeError("even_odds_mc needs vectorised strategies")
    if a_strat.n != 2:
        raise ActionOutOfRange("Even-Odds agents play bits")
    wins = 0
    for j, lo in enumerate(range(0, trials, block)):
        size = min(block, trials - lo)
        rng = np.random.default_rng(derive_seed(seed, j))
        a_state = a_strat.batch_init(size)
        e_state = e_strat.batch_init(size)
        hits = np.zeros(size, dtype=np.int32)
        for t in range(spec.rounds):
            e = e_strat.batch_move(e_state, t, rng)
            b = a_strat.batch_move(a_state, t, rng)
            hits += e ^ b
            e_strat.batch_update(e_state, e, b)
            a_strat.batch_update(a_state, b, e)
        # score = hits - misses
        wins += int(np.count_nonzero(2 * hits - spec.rounds >= spec.target))
    return binomial_estimate(wins, trials)
