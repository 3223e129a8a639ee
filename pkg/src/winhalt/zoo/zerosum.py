"""Repeated zero-sum games and the one-third tail constant kappa.

``kappa_constant`` takes the payoff variance ``sigma2`` of the row player
when both players pick actions uniformly at random and returns
``kappa = sigma * z`` with ``P(N(0, 1) > z) = 1/3``.  The repeated-game
environment halts after ``N`` rounds iff the row player's cumulative
payoff exceeds ``kappa * sqrt(N)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..engine import HALT, Agent, Environment, GameConfig, MCEstimate, binomial_estimate
from ..errors import ActionOutOfRange, DegenerateGame
from ..seeding import derive_seed
from .evenodds import BLOCK, _agent_strategy
from .normal import Z_TWO_THIRDS, normal_sf
from .strategies import Strategy, StrategyAgent, env_view

__all__ = ["StageGame", "KappaResult", "kappa_constant", "RepeatedZeroSumEnv",
           "repeated_zero_sum_env", "zero_sum_mc", "load_stage_game"]


@dataclass(frozen=True)
class StageGame:
    """Row player's payoffs; the column player receives their negation."""

    payoff: tuple[tuple[Fraction, ...], ...]
    name: str = ""

    def __init__(self, payoff, name: str = ""):
        rows = tuple(tuple(Fraction(x) for x in row) for row in payoff)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValueError("payoff must be a nonempty square matrix")
        object.__setattr__(self, "payoff", rows)
        object.__setattr__(self, "name", name)

    @property
    def n(self) -> int:
        return len(self.payoff)

    def scaled(self, c) -> "StageGame":
        c = Fraction(c)
        return StageGame([[c * x for x in row] for row in self.payoff], self.name)

    def relabeled(self, perm) -> "StageGame":
        """Apply the same action permutation to both players."""
        return StageGame([[self.payoff[perm[i]][perm[j]] for j in range(self.n)]
                          for i in range(self.n)], self.name)

    def to_json(self) -> dict:
        return {"name": self.name, "payoff": [[str(x) for x in row] for row in self.payoff]}

    @classmethod
    def from_json(cls, data: dict) -> "StageGame":
        return cls([[Fraction(x) for x in row] for row in data["payoff"]], data.get("name", ""))


def load_stage_game(path) -> StageGame:
    return StageGame.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class KappaResult:
    sigma2: Fraction
    kappa: float
    mean: Fraction

    @property
    def tail(self) -> float:
        """Upper-tail mass of N(0, sigma2) beyond kappa; 1/3 by construction."""
        return normal_sf(self.kappa / math.sqrt(self.sigma2))


def kappa_constant(game: StageGame) -> KappaResult:
    cells = [x for row in game.payoff for x in row]
    mean = sum(cells, Fraction(0)) / len(cells)
    sigma2 = sum(((x - mean) ** 2 for x in cells), Fraction(0)) / len(cells)
    if sigma2 == 0:
        raise DegenerateGame("payoff variance under uniform play is zero")
    return KappaResult(sigma2, math.sqrt(sigma2) * Z_TWO_THIRDS, mean)


class RepeatedZeroSumEnv(Environment):
    """The column player's move is the response; hidden state is A's running payoff."""

    def __init__(self, game: StageGame, opponent: Strategy, rounds: int,
                 threshold: float | None = None):
        if opponent.n != game.n:
            raise ActionOutOfRange(f"opponent has {opponent.n} moves, game has {game.n}")
        if rounds < 1:
            raise ValueError("need at least one round")
        self.game = game
        self.opponent = opponent
        self.rounds = rounds
        self.threshold = kappa_constant(game).kappa * math.sqrt(rounds) \
            if threshold is None else threshold
        self.kind = "deterministic" if opponent.deterministic else "probabilistic"
        self.memo_key = self._key if opponent.has_memo else None

    def _key(self, history):
        return self.opponent.memo_key(env_view(history))

    def config(self, master_seed: int = 0) -> GameConfig:
        return GameConfig(self.rounds, self.game.n, master_seed)

    def initial_state(self):
        return Fraction(0)

    def _step(self, total, history, action):
        if not 0 <= action < self.game.n:
            raise ActionOutOfRange(f"action {action} outside 0..{self.game.n - 1}")
        # B's move is fixed from the past before A's current action is looked at
        moves = self.opponent.distribution(env_view(history))
        last = len(history) + 1 == self.rounds
        out = []
        for b, p in moves.items():
            if not 0 <= b < self.game.n:
                raise ActionOutOfRange(f"opponent move {b} out of range")
            t2 = total + self.game.payoff[action][b]
            out.append((HALT if last and t2 > self.threshold else b, p, t2))
        return out


def repeated_zero_sum_env(game: StageGame, opponent: Strategy, rounds: int) -> RepeatedZeroSumEnv:
    return RepeatedZeroSumEnv(game, opponent, rounds)


def zero_sum_mc(env: RepeatedZeroSumEnv, agent: Agent, trials: int, seed: int = 0,
                block: int = BLOCK) -> MCEstimate:
    """Vectorised Monte-Carlo; same block seeding as ``even_odds_mc``.

    Payoffs are scaled to integers by their common denominator so running
    totals stay exact.
    """
    a_strat = _agent_strategy(agent) if not isinstance(agent, StrategyAgent) else agent.strategy
    if a_strat is None or not a_strat.vectorised or not env.opponent.vectorised:
        raise TypeError("zero_sum_mc needs vectorised strategies")
    if a_strat.n != env.game.n:
        raise ActionOutOfRange("agent strategy has the wrong number of moves")
    den = 1
    for row in env.game.payoff:
        for x in row:
            den = math.lcm(den, x.denominator)
    n = env.game.n
    flat = np.array([int(x * den) for row in env.game.payoff for x in row], dtype=np.int64)
    wins = 0
    for j, lo in enumerate(range(0, trials, block)):
        size = min(block, trials - lo)
        rng = np.random.default_rng(derive_seed(seed, j))
        a_state = a_strat.batch_init(size)
        b_state = env.opponent.batch_init(size)
        total = np.zeros(size, dtype=np.int64)
        for t in range(env.rounds):
            b = env.opponent.batch_move(b_state, t, rng)
            a = a_strat.batch_move(a_state, t, rng)
            total += np.take(flat, a.astype(np.intp) * n + b)
            env.opponent.batch_update(b_state, b, a)
            a_strat.batch_update(a_state, a, b)
        # total/den > threshold, decided exactly in rationals per distinct total
        for x, count in zip(*np.unique(total, return_counts=True)):
            if Fraction(int(x), den) > env.threshold:
                wins += int(count)
    return binomial_estimate(wins, trials)
