"""Seeded random agents, environments and fragments for property suites.

Every random behaviour is a pure function of ``(seed, history)``: its
distribution at ``h`` comes from a generator seeded with
``derive_seed(seed, *history_path(h))``.  Weights are small integers so all
probabilities stay exact rationals with small denominators.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .engine import HALT, Agent, Environment, GameConfig, History, exact_win_prob
from .fragments import GameFragment
from .seeding import derive_seed, history_path, make_rng

__all__ = ["RandomAgent", "RandomEnvironment", "RandomTable", "random_game",
           "random_fragment", "RandomGame"]


def _rng(seed: int, *path: int) -> random.Random:
    return make_rng(derive_seed(seed, *path))


def _weights(rng: random.Random, n: int, max_w: int = 3) -> list[int]:
    w = [rng.randint(0, max_w) for _ in range(n)]
    if not any(w):
        w[rng.randrange(n)] = 1
    return w


class RandomAgent(Agent):
    """Random action law at each history.  ``kind`` picks full, semi or point laws."""

    def __init__(self, max_action: int, seed: int, kind: str = "probabilistic"):
        if kind not in ("probabilistic", "semi", "deterministic"):
            raise ValueError(kind)
        self.max_action = max_action
        self.seed = seed
        self.kind = kind

    def act(self, history: History) -> int:
        return _rng(self.seed, 1, *history_path(history)).randrange(self.max_action)

    def _raw(self, history):
        if self.kind == "deterministic":
            return {self.act(history): Fraction(1)}
        rng = _rng(self.seed, 0, *history_path(history))
        w = _weights(rng, self.max_action)
        total = sum(w)
        scale = Fraction(rng.randint(1, 4), 4) if self.kind == "semi" else Fraction(1)
        return {a: scale * Fraction(x, total) for a, x in enumerate(w) if x}


class RandomTable(Agent):
    """A random deterministic agent (``act`` is the point of its law)."""

    kind = "deterministic"

    def __init__(self, max_action: int, seed: int):
        self.max_action = max_action
        self.seed = seed

    def act(self, history):
        return _rng(self.seed, 2, *history_path(history)).randrange(self.max_action)

    def _raw(self, history):
        return {self.act(history): Fraction(1)}


class RandomEnvironment(Environment):
    """Random response law (numbers and HALT) per ``(history, action)``.

    ``halt_bias`` is the largest integer weight HALT can draw; numbers draw
    up to 3.
    """

    def __init__(self, max_action: int, seed: int, deterministic: bool = False,
                 halt_bias: int = 2, responses: int | None = None):
        self.max_action = max_action
        self.seed = seed
        self.kind = "deterministic" if deterministic else "probabilistic"
        self.halt_bias = halt_bias
        self.responses = max_action if responses is None else responses

    def _step(self, state, history, action):
        rng = _rng(self.seed, 3, action, *history_path(history))
        options = [HALT] + list(range(self.responses))
        if self.kind == "deterministic":
            w = [self.halt_bias] + [3] * self.responses
            r = rng.choices(options, weights=w)[0]
            return [(r, Fraction(1), None)]
        w = [rng.randint(0, self.halt_bias)] + [rng.randint(0, 3) for _ in range(self.responses)]
        if not any(w):
            w[0] = 1
        total = sum(w)
        return [(r, Fraction(x, total), None) for r, x in zip(options, w) if x]


@dataclass
class RandomGame:
    agent: Agent
    env: Environment
    cfg: GameConfig
    seed: int

    @property
    def win_prob(self) -> Fraction:
        return exact_win_prob(self.agent, self.env, self.cfg)


def random_game(seed: int, max_action: int | None = None, horizon: int | None = None,
                agent_kind: str | None = None, env_deterministic: bool | None = None) -> RandomGame:
    """A small game; unspecified sizes and kinds are drawn from ``seed``."""
    rng = _rng(seed, 99)
    k = max_action if max_action is not None else rng.randint(1, 3)
    t = horizon if horizon is not None else rng.randint(1, 4)
    kind = agent_kind or rng.choice(["probabilistic", "probabilistic", "semi", "deterministic"])
    det = env_deterministic if env_deterministic is not None else rng.random() < 0.3
    agent = RandomAgent(k, derive_seed(seed, 1), kind)
    env = RandomEnvironment(k, derive_seed(seed, 2), deterministic=det)
    return RandomGame(agent, env, GameConfig(t, k), seed)


def random_fragment(seed: int, max_paths: int = 20, max_nodes: int = 8,
                    max_action: int = 3, depth: int = 3) -> GameFragment:
    """Random fragment with at most ``max_paths`` paths and ``max_nodes`` decision nodes.

    Env weights are random rationals; siblings under one action sum to at
    most 1.
    """
    rng = _rng(seed, 7)
    paths: list = []
    nodes = [1]

    def weights(n: int) -> list[Fraction]:
        den = rng.choice([2, 3, 4, 6, 8])
        raw = [rng.randint(0, den) for _ in range(n)]
        while sum(raw) > den:
            i = rng.randrange(n)
            raw[i] = max(0, raw[i] - 1)
        return [Fraction(x, den) for x in raw]

    def grow(prefix: tuple, level: int):
        actions = rng.sample(range(max_action), rng.randint(1, max_action))
        for a in sorted(actions):
            if len(paths) >= max_paths:
                return
            can_branch = level + 1 < depth and nodes[0] < max_nodes
            responses = [HALT]
            if can_branch:
                responses += rng.sample(range(max_action), rng.randint(0, 2))
            ws = weights(len(responses))
            for r, w in zip(responses, ws):
                if len(paths) >= max_paths:
                    return
                if r is HALT:
                    paths.append(prefix + ((a, HALT, w),))
                elif nodes[0] < max_nodes:
                    nodes[0] += 1
                    grow(prefix + ((a, r, w),), level + 1)

    grow((), 0)
    return GameFragment.from_paths(paths)
