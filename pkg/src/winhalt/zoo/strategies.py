"""History-driven move rules for repeated two-player games.

A strategy sees a *view*: the list of ``(mine, theirs)`` move pairs from
earlier rounds, never the opponent's current move.  The same rule can drive
an environment (Even-Odds commitments, the zero-sum column player) or an
agent.

Besides the scalar ``distribution(view)`` each built-in strategy has a
vectorised form over a batch of independent games, used by the numpy
Monte-Carlo paths: ``batch_init(n)`` makes per-game state,
``batch_move(state, t, rng)`` returns the moves of round ``t`` and
``batch_update(state, mine, theirs)`` records a finished round.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from ..engine import Agent, History
from ..seeding import derive_seed

__all__ = [
    "Strategy", "Constant", "Cycle", "Copy", "Shift", "Majority", "Hashed",
    "BiasedCoin", "Uniform", "FunctionStrategy", "StrategyAgent", "as_agent",
    "env_view", "agent_view", "STRATEGIES", "make_strategy",
]

View = tuple[tuple[int, int], ...]

MOVE = np.int8  # dtype of vectorised moves
CHUNK = 64  # rounds of random moves drawn per call


def env_view(history: History) -> View:
    """An environment's own moves are the responses."""
    return tuple((r, a) for a, r in history)


def agent_view(history: History) -> View:
    return tuple(history)


class Strategy:
    deterministic = True
    vectorised = True
    has_memo = True

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one move")
        self.n = n

    def move(self, view: View) -> int:
        raise NotImplementedError

    def distribution(self, view: View) -> dict[int, Fraction]:
        return {self.move(view): Fraction(1)}

    def memo_key(self, view: View) -> Hashable:
        """Summary of ``view`` that fixes all future play (when ``has_memo``)."""
        return tuple(view)

    def __call__(self, view: View) -> int:
        return self.move(view)

    # vectorised form; state is a dict of arrays
    def batch_init(self, size: int) -> dict:
        return {}

    def batch_move(self, state: dict, t: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def batch_update(self, state: dict, mine: np.ndarray, theirs: np.ndarray) -> None:
        pass

    def describe(self) -> dict:
        return {"name": type(self).__name__.lower(), "n": self.n}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.describe().items() if k != "name")
        return f"{type(self).__name__}({args})"


class Constant(Strategy):
    def __init__(self, n: int, value: int = 0):
        super().__init__(n)
        if not 0 <= value < n:
            raise ValueError("constant move out of range")
        self.value = value

    def move(self, view):
        return self.value

    def memo_key(self, view):
        return ()

    def batch_init(self, size):
        return {"move": np.full(size, self.value, dtype=MOVE)}

    def batch_move(self, state, t, rng):
        return state["move"]

    def describe(self):
        return {"name": "constant", "n": self.n, "value": self.value}


class Cycle(Strategy):
    """Plays ``pattern[t mod len(pattern)]``."""

    def __init__(self, n: int, pattern: Sequence[int] = (0, 1)):
        super().__init__(n)
        self.pattern = tuple(int(x) % n for x in pattern)
        if not self.pattern:
            raise ValueError("empty cycle")

    def move(self, view):
        return self.pattern[len(view) % len(self.pattern)]

    def memo_key(self, view):
        return len(view) % len(self.pattern)

    def batch_init(self, size):
        return {"moves": {v: np.full(size, v, dtype=MOVE) for v in set(self.pattern)}}

    def batch_move(self, state, t, rng):
        return state["moves"][self.pattern[t % len(self.pattern)]]

    def describe(self):
        return {"name": "cycle", "n": self.n, "pattern": list(self.pattern)}


class Shift(Strategy):
    """Plays the opponent's previous move plus ``offset`` (``start`` first)."""

    def __init__(self, n: int, offset: int = 0, start: int = 0):
        super().__init__(n)
        self.offset = offset % n
        self.start = start % n

    def move(self, view):
        return (view[-1][1] + self.offset) % self.n if view else self.start

    def memo_key(self, view):
        return view[-1][1] if view else None

    def batch_init(self, size):
        return {"move": np.full(size, self.start, dtype=MOVE)}

    def batch_move(self, state, t, rng):
        return state["move"]

    def batch_update(self, state, mine, theirs):
        state["move"] = theirs if not self.offset else \
            ((theirs.astype(np.int16) + self.offset) % self.n).astype(MOVE)

    def describe(self):
        return {"name": "shift", "n": self.n, "offset": self.offset, "start": self.start}


class Copy(Shift):
    """Repeats the opponent's previous move."""

    def __init__(self, n: int, start: int = 0):
        super().__init__(n, 0, start)

    def describe(self):
        return {"name": "copy", "n": self.n, "start": self.start}


class Majority(Strategy):
    """Plays the opponent's most frequent past move plus ``offset``; ties go low."""

    def __init__(self, n: int, offset: int = 0):
        super().__init__(n)
        self.offset = offset % n

    def _counts(self, view):
        c = [0] * self.n
        for _, theirs in view:
            c[theirs] += 1
        return c

    def move(self, view):
        c = self._counts(view)
        return (c.index(max(c)) + self.offset) % self.n

    def memo_key(self, view):
        return tuple(self._counts(view))

    def batch_init(self, size):
        if self.n == 2:
            # ones minus zeros; the leader is 1 only when strictly ahead
            return {"diff": np.zeros(size, dtype=np.int32)}
        return {"counts": np.zeros((size, self.n), dtype=np.int32)}

    def batch_move(self, state, t, rng):
        if self.n == 2:
            lead = (state["diff"] > 0).view(MOVE)
            return lead ^ MOVE(self.offset) if self.offset else lead
        return ((np.argmax(state["counts"], axis=1) + self.offset) % self.n).astype(MOVE)

    def batch_update(self, state, mine, theirs):
        if self.n == 2:
            state["diff"] += 2 * theirs.astype(np.int32) - 1
        else:
            state["counts"][np.arange(len(theirs)), theirs] += 1

    def describe(self):
        return {"name": "majority", "n": self.n, "offset": self.offset}


class Hashed(Strategy):
    """Pseudo-random but deterministic: hashes (seed, round, opponent's last move)."""

    def __init__(self, n: int, seed: int = 0):
        super().__init__(n)
        self.seed = seed

    def move(self, view):
        last = view[-1][1] if view else self.n
        return derive_seed(self.seed, len(view), last) % self.n

    def memo_key(self, view):
        return view[-1][1] if view else None

    def batch_init(self, size):
        # index n stands for "no previous move"
        return {"last": np.full(size, self.n, dtype=MOVE)}

    def batch_move(self, state, t, rng):
        table = np.array([derive_seed(self.seed, t, last) % self.n for last in range(self.n + 1)],
                         dtype=MOVE)
        return table[state["last"]]

    def batch_update(self, state, mine, theirs):
        state["last"] = theirs

    def describe(self):
        return {"name": "hashed", "n": self.n, "seed": self.seed}


class BiasedCoin(Strategy):
    """History-free random play with fixed rational weights."""

    deterministic = False

    def __init__(self, n: int, weights: Sequence[Fraction] | None = None):
        super().__init__(n)
        w = [Fraction(1, n)] * n if weights is None else [Fraction(x) for x in weights]
        if len(w) != n or any(x < 0 for x in w) or sum(w) != 1:
            raise ValueError("weights must be n nonnegative rationals summing to 1")
        self.weights = tuple(w)

    def move(self, view):
        raise TypeError("a random strategy has no single move")

    def distribution(self, view):
        return {b: p for b, p in enumerate(self.weights) if p}

    def memo_key(self, view):
        return ()

    def batch_init(self, size):
        return {"size": size, "buf": None, "k": CHUNK}

    def batch_move(self, state, t, rng):
        # draws CHUNK rounds at a time; row k of the buffer is one round
        if state["k"] == CHUNK:
            shape = (CHUNK, state["size"])
            if all(x == self.weights[0] for x in self.weights):
                state["buf"] = rng.integers(0, self.n, size=shape, dtype=MOVE)
            else:
                cum = np.cumsum([float(x) for x in self.weights])[:-1]
                state["buf"] = np.searchsorted(cum, rng.random(shape), side="right").astype(MOVE)
            state["k"] = 0
        row = state["buf"][state["k"]]
        state["k"] += 1
        return row

    def describe(self):
        return {"name": "biased", "n": self.n, "weights": [str(x) for x in self.weights]}


class Uniform(BiasedCoin):
    def __init__(self, n: int):
        super().__init__(n)

    def describe(self):
        return {"name": "uniform", "n": self.n}


class FunctionStrategy(Strategy):
    """Wraps ``view -> move`` or ``view -> {move: prob}``; no vectorised form."""

    vectorised = False

    def __init__(self, n: int, fn: Callable, deterministic: bool = True, key=None):
        super().__init__(n)
        self.fn = fn
        self.deterministic = deterministic
        self._key = key
        self.has_memo = key is not None

    def move(self, view):
        return self.fn(view)

    def distribution(self, view):
        if self.deterministic:
            return {self.fn(view): Fraction(1)}
        return dict(self.fn(view))

    def memo_key(self, view):
        return None if self._key is None else self._key(view)


class StrategyAgent(Agent):
    """A strategy playing the agent's side."""

    def __init__(self, strategy: Strategy):
        self.strategy = strategy
        self.kind = "deterministic" if strategy.deterministic else "probabilistic"
        self.memo_key = self._key if strategy.has_memo else None

    def _key(self, history):
        return self.strategy.memo_key(agent_view(history))

    def act(self, history):
        return self.strategy.move(agent_view(history))

    def _raw(self, history):
        return self.strategy.distribution(agent_view(history))


def as_agent(strategy: Strategy) -> StrategyAgent:
    return StrategyAgent(strategy)


STRATEGIES = {
    "constant": Constant, "cycle": Cycle, "copy": Copy, "shift": Shift,
    "majority": Majority, "hashed": Hashed, "biased": BiasedCoin, "uniform": Uniform,
}


def make_strategy(spec: dict, n: int) -> Strategy:
    """Build from ``{"name": ..., **params}`` as produced by ``describe``."""
    spec = dict(spec)
    name = spec.pop("name")
    spec.pop("n", None)
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}")
    if "weights" in spec:
        spec["weights"] = [Fraction(w) for w in spec["weights"]]
    return STRATEGIES[name](n, **spec)
