"""Win/No-Halt game model: histories, agents, environments, play and evaluation.

A round is one agent action followed by one environment response.  The
environment either answers with a natural number or halts; halting is a win
for the agent.  Games are truncated at ``GameConfig.horizon`` rounds and a
game still running at the horizon counts as a loss.

All probabilities are ``fractions.Fraction``.  Floats only appear in
Monte-Carlo estimates.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import BudgetExceeded, InvalidDistribution, InvalidResponse
from .seeding import derive_seed, draw, make_rng

__all__ = [
    "HALT", "Halt", "History", "Response", "GameConfig", "Outcome", "MCEstimate",
    "Agent", "DeterministicAgent", "ProbabilisticAgent", "SemiAgent", "uniform_agent",
    "Environment", "DeterministicEnvironment", "ProbabilisticEnvironment",
    "StatefulEnvironment", "play", "exact_win_prob", "mc_win_prob",
    "semi_monotonicity_violations", "enumerate_histories",
]

DEFAULT_NODE_BUDGET = 2_000_000


class Halt:
    """The halting response.  A singleton; compares below every number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HALT"

    def __reduce__(self):
        return (Halt, ())


HALT = Halt()

Response = Union[int, Halt]
History = tuple[tuple[int, int], ...]


def response_key(r: Response) -> int:
    return -1 if r is HALT else r


@dataclass(frozen=True)
class GameConfig:
    horizon: int
    max_action: int
    master_seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.max_action < 1:
            raise ValueError(f"max_action must be >= 1, got {self.max_action}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit natural")


@dataclass(frozen=True)
class Outcome:
    won: bool
    round: int | None
    transcript: tuple[tuple[int, Response], ...]
    frozen: bool = False


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    ci_halfwidth: float
    wins: int
    trials: int

    def __iter__(self):
        # unpacks as (estimate, ci_halfwidth)
        yield self.estimate
        yield self.ci_halfwidth


def _as_fraction(p, where: str) -> Fraction:
    if isinstance(p, bool) or not isinstance(p, (int, Fraction)):
        raise InvalidDistribution(f"{where}: probability {p!r} is not an exact rational")
    if type(p) is not Fraction:
        p = Fraction(p)
    if p < 0:
        raise InvalidDistribution(f"{where}: negative probability {p}")
    return p


def _normalize(raw, where: str) -> list[tuple[object, Fraction]]:
    items = raw.items() if isinstance(raw, Mapping) else raw
    out = []
    seen = set()
    for value, p in items:
        if value in seen:
            raise InvalidDistribution(f"{where}: duplicate entry {value!r}")
        seen.add(value)
        out.append((value, _as_fraction(p, where)))
    return out


# --------------------------------------------------------------------------
# agents


class Agent:
    """Base class for agent behaviours.

    Subclasses implement ``_raw(history)`` returning action -> probability.
    ``distribution`` validates it once per history and caches the result.

    ``memo_key``, when set, maps a history to a hashable summary that fully
    determines the agent's future behaviour; ``exact_win_prob`` uses it to
    merge equivalent nodes.  Keys are only compared between histories of the
    same length, so the round index never needs to be part of them.
    """

    kind = "probabilistic"
    memo_key: Callable[[History], Hashable] | None = None
    _cache_limit = 1 << 16

    def _raw(self, history: History):
        raise NotImplementedError

    def distribution(self, history: History) -> tuple[tuple[int, Fraction], ...]:
        cache = self.__dict__.setdefault("_dist_cache", {})
        hit = cache.get(history)
        if hit is not None:
            return hit
        entries = _normalize(self._raw(history), f"agent at {history}")
        for a, _ in entries:
            if isinstance(a, bool) or not isinstance(a, int) or a < 0:
                raise InvalidDistribution(f"agent at {history}: invalid action {a!r}")
        entries.sort(key=lambda e: e[0])
        total = sum((p for _, p in entries), Fraction(0))
        if self.kind == "semi":
            if total > 1:
                raise InvalidDistribution(f"semi-agent mass {total} > 1 at {history}")
        elif total != 1:
            raise InvalidDistribution(f"{self.kind} agent mass {total} != 1 at {history}")
        dist = tuple(entries)
        if len(cache) >= self._cache_limit:
            cache.clear()
        cache[history] = dist
        return dist

    def probability(self, history: History, action: int) -> Fraction:
        for a, p in self.distribution(history):
            if a == action:
                return p
        return Fraction(0)

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_dist_cache", None)
        return state


class DeterministicAgent(Agent):
    """Agent following a fixed policy ``history -> action``."""

    kind = "deterministic"

    def __init__(self, policy: Callable[[History], int], memo_key=None):
        self.policy = policy
        self.memo_key = memo_key

    def act(self, history: History) -> int:
        return self.policy(history)

    def _raw(self, history):
        return {self.act(history): Fraction(1)}


class ProbabilisticAgent(Agent):
    kind = "probabilistic"

    def __init__(self, policy: Callable[[History], Mapping[int, Fraction]], memo_key=None):
        self.policy = policy
        self.memo_key = memo_key

    def _raw(self, history):
        return self.policy(history)


class SemiAgent(ProbabilisticAgent):
    """Agent whose action masses may sum below 1; the deficit freezes it."""

    kind = "semi"


class _Uniform:
    def __init__(self, k: int):
        self.k = k

    def __call__(self, history):
        return {a: Fraction(1, self.k) for a in range(self.k)}


def _constant_key(history):
    return ()


def uniform_agent(k: int) -> ProbabilisticAgent:
    """Plays each of ``0..k-1`` with probability ``1/k`` at every history."""
    return ProbabilisticAgent(_Uniform(k), memo_key=_constant_key)


# --------------------------------------------------------------------------
# environments


class Environment:
    """Base class for environment behaviours.

    Environments are kernels over a hidden state: ``transitions(state,
    history, action)`` lists ``(response, probability, next_state)``.  From
    the agent's side this is the same as a function of the visible history,
    because the hidden state is marginalised out.  States must be hashable.

    ``memo_key``, when set, maps a history to a summary that together with the
    hidden state determines all future transitions.
    """

    kind = "probabilistic"
    memo_key: Callable[[History], Hashable] | None = None
    _cache_limit = 1 << 16

    def initial_state(self) -> Hashable:
        return None

    def _step(self, state, history: History, action: int):
        raise NotImplementedError

    def transitions(self, state, history: History, action: int):
        cache = self.__dict__.setdefault("_trans_cache", {})
        key = (state, history, action)
        hit = cache.get(key)
        if hit is not None:
            return hit
        out = self._transitions(state, history, action)
        if len(cache) >= self._cache_limit:
            cache.clear()
        cache[key] = out
        return out

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_trans_cache", None)
        return state

    def _transitions(self, state, history: History, action: int):
        raw = self._step(state, history, action)
        merged: dict = {}
        order = []
        for entry in raw:
            r, p, s2 = entry
            if not (r is HALT or (isinstance(r, int) and not isinstance(r, bool) and r >= 0)):
                raise InvalidResponse(f"env at {history}, action {action}: bad response {r!r}")
            p = _as_fraction(p, f"env at {history}, action {action}")
            key = (r, s2)
            if key not in merged:
                order.append(key)
                merged[key] = Fraction(0)
            merged[key] += p
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise InvalidDistribution(
                f"env response mass {total} != 1 at {history}, action {action}")
        return tuple((r, merged[(r, s2)], s2) for (r, s2) in order)

    def response_distribution(self, history: History, action: int) -> dict:
        """Marginal response probabilities given the visible history."""
        belief = replay_belief(self, history)
        out: dict = {}
        total = sum(belief.values(), Fraction(0))
        if total == 0:
            return out
        for s, m in belief.items():
            for r, q, _ in self.transitions(s, history, action):
                out[r] = out.get(r, Fraction(0)) + m * q / total
        return out


class DeterministicEnvironment(Environment):
    kind = "deterministic"

    def __init__(self, respond: Callable[[History, int], Response], memo_key=None):
        self.respond = respond
        self.memo_key = memo_key

    def _step(self, state, history, action):
        return [(self.respond(history, action), Fraction(1), None)]


class ProbabilisticEnvironment(Environment):
    def __init__(self, respond: Callable[[History, int], Mapping[Response, Fraction]],
                 memo_key=None):
        self.respond = respond
        self.memo_key = memo_key

    def _step(self, state, history, action):
        dist = self.respond(history, action)
        items = dist.items() if isinstance(dist, Mapping) else dist
        return [(r, p, None) for r, p in items]


class StatefulEnvironment(Environment):
    """Environment given directly as a hidden-state kernel."""

    def __init__(self, initial, step, kind: str = "probabilistic", memo_key=None):
        self._initial = initial
        self.step = step
        self.kind = kind
        self.memo_key = memo_key

    def initial_state(self):
        return self._initial

    def _step(self, state, history, action):
        return self.step(state, history, action)


def replay_belief(env: Environment, history: History) -> dict:
    """Joint mass of hidden states consistent with the responses in ``history``."""
    belief = {env.initial_state(): Fraction(1)}
    prefix: History = ()
    for a, r in history:
        nxt: dict = {}
        for s, m in belief.items():
            for r2, q, s2 in env.transitions(s, prefix, a):
                if r2 == r and r2 is not HALT and q:
                    nxt[s2] = nxt.get(s2, Fraction(0)) + m * q
        belief = nxt
        prefix = prefix + ((a, r),)
    return belief


def _check_action(a: int, cfg: GameConfig, history) -> None:
    if a >= cfg.max_action:
        raise InvalidDistribution(f"action {a} >= max_action {cfg.max_action} at {history}")


def _check_response(r: Response, cfg: GameConfig, history) -> None:
    if r is not HALT and r >= cfg.max_action:
        raise InvalidResponse(f"response {r} >= max_action {cfg.max_action} after {history}")


# --------------------------------------------------------------------------
# play


def play(agent: Agent, env: Environment, cfg: GameConfig, seed: int) -> Outcome:
    """Play one episode.  Equal ``seed`` gives an identical outcome."""
    rng = make_rng(seed)
    state = env.initial_state()
    history: History = ()
    for t in range(1, cfg.horizon + 1):
        dist = agent.distribution(history)
        a = draw(rng, dist)
        if a is None:
            return Outcome(False, None, history, frozen=True)
        _check_action(a, cfg, history)
        trans = env.transitions(state, history, a)
        pick = draw(rng, [((r, s2), q) for r, q, s2 in trans])
        r, state = pick
        _check_response(r, cfg, history)
        if r is HALT:
            return Outcome(True, t, history + ((a, HALT),))
        history = history + ((a, r),)
    return Outcome(False, None, history)


# --------------------------------------------------------------------------
# exact evaluation


def exact_win_prob(agent: Agent, env: Environment, cfg: GameConfig,
                   node_budget: int = DEFAULT_NODE_BUDGET) -> Fraction:
    """Exact probability that ``env`` halts within the horizon.

    Expands every agent and environment branch.  Nodes are visible
    histories carrying a belief over hidden env states; when both sides
    provide ``memo_key`` the expansion merges nodes with equal keys.
    """
    if agent.memo_key is not None and env.memo_key is not None:
        return _exact_merged(agent, env, cfg, node_budget)
    total = Fraction(0)
    frontier = [((), Fraction(1), {env.initial_state(): Fraction(1)})]
    nodes = 0
    for _ in range(cfg.horizon):
        nxt = []
        for history, amass, belief in frontier:
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceeded(f"exact_win_prob exceeded {node_budget} nodes")
            for a, pa in agent.distribution(history):
                if not pa:
                    continue
                _check_action(a, cfg, history)
                for r, b2 in _branch(env, belief, history, a, cfg):
                    mass = amass * pa
                    if r is HALT:
                        total += mass * sum(b2.values())
                    else:
                        nxt.append((history + ((a, r),), mass, b2))
        frontier = nxt
    return total


def _branch(env: Environment, belief: dict, history: History, a: int, cfg: GameConfig):
    """Group env transitions from ``belief`` by response, sorted by response."""
    by_resp: dict = {}
    for s, m in belief.items():
        for r, q, s2 in env.transitions(s, history, a):
            if not q:
                continue
            _check_response(r, cfg, history)
            b = by_resp.setdefault(r, {})
            b[s2] = b.get(s2, Fraction(0)) + m * q
    return sorted(by_resp.items(), key=lambda kv: response_key(kv[0]))


def _exact_merged(agent, env, cfg, node_budget) -> Fraction:
    total = Fraction(0)
    init = env.initial_state()
    frontier = {(agent.memo_key(()), env.memo_key(()), init): [(), Fraction(1)]}
    nodes = 0
    for _ in range(cfg.horizon):
        nxt: dict = {}
        for (_, _, state), (history, mass) in frontier.items():
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceeded(f"exact_win_prob exceeded {node_budget} nodes")
            for a, pa in agent.distribution(history):
                if not pa:
                    continue
                _check_action(a, cfg, history)
                for r, q, s2 in env.transitions(state, history, a):
                    if not q:
                        continue
                    _check_response(r, cfg, history)
                    m = mass * pa * q
                    if r is HALT:
                        total += m
                        continue
                    h2 = history + ((a, r),)
                    key = (agent.memo_key(h2), env.memo_key(h2), s2)
                    slot = nxt.get(key)
                    if slot is None:
                        nxt[key] = [h2, m]
                    else:
                        slot[1] += m
        frontier = nxt
    return total


# --------------------------------------------------------------------------
# Monte Carlo


def _run_chunk(agent, env, cfg, start, stop) -> int:
    wins = 0
    for i in range(start, stop):
        if play(agent, env, cfg, derive_seed(cfg.master_seed, i)).won:
            wins += 1
    return wins


def mc_win_prob(agent: Agent, env: Environment, cfg: GameConfig, trials: int,
                jobs: int = 1, chunk: int = 1000) -> MCEstimate:
    """Monte-Carlo win rate with a 95% normal-approximation half-width.

    Trial ``i`` is played with seed ``derive_seed(cfg.master_seed, i)``, so
    the estimate does not depend on ``jobs``.  ``jobs > 1`` needs picklable
    behaviours.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    bounds = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    if jobs > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_chunk, agent, env, cfg, lo, hi) for lo, hi in bounds]
            wins = sum(f.result() for f in futures)
    else:
        wins = sum(_run_chunk(agent, env, cfg, lo, hi) for lo, hi in bounds)
    return binomial_estimate(wins, trials)


def binomial_estimate(wins: int, trials: int) -> MCEstimate:
    p = wins / trials
    return MCEstimate(p, 1.96 * math.sqrt(p * (1 - p) / trials), wins, trials)


# --------------------------------------------------------------------------
# semi-agent checks


def enumerate_histories(max_action: int, depth: int,
                        responses: Sequence[int] | None = None) -> Iterator[History]:
    """All histories of length < ``depth`` with actions and responses in range."""
    responses = range(max_action) if responses is None else responses
    layer: list[History] = [()]
    for _ in range(depth):
        yield from layer
        layer = [h + ((a, r),) for h in layer for a in range(max_action) for r in responses]


def semi_monotonicity_violations(agent: Agent, cfg: GameConfig,
                                 responses: Iterable[int] | None = None) -> list:
    """Histories where successor path mass exceeds the parent action mass.

    Path mass of an action sequence is the product of conditional masses,
    so for a well-formed semi-agent this list is always empty.
    """
    responses = list(range(cfg.max_action) if responses is None else responses)
    bad = []
    frontier = [((), Fraction(1))]
    for _ in range(cfg.horizon - 1):
        nxt = []
        for h, mass in frontier:
            for a, pa in agent.distribution(h):
                parent = mass * pa
                for e in responses:
                    h2 = h + ((a, e),)
                    child = sum((mass * pa * pb for _, pb in agent.distribution(h2)), Fraction(0))
                    if child > parent:
                        bad.append((h2, child, parent))
                    nxt.append((h2, parent))
        frontier = nxt
    return bad
