"""Turning a probabilistic winner into deterministic ones.

``derandomize`` extracts a fragment ``F`` on which the agent has weight above
``2^-s``, draws ``N = d * 2^(2s+3)`` deterministic policy tables from the
product measure the agent induces on the fragment's decision histories, and
returns the first table whose weight on ``F`` exceeds ``2^-(s+1)``.  The
expected table weight equals the agent's weight, and Hoeffding's inequality
bounds the chance that the sample mean drops to half of it by
``2 exp(-N 2^(-2s-2))``.

``partial_derandomize`` goes the other way: it mixes a set of deterministic
agents into a single probabilistic one whose win probability is the members'
average.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .engine import Agent, Environment, GameConfig, History, exact_win_prob
from .errors import BudgetExceeded, NoWinnerFound, ShapeMismatch
from .fragments import FragmentStats, GameFragment, extract_fragment, rational_str, weight
from .seeding import derive_seed, make_rng

__all__ = [
    "FREEZE_ACTION", "DeterministicPolicyTable", "SampleRecord", "DerandomizationReport",
    "hoeffding_sample_count", "fail_bound", "sample_policy", "expected_weight_oracle",
    "derandomize", "derandomize_with_retry", "partial_derandomize", "MixtureAgent",
]

U64_MAX = 2**64 - 1

# table entry for the sink action a semi-agent's freeze mass is assigned to
FREEZE_ACTION = None


def hoeffding_sample_count(s: int, d: int) -> int:
    if s < 0 or d < 1:
        raise ValueError("need s >= 0 and d >= 1")
    n = d * 2 ** (2 * s + 3)
    if n > U64_MAX:
        raise OverflowError(f"sample count d*2^(2s+3) = {n} exceeds 64 bits")
    return n


def fail_bound(s: int, n: int) -> float:
    """Hoeffding bound on P(mean table weight <= 2^-(s+1))."""
    return 2.0 * math.exp(-n * 2.0 ** (-2 * s - 2))


class DeterministicPolicyTable(Agent):
    """Finite map from histories to actions; ``default`` everywhere else.

    An entry of ``FREEZE_ACTION`` (``None``) makes the table freeze there,
    which turns it into a deterministic semi-agent.
    """

    def __init__(self, entries, default: int = 0):
        items = sorted(dict(entries).items(), key=lambda kv: (len(kv[0]), kv[0]))
        self.entries = dict(items)
        self.default = default
        self.kind = "semi" if any(v is FREEZE_ACTION for v in self.entries.values()) \
            else "deterministic"

    @property
    def shape(self) -> tuple[History, ...]:
        return tuple(self.entries)

    def act(self, history: History):
        return self.entries.get(history, self.default)

    def _raw(self, history):
        a = self.act(history)
        return {} if a is FREEZE_ACTION else {a: Fraction(1)}

    def canonical(self) -> str:
        rows = [[[list(p) for p in h], a] for h, a in self.entries.items()]
        return json.dumps({"default": self.default, "entries": rows}, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_json(self) -> dict:
        return json.loads(self.canonical())

    @classmethod
    def from_json(cls, data: dict) -> "DeterministicPolicyTable":
        entries = {tuple(tuple(p) for p in h): a for h, a in data["entries"]}
        return cls(entries, data.get("default", 0))

    def __eq__(self, other):
        return (isinstance(other, DeterministicPolicyTable)
                and self.entries == other.entries and self.default == other.default)

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return f"DeterministicPolicyTable({len(self.entries)} entries, default={self.default})"


class _Sampler:
    """Per-history integer cumulative tables for fast exact table draws."""

    def __init__(self, agent: Agent, histories: Sequence[History]):
        self.histories = tuple(histories)
        self.tables = []
        for h in self.histories:
            dist = [(a, p) for a, p in agent.distribution(h) if p]
            den = 1
            for _, p in dist:
                den = math.lcm(den, p.denominator)
            cum, acts, acc = [], [], 0
            for a, p in dist:
                acc += p.numerator * (den // p.denominator)
                cum.append(acc)
                acts.append(a)
            if acc < den:
                cum.append(den)
                acts.append(FREEZE_ACTION)
            self.tables.append((den, cum, acts))

    def draw_actions(self, seed: int) -> tuple:
        rng = make_rng(seed)
        return tuple(acts[bisect_right(cum, rng.randrange(den))]
                     for den, cum, acts in self.tables)

    def draw(self, seed: int) -> DeterministicPolicyTable:
        return DeterministicPolicyTable(dict(zip(self.histories, self.draw_actions(seed))))


class _CompiledFragment:
    """Fragment flattened for weighing many action vectors over the same shape.

    ``nodes[i]`` maps an action to its list of ``(env_weight, child_index)``
    with ``-1`` for a HALT leaf; node ``i`` sits at ``histories[i]``.
    """

    def __init__(self, fragment: GameFragment, histories: Sequence[History]):
        index = {h: i for i, h in enumerate(histories)}
        self.nodes: list[dict] = [{} for _ in histories]
        for n in fragment.nodes():
            slot = self.nodes[index[n.history]]
            for a, edges in n.actions:
                slot[a] = [(e.weight, -1 if e.child is None else index[e.child.history])
                           for e in edges if e.weight]

    def weigh(self, actions: Sequence) -> Fraction:
        nodes = self.nodes

        def go(i: int) -> Fraction:
            edges = nodes[i].get(actions[i])
            if not edges:
                return Fraction(0)
            total = Fraction(0)
            for w, child in edges:
                total += w if child < 0 else w * go(child)
            return total

        return go(0)


def _shape_histories(shape) -> tuple[History, ...]:
    if isinstance(shape, FragmentStats):
        return shape.histories
    if isinstance(shape, GameFragment):
        return shape.histories()
    return tuple(shape)


def sample_policy(agent: Agent, shape, seed: int) -> DeterministicPolicyTable:
    """Draw one action per shape history, independently, from the agent.

    ``shape`` is a ``FragmentStats`` (its ``histories``), a fragment, or a
    plain sequence of histories.  A semi-agent's deficit maps to
    ``FREEZE_ACTION``.
    """
    return _Sampler(agent, _shape_histories(shape)).draw(seed)


def expected_weight_oracle(agent: Agent, fragment: GameFragment,
                           budget: int = 200_000) -> Fraction:
    """E over tables g ~ P of weight(g, fragment), by enumerating every table."""
    histories = fragment.histories()
    choices = []
    count = 1
    for h in histories:
        opts = [(a, p) for a, p in agent.distribution(h) if p]
        deficit = 1 - sum((p for _, p in opts), Fraction(0))
        if deficit:
            opts.append((FREEZE_ACTION, deficit))
        choices.append(opts)
        count *= len(opts)
        if count > budget:
            raise BudgetExceeded(f"{count}+ policy tables exceed budget {budget}")
    total = Fraction(0)
    for combo in itertools.product(*choices):
        prob = Fraction(1)
        for _, p in combo:
            prob *= p
        table = DeterministicPolicyTable({h: a for h, (a, _) in zip(histories, combo)})
        total += prob * weight(table, fragment)
    return total


@dataclass(frozen=True)
class SampleRecord:
    """One sampled table: its actions follow the fragment's sorted histories."""

    index: int
    actions: tuple
    weight: Fraction


@dataclass
class DerandomizationReport:
    s: int
    d: int
    n: int
    samples: list[SampleRecord]
    winner: int | None
    empirical_max_weight: Fraction
    fragment: GameFragment | None = field(default=None, repr=False)
    winner_table: DeterministicPolicyTable | None = field(default=None, repr=False)
    winner_win_prob: Fraction | None = None
    agent_weight: Fraction | None = None
    seed: int = 0

    @property
    def threshold(self) -> Fraction:
        return Fraction(1, 2 ** (self.s + 1))

    @property
    def fail_bound(self) -> float:
        return fail_bound(self.s, self.n)

    @property
    def mean_weight(self) -> Fraction:
        return sum((r.weight for r in self.samples), Fraction(0)) / len(self.samples)

    def to_json(self, include_samples: bool = True) -> dict:
        out = {
            "format": "winhalt.derandomization/1",
            "s": self.s,
            "d": self.d,
            "N": self.n,
            "seed": self.seed,
            "threshold": rational_str(self.threshold),
            "fail_bound": self.fail_bound,
            "agent_fragment_weight": None if self.agent_weight is None
            else rational_str(self.agent_weight),
            "empirical_max_weight": rational_str(self.empirical_max_weight),
            "mean_weight": rational_str(self.mean_weight),
            "winner": self.winner,
            "winner_digest": None if self.winner_table is None else self.winner_table.digest(),
            "winner_win_prob": None if self.winner_win_prob is None
            else rational_str(self.winner_win_prob),
            "winner_table": None if self.winner_table is None else self.winner_table.to_json(),
        }
        if self.fragment is not None:
            st = self.fragment.stats()
            out["fragment"] = {"path_count": st.path_count, "max_depth": st.max_depth,
                               "max_action": st.max_action}
        if include_samples:
            out["samples"] = [{"index": r.index, "actions": list(r.actions),
                               "weight": rational_str(r.weight)} for r in self.samples]
        return out


def derandomize(agent: Agent, env: Environment, s: int, d: int, cfg: GameConfig,
                seed: int, verify: bool = True,
                fragment: GameFragment | None = None) -> DerandomizationReport:
    """Find a deterministic table winning with probability above 2^-(s+1).

    Sample ``i`` is drawn with seed ``derive_seed(seed, i)``.  With
    ``verify`` the winner's exact win probability against ``env`` is
    computed and stored on the report.  Raises ``InsufficientMass`` when the
    agent's win probability within the horizon is not above ``2^-s`` and
    ``NoWinnerFound`` (carrying the report) when no sample crosses the
    threshold.
    """
    if fragment is None:
        fragment = extract_fragment(agent, env, s, cfg)
    n = hoeffding_sample_count(s, d)
    threshold = Fraction(1, 2 ** (s + 1))
    histories = fragment.histories()
    sampler = _Sampler(agent, histories)
    compiled = _CompiledFragment(fragment, histories)
    samples = []
    winner = None
    winner_table = None
    best = Fraction(0)
    memo: dict = {}
    for i in range(n):
        acts = sampler.draw_actions(derive_seed(seed, i))
        w = memo.get(acts)
        if w is None:
            w = memo[acts] = compiled.weigh(acts)
        samples.append(SampleRecord(i, acts, w))
        if w > best:
            best = w
        if winner is None and w > threshold:
            winner = i
            winner_table = DeterministicPolicyTable(dict(zip(histories, acts)))
    report = DerandomizationReport(
        s=s, d=d, n=n, samples=samples, winner=winner, empirical_max_weight=best,
        fragment=fragment, winner_table=winner_table,
        agent_weight=weight(agent, fragment), seed=seed,
    )
    if winner is None:
        raise NoWinnerFound(f"no table of {n} exceeded weight {threshold}; max {best}", report)
    if verify:
        report.winner_win_prob = exact_win_prob(winner_table, env, cfg)
    return report


def derandomize_with_retry(agent: Agent, env: Environment, s: int, d: int, cfg: GameConfig,
                           seed: int, max_doublings: int = 4, **kw) -> DerandomizationReport:
    """``derandomize``, doubling ``d`` after each ``NoWinnerFound``."""
    fragment = extract_fragment(agent, env, s, cfg)
    for k in range(max_doublings + 1):
        try:
            return derandomize(agent, env, s, d * 2**k, cfg, derive_seed(seed, k),
                               fragment=fragment, **kw)
        except NoWinnerFound as exc:
            last = exc
    raise last


class MixtureAgent(Agent):
    """Plays ``a`` with probability n_a/m_a among members consistent with the history.

    A member is consistent with ``h`` when it would have played every action
    recorded in ``h``.  With no consistent member the mixture plays 0.
    """

    def __init__(self, members: Sequence[Agent]):
        self.members = tuple(members)
        self.kind = "semi" if any(m.kind == "semi" for m in self.members) else "probabilistic"
        self._consistent: dict = {(): tuple(range(len(self.members)))}

    def consistent(self, history: History) -> tuple[int, ...]:
        hit = self._consistent.get(history)
        if hit is not None:
            return hit
        parent = self.consistent(history[:-1])
        a = history[-1][0]
        prefix = history[:-1]
        out = tuple(i for i in parent if self.members[i].act(prefix) == a)
        self._consistent[history] = out
        return out

    def _raw(self, history):
        idx = self.consistent(history)
        if not idx:
            return {0: Fraction(1)}
        counts: dict = {}
        for i in idx:
            a = self.members[i].act(history)
            if a is not FREEZE_ACTION:
                counts[a] = counts.get(a, 0) + 1
        return {a: Fraction(c, len(idx)) for a, c in counts.items()}

    def __getstate__(self):
        state = super().__getstate__()
        state["_consistent"] = {(): tuple(range(len(self.members)))}
        return state


def partial_derandomize(tables: Sequence[Agent]) -> MixtureAgent:
    """Mix deterministic agents (tables or anything with ``act``) into one agent."""
    tables = list(tables)
    if not tables:
        raise ValueError("need at least one table")
    for t in tables:
        if not hasattr(t, "act"):
            raise TypeError(f"{t!r} is not a deterministic agent")
    shaped = [t for t in tables if isinstance(t, DeterministicPolicyTable)]
    if shaped:
        ref = (shaped[0].shape, shaped[0].default)
        for t in shaped[1:]:
            if (t.shape, t.default) != ref:
                raise ShapeMismatch("tables do not share a common shape")
    return MixtureAgent(tables)
