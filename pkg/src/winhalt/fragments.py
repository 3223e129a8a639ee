"""Game fragments: finite trees of winning interactions with weighted env edges.

The tree alternates agent edges (actions) and environment edges (a response
plus a rational weight).  Every root-to-leaf path ends in a ``HALT`` edge.
Coupled with an agent, the weight of a path is the product of the agent's
action probabilities and the env edge weights along it.  If the env weights
never exceed the environment's true response probabilities, the total
weight lower-bounds the agent's win probability.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .engine import (HALT, Agent, Environment, GameConfig, History, Response,
                     _branch, _check_action, response_key)
from .errors import BudgetExceeded, InsufficientMass, UndefinedAction

__all__ = [
    "ResponseEdge", "FragmentNode", "GameFragment", "FragmentStats",
    "weight", "extract_fragment", "validate_fragment",
]

FORMAT = "winhalt.fragment/1"

Path = tuple[tuple[int, Response, Fraction], ...]


@dataclass(frozen=True)
class ResponseEdge:
    response: Response
    weight: Fraction
    child: "FragmentNode | None" = None


@dataclass(frozen=True)
class FragmentNode:
    history: History
    actions: tuple[tuple[int, tuple[ResponseEdge, ...]], ...]


@dataclass(frozen=True)
class FragmentStats:
    path_count: int
    max_depth: int
    max_action: int
    histories: tuple[History, ...] = field(default=(), compare=True)


def _rational(s) -> Fraction:
    if isinstance(s, str):
        return Fraction(s)
    if isinstance(s, int) and not isinstance(s, bool):
        return Fraction(s)
    raise ValueError(f"not a rational: {s!r}")


def rational_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


class GameFragment:
    """Immutable fragment tree.  Build it with ``from_paths``."""

    def __init__(self, root: FragmentNode):
        self.root = root
        self._check(root)

    # construction ---------------------------------------------------------

    @classmethod
    def from_paths(cls, paths: Sequence[Sequence[tuple[int, Response, Fraction]]]) -> "GameFragment":
        """Merge paths of ``(action, response, env_weight)`` triples into a tree.

        Each path must end with a ``HALT`` response.  Shared prefixes must
        agree on their edge weights.
        """
        if not paths:
            raise ValueError("a fragment needs at least one path")
        trie: dict = {}
        for path in paths:
            if not path or path[-1][1] is not HALT:
                raise ValueError(f"path {path!r} does not end in HALT")
            node = trie
            for i, (a, r, w) in enumerate(path):
                w = Fraction(w)
                if (r is HALT) != (i == len(path) - 1):
                    raise ValueError(f"HALT must be exactly the last response in {path!r}")
                edges = node.setdefault(a, {})
                if r in edges:
                    old_w, sub = edges[r]
                    if old_w != w:
                        raise ValueError(f"conflicting weights {old_w} vs {w} on edge {(a, r)}")
                    if r is HALT:
                        raise ValueError(f"duplicate path {path!r}")
                else:
                    sub = None if r is HALT else {}
                    edges[r] = (w, sub)
                node = sub
        return cls(_freeze((), trie))

    # invariants -----------------------------------------------------------

    @staticmethod
    def _check(node: FragmentNode) -> None:
        stack = [node]
        while stack:
            n = stack.pop()
            if not n.actions:
                raise ValueError(f"agent node at {n.history} has no actions")
            seen = set()
            for a, edges in n.actions:
                if a in seen or a < 0:
                    raise ValueError(f"bad or duplicate action {a} at {n.history}")
                seen.add(a)
                if not edges:
                    raise ValueError(f"action {a} at {n.history} has no responses")
                total = Fraction(0)
                for e in edges:
                    if not 0 <= e.weight <= 1:
                        raise ValueError(f"edge weight {e.weight} outside [0, 1]")
                    total += e.weight
                    if e.response is HALT:
                        if e.child is not None:
                            raise ValueError("HALT edges are leaves")
                    else:
                        if e.child is None:
                            raise ValueError(f"leaf at {n.history} not marked by HALT")
                        if e.child.history != n.history + ((a, e.response),):
                            raise ValueError("child history does not extend its parent")
                        stack.append(e.child)
                if total > 1:
                    raise ValueError(f"sibling env weights sum to {total} > 1 at {n.history}")

    # inspection -----------------------------------------------------------

    def nodes(self) -> Iterator[FragmentNode]:
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            for _, edges in reversed(n.actions):
                for e in reversed(edges):
                    if e.child is not None:
                        stack.append(e.child)

    def paths(self) -> list[Path]:
        out: list[Path] = []

        def walk(n: FragmentNode, prefix: tuple):
            for a, edges in n.actions:
                for e in edges:
                    step = prefix + ((a, e.response, e.weight),)
                    if e.child is None:
                        out.append(step)
                    else:
                        walk(e.child, step)

        walk(self.root, ())
        return out

    def histories(self) -> tuple[History, ...]:
        return tuple(sorted((n.history for n in self.nodes()), key=_history_sort_key))

    def stats(self) -> FragmentStats:
        paths = self.paths()
        return FragmentStats(
            path_count=len(paths),
            max_depth=max(len(p) for p in paths),
            max_action=max(a for p in paths for a, _, _ in p),
            histories=self.histories(),
        )

    def with_path(self, path) -> "GameFragment":
        return GameFragment.from_paths(self.paths() + [tuple(path)])

    def without_path(self, index: int) -> "GameFragment":
        paths = self.paths()
        del paths[index]
        return GameFragment.from_paths(paths)

    def __eq__(self, other):
        return isinstance(other, GameFragment) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        s = self.stats()
        return f"GameFragment(paths={s.path_count}, depth={s.max_depth})"

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {"format": FORMAT, "root": _node_json(self.root)}

    @classmethod
    def from_json(cls, data: dict) -> "GameFragment":
        if data.get("format") != FORMAT:
            raise ValueError(f"unsupported fragment format {data.get('format')!r}")
        return cls(_node_from_json(data["root"], ()))


def _history_sort_key(h: History):
    return (len(h), h)


def _freeze(history: History, trie: dict) -> FragmentNode:
    actions = []
    for a in sorted(trie):
        edges = []
        for r in sorted(trie[a], key=response_key):
            w, sub = trie[a][r]
            child = None if sub is None else _freeze(history + ((a, r),), sub)
            edges.append(ResponseEdge(r, w, child))
        actions.append((a, tuple(edges)))
    return FragmentNode(history, tuple(actions))


def _node_json(n: FragmentNode) -> dict:
    return {
        "history": [[a, r] for a, r in n.history],
        "actions": [
            {"action": a,
             "responses": [{"response": "HALT" if e.response is HALT else e.response,
                            "weight": rational_str(e.weight),
                            "child": None if e.child is None else _node_json(e.child)}
                           for e in edges]}
            for a, edges in n.actions
        ],
    }


def _node_from_json(d: dict, history: History) -> FragmentNode:
    if [list(p) for p in history] != d["history"]:
        raise ValueError(f"node history {d['history']} does not match its position")
    actions = []
    for entry in d["actions"]:
        a = entry["action"]
        edges = []
        for e in entry["responses"]:
            r = HALT if e["response"] == "HALT" else int(e["response"])
            child = None if e["child"] is None else _node_from_json(e["child"], history + ((a, r),))
            edges.append(ResponseEdge(r, _rational(e["weight"]), child))
        actions.append((a, tuple(edges)))
    return FragmentNode(history, tuple(actions))


# --------------------------------------------------------------------------
# weight


def weight(agent: Agent, fragment: GameFragment, strict: bool = False) -> Fraction:
    """Sum over paths of (agent action probabilities) x (env edge weights).

    An action with no entry in the agent's distribution counts as
    probability 0; with ``strict=True`` it raises ``UndefinedAction``.
    """

    def node_weight(n: FragmentNode) -> Fraction:
        dist = dict(agent.distribution(n.history))
        total = Fraction(0)
        for a, edges in n.actions:
            pa = dist.get(a)
            if pa is None:
                if strict:
                    raise UndefinedAction(f"agent has no entry for action {a} at {n.history}")
                continue
            if not pa:
                continue
            sub = Fraction(0)
            for e in edges:
                if not e.weight:
                    continue
                sub += e.weight if e.child is None else e.weight * node_weight(e.child)
            total += pa * sub
        return total

    return node_weight(fragment.root)


# --------------------------------------------------------------------------
# extraction and validation


def extract_fragment(agent: Agent, env: Environment, s: int, cfg: GameConfig,
                     node_budget: int = 2_000_000) -> GameFragment:
    """Collect winning interactions shortest-first until their mass exceeds 2^-s.

    Within a round, paths are taken in lexicographic order of their
    ``(action, response)`` sequence.  Env edge weights are the environment's
    exact response probabilities given the visible history.
    """
    threshold = Fraction(1, 2**s)
    collected: list[Path] = []
    mass = Fraction(0)
    # (history, agent path prob, env edge weights so far, belief)
    frontier = [((), Fraction(1), (), {env.initial_state(): Fraction(1)})]
    nodes = 0
    for _ in range(cfg.horizon):
        nxt = []
        for history, amass, weights, belief in frontier:
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceeded(f"extract_fragment exceeded {node_budget} nodes")
            here = sum(belief.values(), Fraction(0))
            for a, pa in agent.distribution(history):
                if not pa:
                    continue
                _check_action(a, cfg, history)
                for r, b2 in _branch(env, belief, history, a, cfg):
                    w = sum(b2.values(), Fraction(0)) / here
                    step = weights + ((a, r, w),)
                    if r is HALT:
                        collected.append(step)
                        path_mass = amass * pa
                        for _, _, ew in step:
                            path_mass *= ew
                        mass += path_mass
                        if mass > threshold:
                            return GameFragment.from_paths(collected)
                    else:
                        nxt.append((history + ((a, r),), amass * pa, step, b2))
        frontier = nxt
    raise InsufficientMass(
        f"winning mass {mass} within horizon {cfg.horizon} does not exceed 2^-{s}")


def validate_fragment(fragment: GameFragment, env: Environment) -> bool:
    """True iff every env edge weight is at most the env's probability of that
    response and every path is a possible winning interaction."""

    def ok(n: FragmentNode, belief: dict) -> bool:
        here = sum(belief.values(), Fraction(0))
        if here == 0:
            return False
        for a, edges in n.actions:
            groups: dict = {}
            for s, m in belief.items():
                for r, q, s2 in env.transitions(s, n.history, a):
                    if q:
                        b = groups.setdefault(r, {})
                        b[s2] = b.get(s2, Fraction(0)) + m * q
            for e in edges:
                b2 = groups.get(e.response)
                if b2 is None:
                    return False
                if e.weight > sum(b2.values(), Fraction(0)) / here:
                    return False
                if e.child is not None and not ok(e.child, b2):
                    return False
        return True

    return ok(fragment.root, {env.initial_state(): Fraction(1)})
