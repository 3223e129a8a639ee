"""The labyrinth: a hero walks a multigraph through doors a minotaur relabels.

Each round the hero names a door index ``i`` of the current room.  The
minotaur picks a permutation of that room's incident corridors (as a
function of the history, possibly at random) and the hero walks corridor
``incident[perm[i]]``.  The response is the door count of the new room.
After round ``N`` the game halts iff the hero stands in the goal.

A self-loop appears twice in its room's incident list, so it counts twice
toward the degree and the stationary law of the simple walk is
``deg(v) / 2c`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from ..engine import HALT, Environment, GameConfig, History, ProbabilisticAgent
from ..errors import Bipartite

__all__ = [
    "Labyrinth", "load_labyrinth", "parse_labyrinth", "format_labyrinth",
    "MinotaurPolicy", "IdentityMinotaur", "RotatingMinotaur", "TricksterMinotaur",
    "CallableMinotaur", "LabyrinthEnv", "labyrinth_env", "uniform_hero",
    "transition_matrix", "occupancy", "stationary_distribution", "mixing_distance",
    "mixing_time", "is_bipartite", "FORFEIT",
]


@dataclass(frozen=True)
class Labyrinth:
    rooms: int
    edges: tuple[tuple[int, int], ...]
    start: int
    goal: int
    turns: int

    def __init__(self, rooms: int, edges, start: int, goal: int, turns: int):
        edges = tuple((int(u), int(v)) for u, v in edges)
        object.__setattr__(self, "rooms", rooms)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "goal", goal)
        object.__setattr__(self, "turns", turns)
        self._validate()

    def _validate(self):
        if self.rooms < 1 or not self.edges:
            raise ValueError("a labyrinth needs rooms and corridors")
        for u, v in self.edges:
            if not (0 <= u < self.rooms and 0 <= v < self.rooms):
                raise ValueError(f"corridor {(u, v)} leaves the labyrinth")
        if not (0 <= self.start < self.rooms and 0 <= self.goal < self.rooms):
            raise ValueError("start and goal must be rooms")
        if self.turns < 0:
            raise ValueError("turns must be >= 0")
        seen = {0}
        stack = [0]
        adj = self.neighbours()
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != self.rooms:
            raise ValueError("labyrinth is not connected")

    def incident(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in range(self.rooms)]
        for j, (u, v) in enumerate(self.edges):
            inc[u].append(j)
            inc[v].append(j)
        return inc

    def neighbours(self) -> list[list[int]]:
        return [[self.other_end(j, u) for j in inc] for u, inc in enumerate(self.incident())]

    def other_end(self, edge: int, room: int) -> int:
        u, v = self.edges[edge]
        return v if u == room else u

    def degree(self, room: int) -> int:
        return sum((u == room) + (v == room) for u, v in self.edges)

    @property
    def c(self) -> int:
        return len(self.edges)

    @property
    def d(self) -> int:
        return self.degree(self.goal)

    @property
    def max_degree(self) -> int:
        return max(self.degree(v) for v in range(self.rooms))

    def with_turns(self, turns: int) -> "Labyrinth":
        return Labyrinth(self.rooms, self.edges, self.start, self.goal, turns)

    def config(self, master_seed: int = 0) -> GameConfig:
        # responses are door counts, so actions and responses share the range 0..max_degree
        return GameConfig(max(self.turns, 1), self.max_degree + 1, master_seed)


def parse_labyrinth(text: str) -> Labyrinth:
    """Edge-list format: ``start goal turns`` header then ``u v`` per line.

    ``#`` starts a comment.  Rooms are numbered from 0; the room count is one
    more than the largest room mentioned.
    """
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([int(x) for x in line.split()])
    if not rows or len(rows[0]) != 3:
        raise ValueError("missing 'start goal turns' header")
    (start, goal, turns), body = rows[0], rows[1:]
    for r in body:
        if len(r) != 2:
            raise ValueError(f"corridor line needs two rooms, got {r}")
    rooms = 1 + max([start, goal] + [x for r in body for x in r])
    return Labyrinth(rooms, [tuple(r) for r in body], start, goal, turns)


def load_labyrinth(path) -> Labyrinth:
    return parse_labyrinth(Path(path).read_text())


def format_labyrinth(lab: Labyrinth) -> str:
    lines = [f"{lab.start} {lab.goal} {lab.turns}"]
    lines += [f"{u} {v}" for u, v in lab.edges]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# minotaurs


class MinotaurPolicy:
    """``perms(room, degree, history)`` lists ``(permutation, probability)``."""

    deterministic = True
    length_only = False  # behaviour depends on the history only through its length

    def perms(self, room: int, degree: int, history: History):
        raise NotImplementedError


class IdentityMinotaur(MinotaurPolicy):
    length_only = True

    def perms(self, room, degree, history):
        return [(tuple(range(degree)), Fraction(1))]


class RotatingMinotaur(MinotaurPolicy):
    """Rotates door labels by the number of rounds played so far."""

    length_only = True

    def perms(self, room, degree, history):
        k = len(history) % degree
        return [(tuple((i + k) % degree for i in range(degree)), Fraction(1))]


class TricksterMinotaur(MinotaurPolicy):
    """Random relabelling that depends on the hero's previous door.

    With probability 1/2 the doors are left alone, otherwise they are
    reversed (if the previous door was even) or rotated by one.
    """

    deterministic = False

    def perms(self, room, degree, history):
        ident = tuple(range(degree))
        prev = history[-1][0] if history else 0
        if prev % 2 == 0:
            other = tuple(reversed(ident))
        else:
            other = tuple((i + 1) % degree for i in range(degree))
        if other == ident:
            return [(ident, Fraction(1))]
        return [(ident, Fraction(1, 2)), (other, Fraction(1, 2))]


class CallableMinotaur(MinotaurPolicy):
    def __init__(self, fn: Callable, deterministic: bool = False):
        self.fn = fn
        self.deterministic = deterministic

    def perms(self, room, degree, history):
        return list(self.fn(room, degree, history))


MINOTAURS = {"identity": IdentityMinotaur, "rotating": RotatingMinotaur,
             "trickster": TricksterMinotaur}

FORFEIT = "forfeit"


class LabyrinthEnv(Environment):
    """Hidden state is the hero's room, or ``FORFEIT`` after an invalid door.

    A forfeited hero hears 0 every round and never wins.
    """

    def __init__(self, lab: Labyrinth, policy: MinotaurPolicy, reach_anytime: bool = False):
        self.lab = lab
        self.policy = policy
        self.reach_anytime = reach_anytime
        self._incident = lab.incident()
        self.kind = "deterministic" if policy.deterministic else "probabilistic"
        self.memo_key = _no_history if policy.length_only else None

    def initial_state(self):
        return self.lab.start

    def _step(self, room, history, action):
        lab = self.lab
        t = len(history) + 1
        if lab.turns == 0:
            return [(HALT if room == lab.goal else 0, Fraction(1), room)]
        if room == FORFEIT:
            return [(0, Fraction(1), FORFEIT)]
        inc = self._incident[room]
        if not 0 <= action < len(inc):
            return [(0, Fraction(1), FORFEIT)]
        out = []
        for perm, p in self.policy.perms(room, len(inc), history):
            if sorted(perm) != list(range(len(inc))):
                raise ValueError(f"minotaur permutation {perm} is not a bijection")
            nxt = lab.other_end(inc[perm[action]], room)
            at_goal = nxt == lab.goal
            if (t == lab.turns or self.reach_anytime) and at_goal:
                out.append((HALT, p, None))
            else:
                out.append((len(self._incident[nxt]), p, nxt))
        return out


def _no_history(history):
    return ()


def labyrinth_env(lab: Labyrinth, policy: MinotaurPolicy | None = None,
                  reach_anytime: bool = False) -> LabyrinthEnv:
    return LabyrinthEnv(lab, policy or IdentityMinotaur(), reach_anytime)


class _UniformDoor:
    def __init__(self, start_degree: int):
        self.start_degree = start_degree

    def __call__(self, history):
        k = history[-1][1] if history else self.start_degree
        if k == 0:
            return {0: Fraction(1)}
        return {i: Fraction(1, k) for i in range(k)}


def _last_response(history):
    return history[-1][1] if history else None


def uniform_hero(lab: Labyrinth) -> ProbabilisticAgent:
    """Picks a door uniformly; the door count is the last response."""
    return ProbabilisticAgent(_UniformDoor(lab.degree(lab.start)), memo_key=_last_response)


# --------------------------------------------------------------------------
# random walk utilities (exact)


def transition_matrix(lab: Labyrinth, lazy: bool = False) -> list[list[Fraction]]:
    n = lab.rooms
    P = [[Fraction(0)] * n for _ in range(n)]
    for u, nb in enumerate(lab.neighbours()):
        for w in nb:
            P[u][w] += Fraction(1, len(nb))
    if lazy:
        P = [[(P[u][w] + (u == w)) / 2 for w in range(n)] for u in range(n)]
    return P


def occupancy(lab: Labyrinth, t: int, lazy: bool = False) -> list[Fraction]:
    """Law of the simple walk from ``start`` after ``t`` steps, by exact matrix powers."""
    P = transition_matrix(lab, lazy)
    n = lab.rooms
    dist = [Fraction(int(v == lab.start)) for v in range(n)]
    for _ in range(t):
        dist = [sum((dist[u] * P[u][w] for u in range(n)), Fraction(0)) for w in range(n)]
    return dist


def stationary_distribution(lab: Labyrinth) -> dict[int, Fraction]:
    return {v: Fraction(lab.degree(v), 2 * lab.c) for v in range(lab.rooms)}


def is_bipartite(lab: Labyrinth) -> bool:
    color = {0: 0}
    stack = [0]
    adj = lab.neighbours()
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in color:
                color[w] = 1 - color[u]
                stack.append(w)
            elif color[w] == color[u]:
                return False
    return True


def total_variation(p: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    return sum((abs(a - b) for a, b in zip(p, q)), Fraction(0)) / 2


def mixing_distance(lab: Labyrinth, t: int, lazy: bool = False) -> float:
    """TV distance between the t-step walk from ``start`` and ``deg/2c``.

    Raises ``Bipartite`` for a bipartite graph unless ``lazy``.
    """
    if not lazy and is_bipartite(lab):
        raise Bipartite("the simple walk on a bipartite graph does not converge")
    pi = stationary_distribution(lab)
    return float(total_variation(occupancy(lab, t, lazy), [pi[v] for v in range(lab.rooms)]))


def mixing_time(lab: Labyrinth, eps: float, lazy: bool = False, t_max: int = 10_000) -> int:
    """First ``t`` with ``mixing_distance(lab, t) < eps``."""
    if not lazy and is_bipartite(lab):
        raise Bipartite("the simple walk on a bipartite graph does not converge")
    P = transition_matrix(lab, lazy)
    n = lab.rooms
    pi = stationary_distribution(lab)
    target = [pi[v] for v in range(n)]
    dist = [Fraction(int(v == lab.start)) for v in range(n)]
    for t in range(t_max + 1):
        if float(total_variation(dist, target)) < eps:
            return t
        dist = [sum((dist[u] * P[u][w] for u in range(n)), Fraction(0)) for w in range(n)]
    raise ValueError(f"not mixed to {eps} within {t_max} steps")
