"""Named benchmark games used by the CLI, the tests and the acceptance run.

``DERANDOMIZE_SUITE`` holds probabilistic agents with a known exact win
probability above ``2^-s``; ``SEARCH_SUITE`` holds environments for program
search and the xi proxy.  Builders are zero-argument callables, so each
caller gets fresh objects.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from fractions import Fraction
from importlib import resources
from typing import Callable

from .engine import (HALT, Agent, DeterministicEnvironment, Environment, GameConfig,
                     ProbabilisticEnvironment, SemiAgent, uniform_agent)
from .zoo.evenodds import EvenOddsSpec, even_odds_env
from .zoo.labyrinth import (RotatingMinotaur, TricksterMinotaur, labyrinth_env,
                            parse_labyrinth, uniform_hero)
from .zoo.strategies import Copy, Cycle, Hashed, Majority
from .zoo.zerosum import StageGame, repeated_zero_sum_env

__all__ = ["Benchmark", "SearchBenchmark", "DERANDOMIZE_SUITE", "SEARCH_SUITE",
           "derandomize_benchmark", "search_benchmark", "halt_iff", "never_halts",
           "data_path", "benchmark_labyrinth", "matching_pennies", "rock_paper_scissors"]


def data_path(name: str):
    return resources.files("winhalt") / "data" / name


def benchmark_labyrinth():
    return parse_labyrinth(data_path("crete6.lab").read_text())


def matching_pennies() -> StageGame:
    return StageGame([[1, -1], [-1, 1]], "matching pennies")


def rock_paper_scissors() -> StageGame:
    return StageGame([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], "rock paper scissors")


def _const_key(history):
    return ()


# builders use module-level functions under functools.partial so the
# environments pickle for multi-process Monte-Carlo


def _halt_iff(target, h, a):
    return HALT if a == target else 0


def halt_iff(target: int) -> DeterministicEnvironment:
    """Halts as soon as the agent plays ``target``; otherwise answers 0."""
    return DeterministicEnvironment(partial(_halt_iff, target), memo_key=_const_key)


def _zero(h, a):
    return 0


def never_halts() -> DeterministicEnvironment:
    return DeterministicEnvironment(_zero, memo_key=_const_key)


def _echo(k, shift, h, a):
    # round 1 answers (a + shift) mod k; later rounds halt iff the agent repeats that answer
    if not h:
        return (a + shift) % k
    return HALT if a == h[0][1] else 0


def _echo_env(k: int, shift: int) -> DeterministicEnvironment:
    return DeterministicEnvironment(partial(_echo, k, shift))


def _coin_echo(h, a):
    # answers 1 or 2 at random; halts iff the agent repeats the previous answer
    if h and a == h[-1][1]:
        return {HALT: Fraction(1)}
    return {1: Fraction(1, 2), 2: Fraction(1, 2)}


def _coin_echo_env(k: int) -> ProbabilisticEnvironment:
    return ProbabilisticEnvironment(_coin_echo)


def _turn_plus(k, offset, h, a):
    # halts iff the action equals round index + offset (mod k); answers the round index
    return HALT if a == (len(h) + offset) % k else len(h) % k


def _turn_plus_env(k: int, offset: int) -> DeterministicEnvironment:
    return DeterministicEnvironment(partial(_turn_plus, k, offset))


def _xor(k, mask, h, a):
    # answers round index + 1, halts iff the action is last answer xor mask
    last = h[-1][1] if h else 0
    return HALT if a == (last ^ mask) % k else (len(h) + 1) % k


def _xor_env(k: int, mask: int) -> DeterministicEnvironment:
    return DeterministicEnvironment(partial(_xor, k, mask))


def _coin(p_halt, trigger, k, h, a):
    if a != trigger:
        return {r: Fraction(1, k) for r in range(k)}
    rest = (1 - p_halt) / k
    out = {r: rest for r in range(k)}
    out[HALT] = p_halt
    return out


def _coin_env(p_halt: Fraction, trigger: int, k: int) -> ProbabilisticEnvironment:
    return ProbabilisticEnvironment(partial(_coin, p_halt, trigger, k))


def _semi_third(h):
    return {a: Fraction(1, 4) for a in range(3)}


@dataclass(frozen=True)
class Benchmark:
    name: str
    s: int
    build: Callable[[], tuple[Agent, Environment, GameConfig]]
    win_prob: Fraction  # frozen exact value, checked against exact_win_prob in tests


@dataclass(frozen=True)
class SearchBenchmark:
    name: str
    build: Callable[[], tuple[Environment, GameConfig]]
    max_bits: int


def _lab(policy):
    def build():
        lab = benchmark_labyrinth()
        return uniform_hero(lab), labyrinth_env(lab, policy()), lab.config()
    return build


DERANDOMIZE_SUITE: tuple[Benchmark, ...] = (
    Benchmark("uniform2-halt0-h2", 1,
              lambda: (uniform_agent(2), halt_iff(0), GameConfig(2, 2)), Fraction(3, 4)),
    Benchmark("uniform3-halt2-h2", 1,
              lambda: (uniform_agent(3), halt_iff(2), GameConfig(2, 3)), Fraction(5, 9)),
    Benchmark("uniform4-turn-h3", 1,
              lambda: (uniform_agent(4), _turn_plus_env(4, 1), GameConfig(3, 4)), Fraction(37, 64)),
    Benchmark("coin-env-h4", 1,
              lambda: (uniform_agent(2), _coin_env(Fraction(1, 3), 0, 2), GameConfig(4, 2)),
              Fraction(671, 1296)),
    Benchmark("coin-echo-h3", 2,
              lambda: (uniform_agent(3), _coin_echo_env(3), GameConfig(3, 3)), Fraction(5, 9)),
    Benchmark("evenodds-n4-copy", 2,
              lambda: (uniform_agent(2), even_odds_env(EvenOddsSpec(4, Copy(2), 2)),
                       GameConfig(4, 2)), Fraction(5, 16)),
    Benchmark("pennies-n4-hashed", 2,
              lambda: (uniform_agent(2), repeated_zero_sum_env(matching_pennies(), Hashed(2, 11), 4),
                       GameConfig(4, 2)), Fraction(5, 16)),
    Benchmark("semi-halt1-h2", 2,
              lambda: (SemiAgent(_semi_third), halt_iff(1), GameConfig(2, 3)), Fraction(3, 8)),
    Benchmark("labyrinth-trickster", 3, _lab(TricksterMinotaur), Fraction(134843, 648000)),
    Benchmark("labyrinth-rotating", 3, _lab(RotatingMinotaur), Fraction(134843, 648000)),
)


SEARCH_SUITE: tuple[SearchBenchmark, ...] = (
    SearchBenchmark("halt-iff-7", lambda: (halt_iff(7), GameConfig(3, 8)), 12),
    SearchBenchmark("echo-shift3", lambda: (_echo_env(8, 3), GameConfig(2, 8)), 12),
    SearchBenchmark("coin-echo", lambda: (_coin_echo_env(3), GameConfig(3, 3)), 12),
    SearchBenchmark("turn-plus-1", lambda: (_turn_plus_env(4, 1), GameConfig(3, 4)), 12),
    SearchBenchmark("xor-5", lambda: (_xor_env(8, 5), GameConfig(3, 8)), 13),
    SearchBenchmark("halt-iff-12", lambda: (halt_iff(12), GameConfig(2, 16)), 12),
    SearchBenchmark("evenodds-n9-alternating",
                    lambda: (even_odds_env(EvenOddsSpec(9, Cycle(2, (0, 1)), 3)), GameConfig(9, 2)), 12),
    SearchBenchmark("evenodds-n5-majority",
                    lambda: (even_odds_env(EvenOddsSpec(5, Majority(2), 1)), GameConfig(5, 2)), 15),
    SearchBenchmark("pennies-n3-copy",
                    lambda: (repeated_zero_sum_env(matching_pennies(), Copy(2), 3), GameConfig(3, 2)), 12),
    SearchBenchmark("never-halts", lambda: (never_halts(), GameConfig(3, 4)), 12),
)


def derandomize_benchmark(name: str) -> Benchmark:
    for b in DERANDOMIZE_SUITE:
        if b.name == name:
            return b
    raise KeyError(name)


def search_benchmark(name: str) -> SearchBenchmark:
    for b in SEARCH_SUITE:
        if b.name == name:
            return b
    raise KeyError(name)
