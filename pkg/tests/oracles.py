"""Independent reference computations used to pin expected values.

None of these reuse the evaluation paths under test: win probabilities come
from naive trajectory enumeration over hidden states, programs are decoded
and run by a separate interpreter, and tails/quantiles come from scipy or
from ``math.erf``.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import stats

from winhalt.engine import HALT


# -- games -------------------------------------------------------------------


def tree_win_prob(agent, env, horizon: int) -> Fraction:
    """Sum over every (agent action, hidden transition) trajectory; no merging."""

    def go(state, history, depth) -> Fraction:
        if depth == horizon:
            return Fraction(0)
        total = Fraction(0)
        for a, pa in agent.distribution(history):
            if not pa:
                continue
            for r, pr, s2 in env.transitions(state, history, a):
                if r is HALT:
                    total += pa * pr
                else:
                    total += pa * pr * go(s2, history + ((a, r),), depth + 1)
        return total

    return go(env.initial_state(), (), 0)


def fragment_weight_by_paths(agent, fragment) -> Fraction:
    total = Fraction(0)
    for path in fragment.paths():
        w = Fraction(1)
        h = ()
        for a, r, ew in path:
            w *= dict(agent.distribution(h)).get(a, Fraction(0)) * ew
            h = h + ((a, r),)
        total += w
    return total


def enumerate_tables(agent, histories):
    """Yield (probability, {history: action or None}) over all policy tables.

    ``None`` stands for the freeze deficit of a semi-agent.
    """
    per = []
    for h in histories:
        opts = [(a, p) for a, p in agent.distribution(h) if p]
        deficit = 1 - sum((p for _, p in opts), Fraction(0))
        if deficit:
            opts.append((None, deficit))
        per.append(opts)
    for combo in itertools.product(*per):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        yield p, {h: a for h, (a, _) in zip(histories, combo)}


def table_fragment_weight(table: dict, fragment) -> Fraction:
    total = Fraction(0)
    for path in fragment.paths():
        w = Fraction(1)
        h = ()
        for a, r, ew in path:
            if table.get(h, 0) != a:
                w = Fraction(0)
                break
            w *= ew
            h = h + ((a, r),)
        total += w
    return total


def expected_table_weight(agent, fragment) -> Fraction:
    hs = sorted({n.history for n in fragment.nodes()}, key=lambda h: (len(h), h))
    return sum((p * table_fragment_weight(t, fragment) for p, t in enumerate_tables(agent, hs)),
               Fraction(0))


# -- bytecode ----------------------------------------------------------------

_TABLE = {"01": "LAST_RESPONSE", "100": "TURN_INDEX", "101": "ADD_MOD", "110": "XOR",
          "1110": "DUP", "1111": "HALT_TOP"}


def oracle_decode(bits: str):
    """Return a list of (name, arg) or None when bits is not one complete program."""
    out = []
    i = 0
    while i < len(bits):
        if bits.startswith("00", i):
            if i + 6 > len(bits):
                return None
            out.append(("CONST", int(bits[i + 2:i + 6], 2)))
            i += 6
            continue
        for code, name in _TABLE.items():
            if bits.startswith(code, i):
                out.append((name, None))
                i += len(code)
                break
        else:
            return None
        if out[-1][0] == "HALT_TOP":
            break
    if i != len(bits) or not out or out[-1][0] != "HALT_TOP":
        return None
    return out


def all_programs_up_to(max_bits: int):
    """Brute force: every bit string up to ``max_bits`` that decodes."""
    found = []
    for n in range(1, max_bits + 1):
        for v in range(2**n):
            bits = format(v, f"0{n}b")
            ops = oracle_decode(bits)
            if ops is not None:
                found.append((bits, ops))
    return found


def oracle_run(ops, history, k: int, fuel: int = 256):
    stack = []
    for step, (name, arg) in enumerate(ops):
        if step >= fuel:
            return None
        if name == "CONST":
            stack = stack + [arg]
        elif name == "LAST_RESPONSE":
            stack = stack + [history[-1][1] if history else 0]
        elif name == "TURN_INDEX":
            stack = stack + [len(history)]
        elif name == "DUP":
            if not stack:
                return None
            stack = stack + stack[-1:]
        elif name == "HALT_TOP":
            return stack[-1] % k if stack else None
        else:
            if len(stack) < 2:
                return None
            x, y = stack[-2], stack[-1]
            stack = stack[:-2] + [(x + y) % k if name == "ADD_MOD" else (x ^ y) % k]
    return None


class OracleProgramAgent:
    """Minimal agent protocol (``distribution``) over the oracle interpreter."""

    def __init__(self, ops, k: int):
        self.ops = ops
        self.k = k

    def distribution(self, history):
        a = oracle_run(self.ops, history, self.k)
        return () if a is None else ((a, Fraction(1)),)


def brute_min_winning_bits(env, horizon: int, k: int, max_bits: int, threshold=Fraction(0)):
    best = None
    for bits, ops in all_programs_up_to(max_bits):
        if best is not None and len(bits) > best:
            break
        if tree_win_prob(OracleProgramAgent(ops, k), env, horizon) > threshold:
            best = len(bits)
    return best


# -- probability -------------------------------------------------------------


def binomial_upper_tail(n: int, k: int) -> float:
    """P(Bin(n, 1/2) >= k)."""
    return float(stats.binom.sf(k - 1, n, 0.5))


def exact_binomial_upper_tail(n: int, k: int) -> Fraction:
    return Fraction(sum(math.comb(n, j) for j in range(max(k, 0), n + 1)), 2**n)


def rademacher_law(n: int) -> dict:
    law = {0: Fraction(1)}
    for _ in range(n):
        nxt: dict = {}
        for s, p in law.items():
            for step in (-1, 1):
                nxt[s + step] = nxt.get(s + step, Fraction(0)) + p / 2
        law = nxt
    return dict(sorted(law.items()))


def bisect_quantile(q: float, tol: float = 1e-13) -> float:
    """Standard normal quantile by bisection on math.erf."""
    lo, hi = -12.0, 12.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if 0.5 * (1 + math.erf(mid / math.sqrt(2))) < q:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def scipy_quantile(q: float) -> float:
    return float(stats.norm.ppf(q))


def float_occupancy(rooms: int, edges, start: int, t: int) -> np.ndarray:
    """Uniform walk occupancy after ``t`` steps via numpy matrix_power."""
    adj = np.zeros((rooms, rooms))
    for u, v in edges:
        adj[u, v] += 1
        if u != v:
            adj[v, u] += 1
        else:
            adj[u, u] += 1
    p = adj / adj.sum(axis=1, keepdims=True)
    x = np.zeros(rooms)
    x[start] = 1.0
    return x @ np.linalg.matrix_power(p, t)
