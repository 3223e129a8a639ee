"""Seed derivation and exact sampling from rational distributions.

Per-trial and per-sample seeds come from ``derive_seed``: the master seed is
folded with each path component through the SplitMix64 finalizer.  The
resulting 64-bit integer seeds a stdlib ``random.Random`` (Mersenne Twister),
so a given ``(master, path)`` pair always replays the same stream.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Iterable, Sequence, TypeVar

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

T = TypeVar("T")


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Fold ``path`` into ``master``; order matters, result is a u64."""
    x = splitmix64(master & MASK64)
    for p in path:
        x = splitmix64(x ^ splitmix64(p & MASK64))
    return x


def history_path(history: Iterable[tuple[int, int]]) -> list[int]:
    """Flatten a history into ints for ``derive_seed`` (length-prefixed)."""
    flat = []
    for a, r in history:
        flat.append(a)
        flat.append(r)
    return [len(flat)] + flat


def make_rng(seed: int) -> random.Random:
    return random.Random(seed & MASK64)


def draw(rng: random.Random, entries: Sequence[tuple[T, Fraction]]) -> T | None:
    """Draw one value from ``(value, probability)`` entries exactly.

    Uses a single ``randrange`` over the common denominator, so the draw is
    exact for any rational weights.  Returns ``None`` when the draw lands in
    the deficit ``1 - sum(probabilities)``.
    """
    den = 1
    for _, p in entries:
        den = math.lcm(den, p.denominator)
    u = rng.randrange(den)
    acc = 0
    for value, p in entries:
        acc += p.numerator * (den // p.denominator)
        if u < acc:
            return value
    return None
