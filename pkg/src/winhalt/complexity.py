"""A tiny stack bytecode whose code length serves as a description length.

Opcodes and their codes form a complete prefix code (Kraft sum exactly 1)::

    CONST k        00kkkk   push k (0..15)
    LAST_RESPONSE  01       push the most recent env response, 0 if none
    TURN_INDEX     100      push the 0-based round index (len(history))
    ADD_MOD        101      pop y, x; push (x + y) mod max_action
    XOR            110      pop y, x; push (x ^ y) mod max_action
    DUP            1110     push a copy of the top
    HALT_TOP       1111     emit top mod max_action as the action

A *program* is a run of non-halting opcodes closed by one final
``HALT_TOP``.  That rule makes whole programs prefix-free as bit strings,
so ``sum 2^-len`` over all programs is at most 1, and enumerating opcode
sequences in code order yields programs in lexicographic bit order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

from .engine import Agent, Environment, GameConfig, History, exact_win_prob
from .errors import EmptyMass, NotFound, TrailingBits, TruncatedCode, UnknownOpcode
from .fragments import rational_str

__all__ = [
    "Op", "AgentProgram", "FREEZE", "DEFAULT_FUEL", "decode_program", "run_program",
    "ProgramAgent", "enumerate_programs", "count_programs", "AgentSpace", "ALL_PROGRAMS",
    "SearchResult", "min_winning_description", "XiReport", "xi_proxy", "ceil_neg_log2",
]

DEFAULT_FUEL = 256


class _Freeze:
    def __repr__(self):
        return "FREEZE"

    def __reduce__(self):
        return (_freeze, ())


def _freeze():
    return FREEZE


FREEZE = _Freeze()

CONST, LAST, TURN, ADD, XOR, DUP, HALT_TOP = ("CONST", "LAST_RESPONSE", "TURN_INDEX",
                                               "ADD_MOD", "XOR", "DUP", "HALT_TOP")

_CODES = {LAST: "01", TURN: "100", ADD: "101", XOR: "110", DUP: "1110", HALT_TOP: "1111"}
_DECODE = {v: k for k, v in _CODES.items()}


@dataclass(frozen=True, order=True)
class Op:
    name: str
    arg: int | None = None

    def __post_init__(self):
        if self.name == CONST:
            if self.arg is None or not 0 <= self.arg < 16:
                raise ValueError(f"CONST takes a 4-bit argument, got {self.arg!r}")
        elif self.name in _CODES:
            if self.arg is not None:
                raise ValueError(f"{self.name} takes no argument")
        else:
            raise ValueError(f"unknown opcode {self.name!r}")

    @property
    def code(self) -> str:
        if self.name == CONST:
            return "00" + format(self.arg, "04b")
        return _CODES[self.name]

    def __str__(self):
        return f"CONST({self.arg})" if self.name == CONST else self.name


# every opcode, sorted by code string -- the enumeration order
OPS_BY_CODE: tuple[Op, ...] = tuple(sorted(
    [Op(CONST, k) for k in range(16)] + [Op(n) for n in _CODES], key=lambda o: o.code))
BODY_OPS = tuple(o for o in OPS_BY_CODE if o.name != HALT_TOP)


@dataclass(frozen=True)
class AgentProgram:
    """An opcode sequence.  ``bits`` is its code; ``len(bits)`` its description length.

    Any sequence can be run; only those closed by a single final HALT_TOP
    (``is_complete``) are produced by ``decode_program`` and the enumerator.
    """

    ops: tuple[Op, ...]

    def __init__(self, ops: Iterable[Op]):
        object.__setattr__(self, "ops", tuple(ops))

    @property
    def bits(self) -> str:
        return "".join(o.code for o in self.ops)

    @property
    def length(self) -> int:
        return sum(len(o.code) for o in self.ops)

    @property
    def is_complete(self) -> bool:
        return bool(self.ops) and self.ops[-1].name == HALT_TOP and \
            all(o.name != HALT_TOP for o in self.ops[:-1])

    def mnemonics(self) -> str:
        return " ".join(str(o) for o in self.ops)

    def to_hex(self) -> str:
        """``"<nbits>:<hex>"``; the bit string is read as a big-endian integer."""
        b = self.bits
        return f"{len(b)}:{int(b, 2):x}" if b else "0:0"

    @classmethod
    def from_hex(cls, text: str) -> "AgentProgram":
        n, _, h = text.partition(":")
        n = int(n)
        return decode_program(format(int(h, 16), f"0{n}b") if n else "")

    @classmethod
    def parse(cls, text: str) -> "AgentProgram":
        """Inverse of ``mnemonics``: e.g. ``"CONST(7) HALT_TOP"``."""
        ops = []
        for tok in text.split():
            if tok.startswith("CONST(") and tok.endswith(")"):
                ops.append(Op(CONST, int(tok[6:-1])))
            else:
                ops.append(Op(tok))
        return cls(ops)

    def __str__(self):
        return self.mnemonics()


def decode_program(bits: str) -> AgentProgram:
    """Decode a complete program, rejecting anything else."""
    if any(c not in "01" for c in bits):
        raise UnknownOpcode(f"non-binary symbol in {bits!r}")
    ops = []
    i = 0
    n = len(bits)
    while i < n:
        if bits.startswith("00", i):
            if i + 6 > n:
                raise TruncatedCode(f"CONST argument cut short at bit {i}")
            ops.append(Op(CONST, int(bits[i + 2:i + 6], 2)))
            i += 6
            continue
        for width in (2, 3, 4):
            name = _DECODE.get(bits[i:i + width])
            if name is not None:
                break
        else:
            if i + 4 > n:
                raise TruncatedCode(f"opcode cut short at bit {i}")
            raise UnknownOpcode(f"no opcode matches at bit {i}")  # unreachable: code is complete
        ops.append(Op(name))
        i += width
        if name == HALT_TOP:
            if i != n:
                raise TrailingBits(f"{n - i} bits after HALT_TOP")
            return AgentProgram(ops)
    raise TruncatedCode("missing HALT_TOP terminator" if bits else "empty code")


def run_program(program: AgentProgram, history: History, fuel: int = DEFAULT_FUEL,
                max_action: int = 16):
    """Run ``program`` for one decision; returns an action or ``FREEZE``."""
    if fuel < 1:
        raise ValueError("fuel must be >= 1")
    stack: list[int] = []
    for steps, op in enumerate(program.ops):
        if steps >= fuel:
            return FREEZE
        name = op.name
        if name == CONST:
            stack.append(op.arg)
        elif name == LAST:
            stack.append(history[-1][1] if history else 0)
        elif name == TURN:
            stack.append(len(history))
        elif name == DUP:
            if not stack:
                return FREEZE
            stack.append(stack[-1])
        elif name == HALT_TOP:
            if not stack:
                return FREEZE
            return stack[-1] % max_action
        else:
            if len(stack) < 2:
                return FREEZE
            y = stack.pop()
            x = stack.pop()
            stack.append((x + y) % max_action if name == ADD else (x ^ y) % max_action)
    return FREEZE


def _program_key(history):
    return (len(history), history[-1][1] if history else 0)


class ProgramAgent(Agent):
    """A program played as a deterministic semi-agent.

    The program only sees the round index and the last response, which is
    also its ``memo_key``.
    """

    kind = "semi"

    def __init__(self, program: AgentProgram, max_action: int, fuel: int = DEFAULT_FUEL):
        self.program = program
        self.max_action = max_action
        self.fuel = fuel
        self.memo_key = _program_key

    def act(self, history: History):
        a = run_program(self.program, history, self.fuel, self.max_action)
        return None if a is FREEZE else a

    def _raw(self, history):
        a = self.act(history)
        return {} if a is None else {a: Fraction(1)}

    def behaviour(self, horizon: int) -> tuple:
        """Actions at every ``(round, last response)`` the program can observe."""
        out = [self.act(())]
        for t in range(1, horizon):
            for r in range(self.max_action):
                out.append(self.act(((0, r),) * t))
        return tuple(out)


# --------------------------------------------------------------------------
# enumeration


def _bodies(nbits: int) -> Iterator[tuple[Op, ...]]:
    if nbits == 0:
        yield ()
        return
    for op in BODY_OPS:
        w = len(op.code)
        if w <= nbits:
            for rest in _bodies(nbits - w):
                yield (op,) + rest


def enumerate_programs(max_bits: int, min_bits: int = 4) -> Iterator[AgentProgram]:
    """All complete programs by length, lexicographic in bits within a length."""
    halt = Op(HALT_TOP)
    for n in range(max(min_bits, 4), max_bits + 1):
        for body in _bodies(n - 4):
            yield AgentProgram(body + (halt,))


def count_programs(nbits: int) -> int:
    """Number of complete programs of exactly ``nbits`` bits."""
    widths = [len(o.code) for o in BODY_OPS]
    f = [0] * (max(nbits - 4, 0) + 1)
    f[0] = 1
    for n in range(1, len(f)):
        f[n] = sum(f[n - w] for w in widths if w <= n)
    return f[nbits - 4] if nbits >= 4 else 0


@dataclass(frozen=True)
class AgentSpace:
    """``All``, ``Enumerated(programs)`` or ``Filtered(predicate)``."""

    variant: str = "all"
    programs: tuple[AgentProgram, ...] = ()
    predicate: Callable[[AgentProgram], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in ("all", "enumerated", "filtered"):
            raise ValueError(f"unknown agent space {self.variant!r}")
        if self.variant == "enumerated" and len(set(self.programs)) != len(self.programs):
            raise ValueError("enumerated agent space has duplicates")
        if self.variant == "filtered" and self.predicate is None:
            raise ValueError("filtered agent space needs a predicate")

    @classmethod
    def enumerated(cls, programs: Sequence[AgentProgram]) -> "AgentSpace":
        return cls("enumerated", tuple(programs))

    @classmethod
    def filtered(cls, predicate: Callable[[AgentProgram], bool]) -> "AgentSpace":
        return cls("filtered", predicate=predicate)

    def contains(self, program: AgentProgram) -> bool:
        if self.variant == "all":
            return True
        if self.variant == "enumerated":
            return program in self.programs
        return bool(self.predicate(program))

    def candidates(self, max_bits: int) -> Iterator[AgentProgram]:
        if self.variant == "enumerated":
            yield from sorted((p for p in self.programs if p.length <= max_bits),
                              key=lambda p: (p.length, p.bits))
            return
        for p in enumerate_programs(max_bits):
            if self.contains(p):
                yield p


ALL_PROGRAMS = AgentSpace()


class _Evaluator:
    """Exact win probability of programs, memoised by observable behaviour."""

    def __init__(self, env: Environment, cfg: GameConfig, fuel: int):
        self.env, self.cfg, self.fuel = env, cfg, fuel
        self.cache: dict = {}

    def __call__(self, program: AgentProgram) -> Fraction:
        agent = ProgramAgent(program, self.cfg.max_action, self.fuel)
        key = agent.behaviour(self.cfg.horizon)
        p = self.cache.get(key)
        if p is None:
            p = self.cache[key] = exact_win_prob(agent, self.env, self.cfg)
        return p


@dataclass
class SearchResult:
    program: AgentProgram
    bits: int
    win_prob: Fraction
    examined: int

    def to_json(self) -> dict:
        return {"program": self.program.mnemonics(), "hex": self.program.to_hex(),
                "bits": self.bits, "win_prob": rational_str(self.win_prob),
                "examined": self.examined}


def _first_winner(env, cfg, fuel, threshold, programs) -> tuple[int, AgentProgram | None, Fraction]:
    ev = _Evaluator(env, cfg, fuel)
    for i, p in enumerate(programs):
        w = ev(p)
        if w > threshold:
            return i + 1, p, w
    return len(programs), None, Fraction(0)


def min_winning_description(env: Environment, cfg: GameConfig, max_bits: int,
                            threshold: Fraction = Fraction(0),
                            space: AgentSpace = ALL_PROGRAMS,
                            fuel: int = DEFAULT_FUEL, jobs: int = 1) -> SearchResult:
    """Shortest program (then lexicographically least) winning above ``threshold``.

    With ``jobs > 1`` each code length is split into contiguous slices that
    are searched in parallel; the earliest winning slice decides, so the
    answer matches the serial search.  Raises ``NotFound`` within budget.
    """
    threshold = Fraction(threshold)
    if not 0 <= threshold < 1:
        raise ValueError("threshold must lie in [0, 1)")
    ev = _Evaluator(env, cfg, fuel)
    examined = 0
    by_len: dict[int, list[AgentProgram]] = {}
    for p in space.candidates(max_bits):
        by_len.setdefault(p.length, []).append(p)
    for n in sorted(by_len):
        progs = by_len[n]
        if jobs > 1 and len(progs) > 64:
            size = -(-len(progs) // jobs)
            slices = [progs[i:i + size] for i in range(0, len(progs), size)]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_first_winner, *zip(*[
                    (env, cfg, fuel, threshold, sl) for sl in slices])))
            for sl, (count, p, w) in zip(slices, results):
                examined += count
                if p is not None:
                    return SearchResult(p, n, w, examined)
            continue
        for p in progs:
            examined += 1
            w = ev(p)
            if w > threshold:
                return SearchResult(p, n, w, examined)
    raise NotFound(f"no program of at most {max_bits} bits wins above {threshold}")


# --------------------------------------------------------------------------
# xi


def ceil_neg_log2(mass: Fraction) -> int:
    """Exact ceil(-log2 mass) for 0 < mass <= 1."""
    if not 0 < mass <= 1:
        raise ValueError("mass must lie in (0, 1]")
    n, d = mass.numerator, mass.denominator
    # smallest x with 2^-x <= n/d, i.e. d <= n * 2^x
    x = max(d.bit_length() - n.bit_length() - 1, 0)
    while (n << x) < d:
        x += 1
    return x


@dataclass
class XiReport:
    budget_bits: int
    mass: Fraction
    xi_proxy: float | int
    contributions: list[tuple[AgentProgram, Fraction]]
    fuel: int = DEFAULT_FUEL
    programs_examined: int = 0

    @property
    def finite(self) -> bool:
        return self.mass > 0

    def to_json(self) -> dict:
        return {
            "budget_bits": self.budget_bits,
            "fuel": self.fuel,
            "mass": rational_str(self.mass),
            "xi_proxy": self.xi_proxy if self.finite else "inf",
            "programs_examined": self.programs_examined,
            "contributions": [{"program": p.mnemonics(), "hex": p.to_hex(),
                               "bits": p.length, "win_prob": rational_str(w)}
                              for p, w in self.contributions],
        }


def xi_proxy(env: Environment, cfg: GameConfig, max_bits: int, fuel: int = DEFAULT_FUEL,
             strict: bool = False) -> XiReport:
    """Budgeted ``ceil(-log2 sum 2^-len(p) Win(p, env))`` over complete programs.

    Zero mass gives ``xi_proxy = math.inf``; with ``strict=True`` it raises
    ``EmptyMass`` instead.
    """
    ev = _Evaluator(env, cfg, fuel)
    mass = Fraction(0)
    contributions = []
    examined = 0
    for p in enumerate_programs(max_bits):
        examined += 1
        w = ev(p)
        if w:
            mass += w / 2**p.length
            contributions.append((p, w))
    if mass == 0:
        if strict:
            raise EmptyMass(f"no program of at most {max_bits} bits ever wins")
        xi = math.inf
    else:
        xi = ceil_neg_log2(mass)
    return XiReport(max_bits, mass, xi, contributions, fuel, examined)
