"""Config validation, game construction and subcommand dispatch for the CLI."""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from . import __version__
from .benchmarks import (DERANDOMIZE_SUITE, SEARCH_SUITE, _coin_env, _echo_env, halt_iff,
                         matching_pennies, never_halts, rock_paper_scissors)
from .complexity import AgentProgram, AgentSpace, ProgramAgent, min_winning_description, xi_proxy
from .derandomize import derandomize, derandomize_with_retry, partial_derandomize
from .engine import (HALT, Agent, DeterministicAgent, DeterministicEnvironment, Environment,
                     GameConfig, SemiAgent, exact_win_prob, mc_win_prob, play, uniform_agent)
from .errors import ConfigInvalid
from .fragments import extract_fragment, rational_str, validate_fragment, weight
from .randgames import random_game
from .seeding import derive_seed
from .zoo.evenodds import (EvenOddsSpec, even_odds_env, even_odds_mc, rademacher_tail,
                           score_distribution)
from .zoo.labyrinth import (MINOTAURS, Labyrinth, labyrinth_env, load_labyrinth, mixing_distance,
                            mixing_time, occupancy, stationary_distribution, uniform_hero)
from .zoo.normal import normal_sf
from .zoo.strategies import StrategyAgent, make_strategy
from .zoo.zerosum import StageGame, kappa_constant, load_stage_game, repeated_zero_sum_env, zero_sum_mc

__all__ = ["load_schema", "validate_config", "load_config", "config_hash", "RunRecord",
           "run_experiment", "build_game", "jsonable", "TABLE_HEADERS"]

RECORD_FORMAT = "winhalt.run/1"

# CSV header of each subcommand's table
TABLE_HEADERS = {
    "play": ["episode", "seed", "won", "round", "frozen", "transcript"],
    "winprob": ["mode", "win_prob", "ci_halfwidth", "trials", "wins"],
    "fragment": ["path", "steps", "agent_weight"],
    "derandomize": ["index", "actions", "weight"],
    "partial": ["member", "program", "win_prob"],
    "search": ["bits", "program", "hex", "win_prob", "examined"],
    "xi": ["budget_bits", "mass", "xi_proxy", "programs_examined", "winning_programs"],
    "labyrinth": ["t", "distance", "p_goal"],
    "evenodds": ["score", "probability"],
    "zerosum": ["quantity", "value"],
    "report": ["config", "subcommand", "metric", "value"],
}


def load_schema() -> dict:
    return json.loads((resources.files("winhalt") / "data" / "config.schema.json").read_text())


def validate_config(config: Any) -> dict:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigInvalid(f"{where}: {exc.message}") from None
    return config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not JSON: {exc}") from None
    config = validate_config(config)
    if isinstance(config.get("game"), str):
        game_path = Path(path).parent / config["game"]
        try:
            config = dict(config, game=json.loads(game_path.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot load game file {game_path}: {exc}") from None
        validate_config(config)
    config["_base"] = str(Path(path).parent)
    return config


def config_hash(config: dict) -> str:
    clean = {k: v for k, v in config.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(clean, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def jsonable(x):
    if isinstance(x, Fraction):
        return rational_str(x)
    if x is HALT:
        return "HALT"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return x


@dataclass
class RunRecord:
    subcommand: str
    config_hash: str
    seed: int
    metrics: dict
    wall_time: float = 0.0
    version: str = __version__
    header: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": RECORD_FORMAT,
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "version": self.version,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "metrics": jsonable(self.metrics),
            "table": {"header": self.header, "rows": jsonable(self.rows)},
        }


# --------------------------------------------------------------------------
# building games


@dataclass
class Game:
    agent: Agent
    env: Environment
    cfg: GameConfig
    family: str
    extra: dict = field(default_factory=dict)


def _rat(x) -> Fraction:
    return Fraction(x)


def _resolve(base: str, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else Path(base) / path


def build_agent(spec: dict | None, cfg: GameConfig, default: Agent) -> Agent:
    if spec is None:
        return default
    t = spec["type"]
    if t == "uniform":
        return uniform_agent(spec.get("k", cfg.max_action))
    if t == "constant":
        a = spec.get("action", 0)
        return DeterministicAgent(lambda h, a=a: a, memo_key=lambda h: ())
    if t == "semi_uniform":
        k = spec.get("k", cfg.max_action)
        m = _rat(spec.get("mass", Fraction(1, 2)))
        return SemiAgent(lambda h: {a: m / k for a in range(k)}, memo_key=lambda h: ())
    if t == "program":
        return ProgramAgent(AgentProgram.parse(spec["program"]), cfg.max_action)
    if t == "strategy":
        return StrategyAgent(make_strategy(spec["strategy"], cfg.max_action))
    if t == "random":
        from .randgames import RandomAgent
        return RandomAgent(cfg.max_action, spec.get("seed", 0), spec.get("kind", "probabilistic"))
    raise ConfigInvalid(f"unknown agent type {t!r}")


def _stage(spec, base: str) -> StageGame:
    if spec is None or spec == "matching_pennies":
        return matching_pennies()
    if spec == "rock_paper_scissors":
        return rock_paper_scissors()
    if isinstance(spec, str):
        return load_stage_game(_resolve(base, spec))
    return StageGame([[_rat(x) for x in row] for row in spec])


def _labyrinth(spec: dict, base: str) -> Labyrinth:
    from .benchmarks import benchmark_labyrinth
    if "file" in spec:
        lab = load_labyrinth(_resolve(base, spec["file"]))
    elif "edges" in spec:
        edges = [tuple(e) for e in spec["edges"]]
        rooms = 1 + max(max(e) for e in edges)
        lab = Labyrinth(rooms, edges, spec.get("start", 0), spec.get("goal", rooms - 1),
                        spec.get("turns", 1))
    else:
        lab = benchmark_labyrinth()
    if "turns" in spec:
        lab = lab.with_turns(spec["turns"])
    return lab


def build_game(spec: dict, base: str = ".", horizon: int | None = None) -> Game:
    fam = spec["family"]
    try:
        if fam == "toy":
            cfg = GameConfig(spec["horizon"], spec["max_action"])
            k = cfg.max_action
            kind = spec["env"]
            if kind == "halt_iff":
                env = halt_iff(spec.get("target", 0))
            elif kind == "never_halts":
                env = never_halts()
            elif kind == "always_halts":
                env = DeterministicEnvironment(lambda h, a: HALT, memo_key=lambda h: ())
            elif kind == "echo":
                env = _echo_env(k, spec.get("shift", 0))
            else:
                env = _coin_env(_rat(spec.get("p_halt", "1/2")), spec.get("target", 0), k)
            agent = build_agent(spec.get("agent"), cfg, uniform_agent(k))
            game = Game(agent, env, cfg, fam)
        elif fam == "random":
            g = random_game(spec["seed"], spec.get("max_action"), spec.get("horizon"),
                            spec.get("agent_kind"), spec.get("env_deterministic"))
            game = Game(g.agent, g.env, g.cfg, fam)
        elif fam == "benchmark":
            for b in DERANDOMIZE_SUITE:
                if b.name == spec["name"]:
                    agent, env, cfg = b.build()
                    return _with_horizon(Game(agent, env, cfg, fam, {"s": b.s}), horizon)
            for b in SEARCH_SUITE:
                if b.name == spec["name"]:
                    env, cfg = b.build()
                    return _with_horizon(Game(uniform_agent(cfg.max_action), env, cfg, fam,
                                              {"max_bits": b.max_bits}), horizon)
            raise ConfigInvalid(f"unknown benchmark {spec['name']!r}")
        elif fam == "labyrinth":
            lab = _labyrinth(spec, base)
            policy = MINOTAURS[spec.get("minotaur", "identity")]()
            env = labyrinth_env(lab, policy, spec.get("reach_anytime", False))
            cfg = lab.config()
            agent = build_agent(spec.get("agent"), cfg, uniform_hero(lab))
            game = Game(agent, env, cfg, fam, {"lab": lab, "policy": policy,
                                                "reach_anytime": spec.get("reach_anytime", False)})
        elif fam == "evenodds":
            strat = make_strategy(spec.get("env_strategy", {"name": "copy"}), 2)
            eo = EvenOddsSpec(spec["rounds"], strat, spec.get("target"))
            cfg = eo.config()
            agent = build_agent(spec.get("agent"), cfg, uniform_agent(2))
            game = Game(agent, even_odds_env(eo), cfg, fam, {"spec": eo})
        else:
            stage = _stage(spec.get("stage"), base)
            if "scale" in spec:
                stage = stage.scaled(_rat(spec["scale"]))
            rounds = spec.get("rounds", 1)
            opp = make_strategy(spec.get("opponent", {"name": "copy"}), stage.n)
            cfg = GameConfig(rounds, stage.n)
            agent = build_agent(spec.get("agent"), cfg, uniform_agent(stage.n))
            env = repeated_zero_sum_env(stage, opp, rounds)
            game = Game(agent, env, cfg, fam, {"stage": stage})
    except (ValueError, KeyError, TypeError, OSError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"bad game spec: {exc}") from None
    return _with_horizon(game, horizon)


def _with_horizon(game: Game, horizon: int | None) -> Game:
    if horizon is not None:
        game.cfg = GameConfig(horizon, game.cfg.max_action, game.cfg.master_seed)
    return game


# --------------------------------------------------------------------------
# subcommands


def _need_game(config) -> Game:
    if "game" not in config:
        raise ConfigInvalid(f"subcommand {config['subcommand']!r} needs a game")
    params = config.get("params", {})
    return build_game(config["game"], config.get("_base", "."), params.get("horizon"))


def _seeded(game: Game, seed: int) -> GameConfig:
    return GameConfig(game.cfg.horizon, game.cfg.max_action, seed)


def _transcript(t) -> str:
    return " ".join(f"{a}:{'H' if r is HALT else r}" for a, r in t)


def _cmd_play(config, seed, jobs):
    game = _need_game(config)
    runs = config.get("params", {}).get("runs", 1)
    rows = []
    wins = 0
    for i in range(runs):
        s = derive_seed(seed, i)
        out = play(game.agent, game.env, game.cfg, s)
        wins += out.won
        rows.append([i, s, out.won, out.round, out.frozen, _transcript(out.transcript)])
    return {"runs": runs, "wins": wins}, rows, {}


def _cmd_winprob(config, seed, jobs):
    game = _need_game(config)
    p = config.get("params", {})
    if p.get("mode", "exact") == "mc":
        trials = p.get("trials", 10_000)
        est = mc_win_prob(game.agent, game.env, _seeded(game, seed), trials, jobs=jobs)
        m = {"mode": "mc", "win_prob": est.estimate, "ci_halfwidth": est.ci_halfwidth,
             "trials": trials, "wins": est.wins}
    else:
        w = exact_win_prob(game.agent, game.env, game.cfg)
        m = {"mode": "exact", "win_prob": w, "win_prob_float": float(w)}
    row = [m["mode"], m["win_prob"], m.get("ci_halfwidth", 0.0), m.get("trials", ""), m.get("wins", "")]
    return m, [row], {}


def _cmd_fragment(config, seed, jobs):
    game = _need_game(config)
    s = config.get("params", {}).get("s", game.extra.get("s", 1))
    frag = extract_fragment(game.agent, game.env, s, game.cfg)
    st = frag.stats()
    rows = []
    for i, path in enumerate(frag.paths()):
        w = Fraction(1)
        h = ()
        for a, r, ew in path:
            w *= game.agent.probability(h, a) * ew
            h = h + ((a, r),)
        rows.append([i, _transcript([(a, r) for a, r, _ in path]), w])
    m = {"s": s, "weight": weight(game.agent, frag), "threshold": Fraction(1, 2**s),
         "path_count": st.path_count, "max_depth": st.max_depth, "max_action": st.max_action,
         "decision_nodes": len(st.histories), "valid": validate_fragment(frag, game.env),
         "win_prob": exact_win_prob(game.agent, game.env, game.cfg)}
    return m, rows, {"fragment.json": frag.to_json()}


def _cmd_derandomize(config, seed, jobs):
    game = _need_game(config)
    p = config.get("params", {})
    s = p.get("s", game.extra.get("s", 1))
    d = p.get("d", 4)
    cfg = _seeded(game, seed)
    if p.get("retry", 0):
        rep = derandomize_with_retry(game.agent, game.env, s, d, cfg, seed, p["retry"])
    else:
        rep = derandomize(game.agent, game.env, s, d, cfg, seed)
    m = rep.to_json(include_samples=False)
    m.pop("format")
    m.pop("winner_table")
    m["winner_sound"] = rep.winner_win_prob is not None and rep.winner_win_prob > rep.threshold
    rows = [[r.index, ".".join("F" if a is None else str(a) for a in r.actions), r.weight]
            for r in rep.samples] if p.get("include_samples", True) else []
    return m, rows, {"report.json": rep.to_json()}


def _cmd_partial(config, seed, jobs):
    game = _need_game(config)
    p = config.get("params", {})
    if "members" not in p:
        raise ConfigInvalid("partial needs params.members (program mnemonics)")
    members = [ProgramAgent(AgentProgram.parse(t), game.cfg.max_action) for t in p["members"]]
    mix = partial_derandomize(members)
    probs = [exact_win_prob(a, game.env, game.cfg) for a in members]
    mixture = exact_win_prob(mix, game.env, game.cfg)
    avg = sum(probs, Fraction(0)) / len(probs)
    rows = [[i, str(a.program), w] for i, (a, w) in enumerate(zip(members, probs))]
    m = {"members": len(members), "mixture_win_prob": mixture, "member_average": avg,
         "identity_holds": mixture == avg, "winners": sum(1 for w in probs if w == 1)}
    return m, rows, {}


def _cmd_search(config, seed, jobs):
    game = _need_game(config)
    p = config.get("params", {})
    max_bits = p.get("max_bits", game.extra.get("max_bits", 12))
    space = AgentSpace.enumerated([AgentProgram.parse(t) for t in p["space"]]) \
        if "space" in p else AgentSpace()
    res = min_winning_description(game.env, game.cfg, max_bits, _rat(p.get("threshold", 0)),
                                  space, p.get("fuel", 256), jobs)
    m = res.to_json()
    m["max_bits"] = max_bits
    return m, [[res.bits, str(res.program), res.program.to_hex(), res.win_prob, res.examined]], {}


def _cmd_xi(config, seed, jobs):
    game = _need_game(config)
    p = config.get("params", {})
    budgets = p.get("budgets", [p.get("max_bits", game.extra.get("max_bits", 12))])
    rows = []
    reports = []
    for b in sorted(budgets):
        rep = xi_proxy(game.env, game.cfg, b, p.get("fuel", 256))
        reports.append(rep)
        rows.append([b, rep.mass, rep.xi_proxy, rep.programs_examined, len(rep.contributions)])
    xs = [r.xi_proxy for r in reports]
    m = {"budgets": sorted(budgets), "xi_proxy": xs, "mass": [r.mass for r in reports],
         "monotone": all(a >= b for a, b in zip(xs, xs[1:]))}
    return m, rows, {"xi.json": reports[-1].to_json()}


def ceil_log2(q: Fraction) -> int:
    """Smallest integer x with 2^x >= q, for q > 0."""
    x = 0
    while Fraction(2) ** x < q:
        x += 1
    while x > 0 and Fraction(2) ** (x - 1) >= q:
        x -= 1
    return x


def _cmd_labyrinth(config, seed, jobs):
    if "game" not in config:
        config = dict(config, game={"family": "labyrinth"})
    game = _need_game(config)
    if game.family != "labyrinth":
        raise ConfigInvalid("labyrinth needs a labyrinth game")
    p = config.get("params", {})
    lab = game.extra["lab"]
    eps = p.get("eps", 0.005)
    n = mixing_time(lab, eps)
    pi_goal = stationary_distribution(lab)[lab.goal]
    occ = occupancy(lab, n)[lab.goal]
    bound = Fraction(lab.d * 100, 201 * lab.c)
    rows = [[t, mixing_distance(lab, t), occupancy(lab, t)[lab.goal]] for t in range(n + 1)]
    lab_n = lab.with_turns(n)
    env = labyrinth_env(lab_n, game.extra["policy"], game.extra["reach_anytime"])
    cfg = GameConfig(max(n, 1), lab.max_degree + 1, seed)
    hero = uniform_hero(lab_n)
    m = {"rooms": lab.rooms, "c": lab.c, "d": lab.d, "eps": eps, "N": n,
         "mixing_distance": mixing_distance(lab, n), "p_goal": occ, "p_goal_float": float(occ),
         "stationary_goal": pi_goal, "gap": float(abs(occ - pi_goal)), "bound_2_01": bound,
         "gap_ok": abs(occ - pi_goal) < Fraction(1, 200), "above_bound": occ > bound,
         "hero_win_prob": exact_win_prob(hero, env, cfg)}
    if p.get("derandomize", False):
        s = p.get("s", ceil_log2(Fraction(201 * lab.c, 100 * lab.d)))
        rep = derandomize(hero, env, s, p.get("d", 4), cfg, seed)
        m.update({"s": s, "winner": rep.winner, "winner_win_prob": rep.winner_win_prob,
                  "winner_threshold": rep.threshold,
                  "winner_sound": rep.winner_win_prob > rep.threshold})
    return m, rows, {}


EXACT_TAIL_ROUNDS = 400  # beyond this the exact tail is slow and too long to print


def _cmd_evenodds(config, seed, jobs):
    game = _need_game(config)
    if game.family != "evenodds":
        raise ConfigInvalid("evenodds needs an evenodds game")
    spec: EvenOddsSpec = game.extra["spec"]
    p = config.get("params", {})
    mode = p.get("mode", "exact")
    m = {"mode": mode, "rounds": spec.rounds, "target": spec.target,
         "bound": Fraction(10, 64)}
    if spec.rounds <= EXACT_TAIL_ROUNDS:
        tail = rademacher_tail(spec.rounds, spec.target)
        m.update({"binomial_tail": tail, "binomial_tail_float": float(tail)})
    else:
        # continuity-corrected normal approximation of P(score >= target)
        m["normal_tail"] = normal_sf((spec.target - 1) / math.sqrt(spec.rounds))
    rows = []
    if mode == "exact":
        w = exact_win_prob(game.agent, game.env, game.cfg)
        m.update({"win_prob": w, "win_prob_float": float(w), "above_bound": w > Fraction(10, 64)})
        rows = [["win_prob", w]]
    elif mode == "mc":
        est = even_odds_mc(spec, game.agent, p.get("trials", 100_000), seed)
        m.update({"win_prob": est.estimate, "ci_halfwidth": est.ci_halfwidth, "wins": est.wins,
                  "trials": est.trials, "above_bound": est.estimate > 10 / 64})
        rows = [["win_prob", est.estimate]]
    else:
        dist = score_distribution(spec, game.agent)
        rows = [[k, v] for k, v in dist.items()]
        m["support"] = len(dist)
    return m, rows, {}


def _cmd_zerosum(config, seed, jobs):
    game = _need_game(config)
    if game.family != "zerosum":
        raise ConfigInvalid("zerosum needs a zerosum game")
    p = config.get("params", {})
    mode = p.get("mode", "kappa")
    k = kappa_constant(game.extra["stage"])
    m = {"mode": mode, "sigma2": k.sigma2, "kappa": k.kappa, "tail": k.tail, "mean": k.mean,
         "rounds": game.cfg.horizon, "threshold": game.env.threshold}
    if mode == "exact":
        w = exact_win_prob(game.agent, game.env, game.cfg)
        m.update({"win_prob": w, "win_prob_float": float(w)})
    elif mode == "mc":
        est = zero_sum_mc(game.env, game.agent, p.get("trials", 100_000), seed)
        m.update({"win_prob": est.estimate, "ci_halfwidth": est.ci_halfwidth, "wins": est.wins,
                  "trials": est.trials})
    rows = [[key, val] for key, val in m.items() if key != "mode"]
    return m, rows, {}


def _cmd_report(config, seed, jobs):
    p = config.get("params", {})
    if "configs" not in p:
        raise ConfigInvalid("report needs params.configs")
    rows = []
    summary = {}
    for path in p["configs"]:
        sub = load_config(_resolve(config.get("_base", "."), path))
        if sub["subcommand"] == "report":
            raise ConfigInvalid("reports cannot nest")
        rec = run_experiment(sub, seed=sub.get("seed", seed), jobs=jobs)
        summary[path] = jsonable(rec.metrics)
        for key, val in jsonable(rec.metrics).items():
            rows.append([path, rec.subcommand, key, json.dumps(val)])
    return {"runs": len(p["configs"]), "results": summary}, rows, {}


COMMANDS = {
    "play": _cmd_play, "winprob": _cmd_winprob, "fragment": _cmd_fragment,
    "derandomize": _cmd_derandomize, "partial": _cmd_partial, "search": _cmd_search,
    "xi": _cmd_xi, "labyrinth": _cmd_labyrinth, "evenodds": _cmd_evenodds,
    "zerosum": _cmd_zerosum, "report": _cmd_report,
}


def run_experiment(config: dict, seed: int | None = None, jobs: int = 1) -> RunRecord:
    """Validate ``config`` and run its subcommand.  ``seed`` overrides ``config["seed"]``."""
    clean = {k: v for k, v in config.items() if not k.startswith("_")}
    validate_config(clean)
    if seed is not None:
        config = dict(config, seed=seed)
    seed = config.get("seed", 0)
    t0 = time.perf_counter()
    metrics, rows, artifacts = COMMANDS[config["subcommand"]](config, seed, jobs)
    return RunRecord(
        subcommand=config["subcommand"], config_hash=config_hash(config), seed=seed,
        metrics=metrics, wall_time=round(time.perf_counter() - t0, 6),
        header=TABLE_HEADERS[config["subcommand"]], rows=rows, artifacts=artifacts,
    )
