"""Command line entry point: ``python -m helt`` or the ``helt`` script.

Subcommands::

    pool gen --out POOL.jsonl [--per-level N] [--seed S]
    league run --config CFG.json [--seed S] [--out DIR]
    eval elo|behavior|generalization --run DIR [--matches N] [--seed S]
    report --run DIR

Every command that writes output also writes a ``*.manifest.json`` with the
config hash and seed needed to replay it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .agents import AggressiveBot, PolicyAgent, RandomAgent
from .checkpoint import load_snapshot, save_snapshot
from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, CorruptionError, ContractViolation, NumericError
from .evaluation import (
    BEHAVIOR_METRICS, BehaviorLog, behavior_scores, cdf_report, evaluate_pool, generalization,
)
from .game import ActionEvent, CharacterSpec
from .io import atomic_write_text, canonical_json
from .league import League, PolicySnapshot, Role
from .matchup import to_csv
from .pool import generate_pool, save_pool
from .rollout import PlayedMatch, play_matches
from .training import NeuralBackend


def _write_manifest(path: Path, command: str, cfg: RunConfig | None, seed: int | None,
                    files: Sequence[str], extra: dict | None = None) -> None:
    manifest = {"command": command, "version": __version__, "seed": seed,
                "config_hash": cfg.config_hash() if cfg else None,
                "files": sorted(files), **(extra or {})}
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# --- pool ------------------------------------------------------------------------

def cmd_pool_gen(args) -> int:
    pool = generate_pool(args.per_level, args.seed)
    out = save_pool(pool, args.out)
    _write_manifest(out.with_name(out.name + ".manifest.json"), "pool gen", None, args.seed,
                    [out.name], {"per_level": args.per_level})
    print(f"wrote {len(pool)} characters to {out}")
    return 0


# --- league ----------------------------------------------------------------------

def run_dir_for(cfg: RunConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    return cfg.output_root() / f"league-{cfg.config_hash()[:10]}-s{cfg.seed}"


def train_league(cfg: RunConfig) -> tuple[League, NeuralBackend]:
    familiar, _ = cfg.split()
    backend = NeuralBackend(familiar, cfg.learner, cfg.env.reward(), cfg.env.horizon)
    league = League(cfg.league, backend, cfg.seed, cfg.matchup.gamma_smooth, cfg.matchup.eta)
    league.run(cfg.deterministic)
    return league, backend


def write_league(league: League, backend: NeuralBackend, cfg: RunConfig, run: Path) -> list[str]:
    files = []

    def put(name: str, text: str) -> None:
        atomic_write_text(run / name, text)
        files.append(name)

    dump_config(cfg, run / "config.json")
    files.append("config.json")
    put("metrics.csv", league.metrics_csv())
    put("events.jsonl", "".join(canonical_json(e) + "\n" for e in league.events))
    put("league.json", json.dumps(league.manifest(), indent=2, sort_keys=True) + "\n")
    for role, m in league.members.items():
        put(f"matchup_{role.value}.csv", to_csv(m.matchup.weights))
    h = cfg.config_hash()
    for snap in league.pool:
        save_snapshot(snap, run / "snapshots", h)
    for role, m in league.members.items():
        final = PolicySnapshot(role.value, role, m.generation - 1, m.total_steps, m.mode,
                               m.params, backend.net_spec(m))
        save_snapshot(final, run / "final", h)
    files += ["snapshots/", "final/"]
    return files


def load_run(run: Path) -> tuple[RunConfig, list[CharacterSpec], list[CharacterSpec]]:
    if not (run / "config.json").is_file():
        raise ConfigError("--run", f"{run} is not a finished league run (no config.json)")
    cfg = load_config(run / "config.json")
    familiar, held = cfg.split()
    return cfg, familiar, held


def final_agent(run: Path, role: str = "main") -> PolicyAgent:
    snap = load_snapshot(run / "final" / f"{role}.json")
    return PolicyAgent(snap.spec, snap.params, role)


def _match_record(k: int, names: tuple[str, str], m: PlayedMatch) -> str:
    return canonical_json({
        "match": k, "agents": list(names), "chars": [m.specs[0].char_id, m.specs[1].char_id],
        "outcome": m.outcome.value, "frames": m.frames, "final_hp": list(m.final_hp),
        "events": [list(e) for e in (m.events or [])],
    }) + "\n"


def record_matches(run: Path, cfg: RunConfig, n: int, rng: np.random.Generator,
                   chars: list[CharacterSpec]) -> str:
    """Main agent against the scripted baselines; returns the JSONL match log."""
    agent = final_agent(run)
    lines, k = [], 0
    for opp in (AggressiveBot(), RandomAgent()):
        idx = rng.integers(0, len(chars), (n, 2))
        played = play_matches(agent, opp, [(chars[i], chars[j]) for i, j in idx], rng,
                              cfg.env.horizon, record=True)
        for m in played:
            lines.append(_match_record(k, ("main", opp.name), m))
            k += 1
    return "".join(lines)


def cmd_league_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    run = run_dir_for(cfg, args.out)
    league, backend = train_league(cfg)
    files = write_league(league, backend, cfg, run)
    _write_manifest(run / "run.manifest.json", "league run", cfg, cfg.seed, files,
                    {"deterministic": cfg.deterministic,
                     "total_steps": {r.value: m.total_steps for r, m in league.members.items()}})
    print(f"league finished: {len(league.pool)} snapshots, outputs in {run}")
    return 0


# --- eval ------------------------------------------------------------------------

def _eval_rng(cfg: RunConfig, seed: int | None, salt: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed if seed is None else seed, salt])


def cmd_eval_elo(args) -> int:
    run = Path(args.run)
    cfg, familiar, _ = load_run(run)
    n = args.matches or cfg.evaluation.n_matches
    agents = {r.value: final_agent(run, r.value) for r in Role}
    agents["aggressive"] = AggressiveBot()
    agents["random"] = RandomAgent()
    report = evaluate_pool(agents, familiar, n, _eval_rng(cfg, args.seed, 1), cfg.env.horizon)
    rows = [["agent", "elo", "elo_mean"]] + [
        [a, repr(report.elo.ratings[a]), repr(report.elo_mean[a])] for a in report.names]
    atomic_write_text(run / "elo.csv", _csv(rows))
    wr = [["agent"] + report.names] + [
        [a] + [repr(float(v)) for v in report.winrate[i]] for i, a in enumerate(report.names)]
    atomic_write_text(run / "winrate.csv", _csv(wr))
    _write_manifest(run / "elo.manifest.json", "eval elo", cfg, args.seed, ["elo.csv", "winrate.csv"],
                    {"matches_per_pair": n})
    for a in report.names:
        print(f"{a:18s} elo {report.elo.ratings[a]:8.1f}")
    return 0


def cmd_eval_behavior(args) -> int:
    run = Path(args.run)
    cfg, familiar, _ = load_run(run)
    n = args.matches or cfg.evaluation.n_matches
    log = record_matches(run, cfg, n, _eval_rng(cfg, args.seed, 2), familiar)
    atomic_write_text(run / "matches.jsonl", log)
    _write_manifest(run / "behavior.manifest.json", "eval behavior", cfg, args.seed,
                    ["matches.jsonl"], {"matches_per_opponent": n})
    print(f"recorded {2 * n} matches to {run / 'matches.jsonl'}")
    return 0


def cmd_eval_generalization(args) -> int:
    run = Path(args.run)
    cfg, familiar, held = load_run(run)
    n = args.matches or cfg.evaluation.n_matches
    agents = {"main": final_agent(run, "main"),
              "league_exploiter": final_agent(run, "league_exploiter"),
              "aggressive": AggressiveBot(), "random": RandomAgent()}
    table, _, _ = generalization(agents, familiar, held, n, _eval_rng(cfg, args.seed, 3),
                                 cfg.env.horizon)
    atomic_write_text(run / "generalization.json", json.dumps(table, indent=2, sort_keys=True) + "\n")
    _write_manifest(run / "generalization.manifest.json", "eval generalization", cfg, args.seed,
                    ["generalization.json"], {"matches_per_pair": n})
    for name, row in table.items():
        print(f"{name:18s} familiar {row['familiar']:8.1f} held-out {row['held_out']:8.1f} "
              f"drop {row['drop']:7.1f}")
    return 0


# --- report ----------------------------------------------------------------------

def behavior_populations(lines: Sequence[str], chars: dict[int, CharacterSpec],
                         opening_window: int, counter_window: int) -> dict[str, dict[str, list]]:
    """Per agent name, per metric: one score per (match, side) that agent played."""
    out: dict[str, dict[str, list]] = {}
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        events = [ActionEvent(*e) for e in rec["events"]]
        for side, name in enumerate(rec["agents"]):
            log = BehaviorLog(side, chars[rec["chars"][side]], events, rec["frames"])
            scores = behavior_scores(log, opening_window, counter_window)
            pop = out.setdefault(name, {k: [] for k in scores})
            for k, v in scores.items():
                pop[k].append(v)
    return out


def cmd_report(args) -> int:
    run = Path(args.run)
    cfg, _, _ = load_run(run)
    log_path = run / "matches.jsonl"
    if not log_path.is_file():
        raise ConfigError("--run", f"{run} has no matches.jsonl; run `eval behavior` first")
    chars = {c.char_id: c for c in cfg.characters()}
    pops = behavior_populations(log_path.read_text().splitlines(), chars,
                                cfg.evaluation.opening_window, cfg.evaluation.counter_window)
    files = []
    for metric in BEHAVIOR_METRICS + ("error_rate",):
        curves = cdf_report({name: pop[metric] for name, pop in pops.items()})
        rows = [["population", "score", "cdf"]]
        for name, (x, y) in curves.items():
            rows += [[name, repr(float(a)), repr(float(b))] for a, b in zip(x, y)]
        atomic_write_text(run / f"cdf_{metric}.csv", _csv(rows))
        files.append(f"cdf_{metric}.csv")
    summary = {name: {k: float(np.mean(v)) for k, v in pop.items()} for name, pop in pops.items()}
    if (run / "metrics.csv").is_file():
        summary["_league_metrics_rows"] = len((run / "metrics.csv").read_text().splitlines()) - 1
    atomic_write_text(run / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    files.append("summary.json")
    _write_manifest(run / "report.manifest.json", "report", cfg, cfg.seed, files)
    for name, pop in summary.items():
        if isinstance(pop, dict):
            print(name, " ".join(f"{k}={v:.3f}" for k, v in pop.items()))
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helt", description="Heterogeneous league training.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="character pools").add_subparsers(dest="action",
                                                                         required=True)
    gen = pool.add_parser("gen", help="generate a synthetic character pool")
    gen.add_argument("--out", required=True)
    gen.add_argument("--per-level", type=int, default=3)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_pool_gen)

    league = sub.add_parser("league", help="league training").add_subparsers(dest="action",
                                                                             required=True)
    lr = league.add_parser("run", help="run league training")
    lr.add_argument("--config", required=True)
    lr.add_argument("--seed", type=int)
    lr.add_argument("--out", help="run directory (default: <output_dir>/league-<hash>-s<seed>)")
    lr.set_defaults(func=cmd_league_run)

    ev = sub.add_parser("eval", help="evaluate a finished run").add_subparsers(dest="action",
                                                                               required=True)
    for name, func in (("elo", cmd_eval_elo), ("behavior", cmd_eval_behavior),
                       ("generalization", cmd_eval_generalization)):
        e = ev.add_parser(name)
        e.add_argument("--run", required=True)
        e.add_argument("--matches", type=int)
        e.add_argument("--seed", type=int)
        e.set_defaults(func=func)

    rep = sub.add_parser("report", help="write CDF CSVs and a summary for a run")
    rep.add_argument("--run", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorruptionError, ContractViolation, NumericError) as exc:
        print(f"helt: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
