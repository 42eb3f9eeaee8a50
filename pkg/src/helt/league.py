"""League orchestration: member lifecycles, snapshots, resets and PFSP opponent sampling.

Three live members train side by side.  The main agent plays every
snapshot in the pool and is never reset; the main exploiter plays the
current main agent and is reset after every snapshot; the league exploiter
plays everything and is reset with a fixed probability once past its first
few generations.  A member snapshots when it beats all of its candidates
often enough or when its iteration runs out of environment steps.

The orchestrator is the only writer of pool, win-rate table, matchup state
and member lifecycles.  Training work is delegated to a ``LeagueBackend``
whose match results come back through a queue; ``ScriptedBackend`` injects
outcomes for rule tests and ``helt.training.NeuralBackend`` runs real PPO.
"""

from __future__ import annotations

import enum
import io
import csv
import queue
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Protocol

import numpy as np

from .encoders import EncoderMode
from .errors import ConfigError, ContractViolation
from .evaluation import EloTable
from .game import Outcome
from .matchup import MatchupState, observe

LIVE_PREFIX = "live:"


class Role(str, enum.Enum):
    MAIN = "main"
    MAIN_EXPLOITER = "main_exploiter"
    LEAGUE_EXPLOITER = "league_exploiter"


ROLES = (Role.MAIN, Role.MAIN_EXPLOITER, Role.LEAGUE_EXPLOITER)


class Weighting(str, enum.Enum):
    HARD = "hard"
    VAR = "var"


def pfsp_weights(winrates, weighting: Weighting | str = Weighting.HARD,
                 p_hard: float = 2.0) -> np.ndarray:
    """Opponent probabilities from the learner's win rates against each candidate."""
    x = np.asarray(winrates, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ContractViolation("pfsp_weights needs a non-empty candidate vector")
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise ContractViolation("win rates must lie in [0, 1]")
    if Weighting(weighting) is Weighting.HARD:
        f = (1.0 - x) ** p_hard
    else:
        f = x * (1.0 - x)
    total = f.sum()
    if total <= 0:
        return np.full(x.size, 1.0 / x.size)
    return f / total


@dataclass(frozen=True)
class LeagueConfig:
    win_threshold: float = 0.8
    iteration_timeout_steps: int = 20_000
    total_iterations: int = 10
    league_exploiter_reset_prob: float = 0.25
    p_hard: float = 2.0
    reset_grace_iterations: int = 3
    reset_window: int = 3
    min_matches: int = 20
    winrate_smoothing: float = 0.99
    main_weighting: str = "hard"
    main_exploiter_weighting: str = "var"
    league_exploiter_weighting: str = "hard"
    main_mode: str = "QS"
    allow_fis_main: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.win_threshold < 1:
            raise ConfigError("league.win_threshold", "must lie in (0, 1)")
        if not 0 <= self.league_exploiter_reset_prob <= 1:
            raise ConfigError("league.league_exploiter_reset_prob", "must lie in [0, 1]")
        if not 0 <= self.winrate_smoothing < 1:
            raise ConfigError("league.winrate_smoothing", "must lie in [0, 1)")
        if self.iteration_timeout_steps < 1:
            raise ConfigError("league.iteration_timeout_steps", "must be >= 1")
        if self.total_iterations < 0:
            raise ConfigError("league.total_iterations", "must be >= 0")
        if self.p_hard <= 0:
            raise ConfigError("league.p_hard", "must be > 0")
        for name in ("reset_grace_iterations", "min_matches"):
            if getattr(self, name) < 0:
                raise ConfigError(f"league.{name}", "must be >= 0")
        if self.reset_window < 1:
            raise ConfigError("league.reset_window", "must be >= 1")
        for name in ("main_weighting", "main_exploiter_weighting", "league_exploiter_weighting"):
            if getattr(self, name) not in ("hard", "var"):
                raise ConfigError(f"league.{name}", "must be 'hard' or 'var'")
        try:
            mode = EncoderMode(self.main_mode.upper())
        except ValueError:
            raise ConfigError("league.main_mode", f"unknown encoder {self.main_mode!r}") from None
        if mode is EncoderMode.FIS and not self.allow_fis_main:
            raise ConfigError("league.main_mode",
                              "main agent must use QS or FQS (set allow_fis_main for ablations)")

    def mode_for(self, role: Role) -> EncoderMode:
        if role is Role.LEAGUE_EXPLOITER:
            return EncoderMode.FIS
        return EncoderMode(self.main_mode.upper())

    def weighting_for(self, role: Role) -> Weighting:
        return Weighting(getattr(self, f"{Role(role).value}_weighting"))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PolicySnapshot:
    snapshot_id: str
    role: Role
    generation: int
    created_step: int
    mode: EncoderMode
    params: Any  # frozen parameter dict (None in scripted runs)
    spec: Any = None


@dataclass
class LeagueMember:
    role: Role
    mode: EncoderMode
    params: Any
    generation: int = 1
    steps_in_iteration: int = 0
    total_steps: int = 0
    resets: int = 0
    matchup: MatchupState | None = None

    @property
    def live_id(self) -> str:
        return LIVE_PREFIX + self.role.value


class WinRateTable:
    """Bias-corrected EMA of P[member beats candidate], with match counts.

    After ``n`` results the estimate is ``m / (1 - s**n)`` where
    ``m <- s*m + (1-s)*score``, so a run of wins reads as exactly 1.
    Unplayed pairs report ``prior``.
    """

    def __init__(self, smoothing: float = 0.99, prior: float = 0.5) -> None:
        self.smoothing = smoothing
        self.prior = prior
        self._m: dict[tuple[str, str], float] = {}
        self._n: dict[tuple[str, str], int] = {}

    def record(self, member: str, candidate: str, score: float) -> None:
        if not 0.0 <= score <= 1.0:
            raise ContractViolation("match score must lie in [0, 1]")
        key = (member, candidate)
        self._m[key] = self.smoothing * self._m.get(key, 0.0) + (1 - self.smoothing) * score
        self._n[key] = self._n.get(key, 0) + 1

    def forget(self, member: str) -> None:
        """Drop every estimate for ``member``; used when its parameters are replaced."""
        for key in [k for k in self._n if k[0] == member]:
            del self._m[key], self._n[key]

    def count(self, member: str, candidate: str) -> int:
        return self._n.get((member, candidate), 0)

    def winrate(self, member: str, candidate: str) -> float:
        n = self.count(member, candidate)
        if n == 0:
            return self.prior
        return min(1.0, self._m[(member, candidate)] / (1.0 - self.smoothing ** n))

    def to_dict(self) -> dict:
        return {f"{a}|{b}": {"winrate": self.winrate(a, b), "matches": self._n[(a, b)]}
                for a, b in sorted(self._n)}


def candidate_ids(member: LeagueMember, pool: list[PolicySnapshot],
                  members: dict[Role, LeagueMember], cfg: LeagueConfig) -> list[str]:
    if member.role is Role.MAIN:
        return [s.snapshot_id for s in pool]
    if member.role is Role.MAIN_EXPLOITER:
        live = members[Role.MAIN].live_id
        if member.generation <= cfg.reset_grace_iterations:
            return [live] + [s.snapshot_id for s in pool if s.role is Role.MAIN]
        return [live]
    others = [m.live_id for r, m in members.items() if r is not member.role]
    return [s.snapshot_id for s in pool] + others


def _weighting(member: LeagueMember, cfg: LeagueConfig) -> Weighting:
    if member.role is Role.MAIN_EXPLOITER and member.generation <= cfg.reset_grace_iterations:
        return Weighting.VAR
    return cfg.weighting_for(member.role)


def sample_opponent(member: LeagueMember, pool: list[PolicySnapshot],
                    members: dict[Role, LeagueMember], table: WinRateTable,
                    cfg: LeagueConfig, rng: np.random.Generator) -> str:
    """Candidate id drawn with PFSP probabilities for the member's role."""
    cands = candidate_ids(member, pool, members, cfg)
    if not cands:
        raise ContractViolation("empty candidate set; bootstrap the pool first")
    if len(cands) == 1:
        return cands[0]
    w = pfsp_weights([table.winrate(member.live_id, c) for c in cands],
                     _weighting(member, cfg), cfg.p_hard)
    return cands[int(rng.choice(len(cands), p=w))]


def min_winrate(member: LeagueMember, pool: list[PolicySnapshot],
                members: dict[Role, LeagueMember], table: WinRateTable,
                cfg: LeagueConfig) -> float:
    cands = candidate_ids(member, pool, members, cfg)
    return min(table.winrate(member.live_id, c) for c in cands)


def should_snapshot(member: LeagueMember, pool: list[PolicySnapshot],
                    members: dict[Role, LeagueMember], table: WinRateTable,
                    cfg: LeagueConfig) -> bool:
    if member.steps_in_iteration >= cfg.iteration_timeout_steps:
        return True
    for c in candidate_ids(member, pool, members, cfg):
        if table.count(member.live_id, c) < cfg.min_matches:
            return False
        if table.winrate(member.live_id, c) < cfg.win_threshold:
            return False
    return True


def freeze(params: Any) -> Any:
    if isinstance(params, dict):
        out = {k: np.array(v, copy=True) for k, v in params.items()}
        for v in out.values():
            v.setflags(write=False)
        return out
    return params


def thaw(params: Any) -> Any:
    if isinstance(params, dict):
        return {k: np.array(v, copy=True) for k, v in params.items()}
    return params


def on_snapshot(member: LeagueMember, pool: list[PolicySnapshot], rng: np.random.Generator,
                cfg: LeagueConfig, fresh: Callable[[Role], Any], step: int = 0,
                spec: Any = None) -> tuple[PolicySnapshot, dict]:
    """Publish a frozen copy, then apply the role's reset rule.

    Returns the new snapshot and an event record.  ``member`` and ``pool``
    are updated in place; ``fresh(role)`` supplies new parameters when a
    reset finds no earlier snapshot to return to.
    """
    snap = PolicySnapshot(f"{member.role.value}-g{member.generation}", member.role,
                          member.generation, step, member.mode, freeze(member.params), spec)
    pool.append(snap)
    if member.role is Role.MAIN:
        reset = False
    elif member.role is Role.MAIN_EXPLOITER:
        reset = True
    else:
        reset = (member.generation > cfg.reset_grace_iterations
                 and bool(rng.random() < cfg.league_exploiter_reset_prob))
    event = {"kind": "snapshot", "role": member.role.value, "generation": member.generation,
             "snapshot": snap.snapshot_id, "step": step, "reset": reset, "reset_to": None}
    if reset:
        own = [s for s in pool if s.role is member.role and s.generation > 0]
        recent = own[-cfg.reset_window:]
        if recent:
            target = recent[int(rng.integers(len(recent)))]
            member.params = thaw(target.params)
            event["reset_to"] = target.snapshot_id
        else:
            member.params = fresh(member.role)
            event["reset_to"] = "fresh"
        member.resets += 1
    member.generation += 1
    member.steps_in_iteration = 0
    return snap, event


# --- backends --------------------------------------------------------------------

@dataclass(frozen=True)
class MatchRecord:
    opponent_id: str
    score: float  # 1 learner win, 0.5 draw, 0 loss
    pair: tuple[int, int] | None = None  # (opponent char, learner char)


class LeagueBackend(Protocol):
    n_characters: int

    def fresh_params(self, role: Role, mode: EncoderMode, rng: np.random.Generator) -> Any: ...

    def params_reset(self, member: LeagueMember) -> None: ...

    def train_round(self, member: LeagueMember, league: "League", rng: np.random.Generator,
                    results: "queue.SimpleQueue[tuple[Role, MatchRecord]]") -> int: ...

    def net_spec(self, member: LeagueMember) -> Any: ...


class ScriptedBackend:
    """Plays no games: outcomes come from ``outcome(member, opponent_id, rng) -> score``."""

    def __init__(self, outcome: Callable[[LeagueMember, str, np.random.Generator], float],
                 steps_per_round: int = 100, matches_per_round: int = 10,
                 n_characters: int = 2) -> None:
        self.outcome = outcome
        self.steps_per_round = steps_per_round
        self.matches_per_round = matches_per_round
        self.n_characters = n_characters

    def fresh_params(self, role, mode, rng):
        return {"w": rng.normal(size=2)}

    def params_reset(self, member):
        pass

    def net_spec(self, member):
        return None

    def train_round(self, member, league, rng, results):
        for _ in range(self.matches_per_round):
            opp = league.sample_opponent(member, rng)
            pair = league.sample_pair(member, rng)
            results.put((member.role, MatchRecord(opp, float(self.outcome(member, opp, rng)),
                                                  pair)))
        return self.steps_per_round


# --- the league itself -----------------------------------------------------------

METRIC_FIELDS = ("iteration", "member", "elo", "min_winrate", "resets", "total_steps",
                 "snapshot", "reset_to")


class League:
    def __init__(self, cfg: LeagueConfig, backend: LeagueBackend, seed: int,
                 matchup_gamma: float = 0.99, matchup_eta: float = 0.1) -> None:
        self.cfg = cfg
        self.backend = backend
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(len(ROLES) + 1)
        self.rng = np.random.default_rng(children[0])
        self.member_rngs = {r: np.random.default_rng(c) for r, c in zip(ROLES, children[1:])}
        self.table = WinRateTable(cfg.winrate_smoothing)
        self.elo = EloTable()
        self.pool: list[PolicySnapshot] = []
        self.members: dict[Role, LeagueMember] = {}
        self.events: list[dict] = []
        self.metrics: list[dict] = []
        self.results: "queue.SimpleQueue[tuple[Role, MatchRecord]]" = queue.SimpleQueue()
        n = backend.n_characters
        for role in ROLES:
            mode = cfg.mode_for(role)
            params = backend.fresh_params(role, mode, self.rng)
            self.members[role] = LeagueMember(role, mode, params,
                                              matchup=MatchupState.fresh(n, matchup_gamma,
                                                                         matchup_eta))
        self._check_roles()
        # bootstrap: one frozen copy of every random initialization
        for m in self.members.values():
            snap = PolicySnapshot(f"{m.role.value}-g0", m.role, 0, 0, m.mode, freeze(m.params),
                                  backend.net_spec(m))
            self.pool.append(snap)
            self.elo.rating(m.live_id)
            self.elo.ratings[snap.snapshot_id] = self.elo.initial
            self.events.append({"kind": "bootstrap", "role": m.role.value, "generation": 0,
                                "snapshot": snap.snapshot_id, "step": 0, "reset": False,
                                "reset_to": None})

    def _check_roles(self) -> None:
        main = self.members[Role.MAIN]
        if self.members[Role.MAIN_EXPLOITER].mode is not main.mode:
            raise ContractViolation("main exploiter must share the main agent's encoder")
        if self.members[Role.LEAGUE_EXPLOITER].mode is not EncoderMode.FIS:
            raise ContractViolation("league exploiter must use the FIS encoder")

    # lookups used by backends ---------------------------------------------------
    def sample_opponent(self, member: LeagueMember, rng: np.random.Generator) -> str:
        return sample_opponent(member, self.pool, self.members, self.table, self.cfg, rng)

    def sample_pair(self, member: LeagueMember, rng: np.random.Generator) -> tuple[int, int]:
        from .matchup import sample_pair
        return sample_pair(member.matchup, rng)

    def resolve(self, opponent_id: str) -> PolicySnapshot | LeagueMember:
        if opponent_id.startswith(LIVE_PREFIX):
            return self.members[Role(opponent_id[len(LIVE_PREFIX):])]
        for s in self.pool:
            if s.snapshot_id == opponent_id:
                return s
        raise ContractViolation(f"unknown opponent {opponent_id!r}")

    def active(self, member: LeagueMember) -> bool:
        return member.generation <= self.cfg.total_iterations

    @property
    def step(self) -> int:
        return sum(m.total_steps for m in self.members.values())

    # orchestration --------------------------------------------------------------
    def _drain(self) -> None:
        while True:
            try:
                role, rec = self.results.get_nowait()
            except queue.Empty:
                return
            member = self.members[role]
            self.table.record(member.live_id, rec.opponent_id, rec.score)
            outcome = (Outcome.A_WINS if rec.score == 1.0 else
                       Outcome.B_WINS if rec.score == 0.0 else Outcome.DRAW)
            self.elo.record(member.live_id, rec.opponent_id, outcome)
            if rec.pair is not None and member.matchup is not None and rec.score != 0.5:
                member.matchup = observe(member.matchup, rec.pair[0], rec.pair[1],
                                         rec.score == 1.0)

    def _after_round(self, member: LeagueMember, steps: int) -> None:
        member.steps_in_iteration += steps
        member.total_steps += steps
        if not should_snapshot(member, self.pool, self.members, self.table, self.cfg):
            return
        low = min_winrate(member, self.pool, self.members, self.table, self.cfg)
        iteration = member.generation
        snap, event = on_snapshot(member, self.pool, self.member_rngs[member.role], self.cfg,
                                  lambda role: self.backend.fresh_params(
                                      role, member.mode, self.member_rngs[role]),
                                  self.step, self.backend.net_spec(member))
        self.elo.ratings[snap.snapshot_id] = self.elo.rating(member.live_id)
        if event["reset"]:
            self.table.forget(member.live_id)
            self.backend.params_reset(member)
        self.events.append(event)
        self.metrics.append({
            "iteration": iteration, "member": member.role.value,
            "elo": self.elo.rating(member.live_id), "min_winrate": low,
            "resets": member.resets, "total_steps": member.total_steps,
            "snapshot": snap.snapshot_id, "reset_to": event["reset_to"] or "",
        })

    def run(self, deterministic: bool = True, max_rounds: int | None = None) -> "League":
        rounds = 0
        pool_exec = None if deterministic else ThreadPoolExecutor(max_workers=len(ROLES))
        try:
            while any(self.active(m) for m in self.members.values()):
                if max_rounds is not None and rounds >= max_rounds:
                    break
                live = [m for m in self.members.values() if self.active(m)]
                if pool_exec is None:
                    for m in live:
                        steps = self.backend.train_round(m, self, self.member_rngs[m.role],
                                                         self.results)
                        self._drain()
                        self._after_round(m, steps)
                else:
                    futures = [pool_exec.submit(self.backend.train_round, m, self,
                                                self.member_rngs[m.role], self.results)
                               for m in live]
                    steps = [f.result() for f in futures]
                    self._drain()
                    for m, s in zip(live, steps):
                        self._after_round(m, s)
                rounds += 1
        finally:
            if pool_exec is not None:
                pool_exec.shutdown()
        return self

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=METRIC_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.metrics:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "config": self.cfg.to_dict(),
            "snapshots": [{"id": s.snapshot_id, "role": s.role.value, "generation": s.generation,
                           "created_step": s.created_step, "mode": s.mode.value}
                          for s in self.pool],
            "members": {r.value: {"mode": m.mode.value, "generation": m.generation,
                                  "total_steps": m.total_steps, "resets": m.resets,
                                  "matchup": m.matchup.to_dict() if m.matchup else None}
                        for r, m in self.members.items()},
            "winrates": self.table.to_dict(),
            "elo": self.elo.to_dict(),
        }


def run_league(cfg: LeagueConfig, backend: LeagueBackend, seed: int,
               deterministic: bool = True, **kwargs) -> League:
    return League(cfg, backend, seed, **kwargs).run(deterministic)
