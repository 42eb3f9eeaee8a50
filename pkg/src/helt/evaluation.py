"""Elo ratings, pool evaluation, rule-based behavior scores and difficulty wrappers.

The behavior scorers are stand-ins built from simple counting rules over
the game's action events; each returns a value in [0, 1], and a metric
with no qualifying events scores 0 so every score distribution stays total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .agents import Agent
from .errors import ConfigError, ContractViolation
from .game import (
    OFFENSIVE_SLOTS, PUNCH, SUBSTITUTE, ActionEvent, ActionTriple, CharacterSpec, GameState,
    Outcome,
)
from .rollout import PlayedMatch, play_matches

ELO_INITIAL = 1200.0
ELO_K = 32.0
OPENING_WINDOW = 90
COUNTER_WINDOW = 30


# --- Elo -------------------------------------------------------------------------

def expected_score(ra: float, rb: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((rb - ra) / 400.0))


def _score_a(outcome: Outcome | str) -> float:
    outcome = Outcome(outcome)
    if outcome is Outcome.ONGOING:
        raise ContractViolation("cannot rate an unfinished match")
    return {Outcome.A_WINS: 1.0, Outcome.B_WINS: 0.0, Outcome.DRAW: 0.5}[outcome]


def elo_update(ra: float, rb: float, outcome: Outcome | str, k: float = ELO_K,
               ) -> tuple[float, float]:
    # one shared delta keeps the pair exactly zero-sum in floating point
    delta = k * (_score_a(outcome) - expected_score(ra, rb))
    return ra + delta, rb - delta


@dataclass
class EloTable:
    ratings: dict[str, float] = field(default_factory=dict)
    k_factor: float = ELO_K
    initial: float = ELO_INITIAL

    def rating(self, name: str) -> float:
        return self.ratings.setdefault(name, self.initial)

    def record(self, a: str, b: str, outcome: Outcome | str) -> None:
        ra, rb = elo_update(self.rating(a), self.rating(b), outcome, self.k_factor)
        self.ratings[a], self.ratings[b] = ra, rb

    def to_dict(self) -> dict[str, float]:
        return dict(sorted(self.ratings.items()))


# --- pool evaluation -------------------------------------------------------------

@dataclass
class PoolReport:
    names: list[str]
    wins: np.ndarray  # [i, j]: points scored by i against j (draws count half)
    games: np.ndarray
    elo: EloTable
    elo_mean: dict[str, float]  # rating averaged over the second half of the stream
    pair_counts: dict[tuple[int, int], int]

    @property
    def winrate(self) -> np.ndarray:
        return np.where(self.games > 0, self.wins / np.maximum(self.games, 1), np.nan)


def _flip(outcome: Outcome) -> Outcome:
    return {Outcome.A_WINS: Outcome.B_WINS, Outcome.B_WINS: Outcome.A_WINS}.get(outcome, outcome)


def evaluate_pool(agents: Mapping[str, Agent], characters: Sequence[CharacterSpec],
                  n_matches: int, rng: np.random.Generator, horizon: int = 1800,
                  opponent_characters: Sequence[CharacterSpec] | None = None,
                  parallel: int = 64) -> PoolReport:
    """Round-robin over every pair of agents, ``n_matches`` per pair.

    Each match draws both characters uniformly from ``characters`` (the
    second agent of a pairing draws from ``opponent_characters`` when
    given) and sides alternate between matches.  Elo runs over the match
    stream in round-robin order: match 0 of every pair, then match 1, and so on.
    """
    names = list(agents)
    if len(names) < 2:
        raise ContractViolation("evaluate_pool needs at least two agents")
    chars = list(characters)
    opp_chars = list(opponent_characters) if opponent_characters is not None else chars
    if not chars or not opp_chars:
        raise ContractViolation("character split is empty")
    if n_matches < 1:
        raise ContractViolation("n_matches must be >= 1")
    n = len(names)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    counts: dict[tuple[int, int], int] = {}
    outcomes: dict[tuple[int, int], list[Outcome]] = {}
    for a, b in pairs:
        ci = rng.integers(0, len(chars), n_matches)
        cj = rng.integers(0, len(opp_chars), n_matches)
        for x, y in zip(ci, cj):
            counts[(int(x), int(y))] = counts.get((int(x), int(y)), 0) + 1
        seeds = [int(s) for s in rng.integers(0, 2**31 - 1, n_matches)]
        # even matches put agent a on side A, odd matches swap sides
        even, odd = list(range(0, n_matches, 2)), list(range(1, n_matches, 2))
        res: dict[int, Outcome] = {}
        played = play_matches(agents[names[a]], agents[names[b]],
                              [(chars[ci[m]], opp_chars[cj[m]]) for m in even], rng,
                              horizon, parallel, seeds=[seeds[m] for m in even])
        res.update((m, p.outcome) for m, p in zip(even, played))
        if odd:
            played = play_matches(agents[names[b]], agents[names[a]],
                                  [(opp_chars[cj[m]], chars[ci[m]]) for m in odd], rng,
                                  horizon, parallel, seeds=[seeds[m] for m in odd])
            res.update((m, _flip(p.outcome)) for m, p in zip(odd, played))
        outcomes[(a, b)] = [res[m] for m in range(n_matches)]

    wins, games = np.zeros((n, n)), np.zeros((n, n))
    elo = EloTable()
    for name in names:
        elo.rating(name)
    sums = dict.fromkeys(names, 0.0)
    tail = 0
    for m in range(n_matches):
        for a, b in pairs:
            outcome = outcomes[(a, b)][m]
            s = _score_a(outcome)
            wins[a, b] += s
            wins[b, a] += 1.0 - s
            games[a, b] += 1
            games[b, a] += 1
            elo.record(names[a], names[b], outcome)
        if m >= n_matches // 2:
            tail += 1
            for name in names:
                sums[name] += elo.ratings[name]
    elo_mean = {name: sums[name] / tail for name in names}
    return PoolReport(names, wins, games, elo, elo_mean, counts)


def win_rate(agent: Agent, opponent: Agent, characters: Sequence[CharacterSpec],
             n_matches: int, rng: np.random.Generator, horizon: int = 1800,
             opponent_characters: Sequence[CharacterSpec] | None = None) -> float:
    """Fraction of points ``agent`` scores against ``opponent`` (draws count half)."""
    report = evaluate_pool({"agent": agent, "opponent": opponent}, characters, n_matches, rng,
                           horizon, opponent_characters)
    return float(report.winrate[0, 1])



def generalization(agents: Mapping[str, Agent], familiar: Sequence[CharacterSpec],
                   held_out: Sequence[CharacterSpec], n_matches: int,
                   rng: np.random.Generator, horizon: int = 1800,
                   ) -> tuple[dict[str, dict[str, float]], PoolReport, PoolReport]:
    """Elo of every agent when all characters come from the familiar vs the held-out set.

    Both pools play the same agents with the same number of matches; the
    returned ``drop`` is familiar minus held-out, using the averaged rating.
    """
    if not held_out:
        raise ConfigError("subset", "the pool has no held-out characters")
    if not familiar:
        raise ConfigError("subset", "the training subset is empty")
    fam = evaluate_pool(agents, familiar, n_matches, rng, horizon)
    unf = evaluate_pool(agents, held_out, n_matches, rng, horizon)
    table = {name: {"familiar": fam.elo_mean[name], "held_out": unf.elo_mean[name],
                    "drop": fam.elo_mean[name] - unf.elo_mean[name]} for name in agents}
    return table, fam, unf

# --- behavior scores -------------------------------------------------------------

@dataclass
class BehaviorLog:
    """Activation events of one finished match, seen from ``side``."""

    side: int
    spec: CharacterSpec
    events: list[ActionEvent]
    frames: int
    snapshots: list[tuple[int, tuple[int, int], tuple[float, float]]] = field(default_factory=list)

    def __post_init__(self) -> None:
        last = -1
        for e in self.events:
            if e.frame < last:
                raise ContractViolation("behavior log frames must be non-decreasing")
            if e.damage < 0:
                raise ContractViolation("behavior log damage must be >= 0")
            last = e.frame

    @classmethod
    def from_match(cls, match: PlayedMatch, side: int) -> "BehaviorLog":
        if match.events is None:
            raise ContractViolation("match was played without recording events")
        return cls(side, match.specs[side], list(match.events), match.frames,
                   list(match.snapshots or []))


BEHAVIOR_METRICS = ("substitution", "special", "blitz", "counter", "attack")


def _fraction(num: int, den: int) -> float:
    return num / den if den else 0.0


def behavior_scores(log: BehaviorLog, opening_window: int = OPENING_WINDOW,
                    counter_window: int = COUNTER_WINDOW) -> dict[str, float]:
    """Five rule-based scores in [0, 1] plus ``error_rate`` = 1 - substitution.

    substitution: share of own substitutes that negated a hit.
    special: share of own strongest-skill activations that landed.
    blitz: 1 - (start frame of the first own attack) / opening window; 0 if none inside it.
    counter: share of opponent attacks that connected or were negated which
        were negated by a substitute and punished by an own hit within
        ``counter_window`` frames.
    attack: share of own punches that landed.
    """
    mine = [e for e in log.events if e.side == log.side]
    theirs = [e for e in log.events if e.side != log.side]

    subs = [e for e in mine if e.slot == SUBSTITUTE]
    substitution = _fraction(sum(e.outcome == "negated" for e in subs), len(subs))

    strongest = log.spec.strongest_skill
    special_uses = [e for e in mine if e.slot == strongest]
    special = _fraction(sum(e.outcome == "hit" for e in special_uses), len(special_uses))

    starts = [e.start_frame for e in mine if e.slot in OFFENSIVE_SLOTS]
    first = min(starts) if starts else None
    blitz = 0.0 if first is None or first >= opening_window else 1.0 - first / opening_window

    my_hits = sorted(e.frame for e in mine if e.outcome == "hit" and e.slot in OFFENSIVE_SLOTS)
    openers = [e for e in theirs if e.slot in OFFENSIVE_SLOTS and e.outcome in ("hit", "blocked")]
    answered = 0
    for e in openers:
        if e.outcome == "blocked" and any(e.frame < f <= e.frame + counter_window for f in my_hits):
            answered += 1
    counter = _fraction(answered, len(openers))

    punches = [e for e in mine if e.slot == PUNCH]
    attack = _fraction(sum(e.outcome == "hit" for e in punches), len(punches))

    scores = {"substitution": substitution, "special": special, "blitz": blitz,
              "counter": counter, "attack": attack}
    scores["error_rate"] = 1.0 - substitution
    return scores


def cdf_report(scores: Mapping[str, Sequence[float]]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Empirical CDF per population: sorted values and cumulative heights k/n."""
    out = {}
    for name, values in scores.items():
        v = np.sort(np.asarray(values, dtype=np.float64))
        if v.size == 0:
            raise ContractViolation(f"population {name!r} has no scores")
        out[name] = (v, np.arange(1, v.size + 1) / v.size)
    return out


# --- difficulty ------------------------------------------------------------------

@dataclass(frozen=True)
class DifficultyConfig:
    delay_frames: int = 1
    exec_prob: float = 1.0

    def __post_init__(self) -> None:
        if self.delay_frames < 1:
            raise ConfigError("difficulty.delay_frames", "must be >= 1")
        if not 0.0 <= self.exec_prob <= 1.0:
            raise ConfigError("difficulty.exec_prob", "must lie in [0, 1]")

    @classmethod
    def preset(cls, name: str) -> "DifficultyConfig":
        try:
            return DIFFICULTY_PRESETS[name]
        except KeyError:
            raise ConfigError("difficulty", f"unknown preset {name!r}") from None


DIFFICULTY_PRESETS = {
    "beginner": DifficultyConfig(12, 0.5),
    "intermediate": DifficultyConfig(6, 0.75),
    "advanced": DifficultyConfig(2, 0.95),
}


class DifficultyAgent:
    """Queries the wrapped agent on every ``k``-th frame and drops actions with prob. 1 - q.

    Off-frames and dropped predictions both produce the all-none action.
    """

    def __init__(self, inner: Agent, cfg: DifficultyConfig) -> None:
        self.inner = inner
        self.cfg = cfg
        self.name = f"{inner.name}@k{cfg.delay_frames}q{cfg.exec_prob}"
        self.queries = 0

    def act(self, states: Sequence[GameState], sides: Sequence[int],
            rng: np.random.Generator) -> list[ActionTriple]:
        out = [ActionTriple() for _ in states]
        idx = [i for i, s in enumerate(states) if s.frame % self.cfg.delay_frames == 0]
        if not idx:
            return out
        self.queries += len(idx)
        chosen = self.inner.act([states[i] for i in idx], [sides[i] for i in idx], rng)
        if self.cfg.exec_prob >= 1.0:
            keep = np.ones(len(idx), dtype=bool)
        else:
            keep = rng.random(len(idx)) < self.cfg.exec_prob
        for i, a, k in zip(idx, chosen, keep):
            if k:
                out[i] = a
        return out


def apply_difficulty(agent: Agent, cfg: DifficultyConfig) -> DifficultyAgent:
    return DifficultyAgent(agent, cfg)
