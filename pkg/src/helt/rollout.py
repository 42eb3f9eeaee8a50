"""Batched match execution: training rollouts and evaluation matches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .agents import Agent, PolicyAgent
from .game import (
    ActionEvent, CharacterSpec, GameState, Outcome, StyleReward, new_match, reward_scale, step,
    style_reward, swap_pair,
)
from .policy import action_logp, sample_heads, to_action
from .ppo import Trajectory


@dataclass(frozen=True)
class MatchResult:
    opponent_id: str
    pair: tuple[int, int]  # (opponent char index, learner char index)
    learner_side: int
    outcome: Outcome
    frames: int

    @property
    def score(self) -> float:
        """1 for a learner win, 0.5 for a draw, 0 for a loss."""
        if self.outcome is Outcome.DRAW:
            return 0.5
        won = (self.outcome is Outcome.A_WINS) == (self.learner_side == 0)
        return 1.0 if won else 0.0


@dataclass
class MatchSetup:
    state: GameState
    learner_side: int
    opponent: Agent
    opponent_id: str
    pair: tuple[int, int]


Matchmaker = Callable[[int, np.random.Generator], MatchSetup]


@dataclass
class _Slot:
    setup: MatchSetup
    state: GameState
    buf: dict = field(default_factory=lambda: {k: [] for k in _FIELDS})


_FIELDS = ("ids", "attrs", "m0", "m1", "m2", "m3", "actions", "logp", "rewards", "values",
           "terminals")


def _flush(buf: dict, bootstrap: float) -> Trajectory:
    traj = Trajectory(
        ids=np.array(buf["ids"]), attrs=np.array(buf["attrs"]),
        masks=[np.array(buf[f"m{k}"]) for k in range(4)],
        actions=np.array(buf["actions"]), old_logp=np.array(buf["logp"]),
        rewards=np.array(buf["rewards"], dtype=np.float64),
        values=np.array(buf["values"], dtype=np.float64),
        terminals=np.array(buf["terminals"], dtype=bool), bootstrap_value=float(bootstrap),
    )
    for v in buf.values():
        v.clear()
    return traj


class RolloutWorker:
    """Keeps ``n_envs`` matches alive across calls for one learning member.

    Matches are not restarted between ``collect`` calls, so a fragment may
    end mid-match; its final value estimate bootstraps the return.
    """

    def __init__(self, n_envs: int, matchmaker: Matchmaker, style: StyleReward,
                 rng: np.random.Generator) -> None:
        self.matchmaker = matchmaker
        self.style = style
        self.rng = rng
        self.slots: list[_Slot] = []
        for i in range(n_envs):
            setup = matchmaker(i, rng)
            self.slots.append(_Slot(setup, setup.state))

    def restart(self) -> None:
        """Abandon running matches, e.g. after the learner's opponents changed."""
        for i, slot in enumerate(self.slots):
            setup = self.matchmaker(i, self.rng)
            self.slots[i] = _Slot(setup, setup.state)

    def collect(self, learner: PolicyAgent, n_steps: int,
                ) -> tuple[list[Trajectory], list[MatchResult], int]:
        trajs: list[Trajectory] = []
        results: list[MatchResult] = []
        steps = 0
        for _ in range(n_steps):
            states = [s.state for s in self.slots]
            lsides = [s.setup.learner_side for s in self.slots]
            ids, attrs, masks, out = learner.evaluate(states, lsides)
            acts = sample_heads(out.probs, self.rng)
            logp = action_logp(out.logp, acts)

            opp_acts: list = [None] * len(self.slots)
            groups: dict[str, list[int]] = {}
            for i, slot in enumerate(self.slots):
                groups.setdefault(slot.setup.opponent_id, []).append(i)
            for members in groups.values():
                agent = self.slots[members[0]].setup.opponent
                chosen = agent.act([states[i] for i in members],
                                   [1 - lsides[i] for i in members], self.rng)
                for i, a in zip(members, chosen):
                    opp_acts[i] = a

            for i, slot in enumerate(self.slots):
                side = lsides[i]
                mine = to_action(acts[i])
                pair = (mine, opp_acts[i]) if side == 0 else (opp_acts[i], mine)
                res = step(slot.state, *pair)
                before, after = res.hp_delta
                if side == 1:
                    before, after = swap_pair(before), swap_pair(after)
                r = style_reward(before, after, res.terminal, self.style, reward_scale(slot.state))
                b = slot.buf
                b["ids"].append(ids[i])
                b["attrs"].append(attrs[i])
                for k in range(4):
                    b[f"m{k}"].append(masks[k][i])
                b["actions"].append(acts[i])
                b["logp"].append(logp[i])
                b["rewards"].append(r)
                b["values"].append(out.value[i])
                b["terminals"].append(res.terminal)
                steps += 1
                if res.terminal:
                    results.append(MatchResult(slot.setup.opponent_id, slot.setup.pair, side,
                                               res.outcome, res.state.frame))
                    trajs.append(_flush(b, 0.0))
                    setup = self.matchmaker(i, self.rng)
                    self.slots[i] = _Slot(setup, setup.state, b)
                else:
                    slot.state = res.state

        live = [i for i, s in enumerate(self.slots) if s.buf["rewards"]]
        if live:
            _, _, _, out = learner.evaluate([self.slots[i].state for i in live],
                                            [self.slots[i].setup.learner_side for i in live])
            for i, v in zip(live, out.value):
                trajs.append(_flush(self.slots[i].buf, v))
        return trajs, results, steps


# --- evaluation matches ----------------------------------------------------------

@dataclass
class PlayedMatch:
    specs: tuple[CharacterSpec, CharacterSpec]
    outcome: Outcome
    frames: int
    final_hp: tuple[int, int]
    events: list[ActionEvent] | None = None
    snapshots: list[tuple[int, tuple[int, int], tuple[float, float]]] | None = None


def play_matches(agent_a: Agent, agent_b: Agent,
                 matchups: Sequence[tuple[CharacterSpec, CharacterSpec]],
                 rng: np.random.Generator, horizon: int = 1800, parallel: int = 64,
                 record: bool = False, seeds: Sequence[int] | None = None) -> list[PlayedMatch]:
    """Play ``agent_a`` (side A) against ``agent_b`` (side B), one match per matchup.

    Matches run ``parallel`` at a time; results come back in matchup order.
    With ``record`` every activation event and per-hit hp/energy snapshot is kept.
    """
    if seeds is None:
        seeds = [int(s) for s in rng.integers(0, 2**31 - 1, len(matchups))]
    out: list[PlayedMatch | None] = [None] * len(matchups)
    for start in range(0, len(matchups), parallel):
        idx = list(range(start, min(start + parallel, len(matchups))))
        states = {i: new_match(*matchups[i], horizon, seeds[i]) for i in idx}
        events = {i: [] for i in idx}
        snaps = {i: [] for i in idx}
        while states:
            order = sorted(states)
            cur = [states[i] for i in order]
            acts_a = agent_a.act(cur, [0] * len(cur), rng)
            acts_b = agent_b.act(cur, [1] * len(cur), rng)
            for i, st, a, b in zip(order, cur, acts_a, acts_b):
                res = step(st, a, b)
                if record:
                    events[i].extend(res.events)
                    if res.hp_delta[0] != res.hp_delta[1] or res.events:
                        f = res.state.fighters
                        snaps[i].append((res.state.frame, (f[0].hp, f[1].hp),
                                         (f[0].energy, f[1].energy)))
                if res.terminal:
                    f = res.state.fighters
                    out[i] = PlayedMatch(matchups[i], res.outcome, res.state.frame,
                                         (f[0].hp, f[1].hp),
                                         events[i] if record else None,
                                         snaps[i] if record else None)
                    del states[i]
                else:
                    states[i] = res.state
    return out  # type: ignore[return-value]
