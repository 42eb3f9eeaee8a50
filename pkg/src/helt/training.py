"""The PPO backend for the league: rollout workers and learners for each member."""

from __future__ import annotations

import queue
from typing import Sequence

import numpy as np

from .agents import PolicyAgent
from .encoders import CharacterTable, EncoderMode
from .game import DEFAULT_HORIZON, CharacterSpec, StyleReward, new_match
from .league import League, LeagueMember, MatchRecord, PolicySnapshot, Role
from .policy import NetSpec, init_params
from .ppo import Learner, LearnerConfig
from .rollout import MatchSetup, RolloutWorker


class LiveAgent:
    """Plays with whatever parameters a live member holds right now."""

    def __init__(self, member: LeagueMember, spec: NetSpec) -> None:
        self.member = member
        self.spec = spec
        self.name = member.live_id

    def act(self, states, sides, rng):
        return PolicyAgent(self.spec, self.member.params, self.name).act(states, sides, rng)


class NeuralBackend:
    """Trains each member with PPO on matches between training-subset characters.

    Character index ``k`` in matchup pairs refers to ``characters[k]``.
    Each round collects ``n_steps`` frames from ``batch_size // n_steps``
    parallel matches and runs one learner update.
    """

    def __init__(self, characters: Sequence[CharacterSpec], learner: LearnerConfig,
                 style: StyleReward | None = None, horizon: int = DEFAULT_HORIZON) -> None:
        self.characters = list(characters)
        self.n_characters = len(self.characters)
        self.table = CharacterTable.from_ids([c.char_id for c in self.characters])
        self.cfg = learner
        self.style = style or StyleReward()
        self.horizon = horizon
        self.n_envs = max(1, learner.batch_size // learner.n_steps)
        self.learners: dict[Role, Learner] = {}
        self.workers: dict[Role, RolloutWorker] = {}
        self._agents: dict[str, PolicyAgent] = {}

    def spec_for(self, mode: EncoderMode) -> NetSpec:
        return NetSpec(mode, self.table, self.cfg.hidden, self.cfg.embed_dim)

    def net_spec(self, member: LeagueMember) -> NetSpec:
        return self.spec_for(member.mode)

    def fresh_params(self, role, mode, rng):
        return init_params(self.spec_for(mode), rng)

    def params_reset(self, member):
        if member.role in self.learners:
            self.learners[member.role].reset(member.params)
            member.params = self.learners[member.role].params

    def _opponent(self, league: League, opponent_id: str):
        target = league.resolve(opponent_id)
        if isinstance(target, PolicySnapshot):
            agent = self._agents.get(opponent_id)
            if agent is None:
                agent = PolicyAgent(target.spec, target.params, opponent_id)
                self._agents[opponent_id] = agent
            return agent
        return LiveAgent(target, self.spec_for(target.mode))

    def _matchmaker(self, member: LeagueMember, league: League):
        def make(slot: int, rng: np.random.Generator) -> MatchSetup:
            opp_id = league.sample_opponent(member, rng)
            i, j = league.sample_pair(member, rng)
            side = int(rng.integers(2))
            mine, theirs = self.characters[j], self.characters[i]
            pair = (mine, theirs) if side == 0 else (theirs, mine)
            state = new_match(*pair, self.horizon, int(rng.integers(2**31 - 1)))
            return MatchSetup(state, side, self._opponent(league, opp_id), opp_id, (i, j))
        return make

    def train_round(self, member: LeagueMember, league: League, rng: np.random.Generator,
                    results: "queue.SimpleQueue") -> int:
        role = member.role
        spec = self.net_spec(member)
        if role not in self.learners:
            self.learners[role] = Learner(spec, member.params, self.cfg, rng)
            self.workers[role] = RolloutWorker(self.n_envs, self._matchmaker(member, league),
                                               self.style, rng)
        learner = self.learners[role]
        learner.params = member.params
        trajs, finished, steps = self.workers[role].collect(
            PolicyAgent(spec, learner.params, member.live_id), self.cfg.n_steps)
        learner.train(trajs)
        member.params = learner.params
        for r in finished:
            results.put((role, MatchRecord(r.opponent_id, r.score, r.pair)))
        return steps


def train_fixed(characters: Sequence[CharacterSpec], opponent, learner: LearnerConfig,
                steps: int, seed: int, mode: EncoderMode = EncoderMode.QS,
                style: StyleReward | None = None, horizon: int = DEFAULT_HORIZON,
                ) -> tuple[PolicyAgent, list]:
    """PPO against one fixed opponent on uniformly drawn matchups.

    Returns the trained agent and every finished training match result.
    """
    rng = np.random.default_rng(seed)
    chars = list(characters)
    spec = NetSpec(mode, CharacterTable.from_ids([c.char_id for c in chars]),
                   learner.hidden, learner.embed_dim)
    ln = Learner(spec, init_params(spec, rng), learner, rng)
    name = getattr(opponent, "name", "opponent")

    def make(slot: int, r: np.random.Generator) -> MatchSetup:
        i, j = (int(k) for k in r.integers(0, len(chars), 2))
        side = int(r.integers(2))
        pair = (chars[j], chars[i]) if side == 0 else (chars[i], chars[j])
        state = new_match(*pair, horizon, int(r.integers(2**31 - 1)))
        return MatchSetup(state, side, opponent, name, (i, j))

    worker = RolloutWorker(max(1, learner.batch_size // learner.n_steps), make,
                           style or StyleReward(), rng)
    done, results = 0, []
    while done < steps:
        trajs, finished, n = worker.collect(PolicyAgent(spec, ln.params, "learner"),
                                            learner.n_steps)
        ln.train(trajs)
        results.extend(finished)
        done += n
    return PolicyAgent(spec, ln.params, "learner"), results
