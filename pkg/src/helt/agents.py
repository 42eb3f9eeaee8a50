"""Things that pick actions: network policies and scripted baselines.

Every agent exposes ``act(states, sides, rng) -> list[ActionTriple]`` over a
batch of independent matches.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

from .encoders import encode_batch
from .game import (
    DIRECTION_VECTORS, OFFENSIVE_SLOTS, SCROLL, ActionTriple, GameState, boxes_overlap,
    hitbox_rect, hurtbox_rect, legal_action_mask, skill_legal,
)
from .policy import NetSpec, Params, forward_batch, sample_heads, stack_masks, to_action


class Agent(Protocol):
    name: str

    def act(self, states: Sequence[GameState], sides: Sequence[int],
            rng: np.random.Generator) -> list[ActionTriple]: ...


class RandomAgent:
    """Uniform over the legal entries of every head."""

    name = "random"

    def act(self, states, sides, rng):
        masks = stack_masks([legal_action_mask(s, p) for s, p in zip(states, sides)])
        probs = [m / m.sum(axis=1, keepdims=True) for m in masks]
        return [to_action(row) for row in sample_heads(probs, rng)]


class PolicyAgent:
    """Samples from a network policy; parameters are treated as read-only."""

    def __init__(self, spec: NetSpec, params: Params, name: str = "policy",
                 greedy: bool = False) -> None:
        self.spec = spec
        self.params = params
        self.name = name
        self.greedy = greedy

    def evaluate(self, states, sides):
        ids, attrs = encode_batch(states, sides, self.spec.mode, self.spec.table)
        masks = stack_masks([legal_action_mask(s, p) for s, p in zip(states, sides)])
        out = forward_batch(self.params, self.spec, ids, attrs, masks)
        return ids, attrs, masks, out

    def act(self, states, sides, rng):
        _, _, _, out = self.evaluate(states, sides)
        return [to_action(row) for row in sample_heads(out.probs, rng, self.greedy)]


def _toward(d: float, dead: float) -> int:
    return 0 if abs(d) <= dead else (1 if d > 0 else -1)


def nearest_direction(dx: float, dy: float) -> int:
    return int(round(math.atan2(dy, dx) / (math.pi / 4))) % len(DIRECTION_VECTORS)


class AggressiveBot:
    """Walks straight at the opponent and fires the strongest attack that would connect.

    It never uses the substitute, which leaves it open to counters.
    """

    name = "aggressive"

    def __init__(self, dead_zone: float = 0.3) -> None:
        self.dead_zone = dead_zone

    def _one(self, state: GameState, side: int) -> ActionTriple:
        me, op = state.fighters[side], state.fighters[1 - side]
        spec = state.specs[side]
        if me.stun > 0:
            return ActionTriple()
        dx, dy = op.x - me.x, op.y - me.y
        facing = 1 if dx > 0 else -1 if dx < 0 else me.facing
        aim = nearest_direction(dx, dy)
        hurt = hurtbox_rect(op, state.specs[1 - side])
        probe = type(me)(**{**me.__dict__, "facing": facing, "aim": aim})
        best, best_dmg = 0, 0
        for slot in OFFENSIVE_SLOTS:
            skill = spec.skills[slot]
            if slot == SCROLL or skill.damage <= best_dmg or not skill_legal(me, spec, slot):
                continue
            if boxes_overlap(hitbox_rect(probe, skill), hurt):
                best, best_dmg = slot + 1, skill.damage
        lr = _toward(dx, self.dead_zone + spec.hurtbox[0] / 2)
        ud = _toward(dy, self.dead_zone)
        if best and me.active < 0:
            return ActionTriple(0, 0, best, aim)
        return ActionTriple(1 if ud > 0 else 2 if ud < 0 else 0,
                            2 if lr > 0 else 1 if lr < 0 else 0, 0, aim)

    def act(self, states, sides, rng):
        return [self._one(s, p) for s, p in zip(states, sides)]


class IdleAgent:
    name = "idle"

    def act(self, states, sides, rng):
        return [ActionTriple() for _ in states]

