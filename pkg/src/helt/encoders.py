"""Observation encoders for the three network structures.

* FIS: ids and numeric attributes for both fighters.
* QS: ids for the controlled fighter only; the opponent is described by
  numbers alone.
* FQS: numbers only.

Ids are embedding-table indices.  Character index 0 is reserved for
"unknown", so characters outside the training subset never error; the
skill table is laid out as ``char_index * 10 + skill_head_index``.

Feature layout (``SCHEMA_VERSION`` 1), all entries in [0, 1] or [-1, 1]:

    self_attr  = CORE
    opp_attr   = CORE + OPP_EXTRA
    env        = ENV
    flat attrs = self_attr ++ opp_attr ++ env
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import (
    ARENA_H, ARENA_W, MAX_STUN, PROJECTILE_LIFE, SCROLL, SKILL_HEAD, BUFF_FRAMES,
    CharacterSpec, FighterState, GameState, hitbox_rect, in_active_frames,
)

SCHEMA_VERSION = 1
DEFAULT_EMBED_DIM = 8
_DIAG = math.hypot(ARENA_W, ARENA_H)


class EncoderMode(str, enum.Enum):
    FIS = "FIS"
    QS = "QS"
    FQS = "FQS"


CORE = (
    ("hp", 0, 1), ("energy", 0, 1),
    *((f"cooldown_{name}", 0, 1) for name in SKILL_HEAD[1:]),
    ("x", 0, 1), ("y", 0, 1), ("stun", 0, 1),
    ("skill_progress", 0, 1), ("skill_hot", 0, 1), ("buff", 0, 1),
    ("facing", -1, 1), ("followup", 0, 1), ("has_projectile", 0, 1),
)
OPP_EXTRA = (
    ("hurt_w", 0, 1), ("hurt_h", 0, 1),
    ("hit_dx", -1, 1), ("hit_dy", -1, 1), ("hit_w", 0, 1), ("hit_h", 0, 1),
    ("active_left", 0, 1), ("until_active", 0, 1),
    ("proj_dx", -1, 1), ("proj_dy", -1, 1), ("proj_life", 0, 1),
)
ENV = (
    ("dx", -1, 1), ("dy", -1, 1), ("distance", 0, 1), ("facing_opp", -1, 1),
    ("hp_diff", -1, 1), ("time_left", 0, 1),
)
ATTR_DIM = 2 * len(CORE) + len(OPP_EXTRA) + len(ENV)
# id columns per mode: (table, owner) pairs
ID_LAYOUT = {
    EncoderMode.FIS: (("char", "self"), ("skill", "self"), ("char", "opp"), ("skill", "opp")),
    EncoderMode.QS: (("char", "self"), ("skill", "self")),
    EncoderMode.FQS: (),
}
# box extents are normalized by this many arena units
_BOX_SCALE = 4.0


@dataclass(frozen=True)
class CharacterTable:
    """Maps character ids to embedding indices; unseen ids map to 0."""

    char_ids: tuple[int, ...]

    @classmethod
    def from_ids(cls, ids: Sequence[int]) -> "CharacterTable":
        return cls(tuple(sorted(int(i) for i in ids)))

    @property
    def n_chars(self) -> int:
        return len(self.char_ids) + 1

    @property
    def n_skills(self) -> int:
        return self.n_chars * len(SKILL_HEAD)

    def index(self, char_id: int) -> int:
        try:
            return self.char_ids.index(char_id) + 1
        except ValueError:
            return 0


@dataclass(frozen=True)
class Observation:
    self_id: tuple[int, int] | None
    self_attr: np.ndarray
    opp_id: tuple[int, int] | None
    opp_attr: np.ndarray
    env: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        parts = [p for p in (self.self_id, self.opp_id) if p is not None]
        return np.array([i for p in parts for i in p], dtype=np.int64)

    @property
    def attrs(self) -> np.ndarray:
        return np.concatenate([self.self_attr, self.opp_attr, self.env])

    def width(self, embed_dim: int = DEFAULT_EMBED_DIM) -> int:
        return len(self.ids) * embed_dim + len(self.attrs)


def _clip(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _core(f: FighterState, spec: CharacterSpec) -> list[float]:
    cds = [c / s.cooldown if s.cooldown else 0.0 for c, s in zip(f.cooldowns, spec.skills)]
    if f.active >= 0:
        skill = spec.skills[f.active]
        progress = f.elapsed / skill.total_frames
        hot = 1.0 if in_active_frames(f, skill) else 0.0
    else:
        progress = hot = 0.0
    return [
        f.hp / spec.max_hp,
        f.energy / spec.max_energy if spec.max_energy else 0.0,
        *cds,
        f.x / ARENA_W, f.y / ARENA_H, min(f.stun, MAX_STUN) / MAX_STUN,
        progress, hot, f.buff / BUFF_FRAMES,
        float(f.facing), min(f.followup, 20) / 20.0, 1.0 if f.projectile else 0.0,
    ]


def _opp_extra(f: FighterState, spec: CharacterSpec, viewer: FighterState) -> list[float]:
    hit = [0.0] * 6
    if f.active >= 0 and f.active != SCROLL:
        skill = spec.skills[f.active]
        if skill.damage > 0 and f.elapsed < skill.total_frames:
            cx, cy, w, h = hitbox_rect(f, skill)
            left = skill.total_frames - max(f.elapsed, skill.startup)
            hit = [
                _clip((cx - viewer.x) / ARENA_W, -1, 1), _clip((cy - viewer.y) / ARENA_H, -1, 1),
                min(w / _BOX_SCALE, 1.0), min(h / _BOX_SCALE, 1.0),
                left / skill.total_frames,
                max(skill.startup - f.elapsed, 0) / max(skill.total_frames, 1),
            ]
    p = f.projectile
    proj = [0.0, 0.0, 0.0]
    if p is not None:
        proj = [_clip((p.x - viewer.x) / ARENA_W, -1, 1), _clip((p.y - viewer.y) / ARENA_H, -1, 1),
                p.life / PROJECTILE_LIFE]
    return [min(spec.hurtbox[0] / _BOX_SCALE, 1.0), min(spec.hurtbox[1] / _BOX_SCALE, 1.0),
            *hit, *proj]


def _skill_index(table: CharacterTable, f: FighterState, spec: CharacterSpec) -> int:
    return table.index(spec.char_id) * len(SKILL_HEAD) + (f.active + 1)


def encode(state: GameState, player: int, mode: EncoderMode | str,
           table: CharacterTable | None = None) -> Observation:
    mode = EncoderMode(mode)
    me, op = state.fighters[player], state.fighters[1 - player]
    ms, os_ = state.specs[player], state.specs[1 - player]
    if mode is not EncoderMode.FQS and table is None:
        raise ValueError(f"{mode.value} encoding needs a CharacterTable")
    self_id = opp_id = None
    if mode is not EncoderMode.FQS:
        self_id = (table.index(ms.char_id), _skill_index(table, me, ms))
    if mode is EncoderMode.FIS:
        opp_id = (table.index(os_.char_id), _skill_index(table, op, os_))
    dx, dy = op.x - me.x, op.y - me.y
    facing_opp = 1.0 if (dx >= 0) == (me.facing > 0) else -1.0
    env = [
        dx / ARENA_W, dy / ARENA_H, math.hypot(dx, dy) / _DIAG, facing_opp,
        me.hp / ms.max_hp - op.hp / os_.max_hp,
        1.0 - state.frame / state.horizon,
    ]
    return Observation(
        self_id=self_id,
        self_attr=np.array(_core(me, ms)),
        opp_id=opp_id,
        opp_attr=np.array(_core(op, os_) + _opp_extra(op, os_, me)),
        env=np.array(env),
    )


def n_ids(mode: EncoderMode | str) -> int:
    return len(ID_LAYOUT[EncoderMode(mode)])


def feature_dim(mode: EncoderMode | str, table: CharacterTable,
                embed_dim: int = DEFAULT_EMBED_DIM) -> int:
    """Width of the trunk input: embedded ids plus numeric attributes."""
    if table.n_chars < 2:
        raise ValueError("character table must hold at least one character")
    return n_ids(mode) * embed_dim + ATTR_DIM


def encode_batch(states: Sequence[GameState], players: Sequence[int], mode: EncoderMode | str,
                 table: CharacterTable | None) -> tuple[np.ndarray, np.ndarray]:
    """Stack observations into ``(ids[B, k], attrs[B, ATTR_DIM])``."""
    obs = [encode(s, p, mode, table) for s, p in zip(states, players)]
    k = n_ids(mode)
    ids = np.array([o.ids for o in obs], dtype=np.int64).reshape(len(obs), k)
    attrs = np.array([o.attrs for o in obs], dtype=np.float64).reshape(len(obs), ATTR_DIM)
    return ids, attrs


def feature_schema(mode: EncoderMode | str, embed_dim: int = DEFAULT_EMBED_DIM) -> dict:
    mode = EncoderMode(mode)
    attrs = (
        [{"name": f"self.{n}", "low": lo, "high": hi} for n, lo, hi in CORE]
        + [{"name": f"opp.{n}", "low": lo, "high": hi} for n, lo, hi in CORE + OPP_EXTRA]
        + [{"name": f"env.{n}", "low": lo, "high": hi} for n, lo, hi in ENV]
    )
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": mode.value,
        "embed_dim": embed_dim,
        "ids": [{"table": t, "owner": o} for t, o in ID_LAYOUT[mode]],
        "attrs": attrs,
    }


def dump_schema(mode: EncoderMode | str, embed_dim: int = DEFAULT_EMBED_DIM) -> str:
    return json.dumps(feature_schema(mode, embed_dim), indent=2)


def attr_bounds() -> tuple[np.ndarray, np.ndarray]:
    rows = list(CORE) + list(CORE + OPP_EXTRA) + list(ENV)
    return np.array([r[1] for r in rows], float), np.array([r[2] for r in rows], float)

