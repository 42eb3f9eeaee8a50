"""Character pools: synthetic generation, JSON-lines persistence, training subsets.

Pool file schema, one JSON object per line::

    {"char_id": 3, "level": "A", "name": "A-03", "max_hp": 104,
     "move_speed": 0.16, "hurtbox": [1.0, 1.8], "max_energy": 100.0,
     "energy_regen": 0.25,
     "skills": [{"skill_id": 30, "damage": 5, "cooldown": 8, "startup": 2,
                 "active": 3, "hitbox": [0.9, 0.0, 1.0, 1.0],
                 "energy_cost": 0.0, "needs_direction": false,
                 "is_defensive": false}, ...]}

``skills`` holds exactly nine entries in the order of ``game.SKILL_NAMES``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .game import LEVELS, CharacterSpec, SkillSpec
from .io import atomic_write_text

LEVEL_POWER = {"S": 1.15, "A": 1.05, "B": 0.95, "C": 0.85}
# training-subset composition over levels S/A/B/C at full scale
REFERENCE_LEVEL_COUNTS = (15, 15, 10, 10)


def _skill(skill_id, damage, cooldown, startup, active, hitbox, energy_cost=0.0,
           needs_direction=False, is_defensive=False) -> SkillSpec:
    return SkillSpec(int(skill_id), int(damage), int(cooldown), int(startup), int(active),
                     tuple(round(float(v), 3) for v in hitbox), float(energy_cost),
                     bool(needs_direction), bool(is_defensive))


def synth_character(char_id: int, level: str, rng: np.random.Generator) -> CharacterSpec:
    """Random fighter whose damage and health scale with ``level``."""
    power = LEVEL_POWER[level]
    u = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
    dmg = lambda lo, hi: max(1, int(round(u(lo, hi) * power)))  # noqa: E731
    base = char_id * 10
    reach = u(0.8, 1.1)
    skills = (
        _skill(base + 0, dmg(4, 6), 8, 2, 3, (reach, 0.0, u(0.9, 1.2), u(0.9, 1.2))),
        _skill(base + 1, dmg(10, 14), int(u(80, 100)), int(u(4, 7)), 4,
               (u(1.3, 1.8), 0.0, u(1.5, 2.1), u(1.2, 1.6))),
        _skill(base + 2, dmg(10, 14), int(u(100, 140)), int(u(6, 9)), 5,
               (u(2.0, 2.8), 0.0, u(1.4, 1.8), u(1.4, 1.8)), needs_direction=True),
        _skill(base + 3, dmg(22, 30), int(u(270, 330)), int(u(8, 12)), 6,
               (u(1.5, 2.0), 0.0, u(2.6, 3.4), u(2.2, 2.8)), energy_cost=60),
        _skill(base + 4, 0, 150, 0, int(u(7, 10)), (0.0, 0.0, 0.0, 0.0), energy_cost=35,
               is_defensive=True),
        _skill(base + 5, 0, 600, 4, 1, (0.0, 0.0, 0.0, 0.0), energy_cost=20),
        _skill(base + 6, dmg(8, 12), int(u(200, 260)), 6, 1, (0.8, 0.0, u(0.7, 0.9), u(0.7, 0.9))),
        _skill(base + 7, dmg(6, 9), 30, 2, 3, (u(1.0, 1.4), 0.0, u(1.2, 1.6), u(1.0, 1.4))),
        _skill(base + 8, dmg(6, 9), 30, 2, 3, (u(1.0, 1.4), 0.0, u(1.2, 1.6), u(1.0, 1.4))),
    )
    return CharacterSpec(
        char_id=char_id,
        level=level,
        max_hp=int(round(100 * power * u(0.95, 1.05))),
        move_speed=round(u(0.12, 0.2), 4),
        skills=skills,
        hurtbox=(round(u(0.8, 1.2), 3), round(u(1.6, 2.2), 3)),
        max_energy=100.0,
        energy_regen=0.25,
        name=f"{level}-{char_id:02d}",
    )


def generate_pool(n_per_level: int = 3, seed: int = 0) -> list[CharacterSpec]:
    if n_per_level < 1:
        raise ConfigError("pool.n_per_level", "must be >= 1")
    rng = np.random.default_rng(seed)
    pool, cid = [], 0
    for level in LEVELS:
        for _ in range(n_per_level):
            pool.append(synth_character(cid, level, rng))
            cid += 1
    return pool


def spec_to_dict(spec: CharacterSpec) -> dict:
    return {
        "char_id": spec.char_id,
        "level": spec.level,
        "name": spec.name,
        "max_hp": spec.max_hp,
        "move_speed": spec.move_speed,
        "hurtbox": list(spec.hurtbox),
        "max_energy": spec.max_energy,
        "energy_regen": spec.energy_regen,
        "skills": [
            {
                "skill_id": s.skill_id, "damage": s.damage, "cooldown": s.cooldown,
                "startup": s.startup, "active": s.active, "hitbox": list(s.hitbox),
                "energy_cost": s.energy_cost, "needs_direction": s.needs_direction,
                "is_defensive": s.is_defensive,
            }
            for s in spec.skills
        ],
    }


def spec_from_dict(d: dict) -> CharacterSpec:
    try:
        skills = tuple(
            SkillSpec(int(s["skill_id"]), int(s["damage"]), int(s["cooldown"]),
                      int(s["startup"]), int(s["active"]), tuple(float(v) for v in s["hitbox"]),
                      float(s.get("energy_cost", 0.0)), bool(s.get("needs_direction", False)),
                      bool(s.get("is_defensive", False)))
            for s in d["skills"]
        )
        spec = CharacterSpec(
            char_id=int(d["char_id"]), level=str(d["level"]), max_hp=int(d["max_hp"]),
            move_speed=float(d["move_speed"]), skills=skills,
            hurtbox=(float(d["hurtbox"][0]), float(d["hurtbox"][1])),
            max_energy=float(d.get("max_energy", 100.0)),
            energy_regen=float(d.get("energy_regen", 0.25)), name=str(d.get("name", "")),
        )
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ConfigError("pool", f"malformed character record: {exc}") from exc
    spec.validate()
    return spec


def save_pool(pool: list[CharacterSpec], path: str | os.PathLike) -> Path:
    text = "".join(json.dumps(spec_to_dict(s), sort_keys=True) + "\n" for s in pool)
    return atomic_write_text(path, text)


def load_pool(path: str | os.PathLike) -> list[CharacterSpec]:
    path = Path(path)
    if not path.exists():
        raise ConfigError("pool_file", f"{path} does not exist")
    pool = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError("pool_file", f"line {lineno}: {exc}") from exc
        pool.append(spec_from_dict(record))
    ids = [s.char_id for s in pool]
    if len(set(ids)) != len(ids):
        raise ConfigError("pool_file", "duplicate char_id")
    if not pool:
        raise ConfigError("pool_file", "pool is empty")
    return pool


def scaled_level_counts(total: int, pattern=REFERENCE_LEVEL_COUNTS) -> tuple[int, ...]:
    """Spread ``total`` over the levels in proportion to ``pattern`` (largest remainder)."""
    weights = np.asarray(pattern, dtype=float) / sum(pattern)
    raw = weights * total
    counts = np.floor(raw).astype(int)
    order = sorted(range(len(pattern)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: total - counts.sum()]:
        counts[i] += 1
    return tuple(int(c) for c in counts)


def select_subset(pool: list[CharacterSpec], level_counts) -> tuple[list[int], list[int]]:
    """Pick the first ``level_counts[k]`` characters of each level, by id.

    Returns ``(familiar_ids, held_out_ids)``.
    """
    familiar = []
    for level, count in zip(LEVELS, level_counts):
        members = sorted(s.char_id for s in pool if s.level == level)
        if count > len(members):
            raise ConfigError(
                f"subset.level_counts.{level}",
                f"asks for {count} characters but the pool has {len(members)}")
        familiar.extend(members[:count])
    held_out = [s.char_id for s in pool if s.char_id not in set(familiar)]
    return sorted(familiar), sorted(held_out)

