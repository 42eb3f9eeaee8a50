"""Deterministic two-fighter arena.

A match is a sequence of immutable ``GameState`` values.  ``step`` consumes
one action per side and returns a fresh state; nothing is mutated in place,
so many matches can run side by side without sharing anything.

Geometry is a flat 20 x 10 arena with +y pointing "up".  Every box is a
rectangle stored as ``(center_x, center_y, width, height)``.  A hit lands
when an attacker's active hitbox overlaps the defender's hurtbox.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ContractViolation

ARENA_W = 20.0
ARENA_H = 10.0
FPS = 30
DEFAULT_HORIZON = 1800

HITSTUN = 6
# frames the attacker is frozen after its hit is negated by a substitute
SUBSTITUTE_STUN = 24
MAX_STUN = max(HITSTUN, SUBSTITUTE_STUN)
BUFF_FRAMES = 120
PROJECTILE_SPEED = 0.35
PROJECTILE_LIFE = 40
FOLLOWUP_FRAMES = 20
SPAWN_OFFSET = 2.5

LEVELS = ("S", "A", "B", "C")
SKILL_NAMES = (
    "punch", "skill1", "skill2", "skill3", "substitute",
    "summon", "scroll", "subskill1", "subskill2",
)
SKILL_HEAD = ("none",) + SKILL_NAMES
PUNCH, SKILL1, SKILL2, SKILL3, SUBSTITUTE, SUMMON, SCROLL, SUBSKILL1, SUBSKILL2 = range(9)
N_SKILLS = len(SKILL_NAMES)
OFFENSIVE_SLOTS = (PUNCH, SKILL1, SKILL2, SKILL3, SCROLL, SUBSKILL1, SUBSKILL2)
FOLLOWUP_PARENT = {SUBSKILL1: SKILL1, SUBSKILL2: SKILL2}

UD_NAMES = ("none", "up", "down")
LR_NAMES = ("none", "left", "right")
N_DIRECTIONS = 8
HEAD_SIZES = (len(UD_NAMES), len(LR_NAMES), len(SKILL_HEAD), N_DIRECTIONS)

_S = math.sqrt(0.5)
# direction k points at angle k * 45 degrees, counter-clockwise from +x
DIRECTION_VECTORS = (
    (1.0, 0.0), (_S, _S), (0.0, 1.0), (-_S, _S),
    (-1.0, 0.0), (-_S, -_S), (0.0, -1.0), (_S, -_S),
)


class Outcome(str, enum.Enum):
    A_WINS = "a_wins"
    B_WINS = "b_wins"
    DRAW = "draw"
    ONGOING = "ongoing"


@dataclass(frozen=True)
class SkillSpec:
    skill_id: int
    damage: int
    cooldown: int
    startup: int
    active: int
    # (offset_x, offset_y, width, height); offset_x is mirrored by facing
    hitbox: tuple[float, float, float, float]
    energy_cost: float = 0.0
    needs_direction: bool = False
    is_defensive: bool = False

    def validate(self, where: str) -> None:
        if self.damage < 0:
            raise ConfigError(f"{where}.damage", "must be >= 0")
        if self.startup < 0:
            raise ConfigError(f"{where}.startup", "must be >= 0")
        if self.cooldown < self.startup:
            raise ConfigError(f"{where}.cooldown", "must be >= startup")
        if self.active < 1:
            raise ConfigError(f"{where}.active", "must be >= 1")
        if self.energy_cost < 0:
            raise ConfigError(f"{where}.energy_cost", "must be >= 0")
        if len(self.hitbox) != 4 or self.hitbox[2] < 0 or self.hitbox[3] < 0:
            raise ConfigError(f"{where}.hitbox", "expected (dx, dy, w, h) with w, h >= 0")

    @property
    def total_frames(self) -> int:
        return self.startup + self.active


@dataclass(frozen=True)
class CharacterSpec:
    char_id: int
    level: str
    max_hp: int
    move_speed: float
    skills: tuple[SkillSpec, ...]
    hurtbox: tuple[float, float]
    max_energy: float = 100.0
    energy_regen: float = 0.25
    name: str = ""

    def validate(self) -> None:
        where = f"character[{self.char_id}]"
        if self.level not in LEVELS:
            raise ConfigError(f"{where}.level", f"must be one of {LEVELS}")
        if self.max_hp <= 0:
            raise ConfigError(f"{where}.max_hp", "must be > 0")
        if self.move_speed <= 0:
            raise ConfigError(f"{where}.move_speed", "must be > 0")
        if len(self.skills) != N_SKILLS:
            raise ConfigError(f"{where}.skills", f"expected {N_SKILLS} skills in fixed order")
        if self.hurtbox[0] <= 0 or self.hurtbox[1] <= 0:
            raise ConfigError(f"{where}.hurtbox", "extents must be > 0")
        if self.max_energy < 0 or self.energy_regen < 0:
            raise ConfigError(f"{where}.max_energy", "energy values must be >= 0")
        for slot, skill in enumerate(self.skills):
            skill.validate(f"{where}.skills[{SKILL_NAMES[slot]}]")
        if not self.skills[SUBSTITUTE].is_defensive:
            raise ConfigError(f"{where}.skills[substitute]", "must be defensive")

    @property
    def strongest_skill(self) -> int:
        """Slot of the highest-damage skill among skill1..skill3."""
        return max((SKILL1, SKILL2, SKILL3), key=lambda s: (self.skills[s].damage, -s))


class ActionTriple(NamedTuple):
    """Movement (ud, lr), skill and aim heads; direction matters only for aimed skills."""

    ud: int = 0
    lr: int = 0
    skill: int = 0
    direction: int = 0


NOOP = ActionTriple()


class Projectile(NamedTuple):
    x: float
    y: float
    vx: float
    life: int
    damage: int
    w: float
    h: float
    start_frame: int


@dataclass
class FighterState:
    hp: int
    x: float
    y: float
    energy: float
    cooldowns: tuple[int, ...]
    stun: int = 0
    active: int = -1  # executing skill slot, -1 when idle
    elapsed: int = 0
    resolved: bool = False  # current activation already produced its outcome
    aim: int = 0
    act_start: int = 0
    facing: int = 1
    buff: int = 0
    projectile: Projectile | None = None
    followup_slot: int = -1
    followup: int = 0

    @property
    def active_skill(self) -> tuple[int, int] | None:
        return None if self.active < 0 else (self.active, self.elapsed)


@dataclass(frozen=True)
class GameState:
    frame: int
    fighters: tuple[FighterState, FighterState]
    specs: tuple[CharacterSpec, CharacterSpec]
    horizon: int
    seed: int
    rng_state: int

    @property
    def terminal(self) -> bool:
        return self.frame >= self.horizon or any(f.hp <= 0 for f in self.fighters)

    @property
    def outcome(self) -> Outcome:
        if not self.terminal:
            return Outcome.ONGOING
        a, b = self.fighters[0].hp, self.fighters[1].hp
        if a == b:
            return Outcome.DRAW
        return Outcome.A_WINS if a > b else Outcome.B_WINS


class ActionEvent(NamedTuple):
    """Resolution of one skill activation.

    ``outcome`` is ``hit``/``blocked``/``whiffed`` for attacks, ``negated``
    or ``whiffed`` for substitutes and ``used`` for the summon buff.
    """

    frame: int
    side: int
    slot: int
    start_frame: int
    outcome: str
    damage: int


class StepResult(NamedTuple):
    state: GameState
    hp_delta: tuple[tuple[int, int], tuple[int, int]]  # (hp_before, hp_after)
    terminal: bool
    outcome: Outcome
    events: list[ActionEvent]


class ActionMask(NamedTuple):
    ud: np.ndarray
    lr: np.ndarray
    skill: np.ndarray
    direction: np.ndarray


def _splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x, z ^ (z >> 31)


def new_match(spec_a: CharacterSpec, spec_b: CharacterSpec, horizon: int = DEFAULT_HORIZON,
              seed: int = 0) -> GameState:
    if horizon <= 0:
        raise ContractViolation(f"horizon must be > 0, got {horizon}")
    spec_a.validate()
    spec_b.validate()
    rng_state, draw = _splitmix64(seed & 0xFFFFFFFFFFFFFFFF)
    # both fighters share the same lane so the start is an exact mirror image
    y = ARENA_H / 2 + (draw / 2.0**64 - 0.5) * 2.0
    fighters = (
        FighterState(hp=spec_a.max_hp, x=ARENA_W / 2 - SPAWN_OFFSET, y=y,
                     energy=spec_a.max_energy, cooldowns=(0,) * N_SKILLS, facing=1),
        FighterState(hp=spec_b.max_hp, x=ARENA_W / 2 + SPAWN_OFFSET, y=y,
                     energy=spec_b.max_energy, cooldowns=(0,) * N_SKILLS, facing=-1),
    )
    return GameState(frame=0, fighters=fighters, specs=(spec_a, spec_b), horizon=horizon,
                     seed=seed, rng_state=rng_state)


def skill_legal(f: FighterState, spec: CharacterSpec, slot: int) -> bool:
    if f.stun > 0 or f.cooldowns[slot] > 0 or f.energy < spec.skills[slot].energy_cost:
        return False
    parent = FOLLOWUP_PARENT.get(slot)
    return parent is None or (f.followup_slot == parent and f.followup > 0)


def legal_action_mask(state: GameState, player: int) -> ActionMask:
    """Per-head legality.  ``none`` is always legal; the direction head has no
    ``none`` entry and stays fully open because it is ignored unless an aimed
    skill is chosen."""
    if state.terminal:
        raise ContractViolation("legal_action_mask called on a terminal state")
    f, spec = state.fighters[player], state.specs[player]
    can_move = f.stun == 0
    ud = np.array([True, can_move, can_move])
    lr = np.array([True, can_move, can_move])
    skill = np.zeros(len(SKILL_HEAD), dtype=bool)
    skill[0] = True
    for slot in range(N_SKILLS):
        skill[slot + 1] = skill_legal(f, spec, slot)
    return ActionMask(ud, lr, skill, np.ones(N_DIRECTIONS, dtype=bool))


def _check_action(state: GameState, player: int, act: ActionTriple) -> None:
    f, spec = state.fighters[player], state.specs[player]
    if not (0 <= act.ud < 3 and 0 <= act.lr < 3 and 0 <= act.skill < len(SKILL_HEAD)
            and 0 <= act.direction < N_DIRECTIONS):
        raise ContractViolation(f"side {player}: action {act} outside head ranges")
    if f.stun > 0 and (act.ud or act.lr):
        raise ContractViolation(f"side {player}: movement while stunned")
    if act.skill and not skill_legal(f, spec, act.skill - 1):
        raise ContractViolation(
            f"side {player}: skill {SKILL_HEAD[act.skill]} is not legal at frame {state.frame}")


def boxes_overlap(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    return abs(a[0] - b[0]) * 2 < a[2] + b[2] and abs(a[1] - b[1]) * 2 < a[3] + b[3]


def hurtbox_rect(f: FighterState, spec: CharacterSpec) -> tuple[float, float, float, float]:
    return (f.x, f.y, spec.hurtbox[0], spec.hurtbox[1])


def hitbox_rect(f: FighterState, skill: SkillSpec) -> tuple[float, float, float, float]:
    dx, dy, w, h = skill.hitbox
    if skill.needs_direction:
        reach = math.hypot(dx, dy)
        ux, uy = DIRECTION_VECTORS[f.aim]
        return (f.x + reach * ux, f.y + reach * uy, w, h)
    return (f.x + f.facing * dx, f.y + dy, w, h)


def in_active_frames(f: FighterState, skill: SkillSpec) -> bool:
    return skill.startup <= f.elapsed < skill.startup + skill.active


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


class _Frame:
    """Scratch space for one transition: the two fighter copies and the events."""

    def __init__(self, state: GameState) -> None:
        self.frame = state.frame
        self.specs = state.specs
        self.fs = [copy.copy(f) for f in state.fighters]
        self.events: list[ActionEvent] = []

    def emit(self, side: int, slot: int, start: int, outcome: str, damage: int = 0) -> None:
        self.events.append(ActionEvent(self.frame, side, slot, start, outcome, damage))

    def end_activation(self, side: int) -> None:
        f = self.fs[side]
        if f.active < 0:
            return
        if not f.resolved:
            outcome = "used" if f.active == SUMMON else "whiffed"
            self.emit(side, f.active, f.act_start, outcome)
        f.active = -1
        f.resolved = False

    def drop_projectile(self, side: int) -> None:
        p = self.fs[side].projectile
        if p is not None:
            self.emit(side, SCROLL, p.start_frame, "whiffed")
            self.fs[side].projectile = None

    def start_skill(self, side: int, slot: int, direction: int) -> None:
        f, spec = self.fs[side], self.specs[side]
        skill = spec.skills[slot]
        self.end_activation(side)
        f.active, f.elapsed, f.resolved = slot, 0, False
        f.aim, f.act_start = direction, self.frame
        f.energy -= skill.energy_cost
        cds = list(f.cooldowns)
        cds[slot] = skill.cooldown
        f.cooldowns = tuple(cds)
        if slot == SUMMON:
            f.buff = BUFF_FRAMES
        if slot in FOLLOWUP_PARENT:
            f.followup_slot, f.followup = -1, 0


def _buffed(f: FighterState, damage: int) -> int:
    return damage + damage // 2 if f.buff > 0 else damage


def step(state: GameState, act_a: ActionTriple, act_b: ActionTriple) -> StepResult:
    if state.terminal:
        raise ContractViolation("step called on a terminal state")
    acts = (ActionTriple(*act_a), ActionTriple(*act_b))
    for side in (0, 1):
        _check_action(state, side, acts[side])

    fr = _Frame(state)
    fs, specs = fr.fs, fr.specs
    hp_before = (fs[0].hp, fs[1].hp)

    # movement and skill starts
    for side in (0, 1):
        f, spec, act = fs[side], specs[side], acts[side]
        if f.stun > 0:
            continue
        step_x = (-1 if act.lr == 1 else 1 if act.lr == 2 else 0) * spec.move_speed
        step_y = (1 if act.ud == 1 else -1 if act.ud == 2 else 0) * spec.move_speed
        f.x = _clamp(f.x + step_x, 0.0, ARENA_W)
        f.y = _clamp(f.y + step_y, 0.0, ARENA_H)
        if act.skill:
            fr.start_skill(side, act.skill - 1, act.direction)

    for side in (0, 1):
        dx = fs[1 - side].x - fs[side].x
        if dx:
            fs[side].facing = 1 if dx > 0 else -1

    # hit detection against the positions after movement; both sides at once
    guarding = [
        f.active == SUBSTITUTE and in_active_frames(f, spec.skills[SUBSTITUTE])
        for f, spec in zip(fs, specs)
    ]
    landed: list[tuple[int, str]] = []
    negated: list[tuple[int, str]] = []
    for side in (0, 1):
        atk, dfd = fs[side], fs[1 - side]
        hurt = hurtbox_rect(dfd, specs[1 - side])
        if atk.active >= 0 and not atk.resolved and atk.active != SCROLL:
            skill = specs[side].skills[atk.active]
            if (skill.damage > 0 and in_active_frames(atk, skill)
                    and boxes_overlap(hitbox_rect(atk, skill), hurt)):
                (negated if guarding[1 - side] else landed).append((side, "melee"))
        p = atk.projectile
        if p is not None and boxes_overlap((p.x, p.y, p.w, p.h), hurt):
            (negated if guarding[1 - side] else landed).append((side, "projectile"))

    stunned = [0, 0]
    for side, kind in landed:
        atk, dfd = fs[side], fs[1 - side]
        if kind == "melee":
            dmg = _buffed(atk, specs[side].skills[atk.active].damage)
            fr.emit(side, atk.active, atk.act_start, "hit", dmg)
            atk.resolved = True
        else:
            dmg = atk.projectile.damage
            fr.emit(side, SCROLL, atk.projectile.start_frame, "hit", dmg)
            atk.projectile = None
        dfd.hp = max(0, dfd.hp - dmg)
        stunned[1 - side] = max(stunned[1 - side], HITSTUN)
    for side, kind in negated:
        atk, dfd = fs[side], fs[1 - side]
        if kind == "melee":
            fr.emit(side, atk.active, atk.act_start, "blocked")
            atk.resolved = True
        else:
            fr.emit(side, SCROLL, atk.projectile.start_frame, "blocked")
            atk.projectile = None
        if dfd.active == SUBSTITUTE and not dfd.resolved:
            fr.emit(1 - side, SUBSTITUTE, dfd.act_start, "negated")
            dfd.resolved = True
        stunned[side] = max(stunned[side], SUBSTITUTE_STUN)
    for side in (0, 1):
        if guarding[side] and fs[side].resolved and fs[side].active == SUBSTITUTE:
            fr.end_activation(side)
        if stunned[side]:
            fs[side].stun = max(fs[side].stun, stunned[side])
            fr.end_activation(side)

    # skill progression and projectiles
    for side in (0, 1):
        f, spec = fs[side], specs[side]
        if f.active >= 0:
            skill = spec.skills[f.active]
            if f.active == SCROLL and f.elapsed == skill.startup and not f.resolved:
                fr.drop_projectile(side)
                dx, dy, w, h = skill.hitbox
                f.projectile = Projectile(f.x + f.facing * dx, f.y + dy, f.facing * PROJECTILE_SPEED,
                                          PROJECTILE_LIFE, _buffed(f, skill.damage), w, h, f.act_start)
                f.resolved = True
            f.elapsed += 1
            if f.elapsed >= skill.total_frames:
                slot = f.active
                fr.end_activation(side)
                if slot in (SKILL1, SKILL2):
                    f.followup_slot, f.followup = slot, FOLLOWUP_FRAMES
        p = f.projectile
        if p is not None:
            p = p._replace(x=p.x + p.vx, life=p.life - 1)
            f.projectile = p
            if p.life <= 0 or not 0.0 <= p.x <= ARENA_W:
                fr.drop_projectile(side)

        # timers
        if any(f.cooldowns):
            f.cooldowns = tuple(c - 1 if c > 0 else 0 for c in f.cooldowns)
        f.energy = min(spec.max_energy, f.energy + spec.energy_regen)
        if f.stun > 0:
            f.stun -= 1
        if f.buff > 0:
            f.buff -= 1
        if f.followup > 0:
            f.followup -= 1
            if f.followup == 0:
                f.followup_slot = -1

    new_state = GameState(frame=state.frame + 1, fighters=(fs[0], fs[1]), specs=specs,
                          horizon=state.horizon, seed=state.seed, rng_state=state.rng_state)
    terminal = new_state.terminal
    if terminal:
        fr.frame = new_state.frame
        for side in (0, 1):
            fr.end_activation(side)
            fr.drop_projectile(side)
    hp_after = (fs[0].hp, fs[1].hp)
    return StepResult(new_state, (hp_before, hp_after), terminal, new_state.outcome, fr.events)


# --- rewards -----------------------------------------------------------------

TERMINAL_FACTOR = 7.0


def base_reward(hp_before: tuple[float, float], hp_after: tuple[float, float], terminal: bool,
                max_hp: float = 100.0) -> float:
    """HP-variation reward for the side listed first in each pair.

    ``(self change) + (opponent loss)``, divided by ``max_hp`` and multiplied
    by 7 on the final step.  The literal textbook form subtracts the
    opponent's current HP from itself; the intended reading counts the
    opponent's HP loss, which is what is computed here.
    """
    r = ((hp_after[0] - hp_before[0]) + (hp_before[1] - hp_after[1])) / max_hp
    return TERMINAL_FACTOR * r if terminal else r


class Style(str, enum.Enum):
    BALANCED = "balanced"
    CAUTIOUS = "cautious"
    AGGRESSIVE = "aggressive"


@dataclass(frozen=True)
class StyleReward:
    style: Style = Style.BALANCED
    w_self: float = 1.0
    w_opp: float = 1.0
    time_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.w_self < 0 or self.w_opp < 0:
            raise ConfigError("style_reward.weights", "w_self and w_opp must be >= 0")
        if self.time_penalty > 0:
            raise ConfigError("style_reward.time_penalty", "must be <= 0")

    @classmethod
    def preset(cls, style: str | Style) -> "StyleReward":
        style = Style(style)
        return STYLE_PRESETS[style]


STYLE_PRESETS = {
    Style.BALANCED: StyleReward(Style.BALANCED, 1.0, 1.0, 0.0),
    Style.CAUTIOUS: StyleReward(Style.CAUTIOUS, 1.5, 0.5, 0.0),
    Style.AGGRESSIVE: StyleReward(Style.AGGRESSIVE, 0.5, 1.5, -0.0005),
}


def style_reward(hp_before: tuple[float, float], hp_after: tuple[float, float], terminal: bool,
                 style: StyleReward, max_hp: float = 100.0) -> float:
    self_loss = (hp_before[0] - hp_after[0]) / max_hp
    opp_loss = (hp_before[1] - hp_after[1]) / max_hp
    hp_term = style.w_opp * opp_loss - style.w_self * self_loss
    if terminal:
        hp_term *= TERMINAL_FACTOR
    return hp_term + style.time_penalty


def reward_scale(state: GameState) -> float:
    """Common normalizer for both sides so per-step rewards stay zero-sum."""
    return float(max(state.specs[0].max_hp, state.specs[1].max_hp))


def swap_pair(pair: tuple) -> tuple:
    return (pair[1], pair[0])
