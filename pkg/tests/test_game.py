import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helt.errors import ConfigError, ContractViolation
from helt.game import (
    NOOP, PUNCH, SKILL1, SKILL3, SKILL_HEAD, SUBSKILL1, SUBSKILL2, SUBSTITUTE, ActionTriple,
    Outcome, StyleReward, base_reward, legal_action_mask, new_match, reward_scale, step,
    style_reward,
)
from helt.policy import sample_heads, stack_masks, to_action

from conftest import with_fighter


def _edges(box):
    cx, cy, w, h = box
    return cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2


def _intersects(a, b):
    ax0, ax1, ay0, ay1 = _edges(a)
    bx0, bx1, by0, by1 = _edges(b)
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def test_new_match_is_deterministic(pair):
    assert new_match(*pair, 1800, 7) == new_match(*pair, 1800, 7)


def test_new_match_rejects_zero_horizon(pair):
    with pytest.raises(ContractViolation):
        new_match(*pair, 0, 7)


def test_new_match_rejects_invalid_spec(pair):
    bad = dataclasses.replace(pair[0], max_hp=0)
    with pytest.raises(ConfigError):
        new_match(bad, pair[1])


def test_mirror_match_is_symmetric(pair):
    s = new_match(pair[0], pair[0], 1800, 7)
    a, b = s.fighters
    assert (a.hp, a.energy, a.cooldowns) == (b.hp, b.energy, b.cooldowns)
    assert a.x == pytest.approx(20.0 - b.x)
    assert a.y == b.y
    assert a.facing == -b.facing


def test_mask_cooldown(pair):
    s = new_match(*pair)
    cds = list(s.fighters[0].cooldowns)
    cds[SKILL1] = 10
    s = with_fighter(s, 0, cooldowns=tuple(cds))
    assert not legal_action_mask(s, 0).skill[SKILL1 + 1]


def test_mask_fresh_state(pair):
    m = legal_action_mask(new_match(*pair), 0)
    for slot in range(4):
        assert m.skill[slot + 1]
    assert not m.skill[SUBSKILL1 + 1] and not m.skill[SUBSKILL2 + 1]
    assert m.ud[0] and m.lr[0] and m.skill[0]


def test_mask_stunned(pair):
    s = with_fighter(new_match(*pair), 0, stun=5)
    m = legal_action_mask(s, 0)
    assert m.ud.tolist() == [True, False, False]
    assert m.lr.tolist() == [True, False, False]
    assert m.skill.tolist() == [True] + [False] * (len(SKILL_HEAD) - 1)


def test_mask_energy(pair):
    s = with_fighter(new_match(*pair), 0, energy=10.0)
    m = legal_action_mask(s, 0)
    assert not m.skill[SKILL3 + 1] and not m.skill[SUBSTITUTE + 1]


def test_mask_on_terminal_state_raises(pair):
    s = with_fighter(new_match(*pair), 1, hp=0)
    with pytest.raises(ContractViolation):
        legal_action_mask(s, 0)


def test_noop_step(pair):
    s = new_match(*pair)
    res = step(s, NOOP, NOOP)
    assert res.hp_delta[0] == res.hp_delta[1]
    assert res.state.frame == 1
    assert res.outcome is Outcome.ONGOING and not res.terminal


def test_illegal_action_raises(pair):
    s = new_match(*pair)
    with pytest.raises(ContractViolation):
        step(s, ActionTriple(skill=SUBSKILL1 + 1), NOOP)
    with pytest.raises(ContractViolation):
        step(s, ActionTriple(ud=3), NOOP)


def _close_range(pair, gap=1.0):
    s = new_match(*pair, 1800, 3)
    return with_fighter(with_fighter(s, 0, x=9.0), 1, x=9.0 + gap)


def test_punch_lands_when_boxes_overlap(pair):
    s = _close_range(pair)
    punch = pair[0].skills[PUNCH]
    res = step(s, ActionTriple(skill=PUNCH + 1), NOOP)
    frames = 1
    while not any(e.outcome == "hit" for e in res.events) and frames < punch.total_frames:
        res = step(res.state, NOOP, NOOP)
        frames += 1
    f0 = res.state.fighters[0]
    hit = (9.0 + punch.hitbox[0], s.fighters[0].y + punch.hitbox[1]) + tuple(punch.hitbox[2:])
    hurt = (10.0, s.fighters[1].y) + tuple(pair[1].hurtbox)
    assert _intersects(hit, hurt)
    assert frames == punch.startup + 1
    assert res.state.fighters[1].hp == pair[1].max_hp - punch.damage
    assert f0.hp == pair[0].max_hp


def test_punch_misses_out_of_range(pair):
    s = _close_range(pair, gap=6.0)
    res = step(s, ActionTriple(skill=PUNCH + 1), NOOP)
    events = list(res.events)
    for _ in range(pair[0].skills[PUNCH].total_frames):
        res = step(res.state, NOOP, NOOP)
        events += res.events
    assert res.state.fighters[1].hp == pair[1].max_hp
    assert [(e.slot, e.outcome) for e in events] == [(PUNCH, "whiffed")]


def test_substitute_negates_and_stuns(pair):
    s = _close_range(pair)
    energy0 = s.fighters[1].energy
    res = step(s, ActionTriple(skill=PUNCH + 1), ActionTriple(skill=SUBSTITUTE + 1))
    events = list(res.events)
    for _ in range(pair[0].skills[PUNCH].total_frames):
        res = step(res.state, NOOP, NOOP)
        events += res.events
    a, b = res.state.fighters
    assert b.hp == pair[1].max_hp
    assert b.energy < energy0
    assert a.stun > 0
    assert [e.outcome for e in events if e.side == 1] == ["negated"]
    assert [e.outcome for e in events if e.side == 0] == ["blocked"]


def test_timeout_outcomes(pair):
    s = new_match(*pair, horizon=1, seed=0)
    res = step(with_fighter(s, 0, hp=50), NOOP, NOOP)
    assert res.terminal and res.outcome is Outcome.B_WINS
    res = step(with_fighter(with_fighter(s, 0, hp=50), 1, hp=50), NOOP, NOOP)
    assert res.outcome is Outcome.DRAW


def test_base_reward_examples():
    assert base_reward((100, 100), (90, 70), False, 100) == pytest.approx(0.20, abs=1e-12)
    assert base_reward((100, 100), (90, 70), True, 100) == pytest.approx(1.40, abs=1e-12)
    assert base_reward((100, 100), (100, 100), False, 100) == 0.0


def test_style_reward_examples():
    bal, cau, agg = (StyleReward.preset(s) for s in ("balanced", "cautious", "aggressive"))
    for terminal in (False, True):
        assert style_reward((100, 100), (90, 70), terminal, bal) == pytest.approx(
            base_reward((100, 100), (90, 70), terminal), abs=1e-15)
    assert style_reward((100, 100), (100, 100), False, agg) == agg.time_penalty < 0
    assert style_reward((100, 100), (90, 90), False, cau) < style_reward(
        (100, 100), (90, 90), False, agg)


def test_style_reward_rejects_positive_penalty():
    with pytest.raises(ConfigError):
        StyleReward(time_penalty=0.1)


def _random_rollout(pool, seed, horizon):
    rng = np.random.default_rng(seed)
    a, b = (pool[i] for i in rng.integers(0, len(pool), 2))
    s = new_match(a, b, horizon, seed)
    states, results = [s], []
    while not s.terminal:
        masks = stack_masks([legal_action_mask(s, 0), legal_action_mask(s, 1)])
        probs = [m / m.sum(axis=1, keepdims=True) for m in masks]
        acts = sample_heads(probs, rng)
        res = step(s, to_action(acts[0]), to_action(acts[1]))
        results.append(res)
        s = res.state
        states.append(s)
    return states, results


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_random_rollouts_respect_contracts(pool, seed):
    # masks are sound, hp never rises, rewards are zero-sum, matches end in time
    states, results = _random_rollout(pool, seed, horizon=300)
    assert len(results) <= 300
    assert results[-1].terminal and states[-1].outcome is not Outcome.ONGOING
    for s, res in zip(states, results):
        (a0, b0), (a1, b1) = res.hp_delta
        assert a1 <= a0 and b1 <= b0
        scale = reward_scale(s)
        ra = base_reward((a0, b0), (a1, b1), res.terminal, scale)
        rb = base_reward((b0, a0), (b1, a1), res.terminal, scale)
        assert ra == -rb
        for f, spec in zip(res.state.fighters, res.state.specs):
            assert 0 <= f.hp <= spec.max_hp
            assert 0 <= f.energy <= spec.max_energy
            assert all(0 <= c <= sk.cooldown for c, sk in zip(f.cooldowns, spec.skills))
            assert f.stun >= 0


def test_replay_is_bit_identical(pool):
    s1, _ = _random_rollout(pool, 99, 200)
    s2, _ = _random_rollout(pool, 99, 200)
    assert s1 == s2
