import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from helt.agents import AggressiveBot, IdleAgent, RandomAgent
from helt.errors import ConfigError, ContractViolation
from helt.evaluation import (
    BEHAVIOR_METRICS, BehaviorLog, DifficultyConfig, EloTable, apply_difficulty,
    behavior_scores, cdf_report, elo_update, evaluate_pool, expected_score, generalization,
    win_rate,
)
from helt.game import PUNCH, SKILL1, SUBSTITUTE, ActionEvent, ActionTriple, Outcome, new_match
from helt.rollout import play_matches

A, B, DRAW = Outcome.A_WINS, Outcome.B_WINS, Outcome.DRAW
finite = st.floats(-3000, 5000)


# --- Elo -------------------------------------------------------------------------

def test_elo_examples():
    assert elo_update(1200.0, 1200.0, A) == (1216.0, 1184.0)
    assert elo_update(1500.0, 1500.0, DRAW) == (1500.0, 1500.0)
    ra, _ = elo_update(1600.0, 1200.0, A)
    assert ra - 1600.0 == pytest.approx(32 / 11, abs=1e-12)
    assert expected_score(1600.0, 1200.0) == pytest.approx(10 / 11, abs=1e-15)


def test_elo_rejects_unfinished_match():
    with pytest.raises(ContractViolation):
        elo_update(1200.0, 1200.0, Outcome.ONGOING)


@settings(max_examples=300, deadline=None)
@given(ra=finite, rb=finite, outcome=st.sampled_from([A, B, DRAW]), k=st.floats(1, 64))
def test_elo_zero_sum_and_symmetry(ra, rb, outcome, k):
    na, nb = elo_update(ra, rb, outcome, k)
    # the two changes are the same float with opposite signs
    assert (na - ra) == pytest.approx(-(nb - rb), abs=1e-9)
    flipped = {A: B, B: A, DRAW: DRAW}[outcome]
    sb, sa = elo_update(rb, ra, flipped, k)
    assert (sa, sb) == pytest.approx((na, nb), abs=1e-9)


def test_elo_table_conserves_total_exactly_from_equal_start():
    t = EloTable()
    rng = np.random.default_rng(0)
    names = ["a", "b", "c", "d"]
    for _ in range(2000):
        i, j = rng.choice(4, 2, replace=False)
        t.record(names[i], names[j], [A, B, DRAW][rng.integers(3)])
    assert sum(t.ratings.values()) == pytest.approx(4 * 1200.0, abs=1e-9)


# --- pool evaluation -------------------------------------------------------------

def test_always_winning_stub_has_rising_elo(pool):
    rep = evaluate_pool({"aggr": AggressiveBot(), "idle": IdleAgent()}, pool[:6], 40,
                        np.random.default_rng(1), horizon=600)
    assert rep.winrate[0, 1] == 1.0
    # every result is a win, so each update moves the rating strictly up
    r, o = 1200.0, 1200.0
    for _ in range(40):
        nr, o = elo_update(r, o, A)
        assert nr > r
        r = nr
    assert rep.elo.ratings["aggr"] == pytest.approx(r, abs=1e-9)


def test_self_play_is_even(pool):
    n = 400
    rep = evaluate_pool({"x": RandomAgent(), "y": RandomAgent()}, pool[:6], n,
                        np.random.default_rng(2), horizon=300)
    assert abs(rep.winrate[0, 1] - 0.5) <= 3 * np.sqrt(0.25 / n)
    assert rep.winrate[0, 1] + rep.winrate[1, 0] == pytest.approx(1.0, abs=1e-12)


def test_matchups_are_uniform(pool):
    n = 80_000
    rep = evaluate_pool({"a": IdleAgent(), "b": IdleAgent()}, pool[:4], n,
                        np.random.default_rng(3), horizon=1)
    freq = np.array([[rep.pair_counts.get((i, j), 0) for j in range(4)] for i in range(4)]) / n
    p = 1 / 16
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_evaluation_is_deterministic(pool):
    def run():
        rep = evaluate_pool({"r": RandomAgent(), "g": AggressiveBot()}, pool[:4], 12,
                            np.random.default_rng(4), horizon=200)
        return rep.wins.tolist(), rep.elo.to_dict()
    assert run() == run()


def test_evaluation_contract_errors(pool):
    rng = np.random.default_rng(0)
    with pytest.raises(ContractViolation):
        evaluate_pool({"a": IdleAgent()}, pool, 2, rng)
    with pytest.raises(ContractViolation):
        evaluate_pool({"a": IdleAgent(), "b": IdleAgent()}, [], 2, rng)
    with pytest.raises(ConfigError):
        generalization({"a": IdleAgent(), "b": IdleAgent()}, pool[:3], [], 2, rng)


def test_generalization_reports_drop(pool):
    table, fam, unf = generalization({"aggr": AggressiveBot(), "idle": IdleAgent()},
                                     pool[:3], pool[3:6], 6, np.random.default_rng(5), 300)
    for name, row in table.items():
        assert row["drop"] == pytest.approx(row["familiar"] - row["held_out"], abs=1e-12)
        assert row["familiar"] == fam.elo_mean[name] and row["held_out"] == unf.elo_mean[name]


# --- behavior scores -------------------------------------------------------------

def ev(frame, side, slot, outcome, damage=0, start=None):
    return ActionEvent(frame, side, slot, frame if start is None else start, outcome, damage)


def test_special_two_of_three(pool):
    spec = pool[0]
    s = spec.strongest_skill
    log = BehaviorLog(0, spec, [ev(10, 0, s, "hit", 5), ev(50, 0, s, "whiffed"),
                                ev(90, 0, s, "hit", 5)], 200)
    assert behavior_scores(log)["special"] == pytest.approx(2 / 3, abs=1e-15)


def test_all_punches_land_and_zero_use_convention(pool):
    log = BehaviorLog(0, pool[0], [ev(5, 0, PUNCH, "hit", 3), ev(40, 0, PUNCH, "hit", 3),
                                   ev(45, 1, PUNCH, "whiffed")], 200)
    scores = behavior_scores(log)
    assert scores["attack"] == 1.0
    assert scores["substitution"] == 0.0 and scores["error_rate"] == 1.0
    assert scores["blitz"] == pytest.approx(1 - 5 / 90, abs=1e-15)
    empty = behavior_scores(BehaviorLog(1, pool[0], [], 10))
    assert all(empty[m] == 0.0 for m in BEHAVIOR_METRICS)


def test_counter_needs_substitute_then_punish(pool):
    events = [ev(10, 1, SKILL1, "blocked"), ev(10, 0, SUBSTITUTE, "negated"),
              ev(25, 0, PUNCH, "hit", 4),          # answered inside 30 frames
              ev(60, 1, PUNCH, "hit", 4),          # connected, not answered
              ev(100, 1, PUNCH, "blocked"), ev(100, 0, SUBSTITUTE, "negated"),
              ev(140, 0, PUNCH, "hit", 4)]         # punished too late
    scores = behavior_scores(BehaviorLog(0, pool[0], events, 300))
    assert scores["counter"] == pytest.approx(1 / 3, abs=1e-15)
    assert scores["substitution"] == 1.0 and scores["error_rate"] == 0.0
    assert behavior_scores(BehaviorLog(0, pool[0], events, 300), counter_window=50)["counter"] \
        == pytest.approx(2 / 3, abs=1e-15)


def test_log_validation(pool):
    with pytest.raises(ContractViolation):
        BehaviorLog(0, pool[0], [ev(5, 0, PUNCH, "hit"), ev(4, 0, PUNCH, "hit")], 10)
    with pytest.raises(ContractViolation):
        BehaviorLog(0, pool[0], [ev(5, 0, PUNCH, "hit", -1)], 10)


def test_scores_from_real_matches_are_bounded_and_deterministic(pool):
    played = play_matches(AggressiveBot(), RandomAgent(), [(pool[0], pool[5])] * 4,
                          np.random.default_rng(6), horizon=600, record=True)
    for m in played:
        for side in (0, 1):
            s1 = behavior_scores(BehaviorLog.from_match(m, side))
            s2 = behavior_scores(BehaviorLog.from_match(m, side))
            assert s1 == s2 and all(0.0 <= v <= 1.0 for v in s1.values())


# --- CDF -------------------------------------------------------------------------

def test_cdf_examples():
    (v, h), = cdf_report({"p": [0.5]}).values()
    assert v.tolist() == [0.5] and h.tolist() == [1.0]
    (v, h), = cdf_report({"p": [1.0, 0.0]}).values()
    assert v.tolist() == [0.0, 1.0] and h.tolist() == [0.5, 1.0]
    with pytest.raises(ContractViolation):
        cdf_report({"p": []})


def test_cdf_of_uniform_scores_within_ks_band():
    x = np.random.default_rng(7).random(1000)
    v, h = cdf_report({"u": x})["u"]
    assert np.all(np.diff(v) >= 0) and np.all(np.diff(h) > 0) and h[-1] == 1.0
    d = max(np.max(h - v), np.max(v - (h - 1 / 1000)))
    assert d <= stats.kstwo.ppf(0.99, 1000)


# --- difficulty ------------------------------------------------------------------

class Recorder:
    name = "rec"

    def __init__(self):
        self.calls = 0

    def act(self, states, sides, rng):
        self.calls += len(states)
        return [ActionTriple(1, 2, 0, 0) for _ in states]


def _drive(agent, pool, frames=100):
    base = new_match(pool[0], pool[1], 1800, 0)
    rng = np.random.default_rng(0)
    out = []
    for f in range(frames):
        out.extend(agent.act([dataclasses.replace(base, frame=f)], [0], rng))
    return out


def test_delay_four_queries_a_quarter_of_frames(pool):
    inner = Recorder()
    wrapped = apply_difficulty(inner, DifficultyConfig(4, 1.0))
    _drive(wrapped, pool)
    assert inner.calls == 25 and wrapped.queries == 25


def test_identity_and_silent_wrappers(pool):
    assert _drive(apply_difficulty(Recorder(), DifficultyConfig(1, 1.0)), pool) == \
        _drive(Recorder(), pool)
    assert set(_drive(apply_difficulty(Recorder(), DifficultyConfig(1, 0.0)), pool)) == \
        {ActionTriple()}


def test_win_rate_non_decreasing_in_exec_prob(pool):
    rates = [win_rate(apply_difficulty(AggressiveBot(), DifficultyConfig(2, q)), RandomAgent(),
                      pool[:6], 60, np.random.default_rng(8), horizon=600)
             for q in (0.0, 0.5, 1.0)]
    assert rates[0] <= rates[1] <= rates[2]


def test_difficulty_presets_and_validation():
    assert DifficultyConfig.preset("beginner") == DifficultyConfig(12, 0.5)
    assert DifficultyConfig.preset("advanced").exec_prob == 0.95
    for bad in (dict(delay_frames=0), dict(exec_prob=1.5)):
        with pytest.raises(ConfigError):
            DifficultyConfig(**bad)
    with pytest.raises(ConfigError):
        DifficultyConfig.preset("expert")
