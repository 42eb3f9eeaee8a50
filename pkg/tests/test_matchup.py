from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helt.errors import ContractViolation
from helt.matchup import (
    MatchupState, expected_utility, observe, record_result, sample_pair, to_csv,
    update_regret_and_weights,
)

# (i, j, j_wins) results for the two-character trace
SCRIPT = [(0, 1, True), (1, 0, False), (0, 0, True), (1, 1, True), (0, 1, False), (1, 0, True)]


def fraction_trace(script, n=2, gamma=Fraction(1, 2), eta=Fraction(1, 10)):
    """Exact rational evaluation of the four update formulas, one step per result."""
    rbar = [[Fraction(1, 2)] * n for _ in range(n)]
    regret = [[Fraction(0)] * n for _ in range(n)]
    w = [[Fraction(1, n * n)] * n for _ in range(n)]
    trace = []
    for i, j, won in script:
        rbar[i][j] = rbar[i][j] * gamma + (1 if won else 0) * (1 - gamma)
        e = sum(rbar[a][b] * w[a][b] for a in range(n) for b in range(n))
        regret = [[max(regret[a][b] + rbar[a][b] - e, Fraction(0)) for b in range(n)]
                  for a in range(n)]
        total = sum(sum(row) for row in regret)
        if total == 0:
            w = [[Fraction(1, n * n)] * n for _ in range(n)]
        else:
            w = [[regret[a][b] / total * (1 - eta) + eta / (n * n) for b in range(n)]
                 for a in range(n)]
        trace.append(([row[:] for row in rbar], e, regret, w))
    return trace


def test_record_result_examples():
    s = MatchupState.fresh(3, gamma_smooth=0.9)
    assert record_result(s, 1, 2, True).wr_ema[1, 2] == pytest.approx(0.55, abs=1e-15)
    after = record_result(s, 1, 2, False)
    assert after.wr_ema[1, 2] == pytest.approx(0.45, abs=1e-15)
    changed = np.argwhere(after.wr_ema != s.wr_ema)
    assert changed.tolist() == [[1, 2]]


def test_repeated_wins_approach_one_monotonically():
    s = MatchupState.fresh(2, gamma_smooth=0.9)
    last = s.wr_ema[0, 1]
    for _ in range(300):
        s = record_result(s, 0, 1, True)
        assert last <= s.wr_ema[0, 1] <= 1.0
        last = s.wr_ema[0, 1]
    assert last > 0.999


def test_out_of_range_pair_raises():
    with pytest.raises(ContractViolation):
        record_result(MatchupState.fresh(2), 2, 0, True)


def test_expected_utility_cases():
    s = MatchupState.fresh(3)
    assert expected_utility(s) == 0.5
    w = np.zeros((3, 3))
    w[2, 1] = 1.0
    s2 = MatchupState(3, np.arange(9.0).reshape(3, 3) / 10, np.zeros((3, 3)), w)
    assert expected_utility(s2) == pytest.approx(0.7, abs=1e-15)
    rng = np.random.default_rng(0)
    r, wt = rng.random((2, 2)), rng.dirichlet(np.ones(4)).reshape(2, 2)
    s3 = MatchupState(2, r, np.zeros((2, 2)), wt)
    hand = r[0, 0] * wt[0, 0] + r[0, 1] * wt[0, 1] + r[1, 0] * wt[1, 0] + r[1, 1] * wt[1, 1]
    assert expected_utility(s3) == pytest.approx(hand, abs=1e-12)


def test_zero_regret_falls_back_to_exact_uniform():
    s = update_regret_and_weights(MatchupState.fresh(3))
    assert np.all(s.regret == 0)
    assert np.all(s.weights == 1.0 / 9)


def test_eta_one_is_uniform():
    s = MatchupState.fresh(2, eta=1.0)
    s = observe(s, 0, 1, True)
    assert s.regret.sum() > 0
    assert np.allclose(s.weights, 0.25, atol=1e-15)


def test_scripted_trace_matches_fraction_oracle():
    s = MatchupState.fresh(2, gamma_smooth=0.5, eta=0.1)
    for (i, j, won), (rbar, e, regret, w) in zip(SCRIPT, fraction_trace(SCRIPT)):
        e_code = expected_utility(record_result(s, i, j, won))
        s = observe(s, i, j, won)
        assert e_code == pytest.approx(float(e), abs=1e-12)
        assert np.allclose(s.wr_ema, np.array(rbar, float), atol=1e-12, rtol=0)
        assert np.allclose(s.regret, np.array(regret, float), atol=1e-12, rtol=0)
        assert np.allclose(s.weights, np.array(w, float), atol=1e-12, rtol=0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4),
       gamma=st.floats(0.0, 1.0), eta=st.floats(0.0, 1.0))
def test_invariants_hold_over_random_updates(seed, n, gamma, eta):
    rng = np.random.default_rng(seed)
    s = MatchupState.fresh(n, gamma, eta)
    for _ in range(200):
        s = observe(s, int(rng.integers(n)), int(rng.integers(n)), bool(rng.random() < 0.5))
        assert abs(s.weights.sum() - 1.0) <= 1e-12
        assert np.all(s.weights >= 0) and np.all(s.regret >= 0)
        assert np.all((s.wr_ema >= 0) & (s.wr_ema <= 1))


def test_higher_regret_gets_weakly_higher_weight():
    rng = np.random.default_rng(1)
    s = MatchupState.fresh(3)
    for _ in range(100):
        s = observe(s, int(rng.integers(3)), int(rng.integers(3)), bool(rng.random() < 0.6))
    r, w = s.regret.ravel(), s.weights.ravel()
    order = np.argsort(r)
    assert np.all(np.diff(w[order]) >= -1e-15)


def test_sample_pair_concentrated():
    w = np.zeros((4, 4))
    w[2, 3] = 1.0
    s = MatchupState(4, np.full((4, 4), 0.5), np.zeros((4, 4)), w)
    rng = np.random.default_rng(2)
    assert {sample_pair(s, rng) for _ in range(100)} == {(2, 3)}


def test_sample_pair_uniform_frequencies():
    s = MatchupState.fresh(3)
    rng = np.random.default_rng(3)
    n = 90_000
    counts = np.zeros((3, 3))
    for _ in range(n):
        counts[sample_pair(s, rng)] += 1
    p = 1 / 9
    assert np.all(np.abs(counts / n - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_csv_dump_round_trips():
    w = MatchupState.fresh(2).weights
    rows = [line.split(",") for line in to_csv(w).strip().splitlines()]
    assert rows[0][1:] == ["0", "1"]
    assert np.array([[float(v) for v in r[1:]] for r in rows[1:]]).tolist() == w.tolist()
