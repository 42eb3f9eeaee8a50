"""Regret-matching selection of character pairs for training matches.

Pair ``(i, j)`` means opponent character ``i`` against learner character
``j``; a result counts as a success when ``j`` (the learner's side) wins.
After every result the smoothed win rate of the pair is updated, every
pair's regret grows by how far its win rate beats the currently expected
win rate, and the sampling weights follow the positive regrets mixed with
a uniform floor.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class MatchupState:
    n: int
    wr_ema: np.ndarray
    regret: np.ndarray
    weights: np.ndarray
    gamma_smooth: float = 0.99
    eta: float = 0.1

    @classmethod
    def fresh(cls, n: int, gamma_smooth: float = 0.99, eta: float = 0.1,
              initial_winrate: float = 0.5) -> "MatchupState":
        if n < 1:
            raise ContractViolation("matchup pool needs at least one character")
        if not 0 <= gamma_smooth <= 1 or not 0 <= eta <= 1:
            raise ContractViolation("gamma_smooth and eta must lie in [0, 1]")
        return cls(n, np.full((n, n), float(initial_winrate)), np.zeros((n, n)),
                   np.full((n, n), 1.0 / (n * n)), gamma_smooth, eta)

    def to_dict(self) -> dict:
        return {"n": self.n, "gamma_smooth": self.gamma_smooth, "eta": self.eta,
                "wr_ema": self.wr_ema.tolist(), "regret": self.regret.tolist(),
                "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MatchupState":
        return cls(int(d["n"]), np.array(d["wr_ema"], float), np.array(d["regret"], float),
                   np.array(d["weights"], float), float(d["gamma_smooth"]), float(d["eta"]))


def record_result(state: MatchupState, i: int, j: int, j_wins: bool) -> MatchupState:
    if not (0 <= i < state.n and 0 <= j < state.n):
        raise ContractViolation(f"pair ({i}, {j}) outside a pool of {state.n}")
    wr = state.wr_ema.copy()
    r = 1.0 if j_wins else 0.0
    wr[i, j] = wr[i, j] * state.gamma_smooth + r * (1.0 - state.gamma_smooth)
    return replace(state, wr_ema=wr)


def expected_utility(state: MatchupState) -> float:
    """Overall win rate under the current (previous-step) weights."""
    return float(np.sum(state.wr_ema * state.weights))


def update_regret_and_weights(state: MatchupState) -> MatchupState:
    expected = expected_utility(state)
    regret = np.maximum(state.regret + (state.wr_ema - expected), 0.0)
    total = regret.sum()
    n2 = state.n * state.n
    if total == 0:
        weights = np.full((state.n, state.n), 1.0 / n2)
    else:
        weights = regret / total * (1.0 - state.eta) + state.eta / n2
    return replace(state, regret=regret, weights=weights)


def observe(state: MatchupState, i: int, j: int, j_wins: bool) -> MatchupState:
    """``record_result`` followed by ``update_regret_and_weights``."""
    return update_regret_and_weights(record_result(state, i, j, j_wins))


def sample_pair(state: MatchupState, rng: np.random.Generator) -> tuple[int, int]:
    flat = state.weights.ravel()
    k = int(rng.choice(flat.size, p=flat / flat.sum()))
    return divmod(k, state.n)


def to_csv(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = matrix.shape[1]
    writer.writerow(["opponent\\learner"] + [str(j) for j in range(n)])
    for i, row in enumerate(matrix):
        writer.writerow([str(i)] + [repr(float(v)) for v in row])
    return buf.getvalue()
