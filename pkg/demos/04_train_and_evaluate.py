"""A small league end to end: train, rate, score behavior, add a difficulty wrapper.

This is a few-minute desk run. The acceptance suite trains longer.
"""

import numpy as np

from helt.agents import AggressiveBot, PolicyAgent, RandomAgent
from helt.evaluation import (
    BehaviorLog, DifficultyConfig, apply_difficulty, behavior_scores, cdf_report, evaluate_pool,
)
from helt.game import StyleReward
from helt.league import LeagueConfig, Role, run_league
from helt.pool import generate_pool, scaled_level_counts, select_subset
from helt.ppo import LearnerConfig
from helt.rollout import play_matches
from helt.training import NeuralBackend

pool = generate_pool(3, 0)
familiar_ids, held_ids = select_subset(pool, scaled_level_counts(6))
by_id = {c.char_id: c for c in pool}
familiar = [by_id[i] for i in familiar_ids]

backend = NeuralBackend(familiar, LearnerConfig(learning_rate=1e-3, epochs_per_batch=4),
                        StyleReward.preset("aggressive"))
league = run_league(LeagueConfig(total_iterations=3, iteration_timeout_steps=5000), backend, seed=0)
main = league.members[Role.MAIN]
agent = PolicyAgent(backend.spec_for(main.mode), main.params, "main", greedy=True)
print(league.metrics_csv())

rng = np.random.default_rng(1)
report = evaluate_pool({"main": agent, "aggressive": AggressiveBot(), "random": RandomAgent()},
                       familiar, 20, rng)
for i, name in enumerate(report.names):
    print(f"{name:10s} elo {report.elo.ratings[name]:7.1f}  win rates {np.round(report.winrate[i], 2)}")

played = play_matches(agent, AggressiveBot(), [(familiar[0], familiar[1])] * 10, rng, record=True)
scores = [behavior_scores(BehaviorLog.from_match(m, 0)) for m in played]
for metric in ("attack", "special", "blitz"):
    x, y = cdf_report({"main": [s[metric] for s in scores]})["main"]
    print(f"{metric:8s} CDF points", list(zip(x.round(2).tolist(), y.round(2).tolist()))[:4])

for level in ("beginner", "intermediate", "advanced"):
    wrapped = apply_difficulty(agent, DifficultyConfig.preset(level))
    rep = evaluate_pool({"main": wrapped, "random": RandomAgent()}, familiar, 20, rng)
    print(f"{level:12s} win rate vs random {rep.winrate[0, 1]:.2f}")
