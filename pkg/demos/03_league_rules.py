"""League bookkeeping with injected match results instead of learning.

Every learner wins a match with probability 0.6. Snapshots come from the
win-rate threshold or the step timeout. The event log shows who reset and where to.
"""

import numpy as np

from helt.league import LeagueConfig, ScriptedBackend, pfsp_weights, run_league

print("f_var over win rates [0.5, 0.9]:", pfsp_weights([0.5, 0.9], "var").round(4))
print("f_hard over win rates [0.2, 0.5, 0.9]:", pfsp_weights([0.2, 0.5, 0.9], "hard").round(4))

cfg = LeagueConfig(iteration_timeout_steps=1000, total_iterations=6)
backend = ScriptedBackend(lambda member, opp, rng: float(rng.random() < 0.6))
league = run_league(cfg, backend, seed=0)

for e in league.events:
    if e["kind"] == "snapshot":
        tail = f" -> reset to {e['reset_to']}" if e["reset"] else ""
        print(f"step {e['step']:6d}  {e['snapshot']:22s}{tail}")
print()
print(league.metrics_csv())
print("pool:", len(league.pool), "snapshots;",
      "resets per role:", {r.value: m.resets for r, m in league.members.items()})
print("main matchup weights:\n", np.round(league.members[next(iter(league.members))].matchup.weights, 3))
