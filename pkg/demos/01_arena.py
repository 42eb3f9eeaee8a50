"""A tour of the arena: characters, masks, one scripted match and the rewards.

Run with ``python demos/01_arena.py``.
"""

import numpy as np

from helt.agents import AggressiveBot, RandomAgent
from helt.game import (
    SKILL_NAMES, StyleReward, base_reward, legal_action_mask, new_match, style_reward,
)
from helt.pool import generate_pool
from helt.rollout import play_matches

pool = generate_pool(n_per_level=3, seed=0)
print(f"{len(pool)} synthetic characters; levels:", "".join(c.level for c in pool))
hero, rival = pool[0], pool[9]
print(f"{hero.name}: hp {hero.max_hp}, speed {hero.move_speed}, strongest skill "
      f"{SKILL_NAMES[hero.strongest_skill]}")

# the legal skills at the opening frame: follow-ups need their parent skill active
state = new_match(hero, rival, horizon=1800, seed=7)
mask = legal_action_mask(state, 0)
print("legal skills at frame 0:", [n for n, ok in zip(("none",) + SKILL_NAMES, mask.skill) if ok])

# a batch of scripted matches, with the activation events kept
rng = np.random.default_rng(0)
played = play_matches(AggressiveBot(), RandomAgent(), [(hero, rival)] * 20, rng, record=True)
wins = sum(m.outcome.value == "a_wins" for m in played)
print(f"aggressive bot beat the random agent in {wins}/20 matches, "
      f"mean length {np.mean([m.frames for m in played]):.0f} frames")
print("first events of match 0:", played[0].events[:4])

# rewards: own HP 100 -> 90 and opponent 100 -> 70 on a 100-HP scale
before, after = (100, 100), (90, 70)
print("base reward", base_reward(before, after, False), "terminal", base_reward(before, after, True))
for style in ("balanced", "cautious", "aggressive"):
    print(f"{style:10s}", round(style_reward(before, after, False, StyleReward.preset(style)), 4) + 0.0)
