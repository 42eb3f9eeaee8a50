import dataclasses

import numpy as np
import pytest

from helt.game import FighterState, GameState, new_match
from helt.pool import generate_pool


@pytest.fixture(scope="session")
def pool():
    return generate_pool(3, 0)


@pytest.fixture(scope="session")
def pair(pool):
    return pool[0], pool[4]


def with_fighter(state: GameState, side: int, **changes) -> GameState:
    """Copy of ``state`` with some fields of one fighter replaced."""
    fighters = list(state.fighters)
    fighters[side] = dataclasses.replace(fighters[side], **changes)
    return dataclasses.replace(state, fighters=tuple(fighters))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
