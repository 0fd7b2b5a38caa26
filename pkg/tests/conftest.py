import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from levelqd.grid import Level, make_game_spec


@pytest.fixture
def maze_spec():
    return make_game_spec("maze")


@pytest.fixture
def zelda_spec():
    return make_game_spec("zelda")


@pytest.fixture
def sokoban_spec():
    return make_game_spec("sokoban")


def level_from_rows(rows, alphabet) -> Level:
    from levelqd.grid import from_text

    return from_text("\n".join(rows) + "\n", alphabet)


def random_level(rng: np.random.Generator, tile_count: int, h: int, w: int) -> Level:
    return Level(rng.integers(0, tile_count, (h, w), dtype=np.int8))
