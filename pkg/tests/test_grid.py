import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levelqd.grid import (
    Game,
    LatentSeed,
    Level,
    SeedKind,
    decode_argmax,
    encode_onehot,
    from_text,
    make_game_spec,
    sample_random_level,
    to_text,
)


def test_alphabets():
    assert make_game_spec("maze").alphabet.tiles == ("empty", "wall")
    assert make_game_spec("zelda").alphabet.tiles == ("empty", "wall", "player", "key", "door", "enemy")
    assert make_game_spec("sokoban").alphabet.tiles == ("empty", "wall", "player", "crate", "target")
    assert make_game_spec("maze").tile_count == 2
    assert make_game_spec("zelda").tile_count == 6
    assert make_game_spec("sokoban").tile_count == 5


def test_default_dimensions():
    assert (make_game_spec("maze").height, make_game_spec("maze").width) == (16, 16)
    assert (make_game_spec("sokoban").height, make_game_spec("sokoban").width) == (10, 10)
    spec = make_game_spec("maze", height=8, width=12)
    assert (spec.height, spec.width) == (8, 12)
    with pytest.raises(ValueError):
        make_game_spec("maze", height=0)


def test_sample_random_level_deterministic(maze_spec):
    a = sample_random_level(maze_spec, 1234)
    b = sample_random_level(maze_spec, 1234)
    assert a == b
    assert a.cells.shape == (16, 16)
    assert set(np.unique(a.cells)) <= {0, 1}
    assert sample_random_level(maze_spec, 1235) != a


def test_sample_random_level_uniform(maze_spec):
    # Monte-Carlo check of per-cell wall frequency over many seeds.
    counts = np.zeros((16, 16))
    n = 10_000
    for seed in range(n):
        counts += sample_random_level(maze_spec, seed).cells
    freq = counts / n
    assert abs(freq.mean() - 0.5) < 0.005
    assert np.abs(freq - 0.5).max() < 0.02


def test_encode_onehot_single_cell():
    level = Level(np.array([[1]], dtype=np.int8))
    state = encode_onehot(level, 2)
    assert state.onehot[:, 0, 0].tolist() == [0, 1]


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_encode_onehot_partition(seed):
    spec = make_game_spec("zelda")
    level = sample_random_level(spec, seed)
    state = encode_onehot(level, spec.tile_count)
    assert (state.onehot.sum(axis=0) == 1).all()
    assert (state.onehot.argmax(axis=0) == level.cells).all()


def test_encode_onehot_aux_zero(maze_spec):
    state = encode_onehot(sample_random_level(maze_spec, 0), 2, aux_channels=3)
    assert state.aux.shape == (3, 16, 16)
    assert (state.aux == 0).all()
    with pytest.raises(ValueError):
        encode_onehot(sample_random_level(maze_spec, 0), 2, aux_channels=2)


def test_decode_argmax_channel_winner():
    raw = np.zeros((3, 2, 2))
    raw[0] = 1.0
    assert (decode_argmax(raw).cells == 0).all()


def test_decode_argmax_tie_breaks_low():
    raw = np.zeros((2, 1, 1))  # exact tie between channels
    assert decode_argmax(raw).cells[0, 0] == 0
    raw = np.array([[[0.5]], [[0.5]], [[0.2]]])
    assert decode_argmax(raw).cells[0, 0] == 0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_encode_decode_idempotent(seed):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((4, 6, 5))
    level = decode_argmax(raw)
    state = encode_onehot(level, 4)
    again = decode_argmax(state.onehot.astype(float))
    assert again == level
    assert (encode_onehot(again, 4).onehot == state.onehot).all()


@pytest.mark.parametrize("game", ["maze", "zelda", "sokoban"])
def test_text_round_trip(game):
    spec = make_game_spec(game)
    level = sample_random_level(spec, 99)
    text = to_text(level, spec.alphabet)
    assert from_text(text, spec.alphabet) == level


def test_text_format_chars(sokoban_spec):
    level = Level(np.array([[0, 1, 2], [3, 4, 0]], dtype=np.int8))
    assert to_text(level, sokoban_spec.alphabet) == ".#@\n$X.\n"
    with pytest.raises(ValueError):
        from_text("..Z\n", sokoban_spec.alphabet)


def test_latent_seed_payloads(maze_spec):
    seed = LatentSeed(SeedKind.RANDOM_LEVEL, 77)
    assert seed.level(maze_spec) == sample_random_level(maze_spec, 77)
    vec_seed = LatentSeed(SeedKind.GAUSSIAN_VECTOR, 77)
    v1, v2 = vec_seed.vector(), vec_seed.vector()
    assert v1.shape == (16,)
    assert np.array_equal(v1, v2)
    with pytest.raises(ValueError):
        seed.vector()
    with pytest.raises(ValueError):
        vec_seed.level(maze_spec)


def test_level_immutable_and_hashable():
    level = Level(np.zeros((2, 2), dtype=np.int8))
    with pytest.raises(ValueError):
        level.cells[0, 0] = 1
    assert hash(level) == hash(Level(np.zeros((2, 2), dtype=np.int8)))
    assert Game("maze") is Game.MAZE
