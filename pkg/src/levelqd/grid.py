"""Core level representation: tile alphabets, levels, one-hot state, latent seeds."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Game(str, Enum):
    MAZE = "maze"
    ZELDA = "zelda"
    SOKOBAN = "sokoban"


class SeedKind(str, Enum):
    RANDOM_LEVEL = "random_level"
    GAUSSIAN_VECTOR = "gaussian_vector"


@dataclass(frozen=True)
class TileAlphabet:
    """Ordered tile set for one game; tile index = position in `tiles`."""

    game: Game
    tiles: tuple[str, ...]
    chars: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.tiles)

    def index(self, name: str) -> int:
        return self.tiles.index(name)


_ALPHABETS = {
    Game.MAZE: TileAlphabet(Game.MAZE, ("empty", "wall"), (".", "#")),
    Game.ZELDA: TileAlphabet(
        Game.ZELDA,
        ("empty", "wall", "player", "key", "door", "enemy"),
        (".", "#", "@", "K", "D", "E"),
    ),
    Game.SOKOBAN: TileAlphabet(
        Game.SOKOBAN,
        ("empty", "wall", "player", "crate", "target"),
        (".", "#", "@", "$", "X"),
    ),
}

_DEFAULT_DIMS = {Game.MAZE: (16, 16), Game.ZELDA: (16, 16), Game.SOKOBAN: (10, 10)}

# Canonical tile indices shared across games.
EMPTY = 0
WALL = 1


@dataclass(frozen=True)
class GameSpec:
    """Tile alphabet plus fixed level dimensions for one game."""

    game: Game
    alphabet: TileAlphabet
    height: int
    width: int

    @property
    def tile_count(self) -> int:
        return self.alphabet.count

    def tile(self, name: str) -> int:
        return self.alphabet.index(name)


def make_game_spec(game: Game | str, height: int | None = None, width: int | None = None) -> GameSpec:
    """Build the spec for a game, with optional non-default dimensions."""
    game = Game(game)
    dh, dw = _DEFAULT_DIMS[game]
    h = dh if height is None else int(height)
    w = dw if width is None else int(width)
    if h <= 0 or w <= 0:
        raise ValueError(f"level dimensions must be positive, got {h}x{w}")
    return GameSpec(game, _ALPHABETS[game], h, w)


class Level:
    """A rectangular grid of tile indices, immutable after construction."""

    __slots__ = ("cells",)

    def __init__(self, cells: np.ndarray):
        cells = np.ascontiguousarray(cells, dtype=np.int8)
        if cells.ndim != 2:
            raise ValueError(f"level cells must be 2D, got shape {cells.shape}")
        cells.setflags(write=False)
        self.cells = cells

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def key(self) -> bytes:
        """Content key usable for hashing/deduplication."""
        return self.cells.tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Level):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(np.array_equal(self.cells, other.cells))

    def __hash__(self) -> int:
        return hash((self.cells.shape, self.key()))

    def __repr__(self) -> str:
        return f"Level({self.height}x{self.width})"


@dataclass
class NcaState:
    """One-hot tile planes plus optional continuous auxiliary planes.

    `onehot` has shape (n, h, w) with exactly one 1 per cell; `aux` has shape
    (a, h, w) with values in [0, 1] (a may be 0).
    """

    onehot: np.ndarray
    aux: np.ndarray

    def __post_init__(self):
        if self.onehot.ndim != 3 or self.aux.ndim != 3:
            raise ValueError("onehot and aux must be 3D (channels, h, w)")
        if self.onehot.shape[1:] != self.aux.shape[1:]:
            raise ValueError("onehot and aux spatial dims differ")

    @property
    def tile_count(self) -> int:
        return self.onehot.shape[0]

    @property
    def aux_channels(self) -> int:
        return self.aux.shape[0]


@dataclass(frozen=True)
class LatentSeed:
    """Reproducible generator input: a random level seed or a Gaussian vector seed."""

    kind: SeedKind
    rng_seed: int
    latent_dim: int = 16

    def level(self, spec: GameSpec) -> Level:
        if self.kind is not SeedKind.RANDOM_LEVEL:
            raise ValueError(f"seed kind {self.kind} has no level payload")
        return sample_random_level(spec, self.rng_seed)

    def vector(self) -> np.ndarray:
        if self.kind is not SeedKind.GAUSSIAN_VECTOR:
            raise ValueError(f"seed kind {self.kind} has no vector payload")
        rng = np.random.default_rng(self.rng_seed)
        return rng.standard_normal(self.latent_dim)


def sample_random_level(spec: GameSpec, rng_seed: int) -> Level:
    """Draw a level with every cell i.i.d. uniform over the tile alphabet."""
    rng = np.random.default_rng(rng_seed)
    cells = rng.integers(0, spec.tile_count, size=(spec.height, spec.width), dtype=np.int8)
    return Level(cells)


def encode_onehot(level: Level, tile_count: int, aux_channels: int = 0) -> NcaState:
    """One-hot encode a level; auxiliary planes start at zero."""
    if aux_channels not in (0, 3):
        raise ValueError(f"aux_channels must be 0 or 3, got {aux_channels}")
    h, w = level.cells.shape
    onehot = np.zeros((tile_count, h, w), dtype=np.int8)
    ys, xs = np.indices((h, w))
    onehot[level.cells, ys, xs] = 1
    aux = np.zeros((aux_channels, h, w), dtype=np.float32)
    return NcaState(onehot=onehot, aux=aux)


def decode_argmax(raw: np.ndarray) -> Level:
    """Channel-wise argmax; ties go to the lowest channel index."""
    if raw.ndim != 3:
        raise ValueError(f"raw array must be (channels, h, w), got shape {raw.shape}")
    return Level(np.argmax(raw, axis=0).astype(np.int8))


def to_text(level: Level, alphabet: TileAlphabet) -> str:
    """Render a level as one row per line using the game's tile characters."""
    chars = np.array(alphabet.chars)
    return "\n".join("".join(row) for row in chars[level.cells]) + "\n"


def from_text(text: str, alphabet: TileAlphabet) -> Level:
    """Parse the text format produced by `to_text`."""
    lookup = {c: i for i, c in enumerate(alphabet.chars)}
    rows = [line for line in text.splitlines() if line]
    if not rows:
        raise ValueError("empty level text")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("ragged level text")
    try:
        cells = np.array([[lookup[c] for c in row] for row in rows], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"unknown tile character {exc.args[0]!r}") from None
    return Level(cells)
