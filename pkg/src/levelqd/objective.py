"""Scoring of generator output batches: validity, reliability, diversity, objective.

A generator is evaluated on a batch of levels. Per-level validity penalties
(non-positive; 0 means fully valid) are averaged into `v`; the negated mean
per-measure standard deviation gives reliability `r`; the normalized mean
pairwise Hamming distance gives diversity `d`; the scalar objective is

    o = v + max(0, r + 10 * d)

so unreliability can cancel the diversity bonus but never contaminates the
validity term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import analysis
from .grid import EMPTY, Game, GameSpec, Level

DIVERSITY_WEIGHT = 10.0

MEASURE_NAMES = {
    Game.MAZE: ("symmetry", "path_length"),
    Game.ZELDA: ("symmetry", "path_length"),
    Game.SOKOBAN: ("emptiness", "solution_length"),
}


@dataclass
class BatchStats:
    """Evaluation record for one generator on one batch of levels."""

    batch_size: int
    validity: float
    reliability: float
    diversity: float
    objective: float
    per_level_validity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    measure_values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    measure_means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    measure_stds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_objective(cls, objective: float, measures) -> "BatchStats":
        """Minimal stats for synthetic problems (tests, toy benchmarks)."""
        means = np.asarray(measures, dtype=float)
        return cls(
            batch_size=1,
            validity=0.0,
            reliability=0.0,
            diversity=0.0,
            objective=float(objective),
            measure_means=means,
            measure_stds=np.zeros_like(means),
        )


@dataclass(frozen=True)
class ValidityRule:
    name: str
    weight: float = 1.0


def validity_rules(spec: GameSpec) -> tuple[ValidityRule, ...]:
    """The per-game soft-constraint rules, in evaluation order."""
    if spec.game is Game.MAZE:
        names = ("empty_regions",)
    elif spec.game is Game.ZELDA:
        names = ("open_regions", "player_count", "key_count", "door_count", "enemy_range", "enemy_distance")
    else:
        names = ("open_regions", "player_count", "crate_target_balance", "crate_presence", "solvable")
    return tuple(ValidityRule(n) for n in names)


def _region_penalty(level: Level, traversable) -> float:
    regions = analysis.connected_regions(level, traversable)
    return -float(abs(regions - 1))


def _maze_record(level: Level) -> tuple[float, tuple[float, float]]:
    regions, diam = analysis.grid_graph_summary(level, (EMPTY,))
    return -float(abs(regions - 1)), (analysis.symmetry(level), float(diam))


def _zelda_record(level: Level) -> tuple[float, tuple[float, float]]:
    cells = level.cells
    non_wall = tuple(t for t in range(6) if t != 1)
    v = _region_penalty(level, non_wall)
    players = int((cells == 2).sum())
    keys = int((cells == 3).sum())
    doors = int((cells == 4).sum())
    enemies = int((cells == 5).sum())
    v -= abs(players - 1) + abs(keys - 1) + abs(doors - 1)
    v -= max(0, 2 - enemies) + max(0, enemies - 5)
    dist = analysis.nearest_enemy_distance(level)
    if dist is not None and math.isfinite(dist):
        v -= max(0.0, 4.0 - dist)
    path = analysis.zelda_path_length(level)
    measure_path = 0.0 if path is None or not math.isfinite(path) else float(path)
    return v, (analysis.symmetry(level), measure_path)


def _sokoban_record(level: Level, node_budget: int) -> tuple[float, tuple[float, float]]:
    cells = level.cells
    v = _region_penalty(level, (0, 2, 3, 4))
    players = int((cells == 2).sum())
    crates = int((cells == 3).sum())
    targets = int((cells == 4).sum())
    v -= abs(players - 1) + abs(crates - targets) + max(0, 1 - crates)
    length = 0.0
    solution = analysis.solve_sokoban(level, node_budget)
    if solution is not None:
        if solution.solved:
            length = float(solution.length)
        else:
            v -= 1.0
    return v, (analysis.emptiness(level), length)


@lru_cache(maxsize=1 << 17)
def _cached_record(game: Game, h: int, w: int, node_budget: int, key: bytes) -> tuple[float, tuple[float, float]]:
    level = Level(np.frombuffer(key, dtype=np.int8).reshape(h, w))
    if game is Game.MAZE:
        return _maze_record(level)
    if game is Game.ZELDA:
        return _zelda_record(level)
    return _sokoban_record(level, node_budget)


def level_record(level: Level, spec: GameSpec, node_budget: int = 200_000) -> tuple[float, tuple[float, float]]:
    """(validity penalty, measure tuple) for one level; memoized on content."""
    return _cached_record(spec.game, level.height, level.width, node_budget, level.key())


def validity_penalty(level: Level, spec: GameSpec, node_budget: int = 200_000) -> float:
    """Non-positive penalty; exactly 0 for a level meeting every game rule."""
    return level_record(level, spec, node_budget)[0]


def measures(levels, spec: GameSpec, node_budget: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Measure means and the (num_measures, batch) value matrix for a batch."""
    values = np.array(
        [level_record(lv, spec, node_budget)[1] for lv in levels], dtype=float
    ).T
    return values.mean(axis=1), values


def diversity(levels) -> float:
    """Mean pairwise per-tile Hamming distance, including self-pairs,
    normalized by (h * w * batch**2 - 1)."""
    cells = _as_cell_array(levels)
    b, h, w = cells.shape
    denom = h * w * b * b - 1
    if denom <= 0:
        return 0.0
    flat = cells.reshape(b, -1)
    total = int((flat[:, None, :] != flat[None, :, :]).sum())
    return total / denom


def combine(validity: float, reliability: float, diversity_value: float) -> float:
    return validity + max(0.0, reliability + DIVERSITY_WEIGHT * diversity_value)


def objective(stats: BatchStats) -> float:
    return combine(stats.validity, stats.reliability, stats.diversity)


def _as_cell_array(levels) -> np.ndarray:
    if isinstance(levels, np.ndarray):
        return levels
    return np.stack([lv.cells for lv in levels])


def assemble_batch_stats(levels, spec: GameSpec, node_budget: int = 200_000) -> BatchStats:
    """Full evaluation of a batch: per-level records, aggregates, objective."""
    cells = _as_cell_array(levels)
    level_objs = [Level(c) for c in cells]
    records = [level_record(lv, spec, node_budget) for lv in level_objs]
    per_validity = np.array([rec[0] for rec in records], dtype=float)
    values = np.array([rec[1] for rec in records], dtype=float).T
    means = values.mean(axis=1)
    stds = values.std(axis=1)  # population convention
    v = float(per_validity.mean())
    r = -float(stds.mean())
    d = diversity(cells)
    return BatchStats(
        batch_size=len(level_objs),
        validity=v,
        reliability=r,
        diversity=d,
        objective=combine(v, r, d),
        per_level_validity=per_validity,
        measure_values=values,
        measure_means=means,
        measure_stds=stds,
    )


def objective_floor(spec: GameSpec) -> float:
    """Documented lower bound on the objective, used to keep QD scores >= 0.

    Each game's floor is the sum of the per-rule worst cases (the rules
    cannot all be at their worst simultaneously, so this is a strict bound):

    - maze: a checkerboard maximizes empty regions at ceil(h*w/2).
    - zelda: region bound plus worst tile-count, enemy-range and
      enemy-distance penalties.
    - sokoban: region bound plus worst player/crate/target imbalances and
      the unsolved penalty.
    """
    hw = spec.height * spec.width
    region_bound = math.ceil(hw / 2) - 1
    if spec.game is Game.MAZE:
        return -float(region_bound)
    if spec.game is Game.ZELDA:
        return -float(region_bound + 3 * (hw - 1) + 2 + max(0, hw - 5) + 4)
    return -float(region_bound + (hw - 1) + hw + 1 + 1)


def qd_score(archive, spec: GameSpec) -> float:
    """Sum over occupied cells of (elite objective - objective floor)."""
    floor = objective_floor(spec)
    return float(sum(e.stats.objective - floor for e in archive.elites()))
