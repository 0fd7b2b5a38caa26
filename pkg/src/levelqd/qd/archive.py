"""Grid-tessellated elite archive (MAP-Elites style)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator

import numpy as np

from ..objective import BatchStats

logger = logging.getLogger(__name__)


class InsertStatus(Enum):
    NEW_CELL = "new_cell"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class InsertResult:
    status: InsertStatus
    delta: float = 0.0
    cell: tuple[int, ...] | None = None


@dataclass
class Elite:
    genome: Any
    stats: BatchStats
    inserted_at: int


class Archive:
    """At most one elite per cell; replacement requires strictly higher objective."""

    def __init__(self, dims, bounds):
        self.dims = tuple(int(d) for d in dims)
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(self.dims) != len(self.bounds):
            raise ValueError("dims and bounds must have the same length")
        for d, (lo, hi) in zip(self.dims, self.bounds):
            if d <= 0 or not hi > lo:
                raise ValueError(f"invalid archive axis: {d} cells over [{lo}, {hi})")
        self.cells: dict[tuple[int, ...], Elite] = {}

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def size(self) -> int:
        return len(self.cells)

    def cell_index(self, measure_values) -> tuple[int, ...]:
        idx = []
        for m, d, (lo, hi) in zip(measure_values, self.dims, self.bounds):
            i = int(math.floor((float(m) - lo) / (hi - lo) * d))
            idx.append(min(max(i, 0), d - 1))
        return tuple(idx)

    def insert(self, genome, stats: BatchStats, iteration: int = 0) -> InsertResult:
        values = np.asarray(stats.measure_means, dtype=float)
        if values.shape != (len(self.dims),) or not np.isfinite(values).all() or not math.isfinite(stats.objective):
            logger.warning("rejecting candidate with non-finite or malformed stats")
            return InsertResult(InsertStatus.REJECTED)
        cell = self.cell_index(values)
        incumbent = self.cells.get(cell)
        if incumbent is None:
            self.cells[cell] = Elite(genome, stats, iteration)
            return InsertResult(InsertStatus.NEW_CELL, delta=stats.objective, cell=cell)
        if stats.objective > incumbent.stats.objective:
            delta = stats.objective - incumbent.stats.objective
            self.cells[cell] = Elite(genome, stats, iteration)
            return InsertResult(InsertStatus.IMPROVED, delta=delta, cell=cell)
        return InsertResult(InsertStatus.REJECTED, cell=cell)

    def elites(self) -> Iterator[Elite]:
        """Elites in deterministic (sorted cell index) order."""
        for cell in sorted(self.cells):
            yield self.cells[cell]

    def items(self) -> Iterator[tuple[tuple[int, ...], Elite]]:
        for cell in sorted(self.cells):
            yield cell, self.cells[cell]

    def best_objective(self) -> float:
        if not self.cells:
            return float("-inf")
        return max(e.stats.objective for e in self.cells.values())

    def mean_diversity(self) -> float:
        if not self.cells:
            return 0.0
        return float(sum(e.stats.diversity for e in self.cells.values()) / len(self.cells))

    def random_elite(self, rng: np.random.Generator) -> Elite:
        if not self.cells:
            raise LookupError("archive is empty")
        keys = sorted(self.cells)
        return self.cells[keys[int(rng.integers(len(keys)))]]
