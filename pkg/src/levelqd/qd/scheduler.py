"""Round-robin ask/evaluate/tell loop over a set of emitters."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

from .archive import Archive, InsertStatus
from .emitter import ImprovementEmitter

logger = logging.getLogger(__name__)


@dataclass
class IterationReport:
    iteration: int
    evaluations: int
    archive_size: int
    qd_score: float
    best_objective: float
    new_cells: int
    improvements: int


class Scheduler:
    """Drives emitters against a shared archive.

    Evaluation is the only parallel section: the evaluator receives a full
    candidate batch and returns one stats record (or None on failure) per
    candidate; all archive writes happen here, serially, in candidate order.
    """

    def __init__(
        self,
        emitters: Sequence[ImprovementEmitter],
        archive: Archive,
        evaluator: Callable,
        objective_floor: float = 0.0,
        start_iteration: int = 0,
        start_evaluations: int = 0,
    ):
        if not emitters:
            raise ValueError("at least one emitter is required")
        self.emitters = list(emitters)
        self.archive = archive
        self.evaluator = evaluator
        self.objective_floor = objective_floor
        self.iteration = start_iteration
        self.evaluations = start_evaluations

    def step(self) -> IterationReport:
        """One scheduler iteration: every emitter asks, evaluates and tells."""
        self.iteration += 1
        new_cells = 0
        improvements = 0
        for emitter in self.emitters:
            candidates = emitter.ask()
            try:
                stats_list = list(self.evaluator(candidates))
                if len(stats_list) != len(candidates):
                    raise RuntimeError("evaluator returned a mismatched result count")
            except Exception:
                logger.exception("evaluator failed for a whole batch; rejecting it")
                stats_list = [None] * len(candidates)
            self.evaluations += len(candidates)
            results = emitter.tell(self.archive, list(candidates), stats_list, self.iteration)
            new_cells += sum(r.status is InsertStatus.NEW_CELL for r in results)
            improvements += sum(r.status is InsertStatus.IMPROVED for r in results)
        qd = sum(e.stats.objective - self.objective_floor for e in self.archive.cells.values())
        return IterationReport(
            iteration=self.iteration,
            evaluations=self.evaluations,
            archive_size=len(self.archive),
            qd_score=float(qd),
            best_objective=self.archive.best_objective(),
            new_cells=new_cells,
            improvements=improvements,
        )
