"""Improvement emitter: CMA-ES adaptation driven by archive insertions."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from ..objective import BatchStats
from .archive import Archive, InsertResult, InsertStatus
from .cmaes import CmaEs, CmaNumericalError

logger = logging.getLogger(__name__)

RESTART_AFTER = 50  # consecutive generations without any archive improvement


class ImprovementEmitter:
    """One self-adapting sampler whose selection pressure is archive improvement.

    Candidates that discover a new cell rank above candidates that improve an
    occupied cell (new cells tie-broken by objective, improvements ranked by
    the objective gain); rejected candidates rank last by objective. After
    `restart_after` generations without a single insertion, or on numerical
    failure, the emitter resets around a uniformly random elite.
    """

    def __init__(
        self,
        initial_mean: np.ndarray,
        sigma0: float,
        rng: np.random.Generator,
        popsize: int | None = None,
        restart_after: int = RESTART_AFTER,
        params_of: Callable = np.asarray,
    ):
        self.initial_mean = np.array(initial_mean, dtype=np.float64).ravel()
        self.sigma0 = float(sigma0)
        self.rng = rng
        self.popsize = popsize
        self.restart_after = restart_after
        self.params_of = params_of
        self.no_improvement = 0
        self.restarts = 0
        self.es = CmaEs(self.initial_mean, self.sigma0, self.rng, popsize)

    @property
    def population(self) -> int:
        return self.es.population

    def ask(self) -> np.ndarray:
        return self.es.ask()

    def tell(
        self,
        archive: Archive,
        genomes: Sequence,
        stats_list: Sequence[BatchStats | None],
        iteration: int = 0,
    ) -> list[InsertResult]:
        """Insert evaluated candidates, then adapt from the improvement ranking."""
        if len(genomes) != self.es.population or len(stats_list) != self.es.population:
            raise ValueError("tell requires exactly one result per asked candidate")
        results = []
        for genome, stats in zip(genomes, stats_list):
            if stats is None:
                logger.warning("candidate evaluation failed; treating as rejected")
                results.append(InsertResult(InsertStatus.REJECTED))
            else:
                results.append(archive.insert(genome, stats, iteration))

        order = self._improvement_order(results, stats_list)
        improved = any(r.status is not InsertStatus.REJECTED for r in results)
        self.no_improvement = 0 if improved else self.no_improvement + 1
        try:
            self.es.tell_ranked(order)
        except CmaNumericalError as exc:
            logger.warning("emitter restart after numerical failure: %s", exc)
            self._restart(archive)
            return results
        if self.no_improvement >= self.restart_after:
            logger.info("emitter restart after %d stagnant generations", self.no_improvement)
            self._restart(archive)
        return results

    @staticmethod
    def _improvement_order(results: Sequence[InsertResult], stats_list) -> np.ndarray:
        def sort_key(i: int):
            res = results[i]
            obj = stats_list[i].objective if stats_list[i] is not None else float("-inf")
            if res.status is InsertStatus.NEW_CELL:
                return (0, -obj)
            if res.status is InsertStatus.IMPROVED:
                return (1, -res.delta)
            return (2, -obj)

        return np.array(sorted(range(len(results)), key=sort_key), dtype=np.int64)

    def _restart(self, archive: Archive) -> None:
        self.restarts += 1
        self.no_improvement = 0
        if len(archive):
            mean = np.array(self.params_of(archive.random_elite(self.rng).genome), dtype=np.float64)
        else:
            mean = self.initial_mean
        self.es = CmaEs(mean, self.sigma0, self.rng, self.popsize)
