"""Quality-diversity optimizer: archive, CMA-ES core, improvement emitters."""

from .archive import Archive, Elite, InsertResult, InsertStatus
from .cmaes import CmaEs, CmaesParams, CmaNumericalError, default_population, rank_by_objective
from .emitter import ImprovementEmitter
from .scheduler import IterationReport, Scheduler

__all__ = [
    "Archive",
    "Elite",
    "InsertResult",
    "InsertStatus",
    "CmaEs",
    "CmaesParams",
    "CmaNumericalError",
    "default_population",
    "rank_by_objective",
    "ImprovementEmitter",
    "IterationReport",
    "Scheduler",
]
