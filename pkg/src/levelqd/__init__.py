"""levelqd: quality-diversity training of tile-level generators.

Archives of small neural cellular automata (and comparison generator
architectures) are evolved with CMA-ES-based improvement emitters so that
their output levels satisfy per-game validity constraints while spanning
chosen measure dimensions (symmetry, path length, emptiness, solution
length).
"""

__version__ = "0.1.0"

from .grid import Game, GameSpec, LatentSeed, Level, make_game_spec
from .nets import ArchitectureDescriptor, ArchitectureKind, GeneratorGenome, make_descriptor
from .objective import BatchStats
from .qd import Archive, ImprovementEmitter, Scheduler
from .trainer import RunConfig, RunReport, evaluate_archive, evaluate_genome, resume, summarize_trials, train

__all__ = [
    "__version__",
    "Game",
    "GameSpec",
    "LatentSeed",
    "Level",
    "make_game_spec",
    "ArchitectureDescriptor",
    "ArchitectureKind",
    "GeneratorGenome",
    "make_descriptor",
    "BatchStats",
    "Archive",
    "ImprovementEmitter",
    "Scheduler",
    "RunConfig",
    "RunReport",
    "evaluate_archive",
    "evaluate_genome",
    "resume",
    "summarize_trials",
    "train",
]
