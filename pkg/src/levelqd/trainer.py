"""Experiment driver: run configuration, training loop, held-out evaluation.

A run is fully determined by its master seed. Independent random streams are
derived from (seed, domain[, index]) tuples: training latents, evaluation
latents, and one stream per emitter. In fixed-latent mode one seed batch is
drawn at start and reused for every evaluation; in resample mode a fresh
batch is drawn per scheduler iteration.

Run directory layout:

    config.toml            effective configuration (round-trips)
    stats.csv              one row per scheduler iteration
    evals.csv              one row per genome evaluation (optional)
    snapshots/NNNNNN.archive
    report.json            final RunReport

Snapshots contain the archive only (header plus one record per occupied
cell, with the genome parameter block base64-encoded as little-endian
float32). Resuming reloads the archive and restarts every emitter from a
random elite; the resumed trajectory is therefore valid but not bit-identical
to an uninterrupted run (the emitter state and rng streams are reseeded at
the resume boundary).
"""

from __future__ import annotations

import base64
import csv
import json
import logging
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import nets, objective
from .grid import GameSpec, LatentSeed, make_game_spec
from .nets import ArchitectureDescriptor, ArchitectureKind, GeneratorGenome, make_descriptor
from .objective import BatchStats
from .qd import Archive, ImprovementEmitter, Scheduler

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = "LEVELQD-ARCHIVE 1"

# rng stream domains (second entry of the SeedSequence entropy tuple)
_DOM_TRAIN_LATENTS = 1
_DOM_EVAL_LATENTS = 2
_DOM_EMITTER = 3

STATS_COLUMNS = ("iteration", "evaluations", "archive_size", "qd_score", "best_objective", "mean_diversity")
EVAL_COLUMNS = (
    "iteration",
    "emitter",
    "candidate",
    "objective",
    "validity",
    "reliability",
    "diversity",
    "m0_mean",
    "m0_std",
    "m1_mean",
    "m1_std",
)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass
class RunConfig:
    game: str = "maze"
    architecture: str = "nca"
    batch_size: int = 10
    latent_mode: str = "fixed"
    episode_steps: int = 50
    iterations: int = 1000
    seed: int = 42
    eval_seed_count: int = 20
    output_dir: str = "run-out"
    emitters: int = 5
    sigma0: float = 0.2
    population: int = 0  # 0 = CMA-ES default 4 + floor(3 ln n)
    archive_dims: tuple[int, int] = (100, 100)
    measure_bounds: tuple[float, ...] = ()  # empty = game defaults, else (lo0, hi0, lo1, hi1)
    level_height: int = 0  # 0 = game default
    level_width: int = 0
    sokoban_budget: int = 200_000
    workers: int = 1
    snapshot_every: int = 1000
    log_evaluations: bool = True

    def validate(self) -> None:
        if self.game not in ("maze", "zelda", "sokoban"):
            raise ConfigError("game", f"unknown game {self.game!r}")
        try:
            ArchitectureKind(self.architecture)
        except ValueError:
            raise ConfigError("architecture", f"unknown architecture {self.architecture!r}") from None
        if self.batch_size not in (10, 20):
            raise ConfigError("batch_size", "must be 10 or 20")
        if self.latent_mode not in ("fixed", "resample"):
            raise ConfigError("latent_mode", "must be 'fixed' or 'resample'")
        if self.episode_steps not in (50, 100):
            raise ConfigError("episode_steps", "must be 50 or 100")
        if self.iterations < 0:
            raise ConfigError("iterations", "must be >= 0")
        if self.eval_seed_count < 1:
            raise ConfigError("eval_seed_count", "must be >= 1")
        if self.emitters < 1:
            raise ConfigError("emitters", "must be >= 1")
        if not self.sigma0 > 0:
            raise ConfigError("sigma0", "must be > 0")
        if self.population < 0 or self.population == 1:
            raise ConfigError("population", "must be 0 (auto) or >= 2")
        if len(self.archive_dims) != 2 or any(d < 1 for d in self.archive_dims):
            raise ConfigError("archive_dims", "must be two positive integers")
        if self.measure_bounds and len(self.measure_bounds) != 4:
            raise ConfigError("measure_bounds", "must be empty or (lo0, hi0, lo1, hi1)")
        if self.measure_bounds and (
            self.measure_bounds[1] <= self.measure_bounds[0] or self.measure_bounds[3] <= self.measure_bounds[2]
        ):
            raise ConfigError("measure_bounds", "each hi must exceed its lo")
        if self.level_height < 0 or self.level_width < 0:
            raise ConfigError("level_height", "level dims must be >= 0 (0 = default)")
        if self.sokoban_budget < 1:
            raise ConfigError("sokoban_budget", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every", "must be >= 1")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(unknown[0], "unknown config key")
        kwargs = {}
        for name, value in data.items():
            if name in ("archive_dims", "measure_bounds"):
                kwargs[name] = tuple(value)
            else:
                kwargs[name] = value
        return cls(**kwargs)

    def apply_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        """Apply key=value string overrides with per-field type coercion."""
        known = {f.name: f for f in fields(self)}
        updates = {}
        for key, raw in overrides.items():
            if key not in known:
                raise ConfigError(key, "unknown config key")
            current = getattr(self, key)
            if key == "log_evaluations" or isinstance(current, bool):
                if raw.lower() not in ("true", "false", "0", "1"):
                    raise ConfigError(key, f"expected a boolean, got {raw!r}")
                updates[key] = raw.lower() in ("true", "1")
            elif isinstance(current, int):
                updates[key] = int(raw)
            elif isinstance(current, float):
                updates[key] = float(raw)
            elif isinstance(current, tuple):
                parts = [p for p in raw.replace(",", " ").split() if p]
                updates[key] = tuple(int(p) if key == "archive_dims" else float(p) for p in parts)
            else:
                updates[key] = raw
        return replace(self, **updates)

    def to_toml(self) -> str:
        lines = ["# levelqd run configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_toml_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        return cls.from_dict(tomllib.loads(text))

    @classmethod
    def from_toml_file(cls, path) -> "RunConfig":
        return cls.from_toml(Path(path).read_text())


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(repr(v) for v in value) + "]"
    return json.dumps(value)


def default_measure_bounds(spec: GameSpec) -> tuple[tuple[float, float], tuple[float, float]]:
    hw = spec.height * spec.width
    if spec.game.value == "maze":
        hi = math.ceil(hw / 2) + max(spec.height, spec.width)
    elif spec.game.value == "zelda":
        hi = hw
    else:
        hi = 200
    return ((0.0, 1.0), (0.0, float(hi)))


def build_spec(config: RunConfig) -> GameSpec:
    return make_game_spec(config.game, config.level_height or None, config.level_width or None)


def build_descriptor(config: RunConfig, spec: GameSpec) -> ArchitectureDescriptor:
    return make_descriptor(config.architecture, spec.tile_count, spec.height, spec.width)


def _stream(seed: int, domain: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, domain) + extra))


def draw_seed_batch(stream: np.random.Generator, count: int, kind) -> list[LatentSeed]:
    return [LatentSeed(kind, int(s)) for s in stream.integers(0, 2**63, size=count)]


def evaluate_genome(
    genome: GeneratorGenome,
    seeds: Sequence[LatentSeed],
    spec: GameSpec,
    episode_steps: int,
    node_budget: int = 200_000,
) -> BatchStats:
    """Generate one level per seed and score the batch. Pure in its arguments."""
    levels = nets.generate_levels(genome, seeds, episode_steps)
    return objective.assemble_batch_stats(levels, spec, node_budget)


def _evaluate_task(args) -> BatchStats:
    descriptor, spec, steps, budget, params, seeds = args
    return evaluate_genome(GeneratorGenome(descriptor, params), seeds, spec, steps, budget)


class GenomeEvaluator:
    """Maps candidate parameter vectors to BatchStats, optionally in parallel.

    Results are returned in candidate order regardless of worker count; each
    genome is evaluated independently, so parallelism cannot change values.
    Per-candidate failures become None entries (the emitter rejects them).
    """

    def __init__(
        self,
        descriptor: ArchitectureDescriptor,
        spec: GameSpec,
        episode_steps: int,
        node_budget: int,
        workers: int = 1,
    ):
        self.descriptor = descriptor
        self.spec = spec
        self.episode_steps = episode_steps
        self.node_budget = node_budget
        self.workers = workers
        self.seeds: list[LatentSeed] = []
        self._pool = None
        self.iteration = 0
        self._emitter_counter = 0
        self.log_writer = None

    def set_iteration(self, iteration: int) -> None:
        self.iteration = iteration
        self._emitter_counter = 0

    def close(self) -> None:
        if self._pool is not None:
            self._pool.terminate()
            self._pool = None

    def _tasks(self, candidates) -> list[tuple]:
        return [
            (self.descriptor, self.spec, self.episode_steps, self.node_budget, np.asarray(c, dtype=np.float64), tuple(self.seeds))
            for c in candidates
        ]

    def __call__(self, candidates) -> list[BatchStats | None]:
        if not self.seeds:
            raise RuntimeError("evaluator has no latent seeds set")
        if self.workers > 1:
            if self._pool is None:
                self._pool = multiprocessing.Pool(self.workers)
            results = self._pool.map(_evaluate_task, self._tasks(candidates))
        else:
            results = []
            for task in self._tasks(candidates):
                try:
                    results.append(_evaluate_task(task))
                except Exception:
                    logger.exception("genome evaluation failed")
                    results.append(None)
        if self.log_writer is not None:
            for i, stats in enumerate(results):
                if stats is not None:
                    self.log_writer.writerow(
                        [self.iteration, self._emitter_counter, i]
                        + [repr(x) for x in (stats.objective, stats.validity, stats.reliability, stats.diversity)]
                        + [repr(float(v)) for pair in zip(stats.measure_means, stats.measure_stds) for v in pair]
                    )
        self._emitter_counter += 1
        return results


@dataclass
class RunReport:
    config: dict
    series: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    evaluation: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "series": self.series, "training": self.training, "evaluation": self.evaluation},
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        return cls(data["config"], data["series"], data["training"], data["evaluation"])


def save_archive(
    path,
    archive: Archive,
    descriptor: ArchitectureDescriptor,
    spec: GameSpec,
    iteration: int,
    evaluations: int,
) -> None:
    header = {
        "game": spec.game.value,
        "height": spec.height,
        "width": spec.width,
        "architecture": {
            "kind": descriptor.kind.value,
            "tile_count": descriptor.tile_count,
            "height": descriptor.height,
            "width": descriptor.width,
            "hidden_channels": descriptor.hidden_channels,
            "aux_channels": descriptor.aux_channels,
            "latent_dim": descriptor.latent_dim,
        },
        "dims": list(archive.dims),
        "bounds": [list(b) for b in archive.bounds],
        "iteration": iteration,
        "evaluations": evaluations,
        "size": len(archive),
    }
    lines = [ARCHIVE_MAGIC, json.dumps(header, sort_keys=True)]
    for cell, elite in archive.items():
        stats = elite.stats
        record = {
            "cell": list(cell),
            "objective": stats.objective,
            "validity": stats.validity,
            "reliability": stats.reliability,
            "diversity": stats.diversity,
            "measures": [float(v) for v in stats.measure_means],
            "measure_stds": [float(v) for v in stats.measure_stds],
            "batch_size": stats.batch_size,
            "inserted_at": elite.inserted_at,
            "params": base64.b64encode(np.asarray(elite.genome, dtype="<f4").tobytes()).decode(),
        }
        lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_archive(path) -> tuple[Archive, ArchitectureDescriptor, GameSpec, dict]:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != ARCHIVE_MAGIC:
        raise ValueError(f"{path}: not an archive snapshot (bad magic)")
    header = json.loads(text[1])
    arch = header["architecture"]
    descriptor = ArchitectureDescriptor(
        kind=ArchitectureKind(arch["kind"]),
        tile_count=arch["tile_count"],
        height=arch["height"],
        width=arch["width"],
        hidden_channels=arch["hidden_channels"],
        aux_channels=arch["aux_channels"],
        latent_dim=arch["latent_dim"],
    )
    spec = make_game_spec(header["game"], header["height"], header["width"])
    archive = Archive(header["dims"], header["bounds"])
    for line in text[2:]:
        if not line.strip():
            continue
        rec = json.loads(line)
        params = np.frombuffer(base64.b64decode(rec["params"]), dtype="<f4").astype(np.float64)
        means = np.asarray(rec["measures"], dtype=float)
        stats = BatchStats(
            batch_size=rec["batch_size"],
            validity=rec["validity"],
            reliability=rec["reliability"],
            diversity=rec["diversity"],
            objective=rec["objective"],
            measure_means=means,
            measure_stds=np.asarray(rec["measure_stds"], dtype=float),
        )
        result = archive.insert(params, stats, rec["inserted_at"])
        if result.cell != tuple(rec["cell"]):
            raise ValueError(f"{path}: record landed in cell {result.cell}, expected {tuple(rec['cell'])}")
    return archive, descriptor, spec, header


def latest_snapshot(run_dir) -> Path | None:
    snap_dir = Path(run_dir) / "snapshots"
    if not snap_dir.is_dir():
        return None
    snaps = sorted(snap_dir.glob("*.archive"))
    return snaps[-1] if snaps else None


def _make_emitters(config: RunConfig, descriptor: ArchitectureDescriptor, start_iteration: int = 0):
    dim = descriptor.total_params
    popsize = config.population or None
    emitters = []
    for k in range(config.emitters):
        rng = _stream(config.seed, _DOM_EMITTER, k, start_iteration)
        emitters.append(
            ImprovementEmitter(np.zeros(dim), config.sigma0, rng, popsize, params_of=np.asarray)
        )
    return emitters


def train(config: RunConfig, progress=None) -> RunReport:
    """Run a full experiment; see the module docstring for the output layout."""
    return _run(config, resume_from=None, progress=progress)


def resume(run_dir, progress=None) -> RunReport:
    """Continue an interrupted run from its latest snapshot."""
    run_dir = Path(run_dir)
    config = RunConfig.from_toml_file(run_dir / "config.toml")
    config = replace(config, output_dir=str(run_dir))
    snap = latest_snapshot(run_dir)
    if snap is None:
        raise FileNotFoundError(f"{run_dir}: no snapshot to resume from")
    return _run(config, resume_from=snap, progress=progress)


def _run(config: RunConfig, resume_from, progress) -> RunReport:
    config.validate()
    spec = build_spec(config)
    descriptor = build_descriptor(config, spec)
    bounds = (
        (config.measure_bounds[0:2], config.measure_bounds[2:4])
        if config.measure_bounds
        else default_measure_bounds(spec)
    )
    floor = objective.objective_floor(spec)
    seed_kind = nets.seed_kind_for(descriptor.kind)

    start_iteration = 0
    start_evaluations = 0
    if resume_from is not None:
        archive, snap_desc, snap_spec, header = load_archive(resume_from)
        if snap_desc != descriptor or snap_spec != spec:
            raise ValueError("snapshot architecture/game does not match the run config")
        start_iteration = int(header["iteration"])
        start_evaluations = int(header["evaluations"])
    else:
        archive = Archive(config.archive_dims, bounds)

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "snapshots").mkdir(exist_ok=True)
    (out_dir / "config.toml").write_text(config.to_toml())

    workers = int(os.environ.get("LEVELQD_WORKERS", config.workers))
    evaluator = GenomeEvaluator(descriptor, spec, config.episode_steps, config.sokoban_budget, workers)
    emitters = _make_emitters(config, descriptor, start_iteration)
    if resume_from is not None and len(archive):
        for em in emitters:
            em._restart(archive)
            em.restarts = 0
    scheduler = Scheduler(emitters, archive, evaluator, floor, start_iteration, start_evaluations)

    train_stream = _stream(config.seed, _DOM_TRAIN_LATENTS)
    if config.latent_mode == "fixed":
        evaluator.seeds = draw_seed_batch(train_stream, config.batch_size, seed_kind)

    series: dict[str, list] = {name: [] for name in STATS_COLUMNS}
    mode = "a" if resume_from is not None else "w"
    stats_fh = open(out_dir / "stats.csv", mode, newline="")
    stats_writer = csv.writer(stats_fh)
    evals_fh = None
    if config.log_evaluations:
        evals_fh = open(out_dir / "evals.csv", mode, newline="")
        evaluator.log_writer = csv.writer(evals_fh)
    if mode == "w":
        stats_writer.writerow(STATS_COLUMNS)
        if evaluator.log_writer is not None:
            evaluator.log_writer.writerow(EVAL_COLUMNS)

    started = time.perf_counter()
    interrupted = False
    try:
        for i in range(start_iteration + 1, config.iterations + 1):
            if config.latent_mode == "resample":
                evaluator.seeds = draw_seed_batch(train_stream, config.batch_size, seed_kind)
            evaluator.set_iteration(i)
            report = scheduler.step()
            row = (
                report.iteration,
                report.evaluations,
                report.archive_size,
                report.qd_score,
                report.best_objective if report.archive_size else 0.0,
                archive.mean_diversity(),
            )
            for name, value in zip(STATS_COLUMNS, row):
                series[name].append(value)
            stats_writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
            if progress is not None:
                progress(report)
            if i % config.snapshot_every == 0 and i < config.iterations:
                stats_fh.flush()
                save_archive(
                    out_dir / "snapshots" / f"{i:06d}.archive", archive, descriptor, spec, i, report.evaluations
                )
    except KeyboardInterrupt:
        interrupted = True
        raise
    finally:
        stats_fh.close()
        if evals_fh is not None:
            evals_fh.close()
        evaluator.close()
        final_iter = scheduler.iteration
        save_archive(
            out_dir / "snapshots" / f"{final_iter:06d}.archive",
            archive,
            descriptor,
            spec,
            final_iter,
            scheduler.evaluations,
        )
        if interrupted:
            logger.warning("run interrupted; snapshot flushed at iteration %d", final_iter)

    wall = time.perf_counter() - started
    training_stats = {
        "archive_size": len(archive),
        "qd_score": objective.qd_score(archive, spec),
        "mean_diversity": archive.mean_diversity(),
        "best_objective": archive.best_objective() if len(archive) else 0.0,
        "evaluations": scheduler.evaluations,
        "wall_seconds": wall,
    }

    eval_stream = _stream(config.seed, _DOM_EVAL_LATENTS)
    eval_seeds = draw_seed_batch(eval_stream, config.eval_seed_count, seed_kind)
    _, eval_stats = evaluate_archive(
        archive, descriptor, spec, eval_seeds, config.episode_steps, config.sokoban_budget, workers
    )

    report = RunReport(config=config.to_dict(), series=series, training=training_stats, evaluation=eval_stats)
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    return report


def evaluate_archive(
    archive: Archive,
    descriptor: ArchitectureDescriptor,
    spec: GameSpec,
    eval_seeds: Sequence[LatentSeed],
    episode_steps: int,
    node_budget: int = 200_000,
    workers: int = 1,
) -> tuple[Archive, dict]:
    """Re-evaluate every elite on held-out seeds and re-insert into a fresh archive.

    Elites whose measures shift under new seeds may collide in the same cell;
    the higher objective wins, so the fresh archive can only be smaller.
    """
    fresh = Archive(archive.dims, archive.bounds)
    evaluator = GenomeEvaluator(descriptor, spec, episode_steps, node_budget, workers)
    evaluator.seeds = list(eval_seeds)
    elites = list(archive.elites())
    for batch_start in range(0, len(elites), 64):
        batch = elites[batch_start : batch_start + 64]
        results = evaluator([np.asarray(e.genome, dtype=np.float64) for e in batch])
        for elite, stats in zip(batch, results):
            if stats is not None:
                fresh.insert(elite.genome, stats, elite.inserted_at)
    evaluator.close()
    stats = {
        "archive_size": len(fresh),
        "qd_score": objective.qd_score(fresh, spec),
        "mean_diversity": fresh.mean_diversity(),
        "best_objective": fresh.best_objective() if len(fresh) else 0.0,
    }
    return fresh, stats


def summarize_trials(reports: Sequence[RunReport]) -> dict:
    """Mean and population std of the headline metrics across repeated trials."""
    if not reports:
        raise ValueError("at least one report is required")
    metrics = ("archive_size", "qd_score", "mean_diversity")
    out: dict = {"trials": len(reports)}
    for phase in ("training", "evaluation"):
        out[phase] = {}
        for metric in metrics:
            values = np.array([getattr(r, phase)[metric] for r in reports], dtype=float)
            out[phase][metric] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


def format_trial_table(summary: dict) -> str:
    """Render the summary in the training/evaluation x metric layout."""
    headers = ("archive size", "QD score", "generator diversity")
    keys = ("archive_size", "qd_score", "mean_diversity")
    lines = [f"{'':12s}" + "".join(f"{h:>24s}" for h in headers)]
    for phase in ("training", "evaluation"):
        cells = []
        for key in keys:
            m = summary[phase][key]
            cells.append(f"{m['mean']:,.1f} +/- {m['std']:,.1f}")
        lines.append(f"{phase:12s}" + "".join(f"{c:>24s}" for c in cells))
    return "\n".join(lines)
