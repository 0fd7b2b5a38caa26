"""Command-line entry point.

Verbs: train, evaluate, inspect, render, export-heatmap, generate. All logic
lives in the library modules; this file is argument parsing, wiring and exit
codes (0 success, 1 runtime failure, 2 usage/config errors).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import nets, objective, trainer
from .grid import Level, to_text
from .objective import MEASURE_NAMES
from .render import export_heatmap, render_level_image
from .trainer import ConfigError, RunConfig

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.code = code


def _parse_overrides(pairs) -> dict[str, str]:
    overrides = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise CliError(f"override {pair!r} is not of the form key=value", EXIT_USAGE)
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _load_config(path: str, args) -> RunConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise CliError(f"config file not found: {config_path}", EXIT_USAGE)
    try:
        config = RunConfig.from_toml_file(config_path)
        overrides = _parse_overrides(args.set)
        if args.iterations is not None:
            overrides["iterations"] = str(args.iterations)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.output is not None:
            config = replace(config, output_dir=args.output)
        config = config.apply_overrides(overrides)
        config.validate()
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    return config


def _progress_printer(report):
    print(
        f"iter {report.iteration:6d}  evals {report.evaluations:8d}  "
        f"archive {report.archive_size:5d}  qd {report.qd_score:12.2f}  "
        f"best {report.best_objective:10.4f}",
        flush=True,
    )


def cmd_train(args) -> int:
    if args.resume:
        report = trainer.resume(args.resume, progress=_progress_printer if not args.quiet else None)
    else:
        if not args.config:
            raise CliError("train requires a config file (or --resume RUN_DIR)", EXIT_USAGE)
        config = _load_config(args.config, args)
        report = trainer.train(config, progress=_progress_printer if not args.quiet else None)
    print(f"run directory: {report.config['output_dir']}")
    t, e = report.training, report.evaluation
    print(f"training:   archive {t['archive_size']}  qd {t['qd_score']:.2f}  diversity {t['mean_diversity']:.4f}")
    print(f"evaluation: archive {e['archive_size']}  qd {e['qd_score']:.2f}  diversity {e['mean_diversity']:.4f}")
    return EXIT_OK


def _resolve_snapshot(path_str: str) -> Path:
    path = Path(path_str)
    if path.is_dir():
        snap = trainer.latest_snapshot(path)
        if snap is None:
            raise CliError(f"no snapshots found under {path}", EXIT_USAGE)
        return snap
    if not path.is_file():
        raise CliError(f"snapshot not found: {path}", EXIT_USAGE)
    return path


def cmd_evaluate(args) -> int:
    snap = _resolve_snapshot(args.archive)
    archive, descriptor, spec, header = trainer.load_archive(snap)
    run_dir = snap.parent.parent
    seed = args.seed
    steps, budget = 50, 200_000
    config_path = run_dir / "config.toml"
    if config_path.is_file():
        config = RunConfig.from_toml_file(config_path)
        steps, budget = config.episode_steps, config.sokoban_budget
        if seed is None:
            seed = config.seed
    if seed is None:
        seed = 0
    stream = trainer._stream(seed, trainer._DOM_EVAL_LATENTS)
    eval_seeds = trainer.draw_seed_batch(stream, args.seeds, nets.seed_kind_for(descriptor.kind))
    fresh, stats = trainer.evaluate_archive(archive, descriptor, spec, eval_seeds, steps, budget)
    print(f"snapshot: {snap} (training archive {len(archive)})")
    print(
        f"evaluation on {args.seeds} held-out seeds: archive {stats['archive_size']}  "
        f"qd {stats['qd_score']:.2f}  diversity {stats['mean_diversity']:.4f}"
    )
    if args.out:
        Path(args.out).write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_inspect(args) -> int:
    snap = _resolve_snapshot(args.archive)
    archive, descriptor, spec, header = trainer.load_archive(snap)
    floor = objective.objective_floor(spec)
    qd = objective.qd_score(archive, spec)
    print(f"snapshot: {snap}")
    print(f"game: {spec.game.value} ({spec.height}x{spec.width})  architecture: {descriptor.kind.value}")
    print(f"archive dims: {archive.dims}  bounds: {archive.bounds}")
    print(f"iteration: {header['iteration']}  evaluations: {header['evaluations']}")
    print(f"size: {len(archive)}  qd score: {qd:.2f} (objective floor {floor:g})")
    if len(archive):
        print(f"best objective: {archive.best_objective():.4f}  mean diversity: {archive.mean_diversity():.4f}")
        names = MEASURE_NAMES[spec.game]
        top = sorted(archive.items(), key=lambda kv: -kv[1].stats.objective)[: args.top]
        print(f"top elites (cell, objective, {names[0]}, {names[1]}):")
        for cell, elite in top:
            m = elite.stats.measure_means
            print(f"  {cell}  {elite.stats.objective:10.4f}  {m[0]:8.4f}  {m[1]:8.2f}")
    return EXIT_OK


def _select_elite(archive, args):
    if args.cell:
        try:
            cell = tuple(int(p) for p in args.cell.split(","))
        except ValueError:
            raise CliError(f"--cell expects comma-separated integers, got {args.cell!r}", EXIT_USAGE) from None
        if cell in archive.cells:
            return cell, archive.cells[cell]
        near = sorted(
            archive.cells,
            key=lambda c: sum((a - b) ** 2 for a, b in zip(c, cell)),
        )[:5]
        raise CliError(f"cell {cell} is unoccupied; nearest occupied cells: {near}")
    if args.measures:
        try:
            values = tuple(float(p) for p in args.measures.split(","))
        except ValueError:
            raise CliError(f"--measures expects comma-separated numbers, got {args.measures!r}", EXIT_USAGE) from None
        target = archive.cell_index(values)
        cell = min(archive.cells, key=lambda c: sum((a - b) ** 2 for a, b in zip(c, target)))
        return cell, archive.cells[cell]
    raise CliError("select an elite with --cell I,J or --measures M0,M1", EXIT_USAGE)


def _fresh_seeds(descriptor, count: int, seed: int):
    stream = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    return trainer.draw_seed_batch(stream, count, nets.seed_kind_for(descriptor.kind))


def cmd_generate(args) -> int:
    snap = _resolve_snapshot(args.archive)
    archive, descriptor, spec, _ = trainer.load_archive(snap)
    cell, elite = _select_elite(archive, args)
    genome = nets.GeneratorGenome(descriptor, np.asarray(elite.genome))
    seeds = _fresh_seeds(descriptor, args.count, args.seed)
    levels = nets.generate_levels(genome, seeds, args.steps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, cells in enumerate(levels):
        level = Level(cells)
        (out_dir / f"level_{i:03d}.txt").write_text(to_text(level, spec.alphabet))
        validity, measures = objective.level_record(level, spec, args.budget)
        records.append(
            {
                "level": f"level_{i:03d}.txt",
                "validity": validity,
                "measures": list(measures),
            }
        )
    report = {
        "cell": list(cell),
        "elite_objective": elite.stats.objective,
        "measure_names": list(MEASURE_NAMES[spec.game]),
        "levels": records,
    }
    (out_dir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(levels)} levels from cell {cell} to {out_dir}")
    return EXIT_OK


def cmd_render(args) -> int:
    snap = _resolve_snapshot(args.archive)
    archive, descriptor, spec, _ = trainer.load_archive(snap)
    cell, elite = _select_elite(archive, args)
    genome = nets.GeneratorGenome(descriptor, np.asarray(elite.genome))
    seeds = _fresh_seeds(descriptor, args.count, args.seed)
    levels = nets.generate_levels(genome, seeds, args.steps)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, cells in enumerate(levels):
        render_level_image(Level(cells), spec, args.scale).save(out_dir / f"level_{i:03d}.png")
    print(f"wrote {len(levels)} level images from cell {cell} to {out_dir}")
    return EXIT_OK


def cmd_export_heatmap(args) -> int:
    snap = _resolve_snapshot(args.archive)
    archive, descriptor, spec, _ = trainer.load_archive(snap)
    if len(archive.dims) != 2:
        print("warning: archive has more than 2 measures; writing CSV only", file=sys.stderr)
    csv_path, png_path = export_heatmap(archive, args.metric, args.out, MEASURE_NAMES[spec.game])
    print(f"wrote {csv_path}" + (f" and {png_path}" if png_path else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelqd", description="Quality-diversity training of level generators")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("config", nargs="?", help="path to a TOML run config")
    p_train.add_argument("--iterations", type=int, help="override the iteration count")
    p_train.add_argument("--seed", type=int, help="override the master seed")
    p_train.add_argument("--output", help="override the output directory")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field")
    p_train.add_argument("--resume", metavar="RUN_DIR", help="resume from the latest snapshot of a run")
    p_train.add_argument("--quiet", action="store_true", help="suppress per-iteration progress")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="re-evaluate an archive on held-out seeds")
    p_eval.add_argument("archive", help="snapshot file or run directory")
    p_eval.add_argument("--seeds", type=int, default=20, help="number of held-out latent seeds")
    p_eval.add_argument("--seed", type=int, help="master seed for the held-out stream")
    p_eval.add_argument("--out", help="write the evaluation stats as JSON")
    p_eval.set_defaults(func=cmd_evaluate)

    p_inspect = sub.add_parser("inspect", help="print archive snapshot statistics")
    p_inspect.add_argument("archive", help="snapshot file or run directory")
    p_inspect.add_argument("--top", type=int, default=5, help="number of top elites to list")
    p_inspect.set_defaults(func=cmd_inspect)

    p_gen = sub.add_parser("generate", help="sample levels from one elite generator")
    p_gen.add_argument("archive", help="snapshot file or run directory")
    p_gen.add_argument("--cell", help="cell indices, e.g. 12,40")
    p_gen.add_argument("--measures", help="measure values; nearest occupied cell is used")
    p_gen.add_argument("--count", type=int, default=5, help="levels to generate")
    p_gen.add_argument("--seed", type=int, default=0, help="seed for the fresh latent stream")
    p_gen.add_argument("--steps", type=int, default=50, help="episode steps for NCA generators")
    p_gen.add_argument("--budget", type=int, default=200_000, help="solver node budget")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.set_defaults(func=cmd_generate)

    p_render = sub.add_parser("render", help="render levels from one elite as PNG images")
    p_render.add_argument("archive", help="snapshot file or run directory")
    p_render.add_argument("--cell", help="cell indices, e.g. 12,40")
    p_render.add_argument("--measures", help="measure values; nearest occupied cell is used")
    p_render.add_argument("--count", type=int, default=5)
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--steps", type=int, default=50)
    p_render.add_argument("--scale", type=int, default=16, help="pixels per tile")
    p_render.add_argument("--out", required=True, help="output directory")
    p_render.set_defaults(func=cmd_render)

    p_heat = sub.add_parser("export-heatmap", help="export an archive heatmap image and CSV")
    p_heat.add_argument("archive", help="snapshot file or run directory")
    p_heat.add_argument("--metric", choices=("objective", "diversity", "occupancy"), default="objective")
    p_heat.add_argument("--out", required=True, help="output path base (suffixes are added)")
    p_heat.set_defaults(func=cmd_export_heatmap)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
