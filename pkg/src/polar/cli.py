"""Command-line pipeline.

Stages communicate only through files so each one is inspectable and
re-runnable on its own:

    polar world gen      --seed 0 --n-rooms 6 --out world.json [--render]
    polar scenario gen   --seed 0 --kind compositional-single --n 50 --out specs.json
    polar acquire        --specs specs.json --out episodes.jsonl
    polar memorize       --episodes episodes.jsonl --out graphs.json
    polar eval           --specs specs.json --mode polar --graphs graphs.json \
                         --episodes episodes.jsonl --out metrics.json [--table metrics.txt]
    polar report         --metrics metrics.json [more.json ...] --out table.txt
    polar run-all        --seed 0 --out-dir runs/seed0 [--kinds ...] [--modes ...] [--n 5]

Seed precedence: --seed flag, then the --config file, then POLAR_SEED, then 0.
Exit codes: 0 success, 1 domain error (one-line reason on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .agent import RunConfig
from .distiller import load_episodes, save_episodes
from .encoder import DEFAULT_ENCODER, EncoderConfig
from .errors import ParseError, PolarError, RejectedInput
from .evaluation import (
    MODES,
    acquire,
    evaluate,
    group_by_scenario,
    load_graphs,
    load_reports,
    memorize_suite,
    render_table,
    save_graphs,
    write_report,
)
from .fileio import atomic_write_text, dump_json
from .graph import THETA_DEDUP, THETA_OBJ
from .scenarios import KINDS, gen_scenarios, load_specs, save_specs
from .world import gen_world

DEFAULT_MODES = ("no-prior", "raw-interaction", "polar")

CONFIG_FIELDS = {
    "seed": int,
    "n_rooms": int,
    "n": int,
    "k": int,
    "theta_dedup": float,
    "theta_obj": float,
    "kinds": list,
    "modes": list,
    "encoder_mode": str,
    "encoder_endpoint": str,
    "encoder_dim": int,
    "out_dir": str,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("config file must hold a flat object")
    for key, value in doc.items():
        if key not in CONFIG_FIELDS:
            raise RejectedInput(f"unknown config field {key!r}")
        if not isinstance(value, CONFIG_FIELDS[key]) or isinstance(value, bool):
            raise RejectedInput(f"config field {key!r} must be {CONFIG_FIELDS[key].__name__}")
    return doc


def _resolve_seed(args, config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in config:
        return config["seed"]
    env = os.environ.get("POLAR_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise RejectedInput(f"POLAR_SEED must be an integer, got {env!r}") from exc
    return 0


def _encoder_from(args, config: dict) -> EncoderConfig:
    mode = getattr(args, "encoder_mode", None) or config.get("encoder_mode")
    endpoint = getattr(args, "encoder_endpoint", None) or config.get("encoder_endpoint")
    dim = getattr(args, "encoder_dim", None) or config.get("encoder_dim")
    if mode is None and endpoint is None and dim is None:
        return DEFAULT_ENCODER
    return EncoderConfig(
        mode=mode or DEFAULT_ENCODER.mode,
        dim=dim or DEFAULT_ENCODER.dim,
        endpoint=endpoint,
    )


def _pick(args, config: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


# -- subcommand bodies -------------------------------------------------------------


def _parse_objects(pairs: list[str] | None) -> list[tuple[str, int]] | None:
    if not pairs:
        return None
    spec = []
    for pair in pairs:
        category, sep, count = pair.partition("=")
        if not sep or not category:
            raise RejectedInput(f"--objects wants category=count, got {pair!r}")
        try:
            spec.append((category, int(count)))
        except ValueError as exc:
            raise RejectedInput(f"--objects count must be an integer, got {pair!r}") from exc
    return spec


def _cmd_world_gen(args, config):
    seed = _resolve_seed(args, config)
    world = gen_world(seed, _pick(args, config, "n_rooms", 6), _parse_objects(args.objects))
    world.save(args.out)
    if args.render:
        sys.stdout.write(world.render_ascii() + "\n")
    return 0


def _cmd_scenario_gen(args, config):
    seed = _resolve_seed(args, config)
    kinds = args.kind or config.get("kinds") or list(KINDS)
    encoder = _encoder_from(args, config)
    specs = []
    for kind in kinds:
        specs.extend(
            gen_scenarios(
                seed,
                kind,
                _pick(args, config, "n", 5),
                n_rooms=_pick(args, config, "n_rooms", 6),
                encoder_config=encoder,
            )
        )
    save_specs(specs, args.out)
    sys.stdout.write(f"wrote {len(specs)} specs to {args.out}\n")
    return 0


def _cmd_acquire(args, config):
    specs = load_specs(args.specs)
    episodes = []
    for spec in sorted(specs, key=lambda s: s.scenario_id):
        episodes.extend(acquire(spec))
    save_episodes(episodes, args.out)
    sys.stdout.write(f"wrote {len(episodes)} episodes to {args.out}\n")
    return 0


def _cmd_memorize(args, config):
    episodes = load_episodes(args.episodes)
    graphs = memorize_suite(
        episodes,
        theta_dedup=_pick(args, config, "theta_dedup", THETA_DEDUP),
        theta_obj=_pick(args, config, "theta_obj", THETA_OBJ),
        encoder_config=_encoder_from(args, config),
    )
    save_graphs(graphs, args.out)
    sys.stdout.write(f"wrote {len(graphs)} graphs to {args.out}\n")
    return 0


def _cmd_eval(args, config):
    specs = load_specs(args.specs)
    graphs = load_graphs(args.graphs) if args.graphs else None
    episodes = group_by_scenario(load_episodes(args.episodes)) if args.episodes else None
    run_config = RunConfig(
        k=_pick(args, config, "k", 5), mode=args.mode, seed=_resolve_seed(args, config)
    )
    report = evaluate(
        specs,
        args.mode,
        run_config,
        graphs=graphs,
        episodes=episodes,
        encoder_config=_encoder_from(args, config),
        only_retrieval_hits=args.only_retrieval_hits,
    )
    table = write_report([report], args.out, args.table)
    sys.stdout.write(table)
    return 0


def _cmd_report(args, config):
    reports = []
    for path in args.metrics:
        reports.extend(load_reports(path))
    table = render_table(reports)
    atomic_write_text(args.out, table)
    sys.stdout.write(table)
    return 0


def _cmd_run_all(args, config):
    seed = _resolve_seed(args, config)
    kinds = args.kinds or config.get("kinds") or list(KINDS)
    modes = args.modes or config.get("modes") or list(DEFAULT_MODES)
    for mode in modes:
        if mode not in MODES:
            raise RejectedInput(f"unknown evaluation mode {mode!r}; expected one of {', '.join(MODES)}")
    n = _pick(args, config, "n", 5)
    n_rooms = _pick(args, config, "n_rooms", 6)
    encoder = _encoder_from(args, config)
    out_dir = args.out_dir or config.get("out_dir")
    if not out_dir:
        raise RejectedInput("run-all needs --out-dir (or out_dir in the config file)")
    os.makedirs(out_dir, exist_ok=True)
    dump_json(
        os.path.join(out_dir, "config.json"),
        {"seed": seed, "kinds": list(kinds), "modes": list(modes), "n": n, "n_rooms": n_rooms},
    )
    all_reports = []
    for kind in kinds:
        kind_dir = os.path.join(out_dir, kind)
        os.makedirs(kind_dir, exist_ok=True)
        specs = gen_scenarios(seed, kind, n, n_rooms=n_rooms, encoder_config=encoder)
        save_specs(specs, os.path.join(kind_dir, "specs.json"))
        world = gen_world(specs[0].world_seed, specs[0].world_n_rooms, list(specs[0].world_objects))
        world.save(os.path.join(kind_dir, "world.json"))
        episodes = []
        for spec in specs:
            episodes.extend(acquire(spec))
        save_episodes(episodes, os.path.join(kind_dir, "episodes.jsonl"))
        graphs = memorize_suite(episodes, encoder_config=encoder)
        save_graphs(graphs, os.path.join(kind_dir, "graphs.json"))
        by_scenario = group_by_scenario(episodes)
        reports = [
            evaluate(
                specs,
                mode,
                RunConfig(k=_pick(args, config, "k", 5), mode=mode, seed=seed),
                graphs=graphs,
                episodes=by_scenario,
                encoder_config=encoder,
            )
            for mode in modes
        ]
        write_report(reports, os.path.join(kind_dir, "metrics.json"), os.path.join(kind_dir, "metrics.txt"))
        all_reports.extend(reports)
    table = write_report(all_reports, os.path.join(out_dir, "metrics.json"), os.path.join(out_dir, "metrics.txt"))
    sys.stdout.write(table)
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polar", description="object-centric memory graphs for embodied navigation")
    parser.add_argument("--config", help="JSON config file with pipeline defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None, help="base seed (default: config, then POLAR_SEED, then 0)")

    def add_encoder(p):
        p.add_argument("--encoder-mode", choices=("builtin", "remote"), default=None)
        p.add_argument("--encoder-endpoint", default=None)
        p.add_argument("--encoder-dim", type=int, default=None)

    world = sub.add_parser("world", help="world utilities").add_subparsers(dest="world_command", required=True)
    world_gen = world.add_parser("gen", help="generate a deterministic house world")
    add_seed(world_gen)
    world_gen.add_argument("--n-rooms", type=int, default=None)
    world_gen.add_argument("--objects", nargs="+", default=None, metavar="CATEGORY=COUNT")
    world_gen.add_argument("--out", required=True)
    world_gen.add_argument("--render", action="store_true", help="also print the text map")
    world_gen.set_defaults(func=_cmd_world_gen)

    scenario = sub.add_parser("scenario", help="scenario utilities").add_subparsers(
        dest="scenario_command", required=True
    )
    scenario_gen = scenario.add_parser("gen", help="generate scenario specs")
    add_seed(scenario_gen)
    scenario_gen.add_argument("--kind", action="append", choices=KINDS, default=None, help="repeatable; default: all kinds")
    scenario_gen.add_argument("--n", type=int, default=None, help="specs per kind")
    scenario_gen.add_argument("--n-rooms", type=int, default=None)
    add_encoder(scenario_gen)
    scenario_gen.add_argument("--out", required=True)
    scenario_gen.set_defaults(func=_cmd_scenario_gen)

    acq = sub.add_parser("acquire", help="run acquisition scripts into episode logs")
    acq.add_argument("--specs", required=True)
    acq.add_argument("--out", required=True)
    acq.set_defaults(func=_cmd_acquire)

    mem = sub.add_parser("memorize", help="distill episode logs into per-scenario graphs")
    mem.add_argument("--episodes", required=True)
    mem.add_argument("--theta-dedup", type=float, default=None)
    mem.add_argument("--theta-obj", type=float, default=None)
    add_encoder(mem)
    mem.add_argument("--out", required=True)
    mem.set_defaults(func=_cmd_memorize)

    ev = sub.add_parser("eval", help="run one evaluation mode over specs")
    add_seed(ev)
    ev.add_argument("--specs", required=True)
    ev.add_argument("--mode", required=True, choices=MODES)
    ev.add_argument("--graphs", default=None)
    ev.add_argument("--episodes", default=None)
    ev.add_argument("--k", type=int, default=None)
    ev.add_argument("--only-retrieval-hits", action="store_true")
    add_encoder(ev)
    ev.add_argument("--out", required=True)
    ev.add_argument("--table", default=None)
    ev.set_defaults(func=_cmd_eval)

    rep = sub.add_parser("report", help="render metrics files into one table")
    rep.add_argument("--metrics", nargs="+", required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=_cmd_report)

    run = sub.add_parser("run-all", help="full pipeline: specs, acquisition, memorization, evaluation")
    add_seed(run)
    run.add_argument("--kinds", nargs="+", choices=KINDS, default=None)
    run.add_argument("--modes", nargs="+", default=None)
    run.add_argument("--n", type=int, default=None)
    run.add_argument("--n-rooms", type=int, default=None)
    run.add_argument("--k", type=int, default=None)
    add_encoder(run)
    run.add_argument("--out-dir", default=None)
    run.set_defaults(func=_cmd_run_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except (PolarError, OSError) as exc:
        sys.stderr.write(f"polar: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
