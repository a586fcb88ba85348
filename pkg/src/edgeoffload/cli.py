"""``edgeoffload`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 validation
error, 1 anything else.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import offload_config, read_kv_file, split_scenario, train_config
from .errors import ConfigError, EdgeOffloadError, FileFormatError, ValidationError
from .experiments import EXPERIMENT_KINDS, ExperimentSpec, replay_manifest, run_experiment
from .kernels import BACKEND
from .model import generate_instances, read_instances, write_instances
from .mtl import evaluate, load_model, save_model, train, write_training_log
from .solvers import label_instances, read_labels, solve_batch, write_labels
from .split import best_split, eta_sweep, local_joint_crossover, strategy_cost

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _common(parser: argparse.ArgumentParser, out_required: bool = False) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=out_required, help="output path")
    parser.add_argument("--workers", type=int, default=1)


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--solver", choices=("exhaustive", "grid", "sbb"), default="exhaustive")
    parser.add_argument("--grid-step", type=float, default=0.01)
    parser.add_argument("--max-nodes", type=int, default=None,
                        help="sBB node budget (default: unbudgeted)")


def _solver_kwargs(args) -> dict:
    if args.solver == "grid":
        return {"grid_step": args.grid_step}
    if args.solver == "sbb" and args.max_nodes is not None:
        return {"max_nodes": args.max_nodes}
    return {}


def _read_cfg(args) -> dict[str, str]:
    return read_kv_file(args.config) if args.config else {}


def cmd_generate(args) -> int:
    n_vehicles, ranges = offload_config(_read_cfg(args))
    instances = generate_instances(n_vehicles, args.count, ranges, seed=args.seed)
    write_instances(args.out, instances)
    print(f"wrote {len(instances)} instances (N={n_vehicles}) to {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    instances = read_instances(args.instances)
    ds = label_instances(instances, solver=args.solver,
                         solver_kwargs=_solver_kwargs(args), workers=args.workers)
    write_labels(args.out, ds)
    print(f"labeled {len(instances)} instances with {args.solver} -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = read_labels(args.labels)
    cfg = train_config(_read_cfg(args), seed=args.seed)
    model, log = train(ds, cfg)
    save_model(args.out, model)
    if args.log is not None:
        write_training_log(args.log, log)
    final = log[-1]["loss"] if log else float("nan")
    print(f"trained {cfg.epochs} epochs, final loss {final:.6g} -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    ds = read_labels(args.labels)
    metrics = evaluate(model, ds, decision_source=args.decision_source)
    print(f"accuracy  {metrics.class_accuracy:.4f}")
    print(f"alloc_mse {metrics.reg_mse:.6g}")
    print(f"mean_inference_s {metrics.mean_inference_time:.3e}")
    return EXIT_OK


def cmd_solve(args) -> int:
    instances = read_instances(args.instances)
    reports = solve_batch(instances, args.solver, _solver_kwargs(args))
    if args.out is not None:
        from .solvers import reports_to_dataset

        write_labels(args.out, reports_to_dataset(instances, reports))
        print(f"solved {len(instances)} instances -> {args.out}")
    else:
        for i, rep in enumerate(reports):
            sol = rep.solution
            dec = "".join(str(d) for d in sol.decisions)
            alloc = ",".join(f"{a:.6f}" for a in sol.alloc)
            print(f"{i}: decisions={dec} alloc=[{alloc}] cost={sol.cost:.6g} "
                  f"optimal={rep.proven_optimal} nodes={rep.nodes_explored}")
    return EXIT_OK


def cmd_split_plan(args) -> int:
    scenario, eta_step = split_scenario(_read_cfg(args) or None)
    k, cost = best_split(scenario)
    print(f"best split point k={k} (offload-path cost {cost:.6g})")
    at_eta = replace(scenario, eta=args.eta)
    for name in ("local", "edge", "joint"):
        print(f"cost_{name}@eta={args.eta:g} {strategy_cost(at_eta, name):.6g}")
    eta_star = local_joint_crossover(scenario)
    if eta_star is None:
        print("local/joint crossover: none in [0, 1]")
    else:
        print(f"local/joint crossover eta* = {eta_star:.6g}")
    if args.out is not None:
        n_steps = int(round(1.0 / eta_step))
        records = eta_sweep(scenario, [min(1.0, i * eta_step) for i in range(n_steps + 1)])
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("eta,cost_local,cost_edge,cost_joint\n")
            for r in records:
                fh.write(f"{r.eta!r},{r.cost_local!r},{r.cost_edge!r},{r.cost_joint!r}\n")
        print(f"eta sweep -> {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.replay is not None:
        old, new, identical = replay_manifest(args.replay, args.out)
        print(f"replayed {old.kind} (seed {old.seed}) -> {args.out}")
        print("byte-identical CSVs" if identical else "DIGEST MISMATCH")
        return EXIT_OK if identical else EXIT_VALIDATION
    if args.kind is None:
        raise ConfigError("experiment requires --kind (or --replay MANIFEST)")
    config_text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    spec = ExperimentSpec(kind=args.kind, out_dir=args.out, seed=args.seed,
                          config_text=config_text)
    manifest = run_experiment(spec)
    for name, secs in manifest.stage_seconds.items():
        print(f"stage {name}: {secs:.3f}s")
    print(f"artifacts in {args.out}: {', '.join(sorted(manifest.digests))} + manifest.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeoffload",
        description="MEC task-offloading solvers, learned MTL solver and "
                    "split-inference cost simulator.",
    )
    parser.add_argument("--version", action="version",
                        version=f"edgeoffload {__version__} (kernel backend: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw random offloading instances")
    _common(p, out_required=True)
    p.add_argument("--count", type=int, default=40000)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("label", help="solve instances into a labeled dataset")
    p.add_argument("instances", type=Path)
    _common(p, out_required=True)
    _solver_flags(p)
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="train the MTL model on a labeled dataset")
    p.add_argument("labels", type=Path)
    _common(p, out_required=True)
    p.add_argument("--log", type=Path, default=None, help="training-log CSV path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a labeled dataset")
    p.add_argument("model", type=Path)
    p.add_argument("labels", type=Path)
    _common(p)
    p.add_argument("--decision-source", choices=("class", "reg"), default="class")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("solve", help="solve instances and print or save solutions")
    p.add_argument("instances", type=Path)
    _common(p)
    _solver_flags(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("split-plan", help="split-point choice and strategy costs")
    _common(p)
    p.add_argument("--eta", type=float, default=0.3, help="bad-data ratio to report costs at")
    p.set_defaults(fn=cmd_split_plan)

    p = sub.add_parser("experiment", help="run or replay an experiment pipeline")
    _common(p, out_required=True)
    p.add_argument("--kind", choices=EXPERIMENT_KINDS, default=None)
    p.add_argument("--replay", type=Path, default=None, help="manifest.json to replay")
    p.set_defaults(fn=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileFormatError as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EdgeOffloadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
