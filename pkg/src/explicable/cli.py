"""Command-line entry point: ``explicable <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .distances import (
    LINK_MODES,
    LITERAL_ADJACENT,
    SUM_SQUARED,
    EUCLIDEAN_SQUARED,
    ActionMapping,
    composite_distance,
    distance_vector,
)
from .errors import (
    ConfigError,
    ExplicableError,
    NoSolutionWithinBound,
    ResourceLimit,
    Unsolvable,
)
from .expected import DEFAULT_K_MAX, generate_expected_set, optimal_plan
from .features import featurize_dataset, read_samples, write_samples
from .pipeline import (
    DEFAULT_GRIDS,
    StageError,
    anytime_csv,
    build_training_set,
    eval_csv,
    evaluate_problem,
    load_pipeline_config,
    read_grid,
    run_pipeline,
)
from .regression import KINDS, dump_model, expand_grid, fit_best, load_model
from .scoring import RuleSet, plan_score_synthetic
from .search import DEFAULT_BUDGET, DEFAULT_K_EXPECTED, reconciliation_search
from .task import format_plan, load_epp, load_task, read_plan, validate_plan

log = logging.getLogger("explicable")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_SOLUTION = 2
EXIT_BUDGET = 3


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------

def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_inputs(self, *paths):
        for p in paths:
            if p is not None:
                self.inputs[str(p)] = file_digest(p)

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def manifest_path(out):
    out = Path(out)
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


class _Run:
    """Times a subcommand and writes its manifest next to the outputs."""

    def __init__(self, args, *inputs):
        self.m = RunManifest(args.command, seeds={"seed": args.seed})
        self.m.add_inputs(*inputs)
        self.t0 = time.perf_counter()

    def finish(self, out, outputs):
        self.m.wall_time = round(time.perf_counter() - self.t0, 6)
        self.m.outputs = [str(o) for o in outputs]
        path = manifest_path(out)
        self.m.write(path)
        return path


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _mapping(path):
    return ActionMapping.read(path) if path else ActionMapping()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_plan(args):
    run = _Run(args, args.domain, args.problem)
    task = load_task(args.domain, args.problem)
    try:
        plan = optimal_plan(task, heuristic=args.heuristic, node_cap=args.budget)
    except Unsolvable as exc:
        print(f"unsolvable: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    text = format_plan(task, plan)
    if args.out:
        _write_text(args.out, text)
        run.m.extra["cost"] = plan.cost
        run.finish(args.out, [args.out])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args):
    task = load_task(args.domain, args.problem)
    plan = read_plan(task, args.plan)
    trace = validate_plan(task, plan)
    print(f"valid: {len(plan.actions)} steps, cost {trace.cost}")
    return EXIT_OK


def cmd_distances(args):
    mapping = _mapping(args.map)
    robot = load_task(args.robot, args.problem)
    human = load_task(args.human, args.problem)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("plan_r", "plan_h", "delta_a", "delta_c", "delta_s", "composite"))
    for pr_path in args.plan_r:
        pr = read_plan(robot, pr_path)
        for ph_path in args.plan_h:
            ph = read_plan(human, ph_path)
            dv = distance_vector(robot, pr, human, ph, mapping, args.mode)
            w.writerow((pr_path, ph_path, *(repr(v) for v in dv.as_tuple()),
                        repr(composite_distance(dv, args.form))))
    return EXIT_OK


def cmd_gen_expected(args):
    run = _Run(args, args.domain, args.problem)
    task = load_task(args.domain, args.problem)
    eps = generate_expected_set(task, args.k, node_cap=args.budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for i, plan in enumerate(eps):
        p = out / f"expected-{i:03d}.plan"
        p.write_text(format_plan(task, plan), encoding="utf-8")
        outputs.append(p)
    run.m.extra.update(optimal_cost=eps.optimal_cost, n_plans=len(eps), truncated=eps.truncated,
                       expansions=eps.expansions)
    run.finish(out, outputs)
    log.info("%d expected plans of cost %d%s", len(eps), eps.optimal_cost,
             " (truncated)" if eps.truncated else "")
    return EXIT_OK


def cmd_featurize(args):
    rules = RuleSet.read(args.rules)
    run = _Run(args, args.robot, args.human, args.rules, args.map, *args.problem, *(args.plan or ()))
    if args.plan:
        if len(args.problem) != 1:
            raise ConfigError("--plan needs exactly one --problem")
        epp = load_epp(args.robot, args.human, args.problem[0], _mapping(args.map))
        plans = [read_plan(epp.robot, p) for p in args.plan]
        scores = [plan_score_synthetic(epp.robot.action_names(p), rules) for p in plans]
        samples = featurize_dataset(epp.robot, plans, epp.human, scores, epp.mapping, args.mode, args.k)
    else:
        samples = build_training_set(args.robot, args.human, args.problem, rules, _mapping(args.map),
                                     args.slack, args.mode, args.k)
    _write_text(args.out, write_samples(samples))
    run.m.extra["n_samples"] = len(samples)
    run.finish(args.out, [args.out])
    return EXIT_OK


def cmd_train(args):
    samples = read_samples(args.csv)
    grid = read_grid(args.grid, args.kind) if args.grid else DEFAULT_GRIDS[args.kind]
    run = _Run(args, args.csv, args.grid)
    model, report = fit_best(samples, args.kind, expand_grid(grid), args.folds, args.seed)
    sys.stdout.write(report.table())
    _write_text(args.out, dump_model(model))
    run.m.extra["cv_r2"] = report.best_r2
    run.finish(args.out, [args.out])
    return EXIT_OK


def cmd_explicate(args):
    epp = load_epp(args.robot, args.human, args.problem, _mapping(args.map))
    model = load_model(Path(args.model).read_text(encoding="utf-8"))
    run = _Run(args, args.robot, args.human, args.problem, args.map, args.model)

    def emit(sol):
        sys.stdout.write(format_plan(epp.robot, sol.plan, sol.score, [f"solution {sol.index}"]))
        sys.stdout.flush()

    code = EXIT_OK
    try:
        stream = reconciliation_search(epp, args.max_cost, model, args.k_expected, emit,
                                       args.mode, budget=args.budget)
    except NoSolutionWithinBound as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except ResourceLimit as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        stream, code = exc.partial, EXIT_BUDGET
    if args.anytime_csv:
        _write_text(args.anytime_csv, anytime_csv(stream))
        run.m.extra.update(n_solutions=len(stream), complete=stream.complete,
                           best_score=stream.best.score if stream.best else None)
        run.finish(args.anytime_csv, [args.anytime_csv])
    return code


def cmd_score(args):
    task = load_task(args.domain, args.problem)
    rules = RuleSet.read(args.rules)
    plan = read_plan(task, args.plan)
    names = task.action_names(plan)
    for name, ok in zip(names, rules.labels(names)):
        print(f"{ok}\t{name}")
    print(f"score\t{plan_score_synthetic(names, rules)!r}")
    return EXIT_OK


def cmd_eval(args):
    model = load_model(Path(args.model).read_text(encoding="utf-8"))
    rules = RuleSet.read(args.rules)
    run = _Run(args, args.robot, args.human, args.map, args.model, args.rules, *args.problem)
    rows = [evaluate_problem(args.robot, args.human, p, model, rules, _mapping(args.map), args.cost_slack,
                             args.k_expected, args.mode, budget=args.budget) for p in args.problem]
    text = eval_csv(rows)
    if args.out:
        _write_text(args.out, text)
        run.finish(args.out, [args.out])
    else:
        sys.stdout.write(text)
    failed = [r.problem for r in rows if r.error]
    if failed:
        print(f"failed: {' '.join(failed)}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_pipeline(args):
    cfg = load_pipeline_config(args.config)
    seed = args.seed if args.seed_given else None
    budget = args.budget if args.budget_given else None
    run = _Run(args, *cfg.input_files())
    run.m.seeds["seed"] = cfg.seed if seed is None else seed
    try:
        result = run_pipeline(cfg, args.out, seed, budget)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    run.m.extra.update(n_samples=result.n_samples,
                       cv_r2={k: r.best_r2 for k, r in result.reports.items()})
    path = run.finish(Path(args.out), result.outputs)
    log.info("wrote %d files and %s", len(result.outputs), path)
    if result.failed:
        print(f"failed: {' '.join(r.problem for r in result.failed)}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Tracked(argparse.Action):
    """Store the value and remember that the flag was given explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, f"{self.dest}_given", True)


def _global_flags(parser, defaults):
    # Subparsers suppress their defaults so a flag given before the
    # subcommand is not overwritten by the subparser's default.
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=d(0), action=_Tracked, help="random seed (default 0)")
    parser.add_argument("--budget", type=int, default=d(DEFAULT_BUDGET), action=_Tracked,
                        help="node budget for searches (default 10^6)")
    parser.add_argument("--quiet", action="store_true", default=d(False), help="only report errors")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, defaults=False)

    p = argparse.ArgumentParser(prog="explicable", description=__doc__)
    _global_flags(p, defaults=True)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, parents=[common])
        sp.set_defaults(func=func)
        return sp

    def models(sp):
        sp.add_argument("--robot", required=True, help="robot domain file")
        sp.add_argument("--human", required=True, help="human mental-model domain file")
        sp.add_argument("--map", help="robot-to-human action mapping (TSV)")
        sp.add_argument("--mode", choices=LINK_MODES, default=LITERAL_ADJACENT)

    sp = add("plan", cmd_plan, "cost-optimal plan")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--out")
    sp.add_argument("--heuristic", choices=("hmax", "blind"), default="hmax")

    sp = add("validate", cmd_validate, "check a plan file")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--plan", required=True)

    sp = add("distances", cmd_distances, "distance vectors between robot and human plans")
    models(sp)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--plan-r", nargs="+", required=True)
    sp.add_argument("--plan-h", nargs="+", required=True)
    sp.add_argument("--form", choices=(SUM_SQUARED, EUCLIDEAN_SQUARED), default=SUM_SQUARED)

    sp = add("gen-expected", cmd_gen_expected, "enumerate the expected plan set")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--k", type=int, default=DEFAULT_K_MAX)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("featurize", cmd_featurize, "build a training CSV")
    models(sp)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--problem", nargs="+", required=True)
    sp.add_argument("--plan", nargs="+", help="plan files (default: enumerate plans within --slack)")
    sp.add_argument("--slack", type=int, default=1)
    sp.add_argument("--k", type=int, default=DEFAULT_K_MAX)
    sp.add_argument("--out", required=True)

    sp = add("train", cmd_train, "grid-search and fit a regressor")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--kind", choices=KINDS, default="forest")
    sp.add_argument("--grid", help="INI file with one section per model kind")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--out", required=True)

    sp = add("explicate", cmd_explicate, "reconciliation search")
    models(sp)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--max-cost", type=int, required=True)
    sp.add_argument("--k-expected", type=int, default=DEFAULT_K_EXPECTED)
    sp.add_argument("--anytime-csv")

    sp = add("score", cmd_score, "rule-based synthetic score of a plan")
    sp.add_argument("--domain", required=True)
    sp.add_argument("--problem", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--rules", required=True)

    sp = add("eval", cmd_eval, "optimal versus explicable comparison table")
    models(sp)
    sp.add_argument("--problem", nargs="+", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--cost-slack", type=int, default=2)
    sp.add_argument("--k-expected", type=int, default=DEFAULT_K_EXPECTED)
    sp.add_argument("--out")

    sp = add("pipeline", cmd_pipeline, "featurize, train, explicate and evaluate from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    for name in ("seed", "budget"):
        setattr(args, f"{name}_given", getattr(args, f"{name}_given", False))
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ExplicableError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
