"""End-to-end wiring: training-set construction, model selection, evaluation
tables and the config-driven pipeline."""
from __future__ import annotations

import configparser
import csv
import glob
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .distances import LINK_MODES, LITERAL_ADJACENT, SUM_SQUARED, ActionMapping
from .errors import ConfigError, ExplicableError, ResourceLimit
from .expected import DEFAULT_K_MAX, optimal_plan
from .features import featurize_dataset, read_samples, write_samples
from .regression import KINDS, dump_model, expand_grid, fit_best
from .scoring import RuleSet, plan_score_synthetic
from .search import DEFAULT_BUDGET, DEFAULT_K_EXPECTED, enumerate_plans, reconciliation_search
from .task import format_plan, load_epp

log = logging.getLogger(__name__)

EVAL_HEADER = ("problem", "opt_cost", "expl_cost", "opt_score", "expl_score", "error")
EVAL_NOTE = "# opt_score and expl_score come from the rule-based synthetic scorer, not from human raters"
ANYTIME_HEADER = ("solution_index", "cost", "predicted_score", "best_so_far")

DEFAULT_GRIDS = {
    "ridge": {"lambda": [0.01, 0.1, 1.0]},
    "tree": {"max_depth": [2, 4, 6, None], "min_split": [2, 5]},
    "forest": {"n_trees": [30], "max_depth": [4, 8, None], "min_split": [2, 5], "feature_subset": [1, 2, 3]},
}


# ---------------------------------------------------------------------------
# grid files
# ---------------------------------------------------------------------------

def _parse_value(text):
    t = text.strip()
    low = t.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def parse_grid_section(section):
    """``key = v1, v2`` lines -> ``{key: [v1, v2]}``."""
    return {k: [_parse_value(v) for v in raw.split(",")] for k, raw in section.items()}


def read_grid(path, kind):
    """Hyperparameter grid for ``kind`` from an INI file.  The section may be
    named ``[kind]`` or ``[grid.kind]``; without one the built-in grid is used."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read grid file {path}")
    for name in (kind, f"grid.{kind}"):
        if cp.has_section(name):
            return parse_grid_section(cp[name])
    return DEFAULT_GRIDS[kind]


# ---------------------------------------------------------------------------
# training data
# ---------------------------------------------------------------------------

def training_plans(epp, slack=1, cap=10**5):
    """All loopless robot plans within ``slack`` of the robot optimum."""
    bound = optimal_plan(epp.robot).cost + slack
    return [epp.robot.plan(ids) for ids in enumerate_plans(epp.robot, bound, cap)]


def build_training_set(robot_domain, human_domain, problems, rules, mapping=None, slack=1,
                       mode=LITERAL_ADJACENT, k_max=DEFAULT_K_MAX, form=SUM_SQUARED):
    samples = []
    for problem in problems:
        epp = load_epp(robot_domain, human_domain, problem, mapping)
        plans = training_plans(epp, slack)
        scores = [plan_score_synthetic(epp.robot.action_names(p), rules) for p in plans]
        samples += featurize_dataset(epp.robot, plans, epp.human, scores, epp.mapping, mode, k_max, form,
                                     provenance=Path(problem).stem)
        log.info("%s: %d training plans", Path(problem).stem, len(plans))
    return samples


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalRow:
    problem: str
    opt_cost: object = ""
    expl_cost: object = ""
    opt_score: object = ""
    expl_score: object = ""
    error: str = ""
    optimal_plan: str = field(default="", repr=False)
    explicable_plan: str = field(default="", repr=False)
    anytime: str = field(default="", repr=False)

    def cells(self):
        fmt = lambda v: repr(v) if isinstance(v, float) else str(v)  # noqa: E731
        return [self.problem, fmt(self.opt_cost), fmt(self.expl_cost), fmt(self.opt_score),
                fmt(self.expl_score), self.error]


def anytime_csv(stream):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ANYTIME_HEADER)
    for idx, cost, score, best in stream.anytime_rows():
        w.writerow([idx, cost, repr(score), repr(best)])
    return buf.getvalue()


def evaluate_problem(robot_domain, human_domain, problem, model, rules, mapping=None, cost_slack=2,
                     k_expected=DEFAULT_K_EXPECTED, mode=LITERAL_ADJACENT, form=SUM_SQUARED,
                     budget=DEFAULT_BUDGET):
    """Optimal plan versus the best plan of reconciliation search within
    ``opt_cost + cost_slack``; both scored by the rule set."""
    row = EvalRow(Path(problem).stem)
    try:
        epp = load_epp(robot_domain, human_domain, problem, mapping)
        opt = optimal_plan(epp.robot)
        row.opt_cost = opt.cost
        row.opt_score = plan_score_synthetic(epp.robot.action_names(opt), rules)
        row.optimal_plan = format_plan(epp.robot, opt, extra_comments=[f"optimal plan for {row.problem}"])
        try:
            stream = reconciliation_search(epp, opt.cost + cost_slack, model, k_expected, mode=mode,
                                           form=form, budget=budget)
        except ResourceLimit as exc:
            stream = exc.partial
            row.error = "node budget exhausted"
            if stream is None or not stream.solutions:
                return row
        best = stream.best
        row.expl_cost = best.cost
        row.expl_score = plan_score_synthetic(epp.robot.action_names(best.plan), rules)
        row.explicable_plan = format_plan(epp.robot, best.plan, best.score,
                                          [f"best explicable plan for {row.problem}"])
        row.anytime = anytime_csv(stream)
    except ExplicableError as exc:
        row.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def eval_csv(rows):
    buf = io.StringIO()
    buf.write(EVAL_NOTE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVAL_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_eval_csv(path_or_text):
    text = path_or_text
    if "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# pipeline config
# ---------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    robot_domain: Path
    human_domain: Path
    mapping: Path | None
    rules: Path
    train_problems: list
    scores: Path | None
    test_problems: list
    train_slack: int = 1
    cost_slack: int = 2
    kind: str = "forest"
    compare: tuple = KINDS
    folds: int = 5
    seed: int = 0
    k_expected: int = DEFAULT_K_EXPECTED
    k_max: int = DEFAULT_K_MAX
    mode: str = LITERAL_ADJACENT
    budget: int = DEFAULT_BUDGET
    grids: dict = field(default_factory=dict)
    source: Path | None = None

    def input_files(self):
        files = [self.robot_domain, self.human_domain, self.rules, *self.train_problems, *self.test_problems]
        files += [p for p in (self.mapping, self.scores, self.source) if p is not None]
        return files


def _glob_list(base, raw):
    out = []
    for item in raw.split():
        matches = sorted(glob.glob(str(base / item)))
        if not matches:
            raise ConfigError(f"pattern {item!r} matches no file")
        out += [Path(m) for m in matches]
    return out


def load_pipeline_config(path):
    """Read and validate an INI pipeline config.  Paths are relative to the
    config file.  Every problem is reported before any work starts."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        if not cp.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config {path}")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not cp.has_section("pipeline"):
        raise ConfigError(f"{path}: missing [pipeline] section")
    sec = cp["pipeline"]
    base = path.parent

    def need(key):
        if not sec.get(key, "").strip():
            raise ConfigError(f"{path}: missing required key {key!r}")
        return sec[key].strip()

    def file_key(key, required=True):
        raw = need(key) if required else sec.get(key, "").strip()
        if not raw:
            return None
        p = base / raw
        if not p.is_file():
            raise ConfigError(f"{path}: {key} file {p} does not exist")
        return p

    def int_key(key, default, low=0):
        try:
            v = int(sec.get(key, str(default)))
        except ValueError:
            raise ConfigError(f"{path}: {key} must be an integer") from None
        if v < low:
            raise ConfigError(f"{path}: {key} must be at least {low}")
        return v

    if not sec.get("rules", "").strip():
        raise ConfigError(f"{path}: missing score source: set 'rules' to an expectation rule file")
    scores = file_key("scores", required=False)
    train_raw = sec.get("train_problems", "").strip()
    if scores is None and not train_raw:
        raise ConfigError(f"{path}: training needs either 'scores' (a CSV) or 'train_problems'")
    kind = sec.get("kind", "forest").strip()
    compare = tuple(sec.get("compare", " ".join(KINDS)).split())
    for k in (kind, *compare):
        if k not in KINDS:
            raise ConfigError(f"{path}: unknown model kind {k!r}")
    if kind not in compare:
        compare = compare + (kind,)
    mode = sec.get("mode", LITERAL_ADJACENT).strip()
    if mode not in LINK_MODES:
        raise ConfigError(f"{path}: unknown causal-link mode {mode!r}")
    grids = {}
    for k in compare:
        name = f"grid.{k}"
        grids[k] = parse_grid_section(cp[name]) if cp.has_section(name) else DEFAULT_GRIDS[k]

    cfg = PipelineConfig(
        robot_domain=file_key("robot_domain"),
        human_domain=file_key("human_domain"),
        mapping=file_key("mapping", required=False),
        rules=file_key("rules"),
        train_problems=_glob_list(base, train_raw) if train_raw else [],
        scores=scores,
        test_problems=_glob_list(base, need("test_problems")),
        train_slack=int_key("train_slack", 1),
        cost_slack=int_key("cost_slack", 2),
        kind=kind,
        compare=compare,
        folds=int_key("folds", 5, 2),
        seed=int_key("seed", 0),
        k_expected=int_key("k_expected", DEFAULT_K_EXPECTED, 1),
        k_max=int_key("k_max", DEFAULT_K_MAX, 1),
        mode=mode,
        budget=int_key("budget", DEFAULT_BUDGET, 1),
        grids=grids,
        source=path,
    )
    RuleSet.read(cfg.rules)  # syntax errors surface before any work
    return cfg


class StageError(ExplicableError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    outputs: list
    rows: list
    reports: dict
    n_samples: int

    @property
    def failed(self):
        return [r for r in self.rows if r.error]


def _write(out_dir, rel, text, outputs):
    p = out_dir / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    outputs.append(str(Path(rel)))


def run_pipeline(cfg, out_dir, seed=None, budget=None):
    """featurize -> grid search -> train -> explicate -> eval, persisting
    every intermediate artifact under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    budget = cfg.budget if budget is None else budget
    outputs = []
    mapping = ActionMapping.read(cfg.mapping) if cfg.mapping else None

    stage = "featurize"
    try:
        rules = RuleSet.read(cfg.rules)
        if cfg.scores is not None:
            samples = read_samples(cfg.scores)
        else:
            samples = build_training_set(cfg.robot_domain, cfg.human_domain, cfg.train_problems, rules,
                                         mapping, cfg.train_slack, cfg.mode, cfg.k_max)
        _write(out_dir, "train.csv", write_samples(samples), outputs)

        stage = "grid_search"
        reports, models = {}, {}
        for k in cfg.compare:
            models[k], reports[k] = fit_best(samples, k, expand_grid(cfg.grids[k]), cfg.folds, seed)
            _write(out_dir, f"grid-{k}.txt", reports[k].table(), outputs)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("kind", "cv_r2", "params"))
        for k in cfg.compare:
            w.writerow((k, repr(reports[k].best_r2), json.dumps(reports[k].best_params, sort_keys=True)))
        _write(out_dir, "regressors.csv", buf.getvalue(), outputs)

        stage = "train"
        model = models[cfg.kind]
        _write(out_dir, "model.json", dump_model(model), outputs)
    except ExplicableError as exc:
        raise StageError(stage, exc) from exc
    except (OSError, ValueError) as exc:
        raise StageError(stage, exc) from exc

    rows = []
    for problem in cfg.test_problems:
        row = evaluate_problem(cfg.robot_domain, cfg.human_domain, problem, model, rules, mapping,
                               cfg.cost_slack, cfg.k_expected, cfg.mode, budget=budget)
        rows.append(row)
        if row.optimal_plan:
            _write(out_dir, f"plans/{row.problem}.optimal.plan", row.optimal_plan, outputs)
        if row.explicable_plan:
            _write(out_dir, f"plans/{row.problem}.explicable.plan", row.explicable_plan, outputs)
        if row.anytime:
            _write(out_dir, f"anytime/{row.problem}.csv", row.anytime, outputs)
        log.info("%s: opt %s/%s expl %s/%s %s", row.problem, row.opt_cost, row.opt_score,
                 row.expl_cost, row.expl_score, row.error)
    _write(out_dir, "eval.csv", eval_csv(rows), outputs)
    return PipelineResult(outputs, rows, reports, len(samples))
