import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from explicable.distances import ActionMapping  # noqa: E402
from explicable.features import read_samples  # noqa: E402
from explicable.regression import train_forest  # noqa: E402
from explicable.task import GroundAction, GroundTask, load_epp, load_task  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "explicable" / "data"
CAR = DATA / "car"
DELIVERY = DATA / "delivery"
CAR_TEST = sorted((CAR / "test").glob("*.pddl"))
CAR_TRAIN = sorted((CAR / "train").glob("*.pddl"))
DELIVERY_PROBLEMS = sorted(DELIVERY.glob("*/*.pddl"))


def car_epp(stem):
    path = next(p for p in CAR_TEST + CAR_TRAIN if p.stem == stem)
    return load_epp(CAR / "robot.pddl", CAR / "human.pddl", path, CAR / "mapping.tsv")


def delivery_epp(stem):
    path = next(p for p in DELIVERY_PROBLEMS if p.stem == stem)
    return load_epp(DELIVERY / "robot.pddl", DELIVERY / "human.pddl", path, ActionMapping())


@functools.lru_cache(maxsize=None)
def all_fixture_tasks():
    """(label, GroundTask) for every fixture problem under both models."""
    out = []
    for domain_dir, problems in ((CAR, CAR_TEST + CAR_TRAIN), (DELIVERY, DELIVERY_PROBLEMS)):
        for model in ("robot", "human"):
            for p in problems:
                out.append((f"{domain_dir.name}/{model}/{p.stem}", load_task(domain_dir / f"{model}.pddl", p)))
    return tuple(out)


def toy_task(fluents, actions, init, goal, name="toy"):
    """Build a GroundTask from name-level data.

    ``actions`` is a list of ``(name, pre, add, delete, cost)`` with fluent
    names; names may contain dashes to mimic ground arguments.
    """
    fid = {f: i for i, f in enumerate(fluents)}
    ids = lambda names: frozenset(fid[n] for n in names)  # noqa: E731
    acts = []
    for k, (name, pre, add, delete, cost) in enumerate(actions):
        schema, *args = name.split("-")
        acts.append(GroundAction(k, schema, tuple(args), ids(pre), ids(add), ids(delete), cost))
    return GroundTask(name, tuple(fluents), tuple(acts), ids(init), ids(goal))


@pytest.fixture(scope="session")
def car_model():
    """A small forest fitted on the shipped car CSV."""
    return train_forest(read_samples(DATA / "car.csv"), n_trees=10, max_depth=6, feature_subset=2, seed=0)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run
# ---------------------------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_walk(task, rng, max_len=8):
    """A random executable action sequence (not necessarily reaching the goal)."""
    state, ids = task.init, []
    for _ in range(int(rng.integers(0, max_len + 1))):
        options = task.applicable(state)
        if not options:
            break
        a = options[int(rng.integers(len(options)))]
        state = (state - a.delete) | a.add
        ids.append(a.id)
    return task.plan(ids)
