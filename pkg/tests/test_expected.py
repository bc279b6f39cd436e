import numpy as np
import pytest

import oracles
from conftest import DELIVERY, all_fixture_tasks, car_epp, random_walk, toy_task
from explicable.distances import IDENTITY, composite_distance, distance_vector, plan_profile
from explicable.errors import EmptyExpectedSet, ResourceLimit, Unsolvable
from explicable.expected import (
    ExpectedPlanSet,
    HMax,
    distance_minimizing_plan,
    generate_expected_set,
    optimal_plan,
    select_closest,
)
from explicable.task import execute_prefix, load_task, read_plan, validate_plan


def symmetric_task():
    # two routes s -> a -> g and s -> b -> g of equal cost, one detour
    return toy_task(
        ["s", "a", "b", "g"],
        [("viaA", ["s"], ["a"], ["s"], 1), ("viaB", ["s"], ["b"], ["s"], 1),
         ("fromA", ["a"], ["g"], ["a"], 1), ("fromB", ["b"], ["g"], ["b"], 1),
         ("jump", ["s"], ["g"], ["s"], 5)],
        ["s"], ["g"])


def test_goal_in_init_gives_empty_plan():
    task = toy_task(["p"], [("x", ["p"], [], [], 1)], ["p"], ["p"])
    plan = optimal_plan(task)
    assert plan.actions == () and plan.cost == 0


def test_unsolvable():
    task = toy_task(["p", "q"], [("x", ["q"], ["p"], [], 1)], [], ["p"])
    with pytest.raises(Unsolvable):
        optimal_plan(task)


def test_node_cap():
    task = load_task(DELIVERY / "robot.pddl", DELIVERY / "test" / "delivery-p01.pddl")
    with pytest.raises(ResourceLimit):
        optimal_plan(task, node_cap=2)


def test_three_step_chain_matches_dfs():
    task = toy_task(
        ["p0", "p1", "p2", "p3"],
        [("s1", ["p0"], ["p1"], [], 1), ("s2", ["p1"], ["p2"], [], 2), ("s3", ["p2"], ["p3"], [], 1),
         ("short", ["p0"], ["p2"], [], 4)],
        ["p0"], ["p3"])
    assert optimal_plan(task).cost == oracles.min_plan_cost(task)[0] == 4


def test_delivery_optimum_carries_both_items():
    task = load_task(DELIVERY / "robot.pddl", DELIVERY / "test" / "delivery-p01.pddl")
    plan = optimal_plan(task)
    names = task.action_names(plan)
    first_move = next(i for i, n in enumerate(names) if n.startswith("move"))
    assert {n for n in names[:first_move] if n.startswith("pickup")} == {
        "pickup-cup1-kitchen", "pickup-device1-kitchen"}
    expl = read_plan(task, DELIVERY / "test" / "delivery-p01.explicable.plan")
    assert plan.cost < expl.cost


def test_blind_and_hmax_agree():
    for _, task in all_fixture_tasks()[::5]:
        assert optimal_plan(task, heuristic="blind").cost == optimal_plan(task).cost


def test_hmax_admissible_on_fixture_states():
    rng = np.random.default_rng(0)
    for _, task in all_fixture_tasks()[::9]:
        h = HMax(task)
        for _ in range(5):
            walk = random_walk(task, rng, 4)
            state = execute_prefix(task, walk).final
            sub = type(task)(task.name, task.fluents, task.actions, state, task.goal, task.derived)
            try:
                true_cost = optimal_plan(sub).cost
            except Unsolvable:
                continue
            assert h(state) <= true_cost


def test_unique_optimum_gives_singleton():
    epp = car_epp("p01-lanechange")
    eps = generate_expected_set(epp.human)
    assert len(eps) == 1 and not eps.truncated


def test_symmetric_routes_both_enumerated():
    task = symmetric_task()
    eps = generate_expected_set(task)
    oracle = oracles.loopless_plans(task, eps.optimal_cost)
    assert sorted(p.actions for p in eps) == oracle
    assert len(eps) == 2 and not eps.truncated


def test_k_max_one_truncates():
    eps = generate_expected_set(symmetric_task(), k_max=1)
    assert len(eps) == 1 and eps.truncated


def test_expected_members_valid_and_optimal():
    for label, task in all_fixture_tasks():
        if "/human/" not in label:
            continue
        eps = generate_expected_set(task)
        assert len({p.actions for p in eps}) == len(eps)
        for p in eps:
            assert validate_plan(task, p).cost == eps.optimal_cost


def test_expected_set_deterministic():
    task = car_epp("p05-signal-accelerate").human
    a, b = generate_expected_set(task), generate_expected_set(task)
    assert a.plans == b.plans


def test_singleton_selection():
    epp = car_epp("p01-lanechange")
    eps = generate_expected_set(epp.human)
    robot_plan = optimal_plan(epp.robot)
    sel = distance_minimizing_plan(epp.robot, robot_plan, eps, epp.human, epp.mapping)
    assert sel.chosen == 0
    want = distance_vector(epp.robot, robot_plan, epp.human, eps.plans[0], epp.mapping)
    assert sel.features == want
    assert sel.composite == composite_distance(want)


def test_plan_equal_to_member_two_is_chosen():
    task = toy_task(
        ["s", "a", "b", "c", "g"],
        [("x", ["s"], ["a"], ["s"], 1), ("y", ["s"], ["b"], ["s"], 1), ("z", ["s"], ["c"], ["s"], 1),
         ("xa", ["a"], ["g"], ["a"], 1), ("yb", ["b"], ["g"], ["b"], 1), ("zc", ["c"], ["g"], ["c"], 1)],
        ["s"], ["g"])
    eps = generate_expected_set(task)
    assert len(eps) == 3
    sel = distance_minimizing_plan(task, eps.plans[2], eps, task, IDENTITY)
    assert sel.chosen == 2 and sel.features.as_tuple() == (0.0, 0.0, 0.0)


def test_selection_matches_exhaustive_argmin():
    rng = np.random.default_rng(11)
    for stem in ("p05-signal-accelerate", "p13-obstacle-left", "p10-stop-left"):
        epp = car_epp(stem)
        eps = generate_expected_set(epp.human)
        for _ in range(20):
            rp = random_walk(epp.robot, rng, 6)
            sel = distance_minimizing_plan(epp.robot, rp, eps, epp.human, epp.mapping)
            comps = [composite_distance(distance_vector(epp.robot, rp, epp.human, m, epp.mapping))
                     for m in eps]
            assert sel.chosen == comps.index(min(comps))
            assert all(sel.composite <= c for c in comps)


def test_empty_set_rejected():
    epp = car_epp("p01-lanechange")
    with pytest.raises(EmptyExpectedSet):
        distance_minimizing_plan(epp.robot, optimal_plan(epp.robot), ExpectedPlanSet((), 0), epp.human)
    with pytest.raises(EmptyExpectedSet):
        select_closest(plan_profile(epp.robot, optimal_plan(epp.robot)), [])
