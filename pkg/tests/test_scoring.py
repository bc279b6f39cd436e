import pytest

from conftest import CAR, DATA, car_epp
from explicable.distances import IDENTITY
from explicable.errors import AlignmentError, ConfigError, UncoveredAction
from explicable.expected import generate_expected_set
from explicable.features import CSV_HEADER, featurize_dataset, read_samples, write_samples
from explicable.pipeline import training_plans
from explicable.scoring import RuleSet, plan_score_synthetic

CAR_RULES = RuleSet.read(CAR / "rules.txt")


def test_all_explicable():
    rules = RuleSet.parse("allow *")
    assert plan_score_synthetic(["a", "b"], rules) == 1.0


def test_three_of_four():
    rules = RuleSet.parse("allow *\nforbid bad")
    assert plan_score_synthetic(["a", "bad", "b", "c"], rules) == 0.75


def test_empty_plan_scores_one():
    assert plan_score_synthetic([], RuleSet.parse("allow *")) == 1.0


def test_lanechange_orderings_under_shipped_rules():
    light_last = ["LeftSqueeze-l2-l1", "LeftSqueeze2-l2-l1", "LeftSqueeze3-l2-l1", "LeftLightOn"]
    light_first = ["LeftLightOn", "LeftSqueeze-l2-l1", "LeftSqueeze2-l2-l1", "LeftSqueeze3-l2-l1"]
    assert plan_score_synthetic(light_last, CAR_RULES) == 0.75
    assert plan_score_synthetic(light_first, CAR_RULES) == 1.0


def test_uncovered_action():
    with pytest.raises(UncoveredAction):
        plan_score_synthetic(["mystery"], RuleSet.parse("allow known"))


def test_rule_kinds():
    rules = RuleSet.parse("""
        allow *
        require-before on go
        forbid-after stop go
        forbid-between open close poke
    """)
    assert rules.labels(["go", "on", "go"]) == [0, 1, 1]
    assert rules.labels(["on", "go", "stop", "go"]) == [1, 1, 1, 0]
    assert rules.labels(["poke", "open", "poke", "close", "poke"]) == [1, 1, 0, 1, 1]


@pytest.mark.parametrize("text", ["frobnicate x", "forbid", "require-before a", "allow a b"])
def test_bad_rule_lines(text):
    with pytest.raises(ConfigError):
        RuleSet.parse(text)


def test_shipped_rules_cover_every_car_action():
    epp = car_epp("p13-obstacle-left")
    assert all(CAR_RULES.covers(a.name) for a in epp.robot.actions)


# --- featurization ---------------------------------------------------------

def test_expected_plan_features_are_zero():
    epp = car_epp("p05-signal-accelerate")
    eps = generate_expected_set(epp.human)
    # the human task shares the initial state, so its own plans are robot-like here
    samples = featurize_dataset(epp.human, list(eps), epp.human, [1.0] * len(eps), IDENTITY)
    assert all(s.features == (0.0, 0.0, 0.0) for s in samples)


def test_batch_of_eight_car_plans():
    epp = car_epp("p01-lanechange")
    plans = training_plans(epp, slack=2)[:8]
    assert len(plans) == 8
    scores = [plan_score_synthetic(epp.robot.action_names(p), CAR_RULES) for p in plans]
    samples = featurize_dataset(epp.robot, plans, epp.human, scores, epp.mapping, provenance="p01")
    assert len(samples) == 8
    for s in samples:
        assert all(0.0 <= v <= 1.0 for v in s.features)
    assert samples[3].provenance == "p01#3"


def test_alignment_error():
    epp = car_epp("p01-lanechange")
    plans = training_plans(epp, slack=0)
    with pytest.raises(AlignmentError):
        featurize_dataset(epp.robot, plans, epp.human, [], epp.mapping)


def test_csv_round_trip(tmp_path):
    samples = read_samples(DATA / "car.csv")
    assert 25 <= len(samples) <= 40
    path = tmp_path / "x.csv"
    write_samples(samples, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    again = read_samples(path)
    assert [s.features for s in again] == [s.features for s in samples]
    assert [s.score for s in again] == [s.score for s in samples]


def test_csv_errors():
    with pytest.raises(ValueError):
        read_samples("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_samples("delta_a,delta_c,delta_s,score\n0.1,x,0.2,0.5\n")


def test_shipped_delivery_csv():
    samples = read_samples(DATA / "delivery.csv")
    assert 25 <= len(samples) <= 40
