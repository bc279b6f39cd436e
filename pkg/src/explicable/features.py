"""Feature extraction for the explicability regressor and the training CSV."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .distances import IDENTITY, LITERAL_ADJACENT, SUM_SQUARED, plan_profile
from .errors import AlignmentError
from .expected import DEFAULT_K_MAX, generate_expected_set, select_closest
from .regression import LabeledSample

CSV_HEADER = ("delta_a", "delta_c", "delta_s", "score")


def featurize_dataset(robot_task, robot_plans, human_task, scores, mapping=IDENTITY,
                      mode=LITERAL_ADJACENT, k_max=DEFAULT_K_MAX, form=SUM_SQUARED, provenance="",
                      expected=None):
    """Pair each robot plan's feature vector (against its closest expected
    plan) with its score."""
    robot_plans = list(robot_plans)
    scores = list(scores)
    if len(robot_plans) != len(scores):
        raise AlignmentError(f"{len(robot_plans)} plans but {len(scores)} scores")
    if expected is None:
        expected = generate_expected_set(human_task, k_max)
    members = [plan_profile(human_task, p, IDENTITY, mode) for p in expected]
    samples = []
    for k, (plan, score) in enumerate(zip(robot_plans, scores)):
        sel = select_closest(plan_profile(robot_task, plan, mapping, mode), members, form)
        samples.append(LabeledSample(sel.features.as_tuple(), float(score), f"{provenance}#{k}"))
    return samples


def write_samples(samples, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in samples:
        w.writerow([repr(v) for v in (*s.features, s.score)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_samples(path_or_text, provenance=None):
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        provenance = provenance or str(path_or_text)
        text = Path(path_or_text).read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    missing = [c for c in CSV_HEADER if rows and c not in rows[0]]
    if missing or (not rows and not text.startswith(",".join(CSV_HEADER))):
        raise ValueError(f"training CSV must have columns {','.join(CSV_HEADER)}")
    out = []
    for i, row in enumerate(rows, 2):
        try:
            feats = (float(row["delta_a"]), float(row["delta_c"]), float(row["delta_s"]))
            out.append(LabeledSample(feats, float(row["score"]), f"{provenance or 'csv'}:{i}"))
        except ValueError as exc:
            raise ValueError(f"training CSV line {i}: {exc}") from exc
    return out
