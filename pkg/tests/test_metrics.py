import csv
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irlc.data.records import QARecord, SceneRecord
from irlc.metrics import (
    BACKGROUND,
    MetricReport,
    evaluate,
    grounding_quality,
    ordinality_gap,
    paired_t_test,
    per_bin_report,
    proposal_categories,
    rmse,
    similarity_table,
    vqa_accuracy,
    write_metrics_csv,
)


def brute_force_accuracy(pred, answers):
    """Literal mean over the ten nine-answer subsets of min(matches / 3, 1), in exact arithmetic."""
    scores = []
    for subset in itertools.combinations(range(10), 9):
        k = sum(1 for i in subset if answers[i] == str(pred))
        scores.append(min(Fraction(k, 3), Fraction(1)))
    return float(sum(scores) / 10)


@pytest.mark.parametrize("k, expected", [(10, 1.0), (0, 0.0), (3, 0.9), (1, 0.3), (2, 0.6), (4, 1.0)])
def test_vqa_accuracy_examples(k, expected):
    answers = ["2"] * k + ["5"] * (10 - k)
    assert vqa_accuracy(2, answers) == expected


def test_vqa_accuracy_canonical_forms_and_errors():
    assert vqa_accuracy(2, ["two"] * 3 + ["1"] * 7) == 0.9
    assert vqa_accuracy("2", ["2"] * 10) == 1.0
    assert vqa_accuracy("lots", ["2"] * 10) == 0.0
    with pytest.raises(ValueError):
        vqa_accuracy(2, ["2"] * 9)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 4), st.lists(st.integers(0, 4), min_size=10, max_size=10), st.randoms())
def test_vqa_accuracy_matches_enumeration_and_ignores_order(pred, answers, rnd):
    answers = [str(a) for a in answers]
    value = vqa_accuracy(pred, answers)
    assert value == brute_force_accuracy(pred, answers)
    rnd.shuffle(answers)
    assert vqa_accuracy(pred, answers) == value


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert math.isclose(rmse([1, 3], [2, 5]), math.sqrt(2.5), rel_tol=1e-15)
    assert rmse([2, 3, 4], [1, 2, 3]) == 1.0
    with pytest.raises(ValueError):
        rmse([], [])
    with pytest.raises(ValueError):
        rmse([1], [1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=30))
def test_rmse_bounds_mean_error(pairs):
    p, g = zip(*pairs)
    assert rmse(p, g) >= abs(np.mean(np.subtract(p, g))) - 1e-12


# --- grounding quality --------------------------------------------------------


def _labelled_scene(boxes, gt_boxes, gt_labels, image_id="m"):
    boxes = np.asarray(boxes, float).reshape(-1, 4)
    return SceneRecord(image_id, 10.0, 10.0, boxes, np.zeros((len(boxes), 2)),
                       gt_boxes=np.asarray(gt_boxes, float).reshape(-1, 4), gt_labels=np.asarray(gt_labels))


EMB = np.array([[1.0, 0.0, 0.0], [0.6, 0.8, 0.0], [0.0, 0.0, 3.0]])


def test_proposal_categories():
    s = _labelled_scene([[0, 0, 2, 2], [0, 0, 2, 1.2], [5, 5, 6, 6], [0, 0, 2, 1]], [[0, 0, 2, 2], [5, 5, 6, 6]], [2, 0])
    # IoU exactly 0.5 is background
    assert proposal_categories(s).tolist() == [2, 2, 0, BACKGROUND]


def test_similarity_table():
    sim = similarity_table(EMB)
    assert np.all(np.diag(sim) == 1.0) and math.isclose(sim[0, 1], 0.6)
    with pytest.raises(ValueError):
        similarity_table([[0.0, 0.0]])


def test_grounding_quality_examples():
    s = _labelled_scene([[0, 0, 1, 1], [5, 5, 6, 6], [2, 2, 3, 3]], [[0, 0, 1, 1], [2, 2, 3, 3]], [0, 1])
    on_q = grounding_quality(lambda sc, q: np.array([1.0, 0, 0]) if q == 0 else np.array([0, 0, 1.0]), [s], EMB)
    assert on_q == {0: 1.0, 1: 1.0, 2: None}
    background = grounding_quality(lambda sc, q: np.array([0, 2.0, 0]), [s], EMB)
    assert background[0] == 0.0 and background[1] == 0.0
    half = grounding_quality(lambda sc, q: np.array([1.0, 1.0, 0]), [s], EMB, categories=[0])
    assert half == {0: 0.5}
    neighbour = grounding_quality(lambda sc, q: np.array([0, 0, 1.0]), [s], EMB, categories=[0])
    assert math.isclose(neighbour[0], 0.6)
    nothing = grounding_quality(lambda sc, q: np.zeros(3), [s], EMB, categories=[0])
    assert nothing == {0: None}


def test_grounding_quality_normalises_by_net_count_across_images():
    a = _labelled_scene([[0, 0, 1, 1], [5, 5, 6, 6]], [[0, 0, 1, 1]], [0], "a")
    b = _labelled_scene([[5, 5, 6, 6]], [[0, 0, 1, 1]], [0], "b")
    w = {"a": np.array([3.0, 0.0]), "b": np.array([1.0])}
    assert grounding_quality(lambda sc, q: w[sc.image_id], [a, b], EMB, [0]) == {0: 0.75}


def test_grounding_quality_rejects_bad_inputs():
    s = _labelled_scene([[0, 0, 1, 1]], [[0, 0, 1, 1]], [5])
    with pytest.raises(ValueError):
        grounding_quality(lambda sc, q: np.ones(1), [s], EMB)
    s = _labelled_scene([[0, 0, 1, 1]], [[0, 0, 1, 1]], [0])
    with pytest.raises(ValueError):
        grounding_quality(lambda sc, q: np.ones(2), [s], EMB)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_grounding_quality_bounded_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n_gt = rng.integers(1, 4)
    xy = rng.uniform(0, 8, size=(n_gt, 2))
    gt = np.concatenate([xy, xy + 1.5], axis=1)
    props = np.concatenate([gt + rng.uniform(-0.4, 0.4, size=gt.shape), [[0, 0, 0.5, 0.5]]])
    labels = rng.integers(0, 3, size=n_gt)
    emb = rng.normal(size=(3, 4))
    w = rng.uniform(0, 1, size=len(props))
    s = _labelled_scene(props, gt, labels)
    base = grounding_quality(lambda sc, q: w, [s], emb)
    perm = rng.permutation(len(props))
    moved = grounding_quality(lambda sc, q: w[perm], [_labelled_scene(props[perm], gt, labels)], emb)
    for q, v in base.items():
        if v is None:
            assert moved[q] is None
        else:
            assert -1 - 1e-12 <= v <= 1 + 1e-12 and math.isclose(v, moved[q], abs_tol=1e-12)


def test_paired_t_test():
    t, p, n = paired_t_test({"a": 0.9, "b": 0.8, "c": 0.7, "d": None}, {"a": 0.5, "b": 0.6, "c": 0.4, "d": 0.1})
    assert n == 3 and t > 0 and 0 < p < 1
    with pytest.raises(ValueError):
        paired_t_test({"a": 1.0}, {"a": 0.0})


# --- bins, ordinality, reports --------------------------------------------------


def _qas(counts, bins):
    return [QARecord(f"q{i}", "m", ["how"], c, [str(c)] * 10, bin=b) for i, (c, b) in enumerate(zip(counts, bins))]


def test_per_bin_report_recombines_to_totals(rng):
    counts = rng.integers(0, 6, size=40)
    bins = rng.integers(1, 7, size=40)
    preds = np.clip(counts + rng.integers(-1, 2, size=40), 0, 20)
    qas = _qas(counts, bins)
    rows = per_bin_report(preds, qas)
    report = evaluate(preds, qas)
    assert [r.bin for r in rows] == [1, 2, 3, 4, 5, 6] and sum(r.n for r in rows) == 40
    filled = [r for r in rows if r.n]
    assert math.isclose(sum(r.accuracy * r.n for r in filled) / 40, report.accuracy, rel_tol=1e-12)
    assert math.isclose(math.sqrt(sum(r.sq_error for r in filled) / 40), report.rmse, rel_tol=1e-12)


def test_per_bin_single_bin():
    rows = per_bin_report([1, 2], _qas([1, 3], [4, 4]))
    assert [r.n for r in rows] == [0, 0, 0, 2, 0, 0]
    assert rows[3].accuracy == 0.5 and rows[0].accuracy is None and rows[0].rmse is None


def test_ordinality_gap():
    p = np.zeros((3, 21))
    p[0, [2, 3]] = [0.6, 0.4]
    p[1, 7] = 1.0
    p[2, [8, 15]] = [0.5, 0.5]
    o = ordinality_gap(p)
    assert o.top1.tolist() == [2, 7, 8] and o.top2.tolist() == [3, 0, 15]
    assert o.gap.tolist() == [1, 7, 7]
    assert o.cdf_small[0] == 1.0 and o.cdf_large[5] == 0.0 and o.cdf_large[6] == 1.0
    assert np.all(np.isnan(ordinality_gap(p[1:]).cdf_small))
    with pytest.raises(ValueError):
        ordinality_gap(np.ones((2, 20)) / 20)


def test_ordinality_peaked_versus_flat():
    peaked = np.zeros((50, 21))
    flat = np.zeros((50, 21))
    rng = np.random.default_rng(0)
    for i in range(50):
        c = rng.integers(1, 4)
        peaked[i] = np.exp(-2.0 * np.abs(np.arange(21) - c) - 0.01 * np.arange(21))
        flat[i] = rng.uniform(0.9, 1.0, size=21)
        flat[i, c] = 2.0
    a, b = ordinality_gap(peaked), ordinality_gap(flat)
    assert a.cdf_small[0] == 1.0
    assert np.all(a.cdf_small >= b.cdf_small) and b.cdf_small[0] < 0.5


def test_report_rows_and_csv(tmp_path):
    qas = _qas([1, 2], [1, 6])
    report = evaluate([1, 3], qas, grounding={"dog": 0.5, "cat": None}, probs=np.eye(21)[[1, 3]])
    assert isinstance(report, MetricReport)
    rows = report.rows("dev", "updown")
    path = tmp_path / "m.csv"
    write_metrics_csv(path, rows)
    write_metrics_csv(path, [("dev", "updown", "extra", "all", 1.0, 1)], append=True)
    with open(path) as f:
        got = list(csv.DictReader(f))
    assert got[0] == {"split": "dev", "model": "updown", "metric": "accuracy", "group": "all", "value": "0.5", "n": "2"}
    cat = [r for r in got if r["group"] == "cat"][0]
    assert cat["value"] == "UNDEFINED"
    assert got[-1]["metric"] == "extra"
    assert not any(r["metric"] == "gap_cdf_large" for r in got)
    with pytest.raises(ValueError):
        evaluate([], [])
