"""Counting metrics: VQA consensus accuracy, RMSE, grounding quality, per-bin
tables and the ordinality analysis of count distributions."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data.howmany import parse_count
from .geometry import pairwise_iou

N_ANSWERS = 10
N_CLASSES = 21
UNDEFINED = None
ASSIGN_IOU = 0.5
BACKGROUND = -1
N_FREQ_BINS = 6
CSV_COLUMNS = ("split", "model", "metric", "group", "value", "n")


def _canonical(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    return parse_count(str(x))


def vqa_accuracy(predicted, human_answers):
    """Consensus accuracy of one prediction against ten human answers.

    Each leave-one-out subset of nine answers scores ``min(k / 3, 1)`` with
    ``k`` the matching answers in that subset; the ten scores are averaged.
    Answers match when they parse to the same integer, so "2" and "two" agree.
    """
    answers = list(human_answers)
    if len(answers) != N_ANSWERS:
        raise ValueError(f"expected {N_ANSWERS} human answers, got {len(answers)}")
    pred = _canonical(predicted)
    if pred is None:
        return 0.0
    match = [_canonical(a) == pred for a in answers]
    k = sum(match)
    # integer numerator over one division keeps the result correctly rounded
    return sum(min(k - m, 3) for m in match) / (3 * N_ANSWERS)


def question_accuracy(predicted, qa):
    """Consensus accuracy when ten answers exist, exact match otherwise."""
    if qa.answers is not None and len(qa.answers) == N_ANSWERS:
        return vqa_accuracy(predicted, qa.answers)
    return float(int(predicted) == int(qa.count))


def rmse(predictions, gts):
    p = np.asarray(predictions, dtype=np.float64)
    g = np.asarray(gts, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise ValueError("rmse of an empty set")
    return float(np.sqrt(np.mean((p - g) ** 2)))


# ---------------------------------------------------------------------------
# grounding quality


def proposal_categories(scene, min_iou=ASSIGN_IOU):
    """Category of the best-overlapping labelled box per proposal; BACKGROUND when IoU <= min_iou."""
    if scene.gt_boxes is None or scene.gt_labels is None:
        raise ValueError(f"scene {scene.image_id} has no labelled boxes")
    out = np.full(scene.n, BACKGROUND, dtype=np.int64)
    if scene.n == 0 or len(scene.gt_boxes) == 0:
        return out
    ious = pairwise_iou(scene.boxes, scene.gt_boxes)
    best = np.argmax(ious, axis=1)
    hit = ious[np.arange(scene.n), best] > min_iou
    out[hit] = np.asarray(scene.gt_labels)[best[hit]]
    return out


def _unit_rows(emb):
    emb = np.asarray(emb, dtype=np.float64)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("category embeddings must be non-zero")
    return emb / norms


def similarity_table(embeddings):
    """Cosine similarities between categories; the diagonal is exactly 1."""
    e = _unit_rows(embeddings)
    sim = e @ e.T
    np.fill_diagonal(sim, 1.0)
    return sim


def grounding_quality(weight_fn, scenes, embeddings, categories=None):
    """Count-weighted semantic similarity of counted proposals to the question's category.

    ``weight_fn(scene, category)`` returns per-proposal count weights for the
    question about ``category``; it is only asked of scenes where that
    category is labelled.  ``embeddings`` has one row per category.
    Proposals not matched to a labelled box contribute a zero embedding.
    Returns ``{category: score}`` with ``UNDEFINED`` where no mass was counted.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    n_cat = emb.shape[0]
    categories = range(n_cat) if categories is None else categories
    sim = similarity_table(emb)
    num = {q: 0.0 for q in categories}
    den = {q: 0.0 for q in categories}
    for scene in scenes:
        assigned = proposal_categories(scene)
        if np.any(assigned >= n_cat):
            raise ValueError(f"scene {scene.image_id} has a label without an embedding")
        present = set(int(k) for k in scene.gt_labels)
        for q in categories:
            if q not in present:
                continue
            w = np.asarray(weight_fn(scene, q), dtype=np.float64)
            if w.shape != (scene.n,):
                raise ValueError(f"weight_fn returned shape {w.shape} for {scene.n} proposals")
            s = np.where(assigned == BACKGROUND, 0.0, sim[q, np.clip(assigned, 0, None)])
            num[q] += float(np.sum(w * s))
            den[q] += float(np.sum(w))
    return {q: (num[q] / den[q] if den[q] != 0 else UNDEFINED) for q in categories}


def paired_t_test(scores_a, scores_b):
    """Paired t-test over categories defined in both reports -> (t, p, n)."""
    keys = [k for k in scores_a if scores_a[k] is not UNDEFINED and scores_b.get(k) is not UNDEFINED]
    if len(keys) < 2:
        raise ValueError("paired t-test needs at least two shared categories")
    a = np.array([scores_a[k] for k in keys])
    b = np.array([scores_b[k] for k in keys])
    res = stats.ttest_rel(a, b)
    return float(res.statistic), float(res.pvalue), len(keys)


# ---------------------------------------------------------------------------
# per-bin and ordinality


@dataclass
class BinRow:
    bin: int
    n: int
    accuracy: float | None
    rmse: float | None
    sq_error: float = 0.0


def per_bin_report(predictions, qas, accuracies=None):
    """Accuracy and RMSE for frequency bins 1..6; empty bins report ``None``."""
    predictions = np.asarray(predictions)
    if len(predictions) != len(qas):
        raise ValueError("one prediction per question required")
    if accuracies is None:
        accuracies = [question_accuracy(p, qa) for p, qa in zip(predictions, qas)]
    accuracies = np.asarray(accuracies, dtype=np.float64)
    bins = np.array([qa.bin for qa in qas])
    gts = np.array([qa.count for qa in qas], dtype=np.float64)
    rows = []
    for b in range(1, N_FREQ_BINS + 1):
        sel = bins == b
        n = int(sel.sum())
        if n == 0:
            rows.append(BinRow(b, 0, None, None))
            continue
        sq = float(np.sum((predictions[sel] - gts[sel]) ** 2))
        rows.append(BinRow(b, n, float(accuracies[sel].mean()), float(np.sqrt(sq / n)), sq))
    return rows


@dataclass
class OrdinalityStats:
    top1: np.ndarray
    top2: np.ndarray
    gap: np.ndarray
    cdf_small: np.ndarray  # P(gap <= g) for g = 1..20, predictions below 5
    cdf_large: np.ndarray
    mean_by_prediction: dict = field(default_factory=dict)


def _cdf(gaps):
    if len(gaps) == 0:
        return np.full(N_CLASSES - 1, np.nan)
    return np.array([np.mean(gaps <= g) for g in range(1, N_CLASSES)])


def ordinality_gap(probs, small_below=5):
    """Distance between the two most probable counts of each distribution.

    Both argmaxes take the first maximum, so ties resolve to smaller counts.
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if p.shape[-1] != N_CLASSES:
        raise ValueError(f"count distributions must have {N_CLASSES} entries, got {p.shape[-1]}")
    top1 = np.argmax(p, axis=1)
    rest = p.copy()
    rest[np.arange(len(p)), top1] = -np.inf
    top2 = np.argmax(rest, axis=1)
    gap = np.abs(top1 - top2)
    small = top1 < small_below
    mean_by = {int(c): p[top1 == c].mean(axis=0) for c in np.unique(top1)}
    return OrdinalityStats(top1, top2, gap, _cdf(gap[small]), _cdf(gap[~small]), mean_by)


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    accuracy: float
    rmse: float
    n: int
    bins: list
    grounding: dict = field(default_factory=dict)
    ordinality: OrdinalityStats | None = None

    def rows(self, split, model):
        out = [
            (split, model, "accuracy", "all", self.accuracy, self.n),
            (split, model, "rmse", "all", self.rmse, self.n),
        ]
        for r in self.bins:
            out.append((split, model, "accuracy", f"bin{r.bin}", r.accuracy, r.n))
            out.append((split, model, "rmse", f"bin{r.bin}", r.rmse, r.n))
        for cat, v in self.grounding.items():
            out.append((split, model, "grounding_quality", str(cat), v, ""))
        if self.ordinality is not None:
            o = self.ordinality
            for name, cdf in (("gap_cdf_small", o.cdf_small), ("gap_cdf_large", o.cdf_large)):
                for g, v in enumerate(cdf, start=1):
                    if np.isnan(v):  # no predictions in this group
                        break
                    out.append((split, model, name, f"gap{g}", v, ""))
        return out


def evaluate(predictions, qas, grounding=None, probs=None):
    if len(qas) == 0:
        raise ValueError("cannot evaluate an empty split")
    preds = np.array([int(p) for p in predictions])
    acc = np.array([question_accuracy(p, qa) for p, qa in zip(preds, qas)])
    return MetricReport(
        accuracy=float(acc.mean()),
        rmse=rmse(preds, [qa.count for qa in qas]),
        n=len(qas),
        bins=per_bin_report(preds, qas, acc),
        grounding=dict(grounding or {}),
        ordinality=ordinality_gap(probs) if probs is not None and len(probs) else None,
    )


def _fmt(v):
    if v is None:
        return "UNDEFINED"
    if isinstance(v, float):
        return repr(v)
    return v


def write_metrics_csv(path, rows, append=False):
    """Rows of (split, model, metric, group, value, n); ``None`` values print as UNDEFINED."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if not append or fh.tell() == 0:
            w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
