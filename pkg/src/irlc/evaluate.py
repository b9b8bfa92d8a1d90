"""Evaluation runs: metrics from a trained checkpoint plus a per-question dump
of the proposals behind every count."""
from __future__ import annotations

import json
import os

import numpy as np

from .batching import PairCache, make_batch
from .config import RunConfig
from .core import checkpoint
from .core.tensor import no_grad
from .counters import IRLC
from .data.records import QARecord
from .data.synthetic import question_tokens
from .geometry import pairwise_iou
from .language import Vocabulary, load_glove
from .metrics import UNDEFINED, evaluate, grounding_quality, write_metrics_csv
from .train import Dataset, build_model, load_data, load_model_state, predict, write_manifest

GROUNDED_KINDS = ("softcount", "irlc")
DUPLICATE_IOU = 0.5


def load_run(run_dir, overrides=None):
    """Config, vocabulary and model restored from a training output directory."""
    with open(os.path.join(run_dir, "config.json"), encoding="utf-8") as f:
        values = json.load(f)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = RunConfig(**values).resolved().validate()
    with open(os.path.join(run_dir, "vocab.json"), encoding="utf-8") as f:
        vocab = Vocabulary.from_json(json.load(f))
    model = build_model(cfg, vocab)
    load_model_state(model, checkpoint.load(os.path.join(run_dir, "best.ckpt")))
    return cfg, vocab, model


def category_embeddings(categories, glove_path=None):
    """GloVe rows for the category words when available, else one-hot rows."""
    if glove_path:
        vecs = load_glove(glove_path)
        missing = [c for c in categories if c not in vecs]
        if missing:
            raise KeyError(f"no embedding for categories {missing}")
        return np.stack([vecs[c] for c in categories])
    return np.eye(len(categories))


def category_weights(model, scenes, categories, vocab, cfg, cache=None):
    """``{(image_id, category index): per-proposal count weights}`` for templated questions."""
    qas = []
    for s in scenes:
        for q in sorted(set(int(k) for k in s.gt_labels)):
            qas.append(QARecord(f"{s.image_id}-c{q}", s.image_id, question_tokens(categories[q]), 0, None, category=q))
    by_id = {s.image_id: s for s in scenes}
    weights = {}
    for i in range(0, len(qas), cfg.eval_batch_size):
        chunk = qas[i : i + cfg.eval_batch_size]
        b = make_batch(chunk, by_id, vocab, cfg.d_v, model.needs_pairs, cache)
        for qa, p in zip(chunk, model.predict(b)):
            weights[(qa.image_id, qa.category)] = p.weights
    return weights


def model_grounding_quality(model, scenes, categories, vocab, cfg, embeddings=None, cache=None):
    scenes = [s for s in scenes if s.gt_labels is not None and s.gt_boxes is not None]
    if embeddings is None:
        embeddings = category_embeddings(categories, cfg.glove)
    w = category_weights(model, scenes, categories, vocab, cfg, cache)
    scores = grounding_quality(lambda s, q: w[(s.image_id, q)], scenes, embeddings)
    return {categories[q]: v for q, v in scores.items()}


def duplicate_interactions(model: IRLC, qas, data: Dataset, vocab, cfg, cache=None, min_iou=DUPLICATE_IOU):
    """Interaction values from each greedily selected proposal to its same-category
    high-IoU partners.  Returns ``(mean, n_pairs)``; the mean is ``None`` without pairs."""
    values = []
    for i in range(0, len(qas), cfg.eval_batch_size):
        chunk = qas[i : i + cfg.eval_batch_size]
        b = make_batch(chunk, data.scenes, vocab, cfg.d_v, True, cache)
        acts, _, _, rho = model.rollouts(b)
        for r, scene in enumerate(b.scenes):
            if scene.labels is None or scene.n < 2:
                continue
            ious = pairwise_iou(scene.boxes, scene.boxes)
            for a in acts[r]:
                if not 0 <= a < scene.n or scene.labels[a] < 0:
                    continue
                partners = (scene.labels == scene.labels[a]) & (ious[a] >= min_iou)
                partners[a] = False
                values.extend(rho[r, a, : scene.n][partners].tolist())
    if not values:
        return None, 0
    return float(np.mean(values)), len(values)


def _dump_record(qa, pred, scene):
    rec = {
        "question_id": qa.question_id,
        "image_id": qa.image_id,
        "question": qa.question or " ".join(qa.tokens),
        "gt": int(qa.count),
        "prediction": int(pred.count),
        "weights": [float(x) for x in pred.weights],
        "boxes": np.asarray(scene.boxes).tolist(),
    }
    if pred.order is not None:
        rec["counted"] = [int(i) for i in pred.order]
    if pred.probs is not None:
        rec["probs"] = [float(x) for x in pred.probs]
    return rec


def cmd_eval(run_dir, split="dev", out=None, overrides=None, data: Dataset | None = None):
    """Metrics CSV and per-question JSON-lines dump for ``split`` under ``out``."""
    cfg, vocab, model = load_run(run_dir, overrides)
    out = out or os.path.join(run_dir, f"eval-{split}")
    data = data or load_data(cfg)
    qas = data.splits.get(split) or []
    if not qas:
        raise ValueError(f"split {split!r} is empty or missing")
    os.makedirs(out, exist_ok=True)
    cache = PairCache()
    with no_grad():
        preds = predict(model, qas, data, vocab, cfg, cache)
        grounding = {}
        if cfg.model in GROUNDED_KINDS and data.categories:
            scenes = [data.scenes[i] for i in sorted({qa.image_id for qa in qas})]
            grounding = model_grounding_quality(model, scenes, data.categories, vocab, cfg, cache=cache)
        probs = [p.probs for p in preds if p.probs is not None]
        report = evaluate([p.count for p in preds], qas, grounding, np.array(probs) if probs else None)
        rows = report.rows(split, cfg.model)
        if isinstance(model, IRLC):
            mean_rho, n_pairs = duplicate_interactions(model, qas, data, vocab, cfg, cache)
            rows.append((split, cfg.model, "duplicate_rho", "all", mean_rho if n_pairs else UNDEFINED, n_pairs))
    write_metrics_csv(os.path.join(out, "metrics.csv"), rows)
    with open(os.path.join(out, "predictions.jsonl"), "w", encoding="utf-8") as f:
        for qa, p in zip(qas, preds):
            f.write(json.dumps(_dump_record(qa, p, data.scenes[qa.image_id])) + "\n")
    write_manifest(out, {"command": "eval", "run": os.path.abspath(run_dir), "split": split})
    return report, rows
