"""Training runs: data loading, model construction, the epoch loop with
schedules, early stopping and checkpointing, and the penalty-weight sweep."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .batching import PairCache, make_batch
from .config import RunConfig
from .core import checkpoint
from .core.optim import AdamState, ExponentialDecay, PlateauDecay, adam_step
from .core.tensor import backward
from .counters import IRLC, MODELS, Guess1, ModelDims
from .data.features import read_features
from .data.howmany import frequency_bins
from .data.io import attach_scene_meta, read_qa
from .data.synthetic import generate_split
from .grounding import grounding_batch_loss
from .language import Vocabulary, load_glove
from .metrics import question_accuracy, rmse

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
LOG_COLUMNS = ("epoch", "lr", "train_loss", "train_accuracy", "dev_accuracy", "dev_rmse", "best")


class TrainingError(RuntimeError):
    pass


@dataclass
class Dataset:
    scenes: dict
    splits: dict
    categories: list | None = None


def _assign_bins(splits):
    train = splits.get("train") or []
    if not train:
        return
    subjects = [qa.subject for qa in train]
    for qas in splits.values():
        if qas and all(qa.bin == 0 for qa in qas):
            for qa, b in zip(qas, frequency_bins(subjects, [qa.subject for qa in qas])):
                qa.bin = int(b)


def load_data(cfg: RunConfig) -> Dataset:
    """Scenes and QA splits for ``cfg``, generated or read from ``cfg.data_dir``."""
    if cfg.data == "synthetic":
        sc = cfg.synth_config()
        scenes, splits = {}, {}
        for split, n in (("train", cfg.n_train), ("dev", cfg.n_dev), ("test", cfg.n_test)):
            if n == 0:
                continue
            s, q = generate_split(sc, n, split)
            scenes.update((x.image_id, x) for x in s)
            splits[split] = q
        _assign_bins(splits)
        return Dataset(scenes, splits, list(sc.categories))

    root = cfg.data_dir
    feat_path = os.path.join(root, "features.bin")
    if not os.path.exists(feat_path):
        raise FileNotFoundError(f"no feature container at {feat_path}")
    scenes = {s.image_id: s for s in read_features(feat_path)}
    meta = os.path.join(root, "scenes.jsonl")
    if os.path.exists(meta):
        attach_scene_meta(meta, scenes)
    splits = {}
    for split in SPLITS:
        path = os.path.join(root, f"{split}.jsonl")
        if os.path.exists(path):
            qas = read_qa(path)
            missing = sorted({qa.image_id for qa in qas} - set(scenes))
            if missing:
                raise ValueError(f"{path}: {len(missing)} questions refer to images without features, e.g. {missing[0]}")
            splits[split] = qas
    _assign_bins(splits)
    categories = None
    cat_path = os.path.join(root, "categories.json")
    if os.path.exists(cat_path):
        with open(cat_path, encoding="utf-8") as f:
            categories = json.load(f)
    return Dataset(scenes, splits, categories)


def build_vocab(data: Dataset):
    tokens = [qa.tokens for qa in data.splits.get("train", [])]
    train_images = {qa.image_id for qa in data.splits.get("train", [])}
    for image_id in sorted(train_images):
        tokens += [list(t) for t, _ in data.scenes[image_id].captions]
    return Vocabulary.build(tokens)


def model_dims(cfg: RunConfig):
    return ModelDims(cfg.d_emb, cfg.d_hid, cfg.n_score, cfg.d_v, cfg.rho_hidden, cfg.dropout)


def build_model(cfg: RunConfig, vocab):
    if cfg.model == "guess1":
        return Guess1()
    glove = load_glove(cfg.glove, vocab) if cfg.glove else None
    cls = MODELS[cfg.model]
    # the question-only baseline has no scorer for captions to train
    grounding = cfg.grounding and cls.uses_image
    kwargs = {}
    if cls is IRLC:
        kwargs = dict(n_samples=cfg.n_samples, entropy_weight=cfg.entropy_weight,
                      interaction_weight=cfg.interaction_weight)
    return cls(vocab, model_dims(cfg), seed=cfg.seed, glove=glove, grounding=grounding, **kwargs)


def model_state(model):
    if isinstance(model, Guess1):
        return {"guess1.mode": np.array(float(model.mode))}
    return model.store.state()


def load_model_state(model, state):
    if isinstance(model, Guess1):
        if set(state) != {"guess1.mode"}:
            raise ValueError("checkpoint does not hold a Guess1 model")
        model.mode = int(state["guess1.mode"])
    else:
        model.store.load_state(state)


def batches(qas, size):
    for i in range(0, len(qas), size):
        yield i // size, qas[i : i + size]


def predict(model, qas, data: Dataset, vocab, cfg: RunConfig, cache=None):
    if not qas:
        raise ValueError("cannot predict on an empty split")
    out = []
    for _, chunk in batches(qas, cfg.eval_batch_size):
        b = make_batch(chunk, data.scenes, vocab, cfg.d_v, model.needs_pairs, cache)
        out.extend(model.predict(b))
    return out


def split_scores(preds, qas):
    counts = [p.count for p in preds]
    acc = float(np.mean([question_accuracy(c, qa) for c, qa in zip(counts, qas)]))
    return acc, rmse(counts, [qa.count for qa in qas])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_manifest(out_dir, extra=None):
    """``manifest.json`` listing every file under ``out_dir`` with size and SHA-256."""
    entries = []
    for root, _, files in os.walk(out_dir):
        for name in sorted(files):
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out_dir)
            if rel == "manifest.json":
                continue
            with open(path, "rb") as f:
                digest = hashlib.sha256(f.read()).hexdigest()
            entries.append({"path": rel, "bytes": os.path.getsize(path), "sha256": digest})
    entries.sort(key=lambda e: e["path"])
    body = {"files": entries, **(extra or {})}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(body, f, indent=2)
        f.write("\n")
    return body


@dataclass
class TrainResult:
    out: str
    best_epoch: int
    best_dev_accuracy: float
    best_dev_rmse: float
    epochs_run: int
    seconds: float
    model: object = None
    vocab: object = None
    data: Dataset | None = None


def batch_loss(model, b, data, cfg, rng):
    """Counting loss plus ``grounding_weight`` times the caption loss when grounding is on.

    ``info`` carries the two parts under ``"counting"`` and ``"grounding"``.
    """
    loss, info = model.loss(b, rng)
    info["counting"], info["grounding"] = loss, None
    if model.grounder is not None and cfg.grounding_weight > 0:
        g = grounding_batch_loss(model.grounder, b.scenes, data.scenes, rng, cfg.grounding_images)
        if g is not None:
            info["grounding"] = g
            loss = loss + cfg.grounding_weight * g
    return loss, info


def _train_epoch(model, cfg, data, vocab, state, schedule, rng, cache, epoch):
    train = data.splits["train"]
    order = rng.permutation(len(train))
    shuffled = [train[i] for i in order]
    params = model.parameters()
    total, correct, seen = 0.0, 0.0, 0
    for bi, chunk in batches(shuffled, cfg.batch_size):
        b = make_batch(chunk, data.scenes, vocab, cfg.d_v, model.needs_pairs, cache)
        where = f"epoch {epoch}, batch {bi} (first question {chunk[0].question_id})"
        try:
            loss, info = batch_loss(model, b, data, cfg, rng)
            value = loss.item()
            if not np.isfinite(value):
                raise FloatingPointError(f"loss is {value}")
            backward(loss)
        except FloatingPointError as exc:
            raise TrainingError(f"non-finite loss at {where}: {exc}") from None
        adam_step(params, state)
        schedule.after_step()
        total += value * len(chunk)
        correct += sum(question_accuracy(int(p), qa) for p, qa in zip(info["pred"], chunk))
        seen += len(chunk)
    return total / seen, correct / seen


def cmd_train(cfg: RunConfig, data: Dataset | None = None):
    """Train ``cfg.model``; write config, vocab, best checkpoint, per-epoch log and manifest."""
    cfg = cfg.resolved().validate()
    start = time.perf_counter()
    os.makedirs(cfg.out, exist_ok=True)
    cfg.save(os.path.join(cfg.out, "config.json"))
    data = data or load_data(cfg)
    for split in ("train", "dev"):
        if not data.splits.get(split):
            raise ValueError(f"training needs a non-empty {split} split")
    vocab = build_vocab(data)
    with open(os.path.join(cfg.out, "vocab.json"), "w", encoding="utf-8") as f:
        json.dump(vocab.to_json(), f)
    model = build_model(cfg, vocab)
    dev = data.splits["dev"]
    cache = PairCache()
    ckpt_path = os.path.join(cfg.out, "best.ckpt")
    log_path = os.path.join(cfg.out, "train_log.csv")
    rows = []

    if isinstance(model, Guess1):
        model.fit(data.splits["train"])
        acc, err = split_scores(predict(model, dev, data, vocab, cfg), dev)
        rows.append((0, 0.0, 0.0, 0.0, acc, err, 1))
        checkpoint.save(ckpt_path, model_state(model))
        best_epoch, best_acc, best_rmse, epoch = 0, acc, err, 0
    else:
        rng = np.random.default_rng(cfg.seed)
        state = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        if cfg.model == "irlc":
            schedule = ExponentialDecay(state, cfg.lr_decay)
        else:
            schedule = PlateauDecay(state, cfg.lr_decay, cfg.plateau_patience)
        best_epoch, best_acc, best_rmse, stale = 0, -1.0, float("inf"), 0
        for epoch in range(1, cfg.max_epochs + 1):
            lr = state.lr
            loss, train_acc = _train_epoch(model, cfg, data, vocab, state, schedule, rng, cache, epoch)
            schedule.after_epoch(train_acc)
            acc, err = split_scores(predict(model, dev, data, vocab, cfg, cache), dev)
            improved = acc > best_acc
            if improved:
                best_epoch, best_acc, best_rmse, stale = epoch, acc, err, 0
                checkpoint.save(ckpt_path, model_state(model))
            else:
                stale += 1
            rows.append((epoch, lr, loss, train_acc, acc, err, int(improved)))
            log.info("epoch %d loss %.4f train %.3f dev %.3f rmse %.3f", epoch, loss, train_acc, acc, err)
            if stale >= cfg.patience:
                break

    with open(log_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(LOG_COLUMNS)
        w.writerows([[_fmt(v) for v in r] for r in rows])
    load_model_state(model, checkpoint.load(ckpt_path))
    seconds = time.perf_counter() - start
    with open(os.path.join(cfg.out, "run.json"), "w", encoding="utf-8") as f:
        summary = {"best_epoch": best_epoch, "best_dev_accuracy": best_acc, "best_dev_rmse": best_rmse,
                   "epochs_run": epoch, "seconds": seconds}
        if isinstance(model, Guess1):
            summary["mode"] = model.mode
        json.dump(summary, f, indent=2)
    write_manifest(cfg.out, {"command": "train"})
    return TrainResult(cfg.out, best_epoch, best_acc, best_rmse, epoch, seconds, model, vocab, data)


SWEEP_COLUMNS = ("entropy_weight", "interaction_weight", "dev_accuracy", "dev_rmse", "best_epoch")


def cmd_sweep(cfg: RunConfig, entropy_weights, interaction_weights, data: Dataset | None = None):
    """Train IRLC once per (entropy weight, interaction weight) cell; write ``grid.csv``."""
    cfg = replace(cfg, model="irlc").resolved().validate()
    os.makedirs(cfg.out, exist_ok=True)
    data = data or load_data(cfg)
    rows = []
    for i, ew in enumerate(entropy_weights):
        for j, iw in enumerate(interaction_weights):
            cell = replace(cfg, entropy_weight=float(ew), interaction_weight=float(iw),
                           out=os.path.join(cfg.out, f"cell-{i}-{j}"))
            res = cmd_train(cell, data)
            rows.append((float(ew), float(iw), res.best_dev_accuracy, res.best_dev_rmse, res.best_epoch))
    with open(os.path.join(cfg.out, "grid.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SWEEP_COLUMNS)
        w.writerows([[_fmt(v) for v in r] for r in rows])
    cfg.save(os.path.join(cfg.out, "config.json"))
    write_manifest(cfg.out, {"command": "sweep"})
    return rows
