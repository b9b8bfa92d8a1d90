"""Synthetic counting scenes with duplicate proposals.

Each scene holds a handful of true objects drawn from a small category set.
Some true objects receive a duplicate proposal: a shifted copy of the box
whose IoU with the original is drawn from ``duplicate_iou``.  Duplicates do
not add to the count, so a counter has to suppress them.

Features mimic pooled detector features: a category code plus a colour code
plus Gaussian noise, scaled so single coordinates are of order one.  A proposal that only partly covers its object pools a
proportionally weaker object signal mixed with background, with evidence
``IoU ** evidence_power``.  Everything is stored at float32 precision so a
round trip through the feature container is exact.
"""
from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import iou, pairwise_iou
from .records import NO_LABEL, QARecord, SceneRecord

CATEGORY_WORDS = ["square", "circle", "triangle", "star", "hexagon", "diamond", "cross", "ring"]
COLOR_WORDS = ["red", "green", "blue", "yellow", "purple", "orange"]


@dataclass
class SynthConfig:
    n_categories: int = 3
    n_colors: int = 3
    max_per_category: int = 4
    duplicate_rate: float = 0.5
    duplicate_iou: tuple = (0.6, 0.9)
    distractor_rate: float = 0.2
    max_distractors: int = 3
    zero_count_rate: float = 0.15
    feature_dim: int = 64
    noise_scale: float = 0.05
    feature_scale: float = 8.0
    evidence_power: float = 2.0
    min_size: float = 0.08
    max_size: float = 0.18
    max_true_iou: float = 0.2
    seed: int = 0

    def __post_init__(self):
        self.duplicate_iou = tuple(float(x) for x in self.duplicate_iou)
        for name in ("duplicate_rate", "distractor_rate", "zero_count_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        lo, hi = self.duplicate_iou
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(f"duplicate_iou must satisfy 0 < lo <= hi < 1, got {self.duplicate_iou}")
        if not 1 <= self.n_categories <= len(CATEGORY_WORDS):
            raise ValueError(f"n_categories must be in 1..{len(CATEGORY_WORDS)}")
        if not 1 <= self.n_colors <= len(COLOR_WORDS):
            raise ValueError(f"n_colors must be in 1..{len(COLOR_WORDS)}")
        if self.n_categories * self.max_per_category > 20:
            raise ValueError("scenes may not hold more than 20 true objects")
        if self.feature_dim < self.n_categories + self.n_colors + 3:
            raise ValueError("feature_dim too small for the code vectors")

    def to_dict(self):
        d = asdict(self)
        d["duplicate_iou"] = list(self.duplicate_iou)
        return d

    @property
    def categories(self):
        return CATEGORY_WORDS[: self.n_categories]

    @property
    def colors(self):
        return COLOR_WORDS[: self.n_colors]


def plural(word):
    return word + "es" if word.endswith(("s", "x", "sh", "ch")) else word + "s"


def _f32(x):
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def code_vectors(cfg: SynthConfig):
    """Orthonormal code vectors: categories, colours, background, clutter (x2)."""
    rng = np.random.default_rng([cfg.seed, 0xC0DE])
    k = cfg.n_categories + cfg.n_colors + 3
    q, _ = np.linalg.qr(rng.normal(size=(cfg.feature_dim, k)))
    q = q.T
    return {
        "category": q[: cfg.n_categories],
        "color": q[cfg.n_categories : cfg.n_categories + cfg.n_colors],
        "background": q[-3],
        "clutter": q[-2:],
    }


def scene_rng(cfg: SynthConfig, image_id: str):
    return np.random.default_rng([cfg.seed, zlib.crc32(image_id.encode("utf-8"))])


def _place_boxes(cfg, rng, n):
    boxes = []
    margin = 0.05
    attempts = 0
    while len(boxes) < n:
        attempts += 1
        if attempts > 10000:
            raise RuntimeError("could not place non-overlapping objects; lower max_per_category")
        w, h = rng.uniform(cfg.min_size, cfg.max_size, size=2)
        x1 = rng.uniform(margin, 1 - margin - w)
        y1 = rng.uniform(margin, 1 - margin - h)
        b = np.array([x1, y1, x1 + w, y1 + h])
        if boxes and np.max(pairwise_iou(b[None], np.array(boxes))) > cfg.max_true_iou:
            continue
        boxes.append(b)
    return np.array(boxes).reshape(-1, 4)


def duplicate_box(box, target_iou, rng):
    """Shift ``box`` along one axis so that IoU(box, shifted) == target_iou exactly."""
    x1, y1, x2, y2 = box
    axis = rng.integers(2)
    sign = rng.choice([-1.0, 1.0])
    size = (x2 - x1) if axis == 0 else (y2 - y1)
    d = size * (1 - target_iou) / (1 + target_iou)
    lo, hi = (x1, x2) if axis == 0 else (y1, y2)
    if lo + sign * d < 0 or hi + sign * d > 1:
        sign = -sign
    out = np.array(box, dtype=np.float64)
    out[[axis, axis + 2]] += sign * d
    return out


def generate_synthetic_scene(cfg: SynthConfig, rng, image_id="scene"):
    codes = code_vectors(cfg)
    per_cat = rng.integers(0, cfg.max_per_category + 1, size=cfg.n_categories)
    gt_labels = np.repeat(np.arange(cfg.n_categories), per_cat)
    gt_colors = rng.integers(0, cfg.n_colors, size=len(gt_labels))
    # float32 first so IoUs and containment are evaluated on stored values
    gt_boxes = _f32(_place_boxes(cfg, rng, len(gt_labels)))

    boxes, labels, dup_of, strength, colors, kinds = [], [], [], [], [], []
    for i, (b, lab, col) in enumerate(zip(gt_boxes, gt_labels, gt_colors)):
        boxes.append(b)
        labels.append(lab)
        dup_of.append(-1)
        strength.append(1.0)
        colors.append(col)
        kinds.append(lab)
    lo, hi = cfg.duplicate_iou
    for i, (b, lab, col) in enumerate(zip(gt_boxes, gt_labels, gt_colors)):
        if rng.random() < cfg.duplicate_rate:
            target = rng.uniform(lo, hi)
            db = _f32(duplicate_box(b, target, rng))
            boxes.append(db)
            labels.append(lab)
            dup_of.append(i)
            strength.append(iou(b, db) ** cfg.evidence_power)
            colors.append(col)
            kinds.append(lab)
    n_clutter = rng.binomial(cfg.max_distractors, cfg.distractor_rate)
    for _ in range(n_clutter):
        w, h = rng.uniform(cfg.min_size, cfg.max_size, size=2)
        x1, y1 = rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h)
        boxes.append(_f32([x1, y1, x1 + w, y1 + h]))
        labels.append(NO_LABEL)
        dup_of.append(-1)
        strength.append(1.0)
        colors.append(rng.integers(0, cfg.n_colors))
        kinds.append(-1 - rng.integers(0, 2))

    n = len(boxes)
    order = rng.permutation(n)
    feats = np.zeros((n, cfg.feature_dim))
    for k in range(n):
        kind = kinds[k]
        obj = codes["category"][kind] if kind >= 0 else codes["clutter"][-1 - kind]
        obj = obj + 0.5 * codes["color"][colors[k]]
        f = strength[k]
        feats[k] = f * obj + (1.0 - f) * codes["background"]
    feats += rng.normal(0.0, cfg.noise_scale, size=feats.shape)
    feats *= cfg.feature_scale

    inverse = np.argsort(order)
    dup_arr = np.array(dup_of, dtype=np.int64)
    # duplicate_of refers to proposal indices after shuffling
    dup_arr = np.where(dup_arr >= 0, inverse[np.clip(dup_arr, 0, None)], -1)
    captions = [
        (["a", cfg.colors[c], cfg.categories[lab]], gt_boxes[i]) for i, (lab, c) in enumerate(zip(gt_labels, gt_colors))
    ]
    return SceneRecord(
        image_id=image_id,
        width=1.0,
        height=1.0,
        boxes=np.array(boxes).reshape(-1, 4)[order],
        features=_f32(feats[order]),
        labels=np.array(labels, dtype=np.int64)[order],
        gt_boxes=gt_boxes,
        gt_labels=gt_labels,
        duplicate_of=dup_arr[order],
        captions=captions,
    )


def question_tokens(category_word):
    return ["how", "many", plural(category_word), "are", "there"]


def generate_synthetic_qa(scene: SceneRecord, cfg: SynthConfig, rng, question_id=None):
    """Templated counting question about one category of ``scene``.

    The answer counts true objects only; duplicates and clutter never count.
    """
    counts = np.bincount(scene.gt_labels, minlength=cfg.n_categories) if scene.gt_labels is not None else np.zeros(cfg.n_categories, int)
    present = np.flatnonzero(counts > 0)
    absent = np.flatnonzero(counts == 0)
    want_zero = rng.random() < cfg.zero_count_rate
    pool = absent if (want_zero and len(absent)) or not len(present) else present
    cat = int(rng.choice(pool))
    word = cfg.categories[cat]
    tokens = question_tokens(word)
    count = int(counts[cat])
    return QARecord(
        question_id=question_id or f"{scene.image_id}-q",
        image_id=scene.image_id,
        tokens=tokens,
        count=count,
        answers=[str(count)] * 10,
        subject=word,
        question=" ".join(tokens) + "?",
        category=cat,
    )


def generate_split(cfg: SynthConfig, n_scenes: int, split: str):
    """``n_scenes`` scenes with one question each.  Pure function of (cfg, split)."""
    scenes, qas = [], []
    for i in range(n_scenes):
        image_id = f"{split}-{i:06d}"
        rng = scene_rng(cfg, image_id)
        scene = generate_synthetic_scene(cfg, rng, image_id)
        scenes.append(scene)
        qas.append(generate_synthetic_qa(scene, cfg, rng, question_id=f"{image_id}-q0"))
    return scenes, qas
