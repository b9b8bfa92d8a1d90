"""JSON-lines files for QA records and per-scene annotations.

The feature container carries only boxes and features; labels, annotated
objects and captions travel in a ``scenes.jsonl`` sidecar keyed by image id.
"""
from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .records import QARecord


def write_qa(path, qas):
    with open(path, "w", encoding="utf-8") as f:
        for qa in qas:
            f.write(json.dumps(asdict(qa), sort_keys=True) + "\n")


def read_qa(path):
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                out.append(QARecord(**json.loads(line)))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def _list(x):
    return None if x is None else np.asarray(x).tolist()


def write_scene_meta(path, scenes):
    with open(path, "w", encoding="utf-8") as f:
        for s in scenes:
            rec = {
                "image_id": s.image_id,
                "labels": _list(s.labels),
                "gt_boxes": _list(s.gt_boxes),
                "gt_labels": _list(s.gt_labels),
                "duplicate_of": _list(s.duplicate_of),
                "captions": [[list(toks), np.asarray(box).tolist()] for toks, box in s.captions],
            }
            f.write(json.dumps(rec) + "\n")


def attach_scene_meta(path, scenes):
    """Fill label/caption fields of ``scenes`` (a list or dict by id) from a sidecar."""
    by_id = scenes if isinstance(scenes, dict) else {s.image_id: s for s in scenes}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            s = by_id.get(rec["image_id"])
            if s is None:
                continue
            if rec.get("labels") is not None:
                s.labels = np.asarray(rec["labels"], dtype=np.int64)
            if rec.get("gt_boxes") is not None:
                s.gt_boxes = np.asarray(rec["gt_boxes"], dtype=np.float64).reshape(-1, 4)
            if rec.get("gt_labels") is not None:
                s.gt_labels = np.asarray(rec["gt_labels"], dtype=np.int64)
            if rec.get("duplicate_of") is not None:
                s.duplicate_of = np.asarray(rec["duplicate_of"], dtype=np.int64)
            s.captions = [(list(t), np.asarray(b, dtype=np.float64)) for t, b in rec.get("captions", [])]
    return scenes


def read_region_captions(path):
    """Region-caption file: ``{image_id: [[text, x, y, w, h], ...]}`` as JSON.

    Returns ``{image_id: [(text, box_xyxy), ...]}``.
    """
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    out = {}
    for image_id, recs in doc.items():
        rows = []
        for i, r in enumerate(recs):
            if len(r) != 5:
                raise ValueError(f"{path}: {image_id}[{i}] needs (text, x, y, width, height)")
            text, x, y, w, h = r
            rows.append((text, np.array([x, y, x + w, y + h], dtype=np.float64)))
        out[str(image_id)] = rows
    return out
