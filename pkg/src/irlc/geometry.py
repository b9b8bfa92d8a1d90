"""Axis-aligned box arithmetic.  A box is ``[x1, y1, x2, y2]`` with x1 <= x2, y1 <= y2."""
from __future__ import annotations

import numpy as np


def _check(box):
    box = np.asarray(box, dtype=np.float64)
    if box.shape[-1] != 4:
        raise ValueError(f"boxes need 4 coordinates, got shape {box.shape}")
    if np.any(box[..., 2] < box[..., 0]) or np.any(box[..., 3] < box[..., 1]):
        raise ValueError("invalid box: x2 < x1 or y2 < y1")
    return box


def area(box):
    box = _check(box)
    return (box[..., 2] - box[..., 0]) * (box[..., 3] - box[..., 1])


def intersection(a, b):
    a, b = _check(a), _check(b)
    w = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    h = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    return np.clip(w, 0, None) * np.clip(h, 0, None)


def _safe_ratio(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def iou(a, b):
    """Intersection over union; 0 when the union is empty.  Broadcasts."""
    inter = intersection(a, b)
    out = _safe_ratio(inter, area(a) + area(b) - inter)
    return float(out) if out.ndim == 0 else out


def overlap_frac(a, b):
    """Fraction of ``a`` covered by ``b``; 0 when ``a`` has no area."""
    out = _safe_ratio(intersection(a, b), area(a))
    return float(out) if out.ndim == 0 else out


def pairwise_iou(boxes_a, boxes_b):
    a = _check(boxes_a)[:, None, :]
    b = _check(boxes_b)[None, :, :]
    return np.asarray(iou(a, b)).reshape(len(boxes_a), len(boxes_b))


def pair_features(a, b, width=1.0, height=1.0):
    """``[a(4), b(4), IoU(a,b), O(a,b), O(b,a)]`` with coordinates scaled to [0, 1]."""
    if width <= 0 or height <= 0:
        raise ValueError("image width and height must be positive")
    a, b = _check(a), _check(b)
    scale = np.array([width, height, width, height])
    return np.concatenate([a / scale, b / scale, [iou(a, b), overlap_frac(a, b), overlap_frac(b, a)]])


def pair_feature_grid(boxes, width=1.0, height=1.0):
    """All ordered pairs at once: returns ``[N, N, 11]`` with entry (i, j) = pair_features(b_i, b_j)."""
    if width <= 0 or height <= 0:
        raise ValueError("image width and height must be positive")
    boxes = _check(np.asarray(boxes, dtype=np.float64).reshape(-1, 4))
    n = len(boxes)
    norm = boxes / np.array([width, height, width, height])
    bi = np.broadcast_to(norm[:, None, :], (n, n, 4))
    bj = np.broadcast_to(norm[None, :, :], (n, n, 4))
    inter = intersection(boxes[:, None, :], boxes[None, :, :])
    ar = area(boxes)
    union = ar[:, None] + ar[None, :] - inter
    stats = np.stack(
        [_safe_ratio(inter, union), _safe_ratio(inter, ar[:, None]), _safe_ratio(inter, ar[None, :])], axis=-1
    )
    return np.concatenate([bi, bj, stats], axis=-1)
