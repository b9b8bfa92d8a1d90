"""Pad questions and scenes into dense arrays for the batched model paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import pair_feature_grid
from .language import pad_tokens

PAIR_DIM = 12  # cosine similarity + 11 geometric pair features


def pair_inputs(scene):
    """``[N, N, 12]``: normalized feature dot product then ``pair_features`` for each ordered pair."""
    v = scene.features
    norm = np.linalg.norm(v, axis=1, keepdims=True)
    vh = np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)
    cos = (vh @ vh.T)[..., None]
    return np.concatenate([cos, pair_feature_grid(scene.boxes, scene.width, scene.height)], axis=-1)


class PairCache(dict):
    def get_for(self, scene):
        grid = self.get(scene.image_id)
        if grid is None:
            grid = self[scene.image_id] = pair_inputs(scene)
        return grid


@dataclass
class Batch:
    qas: list
    scenes: list
    token_ids: np.ndarray
    lengths: np.ndarray
    features: np.ndarray
    boxes: np.ndarray
    mask: np.ndarray
    counts: np.ndarray
    pairs: np.ndarray | None = None

    def __len__(self):
        return len(self.qas)

    @property
    def n_objects(self):
        return self.mask.sum(axis=1)


def make_batch(qas, scenes, vocab, d_v, with_pairs=False, pair_cache=None):
    """``scenes`` maps image id -> SceneRecord."""
    if not qas:
        raise ValueError("empty batch")
    sc = [scenes[qa.image_id] for qa in qas]
    ids, lengths = pad_tokens([vocab.encode(qa.tokens) for qa in qas], vocab.pad_index)
    B = len(qas)
    N = max(1, max(s.n for s in sc))
    feats = np.zeros((B, N, d_v))
    boxes = np.zeros((B, N, 4))
    mask = np.zeros((B, N), dtype=bool)
    pairs = np.zeros((B, N, N, PAIR_DIM)) if with_pairs else None
    for b, s in enumerate(sc):
        if s.n and s.d_v != d_v:
            raise ValueError(f"scene {s.image_id}: feature dim {s.d_v} != model d_v {d_v}")
        feats[b, : s.n] = s.features
        boxes[b, : s.n] = s.boxes
        mask[b, : s.n] = True
        if with_pairs and s.n:
            grid = pair_cache.get_for(s) if pair_cache is not None else pair_inputs(s)
            pairs[b, : s.n, : s.n] = grid
    counts = np.array([qa.count for qa in qas], dtype=np.int64)
    return Batch(list(qas), sc, ids, lengths, feats, boxes, mask, counts, pairs)
