"""Caption grounding: pick the proposal a region caption describes.

Captions are encoded by their own LSTM but scored against proposals with the
counting model's scorer, so gradients from this task move the shared
weights.  Each caption is first assigned to the proposal with the largest
IoU against its region; captions whose best IoU is below 0.5 are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import tensor as T
from .core.layers import LSTM, Affine, softmax_cross_entropy
from .geometry import pairwise_iou
from .language import pad_tokens

UNASSIGNED = -1
MIN_IOU = 0.5
IMAGES_PER_BATCH = 4
LOSS_WEIGHT = 0.1


@dataclass
class CaptionRecord:
    tokens: list
    box: np.ndarray
    image_id: str = ""
    assigned: int = UNASSIGNED


def assign_caption(caption_box, scene):
    """Index of the highest-IoU proposal if that IoU >= 0.5, else UNASSIGNED."""
    if scene.n == 0:
        return UNASSIGNED
    ious = pairwise_iou(np.asarray(caption_box, dtype=np.float64).reshape(1, 4), scene.boxes)[0]
    best = int(np.argmax(ious))  # first maximum, so ties go to the smaller index
    return best if ious[best] >= MIN_IOU else UNASSIGNED


def assigned_captions(scene):
    out = []
    for tokens, box in scene.captions:
        idx = assign_caption(box, scene)
        if idx != UNASSIGNED and tokens:
            out.append(CaptionRecord(list(tokens), np.asarray(box), scene.image_id, idx))
    return out


class CaptionGrounding:
    def __init__(self, store, lang):
        self.lang = lang
        self.caption_lstm = LSTM(store, "ground.clstm", lang.embed.table.shape[1], lang.d_hid)
        self.proj = Affine(store, "ground.proj", lang.n_score, 1)

    def encode_caption(self, tokens):
        if len(tokens) == 0:
            raise ValueError("cannot encode an empty caption")
        ids, lengths = pad_tokens([self.lang.vocab.encode(tokens)])
        return self.lang.run_lstm(self.caption_lstm, ids, lengths)[0]

    def logits(self, token_ids, lengths, features):
        """[C, L] caption ids + [C, N, d_v] features -> [C, N] proposal logits."""
        h = self.lang.run_lstm(self.caption_lstm, token_ids, lengths)
        s = self.lang.score(h, features)
        return self.proj(s)[..., 0]

    def grounding_forward(self, tokens, scene):
        """Probability over the scene's proposals that the caption describes each one."""
        if scene.n == 0:
            raise ValueError("grounding needs at least one proposal")
        ids, lengths = pad_tokens([self.lang.vocab.encode(tokens)])
        return T.softmax(self.logits(ids, lengths, scene.features[None])[0])

    def loss(self, captions, scenes):
        """Mean cross entropy over assigned captions; ``None`` when there are none."""
        captions = [c for c in captions if c.assigned != UNASSIGNED]
        if not captions:
            return None
        ids, lengths = pad_tokens([self.lang.vocab.encode(c.tokens) for c in captions])
        sc = [scenes[c.image_id] for c in captions]
        N = max(s.n for s in sc)
        feats = np.zeros((len(sc), N, self.lang.d_v))
        mask = np.zeros((len(sc), N), dtype=bool)
        for i, s in enumerate(sc):
            feats[i, : s.n] = s.features
            mask[i, : s.n] = True
        logits = self.logits(ids, lengths, feats)
        target = np.array([c.assigned for c in captions])
        return T.mean(softmax_cross_entropy(logits, target, mask=mask))


def grounding_batch_loss(grounder, batch_scenes, scenes_by_id, rng, n_images=IMAGES_PER_BATCH):
    """Grounding loss on ``n_images`` scenes drawn without replacement from the batch."""
    uniq = list({s.image_id: s for s in batch_scenes}.values())
    k = min(n_images, len(uniq))
    picked = rng.choice(len(uniq), size=k, replace=False) if k else []
    caps = [c for i in picked for c in assigned_captions(uniq[int(i)])]
    return grounder.loss(caps, scenes_by_id)
