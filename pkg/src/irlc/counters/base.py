from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core.layers import ParamStore, dropout
from ..grounding import CaptionGrounding
from ..language import LanguageModule

MAX_COUNT = 20
N_CLASSES = MAX_COUNT + 1


@dataclass
class ModelDims:
    d_emb: int = 32
    d_hid: int = 64
    n_score: int = 64
    d_v: int = 64
    rho_hidden: int = 64
    dropout: float = 0.3

    def to_dict(self):
        return asdict(self)


@dataclass
class CountPrediction:
    """A count plus the per-object weights that ground it.

    ``weights`` are sigmoid values (SoftCount), attention (UpDown) or 0/1
    selections (IRLC).  ``probs`` is the count distribution for UpDown.
    """

    count: int
    weights: np.ndarray
    probs: np.ndarray | None = None
    raw: float | None = None
    order: list | None = None


def round_count(raw):
    """Round half up, then clamp to [0, 20]."""
    return np.clip(np.floor(np.asarray(raw, dtype=np.float64) + 0.5), 0, MAX_COUNT).astype(np.int64)


class CountingModel:
    """Shared question encoder + scorer with a model-specific counting head."""

    kind = "base"
    needs_pairs = False
    uses_image = True

    def __init__(self, vocab, dims: ModelDims, seed=0, glove=None, grounding=False):
        self.vocab = vocab
        self.dims = dims
        self.store = ParamStore(np.random.default_rng(seed))
        self.lang = LanguageModule(
            self.store, vocab, dims.d_emb, dims.d_hid, dims.d_v, dims.n_score if self.uses_image else 0, glove
        )
        self.build_head()
        self.grounder = CaptionGrounding(self.store, self.lang) if grounding else None

    def build_head(self):
        raise NotImplementedError

    def parameters(self):
        return list(self.store)

    def encode(self, batch, training=False, rng=None):
        """Question encodings [B, d_hid] and object scores [B, N, n], dropout applied when training."""
        q = self.lang.encode(batch.token_ids, batch.lengths)
        q = dropout(q, self.dims.dropout, training, rng)
        if not self.uses_image:
            return q, None
        s = self.lang.score(q, batch.features)
        s = dropout(s, self.dims.dropout, training, rng)
        return q, s

    def loss(self, batch, rng):
        """Training loss for a batch -> ``(loss_tensor, {"pred": train-time counts})``."""
        raise NotImplementedError

    def predict(self, batch):
        raise NotImplementedError
