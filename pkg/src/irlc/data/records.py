from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNKNOWN_SUBJECT = "UNKNOWN"
NO_LABEL = -1


@dataclass
class SceneRecord:
    """Detected objects of one image.

    ``labels`` holds the category index of each proposal (``NO_LABEL`` for
    clutter); ``gt_boxes``/``gt_labels`` are the annotated objects, used for
    grounding quality.  Captions are ``(tokens, box)`` pairs.
    """

    image_id: str
    width: float
    height: float
    boxes: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    gt_boxes: np.ndarray | None = None
    gt_labels: np.ndarray | None = None
    duplicate_of: np.ndarray | None = None
    captions: list = field(default_factory=list)

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        n = len(self.boxes)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            feats = feats.reshape(n, -1) if n else feats.reshape(0, 0)
        self.features = feats
        if len(self.features) != n:
            raise ValueError(f"scene {self.image_id}: {n} boxes but {len(self.features)} feature rows")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != n:
                raise ValueError(f"scene {self.image_id}: labels length {len(self.labels)} != {n}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"scene {self.image_id}: non-finite features")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"scene {self.image_id}: image size must be positive")

    @property
    def n(self):
        return len(self.boxes)

    @property
    def d_v(self):
        return self.features.shape[1]


@dataclass
class QARecord:
    question_id: str
    image_id: str
    tokens: list
    count: int
    answers: list
    subject: str = UNKNOWN_SUBJECT
    bin: int = 0
    question: str = ""
    category: int | None = None

    def __post_init__(self):
        if not 0 <= int(self.count) <= 20:
            raise ValueError(f"question {self.question_id}: count {self.count} outside 0..20")
