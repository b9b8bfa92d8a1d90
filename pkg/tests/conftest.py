import numpy as np
import pytest

from irlc.batching import make_batch
from irlc.counters import ModelDims
from irlc.data.synthetic import SynthConfig, generate_split
from irlc.language import Vocabulary

SMALL_DIMS = ModelDims(d_emb=8, d_hid=12, n_score=10, d_v=16, rho_hidden=8, dropout=0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synth():
    """A handful of synthetic scenes with at most six proposals each."""
    cfg = SynthConfig(feature_dim=16, max_per_category=2, max_distractors=1, seed=3)
    scenes, qas = generate_split(cfg, 60, "t")
    keep = [i for i, s in enumerate(scenes) if 2 <= s.n <= 6]
    scenes = [scenes[i] for i in keep]
    qas = [qas[i] for i in keep]
    vocab = Vocabulary.build([q.tokens for q in qas] + [t for s in scenes for t, _ in s.captions])
    return cfg, scenes, qas, vocab


@pytest.fixture(scope="session")
def small_batch(small_synth):
    cfg, scenes, qas, vocab = small_synth
    by_id = {s.image_id: s for s in scenes}
    return make_batch(qas[:4], by_id, vocab, cfg.feature_dim, with_pairs=True)
