import numpy as np
import pytest

from irlc.core.gradcheck import gradcheck

from conftest import SMALL_DIMS
from gradient_cases import MODEL_CLASSES, OP_CASES, model_case


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_matches_central_differences(name):
    f, params = OP_CASES[name](np.random.default_rng(7))
    errs = gradcheck(f, params)
    assert max(errs.values()) < 1e-6, errs


@pytest.mark.parametrize("kind", sorted(MODEL_CLASSES))
def test_small_model_matches_central_differences(kind, small_synth):
    _, scenes, qas, vocab = small_synth
    f, params = model_case(kind, vocab, SMALL_DIMS, scenes[:3], qas[:3])
    errs = gradcheck(f, params, max_entries=8, rng=np.random.default_rng(0))
    assert max(errs.values()) < 1e-4, errs
