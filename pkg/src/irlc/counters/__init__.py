from .base import MAX_COUNT, CountingModel, CountPrediction, ModelDims, round_count
from .baselines import Guess1, LSTMBaseline, guess1_baseline
from .rollout import (
    Episode,
    irlc_entropy_penalty,
    irlc_greedy_rollout,
    irlc_interaction_penalty,
    irlc_sample_rollout,
    irlc_selfcritical_loss,
    rollout_batch,
)
from .sequential import IRLC
from .softcount import SoftCount, softcount_loss
from .updown import UpDown

MODELS = {"softcount": SoftCount, "updown": UpDown, "irlc": IRLC, "lstm": LSTMBaseline, "guess1": Guess1}

__all__ = [
    "Episode", "Guess1", "IRLC", "LSTMBaseline", "MAX_COUNT", "MODELS", "CountPrediction",
    "CountingModel", "ModelDims", "SoftCount", "UpDown", "guess1_baseline",
    "irlc_entropy_penalty", "irlc_greedy_rollout", "irlc_interaction_penalty",
    "irlc_sample_rollout", "irlc_selfcritical_loss", "rollout_batch", "round_count",
    "softcount_loss",
]
