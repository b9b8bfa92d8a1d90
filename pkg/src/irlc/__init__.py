"""Grounded object counting for visual questions.

Three counting heads share a question encoder and an object scorer:
``SoftCount`` sums per-object values, ``UpDown`` classifies an attended
feature, and ``IRLC`` counts by selecting proposals one at a time.
"""
from .config import RunConfig, build_config
from .counters import IRLC, MODELS, Guess1, LSTMBaseline, SoftCount, UpDown

__version__ = "0.1.0"

__all__ = ["IRLC", "MODELS", "Guess1", "LSTMBaseline", "RunConfig", "SoftCount", "UpDown", "build_config"]
