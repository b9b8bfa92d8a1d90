from .tensor import Parameter, Tensor, backward, no_grad
from .layers import (
    GTU,
    LSTM,
    MLP2,
    Affine,
    Embedding,
    ParamStore,
    affine,
    cross_entropy,
    dropout,
    gtu_layer,
    huber,
    lstm_step,
    relu,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    tanh,
)
from .optim import AdamState, ExponentialDecay, PlateauDecay, adam_step
from .gradcheck import gradcheck

__all__ = [
    "Affine", "AdamState", "Embedding", "ExponentialDecay", "GTU", "LSTM", "MLP2",
    "ParamStore", "Parameter", "PlateauDecay", "Tensor", "adam_step", "affine",
    "backward", "cross_entropy", "dropout", "gradcheck", "gtu_layer", "huber",
    "lstm_step", "no_grad", "relu", "sigmoid", "softmax", "softmax_cross_entropy",
    "tanh",
]
