"""Run configuration.

Values resolve in this order, later entries winning:

1. field defaults below,
2. the JSON file given with ``--config`` (flat keys, same names as the fields),
3. command-line flags (``--seed``, ``--profile``, ``--no-grounding``, ``--out``,
   ``--model``, ``--epochs`` and any ``--set key=value``),
4. profile defaults, which only fill fields still set to ``None``.

The resolved configuration is written next to every run's outputs and is
enough to reproduce the run.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from .data.synthetic import SynthConfig

DATA_ROOT_ENV = "IRLC_DATA_ROOT"
MODEL_KINDS = ("softcount", "updown", "irlc", "guess1", "lstm")
PROFILES = ("desk", "paper")

# (d_emb, d_hid, d_v, rho_hidden, scorer width for softcount/updown/lstm, for irlc)
PROFILE_DIMS = {
    "desk": dict(d_emb=32, d_hid=64, d_v=64, rho_hidden=64, n_small=64, n_irlc=128),
    "paper": dict(d_emb=300, d_hid=1024, d_v=2048, rho_hidden=512, n_small=512, n_irlc=2048),
}
LEARNING_RATES = {"irlc": 5e-4}
DEFAULT_LR = 3e-4
ITERATION_DECAY = 0.99999
PLATEAU_DECAY = 0.8


class ConfigError(ValueError):
    """All validation problems of a configuration, reported together."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def default_data_root():
    return os.environ.get(DATA_ROOT_ENV, "data")


@dataclass
class RunConfig:
    model: str = "irlc"
    profile: str = "desk"
    seed: int = 0
    # dimensions; None takes the profile value
    d_emb: int | None = None
    d_hid: int | None = None
    n_score: int | None = None
    d_v: int | None = None
    rho_hidden: int | None = None
    dropout: float = 0.3
    # optimisation; None takes the model's standard value
    lr: float | None = None
    lr_decay: float | None = None
    plateau_patience: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    # IRLC objective
    n_samples: int = 5
    entropy_weight: float = 0.005
    interaction_weight: float = 0.005
    # caption grounding
    grounding: bool = True
    grounding_weight: float = 0.1
    grounding_images: int = 4
    # data: "synthetic" generates in memory, "files" reads data_dir
    data: str = "synthetic"
    data_dir: str | None = None
    synth: dict = field(default_factory=dict)
    n_train: int = 2000
    n_dev: int = 500
    n_test: int = 0
    glove: str | None = None
    eval_batch_size: int = 128
    out: str = "runs/default"

    def resolved(self):
        """Copy with every profile/model-dependent ``None`` filled in."""
        c = RunConfig(**asdict(self))
        dims = PROFILE_DIMS.get(c.profile, PROFILE_DIMS["desk"])
        for k in ("d_emb", "d_hid", "d_v", "rho_hidden"):
            if getattr(c, k) is None:
                setattr(c, k, dims[k])
        if c.n_score is None:
            c.n_score = dims["n_irlc"] if c.model == "irlc" else dims["n_small"]
        if c.lr is None:
            c.lr = LEARNING_RATES.get(c.model, DEFAULT_LR)
        if c.lr_decay is None:
            c.lr_decay = ITERATION_DECAY if c.model == "irlc" else PLATEAU_DECAY
        if c.data == "files" and c.data_dir is None:
            c.data_dir = default_data_root()
        if c.data == "synthetic":
            c.synth = {**SynthConfig(feature_dim=c.d_v).to_dict(), **c.synth}
        return c

    def problems(self):
        p = []
        if self.model not in MODEL_KINDS:
            p.append(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.profile not in PROFILES:
            p.append(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.data not in ("synthetic", "files"):
            p.append(f"data must be 'synthetic' or 'files', got {self.data!r}")
        for k in ("d_emb", "d_hid", "n_score", "d_v", "rho_hidden"):
            v = getattr(self, k)
            if v is not None and (not isinstance(v, int) or v < 1):
                p.append(f"{k} must be a positive integer, got {v!r}")
        if not 0.0 <= self.dropout < 1.0:
            p.append(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lr is not None and self.lr <= 0:
            p.append(f"lr must be positive, got {self.lr}")
        if self.lr_decay is not None and not 0 < self.lr_decay <= 1:
            p.append(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        for k in ("batch_size", "max_epochs", "patience", "n_samples", "plateau_patience",
                  "n_train", "n_dev", "eval_batch_size", "grounding_images"):
            if getattr(self, k) < 1:
                p.append(f"{k} must be >= 1, got {getattr(self, k)}")
        if self.n_test < 0:
            p.append(f"n_test must be >= 0, got {self.n_test}")
        for k in ("entropy_weight", "interaction_weight", "grounding_weight"):
            if getattr(self, k) < 0:
                p.append(f"{k} must be non-negative, got {getattr(self, k)}")
        if self.data == "synthetic":
            unknown = set(self.synth) - {f.name for f in fields(SynthConfig)}
            if unknown:
                p.append(f"unknown synth keys {sorted(unknown)}")
            else:
                try:
                    SynthConfig(**self.synth)
                except (TypeError, ValueError) as exc:
                    p.append(f"synth: {exc}")
            fd = self.synth.get("feature_dim")
            if fd is not None and self.d_v is not None and fd != self.d_v:
                p.append(f"synth feature_dim {fd} differs from d_v {self.d_v}")
        return p

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def synth_config(self):
        return SynthConfig(**self.synth)

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _coerce(text):
    """Parse a ``--set`` value: JSON when it parses, the raw string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(file=None, overrides=None):
    """Merge defaults, a JSON file and flag overrides, then resolve and validate."""
    values = {}
    problems = []
    if file is not None:
        with open(file, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ConfigError([f"{file}: expected a JSON object"])
        values.update(loaded)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    unknown = sorted(set(values) - set(_FIELD_TYPES))
    if unknown:
        problems.append(f"unknown keys {unknown}")
        for k in unknown:
            values.pop(k)
    cfg = RunConfig(**values)
    problems += cfg.problems()
    if problems:
        raise ConfigError(problems)
    return cfg.resolved().validate()


def parse_assignments(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError([f"--set expects key=value, got {item!r}"])
        k, v = item.split("=", 1)
        out[k.strip()] = _coerce(v)
    return out
