from .features import load_features, read_features, write_features
from .howmany import extract_subject, filter_howmany, frequency_bins, parse_count
from .records import NO_LABEL, UNKNOWN_SUBJECT, QARecord, SceneRecord
from .synthetic import SynthConfig, generate_split, generate_synthetic_qa, generate_synthetic_scene
from .vqa import build_howmany_splits, load_vg_qa, load_vqa_annotations

__all__ = [
    "NO_LABEL", "QARecord", "SceneRecord", "SynthConfig", "UNKNOWN_SUBJECT",
    "build_howmany_splits", "extract_subject", "filter_howmany", "frequency_bins",
    "generate_split", "generate_synthetic_qa", "generate_synthetic_scene",
    "load_features", "load_vg_qa", "load_vqa_annotations", "parse_count",
    "read_features", "write_features",
]
