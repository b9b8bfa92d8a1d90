"""Dataset preparation: materialise synthetic data and filter VQA-format
annotations into the file layout that training reads.

Layout of a data directory::

    features.bin      feature container with every scene
    scenes.jsonl      optional labels, annotated boxes and captions per scene
    train.jsonl, dev.jsonl, test.jsonl
    categories.json   optional category words indexed by label
"""
from __future__ import annotations

import json
import os

from .config import RunConfig
from .data.features import write_features
from .data.howmany import frequency_bins
from .data.io import write_qa, write_scene_meta
from .data.synthetic import generate_split
from .data.vqa import build_howmany_splits, load_vg_qa, load_vqa_annotations, read_manifest, write_manifest
from .train import write_manifest as write_output_manifest


def cmd_synth(cfg: RunConfig, out=None):
    """Write the synthetic splits of ``cfg`` as a data directory; returns split sizes."""
    cfg = cfg.resolved().validate()
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    sc = cfg.synth_config()
    scenes, sizes = [], {}
    for split, n in (("train", cfg.n_train), ("dev", cfg.n_dev), ("test", cfg.n_test)):
        if n == 0:
            continue
        s, q = generate_split(sc, n, split)
        scenes += s
        write_qa(os.path.join(out, f"{split}.jsonl"), q)
        sizes[split] = len(q)
    write_features(os.path.join(out, "features.bin"), scenes)
    write_scene_meta(os.path.join(out, "scenes.jsonl"), scenes)
    with open(os.path.join(out, "categories.json"), "w", encoding="utf-8") as f:
        json.dump(list(sc.categories), f)
    with open(os.path.join(out, "synth.json"), "w", encoding="utf-8") as f:
        json.dump(sc.to_dict(), f, indent=2, sort_keys=True)
    write_output_manifest(out, {"command": "synth", "sizes": sizes})
    return sizes


def cmd_filter(vqa_train, vqa_val, out, vg=None, test_manifest=None, n_test=5000, seed=0):
    """Filter VQA-format counting questions into train/dev/test files.

    ``vqa_train`` and ``vqa_val`` are (questions file, annotations file)
    pairs; ``vg`` is an optional (question-answer file, image-data file)
    pair.  Writes per-split id manifests, QA files with frequency bins and a
    histogram of filter decisions per source.
    """
    os.makedirs(out, exist_ok=True)
    train_raw = load_vqa_annotations(*vqa_train)
    val_raw = load_vqa_annotations(*vqa_val)
    vg_raw = load_vg_qa(*vg) if vg else ()
    test_ids = read_manifest(test_manifest) if test_manifest else None
    splits, hist = build_howmany_splits(train_raw, val_raw, vg_raw, test_ids, n_test, seed)
    subjects = [qa.subject for qa in splits["train"]]
    for name, qas in splits.items():
        if subjects and qas:
            for qa, b in zip(qas, frequency_bins(subjects, [qa.subject for qa in qas])):
                qa.bin = int(b)
        write_manifest(os.path.join(out, f"manifest_{name}.txt"), [qa.question_id for qa in qas])
        write_qa(os.path.join(out, f"{name}.jsonl"), qas)
    with open(os.path.join(out, "filter_histogram.json"), "w", encoding="utf-8") as f:
        json.dump(hist, f, indent=2, sort_keys=True)
    write_output_manifest(out, {"command": "filter", "sizes": {k: len(v) for k, v in splits.items()}})
    return splits, hist
