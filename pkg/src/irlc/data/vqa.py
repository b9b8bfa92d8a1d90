"""VQA 2.0 / Visual Genome ingestion and HowMany-QA split construction."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..language import tokenize
from .howmany import REASONS, extract_subject, filter_howmany, parse_count
from .records import QARecord

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    pass


@dataclass
class RawQA:
    question_id: str
    image_id: str
    question: str
    answer: str
    answers: list
    source: str = "vqa"


def _load_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _require(entry, keys, where):
    for k in keys:
        if k not in entry:
            raise SchemaError(f"{where}: missing key {k!r}")


def load_vqa_annotations(questions_file, annotations_file):
    """Join VQA questions to annotations by question id.

    Questions whose answer list does not hold exactly ten entries are dropped
    with a warning.  A question without an annotation is an error.
    """
    qdoc = _load_json(questions_file)
    adoc = _load_json(annotations_file)
    if "questions" not in qdoc:
        raise SchemaError(f"{questions_file}: top-level key 'questions' missing")
    if "annotations" not in adoc:
        raise SchemaError(f"{annotations_file}: top-level key 'annotations' missing")
    anns = {}
    for i, a in enumerate(adoc["annotations"]):
        _require(a, ("question_id", "answers", "multiple_choice_answer"), f"{annotations_file}: annotations[{i}]")
        anns[a["question_id"]] = a
    out = []
    for i, q in enumerate(qdoc["questions"]):
        where = f"{questions_file}: questions[{i}]"
        _require(q, ("question_id", "image_id", "question"), where)
        qid = q["question_id"]
        if qid not in anns:
            raise SchemaError(f"{where}: no annotation for question id {qid}")
        a = anns[qid]
        answers = [x["answer"] if isinstance(x, dict) else str(x) for x in a["answers"]]
        if len(answers) != 10:
            log.warning("question %s has %d answers (expected 10); excluded", qid, len(answers))
            continue
        out.append(RawQA(str(qid), str(q["image_id"]), q["question"], a["multiple_choice_answer"], answers))
    return out


def load_vg_qa(qa_file, image_data_file):
    """Visual Genome QA pairs keyed to COCO image ids (pairs without a COCO id are dropped)."""
    images = _load_json(image_data_file)
    to_coco = {}
    for i, im in enumerate(images):
        _require(im, ("image_id",), f"{image_data_file}[{i}]")
        if im.get("coco_id") is not None:
            to_coco[im["image_id"]] = str(im["coco_id"])
    out = []
    for i, entry in enumerate(_load_json(qa_file)):
        for j, qa in enumerate(entry.get("qas", [])):
            where = f"{qa_file}[{i}].qas[{j}]"
            _require(qa, ("qa_id", "image_id", "question", "answer"), where)
            coco = to_coco.get(qa["image_id"])
            if coco is None:
                continue
            out.append(RawQA(f"vg{qa['qa_id']}", coco, qa["question"], qa["answer"], [qa["answer"]] * 10, "vg"))
    return out


def to_qarecord(raw: RawQA):
    tokens = tokenize(raw.question)
    return QARecord(
        question_id=raw.question_id,
        image_id=raw.image_id,
        tokens=tokens,
        count=parse_count(raw.answer),
        answers=list(raw.answers),
        subject=extract_subject(tokens),
        question=raw.question,
    )


def apply_filter(raws):
    """Filtered QARecords plus a histogram of reason codes over all inputs."""
    hist = Counter({r: 0 for r in REASONS})
    kept = []
    for raw in raws:
        keep, reason = filter_howmany(raw.question, raw.answer)
        hist[reason] += 1
        if keep:
            kept.append(to_qarecord(raw))
    return kept, dict(hist)


def read_manifest(path):
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def write_manifest(path, question_ids):
    with open(path, "w", encoding="utf-8") as f:
        for qid in question_ids:
            f.write(f"{qid}\n")


def build_howmany_splits(train_raw, val_raw, vg_raw=(), test_ids=None, n_test=5000, seed=0):
    """Assemble train/dev/test from already-loaded VQA-train, VQA-val and VG pairs.

    Returns ``(splits, histograms)``.  VG pairs only join the training split
    when their image belongs to the VQA training images.  ``test_ids`` pins
    the test split to a published manifest; otherwise ``n_test`` questions
    are drawn uniformly with ``seed``.
    """
    train, h_train = apply_filter(train_raw)
    train_images = {r.image_id for r in train_raw}
    vg_kept, h_vg = apply_filter([r for r in vg_raw if r.image_id in train_images])
    val, h_val = apply_filter(val_raw)

    if test_ids is not None:
        wanted = set(map(str, test_ids))
        missing = wanted - {r.question_id for r in val}
        if missing:
            raise ValueError(f"test manifest names {len(missing)} ids outside the filtered validation set")
        test = [r for r in val if r.question_id in wanted]
        dev = [r for r in val if r.question_id not in wanted]
    else:
        rng = np.random.default_rng(seed)
        k = min(n_test, len(val))
        pick = set(rng.choice(len(val), size=k, replace=False).tolist()) if k else set()
        test = [r for i, r in enumerate(val) if i in pick]
        dev = [r for i, r in enumerate(val) if i not in pick]

    splits = {"train": train + vg_kept, "dev": dev, "test": test}
    held_out_images = {r.image_id for r in dev + test}
    leak = {r.image_id for r in splits["train"]} & held_out_images
    if leak:
        raise ValueError(f"{len(leak)} images appear in both train and dev/test (e.g. {sorted(leak)[0]})")
    ids = [r.question_id for s in splits.values() for r in s]
    if len(ids) != len(set(ids)):
        raise ValueError("question ids repeat across splits")
    return splits, {"vqa_train": h_train, "vg": h_vg, "vqa_val": h_val}
