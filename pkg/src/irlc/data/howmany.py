"""HowMany-QA construction: question filter, subject heuristic, frequency bins."""
from __future__ import annotations

import re
from collections import Counter

import numpy as np

from ..language import tokenize
from .records import UNKNOWN_SUBJECT

COUNT_PHRASES = ("how many", "number of", "amount of", "count of")
REJECT_PHRASE = "number of the"
MAX_COUNT = 20

KEEP = "KEEP"
NO_PHRASE = "NO_PHRASE"
REJECT = "REJECT_PHRASE"
NON_NUMERIC = "NON_NUMERIC"
OUT_OF_RANGE = "OUT_OF_RANGE"
REASONS = (KEEP, NO_PHRASE, REJECT, NON_NUMERIC, OUT_OF_RANGE)

NUMBER_WORDS = {
    w: i
    for i, w in enumerate(
        "zero one two three four five six seven eight nine ten eleven twelve thirteen "
        "fourteen fifteen sixteen seventeen eighteen nineteen twenty".split()
    )
}
_INT = re.compile(r"^[+-]?\d+$")


def parse_count(answer):
    """Integer value of a digit string or number word ('zero'..'twenty'), else None."""
    a = answer.strip().lower().rstrip(".!?,").strip()
    if _INT.match(a):
        return int(a)
    return NUMBER_WORDS.get(a)


def _padded(question):
    return " " + " ".join(tokenize(question)) + " "


def filter_howmany(question, answer):
    """Return ``(keep, reason)`` for one QA pair."""
    text = _padded(question)
    if not any(f" {p} " in text for p in COUNT_PHRASES):
        return False, NO_PHRASE
    if f" {REJECT_PHRASE} " in text:
        return False, REJECT
    value = parse_count(answer)
    if value is None:
        return False, NON_NUMERIC
    if not 0 <= value <= MAX_COUNT:
        return False, OUT_OF_RANGE
    return True, KEEP


# ---------------------------------------------------------------------------
# subjects

STOP_WORDS = frozenset(
    "a an the of are is was were there do does did can could you we i they it this that these those "
    "in on at to be been being have has see seen visible shown pictured here total all any".split()
)
IRREGULAR_PLURALS = {
    "buses": "bus", "men": "man", "women": "woman", "children": "child", "mice": "mouse",
    "geese": "goose", "teeth": "tooth", "feet": "foot", "knives": "knife", "leaves": "leaf",
    "shelves": "shelf", "sheep": "sheep", "people": "people", "species": "species",
}


def singular(word):
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if len(word) <= 3:
        return word
    if word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith(("sses", "shes", "ches", "xes", "zes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def extract_subject(tokens):
    """First non-stop-word after the counting phrase, singularized.

    Stands in for a dependency parser's first noun chunk root.
    """
    tokens = [t.lower() for t in tokens]
    start = None
    for i in range(len(tokens) - 1):
        if " ".join(tokens[i : i + 2]) in COUNT_PHRASES:
            start = i + 2
            break
    if start is None:
        return UNKNOWN_SUBJECT
    for tok in tokens[start:]:
        if tok not in STOP_WORDS and not tok.isdigit():
            return singular(tok)
    return UNKNOWN_SUBJECT


def frequency_bins(train_subjects, eval_subjects, n_bins=5):
    """Bin index (1..n_bins, or n_bins+1 for unseen) for each eval subject.

    Eval questions are ordered by their subject's training frequency (most
    frequent first) and cut into ``n_bins`` near-equal slices.  Questions whose
    subjects share a frequency always share a bin: a tie group takes the bin
    of its first member.
    """
    train_subjects = list(train_subjects)
    if not train_subjects:
        raise ValueError("frequency binning needs a non-empty training split")
    freq = Counter(train_subjects)
    eval_subjects = list(eval_subjects)
    bins = np.full(len(eval_subjects), n_bins + 1, dtype=np.int64)
    seen = [i for i, s in enumerate(eval_subjects) if s in freq]
    if not seen:
        return bins
    f = np.array([freq[eval_subjects[i]] for i in seen])
    order = np.argsort(-f, kind="stable")
    m = len(seen)
    group_bin = {}
    for pos, k in enumerate(order):
        target = pos * n_bins // m + 1
        bins[seen[k]] = group_bin.setdefault(f[k], target)
    return bins
