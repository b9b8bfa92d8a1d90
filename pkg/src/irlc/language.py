"""Tokens, vocabulary, question/caption encoders and the shared object scorer.

The scorer maps ``[q, v_i]`` through one GTU layer to a score vector per
object.  The same :class:`LanguageModule` instance (and therefore the same
scorer parameters) is handed to the caption-grounding head, which is how the
two tasks share weights.
"""
from __future__ import annotations

import re

import numpy as np

from .core import tensor as T
from .core.layers import GTU, LSTM, Embedding

PAD = "<pad>"
UNK = "<unk>"

_PUNCT = re.compile(r"[^\w\s]")


def tokenize(text):
    """Lowercase, drop punctuation, split on whitespace."""
    return _PUNCT.sub(" ", text.lower()).split()


class Vocabulary:
    """Token <-> index map with reserved padding (0) and unknown (1) entries."""

    def __init__(self, tokens=()):
        self.itos = [PAD, UNK]
        self.stoi = {PAD: 0, UNK: 1}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def build(cls, token_lists, min_count=1):
        counts = {}
        for toks in token_lists:
            for t in toks:
                counts[t] = counts.get(t, 0) + 1
        return cls(sorted(t for t, c in counts.items() if c >= min_count))

    def add(self, tok):
        if tok not in self.stoi:
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)
        return self.stoi[tok]

    @property
    def pad_index(self):
        return 0

    @property
    def unk_index(self):
        return 1

    def __len__(self):
        return len(self.itos)

    def __contains__(self, tok):
        return tok in self.stoi

    def index(self, tok):
        return self.stoi.get(tok, 1)

    def encode(self, tokens):
        return [self.index(t) for t in tokens]

    def to_json(self):
        return list(self.itos)

    @classmethod
    def from_json(cls, itos):
        if list(itos[:2]) != [PAD, UNK]:
            raise ValueError("vocabulary must start with the pad and unk tokens")
        return cls(itos[2:])


def load_glove(path, vocab=None, dim=None):
    """Read a GloVe-format text file: ``token f1 f2 ... fd`` per line.

    With ``vocab`` given, only its tokens are kept.  Returns ``{token: vector}``.
    """
    vectors = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            tok, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, found {len(vals)}")
            if vocab is None or tok in vocab:
                vectors[tok] = np.array(vals, dtype=np.float64)
    return vectors


def embedding_matrix(vocab, d_emb, rng, glove=None):
    """Random rows, overwritten by pretrained vectors where available."""
    table = rng.normal(0.0, 1.0, size=(len(vocab), d_emb))
    table[vocab.pad_index] = 0.0
    if glove:
        for tok, vec in glove.items():
            if tok in vocab:
                if len(vec) != d_emb:
                    raise ValueError(f"GloVe dimension {len(vec)} != d_emb {d_emb}")
                table[vocab.index(tok)] = vec
    return table


def pad_tokens(index_lists, pad=0):
    lengths = np.array([len(x) for x in index_lists], dtype=np.int64)
    if np.any(lengths == 0):
        raise ValueError("cannot encode an empty token sequence")
    out = np.full((len(index_lists), int(lengths.max())), pad, dtype=np.int64)
    for i, idx in enumerate(index_lists):
        out[i, : len(idx)] = idx
    return out, lengths


class LanguageModule:
    """Word embeddings + question LSTM + the scoring function f^S."""

    def __init__(self, store, vocab, d_emb, d_hid, d_v, n_score, glove=None):
        self.vocab = vocab
        self.d_hid = d_hid
        self.d_v = d_v
        self.n_score = n_score
        self.embed = Embedding(store, "lang.embed", len(vocab), d_emb,
                               init=embedding_matrix(vocab, d_emb, store.rng, glove))
        self.question_lstm = LSTM(store, "lang.qlstm", d_emb, d_hid)
        # baselines that never look at the image skip the scorer
        self.scorer = GTU(store, "lang.score", d_hid + d_v, n_score) if n_score else None

    def run_lstm(self, lstm, token_ids, lengths):
        xs = [self.embed(token_ids[:, t]) for t in range(token_ids.shape[1])]
        return lstm.run(xs, lengths)

    def encode(self, token_ids, lengths):
        """Batched question encoding: ``[B, L]`` ids -> ``[B, d_hid]``."""
        return self.run_lstm(self.question_lstm, token_ids, lengths)

    def encode_question(self, tokens):
        """Final LSTM hidden state for one tokenized question."""
        if len(tokens) == 0:
            raise ValueError("cannot encode an empty question")
        ids, lengths = pad_tokens([self.vocab.encode(tokens)])
        return self.encode(ids, lengths)[0]

    def score(self, q, features):
        """``q``: [B, d_hid] tensor, ``features``: [B, N, d_v] -> scores [B, N, n]."""
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.d_v:
            raise ValueError(f"feature dimension {features.shape[-1]} != {self.d_v}")
        B, N = features.shape[:2]
        qb = T.broadcast_to(T.reshape(q, (B, 1, self.d_hid)), (B, N, self.d_hid))
        return self.scorer(T.concat([qb, T.Tensor(features)], axis=-1))

    def score_objects(self, q, scene):
        """Score matrix ``[N, n]`` for one scene; ``N == 0`` gives an empty matrix."""
        feats = np.asarray(scene.features, dtype=np.float64).reshape(-1, self.d_v)
        q = T.reshape(q, (1, self.d_hid))
        return self.score(q, feats[None])[0]
