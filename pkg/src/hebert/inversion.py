"""Black-box sentence-embedding inversion probe: multi-label word recovery.

A linear multi-label classifier over plaintext embedding vectors; recovering
a sentence means predicting its bag of tokens. The probe's interface takes
plaintext float matrices only, so ciphertexts are unusable by construction.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class ProbeConfig:
    learning_rate: float = 1.0
    epochs: int = 30
    batch_size: int = 64
    rng_seed: int = 0
    threshold: float = 0.5


@dataclass
class ProbeModel:
    vocab: list
    weights: np.ndarray  # (dim, vocab_size)
    bias: np.ndarray  # (vocab_size,)
    threshold: float

    def __post_init__(self):
        if not self.vocab:
            raise DataError("probe vocabulary is empty")
        if not (0.0 < self.threshold < 1.0):
            raise DataError("threshold must be in (0, 1)")

    def scores(self, embeddings):
        x = _as_plain_matrix(embeddings)
        z = x @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-z))

    def predict_tokens(self, embeddings, threshold=None):
        t = self.threshold if threshold is None else threshold
        s = self.scores(embeddings)
        out = []
        for row in s > t:
            out.append({self.vocab[i] for i in np.flatnonzero(row)})
        return out


def _as_plain_matrix(embeddings):
    if not isinstance(embeddings, np.ndarray):
        raise TypeError(
            "the inversion probe operates on plaintext float matrices; "
            f"got {type(embeddings).__name__} (ciphertexts are not invertible "
            "through this interface)"
        )
    return np.asarray(embeddings, dtype=np.float64)


def tokenize(sentence):
    return [w for w in sentence.lower().split() if w]


def build_vocab(sentences, min_freq=2):
    counts = {}
    for s in sentences:
        for tok in set(tokenize(s)):
            counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(tok for tok, c in counts.items() if c >= min_freq)
    if not vocab:
        raise DataError(f"no tokens pass the min-frequency cutoff {min_freq}")
    return vocab


def token_targets(sentences, vocab):
    """Multi-hot (rows, vocab) matrix of token presence."""
    index = {tok: i for i, tok in enumerate(vocab)}
    y = np.zeros((len(sentences), len(vocab)), dtype=np.float64)
    for r, s in enumerate(sentences):
        for tok in tokenize(s):
            i = index.get(tok)
            if i is not None:
                y[r, i] = 1.0
    return y


def train_probe(embeddings, token_sets, config=None, vocab=None):
    """Multi-label logistic regression by minibatch SGD, seeded.

    token_sets: iterable of token collections per sentence (or a prebuilt
    multi-hot matrix when `vocab` is given).
    """
    config = config or ProbeConfig()
    x = _as_plain_matrix(embeddings)
    if vocab is None:
        counts = {}
        for toks in token_sets:
            for tok in set(toks):
                counts[tok] = counts.get(tok, 0) + 1
        vocab = sorted(counts)
        if not vocab:
            raise DataError("probe vocabulary is empty")
    if isinstance(token_sets, np.ndarray):
        y = np.asarray(token_sets, dtype=np.float64)
    else:
        token_sets = list(token_sets)
        if len(token_sets) != x.shape[0]:
            raise DataError("token_sets length must match embeddings rows")
        index = {tok: i for i, tok in enumerate(vocab)}
        y = np.zeros((x.shape[0], len(vocab)), dtype=np.float64)
        for r, toks in enumerate(token_sets):
            for tok in toks:
                if tok in index:
                    y[r, index[tok]] = 1.0

    rng = np.random.default_rng(np.random.PCG64(config.rng_seed))
    dim = x.shape[1]
    w = np.zeros((dim, len(vocab)))
    b = np.zeros(len(vocab))
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            xb, yb = x[sel], y[sel]
            p = 1.0 / (1.0 + np.exp(-(xb @ w + b)))
            err = p - yb
            w -= config.learning_rate / len(sel) * (xb.T @ err)
            b -= config.learning_rate / len(sel) * err.sum(axis=0)
    return ProbeModel(vocab=list(vocab), weights=w, bias=b, threshold=config.threshold)


def attack_f1(model, embeddings, token_sets, threshold=None):
    """Micro-averaged F1 of predicted vs true token sets."""
    preds = model.predict_tokens(embeddings, threshold)
    tp = fp = fn = 0
    for pred, true in zip(preds, token_sets):
        true = set(true) & set(model.vocab)
        tp += len(pred & true)
        fp += len(pred - true)
        fn += len(true - pred)
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0
