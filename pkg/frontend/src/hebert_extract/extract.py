"""Run a pretrained sentence encoder over a labeled text file -> EMB1."""

import logging
from dataclasses import dataclass

import numpy as np

from .emb1 import Emb1Error, write_emb1

log = logging.getLogger(__name__)

DEFAULT_MODEL = "sentence-transformers/all-mpnet-base-v2"  # 768-dim encoder


@dataclass
class ExtractJob:
    input_path: str
    model_id: str = DEFAULT_MODEL
    output_path: str = "out.emb"
    batch_size: int = 32
    expected_dim: int = 768


def read_labeled_tsv(path):
    """One `text<TAB>label-int` per line; blank lines are skipped."""
    texts, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            text, sep, label = line.rpartition("\t")
            if not sep:
                raise Emb1Error(f"{path}:{lineno}: missing tab separator")
            try:
                labels.append(int(label))
            except ValueError as exc:
                raise Emb1Error(f"{path}:{lineno}: bad label {label!r}") from exc
            texts.append(text)
    if not texts:
        raise Emb1Error(f"{path}: no input rows")
    return texts, np.array(labels, dtype=np.uint16)


def load_encoder(model_id):
    """A callable texts -> (rows, dim) float array, backed by the model."""
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(model_id)

    def encode(texts, batch_size):
        return np.asarray(
            model.encode(
                list(texts),
                batch_size=batch_size,
                show_progress_bar=False,
                convert_to_numpy=True,
            ),
            dtype=np.float32,
        )

    return encode


def extract(job, encoder=None):
    """Embed every input line and write the EMB1 file.

    `encoder` defaults to the pretrained model named by the job; injecting a
    callable is for tests. Values are stored exactly as produced: embeddings
    outside [-1, 1] are logged, never clipped.
    """
    texts, labels = read_labeled_tsv(job.input_path)
    if encoder is None:
        encoder = load_encoder(job.model_id)
    chunks = []
    for start in range(0, len(texts), job.batch_size):
        chunks.append(encoder(texts[start : start + job.batch_size], job.batch_size))
    data = np.concatenate(chunks, axis=0).astype(np.float32)
    if data.shape != (len(texts), data.shape[1]):
        raise Emb1Error("encoder returned an unexpected shape")
    if job.expected_dim and data.shape[1] != job.expected_dim:
        raise Emb1Error(
            f"model emits dim {data.shape[1]}, expected {job.expected_dim} "
            "(pass --dim to override)"
        )
    if not np.all(np.isfinite(data)):
        raise Emb1Error("encoder produced non-finite values")
    out_of_range = int(np.sum(np.abs(data) > 1.0))
    if out_of_range:
        log.warning(
            "%d of %d embedding values fall outside [-1, 1]; stored as produced",
            out_of_range,
            data.size,
        )
    write_emb1(job.output_path, data, labels)
    return data.shape
