"""Sentence-embedding extraction front end for the encrypted pipeline."""

from .emb1 import Emb1Error, read_emb1, write_emb1
from .extract import DEFAULT_MODEL, ExtractJob, extract, read_labeled_tsv

__version__ = "0.1.0"
__all__ = [
    "DEFAULT_MODEL",
    "Emb1Error",
    "ExtractJob",
    "extract",
    "read_emb1",
    "read_labeled_tsv",
    "write_emb1",
]
