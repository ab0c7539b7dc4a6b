"""EMB1 embedding files, split management, and classification metrics.

EMB1 layout (little-endian): magic "EMB1", version u16, dim u32, rows u32,
reserved u16, then rows*dim f32 data, then rows u16 labels. Splits live in
sibling files with .train/.dev/.test suffixes.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIH")
HEADER_BYTES = _HEADER.size  # 16


@dataclass
class EmbeddingDataset:
    data: np.ndarray  # (rows, dim) float32
    labels: np.ndarray  # (rows,) uint16
    class_count: int
    split_name: str = ""

    @property
    def dim(self):
        return self.data.shape[1]

    @property
    def rows(self):
        return self.data.shape[0]

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        if self.data.ndim != 2:
            raise DataError("data must be a (rows, dim) matrix")
        if self.labels.shape != (self.data.shape[0],):
            raise DataError("labels length must match rows")
        if not np.all(np.isfinite(self.data)):
            raise DataError("non-finite values in embedding data")
        if self.rows and int(self.labels.max()) >= self.class_count:
            raise DataError("label out of range for class_count")


@dataclass
class MetricReport:
    threshold: float
    f1: float
    macro_f1: float
    auc: float
    accuracy: float

    def as_dict(self):
        return {
            "threshold": self.threshold,
            "f1": self.f1,
            "macro_f1": self.macro_f1,
            "auc": self.auc,
            "accuracy": self.accuracy,
        }


def write_emb(path, ds):
    payload = _HEADER.pack(MAGIC, VERSION, ds.dim, ds.rows, 0)
    payload += ds.data.astype("<f4").tobytes()
    payload += ds.labels.astype("<u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)
    return path


def read_emb(path, split_name=None):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < HEADER_BYTES:
        raise DataError(f"{path}: truncated header")
    magic, version, dim, rows, _ = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"{path}: magic mismatch {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    need = HEADER_BYTES + rows * dim * 4 + rows * 2
    if len(buf) != need:
        raise DataError(f"{path}: size {len(buf)} != expected {need}")
    data = np.frombuffer(buf, dtype="<f4", count=rows * dim, offset=HEADER_BYTES)
    labels = np.frombuffer(buf, dtype="<u2", count=rows, offset=HEADER_BYTES + rows * dim * 4)
    data = data.reshape(rows, dim).astype(np.float32)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite embedding values")
    class_count = int(labels.max()) + 1 if rows else 1
    return EmbeddingDataset(
        data=data,
        labels=labels.astype(np.uint16),
        class_count=class_count,
        split_name=split_name or "",
    )


def split_dataset(ds, fractions, seed):
    """Stratified (train, dev, test) split; deterministic under seed."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise DataError("fractions must be (train, dev, test)")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions sum to {sum(fractions)}, not 1")
    rng = np.random.default_rng(np.random.PCG64(seed))
    picks = [[], [], []]
    for cls in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == cls)
        active = sum(1 for f in fractions if f > 0)
        if idx.size and idx.size < active:
            raise DataError(
                f"class {cls} has {idx.size} rows, fewer than {active} nonempty splits"
            )
        rng.shuffle(idx)
        # largest-remainder apportionment within the class
        ideal = np.array([f * idx.size for f in fractions])
        counts = np.floor(ideal).astype(int)
        rem = ideal - counts
        for _ in range(idx.size - counts.sum()):
            j = int(np.argmax(rem))
            counts[j] += 1
            rem[j] = -1
        start = 0
        for j in range(3):
            picks[j].append(idx[start : start + counts[j]])
            start += counts[j]
    names = ("train", "dev", "test")
    out = []
    for j in range(3):
        sel = np.sort(np.concatenate(picks[j])) if picks[j] else np.array([], int)
        out.append(
            EmbeddingDataset(
                data=ds.data[sel],
                labels=ds.labels[sel],
                class_count=ds.class_count,
                split_name=names[j],
            )
        )
    return tuple(out)


def write_splits(base_path, splits):
    paths = []
    for part in splits:
        p = f"{base_path}.{part.split_name}"
        write_emb(p, part)
        paths.append(p)
    return paths


# -- metrics ------------------------------------------------------------------


def binary_counts(scores, labels, threshold):
    preds = np.asarray(scores) > threshold
    y = np.asarray(labels).astype(bool)
    tp = int(np.sum(preds & y))
    fp = int(np.sum(preds & ~y))
    fn = int(np.sum(~preds & y))
    tn = int(np.sum(~preds & ~y))
    return tp, fp, fn, tn


def f1_from_counts(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def binary_auc(scores, labels):
    """Mann-Whitney rank AUC; ties count 0.5 per tied pair (via midranks)."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined for single-class labels")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(y.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < y.size:
        j = i
        while j + 1 < y.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(scores, labels, threshold=0.5, class_count=2):
    """Binary: F1/accuracy at the threshold. Multiclass: argmax, macro-F1,
    macro one-vs-rest AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.ndim == 1:
        tp, fp, fn, tn = binary_counts(scores, labels, threshold)
        f1 = f1_from_counts(tp, fp, fn)
        f1_neg = f1_from_counts(tn, fn, fp)
        return MetricReport(
            threshold=threshold,
            f1=f1,
            macro_f1=(f1 + f1_neg) / 2.0,
            auc=binary_auc(scores, labels),
            accuracy=(tp + tn) / labels.size,
        )
    if scores.shape[1] != class_count:
        raise DataError("scores width must equal class_count")
    preds = np.argmax(scores, axis=1)
    f1s = []
    aucs = []
    for cls in range(class_count):
        y = labels == cls
        p = preds == cls
        tp = int(np.sum(p & y))
        fp = int(np.sum(p & ~y))
        fn = int(np.sum(~p & y))
        f1s.append(f1_from_counts(tp, fp, fn))
        aucs.append(binary_auc(scores[:, cls], y))
    macro_f1 = float(np.mean(f1s))
    return MetricReport(
        threshold=threshold,
        f1=macro_f1,
        macro_f1=macro_f1,
        auc=float(np.mean(aucs)),
        accuracy=float(np.mean(preds == labels)),
    )


