"""Encrypted logistic regression over packed embedding batches.

Packing: each example occupies one contiguous padded_dim block of slots,
rows_per_ct examples per ciphertext; the bias is a constant-1 feature in the
first padding slot. Inner products are rotate-and-sum over the feature axis;
gradients rotate-and-sum over the block axis (which also broadcasts them).
One-vs-Rest training runs an independent binary model per class with
identical seeds, so class order cannot change results.
"""

import logging
import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import minimax
from .ckks import ops
from .ckks.encoding import encode
from .ckks.serial import deserialize_ciphertext, serialize_ciphertext
from .data import binary_counts, f1_from_counts
from .errors import CryptoError, DataError, OutOfLevelsError

log = logging.getLogger(__name__)

DEFAULT_TRANSPORT_LEVEL = 3


@dataclass(frozen=True)
class PackingLayout:
    embedding_dim: int
    padded_dim: int
    rows_per_ct: int
    slot_count: int

    def __post_init__(self):
        if self.padded_dim & (self.padded_dim - 1):
            raise DataError("padded_dim must be a power of two")
        if self.padded_dim <= self.embedding_dim:
            raise DataError("padded_dim must exceed embedding_dim (bias slot)")
        if self.padded_dim * self.rows_per_ct > self.slot_count:
            raise DataError("layout exceeds slot count")

    @property
    def bias_index(self):
        return self.embedding_dim  # constant-1 feature in the padding region


def make_layout(params, embedding_dim):
    padded = 1 << max(1, math.ceil(math.log2(embedding_dim + 1)))
    return PackingLayout(
        embedding_dim=embedding_dim,
        padded_dim=padded,
        rows_per_ct=params.slot_count // padded,
        slot_count=params.slot_count,
    )


@dataclass
class TrainConfig:
    learning_rate: float = 1.0
    momentum_gamma: float = 0.9
    batch_size: int = 512
    epochs: int = 1
    refresh_strategy: str = "debug"  # "bootstrap" | "debug"
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be positive")
        if not 0 <= self.momentum_gamma < 1:
            raise DataError("momentum_gamma must be in [0, 1)")
        if self.refresh_strategy not in ("bootstrap", "debug"):
            raise DataError(f"unknown refresh strategy {self.refresh_strategy!r}")


# Hyperparameters reported for the full-scale runs, exposed as presets.
TRAIN_PRESETS = {
    "twitter-cipher": TrainConfig(3.0, 0.9, 512, 10),
    "twitter-plain": TrainConfig(3.0, 0.9, 256, 10),
    "snips-cipher": TrainConfig(2.0, 0.1, 512, 10),
    "snips-plain": TrainConfig(3.0, 0.1, 128, 10),
}


@dataclass
class EncryptedModel:
    class_count: int
    layout: PackingLayout
    weights: list  # per-class weight ciphertext (replicated per block)
    momenta: list  # per-class momentum ciphertext
    provenance: str = "secure"  # "secure" | "insecure_debug_refresh"

    def __post_init__(self):
        if self.class_count < 2:
            raise DataError("class_count must be >= 2")
        if len(self.weights) != (1 if self.class_count == 2 else self.class_count):
            raise DataError("OvR requires one binary model per class")


def binary_model_count(class_count):
    return 1 if class_count == 2 else class_count


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------


def _pack_slots(X_rows, layout):
    slots = np.zeros(layout.slot_count)
    for b, row in enumerate(X_rows):
        base = b * layout.padded_dim
        slots[base : base + layout.embedding_dim] = row
        slots[base + layout.bias_index] = 1.0
    return slots


def _pack_label_slots(y_rows, layout):
    slots = np.zeros(layout.slot_count)
    for b, val in enumerate(y_rows):
        base = b * layout.padded_dim
        slots[base : base + layout.padded_dim] = val
    return slots


def pack_batch(X, y, layout, params, keyset, target_level=DEFAULT_TRANSPORT_LEVEL):
    """Encrypt rows into (data, label) ciphertext pairs at the transport level.

    Data blocks hold the embedding plus the constant bias feature; label
    ciphertexts hold each row's label replicated across its block. Packing
    happens client-side: the server only ever receives ciphertexts.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layout.embedding_dim:
        raise DataError(f"rows must have length {layout.embedding_dim}")
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
    if bad.size:
        raise DataError(f"non-finite values in row {int(bad[0])}")
    if y.shape[0] != X.shape[0]:
        raise DataError("label count must match rows")
    out = []
    r = layout.rows_per_ct
    for start in range(0, X.shape[0], r):
        rows = X[start : start + r]
        labels = y[start : start + r]
        data_ct = ops.encrypt(
            encode(params, _pack_slots(rows, layout), target_level), keyset
        )
        label_ct = ops.encrypt(
            encode(params, _pack_label_slots(labels, layout), target_level), keyset
        )
        out.append((data_ct, label_ct))
    return out


def pack_labels_ovr(y, class_count, layout, params, keyset,
                    target_level=DEFAULT_TRANSPORT_LEVEL):
    """Client-side one-vs-rest label streams: one binarized-label ciphertext
    list per class, so the trainer never needs plaintext labels."""
    y = np.asarray(y, dtype=np.int64)
    streams = []
    for cls in range(class_count):
        y_bin = (y == cls).astype(np.float64)
        cts = []
        for start in range(0, y.shape[0], layout.rows_per_ct):
            rows = y_bin[start : start + layout.rows_per_ct]
            cts.append(
                ops.encrypt(
                    encode(params, _pack_label_slots(rows, layout), target_level),
                    keyset,
                )
            )
        streams.append(cts)
    return streams


def unpack_rows(slot_values, layout, n_rows):
    """Inverse of the data packing for up to n_rows rows."""
    rows = []
    for b in range(min(n_rows, layout.rows_per_ct)):
        base = b * layout.padded_dim
        rows.append(slot_values[base : base + layout.embedding_dim])
    return np.array(rows)


def block_head_values(slot_values, layout, n_rows):
    """Slot 0 of each example block (where reductions land)."""
    idx = np.arange(min(n_rows, layout.rows_per_ct)) * layout.padded_dim
    return np.asarray(slot_values)[idx]


# ---------------------------------------------------------------------------
# encrypted kernels
# ---------------------------------------------------------------------------


def _rotsum_features(ct, layout, keyset):
    sh = 1
    while sh < layout.padded_dim:
        ct = ops.add(ct, ops.rotate(ct, sh, keyset))
        sh <<= 1
    return ct


def _broadcast_heads(ct, layout, keyset):
    sh = 1
    while sh < layout.padded_dim:
        ct = ops.add(ct, ops.rotate(ct, -sh, keyset))
        sh <<= 1
    return ct


def _rotsum_blocks(ct, layout, keyset):
    sh = layout.padded_dim
    while sh < layout.padded_dim * layout.rows_per_ct:
        ct = ops.add(ct, ops.rotate(ct, sh, keyset))
        sh <<= 1
    return ct


def _head_mask(layout, value):
    mask = np.zeros(layout.slot_count)
    mask[:: layout.padded_dim] = value
    return mask


def encrypted_dot(data_ct, weight_ct, layout, keyset, mask_value=1.0):
    """Per-block inner product w.x_b, replicated across each block.

    Consumes two levels (product + head mask); mask_value folds an optional
    constant factor (the trainer uses it to pre-scale logits into the
    sigmoid approximant's domain).
    """
    prod = ops.mult(data_ct, weight_ct, keyset)
    summed = _rotsum_features(prod, layout, keyset)
    heads = ops.mult_plain(summed, _head_mask(layout, mask_value))
    return _broadcast_heads(heads, layout, keyset)


def iteration_depth(sigmoid_poly):
    """Levels consumed by one training iteration starting from fresh cts."""
    return 4 + ops.bsgs_depth(sigmoid_poly.degree, prescaled=True)


def predict_depth(sigmoid_poly):
    return 2 + ops.bsgs_depth(sigmoid_poly.degree, prescaled=True)


def _domain_halfwidth(poly):
    a, b = poly.domain
    if abs(a + b) > 1e-9:
        raise CryptoError("sigmoid approximant domain must be symmetric")
    return (b - a) / 2.0


def _class_scores_ct(data_hi, weight_ct, layout, keyset, poly, extra_scale=1.0):
    """sigma(w.x) per block via the fused prescale mask, optionally times a
    folded constant (the trainer folds lr/B here)."""
    half = _domain_halfwidth(poly)
    logits = encrypted_dot(data_hi, weight_ct, layout, keyset, mask_value=1.0 / half)
    use_poly = poly if extra_scale == 1.0 else poly.scaled(extra_scale)
    return ops.eval_poly_bsgs(logits, use_poly, keyset, input_prescaled=True)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _zeros_ct(params, keyset, level):
    ct = ops.encrypt(encode(params, np.zeros(params.slot_count), level), keyset)
    return ct


def _batches(n_cts, rows_per_ct, total_rows, batch_size):
    """Yield (ct_indices, actual_rows) per batch; partial tail allowed."""
    cts_per_batch = batch_size // rows_per_ct
    for start in range(0, n_cts, cts_per_batch):
        idx = list(range(start, min(start + cts_per_batch, n_cts)))
        first_row = start * rows_per_ct
        rows = min(batch_size, total_rows - first_row)
        yield idx, rows


def train(
    train_pairs,
    n_rows,
    config,
    params,
    keyset,
    sigmoid_poly,
    refresher,
    class_count=2,
    ovr_labels=None,
    layout=None,
    threads=1,
    data_refresher=None,
    dev_pairs=None,
):
    """OvR encrypted SGD with Nesterov momentum (lookahead form).

    train_pairs: packed (data, label) ciphertexts from pack_batch. Binary
    training consumes the packed label ciphertexts directly; multiclass
    needs ovr_labels from pack_labels_ovr. The trainer sees only ciphertexts
    and public key material. dev_pairs is accepted for interface symmetry
    (validation happens client-side after decrypt).

    Returns (EncryptedModel, timing_rows): timing rows carry epoch, seconds,
    level_refreshes.
    """
    layout = layout or make_layout(params, 768)
    if config.batch_size % layout.rows_per_ct:
        raise DataError("batch_size must be a multiple of rows_per_ct")
    need = iteration_depth(sigmoid_poly)
    if refresher.output_level < need:
        raise OutOfLevelsError(
            f"refresh strategy yields level {refresher.output_level}, below the "
            f"per-iteration depth {need}"
        )
    n_models = binary_model_count(class_count)
    if n_models == 1:
        y_streams = [[lbl for _, lbl in train_pairs]]
    else:
        if ovr_labels is None or len(ovr_labels) != n_models:
            raise DataError("multiclass training needs pack_labels_ovr streams")
        y_streams = ovr_labels
    for stream in y_streams:
        if any(ct.level < 2 for ct in stream):
            raise OutOfLevelsError("label ciphertexts need level >= 2")

    data_refresher = data_refresher or refresher
    t_setup = time.perf_counter()
    data_hi = [data_refresher.refresh(d) for d, _ in train_pairs]
    log.info("data refresh took %.1fs", time.perf_counter() - t_setup)

    top = refresher.output_level
    weights = [_zeros_ct(params, keyset, top) for _ in range(n_models)]
    momenta = [_zeros_ct(params, keyset, top) for _ in range(n_models)]
    refresh_count = [0]
    epoch_seconds = [0.0] * config.epochs
    gamma = config.momentum_gamma
    lr = config.learning_rate
    insecure = getattr(refresher, "insecure", False) or getattr(
        data_refresher, "insecure", False
    )

    def grad_for_ct(ci, cls, wl, batch_rows):
        probs = _class_scores_ct(
            data_hi[ci], wl, layout, keyset, sigmoid_poly,
            extra_scale=lr / batch_rows,
        )
        y_s = ops.mult_plain(y_streams[cls][ci], lr / batch_rows)
        err = ops.sub(probs, y_s)
        g = ops.mult(ops.mod_down(data_hi[ci], err.level), err, keyset)
        return _rotsum_blocks(g, layout, keyset)

    def train_class(cls):
        w, u = weights[cls], momenta[cls]
        for epoch in range(config.epochs):
            t_ep = time.perf_counter()
            for idx, rows in _batches(
                len(train_pairs), layout.rows_per_ct, n_rows, config.batch_size
            ):
                if gamma > 0:
                    gamma_u = ops.mult_plain(u, gamma)
                    w_look = ops.sub(w, gamma_u)
                else:
                    gamma_u = None
                    w_look = w
                if threads > 1 and len(idx) > 1:
                    with ThreadPoolExecutor(max_workers=threads) as pool:
                        grads = list(
                            pool.map(lambda ci: grad_for_ct(ci, cls, w_look, rows), idx)
                        )
                else:
                    grads = [grad_for_ct(ci, cls, w_look, rows) for ci in idx]
                G = grads[0]
                for g in grads[1:]:  # fixed-order summation for reproducibility
                    G = ops.add(G, g)
                u = ops.add(gamma_u, G) if gamma_u is not None else G
                w = ops.sub(w, u)
                w = refresher.refresh(w)
                u = refresher.refresh(u)
                refresh_count[0] += 2
            epoch_seconds[epoch] += time.perf_counter() - t_ep
        weights[cls], momenta[cls] = w, u

    if threads > 1 and n_models > 1:
        with ThreadPoolExecutor(max_workers=min(threads, n_models)) as pool:
            list(pool.map(train_class, range(n_models)))
    else:
        for cls in range(n_models):
            train_class(cls)
    timing = [
        {
            "epoch": epoch,
            "seconds": epoch_seconds[epoch],
            "level_refreshes": refresh_count[0] // config.epochs,
        }
        for epoch in range(config.epochs)
    ]

    model = EncryptedModel(
        class_count=class_count,
        layout=layout,
        weights=weights,
        momenta=momenta,
        provenance="insecure_debug_refresh"
        if insecure or any(w.insecure_provenance for w in weights)
        else "secure",
    )
    return model, timing


def predict(model, data_cts, keyset, sigmoid_poly, refresher=None):
    """Per-class encrypted probability scores (replicated per block).

    The caller decrypts and applies threshold/argmax client-side; only the
    secret-key holder ever sees scores or labels.
    """
    need = predict_depth(sigmoid_poly)
    out = []
    prepared = []
    for ct in data_cts:
        if ct.slot_count != model.layout.slot_count:
            raise DataError("data layout does not match the model")
        if ct.level < need:
            if refresher is None:
                raise OutOfLevelsError(
                    f"prediction needs level {need}, ciphertext at {ct.level}"
                )
            ct = refresher.refresh(ct)
        prepared.append(ct)
    for w in model.weights:
        out.append(
            [
                _class_scores_ct(ct, w, model.layout, keyset, sigmoid_poly)
                for ct in prepared
            ]
        )
    return out


def decrypt_scores(score_cts, keyset, layout, n_rows):
    """Client-side: block-head probabilities for each class stream."""
    from .ckks import decrypt_vector

    all_scores = []
    for per_class in score_cts:
        vals = []
        remaining = n_rows
        for ct in per_class:
            slots = decrypt_vector(ct, keyset)
            take = min(layout.rows_per_ct, remaining)
            vals.extend(block_head_values(slots, layout, take))
            remaining -= take
        all_scores.append(np.array(vals))
    scores = np.stack(all_scores, axis=1)
    return scores[:, 0] if scores.shape[1] == 1 else scores


def tune_threshold(dev_scores, dev_labels):
    """Threshold maximizing binary F1 over midpoints of sorted unique scores.

    Ties in F1 break toward 0.5 (then toward the smaller threshold).
    """
    scores = np.asarray(dev_scores, dtype=np.float64)
    labels = np.asarray(dev_labels).astype(np.int64)
    if np.unique(labels).size < 2:
        raise DataError("threshold tuning needs both classes in the dev set")
    uniq = np.unique(scores)
    if uniq.size < 2:
        return 0.5
    candidates = (uniq[:-1] + uniq[1:]) / 2.0
    best = None
    for t in candidates:
        tp, fp, fn, _ = binary_counts(scores, labels, t)
        f1 = f1_from_counts(tp, fp, fn)
        key = (-f1, abs(t - 0.5), t)
        if best is None or key < best[0]:
            best = (key, t)
    return float(best[1])


# ---------------------------------------------------------------------------
# plaintext shadow (the independent oracle the encrypted path must track)
# ---------------------------------------------------------------------------


@dataclass
class ShadowResult:
    weights: np.ndarray  # (n_models, padded_dim) including bias/padding slots
    losses: list
    domain_breaches: int


def shadow_train(X, labels, config, sigmoid_poly, class_count=2, layout=None):
    """Plaintext mirror of the encrypted trainer: same packing (bias as a
    constant feature), same polynomial sigmoid, same lookahead updates and
    batch order. float64 throughout."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    layout = layout or PackingLayout(
        embedding_dim=X.shape[1],
        padded_dim=1 << max(1, math.ceil(math.log2(X.shape[1] + 1))),
        rows_per_ct=1,
        slot_count=1 << max(1, math.ceil(math.log2(X.shape[1] + 1))),
    )
    pd = layout.padded_dim
    Xp = np.zeros((X.shape[0], pd))
    Xp[:, : X.shape[1]] = X
    Xp[:, layout.bias_index] = 1.0
    half = _domain_halfwidth(sigmoid_poly)
    n_models = binary_model_count(class_count)
    gamma, lr = config.momentum_gamma, config.learning_rate
    weights = np.zeros((n_models, pd))
    losses = []
    breaches = 0
    for cls in range(n_models):
        y = (labels == (cls if n_models > 1 else 1)).astype(np.float64)
        w = np.zeros(pd)
        u = np.zeros(pd)
        for _ in range(config.epochs):
            epoch_loss = 0.0
            for start in range(0, X.shape[0], config.batch_size):
                xb = Xp[start : start + config.batch_size]
                yb = y[start : start + config.batch_size]
                rows = xb.shape[0]
                w_look = w - gamma * u
                z = xb @ w_look
                if np.any(np.abs(z) > half):
                    breaches += int(np.sum(np.abs(z) > half))
                    log.warning(
                        "logit domain breach: |z| up to %.2f exceeds %.1f",
                        float(np.max(np.abs(z))),
                        half,
                    )
                probs = minimax.eval_cheb(sigmoid_poly, z)
                G = xb.T @ (probs - yb) * (lr / rows)
                u = gamma * u + G
                w = w - u
                p_clip = np.clip(probs, 1e-9, 1 - 1e-9)
                epoch_loss -= float(
                    np.sum(yb * np.log(p_clip) + (1 - yb) * np.log(1 - p_clip))
                )
            losses.append(epoch_loss / X.shape[0])
        weights[cls] = w
    return ShadowResult(weights=weights, losses=losses, domain_breaches=breaches)


def shadow_scores(X, shadow_weights, sigmoid_poly, layout=None):
    X = np.asarray(X, dtype=np.float64)
    pd = shadow_weights.shape[1]
    Xp = np.zeros((X.shape[0], pd))
    Xp[:, : X.shape[1]] = X
    bias_index = X.shape[1] if layout is None else layout.bias_index
    Xp[:, bias_index] = 1.0
    z = Xp @ shadow_weights.T
    probs = minimax.eval_cheb(sigmoid_poly, z)
    return probs[:, 0] if probs.shape[1] == 1 else probs


def decrypted_weights(model, keyset):
    """Per-class weight vectors (first block) from an encrypted model."""
    from .ckks import decrypt_vector

    out = []
    for w in model.weights:
        slots = decrypt_vector(w, keyset)
        out.append(slots[: model.layout.padded_dim])
    return np.array(out)


# ---------------------------------------------------------------------------
# model files (magic HLR1)
# ---------------------------------------------------------------------------

_HLR_MAGIC = b"HLR1"


def serialize_model(model):
    head = struct.pack(
        "<4sHHIIB",
        _HLR_MAGIC,
        model.class_count,
        binary_model_count(model.class_count),
        model.layout.embedding_dim,
        model.layout.padded_dim,
        1 if model.provenance == "insecure_debug_refresh" else 0,
    )
    parts = [head]
    for w, u in zip(model.weights, model.momenta):
        for ct in (w, u):
            blob = serialize_ciphertext(ct)
            parts.append(struct.pack("<I", len(blob)))
            parts.append(blob)
    return b"".join(parts)


def deserialize_model(buf, params):
    head = struct.Struct("<4sHHIIB")
    magic, class_count, n_models, dim, padded, insecure = head.unpack_from(buf)
    if magic != _HLR_MAGIC:
        raise DataError("model magic mismatch")
    layout = PackingLayout(
        embedding_dim=dim,
        padded_dim=padded,
        rows_per_ct=params.slot_count // padded,
        slot_count=params.slot_count,
    )
    offset = head.size
    weights, momenta = [], []
    for _ in range(n_models):
        pair = []
        for _ in range(2):
            (length,) = struct.unpack_from("<I", buf, offset)
            offset += 4
            pair.append(deserialize_ciphertext(buf[offset : offset + length], params))
            offset += length
        weights.append(pair[0])
        momenta.append(pair[1])
    return EncryptedModel(
        class_count=class_count,
        layout=layout,
        weights=weights,
        momenta=momenta,
        provenance="insecure_debug_refresh" if insecure else "secure",
    )


def write_timing_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,seconds,level_refreshes\n")
        for r in rows:
            fh.write(f"{r['epoch']},{r['seconds']:.3f},{r['level_refreshes']}\n")
    return path
