"""Command-line surface for the encrypted-classification pipeline.

The secret key only ever touches `keygen` and `decrypt-scores` (and `train`
when the insecure debug refresher is explicitly requested); `train` and
`predict` operate on the evaluation key bundle alone, mirroring the
client/server trust boundary. Exit codes: 0 ok, 2 usage, 3 data error,
4 crypto error, 5 out of levels.
"""

import argparse
import os
import struct
import sys
import time

import numpy as np

from . import bootstrap as bs
from . import data as dataio
from . import dchi
from . import inversion
from . import logreg
from . import manifest
from . import minimax
from . import reports
from .ckks import (
    decrypt_vector,
    default_rotation_steps,
    deserialize_ciphertext,
    deserialize_keyset,
    get_preset,
    keygen as ckks_keygen,
    serialize_ciphertext,
    serialize_keyset,
    size_report,
)
from .ckks.serial import ciphertext_bytes
from .errors import DataError, HebertError, UsageError

_PACK_MAGIC = b"HPK1"
_SCORE_MAGIC = b"HSC1"


def _load_keys(path, params, need_secret=False):
    with open(path, "rb") as fh:
        ks = deserialize_keyset(fh.read(), params)
    if need_secret and not ks.has_secret:
        raise UsageError(f"{path} holds no secret key")
    return ks


def _write_cts(fh, cts):
    fh.write(struct.pack("<I", len(cts)))
    for ct in cts:
        blob = serialize_ciphertext(ct)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def _read_cts(buf, offset, params):
    (count,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    cts = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        cts.append(deserialize_ciphertext(buf[offset : offset + length], params))
        offset += length
    return cts, offset


def write_pack_file(path, layout, n_rows, class_count, pairs, ovr_streams=None):
    with open(path, "wb") as fh:
        fh.write(_PACK_MAGIC)
        fh.write(
            struct.pack(
                "<IIHH",
                layout.embedding_dim,
                n_rows,
                class_count,
                len(ovr_streams or []),
            )
        )
        _write_cts(fh, [d for d, _ in pairs])
        _write_cts(fh, [l for _, l in pairs])
        for stream in ovr_streams or []:
            _write_cts(fh, stream)


def read_pack_file(path, params):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _PACK_MAGIC:
        raise DataError(f"{path}: not a ciphertext pack file")
    dim, n_rows, class_count, n_streams = struct.unpack_from("<IIHH", buf, 4)
    offset = 4 + 12
    data_cts, offset = _read_cts(buf, offset, params)
    label_cts, offset = _read_cts(buf, offset, params)
    streams = []
    for _ in range(n_streams):
        s, offset = _read_cts(buf, offset, params)
        streams.append(s)
    layout = logreg.make_layout(params, dim)
    pairs = list(zip(data_cts, label_cts))
    return layout, n_rows, class_count, pairs, streams


def _sigmoid_poly(args):
    if getattr(args, "approximant", None):
        with open(args.approximant, "r", encoding="utf-8") as fh:
            return minimax.import_text(fh.read())
    return minimax.remez_fit("sigmoid", (-12, 12), 15)


def _refresher(args, params, keyset):
    if args.refresh == "debug":
        if not args.insecure_debug_refresh:
            raise UsageError(
                "refresh strategy 'debug' requires --insecure-debug-refresh "
                "and --secret-key (it decrypts server-side)"
            )
        secret = _load_keys(args.secret_key, params, need_secret=True)
        return bs.DebugRefresher(secret, enabled=True), None
    ctx_state = bs.build_context(
        params, n_slots=logreg.make_layout(params, args.dim).padded_dim,
        input_periodic=True,
    )
    ctx_data = bs.build_context(params, n_slots=params.slot_count)
    return bs.BootstrapRefresher(ctx_state, keyset), bs.BootstrapRefresher(
        ctx_data, keyset
    )


# -- subcommands --------------------------------------------------------------


def cmd_keygen(args):
    params = get_preset(args.preset)
    steps = list(default_rotation_steps(params))
    if args.bootstrap_slots:
        for n in args.bootstrap_slots:
            ctx = bs.build_context(params, n_slots=n, input_periodic=n < params.slot_count)
            steps.extend(ctx.required_rotation_steps())
    steps = sorted(set(steps))
    ks = ckks_keygen(params, rotation_steps=steps, rng_seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    secret_path = os.path.join(args.out, "secret.ckk")
    eval_path = os.path.join(args.out, "eval.ckk")
    with open(secret_path, "wb") as fh:
        fh.write(serialize_keyset(ks, include_secret=True))
    with open(eval_path, "wb") as fh:
        fh.write(serialize_keyset(ks.public_only(), include_secret=False))
    manifest.write_manifest(
        eval_path, "keygen", vars(args), outputs=[secret_path, eval_path]
    )
    print(f"wrote {secret_path} (keep private) and {eval_path}")
    return 0


def cmd_encrypt_data(args):
    params = get_preset(args.preset)
    ks = _load_keys(args.eval_key, params)
    ds = dataio.read_emb(args.emb)
    layout = logreg.make_layout(params, ds.dim)
    pairs = logreg.pack_batch(
        ds.data, ds.labels.astype(np.float64), layout, params, ks,
        target_level=args.level,
    )
    streams = None
    if ds.class_count > 2:
        streams = logreg.pack_labels_ovr(
            ds.labels, ds.class_count, layout, params, ks, target_level=args.level
        )
    write_pack_file(args.out, layout, ds.rows, ds.class_count, pairs, streams)
    manifest.write_manifest(
        args.out, "encrypt-data", vars(args), inputs=[args.emb], outputs=[args.out]
    )
    total = os.path.getsize(args.out)
    print(f"packed {ds.rows} rows into {len(pairs)} ciphertext pairs at level "
          f"{args.level}: {total} bytes")
    return 0


def cmd_train(args):
    params = get_preset(args.preset)
    ks = _load_keys(args.eval_key, params)
    layout, n_rows, class_count, pairs, streams = read_pack_file(args.data, params)
    args.dim = layout.embedding_dim
    poly = _sigmoid_poly(args)
    refresher, data_refresher = _refresher(args, params, ks)
    config = logreg.TrainConfig(
        learning_rate=args.lr,
        momentum_gamma=args.gamma,
        batch_size=args.batch_size,
        epochs=args.epochs,
        refresh_strategy=args.refresh,
        rng_seed=args.seed,
    )
    model, timing = logreg.train(
        pairs,
        n_rows,
        config,
        params,
        ks,
        poly,
        refresher,
        class_count=class_count,
        ovr_labels=streams or None,
        layout=layout,
        threads=args.threads,
        data_refresher=data_refresher,
    )
    with open(args.out, "wb") as fh:
        fh.write(logreg.serialize_model(model))
    outputs = [args.out]
    if args.timing:
        logreg.write_timing_csv(args.timing, timing)
        outputs.append(args.timing)
    manifest.write_manifest(
        args.out, "train", vars(args), inputs=[args.data], outputs=outputs
    )
    print(f"trained {class_count}-class model ({model.provenance}) -> {args.out}")
    return 0


def cmd_predict(args):
    params = get_preset(args.preset)
    ks = _load_keys(args.eval_key, params)
    layout, n_rows, class_count, pairs, _ = read_pack_file(args.data, params)
    with open(args.model, "rb") as fh:
        model = logreg.deserialize_model(fh.read(), params)
    args.dim = model.layout.embedding_dim
    poly = _sigmoid_poly(args)
    refresher, data_refresher = _refresher(args, params, ks)
    score_cts = logreg.predict(
        model, [d for d, _ in pairs], ks, poly,
        refresher=data_refresher or refresher,
    )
    with open(args.out, "wb") as fh:
        fh.write(_SCORE_MAGIC)
        fh.write(struct.pack("<IH", n_rows, len(score_cts)))
        for stream in score_cts:
            _write_cts(fh, stream)
    manifest.write_manifest(
        args.out, "predict", vars(args),
        inputs=[args.data, args.model], outputs=[args.out],
    )
    print(f"wrote encrypted scores for {n_rows} rows -> {args.out}")
    return 0


def cmd_decrypt_scores(args):
    params = get_preset(args.preset)
    ks = _load_keys(args.secret_key, params, need_secret=True)
    with open(args.scores, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _SCORE_MAGIC:
        raise DataError(f"{args.scores}: not a score file")
    n_rows, n_streams = struct.unpack_from("<IH", buf, 4)
    offset = 10
    streams = []
    for _ in range(n_streams):
        s, offset = _read_cts(buf, offset, params)
        streams.append(s)
    dim = args.dim or 768
    layout = logreg.make_layout(params, dim)
    scores = logreg.decrypt_scores(streams, ks, layout, n_rows)
    scores2d = scores if scores.ndim == 2 else scores[:, None]
    rows = [[i] + [f"{v:.8f}" for v in scores2d[i]] for i in range(n_rows)]
    header = ["row"] + [f"score_{c}" for c in range(scores2d.shape[1])]
    reports.write_csv(args.out, header, rows)
    manifest.write_manifest(
        args.out, "decrypt-scores", vars(args),
        inputs=[args.scores], outputs=[args.out],
    )
    print(f"decrypted {n_rows} score rows -> {args.out}")
    return 0


def _read_scores_csv(path):
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rdr = _csv.reader(fh)
        header = next(rdr)
        vals = [[float(x) for x in row[1:]] for row in rdr]
    arr = np.array(vals)
    return arr[:, 0] if arr.shape[1] == 1 else arr


def cmd_eval(args):
    scores = _read_scores_csv(args.scores)
    ds = dataio.read_emb(args.emb)
    labels = ds.labels.astype(np.int64)
    threshold = args.threshold
    if args.tune_scores:
        tune_s = _read_scores_csv(args.tune_scores)
        tune_ds = dataio.read_emb(args.tune_emb)
        if tune_s.ndim != 1:
            raise UsageError("threshold tuning applies to binary scores")
        threshold = logreg.tune_threshold(tune_s, tune_ds.labels.astype(np.int64))
    report = dataio.compute_metrics(
        scores, labels, threshold=threshold, class_count=ds.class_count
    )
    rows = [[k, f"{v:.6f}"] for k, v in report.as_dict().items()]
    reports.write_csv(args.out, ["metric", "value"], rows)
    fig_path = os.path.splitext(args.out)[0] + ".png"
    reports.render_eval_figure(fig_path, scores, labels, report)
    manifest.write_manifest(
        args.out, "eval", vars(args),
        inputs=[args.scores, args.emb], outputs=[args.out, fig_path],
    )
    for k, v in report.as_dict().items():
        print(f"{k}: {v:.6f}")
    return 0


def cmd_dp_noise(args):
    ds = dataio.read_emb(args.emb)
    params = dchi.NoiseParams(eta=args.eta, dim=ds.dim, rng_seed=args.seed)
    noised = dchi.privatize(ds.data.astype(np.float64), params)
    out_ds = dataio.EmbeddingDataset(
        data=noised.astype(np.float32),
        labels=ds.labels,
        class_count=ds.class_count,
        split_name=ds.split_name,
    )
    dataio.write_emb(args.out, out_ds)
    manifest.write_manifest(
        args.out, "dp-noise", vars(args), inputs=[args.emb], outputs=[args.out]
    )
    print(f"privatized {ds.rows} embeddings at eta={args.eta} -> {args.out}")
    return 0


def cmd_remez(args):
    poly = minimax.remez_fit(args.target, tuple(args.domain), args.degree)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(minimax.export_text(poly))
    manifest.write_manifest(args.out, "remez", vars(args), outputs=[args.out])
    print(
        f"{args.target} degree {args.degree} on [{args.domain[0]}, {args.domain[1]}]: "
        f"max error {poly.certified_max_error:.6g} -> {args.out}"
    )
    return 0


def cmd_size_report(args):
    params = get_preset(args.preset)
    total = size_report(params, args.level, args.rows)
    top = params.max_level
    total_top = size_report(params, top, args.rows)
    ratio = total_top / total
    levels = list(range(0, top + 1))
    szs = [ciphertext_bytes(params, l) for l in levels]
    if args.out:
        reports.write_csv(
            args.out,
            ["level", "bytes_per_ciphertext"],
            [[l, s] for l, s in zip(levels, szs)],
        )
        fig = os.path.splitext(args.out)[0] + ".png"
        reports.render_size_figure(fig, levels, szs)
        manifest.write_manifest(args.out, "size-report", vars(args), outputs=[args.out, fig])
    print(f"preset {args.preset}: {args.rows} ciphertexts at level {args.level}: "
          f"{total} bytes ({total/2**30:.3f} GiB)")
    print(f"level-{top} size would be {total_top} bytes; reduction {ratio:.3f}x")
    return 0


def cmd_invert(args):
    ds = dataio.read_emb(args.emb)
    with open(args.sentences, "r", encoding="utf-8") as fh:
        sentences = [ln.strip() for ln in fh if ln.strip()]
    if len(sentences) != ds.rows:
        raise DataError("sentence count must match embedding rows")
    vocab = inversion.build_vocab(sentences, min_freq=args.min_freq)
    split = int(0.8 * ds.rows)
    cfg = inversion.ProbeConfig(rng_seed=args.seed, epochs=args.epochs)
    token_sets = [set(inversion.tokenize(s)) for s in sentences]
    rows_out = []
    variants = [("plaintext", ds.data.astype(np.float64))]
    for eta in args.etas:
        noised = dchi.privatize(
            ds.data.astype(np.float64),
            dchi.NoiseParams(eta=eta, dim=ds.dim, rng_seed=args.seed),
        )
        variants.append((f"eta={eta:g}", noised))
    for name, emb in variants:
        y = inversion.token_targets(sentences, vocab)
        model = inversion.train_probe(emb[:split], y[:split], cfg, vocab=vocab)
        f1 = inversion.attack_f1(model, emb[split:], token_sets[split:])
        rows_out.append([name, f"{f1:.4f}"])
        print(f"{name}: dev F1 {f1:.4f}")
    reports.write_csv(args.out, ["embedding", "dev_f1"], rows_out)
    fig = os.path.splitext(args.out)[0] + ".png"
    xs = [float(r[0].split("=")[1]) for r in rows_out[1:]]
    ys = [float(r[1]) for r in rows_out[1:]]
    reports.render_sweep_figure(
        fig, xs, ys, "eta", "probe dev F1", "inversion risk vs noise level"
    )
    manifest.write_manifest(
        args.out, "invert", vars(args),
        inputs=[args.emb, args.sentences], outputs=[args.out, fig],
    )
    return 0


def cmd_bench(args):
    from . import ring as rg
    from .ckks import add as ct_add, encrypt_vector, mult, rotate

    params = get_preset(args.preset)
    ks = ckks_keygen(params, rng_seed=0)
    rng = np.random.default_rng(0)
    v = rng.uniform(-1, 1, params.slot_count)
    ct1 = encrypt_vector(params, v, ks)
    ct2 = encrypt_vector(params, v, ks)
    rows = []

    def timeit(name, fn, reps):
        fn()  # warm
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        rows.append([name, (time.perf_counter() - t0) / reps])

    p = rg.sample_poly(params.ring, "uniform", params.max_level, rng)
    timeit("ntt_forward", lambda: rg.ntt_transform(p, "forward"), args.reps)
    timeit("encrypt", lambda: encrypt_vector(params, v, ks), args.reps)
    timeit("decrypt", lambda: decrypt_vector(ct1, ks), args.reps)
    timeit("add", lambda: ct_add(ct1, ct2), args.reps)
    timeit("mult+relin+rescale", lambda: mult(ct1, ct2, ks), args.reps)
    timeit("rotate", lambda: rotate(ct1, 1, ks), args.reps)
    reports.write_csv(args.out, ["op", "seconds"], [[n, f"{t:.6f}"] for n, t in rows])
    fig = os.path.splitext(args.out)[0] + ".png"
    reports.render_bench_figure(fig, [r[0] for r in rows], [r[1] for r in rows])
    manifest.write_manifest(args.out, "bench", vars(args), outputs=[args.out, fig])
    for name, t in rows:
        print(f"{name}: {t*1000:.2f} ms")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="hebert",
        description="Encrypted logistic regression over sentence embeddings "
        "(CKKS), with a metric-DP noising baseline and an inversion probe.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset=True, threads=False):
        if preset:
            sp.add_argument("--preset", default="desk", help="parameter preset name")
        if threads:
            sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("keygen", help="generate key material")
    common(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument(
        "--bootstrap-slots", type=int, nargs="*", default=[],
        help="slot counts to pre-provision bootstrap rotation keys for",
    )
    sp.set_defaults(fn=cmd_keygen)

    sp = sub.add_parser("encrypt-data", help="pack an EMB1 dataset into ciphertexts")
    common(sp)
    sp.add_argument("--eval-key", required=True)
    sp.add_argument("--emb", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--level", type=int, default=logreg.DEFAULT_TRANSPORT_LEVEL)
    sp.set_defaults(fn=cmd_encrypt_data)

    def train_like(sp):
        common(sp, threads=True)
        sp.add_argument("--eval-key", required=True)
        sp.add_argument("--refresh", choices=["bootstrap", "debug"], default="bootstrap")
        sp.add_argument(
            "--insecure-debug-refresh", action="store_true",
            help="allow the decrypt-reencrypt refresher (taints provenance)",
        )
        sp.add_argument("--secret-key", help="required only with the debug refresher")
        sp.add_argument("--approximant", help="sigmoid approximant file (default: fit)")

    sp = sub.add_parser("train", help="train the encrypted classifier")
    train_like(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--timing", help="per-epoch timing CSV")
    sp.add_argument("--lr", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=0.9)
    sp.add_argument("--batch-size", type=int, default=512)
    sp.add_argument("--epochs", type=int, default=1)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("predict", help="encrypted inference")
    train_like(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_predict)

    sp = sub.add_parser("decrypt-scores", help="client-side score decryption")
    common(sp)
    sp.add_argument("--secret-key", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dim", type=int, default=768)
    sp.set_defaults(fn=cmd_decrypt_scores)

    sp = sub.add_parser("eval", help="metrics from decrypted scores")
    sp.add_argument("--scores", required=True)
    sp.add_argument("--emb", required=True, help="EMB1 file carrying the labels")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--tune-scores", help="dev scores CSV for threshold tuning")
    sp.add_argument("--tune-emb", help="dev EMB1 labels for threshold tuning")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("dp-noise", help="d_chi-privacy noising baseline")
    sp.add_argument("--emb", required=True)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_dp_noise)

    sp = sub.add_parser("remez", help="fit a minimax approximant")
    sp.add_argument("--target", default="sigmoid")
    sp.add_argument("--degree", type=int, required=True)
    sp.add_argument("--domain", type=float, nargs=2, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_remez)

    sp = sub.add_parser("size-report", help="ciphertext size accounting")
    sp.add_argument("--preset", default="paper")
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--rows", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_size_report)

    sp = sub.add_parser("invert", help="embedding-inversion risk probe")
    sp.add_argument("--emb", required=True)
    sp.add_argument("--sentences", required=True)
    sp.add_argument("--etas", type=float, nargs="*", default=[175, 50])
    sp.add_argument("--min-freq", type=int, default=2)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_invert)

    sp = sub.add_parser("bench", help="CPU operation timings")
    sp.add_argument("--preset", default="desk")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_bench)

    return p


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.fn(args)
    except HebertError as exc:
        print(exc.cli_line(), file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: module=cli code=E_DATA msg={exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
