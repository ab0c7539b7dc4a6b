"""CLI: hebert-extract extract --input f.tsv --model <id> --out f.emb"""

import argparse
import hashlib
import json
import sys
import time

from .emb1 import Emb1Error
from .extract import DEFAULT_MODEL, ExtractJob, extract


def build_parser():
    p = argparse.ArgumentParser(
        prog="hebert-extract",
        description="Embed labeled text with a pretrained sentence encoder "
        "and emit an EMB1 file for the encrypted-classification pipeline.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("extract", help="embed a TSV of `text<TAB>label` lines")
    sp.add_argument("--input", required=True)
    sp.add_argument("--model", default=DEFAULT_MODEL)
    sp.add_argument("--out", required=True)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--dim", type=int, default=768,
                    help="expected embedding width (0 disables the check)")
    return p


def _manifest(args, shape):
    with open(args.out, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    payload = {
        "tool": "hebert-extract",
        "command": "extract",
        "model": args.model,
        "input": args.input,
        "rows": shape[0],
        "dim": shape[1],
        "output_sha256": digest,
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = f"{args.out}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dispatch(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    job = ExtractJob(
        input_path=args.input,
        model_id=args.model,
        output_path=args.out,
        batch_size=args.batch_size,
        expected_dim=args.dim,
    )
    try:
        shape = extract(job)
    except Emb1Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # model load/encode failures
        print(f"error: model failure: {exc}", file=sys.stderr)
        return 4
    _manifest(args, shape)
    print(f"embedded {shape[0]} rows at dim {shape[1]} -> {args.out}")
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
