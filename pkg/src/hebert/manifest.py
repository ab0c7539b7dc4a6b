"""Per-run JSON manifests: enough to reproduce a run byte-for-byte wherever
determinism is promised (preset, seeds, versions, file hashes)."""

import hashlib
import json
import os
import sys
import time

from . import __version__


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path, command, args_dict, inputs=(), outputs=(), extra=None):
    manifest = {
        "tool": "hebert",
        "version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "args": {
            k: v
            for k, v in sorted(args_dict.items())
            if isinstance(v, (str, int, float, bool, list, tuple))
        },
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "python": sys.version.split()[0],
        "inputs": {os.path.basename(p): file_sha256(p) for p in inputs if os.path.exists(p)},
        "outputs": {os.path.basename(p): file_sha256(p) for p in outputs if os.path.exists(p)},
    }
    if extra:
        manifest.update(extra)
    path = f"{out_path}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
