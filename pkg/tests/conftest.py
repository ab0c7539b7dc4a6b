import os
import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")

from hebert import bootstrap as bs
from hebert import ckks, minimax


@pytest.fixture(scope="session")
def desk():
    return ckks.get_preset("desk")


@pytest.fixture(scope="session")
def desk_keys(desk):
    return ckks.keygen(desk, rng_seed=7)


@pytest.fixture(scope="session")
def sigmoid15():
    path = os.path.join(
        os.path.dirname(__file__), "..", "src", "hebert", "approximants",
        "sigmoid_deg15.txt",
    )
    with open(path, "r", encoding="utf-8") as fh:
        return minimax.import_text(fh.read())


@pytest.fixture(scope="session")
def boot_params():
    return ckks.get_preset("desk-boot")


@pytest.fixture(scope="session")
def boot_ctx64(boot_params):
    return bs.build_context(boot_params, n_slots=64)


@pytest.fixture(scope="session")
def boot_keys(boot_params, boot_ctx64):
    steps = sorted(
        set(
            list(ckks.default_rotation_steps(boot_params))
            + boot_ctx64.required_rotation_steps()
        )
    )
    return ckks.keygen(boot_params, rotation_steps=steps, rng_seed=11)


def make_blob_embeddings(rng, n_per_class, class_count, dim=768, spread=0.35):
    """Synthetic well-separated Gaussian blobs clipped to [-1, 1]."""
    centers = rng.uniform(-0.55, 0.55, size=(class_count, dim))
    X, y = [], []
    for cls in range(class_count):
        pts = centers[cls] + rng.normal(0, spread / np.sqrt(dim), (n_per_class, dim)) * np.sqrt(dim) * 0.12
        X.append(np.clip(pts, -1, 1))
        y.append(np.full(n_per_class, cls))
    X = np.concatenate(X)
    y = np.concatenate(y)
    order = rng.permutation(len(y))
    return X[order], y[order].astype(np.int64)


def make_separable(rng, n, dim=768, margin=0.25):
    """Linearly separable two-class data with a margin, values in [-1, 1]."""
    w = rng.normal(size=dim)
    w /= np.linalg.norm(w)
    X, y = [], []
    while len(X) < n:
        batch = rng.uniform(-1, 1, size=(n, dim))
        z = batch @ w
        keep = np.abs(z) > margin
        for row, val in zip(batch[keep], z[keep]):
            X.append(row)
            y.append(1 if val > 0 else 0)
            if len(X) == n:
                break
    return np.array(X), np.array(y, dtype=np.int64)
