"""Shared test helpers: independent oracles, synthetic corpora and curves."""

import math
import os
from pathlib import Path

import numpy as np
import pytest

from midecay import Corpus
from midecay.estimator import DecayCurve

REPO_ROOT = Path(__file__).resolve().parent.parent


# ---------------------------------------------------------------------------
# independent oracles (pure python, no shared code with the implementation)

def naive_pair_counts(seqs, d):
    """Brute-force double loop over every sequence."""
    joint = {}
    for s in seqs:
        s = list(s)
        for t in range(len(s) - d):
            key = (int(s[t]), int(s[t + d]))
            joint[key] = joint.get(key, 0) + 1
    return joint


def naive_mi(joint):
    """Plug-in MI in nats from a joint count dict."""
    n = sum(joint.values())
    px, py = {}, {}
    for (x, y), c in joint.items():
        px[x] = px.get(x, 0) + c
        py[y] = py.get(y, 0) + c
    total = 0.0
    for (x, y), c in joint.items():
        p = c / n
        total += p * math.log(p / ((px[x] / n) * (py[y] / n)))
    return total


def naive_mi_miller_madow(joint):
    """Miller-Madow corrected MI: each entropy corrected by (support-1)/(2N)."""
    n = sum(joint.values())
    px, py = {}, {}
    for (x, y), c in joint.items():
        px[x] = px.get(x, 0) + c
        py[y] = py.get(y, 0) + c

    def ent(counts):
        return -sum((c / n) * math.log(c / n) for c in counts.values())

    hx = ent(px) + (len(px) - 1) / (2 * n)
    hy = ent(py) + (len(py) - 1) / (2 * n)
    hxy = ent({k: c for k, c in joint.items()}) + (len(joint) - 1) / (2 * n)
    return max(0.0, hx + hy - hxy)


def naive_ols(x, y):
    """Closed-form least squares, independent of the implementation."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((xi - mx) ** 2 for xi in x)
    sxy = sum((xi - mx) * (yi - my) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = my - slope * mx
    sse = sum((yi - intercept - slope * xi) ** 2 for xi, yi in zip(x, y))
    return slope, intercept, sse


# ---------------------------------------------------------------------------
# corpus and curve builders

def corpus_from_lists(seqs, alphabet_size, mode="byte"):
    return Corpus(
        sequences=tuple(np.asarray(s, dtype=np.int64) for s in seqs),
        alphabet_size=alphabet_size,
        mode=mode,
    )


def pattern_corpus(pattern_ids, alphabet_size, n_symbols=40000):
    """Deterministic tiling of a fixed pattern."""
    reps = n_symbols // len(pattern_ids) + 1
    arr = np.tile(np.asarray(pattern_ids, dtype=np.int64), reps)[:n_symbols]
    return corpus_from_lists([arr], alphabet_size)


def make_curve(lags, mi, pairs=None, meta=None):
    lags = np.asarray(lags)
    mi = np.maximum(np.asarray(mi, dtype=float), 0.0)
    if pairs is None:
        pairs = np.full(lags.size, 10**6)
    return DecayCurve(lags=lags, mi=mi, pairs=pairs, meta=meta or {})


def _smooth_axis(a, axis):
    p = np.swapaxes(a, 0, axis)
    padded = np.concatenate([p[:1], p, p[-1:]], axis=0)
    out = 0.25 * padded[:-2] + 0.5 * padded[1:-1] + 0.25 * padded[2:]
    return np.swapaxes(out, 0, axis)


def synth_images(n_images, seed=0, side=28, levels=32):
    """Spatially correlated random images, shape (n_images, side*side), uint8.

    Correlation length ~1.5 px: row-major flattening yields MI peaks at
    multiples of `side`, like digit images do.
    """
    rng = np.random.default_rng(seed)
    field = _smooth_axis(_smooth_axis(rng.normal(size=(n_images, side, side)), 1), 2)
    lo, hi = field.min(), field.max()
    q = np.clip(((field - lo) / (hi - lo) * (levels - 1)).round(), 0, levels - 1)
    return (q * (256 // levels)).astype(np.uint8).reshape(n_images, side * side)


def image_corpus(n_images, seed=0, side=28):
    imgs = synth_images(n_images, seed=seed, side=side)
    return Corpus(
        sequences=tuple(imgs[i] for i in range(imgs.shape[0])),
        alphabet_size=256,
        mode="pixel",
    )


# ---------------------------------------------------------------------------
# optional real datasets for the data-gated acceptance criteria

def dataset_path(env_var, *default_names):
    """Resolve a dataset file from an env var or the repo data/ directory."""
    candidates = []
    if os.environ.get(env_var):
        candidates.append(Path(os.environ[env_var]))
    for name in default_names:
        candidates.append(REPO_ROOT / "data" / name)
    for p in candidates:
        if p.is_file():
            return p
    return None


def require_dataset(env_var, *default_names):
    p = dataset_path(env_var, *default_names)
    if p is None:
        pytest.skip(
            f"dataset not present: set {env_var} or place one of "
            f"{default_names} under {REPO_ROOT / 'data'}"
        )
    return p
