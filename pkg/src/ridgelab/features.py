"""Random ReLU feature classification: IDX ingestion, feature embedding,
multi-output ridge, and sweep drivers.

A classifier with D random features embeds inputs as ReLU(W x) for a frozen
Gaussian W and fits one ridge regression per class against one-hot targets.
Sweeping the sample count at fixed D (or D at fixed n) around the
interpolation threshold D = n exhibits double descent for vanishing
regularization; the per-point minimum over a lambda grid is the tuned
envelope.

Datasets are either MNIST-family IDX files (optionally gzipped) or a
seeded synthetic 10-class Gaussian mixture with flipped labels, calibrated
so the unregularized test error peaks at the interpolation threshold.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .rng import substream

__all__ = [
    "Dataset",
    "FeatureModel",
    "EvalResult",
    "load_idx_dataset",
    "load_idx_pair",
    "synthetic_dataset",
    "sample_feature_matrix",
    "relu_embed",
    "fit_ridge_multi",
    "eval_classifier",
    "subsample",
    "feature_sweep",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Covariates normalized to [-1, 1] with integer class labels and their
    one-hot encoding."""

    inputs: np.ndarray
    labels: np.ndarray
    one_hot: np.ndarray
    name: str

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        labels = np.asarray(self.labels)
        one_hot = np.asarray(self.one_hot, dtype=float)
        n = x.shape[0]
        if labels.shape != (n,) or one_hot.shape[0] != n:
            raise ValueError("inputs, labels and one_hot must align")
        if np.abs(x).max(initial=0.0) > 1.0 + 1e-9:
            raise ValueError("inputs must lie in [-1, 1]")
        rows = one_hot.sum(axis=1)
        if one_hot.size and (
            not np.allclose(rows, 1.0)
            or not np.array_equal(one_hot.argmax(axis=1), labels)
        ):
            raise ValueError("one_hot rows must be unit indicators of labels")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.one_hot.shape[1]


@dataclass(frozen=True)
class FeatureModel:
    """Frozen random feature matrix with solved output weights."""

    W: np.ndarray
    lam: float
    weights: np.ndarray  # D x C

    @property
    def num_features(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class EvalResult:
    classification_error: float
    mse: float


# ---------------------------------------------------------------------------
# IDX ingestion
# ---------------------------------------------------------------------------


def _open_maybe_gzip(path: str):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count: int, path: str, offset: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(
            f"{path}: truncated at byte {offset + len(data)} "
            f"(wanted {count} bytes from offset {offset})"
        )
    return data


def _read_idx_images(path: str) -> np.ndarray:
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 16, path, 0)
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IMAGE_MAGIC:
            raise ValueError(
                f"{path}: bad image magic 0x{magic:08x} at byte 0 "
                f"(expected 0x{IMAGE_MAGIC:08x})"
            )
        body = _read_exact(fh, count * rows * cols, path, 16)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after image data")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(float) / 255.0 * 2.0 - 1.0


def _read_idx_labels(path: str) -> np.ndarray:
    with _open_maybe_gzip(path) as fh:
        header = _read_exact(fh, 8, path, 0)
        magic, count = struct.unpack(">II", header)
        if magic != LABEL_MAGIC:
            raise ValueError(
                f"{path}: bad label magic 0x{magic:08x} at byte 0 "
                f"(expected 0x{LABEL_MAGIC:08x})"
            )
        body = _read_exact(fh, count, path, 8)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after label data")
    labels = np.frombuffer(body, dtype=np.uint8)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise ValueError(
            f"{path}: label {labels[bad]} out of range 0..9 at item {bad} "
            f"(byte {8 + bad})"
        )
    return labels.astype(np.int64)


def load_idx_pair(images_path: str, labels_path: str, name: str) -> Dataset:
    """Load one (images, labels) IDX pair into a Dataset."""
    inputs = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if inputs.shape[0] != labels.shape[0]:
        raise ValueError(
            f"image/label count mismatch: {images_path} has {inputs.shape[0]} "
            f"items, {labels_path} has {labels.shape[0]}"
        )
    one_hot = np.eye(10)[labels]
    return Dataset(inputs=inputs, labels=labels, one_hot=one_hot, name=name)


_SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_idx_dataset(directory: str, split: str = "train") -> Dataset:
    """Load the standard MNIST-family file layout from a directory.

    Looks for ``train-images-idx3-ubyte`` / ``train-labels-idx1-ubyte``
    (or the ``t10k-`` test pair), each optionally with a ``.gz`` suffix.
    """
    if split not in _SPLIT_FILES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    images_name, labels_name = _SPLIT_FILES[split]

    def locate(base: str) -> str:
        for candidate in (base, base + ".gz"):
            full = os.path.join(directory, candidate)
            if os.path.exists(full):
                return full
        raise FileNotFoundError(
            f"{directory}: missing {base}[.gz] (IDX {split} split)"
        )

    return load_idx_pair(
        locate(images_name), locate(labels_name), name=f"idx:{split}"
    )


# ---------------------------------------------------------------------------
# synthetic fallback
# ---------------------------------------------------------------------------

_SYNTH_MEANS_SEED = 1234567


def synthetic_dataset(
    n: int,
    seed: int,
    dim: int = 784,
    classes: int = 10,
    name: str = "synthetic",
    mean_scale: float = 0.35,
    noise: float = 0.45,
    label_noise: float = 0.15,
) -> Dataset:
    """Seeded 10-class Gaussian mixture in [-1, 1]^dim with flipped labels.

    Class means are fixed (independent of `seed`) so that different draws
    share one classification problem; per-call randomness covers the class
    assignments, covariate noise, and label flips.  The label noise makes
    interpolation costly, producing a clear test-error peak at D = n.
    """
    means = substream(_SYNTH_MEANS_SEED, 99).uniform(
        -mean_scale, mean_scale, (classes, dim)
    )
    rng = substream(seed, 0)
    labels = rng.integers(0, classes, n)
    x = np.clip(means[labels] + noise * rng.standard_normal((n, dim)), -1.0, 1.0)
    flip = rng.random(n) < label_noise
    labels = np.where(flip, rng.integers(0, classes, n), labels)
    one_hot = np.eye(classes)[labels]
    return Dataset(inputs=x, labels=labels, one_hot=one_hot, name=name)


# ---------------------------------------------------------------------------
# embedding and solving
# ---------------------------------------------------------------------------


def sample_feature_matrix(
    num_features: int, dim: int, seed: int, scale_convention: str = "var-inv-sqrt-dim"
) -> np.ndarray:
    """Frozen D x dim Gaussian feature matrix.

    ``var-inv-sqrt-dim`` draws entries with variance 1/sqrt(dim) (the
    literal reading of the feature-scale convention); ``var-inv-dim`` is
    the common 1/dim-variance alternative.
    """
    if scale_convention == "var-inv-sqrt-dim":
        std = dim**-0.25
    elif scale_convention == "var-inv-dim":
        std = dim**-0.5
    else:
        raise ValueError(f"unknown scale convention {scale_convention!r}")
    return substream(seed, 5).standard_normal((num_features, dim)) * std


def relu_embed(inputs: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x W^T): n x D features."""
    inputs = np.asarray(inputs, dtype=float)
    W = np.asarray(W, dtype=float)
    if inputs.ndim != 2 or W.ndim != 2 or inputs.shape[1] != W.shape[1]:
        raise ValueError(
            f"shape mismatch: inputs {inputs.shape} vs features {W.shape}"
        )
    return np.maximum(inputs @ W.T, 0.0)


def fit_ridge_multi(
    features: np.ndarray,
    targets: np.ndarray,
    lam: float,
    return_info: bool = False,
):
    """Multi-output ridge weights for min |phi w - y|^2 + lam |w|^2.

    Solves the primal D x D normal equations when D <= n and the dual
    n x n system w = phi^T (phi phi^T + lam I)^{-1} y otherwise; the two
    agree to 1e-8 relative for lam > 0.  lam == 0 falls back to the
    pseudoinverse (minimum-norm) solution, flagged in the info dict.
    """
    phi = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if phi.ndim != 2 or y.ndim != 2 or phi.shape[0] != y.shape[0]:
        raise ValueError("features and targets must align on rows")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n, num_features = phi.shape
    info = {"path": None, "pseudoinverse": False}
    if lam == 0.0:
        weights = np.linalg.lstsq(phi, y, rcond=None)[0]
        info.update(path="pseudoinverse", pseudoinverse=True)
    elif num_features <= n:
        weights = np.linalg.solve(
            phi.T @ phi + lam * np.eye(num_features), phi.T @ y
        )
        info["path"] = "primal"
    else:
        weights = phi.T @ np.linalg.solve(phi @ phi.T + lam * np.eye(n), y)
        info["path"] = "dual"
    if return_info:
        return weights, info
    return weights


def eval_classifier(model: FeatureModel, dataset: Dataset) -> EvalResult:
    """Classification error (argmax with ties to the lowest class) and mean
    squared error per row against one-hot targets."""
    scores = relu_embed(dataset.inputs, model.W) @ model.weights
    predicted = scores.argmax(axis=1)
    error = float(np.mean(predicted != dataset.labels))
    mse = float(np.mean(np.sum((scores - dataset.one_hot) ** 2, axis=1)))
    return EvalResult(classification_error=error, mse=mse)


def subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    """n training points drawn uniformly without replacement.

    Implemented as a prefix of one seeded permutation, so subsets for
    growing n are nested (a sample-count sweep sees coupled training sets).
    """
    if n > dataset.n:
        raise ValueError(f"cannot take {n} points from {dataset.n}")
    idx = substream(seed, 6).permutation(dataset.n)[:n]
    return Dataset(
        inputs=dataset.inputs[idx],
        labels=dataset.labels[idx],
        one_hot=dataset.one_hot[idx],
        name=dataset.name,
    )


def feature_sweep(
    train: Dataset,
    test: Dataset,
    sweep: str,
    values,
    fixed: int,
    lambdas,
    seed: int,
) -> list[dict]:
    """Sample-wise (sweep='n', fixed=D) or model-wise (sweep='D', fixed=n)
    random-feature sweep.

    For each sweep value and each lambda, fits the classifier on a fresh
    subsample / feature draw (deterministic in seed) and records train MSE
    plus test error and MSE.  Returns a list of flat records.
    """
    if sweep not in ("n", "D"):
        raise ValueError("sweep must be 'n' or 'D'")
    records = []
    dim = train.inputs.shape[1]
    for value in values:
        n = value if sweep == "n" else fixed
        num_features = fixed if sweep == "n" else value
        # one permutation seed shared across the sweep: training subsets are
        # nested in n; the feature draw is frozen per D
        subset = subsample(train, n, seed)
        w = sample_feature_matrix(num_features, dim, seed + 7 * num_features + 1)
        phi = relu_embed(subset.inputs, w)
        phi_test = relu_embed(test.inputs, w)  # shared by the whole lambda grid
        for lam in lambdas:
            weights = fit_ridge_multi(phi, subset.one_hot, lam)
            fitted = phi @ weights
            train_mse = float(np.mean(np.sum((fitted - subset.one_hot) ** 2, axis=1)))
            scores = phi_test @ weights
            test_error = float(np.mean(scores.argmax(axis=1) != test.labels))
            test_mse = float(np.mean(np.sum((scores - test.one_hot) ** 2, axis=1)))
            records.append(
                {
                    "sweep": sweep,
                    "value": int(value),
                    "n": int(n),
                    "D": int(num_features),
                    "lambda": float(lam),
                    "train_mse": train_mse,
                    "test_error": test_error,
                    "test_mse": test_mse,
                }
            )
    return records
