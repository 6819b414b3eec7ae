"""Image datasets (PGM/PPM directories or a seeded synthetic generator) and metrics."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import substream

IMAGE_SUFFIXES = (".pgm", ".ppm")


@dataclass
class DatasetSplit:
    """Train/test images as (n, C, H, W) arrays in [0, 1] with integer labels."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    class_names: list[str]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.train_x.shape[1:])


# --- PNM ---------------------------------------------------------------------

def _header_tokens(buf: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(path) -> np.ndarray:
    """Decode a binary 8-bit PGM (P5) or PPM (P6) into a (C, H, W) uint8 array."""
    path = Path(path)
    try:
        buf = path.read_bytes()
        tokens, offset = _header_tokens(buf, 4)
        magic = tokens[0].decode("ascii")
        width, height, maxval = (int(t) for t in tokens[1:])
    except (OSError, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from exc
    if magic not in ("P5", "P6"):
        raise DataError(f"{path}: unsupported format {magic!r}, need binary P5 or P6")
    if maxval != 255:
        raise DataError(f"{path}: maxval {maxval} is not 8-bit (255)")
    channels = 1 if magic == "P5" else 3
    n = width * height * channels
    raster = np.frombuffer(buf, dtype=np.uint8, count=-1, offset=min(offset, len(buf)))
    if width < 1 or height < 1 or raster.size < n:
        raise DataError(f"{path}: truncated raster ({raster.size} of {n} bytes)")
    return raster[:n].reshape(height, width, channels).transpose(2, 0, 1).copy()


def write_pnm(path, image) -> None:
    """Write a (C, H, W) or (H, W) uint8 array as P5/P6."""
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim == 2:
        img = img[None]
    c, h, w = img.shape
    magic = {1: "P5", 3: "P6"}[c]
    with open(path, "wb") as fh:
        fh.write(f"{magic}\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.transpose(1, 2, 0).tobytes())


def square_resize(image: np.ndarray, side: int) -> np.ndarray:
    """Center-crop to a square, then nearest-neighbor resize to side x side."""
    _, h, w = image.shape
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    crop = image[:, top : top + s, left : left + s]
    idx = (np.arange(side) * s) // side
    return crop[:, idx][:, :, idx]


def _load_split(root: Path, split: str, side: int):
    split_dir = root / split
    if not split_dir.is_dir():
        raise DataError(f"{split_dir}: missing split directory")
    classes = sorted(p.name for p in split_dir.iterdir() if p.is_dir())
    images, labels = [], []
    for label, name in enumerate(classes):
        files = sorted(p for p in (split_dir / name).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        for f in files:
            images.append((f, square_resize(read_pnm(f), side)))
            labels.append(label)
    return classes, images, labels


def load_image_dir(root, image_side: int) -> DatasetSplit:
    """Load ``root/{train,test}/<class>/*.pgm|*.ppm``; classes indexed in sorted order."""
    root = Path(root)
    tr_classes, tr_imgs, tr_y = _load_split(root, "train", image_side)
    te_classes, te_imgs, te_y = _load_split(root, "test", image_side)
    if tr_classes != te_classes:
        diff = sorted(set(tr_classes) ^ set(te_classes))
        raise DataError(f"{root}: class sets differ between train and test: {diff}")
    if not tr_imgs or not te_imgs:
        raise DataError(f"{root}: train and test must both contain images")
    channels = {img.shape[0] for _, img in tr_imgs + te_imgs}
    if len(channels) != 1:
        first = next(f for f, img in tr_imgs + te_imgs if img.shape[0] != tr_imgs[0][1].shape[0])
        raise DataError(f"{first}: mixes grayscale and color images")

    def stack(imgs):
        return np.stack([img for _, img in imgs]).astype(np.float64) / 255.0

    return DatasetSplit(stack(tr_imgs), np.array(tr_y), stack(te_imgs), np.array(te_y), tr_classes)


# --- synthetic ---------------------------------------------------------------

def _gaussian(rng: np.random.Generator, size: int) -> np.ndarray:
    # Box-Muller over the uniform stream
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:size]


def synth_dataset(n_classes: int, per_class_train: int, per_class_test: int,
                  image_side: int, noise_sigma: float, seed: int) -> DatasetSplit:
    """One uniform-noise template per class; samples are template + N(0, sigma^2), clipped."""
    if n_classes < 2:
        raise DataError(f"n_classes must be >= 2, got {n_classes}")
    if per_class_train < 1 or per_class_test < 1 or image_side < 1 or noise_sigma < 0:
        raise DataError("per-class counts and image_side must be >= 1, noise_sigma >= 0")
    rng = substream(seed, "synth")
    shape = (1, image_side, image_side)
    templates = rng.random((n_classes, *shape))
    pix = int(np.prod(shape))

    def draw(per_class):
        xs, ys = [], []
        for c in range(n_classes):
            for _ in range(per_class):
                noise = _gaussian(rng, pix).reshape(shape) * noise_sigma
                xs.append(np.clip(templates[c] + noise, 0.0, 1.0))
                ys.append(c)
        return np.stack(xs), np.array(ys)

    train_x, train_y = draw(per_class_train)
    test_x, test_y = draw(per_class_test)
    names = [f"class_{c}" for c in range(n_classes)]
    return DatasetSplit(train_x, train_y, test_x, test_y, names)


# --- metrics -----------------------------------------------------------------

@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    confusion: np.ndarray  # rows = true class, cols = predicted

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "macro_f1": self.macro_f1,
                "confusion": self.confusion.tolist()}


def confusion_matrix(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.shape != p.shape or t.size == 0:
        raise ValueError("label arrays must be non-empty and of equal length")
    if t.min() < 0 or p.min() < 0 or t.max() >= n_classes or p.max() >= n_classes:
        raise IndexError(f"label outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def report_from_confusion(cm: np.ndarray) -> MetricsReport:
    """Accuracy and macro-F1 (0/0 counted as 0, absent classes included)."""
    cm = np.asarray(cm, dtype=np.int64)
    tp = np.diag(cm).astype(np.float64)
    pred = cm.sum(axis=0).astype(np.float64)
    true = cm.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    recall = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return MetricsReport(float(tp.sum() / cm.sum()), float(f1.mean()), cm)


def compute_metrics(true_labels, predicted_labels, n_classes: int) -> MetricsReport:
    return report_from_confusion(confusion_matrix(true_labels, predicted_labels, n_classes))
