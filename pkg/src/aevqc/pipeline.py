"""Classical and quantum-head classifiers over a shared conv backbone.

classical: backbone -> global pooling -> FC
quantum:   backbone -> flatten -> amplitude-encoded circuit head -> FC
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import nn
from .encoding import qubits_needed
from .errors import ConfigError, DataError, DegenerateInputError, DivergenceError, FormatError
from .grad import head_vjp_rows
from .head import AnsatzSpec, QuantumHead, count_head_params
from .data import MetricsReport, compute_metrics
from .rng import substream

FORMAT_VERSION = 1
KERNEL = 3
BACKBONE_POOL = "max"


@dataclass(frozen=True)
class ModelConfig:
    head_kind: str
    n_classes: int
    input_shape: tuple[int, int, int]
    backbone_channels: tuple[int, ...] = (16,)
    pooling_mode: str | None = None
    ansatz: str | None = None
    depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "backbone_channels", tuple(int(v) for v in self.backbone_channels))
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape must be (C, H, W) with positive dims, got {self.input_shape}")
        if not self.backbone_channels or min(self.backbone_channels) < 1:
            raise ConfigError("backbone_channels must be a non-empty list of positive widths")
        if self.head_kind == "classical":
            if self.pooling_mode not in ("gap", "gmp"):
                raise ConfigError(f"classical head needs pooling_mode gap|gmp, got {self.pooling_mode!r}")
            if self.ansatz is not None or self.depth is not None:
                raise ConfigError("ansatz/depth are only valid for the quantum head")
        elif self.head_kind == "quantum":
            if self.pooling_mode is not None:
                raise ConfigError("pooling_mode is only valid for the classical head")
            if self.ansatz not in ("a1", "a2") or self.depth is None or self.depth < 1:
                raise ConfigError(f"quantum head needs ansatz a1|a2 and depth >= 1, got {self.ansatz!r}, {self.depth!r}")
        else:
            raise ConfigError(f"head_kind must be 'classical' or 'quantum', got {self.head_kind!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def feature_shape(self) -> tuple[int, int, int]:
        c, h, w = self.input_shape
        for width in self.backbone_channels:
            h, w = h - KERNEL + 1, w - KERNEL + 1
            if h < 1 or w < 1:
                raise ConfigError(f"input {self.input_shape} too small for {len(self.backbone_channels)} conv blocks")
            h, w = h // 2, w // 2
            if h < 1 or w < 1:
                raise ConfigError(f"input {self.input_shape} too small for {len(self.backbone_channels)} pool stages")
            c = width
        return c, h, w

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        d["backbone_channels"] = list(self.backbone_channels)
        return d


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ConfigError(f"lr must be a finite non-negative number, got {self.lr}")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float


class Model:
    """Parameters live in ``self.params`` (name -> array), optimizer state in ``self.adam``."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.adam: dict[str, nn.AdamState] = {}
        self.epoch = 0
        C, H, W = config.feature_shape()
        self.feature_len = C * H * W
        self.head = None
        if config.head_kind == "quantum":
            spec = AnsatzSpec(config.ansatz, qubits_needed(self.feature_len), config.depth)
            self.head = QuantumHead(spec, self.feature_len, theta=params["theta"])
        self._audit()

    @property
    def conv_names(self) -> list[str]:
        return [f"conv{i}" for i in range(len(self.config.backbone_channels))]

    def _audit(self):
        cfg = self.config
        after = sum(self.params[k].size for k in self.params if not k.startswith("conv"))
        if cfg.head_kind == "quantum":
            expected = count_head_params(self.head.spec, cfg.n_classes)[2]
        else:
            expected = cfg.feature_shape()[0] * cfg.n_classes
        if after != expected:
            raise AssertionError(f"head parameter audit failed: {after} != {expected}")

    def params_after_backbone(self) -> int:
        return sum(v.size for k, v in self.params.items() if not k.startswith("conv"))

    # forward / backward ------------------------------------------------------

    def forward(self, x):
        """Logits for a (B, C, H, W) batch plus the cache needed by ``backward``."""
        cache = {"acts": []}
        h = np.asarray(x, dtype=np.float64)
        for name in self.conv_names:
            z = nn.conv2d_forward(h, self.params[name], 1)
            a = nn.relu_forward(z)
            cache["acts"].append((h, z, a))
            h = nn.pool2d(a, BACKBONE_POOL)
        cache["features"] = h
        if self.head is None:
            pooled = nn.global_pool(h, self.config.pooling_mode)
        else:
            self.head.theta = self.params["theta"]
            pooled = self.head.forward_rows(h.reshape(h.shape[0], -1))
        cache["pooled"] = pooled
        return nn.dense_forward(pooled, self.params["fc"]), cache

    def logits(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, d_logits) -> dict[str, np.ndarray]:
        """Per-sample gradients: every array has a leading batch axis."""
        grads = {}
        d_pooled, grads["fc"] = nn.dense_backward(cache["pooled"], self.params["fc"], d_logits)
        h = cache["features"]
        if self.head is None:
            d_h = nn.global_pool_backward(h, self.config.pooling_mode, d_pooled)
        else:
            grads["theta"], d_flat = head_vjp_rows(
                self.head.circuit, h.reshape(h.shape[0], -1), self.params["theta"], d_pooled)
            d_h = d_flat.reshape(h.shape)
        for name, (inp, z, a) in zip(reversed(self.conv_names), reversed(cache["acts"])):
            d_a = nn.pool2d_backward(a, BACKBONE_POOL, d_h)
            d_z = nn.relu_backward(z, d_a)
            d_h, grads[name] = nn.conv2d_backward(inp, self.params[name], 1, d_z)
        return grads


def build_model(config: ModelConfig) -> Model:
    """Initialize all parameters from the ``init`` stream of ``config.seed``.

    Backbone weights are drawn first, so two configs differing only in the
    head share an identical backbone.
    """
    rng = substream(config.seed, "init")
    params = {}
    c_in = config.input_shape[0]
    for i, width in enumerate(config.backbone_channels):
        params[f"conv{i}"] = nn.glorot_uniform(
            rng, (width, c_in, KERNEL, KERNEL), c_in * KERNEL * KERNEL, width * KERNEL * KERNEL)
        c_in = width
    C, H, W = config.feature_shape()
    if config.head_kind == "quantum":
        n = qubits_needed(C * H * W)
        spec = AnsatzSpec(config.ansatz, n, config.depth)
        params["theta"] = rng.uniform(0.0, 2 * np.pi, size=spec.n_params)
        fc_in = n
    else:
        fc_in = C
    params["fc"] = nn.glorot_uniform(rng, (config.n_classes, fc_in), fc_in, config.n_classes)
    return Model(config, params)


def _ordered_mean(per_sample: np.ndarray) -> np.ndarray:
    # ascending sample order, independent of how the batch was computed
    acc = per_sample[0].copy()
    for g in per_sample[1:]:
        acc += g
    return acc / per_sample.shape[0]


def _check_labels(y, n_classes):
    y = np.asarray(y)
    if y.size == 0:
        raise DataError("dataset is empty")
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError(f"labels must lie in [0, {n_classes}), found range [{y.min()}, {y.max()}]")


def train(model: Model, train_x, train_y, cfg: TrainConfig, shuffle_seed: int | None = None,
          on_epoch=None) -> tuple[Model, list[EpochStats]]:
    """Mini-batch Adam on mean softmax cross-entropy. Mutates and returns ``model``."""
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    _check_labels(train_y, model.config.n_classes)
    if train_x.shape[1:] != model.config.input_shape:
        raise DataError(f"images are {train_x.shape[1:]}, model expects {model.config.input_shape}")
    rng = substream(model.config.seed if shuffle_seed is None else shuffle_seed, "shuffle")
    for name, p in model.params.items():
        if name not in model.adam:
            model.adam[name] = nn.AdamState.zeros_like(p, lr=cfg.lr)
        else:
            model.adam[name].lr = cfg.lr
    history = []
    n = train_y.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                logits, cache = model.forward(train_x[idx])
            except DegenerateInputError as exc:
                raise DivergenceError(
                    f"epoch {model.epoch + 1}: backbone features vanished, head cannot encode them ({exc})") from exc
            losses, d_logits = nn.softmax_ce(logits, train_y[idx])
            if not np.all(np.isfinite(losses)):
                raise DivergenceError(
                    f"non-finite loss at epoch {model.epoch + 1}, batch starting {start}")
            loss_sum += float(np.sum(losses))
            correct += int(np.sum(np.argmax(logits, axis=1) == train_y[idx]))
            grads = model.backward(cache, d_logits)
            for name in model.params:
                g = _ordered_mean(grads[name])
                model.params[name], model.adam[name] = nn.adam_step(model.params[name], g, model.adam[name])
        model.epoch += 1
        stats = EpochStats(model.epoch, loss_sum / n, correct / n)
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    return model, history


def predict(model: Model, x, batch_size: int = 256) -> np.ndarray:
    """argmax of logits; ties go to the lowest class index."""
    x = np.asarray(x, dtype=np.float64)
    out = [np.argmax(model.logits(x[i : i + batch_size]), axis=1) for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def evaluate(model: Model, test_x, test_y) -> MetricsReport:
    test_y = np.asarray(test_y, dtype=np.int64)
    _check_labels(test_y, model.config.n_classes)
    return compute_metrics(test_y, predict(model, test_x), model.config.n_classes)


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file so readers never see a partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_metrics_csv(path, history: list[EpochStats]) -> None:
    buf = io.StringIO()
    buf.write("epoch,loss,train_acc\n")
    for s in history:
        buf.write(f"{s.epoch},{s.loss!r},{s.train_acc!r}\n")
    atomic_write_text(path, buf.getvalue())


# --- checkpoints ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise FormatError("cannot serialize non-finite value")
        return format(float(x), ".17g")
    raise TypeError(type(x))


def _dumps(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        items = [f"{pad}{json.dumps(str(k))}: {_dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dumps(v, indent) for v in obj) + "]"
    return _fmt(obj)


def save_checkpoint(model: Model, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "epoch": model.epoch,
        "params": {k: v for k, v in model.params.items()},
        "adam": {
            k: {"t": s.t, "lr": s.lr, "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps, "m": s.m, "v": s.v}
            for k, s in model.adam.items()
        },
    }
    atomic_write_text(path, _dumps(doc) + "\n")


def load_checkpoint(path) -> Model:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise FormatError(f"{path}: not a checkpoint (no format_version)")
    if doc["format_version"] != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported format_version {doc['format_version']} (this build reads {FORMAT_VERSION})")
    try:
        cfg = ModelConfig(**doc["config"])
        shapes = {k: v.shape for k, v in build_model(cfg).params.items()}
        params = {}
        for name, shape in shapes.items():
            arr = np.array(doc["params"][name], dtype=np.float64)
            if arr.shape != shape:
                raise FormatError(f"{path}: parameter {name} has shape {arr.shape}, expected {shape}")
            params[name] = arr
        model = Model(cfg, params)
        model.epoch = int(doc["epoch"])
        for name, s in doc.get("adam", {}).items():
            m = np.array(s["m"], dtype=np.float64)
            v = np.array(s["v"], dtype=np.float64)
            if m.shape != shapes[name] or v.shape != shapes[name]:
                raise FormatError(f"{path}: optimizer state for {name} has the wrong shape")
            model.adam[name] = nn.AdamState(m, v, int(s["t"]), float(s["lr"]),
                                            float(s["beta1"]), float(s["beta2"]), float(s["eps"]))
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: invalid checkpoint contents ({exc})") from exc
    return model
