"""Command-line entry point: ``aevqc {train,eval,compare,circuit,params}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import kernels
from .data import DatasetSplit, load_image_dir, synth_dataset
from .errors import AEVQCError, ConfigError
from .head import AnsatzSpec, build_ansatz, count_head_params
from .pipeline import (
    ModelConfig, TrainConfig, atomic_write_text, build_model, evaluate, load_checkpoint,
    save_checkpoint, train, write_metrics_csv,
)

SYNTH_KEYS = ("per_class_train", "per_class_test", "noise_sigma")


@dataclass
class RunConfig:
    head_kind: str | None = None
    pooling_mode: str | None = None
    ansatz: str | None = None
    depth: int | None = None
    backbone_channels: list | None = None
    n_classes: int | None = None
    seed: int = 0
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    dataset_path: str | None = None
    image_side: int | None = None
    per_class_train: int | None = None
    per_class_test: int | None = None
    noise_sigma: float | None = None
    checkpoint: str | None = None
    metrics: str | None = None
    report: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self) -> None:
        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        for name in ("depth", "n_classes", "image_side", "per_class_train", "per_class_test"):
            v = getattr(self, name)
            if v is not None and (not is_int(v) or v < 1):
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("epochs", "batch_size"):
            v = getattr(self, name)
            if not is_int(v) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        if not is_int(self.seed) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.lr, (int, float)) or isinstance(self.lr, bool) or self.lr < 0:
            raise ConfigError(f"lr must be a non-negative number, got {self.lr!r}")
        if self.backbone_channels is not None and (
                not isinstance(self.backbone_channels, list) or not self.backbone_channels
                or not all(is_int(c) and c >= 1 for c in self.backbone_channels)):
            raise ConfigError("backbone_channels must be a non-empty list of positive integers")
        if self.ansatz is not None and self.ansatz not in ("a1", "a2"):
            raise ConfigError(f"ansatz must be 'a1' or 'a2', got {self.ansatz!r}")
        if self.pooling_mode is not None and self.pooling_mode not in ("gap", "gmp"):
            raise ConfigError(f"pooling_mode must be 'gap' or 'gmp', got {self.pooling_mode!r}")
        if self.noise_sigma is not None and (not isinstance(self.noise_sigma, (int, float)) or self.noise_sigma < 0):
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if self.image_side is None:
            raise ConfigError("image_side is required")
        synth = [k for k in SYNTH_KEYS if getattr(self, k) is not None]
        if self.dataset_path is not None:
            if synth:
                raise ConfigError(f"dataset_path conflicts with synthetic keys {synth}")
        elif len(synth) != len(SYNTH_KEYS) or self.n_classes is None:
            raise ConfigError(
                "no dataset: give dataset_path, or n_classes plus " + ", ".join(SYNTH_KEYS))

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, float(self.lr))

    def dataset(self) -> DatasetSplit:
        if self.dataset_path is not None:
            data = load_image_dir(self.dataset_path, self.image_side)
            if self.n_classes is not None and self.n_classes != data.n_classes:
                raise ConfigError(f"n_classes={self.n_classes} but {self.dataset_path} has {data.n_classes} classes")
            return data
        return synth_dataset(self.n_classes, self.per_class_train, self.per_class_test,
                             self.image_side, float(self.noise_sigma), self.seed)

    def model_config(self, data: DatasetSplit, head_kind: str) -> ModelConfig:
        quantum = head_kind == "quantum"
        return ModelConfig(
            head_kind=head_kind,
            n_classes=data.n_classes,
            input_shape=data.image_shape,
            backbone_channels=tuple(self.backbone_channels or (16,)),
            pooling_mode=None if quantum else (self.pooling_mode or "gap"),
            ansatz=self.ansatz if quantum else None,
            depth=(self.depth or 1) if quantum else None,
            seed=self.seed,
        )


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    return cfg


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    if cfg.head_kind not in ("classical", "quantum"):
        raise ConfigError(f"train needs head_kind 'classical' or 'quantum', got {cfg.head_kind!r}")
    if cfg.head_kind == "quantum" and cfg.ansatz is None:
        raise ConfigError("quantum head needs an ansatz")
    out = args.out or cfg.checkpoint
    metrics = args.metrics or cfg.metrics
    if out is None or metrics is None:
        raise ConfigError("train needs a checkpoint path (--out) and a metrics path (--metrics)")
    data = cfg.dataset()
    model = build_model(cfg.model_config(data, cfg.head_kind))
    model, history = train(model, data.train_x, data.train_y, cfg.train_config())
    save_checkpoint(model, out)
    write_metrics_csv(metrics, history)
    rep = evaluate(model, data.test_x, data.test_y)
    print(f"test accuracy={rep.accuracy:.4f} macro_f1={rep.macro_f1:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    model = load_checkpoint(args.checkpoint or cfg.checkpoint)
    data = cfg.dataset()
    rep = evaluate(model, data.test_x, data.test_y)
    print(f"test accuracy={rep.accuracy:.4f} macro_f1={rep.macro_f1:.4f}")
    out = args.out or cfg.report
    if out:
        atomic_write_text(out, json.dumps(rep.as_dict(), indent=2) + "\n")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_run_config(args)
    if cfg.head_kind is not None:
        raise ConfigError("compare trains both heads; remove head_kind from the config")
    if cfg.ansatz is None:
        raise ConfigError("compare needs an ansatz for the quantum variant")
    out = args.out or cfg.report
    if out is None:
        raise ConfigError("compare needs a report path (--out)")
    data = cfg.dataset()
    rows = []
    for kind in ("classical", "quantum"):
        model = build_model(cfg.model_config(data, kind))
        model, _ = train(model, data.train_x, data.train_y, cfg.train_config())
        rep = evaluate(model, data.test_x, data.test_y)
        rows.append((kind, model.params_after_backbone(), rep.accuracy, rep.macro_f1))
    lines = ["model,params_after_backbone,accuracy,macro_f1"]
    lines += [f"{k},{p},{a!r},{f!r}" for k, p, a, f in rows]
    atomic_write_text(out, "\n".join(lines) + "\n")
    for k, p, a, f in rows:
        print(f"{k:<10} params={p:<8d} accuracy={a:.4f} macro_f1={f:.4f}")
    return 0


def cmd_circuit(args) -> int:
    spec = AnsatzSpec(args.ansatz, args.qubits, args.depth)
    sys.stdout.write(build_ansatz(spec).dump())
    return 0


def cmd_params(args) -> int:
    quantum_args = (args.ansatz, args.qubits, args.depth)
    if all(v is None for v in quantum_args) and args.classical_channels is None:
        raise ConfigError("give --ansatz/--qubits/--depth, --classical-channels, or both")
    if any(v is not None for v in quantum_args):
        if any(v is None for v in quantum_args):
            raise ConfigError("--ansatz, --qubits and --depth must be given together")
        q, fc, total = count_head_params(AnsatzSpec(args.ansatz, args.qubits, args.depth), args.classes)
        print(f"quantum={q} classical_fc={fc} total={total}")
    if args.classical_channels is not None:
        if args.classical_channels < 1 or args.classes < 2:
            raise ConfigError("--classical-channels must be >= 1 and --classes >= 2")
        print(f"classical_head={args.classical_channels * args.classes}")
    return 0


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aevqc", description=__doc__)
    p.add_argument("--threads", type=int, default=1, help="kernel threads (default 1)")
    sub = p.add_subparsers(dest="command", required=True)

    def run_cmd(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=_u64)
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        sp.set_defaults(func=func)
        return sp

    run_cmd("train", cmd_train, "train one model").add_argument("--metrics")
    run_cmd("eval", cmd_eval, "evaluate a checkpoint on the test split").add_argument("--checkpoint")
    run_cmd("compare", cmd_compare, "train classical and quantum heads side by side")

    sp = sub.add_parser("circuit", help="print an ansatz circuit")
    sp.add_argument("--ansatz", required=True, choices=["a1", "a2"])
    sp.add_argument("--qubits", type=int, required=True)
    sp.add_argument("--depth", type=int, default=1)
    sp.set_defaults(func=cmd_circuit)

    sp = sub.add_parser("params", help="count trainable parameters after the backbone")
    sp.add_argument("--ansatz", choices=["a1", "a2"])
    sp.add_argument("--qubits", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--classes", type=int, required=True)
    sp.add_argument("--classical-channels", type=int)
    sp.set_defaults(func=cmd_params)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    kernels.set_num_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"aevqc: config error: {exc}", file=sys.stderr)
        return 2
    except (AEVQCError, ValueError, OSError) as exc:
        print(f"aevqc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
