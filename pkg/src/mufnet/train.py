"""Training loop, ablation harness, and mixing-weight sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Manifest, batches
from .errors import ConfigError, DivergenceError
from .fusion import (
    VARIANTS,
    FusionConfig,
    ModelParams,
    batch_loss,
    init_params,
    sample_loss,
)
from .metrics import Metrics, evaluate
from .optim import AdamW, ParamGroup
from .tensor import GradTape


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 5e-4
    clip_lr: float = 1e-6  # the pretrained-CLIP group; empty under stub/store providers
    weight_decay: float = 0.01
    seed: int = 7

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("lr", "clip_lr", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float
    val_p: float
    val_r: float
    val_f1: float


@dataclass
class TrainResult:
    params: ModelParams  # weights of the best validation-accuracy epoch
    cfg: FusionConfig
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1


def make_optimizer(params: ModelParams, tcfg: TrainConfig) -> AdamW:
    # encoder providers are non-trainable, so the CLIP learning-rate group
    # exists but binds to zero parameters
    groups = [
        ParamGroup(name="fusion", params=params.named(), lr=tcfg.lr),
        ParamGroup(name="clip", params={}, lr=tcfg.clip_lr),
    ]
    return AdamW(groups=groups, weight_decay=tcfg.weight_decay)


def train(cfg: FusionConfig, tcfg: TrainConfig, manifest: Manifest,
          provider) -> TrainResult:
    """Deterministic training run; selects the best epoch by validation accuracy."""
    cfg.validate()
    tcfg.validate()
    by_id = manifest.by_id()
    params = init_params(cfg, tcfg.seed)
    opt = make_optimizer(params, tcfg)
    result = TrainResult(params=params, cfg=cfg)
    best_acc = -1.0
    best_state: dict[str, np.ndarray] | None = None
    for epoch in range(tcfg.epochs):
        loss_sum = 0.0
        seen = 0
        for step, ids in enumerate(
            batches(manifest, "train", tcfg.batch_size, tcfg.seed, epoch)
        ):
            params.zero_grads()
            with GradTape() as tape:
                losses = []
                for sid in ids:
                    sample = by_id[sid]
                    streams = provider.get_streams(sample.id, sample.text)
                    losses.append(sample_loss(streams, sample.label, params, cfg))
                loss = batch_loss(losses)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}, step {step}"
                )
            tape.backward(loss)
            opt.step()
            loss_sum += value * len(ids)
            seen += len(ids)
        val = evaluate(params, cfg, manifest, "validation", provider)
        result.log.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / seen if seen else float("nan"),
                val_acc=val.acc,
                val_p=val.precision,
                val_r=val.recall,
                val_f1=val.f1,
            )
        )
        if val.acc > best_acc:
            best_acc = val.acc
            result.best_epoch = epoch
            best_state = {k: t.data.copy() for k, t in params.named().items()}
    if best_state is not None:
        for name, t in params.named().items():
            t.data = best_state[name]
    return result


def ablate(cfg: FusionConfig, tcfg: TrainConfig, manifest: Manifest, provider,
           eval_split: str = "test") -> list[dict]:
    """Train every variant with the same seed/budget; one metrics row each."""
    rows = []
    for variant in VARIANTS:
        vcfg = replace(cfg, variant=variant)
        result = train(vcfg, tcfg, manifest, provider)
        m = evaluate(result.params, vcfg, manifest, eval_split, provider)
        rows.append(_metrics_row({"variant": variant}, m))
    return rows


def sweep(param_name: str, grid: list[float], cfg: FusionConfig, tcfg: TrainConfig,
          manifest: Manifest, provider, eval_split: str = "test") -> list[dict]:
    """One training run per grid value of alpha, beta or gamma."""
    if param_name not in ("alpha", "beta", "gamma"):
        raise ConfigError(f"sweep parameter must be alpha, beta or gamma, got {param_name!r}")
    for value in grid:
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"sweep grid value {value} outside [0, 1]")
    rows = []
    for value in grid:
        vcfg = replace(cfg, **{param_name: value})
        result = train(vcfg, tcfg, manifest, provider)
        m = evaluate(result.params, vcfg, manifest, eval_split, provider)
        rows.append(_metrics_row({param_name: value}, m))
    return rows


def _metrics_row(head: dict, m: Metrics) -> dict:
    row = dict(head)
    row.update(
        acc=m.acc, precision=m.precision, recall=m.recall, f1=m.f1,
        tp=m.tp, fp=m.fp, tn=m.tn, fn=m.fn,
    )
    return row


METRICS_FIELDS = ("acc", "precision", "recall", "f1", "tp", "fp", "tn", "fn")


def write_rows_csv(path, rows: list[dict], key_field: str) -> None:
    """CSV emit: header row of key_field + metric columns, full float precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([key_field, *METRICS_FIELDS])
        for row in rows:
            writer.writerow([row[key_field], *[repr(row[f]) if isinstance(row[f], float)
                                               else row[f] for f in METRICS_FIELDS]])


def read_rows_csv(path, key_field: str) -> list[dict]:
    """Parse-back of :func:`write_rows_csv` output."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            row = {key_field: rec[key_field]}
            for f in ("acc", "precision", "recall", "f1"):
                row[f] = float(rec[f])
            for f in ("tp", "fp", "tn", "fn"):
                row[f] = int(rec[f])
            rows.append(row)
    return rows


def write_epoch_log(path, log: list[EpochRecord]) -> None:
    """Line-delimited epoch records: epoch, train_loss, val_acc, val_p, val_r, val_f1."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_acc", "val_p", "val_r", "val_f1"])
        for rec in log:
            writer.writerow(
                [rec.epoch, repr(rec.train_loss), repr(rec.val_acc), repr(rec.val_p),
                 repr(rec.val_r), repr(rec.val_f1)]
            )
