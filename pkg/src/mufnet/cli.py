"""Command-line entry point.

Commands: gen-synth, train, eval, ablate, sweep. Configuration comes from
an optional flat ``key = value`` file (--config); command-line flags win
over file values. Exit codes: 0 success, 2 flag errors, 3 missing files,
4 config validation failures, 1 anything else; failures print one
machine-parsable ``error: <kind>: <message>`` line to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

from .checkpoint import load_checkpoint, save_checkpoint
from .data import gen_synth, load_manifest, save_manifest
from .encoders import StoreProvider, StubProvider
from .errors import ConfigError, MufnetError
from .fusion import VARIANTS, FusionConfig
from .metrics import evaluate
from .store import load_feature_store, write_feature_store
from .train import (
    TrainConfig,
    ablate,
    sweep,
    train,
    write_epoch_log,
    write_rows_csv,
)


@dataclass
class RunConfig:
    dim: int = 768
    heads: int = 4
    alpha: float = 0.6
    beta: float = 0.7
    gamma: float = 0.5
    mlp_hidden: int = 0  # 0 -> same as dim
    variant: str = "full"
    provider: str = "stub"
    data: str = ""
    features: str = ""
    epochs: int = 10
    seed: int = 7
    batch_size: int = 32
    lr: float = 5e-4
    clip_lr: float = 1e-6
    weight_decay: float = 0.01

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            dim=self.dim,
            heads=self.heads,
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            mlp_hidden=self.mlp_hidden or None,
            variant=self.variant,
        )

    def train_config(self) -> TrainConfig:
        tcfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            clip_lr=self.clip_lr,
            weight_decay=self.weight_decay,
            seed=self.seed,
        )
        tcfg.validate()
        return tcfg


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value
    return values


def _coerce(key: str, value) -> object:
    kind = _FIELD_TYPES[key]
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
        return str(value)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from None


def _run_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        _require_file(args.config)
        for key, value in _parse_config_file(args.config).items():
            setattr(cfg, key, _coerce(key, value))
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, _coerce(key, flag))
    if cfg.provider not in ("stub", "store"):
        raise ConfigError(f"provider must be 'stub' or 'store', got {cfg.provider!r}")
    return cfg


def _require_file(path: str) -> None:
    if not path:
        raise FileNotFoundError("required path not given")
    if not os.path.isfile(path):
        raise FileNotFoundError(path)


def _provider(cfg: RunConfig, dim: int):
    if cfg.provider == "store":
        _require_file(cfg.features)
        store = load_feature_store(cfg.features)
        if store.dim != dim:
            raise ConfigError(f"feature store dim {store.dim} != model dim {dim}")
        return StoreProvider(store)
    return StubProvider(dim=dim, global_seed=cfg.seed)


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen_synth(args) -> int:
    cfg = _run_config(args)
    n = args.n if args.n is not None else 2000
    dim = cfg.dim
    out = _out_dir(args)
    manifest, store = gen_synth(n, seed=cfg.seed, dim=dim)
    save_manifest(os.path.join(out, "manifest.tsv"), manifest)
    write_feature_store(os.path.join(out, "features.mfs"), store.dim, store.entries)
    print(f"wrote {len(manifest)} samples to {out}/manifest.tsv and {out}/features.mfs")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    _require_file(cfg.data)
    manifest = load_manifest(cfg.data)
    fcfg = cfg.fusion_config()
    provider = _provider(cfg, fcfg.dim)
    out = _out_dir(args)
    result = train(fcfg, cfg.train_config(), manifest, provider)
    ckpt_path = os.path.join(out, "checkpoint.rcmf")
    save_checkpoint(ckpt_path, result.params, fcfg)
    write_epoch_log(os.path.join(out, "epochs.csv"), result.log)
    print(f"trained {cfg.epochs} epochs (best epoch {result.best_epoch}); "
          f"checkpoint at {ckpt_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    _require_file(args.checkpoint)
    params, fcfg = load_checkpoint(args.checkpoint)
    _require_file(cfg.data)
    manifest = load_manifest(cfg.data)
    provider = _provider(cfg, fcfg.dim)
    out = _out_dir(args)
    m = evaluate(params, fcfg, manifest, args.split, provider)
    write_rows_csv(os.path.join(out, "metrics.csv"),
                   [{"split": args.split, "acc": m.acc, "precision": m.precision,
                     "recall": m.recall, "f1": m.f1, "tp": m.tp, "fp": m.fp,
                     "tn": m.tn, "fn": m.fn}], "split")
    print(f"{args.split}: acc {m.acc:.4f} p {m.precision:.4f} "
          f"r {m.recall:.4f} f1 {m.f1:.4f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    _require_file(cfg.data)
    manifest = load_manifest(cfg.data)
    fcfg = cfg.fusion_config()
    provider = _provider(cfg, fcfg.dim)
    out = _out_dir(args)
    rows = ablate(fcfg, cfg.train_config(), manifest, provider)
    write_rows_csv(os.path.join(out, "ablation.csv"), rows, "variant")
    for row in rows:
        print(f"{row['variant']:15s} acc {row['acc']:.4f} f1 {row['f1']:.4f}")
    return 0


def _parse_grid(spec: str) -> list[float]:
    try:
        start, stop, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--grid must be START:STOP:STEP, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"--grid needs step > 0 and stop >= start, got {spec!r}")
    count = int(round((stop - start) / step)) + 1
    values = [round(start + i * step, 12) for i in range(count)]
    return [v for v in values if v <= stop + 1e-9]


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    _require_file(cfg.data)
    manifest = load_manifest(cfg.data)
    fcfg = cfg.fusion_config()
    provider = _provider(cfg, fcfg.dim)
    grid = _parse_grid(args.grid)
    out = _out_dir(args)
    rows = sweep(args.param, grid, fcfg, cfg.train_config(), manifest, provider)
    write_rows_csv(os.path.join(out, "sweep.csv"), rows, args.param)
    for row in rows:
        print(f"{args.param} {row[args.param]:.2f} acc {row['acc']:.4f} f1 {row['f1']:.4f}")
    return 0


def _add_common(sub, *, data=False, provider=False, model=False, training=False):
    sub.add_argument("--config", help="flat key = value config file; flags override it")
    sub.add_argument("--out", help="output directory (default: current directory)")
    sub.add_argument("--seed", type=int, help="run seed")
    sub.add_argument("--dim", type=int, help="model/embedding width")
    if data:
        sub.add_argument("--data", help="manifest file (tab-separated)")
    if provider:
        sub.add_argument("--provider", choices=["stub", "store"],
                         help="feature source (default stub)")
        sub.add_argument("--features", help="feature-store file for --provider store")
    if model:
        sub.add_argument("--variant", choices=list(VARIANTS), help="ablation variant")
        sub.add_argument("--heads", type=int, help="attention head count")
        sub.add_argument("--alpha", type=float, help="deep-fusion mixing weight")
        sub.add_argument("--beta", type=float, help="CLIP-view mixing weight")
        sub.add_argument("--gamma", type=float, help="multiplex mixing weight")
        sub.add_argument("--mlp-hidden", dest="mlp_hidden", type=int,
                         help="multiplex MLP hidden width")
    if training:
        sub.add_argument("--epochs", type=int, help="training epochs")
        sub.add_argument("--batch-size", dest="batch_size", type=int, help="batch size")
        sub.add_argument("--lr", type=float, help="fusion-group learning rate")
        sub.add_argument("--weight-decay", dest="weight_decay", type=float,
                         help="decoupled weight decay")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mufnet",
        description="Train, evaluate and dissect the multimodal sarcasm fusion network.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-synth", help="generate the synthetic cross-modal dataset")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of samples (default 2000)")
    p.set_defaults(func=cmd_gen_synth)

    p = subs.add_parser("train", help="train a model and write checkpoint + epoch log")
    _add_common(p, data=True, provider=True, model=True, training=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    _add_common(p, data=True, provider=True)
    p.add_argument("--checkpoint", help="checkpoint file to evaluate")
    p.add_argument("--split", choices=["train", "validation", "test"], default="test",
                   help="manifest split to score (default test)")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("ablate", help="train every ablation variant, emit a metrics table")
    _add_common(p, data=True, provider=True, model=True, training=True)
    p.set_defaults(func=cmd_ablate)

    p = subs.add_parser("sweep", help="grid-sweep one mixing weight, emit a metrics table")
    _add_common(p, data=True, provider=True, model=True, training=True)
    p.add_argument("--param", choices=["alpha", "beta", "gamma"], required=True,
                   help="which mixing weight to sweep")
    p.add_argument("--grid", required=True, help="grid as START:STOP:STEP, inclusive")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 4
    except MufnetError as exc:
        print(f"error: {type(exc).__name__.lower().removesuffix('error')}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
