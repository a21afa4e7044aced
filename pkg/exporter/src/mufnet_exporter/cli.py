"""Command-line entry point for the feature exporter."""

from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_BERT, DEFAULT_CLIP, PretrainedEncoders, RandomInitEncoders
from .export import ExportError, ExportJob, export
from .listing import ListingError, load_listing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mufnet-export",
        description="Run pretrained encoders over image-text pairs and write a "
                    "mufnet feature store plus manifest.",
    )
    parser.add_argument("--listing", required=True,
                        help="input listing: id, split, label, image_path, text")
    parser.add_argument("--out-store", required=True, help="output feature-store file")
    parser.add_argument("--out-manifest", required=True, help="output manifest file")
    parser.add_argument("--dim", type=int, default=768, help="target embedding width")
    parser.add_argument("--resnet-len", type=int, default=49,
                        help="ResNet token count (perfect square)")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu", help="torch device")
    parser.add_argument("--backend", choices=["pretrained", "random-init"],
                        default="pretrained",
                        help="random-init runs the same architectures with seeded "
                             "random weights (pipeline testing only)")
    parser.add_argument("--clip-model", default=DEFAULT_CLIP)
    parser.add_argument("--bert-model", default=DEFAULT_BERT)
    parser.add_argument("--seed", type=int, default=0, help="random-init backend seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pairs = load_listing(args.listing)
    except (OSError, ListingError) as exc:
        print(f"error: listing: {exc}", file=sys.stderr)
        return 3
    if args.backend == "pretrained":
        encoders = PretrainedEncoders(args.clip_model, args.bert_model, args.device)
    else:
        encoders = RandomInitEncoders(seed=args.seed, device=args.device)
    job = ExportJob(
        pairs=pairs,
        store_path=args.out_store,
        manifest_path=args.out_manifest,
        dim=args.dim,
        resnet_len=args.resnet_len,
        batch_size=args.batch_size,
    )
    try:
        report = export(job, encoders)
    except (ExportError, ValueError) as exc:
        print(f"error: export: {exc}", file=sys.stderr)
        return 1
    print(f"exported {report.count} pairs at dim {report.dim} "
          f"(stream lengths {report.stream_lens}) to {args.out_store}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
