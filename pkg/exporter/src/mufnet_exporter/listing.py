"""Input listing: the mufnet manifest format plus an image-path column.

One record per line, UTF-8, tab-separated fields in order:
id, split, label, image_path, text. Text stays last and may contain tabs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

SPLITS = ("train", "validation", "test")


class ListingError(Exception):
    pass


@dataclass
class Pair:
    id: str
    split: str
    label: int
    image_path: str
    text: str


def load_listing(path) -> list[Pair]:
    pairs: list[Pair] = []
    seen: set[str] = set()
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 4)
            if len(parts) != 5:
                raise ListingError(
                    f"line {lineno}: expected 5 tab-separated fields "
                    f"(id, split, label, image_path, text), got {len(parts)}"
                )
            pair_id, split, label, image_path, text = parts
            if not pair_id:
                raise ListingError(f"line {lineno}: empty id")
            if pair_id in seen:
                raise ListingError(f"line {lineno}: duplicate id {pair_id!r}")
            seen.add(pair_id)
            if split not in SPLITS:
                raise ListingError(f"line {lineno}: unknown split {split!r}")
            if label not in ("0", "1"):
                raise ListingError(f"line {lineno}: bad label {label!r}")
            if not os.path.isabs(image_path):
                image_path = os.path.join(base, image_path)
            pairs.append(Pair(pair_id, split, int(label), image_path, text))
    return pairs


def write_manifest(path, pairs: list[Pair]) -> None:
    """Write the primary-format manifest (without the image column)."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.id}\t{p.split}\t{p.label}\t{p.text}\n")
