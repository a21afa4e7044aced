"""Binary classification metrics over the sarcasm-positive class (label 1).

The reported F1 is the positive-class harmonic mean of precision and
recall, which on a binary task is what the usual "micro-average F1"
tables report for the sarcasm class.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import ContractError
from .fusion import FusionConfig, ModelParams, model_forward


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def acc(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion(pairs) -> Metrics:
    """Counts from (predicted, actual) label pairs; positive class is 1."""
    tp = fp = tn = fn = 0
    for pred, actual in pairs:
        if pred not in (0, 1) or actual not in (0, 1):
            raise ContractError(f"labels must be 0 or 1, got ({pred}, {actual})")
        if actual == 1:
            if pred == 1:
                tp += 1
            else:
                fn += 1
        else:
            if pred == 1:
                fp += 1
            else:
                tn += 1
    return Metrics(tp=tp, fp=fp, tn=tn, fn=fn)


def _thread_count() -> int:
    raw = os.environ.get("MUFNET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def evaluate(params: ModelParams, cfg: FusionConfig, manifest, split: str,
             provider) -> Metrics:
    """Metrics over one manifest split; forward passes are pure, so samples
    may be scored in parallel (capped by MUFNET_THREADS)."""
    samples = manifest.split_samples(split)
    if not samples:
        raise ContractError(f"evaluate: split {split!r} is empty")

    def score(sample):
        streams = provider.get_streams(sample.id, sample.text)
        return model_forward(streams, params, cfg).label, sample.label

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(score, samples))
    else:
        pairs = [score(s) for s in samples]
    return confusion(pairs)
