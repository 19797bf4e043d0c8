"""Rank correlation across layers, kernel k-NN and accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .consistency import cosine_distance_matrix


class Undefined(ValueError):
    """Spearman correlation of a constant vector."""


class InvalidK(ValueError):
    pass


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation of average ranks (ties share the mean rank)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("spearman needs two equal-length vectors of length >= 2")
    ra = rankdata(a) - (a.size + 1) / 2
    rb = rankdata(b) - (b.size + 1) / 2
    saa, sbb = ra @ ra, rb @ rb
    if saa == 0 or sbb == 0:
        raise Undefined("constant input")
    # one sqrt of the product keeps identical rankings at exactly 1.0
    return float(np.clip((ra @ rb) / np.sqrt(saa * sbb), -1.0, 1.0))


@dataclass
class LayerCorrelationReport:
    per_pair: list[float | None]
    overall: float | None
    # per layer pair: (min, median, max) of per-graph rho
    distribution: list[tuple[float, float, float] | None] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_pair": self.per_pair,
            "overall": self.overall,
            "distribution": [None if d is None else {"min": d[0], "median": d[1], "max": d[2]}
                             for d in self.distribution],
            "excluded": self.excluded,
        }


def layer_rank_correlation(layers: Sequence) -> LayerCorrelationReport:
    """Average Spearman correlation between consecutive layers' distance rows.

    For every consecutive pair of layers and every graph ``i``, the distances
    from ``i`` to all other graphs are ranked in both layers and correlated;
    the values are averaged over graphs, then over layer pairs.  Rows that
    are constant in either layer are skipped and counted in ``excluded``.
    """
    mats = [np.asarray(getattr(L, "value", L), dtype=float) for L in layers]
    if len(mats) < 2:
        raise ValueError("need at least two layers")
    n = mats[0].shape[0]
    if n < 3:
        raise ValueError("need at least three graphs")
    dists = [cosine_distance_matrix(M) for M in mats]
    off = ~np.eye(n, dtype=bool)
    per_pair, dist, excluded = [], [], []
    for h in range(len(dists) - 1):
        rhos, skipped = [], 0
        for i in range(n):
            try:
                rhos.append(spearman(dists[h][i][off[i]], dists[h + 1][i][off[i]]))
            except Undefined:
                skipped += 1
        excluded.append(skipped)
        if rhos:
            per_pair.append(float(np.mean(rhos)))
            dist.append((float(np.min(rhos)), float(np.median(rhos)), float(np.max(rhos))))
        else:
            per_pair.append(None)
            dist.append(None)
    valid = [r for r in per_pair if r is not None]
    overall = float(np.mean(valid)) if valid else None
    return LayerCorrelationReport(per_pair, overall, dist, excluded)


def knn_classify(K: np.ndarray, train_idx: Sequence[int], train_labels: Sequence[int],
                 test_idx: Sequence[int], k: int = 1) -> np.ndarray:
    """Majority vote among the ``k`` most similar training graphs.

    Similarity ties go to the smaller training index, vote ties to the
    smaller class index.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if train_idx.size == 0:
        raise InvalidK("empty training set")
    if not 1 <= k <= train_idx.size:
        raise InvalidK(f"k={k} outside 1..{train_idx.size}")
    order_key = np.argsort(train_idx, kind="stable")
    train_idx, train_labels = train_idx[order_key], train_labels[order_key]
    preds = []
    n_classes = int(train_labels.max()) + 1
    for t in test_idx:
        sims = K[t, train_idx]
        nearest = np.argsort(-sims, kind="stable")[:k]
        votes = np.bincount(train_labels[nearest], minlength=n_classes)
        preds.append(int(np.argmax(votes)))
    return np.array(preds, dtype=np.int64)


def accuracy(pred: Sequence[int], truth: Sequence[int]) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("accuracy needs equal-length non-empty vectors")
    return float(np.mean(pred == truth))
