"""WL-subtree and WLOA kernels and per-iteration Gram matrix series."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .graph import GraphCollection
from .wl import ColoringSequence, refine_collection

Omega = Union[str, Sequence[float], Callable[[int], float]]


class DepthError(ValueError):
    pass


class DegenerateKernel(ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


KINDS = ("wl_subtree", "wloa")


def omega_weights(omega: Omega, H: int) -> np.ndarray:
    """Weights ``w[i]`` for iterations ``i = 0..H``.

    ``"constant_one"`` gives 1 everywhere, ``"linear"`` gives ``w[i] = i``
    for ``i >= 1``; a sequence is read as ``w[1..H]``.  Iteration 0 borrows
    ``w[1]`` so the table stays non-decreasing.
    """
    if isinstance(omega, str):
        if omega in ("constant_one", "one"):
            w = np.ones(H + 1)
        elif omega == "linear":
            w = np.arange(H + 1, dtype=float)
            w[0] = 1.0
        else:
            raise ValueError(f"unknown omega tag {omega!r}")
    elif callable(omega):
        w = np.array([float(omega(max(i, 1))) for i in range(H + 1)])
    else:
        table = [float(x) for x in omega]
        if len(table) < H:
            raise ValueError(f"omega table has {len(table)} entries, need {H}")
        w = np.array([table[0]] + table[:H])
    if np.any(w < 0) or np.any(np.diff(w[1:]) < 0):
        raise ValueError("omega must be nonnegative and non-decreasing")
    return w


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "wloa"
    H: int = 3
    omega: Union[str, tuple] = "constant_one"
    include_iteration_zero: bool = False
    normalized: bool = True
    use_node_labels: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if not isinstance(self.omega, str):
            object.__setattr__(self, "omega", tuple(float(x) for x in self.omega))
        omega_weights(self.omega, self.H)

    @property
    def start(self) -> int:
        return 0 if self.include_iteration_zero else 1

    def weights(self) -> np.ndarray:
        return omega_weights(self.omega, self.H)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "H": self.H,
                "omega": self.omega if isinstance(self.omega, str) else list(self.omega),
                "include_iteration_zero": self.include_iteration_zero,
                "normalized": self.normalized, "use_node_labels": self.use_node_labels}


# -- pairwise kernels --------------------------------------------------------

def histmin(a: Mapping[int, int], b: Mapping[int, int]) -> int:
    """Histogram intersection: sum over colours of the smaller count."""
    if len(a) > len(b):
        a, b = b, a
    return sum(min(k, b[c]) for c, k in a.items() if c in b)


def histogram_dot(a: Mapping[int, int], b: Mapping[int, int]) -> int:
    if len(a) > len(b):
        a, b = b, a
    return sum(k * b[c] for c, k in a.items() if c in b)


def _check_depth(a: ColoringSequence, b: ColoringSequence, h: int):
    if h < 1:
        raise DepthError("h must be >= 1")
    if h > a.depth or h > b.depth:
        raise DepthError(f"h={h} exceeds refinement depth {min(a.depth, b.depth)}")


def subtree_kernel(a: ColoringSequence, b: ColoringSequence, h: int, start: int = 1) -> float:
    _check_depth(a, b, h)
    return float(sum(histogram_dot(a.histograms[i], b.histograms[i]) for i in range(start, h + 1)))


def wloa_kernel(a: ColoringSequence, b: ColoringSequence, h: int,
                omega: Omega = "constant_one", start: int = 1) -> float:
    _check_depth(a, b, h)
    w = omega_weights(omega, h)
    return float(sum(histmin(a.histograms[i], b.histograms[i]) * w[i] for i in range(start, h + 1)))


def normalize(k_xy: float, k_xx: float, k_yy: float) -> float:
    if k_xx <= 0 or k_yy <= 0:
        raise DegenerateKernel(f"non-positive self-kernel ({k_xx}, {k_yy})")
    return k_xy / math.sqrt(k_xx * k_yy)


def normalize_matrix(K: np.ndarray) -> np.ndarray:
    d = np.diag(K).copy()
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise DegenerateKernel(f"graph {bad[0]} has non-positive self-kernel {d[bad[0]]}", int(bad[0]))
    s = np.sqrt(d)
    out = K / np.outer(s, s)
    np.fill_diagonal(out, 1.0)
    return out


# -- Gram series -------------------------------------------------------------

def _count_matrix(seqs: Sequence[ColoringSequence], i: int) -> np.ndarray:
    cols: dict[int, int] = {}
    for s in seqs:
        for c in s.histograms[i]:
            cols.setdefault(c, len(cols))
    X = np.zeros((len(seqs), len(cols)), dtype=np.int64)
    for r, s in enumerate(seqs):
        for c, k in s.histograms[i].items():
            X[r, cols[c]] = k
    return X


def _histmin_matrix(X: np.ndarray, workers: int = 1, block_elems: int = 1 << 22) -> np.ndarray:
    n, m = X.shape
    out = np.zeros((n, n), dtype=np.int64)
    rows = max(1, block_elems // max(1, n * m))
    blocks = [(r, min(n, r + rows)) for r in range(0, n, rows)]

    def fill(block):
        lo, hi = block
        # rows lo..hi against columns lo..n; lower triangle mirrored below
        out[lo:hi, lo:] = np.minimum(X[lo:hi, None, :], X[None, lo:, :]).sum(axis=2)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    upper = np.triu(out)
    return upper + np.triu(out, 1).T


@dataclass(frozen=True)
class GramSeries:
    """Cumulative kernel matrices for ``h = 1..H``.

    ``raw[h - 1]`` is K^(h); ``normalized[h - 1]`` the cosine-normalised
    version (``None`` when the spec asks for raw matrices only).
    ``per_iteration[i]`` holds the iteration-``i`` summand (before weighting).
    """

    spec: KernelSpec
    raw: np.ndarray
    normalized: np.ndarray | None
    per_iteration: np.ndarray
    fingerprint: str = ""
    labels: np.ndarray | None = field(default=None, compare=False)
    node_counts: np.ndarray | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.raw.shape[1]

    @property
    def H(self) -> int:
        return self.raw.shape[0]

    def matrix(self, h: int, normalized: bool | None = None) -> np.ndarray:
        if not 1 <= h <= self.H:
            raise DepthError(f"h={h} outside 1..{self.H}")
        if normalized is None:
            normalized = self.normalized is not None
        if normalized:
            if self.normalized is None:
                raise ValueError("series was built without normalisation")
            return self.normalized[h - 1]
        return self.raw[h - 1]

    def summary(self) -> dict:
        out = {"spec": self.spec.to_dict(), "n": self.n, "fingerprint": self.fingerprint,
               "per_h": []}
        for h in range(1, self.H + 1):
            K = self.matrix(h)
            off = K[~np.eye(self.n, dtype=bool)]
            out["per_h"].append({
                "h": h,
                "min_offdiag": float(off.min()) if off.size else None,
                "mean_offdiag": float(off.mean()) if off.size else None,
                "max_offdiag": float(off.max()) if off.size else None,
            })
        return out


def gram_series_from_sequences(seqs: Sequence[ColoringSequence], spec: KernelSpec,
                               fingerprint: str = "", labels=None,
                               workers: int = 1) -> GramSeries:
    if not seqs:
        raise ValueError("no graphs")
    depth = min(s.depth for s in seqs)
    if depth < spec.H:
        raise DepthError(f"sequences refined to {depth} < H={spec.H}")
    n = len(seqs)
    per_iter = np.zeros((spec.H + 1, n, n), dtype=np.int64)
    for i in range(spec.start, spec.H + 1):
        X = _count_matrix(seqs, i)
        per_iter[i] = X @ X.T if spec.kind == "wl_subtree" else _histmin_matrix(X, workers)

    w = spec.weights() if spec.kind == "wloa" else np.ones(spec.H + 1)
    weighted = per_iter * w[:, None, None] if spec.kind == "wloa" else per_iter.astype(float)
    cum = np.cumsum(weighted[spec.start:], axis=0)
    # cum[j] covers iterations start..start+j; keep h = 1..H
    raw = cum[1 - spec.start:].astype(float)
    normed = None
    if spec.normalized:
        normed = np.empty_like(raw)
        for h in range(spec.H):
            try:
                normed[h] = normalize_matrix(raw[h])
            except DegenerateKernel as exc:
                raise DegenerateKernel(f"h={h + 1}: {exc}", exc.index) from None
    node_counts = np.array([sum(s.histograms[0].values()) for s in seqs], dtype=np.int64)
    return GramSeries(spec, raw, normed, per_iter, fingerprint,
                      None if labels is None else np.asarray(labels), node_counts)


def gram_series(collection: GraphCollection, spec: KernelSpec, workers: int = 1) -> GramSeries:
    seqs = refine_collection(collection.graphs, spec.H, spec.use_node_labels)
    return gram_series_from_sequences(seqs, spec, collection.fingerprint(),
                                      collection.labels, workers)


# -- histogram fixtures and export -----------------------------------------

def load_histogram_fixture(path: str | os.PathLike) -> tuple[list[ColoringSequence], np.ndarray, str]:
    """Read a JSON fixture of explicit per-iteration colour histograms.

    Layout: ``{"name": str, "graphs": [{"label": int, "histograms":
    [{colour: count, ...}, ...]}]}`` with iteration 0 first.
    """
    with open(path) as fh:
        doc = json.load(fh)
    seqs, labels = [], []
    for g in doc["graphs"]:
        seqs.append(ColoringSequence.from_histograms(g["histograms"]))
        labels.append(int(g.get("label", 0)))
    return seqs, np.array(labels, dtype=np.int64), doc.get("name", os.path.basename(os.fspath(path)))


def write_gram_csv(series: GramSeries, directory: str | os.PathLike, prefix: str = "gram",
                   ids: Sequence | None = None) -> list[str]:
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    ids = list(range(series.n)) if ids is None else list(ids)
    paths = []
    for h in range(1, series.H + 1):
        p = os.path.join(directory, f"{prefix}_h{h}.csv")
        K = series.matrix(h)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["graph"] + ids)
            for gid, row in zip(ids, K):
                w.writerow([gid] + [format(float(x), ".17g") for x in row])
        paths.append(p)
    return paths


def read_gram_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(x) for x in r[1:]] for r in rows[1:]])
