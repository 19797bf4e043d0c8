"""Executable checks for monotonic decrease, order consistency, the WLOA
ratio bound and the two-class margin of normalised iterative kernels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramSeries, normalize

MONOTONIC_TOL = 1e-9
ORDER_TOL = 1e-6
EXHAUSTIVE_LIMIT = 200
SAMPLE_TRIPLES = 1_000_000


class InvalidInput(ValueError):
    pass


@dataclass
class Violation:
    indices: tuple[int, ...]
    h: int
    lhs: float
    rhs: float

    @property
    def magnitude(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_dict(self) -> dict:
        keys = ("i", "j", "k")
        d = {keys[t]: int(x) for t, x in enumerate(self.indices)}
        d.update(h=self.h, lhs=self.lhs, rhs=self.rhs)
        return d


@dataclass
class ViolationReport:
    property: str
    kernel: str
    H: int
    checked_count: int
    violations: list[Violation] = field(default_factory=list)
    # per transition h -> h+1: (checked, violated)
    per_h: dict[int, tuple[int, int]] = field(default_factory=dict)
    sampled: bool = False

    @property
    def violation_rate(self) -> float:
        return len(self.violations) / self.checked_count if self.checked_count else 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "kernel": self.kernel,
            "H": self.H,
            "checked": self.checked_count,
            "violations": [v.to_dict() for v in self.violations],
            "rate": self.violation_rate,
            "per_h": [{"h": h, "checked": c, "violations": v, "rate": v / c if c else 0.0}
                      for h, (c, v) in sorted(self.per_h.items())],
            "sampled": self.sampled,
        }


def _require_normalized(s: GramSeries, min_h: int = 2):
    if s.normalized is None:
        raise InvalidInput("check needs a normalised Gram series")
    if s.H < min_h:
        raise InvalidInput(f"check needs H >= {min_h}, got {s.H}")


def check_monotonic_decrease(s: GramSeries, tolerance: float = MONOTONIC_TOL) -> ViolationReport:
    """Flag pairs whose normalised similarity grows from h to h+1."""
    _require_normalized(s)
    n = s.n
    iu, ju = np.triu_indices(n, k=1)
    rep = ViolationReport("monotonic_decrease", s.spec.kind, s.H, 0)
    for h in range(1, s.H):
        a = s.normalized[h - 1][iu, ju]
        b = s.normalized[h][iu, ju]
        bad = np.flatnonzero(b > a + tolerance)
        rep.checked_count += iu.size
        rep.per_h[h] = (int(iu.size), int(bad.size))
        rep.violations.extend(Violation((int(iu[t]), int(ju[t])), h, float(b[t]), float(a[t]))
                              for t in bad)
    return rep


def _triples(n: int, rng: np.random.Generator | None):
    """Yield (x, ys, zs) blocks; exhaustive for small n, sampled otherwise."""
    if n <= EXHAUSTIVE_LIMIT or rng is None:
        for x in range(n):
            others = np.array([v for v in range(n) if v != x])
            ys, zs = np.meshgrid(others, others, indexing="ij")
            keep = ys != zs
            yield x, ys[keep], zs[keep]
    else:
        xs = rng.integers(n, size=SAMPLE_TRIPLES)
        ys = rng.integers(n, size=SAMPLE_TRIPLES)
        zs = rng.integers(n, size=SAMPLE_TRIPLES)
        keep = (xs != ys) & (xs != zs) & (ys != zs)
        xs, ys, zs = xs[keep], ys[keep], zs[keep]
        for x in np.unique(xs):
            sel = xs == x
            yield int(x), ys[sel], zs[sel]


def check_order_consistency(s: GramSeries, tolerance: float = ORDER_TOL,
                            seed: int = 0) -> ViolationReport:
    """Count reversals of strict similarity orderings between h and h+1.

    A triple (x, y, z) is checked at h when K(x,y) > K(x,z) + tol and
    violated when the next iteration has K(x,y) < K(x,z) - tol.
    """
    _require_normalized(s)
    if s.n < 3:
        raise InvalidInput("order consistency needs at least 3 graphs")
    rng = np.random.default_rng(seed) if s.n > EXHAUSTIVE_LIMIT else None
    rep = ViolationReport("order_consistency", s.spec.kind, s.H, 0, sampled=rng is not None)
    blocks = list(_triples(s.n, rng))
    for h in range(1, s.H):
        cur, nxt = s.normalized[h - 1], s.normalized[h]
        checked = violated = 0
        for x, ys, zs in blocks:
            premise = cur[x, ys] > cur[x, zs] + tolerance
            flip = premise & (nxt[x, ys] < nxt[x, zs] - tolerance)
            checked += int(premise.sum())
            idx = np.flatnonzero(flip)
            violated += idx.size
            rep.violations.extend(
                Violation((x, int(ys[t]), int(zs[t])), h, float(nxt[x, ys[t]]), float(nxt[x, zs[t]]))
                for t in idx)
        rep.checked_count += checked
        rep.per_h[h] = (checked, violated)
    return rep


def check_wloa_bound(s: GramSeries, tolerance: float = MONOTONIC_TOL) -> ViolationReport:
    """Check K(h+1)(x,y) >= W_h / W_{h+1} * K(h+1)(x,z) whenever K(h)(x,y) >= K(h)(x,z).

    ``W_h`` is the cumulative weight sum over the summed iterations.  The
    inequality is exact for WLOA, so any flagged triple is a bug.
    """
    if s.spec.kind != "wloa":
        raise InvalidInput("the ratio bound only applies to WLOA series")
    _require_normalized(s)
    w = s.spec.weights()
    cum_w = np.cumsum(w[s.spec.start:])[1 - s.spec.start:]  # cum_w[h-1] = W_h
    rep = ViolationReport("wloa_bound", s.spec.kind, s.H, 0)
    blocks = list(_triples(s.n, None))
    for h in range(1, s.H):
        ratio = cum_w[h - 1] / cum_w[h]
        cur, nxt = s.normalized[h - 1], s.normalized[h]
        checked = violated = 0
        for x, ys, zs in blocks:
            premise = cur[x, ys] >= cur[x, zs]
            lhs = nxt[x, ys]
            rhs = ratio * nxt[x, zs]
            bad = premise & (lhs < rhs - tolerance)
            checked += int(premise.sum())
            idx = np.flatnonzero(bad)
            violated += idx.size
            rep.violations.extend(Violation((x, int(ys[t]), int(zs[t])), h, float(lhs[t]), float(rhs[t]))
                                  for t in idx)
        rep.checked_count += checked
        rep.per_h[h] = (checked, violated)
    return rep


@dataclass
class MarginCurve:
    margins: list[float]
    pairs: list[tuple[int, int]]

    def is_non_decreasing(self, tolerance: float = 1e-12) -> bool:
        return all(b >= a - tolerance for a, b in zip(self.margins, self.margins[1:]))

    def to_dict(self) -> dict:
        return {"margins": self.margins,
                "pairs": [list(p) for p in self.pairs],
                "non_decreasing": self.is_non_decreasing()}


def margin_curve(s: GramSeries, labels=None) -> MarginCurve:
    """Smallest cross-class distance sqrt(2 - 2 K~) at every h."""
    if s.normalized is None:
        raise InvalidInput("margin needs a normalised Gram series")
    labels = s.labels if labels is None else np.asarray(labels)
    if labels is None or len(labels) != s.n:
        raise InvalidInput("margin needs one class label per graph")
    if np.unique(labels).size < 2:
        raise InvalidInput("margin needs at least two classes")
    cross = labels[:, None] != labels[None, :]
    margins, pairs = [], []
    for h in range(1, s.H + 1):
        dist = np.sqrt(np.clip(2.0 - 2.0 * s.normalized[h - 1], 0.0, None))
        masked = np.where(cross, dist, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, s.n)
        margins.append(float(masked[i, j]))
        pairs.append((min(i, j), max(i, j)))
    return MarginCurve(margins, pairs)


def margin_report(curve: MarginCurve, tolerance: float = 1e-12) -> ViolationReport:
    """Express margin decreases as violations so the CLI can gate on them."""
    rep = ViolationReport("margin", "", len(curve.margins), max(len(curve.margins) - 1, 0))
    for h in range(1, len(curve.margins)):
        a, b = curve.margins[h - 1], curve.margins[h]
        rep.per_h[h] = (1, int(b < a - tolerance))
        if b < a - tolerance:
            rep.violations.append(Violation(curve.pairs[h], h, b, a))
    return rep


# literal colour-count vectors of the two graphs at consecutive iterations
COUNTEREXAMPLE_VECTORS = (
    ([200, 4], [4, 200]),
    ([100, 100, 4], [2, 2, 200]),
)


def reproduce_counterexample(swap: bool = False) -> tuple[float, float]:
    """Normalised WL-subtree similarity after one and after two iterations.

    Returns roughly (0.0400, 0.0404): the similarity goes up, so the
    normalised subtree kernel is not monotonically decreasing.
    """
    k_xy = k_xx = k_yy = 0
    out = []
    for a, b in COUNTEREXAMPLE_VECTORS:
        if swap:
            a, b = b, a
        k_xy += int(np.dot(a, b))
        k_xx += int(np.dot(a, a))
        k_yy += int(np.dot(b, b))
        out.append(normalize(k_xy, k_xx, k_yy))
    return out[0], out[1]


def counterexample_holds(tolerance: float = 5e-4) -> bool:
    first, second = reproduce_counterexample()
    return (abs(first - 0.0400) <= tolerance and abs(second - 0.0404) <= tolerance
            and first < second and math.isfinite(first))
