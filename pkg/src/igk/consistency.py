"""Layer-consistency loss: keep pairwise similarity orderings of graph
representations stable from one GNN layer to the next."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

# distance gaps below this count as ties for the reference probability
TIE_TOL = 1e-12
MODES = ("all", "first_last")


class InvalidPair(ValueError):
    pass


def cosine_distance_matrix(H) -> np.ndarray:
    """``1 - cos(H_i, H_j)`` with a zero diagonal; rows near zero are eps-guarded."""
    H = np.asarray(H.value if isinstance(H, Tensor) else H, dtype=np.float64)
    norms = np.maximum(np.linalg.norm(H, axis=1, keepdims=True), ad.NORM_EPS)
    U = H / norms
    D = np.clip(1.0 - U @ U.T, 0.0, 2.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def cosine_distance_tensor(H: Tensor) -> Tensor:
    U = ad.row_l2_normalize(H)
    return 1.0 - ad.matmul(U, ad.transpose(U))


def _distinct(k, n, m):
    if len({k, n, m}) != 3:
        raise InvalidPair(f"indices must be distinct, got k={k}, n={n}, m={m}")


def predicted_prob(D: np.ndarray, k: int, n: int, m: int, literal: bool = False) -> float:
    """Probability that graph ``k`` is closer to ``n`` than to ``m``.

    ``literal=True`` uses the opposite orientation (probability that ``n``
    is the farther one), which leaves the cross-entropy unchanged when the
    reference is flipped too.
    """
    _distinct(k, n, m)
    gap = D[k, n] - D[k, m]
    if literal:
        gap = -gap
    return 1.0 / (1.0 + math.exp(gap))


def reference_prob(D_prev: np.ndarray, k: int, n: int, m: int, literal: bool = False,
                   tie_tol: float = TIE_TOL) -> float:
    """1 if ``n`` is strictly closer to ``k`` than ``m`` is, 0 if farther, 1/2 on a tie."""
    _distinct(k, n, m)
    gap = D_prev[k, m] - D_prev[k, n]
    if literal:
        gap = -gap
    sign = 0.0 if abs(gap) <= tie_tol else math.copysign(1.0, gap)
    return 0.5 * (1.0 + sign)


def pair_cross_entropy(p_ref: float, p_pred: float) -> float:
    out = 0.0
    if p_ref > 0:
        out -= p_ref * math.log(p_pred)
    if p_ref < 1:
        out -= (1.0 - p_ref) * math.log(1.0 - p_pred)
    return out


def _pair_index(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    idx = [i for i in range(n) if i != k]
    ns, ms = [], []
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            ns.append(idx[a])
            ms.append(idx[b])
    return np.array(ns, dtype=np.int64), np.array(ms, dtype=np.int64)


def layer_pair_loss(prev: Tensor, cur: Tensor, k: int, literal: bool = False) -> Tensor:
    """Mean pairwise cross-entropy for one (previous, current) layer pair.

    The previous layer only supplies constant targets; gradients flow
    through the current layer's distances alone.
    """
    n = cur.shape[0]
    ns, ms = _pair_index(n, k)
    D_prev = cosine_distance_matrix(prev.value)
    gap_prev = D_prev[k, ms] - D_prev[k, ns]
    if literal:
        gap_prev = -gap_prev
    sign = np.where(np.abs(gap_prev) <= TIE_TOL, 0.0, np.sign(gap_prev))
    p_ref = Tensor(0.5 * (1.0 + sign))

    D_cur = cosine_distance_tensor(cur)
    pick = np.zeros((1, n))
    pick[0, k] = 1.0
    sel = np.zeros((n, ns.size))
    sel[ns, np.arange(ns.size)] = 1.0
    sel[ms, np.arange(ns.size)] = -1.0
    gap = ad.matmul(ad.matmul(Tensor(pick), D_cur), Tensor(sel))  # D[k,n] - D[k,m]
    if literal:
        gap = -gap
    log_p = ad.log(ad.sigmoid(-gap))
    log_q = ad.log(ad.sigmoid(gap))
    ce = -(p_ref * log_p) - ((1.0 - p_ref) * log_q)
    return ad.reduce_mean(ce)


def layer_pairs(layer_count: int, mode: str) -> list[tuple[int, int]]:
    if mode == "all":
        return [(h - 1, h) for h in range(1, layer_count)]
    if mode == "first_last":
        return [(0, layer_count - 1)]
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def consistency_loss(reps, mode: str = "all", rng: np.random.Generator | None = None,
                     literal_sign: bool = False, all_references: bool = False) -> Tensor:
    """Sum over layer pairs of the mean pairwise ordering cross-entropy.

    ``reps`` is a sequence of per-layer graph representation tensors (or an
    object with a ``layers`` attribute).  One reference graph is drawn per
    layer pair from ``rng``; ``all_references`` averages over every graph
    instead.  Batches with fewer than 3 graphs give an exact zero.
    """
    layers = list(getattr(reps, "layers", reps))
    if len(layers) < 2:
        raise ValueError("consistency loss needs at least two layers")
    n = layers[0].shape[0]
    if n < 3:
        return Tensor(0.0)
    rng = np.random.default_rng(0) if rng is None else rng
    total = None
    for a, b in layer_pairs(len(layers), mode):
        if all_references:
            terms = [layer_pair_loss(layers[a], layers[b], k, literal_sign) for k in range(n)]
            term = terms[0]
            for t in terms[1:]:
                term = term + t
            term = term * (1.0 / n)
        else:
            k = int(rng.integers(n))
            term = layer_pair_loss(layers[a], layers[b], k, literal_sign)
        total = term if total is None else total + term
    return total


def total_loss(origin: Tensor, consistency: Tensor, lam: float) -> Tensor:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return origin
    return origin + consistency * float(lam)
