"""Mean-aggregation message-passing GNN with per-layer graph readouts,
trained by plain gradient descent with an optional consistency term."""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .consistency import consistency_loss, total_loss
from .graph import GraphCollection, LabeledGraph
from .metrics import accuracy, layer_rank_correlation

LOSS_MODES = ("off", "all", "first_last")


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class GnnConfig:
    layer_count: int = 3
    hidden_dim: int = 32
    readout: str = "mean"
    learning_rate: float = 0.5
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.layer_count < 2:
            raise InvalidConfig("layer_count must be >= 2")
        if self.hidden_dim < 1 or self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("hidden_dim, epochs and batch_size must be positive")
        if self.readout != "mean":
            raise InvalidConfig("only mean readout is supported")
        if not 0 <= self.dropout_rate < 1:
            raise InvalidConfig("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")


class FeatureEncoder:
    """One-hot node features with a vocabulary fixed on a whole collection.

    Collections with a single node label carry no information under mean
    aggregation (a constant signal stays constant), so they fall back to
    one-hot degree features capped at ``max_degree``.
    """

    def __init__(self, graphs: Sequence[LabeledGraph], max_degree: int = 10):
        labels = sorted({x for g in graphs for x in g.node_labels})
        self.use_degree = len(labels) < 2
        if self.use_degree:
            top = max(max(g.degrees()) for g in graphs)
            self.max_degree = min(top, max_degree)
            self.dim = self.max_degree + 1
        else:
            self.index = {lab: i for i, lab in enumerate(labels)}
            self.dim = len(labels)

    def encode(self, g: LabeledGraph) -> np.ndarray:
        X = np.zeros((g.node_count, self.dim))
        if self.use_degree:
            cols = [min(d, self.max_degree) for d in g.degrees()]
        else:
            # unseen labels get an all-zero row
            cols = [self.index.get(x, -1) for x in g.node_labels]
        for v, c in enumerate(cols):
            if c >= 0:
                X[v, c] = 1.0
        return X


@dataclass
class BatchGraph:
    adjacency: np.ndarray   # block-diagonal D^-1 (A + I)
    features: np.ndarray
    assignment: np.ndarray  # node -> graph position in the batch
    labels: np.ndarray

    @property
    def size(self) -> int:
        return int(self.labels.size)


def normalized_adjacency(g: LabeledGraph) -> np.ndarray:
    A = np.eye(g.node_count)
    for v, nbrs in enumerate(g.adjacency):
        A[v, list(nbrs)] = 1.0
    return A / A.sum(axis=1, keepdims=True)


def build_batch(graphs: Sequence[LabeledGraph], encoder: FeatureEncoder | None = None) -> BatchGraph:
    if not graphs:
        raise ValueError("empty batch")
    encoder = FeatureEncoder(graphs) if encoder is None else encoder
    sizes = [g.node_count for g in graphs]
    total = sum(sizes)
    A = np.zeros((total, total))
    feats, assign = [], []
    off = 0
    for gi, g in enumerate(graphs):
        A[off:off + g.node_count, off:off + g.node_count] = normalized_adjacency(g)
        feats.append(encoder.encode(g))
        assign.extend([gi] * g.node_count)
        off += g.node_count
    return BatchGraph(A, np.vstack(feats), np.array(assign, dtype=np.int64),
                      np.array([g.graph_label for g in graphs], dtype=np.int64))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)


def init_weights(in_dim: int, n_classes: int, config: GnnConfig,
                 rng: np.random.Generator) -> list[Tensor]:
    dims = [in_dim] + [config.hidden_dim] * config.layer_count
    weights = [glorot(rng, a, b) for a, b in zip(dims, dims[1:])]
    weights.append(glorot(rng, config.hidden_dim, n_classes))
    return weights


@dataclass
class LayerRepresentations:
    layers: list[Tensor]
    logits: Tensor


def forward(batch: BatchGraph, weights: Sequence[Tensor], config: GnnConfig,
            dropout_rng: np.random.Generator | None = None) -> LayerRepresentations:
    """Node update ``relu(A_hat H W)`` per layer, mean readout after each layer.

    Dropout is applied to node representations only when ``dropout_rng`` is
    given (training).
    """
    if len(weights) != config.layer_count + 1:
        raise ad.ShapeError(f"expected {config.layer_count + 1} weight matrices, got {len(weights)}")
    A = Tensor(batch.adjacency)
    h = Tensor(batch.features)
    layers = []
    for W in weights[:-1]:
        h = ad.relu(ad.matmul(ad.matmul(A, h), W))
        if dropout_rng is not None and config.dropout_rate > 0:
            keep = dropout_rng.random(h.shape) >= config.dropout_rate
            h = h * Tensor(keep / (1.0 - config.dropout_rate))
        layers.append(ad.segment_mean(h, batch.assignment))
    logits = ad.matmul(layers[-1], weights[-1])
    return LayerRepresentations(layers, logits)


def predict(batch: BatchGraph, weights, config) -> np.ndarray:
    return np.argmax(forward(batch, weights, config).logits.value, axis=1)


def split_indices(n: int, ratios=(8, 1, 1), seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle cut into train/valid/test by ``ratios``."""
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) <= 0:
        raise InvalidConfig(f"bad split ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    total = sum(ratios)
    n_train = int(round(n * ratios[0] / total))
    n_valid = int(round(n * ratios[1] / total))
    if n_train == 0 or n_train + n_valid >= n:
        raise InvalidConfig(f"split {ratios} leaves an empty part for {n} graphs")
    return perm[:n_train], perm[n_train:n_train + n_valid], perm[n_train + n_valid:]


@dataclass
class TrainResult:
    config: dict
    loss_mode: str
    lam: float
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_valid_accuracy: float = 0.0
    test_accuracy: float = 0.0
    layer_correlation: dict | None = None
    weights: list[np.ndarray] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "loss_mode": self.loss_mode,
            "lambda": self.lam,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_valid_accuracy": self.best_valid_accuracy,
            "test_accuracy": self.test_accuracy,
            "layer_correlation": self.layer_correlation,
        }


def train(collection: GraphCollection, split, config: GnnConfig = GnnConfig(),
          loss_mode: str = "off", lam: float = 0.0, literal_sign: bool = False,
          all_references: bool = False) -> TrainResult:
    """Minibatch gradient descent on cross-entropy plus ``lam`` times the
    consistency loss; the weights with the best validation accuracy are
    kept and evaluated on the test split.

    Weight init, batch order, dropout masks and reference-graph draws use
    separate streams derived from ``config.seed``, so turning the
    consistency term off or setting ``lam=0`` gives the same trajectory.
    """
    if lam < 0:
        raise InvalidConfig("lambda must be >= 0")
    if loss_mode not in LOSS_MODES:
        raise InvalidConfig(f"loss_mode must be one of {LOSS_MODES}")
    train_idx, valid_idx, test_idx = (np.asarray(s, dtype=np.int64) for s in split)
    parts = [set(train_idx.tolist()), set(valid_idx.tolist()), set(test_idx.tolist())]
    if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
        raise InvalidConfig("train/valid/test splits overlap")
    if train_idx.size == 0 or valid_idx.size == 0 or test_idx.size == 0:
        raise InvalidConfig("every split must be non-empty")

    encoder = FeatureEncoder(collection.graphs)
    init_rng = np.random.default_rng([config.seed, 0])
    order_rng = np.random.default_rng([config.seed, 1])
    ref_rng = np.random.default_rng([config.seed, 2])
    drop_rng = np.random.default_rng([config.seed, 3])

    weights = init_weights(encoder.dim, collection.class_count, config, init_rng)
    graphs = collection.graphs

    def batch_of(idx):
        return build_batch([graphs[i] for i in idx], encoder)

    valid_batch, test_batch = batch_of(valid_idx), batch_of(test_idx)
    result = TrainResult(asdict(config), loss_mode, float(lam))
    best = None
    for epoch in range(1, config.epochs + 1):
        perm = train_idx[order_rng.permutation(train_idx.size)]
        sums = {"origin": 0.0, "consistency": 0.0, "total": 0.0}
        n_batches = 0
        for start in range(0, perm.size, config.batch_size):
            batch = batch_of(perm[start:start + config.batch_size])
            reps = forward(batch, weights, config, drop_rng)
            origin = ad.softmax_cross_entropy(reps.logits, batch.labels)
            if loss_mode == "off":
                loss = origin
                cons_value = 0.0
            else:
                cons = consistency_loss(reps, loss_mode, ref_rng, literal_sign, all_references)
                loss = total_loss(origin, cons, lam)
                cons_value = cons.item()
            ad.backward(loss)
            for W in weights:
                W.value -= config.learning_rate * W.grad
                W.zero_grad()
            sums["origin"] += origin.item()
            sums["consistency"] += cons_value
            sums["total"] += loss.item()
            n_batches += 1
        valid_out = forward(valid_batch, weights, config)
        valid_acc = accuracy(np.argmax(valid_out.logits.value, axis=1), valid_batch.labels)
        valid_loss = ad.softmax_cross_entropy(valid_out.logits, valid_batch.labels).item()
        result.epochs.append({"epoch": epoch, **{k: v / n_batches for k, v in sums.items()},
                              "valid_accuracy": valid_acc, "valid_loss": valid_loss})
        # best validation accuracy, ties broken by lower validation loss
        key = (valid_acc, -valid_loss)
        if best is None or key > best[0]:
            best = (key, epoch, [W.value.copy() for W in weights])

    (result.best_valid_accuracy, _), result.best_epoch, best_weights = best
    result.weights = best_weights
    final = [Tensor(w) for w in best_weights]
    result.test_accuracy = accuracy(predict(test_batch, final, config), test_batch.labels)
    if test_batch.size >= 3:
        reps = forward(test_batch, final, config)
        result.layer_correlation = layer_rank_correlation(reps.layers).to_dict()
    return result


# -- checkpoints: per matrix an (rows, cols) int64 header then row-major float64

def save_weights(path, weights: Sequence) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", len(weights)))
        for W in weights:
            W = np.ascontiguousarray(getattr(W, "value", W), dtype="<f8")
            fh.write(struct.pack("<qq", *W.shape))
            fh.write(W.tobytes())


def load_weights(path) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<q", fh.read(8))
        out = []
        for _ in range(count):
            rows, cols = struct.unpack("<qq", fh.read(16))
            out.append(np.frombuffer(fh.read(8 * rows * cols), dtype="<f8").reshape(rows, cols).copy())
    return out
