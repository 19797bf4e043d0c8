"""Graph data model, TU-format ingestion and synthetic corpora."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ParseError(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class LabeledGraph:
    """Simple undirected graph with integer node labels and a class index.

    ``adjacency[v]`` is the sorted tuple of neighbours of node ``v``.
    """

    adjacency: tuple[tuple[int, ...], ...]
    node_labels: tuple[int, ...]
    graph_label: int = 0

    def __post_init__(self):
        n = len(self.adjacency)
        if n < 1:
            raise ValueError("graph needs at least one node")
        if len(self.node_labels) != n:
            raise ValueError(f"{len(self.node_labels)} node labels for {n} nodes")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"neighbours of node {v} not sorted/unique")
            for u in nbrs:
                if not 0 <= u < n:
                    raise ValueError(f"node {v} has out-of-range neighbour {u}")
                if u == v:
                    raise ValueError(f"self-loop at node {v}")
                if v not in self.adjacency[u]:
                    raise ValueError(f"edge ({v},{u}) is not symmetric")

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]],
                   node_labels: Sequence[int] | None = None,
                   graph_label: int = 0) -> "LabeledGraph":
        nbrs: list[set[int]] = [set() for _ in range(node_count)]
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        if node_labels is None:
            node_labels = [1] * node_count
        return cls(tuple(tuple(sorted(s)) for s in nbrs),
                   tuple(int(x) for x in node_labels), int(graph_label))

    @property
    def node_count(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v, nbrs in enumerate(self.adjacency) for u in nbrs if v < u]

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    def relabel(self, perm: Sequence[int]) -> "LabeledGraph":
        """Return the isomorphic copy where old node ``v`` becomes ``perm[v]``."""
        labels = [0] * self.node_count
        for v, lab in enumerate(self.node_labels):
            labels[perm[v]] = lab
        edges = [(perm[u], perm[v]) for u, v in self.edges()]
        return LabeledGraph.from_edges(self.node_count, edges, labels, self.graph_label)


@dataclass(frozen=True)
class GraphCollection:
    graphs: tuple[LabeledGraph, ...]
    class_count: int
    name: str = ""
    # original label values, indexed by the contiguous class id
    label_names: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.graphs:
            raise ValueError("collection is empty")
        for i, g in enumerate(self.graphs):
            if not 0 <= g.graph_label < self.class_count:
                raise ValueError(f"graph {i} label {g.graph_label} outside [0, {self.class_count})")

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, idx):
        return self.graphs[idx]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.graph_label for g in self.graphs], dtype=np.int64)

    def subset(self, indices: Sequence[int], name: str | None = None) -> "GraphCollection":
        return GraphCollection(tuple(self.graphs[i] for i in indices), self.class_count,
                               self.name if name is None else name, self.label_names)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for g in self.graphs:
            h.update(repr((g.adjacency, g.node_labels, g.graph_label)).encode())
        return h.hexdigest()[:16]


def make_collection(graphs: Sequence[LabeledGraph], name: str = "") -> GraphCollection:
    class_count = max(g.graph_label for g in graphs) + 1
    return GraphCollection(tuple(graphs), class_count, name, tuple(range(class_count)))


# -- TU format -------------------------------------------------------------

def _read_ints(path: str) -> list[tuple[int, list[int]]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append((lineno, [int(tok) for tok in line.replace(",", " ").split()]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not an integer row: {line!r}") from None
    return rows


def parse_tu_dataset(directory: str | os.PathLike, dataset_name: str) -> GraphCollection:
    """Read a dataset in the TU benchmark text layout.

    Mandatory files are ``<DS>_A.txt`` (1-indexed edge list),
    ``<DS>_graph_indicator.txt`` and ``<DS>_graph_labels.txt``;
    ``<DS>_node_labels.txt`` is optional and defaults to label 1 everywhere.
    """
    directory = os.fspath(directory)

    def path(suffix):
        return os.path.join(directory, f"{dataset_name}_{suffix}.txt")

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not os.path.isfile(path(suffix)):
            raise ParseError(f"missing mandatory file {path(suffix)}")

    indicator = []
    for lineno, row in _read_ints(path("graph_indicator")):
        if len(row) != 1:
            raise ParseError(f"{path('graph_indicator')}:{lineno}: expected one value")
        indicator.append(row[0])
    raw_labels = []
    for lineno, row in _read_ints(path("graph_labels")):
        if len(row) != 1:
            raise ParseError(f"{path('graph_labels')}:{lineno}: expected one value")
        raw_labels.append(row[0])
    n_graphs = len(raw_labels)
    if n_graphs == 0:
        raise ParseError("no graphs in graph_labels file")
    if any(not 1 <= gid <= n_graphs for gid in indicator):
        raise ParseError("graph indicator refers to a graph id outside the label file")
    if sorted(indicator) != indicator:
        raise ParseError("graph indicator must be non-decreasing")

    if os.path.isfile(path("node_labels")):
        node_labels = []
        for lineno, row in _read_ints(path("node_labels")):
            if len(row) < 1:
                raise ParseError(f"{path('node_labels')}:{lineno}: empty row")
            node_labels.append(row[0])
        if len(node_labels) != len(indicator):
            raise ParseError(f"{len(node_labels)} node labels for {len(indicator)} nodes")
    else:
        node_labels = [1] * len(indicator)

    # global (0-based) node id -> (graph index, local index)
    offsets = {}
    local = []
    for gnode, gid in enumerate(indicator):
        offsets.setdefault(gid - 1, gnode)
        local.append(gnode - offsets[gid - 1])
    sizes = [0] * n_graphs
    for gid in indicator:
        sizes[gid - 1] += 1
    if any(s == 0 for s in sizes):
        raise ParseError(f"graph {sizes.index(0) + 1} has no nodes")

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(n_graphs)]
    for lineno, row in _read_ints(path("A")):
        if len(row) != 2:
            raise ParseError(f"{path('A')}:{lineno}: expected two node ids")
        a, b = row[0] - 1, row[1] - 1
        if not (0 <= a < len(indicator) and 0 <= b < len(indicator)):
            raise ParseError(f"{path('A')}:{lineno}: node id out of range")
        if a == b:
            raise ParseError(f"{path('A')}:{lineno}: self-loop on node {a + 1}")
        ga, gb = indicator[a] - 1, indicator[b] - 1
        if ga != gb:
            raise ParseError(f"{path('A')}:{lineno}: edge ({a + 1},{b + 1}) crosses graphs {ga + 1} and {gb + 1}")
        u, v = local[a], local[b]
        edge_sets[ga].add((min(u, v), max(u, v)))

    label_names = tuple(sorted(set(raw_labels)))
    remap = {lab: i for i, lab in enumerate(label_names)}
    graphs = []
    for gi in range(n_graphs):
        start = offsets[gi]
        labels = node_labels[start:start + sizes[gi]]
        graphs.append(LabeledGraph.from_edges(sizes[gi], sorted(edge_sets[gi]), labels,
                                              remap[raw_labels[gi]]))
    return GraphCollection(tuple(graphs), len(label_names), dataset_name, label_names)


def write_tu_dataset(collection: GraphCollection, directory: str | os.PathLike,
                     dataset_name: str, node_labels: bool = True) -> None:
    """Write ``collection`` in the TU layout (both edge directions listed)."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    a_rows, indicator, nlabels, glabels = [], [], [], []
    offset = 0
    names = collection.label_names or tuple(range(collection.class_count))
    for gi, g in enumerate(collection.graphs, 1):
        for v, nbrs in enumerate(g.adjacency):
            for u in nbrs:
                a_rows.append(f"{offset + v + 1}, {offset + u + 1}")
        indicator.extend([str(gi)] * g.node_count)
        nlabels.extend(str(x) for x in g.node_labels)
        glabels.append(str(names[g.graph_label]))
        offset += g.node_count

    def dump(suffix, rows):
        with open(os.path.join(directory, f"{dataset_name}_{suffix}.txt"), "w") as fh:
            fh.write("\n".join(rows) + ("\n" if rows else ""))

    dump("A", a_rows)
    dump("graph_indicator", indicator)
    dump("graph_labels", glabels)
    if node_labels:
        dump("node_labels", nlabels)


# -- synthetic corpora -----------------------------------------------------

FAMILIES = ("cycle", "path", "cycles_vs_paths", "er", "er_vs_ba", "split_by_density")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for :func:`generate_synthetic`.

    ``count=None`` produces one graph per entry of ``sizes``; otherwise
    ``count`` graphs whose sizes are drawn from ``sizes``.  ``p`` is the
    edge probability for random families (``split_by_density`` uses
    ``p`` and ``p_high``).  ``class_rule`` is ``"family"`` (labels follow
    the generating family, e.g. cycles 0 / paths 1) or ``"constant"``.
    """

    family: str
    sizes: tuple[int, ...]
    count: int | None = None
    p: float = 0.2
    p_high: float = 0.5
    ba_edges: int = 2
    class_rule: str = "family"


def cycle_graph(n: int, label: int = 0) -> LabeledGraph:
    return LabeledGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], graph_label=label)


def path_graph(n: int, label: int = 0) -> LabeledGraph:
    return LabeledGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], graph_label=label)


def er_graph(n: int, p: float, rng: np.random.Generator, label: int = 0) -> LabeledGraph:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return LabeledGraph.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()), graph_label=label)


def ba_graph(n: int, m: int, rng: np.random.Generator, label: int = 0) -> LabeledGraph:
    """Preferential attachment: start from a clique on ``m`` nodes."""
    m = max(1, min(m, n - 1))
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    targets = list(range(m))
    repeated: list[int] = []
    for v in range(m, n):
        for t in set(targets):
            edges.append((v, t))
        repeated.extend(targets)
        repeated.extend([v] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(repeated[int(rng.integers(len(repeated)))])
        targets = sorted(chosen)
    return LabeledGraph.from_edges(n, edges, graph_label=label)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> GraphCollection:
    if spec.family not in FAMILIES:
        raise InvalidSpec(f"unknown family {spec.family!r}; expected one of {FAMILIES}")
    if not spec.sizes or min(spec.sizes) < 3:
        raise InvalidSpec("every size must be >= 3")
    if spec.class_rule not in ("family", "constant"):
        raise InvalidSpec(f"unknown class rule {spec.class_rule!r}")
    rng = np.random.default_rng(seed)
    if spec.count is None:
        sizes = list(spec.sizes)
    else:
        sizes = [int(s) for s in rng.choice(spec.sizes, size=spec.count)]

    graphs = []
    for i, n in enumerate(sizes):
        if spec.family == "cycle":
            g = cycle_graph(n)
        elif spec.family == "path":
            g = path_graph(n)
        elif spec.family == "cycles_vs_paths":
            g = cycle_graph(n, 0) if i % 2 == 0 else path_graph(n, 1)
        elif spec.family == "er":
            g = er_graph(n, spec.p, rng)
        elif spec.family == "er_vs_ba":
            if i % 2 == 0:
                # match the BA edge count in expectation
                p = min(1.0, 2 * spec.ba_edges / max(n - 1, 1))
                g = er_graph(n, p, rng, 0)
            else:
                g = ba_graph(n, spec.ba_edges, rng, 1)
        else:  # split_by_density
            dense = i % 2 == 1
            g = er_graph(n, spec.p_high if dense else spec.p, rng, int(dense))
        if spec.class_rule == "constant":
            g = LabeledGraph(g.adjacency, g.node_labels, 0)
        graphs.append(g)

    class_count = max(g.graph_label for g in graphs) + 1
    return GraphCollection(tuple(graphs), class_count, f"synthetic-{spec.family}",
                           tuple(range(class_count)))
