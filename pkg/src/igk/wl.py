"""Weisfeiler-Lehman colour refinement with a collection-wide colour dictionary."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .graph import LabeledGraph

Coloring = tuple[int, ...]
Histogram = dict[int, int]

# colour shared by every node when node labels are ignored
UNIFORM_COLOR = 0


class ColorDictionary:
    """Injective map from refinement signatures to dense integer colours.

    Keys are either ``("label", value)`` for initial colours or
    ``(old_color, sorted_neighbour_colors)`` for refined ones.  Colour 0 is
    reserved for the uniform initial colouring, so the first colour handed
    out is 1.
    """

    def __init__(self):
        self._colors: dict[tuple, int] = {}
        self.next_free_color = UNIFORM_COLOR + 1

    def __len__(self):
        return len(self._colors)

    def lookup(self, signature: tuple) -> int:
        color = self._colors.get(signature)
        if color is None:
            color = self.next_free_color
            self._colors[signature] = color
            self.next_free_color += 1
        return color

    def label_color(self, label: int) -> int:
        return self.lookup(("label", int(label)))


def histogram(coloring: Sequence[int]) -> Histogram:
    return dict(sorted(Counter(coloring).items()))


def initial_coloring(g: LabeledGraph, use_node_labels: bool,
                     colors: ColorDictionary | None = None) -> Coloring:
    if not use_node_labels:
        return (UNIFORM_COLOR,) * g.node_count
    if colors is None:
        raise ValueError("labelled initial colouring needs a ColorDictionary")
    return tuple(colors.label_color(x) for x in g.node_labels)


def refine_step(coloring: Sequence[int], g: LabeledGraph, colors: ColorDictionary) -> Coloring:
    if len(coloring) != g.node_count:
        raise ValueError(f"colouring has {len(coloring)} entries for {g.node_count} nodes")
    return tuple(
        colors.lookup((coloring[v], tuple(sorted(coloring[u] for u in nbrs))))
        for v, nbrs in enumerate(g.adjacency)
    )


@dataclass(frozen=True)
class ColoringSequence:
    """Colourings of one graph at iterations 0..H and their histograms."""

    colorings: tuple[Coloring, ...]
    histograms: tuple[Histogram, ...]

    @property
    def depth(self) -> int:
        return len(self.colorings) - 1

    @classmethod
    def from_histograms(cls, histograms: Sequence[dict]) -> "ColoringSequence":
        """Build a sequence directly from per-iteration histograms.

        Used for histogram-level fixtures where no underlying graph is
        available; colourings are materialised from the counts.
        """
        hists = tuple({int(c): int(k) for c, k in sorted(h.items()) if int(k) > 0}
                      for h in histograms)
        colorings = tuple(tuple(c for c, k in h.items() for _ in range(k)) for h in hists)
        return cls(colorings, hists)


def refine(g: LabeledGraph, H: int, colors: ColorDictionary,
           use_node_labels: bool = True) -> ColoringSequence:
    """Run ``H`` refinement steps; always returns ``H + 1`` colourings."""
    if H < 1:
        raise ValueError("H must be >= 1")
    seq = [initial_coloring(g, use_node_labels, colors)]
    for _ in range(H):
        seq.append(refine_step(seq[-1], g, colors))
    return ColoringSequence(tuple(seq), tuple(histogram(c) for c in seq))


def refine_collection(graphs: Sequence[LabeledGraph], H: int, use_node_labels: bool = True,
                      colors: ColorDictionary | None = None) -> list[ColoringSequence]:
    """Refine every graph under one shared dictionary.

    Initial label colours are registered for the whole collection first so
    refined colours always come after them; the dictionary then grows in
    (graph, node) scan order.
    """
    colors = ColorDictionary() if colors is None else colors
    if use_node_labels:
        for g in graphs:
            for x in g.node_labels:
                colors.label_color(x)
    return [refine(g, H, colors, use_node_labels) for g in graphs]


def partition(coloring: Sequence[int]) -> list[frozenset[int]]:
    """Colour classes as a canonical list of node sets (colour ids forgotten)."""
    classes: dict[int, set[int]] = {}
    for v, c in enumerate(coloring):
        classes.setdefault(c, set()).add(v)
    return sorted((frozenset(s) for s in classes.values()), key=min)
