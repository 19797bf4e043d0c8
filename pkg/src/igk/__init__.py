"""Weisfeiler-Lehman graph kernels, their consistency properties, and a
GNN regularised to keep graph similarity orderings stable across layers."""

from .graph import (GraphCollection, LabeledGraph, ParseError, SyntheticSpec,
                    generate_synthetic, parse_tu_dataset)
from .kernels import GramSeries, KernelSpec, gram_series, histmin, subtree_kernel, wloa_kernel
from .wl import ColorDictionary, ColoringSequence, refine, refine_collection

__version__ = "0.1.0"
