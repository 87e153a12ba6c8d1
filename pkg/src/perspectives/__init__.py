"""Compositional numeric perspectives.

Given a sentence with a numeric mention, build formulas over a knowledge base
of numeric facts whose product matches the mention's value and unit, rank
them with a logistic-regression model and realize the best as English.
"""

from .formula import (
    EnumerationConfig,
    Formula,
    FormulaSkeleton,
    closest_tuple_baseline,
    enumerate_formulas,
    enumerate_grid,
    enumerate_skeletons,
    fit_multiplier,
    prune_by_proximity,
)
from .kb import KnowledgeBase, NumericTuple, UnitGraph, build_unit_graph, load_kb
from .mention import Mention, extract_mentions, stratified_sample
from .textgen import bleu, realize_baseline, render_multiplier, split_by_skeleton
from .units import Unit, UnitAtom, load_surface_table, multiply, normalize_quantity, parse_unit

__version__ = "0.1.0"
