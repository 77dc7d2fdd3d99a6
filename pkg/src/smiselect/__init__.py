"""Targeted subset selection with submodular mutual information."""

__version__ = "0.1.0"

from .kernel import EmbeddingSet, Kernel, build_kernel, read_embeddings, regularize_spd, shift_to_nonneg, write_embeddings
from .smi import FLQMI, FLVMI, GCMI, LogDetMI, SmiKind, make_smi
from .maximizer import GreedyResult, lazy_greedy, maximize, naive_greedy, stochastic_greedy

__all__ = [
    "EmbeddingSet", "Kernel", "build_kernel", "read_embeddings", "write_embeddings",
    "regularize_spd", "shift_to_nonneg",
    "FLQMI", "FLVMI", "GCMI", "LogDetMI", "SmiKind", "make_smi",
    "GreedyResult", "lazy_greedy", "maximize", "naive_greedy", "stochastic_greedy",
]
