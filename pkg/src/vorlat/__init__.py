"""Exact Voronoi-cell geometry and quantizer constants of lattices."""

from .catalog import available_lattices, get_lattice, load_generator_file
from .estimators import FamilyOptimizer, VoronoiAnalyzer
from .exact import ParamPolynomial, QuadraticNumber, format_exact, isolate_positive_roots, laurent_fit, parse_exact
from .family import analyze_family, minimize_G, tensor_decomposition, validity_window
from .lattice import Lattice, laminate, monte_carlo_G, product_lattice, relevant_vectors, zador_bound
from .pipeline import Analysis, StageError, analyze_lattice

__all__ = [
    "Analysis",
    "FamilyOptimizer",
    "Lattice",
    "ParamPolynomial",
    "QuadraticNumber",
    "StageError",
    "VoronoiAnalyzer",
    "analyze_family",
    "analyze_lattice",
    "available_lattices",
    "format_exact",
    "get_lattice",
    "isolate_positive_roots",
    "laminate",
    "laurent_fit",
    "load_generator_file",
    "minimize_G",
    "monte_carlo_G",
    "parse_exact",
    "product_lattice",
    "relevant_vectors",
    "tensor_decomposition",
    "validity_window",
    "zador_bound",
]

__version__ = "0.1.0"
