"""Radial grid topology and impedance identification from smart-meter data."""

from ._gridtwin import (
    GridError,
    Network,
    builtin_fixture,
    builtin_fixture_names,
    compare_edge_sets,
    fit_laplacian,
    generate_samples,
    orient_tree,
    recover_topology,
    relative_errors,
    solve_exact,
    solve_linearized,
    sweep,
    synthesize_loads,
)

__all__ = [
    "GridError",
    "Network",
    "builtin_fixture",
    "builtin_fixture_names",
    "compare_edge_sets",
    "fit_laplacian",
    "generate_samples",
    "orient_tree",
    "recover_topology",
    "relative_errors",
    "solve_exact",
    "solve_linearized",
    "sweep",
    "synthesize_loads",
]

__version__ = "0.1.0"
