"""Kubo-Ando operator means, power-monotonicity classes and randomized checks."""

from .expr import parse, parse_function
from .funcs import (
    Classification,
    RepresentingFunction,
    Verdict,
    adjoint,
    builtin,
    catalog,
    classify,
    perp,
    power_kernel,
)
from .harness import TrialConfig, TrialReport, scalar_scan, verify_ando_hiai, verify_axioms, verify_dual_ando_hiai
from .means import MatrixMean, geometric_mean_matrix, heinz_mean_matrix, mean, mean_psd, power_mean_matrix
from .measure import DiscreteMeasure, fit_measure, power_diff_quadrature

__all__ = [
    "Classification",
    "DiscreteMeasure",
    "MatrixMean",
    "RepresentingFunction",
    "TrialConfig",
    "TrialReport",
    "Verdict",
    "adjoint",
    "builtin",
    "catalog",
    "classify",
    "fit_measure",
    "geometric_mean_matrix",
    "heinz_mean_matrix",
    "mean",
    "mean_psd",
    "parse",
    "parse_function",
    "perp",
    "power_diff_quadrature",
    "power_kernel",
    "power_mean_matrix",
    "scalar_scan",
    "verify_ando_hiai",
    "verify_axioms",
    "verify_dual_ando_hiai",
]
