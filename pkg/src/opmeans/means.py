"""Kubo-Ando means of positive definite matrices.

A representing function ``f`` induces the matrix mean

    sigma(A, B) = A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}.

Semi-definite inputs are handled by shifting both arguments by ``eps * I`` and
tracking the change as ``eps`` decreases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import spd_core
from .funcs import RepresentingFunction, builtin, power_kernel
from .spd_core import (
    DimensionMismatchError,
    EigenDecomposition,
    NotPositiveDefiniteError,
    as_symmetric,
    eigh,
    from_eig,
)

EPSILON_SCHEDULE = (1e-4, 1e-6, 1e-8)
PSD_RTOL = 1e-12


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, gaps: tuple[float, ...]):
        self.gaps = gaps
        super().__init__(message)


def _require_pd(evals: np.ndarray) -> None:
    top = max(abs(evals[0]), abs(evals[-1]))
    if evals[0] <= spd_core.SPD_RTOL * (1.0 + top):
        raise NotPositiveDefiniteError(f"matrix is not positive definite: smallest eigenvalue {evals[0]!r}")


def _spd_decomposition(a) -> EigenDecomposition:
    dec = eigh(a)
    _require_pd(dec.eigenvalues)
    return dec


def mean_from_decomposition(f, dec_a: EigenDecomposition, b) -> np.ndarray:
    """Mean of ``A`` (given by its eigendecomposition) and ``B``.

    ``A^{1/2}`` and ``A^{-1/2}`` come from the one decomposition.  The result
    is symmetrized.
    """
    vals, basis = dec_a.eigenvalues, dec_a.basis
    root = np.sqrt(vals)
    half = (basis * root) @ basis.T
    inv_half = (basis / root) @ basis.T
    inner = inv_half @ np.asarray(b, dtype=float) @ inv_half
    dec_c = eigh((inner + inner.T) / 2)
    vals_c = dec_c.eigenvalues
    top = abs(vals_c[-1])
    if vals_c[0] < -spd_core.SPD_RTOL * (1.0 + top):
        raise NotPositiveDefiniteError("second argument is not positive definite")
    # With A badly conditioned, roundoff can push tiny eigenvalues of C to or
    # below zero even though B > 0; lift them to the roundoff floor.
    floor = np.finfo(float).eps * top
    if vals_c[0] < floor:
        dec_c = EigenDecomposition(np.maximum(vals_c, floor), dec_c.basis)
    core = spd_core.apply_function(None, f, dec_c)
    m = half @ core @ half
    return spd_core._freeze((m + m.T) / 2)


def mean(f: RepresentingFunction, a, b) -> np.ndarray:
    """``A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}`` for positive definite ``a``, ``b``."""
    a = as_symmetric(a)
    b = as_symmetric(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    dec_a = _spd_decomposition(a)
    _require_pd(spd_core.eigvalsh(b))
    return mean_from_decomposition(f, dec_a, b)


@dataclass(frozen=True)
class MatrixMean:
    """A representing function lifted to matrices.

    ``epsilon > 0`` makes calls go through :func:`mean_psd` with that single
    shift; ``epsilon == 0`` requires positive definite arguments.
    """

    f: RepresentingFunction
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def __call__(self, a, b) -> np.ndarray:
        if self.epsilon == 0:
            return mean(self.f, a, b)
        return mean_psd(self.f, a, b, schedule=(self.epsilon,)).matrix


class PsdMean(NamedTuple):
    matrix: np.ndarray
    gap: float  # Frobenius distance between the last two iterates
    gaps: tuple[float, ...]
    iterates: tuple[np.ndarray, ...]


def _require_psd(evals: np.ndarray) -> None:
    scale = 1.0 + max(abs(evals[0]), abs(evals[-1]))
    if evals[0] < -PSD_RTOL * scale:
        raise NotPositiveDefiniteError(f"matrix is not positive semi-definite: eigenvalue {evals[0]!r}")


def regularized_iterates(f: RepresentingFunction, a, b, schedule=EPSILON_SCHEDULE) -> list[np.ndarray]:
    """``sigma(A + eps I, B + eps I)`` for each ``eps`` in ``schedule``."""
    a = as_symmetric(a)
    b = as_symmetric(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    dec_a = eigh(a)
    _require_psd(dec_a.eigenvalues)
    _require_psd(spd_core.eigvalsh(b))
    if any(not eps > 0 for eps in schedule):
        raise ValueError(f"epsilon schedule must be positive, got {tuple(schedule)}")
    # A + eps I shares the eigenvectors of A, and B + eps I is positive
    # definite for PSD B, so only the inner matrix needs a fresh decomposition.
    eye = np.eye(a.shape[0])
    out = []
    for eps in schedule:
        shifted = EigenDecomposition(np.maximum(dec_a.eigenvalues + eps, eps), dec_a.basis)
        out.append(mean_from_decomposition(f, shifted, b + eps * eye))
    return out


def mean_psd(f: RepresentingFunction, a, b, schedule=EPSILON_SCHEDULE) -> PsdMean:
    """Mean of positive semi-definite matrices as the limit of ``sigma(A + eps I, B + eps I)``.

    Evaluates along ``schedule`` (decreasing) and returns the last iterate with
    the Frobenius gaps between consecutive iterates.  Raises
    :class:`ConvergenceError` when the gaps grow.
    """
    iterates = regularized_iterates(f, a, b, schedule)
    gaps = tuple(float(np.linalg.norm(x - y)) for x, y in zip(iterates, iterates[1:]))
    scale = 1.0 + float(np.linalg.norm(iterates[-1]))
    if len(gaps) >= 2 and gaps[-1] > gaps[-2] and gaps[-1] > 1e-6 * scale:
        raise ConvergenceError(f"epsilon sequence diverges: gaps {gaps}", gaps)
    return PsdMean(iterates[-1], gaps[-1] if gaps else 0.0, gaps, tuple(iterates))


def power_mean_matrix(t: float, lam: float, a, b) -> np.ndarray:
    """Weighted power mean ``P_t(lam; A, B)``."""
    return mean(power_kernel(t, lam), a, b)


def geometric_mean_matrix(lam: float, a, b) -> np.ndarray:
    """Weighted geometric mean ``A #_lam B``."""
    return mean(builtin("geometric", lam), a, b)


def heinz_mean_matrix(t: float, a, b) -> np.ndarray:
    """``(A #_t B + A #_{1-t} B) / 2``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    a = as_symmetric(a)
    b = as_symmetric(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    dec = _spd_decomposition(a)
    m = (
        mean_from_decomposition(builtin("geometric", t), dec, b)
        + mean_from_decomposition(builtin("geometric", 1.0 - t), dec, b)
    ) / 2
    return spd_core._freeze(m)


def lambda_max(m) -> float:
    return float(spd_core.eigvalsh(m)[-1])


def lambda_min(m) -> float:
    return float(spd_core.eigvalsh(m)[0])


__all__ = [
    "ConvergenceError",
    "MatrixMean",
    "PsdMean",
    "from_eig",
    "geometric_mean_matrix",
    "heinz_mean_matrix",
    "mean",
    "mean_from_decomposition",
    "mean_psd",
    "regularized_iterates",
    "power_mean_matrix",
]
