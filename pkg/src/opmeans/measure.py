"""Probability measures on [0, 1] integrated against power-mean kernels.

Any representing function ``f`` with ``p_t(f'(1); x) <= f(x)`` can be written
as ``f(x) = integral of p_t(lam; x) dmu(lam)`` for a probability measure
``mu``.  This module evaluates such integrals for discrete measures and
recovers a discrete ``mu`` from ``f`` by least squares over the probability
simplex.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .funcs import (
    GUARD,
    RepresentingFunction,
    cone_membership,
    default_grid,
    numerical_weight,
    power_mean_value,
)

SUM_TOL = 1e-12
KKT_TOL = 1e-10
QUAD_TOL = 1e-12
SUM_WEIGHT = 1e3


class FitError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3e})")


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms in [0, 1] (strictly increasing) with nonnegative weights summing to one."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if np.any(atoms < 0) or np.any(atoms > 1) or np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing within [0, 1]")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, lam: float) -> "DiscreteMeasure":
        return cls([lam], [1.0])

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        return cls(np.arange(n) / (n - 1), np.full(n, 1.0 / n))

    @classmethod
    def from_unnormalized(cls, atoms, weights) -> "DiscreteMeasure":
        """Build from nonnegative weights, dropping zero atoms and renormalizing."""
        atoms = np.asarray(atoms, dtype=float)
        weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        keep = weights > 0
        return cls(atoms[keep], weights[keep] / weights[keep].sum())

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "DiscreteMeasure":
        return cls(doc["atoms"], doc["weights"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "DiscreteMeasure":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _check_t(t: float) -> float:
    if not -1.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [-1, 1]")
    return float(t)


def kernel_matrix(atoms, t: float, x) -> np.ndarray:
    """``K[j, i] = p_t(atoms[i]; x[j])``."""
    x = np.asarray(x, dtype=float)
    return power_mean_value(t, np.asarray(atoms)[None, :], x.reshape(-1, 1))


def integrate_kernel(mu: DiscreteMeasure, t: float, x):
    """``sum_i w_i p_t(lam_i; x)`` for scalar or array ``x``."""
    t = _check_t(t)
    xa = np.asarray(x, dtype=float)
    vals = kernel_matrix(mu.atoms, t, xa) @ mu.weights
    return float(vals[0]) if xa.ndim == 0 else vals.reshape(xa.shape)


def first_moment(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ mu.atoms)


def as_function(mu: DiscreteMeasure, t: float, name: str | None = None) -> RepresentingFunction:
    """The representing function induced by ``mu`` and the ``p_t`` kernel.

    The weight is derived numerically so that it can be compared with
    :func:`first_moment`.
    """
    t = _check_t(t)

    def fn(x):
        return integrate_kernel(mu, t, x)

    return RepresentingFunction(
        name or f"measure[t={t:g}]", (("t", t),), fn, numerical_weight(fn), weight_is_analytic=False
    )


# -- simplex-constrained least squares ---------------------------------------


def _kkt(m, b, ridge, w) -> float:
    """Scaled KKT residual of ``w`` for the simplex least-squares problem."""
    free = w > 0
    g = m.T @ (m @ w - b) + ridge * w
    nu = float(np.mean(g[free])) if np.any(free) else 0.0
    eta = g - nu
    scale = max(float(np.linalg.norm(m) * np.linalg.norm(b)), 1e-300)
    stationarity = np.max(np.abs(eta[free]), initial=0.0)
    dual = np.max(-eta[~free], initial=0.0)
    primal = max(abs(w.sum() - 1.0), np.max(-w, initial=0.0))
    return float(max(stationarity, dual) / scale + primal)


def simplex_lstsq(m, b, ridge: float = 0.0, max_iter: int | None = None, tol: float = KKT_TOL):
    """Minimize ``||m w - b||^2 + ridge ||w||^2`` over the probability simplex.

    The equality ``sum(w) = 1`` is imposed by the weighting method: it is
    appended as a row scaled by ``SUM_WEIGHT`` and the augmented problem is
    handed to the Lawson-Hanson active-set NNLS solver.  The result is then
    renormalized onto the simplex and its KKT residual checked.

    Returns
    -------
    w : ndarray
        Nonnegative weights with ``sum(w) == 1``.
    kkt : float
        Scaled KKT residual at ``w``.

    Raises
    ------
    FitError
        If NNLS hits ``max_iter`` (default ``50 * n``) or the KKT residual
        exceeds ``tol``.
    """
    m = np.asarray(m, dtype=float)
    b = np.asarray(b, dtype=float)
    n = m.shape[1]
    max_iter = 50 * n if max_iter is None else max_iter
    rows = [m, SUM_WEIGHT * np.ones((1, n))]
    rhs = [b, [SUM_WEIGHT]]
    if ridge > 0:
        rows.append(math.sqrt(ridge) * np.eye(n))
        rhs.append(np.zeros(n))
    try:
        w, _ = optimize.nnls(np.vstack(rows), np.concatenate(rhs), maxiter=max_iter)
    except RuntimeError as exc:
        raise FitError(f"NNLS did not converge: {exc}", math.nan) from None
    if not w.sum() > 0:
        raise FitError("NNLS returned the zero vector", float(np.linalg.norm(b)))
    w = w / w.sum()
    kkt = _kkt(m, b, ridge, w)
    if kkt > tol:
        raise FitError(f"KKT residual {kkt:.3e} above {tol:g}", float(np.linalg.norm(m @ w - b)))
    return w, kkt


@dataclass(frozen=True)
class FitResult:
    measure: DiscreteMeasure
    residual: float  # sup-norm relative residual on the held-out grid
    certified: bool  # f passed the C_t membership test
    kkt: float

    def __iter__(self):
        yield self.measure
        yield self.residual


def held_out_grid(x_grid) -> np.ndarray:
    """Log-scale midpoints of consecutive sorted grid points."""
    logs = np.log(np.sort(np.asarray(x_grid, dtype=float)))
    return np.exp((logs[1:] + logs[:-1]) / 2.0)


def fit_measure(
    f: RepresentingFunction,
    t: float,
    n_atoms: int = 64,
    x_grid=None,
    ridge: float = 0.0,
) -> FitResult:
    """Recover weights on the atoms ``i/(n_atoms - 1)`` reproducing ``f``.

    Solves ``min sum_j ((K w)_j - y_j)**2 / y_j**2 + ridge ||w||**2`` over the
    probability simplex with ``K[j, i] = p_t(lam_i; x_j)`` and ``y = f(x)``.
    Residuals are reported relative, ``max |K w / y - 1|``, on the held-out
    midpoints of ``x_grid``.  If ``f`` fails the ``C_t`` membership test the
    fit still runs but the result is flagged as not certified.
    """
    t = _check_t(t)
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    x_grid = default_grid() if x_grid is None else np.sort(np.asarray(x_grid, dtype=float))
    certified = cone_membership(f, t, x_grid)
    if not certified:
        warnings.warn(
            f"{f.name} is not in C_{t:g} on the grid; fitted measure is not certified",
            RuntimeWarning,
            stacklevel=2,
        )
    atoms = np.arange(n_atoms) / (n_atoms - 1)
    y = f.checked(x_grid)
    m = kernel_matrix(atoms, t, x_grid) / y[:, None]
    w, kkt = simplex_lstsq(m, np.ones_like(y), ridge)
    mu = DiscreteMeasure.from_unnormalized(atoms, w)
    held = held_out_grid(x_grid)
    residual = float(np.max(np.abs(integrate_kernel(mu, t, held) / f.checked(held) - 1.0)))
    return FitResult(mu, residual, certified, kkt)


# -- power-difference quadrature ---------------------------------------------


def power_diff_quadrature(p: float, q: float, x: float) -> float:
    """``F_{p,q}(x)`` by adaptive Gauss-Kronrod quadrature of its integral form.

    ``F_{p,q}(x) = (integral_0^1 (1 - lam + lam x**p)**(q/p) dlam)**(1/q)``,
    with the ``p -> 0`` and ``q -> 0`` limits taken inside the integrand
    (``x**(lam q)`` and ``exp`` of the integrated logarithm respectively).
    """
    if not (-1.0 <= p <= 1.0 and -1.0 <= q <= 1.0):
        raise ValueError(f"(p, q) = ({p}, {q}) outside [-1, 1]^2")
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    logx = math.log(x)
    zero_p, zero_q = abs(p) < GUARD, abs(q) < GUARD
    if zero_p and zero_q:
        def integrand(lam): return lam * logx
    elif zero_q:
        def integrand(lam): return math.log1p(lam * math.expm1(p * logx)) / p
    elif zero_p:
        def integrand(lam): return math.exp(lam * q * logx)
    else:
        def integrand(lam): return math.exp(q / p * math.log1p(lam * math.expm1(p * logx)))
    value, err = integrate.quad(integrand, 0.0, 1.0, epsabs=QUAD_TOL / 10, epsrel=0.0, limit=200)
    if not err <= QUAD_TOL:
        raise QuadratureError(f"quadrature error estimate {err:.3e} exceeds {QUAD_TOL:g}")
    if zero_q:
        return math.exp(value)
    return value ** (1.0 / q)
