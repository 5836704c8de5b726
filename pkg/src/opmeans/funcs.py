"""Representing functions of operator means.

A representing function is an operator monotone ``f`` on ``(0, inf)`` with
``f(1) = 1``.  Its derivative at one, the *weight*, lies in ``[0, 1]``.
Everything here works on scalars or numpy arrays of positive reals.

The module provides
  * the power-mean kernel ``p_t(lam; x) = (1 - lam + lam * x**t)**(1/t)``,
  * a catalog of named means (see :data:`CATALOG_NAMES`),
  * the adjoint ``x -> 1/f(1/x)`` and perp ``x -> x/f(x)`` transforms,
  * the PMI/PMD classifier driven by comparing ``f`` to ``x**f'(1)``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

GRID_POINTS = 200
GRID_LO = 1e-6
GRID_HI = 1e6
CLASSIFY_TOL = 1e-10
NORMALIZATION_TOL = 1e-10
MONOTONE_SLACK = 1e-12
GUARD = 1e-9  # width of the limit branch around removable singularities
FD_STEP = 1e-5

CATALOG_NAMES = (
    "arithmetic",
    "harmonic",
    "geometric",
    "power",
    "log",
    "identric",
    "heinz",
    "power_diff",
)


class InvalidFunctionError(ValueError):
    """A candidate representing function broke one of the admission rules."""

    def __init__(self, rule: str, message: str, witness: float | None = None):
        self.rule = rule
        self.witness = witness
        super().__init__(message)


class EvaluationError(ArithmeticError):
    def __init__(self, name: str, x: float, value: float):
        self.x = x
        super().__init__(f"{name} is not finite and positive at x={x!r} (got {value!r})")


@dataclass(frozen=True)
class RepresentingFunction:
    """A named representing function with its weight ``f'(1)``.

    ``evaluate`` maps an array of positive reals to an array of the same
    shape.  Call the instance itself for guarded evaluation.
    """

    name: str
    params: tuple[tuple[str, float], ...]
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    weight: float
    weight_is_analytic: bool = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            y = self.evaluate(x)
        if np.ndim(y) == 0:
            return float(y)
        return np.asarray(y, dtype=float)

    @property
    def label(self) -> str:
        """Catalog-style label, e.g. ``heinz:0.3`` or ``log``."""
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{v:g}" for _, v in self.params)

    def checked(self, x) -> np.ndarray:
        """Evaluate on an array and raise :class:`EvaluationError` on bad values."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(self(x))
        bad = ~(np.isfinite(y) & (y > 0))
        if np.any(bad):
            k = int(np.argmax(bad))
            raise EvaluationError(self.name, float(x[k]), float(y[k]))
        return y


class Verdict(str, enum.Enum):
    PMI = "PMI"
    PMD = "PMD"
    BOUNDARY = "Boundary"
    NEITHER = "Neither"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    max_violation_pmi: float
    max_violation_pmd: float
    witness_pmi: float | None = None
    witness_pmd: float | None = None

    @property
    def witness_x(self) -> float | None:
        return self.witness_pmi if self.witness_pmi is not None else self.witness_pmd

    @property
    def in_pmi(self) -> bool:
        return self.verdict in (Verdict.PMI, Verdict.BOUNDARY)

    @property
    def in_pmd(self) -> bool:
        return self.verdict in (Verdict.PMD, Verdict.BOUNDARY)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "max_violation_pmi": self.max_violation_pmi,
            "max_violation_pmd": self.max_violation_pmd,
            "witness_pmi": self.witness_pmi,
            "witness_pmd": self.witness_pmd,
        }


def default_grid(n: int = GRID_POINTS, lo: float = GRID_LO, hi: float = GRID_HI) -> np.ndarray:
    """Log-uniform grid on ``[lo, hi]`` with ``x == 1`` removed."""
    grid = np.logspace(math.log10(lo), math.log10(hi), n)
    return grid[grid != 1.0]


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    grid = grid[grid != 1.0]
    if grid.size < 2 or np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("grid needs at least two finite positive points other than 1")
    return grid


def _check_unit(name: str, value: float, lo: float = 0.0, hi: float = 1.0) -> float:
    value = float(value)
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
    return value


# -- kernels -----------------------------------------------------------------


def power_mean_value(t: float, lam, x):
    """``p_t(lam; x)``, the weighted power mean of 1 and ``x``.

    Evaluated as ``exp(log1p(lam * expm1(t*log x)) / t)`` so that ``t`` and
    ``x`` near their singular values keep full relative accuracy.  For
    ``|t| < 1e-9`` the geometric limit ``x**lam`` is used.
    """
    with np.errstate(all="ignore"):
        if abs(t) < GUARD:
            return np.power(x, lam)
        return np.exp(np.log1p(lam * np.expm1(t * np.log(x))) / t)


def power_kernel(t: float, lam: float) -> RepresentingFunction:
    t = _check_unit("t", t, -1.0, 1.0)
    lam = _check_unit("lam", lam)
    return RepresentingFunction(
        "power", (("t", t), ("lam", lam)), lambda x: power_mean_value(t, lam, x), lam
    )


def _near_one(x: np.ndarray) -> np.ndarray:
    return np.abs(x - 1.0) < GUARD


def _log_mean(x):
    d = x - 1.0
    direct = d / np.log(np.where(_near_one(x), 2.0, x))
    return np.where(_near_one(x), 1.0 + d / 2.0, direct)


def _identric(x):
    d = x - 1.0
    safe = np.where(_near_one(x), 2.0, x)
    direct = np.exp(safe * np.log(safe) / (safe - 1.0) - 1.0)
    return np.where(_near_one(x), 1.0 + d / 2.0, direct)


def _scaled_expm1(a: float, logx):
    """``(x**a - 1)/a`` with its ``a -> 0`` limit ``log x``."""
    if a == 0.0:
        return logx
    return np.expm1(a * logx) / a


def _slope(y):
    """``d/dy log((e**y - 1)/y) = 1/(1 - e**-y) - 1/y``, accurate near 0."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 0.1
    ys = np.where(small, 1.0, y)
    direct = 1.0 / -np.expm1(-ys) - 1.0 / ys
    y2 = y * y
    series = 0.5 + y * (1 / 12 + y2 * (-1 / 720 + y2 * (1 / 30240 - y2 / 1209600)))
    return np.where(small, series, direct)


def _slope_curvature(y):
    """Second derivative of :func:`_slope`; odd in ``y``."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    small = a < 0.5
    a_s = np.where(small, 1.0, a)
    u = np.exp(-a_s)
    s = -np.expm1(-a_s)
    direct = u / s**2 + 2 * u * u / s**3 - 2 / a_s**3
    a2 = a * a
    series = a * (-1 / 120 + a2 * (1 / 1512 + a2 * (-1 / 28800 + a2 / 665280)))
    return np.sign(y) * np.where(small, series, direct)


def power_difference(p: float, q: float, x):
    """Closed form of ``F_{p,q}(x) = (p/(p+q) * (x**(p+q)-1)/(x**p-1))**(1/q)``.

    With ``L = log x`` and ``h(y) = log((e**y - 1)/y)`` this is
    ``log F = L * (h((p+q)L) - h(pL)) / (qL)``, a divided difference of
    ``h``.  For small ``|qL|`` the midpoint expansion
    ``h'(m) + (qL)**2 h'''(m) / 24`` replaces it, which also covers
    ``q = 0``.  Otherwise ``(E(p+q)/E(p))**(1/q)`` with
    ``E(a) = (x**a - 1)/a`` is used.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        logx = np.log(np.where(_near_one(x), 2.0, x))
        delta = q * logx
        mid = (p + q / 2.0) * logx
        taylor = np.exp(logx * (_slope(mid) + delta * delta / 24.0 * _slope_curvature(mid)))
        if abs(q) < GUARD:
            val = taylor
        else:
            direct = (_scaled_expm1(p + q, logx) / _scaled_expm1(p, logx)) ** (1.0 / q)
            val = np.where(np.abs(delta) < 1e-2, taylor, direct)
    return np.where(_near_one(x), 1.0 + (x - 1.0) / 2.0, val)


def builtin(name: str, *params: float) -> RepresentingFunction:
    """Look up a catalog mean by name.

    ``arithmetic``, ``harmonic`` and ``geometric`` take a weight ``lam``;
    ``power`` takes ``(t, lam)``; ``heinz`` takes ``t`` in ``[0, 1]``;
    ``power_diff`` takes ``(p, q)`` in ``[-1, 1]**2``; ``log`` and
    ``identric`` take nothing.
    """
    arity = {
        "arithmetic": 1, "harmonic": 1, "geometric": 1, "power": 2,
        "log": 0, "identric": 0, "heinz": 1, "power_diff": 2,
    }
    if name not in arity:
        raise ValueError(f"unknown catalog function {name!r}; choose from {', '.join(CATALOG_NAMES)}")
    if len(params) != arity[name]:
        raise ValueError(f"{name} takes {arity[name]} parameter(s), got {len(params)}")
    params = tuple(float(v) for v in params)

    if name == "arithmetic":
        lam = _check_unit("lam", params[0])
        return RepresentingFunction(name, (("lam", lam),), lambda x: 1.0 - lam + lam * x, lam)
    if name == "harmonic":
        lam = _check_unit("lam", params[0])
        return RepresentingFunction(name, (("lam", lam),), lambda x: x / ((1.0 - lam) * x + lam), lam)
    if name == "geometric":
        lam = _check_unit("lam", params[0])
        return RepresentingFunction(name, (("lam", lam),), lambda x: x**lam, lam)
    if name == "power":
        return power_kernel(*params)
    if name == "log":
        return RepresentingFunction(name, (), _log_mean, 0.5)
    if name == "identric":
        return RepresentingFunction(name, (), _identric, 0.5)
    if name == "heinz":
        t = _check_unit("t", params[0])
        return RepresentingFunction(name, (("t", t),), lambda x: (x**t + x ** (1.0 - t)) / 2.0, 0.5)
    p = _check_unit("p", params[0], -1.0, 1.0)
    q = _check_unit("q", params[1], -1.0, 1.0)
    return RepresentingFunction(name, (("p", p), ("q", q)), lambda x: power_difference(p, q, x), 0.5)


def builtin_from_spec(spec: str) -> RepresentingFunction:
    """Parse ``name[:p1,p2,...]`` into a catalog function."""
    name, _, rest = spec.strip().partition(":")
    params = [float(v) for v in rest.split(",")] if rest.strip() else []
    return builtin(name.strip(), *params)


def catalog() -> list[RepresentingFunction]:
    """A representative parameterization of every catalog family."""
    specs = [
        "arithmetic:0.25", "arithmetic:0.5", "arithmetic:0.75",
        "harmonic:0.25", "harmonic:0.5", "harmonic:0.75",
        "geometric:0.4", "geometric:0.5",
        "power:0.5,0.5", "power:-0.5,0.5", "power:1,0.3", "power:-1,0.3",
        "log", "identric",
        "heinz:0", "heinz:0.25", "heinz:0.3", "heinz:0.5",
        "power_diff:1,1", "power_diff:1,0", "power_diff:0,0",
        "power_diff:-0.5,0.5", "power_diff:0.5,-0.5",
    ]
    return [builtin_from_spec(s) for s in specs]


# -- weight and validation ---------------------------------------------------


def numerical_weight(fn: Callable, h: float = FD_STEP) -> float:
    """Central difference at 1 with one Richardson step."""

    def fd(step: float) -> float:
        return float((fn(np.float64(1.0 + step)) - fn(np.float64(1.0 - step))) / (2.0 * step))

    return (4.0 * fd(h) - fd(2.0 * h)) / 3.0


def weight_at_one(f: RepresentingFunction) -> float:
    """``f'(1)`` clipped to ``[0, 1]``.

    Raises :class:`InvalidFunctionError` if a numerically derived weight lies
    outside ``[-1e-6, 1 + 1e-6]``.
    """
    w = f.weight if f.weight_is_analytic else numerical_weight(f)
    if not math.isfinite(w) or w < -1e-6 or w > 1.0 + 1e-6:
        raise InvalidFunctionError("weight", f"{f.name}: f'(1) = {w!r} is outside [0, 1]", 1.0)
    if w < -1e-8 or w > 1.0 + 1e-8:
        warnings.warn(f"{f.name}: f'(1) = {w!r} clipped to [0, 1]", RuntimeWarning, stacklevel=2)
    return min(max(w, 0.0), 1.0)


def _with_numeric_weight(name: str, params, fn: Callable) -> RepresentingFunction:
    w = numerical_weight(lambda x: fn(np.asarray(x, dtype=float)))
    return RepresentingFunction(name, params, fn, w, weight_is_analytic=False)


def validate(f: RepresentingFunction, grid=None) -> RepresentingFunction:
    """Check normalization, weight range, positivity and monotonicity on ``grid``."""
    grid = default_grid() if grid is None else _check_grid(grid)
    one = f(1.0)
    if not abs(one - 1.0) <= NORMALIZATION_TOL:
        raise InvalidFunctionError("normalization", f"{f.name}: f(1) = {one!r}, expected 1", 1.0)
    weight_at_one(f)
    xs = np.sort(grid)
    ys = f(xs)
    bad = ~(np.isfinite(ys) & (ys > 0))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise InvalidFunctionError(
            "positivity", f"{f.name}: f({xs[k]!r}) = {ys[k]!r} is not finite and positive", float(xs[k])
        )
    drop = ys[:-1] - ys[1:] - MONOTONE_SLACK * (1.0 + np.abs(ys[:-1]))
    if np.any(drop > 0):
        k = int(np.argmax(drop > 0))
        raise InvalidFunctionError(
            "monotonicity",
            f"{f.name}: f decreases between x={xs[k]!r} and x={xs[k + 1]!r}",
            float(xs[k + 1]),
        )
    return f


def adjoint(f: RepresentingFunction, grid=None) -> RepresentingFunction:
    """``x -> 1/f(1/x)``; the weight is re-derived numerically."""
    g = _with_numeric_weight(f"adjoint({f.name})", f.params, lambda x: 1.0 / f.evaluate(1.0 / x))
    return validate(g, grid)


def perp(f: RepresentingFunction, grid=None) -> RepresentingFunction:
    """``x -> x/f(x)``; the weight is re-derived numerically."""
    g = _with_numeric_weight(f"perp({f.name})", f.params, lambda x: x / f.evaluate(x))
    return validate(g, grid)


# -- classification ----------------------------------------------------------


def _log_gap(f: RepresentingFunction, grid: np.ndarray, tol: float):
    """Return (log f - w log x, per-point tolerance)."""
    w = weight_at_one(f)
    logf = np.log(f.checked(grid))
    return logf - w * np.log(grid), tol * np.maximum(1.0, np.abs(logf))


def classify(f: RepresentingFunction, grid=None, tol: float = CLASSIFY_TOL) -> Classification:
    """Sort ``f`` into PMI, PMD, Boundary or Neither.

    PMI means ``x**f'(1) <= f(x)`` on every grid point, PMD the reverse.
    Comparison is done between ``log f(x)`` and ``f'(1) * log x`` with a
    tolerance relative to ``max(1, |log f(x)|)``.  Boundary (both hold) takes
    precedence over PMI, which takes precedence over PMD.
    """
    grid = default_grid() if grid is None else _check_grid(grid)
    gap, tols = _log_gap(f, grid, tol)
    under = -gap - tols  # > 0 where x**w > f(x): breaks PMI
    over = gap - tols  # > 0 where f(x) > x**w: breaks PMD
    viol_pmi = float(max(0.0, np.max(-gap)))
    viol_pmd = float(max(0.0, np.max(gap)))
    fails_pmi = bool(np.any(under > 0))
    fails_pmd = bool(np.any(over > 0))
    witness_pmi = float(grid[np.argmax(under)]) if fails_pmi else None
    witness_pmd = float(grid[np.argmax(over)]) if fails_pmd else None
    if not fails_pmi and not fails_pmd:
        verdict = Verdict.BOUNDARY
    elif not fails_pmi:
        verdict = Verdict.PMI
    elif not fails_pmd:
        verdict = Verdict.PMD
    else:
        verdict = Verdict.NEITHER
    return Classification(verdict, viol_pmi, viol_pmd, witness_pmi, witness_pmd)


def cone_membership(f: RepresentingFunction, t: float, grid=None, tol: float = CLASSIFY_TOL) -> bool:
    """Whether ``p_t(f'(1); x) <= f(x)`` on the grid (membership in ``C_t``)."""
    t = _check_unit("t", t, -1.0, 1.0)
    grid = default_grid() if grid is None else _check_grid(grid)
    w = weight_at_one(f)
    logf = np.log(f.checked(grid))
    logp = np.log(power_mean_value(t, w, grid))
    return bool(np.all(logp - logf <= tol * np.maximum(1.0, np.abs(logf))))


def ma_bound_check(f: RepresentingFunction, grid=None, tol: float = CLASSIFY_TOL) -> tuple[bool, float]:
    """Check ``f(x) <= 1 - f'(1) + f'(1) x``.

    Returns ``(holds, max_excess)`` where the excess is relative,
    ``f(x)/bound - 1``, maximized over the grid (zero if the bound is met).
    """
    grid = default_grid() if grid is None else _check_grid(grid)
    w = weight_at_one(f)
    bound = 1.0 - w + w * grid
    excess = float(max(0.0, np.max(f.checked(grid) / bound - 1.0)))
    return excess <= tol, excess


class LemmaCheck(NamedTuple):
    ok: bool
    verdict: Verdict
    worst: float  # largest inconsistency in log scale, <= 0 when consistent
    witness: tuple[float, float] | None  # (x, r)

    def __bool__(self) -> bool:
        return self.ok


def pmi_lemma_crosscheck(
    f: RepresentingFunction,
    r_list: Sequence[float] = (1.5, 2.0, 5.0),
    grid=None,
    tol: float = CLASSIFY_TOL,
) -> LemmaCheck:
    """Confirm that the sign of ``f(x)**r - f(x**r)`` matches ``classify(f)``.

    PMI requires ``f(x)**r <= f(x**r)``, PMD the reverse and Boundary
    equality, for every ``r`` and grid point.  Signs are compared through
    ``r log f(x) - log f(x**r)``.
    """
    grid = default_grid() if grid is None else _check_grid(grid)
    verdict = classify(f, grid, tol).verdict
    if verdict is Verdict.NEITHER:
        raise ValueError(f"{f.name} is neither PMI nor PMD; the power inequality has no fixed sign")
    worst, witness = -math.inf, None
    for r in r_list:
        if r < 1:
            raise ValueError(f"r must be >= 1, got {r}")
        lhs = r * np.log(f.checked(grid))
        gap = lhs - np.log(f.checked(grid**r))
        slack = tol * np.maximum(1.0, np.abs(lhs))
        if verdict is Verdict.PMI:
            bad = gap - slack
        elif verdict is Verdict.PMD:
            bad = -gap - slack
        else:
            bad = np.abs(gap) - slack
        k = int(np.argmax(bad))
        if bad[k] > worst:
            worst, witness = float(bad[k]), (float(grid[k]), float(r))
    ok = worst <= 0
    return LemmaCheck(ok, verdict, worst, None if ok else witness)
