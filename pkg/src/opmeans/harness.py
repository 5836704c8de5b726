"""Randomized matrix-level checks of the power inequalities and the mean axioms.

Every trial draws its own generator from ``seed ^ trial``, so a report depends
only on the configuration, never on how trials are scheduled.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import spd_core
from .funcs import RepresentingFunction, Verdict, classify, default_grid
from .means import mean, mean_from_decomposition, mean_psd, regularized_iterates
from .spd_core import EigenDecomposition, eigh, random_orthogonal, random_spd

EQUALITY_RTOL = 1e-8
NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class TrialConfig:
    trials: int = 500
    dims: tuple[int, ...] = (2, 3, 4, 5, 6)
    r_values: tuple[float, ...] = (1.5, 2.0, 3.0)
    seed: int = 0
    loewner_tol: float = spd_core.LOEWNER_TOL
    eig_log_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "r_values", tuple(float(r) for r in self.r_values))
        object.__setattr__(self, "eig_log_range", tuple(float(v) for v in self.eig_log_range))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.dims or any(not 1 <= d <= spd_core.MAX_DIM for d in self.dims):
            raise ValueError(f"dims must lie in [1, {spd_core.MAX_DIM}]")
        if not self.r_values or any(not r >= 1 for r in self.r_values):
            raise ValueError("every r must be >= 1")
        lo, hi = self.eig_log_range
        if lo > hi:
            raise ValueError("eig_log_range must satisfy lo <= hi")
        if not self.loewner_tol >= 0:
            raise ValueError("loewner_tol must be nonnegative")

    def rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng(self.seed ^ trial)

    def dim(self, trial: int) -> int:
        return self.dims[trial % len(self.dims)]


@dataclass(frozen=True)
class Violation:
    trial: int  # offset added to the seed via xor
    dim: int
    r: float | None
    excess: float
    check: str


@dataclass
class TrialReport:
    function: str
    kind: str  # "ando-hiai", "dual" or "axioms"
    mode: str  # "certification" or "falsification"
    config: TrialConfig
    total: int
    violations: int
    worst_excess: float
    worst_case: Violation | None
    first_violation: Violation | None
    elapsed: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when no trial exceeded the tolerance."""
        return self.violations == 0

    def to_json(self, include_elapsed: bool = False) -> dict:
        doc = {
            "function": self.function,
            "kind": self.kind,
            "mode": self.mode,
            "config": asdict(self.config),
            "total": self.total,
            "violations": self.violations,
            "worst_excess": self.worst_excess,
            "worst_case": None if self.worst_case is None else asdict(self.worst_case),
            "first_violation": None if self.first_violation is None else asdict(self.first_violation),
            "details": self.details,
        }
        if include_elapsed:
            doc["elapsed"] = self.elapsed
        return doc


# -- shared plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class _TrialResult:
    trial: int
    dim: int
    checks: tuple[tuple[str, float | None, float], ...]  # (check, r, excess)
    extra: dict = field(default_factory=dict)


def _run(trial_fn: Callable[[int], _TrialResult], cfg: TrialConfig, workers: int) -> list[_TrialResult]:
    def guarded(i: int) -> _TrialResult:
        try:
            return trial_fn(i)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            raise RuntimeError(f"trial {i} (seed {cfg.seed} ^ {i}) failed: {exc}") from exc

    if workers <= 1:
        return [guarded(i) for i in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, range(cfg.trials)))


def _aggregate(results: list[_TrialResult], tol: float):
    violations = 0
    worst: Violation | None = None
    first: Violation | None = None
    worst_excess = -math.inf
    for res in results:
        bad = False
        for check, r, excess in res.checks:
            if excess > worst_excess:
                worst_excess = excess
                worst = Violation(res.trial, res.dim, r, excess, check)
            if excess > tol:
                bad = True
                if first is None:
                    first = Violation(res.trial, res.dim, r, excess, check)
        violations += bad
    return violations, float(worst_excess), worst, first


def _random_pair(cfg: TrialConfig, trial: int):
    rng = cfg.rng(trial)
    dim = cfg.dim(trial)
    a = random_spd(dim, cfg.eig_log_range, rng)
    b = random_spd(dim, cfg.eig_log_range, rng)
    return rng, dim, a, b


def _scaled(dec: EigenDecomposition, factor: float, r: float = 1.0) -> EigenDecomposition:
    """Eigendecomposition of ``(factor * M)**r`` from that of ``M``."""
    return EigenDecomposition((dec.eigenvalues * factor) ** r, dec.basis)


def _mode(f: RepresentingFunction, accepted: tuple[Verdict, ...]) -> str:
    return "certification" if classify(f).verdict in accepted else "falsification"


# -- power inequalities ------------------------------------------------------


def _power_trial(f: RepresentingFunction, cfg: TrialConfig, dual: bool) -> Callable[[int], _TrialResult]:
    def trial(i: int) -> _TrialResult:
        _, dim, a, b = _random_pair(cfg, i)
        dec_a, dec_b = eigh(a), eigh(b)
        evals = spd_core.eigvalsh(mean_from_decomposition(f, dec_a, b))
        s = evals[0] if dual else evals[-1]
        # Positive homogeneity: sigma(A/s, B/s) = sigma(A, B)/s, so the
        # hypothesis sigma <= I (dual: >= I) is attained with equality.
        tight_vals = spd_core.eigvalsh(
            mean_from_decomposition(f, _scaled(dec_a, 1 / s), spd_core.from_eig(dec_b.eigenvalues / s, dec_b.basis))
        )
        tightness = abs((tight_vals[0] if dual else tight_vals[-1]) - 1.0)
        checks = []
        for r in cfg.r_values:
            br = spd_core.from_eig((dec_b.eigenvalues / s) ** r, dec_b.basis)
            vals = spd_core.eigvalsh(mean_from_decomposition(f, _scaled(dec_a, 1 / s, r), br))
            excess = 1.0 - vals[0] if dual else vals[-1] - 1.0
            checks.append(("dual-ando-hiai" if dual else "ando-hiai", r, float(excess)))
        return _TrialResult(i, dim, tuple(checks), {"tightness": tightness})

    return trial


def _verify_power(f, cfg, workers, dual: bool) -> TrialReport:
    start = time.perf_counter()
    accepted = (Verdict.PMD, Verdict.BOUNDARY) if dual else (Verdict.PMI, Verdict.BOUNDARY)
    mode = _mode(f, accepted)
    results = _run(_power_trial(f, cfg, dual), cfg, workers)
    violations, worst_excess, worst, first = _aggregate(results, cfg.loewner_tol)
    r_lo, r_hi = cfg.r_values.index(min(cfg.r_values)), cfg.r_values.index(max(cfg.r_values))
    # Observation only: does the excess grow with r?
    non_monotone = sum(res.checks[r_hi][2] < res.checks[r_lo][2] for res in results)
    details = {
        "max_tightness_error": float(max(res.extra["tightness"] for res in results)),
        "r_monotone_exceptions": int(non_monotone),
    }
    return TrialReport(
        f.label,
        "dual" if dual else "ando-hiai",
        mode,
        cfg,
        cfg.trials,
        violations,
        worst_excess,
        worst,
        first,
        time.perf_counter() - start,
        details,
    )


def verify_ando_hiai(f: RepresentingFunction, cfg: TrialConfig = TrialConfig(), workers: int = 1) -> TrialReport:
    """Check ``sigma(A, B) <= I  =>  sigma(A^r, B^r) <= I`` on random pairs.

    Each pair is rescaled so that ``lambda_max(sigma(A, B)) = 1`` and the
    excess ``lambda_max(sigma(A^r, B^r)) - 1`` is recorded for every ``r``.
    The mode is "certification" when ``f`` classifies as PMI or Boundary and
    "falsification" otherwise; in both modes all trials run.
    """
    return _verify_power(f, cfg, workers, dual=False)


def verify_dual_ando_hiai(f: RepresentingFunction, cfg: TrialConfig = TrialConfig(), workers: int = 1) -> TrialReport:
    """Mirror image of :func:`verify_ando_hiai`: rescale by ``lambda_min`` and
    record ``1 - lambda_min(sigma(A^r, B^r))``."""
    return _verify_power(f, cfg, workers, dual=True)


# -- mean axioms -------------------------------------------------------------


def _random_psd_increment(rng: np.random.Generator, dim: int, scale: float) -> np.ndarray:
    rank = int(rng.integers(1, dim + 1))
    g = rng.standard_normal((dim, rank)) * math.sqrt(scale / rank)
    return g @ g.T


def _random_transform(rng: np.random.Generator, dim: int, singular: bool) -> np.ndarray:
    """``U diag(s) V^T`` with singular values log-uniform in [0.5, 2]; one is zeroed when ``singular``."""
    s = 2.0 ** rng.uniform(-1.0, 1.0, dim)
    if singular:
        s[int(rng.integers(dim))] = 0.0
    return (random_orthogonal(rng, dim) * s) @ random_orthogonal(rng, dim).T


def _relative_frobenius(x, y) -> float:
    return float(np.linalg.norm(np.asarray(x) - y) / max(np.linalg.norm(y), 1e-300))


def _axiom_trial(f: RepresentingFunction, cfg: TrialConfig) -> Callable[[int], _TrialResult]:
    tol = cfg.loewner_tol

    def trial(i: int) -> _TrialResult:
        rng, dim, a, b = _random_pair(cfg, i)
        sigma = mean(f, a, b)
        checks = []

        c = a + _random_psd_increment(rng, dim, float(np.trace(a)) / dim)
        d = b + _random_psd_increment(rng, dim, float(np.trace(b)) / dim)
        checks.append(("monotonicity", None, spd_core.loewner_gap(sigma, mean(f, c, d))))

        x = _random_transform(rng, dim, singular=False)
        lhs = spd_core.congruence(x, sigma)
        rhs = mean(f, spd_core.congruence(x, a), spd_core.congruence(x, b))
        # Equality is two-sided Loewner; report it on the tolerance scale.
        checks.append(("transformer-invertible", None, spd_core.loewner_gap(lhs, rhs)))
        checks.append(("transformer-equality", None, _relative_frobenius(rhs, lhs) * tol / EQUALITY_RTOL))

        x = _random_transform(rng, dim, singular=True)
        lhs = spd_core.congruence(x, sigma)
        rhs = mean_psd(f, spd_core.congruence(x, a), spd_core.congruence(x, b)).matrix
        checks.append(("transformer-singular", None, spd_core.loewner_gap(lhs, rhs)))

        eye = np.eye(dim)
        norm_err = float(np.max(np.abs(mean(f, eye, eye) - eye)))
        checks.append(("normalization", None, norm_err * tol / NORMALIZATION_TOL))

        # Continuity proxy: regularized means of singular pairs must decrease
        # along the epsilon schedule.
        pa = _random_psd_increment(rng, dim, 1.0) if dim > 1 else np.zeros((1, 1))
        pb = _random_psd_increment(rng, dim, 1.0) if dim > 1 else np.zeros((1, 1))
        iterates = regularized_iterates(f, pa, pb)
        decrease = max(spd_core.loewner_gap(later, earlier) for earlier, later in zip(iterates, iterates[1:]))
        checks.append(("continuity", None, decrease))
        return _TrialResult(i, dim, tuple(checks), {"equality_gap": _relative_frobenius(rhs, lhs)})

    return trial


AXIOM_CHECKS = (
    "monotonicity",
    "transformer-invertible",
    "transformer-equality",
    "transformer-singular",
    "normalization",
    "continuity",
)


def verify_axioms(f: RepresentingFunction, cfg: TrialConfig = TrialConfig(), workers: int = 1) -> TrialReport:
    """Monotonicity, the transformer inequality (equality for invertible ``X``),
    normalization and an epsilon-schedule continuity proxy on random inputs.

    All excesses are reported on the ``loewner_tol`` scale: the equality
    check is violated when the relative Frobenius gap exceeds 1e-8 and the
    normalization check when ``max |sigma(I, I) - I|`` exceeds 1e-10.
    """
    start = time.perf_counter()
    results = _run(_axiom_trial(f, cfg), cfg, workers)
    violations, worst_excess, worst, first = _aggregate(results, cfg.loewner_tol)
    per_check = {}
    for name in AXIOM_CHECKS:
        excesses = [e for res in results for check, _, e in res.checks if check == name]
        per_check[name] = {
            "violations": int(sum(e > cfg.loewner_tol for e in excesses)),
            "worst_excess": float(max(excesses)),
        }
    details = {"checks": per_check}
    return TrialReport(
        f.label, "axioms", "certification", cfg, cfg.trials, violations, worst_excess, worst, first,
        time.perf_counter() - start, details,
    )


# -- scalar scan -------------------------------------------------------------


def scalar_scan(f: RepresentingFunction, r_list: Iterable[float] = (1.5, 2.0, 5.0), grid=None) -> list[tuple[float, float, float]]:
    """Rows ``(x, r, f(x)**r - f(x**r))``; nonpositive everywhere for PMI."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    fx = f.checked(grid)
    rows = []
    for r in r_list:
        if not r >= 1:
            raise ValueError(f"r must be >= 1, got {r}")
        gaps = fx**r - f.checked(grid**r)
        rows.extend((float(x), float(r), float(g)) for x, g in zip(grid, gaps))
    return rows


def write_scan_csv(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("x", "r", "gap"))
    for x, r, gap in rows:
        writer.writerow((repr(x), repr(r), repr(gap)))
