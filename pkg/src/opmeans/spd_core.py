"""Real symmetric linear algebra on small dense matrices.

Matrices are plain read-only ``numpy.ndarray`` objects.  ``as_symmetric`` and
``as_spd`` validate and freeze their input; every other routine here assumes
validated input and returns fresh frozen arrays.

The eigensolver is a cyclic Jacobi iteration, which is slow for large
matrices but deterministic and yields orthogonal eigenvectors to working
precision.  Dimensions are capped at 64.
"""

from __future__ import annotations

import json
import math
from typing import Callable, NamedTuple

import numpy as np

MAX_DIM = 64
SYMMETRY_RTOL = 1e-12
SPD_RTOL = 1e-12
LOEWNER_TOL = 1e-9
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


class MatrixError(ValueError):
    """Input matrix violates a structural requirement."""


class NotSymmetricError(MatrixError):
    def __init__(self, i: int, j: int, a_ij: float, a_ji: float):
        self.pair = (i, j)
        super().__init__(
            f"matrix is not symmetric: entry ({i},{j})={a_ij!r} "
            f"but ({j},{i})={a_ji!r}"
        )


class NotPositiveDefiniteError(MatrixError):
    pass


class DimensionMismatchError(MatrixError):
    pass


class FunctionEvaluationError(ArithmeticError):
    """A scalar function produced a non-finite value on the spectrum."""

    def __init__(self, eigenvalue: float, value: float):
        self.eigenvalue = eigenvalue
        super().__init__(f"function is not finite at eigenvalue {eigenvalue!r} (got {value!r})")


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    basis: np.ndarray  # columns are eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _square(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise MatrixError(f"expected a non-empty square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise MatrixError(f"dimension {a.shape[0]} exceeds the supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise MatrixError("matrix has non-finite entries")
    return a


def as_symmetric(a) -> np.ndarray:
    """Validate ``a`` as a real symmetric matrix and return a frozen copy."""
    a = _square(a)
    scale = 1.0 + np.max(np.abs(a))
    diff = np.abs(a - a.T)
    if np.any(diff > SYMMETRY_RTOL * scale):
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        raise NotSymmetricError(int(i), int(j), float(a[i, j]), float(a[j, i]))
    return _freeze((a + a.T) / 2)


def as_spd(a) -> np.ndarray:
    """Validate ``a`` as symmetric positive definite and return a frozen copy.

    Rejects when the smallest eigenvalue is at most ``1e-12 * (1 + ||a||_2)``.
    """
    a = as_symmetric(a)
    evals = eigh(a).eigenvalues
    norm = max(abs(evals[0]), abs(evals[-1]))
    if evals[0] <= SPD_RTOL * (1.0 + norm):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: smallest eigenvalue {evals[0]!r}"
        )
    return a


def _jacobi(h: np.ndarray, tol: float, max_sweeps: int, vectors: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    # Scalar loops over nested lists: for the small matrices used here this
    # beats per-rotation numpy slicing by a wide margin.
    n = h.shape[0]
    a = h.tolist()
    v = np.eye(n).tolist() if vectors else []
    target = tol * float(np.linalg.norm(h))
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]

    def off_norm() -> float:
        return math.sqrt(2.0 * sum(a[p][q] * a[p][q] for p, q in pairs))

    for _ in range(max_sweeps):
        loose = off_norm() > target
        rotated = False
        for p, q in pairs:
            row_p, row_q = a[p], a[q]
            apq = row_p[q]
            # Besides the global Frobenius test, every entry must be small
            # next to its diagonal pair; this keeps tiny eigenvalues of
            # graded positive definite matrices accurate to high relative
            # precision.
            if apq == 0.0 or (not loose and abs(apq) <= tol * math.sqrt(abs(row_p[p] * row_q[q]))):
                continue
            rotated = True
            theta = (row_q[q] - row_p[p]) / (2.0 * apq)
            if abs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            row_p[p] -= t * apq
            row_q[q] += t * apq
            row_p[q] = row_q[p] = 0.0
            for k in range(n):
                if k == p or k == q:
                    continue
                row_k = a[k]
                akp, akq = row_k[p], row_k[q]
                row_k[p] = row_p[k] = c * akp - s * akq
                row_k[q] = row_q[k] = s * akp + c * akq
            for vk in v:
                vkp, vkq = vk[p], vk[q]
                vk[p] = c * vkp - s * vkq
                vk[q] = s * vkp + c * vkq
        if not rotated and not loose:
            break
    else:
        off = off_norm()
        if off > target:
            raise np.linalg.LinAlgError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps (off-diagonal {off:.3e})"
            )
    return np.array([a[i][i] for i in range(n)]), (np.array(v) if vectors else None)


def eigh(h, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    h : array_like, shape (n, n)
        Symmetric matrix.  Asymmetry beyond ``1e-12`` relative raises
        :class:`NotSymmetricError` naming the offending entry pair.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm is at most
        ``tol * ||h||_F``.
    max_sweeps : int
        Cap on the number of full sweeps.

    Returns
    -------
    EigenDecomposition
        Eigenvalues in ascending order and the orthogonal eigenvector basis.
    """
    h = as_symmetric(h)
    if h.shape[0] == 1:
        return EigenDecomposition(_freeze(h[0].copy()), _freeze(np.ones((1, 1))))
    evals, basis = _jacobi(np.asarray(h), tol, max_sweeps)
    order = np.argsort(evals, kind="stable")
    return EigenDecomposition(_freeze(evals[order]), _freeze(basis[:, order].copy()))


def eigvalsh(h, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Ascending eigenvalues; same rotations as :func:`eigh` without accumulating vectors."""
    h = as_symmetric(h)
    if h.shape[0] == 1:
        return _freeze(h[0].copy())
    evals, _ = _jacobi(np.asarray(h), tol, max_sweeps, vectors=False)
    return _freeze(np.sort(evals, kind="stable"))


def from_eig(evals: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Assemble ``basis @ diag(evals) @ basis.T`` and symmetrize."""
    m = (basis * evals) @ basis.T
    return _freeze((m + m.T) / 2)


def _checked(phi: Callable, evals: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(phi(evals), dtype=float)
    vals = np.broadcast_to(vals, evals.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise FunctionEvaluationError(float(evals[k]), float(vals[k]))
    return vals


def apply_function(a, phi: Callable, decomposition: EigenDecomposition | None = None) -> np.ndarray:
    """Functional calculus ``phi(a)`` for a symmetric matrix.

    ``phi`` receives the eigenvalue array and must return an array of the same
    shape.  A precomputed ``decomposition`` of ``a`` may be passed to skip
    the eigensolve.
    """
    dec = decomposition if decomposition is not None else eigh(a)
    return from_eig(_checked(phi, dec.eigenvalues), dec.basis)


def power(a, r: float) -> np.ndarray:
    """``a**r`` for a positive definite ``a`` and ``r >= 0``."""
    if r < 0:
        raise ValueError(f"exponent must be nonnegative, got {r}")
    a = as_spd(a)
    if r == 0:
        return _freeze(np.eye(a.shape[0]))
    if r == 1:
        return a
    return apply_function(a, lambda x: x**r)


def identity(n: int) -> np.ndarray:
    return _freeze(np.eye(n))


def spectral_norm(h) -> float:
    evals = eigvalsh(h)
    return float(max(abs(evals[0]), abs(evals[-1])))


def loewner_leq(a, b, tol: float = LOEWNER_TOL) -> bool:
    """Return True iff ``a <= b`` in the Loewner order.

    The test is ``lambda_min(b - a) >= -tol * (1 + ||a||_2 + ||b||_2)``.
    """
    return loewner_gap(a, b) <= tol


def loewner_gap(a, b) -> float:
    """Scaled amount by which ``a <= b`` fails; nonpositive when it holds."""
    a = as_symmetric(a)
    b = as_symmetric(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes differ: {a.shape} vs {b.shape}")
    lam_min = eigvalsh(b - a)[0]
    scale = 1.0 + spectral_norm(a) + spectral_norm(b)
    return float(-lam_min / scale)


def congruence(x, a) -> np.ndarray:
    """``x.T @ a @ x``."""
    x = np.asarray(x, dtype=float)
    a = as_symmetric(a)
    if x.ndim != 2 or x.shape[0] != a.shape[0]:
        raise DimensionMismatchError(f"cannot form X^T A X with X {x.shape} and A {a.shape}")
    m = x.T @ a @ x
    return _freeze((m + m.T) / 2)


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    # Fix column signs so the result depends only on the Gaussian draw.
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def random_spd(dim: int, log_eig_range: tuple[float, float] = (-3.0, 3.0), seed=0) -> np.ndarray:
    """Random SPD matrix with log-uniform spectrum in ``10**lo .. 10**hi``.

    ``seed`` may be an integer or a ``numpy.random.Generator``.  A degenerate
    range ``lo == hi`` is accepted and pins every eigenvalue to ``10**lo``.
    """
    lo, hi = log_eig_range
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"dim must be in [1, {MAX_DIM}], got {dim}")
    if lo > hi:
        raise ValueError(f"invalid log-eigenvalue range ({lo}, {hi})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    evals = 10.0 ** rng.uniform(lo, hi, dim)
    q = random_orthogonal(rng, dim)
    return from_eig(evals, q)


def load_matrix(path) -> np.ndarray:
    """Read ``{"dim": n, "data": [...]}`` and validate symmetry."""
    with open(path) as fh:
        doc = json.load(fh)
    return matrix_from_json(doc)


def matrix_from_json(doc: dict) -> np.ndarray:
    try:
        n = int(doc["dim"])
        data = doc["data"]
    except (KeyError, TypeError) as exc:
        raise MatrixError(f"matrix JSON needs 'dim' and 'data' keys: {exc}") from None
    if n < 1 or len(data) != n * n:
        raise MatrixError(f"'data' must hold dim*dim = {n * n} numbers, got {len(data)}")
    return as_symmetric(np.asarray(data, dtype=float).reshape(n, n))


def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"dim": int(a.shape[0]), "data": [float(v) for v in a.ravel()]}
