import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmeans import spd_core
from opmeans.spd_core import (
    DimensionMismatchError,
    FunctionEvaluationError,
    MatrixError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)


def test_eigh_diagonal():
    dec = spd_core.eigh(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(dec.eigenvalues, [1.0, 2.0, 3.0])


def test_eigh_two_by_two():
    dec = spd_core.eigh([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(dec.eigenvalues, [1.0, 3.0], rtol=0, atol=1e-15)


def test_eigh_one_by_one():
    dec = spd_core.eigh([[5.0]])
    assert dec.eigenvalues.tolist() == [5.0]
    assert dec.basis.tolist() == [[1.0]]


def test_eigh_matches_lapack_on_64():
    a = spd_core.random_spd(64, seed=11)
    dec = spd_core.eigh(a)
    ref = np.linalg.eigvalsh(a)
    assert np.max(np.abs(dec.eigenvalues - ref)) < 1e-13 * ref[-1]
    assert np.max(np.abs(dec.reconstruct() - a)) < 1e-10 * np.max(np.abs(a))


def test_eigh_wide_spectrum_matches_lapack():
    q = spd_core.random_orthogonal(np.random.default_rng(4), 5)
    a = spd_core.from_eig(np.array([1e-9, 1e-5, 1.0, 1e3, 1e8]), q)
    err = spd_core.eigh(a).eigenvalues - np.linalg.eigvalsh(a)
    assert np.max(np.abs(err)) < 1e-15 * 1e8


def test_asymmetry_reports_pair():
    with pytest.raises(NotSymmetricError) as info:
        spd_core.as_symmetric([[1.0, 2.0], [2.5, 1.0]])
    assert set(info.value.pair) == {0, 1}


def test_rejects_non_square_and_oversized():
    with pytest.raises(MatrixError):
        spd_core.as_symmetric(np.ones((2, 3)))
    with pytest.raises(MatrixError):
        spd_core.as_symmetric(np.eye(65))
    with pytest.raises(MatrixError):
        spd_core.as_symmetric([[np.nan]])


def test_as_spd_rejects_semidefinite():
    with pytest.raises(NotPositiveDefiniteError):
        spd_core.as_spd(np.diag([1.0, 0.0]))
    with pytest.raises(NotPositiveDefiniteError):
        spd_core.as_spd(np.diag([1.0, 1e-13]))
    spd_core.as_spd(np.diag([1.0, 1e-10]))


def test_results_are_read_only():
    a = spd_core.as_spd(np.eye(2))
    with pytest.raises(ValueError):
        a[0, 0] = 2.0
    assert not spd_core.power(np.diag([1.0, 4.0]), 0.5).flags.writeable


def test_power_examples():
    np.testing.assert_allclose(spd_core.power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]), atol=1e-15)
    a = spd_core.random_spd(4, seed=2)
    np.testing.assert_array_equal(spd_core.power(a, 0), np.eye(4))
    np.testing.assert_array_equal(spd_core.power(a, 1), a)
    with pytest.raises(ValueError):
        spd_core.power(a, -1)


def test_apply_function_reports_bad_eigenvalue():
    with pytest.raises(FunctionEvaluationError) as info:
        spd_core.apply_function(np.diag([2.0, -1.0]), np.sqrt)
    assert info.value.eigenvalue == -1.0


def test_loewner_examples():
    assert spd_core.loewner_leq(np.eye(2), 2 * np.eye(2))
    assert not spd_core.loewner_leq(np.diag([1.0, 3.0]), np.diag([2.0, 2.0]))
    assert spd_core.loewner_leq(np.eye(2), np.eye(2) - 1e-11 * np.eye(2))
    with pytest.raises(DimensionMismatchError):
        spd_core.loewner_leq(np.eye(2), np.eye(3))


def test_random_spd_is_reproducible_and_in_range():
    a = spd_core.random_spd(5, (-2.0, 2.0), seed=7)
    np.testing.assert_array_equal(a, spd_core.random_spd(5, (-2.0, 2.0), seed=7))
    evals = np.linalg.eigvalsh(a)
    assert evals.min() >= 10**-2 * (1 - 1e-12) and evals.max() <= 10**2 * (1 + 1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(spd_core.random_spd(3, (0.5, 0.5), seed=1)), [10**0.5] * 3)


def test_matrix_json_round_trip(tmp_path):
    a = spd_core.random_spd(3, seed=5)
    path = tmp_path / "a.json"
    path.write_text(json.dumps(spd_core.matrix_to_json(a)))
    np.testing.assert_array_equal(spd_core.load_matrix(path), a)
    with pytest.raises(MatrixError):
        spd_core.matrix_from_json({"dim": 2, "data": [1, 2, 3]})


seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=8)


@settings(max_examples=60, deadline=None)
@given(dims, seeds)
def test_eigendecomposition_is_orthogonal_and_reconstructs(dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim))
    h = (g + g.T) / 2
    dec = spd_core.eigh(h)
    scale = 1.0 + np.linalg.norm(h)
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    assert np.max(np.abs(dec.basis.T @ dec.basis - np.eye(dim))) < 1e-12
    assert np.max(np.abs(dec.reconstruct() - h)) < 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(dims, seeds, st.floats(min_value=0.1, max_value=3.0))
def test_power_composes(dim, seed, r):
    a = spd_core.random_spd(dim, (-1.0, 1.0), seed)
    lhs = spd_core.power(spd_core.power(a, r), 1 / r)
    assert np.max(np.abs(lhs - a)) < 1e-10 * np.max(np.abs(a))


@settings(max_examples=40, deadline=None)
@given(dims, seeds)
def test_congruence_preserves_loewner_order(dim, seed):
    rng = np.random.default_rng(seed)
    a = spd_core.random_spd(dim, (-1.0, 1.0), rng)
    g = rng.standard_normal((dim, dim))
    b = a + g @ g.T
    x = rng.standard_normal((dim, dim))
    assert spd_core.loewner_leq(spd_core.congruence(x, a), spd_core.congruence(x, b))
