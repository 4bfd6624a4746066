import numpy as np
import pytest

from irs_isac.linalg import (NearSingular, NotPositiveDefinite, cholesky, from_interleaved, herm_eig, hermitize,
                             is_hermitian, psd_sqrt, solve_psd, to_interleaved, trace_inv)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


def random_pd(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n)


def test_herm_eig_identity():
    w, v = herm_eig(np.eye(3))
    np.testing.assert_allclose(w, [1, 1, 1])


def test_herm_eig_diagonal_sorted():
    w, v = herm_eig(np.diag([2.0, -1.0]))
    np.testing.assert_allclose(w, [-1, 2])
    np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]])


def test_herm_eig_reconstructs():
    rng = np.random.default_rng(0)
    A = random_hermitian(rng, 5)
    w, v = herm_eig(A)
    assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - A) < 1e-10 * np.linalg.norm(A)
    assert np.linalg.norm(v.conj().T @ v - np.eye(5)) < 1e-10
    assert np.all(np.diff(w) >= 0)


def test_hermitize_real_diagonal():
    a = np.array([[1 + 1e-14j, 2], [2 + 1j, 3]])
    h = hermitize(a)
    assert np.all(h.diagonal().imag == 0)
    assert is_hermitian(h)


def test_solve_psd_cases():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    np.testing.assert_allclose(solve_psd(np.eye(3), B), B)
    np.testing.assert_allclose(solve_psd(2 * np.eye(3), np.eye(3)), 0.5 * np.eye(3))
    A = random_pd(rng, 6)
    B = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    X = solve_psd(A, B)
    assert np.linalg.norm(A @ X - B) < 1e-10 * np.linalg.norm(B)


def test_cholesky_reports_pivot():
    A = np.diag([1.0, 2.0, -1.0, 4.0])
    with pytest.raises(NotPositiveDefinite) as err:
        cholesky(A)
    assert err.value.pivot == 2


def test_trace_inv_values():
    assert trace_inv(np.eye(4)) == pytest.approx(4.0)
    assert trace_inv(np.diag([1.0, 2.0, 4.0])) == pytest.approx(1.75)
    rng = np.random.default_rng(2)
    A = random_pd(rng, 5)
    assert trace_inv(A) == pytest.approx(np.trace(np.linalg.inv(A)).real, rel=1e-12)


def test_trace_inv_near_singular():
    with pytest.raises(NearSingular):
        trace_inv(np.diag([1.0, 1e-13]))


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(3)
    A = random_pd(rng, 4)
    S = psd_sqrt(A)
    np.testing.assert_allclose(S @ S, A, atol=1e-10)


def test_interleaved_round_trip():
    a = np.array([[1 + 2j, -3.5j], [0.25, 7 - 1j]])
    data = to_interleaved(a)
    assert data[0][0] == [1.0, 2.0]
    np.testing.assert_array_equal(from_interleaved(data), a)
