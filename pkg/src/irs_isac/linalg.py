"""Dense complex matrix kernels shared by the rest of the package.

Matrices are plain numpy arrays. Hermitian inputs are symmetrized before use
so round-off asymmetry never leaks into eigen-decompositions.
"""
import numpy as np
from scipy.linalg import lapack, solve_triangular

# relative to the largest eigenvalue
PD_TOL = 1e-12


class NumericalFailure(ArithmeticError):
    """A kernel did not converge or produced non-finite output."""


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing leading minor.
    """

    def __init__(self, pivot, msg=None):
        self.pivot = pivot
        super().__init__(msg or f"matrix is not positive definite (pivot {pivot})")


class NearSingular(np.linalg.LinAlgError):
    """Smallest eigenvalue below the relative PD tolerance."""


def hermitize(a):
    """Return (A + A^H)/2 with an exactly real diagonal."""
    a = np.asarray(a)
    h = 0.5 * (a + a.conj().T)
    if np.iscomplexobj(h):
        idx = np.diag_indices(h.shape[0])
        h[idx] = h[idx].real
    return h


def is_hermitian(a, rtol=1e-12):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= rtol * scale)


def herm_eig(a):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(w, v)`` with ``w`` ascending and ``v`` unitary so that
    ``a == v @ diag(w) @ v^H``.
    """
    h = hermitize(a)
    if not np.all(np.isfinite(h)):
        raise NumericalFailure("non-finite entries in eigen-decomposition input")
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return w, v


def cholesky(a):
    """Lower Cholesky factor, raising :class:`NotPositiveDefinite` with the pivot."""
    h = hermitize(a)
    potrf = lapack.zpotrf if np.iscomplexobj(h) else lapack.dpotrf
    c, info = potrf(h, lower=True, clean=True)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise NumericalFailure(f"potrf illegal argument {-info}")
    return c


def solve_psd(a, b):
    """Solve ``a @ x = b`` for positive definite ``a``."""
    b = np.asarray(b)
    c = cholesky(a)
    y = solve_triangular(c, b, lower=True)
    return solve_triangular(c.conj().T, y, lower=False)


def trace_inv(a, tol=PD_TOL):
    """tr(A^{-1}) for a positive definite Hermitian matrix."""
    w, _ = herm_eig(a)
    if w[-1] <= 0 or w[0] <= tol * w[-1]:
        raise NearSingular(
            f"min eigenvalue {w[0]:.3e} below tolerance of max {w[-1]:.3e}")
    return float(np.sum(1.0 / w))


def psd_sqrt(a):
    """Hermitian square root of a PSD matrix (negative eigenvalues clipped)."""
    w, v = herm_eig(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def to_interleaved(a):
    """Row-major interleaved (re, im) storage used by JSON fixtures."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def from_interleaved(data):
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
