"""System-level metrics: combined channels, SINRs, transmit power and the CRB.

Notation follows the usual downlink convention: CU k receives
``h_k^H x + n_k`` with the combined channel ``h_k = h_d,k + G^H Phi^H h_r,k``
and ``Phi = diag(v)``.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import ValidationError, check_count, check_positive, check_receiver_type, db_to_linear
from .linalg import NearSingular, hermitize, herm_eig, trace_inv


@dataclass
class TransmitDesign:
    """Information beamformers ``w`` (K x M, one row per CU) and sensing covariance ``R0``."""

    w: np.ndarray
    R0: np.ndarray

    def __post_init__(self):
        self.w = np.atleast_2d(np.asarray(self.w, dtype=complex))
        self.R0 = hermitize(np.asarray(self.R0, dtype=complex))
        M = self.w.shape[1]
        if self.R0.shape != (M, M):
            raise ValidationError(f"R0 has shape {self.R0.shape}, expected {(M, M)}")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.R0))):
            raise ValidationError("design has non-finite entries")

    @property
    def K(self):
        return self.w.shape[0]

    @property
    def M(self):
        return self.w.shape[1]

    @property
    def Rx(self):
        """Transmit covariance ``sum_k w_k w_k^H + R0``."""
        return hermitize(self.w.T @ self.w.conj() + self.R0)

    def min_r0_eig(self):
        return herm_eig(self.R0)[0][0]

    @classmethod
    def zeros(cls, K, M):
        return cls(np.zeros((K, M), dtype=complex), np.zeros((M, M), dtype=complex))


class ReflectCoeffs:
    """Unit-modulus IRS reflection vector, stored as phases."""

    __slots__ = ("phases",)

    def __init__(self, phases):
        self.phases = np.mod(np.asarray(phases, dtype=float).ravel(), 2 * np.pi)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=complex).ravel()
        if np.any(v == 0):
            raise ValidationError("reflection coefficients must be nonzero")
        return cls(np.angle(v))

    @classmethod
    def random(cls, N, rng):
        # uniform on (0, 2pi]
        return cls(2 * np.pi * (1.0 - rng.random(N)))

    @property
    def v(self):
        return np.exp(1j * self.phases)

    @property
    def N(self):
        return self.phases.size

    def phi(self):
        return np.diag(self.v)

    def __repr__(self):
        return f"ReflectCoeffs(N={self.N})"


@dataclass
class SystemParams:
    P0: float
    gamma: np.ndarray
    T: int = 256

    def __post_init__(self):
        self.P0 = check_positive(float(self.P0), "P0")
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if np.any(~(self.gamma > 0)) or not np.all(np.isfinite(self.gamma)):
            raise ValidationError(f"SINR thresholds must be finite and > 0, got {self.gamma}")
        self.T = check_count(self.T, "T")

    @classmethod
    def from_db(cls, power_dbm, gamma_db, K, T=256):
        gamma = np.broadcast_to(db_to_linear(gamma_db), (K,)).copy()
        return cls(float(db_to_linear(power_dbm - 30.0)), gamma, T)

    def for_users(self, K):
        g = np.broadcast_to(self.gamma, (K,)) if self.gamma.size == 1 else self.gamma
        if g.size != K:
            raise ValidationError(f"{self.gamma.size} SINR thresholds for K={K} users")
        return g


def combined_channel(ch, v):
    """Rows ``h_k = h_d,k + G^H Phi^H h_r,k`` for every CU."""
    v = v.v if isinstance(v, ReflectCoeffs) else np.asarray(v, dtype=complex)
    if v.shape != (ch.N,):
        raise ValidationError(f"v has shape {v.shape}, expected {(ch.N,)}")
    return ch.h_d + (ch.h_r * v.conj()) @ ch.G.conj()


def sinr(design, h, noise, receiver_type="I"):
    """Per-CU SINR. Type-I counts sensing interference ``h^H R0 h``; Type-II does not."""
    rx = check_receiver_type(receiver_type)
    h = np.atleast_2d(h)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (h.shape[0],))
    gains = np.abs(h.conj() @ design.w.T) ** 2  # gains[k, i] = |h_k^H w_i|^2
    sig = np.diag(gains).copy()
    interf = gains.sum(axis=1) - sig
    if rx == "I":
        interf = interf + np.real(np.einsum("km,mn,kn->k", h.conj(), design.R0, h))
    return sig / (interf + noise)


def total_power(design):
    return float(np.sum(np.abs(design.w) ** 2) + np.real(np.trace(design.R0)))


def crb(G, Rx, noise_r, T):
    """CRB on the target response: ``noise_r/T * tr((G Rx G^H)^-1) * tr((G G^H)^-1)``."""
    G = np.asarray(G)
    # G G^H first: a rank-deficient G is the root cause when both fail
    try:
        b = trace_inv(G @ G.conj().T)
    except NearSingular as exc:
        raise NearSingular(f"G G^H is near singular: {exc}") from exc
    try:
        a = trace_inv(G @ Rx @ G.conj().T)
    except NearSingular as exc:
        raise NearSingular(f"G Rx G^H is near singular: {exc}") from exc
    return float(noise_r) / T * a * b


def crb_of(ch, design, T):
    return crb(ch.G, design.Rx, ch.noise_r, T)


def _lift_rows(ch, k):
    """Rows of ``B_k`` such that ``h_k(v)^H == [v; 1]^T B_k``."""
    return np.vstack([ch.h_r[k].conj()[:, None] * ch.G, ch.h_d[k].conj()[None, :]])


def reflect_quadratics(ch, design):
    """Lifted forms for the reflective SDR.

    Returns ``Q`` (K x K x (N+1) x (N+1)) and ``Q0`` (K x (N+1) x (N+1)) with,
    for ``u = [v; 1]`` and any unit-modulus ``v``::

        u^H Q[k, i] u == |h_k^H w_i|^2        u^H Q0[k] u == h_k^H R0 h_k
    """
    K, N = ch.K, ch.N
    Q = np.zeros((K, K, N + 1, N + 1), dtype=complex)
    Q0 = np.zeros((K, N + 1, N + 1), dtype=complex)
    for k in range(K):
        B = _lift_rows(ch, k)
        # h_k^H w = u^T B w, so |.|^2 = u^H conj(B w) (B w)^T u
        for i in range(K):
            a = (B @ design.w[i]).conj()
            Q[k, i] = np.outer(a, a.conj())
        Q0[k] = hermitize((B @ design.R0 @ B.conj().T).conj())
    return Q, Q0


def sinr_slack(design, h, noise, gamma, receiver_type="I"):
    """Normalized constraint slack ``(|h^H w_k|^2/Gamma_k - interference - noise) / noise``."""
    rx = check_receiver_type(receiver_type)
    h = np.atleast_2d(h)
    gains = np.abs(h.conj() @ design.w.T) ** 2
    sig = np.diag(gains)
    interf = gains.sum(axis=1) - sig
    if rx == "I":
        interf = interf + np.real(np.einsum("km,mn,kn->k", h.conj(), design.R0, h))
    return (sig / gamma - interf - noise) / noise
