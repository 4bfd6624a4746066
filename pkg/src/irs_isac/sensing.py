"""Echo simulation and least-squares recovery of the target response.

The BS sees ``Y = G^T Phi^T H Phi G X + noise`` where ``H`` (N x N) is the
IRS-target-IRS response. With ``A = G^T Phi^T`` and ``C = Phi G X`` the model
is linear in ``H``, and the least-squares estimate

    H_hat = (A^H A)^-1 A^H Y C^H (C C^H)^-1

is unbiased with mean squared error equal to the CRB evaluated at the sample
covariance ``X X^H / T``.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError, check_count
from .channels import crandn, stream
from .linalg import hermitize, herm_eig, solve_psd
from .system import ReflectCoeffs, TransmitDesign, crb

# stream ids, kept apart from the channel links
_SIGNAL_STREAM = 201
_NOISE_STREAM = 202
_TARGET_STREAM = 203
RANK_TOL = 1e-10


@dataclass
class TargetResponse:
    H: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        if self.H.ndim != 2 or self.H.shape[0] != self.H.shape[1]:
            raise ValidationError(f"target response must be square, got {self.H.shape}")
        if not np.all(np.isfinite(self.H)):
            raise ValidationError("target response has non-finite entries")
        if self.symmetric:
            self.H = 0.5 * (self.H + self.H.T)


@dataclass
class EchoBatch:
    X: np.ndarray  # M x T transmitted samples
    Y: np.ndarray  # M x T received samples
    noise_r: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape != self.Y.shape:
            raise ValidationError(f"X{self.X.shape} and Y{self.Y.shape} differ")

    @property
    def T(self):
        return self.X.shape[1]

    def sample_cov(self):
        return self.X @ self.X.conj().T / self.T


def random_target(N, seed, n_scatterers=3, symmetric=False):
    """Extended target as a sum of random rank-one scatterer responses."""
    rng = stream(seed, _TARGET_STREAM, 0)
    a = crandn(rng, (n_scatterers, N))
    b = a if symmetric else crandn(rng, (n_scatterers, N))
    gains = crandn(rng, n_scatterers)
    H = np.einsum("s,si,sj->ij", gains, a, b)
    return TargetResponse(H, symmetric)


def _covariance_factor(R0):
    # Cholesky when R0 is PD, otherwise a square root from the eigendecomposition
    try:
        return np.linalg.cholesky(R0)
    except np.linalg.LinAlgError:
        w, V = herm_eig(hermitize(R0))
        return V * np.sqrt(np.clip(w, 0.0, None))


def transmit_samples(design, T, rng):
    """``X = W S + L Z`` with unit-variance symbols ``S`` and ``L L^H = R0``."""
    T = check_count(T, "T")
    s = crandn(rng, (design.K, T))
    z = crandn(rng, (design.M, T))
    return design.w.T @ s + _covariance_factor(design.R0) @ z


def echo_operator(ch, v):
    """``G^T Phi^T`` (M x N) and ``Phi G`` (N x M)."""
    v = v.v if isinstance(v, ReflectCoeffs) else np.asarray(v, dtype=complex)
    PG = v[:, None] * ch.G
    return PG.T, PG


def _noise_power(ch, noise_r):
    if noise_r is None:
        return ch.noise_r
    if not noise_r >= 0:
        raise ValidationError(f"noise_r must be >= 0, got {noise_r!r}")
    return float(noise_r)


def simulate_echo(ch, v, design, H, T, seed, trial=0, X=None, noise_r=None):
    """One batch of echoes.

    ``X`` reuses fixed transmit samples; ``noise_r`` overrides the channel's
    receiver noise power (zero gives noiseless echoes).
    """
    H = H.H if isinstance(H, TargetResponse) else np.asarray(H, dtype=complex)
    noise_r = _noise_power(ch, noise_r)
    if X is None:
        X = transmit_samples(design, T, stream(seed, _SIGNAL_STREAM, trial))
    A, PG = echo_operator(ch, v)
    Y = A @ H @ PG @ X
    if noise_r > 0:
        Y = Y + np.sqrt(noise_r) * crandn(stream(seed, _NOISE_STREAM, trial), Y.shape)
    return EchoBatch(X, Y, noise_r, {"seed": seed, "trial": trial})


def _check_rank(mat, what, rank):
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size < rank:
        raise ValidationError(f"{what} is rank deficient (shape {mat.shape}, need rank {rank})")
    if s[-1] <= RANK_TOL * s[0]:
        raise ValidationError(f"{what} is rank deficient (smallest/largest singular value "
                              f"{(s[-1] / s[0]) if s.size and s[0] > 0 else 0.0:.2e})")


def ls_estimate(batch, ch, v):
    """Least-squares target response from one echo batch via the normal equations."""
    A, PG = echo_operator(ch, v)
    C = PG @ batch.X
    _check_rank(A, "A = G^T Phi^T", A.shape[1])
    _check_rank(C, "C = Phi G X", C.shape[0])
    AhA = A.conj().T @ A
    CCh = C @ C.conj().T
    left = solve_psd(AhA, A.conj().T @ batch.Y)
    # right division by C C^H through its (Hermitian) transpose system
    H = solve_psd(CCh, (left @ C.conj().T).conj().T).conj().T
    return TargetResponse(H)


@dataclass
class MseReport:
    mse: float
    per_trial: np.ndarray
    crb: float  # at the realized sample covariance
    mean_error: np.ndarray

    @property
    def ratio(self):
        return self.mse / self.crb if self.crb > 0 else float("nan")


def empirical_mse(ch, v, design, H, T, n_trials, seed, fixed_samples=True, noise_r=None):
    """Mean ``||H_hat - H||_F^2`` over noise draws, with the matching CRB.

    With ``fixed_samples`` the transmit block is drawn once and only the
    noise changes between trials, so the CRB at the sample covariance is the
    exact expected error.
    """
    n_trials = check_count(n_trials, "n_trials")
    noise_r = _noise_power(ch, noise_r)
    if n_trials < 100:
        raise ValidationError(f"n_trials must be >= 100, got {n_trials}")
    H = H.H if isinstance(H, TargetResponse) else np.asarray(H, dtype=complex)
    X = transmit_samples(design, T, stream(seed, _SIGNAL_STREAM, 0)) if fixed_samples else None
    errs = np.empty(n_trials)
    mean_err = np.zeros_like(H)
    cov = np.zeros((ch.M, ch.M), dtype=complex)
    for t in range(n_trials):
        batch = simulate_echo(ch, v, design, H, T, seed, trial=t, X=X, noise_r=noise_r)
        E = ls_estimate(batch, ch, v).H - H
        errs[t] = np.sum(np.abs(E) ** 2)
        mean_err += E
        cov += batch.sample_cov()
    cov /= n_trials
    bound = crb(ch.G, cov, noise_r, T) if noise_r > 0 else 0.0
    return MseReport(float(errs.mean()), errs, bound, mean_err / n_trials)
