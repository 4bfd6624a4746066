"""Seeded channel realizations for the BS / IRS / CU layout.

Large-scale gain follows ``L(d) = K0 * (d / 1 m) ** -alpha``. BS-IRS and BS-CU
links are Rician, IRS-CU links Rayleigh, and BS-CU links carry an extra
log-normal shadowing term. Line-of-sight parts use half-wavelength uniform
linear arrays laid along the x axis at both the BS and the IRS.

Randomness comes from numpy's counter-based Philox generator keyed through
``SeedSequence(seed, spawn_key=(trial, link, index, attempt))``, so each
(trial, link) pair owns an independent sub-stream and a trial's draw never
depends on how many trials run.
"""
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError, check_count, check_positive, dbm_to_watts
from .linalg import from_interleaved, to_interleaved

# sub-stream link ids
LINK_BS_IRS = 0
LINK_BS_CU = 1
LINK_IRS_CU = 2
LINK_SHADOW = 3
MAX_RANK_ATTEMPTS = 10


@dataclass(frozen=True)
class Geometry:
    bs_pos: tuple = (0.0, 0.0)
    irs_pos: tuple = (4.0, 2.0)
    cu_pos: tuple = ((50.0, 0.0), (45.0, -2.0), (55.0, -2.0))

    def __post_init__(self):
        object.__setattr__(self, "bs_pos", tuple(map(float, self.bs_pos)))
        object.__setattr__(self, "irs_pos", tuple(map(float, self.irs_pos)))
        object.__setattr__(self, "cu_pos", tuple(tuple(map(float, p)) for p in self.cu_pos))
        pts = [self.bs_pos, self.irs_pos, *self.cu_pos]
        for p in pts:
            if len(p) != 2:
                raise ValidationError(f"positions must be 2-D, got {p}")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]) <= 0:
                    raise ValidationError(f"nodes {i} and {j} coincide")

    def take(self, K):
        if K > len(self.cu_pos):
            raise ValidationError(f"geometry has {len(self.cu_pos)} CU positions, K={K} requested")
        return Geometry(self.bs_pos, self.irs_pos, self.cu_pos[:K])


@dataclass(frozen=True)
class PropagationParams:
    k0_db: float = -30.0
    alpha_bs_irs: float = 2.2
    alpha_irs_cu: float = 2.2
    alpha_bs_cu: float = 3.5
    rician_bs_irs: float = 0.5
    rician_bs_cu: float = 0.5
    shadow_std_db: float = 10.0

    def __post_init__(self):
        for name in ("alpha_bs_irs", "alpha_irs_cu", "alpha_bs_cu"):
            check_positive(getattr(self, name), name)
        for name in ("rician_bs_irs", "rician_bs_cu", "shadow_std_db"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValidationError(f"{name} must be >= 0, got {v!r}")


@dataclass
class ChannelSet:
    """One channel realization.

    ``G`` is N x M (BS to IRS), ``h_d`` is K x M and ``h_r`` is K x N, one row
    per CU, following the convention that CU k receives ``h_d[k]^H x``.
    Noise powers are in watts.
    """

    G: np.ndarray
    h_d: np.ndarray
    h_r: np.ndarray
    noise_k: np.ndarray
    noise_r: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=complex)
        self.h_d = np.atleast_2d(np.asarray(self.h_d, dtype=complex))
        self.h_r = np.atleast_2d(np.asarray(self.h_r, dtype=complex))
        self.noise_k = np.broadcast_to(np.asarray(self.noise_k, dtype=float), (self.h_d.shape[0],)).copy()
        self.noise_r = float(self.noise_r)
        N, M = self.G.shape
        if self.h_d.shape[1] != M or self.h_r.shape[1] != N or self.h_r.shape[0] != self.h_d.shape[0]:
            raise ValidationError(
                f"inconsistent channel shapes G{self.G.shape} h_d{self.h_d.shape} h_r{self.h_r.shape}")
        if np.any(self.noise_k <= 0) or not self.noise_r > 0:
            raise ValidationError("noise powers must be > 0")
        for name in ("G", "h_d", "h_r"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} has non-finite entries")

    @property
    def M(self):
        return self.G.shape[1]

    @property
    def N(self):
        return self.G.shape[0]

    @property
    def K(self):
        return self.h_d.shape[0]

    def full_rank(self):
        return np.linalg.matrix_rank(self.G) == self.N

    def digest(self):
        h = hashlib.sha256()
        for a in (self.G, self.h_d, self.h_r, self.noise_k, np.array([self.noise_r])):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def subset(self, users):
        users = list(users)
        return ChannelSet(self.G, self.h_d[users], self.h_r[users], self.noise_k[users], self.noise_r, dict(self.meta))

    def to_json(self):
        return {
            "G": to_interleaved(self.G),
            "h_d": to_interleaved(self.h_d),
            "h_r": to_interleaved(self.h_r),
            "noise_k": self.noise_k.tolist(),
            "noise_r": self.noise_r,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            from_interleaved(doc["G"]),
            from_interleaved(doc["h_d"]),
            from_interleaved(doc["h_r"]),
            doc["noise_k"],
            doc["noise_r"],
        )

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def path_loss(d, alpha, k0_db=-30.0):
    """Linear power gain ``10**(k0_db/10) * d**-alpha`` with d0 = 1 m."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValidationError(f"distance must be > 0, got {d}")
    out = 10.0 ** (k0_db / 10.0) * d ** (-float(alpha))
    return float(out) if out.ndim == 0 else out


def ula_steering(n, angle):
    """Half-wavelength ULA along x: element i has phase pi * i * cos(angle)."""
    return np.exp(1j * np.pi * np.arange(n) * np.cos(angle))


def _angle(src, dst):
    return np.arctan2(dst[1] - src[1], dst[0] - src[0])


def _dist(a, b):
    return float(np.hypot(b[0] - a[0], b[1] - a[1]))


def stream(seed, *key):
    """Independent Philox generator for one (trial, link, ...) sub-stream."""
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def crandn(rng, shape):
    """Standard circular complex normal samples, E|z|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(los, nlos, kappa, gain, parts):
    if np.isinf(kappa):
        a, b = 1.0, 0.0
    else:
        a, b = np.sqrt(kappa / (1.0 + kappa)), np.sqrt(1.0 / (1.0 + kappa))
    out = np.zeros_like(los)
    if "los" in parts:
        out = out + a * los
    if "nlos" in parts:
        out = out + b * nlos
    return np.sqrt(gain) * out


def gen_channels(geom, params, M, N, K, seed, trial=0, sigma_k_dbm=-80.0, sigma_r_dbm=-110.0,
                 parts=("los", "nlos"), shadowing=True):
    """Draw one :class:`ChannelSet` for ``trial`` under ``seed``.

    ``parts`` selects the Rician components (used to check the LoS/diffuse
    power split). Raises ``ValidationError`` if ``G`` stays rank deficient
    after ``MAX_RANK_ATTEMPTS`` redraws.
    """
    M, N, K = check_count(M, "M"), check_count(N, "N"), check_count(K, "K")
    geom = geom.take(K)
    bs, irs = geom.bs_pos, geom.irs_pos

    for attempt in range(MAX_RANK_ATTEMPTS):
        rng = stream(seed, trial, LINK_BS_IRS, 0, attempt)
        g_los = np.outer(ula_steering(N, _angle(irs, bs)), ula_steering(M, _angle(bs, irs)).conj())
        G = _rician(g_los, crandn(rng, (N, M)), params.rician_bs_irs,
                    path_loss(_dist(bs, irs), params.alpha_bs_irs, params.k0_db), parts)
        if np.linalg.matrix_rank(G) == min(N, M) and N <= M:
            break
        if N > M:
            raise ValidationError(f"N={N} > M={M}: G cannot have rank N")
    else:
        raise ValidationError("BS-IRS channel rank deficient after repeated draws")

    h_d = np.zeros((K, M), dtype=complex)
    h_r = np.zeros((K, N), dtype=complex)
    for k, cu in enumerate(geom.cu_pos):
        rng = stream(seed, trial, LINK_BS_CU, k)
        los = ula_steering(M, _angle(bs, cu))
        h = _rician(los, crandn(rng, M), params.rician_bs_cu,
                    path_loss(_dist(bs, cu), params.alpha_bs_cu, params.k0_db), parts)
        if shadowing and params.shadow_std_db > 0:
            srng = stream(seed, trial, LINK_SHADOW, k)
            h = h * 10.0 ** (params.shadow_std_db * srng.standard_normal() / 20.0)
        h_d[k] = h
        rng = stream(seed, trial, LINK_IRS_CU, k)
        h_r[k] = np.sqrt(path_loss(_dist(irs, cu), params.alpha_irs_cu, params.k0_db)) * crandn(rng, N)

    noise_k = np.full(K, float(dbm_to_watts(sigma_k_dbm)))
    return ChannelSet(G, h_d, h_r, noise_k, float(dbm_to_watts(sigma_r_dbm)),
                      meta={"seed": int(seed), "trial": int(trial)})
