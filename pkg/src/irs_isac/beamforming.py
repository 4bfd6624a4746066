"""Joint transmit / reflective beamforming for CRB minimization.

The transmit subproblem is a relaxed SDP in the lifted variables ``W_k`` and
``R0``; its trace-inverse objective is written through the epigraph block
``[[G Rx G^H, I], [I, U]] >= 0`` with ``min tr(U)``. The relaxation is tight
and :func:`rank_one_reconstruct` recovers rank-one beamformers with the same
transmit covariance. The reflective subproblem is a max-slack SDR over
``V = [v; 1][v; 1]^H`` rounded by Gaussian randomization.

All SDPs run on a rescaled copy of the data: noise is one, the power budget
is N, and ``G`` is scaled to unit mean squared singular value. Every quantity is mapped back
exactly before it leaves this module.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import sdp
from ._validation import ValidationError, check_receiver_type
from .channels import stream
from .linalg import herm_eig, hermitize, psd_sqrt
from .system import (ReflectCoeffs, TransmitDesign, combined_channel, crb,
                     reflect_quadratics, sinr_slack)

log = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-14
FEASIBILITY_MARGIN = 1e-6
REDUCED_ACCURACY = 1e-6
RANDOMIZATION_ROUNDS = 64
# stream ids for optimizer randomness
_INIT_STREAM = 101
_RAND_STREAM = 102


class InfeasibleError(RuntimeError):
    """The SINR / power constraints cannot be met under the given phases."""


class SolverError(RuntimeError):
    """The SDP solver failed to certify a solution."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


class DegenerateBeam(ArithmeticError):
    """``h_k^H W_k h_k`` vanished, so no rank-one beam can be extracted."""


@dataclass
class AoConfig:
    max_outer_iters: int = 30
    rel_tol: float = 1e-3
    n_randomizations: int = 256
    max_v_resamples: int = 50
    receiver_type: str = "I"
    stage1_iters: int = 20
    # also start from the power-minimizing phases (and, for type II, from the
    # type-I solution) and keep the best run
    warm_start: bool = True

    def __post_init__(self):
        for name in ("max_outer_iters", "n_randomizations", "max_v_resamples", "stage1_iters"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.warm_start, (bool, np.bool_)):
            raise ValidationError(f"warm_start must be a boolean, got {self.warm_start!r}")
        if not 0 < self.rel_tol < 1:
            raise ValidationError(f"rel_tol must be in (0, 1), got {self.rel_tol!r}")
        self.receiver_type = check_receiver_type(self.receiver_type)


@dataclass
class AoSolution:
    design: TransmitDesign
    v: ReflectCoeffs
    crb_trace: list = field(default_factory=list)
    status: str = "Converged"  # Converged | IterCap | Infeasible
    n_resamples: int = 0

    @property
    def crb(self):
        return self.crb_trace[-1] if self.crb_trace else float("inf")

    @property
    def outer_iters(self):
        return len(self.crb_trace)

    @property
    def feasible(self):
        return self.status != "Infeasible"


@dataclass
class TransmitResult:
    """Transmit-step output plus the relaxed optimum it was built from."""

    design: TransmitDesign
    W_relaxed: np.ndarray  # K x M x M
    R0_relaxed: np.ndarray
    objective: float  # tr((G Rx G^H)^-1) in physical units
    sdp: object = None


# --------------------------------------------------------------------------
# scaling


def _scaled_channels(ch, v, P0):
    h = combined_channel(ch, v)
    return h * np.sqrt(P0 / ch.noise_k)[:, None], h


def _g_scale(G):
    return np.sqrt(np.real(np.trace(G @ G.conj().T)) / G.shape[0])


def _budget(ch, params):
    # a budget of N keeps G Rx G^H and its inverse both O(1), which the solver likes
    budget = float(ch.N)
    return budget, params.P0 / budget


def _hermitian_basis(n):
    """Real-linear basis ``B`` of n x n Hermitian matrices: ``Re tr(B X)`` reads one real coordinate."""
    out = []
    for p in range(n):
        for q in range(p, n):
            if p == q:
                B = np.zeros((n, n), dtype=complex)
                B[p, p] = 1.0
                out.append(((p, q, "d"), B))
            else:
                B = np.zeros((n, n), dtype=complex)
                B[p, q] = B[q, p] = 0.5
                out.append(((p, q, "re"), B))
                B = np.zeros((n, n), dtype=complex)
                B[p, q], B[q, p] = 0.5j, -0.5j
                out.append(((p, q, "im"), B))
    return out


def _add_epigraph(prob, Gn, mixes):
    """Add block ``Z = [[S, I], [I, U]]`` with ``S = Gn (sum of mixes) Gn^H``.

    ``mixes`` is a list of ``(label_or_free_index, base)`` pairs: a block label
    contributes ``Gn X Gn^H``, a free index ``j`` contributes ``x_j * Gn base Gn^H``.
    Sets the objective to ``tr(U)``.
    """
    N = Gn.shape[0]
    prob.add_block("Z", 2 * N)
    GH = Gn.conj().T
    for _, B in _hermitian_basis(N):
        BZ = np.zeros((2 * N, 2 * N), dtype=complex)
        BZ[:N, :N] = B
        coeffs = {"Z": BZ}
        free = {}
        GBG = GH @ B @ Gn
        for key, base in mixes:
            if isinstance(key, str):
                coeffs[key] = -GBG
            else:
                free[key] = -float(np.real(np.trace(GBG @ base)))
        prob.add_constraint(coeffs, 0.0, "=", free)
    for p in range(N):
        for q in range(N):
            B = np.zeros((2 * N, 2 * N), dtype=complex)
            B[p, N + q] = B[N + q, p] = 0.5
            prob.add_constraint({"Z": B}, 1.0 if p == q else 0.0)
            B = np.zeros((2 * N, 2 * N), dtype=complex)
            B[p, N + q], B[N + q, p] = 0.5j, -0.5j
            prob.add_constraint({"Z": B}, 0.0)
    obj = np.zeros((2 * N, 2 * N))
    obj[N:, N:] = np.eye(N)
    return obj


def _solve(prob, what):
    sol, blocks = prob.solve()
    if sol.status is sdp.Status.INFEASIBLE:
        raise InfeasibleError(f"{what}: SDP infeasible")
    if sol.status is sdp.Status.NUMERICAL_FAILURE and max(sol.residuals.values()) <= REDUCED_ACCURACY:
        # badly conditioned instances stall near the floating point floor
        log.info("%s: accepting reduced accuracy solution (residuals %s)", what, sol.residuals)
        return sol, blocks
    if sol.status is not sdp.Status.OPTIMAL:
        raise SolverError(f"{what}: solver returned {sol.status.value} "
                          f"(residuals {sol.residuals})", sol)
    return sol, blocks


# --------------------------------------------------------------------------
# transmit side


def transmit_sdp(hn, Gn, gamma, receiver_type="I", power=1.0):
    """Build the relaxed CRB SDP on pre-scaled data (unit noise, budget ``power``)."""
    rx = check_receiver_type(receiver_type)
    K, M = hn.shape
    prob = sdp.HermitianSdp()
    labels = [prob.add_block(f"W{k}", M) for k in range(K)]
    prob.add_block("R0", M)
    obj = _add_epigraph(prob, Gn, [(lbl, None) for lbl in labels + ["R0"]])
    prob.set_objective({"Z": obj})
    H = [np.outer(h, h.conj()) for h in hn]
    for k in range(K):
        coeffs = {labels[i]: (H[k] / gamma[k] if i == k else -H[k]) for i in range(K)}
        if rx == "I":
            coeffs["R0"] = -H[k]
        prob.add_constraint(coeffs, 1.0, ">=")
    eye = np.eye(M)
    prob.add_constraint({lbl: -eye for lbl in labels + ["R0"]}, -float(power), ">=")
    return prob


def rank_one_reconstruct(W, R0, h):
    """Rank-one beams with unchanged transmit covariance.

    ``w_k = W_k h_k / sqrt(h_k^H W_k h_k)`` and
    ``R0* = R0 + sum_k W_k - sum_k w_k w_k^H``. The beams come out with
    ``h_k^H w_k`` real and positive.
    """
    W = np.asarray(W, dtype=complex)
    h = np.atleast_2d(h)
    K, M = h.shape
    w = np.zeros((K, M), dtype=complex)
    scale = max(1.0, max(np.real(np.trace(Wk)) for Wk in W))
    for k in range(K):
        Wh = W[k] @ h[k]
        q = float(np.real(h[k].conj() @ Wh))
        if q <= DEGENERATE_TOL * scale * np.real(h[k].conj() @ h[k]):
            raise DegenerateBeam(f"h_{k}^H W_{k} h_{k} = {q:.3e} is not positive")
        w[k] = Wh / np.sqrt(q)
    R0_star = hermitize(R0 + W.sum(axis=0) - w.T @ w.conj())
    return w, R0_star


def solve_transmit(ch, v, params, receiver_type="I"):
    """Optimal transmit design under fixed phases ``v``; see :func:`transmit_step`."""
    gamma = params.for_users(ch.K)
    budget, unit = _budget(ch, params)
    hn, h = _scaled_channels(ch, v, unit)
    g = _g_scale(ch.G)
    prob = transmit_sdp(hn, ch.G / g, gamma, receiver_type, budget)
    sol, blocks = _solve(prob, "transmit step")
    W = np.array([blocks[f"W{k}"] for k in range(ch.K)]) * unit
    R0 = blocks["R0"] * unit
    if ch.K == 1:
        # one CU: folding R0 into W_1 leaves the covariance unchanged and the
        # rebuilt sensing part invisible to the CU, so the design serves both receivers
        w, R0_star = rank_one_reconstruct(W + R0, np.zeros_like(R0), h)
    else:
        w, R0_star = rank_one_reconstruct(W, R0, h)
    design = TransmitDesign(w, R0_star)
    objective = sol.objective / (unit * g * g)
    return TransmitResult(design, W, R0, objective, sol)


def transmit_step(ch, v, params, receiver_type="I"):
    """Minimize ``tr((G Rx G^H)^-1)`` over ``{w_k}, R0`` for fixed ``v``.

    Raises :class:`InfeasibleError` when the SINR targets are out of reach.
    """
    return solve_transmit(ch, v, params, receiver_type).design


def power_min_sdp(hn, gamma):
    K, M = hn.shape
    prob = sdp.HermitianSdp()
    labels = [prob.add_block(f"W{k}", M) for k in range(K)]
    eye = np.eye(M)
    prob.set_objective({lbl: eye for lbl in labels})
    H = [np.outer(h, h.conj()) for h in hn]
    for k in range(K):
        prob.add_constraint({labels[i]: (H[k] / gamma[k] if i == k else -H[k]) for i in range(K)}, 1.0, ">=")
    return prob


def min_power_beams(ch, v, gamma, P_ref=1.0):
    """Minimum-power beams meeting the interference-only SINR targets.

    Returns ``(w, power)``. ``P_ref`` only sets the internal scaling.
    """
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (ch.K,))
    hn, h = _scaled_channels(ch, v, P_ref)
    sol, blocks = _solve(power_min_sdp(hn, gamma), "power minimization")
    W = np.array([blocks[f"W{k}"] for k in range(ch.K)]) * P_ref
    # dropping W_k - w_k w_k^H >= 0 keeps the signal term and cuts interference
    w, _ = rank_one_reconstruct(W, np.zeros((ch.M, ch.M)), h)
    return w, float(np.sum(np.abs(w) ** 2))


def _quick_infeasible(ch, v, gamma, P0):
    # each CU needs at least Gamma_k sigma_k^2 / ||h_k||^2 even without interference
    h = combined_channel(ch, v)
    need = gamma * ch.noise_k / np.sum(np.abs(h) ** 2, axis=1)
    return need.sum() > P0


def is_feasible(ch, v, params):
    """True if some design meets every SINR target within the power budget."""
    gamma = params.for_users(ch.K)
    if _quick_infeasible(ch, v, gamma, params.P0):
        return False
    try:
        _, p = min_power_beams(ch, v, gamma, params.P0)
    except (InfeasibleError, SolverError, DegenerateBeam):
        return False
    return p <= params.P0 * (1.0 - FEASIBILITY_MARGIN)


# --------------------------------------------------------------------------
# reflective side


def _reflect_forms(ch, design, gamma, receiver_type):
    Q, Q0 = reflect_quadratics(ch, design)
    K = ch.K
    A = []
    for k in range(K):
        a = Q[k, k] / gamma[k] - (Q[k].sum(axis=0) - Q[k, k])
        if receiver_type == "I":
            a = a - Q0[k]
        A.append(hermitize(a) / ch.noise_k[k])
    return A


def reflective_sdr(ch, design, gamma, receiver_type="I", objective="sum"):
    """Relaxation over ``V >= 0, diag(V) = 1``. Returns V and the solver result.

    ``objective="sum"`` maximizes ``sum beta_k`` with every ``beta_k >= 0``;
    ``objective="min"`` maximizes the common slack shared by all users, which
    may be negative.
    """
    rx = check_receiver_type(receiver_type)
    if objective not in ("sum", "min"):
        raise ValidationError(f"objective must be 'sum' or 'min', got {objective!r}")
    A = _reflect_forms(ch, design, gamma, rx)
    n = ch.N + 1
    prob = sdp.HermitianSdp()
    prob.add_block("V", n)
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        prob.add_constraint({"V": E}, 1.0)
    if objective == "sum":
        betas = [prob.add_block(f"b{k}", 1, complex=False) for k in range(ch.K)]
        prob.set_objective({b: -np.eye(1) for b in betas})
        for k in range(ch.K):
            prob.add_constraint({"V": A[k], betas[k]: -np.eye(1)}, 1.0, ">=")
    else:
        (t,) = prob.add_free(1)
        prob.set_objective({}, free={t: -1.0})
        for k in range(ch.K):
            prob.add_constraint({"V": A[k]}, 1.0, ">=", free={t: -1.0})
    sol, blocks = prob.solve()
    if sol.status is not sdp.Status.OPTIMAL:
        log.info("reflective SDR returned %s; rounding the last iterate", sol.status.value)
    return blocks["V"], sol


def candidate_slacks(ch, design, gamma, vs, receiver_type="I"):
    """Minimum normalized SINR slack for each row of ``vs`` (unit-modulus phases)."""
    vs = np.atleast_2d(vs)
    u = np.hstack([vs, np.ones((vs.shape[0], 1))])
    K = ch.K
    slack = np.empty((vs.shape[0], K))
    for k in range(K):
        B = np.vstack([ch.h_r[k].conj()[:, None] * ch.G, ch.h_d[k].conj()[None, :]])
        amp = u @ (B @ design.w.T)  # candidates x users: h_k^H w_i
        gains = np.abs(amp) ** 2
        s = gains[:, k] / gamma[k] - (gains.sum(axis=1) - gains[:, k])
        if receiver_type == "I":
            P = B @ design.R0 @ B.conj().T
            s = s - np.real(np.einsum("cn,nm,cm->c", u, P, u.conj()))
        slack[:, k] = (s - ch.noise_k[k]) / ch.noise_k[k]
    return slack.min(axis=1)


def reflective_step(ch, design, v_incumbent, params, receiver_type="I", n_randomizations=256, rng=None):
    """Phases that maximize the minimum SINR slack under a fixed transmit design.

    Candidates are Gaussian-randomized and principal-eigenvector roundings of
    two relaxations, one maximizing the summed slack and one the common
    slack, plus the incumbent. The incumbent is kept unless a candidate
    strictly improves on it. A batch of ``n_randomizations`` draws per
    relaxation that fails to improve is followed by fresh batches, up to
    ``RANDOMIZATION_ROUNDS`` in all.
    """
    rx = check_receiver_type(receiver_type)
    gamma = params.for_users(ch.K)
    rng = rng if rng is not None else np.random.default_rng()
    n = ch.N + 1
    roots, extra = [], []
    for objective in ("sum", "min"):
        V, _ = reflective_sdr(ch, design, gamma, rx, objective)
        roots.append(psd_sqrt(V))
        top = herm_eig(V)[1][:, -1]
        if abs(top[-1]) > 0:
            extra.append(np.exp(1j * np.angle(top[:-1] / top[-1]))[None, :])
    inc = v_incumbent.v if isinstance(v_incumbent, ReflectCoeffs) else np.asarray(v_incumbent)
    inc_score = candidate_slacks(ch, design, gamma, inc[None, :], rx)[0]
    # candidates are cheap next to the SDR solves, so draw more batches before giving up
    for _ in range(RANDOMIZATION_ROUNDS):
        cands = list(extra)
        extra = []
        for L in roots:
            z = (rng.standard_normal((n, n_randomizations)) + 1j * rng.standard_normal((n, n_randomizations))) / np.sqrt(2)
            r = L @ z
            cands.append(np.exp(1j * np.angle(r[:-1] / r[-1])).T)
        cands = np.vstack(cands)
        scores = candidate_slacks(ch, design, gamma, cands, rx)
        best = int(np.argmax(scores))
        if scores[best] > inc_score:
            return ReflectCoeffs.from_vector(cands[best])
    return v_incumbent if isinstance(v_incumbent, ReflectCoeffs) else ReflectCoeffs.from_vector(inc)


# --------------------------------------------------------------------------
# alternating optimization


def _initial_phases(ch, seed, attempt):
    return ReflectCoeffs.random(ch.N, stream(seed, _INIT_STREAM, attempt))


def power_min_alternation(ch, params, v0, ao, seed=0):
    """Alternate min-power beams and max-slack phases.

    Returns ``(w_bar, v, power)``; the power is the last accepted minimum.
    """
    gamma = params.for_users(ch.K)
    rng = stream(seed, _RAND_STREAM, 1)
    v = v0
    w, p = min_power_beams(ch, v, gamma, params.P0)
    for _ in range(ao.stage1_iters - 1):
        design = TransmitDesign(w, np.zeros((ch.M, ch.M)))
        v_new = reflective_step(ch, design, v, params, "II", ao.n_randomizations, rng)
        if v_new is v:
            break
        w_new, p_new = min_power_beams(ch, v_new, gamma, params.P0)
        if p_new >= p:
            break
        done = (p - p_new) < ao.rel_tol * p
        v, w, p = v_new, w_new, p_new
        if done:
            break
    return w, v, p


def _feasible_start(ch, params, ao, seed):
    """Random phases that admit a feasible design, or ``None``.

    Draws up to ``max_v_resamples`` uniform phase vectors; if none works the
    last draw seeds a power-minimizing alternation that tries to pull the
    required power under the budget.
    """
    v = None
    for attempt in range(ao.max_v_resamples):
        v = _initial_phases(ch, seed, attempt)
        if is_feasible(ch, v, params):
            return v, attempt
    try:
        _, v_pm, p = power_min_alternation(ch, params, _initial_phases(ch, seed, 0), ao, seed)
    except (InfeasibleError, SolverError, DegenerateBeam):
        return None, ao.max_v_resamples
    if p <= params.P0 * (1.0 - FEASIBILITY_MARGIN):
        return v_pm, ao.max_v_resamples
    return None, ao.max_v_resamples


def _infeasible(ch, v=None):
    return AoSolution(TransmitDesign.zeros(ch.K, ch.M), v or ReflectCoeffs(np.zeros(ch.N)), [], "Infeasible")


def _ao_from(ch, params, ao, v, rng):
    """One AO run from phases ``v``; ``None`` if the first transmit step is infeasible."""
    rx = ao.receiver_type
    T = params.T
    # with one CU any phase that admits a Type-II design admits a Type-I design
    # with the same covariance (see solve_transmit), so the looser forms apply
    reflect_rx = "II" if ch.K == 1 else rx
    try:
        design = transmit_step(ch, v, params, rx)
    except InfeasibleError:
        return None
    trace = [crb(ch.G, design.Rx, ch.noise_r, T)]
    status = "IterCap"
    for _ in range(ao.max_outer_iters - 1):
        v_new = reflective_step(ch, design, v, params, reflect_rx, ao.n_randomizations, rng)
        if v_new is v:
            status = "Converged"
            break
        try:
            cand = transmit_step(ch, v_new, params, rx)
        except (InfeasibleError, SolverError, DegenerateBeam) as exc:
            log.info("transmit step failed after phase update: %s", exc)
            status = "Converged"
            break
        c = crb(ch.G, cand.Rx, ch.noise_r, T)
        if c >= trace[-1]:
            status = "Converged"
            break
        rel = (trace[-1] - c) / trace[-1]
        design, v = cand, v_new
        trace.append(c)
        if rel < ao.rel_tol:
            status = "Converged"
            break
    return AoSolution(design, v, trace, status)


def alternating_optimize(ch, params, ao=None, seed=0):
    """Alternate the transmit SDP and the reflective SDR until the CRB settles.

    The CRB trace is non-increasing by construction: a transmit step that
    fails to improve on the incumbent ends the loop and the incumbent is
    returned. With ``ao.warm_start`` a second run starts from the phases of a
    power-minimizing alternation and the lower final CRB wins. For the type-II
    receiver a further run starts from the type-I solution's phases; any
    type-I feasible design is type-II feasible, so the type-II result never
    loses to the type-I one.
    """
    ao = ao or AoConfig()
    v, attempts = _feasible_start(ch, params, ao, seed)
    runs = []
    if v is not None:
        runs.append(_ao_from(ch, params, ao, v, stream(seed, _RAND_STREAM, 0)))
    if ao.warm_start and attempts < ao.max_v_resamples:
        try:
            _, v_pm, p = power_min_alternation(ch, params, _initial_phases(ch, seed, 0), ao, seed)
        except (InfeasibleError, SolverError, DegenerateBeam):
            v_pm = None
        if v_pm is not None and p <= params.P0 * (1.0 - FEASIBILITY_MARGIN):
            runs.append(_ao_from(ch, params, ao, v_pm, stream(seed, _RAND_STREAM, 2)))
    if ao.warm_start and ao.receiver_type == "II":
        sol_one = alternating_optimize(ch, params, replace(ao, receiver_type="I"), seed)
        if sol_one.feasible:
            runs.append(_ao_from(ch, params, ao, sol_one.v, stream(seed, _RAND_STREAM, 3)))
    runs = [r for r in runs if r is not None]
    if not runs:
        return _infeasible(ch, v)
    best = min(runs, key=lambda r: r.crb)
    best.n_resamples = attempts
    return best


def benchmark_transmit_only(ch, params, receiver_type="I", seed=0):
    """Transmit optimization under the same first random phases the AO starts from."""
    v = _initial_phases(ch, seed, 0)
    try:
        design = transmit_step(ch, v, params, receiver_type)
    except InfeasibleError:
        return _infeasible(ch, v)
    return AoSolution(design, v, [crb(ch.G, design.Rx, ch.noise_r, params.T)], "Converged")


def separate_stage2_sdp(hn, Gn, w_bar_n, gamma, receiver_type="I", power=1.0):
    """CRB SDP over ``t = alpha^2 >= 1`` and ``R0`` with fixed beam directions (scaled data)."""
    rx = check_receiver_type(receiver_type)
    K, M = hn.shape
    prob = sdp.HermitianSdp()
    prob.add_block("R0", M)
    (t,) = prob.add_free(1)
    W_bar = w_bar_n.T @ w_bar_n.conj()
    obj = _add_epigraph(prob, Gn, [("R0", None), (t, W_bar)])
    prob.set_objective({"Z": obj})
    gains = np.abs(hn.conj() @ w_bar_n.T) ** 2
    for k in range(K):
        coeff = gains[k, k] / gamma[k] - (gains[k].sum() - gains[k, k])
        coeffs = {"R0": -np.outer(hn[k], hn[k].conj())} if rx == "I" else {}
        prob.add_constraint(coeffs, 1.0, ">=", {t: coeff})
    prob.add_constraint({"R0": -np.eye(M)}, -float(power), ">=", {t: -float(np.sum(np.abs(w_bar_n) ** 2))})
    prob.add_constraint({}, 1.0, ">=", {t: 1.0})
    return prob


def benchmark_separate(ch, params, receiver_type="I", seed=0, ao=None):
    """Min-power information beams first, then scale ``alpha`` and sensing ``R0``."""
    ao = ao or AoConfig(receiver_type=receiver_type)
    rx = check_receiver_type(receiver_type)
    try:
        w_bar, v, p = power_min_alternation(ch, params, _initial_phases(ch, seed, 0), ao, seed)
    except (InfeasibleError, DegenerateBeam):
        return _infeasible(ch)
    if p > params.P0 * (1.0 - FEASIBILITY_MARGIN):
        return _infeasible(ch, v)
    gamma = params.for_users(ch.K)
    budget, unit = _budget(ch, params)
    hn, _ = _scaled_channels(ch, v, unit)
    g = _g_scale(ch.G)
    prob = separate_stage2_sdp(hn, ch.G / g, w_bar / np.sqrt(unit), gamma, rx, budget)
    try:
        sol, blocks = _solve(prob, "separate design stage 2")
    except InfeasibleError:
        return _infeasible(ch, v)
    t = max(1.0, float(sol.free[0]))
    design = TransmitDesign(np.sqrt(t) * w_bar, blocks["R0"] * unit)
    sol_crb = crb(ch.G, design.Rx, ch.noise_r, params.T)
    return AoSolution(design, v, [sol_crb], "Converged")
