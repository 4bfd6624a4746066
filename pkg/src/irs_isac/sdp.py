"""Small dense semidefinite programs and a primal-dual interior-point solver.

Problems are stated in the primal standard form::

    minimize    sum_b <C_b, X_b> + c_f . x_f
    subject to  sum_b <A_ib, X_b> + a_if . x_f  (= or >=)  b_i
                X_b PSD for every block b,  x_f free

Blocks of dimension one are plain nonnegative scalars and are handled as a
linear cone internally. Inequalities become equalities with nonnegative
slacks.

Complex Hermitian problems go through :class:`HermitianSdp`, which maps an
n x n Hermitian block to the 2n x 2n real block ``[[Re, -Im], [Im, Re]]``.
The embedding doubles traces, so every coefficient matrix is halved:
``<emb(A)/2, emb(X)> == Re tr(A X)`` exactly, and objective and constraint
values are the same in both forms.
"""
import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._validation import ValidationError

STEP_FRACTION = 0.98
MAX_ITER = 200
TOL = 1e-8
INFEASIBLE_SCALE = 1e8
FREE_REG = 1e-12
# in the endgame, give up after this many iterations without a new best merit
STALL_ITERS = 10
STALL_MERIT = 1e-5
_TRACE = False


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class Constraint:
    """One linear constraint; ``blocks`` maps block label -> symmetric matrix."""

    blocks: dict
    rhs: float
    sense: str = "="
    free: dict = field(default_factory=dict)


@dataclass
class SdpProblem:
    blocks: list  # (label, dim) pairs
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    free_vars: int = 0
    free_objective: dict = field(default_factory=dict)

    def __post_init__(self):
        self.blocks = [(str(lbl), int(d)) for lbl, d in self.blocks]

    @property
    def labels(self):
        return [lbl for lbl, _ in self.blocks]

    def dims(self):
        return dict(self.blocks)

    def validate(self):
        dims = self.dims()
        if len(dims) != len(self.blocks):
            raise ValidationError("duplicate block labels")
        for lbl, d in self.blocks:
            if d < 1:
                raise ValidationError(f"block {lbl!r} has dim {d} < 1")
        if not self.constraints and not self.objective and not self.free_objective:
            raise ValidationError("problem has neither constraints nor objective")

        def check(mats, where):
            for lbl, a in mats.items():
                if lbl not in dims:
                    raise ValidationError(f"{where}: unknown block {lbl!r}")
                a = np.asarray(a)
                if a.shape != (dims[lbl], dims[lbl]):
                    raise ValidationError(
                        f"{where}: block {lbl!r} coefficient has shape {a.shape}")
                if np.iscomplexobj(a) or not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
                    raise ValidationError(f"{where}: block {lbl!r} coefficient not real symmetric")

        def check_free(free, where):
            for j in free:
                if not 0 <= int(j) < self.free_vars:
                    raise ValidationError(f"{where}: free index {j} out of range")

        check(self.objective, "objective")
        check_free(self.free_objective, "objective")
        for i, c in enumerate(self.constraints):
            if c.sense not in ("=", ">="):
                raise ValidationError(f"constraint {i}: sense {c.sense!r} not in {{'=', '>='}}")
            if not np.isfinite(c.rhs):
                raise ValidationError(f"constraint {i}: non-finite rhs")
            check(c.blocks, f"constraint {i}")
            check_free(c.free, f"constraint {i}")

    # debug dump -----------------------------------------------------------
    def to_json(self):
        def mats(d):
            return {lbl: np.asarray(a, dtype=float).tolist() for lbl, a in d.items()}

        def frees(d):
            return {str(j): float(v) for j, v in d.items()}

        return {
            "blocks": [{"label": lbl, "dim": d} for lbl, d in self.blocks],
            "free_vars": self.free_vars,
            "objective": {"blocks": mats(self.objective), "free": frees(self.free_objective)},
            "constraints": [
                {"blocks": mats(c.blocks), "free": frees(c.free), "rhs": float(c.rhs), "sense": c.sense}
                for c in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, doc):
        def mats(d):
            return {lbl: np.asarray(a, dtype=float) for lbl, a in d.items()}

        def frees(d):
            return {int(j): float(v) for j, v in d.items()}

        return cls(
            blocks=[(b["label"], b["dim"]) for b in doc["blocks"]],
            free_vars=doc.get("free_vars", 0),
            objective=mats(doc["objective"].get("blocks", {})),
            free_objective=frees(doc["objective"].get("free", {})),
            constraints=[
                Constraint(mats(c.get("blocks", {})), c["rhs"], c.get("sense", "="), frees(c.get("free", {})))
                for c in doc["constraints"]
            ],
        )

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


@dataclass
class SdpSolution:
    status: Status
    blocks: dict  # label -> primal matrix
    free: np.ndarray
    duals: np.ndarray  # one multiplier per constraint, original scaling
    dual_blocks: dict
    objective: float
    dual_objective: float
    residuals: dict
    iterations: int
    certificate: np.ndarray = None  # Farkas ray for Infeasible / Unbounded

    @property
    def ok(self):
        return self.status is Status.OPTIMAL


# --------------------------------------------------------------------------
# compiled internal form


class _PsdBlock:
    __slots__ = ("dim", "C", "rows", "A", "Aflat", "sparse", "ep", "eq", "ev", "starts")

    def __init__(self, dim, C, rows, A):
        self.dim = dim
        self.C = C
        self.rows = rows
        self.A = A
        self.Aflat = A.reshape(len(rows), dim * dim)
        nnz_r, nnz_p, nnz_q = np.nonzero(A)
        nnz = len(nnz_r)
        dense_cost = 2.0 * len(rows) * dim ** 3 + len(rows) ** 2 * dim ** 2
        # gathers cost roughly 500x a BLAS flop
        self.sparse = nnz > 0 and 500.0 * nnz * nnz < dense_cost
        if self.sparse:
            self.ep, self.eq = nnz_p, nnz_q
            self.ev = A[nnz_r, nnz_p, nnz_q]
            # np.nonzero is row-major, so each row's entries are contiguous
            self.starts = np.searchsorted(nnz_r, np.arange(len(rows)))

    def op(self, X):
        return self.Aflat @ X.ravel()

    def adj(self, y):
        return (y[self.rows] @ self.Aflat).reshape(self.dim, self.dim)

    def schur(self, W):
        if not len(self.rows):
            return None
        if self.sparse:
            k = W[np.ix_(self.eq, self.ep)]
            k = k * k.T
            k *= np.outer(self.ev, self.ev)
            k = np.add.reduceat(k, self.starts, axis=0)
            return np.add.reduceat(k, self.starts, axis=1)
        T = W @ self.A @ W
        return self.Aflat @ T.reshape(len(self.rows), -1).T


class _Compiled:
    """Equilibrated problem data with inequality slacks folded into the LP cone."""

    def __init__(self, p: SdpProblem):
        p.validate()
        m = len(p.constraints)
        psd_labels = [(lbl, d) for lbl, d in p.blocks if d > 1]
        lp_labels = [lbl for lbl, d in p.blocks if d == 1]
        n_slack = sum(c.sense == ">=" for c in p.constraints)
        self.m = m
        self.psd_labels = psd_labels
        self.lp_labels = lp_labels
        self.n_lp = len(lp_labels) + n_slack
        self.n_free = p.free_vars
        lp_index = {lbl: i for i, lbl in enumerate(lp_labels)}

        b = np.array([float(c.rhs) for c in p.constraints])
        A_l = np.zeros((m, self.n_lp))
        A_f = np.zeros((m, self.n_free))
        stacks = {lbl: np.zeros((m, d, d)) for lbl, d in psd_labels}
        used = {lbl: np.zeros(m, dtype=bool) for lbl, _ in psd_labels}
        s = len(lp_labels)
        for i, c in enumerate(p.constraints):
            for lbl, a in c.blocks.items():
                a = np.asarray(a, dtype=float)
                if lbl in lp_index:
                    A_l[i, lp_index[lbl]] += a[0, 0]
                else:
                    stacks[lbl][i] = 0.5 * (a + a.T)
                    used[lbl][i] = bool(np.any(a))
            for j, v in c.free.items():
                A_f[i, int(j)] += v
            if c.sense == ">=":
                A_l[i, s] = -1.0
                s += 1

        # row equilibration
        norms = np.sqrt(
            sum((st ** 2).sum(axis=(1, 2)) for st in stacks.values())
            + (A_l ** 2).sum(axis=1) + (A_f ** 2).sum(axis=1)
        ) if m else np.zeros(0)
        if m and np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            if abs(b[bad]) > 0:
                # 0 = b with b != 0 is trivially infeasible; keep the row so it is detected
                norms[bad] = 1.0
            else:
                raise ValidationError(f"constraint {bad} is identically zero")
        self.row_scale = 1.0 / norms if m else norms
        d = self.row_scale
        self.b = b * d
        self.A_l = A_l * d[:, None]
        self.A_f = A_f * d[:, None]

        C = {lbl: np.asarray(p.objective.get(lbl, np.zeros((dd, dd))), dtype=float) for lbl, dd in p.blocks}
        c_l = np.zeros(self.n_lp)
        for lbl in lp_labels:
            c_l[lp_index[lbl]] = C[lbl][0, 0]
        c_f = np.zeros(self.n_free)
        for j, v in p.free_objective.items():
            c_f[int(j)] += v
        cnorm = np.sqrt(sum((C[lbl] ** 2).sum() for lbl, _ in psd_labels) + (c_l ** 2).sum() + (c_f ** 2).sum())
        self.obj_scale = 1.0 / cnorm if cnorm > 0 else 1.0
        self.c_l = c_l * self.obj_scale
        self.c_f = c_f * self.obj_scale

        self.psd = []
        for lbl, dd in psd_labels:
            rows = np.flatnonzero(used[lbl])
            A = stacks[lbl][rows] * d[rows, None, None]
            Cb = 0.5 * (C[lbl] + C[lbl].T) * self.obj_scale
            self.psd.append(_PsdBlock(dd, Cb, rows, A))
        self.nu = sum(blk.dim for blk in self.psd) + self.n_lp

    def op(self, X, x_l, x_f):
        out = self.A_l @ x_l + self.A_f @ x_f
        for blk, Xb in zip(self.psd, X):
            out[blk.rows] += blk.op(Xb)
        return out


# --------------------------------------------------------------------------
# NT scaling helpers


def _nt_scaling(X, Z):
    """Return (G, Ginv, lam) with G^{-1} X G^{-T} = G^T Z G = diag(lam)."""
    try:
        Lx = np.linalg.cholesky(X)
        Lz = np.linalg.cholesky(Z)
        U, lam, Vt = np.linalg.svd(Lz.T @ Lx)
        lam = np.clip(lam, 1e-300, None)
        r = np.sqrt(lam)
        G = Lx @ (Vt.T / r)
        Ginv = (U.T / r[:, None]) @ Lz.T
        return G, Ginv, lam
    except np.linalg.LinAlgError:
        pass
    d, Q = np.linalg.eigh(X)
    d = np.clip(d, 1e-300, None)
    sq = np.sqrt(d)
    Xh = (Q * sq) @ Q.T
    Xih = (Q / sq) @ Q.T
    l2, U = np.linalg.eigh(Xh @ Z @ Xh)
    lam = np.sqrt(np.clip(l2, 1e-300, None))
    G = Xh @ U / np.sqrt(lam)
    Ginv = (np.sqrt(lam)[:, None] * U.T) @ Xih
    return G, Ginv, lam


def _max_step_psd(lam, D):
    s = 1.0 / np.sqrt(lam)
    ev = np.linalg.eigvalsh(s[:, None] * D * s[None, :])
    return np.inf if ev[0] >= 0 else -1.0 / ev[0]


def _max_step_lp(x, dx):
    neg = dx < 0
    return np.inf if not np.any(neg) else float(np.min(-x[neg] / dx[neg]))


def _sym(a):
    return 0.5 * (a + a.T)


# --------------------------------------------------------------------------


def solve(problem: SdpProblem, tol=TOL, max_iter=MAX_ITER):
    """Solve ``problem`` with a Mehrotra predictor-corrector using NT scaling.

    Never raises on numerical trouble: a breakdown ends the iteration and the
    best iterate comes back with status ``NumericalFailure``.
    """
    cp = _Compiled(problem)
    # overflow in a doomed trial step is caught by the finiteness check
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _interior_point(cp, tol, max_iter)


def _interior_point(cp, tol, max_iter):
    m, nf, nl = cp.m, cp.n_free, cp.n_lp
    b = cp.b

    # start well inside the cones, scaled to the data (as in SDPT3)
    X, Z = [], []
    for blk in cp.psd:
        n = blk.dim
        an = np.linalg.norm(blk.Aflat, axis=1)
        xi = max(10.0, np.sqrt(n), n * float(np.max((1.0 + np.abs(b[blk.rows])) / (1.0 + an), initial=0.0)))
        eta = max(10.0, np.sqrt(n), float(np.linalg.norm(blk.C)), float(np.max(an, initial=0.0)))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    if nl:
        an = np.linalg.norm(cp.A_l, axis=0)
        xi = max(10.0, float(np.max((1.0 + np.abs(b)) / (1.0 + np.linalg.norm(cp.A_l, axis=1)), initial=0.0)))
        eta = max(10.0, float(np.linalg.norm(cp.c_l)), float(an.max()))
    else:
        xi = eta = 1.0
    x_l = np.full(nl, xi)
    z_l = np.full(nl, eta)
    x_f = np.zeros(nf)
    y = np.zeros(m)

    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.sqrt(sum((blk.C ** 2).sum() for blk in cp.psd) + cp.c_l @ cp.c_l + cp.c_f @ cp.c_f)

    status = Status.NUMERICAL_FAILURE
    certificate = None
    it = 0
    small_steps = 0
    best = None
    for it in range(max_iter + 1):
        rp = b - cp.op(X, x_l, x_f)
        Rd = [blk.C - Zb - blk.adj(y) for blk, Zb in zip(cp.psd, Z)]
        rd_l = cp.c_l - z_l - cp.A_l.T @ y
        rf = cp.c_f - cp.A_f.T @ y
        pobj = sum((blk.C * Xb).sum() for blk, Xb in zip(cp.psd, X)) + cp.c_l @ x_l + cp.c_f @ x_f
        dobj = b @ y
        xz = sum((Xb * Zb).sum() for Xb, Zb in zip(X, Z)) + x_l @ z_l
        mu = xz / cp.nu if cp.nu else 0.0
        res_p = np.linalg.norm(rp) / bnorm
        res_d = np.sqrt(sum((r ** 2).sum() for r in Rd) + rd_l @ rd_l + rf @ rf) / cnorm
        # complementarity, so the three measures together are the KKT residuals
        res_g = abs(xz) / (1.0 + abs(pobj) + abs(dobj))
        merit = max(res_p, res_d, res_g)
        if _TRACE:
            print(f"{it:3d} p={res_p:.2e} d={res_d:.2e} g={res_g:.2e} mu={mu:.2e} pobj={pobj:.6e}")
        if best is None or merit < best[0]:
            best_it = it
            best = (merit, [Xb.copy() for Xb in X], [Zb.copy() for Zb in Z], x_l.copy(), z_l.copy(),
                    x_f.copy(), y.copy(), (res_p, res_d, res_g, pobj, dobj))
        if res_p <= tol and res_d <= tol and res_g <= tol:
            status = Status.OPTIMAL
            break

        # primal infeasibility: dual objective diverges along an improving ray
        if dobj > INFEASIBLE_SCALE * cnorm:
            ray = y / dobj
            viol = np.sqrt(sum(((blk.C - r) ** 2).sum() for blk, r in zip(cp.psd, Rd))
                           + np.sum((cp.c_l - rd_l) ** 2) + np.sum((cp.c_f - rf) ** 2)) / dobj
            if viol < 1e-6 and res_p > tol:
                status = Status.INFEASIBLE
                certificate = ray * cp.row_scale
                break
        # dual infeasibility: primal objective diverges
        if -pobj > INFEASIBLE_SCALE * bnorm:
            ax = np.linalg.norm(b - rp) / -pobj
            if ax < 1e-6 and res_d > tol:
                status = Status.UNBOUNDED
                certificate = None
                break
        if it == max_iter or (it - best_it >= STALL_ITERS and best[0] < STALL_MERIT):
            break

        try:
            # scaling
            scal = [_nt_scaling(Xb, Zb) for Xb, Zb in zip(X, Z)]
            Ws = [G @ G.T for G, _, _ in scal]
            dl = x_l / z_l

            M = np.zeros((m, m))
            for blk, W in zip(cp.psd, Ws):
                Mb = blk.schur(W)
                if Mb is not None:
                    M[np.ix_(blk.rows, blk.rows)] += Mb
            if nl:
                M += (cp.A_l * dl) @ cp.A_l.T
            M = _sym(M)
            try:
                if nf:
                    K = np.block([[M, cp.A_f], [cp.A_f.T, -FREE_REG * np.eye(nf)]])
                    fac = ("lu", sla.lu_factor(K, check_finite=False))
                else:
                    fac = ("chol", sla.cho_factor(M, lower=True, check_finite=False))
            except (np.linalg.LinAlgError, ValueError):
                try:
                    reg = 1e-14 * max(1.0, np.abs(M).max())
                    K = np.block([[M + reg * np.eye(m), cp.A_f], [cp.A_f.T, -FREE_REG * np.eye(nf)]]) if nf else M + reg * np.eye(m)
                    fac = ("lu", sla.lu_factor(K, check_finite=False))
                except (np.linalg.LinAlgError, ValueError):
                    raise np.linalg.LinAlgError("Schur complement factorization failed")

            WRdW = [W @ R @ W for W, R in zip(Ws, Rd)]

            def direction(Rc, rc_l):
                r1 = rp.copy()
                for blk, Rcb, wrw in zip(cp.psd, Rc, WRdW):
                    r1[blk.rows] -= blk.op(Rcb - wrw)
                if nl:
                    r1 -= cp.A_l @ (rc_l - dl * rd_l)
                if fac[0] == "chol":
                    dy = sla.cho_solve(fac[1], r1, check_finite=False)
                    dxf = np.zeros(0)
                else:
                    sol = sla.lu_solve(fac[1], np.concatenate([r1, rf]), check_finite=False)
                    dy, dxf = sol[:m], sol[m:]
                dZ = [R - blk.adj(dy) for blk, R in zip(cp.psd, Rd)]
                dX = [_sym(Rcb - W @ dZb @ W) for Rcb, W, dZb in zip(Rc, Ws, dZ)]
                dz_l = rd_l - cp.A_l.T @ dy
                dx_l = rc_l - dl * dz_l
                return dX, dZ, dx_l, dz_l, dy, dxf

            def steps(dX, dZ, dx_l, dz_l):
                ap, ad = np.inf, np.inf
                Ds = []
                for (G, Gi, lam), dXb, dZb in zip(scal, dX, dZ):
                    Dx = _sym(Gi @ dXb @ Gi.T)
                    Dz = _sym(G.T @ dZb @ G)
                    Ds.append((Dx, Dz))
                    ap = min(ap, _max_step_psd(lam, Dx))
                    ad = min(ad, _max_step_psd(lam, Dz))
                if nl:
                    ap = min(ap, _max_step_lp(x_l, dx_l))
                    ad = min(ad, _max_step_lp(z_l, dz_l))
                return ap, ad, Ds

            # predictor
            dX, dZ, dx_l, dz_l, dy, dxf = direction([-Xb for Xb in X], -x_l)
            ap, ad, Ds = steps(dX, dZ, dx_l, dz_l)
            ap_a, ad_a = min(1.0, ap), min(1.0, ad)
            xz_aff = sum(((Xb + ap_a * a) * (Zb + ad_a * c)).sum() for Xb, Zb, a, c in zip(X, Z, dX, dZ))
            xz_aff += (x_l + ap_a * dx_l) @ (z_l + ad_a * dz_l)
            sigma = min(1.0, max(0.0, xz_aff / xz)) ** 3 if xz > 0 else 0.0

            # corrector
            Rc = []
            for (G, Gi, lam), (Dx, Dz) in zip(scal, Ds):
                H = -(Dx @ Dz + Dz @ Dx)
                H[np.diag_indices_from(H)] += 2.0 * sigma * mu - 2.0 * lam ** 2
                D = H / (lam[:, None] + lam[None, :])
                Rc.append(_sym(G @ D @ G.T))
            rc_l = (sigma * mu - x_l * z_l - dx_l * dz_l) / z_l
            dX, dZ, dx_l, dz_l, dy, dxf = direction(Rc, rc_l)
            ap, ad, _ = steps(dX, dZ, dx_l, dz_l)
            ap = min(1.0, STEP_FRACTION * ap)
            ad = min(1.0, STEP_FRACTION * ad)
            if nf and not np.isfinite(ap):
                ap = 1.0

            X = [Xb + ap * a for Xb, a in zip(X, dX)]
            x_l = x_l + ap * dx_l
            x_f = x_f + ap * dxf
            Z = [Zb + ad * a for Zb, a in zip(Z, dZ)]
            z_l = z_l + ad * dz_l
            y = y + ad * dy

        except (np.linalg.LinAlgError, FloatingPointError):
            break
        if not all(np.all(np.isfinite(a)) for a in (*X, *Z, x_l, z_l, x_f, y)):
            break

        if max(ap, ad) < 1e-10:
            small_steps += 1
            if small_steps >= 3:
                break
        else:
            small_steps = 0

    if status is Status.NUMERICAL_FAILURE and best is not None:
        # fall back to the best iterate seen
        _, X, Z, x_l, z_l, x_f, y, (res_p, res_d, res_g, pobj, dobj) = best

    # unscale
    os_ = cp.obj_scale
    y_out = y * cp.row_scale / os_
    blocks = {}
    dual_blocks = {}
    for (lbl, _), Xb, Zb in zip(cp.psd_labels, X, Z):
        blocks[lbl] = Xb
        dual_blocks[lbl] = Zb / os_
    for i, lbl in enumerate(cp.lp_labels):
        blocks[lbl] = np.array([[x_l[i]]])
        dual_blocks[lbl] = np.array([[z_l[i] / os_]])
    residuals = {"primal": float(res_p), "dual": float(res_d), "gap": float(res_g)}
    return SdpSolution(
        status=status,
        blocks=blocks,
        free=x_f.copy(),
        duals=y_out,
        dual_blocks=dual_blocks,
        objective=float(pobj / os_),
        dual_objective=float(dobj / os_),
        residuals=residuals,
        iterations=it,
        certificate=certificate,
    )


# --------------------------------------------------------------------------
# Hermitian front end


def embed_matrix(a):
    """Real embedding ``[[Re, -Im], [Im, Re]]`` of a complex matrix."""
    a = np.asarray(a)
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def deembed_matrix(y):
    """Inverse of :func:`embed_matrix` after projecting onto the embedded subspace."""
    n = y.shape[0] // 2
    y11, y12, y21, y22 = y[:n, :n], y[:n, n:], y[n:, :n], y[n:, n:]
    out = 0.5 * (y11 + y22) + 0.5j * (y21 - y12)
    out = 0.5 * (out + out.conj().T)
    out[np.diag_indices(n)] = out[np.diag_indices(n)].real
    return out


class HermitianSdp:
    """Builder for SDPs over complex Hermitian (and real) PSD blocks.

    Coefficients on complex blocks are Hermitian matrices and enter through
    ``Re tr(A X)``. Call :meth:`embed` (or :func:`embed_hermitian`) to obtain
    the equivalent real :class:`SdpProblem`, and :meth:`extract` to map a
    solution back.
    """

    def __init__(self):
        self.blocks = []  # (label, dim, is_complex)
        self.objective = {}
        self.constraints = []
        self.free_vars = 0
        self.free_objective = {}

    def add_block(self, label, dim, complex=True):
        if any(lbl == label for lbl, _, _ in self.blocks):
            raise ValidationError(f"duplicate block {label!r}")
        # a 1x1 Hermitian block is a nonnegative real scalar
        self.blocks.append((label, int(dim), bool(complex) and dim > 1))
        return label

    def add_free(self, n=1):
        start = self.free_vars
        self.free_vars += n
        return list(range(start, start + n))

    def add_constraint(self, coeffs, rhs, sense="=", free=None):
        self.constraints.append(Constraint(dict(coeffs), float(rhs), sense, dict(free or {})))

    def set_objective(self, coeffs, free=None):
        self.objective = dict(coeffs)
        self.free_objective = dict(free or {})

    def _embed_coeffs(self, coeffs, where):
        info = {lbl: (d, cx) for lbl, d, cx in self.blocks}
        out = {}
        for lbl, a in coeffs.items():
            if lbl not in info:
                raise ValidationError(f"{where}: unknown block {lbl!r}")
            d, cx = info[lbl]
            a = np.atleast_2d(np.asarray(a))
            if a.shape != (d, d):
                raise ValidationError(f"{where}: block {lbl!r} coefficient has shape {a.shape}")
            scale = max(1.0, float(np.abs(a).max(initial=0.0)))
            if np.abs(a - a.conj().T).max(initial=0.0) > 1e-12 * scale:
                raise ValidationError(f"{where}: block {lbl!r} coefficient is not Hermitian")
            if cx:
                out[lbl] = 0.5 * embed_matrix(0.5 * (a + a.conj().T))
            else:
                if np.iscomplexobj(a) and np.abs(a.imag).max(initial=0.0) > 1e-12 * scale:
                    raise ValidationError(f"{where}: real block {lbl!r} has complex coefficient")
                out[lbl] = np.real(0.5 * (a + a.conj().T))
        return out

    def embed(self):
        blocks = [(lbl, 2 * d if cx else d) for lbl, d, cx in self.blocks]
        cons = [
            Constraint(self._embed_coeffs(c.blocks, f"constraint {i}"), c.rhs, c.sense, c.free)
            for i, c in enumerate(self.constraints)
        ]
        return SdpProblem(
            blocks=blocks,
            objective=self._embed_coeffs(self.objective, "objective"),
            constraints=cons,
            free_vars=self.free_vars,
            free_objective=dict(self.free_objective),
        )

    def extract(self, sol: SdpSolution):
        """Map real solution blocks back to Hermitian (or real) matrices."""
        out = {}
        for lbl, d, cx in self.blocks:
            y = sol.blocks[lbl]
            out[lbl] = deembed_matrix(y) if cx else y
        return out

    def solve(self, **kw):
        sol = solve(self.embed(), **kw)
        return sol, self.extract(sol)


def embed_hermitian(problem: HermitianSdp) -> SdpProblem:
    return problem.embed()
