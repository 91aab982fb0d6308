"""Primal-dual interior-point solver for linear/second-order-cone programs.

Programs are stated as *maximize* ``objective @ x`` subject to linear
equalities, linear inequalities ``G x <= h``, second-order cone constraints
``||A x + b|| <= c @ x + d`` and convex quadratic constraints
``x'Qx + q'x <= r``. Quadratics are rewritten as rotated cones so a single
conic core handles everything.

The core is a homogeneous self-dual embedding with Nesterov-Todd scaling and
a Mehrotra predictor-corrector, in the spirit of ECOS/CVXOPT. KKT systems are
factored sparsely with static regularisation plus iterative refinement.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iter"
NUMERICAL = "numerical-failure"


class ProgramError(ValueError):
    """Inconsistent dimensions or a non-convex quadratic."""


@dataclass
class SocConstraint:
    """``||A x + b|| <= c @ x + d``."""

    A: sp.spmatrix
    b: np.ndarray
    c: np.ndarray
    d: float
    tag: Optional[tuple] = None


@dataclass
class QuadConstraint:
    """``x' Q x + q @ x <= r`` with Q positive semidefinite."""

    Q: sp.spmatrix
    q: np.ndarray
    r: float
    tag: Optional[tuple] = None


@dataclass
class ConeProgram:
    num_vars: int
    objective: np.ndarray
    eq_A: sp.spmatrix = None
    eq_b: np.ndarray = None
    ineq_G: sp.spmatrix = None
    ineq_h: np.ndarray = None
    socs: list = field(default_factory=list)
    quads: list = field(default_factory=list)
    eq_tags: list = None
    ineq_tags: list = None

    def __post_init__(self):
        n = self.num_vars
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (n,):
            raise ProgramError("objective length must equal num_vars")
        self.eq_A, self.eq_b = _linear_block(self.eq_A, self.eq_b, n, "equality")
        self.ineq_G, self.ineq_h = _linear_block(self.ineq_G, self.ineq_h, n, "inequality")
        for con in self.socs:
            con.A = sp.csr_matrix(con.A)
            con.b = np.asarray(con.b, dtype=float).ravel()
            con.c = np.asarray(con.c, dtype=float).ravel()
            if con.A.shape[1] != n or con.A.shape[0] != con.b.size or con.c.size != n:
                raise ProgramError(f"SOC constraint {con.tag} has inconsistent dimensions")
        for con in self.quads:
            con.Q = sp.csr_matrix(con.Q)
            con.q = np.asarray(con.q, dtype=float).ravel()
            if con.Q.shape != (n, n) or con.q.size != n:
                raise ProgramError(f"quadratic constraint {con.tag} has inconsistent dimensions")
            con._psd = _factor_psd(con.Q)  # raises when not PSD

    @property
    def num_constraints(self) -> int:
        return self.eq_A.shape[0] + self.ineq_G.shape[0] + len(self.socs) + len(self.quads)

    def tags(self) -> list:
        out = list(self.eq_tags or [None] * self.eq_A.shape[0])
        out += list(self.ineq_tags or [None] * self.ineq_G.shape[0])
        out += [c.tag for c in self.socs] + [c.tag for c in self.quads]
        return out

    def dump(self) -> str:
        """One constraint per line, for cross-checking with external tools."""
        def row(vec):
            vec = sp.csr_matrix(vec)
            return " ".join(f"{j}:{v:.17g}" for j, v in zip(vec.indices, vec.data))

        lines = [f"vars {self.num_vars}", "maximize " + row(self.objective.reshape(1, -1))]
        for i in range(self.eq_A.shape[0]):
            lines.append(f"eq {row(self.eq_A[i])} = {self.eq_b[i]:.17g}")
        for i in range(self.ineq_G.shape[0]):
            lines.append(f"le {row(self.ineq_G[i])} <= {self.ineq_h[i]:.17g}")
        for con in self.socs:
            parts = " | ".join(f"{row(con.A[i])} + {con.b[i]:.17g}" for i in range(con.A.shape[0]))
            lines.append(f"soc [{parts}] <= {row(con.c.reshape(1, -1))} + {con.d:.17g}")
        for con in self.quads:
            qc = sp.coo_matrix(con.Q)
            quad = " ".join(f"{i},{j}:{v:.17g}" for i, j, v in zip(qc.row, qc.col, qc.data))
            lines.append(f"quad [{quad}] + {row(con.q.reshape(1, -1))} <= {con.r:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class Solution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    max_violation: float
    iterations: int
    gap: float = np.nan
    infeasibility_log: list = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _linear_block(M, v, n, what):
    if M is None:
        M = sp.csr_matrix((0, n))
        v = np.zeros(0)
    M = sp.csr_matrix(M, dtype=float)
    v = np.asarray(v, dtype=float).ravel()
    if M.shape[1] != n or M.shape[0] != v.size:
        raise ProgramError(f"{what} block has inconsistent dimensions")
    return M, v


def _factor_psd(Q, tol=1e-8):
    """Return (support, F) with Q = F' F restricted to its support columns."""
    Q = sp.coo_matrix(Q)
    support = np.unique(np.concatenate([Q.row, Q.col]))
    if support.size == 0:
        return support, np.zeros((0, 0))
    pos = {int(j): i for i, j in enumerate(support)}
    block = np.zeros((support.size, support.size))
    np.add.at(block, ([pos[int(i)] for i in Q.row], [pos[int(j)] for j in Q.col]), Q.data)
    block = 0.5 * (block + block.T)
    w, V = np.linalg.eigh(block)
    scale = max(1.0, np.abs(w).max())
    if w.min() < -tol * scale:
        raise ProgramError(f"quadratic form is not positive semidefinite (min eigenvalue {w.min():.3e})")
    keep = w > tol * scale
    F = (np.sqrt(w[keep])[:, None] * V[:, keep].T)
    return support, F


# ---------------------------------------------------------------------------
# standard conic form: min c'x  s.t.  A x = b,  G x + s = h,  s in K
# K = nonnegative orthant (dim l) x product of second-order cones.


class _Cones:
    def __init__(self, l, soc_dims):
        self.l = l
        self.soc_dims = list(soc_dims)
        self.m = l + sum(self.soc_dims)
        self.degree = l + len(self.soc_dims)
        # group cones of equal dimension so every operation is vectorised
        self.groups = {}
        off = l
        starts = {}
        for k in self.soc_dims:
            starts.setdefault(k, []).append(off)
            off += k
        for k, st in starts.items():
            self.groups[k] = np.asarray(st)[:, None] + np.arange(k)[None, :]

    def identity(self):
        e = np.zeros(self.m)
        e[: self.l] = 1.0
        for idx in self.groups.values():
            e[idx[:, 0]] = 1.0
        return e

    def min_eig(self, u):
        vals = [u[: self.l]]
        for idx in self.groups.values():
            blk = u[idx]
            vals.append(blk[:, 0] - np.linalg.norm(blk[:, 1:], axis=1))
        vals = np.concatenate(vals)
        return vals.min() if vals.size else 1.0

    def dot(self, u, v):
        return float(u @ v)

    def prod(self, u, v):
        """Jordan product u o v."""
        out = np.empty_like(u)
        out[: self.l] = u[: self.l] * v[: self.l]
        for idx in self.groups.values():
            a, b = u[idx], v[idx]
            out[idx[:, 0]] = np.sum(a * b, axis=1)
            out[idx[:, 1:]] = a[:, :1] * b[:, 1:] + b[:, :1] * a[:, 1:]
        return out

    def div(self, lam, v):
        """Solve lam o x = v for x."""
        out = np.empty_like(v)
        out[: self.l] = v[: self.l] / lam[: self.l]
        for idx in self.groups.values():
            a, b = lam[idx], v[idx]
            a0, a1 = a[:, 0], a[:, 1:]
            det = a0**2 - np.sum(a1 * a1, axis=1)
            x0 = (a0 * b[:, 0] - np.sum(a1 * b[:, 1:], axis=1)) / det
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (b[:, 1:] - x0[:, None] * a1) / a0[:, None]
        return out

    def max_step(self, u, d):
        """Largest t with u + t d in the cone (u interior); inf if unbounded."""
        t = np.inf
        lin_d = d[: self.l]
        neg = lin_d < 0
        if neg.any():
            t = min(t, np.min(-u[: self.l][neg] / lin_d[neg]))
        for idx in self.groups.values():
            a, b = u[idx], d[idx]
            u0, u1, d0, d1 = a[:, 0], a[:, 1:], b[:, 0], b[:, 1:]
            nd1 = np.linalg.norm(d1, axis=1)
            inside = d0 >= nd1
            qa = (d0 - nd1) * (d0 + nd1)
            qb = u0 * d0 - np.sum(u1 * d1, axis=1)
            nu1 = np.linalg.norm(u1, axis=1)
            qc = (u0 - nu1) * (u0 + nu1)
            disc = np.maximum(qb * qb - qa * qc, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                q = -(qb + np.where(qb >= 0, 1.0, -1.0) * np.sqrt(disc))
                r1 = np.where(qa != 0, q / qa, np.inf)
                r2 = np.where(q != 0, qc / q, np.inf)
            r1 = np.where(r1 > 0, r1, np.inf)
            r2 = np.where(r2 > 0, r2, np.inf)
            root = np.minimum(r1, r2)
            with np.errstate(divide="ignore"):
                apex = np.where(d0 < 0, -u0 / np.where(d0 < 0, d0, -1.0), np.inf)
            root = np.minimum(root, apex)
            root = np.where(inside, np.inf, root)
            if root.size:
                t = min(t, float(root.min()))
        return t

    def nt_scaling(self, s, z):
        """Nesterov-Todd scaling data; W is symmetric per block."""
        lin_w = np.sqrt(s[: self.l] / z[: self.l])
        blocks = {}
        for k, idx in self.groups.items():
            S, Z = s[idx], z[idx]
            sn = np.sqrt((S[:, 0] - np.linalg.norm(S[:, 1:], axis=1)) * (S[:, 0] + np.linalg.norm(S[:, 1:], axis=1)))
            zn = np.sqrt((Z[:, 0] - np.linalg.norm(Z[:, 1:], axis=1)) * (Z[:, 0] + np.linalg.norm(Z[:, 1:], axis=1)))
            sb = S / sn[:, None]
            zb = Z / zn[:, None]
            gam = np.sqrt(0.5 * (1.0 + np.sum(sb * zb, axis=1)))
            w = np.empty_like(sb)
            w[:, 0] = (sb[:, 0] + zb[:, 0]) / (2 * gam)
            w[:, 1:] = (sb[:, 1:] - zb[:, 1:]) / (2 * gam[:, None])
            eta = np.sqrt(sn / zn)
            blocks[k] = (w, eta)
        return lin_w, blocks

    def apply_w(self, scaling, v, inverse=False):
        lin_w, blocks = scaling
        out = np.empty_like(v)
        out[: self.l] = v[: self.l] / lin_w if inverse else v[: self.l] * lin_w
        for k, idx in self.groups.items():
            w, eta = blocks[k]
            V = v[idx]
            w0, w1 = w[:, 0], w[:, 1:]
            wv = np.sum(w1 * V[:, 1:], axis=1)
            sign = -1.0 if inverse else 1.0
            f = eta if not inverse else 1.0 / eta
            out[idx[:, 0]] = f * (w0 * V[:, 0] + sign * wv)
            coef = sign * V[:, 0] + wv / (1.0 + w0)
            out[idx[:, 1:]] = f[:, None] * (V[:, 1:] + coef[:, None] * w1)
        return out

    def w_squared_blocks(self, scaling):
        """Data of W'W: orthant diagonal and dense per-cone blocks."""
        lin_w, blocks = scaling
        dense = {}
        for k, (w, eta) in blocks.items():
            w0, w1 = w[:, 0], w[:, 1:]
            n = w.shape[0]
            Wm = np.zeros((n, k, k))
            Wm[:, 0, 0] = w0
            Wm[:, 0, 1:] = w1
            Wm[:, 1:, 0] = w1
            Wm[:, 1:, 1:] = np.eye(k - 1)[None] + w1[:, :, None] * w1[:, None, :] / (1.0 + w0)[:, None, None]
            Wm *= eta[:, None, None]
            dense[k] = Wm @ Wm
        return lin_w**2, dense


@dataclass
class _Standard:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    cones: _Cones
    col_scale: np.ndarray
    row_scale_A: np.ndarray
    row_scale_G: np.ndarray


def _to_standard(prog: ConeProgram) -> _Standard:
    n = prog.num_vars
    lin = prog.ineq_G.tocoo()
    rows, cols, vals = [lin.row], [lin.col], [lin.data]
    h_parts, soc_dims = [prog.ineq_h], []
    off = lin.shape[0]

    def put(r, c, v):
        rows.append(np.asarray(r, dtype=int) + off)
        cols.append(np.asarray(c, dtype=int))
        vals.append(np.asarray(v, dtype=float))

    for con in prog.socs:
        # s = (c'x + d, A x + b) - G x with G = -(c'; A)
        nz = np.flatnonzero(con.c)
        put(np.zeros(nz.size), nz, -con.c[nz])
        Ac = con.A.tocoo()
        put(Ac.row + 1, Ac.col, -Ac.data)
        h_parts.append(np.concatenate([[con.d], con.b]))
        soc_dims.append(con.A.shape[0] + 1)
        off += con.A.shape[0] + 1
    for con in prog.quads:
        support, F = getattr(con, "_psd", None) or _factor_psd(con.Q)
        rank = F.shape[0]
        # complete the square on the range of Q: x'Qx + q'x = ||F x + g||^2 - ||g||^2 + q_perp'x
        q_s = con.q[support]
        g = np.linalg.lstsq(F.T, 0.5 * q_s, rcond=None)[0] if rank else np.zeros(0)
        q_perp = con.q.copy()
        if rank:
            q_perp[support] -= 2.0 * F.T @ g
        rr = con.r + g @ g
        # ||F x + g||^2 <= rr - q_perp'x  <=>  ||(2(Fx+g), t-1)|| <= t+1 with t = rr - q_perp'x
        nz = np.flatnonzero(q_perp)
        put(np.zeros(nz.size), nz, q_perp[nz])
        put(np.full(nz.size, rank + 1), nz, q_perp[nz])
        put(1 + np.repeat(np.arange(rank), support.size), np.tile(support, rank), -2.0 * F.ravel())
        h_parts.append(np.concatenate([[rr + 1.0], 2.0 * g, [rr - 1.0]]))
        soc_dims.append(rank + 2)
        off += rank + 2
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(off, n))
    h = np.concatenate(h_parts)
    cones = _Cones(prog.ineq_G.shape[0], soc_dims)
    A, b = prog.eq_A.tocsr(), prog.eq_b.copy()
    c = -prog.objective

    # Ruiz equilibration; rows of one cone share a factor to keep the cone intact
    D = np.ones(n)
    EA = np.ones(A.shape[0])
    EG = np.ones(G.shape[0])
    As, Gs = A.copy(), G.copy()
    block_id = np.concatenate([np.arange(cones.l),
                               np.repeat(np.arange(len(soc_dims)) + cones.l, soc_dims).astype(int)])
    nblocks = cones.l + len(soc_dims)
    for _ in range(10):
        colmax = np.maximum(abs(As).max(axis=0).toarray().ravel() if As.shape[0] else 0,
                            abs(Gs).max(axis=0).toarray().ravel() if Gs.shape[0] else 0)
        colmax = np.where(colmax > 0, colmax, 1.0)
        dcol = 1.0 / np.sqrt(colmax)
        rowA = abs(As).max(axis=1).toarray().ravel() if As.shape[0] else np.zeros(0)
        eA = 1.0 / np.sqrt(np.where(rowA > 0, rowA, 1.0))
        rowG = abs(Gs).max(axis=1).toarray().ravel() if Gs.shape[0] else np.zeros(0)
        bmax = np.zeros(nblocks)
        np.maximum.at(bmax, block_id, rowG)
        eG = (1.0 / np.sqrt(np.where(bmax > 0, bmax, 1.0)))[block_id]
        As = sp.diags(eA) @ As @ sp.diags(dcol)
        Gs = sp.diags(eG) @ Gs @ sp.diags(dcol)
        D *= dcol
        EA *= eA
        EG *= eG
        if np.all(np.abs(colmax - 1) < 0.1):
            break
    return _Standard(D * c, As.tocsr(), EA * b, Gs.tocsr(), EG * h, cones, D, EA, EG)


class _Kkt:
    """Sparse factorisation of [[0, A', G'], [A, 0, 0], [G, 0, -W'W]]."""

    def __init__(self, std: _Standard, delta=1e-9, refine=3):
        self.std = std
        self.n, self.p, self.m = std.A.shape[1], std.A.shape[0], std.G.shape[0]
        self.delta = delta
        self.refine = refine
        n, p = self.n, self.p
        top = sp.bmat([[None, std.A.T, std.G.T], [std.A, None, None], [std.G, None, None]],
                      format="coo", dtype=float) if (p or self.m) else sp.coo_matrix((n, n))
        N = n + p + self.m
        top = sp.coo_matrix(top, shape=(N, N))
        self.static = top
        # index pattern of the -W'W block
        cones = std.cones
        off = n + p
        rows = [off + np.arange(cones.l)]
        cols = [off + np.arange(cones.l)]
        for k, idx in cones.groups.items():
            rows.append((off + idx[:, :, None] + 0 * idx[:, None, :]).ravel())
            cols.append((off + idx[:, None, :] + 0 * idx[:, :, None]).ravel())
        self.w_rows = np.concatenate(rows)
        self.w_cols = np.concatenate(cols)
        self.N = N

    def factor(self, scaling):
        cones = self.std.cones
        lin, dense = cones.w_squared_blocks(scaling)
        data = [lin] + [dense[k].ravel() for k in cones.groups]
        wdata = -np.concatenate(data)
        n, p, m = self.n, self.p, self.m
        ar = np.arange(self.N)
        self.K0 = sp.coo_matrix((np.concatenate([self.static.data, wdata]),
                                 (np.concatenate([self.static.row, self.w_rows]),
                                  np.concatenate([self.static.col, self.w_cols]))),
                                shape=(self.N, self.N)).tocsc()
        # diagonal pivots suit the quasi-definite system; near convergence the
        # scaling spans many decades and a pivot can cancel, so escalate
        attempts = [(self.delta * 10.0**k, 0.0) for k in (0, 2, 4)] + [(self.delta, 1.0)]
        for i, (delta, thresh) in enumerate(attempts):
            reg = np.concatenate([np.full(n, delta), np.full(p + m, -delta)])
            Kreg = (self.K0 + sp.csc_matrix((reg, (ar, ar)), shape=(self.N, self.N))).tocsc()
            try:
                self.lu = spla.splu(Kreg, permc_spec="COLAMD", diag_pivot_thresh=thresh,
                                    options={"SymmetricMode": thresh == 0.0})
                return
            except RuntimeError:
                if i == len(attempts) - 1:
                    raise

    def solve(self, rhs):
        x = self.lu.solve(rhs)
        for _ in range(self.refine):
            r = rhs - self.K0 @ x
            if np.linalg.norm(r, np.inf) <= 1e-14 * max(1.0, np.linalg.norm(rhs, np.inf)):
                break
            x = x + self.lu.solve(r)
        return x


def solve(prog: ConeProgram, tol: float = 1e-8, max_iters: int = 100,
          feastol: Optional[float] = None) -> Solution:
    """Solve ``prog`` to relative accuracy ``tol``.

    The result is deterministic for identical inputs. ``infeasibility_log``
    records the norm of the embedding residual per iteration; it shrinks by
    the factor (1 - step*(1 - sigma)) every iteration.
    """
    feastol = tol if feastol is None else feastol
    std = _to_standard(prog)
    c, A, b, G, h, cones = std.c, std.A, std.b, std.G, std.h, std.cones
    n, p, m = A.shape[1], A.shape[0], G.shape[0]
    e = cones.identity()
    kkt = _Kkt(std)

    def split(v):
        return v[:n], v[n:n + p], v[n + p:]

    try:
        ident = cones.nt_scaling(e, e)
        kkt.factor(ident)
        x, _, z0 = split(kkt.solve(np.concatenate([np.zeros(n), b, h])))
        s = -z0
        a_p = -cones.min_eig(s)
        if a_p >= 0:
            s = s + (1.0 + a_p) * e
        _, y, z = split(kkt.solve(np.concatenate([-c, np.zeros(p), np.zeros(m)])))
        a_d = -cones.min_eig(z)
        if a_d >= 0:
            z = z + (1.0 + a_d) * e
    except RuntimeError as exc:
        return Solution(NUMERICAL, None, np.nan, np.inf, 0, message=f"initial factorisation failed: {exc}")

    tau, kappa = 1.0, 1.0
    nb = max(1.0, np.linalg.norm(b), np.linalg.norm(h))
    nc = max(1.0, np.linalg.norm(c))
    res_log = []
    status, it = MAX_ITER, 0
    best = None
    for it in range(max_iters + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        rtau = c @ x + b @ y + h @ z + kappa
        res_log.append(float(np.sqrt(rx @ rx + ry @ ry + rz @ rz + rtau**2)))

        pcost = c @ x / tau
        dcost = -(b @ y + h @ z) / tau
        pres = np.sqrt(ry @ ry + rz @ rz) / tau / nb
        dres = np.linalg.norm(rx) / tau / nc
        gap = s @ z / tau**2
        relgap = gap / max(1e-12, min(abs(pcost), abs(dcost))) if pcost * dcost > 0 else np.inf
        log.debug("it %d pcost %.6e dcost %.6e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e",
                  it, pcost, dcost, gap, pres, dres, tau, kappa)
        if pres <= feastol and dres <= feastol and (gap <= tol or relgap <= tol):
            status = OPTIMAL
            break
        hz = h @ z + b @ y
        if hz < 0:
            cert = np.linalg.norm(A.T @ y + G.T @ z) / -hz
            if cert <= feastol:
                status = INFEASIBLE
                break
        cx = c @ x
        if cx < 0:
            cert = max(np.linalg.norm(A @ x), np.linalg.norm(G @ x + s)) / -cx
            if cert <= feastol:
                status = UNBOUNDED
                break
        if pres <= 10 * feastol and dres <= 10 * feastol and (gap <= 10 * tol or relgap <= 10 * tol):
            best = (x / tau, y / tau, z / tau, s / tau)
        if it == max_iters:
            break

        try:
            scaling = cones.nt_scaling(s, z)
            lam = cones.apply_w(scaling, z)
            kkt.factor(scaling)
        except (RuntimeError, FloatingPointError, ValueError) as exc:
            status = NUMERICAL
            log.debug("factorisation failed: %s", exc)
            break
        sol1 = kkt.solve(np.concatenate([-c, b, h]))
        dx1, dy1, dz1 = split(sol1)
        denom1 = c @ dx1 + b @ dy1 + h @ dz1
        mu = (s @ z + tau * kappa) / (cones.degree + 1)

        def direction(sigma, ds_term, dk_term):
            rhs = np.concatenate([-(1 - sigma) * rx, -(1 - sigma) * ry,
                                  -(1 - sigma) * rz + cones.apply_w(scaling, cones.div(lam, ds_term))])
            dx2, dy2, dz2 = split(kkt.solve(rhs))
            dtau = ((-(1 - sigma) * rtau + dk_term / tau - (c @ dx2 + b @ dy2 + h @ dz2))
                    / (denom1 - kappa / tau))
            dx = dx2 + dtau * dx1
            dy = dy2 + dtau * dy1
            dz = dz2 + dtau * dz1
            ds = -cones.apply_w(scaling, cones.div(lam, ds_term) + cones.apply_w(scaling, dz))
            dkappa = -(dk_term + kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def step_length(dz, ds, dtau, dkappa):
            t = min(cones.max_step(s, ds), cones.max_step(z, dz))
            if dtau < 0:
                t = min(t, -tau / dtau)
            if dkappa < 0:
                t = min(t, -kappa / dkappa)
            return t

        # predictor
        lam2 = cones.prod(lam, lam)
        dxa, dya, dza, dsa, dtaua, dkapa = direction(0.0, lam2, tau * kappa)
        alpha_a = min(1.0, step_length(dza, dsa, dtaua, dkapa))
        sigma = min(1.0, max(0.0, (1.0 - alpha_a))) ** 3
        # corrector
        corr = cones.prod(cones.apply_w(scaling, dsa, inverse=True), cones.apply_w(scaling, dza))
        ds_term = lam2 + corr - sigma * mu * e
        dk_term = tau * kappa + dkapa * dtaua - sigma * mu
        dx, dy, dz, ds, dtau, dkappa = direction(sigma, ds_term, dk_term)
        alpha = min(1.0, 0.99 * step_length(dz, ds, dtau, dkappa))
        if not np.isfinite(alpha) or alpha <= 1e-12:
            status = NUMERICAL
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            status = NUMERICAL
            break

    if status == OPTIMAL:
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
    elif status in (MAX_ITER, NUMERICAL) and best is not None:
        xs, ys, zs, ss = best
        status = OPTIMAL
    elif status in (INFEASIBLE, UNBOUNDED):
        x_out = std.col_scale * x if status == UNBOUNDED else None
        return Solution(status, x_out, np.nan, np.inf, it, infeasibility_log=res_log)
    else:
        xs = x / tau
        x_orig = std.col_scale * xs
        return Solution(status, x_orig, float(prog.objective @ x_orig),
                        max_violation(prog, x_orig), it, infeasibility_log=res_log)
    x_orig = std.col_scale * xs
    return Solution(status, x_orig, float(prog.objective @ x_orig), max_violation(prog, x_orig),
                    it, gap=float(ss @ zs), infeasibility_log=res_log)


def max_violation(prog: ConeProgram, x: np.ndarray) -> float:
    """Largest constraint violation of ``x``, evaluated from the program data."""
    from .verify import constraint_violations

    v = constraint_violations(prog, x)
    return max((val for val in v.values()), default=0.0)
