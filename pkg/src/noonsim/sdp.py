"""Small dense semidefinite-program solver.

minimize / maximize   Tr(C rho)
subject to            Tr(A_k rho)  =  b_k
                      lo_k <= Tr(A_k rho) <= hi_k
                      rho >= 0 (Hermitian PSD)

Hermitian data is mapped to the real symmetric cone via the standard
embedding [[Re, -Im], [Im, Re]]; band constraints become equalities with
two nonnegative slack variables each.  The canonical problem (one real
symmetric block plus one nonnegative orthant block) is solved with a
primal-dual path-following interior-point method using Nesterov-Todd
scaling and a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, qr, solve_triangular

GAP_ABS_TOL = 1e-8
GAP_REL_TOL = 1e-6
RESIDUAL_TOL = 1e-9
MAX_ITERATIONS = 200
STEP_FRACTION = 0.98


class SdpError(ValueError):
    """Raised for malformed problem data."""


def embed_hermitian(A: np.ndarray) -> np.ndarray:
    """Real symmetric 2d x 2d embedding [[Re A, -Im A], [Im A, Re A]].

    Preserves PSD-ness; doubles traces and Hilbert-Schmidt inner products.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SdpError("embedding requires a square matrix")
    if np.max(np.abs(A - A.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise SdpError("embedding requires a Hermitian matrix")
    R, I = A.real, A.imag
    return np.block([[R, -I], [I, R]])


def unembed_hermitian(X: np.ndarray) -> np.ndarray:
    """Recover the Hermitian matrix whose embedding averages to X."""
    d = X.shape[0] // 2
    P = 0.5 * (X[:d, :d] + X[d:, d:])
    Q = 0.5 * (X[d:, :d] - X[:d, d:])
    H = P + 1j * Q
    return 0.5 * (H + H.conj().T)


@dataclass(frozen=True)
class SdpProblem:
    """Linear objective and affine trace constraints over Hermitian PSD matrices."""

    dimension: int
    objective: np.ndarray
    equalities: tuple = ()
    bands: tuple = ()
    sense: str = "minimize"

    def __post_init__(self):
        if self.sense not in ("minimize", "maximize"):
            raise SdpError(f"unknown sense {self.sense!r}")
        d = self.dimension
        for M in [self.objective] + [a for a, _ in self.equalities] + [a for a, *_ in self.bands]:
            M = np.asarray(M)
            if M.shape != (d, d):
                raise SdpError("constraint/objective dimension mismatch")
        for _, lo, hi in self.bands:
            if lo > hi:
                raise SdpError("band with lo > hi")


@dataclass(frozen=True)
class SdpSolution:
    """Certified solver output."""

    rho: np.ndarray | None
    objective: float
    dual_objective: float
    gap: float
    status: str
    iterations: int


# ---------------------------------------------------------------------------
# symmetric vectorization (svec): inner products of matrices become dot
# products of coordinate vectors


def _svec_indices(n: int):
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return iu, scale


def svec(M: np.ndarray, cache={}) -> np.ndarray:
    n = M.shape[0]
    if n not in cache:
        cache[n] = _svec_indices(n)
    iu, scale = cache[n]
    return M[iu] * scale


def unsvec(v: np.ndarray, n: int, cache={}) -> np.ndarray:
    if n not in cache:
        cache[n] = _svec_indices(n)
    iu, scale = cache[n]
    M = np.zeros((n, n), dtype=v.dtype)
    M[iu] = v / scale
    M = M + M.T
    M[np.diag_indices(n)] *= 0.5
    return M


def _unsvec_batch(V: np.ndarray, n: int) -> np.ndarray:
    iu, scale = _svec_indices(n)
    out = np.zeros((V.shape[0], n, n), dtype=V.dtype)
    out[:, iu[0], iu[1]] = V / scale
    out = out + out.transpose(0, 2, 1)
    out[:, np.arange(n), np.arange(n)] *= 0.5
    return out


def _svec_batch(T: np.ndarray) -> np.ndarray:
    n = T.shape[1]
    iu, scale = _svec_indices(n)
    return T[:, iu[0], iu[1]] * scale


# ---------------------------------------------------------------------------
# canonical cone solver


def _nt_scaling(X: np.ndarray, S: np.ndarray) -> np.ndarray:
    """W with W S W = X (geometric mean of X and inv(S))."""
    wx, vx = np.linalg.eigh(X)
    wx = np.clip(wx, 1e-300, None)
    Xh = (vx * np.sqrt(wx)) @ vx.T
    mid = Xh @ S @ Xh
    wm, vm = np.linalg.eigh(0.5 * (mid + mid.T))
    wm = np.clip(wm, 1e-300, None)
    mid_inv_sqrt = (vm / np.sqrt(np.sqrt(wm))) @ vm.T
    W = Xh @ (mid_inv_sqrt @ mid_inv_sqrt.T) @ Xh
    return 0.5 * (W + W.T)


def _max_step_sym(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha*dX PSD (X assumed PD)."""
    try:
        L = cholesky(X, lower=True)
        T = solve_triangular(L, dX, lower=True)
        T = solve_triangular(L, T.T, lower=True)
    except np.linalg.LinAlgError:
        # nearly singular X: factor through a clipped eigendecomposition
        w, v = np.linalg.eigh(X)
        w = np.clip(w, 1e-30 * max(w.max(), 1e-30), None)
        R = v / np.sqrt(w)
        T = R.T @ dX @ R
    lam = np.linalg.eigvalsh(0.5 * (T + T.T)).min()
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Canonical:
    """minimize <c, x> with one symmetric block and one LP block."""

    def __init__(self, Cs, cl, Asv, Alp, b, xl0=None):
        self.Cs, self.cl = Cs, cl
        self.Asv, self.Alp, self.b = Asv, Alp, b
        self.n = Cs.shape[0]
        self.m = Asv.shape[0]
        self.nl = cl.size
        self.xl0 = xl0

    def apply(self, Xs, xl):
        out = self.Asv @ svec(Xs)
        if self.nl:
            out = out + self.Alp @ xl
        return out

    def adjoint(self, y):
        M = unsvec(self.Asv.T @ y, self.n)
        v = self.Alp.T @ y if self.nl else np.zeros(0)
        return M, v

    def schur(self, W, wl2, chunk=256):
        M = np.zeros((self.m, self.m))
        for lo in range(0, self.m, chunk):
            hi = min(lo + chunk, self.m)
            T = _unsvec_batch(self.Asv[lo:hi], self.n)
            T = np.einsum('ij,mjk,kl->mil', W, T, W, optimize=True)
            M[lo:hi] = _svec_batch(T) @ self.Asv.T
        if self.nl:
            M += (self.Alp * wl2) @ self.Alp.T
        return 0.5 * (M + M.T)

    def solve(self, max_iterations=MAX_ITERATIONS):
        n, m, nl = self.n, self.m, self.nl
        nu = n + nl
        Xs = np.eye(n)
        xl = np.ones(nl) if self.xl0 is None else self.xl0.copy()
        Ss = np.eye(n)
        sl = np.ones(nl)
        y = np.zeros(m)
        bnorm = 1.0 + np.linalg.norm(self.b)
        cnorm = 1.0 + math.sqrt(np.linalg.norm(self.Cs) ** 2 + np.linalg.norm(self.cl) ** 2)
        status = "max_iterations"
        it = 0
        best = None
        best_merit = np.inf
        since_best = 0
        for it in range(1, max_iterations + 1):
            rp = self.b - self.apply(Xs, xl)
            AtyS, atyl = self.adjoint(y)
            RdS = self.Cs - Ss - AtyS
            rdl = self.cl - sl - atyl
            gap = float(np.sum(Xs * Ss) + xl @ sl)
            mu = gap / nu
            pobj = float(np.sum(self.Cs * Xs) + self.cl @ xl)
            dobj = float(self.b @ y)
            rp_norm = np.linalg.norm(rp) / bnorm
            rd_norm = math.sqrt(np.linalg.norm(RdS) ** 2 + np.linalg.norm(rdl) ** 2) / cnorm
            merit = max(rp_norm, rd_norm, gap / (1.0 + abs(pobj)))
            if np.isfinite(merit) and merit < best_merit:
                best_merit = merit
                best = (Xs.copy(), xl.copy(), y.copy(), pobj, dobj, gap,
                        rp_norm, rd_norm)
                since_best = 0
            else:
                since_best += 1
            if rp_norm <= RESIDUAL_TOL and rd_norm <= RESIDUAL_TOL and (
                    gap <= GAP_ABS_TOL):
                status = "optimal"
                best = (Xs, xl, y, pobj, dobj, gap, rp_norm, rd_norm)
                break
            if since_best >= 8:
                break  # numerically stuck; fall back to the best iterate
            if not np.isfinite(mu) or np.linalg.norm(y) > 1e12 or mu > 1e12:
                status = "infeasible"
                break

            W = _nt_scaling(Xs, Ss)
            wl2 = xl / sl if nl else np.zeros(0)
            M = self.schur(W, wl2)
            base = np.finfo(float).eps * max(1.0, float(np.trace(M)) / m)
            jitter = 0.0
            for _ in range(10):
                try:
                    F = cho_factor(M + jitter * np.eye(m), lower=True)
                    break
                except (np.linalg.LinAlgError, ValueError):
                    jitter = base if jitter == 0.0 else 100.0 * jitter
            else:
                status = "max_iterations"
                break

            Sinv_w, Sinv_v = np.linalg.eigh(Ss)
            Sinv = (Sinv_v / Sinv_w) @ Sinv_v.T

            def directions(RcS, rcl):
                rhs = rp - self.Asv @ svec(RcS) + self.Asv @ svec(W @ RdS @ W)
                if nl:
                    rhs = rhs - self.Alp @ rcl + self.Alp @ (wl2 * rdl)
                dy = cho_solve(F, rhs)
                dy += cho_solve(F, rhs - M @ dy)  # one refinement step
                dAtyS, datyl = self.adjoint(dy)
                dSs = RdS - dAtyS
                dsl = rdl - datyl
                dXs = RcS - W @ dSs @ W
                dXs = 0.5 * (dXs + dXs.T)
                dxl = rcl - wl2 * dsl if nl else np.zeros(0)
                return dXs, dxl, dy, dSs, dsl

            # predictor (affine scaling)
            dXa, dxa, dya, dSa, dsa = directions(-Xs, -xl)
            ap = min(1.0, _max_step_sym(Xs, dXa),
                     _max_step_lp(xl, dxa) if nl else np.inf)
            ad = min(1.0, _max_step_sym(Ss, dSa),
                     _max_step_lp(sl, dsa) if nl else np.inf)
            gap_aff = (np.sum((Xs + ap * dXa) * (Ss + ad * dSa)) +
                       ((xl + ap * dxa) @ (sl + ad * dsa) if nl else 0.0))
            sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

            # corrector
            corr = dXa @ dSa @ Sinv
            RcS = sigma * mu * Sinv - Xs - 0.5 * (corr + corr.T)
            rcl = (sigma * mu - dxa * dsa) / sl - xl if nl else np.zeros(0)
            dXs, dxl, dy, dSs, dsl = directions(RcS, rcl)

            ap = STEP_FRACTION * min(1.0 / STEP_FRACTION, _max_step_sym(Xs, dXs),
                                     _max_step_lp(xl, dxl) if nl else np.inf)
            ad = STEP_FRACTION * min(1.0 / STEP_FRACTION, _max_step_sym(Ss, dSs),
                                     _max_step_lp(sl, dsl) if nl else np.inf)
            Xs = Xs + ap * dXs
            xl = xl + ap * dxl
            Ss = Ss + ad * dSs
            sl = sl + ad * dsl
            y = y + ad * dy
        if best is None:
            best = (Xs, xl, y,
                    float(np.sum(self.Cs * Xs) + self.cl @ xl),
                    float(self.b @ y),
                    float(np.sum(Xs * Ss) + (xl @ sl if nl else 0.0)),
                    np.inf, np.inf)
        Xs, xl, y, pobj, dobj, gap, rp_norm, rd_norm = best
        if status != "infeasible":
            if rp_norm <= 1e-7 and rd_norm <= 1e-7 and (
                    gap <= GAP_ABS_TOL or gap <= GAP_REL_TOL * (1.0 + abs(pobj))):
                status = "optimal"
            elif status == "optimal":
                pass
            else:
                status = "max_iterations"
        return Xs, xl, y, pobj, dobj, gap, status, it


# ---------------------------------------------------------------------------
# reduction of dependent constraints


def _reduce_constraints(rows: np.ndarray, b: np.ndarray):
    """Drop linearly dependent rows; detect inconsistent systems.

    Returns (kept_indices, consistent).
    """
    m = rows.shape[0]
    if m == 0:
        return np.arange(0), True
    _, R, piv = qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(rows.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    if rank == m:
        return keep, True
    # dropped rows must be consistent with the kept ones
    coef, *_ = np.linalg.lstsq(rows[keep].T, rows.T, rcond=None)
    b_pred = coef.T @ b[keep]
    consistent = bool(np.allclose(b_pred, b, atol=1e-8, rtol=1e-8))
    return keep, consistent


def solve(problem: SdpProblem, max_iterations: int = MAX_ITERATIONS) -> SdpSolution:
    """Solve the Hermitian SDP via its real symmetric embedding."""
    d = problem.dimension
    sign = 1.0 if problem.sense == "minimize" else -1.0
    # data scaled by 1/2 so real inner products equal the Hermitian ones
    Cs = sign * 0.5 * embed_hermitian(problem.objective)
    n = 2 * d

    eqs = [(0.5 * embed_hermitian(A), float(bk)) for A, bk in problem.equalities]
    bands = []
    for A, lo, hi in problem.bands:
        if hi - lo <= 1e-14:
            eqs.append((0.5 * embed_hermitian(A), 0.5 * (lo + hi)))
        else:
            bands.append((0.5 * embed_hermitian(A), float(lo), float(hi)))

    nl = 2 * len(bands)
    m = len(eqs) + 2 * len(bands)
    ns = n * (n + 1) // 2
    Asv = np.zeros((m, ns))
    Alp = np.zeros((m, nl))
    b = np.zeros(m)
    for k, (A, bk) in enumerate(eqs):
        Asv[k] = svec(A)
        b[k] = bk
    base = len(eqs)
    for j, (A, lo, hi) in enumerate(bands):
        r = base + 2 * j
        Asv[r] = svec(A)          # <A, X> - u = lo
        Alp[r, 2 * j] = -1.0
        b[r] = lo
        Alp[r + 1, 2 * j] = 1.0   # u + v = hi - lo
        Alp[r + 1, 2 * j + 1] = 1.0
        b[r + 1] = hi - lo

    rows = np.hstack([Asv, Alp]) if nl else Asv
    keep, consistent = _reduce_constraints(rows, b)
    if not consistent:
        return SdpSolution(rho=None, objective=math.nan, dual_objective=math.nan,
                           gap=math.inf, status="infeasible", iterations=0)
    Asv, Alp, b = Asv[keep], Alp[keep], b[keep]

    widths = np.repeat([0.5 * (hi - lo) for _, lo, hi in bands], 2)
    xl0 = np.clip(widths, 1e-4, None) if nl else None
    canon = _Canonical(Cs, np.zeros(nl), Asv, Alp, b, xl0=xl0)
    Xs, _, _, pobj, dobj, gap, status, it = canon.solve(max_iterations)

    rho = unembed_hermitian(Xs)
    if status == "optimal":
        if np.linalg.eigvalsh(rho).min() < -1e-8:
            status = "max_iterations"
    return SdpSolution(rho=rho, objective=sign * pobj, dual_objective=sign * dobj,
                       gap=gap, status=status, iterations=it)
