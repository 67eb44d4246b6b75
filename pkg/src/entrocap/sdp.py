"""Dense primal-dual interior-point solver for complex Hermitian SDPs.

Standard form over a block-diagonal Hermitian variable ``X``::

    minimize    <C, X>
    subject to  <A_i, X> = b_i,   X >= 0

with dual ``maximize b.y  s.t.  C - sum_i y_i A_i >= 0``.  The iteration runs
on the homogeneous self-dual embedding, so infeasibility shows up as
``tau -> 0`` together with an improving ray.  Search directions use
Nesterov-Todd scaling and a Mehrotra predictor-corrector; the Schur
complement is factored with a dense Cholesky.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import linalg as la

log = logging.getLogger(__name__)


class SdpNumericalError(RuntimeError):
    def __init__(self, message: str, condition: float, best: "SdpSolution | None" = None):
        super().__init__(f"{message} (condition estimate {condition:.2e})")
        self.condition = condition
        self.best = best


@dataclass
class SolverTolerances:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    infeas_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98


@dataclass
class SdpProblem:
    """Block-diagonal SDP data.

    ``C[k]`` is the objective block ``k`` (n_k x n_k); ``A[k]`` stacks the
    constraint blocks with shape (m, n_k, n_k).
    """

    block_sizes: tuple[int, ...]
    C: list[np.ndarray]
    A: list[np.ndarray]
    b: np.ndarray
    sense: str = "min"
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.block_sizes = tuple(int(n) for n in self.block_sizes)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = self.b.size
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if len(self.C) != len(self.block_sizes) or len(self.A) != len(self.block_sizes):
            raise ValueError("block count mismatch")
        for n, c, a in zip(self.block_sizes, self.C, self.A):
            if c.shape != (n, n) or a.shape != (m, n, n):
                raise ValueError("block shape mismatch")
            if np.max(np.abs(c - c.conj().T), initial=0) > 1e-12 * max(1, np.max(np.abs(c), initial=0)):
                raise ValueError("objective block is not Hermitian")
            if m and np.max(np.abs(a - a.conj().transpose(0, 2, 1)), initial=0) > 1e-12 * max(1, np.max(np.abs(a), initial=0)):
                raise ValueError("constraint block is not Hermitian")

    @property
    def m(self) -> int:
        return self.b.size

    @classmethod
    def from_dense(cls, C: np.ndarray, constraints: Sequence[tuple[np.ndarray, float]], sense: str = "min") -> "SdpProblem":
        C = np.asarray(C, dtype=complex)
        n = C.shape[0]
        A = np.array([np.asarray(a, dtype=complex) for a, _ in constraints]).reshape(len(constraints), n, n)
        b = np.array([bi for _, bi in constraints], dtype=float)
        return cls((n,), [C], [A], b, sense)

    def scaled_constraints(self, factor: float) -> "SdpProblem":
        return SdpProblem(self.block_sizes, [c.copy() for c in self.C], [a * factor for a in self.A],
                          self.b * factor, self.sense, list(self.names))


@dataclass
class SdpSolution:
    X: list[np.ndarray]
    y: np.ndarray
    Z: list[np.ndarray]
    primal_obj: float
    dual_obj: float
    status: str  # optimal | infeasible | unbounded | max_iter
    gap: float
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    iterations: int = 0
    certificate_margin: float = float("nan")
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def value(self) -> float:
        return self.primal_obj


# ---------------------------------------------------------------------------
# block helpers


def _inner(a: list[np.ndarray], b: list[np.ndarray]) -> float:
    return float(sum(np.vdot(x, y).real for x, y in zip(a, b)))


def _op_A(A: list[np.ndarray], X: list[np.ndarray]) -> np.ndarray:
    # <A_i, X> = Re Tr(A_i X) = Re sum conj(A_i) * X for Hermitian A_i
    out = np.zeros(A[0].shape[0])
    for a, x in zip(A, X):
        out += np.einsum("mij,ij->m", a.conj(), x).real
    return out


def _op_At(A: list[np.ndarray], y: np.ndarray) -> list[np.ndarray]:
    return [np.einsum("m,mij->ij", y, a) for a in A]


def _fro(blocks: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.vdot(b, b).real for b in blocks)))


def _factor(x: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(la.herm(x))
        return v * np.sqrt(np.clip(w, 1e-300, None))


def _max_step(lam: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha d >= 0."""
    s = 1.0 / np.sqrt(lam)
    m = la.herm(s[:, None] * d * s[None, :])
    w = np.linalg.eigvalsh(m)[0]
    return np.inf if w >= 0 else -1.0 / w


def _remove_dependent(A: list[np.ndarray], b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent constraints; detect inconsistent ones.

    Returns (kept_index, inconsistent_y or None, rank, n_real_dims).
    """
    m = b.size
    rows = np.concatenate([np.concatenate([a.reshape(m, -1).real, a.reshape(m, -1).imag], axis=1) for a in A], axis=1)
    nreal = sum(a.shape[1] ** 2 for a in A)  # real dimension of the Hermitian space
    if m == 0:
        return np.arange(0), None, 0, nreal
    q, r, piv = scipy.linalg.qr(rows.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > tol * max(d[0], 1e-300))) if d.size else 0
    kept = np.sort(piv[:rank])
    # consistency: b must lie in the row-space image
    sol, *_ = np.linalg.lstsq(rows, b, rcond=None)
    resid = b - rows @ sol
    if np.linalg.norm(resid) > 1e-9 * (1 + np.linalg.norm(b)):
        return kept, resid, rank, nreal
    return kept, None, rank, nreal


def solve(p: SdpProblem, tol: SolverTolerances | None = None, record_history: bool = False) -> SdpSolution:
    tol = tol or SolverTolerances()
    sign = 1.0 if p.sense == "min" else -1.0
    C = [sign * np.asarray(c, dtype=complex) for c in p.C]
    A_full = [np.asarray(a, dtype=complex) for a in p.A]
    b_full = p.b.copy()
    m_full = b_full.size
    nblocks = len(p.block_sizes)

    def finish(X, y_full, Z, status, gap, pres, dres, it, margin=float("nan"), hist=None):
        pobj = _inner(p.C, X)
        dobj = float(b_full @ y_full) if p.sense == "min" else float(b_full @ y_full)
        return SdpSolution(X, y_full, Z, pobj, dobj, status, gap, pres, dres, it, margin, hist or [])

    if m_full == 0:
        zeros = [np.zeros((n, n), dtype=complex) for n in p.block_sizes]
        if all(la.min_eig(c) >= -1e-12 for c in C):
            return finish(zeros, np.zeros(0), [sign * c for c in C], "optimal", 0.0, 0.0, 0.0, 0)
        return finish(zeros, np.zeros(0), zeros, "unbounded", np.inf, 0.0, np.inf, 0)

    kept, bad, rank, _ = _remove_dependent(A_full, b_full)
    if bad is not None:
        # A*(y) = 0 and b.y > 0: Farkas ray for primal infeasibility
        y_full = bad / np.linalg.norm(bad)
        margin = float(b_full @ y_full)
        zeros = [np.zeros((n, n), dtype=complex) for n in p.block_sizes]
        log.info("sdp: linearly inconsistent constraints, margin %.3e", margin)
        return finish(zeros, y_full, zeros, "infeasible", np.inf, np.inf, np.inf, 0, margin)

    A = [a[kept] for a in A_full]
    b = b_full[kept]
    # row normalization
    norms = np.sqrt(sum(np.einsum("mij,mij->m", a.conj(), a).real for a in A))
    norms = np.where(norms > 0, norms, 1.0)
    A = [a / norms[:, None, None] for a in A]
    b = b / norms
    m = b.size

    n_total = sum(p.block_sizes)
    nu = n_total + 1
    X = [np.eye(n, dtype=complex) for n in p.block_sizes]
    Z = [np.eye(n, dtype=complex) for n in p.block_sizes]
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    normb = 1 + np.linalg.norm(b)
    normC = 1 + _fro(C)
    hist: list[dict] = []
    best = None

    def unscale(yv):
        out = np.zeros(m_full)
        out[kept] = yv / norms
        return out

    for it in range(tol.max_iter + 1):
        AX = _op_A(A, X)
        Aty = _op_At(A, y)
        rp = AX - b * tau
        rd = [c * tau - aty - z for c, aty, z in zip(C, Aty, Z)]
        cx = _inner(C, X)
        by = float(b @ y)
        rg = by - cx - kappa
        xz = _inner(X, Z)
        mu = (xz + tau * kappa) / nu

        pres = np.linalg.norm(rp) / tau / normb
        dres = _fro(rd) / tau / normC
        pobj, dobj = cx / tau, by / tau
        gap = abs(pobj - dobj) / (1 + abs(pobj))
        if record_history:
            hist.append(dict(it=it, pobj=sign * pobj, dobj=sign * dobj, pres=pres, dres=dres,
                             tau=tau, kappa=kappa, mu=mu, corrected_gap=(xz + y @ rp + _inner(X, rd)) / tau ** 2))
        log.debug("sdp it=%d pobj=%.10g dobj=%.10g pres=%.2e dres=%.2e gap=%.2e tau=%.2e kappa=%.2e",
                  it, sign * pobj, sign * dobj, pres, dres, gap, tau, kappa)

        if pres <= tol.feas_tol and dres <= tol.feas_tol and gap <= tol.gap_tol:
            Xs = [x / tau for x in X]
            Zs = [sign * z / tau for z in Z]
            ys = sign * unscale(y / tau)
            return finish(Xs, ys, Zs, "optimal", gap, pres, dres, it, hist=hist)
        # primal infeasibility: -A*(y) = Z >= 0 with b.y > 0
        if by > 0:
            ray = _fro([aty + z for aty, z in zip(Aty, Z)])
            if ray <= tol.infeas_tol * by and tau <= 1e-6 * max(1.0, kappa) * 1e3:
                trz = sum(np.trace(z).real for z in Z)
                ys = unscale(y)
                margin = by / max(trz, 1e-300)
                ys = ys / max(trz, 1e-300)
                Zs = [z / max(trz, 1e-300) for z in Z]
                zeros = [np.zeros_like(x) for x in X]
                log.info("sdp: primal infeasible after %d iterations, margin %.3e", it, margin)
                return finish(zeros, ys, Zs, "infeasible", np.inf, pres, dres, it, margin, hist)
        if -cx > 0:
            ray = np.linalg.norm(AX)
            if ray <= tol.infeas_tol * (-cx) and tau <= 1e-6 * max(1.0, kappa) * 1e3:
                trx = sum(np.trace(x).real for x in X)
                Xs = [x / trx for x in X]
                return finish(Xs, np.zeros(m_full), [np.zeros_like(x) for x in X], "unbounded", np.inf,
                              pres, dres, it, -cx / trx, hist)
        if it == tol.max_iter:
            break

        # --- Nesterov-Todd scaling per block
        Rs, lams = [], []
        for x, z in zip(X, Z):
            lx, lz = _factor(x), _factor(z)
            u, s, vh = np.linalg.svd(lz.conj().T @ lx)
            r = lx @ vh.conj().T / np.sqrt(s)[None, :]
            Rs.append(r)
            lams.append(s)
        W = [r @ r.conj().T for r in Rs]

        # Schur complement
        M = np.zeros((m, m))
        for a, w in zip(A, W):
            t = np.matmul(np.matmul(w[None], a), w[None])
            M += (a.conj().reshape(m, -1) @ t.reshape(m, -1).T).real
        M = 0.5 * (M + M.T)
        try:
            cho = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
            msolve = lambda v: scipy.linalg.cho_solve(cho, v, check_finite=False)
        except np.linalg.LinAlgError:
            cond = np.linalg.cond(M)
            if not np.isfinite(cond) or cond > 1e15:
                best = finish([x / tau for x in X], sign * unscale(y / tau), [sign * z / tau for z in Z],
                              "max_iter", gap, pres, dres, it, hist=hist)
                raise SdpNumericalError("singular Schur complement", cond, best)
            lu = scipy.linalg.lu_factor(M)
            msolve = lambda v: scipy.linalg.lu_solve(lu, v)

        WCW = [w @ c @ w for w, c in zip(W, C)]
        u = _op_A(A, WCW)
        cwc = _inner(C, WCW)
        Wrd = [w @ r_ @ w for w, r_ in zip(W, rd)]
        A_Wrd = _op_A(A, Wrd)
        C_Wrd = _inner(C, Wrd)
        q = msolve(u + b)

        def direction(rc_blocks, r_tk, eta):
            H = []
            for lam, rc in zip(lams, rc_blocks):
                H.append(rc / (0.5 * (lam[:, None] + lam[None, :])))
            DX = [r @ h @ r.conj().T for r, h in zip(Rs, H)]
            r1 = -eta * rp - _op_A(A, DX) + eta * A_Wrd
            r2 = -eta * rg + _inner(C, DX) - eta * C_Wrd + r_tk / tau
            pv = msolve(r1)
            denom = (b - u) @ q + cwc + kappa / tau
            dtau = (r2 - (b - u) @ pv) / denom
            dy = pv + q * dtau
            Atdy = _op_At(A, dy)
            dZ = [-at + c * dtau + eta * r_ for at, c, r_ in zip(Atdy, C, rd)]
            dZt = [r.conj().T @ dz @ r for r, dz in zip(Rs, dZ)]
            dXt = [h - dzt for h, dzt in zip(H, dZt)]
            dkappa = (r_tk - kappa * dtau) / tau
            return dXt, dZt, dy, dtau, dkappa, dZ

        def step_length(dXt, dZt, dtau, dkappa):
            a = np.inf
            for lam, dx, dz in zip(lams, dXt, dZt):
                a = min(a, _max_step(lam, dx), _max_step(lam, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        rc_aff = [-np.diag(lam ** 2).astype(complex) for lam in lams]
        dXa, dZa, dya, dtaua, dkapa, _ = direction(rc_aff, -tau * kappa, 1.0)
        a_aff = min(1.0, step_length(dXa, dZa, dtaua, dkapa))
        mu_aff = (sum(np.vdot(np.diag(lam) + a_aff * dx, np.diag(lam) + a_aff * dz).real
                      for lam, dx, dz in zip(lams, dXa, dZa))
                  + (tau + a_aff * dtaua) * (kappa + a_aff * dkapa)) / nu
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))

        # corrector
        rc = []
        for lam, dx, dz in zip(lams, dXa, dZa):
            sym = 0.5 * (dx @ dz + dz @ dx)
            rc.append(sigma * mu * np.eye(lam.size) - np.diag(lam ** 2) - sym)
        r_tk = sigma * mu - tau * kappa - dtaua * dkapa
        dXt, dZt, dy, dtau, dkappa, dZ = direction(rc, r_tk, 1.0 - sigma)
        alpha = min(1.0, tol.step_fraction * step_length(dXt, dZt, dtau, dkappa))

        X = [la.herm(x + alpha * (r @ dxt @ r.conj().T)) for x, r, dxt in zip(X, Rs, dXt)]
        Z = [la.herm(z + alpha * dz) for z, dz in zip(Z, dZ)]
        y = y + alpha * dy
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    Xs = [x / tau for x in X]
    return finish(Xs, sign * unscale(y / tau), [sign * z / tau for z in Z], "max_iter", gap, pres, dres,
                  tol.max_iter, hist=hist)


def feasibility(p: SdpProblem, tol: SolverTolerances | None = None, band: tuple[float, float] = (1e-8, 1e-5)):
    """Decide whether ``{X >= 0 : <A_i, X> = b_i}`` is nonempty.

    Returns ``(status, certificate)`` with status ``feasible``, ``infeasible``
    or ``undetermined``.  A feasible certificate carries ``X`` and its
    residual; an infeasible one carries the dual ray ``y`` (normalized so that
    ``Tr(-A*(y)) = 1``) and ``margin = b.y``.
    """
    tol = tol or SolverTolerances()
    zeroC = [np.zeros((n, n), dtype=complex) for n in p.block_sizes]
    q = SdpProblem(p.block_sizes, zeroC, p.A, p.b, "min")
    if q.m == 0:
        return "feasible", {"X": [np.zeros((n, n), dtype=complex) for n in p.block_sizes], "residual": 0.0}

    kept, bad, rank, nreal = _remove_dependent(q.A, q.b)
    if bad is not None:
        y = bad / np.linalg.norm(bad)
        return "infeasible", {"y": y, "margin": float(q.b @ y), "kind": "linear"}
    if rank == nreal:
        # affine set is a single point: decide by its spectrum
        X0 = _unique_solution(q)
        lmin = min(la.min_eig(x) for x in X0)
        resid = np.linalg.norm(_op_A(q.A, X0) - q.b)
        if lmin >= -band[0]:
            return "feasible", {"X": X0, "residual": float(resid), "min_eig": lmin}
        # Farkas ray: Z = v v^dagger on the offending block, y solves A*(y) = -Z
        k = int(np.argmin([la.min_eig(x) for x in X0]))
        w, v = np.linalg.eigh(X0[k])
        target = [np.zeros((n, n), dtype=complex) for n in p.block_sizes]
        target[k] = -np.outer(v[:, 0], v[:, 0].conj())
        y = _solve_adjoint(q, target)
        margin = float(q.b @ y)
        status = "infeasible" if margin > band[0] else "undetermined"
        return status, {"y": y, "margin": margin, "min_eig": lmin, "kind": "unique-point"}

    sol = solve(q, tol)
    if sol.status == "optimal":
        resid = np.linalg.norm(_op_A(q.A, sol.X) - q.b)
        lmin = min(la.min_eig(x) for x in sol.X)
        if resid <= band[0] * (1 + np.linalg.norm(q.b)) and lmin >= -band[0]:
            return "feasible", {"X": sol.X, "residual": float(resid), "min_eig": lmin}
        return "undetermined", {"X": sol.X, "residual": float(resid), "min_eig": lmin}
    if sol.status == "infeasible":
        status = "infeasible" if sol.certificate_margin > band[0] else "undetermined"
        return status, {"y": sol.y, "margin": sol.certificate_margin, "kind": "hsde"}
    return "undetermined", {"X": sol.X, "residual": sol.primal_residual, "status": sol.status}


def _flat_rows(A: list[np.ndarray]) -> np.ndarray:
    m = A[0].shape[0]
    return np.concatenate([np.concatenate([a.reshape(m, -1).real, a.reshape(m, -1).imag], axis=1) for a in A], axis=1)


def _unflatten(vec: np.ndarray, sizes: Sequence[int]) -> list[np.ndarray]:
    out, pos = [], 0
    for n in sizes:
        re = vec[pos:pos + n * n].reshape(n, n)
        im = vec[pos + n * n:pos + 2 * n * n].reshape(n, n)
        out.append(la.herm(re + 1j * im))
        pos += 2 * n * n
    return out


def _unique_solution(p: SdpProblem) -> list[np.ndarray]:
    rows = _flat_rows(p.A)
    sol, *_ = np.linalg.lstsq(rows, p.b, rcond=None)
    return _unflatten(sol, p.block_sizes)


def _solve_adjoint(p: SdpProblem, target: list[np.ndarray]) -> np.ndarray:
    rows = _flat_rows(p.A)
    t = np.concatenate([np.concatenate([x.real.reshape(-1), x.imag.reshape(-1)]) for x in target])
    y, *_ = np.linalg.lstsq(rows.T, t, rcond=None)
    return y


def realify(p: SdpProblem) -> SdpProblem:
    """Equivalent real-symmetric problem via H -> [[Re H, -Im H], [Im H, Re H]] / 2."""
    def phi(h):
        return np.block([[h.real, -h.imag], [h.imag, h.real]]).astype(complex)

    C = [phi(c) / 2 for c in p.C]
    A = [np.stack([phi(a_i) / 2 for a_i in a]) if a.shape[0] else np.zeros((0, 2 * n, 2 * n), complex)
         for a, n in zip(p.A, p.block_sizes)]
    return SdpProblem(tuple(2 * n for n in p.block_sizes), C, A, p.b.copy(), p.sense)


# ---------------------------------------------------------------------------
# modelling helper


class SdpBuilder:
    """Assemble block problems from linear maps on named PSD blocks."""

    def __init__(self):
        self.sizes: list[int] = []
        self.names: list[str] = []
        self.objective: list[np.ndarray] = []
        self.rows: list[list[np.ndarray | None]] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []

    def block(self, name: str, n: int) -> int:
        self.sizes.append(int(n))
        self.names.append(name)
        self.objective.append(np.zeros((n, n), dtype=complex))
        return len(self.sizes) - 1

    def set_objective(self, k: int, c: np.ndarray):
        self.objective[k] = self.objective[k] + np.asarray(c, dtype=complex)

    def add_scalar(self, terms: dict[int, np.ndarray], rhs: float, name: str = ""):
        """sum_k <terms[k], X_k> = rhs."""
        self.rows.append([None if k not in terms else la.herm(np.asarray(terms[k], dtype=complex))
                          for k in range(len(self.sizes))])
        self.rhs.append(float(rhs))
        self.row_names.append(name)

    def add_map_equality(self, terms: dict[int, Callable[[np.ndarray], np.ndarray]], rhs: np.ndarray, name: str = ""):
        """sum_k L_k(X_k) = rhs for Hermitian-preserving linear maps ``L_k``.

        Adjoints are formed numerically by applying each map to a Hermitian
        basis of its input space.
        """
        rhs = la.herm(np.asarray(rhs, dtype=complex))
        n_out = rhs.shape[0]
        out_basis = la.hermitian_basis(n_out)
        adjoints = {}
        for k, fn in terms.items():
            n_in = self.sizes[k]
            in_basis = la.hermitian_basis(n_in)
            images = np.stack([fn(e) for e in in_basis])  # (n_in^2, n_out, n_out)
            # coeff[j, i] = Re Tr(E_j^out L(E_i^in))
            coeff = np.einsum("jab,iab->ji", out_basis.conj(), images).real
            adjoints[k] = np.einsum("ji,iab->jab", coeff, in_basis)
        rvals = np.einsum("jab,ab->j", out_basis.conj(), rhs).real
        for j in range(n_out * n_out):
            self.rows.append([adjoints[k][j] if k in adjoints else None for k in range(len(self.sizes))])
            self.rhs.append(float(rvals[j]))
            self.row_names.append(f"{name}[{j}]")

    def build(self, sense: str = "min") -> SdpProblem:
        m = len(self.rhs)
        A = []
        for k, n in enumerate(self.sizes):
            a = np.zeros((m, n, n), dtype=complex)
            for i, row in enumerate(self.rows):
                if k < len(row) and row[k] is not None:
                    a[i] = row[k]
            A.append(a)
        return SdpProblem(tuple(self.sizes), [la.herm(c) for c in self.objective], A, np.array(self.rhs), sense,
                          list(self.row_names))


def embed(n: int, rows: slice, cols: slice, a: np.ndarray) -> np.ndarray:
    out = np.zeros((n, n), dtype=complex)
    out[rows, cols] = a
    return out
