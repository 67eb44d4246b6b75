"""One-shot and smoothed entropies.

Smoothing is always over the purified-distance ball of subnormalized states.
Ball membership ``P(rho_bar, rho) <= eps`` around a normalized ``rho = B B^dagger``
is written as the semidefinite constraint

    [[rho_bar, Y], [Y^dagger, I_r]] >= 0,   Re Tr(B^dagger Y) >= sqrt(1 - eps^2),   Tr rho_bar <= 1

whose optimal ``Re Tr(B^dagger Y)`` is the root fidelity ``||sqrt(rho_bar) sqrt(rho)||_1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from . import linalg as la
from . import sdp
from .entropies import SUPPORT_TOL, INF
from .qip import DensityOperator, PureState, Register, RegisterError, purify, root_fidelity_matrix

log = logging.getLogger(__name__)

EXACT_SDP = "exact-sdp"
NEYMAN_PEARSON = "neyman-pearson"
ALTERNATING = "alternating-heuristic"
CLOSED_FORM = "closed-form"
BISECTION = "bisection-sdp"


@dataclass
class OneShotResult:
    value: float
    certified: bool
    method: str
    artifacts: dict[str, Any] = field(default_factory=dict)
    lower: float = float("nan")
    upper: float = float("nan")
    notes: str = ""

    def __post_init__(self):
        if math.isnan(self.lower):
            self.lower = self.value
        if math.isnan(self.upper):
            self.upper = self.value


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityOperator) else np.asarray(x, dtype=complex)


def _check_eps(eps: float):
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing parameter must lie in [0, 1), got {eps}")


def _neglog2(x: float) -> float:
    return INF if x <= 0 else -math.log2(x)


# ---------------------------------------------------------------------------
# hypothesis testing


def _np_knapsack(vecs: np.ndarray, omega: np.ndarray, tau: np.ndarray, target: float):
    """Best test diagonal in a fixed eigenbasis: a fractional knapsack."""
    w = np.einsum("ai,ab,bi->i", vecs.conj(), omega, vecs).real
    t = np.einsum("ai,ab,bi->i", vecs.conj(), tau, vecs).real
    w, t = np.clip(w, 0, None), np.clip(t, 0, None)
    ratio = np.where(w > 0, t / np.maximum(w, 1e-300), np.inf)
    order = np.argsort(ratio, kind="stable")
    c = np.zeros(len(w))
    need = target
    for i in order:
        if need <= 0:
            break
        if w[i] <= 0:
            continue
        c[i] = min(1.0, need / w[i])
        need -= c[i] * w[i]
    lam = (vecs * c) @ vecs.conj().T
    return la.herm(lam), float(c @ t), need <= 1e-14


def _np_dual(mu: float, omega: np.ndarray, tau: np.ndarray, eps: float) -> float:
    w = np.linalg.eigvalsh(la.herm(mu * omega - tau))
    return mu * (1 - eps) - float(np.sum(w[w > 0]))


def d_hypo_matrix(omega: np.ndarray, tau: np.ndarray, eps: float, sdp_check: bool = False,
                  tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    _check_eps(eps)
    n = omega.shape[0]
    if eps == 0.0:
        P = la.support_projector(omega)
        val = float(np.trace(P @ tau).real)
        return OneShotResult(_neglog2(val), True, CLOSED_FORM, {"Lambda": P, "type2": val, "mu": INF})
    target = 1.0 - eps

    def upper_mass(mu):
        w, v = np.linalg.eigh(la.herm(mu * omega - tau))
        pos = v[:, w > 1e-14 * max(1.0, mu)]
        return float(np.trace(pos.conj().T @ omega @ pos).real)

    lo, hi = 0.0, 1.0
    while upper_mass(hi) < target and hi < 1e16:
        lo, hi = hi, hi * 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if upper_mass(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    best = None
    for mu in (lo, 0.5 * (lo + hi), hi):
        _, v = np.linalg.eigh(la.herm(mu * omega - tau))
        lam, val, ok = _np_knapsack(v, omega, tau, target)
        if ok and (best is None or val < best[1]):
            best = (lam, val, mu)
    dual = max(_np_dual(mu, omega, tau, eps) for mu in (lo, 0.5 * (lo + hi), hi))
    lam, primal, mu = best
    gap = primal - dual
    res = OneShotResult(_neglog2(primal), gap <= 1e-9 * max(1.0, abs(primal)), NEYMAN_PEARSON,
                        {"Lambda": lam, "type2": primal, "dual": dual, "mu": mu, "gap": gap},
                        lower=_neglog2(primal), upper=_neglog2(dual) if dual > 0 else INF)
    if primal <= 1e-14:
        res.value, res.upper = INF, INF
        res.notes = "type-II error vanishes; +inf sentinel"
        return res
    if sdp_check or not res.certified:
        s = d_hypo_sdp(omega, tau, eps, tol)
        res.artifacts["sdp_value"] = s.value
        if not res.certified and s.certified:
            log.info("d_hypo: eigen route gap %.2e, using SDP value", gap)
            return s
    return res


def d_hypo_sdp(omega: np.ndarray, tau: np.ndarray, eps: float, tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    n = omega.shape[0]

    def run(scale, t=tol):
        b = sdp.SdpBuilder()
        L = b.block("Lambda", n)
        S = b.block("slack", n)
        s = b.block("s", 1)
        b.set_objective(L, tau * scale)
        b.add_map_equality({L: lambda x: x, S: lambda x: x}, np.eye(n), "Lambda+S=I")
        b.add_scalar({L: omega, s: -np.eye(1)}, 1 - eps, "Tr Lambda omega >= 1-eps")
        return sdp.solve(b.build("min"), t), L

    sol, L = run(1.0)
    certified, status = sol.optimal, sol.status
    # the gap test is absolute; polish with the objective rescaled to ~1 so the log is accurate
    if sol.optimal and sol.primal_obj > 0 and tol is None:
        for scale in (1.0 / sol.primal_obj, 0.5 / sol.primal_obj):
            try:
                sol2, L2 = run(scale, sdp.SolverTolerances(gap_tol=1e-10, feas_tol=1e-10))
            except sdp.SdpNumericalError as e:
                # stalled near the optimum; keep the last iterate if it is already tight
                sol2, L2 = e.best, None
                if sol2 is None or abs(sol2.primal_obj - sol2.dual_obj) > 1e-7 * abs(sol2.primal_obj) \
                        or not sol2.primal_residual < 1e-8:
                    continue
            if sol2.optimal or L2 is None:
                L = L2 if L2 is not None else L
                sol = sol2
                sol.primal_obj, sol.dual_obj = sol.primal_obj / scale, sol.dual_obj / scale
                break
    val = sol.primal_obj
    return OneShotResult(_neglog2(val), certified, EXACT_SDP,
                         {"Lambda": sol.X[L], "type2": val, "dual": sol.dual_obj, "status": status,
                          "polish_status": sol.status})


def d_hypo(omega, tau, eps: float, **kw) -> OneShotResult:
    _same(omega, tau)
    return d_hypo_matrix(_mat(omega), _mat(tau), eps, **kw)


def _same(a, b):
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator) and a.register != b.register:
        raise RegisterError(f"register mismatch: {a.register} vs {b.register}")


# ---------------------------------------------------------------------------
# unsmoothed relative entropies


def d_max_matrix(omega: np.ndarray, tau: np.ndarray) -> float:
    w, v = np.linalg.eigh(la.herm(tau))
    supp = w > SUPPORT_TOL
    ker = v[:, ~supp]
    if ker.shape[1] and float(np.trace(ker.conj().T @ omega @ ker).real) > SUPPORT_TOL:
        return INF
    vs = v[:, supp] / np.sqrt(w[supp])
    m = vs.conj().T @ omega @ vs
    lmax = la.max_eig(m) if m.size else 0.0
    return _neglog2(1 / lmax) if lmax > 0 else -INF


def d_min_matrix(omega: np.ndarray, tau: np.ndarray) -> float:
    return _neglog2(root_fidelity_matrix(omega, tau) ** 2)


def d_max(omega, tau) -> float:
    _same(omega, tau)
    return d_max_matrix(_mat(omega), _mat(tau))


def d_min(omega, tau) -> float:
    _same(omega, tau)
    return d_min_matrix(_mat(omega), _mat(tau))


# ---------------------------------------------------------------------------
# smoothing ball on an SdpBuilder


@dataclass
class _Ball:
    G: int          # block index of [[rho_bar, Y], [Y^dagger, I_r]]
    n: int
    r: int

    def rho(self, G: np.ndarray) -> np.ndarray:
        return G[: self.n, : self.n]


def _add_ball(b: sdp.SdpBuilder, Bfac: np.ndarray, eps: float, name: str = "ball") -> _Ball:
    n, r = Bfac.shape
    G = b.block(name, n + r)
    b.add_map_equality({G: lambda x: x[n:, n:]}, np.eye(r), f"{name}:I_r")
    H = np.zeros((n + r, n + r), dtype=complex)
    H[:n, n:] = 0.5 * Bfac
    H[n:, :n] = 0.5 * Bfac.conj().T
    s1 = b.block(f"{name}:fid_slack", 1)
    b.add_scalar({G: H, s1: -np.eye(1)}, math.sqrt(1 - eps ** 2), f"{name}:fidelity")
    s2 = b.block(f"{name}:trace_slack", 1)
    Tn = np.zeros((n + r, n + r), dtype=complex)
    Tn[:n, :n] = np.eye(n)
    b.add_scalar({G: Tn, s2: np.eye(1)}, 1.0, f"{name}:trace")
    return _Ball(G, n, r)


def _fid_functional(Bfac: np.ndarray) -> np.ndarray:
    n, r = Bfac.shape
    H = np.zeros((n + r, n + r), dtype=complex)
    H[:n, n:] = 0.5 * Bfac
    H[n:, :n] = 0.5 * Bfac.conj().T
    return H


def d_max_smooth_matrix(omega: np.ndarray, tau: np.ndarray, eps: float,
                        tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    _check_eps(eps)
    if eps == 0.0:
        v = d_max_matrix(omega, tau)
        return OneShotResult(v, True, CLOSED_FORM, {"rho_bar": omega})
    V = la.support_basis(tau, SUPPORT_TOL)
    if V.shape[1] == 0:
        return OneShotResult(INF, True, EXACT_SDP, notes="tau = 0")
    th = la.herm(V.conj().T @ tau @ V)
    Bfac = V.conj().T @ la.psd_factor(omega)
    n = th.shape[0]
    if np.linalg.norm(Bfac) ** 2 < 1 - eps ** 2 - 1e-12:
        # even the best in-support state cannot reach the ball
        pass
    b = sdp.SdpBuilder()
    t = b.block("t", 1)
    ball = _add_ball(b, Bfac, eps)
    S = b.block("slack", n)
    b.set_objective(t, np.eye(1))
    b.add_map_equality({t: lambda x: x[0, 0] * th, ball.G: lambda x: -x[:n, :n], S: lambda x: -x},
                       np.zeros((n, n)), "rho_bar <= t tau")
    sol = sdp.solve(b.build("min"), tol)
    if sol.status == "infeasible":
        return OneShotResult(INF, True, EXACT_SDP, {"status": sol.status, "margin": sol.certificate_margin},
                             notes="ball does not meet supp(tau)")
    rho_bar = la.herm(V @ ball.rho(sol.X[ball.G]) @ V.conj().T)
    val = math.log2(max(sol.primal_obj, 1e-300))
    return OneShotResult(val, sol.optimal, EXACT_SDP,
                         {"rho_bar": rho_bar, "t": sol.primal_obj, "status": sol.status},
                         lower=math.log2(max(sol.dual_obj, 1e-300)) if sol.dual_obj > 0 else -INF)


def d_max_smooth(omega, tau, eps: float, **kw) -> OneShotResult:
    _same(omega, tau)
    return d_max_smooth_matrix(_mat(omega), _mat(tau), eps, **kw)


def _geometric_mean_inv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Alberti minimizer Y of Tr(aY) + Tr(bY^-1), i.e. a^-1 # b on supp(a)."""
    ra = la.sqrtm_psd(a)
    ria = la.inv_sqrtm_psd(a, 1e-14)
    mid = la.sqrtm_psd(la.herm(ra @ b @ ra))
    return la.herm(ria @ mid @ ria)


def d_min_smooth_matrix(omega: np.ndarray, tau: np.ndarray, eps: float, max_iter: int = 60,
                        tol: sdp.SolverTolerances | None = None, rng: np.random.Generator | None = None,
                        restarts: int = 2) -> OneShotResult:
    """Alternating minimization of the root fidelity over the ball.

    Fidelity is concave in its first argument, so this is a nonconvex problem;
    every iterate is an in-ball state and the reported value is therefore an
    achievable lower bound on the supremum.
    """
    _check_eps(eps)
    if eps == 0.0:
        return OneShotResult(d_min_matrix(omega, tau), True, CLOSED_FORM, {"rho_bar": omega})
    n = omega.shape[0]
    rng = rng or np.random.default_rng(0)
    Bfac = la.psd_factor(omega)
    reg = 1e-9 * np.eye(n)

    def ball_min(Y):
        b = sdp.SdpBuilder()
        ball = _add_ball(b, Bfac, eps)
        C = np.zeros((n + ball.r, n + ball.r), dtype=complex)
        C[:n, :n] = Y
        b.set_objective(ball.G, C)
        sol = sdp.solve(b.build("min"), tol)
        return la.herm(ball.rho(sol.X[ball.G])), sol

    starts = [_geometric_mean_inv(omega + reg, tau)]
    for _ in range(restarts):
        g = la.random_density(n, rng)
        starts.append(_geometric_mean_inv(g, tau + reg))
    best_f, best_rho, best_hist = INF, omega, []
    for Y in starts:
        prev = INF
        hist = []
        rho_bar = omega
        for it in range(max_iter):
            rho_bar, sol = ball_min(Y)
            f = root_fidelity_matrix(rho_bar, tau)
            hist.append(f)
            if prev - f <= 1e-10 * max(1.0, f):
                break
            prev = f
            Y = _geometric_mean_inv(rho_bar + reg, tau)
        if f < best_f:
            best_f, best_rho, best_hist = f, rho_bar, hist
    return OneShotResult(_neglog2(best_f ** 2), False, ALTERNATING,
                         {"rho_bar": best_rho, "fidelity_history": best_hist},
                         upper=INF, notes="local optimum of a nonconvex problem; value is achievable")


def d_min_smooth(omega, tau, eps: float, **kw) -> OneShotResult:
    _same(omega, tau)
    return d_min_smooth_matrix(_mat(omega), _mat(tau), eps, **kw)


# ---------------------------------------------------------------------------
# conditional entropies


def _split(rho: DensityOperator, a: Iterable[str], b: Iterable[str]) -> tuple[np.ndarray, int, int]:
    """Matrix of the (A, B) marginal in A-then-B order, with dims."""
    a, b = list(a), list(b)
    if set(a) & set(b):
        raise RegisterError("conditioning systems overlap")
    if not a:
        raise RegisterError("conditional entropy needs a nonempty A")
    m = rho.marginal(a + b)
    order = [m.register.index(l) for l in a + b]
    mat = la.permute_systems(m.matrix, m.dims, order)
    return la.herm(mat), m.register.dim_of(a), m.register.dim_of(b) if b else 1


def _labels(x) -> list[str]:
    if x is None:
        return []
    return [x] if isinstance(x, str) else list(x)


def h_min_matrix(rho: np.ndarray, da: int, db: int, eps: float = 0.0,
                 tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    _check_eps(eps)
    n = da * db
    if db == 1 and eps == 0.0:
        return OneShotResult(-math.log2(la.max_eig(rho)), True, CLOSED_FORM, {"sigma": np.eye(1)})
    b = sdp.SdpBuilder()
    sig = b.block("sigma", db)
    S = b.block("slack", n)
    b.set_objective(sig, np.eye(db))
    IA = np.eye(da)
    if eps == 0.0:
        b.add_map_equality({sig: lambda x: np.kron(IA, x), S: lambda x: -x}, rho, "rho <= I (x) sigma")
        sol = sdp.solve(b.build("min"), tol)
        rho_bar = rho
    else:
        ball = _add_ball(b, la.psd_factor(rho), eps)
        b.add_map_equality({sig: lambda x: np.kron(IA, x), S: lambda x: -x, ball.G: lambda x: -x[:n, :n]},
                           np.zeros((n, n)), "rho_bar <= I (x) sigma")
        sol = sdp.solve(b.build("min"), tol)
        rho_bar = la.herm(ball.rho(sol.X[ball.G]))
    tr = sol.primal_obj
    sigma = sol.X[sig] / tr if tr > 0 else sol.X[sig]
    return OneShotResult(-math.log2(tr), sol.optimal, EXACT_SDP,
                         {"sigma": sigma, "rho_bar": rho_bar, "status": sol.status},
                         lower=-math.log2(tr), upper=-math.log2(sol.dual_obj) if sol.dual_obj > 0 else INF)


def h_max_matrix(rho: np.ndarray, da: int, db: int, tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    n = da * db
    if db == 1:
        return OneShotResult(2 * math.log2(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(rho), 0, None)))),
                             True, CLOSED_FORM, {"sigma": np.eye(1)})
    Bfac = la.psd_factor(rho)
    r = Bfac.shape[1]
    b = sdp.SdpBuilder()
    sig = b.block("sigma", db)
    G = b.block("G", n + r)
    IA = np.eye(da)
    b.set_objective(G, _fid_functional(Bfac))
    b.add_map_equality({G: lambda x: x[:n, :n], sig: lambda x: -np.kron(IA, x)}, np.zeros((n, n)), "G11 = I (x) sigma")
    b.add_map_equality({G: lambda x: x[n:, n:]}, np.eye(r), "G22 = I")
    b.add_scalar({sig: np.eye(db)}, 1.0, "Tr sigma = 1")
    sol = sdp.solve(b.build("max"), tol)
    f = sol.primal_obj
    return OneShotResult(2 * math.log2(f), sol.optimal, EXACT_SDP, {"sigma": sol.X[sig], "status": sol.status},
                         lower=2 * math.log2(f), upper=2 * math.log2(sol.dual_obj) if sol.dual_obj > 0 else INF)


def h_min(rho: DensityOperator, a, b=None, **kw) -> OneShotResult:
    mat, da, db = _split(rho, _labels(a), _labels(b))
    return h_min_matrix(mat, da, db, 0.0, **kw)


def h_max(rho: DensityOperator, a, b=None, **kw) -> OneShotResult:
    mat, da, db = _split(rho, _labels(a), _labels(b))
    return h_max_matrix(mat, da, db, **kw)


def h_min_smooth(rho: DensityOperator, a, b=None, eps: float = 0.0, **kw) -> OneShotResult:
    _check_eps(eps)
    mat, da, db = _split(rho, _labels(a), _labels(b))
    if abs(np.trace(mat).real - 1) > 1e-8:
        raise ValueError("smoothing needs a normalized state")
    return h_min_matrix(mat, da, db, eps, **kw)


def h_max_smooth_matrix(rho: np.ndarray, da: int, db: int, eps: float,
                        tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    """Via duality on a purification: H_max^eps(A|B) = -H_min^eps(A|C)."""
    _check_eps(eps)
    if eps == 0.0:
        return h_max_matrix(rho, da, db, tol)
    psi = purify(DensityOperator(rho, Register(("A", "B"), (da, db)), check=False), "C")
    m, da2, dc = _split(psi.density(), ["A"], ["C"])
    r = h_min_matrix(m, da2, dc, eps, tol)
    return OneShotResult(-r.value, r.certified, EXACT_SDP + "+duality",
                         {"status": r.artifacts.get("status"), "dual_sigma_C": r.artifacts.get("sigma")},
                         lower=-r.upper, upper=-r.lower)


def h_max_smooth(rho: DensityOperator, a, b=None, eps: float = 0.0, **kw) -> OneShotResult:
    mat, da, db = _split(rho, _labels(a), _labels(b))
    if abs(np.trace(mat).real - 1) > 1e-8:
        raise ValueError("smoothing needs a normalized state")
    return h_max_smooth_matrix(mat, da, db, eps, **kw)


# ---------------------------------------------------------------------------
# mutual-information variants


def i_hypo(rho: DensityOperator, a, b, eps: float, **kw) -> OneShotResult:
    mat, da, db = _split(rho, _labels(a), _labels(b))
    ra = la.partial_trace(mat, (da, db), [0])
    rb = la.partial_trace(mat, (da, db), [1])
    return d_hypo_matrix(mat, np.kron(ra, rb), eps, **kw)


def _imax_fidelity(t: float, rA: np.ndarray, Bfac: np.ndarray, da: int, db: int,
                   tol: sdp.SolverTolerances | None):
    """max root fidelity with rho over rho' with rho' <= t rho_A (x) rho'_B, Tr rho' <= 1."""
    n, r = Bfac.shape
    b = sdp.SdpBuilder()
    G = b.block("G", n + r)
    S = b.block("slack", n)
    s2 = b.block("trace_slack", 1)
    b.set_objective(G, _fid_functional(Bfac))
    b.add_map_equality({G: lambda x: x[n:, n:]}, np.eye(r), "G22 = I")
    Tn = np.zeros((n + r, n + r), dtype=complex)
    Tn[:n, :n] = np.eye(n)
    b.add_scalar({G: Tn, s2: np.eye(1)}, 1.0, "trace")

    def lhs(x):
        rp = x[:n, :n]
        return t * np.kron(rA, la.partial_trace(rp, (da, db), [1])) - rp

    b.add_map_equality({G: lhs, S: lambda x: -x}, np.zeros((n, n)), "rho' <= t rho_A (x) rho'_B")
    sol = sdp.solve(b.build("max"), tol)
    return sol.primal_obj, la.herm(sol.X[G][:n, :n]), sol


def i_max_tilde_matrix(rho: np.ndarray, da: int, db: int, eps: float, bits_tol: float = 1e-7,
                       tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    """inf over the ball of D_max(rho'_AB || rho_A (x) rho'_B); A is the fixed-marginal system.

    For fixed t the feasible set is convex, and the best attainable fidelity is
    non-decreasing in t, so the optimum is bracketed by bisection on log2 t.
    """
    _check_eps(eps)
    rA = la.partial_trace(rho, (da, db), [0])
    rB = la.partial_trace(rho, (da, db), [1])
    d0 = d_max_matrix(rho, np.kron(rA, rB))
    if eps == 0.0:
        return OneShotResult(d0, True, CLOSED_FORM, {"rho_prime": rho})
    VA = la.support_basis(rA)
    ra = VA.shape[1]
    V = np.kron(VA, np.eye(db))
    rho_h = la.herm(V.conj().T @ rho @ V)
    rA_h = la.herm(VA.conj().T @ rA @ VA)
    Bfac = la.psd_factor(rho_h)
    need = math.sqrt(1 - eps ** 2)
    certified = True

    f1, rp1, s1 = _imax_fidelity(1.0, rA_h, Bfac, ra, db, tol)
    if f1 >= need - 1e-9:
        return OneShotResult(0.0, s1.optimal, BISECTION, {"rho_prime": V @ rp1 @ V.conj().T, "t": 1.0},
                             lower=0.0, upper=0.0)
    lo, hi = 0.0, max(d0, 0.0)
    best = (rho, 2.0 ** hi)
    while hi - lo > bits_tol:
        mid = 0.5 * (lo + hi)
        f, rp, s = _imax_fidelity(2.0 ** mid, rA_h, Bfac, ra, db, tol)
        certified &= s.optimal
        if f >= need - 1e-10:
            hi, best = mid, (V @ rp @ V.conj().T, 2.0 ** mid)
        else:
            lo = mid
    return OneShotResult(hi, certified, BISECTION, {"rho_prime": la.herm(best[0]), "t": best[1]},
                         lower=lo, upper=hi)


def i_max_tilde_alternating(rho: np.ndarray, da: int, db: int, eps: float, max_iter: int = 30,
                            tol: sdp.SolverTolerances | None = None) -> OneShotResult:
    """Heuristic: fix sigma_B, smooth D_max(. || rho_A (x) sigma_B), then set sigma_B := rho'_B."""
    _check_eps(eps)
    rA = la.partial_trace(rho, (da, db), [0])
    sigma = la.partial_trace(rho, (da, db), [1])
    best, best_rho = INF, rho
    for _ in range(max_iter):
        r = d_max_smooth_matrix(rho, np.kron(rA, sigma), eps, tol)
        rp = r.artifacts.get("rho_bar", rho)
        # the true objective at rp uses its own B marginal
        val = d_max_matrix(rp, np.kron(rA, la.partial_trace(rp, (da, db), [1])))
        if val < best - 1e-10:
            best, best_rho = val, rp
        else:
            break
        sb = la.partial_trace(rp, (da, db), [1])
        sigma = sb / max(np.trace(sb).real, 1e-300)
    return OneShotResult(best, False, ALTERNATING, {"rho_prime": best_rho}, lower=-INF, upper=best)


def i_max_tilde(rho: DensityOperator, b, a, eps: float, method: str = BISECTION, **kw) -> OneShotResult:
    """Smoothed max-mutual information with argument order (B; A): rho_A stays fixed."""
    mat, da, db = _split(rho, _labels(a), _labels(b))
    if method == ALTERNATING:
        return i_max_tilde_alternating(mat, da, db, eps, **kw)
    return i_max_tilde_matrix(mat, da, db, eps, **kw)
