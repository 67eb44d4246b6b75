"""Exact simulation of the position-based code with convex-split key randomization.

Alice and Bob share ``M*K`` copies of ``rho_RA``; message ``m`` with local key
``k`` sends block ``j = m*K + k`` through the channel.  Bob decodes with the
square-root (Hayashi-Nagaoka) POVM built from a Neyman-Pearson test; Eve's
view is compared with product and mixture reference states.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Any

import numpy as np

from . import linalg as la
from . import oneshot
from . import sdp
from .broadcast import BroadcastChannel
from .capacity import REF, channel_output
from .qip import DensityOperator, purified_distance_matrix

log = logging.getLogger(__name__)

DIM_CAP = 2 ** 13
PINV_TOL = 1e-12


class DimensionCapError(ValueError):
    pass


@dataclass
class CodeConfig:
    M: int
    K: int
    rho_ra: DensityOperator
    bc: BroadcastChannel
    eps: float = 0.05           # reliability target
    delta: float = 0.04         # security target (trace distance bound is sqrt(delta))
    eta1: float | None = None   # defaults to eps / 2
    eta2: float | None = None   # defaults to sqrt(delta) / 2
    test_eps: float | None = None  # type-I error of the test operator; defaults to eps - eta1
    hn_c: float = 1.0
    dim_cap: int = DIM_CAP
    optimize_sigma: bool = False

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be >= 1")
        if self.eta1 is None:
            self.eta1 = self.eps / 2
        if self.eta2 is None:
            self.eta2 = math.sqrt(self.delta) / 2
        if self.test_eps is None:
            self.test_eps = self.eps - self.eta1
        if self.hn_c <= 0:
            raise ValueError("Hayashi-Nagaoka parameter c must be > 0")


@dataclass
class Code:
    cfg: CodeConfig
    omega: DensityOperator        # N(rho_RA) on R + outputs
    omega_rb: np.ndarray          # R then decoding set
    omega_re: np.ndarray          # R then malicious set
    rho_r: np.ndarray
    dr: int
    db: int
    de: int

    @property
    def n_blocks(self) -> int:
        return self.cfg.M * self.cfg.K

    def block_state(self, j: int, which: str = "B") -> np.ndarray:
        """rho^{j} on R_1..R_N then the B (or E) systems."""
        w = self.omega_rb if which == "B" else self.omega_re
        dx = self.db if which == "B" else self.de
        return _place(w, self.rho_r, j, self.n_blocks, self.dr, dx)

    def spectator_marginal(self, j: int, which: str = "B") -> np.ndarray:
        """Trace of the active block's R and the outputs: the other R blocks."""
        st = self.block_state(j, which)
        dx = self.db if which == "B" else self.de
        dims = [self.dr] * self.n_blocks + [dx]
        keep = [i for i in range(self.n_blocks) if i != j]
        return la.partial_trace(st, dims, keep)


def _place(w: np.ndarray, rho_r: np.ndarray, j: int, n: int, dr: int, dx: int) -> np.ndarray:
    """Operator on R_1..R_n X with ``w`` on (R_j, X) and rho_r on every other R."""
    others = reduce(np.kron, [rho_r] * (n - 1), np.eye(1))
    full = np.kron(w, others)  # order: R_j, X, others
    order_dims = [dr, dx] + [dr] * (n - 1)
    # target position of each current factor
    cur = ["Rj", "X"] + [f"R{i}" for i in range(n) if i != j]
    target = [f"R{i}" if i != j else "Rj" for i in range(n)] + ["X"]
    perm = [cur.index(t) for t in target]
    return la.permute_systems(full, order_dims, perm)


def _place_op(t: np.ndarray, j: int, n: int, dr: int, dx: int) -> np.ndarray:
    return _place(t, np.eye(dr), j, n, dr, dx)


def _rx(omega: DensityOperator, x_labels) -> tuple[np.ndarray, int]:
    x_labels = list(x_labels)
    m = omega.marginal([REF] + x_labels)
    order = [m.register.index(l) for l in [REF] + x_labels]
    return la.herm(la.permute_systems(m.matrix, m.dims, order)), m.register.dim_of(x_labels) if x_labels else 1


def build_code(cfg: CodeConfig) -> Code:
    omega = channel_output(cfg.bc, cfg.rho_ra)
    dr = omega.register.dim_of([REF])
    wb, db = _rx(omega, cfg.bc.decoding_set)
    we, de = _rx(omega, cfg.bc.malicious_set)
    n = cfg.M * cfg.K
    need = max(dr ** n * db, dr ** n * de)
    if need > cfg.dim_cap:
        raise DimensionCapError(f"simulation needs dimension {need} > cap {cfg.dim_cap}")
    rho_r = la.partial_trace(wb, (dr, db), [0])
    return Code(cfg, omega, wb, we, rho_r, dr, db, de)


# ---------------------------------------------------------------------------
# decoding


@dataclass
class Decoder:
    S: list[np.ndarray]
    Lambda: list[np.ndarray]
    completion: np.ndarray
    test: np.ndarray
    regularized: bool = False

    def completeness_residual(self) -> float:
        tot = sum(self.Lambda) + self.completion
        return float(np.max(np.abs(tot - np.eye(tot.shape[0]))))


def test_operator(code: Code) -> tuple[np.ndarray, oneshot.OneShotResult]:
    prod = np.kron(code.rho_r, la.partial_trace(code.omega_rb, (code.dr, code.db), [1]))
    r = oneshot.d_hypo_matrix(code.omega_rb, prod, code.cfg.test_eps)
    T = la.herm(r.artifacts["Lambda"])
    # clip to 0 <= T <= I against round-off
    w, v = np.linalg.eigh(T)
    return la.herm((v * np.clip(w, 0, 1)) @ v.conj().T), r


def build_decoder(code: Code, T: np.ndarray | None = None) -> Decoder:
    if T is None:
        T, _ = test_operator(code)
    n = code.n_blocks
    S = [_place_op(T, j, n, code.dr, code.db) for j in range(n)]
    tot = sum(S)
    w = np.linalg.eigvalsh(tot)
    regularized = bool(np.any((w > 0) & (w < PINV_TOL)))
    if regularized:
        log.info("build_decoder: near-singular sum of test operators; pseudo-inverse threshold %.1e", PINV_TOL)
    isq = la.inv_sqrtm_psd(tot, PINV_TOL)
    Lam = [la.herm(isq @ s @ isq) for s in S]
    comp = la.herm(np.eye(tot.shape[0]) - sum(Lam))
    return Decoder(S, Lam, comp, T, regularized)


def decoding_errors(code: Code, dec: Decoder) -> tuple[list[float], list[float]]:
    """Per-(m,k) block errors and per-message errors (averaged over k)."""
    M, K = code.cfg.M, code.cfg.K
    errs, msg = [], []
    for m in range(M):
        lam_m = sum(dec.Lambda[m * K:(m + 1) * K])
        e_m = 0.0
        for k in range(K):
            j = m * K + k
            st = code.block_state(j, "B")
            errs.append(1.0 - float(np.trace(dec.Lambda[j] @ st).real))
            e_m += (1.0 - float(np.trace(lam_m @ st).real)) / K
        msg.append(e_m)
    return errs, msg


def hn_residual(dec: Decoder, j: int, c: float) -> float:
    """min eig of (1+c)(I-S) + (2+c+1/c)T - (I - (S+T)^{-1/2} S (S+T)^{-1/2})."""
    S = dec.S[j]
    T = sum(s for i, s in enumerate(dec.S) if i != j) if len(dec.S) > 1 else np.zeros_like(S)
    I = np.eye(S.shape[0])
    isq = la.inv_sqrtm_psd(S + T, PINV_TOL)
    lhs = I - isq @ S @ isq
    rhs = (1 + c) * (I - S) + (2 + c + 1 / c) * T
    return la.min_eig(rhs - lhs)


def hn_error_bound(code: Code, T: np.ndarray, c: float) -> float:
    """(1+c) Tr((I-T) omega_RB) + (2+c+1/c)(N-1) Tr(T omega_R (x) omega_B)."""
    prod = np.kron(code.rho_r, la.partial_trace(code.omega_rb, (code.dr, code.db), [1]))
    miss = 1.0 - float(np.trace(T @ code.omega_rb).real)
    false = float(np.trace(T @ prod).real)
    return (1 + c) * miss + (2 + c + 1 / c) * (code.n_blocks - 1) * false


# ---------------------------------------------------------------------------
# security


def eve_message_state(code: Code, m: int, spectators: bool = True) -> np.ndarray:
    """k-average of Eve's state.  With ``spectators=False`` the other messages' R blocks are traced out."""
    K, M = code.cfg.K, code.cfg.M
    if spectators:
        n = M * K
        return sum(_place(code.omega_re, code.rho_r, m * K + k, n, code.dr, code.de) for k in range(K)) / K
    return sum(_place(code.omega_re, code.rho_r, k, K, code.dr, code.de) for k in range(K)) / K


def _tdist(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * la.trace_norm(a - b)


def optimal_product_sigma(rho: np.ndarray, prefix: np.ndarray, de: int,
                          tol: sdp.SolverTolerances | None = None) -> tuple[float, np.ndarray]:
    """min over states s_E of (1/2)||rho - prefix (x) s_E||_1 as an SDP."""
    n = rho.shape[0]
    b = sdp.SdpBuilder()
    P = b.block("P", n)
    N = b.block("N", n)
    s = b.block("sigma_E", de)
    b.set_objective(P, 0.5 * np.eye(n))
    b.set_objective(N, 0.5 * np.eye(n))
    b.add_map_equality({P: lambda x: x, N: lambda x: -x, s: lambda x: np.kron(prefix, x)}, rho, "P - N + prefix(x)s = rho")
    b.add_scalar({s: np.eye(de)}, 1.0, "Tr s = 1")
    sol = sdp.solve(b.build("min"), tol)
    sig = la.herm(sol.X[s])
    return _tdist(rho, np.kron(prefix, sig)), sig


def measure_security(code: Code) -> dict[str, Any]:
    M, K = code.cfg.M, code.cfg.K
    dr, de = code.dr, code.de
    rho_e = la.partial_trace(code.omega_re, (dr, de), [1])
    prefix = reduce(np.kron, [code.rho_r] * K, np.eye(1))
    # spectator messages' R blocks are identical in rho^m and the product reference and drop out
    states = [eve_message_state(code, m, spectators=False) for m in range(M)]
    avg_e = la.partial_trace(states[0], [dr] * K + [de], [K])
    candidates = {"rho_E": rho_e, "k_averaged_E_marginal": avg_e}
    prod = {name: max(_tdist(st, np.kron(prefix, s)) for st in states) for name, s in candidates.items()}
    best_name = min(prod, key=prod.get)
    out = {"delta_product": prod[best_name], "sigma_product": best_name, "delta_product_candidates": prod}
    if code.cfg.optimize_sigma:
        val, sig = optimal_product_sigma(states[0], prefix, de)
        out["delta_product_optimized"] = max(_tdist(st, np.kron(prefix, sig)) for st in states)
    full = [eve_message_state(code, m, spectators=True) for m in range(M)]
    mix = sum(full) / M
    out["delta_mixture"] = max(_tdist(st, mix) for st in full)
    choices = {"product": out["delta_product"], "mixture": out["delta_mixture"]}
    if "delta_product_optimized" in out:
        choices["product_optimized"] = out["delta_product_optimized"]
    out["sigma_ref"] = min(choices, key=choices.get)
    out["delta_achieved"] = choices[out["sigma_ref"]]
    return out


# ---------------------------------------------------------------------------
# predictions and assembly


def predicted_sizes(code: Code) -> dict[str, Any]:
    cfg = code.cfg
    w = code.omega
    ih = oneshot.i_hypo(w, [REF], list(cfg.bc.decoding_set), cfg.eps - cfg.eta1)
    if cfg.bc.malicious_set:
        im = oneshot.i_max_tilde(w, list(cfg.bc.malicious_set), [REF], math.sqrt(cfg.delta) - cfg.eta2)
        imv = im.value
    else:
        imv = 0.0
    log2mk = ih.value - math.log2(4 * cfg.eps / cfg.eta1 ** 2)
    log2k = imv + 2 * math.log2(1 / cfg.eta2)
    K = max(1, math.ceil(2 ** log2k - 1e-9))
    MK = math.floor(2 ** log2mk + 1e-9) if log2mk > -60 else 0
    M = MK // K
    return {"log2MK": log2mk, "log2K": log2k, "I_H": ih.value, "I_max_tilde": imv,
            "M_rounded": M, "K_rounded": K, "vacuous": M < 1}


@dataclass
class ProtocolReport:
    M: int
    K: int
    eps_achieved: float
    eps_message: float
    delta_achieved: float
    delta_product: float
    delta_mixture: float
    sigma_ref: str
    povm_residual: float
    hn_bound: float
    predicted: dict[str, Any]
    expect_eps: bool
    expect_delta: bool
    eps_ok: bool
    delta_ok: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def run_protocol(cfg: CodeConfig) -> ProtocolReport:
    code = build_code(cfg)
    T, _ = test_operator(code)
    dec = build_decoder(code, T)
    errs, msg = decoding_errors(code, dec)
    sec = measure_security(code)
    pred = predicted_sizes(code)
    expect_eps = math.log2(cfg.M * cfg.K) <= pred["log2MK"] + 1e-12
    expect_delta = math.log2(cfg.K) >= pred["log2K"] - 1e-12
    eps_ach = max(0.0, max(errs))
    delta_ach = sec["delta_achieved"]
    sq = math.sqrt(cfg.delta)
    eps_ok = eps_ach <= cfg.eps + 1e-12
    delta_ok = delta_ach <= sq + 1e-12
    if expect_eps and not eps_ok:
        log.error("reliability prediction violated: eps_achieved=%.6f > eps=%.6f", eps_ach, cfg.eps)
    if expect_delta and not delta_ok:
        log.error("security prediction violated: delta_achieved=%.6f > sqrt(delta)=%.6f", delta_ach, sq)
    details = {"block_errors": errs, "message_errors": msg, "security": sec,
               "decoder_regularized": dec.regularized, "dims": {"R": code.dr, "B": code.db, "E": code.de}}
    return ProtocolReport(cfg.M, cfg.K, eps_ach, max(msg), delta_ach, sec["delta_product"], sec["delta_mixture"],
                          sec["sigma_ref"], dec.completeness_residual(), hn_error_bound(code, T, cfg.hn_c), pred,
                          expect_eps, expect_delta, eps_ok, delta_ok, details)


# ---------------------------------------------------------------------------
# convex split


def convex_split_state(rho_ab: np.ndarray, da: int, db: int, K: int) -> np.ndarray:
    """(1/K) sum_k rho_A^{(x)(k-1)} (x) rho_{A_k B} (x) rho_A^{(x)(K-k)} on A_1..A_K B."""
    ra = la.partial_trace(rho_ab, (da, db), [0])
    return sum(_place(rho_ab, ra, k, K, da, db) for k in range(K)) / K


def convex_split_check(rho_ab: np.ndarray, da: int, db: int, delta: float, eta: float,
                       dim_cap: int = DIM_CAP) -> dict[str, Any]:
    """Choose K by the key-size rule (rounded up) and evaluate the convex-split endpoint exactly.

    ``A`` keeps its marginal fixed; the smoothing state's B marginal supplies the candidate rho~_B.
    """
    if not 0 < eta < math.sqrt(delta):
        raise ValueError("eta must lie in (0, sqrt(delta))")
    im = oneshot.i_max_tilde_matrix(rho_ab, da, db, math.sqrt(delta) - eta)
    log2k = im.value + 2 * math.log2(1 / eta)
    K = max(1, math.ceil(2 ** log2k - 1e-9))
    if da ** K * db > dim_cap:
        raise DimensionCapError(f"convex split with K={K} needs dimension {da ** K * db}")
    tau = convex_split_state(rho_ab, da, db, K)
    ra = la.partial_trace(rho_ab, (da, db), [0])
    rb = la.partial_trace(rho_ab, (da, db), [1])
    prefix = reduce(np.kron, [ra] * K, np.eye(1))
    rp_b = la.partial_trace(im.artifacts["rho_prime"], (da, db), [1])
    cands = {"smoothing_marginal": rp_b, "smoothing_marginal_normalized": rp_b / np.trace(rp_b).real, "rho_B": rb}
    dists = {}
    for name, s in cands.items():
        if purified_distance_matrix(rb, s) <= math.sqrt(delta) - eta + 1e-9:
            dists[name] = purified_distance_matrix(tau, np.kron(prefix, s))
    best = min(dists, key=dists.get)
    return {"K": K, "log2K": log2k, "I_max_tilde": im.value, "P": dists[best], "rho_tilde": best,
            "candidates": dists, "bound": math.sqrt(delta), "holds": dists[best] <= math.sqrt(delta) + 1e-9}
