"""EA private information, CMI capacity, additivity checks and one-shot/second-order bounds."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize

from . import entropies as ent
from . import linalg as la
from . import oneshot
from .broadcast import BroadcastChannel, check_degraded, marginal_channel
from .qip import DensityOperator, PureState, Register, RegisterError, apply_channel

log = logging.getLogger(__name__)

REF = "R"


@dataclass
class CapacityOptions:
    restarts: int = 32
    seed: int = 0
    opt_tol: float = 1e-7
    max_iter: int = 3000
    jobs: int = 1
    check_degraded: bool = True


@dataclass
class CapacityResult:
    value: float
    argmax_state: PureState | DensityOperator | None
    restarts_used: int
    gradient_norm_at_opt: float
    per_restart: list[float]
    label: str = "optimized"
    degraded: bool | str | None = None
    terms: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "restarts_used": self.restarts_used,
                "gradient_norm_at_opt": self.gradient_norm_at_opt, "per_restart": self.per_restart,
                "label": self.label, "degraded": self.degraded, "terms": self.terms}


# ---------------------------------------------------------------------------
# objective: sum_X s_X H(rho_X) over marginals of (N (x) id)(psi)


class EntropyObjective:
    """Linear combination of marginal entropies of the channel output.

    The input vector lives on A (x) R (x) F where F is an optional purifying
    system that nobody receives (F = 1 gives pure inputs).  Each term is
    ``(output labels, include R, sign)``.
    """

    def __init__(self, channel, terms: Sequence[tuple[Sequence[str], bool, float]], d_ref: int | None = None, d_purifier: int = 1):
        self.channel = channel
        self.din = channel.in_register.dim
        self.dr = d_ref or self.din
        self.df = d_purifier
        self.n = self.din * self.dr * self.df
        self.terms = []
        for labels, with_r, sign in terms:
            m = marginal_channel(channel, labels)
            self.terms.append((tuple(sorted(labels)), with_r, float(sign), m.kraus_stack, m.out_register.dim))

    def _psi(self, v: np.ndarray, ks: np.ndarray) -> np.ndarray:
        V = v.reshape(self.din, self.dr, self.df)
        return np.einsum("koa,arf->korf", ks, V, optimize=True)

    @staticmethod
    def _marg(psi: np.ndarray, with_r: bool) -> np.ndarray:
        k, do, dr, df = psi.shape
        if with_r:
            p = psi.transpose(0, 3, 1, 2).reshape(k * df, do * dr)
            return la.herm(p.T @ p.conj())
        p = psi.transpose(0, 2, 3, 1).reshape(k * dr * df, do)
        return la.herm(p.T @ p.conj())

    def value(self, v: np.ndarray) -> float:
        v = v / np.linalg.norm(v)
        total = 0.0
        for labels, with_r, sign, ks, do in self.terms:
            total += sign * ent.entropy_matrix(self._marg(self._psi(v, ks), with_r))
        return total

    def value_and_grad(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        """Value and complex gradient w with df = Re(w^dagger dv)."""
        nv = float(np.vdot(v, v).real)
        u = v / math.sqrt(nv)
        total = 0.0
        Gu = np.zeros(self.n, dtype=complex)
        for labels, with_r, sign, ks, do in self.terms:
            psi = self._psi(u, ks)
            rho = self._marg(psi, with_r)
            w, vec = np.linalg.eigh(rho)
            keep = w > la.PSD_TOL
            total += sign * float(-np.sum(w[keep] * np.log2(w[keep])))
            Y = -(vec[:, keep] * np.log2(w[keep])) @ vec[:, keep].conj().T
            if with_r:
                Ypsi = np.einsum("xy,kyf->kxf", Y, psi.reshape(psi.shape[0], do * self.dr, self.df))
                Ypsi = Ypsi.reshape(psi.shape)
            else:
                Ypsi = np.einsum("op,kprf->korf", Y, psi)
            Gu += sign * np.einsum("koa,korf->arf", ks.conj(), Ypsi).reshape(-1)
        # G acts on the normalized vector; rescale to the unnormalized one
        g = 2 * (Gu - np.vdot(u, Gu).real * u) / math.sqrt(nv)
        return total, g

    def riemannian_grad_norm(self, v: np.ndarray) -> float:
        _, g = self.value_and_grad(v / np.linalg.norm(v))
        return float(np.linalg.norm(g))


def private_objective(bc: BroadcastChannel, d_purifier: int = 1) -> EntropyObjective:
    """I(R;B) - I(R;E) = H(B) - H(BR) - H(E) + H(ER)."""
    return EntropyObjective(bc.channel, [(bc.decoding_set, False, 1.0), (bc.decoding_set, True, -1.0),
                                         (bc.malicious_set, False, -1.0), (bc.malicious_set, True, 1.0)],
                            d_purifier=d_purifier)


def cmi_objective(bc: BroadcastChannel) -> EntropyObjective:
    """I(R;B|E) = H(RE) + H(BE) - H(RBE) - H(E) with B the decoding-only outputs."""
    E = list(bc.malicious_set)
    BE = sorted(set(bc.decoding_set) | set(E))
    return EntropyObjective(bc.channel, [(E, True, 1.0), (BE, False, 1.0), (BE, True, -1.0), (E, False, -1.0)])


def _real(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag])


def _cplx(x: np.ndarray) -> np.ndarray:
    h = x.size // 2
    return x[:h] + 1j * x[h:]


def _ascend(obj: EntropyObjective, v0: np.ndarray, opts: CapacityOptions) -> tuple[float, np.ndarray, float]:
    def fun(x):
        f, g = obj.value_and_grad(_cplx(x))
        return -f, -_real(g)

    res = minimize(fun, _real(v0), jac=True, method="L-BFGS-B",
                   options={"maxiter": opts.max_iter, "gtol": opts.opt_tol * 1e-2, "ftol": 1e-15, "maxcor": 30})
    v = _cplx(res.x)
    v = v / np.linalg.norm(v)
    return obj.value(v), v, obj.riemannian_grad_norm(v)


def maximize(obj: EntropyObjective, opts: CapacityOptions) -> tuple[float, np.ndarray, float, list[float]]:
    def run(i):
        rng = np.random.default_rng([opts.seed, i])
        return _ascend(obj, la.random_pure(obj.n, rng), opts)

    if opts.jobs > 1:
        with ThreadPoolExecutor(opts.jobs) as pool:
            results = list(pool.map(run, range(opts.restarts)))
    else:
        results = [run(i) for i in range(opts.restarts)]
    vals = [r[0] for r in results]
    best = int(np.argmax(vals))
    return vals[best], results[best][1], results[best][2], vals


def _input_register(bc: BroadcastChannel, d_ref: int) -> Register:
    return bc.in_register.concat(Register((REF,), (d_ref,)))


def ea_private_information(bc: BroadcastChannel, opts: CapacityOptions | None = None) -> CapacityResult:
    opts = opts or CapacityOptions()
    if REF in bc.out_register.labels:
        raise RegisterError(f"output label {REF!r} is reserved for the reference system")
    degraded = check_degraded(bc).degraded if opts.check_degraded else None
    obj = private_objective(bc)
    val, v, gnorm, vals = maximize(obj, opts)
    state = PureState(v, _input_register(bc, obj.dr))
    label = "optimized" if degraded in (True, None) else "pure-state-restricted heuristic"
    res = CapacityResult(val, state, opts.restarts, gnorm, vals, label, degraded)
    res.terms = mutual_information_terms(bc, state.density())
    return res


def cmi_capacity(bc: BroadcastChannel, opts: CapacityOptions | None = None) -> CapacityResult:
    opts = opts or CapacityOptions()
    if not set(bc.malicious_set) <= set(bc.decoding_set) or set(bc.malicious_set) == set(bc.decoding_set):
        raise ValueError("cmi_capacity needs the compromised-lab geometry: malicious set strictly inside the decoding set")
    obj = cmi_objective(bc)
    val, v, gnorm, vals = maximize(obj, opts)
    state = PureState(v, _input_register(bc, obj.dr))
    return CapacityResult(val, state, opts.restarts, gnorm, vals, "optimized", True)


def ea_private_information_mixed(bc: BroadcastChannel, rank: int = 2, opts: CapacityOptions | None = None) -> CapacityResult:
    """Ascent over rank-limited mixed inputs rho_RA (purified by an untransmitted system)."""
    opts = opts or CapacityOptions()
    obj = private_objective(bc, d_purifier=rank)
    val, v, gnorm, vals = maximize(obj, opts)
    return CapacityResult(val, None, opts.restarts, gnorm, vals, f"mixed-rank-{rank}")


def mutual_information_terms(bc: BroadcastChannel, rho_in: DensityOperator) -> dict[str, float]:
    w = channel_output(bc, rho_in)
    ib = ent.mutual_information(w, [REF], list(bc.decoding_set))
    ie = ent.mutual_information(w, [REF], list(bc.malicious_set))
    return {"I(R;B)": ib, "I(R;E)": ie, "difference": ib - ie}


def channel_output(bc: BroadcastChannel, rho_in: DensityOperator) -> DensityOperator:
    return apply_channel(bc.channel, rho_in, list(bc.in_register.labels))


@dataclass
class AdditivityReport:
    tensor_value: float
    sum_value: float
    gap: float
    verdict: str
    parts: tuple[float, float]

    def to_dict(self) -> dict:
        return {"tensor_value": self.tensor_value, "sum_value": self.sum_value, "gap": self.gap,
                "verdict": self.verdict, "parts": list(self.parts)}


def additivity_check(bc1: BroadcastChannel, bc2: BroadcastChannel, opts: CapacityOptions | None = None,
                     tensor_restarts: int = 64, add_tol: float = 1e-3) -> AdditivityReport:
    opts = opts or CapacityOptions()
    for bc in (bc1, bc2):
        if check_degraded(bc).degraded is not True:
            log.warning("additivity_check: %s is not certified degraded", bc.name)
    p1 = ea_private_information(bc1, opts).value
    p2 = ea_private_information(bc2, opts).value
    t_opts = CapacityOptions(**{**opts.__dict__, "restarts": tensor_restarts, "check_degraded": False})
    pt = ea_private_information(bc1.tensor(bc2), t_opts).value
    gap = pt - p1 - p2
    if abs(gap) <= add_tol:
        verdict = "consistent"
    elif gap < 0:
        verdict = "optimizer-shortfall"
    else:
        verdict = "red-flag: tensor exceeds sum"
    return AdditivityReport(pt, p1 + p2, gap, verdict, (p1, p2))


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundReport:
    kind: str
    value: float
    parameters: dict[str, Any]
    terms: dict[str, Any]
    certified: bool = True
    notes: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "parameters": self.parameters, "terms": self.terms,
                "certified": self.certified, "notes": self.notes}


def maximally_entangled_input(bc: BroadcastChannel) -> DensityOperator:
    d = bc.in_register.dim
    return DensityOperator(la.proj(la.max_entangled(d)), _input_register(bc, d), check=False)


def thm1_lower_bound(bc: BroadcastChannel, rho_ra: DensityOperator, eps: float, delta: float,
                     eta1: float, eta2: float) -> BoundReport:
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    if not 0 < eta1 < eps:
        raise ValueError("eta1 must lie in (0, eps)")
    if not 0 < eta2 < math.sqrt(delta):
        raise ValueError("eta2 must lie in (0, sqrt(delta))")
    w = channel_output(bc, rho_ra)
    ih = oneshot.i_hypo(w, [REF], list(bc.decoding_set), eps - eta1)
    if bc.malicious_set:
        im = oneshot.i_max_tilde(w, list(bc.malicious_set), [REF], math.sqrt(delta) - eta2)
    else:
        im = oneshot.OneShotResult(0.0, True, oneshot.CLOSED_FORM)
    c1 = math.log2(4 * eps / eta1 ** 2)
    c2 = 2 * math.log2(1 / eta2)
    log2mk = ih.value - c1
    log2k = im.value + c2
    terms = {"I_H": ih.value, "I_max_tilde": im.value, "I_max_tilde_bracket": [im.lower, im.upper],
             "log2(4eps/eta1^2)": c1, "2log2(1/eta2)": c2, "log2MK": log2mk, "log2K": log2k,
             "I_H_method": ih.method, "I_max_method": im.method}
    return BoundReport("thm1_lower", log2mk - log2k,
                       {"eps": eps, "delta": delta, "eta1": eta1, "eta2": eta2}, terms,
                       ih.certified and im.certified)


def weyl_operators(d: int) -> list[np.ndarray]:
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b) for a in range(d) for b in range(d)]


def code_state(bc: BroadcastChannel, rho_ra: DensityOperator, M: int) -> DensityOperator:
    """(1/M) sum_m |m><m| (x) (U_m (x) I_R) rho_RA (U_m (x) I_R)^dagger with Weyl U_m on A."""
    din = bc.in_register.dim
    ops = weyl_operators(din)
    if not 1 <= M <= len(ops):
        raise ValueError(f"M must lie in [1, {len(ops)}]")
    labels = list(rho_ra.labels)
    a_labels = list(bc.in_register.labels)
    order = [rho_ra.register.index(l) for l in a_labels + [REF]]
    base = la.permute_systems(rho_ra.matrix, rho_ra.dims, order)
    blocks = []
    for m in range(M):
        U = np.kron(ops[m], np.eye(rho_ra.register.dim_of([REF])))
        blocks.append(U @ base @ U.conj().T)
    mat = np.zeros((M * base.shape[0],) * 2, dtype=complex)
    n = base.shape[0]
    for m, blk in enumerate(blocks):
        mat[m * n:(m + 1) * n, m * n:(m + 1) * n] = blk / M
    reg = Register(("M",) + tuple(a_labels) + (REF,), (M,) + tuple(rho_ra.dims[rho_ra.register.index(l)] for l in a_labels)
                   + (rho_ra.register.dim_of([REF]),))
    return DensityOperator(mat, reg, check=False)


def _check_cq(rho: DensityOperator, label: str = "M"):
    i = rho.register.index(label)
    dm = rho.dims[i]
    perm = [i] + [j for j in range(len(rho.dims)) if j != i]
    m = la.permute_systems(rho.matrix, rho.dims, perm)
    n = m.shape[0] // dm
    for a in range(dm):
        for b in range(dm):
            if a != b and np.max(np.abs(m[a * n:(a + 1) * n, b * n:(b + 1) * n]), initial=0) > 1e-9:
                raise ValueError("state is not classical on M")


def thm2_upper_bound(bc: BroadcastChannel, rho_mra: DensityOperator, eps: float, delta: float) -> BoundReport:
    if not (0 < eps < 0.5 and 0 < delta < 0.5):
        raise ValueError("eps and delta must lie in (0, 1/2) so the smoothing radii sqrt(2 eps), sqrt(2 delta) stay below 1")
    _check_cq(rho_mra)
    w = channel_output(bc, rho_mra)
    se, sd = math.sqrt(2 * eps), math.sqrt(2 * delta)
    hmin = oneshot.h_min_smooth(w, ["M"], [REF] + list(bc.malicious_set), sd)
    hmax = oneshot.h_max_smooth(w, ["M"], [REF] + list(bc.decoding_set), se)
    return BoundReport("thm2_upper", hmin.value - hmax.value, {"eps": eps, "delta": delta, "M": rho_mra.dims[rho_mra.register.index("M")]},
                       {"H_min(M|RE)": hmin.value, "H_max(M|RB)": hmax.value,
                        "smoothing": {"H_min": sd, "H_max": se}},
                       hmin.certified and hmax.certified, "evaluated at the supplied state; not a certified supremum")


def thm3_upper_bound(bc: BroadcastChannel, rho_ra: DensityOperator, eps: float, delta: float,
                     iterated_chain: bool = False, degraded: bool | None = None) -> BoundReport:
    if not (0 < eps < 0.125 and 0 < delta < 0.125):
        raise ValueError("eps and delta must lie in (0, 1/8)")
    s = 3 * math.sqrt(2 * eps) + 2 * math.sqrt(2 * delta)
    if s >= 1:
        raise ValueError(f"3 sqrt(2 eps) + 2 sqrt(2 delta) = {s:.4f} must be < 1")
    if degraded is None:
        degraded = check_degraded(bc).degraded
    if degraded is not True:
        raise ValueError("thm3_upper_bound needs a degraded channel")
    params = {"eps": eps, "delta": delta, "iterated_chain": iterated_chain}
    f = ent.f_thm3(eps, delta)
    smooth, extra = s, 0.0
    if iterated_chain:
        if s >= 0.125:
            raise ValueError(f"iterated-chain variant needs eps' = delta' = {s:.4f} < 1/8")
        smooth = 5 * math.sqrt(2 * s)
        if smooth >= 1:
            raise ValueError(f"iterated-chain variant smoothing {smooth:.4f} must be < 1")
        extra = ent.f_thm3(s, s)
    w = channel_output(bc, rho_ra)
    hmin = oneshot.h_min_smooth(w, [REF], list(bc.malicious_set), smooth)
    hmax = oneshot.h_max_smooth(w, [REF], list(bc.decoding_set), smooth)
    terms = {"H_min(R|E)": hmin.value, "H_max(R|B)": hmax.value, "f(eps,delta)": f, "smoothing": smooth}
    if iterated_chain:
        terms["f(eps',delta')"] = extra
    return BoundReport("thm3_upper", hmin.value - hmax.value + f + extra, params, terms,
                       hmin.certified and hmax.certified)


def second_order_rate(bc: BroadcastChannel, rho_ra: DensityOperator, eps: float, delta: float, n: int) -> BoundReport:
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    w = channel_output(bc, rho_ra)
    ib = ent.mutual_information(w, [REF], list(bc.decoding_set))
    ie = ent.mutual_information(w, [REF], list(bc.malicious_set))
    vb = ent.mutual_information_variance(w, [REF], list(bc.decoding_set))
    ve = ent.mutual_information_variance(w, [REF], list(bc.malicious_set)) if bc.malicious_set else 0.0
    qe, qd = ent.gaussian_quantile(eps), ent.gaussian_quantile(delta)
    first = n * (ib - ie)
    sb = math.sqrt(n * vb) * qe
    se = math.sqrt(n * ve) * qd
    return BoundReport("second_order", first + sb + se, {"eps": eps, "delta": delta, "n": n},
                       {"n[I(R;B)-I(R;E)]": first, "sqrt(nV_B)Phi^-1(eps)": sb, "sqrt(nV_E)Phi^-1(delta)": se,
                        "I(R;B)": ib, "I(R;E)": ie, "V(R;B)": vb, "V(R;E)": ve, "O(log n)": "unmodeled"})
