"""Broadcast channels with decoding/malicious label sets, degradability and a channel zoo."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from . import linalg as la
from . import sdp
from .qip import QuantumChannel, Register, RegisterError

log = logging.getLogger(__name__)

DEGRADED_TOL = 1e-6      # primal mismatch below this: degraded
NOT_DEGRADED_TOL = 1e-4  # certified mismatch above this: not degraded


@dataclass(frozen=True)
class BroadcastChannel:
    channel: QuantumChannel
    decoding_set: tuple[str, ...]
    malicious_set: tuple[str, ...]
    name: str = ""
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        out = set(self.channel.out_register.labels)
        object.__setattr__(self, "decoding_set", tuple(sorted(self.decoding_set)))
        object.__setattr__(self, "malicious_set", tuple(sorted(self.malicious_set)))
        if not self.decoding_set:
            raise RegisterError("decoding set must be nonempty")
        bad = (set(self.decoding_set) | set(self.malicious_set)) - out
        if bad:
            raise RegisterError(f"labels {sorted(bad)} are not channel outputs {sorted(out)}")

    @property
    def in_register(self) -> Register:
        return self.channel.in_register

    @property
    def out_register(self) -> Register:
        return self.channel.out_register

    def bob(self) -> QuantumChannel:
        return marginal_channel(self, self.decoding_set)

    def eve(self) -> QuantumChannel:
        return marginal_channel(self, self.malicious_set)

    def tensor(self, other: "BroadcastChannel", suffixes: tuple[str, str] = ("_1", "_2")) -> "BroadcastChannel":
        """Parallel use; labels of each factor get a suffix to stay distinct."""
        s1, s2 = suffixes
        a = _suffix(self.channel, s1)
        b = _suffix(other.channel, s2)
        return BroadcastChannel(a.tensor(b),
                                tuple(l + s1 for l in self.decoding_set) + tuple(l + s2 for l in other.decoding_set),
                                tuple(l + s1 for l in self.malicious_set) + tuple(l + s2 for l in other.malicious_set),
                                name=f"({self.name})x({other.name})")


def _suffix(ch: QuantumChannel, s: str) -> QuantumChannel:
    return ch.relabel({l: l + s for l in ch.in_register.labels}, {l: l + s for l in ch.out_register.labels})


def marginal_channel(bc: BroadcastChannel | QuantumChannel, keep: Iterable[str]) -> QuantumChannel:
    ch = bc.channel if isinstance(bc, BroadcastChannel) else bc
    reg = ch.out_register
    keep = sorted(set(keep))
    for l in keep:
        reg.index(l)
    if keep == list(reg.labels):
        return ch
    keep_idx = [reg.index(l) for l in keep]
    drop_idx = [i for i in range(len(reg.labels)) if i not in keep_idx]
    dk = reg.dim_of(keep)
    dd = reg.dim // dk
    din = ch.in_register.dim
    perm = keep_idx + drop_idx
    ks = []
    for k in ch.kraus:
        t = k.reshape(list(reg.dims) + [din])
        t = t.transpose(perm + [len(reg.dims)]).reshape(dk, dd, din)
        for j in range(dd):
            ks.append(t[:, j, :])
    ks = [k for k in ks if np.linalg.norm(k) > 1e-15] or [np.zeros((dk, din))]
    return QuantumChannel(tuple(ks), ch.in_register, reg.sub(keep), check=False)


# ---------------------------------------------------------------------------
# degradability


@dataclass
class DegradabilityReport:
    degraded: bool | str          # True, False or "undetermined"
    degrading_map: QuantumChannel | None
    residual: float               # trace-norm Choi mismatch of the extracted map (nan if none)
    dual_margin: float            # certified lower bound on the best achievable mismatch
    primal_mismatch: float
    status: str = ""

    def to_dict(self) -> dict:
        return {"degraded": self.degraded, "residual": self.residual, "dual_margin": self.dual_margin,
                "primal_mismatch": self.primal_mismatch, "status": self.status,
                "has_degrading_map": self.degrading_map is not None}


def link_choi(choi_first: np.ndarray, choi_second: np.ndarray, d_in: int, d_mid: int, d_out: int) -> np.ndarray:
    """Choi operator of second o first from the two Choi operators."""
    x = choi_first.reshape(d_in, d_mid, d_in, d_mid)
    j = choi_second.reshape(d_mid, d_out, d_mid, d_out)
    return np.einsum("abcd,bedf->aecf", x, j).reshape(d_in * d_out, d_in * d_out)


def check_degraded(bc: BroadcastChannel, tol: sdp.SolverTolerances | None = None) -> DegradabilityReport:
    """Robust feasibility for a degrading map T: Bob -> Eve.

    Solves  min t  s.t.  -t I <= Choi(T o N_B) - Choi(N_E) <= t I,  Choi(T) >= 0,  Tr_E Choi(T) = I_B.
    The optimal t is zero exactly when the channel is degraded; the dual
    objective is a certified lower bound on t and serves as the margin.
    """
    nb, ne = bc.bob(), bc.eve()
    da, db, de = bc.in_register.dim, nb.out_register.dim, ne.out_register.dim
    cb, ce = nb.choi, ne.choi
    n = da * de
    b = sdp.SdpBuilder()
    J = b.block("choi_T", db * de)
    P = b.block("upper", n)
    Q = b.block("lower", n)
    t = b.block("t", 1)
    b.set_objective(t, np.eye(1))
    L = lambda x: link_choi(cb, x, da, db, de)
    I = np.eye(n)
    b.add_map_equality({t: lambda x: x[0, 0] * I, J: lambda x: -L(x), P: lambda x: -x}, -ce, "tI - diff")
    b.add_map_equality({t: lambda x: x[0, 0] * I, J: L, Q: lambda x: -x}, ce, "tI + diff")
    b.add_map_equality({J: lambda x: la.partial_trace(x, (db, de), [0])}, np.eye(db), "Tr_E J = I")
    sol = sdp.solve(b.build("min"), tol)
    tmin, margin = sol.primal_obj, max(sol.dual_obj, 0.0)
    log.info("check_degraded: status=%s primal=%.3e dual=%.3e", sol.status, tmin, sol.dual_obj)
    tmap, resid = None, float("nan")
    if sol.status in ("optimal", "max_iter") and tmin <= DEGRADED_TOL:
        tmap = _project_choi(sol.X[J], nb.out_register, ne.out_register)
        resid = 0.5 * la.trace_norm(link_choi(cb, tmap.choi, da, db, de) - ce)
    if tmap is not None and resid <= DEGRADED_TOL:
        verdict = True
    elif sol.status == "optimal" and margin >= NOT_DEGRADED_TOL:
        verdict = False
    else:
        verdict = "undetermined"
    return DegradabilityReport(verdict, tmap, resid, margin, tmin, sol.status)


def _project_choi(J: np.ndarray, in_reg: Register, out_reg: Register) -> QuantumChannel:
    """Nearby exact CPTP map: clip negative eigenvalues and renormalize Tr_out."""
    db, de = in_reg.dim, out_reg.dim
    w, v = np.linalg.eigh(la.herm(J))
    J = (v * np.clip(w, 0, None)) @ v.conj().T
    m = la.inv_sqrtm_psd(la.partial_trace(J, (db, de), [0]), 1e-14)
    K = np.kron(m, np.eye(de))
    J = K @ J @ K.conj().T
    return QuantumChannel.from_choi(J, in_reg, out_reg)


# ---------------------------------------------------------------------------
# zoo


def _from_isometry(V: np.ndarray, din: int, db: int, de: int, b_label="B", e_label="E") -> QuantumChannel:
    return QuantumChannel((V,), Register(("A",), (din,)), Register((b_label, e_label), (db, de)))


def identity_with_trivial_eve(d: int = 2, e_dim: int = 2) -> BroadcastChannel:
    V = np.kron(np.eye(d), la.ket(0, e_dim).reshape(-1, 1))
    return BroadcastChannel(_from_isometry(V, d, d, e_dim), ("B",), ("E",), "identity_with_trivial_eve",
                            {"d": d, "e_dim": e_dim})


def dephasing_broadcast(p: float) -> BroadcastChannel:
    _unit(p, "p")
    Z = np.diag([1.0, -1.0])
    V = math.sqrt(1 - p) * np.kron(np.eye(2), la.ket(0, 2).reshape(-1, 1)) + \
        math.sqrt(p) * np.kron(Z, la.ket(1, 2).reshape(-1, 1))
    return BroadcastChannel(_from_isometry(V, 2, 2, 2), ("B",), ("E",), "dephasing_broadcast", {"p": p})


def amplitude_damping_stinespring(gamma: float) -> BroadcastChannel:
    _unit(gamma, "gamma")
    V = np.zeros((4, 2), dtype=complex)
    V[0, 0] = 1.0                        # |0> -> |0>_B |0>_E
    V[2, 1] = math.sqrt(1 - gamma)       # |1> -> sqrt(1-g)|1>_B|0>_E
    V[1, 1] = math.sqrt(gamma)           #      + sqrt(g)|0>_B|1>_E
    return BroadcastChannel(_from_isometry(V, 2, 2, 2), ("B",), ("E",), "amplitude_damping_stinespring",
                            {"gamma": gamma})


def depolarizing_stinespring(p: float) -> BroadcastChannel:
    _unit(p, "p")
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    V = sum(math.sqrt(w) * np.kron(P, la.ket(i, 4).reshape(-1, 1)) for i, (w, P) in enumerate(zip(weights, paulis)))
    return BroadcastChannel(_from_isometry(V, 2, 2, 4), ("B",), ("E",), "depolarizing_stinespring", {"p": p})


def erasure_broadcast(p: float) -> BroadcastChannel:
    """Qubit erasure with erasure flag |2>; Eve receives the complementary erasure."""
    _unit(p, "p")
    V = np.zeros((9, 2), dtype=complex)
    for i in range(2):
        V[i * 3 + 2, i] += math.sqrt(1 - p)   # |i>_B |e>_E
        V[2 * 3 + i, i] += math.sqrt(p)       # |e>_B |i>_E
    return BroadcastChannel(_from_isometry(V, 2, 3, 3), ("B",), ("E",), "erasure_broadcast", {"p": p})


def compromised_lab(base: BroadcastChannel) -> BroadcastChannel:
    """Eve holds part E of Bob's laboratory: decoding set {B, E}, malicious set {E}."""
    labels = base.out_register.labels
    if set(labels) != {"B", "E"}:
        raise RegisterError("compromised_lab expects a base channel with outputs B and E")
    return BroadcastChannel(base.channel, ("B", "E"), ("E",), f"compromised_lab({base.name})",
                            {"base": {"name": base.name, "params": base.params}})


def replacer_eve(bob: QuantumChannel, sigma: np.ndarray) -> BroadcastChannel:
    """Bob gets ``bob``; Eve's output is the fixed state ``sigma``."""
    fac = la.psd_factor(sigma)
    ks = [np.kron(k, fac[:, j].reshape(-1, 1)) for k in bob.kraus for j in range(fac.shape[1])]
    reg = Register(("B", "E"), (bob.out_register.dim, sigma.shape[0]))
    return BroadcastChannel(QuantumChannel(tuple(ks), bob.in_register, reg), ("B",), ("E",), "replacer_eve")


def fully_depolarizing_trivial_eve(d: int = 2) -> BroadcastChannel:
    ks = [np.outer(la.ket(i, d), la.ket(j, d)) / math.sqrt(d) for i in range(d) for j in range(d)]
    bob = QuantumChannel(tuple(ks), Register(("A",), (d,)), Register(("B",), (d,)))
    bc = replacer_eve(bob, np.diag([1.0, 0.0]))
    return BroadcastChannel(bc.channel, bc.decoding_set, bc.malicious_set, "fully_depolarizing_trivial_eve", {"d": d})


def same_sets(base: BroadcastChannel) -> BroadcastChannel:
    """Decoding and malicious sets coincide (P_EA = 0)."""
    return BroadcastChannel(base.channel, base.decoding_set, base.decoding_set, f"same_sets({base.name})")


ZOO = {
    "identity_with_trivial_eve": identity_with_trivial_eve,
    "dephasing_broadcast": dephasing_broadcast,
    "amplitude_damping_stinespring": amplitude_damping_stinespring,
    "depolarizing_stinespring": depolarizing_stinespring,
    "erasure_broadcast": erasure_broadcast,
    "fully_depolarizing_trivial_eve": fully_depolarizing_trivial_eve,
}


def channel_zoo(name: str, params: dict | None = None) -> BroadcastChannel:
    params = dict(params or {})
    if name == "compromised_lab":
        base = params.pop("base", None)
        if isinstance(base, dict):
            base = channel_zoo(base["name"], base.get("params"))
        if not isinstance(base, BroadcastChannel):
            raise ValueError("compromised_lab needs a base channel")
        return compromised_lab(base)
    if name not in ZOO:
        raise ValueError(f"unknown zoo channel {name!r}; choose from {sorted(ZOO) + ['compromised_lab']}")
    return ZOO[name](**params)


def _unit(x: float, name: str):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


# ---------------------------------------------------------------------------
# random degraded channels for tests and experiments


def random_degraded_broadcast(rng: np.random.Generator, kind: str | None = None) -> BroadcastChannel:
    kinds = ["classical_copy", "compromised_lab", "amplitude_damping", "dephasing"]
    kind = kind or kinds[int(rng.integers(len(kinds)))]
    U = la.random_unitary(2, rng)
    A = Register(("A",), (2,))
    if kind == "classical_copy":
        t0 = la.random_kraus(2, 2, rng, 2)
        ks = []
        for z in range(2):
            for k in t0:
                ks.append(np.kron(la.ket(z, 2).reshape(-1, 1), (k @ la.ket(z, 2)).reshape(-1, 1)) @ la.ket(z, 2).reshape(1, -1) @ U)
        ch = QuantumChannel(tuple(ks), A, Register(("B", "E"), (2, 2)))
        return BroadcastChannel(ch, ("B",), ("E",), "random_classical_copy")
    if kind == "compromised_lab":
        ks = la.random_kraus(2, 4, rng, 2)
        ch = QuantumChannel(tuple(ks), A, Register(("B", "E"), (2, 2)))
        return BroadcastChannel(ch, ("B", "E"), ("E",), "random_compromised_lab")
    if kind == "amplitude_damping":
        base = amplitude_damping_stinespring(float(rng.uniform(0.05, 0.45)))
    elif kind == "dephasing":
        base = dephasing_broadcast(float(rng.uniform(0.05, 0.45)))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    V = base.channel.kraus[0] @ U
    return BroadcastChannel(QuantumChannel((V,), A, base.out_register), ("B",), ("E",), f"random_{kind}")
