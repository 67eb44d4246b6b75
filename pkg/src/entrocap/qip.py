"""Finite-dimensional states, channels and the distance measures built on them.

Registers are canonicalized to lexicographic label order whenever a state or
channel is constructed, so two operators on the same labels always share a
tensor layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import linalg as la

VALIDATION_TOL = 1e-8


class RegisterError(ValueError):
    """Unknown, duplicated or mismatched subsystem labels."""


@dataclass(frozen=True)
class Register:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise RegisterError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise RegisterError(f"duplicate labels in {self.labels}")
        if any(d < 1 for d in self.dims):
            raise RegisterError(f"dimensions must be >= 1, got {self.dims}")

    @classmethod
    def of(cls, **dims: int) -> "Register":
        return cls(tuple(dims), tuple(dims.values()))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise RegisterError(f"unknown label {label!r}; register has {self.labels}") from None

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(l)] for l in labels]))

    def sub(self, labels: Iterable[str]) -> "Register":
        labels = list(labels)
        return Register(tuple(labels), tuple(self.dims[self.index(l)] for l in labels))

    def without(self, labels: Iterable[str]) -> "Register":
        drop = set(labels)
        for l in drop:
            self.index(l)
        keep = [l for l in self.labels if l not in drop]
        return self.sub(keep)

    def concat(self, other: "Register") -> "Register":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise RegisterError(f"label collision: {sorted(clash)}")
        return Register(self.labels + other.labels, self.dims + other.dims)

    def canonical_perm(self) -> list[int]:
        return sorted(range(len(self.labels)), key=lambda i: self.labels[i])

    def canonical(self) -> "Register":
        return self.sub(sorted(self.labels))

    def is_canonical(self) -> bool:
        return list(self.labels) == sorted(self.labels)

    def rename(self, mapping: dict[str, str]) -> "Register":
        return Register(tuple(mapping.get(l, l) for l in self.labels), self.dims)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityOperator:
    """Subnormalized density operator (trace in (0, 1]) on a labelled register."""

    matrix: np.ndarray
    register: Register
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        reg = self.register
        if m.shape != (reg.dim, reg.dim):
            raise RegisterError(f"matrix shape {m.shape} does not match register dim {reg.dim}")
        if not reg.is_canonical():
            perm = reg.canonical_perm()
            m = la.permute_systems(m, reg.dims, perm)
            reg = Register(tuple(reg.labels[p] for p in perm), tuple(reg.dims[p] for p in perm))
        if self.check:
            scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
            if np.max(np.abs(m - m.conj().T), initial=0.0) > VALIDATION_TOL * scale:
                raise ValueError("density operator is not Hermitian")
            m = la.herm(m)
            if la.min_eig(m) < -VALIDATION_TOL:
                raise ValueError(f"density operator has negative eigenvalue {la.min_eig(m):.3e}")
            tr = float(np.trace(m).real)
            if tr > 1 + VALIDATION_TOL:
                raise ValueError(f"trace {tr} exceeds 1")
        object.__setattr__(self, "matrix", _freeze(m))
        object.__setattr__(self, "register", reg)

    @classmethod
    def from_matrix(cls, matrix, labels: Sequence[str], dims: Sequence[int] | None = None) -> "DensityOperator":
        matrix = np.asarray(matrix, dtype=complex)
        if dims is None:
            if len(labels) != 1:
                raise RegisterError("dims required for multipartite states")
            dims = (matrix.shape[0],)
        return cls(matrix, Register(tuple(labels), tuple(dims)))

    @classmethod
    def from_vector(cls, vec, labels: Sequence[str], dims: Sequence[int] | None = None) -> "DensityOperator":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        return cls.from_matrix(la.proj(vec), labels, dims if dims is not None else (vec.size,))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.register.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.register.dims

    @property
    def dim(self) -> int:
        return self.register.dim

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def ptrace(self, discard: Iterable[str]) -> "DensityOperator":
        return partial_trace(self, discard)

    def marginal(self, keep: Iterable[str]) -> "DensityOperator":
        keep = set(keep)
        for l in keep:
            self.register.index(l)
        return partial_trace(self, [l for l in self.labels if l not in keep])

    def relabel(self, mapping: dict[str, str]) -> "DensityOperator":
        return DensityOperator(self.matrix, self.register.rename(mapping), check=False)

    def scaled(self, c: float) -> "DensityOperator":
        return DensityOperator(c * self.matrix, self.register)


@dataclass(frozen=True)
class PureState:
    vector: np.ndarray
    register: Register

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        reg = self.register
        if v.size != reg.dim:
            raise RegisterError("vector length does not match register dim")
        if abs(np.linalg.norm(v) - 1.0) > VALIDATION_TOL:
            raise ValueError(f"pure state must have unit norm, got {np.linalg.norm(v)}")
        if not reg.is_canonical():
            perm = reg.canonical_perm()
            v = la.permute_vector(v, reg.dims, perm)
            reg = Register(tuple(reg.labels[p] for p in perm), tuple(reg.dims[p] for p in perm))
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "register", reg)

    def density(self) -> DensityOperator:
        return DensityOperator(la.proj(self.vector), self.register, check=False)


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map stored as Kraus operators; the Choi operator is derived."""

    kraus: tuple[np.ndarray, ...]
    in_register: Register
    out_register: Register
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        ks = [np.asarray(k, dtype=complex) for k in self.kraus]
        if not ks:
            raise ValueError("channel needs at least one Kraus operator")
        din, dout = self.in_register.dim, self.out_register.dim
        for k in ks:
            if k.shape != (dout, din):
                raise RegisterError(f"Kraus shape {k.shape} != ({dout}, {din})")
        in_reg, out_reg = self.in_register, self.out_register
        if not in_reg.is_canonical() or not out_reg.is_canonical():
            pin, pout = in_reg.canonical_perm(), out_reg.canonical_perm()
            ks = [_permute_kraus(k, in_reg.dims, pin, out_reg.dims, pout) for k in ks]
            in_reg, out_reg = in_reg.canonical(), out_reg.canonical()
        if self.check:
            comp = sum(k.conj().T @ k for k in ks)
            err = np.max(np.abs(comp - np.eye(din)))
            if err > VALIDATION_TOL:
                raise ValueError(f"Kraus operators are not trace preserving (error {err:.2e})")
        object.__setattr__(self, "kraus", tuple(_freeze(k) for k in ks))
        object.__setattr__(self, "in_register", in_reg)
        object.__setattr__(self, "out_register", out_reg)

    @cached_property
    def kraus_stack(self) -> np.ndarray:
        return np.stack(self.kraus)

    @cached_property
    def choi(self) -> np.ndarray:
        """sum_ij |i><j|_in (x) N(|i><j|), input factor first."""
        vecs = np.stack([k.T.reshape(-1) for k in self.kraus])
        j = vecs.T @ vecs.conj()
        j.setflags(write=False)
        return j

    @classmethod
    def from_choi(cls, choi: np.ndarray, in_register: Register, out_register: Register,
                  check: bool = True, tol: float = 1e-13) -> "QuantumChannel":
        din, dout = in_register.dim, out_register.dim
        w, v = np.linalg.eigh(la.herm(choi))
        ks = []
        for lam, vec in zip(w, v.T):
            if lam > tol:
                ks.append(np.sqrt(lam) * vec.reshape(din, dout).T)
        if not ks:
            ks = [np.zeros((dout, din), dtype=complex)]
        return cls(tuple(ks), in_register, out_register, check=check)

    def apply_matrix(self, mat: np.ndarray) -> np.ndarray:
        ks = self.kraus_stack
        return np.einsum("koi,ij,kpj->op", ks, mat, ks.conj())

    def compose(self, first: "QuantumChannel") -> "QuantumChannel":
        """Return ``self o first``."""
        ks = [a @ b for a in self.kraus for b in first.kraus]
        return QuantumChannel(tuple(ks), first.in_register, self.out_register, check=False)

    def tensor(self, other: "QuantumChannel") -> "QuantumChannel":
        ks = [np.kron(a, b) for a in self.kraus for b in other.kraus]
        return QuantumChannel(tuple(ks), self.in_register.concat(other.in_register),
                              self.out_register.concat(other.out_register), check=False)

    def relabel(self, in_map: dict[str, str] | None = None, out_map: dict[str, str] | None = None) -> "QuantumChannel":
        return QuantumChannel(self.kraus, self.in_register.rename(in_map or {}),
                              self.out_register.rename(out_map or {}), check=False)


def _permute_kraus(k, din_dims, pin, dout_dims, pout):
    dout, din = k.shape
    t = k.reshape(list(dout_dims) + list(din_dims))
    no = len(dout_dims)
    t = t.transpose(list(pout) + [no + p for p in pin])
    return t.reshape(dout, din)


def identity_channel(register: Register) -> QuantumChannel:
    return QuantumChannel((np.eye(register.dim),), register, register)


# ---------------------------------------------------------------------------
# operations


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    reg = a.register.concat(b.register)
    return DensityOperator(np.kron(a.matrix, b.matrix), reg, check=False)


def partial_trace(rho: DensityOperator, discard: Iterable[str]) -> DensityOperator:
    discard = set(discard)
    for l in discard:
        rho.register.index(l)
    keep = [i for i, l in enumerate(rho.labels) if l not in discard]
    mat = la.partial_trace(rho.matrix, rho.dims, keep)
    reg = Register(tuple(rho.labels[i] for i in keep), tuple(rho.dims[i] for i in keep))
    return DensityOperator(la.herm(mat), reg, check=False)


def apply_channel(ch: QuantumChannel, rho: DensityOperator, on: Sequence[str]) -> DensityOperator:
    """Apply ``ch`` to the subsystems ``on`` of ``rho`` (identity elsewhere).

    ``on[i]`` is matched to ``ch.in_register.labels[i]``; the output register
    replaces ``on`` by ``ch.out_register``.
    """
    on = list(on)
    for l in on:
        rho.register.index(l)
    d_on = rho.register.dim_of(on)
    if d_on != ch.in_register.dim:
        raise RegisterError(f"channel input dim {ch.in_register.dim} != dim of {on} ({d_on})")
    if len(on) == len(ch.in_register.dims) and tuple(rho.register.dims[rho.register.index(l)] for l in on) != ch.in_register.dims:
        raise RegisterError("per-subsystem dimensions of 'on' do not match channel input")
    rest = [l for l in rho.labels if l not in on]
    clash = set(rest) & set(ch.out_register.labels)
    if clash:
        raise RegisterError(f"output labels collide with untouched subsystems: {sorted(clash)}")
    order = [rho.register.index(l) for l in on + rest]
    m = la.permute_systems(rho.matrix, rho.dims, order)
    d_rest = rho.dim // d_on
    t = m.reshape(d_on, d_rest, d_on, d_rest)
    ks = ch.kraus_stack
    out = np.einsum("koa,arbs,kpb->orps", ks, t, ks.conj(), optimize=True)
    dout = ch.out_register.dim
    out = la.herm(out.reshape(dout * d_rest, dout * d_rest))
    reg = ch.out_register.concat(rho.register.sub(rest))
    return DensityOperator(out, reg, check=False)


def apply_channel_choi(ch: QuantumChannel, rho: DensityOperator, on: Sequence[str]) -> DensityOperator:
    """Choi-form application, used to cross-check the Kraus route."""
    on = list(on)
    rest = [l for l in rho.labels if l not in on]
    order = [rho.register.index(l) for l in on + rest]
    m = la.permute_systems(rho.matrix, rho.dims, order)
    din, dout = ch.in_register.dim, ch.out_register.dim
    d_rest = rho.dim // din
    t = m.reshape(din, d_rest, din, d_rest)
    j = ch.choi.reshape(din, dout, din, dout)
    # N(X)_{op} = sum_{ij} X_{ij} J_{(j o),(i p)}... with X = |i><j| mapped via J_{i o, j p}
    out = np.einsum("irjs,iojp->orps", t, j, optimize=True)
    out = la.herm(out.reshape(dout * d_rest, dout * d_rest))
    reg = ch.out_register.concat(rho.register.sub(rest))
    return DensityOperator(out, reg, check=False)


def purify(rho: DensityOperator, label: str = "F") -> PureState:
    if abs(rho.trace - 1.0) > VALIDATION_TOL:
        raise ValueError("purify requires a normalized state")
    if label in rho.labels:
        raise RegisterError(f"purifying label {label!r} already in use")
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > la.PSD_TOL
    w, v = w[keep], v[:, keep]
    r = int(keep.sum())
    vec = (v * np.sqrt(w)).reshape(-1)  # index (system, purifier)
    vec = vec / np.linalg.norm(vec)
    reg = rho.register.concat(Register((label,), (r,)))
    return PureState(vec, reg)


def _same_register(rho: DensityOperator, sigma: DensityOperator):
    if rho.register != sigma.register:
        raise RegisterError(f"register mismatch: {rho.register} vs {sigma.register}")


def root_fidelity_matrix(a: np.ndarray, b: np.ndarray) -> float:
    """||sqrt(a) sqrt(b)||_1 for PSD matrices, symmetrized so that swapping a, b is exact."""
    def one(x, y):
        sx = la.sqrtm_psd(x)
        return float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(la.herm(sx @ y @ sx)), 0, None))))
    return 0.5 * (one(a, b) + one(b, a))


def fidelity_matrix(a: np.ndarray, b: np.ndarray) -> float:
    """Generalized fidelity, including the (1 - Tr) direct-sum term."""
    ta, tb = float(np.trace(a).real), float(np.trace(b).real)
    extra = np.sqrt(max(0.0, 1 - ta) * max(0.0, 1 - tb))
    return float((root_fidelity_matrix(a, b) + extra) ** 2)


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    _same_register(rho, sigma)
    return fidelity_matrix(rho.matrix, sigma.matrix)


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    _same_register(rho, sigma)
    return 0.5 * la.trace_norm(rho.matrix - sigma.matrix)


def purified_distance_matrix(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, fidelity_matrix(a, b)))))


def purified_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    _same_register(rho, sigma)
    return purified_distance_matrix(rho.matrix, sigma.matrix)


def generalized_trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Trace distance between the (1 - Tr)-extended operators."""
    _same_register(rho, sigma)
    return 0.5 * (la.trace_norm(rho.matrix - sigma.matrix) + abs(rho.trace - sigma.trace))


def epsilon_ball_membership(rho_bar: DensityOperator, rho: DensityOperator, eps: float, tol: float = 1e-9) -> bool:
    return purified_distance(rho_bar, rho) <= eps + tol
