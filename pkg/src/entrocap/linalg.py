"""Hermitian matrix helpers shared by every module.

All matrix functions go through one Hermitian eigendecomposition; eigenvalues
below ``PSD_TOL`` are clamped to zero before square roots and logarithms.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

PSD_TOL = 1e-12


def herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def eigh_clamped(a: np.ndarray, tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(herm(a))
    w = np.where(w < tol, 0.0, w)
    return w, v


def funm_herm(a: np.ndarray, fn, tol: float = PSD_TOL) -> np.ndarray:
    """Apply ``fn`` to the clamped spectrum of Hermitian ``a``."""
    w, v = eigh_clamped(a, tol)
    return (v * fn(w)) @ v.conj().T


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    return funm_herm(a, np.sqrt)


def inv_sqrtm_psd(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Generalized inverse square root (zero on the kernel)."""
    def f(w):
        out = np.zeros_like(w)
        nz = w > tol
        out[nz] = 1.0 / np.sqrt(w[nz])
        return out
    return funm_herm(a, f, tol)


def pinv_psd(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    def f(w):
        out = np.zeros_like(w)
        nz = w > tol
        out[nz] = 1.0 / w[nz]
        return out
    return funm_herm(a, f, tol)


def log2m_support(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """log2 on the support of ``a``; zero on its kernel."""
    def f(w):
        out = np.zeros_like(w)
        nz = w > tol
        out[nz] = np.log2(w[nz])
        return out
    return funm_herm(a, f, tol)


def support_projector(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    w, v = np.linalg.eigh(herm(a))
    keep = v[:, w > tol]
    return keep @ keep.conj().T


def support_basis(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Orthonormal columns spanning the support of PSD ``a``."""
    w, v = np.linalg.eigh(herm(a))
    return v[:, w > tol]


def psd_factor(a: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Return ``B`` (n x rank) with ``B B^dagger = a``."""
    w, v = np.linalg.eigh(herm(a))
    keep = w > tol
    return v[:, keep] * np.sqrt(w[keep])


def trace_norm(a: np.ndarray) -> float:
    if np.allclose(a, a.conj().T, atol=1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh(herm(a)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(herm(a))[0])


def max_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(herm(a))[-1])


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(vec, vec.conj())


def max_entangled(d: int) -> np.ndarray:
    """Normalized maximally entangled vector sum_i |ii>/sqrt(d)."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


# ---------------------------------------------------------------------------
# multipartite reshaping


def permute_systems(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor ``i`` is old factor ``perm[i]``."""
    dims = list(dims)
    n = len(dims)
    if list(perm) == list(range(n)):
        return mat
    t = mat.reshape(dims + dims)
    axes = list(perm) + [n + p for p in perm]
    d = int(np.prod(dims))
    return t.transpose(axes).reshape(d, d)


def permute_vector(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    dims = list(dims)
    if list(perm) == list(range(len(dims))):
        return vec
    return vec.reshape(dims).transpose(list(perm)).reshape(-1)


def partial_trace(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``; kept factors stay in index order."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(keep)
    if len(keep) == n:
        return mat
    t = mat.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    upper = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else upper[i] for i in range(n)]
    out = [letters[i] for i in keep] + [upper[i] for i in keep]
    expr = "".join(row) + "".join(col) + "->" + "".join(out)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(expr, t).reshape(dk, dk)


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of n x n Hermitian matrices under Re Tr(A B); shape (n*n, n, n)."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    idx = 0
    for k in range(n):
        basis[idx, k, k] = 1.0
        idx += 1
    s = 1.0 / np.sqrt(2.0)
    for k in range(n):
        for l in range(k + 1, n):
            basis[idx, k, l] = s
            basis[idx, l, k] = s
            idx += 1
            basis[idx, k, l] = -1j * s
            basis[idx, l, k] = 1j * s
            idx += 1
    return basis


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_kraus(d_in: int, d_out: int, rng: np.random.Generator, n_kraus: int | None = None) -> list[np.ndarray]:
    """Kraus operators of a random CPTP map from a random isometry."""
    k = n_kraus if n_kraus is not None else d_in * d_out
    g = rng.standard_normal((d_out * k, d_in)) + 1j * rng.standard_normal((d_out * k, d_in))
    q, _ = np.linalg.qr(g)
    v = q[:, :d_in].reshape(k, d_out, d_in)
    return [v[i] for i in range(k)]
