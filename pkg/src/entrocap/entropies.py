"""Von Neumann quantities, relative entropy variance and Gaussian helpers (bits)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import ndtr, ndtri

from . import linalg as la
from .qip import DensityOperator, RegisterError

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-10
INF = float("inf")


@dataclass(frozen=True)
class EntropyReport:
    value: float
    support_ok: bool
    support_warning: bool = False
    psd_tol: float = la.PSD_TOL
    support_tol: float = SUPPORT_TOL


def _spectrum(a: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(la.herm(a))
    return np.where(w < la.PSD_TOL, 0.0, w)


def entropy_matrix(a: np.ndarray) -> float:
    w = _spectrum(a)
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def _support_check(omega: np.ndarray, tau: np.ndarray) -> tuple[bool, bool]:
    """(support_ok, warning).  Leakage of omega onto ker(tau) is measured by Tr(P_ker omega)."""
    w, v = np.linalg.eigh(la.herm(tau))
    ker = v[:, w <= SUPPORT_TOL]
    if ker.shape[1] == 0:
        return True, False
    leak = float(np.trace(ker.conj().T @ omega @ ker).real)
    if leak > SUPPORT_TOL:
        return False, False
    # eigenvalues of tau between psd_tol and support_tol are treated as kernel
    grey = v[:, (w > la.PSD_TOL) & (w <= SUPPORT_TOL)]
    warn = grey.shape[1] > 0 and float(np.trace(grey.conj().T @ omega @ grey).real) > la.PSD_TOL
    return True, warn


def relative_entropy_matrix(omega: np.ndarray, tau: np.ndarray) -> EntropyReport:
    ok, warn = _support_check(omega, tau)
    if not ok:
        return EntropyReport(INF, False)
    if warn:
        log.warning("relative_entropy: tau has eigenvalues between psd_tol and support_tol on supp(omega)")
    w, v = np.linalg.eigh(la.herm(tau))
    keep = w > SUPPORT_TOL
    log_tau = (v[:, keep] * np.log2(w[keep])) @ v[:, keep].conj().T
    val = -entropy_matrix(omega) - float(np.trace(omega @ log_tau).real)
    return EntropyReport(max(val, 0.0) if val > -1e-12 else val, True, warn)


def relative_entropy(omega: DensityOperator, tau: DensityOperator) -> EntropyReport:
    _check_pair(omega, tau)
    return relative_entropy_matrix(omega.matrix, tau.matrix)


def relative_entropy_variance_matrix(omega: np.ndarray, tau: np.ndarray) -> float:
    ok, _ = _support_check(omega, tau)
    if not ok:
        raise ValueError("relative entropy variance needs supp(omega) within supp(tau)")
    d = relative_entropy_matrix(omega, tau).value
    w, v = np.linalg.eigh(la.herm(tau))
    keep = w > SUPPORT_TOL
    log_tau = (v[:, keep] * np.log2(w[keep])) @ v[:, keep].conj().T
    op = la.log2m_support(omega) - log_tau - d * np.eye(omega.shape[0])
    # restrict to supp(omega): the kernel contributes 0 * (...)^2
    val = float(np.trace(omega @ op @ op).real)
    return max(val, 0.0)


def relative_entropy_variance(omega: DensityOperator, tau: DensityOperator) -> float:
    _check_pair(omega, tau)
    return relative_entropy_variance_matrix(omega.matrix, tau.matrix)


def _check_pair(omega: DensityOperator, tau: DensityOperator):
    if omega.register != tau.register:
        raise RegisterError(f"register mismatch: {omega.register} vs {tau.register}")
    for s in (omega, tau):
        if abs(s.trace - 1.0) > 1e-8:
            raise ValueError("normalized states required")


# ---------------------------------------------------------------------------
# entropies of labelled marginals


def _labels(x: Iterable[str] | str) -> list[str]:
    return [x] if isinstance(x, str) else list(x)


def entropy(rho: DensityOperator, labels: Iterable[str] | str | None = None) -> float:
    if labels is None:
        return entropy_matrix(rho.matrix)
    labels = _labels(labels)
    if not labels:
        return 0.0
    return entropy_matrix(rho.marginal(labels).matrix)


def conditional_entropy(rho: DensityOperator, a, b=()) -> float:
    a, b = _labels(a), _labels(b)
    return entropy(rho, a + b) - entropy(rho, b)


def mutual_information(rho: DensityOperator, a, b) -> float:
    a, b = _labels(a), _labels(b)
    if not a or not b:
        return 0.0
    return entropy(rho, a) + entropy(rho, b) - entropy(rho, a + b)


def cmi(rho: DensityOperator, a, b, c=()) -> float:
    a, b, c = _labels(a), _labels(b), _labels(c)
    return (entropy(rho, a + c) + entropy(rho, b + c) - entropy(rho, a + b + c) - entropy(rho, c))


def product_of_marginals(rho: DensityOperator, a, b) -> tuple[DensityOperator, DensityOperator]:
    """Return (rho_AB, rho_A (x) rho_B) on the same canonical register."""
    from .qip import tensor
    a, b = _labels(a), _labels(b)
    rab = rho.marginal(a + b)
    prod = tensor(rho.marginal(a), rho.marginal(b))
    return rab, prod


def mutual_information_variance(rho: DensityOperator, a, b) -> float:
    rab, prod = product_of_marginals(rho, a, b)
    return relative_entropy_variance_matrix(rab.matrix, prod.matrix)


# ---------------------------------------------------------------------------
# scalar functions


def gaussian_cdf(a: float) -> float:
    return float(ndtr(a))


def gaussian_quantile(eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise ValueError("quantile argument must lie in (0, 1)")
    return float(ndtri(eps))


def binary_entropy(x: float) -> float:
    if not -1e-15 <= x <= 1 + 1e-15:
        raise ValueError("binary entropy argument must lie in [0, 1]")
    x = min(max(x, 0.0), 1.0)
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def g_func(x: float) -> float:
    if not 0.0 < x <= 1.0:
        raise ValueError("g is defined on (0, 1]")
    return float(-math.log2(1 - math.sqrt(1 - x * x)))


def f_thm3(eps: float, delta: float) -> float:
    if not (0 < eps <= 0.125 and 0 < delta <= 0.125):
        raise ValueError("f(eps, delta) needs eps, delta in (0, 1/8]")
    return float(-math.log2((1 - math.sqrt(1 - 8 * delta)) * (1 - math.sqrt(1 - 8 * eps))))


def f_thm4(eps: float, delta: float, M: float) -> float:
    a, b = math.sqrt(8 * delta), 2 * math.sqrt(8 * eps)
    if not (0 <= a <= 1 and 0 <= b <= 1) or M < 1:
        raise ValueError("f(eps, delta, M) needs sqrt(8 delta) <= 1, 2 sqrt(8 eps) <= 1 and M >= 1")
    return float(8 * (math.sqrt(2 * delta) + math.sqrt(2 * eps)) * math.log2(M)
                 + 2 * (binary_entropy(a) + binary_entropy(b)))
