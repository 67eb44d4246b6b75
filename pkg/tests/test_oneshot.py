import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entrocap import linalg as la
from entrocap import oneshot as os1
from entrocap.qip import DensityOperator, Register, purified_distance_matrix

seeds = st.integers(0, 2 ** 32 - 1)
cp = pytest.importorskip("cvxpy")


def dm(mat, labels, dims):
    return DensityOperator(mat, Register(tuple(labels), tuple(dims)))


# ---------------------------------------------------------------- hypothesis testing

def test_dhypo_examples():
    r = os1.d_hypo_matrix(la.proj(la.ket(0, 2)), np.eye(2) / 2, 0.5, sdp_check=True)
    assert r.value == pytest.approx(2.0, abs=1e-9)
    assert r.artifacts["sdp_value"] == pytest.approx(2.0, abs=1e-7)
    rho = la.random_density(3, np.random.default_rng(0))
    for e in (0.0, 0.1, 0.5, 0.9):
        assert os1.d_hypo_matrix(rho, rho, e).value == pytest.approx(-math.log2(1 - e), abs=1e-9)
    # tau vanishes on the support of omega
    assert os1.d_hypo_matrix(la.proj(la.ket(0, 2)), la.proj(la.ket(1, 2)), 0.1).value == math.inf


@given(seeds, st.sampled_from([0.05, 0.1, 0.3, 0.7]))
def test_dhypo_np_vs_sdp(seed, eps):
    rng = np.random.default_rng(seed)
    w, t = la.random_density(3, rng), la.random_density(3, rng)
    r = os1.d_hypo_matrix(w, t, eps)
    s = os1.d_hypo_sdp(w, t, eps)
    assert r.value == pytest.approx(s.value, abs=1e-7)
    L = r.artifacts["Lambda"]
    assert la.min_eig(L) > -1e-7 and la.max_eig(L) < 1 + 1e-7
    assert np.trace(L @ w).real >= 1 - eps - 1e-7
    assert np.trace(L @ t).real == pytest.approx(r.artifacts["type2"], abs=1e-12)
    # Neyman-Pearson structure: Lambda is the projector onto the positive part of
    # mu w - t up to the boundary eigenspace
    mu = r.artifacts["mu"]
    ev, V = np.linalg.eigh(mu * w - t)
    Lrot = V.conj().T @ L @ V
    pos, neg = ev > 1e-7, ev < -1e-7
    assert np.allclose(Lrot[np.ix_(pos, pos)], np.eye(pos.sum()), atol=1e-6)
    assert np.allclose(Lrot[np.ix_(neg, neg)], 0, atol=1e-6)


# ---------------------------------------------------------------- max / min relative entropy

def test_dmax_dmin_examples():
    assert os1.d_max_matrix(np.diag([0.5, 0.5]), np.diag([0.75, 0.25])) == pytest.approx(1.0, abs=1e-12)
    r = la.random_density(2, np.random.default_rng(2))
    assert os1.d_min_matrix(r, r) == pytest.approx(0, abs=1e-9)
    plus = la.proj(np.array([1, 1]) / math.sqrt(2))
    assert os1.d_min_matrix(la.proj(la.ket(0, 2)), plus) == pytest.approx(1.0, abs=1e-12)
    assert os1.d_max_matrix(la.proj(la.ket(0, 2)), la.proj(la.ket(1, 2))) == math.inf


@given(seeds)
def test_dmax_ge_dmin(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        d = int(rng.integers(2, 5))
        w, t = la.random_density(d, rng), la.random_density(d, rng)
        assert os1.d_max_matrix(w, t) >= os1.d_min_matrix(w, t) - 1e-10


def classical_dmax_smooth(p, q, eps):
    """Independent oracle: diagonal smoothing, bisection on the ratio bound."""
    lo, hi = 0.0, float(np.max(p / q))
    need = math.sqrt(1 - eps ** 2)
    for _ in range(60):
        lam = 0.5 * (lo + hi)
        x = cp.Variable(len(p), nonneg=True)
        prob = cp.Problem(cp.Maximize(cp.sum(cp.multiply(np.sqrt(p), cp.sqrt(x)))),
                          [x <= lam * q, cp.sum(x) <= 1])
        prob.solve()
        if prob.value >= need:
            hi = lam
        else:
            lo = lam
    return math.log2(hi)


def test_dmax_smooth_classical_oracle():
    p, q = np.array([0.7, 0.3]), np.array([0.4, 0.6])
    r = os1.d_max_smooth_matrix(np.diag(p), np.diag(q), 0.1)
    assert r.certified
    assert r.value == pytest.approx(classical_dmax_smooth(p, q, 0.1), abs=1e-3)
    assert purified_distance_matrix(r.artifacts["rho_bar"], np.diag(p)) <= 0.1 + 1e-6


def test_smooth_relative_entropies_reduce_and_monotone(rng):
    w, t = la.random_density(2, rng), la.random_density(2, rng)
    assert os1.d_max_smooth_matrix(w, t, 0.0).value == os1.d_max_matrix(w, t)
    assert os1.d_min_smooth_matrix(w, t, 0.0).value == os1.d_min_matrix(w, t)
    dmax = [os1.d_max_smooth_matrix(w, t, e).value for e in (0, 0.05, 0.1, 0.2, 0.3)]
    assert all(a >= b - 1e-7 for a, b in zip(dmax, dmax[1:]))
    dmin = [os1.d_min_smooth_matrix(w, t, e).value for e in (0, 0.05, 0.1, 0.2, 0.3)]
    assert all(a <= b + 1e-7 for a, b in zip(dmin, dmin[1:]))
    z = la.proj(la.ket(0, 2))
    assert os1.d_max_smooth_matrix(z, np.eye(2) / 2, 0.1).value <= 1.0 + 1e-9
    r = os1.d_min_smooth_matrix(w, t, 0.1)
    assert not r.certified
    assert purified_distance_matrix(r.artifacts["rho_bar"], w) <= 0.1 + 1e-6


# ---------------------------------------------------------------- conditional entropies

def test_hmin_hmax_examples():
    phi = dm(la.proj(la.max_entangled(2)), "AB", [2, 2])
    assert os1.h_min(phi, "A", "B").value == pytest.approx(-1.0, abs=1e-7)
    assert os1.h_max(phi, "A", "B").value == pytest.approx(-1.0, abs=1e-7)
    mix = dm(np.eye(2) / 2, "A", [2])
    assert os1.h_min(mix, "A").value == pytest.approx(1.0, abs=1e-12)
    assert os1.h_max(mix, "A").value == pytest.approx(1.0, abs=1e-12)


@given(seeds)
def test_hmin_hmax_duality_pure(seed):
    rng = np.random.default_rng(seed)
    psi = dm(la.proj(la.random_pure(8, rng)), "ABC", [2, 2, 2])
    assert os1.h_min(psi, "A", "B").value == pytest.approx(-os1.h_max(psi, "A", "C").value, abs=1e-6)


@given(seeds)
def test_smoothing_brackets(seed):
    rng = np.random.default_rng(seed)
    rho = dm(la.random_density(4, rng), "AB", [2, 2])
    hmin, hmax = os1.h_min(rho, "A", "B").value, os1.h_max(rho, "A", "B").value
    assert os1.h_min_smooth(rho, "A", "B", eps=0.0).value == pytest.approx(hmin, abs=1e-7)
    assert os1.h_max_smooth(rho, "A", "B", eps=0.0).value == pytest.approx(hmax, abs=1e-7)
    s1 = os1.h_min_smooth(rho, "A", "B", eps=0.1)
    assert s1.value >= hmin - 1e-7
    assert os1.h_max_smooth(rho, "A", "B", eps=0.1).value <= hmax + 1e-7
    assert purified_distance_matrix(s1.artifacts["rho_bar"], rho.matrix) <= 0.1 + 1e-6


def classical_hmin_smooth(p, eps):
    """p[x, y]; diagonal smoothing is optimal for classical states."""
    x = cp.Variable(p.shape, nonneg=True)
    t = cp.Variable(p.shape[1])
    cons = [x[i, j] <= t[j] for i in range(p.shape[0]) for j in range(p.shape[1])]
    cons += [cp.sum(x) <= 1, cp.sum(cp.multiply(np.sqrt(p), cp.sqrt(x))) >= math.sqrt(1 - eps ** 2)]
    prob = cp.Problem(cp.Minimize(cp.sum(t)), cons)
    prob.solve()
    return -math.log2(prob.value)


def test_hmin_smooth_classical_oracle():
    p = np.array([[0.4, 0.1], [0.2, 0.3]])
    rho = dm(np.diag(p.reshape(-1)), "XY", [2, 2])
    r = os1.h_min_smooth(rho, "X", "Y", eps=0.1)
    assert r.value == pytest.approx(classical_hmin_smooth(p, 0.1), abs=1e-3)


def test_hmax_smooth_data_processing():
    rng = np.random.default_rng(5)
    rho = la.random_density(4, rng)
    # completely dephase B: a channel on the conditioning system cannot lower H_max
    P = [np.kron(np.eye(2), la.proj(la.ket(i, 2))) for i in range(2)]
    deph = sum(p @ rho @ p for p in P)
    a = os1.h_max_smooth_matrix(rho, 2, 2, 0.1).value
    b = os1.h_max_smooth_matrix(deph, 2, 2, 0.1).value
    assert b >= a - 1e-6


# ---------------------------------------------------------------- mutual informations

def test_ihypo():
    rng = np.random.default_rng(8)
    prod = dm(np.kron(la.random_density(2, rng), la.random_density(2, rng)), "AB", [2, 2])
    assert os1.i_hypo(prod, "A", "B", 0.2).value == pytest.approx(-math.log2(0.8), abs=1e-8)
    phi = dm(la.proj(la.max_entangled(2)), "AB", [2, 2])
    r0 = os1.i_hypo(phi, "A", "B", 0.0)
    assert r0.value == pytest.approx(2.0, abs=1e-9)
    for e in (0.05, 0.2):
        np_val = os1.i_hypo(phi, "A", "B", e).value
        sdp_val = os1.d_hypo_sdp(phi.matrix, np.eye(4) / 4, e).value
        assert np_val == pytest.approx(sdp_val, abs=1e-7)
    rho = dm(la.random_density(4, rng), "AB", [2, 2])
    vals = [os1.i_hypo(rho, "A", "B", e).value for e in (0.0, 0.1, 0.2, 0.4)]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def classical_imax_tilde(p, eps):
    """p[a, b] with a the fixed-marginal system; bisection over t with a convex fidelity subproblem."""
    pa = p.sum(axis=1)
    need = math.sqrt(1 - eps ** 2)
    lo, hi = 0.0, math.log2(np.max(p / np.outer(pa, p.sum(axis=0))))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        x = cp.Variable(p.shape, nonneg=True)
        cons = [x[i, j] <= 2 ** mid * pa[i] * cp.sum(x[:, j]) for i in range(p.shape[0]) for j in range(p.shape[1])]
        cons += [cp.sum(x) <= 1]
        prob = cp.Problem(cp.Maximize(cp.sum(cp.multiply(np.sqrt(p), cp.sqrt(x)))), cons)
        prob.solve()
        if prob.value >= need - 1e-9:
            hi = mid
        else:
            lo = mid
    return hi


def test_imax_tilde():
    rng = np.random.default_rng(4)
    rho = la.random_density(4, rng)
    ra, rb = la.partial_trace(rho, (2, 2), [0]), la.partial_trace(rho, (2, 2), [1])
    assert os1.i_max_tilde_matrix(rho, 2, 2, 0.0).value == pytest.approx(os1.d_max_matrix(rho, np.kron(ra, rb)))
    assert os1.i_max_tilde_matrix(np.kron(ra, rb), 2, 2, 0.1).value == pytest.approx(0, abs=1e-6)
    p = np.array([[0.45, 0.05], [0.1, 0.4]])
    exact = os1.i_max_tilde_matrix(np.diag(p.reshape(-1)), 2, 2, 0.1)
    oracle = classical_imax_tilde(p, 0.1)
    assert exact.value == pytest.approx(oracle, abs=5e-3)
    heur = os1.i_max_tilde_alternating(np.diag(p.reshape(-1)), 2, 2, 0.1)
    assert heur.value >= exact.value - 1e-6
    assert not heur.certified
    assert exact.value <= os1.d_max_matrix(np.diag(p.reshape(-1)), np.diag(np.kron(p.sum(1), p.sum(0)))) + 1e-9
    rp = exact.artifacts["rho_prime"]
    assert purified_distance_matrix(rp, np.diag(p.reshape(-1))) <= 0.1 + 1e-6
