import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrocap import capacity as cap
from entrocap import entropies as ent
from entrocap import linalg as la
from entrocap import oneshot
from entrocap.broadcast import (amplitude_damping_stinespring, check_degraded, compromised_lab, dephasing_broadcast,
                                fully_depolarizing_trivial_eve, identity_with_trivial_eve, random_degraded_broadcast,
                                replacer_eve, same_sets)
from entrocap.qip import DensityOperator, Register

seeds = st.integers(0, 2 ** 32 - 1)
FAST = cap.CapacityOptions(restarts=4, seed=0)


def test_superdense_anchor():
    r = cap.ea_private_information(identity_with_trivial_eve(2), FAST)
    assert r.value == pytest.approx(2.0, abs=1e-4)
    assert r.gradient_norm_at_opt <= 1e-6
    assert r.value == max(r.per_restart)
    lab = compromised_lab(identity_with_trivial_eve(2))
    assert cap.cmi_capacity(lab, FAST).value == pytest.approx(2.0, abs=1e-4)


def test_zero_cases():
    assert cap.ea_private_information(same_sets(dephasing_broadcast(0.2)), FAST).value == pytest.approx(0, abs=1e-9)
    assert cap.ea_private_information(fully_depolarizing_trivial_eve(2), FAST).value == pytest.approx(0, abs=1e-9)
    ad = amplitude_damping_stinespring(0.3)
    rep = replacer_eve(fully_depolarizing_trivial_eve(2).bob(), np.eye(2) / 2)
    lab = compromised_lab(rep)
    assert cap.cmi_capacity(lab, FAST).value == pytest.approx(0, abs=1e-8)
    with pytest.raises(ValueError):
        cap.cmi_capacity(ad, FAST)


@settings(max_examples=5)
@given(seeds)
def test_cmi_equals_private_information(seed):
    bc = random_degraded_broadcast(np.random.default_rng(seed), "compromised_lab")
    a = cap.cmi_capacity(bc, FAST).value
    b = cap.ea_private_information(bc, FAST).value
    assert a == pytest.approx(b, abs=1e-5)


@settings(max_examples=3)
@given(seeds)
def test_pure_state_sufficiency(seed):
    bc = random_degraded_broadcast(np.random.default_rng(seed))
    pure = cap.ea_private_information(bc, FAST)
    mixed = cap.ea_private_information_mixed(bc, 2, FAST)
    assert mixed.value <= pure.value + 1e-4
    assert mixed.value == pytest.approx(pure.value, abs=1e-4)
    t = pure.terms
    assert t["I(R;B)"] - t["I(R;E)"] >= -1e-8


@settings(max_examples=5)
@given(seeds, st.sampled_from(["classical_copy", "compromised_lab", "amplitude_damping", "dephasing"]))
def test_gradient_central_difference(seed, kind):
    rng = np.random.default_rng(seed)
    obj = cap.private_objective(random_degraded_broadcast(rng, kind))
    v = la.random_pure(obj.n, rng) * rng.uniform(0.5, 2)
    _, g = obj.value_and_grad(v)
    h = 1e-5
    fd = np.zeros(obj.n, dtype=complex)
    for j in range(obj.n):
        for part in (1, 1j):
            e = np.zeros(obj.n, dtype=complex)
            e[j] = h * part
            d = (obj.value(v + e) - obj.value(v - e)) / (2 * h)
            fd[j] += d if part == 1 else 1j * d
    assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


def test_thm1_terms_and_trivial_eve():
    bc = dephasing_broadcast(0.3)
    rho = cap.maximally_entangled_input(bc)
    r = cap.thm1_lower_bound(bc, rho, 0.05, 0.05, 0.01, 0.05)
    t = r.terms
    # independent recomputation from the logged terms
    assert r.value == pytest.approx(t["I_H"] - t["I_max_tilde"] - math.log2(4 * 0.05 / 0.01 ** 2)
                                    - 2 * math.log2(1 / 0.05), abs=1e-12)
    bc = identity_with_trivial_eve(2)
    rho = cap.maximally_entangled_input(bc)
    r = cap.thm1_lower_bound(bc, rho, 0.05, 0.05, 0.01, 0.05)
    assert r.terms["I_max_tilde"] == pytest.approx(0, abs=1e-6)
    w = cap.channel_output(bc, rho)
    ih = oneshot.i_hypo(w, ["R"], ["B"], 0.04).value
    assert r.value == pytest.approx(ih - math.log2(4 * 0.05 / 0.01 ** 2) - 2 * math.log2(20), abs=1e-6)
    with pytest.raises(ValueError):
        cap.thm1_lower_bound(bc, rho, 0.05, 0.05, 0.05, 0.05)


def test_thm2_examples():
    bc = identity_with_trivial_eve(2)
    rho = cap.maximally_entangled_input(bc)
    r = cap.thm2_upper_bound(bc, cap.code_state(bc, rho, 4), 0.01, 0.01)
    assert r.value >= 2 - 0.5
    r1 = cap.thm2_upper_bound(bc, cap.code_state(bc, rho, 1), 0.01, 0.01)
    assert r1.value >= -1e-6
    # M independent of everything: both terms equal log|M| without smoothing
    w = DensityOperator(np.kron(np.eye(2) / 2, rho.matrix), Register(("M", "A", "R"), (2, 2, 2)))
    hmin = oneshot.h_min(cap.channel_output(bc, w), ["M"], ["R", "E"]).value
    hmax = oneshot.h_max(cap.channel_output(bc, w), ["M"], ["R", "B"]).value
    assert hmin == pytest.approx(1, abs=1e-6) and hmax == pytest.approx(1, abs=1e-6)
    bad = DensityOperator(la.proj(np.ones(8) / math.sqrt(8)), Register(("M", "A", "R"), (2, 2, 2)))
    with pytest.raises(ValueError):
        cap.thm2_upper_bound(bc, bad, 0.01, 0.01)


def test_thm3_domain_and_ordering():
    bc = dephasing_broadcast(0.3)
    rho = cap.maximally_entangled_input(bc)
    with pytest.raises(ValueError):
        cap.thm3_upper_bound(bc, rho, 0.125, 0.125)
    with pytest.raises(ValueError):
        cap.thm3_upper_bound(bc, rho, 0.1, 0.1)
    t3 = cap.thm3_upper_bound(bc, rho, 0.01, 0.01)
    t1 = cap.thm1_lower_bound(bc, rho, 0.01, 0.01, 0.005, 0.05)
    assert t3.value >= t1.value
    assert t3.value == pytest.approx(t3.terms["H_min(R|E)"] - t3.terms["H_max(R|B)"] + ent.f_thm3(0.01, 0.01))


def test_second_order_identities():
    bc = dephasing_broadcast(0.3)
    rho = cap.maximally_entangled_input(bc)
    n = 50
    a = cap.second_order_rate(bc, rho, 0.1, 0.2, n)
    b = cap.second_order_rate(bc, rho, 0.1, 0.2, 2 * n)
    t = a.terms
    want = (math.sqrt(2) - 2) * (t["sqrt(nV_B)Phi^-1(eps)"] + t["sqrt(nV_E)Phi^-1(delta)"])
    assert b.value - 2 * a.value == pytest.approx(want, abs=1e-9)
    h = cap.second_order_rate(bc, rho, 0.5, 0.5, n)
    assert h.value == pytest.approx(n * (t["I(R;B)"] - t["I(R;E)"]), abs=1e-9)
    bc = identity_with_trivial_eve(2)
    rho = cap.maximally_entangled_input(bc)
    w = cap.channel_output(bc, rho)
    rb = w.marginal(["B", "R"])
    prod = DensityOperator(np.kron(rb.marginal(["B"]).matrix, rb.marginal(["R"]).matrix), rb.register)
    V = ent.relative_entropy_variance(rb, prod)
    r = cap.second_order_rate(bc, rho, 0.01, 0.3, 100)
    assert r.value == pytest.approx(200 + math.sqrt(100 * V) * ent.gaussian_quantile(0.01), abs=1e-9)


def test_second_order_convergence():
    bc = dephasing_broadcast(0.3)
    rho = cap.maximally_entangled_input(bc)
    gaps = []
    for n in (10 ** 2, 10 ** 4, 10 ** 6):
        r = cap.second_order_rate(bc, rho, 0.05, 0.05, n)
        gaps.append(abs(r.value / n - r.terms["I(R;B)"] + r.terms["I(R;E)"]))
    assert gaps[0] > gaps[1] > gaps[2]


def test_additivity_trivial():
    bc = identity_with_trivial_eve(2)
    r = cap.additivity_check(bc, same_sets(dephasing_broadcast(0.1)), FAST, tensor_restarts=4)
    assert r.tensor_value == pytest.approx(2.0, abs=1e-3)
    assert r.verdict == "consistent"


def test_restarts_deterministic():
    bc = amplitude_damping_stinespring(0.2)
    a = cap.ea_private_information(bc, FAST)
    b = cap.ea_private_information(bc, FAST)
    assert a.per_restart == b.per_restart
    assert check_degraded(bc).degraded is True
