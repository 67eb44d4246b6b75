import math

import numpy as np
import pytest

from entrocap import capacity as cap
from entrocap import linalg as la
from entrocap import protocol as pr
from entrocap.broadcast import amplitude_damping_stinespring, dephasing_broadcast, identity_with_trivial_eve


def cfg(bc, M, K, **kw):
    return pr.CodeConfig(M, K, cap.maximally_entangled_input(bc), bc, **kw)


def test_single_block_is_channel_output():
    bc = dephasing_broadcast(0.3)
    code = pr.build_code(cfg(bc, 1, 1))
    assert np.allclose(code.block_state(0, "B"), code.omega_rb)
    dec = pr.build_decoder(code)
    # one hypothesis: Lambda is the projector onto supp(S)
    S = dec.S[0]
    w, v = np.linalg.eigh(S)
    P = v[:, w > 1e-12] @ v[:, w > 1e-12].conj().T
    assert np.allclose(dec.Lambda[0], P, atol=1e-8)
    r = pr.run_protocol(cfg(bc, 1, 1))
    assert 0 <= r.eps_achieved <= 1 and r.delta_mixture == 0


def test_spectator_marginal():
    bc = identity_with_trivial_eve(2)
    code = pr.build_code(cfg(bc, 2, 2))
    for j in range(4):
        want = np.kron(np.kron(code.rho_r, code.rho_r), code.rho_r)
        assert np.allclose(code.spectator_marginal(j), want, atol=1e-12)
    # the two messages differ only in which R block is entangled with B
    a, b = code.block_state(0), code.block_state(2)
    swap = la.permute_systems(a, [2, 2, 2, 2, 2], [2, 1, 0, 3, 4])
    assert np.allclose(swap, b)


def test_identity_two_messages_exact():
    r = pr.run_protocol(cfg(identity_with_trivial_eve(2), 2, 1))
    assert r.eps_achieved == pytest.approx((2 - math.sqrt(3)) / 4, abs=1e-9)
    assert r.delta_achieved == pytest.approx(0, abs=1e-12)
    assert r.eps_achieved <= r.hn_bound
    # independent of the test operator's type-I error
    r2 = pr.run_protocol(cfg(identity_with_trivial_eve(2), 2, 1, test_eps=0.01))
    assert r2.eps_achieved == pytest.approx(r.eps_achieved, abs=1e-9)


def test_orthogonal_signals_decode_perfectly():
    bc = identity_with_trivial_eve(2)
    code = pr.build_code(cfg(bc, 1, 1))
    dec = pr.build_decoder(code, np.eye(4))
    assert pr.decoding_errors(code, dec)[0] == pytest.approx([0.0])


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_hayashi_nagaoka(c):
    for bc, M, K in [(identity_with_trivial_eve(2), 2, 1), (dephasing_broadcast(0.3), 2, 2),
                     (amplitude_damping_stinespring(0.25), 3, 1)]:
        code = pr.build_code(cfg(bc, M, K))
        dec = pr.build_decoder(code)
        for j in range(code.n_blocks):
            assert pr.hn_residual(dec, j, c) >= -1e-9


def test_povm_validity():
    code = pr.build_code(cfg(dephasing_broadcast(0.3), 2, 2))
    dec = pr.build_decoder(code)
    assert dec.completeness_residual() <= 1e-9
    for L in dec.Lambda + [dec.completion]:
        assert la.min_eig(L) >= -1e-10


def test_security_examples():
    r = pr.run_protocol(cfg(identity_with_trivial_eve(2), 2, 2))
    assert r.delta_achieved == pytest.approx(0, abs=1e-12)
    r = pr.run_protocol(cfg(dephasing_broadcast(0.5), 2, 1))
    assert r.delta_achieved > 0.1
    ds = [pr.run_protocol(cfg(dephasing_broadcast(0.3), 1, K)).delta_product for K in (1, 2, 4)]
    assert ds[0] >= ds[1] >= ds[2]
    r = pr.run_protocol(cfg(dephasing_broadcast(0.3), 1, 2, optimize_sigma=True))
    assert r.details["security"]["delta_product_optimized"] <= r.delta_product + 1e-7


def test_determinism():
    a = pr.run_protocol(cfg(dephasing_broadcast(0.3), 2, 2)).to_dict()
    b = pr.run_protocol(cfg(dephasing_broadcast(0.3), 2, 2)).to_dict()
    assert repr(a) == repr(b)


def test_permutation_covariance():
    code = pr.build_code(cfg(dephasing_broadcast(0.3), 2, 1))
    dec = pr.build_decoder(code)
    swap = lambda x: la.permute_systems(x, [2, 2, 2], [1, 0, 2])
    assert np.allclose(swap(dec.Lambda[0]), dec.Lambda[1], atol=1e-10)
    errs, _ = pr.decoding_errors(code, dec)
    assert errs[0] == pytest.approx(errs[1], abs=1e-10)


@pytest.mark.parametrize("name", ["dephasing", "amplitude_damping"])
def test_convex_split_endpoint(name):
    bc = dephasing_broadcast(0.3) if name == "dephasing" else amplitude_damping_stinespring(0.25)
    w = cap.channel_output(bc, cap.maximally_entangled_input(bc))
    we, _ = pr._rx(w, ["E"])
    er = la.permute_systems(we, [2, 2], [1, 0])
    for delta, eta in [(0.81, 0.8), (0.49, 0.6)]:
        r = pr.convex_split_check(er, 2, 2, delta, eta)
        assert r["K"] >= 2 and r["holds"] and r["P"] <= math.sqrt(delta)


def test_dimension_cap():
    with pytest.raises(pr.DimensionCapError):
        pr.build_code(cfg(dephasing_broadcast(0.3), 4, 4))
    with pytest.raises(ValueError):
        cfg(dephasing_broadcast(0.3), 0, 1)


def test_predictions_reported():
    r = pr.run_protocol(cfg(identity_with_trivial_eve(2), 2, 1))
    p = r.predicted
    assert p["K_rounded"] >= 1 and set(p) >= {"log2MK", "log2K", "vacuous"}
    assert r.expect_eps == (1.0 <= p["log2MK"] + 1e-12)
