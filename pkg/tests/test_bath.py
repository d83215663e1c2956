import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp
from scipy.linalg import expm

from gdl.bath import (B_LOWER, BathConfig, ChannelConfig, channel_single, channel_superop,
                      check_channel, envelope_f, f_hat, joint_parts, joint_propagator)
from gdl.errors import ParameterError
from gdl.model import build_system, gibbs_state
from gdl.operators import apply_superop, choi_matrix, trace_norm

from conftest import rand_density

SQ = build_system("single_qubit_z")
BATH = BathConfig("frequency_sampled", 1.0, 2.0)


def test_envelope_peak_and_norm():
    for s in (0.5, 2.0, 7.0):
        assert envelope_f(0.0, s) == pytest.approx((2 * np.pi) ** -0.25 / np.sqrt(s), rel=1e-15)
        val, _ = quad(lambda t: envelope_f(t, s) ** 2, -np.inf, np.inf)
        assert val == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("k", [0, 1, 3])
def test_f_hat_against_quadrature(k):
    s = 2.0
    u = k / s
    val, _ = quad(lambda t: envelope_f(t, s) * np.cos(u * t), -np.inf, np.inf, epsabs=1e-13)
    assert f_hat(u, s) == pytest.approx(val, abs=1e-8)


def test_f_hat_peak_value():
    assert f_hat(0.0, 1.0) == pytest.approx(2 ** 0.75 * np.pi ** 0.25)


def test_width_guard():
    with pytest.raises(ParameterError):
        BathConfig("frequency_sampled", 4.0, 1.0)


@pytest.mark.parametrize("variant", ["frequency_sampled", "gaussian_field"])
def test_bath_states(variant):
    b = BathConfig(variant, 1.0, 2.0)
    smp = b.sample(-0.7)
    if variant == "gaussian_field":
        assert np.array_equal(smp.rho_E, np.diag([1, 0]))
    else:
        H_E = -0.5 * (-0.7) * np.diag([1.0, -1.0])
        g = expm(-b.beta_tilde * H_E)
        assert np.allclose(smp.rho_E, g / np.trace(g), atol=1e-15)


def test_propagator_decoupled():
    smp = BATH.sample(-1.0)
    T = 3.0
    U = joint_propagator(SQ, BATH, smp, SQ.couplings[0], 0.0, T)
    H0, _ = joint_parts(SQ, smp, SQ.couplings[0])
    assert np.allclose(U, expm(-1j * H0 * 2 * T), atol=1e-12)


def test_propagator_unitary():
    sys2 = build_system("random_hermitian", {"n_qubits": 2}, seed=1)
    U = joint_propagator(sys2, BATH, BATH.sample(-0.3), sys2.couplings[4], 0.4, 7.3)
    assert np.abs(U.conj().T @ U - np.eye(8)).max() < 1e-10


def test_propagator_richardson_ratio():
    smp = BATH.sample(-1.0)
    A = SQ.couplings[0]
    U = [joint_propagator(SQ, BATH, smp, A, 0.8, 6.0, spu) for spu in (4, 8, 16)]
    ratio = np.abs(U[0] - U[1]).max() / np.abs(U[1] - U[2]).max()
    assert ratio == pytest.approx(4.0, abs=0.5)


def test_channel_single_decoupled(rng):
    rho = rand_density(2, rng)
    T = 2.5
    u = expm(-1j * SQ.H * 2 * T)
    out = channel_single(rho, SQ, BATH, -1.0, SQ.couplings[0], 0.0, T)
    assert np.allclose(out, u @ rho @ u.conj().T, atol=1e-12)
    rb = gibbs_state(SQ.H, 1.0)
    assert np.allclose(channel_single(rb, SQ, BATH, -1.0, SQ.couplings[1], 0.0, T), rb, atol=1e-12)


def _dense_oracle(rho, smp, A, alpha, T, sigma):
    H0, V = joint_parts(SQ, smp, A)
    R0 = np.kron(rho, smp.rho_E)

    def rhs(t, y):
        R = y.reshape(4, 4)
        H = H0 + alpha * envelope_f(t, sigma) * V
        return (-1j * (H @ R - R @ H)).ravel()

    sol = solve_ivp(rhs, (-T, T), R0.ravel().astype(complex), method="DOP853",
                    rtol=1e-12, atol=1e-13)
    R = sol.y[:, -1].reshape(4, 4)
    return np.einsum("iaja->ij", R.reshape(2, 2, 2, 2))


def test_channel_single_matches_dense_evolution(rng):
    rho = rand_density(2, rng)
    smp = BATH.sample(-1.3)
    A = SQ.couplings[0]
    out = channel_single(rho, SQ, BATH, smp, A, 0.05, 10.0, steps_per_unit_time=256)
    ref = _dense_oracle(rho, smp, A, 0.05, 10.0, BATH.sigma)
    assert np.abs(np.trace(out) - 1) < 1e-11
    assert np.allclose(out, out.conj().T, atol=1e-13)
    assert np.linalg.eigvalsh(out).min() > -1e-10
    assert np.abs(out - ref).max() < 1e-8


def test_step_doubling_changes_output_below_1e8(rng):
    rho = rand_density(2, rng)
    A = SQ.couplings[1]
    outs = [channel_single(rho, SQ, BATH, -0.9, A, 0.05, 12.0, spu) for spu in (64, 128)]
    assert trace_norm(outs[0] - outs[1]) < 1e-8


def test_channel_superop_decoupled_fixed_T():
    cfg = ChannelConfig(alpha=0.0, T_law="fixed", T=3.0, n_omega_nodes=5)
    S = channel_superop(SQ, BATH, cfg)
    u = expm(-1j * SQ.H * 6.0)
    assert np.allclose(S, np.kron(u.conj(), u), atol=1e-12)


@pytest.fixture(scope="module")
def averaged_channel():
    cfg = ChannelConfig(alpha=0.1, T_law="mu", T=25.0, n_omega_nodes=41)
    return channel_superop(SQ, BATH, cfg)


def test_channel_superop_cptp(averaged_channel):
    S = averaged_channel
    row = np.eye(2).reshape(-1, order="F")
    assert np.abs(row @ S - row).max() < 1e-10
    assert np.linalg.eigvalsh(choi_matrix(S, 2)).min() > -1e-8
    check_channel(S, 2)


def test_setups_agree_on_single_qubit():
    cfg = ChannelConfig(alpha=0.1, T_law="fixed", T=12.0)
    S1 = channel_superop(SQ, BathConfig("frequency_sampled", 1.0, 2.0), cfg)
    S4 = channel_superop(SQ, BathConfig("gaussian_field", 1.0, 2.0), cfg)
    rng = np.random.default_rng(5)
    for _ in range(5):
        r = rand_density(2, rng)
        assert trace_norm(apply_superop(S1 - S4, r)) < 1e-10


def test_superop_independent_of_thread_count(tmp_path):
    code = ("import numpy as np\n"
            "from gdl.bath import BathConfig, ChannelConfig, channel_superop\n"
            "from gdl.model import build_system\n"
            "s = build_system('random_hermitian', {'n_qubits': 2}, seed=0)\n"
            "S = channel_superop(s, BathConfig(), ChannelConfig(alpha=0.1, T_law='fixed', T=8.0,"
            " n_omega_nodes=9, steps_per_unit_time=16))\n"
            "import sys; sys.stdout.write(S.tobytes().hex())\n")
    outs = []
    for n in ("1", "3"):
        env = dict(os.environ, GDL_THREADS=n)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, check=True,
                                   capture_output=True, text=True).stdout)
    assert outs[0] == outs[1]
