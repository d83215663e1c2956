import numpy as np
import pytest
from scipy.linalg import expm

from gdl.bath import BathConfig, ChannelConfig, channel_superop
from gdl.errors import NonPrimitiveError, ParameterError
from gdl.experiments import (bias_scan, composed_channel, fixed_point, make_report,
                             mixing_estimate, one_step_error, power_iteration, rho_star_quality,
                             slope_fit, step_error_scan)
from gdl.generator import assemble_generator
from gdl.kms import inverse_sqrt_norm, mixing_time_bound, spectral_gap
from gdl.model import build_system
from gdl.operators import apply_superop, superop_from_map, trace_norm, unvec, vec
from gdl.timelaw import correction_E

from conftest import rand_density, rand_matrix

SQ = build_system("single_qubit_z")
R2 = build_system("random_hermitian", {"n_qubits": 2}, seed=0)
BATH = BathConfig("frequency_sampled", 1.0, 2.0)


@pytest.fixture(scope="module")
def sq_parts():
    return assemble_generator(SQ, 1.0, 2.0)


@pytest.fixture(scope="module")
def r2_parts():
    return assemble_generator(R2, 1.0, 2.0)


# slope fits

def test_slope_fit_examples():
    xs = np.array([0.02, 0.04, 0.08, 0.16])
    assert slope_fit(xs, xs ** 2)[0] == pytest.approx(2.0, abs=1e-12)
    assert slope_fit(xs, np.full(4, 3.0))[0] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(0)
    xs = np.geomspace(0.02, 0.16, 8)
    s, r = slope_fit(xs, xs ** 2 * (1 + 0.01 * rng.normal(size=8)))
    assert s == pytest.approx(2.0, abs=0.05) and r < 0.05


def test_slope_fit_errors():
    with pytest.raises(ParameterError):
        slope_fit([1, 2, 3], [1, 2, 3])
    with pytest.raises(ParameterError):
        slope_fit([1, 2, 3, 4], [1, 0, 3, 4])


def test_report_slope_needs_good_fit():
    xs = np.array([1.0, 2.0, 3.0, 4.0])
    assert make_report("a", xs, xs ** 3).slope == pytest.approx(3.0)
    assert make_report("a", xs[:3], xs[:3] ** 3).slope is None
    assert make_report("a", xs, [1.0, 100.0, 1.0, 100.0]).slope is None


# fixed points

def test_fixed_point_of_kms_semigroup(sq_parts):
    S = expm(sq_parts.L_KMS)
    fp = fixed_point(S)
    assert trace_norm(fp.state - sq_parts.rho_beta) <= 1e-9
    assert fp.residual <= 1e-9


def test_fixed_point_rejects_unitary():
    cfg = ChannelConfig(alpha=0.0, T_law="fixed", T=3.0, n_omega_nodes=5)
    with pytest.raises(NonPrimitiveError):
        fixed_point(channel_superop(R2, BATH, cfg))


def test_fixed_point_matches_power_iteration(rng):
    Ks = [rand_matrix(2, rng) for _ in range(3)]
    M = sum(K.conj().T @ K for K in Ks)
    w, U = np.linalg.eigh(M)
    R = U @ np.diag(w ** -0.5) @ U.conj().T
    Ks = [K @ R for K in Ks]
    S = superop_from_map(lambda X: sum(K @ X @ K.conj().T for K in Ks), 2)
    fp = fixed_point(S)
    pi = power_iteration(S, np.eye(2) / 2)
    assert np.abs(fp.state - pi).max() < 1e-9


# scans

def test_bias_scan_composed(r2_parts):
    cfg = ChannelConfig(alpha=0.1, T_law="mu", T=25.0)
    rep = bias_scan(R2, BATH, cfg, [0.02, 0.04, 0.08, 0.16])
    assert rep.slope == pytest.approx(2.0, abs=0.2)
    assert np.all(np.diff(rep.values) > 0)


def test_bias_scan_rejects_zero_alpha():
    with pytest.raises(ParameterError):
        bias_scan(SQ, BATH, ChannelConfig(), [0.0, 0.1, 0.2, 0.3])


def test_step_error_zero_coupling(sq_parts):
    cfg = ChannelConfig(alpha=0.0, T_law="fixed", T=25.0)
    S = channel_superop(SQ, BATH, cfg)
    assert one_step_error(S, composed_channel(SQ, sq_parts.L_full, 0.0, "fixed", 25.0)) < 1e-10


def test_step_error_scan_needs_fixed_time():
    with pytest.raises(ParameterError):
        step_error_scan(SQ, BATH, ChannelConfig(T_law="mu"), [0.1, 0.2, 0.3, 0.4])


def test_step_error_prefactor_grows_with_sigma():
    errs = []
    for sigma, T in ((2.0, 25.0), (4.0, 50.0)):
        b = BathConfig("frequency_sampled", 1.0, sigma)
        p = assemble_generator(SQ, 1.0, sigma)
        S = channel_superop(SQ, b, ChannelConfig(alpha=0.1, T_law="fixed", T=T))
        errs.append(one_step_error(S, composed_channel(SQ, p.L_full, 0.1, "fixed", T)))
    # measured ratio 2.14: roughly linear in sigma
    assert 1.5 <= errs[1] / errs[0] <= 3.0


# mixing

def test_mixing_eps_at_least_two():
    assert mixing_estimate(np.eye(4), 2.0, np.eye(2) / 2) == 0


@pytest.mark.parametrize("c", [0.5, 0.9, 0.99])
def test_mixing_matches_contraction_prediction(c, rng):
    rho = rand_density(3, rng)
    S = superop_from_map(lambda X: c * X + (1 - c) * np.trace(X) * rho, 3)
    eps = 1e-4
    k = mixing_estimate(S, eps, rho)
    pred = np.ceil(np.log(2 * inverse_sqrt_norm(rho) / eps) / -np.log(c))
    assert pred / 2 <= k <= 2 * pred
    # k is the first step inside the eps ball for the worst probe
    assert k >= 1


def test_mixing_below_theoretical_bound(sq_parts):
    gap = spectral_gap(sq_parts.L_KMS, sq_parts.rho_beta).gap
    S = composed_channel(SQ, sq_parts.L_full, 0.1, "mu", 25.0)
    fp = fixed_point(S)
    k = mixing_estimate(S, 1e-2, fp.state)
    assert k <= mixing_time_bound(gap, 0.1, 1e-2, sq_parts.rho_beta)


# rho* and perturbation transfer

def test_rho_star_quality_and_telescoping(r2_parts):
    ratios = []
    for a in (0.04, 0.08):
        corr = correction_E(r2_parts.H_Lamb, R2, 1.0, 25.0, a)
        q = rho_star_quality(R2, r2_parts, a, 25.0, corr)
        ratios.append(q / a ** 4)
        S = composed_channel(R2, r2_parts.L_full, a, "mu", 25.0)
        rs = corr.rho_star
        for tau in (1, 5, 20):
            x = np.linalg.matrix_power(S, tau) @ vec(rs)
            assert trace_norm(rs - unvec(x, 4)) <= tau * q * (1 + 1e-9) + 1e-15
    assert max(ratios) / min(ratios) <= 3.0


def _one_to_one_estimate(D, d, rng, trials=200):
    best = one_step_error(D, np.zeros_like(D))
    for _ in range(trials):
        v = rand_matrix(d, rng)[0]
        r = np.outer(v, v.conj()) / np.vdot(v, v).real
        best = max(best, trace_norm(apply_superop(D, r)))
    return best


def test_perturbation_transfer(sq_parts, rng):
    alpha, eps = 0.03, 0.1
    S1 = channel_superop(SQ, BATH, ChannelConfig(alpha=alpha, T_law="mu", T=25.0))
    S2 = composed_channel(SQ, sq_parts.L_full, alpha, "mu", 25.0)
    f1, f2 = fixed_point(S1), fixed_point(S2)
    tau1 = mixing_estimate(S1, eps / 2, f1.state)
    diff = _one_to_one_estimate(S1 - S2, 2, rng)
    assert tau1 * diff <= eps / 2
    assert mixing_estimate(S2, 2 * eps, f2.state) <= tau1
