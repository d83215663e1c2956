import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from gdl.errors import ContractError
from gdl.generator import assemble_generator
from gdl.kms import (crude_inverse_sqrt_bound, d_beta_distance, lamb_defect, mixing_time_bound,
                     similarity_transform, spectral_gap)
from gdl.model import build_system, gibbs_state
from gdl.operators import (commutator_superop, dag, kms_inner, op_power, superop_from_map,
                           trace_norm, unvec, vec)

from conftest import rand_density, rand_herm, rand_matrix

SQ = build_system("single_qubit_z")
R2 = build_system("random_hermitian", {"n_qubits": 2}, seed=0)
GOLDEN_GAP = 1.044802472333516   # H = Z, Pauli couplings, beta = 1, sigma = 2


@pytest.fixture(scope="module")
def sq_parts():
    return assemble_generator(SQ, 1.0, 2.0)


@pytest.fixture(scope="module")
def r2_parts():
    return assemble_generator(R2, 1.0, 2.0)


def test_similarity_of_commuting_drift(rng):
    rho = rand_density(3, rng)
    B = rho @ rho + 0.3 * rho
    split = similarity_transform(-1j * commutator_superop(B), rho)
    assert np.abs(split.herm).max() < 1e-12


def test_similarity_of_kms_part(r2_parts):
    p = r2_parts
    split = similarity_transform(p.L_KMS, p.rho_beta)
    assert np.abs(split.anti).max() <= 1e-8
    assert np.allclose(split.K, split.herm + split.anti, atol=1e-11)
    assert np.allclose(split.herm, dag(split.herm), atol=1e-11)
    v = vec(op_power(p.rho_beta, 0.5))
    assert np.abs(split.herm @ v).max() <= 1e-9
    assert np.abs(split.anti @ v).max() <= 1e-9


def test_depolarizing_gap(rng):
    rho = rand_density(2, rng)
    gam = 0.7
    L = superop_from_map(lambda X: gam * (np.trace(X) * rho - X), 2)
    rep = spectral_gap(L, rho)
    assert rep.gap == pytest.approx(gam, rel=1e-10)
    assert rep.kernel_dim == 1


def test_golden_gap(sq_parts):
    rep = spectral_gap(sq_parts.L_KMS, sq_parts.rho_beta)
    assert rep.gap == pytest.approx(GOLDEN_GAP, rel=1e-10)
    assert rep.eigenvalues.min() >= -1e-9


def _variational_quotient(L, rho, A):
    Ld = dag(L)
    LA = unvec(Ld @ vec(A), rho.shape[0])
    return (-kms_inner(A, LA, rho) / kms_inner(A, A, rho)).real


def test_gap_matches_variational_definition(sq_parts, r2_parts, rng):
    for p, trials in ((sq_parts, 200), (r2_parts, 500)):
        rho, L = p.rho_beta, p.L_KMS
        d = rho.shape[0]
        gap = spectral_gap(L, rho).gap
        qs = []
        for _ in range(trials):
            A = rand_matrix(d, rng)
            A -= np.trace(rho @ A) * np.eye(d)
            qs.append(_variational_quotient(L, rho, A))
        assert min(qs) >= gap - 1e-9
        # the infimum is attained on the slowest mode of the Heisenberg-picture generator
        w, v = np.linalg.eig(dag(L))
        k = np.argmin(np.where(np.abs(w) > 1e-9, np.abs(w), np.inf))
        A = unvec(v[:, k], d)
        assert _variational_quotient(L, rho, A) == pytest.approx(gap, abs=1e-6)


@pytest.mark.parametrize("c", [0.3, 2.0, 5.0])
def test_gap_is_homogeneous(sq_parts, c):
    g = spectral_gap(sq_parts.L_KMS, sq_parts.rho_beta).gap
    assert spectral_gap(c * sq_parts.L_KMS, sq_parts.rho_beta).gap == pytest.approx(c * g, rel=1e-10)


def test_gap_refuses_non_kms_generator(r2_parts):
    with pytest.raises(ContractError):
        spectral_gap(r2_parts.L_full - 1j * commutator_superop(R2.couplings[0]), r2_parts.rho_beta)


def test_drift_leaves_gap_unchanged(r2_parts):
    p = r2_parts
    B = R2.H @ R2.H - 0.4 * R2.H
    drifted = p.L_KMS - 1j * commutator_superop(B)
    a = similarity_transform(p.L_KMS, p.rho_beta).herm
    b = similarity_transform(drifted, p.rho_beta).herm
    assert np.allclose(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b), atol=1e-9)


def test_lamb_defect_examples(rng):
    rho = rand_density(3, rng)
    assert lamb_defect(rho @ rho, rho) < 1e-13
    assert lamb_defect(rand_herm(3, rng), np.eye(3) / 3) < 1e-15
    assert lamb_defect(rand_herm(3, rng), rho) > 1e-3


def test_d_beta_examples(rng):
    r1, r2 = rand_density(3, rng), rand_density(3, rng)
    rho = rand_density(3, rng)
    assert d_beta_distance(r1, r1, rho) == 0
    assert d_beta_distance(r1, r2, np.eye(3) / 3) == pytest.approx(np.sqrt(3) * np.linalg.norm(r1 - r2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_d_beta_dominates_trace_distance(seed):
    rng = np.random.default_rng(seed)
    r1, r2, rho = (rand_density(3, rng) for _ in range(3))
    assert d_beta_distance(r1, r2, rho) >= trace_norm(r1 - r2) * (1 - 1e-12)


def test_mixing_bound_arithmetic():
    rho = np.diag([0.25, 0.75])            # ||rho^{-1/2}|| = 2
    assert mixing_time_bound(0.5, 0.1, 1e-3, rho) == pytest.approx(200 * np.log(4000))
    assert mixing_time_bound(0.5, 0.1, 1e-3, rho) == pytest.approx(1658.8, abs=0.05)
    assert mixing_time_bound(0.5, 0.1, 4.0, rho) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ContractError):
        mixing_time_bound(0.0, 0.1, 1e-3, rho)


def test_crude_bound_dominates():
    rb = gibbs_state(R2.H, 1.0)
    exact = 1 / np.sqrt(np.linalg.eigvalsh(rb).min())
    assert crude_inverse_sqrt_bound(2, 1.0, R2.H) >= exact


@pytest.mark.parametrize("alpha", [0.1, 0.3, 1.0])
def test_perturbed_contraction(r2_parts, alpha, rng):
    p = r2_parts
    rho = p.rho_beta
    gap = spectral_gap(p.L_KMS, rho).gap
    assert lamb_defect(p.H_Lamb, rho) <= gap / 2
    E = expm(alpha ** 2 * p.L_full)
    bound = np.exp(-gap * alpha ** 2 / 2) * (1 + 1e-6)
    zero = np.zeros((4, 4))
    for _ in range(50):
        X = rand_herm(4, rng)
        X -= np.trace(X) * np.eye(4) / 4
        Y = unvec(E @ vec(X), 4)
        assert d_beta_distance(Y, zero, rho) <= bound * d_beta_distance(X, zero, rho)
