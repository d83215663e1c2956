"""Effective Lindbladian of the weak-coupling channel and its KMS split.

Everything is assembled in the eigenbasis of H, where the Gaussian envelope
makes jump operators and correlation integrals closed-form up to a single
one-sided Gaussian-times-phase integral.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import wofz

from .bath import BathConfig, check_widths, f_hat, sigma_beta
from .errors import ParameterError, QuadratureError
from .model import cluster_bohr, default_gap_tol, gibbs_state
from .operators import (anticommutator_superop, commutator_superop, dag,
                        kms_inner, op_power, vec)


@dataclass(frozen=True)
class SpectralDensities:
    beta: float
    sigma: float
    beta_tilde: float
    sigma_beta: float
    mean: float
    variance: float

    def g(self, omega):
        om = np.asarray(omega, dtype=float)
        return np.exp(-(om - self.mean) ** 2 / (2 * self.variance)) / np.sqrt(2 * np.pi * self.variance)

    def gamma(self, omega):
        om = np.asarray(omega, dtype=float)
        return (self.g(om) + self.g(-om)) / (1.0 + np.exp(self.beta_tilde * om))

    def transform(self, tau):
        """m(tau) = int g(w) e^{-i w tau} dw."""
        tau = np.asarray(tau, dtype=float)
        return np.exp(-1j * self.mean * tau - 0.5 * self.variance * tau ** 2)


def spectral_densities(beta, sigma, check=True):
    check_widths(beta, sigma)
    sb = sigma_beta(beta, sigma)
    sd = SpectralDensities(beta, sigma, 2 * beta / sb, sb, -1.0 / beta, sb / beta ** 2)
    if check:
        grid = np.linspace(-5.0, 5.0, 101) / beta
        err = np.max(np.abs(sd.gamma(grid) - sd.g(grid)))
        if err > 1e-12:
            raise ParameterError(f"gamma and g disagree by {err:.2e}")
    return sd


@dataclass(frozen=True)
class QuadSpec:
    kind: str = "exact"          # "exact" or "nodes"
    n_omega_nodes: int | None = None
    omega_rule: str = "trapezoid"
    tau_max_sigmas: float = 12.0
    tol: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("exact", "nodes"):
            raise ParameterError(f"unknown quadrature kind {self.kind!r}")


@dataclass(frozen=True)
class GeneratorParts:
    L_full: np.ndarray
    H_coh: np.ndarray
    transition: np.ndarray
    M_D: np.ndarray
    G_D: np.ndarray
    H_Lamb: np.ndarray
    L_KMS: np.ndarray
    rho_beta: np.ndarray


def jump_operator(A, omega, system, sigma):
    """V(w) = int f(t) A(t) e^{-iwt} dt, entrywise A_jk f_hat(l_j - l_k - w)."""
    Ae = system.to_eigbasis(A)
    return system.from_eigbasis(Ae * f_hat(system.bohr_matrix() - omega, sigma))


def half_gauss(x, p):
    """int_0^inf e^{-p t^2} e^{ixt} dt."""
    return 0.5 * np.sqrt(np.pi / p) * wofz(np.asarray(x) / (2 * np.sqrt(p)))


def _g_tensors(Ae, lam, sigma):
    """Pieces shared by all correlation integrals.

    G_jk = sum_l conj(A_lj) A_lk e^{-sigma^2 a_jk^2 / 2} K(lam_l - (lam_j + lam_k)/2 - w)
    where K is the one-sided tau integral of e^{-tau^2/(8 sigma^2)} e^{i x tau}.
    """
    pair = np.conj(Ae)[:, :, None] * Ae[:, None, :]           # [l, j, k]
    a = lam[:, None] - lam[None, :]
    damp = np.exp(-0.5 * sigma ** 2 * a ** 2)                  # [j, k]
    shift = lam[:, None, None] - 0.5 * (lam[None, :, None] + lam[None, None, :])
    return pair * damp[None], shift


def g_correlation(A, omega, system, sigma, tau_max_sigmas=12.0, tol=1e-10, method="quad"):
    """Half-plane correlation G_A(w) over s2 <= s1.

    method="quad": inner integral in closed form, outer tau integral on
    [0, tau_max] by adaptive quadrature.  method="closed": tau integral to
    infinity through the Faddeeva function.
    """
    lam = system.eigenvalues
    coef, shift = _g_tensors(system.to_eigbasis(A), lam, sigma)
    x = shift - omega
    p = 1.0 / (8.0 * sigma ** 2)
    if method == "closed":
        K = half_gauss(x, p)
    elif method == "quad":
        tmax = tau_max_sigmas * sigma
        flat = x.ravel()

        def integrand(t):
            v = np.exp(-p * t * t + 1j * flat * t)
            return np.concatenate([v.real, v.imag])

        res, err = quad_vec(integrand, 0.0, tmax, epsabs=tol, epsrel=tol, limit=2000)
        if not np.isfinite(err) or err > 100 * tol * max(1.0, np.max(np.abs(res))):
            raise QuadratureError(f"tau quadrature error estimate {err:.2e}")
        n = flat.size
        K = (res[:n] + 1j * res[n:]).reshape(x.shape)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return system.from_eigbasis(np.sum(coef * K, axis=0))


def im_part(X):
    return (X - dag(X)) / 2j


def lamb_shift_term(A, omega, system, bath, method="closed"):
    """H_LS,A(w) with the bath populations at effective inverse temperature beta_tilde."""
    bt = bath.beta_tilde
    p1 = 1.0 / (1.0 + np.exp(bt * omega))   # e^{-bt w}/(1+e^{-bt w})
    p0 = 1.0 - p1
    G1 = g_correlation(dag(A), omega, system, bath.sigma, method=method)
    G0 = g_correlation(A, -omega, system, bath.sigma, method=method)
    return -im_part(p1 * G1 + p0 * G0)


def tanh_bohr_transform(X, system, beta, gap_tol=None):
    """(i/2) sum_nu tanh(beta nu / 4) X_nu."""
    lam = system.eigenvalues
    if gap_tol is None:
        gap_tol = default_gap_tol(lam)
    labels, reps = cluster_bohr(lam, gap_tol)
    nu = reps[labels]
    Xe = system.to_eigbasis(X)
    return system.from_eigbasis(0.5j * np.tanh(beta * nu / 4.0) * Xe)


def _eig_frame(system):
    W = np.kron(np.conj(system.eigenvectors), system.eigenvectors)
    return W


def _check_couplings(system):
    cs = system.couplings
    for A in cs:
        Ad = dag(A)
        if not any(np.allclose(Ad, B, atol=1e-12) or np.allclose(Ad, -B, atol=1e-12) for B in cs):
            raise ParameterError("coupling set must be closed under adjoint")


def _dissipative_exact(system, sd):
    lam = system.eigenvalues
    d = system.dim
    sigma = sd.sigma
    c2 = 2 ** 1.5 * np.sqrt(np.pi) * sigma
    kappa = 1.0 + 4.0 * sigma ** 2 * sd.variance

    def W(a, b):
        m = 0.5 * (a + b)
        return (c2 * np.exp(-0.5 * sigma ** 2 * (a - b) ** 2)
                * np.exp(-2 * sigma ** 2 * (m - sd.mean) ** 2 / kappa) / np.sqrt(kappa))

    nu = lam[:, None] - lam[None, :]           # nu[j, l] = lam_j - lam_l
    Wt = W(nu[:, :, None, None], nu[None, None, :, :])   # [j, l, k, m]
    Wm = W(nu[:, :, None], nu[:, None, :])                # [l, j, k] for V^dag V
    T4 = np.zeros((d, d, d, d), dtype=complex)
    M = np.zeros((d, d), dtype=complex)
    for A in system.couplings:
        Ae = system.to_eigbasis(A)
        T4 += np.einsum("jl,km,jlkm->jklm", Ae, np.conj(Ae), Wt)
        M += np.einsum("lj,lk,ljk->jk", np.conj(Ae), Ae, Wm)
    T4 /= len(system.couplings)
    M /= len(system.couplings)
    # S[j + d k, l + d m]
    Se = T4.transpose(1, 0, 3, 2).reshape(d * d, d * d)
    return Se, M


def _coherent_exact(system, sd):
    """H_coh = -E_A Im int g(w) G_A(w) dw with the w-integral done first."""
    lam = system.eigenvalues
    sigma = sd.sigma
    p = 1.0 / (8.0 * sigma ** 2) + 0.5 * sd.variance
    acc = np.zeros((system.dim, system.dim), dtype=complex)
    for A in system.couplings:
        coef, shift = _g_tensors(system.to_eigbasis(A), lam, sigma)
        acc += np.sum(coef * half_gauss(shift - sd.mean, p), axis=0)
    acc /= len(system.couplings)
    return system.from_eigbasis(-im_part(acc))


def _node_parts(system, sd, n_nodes, rule):
    bath = BathConfig("frequency_sampled", sd.beta, sd.sigma)
    d = system.dim
    Se = np.zeros((d * d, d * d), dtype=complex)
    M = np.zeros((d, d), dtype=complex)
    Hc = np.zeros((d, d), dtype=complex)
    nA = len(system.couplings)
    for smp in bath.samples(n_nodes, rule):
        w = smp.weight / nA
        for A in system.couplings:
            V = system.to_eigbasis(jump_operator(A, smp.omega, system, sd.sigma))
            Se += w * np.kron(np.conj(V), V)
            M += w * dag(V) @ V
            Hc += w * system.to_eigbasis(lamb_shift_term(A, smp.omega, system, bath))
    return Se, M, 0.5 * (Hc + dag(Hc))


def assemble_generator(system, beta, sigma, quad=None):
    """GeneratorParts with L_full = -i[H_Lamb, .] + L_KMS."""
    quad = quad or QuadSpec()
    sd = spectral_densities(beta, sigma)
    _check_couplings(system)
    W = _eig_frame(system)
    if quad.kind == "exact":
        Se, Me = _dissipative_exact(system, sd)
        H_coh = _coherent_exact(system, sd)
    else:
        Se, Me, Hce = _node_parts(system, sd, quad.n_omega_nodes, quad.omega_rule)
        H_coh = system.from_eigbasis(Hce)
    transition = W @ Se @ dag(W)
    M_D = system.from_eigbasis(0.5 * (Me + dag(Me)))
    H_coh = 0.5 * (H_coh + dag(H_coh))
    G_D = tanh_bohr_transform(M_D, system, beta)
    H_Lamb = H_coh - G_D
    L_KMS = -1j * commutator_superop(G_D) + transition - 0.5 * anticommutator_superop(M_D)
    L_full = -1j * commutator_superop(H_coh) + transition - 0.5 * anticommutator_superop(M_D)
    return GeneratorParts(L_full, H_coh, transition, M_D, G_D, H_Lamb, L_KMS,
                          gibbs_state(system.H, beta))


def kms_defect(transition, rho):
    """max_ab |<E_a, T^dag E_b>_rho - <T^dag E_a, E_b>_rho| over matrix units."""
    s = op_power(rho, 0.5)
    Gam = np.kron(s.T, s)          # vec(s X s)
    Sd = dag(transition)
    D = Gam @ Sd - transition @ Gam
    return float(np.max(np.abs(D)))


def kms_defect_loop(transition, rho):
    """Same quantity evaluated pair by pair through kms_inner (slow oracle)."""
    d = rho.shape[0]
    Sd = dag(transition)
    units = []
    for j in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[j] = 1
        units.append(e.reshape((d, d), order="F"))
    adj = [(Sd @ vec(E)).reshape((d, d), order="F") for E in units]
    worst = 0.0
    for a in range(d * d):
        for b in range(d * d):
            v = kms_inner(units[a], adj[b], rho) - kms_inner(adj[a], units[b], rho)
            worst = max(worst, abs(v))
    return worst
