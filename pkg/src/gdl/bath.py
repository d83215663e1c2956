"""Repeated-interaction channel with a single-qubit bath.

Joint space is system (x) bath with the bath as the trailing factor.  The
coupling term is alpha f(t) (A (x) B + A^dag (x) B^dag) with B = |1><0|, and
one interaction runs over the window [-T, T].
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from . import backend
from .errors import IntegrationError, ParameterError, QuadratureError
from .operators import choi_matrix, dag
from .timelaw import mu_hat, mu_quadrature, oscillatory_nodes

VARIANTS = ("frequency_sampled", "gaussian_field")
B_LOWER = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0| in (|0>, |1>) order
PZ = np.diag([1.0, -1.0]).astype(complex)
CHOI_FLOOR = -1e-8
OMEGA_SPAN = 9.0  # law mass beyond is below 1e-18
# e^{-t^2/(4 sigma^2)} < 1e-16 beyond this many sigmas, so f is zero in double precision terms
ENVELOPE_CUTOFF_SIGMAS = 2.0 * np.sqrt(16.0 * np.log(10.0))


def envelope_f(t, sigma):
    t = np.asarray(t, dtype=float)
    return np.exp(-t ** 2 / (4.0 * sigma ** 2)) / np.sqrt(sigma * np.sqrt(2.0 * np.pi))


def f_hat(u, sigma):
    """int f(t) e^{iut} dt in closed form."""
    u = np.asarray(u, dtype=float)
    return 2.0 ** 0.75 * np.pi ** 0.25 * np.sqrt(sigma) * np.exp(-(sigma * u) ** 2)


def envelope_cutoff(sigma):
    return ENVELOPE_CUTOFF_SIGMAS * sigma


def sigma_beta(beta, sigma):
    return 2.0 - beta ** 2 / (4.0 * sigma ** 2)


def check_widths(beta, sigma):
    if not (beta > 0 and sigma > 0):
        raise ParameterError(f"beta and sigma must be positive (got {beta}, {sigma})")
    if sigma_beta(beta, sigma) <= 0:
        raise ParameterError(
            f"sigma={sigma} too small for beta={beta}: need sigma > beta/(2 sqrt 2)")


@dataclass(frozen=True)
class BathSample:
    omega: float          # bath frequency (Setup 1) or field h (Setup 4)
    weight: float
    H_E: np.ndarray
    rho_E: np.ndarray


@dataclass(frozen=True)
class BathConfig:
    variant: str = "frequency_sampled"
    beta: float = 1.0
    sigma: float = 2.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown bath variant {self.variant!r}")
        check_widths(self.beta, self.sigma)

    @property
    def sigma_beta(self):
        return sigma_beta(self.beta, self.sigma)

    @property
    def beta_tilde(self):
        return 2.0 * self.beta / self.sigma_beta

    @property
    def sampling_law(self):
        """(mean, variance) of the sampled bath parameter."""
        var = self.sigma_beta / self.beta ** 2
        if self.variant == "frequency_sampled":
            return -1.0 / self.beta, var
        # field variance 2/beta^2 - 2/sigma_L with sigma_L = 8 sigma^2 equals var
        return 1.0 / self.beta, var

    def sample(self, value, weight=1.0):
        H_E = -0.5 * value * PZ
        if self.variant == "frequency_sampled":
            p0 = 1.0 / (1.0 + np.exp(-self.beta_tilde * value))
            rho_E = np.diag([p0, 1.0 - p0]).astype(complex)
        else:
            rho_E = np.diag([1.0, 0.0]).astype(complex)
        return BathSample(float(value), float(weight), H_E, rho_E)

    def auto_nodes(self):
        """Trapezoid node count with spacing 0.4 / sigma; ~1e-12 relative accuracy."""
        _, var = self.sampling_law
        n = int(np.ceil(2.0 * OMEGA_SPAN * np.sqrt(var) * self.sigma / 0.4)) + 1
        return n + (n % 2 == 0)

    def samples(self, n_nodes=None, rule="trapezoid"):
        """Quadrature nodes of the sampling law as weighted BathSamples.

        "trapezoid" spaces nodes evenly over +-OMEGA_SPAN standard deviations;
        it converges far faster than Gauss-Hermite once the envelope width
        1/(2 sigma) is small compared with the spread of the law.
        """
        if n_nodes is None:
            n_nodes = self.auto_nodes()
        if n_nodes < 3:
            raise ParameterError("need at least 3 frequency nodes")
        mean, var = self.sampling_law
        if rule == "gauss_hermite":
            x, w = roots_hermite(int(n_nodes))
            vals = mean + np.sqrt(2.0 * var) * x
            w = w / np.sqrt(np.pi)
        elif rule == "trapezoid":
            x = np.linspace(-OMEGA_SPAN, OMEGA_SPAN, int(n_nodes))
            vals = mean + np.sqrt(var) * x
            w = np.exp(-0.5 * x ** 2)
            w = w / w.sum()  # exact trace preservation at any node count
        else:
            raise ParameterError(f"unknown frequency rule {rule!r}")
        return [self.sample(v, wi) for v, wi in zip(vals, w)]


@dataclass(frozen=True)
class ChannelConfig:
    alpha: float = 0.05
    T_law: str = "mu"            # "fixed" or "mu"
    T: float = 25.0              # T for fixed, T0 for mu
    n_omega_nodes: int | None = None    # None: BathConfig.auto_nodes()
    omega_rule: str = "trapezoid"       # or "gauss_hermite"
    n_T_nodes: int = 32
    steps_per_unit_time: int = 64
    T_scheme: str = "auto"       # "auto", "analytic", "mapped", "truncated"
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ParameterError("alpha must be nonnegative")
        if self.T_law not in ("fixed", "mu"):
            raise ParameterError(f"unknown T_law {self.T_law!r}")
        if not self.T > 0:
            raise ParameterError("T must be positive")
        if self.omega_rule not in ("trapezoid", "gauss_hermite"):
            raise ParameterError(f"unknown frequency rule {self.omega_rule!r}")
        if (self.n_omega_nodes is not None and self.n_omega_nodes < 3) or self.n_T_nodes < 3:
            raise ParameterError("quadrature node counts must be >= 3")
        if self.steps_per_unit_time < 1:
            raise ParameterError("steps_per_unit_time must be >= 1")


def joint_parts(system, sample, A):
    d = system.dim
    H0 = np.kron(system.H, np.eye(2)) + np.kron(np.eye(d), sample.H_E)
    V = np.kron(A, B_LOWER) + np.kron(dag(A), dag(B_LOWER))
    return H0, V


class WindowPropagator:
    """Propagators over [-T, T] for many T, sharing the steps from t=0 outward.

    Midpoint steps of length dt = 1/steps_per_unit_time sit at +-(m+1/2) dt;
    a window ending between grid points closes with one shorter midpoint step
    at each end.  Beyond the envelope cutoff the coupling vanishes, so the
    propagator there is the cutoff one dressed with free evolution.
    """

    def __init__(self, H0, V, alpha, sigma, steps_per_unit_time):
        self.H0 = np.asarray(H0, dtype=complex)
        self.V = np.asarray(V, dtype=complex)
        self.alpha = float(alpha)
        self.sigma = float(sigma)
        self.dt = 1.0 / steps_per_unit_time
        self.cut = envelope_cutoff(sigma)

    def _coeff(self, t):
        return self.alpha * envelope_f(t, self.sigma)

    def _step(self, t_mid, h):
        n = self.H0.shape[-1]
        eye = np.broadcast_to(np.eye(n, dtype=complex), self.H0.shape)
        return backend.midpoint_batch(self.H0, self.V, np.array([self._coeff(t_mid)]), h, eye)

    def many(self, Ts):
        """Propagators for each T (sorted or not); T beyond the cutoff is clipped."""
        Ts = np.asarray(Ts, dtype=float)
        Tc = np.minimum(Ts, self.cut)
        out = np.empty((len(Ts),) + self.H0.shape, dtype=complex)
        if len(Ts) == 0:
            return out
        order = np.argsort(Tc)
        n = self.H0.shape[-1]
        fwd = np.broadcast_to(np.eye(n, dtype=complex), self.H0.shape).copy()
        bwd = fwd.copy()
        m_done = 0
        for idx in order:
            T = Tc[idx]
            m = int(np.floor(T / self.dt + 1e-12))
            if m > m_done:
                mids = (np.arange(m_done, m) + 0.5) * self.dt
                fwd = backend.midpoint_batch(self.H0, self.V, self._coeff(mids), self.dt, fwd)
                # extend the backward product on the right: new steps happen earlier
                step_b = backend.midpoint_batch(self.H0, self.V, self._coeff(-mids[::-1]), self.dt)
                bwd = bwd @ step_b
                m_done = m
            r = T - m * self.dt
            U = fwd @ bwd
            if r > 1e-14:
                tm = m * self.dt + 0.5 * r
                U = self._step(tm, r) @ U @ self._step(-tm, r)
            out[idx] = U
        return out


def _free_superop(system, s):
    """Superoperator of X -> e^{-iHs} X e^{iHs}."""
    W = system.eigenvectors
    u = W @ np.diag(np.exp(-1j * s * system.eigenvalues)) @ dag(W)
    return np.kron(np.conj(u), u)


def kraus_superop(U, rho_E, d):
    """sum_{a,c} p_c K_ac (.) K_ac^dag with K_ac = <a|U|c> for a diagonal bath state."""
    blocks = U.reshape(d, 2, d, 2)
    S = np.zeros((d * d, d * d), dtype=complex)
    for c in range(2):
        p = rho_E[c, c].real
        if p == 0:
            continue
        for a in range(2):
            K = blocks[:, a, :, c]
            S += p * np.kron(np.conj(K), K)
    return S


def _check_unitary(U, tol=1e-10):
    n = U.shape[-1]
    err = np.max(np.abs(dag(U) @ U - np.eye(n)))
    if err > tol:
        raise IntegrationError(
            f"propagator unitarity error {err:.2e} > {tol:.0e}; increase steps_per_unit_time")


def joint_propagator(system, bath, sample, A_S, alpha, T, steps_per_unit_time=64):
    """Time-ordered propagator of the joint Hamiltonian over [-T, T]."""
    if not T > 0:
        raise ParameterError("T must be positive")
    if isinstance(sample, (int, float)):
        sample = bath.sample(sample)
    H0, V = joint_parts(system, sample, A_S)
    prop = WindowPropagator(H0[None], V[None], alpha, bath.sigma, steps_per_unit_time)
    U = prop.many([T])[0, 0]
    if T > prop.cut:
        s = T - prop.cut
        free = _free_joint(H0, s)
        U = free @ U @ free
    _check_unitary(U)
    return U


def _free_joint(H0, s):
    w, Q = np.linalg.eigh(H0)
    return (Q * np.exp(-1j * s * w)) @ dag(Q)


def channel_single(rho, system, bath, sample, A_S, alpha, T, steps_per_unit_time=64):
    """Tr_E[U (rho (x) rho_E) U^dag] for one coupling, bath sample and window."""
    if isinstance(sample, (int, float)):
        sample = bath.sample(sample)
    U = joint_propagator(system, bath, sample, A_S, alpha, T, steps_per_unit_time)
    joint = U @ np.kron(rho, sample.rho_E) @ dag(U)
    d = system.dim
    return np.einsum("iaja->ij", joint.reshape(d, 2, d, 2))


def average_free_sandwich(system, S, T0, shift=0.0):
    """E_T[U(T - shift) o S o U(T - shift)] over T ~ mu(T0), exactly via hat mu.

    Requires T0 >= shift so that T - shift >= 0 on the support.
    """
    if T0 < shift - 1e-12:
        raise ParameterError("analytic time average needs T0 >= shift")
    d = system.dim
    lam = system.eigenvalues
    W = np.kron(np.conj(system.eigenvectors), system.eigenvectors)
    Se = dag(W) @ S @ W
    # column-major vec index j + d k carries lambda_j - lambda_k
    om = (lam[:, None] - lam[None, :]).reshape(-1, order="F")
    Om = om[:, None] + om[None, :]
    factor = np.exp(1j * shift * Om) * mu_hat(-Om, T0)
    return W @ (factor * Se) @ dag(W)


def choose_T_scheme(cfg, sigma):
    if cfg.T_law == "fixed":
        return "fixed"
    if cfg.T_scheme != "auto":
        return cfg.T_scheme
    return "analytic" if cfg.T >= envelope_cutoff(sigma) else "truncated"


def channel_superop(system, bath, cfg, check_cp=True):
    """Averaged channel superoperator over couplings, bath samples and T."""
    d = system.dim
    samples = bath.samples(cfg.n_omega_nodes, cfg.omega_rule)
    # A and -A give the same channel (conjugate the bath by Z), so the
    # average over the signed set equals the average over the + half.
    couplings = system.couplings
    scheme = choose_T_scheme(cfg, bath.sigma)
    cut = envelope_cutoff(bath.sigma)
    if scheme == "fixed":
        Ts, wT = np.array([cfg.T]), np.array([1.0])
    elif scheme == "analytic":
        Ts, wT = np.array([cut]), np.array([1.0])
    else:
        n = cfg.n_T_nodes
        if scheme == "truncated":
            spread = float(system.eigenvalues[-1] - system.eigenvalues[0])
            n = max(n, oscillatory_nodes(cfg.T, 2.0 * spread))
        Ts, wT = mu_quadrature(cfg.T, n, scheme)

    tasks = [(A, smp) for A in couplings for smp in samples]
    H0 = np.array([joint_parts(system, smp, A)[0] for A, smp in tasks])
    V = np.array([joint_parts(system, smp, A)[1] for A, smp in tasks])
    weights = np.array([smp.weight for _, smp in tasks]) / len(couplings)

    def run(chunk):
        lo, hi = chunk
        prop = WindowPropagator(H0[lo:hi], V[lo:hi], cfg.alpha, bath.sigma,
                                cfg.steps_per_unit_time)
        Us = prop.many(Ts)  # (nT, b, n, n)
        _check_unitary(Us)
        return [[kraus_superop(Us[i, b], tasks[lo + b][1].rho_E, d) for i in range(len(Ts))]
                for b in range(hi - lo)]

    nw = backend.worker_count()
    bounds = np.linspace(0, len(tasks), min(nw, len(tasks)) + 1).astype(int)
    chunks = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as ex:
            results = list(ex.map(run, chunks))
    else:
        results = [run(chunks[0])]
    per_task = [x for r in results for x in r]
    # Summing in task order keeps the result independent of the worker count.
    per_T = []
    for i in range(len(Ts)):
        acc = np.zeros((d * d, d * d), dtype=complex)
        for k in range(len(tasks)):
            acc += weights[k] * per_task[k][i]
        per_T.append(acc)

    if scheme == "analytic":
        S = average_free_sandwich(system, per_T[0], cfg.T, shift=cut)
    else:
        S = np.zeros((d * d, d * d), dtype=complex)
        for T, w, St in zip(Ts, wT, per_T):
            if T > cut:
                P = _free_superop(system, T - cut)
                St = P @ St @ P
            S += w * St
    if check_cp:
        check_channel(S, d)
    return S


def check_channel(S, d, tp_tol=1e-10):
    row = np.eye(d).reshape(-1, order="F")
    tp = np.max(np.abs(row.conj() @ S - row.conj()))
    if tp > tp_tol:
        raise QuadratureError(f"trace preservation error {tp:.2e}")
    C = choi_matrix(S, d)
    w = np.linalg.eigvalsh(0.5 * (C + dag(C)))
    if w[0] < CHOI_FLOOR:
        raise QuadratureError(
            f"Choi eigenvalue {w[0]:.2e} below floor {CHOI_FLOOR:.0e}; refine the quadrature")
    return tp, float(w[0])
