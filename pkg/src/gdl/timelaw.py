"""Random interaction times, the signed measure nu and the fixed-point correction.

Time law: T = T0 * tau with tau - 1 ~ Gamma(4, 1), so the density is
mu(t) = mu0(t/T0)/T0 with mu0(t) = (t-1)^3 e^{-(t-1)}/6 on t >= 1.

Fourier convention: hat f(w) = int f(t) e^{iwt} dt.  The measure nu
defined through hat nu(w) = w mu(w) / (1 - mu(2w)) is purely imaginary
(hat nu(-w) = -conj hat nu(w)); its modulus is what the L1 checks use.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, QuadratureError
from .model import default_gap_tol, gibbs_populations
from .operators import dag


@dataclass(frozen=True)
class TimeDistribution:
    T0: float

    def pdf(self, t):
        s = np.asarray(t, dtype=float) / self.T0 - 1.0
        out = np.where(s >= 0, np.clip(s, 0, None) ** 3 * np.exp(-np.clip(s, 0, None)) / 6.0, 0.0)
        return out / self.T0

    @property
    def mean(self):
        return 5.0 * self.T0

    def quadrature(self, n_nodes=32, scheme="mapped"):
        return mu_quadrature(self.T0, n_nodes, scheme)


@dataclass(frozen=True)
class SignedMeasure:
    grid: np.ndarray
    density: np.ndarray  # complex; purely imaginary up to round-off
    L1: float

    def transform(self, omega):
        """Trapezoid forward transform  int nu(t) e^{iwt} dt."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        ph = np.exp(1j * omega[:, None] * self.grid[None, :])
        return np.trapezoid(self.density[None, :] * ph, self.grid, axis=1)


@dataclass(frozen=True)
class CorrectionOperators:
    Y: np.ndarray
    E: np.ndarray
    rho_star: np.ndarray
    rho_beta: np.ndarray


def _check_T0(T0):
    if not T0 > 0:
        raise ParameterError(f"T0 must be positive, got {T0}")


def mu_hat(omega, T0):
    _check_T0(T0)
    x = T0 * np.asarray(omega, dtype=float)
    return np.exp(1j * x) / (1.0 - 1j * x) ** 4


def _expm1c(z):
    small = np.abs(z) < 1e-2
    out = np.empty_like(z)
    zs = z[small]
    out[small] = zs * (1 + zs / 2 * (1 + zs / 3 * (1 + zs / 4 * (1 + zs / 5 * (1 + zs / 6)))))
    out[~small] = np.exp(z[~small]) - 1.0
    return out


def _log_mu0_hat(y):
    """log of e^{iy}(1-iy)^{-4}, accurate for small y."""
    y = np.asarray(y, dtype=complex)
    small = np.abs(y) < 1e-2
    out = np.empty_like(y)
    iy = 1j * y[small]
    # -4 log(1 - iy) = 4 sum_k (iy)^k / k
    series = sum(iy ** k / k for k in range(1, 9))
    out[small] = iy + 4 * series
    out[~small] = 1j * y[~small] - 4 * np.log(1 - 1j * y[~small])
    return out


def nu0_hat(x):
    """Unit-scale transform x mu0(x) / (1 - mu0(2x)); equals i/10 at x = 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape, dtype=complex)
    small = np.abs(x) < 1e-6
    out[small] = 0.1j + 0.08 * x[small]   # next term is O(x^2), below 1e-12 here
    xn = x[~small]
    num = xn * np.exp(_log_mu0_hat(xn))
    den = -_expm1c(_log_mu0_hat(2 * xn))
    out[~small] = num / den
    return out


def nu_hat(omega, T0):
    _check_T0(T0)
    om = np.asarray(omega, dtype=float)
    out = nu0_hat(T0 * om.ravel()) / T0
    return out.reshape(om.shape) if om.shape else out[0]


S_MAX = 60.0  # mu0 mass beyond t = 1 + S_MAX is below 1e-20


def mu_quadrature(T0, n_nodes=32, scheme="mapped"):
    """Nodes t_i and weights w_i with sum w_i F(t_i) ~ E_mu[F(T)].

    scheme="mapped": Gauss-Legendre in u = s/(1+s), s = t/T0 - 1.
    scheme="truncated": Gauss-Legendre on s in [0, S_MAX]; use this for
    oscillatory F, with about 20 nodes per unit of T0 * frequency.
    """
    _check_T0(T0)
    if n_nodes < 3:
        raise ParameterError("need at least 3 time nodes")
    x, w = np.polynomial.legendre.leggauss(int(n_nodes))
    if scheme == "mapped":
        u = 0.5 * (x + 1.0)
        w = 0.5 * w
        s = u / (1.0 - u)
        w = w / (1.0 - u) ** 2
    elif scheme == "truncated":
        s = 0.5 * S_MAX * (x + 1.0)
        w = 0.5 * S_MAX * w
    else:
        raise ParameterError(f"unknown time quadrature scheme {scheme!r}")
    return T0 * (1.0 + s), w * s ** 3 * np.exp(-s) / 6.0


def oscillatory_nodes(T0, max_freq, minimum=64):
    """Node count for the truncated rule that resolves e^{i max_freq T}."""
    return int(max(minimum, np.ceil(20.0 * T0 * max_freq) + 64))


def nu_time_grid(T0, L=64.0, n_points=2 ** 20):
    """nu(t) on [-L T0, L T0) by FFT of hat nu sampled on the matching frequency grid."""
    _check_T0(T0)
    if L < 40:
        raise ParameterError("grid half-width must be at least 40 T0")
    N = int(n_points)
    period = 2.0 * L * T0
    dw = 2.0 * np.pi / period
    k = np.fft.fftfreq(N, d=1.0 / N)  # integers, FFT order
    w = k * dw
    vals = nu_hat(w, T0)
    # nu(t_n) = (dw / 2 pi) sum_k hat nu(w_k) e^{-i w_k t_n},  t_n = n period / N
    dens = np.fft.fft(vals) * dw / (2.0 * np.pi)
    t = np.arange(N) * (period / N)
    t = np.where(t >= period / 2, t - period, t)
    order = np.argsort(t)
    t, dens = t[order], dens[order]
    edge = np.abs(dens[(np.abs(t) > 0.9 * L * T0)])
    mass = np.trapezoid(np.abs(dens), t)
    tail = np.trapezoid(edge, dx=period / N) if edge.size else 0.0
    if tail > 1e-6 * mass:
        raise QuadratureError(f"nu tail mass {tail:.2e} exceeds 1e-6 of total {mass:.2e}; widen L")
    return SignedMeasure(t, dens, float(mass))


def correction_E(H_lamb, system, beta, T0, alpha, gap_tol=None):
    """Y, E and rho* = rho_beta + alpha^2 E, all returned in the computational basis."""
    lam = system.eigenvalues
    p = gibbs_populations(system, beta)
    h = system.to_eigbasis(H_lamb)
    if gap_tol is None:
        gap_tol = default_gap_tol(lam)
    dl = lam[:, None] - lam[None, :]
    dp = p[:, None] - p[None, :]
    near = np.abs(dl) < gap_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(near, -beta * p[:, None] * np.ones_like(dl), dp / np.where(near, 1.0, dl))
    Y = -1j * h * q
    np.fill_diagonal(Y, 0.0)
    # E_jk = hat nu(lambda_k - lambda_j) Y_jk
    E = nu_hat(-dl, T0) * Y
    rho_b = np.diag(p).astype(complex)
    Yc, Ec, rb = (system.from_eigbasis(M) for M in (Y, E, rho_b))
    Ec = 0.5 * (Ec + dag(Ec))
    return CorrectionOperators(Yc, Ec, rb + alpha ** 2 * Ec, rb)


def delta_residual(E, H_lamb, system, beta, mu, n_nodes=None, scheme="truncated"):
    """E_T[U(2T) E U(2T)^dag - E + U(T)(-i[H_lamb, rho_beta])U(T)^dag] by T-quadrature.

    mu is a TimeDistribution, or a float for a deterministic T.
    """
    lam = system.eigenvalues
    p = gibbs_populations(system, beta)
    Ee = system.to_eigbasis(E)
    h = system.to_eigbasis(H_lamb)
    drive = -1j * (h * p[None, :] - p[:, None] * h)
    om = lam[None, :] - lam[:, None]  # omega_jk = lambda_k - lambda_j
    if isinstance(mu, TimeDistribution):
        if n_nodes is None:
            n_nodes = oscillatory_nodes(mu.T0, 2 * float(np.max(np.abs(om))))
        ts, ws = mu.quadrature(n_nodes, scheme)
    else:
        ts, ws = np.array([float(mu)]), np.array([1.0])
    acc = np.zeros_like(Ee)
    for t, w in zip(ts, ws):
        acc += w * ((np.exp(2j * t * om) - 1.0) * Ee + np.exp(1j * t * om) * drive)
    return system.from_eigbasis(acc)
