"""Fixed points, scaling scans, mixing measurement and slope fits."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .bath import ChannelConfig, average_free_sandwich, channel_superop
from .errors import (ContractError, MixingTimeoutError, NonPrimitiveError,
                     ParameterError)
from .generator import QuadSpec, assemble_generator
from .operators import apply_superop, dag, trace_norm, unvec, vec

MIXING_CAP = 10 ** 7


@dataclass(frozen=True)
class ScanReport:
    axis: str
    grid: np.ndarray
    values: np.ndarray
    slope: float | None
    residual: float | None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FixedPointResult:
    state: np.ndarray
    residual: float
    method: str
    gap_to_one: float


def slope_fit(xs, ys):
    """Least-squares slope of log ys against log xs and the RMS log residual."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 4 or xs.size != ys.size:
        raise ParameterError("slope fit needs at least 4 paired points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ParameterError("slope fit needs positive data")
    lx, ly = np.log(xs), np.log(ys)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def make_report(axis, grid, values, extra=None):
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    slope = residual = None
    if grid.size >= 4 and np.all(values > 0):
        s, r = slope_fit(grid, values)
        if r < 0.1:
            slope, residual = s, r
        else:
            residual = r
    return ScanReport(axis, grid, values, slope, residual, extra or {})


def fixed_point(S, tol=1e-9, multiplicity_tol=1e-8):
    n = S.shape[0]
    d = int(round(np.sqrt(n)))
    w, v = np.linalg.eig(S)
    dist = np.abs(w - 1.0)
    order = np.argsort(dist)
    if dist[order[1]] <= multiplicity_tol:
        raise NonPrimitiveError("eigenvalue 1 is degenerate; fixed point is not unique")
    rho = unvec(v[:, order[0]], d)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NonPrimitiveError("fixed eigenvector has vanishing trace")
    rho = rho / tr
    rho = 0.5 * (rho + dag(rho))
    rho = rho / np.trace(rho).real
    residual = trace_norm(apply_superop(S, rho) - rho)
    if residual > tol:
        raise ContractError(f"fixed-point residual {residual:.2e} exceeds {tol:.1e}")
    return FixedPointResult(rho, residual, "dense_eig", float(dist[order[1]]))


def power_iteration(S, rho0, steps=200000, tol=1e-13):
    """Plain iteration of the channel; kept as an oracle for fixed_point."""
    d = rho0.shape[0]
    v = vec(rho0)
    for _ in range(steps):
        nv = S @ v
        if np.max(np.abs(nv - v)) < tol:
            v = nv
            break
        v = nv
    r = unvec(v, d)
    return 0.5 * (r + dag(r))


def free_superop(system, t):
    u = system.from_eigbasis(np.diag(np.exp(-1j * system.eigenvalues * t)))
    return np.kron(np.conj(u), u)


def composed_channel(system, L, alpha, T_law="mu", T=25.0):
    """E_T[U(T) o exp(alpha^2 L) o U(T)] for T ~ mu(T0 = T), or at the fixed T."""
    G = expm(alpha ** 2 * L)
    if T_law == "fixed":
        P = free_superop(system, T)
        return P @ G @ P
    if T_law != "mu":
        raise ParameterError(f"unknown T_law {T_law!r}")
    return average_free_sandwich(system, G, T, shift=0.0)


def probe_states(d):
    """Pure states from Hermitized matrix units: |j><j| and the two phase pairs on (j, k)."""
    out = []
    for j in range(d):
        e = np.zeros(d, dtype=complex)
        e[j] = 1
        out.append(np.outer(e, e.conj()))
        for k in range(j + 1, d):
            for ph in (1.0, 1j):
                e = np.zeros(d, dtype=complex)
                e[j] = 1 / np.sqrt(2)
                e[k] = ph / np.sqrt(2)
                out.append(np.outer(e, e.conj()))
    return out


def one_step_error(S1, S2):
    d = int(round(np.sqrt(S1.shape[0])))
    D = S1 - S2
    return max(trace_norm(apply_superop(D, r)) for r in probe_states(d))


def _generator(system, bath, quad):
    return assemble_generator(system, bath.beta, bath.sigma, quad or QuadSpec())


def bias_scan(system, bath, base_cfg, alphas, channel_source="lindblad_composed", quad=None):
    """||rho_fix - rho_beta||_1 over the coupling strengths alphas."""
    alphas = np.asarray(sorted(alphas), dtype=float)
    if np.any(alphas <= 0):
        raise ParameterError("alpha = 0 gives a non-primitive channel; use alpha > 0")
    parts = _generator(system, bath, quad)
    rb = parts.rho_beta
    vals, gaps = [], []
    for a in alphas:
        if channel_source == "lindblad_composed":
            S = composed_channel(system, parts.L_full, a, base_cfg.T_law, base_cfg.T)
        elif channel_source == "exact_bath":
            S = channel_superop(system, bath, _with_alpha(base_cfg, a))
        else:
            raise ParameterError(f"unknown channel source {channel_source!r}")
        fp = fixed_point(S)
        vals.append(trace_norm(fp.state - rb))
        gaps.append(fp.gap_to_one)
    return make_report("alpha", alphas, vals, {"channel_source": channel_source,
                                          "gap_to_one": [float(g) for g in gaps]})


def _with_alpha(cfg, alpha):
    from dataclasses import replace
    return replace(cfg, alpha=float(alpha))


def step_error_scan(system, bath, cfg, alphas, quad=None):
    """One-step gap between the exact channel and U(T) o exp(alpha^2 L) o U(T) at fixed T."""
    if cfg.T_law != "fixed":
        raise ParameterError("step_error_scan compares single windows; set T_law='fixed'")
    alphas = np.asarray(sorted(alphas), dtype=float)
    parts = _generator(system, bath, quad)
    vals = []
    for a in alphas:
        S = channel_superop(system, bath, _with_alpha(cfg, a))
        vals.append(one_step_error(S, composed_channel(system, parts.L_full, a, "fixed", cfg.T)))
    return make_report("alpha", alphas, vals)


def mixing_estimate(S, eps, rho_fix, cap=MIXING_CAP):
    """Smallest k with max over probe states of ||S^k(rho0) - rho_fix||_1 <= eps."""
    if eps >= 2.0:
        return 0
    d = rho_fix.shape[0]
    probes = np.column_stack([vec(r) for r in probe_states(d)])
    target = vec(rho_fix)[:, None]

    def worst(M):
        out = M @ probes - target
        return max(trace_norm(unvec(out[:, i], d)) for i in range(out.shape[1]))

    if worst(np.eye(S.shape[0])) <= eps:
        return 0
    powers = [S]
    while worst(powers[-1]) > eps:
        if 2 ** len(powers) > cap:
            raise MixingTimeoutError(f"mixing time exceeds cap {cap}")
        powers.append(powers[-1] @ powers[-1])
    # binary lifting: largest k with worst(S^k) > eps, then k + 1
    k = 0
    M = np.eye(S.shape[0], dtype=complex)
    for j in range(len(powers) - 2, -1, -1):
        trial = powers[j] @ M
        if worst(trial) > eps:
            M = trial
            k += 2 ** j
    return k + 1


def rho_star_quality(system, parts, alpha, T0, correction):
    """||Phi(rho*) - rho*||_1 for the composed channel with random T."""
    S = composed_channel(system, parts.L_full, alpha, "mu", T0)
    rs = correction.rho_star
    return trace_norm(apply_superop(S, rs) - rs)


def default_channel_config(alpha=0.05, T0=25.0, **kw):
    return ChannelConfig(alpha=alpha, T_law="mu", T=T0, **kw)
