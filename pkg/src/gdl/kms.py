"""Similarity transform, spectral gap, Lamb defect, d_beta metric and mixing bound."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .operators import dag, op_norm, op_power, vec
from .generator import kms_defect

GAP_THRESHOLD = 1e-9


@dataclass(frozen=True)
class SimilaritySplit:
    K: np.ndarray
    herm: np.ndarray
    anti: np.ndarray


@dataclass(frozen=True)
class GapReport:
    gap: float
    eigenvalues: np.ndarray
    kernel_dim: int
    defect: float


def _sandwich(q):
    return np.kron(q.T, q)  # vec(q X q)


def similarity_transform(L, rho):
    """K(X) = rho^{-1/4} L(rho^{1/4} X rho^{1/4}) rho^{-1/4}, split into HS-Hermitian parts."""
    K = _sandwich(op_power(rho, -0.25)) @ L @ _sandwich(op_power(rho, 0.25))
    Kd = dag(K)
    return SimilaritySplit(K, 0.5 * (K + Kd), 0.5 * (K - Kd))


def _complement(v):
    """Orthonormal basis of the orthocomplement of the unit vector v."""
    n = v.size
    Q, _ = np.linalg.qr(np.column_stack([v, np.eye(n, dtype=complex)]))
    return Q[:, 1:n]


def spectral_gap(L_kms, rho, max_defect=1e-6):
    defect = kms_defect(L_kms, rho)
    if defect > max_defect:
        raise ContractError(f"generator is not KMS-symmetric (defect {defect:.2e})")
    split = similarity_transform(L_kms, rho)
    v = vec(op_power(rho, 0.5))
    v = v / np.linalg.norm(v)
    Q = _complement(v)
    M = -dag(Q) @ split.herm @ Q
    ev = np.linalg.eigvalsh(0.5 * (M + dag(M)))
    if ev[0] < -GAP_THRESHOLD:
        raise ContractError(f"negative relaxation rate {ev[0]:.2e}")
    positive = ev[ev > GAP_THRESHOLD]
    gap = float(positive[0]) if positive.size else 0.0
    return GapReport(gap, ev, 1 + int(np.sum(ev <= GAP_THRESHOLD)), defect)


def lamb_defect(H_lamb, rho):
    a = op_power(rho, -0.25)
    b = op_power(rho, 0.25)
    return op_norm(a @ H_lamb @ b - b @ H_lamb @ a)


def d_beta_distance(r1, r2, rho):
    a = op_power(rho, -0.25)
    return float(np.linalg.norm(a @ (r1 - r2) @ a))


def inverse_sqrt_norm(rho):
    return float(1.0 / np.sqrt(np.min(np.linalg.eigvalsh(rho))))


def mixing_time_bound(gap, alpha, eps, rho):
    """(1 / (gap alpha^2)) log(2 ||rho^{-1/2}|| / eps), floored at 0."""
    if not (gap > 0 and alpha > 0 and eps > 0):
        raise ContractError("gap, alpha and eps must be positive")
    val = np.log(2.0 * inverse_sqrt_norm(rho) / eps) / (gap * alpha ** 2)
    return float(max(val, 0.0))


def crude_inverse_sqrt_bound(n_qubits, beta, H):
    """2^N e^{beta ||H||}, the a priori bound on ||rho^{-1/2}|| reported for comparison."""
    return float(2.0 ** n_qubits * np.exp(beta * op_norm(H)))
