"""Test Hamiltonians, Gibbs states, Bohr decompositions and coupling sets."""

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import CapacityError, ParameterError
from .operators import dag, op_norm

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)

PRESETS = ("single_qubit_z", "tfim_chain", "random_hermitian")
MAX_QUBITS = 6


def embed(op, site, n):
    factors = [I2] * n
    factors[site] = op
    return reduce(np.kron, factors)


def pauli_couplings(n):
    """Local Paulis X_j, Y_j, Z_j scaled to unit operator norm (they already are)."""
    out = []
    for j in range(n):
        for P in (PX, PY, PZ):
            A = embed(P, j, n)
            out.append(A / op_norm(A))
    return out


@dataclass(frozen=True)
class SystemModel:
    n_qubits: int
    H: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    couplings: tuple
    preset: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.H.shape[0]

    def to_eigbasis(self, X):
        U = self.eigenvectors
        return dag(U) @ X @ U

    def from_eigbasis(self, X):
        U = self.eigenvectors
        return U @ X @ dag(U)

    def bohr_matrix(self):
        """B[j, k] = lambda_j - lambda_k."""
        lam = self.eigenvalues
        return lam[:, None] - lam[None, :]

    def signed_couplings(self):
        """The full set {+A, -A}; averages over it equal averages over the +A half
        for every quantity that is even in A."""
        return [s * A for A in self.couplings for s in (1.0, -1.0)]


def system_from_hamiltonian(H, couplings=None, n_qubits=None, preset="custom", params=None):
    H = np.asarray(H, dtype=complex)
    H = 0.5 * (H + dag(H))
    d = H.shape[0]
    if n_qubits is None:
        n_qubits = int(round(np.log2(d)))
    lam, U = np.linalg.eigh(H)
    if couplings is None:
        couplings = pauli_couplings(n_qubits)
    couplings = tuple(np.asarray(A, dtype=complex) / op_norm(A) for A in couplings)
    return SystemModel(n_qubits, H, lam, U, couplings, preset, dict(params or {}))


COUPLING_SETS = ("pauli", "tilted")


def coupling_set(n, name="pauli"):
    """'pauli': X, Y, Z on every qubit.  'tilted': (X + Z)/sqrt 2 on every qubit,
    which breaks the rotational covariance that makes the Pauli set's Lamb
    shift commute with the Gibbs state on a single qubit."""
    if name == "pauli":
        return pauli_couplings(n)
    if name == "tilted":
        return [embed((PX + PZ) / np.sqrt(2.0), j, n) for j in range(n)]
    raise ParameterError(f"unknown coupling set {name!r}; expected one of {COUPLING_SETS}")


def tfim_hamiltonian(n, J=1.0, g=0.5):
    """-J sum Z_j Z_{j+1} - g sum X_j on an open chain."""
    d = 2 ** n
    H = np.zeros((d, d), dtype=complex)
    for j in range(n - 1):
        H -= J * embed(PZ, j, n) @ embed(PZ, j + 1, n)
    for j in range(n):
        H -= g * embed(PX, j, n)
    return H


def build_system(preset, params=None, seed=0):
    params = dict(params or {})
    n = int(params.get("n_qubits", 1))
    if n > MAX_QUBITS:
        raise CapacityError(f"n_qubits={n} exceeds the supported maximum {MAX_QUBITS}")
    if n < 1:
        raise ParameterError(f"n_qubits must be >= 1, got {n}")
    if preset == "single_qubit_z":
        if n != 1:
            raise ParameterError("single_qubit_z requires n_qubits=1")
        H = PZ.copy()
    elif preset == "tfim_chain":
        H = tfim_hamiltonian(n, float(params.get("J", 1.0)), float(params.get("g", 0.5)))
    elif preset == "random_hermitian":
        rng = np.random.default_rng(seed)
        d = 2 ** n
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        H = 0.5 * (G + dag(G))
        H *= float(params.get("scale", 1.0)) / op_norm(H)
    else:
        raise ParameterError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    return system_from_hamiltonian(H, coupling_set(n, params.get("couplings", "pauli")),
                                   n_qubits=n, preset=preset, params=params)


def gibbs_state(H, beta):
    lam, U = np.linalg.eigh(0.5 * (H + dag(H)))
    w = np.exp(-beta * (lam - lam[0]))
    w /= w.sum()
    return (U * w) @ dag(U)


def gibbs_populations(system, beta):
    lam = system.eigenvalues
    w = np.exp(-beta * (lam - lam[0]))
    return w / w.sum()


@dataclass(frozen=True)
class BohrDecomposition:
    frequencies: np.ndarray
    blocks: tuple


def default_gap_tol(lam):
    rng = float(lam[-1] - lam[0]) if len(lam) > 1 else 0.0
    return 1e-9 * max(rng, 1.0)


def cluster_bohr(lam, gap_tol):
    """Cluster the Bohr frequencies lambda_l - lambda_k of entries (l, k).

    The sign follows phase covariance: entry (l, k) of A picks up
    e^{i(lambda_l - lambda_k)t} under A(t) = e^{iHt} A e^{-iHt}.
    Returns (labels[l, k], representative frequency per label).
    """
    nu = lam[:, None] - lam[None, :]
    flat = nu.ravel()
    order = np.argsort(flat, kind="stable")
    labels = np.empty(flat.size, dtype=int)
    reps = []
    start = 0
    c = 0
    for i in range(1, flat.size + 1):
        if i == flat.size or flat[order[i]] - flat[order[i - 1]] >= gap_tol:
            idx = order[start:i]
            labels[idx] = c
            reps.append(float(np.mean(flat[idx])))
            c += 1
            start = i
    return labels.reshape(nu.shape), np.array(reps)


def bohr_project(H, M, gap_tol=None, system=None):
    """Split M into blocks M_nu with e^{iHt} M_nu e^{-iHt} = e^{i nu t} M_nu."""
    if system is None:
        lam, U = np.linalg.eigh(0.5 * (H + dag(H)))
    else:
        lam, U = system.eigenvalues, system.eigenvectors
    if gap_tol is None:
        gap_tol = default_gap_tol(lam)
    if gap_tol <= 0:
        raise ParameterError("gap_tol must be positive")
    labels, reps = cluster_bohr(lam, gap_tol)
    Me = dag(U) @ M @ U
    blocks = []
    for c in range(len(reps)):
        blocks.append(U @ np.where(labels == c, Me, 0) @ dag(U))
    return BohrDecomposition(reps, tuple(blocks))


def heisenberg(A, system, t):
    """A(t) = e^{iHt} A e^{-iHt} in the cached eigenbasis."""
    lam = system.eigenvalues
    phase = np.exp(1j * t * (lam[:, None] - lam[None, :]))
    return system.from_eigbasis(phase * system.to_eigbasis(A))
