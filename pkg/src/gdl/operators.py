"""Dense operator algebra on small Hilbert spaces.

Superoperators act on column-stacked operators, so the map X -> A X B is
the matrix kron(B.T, A).  Everything here is a pure function of numpy
arrays.
"""

import numpy as np

from .errors import ContractError, SingularityError, StructureError

EIGEN_FLOOR_REL = 1e-13


def vec(X):
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, d):
    return np.asarray(v).reshape((d, d), order="F")


def dag(X):
    return np.conj(np.swapaxes(X, -1, -2))


def max_abs(X):
    return float(np.max(np.abs(X))) if np.size(X) else 0.0


def is_hermitian(X, rtol=1e-12):
    scale = max(max_abs(X), 1.0)
    return max_abs(X - dag(X)) <= rtol * scale


def hermitize(X):
    return 0.5 * (X + dag(X))


def check_density(rho, tol=1e-12):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StructureError(f"density matrix must be square, got {rho.shape}")
    if not is_hermitian(rho, tol):
        raise ContractError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol * rho.shape[0] * 10:
        raise ContractError(f"density matrix trace {np.trace(rho).real!r} != 1")
    w = np.linalg.eigvalsh(hermitize(rho))
    if w[0] < -1e-12:
        raise ContractError(f"density matrix has negative eigenvalue {w[0]:.3e}")
    return rho


def partial_trace_bath(joint):
    """Trace out a trailing two-level bath from a (2d x 2d) operator."""
    joint = np.asarray(joint)
    n = joint.shape[-1]
    if joint.shape[-2] != n or n % 2:
        raise StructureError(f"joint operator needs an even square shape, got {joint.shape}")
    d = n // 2
    r = joint.reshape(joint.shape[:-2] + (d, 2, d, 2))
    return np.einsum("...iaja->...ij", r)


def op_power(rho, p):
    """rho**p through the eigendecomposition; negative p refuses tiny eigenvalues."""
    w, U = np.linalg.eigh(hermitize(np.asarray(rho, dtype=complex)))
    top = max(w[-1], 0.0)
    if p < 0:
        floor = EIGEN_FLOOR_REL * top
        if top <= 0 or w[0] < floor:
            raise SingularityError(
                f"eigenvalue {w[0]:.3e} below floor {floor:.3e} for power {p}")
        wp = w ** p
    else:
        wp = np.clip(w, 0.0, None) ** p
    return (U * wp) @ dag(U)


def kms_inner(A, B, rho):
    """<A, B>_rho = Tr(A^dag rho^(1/2) B rho^(1/2))."""
    s = op_power(rho, 0.5)
    _ = op_power(rho, -0.5)  # strict positivity check
    return complex(np.trace(dag(A) @ s @ B @ s))


def superop_from_map(action, d, check=True, seed=0):
    """Matrix of a linear map on d x d operators, column j = vec(action(E_j))."""
    S = np.empty((d * d, d * d), dtype=complex)
    for j in range(d * d):
        E = np.zeros(d * d, dtype=complex)
        E[j] = 1.0
        S[:, j] = vec(action(unvec(E, d)))
    if check:
        rng = np.random.default_rng(seed)
        for _ in range(3):
            X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            Y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
            lhs = vec(action(a * X + b * Y))
            rhs = a * vec(action(X)) + b * vec(action(Y))
            if np.max(np.abs(lhs - rhs)) > 1e-9 * max(1.0, np.max(np.abs(rhs))):
                raise ContractError("map failed the linearity probe")
            if np.max(np.abs(S @ vec(X) - vec(action(X)))) > 1e-9 * max(1.0, np.max(np.abs(S))):
                raise ContractError("map failed the linearity probe")
    return S


def apply_superop(S, X):
    X = np.asarray(X)
    d = X.shape[0]
    if S.shape != (d * d, d * d):
        raise StructureError(f"superoperator shape {S.shape} does not act on {d}x{d}")
    return unvec(S @ vec(X), d)


def left(A):
    return np.kron(np.eye(A.shape[0]), A)


def right(B):
    return np.kron(B.T, np.eye(B.shape[0]))


def conj_superop(A, B=None):
    """Superoperator of X -> A X B (B defaults to A^dag)."""
    if B is None:
        B = dag(A)
    return np.kron(B.T, A)


def commutator_superop(H):
    return left(H) - right(H)


def anticommutator_superop(H):
    return left(H) + right(H)


def dissipator_superop(V):
    """X -> V X V^dag - {V^dag V, X}/2."""
    VV = dag(V) @ V
    return conj_superop(V) - 0.5 * anticommutator_superop(VV)


def hs_adjoint(S):
    return dag(S)


def trace_norm(X):
    return float(np.sum(np.linalg.svd(X, compute_uv=False)))


def trace_distance(r1, r2):
    if np.shape(r1) != np.shape(r2):
        raise StructureError("states have different shapes")
    return 0.5 * trace_norm(np.asarray(r1) - np.asarray(r2))


def op_norm(X):
    return float(np.linalg.norm(X, 2))


def hs_norm(X):
    return float(np.linalg.norm(X, "fro"))


def choi_matrix(S, d):
    """Choi matrix sum_ij E_ij (x) S(E_ij) from a column-stacked superoperator."""
    # S[(a,b),(i,j)] with column-major pairs -> reorder to (i,a),(j,b)
    T = S.reshape(d, d, d, d, order="F")  # T[a, b, i, j]
    return np.transpose(T, (2, 0, 3, 1)).reshape(d * d, d * d)
