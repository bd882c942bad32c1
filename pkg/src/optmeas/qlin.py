"""Dense operator algebra on N-qubit spaces.

Conventions
-----------
* Operators are plain ``numpy`` complex arrays of shape ``(2**N, 2**N)``.
* Qubit 0 is the most significant bit of the basis index.
* The singlet is ``(|01> - |10>) / sqrt(2)``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidStateError, SizeLimitError

#: Largest copy count accepted by the dense constructions.
MAX_COPIES = 10

BLOCH_TOL = 1e-12
PSD_FLOOR = -1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])


def check_copies(N, max_copies=None):
    cap = MAX_COPIES if max_copies is None else max_copies
    if int(N) != N or N < 1:
        raise ValueError(f"copy count must be a positive integer, got {N!r}")
    if N > cap:
        raise SizeLimitError(f"copy count {N} exceeds the size cap {cap}")
    return int(N)


def as_bloch(b) -> np.ndarray:
    """Validate a Bloch vector and return it as a float array of shape (3,)."""
    v = np.asarray(b, dtype=float)
    if v.shape != (3,):
        raise InvalidStateError(f"Bloch vector must have 3 components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidStateError("Bloch vector has non-finite components")
    if np.linalg.norm(v) > 1 + BLOCH_TOL:
        raise InvalidStateError(f"invalid Bloch vector: |b| = {np.linalg.norm(v):.17g} > 1")
    return v


def density_from_bloch(b) -> np.ndarray:
    """Return ``(I + b.sigma) / 2``."""
    v = as_bloch(b)
    return 0.5 * (PAULI_I + np.tensordot(v, PAULIS, axes=1))


def densities_from_bloch(bvecs) -> np.ndarray:
    """Vectorised :func:`density_from_bloch` for an ``(m, 3)`` array, no validation."""
    bvecs = np.asarray(bvecs, dtype=float)
    return 0.5 * (PAULI_I + np.einsum("mk,kij->mij", bvecs, PAULIS))


def bloch_from_density(rho) -> np.ndarray:
    rho = np.asarray(rho)
    return np.real(np.einsum("kij,ji->k", PAULIS, rho))


def ket(n) -> np.ndarray:
    """Spin-1/2 state with maximal spin component along the unit vector ``n``."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    theta = np.arccos(np.clip(n[2], -1.0, 1.0))
    phi = np.arctan2(n[1], n[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def kron_all(factors) -> np.ndarray:
    out = np.ones((1,) * np.ndim(factors[0]), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def tensor_power(rho, N, max_copies=None) -> np.ndarray:
    """Return ``rho`` tensored with itself ``N`` times."""
    N = check_copies(N, max_copies)
    rho = np.asarray(rho, dtype=complex)
    out = rho
    for _ in range(N - 1):
        out = np.kron(out, rho)
    return out


def batched_tensor_power(rhos, N) -> np.ndarray:
    """``N``-fold tensor power of each 2x2 matrix in an ``(m, 2, 2)`` stack."""
    rhos = np.asarray(rhos, dtype=complex)
    m = rhos.shape[0]
    out = rhos
    for _ in range(N - 1):
        d = out.shape[1]
        out = np.einsum("mij,mkl->mikjl", out, rhos).reshape(m, 2 * d, 2 * d)
    return out


def _index_bits(N):
    idx = np.arange(2**N)
    shifts = N - 1 - np.arange(N)
    return (idx[:, None] >> shifts[None, :]) & 1


def permutation_operator(p, N=None, max_copies=None) -> np.ndarray:
    """Unitary that moves the tensor factor in slot ``i`` to slot ``p[i]``.

    The map is a homomorphism: ``V(p) @ V(q) == V(p o q)`` with
    ``(p o q)(i) = p[q[i]]``.
    """
    p = [int(x) for x in p]
    if N is None:
        N = len(p)
    N = check_copies(N, max_copies)
    if sorted(p) != list(range(N)):
        raise ValueError(f"{p} is not a permutation of range({N})")
    bits = _index_bits(N)
    out_bits = np.empty_like(bits)
    out_bits[:, p] = bits
    weights = 1 << (N - 1 - np.arange(N))
    target = out_bits @ weights
    V = np.zeros((2**N, 2**N), dtype=complex)
    V[target, np.arange(2**N)] = 1.0
    return V


def transposition(i, j, N) -> np.ndarray:
    p = list(range(N))
    p[i], p[j] = p[j], p[i]
    return permutation_operator(p, N)


def local_operator(op, site, N) -> np.ndarray:
    """Embed a single-qubit operator acting on ``site`` into the N-qubit space."""
    factors = [PAULI_I] * N
    factors[site] = np.asarray(op, dtype=complex)
    return kron_all(factors)


def total_spin_squared(N, subset=None, max_copies=None) -> np.ndarray:
    """Squared total spin of the qubits in ``subset`` (all qubits by default)."""
    N = check_copies(N, max_copies)
    subset = list(range(N)) if subset is None else sorted(set(int(k) for k in subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    if subset[0] < 0 or subset[-1] >= N:
        raise ValueError(f"subset {subset} outside range({N})")
    out = np.zeros((2**N, 2**N), dtype=complex)
    for sigma in PAULIS:
        S = sum(local_operator(sigma / 2, k, N) for k in subset)
        out += S @ S
    return out


def spin_dot(N, direction) -> np.ndarray:
    """``S . n`` for the total spin of N qubits."""
    n = np.asarray(direction, dtype=float)
    single = np.tensordot(n, PAULIS, axes=1) / 2
    return sum(local_operator(single, k, N) for k in range(N))


SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def singlet_projector() -> np.ndarray:
    return np.outer(SINGLET, SINGLET.conj())


def is_hermitian(A, tol=1e-12) -> bool:
    A = np.asarray(A)
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) < tol)


def _psd_sqrt(A, name):
    w, U = np.linalg.eigh(0.5 * (A + A.conj().T))
    if w.min() < PSD_FLOOR:
        raise InvalidStateError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


def uhlmann_fidelity(rho, sigma) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    sr = _psd_sqrt(rho, "rho")
    _psd_sqrt(sigma, "sigma")
    inner = sr @ sigma @ sr
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def bloch_fidelity(b, r) -> float:
    """Fidelity between two qubit states given by their Bloch vectors."""
    b = as_bloch(b)
    r = as_bloch(r)
    bb = min(float(b @ b), 1.0)
    rr = min(float(r @ r), 1.0)
    return 0.5 * (1 + float(b @ r) + np.sqrt(1 - bb) * np.sqrt(1 - rr))


def qubit_fidelity_batch(rhos, sigma) -> np.ndarray:
    """Fidelity of each 2x2 ``rhos[m]`` with ``sigma``.

    Uses ``F = Tr(rho sigma) + 2 sqrt(det rho det sigma)``, valid for qubits.
    """
    rhos = np.asarray(rhos, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    overlap = np.real(np.einsum("mij,ji->m", rhos, sigma))
    det_r = np.clip(np.real(np.linalg.det(rhos)), 0.0, None)
    det_s = max(float(np.real(np.linalg.det(sigma))), 0.0)
    return overlap + 2.0 * np.sqrt(det_r * det_s)


def qubit_fidelity_grid(rhos, sigmas) -> np.ndarray:
    """Fidelity table ``F[m, k]`` between ``rhos[m]`` and ``sigmas[k]`` (all 2x2)."""
    rhos = np.asarray(rhos, dtype=complex)
    sigmas = np.asarray(sigmas, dtype=complex)
    overlap = np.real(np.einsum("mij,kji->mk", rhos, sigmas))
    det_r = np.clip(np.real(np.linalg.det(rhos)), 0.0, None)
    det_s = np.clip(np.real(np.linalg.det(sigmas)), 0.0, None)
    return overlap + 2.0 * np.sqrt(np.outer(det_r, det_s))


def numerical_rank(A, tol=1e-8) -> int:
    w = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    return int(np.sum(w > tol))


def max_abs(A) -> float:
    return float(np.max(np.abs(A), initial=0.0))


def commutator(A, B) -> np.ndarray:
    return A @ B - B @ A


def random_rotation(rng) -> np.ndarray:
    """Haar-random 3x3 rotation matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
