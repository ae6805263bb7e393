"""States, operator-basis vectors, transfer matrices and Choi matrices.

Operators on C^d are represented by their coefficients on an HS-orthonormal
Hermitian basis {B_0 = I/sqrt(d), B_1, ..., B_{d^2-1}}.  For qubits this is
{I, sigma_x, sigma_y, sigma_z}/sqrt(2); for d > 2 it is the normalized
generalized Gell-Mann basis.  A linear map Phi is then the real matrix

    M[i, j] = Tr[B_i Phi(B_j)]

whenever Phi preserves Hermiticity.  Matrices are plain ``numpy`` arrays; the
helpers here never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_TOL = 1e-10
PSD_TOL = 1e-8
TP_TOL = 1e-10

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)


class DimensionError(ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class InvalidStateError(ValueError):
    """Matrix is not a valid density matrix."""


@lru_cache(maxsize=None)
def _basis(dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if dim == 2:
        out = np.array(PAULIS) / np.sqrt(2)
    else:
        mats = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
        for j in range(dim):
            for k in range(j + 1, dim):
                sym = np.zeros((dim, dim), dtype=complex)
                sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
                anti = np.zeros((dim, dim), dtype=complex)
                anti[j, k] = -1j / np.sqrt(2)
                anti[k, j] = 1j / np.sqrt(2)
                mats += [sym, anti]
        for l in range(1, dim):
            diag = np.zeros(dim)
            diag[:l] = 1.0
            diag[l] = -l
            mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
        out = np.array(mats)
    out.setflags(write=False)
    return out


def operator_basis(dim: int) -> np.ndarray:
    """Return the (dim**2, dim, dim) stack of HS-orthonormal basis operators."""
    return _basis(dim)


def dim_from_size(n: int) -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionError(f"{n} is not a perfect square")
    return d


def validate_state(rho: np.ndarray) -> np.ndarray:
    """Check the density-matrix invariants and return ``rho`` as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"expected a square matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise InvalidStateError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > TRACE_TOL:
        raise InvalidStateError(f"trace is {np.trace(rho).real:.3g}, not 1")
    if np.linalg.eigvalsh(rho)[0] < -EIGEN_TOL:
        raise InvalidStateError("matrix has a negative eigenvalue")
    return rho


def is_state(rho: np.ndarray) -> bool:
    try:
        validate_state(rho)
    except InvalidStateError:
        return False
    return True


def pure_state(psi: Sequence[complex]) -> np.ndarray:
    """Projector onto the normalized ket ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def bloch_state(x: float, y: float, z: float) -> np.ndarray:
    """Qubit state (I + x sx + y sy + z sz) / 2."""
    return 0.5 * (SIGMA_0 + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def to_pauli_vec(rho: np.ndarray) -> np.ndarray:
    """Coefficients Tr[B_i rho] of an operator on the orthonormal basis.

    Real for Hermitian input; complex otherwise (used for Choi construction).
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    basis = _basis(rho.shape[0])
    # Tr[B_i rho] with B_i Hermitian equals sum_ab conj(B_i)[a, b] rho[a, b]
    coeffs = np.einsum("iab,ab->i", basis.conj(), rho)
    if np.max(np.abs(rho - rho.conj().T)) <= HERMITIAN_TOL * max(1.0, np.max(np.abs(rho))):
        return coeffs.real.copy()
    return coeffs


def from_pauli_vec(v: np.ndarray) -> np.ndarray:
    """Operator sum_i v_i B_i.  No positivity check: differences are allowed."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    basis = _basis(dim_from_size(v.size))
    return np.einsum("i,iab->ab", v, basis)


def apply_map(m: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Apply the transfer matrix ``m`` to the operator ``rho``."""
    m = np.asarray(m)
    rho = np.asarray(rho)
    if m.shape != (rho.shape[0] ** 2,) * 2:
        raise DimensionError(f"map of shape {m.shape} cannot act on {rho.shape} operator")
    return from_pauli_vec(m @ to_pauli_vec(rho))


def superop_to_transfer(action, dim: int) -> np.ndarray:
    """Transfer matrix of the linear map ``action`` (a callable on dim x dim arrays)."""
    basis = _basis(dim)
    images = np.array([action(b) for b in basis])
    m = np.einsum("iab,jba->ij", basis, images)
    if np.max(np.abs(m.imag)) > 1e-12 * max(1.0, np.max(np.abs(m))):
        raise ValueError("map does not preserve Hermiticity")
    return m.real.copy()


def kraus_to_transfer(kraus: Sequence[np.ndarray]) -> np.ndarray:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    return superop_to_transfer(lambda x: sum(k @ x @ k.conj().T for k in kraus), kraus[0].shape[0])


def corner_matrix(x: float, dim: int = 2) -> np.ndarray:
    """The d^2 x d^2 matrix whose only nonzero entry is ``x`` in the bottom-left corner."""
    b = np.zeros((dim * dim, dim * dim))
    b[-1, 0] = x
    return b


def choi_of(m: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ab |a><b| (x) Phi(|a><b|), trace d for a TP map."""
    m = np.asarray(m)
    dim = dim_from_size(m.shape[0])
    basis = _basis(dim)
    # Phi(|a><b|) = sum_i (M c_ab)_i B_i with c_ab[j] = Tr[B_j |a><b|] = conj(B_j)[a, b]
    c = basis.conj()  # c[j, a, b]
    images = np.einsum("ij,jab,ikl->abkl", m, c, basis)
    return images.transpose(0, 2, 1, 3).reshape(dim * dim, dim * dim)


@dataclass(frozen=True)
class CptReport:
    ok: bool
    min_eigenvalue: float
    tp_residual: float


def is_cpt(m: np.ndarray, tol_psd: float = PSD_TOL, tol_tp: float = TP_TOL) -> CptReport:
    """Complete positivity (Choi spectrum) and trace preservation (first row) check."""
    if tol_psd <= 0 or tol_tp <= 0:
        raise ValueError("tolerances must be positive")
    m = np.asarray(m)
    choi = choi_of(m)
    min_eig = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0])
    first = np.zeros(m.shape[1])
    first[0] = 1.0
    tp = float(np.max(np.abs(m[0] - first)))
    return CptReport(min_eig >= -tol_psd and tp <= tol_tp, min_eig, tp)


def cpt_report_batch(maps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (min Choi eigenvalue, TP residual) for a stack of transfer matrices."""
    maps = np.asarray(maps)
    dim = dim_from_size(maps.shape[-1])
    basis = _basis(dim)
    images = np.einsum("nij,jab,ikl->nabkl", maps, basis.conj(), basis)
    choi = images.transpose(0, 1, 3, 2, 4).reshape(len(maps), dim * dim, dim * dim)
    choi = 0.5 * (choi + choi.conj().transpose(0, 2, 1))
    min_eig = np.linalg.eigvalsh(choi)[:, 0]
    first = np.zeros(maps.shape[-1])
    first[0] = 1.0
    tp = np.max(np.abs(maps[:, 0, :] - first), axis=1)
    return min_eig, tp


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Half the trace norm of rho1 - rho2."""
    rho1, rho2 = np.asarray(rho1), np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise DimensionError(f"shapes {rho1.shape} and {rho2.shape} differ")
    diff = rho1 - rho2
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def trace_distance_diagonal(x: float, y: float, z: float, delta_p: float, delta_c: complex) -> float:
    """Trace distance after a map diag(1, X, Y, Z) (+ corner) for a qubit pair.

    ``delta_p`` is the difference of the upper populations and ``delta_c`` the
    difference of the <0|rho|1> coherences of the two initial states.
    """
    return float(np.sqrt((delta_p * z) ** 2 + (delta_c.real * x) ** 2 + (delta_c.imag * y) ** 2))


def random_kraus(dim: int, n_ops: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random complete Kraus set from an isometry (QR of a Ginibre matrix)."""
    g = rng.normal(size=(dim * n_ops, dim)) + 1j * rng.normal(size=(dim * n_ops, dim))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return [q[k * dim:(k + 1) * dim] for k in range(n_ops)]


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
