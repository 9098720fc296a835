"""Dense complex linear algebra for single- and two-qutrit operators.

The two-qutrit basis is ordered |AD> with the ancilla as the first digit:
|00>, |01>, |02>, |10>, |11>, |12>, |20>, |21>, |22>. Index of |ad> is 3*a + d.
"""
from __future__ import annotations

import numpy as np

DIM = 3
BASIS_LABELS = ("00", "01", "02", "10", "11", "12", "20", "21", "22")

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
NORM_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an operator or state violates its declared contract."""


def basis_index(ancilla: int, data: int) -> int:
    if not (0 <= ancilla < DIM and 0 <= data < DIM):
        raise ValidationError(f"levels must be in 0..2, got ({ancilla}, {data})")
    return DIM * ancilla + data


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) < tol


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < tol


def hermitian_exp(s: np.ndarray) -> np.ndarray:
    """Return exp(iS) for a Hermitian generator S.

    Computed from the eigendecomposition S = V diag(w) V^dagger, so the result
    is unitary to machine precision.
    """
    s = np.asarray(s, dtype=complex)
    if not is_hermitian(s):
        raise ValidationError("generator is not Hermitian within 1e-12")
    w, v = np.linalg.eigh(s)
    return (v * np.exp(1j * w)) @ v.conj().T


def _check_single(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape != (DIM, DIM):
        raise ValidationError(f"single-qutrit gate must be 3x3, got {g.shape}")
    return g


def embed_ancilla_gate(g: np.ndarray) -> np.ndarray:
    """g (x) I_3: act with g on the ancilla slot."""
    return np.kron(_check_single(g), np.eye(DIM))


def embed_data_gate(g: np.ndarray) -> np.ndarray:
    """I_3 (x) g: act with g on the data slot."""
    return np.kron(np.eye(DIM), _check_single(g))


def product_state(ancilla, data) -> np.ndarray:
    """Normalized |ancilla> (x) |data> from two 3-vectors of amplitudes."""
    a = np.asarray(ancilla, dtype=complex)
    d = np.asarray(data, dtype=complex)
    if a.shape != (DIM,) or d.shape != (DIM,):
        raise ValidationError("single-qutrit states need 3 amplitudes")
    psi = np.kron(a, d)
    return normalize(psi)


def basis_state(ancilla: int, data: int) -> np.ndarray:
    psi = np.zeros(DIM * DIM, dtype=complex)
    psi[basis_index(ancilla, data)] = 1.0
    return psi


def normalize(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n = np.linalg.norm(psi)
    if n == 0.0:
        raise ValidationError("cannot normalize the zero vector")
    return psi / n


def check_state(psi: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (DIM * DIM,):
        raise ValidationError(f"two-qutrit state needs 9 amplitudes, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValidationError("state is not normalized")
    return psi


def apply_unitary(u: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return u @ psi
