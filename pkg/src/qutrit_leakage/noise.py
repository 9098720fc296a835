"""Qutrit amplitude damping: Kraus sets, trajectory sampling and an exact density-matrix path.

The trajectory path is what the cycle engine uses. The density-matrix path
exists to validate trajectory ensemble averages.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import DIM, ValidationError, embed_ancilla_gate, embed_data_gate

PROB_TOL = 1e-9
SLOTS = ("ancilla", "data")


class ConsistencyError(RuntimeError):
    """Branch probabilities of a channel do not add up to one."""


@dataclass(frozen=True)
class NoiseModel:
    """Amplitude damping with lifetime ``T1`` in microseconds.

    There is no separate dephasing channel; amplitude damping alone gives
    T2 = 2 T1. ``dephasing`` is reserved and rejected if set.
    """

    T1: float = 40.0
    enabled: bool = True
    dephasing: bool = False

    def __post_init__(self):
        if self.enabled and not (np.isfinite(self.T1) and self.T1 > 0):
            raise ValidationError(f"T1 must be positive, got {self.T1}")
        if self.dephasing:
            raise ValidationError("pure dephasing is not supported; use T2 = 2 T1 from damping alone")

    def kraus(self, dt: float) -> "KrausSet | None":
        if not self.enabled:
            return None
        return amplitude_damping_kraus(self.T1, dt)


@dataclass(frozen=True, eq=False)
class KrausSet:
    ops: tuple  # of 3x3 arrays
    lam1: float = 0.0
    lam2: float = 0.0

    def completeness_error(self) -> float:
        acc = sum(k.conj().T @ k for k in self.ops)
        return float(np.max(np.abs(acc - np.eye(DIM))))


def damping_probabilities(T1: float, dt: float) -> tuple[float, float]:
    """(lambda_1, lambda_2) with lambda_m = 1 - exp(-m dt / T1); T1 in us, dt in ns."""
    if not T1 > 0:
        raise ValidationError(f"T1 must be positive, got {T1}")
    if dt < 0:
        raise ValidationError(f"dt must be non-negative, got {dt}")
    x = dt / (1000.0 * T1)
    return float(-np.expm1(-x)), float(-np.expm1(-2.0 * x))


@lru_cache(maxsize=64)
def amplitude_damping_kraus(T1: float, dt: float) -> KrausSet:
    lam1, lam2 = damping_probabilities(T1, dt)
    e1 = np.diag([1.0, np.sqrt(1.0 - lam1), np.sqrt(1.0 - lam2)]).astype(complex)
    e2 = np.zeros((DIM, DIM), dtype=complex)
    e2[0, 1] = np.sqrt(lam1)
    e3 = np.zeros((DIM, DIM), dtype=complex)
    e3[0, 2] = np.sqrt(lam2)
    for m in (e1, e2, e3):
        m.setflags(write=False)
    return KrausSet((e1, e2, e3), lam1, lam2)


def _check_slot(slot: str) -> str:
    if slot not in SLOTS:
        raise ValidationError(f"slot must be one of {SLOTS}, got {slot!r}")
    return slot


def embed(op: np.ndarray, slot: str) -> np.ndarray:
    return embed_ancilla_gate(op) if _check_slot(slot) == "ancilla" else embed_data_gate(op)


def _branches(psi: np.ndarray, kraus: KrausSet, slot: str) -> list[np.ndarray]:
    m = psi.reshape(DIM, DIM)  # [ancilla, data]
    if slot == "ancilla":
        return [(k @ m).ravel() for k in kraus.ops]
    return [(m @ k.T).ravel() for k in kraus.ops]


def apply_channel_trajectory(psi: np.ndarray, kraus: KrausSet, slot: str,
                             rng: np.random.Generator) -> np.ndarray:
    """Sample one Kraus branch on ``slot`` and return the renormalized state.

    Branch k is chosen with probability ||E_k psi||^2 using exactly one
    uniform draw from ``rng``.
    """
    _check_slot(slot)
    branches = _branches(psi, kraus, slot)
    probs = np.array([np.vdot(b, b).real for b in branches])
    total = probs.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise ConsistencyError(f"Kraus branch probabilities sum to {total!r}")
    u = rng.random() * total
    k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    k = min(k, len(probs) - 1)
    while probs[k] == 0.0:  # only reachable through round-off at the upper edge
        k -= 1
    return branches[k] / np.sqrt(probs[k])


def damp_both(psi: np.ndarray, kraus: KrausSet | None, rng: np.random.Generator) -> np.ndarray:
    """Damp ancilla then data; two draws."""
    if kraus is None:
        return psi
    psi = apply_channel_trajectory(psi, kraus, "ancilla", rng)
    return apply_channel_trajectory(psi, kraus, "data", rng)


def check_density(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (DIM * DIM, DIM * DIM):
        raise ValidationError(f"density matrix must be 9x9, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValidationError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValidationError("density matrix is not positive semidefinite")
    return rho


def apply_channel_density(rho: np.ndarray, kraus: KrausSet, slot: str) -> np.ndarray:
    """rho -> sum_k E_k rho E_k^dagger with each E_k on ``slot``."""
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for k in kraus.ops:
        big = embed(k, slot)
        out += big @ rho @ big.conj().T
    return out


def pure_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())
