"""Coupled-qutrit device model: Hamiltonian, labeled spectra, dynamical phases.

Frequencies are angular and stored in rad/ns; times are in ns. Use
:func:`ghz` to convert an ordinary frequency in GHz.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment

from .linalg import BASIS_LABELS, DIM, ValidationError, basis_index

TWO_PI = 2.0 * np.pi

# Y matrix for harmonic qutrit eigenfunctions.
Y = np.array(
    [
        [0, -1j, 0],
        [1j, 0, -1j * np.sqrt(2)],
        [0, 1j * np.sqrt(2), 0],
    ],
    dtype=complex,
)

MIN_OVERLAP = 0.5


def ghz(f: float) -> float:
    """GHz (ordinary frequency) -> rad/ns."""
    return TWO_PI * f


class LabelingError(RuntimeError):
    """Adjacent sweep points are too far apart to continue labels adiabatically."""


@dataclass(frozen=True)
class DeviceParams:
    """Transmon/phase qutrit pair. All fields in rad/ns."""

    eps1: float = ghz(5.5)
    eps2: float = ghz(6.0)
    eta1: float = ghz(0.2)
    eta2: float = ghz(0.2)
    g: float = ghz(0.025)

    def __post_init__(self):
        for name in ("eps1", "eps2", "eta1", "eta2", "g"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be positive, got {v}")

    @classmethod
    def from_ghz(cls, **kw) -> "DeviceParams":
        return cls(**{k: ghz(v) for k, v in kw.items()})

    def with_eps1(self, eps1: float) -> "DeviceParams":
        return DeviceParams(eps1, self.eps2, self.eta1, self.eta2, self.g)


def qutrit_levels(eps: float, eta: float) -> np.ndarray:
    return np.array([0.0, eps, 2.0 * eps - eta])


def bare_energies(p: DeviceParams) -> np.ndarray:
    """Uncoupled energies in basis order."""
    return np.add.outer(qutrit_levels(p.eps1, p.eta1), qutrit_levels(p.eps2, p.eta2)).ravel()


def build_hamiltonian(p: DeviceParams) -> np.ndarray:
    h1 = np.diag(qutrit_levels(p.eps1, p.eta1)).astype(complex)
    h2 = np.diag(qutrit_levels(p.eps2, p.eta2)).astype(complex)
    eye = np.eye(DIM)
    return np.kron(h1, eye) + np.kron(eye, h2) + p.g * np.kron(Y, Y)


@dataclass(frozen=True)
class EnergySweepRow:
    eps1: float
    energies: np.ndarray  # rad/ns, indexed like BASIS_LABELS

    def __getitem__(self, label: str) -> float:
        return float(self.energies[BASIS_LABELS.index(label)])


def _assign(prev_vecs: np.ndarray, prev_e: np.ndarray, vecs: np.ndarray, e: np.ndarray):
    """Match new eigenvectors (columns) onto the previous labeled ones.

    Returns perm with perm[label] = column of the new eigenvector.
    """
    overlap = np.abs(prev_vecs.conj().T @ vecs) ** 2
    # Tie-break on eigenvalue proximity; scale keeps it far below any real overlap difference.
    scale = np.max(np.abs(np.subtract.outer(prev_e, e))) or 1.0
    cost = -overlap + 1e-9 * np.abs(np.subtract.outer(prev_e, e)) / scale
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    worst = overlap[rows, cols].min()
    return perm, worst


def _follow(p: DeviceParams, eps1_path: Sequence[float]):
    """Diagonalize along a path of eps1 values and label by adiabatic continuation.

    Yields (eps1, labeled energies, labeled eigenvectors). The first point is
    labeled by maximum overlap with the bare product states.
    """
    prev_vecs = np.eye(DIM * DIM, dtype=complex)
    prev_e = None
    for x in eps1_path:
        q = p.with_eps1(float(x))
        e, v = np.linalg.eigh(build_hamiltonian(q))
        ref_e = bare_energies(q) if prev_e is None else prev_e
        perm, worst = _assign(prev_vecs, ref_e, v, e)
        if prev_e is not None and worst < MIN_OVERLAP:
            raise LabelingError(
                f"eigenvector overlap {worst:.3f} < {MIN_OVERLAP} at eps1/2pi = "
                f"{x / TWO_PI:.6f} GHz; refine the grid"
            )
        prev_e, prev_vecs = e[perm], v[:, perm]
        yield float(x), prev_e, prev_vecs


def eigenenergy_sweep(p: DeviceParams, eps1_grid: Sequence[float]) -> list[EnergySweepRow]:
    """Spectrum of the coupled pair along a sorted grid of ancilla frequencies.

    Channels are labeled by adiabatic continuation: the eigenvector at each
    point inherits the label of the previous-point eigenvector it overlaps
    most (a global assignment, ties broken by eigenvalue proximity). Labels are
    seeded from the bare states at the first grid point. A
    :class:`LabelingError` is raised if some matched overlap falls below 0.5.
    """
    grid = np.asarray(eps1_grid, dtype=float)
    if grid.size == 0:
        raise ValidationError("eps1 grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("eps1 grid must be strictly increasing")
    return [EnergySweepRow(x, e.copy()) for x, e, _ in _follow(p, grid)]


def pair_splitting(p: DeviceParams, pair: tuple[str, str] = ("11", "20")) -> float:
    """Splitting of the two eigenstates carrying the most weight on span(pair).

    Independent of label bookkeeping, so it stays meaningful on grids that also
    cross other anticrossings (e.g. |11>-|02> near eps1 = eps2 - eta2).
    """
    e, v = np.linalg.eigh(build_hamiltonian(p))
    idx = [BASIS_LABELS.index(lbl) for lbl in pair]
    weight = np.sum(np.abs(v[idx, :]) ** 2, axis=0)
    top = np.argsort(weight)[-2:]
    return float(abs(e[top[1]] - e[top[0]]))


def minimum_gap(p: DeviceParams, eps1_grid: Sequence[float], pair=("11", "20")):
    """Grid point and value of the smallest ``pair`` splitting. Returns (eps1, gap, gaps)."""
    grid = np.asarray(eps1_grid, dtype=float)
    gaps = np.array([pair_splitting(p.with_eps1(x), pair) for x in grid])
    k = int(np.argmin(gaps))
    return float(grid[k]), float(gaps[k]), gaps


def two_level_gap(p: DeviceParams, eps1: float) -> float:
    """Splitting from the isolated {|11>, |20>} block, coupling sqrt(2) g."""
    q = p.with_eps1(eps1)
    h = build_hamiltonian(q)
    i, j = basis_index(1, 1), basis_index(2, 0)
    block = h[np.ix_([i, j], [i, j])]
    w = np.linalg.eigvalsh(block)
    return float(w[1] - w[0])


@dataclass(frozen=True)
class PulseProfile:
    """Piecewise-linear ancilla frequency eps1(t); times in ns, values in rad/ns."""

    times: tuple
    eps1: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2 or len(t) != len(self.eps1):
            raise ValidationError("profile needs at least two (time, eps1) samples")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValidationError("profile times must start at 0 and strictly increase")
        object.__setattr__(self, "times", tuple(float(x) for x in t))
        object.__setattr__(self, "eps1", tuple(float(x) for x in self.eps1))

    @property
    def t_gate(self) -> float:
        return self.times[-1]

    @classmethod
    def constant(cls, eps1: float, t_gate: float) -> "PulseProfile":
        return cls((0.0, t_gate), (eps1, eps1))

    def resample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, self.t_gate, n)
        return t, np.interp(t, self.times, self.eps1)


@dataclass(frozen=True)
class DynamicalPhases:
    xi1: float
    xi2: float
    xi3: float
    xi4: float

    @property
    def theta(self) -> float:
        return self.xi2 - self.xi1

    @property
    def xi(self) -> tuple[float, float, float, float]:
        return (self.xi1, self.xi2, self.xi3, self.xi4)


def reduce_angle(x: float) -> float:
    """Map an angle to [0, 2pi)."""
    return float(np.mod(x, TWO_PI))


def dynamical_phases(profile: PulseProfile, p: DeviceParams, mode: str = "bare",
                     samples: int = 4001) -> DynamicalPhases:
    """Phases xi_1..xi_4 accumulated over a CZ pulse (unreduced).

    ``mode="bare"`` integrates the uncoupled level energies with the
    trapezoid rule on the profile's own breakpoints, which is exact for a
    piecewise-linear eps1(t). ``mode="eigen"`` integrates adiabatically
    labeled eigenenergies E_02, E_12, E_21, E_22 along the pulse instead,
    on ``samples`` uniform time points.
    """
    if mode == "bare":
        t = np.asarray(profile.times)
        e1 = np.asarray(profile.eps1)
        tg = profile.t_gate
        int_e1 = trapezoid(e1, t)
        int_2e1 = trapezoid(2.0 * e1 - p.eta1, t)
        int_02 = (2.0 * p.eps2 - p.eta2) * tg
        return DynamicalPhases(
            xi1=-int_02,
            xi2=-int_02 - int_e1,
            xi3=-p.eps2 * tg - int_2e1,
            xi4=-int_02 - int_2e1,
        )
    if mode == "eigen":
        t, e1 = profile.resample(samples)
        labels = ("02", "12", "21", "22")
        cols = [BASIS_LABELS.index(lbl) for lbl in labels]
        energies = np.array([e[cols] for _, e, _ in _follow(p, e1)])
        xi = -trapezoid(energies, t, axis=0)
        return DynamicalPhases(*map(float, xi))
    raise ValidationError(f"unknown phase mode {mode!r}")


def sweep_to_csv_rows(rows: list[EnergySweepRow]):
    """Header + rows in GHz; labels in the header."""
    header = ["eps1_GHz"] + [f"E{lbl}" for lbl in BASIS_LABELS]
    body = [[r.eps1 / TWO_PI, *(r.energies / TWO_PI)] for r in rows]
    return header, body
