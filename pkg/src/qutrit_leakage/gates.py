"""Ideal Hadamard and the (non-)ideal CZ gate built from its generators."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import ValidationError, basis_index, hermitian_exp

DEFAULT_ERROR = 1e-2

_S2 = 1.0 / np.sqrt(2.0)

# Qubit Hadamard acting as the identity on |2>.
HADAMARD = np.array(
    [
        [_S2, _S2, 0],
        [_S2, -_S2, 0],
        [0, 0, 1],
    ],
    dtype=complex,
)

# (row, col) basis pairs coupled by chi_1..chi_4.
CHI_COUPLINGS = (
    ((0, 1), (1, 0)),
    ((0, 2), (1, 1)),
    ((1, 1), (2, 0)),
    ((1, 2), (2, 1)),
)
ZETA_STATES = ((0, 1), (1, 0), (1, 1), (2, 0))


def _four(name, values) -> tuple[float, float, float, float]:
    v = tuple(float(x) for x in values)
    if len(v) != 4 or not all(np.isfinite(v)):
        raise ValidationError(f"{name} needs four finite values, got {values!r}")
    return v


@dataclass(frozen=True)
class CzParams:
    """Parameters of the CZ generator S and error generator S'.

    ``theta`` is derived from ``xi`` and never stored separately. The default
    instance is the ideal gate with all dynamical phases zero.
    """

    xi: tuple = (0.0, 0.0, 0.0, 0.0)
    chi: tuple = (0.0, 0.0, 0.0, 0.0)
    zeta: tuple = (0.0, 0.0, 0.0, 0.0)
    phi: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("xi", "chi", "zeta", "phi"):
            object.__setattr__(self, name, _four(name, getattr(self, name)))

    @property
    def theta(self) -> float:
        return self.xi[1] - self.xi[0]

    @property
    def is_ideal(self) -> bool:
        return not any(self.chi) and not any(self.zeta)

    @classmethod
    def nonideal(cls, xi=(0.0, 0.0, 0.0, 0.0), chi=DEFAULT_ERROR, zeta=DEFAULT_ERROR,
                 phi=(0.0, 0.0, 0.0, 0.0)) -> "CzParams":
        chi = (chi,) * 4 if np.isscalar(chi) else chi
        zeta = (zeta,) * 4 if np.isscalar(zeta) else zeta
        return cls(xi=xi, chi=chi, zeta=zeta, phi=phi)

    def with_theta(self, theta: float) -> "CzParams":
        """Set xi_2 = xi_1 + theta, keeping everything else."""
        xi = list(self.xi)
        xi[1] = xi[0] + theta
        return replace(self, xi=tuple(xi))

    def ideal(self) -> "CzParams":
        return replace(self, chi=(0.0,) * 4, zeta=(0.0,) * 4)


def sample_phases(rng: np.random.Generator) -> tuple[float, float, float, float]:
    """phi_1..phi_4 uniform on [0, 2pi)."""
    return tuple(float(x) for x in rng.uniform(0.0, 2.0 * np.pi, size=4))


def hadamard() -> np.ndarray:
    return HADAMARD.copy()


def ideal_cz_generator(params: CzParams) -> np.ndarray:
    x1, x2, x3, x4 = params.xi
    return np.diag([0, 0, x1, 0, np.pi, x2, np.pi, x3, x4]).astype(complex)


def nonideal_generator(params: CzParams) -> np.ndarray:
    """Error generator S' from nonadiabatic couplings chi and phase errors zeta."""
    s = np.zeros((9, 9), dtype=complex)
    for (a, d), z in zip(ZETA_STATES, params.zeta):
        i = basis_index(a, d)
        s[i, i] = z
    for ((ra, rd), (ca, cd)), chi, phi in zip(CHI_COUPLINGS, params.chi, params.phi):
        i, j = basis_index(ra, rd), basis_index(ca, cd)
        s[i, j] = 1j * chi * np.exp(1j * phi)
        s[j, i] = np.conj(s[i, j])
    return s


def cz_unitary(params: CzParams) -> np.ndarray:
    """U_CZ = exp(iS') exp(iS), evaluated as the exact product."""
    u = hermitian_exp(ideal_cz_generator(params))
    if params.is_ideal:
        return u
    return hermitian_exp(nonideal_generator(params)) @ u


def cz_unitary_sum_form(params: CzParams) -> np.ndarray:
    """exp(i(S + S')), the single-exponential approximation; for comparison only."""
    return hermitian_exp(ideal_cz_generator(params) + nonideal_generator(params))


@dataclass(frozen=True)
class GateSet:
    """Matrices shared read-only by every cycle of an experiment."""

    params: CzParams
    h: np.ndarray = field(init=False, repr=False)
    cz: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "h", hadamard())
        object.__setattr__(self, "cz", cz_unitary(self.params))
