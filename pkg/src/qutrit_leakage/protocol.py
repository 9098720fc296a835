"""Repeated ancilla-assisted sigma^z measurement: reset, H, CZ, H, readout.

Each gate is applied as a unitary followed by amplitude damping on both
qutrits for the gate's duration. Reset and readout are instantaneous.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel
from .gates import CzParams, GateSet, sample_phases
from .linalg import DIM, ValidationError, embed_ancilla_gate
from .model import DeviceParams, PulseProfile, dynamical_phases
from .noise import NoiseModel, damp_both

READOUT_MODES = ("ternary", "binary")
BASIS_TOL = 1e-9
POPULATION_COLUMNS = ("p_data_0", "p_data_1", "p_data_2", "p_anc_2")


class ProtocolError(RuntimeError):
    """An operation was applied out of order (e.g. reset of an unmeasured ancilla)."""


@dataclass(frozen=True)
class Schedule:
    """Gate durations in ns."""

    t_H: float = 10.0
    t_CZ: float = 25.0

    def __post_init__(self):
        if self.t_H < 0 or self.t_CZ < 0:
            raise ValidationError("gate durations must be non-negative")

    @property
    def t_cycle(self) -> float:
        return 2.0 * self.t_H + self.t_CZ


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    cz: CzParams = field(default_factory=CzParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    schedule: Schedule = field(default_factory=Schedule)
    n_cycles: int = 40_000
    seed: int = 0
    readout_mode: str = "ternary"
    initial_data_state: tuple = (0.0, 1.0, 0.0)
    log_populations: bool = False
    # draw phi_1..phi_4 from the seed instead of using cz.phi
    random_phases: bool = False
    # if set, xi_1..xi_4 come from integrating this pulse instead of cz.xi
    profile: PulseProfile | None = None

    def __post_init__(self):
        if int(self.n_cycles) != self.n_cycles or self.n_cycles < 1:
            raise ValidationError(f"n_cycles must be an integer >= 1, got {self.n_cycles}")
        if self.readout_mode not in READOUT_MODES:
            raise ValidationError(f"readout_mode must be one of {READOUT_MODES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")
        d = np.asarray(self.initial_data_state, dtype=complex)
        if d.shape != (DIM,) or abs(np.vdot(d, d).real - 1.0) > 1e-12:
            raise ValidationError("initial_data_state must be 3 normalized amplitudes")
        object.__setattr__(self, "initial_data_state", tuple(complex(x) for x in d))


@dataclass
class ReadoutTrace:
    outcomes: np.ndarray  # int8, one per cycle
    populations: np.ndarray | None = None  # (n, 4) columns POPULATION_COLUMNS
    phi: tuple | None = None

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int8)
        if self.populations is not None:
            self.populations = np.asarray(self.populations, dtype=float)
            if self.populations.shape != (len(self.outcomes), 4):
                raise ValidationError("populations must have one row of 4 values per cycle")

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def p_data_2(self) -> np.ndarray | None:
        return None if self.populations is None else self.populations[:, 2]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["cycle", "outcome"]
            if self.populations is not None:
                header += list(POPULATION_COLUMNS)
            w.writerow(header)
            for i, k in enumerate(self.outcomes):
                row = [str(i), str(int(k))]
                if self.populations is not None:
                    row += [format(x, ".17g") for x in self.populations[i]]
                w.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "ReadoutTrace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][:2] != ["cycle", "outcome"]:
            raise ValidationError(f"{path}: not a trace CSV (expected 'cycle,outcome' header)")
        header, body = rows[0], rows[1:]
        outcomes = np.array([int(r[1]) for r in body], dtype=np.int8)
        pops = None
        if header[2:] == list(POPULATION_COLUMNS):
            pops = np.array([[float(x) for x in r[2:]] for r in body])
        elif len(header) > 2:
            raise ValidationError(f"{path}: unexpected columns {header[2:]}")
        return cls(outcomes, pops)


# ---------------------------------------------------------------- primitives

def measure_ancilla(psi: np.ndarray, mode: str, rng: np.random.Generator):
    """Projective readout of the ancilla; returns (reported outcome, collapsed state).

    Collapse is always onto the true ternary projector. In binary mode an
    outcome of 2 is reported as 1.
    """
    if mode not in READOUT_MODES:
        raise ValidationError(f"readout mode must be one of {READOUT_MODES}")
    m = psi.reshape(DIM, DIM)
    probs = np.sum(np.abs(m) ** 2, axis=1)
    u = rng.random() * probs.sum()
    k = min(int(np.searchsorted(np.cumsum(probs), u, side="right")), DIM - 1)
    while probs[k] == 0.0:
        k -= 1
    if probs[k] <= 0.0:
        raise ProtocolError("sampled a zero-probability readout branch")
    out = np.zeros_like(m)
    out[k] = m[k] / np.sqrt(probs[k])
    reported = 1 if (mode == "binary" and k == 2) else k
    return reported, out.ravel()


def reset_ancilla(psi: np.ndarray) -> np.ndarray:
    """Replace the ancilla factor by |0>; the ancilla must already be in a basis state."""
    m = psi.reshape(DIM, DIM)
    w = np.sum(np.abs(m) ** 2, axis=1)
    k = int(np.argmax(w))
    if w[k] < 1.0 - BASIS_TOL:
        raise ProtocolError(f"ancilla is not in a basis state (weights {w}); measure before reset")
    out = np.zeros_like(m)
    out[0] = m[k] / np.sqrt(w[k])
    return out.ravel()


def populations(psi: np.ndarray) -> np.ndarray:
    """(p_data_0, p_data_1, p_data_2, p_anc_2) of a pure state."""
    p = np.abs(psi.reshape(DIM, DIM)) ** 2
    data = p.sum(axis=0)
    return np.array([data[0], data[1], data[2], p[2].sum()])


class CycleRunner:
    """Precomputed operators for one experiment's cycles."""

    def __init__(self, gates: GateSet, noise: NoiseModel, schedule: Schedule, mode: str = "ternary"):
        if mode not in READOUT_MODES:
            raise ValidationError(f"readout mode must be one of {READOUT_MODES}")
        self.h = embed_ancilla_gate(gates.h)
        self.cz = gates.cz
        self.k_h = noise.kraus(schedule.t_H)
        self.k_cz = noise.kraus(schedule.t_CZ)
        self.mode = mode

    def evolve(self, psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Reset and the three gates, up to but not including readout."""
        psi = reset_ancilla(psi)
        psi = damp_both(self.h @ psi, self.k_h, rng)
        psi = damp_both(self.cz @ psi, self.k_cz, rng)
        return damp_both(self.h @ psi, self.k_h, rng)

    def cycle(self, psi: np.ndarray, rng: np.random.Generator):
        return measure_ancilla(self.evolve(psi, rng), self.mode, rng)


def run_cycle(psi, gates: GateSet, noise: NoiseModel, schedule: Schedule, mode: str,
              rng: np.random.Generator):
    """One full cycle; returns (outcome, post-measurement state)."""
    return CycleRunner(gates, noise, schedule, mode).cycle(psi, rng)


def resolve_cz(config: ExperimentConfig, rng: np.random.Generator) -> CzParams:
    """CZ parameters for a run: phases from the pulse profile and/or the seed."""
    cz = config.cz
    if config.profile is not None:
        cz = CzParams(dynamical_phases(config.profile, config.device).xi, cz.chi, cz.zeta, cz.phi)
    if config.random_phases:
        cz = CzParams(cz.xi, cz.chi, cz.zeta, sample_phases(rng))
    return cz


def run_experiment(config: ExperimentConfig, engine: str = "compiled") -> ReadoutTrace:
    """Run ``n_cycles`` cycles from |0> (x) initial_data_state.

    Fully determined by ``config`` (including its seed). When
    ``log_populations`` is set, exact populations of the pre-readout state
    are recorded per cycle; these are simulator ground truth only.

    ``engine="python"`` runs the reference :class:`CycleRunner` loop, which
    draws the same random numbers in the same order as the compiled kernel.
    """
    rng = np.random.default_rng(config.seed)
    cz = resolve_cz(config, rng)
    runner = CycleRunner(GateSet(cz), config.noise, config.schedule, config.readout_mode)

    psi = np.kron([1.0, 0.0, 0.0], np.asarray(config.initial_data_state)).astype(complex)
    n = config.n_cycles
    outcomes = np.empty(n, dtype=np.int8)
    pops = np.empty((n, 4)) if config.log_populations else None

    if engine == "python":
        for i in range(n):
            psi = runner.evolve(psi, rng)
            if pops is not None:
                pops[i] = populations(psi)
            outcomes[i], psi = measure_ancilla(psi, runner.mode, rng)
    elif engine == "compiled":
        noisy = runner.k_h is not None
        per_cycle = _kernel.DRAWS_NOISY if noisy else _kernel.DRAWS_CLEAN
        u = rng.random(n * per_cycle)
        kh = np.array(runner.k_h.ops) if noisy else np.zeros((3, 3, 3), dtype=complex)
        kcz = np.array(runner.k_cz.ops) if noisy else kh
        try:
            _kernel.run_cycles(
                psi, np.ascontiguousarray(runner.h), np.ascontiguousarray(runner.cz), kh, kcz,
                noisy, runner.mode == "binary", u, outcomes,
                pops if pops is not None else np.empty((0, 4)), pops is not None,
            )
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
    else:
        raise ValidationError(f"unknown engine {engine!r}")
    return ReadoutTrace(outcomes, pops, phi=cz.phi)


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for sub-experiment ``index`` of a seeded batch."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def write_trace(trace: ReadoutTrace, path: Path | str) -> Path:
    path = Path(path)
    trace.write_csv(path)
    return path
