"""Analytic readout models and statistics of simulated ancilla traces."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .gates import GateSet
from .linalg import DIM, ValidationError, embed_ancilla_gate

GROUND_TRUTH_THRESHOLD = 0.9
DETECTOR_WINDOW = 200
DETECTOR_RATE_FACTOR = 5.0
DETECTOR_MIN_LENGTH = 100
DETECTOR_MIN_SWITCHES = 10


class ImpossibleBranchError(ValueError):
    """The requested readout branch has zero probability."""


def _data_state(psi) -> np.ndarray:
    d = np.asarray(psi, dtype=complex)
    if d.shape != (DIM,):
        raise ValidationError("data qutrit state needs 3 amplitudes (a, b, c)")
    if abs(np.vdot(d, d).real - 1.0) > 1e-12:
        raise ValidationError("data qutrit state is not normalized")
    return d


# ------------------------------------------------------------ conditional maps

def t0_map(psi, chi1: float, chi2: float) -> np.ndarray:
    """Data-qutrit update after an ancilla readout of 0, simplified gate.

    Closed form valid for xi_1 = pi, xi_2 = 0 (mod 2 pi), phi = zeta = 0 and
    chi_3 = chi_4 = 0; returns the normalized (a', b', c').
    """
    a, b, c = _data_state(psi)
    s1, c1 = math.sin(chi1), math.cos(chi1)
    s2, c2 = math.sin(chi2), math.cos(chi2)
    out = np.array([
        a + a * c1 + b * s1,
        b * c1 - a * s1 - b * c2 - c * s2,
        c + b * s2 - c * c2,
    ])
    norm = float(np.sum(np.abs(out) ** 2))
    if norm == 0.0:
        raise ImpossibleBranchError("readout 0 has zero probability for this state")
    return out / math.sqrt(norm)


def cycle_unitary(gates: GateSet) -> np.ndarray:
    """(H x I) U_CZ (H x I): one noiseless cycle between reset and readout."""
    h = embed_ancilla_gate(gates.h)
    return h @ gates.cz @ h


def conditional_maps(psi, gates: GateSet):
    """Noiseless readout branches of one cycle started from |0> (x) psi.

    Returns a list indexed by ancilla outcome of (probability, data state);
    the state is None for a zero-probability branch.
    """
    d = _data_state(psi)
    full = cycle_unitary(gates) @ np.kron([1.0, 0.0, 0.0], d)
    m = full.reshape(DIM, DIM)
    out = []
    for k in range(DIM):
        p = float(np.sum(np.abs(m[k]) ** 2))
        out.append((p, m[k] / math.sqrt(p) if p > 0.0 else None))
    return out


# ------------------------------------------------------- leaked-subspace model

@dataclass(frozen=True)
class LeakPrediction:
    p1: float
    W_theory: float  # math.inf when the ancilla never reads 1
    W_star: float
    theta_star: float

    @property
    def paralyzed(self) -> bool:
        return math.isinf(self.W_theory)


def background_W(T1_us: float, t_cycle_ns: float) -> float:
    """Decoherence background spacing 2 T1 / t_cycle."""
    if T1_us <= 0 or t_cycle_ns <= 0:
        raise ValidationError("T1 and t_cycle must be positive")
    return 2.0 * T1_us * 1000.0 / t_cycle_ns


def W_theory(theta: float) -> float:
    s2 = math.sin(theta / 2.0) ** 2
    return math.inf if s2 < 1e-24 else 1.0 / s2


def critical_theta(W_star: float) -> float:
    """Angle at which csc^2(theta/2) equals the background W_star."""
    return 2.0 * math.asin(1.0 / math.sqrt(W_star))


def leaked_ancilla_prediction(theta: float, T1_us: float, t_cycle_ns: float) -> LeakPrediction:
    ws = background_W(T1_us, t_cycle_ns)
    return LeakPrediction(
        p1=math.sin(theta / 2.0) ** 2,
        W_theory=W_theory(theta),
        W_star=ws,
        theta_star=critical_theta(ws),
    )


def masked_by_background(theta: float, theta_star: float) -> bool:
    """True when theta mod pi falls below the critical angle."""
    return theta % math.pi < theta_star


# ------------------------------------------------------------- trace metrics

def _window_slice(n: int, window) -> slice:
    if window is None:
        if n == 0:
            raise ValidationError("empty trace")
        return slice(0, n)
    start, end = window
    if not (0 <= start <= end < n):
        raise ValidationError(f"window {window} outside trace of length {n}")
    return slice(start, end + 1)


def compute_W(outcomes, window=None) -> float | None:
    """Mean number of cycles between consecutive readouts of 1.

    ``window`` is an inclusive (start, end) cycle range. Returns None when
    fewer than two 1s fall inside it.
    """
    o = np.asarray(outcomes)
    ones = np.flatnonzero(o[_window_slice(len(o), window)] == 1)
    if len(ones) < 2:
        return None
    return float(ones[-1] - ones[0]) / (len(ones) - 1)


def one_frequency(outcomes, window=None) -> float:
    o = np.asarray(outcomes)[_window_slice(len(outcomes), window)]
    return float(np.mean(o == 1))


def single_step(outcomes) -> int:
    """First cycle of the final 0-plateau under a single 1 -> 0 step model.

    Minimizes (#0 before the step) + (#1 from the step on); returns len(outcomes)
    if no step fits better than none.
    """
    o = np.asarray(outcomes)
    zeros_before = np.concatenate([[0], np.cumsum(o == 0)])
    ones_after = np.sum(o == 1) - np.concatenate([[0], np.cumsum(o == 1)])
    return int(np.argmin(zeros_before + ones_after))


def plateau_gaps(outcomes, start: int) -> np.ndarray:
    """Gaps between consecutive 1s from ``start`` to the end of the trace."""
    ones = np.flatnonzero(np.asarray(outcomes)[start:] == 1)
    return np.diff(ones)


# ----------------------------------------------------------- leakage windows

@dataclass(frozen=True)
class LeakageWindow:
    start: int
    end: int  # inclusive
    source: str  # "ground_truth" | "detected"
    frequency: float  # fraction of 1 readouts inside

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class DetectorSettings:
    window: int = DETECTOR_WINDOW
    rate_factor: float = DETECTOR_RATE_FACTOR
    min_length: int = DETECTOR_MIN_LENGTH
    min_switches: int = DETECTOR_MIN_SWITCHES
    W_star: float = background_W(40.0, 45.0)
    threshold: float = GROUND_TRUTH_THRESHOLD


def _runs(mask: np.ndarray):
    """Inclusive (start, end) of each run of True."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    edges = np.flatnonzero(np.diff(m.astype(np.int8)))
    return list(zip(edges[0::2], edges[1::2] - 1))


def ground_truth_windows(p_data_2, outcomes, threshold: float = GROUND_TRUTH_THRESHOLD):
    o = np.asarray(outcomes)
    return [
        LeakageWindow(int(s), int(e), "ground_truth", one_frequency(o, (s, e)))
        for s, e in _runs(np.asarray(p_data_2) > threshold)
    ]


def detect_from_trace(outcomes, settings: DetectorSettings = DetectorSettings()):
    """Leakage windows from readouts alone.

    A sliding window is flagged when both its 1-rate and its 0-rate exceed
    ``rate_factor / W_star``, i.e. the readouts are mixed beyond what
    decoherence produces on either plateau. Overlapping flagged windows are
    merged, trimmed to the stretch where both outcomes occur, and kept if at
    least ``min_length`` long with ``min_switches`` 0/1 alternations, which
    separates random readouts from a few plateau steps.

    A paralyzed ancilla (constant readout) yields nothing here by design.
    """
    o = np.asarray(outcomes)
    n = len(o)
    if n == 0:
        return []
    w = min(settings.window, n)
    x1 = (o == 1).astype(np.int64)
    x0 = (o == 0).astype(np.int64)
    c1 = np.convolve(x1, np.ones(w, dtype=np.int64), "valid")
    c0 = np.convolve(x0, np.ones(w, dtype=np.int64), "valid")
    rate = settings.rate_factor / settings.W_star
    flagged = np.minimum(c0, c1) / w > rate

    found = []
    for s, e in _runs(flagged):
        lo, hi = int(s), int(e) + w - 1
        seg1 = np.flatnonzero(x1[lo:hi + 1]) + lo
        seg0 = np.flatnonzero(x0[lo:hi + 1]) + lo
        if len(seg1) == 0 or len(seg0) == 0:
            continue
        start, end = max(seg0[0], seg1[0]), min(seg0[-1], seg1[-1])
        if end < start:
            continue
        seg = o[start:end + 1]
        binary = seg[seg != 2]
        switches = int(np.count_nonzero(binary[1:] != binary[:-1]))
        if end - start + 1 >= settings.min_length and switches >= settings.min_switches:
            n1 = int(x1[start:end + 1].sum())
            found.append(LeakageWindow(int(start), int(end), "detected",
                                       n1 / (end - start + 1)))
    return found


def detect_leakage_windows(trace, settings: DetectorSettings = DetectorSettings(),
                           mode: str = "auto"):
    """Ground-truth windows if populations were logged (or mode="ground_truth"), else detected."""
    if mode not in ("auto", "ground_truth", "trace"):
        raise ValidationError(f"unknown detection mode {mode!r}")
    has_truth = getattr(trace, "populations", None) is not None
    if mode == "ground_truth" or (mode == "auto" and has_truth):
        if not has_truth:
            raise ValidationError("trace has no ground-truth populations")
        return ground_truth_windows(trace.p_data_2, trace.outcomes, settings.threshold)
    return detect_from_trace(trace.outcomes, settings)


def window_matches(truth: LeakageWindow, found, tolerance: int) -> bool:
    """True if some detected window has both boundaries within ``tolerance`` cycles."""
    return any(abs(f.start - truth.start) <= tolerance and abs(f.end - truth.end) <= tolerance
               for f in found)


# ------------------------------------------------------------------ report

def analyze_trace(trace, theta: float, T1_us: float, t_cycle_ns: float,
                  settings: DetectorSettings | None = None) -> dict:
    """Report dict: predictions, per-window W, and both window lists where available."""
    pred = leaked_ancilla_prediction(theta, T1_us, t_cycle_ns)
    settings = settings or DetectorSettings(W_star=pred.W_star)
    outcomes = trace.outcomes
    detected = detect_from_trace(outcomes, settings)
    truth = (ground_truth_windows(trace.p_data_2, outcomes, settings.threshold)
             if trace.populations is not None else [])

    def row(w: LeakageWindow):
        return {**asdict(w), "length": w.length, "W_measured": compute_W(outcomes, (w.start, w.end))}

    step = single_step(outcomes)
    return {
        "n_cycles": int(len(outcomes)),
        "counts": {str(k): int(np.sum(outcomes == k)) for k in range(DIM)},
        "theta": theta,
        "p1": pred.p1,
        "W_theory": None if math.isinf(pred.W_theory) else pred.W_theory,
        "paralyzed": pred.paralyzed,
        "W_star": pred.W_star,
        "theta_star": pred.theta_star,
        "masked_by_background": masked_by_background(theta, pred.theta_star),
        "W_trace": compute_W(outcomes),
        "final_step": step if step < len(outcomes) else None,
        "windows": [row(w) for w in truth] + [row(w) for w in detected],
        "detector": asdict(settings),
    }
