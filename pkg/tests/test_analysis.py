import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qutrit_leakage.analysis import (
    DetectorSettings,
    ImpossibleBranchError,
    LeakageWindow,
    W_theory,
    analyze_trace,
    background_W,
    compute_W,
    conditional_maps,
    critical_theta,
    detect_from_trace,
    detect_leakage_windows,
    ground_truth_windows,
    leaked_ancilla_prediction,
    masked_by_background,
    single_step,
    t0_map,
    window_matches,
)
from qutrit_leakage.gates import CzParams, GateSet
from qutrit_leakage.linalg import ValidationError
from qutrit_leakage.noise import NoiseModel
from qutrit_leakage.protocol import ExperimentConfig, ReadoutTrace, run_experiment

THETA_GRID = [np.pi / 8, np.pi / 4, np.pi / 2, np.pi, 2.0, 5.5]


def simplified(chi1, chi2):
    return CzParams(xi=(np.pi, 0.0, 0.4, -1.1), chi=(chi1, chi2, 0.0, 0.0))


def random_state(rng):
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    return v / np.linalg.norm(v)


class TestT0Map:
    def test_zero_state_closed_form(self):
        chi1 = 0.03
        out = t0_map([1, 0, 0], chi1, 0.02)
        n = math.sqrt((1 + math.cos(chi1)) ** 2 + math.sin(chi1) ** 2)
        assert np.allclose(out, [(1 + math.cos(chi1)) / n, -math.sin(chi1) / n, 0], atol=1e-15)

    def test_one_goes_to_two(self):
        out = t0_map([0, 1, 0], 0.0, 1e-4)
        assert abs(out[2]) ** 2 > 1 - 1e-6

    def test_impossible_branch(self):
        with pytest.raises(ImpossibleBranchError):
            t0_map([0, 1, 0], 0.0, 0.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_full_circuit(self, seed):
        rng = np.random.default_rng(seed)
        chi1, chi2 = rng.uniform(-0.05, 0.05, 2)
        psi = random_state(rng)
        _, branch = conditional_maps(psi, GateSet(simplified(chi1, chi2)))[0]
        want = t0_map(psi, chi1, chi2)
        # global phase of the branch is fixed by the closed form; compare directly
        assert np.max(np.abs(branch - want)) < 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-1, 1), st.floats(-1, 1))
    def test_normalized(self, seed, chi1, chi2):
        psi = random_state(np.random.default_rng(seed))
        try:
            out = t0_map(psi, chi1, chi2)
        except ImpossibleBranchError:
            return
        assert abs(np.vdot(out, out).real - 1) < 1e-12

    def test_rejects_bad_state(self):
        with pytest.raises(ValidationError):
            t0_map([1, 1, 0], 0.1, 0.1)


class TestConditionalMaps:
    def test_ideal_projection(self):
        a, b = 0.6, 0.8j
        maps = conditional_maps([a, b, 0], GateSet(CzParams()))
        assert maps[0][0] == pytest.approx(abs(a) ** 2)
        assert maps[1][0] == pytest.approx(abs(b) ** 2)
        assert maps[2] == (0.0, None)
        assert np.allclose(np.abs(maps[0][1]), [1, 0, 0])
        assert np.allclose(np.abs(maps[1][1]), [0, 1, 0])

    @pytest.mark.parametrize("theta", THETA_GRID + [0.0])
    def test_leaked_data(self, theta):
        maps = conditional_maps([0, 0, 1], GateSet(CzParams(xi=(0.3, 0.3 + theta, 1.0, 2.0))))
        assert maps[0][0] == pytest.approx(math.cos(theta / 2) ** 2, abs=1e-12)
        assert maps[1][0] == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-12)
        for p, state in maps[:2]:
            if p > 1e-20:
                assert np.allclose(np.abs(state), [0, 0, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_probabilities_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        cz = CzParams(xi=rng.uniform(-7, 7, 4), chi=rng.uniform(0, 0.3, 4),
                      zeta=rng.uniform(0, 0.3, 4), phi=rng.uniform(0, 7, 4))
        maps = conditional_maps(random_state(rng), GateSet(cz))
        assert abs(sum(p for p, _ in maps) - 1) < 1e-12


class TestPrediction:
    def test_values(self):
        pred = leaked_ancilla_prediction(np.pi, 40.0, 45.0)
        assert pred.W_theory == pytest.approx(1.0)
        assert round(pred.W_star) == 1778
        assert pred.theta_star == pytest.approx(2 * math.asin(1 / math.sqrt(40_000 / 22.5)))

    @pytest.mark.parametrize("theta,want", [(np.pi / 8, 26.27), (np.pi / 4, 6.83), (np.pi / 2, 2.0)])
    def test_csc_squared(self, theta, want):
        assert W_theory(theta) == pytest.approx(want, abs=0.005)

    def test_paralysis(self):
        assert leaked_ancilla_prediction(0.0, 40.0, 45.0).paralyzed
        assert math.isinf(W_theory(2 * np.pi))

    def test_monotone(self):
        th = np.linspace(1e-3, np.pi, 500)
        w = [W_theory(x) for x in th]
        assert all(a > b for a, b in zip(w, w[1:]))

    @pytest.mark.parametrize("ws", [10.0, 1778.0, 1e6])
    def test_theta_star_identity(self, ws):
        assert W_theory(critical_theta(ws)) == pytest.approx(ws, rel=1e-12)

    def test_masking(self):
        ts = critical_theta(background_W(40, 45))
        assert masked_by_background(0.01, ts)
        assert masked_by_background(np.pi + 0.01, ts)
        assert not masked_by_background(np.pi / 2, ts)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            background_W(0.0, 45.0)


class TestComputeW:
    @pytest.mark.parametrize("trace,want", [([1, 1, 1, 1], 1.0), ([1, 0, 1, 0, 1], 2.0),
                                            ([0, 1, 2, 2, 1], 3.0)])
    def test_small(self, trace, want):
        assert compute_W(trace) == want

    def test_too_few(self):
        assert compute_W([0, 0, 1, 0]) is None

    def test_window(self):
        o = [1, 0, 0, 1, 0, 1, 1]
        assert compute_W(o, (3, 6)) == 1.5
        with pytest.raises(ValidationError):
            compute_W(o, (3, 7))

    # relative standard error of the mean gap is sqrt((1 - p) / (n p)); these keep 5% beyond 3 sigma
    @pytest.mark.parametrize("p", [0.9, 0.5, 0.3])
    def test_geometric_limit(self, p):
        o = (np.random.default_rng(0).random(10_000) < p).astype(int)
        assert compute_W(o) == pytest.approx(1 / p, rel=0.05)

    def test_simulated_leak(self):
        cfg = ExperimentConfig(cz=CzParams().with_theta(np.pi / 2), noise=NoiseModel(enabled=False),
                               initial_data_state=(0, 0, 1), n_cycles=10_000, seed=0)
        assert compute_W(run_experiment(cfg).outcomes) == pytest.approx(2.0, rel=0.05)


class TestSingleStep:
    def test_clean_step(self):
        o = np.array([1] * 50 + [0] * 100)
        assert single_step(o) == 50

    def test_with_peaks(self):
        o = np.array([1] * 50 + [0] * 100)
        o[[10, 120]] = [0, 1]
        assert single_step(o) == 50

    def test_no_step(self):
        assert single_step(np.ones(20, dtype=int)) == 20


def bernoulli_trace(rng, n, segments, background=1 / 2381):
    o = (rng.random(n) < background).astype(np.int8)
    for s, e, p in segments:
        o[s:e + 1] = rng.random(e - s + 1) < p
    return o


class TestWindows:
    def test_ground_truth_run(self):
        p2 = np.zeros(400)
        p2[100:201] = 1.0
        o = np.zeros(400, dtype=int)
        (w,) = ground_truth_windows(p2, o)
        assert (w.start, w.end, w.length) == (100, 200, 101)

    @pytest.mark.parametrize("seed", range(10))
    def test_detects_synthetic_segment(self, seed):
        rng = np.random.default_rng(seed)
        start = int(rng.integers(1000, 8000))
        o = bernoulli_trace(rng, 10_000, [(start, start + 499, 0.5)])
        found = detect_from_trace(o, DetectorSettings(W_star=2381))
        truth = LeakageWindow(start, start + 499, "ground_truth", 0.5)
        assert window_matches(truth, found, tolerance=200)
        assert len(found) == 1

    @pytest.mark.parametrize("seed", range(10))
    def test_quiet_background(self, seed):
        o = bernoulli_trace(np.random.default_rng(100 + seed), 40_000, [])
        assert detect_from_trace(o, DetectorSettings(W_star=1778)) == []

    def test_single_step_not_detected(self):
        o = np.array([1] * 2000 + [0] * 3000, dtype=np.int8)
        assert detect_from_trace(o) == []

    def test_paralyzed_segment_invisible(self):
        cfg = ExperimentConfig(cz=CzParams().with_theta(0.0), noise=NoiseModel(enabled=False),
                               initial_data_state=(0, 0, 1), n_cycles=5000, seed=0)
        tr = run_experiment(cfg)
        assert np.all(tr.outcomes == 0)
        assert detect_from_trace(tr.outcomes) == []

    def test_mode_selection(self):
        o = np.zeros(300, dtype=np.int8)
        pops = np.zeros((300, 4))
        pops[:, 0] = 1.0
        pops[50:150] = [0, 0, 1, 0]
        with_truth = ReadoutTrace(o, pops)
        assert detect_leakage_windows(with_truth)[0].source == "ground_truth"
        assert detect_leakage_windows(with_truth, mode="trace") == []
        with pytest.raises(ValidationError):
            detect_leakage_windows(ReadoutTrace(o), mode="ground_truth")
        with pytest.raises(ValidationError):
            detect_leakage_windows(with_truth, mode="psychic")


def test_analyze_report():
    rng = np.random.default_rng(4)
    o = bernoulli_trace(rng, 20_000, [(5000, 6999, 0.5)])
    rep = analyze_trace(ReadoutTrace(o), np.pi / 2, 40.0, 45.0)
    assert rep["W_theory"] == pytest.approx(2.0)
    assert rep["paralyzed"] is False
    (w,) = rep["windows"]
    assert w["source"] == "detected"
    assert w["W_measured"] == pytest.approx(2.0, rel=0.1)
    assert rep["detector"]["window"] == 200
    assert analyze_trace(ReadoutTrace(o), 0.0, 40.0, 45.0)["W_theory"] is None


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, np.pi - 0.05))
def test_leaked_distribution_independent_of_cycle(theta):
    """In the leaked subspace with ideal phases each cycle's outcome law is fixed."""
    gates = GateSet(CzParams(xi=(0.0, theta, 0.0, 0.0)))
    psi = np.array([0, 0, 1], dtype=complex)
    for _ in range(5):
        maps = conditional_maps(psi, gates)
        assert maps[1][0] == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-12)
        k = 0 if maps[0][0] > 0 else 1
        assume(maps[k][1] is not None)
        psi = maps[k][1]
