"""Moment-closure estimator: stepping, closure identities, ensembles."""

import math

import numpy as np
import pytest

from qct.errors import ConfigError, DivergenceError
from qct.gaussian import (
    GaussianState,
    NoiseParams,
    ensemble_decomposition,
    kick_gaussian,
    run_gaussian,
    step_gaussian,
    unconditioned_reference,
)
from qct.models import duffing, free_particle, harmonic_oscillator, kicked_rotor
from qct.records import MeasurementRecord
from qct.regime import steady_state_covariance
from qct.streams import measurement_stream

import oracles


def stationary_record(x0: float, dt: float, n: int) -> MeasurementRecord:
    return MeasurementRecord(dt=dt, increments=np.full(n, x0 * dt))


class TestStateAndParams:
    def test_covariance_validation(self):
        with pytest.raises(ConfigError, match="positive semidefinite"):
            GaussianState(0.0, 0.0, -1.0, 1.0, 0.0)
        with pytest.raises(ConfigError, match="positive semidefinite"):
            GaussianState(0.0, 0.0, 1.0, 1.0, 1.5)
        # Semidefinite boundary is allowed.
        GaussianState(0.0, 0.0, 1.0, 0.0, 0.0)

    def test_nonfinite_is_divergence(self):
        with pytest.raises(DivergenceError, match="estimator diverged"):
            GaussianState(math.nan, 0.0, 1.0, 1.0, 0.0)

    def test_measurement_rates(self):
        noise = NoiseParams.from_measurement(k=1e5, eta=0.5, hbar=1e-5)
        assert noise.g_m == pytest.approx(4e5)
        assert noise.g_p == pytest.approx(1e-5)
        assert noise.realizable(1e-5)

    def test_realizability_boundary(self):
        # Full efficiency saturates the bound exactly.
        noise = NoiseParams.from_measurement(k=2.0, eta=1.0, hbar=0.3)
        assert noise.realizable(0.3)
        starved = NoiseParams(g_m=noise.g_m, g_p=noise.g_p * 0.99)
        assert not starved.realizable(0.3)


class TestRiccatiDecay:
    def test_closed_form(self):
        g_m, v0, dt, n = 2.0, 1.5, 1e-5, 100_000
        initial = GaussianState(0.7, 0.0, v0, 0.0, 0.0)
        noise = NoiseParams(g_m=g_m, g_p=0.0)
        out = run_gaussian(initial, free_particle(1.0), noise,
                           stationary_record(0.7, dt, n), sample_stride=1000)
        expected = oracles.riccati_free_v_x(v0, g_m, out.times)
        assert np.max(np.abs(out.column("v_x") - expected) / expected) < 1e-4

    def test_zero_innovation_keeps_mean(self):
        initial = GaussianState(0.7, 0.0, 1.0, 0.0, 0.0)
        noise = NoiseParams(g_m=3.0, g_p=0.0)
        out = run_gaussian(initial, free_particle(1.0), noise,
                           stationary_record(0.7, 1e-4, 1000))
        assert np.all(out.column("x") == 0.7)
        assert np.all(out.column("p") == 0.0)


class TestRunSemantics:
    def test_empty_record_returns_initial(self):
        initial = GaussianState(1.0, -2.0, 0.5, 0.5, 0.1)
        out = run_gaussian(initial, free_particle(1.0), NoiseParams(1.0, 1.0),
                           MeasurementRecord(dt=1e-3, increments=np.empty(0)))
        assert len(out) == 1
        assert np.array_equal(out.data[0], initial.as_array())

    def test_bitwise_determinism(self):
        rng = measurement_stream(11)
        rec = MeasurementRecord(dt=1e-3, increments=rng.standard_normal(5000) * 1e-2)
        initial = GaussianState(0.1, 0.0, 0.2, 0.3, 0.0)
        model = harmonic_oscillator(1.0, 2.0)
        noise = NoiseParams(2.0, 0.5)
        a = run_gaussian(initial, model, noise, rec)
        b = run_gaussian(initial, model, noise, rec)
        assert np.array_equal(a.data, b.data)

    def test_quantum_classical_bit_identity(self):
        k, eta, hbar = 1e3, 0.4, 1e-2
        quantum = NoiseParams.from_measurement(k, eta, hbar)
        classical = NoiseParams(g_m=8 * eta * k, g_p=hbar**2 * k)
        rng = measurement_stream(5)
        rec = MeasurementRecord(dt=1e-4, increments=rng.standard_normal(2000) * 1e-3)
        initial = GaussianState(0.05, 0.0, 1e-3, 1e-3, 0.0)
        model = duffing()
        a = run_gaussian(initial, model, quantum, rec)
        b = run_gaussian(initial, model, classical, rec)
        assert np.array_equal(a.data, b.data)

    def test_covariance_flow_ignores_record_for_linear_force(self):
        model = harmonic_oscillator(1.0, 1.3)
        noise = NoiseParams(2.0, 0.7)
        initial = GaussianState(0.0, 0.0, 0.4, 0.9, 0.05)
        rng = measurement_stream(6)
        rec_a = MeasurementRecord(dt=1e-4, increments=rng.standard_normal(3000))
        rec_b = MeasurementRecord(dt=1e-4, increments=np.zeros(3000))
        a = run_gaussian(initial, model, noise, rec_a)
        b = run_gaussian(initial, model, noise, rec_b)
        for col in ("v_x", "v_p", "c_xp"):
            assert np.array_equal(a.column(col), b.column(col)), col
        assert not np.array_equal(a.column("x"), b.column("x"))

    def test_divergence_reports_time(self):
        model = duffing()
        initial = GaussianState(0.0, 0.0, 1e-3, 1e-3, 0.0)
        rec = MeasurementRecord(dt=1e-3, increments=np.full(100, 1e200))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError, match="estimator diverged"):
                run_gaussian(initial, model, NoiseParams(1.0, 0.0), rec)


class TestSteadyStateConsistency:
    def test_step_preserves_steady_covariances(self):
        d_force = -3.0
        mass, k, eta, hbar = 1.0, 10.0, 0.8, 0.1
        v_x, v_p, c = steady_state_covariance(d_force, mass, k, eta, hbar)
        # A linear model with exactly this gradient.
        model = harmonic_oscillator(mass, math.sqrt(-d_force / mass))
        noise = NoiseParams.from_measurement(k, eta, hbar)
        state = GaussianState(0.0, 0.0, v_x, v_p, c)
        dt = 1e-6
        stepped = step_gaussian(state, model, noise, dy=0.0, dt=dt)
        assert stepped.v_x == pytest.approx(v_x, rel=1e-10)
        assert stepped.v_p == pytest.approx(v_p, rel=1e-10)
        assert stepped.c_xp == pytest.approx(c, rel=1e-10)


class TestKickMap:
    def test_against_exact_gaussian_propagation(self):
        kappa, mu, v_x, v_p, c = 10.0, 0.9, 1e-4, 2e-4, 5e-5
        model = kicked_rotor()
        state = GaussianState(mu, 0.3, v_x, v_p, c)
        out = kick_gaussian(state, model)

        # Exact propagation of a Gaussian through p -> p + kappa sin(x).
        damp = math.exp(-v_x / 2)
        p_exact = 0.3 + kappa * math.sin(mu) * damp
        c_exact = c + v_x * kappa * math.cos(mu) * damp
        var_sin = 0.5 * (1 - math.exp(-2 * v_x) * math.cos(2 * mu)) \
            - math.sin(mu) ** 2 * math.exp(-v_x)
        v_p_exact = v_p + 2 * kappa * c * math.cos(mu) * damp + kappa**2 * var_sin

        assert out.x == state.x
        assert out.v_x == state.v_x
        assert out.p == pytest.approx(p_exact, abs=1e-8)
        assert out.c_xp == pytest.approx(c_exact, rel=3 * v_x)
        assert out.v_p == pytest.approx(v_p_exact, rel=3 * v_x)

    def test_no_kicks_is_identity(self):
        state = GaussianState(1.0, 2.0, 0.1, 0.1, 0.0)
        assert kick_gaussian(state, free_particle(1.0)) is state

    def test_misaligned_kick_rejected(self):
        model = kicked_rotor()
        initial = GaussianState(2.0, 0.0, 1e-4, 1e-4, 0.0)
        rec = MeasurementRecord(dt=0.3, increments=np.zeros(10))
        with pytest.raises(ConfigError, match="align"):
            run_gaussian(initial, model, NoiseParams(1.0, 1.0), rec)


class TestEnsembleDecomposition:
    def _self_consistent_ensemble(self, model, n_traj, n_steps, dt, seed,
                                  initial, noise):
        runs = []
        stride = max(1, n_steps // 20)
        for traj in range(n_traj):
            rng = measurement_stream(seed, trajectory=traj)
            dw = rng.standard_normal(n_steps) * math.sqrt(dt)
            increments = np.empty(n_steps)
            state = initial
            rows = [initial.as_array()]
            times = [0.0]
            root = math.sqrt(noise.g_m)
            for i in range(n_steps):
                dy = state.x * dt + dw[i] / root
                increments[i] = dy
                state = step_gaussian(state, model, noise, dy, dt, i * dt)
                if (i + 1) % stride == 0 or i == n_steps - 1:
                    rows.append(state.as_array())
                    times.append((i + 1) * dt)
            from qct.series import GAUSSIAN_FIELDS, Series
            runs.append(Series(np.asarray(times), GAUSSIAN_FIELDS, np.asarray(rows)))
        return runs, stride

    @pytest.mark.slow
    @pytest.mark.parametrize("model,omega", [(free_particle(1.0), 0.0),
                                             (harmonic_oscillator(1.0, 1.0), 1.0)])
    def test_five_hundred_trajectories(self, model, omega):
        n_traj, n_steps, dt = 500, 1000, 1e-3
        noise = NoiseParams(g_m=1.0, g_p=0.5)
        initial = GaussianState(0.0, 0.0, 0.3, 0.4, 0.0)
        runs, stride = self._self_consistent_ensemble(
            model, n_traj, n_steps, dt, seed=91, initial=initial, noise=noise)
        reference = unconditioned_reference(initial, model, noise, dt, n_steps,
                                            sample_stride=stride)
        result = ensemble_decomposition(runs, reference)
        assert result["max_abs_z"] < 3.0

        # The unconditioned reference itself must match the independent
        # ODE oracle; g_p = hbar^2 k with hbar = 1 means k = g_p here.
        ode = oracles.unconditioned_covariances_ode(
            (0.3, 0.4, 0.0), 1.0, k=0.5, hbar=1.0,
            t_eval=reference.times, omega=omega)
        assert np.allclose(reference.column("v_x"), ode[:, 0], rtol=2e-3)
        assert np.allclose(reference.column("v_p"), ode[:, 1], rtol=2e-3)

    def test_degenerate_ensemble(self):
        model = free_particle(1.0)
        noise = NoiseParams(1.0, 0.5)
        initial = GaussianState(0.0, 0.0, 0.3, 0.4, 0.0)
        rng = measurement_stream(17)
        rec = MeasurementRecord(dt=1e-3, increments=rng.standard_normal(200) * 1e-1)
        run = run_gaussian(initial, model, noise, rec, sample_stride=20)
        reference = unconditioned_reference(initial, model, noise, 1e-3, 200,
                                            sample_stride=20)
        result = ensemble_decomposition([run, run, run], reference)
        # Identical trajectories: zero mean scatter, so the estimate is
        # the tracked covariance itself.
        assert np.allclose(result["sigma"]["xx"], run.column("v_x"))

    def test_mismatched_grids_rejected(self):
        from qct.series import GAUSSIAN_FIELDS, Series
        a = Series(np.arange(3.0), GAUSSIAN_FIELDS, np.ones((3, 5)))
        b = Series(np.arange(4.0), GAUSSIAN_FIELDS, np.ones((4, 5)))
        with pytest.raises(ConfigError, match="time base"):
            ensemble_decomposition([a, b], a)
