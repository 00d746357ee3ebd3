import numpy as np
import pytest

from gnsmooth import (
    NHOParams,
    build_linear_problem,
    build_nho_problem,
    finite_difference_jacobian,
    generate_nho_truth,
    generate_sine_truth,
    integrated_bm_cov,
    observe,
    read_observations_csv,
    read_trajectory_csv,
    write_observations_csv,
    write_trajectory_csv,
)
from gnsmooth.benchmarks import nho_jacobian, nho_transition


class TestSineTruth:
    def test_initial_state(self, sine_truth):
        np.testing.assert_array_equal(sine_truth.states.blocks[0], [0.0, 1.0, 0.0])

    def test_spacing_for_75_points(self, sine_truth):
        assert sine_truth.dt == pytest.approx(2 * np.pi / 75)
        assert sine_truth.dt == pytest.approx(0.0838, abs=5e-4)

    def test_harmonic_identity(self, sine_truth):
        blocks = sine_truth.states.blocks
        np.testing.assert_array_equal(blocks[:, 0] + blocks[:, 2], np.zeros(75))

    def test_unit_energy(self, sine_truth):
        blocks = sine_truth.states.blocks
        np.testing.assert_allclose(blocks[:, 1] ** 2 + blocks[:, 2] ** 2, 1.0, atol=1e-12)


class TestOscillatorTruth:
    def test_single_deterministic_step(self):
        params = NHOParams()
        state = np.array([[0.0, 0.0, 0.1]])
        out = nho_transition(params, 0.03, state)[0]
        # acceleration: -25*0.03*0.1 + 90*0.03*0.01 - 0.5*0.03*0.001
        assert out[0] == pytest.approx(-0.0480, abs=5e-5)
        assert out[0] == pytest.approx(-0.048015, abs=1e-12)
        assert out[1] == 0.0
        assert out[2] == pytest.approx(0.1, abs=1e-15)

    def test_linear_reduction_matches_matrix_powers(self):
        params = NHOParams(beta_damp=0.0, k2=0.0, k3=0.0, sigma_p_true=0.0)
        truth = generate_nho_truth(params, 40, 12)
        G = np.array(
            [
                [1.0, 0.0, -params.omega0**2 * params.dt_truth],
                [params.dt_truth, 1.0, 0.0],
                [0.0, params.dt_truth, 1.0],
            ]
        )
        x0 = np.array([0.0, 0.0, 0.1])
        for k in (1, 5, 20, 40):
            expected = np.linalg.matrix_power(G, k) @ x0
            got = truth.states.blocks[k]
            assert np.linalg.norm(got - expected) <= 1e-10 * max(np.linalg.norm(expected), 1)

    def test_same_seed_bit_identical(self):
        params = NHOParams()
        a = generate_nho_truth(params, 60, 7)
        b = generate_nho_truth(params, 60, 7)
        np.testing.assert_array_equal(a.states.blocks, b.states.blocks)

    def test_noise_free_generation_is_seed_independent(self):
        params = NHOParams(sigma_p_true=0.0)
        a = generate_nho_truth(params, 30, 1)
        b = generate_nho_truth(params, 30, 99)
        np.testing.assert_array_equal(a.states.blocks, b.states.blocks)


class TestObserve:
    def test_zero_noise_reproduces_truth(self, sine_truth):
        obs = observe(sine_truth, 0.0, 1, 0)
        np.testing.assert_array_equal(obs.measurements, sine_truth.states.blocks[:, 1:3])

    def test_stride_two_doubles_spacing(self):
        params = NHOParams()
        truth = generate_nho_truth(params, 60, 0)
        obs = observe(truth, 0.1, 2, 0)
        assert obs.dt == pytest.approx(0.06, abs=1e-12)
        assert obs.M == 31

    def test_empirical_noise_variance(self, sine_truth):
        sigma2 = 0.5
        devs = []
        for seed in range(70):
            obs = observe(sine_truth, np.sqrt(sigma2), 1, seed)
            devs.append(obs.measurements - sine_truth.states.blocks[:, 1:3])
        devs = np.concatenate([d.reshape(-1) for d in devs])
        assert devs.size >= 10_000
        assert np.var(devs) == pytest.approx(sigma2, rel=0.05)


class TestLinearProblem:
    def test_process_covariance_formula(self):
        q = integrated_bm_cov(0.084)
        assert q[0, 0] == pytest.approx(0.084, abs=1e-15)
        assert q[1, 1] == pytest.approx(1.9757e-4, rel=1e-4)
        assert q[2, 2] == pytest.approx(0.084**5 / 20, abs=1e-18)

    def test_problem_uses_scaled_covariance(self, sine_obs):
        problem = build_linear_problem(sine_obs, 2.5, 1.0)
        expected = 2.5 * integrated_bm_cov(sine_obs.dt)
        np.testing.assert_allclose(problem.process.transition_covs[0], expected)

    def test_measurement_covariance_scale(self, sine_obs):
        problem = build_linear_problem(sine_obs, 1.0, 5.0)
        np.testing.assert_array_equal(problem.measurement.noise_covs[0], 5.0 * np.eye(2))

    def test_prior_covariance_is_unscaled_identity(self, sine_obs):
        for s2p in (0.01, 1.0, 100.0):
            problem = build_linear_problem(sine_obs, s2p, 1.0)
            np.testing.assert_array_equal(problem.process.prior_cov, np.eye(3))

    def test_prior_mean_from_first_observation(self, sine_obs):
        problem = build_linear_problem(sine_obs, 1.0, 1.0)
        z0 = sine_obs.measurements[0]
        np.testing.assert_array_equal(problem.process.prior_mean, [0.0, z0[0], z0[1]])

    def test_covariances_spd_over_grid(self, sine_obs):
        for exp in np.arange(-2.0, 2.01, 0.2):
            q = (10.0**exp) * integrated_bm_cov(sine_obs.dt)
            np.linalg.cholesky(q)  # raises if not SPD


class TestOscillatorProblem:
    def test_jacobian_reduces_to_constant_for_linear_params(self):
        params = NHOParams(k2=0.0, k3=0.0)
        rng = np.random.default_rng(2)
        states = rng.normal(size=(50, 3))
        jac = nho_jacobian(params, 0.06, states)
        G = nho_transition(params, 0.06, np.eye(3)).T  # columns are G columns
        for k in range(50):
            np.testing.assert_allclose(jac[k], G, atol=1e-14)

    def test_nonlinear_jacobian_entry_at_reference_point(self):
        params = NHOParams()
        jac = nho_jacobian(params, 0.06, np.array([[0.0, 0.0, 0.1]]))[0]
        extra = jac[0, 2] - (-params.omega0**2 * 0.06)
        # 90*2*0.06*0.1 - 0.5*3*0.06*0.01
        assert extra == pytest.approx(1.0791, abs=1e-12)

    def test_jacobian_matches_finite_differences(self, nho_problem):
        rng = np.random.default_rng(100)
        states = rng.normal(0, 0.3, size=(100, 3))
        analytic = nho_problem.process.jacobian(states)
        for k in range(0, 100, 10):
            fd = finite_difference_jacobian(
                lambda v: nho_problem.process.transition(v[None])[0], states[k], h=1e-6
            )
            rel = np.linalg.norm(fd - analytic[k]) / np.linalg.norm(analytic[k])
            assert rel <= 1e-5

    def test_measurement_jacobian_constant(self, nho_problem):
        rng = np.random.default_rng(8)
        states = rng.normal(size=(20, 3))
        jac = nho_problem.measurement.jacobian(states)
        H = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        for k in range(20):
            np.testing.assert_array_equal(jac[k], H)

    def test_process_step_matches_observation_spacing(self, nho_obs, nho_params):
        problem = build_nho_problem(nho_obs, nho_params, 1.0, 1.0)
        expected = 1.0 * integrated_bm_cov(0.06)
        np.testing.assert_allclose(problem.process.transition_covs[0], expected, atol=1e-15)


class TestCsvRoundTrips:
    def test_trajectory(self, tmp_path, nho_truth):
        path = tmp_path / "truth.csv"
        write_trajectory_csv(nho_truth, path)
        header = path.read_text().splitlines()[0]
        assert header == "time,ddx,dx,x"
        again = read_trajectory_csv(path)
        np.testing.assert_array_equal(again.times, nho_truth.times)
        np.testing.assert_array_equal(again.states.blocks, nho_truth.states.blocks)

    def test_observations(self, tmp_path, nho_obs):
        path = tmp_path / "obs.csv"
        write_observations_csv(nho_obs, path)
        header = path.read_text().splitlines()[0]
        assert header == "time,z_dx,z_x"
        again = read_observations_csv(path)
        np.testing.assert_array_equal(again.times, nho_obs.times)
        np.testing.assert_array_equal(again.measurements, nho_obs.measurements)
        assert again.sigma_m_true is None


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        NHOParams(dt_truth=0.0)
    with pytest.raises(ValueError):
        NHOParams(obs_stride=0)
    with pytest.raises(ValueError):
        generate_sine_truth(1)
