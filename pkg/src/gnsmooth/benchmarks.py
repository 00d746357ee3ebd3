"""Benchmark systems: a linear sine tracker and a non-harmonic oscillator.

Both systems use the state block [acceleration, velocity, position]. The
sine tracker pairs a constant-acceleration chain with direct observations of
velocity and position. The oscillator adds stiffness, damping and quadratic
plus cubic restoring terms that enter the acceleration recursion, which is
what makes its smoothing problem genuinely nonlinear.

Randomness policy: every generator takes an integer seed and derives its
numpy PCG64 generator from a SeedSequence spawned on a per-purpose stream,
``(seed, _TRUTH_STREAM)`` for trajectory noise and ``(seed, _OBS_STREAM)``
for measurement noise. This keeps truth and observations decorrelated while
making the whole experiment reproducible bit for bit from one seed.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .statespace import (
    MeasurementModel,
    ProcessModel,
    SmoothingProblem,
    StateSequence,
)

_TRUTH_STREAM = 0
_OBS_STREAM = 1

_CSV_FMT = "%.17g"

# Direct observation of velocity and position.
OBSERVATION_MATRIX = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled ground-truth states."""

    times: np.ndarray
    states: StateSequence

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.shape[0] != self.states.M:
            raise DimensionMismatch(
                f"{times.shape[0]} times for {self.states.M} states"
            )
        if times.shape[0] > 1:
            steps = np.diff(times)
            if np.any(np.abs(steps - steps[0]) > 1e-12):
                raise ValueError("trajectory times must be uniformly spaced")
        object.__setattr__(self, "times", times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class NHOParams:
    """Non-harmonic oscillator coefficients and generation controls.

    The acceleration recursion integrates
    ``-omega0^2 x - beta_damp dx/dt + k2 x^2 + k3 x^3`` plus Gaussian noise
    with standard deviation ``sigma_p_true`` per generation step.
    """

    omega0: float = 5.0
    beta_damp: float = 1.5
    k2: float = 90.0
    k3: float = -0.5
    sigma_p_true: float = 0.05
    dt_truth: float = 0.03
    obs_stride: int = 2

    def __post_init__(self):
        if self.dt_truth <= 0:
            raise ValueError("dt_truth must be positive")
        if self.obs_stride < 1:
            raise ValueError("obs_stride must be >= 1")


@dataclass(frozen=True)
class ObservationSet:
    """Noisy [velocity, position] measurements on a uniform time grid.

    ``sigma_m_true`` is the generating noise standard deviation; it and the
    seed are None for observation sets read back from CSV, which only stores
    times and measurements.
    """

    times: np.ndarray
    measurements: np.ndarray
    sigma_m_true: float | None = None
    seed: int | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        z = np.asarray(self.measurements, dtype=np.float64)
        if z.ndim != 2 or z.shape != (times.shape[0], 2):
            raise DimensionMismatch(f"measurements must be ({times.shape[0]}, 2), got {z.shape}")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(z))):
            raise ValueError("observations contain non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "measurements", z)

    @property
    def M(self) -> int:
        return self.times.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), stream)))


def generate_sine_truth(num_points: int) -> Trajectory:
    """Unit sine wave sampled over one period of 2*pi seconds.

    States are [-sin t, cos t, sin t], so acceleration is exactly the
    negative of position at every sample.
    """
    if num_points < 2:
        raise ValueError("need at least two points")
    dt = 2.0 * np.pi / num_points
    t = np.arange(num_points) * dt
    states = np.column_stack([-np.sin(t), np.cos(t), np.sin(t)])
    return Trajectory(times=t, states=StateSequence(states))


def nho_transition_matrix(params: NHOParams, dt: float) -> np.ndarray:
    """Linear part of the oscillator's one-step transition."""
    return np.array(
        [
            [1.0, -params.beta_damp * dt, -params.omega0**2 * dt],
            [dt, 1.0, 0.0],
            [0.0, dt, 1.0],
        ]
    )


def nho_transition(params: NHOParams, dt: float, states: np.ndarray) -> np.ndarray:
    """One deterministic oscillator step for a (K, 3) stack of states."""
    G = nho_transition_matrix(params, dt)
    out = states @ G.T
    x = states[..., 2]
    out[..., 0] += params.k2 * dt * x**2 + params.k3 * dt * x**3
    return out


def nho_jacobian(params: NHOParams, dt: float, states: np.ndarray) -> np.ndarray:
    """Transition Jacobians for a (K, 3) stack; only the acceleration row
    depends on the state, through the position entry."""
    G = nho_transition_matrix(params, dt)
    jac = np.broadcast_to(G, states.shape[:-1] + (3, 3)).astype(states.dtype).copy()
    x = states[..., 2]
    jac[..., 0, 2] += 2.0 * params.k2 * dt * x + 3.0 * params.k3 * dt * x**2
    return jac


def generate_nho_truth(
    params: NHOParams,
    num_steps: int,
    seed: int,
    initial_state=(0.0, 0.0, 0.1),
) -> Trajectory:
    """Forward-simulate the oscillator for num_steps transitions.

    Process noise hits the acceleration entry once per step. The trajectory
    has num_steps + 1 states at spacing ``params.dt_truth``.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    rng = _stream_rng(seed, _TRUTH_STREAM)
    states = np.zeros((num_steps + 1, 3))
    states[0] = initial_state
    noise = rng.normal(0.0, params.sigma_p_true, size=num_steps)
    for k in range(num_steps):
        states[k + 1] = nho_transition(params, params.dt_truth, states[k : k + 1])[0]
        states[k + 1, 0] += noise[k]
    times = np.arange(num_steps + 1) * params.dt_truth
    return Trajectory(times=times, states=StateSequence(states))


def observe(truth: Trajectory, sigma_m_true: float, stride: int, seed: int) -> ObservationSet:
    """Noisy [velocity, position] readings of every stride-th truth state."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rng = _stream_rng(seed, _OBS_STREAM)
    sub = truth.states.blocks[::stride]
    times = truth.times[::stride]
    z = sub @ OBSERVATION_MATRIX.T + rng.normal(0.0, sigma_m_true, size=(sub.shape[0], 2))
    return ObservationSet(times=times, measurements=z, sigma_m_true=sigma_m_true, seed=seed)


def integrated_bm_cov(dt: float) -> np.ndarray:
    """Covariance of twice-integrated Brownian motion over one step of dt,
    for the [acceleration, velocity, position] ordering."""
    return np.array(
        [
            [dt, dt**2 / 2.0, dt**3 / 6.0],
            [dt**2 / 2.0, dt**3 / 3.0, dt**4 / 8.0],
            [dt**3 / 6.0, dt**4 / 8.0, dt**5 / 20.0],
        ]
    )


def _prior_mean_from(obs: ObservationSet) -> np.ndarray:
    # First state guess: measured velocity and position, zero acceleration.
    return np.array([0.0, obs.measurements[0, 0], obs.measurements[0, 1]])


def _measurement_model(obs: ObservationSet, sigma_m2: float) -> MeasurementModel:
    H = OBSERVATION_MATRIX

    def observe_map(states):
        return states @ H.T

    def observe_jac(states):
        return np.broadcast_to(H, states.shape[:-1] + H.shape).astype(states.dtype).copy()

    covs = np.broadcast_to(sigma_m2 * np.eye(2), (obs.M, 2, 2)).copy()
    return MeasurementModel(
        observe=observe_map,
        jacobian=observe_jac,
        noise_covs=covs,
        observations=obs.measurements,
    )


def build_linear_problem(obs: ObservationSet, sigma_p2: float, sigma_m2: float) -> SmoothingProblem:
    """Constant-acceleration tracking problem for the sine benchmark.

    The transition integrates acceleration into velocity and velocity into
    position; the process covariance is the integrated-Brownian-motion
    covariance scaled by sigma_p2. The prior covariance is the identity,
    deliberately left out of the scaling so the two scale parameters trade
    off process against measurement pull and prior against data strength.
    """
    if sigma_p2 <= 0 or sigma_m2 <= 0:
        raise ValueError("scale parameters must be positive")
    dt = obs.dt
    G = np.array([[1.0, 0.0, 0.0], [dt, 1.0, 0.0], [0.0, dt, 1.0]])

    def transition(states):
        return states @ G.T

    def jacobian(states):
        return np.broadcast_to(G, states.shape[:-1] + (3, 3)).astype(states.dtype).copy()

    q = sigma_p2 * integrated_bm_cov(dt)
    process = ProcessModel(
        transition=transition,
        jacobian=jacobian,
        transition_covs=np.broadcast_to(q, (obs.M - 1, 3, 3)).copy(),
        prior_mean=_prior_mean_from(obs),
        prior_cov=np.eye(3),
    )
    return SmoothingProblem(process=process, measurement=_measurement_model(obs, sigma_m2))


def build_nho_problem(
    obs: ObservationSet, params: NHOParams, sigma_p2: float, sigma_m2: float
) -> SmoothingProblem:
    """Oscillator smoothing problem on the observation grid.

    The process step uses the observation spacing, which is coarser than the
    generation step whenever observations skip states.
    """
    if sigma_p2 <= 0 or sigma_m2 <= 0:
        raise ValueError("scale parameters must be positive")
    dt = obs.dt

    def transition(states):
        return nho_transition(params, dt, states)

    def jacobian(states):
        return nho_jacobian(params, dt, states)

    q = sigma_p2 * integrated_bm_cov(dt)
    process = ProcessModel(
        transition=transition,
        jacobian=jacobian,
        transition_covs=np.broadcast_to(q, (obs.M - 1, 3, 3)).copy(),
        prior_mean=_prior_mean_from(obs),
        prior_cov=np.eye(3),
    )
    return SmoothingProblem(process=process, measurement=_measurement_model(obs, sigma_m2))


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits, header row)

def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    buf.write("time,ddx,dx,x\n")
    for t, row in zip(traj.times, traj.states.blocks):
        buf.write(_CSV_FMT % t)
        for v in row:
            buf.write(",")
            buf.write(_CSV_FMT % v)
        buf.write("\n")
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(trajectory_to_csv(traj))


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(times=data[:, 0], states=StateSequence(data[:, 1:4]))


def observations_to_csv(obs: ObservationSet) -> str:
    buf = io.StringIO()
    buf.write("time,z_dx,z_x\n")
    for t, row in zip(obs.times, obs.measurements):
        buf.write(_CSV_FMT % t)
        for v in row:
            buf.write(",")
            buf.write(_CSV_FMT % v)
        buf.write("\n")
    return buf.getvalue()


def write_observations_csv(obs: ObservationSet, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(observations_to_csv(obs))


def read_observations_csv(path) -> ObservationSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ObservationSet(times=data[:, 0], measurements=data[:, 1:3])
