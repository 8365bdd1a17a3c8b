"""Pathwise integration of the conditioned Bloch equations.

The Ito equation

    ds = drift(s, t, u) dt + sqrt(M eta) (xz, yz, z^2 - 1) dW

is integrated with the Euler-Maruyama scheme. Every trajectory owns a
counter-based (Philox) noise stream keyed by ``(master_seed, stream,
trajectory_index)``, so a trajectory is the same whether it runs alone or
inside a batch, on any number of worker threads.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import traitlets

from .exceptions import (
    DomainError,
    IntegrationError,
    NMQubitError,
    PolicyError,
    TimeRangeError,
    ValidationError,
)
from .policies import ZeroPolicy
from .qubit import (
    DIVISIBILITY_SLACK,
    BlochState,
    ModeFlag,
    _as_states,
    coherence_factor,
    diffusion,
    drift_from_rates,
)

logger = logging.getLogger(__name__)

SCHEMES = ("euler_maruyama",)
CLAMP_POLICIES = ("project_to_ball", "reject_step")


class IntegratorConfig(traitlets.HasTraits):
    """Step, horizon, scheme and noise settings of the integrator.

    Args
    ----
        dt : float
                Integration step in units of 1/omega0.
        t_max : float
                Horizon, a multiple of ``dt``.
        scheme : str
                Only ``"euler_maruyama"``.
        clamp_policy : str
                ``"project_to_ball"`` renormalises a state that left the
                Bloch ball, ``"reject_step"`` redraws the increment.
        master_seed : int
                64-bit seed of every noise stream.
        trajectory_index : int
                Index of the noise stream used by :func:`simulate`.
        workers : int
                Threads used by ensemble runs.
        chunk_size : int
                Trajectories integrated together as one batch.
        max_rejects : int
                Redraws per step under ``reject_step`` before falling back
                to projection.
    """

    dt = traitlets.Float(1e-3)
    t_max = traitlets.Float(15.0)
    scheme = traitlets.Enum(SCHEMES, default_value="euler_maruyama")
    clamp_policy = traitlets.Enum(
        CLAMP_POLICIES, default_value="project_to_ball"
    )
    master_seed = traitlets.Integer(20240101, min=0, max=2 ** 64 - 1)
    trajectory_index = traitlets.Integer(0, min=0)
    workers = traitlets.Integer(1, min=1)
    chunk_size = traitlets.Integer(64, min=1)
    max_rejects = traitlets.Integer(100, min=0)

    @traitlets.validate("dt", "t_max")
    def _positive(self, proposal):
        value = proposal["value"]
        if not (math.isfinite(value) and value > 0):
            raise traitlets.TraitError(
                "{} must be finite and positive, but {!r} was "
                "provided.".format(proposal["trait"].name, value)
            )
        return value

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))

    def check(self):
        """Check the invariants that involve more than one field."""
        if self.dt > self.t_max:
            raise ValidationError("dt must not exceed t_max.")
        miss = abs(self.n_steps * self.dt - self.t_max)
        if miss > DIVISIBILITY_SLACK * self.dt:
            raise ValidationError(
                "dt={} does not divide t_max={}.".format(self.dt, self.t_max)
            )
        return self

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def as_dict(self):
        return {name: getattr(self, name) for name in INTEGRATOR_FIELDS}

    def replace(self, **changes):
        values = self.as_dict()
        values.update(changes)
        return IntegratorConfig(**values)


INTEGRATOR_FIELDS = (
    "dt",
    "t_max",
    "scheme",
    "clamp_policy",
    "master_seed",
    "trajectory_index",
    "workers",
    "chunk_size",
    "max_rejects",
)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One integrated trajectory.

    All arrays have ``n_steps + 1`` rows. ``noise[k]`` is the increment
    that took the state from ``t[k-1]`` to ``t[k]`` (``noise[0] = 0``),
    ``controls[k]`` the control applied from ``t[k]`` on, and ``record``
    the integrated measurement signal Y with ``Y(0) = 0``.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    noise: np.ndarray
    record: np.ndarray
    lambda_t: np.ndarray
    clamp_count: int
    master_seed: int = 0
    trajectory_index: int = 0

    def __post_init__(self):
        n = len(self.times)
        for name in ("states", "controls", "noise", "record", "lambda_t"):
            if len(getattr(self, name)) != n:
                raise ValidationError(
                    "{} has {} rows, expected {}.".format(
                        name, len(getattr(self, name)), n
                    )
                )

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self):
        return BlochState.from_array(self.states[-1])

    def bloch_states(self):
        return [BlochState.from_array(row) for row in self.states]

    def columns(self):
        """Columns t, x, y, z, ux, uy, dW, Y, Lambda."""
        return np.column_stack(
            [
                self.times,
                self.states,
                self.controls,
                self.noise,
                self.record,
                self.lambda_t,
            ]
        )


def noise_generator(master_seed, trajectory_index, stream=0, *subkey):
    """Philox generator owned by one trajectory."""
    sequence = np.random.SeedSequence(
        int(master_seed),
        spawn_key=(int(stream), int(trajectory_index)) + tuple(subkey),
    )
    return np.random.Generator(np.random.Philox(sequence))


def wiener_increments(n, dt, master_seed, trajectory_index, stream=0):
    """``n`` independent N(0, dt) increments of one trajectory's stream."""
    if n < 0:
        raise DomainError("the number of increments must be >= 0.")
    if not dt > 0:
        raise DomainError("dt must be positive.")
    rng = noise_generator(master_seed, trajectory_index, stream)
    return math.sqrt(dt) * rng.standard_normal(int(n))


def _squared_norms(states):
    return (
        states[..., 0] * states[..., 0]
        + states[..., 1] * states[..., 1]
        + states[..., 2] * states[..., 2]
    )


def _increment(states, delta, gamma, controls, dW, dt, p):
    return (
        states
        + drift_from_rates(states, delta, gamma, controls, p) * dt
        + diffusion(states, p) * dW[..., None]
    )


def _clamp(
    new,
    current,
    delta,
    gamma,
    u,
    dW,
    dt,
    p,
    clamp_policy,
    redraw_rng,
    max_rejects,
):
    """Bring rows of ``new`` that left the ball back inside, in place.

    Under ``"reject_step"`` an outside row gets up to ``max_rejects``
    fresh increments from ``redraw_rng(row)`` (written into ``dW``); a row
    still outside after that is projected. Returns the mask of clamped
    rows, one event per row and step.
    """
    norm2 = _squared_norms(new)
    clamped = norm2 > 1
    if not clamped.any():
        return clamped
    if clamp_policy == "reject_step":
        sqrt_dt = math.sqrt(dt)
        for row in np.flatnonzero(clamped):
            rng = redraw_rng(row)
            for _ in range(max_rejects):
                redraw = np.array([sqrt_dt * rng.standard_normal()])
                candidate = _increment(
                    current[row : row + 1],
                    delta,
                    gamma,
                    u[row : row + 1],
                    redraw,
                    dt,
                    p,
                )
                dW[row] = redraw[0]
                new[row] = candidate[0]
                norm2[row] = _squared_norms(candidate)[0]
                if norm2[row] <= 1:
                    break
    outside = norm2 > 1
    if outside.any():
        new[outside] = new[outside] / np.sqrt(norm2[outside])[:, None]
    return clamped


def em_step(
    s,
    t,
    u,
    dW,
    table,
    p,
    mode=ModeFlag.NON_MARKOVIAN,
    dt=None,
    clamp_policy="project_to_ball",
    rng=None,
    max_rejects=100,
):
    """One Euler-Maruyama step.

    A state that leaves the Bloch ball is clamped by ``clamp_policy``;
    ``"reject_step"`` draws its replacement increments from ``rng``. Each
    clamp is logged at debug level. ``dt`` defaults to the table step.
    """
    if clamp_policy not in CLAMP_POLICIES:
        raise ValidationError(
            "clamp_policy must be one of {}, got {!r}.".format(
                CLAMP_POLICIES, clamp_policy
            )
        )
    if clamp_policy == "reject_step" and rng is None:
        raise DomainError("reject_step needs a generator for the redraws.")
    dt = table.dt if dt is None else float(dt)
    state = np.asarray(s, dtype=float)
    control = np.asarray(u, dtype=float)
    delta, gamma = table.rates(t, mode)
    noise = np.array([dW], dtype=float)
    new = _increment(state[None], delta, gamma, control[None], noise, dt, p)
    if not np.all(np.isfinite(new)):
        raise IntegrationError(t, state, control)
    clamped = _clamp(
        new,
        state[None],
        delta,
        gamma,
        control[None],
        noise,
        dt,
        p,
        clamp_policy,
        lambda row: rng,
        max_rejects,
    )
    if clamped[0]:
        logger.debug("clamped the step at t=%g (%s)", t, clamp_policy)
    return BlochState.from_array(new[0])


def _evaluate_policy(policy, t, states, indices):
    try:
        controls = np.asarray(policy(t, states), dtype=float)
    except NMQubitError:
        raise
    except Exception as exc:
        raise PolicyError(
            "policy {!r} failed at t={} (trajectories {}..{}): {}".format(
                policy, t, indices[0], indices[-1], exc
            )
        ) from exc
    if controls.shape != states.shape[:-1] + (2,):
        raise PolicyError(
            "policy {!r} returned controls of shape {}, expected {}.".format(
                policy, controls.shape, states.shape[:-1] + (2,)
            )
        )
    if not np.all(np.isfinite(controls)):
        raise PolicyError(
            "policy {!r} returned non-finite controls at t={}.".format(
                policy, t
            )
        )
    return controls


def check_horizon(table, cfg):
    """Raise if the integration horizon exceeds the table."""
    if cfg.n_steps * cfg.dt > table.t_max * (1 + 1e-9) + 1e-12:
        raise TimeRangeError(
            "horizon t_max={} exceeds the coefficient table range "
            "[0, {}].".format(cfg.t_max, table.t_max)
        )


@dataclass(frozen=True)
class Batch:
    """Raw arrays of a batch of trajectories (rows are trajectories)."""

    indices: np.ndarray
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    noise: np.ndarray
    record: np.ndarray
    lambda_t: np.ndarray
    clamp_count: np.ndarray

    def trajectory(self, row, master_seed=0):
        return TrajectoryRecord(
            times=self.times,
            states=self.states[row],
            controls=self.controls[row],
            noise=self.noise[row],
            record=self.record[row],
            lambda_t=self.lambda_t[row],
            clamp_count=int(self.clamp_count[row]),
            master_seed=master_seed,
            trajectory_index=int(self.indices[row]),
        )


def integrate_batch(
    p,
    table,
    s0,
    cfg,
    policy=None,
    mode=ModeFlag.NON_MARKOVIAN,
    indices=None,
    stream=0,
):
    """Integrate the trajectories ``indices`` together.

    All arithmetic acts row by row, so each trajectory is independent of
    the batch it is computed in.
    """
    cfg.check()
    check_horizon(table, cfg)
    mode = ModeFlag.parse(mode)
    policy = policy or ZeroPolicy()
    initial = BlochState.from_array(_as_states(s0)).validate()
    indices = np.atleast_1d(
        np.asarray(
            [cfg.trajectory_index] if indices is None else indices,
            dtype=np.int64,
        )
    )
    n, dt = cfg.n_steps, cfg.dt
    B = len(indices)
    times = np.arange(n + 1) * dt
    deltas, gammas = table.rates_on(np.minimum(times, table.t_max), mode)

    noise = np.zeros((B, n + 1))
    for row, index in enumerate(indices):
        noise[row, 1:] = wiener_increments(
            n, dt, cfg.master_seed, index, stream
        )
    states = np.empty((B, n + 1, 3))
    controls = np.empty((B, n + 1, 2))
    record = np.zeros((B, n + 1))
    clamps = np.zeros(B, dtype=np.int64)
    reject_streams = {}

    def redraw_rng(row):
        index = int(indices[row])
        if index not in reject_streams:
            reject_streams[index] = noise_generator(
                cfg.master_seed, index, stream, 1
            )
        return reject_streams[index]

    readout = math.sqrt(p.M * p.eta) * dt

    states[:, 0] = np.asarray(initial)
    for k in range(n):
        t = times[k]
        current = states[:, k]
        u = _evaluate_policy(policy, t, current, indices)
        controls[:, k] = u
        dW = noise[:, k + 1]
        new = _increment(current, deltas[k], gammas[k], u, dW, dt, p)

        finite = np.isfinite(new).all(axis=1)
        if not finite.all():
            row = int(np.flatnonzero(~finite)[0])
            raise IntegrationError(
                t, current[row], u[row], trajectory_index=int(indices[row])
            )

        clamps += _clamp(
            new,
            current,
            deltas[k],
            gammas[k],
            u,
            noise[:, k + 1],
            dt,
            p,
            cfg.clamp_policy,
            redraw_rng,
            cfg.max_rejects,
        )

        states[:, k + 1] = new
        record[:, k + 1] = (
            record[:, k] + noise[:, k + 1] + readout * (-0.5 * current[:, 2])
        )

    controls[:, n] = _evaluate_policy(policy, times[n], states[:, n], indices)

    if initial.x == 0 and initial.y == 0:
        logger.warning(
            "initial state has no transverse component; Lambda(t) is "
            "recorded as NaN."
        )
        lambda_t = np.full((B, n + 1), np.nan)
    else:
        lambda_t = coherence_factor(states, initial)
    logger.debug(
        "integrated %d trajectories (%d..%d) over %d steps, %d clamps",
        B,
        indices[0],
        indices[-1],
        n,
        int(clamps.sum()),
    )
    return Batch(
        indices=indices,
        times=times,
        states=states,
        controls=controls,
        noise=noise,
        record=record,
        lambda_t=lambda_t,
        clamp_count=clamps,
    )


def simulate(
    p, table, cfg, policy=None, mode=ModeFlag.NON_MARKOVIAN, s0=None, stream=0
):
    """Integrate trajectory ``cfg.trajectory_index``.

    Args
    ----
        p : ReservoirParams
        table : CoefficientTable
                Rates covering ``[0, cfg.t_max]``.
        cfg : IntegratorConfig
        policy : callable, optional
                ``policy(t, states) -> controls``; zero control by default.
        mode : ModeFlag
        s0 : array-like, optional
                Initial Bloch vector, by default (sqrt2/4, sqrt2/4, sqrt3/2).
        stream : int
                Noise namespace, see :func:`noise_generator`.

    Returns
    -------
        TrajectoryRecord
    """
    s0 = DEFAULT_INITIAL_STATE if s0 is None else s0
    batch = integrate_batch(
        p, table, s0, cfg, policy, mode, [cfg.trajectory_index], stream
    )
    record = batch.trajectory(0, master_seed=cfg.master_seed)
    if record.clamp_count:
        logger.info(
            "trajectory %d: %d clamp events",
            record.trajectory_index,
            record.clamp_count,
        )
    return record


DEFAULT_INITIAL_STATE = (
    math.sqrt(2) / 4,
    math.sqrt(2) / 4,
    math.sqrt(3) / 2,
)


def deterministic_path(
    p,
    table,
    s0,
    times,
    control=None,
    mode=ModeFlag.NON_MARKOVIAN,
    rtol=1e-10,
    atol=1e-12,
):
    """Accurate noise-free reference solution of the drift equation.

    ``control`` is ``None`` (no control) or a callable ``u(t) -> (u_x,
    u_y)``. The step is capped at the table spacing so that the kinks of
    the interpolated rates are resolved.
    """
    times = np.asarray(times, dtype=float)
    s0 = np.asarray(_as_states(s0), dtype=float)
    mode = ModeFlag.parse(mode)
    zero = np.zeros(2)

    def rhs(t, s):
        delta, gamma = table.rates(min(t, table.t_max), mode)
        u = zero if control is None else np.asarray(control(t), dtype=float)
        return drift_from_rates(s, delta, gamma, u, p)

    solution = scipy.integrate.solve_ivp(
        rhs,
        (times[0], times[-1]),
        s0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
        max_step=table.dt,
    )
    if not solution.success:
        raise IntegrationError(times[-1], s0, zero)
    return solution.y.T
