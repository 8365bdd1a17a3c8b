"""Optimal control of the noise-free drift by forward-backward sweeps.

The objective on the grid ``t_k = k dt``, ``k = 0..N`` is

    J(u) = (theta / 4) |s_N - s_T(T)|^2 + (dt / 2) sum_{k<N} |u_k|^2,

with ``s_{k+1} = s_k + dt drift(s_k, t_k, u_k)`` (explicit Euler, control
held constant on each step). The terminal term is ``theta / 2`` times the
squared Frobenius distance of the density matrices. Its exact discrete
adjoint is

    l_N = (theta / 2) (s_N - s_T(T)),
    l_k = l_{k+1} - dt costate_rhs(l_{k+1}, s_k, t_k, u_k),

and the gradient with respect to ``u_k`` is
``dt (u_k - stationarity_control(l_{k+1}, s_k))``.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import traitlets

from .exceptions import DomainError, ValidationError
from .policies import FeedbackPolicy, OpenLoopPolicy, stationarity_rule
from .qubit import (
    DIVISIBILITY_SLACK,
    ControlInput,
    ModeFlag,
    _as_states,
    drift_from_rates,
    drift_jacobian,
    target_state,
)

logger = logging.getLogger(__name__)


class OCConfig(traitlets.HasTraits):
    """Settings of the forward-backward sweep.

    Args
    ----
        theta : float
                Weight of the terminal cost, >= 0.
        relaxation : float
                Blending factor of the control update, in (0, 1].
        tol : float
                Convergence threshold on max |stationarity - u|.
        max_iter : int
                Iteration cap.
        dt, t_max : float
                Control grid.
        adaptive_relaxation : bool
                Halve the relaxation whenever the cost increases.
        min_relaxation : float
                Lower bound of the adaptive relaxation.
    """

    theta = traitlets.Float(1.0, min=0.0)
    relaxation = traitlets.Float(0.3)
    tol = traitlets.Float(1e-6)
    max_iter = traitlets.Integer(500, min=1)
    dt = traitlets.Float(0.01)
    t_max = traitlets.Float(15.0)
    adaptive_relaxation = traitlets.Bool(True)
    min_relaxation = traitlets.Float(1e-3)

    @traitlets.validate("relaxation", "min_relaxation")
    def _unit_interval(self, proposal):
        value = proposal["value"]
        if not 0 < value <= 1:
            raise traitlets.TraitError(
                "{} must lie in (0, 1], but {!r} was provided.".format(
                    proposal["trait"].name, value
                )
            )
        return value

    @traitlets.validate("tol", "dt", "t_max")
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
        if self.dt > self.t_max:
            raise ValidationError("control.dt must not exceed t_max.")
        miss = abs(self.n_steps * self.dt - self.t_max)
        if miss > DIVISIBILITY_SLACK * self.dt:
            raise ValidationError(
                "control.dt={} does not divide t_max={}.".format(
                    self.dt, self.t_max
                )
            )
        return self

    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def as_dict(self):
        return {name: getattr(self, name) for name in OC_FIELDS}

    def replace(self, **changes):
        values = self.as_dict()
        values.update(changes)
        return OCConfig(**values)


OC_FIELDS = (
    "theta",
    "relaxation",
    "tol",
    "max_iter",
    "dt",
    "t_max",
    "adaptive_relaxation",
    "min_relaxation",
)


def _check_grid(times, values, width, name):
    times = np.array(times, dtype=float)
    values = np.array(values, dtype=float)
    if times.ndim != 1 or values.shape != times.shape + (width,):
        raise ValidationError(
            "{} needs shape ({}, {}), got {}.".format(
                name, len(times), width, values.shape
            )
        )
    times.flags.writeable = False
    values.flags.writeable = False
    return times, values


@dataclass(frozen=True)
class ControlTrajectory:
    """Controls (u_x, u_y) on a time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times, values = _check_grid(self.times, self.values, 2, "controls")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return ControlInput(*(float(v) for v in self.values[k]))


@dataclass(frozen=True)
class CostateTrajectory:
    """Costate (l1, l2, l3) on a time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times, values = _check_grid(self.times, self.values, 3, "costates")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class OCResult:
    """Outcome of :func:`forward_backward_sweep`.

    ``cost`` and ``history`` are values of the discrete objective (left
    rule for the running cost); ``residual`` is the final
    max |stationarity - u|.
    """

    control: ControlTrajectory
    costate: CostateTrajectory
    state_path: np.ndarray
    target_path: np.ndarray
    cost: float
    zero_control_cost: float
    converged: bool
    iterations: int
    history: tuple
    residuals: tuple = field(default_factory=tuple)
    relaxation: float = 1.0
    theta: float = 1.0
    tol: float = 1e-6

    @property
    def times(self):
        return self.control.times

    @property
    def residual(self):
        return self.residuals[-1] if self.residuals else float("nan")

    @property
    def cost_monotone(self):
        """Whether the cost never increased across iterations."""
        return bool(np.all(np.diff(self.history) <= 1e-14))

    def columns(self):
        """Columns t, ux, uy, l1, l2, l3, x, y, z."""
        return np.column_stack(
            [
                self.control.times,
                self.control.values,
                self.costate.values,
                self.state_path,
            ]
        )


def total_cost(state_path, control, target_path, theta, rule="trapezoid"):
    """(theta / 4) |s(T) - s_T(T)|^2 + (1 / 2) int |u|^2 dt.

    ``rule`` selects the quadrature of the running cost: ``"trapezoid"``
    or ``"left"`` (exact for controls held constant on each step).
    """
    states = _as_states(state_path)
    targets = _as_states(target_path)
    times = np.asarray(control.times)
    if len(states) != len(times) or len(targets) != len(times):
        raise ValidationError(
            "state path ({}), target path ({}) and control grid ({}) are "
            "not aligned.".format(len(states), len(targets), len(times))
        )
    miss = states[-1] - targets[-1]
    terminal = 0.25 * theta * float(miss @ miss)
    power = np.sum(control.values ** 2, axis=1)
    if rule == "trapezoid":
        running = 0.5 * scipy.integrate.trapezoid(power, times)
    elif rule == "left":
        running = 0.5 * float(np.diff(times) @ power[:-1])
    else:
        raise ValidationError("unknown quadrature rule {!r}.".format(rule))
    return terminal + running


def _costate_rate(lam, s, delta, u, p):
    return -drift_jacobian(s, delta, u, p).T @ lam


def costate_rhs(lam, s, t, u, table, p, mode=ModeFlag.NON_MARKOVIAN):
    """Costate rate -J^T lambda, J the state Jacobian of the drift."""
    delta, _ = table.rates(t, mode)
    return _costate_rate(np.asarray(lam, dtype=float), s, delta, u, p)


def stationarity_control(lam, s):
    """Control that makes the Hamiltonian stationary in u."""
    u_x, u_y = stationarity_rule(lam, _as_states(s))
    return ControlInput(float(u_x), float(u_y))


class _Problem:
    """Discretised control problem on a fixed grid."""

    def __init__(self, p, table, s0, oc, mode):
        oc.check()
        self.p = p
        self.mode = ModeFlag.parse(mode)
        self.theta = oc.theta
        self.dt = oc.dt
        self.n = oc.n_steps
        self.times = oc.times()
        if self.times[-1] > table.t_max * (1 + 1e-9) + 1e-12:
            raise DomainError(
                "control horizon {} exceeds the coefficient table range "
                "[0, {}].".format(self.times[-1], table.t_max)
            )
        self.deltas, self.gammas = table.rates_on(
            np.minimum(self.times, table.t_max), self.mode
        )
        self.s0 = np.asarray(_as_states(s0), dtype=float)
        self.targets = target_state(self.times, self.s0, p.omega0)

    def forward(self, controls):
        states = np.empty((self.n + 1, 3))
        states[0] = self.s0
        for k in range(self.n):
            states[k + 1] = states[k] + self.dt * drift_from_rates(
                states[k], self.deltas[k], self.gammas[k], controls[k], self.p
            )
        return states

    def objective(self, states, controls):
        miss = states[-1] - self.targets[-1]
        terminal = 0.25 * self.theta * float(miss @ miss)
        return terminal + 0.5 * self.dt * float(np.sum(controls ** 2))

    def backward(self, states, controls):
        costates = np.empty((self.n + 1, 3))
        costates[-1] = 0.5 * self.theta * (states[-1] - self.targets[-1])
        for k in range(self.n - 1, -1, -1):
            costates[k] = costates[k + 1] - self.dt * _costate_rate(
                costates[k + 1], states[k], self.deltas[k], controls[k], self.p
            )
        return costates

    def stationarity(self, states, costates):
        """Stationarity controls for steps 0..N-1."""
        return stationarity_rule(costates[1:], states[:-1])

    def cost_and_gradient(self, controls):
        states = self.forward(controls)
        costates = self.backward(states, controls)
        gradient = self.dt * (controls - self.stationarity(states, costates))
        return self.objective(states, controls), gradient


def _step_controls(controls, n):
    controls = np.asarray(controls, dtype=float)
    if controls.shape == (n + 1, 2):
        controls = controls[:-1]
    if controls.shape != (n, 2):
        raise ValidationError(
            "expected {} step controls, got shape {}.".format(
                n, controls.shape
            )
        )
    return controls


def cost_and_gradient(
    p, table, s0, controls, oc, mode=ModeFlag.NON_MARKOVIAN
):
    """Discrete objective and its adjoint gradient with respect to u_k."""
    problem = _Problem(p, table, s0, oc, mode)
    return problem.cost_and_gradient(_step_controls(controls, problem.n))


def forward_backward_sweep(p, table, s0, oc, mode=ModeFlag.NON_MARKOVIAN):
    """Solve the optimality system by relaxed forward-backward sweeps.

    Each iteration integrates the state forward with the current controls,
    the costate backward from its terminal value and compares the
    stationarity controls with the current ones. The sweep stops when
    their largest difference is at most ``oc.tol``; otherwise the controls
    move a fraction ``relaxation`` towards the stationarity controls.
    Non-convergence is reported through ``converged=False``.
    """
    problem = _Problem(p, table, s0, oc, mode)
    controls = np.zeros((problem.n, 2))
    relaxation = oc.relaxation
    history = []
    residuals = []
    converged = False
    zero_control_cost = None

    for iteration in range(1, oc.max_iter + 1):
        states = problem.forward(controls)
        cost = problem.objective(states, controls)
        if zero_control_cost is None:
            zero_control_cost = cost
        if (
            oc.adaptive_relaxation
            and history
            and cost > history[-1]
            and relaxation > oc.min_relaxation
        ):
            relaxation = max(0.5 * relaxation, oc.min_relaxation)
            logger.info(
                "cost rose from %.6g to %.6g; relaxation lowered to %g",
                history[-1],
                cost,
                relaxation,
            )
        history.append(cost)
        costates = problem.backward(states, controls)
        update = problem.stationarity(states, costates)
        residual = float(np.max(np.abs(update - controls)))
        residuals.append(residual)
        logger.debug(
            "sweep %d: cost %.10g, residual %.3g", iteration, cost, residual
        )
        if residual <= oc.tol:
            converged = True
            break
        controls = controls + relaxation * (update - controls)

    if converged:
        logger.info(
            "sweep converged after %d iterations: cost %.8g (zero control "
            "%.8g)",
            iteration,
            cost,
            zero_control_cost,
        )
    else:
        logger.warning(
            "sweep did not converge in %d iterations (residual %.3g > "
            "tol %.3g)",
            oc.max_iter,
            residuals[-1],
            oc.tol,
        )

    # the control recorded at T is the feedback law evaluated there
    final = stationarity_rule(costates[-1], states[-1])
    values = np.vstack([controls, final[None]])
    return OCResult(
        control=ControlTrajectory(problem.times, values),
        costate=CostateTrajectory(problem.times, costates),
        state_path=states,
        target_path=problem.targets,
        cost=cost,
        zero_control_cost=zero_control_cost,
        converged=converged,
        iterations=iteration,
        history=tuple(history),
        residuals=tuple(residuals),
        relaxation=relaxation,
        theta=oc.theta,
        tol=oc.tol,
    )


def gradient_check(
    p,
    table,
    s0,
    oc,
    epsilon=1e-5,
    directions=10,
    seed=0,
    scale=0.1,
    mode=ModeFlag.NON_MARKOVIAN,
):
    """Worst relative error of the adjoint gradient.

    Compares directional derivatives of the discrete objective at a random
    control with central finite differences along ``directions`` random
    directions.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive.")
    problem = _Problem(p, table, s0, oc, mode)
    rng = np.random.default_rng(seed)
    nominal = scale * rng.standard_normal((problem.n, 2))
    _, gradient = problem.cost_and_gradient(nominal)

    def objective(controls):
        return problem.objective(problem.forward(controls), controls)

    worst = 0.0
    for _ in range(max(int(directions), 10)):
        direction = rng.standard_normal((problem.n, 2))
        adjoint = float(np.sum(gradient * direction))
        finite = (
            objective(nominal + epsilon * direction)
            - objective(nominal - epsilon * direction)
        ) / (2 * epsilon)
        denominator = max(abs(adjoint), abs(finite), 1e-300)
        error = abs(adjoint - finite) / denominator
        logger.debug(
            "directional derivative %.10g (adjoint) vs %.10g (finite "
            "differences)",
            adjoint,
            finite,
        )
        worst = max(worst, error)
    return worst


def feedback_policy(res):
    """u(t, s) = stationarity_control(lambda(t), s) with stored lambda."""
    return FeedbackPolicy(res.costate.times, res.costate.values)


def open_loop_policy(res):
    """The synthesised controls as a state-independent table."""
    return OpenLoopPolicy(res.control.times, res.control.values)


def terminal_error(res):
    """|s(T) - s_T(T)| of the deterministic path."""
    return float(np.linalg.norm(res.state_path[-1] - res.target_path[-1]))
