"""Control policies consumed by the stochastic integrator.

A policy is called as ``policy(t, states)`` with a scalar time and an
``(B, 3)`` batch of Bloch vectors and returns a ``(B, 2)`` array of
control amplitudes (u_x, u_y). Policies must act on each row on its own
so that batched and single-trajectory runs agree bitwise.
"""
import numpy as np

from .exceptions import ValidationError


def stationarity_rule(costates, states):
    """u_x = l2 z - l3 y, u_y = l3 x - l1 z, row by row."""
    lam = np.asarray(costates, dtype=float)
    s = np.asarray(states, dtype=float)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    out = np.empty(np.broadcast(l1, x).shape + (2,))
    out[..., 0] = l2 * z - l3 * y
    out[..., 1] = l3 * x - l1 * z
    return out


class ControlPolicy:
    """Base class; subclasses implement :meth:`controls`."""

    name = "policy"

    def controls(self, t, states):
        raise NotImplementedError

    def __call__(self, t, states):
        states = np.asarray(states, dtype=float)
        return self.controls(float(t), states)

    def __repr__(self):
        return "{}()".format(type(self).__name__)


class ZeroPolicy(ControlPolicy):
    """u = 0 everywhere."""

    name = "none"

    def controls(self, t, states):
        return np.zeros(states.shape[:-1] + (2,))


class OpenLoopPolicy(ControlPolicy):
    """Piecewise-constant control table, independent of the state.

    ``controls[k]`` is applied on ``[times[k], times[k + 1])``; times
    outside the table use the first or last entry.
    """

    name = "open_loop"

    def __init__(self, times, controls):
        times = np.asarray(times, dtype=float)
        controls = np.asarray(controls, dtype=float)
        if times.ndim != 1 or controls.shape != times.shape + (2,):
            raise ValidationError(
                "an open-loop table needs n times and an (n, 2) control "
                "array, got shapes {} and {}.".format(
                    times.shape, controls.shape
                )
            )
        self.times = times
        self.table = controls

    def controls(self, t, states):
        k = np.searchsorted(self.times, t, side="right") - 1
        k = min(max(k, 0), len(self.times) - 1)
        return np.broadcast_to(
            self.table[k], states.shape[:-1] + (2,)
        ).copy()


class FeedbackPolicy(ControlPolicy):
    """State feedback through a stored costate trajectory.

    The costate is interpolated linearly in time (held at its end values
    outside the stored grid) and the control is obtained from the live
    state by the stationarity condition.
    """

    name = "feedback"

    def __init__(self, times, costates):
        times = np.asarray(times, dtype=float)
        costates = np.asarray(costates, dtype=float)
        if times.ndim != 1 or costates.shape != times.shape + (3,):
            raise ValidationError(
                "a feedback policy needs n times and an (n, 3) costate "
                "array, got shapes {} and {}.".format(
                    times.shape, costates.shape
                )
            )
        self.times = times
        self.costates = costates

    def costate(self, t):
        return np.array(
            [
                np.interp(t, self.times, self.costates[:, i])
                for i in range(3)
            ]
        )

    def controls(self, t, states):
        return stationarity_rule(self.costate(t), states)


POLICY_NAMES = ("feedback", "open_loop", "none")
