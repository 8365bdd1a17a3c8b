"""Reservoir spectral density, kernels and time-dependent rates.

The reservoir is an Ohmic bath with a Lorentz-Drude cutoff,

    J(w) = (2 gamma0 / pi) w wc^2 / (wc^2 + w^2),

from which follow the dissipation kernel mu(tau), the noise kernel k(tau),
and the second-order rates

    Delta(t) = alpha^2 int_0^t k(tau) cos(w0 tau) dtau      (diffusion)
    gamma(t) = alpha^2 int_0^t mu(tau) sin(w0 tau) dtau     (damping).

gamma(t) has a closed form. Delta(t) is computed with the integration
order swapped, leaving one adaptive quadrature in w:

    Delta(t) = alpha^2 int_0^W J(w) coth(w / 2kT)
               [sin((w - w0) t) / (w - w0) + sin((w + w0) t) / (w + w0)] dw

plus an analytic bound on the truncated tail beyond W.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import traitlets

from .exceptions import DomainError, ResourceError, TimeRangeError
from .qubit import DIVISIBILITY_SLACK, ModeFlag

logger = logging.getLogger(__name__)


class ReservoirParams(traitlets.HasTraits):
    """Physical constants of the reservoir and of the measurement.

    Args
    ----
        omega0 : float
                Qubit transition frequency, the unit of frequency.
        gamma0 : float
                Dimensionless, frequency-independent damping constant.
        omega_c : float
                Reservoir cutoff frequency.
        kBT : float
                Temperature in energy units (hbar = 1). ``0`` selects the
                zero-temperature branch in which coth is replaced by 1.
        alpha_sq : float
                Squared system-reservoir coupling.
        M : float
                Measurement strength.
        eta : float
                Detection efficiency, between 0 and 1.
    """

    omega0 = traitlets.Float(1.0)
    gamma0 = traitlets.Float(1.0)
    omega_c = traitlets.Float(0.5)
    kBT = traitlets.Float(10.0, min=0.0)
    alpha_sq = traitlets.Float(0.01, min=0.0)
    M = traitlets.Float(0.05, min=0.0)
    eta = traitlets.Float(1.0, min=0.0, max=1.0)

    @traitlets.validate("omega0", "gamma0", "omega_c")
    def _positive(self, proposal):
        value = proposal["value"]
        if not (math.isfinite(value) and value > 0):
            raise traitlets.TraitError(
                "{} must be finite and positive, but {!r} was "
                "provided.".format(proposal["trait"].name, value)
            )
        return value

    @property
    def r(self):
        """Ratio of the cutoff to the qubit frequency."""
        return self.omega_c / self.omega0

    def as_dict(self):
        return {name: getattr(self, name) for name in _RESERVOIR_FIELDS}

    def replace(self, **changes):
        values = self.as_dict()
        values.update(changes)
        return ReservoirParams(**values)

    def __repr__(self):
        return "ReservoirParams({})".format(
            ", ".join(
                "{}={!r}".format(k, v) for k, v in self.as_dict().items()
            )
        )


_RESERVOIR_FIELDS = (
    "omega0",
    "gamma0",
    "omega_c",
    "kBT",
    "alpha_sq",
    "M",
    "eta",
)


class QuadratureOptions(traitlets.HasTraits):
    """Tolerances and limits of the Delta(t) quadrature."""

    epsabs = traitlets.Float(1e-10, min=0.0)
    epsrel = traitlets.Float(1e-8, min=0.0)
    # W = max(cutoff_factor * wc, cutoff_factor * w0, thermal * kT)
    cutoff_factor = traitlets.Float(50.0, min=1.0)
    thermal_cutoff_factor = traitlets.Float(20.0, min=0.0)
    limit = traitlets.Integer(20000, min=50)
    max_grid_points = traitlets.Integer(5000000, min=1)
    check_refinement = traitlets.Bool(True)

    def upper_limit(self, p):
        return max(
            self.cutoff_factor * p.omega_c,
            self.cutoff_factor * p.omega0,
            self.thermal_cutoff_factor * p.kBT,
        )

    def as_dict(self):
        return {name: getattr(self, name) for name in self.trait_names()}


def _check_time(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("{} must be finite and >= 0.".format(name))
    return t


def spectral_density(omega, p):
    """Ohmic spectral density with a Lorentz-Drude cutoff."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("the spectral density is defined for omega >= 0.")
    wc2 = p.omega_c ** 2
    return (2 * p.gamma0 / math.pi) * omega * wc2 / (wc2 + omega ** 2)


def thermal_spectral_density(omega, p):
    """J(w) coth(w / 2kT), with its finite limit 4 gamma0 kT / pi at w=0."""
    omega = np.asarray(omega, dtype=float)
    if p.kBT == 0:
        return spectral_density(omega, p)
    wc2 = p.omega_c ** 2
    x = omega / (2 * p.kBT)
    with np.errstate(divide="ignore", invalid="ignore"):
        # J(w) coth(x) = (2 gamma0 / pi) wc^2 / (wc^2 + w^2) * w / tanh(x)
        ratio = np.where(x > 0, omega / np.tanh(x), 2 * p.kBT)
    return (2 * p.gamma0 / math.pi) * wc2 / (wc2 + omega ** 2) * ratio


def dissipation_kernel(tau, p):
    """mu(tau) = 2 gamma0 wc^2 exp(-wc tau), for tau > 0."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError(
            "the dissipation kernel is discontinuous at tau = 0 and is only "
            "evaluated for tau > 0."
        )
    return 2 * p.gamma0 * p.omega_c ** 2 * np.exp(-p.omega_c * tau)


def noise_kernel(tau, p, epsabs=1e-12, limlst=200):
    """k(tau) = 2 int_0^inf J(w) coth(w / 2kT) cos(w tau) dw.

    Evaluated with the Fourier-weighted adaptive rule (QUADPACK QAWF).
    The integrand decays like 1/w for any temperature, so k is
    logarithmically divergent at tau = 0 and only tau > 0 is accepted.
    """
    tau = float(tau)
    if not tau > 0:
        raise DomainError(
            "the noise kernel diverges at tau = 0 and is only evaluated for "
            "tau > 0."
        )
    value, abserr = scipy.integrate.quad(
        lambda w: 2 * thermal_spectral_density(w, p),
        0,
        np.inf,
        weight="cos",
        wvar=tau,
        epsabs=epsabs,
        limlst=limlst,
    )
    logger.debug("k(%g) = %g (+- %g)", tau, value, abserr)
    return value


def noise_kernel_high_temperature(tau, p):
    """High-temperature limit 4 gamma0 kT wc exp(-wc |tau|) of k(tau)."""
    tau = np.abs(np.asarray(tau, dtype=float))
    return 4 * p.gamma0 * p.kBT * p.omega_c * np.exp(-p.omega_c * tau)


def damping_coefficient(t, p):
    """gamma(t) in closed form."""
    t = _check_time(t)
    w0, wc = p.omega0, p.omega_c
    bracket = w0 - np.exp(-wc * t) * (
        w0 * np.cos(w0 * t) + wc * np.sin(w0 * t)
    )
    return p.alpha_sq * 2 * p.gamma0 * wc ** 2 * bracket / (wc ** 2 + w0 ** 2)


def diffusion_coefficient_high_temperature(t, p):
    """Closed-form Delta(t) for kT >> w0, wc (coth(x) ~ 1/x)."""
    t = _check_time(t)
    w0, wc = p.omega0, p.omega_c
    bracket = wc - np.exp(-wc * t) * (
        wc * np.cos(w0 * t) - w0 * np.sin(w0 * t)
    )
    return (
        p.alpha_sq
        * 4
        * p.gamma0
        * p.kBT
        * wc
        * bracket
        / (wc ** 2 + w0 ** 2)
    )


def tail_bound(p, options=None):
    """Upper bound on |contribution of w > W| to Delta(t), for every t.

    For w > W the integrand is bounded by J(w) coth(W / 2kT) * 2w /
    (w^2 - w0^2) <= (2 gamma0 / pi) wc^2 coth(W / 2kT) * 2 / (w^2 - w0^2),
    which integrates in closed form.
    """
    options = options or QuadratureOptions()
    W = options.upper_limit(p)
    w0 = p.omega0
    coth = 1.0 if p.kBT == 0 else 1 / math.tanh(W / (2 * p.kBT))
    envelope = (2 * p.gamma0 / math.pi) * p.omega_c ** 2 * coth
    return p.alpha_sq * envelope * math.log((W + w0) / (W - w0)) / w0


def diffusion_coefficients(t, p, options=None, epsabs=None, epsrel=None):
    """Delta at every time in ``t`` from one vector-valued quadrature.

    Returns
    -------
        values : np.ndarray
                Delta(t), same shape as ``t``.
        error : float
                Quadrature error estimate (max-norm over ``t``) plus the
                tail bound.
    """
    options = options or QuadratureOptions()
    times = _check_time(t)
    flat = np.atleast_1d(times).ravel()
    W = options.upper_limit(p)
    w0 = p.omega0
    if epsabs is None:
        epsabs = options.epsabs
    if epsrel is None:
        epsrel = options.epsrel

    def integrand(w):
        # sin(a t) / a = t sinc(a t / pi), regular at a = 0
        kernel = flat * np.sinc((w - w0) * flat / math.pi) + flat * np.sinc(
            (w + w0) * flat / math.pi
        )
        return thermal_spectral_density(w, p) * kernel

    points = [w0] if w0 < W else None
    value, err, info = scipy.integrate.quad_vec(
        integrand,
        0.0,
        W,
        epsabs=epsabs,
        epsrel=epsrel,
        norm="max",
        limit=options.limit,
        points=points,
        full_output=True,
    )
    if not info.success:
        logger.warning(
            "Delta(t) quadrature did not reach the requested tolerance "
            "(status %s, error estimate %.3g).",
            info.status,
            err,
        )
    logger.debug(
        "Delta(t) quadrature over [0, %g]: %d evaluations, %d intervals, "
        "error %.3g",
        W,
        info.neval,
        len(info.intervals),
        err,
    )
    error = p.alpha_sq * err + tail_bound(p, options)
    return p.alpha_sq * value.reshape(times.shape), error


def diffusion_coefficient(t, p, options=None):
    """Delta(t) by adaptive quadrature in w."""
    t = _check_time(t)
    values, _ = diffusion_coefficients(np.atleast_1d(t), p, options)
    return float(values[0]) if t.ndim == 0 else values.reshape(t.shape)


def markov_rates(p):
    """Asymptotic rates (Delta_inf, gamma_inf) of the Markovian limit."""
    w0, wc = p.omega0, p.omega_c
    gamma_inf = p.alpha_sq * 2 * p.gamma0 * w0 * wc ** 2 / (wc ** 2 + w0 ** 2)
    coth = 1.0 if p.kBT == 0 else 1 / math.tanh(w0 / (2 * p.kBT))
    # pi J(w0) = 2 gamma0 w0 wc^2 / (wc^2 + w0^2)
    delta_inf = gamma_inf * coth
    return delta_inf, gamma_inf


@dataclass(frozen=True)
class CoefficientTable:
    """Rates sampled on a uniform time grid.

    The arrays are read-only; a table can be shared between threads.
    """

    t_grid: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    dt: float
    delta_inf: float
    gamma_inf: float
    mode: ModeFlag = ModeFlag.NON_MARKOVIAN
    delta_error: float = 0.0
    refinement_change: float = 0.0
    refinement_ok: bool = True

    def __post_init__(self):
        for name in ("t_grid", "delta", "gamma", "gamma1", "gamma2"):
            getattr(self, name).flags.writeable = False

    @property
    def t_max(self):
        return float(self.t_grid[-1])

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        slack = 1e-9 * max(1.0, self.t_max)
        if np.any(t < -slack) or np.any(t > self.t_max + slack):
            raise TimeRangeError(
                "t={} lies outside the table range [0, {}].".format(
                    t, self.t_max
                )
            )
        return t

    def rates(self, t, mode=ModeFlag.NON_MARKOVIAN):
        """(Delta, gamma) at time ``t``.

        Linear interpolation between grid points in non-Markovian mode,
        the asymptotic constants in Markovian mode.
        """
        t = float(self._check_range(t))
        if ModeFlag.parse(mode) is ModeFlag.MARKOVIAN:
            return self.delta_inf, self.gamma_inf
        return (
            float(np.interp(t, self.t_grid, self.delta)),
            float(np.interp(t, self.t_grid, self.gamma)),
        )

    def rates_on(self, times, mode=ModeFlag.NON_MARKOVIAN):
        """Vectorised :meth:`rates` for an array of times."""
        times = self._check_range(times)
        if ModeFlag.parse(mode) is ModeFlag.MARKOVIAN:
            return (
                np.full(times.shape, self.delta_inf),
                np.full(times.shape, self.gamma_inf),
            )
        return (
            np.interp(times, self.t_grid, self.delta),
            np.interp(times, self.t_grid, self.gamma),
        )

    def columns(self):
        """Columns for CSV export, in the order t, Delta, gamma, G1, G2."""
        return np.column_stack(
            [self.t_grid, self.delta, self.gamma, self.gamma1, self.gamma2]
        )


def gamma_violations(table):
    """Indices at which the damping rate is negative."""
    return np.flatnonzero(table.gamma < 0)


def build_coefficient_table(
    p, t_max, dt, mode=ModeFlag.NON_MARKOVIAN, options=None
):
    """Tabulate Delta, gamma, Gamma1, Gamma2 on ``0, dt, ..., t_max``.

    In Markovian mode every row holds the asymptotic rates. In
    non-Markovian mode Delta is computed twice, the second time with both
    quadrature tolerances halved; ``refinement_ok`` records whether the change
    stays below the reported error estimate.
    """
    options = options or QuadratureOptions()
    mode = ModeFlag.parse(mode)
    if not (t_max > 0 and 0 < dt <= t_max):
        raise DomainError("need t_max > 0 and 0 < dt <= t_max.")
    n_steps = int(round(t_max / dt))
    if abs(n_steps * dt - t_max) > DIVISIBILITY_SLACK * dt:
        raise DomainError("dt must divide t_max.")
    requested = n_steps + 1
    if requested > options.max_grid_points:
        raise ResourceError(requested, options.max_grid_points)

    t_grid = np.arange(requested) * dt
    delta_inf, gamma_inf = markov_rates(p)
    error = 0.0
    change = 0.0
    refinement_ok = True
    if mode is ModeFlag.MARKOVIAN:
        delta = np.full(requested, delta_inf)
        gamma = np.full(requested, gamma_inf)
    else:
        delta, error = diffusion_coefficients(t_grid, p, options)
        if options.check_refinement:
            refined, _ = diffusion_coefficients(
                t_grid,
                p,
                options,
                epsabs=0.5 * options.epsabs,
                epsrel=0.5 * options.epsrel,
            )
            change = float(np.max(np.abs(refined - delta)))
            refinement_ok = change <= error
            if not refinement_ok:
                logger.warning(
                    "Delta(t) changed by %.3g under tolerance halving, more "
                    "than the error estimate %.3g.",
                    change,
                    error,
                )
        gamma = damping_coefficient(t_grid, p)
        # both start from an empty integration interval
        delta[0] = 0.0
        gamma[0] = 0.0

    table = CoefficientTable(
        t_grid=t_grid,
        delta=delta,
        gamma=gamma,
        gamma1=delta + gamma,
        gamma2=delta - gamma,
        dt=float(dt),
        delta_inf=delta_inf,
        gamma_inf=gamma_inf,
        mode=mode,
        delta_error=float(error),
        refinement_change=change,
        refinement_ok=refinement_ok,
    )
    negative = gamma_violations(table)
    if negative.size:
        logger.warning(
            "gamma(t) is negative at %d grid points (first at t=%g).",
            negative.size,
            t_grid[negative[0]],
        )
    logger.info(
        "built %s coefficient table: %d points up to t=%g",
        mode.value,
        requested,
        t_grid[-1],
    )
    return table
