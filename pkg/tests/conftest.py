import math

import numpy as np
import pytest

from nmqubit.kernels import (
    QuadratureOptions,
    ReservoirParams,
    build_coefficient_table,
)
from nmqubit.qubit import ModeFlag
from nmqubit.sde import DEFAULT_INITIAL_STATE, IntegratorConfig

# quadrature settings for tests that only need moderately accurate rates
FAST_OPTIONS = dict(check_refinement=False)


@pytest.fixture
def initial_state():
    return np.array(DEFAULT_INITIAL_STATE)


@pytest.fixture
def fig2c_params():
    """r = 0.5, kBT = 10 with the measurement settings of the control runs."""
    return ReservoirParams(
        omega0=1.0,
        gamma0=1.0,
        omega_c=0.5,
        kBT=10.0,
        alpha_sq=0.01,
        M=0.05,
        eta=1.0,
    )


@pytest.fixture
def revival_params():
    """r = 0.1, kBT = 10: Delta(t) changes sign."""
    return ReservoirParams(omega_c=0.1, kBT=10.0, alpha_sq=0.01, M=0.0)


@pytest.fixture
def no_rates_params():
    """Measurement only: alpha^2 = 0 switches off both rates."""
    return ReservoirParams(alpha_sq=0.0, M=0.05, eta=1.0)


@pytest.fixture(scope="session")
def fig2c_table():
    p = ReservoirParams(omega_c=0.5, kBT=10.0, alpha_sq=0.01, M=0.05)
    return build_coefficient_table(
        p, 15.0, 0.01, ModeFlag.NON_MARKOVIAN, QuadratureOptions()
    )


@pytest.fixture(scope="session")
def short_fig2c_table():
    p = ReservoirParams(omega_c=0.5, kBT=10.0, alpha_sq=0.01, M=0.05)
    return build_coefficient_table(
        p, 5.0, 0.01, ModeFlag.NON_MARKOVIAN, QuadratureOptions(**FAST_OPTIONS)
    )


def zero_rate_table(t_max, dt=0.01):
    """Table with Delta = gamma = 0 (no quadrature needed)."""
    return build_coefficient_table(
        ReservoirParams(alpha_sq=0.0), t_max, dt, ModeFlag.MARKOVIAN
    )


@pytest.fixture
def zero_table():
    return zero_rate_table(10.0)


def integrator(**kwargs):
    values = dict(dt=1e-3, t_max=1.0, master_seed=1234)
    values.update(kwargs)
    return IntegratorConfig(**values)


def bloch_norms(states):
    states = np.asarray(states)
    return np.sqrt(np.sum(states ** 2, axis=-1))


SQRT3_2 = math.sqrt(3) / 2
