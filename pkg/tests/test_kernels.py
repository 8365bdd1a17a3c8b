import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special
import traitlets

from nmqubit.exceptions import DomainError, ResourceError, TimeRangeError
from nmqubit.kernels import (
    QuadratureOptions,
    ReservoirParams,
    build_coefficient_table,
    damping_coefficient,
    diffusion_coefficient,
    diffusion_coefficient_high_temperature,
    diffusion_coefficients,
    dissipation_kernel,
    gamma_violations,
    markov_rates,
    noise_kernel,
    noise_kernel_high_temperature,
    spectral_density,
    tail_bound,
    thermal_spectral_density,
)
from nmqubit.qubit import ModeFlag

from conftest import FAST_OPTIONS


def test_spectral_density_values():
    p = ReservoirParams(gamma0=1.0, omega_c=0.5)
    assert spectral_density(0.0, p) == 0.0
    # J(wc) = gamma0 wc / pi
    assert spectral_density(0.5, p) == pytest.approx(0.5 / math.pi)
    with pytest.raises(DomainError):
        spectral_density(-1.0, p)


def test_thermal_density_limits():
    p = ReservoirParams(omega_c=0.5, kBT=2.0)
    assert thermal_spectral_density(0.0, p) == pytest.approx(
        4 * p.gamma0 * p.kBT / math.pi
    )
    assert thermal_spectral_density(1e-8, p) == pytest.approx(
        4 * p.gamma0 * p.kBT / math.pi, rel=1e-6
    )
    cold = p.replace(kBT=0.0)
    w = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(
        thermal_spectral_density(w, cold), spectral_density(w, cold)
    )


def test_reservoir_validation():
    with pytest.raises(traitlets.TraitError):
        ReservoirParams(omega_c=0.0)
    with pytest.raises(traitlets.TraitError):
        ReservoirParams(eta=1.5)
    with pytest.raises(traitlets.TraitError):
        ReservoirParams(kBT=-1.0)
    assert ReservoirParams(omega0=2.0, omega_c=1.0).r == pytest.approx(0.5)


def test_dissipation_kernel():
    p = ReservoirParams(gamma0=1.0, omega_c=0.5)
    assert dissipation_kernel(1.0, p) == pytest.approx(
        2 * 0.25 * math.exp(-0.5)
    )
    for tau in (0.0, -1.0):
        with pytest.raises(DomainError):
            dissipation_kernel(tau, p)


@pytest.mark.parametrize("r", [0.1, 0.5, 3.0])
@pytest.mark.parametrize("kBT", [0.0, 1.0, 10.0])
def test_damping_closed_form_matches_quadrature(r, kBT):
    p = ReservoirParams(omega_c=r, kBT=kBT, alpha_sq=0.01)
    for t in np.linspace(0.1, 30.0, 12):
        expected, _ = scipy.integrate.quad(
            lambda tau: dissipation_kernel(tau, p) * math.sin(p.omega0 * tau),
            0,
            t,
            epsabs=0,
            epsrel=1e-13,
            limit=200,
        )
        assert damping_coefficient(t, p) == pytest.approx(
            p.alpha_sq * expected, rel=1e-8
        )


def test_damping_starts_at_zero_and_saturates():
    p = ReservoirParams(omega_c=0.5, alpha_sq=0.01)
    assert damping_coefficient(0.0, p) == pytest.approx(0.0, abs=1e-18)
    _, gamma_inf = markov_rates(p)
    assert damping_coefficient(80.0, p) == pytest.approx(gamma_inf, rel=1e-12)
    with pytest.raises(DomainError):
        damping_coefficient(-0.1, p)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0, 5.0])
def test_noise_kernel_zero_temperature(tau):
    p = ReservoirParams(omega_c=0.5, kBT=0.0)
    x = p.omega_c * tau
    expected = -(2 * p.gamma0 * p.omega_c ** 2 / math.pi) * (
        math.exp(-x) * scipy.special.expi(x)
        + math.exp(x) * scipy.special.expi(-x)
    )
    assert noise_kernel(tau, p) == pytest.approx(expected, rel=1e-5)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_noise_kernel_high_temperature(tau):
    p = ReservoirParams(omega_c=0.5, kBT=100.0)
    assert noise_kernel(tau, p) == pytest.approx(
        noise_kernel_high_temperature(tau, p), rel=1e-3
    )


def test_noise_kernel_diverges_at_origin():
    p = ReservoirParams()
    for tau in (0.0, -0.5):
        with pytest.raises(DomainError):
            noise_kernel(tau, p)


def test_diffusion_high_temperature_oracle():
    p = ReservoirParams(omega_c=0.5, kBT=100.0, alpha_sq=0.01)
    t = np.linspace(0.5, 20.0, 40)
    np.testing.assert_allclose(
        diffusion_coefficient(t, p),
        diffusion_coefficient_high_temperature(t, p),
        rtol=1e-2,
    )


def test_diffusion_changes_sign_for_narrow_reservoir(revival_params):
    t = np.linspace(0.0, 20.0, 401)
    delta = diffusion_coefficient(t, revival_params)
    assert delta.min() < 0
    assert delta[0] == 0.0


def test_diffusion_scalar_and_array_agree():
    p = ReservoirParams(omega_c=0.5, kBT=1.0)
    grid = diffusion_coefficient(np.array([1.0, 2.0]), p)
    assert diffusion_coefficient(2.0, p) == pytest.approx(grid[1], rel=1e-7)
    assert isinstance(diffusion_coefficient(2.0, p), float)


# algebraic approach at kBT = 0, exponential at high temperature
@pytest.mark.parametrize("kBT, rel", [(0.0, 5e-3), (10.0, 1e-4)])
def test_diffusion_approaches_markov_limit(kBT, rel):
    p = ReservoirParams(omega_c=0.5, kBT=kBT, alpha_sq=0.01)
    delta_inf, _ = markov_rates(p)
    assert diffusion_coefficient(40.0, p) == pytest.approx(
        delta_inf, rel=rel
    )


def test_markov_rates():
    p = ReservoirParams(omega_c=0.5, kBT=0.0, alpha_sq=0.01)
    delta_inf, gamma_inf = markov_rates(p)
    # pi J(w0) = 2 gamma0 w0 wc^2 / (wc^2 + w0^2)
    assert gamma_inf == pytest.approx(0.01 * math.pi * spectral_density(1, p))
    assert delta_inf == gamma_inf
    hot_delta, hot_gamma = markov_rates(p.replace(kBT=10.0))
    assert hot_gamma == gamma_inf
    assert hot_delta == pytest.approx(gamma_inf / math.tanh(1 / 20.0))


def test_tail_bound_is_small():
    p = ReservoirParams(omega_c=0.5, kBT=10.0, alpha_sq=0.01)
    bound = tail_bound(p)
    assert 0 < bound < 1e-4
    wider = tail_bound(p, QuadratureOptions(cutoff_factor=500.0))
    assert wider < bound


def test_diffusion_coefficients_error_estimate():
    p = ReservoirParams(omega_c=0.5, kBT=1.0)
    values, error = diffusion_coefficients(np.linspace(0, 5, 6), p)
    assert values.shape == (6,)
    assert error >= tail_bound(p)


def test_table_structure():
    p = ReservoirParams(omega_c=0.5, kBT=1.0, alpha_sq=0.01)
    table = build_coefficient_table(p, 2.0, 0.1, ModeFlag.NON_MARKOVIAN)
    assert len(table.t_grid) == 21
    assert table.t_grid[0] == 0.0
    assert table.t_max == pytest.approx(2.0)
    assert table.delta[0] == 0.0 and table.gamma[0] == 0.0
    np.testing.assert_array_equal(table.gamma1, table.delta + table.gamma)
    np.testing.assert_array_equal(table.gamma2, table.delta - table.gamma)
    assert table.refinement_ok
    assert gamma_violations(table).size == 0
    with pytest.raises(ValueError):
        table.delta[3] = 1.0


def test_table_rates():
    p = ReservoirParams(omega_c=0.5, kBT=1.0, alpha_sq=0.01)
    table = build_coefficient_table(
        p, 2.0, 0.1, ModeFlag.NON_MARKOVIAN, QuadratureOptions(**FAST_OPTIONS)
    )
    delta, gamma = table.rates(table.t_grid[7])
    assert delta == table.delta[7] and gamma == table.gamma[7]
    midpoint = table.rates(0.75)
    assert midpoint[0] == pytest.approx(
        0.5 * (table.delta[7] + table.delta[8])
    )
    assert table.rates(1.0, ModeFlag.MARKOVIAN) == (
        table.delta_inf,
        table.gamma_inf,
    )
    deltas, gammas = table.rates_on(table.t_grid)
    np.testing.assert_array_equal(deltas, table.delta)
    with pytest.raises(TimeRangeError):
        table.rates(2.5)
    with pytest.raises(TimeRangeError):
        table.rates_on([-1.0, 0.0])


def test_markov_table_is_constant():
    p = ReservoirParams(omega_c=3.0, kBT=10.0)
    table = build_coefficient_table(p, 5.0, 0.5, "markovian")
    delta_inf, gamma_inf = markov_rates(p)
    assert np.all(table.delta == delta_inf)
    assert np.all(table.gamma == gamma_inf)
    assert table.mode is ModeFlag.MARKOVIAN


def test_table_errors():
    p = ReservoirParams()
    with pytest.raises(ResourceError):
        build_coefficient_table(
            p, 10.0, 0.01, options=QuadratureOptions(max_grid_points=100)
        )
    with pytest.raises(DomainError):
        build_coefficient_table(p, 1.0, 0.3)
    with pytest.raises(DomainError):
        build_coefficient_table(p, 1.0, 2.0)


def test_table_is_reproducible():
    p = ReservoirParams(omega_c=0.1, kBT=10.0)
    options = QuadratureOptions(**FAST_OPTIONS)
    a = build_coefficient_table(p, 3.0, 0.05, options=options)
    b = build_coefficient_table(p, 3.0, 0.05, options=options)
    np.testing.assert_array_equal(a.columns(), b.columns())
