import math

import numpy as np
import pytest

from nmqubit.exceptions import DomainError, ValidationError
from nmqubit.kernels import ReservoirParams
from nmqubit.qubit import (
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Z,
    BlochState,
    ControlInput,
    ModeFlag,
    bloch_from_density,
    bloch_image,
    check_density,
    coherence_factor,
    control_jacobian,
    density_from_bloch,
    diffusion,
    dissipator,
    drift,
    drift_from_rates,
    drift_jacobian,
    matrix_drift_oracle,
    meas_superop,
    populations,
    purity,
    target_state,
    transfer_fidelity,
)


def random_ball(rng, n):
    directions = rng.standard_normal((n, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    return directions * rng.uniform(0, 1, n)[:, None] ** (1 / 3)


def test_density_roundtrip():
    s = BlochState(0.3, -0.2, 0.5)
    rho = density_from_bloch(s)
    assert np.trace(rho) == pytest.approx(1.0)
    assert bloch_from_density(rho) == BlochState(
        pytest.approx(0.3), pytest.approx(-0.2), pytest.approx(0.5)
    )
    assert populations(s) == (pytest.approx(0.75), pytest.approx(0.25))


def test_density_roundtrip_on_random_states():
    states = random_ball(np.random.default_rng(5), 1000)
    back = np.array(
        [np.asarray(bloch_from_density(density_from_bloch(s))) for s in states]
    )
    assert np.max(np.abs(back - states)) <= 1e-14


def test_check_density_rejects():
    with pytest.raises(ValidationError):
        check_density(np.eye(3) / 3)
    with pytest.raises(ValidationError):
        check_density(np.array([[1, 1j], [0, 0]]))
    with pytest.raises(ValidationError):
        check_density(np.eye(2))


def test_bloch_state_validation():
    assert BlochState(0, 0, 1).validate().norm == 1
    with pytest.raises(ValidationError):
        BlochState(1, 1, 1).validate()
    with pytest.raises(ValidationError):
        BlochState(float("nan"), 0, 0).validate()
    with pytest.raises(ValidationError):
        ControlInput(float("inf"), 0.0)
    np.testing.assert_array_equal(np.asarray(BlochState(1, 2, 3)), [1, 2, 3])


def test_mode_flag_parse():
    assert ModeFlag.parse("markovian") is ModeFlag.MARKOVIAN
    assert ModeFlag.parse("Non-Markovian") is ModeFlag.NON_MARKOVIAN
    assert ModeFlag.parse(ModeFlag.MARKOVIAN) is ModeFlag.MARKOVIAN
    with pytest.raises(ValidationError):
        ModeFlag.parse("lindblad")


def test_superoperators():
    rho = density_from_bloch([0.1, 0.2, 0.3])
    # every generator term is traceless
    assert abs(np.trace(dissipator(SIGMA_MINUS, rho))) < 1e-15
    assert abs(np.trace(meas_superop(SIGMA_Z, rho))) < 1e-15
    # the ground state |1> is a fixed point of D[sigma_minus]
    ground = density_from_bloch([0, 0, -1])
    np.testing.assert_allclose(dissipator(SIGMA_MINUS, ground), 0)
    np.testing.assert_allclose(bloch_image(SIGMA_X), [2, 0, 0])


def test_measurement_terms_in_the_bloch_picture():
    p = ReservoirParams(M=0.05, eta=0.7)
    for x, y, z in random_ball(np.random.default_rng(9), 200):
        rho = density_from_bloch([x, y, z])
        innovation = bloch_image(meas_superop(-SIGMA_Z / 2, rho))
        np.testing.assert_allclose(
            innovation, [x * z, y * z, z * z - 1], rtol=0, atol=1e-14
        )
        np.testing.assert_allclose(
            math.sqrt(p.M * p.eta) * innovation,
            diffusion([x, y, z], p),
            rtol=0,
            atol=1e-14,
        )
        np.testing.assert_allclose(
            bloch_image(dissipator(SIGMA_Z, rho)),
            [-2 * x, -2 * y, 0],
            rtol=0,
            atol=1e-14,
        )


def test_bloch_matrix_duality(short_fig2c_table):
    rng = np.random.default_rng(7)
    p = ReservoirParams(omega_c=0.5, kBT=10.0, alpha_sq=0.01, M=0.05)
    states = random_ball(rng, 1000)
    controls = rng.standard_normal((1000, 2))
    times = rng.uniform(0, short_fig2c_table.t_max, 1000)
    for s, u, t in zip(states, controls, times):
        for mode in ModeFlag:
            matrix = matrix_drift_oracle(
                density_from_bloch(s), t, u, short_fig2c_table, p, mode
            )
            np.testing.assert_allclose(
                bloch_image(matrix),
                drift(s, t, u, short_fig2c_table, p, mode),
                rtol=0,
                atol=1e-12,
            )


def test_drift_batches_rowwise():
    rng = np.random.default_rng(3)
    p = ReservoirParams(M=0.05)
    states = random_ball(rng, 16)
    controls = rng.standard_normal((16, 2))
    batch = drift_from_rates(states, 0.02, 0.01, controls, p)
    for row in range(16):
        single = drift_from_rates(states[row], 0.02, 0.01, controls[row], p)
        np.testing.assert_array_equal(batch[row], single)


def test_drift_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    p = ReservoirParams(M=0.05)
    h = 1e-6
    for s, u in zip(random_ball(rng, 20), rng.standard_normal((20, 2))):
        jac = drift_jacobian(s, 0.03, u, p)
        ujac = control_jacobian(s)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (
                drift_from_rates(s + e, 0.03, 0.01, u, p)
                - drift_from_rates(s - e, 0.03, 0.01, u, p)
            ) / (2 * h)
            np.testing.assert_allclose(jac[:, i], fd, atol=1e-6)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (
                drift_from_rates(s, 0.03, 0.01, u + e, p)
                - drift_from_rates(s, 0.03, 0.01, u - e, p)
            ) / (2 * h)
            np.testing.assert_allclose(ujac[:, j], fd, atol=1e-6)


def test_poles_are_fixed_points_of_the_noise():
    p = ReservoirParams(M=0.05, eta=1.0)
    np.testing.assert_array_equal(diffusion([0, 0, 1], p), 0)
    np.testing.assert_array_equal(diffusion([0, 0, -1], p), 0)
    assert diffusion([0.5, 0, 0], p)[2] == pytest.approx(-math.sqrt(0.05))


def test_target_state_precesses():
    s0 = (math.sqrt(2) / 4, math.sqrt(2) / 4, math.sqrt(3) / 2)
    assert target_state(0.0, s0, 1.0) == BlochState(*map(pytest.approx, s0))
    path = target_state(np.linspace(0, 10, 50), s0, 1.0)
    assert path.shape == (50, 3)
    np.testing.assert_allclose(np.linalg.norm(path, axis=1), 1.0)
    quarter = target_state(math.pi / 2, [1, 0, 0], 1.0)
    assert quarter.y == pytest.approx(1.0)


def test_coherence_and_fidelity():
    s0 = [0.6, 0.0, 0.8]
    assert coherence_factor([0.3, 0.0, 0.0], s0) == pytest.approx(0.5)
    assert coherence_factor([0.0, 0.6, 0.8], s0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        coherence_factor([0.1, 0.0, 0.0], [0.0, 0.0, 1.0])
    assert purity([0, 0, 1]) == 1.0
    assert purity([0, 0, 0]) == 0.5
    assert transfer_fidelity([0, 0, 1], [0, 0, 1]) == 1.0
    assert transfer_fidelity([0, 0, 1], [0, 0, -1]) == 0.0
