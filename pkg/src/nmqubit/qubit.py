"""Qubit states, superoperators and the Bloch equations of motion.

The qubit density matrix is parametrised by its Bloch vector,

    rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2,

so that the populations are rho_00 = (1 + z) / 2 and rho_11 = (1 - z) / 2.
Functions that act on states accept either a :class:`BlochState` or a numpy
array whose last axis has length three; the latter lets the integrators
push a whole batch of trajectories through one call.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, ValidationError

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_minus maps |0> (z = +1) to |1> (z = -1)
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
SIGMA_PLUS = (SIGMA_X + 1j * SIGMA_Y) / 2
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

# measured observable F = -sigma_z / 2
MEASUREMENT_OPERATOR = -SIGMA_Z / 2

NUMERICAL_SLACK = 1e-9
# a step must divide a horizon to this fraction of a step
DIVISIBILITY_SLACK = 1e-6


class ModeFlag(str, enum.Enum):
    """Which reservoir rates drive the dynamics."""

    NON_MARKOVIAN = "nonmarkovian"
    MARKOVIAN = "markovian"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise ValidationError(
                "mode must be one of {}, but {!r} was provided.".format(
                    [m.value for m in cls], value
                )
            )


@dataclass(frozen=True)
class BlochState:
    """A qubit state in Bloch coordinates."""

    x: float
    y: float
    z: float

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or float)

    @classmethod
    def from_array(cls, values):
        x, y, z = (float(v) for v in np.asarray(values, dtype=float))
        return cls(x, y, z)

    @property
    def norm(self):
        return math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)

    def validate(self, slack=NUMERICAL_SLACK):
        """Raise if the state lies outside the Bloch ball."""
        values = (self.x, self.y, self.z)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("Bloch components must be finite.")
        if self.norm ** 2 > 1 + slack:
            raise ValidationError(
                "Bloch vector {} has squared norm {:.6g} > 1.".format(
                    values, self.norm ** 2
                )
            )
        return self


@dataclass(frozen=True)
class ControlInput:
    """Control amplitudes of H_C = (u_x sigma_x + u_y sigma_y) / 2."""

    u_x: float
    u_y: float

    def __post_init__(self):
        if not (math.isfinite(self.u_x) and math.isfinite(self.u_y)):
            raise ValidationError("control amplitudes must be finite.")

    def __array__(self, dtype=None, copy=None):
        return np.array([self.u_x, self.u_y], dtype=dtype or float)


ZERO_CONTROL = ControlInput(0.0, 0.0)


def _as_states(s):
    states = np.asarray(s, dtype=float)
    if states.shape[-1:] != (3,):
        raise ValidationError(
            "states need a trailing axis of length 3, got shape {}.".format(
                states.shape
            )
        )
    return states


def _as_controls(u):
    controls = np.asarray(u, dtype=float)
    if controls.shape[-1:] != (2,):
        raise ValidationError(
            "controls need a trailing axis of length 2, got shape {}.".format(
                controls.shape
            )
        )
    return controls


# ---------------------------------------------------------------------------
# matrix picture


def check_density(rho, atol=1e-12):
    """Validate a 2x2 density matrix (``DensityMatrix2``) and return it."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValidationError("a qubit density matrix must be 2x2.")
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        raise ValidationError("density matrix is not Hermitian.")
    if abs(np.trace(rho) - 1) > atol:
        raise ValidationError(
            "density matrix has trace {:.6g}, not 1.".format(
                np.trace(rho).real
            )
        )
    return rho


def density_from_bloch(s):
    """Return rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2."""
    x, y, z = _as_states(s)
    return 0.5 * (IDENTITY + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def bloch_image(op):
    """Bloch components tr(sigma_i op) of a 2x2 operator."""
    op = np.asarray(op, dtype=complex)
    return np.array([np.trace(p @ op).real for p in PAULIS])


def bloch_from_density(rho, atol=1e-12):
    """Inverse of :func:`density_from_bloch`."""
    rho = check_density(rho, atol=atol)
    return BlochState.from_array(
        [
            2 * rho[0, 1].real,
            -2 * rho[0, 1].imag,
            (rho[0, 0] - rho[1, 1]).real,
        ]
    )


def commutator(a, b):
    return a @ b - b @ a


def dissipator(L, rho):
    """Lindblad dissipator D[L]rho = L rho L^+ - {L^+ L, rho} / 2."""
    L = np.asarray(L, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def meas_superop(A, rho):
    """Innovation term H[A]rho = A rho + rho A - tr(A rho + rho A) rho."""
    A = np.asarray(A, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    sym = A @ rho + rho @ A
    return sym - np.trace(sym) * rho


def matrix_drift_oracle(rho, t, u, table, p, mode=ModeFlag.NON_MARKOVIAN):
    """Deterministic generator of the controlled master equation.

    Assembles the rate in the matrix picture from commutators and
    dissipators; its Bloch image equals :func:`drift`.
    """
    delta, gamma = table.rates(t, mode)
    u_x, u_y = _as_controls(u)
    rho = np.asarray(rho, dtype=complex)
    gamma1 = delta + gamma
    gamma2 = delta - gamma
    return (
        -0.5j * p.omega0 * commutator(SIGMA_Z, rho)
        - 0.5j * u_x * commutator(SIGMA_X, rho)
        - 0.5j * u_y * commutator(SIGMA_Y, rho)
        + gamma1 * dissipator(SIGMA_MINUS, rho)
        + gamma2 * dissipator(SIGMA_PLUS, rho)
        + p.M * dissipator(MEASUREMENT_OPERATOR, rho)
    )


# ---------------------------------------------------------------------------
# Bloch picture


def drift_from_rates(s, delta, gamma, u, p):
    """Bloch drift for given rates Delta, gamma.

    ``s`` may carry leading batch axes; ``u`` broadcasts against it.
    Every component is computed elementwise, so a row of a batch gives
    bitwise the same result as the same row on its own.
    """
    states = _as_states(s)
    controls = _as_controls(u)
    x, y, z = states[..., 0], states[..., 1], states[..., 2]
    u_x, u_y = controls[..., 0], controls[..., 1]
    transverse = delta + 0.5 * p.M
    out = np.empty(np.broadcast(x, u_x).shape + (3,))
    out[..., 0] = -transverse * x - p.omega0 * y + u_y * z
    out[..., 1] = p.omega0 * x - transverse * y - u_x * z
    out[..., 2] = -u_y * x + u_x * y - 2 * delta * z - 2 * gamma
    return out


def drift(s, t, u, table, p, mode=ModeFlag.NON_MARKOVIAN):
    """Drift (dx, dy, dz)/dt of the conditioned Bloch equations."""
    delta, gamma = table.rates(t, mode)
    return drift_from_rates(s, delta, gamma, u, p)


def drift_jacobian(s, delta, u, p):
    """Jacobian of :func:`drift_from_rates` with respect to (x, y, z)."""
    x, y, z = _as_states(s)
    u_x, u_y = _as_controls(u)
    transverse = delta + 0.5 * p.M
    return np.array(
        [
            [-transverse, -p.omega0, u_y],
            [p.omega0, -transverse, -u_x],
            [-u_y, u_x, -2 * delta],
        ]
    )


def control_jacobian(s):
    """Jacobian of the drift with respect to (u_x, u_y), shape (3, 2)."""
    x, y, z = _as_states(s)
    return np.array([[0.0, z], [-z, 0.0], [y, -x]])


def diffusion(s, p):
    """Measurement back-action sqrt(M eta) (xz, yz, z^2 - 1)."""
    states = _as_states(s)
    x, y, z = states[..., 0], states[..., 1], states[..., 2]
    scale = math.sqrt(p.M * p.eta)
    out = np.empty(states.shape)
    out[..., 0] = scale * (x * z)
    out[..., 1] = scale * (y * z)
    out[..., 2] = scale * (z * z - 1)
    return out


def target_state(t, s0, omega0):
    """Free precession of ``s0`` about z, the control target.

    Returns a :class:`BlochState` for scalar ``t`` and an ``(n, 3)`` array
    for an array of times.
    """
    x0, y0, z0 = _as_states(s0)
    times = np.asarray(t, dtype=float)
    c = np.cos(omega0 * times)
    s = np.sin(omega0 * times)
    path = np.stack(
        [x0 * c - y0 * s, x0 * s + y0 * c, np.full_like(c, z0)], axis=-1
    )
    if times.ndim == 0:
        return BlochState.from_array(path)
    return path


def coherence_factor(s, s0):
    """Decoherence factor sqrt(x^2 + y^2) / sqrt(x0^2 + y0^2)."""
    x0, y0, _ = _as_states(s0)
    initial = math.hypot(x0, y0)
    if initial == 0:
        raise DomainError(
            "the coherence factor is undefined for an initial state "
            "without transverse components."
        )
    states = _as_states(s)
    return np.hypot(states[..., 0], states[..., 1]) / initial


def populations(s):
    """Return (rho_00, rho_11) = ((1 + z) / 2, (1 - z) / 2)."""
    z = _as_states(s)[..., 2]
    return 0.5 * (1 + z), 0.5 * (1 - z)


def purity(s):
    """tr rho^2 = (1 + |s|^2) / 2."""
    states = _as_states(s)
    return 0.5 * (1 + np.sum(states ** 2, axis=-1))


def transfer_fidelity(s, s_target):
    """State-transfer fidelity tr(rho rho_T) = (1 + s . s_T) / 2."""
    return 0.5 * (
        1 + np.sum(_as_states(s) * _as_states(s_target), axis=-1)
    )
