"""Trajectory ensembles, mode comparisons and temperature scans."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import traitlets

from .control import feedback_policy, forward_backward_sweep
from .exceptions import DomainError, ValidationError
from .kernels import QuadratureOptions, build_coefficient_table
from .policies import ZeroPolicy
from .qubit import ModeFlag, coherence_factor
from .sde import DEFAULT_INITIAL_STATE, deterministic_path, integrate_batch

logger = logging.getLogger(__name__)

# noise namespaces of the compare_modes branches; 0 is the default stream
CONTROLLED_STREAM = 1
UNCONTROLLED_STREAM = 2
MARKOVIAN_STREAM = 3


@dataclass(frozen=True)
class EnsembleStats:
    """Per-time mean and sample variance of Lambda and of the Bloch vector."""

    times: np.ndarray
    mean_lambda: np.ndarray
    var_lambda: np.ndarray
    mean_states: np.ndarray
    var_states: np.ndarray
    trajectory_count: int
    master_seed: int
    clamp_rate: float
    stream: int = 0
    mode: str = ModeFlag.NON_MARKOVIAN.value
    policy: str = "none"

    @property
    def standard_error_states(self):
        return np.sqrt(self.var_states / self.trajectory_count)

    @property
    def standard_error_lambda(self):
        return np.sqrt(self.var_lambda / self.trajectory_count)

    def columns(self):
        """Columns t, mean_Lambda, var_Lambda, mean_x/y/z, var_x/y/z."""
        return np.column_stack(
            [
                self.times,
                self.mean_lambda,
                self.var_lambda,
                self.mean_states,
                self.var_states,
            ]
        )

    def metadata(self):
        return {
            "trajectory_count": self.trajectory_count,
            "master_seed": self.master_seed,
            "stream": self.stream,
            "clamp_rate": self.clamp_rate,
            "mode": self.mode,
            "policy": self.policy,
        }


class _Moments:
    """Running count, mean and sum of squared deviations."""

    def __init__(self, count, mean, m2):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, samples):
        mean = np.mean(samples, axis=0)
        deviation = samples - mean
        return cls(len(samples), mean, np.sum(deviation * deviation, axis=0))

    def merge(self, other):
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / count)
        m2 = (
            self.m2
            + other.m2
            + delta * delta * (self.count * other.count / count)
        )
        return _Moments(count, mean, m2)

    def variance(self):
        if self.count < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.count - 1)


def _chunks(n, size):
    return [
        np.arange(start, min(start + size, n)) for start in range(0, n, size)
    ]


def run_ensemble(
    p,
    table,
    cfg,
    policy=None,
    N=500,
    mode=ModeFlag.NON_MARKOVIAN,
    s0=None,
    stream=0,
):
    """Statistics of trajectories ``0..N-1`` of one noise stream.

    Trajectories are integrated in chunks of ``cfg.chunk_size`` on
    ``cfg.workers`` threads. Chunk boundaries do not depend on the number
    of workers and the chunk statistics are merged in index order, so the
    result is the same for every worker count.
    """
    if N < 1:
        raise DomainError("an ensemble needs at least one trajectory.")
    policy = policy or ZeroPolicy()
    mode = ModeFlag.parse(mode)
    s0 = DEFAULT_INITIAL_STATE if s0 is None else s0
    chunks = _chunks(int(N), cfg.chunk_size)

    def reduce_chunk(indices):
        batch = integrate_batch(
            p, table, s0, cfg, policy, mode, indices, stream
        )
        logger.debug(
            "chunk %d..%d done (%d clamps)",
            indices[0],
            indices[-1],
            int(batch.clamp_count.sum()),
        )
        return (
            _Moments.of(batch.lambda_t),
            _Moments.of(batch.states),
            int(batch.clamp_count.sum()),
            batch.times,
        )

    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(reduce_chunk, c) for c in chunks]
            results = [f.result() for f in futures]
    else:
        results = [reduce_chunk(c) for c in chunks]

    lam, states, clamps, times = results[0]
    for other_lam, other_states, other_clamps, _ in results[1:]:
        lam = lam.merge(other_lam)
        states = states.merge(other_states)
        clamps += other_clamps

    stats = EnsembleStats(
        times=times,
        mean_lambda=lam.mean,
        var_lambda=lam.variance(),
        mean_states=states.mean,
        var_states=states.variance(),
        trajectory_count=int(N),
        master_seed=cfg.master_seed,
        clamp_rate=clamps / (int(N) * cfg.n_steps),
        stream=stream,
        mode=mode.value,
        policy=getattr(policy, "name", type(policy).__name__),
    )
    logger.info(
        "ensemble of %d %s trajectories (stream %d): mean Lambda(T) = %.6g",
        N,
        mode.value,
        stream,
        stats.mean_lambda[-1],
    )
    return stats


class AcceptanceCriteria(traitlets.HasTraits):
    """Margins of the controlled-versus-uncontrolled checks."""

    lambda_gap = traitlets.Float(0.2)
    lost_threshold = traitlets.Float(0.1, min=0.0)

    def as_dict(self):
        return {
            "lambda_gap": self.lambda_gap,
            "lost_threshold": self.lost_threshold,
        }


@dataclass(frozen=True)
class ModeComparison:
    """The four curves of a controlled/uncontrolled comparison."""

    controlled: EnsembleStats
    uncontrolled: EnsembleStats
    markovian: EnsembleStats
    target: np.ndarray
    control: object = None

    @property
    def times(self):
        return self.controlled.times

    def branches(self):
        return {
            "controlled": self.controlled,
            "uncontrolled": self.uncontrolled,
            "markovian": self.markovian,
        }

    def check(self, acceptance=None):
        """Evaluate the horizon-end checks of the comparison."""
        acceptance = acceptance or AcceptanceCriteria()
        controlled = float(self.controlled.mean_lambda[-1])
        uncontrolled = float(self.uncontrolled.mean_lambda[-1])
        markovian = float(self.markovian.mean_lambda[-1])
        gap = controlled - uncontrolled
        return {
            "controlled_lambda": controlled,
            "uncontrolled_lambda": uncontrolled,
            "markovian_lambda": markovian,
            "lambda_gap": gap,
            "gap_ok": gap >= acceptance.lambda_gap,
            "uncontrolled_lost": uncontrolled < acceptance.lost_threshold,
            "markovian_lost": markovian < acceptance.lost_threshold,
            "solver_converged": bool(
                self.control is not None and self.control.converged
            ),
        }


def compare_modes(
    p,
    oc,
    cfg,
    N=500,
    s0=None,
    table=None,
    markov_table=None,
    options=None,
):
    """Controlled, uncontrolled and Markovian ensembles plus the target.

    The control is synthesised on the non-Markovian rates and applied as
    state feedback. Each branch draws from its own noise namespace.
    """
    s0 = DEFAULT_INITIAL_STATE if s0 is None else s0
    horizon = max(cfg.t_max, oc.t_max)
    if table is None:
        table = build_coefficient_table(
            p, horizon, oc.dt, ModeFlag.NON_MARKOVIAN, options
        )
    if markov_table is None:
        markov_table = build_coefficient_table(
            p, horizon, oc.dt, ModeFlag.MARKOVIAN, options
        )
    result = forward_backward_sweep(p, table, s0, oc, ModeFlag.NON_MARKOVIAN)
    controlled = run_ensemble(
        p,
        table,
        cfg,
        feedback_policy(result),
        N,
        ModeFlag.NON_MARKOVIAN,
        s0,
        CONTROLLED_STREAM,
    )
    uncontrolled = run_ensemble(
        p,
        table,
        cfg,
        ZeroPolicy(),
        N,
        ModeFlag.NON_MARKOVIAN,
        s0,
        UNCONTROLLED_STREAM,
    )
    markovian = run_ensemble(
        p,
        markov_table,
        cfg,
        ZeroPolicy(),
        N,
        ModeFlag.MARKOVIAN,
        s0,
        MARKOVIAN_STREAM,
    )
    return ModeComparison(
        controlled=controlled,
        uncontrolled=uncontrolled,
        markovian=markovian,
        target=np.ones_like(controlled.times),
        control=result,
    )


@dataclass(frozen=True)
class TemperatureScan:
    """Control-free Lambda(t) per (mode, kBT)."""

    times: np.ndarray
    kBT_values: tuple
    curves: dict = field(default_factory=dict)

    def curve(self, mode, kBT):
        return self.curves[(ModeFlag.parse(mode).value, float(kBT))]

    def sup_difference(self, kBT):
        """max_t |Lambda_nonmarkovian - Lambda_markovian| at one kBT."""
        return float(
            np.max(
                np.abs(
                    self.curve(ModeFlag.NON_MARKOVIAN, kBT)
                    - self.curve(ModeFlag.MARKOVIAN, kBT)
                )
            )
        )


def temperature_scan(
    p, kBT_values, cfg, s0=None, options=None, table_dt=0.01
):
    """Deterministic Lambda(t) with u = 0 and M = 0 for each temperature.

    Both modes are integrated with the accurate reference integrator on
    the coefficient grid ``0, table_dt, ..., cfg.t_max``.
    """
    kBT_values = tuple(float(v) for v in kBT_values)
    if not kBT_values:
        raise ValidationError("the temperature list is empty.")
    s0 = DEFAULT_INITIAL_STATE if s0 is None else s0
    options = options or QuadratureOptions()
    n = int(round(cfg.t_max / table_dt))
    times = np.arange(n + 1) * table_dt
    curves = {}
    for kBT in kBT_values:
        scan_params = p.replace(kBT=kBT, M=0.0)
        for mode in ModeFlag:
            table = build_coefficient_table(
                scan_params, times[-1], table_dt, mode, options
            )
            path = deterministic_path(scan_params, table, s0, times, mode=mode)
            curves[(mode.value, kBT)] = coherence_factor(path, s0)
        logger.info(
            "kBT=%g: sup |Lambda_NM - Lambda_M| = %.4g",
            kBT,
            np.max(
                np.abs(
                    curves[(ModeFlag.NON_MARKOVIAN.value, kBT)]
                    - curves[(ModeFlag.MARKOVIAN.value, kBT)]
                )
            ),
        )
    return TemperatureScan(times=times, kBT_values=kBT_values, curves=curves)


def lambda_is_monotone(values, slack=1e-12):
    """Whether a curve never increases by more than ``slack``."""
    return bool(np.all(np.diff(values) <= slack))


def local_minimum_then_rise(values, slack=1e-9):
    """Whether a curve rises again after decreasing."""
    diffs = np.diff(values)
    falling = np.flatnonzero(diffs < -slack)
    if falling.size == 0:
        return False
    return bool(np.any(diffs[falling[0] :] > slack))


def standard_error_bound(stats, component=2, sigmas=4.0):
    """``sigmas`` standard errors of the mean of one Bloch component at T."""
    return sigmas * math.sqrt(
        stats.var_states[-1, component] / stats.trajectory_count
    )
