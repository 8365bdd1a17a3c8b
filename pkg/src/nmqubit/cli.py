"""Command-line front end.

Every command resolves its configuration, echoes it as YAML to stdout and
to ``<output_dir>/resolved_config.yaml``, then writes CSV files. Exit
codes: 0 success, 1 integration or policy failure, 2 invalid
configuration, 3 the control solver did not converge (outputs are still
written), 4 input/output failure.
"""
import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import output
from .config import parse_config
from .control import (
    feedback_policy,
    forward_backward_sweep,
    open_loop_policy,
)
from .ensemble import compare_modes, run_ensemble, temperature_scan
from .exceptions import ConfigError, ConfigParseError, NMQubitError
from .kernels import build_coefficient_table
from .policies import ZeroPolicy
from .presets import FIG2_PANELS, PRESETS
from .qubit import ModeFlag
from .sde import simulate
from .version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4


def _header(cfg, command, **extra):
    return output.provenance(
        command=command,
        version=__version__,
        preset=cfg.preset,
        mode=cfg.mode,
        master_seed=cfg.integrator.master_seed,
        reservoir=cfg.reservoir.as_dict(),
        initial_state=list(cfg.initial_state),
        **extra
    )


def _table(cfg, mode=None):
    """Coefficient table covering both the integrator and control horizons."""
    mode = cfg.mode_flag if mode is None else ModeFlag.parse(mode)
    dt = cfg.coefficients.dt
    horizon = max(cfg.integrator.t_max, cfg.control.t_max)
    t_max = math.ceil(horizon / dt - 1e-9) * dt
    return build_coefficient_table(
        cfg.reservoir, t_max, dt, mode, cfg.coefficients
    )


def _solve(cfg, table):
    return forward_backward_sweep(
        cfg.reservoir, table, cfg.initial_state, cfg.control, cfg.mode_flag
    )


def _summary(result):
    return (
        "summary: cost={!r}, zero_control_cost={!r}, iterations={}, "
        "converged={}, tol={!r}, residual={!r}".format(
            result.cost,
            result.zero_control_cost,
            result.iterations,
            result.converged,
            result.tol,
            result.residual,
        )
    )


def cmd_coeffs(cfg, out):
    table = _table(cfg)
    output.write_csv(
        out / "coefficients.csv",
        table.columns(),
        output.COEFFICIENT_COLUMNS,
        _header(
            cfg,
            "coeffs",
            delta_inf=table.delta_inf,
            gamma_inf=table.gamma_inf,
            delta_error=table.delta_error,
            refinement_ok=table.refinement_ok,
        ),
    )
    return EXIT_OK


def cmd_control(cfg, out):
    table = _table(cfg)
    result = _solve(cfg, table)
    output.write_csv(
        out / "control.csv",
        result.columns(),
        output.CONTROL_COLUMNS,
        _header(cfg, "control", control=cfg.control.as_dict()),
        footer=_summary(result),
    )
    print(_summary(result))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _policy(cfg, table):
    if cfg.policy == "none":
        return ZeroPolicy(), None
    result = _solve(cfg, table)
    if not result.converged:
        logger.warning(
            "using the control of a sweep that did not converge "
            "(residual %.3g)",
            result.residual,
        )
    if cfg.policy == "open_loop":
        return open_loop_policy(result), result
    return feedback_policy(result), result


def _exit_code(result):
    if result is None or result.converged:
        return EXIT_OK
    return EXIT_NOT_CONVERGED


def cmd_simulate(cfg, out):
    table = _table(cfg)
    policy, result = _policy(cfg, table)
    record = simulate(
        cfg.reservoir,
        table,
        cfg.integrator,
        policy,
        cfg.mode_flag,
        s0=cfg.initial_state,
    )
    output.write_csv(
        out / "trajectory.csv",
        record.columns(),
        output.TRAJECTORY_COLUMNS,
        _header(
            cfg,
            "simulate",
            policy=cfg.policy,
            integrator=cfg.integrator.as_dict(),
            trajectory_index=record.trajectory_index,
            clamp_count=record.clamp_count,
        ),
    )
    return _exit_code(result)


def cmd_ensemble(cfg, out):
    table = _table(cfg)
    policy, result = _policy(cfg, table)
    stats = run_ensemble(
        cfg.reservoir,
        table,
        cfg.integrator,
        policy,
        cfg.ensemble_size,
        cfg.mode_flag,
        s0=cfg.initial_state,
    )
    output.write_csv(
        out / "ensemble.csv",
        stats.columns(),
        output.ENSEMBLE_COLUMNS,
        _header(
            cfg,
            "ensemble",
            policy=cfg.policy,
            trajectories=stats.trajectory_count,
            clamp_rate=stats.clamp_rate,
        ),
    )
    output.write_json(
        out / "ensemble.json",
        dict(stats.metadata(), configuration=cfg.to_dict()),
    )
    return _exit_code(result)


def cmd_fig1(cfg, out):
    scan = temperature_scan(
        cfg.reservoir,
        cfg.scan.kBT_values,
        cfg.integrator,
        s0=cfg.initial_state,
        options=cfg.coefficients,
        table_dt=cfg.coefficients.dt,
    )
    for (mode, kBT), curve in sorted(scan.curves.items()):
        output.write_csv(
            out / "fig1_{}_kBT{:g}.csv".format(mode, kBT),
            np.column_stack([scan.times, curve]),
            output.SCAN_COLUMNS,
            _header(
                cfg,
                "fig1",
                curve_mode=mode,
                kBT=kBT,
                measurement_strength=0.0,
            ),
        )
    return EXIT_OK


CHECK_COLUMNS = (
    "panel",
    "controlled_lambda",
    "uncontrolled_lambda",
    "markovian_lambda",
    "lambda_gap",
    "gap_ok",
    "uncontrolled_lost",
    "markovian_lost",
    "solver_converged",
)


def _fig2_panel(cfg, out, name):
    comparison = compare_modes(
        cfg.reservoir,
        cfg.control,
        cfg.integrator,
        cfg.ensemble_size,
        s0=cfg.initial_state,
        table=_table(cfg, ModeFlag.NON_MARKOVIAN),
        markov_table=_table(cfg, ModeFlag.MARKOVIAN),
        options=cfg.coefficients,
    )
    converged = comparison.control.converged
    if not converged:
        logger.warning("panel %s: control solver did not converge", name)
    flag = np.full(len(comparison.times), float(converged))
    for branch, stats in comparison.branches().items():
        output.write_csv(
            out / "{}_{}.csv".format(name, branch),
            np.column_stack([stats.columns(), flag]),
            output.ENSEMBLE_COLUMNS + ("solver_converged",),
            _header(
                cfg,
                "fig2",
                panel=name,
                branch=branch,
                stream=stats.stream,
                trajectories=stats.trajectory_count,
                clamp_rate=stats.clamp_rate,
            ),
        )
    output.write_csv(
        out / "{}_target.csv".format(name),
        np.column_stack([comparison.times, comparison.target, flag]),
        ("t", "Lambda", "solver_converged"),
        _header(cfg, "fig2", panel=name, branch="target"),
    )
    checks = comparison.check(cfg.acceptance)
    logger.info(
        "panel %s: Lambda gap %.4g (%s)",
        name,
        checks["lambda_gap"],
        "ok" if checks["gap_ok"] else "below margin",
    )
    return checks


def cmd_fig2(cfg, out, reparse):
    """Run one panel if a fig2 preset is selected, otherwise all four."""
    if cfg.preset in FIG2_PANELS:
        panels = [(cfg.preset, cfg)]
    else:
        panels = [(name, reparse(name)) for name in FIG2_PANELS]
    rows = []
    for name, panel_cfg in panels:
        checks = _fig2_panel(panel_cfg, out, name)
        rows.append(
            [float(FIG2_PANELS.index(name))]
            + [float(checks[c]) for c in CHECK_COLUMNS[1:]]
        )
    output.write_csv(
        out / "fig2_checks.csv",
        np.array(rows),
        CHECK_COLUMNS,
        _header(
            cfg,
            "fig2",
            panels={str(i): n for i, n in enumerate(FIG2_PANELS)},
            acceptance=cfg.acceptance.as_dict(),
        ),
    )
    if all(row[-1] for row in rows):
        return EXIT_OK
    return EXIT_NOT_CONVERGED


COMMANDS = {
    "coeffs": cmd_coeffs,
    "control": cmd_control,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nmqubit",
        description=(
            "Coherence control of a qubit in a non-Markovian reservoir."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "command", choices=sorted(COMMANDS), help="what to compute"
    )
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS))
    parser.add_argument("--seed", type=int, help="master seed (64 bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument(
        "--trajectories", type=int, help="ensemble size N"
    )
    parser.add_argument(
        "--mode", choices=[m.value for m in ModeFlag], help="reservoir rates"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress, -vv for debugging output",
    )
    return parser


def configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    overrides = {
        "preset": args.preset,
        "seed": args.seed,
        "out": args.out,
        "trajectories": args.trajectories,
        "mode": args.mode,
    }
    try:
        text = ""
        if args.config is not None:
            text = Path(args.config).read_text()
        cfg = parse_config(text, overrides)
    except (ConfigError, ConfigParseError) as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("cannot read the configuration: %s", exc)
        return EXIT_IO

    resolved = cfg.to_yaml()
    sys.stdout.write(resolved)
    sys.stdout.flush()
    out = Path(cfg.output_dir)
    command = COMMANDS[args.command]
    try:
        output.write_text(out / "resolved_config.yaml", resolved)
        if args.command == "fig2":

            def reparse(panel):
                return parse_config(text, dict(overrides, preset=panel))

            return command(cfg, out, reparse)
        return command(cfg, out)
    except OSError as exc:
        logger.error("input/output failure: %s", exc)
        return EXIT_IO
    except (ConfigError, ConfigParseError) as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except NMQubitError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_FAILURE


__all__ = ["main", "build_parser"]

if __name__ == "__main__":
    sys.exit(main())
