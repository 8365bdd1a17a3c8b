"""Ready-made parameter sets for the fig1 and fig2 commands.

Each preset maps a config section to the values it overrides. All
presets use omega0 = 1, gamma0 = 1 and alpha^2 = 0.01; the fig2 panels
add M = 0.05, eta = 1, theta = 1 and the horizon 15 / omega0.
"""
__all__ = ["PRESETS", "fig1", "fig2a", "fig2b", "fig2c", "fig2d"]

_common = {"omega0": 1.0, "gamma0": 1.0, "alpha_sq": 0.01}


def _panel(r, kBT):
    return {
        "reservoir": dict(_common, r=r, kBT=kBT, M=0.05, eta=1.0),
        "control": {"theta": 1.0, "t_max": 15.0},
        "integrator": {"t_max": 15.0},
    }


# the scan itself sets M = 0 for every temperature
fig1 = {
    "reservoir": dict(_common, r=0.1),
    "integrator": {"t_max": 15.0},
    "scan": {"kBT_values": [0.0, 1.0, 2.0, 5.0, 10.0]},
}

fig2a = _panel(r=0.5, kBT=1.0)
fig2b = _panel(r=3.0, kBT=1.0)
fig2c = _panel(r=0.5, kBT=10.0)
fig2d = _panel(r=3.0, kBT=10.0)

PRESETS = {
    "fig1": fig1,
    "fig2a": fig2a,
    "fig2b": fig2b,
    "fig2c": fig2c,
    "fig2d": fig2d,
}

FIG2_PANELS = ("fig2a", "fig2b", "fig2c", "fig2d")
