"""Bundled run configurations.

The three fig2-* scenarios scan the detuning of the driven two-level atom
(Rabi frequency 1, decay rate 1/2) and tabulate, per grid point, the QFI
rate together with the Monte-Carlo counting and homodyne information rates
for one estimated parameter each.  The detuning range [-3, 3] brackets the
qualitative features of interest (counting blind spot at resonance, scheme
crossover at larger detuning); it is a choice, not a derived value.
"""

import copy

_FIG2_BASE = {
    "model": {"builtin": "two_level",
              "params": {"delta": 0.0, "omega": 1.0, "kappa": 0.5}},
    "task": "scan",
    "scan": {"param": "delta", "min": -3.0, "max": 3.0, "points": 61},
    "methods": ["qfi-rate", "cfi-counting", "cfi-homodyne"],
    "scheme": {"phi": 0.0, "dt": None},
    "T": 500.0,
    "n_traj": 2000,
    "burn_in": None,
    "stencil": {"h_rel": 1e-4, "h_min": 1e-5},
    "seed": 20240,
}


def _fig2(est_param):
    config = copy.deepcopy(_FIG2_BASE)
    config["est_params"] = [est_param]
    return config


SCENARIOS = {
    "fig2-delta": lambda: _fig2("delta"),
    "fig2-omega": lambda: _fig2("omega"),
    "fig2-kappa": lambda: _fig2("kappa"),
}


def scenario(name):
    if name not in SCENARIOS:
        raise KeyError(
            f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}")
    return SCENARIOS[name]()
