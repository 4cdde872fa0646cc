"""Named presets binding initial data, background and grid into a run."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics, lemmas
from .transport import ConfigError, RunConfig, state_from_config
from .velocity import IPM, STOKES

# machine-checkable expectations attached to presets
E_MONOTONE = "E_monotone"
K_MONOTONE = "K_monotone"
MASS_CONSERVED = "mass_conserved"
DISSIPATION_IDENTITY = "dissipation_identity"
EXPONENT_FLOOR = "exponent_floor"

DISSIPATION_TOL = 1e-3
SECOND_VARIATION_TOL = 5e-3
K_MIN = 1e-12
FIT_WINDOW = (10.0, 50.0)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    config: RunConfig
    expected: tuple

    def to_json(self):
        return {"name": self.name, "description": self.description,
                "config": self.config.to_dict(), "expected": list(self.expected)}


_STOKES_RHO = "poly:2,-1,-0.3"
_BASE_TAGS = (E_MONOTONE, K_MONOTONE, MASS_CONSERVED, DISSIPATION_IDENTITY)

PRESETS = {
    p.name: p for p in (
        Preset("ipm-baseline",
               "IPM, rho_s = 1 - x2, theta0 = 0.01 sin(x1) sin(pi x2)^2",
               RunConfig(model=IPM, ic="sinsq:1", epsilon=0.01, rho_s="1-x2"),
               _BASE_TAGS + (f"{EXPONENT_FLOOR}:-2.0",)),
        Preset("stokes-baseline",
               "Stokes, rho_s = 2 - x2 - 0.3 x2^2, theta0 = 0.01 sin(2 x1) sin(pi x2)^2",
               RunConfig(model=STOKES, ic="sinsq:2", epsilon=0.01, rho_s=_STOKES_RHO),
               _BASE_TAGS + (f"{EXPONENT_FLOOR}:-2.0",)),
        Preset("null",
               "IPM at rest: epsilon = 0",
               RunConfig(model=IPM, ic="sinsq:1", epsilon=0.0, n1=16, n2=17, t_end=1.0, sample_dt=0.1),
               (MASS_CONSERVED,)),
        Preset("ipm-quick",
               "Coarse short IPM run for smoke tests",
               RunConfig(model=IPM, ic="sinsq:1", epsilon=0.01, n1=16, n2=33, t_end=2.0, sample_dt=0.05),
               _BASE_TAGS),
        Preset("stokes-quick",
               "Coarse short Stokes run for smoke tests",
               RunConfig(model=STOKES, ic="sinsq:2", epsilon=0.01, rho_s=_STOKES_RHO,
                         n1=16, n2=33, t_end=2.0, sample_dt=0.05),
               _BASE_TAGS),
    )
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


def build(name, overrides=None, threads=1):
    """``(config, state)`` for a preset with ``overrides`` applied.

    Overrides are field names of :class:`RunConfig` mapped to typed or
    string values. Invalid combinations raise :class:`ConfigError`.
    """
    preset = get_preset(name)
    config = RunConfig.from_mapping(overrides or {}, base=preset.config)
    if config.model == STOKES and config.epsilon > 0 and config.ic.split(":")[0] != "sinsq":
        raise ConfigError("Stokes initial data must vanish with its vertical derivative on the walls (use sinsq)")
    return config, state_from_config(config, threads)


def _tag_value(tag):
    name, _, arg = tag.partition(":")
    return name, (float(arg) if arg else None)


def evaluate_properties(records, expected, fit_window=FIT_WINDOW):
    """Check each expected-property tag on a record series.

    Returns ``{tag: {"pass": bool, ...details}}``.
    """
    E = np.array([r.E for r in records])
    K = np.array([r.K for r in records])
    mass = np.array([r.mass for r in records])
    h0 = records[0].theta_h0 if records else 0.0
    out = {}
    for tag in expected:
        name, arg = _tag_value(tag)
        if name == E_MONOTONE:
            bad = diagnostics.monotone_violations(E)
            out[tag] = {"pass": len(bad) == 0, "violations": int(len(bad))}
        elif name == K_MONOTONE:
            bad = diagnostics.monotone_violations(K)
            out[tag] = {"pass": len(bad) == 0, "violations": int(len(bad))}
        elif name == MASS_CONSERVED:
            drift = float(np.max(np.abs(mass - mass[0]))) if len(mass) else 0.0
            out[tag] = {"pass": drift <= 1e-8 * (1.0 + h0), "max_drift": drift}
        elif name == DISSIPATION_IDENTITY:
            d = diagnostics.dissipation_series(records, K_MIN)
            rE = float(d[:, 1].max()) if len(d) else 0.0
            rK = float(d[:, 2].max()) if len(d) else 0.0
            out[tag] = {"pass": rE <= DISSIPATION_TOL and rK <= SECOND_VARIATION_TOL,
                        "max_resid_E": rE, "max_resid_K": rK, "samples": int(len(d))}
        elif name == EXPONENT_FLOOR:
            t = np.array([r.t for r in records])
            try:
                fit = lemmas.fit_power_law(lemmas.Trajectory.clipped(t, E), *fit_window)
            except ValueError as exc:
                out[tag] = {"pass": False, "error": str(exc)}
                continue
            out[tag] = {"pass": fit.exponent <= arg, "exponent": fit.exponent, "r2": fit.r2}
        else:
            out[tag] = {"pass": False, "error": f"unknown tag {tag!r}"}
        out[tag]["pass"] = bool(out[tag]["pass"])
    return out
