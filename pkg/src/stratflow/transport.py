"""Time integration of the density perturbation.

``theta = rho - rho_s`` obeys

    theta_t = -u . grad theta - rho_s'(x2) u2

with ``u`` recovered from ``theta`` by the model's stream solver. For
``rho_s = 1 - x2`` the source is ``u2``. Classical RK4, velocity re-solved
at every stage, boundary rows of ``theta`` held at zero.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import diagnostics
from .grid import Grid
from .profiles import Stratification
from .rearrangement import energy_gap, vertical_rearrangement
from .velocity import IPM, MODELS, STOKES, get_solver


class ConfigError(ValueError):
    pass


class GuardError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every field is a key of the config file."""

    model: str = IPM
    n1: int = 128
    n2: int = 129
    fd_order: int = 4
    quadrature: str = "gregory"
    cfl: float = 0.5
    t_end: float = 50.0
    sample_dt: float = 0.01
    ic: str = "sinsq:1"
    epsilon: float = 0.01
    rho_s: str = "1-x2"
    dealias: bool = True
    max_linf: float = 1.0
    nan_abort: bool = True
    sobolev_k: int = 3
    drift_every: int = 100
    experimental_general_rhos: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not self.sample_dt > 0:
            raise ConfigError(f"sample_dt must be positive, got {self.sample_dt}")
        if abs(self.t_end / self.sample_dt - round(self.t_end / self.sample_dt)) > 1e-9:
            raise ConfigError("t_end must be a whole number of sample_dt")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not self.max_linf > 0:
            raise ConfigError("max_linf must be positive")
        if self.drift_every < 1:
            raise ConfigError("drift_every must be >= 1")
        try:
            self.grid
            strat = Stratification.parse(self.rho_s)
            parse_ic(self.ic)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if strat.gamma <= 0:
            raise ConfigError(f"rho_s {self.rho_s!r} is not strictly decreasing (gamma = {strat.gamma:g})")
        if self.model == IPM and not strat.is_reference and not self.experimental_general_rhos:
            raise ConfigError("IPM with rho_s other than 1-x2 needs experimental_general_rhos = true")

    @property
    def n_samples(self):
        return int(round(self.t_end / self.sample_dt))

    @property
    def grid(self):
        return Grid(self.n1, self.n2, self.fd_order, self.quadrature)

    @property
    def stratification(self):
        return Stratification.parse(self.rho_s)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping, base=None):
        """Build from string or typed values, on top of ``base`` if given."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = (base or cls()).to_dict()
        for key, raw in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, types[key], raw)
        return cls(**values)

    @classmethod
    def from_file(cls, path, base=None):
        return cls.from_mapping(read_config_file(path), base)


def _coerce(key, typ, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return text


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


# -- initial data ---------------------------------------------------------

_IC = re.compile(r"(zero|sin|sinsq)(?::(\d+))?")


def parse_ic(descriptor):
    m = _IC.fullmatch(descriptor.strip())
    if not m:
        raise ValueError(f"unknown initial condition {descriptor!r}")
    shape, k = m.group(1), int(m.group(2) or 1)
    if k < 1:
        raise ValueError("initial condition wavenumber must be >= 1")
    return shape, k


def initial_theta(grid, descriptor, epsilon):
    """``epsilon * sin(k x1) * v(x2)`` with ``v = sin(pi x2)`` or ``sin(pi x2)**2``."""
    shape, k = parse_ic(descriptor)
    if k >= grid.n1 // 2:
        raise ConfigError(f"initial wavenumber {k} not resolved by n1 = {grid.n1}")
    X1, X2 = grid.mesh
    if shape == "zero" or epsilon == 0:
        return np.zeros(grid.shape)
    v = np.sin(np.pi * X2)
    if shape == "sinsq":
        v = v * v
    theta = epsilon * np.sin(k * X1) * v
    theta[:, [0, -1]] = 0.0
    return theta


# -- state ----------------------------------------------------------------

@dataclass(frozen=True)
class SimState:
    grid: Grid
    model: str
    t: float
    theta: np.ndarray
    rho_s: Stratification
    rho0_star: np.ndarray
    stream: object
    step_count: int = 0
    bc_drift: float = 0.0
    dealias: bool = True
    threads: int = field(default=1, compare=False)

    @property
    def rho_s_values(self):
        return self.rho_s(self.grid.x2)

    @property
    def drho(self):
        return self.rho_s.derivative(self.grid.x2)

    @property
    def delta_star(self):
        """``rho0* - rho_s``, the frozen minimizer relative to the background."""
        return self.rho0_star - self.rho_s_values

    @property
    def gamma(self):
        return self.rho_s.gamma

    def with_theta(self, theta, t, step_count, bc_drift):
        stream = get_solver(self.grid, self.model).solve(theta, threads=self.threads)
        return dataclasses.replace(self, theta=theta, t=t, stream=stream,
                                   step_count=step_count, bc_drift=bc_drift)


def make_state(grid, model, theta, rho_s, t=0.0, dealias=True, threads=1, rho0_star=None):
    """Initial state; freezes ``rho0*`` from ``rho_s + theta``."""
    theta = np.array(grid.check(theta), dtype=float)
    if rho_s.gamma <= 0:
        raise ConfigError("rho_s must be strictly decreasing")
    wall = np.max(np.abs(theta[:, [0, -1]]))
    if wall > 0:
        raise ConfigError(f"theta must vanish on the walls (max |theta| there = {wall:g})")
    if rho0_star is None:
        rho0_star = vertical_rearrangement(grid, rho_s(grid.x2)[None, :] + theta)
    stream = get_solver(grid, model).solve(theta, threads=threads)
    return SimState(grid, model, float(t), theta, rho_s, np.asarray(rho0_star, dtype=float),
                    stream, 0, 0.0, dealias, threads)


def state_from_config(config, threads=1):
    grid = config.grid
    theta = initial_theta(grid, config.ic, config.epsilon)
    return make_state(grid, config.model, theta, config.stratification,
                      dealias=config.dealias, threads=threads)


# -- right-hand side and stepping ---------------------------------------------

def _tendency(state, theta, psi_hat, theta_hat=None):
    g = state.grid
    if theta_hat is None:
        theta_hat = g.to_modal(theta)
    cut = g.dealias if state.dealias else (lambda m: m)
    u1 = -g.to_physical(cut(g.modal_ddx2(psi_hat)))
    u2_hat = g.modal_ddx1(psi_hat)
    u2 = g.to_physical(cut(u2_hat))
    tx = g.to_physical(cut(g.modal_ddx1(theta_hat)))
    ty = g.to_physical(cut(g.modal_ddx2(theta_hat)))
    source = state.drho[None, :] * g.to_physical(u2_hat)
    out = -(u1 * tx + u2 * ty) - source
    if not np.all(np.isfinite(out)):
        raise GuardError(f"non-finite tendency at step {state.step_count}")
    return out


def rhs(state):
    """``d theta / dt`` at the state's own ``theta`` and cached stream."""
    return _tendency(state, state.theta, state.stream.psi_hat)


def _stage(state, theta):
    g = state.grid
    theta_hat = g.to_modal(theta)
    psi_hat = get_solver(g, state.model).solve_modal(theta_hat, threads=state.threads)
    return _tendency(state, theta, psi_hat, theta_hat)


def _pin(theta):
    drift = float(np.max(np.abs(theta[:, [0, -1]])))
    theta[:, [0, -1]] = 0.0
    return drift


def step(state, dt):
    """One RK4 step; returns the new state with a fresh stream."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    th = state.theta
    k1 = rhs(state)
    a = th + 0.5 * dt * k1
    drift = _pin(a)
    k2 = _stage(state, a)
    b = th + 0.5 * dt * k2
    drift = max(drift, _pin(b))
    k3 = _stage(state, b)
    c = th + dt * k3
    drift = max(drift, _pin(c))
    k4 = _stage(state, c)
    new = th + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    drift = max(drift, _pin(new))
    return state.with_theta(new, state.t + dt, state.step_count + 1, drift)


def adaptive_dt(state, cfl, sample_dt):
    """``cfl * min(dx1 / |u1|max, dx2 / |u2|max)``, capped at ``sample_dt``."""
    g = state.grid
    dt = sample_dt
    for u, h in ((state.stream.u1, g.dx1), (state.stream.u2, g.dx2)):
        m = float(np.max(np.abs(u)))
        if m > 0:
            dt = min(dt, cfl * h / m)
    return dt


# -- driver ---------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    records: list
    status: str = "completed"
    message: str = ""
    drift: list = field(default_factory=list)
    final_state: SimState | None = None

    @property
    def ok(self):
        return self.status == "completed"

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records])


def drift_row(state):
    """Distance of ``rho(t)*`` from the frozen ``rho0*`` and the current energy gap."""
    g = state.grid
    rho = state.rho_s_values[None, :] + state.theta
    star = vertical_rearrangement(g, rho)
    gap = energy_gap(g, rho, star=star)
    return {"t": state.t, "star_sup_dist": float(np.max(np.abs(star - state.rho0_star))),
            "energy_gap": gap["gap"]}


def _guard(state, config):
    linf = float(np.max(np.abs(state.theta)))
    if not np.isfinite(linf):
        if config.nan_abort:
            raise GuardError(f"non-finite theta at t={state.t:g}")
    elif linf > config.max_linf:
        raise GuardError(f"|theta|max = {linf:g} exceeds max_linf = {config.max_linf:g} at t={state.t:g}")


def run(config, threads=1, snapshots_every=None, on_snapshot=None, state=None):
    """Integrate ``config`` and sample diagnostics every ``sample_dt``.

    Samples land exactly on ``t_k = k * sample_dt``. ``on_snapshot(k, state)``
    is called every ``snapshots_every`` samples. A guard violation stops the
    run with ``status = "guard"`` and the records gathered so far.
    """
    with threadpool_limits(limits=1):
        return _run(config, threads, snapshots_every, on_snapshot, state)


def _run(config, threads, snapshots_every, on_snapshot, state):
    if state is None:
        state = state_from_config(config, threads)
    result = RunResult(config, [])
    sk = config.sobolev_k

    def sample(k, st):
        result.records.append(diagnostics.record(st, sk))
        if k % config.drift_every == 0:
            result.drift.append(drift_row(st))
        if snapshots_every and k % snapshots_every == 0 and on_snapshot is not None:
            on_snapshot(k, st)

    try:
        sample(0, state)
        for k in range(1, config.n_samples + 1):
            t_next = k * config.sample_dt
            span = t_next - state.t
            dt = adaptive_dt(state, config.cfl, config.sample_dt)
            nsub = max(1, math.ceil(span / dt - 1e-9))
            h = span / nsub
            for _ in range(nsub):
                state = step(state, h)
            state = dataclasses.replace(state, t=t_next)
            _guard(state, config)
            sample(k, state)
    except (GuardError, diagnostics.DiagnosticsError) as exc:
        result.status = "guard"
        result.message = str(exc)
    result.final_state = state
    return result
