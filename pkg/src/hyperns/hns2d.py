"""Time integrators for the 2D models on the MAC grid.

* hyperbolic NS:  eps u'' + u' + P div(u (x) u) = -A u + g
* limit NS:       v' + P div(v (x) v) = -A v + g
* Jeffrey model:  u' + P div(u (x) u) = P div sigma + g,  eps sigma' + sigma = sym grad u
* penalized:      eps u'' + u' + div(u (x) u) = lap u + (1/alpha) grad div u + g

All linear terms are implicit (trapezoidal rule; exact exponential factor for
the stress relaxation) and convection is explicit (Heun), which keeps the
scheme second order in time with only a convective step restriction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _sparse, kernels
from .grids import VelocityField, divergence_residual
from .stokes import StokesContext


# -- forcing --------------------------------------------------------------

@dataclass
class Forcing:
    """``g(t) = steady + cos(omega t) * cos_part + sin(omega t) * sin_part``."""

    steady: VelocityField
    cos_part: VelocityField | None = None
    sin_part: VelocityField | None = None
    omega: float = 0.0

    @property
    def is_constant(self) -> bool:
        return self.cos_part is None and self.sin_part is None

    def at(self, t: float) -> VelocityField:
        if self.is_constant:
            return self.steady
        g = self.steady
        if self.cos_part is not None:
            g = g + math.cos(self.omega * t) * self.cos_part
        if self.sin_part is not None:
            g = g + math.sin(self.omega * t) * self.sin_part
        return g

    def projected(self, ctx: StokesContext) -> "Forcing":
        def p(f):
            return None if f is None else ctx.project(f)

        return Forcing(ctx.project(self.steady), p(self.cos_part), p(self.sin_part), self.omega)


def as_forcing(g, grid) -> Forcing:
    if g is None:
        return Forcing(VelocityField.zeros(grid))
    if isinstance(g, Forcing):
        return g
    return Forcing(g)


# -- states ---------------------------------------------------------------

@dataclass
class HnsState:
    u: VelocityField
    ut: VelocityField
    g: Forcing
    eps: float
    t: float = 0.0
    flag: str | None = None


@dataclass
class LimitState:
    v: VelocityField
    g: Forcing
    t: float = 0.0
    flag: str | None = None


@dataclass
class JeffreyState:
    """Velocity plus stress; ``s11, s22`` at cell centres, ``s12`` at corners."""

    u: VelocityField
    s11: np.ndarray
    s22: np.ndarray
    s12: np.ndarray
    eps: float
    t: float = 0.0
    flag: str | None = None

    @classmethod
    def at_rest_stress(cls, u, eps, t=0.0):
        n = u.grid.n
        return cls(u, np.zeros((n, n)), np.zeros((n, n)), np.zeros((n + 1, n + 1)), eps, t)

    def stress_norm_sq(self) -> float:
        grid = self.u.grid
        return float(
            grid.h**2 * (np.sum(self.s11**2) + np.sum(self.s22**2))
            + 2.0 * np.sum(grid.corner_weights * self.s12**2)
        )

    def stress_divergence(self) -> VelocityField:
        f1, f2 = kernels.stress_divergence(self.s11, self.s22, self.s12, self.u.grid.h)
        return VelocityField(self.u.grid, f1, f2)


@dataclass
class PenalizedState:
    u: VelocityField
    ut: VelocityField
    eps: float
    alpha_pen: float
    t: float = 0.0
    flag: str | None = None


# -- shared pieces ----------------------------------------------------------

def convection(u: VelocityField) -> VelocityField:
    """Unprojected ``div(u (x) u)``."""
    a1, a2 = kernels.advection(u.u1, u.u2, u.grid.h)
    return VelocityField(u.grid, a1, a2)


def _laplacian(u: VelocityField) -> VelocityField:
    l1, l2 = kernels.laplacian(u.u1, u.u2, u.grid.h)
    return VelocityField(u.grid, l1, l2)


def _finite(*fields) -> bool:
    return all(f.is_finite() for f in fields)


def hns_rhs(ctx: StokesContext, state: HnsState) -> VelocityField:
    """``P(-div(u (x) u)) - A u + g``; also the ``eps -> 0`` time derivative."""
    u = state.u
    g = as_forcing(state.g, u.grid).at(state.t)
    return ctx.project(_laplacian(u) - convection(u) + g)


def time_derivative_initial(ctx: StokesContext, v0: VelocityField, g, t: float = 0.0) -> VelocityField:
    """``-A v0 - P div(v0 (x) v0) + g``: the value of v'(0) forced by the limit equation."""
    g = as_forcing(g, v0.grid).at(t)
    return ctx.project(_laplacian(v0) - convection(v0) + g)


def _wave_trapezoid(ctx, u0, v0, eps, dt, F):
    # eps v' = -v - A u + F, u' = v; trapezoidal rule, solved for v1
    solver = ctx.shifted(eps + 0.5 * dt, 0.25 * dt * dt)
    rhs = (eps - 0.5 * dt) * v0 + dt * _laplacian(u0) + (0.25 * dt * dt) * _laplacian(v0) + dt * F
    v1 = solver.solve(rhs)
    u1 = u0 + (0.5 * dt) * (v0 + v1)
    return u1, v1


def hns_step(ctx: StokesContext, state: HnsState, dt: float, nonlinear: bool = True) -> HnsState:
    if state.flag:
        return state
    u0, v0, eps, t0 = state.u, state.ut, state.eps, state.t
    g = as_forcing(state.g, u0.grid)
    g0, g1 = g.at(t0), g.at(t0 + dt)
    if nonlinear:
        N0 = convection(u0)
        us, _ = _wave_trapezoid(ctx, u0, v0, eps, dt, g0 - N0)
        N1 = convection(us)
        F = 0.5 * (g0 + g1) - 0.5 * (N0 + N1)
    else:
        F = 0.5 * (g0 + g1)
    u1, v1 = _wave_trapezoid(ctx, u0, v0, eps, dt, F)
    u1, v1 = ctx.project(u1), ctx.project(v1)
    if not _finite(u1, v1):
        return replace(state, flag="blow-up")
    return HnsState(u1, v1, g, eps, t0 + dt)


def ns_limit_step(ctx: StokesContext, state: LimitState, dt: float, nonlinear: bool = True) -> LimitState:
    if state.flag:
        return state
    v0, t0 = state.v, state.t
    g = as_forcing(state.g, v0.grid)
    g0, g1 = g.at(t0), g.at(t0 + dt)
    solver = ctx.shifted(1.0, 0.5 * dt)
    base = v0 + (0.5 * dt) * _laplacian(v0)
    if nonlinear:
        N0 = convection(v0)
        vs = solver.solve(base + dt * (g0 - N0))
        F = 0.5 * (g0 + g1) - 0.5 * (N0 + convection(vs))
    else:
        F = 0.5 * (g0 + g1)
    v1 = ctx.project(solver.solve(base + dt * F))
    if not _finite(v1):
        return replace(state, flag="blow-up")
    return LimitState(v1, g, t0 + dt)


def _relaxation_weights(dt, eps):
    # exact solution of eps s' + s = gamma(t) for gamma linear on [0, dt]:
    # s1 = a s0 + b gamma0 + c gamma1
    k = dt / eps
    a = math.exp(-k)
    if k < 1e-4:
        c = k / 2 - k * k / 6 + k**3 / 24
    else:
        c = 1.0 - (1.0 - a) / k
    return a, (1.0 - a) - c, c


def jeffrey_step(ctx: StokesContext, state: JeffreyState, dt: float, g=None,
                 nonlinear: bool = True, frozen_u: bool = False) -> JeffreyState:
    if state.flag:
        return state
    grid = state.u.grid
    h = grid.h
    a, b, c = _relaxation_weights(dt, state.eps)
    u0, t0 = state.u, state.t
    g0s11, g0s22, g0s12 = kernels.strain_rate(u0.u1, u0.u2, h)
    if frozen_u:
        s11 = a * state.s11 + (b + c) * g0s11
        s22 = a * state.s22 + (b + c) * g0s22
        s12 = a * state.s12 + (b + c) * g0s12
        return JeffreyState(u0, s11, s22, s12, state.eps, t0 + dt)

    g = as_forcing(g, grid)
    f0, f1 = g.at(t0), g.at(t0 + dt)
    div_s0 = state.stress_divergence()
    d1, d2 = kernels.stress_divergence(g0s11, g0s22, g0s12, h)
    div_gamma0 = VelocityField(grid, d1, d2)
    solver = ctx.shifted(1.0, 0.5 * dt * c, "strain")
    base = u0 + (0.5 * dt * (1.0 + a)) * div_s0 + (0.5 * dt * b) * div_gamma0
    if nonlinear:
        N0 = convection(u0)
        us = solver.solve(base + dt * (f0 - N0))
        F = 0.5 * (f0 + f1) - 0.5 * (N0 + convection(us))
    else:
        F = 0.5 * (f0 + f1)
    u1 = ctx.project(solver.solve(base + dt * F))
    if not _finite(u1):
        return replace(state, flag="blow-up")
    n11, n22, n12 = kernels.strain_rate(u1.u1, u1.u2, h)
    s11 = a * state.s11 + b * g0s11 + c * n11
    s22 = a * state.s22 + b * g0s22 + c * n22
    s12 = a * state.s12 + b * g0s12 + c * n12
    return JeffreyState(u1, s11, s22, s12, state.eps, t0 + dt)


@lru_cache(maxsize=16)
def _penalized_solver(n, c, k, alpha_pen):
    ops = _sparse.operators(n)
    D = ops["div"]
    L = -ops["lap"] + (1.0 / alpha_pen) * (D.T @ D)
    M = (c * sp.identity(L.shape[0]) + k * L).tocsc()
    return spla.splu(M)


def penalized_operator(u: VelocityField, alpha_pen: float) -> VelocityField:
    """``lap u + (1/alpha) grad div u`` (no projection)."""
    h = u.grid.h
    d = kernels.divergence(u.u1, u.u2, h)
    g1, g2 = kernels.gradient(d, h)
    return _laplacian(u) + (1.0 / alpha_pen) * VelocityField(u.grid, g1, g2)


def penalized_dt_bound(h: float, eps: float, alpha_pen: float) -> float:
    return 0.4 * h * math.sqrt(eps / (1.0 + 1.0 / alpha_pen))


def _penalized_trapezoid(u0, v0, eps, alpha_pen, dt, F):
    grid = u0.grid
    lu = _penalized_solver(grid.n, eps + 0.5 * dt, 0.25 * dt * dt, alpha_pen)
    rhs = (
        (eps - 0.5 * dt) * v0
        + dt * penalized_operator(u0, alpha_pen)
        + (0.25 * dt * dt) * penalized_operator(v0, alpha_pen)
        + dt * F
    )
    v1 = VelocityField.from_interior(grid, lu.solve(rhs.interior()))
    return u0 + (0.5 * dt) * (v0 + v1), v1


def penalized_step(ctx, state: PenalizedState, dt: float, g=None, nonlinear: bool = True) -> PenalizedState:
    if state.flag:
        return state
    grid = state.u.grid
    g = as_forcing(g, grid)
    t0 = state.t
    g0, g1 = g.at(t0), g.at(t0 + dt)
    u0, v0 = state.u, state.ut
    if nonlinear:
        N0 = convection(u0)
        us, _ = _penalized_trapezoid(u0, v0, state.eps, state.alpha_pen, dt, g0 - N0)
        F = 0.5 * (g0 + g1) - 0.5 * (N0 + convection(us))
    else:
        F = 0.5 * (g0 + g1)
    u1, v1 = _penalized_trapezoid(u0, v0, state.eps, state.alpha_pen, dt, F)
    if not _finite(u1, v1):
        return replace(state, flag="blow-up")
    return PenalizedState(u1, v1, state.eps, state.alpha_pen, t0 + dt)


def penalized_leapfrog_step(state: PenalizedState, dt: float, g=None, u_prev=None):
    """Explicit centred step of the penalized model; returns ``(state, u_prev)``.

    Each update reads only neighbouring faces of the previous level, so the
    numerical domain of dependence is finite (used for front-speed studies;
    stable for ``dt < h / (sqrt(2) c)`` with ``c`` the fast wave speed).
    Pass the returned ``u_prev`` back on the next call.
    """
    if state.flag:
        return state, u_prev
    grid = state.u.grid
    g = as_forcing(g, grid)
    eps, al = state.eps, state.alpha_pen
    u = state.u
    F = penalized_operator(u, al) - convection(u) + g.at(state.t)
    if u_prev is None:
        # Taylor start: u(-dt) = u - dt ut + dt^2/2 utt
        u_prev = u - dt * state.ut + (0.5 * dt * dt / eps) * (F - state.ut)
    k = 0.5 * dt / eps
    new = (2.0 * u - (1.0 - k) * u_prev + (dt * dt / eps) * F) / (1.0 + k)
    ut = (3.0 * new - 4.0 * u + u_prev) / (2.0 * dt)
    out = PenalizedState(new, ut, eps, al, state.t + dt)
    if not _finite(new, ut):
        out.flag = "blow-up"
    return out, u


def scalar_mode_solution(eps: float, lam: float, y0: float, yp0: float, t):
    """Closed form of ``eps y'' + y' + lam y = 0`` (all damping regimes)."""
    t = np.asarray(t, dtype=float)
    disc = 1.0 - 4.0 * eps * lam
    if abs(disc) < 1e-14:
        r = -1.0 / (2.0 * eps)
        return (y0 + (yp0 - r * y0) * t) * np.exp(r * t)
    if disc > 0:
        s = math.sqrt(disc)
        r1 = (-1.0 + s) / (2.0 * eps)
        r2 = (-1.0 - s) / (2.0 * eps)
        c2 = (yp0 - r1 * y0) / (r2 - r1)
        c1 = y0 - c2
        return c1 * np.exp(r1 * t) + c2 * np.exp(r2 * t)
    mu = -1.0 / (2.0 * eps)
    om = math.sqrt(-disc) / (2.0 * eps)
    return np.exp(mu * t) * (y0 * np.cos(om * t) + (yp0 - mu * y0) / om * np.sin(om * t))


def is_oscillatory(eps: float, lam: float) -> bool:
    return 4.0 * eps * lam > 1.0


# -- configured runs ------------------------------------------------------------

MODELS = ("hyperbolic", "limit", "jeffrey", "penalized")
INITIAL_KINDS = ("zero", "vortex", "random", "eigenmode", "bump", "orbit")
FORCING_KINDS = ("zero", "vortex", "rotating")
UT_KINDS = ("prepared", "zero", "perturbed")
PERTURBATION_SHAPES = ("random", "eigenmode")


@dataclass
class ModelConfig:
    model: str = "hyperbolic"
    n: int = 32
    eps: float = 1e-2
    alpha_pen: float = 0.1
    horizon: float = 1.0
    dt_rule: object = "auto"
    seed: int = 0
    initial: dict = field(default_factory=lambda: {"kind": "vortex", "amplitude": 1.0})
    forcing: dict = field(default_factory=lambda: {"kind": "zero", "amplitude": 0.0})
    sample_stride: int = 10

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.eps <= 0 or self.horizon < 0 or self.sample_stride < 1:
            raise ValueError("eps must be > 0, horizon >= 0, sample_stride >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _vortex_stream(x, y):
    return np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2


def _tilted_stream(x, y):
    # odd about x = 1/2, even about y = 1/2
    return np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2 * np.sin(2.0 * np.pi * x)


def _unit(v: VelocityField) -> VelocityField:
    nv = v.norm()
    return v / nv if nv > 0 else v


def make_initial(ctx: StokesContext, spec: dict, seed: int = 0) -> VelocityField:
    """Initial velocity with L2 norm ``amplitude`` (``bump`` has unit peak)."""
    grid = ctx.grid
    kind = spec.get("kind", "zero")
    amp = float(spec.get("amplitude", 1.0))
    if kind == "zero":
        return VelocityField.zeros(grid)
    if kind == "vortex":
        return amp * _unit(VelocityField.from_stream_function(grid, _vortex_stream))
    if kind == "random":
        from .stokes import random_solenoidal

        return amp * random_solenoidal(ctx, np.random.default_rng(seed), smooth=True)
    if kind == "eigenmode":
        return amp * ctx.eigenpair()[1]
    if kind == "bump":
        r0 = float(spec.get("radius", 0.1))

        def f(x, y):
            r = np.hypot(x - 0.5, y - 0.5)
            return np.where(r < r0, (1.0 - (r / r0) ** 2) ** 3, 0.0)

        return amp * VelocityField.from_functions(grid, f, lambda x, y: 0.0 * x)
    raise ValueError(f"unknown initial kind {kind!r}")


def make_forcing(ctx: StokesContext, spec: dict) -> Forcing:
    """Projected forcing with ``|g| = amplitude``.

    ``rotating`` alternates between two orthogonal vortex patterns,
    ``g(t) = G (phi cos(w t) + phi_T sin(w t))``, with ``phi_T`` the
    transposed pattern; it keeps the flow time dependent after transients.
    """
    grid = ctx.grid
    kind = spec.get("kind", "zero")
    amp = float(spec.get("amplitude", 0.0))
    if kind == "zero" or amp == 0.0:
        return Forcing(VelocityField.zeros(grid))
    if kind == "vortex":
        return Forcing(amp * _unit(VelocityField.from_stream_function(grid, _tilted_stream)))
    if kind == "rotating":
        phi = _unit(VelocityField.from_stream_function(grid, _tilted_stream))
        phi_t = _unit(VelocityField.from_stream_function(grid, lambda x, y: _tilted_stream(y, x)))
        omega = float(spec.get("omega", 2.0 * math.pi))
        return Forcing(VelocityField.zeros(grid), amp * phi, amp * phi_t, omega).projected(ctx)
    raise ValueError(f"unknown forcing kind {kind!r}")


def velocity_scale(ctx: StokesContext, u0: VelocityField, g: Forcing) -> float:
    scale = max(1.0, u0.max_abs())
    for part in (g.steady, g.cos_part, g.sin_part):
        if part is not None and part.norm() > 0:
            scale = max(scale, ctx.solve(ctx.project(part), method="direct").max_abs())
    return scale


def choose_dt(ctx: StokesContext, cfg: ModelConfig, u0: VelocityField, g: Forcing) -> float:
    if cfg.dt_rule != "auto":
        return float(cfg.dt_rule)
    h = ctx.grid.h
    if cfg.model == "penalized":
        return penalized_dt_bound(h, cfg.eps, cfg.alpha_pen)
    U = velocity_scale(ctx, u0, g)
    dt = min(0.4 * h / U, 0.01)
    if cfg.model == "hyperbolic":
        dt = min(dt, cfg.eps / 4.0)
    elif cfg.model == "jeffrey":
        dt = min(dt, 0.25 * h / U, cfg.eps / 4.0)
    return dt


TRACE_COLUMNS = ("t", "norm_E1_full", "norm_E1_trunc", "u_inf", "div_residual", "flag")


@dataclass
class Trace:
    model: str
    eps: float
    dt: float
    rows: list = field(default_factory=list)
    states: list = field(default_factory=list)
    flag: str | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def energy_report(self):
        from .energy import EnergyReport

        full = self.column("norm_E1_full") ** 2
        trunc = self.column("norm_E1_trunc") ** 2
        em1 = np.array([r[6] for r in self.rows])
        return EnergyReport(self.times, full, trunc, em1).fit()

    def csv_rows(self):
        for r in self.rows:
            yield [repr(float(r[0])), repr(float(r[1])), repr(float(r[2])),
                   repr(float(r[3])), repr(float(r[4])), r[5] or ""]


def _apply_lap(u):
    l = _laplacian(u)
    return VelocityField(u.grid, -l.u1, -l.u2)


def _sample_row(ctx, model, eps, u, ut, t, flag):
    """``(t, full, trunc, u_inf, div_residual, flag, E^{-1} of (u, ut))``."""
    if model == "penalized":
        Au, Aut = _apply_lap(u), _apply_lap(ut)
    else:
        Au, Aut = ctx.apply(u, check=False), ctx.apply(ut, check=False)
    h1_ut = max(ut.dot(Aut), 0.0)
    full = math.sqrt(eps * h1_ut + ut.dot(ut) + Au.dot(Au))
    trunc = math.sqrt(eps * h1_ut + Au.dot(Au))
    em1 = math.nan
    if model != "penalized":
        from .energy import FunctionalNotPositiveError, XiPair, e_minus1_functional

        try:
            em1 = e_minus1_functional(ctx, XiPair(u, ut, eps)).value
        except FunctionalNotPositiveError:
            pass
    return (t, full, trunc, u.max_abs(), divergence_residual(u), flag, em1)


def spin_up(ctx: StokesContext, g: Forcing, duration: float = 1.0, dt: float = 0.005) -> VelocityField:
    """Limit-model state after forcing from rest for whole forcing periods.

    The run length is the smallest whole number of periods covering
    ``duration``, so the returned state sits at forcing phase zero.
    """
    length = duration
    if g.omega:
        period = 2.0 * math.pi / g.omega
        length = period * max(1, math.ceil(duration / period - 1e-9))
    steps = max(1, int(math.ceil(length / dt)))
    dt = length / steps
    state = LimitState(VelocityField.zeros(ctx.grid), g)
    for k in range(1, steps + 1):
        state = ns_limit_step(ctx, state, dt)
        if state.flag:
            raise RuntimeError(f"spin-up failed: {state.flag}")
        state.t = k * dt
    return state.v


def initial_state(ctx: StokesContext, cfg: ModelConfig):
    """Build ``(state, forcing)`` for a configuration."""
    g = make_forcing(ctx, cfg.forcing)
    if cfg.initial.get("kind") == "orbit":
        u0 = spin_up(ctx, g, float(cfg.initial.get("spinup", 1.0)))
    elif cfg.model != "penalized":
        u0 = ctx.project(make_initial(ctx, cfg.initial, cfg.seed))
    else:
        u0 = make_initial(ctx, cfg.initial, cfg.seed)
    if cfg.model == "penalized":
        return PenalizedState(u0, VelocityField.zeros(ctx.grid), cfg.eps, cfg.alpha_pen), g
    if cfg.model == "limit":
        return LimitState(u0, g), g
    if cfg.model == "jeffrey":
        return JeffreyState.at_rest_stress(u0, cfg.eps), g
    ut_kind = cfg.initial.get("ut", "prepared")
    if ut_kind not in UT_KINDS:
        raise ValueError(f"unknown ut kind {ut_kind!r}")
    if ut_kind == "zero":
        ut = VelocityField.zeros(ctx.grid)
    else:
        ut = time_derivative_initial(ctx, u0, g)
        if ut_kind == "perturbed":
            shape = cfg.initial.get("ut_shape", "random")
            if shape == "eigenmode":
                d = ctx.eigenpair()[1]
            elif shape == "random":
                from .stokes import random_solenoidal

                d = random_solenoidal(ctx, np.random.default_rng(cfg.seed + 1), smooth=True)
            else:
                raise ValueError(f"unknown perturbation shape {shape!r}")
            ut = ut + float(cfg.initial.get("ut_amplitude", 1.0)) * d
    return HnsState(u0, ut, g, cfg.eps), g


def _velocity_pair(ctx, model, state, g):
    if model == "hyperbolic":
        return state.u, state.ut
    if model == "limit":
        return state.v, time_derivative_initial(ctx, state.v, g, state.t)
    if model == "jeffrey":
        return state.u, ctx.project(state.stress_divergence() - convection(state.u) + g.at(state.t))
    return state.u, state.ut


def run_model(ctx: StokesContext, model: str, config, keep_states: bool = False,
              nonlinear: bool = True) -> Trace:
    """Step a configured model to its horizon, sampling every ``sample_stride`` steps.

    A blow-up flag ends the trace early; the flag is recorded on the last
    row and on the trace.
    """
    cfg = config if isinstance(config, ModelConfig) else ModelConfig.from_dict(dict(config))
    if model != cfg.model:
        cfg = replace(cfg, model=model)
    state, g = initial_state(ctx, cfg)
    u0 = _velocity_pair(ctx, cfg.model, state, g)[0]
    dt = choose_dt(ctx, cfg, u0, g)
    n_steps = int(round(cfg.horizon / dt)) if cfg.horizon > 0 else 0
    if n_steps:
        dt = cfg.horizon / n_steps
    trace = Trace(cfg.model, cfg.eps, dt)

    def sample(st, flag=None):
        if flag:
            trace.rows.append((st.t, math.nan, math.nan, math.nan, math.nan, flag, math.nan))
        else:
            u, ut = _velocity_pair(ctx, cfg.model, st, g)
            trace.rows.append(_sample_row(ctx, cfg.model, cfg.eps, u, ut, st.t, None))
        if keep_states:
            trace.states.append(st)

    sample(state)
    for k in range(1, n_steps + 1):
        # overflow on the way to a blow-up flag is an outcome, not an error
        with np.errstate(over="ignore", invalid="ignore"):
            if cfg.model == "hyperbolic":
                state = hns_step(ctx, state, dt, nonlinear)
            elif cfg.model == "limit":
                state = ns_limit_step(ctx, state, dt, nonlinear)
            elif cfg.model == "jeffrey":
                state = jeffrey_step(ctx, state, dt, g, nonlinear)
            else:
                state = penalized_step(ctx, state, dt, g, nonlinear)
        if state.flag:
            # steppers return the last finite state with the flag attached
            trace.flag = f"{state.flag} at t={k * dt:.6g}"
            sample(state, trace.flag)
            break
        state.t = k * dt
        if k % cfg.sample_stride == 0 or k == n_steps:
            sample(state)
    return trace
