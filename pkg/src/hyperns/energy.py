"""Energy norms, Lyapunov-type functionals and envelope fitting.

Notation: ``|f|_k`` is the ``D(A^{k/2})`` norm, evaluated by applications
of A (k > 0) or Stokes solves (k < 0). The phase-space norm of a pair
``xi = (u, u')`` at level ``s`` is

    full:  eps |u'|_s^2 + |u'|_{s-1}^2 + |u|_{s+1}^2
    trunc: eps |u'|_s^2 + |u|_{s+1}^2
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grids import VelocityField, divergence_residual
from .stokes import StokesContext


class FunctionalNotPositiveError(ValueError):
    pass


class NoEnvelopeError(ValueError):
    pass


@dataclass
class XiPair:
    u: VelocityField
    ut: VelocityField
    eps: float

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ValueError("u and ut must live on the same grid")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def scaled(self, c: float) -> "XiPair":
        return XiPair(c * self.u, c * self.ut, self.eps)


def _solenoidal(ctx, f):
    return ctx.project(f) if divergence_residual(f) > 1e-12 else f


def _inverse(ctx: StokesContext, f: VelocityField) -> VelocityField:
    return ctx.shifted(0.0, 1.0).solve(f)


def norm_sq(ctx: StokesContext, f: VelocityField, k: int) -> float:
    """``|f|_k^2`` for ``k`` in -2..2 (``f`` projected first if needed)."""
    f = _solenoidal(ctx, f)
    if k == 0:
        return f.dot(f)
    if k == 1:
        return max(f.dot(ctx.apply(f, check=False)), 0.0)
    if k == 2:
        Af = ctx.apply(f, check=False)
        return Af.dot(Af)
    if k == -1:
        return max(f.dot(_inverse(ctx, f)), 0.0)
    if k == -2:
        g = _inverse(ctx, f)
        return g.dot(g)
    raise ValueError(f"unsupported index k={k}")


def _check_level(s):
    if s not in (-1, 0, 1):
        raise ValueError(f"unsupported s={s}; expected -1, 0 or 1")


def full_norm(ctx: StokesContext, xi: XiPair, s: int = 1) -> float:
    _check_level(s)
    total = (
        xi.eps * norm_sq(ctx, xi.ut, s)
        + norm_sq(ctx, xi.ut, s - 1)
        + norm_sq(ctx, xi.u, s + 1)
    )
    return math.sqrt(total)


def trunc_norm(ctx: StokesContext, xi: XiPair, s: int = 1) -> float:
    _check_level(s)
    return math.sqrt(xi.eps * norm_sq(ctx, xi.ut, s) + norm_sq(ctx, xi.u, s + 1))


# -- coupled functionals ------------------------------------------------------

def default_alpha(lambda1: float, eps: float) -> float:
    return min(lambda1 / 4.0, 1.0 / (4.0 * eps))


def equivalence_constants(alpha: float, eps: float, lambda1: float, samples: int = 4001):
    """Extreme eigenvalues of the per-mode form relative to the truncated norm.

    In each eigenmode of A with eigenvalue ``mu``, writing ``t = 1/mu`` in
    ``(0, 1/lambda1]``, the functional is the quadratic form
    ``[[1 + a t, a sqrt(eps t)], [a sqrt(eps t), 1]]`` in the variables whose
    squares sum to the truncated norm. Returns ``(c1, c2)``.
    """
    t = np.linspace(0.0, 1.0 / lambda1, samples)[1:]
    at = alpha * t
    off = alpha * np.sqrt(eps * t)
    tr = 2.0 + at
    disc = np.sqrt(at * at + 4.0 * off * off)
    return float(np.min(0.5 * (tr - disc))), float(np.max(0.5 * (tr + disc)))


@dataclass
class FunctionalValue:
    value: float
    c1: float
    c2: float
    reference: float
    warning: str | None = None

    def __float__(self):
        return self.value


def e_minus1_functional(ctx: StokesContext, xi: XiPair, alpha: float | None = None) -> FunctionalValue:
    """``|xi|^2_{trunc,-1} + alpha |w|_{-1}^2 + 2 eps alpha (w, w')_{-1}``.

    ``reference`` is the truncated norm squared, so ``c1 <= value/reference <= c2``.
    """
    lam = ctx.lambda1
    if alpha is None:
        alpha = default_alpha(lam, xi.eps)
    w = _solenoidal(ctx, xi.u)
    wt = _solenoidal(ctx, xi.ut)
    inv_w = _inverse(ctx, w)
    inv_wt = _inverse(ctx, wt)
    trunc = xi.eps * max(wt.dot(inv_wt), 0.0) + w.dot(w)
    value = trunc + alpha * max(w.dot(inv_w), 0.0) + 2.0 * xi.eps * alpha * wt.dot(inv_w)
    c1, c2 = equivalence_constants(alpha, xi.eps, lam)
    if value < -1e-14 * max(trunc, 1e-300):
        raise FunctionalNotPositiveError("alpha too large for positivity")
    return FunctionalValue(value, c1, c2, trunc)


def e1_functional(ctx: StokesContext, xi: XiPair, alpha: float | None = None) -> float:
    """``eps |u'|_1^2 + |u|_2^2 + alpha |u|_1^2 + 2 eps alpha (u', A u)``."""
    if alpha is None:
        alpha = default_alpha(ctx.lambda1, xi.eps)
    u = _solenoidal(ctx, xi.u)
    ut = _solenoidal(ctx, xi.ut)
    Au = ctx.apply(u, check=False)
    Aut = ctx.apply(ut, check=False)
    return (
        xi.eps * ut.dot(Aut)
        + Au.dot(Au)
        + alpha * u.dot(Au)
        + 2.0 * xi.eps * alpha * ut.dot(Au)
    )


COMPARABILITY_BOUND = 10.0


def ebar1_functional(ctx: StokesContext, xi: XiPair, gweight: float,
                     alpha: float | None = None) -> FunctionalValue:
    """``E1 + gweight * (2 eps (u', A u) + |u|_1^2)`` with a comparability check.

    ``c1 = c2`` is the observed ratio to ``E1``; a ratio outside
    ``[1/10, 10]`` sets ``warning`` and emits a ``RuntimeWarning``.
    """
    if gweight < 0:
        raise ValueError("gweight must be nonnegative")
    e1 = e1_functional(ctx, xi, alpha)
    u = _solenoidal(ctx, xi.u)
    ut = _solenoidal(ctx, xi.ut)
    Au = ctx.apply(u, check=False)
    value = e1 + gweight * (2.0 * xi.eps * ut.dot(Au) + u.dot(Au))
    ratio = value / e1 if e1 > 0 else (1.0 if value == 0 else math.inf)
    warning = None
    if not (1.0 / COMPARABILITY_BOUND <= ratio <= COMPARABILITY_BOUND):
        warning = f"comparability ratio {ratio:.3g} outside [1/{COMPARABILITY_BOUND:g}, {COMPARABILITY_BOUND:g}]"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return FunctionalValue(value, ratio, ratio, e1, warning)


# -- dissipative envelope -------------------------------------------------------

@dataclass
class EnvelopeFit:
    Q_fit: float
    alpha_fit: float
    Q0: float
    n_transient: int

    def __iter__(self):
        yield self.Q_fit
        yield self.alpha_fit


def fit_dissipative_envelope(times, values, tail_fraction: float = 0.2,
                             cutoff: float = 1e-3) -> EnvelopeFit:
    """Fit ``value(t) <= Q0 exp(-alpha t) + Q_fit``.

    ``Q_fit`` is the maximum over the final ``tail_fraction`` of samples;
    ``alpha`` is the negated least-squares slope of ``log(value - Q_fit)``
    over the leading samples whose excess stays above ``cutoff`` times the
    initial excess; ``Q0`` is the smallest amplitude making the envelope
    hold on those samples.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < 5:
        raise ValueError("need at least 5 aligned samples")
    if not np.isfinite(v).all():
        raise NoEnvelopeError("no dissipative envelope: non-finite samples")
    n_tail = max(1, int(math.ceil(tail_fraction * t.size)))
    q_g = float(v[-n_tail:].max())
    excess = v - q_g
    if excess[0] <= 0:
        raise NoEnvelopeError("no dissipative envelope: series does not decay")
    below = np.flatnonzero(excess < cutoff * excess[0])
    stop = int(below[0]) if below.size else t.size
    keep = np.flatnonzero(excess[:stop] > 0)
    if keep.size < 2:
        raise NoEnvelopeError("no dissipative envelope: transient too short to fit")
    slope, _ = np.polyfit(t[keep], np.log(excess[keep]), 1)
    alpha = -float(slope)
    if not alpha > 0:
        raise NoEnvelopeError("no dissipative envelope: fitted decay rate is not positive")
    q0 = float(np.max(excess[keep] * np.exp(alpha * (t[keep] - t[0]))))
    return EnvelopeFit(q_g, alpha, q0, int(keep.size))


@dataclass
class EnergyReport:
    times: np.ndarray
    full_norm_e1: np.ndarray
    trunc_norm_e1: np.ndarray
    e_minus1: np.ndarray
    fitted_Q: float = math.nan
    fitted_alpha: float = math.nan

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.full_norm_e1 = np.asarray(self.full_norm_e1, dtype=float)
        self.trunc_norm_e1 = np.asarray(self.trunc_norm_e1, dtype=float)
        self.e_minus1 = np.asarray(self.e_minus1, dtype=float)
        n = self.times.size
        if not (self.full_norm_e1.size == self.trunc_norm_e1.size == self.e_minus1.size == n):
            raise ValueError("report arrays must have equal length")

    def fit(self) -> "EnergyReport":
        """Fit the envelope to the full norm (not squared); NaNs if none exists."""
        try:
            fit = fit_dissipative_envelope(self.times, np.sqrt(self.full_norm_e1))
            self.fitted_Q, self.fitted_alpha = fit.Q_fit, fit.alpha_fit
        except (NoEnvelopeError, ValueError):
            self.fitted_Q, self.fitted_alpha = math.nan, math.nan
        return self

    def to_json(self) -> dict:
        def num(x):
            return None if not math.isfinite(x) else float(x)

        return {
            "times": [float(x) for x in self.times],
            "full_e1": [float(x) for x in self.full_norm_e1],
            "Q_fit": num(self.fitted_Q),
            "alpha_fit": num(self.fitted_alpha),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# -- Jeffrey energy identity ------------------------------------------------------

def jeffrey_energy(state) -> float:
    """``|u|^2 + eps |sigma|^2``."""
    return state.u.dot(state.u) + state.eps * state.stress_norm_sq()


@dataclass
class JeffreyResidual:
    times: np.ndarray
    residual: np.ndarray
    residual_div_variant: np.ndarray
    energy: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def jeffrey_energy_residual(trace, g=None, eps: float | None = None, dt: float | None = None) -> JeffreyResidual:
    """Residual of ``1/2 d/dt(|u|^2 + eps |sigma|^2) + |sigma|^2 - (u, g)`` on a trace.

    ``trace`` holds Jeffrey states at uniform spacing ``dt``; the derivative
    is the centred difference, so residuals exist at interior samples. The
    ``residual_div_variant`` column replaces ``|sigma|^2`` by
    ``|div sigma|^2`` for comparison.
    """
    from .hns2d import as_forcing

    states = list(trace)
    if len(states) < 3:
        empty = np.zeros(0)
        return JeffreyResidual(empty, empty, empty, np.array([jeffrey_energy(s) for s in states]))
    if eps is None:
        eps = states[0].eps
    if dt is None:
        dt = states[1].t - states[0].t
    grid = states[0].u.grid
    forcing = as_forcing(g, grid)
    energy = np.array([s.u.dot(s.u) + eps * s.stress_norm_sq() for s in states])
    res, res_div, times = [], [], []
    for k in range(1, len(states) - 1):
        s = states[k]
        dE = 0.5 * (energy[k + 1] - energy[k - 1]) / (2.0 * dt)
        work = s.u.dot(forcing.at(s.t))
        ds = s.stress_divergence()
        res.append(dE + s.stress_norm_sq() - work)
        res_div.append(dE + ds.dot(ds) - work)
        times.append(s.t)
    return JeffreyResidual(np.array(times), np.array(res), np.array(res_div), energy)
