import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from hyperns.burgers1d import (
    BurgersState,
    DomainTooSmallError,
    blowup_certificate,
    bump_data,
    burgers_step,
    comparison_coefficient,
    comparison_ode,
    cone_energy,
    critical_amplitude,
    leapfrog_dt,
    moment_y,
    parabolic_step,
    run_burgers,
    stable_dt,
    support_width,
)
from hyperns.grids import Grid1D
from hyperns.hns2d import scalar_mode_solution


def _bump(x):
    return np.where(np.abs(x) < 1, (1 - x**2) ** 2, 0.0)


def test_zero_state_stays_zero():
    g = Grid1D(4.0, 40, -2.0)
    s = BurgersState.from_data(g, np.zeros_like(g.x), eps=0.5)
    for _ in range(5):
        s = burgers_step(s, stable_dt(s))
    assert not s.u.any() and not s.ut.any()
    assert support_width(s) is None
    assert cone_energy(s, 1.0) == 0
    assert moment_y(s) == 0


@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_linear_mode_oracle(eps):
    L, k, T = 2.0, 1, 1.0
    errs = []
    for n, dt in ((40, 0.02), (80, 0.01)):
        g = Grid1D(L, n)
        s = BurgersState.from_data(g, lambda x: np.sin(k * np.pi * x / L), eps=eps)
        for _ in range(int(round(T / dt))):
            s = burgers_step(s, dt, linear=True)
        y = scalar_mode_solution(eps, (k * np.pi / L) ** 2, 1.0, 0.0, T)
        errs.append(np.max(np.abs(s.u - y * np.sin(k * np.pi * g.x / L))))
    assert errs[1] < 1e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_small_eps_approaches_parabolic_model():
    g = Grid1D(20.0, 400, -10.0)
    u0 = 0.3 * np.exp(-g.x**2)
    ref = u0.copy()
    for _ in range(500):
        ref = parabolic_step(ref, 0.01, g.h)
    diffs = []
    for eps in (4e-3, 1e-3):
        fin = run_burgers(BurgersState.from_data(g, u0, eps=eps), 5.0, sample_every=5.0)
        assert fin.flag is None
        diffs.append(math.sqrt(g.h * np.sum((fin.u - ref) ** 2)))
    assert diffs[1] < diffs[0]
    assert diffs[1] <= math.sqrt(1e-3) * math.sqrt(g.h * np.sum(u0**2))


def test_support_stays_in_cone_with_leapfrog():
    g = Grid1D.whole_line(2.0, 0.02)
    s = BurgersState.from_data(g, _bump, eps=1.0)
    widths = []
    run_burgers(s, 2.0, sample_every=0.1, scheme="leapfrog",
                on_sample=lambda st: widths.append((st.t, support_width(st, 1e-8), support_width(st, 1e-10))))
    for t, a, b in widths:
        assert -1 - t - g.h <= a[0] and a[1] <= 1 + t + g.h
        assert abs(a[0] - b[0]) <= 4 * g.h and abs(a[1] - b[1]) <= 4 * g.h
    assert widths[-1][0] == pytest.approx(2.0, abs=leapfrog_dt(g, 1.0))


def test_support_raises_when_domain_too_small():
    g = Grid1D(4.0, 40, -2.0)
    s = BurgersState.from_data(g, lambda x: np.ones_like(x), eps=1.0)
    s.u[1] = 1.0
    with pytest.raises(DomainTooSmallError, match="domain too small"):
        support_width(s)


def test_cone_energy_gronwall_envelope():
    g = Grid1D.whole_line(2.5, 0.02)
    rows = []
    run_burgers(BurgersState.from_data(g, _bump, eps=1.0), 2.5, sample_every=0.05,
                on_sample=lambda st: rows.append((st.t, cone_energy(st, 3.0), st.u_inf())))
    t, e, uinf = map(np.array, zip(*rows))
    growth = np.exp(np.concatenate([[0.0], np.cumsum(np.diff(t) * (uinf[1:] + uinf[:-1]))]))
    assert np.all(e <= e[0] * growth * (1 + 1e-2) + 1e-10)


def test_cone_energy_vanishes_for_data_outside_base():
    g = Grid1D.whole_line(2.0, 0.02)
    far = lambda x: np.where(np.abs(x - 4.5) < 1, (1 - (x - 4.5) ** 2) ** 2, 0.0)
    vals = []
    run_burgers(BurgersState.from_data(g, far, eps=1.0), 1.9, sample_every=0.1,
                on_sample=lambda st: vals.append(cone_energy(st, 2.0)))
    assert max(vals) <= 1e-10
    with pytest.raises(ValueError):
        cone_energy(BurgersState.from_data(g, far, eps=1.0), 0.0)


def test_moment_of_exponential_window():
    for h, tol in ((0.01, 1e-3), (0.005, 2.5e-4)):
        g = Grid1D(4.0, int(round(4.0 / h)), -2.0)
        u = np.where((g.x >= 0) & (g.x <= 1), np.exp(g.x), 0.0)
        # nodes on the jumps take the mean of the one-sided limits
        u[np.isclose(g.x, 0.0) | np.isclose(g.x, 1.0)] *= 0.5
        assert moment_y(g, u) == pytest.approx(1.0, abs=tol)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_moment_is_linear(a, b, seed):
    g = Grid1D(6.0, 60, -3.0)
    rng = np.random.default_rng(seed)
    u, w = rng.standard_normal(g.x.size), rng.standard_normal(g.x.size)
    lhs = moment_y(g, a * u + b * w)
    rhs = a * moment_y(g, u) + b * moment_y(g, w)
    assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(a) + abs(b)) * g.x.size)


def test_comparison_coefficient_and_ode():
    T = 5.0
    assert comparison_coefficient(T) == pytest.approx(math.exp(-6) / 12)
    sol, t_blow = comparison_ode(1.0, 0.0, comparison_coefficient(T), T)
    assert t_blow is None and np.isfinite(sol.y[:, -1]).all()
    sol, t_blow = comparison_ode(1e4, 0.0, comparison_coefficient(T), T)
    assert t_blow is not None and t_blow < T


def test_critical_amplitude_at_five():
    assert critical_amplitude(5.0) == pytest.approx(753.79, rel=2e-3)


def test_certificate_small_data_not_certified():
    cert = blowup_certificate(-1.0, 5.0)
    assert cert.verdict == "no blow-up certified"
    assert cert.t_blow_observed is None
    json.dumps(cert.to_json())


def test_certificate_sign_dependence():
    M = 1.2 * critical_amplitude(5.0)
    neg = blowup_certificate(-M, 5.0, sample_every=0.002)
    pos = blowup_certificate(M, 5.0, sample_every=0.002)
    assert neg.y0 == pytest.approx(-pos.y0)
    assert neg.verdict == "blow-up certified" and neg.t_blow_observed is not None
    assert pos.verdict == "no blow-up certified"


def test_blowup_flag_on_large_data():
    g = Grid1D.whole_line(1.0, 0.05)
    s = BurgersState.from_data(g, bump_data(-2000.0), eps=1.0)
    fin = run_burgers(s, 1.0)
    assert fin.flag and "blow-up" in fin.flag
