import json
import math

import numpy as np
import pytest

from hyperns.energy import (
    EnergyReport,
    FunctionalNotPositiveError,
    NoEnvelopeError,
    XiPair,
    default_alpha,
    e1_functional,
    e_minus1_functional,
    ebar1_functional,
    equivalence_constants,
    fit_dissipative_envelope,
    full_norm,
    jeffrey_energy_residual,
    norm_sq,
    trunc_norm,
)
from hyperns.grids import VelocityField
from hyperns.hns2d import JeffreyState
from hyperns.stokes import random_solenoidal


def _pair(ctx, rng, eps=0.1):
    return XiPair(random_solenoidal(ctx, rng, True), random_solenoidal(ctx, rng, True), eps)


def _zero(ctx, eps=0.1):
    z = VelocityField.zeros(ctx.grid)
    return XiPair(z, z, eps)


@pytest.mark.parametrize("s", [-1, 0, 1])
def test_norms_vanish_at_zero(ctx16, s):
    assert full_norm(ctx16, _zero(ctx16), s) == 0
    assert trunc_norm(ctx16, _zero(ctx16), s) == 0


def test_full_norm_reductions(ctx16, rng):
    u = random_solenoidal(ctx16, rng, True)
    z = VelocityField.zeros(ctx16.grid)
    Au = ctx16.apply(u)
    assert full_norm(ctx16, XiPair(u, z, 0.3), 1) ** 2 == pytest.approx(Au.dot(Au), rel=1e-12)
    ut = random_solenoidal(ctx16, rng, True)
    assert trunc_norm(ctx16, XiPair(z, ut, 0.3), 1) ** 2 == pytest.approx(0.3 * ut.dot(ctx16.apply(ut)), rel=1e-12)


@pytest.mark.parametrize("s", [-1, 0, 1])
def test_eps_scaling_of_full_norm(ctx16, rng, s):
    xi = _pair(ctx16, rng)
    a = full_norm(ctx16, XiPair(xi.u, xi.ut, 0.04), s) ** 2
    b = full_norm(ctx16, XiPair(xi.u, xi.ut, 0.01), s) ** 2
    assert a - b == pytest.approx(0.03 * norm_sq(ctx16, xi.ut, s), rel=1e-10)


def test_trunc_below_full(ctx16, rng):
    for _ in range(10):
        xi = _pair(ctx16, rng, eps=float(rng.uniform(1e-3, 1)))
        for s in (-1, 0, 1):
            assert trunc_norm(ctx16, xi, s) <= full_norm(ctx16, xi, s)


def test_negative_index_norms_match_eigen_scaling(ctx16):
    lam, v1 = ctx16.eigenpair()
    assert norm_sq(ctx16, v1, -1) == pytest.approx(1 / lam, rel=1e-9)
    assert norm_sq(ctx16, v1, -2) == pytest.approx(1 / lam**2, rel=1e-9)
    with pytest.raises(ValueError):
        norm_sq(ctx16, v1, 3)


def test_e_minus1_zero_and_no_velocity_rate(ctx16, rng):
    assert e_minus1_functional(ctx16, _zero(ctx16)).value == 0
    w = random_solenoidal(ctx16, rng, True)
    alpha = 5.0
    val = e_minus1_functional(ctx16, XiPair(w, VelocityField.zeros(ctx16.grid), 0.1), alpha).value
    assert val == pytest.approx(w.dot(w) + alpha * norm_sq(ctx16, w, -1), rel=1e-12)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_e_minus1_positivity_margin(ctx16, rng, eps):
    c1, c2 = equivalence_constants(default_alpha(ctx16.lambda1, eps), eps, ctx16.lambda1)
    assert c1 >= 0.5
    for _ in range(20):
        u = random_solenoidal(ctx16, rng, True)
        ut = float(rng.uniform(-50, 50)) * u + random_solenoidal(ctx16, rng, True)
        fv = e_minus1_functional(ctx16, XiPair(u, ut, eps))
        assert fv.value >= 0.5 * fv.reference
        assert c1 * fv.reference <= fv.value * (1 + 1e-12) and fv.value <= c2 * fv.reference * (1 + 1e-12)


def test_e_minus1_rejects_alpha_without_positivity(ctx16):
    lam, v1 = ctx16.eigenpair()
    xi = XiPair(v1, -(lam / 4) * v1, 1.0)
    with pytest.raises(FunctionalNotPositiveError, match="alpha too large"):
        e_minus1_functional(ctx16, xi, alpha=lam / 4)


def test_ebar1_reductions(ctx16, rng):
    assert ebar1_functional(ctx16, _zero(ctx16), 1.0).value == 0
    xi = _pair(ctx16, rng)
    assert ebar1_functional(ctx16, xi, 0.0).value == e1_functional(ctx16, xi)


def test_ebar1_gap_is_linear_in_eps(ctx16, rng):
    xi = _pair(ctx16, rng)
    gaps = []
    epss = [1e-2, 1e-3, 1e-4]
    for eps in epss:
        x = XiPair(xi.u, xi.ut, eps)
        gaps.append(abs(ebar1_functional(ctx16, x, 2.0).value - e1_functional(ctx16, x) - 2.0 * norm_sq(ctx16, xi.u, 1)))
    slope = np.polyfit(np.log(epss), np.log(gaps), 1)[0]
    assert slope == pytest.approx(1.0, abs=1e-6)


def test_ebar1_warns_when_not_comparable(ctx16, rng):
    xi = _pair(ctx16, rng)
    with pytest.warns(RuntimeWarning, match="comparability"):
        fv = ebar1_functional(ctx16, xi, 1e6)
    assert fv.warning


def test_envelope_on_synthetic_decay():
    t = np.linspace(0, 40, 401)
    fit = fit_dissipative_envelope(t, 5 * np.exp(-0.3 * t) + 1)
    Q, alpha = fit
    assert alpha == pytest.approx(0.3, abs=0.02)
    assert Q == pytest.approx(1.0, abs=1e-3)
    assert np.all(5 * np.exp(-0.3 * t) + 1 <= fit.Q0 * np.exp(-alpha * t) + Q + 1e-9)


def test_envelope_rejects_constant_and_short_series():
    with pytest.raises(NoEnvelopeError):
        fit_dissipative_envelope(np.arange(10.0), np.ones(10))
    with pytest.raises(ValueError):
        fit_dissipative_envelope(np.arange(3.0), np.ones(3))
    with pytest.raises(NoEnvelopeError):
        fit_dissipative_envelope(np.arange(10.0), np.exp(np.arange(10.0)))


def test_energy_report_json():
    t = np.linspace(0, 10, 50)
    full = (3 * np.exp(-t) + 1) ** 2
    rep = EnergyReport(t, full, full, np.zeros_like(t)).fit()
    doc = json.loads(rep.dumps())
    assert set(doc) == {"times", "full_e1", "Q_fit", "alpha_fit"}
    assert doc["alpha_fit"] == pytest.approx(1.0, abs=0.05)
    flat = EnergyReport(t, np.ones_like(t), np.ones_like(t), np.ones_like(t)).fit()
    assert flat.to_json()["Q_fit"] is None and math.isnan(flat.fitted_alpha)


def test_jeffrey_residual_zero_trace(ctx16):
    z = VelocityField.zeros(ctx16.grid)
    states = [JeffreyState.at_rest_stress(z, 0.5, t=0.1 * k) for k in range(6)]
    res = jeffrey_energy_residual(states, None)
    assert res.residual.size == 4 and res.max_abs == 0
