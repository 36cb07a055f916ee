import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import dblquad, quad

from eikonal_entropy.entropy import phi_from_psi, trig
from eikonal_entropy.fields import make_grid, smooth_test_battery
from eikonal_entropy.production import (
    GRAD_RHO_MAX, Mollifier, commutator_w, identity_residual, jump_cost, loglog_slope, mollify,
    production_direct, rho, small_jump_bound_check, smooth_divfree_field, sup_measure,
)
from eikonal_entropy.solutions import JumpSpec, synth_constant, synth_jump, synth_vortex


def test_rho_mass_and_gradient_bound():
    mass, _ = dblquad(lambda r, t: rho(np.array(r * r)) * r, 0, 2 * np.pi, 0, 1)
    assert mass == pytest.approx(1.0, rel=1e-10)
    r = np.linspace(0, 1, 200001)
    drho = np.abs(np.gradient(rho(r * r), r))
    assert drho.max() == pytest.approx(GRAD_RHO_MAX, rel=1e-6)
    assert GRAD_RHO_MAX == pytest.approx(1.4703, abs=1e-4)


def test_mollifier_discrete_mass():
    g = make_grid(256, 256)
    assert Mollifier(g, 16 * g.h).raw_mass == pytest.approx(1.0, abs=1e-3)
    assert Mollifier(g, 4 * g.h).kernel.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError, match="eps below resolution"):
        Mollifier(g, 1.5 * g.h)


def test_mollify_constant_and_linear():
    g = make_grid(64, 64, boundary="bounded")
    me = mollify(synth_constant(g, 0.4), "4h")
    np.testing.assert_allclose(me.values[..., 0], np.cos(0.4), rtol=1e-14)
    assert me.grid.nx == 64 - 2 * 4 and me.margin == 4
    # symmetric kernel reproduces affine functions
    X, Y = g.centers()
    from eikonal_entropy.fields import VectorField2
    lin = VectorField2(g, np.stack([0.3 + 0.1 * X, 0.2 - 0.05 * Y], axis=-1))
    ml = mollify(lin, "4h")
    np.testing.assert_allclose(ml.values, lin.values[4:-4, 4:-4], atol=1e-14)


def test_mollified_jump_strip():
    g = make_grid(256, 256, boundary="bounded")
    beta = 0.4
    m = synth_jump(g, JumpSpec(0.0, beta))
    me = mollify(m, "8h")
    n = np.hypot(me.values[..., 0], me.values[..., 1])
    assert n.max() <= 1 + 1e-14
    X, _ = me.grid.centers()
    strip = np.abs(X - 0.5) < 8 * g.h - 1e-12
    assert n[np.abs(X - 0.5) < 4 * g.h].max() < 1.0
    w = commutator_w(m, "8h").values
    assert w.min() >= -1e-14
    near = np.abs(X - 0.5) < g.h
    np.testing.assert_allclose(w[near], np.sin(beta) ** 2, rtol=0.02)
    assert np.abs(w[~strip]).max() < 1e-14


def test_production_constant_zero(cos2):
    for bc in ("bounded", "periodic"):
        g = make_grid(32, 32, boundary=bc)
        assert production_direct(synth_constant(g, 1.1), cos2).total_variation < 1e-14


def _phi_quad(psi, theta):
    re = quad(lambda s: psi(s) * np.cos(s), theta - np.pi / 2, theta + np.pi / 2, epsabs=1e-13)[0]
    im = quad(lambda s: psi(s) * np.sin(s), theta - np.pi / 2, theta + np.pi / 2, epsabs=1e-13)[0]
    return re + 1j * im


@given(st.floats(-np.pi, np.pi), st.floats(0.01, 1.5))
def test_jump_cost_against_quadrature(sbar, beta):
    psi = lambda s: 0.3 + np.sin(2 * s) - 0.5 * np.cos(3 * s) + 0.2 * np.cos(4 * s)
    e = phi_from_psi(trig(0.3, cos={3: -0.5, 4: 0.2}, sin={2: 1.0}))
    d = _phi_quad(psi, sbar + beta) - _phi_quad(psi, sbar - beta)
    assert jump_cost(e, sbar, beta) == pytest.approx((np.exp(-1j * sbar) * d).real, abs=1e-10)


def test_jump_cost_closed_forms(sin2):
    # psi = 1 gives Phi = 2m, which is divergence free
    one = phi_from_psi(trig(1.0))
    np.testing.assert_allclose(one.phi(np.array([0.0, 0.3])), 2 * np.exp(1j * np.array([0.0, 0.3])))
    assert abs(jump_cost(one, 0.3, 1.2)) < 1e-14
    # anti-pi-periodic generators give constant entropies
    c1 = phi_from_psi(trig(cos={1: 1.0}, sin={3: 0.4}))
    assert abs(jump_cost(c1, 0.3, 0.7)) < 1e-14
    assert abs(jump_cost(sin2, 0.0, 1e-3)) < 1e-8
    with pytest.raises(ValueError):
        jump_cost(sin2, 0.0, 0.0)


def test_direct_production_of_jump_matches_cost(sin2):
    g = make_grid(256, 256, boundary="bounded")
    m = synth_jump(g, JumpSpec(0.0, 0.3))
    rep = production_direct(m, sin2)
    length = 1.0 - 2 * g.hy
    assert rep.measure.total == pytest.approx(jump_cost(sin2, 0.0, 0.3) * length, rel=1e-12)
    X, _ = g.centers()
    assert np.abs(rep.measure.mass[np.abs(X - 0.5) > 2 * g.h]).max() == 0.0


def test_production_linear_in_entropy(cos2, sin2):
    g = make_grid(128, 128, boundary="bounded")
    m = synth_jump(g, JumpSpec(0.6, 0.3))
    a = production_direct(m, cos2).measure.mass
    b = production_direct(m, sin2).measure.mass
    c = production_direct(m, 2.0 * cos2 + (-0.5) * sin2).measure.mass
    np.testing.assert_allclose(c, 2 * a - 0.5 * b, atol=1e-15)


def test_production_pairing_and_unit_check(sin2):
    g = make_grid(128, 128)
    m = synth_jump(g, JumpSpec(0.0, 0.3))
    rep = production_direct(m, sin2, smooth_test_battery(g, 5, seed=0))
    assert rep.pairing_errors.max() < 1e-12
    bad = m * 1.1
    with pytest.raises(ValueError, match="non-unit"):
        production_direct(bad, sin2)


def test_production_masks_vortex_core(sin2):
    g = make_grid(64, 64, boundary="bounded")
    m = synth_vortex(g)
    rep = production_direct(m, sin2)
    assert rep.masked.sum() > (~m.valid).sum()
    assert np.all(rep.measure.mass[rep.masked] == 0)


def test_sup_measure_dominates(cos2, sin2):
    g = make_grid(128, 128, boundary="bounded")
    m = synth_jump(g, JumpSpec(0.5, 0.4))
    s = sup_measure(m, [cos2, sin2])
    for e in (cos2, sin2):
        assert np.all(s.measure.mass >= np.abs(production_direct(m, e).measure.mass) - 1e-15)
    assert set(np.unique(s.argmax)) <= {0, 1}
    with pytest.raises(ValueError, match="empty entropy family"):
        sup_measure(m, [])


def test_small_jump_ratio_scales_with_entropy(sin2):
    t1 = small_jump_bound_check(sin2, [0.4, 0.2], 2.0, nx=128)
    t2 = small_jump_bound_check(2.0 * sin2, [0.4, 0.2], 2.0, nx=128)
    np.testing.assert_allclose(t2.ratios, 2 * t1.ratios, rtol=1e-12)
    with pytest.raises(ValueError):
        small_jump_bound_check(sin2, [0.2], 3.0, nx=64)


def test_identity_residual_converges(cos2):
    res = [identity_residual(smooth_divfree_field(make_grid(n, n)), cos2) for n in (32, 64, 128)]
    assert res[0] > res[1] > res[2]
    assert loglog_slope([32, 64, 128], res) == pytest.approx(-2, abs=0.2)
    with pytest.raises(ValueError):
        identity_residual(smooth_divfree_field(make_grid(16, 16, boundary="bounded")), cos2)


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0])
    assert loglog_slope(x, 3 * x ** 2.5) == pytest.approx(2.5)
    assert np.isnan(loglog_slope(x, [1.0, 0.0, 2.0]))
