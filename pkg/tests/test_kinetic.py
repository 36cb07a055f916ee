import numpy as np
import pytest
from hypothesis import given, strategies as st

from eikonal_entropy.entropy import phi_from_psi, trig
from eikonal_entropy.fields import make_grid
from eikonal_entropy.kinetic import (
    CONTINUOUS_PAIR, JUMP_PROFILE, KineticMeasure, atom_pair_profile, cell_mean_derivative,
    chi_profile, classify_structure, dissipation_from_kinetic, kinetic_chi, kinetic_from_jumps,
    kinetic_residual, l1_of_offset, line_cell_lengths, minimal_primitive, profile_shape,
    sigma_min_jump, staggered_grid, support_mask,
)
from eikonal_entropy.production import jump_cost
from eikonal_entropy.solutions import JumpSpec, synth_constant, synth_jump

TWO_PI = 2 * np.pi


def test_chi_profile_half_circle():
    ns = 64
    c = chi_profile(0.3, ns)
    assert c.sum() * TWO_PI / ns == pytest.approx(np.pi)
    assert c.min() >= 0 and c.max() <= 1 + 1e-14
    # cells well inside the half circle are full
    t = TWO_PI * np.arange(ns) / ns
    inside = np.cos(t - 0.3) > 0.2
    np.testing.assert_allclose(c[inside], 1.0)


def test_chi_profile_equivariant():
    ns = 128
    ds = TWO_PI / ns
    np.testing.assert_allclose(chi_profile(0.3 + 5 * ds, ns), np.roll(chi_profile(0.3, ns), 5), atol=1e-13)


def test_kinetic_chi_matches_profile():
    g = make_grid(8, 8)
    m = synth_constant(g, 1.2)
    chi = kinetic_chi(m, 64)
    np.testing.assert_allclose(chi.values[3, 4], chi_profile(1.2, 64), atol=1e-13)
    assert chi.ns == 64


@given(st.integers(0, 10 ** 6), st.sampled_from([31, 64, 101]))
def test_minimal_primitive_is_optimal(seed, n):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(n)
    d -= d.mean()
    ds = TWO_PI / n
    F = minimal_primitive(d)
    best = l1_of_offset(F, 0.0, ds)
    raw = np.cumsum(d) * ds
    for c in np.linspace(-raw.max(), -raw.min(), 101):
        assert best <= l1_of_offset(raw, c, ds) + 1e-12
    for c in (ds, -ds):
        assert best <= l1_of_offset(F, c, ds) + 1e-12


def test_minimal_primitive_of_cosine():
    ns = 512
    ds = TWO_PI / ns
    t = staggered_grid(ns)
    cell_avg = (np.sin(t) - np.sin(t - ds)) / ds
    F = minimal_primitive(cell_avg)
    # all offsets between the middle order statistics are optimal; any of them is within ds of sin
    assert np.abs(F - np.sin(t)).max() <= ds
    assert l1_of_offset(F, 0.0, ds) == pytest.approx(4.0, rel=1e-4)
    with pytest.raises(ValueError, match="non-zero mean"):
        minimal_primitive(cell_avg + 0.1)


@pytest.mark.parametrize("sbar,beta", [(0.0, 0.1), (0.7, 0.3), (-2.0, 0.7)])
def test_jump_profile_support_sign_mass(sbar, beta):
    ns = 4096
    prof = sigma_min_jump(JumpSpec(sbar, beta), ns)
    assert prof.values.min() >= -1e-12
    assert np.abs(prof.values[~support_mask(prof.spec, ns)]).max(initial=0.0) < 1e-12
    assert prof.mass == pytest.approx(4 * (np.sin(beta) - beta * np.cos(beta)), rel=1e-4)
    assert prof.normalized.sum() * prof.ds == pytest.approx(1.0)


def test_jump_profile_equivariant():
    ns = 2048
    ds = TWO_PI / ns
    a = sigma_min_jump(JumpSpec(0.2, 0.3), ns).values
    b = sigma_min_jump(JumpSpec(0.2 + 7 * ds, 0.3), ns).values
    np.testing.assert_allclose(b, np.roll(a, 7), atol=1e-9)


@pytest.mark.parametrize("sbar,beta", [(0.0, 0.3), (0.7, 0.5), (-1.3, 0.2)])
def test_profile_pairing_gives_jump_cost(sbar, beta):
    psi = trig(0.2, cos={2: 1.0, 3: 0.3}, sin={2: 0.5, 5: -0.2})
    prof = sigma_min_jump(JumpSpec(sbar, beta), 4096)
    d = -np.sum(cell_mean_derivative(psi, prof.angles, prof.ds) * prof.values) * prof.ds
    assert d == pytest.approx(jump_cost(phi_from_psi(psi), sbar, beta), abs=1e-6)


def test_cell_mean_derivative_exact_for_trig():
    psi = trig(cos={3: 1.0})
    ds = 0.01
    t = np.linspace(0, 6, 7)
    exact = (np.cos(3 * (t + ds / 2)) - np.cos(3 * (t - ds / 2))) / ds
    np.testing.assert_allclose(cell_mean_derivative(psi, t, ds), exact, atol=1e-12)


def test_line_cell_lengths():
    g = make_grid(16, 16)
    L = line_cell_lengths(g, np.array([0.1, 0.23]), np.array([0.9, 0.71]))
    assert L.sum() == pytest.approx(np.hypot(0.8, 0.48))
    assert line_cell_lengths(g, np.array([0.3, 0.3]), np.array([0.3, 0.3])).sum() == 0


def test_kinetic_measure_of_jump():
    g = make_grid(64, 64, boundary="bounded")
    sp = JumpSpec(0.0, 0.3)
    k = kinetic_from_jumps(g, [sp], ns=1024)
    prof = sigma_min_jump(sp, 1024)
    assert k.nu.total == pytest.approx(prof.l1 * 1.0, rel=1e-12)
    i, j = np.argwhere(k.profile_index >= 0)[0]
    assert k.cell_profile(i, j).sum() * k.ds == pytest.approx(k.nu.mass[i, j] / g.cell_area)
    assert k.cell_tag(i, j) == JUMP_PROFILE


def test_dissipation_constant_psi_is_zero():
    g = make_grid(32, 32, boundary="bounded")
    k = kinetic_from_jumps(g, [JumpSpec(0.4, 0.3)], ns=512)
    assert np.abs(dissipation_from_kinetic(k, trig(1.5)).mass).max() < 1e-14


def test_kinetic_residual():
    g = make_grid(64, 64, boundary="bounded")
    assert kinetic_residual(synth_constant(g, 0.3), KineticMeasure.empty(g, 256)).max() < 1e-7
    right = []
    for n in (64, 128):
        g = make_grid(n, n, boundary="bounded")
        m = synth_jump(g, JumpSpec(0.0, 0.3))
        wrong = kinetic_residual(m, KineticMeasure.empty(g, 1024)).max()
        right.append(kinetic_residual(m, kinetic_from_jumps(g, m.jumps, ns=1024)).max())
    # first order in h with the true measure; no decay without it
    assert right[1] < 0.6 * right[0]
    assert right[1] < wrong / 5


def test_classify_structure_threshold():
    g = make_grid(32, 32, boundary="bounded")
    k = kinetic_from_jumps(g, [JumpSpec(0.0, 0.15)], ns=4096)
    lo = classify_structure(k, 0.2)
    hi = classify_structure(k, 0.4)
    on = k.profile_index >= 0
    assert lo.jm_delta[on].all() and not hi.jm_delta.any()
    assert np.nanmax(np.abs(lo.two_beta - 0.3)) < 3 * k.ds
    assert lo.shapes[0].sbar == pytest.approx(0.0, abs=2 * k.ds)


def test_profile_shape_atoms_and_noise():
    ns = 1024
    p = atom_pair_profile(0.4, 1, ns)
    sh = profile_shape(p / (np.abs(p).sum() * TWO_PI / ns))
    assert sh.tag == CONTINUOUS_PAIR and sh.sign == 1
    assert sh.sbar == pytest.approx(0.4, abs=TWO_PI / ns)
    assert profile_shape(np.zeros(ns)).tag == "untagged"
    assert profile_shape(np.ones(ns)).tag == "untagged"
