import numpy as np
import pytest

from eikonal_entropy.fields import make_grid, shift_difference_cells
from eikonal_entropy.solutions import (
    JumpSpec, check_solution, regular_polygon, synth_constant, synth_distance_gradient, synth_jump,
    synth_laminate, synth_piecewise, synth_vortex, two_family_laminate, weak_divergence, wrap_angle,
)
from eikonal_entropy.fields import smooth_test_battery


def test_constant():
    g = make_grid(16, 16)
    np.testing.assert_array_equal(synth_constant(g, 0.0).values[..., 0], 1.0)
    np.testing.assert_allclose(synth_constant(g, np.pi / 2).values, np.broadcast_to([0, 1], (16, 16, 2)),
                               atol=1e-16)
    assert check_solution(synth_constant(g, 0.7))["weak_divergence"] < 1e-13


def test_jumpspec_traces_and_normal():
    s = JumpSpec(0.0, np.pi / 6)
    np.testing.assert_allclose(s.m_plus, [np.cos(np.pi / 6), np.sin(np.pi / 6)])
    np.testing.assert_allclose(s.m_minus, [np.cos(np.pi / 6), -np.sin(np.pi / 6)])
    assert s.normal @ (s.m_plus - s.m_minus) == pytest.approx(0.0, abs=1e-15)
    for b in (0.0, np.pi / 2, -0.1):
        with pytest.raises(ValueError, match="beta"):
            JumpSpec(0.3, b)


# bump quadrature on bounded grids is spectrally accurate but not exact
@pytest.mark.parametrize("bc,tol", [("bounded", 1e-8), ("periodic", 1e-12)])
def test_jump_weak_divergence_machine_precision(bc, tol):
    g = make_grid(128, 128, boundary=bc)
    m = synth_jump(g, JumpSpec(0.0, np.pi / 6, (0.5, 0.5)))
    assert weak_divergence(m, smooth_test_battery(g, 100, seed=3)).max() < tol
    # normal component continuous
    np.testing.assert_allclose(m.values[..., 0], np.cos(np.pi / 6), atol=1e-15)


def test_periodic_jump_gets_partner():
    g = make_grid(64, 64)
    m = synth_jump(g, JumpSpec(0.0, 0.3, (0.3, 0.5)))
    assert len(m.jumps) == 2
    assert m.jumps[0].sign == -m.jumps[1].sign
    d = shift_difference_cells(m, 1, 0)
    assert len(np.unique(np.nonzero(np.any(d.values != 0, axis=-1))[0])) == 2


def test_small_beta_tends_to_constant():
    g = make_grid(32, 32, boundary="bounded")
    m = synth_jump(g, JumpSpec(0.4, 1e-9))
    np.testing.assert_allclose(m.values, synth_constant(g, 0.4).values, atol=1e-8)


def test_tilted_jump_divergence_first_order():
    errs = []
    for n in (64, 128, 256):
        g = make_grid(n, n, boundary="bounded")
        m = synth_jump(g, JumpSpec(0.7, 0.3))
        errs.append(weak_divergence(m, smooth_test_battery(g, 10, seed=1)).max())
    assert errs[2] < errs[0] / 2.5


def test_laminate_geometry():
    g = make_grid(128, 128)
    m = synth_laminate(g, 0.0, 0.2, 0.25, 2)
    assert len(m.jumps) == 2
    assert sum(j.length(g) for j in m.jumps) == pytest.approx(2.0)
    # BV variation: sum of one-cell increments / h
    d = shift_difference_cells(m, 1, 0)
    tv = np.hypot(d.values[..., 0], d.values[..., 1]).sum() * g.hy
    assert tv == pytest.approx(2 * np.sin(0.2) * 2)
    assert check_solution(m)["weak_divergence"] < 1e-12


def test_laminate_errors():
    g = make_grid(64, 64)
    with pytest.raises(ValueError, match="incompatible period"):
        synth_laminate(g, 0.0, 0.2, 0.25, 3)
    with pytest.raises(ValueError, match="incompatible period"):
        synth_laminate(g, 0.0, 0.2, 0.3 / 7, 2)
    with pytest.raises(ValueError, match="axis-aligned"):
        synth_laminate(g, 0.4, 0.2, 0.25, 2)


def test_vortex():
    g = make_grid(128, 128, boundary="bounded")
    m = synth_vortex(g)
    X, Y = g.centers()
    r = np.hypot(X - 0.5, Y - 0.5)
    np.testing.assert_allclose(m.values[..., 0][m.valid], (-(Y - 0.5) / r)[m.valid])
    assert np.all(~m.valid == (r <= 2 * g.h))
    assert np.abs(m.norm[m.valid] - 1).max() < 1e-12
    with pytest.raises(ValueError):
        synth_vortex(g, (0.0, 0.5))
    with pytest.raises(ValueError):
        synth_vortex(make_grid(32, 32))


def test_vortex_on_axis_value():
    g = make_grid(64, 64, ((-1, 1), (-1, 1)), "bounded")
    m = synth_vortex(g, (g.xc[40] - 0.2, g.yc[31]))
    np.testing.assert_allclose(m.values[40, 31], [0.0, 1.0], atol=1e-14)


def test_distance_gradient_square():
    g = make_grid(128, 128, boundary="bounded")
    sq = [(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)]
    m = synth_distance_gradient(g, sq)
    assert np.abs(m.norm[m.valid] - 1).max() < 1e-8
    X, Y = g.centers()
    ridge = ~m.valid
    inside = (X > 0.25) & (X < 0.75) & (Y > 0.25) & (Y < 0.75)
    # inside the square the ridge is the two diagonals
    d = np.minimum(np.abs(X - Y), np.abs(X + Y - 1)) / np.sqrt(2)
    assert np.all(d[ridge & inside] <= 2 * g.h)
    assert check_solution(m)["weak_divergence"] < 5e-3


def test_distance_gradient_polygon_errors():
    g = make_grid(32, 32, boundary="bounded")
    with pytest.raises(ValueError, match="self-intersecting"):
        synth_distance_gradient(g, [(0.2, 0.2), (0.8, 0.8), (0.8, 0.2), (0.2, 0.8)])
    m = synth_distance_gradient(g, regular_polygon(64))
    X, Y = g.centers()
    r = np.hypot(X - 0.5, Y - 0.5)
    ok = m.valid & (r > 0.1) & (r < 0.3)
    # rotated radial field inside a near circle: m = i grad(dist) points tangentially
    tang = np.stack([(Y - 0.5) / r, -(X - 0.5) / r], axis=-1)
    assert np.abs(np.sum(m.values * tang, axis=-1)[ok]).min() > 0.99


def test_piecewise_and_two_family():
    g = make_grid(128, 128, boundary="bounded")
    m = two_family_laminate(g, 0.05, 0.15)
    assert len(m.jumps) == 4
    assert sorted({round(j.beta, 12) for j in m.jumps}) == [0.05, 0.15]
    for j in m.jumps:
        assert j.normal @ (j.m_plus - j.m_minus) == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        synth_piecewise(g, [((0.5, 0.5), 0.0)], [0.0])


def test_wrap_angle():
    a = wrap_angle(np.array([np.pi, -np.pi, 3 * np.pi + 0.1]))
    np.testing.assert_allclose(a, [np.pi, np.pi, -np.pi + 0.1])
