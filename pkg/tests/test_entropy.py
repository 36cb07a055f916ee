import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from eikonal_entropy.entropy import (
    check_entropy, closed_form_entropy, entropy_from_json, entropy_norm, from_samples,
    generator_from_json, holder_norm, normalized, phi_from_psi, psi0, psi0_family,
    radial_extension, trig,
)


def _phi_quad(psi, theta):
    # split at the kinks of psi0 so quad sees smooth pieces
    pts = np.linspace(theta - math.pi / 2, theta + math.pi / 2, 65)[1:-1]
    re = quad(lambda s: psi(s) * math.cos(s), theta - math.pi / 2, theta + math.pi / 2,
              epsabs=1e-12, epsrel=1e-12, limit=400, points=pts)[0]
    im = quad(lambda s: psi(s) * math.sin(s), theta - math.pi / 2, theta + math.pi / 2,
              epsabs=1e-12, epsrel=1e-12, limit=400, points=pts)[0]
    return complex(re, im)


def test_zero_and_constant_generators():
    th = np.linspace(0, 2 * np.pi, 17)
    assert np.abs(phi_from_psi(trig()).phi(th)).max() == 0
    E = phi_from_psi(trig(1.0))
    np.testing.assert_allclose(E.phi(th), 2 * np.exp(1j * th), atol=1e-13)
    np.testing.assert_allclose(E.lam(th), 2.0, atol=1e-13)
    assert check_entropy(E).condition < 1e-8


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("gen", [
    trig(cos={2: 1.0}), trig(0.3, cos={1: 0.5}, sin={3: -1.2}),
    psi0(math.pi / 32, 0.5), psi0(math.pi / 64, 0.25, 1.1),
])
def test_phi_matches_adaptive_quadrature(gen):
    E = phi_from_psi(gen)
    for th in (0.0, 0.37, 2.0, -2.9):
        ref = _phi_quad(lambda s: float(gen(np.array(s))), th)
        assert abs(complex(E.phi(np.array(th))) - ref) < 1e-9


def test_phi_from_samples_matches_trig():
    g = trig(cos={2: 1.0}, sin={1: 0.4})
    s = from_samples(g.samples)
    th = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(phi_from_psi(s).phi(th), phi_from_psi(g).phi(th), atol=1e-5)


def test_sample_count_and_nan_rejected():
    with pytest.raises(ValueError, match="N_s too small"):
        phi_from_psi(trig(cos={2: 1.0}, n_samples=128))
    with pytest.raises(ValueError):
        from_samples(np.full(512, np.nan))


def test_cos2s_entropy_condition():
    res = check_entropy(phi_from_psi(trig(cos={2: 1.0})), 2048)
    assert res.condition < 1e-8 and res.oddness < 1e-8


def test_non_entropy_residual():
    E = closed_form_entropy(lambda t: np.exp(2j * t), lambda t: 2j * np.exp(2j * t))
    assert check_entropy(E).condition == pytest.approx(2.0, rel=1e-6)


def test_oddness_residual():
    # lambda = cos 3 theta is an entropy whose derivative is not odd
    E = closed_form_entropy(lambda t: np.exp(4j * t) / 8 - np.exp(-2j * t) / 4,
                            lambda t: 1j * np.exp(1j * t) * np.cos(3 * t))
    res = check_entropy(E)
    assert res.condition < 1e-8
    assert res.oddness == pytest.approx(2.0, rel=1e-4)
    # any generator gives an odd derivative; the anti-periodic part only adds a constant
    assert check_entropy(phi_from_psi(trig(sin={1: 1.0}, cos={4: 1.0}))).oddness < 1e-8


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_lambda_formula_pi_periodic(a, b, c):
    g = trig(a, cos={2: b}, sin={4: c})
    E = phi_from_psi(g)
    th = np.linspace(0, 2 * np.pi, 33)
    np.testing.assert_allclose(E.lam(th), 2 * g(th + np.pi / 2), atol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_generator_linearity(a, b):
    g1, g2 = trig(cos={2: 1.0}), trig(sin={3: 1.0})
    th = np.linspace(0, 6, 13)
    E = phi_from_psi(trig(cos={2: a}, sin={3: b}))
    np.testing.assert_allclose(E.phi(th), a * phi_from_psi(g1).phi(th) + b * phi_from_psi(g2).phi(th),
                               atol=1e-12)


def test_holder_examples():
    assert holder_norm(np.full(256, 3.0), 0.5).seminorm == 0
    n = 1024
    t = 2 * np.pi * np.arange(n) / n
    tri = np.where(t <= np.pi, t, 2 * np.pi - t)
    assert holder_norm(tri, 1.0).seminorm == pytest.approx(1.0, abs=2 / n)
    with pytest.raises(ValueError):
        holder_norm(tri, 0.0)


def test_psi0_values():
    d, a = math.pi / 32, 0.5
    g = psi0(d, a)
    assert float(g(np.array(d))) == pytest.approx(d ** a)
    assert float(g(np.array(2 * d))) == pytest.approx(2 * d ** a)
    eps = 1e-9
    assert float(g(np.array(2 * d + eps))) == pytest.approx(float(g(np.array(2 * d - eps))), abs=1e-6)
    t = np.linspace(0, 2 * np.pi, 101)
    np.testing.assert_allclose(g(t + np.pi), g(t), atol=1e-12)
    np.testing.assert_allclose(g(-t), -g(t), atol=1e-12)
    np.testing.assert_allclose(g(np.pi / 2 - t), g(t), atol=1e-12)
    assert g.pi_periodic and g.odd


def test_psi0_family_covering():
    for d in (math.pi / 32, math.pi / 20):
        fam = psi0_family(d, 0.5)
        gaps = np.diff(np.r_[fam.sbars, fam.sbars[0] + 2 * np.pi])
        assert np.all(gaps > d / 2) and np.all(gaps <= d * (1 + 1e-12))
        # every interval of length d lies in some [sbar - d, sbar + d]
        for a in np.linspace(0, 2 * np.pi, 400):
            lo = np.angle(np.exp(1j * (a - fam.sbars)))
            assert np.any((lo >= -d - 1e-12) & (lo + d <= d + 1e-12))
        iv = fam.intervals
        c = iv.mean(axis=1)
        meet = np.abs(np.angle(np.exp(1j * (c[:, None] - c[None, :])))) < 2 * d
        assert (meet.sum(axis=1) - 1).max() <= 4
    with pytest.raises(ValueError):
        psi0_family(math.pi / 16, 0.5)


def test_psi0_norm_uniform_in_delta():
    ks = [max(entropy_norm(e, 0.5).c1alpha for e in psi0_family(d, 0.5).entropies()[:3])
          for d in (math.pi / 32, math.pi / 64)]
    assert ks[1] <= 1.1 * ks[0]


def test_normalized_has_unit_norm():
    E = normalized(phi_from_psi(trig(cos={2: 3.0})), 0.5)
    assert entropy_norm(E, 0.5).c1alpha == pytest.approx(1.0)


def test_radial_extension_unit_circle():
    E = phi_from_psi(trig(cos={2: 1.0}, sin={4: 0.3}))
    R = radial_extension(E)
    assert R.eta(1.0) == 1.0 and R.deta(1.0) == 0.0
    assert R.eta(0.5) == 0.0 and R.eta(1.6) == 0.0
    th = np.linspace(0, 2 * np.pi, 21)
    z = np.stack([np.cos(th), np.sin(th)], axis=-1)
    ps = R.psi(z)
    ref = 0.5 * E.lam(th) * np.exp(1j * th)
    np.testing.assert_allclose(ps[..., 0] + 1j * ps[..., 1], ref, atol=1e-12)
    assert np.all(R.psi(0.3 * z) == 0) and np.all(R.psi(1.6 * z) == 0)


def test_radial_extension_rejects_non_entropy():
    with pytest.raises(ValueError, match="not an entropy"):
        radial_extension(closed_form_entropy(lambda t: np.exp(2j * t), lambda t: 2j * np.exp(2j * t)))


def test_json_loaders():
    E = entropy_from_json({"kind": "trig", "cos": {"2": 1.0}, "name": "c"})
    assert E.name == "c"
    g = generator_from_json({"kind": "psi0", "delta": 0.05, "alpha": 0.5, "sbar": 0.2})
    assert g.kind == "psi0"
    assert generator_from_json({"kind": "samples", "values": list(np.cos(2 * np.arange(512) * 2 * np.pi / 512))})
    with pytest.raises(ValueError, match="unknown generator"):
        generator_from_json({"kind": "bogus"})
