"""
Entropies Phi_psi generated by angular densities psi on the circle.

    Phi_psi(e^{i theta}) = int_{theta-pi/2}^{theta+pi/2} psi(s) e^{is} ds
    d/dtheta Phi_psi(e^{i theta}) = i e^{i theta} (psi(theta+pi/2) + psi(theta-pi/2))

A generator is stored either as a finite Fourier series (smooth
generators) or as a periodic piecewise-linear function with explicit
knots (the singular psi_0 family, raw samples). In both cases the arc
integral above is evaluated exactly for that representation, splitting
at the moving endpoints theta +- pi/2, so the computed Phi is the exact
entropy of the represented generator.

Complex numbers stand for plane vectors throughout: x + iy <-> (x, y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi
DEFAULT_NS = 2048
MIN_NS = 256


def _wrap(s: NDArray) -> NDArray:
    return np.mod(s, TWO_PI)


def _expm1i(t: NDArray) -> NDArray:
    # e^{it} - 1 without cancellation for small t
    return 2j * np.sin(0.5 * t) * np.exp(0.5j * t)


class Generator:
    """Angular density psi on the circle.

    Use the constructors :func:`trig`, :func:`psi0` and :func:`from_samples`.
    """

    def __init__(
        self,
        kind: str,
        *,
        modes: tuple[NDArray, NDArray] | None = None,
        knots: tuple[NDArray, NDArray] | None = None,
        n_samples: int = DEFAULT_NS,
        params: dict | None = None,
    ):
        if (modes is None) == (knots is None):
            raise ValueError("exactly one of modes / knots is required")
        self.kind = kind
        self.n_samples = int(n_samples)
        self.params = dict(params or {})
        self._modes = None
        self._knots = None
        if modes is not None:
            ks, cs = modes
            ks = np.asarray(ks, dtype=int)
            cs = np.asarray(cs, dtype=complex)
            keep = np.abs(cs) > 0
            self._modes = (ks[keep], cs[keep])
        else:
            t, v = knots
            t = np.asarray(t, dtype=float)
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)) or not np.all(np.isfinite(t)):
                raise ValueError("generator samples contain NaN/Inf")
            order = np.argsort(_wrap(t), kind="stable")
            t = _wrap(t)[order]
            v = v[order]
            # drop duplicated knots produced by wrapping
            dup = np.diff(t, append=t[0] + TWO_PI) <= 1e-15
            t, v = t[~dup], v[~dup]
            t_next = np.append(t[1:], t[0] + TWO_PI)
            v_next = np.append(v[1:], v[0])
            slope = (v_next - v) / (t_next - t)
            seg = self._pl_segment(t, v, slope, t_next - t)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            self._knots = (t, v, slope, cum)

    # -- evaluation -------------------------------------------------------
    @property
    def is_fourier(self) -> bool:
        return self._modes is not None

    @property
    def grid(self) -> NDArray:
        return TWO_PI * np.arange(self.n_samples) / self.n_samples

    @property
    def samples(self) -> NDArray:
        return self(self.grid)

    def __call__(self, s) -> NDArray:
        s = np.asarray(s, dtype=float)
        if self._modes is not None:
            ks, cs = self._modes
            out = np.zeros(s.shape)
            for k, c in zip(ks, cs):
                out += (c * np.exp(1j * k * s)).real
            return out
        t, v, slope, _ = self._knots
        u = _wrap(s - t[0]) + t[0]
        idx = np.searchsorted(t, u, side="right") - 1
        return v[idx] + slope[idx] * (u - t[idx])

    def derivative(self, s) -> NDArray:
        """psi'(s); right derivative at the knots of piecewise-linear generators."""
        s = np.asarray(s, dtype=float)
        if self._modes is not None:
            ks, cs = self._modes
            out = np.zeros(s.shape)
            for k, c in zip(ks, cs):
                out += (1j * k * c * np.exp(1j * k * s)).real
            return out
        t, _, slope, _ = self._knots
        u = _wrap(s - t[0]) + t[0]
        idx = np.searchsorted(t, u, side="right") - 1
        return slope[idx]

    @staticmethod
    def _pl_segment(tk, vk, bk, tau):
        # int_{t_k}^{t_k+tau} (v_k + b_k (u - t_k)) e^{iu} du
        e = np.exp(1j * tau)
        em1 = _expm1i(tau)
        return np.exp(1j * tk) * (-1j * vk * em1 + bk * (-1j * tau * e + em1))

    def antiderivative(self, s) -> NDArray:
        """P(s) = int_{s_ref}^{s} psi(u) e^{iu} du for a fixed reference point."""
        s = np.asarray(s, dtype=float)
        if self._modes is not None:
            ks, cs = self._modes
            out = np.zeros(s.shape, dtype=complex)
            for k, c in zip(ks, cs):
                if k == -1:
                    out += c * s
                else:
                    out += c * np.exp(1j * (k + 1) * s) / (1j * (k + 1))
            return out
        t, v, slope, cum = self._knots
        nwrap = np.floor((s - t[0]) / TWO_PI)
        u = s - nwrap * TWO_PI
        idx = np.searchsorted(t, u, side="right") - 1
        idx = np.clip(idx, 0, len(t) - 1)
        part = self._pl_segment(t[idx], v[idx], slope[idx], u - t[idx])
        return nwrap * cum[-1] + cum[idx] + part

    def arc_integral(self, a, b) -> NDArray:
        """int_a^b psi(s) e^{is} ds (complex)."""
        return self.antiderivative(b) - self.antiderivative(a)

    # -- algebra ----------------------------------------------------------
    @property
    def pi_periodic(self) -> bool:
        s = self.grid
        return bool(np.max(np.abs(self(s + np.pi) - self(s)), initial=0.0) <= 1e-12)

    @property
    def odd(self) -> bool:
        s = self.grid
        return bool(np.max(np.abs(self(-s) + self(s)), initial=0.0) <= 1e-12)

    def shifted(self, sbar: float) -> Generator:
        """s -> psi(s - sbar)."""
        params = dict(self.params, sbar=self.params.get("sbar", 0.0) + sbar)
        if self._modes is not None:
            ks, cs = self._modes
            return Generator(self.kind, modes=(ks, cs * np.exp(-1j * ks * sbar)),
                             n_samples=self.n_samples, params=params)
        t, v, _, _ = self._knots
        return Generator(self.kind, knots=(t + sbar, v), n_samples=self.n_samples, params=params)

    def scaled(self, a: float) -> Generator:
        params = dict(self.params, scale=self.params.get("scale", 1.0) * a)
        if self._modes is not None:
            ks, cs = self._modes
            return Generator(self.kind, modes=(ks, a * cs), n_samples=self.n_samples, params=params)
        t, v, _, _ = self._knots
        return Generator(self.kind, knots=(t, a * v), n_samples=self.n_samples, params=params)

    def to_json(self) -> dict:
        if self.kind == "psi0":
            return {"kind": "psi0", **{k: self.params[k] for k in ("delta", "alpha", "sbar")},
                    "scale": self.params.get("scale", 1.0)}
        if self._modes is not None:
            ks, cs = self._modes
            return {"kind": "modes", "k": ks.tolist(), "re": cs.real.tolist(), "im": cs.imag.tolist()}
        return {"kind": "samples", "values": self.samples.tolist()}

    def __repr__(self):
        return f"Generator({self.kind}, {self.params})"


def trig(a0: float = 0.0, cos: dict | None = None, sin: dict | None = None,
         n_samples: int = DEFAULT_NS) -> Generator:
    """psi(s) = a0 + sum_k a_k cos(ks) + b_k sin(ks)."""
    coef: dict[int, complex] = {}

    def add(k, c):
        coef[k] = coef.get(k, 0) + c

    if a0:
        add(0, a0)
    for k, a in (cos or {}).items():
        k = int(k)
        add(k, a / 2)
        add(-k, a / 2)
    for k, b in (sin or {}).items():
        k = int(k)
        add(k, -0.5j * b)
        add(-k, 0.5j * b)
    if not coef:
        coef[0] = 0.0
    ks = np.array(sorted(coef))
    params = {"a0": a0, "cos": dict(cos or {}), "sin": dict(sin or {})}
    return Generator("trig", modes=(ks, np.array([coef[k] for k in ks])), n_samples=n_samples,
                     params=params)


def psi0(delta: float, alpha: float, sbar: float = 0.0, n_samples: int = DEFAULT_NS) -> Generator:
    """The singular generator: t/delta^(1-alpha) on [0, 2 delta], 2 delta^alpha up to pi/4,
    extended even about pi/4, odd about 0 and pi-periodic; shifted by ``sbar``."""
    if not (0 < delta < np.pi / 16):
        raise ValueError("delta must lie in (0, pi/16)")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    top = 2 * delta ** alpha
    t = np.array([-HALF_PI, -HALF_PI + 2 * delta, -2 * delta, 2 * delta, HALF_PI - 2 * delta])
    v = np.array([0.0, -top, -top, top, top])
    t = np.concatenate([t, t + np.pi]) + sbar
    v = np.concatenate([v, v])
    return Generator("psi0", knots=(t, v), n_samples=n_samples,
                     params={"delta": delta, "alpha": alpha, "sbar": sbar})


def from_samples(values: Sequence[float]) -> Generator:
    """Periodic piecewise-linear generator through samples on a uniform grid."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < MIN_NS:
        raise ValueError(f"N_s too small: {n} < {MIN_NS}")
    if not np.all(np.isfinite(v)):
        raise ValueError("generator samples contain NaN/Inf")
    return Generator("samples", knots=(TWO_PI * np.arange(n) / n, v), n_samples=n)


def generator_from_json(spec: dict, n_samples: int = DEFAULT_NS) -> Generator:
    kind = spec.get("kind")
    if kind == "trig":
        g = trig(spec.get("a0", 0.0), spec.get("cos"), spec.get("sin"), n_samples)
    elif kind == "psi0":
        g = psi0(spec["delta"], spec["alpha"], spec.get("sbar", 0.0), n_samples)
    elif kind == "samples":
        g = from_samples(spec["values"])
    elif kind == "modes":
        cs = np.asarray(spec["re"]) + 1j * np.asarray(spec["im"])
        g = Generator("trig", modes=(np.asarray(spec["k"]), cs), n_samples=n_samples)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    if "scale" in spec and spec["scale"] != 1.0:
        g = g.scaled(spec["scale"])
    return g


# ---------------------------------------------------------------------------
# entropies


class Entropy:
    """A map Phi: S^1 -> R^2 given by evaluators in the angle.

    ``phi(theta)`` and ``dphi(theta)`` return complex numbers. Entropies
    built by :func:`phi_from_psi` keep their generator in ``generator``.
    """

    def __init__(self, phi: Callable, dphi: Callable, name: str = "",
                 generator: Generator | None = None):
        self.phi = phi
        self.dphi = dphi
        self.name = name
        self.generator = generator

    def lam(self, theta) -> NDArray:
        """lambda = d_theta Phi . (i e^{i theta})."""
        theta = np.asarray(theta, dtype=float)
        return (self.dphi(theta) * np.conj(1j * np.exp(1j * theta))).real

    def __call__(self, m: NDArray) -> NDArray:
        """Phi(m/|m|) for an array of plane vectors (..., 2)."""
        theta = np.arctan2(m[..., 1], m[..., 0])
        flat = theta.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        if len(uniq) < 0.5 * len(flat):
            z = self.phi(uniq)[inv].reshape(theta.shape)
        else:
            z = self.phi(theta)
        return np.stack([z.real, z.imag], axis=-1)

    def scaled(self, a: float) -> Entropy:
        g = self.generator.scaled(a) if self.generator is not None else None
        return Entropy(lambda t: a * self.phi(t), lambda t: a * self.dphi(t),
                       f"{a:g}*{self.name}", g)

    def __add__(self, other: Entropy) -> Entropy:
        return Entropy(lambda t: self.phi(t) + other.phi(t),
                       lambda t: self.dphi(t) + other.dphi(t), f"{self.name}+{other.name}")

    def __mul__(self, a: float) -> Entropy:
        return self.scaled(a)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Entropy({self.name})"


def phi_from_psi(psi: Generator, name: str | None = None) -> Entropy:
    """The entropy Phi_psi generated by ``psi``."""
    if psi.n_samples < MIN_NS:
        raise ValueError(f"N_s too small: {psi.n_samples} < {MIN_NS}")
    if not np.all(np.isfinite(psi.samples)):
        raise ValueError("generator samples contain NaN/Inf")

    def phi(theta):
        theta = np.asarray(theta, dtype=float)
        return psi.arc_integral(theta - HALF_PI, theta + HALF_PI)

    def dphi(theta):
        theta = np.asarray(theta, dtype=float)
        return 1j * np.exp(1j * theta) * (psi(theta + HALF_PI) + psi(theta - HALF_PI))

    return Entropy(phi, dphi, name or psi.kind, psi)


def closed_form_entropy(phi: Callable, dphi: Callable, name: str = "closed") -> Entropy:
    return Entropy(phi, dphi, name)


@dataclass(frozen=True)
class EntropyResidual:
    condition: float
    oddness: float


def check_entropy(entropy: Entropy, n: int = DEFAULT_NS, tau: float = 1e-5) -> EntropyResidual:
    """Residuals of the entropy condition and of the odd-derivative condition.

    d_theta Phi is obtained by central differences of the ``phi`` evaluator
    (not from ``dphi``), so the check is independent of the derivative formula.
    """
    theta = TWO_PI * (np.arange(n) + 0.37) / n

    def d(th):
        return (entropy.phi(th + tau) - entropy.phi(th - tau)) / (2 * tau)

    dp = d(theta)
    cond = np.abs((dp * np.conj(np.exp(1j * theta))).real)
    odd = np.abs(d(theta + np.pi) + dp)
    return EntropyResidual(float(cond.max()), float(odd.max()))


# ---------------------------------------------------------------------------
# Hölder norms


@dataclass(frozen=True)
class HolderNorm:
    seminorm: float
    sup: float

    @property
    def norm(self) -> float:
        return self.seminorm + self.sup


def holder_norm(f: NDArray, alpha: float, period: float = TWO_PI) -> HolderNorm:
    """C^{0,alpha} seminorm of periodic samples on a uniform grid.

    The supremum runs over sample pairs at most a quarter period apart.
    ``f`` may be real (N,), complex (N,) or vector valued (N, d).
    """
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    f = np.asarray(f)
    if f.ndim == 1 and not np.iscomplexobj(f):
        f = f[:, None]
    elif f.ndim == 1:
        f = np.stack([f.real, f.imag], axis=1)
    n = f.shape[0]
    ds = period / n
    best = 0.0
    for d in range(1, n // 4 + 1):
        diff = f - np.roll(f, -d, axis=0)
        val = np.sqrt(np.max(np.sum(diff * diff, axis=1))) / (d * ds) ** alpha
        best = max(best, float(val))
    sup = float(np.sqrt(np.max(np.sum(f * f, axis=1))))
    return HolderNorm(best, sup)


@dataclass(frozen=True)
class EntropyNorm:
    sup_phi: float
    sup_dphi: float
    holder_dphi: float

    @property
    def c1alpha(self) -> float:
        return self.sup_phi + self.sup_dphi + self.holder_dphi


def entropy_norm(entropy: Entropy, alpha: float, n: int = DEFAULT_NS) -> EntropyNorm:
    """||Phi||_inf + ||d_theta Phi||_inf + [d_theta Phi]_{C^{0,alpha}} on the circle."""
    theta = TWO_PI * np.arange(n) / n
    phi = entropy.phi(theta)
    dphi = entropy.dphi(theta)
    h = holder_norm(dphi, alpha)
    return EntropyNorm(float(np.abs(phi).max()), h.sup, h.seminorm)


def generator_norm(psi: Generator, alpha: float) -> HolderNorm:
    """||psi||_{C^{0,alpha}} on the generator's sample grid."""
    return holder_norm(psi.samples, alpha)


def normalized(entropy: Entropy, alpha: float, n: int = DEFAULT_NS) -> Entropy:
    """Scale ``entropy`` to unit C^{1,alpha} norm."""
    c = entropy_norm(entropy, alpha, n).c1alpha
    if c == 0:
        return entropy
    e = entropy.scaled(1.0 / c)
    e.name = f"{entropy.name}/|.|C1,{alpha:g}"
    return e


# ---------------------------------------------------------------------------
# the singular family


@dataclass
class Psi0Family:
    delta: float
    alpha: float
    sbars: NDArray
    generators: list[Generator] = field(repr=False)

    @property
    def intervals(self) -> NDArray:
        return np.stack([self.sbars - self.delta, self.sbars + self.delta], axis=1)

    def entropies(self) -> list[Entropy]:
        return [phi_from_psi(g, f"psi0[{s:.4f}]") for g, s in zip(self.generators, self.sbars)]


def psi0_family(delta: float, alpha: float, n_samples: int = DEFAULT_NS) -> Psi0Family:
    """Shifts psi_0(. - sbar_j) over a uniform partition of [0, 2 pi).

    The partition uses N = ceil(2 pi / delta) points, so the spacing d
    satisfies delta/2 < d <= delta and d > 2 delta / 3; the latter keeps the
    number of intervals [sbar_j - delta, sbar_j + delta] met by any one of
    them at four.
    """
    if not (0 < delta < np.pi / 16):
        raise ValueError("delta must lie in (0, pi/16)")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    n = math.ceil(TWO_PI / delta - 1e-12)
    sbars = TWO_PI * np.arange(n) / n
    gens = [psi0(delta, alpha, s, n_samples) for s in sbars]
    return Psi0Family(delta, alpha, sbars, gens)


# ---------------------------------------------------------------------------
# radial extension


def _eta(r):
    u = 2.0 * (np.asarray(r, dtype=float) - 1.0)
    inside = np.abs(u) < 1
    w = np.where(inside, 1 - u * u, 0.0)
    return w ** 3


def _deta(r):
    u = 2.0 * (np.asarray(r, dtype=float) - 1.0)
    inside = np.abs(u) < 1
    w = np.where(inside, 1 - u * u, 0.0)
    return -12.0 * u * w ** 2


@dataclass
class RadialExtension:
    """Phi_hat(r e^{i theta}) = eta(r) Phi(e^{i theta}) and the companion field Psi.

    eta(r) = (1 - 4 (r - 1)^2)^3 on [1/2, 3/2]: C^2, eta(1) = 1, eta'(1) = 0.
    """

    entropy: Entropy

    @staticmethod
    def eta(r):
        return _eta(r)

    @staticmethod
    def deta(r):
        return _deta(r)

    def hat_phi(self, z: NDArray) -> NDArray:
        r = np.hypot(z[..., 0], z[..., 1])
        theta = np.arctan2(z[..., 1], z[..., 0])
        p = self.entropy.phi(theta) * _eta(r)
        return np.stack([p.real, p.imag], axis=-1)

    def psi(self, z: NDArray) -> NDArray:
        """Psi(r e^{i theta}) = eta lambda e^{i theta}/(2 r^2) - eta' Phi/(2 r); zero off [1/2, 3/2]."""
        r = np.hypot(z[..., 0], z[..., 1])
        theta = np.arctan2(z[..., 1], z[..., 0])
        inside = (r > 0.5) & (r < 1.5)
        rs = np.where(inside, r, 1.0)
        e = _eta(rs)
        de = _deta(rs)
        val = (e * self.entropy.lam(theta) / (2 * rs * rs)) * np.exp(1j * theta) \
            - (de / (2 * rs)) * self.entropy.phi(theta)
        val = np.where(inside, val, 0.0)
        return np.stack([val.real, val.imag], axis=-1)


def radial_extension(entropy: Entropy, check: bool = True) -> RadialExtension:
    if check:
        res = check_entropy(entropy, n=512)
        if res.condition > 1e-6:
            raise ValueError(f"not an entropy: residual {res.condition:.3e}")
    return RadialExtension(entropy)


def entropy_from_json(spec: dict, n_samples: int = DEFAULT_NS) -> Entropy:
    g = generator_from_json(spec, n_samples)
    return phi_from_psi(g, spec.get("name", json.dumps(spec, sort_keys=True)))
