"""
Kinetic formulation: chi(x, s) = 1{e^{is} . m(x) > 0} and e^{is} . grad_x chi = d_s sigma.

Angular grids have N_s cells C_k = [s_k - ds/2, s_k + ds/2] with centres
s_k = 2 pi k / N_s. Angular data attached to cells (chi, jump densities)
are exact cell averages; primitives live on the staggered points
s_k + ds/2, where they equal the exact primitive of the cell data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .entropy import Generator, phi_from_psi, trig
from .fields import Grid2, SignedMeasure2, TestFunction, VectorField2, smooth_test_battery
from .solutions import JumpSpec

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

CONTINUOUS_PAIR = "continuous-pair"
JUMP_PROFILE = "jump-profile"
UNTAGGED = "untagged"


def angular_grid(ns: int) -> NDArray:
    return TWO_PI * np.arange(ns) / ns


def staggered_grid(ns: int) -> NDArray:
    return TWO_PI * (np.arange(ns) + 0.5) / ns


def _arc_overlap(ns: int, a: float, b: float) -> NDArray:
    """Length of C_k ∩ (a, b) (mod 2 pi) for every angular cell; b - a <= 2 pi."""
    ds = TWO_PI / ns
    lo = (np.arange(ns) - 0.5) * ds
    hi = lo + ds
    a0 = np.mod(a - lo[0], TWO_PI) + lo[0]
    b0 = a0 + (b - a)
    out = np.zeros(ns)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        out += np.clip(np.minimum(hi, b0 + shift) - np.maximum(lo, a0 + shift), 0.0, None)
    return out


def _arc_cos_integral(ns: int, a: float, b: float, phi: float) -> NDArray:
    """int_{C_k ∩ (a, b)} cos(s - phi) ds for every cell (exact)."""
    ds = TWO_PI / ns
    lo = (np.arange(ns) - 0.5) * ds
    hi = lo + ds
    a0 = np.mod(a - lo[0], TWO_PI) + lo[0]
    b0 = a0 + (b - a)
    out = np.zeros(ns)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        u = np.maximum(lo, a0 + shift)
        v = np.minimum(hi, b0 + shift)
        ok = v > u
        out += np.where(ok, np.sin(v - phi) - np.sin(u - phi), 0.0)
    return out


@dataclass(frozen=True)
class AngularField:
    grid: Grid2
    values: NDArray  # (nx, ny, ns)

    @property
    def ns(self) -> int:
        return self.values.shape[-1]

    @property
    def ds(self) -> float:
        return TWO_PI / self.ns


def chi_profile(theta: float, ns: int) -> NDArray:
    """Cell averages of the indicator of the open half circle centred at theta."""
    return _arc_overlap(ns, theta - np.pi / 2, theta + np.pi / 2) / (TWO_PI / ns)


def kinetic_chi(m: VectorField2, ns: int = 256) -> AngularField:
    """chi as exact angular cell averages; excluded cells are left at zero."""
    ds = TWO_PI / ns
    lo = (np.arange(ns) - 0.5) * ds
    theta = m.angle
    # overlap of [lo, lo+ds] with (theta - pi/2, theta + pi/2), vectorised over cells
    a = theta[..., None] - np.pi / 2
    out = np.zeros(m.grid.shape + (ns,))
    for shift in (-TWO_PI, 0.0, TWO_PI):
        u = np.maximum(lo, a + shift)
        v = np.minimum(lo + ds, a + np.pi + shift)
        out += np.clip(v - u, 0.0, None)
    out /= ds
    out[~m.valid] = 0.0
    return AngularField(m.grid, out)


# ---------------------------------------------------------------------------
# minimal primitives


def minimal_primitive(d: NDArray, ds: float | None = None, tol: float = 1e-10) -> NDArray:
    """Primitive of periodic cell data ``d`` with the least L^1 norm.

    F[k] = sum_{j <= k} d[j] ds sits at s_k + ds/2. The optimal constant is
    minus a median of F; for even sample counts every point between the two
    middle order statistics is optimal and the one of smallest modulus is taken.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[-1]
    if ds is None:
        ds = TWO_PI / n
    scale = max(1.0, float(np.abs(d).sum() * ds))
    if abs(float(d.sum()) * ds) > tol * scale:
        raise ValueError("non-zero mean: the data has no periodic primitive")
    F = np.cumsum(d) * ds
    srt = np.sort(F)
    if n % 2:
        c = -srt[n // 2]
    else:
        lo, hi = -srt[n // 2], -srt[n // 2 - 1]
        c = 0.0 if lo <= 0.0 <= hi else (lo if abs(lo) < abs(hi) else hi)
    return F + c


def l1_of_offset(F: NDArray, c: float, ds: float) -> float:
    return float(np.abs(F + c).sum() * ds)


@dataclass
class JumpProfile:
    """Minimal angular profile at a jump point.

    ``values`` is g_beta(s - sbar) on the staggered grid (the minimal primitive
    divided by n . e^{i sbar}); ``mass`` its integral.
    """

    spec: JumpSpec
    ns: int
    density: NDArray = field(repr=False)
    values: NDArray = field(repr=False)

    @property
    def ds(self) -> float:
        return TWO_PI / self.ns

    @property
    def angles(self) -> NDArray:
        return staggered_grid(self.ns)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.ds)

    @property
    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.ds)

    @property
    def normalized(self) -> NDArray:
        """Unit-mass version of ``values``."""
        return self.values / self.mass


def jump_density(spec: JumpSpec, ns: int) -> NDArray:
    """Cell averages of f(s) = n . e^{is} (chi+(s) - chi-(s))."""
    n = spec.normal
    phi_n = float(np.arctan2(n[1], n[0]))
    s, b = spec.sbar, spec.beta
    up = _arc_cos_integral(ns, s + np.pi / 2 - b, s + np.pi / 2 + b, phi_n)
    dn = _arc_cos_integral(ns, s - np.pi / 2 - b, s - np.pi / 2 + b, phi_n)
    return (up - dn) / (TWO_PI / ns)


def sigma_min_jump(spec: JumpSpec, ns: int = 4096) -> JumpProfile:
    """The minimal kinetic profile along a jump with the traces of ``spec``."""
    f = jump_density(spec, ns)
    F = minimal_primitive(f)
    return JumpProfile(spec, ns, f, F * spec.sign)


def support_mask(spec: JumpSpec, ns: int) -> NDArray:
    """Staggered points inside [sbar +- pi/2 - beta, sbar +- pi/2 + beta]."""
    t = staggered_grid(ns)
    out = np.zeros(ns, dtype=bool)
    for c in (spec.sbar + np.pi / 2, spec.sbar - np.pi / 2):
        d = np.abs(np.angle(np.exp(1j * (t - c))))
        out |= d <= spec.beta + 1e-12
    return out


def gbeta_pairing_distance(beta: float, tests: Sequence[Generator], ns: int = 4096) -> float:
    """max over tests of |int phi g_beta ds - (phi(pi/2) + phi(-pi/2))/2| with unit-mass g_beta."""
    prof = sigma_min_jump(JumpSpec(0.0, beta), ns)
    g = prof.normalized
    t = prof.angles
    out = 0.0
    for phi in tests:
        a = float(np.sum(phi(t) * g) * prof.ds)
        b = 0.5 * (float(phi(np.pi / 2)) + float(phi(-np.pi / 2)))
        out = max(out, abs(a - b))
    return out


def smooth_angular_tests(n: int = 10, seed: int = 0) -> list[Generator]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        cos = {int(k): float(rng.standard_normal()) for k in range(1, 4)}
        sin = {int(k): float(rng.standard_normal()) for k in range(1, 4)}
        out.append(trig(float(rng.standard_normal()), cos, sin))
    return out


# ---------------------------------------------------------------------------
# kinetic measures


@dataclass
class KineticMeasure:
    """Minimal kinetic measure on a grid.

    ``nu`` holds the cell masses of nu_min. Each carrying cell points into
    ``profiles`` (unit-L^1 signed angular densities on the staggered grid)
    through ``profile_index`` (-1 for none); the disintegration at a cell
    is ``nu / cell_area`` times its profile.
    """

    nu: SignedMeasure2
    ns: int
    profile_index: NDArray
    profiles: NDArray
    tags: list[str]
    meta: list[dict] = field(default_factory=list)

    @property
    def grid(self) -> Grid2:
        return self.nu.grid

    @property
    def ds(self) -> float:
        return TWO_PI / self.ns

    @property
    def angles(self) -> NDArray:
        return staggered_grid(self.ns)

    def cell_profile(self, i: int, j: int) -> NDArray:
        """(sigma_min)_x as a density in s, scaled by nu_min(cell)/cell_area."""
        q = self.profile_index[i, j]
        if q < 0:
            return np.zeros(self.ns)
        return self.profiles[q] * self.nu.mass[i, j] / self.grid.cell_area

    def cell_tag(self, i: int, j: int) -> str:
        q = self.profile_index[i, j]
        return UNTAGGED if q < 0 else self.tags[q]

    def pair(self, phi_prime: NDArray) -> NDArray:
        """int phi'(s) d sigma over every cell, given phi' on the staggered grid."""
        per = self.profiles @ phi_prime * self.ds if len(self.profiles) else np.zeros(0)
        out = np.zeros(self.grid.shape)
        on = self.profile_index >= 0
        out[on] = per[self.profile_index[on]] * self.nu.mass[on]
        return out

    @classmethod
    def empty(cls, grid: Grid2, ns: int) -> KineticMeasure:
        return cls(SignedMeasure2(grid, np.zeros(grid.shape)), ns,
                   -np.ones(grid.shape, dtype=int), np.zeros((0, ns)), [])


def line_cell_lengths(grid: Grid2, p0: NDArray, p1: NDArray) -> NDArray:
    """Length of the segment [p0, p1] inside every grid cell (Liang-Barsky per cell)."""
    out = np.zeros(grid.shape)
    d = p1 - p0
    L = float(np.hypot(*d))
    if L == 0:
        return out
    # candidate cells: bounding box of the segment plus one cell
    i0 = max(0, int(np.floor((min(p0[0], p1[0]) - grid.x0) / grid.hx)) - 1)
    i1 = min(grid.nx, int(np.floor((max(p0[0], p1[0]) - grid.x0) / grid.hx)) + 2)
    j0 = max(0, int(np.floor((min(p0[1], p1[1]) - grid.y0) / grid.hy)) - 1)
    j1 = min(grid.ny, int(np.floor((max(p0[1], p1[1]) - grid.y0) / grid.hy)) + 2)
    I, J = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
    xl = grid.x0 + I * grid.hx
    yl = grid.y0 + J * grid.hy
    tlo = np.zeros(I.shape)
    thi = np.ones(I.shape)
    for k, (lo, hi) in enumerate(((xl, xl + grid.hx), (yl, yl + grid.hy))):
        if abs(d[k]) < 1e-300:
            inside = (p0[k] >= lo) & (p0[k] < hi)
            thi = np.where(inside, thi, -1.0)
            continue
        ta = (lo - p0[k]) / d[k]
        tb = (hi - p0[k]) / d[k]
        tlo = np.maximum(tlo, np.minimum(ta, tb))
        thi = np.minimum(thi, np.maximum(ta, tb))
    out[i0:i1, j0:j1] = np.clip(thi - tlo, 0.0, None) * L
    return out


def kinetic_from_jumps(grid: Grid2, jumps: Sequence[JumpSpec], ns: int = 4096,
                       segments: Sequence[tuple[NDArray, NDArray]] | None = None) -> KineticMeasure:
    """sigma_min of a field whose singular set is the given straight jump lines.

    nu_min(cell) = (length of the line in the cell) * int |g_beta|, and
    the cell's profile is the unit-L^1 version of sigma_min_jump.
    """
    nu = np.zeros(grid.shape)
    idx = -np.ones(grid.shape, dtype=int)
    profs, tags, meta = [], [], []
    for q, sp in enumerate(jumps):
        seg = segments[q] if segments is not None else sp.segment(grid)
        if seg is None:
            continue
        lengths = line_cell_lengths(grid, np.asarray(seg[0]), np.asarray(seg[1]))
        prof = sigma_min_jump(sp, ns)
        l1 = prof.l1
        on = lengths > 0
        nu[on] += lengths[on] * l1
        idx[on] = len(profs)
        profs.append(prof.values / l1)
        tags.append(JUMP_PROFILE)
        meta.append({"sbar": sp.sbar, "beta": sp.beta, "sign": sp.sign, "line_density": l1})
    P = np.array(profs) if profs else np.zeros((0, ns))
    return KineticMeasure(SignedMeasure2(grid, nu), ns, idx, P, tags, meta)


def atom_pair_profile(s: float, sign: int, ns: int) -> NDArray:
    """Unit-mass density of sign * (delta_s + delta_{s+pi}) / 2 on the staggered grid
    (atoms snapped to the nearest staggered point)."""
    ds = TWO_PI / ns
    out = np.zeros(ns)
    for a in (s, s + np.pi):
        k = int(np.round((np.mod(a, TWO_PI) / ds) - 0.5)) % ns
        out[k] += 0.5 * sign / ds
    return out


def cell_mean_derivative(psi: Generator, t: NDArray, ds: float) -> NDArray:
    """Exact mean of psi' over [t - ds/2, t + ds/2].

    Pairing it with a staggered primitive is second order even when psi'
    jumps (psi_0), unlike point values of the derivative.
    """
    return (psi(t + 0.5 * ds) - psi(t - 0.5 * ds)) / ds


def kinetic_residual(m: VectorField2, sigma: KineticMeasure,
                     battery: Sequence[TestFunction] | None = None,
                     angular: Sequence[Generator] | None = None, seed: int = 0) -> NDArray:
    """|int Phi_phi(m) . grad zeta dx - int zeta phi' d sigma| / (||zeta||_C1 ||phi||_C1)
    for products zeta(x) phi(s).

    Since int chi(x, s) e^{is} phi(s) ds = Phi_phi(m(x)), the x-part only needs
    the entropy generated by phi.
    """
    g = m.grid
    if battery is None:
        battery = smooth_test_battery(g, 4, seed)
    if angular is None:
        angular = [trig(cos={k: 1.0}) for k in (1, 2, 3)] + [trig(sin={k: 1.0}) for k in (1, 2, 3)]
    X, Y = g.centers()
    t = sigma.angles
    valid = m.valid
    out = []
    for phi in angular:
        ent = phi_from_psi(phi)
        P = ent(m.values)
        dphi = cell_mean_derivative(phi, t, sigma.ds)
        pairing = sigma.pair(dphi)
        s_grid = angular_grid(512)
        c1_phi = float(np.abs(phi(s_grid)).max() + np.abs(phi.derivative(s_grid)).max())
        for z in battery:
            gx, gy = z.grad(X, Y)
            a = float(np.sum(np.where(valid, P[..., 0] * gx + P[..., 1] * gy, 0.0)) * g.cell_area)
            b = float(np.sum(z.value(X, Y) * pairing))
            out.append(abs(a - b) / (z.c1 * c1_phi))
    return np.asarray(out)


def dissipation_from_kinetic(sigma: KineticMeasure, psi: Generator) -> SignedMeasure2:
    """Cell masses of -int psi'(s) d(sigma_min)_x nu_min."""
    if np.any(sigma.nu.mass > 0) and any(t == UNTAGGED for t in sigma.tags):
        log.warning("kinetic measure has untagged profiles; their dissipation is still included")
    dpsi = cell_mean_derivative(psi, sigma.angles, sigma.ds)
    return SignedMeasure2(sigma.grid, -sigma.pair(dpsi), sigma.nu.margin)


# ---------------------------------------------------------------------------
# structure


@dataclass
class ProfileShape:
    tag: str
    two_beta: float | None
    sbar: float | None
    sign: int


def profile_shape(p: NDArray, atom_cells: int = 2, rel: float = 1e-9) -> ProfileShape:
    """Classify a unit-L^1 staggered profile: two atoms pi apart, a two-bump jump
    profile (returns its measured 2 beta and centre sbar) or untagged."""
    ns = len(p)
    ds = TWO_PI / ns
    t = staggered_grid(ns)
    thr = rel * np.abs(p).max()
    on = np.abs(p) > thr
    if not on.any():
        return ProfileShape(UNTAGGED, None, None, 0)
    # circular runs of the support
    runs = []
    start = int(np.argmin(on)) if not on.all() else 0
    order = np.roll(np.arange(ns), -start)
    cur = []
    for q in order:
        if on[q]:
            cur.append(q)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    if len(runs) != 2:
        return ProfileShape(UNTAGGED, None, None, 0)
    centres = []
    widths = []
    for r in runs:
        w = np.abs(p[r])
        z = np.sum(w * np.exp(1j * t[r])) / w.sum()
        centres.append(float(np.angle(z)))
        widths.append(len(r) * ds)
    gap = abs(np.angle(np.exp(1j * (centres[1] - centres[0]))))
    if abs(gap - np.pi) > 2 * ds + 0.5 * max(widths):
        return ProfileShape(UNTAGGED, None, None, 0)
    sign = int(np.sign(p[runs[0]].sum()))
    # jump profile: the bumps sit at sbar +- pi/2
    sbar = float(np.angle(np.exp(1j * (centres[0] - np.pi / 2))))
    if max(len(runs[0]), len(runs[1])) <= atom_cells:
        return ProfileShape(CONTINUOUS_PAIR, None, float(np.mod(centres[0], np.pi)), sign)
    # support width of one bump is 2 beta, up to one staggered cell
    two_beta = float(np.mean(widths))
    return ProfileShape(JUMP_PROFILE, two_beta, sbar, sign)


@dataclass
class Classification:
    tags: NDArray  # object array of str per cell
    two_beta: NDArray  # measured 2 beta per cell (nan where undefined)
    jm_delta: NDArray  # boolean mask of J_m^delta
    shapes: list[ProfileShape]


def classify_structure(sigma: KineticMeasure, delta: float) -> Classification:
    """Tag carrying cells by the shape of their angular profile and mark J_m^delta."""
    shapes = [profile_shape(p) for p in sigma.profiles]
    g = sigma.grid
    tags = np.full(g.shape, UNTAGGED, dtype=object)
    tb = np.full(g.shape, np.nan)
    on = sigma.profile_index >= 0
    for q, sh in enumerate(shapes):
        sel = on & (sigma.profile_index == q)
        tags[sel] = sh.tag
        if sh.two_beta is not None:
            tb[sel] = sh.two_beta
    jm = on & (tags == JUMP_PROFILE) & (np.nan_to_num(tb, nan=-1.0) > delta) & (sigma.nu.mass > 0)
    return Classification(tags, tb, jm, shapes)


def profile_csv(path, angles: NDArray, values: NDArray) -> None:
    with open(path, "w") as fh:
        fh.write("s,value\n")
        for s, v in zip(angles, values):
            fh.write(f"{s:.17g},{v:.17g}\n")


__all__ = [
    "AngularField", "kinetic_chi", "chi_profile", "minimal_primitive", "l1_of_offset", "JumpProfile",
    "jump_density", "sigma_min_jump", "support_mask", "gbeta_pairing_distance", "smooth_angular_tests",
    "KineticMeasure", "line_cell_lengths", "kinetic_from_jumps", "atom_pair_profile",
    "cell_mean_derivative", "kinetic_residual", "dissipation_from_kinetic", "ProfileShape", "profile_shape", "Classification",
    "classify_structure", "profile_csv", "angular_grid", "staggered_grid", "CONTINUOUS_PAIR",
    "JUMP_PROFILE", "UNTAGGED",
]
