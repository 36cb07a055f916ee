"""
Entropy productions div Phi(m).

The default production is the direct one: Phi(m) is evaluated cellwise
and its divergence taken with centred differences, so each cell receives
the flux balance of its two neighbours in each direction. For
piecewise-constant inputs this puts the full jump cost
n . (Phi(m+) - Phi(m-)) per unit length into the two cell layers along
the line. Passing ``eps`` instead mollifies m first and differentiates
the radial extension Phi_hat(m_eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .entropy import Entropy, RadialExtension, entropy_norm, normalized
from .fields import (
    Grid2,
    ScalarField2,
    SignedMeasure2,
    TestFunction,
    VectorField2,
    convolve,
    disk_weights,
    lattice_offsets,
)

RHO_C = 3.0 / np.pi
GRAD_RHO_MAX = 8.0 / (np.sqrt(3.0) * np.pi)


def rho(r2: NDArray) -> NDArray:
    """Mollifier profile (3/pi)(1 - |x|^2)^2 on B_1 as a function of |x|^2."""
    return np.where(r2 < 1.0, RHO_C * (1.0 - r2) ** 2, 0.0)


@dataclass(frozen=True)
class Mollifier:
    """rho_eps = eps^-2 rho(./eps) sampled on the lattice of ``grid``."""

    grid: Grid2
    eps: float

    def __post_init__(self):
        if self.eps < 2 * max(self.grid.hx, self.grid.hy) * (1 - 1e-9):
            raise ValueError("eps below resolution: need eps >= 2 grid spacings")

    @property
    def radius_cells(self) -> int:
        return int(math.ceil(self.eps / min(self.grid.hx, self.grid.hy)))

    def _offsets(self):
        k = self.radius_cells
        di, dj = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
        return di * self.grid.hx / self.eps, dj * self.grid.hy / self.eps

    @property
    def kernel(self) -> NDArray:
        """Stencil renormalised to unit discrete mass."""
        u, v = self._offsets()
        w = rho(u * u + v * v)
        return w / w.sum()

    @property
    def raw_mass(self) -> float:
        u, v = self._offsets()
        return float(rho(u * u + v * v).sum() * self.grid.cell_area / self.eps ** 2)

    @property
    def grad_kernel(self) -> tuple[NDArray, NDArray]:
        """Samples of grad rho_eps times the cell area (for m * grad rho_eps)."""
        u, v = self._offsets()
        r2 = u * u + v * v
        c = np.where(r2 < 1.0, -4.0 * RHO_C * (1.0 - r2), 0.0) / self.eps ** 3 * self.grid.cell_area
        return c * u, c * v


def _parse_eps(grid: Grid2, eps) -> float | None:
    if eps is None:
        return None
    if isinstance(eps, str):
        s = eps.strip()
        if s.endswith("h"):
            return float(s[:-1] or 1.0) * grid.h
        return float(s)
    return float(eps)


def mollify(m: VectorField2, eps) -> VectorField2:
    """m_eps = m * rho_eps. Bounded grids return the interior sub-grid eroded
    by the kernel radius (``margin`` counts the cells removed per side)."""
    eps = _parse_eps(m.grid, eps)
    mol = Mollifier(m.grid, eps)
    k = mol.kernel
    g = m.grid
    out = np.stack([convolve(m.values[..., c], k, g.periodic) for c in (0, 1)], axis=-1)
    if g.periodic:
        return VectorField2(g, out, margin=0, meta={"eps": eps})
    r = mol.radius_cells
    return VectorField2(g.erode(r), out[r:-r, r:-r], margin=m.margin + r, meta={"eps": eps})


def commutator_w(m: VectorField2, eps) -> ScalarField2:
    """w_eps = 1 - |m_eps|^2 on the grid of the mollified field."""
    me = mollify(m, eps)
    w = 1.0 - np.sum(me.values ** 2, axis=-1)
    return ScalarField2(me.grid, w, me.margin)


def _interior(grid: Grid2, cells: int) -> tuple[slice, slice]:
    if grid.periodic:
        return slice(None), slice(None)
    if 2 * cells >= min(grid.nx, grid.ny):
        raise ValueError("erosion leaves no interior")
    return slice(cells, grid.nx - cells), slice(cells, grid.ny - cells)


def avg_sq_increment(m: VectorField2, r: float) -> NDArray:
    """avg_{h in B_r} |D^h m(x)|^2 = 2 - 2 m(x).(m * U_r)(x) for unit m.

    U_r is the uniform average over the lattice disk. Exact where the disk
    fits in the domain.
    """
    U = disk_weights(m.grid, r)
    avg = np.stack([convolve(m.values[..., c], U, m.grid.periodic) for c in (0, 1)], axis=-1)
    return np.maximum(2.0 - 2.0 * np.sum(m.values * avg, axis=-1), 0.0)


def avg_abs_increment(m: VectorField2, r: float, region: tuple[slice, slice]) -> NDArray:
    """avg_{h in B_r} |D^h m(x)| on ``region`` by looping over lattice offsets."""
    di, dj = lattice_offsets(m.grid, r)
    base = m.values[region]
    acc = np.zeros(base.shape[:2])
    for a, b in zip(di, dj):
        if m.grid.periodic:
            sh = np.roll(m.values, (-a, -b), axis=(0, 1))[region]
        else:
            si, sj = region
            sh = m.values[si.start + a:si.stop + a, sj.start + b:sj.stop + b]
        d = sh - base
        acc += np.hypot(d[..., 0], d[..., 1])
    return acc / len(di)


@dataclass(frozen=True)
class CommutatorConstants:
    eps: float
    c1: float
    c2: float
    c3: float
    n_points: int
    n_pairs: int


def check_commutator_bounds(m: VectorField2, eps, n_shifts: int = 32, seed: int = 0,
                            floor: float = 1e-14) -> CommutatorConstants:
    """Empirical constants of the commutator estimates.

    c1 = max |w_eps| / avg_{B_eps} |D^h m|^2
    c2 = max |D^{eps k} w_eps| / (|k| avg_{B_{2 eps}} |D^h m|^2), |k| <= 1
    c3 = max eps |grad m_eps| / avg_{B_eps} |D^h m|

    Evaluated at every cell whose ball B_{2 eps} lies in the domain; c2
    uses ``n_shifts`` seeded lattice shifts at every such cell. Points with
    averages below ``floor`` are skipped.
    """
    eps = _parse_eps(m.grid, eps)
    g = m.grid
    mol = Mollifier(g, eps)
    k2 = int(math.ceil(2 * eps / g.h)) + 1
    reg = _interior(g, k2)
    # full-size mollification; cells near a bounded edge are outside reg and never read
    ker = mol.kernel
    me = np.stack([convolve(m.values[..., c], ker, g.periodic) for c in (0, 1)], axis=-1)
    w = 1.0 - np.sum(me * me, axis=-1)
    a1 = avg_sq_increment(m, eps)
    a2 = avg_sq_increment(m, 2 * eps)
    w_r, a1_r, a2_r = w[reg], a1[reg], a2[reg]
    ok = a1_r > floor
    c1 = float(np.max(np.abs(w_r[ok]) / a1_r[ok], initial=0.0))

    rng = np.random.default_rng(seed)
    di, dj = lattice_offsets(g, eps)
    nz = (di != 0) | (dj != 0)
    di, dj = di[nz], dj[nz]
    pick = rng.choice(len(di), size=min(n_shifts, len(di)), replace=False)
    c2 = 0.0
    ok2 = a2_r > floor
    npairs = 0
    for q in pick:
        a, b = int(di[q]), int(dj[q])
        kk = np.hypot(a * g.hx, b * g.hy) / eps
        if g.periodic:
            ws = np.roll(w, (-a, -b), axis=(0, 1))[reg]
        else:
            si, sj = reg
            ws = w[si.start + a:si.stop + a, sj.start + b:sj.stop + b]
        d = np.abs(ws - w_r)
        npairs += int(ok2.sum())
        if ok2.any():
            c2 = max(c2, float(np.max(d[ok2] / (kk * a2_r[ok2]))))

    gx, gy = mol.grad_kernel
    grad = np.stack([convolve(m.values[..., c], k, g.periodic) for c in (0, 1) for k in (gx, gy)], axis=-1)
    gnorm = np.sqrt(np.sum(grad ** 2, axis=-1))[reg]
    a1abs = avg_abs_increment(m, eps, reg)
    ok3 = a1abs > floor
    c3 = float(np.max(eps * gnorm[ok3] / a1abs[ok3], initial=0.0))
    return CommutatorConstants(eps, c1, c2, c3, int(ok.sum()), npairs)


# ---------------------------------------------------------------------------
# productions


def _central_divergence(P: NDArray, grid: Grid2) -> NDArray:
    """Centred-difference divergence; bounded grids get zeros on the outer cell ring."""
    if grid.periodic:
        return ((np.roll(P[..., 0], -1, 0) - np.roll(P[..., 0], 1, 0)) / (2 * grid.hx)
                + (np.roll(P[..., 1], -1, 1) - np.roll(P[..., 1], 1, 1)) / (2 * grid.hy))
    d = np.zeros(grid.shape)
    d[1:-1, 1:-1] = ((P[2:, 1:-1, 0] - P[:-2, 1:-1, 0]) / (2 * grid.hx)
                     + (P[1:-1, 2:, 1] - P[1:-1, :-2, 1]) / (2 * grid.hy))
    return d


def _stencil_mask(bad: NDArray, periodic: bool) -> NDArray:
    """Cells whose 5-point stencil touches a ``bad`` cell."""
    out = bad.copy()
    if periodic:
        for s, ax in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
            out |= np.roll(bad, s, ax)
        return out
    out[1:, :] |= bad[:-1, :]
    out[:-1, :] |= bad[1:, :]
    out[:, 1:] |= bad[:, :-1]
    out[:, :-1] |= bad[:, 1:]
    return out


@dataclass
class ProductionReport:
    measure: SignedMeasure2
    entropy: str
    eps: float | None
    grid: str
    regions: dict = field(default_factory=dict)
    pairing_errors: NDArray | None = None
    masked: NDArray | None = None

    @property
    def total_variation(self) -> float:
        return self.measure.total_variation

    def to_json(self) -> dict:
        return {
            "total_variation": self.total_variation,
            "total": self.measure.total,
            "per_region": dict(self.regions),
            "params": {"entropy": self.entropy, "eps": self.eps, "grid": self.grid,
                       "margin": self.measure.margin},
            "pairing_error_max": None if self.pairing_errors is None or not len(self.pairing_errors)
            else float(np.max(self.pairing_errors)),
        }


def production_direct(m: VectorField2, entropy: Entropy, battery: Sequence[TestFunction] = (),
                      eps=None, regions: dict | None = None, unit_tol: float = 1e-8) -> ProductionReport:
    """Cell masses of div Phi(m).

    Without ``eps``: centred divergence of Phi(m) at cell centres. With
    ``eps`` (a length or a string like "4h"): centred divergence of
    Phi_hat(m_eps) on the mollified interior. Cells whose stencil touches
    an excluded cell carry no mass. ``regions`` maps names to boolean
    masks whose masses are reported.
    """
    g = m.grid
    valid = m.valid
    dev = np.where(valid, np.abs(m.norm - 1.0), 0.0)
    if dev.max(initial=0.0) > unit_tol:
        raise ValueError(f"non-unit field: deviation {dev.max():.3e}")
    eps_v = _parse_eps(g, eps)
    if eps_v is None:
        P = entropy(m.values)
        div = _central_divergence(P, g)
        margin = 0 if g.periodic else 1
    else:
        me = mollify(m, eps_v)
        P = RadialExtension(entropy).hat_phi(me.values)
        r = me.margin - m.margin
        d = _central_divergence(P, me.grid)
        div = np.zeros(g.shape)
        if g.periodic:
            div = d
            margin = 0
        else:
            div[r:-r, r:-r] = d
            margin = r + 1
    bad = ~valid
    masked = _stencil_mask(bad, g.periodic) if bad.any() else np.zeros(g.shape, dtype=bool)
    if eps_v is not None and bad.any():
        masked |= _dilate(bad, int(math.ceil(eps_v / g.h)) + 1, g.periodic)
    mass = np.where(masked, 0.0, div * g.cell_area)
    meas = SignedMeasure2(g, mass, margin)
    errs = None
    if battery:
        X, Y = g.centers()
        errs = []
        for z in battery:
            gx, gy = z.grad(X, Y)
            lhs = np.sum(mass * z.value(X, Y))
            Pm = entropy(m.values)
            rhs = -np.sum(np.where(valid, Pm[..., 0] * gx + Pm[..., 1] * gy, 0.0)) * g.cell_area
            errs.append(abs(lhs - rhs) / z.c1)
        errs = np.asarray(errs)
    reg = {k: meas.mass_of(v) for k, v in (regions or {}).items()}
    return ProductionReport(meas, entropy.name, eps_v, g.ident(), reg, errs, masked)


def _dilate(mask: NDArray, k: int, periodic: bool) -> NDArray:
    ker = np.ones((2 * k + 1, 2 * k + 1))
    return convolve(mask.astype(float), ker, periodic) > 0.5


def jump_cost(entropy: Entropy, sbar: float, beta: float) -> float:
    """n . (Phi(e^{i(sbar+beta)}) - Phi(e^{i(sbar-beta)})) with n = e^{i sbar}."""
    if not (0 < beta < np.pi / 2):
        raise ValueError("beta must lie in (0, pi/2)")
    d = entropy.phi(np.array(sbar + beta)) - entropy.phi(np.array(sbar - beta))
    return float((np.exp(-1j * sbar) * d).real)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log|y| against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        ly = np.log(np.abs(np.asarray(y, dtype=float)))
    if not np.all(np.isfinite(ly)):
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class SupMeasure:
    measure: SignedMeasure2
    argmax: NDArray
    members: list[str]

    @property
    def total_variation(self) -> float:
        return self.measure.total_variation


def sup_measure(m: VectorField2, family: Sequence[Entropy], eps=None) -> SupMeasure:
    """Cellwise max of |div Phi(m)| over the family (first member wins ties)."""
    if not family:
        raise ValueError("empty entropy family")
    best = None
    arg = None
    margin = 0
    for q, e in enumerate(family):
        rep = production_direct(m, e, eps=eps)
        a = np.abs(rep.measure.mass)
        margin = rep.measure.margin
        if best is None:
            best, arg = a, np.zeros(a.shape, dtype=int)
        else:
            better = a > best
            best = np.where(better, a, best)
            arg = np.where(better, q, arg)
    return SupMeasure(SignedMeasure2(m.grid, best, margin), arg, [e.name for e in family])


def normalized_family(entropies: Sequence[Entropy], alpha: float) -> list[Entropy]:
    """Scale every member to unit C^{1,alpha} norm."""
    return [normalized(e, alpha) for e in entropies]


@dataclass
class SmallJumpRow:
    delta: float
    beta: float
    production_tv: float
    besov_p: float
    ratio: float


@dataclass
class SmallJumpTable:
    p: float
    rows: list[SmallJumpRow]

    @property
    def ratios(self) -> NDArray:
        return np.array([r.ratio for r in self.rows])

    @property
    def spread(self) -> float:
        r = self.ratios
        return float(r.max() / r.min() - 1.0)

    @property
    def violation(self) -> bool:
        """Ratio grows monotonically by more than 50% while delta halves."""
        r = self.ratios[np.argsort([-row.delta for row in self.rows])]
        growing = bool(np.all(np.diff(r) > 0))
        return growing and r[-1] / r[0] > 1.5


def small_jump_bound_check(entropy: Entropy, deltas: Sequence[float], p: float, nx: int = 256,
                           count: int = 2, sbar: float = 0.0) -> SmallJumpTable:
    """|div Phi(m)|(Omega) / (delta^{3-p} [m]^p_{B^{1/p}_{p,inf}}) on laminates with 2 beta = delta."""
    from .besov import ShiftSet, besov_seminorm_fd
    from .fields import make_grid
    from .solutions import synth_laminate

    if not (1 <= p < 3):
        raise ValueError("p must lie in [1, 3)")
    grid = make_grid(nx, nx)
    shifts = ShiftSet.build(grid, rings=3)
    rows = []
    for d in deltas:
        beta = 0.5 * d
        m = synth_laminate(grid, sbar, beta, 0.5, count)
        tv = production_direct(m, entropy).total_variation
        sem = besov_seminorm_fd(m, 1.0 / p, p, shifts).value
        rows.append(SmallJumpRow(d, beta, tv, sem ** p, tv / (d ** (3 - p) * sem ** p)))
    return SmallJumpTable(p, rows)


def identity_residual(m: VectorField2, entropy: Entropy) -> float:
    """max |div Phi_hat(m) - Psi(m) . grad w| with w = 1 - |m|^2, both by centred
    differences on a periodic grid. m must be divergence free with |m| in (1/2, 3/2)
    for the identity to hold."""
    g = m.grid
    if not g.periodic:
        raise ValueError("identity residual needs a periodic grid")
    ext = RadialExtension(entropy)
    lhs = _central_divergence(ext.hat_phi(m.values), g)
    w = 1.0 - np.sum(m.values ** 2, axis=-1)
    wx = (np.roll(w, -1, 0) - np.roll(w, 1, 0)) / (2 * g.hx)
    wy = (np.roll(w, -1, 1) - np.roll(w, 1, 1)) / (2 * g.hy)
    Ps = ext.psi(m.values)
    rhs = Ps[..., 0] * wx + Ps[..., 1] * wy
    return float(np.max(np.abs(lhs - rhs)))


def smooth_divfree_field(grid: Grid2, a: float = 0.2, b: float = 0.3) -> VectorField2:
    """m = (0.9 + a cos(2 pi y), b sin(2 pi x)): divergence free, |m| in (1/2, 3/2)."""
    X, Y = grid.centers()
    v = np.stack([0.9 + a * np.cos(2 * np.pi * (Y - grid.y0) / grid.ly),
                  b * np.sin(2 * np.pi * (X - grid.x0) / grid.lx)], axis=-1)
    return VectorField2(grid, v)


def entropy_c1alpha(entropy: Entropy, alpha: float) -> float:
    return entropy_norm(entropy, alpha).c1alpha


__all__ = [
    "Mollifier", "mollify", "commutator_w", "check_commutator_bounds", "CommutatorConstants",
    "production_direct", "ProductionReport", "jump_cost", "sup_measure", "SupMeasure",
    "normalized_family", "small_jump_bound_check", "SmallJumpTable", "identity_residual",
    "smooth_divfree_field", "loglog_slope", "avg_sq_increment", "avg_abs_increment", "rho",
    "GRAD_RHO_MAX",
]
