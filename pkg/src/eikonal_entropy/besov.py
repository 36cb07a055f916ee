"""Besov norms by finite differences and by Littlewood-Paley blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from numpy.typing import NDArray

from .fields import Grid2, ScalarField2, VectorField2, fft_workers, shifted


# ---------------------------------------------------------------------------
# finite differences


@dataclass(frozen=True)
class Shift:
    di: int
    dj: int
    ring: int
    length: float

    @property
    def direction(self) -> float:
        return math.atan2(self.dj, self.di)


@dataclass
class ShiftSet:
    """Lattice shifts grouped in dyadic rings |h| in [2^k h0, 2^{k+1} h0).

    Only one of h, -h is kept since ||D^h m||_p = ||D^{-h} m||_p.
    """

    grid: Grid2
    shifts: list[Shift]

    @classmethod
    def build(cls, grid: Grid2, rings: int | None = None, directions: int = 16) -> ShiftSet:
        h0 = min(grid.hx, grid.hy)
        if rings is None:
            diam = math.hypot(grid.lx, grid.ly)
            rings = max(1, int(math.floor(math.log2(diam / (4 * h0)))) + 1)
        out: list[Shift] = []
        for k in range(rings):
            lo, hi = 2 ** k * h0, 2 ** (k + 1) * h0
            seen: set[tuple[int, int]] = set()
            # all lattice vectors of the ring on the coarse rings, directional samples beyond
            reach = int(math.ceil(hi / h0))
            cand = []
            for a in range(-reach, reach + 1):
                for b in range(0, reach + 1):
                    if b == 0 and a <= 0:
                        continue
                    ln = math.hypot(a * grid.hx, b * grid.hy)
                    if lo * (1 - 1e-12) <= ln < hi * (1 - 1e-12):
                        cand.append((a, b, ln))
            if len(cand) <= directions:
                picked = cand
            else:
                picked = []
                angs = np.array([math.atan2(b, a) for a, b, _ in cand])
                lens = np.array([c[2] for c in cand])
                for q in range(directions):
                    t = math.pi * q / directions
                    dang = np.abs(np.angle(np.exp(1j * (angs - t))))
                    # nearest direction, then the shortest vector in it
                    score = dang + 1e-3 * (lens - lo) / lo
                    picked.append(cand[int(np.argmin(score))])
            for a, b, ln in picked:
                if (a, b) in seen:
                    continue
                seen.add((a, b))
                out.append(Shift(a, b, k, ln))
        if not out:
            raise ValueError("empty shift set")
        return cls(grid, out)

    @property
    def rings(self) -> int:
        return 1 + max(s.ring for s in self.shifts)

    def __len__(self):
        return len(self.shifts)


def _diff_norm_p(values: NDArray, grid: Grid2, di: int, dj: int, p: float) -> float:
    """||D^h f||_{L^p(Omega ∩ (Omega - h))}^p."""
    sh, (si, sj) = shifted(values, di, dj, grid.periodic)
    d = sh - values[si, sj]
    mag = np.sqrt(np.sum(d * d, axis=-1)) if d.ndim == 3 else np.abs(d)
    return float(np.sum(mag ** p) * grid.cell_area)


@dataclass
class BesovFD:
    value: float
    argmax: Shift
    s: float
    p: float
    profile: list[tuple[int, float, float, float]] = field(repr=False)

    def ring_max(self) -> NDArray:
        """Largest ||D^h m||_p / |h|^s per ring."""
        n = 1 + max(r for r, *_ in self.profile)
        out = np.zeros(n)
        for r, _, _, v in self.profile:
            out[r] = max(out[r], v)
        return out


def besov_seminorm_fd(m, s: float, p: float, shifts: ShiftSet) -> BesovFD:
    """max over the shift set of ||D^h m||_{L^p} / |h|^s.

    The profile lists (ring, |h|, direction, value) for every shift.
    """
    if not len(shifts):
        raise ValueError("empty shift set")
    if p < 1:
        raise ValueError("p must be >= 1")
    vals = m.values
    grid = m.grid
    best, arg = -1.0, None
    prof = []
    for sh in shifts.shifts:
        v = _diff_norm_p(vals, grid, sh.di, sh.dj, p) ** (1.0 / p) / sh.length ** s
        prof.append((sh.ring, sh.length, sh.direction, v))
        if v > best:
            best, arg = v, sh
    return BesovFD(best, arg, s, p, prof)


def laminate_seminorm_oracle(beta: float, count: int, p: float, length: float = 1.0) -> float:
    """[m]_{B^{1/p}_{p,inf}} of a grid-aligned laminate: J (count L)^{1/p}, J = 2 sin beta."""
    return 2 * math.sin(beta) * (count * length) ** (1.0 / p)


def besov_norm_fd(f, s: float, p: float, q: float = math.inf, radius_cells: int | None = None) -> float:
    """||f||_{L^p} + (sum_h (||D^h f||_p / |h|^s)^q |h|^{-2} dA)^{1/q} over all lattice h
    with |h| <= radius (sup for q = inf)."""
    g = f.grid
    vals = f.values
    if radius_cells is None:
        radius_cells = max(1, min(g.nx, g.ny) // 8)
    mag = np.sqrt(np.sum(vals * vals, axis=-1)) if vals.ndim == 3 else np.abs(vals)
    lp = float((np.sum(mag ** p) * g.cell_area) ** (1.0 / p))
    acc = 0.0
    best = 0.0
    for a in range(-radius_cells, radius_cells + 1):
        for b in range(0, radius_cells + 1):
            if b == 0 and a <= 0:
                continue
            if a * a + b * b > radius_cells ** 2:
                continue
            ln = math.hypot(a * g.hx, b * g.hy)
            v = _diff_norm_p(vals, g, a, b, p) ** (1.0 / p) / ln ** s
            best = max(best, v)
            if math.isfinite(q):
                # both h and -h
                acc += 2 * v ** q * g.cell_area / ln ** 2
    semi = best if not math.isfinite(q) else acc ** (1.0 / q)
    return lp + semi


# ---------------------------------------------------------------------------
# Littlewood-Paley


def smoothstep(t: NDArray) -> NDArray:
    """C^4 step on [0, 1]: t^5 (126 - 420 t + 540 t^2 - 315 t^3 + 70 t^4)."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 5 * (126 + t * (-420 + t * (540 + t * (-315 + 70 * t))))


def phi_lp(r: NDArray) -> NDArray:
    """Radial cut-off: 1 on |xi| <= 1, 0 on |xi| >= 2."""
    return smoothstep(2.0 - np.asarray(r, dtype=float))


def _freq_radius(grid: Grid2) -> NDArray:
    kx = sfft.fftfreq(grid.nx, d=grid.hx)
    ky = sfft.rfftfreq(grid.ny, d=grid.hy)
    return np.hypot(kx[:, None], ky[None, :])


def lp_profiles(grid: Grid2) -> tuple[NDArray, int]:
    """chi_j on the rfft frequency grid (cycles per unit length) and J."""
    nyq = max(grid.nx / (2 * grid.lx), grid.ny / (2 * grid.ly))
    J = int(math.ceil(math.log2(nyq))) + 1
    r = _freq_radius(grid)
    chis = [phi_lp(r)]
    for j in range(1, J + 1):
        chis.append(phi_lp(r / 2 ** j) - phi_lp(r / 2 ** (j - 1)))
    return np.array(chis), J


@dataclass
class LPDecomposition:
    grid: Grid2
    blocks: NDArray  # (J+1, nx, ny[, 2])
    chis: NDArray = field(repr=False)

    @property
    def J(self) -> int:
        return self.blocks.shape[0] - 1

    def reconstruct(self) -> NDArray:
        return self.blocks.sum(axis=0)

    def block_norms(self, p: float) -> NDArray:
        b = self.blocks
        mag = np.sqrt(np.sum(b * b, axis=-1)) if b.ndim == 4 else np.abs(b)
        return (np.sum(mag ** p, axis=(1, 2)) * self.grid.cell_area) ** (1.0 / p)


def lp_decompose(f) -> LPDecomposition:
    """Blocks f_j = F^-1 chi_j F f of a periodic scalar or vector field."""
    g = f.grid
    if not g.periodic:
        raise ValueError("Littlewood-Paley decomposition needs a periodic grid")
    chis, J = lp_profiles(g)
    w = fft_workers()
    vals = f.values
    comps = [vals] if vals.ndim == 2 else [vals[..., c] for c in range(vals.shape[-1])]
    out = []
    for c in comps:
        F = sfft.rfft2(c, workers=w)
        out.append(np.stack([sfft.irfft2(ch * F, s=c.shape, workers=w) for ch in chis]))
    blocks = out[0] if vals.ndim == 2 else np.stack(out, axis=-1)
    return LPDecomposition(g, blocks, chis)


def besov_norm_lp(f=None, gamma: float = 0.0, p: float = 2.0, q: float = math.inf,
                  dec: LPDecomposition | None = None) -> float:
    """|| (2^{j gamma} ||f_j||_{L^p})_j ||_{l^q}."""
    if dec is None:
        dec = lp_decompose(f)
    a = dec.block_norms(p) * 2.0 ** (gamma * np.arange(dec.J + 1))
    if not math.isfinite(q):
        return float(a.max())
    return float(np.sum(a ** q) ** (1.0 / q))


def spectral_gradient(f: ScalarField2) -> tuple[NDArray, NDArray]:
    g = f.grid
    w = fft_workers()
    F = sfft.rfft2(f.values, workers=w)
    kx = 2j * np.pi * sfft.fftfreq(g.nx, d=g.hx)[:, None]
    ky = 2j * np.pi * sfft.rfftfreq(g.ny, d=g.hy)[None, :]
    if g.nx % 2 == 0:
        kx = kx.copy()
        kx[g.nx // 2] = 0
    if g.ny % 2 == 0:
        ky = ky.copy()
        ky[:, -1] = 0
    return (sfft.irfft2(kx * F, s=g.shape, workers=w), sfft.irfft2(ky * F, s=g.shape, workers=w))


@dataclass(frozen=True)
class DualityResult:
    lhs: float
    rhs: float
    ratio: float
    failed: bool


def duality_pairing_check(f: ScalarField2, g: ScalarField2, alpha: float, p: float,
                          dec_f: LPDecomposition | None = None,
                          dec_g: LPDecomposition | None = None) -> DualityResult:
    """lhs = max_k |int f d_k g|, rhs = ||f||_{B^alpha_{p,inf}} ||g||_{B^{1-alpha}_{p',1}}."""
    if f.grid != g.grid or not f.grid.periodic:
        raise ValueError("duality check needs two fields on the same periodic grid")
    pp = math.inf if p == 1 else p / (p - 1)
    gx, gy = spectral_gradient(g)
    area = f.grid.cell_area
    lhs = max(abs(float(np.sum(f.values * gx) * area)), abs(float(np.sum(f.values * gy) * area)))
    nf = besov_norm_lp(f, alpha, p, math.inf, dec_f)
    if math.isfinite(pp):
        ng = besov_norm_lp(g, 1 - alpha, pp, 1.0, dec_g)
    else:
        d = dec_g if dec_g is not None else lp_decompose(g)
        a = np.abs(d.blocks).max(axis=(1, 2)) * 2.0 ** ((1 - alpha) * np.arange(d.J + 1))
        ng = float(a.sum())
    rhs = nf * ng
    failed = rhs < 1e-14 and lhs > 1e-10
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-10 else math.inf)
    return DualityResult(lhs, rhs, ratio, failed)


def _block_sup(dec: LPDecomposition) -> NDArray:
    return np.abs(dec.blocks).max(axis=(1, 2))


def duality_sweep(f: ScalarField2, g: ScalarField2, alphas: Sequence[float], ps: Sequence[float],
                  dec_f: LPDecomposition | None = None,
                  dec_g: LPDecomposition | None = None) -> dict[tuple[float, float], float]:
    """Ratios of :func:`duality_pairing_check` for every (alpha, p), sharing the
    pairing and the block norms between parameters."""
    if f.grid != g.grid or not f.grid.periodic:
        raise ValueError("duality check needs two fields on the same periodic grid")
    dec_f = dec_f if dec_f is not None else lp_decompose(f)
    dec_g = dec_g if dec_g is not None else lp_decompose(g)
    gx, gy = spectral_gradient(g)
    area = f.grid.cell_area
    lhs = max(abs(float(np.sum(f.values * gx) * area)), abs(float(np.sum(f.values * gy) * area)))
    j = np.arange(dec_f.J + 1)
    out = {}
    for p in ps:
        nf_p = dec_f.block_norms(p)
        ng_p = _block_sup(dec_g) if p == 1 else dec_g.block_norms(p / (p - 1))
        for a in alphas:
            rhs = float((nf_p * 2.0 ** (a * j)).max()) * float(np.sum(ng_p * 2.0 ** ((1 - a) * j)))
            out[(a, p)] = lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-10 else math.inf)
    return out


# ---------------------------------------------------------------------------
# test fields


@dataclass(frozen=True)
class BandLimited:
    """Real trigonometric polynomial with integer wave vectors |k| <= kmax.

    Sampling the same object on several grids gives the same continuum
    function, which makes refinement studies meaningful.
    """

    k: NDArray
    amp: NDArray
    phase: NDArray

    @classmethod
    def random(cls, rng: np.random.Generator, kmax: int = 8, decay: float = 1.0) -> BandLimited:
        ks = [(a, b) for a in range(-kmax, kmax + 1) for b in range(0, kmax + 1)
              if (b > 0 or a > 0) and a * a + b * b <= kmax * kmax]
        k = np.array(ks, dtype=float)
        amp = rng.standard_normal(len(k)) / (1.0 + np.hypot(k[:, 0], k[:, 1])) ** decay
        phase = rng.uniform(0, 2 * np.pi, len(k))
        return cls(k, amp, phase)

    def sample(self, grid: Grid2) -> ScalarField2:
        """Exact values at the cell centres, summed by one inverse FFT."""
        nx, ny = grid.shape
        kmax = np.abs(self.k).max(initial=0.0)
        if 2 * kmax >= min(nx, ny):
            raise ValueError("grid too coarse for the band limit")
        a = self.k[:, 0].astype(int)
        b = self.k[:, 1].astype(int)
        # centres sit at (i + 1/2) h: fold that half-cell phase into the coefficients
        c = self.amp * np.exp(1j * (self.phase + np.pi * (a / nx + b / ny)))
        A = np.zeros((nx, ny), dtype=complex)
        np.add.at(A, (a % nx, b % ny), c)
        out = sfft.ifft2(A, workers=fft_workers()).real * (nx * ny)
        return ScalarField2(grid, out)


def random_bandlimited(grid: Grid2, rng: np.random.Generator, kmax: int = 8) -> ScalarField2:
    return BandLimited.random(rng, kmax).sample(grid)


def fd_besov_monotone_check(m: VectorField2, p: float, q: float, shifts: ShiftSet) -> bool:
    """||D^h m||_q^q <= (2 ||m||_inf)^{q-p} ||D^h m||_p^p at every shift (q >= p)."""
    vals = m.values
    sup = float(np.sqrt(np.sum(vals * vals, axis=-1)).max())
    for sh in shifts.shifts:
        a = _diff_norm_p(vals, m.grid, sh.di, sh.dj, q)
        b = _diff_norm_p(vals, m.grid, sh.di, sh.dj, p)
        if a > (2 * sup) ** (q - p) * b * (1 + 1e-12) + 1e-300:
            return False
    return True


__all__ = [
    "Shift", "ShiftSet", "BesovFD", "besov_seminorm_fd", "laminate_seminorm_oracle", "besov_norm_fd",
    "smoothstep", "phi_lp", "lp_profiles", "LPDecomposition", "lp_decompose", "besov_norm_lp",
    "spectral_gradient", "DualityResult", "duality_pairing_check", "duality_sweep", "BandLimited",
    "random_bandlimited", "fd_besov_monotone_check",
]
