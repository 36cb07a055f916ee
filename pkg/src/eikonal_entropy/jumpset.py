"""Jump-set detection from a nonnegative measure, trace extraction and the
jump-formula comparison for entropy productions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from .entropy import Entropy
from .fields import Grid2, SignedMeasure2, VectorField2, convolve
from .production import jump_cost
from .solutions import JumpSpec


@dataclass
class Detection:
    mask: NDArray
    thinned: NDArray
    ratios: dict  # r -> nu(B_r(x)) / (2 r)
    radii: tuple
    tau: float


def density_ratio(nu: SignedMeasure2, r: float) -> NDArray:
    """nu(B_r(x)) / (2 r) at every cell centre (density per unit length)."""
    return nu.ball_mass_field(r) / (2.0 * r)


def detect_jumps(nu: SignedMeasure2, radii: Sequence[float], tau: float, thin: bool = True,
                 excluded: NDArray | None = None) -> Detection:
    """Flag cells with min over the two smallest radii of nu(B_r)/(2r) >= tau.

    Cells whose balls reach into ``excluded`` (masked singular cores, where
    the measure carries no information) are never flagged.

    ``thinned`` additionally keeps only cells that are maximal along the
    local normal of the ratio field, which reduces the detected band to
    the one or two cell layers next to the line.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    radii = tuple(float(r) for r in radii)
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be decreasing")
    if radii[-1] < 3 * nu.grid.h * (1 - 1e-9):
        raise ValueError("smallest radius must be at least 3 grid spacings")
    if np.any(nu.mass < -1e-14 * max(1.0, float(np.abs(nu.mass).max(initial=0.0)))):
        raise ValueError("detection needs a nonnegative measure")
    fine = radii[-2:] if len(radii) >= 2 else radii
    ratios = {r: density_ratio(nu, r) for r in fine}
    low = np.minimum.reduce([ratios[r] for r in fine])
    mask = low >= tau
    if excluded is not None and np.any(excluded):
        g = nu.grid
        reach = int(np.ceil(max(fine) / g.h)) + 1
        disk = np.hypot(*np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1))) <= reach
        near = convolve(np.asarray(excluded, dtype=float), disk.astype(float), g.periodic) > 0.5
        mask &= ~near
    thinned = _thin(ratios[radii[-1]], mask, nu.grid) if thin else mask.copy()
    return Detection(mask, thinned, ratios, radii, tau)


def _thin(R: NDArray, mask: NDArray, grid: Grid2, sigma: float = 1.5) -> NDArray:
    """Non-maximum suppression of R along the dominant gradient direction."""
    gx = ndimage.sobel(R, axis=0, mode="nearest")
    gy = ndimage.sobel(R, axis=1, mode="nearest")
    jxx = ndimage.gaussian_filter(gx * gx, sigma)
    jxy = ndimage.gaussian_filter(gx * gy, sigma)
    jyy = ndimage.gaussian_filter(gy * gy, sigma)
    ang = 0.5 * np.arctan2(2 * jxy, jxx - jyy)
    di = np.rint(np.cos(ang)).astype(int)
    dj = np.rint(np.sin(ang)).astype(int)
    nx, ny = R.shape
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    if grid.periodic:
        ip, jp = (I + di) % nx, (J + dj) % ny
        im, jm = (I - di) % nx, (J - dj) % ny
    else:
        ip, jp = np.clip(I + di, 0, nx - 1), np.clip(J + dj, 0, ny - 1)
        im, jm = np.clip(I - di, 0, nx - 1), np.clip(J - dj, 0, ny - 1)
    tol = 1e-12 * max(1.0, float(np.abs(R).max(initial=0.0)))
    keep = (R >= R[ip, jp] - tol) & (R >= R[im, jm] - tol)
    return mask & keep


# ---------------------------------------------------------------------------
# traces


@dataclass
class TraceEstimate:
    x: NDArray
    normal: NDArray
    m_plus: NDArray
    m_minus: NDArray
    beta: float

    @property
    def sbar(self) -> float:
        z = complex(*self.m_plus) + complex(*self.m_minus)
        return float(np.angle(z))

    @property
    def compatibility(self) -> float:
        """|m+ . n - m- . n| (zero for a divergence-free jump)."""
        return float(abs(self.m_plus @ self.normal - self.m_minus @ self.normal))

    def cost(self, entropy: Entropy) -> float:
        """n . (Phi(m+) - Phi(m-)) with the estimated normal and traces."""
        a = entropy.phi(np.array(np.arctan2(self.m_plus[1], self.m_plus[0])))
        b = entropy.phi(np.array(np.arctan2(self.m_minus[1], self.m_minus[0])))
        d = a - b
        return float(self.normal[0] * d.real + self.normal[1] * d.imag)


def _unit_mean(v: NDArray) -> NDArray:
    s = v.sum(axis=0)
    return s / np.hypot(*s)


def extract_traces(m: VectorField2, mask: NDArray, x: Sequence[float], r: float,
                   min_cells: int = 8) -> TraceEstimate | None:
    """Normal from the principal axes of the detected cells in B_{4r}(x) (the
    largest-variance axis is the tangent); traces are the normalised means of m
    over the half disks {+-(y - x0).n > r/4} of B_r(x0), x0 the projection of x
    onto the fitted line."""
    g = m.grid
    X, Y = g.centers()
    x = np.asarray(x, dtype=float)
    near = mask & ((X - x[0]) ** 2 + (Y - x[1]) ** 2 <= (4 * r) ** 2)
    if near.sum() < min_cells:
        return None
    pts = np.stack([X[near], Y[near]], axis=1)
    c = pts.mean(axis=0)
    w, V = np.linalg.eigh(np.cov((pts - c).T))
    tangent = V[:, 1]
    n = np.array([-tangent[1], tangent[0]])
    x0 = c + ((x - c) @ tangent) * tangent
    dx, dy = X - x0[0], Y - x0[1]
    ball = (dx * dx + dy * dy <= r * r) & m.valid
    s = dx * n[0] + dy * n[1]
    plus = ball & (s > r / 4)
    minus = ball & (s < -r / 4)
    if plus.sum() == 0 or minus.sum() == 0:
        return None
    mp = _unit_mean(m.values[plus])
    mm = _unit_mean(m.values[minus])
    beta = 0.5 * float(np.arccos(np.clip(mp @ mm, -1.0, 1.0)))
    return TraceEstimate(x0, n, mp, mm, beta)


@dataclass
class Segment:
    p0: NDArray
    p1: NDArray
    trace: TraceEstimate
    cells: int

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.p1 - self.p0)))


def fit_segments(m: VectorField2, band: NDArray, r: float, thinned: NDArray | None = None,
                 min_cells: int = 16) -> list[Segment]:
    """One straight segment per 8-connected component of the detection ``band``,
    fitted through the component's ``thinned`` cells when given."""
    g = m.grid
    X, Y = g.centers()
    core = band if thinned is None else thinned
    lab, n = ndimage.label(band, structure=np.ones((3, 3)))
    out = []
    for k in range(1, n + 1):
        sel = (lab == k) & core
        if sel.sum() < min_cells:
            continue
        pts = np.stack([X[sel], Y[sel]], axis=1)
        c = pts.mean(axis=0)
        _, V = np.linalg.eigh(np.cov((pts - c).T))
        t = V[:, 1]
        proj = (pts - c) @ t
        # half a cell beyond the extreme centres
        pad = 0.5 * abs(t[0]) * g.hx + 0.5 * abs(t[1]) * g.hy
        p0 = c + (proj.min() - pad) * t
        p1 = c + (proj.max() + pad) * t
        tr = extract_traces(m, sel, c, r)
        if tr is None:
            continue
        out.append(Segment(p0, p1, tr, int(sel.sum())))
    return out


# ---------------------------------------------------------------------------
# scoring against analytic lines


def _distance_to_segments(X: NDArray, Y: NDArray, segs: Sequence[tuple[NDArray, NDArray]]) -> NDArray:
    best = np.full(X.shape, np.inf)
    for a, b in segs:
        d = b - a
        t = np.clip(((X - a[0]) * d[0] + (Y - a[1]) * d[1]) / (d @ d), 0.0, 1.0)
        best = np.minimum(best, np.hypot(X - a[0] - t * d[0], Y - a[1] - t * d[1]))
    return best


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    detected: int
    samples: int


def precision_recall(mask: NDArray, grid: Grid2, jumps: Sequence[JumpSpec], tol_cells: float = 1.5,
                     margin: float = 0.0) -> PrecisionRecall:
    """Precision: detected cells within ``tol`` of an analytic line. Recall: points
    sampled every cell along the lines having a detected cell within ``tol``.
    Both are restricted to the domain eroded by ``margin`` (a length)."""
    X, Y = grid.centers()
    tol = tol_cells * grid.h
    inner = ((X >= grid.x0 + margin) & (X <= grid.x1 - margin)
             & (Y >= grid.y0 + margin) & (Y <= grid.y1 - margin))
    segs = [s for s in (j.segment(grid) for j in jumps) if s is not None]
    det = mask & inner
    nd = int(det.sum())
    if segs:
        dist = _distance_to_segments(X[det], Y[det], segs)
        prec = float((dist <= tol).mean()) if nd else 1.0
    else:
        prec = 0.0 if nd else 1.0
    hits, tot = 0, 0
    dx, dy = X[det], Y[det]
    for a, b in segs:
        L = float(np.hypot(*(b - a)))
        k = max(2, int(np.ceil(L / grid.h)))
        ts = (np.arange(k) + 0.5) / k
        P = a[None, :] + ts[:, None] * (b - a)[None, :]
        ok = ((P[:, 0] >= grid.x0 + margin) & (P[:, 0] <= grid.x1 - margin)
              & (P[:, 1] >= grid.y0 + margin) & (P[:, 1] <= grid.y1 - margin))
        P = P[ok]
        tot += len(P)
        if nd == 0:
            continue
        for q in range(0, len(P), 256):
            blk = P[q:q + 256]
            d2 = (blk[:, 0:1] - dx[None, :]) ** 2 + (blk[:, 1:2] - dy[None, :]) ** 2
            hits += int((d2.min(axis=1) <= tol * tol).sum())
    rec = hits / tot if tot else 1.0
    return PrecisionRecall(prec, rec, nd, tot)


def trace_errors(est: TraceEstimate, spec: JumpSpec) -> tuple[float, float]:
    """Angular errors of the estimated traces against the analytic ones, matching
    orientation by the normals."""
    a_p = np.arctan2(spec.m_plus[1], spec.m_plus[0])
    a_m = np.arctan2(spec.m_minus[1], spec.m_minus[0])
    e_p = np.arctan2(est.m_plus[1], est.m_plus[0])
    e_m = np.arctan2(est.m_minus[1], est.m_minus[0])
    if est.normal @ spec.normal < 0:
        e_p, e_m = e_m, e_p

    def d(u, v):
        return float(abs(np.angle(np.exp(1j * (u - v)))))

    return d(e_p, a_p), d(e_m, a_m)


# ---------------------------------------------------------------------------
# jump formula


def strip_mask(grid: Grid2, segs: Sequence[tuple[NDArray, NDArray]], width: float) -> NDArray:
    X, Y = grid.centers()
    if not segs:
        return np.zeros(grid.shape, dtype=bool)
    return _distance_to_segments(X, Y, segs) <= width


@dataclass
class RectifiabilityReport:
    """Strip masses against n . (Phi(m+) - Phi(m-)) times the (tapered) length.

    ``strip_mass`` and ``predicted`` add the moduli of the per-segment values,
    since neighbouring laminate interfaces carry productions of opposite sign.
    """

    strip_mass: float
    predicted: float
    off_strip: float
    total_variation: float
    per_segment: list[dict] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.strip_mass / self.predicted if self.predicted else float("nan")

    @property
    def off_fraction(self) -> float:
        return self.off_strip / self.total_variation if self.total_variation else 0.0

    def to_json(self) -> dict:
        return {"strip_mass": self.strip_mass, "predicted": self.predicted, "ratio": self.ratio,
                "off_strip": self.off_strip, "off_fraction": self.off_fraction,
                "total_variation": self.total_variation, "segments": self.per_segment}


def clip_segment(seg: tuple[NDArray, NDArray], x0: float, x1: float, y0: float, y1: float):
    a, b = np.asarray(seg[0], float), np.asarray(seg[1], float)
    d = b - a
    lo, hi = 0.0, 1.0
    for k, (u, v) in enumerate(((x0, x1), (y0, y1))):
        if abs(d[k]) < 1e-300:
            if not (u <= a[k] <= v):
                return None
            continue
        t0, t1 = sorted(((u - a[k]) / d[k], (v - a[k]) / d[k]))
        lo, hi = max(lo, t0), min(hi, t1)
    if hi <= lo:
        return None
    return a + lo * d, a + hi * d


def _taper_weights(grid: Grid2, seg, width: float, taper: float) -> tuple[NDArray, float]:
    """Cells within ``width`` of the segment's line, weighted by a cos^2 ramp of
    length ``taper`` at both ends; returns the weights and int of the ramp."""
    X, Y = grid.centers()
    a, b = seg
    L = float(np.hypot(*(b - a)))
    t = (b - a) / L
    n = np.array([-t[1], t[0]])
    u = (X - a[0]) * t[0] + (Y - a[1]) * t[1]
    v = (X - a[0]) * n[0] + (Y - a[1]) * n[1]
    taper = min(taper, 0.5 * L)
    if taper > 0:
        ramp = np.clip(np.minimum(u, L - u) / taper, 0.0, 1.0)
        chi = np.sin(0.5 * np.pi * ramp) ** 2
        integral = L - taper
    else:
        chi = ((u >= 0) & (u <= L)).astype(float)
        integral = L
    return np.where(np.abs(v) <= width, chi, 0.0), integral


def verify_rectifiability(production: SignedMeasure2, entropy: Entropy, segments: Sequence,
                          width_cells: float = 3.0, taper_cells: float = 16.0) -> RectifiabilityReport:
    """Compare the production mass in a strip around each segment with
    n . (Phi(m+) - Phi(m-)) times its length.

    ``segments`` holds detected :class:`Segment` objects or analytic
    :class:`JumpSpec` lines; both are clipped to the region where the
    production is defined. Strip weights ramp smoothly to zero over
    ``taper_cells`` at both ends, which removes the O(h) end effects of
    staircase interfaces; the prediction uses the matching weighted length.
    """
    g = production.grid
    mg = production.margin
    box = (g.x0 + mg * g.hx, g.x1 - mg * g.hx, g.y0 + mg * g.hy, g.y1 - mg * g.hy)
    width = width_cells * g.h
    rows = []
    geo = []
    sm = pred = 0.0
    for s in segments:
        if isinstance(s, JumpSpec):
            seg = s.segment(g)
            # n . (Phi(m+) - Phi(m-)) with n = sign e^{i sbar}
            cost = s.sign * jump_cost(entropy, s.sbar, s.beta)
        else:
            seg = (s.p0, s.p1)
            cost = s.trace.cost(entropy)
        if seg is None:
            continue
        c = clip_segment(seg, *box)
        if c is None:
            continue
        geo.append(c)
        w, ell = _taper_weights(g, c, width, taper_cells * g.h)
        mass = float(np.sum(w * production.mass))
        rows.append({"length": float(np.hypot(*(c[1] - c[0]))), "weighted_length": ell, "cost": cost,
                     "strip_mass": mass, "ratio": mass / (cost * ell) if cost * ell else float("nan")})
        sm += abs(mass)
        pred += abs(cost * ell)
    strip = strip_mask(g, geo, width)
    off = production.variation_of(~strip)
    return RectifiabilityReport(sm, pred, off, production.total_variation, rows)
