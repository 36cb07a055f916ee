"""Exact weak solutions of |m| = 1, div m = 0 sampled at cell centres."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .fields import Grid2, TestFunction, VectorField2, smooth_test_battery

TWO_PI = 2.0 * np.pi


def _unit(a: float) -> NDArray:
    return np.array([np.cos(a), np.sin(a)])


def wrap_angle(a):
    """Representative in (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)


@dataclass(frozen=True)
class JumpSpec:
    """Straight jump line with traces e^{i(sbar +- beta)}.

    The line passes through ``point`` with normal ``sign * e^{i sbar}``;
    m+ lives on the side the normal points to.
    """

    sbar: float
    beta: float
    point: tuple[float, float] = (0.5, 0.5)
    sign: int = 1

    def __post_init__(self):
        if not (0.0 < self.beta < np.pi / 2):
            raise ValueError(f"beta must lie in (0, pi/2), got {self.beta}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @property
    def normal(self) -> NDArray:
        return self.sign * _unit(self.sbar)

    @property
    def tangent(self) -> NDArray:
        n = self.normal
        return np.array([-n[1], n[0]])

    @property
    def m_plus(self) -> NDArray:
        return _unit(self.sbar + self.beta)

    @property
    def m_minus(self) -> NDArray:
        return _unit(self.sbar - self.beta)

    def side(self, X: NDArray, Y: NDArray) -> NDArray:
        """Signed distance to the line, positive on the m+ side."""
        n = self.normal
        return (X - self.point[0]) * n[0] + (Y - self.point[1]) * n[1]

    def segment(self, grid: Grid2) -> tuple[NDArray, NDArray] | None:
        """End points of the line clipped to the domain rectangle."""
        p = np.asarray(self.point, dtype=float)
        t = self.tangent
        lo, hi = -np.inf, np.inf
        for k, (a, b) in enumerate(((grid.x0, grid.x1), (grid.y0, grid.y1))):
            if abs(t[k]) < 1e-15:
                if not (a <= p[k] <= b):
                    return None
                continue
            t0, t1 = sorted(((a - p[k]) / t[k], (b - p[k]) / t[k]))
            lo, hi = max(lo, t0), min(hi, t1)
        if hi <= lo:
            return None
        return p + lo * t, p + hi * t

    def length(self, grid: Grid2) -> float:
        seg = self.segment(grid)
        if seg is None:
            return 0.0
        return float(np.hypot(*(seg[1] - seg[0])))


def synth_constant(grid: Grid2, theta: float) -> VectorField2:
    v = np.empty(grid.shape + (2,))
    v[..., 0] = np.cos(theta)
    v[..., 1] = np.sin(theta)
    return VectorField2(grid, v, unit=True, meta={"kind": "constant", "theta": theta})


def _snap_edge(grid: Grid2, x: float, axis: int) -> float:
    h = grid.hx if axis == 0 else grid.hy
    o = grid.x0 if axis == 0 else grid.y0
    return o + round((x - o) / h) * h


def _axis_of(sbar: float) -> int:
    c, s = np.cos(sbar), np.sin(sbar)
    if abs(s) < 1e-12:
        return 0
    if abs(c) < 1e-12:
        return 1
    raise ValueError("periodic grids need axis-aligned jump lines (sbar multiple of pi/2)")


def synth_jump(grid: Grid2, spec: JumpSpec) -> VectorField2:
    """Single jump line. On periodic grids the line is snapped to a cell edge and
    completed by a partner line half a period away carrying the reverse jump."""
    X, Y = grid.centers()
    if not grid.periodic:
        plus = spec.side(X, Y) > 0
        v = np.where(plus[..., None], spec.m_plus, spec.m_minus)
        return VectorField2(grid, v, unit=True, jumps=(spec,),
                            meta={"kind": "jump", "sbar": spec.sbar, "beta": spec.beta})
    ax = _axis_of(spec.sbar)
    length = grid.lx if ax == 0 else grid.ly
    p = list(spec.point)
    p[ax] = _snap_edge(grid, p[ax], ax)
    first = JumpSpec(spec.sbar, spec.beta, (p[0], p[1]), spec.sign)
    q = list(p)
    q[ax] += 0.5 * length * np.sign(first.normal[ax])
    q[ax] = _snap_edge(grid, q[ax], ax)
    lo = grid.x0 if ax == 0 else grid.y0
    q[ax] = lo + np.mod(q[ax] - lo, length)
    partner = JumpSpec(spec.sbar, spec.beta, (q[0], q[1]), -spec.sign)
    # + side of the first line up to the partner, measured along its normal (mod the period)
    d = np.mod(first.side(X, Y), length)
    gap = np.mod((q[ax] - p[ax]) * np.sign(first.normal[ax]), length)
    plus = (d > 0) & (d < gap)
    v = np.where(plus[..., None], spec.m_plus, spec.m_minus)
    return VectorField2(grid, v, unit=True, jumps=(first, partner),
                        meta={"kind": "jump", "sbar": spec.sbar, "beta": spec.beta})


def synth_laminate(grid: Grid2, sbar: float, beta: float, period: float, count: int,
                   offset: float | None = None) -> VectorField2:
    """``count`` parallel interfaces ``period`` apart with normal e^{i sbar}.

    Stripes alternate between e^{i(sbar-beta)} and e^{i(sbar+beta)}. Periodic
    grids need an even count, axis-aligned normals and lattice-compatible
    periods; interfaces then sit on cell edges.
    """
    if count < 1:
        raise ValueError("count must be positive")
    n = _unit(sbar)
    X, Y = grid.centers()
    if grid.periodic:
        ax = _axis_of(sbar)
        h = grid.hx if ax == 0 else grid.hy
        length = grid.lx if ax == 0 else grid.ly
        lo = grid.x0 if ax == 0 else grid.y0
        if count % 2:
            raise ValueError("incompatible period: periodic laminates need an even count")
        if abs(period / h - round(period / h)) > 1e-9 or count * period > length + 1e-12:
            raise ValueError("incompatible period")
        start = lo + 0.5 * (length - count * period) if offset is None else offset
        start = _snap_edge(grid, start, ax)
        pos = start + period * np.arange(count)
        coord = (X if ax == 0 else Y) - lo
        # state index = number of interfaces to the left (mod 2)
        k = np.zeros(grid.shape, dtype=int)
        for c in pos:
            k += coord > (c - lo)
        sgn = np.sign(n[ax])
        if sgn < 0:
            k = count - k
        plus = (k % 2) == 1
        points = []
        for c in pos:
            p = [grid.x0 + 0.5 * grid.lx, grid.y0 + 0.5 * grid.ly]
            p[ax] = c
            points.append(tuple(p))
        if sgn < 0:
            points = points[::-1]
    else:
        cx, cy = grid.x0 + 0.5 * grid.lx, grid.y0 + 0.5 * grid.ly
        # extent of the domain along n
        corners = np.array([[grid.x0, grid.y0], [grid.x1, grid.y0], [grid.x0, grid.y1], [grid.x1, grid.y1]])
        proj = (corners - [cx, cy]) @ n
        if count * period > proj.max() - proj.min():
            raise ValueError("incompatible period")
        start = -0.5 * (count - 1) * period if offset is None else offset
        pos = start + period * np.arange(count)
        s = (X - cx) * n[0] + (Y - cy) * n[1]
        k = np.zeros(grid.shape, dtype=int)
        for c in pos:
            k += s > c
        plus = (k % 2) == 1
        points = [(cx + c * n[0], cy + c * n[1]) for c in pos]
    v = np.where(plus[..., None], _unit(sbar + beta), _unit(sbar - beta))
    jumps = tuple(JumpSpec(sbar, beta, p, 1 if q % 2 == 0 else -1) for q, p in enumerate(points))
    return VectorField2(grid, v, unit=True, jumps=jumps,
                        meta={"kind": "laminate", "sbar": sbar, "beta": beta,
                              "period": period, "count": count})


def synth_piecewise(grid: Grid2, lines: Sequence[tuple[tuple[float, float], float]],
                    states: Sequence[float]) -> VectorField2:
    """Piecewise-constant field separated by straight non-crossing interfaces.

    ``lines[k] = (point, phi)`` has normal e^{i phi}; the lines are ordered
    along their normals and ``states[k]`` is the angle of m before line k
    (``states[-1]`` after the last one). Each interface must be
    divergence-free: its normal has to be parallel to e^{i(a+b)/2}.
    """
    if len(states) != len(lines) + 1:
        raise ValueError("need one more state than lines")
    X, Y = grid.centers()
    k = np.zeros(grid.shape, dtype=int)
    jumps = []
    for q, ((px, py), phi) in enumerate(lines):
        nu = _unit(phi)
        k += ((X - px) * nu[0] + (Y - py) * nu[1]) > 0
        a, b = states[q], states[q + 1]
        d = float(wrap_angle(b - a))
        if abs(d) < 1e-14:
            raise ValueError(f"interface {q} has no jump")
        sbar = a + 0.5 * d
        dot = float(nu @ _unit(sbar))
        if abs(abs(dot) - 1) > 1e-9:
            raise ValueError(f"interface {q} is not divergence-free")
        sign = int(np.sign(dot)) * (1 if d > 0 else -1)
        jumps.append(JumpSpec(float(wrap_angle(sbar)), 0.5 * abs(d), (px, py), sign))
    ang = np.asarray(states, dtype=float)[k]
    v = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return VectorField2(grid, v, unit=True, jumps=tuple(jumps),
                        meta={"kind": "piecewise", "states": list(map(float, states))})


def two_family_laminate(grid: Grid2, beta1: float, beta2: float, spacing: float = 0.25) -> VectorField2:
    """Four nearly vertical interfaces: two with half-jump beta2, two with beta1.

    States 0, 2 beta2, 0, -2 beta1, 0 from left to right; the normals are
    e^{i beta2} (first pair) and e^{-i beta1} (second pair).
    """
    if grid.periodic:
        raise ValueError("two-family laminate needs a bounded grid")
    cx, cy = grid.x0 + 0.5 * grid.lx, grid.y0 + 0.5 * grid.ly
    xs = cx + spacing * (np.arange(4) - 1.5)
    phis = [beta2, beta2, -beta1, -beta1]
    lines = [((x, cy), p) for x, p in zip(xs, phis)]
    states = [0.0, 2 * beta2, 0.0, -2 * beta1, 0.0]
    f = synth_piecewise(grid, lines, states)
    return VectorField2(grid, f.values, unit=True, jumps=f.jumps,
                        meta={"kind": "two-family", "beta1": beta1, "beta2": beta2})


def synth_vortex(grid: Grid2, center: Sequence[float] | None = None, core: float = 2.0) -> VectorField2:
    """m(x) = i (x - c)/|x - c|; cells within ``core`` cells of c are excluded."""
    if grid.periodic:
        raise ValueError("vortex needs a bounded grid")
    if center is None:
        center = (grid.x0 + 0.5 * grid.lx, grid.y0 + 0.5 * grid.ly)
    c = np.asarray(center, dtype=float)
    if not (grid.x0 < c[0] < grid.x1 and grid.y0 < c[1] < grid.y1):
        raise ValueError("vortex centre must lie strictly inside the domain")
    X, Y = grid.centers()
    dx, dy = X - c[0], Y - c[1]
    r = np.hypot(dx, dy)
    rs = np.where(r > 0, r, 1.0)
    v = np.stack([np.where(r > 0, -dy / rs, 1.0), np.where(r > 0, dx / rs, 0.0)], axis=-1)
    excluded = r <= core * grid.h
    return VectorField2(grid, v, excluded=excluded, unit=True,
                        meta={"kind": "vortex", "center": c.tolist()})


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0) and (orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def synth_distance_gradient(grid: Grid2, polygon: Sequence[Sequence[float]],
                            ridge_angle: float = 0.3) -> VectorField2:
    """m = i grad u with u the distance to the polygon boundary inside and minus
    the distance outside (so u is smooth across the boundary).

    Cells whose angle differs from a 4-neighbour by more than ``ridge_angle``
    are flagged as ridge cells (excluded), together with their neighbours.
    """
    P = np.asarray(polygon, dtype=float)
    nv = len(P)
    if nv < 3:
        raise ValueError("polygon needs at least 3 vertices")
    edges = [(P[k], P[(k + 1) % nv]) for k in range(nv)]
    for a in range(nv):
        for b in range(a + 1, nv):
            if b == a + 1 or (a == 0 and b == nv - 1):
                continue
            if _segments_intersect(*edges[a], *edges[b]):
                raise ValueError("self-intersecting polygon")
    X, Y = grid.centers()
    best = np.full(grid.shape, np.inf)
    fx = np.zeros(grid.shape)
    fy = np.zeros(grid.shape)
    for a, b in edges:
        d = b - a
        t = np.clip(((X - a[0]) * d[0] + (Y - a[1]) * d[1]) / (d @ d), 0.0, 1.0)
        qx, qy = a[0] + t * d[0], a[1] + t * d[1]
        dist = np.hypot(X - qx, Y - qy)
        closer = dist < best
        best = np.where(closer, dist, best)
        fx = np.where(closer, qx, fx)
        fy = np.where(closer, qy, fy)
    # even-odd point-in-polygon
    inside = np.zeros(grid.shape, dtype=bool)
    for a, b in edges:
        cond = (a[1] > Y) != (b[1] > Y)
        xint = a[0] + (Y - a[1]) * (b[0] - a[0]) / np.where(b[1] != a[1], b[1] - a[1], 1.0)
        inside ^= cond & (X < xint)
    sgn = np.where(inside, 1.0, -1.0)
    ds = np.where(best > 0, best, 1.0)
    gx = sgn * (X - fx) / ds
    gy = sgn * (Y - fy) / ds
    degenerate = best < 1e-14
    gx = np.where(degenerate, 1.0, gx)
    gy = np.where(degenerate, 0.0, gy)
    nrm = np.hypot(gx, gy)
    v = np.stack([-gy / nrm, gx / nrm], axis=-1)
    ang = np.arctan2(v[..., 1], v[..., 0])
    ridge = degenerate.copy()
    for axis in (0, 1):
        d = np.abs(wrap_angle(np.diff(ang, axis=axis)))
        big = d > ridge_angle
        if axis == 0:
            ridge[1:, :] |= big
            ridge[:-1, :] |= big
        else:
            ridge[:, 1:] |= big
            ridge[:, :-1] |= big
    return VectorField2(grid, v, excluded=ridge, unit=True,
                        meta={"kind": "distance", "polygon": P.tolist()})


def regular_polygon(n: int, center=(0.5, 0.5), radius: float = 0.35, phase: float = 0.0) -> NDArray:
    k = np.arange(n)
    a = phase + TWO_PI * k / n
    return np.stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)], axis=1)


def weak_divergence(m: VectorField2, battery: Sequence[TestFunction]) -> NDArray:
    """|sum_cells m . grad zeta hx hy| / ||zeta||_C1 for every test function.

    Excluded cells are dropped.
    """
    X, Y = m.grid.centers()
    valid = m.valid
    out = []
    for z in battery:
        gx, gy = z.grad(X, Y)
        s = np.sum(np.where(valid, m.values[..., 0] * gx + m.values[..., 1] * gy, 0.0))
        out.append(abs(s) * m.grid.cell_area / z.c1)
    return np.asarray(out)


def check_solution(m: VectorField2, n_tests: int = 20, seed: int = 0) -> dict:
    """Unit-norm deviation and weak divergence against a seeded battery."""
    dev = np.where(m.valid, np.abs(m.norm - 1.0), 0.0)
    wd = weak_divergence(m, smooth_test_battery(m.grid, n_tests, seed))
    return {"unit_deviation": float(dev.max()), "weak_divergence": float(wd.max())}
