"""
Grids, fields and discretized measures on rectangular 2D domains.

Conventions:
    Cell (i, j) has center (x0 + (i + 1/2) hx, y0 + (j + 1/2) hy).
    Arrays are indexed [i, j] with i along x, shape (nx, ny) for scalars
    and (nx, ny, 2) for vector fields.

Bounded-domain operations that need a neighbourhood of every cell return
their result on an eroded sub-grid (see ``Grid2.erode``) and record the
number of eroded cells in ``margin``; nothing is zero-padded.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import fft as sfft

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import NDArray

FIELD_FILE_VERSION = 1
PERIODIC = "periodic"
BOUNDED = "bounded"
MIN_CELLS = 8


def fft_workers() -> int:
    """Worker count for scipy.fft, taken from ``EIK_THREADS`` when set."""
    env = os.environ.get("EIK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass(frozen=True)
class Grid2:
    """Uniform cell-centred grid on [x0, x1] x [y0, y1]."""

    nx: int
    ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.nx < MIN_CELLS:
            raise ValueError(f"nx too small: {self.nx} < {MIN_CELLS}")
        if self.ny < MIN_CELLS:
            raise ValueError(f"ny too small: {self.ny} < {MIN_CELLS}")
        if not (self.x1 > self.x0) or not (self.y1 > self.y0):
            raise ValueError("degenerate bounds")
        if self.boundary not in (PERIODIC, BOUNDED):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def lx(self) -> float:
        return self.x1 - self.x0

    @property
    def ly(self) -> float:
        return self.y1 - self.y0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def xc(self) -> NDArray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.hx

    @property
    def yc(self) -> NDArray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.hy

    def centers(self) -> tuple[NDArray, NDArray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def erode(self, k: int) -> Grid2:
        """Sub-grid obtained by removing ``k`` cells on every side (always bounded)."""
        if k == 0:
            return self
        return Grid2(
            self.nx - 2 * k,
            self.ny - 2 * k,
            self.x0 + k * self.hx,
            self.x1 - k * self.hx,
            self.y0 + k * self.hy,
            self.y1 - k * self.hy,
            BOUNDED,
        )

    def subgrid(self, i0: int, i1: int, j0: int, j1: int) -> Grid2:
        return Grid2(
            i1 - i0,
            j1 - j0,
            self.x0 + i0 * self.hx,
            self.x0 + i1 * self.hx,
            self.y0 + j0 * self.hy,
            self.y0 + j1 * self.hy,
            BOUNDED,
        )

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        i = int(np.floor((x - self.x0) / self.hx))
        j = int(np.floor((y - self.y0) / self.hy))
        return i, j

    def to_cells(self, h: Sequence[float], tol: float = 1e-9) -> tuple[int, int]:
        """Convert a physical shift to lattice units; non-lattice shifts are rejected."""
        di = h[0] / self.hx
        dj = h[1] / self.hy
        ri, rj = round(di), round(dj)
        if abs(di - ri) > tol or abs(dj - rj) > tol:
            raise ValueError(f"shift {tuple(h)} is not a lattice vector; snap it to the grid")
        return int(ri), int(rj)

    def ident(self) -> str:
        return (
            f"{self.nx}x{self.ny}:[{self.x0:g},{self.x1:g}]x[{self.y0:g},{self.y1:g}]:{self.boundary}"
        )

    def header(self) -> dict:
        return dict(
            nx=self.nx, ny=self.ny, x0=self.x0, x1=self.x1, y0=self.y0, y1=self.y1,
            boundary=self.boundary,
        )


def make_grid(
    nx: int,
    ny: int,
    bounds: Sequence[Sequence[float]] = ((0.0, 1.0), (0.0, 1.0)),
    boundary: str = PERIODIC,
) -> Grid2:
    (x0, x1), (y0, y1) = bounds
    return Grid2(int(nx), int(ny), float(x0), float(x1), float(y0), float(y1), boundary)


def _frozen(a: NDArray) -> NDArray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VectorField2:
    """Cell-centred 2-vector field.

    ``excluded`` flags cells that carry no reliable value (vortex core,
    distance-function ridges). ``jumps`` holds the analytic jump lines of
    synthetic solutions, when known.
    """

    grid: Grid2
    values: NDArray
    excluded: NDArray | None = None
    unit: bool = False
    margin: int = 0
    jumps: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.nx, self.grid.ny, 2):
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field contains non-finite values")
        object.__setattr__(self, "values", v)
        if self.excluded is not None:
            ex = np.asarray(self.excluded, dtype=bool).copy()
            ex.setflags(write=False)
            object.__setattr__(self, "excluded", ex)
        if self.unit:
            dev = np.abs(np.hypot(v[..., 0], v[..., 1]) - 1.0)
            if self.excluded is not None:
                dev = np.where(self.excluded, 0.0, dev)
            if dev.max(initial=0.0) > 1e-12:
                raise ValueError(f"field marked unit-length deviates by {dev.max():.3e}")

    @property
    def angle(self) -> NDArray:
        return np.arctan2(self.values[..., 1], self.values[..., 0])

    @property
    def norm(self) -> NDArray:
        return np.hypot(self.values[..., 0], self.values[..., 1])

    @property
    def valid(self) -> NDArray:
        if self.excluded is None:
            return np.ones(self.grid.shape, dtype=bool)
        return ~self.excluded

    def with_values(self, values: NDArray, grid: Grid2 | None = None, margin: int | None = None,
                    unit: bool = False) -> VectorField2:
        g = grid if grid is not None else self.grid
        return VectorField2(g, values, None, unit, self.margin if margin is None else margin)

    def __mul__(self, a: float) -> VectorField2:
        return VectorField2(self.grid, a * self.values, self.excluded, False, self.margin)

    __rmul__ = __mul__


@dataclass(frozen=True)
class ScalarField2:
    grid: Grid2
    values: NDArray
    margin: int = 0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SignedMeasure2:
    """Signed measure stored as the mass of every grid cell."""

    grid: Grid2
    mass: NDArray
    margin: int = 0

    def __post_init__(self):
        m = _frozen(self.mass)
        if m.shape != self.grid.shape:
            raise ValueError(f"mass shape {m.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("measure has non-finite masses")
        object.__setattr__(self, "mass", m)

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.mass).sum())

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def abs(self) -> SignedMeasure2:
        return SignedMeasure2(self.grid, np.abs(self.mass), self.margin)

    def restrict(self, mask: NDArray) -> SignedMeasure2:
        return SignedMeasure2(self.grid, np.where(mask, self.mass, 0.0), self.margin)

    def mass_of(self, mask: NDArray) -> float:
        return float(self.mass[mask].sum())

    def variation_of(self, mask: NDArray) -> float:
        return float(np.abs(self.mass[mask]).sum())

    def density(self) -> NDArray:
        return self.mass / self.grid.cell_area

    def ball_mass(self, x: Sequence[float], r: float) -> float:
        """Mass of the cells whose centres lie in the closed ball B_r(x)."""
        X, Y = self.grid.centers()
        dx = X - x[0]
        dy = Y - x[1]
        if self.grid.periodic:
            dx = dx - self.grid.lx * np.round(dx / self.grid.lx)
            dy = dy - self.grid.ly * np.round(dy / self.grid.ly)
        return float(self.mass[dx * dx + dy * dy <= r * r].sum())

    def ball_mass_field(self, r: float) -> NDArray:
        """``ball_mass`` evaluated at every cell centre."""
        return convolve(self.mass, disk_weights(self.grid, r, normalize=False), self.grid.periodic)

    def to_csv(self, path: str | os.PathLike) -> None:
        X, Y = self.grid.centers()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "mass"])
            # zero cells are skipped; from_csv accumulates, so nothing is lost
            nz = self.mass != 0
            for x, y, mval in zip(X[nz], Y[nz], self.mass[nz]):
                w.writerow([f"{x:.17g}", f"{y:.17g}", f"{mval:.17g}"])

    @classmethod
    def from_csv(cls, path: str | os.PathLike, grid: Grid2) -> SignedMeasure2:
        mass = np.zeros(grid.shape)
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            for row in r:
                i, j = grid.cell_of(float(row["x"]), float(row["y"]))
                if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                    raise ValueError(f"CSV point ({row['x']}, {row['y']}) outside grid")
                mass[i, j] += float(row["mass"])
        return cls(grid, mass)


# ---------------------------------------------------------------------------
# stencils and convolutions


def lattice_offsets(grid: Grid2, r: float) -> tuple[NDArray, NDArray]:
    """Integer offsets (di, dj) with |(di hx, dj hy)| <= r."""
    ri = int(np.floor(r / grid.hx + 1e-9))
    rj = int(np.floor(r / grid.hy + 1e-9))
    di, dj = np.meshgrid(np.arange(-ri, ri + 1), np.arange(-rj, rj + 1), indexing="ij")
    keep = (di * grid.hx) ** 2 + (dj * grid.hy) ** 2 <= r * r * (1 + 1e-12)
    return di[keep], dj[keep]


def disk_weights(grid: Grid2, r: float, normalize: bool = True) -> NDArray:
    """Indicator of the lattice disk of radius r as a centred odd-sized stencil."""
    ri = int(np.floor(r / grid.hx + 1e-9))
    rj = int(np.floor(r / grid.hy + 1e-9))
    di, dj = np.meshgrid(np.arange(-ri, ri + 1), np.arange(-rj, rj + 1), indexing="ij")
    k = ((di * grid.hx) ** 2 + (dj * grid.hy) ** 2 <= r * r * (1 + 1e-12)).astype(float)
    return k / k.sum() if normalize else k


def convolve(a: NDArray, kernel: NDArray, periodic: bool) -> NDArray:
    """Discrete convolution of a (nx, ny) array with a centred odd-sized stencil.

    Periodic arrays wrap. Bounded arrays are treated as zero outside the
    grid ("same"-sized output); callers restrict to the interior where
    the result is exact.
    """
    kx, ky = kernel.shape
    cx, cy = kx // 2, ky // 2
    nx, ny = a.shape
    w = fft_workers()
    if periodic:
        if kx > nx or ky > ny:
            raise ValueError("stencil larger than the periodic grid")
        kp = np.zeros((nx, ny))
        kp[:kx, :ky] = kernel
        kp = np.roll(kp, (-cx, -cy), axis=(0, 1))
        out = sfft.irfft2(sfft.rfft2(a, workers=w) * sfft.rfft2(kp, workers=w), s=(nx, ny), workers=w)
        return out
    sx, sy = nx + kx - 1, ny + ky - 1
    fx, fy = sfft.next_fast_len(sx, real=True), sfft.next_fast_len(sy, real=True)
    full = sfft.irfft2(
        sfft.rfft2(a, s=(fx, fy), workers=w) * sfft.rfft2(kernel, s=(fx, fy), workers=w),
        s=(fx, fy), workers=w,
    )
    return full[cx:cx + nx, cy:cy + ny]


def shifted(a: NDArray, di: int, dj: int, periodic: bool) -> tuple[NDArray, tuple[slice, slice]]:
    """Return a(x + h) - style view data.

    Periodic: full-size ``a[(i+di) % nx, (j+dj) % ny]``.
    Bounded: values on the overlap region Omega ∩ (Omega - h) together with
    the slices locating that region in the original index space.
    """
    if periodic:
        return np.roll(a, (-di, -dj), axis=(0, 1)), (slice(None), slice(None))
    nx, ny = a.shape[:2]
    i0, i1 = max(0, -di), nx - max(0, di)
    j0, j1 = max(0, -dj), ny - max(0, dj)
    if i1 <= i0 or j1 <= j0:
        raise ValueError("shift leaves no overlap with the domain")
    return a[i0 + di:i1 + di, j0 + dj:j1 + dj], (slice(i0, i1), slice(j0, j1))


def shift_difference(m: VectorField2, h: Sequence[float]) -> VectorField2:
    """D^h m = m(. + h) - m for a lattice shift h given in physical units.

    Periodic grids wrap; on bounded grids the result lives on the overlap
    sub-grid Omega ∩ (Omega - h).
    """
    di, dj = m.grid.to_cells(h)
    return shift_difference_cells(m, di, dj)


def shift_difference_cells(m: VectorField2, di: int, dj: int) -> VectorField2:
    g = m.grid
    sh, (si, sj) = shifted(m.values, di, dj, g.periodic)
    d = sh - m.values[si, sj]
    if g.periodic:
        return VectorField2(g, d)
    sub = g.subgrid(si.start, si.stop, sj.start, sj.stop)
    return VectorField2(sub, d, margin=m.margin)


def lp_norm(f, p: float, grid: Grid2 | None = None) -> float:
    """(sum_cells |f|^p hx hy)^(1/p); |f| is Euclidean for vector fields."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if isinstance(f, (VectorField2, ScalarField2)):
        grid = f.grid
        arr = f.values
    else:
        arr = np.asarray(f)
        if grid is None:
            raise ValueError("grid required for raw arrays")
    if arr.ndim == 3:
        mag = np.hypot(arr[..., 0], arr[..., 1])
    else:
        mag = np.abs(arr)
    return float((np.sum(mag ** p) * grid.cell_area) ** (1.0 / p))


# ---------------------------------------------------------------------------
# smooth test functions


@dataclass(frozen=True)
class TestFunction:
    """Smooth scalar test function zeta with its gradient."""

    value: Callable[[NDArray, NDArray], NDArray]
    grad: Callable[[NDArray, NDArray], tuple[NDArray, NDArray]]
    c1: float
    name: str = ""

    __test__ = False


def _bump(t: NDArray) -> tuple[NDArray, NDArray]:
    # (1 - t^2)^4 on |t| < 1 and its derivative
    inside = np.abs(t) < 1
    u = np.where(inside, 1 - t * t, 0.0)
    return u ** 4, np.where(inside, -8 * t * u ** 3, 0.0)


def smooth_test_battery(grid: Grid2, n: int, seed: int = 0) -> list[TestFunction]:
    """Seeded battery of smooth test functions adapted to the grid.

    Periodic grids get trigonometric products; bounded grids get products
    of trigonometric factors with a bump compactly supported inside the
    domain, so boundary terms vanish.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        kx, ky = rng.integers(1, 4, size=2)
        px, py = rng.uniform(0, 2 * np.pi, size=2)
        wx, wy = 2 * np.pi * kx / grid.lx, 2 * np.pi * ky / grid.ly
        if grid.periodic:
            def val(X, Y, wx=wx, wy=wy, px=px, py=py):
                return np.sin(wx * X + px) * np.cos(wy * Y + py)

            def grd(X, Y, wx=wx, wy=wy, px=px, py=py):
                return (wx * np.cos(wx * X + px) * np.cos(wy * Y + py),
                        -wy * np.sin(wx * X + px) * np.sin(wy * Y + py))
            c1 = 1.0 + np.hypot(wx, wy)
        else:
            cx = grid.x0 + grid.lx * rng.uniform(0.35, 0.65)
            cy = grid.y0 + grid.ly * rng.uniform(0.35, 0.65)
            ax = 0.3 * grid.lx
            ay = 0.3 * grid.ly

            def val(X, Y, wx=wx, wy=wy, px=px, py=py, cx=cx, cy=cy, ax=ax, ay=ay):
                bx, _ = _bump((X - cx) / ax)
                by, _ = _bump((Y - cy) / ay)
                return bx * by * np.sin(wx * X + px) * np.cos(wy * Y + py)

            def grd(X, Y, wx=wx, wy=wy, px=px, py=py, cx=cx, cy=cy, ax=ax, ay=ay):
                bx, dbx = _bump((X - cx) / ax)
                by, dby = _bump((Y - cy) / ay)
                s = np.sin(wx * X + px) * np.cos(wy * Y + py)
                gx = (dbx / ax) * by * s + bx * by * wx * np.cos(wx * X + px) * np.cos(wy * Y + py)
                gy = bx * (dby / ay) * s - bx * by * wy * np.sin(wx * X + px) * np.sin(wy * Y + py)
                return gx, gy
            c1 = 1.0 + np.hypot(wx, wy) + 8.0 / min(ax, ay)
        out.append(TestFunction(val, grd, float(c1), f"zeta{k}"))
    return out


# ---------------------------------------------------------------------------
# serialization


def _paths(path: str | os.PathLike) -> tuple[str, str]:
    p = os.fspath(path)
    for ext in (".json", ".bin"):
        if p.endswith(ext):
            p = p[: -len(ext)]
    return p + ".json", p + ".bin"


def save_field(path: str | os.PathLike, f) -> tuple[str, str]:
    """Write ``<name>.json`` (header) and ``<name>.bin`` (f64le payload)."""
    jpath, bpath = _paths(path)
    if isinstance(f, VectorField2):
        comps = 2
        data = f.values
    elif isinstance(f, ScalarField2):
        comps = 1
        data = f.values
    elif isinstance(f, SignedMeasure2):
        comps = 1
        data = f.mass
    else:
        raise TypeError(f"cannot serialise {type(f).__name__}")
    header = dict(version=FIELD_FILE_VERSION, **f.grid.header(), components=comps,
                  dtype="f64le", layout="row-major")
    if isinstance(f, VectorField2) and f.excluded is not None:
        header["excluded"] = np.flatnonzero(f.excluded.ravel()).tolist()
    with open(jpath, "w") as fh:
        json.dump(header, fh, indent=1)
    with open(bpath, "wb") as fh:
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    return jpath, bpath


def load_field(path: str | os.PathLike):
    jpath, bpath = _paths(path)
    with open(jpath) as fh:
        header = json.load(fh)
    if header.get("version") != FIELD_FILE_VERSION:
        raise ValueError(f"unknown version {header.get('version')!r}")
    if header.get("dtype") != "f64le":
        raise ValueError(f"unsupported dtype {header.get('dtype')!r}")
    if header.get("layout", "row-major") != "row-major":
        raise ValueError(f"unsupported layout {header.get('layout')!r}")
    comps = header.get("components")
    if comps not in (1, 2):
        raise ValueError(f"unsupported components {comps!r}")
    grid = Grid2(header["nx"], header["ny"], header["x0"], header["x1"], header["y0"],
                 header["y1"], header["boundary"])
    with open(bpath, "rb") as fh:
        raw = fh.read()
    expected = grid.nx * grid.ny * comps * 8
    if len(raw) != expected:
        raise ValueError(f"payload size mismatch: {len(raw)} bytes, expected {expected}")
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if comps == 2:
        excluded = None
        if "excluded" in header:
            excluded = np.zeros(grid.nx * grid.ny, dtype=bool)
            excluded[np.asarray(header["excluded"], dtype=int)] = True
            excluded = excluded.reshape(grid.shape)
        return VectorField2(grid, arr.reshape(grid.nx, grid.ny, 2), excluded)
    return ScalarField2(grid, arr.reshape(grid.shape))
