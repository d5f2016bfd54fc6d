"""Discretized upper half-space: geometric t-levels over a periodic torus.

Cells are products ``I_k x C_i``.  The t-cell ``I_k`` is
``[t_k rho^-1/2, t_k rho^1/2]`` clipped to ``[t_min, t_max]`` so its ``dt/t``
weight is ``log rho`` (half that at the two end levels).  The spatial cell
``C_i`` is the cube of side ``dx`` centred at ``x_i = i * dx``.

Geometric weights (cones, tents, Whitney regions) are exact box/ball overlaps
in dimensions one and two, computed in the periodic metric.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


@dataclass(frozen=True)
class GridSpec:
    n: int
    m: int
    L: float
    Nx: int
    t_min: float
    t_max: float
    K: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.Nx < 2 or self.Nx & (self.Nx - 1):
            raise ValueError("Nx must be a power of two")
        if self.K < 2:
            raise ValueError("at least two t-levels are required")
        if not (0 < self.t_min < self.t_max) or not math.isfinite(self.t_max):
            raise ValueError("need 0 < t_min < t_max < inf")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def channels(self) -> int:
        return self.m * (1 + self.n)

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.n

    @property
    def rho(self) -> float:
        return (self.t_max / self.t_min) ** (1.0 / (self.K - 1))

    @property
    def log_rho(self) -> float:
        return math.log(self.t_max / self.t_min) / (self.K - 1)

    @functools.cached_property
    def t(self) -> np.ndarray:
        t = self.t_min * np.exp(self.log_rho * np.arange(self.K))
        t[-1] = self.t_max
        t.flags.writeable = False
        return t

    @functools.cached_property
    def mu(self) -> np.ndarray:
        """dt/t weight of each level (trapezoid-corrected ends)."""
        mu = np.full(self.K, self.log_rho)
        mu[0] = mu[-1] = self.log_rho / 2
        mu.flags.writeable = False
        return mu

    @functools.cached_property
    def t_edges(self) -> np.ndarray:
        """(K, 2) array of t-cell endpoints."""
        half = math.exp(self.log_rho / 2)
        lo = np.maximum(self.t / half, self.t_min)
        hi = np.minimum(self.t * half, self.t_max)
        lo[0] = self.t_min
        hi[-1] = self.t_max
        edges = np.stack([lo, hi], axis=1)
        edges.flags.writeable = False
        return edges

    @property
    def spatial_shape(self) -> tuple:
        return (self.Nx,) * self.n

    def field_shape(self, channels: int | None = None) -> tuple:
        ch = self.channels if channels is None else channels
        return (self.K,) + self.spatial_shape + (ch,)

    def coords(self) -> tuple:
        """Cell-centre coordinate arrays, broadcastable to the spatial shape."""
        x = np.arange(self.Nx) * self.dx
        out = []
        for axis in range(self.n):
            shape = [1] * self.n
            shape[axis] = self.Nx
            out.append(x.reshape(shape))
        return tuple(out)

    @functools.cached_property
    def xi(self) -> np.ndarray:
        """Frequency lattice, shape spatial_shape + (n,)."""
        k = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx) * (2 * math.pi / self.L)
        mesh = np.meshgrid(*([k] * self.n), indexing="ij")
        xi = np.stack(mesh, axis=-1)
        xi.flags.writeable = False
        return xi

    def level_index(self, t: float) -> int:
        """Index of the level nearest to ``t`` in log scale."""
        if not (self.t_min * (1 - 1e-12) <= t <= self.t_max * (1 + 1e-12)):
            raise ValueError(f"t={t} outside the grid range [{self.t_min}, {self.t_max}]")
        return int(round(math.log(t / self.t_min) / self.log_rho))

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "L": self.L, "Nx": self.Nx,
                "t_min": self.t_min, "t_max": self.t_max, "K": self.K}


def make_grid(**kwargs) -> GridSpec:
    return GridSpec(**kwargs)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on the grid, shape ``(K, Nx, ..., Nx, channels)``."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        if vals.ndim == self.spec.n + 1:
            vals = vals[..., None]
        if vals.shape[:-1] != (self.spec.K,) + self.spec.spatial_shape:
            raise ValueError(f"values of shape {vals.shape} do not fit the grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def sq(self) -> np.ndarray:
        """Pointwise |f|^2 summed over channels, shape (K,) + spatial."""
        v = self.values
        return (v.real ** 2 + v.imag ** 2).sum(axis=-1)

    def with_values(self, values) -> "Field":
        return Field(self.spec, values)

    def scale_t(self, power: float) -> "Field":
        """Multiply by ``t ** power`` levelwise."""
        w = self.spec.t ** power
        return Field(self.spec, self.values * w.reshape((-1,) + (1,) * (self.spec.n + 1)))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.spec, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.spec, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.spec, self.values * c)

    __rmul__ = __mul__


def _same_grid(f: Field, g: Field):
    if f.spec != g.spec:
        raise ValueError("fields live on different grids")


def level_shape(spec: GridSpec) -> tuple:
    return (spec.K,) + (1,) * spec.n


def sample(spec: GridSpec, fn, channels: int | None = None) -> Field:
    """Evaluate ``fn(t, *x)`` at every cell centre.

    ``t`` has shape ``(K, 1, ..., 1)`` and each coordinate broadcasts along
    its axis.  The result may omit the channel axis for scalar fields.
    """
    t = spec.t.reshape(level_shape(spec))
    x = tuple(c[None] for c in spec.coords())
    vals = np.asarray(fn(t, *x), dtype=np.complex128)
    base = (spec.K,) + spec.spatial_shape
    if vals.shape == base or vals.ndim <= spec.n + 1:
        vals = np.broadcast_to(vals, base)[..., None]
    else:
        ch = vals.shape[-1] if channels is None else channels
        vals = np.broadcast_to(vals, base + (ch,))
    return Field(spec, vals)


def zeros(spec: GridSpec, channels: int | None = None) -> Field:
    return Field(spec, np.zeros(spec.field_shape(channels), dtype=np.complex128))


def random_field(spec: GridSpec, seed: int, gamma_: float = 0.0,
                 channels: int | None = None) -> Field:
    """Complex Gaussian per cell, scaled by ``t ** gamma_``."""
    rng = np.random.default_rng(seed)
    shape = spec.field_shape(channels)
    vals = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    vals *= (spec.t ** gamma_).reshape(level_shape(spec) + (1,))
    return Field(spec, vals)


# ---------------------------------------------------------------------------
# exact box / ball overlaps


def _overlap_1d(lo, hi, R):
    return np.clip(np.minimum(hi, R) - np.maximum(lo, -R), 0.0, None)


def _corner_area(a, b, R):
    """Area of {0<=u<=a, 0<=v<=b, u^2+v^2<=R^2} for a, b >= 0."""
    a = np.minimum(a, R)
    b = np.minimum(b, R)
    ustar = np.sqrt(np.maximum(R * R - b * b, 0.0))
    mid = np.minimum(a, ustar)

    def prim(u):
        ratio = np.clip(u / R, -1.0, 1.0)
        return 0.5 * (u * np.sqrt(np.maximum(R * R - u * u, 0.0)) + R * R * np.arcsin(ratio))

    return b * mid + prim(a) - prim(mid)


def _signed_corner(x, y, R):
    return np.sign(x) * np.sign(y) * _corner_area(np.abs(x), np.abs(y), R)


def box_ball_overlap(lo, hi, R: float, seed: int = 0, samples: int = 4096) -> np.ndarray:
    """Measure of ``prod [lo_d, hi_d] ∩ B(0, R)``.

    ``lo`` and ``hi`` have shape (..., n).  Exact for n <= 2; for larger n
    cells cut by the sphere are estimated by seeded Monte Carlo.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[-1]
    if R <= 0:
        return np.zeros(lo.shape[:-1])
    if n == 1:
        return _overlap_1d(lo[..., 0], hi[..., 0], R)
    if n == 2:
        x0, y0, x1, y1 = lo[..., 0], lo[..., 1], hi[..., 0], hi[..., 1]
        area = (_signed_corner(x1, y1, R) - _signed_corner(x0, y1, R)
                - _signed_corner(x1, y0, R) + _signed_corner(x0, y0, R))
        return np.clip(area, 0.0, None)
    vol = np.prod(hi - lo, axis=-1)
    near = np.sqrt((np.maximum(0, np.maximum(lo, -hi)) ** 2).sum(-1))
    far = np.sqrt((np.maximum(np.abs(lo), np.abs(hi)) ** 2).sum(-1))
    out = np.where(far <= R, vol, 0.0)
    cut = (near < R) & (far > R)
    if np.any(cut):
        rng = np.random.default_rng(seed)
        u = rng.random((samples, n))
        lo_c, hi_c = lo[cut], hi[cut]
        pts = lo_c[:, None, :] + u[None] * (hi_c - lo_c)[:, None, :]
        frac = ((pts ** 2).sum(-1) <= R * R).mean(axis=1)
        out[cut] = frac * vol[cut]
    return out


def _min_image(d, L):
    return (d + L / 2) % L - L / 2


def ball_overlap(spec: GridSpec, R: float, center=None) -> np.ndarray:
    """``|C_i ∩ B(center, R)|`` on the torus for every spatial cell ``i``.

    Periodic images are summed, so the result totals the ball volume exactly
    whenever ``R < L/2``.
    """
    if center is None:
        center = (0.0,) * spec.n
    key = (spec.n, spec.L, spec.Nx, float(R), tuple(float(c) for c in center))
    return _ball_overlap_cached(key)


@functools.lru_cache(maxsize=4096)
def _ball_overlap_cached(key) -> np.ndarray:
    n, L, Nx, R, center = key
    dx = L / Nx
    x = np.arange(Nx) * dx
    axes = []
    for d in range(n):
        axes.append(_min_image(x - center[d], L))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    total = np.zeros((Nx,) * n)
    for shift in itertools.product((-L, 0.0, L), repeat=n):
        c = mesh + np.asarray(shift)
        total += box_ball_overlap(c - dx / 2, c + dx / 2, R)
    total.flags.writeable = False
    return total


def _check_radius(spec: GridSpec, R: float):
    if R >= spec.L / 2:
        raise ValueError("aperture exceeds torus injectivity radius")


def cone_weights(spec: GridSpec, x=None, beta: float = 1.0) -> np.ndarray:
    """Fraction of each cell's cross-section inside the cone of aperture ``beta``.

    Returns shape ``(K,) + spatial``: entry ``[k, j]`` is
    ``|C_j ∩ B(x, beta t_k)| / dx^n``.
    """
    if beta <= 0:
        raise ValueError("aperture must be positive")
    _check_radius(spec, beta * spec.t_max)
    x = (0.0,) * spec.n if x is None else tuple(x)
    return np.stack([ball_overlap(spec, beta * t, x) for t in spec.t]) / spec.cell_volume


def tent_cells(spec: GridSpec, center, r: float) -> np.ndarray:
    """Per-cell weights for the tent over ``B(center, r)``.

    Entry ``[k, j]`` is ``|C_j ∩ B(center, r - t_k)| / dx^n`` (zero once
    ``t_k >= r``).
    """
    _check_radius(spec, r)
    out = np.zeros((spec.K,) + spec.spatial_shape)
    for k, t in enumerate(spec.t):
        if t < r:
            out[k] = ball_overlap(spec, r - t, center)
    return out / spec.cell_volume


def tent_mask(spec: GridSpec, center, r: float) -> np.ndarray:
    """Cells whose centre lies in the tent: ``|y - c| + t <= r``."""
    dist = torus_distance(spec, center)
    return dist[None] + spec.t.reshape(level_shape(spec)) <= r


def torus_distance(spec: GridSpec, center) -> np.ndarray:
    sq = np.zeros(spec.spatial_shape)
    for d, c in enumerate(spec.coords()):
        sq = sq + _min_image(c - center[d], spec.L) ** 2
    return np.sqrt(sq)


@dataclass(frozen=True)
class WhitneyParameter:
    c0: float = 1.0
    c1: float = 2.0

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if self.c1 <= 1.5:
            raise ValueError("Whitney parameter needs c1 > 3/2")


def whitney_cells(spec: GridSpec, t: float, x, c: WhitneyParameter) -> np.ndarray:
    """Volume (dt dy) of each cell inside ``(t/c1, c1 t) x B(x, c0 t)``."""
    if not isinstance(c, WhitneyParameter):
        c = WhitneyParameter(*c)
    _check_radius(spec, c.c0 * t)
    lo, hi = spec.t_edges[:, 0], spec.t_edges[:, 1]
    tlen = np.clip(np.minimum(hi, c.c1 * t) - np.maximum(lo, t / c.c1), 0.0, None)
    space = ball_overlap(spec, c.c0 * t, tuple(x))
    return tlen.reshape(level_shape(spec)) * space[None]


def whitney_volume(t: float, n: int, c: WhitneyParameter) -> float:
    return (c.c1 - 1 / c.c1) * t * ball_volume(n) * (c.c0 * t) ** n


# ---------------------------------------------------------------------------
# Whitney grids


@dataclass(frozen=True)
class Cube:
    index: int
    q: int                 # side is dx * 2**q
    side: float
    block: tuple           # block multi-index at this scale
    t_range: tuple
    center: tuple

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t_range[0] + self.t_range[1])


class WhitneyGrid:
    """The Whitney cubes ``(2^k l, 2^(k+1) l) x Q`` over dyadic cubes ``Q``.

    Dyadic cubes are aligned to the torus cells, with sides ``dx * 2**q`` for
    ``0 <= q <= log2 Nx``.  A grid cell belongs to the cube containing its
    centre, so covered cells are partitioned exactly.
    """

    def __init__(self, spec: GridSpec, k: int):
        self.spec = spec
        self.k = k
        qmax = int(round(math.log2(spec.Nx)))
        base = 2.0 ** k * spec.dx
        with np.errstate(divide="ignore"):
            qf = np.floor(np.log2(spec.t / base) + 1e-12)
        level_q = np.where((qf >= 0) & (qf <= qmax), qf, -1).astype(int)
        self.level_q = level_q
        cubes = []
        offsets = {}
        labels = np.full((spec.K,) + spec.spatial_shape, -1, dtype=np.int64)
        idx = np.indices(spec.spatial_shape)
        for q in sorted(set(level_q[level_q >= 0].tolist())):
            nb = spec.Nx >> q
            side = spec.dx * 2 ** q
            offsets[q] = len(cubes)
            block = tuple(i >> q for i in idx)
            flat = np.ravel_multi_index(block, (nb,) * spec.n)
            labels[level_q == q] = offsets[q] + flat
            t_range = (2.0 ** k * side, 2.0 ** (k + 1) * side)
            for b in itertools.product(range(nb), repeat=spec.n):
                center = tuple(bi * side - spec.dx / 2 + side / 2 for bi in b)
                cubes.append(Cube(len(cubes), q, side, b, t_range, center))
        self.cubes = cubes
        self.labels = labels
        self._offsets = offsets

    @property
    def covered(self) -> np.ndarray:
        return self.labels >= 0

    def cell_counts(self) -> np.ndarray:
        lab = self.labels[self.covered]
        return np.bincount(lab, minlength=len(self.cubes))

    def cube_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum a per-cell array over each cube."""
        mask = self.covered
        return np.bincount(self.labels[mask], weights=values[mask], minlength=len(self.cubes))

    def cube_mask(self, index: int) -> np.ndarray:
        return self.labels == index

    def neighbors(self, index: int, c: WhitneyParameter) -> list:
        """Cubes meeting some Whitney region centred in cube ``index``."""
        Q = self.cubes[index]
        lo_t = Q.t_range[0] / c.c1
        hi_t = Q.t_range[1] * c.c1
        reach = c.c0 * Q.t_range[1]
        L = self.spec.L
        out = []
        for R in self.cubes:
            if R.t_range[1] <= lo_t or R.t_range[0] >= hi_t:
                continue
            gap = 0.0
            for d in range(self.spec.n):
                sep = abs(_min_image(R.center[d] - Q.center[d], L))
                g = max(0.0, sep - (R.side + Q.side) / 2)
                gap += g * g
            if math.sqrt(gap) < reach:
                out.append(R.index)
        return out


def whitney_grid(spec: GridSpec, k: int) -> WhitneyGrid:
    return WhitneyGrid(spec, k)
