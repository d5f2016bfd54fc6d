"""Tent, Z, slice and weighted L^2 quasinorms on the discretized half-space.

All norms are built from per-level FFT convolutions with exact ball-overlap
kernels, so the ``p = 2`` Fubini identities hold to rounding error:
``tent_norm(f, (2, s)) == sqrt(omega_n) * l2s_norm(f, s)`` and
``z_norm(f, (2, s)) == l2s_norm(f, s)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .exponents import INF, Exponent
from .halfspace import (Field, GridSpec, WhitneyGrid, WhitneyParameter, ball_overlap,
                        ball_volume, level_shape, torus_distance)


@dataclass(frozen=True)
class NormReport:
    value: float
    truncation_estimate: float
    method: str
    op: str = ""
    exponent: tuple = ()

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise OverflowError(f"{self.op or 'norm'} is not finite (degenerate weights)")

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        j, theta = self.exponent if self.exponent else (None, None)
        return {"op": self.op, "exponent": {"j": _jsonnum(j), "theta": _jsonnum(theta)},
                "value": self.value, "truncation_estimate": self.truncation_estimate,
                "method": self.method}


def _jsonnum(x):
    return None if x is None else float(x)


def _coords(p: Exponent) -> tuple:
    return (p.j, p.theta)


# ---------------------------------------------------------------------------
# shared helpers


def _weighted_sq(f: Field, power: float) -> np.ndarray:
    """``|t^-power f|^2`` summed over channels."""
    w = f.spec.t ** (-2.0 * float(power))
    return f.sq() * w.reshape(level_shape(f.spec))


@functools.lru_cache(maxsize=4096)
def _kernel_fft_cached(n, L, Nx, R):
    ker = _ball_overlap_origin(n, L, Nx, R)
    return np.fft.rfftn(ker)


def _ball_overlap_origin(n, L, Nx, R):
    spec_like = _SpatialSpec(n, L, Nx)
    return ball_overlap(spec_like, R)


@dataclass(frozen=True)
class _SpatialSpec:
    n: int
    L: float
    Nx: int


def kernel_fft(spec: GridSpec, R: float) -> np.ndarray:
    return _kernel_fft_cached(spec.n, spec.L, spec.Nx, float(R))


def ball_sum(spec: GridSpec, values: np.ndarray, R: float) -> np.ndarray:
    """``sum_j |C_j ∩ B(x_i, R)| values_j`` for every centre ``x_i``.

    Real input is treated as nonnegative mass and clipped at zero; complex
    input is convolved as is.
    """
    if R <= 0:
        return np.zeros_like(values)
    shape = spec.spatial_shape
    axes = tuple(range(spec.n))
    if np.iscomplexobj(values):
        kh = kernel_fft(spec, R)
        return (np.fft.irfftn(np.fft.rfftn(values.real) * kh, s=shape, axes=axes)
                + 1j * np.fft.irfftn(np.fft.rfftn(values.imag) * kh, s=shape, axes=axes))
    out = np.fft.irfftn(np.fft.rfftn(values) * kernel_fft(spec, R), s=shape, axes=axes)
    return np.maximum(out, 0.0)


def _level_hats(spec: GridSpec, sq: np.ndarray) -> np.ndarray:
    """Real FFT of every t-level of a ``(K,) + spatial`` array."""
    return np.fft.rfftn(sq, axes=tuple(range(1, spec.n + 1)))


def _end_share(spec: GridSpec, sq: np.ndarray) -> float:
    """Fraction of the weighted L^2 mass sitting on the two end levels."""
    per_level = spec.mu * sq.reshape(spec.K, -1).sum(axis=1)
    total = per_level.sum()
    if total <= 0:
        return 0.0
    return float((per_level[0] + per_level[-1]) / total)


def _lp(values: np.ndarray, p, weight: float) -> float:
    """``(sum weight * values^p)^(1/p)``, or the max for infinite ``p``."""
    if values.size == 0:
        return 0.0
    if p == INF:
        return float(values.max())
    p = float(p)
    vmax = values.max()
    if vmax == 0:
        return 0.0
    scaled = (values / vmax) ** p
    return float(vmax * (weight * scaled.sum()) ** (1.0 / p))


def _check_radius(spec: GridSpec, R: float):
    if R >= spec.L / 2:
        raise ValueError("aperture exceeds torus injectivity radius")


# ---------------------------------------------------------------------------
# weighted L^2 and pairing


def l2s_norm(f: Field, s=0.0) -> NormReport:
    """``(sum_k mu_k sum_i |t^-s f|^2 dx^n)^(1/2)``, the L^2(dy dt/t) norm of ``t^-s f``."""
    spec = f.spec
    sq = _weighted_sq(f, s)
    total = float((spec.mu * sq.reshape(spec.K, -1).sum(axis=1)).sum() * spec.cell_volume)
    value = math.sqrt(total)
    return NormReport(value, value * _end_share(spec, sq), "continuous", "l2s",
                      (0.5, float(s)))


def pairing(f: Field, g: Field) -> complex:
    """``sum over cells of (f, g) dy dt/t`` with ``(f, g) = sum f conj(g)``."""
    if f.spec != g.spec:
        raise ValueError("fields live on different grids")
    spec = f.spec
    dots = (f.values * g.values.conj()).sum(axis=-1)
    return complex((spec.mu * dots.reshape(spec.K, -1).sum(axis=1)).sum() * spec.cell_volume)


def abs_pairing(f: Field, g: Field) -> float:
    if f.spec != g.spec:
        raise ValueError("fields live on different grids")
    spec = f.spec
    dots = np.abs((f.values * g.values.conj()).sum(axis=-1))
    return float((spec.mu * dots.reshape(spec.K, -1).sum(axis=1)).sum() * spec.cell_volume)


# ---------------------------------------------------------------------------
# tent spaces


def lusin_area(f: Field, theta=0.0, beta: float = 1.0) -> np.ndarray:
    """Square function ``A_beta(t^-theta f)`` at every grid point."""
    spec = f.spec
    if beta <= 0:
        raise ValueError("aperture must be positive")
    _check_radius(spec, beta * spec.t_max)
    sq = _weighted_sq(f, theta)
    # the sum over levels is linear, so accumulate in frequency space
    hats = _level_hats(spec, sq)
    acc = np.zeros(hats.shape[1:], dtype=np.complex128)
    for k in range(spec.K):
        acc += (spec.mu[k] / spec.t[k] ** spec.n) * hats[k] * kernel_fft(spec, beta * spec.t[k])
    out = np.fft.irfftn(acc, s=spec.spatial_shape, axes=tuple(range(spec.n)))
    return np.sqrt(np.maximum(out, 0.0))


def _tent_box_sums(spec: GridSpec, sq: np.ndarray, r: float) -> np.ndarray:
    """``int int_{T(B(x, r))} |g|^2 dy dt/t`` for every centre ``x``."""
    acc = np.zeros(spec.spatial_shape)
    for k in range(spec.K):
        if spec.t[k] >= r or not sq[k].any():
            continue
        acc += spec.mu[k] * ball_sum(spec, sq[k], r - spec.t[k])
    return acc


def _tent_radii(spec: GridSpec) -> np.ndarray:
    return spec.t[spec.t < spec.L / 2]


def carleson_functional(f: Field, theta=0.0, alpha=0.0) -> np.ndarray:
    """``sup_{B ∋ x} r_B^-alpha (|B|^-1 int_{T(B)} |t^-theta f|^2 dy dt/t)^(1/2)``.

    Balls range over grid centres with radii equal to t-levels.
    """
    spec = f.spec
    sq = _weighted_sq(f, theta)
    out = np.zeros(spec.spatial_shape)
    vol = ball_volume(spec.n)
    for r in _tent_radii(spec):
        avg = _tent_box_sums(spec, sq, r) / (vol * r ** spec.n)
        val = r ** (-float(alpha)) * np.sqrt(avg)
        out = np.maximum(out, _ball_max(spec, val, r))
    return out


def _ball_max(spec: GridSpec, values: np.ndarray, r: float) -> np.ndarray:
    """Max of ``values`` over grid points within distance ``r`` (periodic)."""
    rad = int(math.floor(r / spec.dx))
    if rad == 0:
        return values
    ax = np.arange(-rad, rad + 1) * spec.dx
    mesh = np.meshgrid(*([ax] * spec.n), indexing="ij")
    foot = sum(m ** 2 for m in mesh) < r * r
    return ndimage.maximum_filter(values, footprint=foot, mode="wrap")


def tent_norm(f: Field, p: Exponent, beta: float = 1.0) -> NormReport:
    """Tent-space quasinorm.

    Finite ``p`` measures the Lusin area function of ``t^-theta f`` in
    ``L^i``; infinite ``p`` takes the Carleson supremum over grid-centred
    balls with radii on the t-grid.
    """
    spec = f.spec
    sq = _weighted_sq(f, p.theta)
    if p.is_finite:
        value = _lp(lusin_area(f, p.theta, beta), p.p, spec.cell_volume)
        method = "continuous"
    else:
        alpha = float(p.alpha)
        value = 0.0
        for r in _tent_radii(spec):
            box = _tent_box_sums(spec, sq, r)
            value = max(value, r ** -alpha * math.sqrt(box.max() / r ** spec.n))
        method = "continuous-sup"
    return NormReport(value, value * _end_share(spec, sq), method, "tent", _coords(p))


def tent_norm_carleson(f: Field, p: Exponent) -> NormReport:
    """``L^i`` norm of the Carleson functional, an equivalent norm when ``i > 2``."""
    if not p.is_finite:
        raise ValueError("the Carleson-functional norm needs a finite exponent")
    spec = f.spec
    C = carleson_functional(f, p.theta, 0.0)
    value = _lp(C, p.p, spec.cell_volume)
    return NormReport(value, value * _end_share(spec, _weighted_sq(f, p.theta)),
                      "carleson", "tent", _coords(p))


# ---------------------------------------------------------------------------
# Z spaces


def _vertex_levels(spec: GridSpec, c: WhitneyParameter) -> np.ndarray:
    ext = int(math.ceil(math.log(c.c1) / spec.log_rho + 0.5))
    a = np.arange(-ext, spec.K + ext)
    return spec.t_min * np.exp(spec.log_rho * a)


def _whitney_time_weights(spec: GridSpec, c: WhitneyParameter, tv: np.ndarray) -> np.ndarray:
    """``T[a, k] = int_{I_a ∩ (t_k/c1, c1 t_k)} dt / ((c1 - 1/c1) t^2)``.

    ``I_a`` is the vertex cell ``[t_a rho^-1/2, t_a rho^1/2]``.  Summed over
    ``a`` this is exactly ``1 / t_k``.
    """
    half = math.exp(spec.log_rho / 2)
    lo = np.maximum((tv / half)[:, None], (spec.t / c.c1)[None])
    hi = np.minimum((tv * half)[:, None], (spec.t * c.c1)[None])
    T = np.where(hi > lo, 1.0 / lo - 1.0 / hi, 0.0)
    return T / (c.c1 - 1.0 / c.c1)


def whitney_average_sq(f: Field, power, c: WhitneyParameter) -> tuple:
    """Squared Whitney averages of ``t^-power f`` on the vertex grid.

    Returns ``(t_vertex, W2)`` with ``W2`` of shape ``(A,) + spatial``.  The
    averages are normalized so that ``sum_a log(rho) sum_i dx^n W2`` equals
    the squared weighted L^2 norm exactly.
    """
    spec = f.spec
    if not isinstance(c, WhitneyParameter):
        c = WhitneyParameter(*c)
    tv = _vertex_levels(spec, c)
    _check_radius(spec, c.c0 * tv[-1])
    sq = _weighted_sq(f, power)
    T = _whitney_time_weights(spec, c, tv)
    coef = T * (spec.t * spec.mu)[None] / spec.log_rho
    vol = np.array([ball_overlap(spec, c.c0 * t).sum() for t in tv])
    slabs = np.tensordot(coef, _level_hats(spec, sq), axes=1)
    for a in range(len(tv)):
        slabs[a] *= kernel_fft(spec, c.c0 * tv[a]) / vol[a]
    out = np.fft.irfftn(slabs, s=spec.spatial_shape, axes=tuple(range(1, spec.n + 1)))
    return tv, np.maximum(out, 0.0)


def z_norm(f: Field, p: Exponent, c=WhitneyParameter()) -> NormReport:
    """Z-space quasinorm: ``L^i(dx dt/t)`` norm of Whitney averages of ``t^-r f``."""
    spec = f.spec
    _, W2 = whitney_average_sq(f, p.r, c)
    W = np.sqrt(W2)
    if p.is_finite:
        value = _lp(W, p.p, spec.log_rho * spec.cell_volume)
        method = "continuous"
    else:
        value = float(W.max())
        method = "continuous-sup"
    return NormReport(value, value * _end_share(spec, _weighted_sq(f, p.r)), method, "z",
                      _coords(p))


def _cube_l2(grid: WhitneyGrid, f: Field) -> np.ndarray:
    """``||f||_{L^2(Q, dt dy / t^(1+n))}`` for every cube."""
    spec = grid.spec
    w = (spec.mu / spec.t ** spec.n).reshape(level_shape(spec)) * spec.cell_volume
    return np.sqrt(grid.cube_sums(f.sq() * w))


def _cube_sides(grid: WhitneyGrid) -> np.ndarray:
    return np.array([Q.side for Q in grid.cubes])


def z_norm_dyadic(f: Field, p: Exponent, k: int, grid: WhitneyGrid | None = None) -> NormReport:
    """``l^p(l(Q)^n)`` norm of ``l(Q)^-s ||f||_{L^2(Q)}`` over Whitney cubes."""
    if not p.is_finite:
        raise ValueError("the dyadic characterisation needs a finite exponent")
    grid = WhitneyGrid(f.spec, k) if grid is None else grid
    side = _cube_sides(grid)
    vals = side ** (-float(p.theta)) * _cube_l2(grid, f)
    P = float(p.p)
    value = float((side ** f.spec.n * vals ** P).sum() ** (1 / P)) if vals.any() else 0.0
    uncovered = f.sq()[~grid.covered].sum() / max(f.sq().sum(), 1e-300)
    return NormReport(value, value * math.sqrt(uncovered), "dyadic", "z_dyadic", _coords(p))


# ---------------------------------------------------------------------------
# mixed Z^{p,q}_s (dyadic) and the constructive factorization


def _cube_means(grid: WhitneyGrid, values: np.ndarray, q) -> np.ndarray:
    """``[|v|^q]^(1/q)`` per cube: measure-weighted mean, or max for infinite q."""
    spec = grid.spec
    a = np.abs(values)
    if q == INF:
        out = np.zeros(len(grid.cubes))
        mask = grid.covered
        np.maximum.at(out, grid.labels[mask], a[mask])
        return out
    q = float(q)
    w = np.broadcast_to((spec.mu / spec.t ** spec.n).reshape(level_shape(spec)), a.shape)
    num = grid.cube_sums(a ** q * w)
    den = grid.cube_sums(np.ascontiguousarray(w))
    return (num / den) ** (1.0 / q)


def z_mixed_dyadic(values: np.ndarray, grid: WhitneyGrid, p, q, s) -> float:
    """``|| l(Q)^-s [|v|^q]_Q^(1/q) ||_{l^p(l(Q)^n)}`` for a scalar cell array."""
    side = _cube_sides(grid)
    vals = side ** (-float(s)) * _cube_means(grid, values, q)
    if p == INF:
        return float(vals.max())
    p = float(p)
    return float((side ** grid.spec.n * vals ** p).sum() ** (1 / p))


def _inv(x) -> float:
    return 0.0 if x == INF else 1.0 / float(x)


def _per_cell(grid: WhitneyGrid, per_cube: np.ndarray, fill: float = 0.0) -> np.ndarray:
    out = np.full(grid.labels.shape, fill, dtype=per_cube.dtype)
    mask = grid.covered
    out[mask] = per_cube[grid.labels[mask]]
    return out


def _split_sup(grid: WhitneyGrid, h: np.ndarray, q, s0) -> tuple:
    """``h = F G`` with ``F`` in ``Z^{inf,q}_{s0}`` of norm one and ``G`` constant per cube."""
    side = _per_cell(grid, _cube_sides(grid), fill=1.0)
    mean = _per_cell(grid, _cube_means(grid, h, q))
    zero = mean == 0
    safe = np.where(zero, 1.0, mean)
    F = np.where(zero, side ** s0, side ** s0 * h / safe)
    G = np.where(zero, 0.0, side ** (-s0) * mean)
    return F, G


def _split_power(grid: WhitneyGrid, f: np.ndarray, a: float, s: float, s0: float) -> tuple:
    """Single-exponent factorization ``f = F G`` with ``F ~ |f|^a``, ``G ~ |f|^(1-a)``."""
    side = _per_cell(grid, _cube_sides(grid), fill=1.0)
    mag = np.abs(f)
    phase = np.where(mag > 0, f / np.where(mag > 0, mag, 1.0), 1.0)
    F = side ** (-s * a + s0) * mag ** a
    G = side ** (s * a - s0) * mag ** (1 - a) * phase
    return F, G


def _ratio(p, p0) -> float:
    if p == INF and p0 == INF:
        return 0.5
    return _inv(p0) / _inv(p) if _inv(p) else 0.0


def z_factorize(h: Field, k: int, exponent: tuple, first: tuple, second: tuple) -> tuple:
    """Factor ``h = F G`` with ``F`` in ``Z^first`` and ``G`` in ``Z^second``.

    Each exponent is a triple ``(p, q, s)``.  The split
    ``(inf, q, s0) (p, inf, s1)`` is the direct construction, for which
    ``||F|| = 1`` and ``||G|| = ||h||`` exactly; other splits are chained
    through it and the single-exponent factorization.
    """
    p, q, s = exponent
    (p0, q0, s0), (p1, q1, s1) = first, second
    if (abs(_inv(p) - _inv(p0) - _inv(p1)) > 1e-12 or abs(_inv(q) - _inv(q0) - _inv(q1)) > 1e-12
            or abs(float(s) - float(s0) - float(s1)) > 1e-12):
        raise ValueError("exponents do not split: need 1/p = 1/p0 + 1/p1, 1/q = 1/q0 + 1/q1, s = s0 + s1")
    if h.channels != 1:
        raise ValueError("factorization acts on scalar fields")
    grid = WhitneyGrid(h.spec, k)
    vals = h.values[..., 0]
    if p0 == INF and q1 == INF and q0 == q and p1 == p:
        F, G = _split_sup(grid, vals, q, float(s0))
    else:
        # h = A B with A in Z^{inf,q}_{s/2}, B in Z^{p,inf}_{s/2}; then split each
        A, B = _split_sup(grid, vals, q, float(s) / 2)
        A0, A1 = _split_power(grid, A, _ratio(q, q0), float(s) / 2, float(s0) / 2)
        B0, B1 = _split_power(grid, B, _ratio(p, p0), float(s) / 2, float(s0) / 2)
        F, G = A0 * B0, A1 * B1
    mask = grid.covered
    F = np.where(mask, F, 1.0)
    G = np.where(mask, G, vals)
    return Field(h.spec, F), Field(h.spec, G)


# ---------------------------------------------------------------------------
# slice spaces


def slice_norm(g: np.ndarray, spec: GridSpec, p: Exponent, t: float) -> NormReport:
    """``t^-r || x -> ||g||_{L^2(B(x,t), dy/t^n)} ||_{L^i}`` for a boundary field ``g``."""
    if not (spec.t_min * (1 - 1e-12) <= t <= spec.t_max * (1 + 1e-12)):
        raise ValueError(f"t={t} outside the grid range")
    _check_radius(spec, t)
    sq = _boundary_sq(g, spec)
    local = np.sqrt(ball_sum(spec, sq, t) / t ** spec.n)
    value = t ** (-float(p.r)) * _lp(local, p.p, spec.cell_volume)
    return NormReport(value, 0.0, "continuous", "slice", _coords(p))


def slice_norm_dyadic(g: np.ndarray, spec: GridSpec, p: Exponent, t: float) -> NormReport:
    """Slice norm from ``L^2`` masses of dyadic cubes of side near ``t``."""
    q = int(np.clip(round(math.log2(t / spec.dx)), 0, math.log2(spec.Nx)))
    side = spec.dx * 2 ** q
    sq = _boundary_sq(g, spec) * spec.cell_volume
    nb = spec.Nx >> q
    blocks = sq.reshape(sum(((nb, 2 ** q) for _ in range(spec.n)), ())).sum(
        axis=tuple(range(1, 2 * spec.n, 2)))
    local = np.sqrt(blocks / t ** spec.n)
    value = t ** (-float(p.r)) * _lp(local.ravel(), p.p, side ** spec.n)
    return NormReport(value, 0.0, "dyadic", "slice", _coords(p))


def _boundary_sq(g: np.ndarray, spec: GridSpec) -> np.ndarray:
    g = np.asarray(g)
    if g.shape == spec.spatial_shape:
        return np.abs(g) ** 2
    if g.shape[:-1] != spec.spatial_shape:
        raise ValueError("boundary field does not fit the grid")
    return (np.abs(g) ** 2).sum(axis=-1)


def _slice_levels(spec: GridSpec, t: float, h: float) -> np.ndarray:
    if h <= 1.5:
        raise ValueError("slice operators need h > 3/2")
    if not (spec.t_min * (1 - 1e-12) <= t and h * t <= spec.t_max * (1 + 1e-12)):
        raise ValueError("slice [t, h t] leaves the grid range")
    sel = (spec.t >= t * (1 - 1e-12)) & (spec.t <= h * t * (1 + 1e-12))
    if not sel.any():
        raise ValueError("no t-level falls in [t, h t]")
    return sel


def slice_embed(g: np.ndarray, spec: GridSpec, t: float, h: float = 2.0) -> Field:
    """Place ``g`` on every level in ``[t, h t]``, zero elsewhere."""
    sel = _slice_levels(spec, t, h)
    g = np.asarray(g, dtype=np.complex128)
    if g.shape == spec.spatial_shape:
        g = g[..., None]
    vals = np.zeros((spec.K,) + g.shape, dtype=np.complex128)
    vals[sel] = g
    return Field(spec, vals)


def slice_project(F: Field, t: float, h: float = 2.0) -> np.ndarray:
    """``dt/t``-weighted mean of ``F`` over the levels in ``[t, h t]``.

    Normalizing by the weight total makes this an exact left inverse of
    :func:`slice_embed`.
    """
    spec = F.spec
    sel = _slice_levels(spec, t, h)
    w = spec.mu[sel]
    return np.tensordot(w / w.sum(), F.values[sel], axes=1)


# ---------------------------------------------------------------------------
# shifts and maximal functions


def downward_shift(f: Field, r: float) -> Field:
    """``(S_r f)(t, y) = f(t + r, y)``, linear in ``log t`` between levels, zero above t_max."""
    if r < 0:
        raise ValueError("shift must be nonnegative")
    if r == 0:
        return Field(f.spec, f.values)
    spec = f.spec
    target = spec.t + r
    u = np.log(target / spec.t_min) / spec.log_rho
    lo = np.floor(u).astype(int)
    frac = u - lo
    out = np.zeros_like(f.values)
    for k in range(spec.K):
        if target[k] > spec.t_max * (1 + 1e-12):
            continue
        i0 = min(lo[k], spec.K - 1)
        i1 = min(i0 + 1, spec.K - 1)
        w = frac[k] if i1 != i0 else 0.0
        out[k] = (1 - w) * f.values[i0] + w * f.values[i1]
    return Field(spec, out)


def nt_max(F: Field, modified: bool = True) -> np.ndarray:
    """Non-tangential maximal function over the aperture-one cone.

    With ``modified`` the pointwise values are replaced by true ``L^2``
    averages over ``(t/2, 2t) x B(y, t)``.
    """
    spec = F.spec
    levels = [k for k in range(spec.K) if spec.t[k] < spec.L / 2]
    out = np.zeros(spec.spatial_shape)
    if modified:
        avg = whitney_means(F, WhitneyParameter(1.0, 2.0))
        for k in levels:
            out = np.maximum(out, _ball_max(spec, np.sqrt(avg[k]), spec.t[k]))
        return out
    mag = np.sqrt(F.sq())
    for k in levels:
        out = np.maximum(out, _ball_max(spec, mag[k], spec.t[k]))
    return out


def whitney_means(F: Field, c: WhitneyParameter) -> np.ndarray:
    """Mean of ``|F|^2`` over ``Omega_c(t_k, x_i)`` for every field vertex."""
    spec = F.spec
    sq = F.sq()
    lo, hi = spec.t_edges[:, 0], spec.t_edges[:, 1]
    out = np.zeros((spec.K,) + spec.spatial_shape)
    for a, t in enumerate(spec.t):
        if c.c0 * t >= spec.L / 2:
            out[a] = out[a - 1] if a else 0.0
            continue
        tlen = np.clip(np.minimum(hi, c.c1 * t) - np.maximum(lo, t / c.c1), 0.0, None)
        ks = np.nonzero(tlen)[0]
        slab = np.tensordot(tlen[ks], sq[ks], axes=1)
        mass = tlen[ks].sum() * ball_overlap(spec, c.c0 * t).sum()
        out[a] = ball_sum(spec, slab, c.c0 * t) / mass
    return out


def cone_sup_points(spec: GridSpec, x) -> np.ndarray:
    """Cells whose centre lies in the aperture-one cone at ``x``."""
    d = torus_distance(spec, x)
    return d[None] < spec.t.reshape(level_shape(spec))


# ---------------------------------------------------------------------------
# embedding probes

_SPACES = {"tent": tent_norm, "z": z_norm}


def embedding_ratios(fields, first: tuple, second: tuple) -> np.ndarray:
    """``||f||_second / ||f||_first`` for each field.

    ``first`` and ``second`` are ``(space, exponent)`` pairs with space
    ``"tent"`` or ``"z"``.  Bounded ratios with small spread are evidence
    for the embedding, never a proof of it.
    """
    (a, p), (b, q) = first, second
    if a not in _SPACES or b not in _SPACES:
        raise ValueError("spaces must be 'tent' or 'z'")
    out = []
    for f in fields:
        den = _SPACES[a](f, p).value
        out.append(_SPACES[b](f, q).value / den if den else math.nan)
    return np.asarray(out)


def variation(ratios) -> float:
    """Coefficient of variation (population standard deviation over mean)."""
    r = np.asarray(ratios, dtype=float)
    return float(r.std() / abs(r.mean()))
