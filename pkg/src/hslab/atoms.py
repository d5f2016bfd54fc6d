"""Atoms for tent and Z spaces, and the Whitney-grid decomposition of Z-spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import Exponent, delta
from .halfspace import Field, WhitneyGrid, WhitneyParameter, level_shape, tent_mask, torus_distance
from .quasinorms import l2s_norm, tent_norm


@dataclass(frozen=True)
class Validation:
    ok: bool
    reason: str = "ok"

    def __bool__(self) -> bool:
        return self.ok


def _size_exponent(p: Exponent) -> float:
    """``delta_{p,2} = 1/2 - 1/p``."""
    return float(delta(p.p, 2))


def _mass_outside(a: Field, inside: np.ndarray) -> float:
    sq = a.sq()
    total = sq.sum()
    if total == 0:
        return 0.0
    return float(sq[~inside].sum() / total)


def ball_measure(spec, center, r: float) -> float:
    """Discrete ``|B|``: number of cell centres in the ball times ``dx^n``."""
    return float((torus_distance(spec, center) < r).sum() * spec.cell_volume)


def validate_tent_atom(a: Field, p: Exponent, center, r: float, tol: float = 1e-12) -> Validation:
    """Support in the tent over ``B(center, r)`` and ``||a||_{T^2_s} <= |B|^{delta_{p,2}}``."""
    if not p.is_finite or p.p > 1:
        raise ValueError("tent atoms are defined for i(p) <= 1")
    if _mass_outside(a, tent_mask(a.spec, center, r)) > tol:
        return Validation(False, "support")
    size = tent_norm(a, Exponent.finite(2, p.theta, p.n)).value
    bound = ball_measure(a.spec, center, r) ** _size_exponent(p)
    if size > bound * (1 + tol):
        return Validation(False, "size")
    return Validation(True)


def whitney_mask(spec, t: float, x, c: WhitneyParameter) -> np.ndarray:
    """Cells whose centre lies in ``Omega_c(t, x)``."""
    tt = spec.t.reshape(level_shape(spec))
    near = torus_distance(spec, x)[None] < c.c0 * t
    return near & (tt > t / c.c1) & (tt < c.c1 * t)


def validate_z_atom(a: Field, p: Exponent, c: WhitneyParameter, t: float, x,
                    tol: float = 1e-12) -> Validation:
    """Support in ``Omega_c(t, x)`` and ``||t^-s a||_{L^2(dx dt/t)} <= t^{n delta_{p,2}}``."""
    if not p.is_finite:
        raise ValueError("Z atoms need a finite exponent")
    if _mass_outside(a, whitney_mask(a.spec, t, x, c)) > tol:
        return Validation(False, "support")
    size = l2s_norm(a, p.theta).value
    if size > t ** (a.spec.n * _size_exponent(p)) * (1 + tol):
        return Validation(False, "size")
    return Validation(True)


def min_scale(n: int, c: WhitneyParameter) -> int:
    """Smallest grid offset ``k`` for which Whitney cubes fit inside Whitney regions."""
    return math.ceil(math.log2(math.sqrt(n) / (3 * c.c0)) + 1)


@dataclass
class AtomicDecomposition:
    """Coefficients and sparse atoms over the cubes of a Whitney grid."""

    grid: WhitneyGrid
    exponent: Exponent
    coefficients: np.ndarray
    atoms: dict           # cube index -> (flat cell indices, atom values)
    uncovered_mass: float = 0.0   # share of |f|^2 on cells outside every cube

    @property
    def k(self) -> int:
        return self.grid.k

    def cube_point(self, index: int) -> tuple:
        """``(t_Q, x_Q)``: the point the atom on cube ``index`` is associated with."""
        Q = self.grid.cubes[index]
        return Q.t_mid, Q.center

    def atom(self, index: int) -> Field:
        spec = self.grid.spec
        cells, values = self.atoms[index]
        vals = np.zeros((spec.K * spec.Nx ** spec.n, values.shape[-1]), dtype=np.complex128)
        vals[cells] = values
        return Field(spec, vals.reshape(spec.field_shape(values.shape[-1])))

    def reconstruct(self) -> Field:
        spec = self.grid.spec
        ch = next(iter(self.atoms.values()))[1].shape[-1] if self.atoms else 1
        vals = np.zeros((spec.K * spec.Nx ** spec.n, ch), dtype=np.complex128)
        for idx, (cells, atom) in self.atoms.items():
            vals[cells] += self.coefficients[idx] * atom
        return Field(spec, vals.reshape(spec.field_shape(ch)))

    def coefficient_norm(self, p=None) -> float:
        p = float(self.exponent.p if p is None else p)
        lam = np.abs(self.coefficients)
        return float((lam ** p).sum() ** (1 / p))

    def table(self) -> list:
        """Rows ``(cube, q, t_Q, x_Q..., coefficient)`` for nonzero coefficients."""
        rows = []
        for idx in sorted(self.atoms):
            t, x = self.cube_point(idx)
            rows.append((idx, self.grid.cubes[idx].q, t, *x, self.coefficients[idx]))
        return rows


def z_decompose(f: Field, p: Exponent, k: int, c=WhitneyParameter()) -> AtomicDecomposition:
    """Split ``f`` over the Whitney cubes at offset ``k`` into Z atoms.

    The coefficient of cube ``Q`` is
    ``t_Q^(-n delta_{p,2}) ||t^-s f||_{L^2(Q, dx dt/t)}`` with ``t_Q`` the
    centre of the cube's t-range.  Cubes where ``f`` vanishes get a zero
    coefficient and no atom.  Cells outside the grid's t-range belong to no
    cube; their share of ``|f|^2`` is kept in ``uncovered_mass``.
    """
    if not isinstance(c, WhitneyParameter):
        c = WhitneyParameter(*c)
    if not p.is_finite:
        raise ValueError("decomposition needs a finite exponent")
    spec = f.spec
    if k < min_scale(spec.n, c):
        raise ValueError("support condition unobtainable")
    grid = WhitneyGrid(spec, k)
    w = (spec.mu * spec.t ** (-2.0 * float(p.theta))).reshape(level_shape(spec))
    mass = np.sqrt(grid.cube_sums(f.sq() * w) * spec.cell_volume)
    t_mid = np.array([Q.t_mid for Q in grid.cubes])
    coef = t_mid ** (-spec.n * _size_exponent(p)) * mass
    labels = grid.labels.ravel()
    order = np.argsort(labels, kind="stable")
    starts = np.searchsorted(labels[order], np.arange(len(grid.cubes) + 1))
    flat = f.values.reshape(-1, f.channels)
    atoms = {}
    for idx in np.nonzero(coef)[0]:
        cells = order[starts[idx]:starts[idx + 1]]
        atoms[int(idx)] = (cells, flat[cells] / coef[idx])
    sq = f.sq()
    total = sq.sum()
    left = float(sq[~grid.covered].sum() / total) if total else 0.0
    return AtomicDecomposition(grid, p, coef, atoms, left)
