"""Exponent arithmetic and exponent-region geometry.

An exponent is either finite, ``(p, s)`` with ``0 < p < inf``, or infinite,
``(inf, s; alpha)`` with ``alpha >= 0``.  Every exponent is a point of the
(j, theta)-plane, and all the operations here are affine maps of that plane.

Rational inputs (ints and ``Fraction``) are kept exact; floats propagate as
floats.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from pathlib import Path
from typing import Iterable, Sequence

TOL = 1e-12
INF = math.inf


def _num(x):
    """Keep rationals exact, everything else becomes a float."""
    if isinstance(x, bool):
        raise TypeError("booleans are not exponent data")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, Real):
        return float(x)
    raise TypeError(f"not a real number: {x!r}")


def _close(a, b, tol=TOL) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol


@dataclass(frozen=True)
class Exponent:
    """A point of the exponent set in ambient dimension ``n``.

    Use :meth:`finite`, :meth:`infinite` or :meth:`from_views` rather than the
    raw constructor.
    """

    n: int
    p: object
    s: object
    alpha: object = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError("dimension n must be a positive integer")
        if self.p == INF:
            if self.alpha is None or self.alpha < 0:
                raise ValueError("infinite exponents need alpha >= 0")
        else:
            if self.alpha is not None:
                raise ValueError("alpha is only meaningful for infinite exponents")
            if not 0 < self.p < INF:
                raise ValueError("finite exponents need 0 < p < inf")

    @classmethod
    def finite(cls, p, s, n: int = 1) -> "Exponent":
        return cls(n, _num(p), _num(s))

    @classmethod
    def infinite(cls, s, alpha=0, n: int = 1) -> "Exponent":
        return cls(n, INF, _num(s), _num(alpha))

    @classmethod
    def from_views(cls, j, theta, n: int = 1) -> "Exponent":
        """The unique exponent with the given (j, theta) coordinates."""
        j = _num(j)
        theta = _num(theta)
        if j > 0:
            return cls(n, 1 / j, theta)
        alpha = -n * j
        if alpha == 0:
            alpha = Fraction(0) if isinstance(alpha, Fraction) else 0.0
        return cls(n, INF, theta, alpha)

    @property
    def is_finite(self) -> bool:
        return self.p != INF

    @property
    def j(self):
        if self.is_finite:
            return 1 / self.p
        return -self.alpha / self.n

    @property
    def theta(self):
        return self.s

    @property
    def i(self):
        return self.p

    @property
    def r(self):
        if self.is_finite:
            return self.s
        return self.s + self.alpha

    def views(self):
        """Return ``(j, theta, i, r)``."""
        return self.j, self.theta, self.i, self.r

    def coords(self) -> tuple:
        return self.j, self.theta

    def same_point(self, other: "Exponent", tol: float = TOL) -> bool:
        return (self.n == other.n and _close(self.j, other.j, tol)
                and _close(self.theta, other.theta, tol))

    def __str__(self) -> str:
        if self.is_finite:
            return f"({self.p}, {self.s})"
        return f"(inf, {self.s}; {self.alpha})"


def energy(n: int = 1) -> Exponent:
    """The exponent (2, -1/2), fixed by :func:`heart`."""
    return Exponent.finite(2, Fraction(-1, 2), n)


def delta(p, q):
    """``1/q - 1/p`` for integrability parameters (inf allowed)."""
    inv = lambda x: 0 if x == INF else 1 / _num(x)
    return inv(q) - inv(p)


def dual(p: Exponent) -> Exponent:
    return Exponent.from_views(1 - p.j, -p.theta, p.n)


def heart(p: Exponent) -> Exponent:
    return Exponent.from_views(1 - p.j, -p.theta - 1, p.n)


def shift(p: Exponent, r) -> Exponent:
    return Exponent.from_views(p.j, p.theta + _num(r), p.n)


def embeds(p: Exponent, q: Exponent, tol: float = TOL) -> bool:
    """Whether the space for ``p`` sits inside the space for ``q``."""
    if p.n != q.n:
        raise ValueError("exponents live in different dimensions")
    dtheta = q.theta - p.theta
    dj = q.j - p.j
    exact = all(isinstance(v, Fraction) for v in (dtheta, dj))
    if exact:
        return dtheta <= 0 and dtheta == p.n * dj
    return dtheta <= tol and abs(dtheta - p.n * dj) <= tol


def interp(p: Exponent, q: Exponent, eta) -> Exponent:
    if p.n != q.n:
        raise ValueError("exponents live in different dimensions")
    eta = _num(eta)
    j = (1 - eta) * p.j + eta * q.j
    theta = (1 - eta) * p.theta + eta * q.theta
    return Exponent.from_views(j, theta, p.n)


# ---------------------------------------------------------------------------
# regions


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class Polygon:
    """Convex polygon (counter-clockwise) or a flagged segment.

    ``open_edges[k]`` refers to the edge from vertex ``k`` to ``k + 1``.  For a
    segment (two vertices) the flags are the openness of the two endpoints.
    """

    vertices: tuple
    open_edges: tuple

    def __post_init__(self):
        nv = len(self.vertices)
        if nv < 2:
            raise ValueError("a polygon needs at least two vertices")
        if len(self.open_edges) != nv:
            raise ValueError("one openness flag per edge is required")
        if nv > 2:
            area2 = sum(_cross(self.vertices[0], self.vertices[k], self.vertices[k + 1])
                        for k in range(1, nv - 1))
            if area2 <= 0:
                raise ValueError("polygon must be non-degenerate and counter-clockwise")

    @property
    def is_segment(self) -> bool:
        return len(self.vertices) == 2

    def edges(self):
        v = self.vertices
        return [(v[k], v[(k + 1) % len(v)]) for k in range(len(v))]

    def classify(self, pt, tol: float = TOL) -> str:
        """'member', 'boundary-open' or 'outside'."""
        exact = all(isinstance(c, Fraction) for vx in self.vertices for c in vx) and all(
            isinstance(c, Fraction) for c in pt)
        eps = 0 if exact else tol
        if self.is_segment:
            return self._classify_segment(pt, eps)
        on_open = False
        for (a, b), is_open in zip(self.edges(), self.open_edges):
            length = math.hypot(float(b[0] - a[0]), float(b[1] - a[1]))
            d = _cross(a, b, pt)
            if not exact:
                d = float(d) / length
            if d < -eps:
                return "outside"
            if d <= eps and is_open:
                on_open = True
        return "boundary-open" if on_open else "member"

    def _classify_segment(self, pt, eps) -> str:
        a, b = self.vertices
        length = math.hypot(float(b[0] - a[0]), float(b[1] - a[1]))
        d = _cross(a, b, pt)
        if eps:
            d = float(d) / length
        if abs(d) > eps:
            return "outside"
        # position along the segment
        u = ((pt[0] - a[0]) * (b[0] - a[0]) + (pt[1] - a[1]) * (b[1] - a[1]))
        total = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
        lo = eps * length
        if u < -lo or u > total + lo:
            return "outside"
        if u <= lo:
            return "boundary-open" if self.open_edges[0] else "member"
        if u >= total - lo:
            return "boundary-open" if self.open_edges[1] else "member"
        return "member"


@dataclass(frozen=True)
class Region:
    """Finite union of convex polygons in the (j, theta)-plane."""

    polygons: tuple = ()
    params: dict = field(default_factory=dict, compare=False)

    @property
    def is_empty(self) -> bool:
        return not self.polygons

    def contains(self, j, theta=None, tol: float = TOL) -> bool:
        if isinstance(j, Exponent):
            j, theta = j.j, j.theta
        pt = (_num(j), _num(theta))
        return any(poly.classify(pt, tol) == "member" for poly in self.polygons)

    def classify(self, j, theta, tol: float = TOL) -> str:
        pt = (_num(j), _num(theta))
        kinds = [poly.classify(pt, tol) for poly in self.polygons]
        if "member" in kinds:
            return "member"
        if "boundary-open" in kinds:
            return "boundary-open"
        return "outside"

    def vertices(self) -> list:
        return [v for poly in self.polygons for v in poly.vertices]

    def bounds(self):
        vs = self.vertices()
        js = [float(v[0]) for v in vs]
        ts = [float(v[1]) for v in vs]
        return min(js), max(js), min(ts), max(ts)


def _segment(a, b, open_ends=(True, True)) -> Polygon:
    return Polygon((a, b), tuple(open_ends))


def region_segment(theta, j0, j1, open_ends=(True, True)) -> Region:
    """The horizontal segment {theta} x (j0, j1) as a region."""
    theta, j0, j1 = _num(theta), _num(j0), _num(j1)
    lo, hi = (j0, j1) if j0 <= j1 else (j1, j0)
    return Region((_segment((lo, theta), (hi, theta), open_ends),))


def region_imax(n: int) -> Region:
    """Convex hull of {theta=0, 0<j<(n+1)/n} and {theta=-1, -1/n<j<1}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n_ = Fraction(n)
    verts = ((Fraction(-1) / n_, Fraction(-1)), (Fraction(1), Fraction(-1)),
             ((n_ + 1) / n_, Fraction(0)), (Fraction(0), Fraction(0)))
    # bottom closed, right side open, top closed, left side open
    poly = Polygon(verts, (False, True, False, True))
    return Region((poly,), {"n": n, "kind": "imax"})


def _heart_point(v):
    return (1 - v[0], -1 - v[1])


def region_heart(region: Region) -> Region:
    """Image of a region under (j, theta) -> (1 - j, -1 - theta)."""
    polys = []
    for poly in region.polygons:
        # a point reflection keeps orientation, so edge order is unchanged
        verts = tuple(_heart_point(v) for v in poly.vertices)
        polys.append(Polygon(verts, poly.open_edges))
    params = dict(region.params)
    params["heart"] = not params.get("heart", False)
    return Region(tuple(polys), params)


def _hull(points: Sequence) -> list:
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for pt in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(pt)
    for pt in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(pt)
    return lower[:-1] + upper[:-1]


def _on_closed_piece(a, b, regions: Iterable[Region]) -> bool:
    """Whether hull edge a->b lies along a closed edge (or segment) of the inputs."""
    for region in regions:
        for poly in region.polygons:
            pieces = [(poly.vertices[0], poly.vertices[1])] if poly.is_segment else [
                e for e, o in zip(poly.edges(), poly.open_edges) if not o]
            for c, d in pieces:
                ca, cb = _cross(c, d, a), _cross(c, d, b)
                if abs(float(ca)) <= TOL and abs(float(cb)) <= TOL:
                    return True
    return False


def region_hull(first: Region, second: Region) -> Region:
    """Convex hull of the union of two regions.

    A hull edge is closed when it runs along a closed edge or a segment of the
    inputs, and open otherwise.
    """
    pts = first.vertices() + second.vertices()
    if not pts:
        return Region()
    hull = _hull(pts)
    if len(hull) < 3:
        a, b = hull[0], hull[-1]
        closed = _on_closed_piece(a, b, (first, second))
        return Region((_segment(a, b, (not closed, not closed)),))
    flags = tuple(not _on_closed_piece(hull[k], hull[(k + 1) % len(hull)], (first, second))
                  for k in range(len(hull)))
    return Region((Polygon(tuple(hull), flags),), {"kind": "hull"})


def region_imin(n: int, eps=0, eps_prime=0) -> Region:
    """Hull of the segment {theta=0, 1/(2+eps') < j < (n+2)/(2n)+eps} and its heart image."""
    eps, eps_prime = _num(eps), _num(eps_prime)
    if eps < 0 or eps_prime < 0:
        raise ValueError("eps and eps' must be non-negative")
    top = region_segment(0, 1 / (2 + eps_prime), Fraction(n + 2, 2 * n) + eps)
    region = region_hull(top, region_heart(top))
    return Region(region.polygons, {"n": n, "eps": eps, "eps_prime": eps_prime, "kind": "imin"})


DECAY_BOX = (Fraction(-3), Fraction(3), Fraction(-3), Fraction(2))


def decay_intercept(n: int, lam):
    """The boundary of the decay half-plane is j = theta/n + intercept."""
    return (n + 1 - _num(lam)) / (2 * Fraction(n))


def region_decay(n: int, lam, box=DECAY_BOX) -> Region:
    """Half-plane j > theta/n + (n+1-lam)/(2n), clipped to ``box``.

    These are the exponents that embed into an infinite exponent ``q`` with
    ``r(q) < (lam - n - 1)/2``; the region grows with ``lam``.  ``lam`` is
    accepted on the closed interval [0, n+1]; the endpoints are the
    limiting half-planes.
    """
    lam = _num(lam)
    if not 0 <= lam <= n + 1:
        raise ValueError(f"lambda must lie in [0, {n + 1}], got {lam}")
    c = decay_intercept(n, lam)
    j0, j1, t0, t1 = box

    def g(pt):  # positive inside
        return pt[0] - pt[1] / n - c

    # box corners counter-clockwise; each edge is closed (artificial clip)
    corners = [(j0, t0), (j1, t0), (j1, t1), (j0, t1)]
    out, flags = [], []
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        ga, gb = g(a), g(b)
        if ga >= 0:
            out.append(a)
            flags.append(False)
        if (ga >= 0) != (gb >= 0):
            u = ga / (ga - gb)
            cut = (a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]))
            out.append(cut)
            # leaving the half-plane starts the open boundary edge
            flags.append(ga >= 0)
    # drop duplicates from cuts through corners
    verts, vflags = [], []
    for v, fl in zip(out, flags):
        if verts and verts[-1] == v:
            vflags[-1] = vflags[-1] or fl
            continue
        verts.append(v)
        vflags.append(fl)
    if len(verts) > 1 and verts[0] == verts[-1]:
        verts.pop()
        vflags[0] = vflags[0] or vflags.pop()
    if len(verts) < 3:
        return Region((), {"n": n, "lambda": lam, "kind": "decay"})
    poly = Polygon(tuple(verts), tuple(vflags))
    return Region((poly,), {"n": n, "lambda": lam, "kind": "decay", "box": box})


def _fmt(x) -> str:
    return repr(float(x))


def region_export(region: Region, path, grid: int = 200) -> tuple:
    """Write the vertex CSV and a membership grid CSV next to it.

    Returns the two paths.  The grid file is ``<stem>_grid.csv`` and spans the
    region's bounding box padded by 10%.
    """
    path = Path(path)
    grid_path = path.with_name(path.stem + "_grid.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "theta", "polygon_id", "open_flag"])
        for pid, poly in enumerate(region.polygons):
            for v, flag in zip(poly.vertices, poly.open_edges):
                w.writerow([_fmt(v[0]), _fmt(v[1]), pid, int(flag)])
    with open(grid_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "theta", "member"])
        if not region.is_empty:
            j0, j1, t0, t1 = region.bounds()
            pj = 0.1 * max(j1 - j0, 1e-3)
            pt = 0.1 * max(t1 - t0, 1e-3)
            for a in range(grid):
                theta = t0 - pt + (t1 - t0 + 2 * pt) * a / (grid - 1)
                for b in range(grid):
                    j = j0 - pj + (j1 - j0 + 2 * pj) * b / (grid - 1)
                    w.writerow([_fmt(j), _fmt(theta), int(region.contains(j, theta))])
    return path, grid_path


def region_csv_lines(region: Region) -> list:
    """Vertex CSV rows as strings, as written by :func:`region_export`."""
    rows = ["j,theta,polygon_id,open_flag"]
    for pid, poly in enumerate(region.polygons):
        for v, flag in zip(poly.vertices, poly.open_edges):
            rows.append(f"{_fmt(v[0])},{_fmt(v[1])},{pid},{int(flag)}")
    return rows
