"""Holomorphic functions on bisectors with decay metadata.

A bisector ``S_mu`` is the union of the open sectors of half-angle ``mu``
around the positive and negative real axes.  Every catalogue entry carries
its decay orders ``(sigma, tau)`` at zero and infinity, so precondition
checks never have to guess.  ``[z] = z sgn(Re z)`` folds the left sector
onto the right one.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma

INF = math.inf
DEFAULT_MU = math.pi / 4


def fold(z):
    """``[z] = z sgn(Re z)``; undefined on the imaginary axis."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z.real == 0):
        raise ValueError("evaluation on the imaginary axis is undefined")
    return np.where(z.real > 0, z, -z)


@dataclass(frozen=True, eq=False)
class HoloFn:
    """A catalogue function with decay ``(sigma, tau)`` and a vectorized evaluator.

    ``family`` is ``("bump", N, M, c)`` for ``c [z]^N e^-[z] (1+[z])^-M``
    (``sgp`` is ``N = M = 0``) and ``None`` otherwise; it enables closed-form
    sibling computations.
    """

    name: str
    sigma: float
    tau: float
    fn: Callable = field(repr=False)
    degenerate: bool = False
    even: bool = False
    family: tuple | None = None

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if np.any(z.real == 0):
            raise ValueError(f"{self.name}: evaluation on the imaginary axis is undefined")
        out = self.fn(z)
        return out if np.ndim(out) else complex(out)

    def on_spectrum(self, lam, tol: float = 0.0):
        """Evaluate at eigenvalues, returning 0 where ``|lam| <= tol``."""
        lam = np.asarray(lam, dtype=np.complex128)
        zero = np.abs(lam) <= tol
        safe = np.where(zero, 1.0, lam)
        return np.where(zero, 0.0, self.fn(safe))


# ---------------------------------------------------------------------------
# catalogue


def sgp() -> HoloFn:
    """``e^-[z]``, the bounded version of the exponential."""
    return HoloFn("sgp", 0.0, INF, lambda z: np.exp(-fold(z)), even=True,
                  family=("bump", 0, 0, 1.0))


def chi_plus() -> HoloFn:
    return HoloFn("chi+", 0.0, 0.0, lambda z: (z.real > 0).astype(complex), degenerate=True)


def chi_minus() -> HoloFn:
    return HoloFn("chi-", 0.0, 0.0, lambda z: (z.real < 0).astype(complex), degenerate=True)


def _power_eval(lam):
    def fn(z):
        arg = np.angle(z)
        # cut along i(-inf, 0]: arguments live in (-pi/2, 3pi/2]
        arg = np.where(arg <= -math.pi / 2, arg + 2 * math.pi, arg)
        return np.exp(lam * (np.log(np.abs(z)) + 1j * arg))
    return fn


def power(lam: float) -> HoloFn:
    lam = float(lam)
    return HoloFn(f"power:{lam:g}", lam, -lam, _power_eval(lam))


def bump(N: float, M: float = 0.0) -> HoloFn:
    """``[z]^N e^-[z] (1 + [z])^-M``."""
    N, M = float(N), float(M)

    def fn(z):
        w = fold(z)
        return w ** N * np.exp(-w) * (1 + w) ** (-M)

    return HoloFn(f"bump:{N:g},{M:g}", N, INF, fn, even=True, family=("bump", N, M, 1.0))


def resolvent(k: int = 1) -> HoloFn:
    """``(1 + i z)^-k``."""
    return HoloFn(f"resolvent:{k}", 0.0, float(k), lambda z: (1 + 1j * z) ** (-k))


def eta(delta: float) -> HoloFn:
    """``([z] / (1 + [z])^2)^delta``, decaying like ``|z|^delta`` at both ends."""
    delta = float(delta)

    def fn(z):
        w = fold(z)
        return (w / (1 + w) ** 2) ** delta

    return HoloFn(f"eta:{delta:g}", delta, delta, fn, even=True)


# ---------------------------------------------------------------------------
# closures


def dilate(f: HoloFn, t: float) -> HoloFn:
    """``z -> f(t z)``."""
    if not t > 0:
        raise ValueError("dilation needs t > 0")
    fam = None
    return HoloFn(f"{f.name}@{t:g}", f.sigma, f.tau, lambda z: f.fn(t * z),
                  f.degenerate, f.even, fam)


def involute(f: HoloFn) -> HoloFn:
    """``z -> conj(f(conj z))``."""
    fam = f.family if f.family is not None and np.isreal(f.family[3]) else None
    return HoloFn(f"~{f.name}", f.sigma, f.tau, lambda z: np.conj(f.fn(np.conj(z))),
                  f.degenerate, f.even, fam)


def scale(c: complex, f: HoloFn) -> HoloFn:
    fam = None
    if f.family is not None:
        fam = f.family[:3] + (c * f.family[3],)
    return HoloFn(f"{c:g}*{f.name}", f.sigma, f.tau, lambda z: c * f.fn(z),
                  f.degenerate, f.even, fam)


def product(f: HoloFn, g: HoloFn) -> HoloFn:
    """Pointwise product; decay orders add."""
    return HoloFn(f"({f.name})({g.name})", f.sigma + g.sigma, f.tau + g.tau,
                  lambda z: f.fn(z) * g.fn(z), f.degenerate or g.degenerate,
                  f.even and g.even)


def add(f: HoloFn, g: HoloFn) -> HoloFn:
    """Pointwise sum; decay orders take the minimum."""
    return HoloFn(f"({f.name})+({g.name})", min(f.sigma, g.sigma), min(f.tau, g.tau),
                  lambda z: f.fn(z) + g.fn(z), f.degenerate and g.degenerate,
                  f.even and g.even)


_TOKEN = re.compile(r"^(?:(?P<c>[-+0-9.eE]+)\*)?(?P<base>[a-z+-]+)(?::(?P<args>[-0-9.,eE]+))?(?:@(?P<t>[0-9.eE+-]+))?$")


def parse(spec: str) -> HoloFn:
    """Build a catalogue entry from a string such as ``4*bump:1,0`` or ``sgp@2``.

    Grammar: ``[c*]name[:a,b][@t]`` with name one of sgp, chi+, chi-, power,
    bump, resolvent, eta.
    """
    m = _TOKEN.match(spec.strip())
    if not m:
        raise ValueError(f"cannot parse function {spec!r}")
    args = [float(a) for a in m["args"].split(",")] if m["args"] else []
    makers = {"sgp": sgp, "chi+": chi_plus, "chi-": chi_minus, "power": power,
              "bump": bump, "resolvent": lambda k=1: resolvent(int(k)), "eta": eta}
    if m["base"] not in makers:
        raise ValueError(f"unknown function {m['base']!r}")
    f = makers[m["base"]](*args)
    if m["t"]:
        f = dilate(f, float(m["t"]))
    if m["c"]:
        f = scale(float(m["c"]), f)
    return f


# ---------------------------------------------------------------------------
# probes


def weight(r, sigma: float, tau: float):
    """``r^sigma`` for ``r <= 1`` and ``r^-tau`` for ``r >= 1``."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1, r ** sigma, r ** (-tau))


def _rays(mu: float) -> list:
    return [0.0, mu, -mu, math.pi, math.pi - mu, math.pi + mu]


def psi_norm(f: HoloFn, sigma: float, tau: float, mu: float = DEFAULT_MU,
             samples: int = 256, r_range=(1e-6, 1e6)) -> float:
    """Sampled ``sup |f(z)| / m(|z|)`` over the rays of ``S_mu`` and the real axis.

    The best sample on each ray is refined by a bounded scalar search, so
    interior maxima are located to near machine precision.  A finite value
    is evidence of membership, never a certificate.
    """
    if samples < 64:
        raise ValueError("need at least 64 samples per ray")
    lo, hi = math.log(r_range[0]), math.log(r_range[1])
    u = np.linspace(lo, hi, samples)
    best = 0.0
    for ang in _rays(mu):
        direction = complex(math.cos(ang), math.sin(ang))

        def ratio(v):
            r = np.exp(v)
            return np.abs(f(r * direction)) / weight(r, sigma, tau)

        vals = ratio(u)
        i = int(np.argmax(vals))
        best = max(best, float(vals[i]))
        a, b = u[max(i - 1, 0)], u[min(i + 1, samples - 1)]
        if b > a:
            res = optimize.minimize_scalar(lambda v: -float(ratio(v)), bounds=(a, b),
                                           method="bounded", options={"xatol": 1e-12})
            best = max(best, -float(res.fun))
    return best


def _check_pair_decay(psi: HoloFn, phi: HoloFn):
    if psi.degenerate or phi.degenerate:
        raise ValueError("degenerate functions have no convergent pair integral")
    if psi.sigma + phi.sigma <= 0 or psi.tau + phi.tau <= 0:
        raise ValueError("combined decay must be positive at both ends")


def pair_integral(psi: HoloFn, phi: HoloFn, z, with_error: bool = False):
    """``int_0^inf psi(t z) phi(t z) dt/t`` by adaptive quadrature in ``log t``."""
    _check_pair_decay(psi, phi)
    z = complex(z)
    if z.real == 0:
        raise ValueError("z must lie off the imaginary axis")
    centre = -math.log(abs(z))

    def g(u):
        # both ends decay by precondition; beyond this the exponent over/underflows
        if abs(u - centre) > 600:
            return 0j
        w = np.complex128(math.exp(u) * z)
        with np.errstate(over="ignore", invalid="ignore"):
            val = complex(psi.fn(w) * phi.fn(w))
        return val if np.isfinite(val) else 0j

    total, err = 0.0 + 0.0j, 0.0
    for a, b in ((-np.inf, centre), (centre, np.inf)):
        re_, e_re = integrate.quad(lambda u: g(u).real, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        im_, e_im = integrate.quad(lambda u: g(u).imag, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        total += re_ + 1j * im_
        err += e_re + e_im
    return (total, err) if with_error else total


def calderon_sibling(phi: HoloFn, N: float = 1, M: float = 0, mu: float = DEFAULT_MU,
                     points: int = 32) -> tuple:
    """Scale ``bump(N, M)`` so that its pair integral with ``phi`` is one.

    Uses the Gamma-function closed form when ``phi`` is a scaled ``bump(N1, 0)``
    and ``M = 0``; otherwise a least-squares fit of the scalar over sampled
    points of the bisector.  Returns ``(psi, residual)``.
    """
    if phi.degenerate:
        raise ValueError(f"{phi.name} vanishes on an open set; it has no Calderon sibling")
    base = bump(N, M)
    _check_pair_decay(base, phi)
    zs = bisector_samples(points, mu)
    fam = phi.family
    if fam is not None and fam[2] == 0 and M == 0:
        total = N + fam[1]
        c = 2.0 ** total / gamma(total) / fam[3]
    else:
        vals = np.array([pair_integral(base, phi, z) for z in zs])
        c = np.vdot(vals, np.ones_like(vals)) / np.vdot(vals, vals)
    psi = scale(c, base)
    resid = max(abs(pair_integral(psi, phi, z) - 1) for z in zs)
    return psi, float(resid)


def bisector_samples(count: int, mu: float = DEFAULT_MU, seed: int = 0) -> np.ndarray:
    """Deterministic points spread over ``S_mu`` in both sectors."""
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), count))
    ang = rng.uniform(-0.95 * mu, 0.95 * mu, count)
    ang = np.where(np.arange(count) % 2 == 0, ang, math.pi + ang)
    return r * np.exp(1j * ang)
