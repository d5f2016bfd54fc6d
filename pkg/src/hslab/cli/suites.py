"""Deterministic verification suites, one per module.

Every check records the identity it exercises in words, the measured
deviation, the tolerance and a status.  Measured values depend only on the
seed, so reports are byte-identical across reruns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .. import atoms, bvp, calculus, exponents, halfspace, holo, quasinorms
from ..calculus import CoefficientMatrix, MultiplierOp, hat_transform, random_accretive
from ..exponents import Exponent
from ..halfspace import GridSpec, WhitneyParameter

SUITES = ("exponents", "halfspace", "quasinorms", "atoms", "holo", "calculus", "bvp")


@dataclass(frozen=True)
class Check:
    name: str
    identity: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured)) and self.measured <= self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "identity": self.identity, "measured": float(self.measured),
                "tolerance": self.tolerance, "status": "pass" if self.passed else "fail"}


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = np.abs(b).max()
    return float(np.abs(a - b).max() / scale) if scale else float(np.abs(a).max())


def random_exponent(rng, n: int) -> Exponent:
    """A rational exponent, finite or infinite, from a seeded generator."""
    theta = Fraction(int(rng.integers(-40, 41)), int(rng.integers(1, 13)))
    if rng.random() < 0.2:
        return Exponent.infinite(theta, Fraction(int(rng.integers(0, 20)), int(rng.integers(1, 9))), n)
    return Exponent.finite(Fraction(int(rng.integers(1, 60)), int(rng.integers(1, 20))), theta, n)


def band_limited(spec: GridSpec, modes, channels: int, seed: int) -> np.ndarray:
    """Boundary field with complex Gaussian Fourier coefficients on the given integer modes."""
    rng = np.random.default_rng(seed)
    coords = np.meshgrid(*spec.coords(), indexing="ij")
    out = np.zeros(spec.spatial_shape + (channels,), dtype=np.complex128)
    for k in modes:
        k = np.atleast_1d(k)
        phase = sum(kj * xj for kj, xj in zip(k, coords)) * (2 * math.pi / spec.L)
        c = rng.standard_normal(channels) + 1j * rng.standard_normal(channels)
        out += np.exp(1j * phase)[..., None] * c
    return out


# ---------------------------------------------------------------------------


def suite_exponents(seed: int) -> list:
    rng = np.random.default_rng(seed)
    worst_dual = worst_heart = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        p = random_exponent(rng, n)
        worst_dual = max(worst_dual, 0 if exponents.dual(exponents.dual(p)).same_point(p, 0) else 1)
        worst_heart = max(worst_heart, 0 if exponents.heart(exponents.heart(p)).same_point(p, 0) else 1)
    e = exponents.energy(3)
    imax = {tuple(v) for v in exponents.region_imax(1).vertices()}
    want = {(0, 0), (2, 0), (1, -1), (-1, -1)}
    seg = exponents.region_heart(exponents.region_segment(0, Fraction(5, 6), Fraction(1, 2)))
    ends = sorted(float(1 / v[0]) for v in seg.vertices())
    mism = 0
    for _ in range(2000):
        p, q = random_exponent(rng, 2), random_exponent(rng, 2)
        mism += exponents.embeds(p, q) != exponents.embeds(exponents.dual(q), exponents.dual(p))
    return [
        Check("dual_involution", "dual of dual is the identity on 10^4 rational exponents", worst_dual, 0),
        Check("heart_involution", "heart-dual of heart-dual is the identity on 10^4 rational exponents",
              worst_heart, 0),
        Check("energy_fixed", "the energy exponent is fixed by the heart-dual",
              0 if exponents.heart(e).same_point(e, 0) else 1, 0),
        Check("imax_vertices_n1", "maximal region for n=1 has corners (0,0),(2,0),(1,-1),(-1,-1)",
              0 if imax == want else 1, 0),
        Check("heart_segment_endpoints", "heart image of the n=3 segment has integrability endpoints 2 and 6",
              abs(ends[0] - 2) + abs(ends[1] - 6), 0),
        Check("embedding_duality", "p embeds in q iff dual q embeds in dual p (2000 random pairs)", mism, 0),
    ]


def suite_halfspace(seed: int) -> list:
    out = []
    for n in (1, 2):
        spec = GridSpec(n=n, m=1, L=8.0, Nx=64 if n == 1 else 32, t_min=0.05, t_max=2.0, K=16)
        R = 1.3
        total = halfspace.ball_overlap(spec, R).sum()
        out.append(Check(f"ball_overlap_sum_n{n}", "cell overlaps of a ball add up to its volume",
                         abs(total - halfspace.ball_volume(n) * R ** n) / (halfspace.ball_volume(n) * R ** n),
                         1e-12))
    spec = GridSpec(n=1, m=1, L=16.0, Nx=256, t_min=0.01, t_max=4.0, K=200)
    c = WhitneyParameter()
    vol = halfspace.whitney_cells(spec, 0.5, (3.0,), c).sum()
    out.append(Check("whitney_volume", "cell volumes of an interior Whitney region add up to its volume",
                     abs(vol / halfspace.whitney_volume(0.5, 1, c) - 1), 1e-12))
    f = halfspace.random_field(spec, seed)
    g = halfspace.random_field(spec, seed + 1)
    lin = (f + g * 2.0).values - (f.values + 2.0 * g.values)
    out.append(Check("field_linearity", "field arithmetic acts cellwise", float(np.abs(lin).max()), 0))
    return out


def _aligned_spec(n: int, Nx: int, K: int) -> GridSpec:
    return GridSpec(n=n, m=1, L=16.0, Nx=Nx, t_min=16.0 / Nx / 2, t_max=2.0, K=K)


def suite_quasinorms(seed: int) -> list:
    out = []
    for n, Nx in ((1, 128), (2, 32)):
        spec = _aligned_spec(n, Nx, 24)
        worst_t = worst_z = 0.0
        for k in range(5):
            f = halfspace.random_field(spec, seed + k, gamma_=0.5)
            l2 = quasinorms.l2s_norm(f, -0.5).value
            p = Exponent.finite(2, -0.5, n)
            tn = quasinorms.tent_norm(f, p).value
            zn = quasinorms.z_norm(f, p).value
            worst_t = max(worst_t, abs(tn / (math.sqrt(halfspace.ball_volume(n)) * l2) - 1))
            worst_z = max(worst_z, abs(zn / l2 - 1))
        out.append(Check(f"tent_fubini_n{n}", "square-exponent tent norm equals sqrt(ball volume) times weighted L2",
                         worst_t, 1e-9))
        out.append(Check(f"z_fubini_n{n}", "square-exponent Z norm equals weighted L2", worst_z, 1e-9))
    spec = _aligned_spec(1, 128, 40)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(spec.spatial_shape) + 1j * rng.standard_normal(spec.spatial_shape)
    t = float(spec.t[10])
    back = quasinorms.slice_project(quasinorms.slice_embed(g, spec, t, 2.0), t, 2.0)
    out.append(Check("slice_retraction", "projecting a slice embedding returns the boundary field",
                     _rel(back[..., 0], g), 1e-13))
    f = halfspace.random_field(spec, seed, gamma_=0.5)
    h = halfspace.random_field(spec, seed + 7, gamma_=-0.5)
    lhs = abs(quasinorms.pairing(f, h))
    rhs = (quasinorms.tent_norm(f, Exponent.finite(2, -0.5)).value
           * quasinorms.tent_norm(h, Exponent.finite(2, 0.5)).value / halfspace.ball_volume(1))
    out.append(Check("pairing_cauchy_schwarz", "pairing bounded by the product of dual tent norms",
                     max(lhs / rhs - 1, 0.0), 1e-12))
    return out


def suite_atoms(seed: int) -> list:
    out = []
    spec = GridSpec(n=1, m=1, L=16.0, Nx=128, t_min=2.0 ** -3.5, t_max=2.0 ** 1.5, K=40)
    c = WhitneyParameter()
    for p in (Exponent.finite(Fraction(1, 2), Fraction(-1, 2)), Exponent.finite(1, Fraction(-1, 2))):
        k = atoms.min_scale(1, c) + 1
        grid = halfspace.WhitneyGrid(spec, k)
        raw = halfspace.random_field(spec, seed)
        f = raw.with_values(raw.values * grid.covered[..., None])
        dec = atoms.z_decompose(f, p, k, c)
        err = _rel(dec.reconstruct().values, f.values)
        bad = 0
        for idx in list(dec.atoms)[:40]:
            t, x = dec.cube_point(idx)
            bad += not atoms.validate_z_atom(dec.atom(idx), p, c, t, x, tol=1e-10)
        tag = f"p{float(p.p):g}"
        out.append(Check(f"reconstruction_{tag}", "atoms times coefficients rebuild the field", err, 1e-13))
        out.append(Check(f"atoms_validate_{tag}", "every atom meets its support and size bounds", bad, 0))
    return out


def suite_holo(seed: int) -> list:
    out = []
    for phi, N, want in ((holo.sgp(), 1, 2.0), (holo.bump(1), 1, 4.0), (holo.bump(1), 2, 4.0)):
        psi, resid = holo.calderon_sibling(phi, N)
        out.append(Check(f"sibling_{phi.name}_N{N}", "sibling pair integral equals one on the bisector",
                         resid, 1e-10))
    z = holo.bisector_samples(8, seed=seed)
    q = max(abs(holo.pair_integral(holo.bump(1), holo.bump(1), w) - 0.25) for w in z)
    out.append(Check("bump_square_integral", "integral of bump(1)^2 along rays equals 1/4", q, 1e-10))
    out.append(Check("power_norm", "power(1) has unit weighted sup norm with orders (1,-1)",
                     abs(holo.psi_norm(holo.power(1), 1, -1) - 1), 1e-12))
    return out


def _spectral_checks(op: MultiplierOp, tag: str) -> list:
    P = op.projector()
    cp, cm = op.chi(1), op.chi(-1)
    S = op.sign()
    live = op.live
    out = [
        Check(f"chi_sum_equals_projection_{tag}", "positive and negative spectral projections add to the range projection",
              float(np.abs(cp + cm - P)[live].max()), 1e-10),
        Check(f"sign_squared_{tag}", "the sign symbol squares to the range projection",
              float(np.abs(S @ S - P)[live].max()), 1e-10),
        Check(f"chi_idempotent_{tag}", "the positive spectral projection is idempotent",
              float(np.abs(cp @ cp - cp)[live].max()), 1e-10),
    ]
    s1, s2 = op.semigroup(0.3), op.semigroup(0.7)
    out.append(Check(f"semigroup_law_{tag}", "semigroup at 0.3 then 0.7 equals semigroup at 1",
                     float(np.abs(s1 @ s2 - op.semigroup(1.0)).max()), 1e-10))
    return out


def suite_calculus(seed: int) -> list:
    out = []
    spec = GridSpec(n=2, m=1, L=2 * math.pi, Nx=16, t_min=1e-2, t_max=1e2, K=8)
    ops = [("identity", CoefficientMatrix.identity(1, 2))]
    ops += [(f"B{k}", hat_transform(random_accretive(1, 2, seed + k))) for k in range(3)]
    for tag, B in ops:
        op = MultiplierOp(spec, B, "DB")
        out += _spectral_checks(op, tag)
        bd = MultiplierOp(spec, B, "BD")
        Dh = calculus.dirac_symbol(op.xi, 1)
        sim = max(float(np.abs(Dh @ bd.fn(f) @ bd.projector() - op.fn(f) @ Dh).max())
                  for f in (holo.dilate(holo.sgp(), 0.7), holo.chi_plus(), holo.dilate(holo.bump(1), 0.7)))
        out.append(Check(f"similarity_{tag}", "D f(BD) P_BD equals f(DB) D", sim, 1e-10))
        adj = op.adjoint()
        a = float(np.abs(np.conj(np.swapaxes(op.fn(holo.bump(1)), 1, 2))
                         - adj.fn(holo.involute(holo.bump(1)))).max())
        out.append(Check(f"adjoint_{tag}", "adjoint of f(DB) equals conj-f of the adjoint operator", a, 1e-10))
    # reproducing formula on a band-limited datum
    L = 2 * math.pi / 1.5e-3
    cspec = GridSpec(n=1, m=1, L=L, Nx=256, t_min=1e-4, t_max=1e4, K=256)
    f = band_limited(cspec, (1, -1), 2, seed)
    worst = 0.0
    for k in range(2):
        op = MultiplierOp(cspec, hat_transform(random_accretive(1, 1, seed + k, strength=0.15)))
        Pf = op.apply(op.projector(), f)
        for phi, psi in ((holo.sgp(), holo.scale(2, holo.bump(1))), (holo.bump(1), holo.scale(4, holo.bump(1)))):
            g = calculus.s_contract(psi, op, calculus.q_extend(phi, op, f))
            worst = max(worst, _rel(g, Pf))
    out.append(Check("calderon_reproducing", "contraction after extension is the range projection", worst, 1e-6))
    qspec = GridSpec(n=1, m=1, L=2 * math.pi, Nx=64, t_min=1e-4, t_max=1e4, K=256)
    opD = MultiplierOp(qspec, kind="D")
    g = opD.apply(opD.projector(), band_limited(qspec, range(-5, 6), 2, seed))
    ratio = calculus.quadratic_norm_sq(holo.bump(1), opD, g) / (np.sum(np.abs(g) ** 2) * qspec.dx)
    out.append(Check("quadratic_constant", "square function of bump(1) has constant 1/4", abs(4 * ratio - 1), 1e-6))
    dspec = GridSpec(n=1, m=1, L=2 * math.pi, Nx=16, t_min=1e-2, t_max=1e2, K=4)
    op = MultiplierOp(dspec, hat_transform(random_accretive(1, 1, seed)))
    err = calculus.dunford_check(holo.bump(1), op, (op.angle() + math.pi / 2) / 2, freqs=6)
    out.append(Check("dunford_integral", "contour integral reproduces the spectral calculus", err, 1e-10))
    return out


def suite_bvp(seed: int) -> list:
    out = []
    for n, Nx in ((1, 32), (2, 16)):
        spec = GridSpec(n=n, m=1, L=2 * math.pi, Nx=Nx, t_min=1e-4, t_max=1e4, K=256)
        A = random_accretive(1, n, seed)
        setup = bvp.BVPSetup(A, spec)
        modes = [(1,) * n, (-2,) + (1,) * (n - 1), (3,) + (0,) * (n - 1)]
        raw = band_limited(spec, modes, 1 + n, seed)
        f0 = setup.op.apply(calculus.dirac_projector(setup.op.xi, 1), raw)
        F = bvp.cauchy_solve(setup, f0)
        chi_f = setup.op.apply(setup.op.chi(1), f0)
        out.append(Check(f"cauchy_residual_n{n}", "dF/dt + DB F vanishes per frequency",
                         bvp.cauchy_residual(setup, f0), 1e-10))
        near = GridSpec(n=n, m=1, L=spec.L, Nx=Nx, t_min=1e-10, t_max=1.0, K=8)
        F_near = bvp.cauchy_solve(bvp.BVPSetup(A, near), f0)
        out.append(Check(f"cauchy_limit_n{n}", "the solution tends to chi+ f0 at t=0",
                         _rel(F_near.values[0], chi_f), 1e-8))
        rec, _ = bvp.trace_recover(setup, F)
        out.append(Check(f"trace_round_trip_n{n}", "contraction with a sibling recovers chi+ f0",
                         _rel(rec, chi_f), 1e-6))
        pot = bvp.recover_u(setup, f0)
        out.append(Check(f"correspondence_n{n}", "conormal gradient of the recovered potential is the solution",
                         _rel(pot.gradient.values, F.values), 1e-8))
        g = band_limited(spec, modes, 1, seed + 1)[..., 0]
        jumps = bvp.jump_errors(setup, g)
        out.append(Check(f"single_layer_jump_n{n}", "conormal single layer jumps by [f;0]", jumps["single"], 1e-10))
        out.append(Check(f"double_layer_jump_n{n}", "double layer jumps by -f", jumps["double"], 1e-10))
    spec = GridSpec(n=1, m=1, L=2 * math.pi, Nx=32, t_min=1e-2, t_max=1e2, K=8)
    I = bvp.BVPSetup(CoefficientMatrix.identity(1, 1), spec)
    for comp in ("perp", "par"):
        sv = bvp.wp_probe(I, comp)["min_singular"]
        out.append(Check(f"wp_identity_{comp}", "identity coefficients give singular value 1/sqrt(2)",
                         float(np.abs(sv - 1 / math.sqrt(2)).max()), 1e-10))
    diag = bvp.BVPSetup(random_accretive(1, 1, seed, block_diagonal=True), spec)
    out.append(Check("sign_zero_diagonal", "block-diagonal coefficients give a sign symbol with zero diagonal blocks",
                     max(bvp.sign_blocks(diag.op)), 1e-10))
    return out


_RUNNERS = {name: globals()[f"suite_{name}"] for name in SUITES}


def run_suite(name: str, seed: int) -> dict:
    if name not in _RUNNERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    checks = _RUNNERS[name](seed)
    return {"suite": name, "seed": seed, "checks": [c.to_dict() for c in checks],
            "passed": all(c.passed for c in checks)}
