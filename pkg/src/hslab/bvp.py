"""Constant-coefficient boundary value problems through Cauchy operators.

For a coefficient matrix ``A`` with ``B = hat(A)`` the conormal gradient
``F = [dnu_A u; grad_par u]`` of a solution of ``div A grad u = 0`` solves
``dF/dt + D B F = 0``.  Every operation here works per frequency on the
torus lattice; the zero mode is pinned to zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .calculus import (_FAULTS, CoefficientMatrix, MultiplierOp, accretivity_check, dirac_projector,
                       dirac_symbol, hat_transform)
from .exponents import Exponent
from .halfspace import Field, GridSpec, WhitneyParameter
from .holo import calderon_sibling, sgp
from . import quasinorms


@dataclass(eq=False)
class BVPSetup:
    A: CoefficientMatrix
    spec: GridSpec
    problem: str = "regularity"
    exponent: Exponent | None = None
    B: CoefficientMatrix = field(init=False)
    op: MultiplierOp = field(init=False)
    op_bd: MultiplierOp = field(init=False)

    def __post_init__(self):
        if self.problem not in ("regularity", "neumann"):
            raise ValueError("problem must be 'regularity' or 'neumann'")
        if (self.A.m, self.A.n) != (self.spec.m, self.spec.n):
            raise ValueError("coefficients do not match the grid")
        self.kappa = accretivity_check(self.A)
        if self.kappa <= 0:
            raise ValueError(f"coefficients are not strictly accretive (kappa={self.kappa:.3g})")
        self.B = hat_transform(self.A)
        self.op = MultiplierOp(self.spec, self.B, "DB")
        self.op_bd = MultiplierOp(self.spec, self.B, "BD")

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def n(self) -> int:
        return self.spec.n

    def adjoint(self) -> "BVPSetup":
        return BVPSetup(self.A.adjoint(), self.spec, self.problem, self.exponent)


def _levels_to_field(spec: GridSpec, hat: np.ndarray) -> Field:
    """``(K, F, ch)`` lattice coefficients to a Field."""
    shape = (spec.K,) + spec.spatial_shape + (hat.shape[-1],)
    vals = np.fft.ifftn(hat.reshape(shape), axes=tuple(range(1, spec.n + 1)))
    return Field(spec, vals)


def _field_hat(F: Field) -> np.ndarray:
    spec = F.spec
    return np.fft.fftn(F.values, axes=tuple(range(1, spec.n + 1))).reshape(spec.K, -1, F.channels)


def _cauchy_values(op: MultiplierOp, ts, sign: int = 1) -> np.ndarray:
    """``e^{-|t| [lam]} chi^sign(lam)`` on the range, shape ``(T, F, 2m)``."""
    ts = np.abs(np.asarray(ts, dtype=float))
    lam = op.lam
    fold = np.where(lam.real > 0, lam, -lam)
    keep = ((sign * lam.real) > 0) & op.live[:, None]
    out = np.where(keep[None], np.exp(-ts[:, None, None] * fold[None]), 0.0)
    return -out if sign > 0 and _FAULTS["chi_plus_sign"] else out


def check_range(setup: BVPSetup, f0: np.ndarray) -> np.ndarray:
    """Lattice coefficients of ``f0`` projected onto the range of ``D``, warning if anything was lost."""
    op = setup.op
    fh = op.to_hat(np.asarray(f0, dtype=np.complex128))
    proj = np.einsum("fij,fj->fi", dirac_projector(op.xi, setup.m), fh)
    lost = np.linalg.norm(fh - proj)
    if lost > 1e-10 * max(np.linalg.norm(fh), 1e-300):
        warnings.warn(f"datum has a nullspace component of relative size "
                      f"{lost / np.linalg.norm(fh):.2e}; it was projected out", stacklevel=3)
    return proj


def cauchy_solve(setup: BVPSetup, f0: np.ndarray) -> Field:
    """``F(t) = e^{-t DB} chi+(DB) f0`` at every level of the grid."""
    op = setup.op
    fh = check_range(setup, f0)
    coords = np.einsum("fij,fj->fi", op._R, fh)
    vals = _cauchy_values(op, setup.spec.t)
    out = np.einsum("fij,tfj->tfi", op._L, vals * coords[None])
    return _levels_to_field(setup.spec, out)


def cauchy_residual(setup: BVPSetup, f0: np.ndarray) -> float:
    """Max per-frequency ``|dF/dt + M F|`` relative to ``|f0_hat|``, with the exact t-derivative."""
    op = setup.op
    fh = check_range(setup, f0)
    coords = np.einsum("fij,fj->fi", op._R, fh)
    vals = _cauchy_values(op, setup.spec.t)
    fold = np.where(op.lam.real > 0, op.lam, -op.lam)
    F = np.einsum("fij,tfj->tfi", op._L, vals * coords[None])
    dF = -np.einsum("fij,tfj->tfi", op._L, fold[None] * vals * coords[None])
    MF = np.einsum("fij,tfj->tfi", op.matrix(), F)
    scale = np.abs(fh).max()
    return float(np.abs(dF + MF).max() / scale) if scale else 0.0


def trace_recover(setup: BVPSetup, F: Field, N: int = 2) -> tuple:
    """Boundary trace of a Cauchy-type field by contraction with a sibling of ``sgp``.

    Returns ``(f0, mismatch)`` where ``mismatch`` is the relative L^2 gap
    between ``cauchy_solve(f0)`` and ``F``.
    """
    from .calculus import s_contract
    psi, _ = calderon_sibling(sgp(), N)
    f0 = s_contract(psi, setup.op, F)
    G = cauchy_solve(setup, f0)
    gap = quasinorms.l2s_norm(G - F).value / max(quasinorms.l2s_norm(F).value, 1e-300)
    return f0, float(gap)


# ---------------------------------------------------------------------------
# recovering the potential


def _pinv_dirac(xi: np.ndarray, m: int) -> np.ndarray:
    """Pseudo-inverse ``D_hat / |xi|^2`` (zero at ``xi = 0``)."""
    k2 = (xi ** 2).sum(axis=1)
    return dirac_symbol(xi, m) / np.where(k2 > 0, k2, 1.0)[:, None, None]


@dataclass
class Potential:
    """A solution ``u`` with its conormal gradient, both on the grid."""

    u: Field
    gradient: Field
    lifted: np.ndarray          # lattice coefficients of the intermediate lift (F, N)


def recover_u(setup: BVPSetup, f0) -> Potential:
    """The potential whose conormal gradient is the Cauchy extension of ``f0``.

    ``f0`` may also be a Cauchy-type Field, whose trace is recovered first.

    With ``F0 = D^+ f0`` the potential is ``u = -(P_D C+_{BD} P_{BD} F0)_perp``
    level by level; the conormal gradient is rebuilt from ``u`` through the
    exact t-derivative of the Cauchy operator.
    """
    spec, m = setup.spec, setup.m
    op_bd = setup.op_bd
    if isinstance(f0, Field):
        f0, _ = trace_recover(setup, f0)
    fh = check_range(setup, f0)
    xi = op_bd.xi
    lift = np.einsum("fij,fj->fi", _pinv_dirac(xi, m), fh)
    proj_d = dirac_projector(xi, m)
    coords = np.einsum("fij,fj->fi", op_bd._R, lift)      # P_BD folded into R
    vals = _cauchy_values(op_bd, spec.t)
    CF = np.einsum("fij,tfj->tfi", op_bd._L, vals * coords[None])
    u_hat = -np.einsum("fij,tfj->tfi", proj_d, CF)[..., :m]
    # d/dt C+ = -BD C+, so d/dt u = (P_D BD C+ P_BD F0)_perp
    fold = np.where(op_bd.lam.real > 0, op_bd.lam, -op_bd.lam)
    dCF = -np.einsum("fij,tfj->tfi", op_bd._L, fold[None] * vals * coords[None])
    dt_u = -np.einsum("fij,tfj->tfi", proj_d, dCF)[..., :m]
    grad_par = 1j * xi[None, :, :, None] * u_hat[:, :, None, :]       # (K, F, n, m)
    grad_par = grad_par.reshape(spec.K, -1, spec.n * m)
    blocks = setup.A.blocks()
    conormal = (np.einsum("ab,tfb->tfa", blocks["pp"], dt_u)
                + np.einsum("ab,tfb->tfa", blocks["pt"], grad_par))
    grad = np.concatenate([conormal, grad_par], axis=-1)
    return Potential(_levels_to_field(spec, u_hat), _levels_to_field(spec, grad), lift)


# ---------------------------------------------------------------------------
# layer potentials


def _embed_perp(setup: BVPSetup, f: np.ndarray) -> np.ndarray:
    """Lattice coefficients of ``[f; 0]`` for a ``C^m`` boundary field."""
    f = np.asarray(f, dtype=np.complex128)
    if f.shape == setup.spec.spatial_shape and setup.m == 1:
        f = f[..., None]
    fh = setup.op.to_hat(f)
    out = np.zeros((fh.shape[0], setup.op.N), dtype=np.complex128)
    out[:, :setup.m] = fh
    return out


def _cauchy_symbol_apply(op: MultiplierOp, t: float, vec: np.ndarray) -> np.ndarray:
    """``C^{sgn t}(t) vec`` per frequency, ``t != 0``."""
    sign = 1 if t > 0 else -1
    vals = _cauchy_values(op, [t], sign)[0]
    coords = np.einsum("fij,fj->fi", op._R, vec)
    return np.einsum("fij,fj->fi", op._L, vals * coords)


def conormal_single_layer_hat(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    """``grad_A S_t f = sgn(t) C^{sgn t}_{DB} [f; 0]`` on the lattice.

    ``t = +0`` and ``t = -0`` (signed zeros) give the one-sided boundary limits.
    """
    vec = _embed_perp(setup, f)
    sign = math.copysign(1.0, t)
    C = _limit(setup.op, vec, int(sign)) if t == 0 else _cauchy_symbol_apply(setup.op, t, vec)
    return sign * C


def _limit(op: MultiplierOp, vec: np.ndarray, sign: int) -> np.ndarray:
    return np.einsum("fij,fj->fi", op.chi(sign), vec)


def single_layer_hat(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    """``S_t f = -sgn(t) (D^-1 C^{sgn t}_{DB} [f; 0])_perp`` on the lattice."""
    if t == 0:
        raise ValueError("t = 0 is the jump; use the one-sided limits")
    vec = _embed_perp(setup, f)
    sign = 1.0 if t > 0 else -1.0
    C = _cauchy_symbol_apply(setup.op, t, vec)
    return -sign * np.einsum("fij,fj->fi", _pinv_dirac(setup.op.xi, setup.m), C)[:, :setup.m]


def double_layer_hat(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    """``D_t f = -sgn(t) (P_D C^{sgn t}_{BD} P_{BD} [f; 0])_perp`` on the lattice.

    ``t = +0`` and ``t = -0`` (signed zeros) give the one-sided boundary limits.
    """
    vec = _embed_perp(setup, f)
    sign = math.copysign(1.0, t)
    op = setup.op_bd
    if t == 0:
        C = _limit(op, vec, int(sign))
    else:
        C = _cauchy_symbol_apply(op, t, vec)
    return -sign * np.einsum("fij,fj->fi", dirac_projector(op.xi, setup.m), C)[:, :setup.m]


def conormal_single_layer(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    return setup.op.from_hat(conormal_single_layer_hat(setup, f, t))


def single_layer(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    return setup.op.from_hat(single_layer_hat(setup, f, t))


def double_layer(setup: BVPSetup, f: np.ndarray, t: float) -> np.ndarray:
    return setup.op.from_hat(double_layer_hat(setup, f, t))


def jump_errors(setup: BVPSetup, f: np.ndarray) -> dict:
    """Per-frequency jumps of the conormal single layer and the double layer.

    The zero mode carries no range component and is excluded.
    """
    live = setup.op.live
    vec = _embed_perp(setup, f)
    js = conormal_single_layer_hat(setup, f, 0.0) - conormal_single_layer_hat(setup, f, -0.0)
    jd = double_layer_hat(setup, f, 0.0) - double_layer_hat(setup, f, -0.0)
    scale = max(np.abs(vec[live]).max(), 1e-300)
    return {"single": float(np.abs(js - vec)[live].max() / scale),
            "double": float(np.abs(jd + vec[:, :setup.m])[live].max() / scale)}


# ---------------------------------------------------------------------------
# well-posedness probes


def positive_subspace(op: MultiplierOp) -> tuple:
    """Orthonormal bases of the positive spectral subspaces, per live frequency.

    Returns ``(index, Q)`` where ``Q[f]`` is ``N x d_f`` (``d_f`` the number
    of eigenvalues in the right half-plane).
    """
    out = []
    for f in np.nonzero(op.live)[0]:
        cols = op._L[f][:, op.lam[f].real > 0]
        Q, _ = np.linalg.qr(cols)
        out.append((f, Q))
    return out


def wp_probe(setup: BVPSetup, component: str = "perp", exponent: Exponent | None = None) -> dict:
    """Singular values of the boundary map from the positive subspace to one component.

    ``perp`` maps onto ``C^m`` through the transversal entries; ``par``
    maps onto the tangential part along ``xi`` in each ``m``-block.  A
    uniform lower bound on the smallest singular value is the symbol-level
    form of L^2 invertibility.
    """
    if component not in ("perp", "par"):
        raise ValueError("component must be 'perp' or 'par'")
    m = setup.m
    label = "plancherel-exact"
    if exponent is not None and not (exponent.is_finite and exponent.p == 2 and exponent.theta == 0):
        label = "exploratory"
    mins, conds = [], []
    for f, Q in positive_subspace(setup.op):
        if Q.shape[1] != m:
            return {"status": "structural-obstruction", "frequency": int(f),
                    "dimension": int(Q.shape[1]), "target": m, "label": label}
        if component == "perp":
            Nmap = Q[:m]
        else:
            xi = setup.op.xi[f]
            unit = xi / np.linalg.norm(xi)
            P = np.kron(unit[:, None], np.eye(m))          # (n m, m)
            Nmap = P.conj().T @ Q[m:]
        sv = np.linalg.svd(Nmap, compute_uv=False)
        mins.append(sv[-1])
        conds.append(sv[0] / sv[-1] if sv[-1] > 0 else math.inf)
    mins = np.asarray(mins)
    return {"status": "ok", "min_singular": mins, "global_min": float(mins.min()),
            "max_singular_min": float(mins.max()), "condition": float(max(conds)), "label": label}


def solve_boundary_problem(setup: BVPSetup, datum: np.ndarray) -> np.ndarray:
    """Boundary value of the conormal gradient for a ``C^m`` datum.

    For the regularity problem ``datum`` is the Dirichlet trace, whose
    tangential gradient is prescribed; for the Neumann problem it is the
    conormal derivative.  Per frequency the positive spectral subspace is
    mapped onto the datum by least squares.  Raises when the map is not
    invertible at some frequency.
    """
    m, n = setup.m, setup.n
    datum = np.asarray(datum, dtype=np.complex128)
    if datum.shape == setup.spec.spatial_shape and m == 1:
        datum = datum[..., None]
    dh = setup.op.to_hat(datum)
    out = np.zeros((dh.shape[0], setup.op.N), dtype=np.complex128)
    for f, Q in positive_subspace(setup.op):
        if Q.shape[1] != m:
            raise ValueError(f"positive subspace has dimension {Q.shape[1]} at frequency {f}, expected {m}")
        if setup.problem == "regularity":
            M = Q[m:]
            rhs = (1j * setup.op.xi[f][:, None] * dh[f][None, :]).reshape(-1)
        else:
            M, rhs = Q[:m], dh[f]
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] < 1e-12 * max(sv[0], 1.0):
            raise ValueError(f"boundary map is singular at frequency {f}")
        c = np.linalg.lstsq(M, rhs, rcond=None)[0]
        out[f] = Q @ c
    return setup.op.from_hat(out)


def sign_blocks(op: MultiplierOp) -> tuple:
    """Largest entries of the two diagonal blocks of ``sgn(M)`` over the lattice."""
    S = op.sign()
    m = op.m
    return float(np.abs(S[:, :m, :m]).max()), float(np.abs(S[:, m:, m:]).max())


# ---------------------------------------------------------------------------
# decay and boundary traces


def decay_probe(F: Field, window=(1.0, 20.0)) -> dict:
    """``sup_x ||F(t)||_{L^2(B(x,1))}`` per level and the fitted exponential rate."""
    spec = F.spec
    quasinorms._check_radius(spec, 1.0)
    norms = np.array([
        math.sqrt(quasinorms.ball_sum(spec, F.sq()[k], 1.0).max()) for k in range(spec.K)])
    sel = (spec.t >= window[0]) & (spec.t <= window[1]) & (norms > 1e-250)
    rate = math.nan
    if sel.sum() >= 2:
        rate = float(-np.polyfit(spec.t[sel], np.log(norms[sel]), 1)[0])
    return {"t": spec.t.copy(), "norms": norms, "rate": rate}


def whitney_trace(u: Field, c: WhitneyParameter = WhitneyParameter(), levels: int = 4) -> tuple:
    """Whitney averages of ``u`` at the smallest levels and their successive differences.

    Returns ``(v, rates)`` with ``v`` the average at the finest level and
    ``rates[k] = max |v_k - v_{k+1}|``.
    """
    spec = u.spec
    lo, hi = spec.t_edges[:, 0], spec.t_edges[:, 1]
    avgs = []
    for a in range(min(levels, spec.K)):
        t = spec.t[a]
        tlen = np.clip(np.minimum(hi, c.c1 * t) - np.maximum(lo, t / c.c1), 0.0, None)
        ks = np.nonzero(tlen)[0]
        slab = np.tensordot(tlen[ks], u.values[ks], axes=1)
        vol = quasinorms.ball_sum(spec, np.ones(spec.spatial_shape), c.c0 * t)
        mean = np.stack([quasinorms.ball_sum(spec, slab[..., ch] + 0j, c.c0 * t)
                         for ch in range(u.channels)], axis=-1)
        avgs.append(mean / (vol[..., None] * tlen[ks].sum()))
    rates = [float(np.abs(avgs[i] - avgs[i + 1]).max()) for i in range(len(avgs) - 1)]
    return avgs[0], rates
