"""Besov norms of analytic type and their classical dyadic counterpart.

The analytic norm cuts a symbol with the lattice bump family, measures
each synthesized piece in L^p, weights by the anisotropic power of the
lattice point, and takes an l^q sum.  The classical norm replaces the
lattice by dyadic shells of the eigenvalue function N(lambda).  Norm
evaluations return report dicts that serialize directly to JSON.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import delta_power, membership
from .lattice import BumpFamily, LatticeSpec, _smooth_step
from .nilgroup import GridFunction, SiegelData, integrate
from .spectral import (
    ScalarSymbol,
    f_transform,
    n_lambda,
    symbol_points,
    synthesize,
)


@dataclass(frozen=True)
class BesovParams:
    """Smoothness s (vector for analytic norms, scalar for classical),
    integrability p and summation exponent q, both in (0, inf]."""

    s: object
    p: float
    q: float

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be positive (inf allowed)")

    def to_dict(self) -> dict:
        s = self.s
        return {
            "s": s.tolist() if isinstance(s, np.ndarray) else s,
            "p": self.p,
            "q": self.q,
        }


def lp_norm(u: GridFunction, p: float) -> float:
    """L^p norm with the grid's cell measure; sup norm for p = inf."""
    a = np.abs(u.values)
    if np.isinf(p):
        return float(np.max(a))
    return float(np.sum(a**p) * u.grid.cell_measure) ** (1.0 / p)


def lq_norm(values, q: float) -> float:
    a = np.abs(np.asarray(values, dtype=float))
    if a.size == 0:
        return 0.0
    if np.isinf(q):
        return float(np.max(a))
    return float(np.sum(a**q)) ** (1.0 / q)


def _analytic_pieces(data: SiegelData, sym: ScalarSymbol, spec: LatticeSpec,
                     bumps: BumpFamily, grid, constants, symmetrized: bool):
    """Synthesized per-index pieces of the symbol, skipping empty cuts.

    Raises when the symbol carries mass off the cone or outside the
    covered region (where the raw bump sum drops below 1).
    """
    pts = symbol_points(sym)
    mask = sym.values != 0
    if not np.any(mask):
        return []
    live = pts[mask]
    if not np.all(membership(data.cone, "dual", live)):
        raise ValueError("symbol support leaves the open dual cone")
    raw = bumps.raw_matrix(live)
    if float(np.min(np.sum(raw, axis=0))) < 1.0 - 1e-8:
        raise ValueError("symbol support escapes the region covered by the lattice")
    weights_kn = bumps.evaluate_all(live)
    if symmetrized:
        weights_kn = weights_kn**2
    pieces = []
    for k in range(len(spec)):
        w = weights_kn[k]
        if not np.any(w != 0):
            continue
        cut = np.zeros_like(sym.values)
        cut[mask] = sym.values[mask] * w
        piece_sym = ScalarSymbol(sym.cone, sym.axes, cut, sym.weights, sym.support)
        pieces.append((k, spec.points[k], synthesize(data, piece_sym, grid, constants)))
    return pieces


def _assemble(cone, pieces, params: BesovParams) -> dict:
    per_index = []
    seq = []
    for k, lam, piece in pieces:
        weight = float(delta_power(cone, "dual", np.asarray(params.s, dtype=float), lam))
        lp = lp_norm(piece, params.p)
        per_index.append({"k": int(k), "lambda": np.asarray(lam).tolist(),
                          "weight": weight, "lp": lp})
        seq.append(weight * lp)
    return {"params": params.to_dict(), "per_index": per_index,
            "total": lq_norm(seq, params.q)}


def besov_analytic(data: SiegelData, sym: ScalarSymbol, params: BesovParams,
                   spec: LatticeSpec, bumps: BumpFamily, grid,
                   constants=None, symmetrized: bool = False) -> dict:
    """Lattice Besov norm report of a symbol of analytic type.

    symmetrized squares the bump cut, matching two-sided convolution
    with a partition_sq family.
    """
    s = np.asarray(params.s, dtype=float)
    if s.shape != (data.cone.rank,):
        raise ValueError("analytic smoothness must have one entry per rank")
    pieces = _analytic_pieces(data, sym, spec, bumps, grid, constants, symmetrized)
    return _assemble(data.cone, pieces, params)


def smooth_cutoff(y, n0: float) -> np.ndarray:
    """C^2 plateau function: 1 below 2*n0, 0 above 3*n0."""
    y = np.asarray(y, dtype=float)
    return _smooth_step((y - 2.0 * n0) / n0)


def eta_window(y, n0: float) -> np.ndarray:
    """Dyadic window pinched between the indicators of N0*[3/4, 2] and
    N0*[1/2, 4]; the scaled family eta(4^{-j} y) sums to 1 for y > 0."""
    y = np.asarray(y, dtype=float)
    return smooth_cutoff(y, n0) - smooth_cutoff(4.0 * y, n0)


def besov_classical(data: SiegelData, u, params: BesovParams, grid=None,
                    constants=None) -> dict:
    """Dyadic Besov norm through shells of the eigenvalue function.

    Grid functions are accepted only over abelian groups (E = 0), where
    the spectrum is plain Fourier; elsewhere pass a ScalarSymbol.  The
    zero frequency carries no window and drops out, as in the continuum.
    """
    s = params.s
    if isinstance(s, np.ndarray) or isinstance(s, (list, tuple)):
        raise ValueError("classical smoothness is a single scalar")
    s = float(s)
    n0 = float(n_lambda(data, data.cone.e_dual))
    if isinstance(u, GridFunction):
        if data.n != 0:
            raise ValueError("grid functions are classical input only for abelian groups")
        grid = u.grid
        hat = f_transform(grid, u.values)
        axes = [grid.dual_axes[i] for i in range(data.m)]
        lam = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        nvals = n_lambda(data, lam)

        def piece(j):
            w = eta_window(4.0**(-j) * nvals, n0)
            if not np.any(w != 0):
                return None
            return GridFunction(grid, f_transform(grid, hat * w, inverse=True))
    elif isinstance(u, ScalarSymbol):
        if grid is None:
            raise ValueError("symbol input needs a synthesis grid")
        nvals = n_lambda(data, symbol_points(u))

        def piece(j):
            w = eta_window(4.0**(-j) * nvals, n0)
            vals = u.values * w
            if not np.any(vals != 0):
                return None
            return synthesize(data, ScalarSymbol(u.cone, u.axes, vals, u.weights, u.support),
                              grid, constants)
    else:
        raise TypeError("expected a GridFunction or a ScalarSymbol")

    positive = nvals[nvals > 0]
    if positive.size == 0:
        return {"params": params.to_dict(), "per_index": [], "total": 0.0}
    j_lo = int(np.floor(np.log(np.min(positive) / (3.0 * n0)) / np.log(4.0)))
    j_hi = int(np.ceil(np.log(2.0 * np.max(positive) / n0) / np.log(4.0)))
    per_index = []
    seq = []
    for j in range(j_lo, j_hi + 1):
        g = piece(j)
        if g is None:
            continue
        lp = lp_norm(g, params.p)
        per_index.append({"j": j, "weight": 2.0 ** (s * j), "lp": lp})
        seq.append(2.0 ** (s * j) * lp)
    return {"params": params.to_dict(), "per_index": per_index, "total": lq_norm(seq, params.q)}


def duality_pairing(data: SiegelData, sym_u: ScalarSymbol, sym_v: ScalarSymbol,
                    spec: LatticeSpec, bumps: BumpFamily, grid, constants=None) -> complex:
    """Sum over the lattice of L^2 pairings of bump cuts.

    With a partition_sq family the bump squares sum to one, so this
    equals the weighted symbol pairing c_pl int sigma_u conj(sigma_v)
    Delta'^{-b}; any other mode is rejected.
    """
    if bumps.mode != "partition_sq":
        raise ValueError("duality pairing needs a partition_sq bump family")
    pu = {k: g for k, _, g in _analytic_pieces(data, sym_u, spec, bumps, grid, constants, False)}
    pv = {k: g for k, _, g in _analytic_pieces(data, sym_v, spec, bumps, grid, constants, False)}
    total = 0.0 + 0.0j
    for k in pu.keys() & pv.keys():
        total += integrate(GridFunction(grid, pu[k].values * np.conj(pv[k].values)))
    return complex(total)


def embedding_ratio(data: SiegelData, sym: ScalarSymbol, params_from: BesovParams,
                    params_to: BesovParams, spec: LatticeSpec, bumps: BumpFamily,
                    grid, constants=None) -> dict:
    """Norm ratio along the Sobolev-type embedding line.

    Valid only for p, q nondecreasing and target smoothness shifted by
    (1/p1 - 1/p2)(b + d); anything else is rejected before computing.
    """
    p1, p2 = params_from.p, params_to.p
    q1, q2 = params_from.q, params_to.q
    if p1 > p2 or q1 > q2:
        raise ValueError("embedding needs p and q nondecreasing")
    inv1 = 0.0 if np.isinf(p1) else 1.0 / p1
    inv2 = 0.0 if np.isinf(p2) else 1.0 / p2
    s1 = np.asarray(params_from.s, dtype=float)
    s2 = np.asarray(params_to.s, dtype=float)
    shift = (inv1 - inv2) * (data.b + data.cone.d)
    if not np.allclose(s2, s1 + shift, atol=1e-10):
        raise ValueError("target smoothness must sit on the embedding line")
    pieces = _analytic_pieces(data, sym, spec, bumps, grid, constants, False)
    rep1 = _assemble(data.cone, pieces, params_from)
    rep2 = _assemble(data.cone, pieces, params_to)
    if rep1["total"] == 0.0:
        raise ValueError("source norm vanishes; ratio undefined")
    return {"norm_from": rep1["total"], "norm_to": rep2["total"],
            "ratio": rep2["total"] / rep1["total"]}
