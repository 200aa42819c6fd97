"""Maximal functions, band-limited sampling bounds, and Young-type
convolution checks on the group.

Balls live in the gauge quasi-distance (|zeta|^4 + |x|^2)^{1/4}-style
metric exposed by the group module, where dilation by rho scales
distances by rho^{1/2}; a gauge ball of radius delta therefore has Haar
volume proportional to delta^{2Q}.  Grid maxima and minima over sampled
balls stand in for true suprema, which is sound at >= 4 samples per
delta for band-limited inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .besov import lp_norm, lq_norm
from .nilgroup import Grid, GridFunction, GroupPoint, SiegelData, quasi_distance
from .spectral import ScalarSymbol, convolve, f_transform, synthesize


@dataclass(frozen=True)
class GroupLattice:
    """Strided sublattice of a grid, 2*delta-separated in the gauge."""

    data: SiegelData
    grid: Grid
    delta: float
    R: float
    strides: tuple
    offsets: tuple

    def axis_indices(self, axis: int) -> np.ndarray:
        c = self.grid.counts[axis]
        return np.arange(self.offsets[axis], c, self.strides[axis])

    def index_mesh(self):
        axes = [self.axis_indices(i) for i in range(len(self.grid.counts))]
        return np.meshgrid(*axes, indexing="ij")

    def count(self) -> int:
        return int(np.prod([self.axis_indices(i).size for i in range(len(self.grid.counts))]))


def _axis_scales(data: SiegelData, grid: Grid):
    """Gauge scale of one grid step per axis: E steps count linearly,
    F steps by square root."""
    spac = grid.spacings
    e_scale = spac[: 2 * data.n]
    f_scale = np.sqrt(spac[2 * data.n :])
    return e_scale, f_scale


def build_group_lattice(data: SiegelData, grid: Grid, delta: float) -> GroupLattice:
    """Cubic sublattice with single-axis steps of gauge length >= 2*delta.

    Any two distinct points differ along some axis, and the gauge
    dominates each axis displacement, so 2*delta separation is exact.
    The covering radius is measured on the worst corner and reported
    as R.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    e_scale, f_scale = _axis_scales(data, grid)
    if np.any(e_scale > delta / 4.0) or np.any(f_scale > np.sqrt(delta**2 / 4.0)):
        raise ValueError("grid too coarse: need at least 4 samples per delta")
    strides = []
    for s in e_scale:
        strides.append(int(np.ceil(2.0 * delta / s)))
    for s in grid.spacings[2 * data.n :]:
        strides.append(int(np.ceil((2.0 * delta) ** 2 / s)))
    strides = tuple(min(st, c) for st, c in zip(strides, grid.counts))
    offsets = tuple(int(st // 2) for st in strides)
    lattice = GroupLattice(data, grid, float(delta), 0.0, strides, offsets)
    # covering radius: worst corner of one stride cell, measured exactly
    corner_e = np.array([0.5 * st * s for st, s in zip(strides[: 2 * data.n],
                                                       grid.spacings[: 2 * data.n])])
    corner_f = np.array([0.5 * st * s for st, s in zip(strides[2 * data.n :],
                                                       grid.spacings[2 * data.n :])])
    zeta = (corner_e[0::2] + 1j * corner_e[1::2]) if data.n else np.zeros(0, dtype=complex)
    g0 = GroupPoint(np.zeros(data.n, dtype=complex), np.zeros(data.m))
    gc = GroupPoint(zeta, corner_f)
    r_cover = float(quasi_distance(data, g0, gc)) / delta
    return GroupLattice(data, grid, float(delta), max(r_cover, 1.0), strides, offsets)


def _lattice_group_points(lat: GroupLattice):
    mesh = lat.index_mesh()
    grid = lat.grid
    n = lat.data.n
    coords = [grid.axes[i][mesh[i]] for i in range(len(mesh))]
    if n:
        zeta = np.stack([coords[2 * i] + 1j * coords[2 * i + 1] for i in range(n)], axis=-1)
    else:
        zeta = np.zeros(mesh[0].shape + (0,), dtype=complex)
    x = np.stack(coords[2 * n :], axis=-1)
    return GroupPoint(zeta, x)


def sample_bounds(data: SiegelData, u: GridFunction, lat: GroupLattice, p: float) -> dict:
    """Two-sided sampling functionals delta^{2Q/p} l^p(ball max / min).

    The max version dominates the norm for band-limited u; the min
    version matches it only below a bandwidth-dependent delta, and is
    reported without any claim beyond the computed numbers.
    """
    if lat.grid is not u.grid:
        raise ValueError("lattice and function live on different grids")
    q_hom = data.n + data.m
    grid = u.grid
    n = data.n
    absu = np.abs(u.values)
    e_wid = [int(np.ceil(lat.R * lat.delta / s)) for s in grid.spacings[: 2 * n]]
    f_wid = [int(np.ceil((lat.R * lat.delta) ** 2 / s)) for s in grid.spacings[2 * n :]]
    # central twist widens the F window by 2 |Im Phi| at the box corner
    if n:
        corner = np.array([grid.halfwidths[2 * i] + 1j * grid.halfwidths[2 * i + 1]
                           for i in range(n)])
        reach = np.array([lat.R * lat.delta * np.sqrt(2.0)] * n)
        twist = 2.0 * np.abs(np.einsum("a,b,abm->m", corner, reach, lat.data.phi))
        f_wid = [w + int(np.ceil(t / s)) for w, t, s in
                 zip(f_wid, twist, grid.spacings[2 * n :])]
    widths = e_wid + f_wid
    centers = _lattice_group_points(lat)
    mesh = lat.index_mesh()
    flat_idx = np.stack([m.ravel() for m in mesh], axis=-1)
    czeta = centers.zeta.reshape(-1, n) if n else np.zeros((flat_idx.shape[0], 0), complex)
    cx = centers.x.reshape(-1, data.m)
    maxima = np.empty(flat_idx.shape[0])
    minima = np.empty(flat_idx.shape[0])
    for j, idx in enumerate(flat_idx):
        sl = tuple(slice(max(0, i - w), min(c, i + w + 1))
                   for i, w, c in zip(idx, widths, grid.counts))
        block = absu[sl]
        sub = [grid.axes[a][sl[a]] for a in range(len(sl))]
        smesh = np.meshgrid(*sub, indexing="ij")
        if n:
            zeta = np.stack([smesh[2 * i] + 1j * smesh[2 * i + 1] for i in range(n)], axis=-1)
        else:
            zeta = np.zeros(smesh[0].shape + (0,), dtype=complex)
        x = np.stack(smesh[2 * n :], axis=-1)
        g = GroupPoint(zeta, x)
        center = GroupPoint(czeta[j], cx[j])
        d = quasi_distance(data, center, g)
        inside = d <= lat.R * lat.delta
        vals = block[inside]
        maxima[j] = np.max(vals) if vals.size else 0.0
        minima[j] = np.min(vals) if vals.size else 0.0
    scale = lat.delta ** (2.0 * q_hom / p) if np.isfinite(p) else 1.0
    return {
        "upper": scale * lq_norm(maxima, p),
        "lower": scale * lq_norm(minima, p),
        "true_norm": lp_norm(u, p),
        "delta": lat.delta,
        "R": lat.R,
        "count": int(flat_idx.shape[0]),
    }


def _radius_menu(data: SiegelData, grid: Grid):
    base = float(np.min(np.concatenate([
        np.asarray(grid.halfwidths[: 2 * data.n], dtype=float),
        np.sqrt(np.asarray(grid.halfwidths[2 * data.n :], dtype=float)),
    ])))
    return [base * 2.0**k for k in range(-3, 4)]


def maximal_function(data: SiegelData, u: GridFunction, p: float, radii=None) -> GridFunction:
    """Largest gauge-box average of |u|^p over a geometric radius menu.

    Boxes of E half-width r and F half-width r^2 are the gauge balls up
    to a fixed factor; averages use periodic wrap, matching the FFT
    conventions elsewhere.
    """
    grid = u.grid
    if np.isinf(p):
        return GridFunction(grid, np.full(u.values.shape, np.max(np.abs(u.values))))
    if p <= 0:
        raise ValueError("p must be positive")
    if radii is None:
        radii = _radius_menu(data, grid)
    power = np.abs(u.values) ** p
    n = data.n
    best = np.zeros_like(power)
    for r in radii:
        size = [2 * int(np.ceil(r / s)) + 1 for s in grid.spacings[: 2 * n]]
        size += [2 * int(np.ceil(r**2 / s)) + 1 for s in grid.spacings[2 * n :]]
        size = [min(sz, c) for sz, c in zip(size, grid.counts)]
        avg = ndimage.uniform_filter(power, size=size, mode="wrap")
        np.maximum(best, avg, out=best)
    return GridFunction(grid, best ** (1.0 / p))


def derivative_f(data: SiegelData, u: GridFunction, alpha) -> GridFunction:
    """Left-invariant derivative along central (F) coordinates, spectral.

    Central translations commute with the group law, so these are plain
    coordinate derivatives computed exactly on the F Fourier side.
    """
    alpha = np.asarray(alpha, dtype=int)
    if alpha.shape != (data.m,) or np.any(alpha < 0):
        raise ValueError("multi-index must have one nonnegative entry per F coordinate")
    grid = u.grid
    hat = f_transform(grid, u.values)
    axes = [grid.dual_axes[2 * data.n + i] for i in range(data.m)]
    lam = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mult = np.prod((1j * lam) ** alpha, axis=-1)
    shape = tuple(1 for _ in range(2 * data.n)) + mult.shape
    return GridFunction(grid, f_transform(grid, hat * mult.reshape(shape), inverse=True))


def pointwise_bound_check(data: SiegelData, sym: ScalarSymbol, p: float, alpha,
                          grid: Grid, constants=None, pairs: int = 1000,
                          seed: int = 0) -> dict:
    """Empirical constant in |Xu(g)| <= C (1 + d(g, g'))^{2Q/p} (M_p u)(g').

    Samples interior point pairs (wrap-around averages pollute the
    border) and reports ratio statistics; the constant is an observed
    maximum, not a bound.
    """
    u = synthesize(data, sym, grid, constants)
    xu = derivative_f(data, u, alpha)
    mp = maximal_function(data, u, p)
    q_hom = data.n + data.m
    rng = np.random.default_rng(seed)
    dims = len(grid.counts)
    lo = [c // 4 for c in grid.counts]
    hi = [3 * c // 4 for c in grid.counts]
    idx_a = np.stack([rng.integers(lo[i], hi[i], size=pairs) for i in range(dims)], axis=-1)
    idx_b = np.stack([rng.integers(lo[i], hi[i], size=pairs) for i in range(dims)], axis=-1)
    n = data.n

    def group_at(idx):
        coords = [grid.axes[i][idx[:, i]] for i in range(dims)]
        if n:
            zeta = np.stack([coords[2 * i] + 1j * coords[2 * i + 1] for i in range(n)], axis=-1)
        else:
            zeta = np.zeros((idx.shape[0], 0), dtype=complex)
        return GroupPoint(zeta, np.stack(coords[2 * n :], axis=-1))

    ga, gb = group_at(idx_a), group_at(idx_b)
    d = quasi_distance(data, gb, ga)
    lhs = np.abs(xu.values[tuple(idx_a.T)])
    rhs = (1.0 + d) ** (2.0 * q_hom / p) * mp.values[tuple(idx_b.T)]
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
    return {
        "max_ratio": float(np.max(ratio)),
        "median_ratio": float(np.median(ratio)),
        "pairs": pairs,
        "p": p,
        "alpha": np.asarray(alpha, dtype=int).tolist(),
    }


def _conjugate(p: float) -> float:
    p = max(1.0, p)
    if p == 1.0:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def young_check(data: SiegelData, sym_u: ScalarSymbol, sym_v: ScalarSymbol,
                p1: float, p2: float, p3: float, grid: Grid, constants=None) -> dict:
    """Ratio ||u*v||_{p3} / (||u||_{p1} ||v||_{p2}) for band-limited factors.

    The exponent relation 1/p1' + 1/p2' <= 1/p3' (conjugates of
    max(1, .)) is enforced; outside it the inequality is not claimed.
    """
    if p1 > p3 or p2 > p3:
        raise ValueError("need p1, p2 <= p3")
    lhs = (1.0 / _conjugate(p1)) + (1.0 / _conjugate(p2))
    rhs = 1.0 / _conjugate(p3)
    if lhs > rhs + 1e-12:
        raise ValueError("conjugate exponent relation fails; inequality not asserted")
    u = synthesize(data, sym_u, grid, constants)
    v = synthesize(data, sym_v, grid, constants)
    uv = convolve(data, u, v, "grid")
    nu, nv = lp_norm(u, p1), lp_norm(v, p2)
    nuv = lp_norm(uv, p3)
    denom = nu * nv
    return {
        "ratio": nuv / denom if denom > 0 else 0.0,
        "norm_u": nu,
        "norm_v": nv,
        "norm_conv": nuv,
        "p": [p1, p2, p3],
    }
