"""Scalar Fourier calculus for functions of analytic type.

Functions of analytic type are synthesized from scalar symbols living
on the dual cone: u = c * int sigma(lam) Delta'^{-b}(lam)
exp(-<lam, Phi(zeta)> + i<lam, x>) dlam.  The module provides the
eigenvalue function N(lam), synthesis (exact FFT path for symbols
sampled on the grid's dual lattice, plain quadrature otherwise),
symbol read-back, convolution on either side, Riemann-Liouville
multipliers, and measurement of the inversion and Plancherel
constants.  The constants are always measured, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import ConeDescriptor, delta_power, membership
from .nilgroup import Grid, GridFunction, SiegelData, phi_quadratic

_calibration_cache: dict = {}


@dataclass(frozen=True)
class ScalarSymbol:
    """Samples of a scalar spectral multiplier over the dual cone.

    axes are one-dimensional sample positions per dual coordinate
    (fftfreq order when the symbol sits on a grid's dual lattice);
    weights carry the quadrature measure and vanish off the cone.
    """

    cone: ConeDescriptor
    axes: tuple
    values: np.ndarray
    weights: np.ndarray
    support: dict

    def __post_init__(self):
        shape = tuple(len(ax) for ax in self.axes)
        if self.values.shape != shape or self.weights.shape != shape:
            raise ValueError("values and weights must match the axes mesh")


def symbol_points(sym: ScalarSymbol) -> np.ndarray:
    mesh = np.meshgrid(*sym.axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def symbol_from_function(cone: ConeDescriptor, fn, lo, hi, counts) -> ScalarSymbol:
    """Sample fn on a tensor trapezoid mesh over the box [lo, hi].

    Mesh points outside the open dual cone get zero value and weight,
    so the box may graze the boundary while the symbol stays supported
    compactly inside.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    if not (len(lo) == len(hi) == len(counts) == cone.ambient_dim):
        raise ValueError("box description must have one entry per dual coordinate")
    if np.any(hi <= lo) or np.any(counts < 2):
        raise ValueError("degenerate sampling box")
    axes = tuple(np.linspace(a, b, c) for a, b, c in zip(lo, hi, counts))
    wts_1d = []
    for ax in axes:
        w = np.full(ax.size, ax[1] - ax[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        wts_1d.append(w)
    weights = wts_1d[0]
    for w in wts_1d[1:]:
        weights = np.multiply.outer(weights, w)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = membership(cone, "dual", pts)
    vals = np.asarray(fn(pts), dtype=complex) * inside
    weights = weights * inside
    support = {"kind": "box", "lo": lo.tolist(), "hi": hi.tolist()}
    return ScalarSymbol(cone, axes, vals, weights, support)


def symbol_on_dual_lattice(data: SiegelData, grid: Grid, fn) -> ScalarSymbol:
    """Sample fn on the grid's dual F lattice; synthesis is then FFT-exact."""
    axes = tuple(grid.dual_axes[2 * data.n + i] for i in range(data.m))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = membership(data.cone, "dual", pts)
    vals = np.asarray(fn(pts), dtype=complex) * inside
    cell = float(np.prod([2.0 * np.pi / (c * d) for c, d in
                          zip(grid.counts[2 * data.n :], grid.spacings[2 * data.n :])]))
    weights = cell * inside.astype(float)
    return ScalarSymbol(data.cone, axes, vals, weights, {"kind": "dual_lattice"})


def zero_symbol_like(sym: ScalarSymbol) -> ScalarSymbol:
    return ScalarSymbol(sym.cone, sym.axes, np.zeros_like(sym.values), sym.weights, sym.support)


def n_lambda(data: SiegelData, lam, basis=None) -> np.ndarray:
    """Eigenvalue function (tr H_lam)^2 + |lam|^2, basis-independent.

    The trace may be computed in any complex orthonormal basis of E;
    for the degenerate E = 0 case this is plain |lam|^2.
    """
    lam = np.asarray(lam, dtype=float)
    if basis is None:
        trace = np.einsum("...m,aam->...", lam, data.phi).real
    else:
        basis = np.asarray(basis, dtype=complex)
        if not np.allclose(basis.conj().T @ basis, np.eye(data.n), atol=1e-10):
            raise ValueError("basis is not orthonormal")
        h = np.einsum("abm,...m->...ab", data.phi, lam)
        trace = np.einsum("ja,...ab,jb->...", basis, h, np.conj(basis)).real
    return trace**2 + np.sum(lam**2, axis=-1)


def _f_mesh(grid: Grid) -> np.ndarray:
    n, m = grid.data.n, grid.data.m
    axes = [grid.dual_axes[2 * n + i] for i in range(m)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def f_transform(grid: Grid, values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Discrete Fourier transform along the F axes with the continuum
    normalization: forward approximates int u e^{-i lam x} dx, and the
    pair is exactly inverse on the grid."""
    m = grid.data.m
    out = np.asarray(values, dtype=complex)
    first = out.ndim - m
    for i in range(m):
        axis = first + i
        gaxis = 2 * grid.data.n + i
        lam = grid.dual_axes[gaxis]
        h = float(grid.halfwidths[gaxis])
        d = float(grid.spacings[gaxis])
        shape = [1] * out.ndim
        shape[axis] = lam.size
        phase = np.exp(1j * lam * h).reshape(shape)
        if inverse:
            out = np.fft.ifft(out * np.conj(phase), axis=axis) / d
        else:
            out = np.fft.fft(out, axis=axis) * phase * d
    return out


def _weighted_symbol(data: SiegelData, sym: ScalarSymbol) -> np.ndarray:
    """sigma * Delta'^{-b} with the power evaluated only on the support."""
    mask = sym.values != 0
    out = np.zeros_like(sym.values)
    if np.any(mask):
        pts = symbol_points(sym)[mask]
        out[mask] = sym.values[mask] * delta_power(data.cone, "dual", -data.b, pts)
    return out


def _lattice_match(sym: ScalarSymbol, data: SiegelData, grid: Grid) -> bool:
    if sym.support.get("kind") != "dual_lattice":
        return False
    axes = tuple(grid.dual_axes[2 * data.n + i] for i in range(data.m))
    return len(axes) == len(sym.axes) and all(
        a.shape == b.shape and np.allclose(a, b) for a, b in zip(sym.axes, axes)
    )


def _nyquist_check(sym: ScalarSymbol, data: SiegelData, grid: Grid) -> None:
    mask = (sym.values != 0) | (sym.weights != 0)
    if not np.any(mask):
        return
    pts = symbol_points(sym)[mask]
    for i in range(data.m):
        limit = np.pi / grid.spacings[2 * data.n + i]
        if np.max(np.abs(pts[:, i])) > limit * (1 + 1e-12):
            raise ValueError(
                f"symbol support exceeds the grid Nyquist limit {limit:.4g} on dual axis {i}"
            )


def _synthesize_raw(data: SiegelData, sym: ScalarSymbol, grid: Grid) -> GridFunction:
    """Synthesis with c = 1; the public entry point applies the measured constant."""
    m = data.m
    if _lattice_match(sym, data, grid):
        w = _weighted_symbol(data, sym)
        if data.n == 0:
            vals = (2.0 * np.pi) ** m * f_transform(grid, w, inverse=True)
        else:
            lam_mesh = _f_mesh(grid)
            q = phi_quadratic(data, grid.zeta_points())
            expo = np.tensordot(q, np.moveaxis(lam_mesh, -1, 0), axes=([q.ndim - 1], [0]))
            # lattice points off the support would overflow exp; send them to 0
            expo = np.where(w != 0, expo, np.inf)
            vals = (2.0 * np.pi) ** m * f_transform(grid, np.exp(-expo) * w, inverse=True)
        return GridFunction(grid, vals)

    _nyquist_check(sym, data, grid)
    w = (_weighted_symbol(data, sym) * sym.weights).ravel()
    keep = w != 0
    nodes = symbol_points(sym).reshape(-1, m)[keep]
    w = w[keep]
    mesh = grid.group_points()
    x_flat = mesh.x.reshape(-1, m)
    q_flat = phi_quadratic(data, mesh.zeta).reshape(-1, m) if data.n else np.zeros_like(x_flat)
    acc = np.zeros(x_flat.shape[0], dtype=complex)
    for start in range(0, nodes.shape[0], 256):
        lam = nodes[start : start + 256]
        block = np.exp(q_flat @ (-lam.T) + 1j * (x_flat @ lam.T))
        acc += block @ w[start : start + 256]
    return GridFunction(grid, acc.reshape(grid.counts))


def _readback_raw(data: SiegelData, u: GridFunction) -> np.ndarray:
    """int u(zeta, x) e^{-<mu, Phi(zeta)> - i<mu, x>} on the dual F lattice."""
    grid = u.grid
    hat = f_transform(grid, u.values)
    if data.n == 0:
        return hat
    lam_mesh = _f_mesh(grid)
    inside = membership(data.cone, "dual", lam_mesh)
    q = phi_quadratic(data, grid.zeta_points())
    expo = np.tensordot(q, np.moveaxis(lam_mesh, -1, 0), axes=([q.ndim - 1], [0]))
    expo = np.where(inside, expo, np.inf)
    e_dims = tuple(range(2 * data.n))
    return np.sum(np.exp(-expo) * hat, axis=e_dims) * grid.cell_e


def calibrate_constants(data: SiegelData, grid: Grid) -> dict:
    """Measure the inversion and Plancherel constants on a reference bump.

    c_inversion makes read-back after synthesis the identity;
    c_plancherel makes the squared grid norm equal the weighted squared
    symbol integral.  Both are measured, cached per (data, grid), and
    a non-constant inversion ratio above 1e-3 is an error.
    """
    key = (
        data.phi.tobytes(),
        data.cone.kind,
        data.cone.ambient_dim,
        tuple(grid.counts),
        tuple(grid.halfwidths),
    )
    if key in _calibration_cache:
        return _calibration_cache[key]

    lam_limit = min(
        np.pi / grid.spacings[2 * data.n + i] for i in range(data.m)
    )
    center = 0.35 * lam_limit * data.cone.e_dual
    width = 0.06 * lam_limit

    def bump(pts):
        return np.exp(-np.sum((pts - center) ** 2, axis=-1) / (2.0 * width**2))

    sym = symbol_on_dual_lattice(data, grid, bump)
    if not np.any(np.abs(sym.values) > 0):
        raise RuntimeError("reference bump missed the dual lattice; grid too coarse")
    u = _synthesize_raw(data, sym, grid)
    read = _readback_raw(data, u)
    strong = np.abs(sym.values) > 1e-3 * np.abs(sym.values).max()
    ratio = read[strong] / sym.values[strong]
    c_inv = 1.0 / float(np.median(ratio.real))
    if np.max(np.abs(ratio * c_inv - 1.0)) > 1e-3:
        raise RuntimeError("inversion calibration residual above 1e-3; grid too coarse")

    norm_sq = float(np.sum(np.abs(u.values) ** 2) * grid.cell_measure) * c_inv**2
    weighted = float(
        np.sum(np.abs(sym.values) ** 2 * _weight_power(data, sym) * sym.weights)
    )
    c_pl = norm_sq / weighted
    out = {"c_inversion": c_inv, "c_plancherel": c_pl}
    _calibration_cache[key] = out
    return out


def _weight_power(data: SiegelData, sym: ScalarSymbol) -> np.ndarray:
    mask = sym.values != 0
    out = np.zeros(sym.values.shape)
    if np.any(mask):
        pts = symbol_points(sym)[mask]
        out[mask] = delta_power(data.cone, "dual", -data.b, pts)
    return out


def synthesize(data: SiegelData, sym: ScalarSymbol, grid: Grid, constants=None) -> GridFunction:
    """Kernel synthesis u = c int sigma Delta'^{-b} e^{-<lam,Phi(zeta)>+i<lam,x>} dlam.

    Symbols sampled on the grid's dual lattice go through the exact FFT
    path; anything else is straight quadrature with a Nyquist guard.
    """
    if constants is None:
        constants = calibrate_constants(data, grid)
    raw = _synthesize_raw(data, sym, grid)
    return GridFunction(grid, constants["c_inversion"] * raw.values)


def symbol_readback(data: SiegelData, u: GridFunction) -> ScalarSymbol:
    """Left inverse of synthesize, landing on the dual lattice of u's grid.

    No constant appears here: c_inversion is calibrated exactly so that
    this plain integral undoes the calibrated synthesis.
    """
    grid = u.grid
    vals = _readback_raw(data, u)
    axes = tuple(grid.dual_axes[2 * data.n + i] for i in range(data.m))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = membership(data.cone, "dual", pts)
    cell = float(np.prod([2.0 * np.pi / (c * d) for c, d in
                          zip(grid.counts[2 * data.n :], grid.spacings[2 * data.n :])]))
    return ScalarSymbol(data.cone, axes, vals * inside, cell * inside.astype(float),
                        {"kind": "dual_lattice"})


def convolve(data: SiegelData, u, v, mode: str):
    """Group convolution, symbol-side (pointwise product) or grid-side.

    Grid mode computes (u*v)(g) = int u(h) v(h^{-1} g) dh with an FFT
    along the central F axes; the horizontal twist enters as a phase
    e^{-i <lam, 2 Im Phi(eta, zeta)>} and the E axes are summed directly.
    """
    if mode == "symbol":
        if not all(
            a.shape == b.shape and np.allclose(a, b) for a, b in zip(u.axes, v.axes)
        ) or len(u.axes) != len(v.axes):
            raise ValueError("symbols live on different quadratures")
        return ScalarSymbol(u.cone, u.axes, u.values * v.values, u.weights, u.support)
    if mode != "grid":
        raise ValueError("mode must be 'symbol' or 'grid'")
    if u.grid.counts != v.grid.counts or u.grid.halfwidths != v.grid.halfwidths:
        raise ValueError("grid functions live on incompatible grids")
    grid = u.grid
    if data.n == 0:
        out = f_transform(grid, f_transform(grid, u.values) * f_transform(grid, v.values),
                          inverse=True)
        return GridFunction(grid, out)

    uhat = f_transform(grid, u.values)
    vhat = f_transform(grid, v.values)
    lam_mesh = _f_mesh(grid)
    zeta = grid.zeta_points()
    counts_e = grid.counts[: 2 * data.n]
    acc = np.zeros(grid.counts, dtype=complex)
    for eta_idx in np.ndindex(*counts_e):
        eta = zeta[eta_idx]
        tgt, src = [], []
        for c, i in zip(counts_e, eta_idx):
            lo = max(0, i - c // 2)
            hi = min(c, i + c // 2)
            tgt.append(slice(lo, hi))
            src.append(slice(lo - i + c // 2, hi - i + c // 2))
        tgt, src = tuple(tgt), tuple(src)
        # 2 Im Phi(eta, zeta) shifts the central variable; exact for
        # shifts on the mesh, phase-accurate otherwise
        twist = 2.0 * np.einsum("a,...b,abm->...m", eta, np.conj(zeta[tgt]), data.phi).imag
        phase = np.exp(
            -1j * np.tensordot(twist, np.moveaxis(lam_mesh, -1, 0), axes=([twist.ndim - 1], [0]))
        )
        acc[tgt] += uhat[eta_idx] * vhat[src] * phase
    out = f_transform(grid, acc, inverse=True) * grid.cell_e
    return GridFunction(grid, out)


def riemann_liouville(sym: ScalarSymbol, s, convention: str = "dual") -> ScalarSymbol:
    """Symbol of convolution with the Riesz-type kernel: multiply by
    e^{-i pi (sum s)/2} Delta'^{-s}(lam).

    convention='primal' evaluates the primal-cone power at lam instead,
    for sensitivity checks of the power reading; 'dual' is the default
    consistent with the surrounding calculus.
    """
    if convention not in ("dual", "primal"):
        raise ValueError("convention must be 'dual' or 'primal'")
    s = np.asarray(s, dtype=float)
    mask = sym.values != 0
    out = np.zeros_like(sym.values)
    if np.any(mask):
        pts = symbol_points(sym)[mask]
        power = delta_power(sym.cone, convention, -s, pts)
        out[mask] = sym.values[mask] * np.exp(-0.5j * np.pi * np.sum(s)) * power
    return ScalarSymbol(sym.cone, sym.axes, out, sym.weights, sym.support)


def symbol_to_dict(sym: ScalarSymbol) -> dict:
    return {
        "axes": [ax.tolist() for ax in sym.axes],
        "values": np.stack([sym.values.real, sym.values.imag], axis=-1).tolist(),
        "weights": sym.weights.tolist(),
        "support": sym.support,
    }


def symbol_from_dict(cone: ConeDescriptor, d: dict) -> ScalarSymbol:
    axes = tuple(np.asarray(ax, dtype=float) for ax in d["axes"])
    packed = np.asarray(d["values"], dtype=float)
    values = packed[..., 0] + 1j * packed[..., 1]
    return ScalarSymbol(cone, axes, values, np.asarray(d["weights"], dtype=float), d["support"])


def gridfunction_to_dict(f: GridFunction) -> dict:
    return {
        "grid": f.grid.to_dict(),
        "values": np.stack([f.values.real, f.values.imag], axis=-1).tolist(),
    }


def gridfunction_from_dict(grid: Grid, d: dict) -> GridFunction:
    packed = np.asarray(d["values"], dtype=float)
    return GridFunction(grid, packed[..., 0] + 1j * packed[..., 1])
