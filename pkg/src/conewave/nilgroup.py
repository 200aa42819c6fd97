"""Two-step nilpotent groups attached to a cone by a hermitian map.

The group lives on E x F with E = C^n and F = R^m, where m is the
ambient dimension of the cone and the product is twisted by the
imaginary part of a sesquilinear map Phi taking values in F:

    (zeta, x) (zeta', x') = (zeta + zeta', x + x' + 2 Im Phi(zeta, zeta')).

Alongside the group law the module provides parabolic dilations, a
homogeneous quasi-distance, Haar integration on rectangular grids, and
the reconstruction of Phi from a two-step Lie bracket together with a
complex structure on the horizontal layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.optimize

from .cone import (
    ConeDescriptor,
    make_cone,
    random_cone_point,
    triangular_from_params,
    _rationalize,
)


@dataclass(frozen=True)
class SiegelData:
    """A cone together with a compatible hermitian map.

    phi has shape (n, n, m): phi[a, b] is the F-valued coefficient of
    zeta_a * conj(zeta'_b), so Phi(zeta, zeta') = sum_ab zeta_a
    conj(zeta'_b) phi[a, b].  b is the character exponent with
    Delta^{-b}(t) equal to the real determinant of the induced action
    on E.
    """

    cone: ConeDescriptor
    n: int
    m: int
    phi: np.ndarray
    b: np.ndarray

    def to_dict(self) -> dict:
        phi_pairs = np.stack([self.phi.real, self.phi.imag], axis=-1)
        return {
            "cone": self.cone.to_dict(),
            "n": self.n,
            "m": self.m,
            "phi": phi_pairs.tolist(),
            "b": self.b.tolist(),
        }


@dataclass(frozen=True)
class GroupPoint:
    """A (batch of) group element(s): zeta has shape (..., n), x shape (..., m)."""

    zeta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=complex))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


def origin(data: SiegelData) -> GroupPoint:
    return GroupPoint(np.zeros(data.n, dtype=complex), np.zeros(data.m))


def phi_form(data: SiegelData, zeta: np.ndarray, zetap: np.ndarray) -> np.ndarray:
    """Phi(zeta, zeta'), linear in the first slot, antilinear in the second."""
    zeta = np.asarray(zeta, dtype=complex)
    zetap = np.asarray(zetap, dtype=complex)
    return np.einsum("...a,...b,abm->...m", zeta, np.conj(zetap), data.phi)


def phi_quadratic(data: SiegelData, zeta: np.ndarray) -> np.ndarray:
    """Phi(zeta, zeta); real by hermitianity, returned as a real array."""
    return phi_form(data, zeta, zeta).real


def hermitian_matrix(data: SiegelData, lam) -> np.ndarray:
    """H_lam with entries <lam, phi[a, b]>; positive definite for lam in the dual cone."""
    lam = np.asarray(lam, dtype=float)
    return np.einsum("abm,m->ab", data.phi, lam)


def _validate_phi(cone: ConeDescriptor, phi: np.ndarray, rng=None) -> None:
    n = phi.shape[0]
    if phi.shape != (n, n, cone.ambient_dim):
        raise ValueError(f"phi must have shape (n, n, {cone.ambient_dim}), got {phi.shape}")
    if n == 0:
        return
    swapped = np.conj(np.swapaxes(phi, 0, 1))
    if not np.allclose(phi, swapped, atol=1e-12):
        raise ValueError("phi is not hermitian")
    # non-degeneracy: zeta' -> Phi(., zeta') injective
    flat = phi.reshape(n, n * cone.ambient_dim)
    if np.linalg.matrix_rank(flat, tol=1e-10) < n:
        raise ValueError("phi is degenerate")
    rng = np.random.default_rng(7) if rng is None else rng
    for _ in range(24):
        lam = random_cone_point(cone, "dual", rng, spread=1.0)
        h = np.einsum("abm,m->ab", phi, lam)
        if np.min(np.linalg.eigvalsh(h)) < -1e-10:
            raise ValueError("phi is not nonnegative on the closed cone")


def make_siegel(cone: ConeDescriptor, phi, b=None) -> SiegelData:
    """Bundle a cone and a hermitian map; derives the determinant character if b is omitted."""
    phi = np.asarray(phi, dtype=complex)
    if phi.ndim != 3:
        raise ValueError("phi must be a rank-3 tensor")
    _validate_phi(cone, phi)
    data = SiegelData(cone, phi.shape[0], cone.ambient_dim, phi, np.zeros(cone.rank))
    if b is None:
        b = derive_b(data)
    b = np.asarray(b, dtype=float)
    return SiegelData(cone, phi.shape[0], cone.ambient_dim, phi, b)


def make_abelian(cone: ConeDescriptor) -> SiegelData:
    """Degenerate-E case: the group is just R^m with addition."""
    phi = np.zeros((0, 0, cone.ambient_dim), dtype=complex)
    return SiegelData(cone, 0, cone.ambient_dim, phi, np.zeros(cone.rank))


def make_heisenberg() -> SiegelData:
    """One complex generator over the half-line: Phi(zeta, zeta') = zeta conj(zeta')."""
    cone = make_cone("product", 1)
    phi = np.ones((1, 1, 1), dtype=complex)
    return make_siegel(cone, phi)


def _check_shapes(data: SiegelData, g: GroupPoint) -> None:
    if g.zeta.shape[-1:] != (data.n,) and data.n > 0:
        raise ValueError(f"zeta must have trailing dimension {data.n}")
    if data.n == 0 and g.zeta.size != 0:
        raise ValueError("zeta must be empty for an abelian group")
    if g.x.shape[-1:] != (data.m,):
        raise ValueError(f"x must have trailing dimension {data.m}")


def multiply(data: SiegelData, g: GroupPoint, h: GroupPoint) -> GroupPoint:
    _check_shapes(data, g)
    _check_shapes(data, h)
    if data.n == 0:
        return GroupPoint(g.zeta + h.zeta, g.x + h.x)
    twist = 2.0 * phi_form(data, g.zeta, h.zeta).imag
    return GroupPoint(g.zeta + h.zeta, g.x + h.x + twist)


def inverse(g: GroupPoint) -> GroupPoint:
    return GroupPoint(-g.zeta, -g.x)


def dilate(rho: float, g: GroupPoint) -> GroupPoint:
    """Parabolic dilation: zeta scales like rho^(1/2), x like rho."""
    if rho <= 0:
        raise ValueError("dilation parameter must be positive")
    return GroupPoint(np.sqrt(rho) * g.zeta, rho * g.x)


def quasi_norm(g: GroupPoint) -> np.ndarray:
    """Homogeneous quasi-norm (|zeta|^4 + |x|^2)^(1/2); scales linearly under dilate."""
    z2 = np.sum(np.abs(g.zeta) ** 2, axis=-1)
    return np.sqrt(z2**2 + np.sum(g.x**2, axis=-1))


def quasi_distance(data: SiegelData, g: GroupPoint, h: GroupPoint) -> np.ndarray:
    """Left-invariant quasi-distance, the square root of the quasi-norm of g^{-1} h.

    The 1/2 power makes the distance scale like rho^(1/2) under the
    dilation by rho, matching the metric normalization used for balls.
    """
    return np.sqrt(quasi_norm(multiply(data, inverse(g), h)))


def bracket_from_siegel(data: SiegelData):
    """Lie bracket tensor and complex structure of the group, in real coordinates.

    Real basis of E is (Re zeta_1, Im zeta_1, ..., Re zeta_n, Im zeta_n);
    the commutator of two horizontal elements is 4 Im Phi.
    """
    n, m = data.n, data.m
    dim = 2 * n
    bracket = np.zeros((dim, dim, m))
    jmat = np.zeros((dim, dim))
    basis = np.zeros((dim, n), dtype=complex)
    for k in range(n):
        basis[2 * k, k] = 1.0
        basis[2 * k + 1, k] = 1j
        jmat[2 * k + 1, 2 * k] = 1.0
        jmat[2 * k, 2 * k + 1] = -1.0
    for i in range(dim):
        for j in range(dim):
            bracket[i, j] = 4.0 * phi_form(data, basis[i], basis[j]).imag
    return bracket, jmat


def _complex_basis(jmat: np.ndarray) -> np.ndarray:
    """Greedy complex basis of (R^{2n}, J): columns v_k with {v_k, J v_k} a real basis."""
    dim = jmat.shape[0]
    picked = []
    span = np.zeros((dim, 0))
    for cand in np.eye(dim):
        if len(picked) == dim // 2:
            break
        trial = np.column_stack([span, cand, jmat @ cand])
        if np.linalg.matrix_rank(trial, tol=1e-10) == trial.shape[1]:
            picked.append(cand)
            span = trial
    if len(picked) < dim // 2:
        raise ValueError("could not extract a complex basis from J")
    return np.array(picked)


def phi_from_bracket(bracket: np.ndarray, jmat: np.ndarray, cone: ConeDescriptor) -> SiegelData:
    """Rebuild the hermitian map from a two-step bracket and a complex structure.

    Phi(X, Y) = (1/4) [JX, Y] + (i/4) [X, Y].  If the form <lam, [J., .]>
    comes out negative definite the complex structure is replaced by its
    negative, which flips the sign; a non-symmetric [J., .] means J is
    incompatible with the bracket and is rejected.
    """
    bracket = np.asarray(bracket, dtype=float)
    jmat = np.asarray(jmat, dtype=float)
    dim = jmat.shape[0]
    if bracket.shape[:2] != (dim, dim) or bracket.shape[2] != cone.ambient_dim:
        raise ValueError("bracket tensor shape does not match J and the cone")
    if not np.allclose(jmat @ jmat, -np.eye(dim), atol=1e-10):
        raise ValueError("J is not a complex structure (J^2 != -I)")
    if not np.allclose(bracket, -np.swapaxes(bracket, 0, 1), atol=1e-10):
        raise ValueError("bracket is not antisymmetric")

    sym = np.einsum("ij,jkm->ikm", jmat.T, bracket)
    if not np.allclose(sym, np.swapaxes(sym, 0, 1), atol=1e-8):
        raise ValueError("[J., .] is not symmetric; J incompatible with the bracket")
    rng = np.random.default_rng(13)
    lam = random_cone_point(cone, "dual", rng, spread=0.3)
    slam = np.einsum("ikm,m->ik", sym, lam)
    eigs = np.linalg.eigvalsh(0.5 * (slam + slam.T))
    if np.max(eigs) <= 0:
        jmat = -jmat
        sym = -sym
    elif np.min(eigs) < 0:
        raise ValueError("form <lam, [J., .]> is indefinite; no compatible orientation")

    basis = _complex_basis(jmat)
    nhalf = dim // 2
    phi = np.zeros((nhalf, nhalf, cone.ambient_dim), dtype=complex)
    for a in range(nhalf):
        ja = jmat @ basis[a]
        for b in range(nhalf):
            phi[a, b] = 0.25 * np.einsum(
                "i,j,ijm->m", ja, basis[b], bracket
            ) + 0.25j * np.einsum("i,j,ijm->m", basis[a], basis[b], bracket)
    return make_siegel(cone, phi)


def check_admissible(bracket, jmat, cone: ConeDescriptor, sample_count: int = 32):
    """Sampled symmetry/positivity verdict for (bracket, J) against the cone.

    Returns (ok, report); report carries the worst eigenvalue and the
    largest asymmetry seen over the sampled dual-cone functionals.
    """
    bracket = np.asarray(bracket, dtype=float)
    jmat = np.asarray(jmat, dtype=float)
    dim = jmat.shape[0]
    if not np.allclose(jmat @ jmat, -np.eye(dim), atol=1e-10):
        raise ValueError("J is not a complex structure (J^2 != -I)")
    if not np.allclose(bracket, -np.swapaxes(bracket, 0, 1), atol=1e-10):
        raise ValueError("bracket is not antisymmetric")
    sym = np.einsum("ij,jkm->ikm", jmat.T, bracket)
    rng = np.random.default_rng(29)
    worst_eig = np.inf
    worst_asym = 0.0
    for _ in range(sample_count):
        lam = random_cone_point(cone, "dual", rng, spread=0.8)
        slam = np.einsum("ikm,m->ik", sym, lam)
        worst_asym = max(worst_asym, float(np.max(np.abs(slam - slam.T))))
        worst_eig = min(worst_eig, float(np.min(np.linalg.eigvalsh(0.5 * (slam + slam.T)))))
    ok = worst_asym < 1e-8 and worst_eig > 0
    return ok, {"worst_eigenvalue": worst_eig, "max_asymmetry": worst_asym, "samples": sample_count}


def _cone_generators(cone: ConeDescriptor):
    """A finite generating set of the triangular group, with parameters spanning all characters."""
    gens = []
    if cone.kind == "product":
        for k in range(cone.rank):
            p = np.ones(cone.rank)
            p[k] = 2.0
            gens.append(triangular_from_params(cone, p))
    else:
        gens.append(triangular_from_params(cone, (2.0, 0.0, np.zeros(cone.ambient_dim - 2))))
        gens.append(triangular_from_params(cone, (1.0, 0.7, np.zeros(cone.ambient_dim - 2))))
        u = np.zeros(cone.ambient_dim - 2)
        u[0] = 0.5
        gens.append(triangular_from_params(cone, (1.0, 0.0, u)))
    return gens


def _solve_equivariance(data: SiegelData, t) -> np.ndarray:
    """Find g in GL(n, C) with t.Phi = Phi(g x g); raises if the residual stays large."""
    n = data.n
    target = np.einsum("ij,abj->abi", t.matrix, data.phi)

    def unpack(v):
        return (v[: n * n] + 1j * v[n * n :]).reshape(n, n)

    def resid(v):
        g = unpack(v)
        cur = np.einsum("ac,bd,abm->cdm", g, np.conj(g), data.phi)
        r = (cur - target).ravel()
        return np.concatenate([r.real, r.imag])

    scale = float(np.mean(t.delta)) ** 0.5
    rng = np.random.default_rng(3)
    for attempt in range(6):
        g0 = scale * np.eye(n) + 0.05 * attempt * rng.standard_normal((n, n))
        v0 = np.concatenate([g0.real.ravel(), g0.imag.ravel()])
        sol = scipy.optimize.least_squares(resid, v0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if np.linalg.norm(sol.fun) < 1e-8:
            return unpack(sol.x)
    raise ValueError("no equivariant action on E exists for this (phi, cone) pair")


def derive_b(data: SiegelData) -> np.ndarray:
    """Character exponent of the E-action: Delta^{-b}(t) = |det_C g_t|^2.

    Solved on a generating set of the triangular group and extended by
    multiplicativity; the exponent is snapped to nearby small rationals.
    """
    if data.n == 0:
        return np.zeros(data.cone.rank)
    rows = []
    rhs = []
    for t in _cone_generators(data.cone):
        g = _solve_equivariance(data, t)
        det_r = abs(np.linalg.det(g)) ** 2
        rows.append(np.log(t.delta))
        rhs.append(np.log(det_r))
    rows = np.array(rows)
    rhs = np.array(rhs)
    minus_b, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    if np.linalg.norm(rows @ minus_b - rhs) > 1e-7:
        raise ValueError("determinant character is not multiplicative over the generators")
    return _rationalize(-minus_b)


@dataclass(frozen=True)
class Grid:
    """Rectangular sampling mesh on the group, FFT-compatible along every axis.

    counts and halfwidths run over the 2n real E-axes first (re/im
    pairs), then the m F-axes.  Axis j of length c and half-width h
    samples (i - c/2) * (2h/c), so the mesh is centered and the dual
    mesh 2 pi fftfreq(c, 2h/c) makes discrete transforms exact.
    """

    data: SiegelData
    counts: tuple
    halfwidths: tuple

    def __post_init__(self):
        want = 2 * self.data.n + self.data.m
        if len(self.counts) != want or len(self.halfwidths) != want:
            raise ValueError(f"need {want} axes, got {len(self.counts)}")
        if any(c < 2 or c % 2 for c in self.counts):
            raise ValueError("axis counts must be even and at least 2")
        if any(h <= 0 for h in self.halfwidths):
            raise ValueError("halfwidths must be positive")

    @cached_property
    def spacings(self) -> np.ndarray:
        return 2.0 * np.asarray(self.halfwidths) / np.asarray(self.counts)

    @cached_property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacings))

    @cached_property
    def axes(self) -> tuple:
        out = []
        for c, d in zip(self.counts, self.spacings):
            out.append((np.arange(c) - c / 2) * d)
        return tuple(out)

    @cached_property
    def dual_axes(self) -> tuple:
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(c, d) for c, d in zip(self.counts, self.spacings)
        )

    @property
    def e_slice(self):
        return slice(0, 2 * self.data.n)

    @property
    def f_slice(self):
        return slice(2 * self.data.n, None)

    @cached_property
    def cell_e(self) -> float:
        return float(np.prod(self.spacings[self.e_slice])) if self.data.n else 1.0

    @cached_property
    def cell_f(self) -> float:
        return float(np.prod(self.spacings[self.f_slice]))

    def zeta_points(self) -> np.ndarray:
        """Complex E mesh, shape counts_e + (n,)."""
        n = self.data.n
        if n == 0:
            return np.zeros((0,), dtype=complex)
        mesh = np.meshgrid(*self.axes[self.e_slice], indexing="ij")
        out = np.zeros(mesh[0].shape + (n,), dtype=complex)
        for k in range(n):
            out[..., k] = mesh[2 * k] + 1j * mesh[2 * k + 1]
        return out

    def x_points(self) -> np.ndarray:
        """Real F mesh, shape counts_f + (m,)."""
        mesh = np.meshgrid(*self.axes[self.f_slice], indexing="ij")
        return np.stack(mesh, axis=-1)

    def group_points(self) -> GroupPoint:
        """Full mesh as a batched GroupPoint with shape counts + (.,)."""
        n, m = self.data.n, self.data.m
        mesh = np.meshgrid(*self.axes, indexing="ij")
        zeta = np.zeros(mesh[0].shape + (n,), dtype=complex)
        for k in range(n):
            zeta[..., k] = mesh[2 * k] + 1j * mesh[2 * k + 1]
        x = np.stack(mesh[2 * n :], axis=-1) if m else np.zeros(mesh[0].shape + (0,))
        return GroupPoint(zeta, x)

    def to_dict(self) -> dict:
        return {"counts": list(self.counts), "halfwidths": list(map(float, self.halfwidths))}


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if tuple(self.values.shape) != tuple(self.grid.counts):
            raise ValueError("values shape must match the grid")


def make_grid(data: SiegelData, counts, halfwidths) -> Grid:
    """Grid constructor accepting scalars (same on every axis) or per-axis sequences."""
    want = 2 * data.n + data.m
    if np.isscalar(counts):
        counts = (int(counts),) * want
    if np.isscalar(halfwidths):
        halfwidths = (float(halfwidths),) * want
    return Grid(data, tuple(int(c) for c in counts), tuple(float(h) for h in halfwidths))


def integrate(f: GridFunction) -> complex:
    """Haar integral as a plain Riemann sum; Haar measure is Lebesgue on (zeta, x)."""
    return complex(np.sum(f.values) * f.grid.cell_measure)
