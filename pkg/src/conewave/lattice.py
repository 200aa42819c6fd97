"""Separated covering lattices on the dual cone and bounded bump families.

A (delta, R)-lattice is a maximal 2*delta-separated point set whose
R*delta balls cover a bounded region, built greedily over a fine chart
mesh.  Bump families are radial in the invariant metric around the
lattice points; by invariance of the metric this is the same as
transporting a single profile centered at the base point, so one
profile generates a bounded family.  Modes: cover (sum >= 1),
partition (sum = 1), partition_sq (sum of squares = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone import (
    ConeDescriptor,
    invariant_distance,
    membership,
    transport_solve,
    TriangularElement,
)
from .nilgroup import SiegelData
from .spectral import n_lambda


@dataclass(frozen=True)
class Region:
    """Metric annulus {r_min <= d(center, .) <= r_max} in the dual cone."""

    center: np.ndarray
    r_min: float
    r_max: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.r_min < 0 or self.r_max <= self.r_min:
            raise ValueError("need 0 <= r_min < r_max")

    def contains(self, cone: ConeDescriptor, pts) -> np.ndarray:
        d = invariant_distance(cone, self.center, pts)
        return (d >= self.r_min) & (d <= self.r_max)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "r_min": self.r_min, "r_max": self.r_max}


@dataclass(frozen=True)
class LatticeSpec:
    cone: ConeDescriptor
    delta: float
    R: float
    points: np.ndarray
    transports: tuple
    region: Region

    def __len__(self):
        return self.points.shape[0]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "R": self.R,
            "points": self.points.tolist(),
            "region": self.region.to_dict(),
        }


def lattice_from_dict(cone: ConeDescriptor, d: dict) -> LatticeSpec:
    region = Region(np.asarray(d["region"]["center"]), d["region"]["r_min"], d["region"]["r_max"])
    points = np.asarray(d["points"], dtype=float)
    transports = tuple(transport_solve(cone, p) for p in points)
    return LatticeSpec(cone, float(d["delta"]), float(d["R"]), points, transports, region)


def _chart_points(cone: ConeDescriptor, center, offsets: np.ndarray) -> np.ndarray:
    """Map chart offsets (log coordinates at the region center) to cone points.

    Offsets are applied at the base point and pushed to the center by
    the center's transport, so distances to the center equal distances
    from the base point to the offset image.
    """
    t_c = transport_solve(cone, center)
    if cone.kind == "product":
        base = np.exp(offsets)
    else:
        # closed form of e'.t(rho, a, u) in the (log rho, a, u) chart
        rho = np.exp(offsets[:, 0])
        ea = np.exp(offsets[:, 1])
        inv = np.exp(-offsets[:, 1])
        u = offsets[:, 2:]
        usq = np.sum(u**2, axis=1)
        base = np.empty((offsets.shape[0], cone.ambient_dim))
        base[:, 0] = 0.5 * rho * (ea + inv * (1.0 + usq))
        base[:, -1] = 0.5 * rho * (ea + inv * (usq - 1.0))
        base[:, 1:-1] = (rho * inv)[:, None] * u
    return t_c.act_dual(base)


def _chart_stretch(cone: ConeDescriptor, r_max: float) -> float:
    """Largest local metric-per-chart-step ratio over the working box."""
    if cone.kind == "product":
        return 1.0
    dim = cone.ambient_dim
    rng = np.random.default_rng(41)
    worst = 1.0
    base = rng.uniform(-r_max, r_max, size=(60, dim))
    step = 1e-4
    for v in base:
        p = _chart_points(cone, cone.e_dual, v[None, :])[0]
        if not membership(cone, "dual", p):
            continue
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = step
            q = _chart_points(cone, cone.e_dual, (v + e)[None, :])[0]
            worst = max(worst, float(invariant_distance(cone, p, q)) / step)
    return worst


def build_lattice(cone: ConeDescriptor, delta: float, region: Region,
                  transport_kind: str = "triangular") -> LatticeSpec:
    """Greedy maximal 2*delta-separated set in the region, base point first.

    The candidate set is a uniform chart mesh at spacing delta/4 divided
    by the measured chart distortion; the declared covering factor
    R = 2.5 absorbs both the greedy bound (2) and the mesh slack.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not membership(cone, "dual", region.center):
        raise ValueError("region center must lie inside the open dual cone")
    if transport_kind not in ("triangular", "quadratic"):
        raise ValueError("transport_kind must be 'triangular' or 'quadratic'")

    dim = cone.ambient_dim
    stretch = _chart_stretch(cone, region.r_max)
    h = delta / (4.0 * stretch)
    half = int(np.ceil(region.r_max / h)) + 1
    axis = h * np.arange(-half, half + 1)
    offsets = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    # lexicographic candidate order makes the greedy pass deterministic
    cand = _chart_points(cone, region.center, offsets)
    keep = region.contains(cone, cand)
    cand = cand[keep]

    # first-surviving-candidate greedy: accepting a point removes its
    # 2 delta neighborhood, so whoever comes up next is separated from
    # every earlier acceptance
    accepted = []
    threshold = 2.0 * delta * (1.0 - 1e-12)
    alive = np.ones(cand.shape[0], dtype=bool)
    if region.contains(cone, cone.e_dual[None, :])[0]:
        accepted.append(np.asarray(cone.e_dual, dtype=float))
        alive &= invariant_distance(cone, cone.e_dual, cand) >= threshold
    while np.any(alive):
        i = int(np.argmax(alive))
        p = cand[i]
        accepted.append(p)
        idx = np.nonzero(alive)[0]
        alive[idx] = invariant_distance(cone, p, cand[idx]) >= threshold
    if not accepted:
        raise ValueError("region contains no candidate points")
    points = np.stack(accepted)
    transports = tuple(_make_transport(cone, p, transport_kind) for p in points)
    return LatticeSpec(cone, float(delta), 2.5, points, transports, region)


def _make_transport(cone: ConeDescriptor, lam: np.ndarray, kind: str) -> TriangularElement:
    t = transport_solve(cone, lam)
    if kind == "triangular" or cone.kind == "product":
        return t
    # quadratic representative of the spin factor; same characters as t
    lam = np.asarray(lam, dtype=float)
    q = lam[0] ** 2 - np.sum(lam[1:] ** 2)
    s1 = np.sqrt((lam[0] + np.sqrt(q)) / 2.0)
    z = np.concatenate([[s1], lam[1:] / (2.0 * s1)])
    sign = np.diag(np.concatenate([[1.0], -np.ones(cone.ambient_dim - 1)]))
    p_mat = 2.0 * np.outer(z, z) - (z[0] ** 2 - np.sum(z[1:] ** 2)) * sign
    return TriangularElement(p_mat, t.delta)


def _region_samples(cone: ConeDescriptor, region: Region, spacing_metric: float) -> np.ndarray:
    stretch = _chart_stretch(cone, region.r_max)
    h = spacing_metric / stretch
    dim = cone.ambient_dim
    half = int(np.ceil(region.r_max / h)) + 1
    axis = h * np.arange(-half, half + 1)
    offsets = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    pts = _chart_points(cone, region.center, offsets)
    return pts[region.contains(cone, pts)]


def verify_lattice(cone: ConeDescriptor, spec: LatticeSpec) -> dict:
    """Separation, covering, and overlap report; never raises."""
    pts = spec.points
    k = pts.shape[0]
    violations = []
    min_sep = np.inf
    for i in range(k):
        if i + 1 < k:
            d = invariant_distance(cone, pts[i], pts[i + 1 :])
            m = float(np.min(d))
            min_sep = min(min_sep, m)
            for j in np.nonzero(d < 2 * spec.delta * (1 - 1e-9))[0]:
                violations.append(("separation", i, int(i + 1 + j)))
    samples = _region_samples(cone, spec.region, spec.delta / 8.0)
    max_cover = 0.0
    for chunk in np.array_split(samples, max(1, samples.shape[0] // 65536)):
        d = np.stack([invariant_distance(cone, p, chunk) for p in pts])
        max_cover = max(max_cover, float(np.max(np.min(d, axis=0))))
    covering_ok = max_cover <= spec.R * spec.delta
    if not covering_ok:
        violations.append(("covering", max_cover))
    n_overlap = 0
    for i in range(k):
        d = invariant_distance(cone, pts[i], pts)
        n_overlap = max(n_overlap, int(np.sum(d < 2 * spec.R * spec.delta) - 1))
    return {
        "separation_ok": all(v[0] != "separation" for v in violations),
        "covering_ok": covering_ok,
        "min_separation": float(min_sep) if k > 1 else np.inf,
        "max_covering_distance": max_cover,
        "n_overlap": n_overlap,
        "count": k,
        "violations": violations,
    }


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """Quintic C^2 ramp from 1 at t = 0 to 0 at t = 1."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - (6.0 * t**5 - 15.0 * t**4 + 10.0 * t**3)


@dataclass(frozen=True)
class BumpFamily:
    """Radial bumps around the lattice points, one shared C^2 profile.

    profile(d) is 1 up to plateau_radius (the certified covering radius,
    so the raw sum is at least 1 on the region) and 0 beyond
    outer_radius = R*delta.
    """

    cone: ConeDescriptor
    spec: LatticeSpec
    mode: str
    plateau_radius: float
    outer_radius: float
    smoothness: str = "C2"

    def profile(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        t = (d - self.plateau_radius) / (self.outer_radius - self.plateau_radius)
        return _smooth_step(t)

    def raw_matrix(self, pts) -> np.ndarray:
        """Untransported profile values p(d(lambda_k, .)), shape (K, len(pts))."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.stack(
            [self.profile(invariant_distance(self.cone, lam, pts)) for lam in self.spec.points]
        )

    def evaluate_all(self, pts) -> np.ndarray:
        """Normalized bump values per mode, shape (K, len(pts))."""
        raw = self.raw_matrix(pts)
        if self.mode == "cover":
            return raw
        if self.mode == "partition":
            norm = np.sum(raw, axis=0)
        else:
            norm = np.sqrt(np.sum(raw**2, axis=0))
        out = np.zeros_like(raw)
        hit = raw > 0
        cols = np.any(hit, axis=0)
        out[:, cols] = raw[:, cols] / norm[cols]
        return out

    def evaluate(self, k: int, pts) -> np.ndarray:
        return self.evaluate_all(pts)[k]


def build_bumps(cone: ConeDescriptor, spec: LatticeSpec, mode: str) -> BumpFamily:
    """Bump family over a verified lattice.

    The plateau is the certified covering radius (never below delta),
    which is what makes the raw sum >= 1 on the region; partition modes
    then divide by a sum that is bounded below by 1.
    """
    if mode not in ("cover", "partition", "partition_sq"):
        raise ValueError("mode must be cover, partition, or partition_sq")
    report = verify_lattice(cone, spec)
    if not (report["separation_ok"] and report["covering_ok"]):
        raise ValueError(f"lattice fails verification: {report['violations']}")
    slack = spec.delta / 8.0 + 1e-9
    plateau = min(
        max(spec.delta, report["max_covering_distance"] + slack),
        0.98 * spec.R * spec.delta,
    )
    return BumpFamily(cone, spec, mode, float(plateau), float(spec.R * spec.delta))


def check_bump_sum(bumps: BumpFamily, pts) -> dict:
    """Worst deviation of the declared sum condition over the given points."""
    raw = bumps.raw_matrix(pts)
    if bumps.mode == "cover":
        worst = float(np.min(np.sum(raw, axis=0)))
        return {"min_sum": worst, "ok": worst >= 1.0 - 1e-8}
    vals = bumps.evaluate_all(pts)
    if bumps.mode == "partition":
        total = np.sum(vals, axis=0)
    else:
        total = np.sum(vals**2, axis=0)
    worst = float(np.max(np.abs(total - 1.0)))
    return {"max_deviation": worst, "ok": worst < 1e-8}


def shell_indices(data: SiegelData, spec: LatticeSpec, bumps: BumpFamily, c: float) -> list:
    """Indices whose bump support meets the shell 1/c <= N(lambda) <= c.

    The support of each bump is probed on a chart mesh; an index counts
    when the sampled range of N straddles or enters the band.
    """
    if c <= 1:
        raise ValueError("c must exceed 1")
    cone = spec.cone
    out = []
    stretch = _chart_stretch(cone, bumps.outer_radius)
    h = bumps.outer_radius / (6.0 * stretch)
    dim = cone.ambient_dim
    axis = h * np.arange(-7, 8)
    offsets = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    for k, lam in enumerate(spec.points):
        pts = _chart_points(cone, lam, offsets)
        on_support = invariant_distance(cone, lam, pts) < bumps.outer_radius
        vals = n_lambda(data, pts[on_support])
        if np.min(vals) <= c and np.max(vals) >= 1.0 / c:
            out.append(k)
    return out
