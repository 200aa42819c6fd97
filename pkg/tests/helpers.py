"""Shared oracles for the test suite.

Everything here is computed independently of the library code paths it
checks: quadratures are assembled from raw node/weight rules, closed
forms are classical identities, and no conewave function under test is
reused inside its own oracle.
"""

from __future__ import annotations

import numpy as np


def gauss_nodes(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def laplace_quadrature_halfline(s: float, lam: float, n: int = 80) -> float:
    """int_0^inf e^{-lam x} x^s dx/x by Gauss nodes on x = y^2.

    The substitution removes the algebraic endpoint behaviour whenever
    2s is an integer, which the callers arrange.
    """
    upper = np.sqrt(60.0 / lam)
    y, w = gauss_nodes(0.0, upper, n)
    x = y**2
    return float(np.sum(np.exp(-lam * x) * x ** (s - 1) * 2.0 * y * w))


def laplace_quadrature_product(s, lam, n: int = 80) -> float:
    """Tensor half-line quadrature for the orthant cone."""
    return float(np.prod([laplace_quadrature_halfline(sj, lj, n) for sj, lj in zip(s, lam)]))


def laplace_quadrature_lorentz3(s, lam, n_r: int = 64, n_psi: int = 48, n_th: int = 96) -> float:
    """Direct 3-D quadrature of int e^{-<lam,x>} Delta^s(x) Q(x)^{-3/2} dx
    over the light cone in R^3.

    Coordinates x = (x1, rho cos th, rho sin th) with rho = x1 sin psi,
    and x1 = y^2 to keep the radial integrand analytic for half-integer
    exponent sums.  Powers of cos psi stay nonnegative integers when
    2 s2 is an integer >= 2.
    """
    s1, s2 = float(s[0]), float(s[1])
    lam = np.asarray(lam, dtype=float)
    lmin = lam[0] - np.hypot(lam[1], lam[2])
    assert lmin > 0, "dual point outside the cone"
    y, wy = gauss_nodes(0.0, np.float64(np.sqrt(60.0 / lmin)), n_r)
    psi, wpsi = gauss_nodes(0.0, np.pi / 2, n_psi)
    th = np.arange(n_th) * (2.0 * np.pi / n_th)
    wth = 2.0 * np.pi / n_th

    x1 = (y**2)[:, None, None]
    sp = np.sin(psi)[None, :, None]
    cp = np.cos(psi)[None, :, None]
    ct = np.cos(th)[None, None, :]
    st = np.sin(th)[None, None, :]
    pair = x1 * (lam[0] + sp * (lam[1] * ct + lam[2] * st))
    # Delta_1^{s1-s2} Q^{s2-3/2} times the Jacobian rho drho dpsi,
    # with an extra 2y from the radial substitution.
    vals = (
        np.exp(-pair)
        * (x1 * (1.0 + sp * st)) ** (s1 - s2)
        * x1 ** (2.0 * s2 - 3.0)
        * cp ** (2.0 * s2 - 3.0)
        * (x1 * sp) * (x1 * cp)
    )
    w = (2.0 * y * wy)[:, None, None] * wpsi[None, :, None] * wth
    return float(np.sum(vals * w))


def lorentz3_dual_power(s, lam) -> float:
    """Independent dual power via the Jordan inverse: Delta^s(lam^{-1})^{-1}.

    Written only in terms of the primal minors of the inverted point, so
    it does not share code with the library's dual branch.
    """
    lam = np.asarray(lam, dtype=float)
    q = lam[0] ** 2 - lam[1] ** 2 - lam[2] ** 2
    inv = np.array([lam[0], -lam[1], -lam[2]]) / q
    d1 = inv[0] + inv[2]
    d2 = inv[0] ** 2 - inv[1] ** 2 - inv[2] ** 2
    # Delta'{}^s(lam) = Delta^s(lam^{-1})^{-1} componentwise in the frame
    return float(d1 ** -(s[0] - s[1]) * d2 ** -float(s[1]))
