"""Numerical toolkit for anisotropic Littlewood-Paley analysis on
homogeneous cones and the nilpotent groups attached to them.

Modules:

* ``cone``: cone geometry, power functions, transports, invariant
  metric and measure, Gamma factors.
* ``nilgroup``: the two-step group E x F, dilations, quasi-distance,
  grids and Haar sums, intrinsic admissibility machinery.
* ``spectral``: scalar symbol calculus on the dual cone, synthesis,
  convolution, fractional-integration multipliers, calibration.
* ``lattice``: invariant-metric packing lattices and bounded bump
  families on the dual cone.
* ``besov``: L^p / weighted sequence quasi-norms, anisotropic and
  dyadic Besov norms, duality pairing, embedding checks.
* ``sampling``: maximal functions, sampling bounds on group lattices,
  convolution inequality checks.
* ``experiments``: seeded experiment drivers and report emission, also
  exposed through the ``conewave`` command line tool.
"""

from . import besov, cone, experiments, lattice, nilgroup, sampling, spectral

__all__ = ["besov", "cone", "experiments", "lattice", "nilgroup", "sampling",
           "spectral"]

__version__ = "0.1.0"
