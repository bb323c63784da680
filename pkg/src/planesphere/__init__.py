"""Casimir energy of a perfectly reflecting sphere above a plane.

Plane-wave scattering formula at zero temperature with interchangeable
exact-Mie / WKB kernels, plus the analytic PFA/NTLO asymptotics and the
derivative-based verification oracles.
"""

__version__ = "0.1.0"
