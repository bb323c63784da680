"""Sphere reflection matrix elements in the Fresnel (TE/TM) basis.

The sphere scatters an incoming upward channel into an outgoing downward
channel.  The scattering amplitudes S_perp, S_par live in the basis tied to
the scattering plane; rotating into the Fresnel bases of the two channels
introduces the tilt angles chi_in, chi_out combined into

    A = cos(chi_out) cos(chi_in),   B = sin(chi_out) sin(chi_in),
    C = sin(chi_out) cos(chi_in),   D = -cos(chi_out) sin(chi_in),

and the matrix elements

    <TM|R_S|TM> = (2 pi c / xi kappa_out) (A S_par  + B S_perp)
    <TE|R_S|TE> = (2 pi c / xi kappa_out) (A S_perp + B S_par)
    <TM|R_S|TE> = -(2 pi c / xi kappa_out) (C S_perp + D S_par)
    <TE|R_S|TM> = +(2 pi c / xi kappa_out) (C S_par  + D S_perp)

Fast-path closed forms (derived from the imaginary-frequency unit vectors,
with Dphi = phi_out - phi_in, P = kappa_in kappa_out + k_in k_out cos(Dphi)
and Q = sqrt(P^2 - xi^4) = xi^2 sqrt(cos^2 Theta - 1)):

    cos(chi_in)  = (kappa_in k_out cos(Dphi) + kappa_out k_in) / Q
    cos(chi_out) = (kappa_in k_out + kappa_out k_in cos(Dphi)) / Q
    sin(chi_in)  = xi k_out sin(Dphi) / Q
    sin(chi_out) = xi k_in  sin(Dphi) / Q

These are regular at xi -> 0 and degenerate only where cos(Theta) = -1:
at the specular point (k_in = k_out, Dphi = 0) the limit is A=1, B=C=D=0,
and at exact backscattering with k > 0 (k_in = k_out, Dphi = pi) it is
A=0, B=1, C=D=0.  The complex-vector reference construction lives in the
test suite only and must agree with this fast path to 1e-12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Geometry, Polarization, SpectralPoint, cos_theta
from .mie import amplitudes_exact, amplitudes_wkb, wkb_diffraction_s
from .special import ScaledValue


class KernelKind(Enum):
    EXACT_MIE = "exact-mie"
    WKB0 = "wkb0"
    WKB1 = "wkb1"


@dataclass(frozen=True)
class RotationCoefficients:
    A: float
    B: float
    C: float
    D: float
    chi_in: float
    chi_out: float


def chi_components(xi, k_in, k_out, kappa_in, kappa_out, dphi):
    """Vectorized (cos chi_in, cos chi_out, sin chi_in, sin chi_out).

    Degenerate points (Q = 0, i.e. cos Theta = -1) resolve to the specular
    limit chi = 0 for dphi = 0 and to the backscattering limit chi = pi/2
    otherwise.
    """
    cosd = np.cos(dphi)
    sind = np.sin(dphi)
    xi2 = xi * xi
    # P - xi^2 without cancellation: kappa_in kappa_out - k_in k_out - xi^2
    # = xi^2 (k_in - k_out)^2 / (kappa_in kappa_out + k_in k_out + xi^2),
    # and k_in k_out (1 + cos dphi) = 2 k_in k_out cos^2(dphi/2)
    p_diff = xi2 * (k_in - k_out) ** 2 / (
        kappa_in * kappa_out + k_in * k_out + xi2
    ) + 2.0 * k_in * k_out * np.cos(0.5 * dphi) ** 2
    p_dot = xi2 + p_diff
    q2 = p_diff * (p_diff + 2.0 * xi2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.sqrt(q2)
        cos_in = (kappa_in * k_out * cosd + kappa_out * k_in) / q
        cos_out = (kappa_in * k_out + kappa_out * k_in * cosd) / q
        sin_in = xi * k_out * sind / q
        sin_out = xi * k_in * sind / q
    degenerate = q2 <= (1e-24 * p_dot * p_dot)
    if np.any(degenerate):
        backward = degenerate & (cosd <= 0.0)
        cos_in = np.where(degenerate, np.where(backward, 0.0, 1.0), cos_in)
        cos_out = np.where(degenerate, np.where(backward, 0.0, 1.0), cos_out)
        sin_in = np.where(degenerate, np.where(backward, 1.0, 0.0), sin_in)
        sin_out = np.where(degenerate, np.where(backward, 1.0, 0.0), sin_out)
    return cos_in, cos_out, sin_in, sin_out


def abcd_arrays(xi, k_in, k_out, kappa_in, kappa_out, dphi):
    """Vectorized A, B, C, D over numpy-broadcastable inputs."""
    cos_in, cos_out, sin_in, sin_out = chi_components(
        xi, k_in, k_out, kappa_in, kappa_out, dphi
    )
    a = cos_out * cos_in
    b = sin_out * sin_in
    c = sin_out * cos_in
    d = -cos_out * sin_in
    return a, b, c, d


def rotation_coefficients(pt_in: SpectralPoint, pt_out: SpectralPoint) -> RotationCoefficients:
    """Fresnel-to-scattering-plane rotation coefficients (fast closed form)."""
    if pt_in.xi != pt_out.xi:
        raise ValueError("rotation coefficients require equal xi")
    dphi = pt_out.phi_az - pt_in.phi_az
    ci, co, si, so = chi_components(
        pt_in.xi, pt_in.k, pt_out.k, pt_in.kappa, pt_out.kappa, np.float64(dphi)
    )
    ci, co, si, so = float(ci), float(co), float(si), float(so)
    return RotationCoefficients(
        co * ci, so * si, so * ci, -co * si, math.atan2(si, ci), math.atan2(so, co)
    )


def plane_reflection(pol: Polarization) -> float:
    """Fresnel coefficient of the perfectly reflecting plane: TM +1, TE -1."""
    return 1.0 if pol is Polarization.TM else -1.0


def _rho_order1(pol_out, pol_in, a, b, c, d, s_perp, s_par, R, order):
    """rho_{p_out, p_in} of the asymptotic matrix element, order 0 or 1."""
    inv_r = (1.0 / R) if order == 1 else 0.0
    if pol_out is Polarization.TM and pol_in is Polarization.TM:
        return (a - b) + (a * s_par - b * s_perp) * inv_r
    if pol_out is Polarization.TE and pol_in is Polarization.TE:
        return -(a - b) - (a * s_perp - b * s_par) * inv_r
    if pol_out is Polarization.TM:  # TM <- TE
        # the -(C S_perp + D S_par) element with S_perp = -|S_perp|: net +
        return (c - d) + (c * s_perp - d * s_par) * inv_r
    return (c - d) + (c * s_par - d * s_perp) * inv_r  # TE <- TM


def sphere_matrix_element(
    pt_in: SpectralPoint,
    pol_in: Polarization,
    pt_out: SpectralPoint,
    pol_out: Polarization,
    kind: KernelKind,
    R: float,
) -> ScaledValue:
    """Matrix element <out, pol_out | R_S | in, pol_in>, log-scaled.

    The exact kind sums partial waves; the wkb kinds use the asymptotic
    form (pi R / kappa_out) e^{(2 xi R) sin(Theta/2)} rho_{p_out, p_in}
    truncated at the requested order in 1/R.
    """
    z = cos_theta(pt_in, pt_out)
    rc = rotation_coefficients(pt_in, pt_out)
    xi = pt_in.xi
    if kind is KernelKind.EXACT_MIE:
        amps = amplitudes_exact(xi, R, z)
        pref = 2.0 * math.pi / (xi * pt_out.kappa)
        if pol_out is Polarization.TM and pol_in is Polarization.TM:
            combo = (rc.A, amps.s_par, rc.B, amps.s_perp, +1.0)
        elif pol_out is Polarization.TE and pol_in is Polarization.TE:
            combo = (rc.A, amps.s_perp, rc.B, amps.s_par, +1.0)
        elif pol_out is Polarization.TM:
            combo = (rc.C, amps.s_perp, rc.D, amps.s_par, -1.0)
        else:
            combo = (rc.C, amps.s_par, rc.D, amps.s_perp, +1.0)
        w1, s1, w2, s2, sign = combo
        lead = max(s1.log_scale, s2.log_scale)
        mant = w1 * s1.mantissa * math.exp(s1.log_scale - lead) + w2 * s2.mantissa * math.exp(
            s2.log_scale - lead
        )
        return ScaledValue(sign * pref * mant, lead).normalized()
    order = 0 if kind is KernelKind.WKB0 else 1
    sh = math.sqrt(0.5 * (1.0 - z))
    s_perp, s_par = wkb_diffraction_s(xi, z) if order == 1 else (0.0, 0.0)
    rho = _rho_order1(pol_out, pol_in, rc.A, rc.B, rc.C, rc.D, s_perp, s_par, R, order)
    return ScaledValue(math.pi * R / pt_out.kappa * rho, 2.0 * xi * R * sh)


def symmetrized_round_trip_element(
    pt_in: SpectralPoint,
    pol_in: Polarization,
    pt_out: SpectralPoint,
    pol_out: Polarization,
    geometry: Geometry,
    kind: KernelKind,
) -> float:
    """One similarity-transformed round-trip leg, collapsed to a plain float.

    Combines the plane reflection of the incoming channel, the two
    translation factors e^{-kappa (L+R)} split symmetrically, and the
    sqrt(kappa_in/kappa_out) similarity that makes each azimuthal block of
    the discretized operator symmetric.  The huge e^{+2 xi R sin(Theta/2)}
    growth of the sphere element cancels against the translations in log
    space before exponentiation (the total exponent is always <= 0 for
    the WKB kinds).  Quadrature weights are folded in by the solver.
    """
    rho = geometry.aspect_ratio
    element = sphere_matrix_element(pt_in, pol_in, pt_out, pol_out, kind, rho)
    kap_in = pt_in.kappa
    kap_out = pt_out.kappa
    log_total = (
        element.log_scale
        - (kap_in + kap_out) * (1.0 + rho)
        + 0.5 * (math.log(kap_in) - math.log(kap_out))
    )
    return plane_reflection(pol_in) * element.mantissa * math.exp(log_total)
