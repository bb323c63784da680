"""Sphere scattering amplitudes S_perp, S_par at imaginary frequency.

Exact partial-wave sums and their WKB (geometric-optics) asymptotics for a
perfectly reflecting sphere.  All exponentially large factors are tracked in
log scale.

Adopted Mie coefficients
------------------------
For a perfect reflector the standard real-frequency coefficients are the
Riccati-Bessel ratios a_ell = psi'_ell(x)/xi'_ell(x), b_ell =
psi_ell(x)/xi_ell(x).  Continued to imaginary frequency (x -> i x, x = xi*R/c
real) they become real:

    a_ell = (-1)^{ell+1} (pi/2) [I'_nu(x) + I_nu(x)/(2x)] / [K'_nu(x) + K_nu(x)/(2x)]
    b_ell = (-1)^{ell+1} (pi/2) I_nu(x) / K_nu(x),        nu = ell + 1/2.

Since K' + K/(2x) < 0 < I' + I/(2x), the signs are sign(a_ell) = (-1)^ell and
sign(b_ell) = (-1)^{ell+1}.  The overall sign convention is pinned by the WKB
limit: the partial-wave sums must approach

    S_par  = +(xi R/2) exp[2 xi R sin(Theta/2)],
    S_perp = -(xi R/2) exp[2 xi R sin(Theta/2)],

which the tests check explicitly (including the 1/R diffraction correction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import (
    AngularRecurrence,
    ScaledValue,
    log_bessel_i_half,
    log_bessel_k_half,
)

LOG_HALF_PI = math.log(math.pi / 2.0)


class TruncationError(RuntimeError):
    """Partial-wave sum failed to converge before the ell cap."""

    def __init__(self, message: str, ell_reached: int, worst_rel: float):
        super().__init__(message)
        self.ell_reached = ell_reached
        self.worst_rel = worst_rel


@dataclass(frozen=True)
class MieCoefficient:
    """Perfect-reflector Mie coefficients at imaginary frequency (real)."""

    ell: int
    a: ScaledValue
    b: ScaledValue


@dataclass(frozen=True)
class AmplitudePair:
    s_perp: ScaledValue
    s_par: ScaledValue


def _mie_ab_log_arrays(x: float, ell_max: int):
    """(sign_a, log|a|, sign_b, log|b|) for ell = 1..ell_max at x = xi*R/c."""
    if x <= 0.0:
        raise ValueError("size parameter x must be positive")
    log_i = log_bessel_i_half(ell_max + 1, x)
    log_k = log_bessel_k_half(ell_max + 1, x)
    ell = np.arange(1, ell_max + 1)
    nu = ell + 0.5
    # numerator I' + I/(2x) = I_{nu+1} + ((2nu+1)/(2x)) I_nu, all positive
    log_num = log_i[2:] + np.log1p((2 * nu + 1) / (2 * x) * np.exp(log_i[1:-1] - log_i[2:]))
    # |denominator| = K_{nu+1} - ((2nu+1)/(2x)) K_nu > 0 (no cancellation:
    # K_{nu+1}/K_nu > 2nu/x > (2nu+1)/(2x) for nu >= 3/2)
    log_den = log_k[2:] + np.log1p(-(2 * nu + 1) / (2 * x) * np.exp(log_k[1:-1] - log_k[2:]))
    log_a = LOG_HALF_PI + log_num - log_den
    log_b = LOG_HALF_PI + log_i[1:-1] - log_k[1:-1]
    sign_b = np.where(ell % 2 == 1, 1.0, -1.0)   # (-1)^{ell+1}
    sign_a = -sign_b                              # extra -1 from K'+K/2x < 0
    return sign_a, log_a, sign_b, log_b


def mie_ab(ell: int, x: float) -> MieCoefficient:
    """Single Mie coefficient pair; see module docstring for the form used."""
    if ell < 1:
        raise ValueError("partial-wave index must be >= 1")
    sign_a, log_a, sign_b, log_b = _mie_ab_log_arrays(x, ell)
    return MieCoefficient(
        ell,
        ScaledValue.from_sign_log(float(sign_a[-1]), float(log_a[-1])),
        ScaledValue.from_sign_log(float(sign_b[-1]), float(log_b[-1])),
    )


class ExactAmplitudes:
    """Adaptive partial-wave summation of S_perp, S_par at fixed (xi, R).

    The Mie coefficient arrays depend on xi only and are grown lazily, so
    one instance can be shared by every kernel evaluation at the same
    frequency (the solver's hot loop).  Calls are vectorized over an array
    of cos(Theta) values.

    Convergence: summation continues until the current term is below
    `tol` times the running sum for three consecutive ell on every array
    element (past the coefficient peak the terms decay faster than
    geometrically, so this certifies the tail at the same level).
    """

    GROWTH = 2.0

    def __init__(self, xi: float, R: float, tol: float = 1e-13, ell_cap: int | None = None):
        if xi <= 0.0 or R <= 0.0:
            raise ValueError("ExactAmplitudes requires xi > 0 and R > 0")
        self.xi = xi
        self.R = R
        self.x = xi * R
        self.tol = tol
        # Wiscombe-style start; the cap grows with the largest |z| requested
        self._n_coeff = 0
        self._sign_a = np.empty(0)
        self._log_a = np.empty(0)
        self._sign_b = np.empty(0)
        self._log_b = np.empty(0)
        self._extend(int(self.x + 10.0 * self.x ** (1.0 / 3.0) + 32))
        self.ell_cap = ell_cap

    def _extend(self, n: int) -> None:
        if n <= self._n_coeff:
            return
        sa, la, sb, lb = _mie_ab_log_arrays(self.x, n)
        self._sign_a, self._log_a = sa, la
        self._sign_b, self._log_b = sb, lb
        self._n_coeff = n

    def _cap_for(self, z_extreme: float) -> int:
        if self.ell_cap is not None:
            return self.ell_cap
        # dominant ell grows like x * sqrt((|z|+1)/2) (impact parameter)
        return int(3.0 * self.x * math.sqrt((abs(z_extreme) + 1.0) / 2.0)) + 4000

    def __call__(self, z: np.ndarray):
        """Scaled amplitudes at cos(Theta) = z (array, z <= -1).

        Returns
        -------
        (mant_perp, mant_par, log_scale) : arrays
            S_perp = mant_perp * exp(log_scale), same log for S_par.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z > -1.0 + 1e-9):
            raise ValueError("amplitudes require cos(Theta) <= -1")
        z = np.minimum(z, -1.0)  # clip roundoff from the kinematic bound
        cap = self._cap_for(float(np.min(z)))
        rec = AngularRecurrence(z)
        acc_perp = np.zeros_like(z)
        acc_par = np.zeros_like(z)
        # seed the scale with the ell=1 coefficient exponent
        self._extend(8)
        log_acc = np.full_like(z, self._log_a[0])
        calm = 0
        ell = 1
        rel = math.inf
        while True:
            if ell > self._n_coeff:
                self._extend(min(cap, max(int(self._n_coeff * self.GROWTH), ell + 64)))
            c_ell = (2.0 * ell + 1.0) / (ell * (ell + 1.0))
            ea = self._log_a[ell - 1] + rec.log_offset - log_acc
            eb = self._log_b[ell - 1] + rec.log_offset - log_acc
            # keep exponents representable: raise the accumulator scale
            # wherever the bare term exponent runs ahead
            lead = np.maximum(ea, eb)
            hot = lead > 80.0
            if np.any(hot):
                shift = np.where(hot, lead - 80.0, 0.0)
                damp = np.exp(-shift)
                acc_perp *= damp
                acc_par *= damp
                log_acc += shift
                ea -= shift
                eb -= shift
            wa = self._sign_a[ell - 1] * np.exp(ea)
            wb = self._sign_b[ell - 1] * np.exp(eb)
            t_perp = c_ell * (wa * rec.pi + wb * rec.tau)
            t_par = c_ell * (wa * rec.tau + wb * rec.pi)
            acc_perp += t_perp
            acc_par += t_par
            # renormalize the accumulator mantissas
            mag = np.maximum(np.abs(acc_perp), np.abs(acc_par))
            big = mag > 1e50
            if np.any(big):
                scale = np.where(big, mag, 1.0)
                acc_perp /= scale
                acc_par /= scale
                log_acc += np.log(scale)
            if ell > self.x:
                rel = np.max(
                    (np.abs(t_perp) + np.abs(t_par))
                    / np.maximum(np.abs(acc_perp) + np.abs(acc_par), 1e-280)
                )
                calm = calm + 1 if rel < self.tol else 0
                if calm >= 3:
                    break
            if ell >= cap:
                raise TruncationError(
                    f"partial-wave sum not converged by ell={ell} (x={self.x})",
                    ell,
                    float(rel),
                )
            rec.advance()
            ell += 1
        return acc_perp, acc_par, log_acc


def amplitudes_exact(xi: float, R: float, cos_theta: float, tol: float = 1e-13) -> AmplitudePair:
    """Exact S_perp, S_par by adaptive partial-wave summation (scalar API)."""
    mant_perp, mant_par, log_acc = ExactAmplitudes(xi, R, tol=tol)(np.array([cos_theta]))
    return AmplitudePair(
        ScaledValue(float(mant_perp[0]), float(log_acc[0])).normalized(),
        ScaledValue(float(mant_par[0]), float(log_acc[0])).normalized(),
    )


def wkb_diffraction_s(xi: float, cos_theta: float) -> tuple[float, float]:
    """Diffraction corrections (s_perp, s_par) of the order-1/R WKB amplitude.

    s_perp = (1/2 xi) cos(Theta)/sin^3(Theta/2), s_par = -(1/2 xi)/sin^3(Theta/2).
    """
    sh = math.sqrt(0.5 * (1.0 - cos_theta))
    return 0.5 * cos_theta / (xi * sh**3), -0.5 / (xi * sh**3)


def amplitudes_wkb(xi: float, R: float, cos_theta: float, order: int = 1) -> AmplitudePair:
    """WKB amplitudes S_p = (-1)^p (xi R/2) e^{2 xi R sin(Theta/2)}, p=1 perp, p=2 par.

    order=1 multiplies each by (1 + s_p/R).  The returned ScaledValues keep
    the physical exponent 2 xi R sin(Theta/2) in `log_scale` unnormalized,
    so that its exact cancellation against the translation factors can be
    asserted in log space.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if xi <= 0.0 or R <= 0.0:
        raise ValueError("amplitudes_wkb requires xi > 0 and R > 0")
    sh = math.sqrt(0.5 * (1.0 - cos_theta))
    if sh < 1.0 - 1e-12:
        # unreachable for cos(Theta) <= -1; guards against real-angle misuse
        raise ValueError("forward direction (sin(Theta/2) < 1) is outside this branch")
    exponent = 2.0 * xi * R * sh
    amp = 0.5 * xi * R
    f_perp, f_par = 1.0, 1.0
    if order == 1:
        s_perp, s_par = wkb_diffraction_s(xi, cos_theta)
        f_perp += s_perp / R
        f_par += s_par / R
    return AmplitudePair(
        ScaledValue(-amp * f_perp, exponent),
        ScaledValue(+amp * f_par, exponent),
    )
