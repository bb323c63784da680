"""Nystrom evaluation of E = (hbar/2pi) int dxi tr ln(1 - M).

The round-trip operator at fixed imaginary frequency xi acts on plane-wave
channels (k, phi, pol).  Rotational symmetry about z makes its kernel depend
on the azimuths only through dphi, so a Fourier transform over dphi block-
diagonalizes it into azimuthal blocks M_m; the energy is a xi-quadrature of
sum_m (2 - delta_m0) ln det(1 - M_m).

Symmetrization.  Each matrix element is dressed with the translation factors
e^{-kappa (L+R)} on both legs, the symmetric square-root of the radial
quadrature weights k_i w_i / 2pi, and the similarity sqrt(kappa_out/kappa_in)
that turns the 1/kappa_out of the sphere element into 1/sqrt(kappa_in
kappa_out).  In the Fourier domain the polarization-diagonal kernels are even
in dphi (real cosine coefficients C_m) and the mixed kernels odd (imaginary
coefficients -i S_m); a further similarity diag(1, -i) on the TE sector then
yields the real symmetric block

    [[ C_m[MM],  X_m ], [ X_m^T, -C_m[EE] ]],

where X_m(a, b) is the sine transform of pref (C S_perp + D S_par) for the
channel pair in=b -> out=a, with the plane's Fresnel signs (+1 TM, -1 TE)
folded in.  Determinants and traces are invariant under these similarities,
which the test suite checks against a direct complex construction.

All exponentially large and small factors combine in log space before
exponentiation: the WKB growth 2 xi R sin(Theta/2) never exceeds the
translation damping, so every assembled entry is a plain float.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .asymptotics import e_pfa
from .core import Geometry
from .mie import ExactAmplitudes
from .reflection import KernelKind, chi_components


class NonContractiveKernelError(RuntimeError):
    """A round-trip block has spectral radius >= 1 (nonphysical kernel)."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RationalStretch:
    """Map Gauss-Legendre nodes t in (0,1) to (0, inf) via x = scale*t/(1-t)."""

    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError("stretch scale must be positive and finite")

    def nodes_weights(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * (t + 1.0)
        w = 0.5 * w
        x = self.scale * t / (1.0 - t)
        jac = self.scale / (1.0 - t) ** 2
        return x, w * jac


@dataclass(frozen=True)
class QuadratureConfig:
    """Discretization knobs for the radial, azimuthal and frequency grids.

    m_max=None lets the solver truncate the azimuthal sum automatically once
    the block Frobenius norm has decayed below 1e-10 of the m=0 block.
    """

    n_radial: int
    n_azimuthal: int
    n_xi: int
    m_max: int | None = None
    radial_transform: RationalStretch = field(default_factory=RationalStretch)
    xi_transform: RationalStretch = field(default_factory=RationalStretch)
    prune_log_cutoff: float = -46.0

    def __post_init__(self) -> None:
        for name in ("n_radial", "n_azimuthal", "n_xi"):
            if getattr(self, name) < 4:
                raise ValueError(f"{name} must be >= 4")
        if not _is_power_of_two(self.n_azimuthal):
            raise ValueError("n_azimuthal must be a power of two (FFT length)")
        if self.m_max is not None and not (0 <= self.m_max <= self.n_azimuthal // 2):
            raise ValueError("m_max must lie in [0, n_azimuthal/2]")

    @classmethod
    def auto(cls, geometry: Geometry) -> "QuadratureConfig":
        """Defaults scaled with sqrt(R/L): radial/angular widths ~ sqrt(L/R)."""
        rho = geometry.aspect_ratio
        n_rad = max(16, int(math.ceil(8.4 * math.sqrt(rho))))
        m_est = max(8, int(math.ceil(5.5 * math.sqrt(rho))))
        n_az = 1 << max(6, (2 * m_est - 1).bit_length())
        return cls(n_radial=n_rad, n_azimuthal=n_az, n_xi=40)


@dataclass(frozen=True)
class BlockMatrix:
    """One azimuthal block of the symmetrized round-trip operator."""

    m: int
    xi: float
    entries: np.ndarray  # (2 n_radial, 2 n_radial), real symmetric


@dataclass(frozen=True)
class EnergyReport:
    energy: float  # hbar c / L
    ratio_to_pfa: float
    kernel: KernelKind
    config: QuadratureConfig
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "energy_hbar_c_over_L": self.energy,
            "ratio_to_pfa": self.ratio_to_pfa,
            "kernel": self.kernel.value,
            "n_radial": self.config.n_radial,
            "n_azimuthal": self.config.n_azimuthal,
            "n_xi": self.config.n_xi,
            "m_max": self.config.m_max,
            "radial_scale": self.config.radial_transform.scale,
            "xi_scale": self.config.xi_transform.scale,
            "diagnostics": self.diagnostics,
        }


def _fourier_kernels(xi: float, geometry: Geometry, kind: KernelKind,
                     config: QuadratureConfig):
    """Per-m Fourier coefficients of the symmetrized kernels at one xi.

    Returns (ii, jj, cmm, cee, x_ij, x_ji) where ii <= jj index the kept
    radial node pairs and each coefficient array has shape
    (n_pairs, n_azimuthal/2 + 1).  cee already carries the folded -1 of the
    TE Fresnel sign; x_ij / x_ji are the sine coefficients of the mixed
    kernel for (out=i, in=j) and (out=j, in=i).
    """
    rho = geometry.aspect_ratio
    n = config.n_radial
    m_grid = config.n_azimuthal
    mh = m_grid // 2
    k, wk = config.radial_transform.nodes_weights(n)
    kap = np.hypot(xi, k)
    log_w = 0.5 * np.log(k * wk / (2.0 * math.pi))

    # pair pruning: the total exponent at the most favorable azimuth dphi=0
    # is -(kap_a+kap_b) - rho*eta0 with eta0 = kap_a+kap_b - sqrt(2(xi^2+P0))
    ii, jj = np.triu_indices(n)
    ka, kb = k[ii], k[jj]
    kapa, kapb = kap[ii], kap[jj]
    p0 = kapa * kapb + ka * kb
    eta0 = kapa + kapb - np.sqrt(2.0 * (xi * xi + p0))
    bound = (
        -(kapa + kapb)
        - rho * eta0
        + log_w[ii]
        + log_w[jj]
        + math.log(4.0 * math.pi * (rho + 1.0))
    )
    keep = bound > config.prune_log_cutoff
    ii, jj = ii[keep], jj[keep]
    if ii.size == 0:
        empty = np.zeros((0, mh + 1))
        return ii, jj, empty, empty, empty, empty, k, wk

    ka, kb = k[ii][:, None], k[jj][:, None]
    kapa, kapb = kap[ii][:, None], kap[jj][:, None]
    delta = (2.0 * math.pi / m_grid) * np.arange(mh + 1)[None, :]

    # rotation coefficients for the orientation in=j -> out=i
    ci, co, si, so = chi_components(xi, kb, ka, kapb, kapa, delta)
    a = co * ci
    b = so * si
    c = so * ci
    d = -co * si

    # P - xi^2 via the cancellation-free split (see reflection.chi_components)
    p_diff = (xi * xi) * (ka - kb) ** 2 / (
        kapa * kapb + ka * kb + xi * xi
    ) + 2.0 * ka * kb * np.cos(0.5 * delta) ** 2
    p_dot = xi * xi + p_diff
    log_static = (
        -(kapa + kapb) * (1.0 + rho)
        + log_w[ii][:, None]
        + log_w[jj][:, None]
        - 0.5 * (np.log(kapa) + np.log(kapb))
    )
    if kind is KernelKind.EXACT_MIE:
        z = -1.0 - p_diff / (xi * xi)
        amps = ExactAmplitudes(xi, rho)
        mant_perp, mant_par, log_amp = amps(z.ravel())
        s_perp = mant_perp.reshape(z.shape)
        s_par = mant_par.reshape(z.shape)
        factor = np.exp(log_amp.reshape(z.shape) + log_static) * (2.0 * math.pi / xi)
    else:
        h = np.sqrt(0.5 * (xi * xi + p_dot))
        if kind is KernelKind.WKB1:
            # Resummed diffraction factor e^{s_p/R} instead of 1 + s_p/R:
            # identical through order 1/R, but bounded in (0, 1] (both s_p
            # are strictly negative).  The linear form diverges like
            # -1/(2 xi R) near backscattering at small xi (the glory
            # region), which destroys contraction of the discretized block
            # even though that region's true contribution is negligible.
            inv2h3 = 0.5 / h**3
            s_par = np.exp(-(xi * xi * inv2h3) / rho)    # e^{s_par_wkb / R}
            s_perp = -np.exp(-(p_dot * inv2h3) / rho)    # -e^{s_perp_wkb / R}
        else:
            s_par = np.ones_like(h)
            s_perp = np.full_like(h, -1.0)
        factor = np.exp(2.0 * rho * h + log_static) * (math.pi * rho)

    cmm = (a * s_par + b * s_perp) * factor
    cee = (a * s_perp + b * s_par) * (-factor)
    x_ij = (c * s_perp + d * s_par) * factor
    x_ji = (c * s_par + d * s_perp) * (-factor)

    def cos_coeff(half: np.ndarray) -> np.ndarray:
        full = np.empty((half.shape[0], m_grid))
        full[:, : mh + 1] = half
        full[:, mh + 1:] = half[:, mh - 1:0:-1]
        return np.fft.rfft(full, axis=1).real / m_grid

    def sin_coeff(half: np.ndarray) -> np.ndarray:
        full = np.empty((half.shape[0], m_grid))
        full[:, : mh + 1] = half
        full[:, mh + 1:] = -half[:, mh - 1:0:-1]
        return -np.fft.rfft(full, axis=1).imag / m_grid

    return ii, jj, cos_coeff(cmm), cos_coeff(cee), sin_coeff(x_ij), sin_coeff(x_ji), k, wk


def _assemble_block(n, m, ii, jj, cmm, cee, x_ij, x_ji) -> np.ndarray:
    """Scatter the pair coefficients of azimuthal order m into a 2n x 2n block."""
    block = np.zeros((2 * n, 2 * n))
    mm = block[:n, :n]
    ee = block[n:, n:]
    x = block[:n, n:]
    mm[ii, jj] = cmm[:, m]
    mm[jj, ii] = cmm[:, m]
    ee[ii, jj] = cee[:, m]
    ee[jj, ii] = cee[:, m]
    x[ii, jj] = x_ij[:, m]
    x[jj, ii] = x_ji[:, m]
    block[n:, :n] = x.T
    return block


def _iter_blocks(xi: float, geometry: Geometry, kind: KernelKind,
                 config: QuadratureConfig) -> Iterator[BlockMatrix]:
    """Yield blocks for m = 0, 1, ... up to m_max or the auto-decay cutoff."""
    ii, jj, cmm, cee, x_ij, x_ji, _, _ = _fourier_kernels(xi, geometry, kind, config)
    n = config.n_radial
    mh = config.n_azimuthal // 2
    m_cap = mh if config.m_max is None else config.m_max
    norm0 = None
    for m in range(m_cap + 1):
        if ii.size == 0:
            return
        block = _assemble_block(n, m, ii, jj, cmm, cee, x_ij, x_ji)
        norm = float(np.linalg.norm(block))
        if norm0 is None:
            norm0 = norm if norm > 0.0 else 1.0
        elif config.m_max is None and norm < 1e-10 * norm0:
            return
        yield BlockMatrix(m=m, xi=xi, entries=block)


def build_blocks(xi: float, geometry: Geometry, kind: KernelKind,
                 config: QuadratureConfig) -> list[BlockMatrix]:
    """All azimuthal blocks at one frequency (see _iter_blocks for truncation)."""
    return list(_iter_blocks(xi, geometry, kind, config))


def log_det_contribution(block: BlockMatrix) -> float:
    """ln det(1 - M_m) by Cholesky factorization of the symmetric 1 - M_m.

    The caller applies the (2 - delta_m0) degeneracy weight.  Failure of the
    factorization means 1 - M_m is not positive definite, i.e. the
    discretized round trip is not contractive.
    """
    a = -block.entries.copy()
    np.fill_diagonal(a, a.diagonal() + 1.0)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NonContractiveKernelError(
            f"1 - M not positive definite at xi={block.xi}, m={block.m}"
        ) from exc
    return 2.0 * float(np.sum(np.log(chol.diagonal())))


def _xi_contribution(args) -> tuple[float, int]:
    """Sum_m (2 - delta_m0) ln det(1 - M_m) at one xi node; returns (sum, m_used)."""
    xi, geometry, kind, config = args
    mh = config.n_azimuthal // 2
    total = 0.0
    m_used = -1
    calm = 0
    for block in _iter_blocks(xi, geometry, kind, config):
        weight = 1.0 if block.m in (0, mh) else 2.0
        contrib = weight * log_det_contribution(block)
        total += contrib
        m_used = block.m
        # secondary truncation: the kink of the kernel at dphi = pi gives
        # the block norms a power-law tail in m, so the norm rule of
        # _iter_blocks rarely fires; the log-det contributions decay like
        # the squared norm and can be cut much earlier
        if config.m_max is None and block.m >= 8:
            calm = calm + 1 if abs(contrib) < 1e-13 * abs(total) else 0
            if calm >= 2:
                break
    return total, m_used


def energy(geometry: Geometry, kind: KernelKind,
           config: QuadratureConfig | None = None, threads: int = 1) -> EnergyReport:
    """Casimir energy in units hbar c / L, with the ratio to the PFA value.

    The xi integral runs over Gauss-Legendre nodes mapped through the
    rational stretch of config.xi_transform; each node is independent, so
    threads > 1 distributes nodes over a process pool (results are summed
    in fixed node order regardless of scheduling).
    """
    if config is None:
        config = QuadratureConfig.auto(geometry)
    xi_nodes, xi_weights = config.xi_transform.nodes_weights(config.n_xi)
    jobs = [(float(xi), geometry, kind, config) for xi in xi_nodes]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_xi_contribution, jobs))
    else:
        results = [_xi_contribution(job) for job in jobs]
    g_values = np.array([res[0] for res in results])
    m_used = max((res[1] for res in results), default=-1)
    total = float(np.dot(xi_weights, g_values)) / (2.0 * math.pi)
    pfa = e_pfa(geometry)
    order = np.argsort(xi_nodes)
    tail = float(abs(xi_weights[order][-1] * g_values[order][-1]))
    diagnostics = {
        "m_max_used": m_used,
        "xi_tail_abs": tail / (2.0 * math.pi),
        "xi_max": float(np.max(xi_nodes)),
    }
    return EnergyReport(
        energy=total,
        ratio_to_pfa=total / pfa,
        kernel=kind,
        config=config,
        diagnostics=diagnostics,
    )


def trace_Mr_numeric(r: int, xi: float, geometry: Geometry, kind: KernelKind,
                     config: QuadratureConfig) -> float:
    """Sum_m (2 - delta_m0) tr(M_m^r) at one frequency."""
    if r < 1:
        raise ValueError("round-trip count must be >= 1")
    mh = config.n_azimuthal // 2
    total = 0.0
    for block in _iter_blocks(xi, geometry, kind, config):
        weight = 1.0 if block.m in (0, mh) else 2.0
        power = np.linalg.matrix_power(block.entries, r)
        total += weight * float(np.trace(power))
    return total


def default_threads() -> int:
    """Thread-count default: PLANESPHERE_THREADS if set, else 1."""
    value = os.environ.get("PLANESPHERE_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1
