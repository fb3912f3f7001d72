"""Steering matrices and wideband multipath channel synthesis.

Vectorization convention, fixed package-wide: vec() stacks the n_y x n_z
steering matrix column-major with the row index (n_y) running fastest,
i.e. numpy order='F'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroReference
from .geometry import EffectivePathParams, UPAConfig, Vec3

C0 = 299_792_458.0  # m/s


@dataclass(frozen=True)
class OFDMConfig:
    """Pilot comb: M subcarriers spanning bandwidth B, centered at carrier_f."""

    carrier_f: float  # Hz
    bandwidth: float  # Hz
    n_subcarriers: int

    def __post_init__(self):
        if self.carrier_f <= 0 or self.bandwidth <= 0 or self.n_subcarriers < 1:
            raise ValueError("OFDM parameters must be positive")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def wavelength(self) -> float:
        return C0 / self.carrier_f

    @property
    def delta_m(self) -> np.ndarray:
        """Symmetric subcarrier offsets m - (M+1)/2 for m = 1..M."""
        m = np.arange(1, self.n_subcarriers + 1, dtype=float)
        return m - (self.n_subcarriers + 1) / 2.0

    @property
    def split_factor(self) -> np.ndarray:
        """Per-subcarrier frequency ratio 1 + (delta_f/f) * delta_m."""
        return 1.0 + (self.subcarrier_spacing / self.carrier_f) * self.delta_m


def index_offsets(n_y: int, n_z: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered antenna index offsets along the two array axes."""
    dy = np.arange(1, n_y + 1, dtype=float) - (n_y + 1) / 2.0
    dz = np.arange(1, n_z + 1, dtype=float) - (n_z + 1) / 2.0
    return dy, dz


def vec(c: np.ndarray) -> np.ndarray:
    return c.reshape(-1, order="F")


def unvec(v: np.ndarray, n_y: int, n_z: int) -> np.ndarray:
    return v.reshape(n_y, n_z, order="F")


def spatial_phase(k_bar: np.ndarray, q_bar: np.ndarray,
                  n_y: int, n_z: int) -> np.ndarray:
    """Per-element phase argument k.n + n'Qn/2, in cycles, as an n_y x n_z grid."""
    dy, dz = index_offsets(n_y, n_z)
    gy = dy[:, None]
    gz = dz[None, :]
    return (k_bar[0] * gy + k_bar[1] * gz
            + 0.5 * (q_bar[0, 0] * gy ** 2
                     + 2.0 * q_bar[0, 1] * gy * gz
                     + q_bar[1, 1] * gz ** 2))


def awc_steering(k_bar, q_bar, n_y: int, n_z: int) -> np.ndarray:
    """Unit-Frobenius-norm steering matrix with linear plus quadratic phase."""
    k_bar = np.asarray(k_bar, dtype=float)
    q_bar = np.asarray(q_bar, dtype=float)
    phase = spatial_phase(k_bar, q_bar, n_y, n_z)
    return np.exp(-2j * np.pi * phase) / np.sqrt(n_y * n_z)


def swc_steering(k_los: Vec3, r_los: float, upa: UPAConfig,
                 wavelength: float) -> np.ndarray:
    """Spherical-wavefront steering matrix for a source along k_los at r_los."""
    if r_los <= 0:
        raise ValueError("r_los must be positive")
    k_los = np.asarray(k_los, dtype=float)
    dy, dz = index_offsets(upa.n_y, upa.n_z)
    # p = d*(dy*row_dir + dz*col_dir); row/col dirs orthonormal
    ky = k_los @ upa.row_dir
    kz = k_los @ upa.col_dir
    gy = upa.d_ant * dy[:, None]
    gz = upa.d_ant * dz[None, :]
    kp = ky * gy + kz * gz
    p_sq = gy ** 2 + gz ** 2
    phase = (kp + (p_sq - kp ** 2) / (2.0 * r_los)) / wavelength
    return np.exp(-2j * np.pi * phase) / np.sqrt(upa.n_antennas)


def swc_q_bar(k_bar: np.ndarray, r_inv: float, d_ant: float,
              wavelength: float) -> np.ndarray:
    """Index-domain curvature matrix of a spherical wavefront.

    Equals (d^2/lambda) * (1/R) * (I - (lambda/d)^2 k_bar k_bar^T), the exact
    quadratic form of `swc_steering` for arrival direction k_bar.
    """
    k_bar = np.asarray(k_bar, dtype=float)
    g = np.eye(2) - (wavelength / d_ant) ** 2 * np.outer(k_bar, k_bar)
    return (d_ant ** 2 / wavelength) * r_inv * g


def wideband_path(params: EffectivePathParams, ofdm: OFDMConfig,
                  n_y: int, n_z: int) -> np.ndarray:
    """Single-path wideband channel, N x M, with exact beam split.

    Column m is alpha / sqrt(N) * exp(-j 2 pi f_m (s_bar + spatial phase))
    where f_m is the per-subcarrier frequency ratio.
    """
    phase = params.s_bar + spatial_phase(params.k_bar, params.q_bar, n_y, n_z)
    phi = vec(phase)
    h = np.exp(-2j * np.pi * np.outer(phi, ofdm.split_factor))
    return (params.alpha / np.sqrt(n_y * n_z)) * h


def synth_channel(paths, ofdm: OFDMConfig, upa: UPAConfig) -> np.ndarray:
    """Multipath wideband channel: superposition of all path components."""
    paths = list(paths)
    if not paths:
        raise ValueError("at least one path is required")
    h = np.zeros((upa.n_antennas, ofdm.n_subcarriers), dtype=complex)
    for p in paths:
        h += wideband_path(p, ofdm, upa.n_y, upa.n_z)
    return h


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Squared-Frobenius error normalized by the reference energy."""
    if estimate.shape != truth.shape:
        raise ValueError("shape mismatch")
    ref = np.linalg.norm(truth) ** 2
    if ref == 0:
        raise ZeroReference("reference channel has zero norm")
    return float(np.linalg.norm(estimate - truth) ** 2 / ref)
