"""Randomized multipath scenario generation and the fixed benchmark setups.

Scatterers are placed on ellipsoids with the base-station and user positions
as foci so that consecutive total path lengths are separated by roughly one
distance-resolution cell.  Each scatterer is a convex cylinder patch with a
random in-plane orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import C0, OFDMConfig, synth_channel
from .errors import SamplingExhausted, ValidationError
from .geometry import (EffectivePathParams, PathGeometry, SurfacePatch,
                       UPAConfig, Vec3, effective_params, make_tangent_basis,
                       trace_path, unit)

MAX_REJECTIONS = 100_000


def near_field_reference(upa: UPAConfig, wavelength: float) -> float:
    """Minimum distance for the isotropic-paraboloid source approximation."""
    return 0.5 * np.sqrt(upa.diagonal ** 3 / wavelength)


@dataclass(frozen=True)
class ScenarioConfig:
    upa: UPAConfig
    ofdm: OFDMConfig
    ue_pos: Vec3
    n_scatterers: int = 6
    n_symbols: int = 16
    n_rf: int = 16
    snr_db: float = 10.0
    r_min: float | None = None  # default: near_field_reference / 5
    seed: int = 0
    scatterer_curvature: float = 4.0  # 1/m
    path_spacing_factor_range: tuple[float, float] = (0.8, 1.2)
    fixed_scatterer: Vec3 | None = None  # bypasses ellipsoid sampling
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ue_pos", np.asarray(self.ue_pos, dtype=float))
        if self.fixed_scatterer is not None:
            object.__setattr__(self, "fixed_scatterer",
                               np.asarray(self.fixed_scatterer, dtype=float))
        if self.n_scatterers < 1:
            raise ValidationError("n_scatterers must be >= 1")
        if self.n_symbols < 1 or self.n_rf < 1:
            raise ValidationError("n_symbols and n_rf must be >= 1")
        if self.r_min is None:
            object.__setattr__(
                self, "r_min",
                near_field_reference(self.upa, self.ofdm.wavelength) / 5.0)

    @property
    def n_measurements(self) -> int:
        return self.n_symbols * self.n_rf

    @property
    def d_los(self) -> float:
        return float(np.linalg.norm(self.ue_pos - self.upa.center))

    @property
    def distance_resolution(self) -> float:
        return C0 / self.ofdm.bandwidth


@dataclass(frozen=True)
class Scenario:
    """A realized multipath scene with its ground truth."""

    config: ScenarioConfig
    paths: tuple[PathGeometry, ...]
    true_params: tuple[EffectivePathParams, ...]

    def channel(self) -> np.ndarray:
        return synth_channel(self.true_params, self.config.ofdm, self.config.upa)


def table1_defaults(seed: int = 0) -> ScenarioConfig:
    """Default benchmark configuration.

    128x128 UPA at 10 m height with a pi/18 downtilt toward +x, 1 cm
    spacing, 15 GHz carrier, 100 MHz bandwidth with 128 pilot subcarriers,
    6 cylindrical scatterers, 16 RF chains over 16 symbols, 10 dB SNR.
    """
    phi = np.pi / 18.0
    upa = UPAConfig(
        n_y=128, n_z=128, d_ant=0.01,
        center=np.array([0.0, 0.0, 10.0]),
        row_dir=np.array([0.0, 1.0, 0.0]),
        col_dir=np.array([np.sin(phi), 0.0, np.cos(phi)]),
    )
    ofdm = OFDMConfig(carrier_f=15e9, bandwidth=100e6, n_subcarriers=128)
    return ScenarioConfig(
        upa=upa, ofdm=ofdm, ue_pos=np.array([30.0, 0.0, 1.5]),
        n_scatterers=6, n_symbols=16, n_rf=16, snr_db=10.0,
        r_min=1.7, seed=seed, scatterer_curvature=4.0,
    )


def _sample_on_ellipsoid(rng: np.random.Generator, f1: Vec3, f2: Vec3,
                         dist_sum: float) -> Vec3:
    """Area-uniform sample on the prolate spheroid with foci f1, f2."""
    mid = 0.5 * (f1 + f2)
    axis = unit(f2 - f1)
    v, w = make_tangent_basis(axis)
    a = 0.5 * dist_sum
    cf = 0.5 * float(np.linalg.norm(f2 - f1))
    if a <= cf:
        raise ValidationError("focal distance sum must exceed the focal separation")
    b = np.sqrt(a * a - cf * cf)
    while True:
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        # area-element correction for the sphere-to-spheroid map
        sigma = b * np.sqrt(b * b * u[0] ** 2 + a * a * (1.0 - u[0] ** 2))
        if rng.uniform() * (a * b) <= sigma:
            return mid + a * u[0] * axis + b * (u[1] * v + u[2] * w)


def _scatterer_patch(rng: np.random.Generator, point: Vec3, p_bs: Vec3,
                     p_ue: Vec3, curvature: float) -> SurfacePatch:
    """Convex patch at `point` whose normal satisfies the reflection law."""
    normal = unit(unit(p_bs - point) + unit(p_ue - point))
    t1, t2 = make_tangent_basis(normal)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    u1 = np.cos(ang) * t1 + np.sin(ang) * t2
    u2 = -np.sin(ang) * t1 + np.cos(ang) * t2
    return SurfacePatch(point=point, normal=normal, principal_dirs=(u1, u2),
                        principal_curvatures=(curvature, 0.0))


def gen_scenario(config: ScenarioConfig) -> Scenario:
    """Realize a scenario from its config, deterministically in the seed."""
    rng = np.random.default_rng(config.seed)
    upa = config.upa
    wavelength = config.ofdm.wavelength
    res = config.distance_resolution
    lo, hi = config.path_spacing_factor_range

    paths = []
    params = []
    d_prev = config.d_los
    rayleigh_ref = near_field_reference(upa, wavelength)
    for _ in range(config.n_scatterers):
        d_k = d_prev + rng.uniform(lo, hi) * res
        d_prev = d_k
        if config.fixed_scatterer is not None:
            p_scat = config.fixed_scatterer
        else:
            p_scat = _reject_sample_scatterer(rng, config, d_k)
        patch = _scatterer_patch(rng, p_scat, upa.center, config.ue_pos,
                                 config.scatterer_curvature)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        loss = rng.uniform(0.2, 0.8)
        path = PathGeometry(ue_pos=config.ue_pos, bounces=(patch,),
                            reflection_loss=loss, reflection_phase=phase)
        w = trace_path(path, upa, rayleigh_ref=None)
        alpha = (np.sqrt(upa.n_antennas) * loss * np.exp(1j * phase)
                 * w.amp_i * w.amp_r)
        params.append(effective_params(w, upa, wavelength, alpha=alpha))
        paths.append(path)
    return Scenario(config=config, paths=tuple(paths), true_params=tuple(params))


def _reject_sample_scatterer(rng: np.random.Generator, config: ScenarioConfig,
                             d_k: float) -> Vec3:
    upa = config.upa
    seg = config.ue_pos - upa.center
    seg_len_sq = float(seg @ seg)
    for _ in range(MAX_REJECTIONS):
        p = _sample_on_ellipsoid(rng, upa.center, config.ue_pos, d_k)
        rel = p - upa.center
        if np.linalg.norm(rel) <= config.r_min:
            continue
        if rel @ upa.normal <= 0.0:
            continue
        t = float(rel @ seg) / seg_len_sq
        if not 0.0 < t < 1.0:
            continue
        return p
    raise SamplingExhausted(
        f"no valid scatterer position after {MAX_REJECTIONS} rejections")


def experiment_configs(which: int, seed: int = 0) -> list[ScenarioConfig]:
    """Single-scatterer parameter sweeps probing model deviation.

    1: scatterer-to-array distance {5, 10, 20} m with fixed direction and
       fixed scatterer-to-user displacement.
    2: user-to-scatterer distance {2.0, 22.8, 50.0} m, scatterer fixed.
    3: (array scale, carrier) {(64^2, 7.5 GHz), (128^2, 15 GHz),
       (256^2, 30 GHz)} at constant physical aperture.
    4: scatterer curvature {0, 0.5, 4} 1/m.
    """
    if which not in (1, 2, 3, 4):
        raise ValidationError("experiment index must be in 1..4")
    base = table1_defaults(seed=seed)
    base = replace(base, n_scatterers=1)
    scat0 = np.array([8.0, 4.0, 6.0])
    ue0 = np.asarray(base.ue_pos)
    out = []
    if which == 1:
        u = unit(scat0 - base.upa.center)
        scat_to_ue = ue0 - scat0
        for dist in (5.0, 10.0, 20.0):
            p = base.upa.center + dist * u
            out.append(replace(base, fixed_scatterer=p, ue_pos=p + scat_to_ue,
                               label=f"bs_scat_{dist:g}m"))
    elif which == 2:
        u = unit(ue0 - scat0)
        for dist in (2.0, 22.8, 50.0):
            out.append(replace(base, fixed_scatterer=scat0,
                               ue_pos=scat0 + dist * u,
                               label=f"scat_ue_{dist:g}m"))
    elif which == 3:
        aperture = base.upa.d_ant * (base.upa.n_y - 1)
        for n, f in ((64, 7.5e9), (128, 15e9), (256, 30e9)):
            upa = replace(base.upa, n_y=n, n_z=n, d_ant=aperture / (n - 1))
            ofdm = replace(base.ofdm, carrier_f=f)
            out.append(replace(base, upa=upa, ofdm=ofdm, r_min=None,
                               fixed_scatterer=scat0,
                               label=f"array_{n}sq_{f / 1e9:g}GHz"))
    else:
        for curv in (0.0, 0.5, 4.0):
            out.append(replace(base, fixed_scatterer=scat0,
                               scatterer_curvature=curv,
                               label=f"curv_{curv:g}"))
    return out
