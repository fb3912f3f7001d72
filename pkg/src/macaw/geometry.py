"""Wavefront propagation through chains of curved-surface reflections.

A wavefront is carried as a propagation direction, an orthonormal tangent
basis, and a 2x2 curvature matrix expressed in that basis.  Reflection off a
convex patch and free-space propagation update the state; at the array the
state collapses to the effective direction / curvature pair in the discrete
antenna-index domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CausticCrossing, EmptyPath, GrazingIncidence, SingularProjection

Vec3 = np.ndarray  # shape (3,), float64


def unit(v) -> Vec3:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def _check_unit(v: Vec3, name: str, tol: float = 1e-9) -> None:
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"{name} must be unit length")


def make_tangent_basis(direction: Vec3) -> tuple[Vec3, Vec3]:
    """Deterministic orthonormal basis of the plane orthogonal to `direction`.

    Gram-Schmidt against the global up-vector [0,0,1]; when the direction is
    within ~8 degrees of vertical, fall back to [1,0,0].
    """
    direction = np.asarray(direction, dtype=float)
    seed = np.array([0.0, 0.0, 1.0])
    if abs(direction @ seed) > 0.99:
        seed = np.array([1.0, 0.0, 0.0])
    b1 = unit(seed - (seed @ direction) * direction)
    b2 = np.cross(direction, b1)
    return b1, b2


def reflect_direction(k_in: Vec3, normal: Vec3) -> Vec3:
    """Specular reflection of a unit direction vector."""
    k_in = np.asarray(k_in, dtype=float)
    normal = np.asarray(normal, dtype=float)
    return k_in - 2.0 * (k_in @ normal) * normal


@dataclass(frozen=True)
class WavefrontState:
    """Wavefront snapshot at a point along a ray.

    `curvature` is expressed in the (t1, t2) tangent basis, both orthogonal
    to `direction`.  `eikonal` is the accumulated path length in meters.
    `amp_i` is the source spreading factor and `amp_r` accumulates the
    determinant-ratio attenuation picked up during curved propagation.
    """

    direction: Vec3
    t1: Vec3
    t2: Vec3
    curvature: np.ndarray  # 2x2 symmetric
    eikonal: float = 0.0
    amp_i: float = 1.0
    amp_r: float = 1.0

    def __post_init__(self):
        for name in ("direction", "t1", "t2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "curvature", np.asarray(self.curvature, dtype=float))
        _check_unit(self.direction, "direction")
        _check_unit(self.t1, "t1")
        _check_unit(self.t2, "t2")
        if max(abs(self.direction @ self.t1), abs(self.direction @ self.t2),
               abs(self.t1 @ self.t2)) > 1e-10:
            raise ValueError("direction/tangent basis must be orthogonal")
        if not np.allclose(self.curvature, self.curvature.T, atol=1e-12):
            raise ValueError("curvature matrix must be symmetric")


@dataclass(frozen=True)
class SurfacePatch:
    """Local paraboloid model of a reflector around the bounce point."""

    point: Vec3
    normal: Vec3
    principal_dirs: tuple[Vec3, Vec3]
    principal_curvatures: tuple[float, float]  # 1/m, >= 0 (convex)

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float))
        object.__setattr__(
            self, "principal_dirs",
            tuple(np.asarray(d, dtype=float) for d in self.principal_dirs))
        _check_unit(self.normal, "normal")
        u1, u2 = self.principal_dirs
        _check_unit(u1, "principal_dirs[0]")
        _check_unit(u2, "principal_dirs[1]")
        if max(abs(u1 @ u2), abs(u1 @ self.normal), abs(u2 @ self.normal)) > 1e-10:
            raise ValueError("principal directions must be orthogonal to the normal")
        if min(self.principal_curvatures) < 0:
            raise ValueError("surface curvatures must be non-negative (convex)")

    @property
    def curvature_matrix(self) -> np.ndarray:
        return np.diag(self.principal_curvatures).astype(float)


@dataclass(frozen=True)
class UPAConfig:
    """Uniform planar array geometry."""

    n_y: int
    n_z: int
    d_ant: float  # meters
    center: Vec3 = field(default_factory=lambda: np.zeros(3))
    row_dir: Vec3 = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    col_dir: Vec3 = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "row_dir", np.asarray(self.row_dir, dtype=float))
        object.__setattr__(self, "col_dir", np.asarray(self.col_dir, dtype=float))
        if self.n_y < 1 or self.n_z < 1 or self.d_ant <= 0:
            raise ValueError("array dimensions and spacing must be positive")
        _check_unit(self.row_dir, "row_dir")
        _check_unit(self.col_dir, "col_dir")
        if abs(self.row_dir @ self.col_dir) > 1e-10:
            raise ValueError("row_dir and col_dir must be orthogonal")

    @property
    def normal(self) -> Vec3:
        return np.cross(self.row_dir, self.col_dir)

    @property
    def n_antennas(self) -> int:
        return self.n_y * self.n_z

    @property
    def diagonal(self) -> float:
        return self.d_ant * np.hypot(self.n_y - 1, self.n_z - 1)


@dataclass(frozen=True)
class PathGeometry:
    """One propagation path: source position plus an ordered bounce chain."""

    ue_pos: Vec3
    bounces: tuple[SurfacePatch, ...]
    reflection_loss: float = 1.0  # amplitude factor in [0, 1]
    reflection_phase: float = 0.0  # radians

    def __post_init__(self):
        object.__setattr__(self, "ue_pos", np.asarray(self.ue_pos, dtype=float))
        object.__setattr__(self, "bounces", tuple(self.bounces))
        if not 0.0 <= self.reflection_loss <= 1.0:
            raise ValueError("reflection_loss must lie in [0, 1]")


@dataclass(frozen=True)
class EffectivePathParams:
    """Discrete-index-domain parameters of one path at the array.

    k_bar: cycles per antenna index (2-vector).
    q_bar: cycles per index^2 (2x2 symmetric).
    s_bar: path length in wavelengths.
    alpha: complex gain multiplying the unit-norm steering matrix.
    """

    k_bar: np.ndarray
    q_bar: np.ndarray
    s_bar: float
    alpha: complex = 1.0 + 0.0j

    def __post_init__(self):
        object.__setattr__(self, "k_bar", np.asarray(self.k_bar, dtype=float))
        object.__setattr__(self, "q_bar", np.asarray(self.q_bar, dtype=float))


def reflect_wavefront(incident: WavefrontState, surface: SurfacePatch,
                      max_incidence_deg: float = 80.0) -> WavefrontState:
    """Reflect a wavefront off a convex patch.

    The reflected curvature is the incident curvature plus twice the surface
    curvature projected into the incident basis and scaled by the incidence
    cosine; the tangent basis is mirrored along with the direction.
    """
    k_i = incident.direction
    n = surface.normal
    cos_theta = abs(k_i @ n)
    if cos_theta < np.cos(np.radians(max_incidence_deg)):
        raise GrazingIncidence(
            f"incidence angle {np.degrees(np.arccos(cos_theta)):.1f} deg exceeds "
            f"{max_incidence_deg} deg cutoff")

    u_s1, u_s2 = surface.principal_dirs
    theta = np.array([[incident.t1 @ u_s1, incident.t1 @ u_s2],
                      [incident.t2 @ u_s1, incident.t2 @ u_s2]])
    det = np.linalg.det(theta)
    if abs(det) < 1e-6:
        raise SingularProjection(f"|det Theta| = {abs(det):.2e}")
    theta_inv = np.linalg.inv(theta)

    q_r = incident.curvature + 2.0 * cos_theta * (theta_inv.T @ surface.curvature_matrix @ theta_inv)
    q_r = 0.5 * (q_r + q_r.T)

    x1 = reflect_direction(incident.t1, n)
    x2 = reflect_direction(incident.t2, n)
    k_r = unit(reflect_direction(k_i, n))
    return replace(incident, direction=k_r, t1=x1, t2=x2, curvature=q_r)


def propagate_wavefront(w: WavefrontState, s: float) -> WavefrontState:
    """Advance a wavefront by distance `s` in free space.

    Curvature eigenvalues map as q -> q / (1 + s q); a flat direction (q = 0)
    stays flat.  The amplitude factor accumulates prod 1/sqrt(1 + s q) per
    eigenvalue, the determinant-ratio spreading loss.
    """
    if s <= 0:
        raise ValueError("propagation distance must be positive")
    evals, evecs = np.linalg.eigh(w.curvature)
    denom = 1.0 + s * evals
    if np.any(denom <= 0):
        raise CausticCrossing(f"1 + s*q = {denom.min():.3e} <= 0")
    new_evals = evals / denom
    q_new = evecs @ np.diag(new_evals) @ evecs.T
    q_new = 0.5 * (q_new + q_new.T)
    amp = float(np.prod(1.0 / np.sqrt(denom)))
    return replace(w, curvature=q_new, eikonal=w.eikonal + s,
                   amp_r=w.amp_r * amp)


def trace_path(path: PathGeometry, upa: UPAConfig,
               max_incidence_deg: float = 80.0,
               rayleigh_ref: float | None = None) -> WavefrontState:
    """Trace a source wavefront through all bounces to the array center.

    Starts as an isotropic spherical wave from the source, alternates
    propagation and reflection over the bounce chain, and finishes with the
    final leg to the array center.  The 1/s_i source spreading is folded
    into amp_i.
    """
    if not path.bounces:
        raise EmptyPath("path has no bounces")

    first = path.bounces[0]
    s_i = float(np.linalg.norm(first.point - path.ue_pos))
    if rayleigh_ref is not None and s_i < rayleigh_ref:
        warnings.warn(
            f"source-to-first-bounce distance {s_i:.2f} m below the Rayleigh "
            f"reference {rayleigh_ref:.2f} m; isotropic incident assumption is weak",
            stacklevel=2)

    k0 = unit(first.point - path.ue_pos)
    t1, t2 = make_tangent_basis(k0)
    w = WavefrontState(direction=k0, t1=t1, t2=t2,
                       curvature=np.eye(2) / s_i, eikonal=s_i,
                       amp_i=1.0 / s_i)

    pos = first.point
    w = reflect_wavefront(w, first, max_incidence_deg)
    for surf in path.bounces[1:]:
        seg = float(np.linalg.norm(surf.point - pos))
        w = propagate_wavefront(w, seg)
        pos = surf.point
        w = reflect_wavefront(w, surf, max_incidence_deg)
    s_r = float(np.linalg.norm(upa.center - pos))
    return propagate_wavefront(w, s_r)


def projection_matrix(w: WavefrontState, upa: UPAConfig) -> np.ndarray:
    """2x2 projection of the wavefront tangent basis onto the array axes."""
    return np.array([[w.t1 @ upa.row_dir, w.t1 @ upa.col_dir],
                     [w.t2 @ upa.row_dir, w.t2 @ upa.col_dir]])


def effective_params(w: WavefrontState, upa: UPAConfig, wavelength: float,
                     alpha: complex = 1.0 + 0.0j) -> EffectivePathParams:
    """Collapse a traced wavefront to discrete-index-domain path parameters."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    k_bar = (upa.d_ant / wavelength) * np.array(
        [w.direction @ upa.row_dir, w.direction @ upa.col_dir])
    p = projection_matrix(w, upa)
    q_bar = (upa.d_ant ** 2 / wavelength) * (p.T @ w.curvature @ p)
    q_bar = 0.5 * (q_bar + q_bar.T)
    return EffectivePathParams(k_bar=k_bar, q_bar=q_bar,
                               s_bar=w.eikonal / wavelength, alpha=alpha)


def is_plane_wave(w: WavefrontState, upa: UPAConfig, wavelength: float) -> bool:
    """Rayleigh criterion on curvature: planar iff max curvature <= lambda/(2 D^2)."""
    q_max = float(np.linalg.eigvalsh(w.curvature).max())
    return q_max <= wavelength / (2.0 * upa.diagonal ** 2)
