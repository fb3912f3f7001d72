"""Wavefront reflection, propagation, tracing, and index-domain collapse."""

import numpy as np
import pytest

from macaw.errors import CausticCrossing, EmptyPath, GrazingIncidence
from macaw.geometry import (PathGeometry, SurfacePatch, UPAConfig,
                            WavefrontState, effective_params, is_plane_wave,
                            make_tangent_basis, propagate_wavefront,
                            reflect_direction, reflect_wavefront, trace_path,
                            unit)


def _wavefront(direction, curvature, **kw):
    t1, t2 = make_tangent_basis(direction)
    return WavefrontState(direction=np.asarray(direction, dtype=float),
                          t1=t1, t2=t2,
                          curvature=np.asarray(curvature, dtype=float), **kw)


def _flat_patch(point, normal):
    t1, t2 = make_tangent_basis(normal)
    return SurfacePatch(point=np.asarray(point, dtype=float),
                        normal=np.asarray(normal, dtype=float),
                        principal_dirs=(t1, t2), principal_curvatures=(0.0, 0.0))


class TestTangentBasis:
    def test_z_axis_uses_fallback(self):
        b1, b2 = make_tangent_basis(np.array([0.0, 0.0, 1.0]))
        assert abs(b1 @ b2) < 1e-12
        assert abs(np.linalg.norm(b1) - 1) < 1e-12
        assert abs(np.linalg.norm(b2) - 1) < 1e-12

    def test_x_axis_orthogonality(self):
        d = np.array([1.0, 0.0, 0.0])
        b1, b2 = make_tangent_basis(d)
        assert abs(b1 @ d) < 1e-12
        assert abs(b2 @ d) < 1e-12
        assert abs(b1 @ b2) < 1e-12

    def test_random_directions_orthonormal(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            d = unit(rng.standard_normal(3))
            b1, b2 = make_tangent_basis(d)
            g = np.array([b1, b2, d])
            assert np.allclose(g @ g.T, np.eye(3), atol=1e-12)


class TestReflectDirection:
    def test_normal_incidence(self):
        out = reflect_direction(np.array([0.0, 0.0, -1.0]),
                                np.array([0.0, 0.0, 1.0]))
        assert np.allclose(out, [0.0, 0.0, 1.0])

    def test_45_degree_mirror(self):
        k = np.array([1.0, 0.0, -1.0]) / np.sqrt(2)
        out = reflect_direction(k, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(out, np.array([1.0, 0.0, 1.0]) / np.sqrt(2))

    def test_grazing_limit_unchanged(self):
        k = np.array([1.0, 0.0, 0.0])
        out = reflect_direction(k, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(out, k)


class TestReflectWavefront:
    def test_flat_mirror_preserves_curvature_spectrum(self):
        w = _wavefront([0.0, 0.0, -1.0], [[0.2, 0.05], [0.05, 0.1]])
        out = reflect_wavefront(w, _flat_patch([0, 0, 0], [0, 0, 1]))
        assert np.allclose(np.linalg.eigvalsh(out.curvature),
                           np.linalg.eigvalsh(w.curvature), atol=1e-12)

    def test_normal_incidence_sphere_focal_length(self):
        r = 3.0
        w = _wavefront([0.0, 0.0, -1.0], np.zeros((2, 2)))
        t1, t2 = make_tangent_basis(np.array([0.0, 0.0, 1.0]))
        patch = SurfacePatch(point=np.zeros(3), normal=np.array([0.0, 0.0, 1.0]),
                             principal_dirs=(t1, t2),
                             principal_curvatures=(1.0 / r, 1.0 / r))
        out = reflect_wavefront(w, patch)
        assert np.allclose(np.linalg.eigvalsh(out.curvature),
                           [2.0 / r, 2.0 / r], atol=1e-12)

    def test_cylinder_45deg_plane_wave(self):
        # plane wave at 45 degrees onto a kappa=2 cylinder whose curved
        # principal direction lies in the incidence plane: the reflected
        # principal curvatures are (2*kappa/cos(45), 0)
        k_in = unit(np.array([1.0, 0.0, -1.0]))
        w = _wavefront(k_in, np.zeros((2, 2)))
        normal = np.array([0.0, 0.0, 1.0])
        u1 = np.array([1.0, 0.0, 0.0])  # curved direction, in incidence plane
        u2 = np.array([0.0, 1.0, 0.0])
        patch = SurfacePatch(point=np.zeros(3), normal=normal,
                             principal_dirs=(u1, u2),
                             principal_curvatures=(2.0, 0.0))
        out = reflect_wavefront(w, patch)
        evals = np.sort(np.linalg.eigvalsh(out.curvature))[::-1]
        assert abs(evals[0] - 4.0 / np.cos(np.radians(45.0))) < 1e-9
        assert abs(evals[0] - 5.65685424949238) < 1e-9
        assert abs(evals[1]) < 1e-12

    def test_grazing_incidence_rejected(self):
        k_in = unit(np.array([1.0, 0.0, -0.05]))
        w = _wavefront(k_in, np.zeros((2, 2)))
        with pytest.raises(GrazingIncidence):
            reflect_wavefront(w, _flat_patch([0, 0, 0], [0, 0, 1]))


class TestPropagateWavefront:
    def test_mixed_radii(self):
        w = _wavefront([0.0, 0.0, 1.0], np.diag([0.5, 0.0]))
        out = propagate_wavefront(w, 3.0)
        assert np.allclose(np.linalg.eigvalsh(out.curvature),
                           [0.0, 0.2], atol=1e-12)

    def test_spherical_radius_adds_distance(self):
        w = _wavefront([0.0, 0.0, 1.0], np.eye(2) / 15.0)
        out = propagate_wavefront(w, 10.0)
        assert np.allclose(out.curvature, np.eye(2) / 25.0, atol=1e-12)

    def test_cylinder_example_eigenvalues(self):
        w = _wavefront([0.0, 0.0, 1.0], np.diag([5.657, 0.0]))
        out = propagate_wavefront(w, 10.0)
        evals = np.sort(np.linalg.eigvalsh(out.curvature))
        assert abs(evals[1] - 1.0 / (10.0 + 0.17678)) < 1e-6
        assert abs(evals[0]) < 1e-12

    def test_eikonal_accumulates(self):
        w = _wavefront([0.0, 0.0, 1.0], np.eye(2), eikonal=2.0)
        assert abs(propagate_wavefront(w, 5.0).eikonal - 7.0) < 1e-12

    def test_caustic_rejected(self):
        w = _wavefront([0.0, 0.0, 1.0], np.diag([-0.5, 0.0]))
        with pytest.raises(CausticCrossing):
            propagate_wavefront(w, 3.0)

    def test_monotone_eigenvalues(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.standard_normal((2, 2))
            q = a @ a.T  # PSD
            w = _wavefront([0.0, 0.0, 1.0], q)
            out = propagate_wavefront(w, rng.uniform(0.1, 20.0))
            assert np.all(np.linalg.eigvalsh(out.curvature)
                          <= np.linalg.eigvalsh(q) + 1e-12)


class TestTracePath:
    def test_single_flat_bounce_image_source(self):
        ue = np.array([4.0, 0.0, 3.0])
        bounce = np.array([4.0, 0.0, 0.0])
        upa = UPAConfig(n_y=4, n_z=4, d_ant=0.01, center=np.array([0.0, 0.0, 3.0]))
        patch = _flat_patch(bounce, unit(np.array([-0.4, 0.0, 1.0])))
        # place the normal as the bisector so the ray actually hits the array
        k_in = unit(bounce - ue)
        k_out = unit(upa.center - bounce)
        patch = _flat_patch(bounce, unit(k_out - k_in))
        w = trace_path(PathGeometry(ue_pos=ue, bounces=(patch,)), upa)
        total = np.linalg.norm(bounce - ue) + np.linalg.norm(upa.center - bounce)
        assert abs(w.eikonal - total) < 1e-12
        assert np.allclose(w.curvature, np.eye(2) / total, atol=1e-10)

    def test_two_flat_bounces_image_source(self):
        ue = np.array([6.0, 0.0, 2.0])
        b1 = np.array([4.0, 0.0, 0.0])
        b2 = np.array([2.0, 0.0, 4.0])
        upa = UPAConfig(n_y=4, n_z=4, d_ant=0.01, center=np.array([0.0, 0.0, 1.0]))
        p1 = _flat_patch(b1, unit(unit(b2 - b1) - unit(b1 - ue)))
        p2 = _flat_patch(b2, unit(unit(upa.center - b2) - unit(b2 - b1)))
        w = trace_path(PathGeometry(ue_pos=ue, bounces=(p1, p2)), upa)
        total = (np.linalg.norm(b1 - ue) + np.linalg.norm(b2 - b1)
                 + np.linalg.norm(upa.center - b2))
        assert abs(w.eikonal - total) < 1e-12
        assert np.allclose(w.curvature, np.eye(2) / total, rtol=1e-10)

    def test_empty_path_rejected(self):
        upa = UPAConfig(n_y=4, n_z=4, d_ant=0.01)
        with pytest.raises(EmptyPath):
            trace_path(PathGeometry(ue_pos=np.zeros(3), bounces=()), upa)

    def test_rayleigh_warning(self):
        ue = np.array([0.05, 0.0, 3.0])
        bounce = np.array([0.05, 0.0, 0.0])
        upa = UPAConfig(n_y=4, n_z=4, d_ant=0.01, center=np.array([0.0, 0.0, 3.0]))
        k_in = unit(bounce - ue)
        k_out = unit(upa.center - bounce)
        patch = _flat_patch(bounce, unit(k_out - k_in))
        with pytest.warns(UserWarning):
            trace_path(PathGeometry(ue_pos=ue, bounces=(patch,)), upa,
                       rayleigh_ref=100.0)


class TestEffectiveParams:
    def test_broadside_zero_direction(self):
        upa = UPAConfig(n_y=8, n_z=8, d_ant=0.01)
        w = _wavefront(-upa.normal, np.zeros((2, 2)))
        p = effective_params(w, upa, 0.02)
        assert np.allclose(p.k_bar, 0.0, atol=1e-12)

    def test_plane_wave_zero_curvature(self):
        upa = UPAConfig(n_y=8, n_z=8, d_ant=0.01)
        w = _wavefront(unit(np.array([0.3, 0.2, -1.0])), np.zeros((2, 2)))
        p = effective_params(w, upa, 0.02)
        assert np.allclose(p.q_bar, 0.0, atol=1e-15)

    def test_isotropic_scaling_arithmetic(self):
        # d=1cm, lambda=2cm, spherical curvature (10 m)^-1 arriving broadside:
        # the index-domain curvature is d^2/lambda * 1/10 = 5e-4 per entry
        upa = UPAConfig(n_y=8, n_z=8, d_ant=0.01)
        t1, t2 = np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])
        w = WavefrontState(direction=-upa.normal, t1=t1, t2=t2,
                           curvature=np.eye(2) / 10.0)
        p = effective_params(w, upa, 0.02)
        assert np.allclose(p.q_bar, 5e-4 * np.eye(2), rtol=1e-12)

    def test_basis_independent(self):
        upa = UPAConfig(n_y=8, n_z=8, d_ant=0.01)
        d = unit(np.array([0.2, -0.1, -1.0]))
        t1, t2 = make_tangent_basis(d)
        q = np.array([[0.3, 0.1], [0.1, 0.2]])
        base = effective_params(WavefrontState(d, t1, t2, q), upa, 0.02)
        for ang in (0.3, 1.1, 2.5):
            c, s = np.cos(ang), np.sin(ang)
            rot = np.array([[c, -s], [s, c]])
            t1r = c * t1 + s * t2
            t2r = -s * t1 + c * t2
            qr = rot.T @ q @ rot
            alt = effective_params(WavefrontState(d, t1r, t2r, qr), upa, 0.02)
            assert np.allclose(alt.q_bar, base.q_bar, atol=1e-10)
            assert np.allclose(alt.k_bar, base.k_bar, atol=1e-12)

    def test_plane_wave_criterion(self):
        upa = UPAConfig(n_y=64, n_z=64, d_ant=0.01)
        wavelength = 0.02
        diag = upa.d_ant * np.hypot(upa.n_y - 1, upa.n_z - 1)
        q_thresh = wavelength / (2.0 * diag ** 2)
        w_flat = _wavefront(-upa.normal, np.eye(2) * q_thresh * 0.5)
        w_curved = _wavefront(-upa.normal, np.eye(2) * q_thresh * 2.0)
        assert is_plane_wave(w_flat, upa, wavelength)
        assert not is_plane_wave(w_curved, upa, wavelength)
