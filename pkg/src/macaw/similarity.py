"""How well can a spherical wavefront approximate an anisotropic one.

Provides the anisotropy parameter mu*, the closed-form cosine-similarity
lower bound B(mu*), slow quadrature oracles for both, and a numeric
best-spherical-fit search over direction and inverse distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .channel import awc_steering, swc_q_bar, vec
from .errors import SingularProjection


def corner_factor(mu_star: float) -> float:
    """Scaling that interpolates between the disk/square area ratio regimes."""
    return 1.0 + (4.0 / np.pi - 1.0) * np.exp(-mu_star ** 2)


def bound(mu_star: float) -> float:
    """Lower bound on the best spherical-fit cosine similarity.

    (pi/4) * t(mu*) * sqrt(J0(mu*)^2 + J1(mu*)^2); equals 1 at mu* = 0 and
    decreases monotonically.
    """
    if mu_star < 0:
        raise ValueError("mu_star must be non-negative")
    t = corner_factor(mu_star)
    return float(np.pi / 4.0 * t * np.sqrt(special.j0(mu_star) ** 2
                                           + special.j1(mu_star) ** 2))


@dataclass(frozen=True)
class AnisotropyReport:
    mu_star: float
    bound: float
    q1: float
    q2: float
    m_matrix: np.ndarray  # 2x2


def mu_star(q_bs: np.ndarray, p_proj: np.ndarray, n_y: int, n_z: int,
            d_ant: float, wavelength: float) -> AnisotropyReport:
    """Anisotropy parameter of a wavefront arriving at an n_y x n_z array.

    q_bs is the 2x2 curvature matrix at the array center and p_proj the
    tangent-basis-to-array projection.  mu* weighs the principal-curvature
    split by the projected array extent.
    """
    q_bs = np.asarray(q_bs, dtype=float)
    p_proj = np.asarray(p_proj, dtype=float)
    if abs(np.linalg.det(p_proj)) < 1e-6:
        raise SingularProjection("projection matrix is singular (grazing arrival)")
    evals, evecs = np.linalg.eigh(q_bs)
    q1, q2 = float(evals[0]), float(evals[1])
    v = evecs.T  # rows are eigenvector coordinates
    d_half = np.diag([n_y / 2.0, n_z / 2.0])
    vpd = v @ p_proj @ d_half
    m = vpd @ vpd.T
    scale = np.pi * d_ant ** 2 / (2.0 * wavelength)
    mu = scale * abs(q1 - q2) * min(abs(m[0, 0]), abs(m[1, 1]))
    return AnisotropyReport(mu_star=float(mu), bound=bound(float(mu)),
                            q1=q1, q2=q2, m_matrix=m)


def disk_integral_oracle(lambda1: float, lambda2: float) -> float:
    """Quadrature evaluation of the unit-disk phase integral.

    Computes (pi/4) * t(mu) * |int_0^1 e^{jSu} J0(mu u) du| with
    S = (l1+l2)/2 and mu = |l1-l2|/2, the quantity the closed form in
    `bound` approximates at |S| = mu.
    """
    s = 0.5 * (lambda1 + lambda2)
    mu = 0.5 * abs(lambda1 - lambda2)

    def integrand_re(u):
        return np.cos(s * u) * special.j0(mu * u)

    def integrand_im(u):
        return np.sin(s * u) * special.j0(mu * u)

    re, _ = integrate.quad(integrand_re, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10)
    im, _ = integrate.quad(integrand_im, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10)
    return float(np.pi / 4.0 * corner_factor(mu) * np.hypot(re, im))


def square_integral_oracle(lambda1: float, lambda2: float, angle: float = 0.0,
                           n_quad: int = 400) -> float:
    """Direct 2D Gauss-Legendre quadrature of the square-domain phase integral.

    Evaluates (1/4) |int_{[-1,1]^2} e^{-j x^T W x} dx| where W has eigenvalues
    (l1, l2) with principal axes rotated by `angle`, without the disk
    reduction or the corner-correction model.  Unlike the disk form this
    depends (weakly) on the orientation.
    """
    x, w = np.polynomial.legendre.leggauss(n_quad)
    if angle == 0.0:
        fx = w @ np.exp(-1j * lambda1 * x ** 2)
        fy = w @ np.exp(-1j * lambda2 * x ** 2)
        return float(abs(fx * fy) / 4.0)
    c, s = np.cos(angle), np.sin(angle)
    a = lambda1 * c * c + lambda2 * s * s
    b = (lambda1 - lambda2) * c * s
    d = lambda1 * s * s + lambda2 * c * c
    gx, gy = np.meshgrid(x, x)
    wx, wy = np.meshgrid(w, w)
    f = np.exp(-1j * (a * gx ** 2 + 2 * b * gx * gy + d * gy ** 2))
    return float(abs(np.sum(wx * wy * f)) / 4.0)


@dataclass(frozen=True)
class SwcFitGrid:
    """Search resolution for `best_swc_fit`."""

    n_r: int = 48
    r_inv_max: float | None = None  # default: 1/r_min
    r_min: float = 1.0
    pad: int = 2
    refine_iter: int = 500


def best_swc_fit_index(c: np.ndarray, d_ant: float, wavelength: float,
                       grid: SwcFitGrid | None = None):
    """Best spherical-wavefront match to a steering matrix, index domain.

    For each candidate inverse distance the quadratic phase is compensated
    and a zero-padded 2D FFT scores every direction at once; the coarse
    winner is polished with Nelder-Mead on (k_y, k_z, 1/R), maximizing
    |<b, c>|.  Returns (k_bar_fit, r_inv_fit, cos_sim).
    """
    if grid is None:
        grid = SwcFitGrid()
    n_y, n_z = c.shape
    cv = vec(c)
    cv = cv / np.linalg.norm(cv)
    cn = cv.reshape(n_y, n_z, order="F")

    def cos_sim(k_bar, r_inv):
        k_bar = np.asarray(k_bar, dtype=float)
        q = swc_q_bar(k_bar, r_inv, d_ant, wavelength)
        b = vec(awc_steering(k_bar, q, n_y, n_z))
        return abs(np.vdot(b, cv))

    r_inv_max = grid.r_inv_max if grid.r_inv_max is not None else 1.0 / grid.r_min
    r_invs = np.linspace(0.0, r_inv_max, grid.n_r)

    dy = np.arange(1, n_y + 1, dtype=float) - (n_y + 1) / 2.0
    dz = np.arange(1, n_z + 1, dtype=float) - (n_z + 1) / 2.0
    quad = dy[:, None] ** 2 + dz[None, :] ** 2
    py, pz = grid.pad * n_y, grid.pad * n_z

    best = (-1.0, np.zeros(2), 0.0)
    scale = d_ant ** 2 / wavelength
    for ri in r_invs:
        # isotropic-curvature compensation; the direction-dependent metric
        # correction is recovered by the refinement stage
        comp = cn * np.exp(1j * np.pi * scale * ri * quad)
        spec = np.abs(np.fft.fft2(comp, s=(py, pz)))
        iy, iz = np.unravel_index(np.argmax(spec), spec.shape)
        val = spec[iy, iz] / np.sqrt(n_y * n_z)
        if val > best[0]:
            k = -np.array([iy / py, iz / pz])
            k = (k + 0.5) % 1.0 - 0.5
            best = (val, k, ri)

    def negobj(x):
        return -cos_sim(x[:2], abs(x[2]))

    x0 = np.array([best[1][0], best[1][1], best[2]])
    res = optimize.minimize(negobj, x0, method="Nelder-Mead",
                            options={"maxiter": grid.refine_iter,
                                     "xatol": 1e-10, "fatol": 1e-12})
    k_fit = res.x[:2]
    r_inv_fit = abs(float(res.x[2]))
    cs = float(-res.fun)
    if cs < best[0]:
        k_fit, r_inv_fit, cs = best[1], best[2], float(best[0])
    return k_fit, r_inv_fit, cs


def best_swc_fit(c: np.ndarray, upa, wavelength: float,
                 grid: SwcFitGrid | None = None):
    """Best spherical-wavefront match, physical parameterization.

    Returns (k_los, r_los, cos_sim) where k_los is the unit arrival
    direction (propagating into the array front) and r_los the source
    distance; r_los is inf for a plane-wave fit.
    """
    k_fit, r_inv, cs = best_swc_fit_index(c, upa.d_ant, wavelength, grid)
    a = wavelength / upa.d_ant * k_fit[0]
    b = wavelength / upa.d_ant * k_fit[1]
    normal_comp = np.sqrt(max(0.0, 1.0 - a * a - b * b))
    k_los = a * upa.row_dir + b * upa.col_dir - normal_comp * upa.normal
    r_los = np.inf if r_inv == 0.0 else 1.0 / r_inv
    return k_los, r_los, cs
