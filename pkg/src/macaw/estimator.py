"""Matching-free path-parameter estimation from compressed observations.

Pipeline: frequency-domain path separation by iterative deflation, per-path
spatial response recovery through the sketch adjoint plus a spectral
bounding-box projection, curvature estimation by lagged phase differencing
with a constrained intercept search, direction extraction after quadratic
phase compensation, and two rounds of damped Gauss-Newton refinement.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .channel import (OFDMConfig, awc_steering, index_offsets, spatial_phase,
                      unvec, vec, wideband_path)
from .errors import (EmptyBox, FeasibleRegionEmpty, ModelOrderTooHigh,
                     NonFinite, ValidationError)
from .geometry import EffectivePathParams, UPAConfig
from .sketch import ObservationSet, SketchOperator, with_extra_phases


@dataclass(frozen=True)
class EstimatorConfig:
    """Algorithmic constants for the estimation pipeline."""

    n_paths: int = 1
    relax_max_iter: int = 20
    relax_tol: float = 1e-8
    relax_zero_pad: int = 8
    fft_zero_pad: int = 4
    smooth_window: int = 3
    lm_max_iter_stage1: int = 60
    lm_max_iter_stage2: int = 15
    lm_lambda_init: float = 1e-3
    lm_grad_tol: float = 1e-10
    lm_cost_tol: float = 1e-14
    lm_stall_rel: float = 1e-6
    lm_stall_count: int = 2
    r_min: float = 1.7

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValidationError("n_paths must be >= 1")
        if self.smooth_window % 2 != 1:
            raise ValidationError("smooth_window must be odd")


@dataclass
class PathSeparation:
    """Per-path outputs of the frequency-domain separation stage."""

    s_bar_hat: list  # wavelengths
    y_spatial: list  # compressed center-frequency response vectors
    residual_energy: float


@dataclass(frozen=True)
class SpectralBox:
    """Index ranges (inclusive) of the retained 2D spectral rectangle."""

    row_lo: int
    row_hi: int
    col_lo: int
    col_hi: int


@dataclass
class CurvatureEstimate:
    q_bar_hat: np.ndarray
    freqs: np.ndarray  # (f1y, f1z, f2y, f2z)
    intercept: float
    lag_y: int
    lag_z: int


# ---------------------------------------------------------------------------
# frequency-domain path separation


def _tone_freq_grid(n: int, pad: int) -> np.ndarray:
    return np.arange(n * pad) / (n * pad)


def _quad_interp(ym: float, y0: float, yp: float) -> float:
    """Sub-bin offset of a parabola fitted through three samples."""
    denom = ym - 2.0 * y0 + yp
    if denom >= 0.0 or abs(denom) < 1e-300:
        return 0.0
    return float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5))


def _estimate_tone(resid: np.ndarray, delta_m: np.ndarray, pad: int):
    """Dominant common tone of multi-row data; returns (nu, amplitudes).

    Rows of `resid` share a tone exp(-j 2 pi nu delta_m); the frequency is
    the peak of the summed zero-padded periodogram with parabolic
    interpolation, the per-row amplitudes the matched-filter outputs.
    """
    n_rows, m = resid.shape
    npad = m * pad
    spec = np.fft.ifft(resid, n=npad, axis=1) * npad
    power = np.sum(np.abs(spec) ** 2, axis=0)
    k = int(np.argmax(power))
    off = _quad_interp(power[(k - 1) % npad], power[k], power[(k + 1) % npad])
    nu = ((k + off) / npad) % 1.0
    steer = np.exp(2j * np.pi * nu * delta_m)
    amps = resid @ steer / m
    return nu, amps


def _tone_matrix(nu: float, amps: np.ndarray, delta_m: np.ndarray) -> np.ndarray:
    return np.outer(amps, np.exp(-2j * np.pi * nu * delta_m))


def relax_separate(obs: ObservationSet, ofdm: OFDMConfig,
                   cfg: EstimatorConfig) -> PathSeparation:
    """Separate superimposed per-path tones across the subcarrier axis.

    Iterative deflation: paths are estimated one at a time against the
    residual with all other current estimates subtracted, cycling until the
    total residual stops improving.
    """
    y = obs.y
    n_paths = cfg.n_paths
    m = y.shape[1]
    if m < 2 * n_paths:
        raise ModelOrderTooHigh(f"{n_paths} paths need at least {2 * n_paths} subcarriers")
    delta_m = ofdm.delta_m
    eps = ofdm.subcarrier_spacing / ofdm.carrier_f

    nus = np.zeros(n_paths)
    amps = [np.zeros(y.shape[0], dtype=complex) for _ in range(n_paths)]
    models = [np.zeros_like(y) for _ in range(n_paths)]

    total = np.linalg.norm(y) ** 2
    prev_resid = total
    for k in range(n_paths):
        resid = y - sum(models[:k], np.zeros_like(y))
        nus[k], amps[k] = _estimate_tone(resid, delta_m, cfg.relax_zero_pad)
        models[k] = _tone_matrix(nus[k], amps[k], delta_m)
        # re-polish all paths found so far
        for _ in range(cfg.relax_max_iter):
            for j in range(k + 1):
                resid_j = y - sum((models[i] for i in range(k + 1) if i != j),
                                  np.zeros_like(y))
                nus[j], amps[j] = _estimate_tone(resid_j, delta_m, cfg.relax_zero_pad)
                models[j] = _tone_matrix(nus[j], amps[j], delta_m)
            resid_energy = np.linalg.norm(y - sum(models[:k + 1])) ** 2
            if abs(prev_resid - resid_energy) <= cfg.relax_tol * max(total, 1e-300):
                prev_resid = resid_energy
                break
            prev_resid = resid_energy

    energies = [float(np.linalg.norm(a) ** 2) for a in amps]
    order = np.argsort(energies)[::-1]
    s_bars = [float(nus[i] / eps) for i in order]
    y_spatial = [amps[i] for i in order]
    resid_energy = float(np.linalg.norm(y - sum(models)) ** 2)
    return PathSeparation(s_bar_hat=s_bars, y_spatial=y_spatial,
                          residual_energy=resid_energy)


# ---------------------------------------------------------------------------
# spatial response recovery


def _kadane_range(values: np.ndarray) -> tuple[int, int]:
    """Inclusive index range of the maximum-sum contiguous run."""
    best = -np.inf
    best_lo = best_hi = 0
    cur = 0.0
    lo = 0
    for i, v in enumerate(values):
        if cur <= 0.0:
            cur = v
            lo = i
        else:
            cur += v
        if cur > best:
            best = cur
            best_lo, best_hi = lo, i
    return best_lo, best_hi


def _hot_run(hot: np.ndarray, center: int) -> tuple[int, int]:
    """Contiguous True run containing `center` (inclusive bounds)."""
    if not hot[center]:
        return center, center
    lo = center
    while lo > 0 and hot[lo - 1]:
        lo -= 1
    hi = center
    while hi < len(hot) - 1 and hot[hi + 1]:
        hi += 1
    return lo, hi


def recover_path_response(y_spatial: np.ndarray, op: SketchOperator,
                          cfg: EstimatorConfig,
                          half_width: int | None = None):
    """Decompress one path's observation and project onto its spectral box.

    The adjoint gives a coarse antenna-domain estimate whose 2D power
    spectrum concentrates where the true response lives; the retained
    rectangle is the contiguous above-threshold run of row and column
    maxima around the dominant bin, and everything outside it is zeroed.
    Returns (h_hat vector, SpectralBox in rolled spectrum coordinates).
    """
    coarse = op.apply_adjoint(y_spatial)
    c2 = unvec(coarse, op.n_y, op.n_z)
    spec = np.fft.fft2(c2)
    power = np.abs(spec) ** 2
    smooth = ndimage.uniform_filter(power, size=cfg.smooth_window, mode="wrap")

    # center the dominant bin so the box cannot straddle the wrap boundary
    iy, iz = np.unravel_index(np.argmax(smooth), smooth.shape)
    shift = (op.n_y // 2 - iy, op.n_z // 2 - iz)
    rolled = np.roll(smooth, shift, axis=(0, 1))
    thresh = rolled.mean() + 3.0 * rolled.std()

    row_hot = (rolled > thresh).any(axis=1)
    col_hot = (rolled > thresh).any(axis=0)
    r_lo, r_hi = _hot_run(row_hot, op.n_y // 2)
    c_lo, c_hi = _hot_run(col_hot, op.n_z // 2)
    if half_width is not None:
        r_lo = max(r_lo, op.n_y // 2 - half_width)
        r_hi = min(r_hi, op.n_y // 2 + half_width)
        c_lo = max(c_lo, op.n_z // 2 - half_width)
        c_hi = min(c_hi, op.n_z // 2 + half_width)
    box = SpectralBox(r_lo, r_hi, c_lo, c_hi)

    mask = np.zeros((op.n_y, op.n_z), dtype=bool)
    mask[box.row_lo:box.row_hi + 1, box.col_lo:box.col_hi + 1] = True
    mask = np.roll(mask, (-shift[0], -shift[1]), axis=(0, 1))
    spec[~mask] = 0.0
    h_hat = vec(np.fft.ifft2(spec))
    return h_hat, box


# ---------------------------------------------------------------------------
# curvature estimation by phase differencing


def _centered_spectrum(x: np.ndarray, pad: int):
    """fftshifted padded 2D power spectrum and its frequency axes.

    Axes are in cycles/index of the *negative-rotation* convention: the
    component exp(-j 2 pi (f_y a + f_z b)) peaks at coordinate (f_y, f_z).
    """
    ny, nz = x.shape
    py, pz = ny * pad, nz * pad
    spec = np.fft.ifft2(x, s=(py, pz)) * (py * pz)
    power = np.fft.fftshift(np.abs(spec) ** 2)
    fy = np.fft.fftshift(np.fft.fftfreq(py))
    fz = np.fft.fftshift(np.fft.fftfreq(pz))
    return power, fy, fz


def _refine_peak(power: np.ndarray, iy: int, iz: int,
                 fy: np.ndarray, fz: np.ndarray) -> tuple[float, float]:
    ny, nz = power.shape
    dy = _quad_interp(power[(iy - 1) % ny, iz], power[iy, iz],
                      power[(iy + 1) % ny, iz])
    dz = _quad_interp(power[iy, (iz - 1) % nz], power[iy, iz],
                      power[iy, (iz + 1) % nz])
    step_y = fy[1] - fy[0]
    step_z = fz[1] - fz[0]
    return float(fy[iy] + dy * step_y), float(fz[iz] + dz * step_z)


def curvature_feasible_bounds(q_max: float, lag_y: int, lag_z: int,
                              q_lo: float = 0.0, q_hi: float | None = None):
    """Interval bounds of the four difference frequencies and the intercept.

    Derived from q_lo <= diag(Q) <= q_hi and |Q_offdiag| <= q_max/2 pushed
    through the frequency maps.  The defaults express the physical window
    [0, q_max]; shifted windows arise when a known isotropic component has
    already been compensated away.
    """
    if q_hi is None:
        q_hi = q_max
    half = 0.5 * q_max
    b = {
        "f1y": (q_lo * lag_y - half * lag_z, q_hi * lag_y + half * lag_z),
        "f1z": (q_lo * lag_z - half * lag_y, q_hi * lag_z + half * lag_y),
        "f2y": (q_lo * lag_y - half * lag_z, q_hi * lag_y + half * lag_z),
        "f2z": (-q_hi * lag_z - half * lag_y, -q_lo * lag_z + half * lag_y),
        "v": (q_lo * lag_y ** 2 - q_hi * lag_z ** 2,
              q_hi * lag_y ** 2 - q_lo * lag_z ** 2),
    }
    return b


def estimate_curvature(h_unvec: np.ndarray, cfg: EstimatorConfig,
                       d_ant: float, wavelength: float,
                       q_center: float = 0.0) -> CurvatureEstimate:
    """Quadratic-phase (curvature) estimation via lagged phase differences.

    Two conjugate products of shifted sub-matrices turn the quadratic phase
    into two plain 2D tones whose frequencies are linear in the curvature
    entries.  Peaks are located jointly under the physical feasibility
    rectangle and the shared-intercept constraint, then the linear map is
    inverted.  When the input already had an isotropic quadratic phase of
    strength `q_center` removed, the feasibility window shifts accordingly
    and the estimate describes the residual curvature.
    """
    n_y, n_z = h_unvec.shape
    if n_y < 6 or n_z < 6:
        raise ValidationError("array must be at least 6x6 for phase differencing")
    lag_y = int(np.floor(n_y / 3 + 0.5))
    lag_z = int(np.floor(n_z / 3 + 0.5))

    a = h_unvec[:n_y - lag_y, :n_z - lag_z]
    b = h_unvec[lag_y:, lag_z:]
    psi1 = np.conj(a) * b
    c = h_unvec[:n_y - lag_y, lag_z:]
    d = h_unvec[lag_y:, :n_z - lag_z]
    psi2 = np.conj(c) * d

    p1, fy1, fz1 = _centered_spectrum(psi1, cfg.fft_zero_pad)
    p2, fy2, fz2 = _centered_spectrum(psi2, cfg.fft_zero_pad)

    q_max = d_ant ** 2 / (wavelength * cfg.r_min)
    bounds = curvature_feasible_bounds(q_max, lag_y, lag_z,
                                       q_lo=-q_center, q_hi=q_max - q_center)
    bin_f = fy1[1] - fy1[0]
    slack = 2.0 * bin_f

    def mask_for(power, fy, fz, ylim, zlim):
        my = (fy >= ylim[0] - slack) & (fy <= ylim[1] + slack)
        mz = (fz >= zlim[0] - slack) & (fz <= zlim[1] + slack)
        m = np.outer(my, mz)
        if not m.any():
            raise FeasibleRegionEmpty("feasible frequency region is empty")
        return np.where(m, power, -np.inf)

    m1 = mask_for(p1, fy1, fz1, bounds["f1y"], bounds["f1z"])
    m2 = mask_for(p2, fy2, fz2, bounds["f2y"], bounds["f2z"])

    # shared-intercept scan: every spectral point votes for its intercept
    # bin; the winning intercept must be supported by a peak in both spectra
    dv = bin_f * max(lag_y, lag_z)
    v_lo = bounds["v"][0] - lag_y * slack - lag_z * slack
    v_hi = bounds["v"][1] + lag_y * slack + lag_z * slack
    n_v = max(int(np.ceil((v_hi - v_lo) / dv)) + 1, 1)

    def line_maxima(power, fy, fz, sign):
        v_vals = lag_y * fy[:, None] + sign * lag_z * fz[None, :]
        idx = np.clip(((v_vals - v_lo) / dv).astype(int), 0, n_v - 1)
        flat_max = np.full(n_v, -np.inf)
        np.maximum.at(flat_max, idx.ravel(), power.ravel())
        argmax = np.full(n_v, -1, dtype=np.int64)
        order = np.argsort(power, axis=None)
        flat_idx = idx.ravel()[order]
        argmax[flat_idx] = order  # later (larger) entries win
        return flat_max, argmax

    max1, arg1 = line_maxima(m1, fy1, fz1, -1.0)
    max2, arg2 = line_maxima(m2, fy2, fz2, +1.0)

    def window_best(vals, args, i):
        lo, hi = max(0, i - 1), min(n_v, i + 2)
        j = lo + int(np.argmax(vals[lo:hi]))
        return vals[j], args[j]

    best_v = -1
    best_score = -np.inf
    for i in range(n_v):
        s1, _ = window_best(max1, arg1, i)
        s2, _ = window_best(max2, arg2, i)
        score = min(s1, s2)
        if score > best_score:
            best_score = score
            best_v = i
    if not np.isfinite(best_score):
        raise FeasibleRegionEmpty("no feasible intercept found")

    _, a1 = window_best(max1, arg1, best_v)
    _, a2 = window_best(max2, arg2, best_v)
    iy1, iz1 = np.unravel_index(int(a1), p1.shape)
    iy2, iz2 = np.unravel_index(int(a2), p2.shape)
    f1y, f1z = _refine_peak(p1, iy1, iz1, fy1, fz1)
    f2y, f2z = _refine_peak(p2, iy2, iz2, fy2, fz2)

    q11 = (f1y + f2y) / (2.0 * lag_y)
    q22 = (f1z - f2z) / (2.0 * lag_z)
    q12 = 0.5 * ((f1y - f2y) / (2.0 * lag_z) + (f1z + f2z) / (2.0 * lag_y))
    q = np.array([[q11, q12], [q12, q22]])
    v_star = float(lag_y * f1y - lag_z * f1z)
    return CurvatureEstimate(q_bar_hat=q, freqs=np.array([f1y, f1z, f2y, f2z]),
                             intercept=v_star, lag_y=lag_y, lag_z=lag_z)


# ---------------------------------------------------------------------------
# direction extraction


def compensation_matrix(q_bar: np.ndarray, n_y: int, n_z: int) -> np.ndarray:
    """Unit-modulus matrix removing the quadratic phase of a steering matrix."""
    phase = spatial_phase(np.zeros(2), q_bar, n_y, n_z)
    return np.exp(-2j * np.pi * phase)


def estimate_direction(h_unvec: np.ndarray, q_bar_hat: np.ndarray,
                       cfg: EstimatorConfig) -> np.ndarray:
    """Linear-phase (direction) estimation after curvature compensation."""
    n_y, n_z = h_unvec.shape
    comp = np.conj(compensation_matrix(q_bar_hat, n_y, n_z)) * h_unvec
    pad = cfg.fft_zero_pad
    py, pz = n_y * pad, n_z * pad
    power = np.abs(np.fft.fft2(comp, s=(py, pz))) ** 2
    iy, iz = np.unravel_index(np.argmax(power), power.shape)
    dy = _quad_interp(power[(iy - 1) % py, iz], power[iy, iz],
                      power[(iy + 1) % py, iz])
    dz = _quad_interp(power[iy, (iz - 1) % pz], power[iy, iz],
                      power[iy, (iz + 1) % pz])
    k = -np.array([(iy + dy) / py, (iz + dz) / pz])
    return (k + 0.5) % 1.0 - 0.5


def isotropic_curvature_scan(y_spatial: np.ndarray, op: SketchOperator,
                             cfg: EstimatorConfig, q_max: float,
                             n_q: int = 24) -> tuple[float, np.ndarray]:
    """Best isotropic quadratic compensation of one path's observation.

    For each candidate strength q the decompressed response is dechirped by
    exp(+j pi q |n|^2) and scored by its padded-FFT peak; a concentrated
    peak means the isotropic part of the true curvature is matched.
    Returns (q_best, k_bar at the winning peak).
    """
    n_y, n_z = op.n_y, op.n_z
    pad = 2
    py, pz = pad * n_y, pad * n_z
    coarse = unvec(op.apply_adjoint(y_spatial), n_y, n_z)
    dy, dz = index_offsets(n_y, n_z)
    quad = dy[:, None] ** 2 + dz[None, :] ** 2
    best = (-1.0, 0.0, np.zeros(2))
    for q in np.linspace(0.0, q_max, n_q):
        dechirped = coarse * np.exp(1j * np.pi * q * quad)
        spec = np.abs(np.fft.fft2(dechirped, s=(py, pz)))
        iy, iz = np.unravel_index(np.argmax(spec), spec.shape)
        if spec[iy, iz] > best[0]:
            k = -np.array([iy / py, iz / pz])
            k = (k + 0.5) % 1.0 - 0.5
            best = (float(spec[iy, iz]), float(q), k)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# refinement


def _steering_and_weights(n_y: int, n_z: int):
    dy, dz = index_offsets(n_y, n_z)
    gy = np.broadcast_to(dy[:, None], (n_y, n_z))
    gz = np.broadcast_to(dz[None, :], (n_y, n_z))
    u = {
        "k1": vec(gy.copy()),
        "k2": vec(gz.copy()),
        "q11": vec(0.5 * gy ** 2),
        "q12": vec(gy * gz),
        "q22": vec(0.5 * gz ** 2),
    }
    return u

_SPATIAL_KEYS = ("k1", "k2", "q11", "q12", "q22")


def _params_from_vec(x: np.ndarray, s_bar: float, alpha: complex) -> EffectivePathParams:
    return EffectivePathParams(
        k_bar=np.array([x[0], x[1]]),
        q_bar=np.array([[x[2], x[3]], [x[3], x[4]]]),
        s_bar=s_bar, alpha=alpha)


def stage1_jacobian(c: np.ndarray, alpha: complex, op: SketchOperator,
                    weights: dict) -> np.ndarray:
    """d(residual)/d(spatial params) for one path at fixed gain.

    The residual is y - alpha * W c(x); each column is the compressed
    coordinate-weighted steering vector.
    """
    cols = []
    for key in _SPATIAL_KEYS:
        dc = -2j * np.pi * weights[key] * c
        cols.append(alpha * op.apply(dc))
    return -np.column_stack(cols)


def stage2_jacobian(hs: list, alphas: np.ndarray, op: SketchOperator,
                    split: np.ndarray, weights: dict) -> np.ndarray:
    """d(residual)/d(all paths' params) at fixed gains, wideband model.

    Each per-subcarrier column of a path's response is a complex
    exponential in the parameters scaled by the subcarrier's frequency
    ratio, so differentiation multiplies by the coordinate weight and that
    ratio before compression.
    """
    keys = ("s",) + _SPATIAL_KEYS
    cols = []
    for k, h_k in enumerate(hs):
        for key in keys:
            u = weights[key]
            dh = op.apply((u[:, None] * split[None, :]) * h_k)
            cols.append(2j * np.pi * alphas[k] * dh.reshape(-1, order="F"))
    return np.column_stack(cols)


def refine_stage1(y_spatial: np.ndarray, op: SketchOperator,
                  init: EffectivePathParams, cfg: EstimatorConfig,
                  cost_history: list | None = None) -> EffectivePathParams:
    """Damped Gauss-Newton fit of one path's spatial parameters.

    Minimizes || y - alpha W c(k, Q) ||^2 over the five real spatial
    parameters; the gain is re-solved in closed form every iteration.
    If `cost_history` is given, the objective after every accepted step is
    appended to it (starting with the initial objective).
    """
    n_y, n_z = op.n_y, op.n_z
    weights = _steering_and_weights(n_y, n_z)
    x = np.array([init.k_bar[0], init.k_bar[1],
                  init.q_bar[0, 0], init.q_bar[0, 1], init.q_bar[1, 1]])

    def model(xv):
        p = _params_from_vec(xv, init.s_bar, 1.0)
        c = vec(awc_steering(p.k_bar, p.q_bar, n_y, n_z))
        wc = op.apply(c)
        denom = np.vdot(wc, wc).real
        alpha = np.vdot(wc, y_spatial) / denom
        r = y_spatial - alpha * wc
        return c, wc, alpha, r

    c, wc, alpha, r = model(x)
    cost = float(np.linalg.norm(r) ** 2)
    if cost_history is not None:
        cost_history.append(cost)
    lam = cfg.lm_lambda_init
    resets = 0
    for _ in range(cfg.lm_max_iter_stage1):
        j = stage1_jacobian(c, alpha, op, weights)
        # the gain is re-solved each evaluation, so remove the Jacobian
        # component the gain update would absorb (projected residual fit)
        j -= np.outer(wc, (wc.conj() @ j) / np.vdot(wc, wc).real)
        g = (j.conj().T @ r).real
        if np.linalg.norm(g) < cfg.lm_grad_tol:
            break
        h = (j.conj().T @ j).real
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(h + lam * np.diag(np.diag(h))
                                       + 1e-300 * np.eye(5), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + step
            if not np.all(np.isfinite(x_new)):
                lam *= 10.0
                continue
            c_n, wc_n, alpha_n, r_n = model(x_new)
            cost_new = float(np.linalg.norm(r_n) ** 2)
            if np.isfinite(cost_new) and cost_new < cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                x, c, wc, alpha, r, cost = x_new, c_n, wc_n, alpha_n, r_n, cost_new
                if cost_history is not None:
                    cost_history.append(cost)
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                if rel < cfg.lm_cost_tol:
                    return _params_from_vec(x, init.s_bar, alpha)
                break
            lam *= 10.0
        if not accepted:
            if not np.isfinite(cost):
                if resets == 0:
                    lam, resets = cfg.lm_lambda_init, 1
                    continue
                raise NonFinite("stage-1 refinement diverged")
            break
    return _params_from_vec(x, init.s_bar, alpha)


def _wideband_matrix(params: EffectivePathParams, ofdm: OFDMConfig,
                     n_y: int, n_z: int) -> np.ndarray:
    """Unit-gain wideband path matrix (alpha excluded)."""
    p = replace(params, alpha=1.0 + 0.0j)
    return wideband_path(p, ofdm, n_y, n_z)


def refine_stage2(obs: ObservationSet, ofdm: OFDMConfig,
                  inits: list, cfg: EstimatorConfig,
                  cost_history: list | None = None) -> list:
    """Joint refinement of all paths over the full wideband residual.

    Six real parameters per path (distance, direction, curvature) with the
    gains re-solved by least squares each iteration.  Jacobian columns are
    exact; the sketch applies to all subcarriers of a parameter's derivative
    matrix in one batched transform.
    """
    op = obs.operator
    n_y, n_z = op.n_y, op.n_z
    m = ofdm.n_subcarriers
    delta_m = ofdm.delta_m
    eps = ofdm.subcarrier_spacing / ofdm.carrier_f
    weights = _steering_and_weights(n_y, n_z)
    weights = {"s": np.ones(op.n), **weights}
    k_paths = len(inits)
    y_flat = obs.y.reshape(-1, order="F")

    xs = [np.array([p.s_bar, p.k_bar[0], p.k_bar[1],
                    p.q_bar[0, 0], p.q_bar[0, 1], p.q_bar[1, 1]])
          for p in inits]

    def path_params(x):
        return EffectivePathParams(k_bar=np.array([x[1], x[2]]),
                                   q_bar=np.array([[x[3], x[4]], [x[4], x[5]]]),
                                   s_bar=float(x[0]))

    split = ofdm.split_factor

    def evaluate(xs_cur):
        basis = []
        hs = []
        for x in xs_cur:
            h_k = _wideband_matrix(path_params(x), ofdm, n_y, n_z)
            hs.append(h_k)
            basis.append(op.apply(h_k).reshape(-1, order="F"))
        g = np.column_stack(basis)
        alphas, *_ = np.linalg.lstsq(g, y_flat, rcond=None)
        r = y_flat - g @ alphas
        return hs, g, alphas, r

    hs, g, alphas, r = evaluate(xs)
    cost = float(np.linalg.norm(r) ** 2)
    if cost_history is not None:
        cost_history.append(cost)
    lam = cfg.lm_lambda_init
    n_par = 6 * k_paths
    resets = 0
    stalls = 0
    floor = cfg.lm_cost_tol * float(np.linalg.norm(y_flat) ** 2)

    for _ in range(cfg.lm_max_iter_stage2):
        j = stage2_jacobian(hs, alphas, op, split, weights)
        # project out the span of the model basis; the least-squares gain
        # update absorbs that component, so it carries no usable gradient
        q_g, _ = np.linalg.qr(g)
        j -= q_g @ (q_g.conj().T @ j)
        grad = (j.conj().T @ r).real
        h = (j.conj().T @ j).real
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(h + lam * np.diag(np.diag(h))
                                       + 1e-300 * np.eye(n_par), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            xs_new = [x + step[6 * k:6 * k + 6] for k, x in enumerate(xs)]
            if not all(np.all(np.isfinite(x)) for x in xs_new):
                lam *= 10.0
                continue
            hs_n, g_n, alphas_n, r_n = evaluate(xs_new)
            cost_new = float(np.linalg.norm(r_n) ** 2)
            if np.isfinite(cost_new) and cost_new < cost:
                rel = (cost - cost_new) / max(cost, 1e-300)
                xs, hs, g, alphas, r, cost = xs_new, hs_n, g_n, alphas_n, r_n, cost_new
                if cost_history is not None:
                    cost_history.append(cost)
                lam = max(lam / 10.0, 1e-14)
                accepted = True
                if rel < cfg.lm_cost_tol or cost < floor:
                    return [replace(path_params(x), alpha=complex(a))
                            for x, a in zip(xs, alphas)]
                stalls = stalls + 1 if rel < cfg.lm_stall_rel else 0
                break
            lam *= 10.0
        if not accepted:
            if not np.isfinite(cost) and resets == 0:
                lam, resets = cfg.lm_lambda_init, 1
                continue
            break
        if stalls >= cfg.lm_stall_count:
            break

    return [replace(path_params(x), alpha=complex(a))
            for x, a in zip(xs, alphas)]


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class EstimateDiagnostics:
    relax_residual: float = 0.0
    stage_times: dict = field(default_factory=dict)
    dropped_paths: list = field(default_factory=list)
    stage1_params: list = field(default_factory=list)


def estimate(obs: ObservationSet, cfg: EstimatorConfig, upa: UPAConfig,
             ofdm: OFDMConfig):
    """Run the full pipeline on one observation set.

    Returns (params, h_hat, diagnostics): the refined per-path parameter
    list, the reconstructed wideband channel, and stage diagnostics.  A path
    that fails mid-pipeline is dropped with a note rather than aborting.
    """
    diag = EstimateDiagnostics()
    t0 = time.perf_counter()
    sep = relax_separate(obs, ofdm, cfg)
    diag.relax_residual = sep.residual_energy
    diag.stage_times["relax"] = time.perf_counter() - t0
    op = obs.operator
    wavelength = ofdm.wavelength

    q_max = upa.d_ant ** 2 / (wavelength * cfg.r_min)
    half_width = int(np.ceil(0.5 * q_max * op.n_y * op.n_z)) + 2

    inits = []
    t0 = time.perf_counter()
    for k in range(cfg.n_paths):
        try:
            y_k = sep.y_spatial[k]
            q_iso, k_iso = isotropic_curvature_scan(y_k, op, cfg, q_max)
            comp_iso = compensation_matrix(q_iso * np.eye(2), op.n_y, op.n_z)
            op_iso = with_extra_phases(op, vec(comp_iso))
            h_hat, _ = recover_path_response(y_k, op_iso, cfg, half_width)
            h2 = unvec(h_hat, op.n_y, op.n_z)
            candidates = [EffectivePathParams(
                k_bar=k_iso, q_bar=q_iso * np.eye(2),
                s_bar=sep.s_bar_hat[k])]
            try:
                curv = estimate_curvature(h2, cfg, upa.d_ant, wavelength,
                                          q_center=q_iso)
                q_full = q_iso * np.eye(2) + curv.q_bar_hat
                comp = compensation_matrix(q_full, op.n_y, op.n_z)
                op_comp = with_extra_phases(op, vec(comp))
                h_single, _ = recover_path_response(y_k, op_comp, cfg,
                                                    half_width)
                k_bar = estimate_direction(unvec(h_single, op.n_y, op.n_z),
                                           np.zeros((2, 2)), cfg)
                candidates.insert(0, EffectivePathParams(
                    k_bar=k_bar, q_bar=q_full, s_bar=sep.s_bar_hat[k]))
            except FeasibleRegionEmpty:
                pass
            refined = max((refine_stage1(y_k, op, c, cfg)
                           for c in candidates),
                          key=lambda p: abs(p.alpha))
            inits.append(refined)
        except Exception as exc:  # noqa: BLE001 - dropped-path policy
            diag.dropped_paths.append((k, repr(exc)))
    diag.stage_times["per_path"] = time.perf_counter() - t0
    diag.stage1_params = list(inits)
    if not inits:
        raise ValidationError("all paths failed during per-path estimation")

    t0 = time.perf_counter()
    final = refine_stage2(obs, ofdm, inits, cfg)
    diag.stage_times["stage2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    h_hat = np.zeros((op.n, ofdm.n_subcarriers), dtype=complex)
    for p in final:
        h_hat += wideband_path(p, ofdm, op.n_y, op.n_z)
    diag.stage_times["reconstruct"] = time.perf_counter() - t0
    return final, h_hat, diag
