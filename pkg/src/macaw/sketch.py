"""Compressed hybrid-combining measurements via a subsampled randomized FFT.

The combining operator is kept in factored form: a random unit-modulus
diagonal, a unitary 2D FFT over the antenna grid, and a uniform row
subsample.  Apply/adjoint cost O(N log N); the operator is exactly
semi-orthogonal by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import OFDMConfig, unvec, vec
from .errors import ShapeMismatch, TooManyRows


@dataclass(frozen=True)
class SketchOperator:
    """Factored measurement matrix: row-subsampled FFT with phase dither.

    `rows` indexes the retained 2D-frequency bins (vec order), partitioned
    into consecutive per-symbol blocks of `block_size`.
    """

    n_y: int
    n_z: int
    rows: np.ndarray  # int64, distinct
    phases: np.ndarray  # complex, |.| == 1, length n_y*n_z
    block_size: int
    seed: int

    @property
    def n(self) -> int:
        return self.n_y * self.n_z

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """W @ x for a length-N vector or N x M matrix (column-wise)."""
        if x.shape[0] != self.n:
            raise ShapeMismatch(f"expected leading dim {self.n}, got {x.shape[0]}")
        if x.ndim == 1:
            g = np.fft.fft2(unvec(self.phases * x, self.n_y, self.n_z), norm="ortho")
            return vec(g)[self.rows]
        d = self.phases[:, None] * x
        g = np.fft.fft2(d.reshape(self.n_y, self.n_z, -1, order="F"),
                        axes=(0, 1), norm="ortho")
        return g.reshape(self.n, -1, order="F")[self.rows, :]

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """W^H @ y for a length-n_rows vector or n_rows x M matrix."""
        if y.shape[0] != self.n_rows:
            raise ShapeMismatch(f"expected leading dim {self.n_rows}, got {y.shape[0]}")
        if y.ndim == 1:
            full = np.zeros(self.n, dtype=complex)
            full[self.rows] = y
            g = np.fft.ifft2(unvec(full, self.n_y, self.n_z), norm="ortho")
            return np.conj(self.phases) * vec(g)
        full = np.zeros((self.n, y.shape[1]), dtype=complex)
        full[self.rows, :] = y
        g = np.fft.ifft2(full.reshape(self.n_y, self.n_z, -1, order="F"),
                         axes=(0, 1), norm="ortho")
        return np.conj(self.phases)[:, None] * g.reshape(self.n, -1, order="F")

    def dense(self) -> np.ndarray:
        """Materialized matrix; small n only (tests and oracles)."""
        w = np.zeros((self.n_rows, self.n), dtype=complex)
        e = np.zeros(self.n, dtype=complex)
        for j in range(self.n):
            e[j] = 1.0
            w[:, j] = self.apply(e)
            e[j] = 0.0
        return w


def make_srft(n_y: int, n_z: int, n_rows: int, seed: int,
              block_size: int | None = None) -> SketchOperator:
    """Draw a fresh sketch operator over an n_y x n_z antenna grid."""
    n = n_y * n_z
    if n_rows > n:
        raise TooManyRows(f"n_rows={n_rows} exceeds n={n}")
    rng = np.random.default_rng(seed)
    phases = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=n))
    rows = rng.choice(n, size=n_rows, replace=False).astype(np.int64)
    return SketchOperator(n_y=n_y, n_z=n_z, rows=rows, phases=phases,
                          block_size=block_size or n_rows, seed=seed)


def with_extra_phases(op: SketchOperator, extra: np.ndarray) -> SketchOperator:
    """Operator with an additional unit-modulus diagonal folded in."""
    return replace(op, phases=op.phases * extra)


@dataclass(frozen=True)
class ObservationSet:
    """Compressed wideband pilot observations plus noise metadata."""

    y: np.ndarray  # (n_rows, M)
    sigma_n: float
    operator: SketchOperator
    seed: int


def observe(h: np.ndarray, op: SketchOperator, snr_db: float | None,
            seed: int = 0) -> ObservationSet:
    """Compress a channel and add white circular Gaussian noise.

    snr_db=None means noiseless.  The SNR is defined per compressed
    observation element: ||W H||_F^2 / (n_rows * M * sigma^2).
    """
    if h.shape[0] != op.n:
        raise ShapeMismatch(f"channel has {h.shape[0]} antennas, operator expects {op.n}")
    wh = op.apply(h)
    if snr_db is None:
        return ObservationSet(y=wh, sigma_n=0.0, operator=op, seed=seed)
    sig_power = np.linalg.norm(wh) ** 2 / wh.size
    sigma = float(np.sqrt(sig_power / 10.0 ** (snr_db / 10.0)))
    rng = np.random.default_rng(seed)
    noise = (rng.standard_normal(wh.shape) + 1j * rng.standard_normal(wh.shape))
    noise *= sigma / np.sqrt(2.0)
    return ObservationSet(y=wh + noise, sigma_n=sigma, operator=op, seed=seed)
