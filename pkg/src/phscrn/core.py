"""Grid conventions, aperture handling, detrending and slope computation.

All operations are pure: they return new objects and never mutate their
inputs, so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateError, ValidationError


@dataclass(frozen=True)
class FrameSeries:
    """Time-ordered stack of 2-D phase frames.

    Parameters
    ----------
    frames : ndarray, shape (nt, ny, nx)
        Phase values in radians.
    delta_m : float
        Pixel spacing in meters.
    fs_hz : float
        Temporal sampling frequency in Hz.
    lambda_m : float
        Optical wavelength in meters.
    mask : ndarray of bool, shape (ny, nx), optional
        True marks a valid pixel. None means all pixels valid.
    """

    frames: np.ndarray
    delta_m: float
    fs_hz: float
    lambda_m: float
    mask: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", f)
        if f.ndim != 3:
            raise ValidationError(f"frames must be 3-D (t, y, x), got shape {f.shape}")
        nt, ny, nx = f.shape
        if nt < 1 or ny < 2 or nx < 2:
            raise ValidationError(f"need nt >= 1 and ny, nx >= 2, got {f.shape}")
        if not (self.delta_m > 0 and self.fs_hz > 0 and self.lambda_m > 0):
            raise ValidationError("delta_m, fs_hz and lambda_m must be positive")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            object.__setattr__(self, "mask", m)
            if m.shape != (ny, nx):
                raise ValidationError(f"mask shape {m.shape} does not match frame shape {(ny, nx)}")
            if not np.all(np.isfinite(f[:, m])):
                raise ValidationError("non-finite phase value at a masked-valid pixel")
        elif not np.all(np.isfinite(f)):
            raise ValidationError("non-finite phase value")

    @property
    def nt(self) -> int:
        return self.frames.shape[0]

    @property
    def ny(self) -> int:
        return self.frames.shape[1]

    @property
    def nx(self) -> int:
        return self.frames.shape[2]

    def valid_mask(self) -> np.ndarray:
        """Boolean validity mask, materialized even when all pixels are valid."""
        if self.mask is not None:
            return self.mask
        return np.ones((self.ny, self.nx), dtype=bool)

    def with_frames(self, frames, mask=None) -> "FrameSeries":
        return FrameSeries(frames, self.delta_m, self.fs_hz, self.lambda_m, mask)


@dataclass(frozen=True)
class FrequencyGrid:
    """DFT-ordered frequency bins in cycles per sample.

    ``fx[k, l]`` varies along axis 1 (x), ``fy[k, l]`` along axis 0 (y);
    index (0, 0) is DC. Even sizes store the Nyquist bin as -1/2.
    Dividing by the pixel spacing converts to cycles per meter.
    """

    n: int
    fx: np.ndarray
    fy: np.ndarray


@dataclass(frozen=True)
class ModeField:
    """Complex spatial Fourier modes of one screen, DFT layout."""

    n: int
    modes: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=np.complex128)
        object.__setattr__(self, "modes", m)
        if m.shape != (self.n, self.n):
            raise ValidationError(f"modes shape {m.shape} != ({self.n}, {self.n})")
        if not np.all(np.isfinite(m)):
            raise ValidationError("non-finite mode value")


def freq_bins(n: int) -> FrequencyGrid:
    """DFT frequency grid for an n-by-n screen, in cycles per sample."""
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    f = np.fft.fftfreq(n)
    fy, fx = np.meshgrid(f, f, indexing="ij")
    return FrequencyGrid(n=n, fx=fx, fy=fy)


def inscribe_square(series: FrameSeries) -> FrameSeries:
    """Crop to the largest inscribed square (top-left K-by-K, K = min side)."""
    k = min(series.ny, series.nx)
    if series.ny == series.nx:
        return series
    mask = series.mask[:k, :k] if series.mask is not None else None
    return series.with_frames(series.frames[:, :k, :k], mask)


def _plane_basis(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-orthonormal basis of {1, x, y} over the valid pixels.

    Pixel-index coordinates are centered at the centroid of the valid
    pixels, which decorrelates piston from tilt.
    """
    ny, nx = mask.shape
    yy, xx = np.mgrid[0:ny, 0:nx]
    xv = xx[mask].astype(np.float64)
    yv = yy[mask].astype(np.float64)
    a = np.column_stack([np.ones_like(xv), xv - xv.mean(), yv - yv.mean()])
    q, _ = np.linalg.qr(a)
    return q, mask


def remove_ttp(series: FrameSeries) -> FrameSeries:
    """Subtract the least-squares best-fit plane (tilt, tip, piston) per frame."""
    mask = series.valid_mask()
    if int(mask.sum()) < 3:
        raise DegenerateError("plane fit needs at least 3 valid pixels")
    q, _ = _plane_basis(mask)
    vals = series.frames[:, mask]                        # (nt, npix)
    resid = vals - (vals @ q) @ q.T
    out = np.zeros_like(series.frames)
    out[:, mask] = resid
    return series.with_frames(out, series.mask)


def detrend_frames(frames: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """remove_ttp on a bare (nt, ny, nx) stack; used on hot generation paths."""
    q, _ = _plane_basis(mask)
    vals = frames[:, mask]
    resid = vals - (vals @ q) @ q.T
    out = np.zeros_like(frames)
    out[:, mask] = resid
    return out


def slope_x(series: FrameSeries) -> FrameSeries:
    """Stream-wise deflection angle via two-sided finite differences.

    Returns (lambda / 2 pi) * (phi[x+1] - phi[x-1]) / (2 delta) on the
    interior columns; the two boundary columns are dropped, so the output
    is nx - 2 wide. A pixel of the result is valid only when both of its
    neighbors are.
    """
    if series.nx < 3:
        raise ValidationError(f"slope_x needs nx >= 3, got {series.nx}")
    f = series.frames
    scale = series.lambda_m / (2.0 * np.pi)
    th = scale * (f[:, :, 2:] - f[:, :, :-2]) / (2.0 * series.delta_m)
    mask = None
    if series.mask is not None:
        m = series.mask
        mask = m[:, 1:-1] & m[:, 2:] & m[:, :-2]
        th = np.where(mask[None], th, 0.0)
    return series.with_frames(th, mask)
