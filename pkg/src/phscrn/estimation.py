"""Estimation of the five boiling-flow parameters from a measured stack.

Pipeline: outer scale from the aperture length, coherence length by
inverting the Von Karman law against a windowed spatial PSD, velocity
from the lagged spatial cross-correlation peak with parabolic
refinement, and the boiling coefficient by least-squares regression of
each frame's Fourier modes on the shifted previous frame.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .core import FrameSeries, freq_bins, inscribe_square
from .errors import DegenerateError, ValidationError
from .screens import VK_CONSTANT, BoilingParams, shift_phases

_CHUNK = 256  # frames per FFT batch; bounds working-set memory


@dataclass(frozen=True)
class SpectrumGrid:
    """2-D spatial PSD on DFT-ordered bins, units rad^2 m^2."""

    values: np.ndarray
    delta_m: float

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CorrelationGrid:
    """Lagged spatial cross-correlation indexed by pixel shift.

    ``values[K-1 + j, K-1 + i]`` is the per-pair mean correlation at
    x-shift i and y-shift j, each in [-(K-1), K-1].
    """

    values: np.ndarray
    lag: int

    @property
    def k(self) -> int:
        return (self.values.shape[0] + 1) // 2

    def at(self, i: int, j: int) -> float:
        k = self.k
        return float(self.values[k - 1 + j, k - 1 + i])


@dataclass(frozen=True)
class VelocityEstimate:
    vx_px: float
    vy_px: float
    peak_i: int
    peak_j: int
    flags: tuple[str, ...] = ()


def _require_plain_square(series: FrameSeries, what: str) -> None:
    if series.ny != series.nx:
        raise ValidationError(f"{what} needs a square aperture; apply inscribe_square first")
    if series.mask is not None and not series.mask.all():
        raise ValidationError(f"{what} needs a mask-free input")


def estimate_L0(series: FrameSeries) -> float:
    """Outer scale estimate: length of the larger aperture axis, in meters."""
    return max(series.ny, series.nx) * series.delta_m


def spatial_psd(series: FrameSeries) -> SpectrumGrid:
    """Windowed spatial PSD averaged over frames (2-D Welch, one block).

    Per frame: remove the spatial mean, apply the separable Hamming
    window, take |FFT|^2 over the sum of squared window coefficients,
    then scale by delta^2 to convert energy per sample to energy per m^2.
    """
    _require_plain_square(series, "spatial_psd")
    k = series.nx
    h = np.hamming(k)
    win = np.outer(h, h)
    scale = series.delta_m**2 / np.sum(win**2)
    acc = np.zeros((k, k))
    for lo in range(0, series.nt, _CHUNK):
        block = series.frames[lo : lo + _CHUNK]
        block = block - block.mean(axis=(1, 2), keepdims=True)
        spec = scipy.fft.fft2(block * win, axes=(1, 2))
        acc += np.sum(spec.real**2 + spec.imag**2, axis=0)
    return SpectrumGrid(values=acc * (scale / series.nt), delta_m=series.delta_m)


def _edge_bin_axes(n: int) -> np.ndarray:
    """Indices whose |frequency| is among the 3 largest distinct magnitudes."""
    f = np.fft.fftfreq(n)
    mags = np.unique(np.abs(f))
    top3 = mags[-3:]
    return np.nonzero(np.isin(np.abs(f), top3))[0]


def estimate_r0(psd: SpectrumGrid, L0_m: float) -> float:
    """Invert the Von Karman law per bin and average the implied r0.

    Excludes DC and every bin whose |fx| or |fy| ranks among the three
    largest distinct magnitudes on its axis.
    """
    n = psd.n
    grid = freq_bins(n)
    include = np.ones((n, n), dtype=bool)
    include[0, 0] = False
    edge = _edge_bin_axes(n)
    include[edge, :] = False
    include[:, edge] = False
    vals = psd.values[include]
    if np.any(vals <= 0):
        bad = np.argwhere(include & (psd.values <= 0))[0]
        raise DegenerateError(f"non-positive PSD at included bin ({int(bad[0])}, {int(bad[1])})")
    fx = grid.fx[include] / psd.delta_m
    fy = grid.fy[include] / psd.delta_m
    num = VK_CONSTANT * (fx**2 + fy**2 + L0_m**-2) ** (-11.0 / 6.0)
    return float(np.mean((num / vals) ** 0.6))


def cross_correlation(series: FrameSeries, lag: int) -> CorrelationGrid:
    """Lagged spatial cross-correlation over all in-bounds pixel pairs.

    Each shift cell is the mean of phi_n(r, s) * phi_{n-lag}(r-i, s-j)
    over the (nt - lag) frame pairs and the (K-|i|)(K-|j|) contributing
    pixel pairs; no periodic wrap.
    """
    _require_plain_square(series, "cross_correlation")
    if not 1 <= lag < series.nt:
        raise ValidationError(f"need 1 <= lag < nt, got lag={lag}, nt={series.nt}")
    k = series.nx
    p = scipy.fft.next_fast_len(2 * k - 1)
    acc = np.zeros((p, p // 2 + 1), dtype=np.complex128)
    a, b = series.frames[lag:], series.frames[:-lag]
    for lo in range(0, a.shape[0], _CHUNK):
        fa = scipy.fft.rfft2(a[lo : lo + _CHUNK], s=(p, p), axes=(1, 2))
        fb = scipy.fft.rfft2(b[lo : lo + _CHUNK], s=(p, p), axes=(1, 2))
        acc += np.sum(fa * np.conj(fb), axis=0)
    full = scipy.fft.irfft2(acc, s=(p, p))
    d = np.arange(-(k - 1), k)
    vals = full[np.ix_(d % p, d % p)]
    pairs = np.outer(k - np.abs(d), k - np.abs(d))
    vals = vals / ((series.nt - lag) * pairs)
    return CorrelationGrid(values=vals, lag=lag)


def _parabola_offset(left: float, mid: float, right: float) -> tuple[float, bool]:
    """Vertex offset of the 3-point parabola; ok=False if non-concave."""
    denom = left - 2.0 * mid + right
    if denom >= 0:
        return 0.0, False
    off = 0.5 * (left - right) / denom
    if not -1.0 <= off <= 1.0:
        return 0.0, False
    return off, True


def estimate_velocity(corr: CorrelationGrid, max_shift: int | None = None) -> VelocityEstimate:
    """Flow velocity in pixels per time-step from the correlation peak.

    Finds the integer argmax within |i|, |j| <= max_shift (default K/2)
    and refines each axis with a 3-point parabola. A peak on the search
    boundary or a non-concave triple falls back to the integer location
    and sets a flag.
    """
    k = corr.k
    if max_shift is None:
        max_shift = k // 2
    max_shift = min(max_shift, k - 1)
    c = k - 1
    sub = corr.values[c - max_shift : c + max_shift + 1, c - max_shift : c + max_shift + 1]
    jj, ii = np.unravel_index(np.argmax(sub), sub.shape)
    i_hat, j_hat = ii - max_shift, jj - max_shift
    flags: list[str] = []
    i_star, j_star = float(i_hat), float(j_hat)
    if abs(i_hat) == max_shift or abs(j_hat) == max_shift:
        flags.append("peak-on-boundary")
    else:
        off, ok = _parabola_offset(corr.at(i_hat - 1, j_hat), corr.at(i_hat, j_hat), corr.at(i_hat + 1, j_hat))
        if ok:
            i_star += off
        else:
            flags.append("non-concave-x")
        off, ok = _parabola_offset(corr.at(i_hat, j_hat - 1), corr.at(i_hat, j_hat), corr.at(i_hat, j_hat + 1))
        if ok:
            j_star += off
        else:
            flags.append("non-concave-y")
    return VelocityEstimate(
        vx_px=i_star / corr.lag,
        vy_px=j_star / corr.lag,
        peak_i=int(i_hat),
        peak_j=int(j_hat),
        flags=tuple(flags),
    )


def estimate_alpha(series: FrameSeries, vx_px: float, vy_px: float, clamp: bool = True) -> float:
    """Least-squares boiling coefficient over all bins and frame pairs.

    Regresses each frame's Fourier modes on the (vx, vy)-shifted modes of
    the previous frame; the shift is applied as a phase ramp so
    non-integer velocities are exact. With clamp=True the result is
    confined to (0, 1] (warning when it falls outside).
    """
    _require_plain_square(series, "estimate_alpha")
    if series.nt < 2:
        raise ValidationError("estimate_alpha needs at least 2 frames")
    k = series.nx
    ramp = shift_phases(k, vx_px, vy_px)
    num = 0.0
    den = 0.0
    prev = None
    for lo in range(0, series.nt, _CHUNK):
        spec = scipy.fft.fft2(series.frames[lo : lo + _CHUNK], axes=(1, 2))
        if prev is not None:
            spec_prev = np.concatenate([prev[None], spec[:-1]])
        else:
            spec_prev = spec[:-1]
            spec = spec[1:]
        shifted = ramp * spec_prev
        num += float(np.sum(np.conj(shifted) * spec[: shifted.shape[0]]).real)
        den += float(np.sum(spec_prev.real**2 + spec_prev.imag**2))
        prev = spec[-1]
    if den == 0.0:
        raise DegenerateError("all-zero series: alpha regression denominator vanishes")
    alpha = num / den
    if clamp and not 0.0 < alpha <= 1.0:
        warnings.warn(f"alpha estimate {alpha:.6g} outside (0, 1]; clamping", stacklevel=2)
        alpha = min(max(alpha, 1e-12), 1.0)
    return alpha


def estimate_params(series: FrameSeries, lag: int = 10, max_shift: int | None = None) -> BoilingParams:
    """Full estimation pipeline on a measured stack.

    The outer scale uses the original rectangular aperture; every other
    estimator runs on the inscribed square. The input is assumed already
    detrended (TTP removed upstream).
    """
    L0 = estimate_L0(series)
    sq = inscribe_square(series)
    _require_plain_square(sq, "estimate_params")
    psd = spatial_psd(sq)
    r0 = estimate_r0(psd, L0)
    vel = estimate_velocity(cross_correlation(sq, lag), max_shift=max_shift)
    for flag in vel.flags:
        warnings.warn(f"velocity refinement fallback: {flag}", stacklevel=2)
    alpha = estimate_alpha(sq, vel.vx_px, vel.vy_px)
    return BoilingParams(
        L0_m=L0,
        r0_m=r0,
        vx_px=vel.vx_px,
        vy_px=vel.vy_px,
        alpha=alpha,
        delta_m=series.delta_m,
    )
