"""Fidelity metrics: per-pixel Welch temporal PSDs, the anisotropic
structure function, and stable-range-normalized RMSE.

All reductions use fixed summation order, so results do not depend on
any internal parallel schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .core import FrameSeries, slope_x
from .errors import DegenerateError, ValidationError

_PIXEL_CHUNK = 128


@dataclass(frozen=True)
class SpectrumCurve:
    """One-sided temporal PSD: power (energy/second) versus frequency (Hz)."""

    freqs: np.ndarray
    power: np.ndarray
    block_len: int
    fs_hz: float

    def __post_init__(self):
        if len(self.freqs) != len(self.power):
            raise ValidationError("freqs and power lengths differ")


@dataclass(frozen=True)
class StructureGrid:
    """Anisotropic structure function on a half-plane of 2-D separations.

    ``values[y, (nx-1) + x]`` holds the separation (x, y) with
    x in [-(nx-1), nx-1] and y in [0, ny-1]; the (x, y) -> (-x, -y)
    symmetry makes the half-plane lossless. ``count`` holds the number
    of contributing ordered pixel pairs per cell.
    """

    values: np.ndarray
    count: np.ndarray

    @property
    def x_offsets(self) -> np.ndarray:
        half = (self.values.shape[1] + 1) // 2
        return np.arange(-(half - 1), half)

    @property
    def y_offsets(self) -> np.ndarray:
        return np.arange(self.values.shape[0])

    def full_plane(self) -> np.ndarray:
        """Reconstruct the full separation grid via D(x, y) = D(-x, -y)."""
        lower = self.values[1:, ::-1][::-1]
        return np.concatenate([lower, self.values], axis=0)


def _hamming(n: int) -> np.ndarray:
    # symmetric form 0.54 - 0.46 cos(2 pi i / (M - 1))
    return np.hamming(n)


def _block_starts(n_samples: int, block_len: int) -> range:
    # 50% overlap; a trailing partial block is discarded
    return range(0, n_samples - block_len + 1, block_len // 2)


def welch_tpsd(signal: np.ndarray, fs_hz: float, block_len: int) -> SpectrumCurve:
    """One-sided Welch PSD of a single real time-series.

    The mean is removed from the entire signal (not per block), blocks
    overlap by 50% and carry a Hamming window, and interior bins are
    doubled when folding to one side.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ValidationError("welch_tpsd expects a 1-D signal")
    if block_len < 4:
        raise ValidationError(f"block_len must be >= 4, got {block_len}")
    if len(signal) < block_len:
        raise ValidationError(f"signal length {len(signal)} shorter than one block ({block_len})")
    curve = _welch_many(signal[None, :], fs_hz, block_len)
    return SpectrumCurve(freqs=curve[0], power=curve[1][0], block_len=block_len, fs_hz=fs_hz)


def _welch_many(signals: np.ndarray, fs_hz: float, block_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Welch over rows of ``signals`` (npix, nt)."""
    sig = signals - signals.mean(axis=1, keepdims=True)
    win = _hamming(block_len)
    scale = 1.0 / (np.sum(win**2) * fs_hz)
    starts = _block_starts(sig.shape[1], block_len)
    acc = np.zeros((sig.shape[0], block_len // 2 + 1))
    for s in starts:
        spec = scipy.fft.rfft(sig[:, s : s + block_len] * win, axis=1)
        acc += spec.real**2 + spec.imag**2
    acc *= scale / len(starts)
    acc[:, 1:-1] *= 2.0
    if block_len % 2 == 1:
        acc[:, -1] *= 2.0  # odd lengths have no Nyquist bin
    freqs = np.fft.rfftfreq(block_len, d=1.0 / fs_hz)
    return freqs, acc


def field_tpsd(series: FrameSeries, block_len: int) -> SpectrumCurve:
    """Welch TPSD of every valid pixel, averaged over the aperture."""
    if series.nt < block_len:
        raise ValidationError(f"nt={series.nt} shorter than block_len={block_len}")
    mask = series.valid_mask()
    signals = series.frames[:, mask].T  # (npix, nt)
    acc = None
    freqs = None
    for lo in range(0, signals.shape[0], _PIXEL_CHUNK):
        freqs, power = _welch_many(signals[lo : lo + _PIXEL_CHUNK], series.fs_hz, block_len)
        s = power.sum(axis=0)
        acc = s if acc is None else acc + s
    return SpectrumCurve(freqs=freqs, power=acc / signals.shape[0], block_len=block_len, fs_hz=series.fs_hz)


def anisotropic_structure(series: FrameSeries) -> StructureGrid:
    """Quasi-homogeneous structure function averaged per 2-D separation.

    Each pixel's time-series is centered on its temporal mean and scaled
    by its population (1/N_T) temporal standard deviation; the
    mean-squared difference of the scaled series is then averaged over
    all valid pixel pairs sharing a separation vector. Values lie in
    [0, 4] and satisfy D(x, y) = D(-x, -y), so only the y >= 0
    half-plane is stored.
    """
    if series.nt < 2:
        raise ValidationError("anisotropic_structure needs nt >= 2")
    mask = series.valid_mask()
    mu = series.frames.mean(axis=0)
    sigma = series.frames.std(axis=0)  # population convention
    bad = mask & (sigma == 0.0)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise DegenerateError(f"zero temporal standard deviation at pixel (y={y}, x={x})")
    psi = np.where(mask, (series.frames - mu) / np.where(sigma == 0, 1.0, sigma), 0.0)

    ny, nx = mask.shape
    py = scipy.fft.next_fast_len(2 * ny - 1)
    px = scipy.fft.next_fast_len(2 * nx - 1)
    acc = np.zeros((py, px // 2 + 1), dtype=np.complex128)
    for lo in range(0, series.nt, _PIXEL_CHUNK):
        f = scipy.fft.rfft2(psi[lo : lo + _PIXEL_CHUNK], s=(py, px), axes=(1, 2))
        acc += np.sum(f * np.conj(f), axis=0)
    corr_full = scipy.fft.irfft2(acc, s=(py, px))
    fm = scipy.fft.rfft2(mask.astype(np.float64), s=(py, px))
    count_full = np.rint(scipy.fft.irfft2(fm * np.conj(fm), s=(py, px))).astype(np.int64)

    dx = np.arange(-(nx - 1), nx)
    dy = np.arange(0, ny)
    corr = corr_full[np.ix_(dy % py, dx % px)]
    count = count_full[np.ix_(dy % py, dx % px)]
    with np.errstate(invalid="ignore", divide="ignore"):
        # centered unit-variance scaling makes the expansion exact:
        # D = 2 - 2 * mean(psi_1 psi_2)
        values = 2.0 - 2.0 * corr / (series.nt * count)
    values[count == 0] = 0.0
    values[0, nx - 1] = 0.0  # identical points, exactly
    np.clip(values, 0.0, None, out=values)
    return StructureGrid(values=values, count=count)


def nrmse_stable(reference: np.ndarray, candidate: np.ndarray) -> float:
    """RMSE divided by the reference's 95th-minus-5th percentile range.

    Percentiles use linear interpolation between order statistics. For
    structure-function comparisons the caller passes element-wise square
    roots.
    """
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValidationError(f"shape mismatch: {ref.shape} vs {cand.shape}")
    span = np.percentile(ref, 95) - np.percentile(ref, 5)
    if span <= 0:
        raise DegenerateError("reference percentile range is zero")
    rmse = np.sqrt(np.mean((ref - cand) ** 2))
    return float(rmse / span)


@dataclass(frozen=True)
class EvaluationReport:
    """The three fidelity scalars plus the curves and grids behind them.

    Scalar order mirrors the reporting convention: slope TPSD error
    first, then phase TPSD error, then the square-root structure
    function error.
    """

    nrmse_slope_tpsd: float
    nrmse_phase_tpsd: float
    nrmse_structure: float
    measured_slope_tpsd: SpectrumCurve = field(repr=False, default=None)
    synthetic_slope_tpsd: SpectrumCurve = field(repr=False, default=None)
    measured_phase_tpsd: SpectrumCurve = field(repr=False, default=None)
    synthetic_phase_tpsd: SpectrumCurve = field(repr=False, default=None)
    measured_structure: StructureGrid = field(repr=False, default=None)
    synthetic_structure: StructureGrid = field(repr=False, default=None)

    def scalars(self) -> dict[str, float]:
        return {
            "nrmse_slope_tpsd": self.nrmse_slope_tpsd,
            "nrmse_phase_tpsd": self.nrmse_phase_tpsd,
            "nrmse_structure": self.nrmse_structure,
        }


def _mean_curve(curves: list[SpectrumCurve]) -> SpectrumCurve:
    power = np.mean([c.power for c in curves], axis=0)
    return SpectrumCurve(freqs=curves[0].freqs, power=power, block_len=curves[0].block_len, fs_hz=curves[0].fs_hz)


def _mean_grid(grids: list[StructureGrid]) -> StructureGrid:
    values = np.mean([g.values for g in grids], axis=0)
    return StructureGrid(values=values, count=grids[0].count)


def _match_aperture(synthetic: FrameSeries, measured: FrameSeries) -> FrameSeries:
    """Crop an (over-sized) synthetic stack to the measured aperture and mask."""
    if synthetic.ny < measured.ny or synthetic.nx < measured.nx:
        raise ValidationError(
            f"synthetic aperture {(synthetic.ny, synthetic.nx)} smaller than "
            f"measured {(measured.ny, measured.nx)}"
        )
    frames = synthetic.frames[:, : measured.ny, : measured.nx]
    return synthetic.with_frames(frames, measured.mask)


def evaluate_pair(
    measured: FrameSeries,
    synthetic: FrameSeries | list[FrameSeries],
    nb_phase: int,
    nb_slope: int,
) -> EvaluationReport:
    """Score a synthetic series (or ensemble) against a measured stack.

    Ensemble members have their TPSD curves and structure grids averaged
    before scoring. Synthetic stacks larger than the measured aperture
    are cropped to it and inherit the measured mask.
    """
    members = synthetic if isinstance(synthetic, list) else [synthetic]
    if not members:
        raise ValidationError("empty synthetic ensemble")
    for m in members:
        if not (
            np.isclose(m.delta_m, measured.delta_m)
            and np.isclose(m.fs_hz, measured.fs_hz)
            and np.isclose(m.lambda_m, measured.lambda_m)
        ):
            raise ValidationError("synthetic metadata (delta, fs, lambda) does not match measured")
    members = [_match_aperture(m, measured) for m in members]

    meas_phase = field_tpsd(measured, nb_phase)
    meas_slope = field_tpsd(slope_x(measured), nb_slope)
    meas_struct = anisotropic_structure(measured)

    syn_phase = _mean_curve([field_tpsd(m, nb_phase) for m in members])
    syn_slope = _mean_curve([field_tpsd(slope_x(m), nb_slope) for m in members])
    syn_struct = _mean_grid([anisotropic_structure(m) for m in members])

    return EvaluationReport(
        nrmse_slope_tpsd=nrmse_stable(meas_slope.power, syn_slope.power),
        nrmse_phase_tpsd=nrmse_stable(meas_phase.power, syn_phase.power),
        nrmse_structure=nrmse_stable(np.sqrt(meas_struct.values), np.sqrt(syn_struct.values)),
        measured_slope_tpsd=meas_slope,
        synthetic_slope_tpsd=syn_slope,
        measured_phase_tpsd=meas_phase,
        synthetic_phase_tpsd=syn_phase,
        measured_structure=meas_struct,
        synthetic_structure=syn_struct,
    )
