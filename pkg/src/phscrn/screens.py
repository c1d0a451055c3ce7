"""Boiling-flow generation of Von Karman phase screen time-series.

The recursion runs on an oversized grid (side doubled, area x4) to keep
the frozen-flow phase ramp from wrapping around the periodic FFT domain;
each realized screen is cropped to its top-left quadrant and detrended.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FrameSeries, ModeField, detrend_frames, freq_bins
from .errors import ValidationError

VK_CONSTANT = 0.023


@dataclass(frozen=True)
class BoilingParams:
    """The five flow parameters plus the pixel spacing needed to regenerate.

    Velocities are in pixels per time-step and may be negative or
    non-integer. alpha = 1 is pure frozen flow.
    """

    L0_m: float
    r0_m: float
    vx_px: float
    vy_px: float
    alpha: float
    delta_m: float

    def __post_init__(self):
        if not (self.L0_m > 0 and self.r0_m > 0 and self.delta_m > 0):
            raise ValidationError("L0_m, r0_m and delta_m must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (np.isfinite(self.vx_px) and np.isfinite(self.vy_px)):
            raise ValidationError("velocity components must be finite")


@dataclass(frozen=True)
class GenSpec:
    """Output geometry, length and seeding for one generated series."""

    n_out: int
    n_steps: int
    seed: int
    lambda_m: float = 532e-9
    fs_hz: float = 1.0

    def __post_init__(self):
        if self.n_out < 2:
            raise ValidationError(f"n_out must be >= 2, got {self.n_out}")
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")


def von_karman_psd(fx, fy, params: BoilingParams):
    """Von Karman spatial PSD at frequencies (fx, fy) in cycles per meter.

    0.023 * r0^(-5/3) * (fx^2 + fy^2 + L0^(-2))^(-11/6), finite at DC
    because L0 > 0.
    """
    fx = np.asarray(fx, dtype=np.float64)
    fy = np.asarray(fy, dtype=np.float64)
    return VK_CONSTANT * params.r0_m ** (-5.0 / 3.0) * (fx**2 + fy**2 + params.L0_m**-2) ** (-11.0 / 6.0)


def scaling_field(params: BoilingParams, n: int, delta: float | None = None) -> np.ndarray:
    """Mode standard-deviation field P = sqrt(S(bins/delta)) / (n delta)."""
    if delta is None:
        delta = params.delta_m
    grid = freq_bins(n)
    s = von_karman_psd(grid.fx / delta, grid.fy / delta, params)
    return np.sqrt(s) / (n * delta)


def _white_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Complex noise, real and imaginary parts independent standard normal."""
    z = rng.standard_normal((2, n, n))
    return z[0] + 1j * z[1]


def initial_modes(params: BoilingParams, n: int, rng: np.random.Generator) -> ModeField:
    """Fresh Kolmogorov mode field: P elementwise times complex white noise."""
    p = scaling_field(params, n)
    return ModeField(n=n, modes=p * _white_noise(n, rng))


def shift_phases(n: int, vx_px: float, vy_px: float) -> np.ndarray:
    """Per-bin translation factor exp(-2j pi (vx fx + vy fy))."""
    grid = freq_bins(n)
    return np.exp(-2j * np.pi * (vx_px * grid.fx + vy_px * grid.fy))


def frozen_shift(modes: ModeField, vx_px: float, vy_px: float) -> ModeField:
    """Translate a screen by (vx, vy) pixels via a phase ramp on its modes."""
    return ModeField(n=modes.n, modes=modes.modes * shift_phases(modes.n, vx_px, vy_px))


def boiling_step(modes: ModeField, params: BoilingParams, rng: np.random.Generator) -> ModeField:
    """One recursion step: alpha-weighted shifted screen plus fresh noise.

    The alpha / sqrt(1 - alpha^2) weighting preserves the spatial energy
    spectrum bin by bin.
    """
    shifted = frozen_shift(modes, params.vx_px, params.vy_px)
    if params.alpha == 1.0:
        return shifted
    p = scaling_field(params, modes.n)
    noise = np.sqrt(1.0 - params.alpha**2) * p * _white_noise(modes.n, rng)
    return ModeField(n=modes.n, modes=params.alpha * shifted.modes + noise)


def realize_screen(modes: ModeField) -> np.ndarray:
    """Real part of the inverse 2-D DFT (inverse carries the 1/n^2 factor)."""
    return np.fft.ifft2(modes.modes).real


def generate_series(params: BoilingParams, spec: GenSpec) -> FrameSeries:
    """Run the boiling-flow recursion and return the cropped, detrended stack.

    The recursion grid side is 2 * n_out; each step realizes the screen,
    keeps the top-left n_out quadrant and removes tilt, tip and piston.
    Seeding is one RNG substream per time-step, so the output is
    bit-reproducible for a given (params, spec).
    """
    n_big = 2 * spec.n_out
    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_steps)
    # Inlined recursion: P and the translation ramp are loop constants.
    p = scaling_field(params, n_big)
    ramp = shift_phases(n_big, params.vx_px, params.vy_px)
    noise_w = np.sqrt(1.0 - params.alpha**2)
    modes = p * _white_noise(n_big, np.random.default_rng(streams[0]))
    frames = np.empty((spec.n_steps, spec.n_out, spec.n_out))
    frames[0] = np.fft.ifft2(modes).real[: spec.n_out, : spec.n_out]
    for t in range(1, spec.n_steps):
        modes = params.alpha * (ramp * modes)
        if noise_w > 0.0:
            modes += noise_w * p * _white_noise(n_big, np.random.default_rng(streams[t]))
        frames[t] = np.fft.ifft2(modes).real[: spec.n_out, : spec.n_out]
    full = np.ones((spec.n_out, spec.n_out), dtype=bool)
    frames = detrend_frames(frames, full)
    return FrameSeries(frames, params.delta_m, spec.fs_hz, spec.lambda_m)
