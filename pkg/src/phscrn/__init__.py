"""Boiling-flow phase screen toolkit.

Generation of Von Karman phase screen time-series with the boiling-flow
recursion, estimation of the five flow parameters from measured phase
aberration stacks, and spectral / structure-function fidelity metrics.
"""

from .core import FrameSeries, FrequencyGrid, ModeField, freq_bins, inscribe_square, remove_ttp, slope_x
from .screens import (
    BoilingParams,
    GenSpec,
    boiling_step,
    frozen_shift,
    generate_series,
    initial_modes,
    realize_screen,
    scaling_field,
    von_karman_psd,
)
from .estimation import (
    CorrelationGrid,
    SpectrumGrid,
    VelocityEstimate,
    cross_correlation,
    estimate_L0,
    estimate_alpha,
    estimate_params,
    estimate_r0,
    estimate_velocity,
    spatial_psd,
)
from .metrics import (
    EvaluationReport,
    SpectrumCurve,
    StructureGrid,
    anisotropic_structure,
    evaluate_pair,
    field_tpsd,
    nrmse_stable,
    welch_tpsd,
)
from .errors import DataError, DegenerateError, PhscrnError, ValidationError

__version__ = "0.1.0"
