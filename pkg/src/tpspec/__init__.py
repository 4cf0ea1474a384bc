"""Frequency-resolved photon correlations of a resonantly driven two-level emitter."""

from .correlations import (
    FilterSpec,
    SensorConfig,
    Spectrum,
    filtered_g2,
    filtered_g2_zero,
    filtered_spectrum,
    recombined_sideband_g2,
)
from .emitter import (
    EmitterParams,
    dressed_states,
    excited_population,
    feature_catalog,
    mollow_peaks,
    unfiltered_g2,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    MaskedPointsError,
    ResolutionError,
    SensorBackActionWarning,
    SteadyStateError,
    TpsError,
    UndersampledWarning,
)
from .maps import MapGrid, MapOptions, SpectralMap2D, cs_map, tps_map
from .oracle import OracleConfig, direct_g2_zero
from .postprocess import DiffusionSpec, IrfSpec, convolve_irf, diffused_g2, diffused_spectrum
from .traces import CorrelationTrace

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "CorrelationTrace",
    "DiffusionSpec",
    "DimensionError",
    "EmitterParams",
    "FilterSpec",
    "IrfSpec",
    "MapGrid",
    "MapOptions",
    "MaskedPointsError",
    "OracleConfig",
    "ResolutionError",
    "SensorBackActionWarning",
    "SensorConfig",
    "SpectralMap2D",
    "Spectrum",
    "SteadyStateError",
    "TpsError",
    "UndersampledWarning",
    "convolve_irf",
    "cs_map",
    "diffused_g2",
    "diffused_spectrum",
    "direct_g2_zero",
    "dressed_states",
    "excited_population",
    "feature_catalog",
    "filtered_g2",
    "filtered_g2_zero",
    "filtered_spectrum",
    "mollow_peaks",
    "recombined_sideband_g2",
    "tps_map",
    "unfiltered_g2",
]
