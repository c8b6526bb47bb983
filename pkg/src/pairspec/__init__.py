"""Coincidence Fourier spectroscopy of photon pairs.

Simulation of a fibre-coupled type-I down-conversion source, synthesis of
two-axis delay-scan coincidence interferograms, Fourier-domain reconstruction
of the joint spectrum, and a noise benchmark against a scanning spectrometer.
"""
from .bench import (
    BenchReport,
    BenchSpec,
    MethodEstimate,
    SweepReport,
    advantage_sweep,
    compare,
    fourier_run,
    scanning_baseline,
)
from .config import (
    SourceConfig,
    default_config,
    dump_default_text,
    load_config,
    parse_config_text,
)
from .crystal import (
    DEFAULT_SELLMEIER_SET,
    SELLMEIER_SETS,
    WAVELENGTH_BAND_M,
    CrystalSpec,
    extraordinary_index,
    ordinary_index,
)
from .errors import (
    AliasOverlapError,
    ConfigError,
    NumericError,
    OverflowCountError,
    PairspecError,
    ParaxialDomainError,
    QuadratureConvergenceError,
    ScanRangeError,
    WavelengthRangeError,
)
from .gridfile import (
    Axis,
    Grid,
    from_frequency_map,
    from_interferogram,
    from_joint_spectrum,
    from_wavelength_spectrum,
    read_grid,
    to_interferogram,
    to_joint_spectrum,
    write_csv,
    write_grid,
    write_pgm,
)
from .interferometer import (
    DetectionSpec,
    Interferogram,
    ScanPlan,
    coincidence_probability,
    expected_counts,
    fine_nyquist_step,
    plan_for_spectrum,
    plan_scan,
    synthesize,
)
from .reconstruction import (
    CrossSection,
    FrequencyMap,
    TermMasks,
    Terms,
    WavelengthSpectrum,
    cross_section,
    dft2,
    extract_terms,
    isolate_pair_interference,
    joint_in_frequency,
    joint_in_wavelength,
    sample_island,
)
from .spdc import (
    TWO_PI_C,
    CollectionSpec,
    FrequencyGrid,
    JointAmplitude,
    JointSpectrum,
    PumpSpec,
    joint_amplitude,
    joint_intensity,
    longitudinal_mismatch,
    marginals,
    omega_to_wavelength,
    pump_envelope,
    spectrum_moments,
    spectrum_second_moments,
    wavelength_to_omega,
)

__version__ = "0.1.0"
