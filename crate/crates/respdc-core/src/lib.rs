//! Physics core for doubly resonant photon-pair sources in periodically
//! poled lithium niobate waveguides.
//!
//! The library models a single waveguide cavity that is resonant for both
//! downconverted photons, and exposes:
//!
//! - temperature-dependent dispersion and cavity response,
//! - quasi-phasematching and operating-point solving,
//! - emitted spectra, cluster structure, and stability windows,
//! - joint spectral amplitudes, heralded-state purity, and brightness,
//! - tuning coefficients and design search for target photon sources.
//!
//! Conventions: SI units everywhere (Hz, m, s), temperatures in degC,
//! mirror reflectivities as intensity fractions, losses in dB/cm where the
//! name says so. The signal photon is the higher-frequency Ordinary one;
//! the idler is Extraordinary.

pub mod brightness;
pub mod cavity;
pub mod design;
pub mod dispersion;
pub mod error;
pub mod jsa;
mod operating_point;
pub mod phasematch;
pub mod spectrum;
pub mod tuning;

pub use error::{Error, Result};

pub use dispersion::{
    group_index, propagation_constant, refractive_index, sample_length, DispersionModel,
    Polarization, ThermalModel, SPEED_OF_LIGHT,
};

pub use cavity::{
    airy_amplitude, find_resonances, finesse, free_spectral_range, resonance_linewidth,
    MirrorPair, ResonanceComb, SourceSpec,
};

pub use phasematch::{
    cluster_spacing_estimate, phase_mismatch, phasematched_signal, pm_amplitude,
    pm_bandwidth_estimate, solve_poling_period, PhasematchPoint,
};

pub use operating_point::OperatingPoint;

pub use design::{
    bandwidth_map, design_for_memory, design_with_overrides, linear_axis, purity_map, DesignMap,
    DesignOverrides, DesignPrediction, DesignResult, MemoryTarget,
};

pub use brightness::{
    clustering_factor, enhancement_factor, escape_probability, spectral_brightness_estimate,
    BrightnessReport,
};

pub use jsa::{
    apply_cluster_filter, build_jsa, dominant_cell_schmidt, mode_excitation_probability,
    purity_report, purity_report_at, purity_vs_pump_bandwidth, recommended_windows,
    schmidt_from_magnitude, schmidt_number, GeometryCase, JointSpectrum, JsaData,
    PumpBandwidthRow, PumpBandwidthTable, PumpLineshape, PumpSpec, PurityReport, SchmidtMode,
};

pub use spectrum::{
    detect_clusters, pump_detuning_map, signal_spectrum, stability_windows, temperature_map,
    Cluster, ClusterReport, SignalSpectrum, StabilityParameter, StabilityReport, StabilityWindow,
    TuningMap,
};
pub use tuning::{
    cotuning_coefficients, fine_tune_schedule, phase_partials, roundtrip_phase,
    CotuningCoefficients, TuningEntry, TuningSchedule,
};
