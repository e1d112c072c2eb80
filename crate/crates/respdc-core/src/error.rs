//! Error type shared by every module of the library.

use crate::dispersion::Polarization;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{quantity} = {value:.6e} {unit} outside valid range [{min:.6e}, {max:.6e}] {unit}")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
        unit: &'static str,
    },

    #[error("resolution too coarse for {what}: {points} points supplied, at least {required} required")]
    Resolution {
        what: &'static str,
        points: usize,
        required: usize,
    },

    #[error("window too narrow for {what}: width {width:.6e} {unit}, need at least {need:.6e} {unit}")]
    WindowTooNarrow {
        what: &'static str,
        width: f64,
        need: f64,
        unit: &'static str,
    },

    #[error("{what} did not converge within {iterations} iterations (initial guess {seed:.9e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        seed: f64,
    },

    #[error("degenerate cavity: finesse is zero for the {pol:?} mode")]
    DegenerateCavity { pol: Polarization },

    #[error("process not quasi-phasematchable with first-order grating")]
    NotPhasematchable,

    #[error("no phase-matching root on the signal branch in [{lo:.6e}, {hi:.6e}] Hz")]
    NoRoot { lo: f64, hi: f64 },

    #[error("group-index degeneracy: estimate invalid at group-velocity matching")]
    GroupVelocityMatched,

    #[error("empty filter mask: no grid cells selected")]
    EmptyMask,

    #[error("insufficient resolution for decomposition: region is {rows}x{cols} cells, need at least 4x4")]
    RegionTooSmall { rows: usize, cols: usize },

    #[error("cluster filter wider than idler window: {width:.6e} Hz > {window:.6e} Hz")]
    FilterTooWide { width: f64, window: f64 },

    #[error("setpoint is not mode-hop stable: {why}")]
    UnstableSetpoint { why: String },

    #[error("singular tuning point: {why}")]
    SingularTuning { why: &'static str },

    #[error("mode hop while tuning: dominant peak left the tracked resonance at signal offset {offset_hz:.6e} Hz")]
    ModeHop { offset_hz: f64 },

    #[error("infeasible target: binding constraint is {binding} ({detail})")]
    Infeasible { binding: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
