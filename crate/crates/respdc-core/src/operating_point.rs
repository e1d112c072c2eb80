//! Anchoring of the doubly resonant setpoint: snap the phasematched signal
//! to its nearest comb line, snap the energy-conserving idler to its nearest
//! comb line, and close energy conservation by redefining the pump as the
//! exact sum of the two lines.

use serde::{Deserialize, Serialize};

use crate::cavity::{find_resonances, free_spectral_range, SourceSpec};
use crate::dispersion::Polarization;
use crate::error::Result;
use crate::phasematch::phasematched_signal;

/// How many FSRs of comb to search on each side of the target line.
const ANCHOR_SPAN_FSRS: f64 = 3.0;

/// A doubly resonant operating point: one signal comb line, one idler comb
/// line, and the pump frequency that is exactly their sum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Anchored pump = signal_center + idler_center, Hz.
    pub pump_frequency: f64,
    /// Signal comb line nearest the phasematching center, Hz.
    pub signal_center: f64,
    /// Idler comb line nearest the energy-conserving partner, Hz.
    pub idler_center: f64,
    /// degC; combs are anchored at this temperature.
    pub temperature: f64,
}

impl OperatingPoint {
    /// Anchors the setpoint reachable from a nominal pump frequency.
    ///
    /// The nominal pump fixes the phasematching center; the returned pump
    /// differs from it by up to one idler FSR so that both photons sit
    /// exactly on resonance.
    pub fn anchor(
        spec: &SourceSpec,
        nominal_pump_frequency: f64,
        temperature: f64,
    ) -> Result<Self> {
        let nu_pm = phasematched_signal(spec, nominal_pump_frequency, temperature, None)?;
        let fsr_s = free_spectral_range(spec, Polarization::Ordinary, nu_pm, temperature)?;
        let comb_s = find_resonances(
            spec,
            Polarization::Ordinary,
            (nu_pm - ANCHOR_SPAN_FSRS * fsr_s, nu_pm + ANCHOR_SPAN_FSRS * fsr_s),
            temperature,
        )?;
        let signal_center = comb_s.nearest_center(nu_pm);

        let idler_target = nominal_pump_frequency - signal_center;
        let fsr_i =
            free_spectral_range(spec, Polarization::Extraordinary, idler_target, temperature)?;
        let comb_i = find_resonances(
            spec,
            Polarization::Extraordinary,
            (
                idler_target - ANCHOR_SPAN_FSRS * fsr_i,
                idler_target + ANCHOR_SPAN_FSRS * fsr_i,
            ),
            temperature,
        )?;
        let idler_center = comb_i.nearest_center(idler_target);

        Ok(OperatingPoint {
            pump_frequency: signal_center + idler_center,
            signal_center,
            idler_center,
            temperature,
        })
    }
}
