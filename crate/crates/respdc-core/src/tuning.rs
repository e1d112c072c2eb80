//! Round-trip-phase bookkeeping for co-tuned operation: phase partials,
//! co-tuning coefficients, and mode-hop-free tuning schedules that move the
//! temperature and pump frequency together so both photons stay resonant.

use serde::{Deserialize, Serialize};

use crate::cavity::{free_spectral_range, resonance_linewidth, SourceSpec};
use crate::dispersion::{refractive_index, Polarization, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::operating_point::OperatingPoint;
use crate::phasematch::PhasematchPoint;
use crate::spectrum::signal_spectrum;

/// Temperature step for the thermal phase partial, K.
const TEMPERATURE_STEP: f64 = 1e-3;
/// Frequency step for the spectral phase partial, in linewidths.
const FREQUENCY_STEP_LINEWIDTHS: f64 = 0.1;
/// Newton convergence target on each residual phase, rad. Well below the
/// 1e-4 rad contract so the reported residuals have headroom.
const PHASE_TARGET: f64 = 1e-7;
/// Residual phases above this bound violate the schedule contract.
const PHASE_BOUND: f64 = 1e-4;
const MAX_NEWTON_ITERATIONS: usize = 40;
/// Half-width of the mode-hop verification window, in signal FSRs.
const VERIFY_HALF_FSRS: f64 = 1.5;

/// First-order co-tuning slopes: temperature per signal frequency shift and
/// the pump-frequency multiplier.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CotuningCoefficients {
    /// K/Hz (multiply by 1e9 for degC per GHz).
    pub dt_dnu_s: f64,
    /// Pump shift per signal shift; above 1 whenever the idler must follow.
    pub dnu_p_dnu_s: f64,
}

/// One solved schedule entry: the device settings that keep both photons
/// resonant at the requested signal offset.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TuningEntry {
    pub signal_offset: f64,
    pub temperature: f64,
    pub pump_frequency: f64,
    pub residual_phase_s: f64,
    pub residual_phase_i: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuningSchedule {
    /// Anchored operating point the offsets are measured from.
    pub setpoint: OperatingPoint,
    pub entries: Vec<TuningEntry>,
}

/// Round-trip phase 2 omega n L / c = 4 pi nu n(nu, T) L(T) / c, with the
/// temperature acting through both the index and the expanded length.
pub fn roundtrip_phase(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::OutOfRange {
            quantity: "frequency",
            value: frequency,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    let n = refractive_index(
        &spec.dispersion,
        pol,
        SPEED_OF_LIGHT / frequency,
        temperature,
    )?;
    Ok(4.0 * std::f64::consts::PI * frequency * n * spec.length_at(temperature) / SPEED_OF_LIGHT)
}

/// Central-difference phase partials (d phi / d omega in s, d phi / d T in
/// rad/K) with fixed physical steps: a tenth of a linewidth and one mK.
pub fn phase_partials(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<(f64, f64)> {
    let dnu = resonance_linewidth(spec, pol, frequency, temperature)? * FREQUENCY_STEP_LINEWIDTHS;
    let hi = roundtrip_phase(spec, pol, frequency + dnu, temperature)?;
    let lo = roundtrip_phase(spec, pol, frequency - dnu, temperature)?;
    let dphi_domega = (hi - lo) / (2.0 * 2.0 * std::f64::consts::PI * dnu);
    let warm = roundtrip_phase(spec, pol, frequency, temperature + TEMPERATURE_STEP)?;
    let cool = roundtrip_phase(spec, pol, frequency, temperature - TEMPERATURE_STEP)?;
    let dphi_dt = (warm - cool) / (2.0 * TEMPERATURE_STEP);
    Ok((dphi_domega, dphi_dt))
}

/// First-order slopes that keep both round-trip phases stationary: the
/// temperature compensates the signal phase, and the pump absorbs the idler
/// phase shift the temperature change induces.
pub fn cotuning_coefficients(
    spec: &SourceSpec,
    point: &PhasematchPoint,
    temperature: f64,
) -> Result<CotuningCoefficients> {
    let (dw_s, dt_s) = phase_partials(
        spec,
        Polarization::Ordinary,
        point.signal_frequency(),
        temperature,
    )?;
    let (dw_i, dt_i) = phase_partials(
        spec,
        Polarization::Extraordinary,
        point.idler_frequency(),
        temperature,
    )?;
    if dt_s == 0.0 || !dt_s.is_finite() {
        return Err(Error::SingularTuning {
            why: "temperature does not move the signal round-trip phase",
        });
    }
    if dw_i == 0.0 || !dw_i.is_finite() {
        return Err(Error::SingularTuning {
            why: "the idler round-trip phase does not depend on frequency",
        });
    }
    Ok(CotuningCoefficients {
        dt_dnu_s: -2.0 * std::f64::consts::PI * dw_s / dt_s,
        dnu_p_dnu_s: 1.0 + (dt_i * dw_s) / (dw_i * dt_s),
    })
}

/// Newton iteration on one variable driving a round-trip phase back to its
/// setpoint value; the derivative callback supplies the local slope.
fn newton_phase<F, G>(
    what: &'static str,
    seed: f64,
    mut residual: F,
    mut slope: G,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
    G: FnMut(f64) -> Result<f64>,
{
    let mut x = seed;
    let mut res = residual(x)?;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if res.abs() < PHASE_TARGET {
            return Ok((x, res));
        }
        let d = slope(x)?;
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularTuning {
                why: "vanishing phase slope during co-tuning",
            });
        }
        x -= res / d;
        res = residual(x)?;
    }
    if res.abs() < PHASE_BOUND {
        return Ok((x, res));
    }
    Err(Error::NoConvergence {
        what,
        iterations: MAX_NEWTON_ITERATIONS,
        seed,
    })
}

/// Mode-hop-free tuning schedule over the requested signal offsets.
///
/// Each entry holds the comb indices of both photons fixed: the temperature
/// is solved so the signal stays on its resonance at the shifted frequency,
/// then the pump is solved so the idler stays on its own. Entries seed from
/// the previous solution (path continuation), and each solved setting is
/// verified against the emitted spectrum: if the dominant peak leaves the
/// tracked resonance by more than half an FSR the offset is reported as a
/// mode hop.
pub fn fine_tune_schedule(
    spec: &SourceSpec,
    point: &PhasematchPoint,
    temperature: f64,
    signal_offsets: &[f64],
) -> Result<TuningSchedule> {
    spec.validate()?;
    let setpoint = OperatingPoint::anchor(spec, point.pump_frequency(), temperature)?;
    let fsr_s = free_spectral_range(
        spec,
        Polarization::Ordinary,
        setpoint.signal_center,
        temperature,
    )?;
    for &offset in signal_offsets {
        if !(offset.abs() <= fsr_s * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange {
                quantity: "signal offset",
                value: offset,
                min: -fsr_s,
                max: fsr_s,
                unit: "Hz",
            });
        }
    }
    let phase_s0 = roundtrip_phase(
        spec,
        Polarization::Ordinary,
        setpoint.signal_center,
        temperature,
    )?;
    let phase_i0 = roundtrip_phase(
        spec,
        Polarization::Extraordinary,
        setpoint.idler_center,
        temperature,
    )?;
    let anchor_point = PhasematchPoint::for_spec(
        spec,
        setpoint.pump_frequency,
        setpoint.signal_center,
        temperature,
    )?;
    let coefficients = cotuning_coefficients(spec, &anchor_point, temperature)?;
    let lw_s = resonance_linewidth(
        spec,
        Polarization::Ordinary,
        setpoint.signal_center,
        temperature,
    )?;
    let verify_points =
        ((2.0 * VERIFY_HALF_FSRS * fsr_s / lw_s * 8.0).ceil() as usize).max(2) + 1;

    let mut entries = Vec::with_capacity(signal_offsets.len());
    let mut prev_offset = 0.0;
    let mut prev_temperature = temperature;
    let mut prev_idler = setpoint.idler_center;
    for &offset in signal_offsets {
        let nu_s = setpoint.signal_center + offset;
        let seed_t = prev_temperature + coefficients.dt_dnu_s * (offset - prev_offset);
        let (solved_t, residual_s) = newton_phase(
            "temperature co-tuning",
            seed_t,
            |t| Ok(roundtrip_phase(spec, Polarization::Ordinary, nu_s, t)? - phase_s0),
            |t| Ok(phase_partials(spec, Polarization::Ordinary, nu_s, t)?.1),
        )?;
        let seed_i = prev_idler + (coefficients.dnu_p_dnu_s - 1.0) * (offset - prev_offset);
        let (solved_i, residual_i) = newton_phase(
            "pump co-tuning",
            seed_i,
            |nu| {
                Ok(roundtrip_phase(spec, Polarization::Extraordinary, nu, solved_t)? - phase_i0)
            },
            |nu| {
                Ok(phase_partials(spec, Polarization::Extraordinary, nu, solved_t)?.0
                    * 2.0
                    * std::f64::consts::PI)
            },
        )?;
        let nu_p = nu_s + solved_i;
        // The dominant emitted peak must still be the tracked resonance.
        let spectrum = signal_spectrum(
            spec,
            nu_p,
            solved_t,
            (nu_s - VERIFY_HALF_FSRS * fsr_s, nu_s + VERIFY_HALF_FSRS * fsr_s),
            verify_points,
        )?;
        let mut best = 0usize;
        for (i, v) in spectrum.values.iter().enumerate() {
            if *v > spectrum.values[best] {
                best = i;
            }
        }
        if (spectrum.frequencies[best] - nu_s).abs() > fsr_s / 2.0 {
            return Err(Error::ModeHop { offset_hz: offset });
        }
        entries.push(TuningEntry {
            signal_offset: offset,
            temperature: solved_t,
            pump_frequency: nu_p,
            residual_phase_s: residual_s,
            residual_phase_i: residual_i,
        });
        prev_offset = offset;
        prev_temperature = solved_t;
        prev_idler = solved_i;
    }
    Ok(TuningSchedule { setpoint, entries })
}
