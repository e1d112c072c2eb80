//! Quasi-phase-matching with a first-order poling grating: phase mismatch,
//! sinc envelope, poling-period solving, and the closed-form bandwidth and
//! cluster-spacing estimates.
//!
//! Process convention: pump and signal are Ordinary, idler is Extraordinary,
//! and the signal is the higher-frequency photon (nu_s > nu_p / 2).

use crate::cavity::SourceSpec;
use crate::dispersion::{group_index, propagation_constant, Polarization, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// One energy-conserving frequency triple plus the grating it is evaluated
/// against. The idler frequency is derived, never stored independently, so
/// energy conservation cannot be violated by construction.
#[derive(Clone, Copy, Debug)]
pub struct PhasematchPoint {
    pump_frequency: f64,
    signal_frequency: f64,
    temperature: f64,
    /// Poling period in m at the owning spec's reference temperature.
    poling_period: f64,
}

impl PhasematchPoint {
    pub fn new(
        pump_frequency: f64,
        signal_frequency: f64,
        temperature: f64,
        poling_period: f64,
    ) -> Result<Self> {
        if !(pump_frequency > 0.0 && signal_frequency > 0.0)
            || signal_frequency >= pump_frequency
        {
            return Err(Error::OutOfRange {
                quantity: "signal frequency",
                value: signal_frequency,
                min: 0.0,
                max: pump_frequency,
                unit: "Hz",
            });
        }
        if poling_period <= 0.0 {
            return Err(Error::OutOfRange {
                quantity: "poling_period",
                value: poling_period,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "m",
            });
        }
        Ok(PhasematchPoint {
            pump_frequency,
            signal_frequency,
            temperature,
            poling_period,
        })
    }

    /// Point using the spec's own grating.
    pub fn for_spec(
        spec: &SourceSpec,
        pump_frequency: f64,
        signal_frequency: f64,
        temperature: f64,
    ) -> Result<Self> {
        Self::new(
            pump_frequency,
            signal_frequency,
            temperature,
            spec.poling_period,
        )
    }

    pub fn pump_frequency(&self) -> f64 {
        self.pump_frequency
    }

    pub fn signal_frequency(&self) -> f64 {
        self.signal_frequency
    }

    /// Energy conservation: nu_i = nu_p - nu_s, exactly.
    pub fn idler_frequency(&self) -> f64 {
        self.pump_frequency - self.signal_frequency
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn poling_period(&self) -> f64 {
        self.poling_period
    }

    pub fn with_signal(&self, signal_frequency: f64) -> Result<Self> {
        Self::new(
            self.pump_frequency,
            signal_frequency,
            self.temperature,
            self.poling_period,
        )
    }
}

/// sinc(x) = sin(x)/x with sinc(0) = 1.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Delta-beta = beta_p - beta_s - beta_i - 2 pi / Lambda(T) in rad/m, with the
/// grating period thermally expanded by the spec's expansion factor.
pub fn phase_mismatch(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let t = point.temperature;
    let beta_p =
        propagation_constant(&spec.dispersion, Polarization::Ordinary, point.pump_frequency, t)?;
    let beta_s = propagation_constant(
        &spec.dispersion,
        Polarization::Ordinary,
        point.signal_frequency,
        t,
    )?;
    let beta_i = propagation_constant(
        &spec.dispersion,
        Polarization::Extraordinary,
        point.idler_frequency(),
        t,
    )?;
    let grating = point.poling_period * spec.thermal.expansion_factor(t);
    Ok(beta_p - beta_s - beta_i - 2.0 * std::f64::consts::PI / grating)
}

/// Phase-matching amplitude sinc(Delta-beta L(T) / 2), dimensionless.
pub fn pm_amplitude(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let mismatch = phase_mismatch(spec, point)?;
    Ok(sinc(mismatch * spec.length_at(point.temperature) / 2.0))
}

/// First-order grating period Lambda = 2 pi / (beta_p - beta_s - beta_i) in m
/// that phasematches the given pump/signal pair at the given temperature; the
/// idler follows from energy conservation.
pub fn solve_poling_period(
    spec: &SourceSpec,
    pump_wavelength: f64,
    signal_wavelength: f64,
    temperature: f64,
) -> Result<f64> {
    let nu_p = SPEED_OF_LIGHT / pump_wavelength;
    let nu_s = SPEED_OF_LIGHT / signal_wavelength;
    if nu_s >= nu_p {
        return Err(Error::OutOfRange {
            quantity: "signal frequency",
            value: nu_s,
            min: 0.0,
            max: nu_p,
            unit: "Hz",
        });
    }
    let nu_i = nu_p - nu_s;
    let beta_p = propagation_constant(&spec.dispersion, Polarization::Ordinary, nu_p, temperature)?;
    let beta_s = propagation_constant(&spec.dispersion, Polarization::Ordinary, nu_s, temperature)?;
    let beta_i =
        propagation_constant(&spec.dispersion, Polarization::Extraordinary, nu_i, temperature)?;
    let denom = beta_p - beta_s - beta_i;
    if denom <= 0.0 {
        return Err(Error::NotPhasematchable);
    }
    // The solved period is quoted at the reference temperature so that the
    // thermally expanded grating cancels the mismatch at `temperature`.
    Ok(2.0 * std::f64::consts::PI / denom * spec.thermal.expansion_factor(temperature))
}

const MISMATCH_TOLERANCE: f64 = 1e-3; // rad/m
const ROOT_MAX_ITERATIONS: usize = 50;
const SCAN_POINTS: usize = 512;
/// Relative margin above degeneracy where the signal branch starts.
const BRANCH_MARGIN: f64 = 1e-4;

/// The signal-branch root of Delta-beta(nu_s) = 0 for a given pump, using the
/// spec's own grating: bisection to bracket, then safeguarded Newton with
/// d(Delta-beta)/d(nu_s) = (2 pi / c)(n_g,i - n_g,s), to |Delta-beta| < 1e-3
/// rad/m.
///
/// With several roots on the branch, a supplied hint picks the nearest one;
/// otherwise the root with the largest envelope amplitude wins.
pub fn phasematched_signal(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    hint: Option<f64>,
) -> Result<f64> {
    if pump_frequency <= 0.0 {
        return Err(Error::OutOfRange {
            quantity: "pump frequency",
            value: pump_frequency,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    // Signal branch: nu_s in (nu_p/2, 3 nu_p/4], clipped to the dispersion
    // validity of both the signal and the implied idler.
    let (s_lo_wl, s_hi_wl) = spec.dispersion.valid_wavelength(Polarization::Ordinary);
    let (i_lo_wl, i_hi_wl) = spec.dispersion.valid_wavelength(Polarization::Extraordinary);
    let mut lo = (0.5 * pump_frequency * (1.0 + BRANCH_MARGIN))
        .max(SPEED_OF_LIGHT / s_hi_wl)
        .max(pump_frequency - SPEED_OF_LIGHT / i_lo_wl);
    let mut hi = (0.75 * pump_frequency)
        .min(SPEED_OF_LIGHT / s_lo_wl)
        .min(pump_frequency - SPEED_OF_LIGHT / i_hi_wl);
    // Shrink away from the exact validity edges so the group-index stencil fits.
    lo *= 1.0 + 1e-9;
    hi *= 1.0 - 1e-9;
    if !(hi > lo) {
        return Err(Error::NoRoot { lo, hi });
    }

    let mismatch_at = |nu_s: f64| -> Result<f64> {
        let point = PhasematchPoint::for_spec(spec, pump_frequency, nu_s, temperature)?;
        phase_mismatch(spec, &point)
    };

    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_nu = lo;
    let mut prev_val = mismatch_at(lo)?;
    for k in 1..=SCAN_POINTS {
        let nu = if k == SCAN_POINTS { hi } else { lo + step * k as f64 };
        let val = mismatch_at(nu)?;
        if prev_val == 0.0 {
            roots.push(prev_nu);
        } else if prev_val * val < 0.0 {
            roots.push(refine_root(
                spec,
                pump_frequency,
                temperature,
                (prev_nu, nu),
                (prev_val, val),
            )?);
        }
        prev_nu = nu;
        prev_val = val;
    }
    if prev_val == 0.0 {
        roots.push(prev_nu);
    }
    if roots.is_empty() {
        return Err(Error::NoRoot { lo, hi });
    }
    if roots.len() == 1 {
        return Ok(roots[0]);
    }
    if let Some(h) = hint {
        return Ok(roots
            .into_iter()
            .min_by(|a, b| (a - h).abs().partial_cmp(&(b - h).abs()).unwrap())
            .unwrap());
    }
    let mut best = roots[0];
    let mut best_amp = -1.0;
    for r in roots {
        let point = PhasematchPoint::for_spec(spec, pump_frequency, r, temperature)?;
        let amp = pm_amplitude(spec, &point)?.abs();
        if amp > best_amp {
            best_amp = amp;
            best = r;
        }
    }
    Ok(best)
}

fn refine_root(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    bracket: (f64, f64),
    values: (f64, f64),
) -> Result<f64> {
    let (mut a, mut b) = bracket;
    let (mut fa, _fb) = values;
    let seed = 0.5 * (a + b);
    let mut nu = seed;
    let mismatch_at = |nu_s: f64| -> Result<f64> {
        let point = PhasematchPoint::for_spec(spec, pump_frequency, nu_s, temperature)?;
        phase_mismatch(spec, &point)
    };
    // Ten bisection steps narrow the bracket, then Newton finishes.
    for iter in 0..ROOT_MAX_ITERATIONS {
        let f = mismatch_at(nu)?;
        if f.abs() < MISMATCH_TOLERANCE {
            return Ok(nu);
        }
        if f * fa > 0.0 {
            a = nu;
            fa = f;
        } else {
            b = nu;
        }
        if iter < 10 {
            nu = 0.5 * (a + b);
            continue;
        }
        let ng_s =
            group_index(&spec.dispersion, Polarization::Ordinary, SPEED_OF_LIGHT / nu, temperature)?;
        let ng_i = group_index(
            &spec.dispersion,
            Polarization::Extraordinary,
            SPEED_OF_LIGHT / (pump_frequency - nu),
            temperature,
        )?;
        let slope = 2.0 * std::f64::consts::PI / SPEED_OF_LIGHT * (ng_i - ng_s);
        let next = if slope != 0.0 { nu - f / slope } else { 0.5 * (a + b) };
        nu = if next > a && next < b { next } else { 0.5 * (a + b) };
    }
    Err(Error::NoConvergence {
        what: "phasematched signal root",
        iterations: ROOT_MAX_ITERATIONS,
        seed,
    })
}

fn group_index_walkoff(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let t = point.temperature;
    let ng_s = group_index(
        &spec.dispersion,
        Polarization::Ordinary,
        SPEED_OF_LIGHT / point.signal_frequency,
        t,
    )?;
    let ng_i = group_index(
        &spec.dispersion,
        Polarization::Extraordinary,
        SPEED_OF_LIGHT / point.idler_frequency(),
        t,
    )?;
    let delta = ng_s - ng_i;
    if delta.abs() < 1e-6 {
        return Err(Error::GroupVelocityMatched);
    }
    Ok(delta)
}

/// Closed-form FWHM of the sinc^2 envelope in signal frequency:
/// 5.56 c / (2 pi L(T) |n_g,s - n_g,i|) in Hz.
pub fn pm_bandwidth_estimate(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let delta = group_index_walkoff(spec, point)?;
    let length = spec.length_at(point.temperature);
    Ok(5.56 * SPEED_OF_LIGHT / (2.0 * std::f64::consts::PI * length * delta.abs()))
}

/// Closed-form spectral-cluster spacing c / (2 L(T) |n_g,s - n_g,i|) in Hz.
pub fn cluster_spacing_estimate(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let delta = group_index_walkoff(spec, point)?;
    let length = spec.length_at(point.temperature);
    Ok(SPEED_OF_LIGHT / (2.0 * length * delta.abs()))
}
