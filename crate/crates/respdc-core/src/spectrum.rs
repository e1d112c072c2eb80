//! Continuous-wave signal spectrum of the doubly resonant source, cluster
//! detection, dominant-peak maps under pump detuning or temperature drift,
//! and the stability windows around a setpoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    airy_amplitude, find_resonances, free_spectral_range, resonance_linewidth, SourceSpec,
};
use crate::dispersion::Polarization;
use crate::error::{Error, Result};
use crate::phasematch::{cluster_spacing_estimate, pm_amplitude, PhasematchPoint};

/// Minimum grid samples per signal linewidth.
const SAMPLES_PER_LINEWIDTH: usize = 8;
/// Peaks below this fraction of the maximum are ignored when clustering.
const PEAK_FLOOR: f64 = 1e-3;

/// Relative cw signal spectral density on a uniform frequency grid,
/// normalized to unit maximum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignalSpectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub pump_frequency: f64,
    pub temperature: f64,
}

/// One detected cluster of doubly resonant emission.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Cluster {
    /// Frequency of the cluster's tallest peak, Hz.
    pub center: f64,
    /// Trapezoid-integrated share of the total spectrum, sums to 1.
    pub integrated_weight: f64,
    pub peak_count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    pub central_cluster_index: usize,
    /// Weight of the heaviest cluster; equals its integrated_weight.
    pub central_fraction: f64,
    /// Mean spacing of adjacent cluster centers; None with a single cluster.
    pub spacing_measured: Option<f64>,
}

/// Dominant-peak trajectory under a swept parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuningMap {
    /// Pump detunings in Hz, or absolute temperatures in degC.
    pub parameter_values: Vec<f64>,
    /// Refined dominant-peak center per parameter value, Hz.
    pub dominant_centers: Vec<f64>,
    /// Indices i where |center[i] - center[i-1]| >= fsr/2: mode hops.
    pub hop_indices: Vec<usize>,
    /// Least-squares slope of center vs parameter on the longest hop-free
    /// segment; None when no segment has at least two points.
    pub drift_slope: Option<f64>,
    /// Signal FSR used for the hop threshold, Hz.
    pub fsr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityParameter {
    PumpFrequency,
    Temperature,
}

/// Offset range around the setpoint over which one resonance keeps at least
/// 90% of the emitted weight.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityWindow {
    pub parameter: StabilityParameter,
    /// min(|up|, |down|) to the first dominance loss; Hz or K.
    pub halfwidth: f64,
    /// Hz or degC.
    pub setpoint: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub pump: StabilityWindow,
    pub temperature: StabilityWindow,
}

/// cw signal spectrum S(nu_s) = sinc^2(dbeta L/2) |A_s(nu_s)|^2
/// |A_i(nu_p - nu_s)|^2, max-normalized.
pub fn signal_spectrum(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    window: (f64, f64),
    points: usize,
) -> Result<SignalSpectrum> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::OutOfRange {
            quantity: "spectrum window",
            value: hi - lo,
            min: 0.0,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    let required = required_points(spec, (lo, hi), temperature)?;
    if points < required {
        return Err(Error::Resolution {
            what: "signal spectrum",
            points,
            required,
        });
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut frequencies = Vec::with_capacity(points);
    let mut values = Vec::with_capacity(points);
    let mut max = 0.0f64;
    for k in 0..points {
        let nu = if k == points - 1 { hi } else { lo + step * k as f64 };
        let point = PhasematchPoint::for_spec(spec, pump_frequency, nu, temperature)?;
        let envelope = pm_amplitude(spec, &point)?;
        let a_s = airy_amplitude(spec, Polarization::Ordinary, nu, temperature)?;
        let a_i = airy_amplitude(
            spec,
            Polarization::Extraordinary,
            pump_frequency - nu,
            temperature,
        )?;
        let s = envelope * envelope * a_s.norm_sqr() * a_i.norm_sqr();
        frequencies.push(nu);
        values.push(s);
        if s > max {
            max = s;
        }
    }
    debug_assert!(max > 0.0);
    for v in &mut values {
        *v /= max;
    }
    Ok(SignalSpectrum {
        frequencies,
        values,
        pump_frequency,
        temperature,
    })
}

/// Grid points needed to give 8 samples per signal linewidth; a degenerate
/// (zero-finesse) signal cavity has no linewidth to resolve.
fn required_points(spec: &SourceSpec, window: (f64, f64), temperature: f64) -> Result<usize> {
    let mid = 0.5 * (window.0 + window.1);
    match resonance_linewidth(spec, Polarization::Ordinary, mid, temperature) {
        Ok(lw) => {
            let required = ((window.1 - window.0) / lw * SAMPLES_PER_LINEWIDTH as f64).ceil();
            Ok((required as usize).max(2))
        }
        Err(Error::DegenerateCavity { .. }) => Ok(2),
        Err(e) => Err(e),
    }
}

/// Index of the spectrum maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Three-point parabolic refinement of the grid maximum position.
fn refined_peak(frequencies: &[f64], values: &[f64]) -> f64 {
    let i = argmax(values);
    if i == 0 || i == values.len() - 1 {
        return frequencies[i];
    }
    let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return frequencies[i];
    }
    let delta = 0.5 * (a - c) / denom;
    let step = frequencies[1] - frequencies[0];
    frequencies[i] + delta.clamp(-1.0, 1.0) * step
}

/// Groups above-floor peaks into clusters separated by gaps larger than half
/// the cluster spacing, and integrates each cluster's share of the spectrum.
pub fn detect_clusters(s: &SignalSpectrum, spec: &SourceSpec) -> Result<ClusterReport> {
    let n = s.values.len();
    if n < 3 {
        return Err(Error::Resolution {
            what: "cluster detection",
            points: n,
            required: 3,
        });
    }
    let width = s.frequencies[n - 1] - s.frequencies[0];
    let mid = 0.5 * (s.frequencies[0] + s.frequencies[n - 1]);
    // Gap threshold from the closed-form cluster spacing; group-velocity
    // matched models have no cluster structure and collapse to one cluster.
    let spacing = match cluster_spacing_estimate(
        spec,
        &PhasematchPoint::for_spec(spec, s.pump_frequency, mid, s.temperature)?,
    ) {
        Ok(d) => {
            if width < 3.0 * d * (1.0 - 1e-12) {
                return Err(Error::WindowTooNarrow {
                    what: "cluster detection",
                    width,
                    need: 3.0 * d,
                    unit: "Hz",
                });
            }
            Some(d)
        }
        Err(Error::GroupVelocityMatched) => None,
        Err(e) => return Err(e),
    };
    let gap_threshold = spacing.map_or(f64::INFINITY, |d| d / 2.0);

    // Local maxima at or above the floor; window edges count as peaks so a
    // spectrum that only rises toward the boundary still reports one.
    let mut peaks: Vec<usize> = Vec::new();
    for i in 0..n {
        let v = s.values[i];
        if v < PEAK_FLOOR {
            continue;
        }
        let left_ok = i == 0 || s.values[i - 1] < v;
        let right_ok = i == n - 1 || s.values[i + 1] <= v;
        if left_ok && right_ok {
            peaks.push(i);
        }
    }
    debug_assert!(!peaks.is_empty(), "normalized spectrum has a unit maximum");

    // Split the peak list at gaps wider than the threshold.
    let mut groups: Vec<Vec<usize>> = vec![vec![peaks[0]]];
    for pair in peaks.windows(2) {
        if s.frequencies[pair[1]] - s.frequencies[pair[0]] > gap_threshold {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(pair[1]);
    }

    // Integration regions: midpoints between adjacent groups, window edges
    // outside; the regions partition the window so weights sum to one.
    let mut boundaries = vec![0usize];
    for pair in groups.windows(2) {
        let last = *pair[0].last().unwrap();
        let first = pair[1][0];
        boundaries.push((last + first) / 2);
    }
    boundaries.push(n - 1);

    let trapezoid = |from: usize, to: usize| -> f64 {
        let mut acc = 0.0;
        for i in from..to {
            acc += 0.5
                * (s.values[i] + s.values[i + 1])
                * (s.frequencies[i + 1] - s.frequencies[i]);
        }
        acc
    };
    let total = trapezoid(0, n - 1);
    debug_assert!(total > 0.0);

    let mut clusters = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        let tallest = *group
            .iter()
            .max_by(|&&a, &&b| s.values[a].partial_cmp(&s.values[b]).unwrap())
            .unwrap();
        clusters.push(Cluster {
            center: s.frequencies[tallest],
            integrated_weight: trapezoid(boundaries[g], boundaries[g + 1]) / total,
            peak_count: group.len(),
        });
    }
    let central_cluster_index = clusters
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.integrated_weight.partial_cmp(&b.1.integrated_weight).unwrap())
        .unwrap()
        .0;
    let spacing_measured = if clusters.len() >= 2 {
        let diffs: Vec<f64> = clusters.windows(2).map(|p| p[1].center - p[0].center).collect();
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    } else {
        None
    };
    Ok(ClusterReport {
        central_fraction: clusters[central_cluster_index].integrated_weight,
        central_cluster_index,
        clusters,
        spacing_measured,
    })
}

/// Dominant-peak center per pump detuning (relative to `pump_frequency`),
/// with mode hops flagged at jumps of half a signal FSR or more.
pub fn pump_detuning_map(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    pump_detunings: &[f64],
    window: (f64, f64),
    points: usize,
) -> Result<TuningMap> {
    check_sorted(pump_detunings, "pump detunings")?;
    let centers: Result<Vec<f64>> = pump_detunings
        .par_iter()
        .map(|d| {
            let s = signal_spectrum(spec, pump_frequency + d, temperature, window, points)?;
            Ok(refined_peak(&s.frequencies, &s.values))
        })
        .collect();
    let centers = centers?;
    let mid = 0.5 * (window.0 + window.1);
    let fsr = free_spectral_range(spec, Polarization::Ordinary, mid, temperature)?;
    Ok(assemble_map(pump_detunings, centers, fsr))
}

/// Dominant-peak center per absolute temperature at a fixed pump.
pub fn temperature_map(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperatures: &[f64],
    window: (f64, f64),
    points: usize,
) -> Result<TuningMap> {
    check_sorted(temperatures, "temperatures")?;
    let centers: Result<Vec<f64>> = temperatures
        .par_iter()
        .map(|t| {
            let s = signal_spectrum(spec, pump_frequency, *t, window, points)?;
            Ok(refined_peak(&s.frequencies, &s.values))
        })
        .collect();
    let centers = centers?;
    let mid = 0.5 * (window.0 + window.1);
    let t_mid = temperatures[temperatures.len() / 2];
    let fsr = free_spectral_range(spec, Polarization::Ordinary, mid, t_mid)?;
    Ok(assemble_map(temperatures, centers, fsr))
}

fn check_sorted(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Resolution {
            what: "parameter sweep",
            points: 0,
            required: 1,
        });
    }
    if values.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Config(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

fn assemble_map(parameter_values: &[f64], centers: Vec<f64>, fsr: f64) -> TuningMap {
    let hop_indices: Vec<usize> = (1..centers.len())
        .filter(|&i| (centers[i] - centers[i - 1]).abs() >= fsr / 2.0)
        .collect();
    // Longest hop-free segment carries the drift slope.
    let mut cuts = vec![0usize];
    cuts.extend(&hop_indices);
    cuts.push(centers.len());
    let (mut seg_start, mut seg_len) = (0usize, 0usize);
    for pair in cuts.windows(2) {
        if pair[1] - pair[0] > seg_len {
            seg_start = pair[0];
            seg_len = pair[1] - pair[0];
        }
    }
    let drift_slope = if seg_len >= 2 {
        Some(least_squares_slope(
            &parameter_values[seg_start..seg_start + seg_len],
            &centers[seg_start..seg_start + seg_len],
        ))
    } else {
        None
    };
    TuningMap {
        parameter_values: parameter_values.to_vec(),
        dominant_centers: centers,
        hop_indices,
        drift_slope,
        fsr,
    }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Single-resonance dominance threshold for the stability windows.
const DOMINANCE_THRESHOLD: f64 = 0.9;
/// Spectrum window halfwidth around the setpoint line, in signal FSRs.
const STABILITY_SPAN_FSRS: f64 = 2.5;
const STABILITY_POINTS: usize = 8192;
const PUMP_SCAN_STEP: f64 = 10e6; // Hz
const PUMP_SCAN_MAX: f64 = 3e9;
const PUMP_BISECT_TOL: f64 = 0.5e6;
const TEMP_SCAN_STEP: f64 = 1e-3; // K
const TEMP_SCAN_MAX: f64 = 0.2;
const TEMP_BISECT_TOL: f64 = 2e-5;

/// Fraction of the windowed spectrum carried by the dominant resonance: grid
/// weight is assigned to the nearest comb line (Voronoi split) and the
/// heaviest line's share is returned.
fn dominant_line_fraction(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    window: (f64, f64),
) -> Result<f64> {
    let s = signal_spectrum(spec, pump_frequency, temperature, window, STABILITY_POINTS)?;
    let comb = find_resonances(spec, Polarization::Ordinary, window, temperature)?;
    let mut weights = vec![0.0f64; comb.centers.len()];
    let mut total = 0.0;
    for (nu, v) in s.frequencies.iter().zip(&s.values) {
        weights[comb.nearest_index(*nu)] += v;
        total += v;
    }
    let heaviest = weights.iter().cloned().fold(0.0f64, f64::max);
    Ok(heaviest / total)
}

/// First offsets (up, down) at which the dominance fraction crosses below the
/// threshold: outward scan to bracket the first crossing, then bisection.
/// The fraction is not monotonic in the offset, so the scan must walk out
/// from zero rather than bisect the full range.
fn first_crossing(
    mut fraction_at: impl FnMut(f64) -> Result<f64>,
    step: f64,
    max_offset: f64,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let mut result = [0.0f64; 2];
    for (slot, sign) in [(0usize, 1.0f64), (1usize, -1.0f64)] {
        let mut prev = 0.0f64;
        let mut found = None;
        let mut k = 1usize;
        loop {
            let offset = sign * step * k as f64;
            if offset.abs() > max_offset {
                break;
            }
            if fraction_at(offset)? < DOMINANCE_THRESHOLD {
                found = Some((prev, offset));
                break;
            }
            prev = offset;
            k += 1;
        }
        let (mut inside, mut outside) = found.ok_or(Error::NoConvergence {
            what: "stability scan",
            iterations: (max_offset / step) as usize,
            seed: sign * max_offset,
        })?;
        while (outside - inside).abs() > tolerance {
            let mid = 0.5 * (inside + outside);
            if fraction_at(mid)? < DOMINANCE_THRESHOLD {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        result[slot] = 0.5 * (inside + outside);
    }
    Ok((result[0].abs(), result[1].abs()))
}

/// Stability halfwidths around a doubly resonant setpoint: the pump detuning
/// and the temperature offset at which the dominant resonance first drops
/// below 90% of the emitted weight; halfwidth = min(|up|, |down|).
pub fn stability_windows(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
) -> Result<StabilityReport> {
    let (window, _) = stability_window_grid(spec, pump_frequency, temperature)?;
    let at_setpoint = dominant_line_fraction(spec, pump_frequency, temperature, window)?;
    if at_setpoint < DOMINANCE_THRESHOLD {
        return Err(Error::UnstableSetpoint {
            why: format!(
                "dominant-resonance weight {at_setpoint:.3} below {DOMINANCE_THRESHOLD} at the setpoint"
            ),
        });
    }

    let (pump_up, pump_down) = first_crossing(
        |d| dominant_line_fraction(spec, pump_frequency + d, temperature, window),
        PUMP_SCAN_STEP,
        PUMP_SCAN_MAX,
        PUMP_BISECT_TOL,
    )?;
    let (temp_up, temp_down) = first_crossing(
        |d| dominant_line_fraction(spec, pump_frequency, temperature + d, window),
        TEMP_SCAN_STEP,
        TEMP_SCAN_MAX,
        TEMP_BISECT_TOL,
    )?;

    Ok(StabilityReport {
        pump: StabilityWindow {
            parameter: StabilityParameter::PumpFrequency,
            halfwidth: pump_up.min(pump_down),
            setpoint: pump_frequency,
        },
        temperature: StabilityWindow {
            parameter: StabilityParameter::Temperature,
            halfwidth: temp_up.min(temp_down),
            setpoint: temperature,
        },
    })
}

/// Fixed evaluation window for the stability fractions: the setpoint's
/// dominant signal line plus STABILITY_SPAN_FSRS on each side.
fn stability_window_grid(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
) -> Result<((f64, f64), f64)> {
    let nu_pm = crate::phasematch::phasematched_signal(spec, pump_frequency, temperature, None)?;
    let fsr = free_spectral_range(spec, Polarization::Ordinary, nu_pm, temperature)?;
    let comb = find_resonances(
        spec,
        Polarization::Ordinary,
        (nu_pm - 3.0 * fsr, nu_pm + 3.0 * fsr),
        temperature,
    )?;
    // Dominant line = comb center with the largest spectral value.
    let mut best = (comb.centers[0], f64::NEG_INFINITY);
    for &c in &comb.centers {
        let point = PhasematchPoint::for_spec(spec, pump_frequency, c, temperature)?;
        let envelope = pm_amplitude(spec, &point)?;
        let a_s = airy_amplitude(spec, Polarization::Ordinary, c, temperature)?;
        let a_i = airy_amplitude(
            spec,
            Polarization::Extraordinary,
            pump_frequency - c,
            temperature,
        )?;
        let v = envelope * envelope * a_s.norm_sqr() * a_i.norm_sqr();
        if v > best.1 {
            best = (c, v);
        }
    }
    let center = best.0;
    Ok((
        (
            center - STABILITY_SPAN_FSRS * fsr,
            center + STABILITY_SPAN_FSRS * fsr,
        ),
        center,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::MirrorPair;
    use crate::dispersion::{DispersionModel, ThermalModel, SPEED_OF_LIGHT};
    use crate::operating_point::OperatingPoint;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const T_OP: f64 = 148.14;
    /// Frozen demonstrator cluster spacing.
    const CLUSTER_SPACING: f64 = 90.70553e9;

    fn demo_spec() -> SourceSpec {
        SourceSpec {
            length_l0: 12.3e-3,
            poling_period: 4.543485772824805e-6,
            mirrors_signal: MirrorPair { r1: 0.99, r2: 0.98 },
            mirrors_idler: MirrorPair { r1: 0.99, r2: 0.98 },
            loss_signal_db_per_cm: 0.016,
            loss_idler_db_per_cm: 0.022,
            reference_temperature: T_OP,
            dispersion: DispersionModel::default_model().unwrap(),
            thermal: ThermalModel::new(1.5e-5, T_OP),
        }
    }

    fn demo_setpoint() -> (SourceSpec, OperatingPoint) {
        let spec = demo_spec();
        let op = OperatingPoint::anchor(&spec, SPEED_OF_LIGHT / 532e-9, T_OP).unwrap();
        (spec, op)
    }

    /// Cluster spacing evaluated exactly as detect_clusters re-derives it,
    /// so +-1.5x windows meet the three-spacing precondition.
    fn live_spacing(spec: &SourceSpec, op: &OperatingPoint) -> f64 {
        cluster_spacing_estimate(
            spec,
            &PhasematchPoint::for_spec(spec, op.pump_frequency, op.signal_center, T_OP).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bare_envelope_without_mirrors() {
        // No mirrors, no loss: the spectrum is the sinc^2 envelope alone.
        let mut spec = demo_spec();
        spec.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        spec.mirrors_idler = MirrorPair { r1: 0.0, r2: 0.0 };
        spec.loss_signal_db_per_cm = 0.0;
        spec.loss_idler_db_per_cm = 0.0;
        let nu_p = SPEED_OF_LIGHT / 532e-9;
        let nu_s = crate::phasematch::phasematched_signal(&spec, nu_p, T_OP, None).unwrap();
        let window = (nu_s - 50e9, nu_s + 50e9);
        let s = signal_spectrum(&spec, nu_p, T_OP, window, 4097).unwrap();
        let mut max_env = 0.0f64;
        let mut envs = Vec::with_capacity(s.frequencies.len());
        for nu in &s.frequencies {
            let point = PhasematchPoint::for_spec(&spec, nu_p, *nu, T_OP).unwrap();
            let e = pm_amplitude(&spec, &point).unwrap().powi(2);
            envs.push(e);
            max_env = max_env.max(e);
        }
        for (v, e) in s.values.iter().zip(&envs) {
            assert_abs_diff_eq!(*v, e / max_env, epsilon = 1e-12);
        }
    }

    #[test]
    fn demonstrator_cluster_report() {
        let (spec, op) = demo_setpoint();
        let spacing_live = live_spacing(&spec, &op);
        assert_relative_eq!(spacing_live, CLUSTER_SPACING, max_relative = 1e-5);
        let window = (
            op.signal_center - 1.5 * spacing_live,
            op.signal_center + 1.5 * spacing_live,
        );
        let s = signal_spectrum(&spec, op.pump_frequency, T_OP, window, 262_144).unwrap();
        assert!(s.values.iter().all(|v| *v >= 0.0));
        assert_eq!(s.values.iter().cloned().fold(0.0f64, f64::max), 1.0);

        let report = detect_clusters(&s, &spec).unwrap();
        assert_eq!(report.clusters.len(), 3);
        let wsum: f64 = report.clusters.iter().map(|c| c.integrated_weight).sum();
        assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-9);
        // Frozen central fraction for the demonstrator at its setpoint.
        assert_abs_diff_eq!(report.central_fraction, 0.900728, epsilon = 3e-4);
        assert_eq!(report.central_cluster_index, 1);
        let spacing = report.spacing_measured.unwrap();
        assert_relative_eq!(spacing, CLUSTER_SPACING, max_relative = 0.10);
        // Side clusters sit near +-(cluster spacing) from the central one.
        let central = report.clusters[1].center;
        assert_relative_eq!(
            central - report.clusters[0].center,
            CLUSTER_SPACING,
            max_relative = 0.10
        );
        assert_relative_eq!(
            report.clusters[2].center - central,
            CLUSTER_SPACING,
            max_relative = 0.10
        );
        assert_abs_diff_eq!(central, op.signal_center, epsilon = 50e6);
    }

    #[test]
    fn isolated_peak_is_one_cluster() {
        // Group-velocity matched toy: no cluster structure, a single Airy
        // peak in a small window is one cluster holding all the weight.
        let spec = SourceSpec {
            length_l0: 5e-3,
            poling_period: 6.8e-6,
            mirrors_signal: MirrorPair { r1: 0.9, r2: 0.9 },
            mirrors_idler: MirrorPair { r1: 0.0, r2: 0.0 },
            loss_signal_db_per_cm: 0.0,
            loss_idler_db_per_cm: 0.0,
            reference_temperature: 50.0,
            dispersion: DispersionModel::constant(2.2, 2.2),
            thermal: ThermalModel::new(1.5e-5, 50.0),
        };
        let fsr = SPEED_OF_LIGHT / (2.0 * 2.2 * 5e-3);
        let center = (340e12 / fsr).round() * fsr;
        let window = (center - 2e9, center + 2e9);
        let s = signal_spectrum(&spec, 560e12, 50.0, window, 512).unwrap();
        let report = detect_clusters(&s, &spec).unwrap();
        assert_eq!(report.clusters.len(), 1);
        assert_abs_diff_eq!(report.central_fraction, 1.0, epsilon = 1e-12);
        assert!(report.spacing_measured.is_none());
        assert_eq!(report.clusters[0].peak_count, 1);
    }

    #[test]
    fn narrow_window_is_rejected_for_clustering() {
        let (spec, op) = demo_setpoint();
        let window = (
            op.signal_center - 1.0 * CLUSTER_SPACING,
            op.signal_center + 1.0 * CLUSTER_SPACING,
        );
        let s = signal_spectrum(&spec, op.pump_frequency, T_OP, window, 180_000).unwrap();
        assert!(matches!(
            detect_clusters(&s, &spec),
            Err(Error::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn resolution_guard_names_required_points() {
        let (spec, op) = demo_setpoint();
        let window = (op.signal_center - 10e9, op.signal_center + 10e9);
        match signal_spectrum(&spec, op.pump_frequency, T_OP, window, 100) {
            Err(Error::Resolution { points, required, .. }) => {
                assert_eq!(points, 100);
                // 20 GHz at 8 samples per 32.7 MHz linewidth.
                assert!((4500..=5500).contains(&required), "required = {required}");
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn removing_idler_cavity_populates_every_comb_line() {
        let (full, op) = demo_setpoint();
        let mut spec = full.clone();
        spec.mirrors_idler = MirrorPair { r1: 0.0, r2: 0.0 };
        let spacing_live = live_spacing(&spec, &op);
        let window = (
            op.signal_center - 1.5 * spacing_live,
            op.signal_center + 1.5 * spacing_live,
        );
        let s = signal_spectrum(&spec, op.pump_frequency, T_OP, window, 262_144).unwrap();
        let report = detect_clusters(&s, &spec).unwrap();
        let total_peaks: usize = report.clusters.iter().map(|c| c.peak_count).sum();
        let comb = find_resonances(&spec, Polarization::Ordinary, window, T_OP).unwrap();
        assert_eq!(total_peaks, comb.centers.len());
        // Without the idler comb there is no cluster structure left.
        assert_eq!(report.clusters.len(), 1);
    }

    #[test]
    fn dominant_center_stable_under_grid_refinement() {
        let (spec, op) = demo_setpoint();
        let fsr = free_spectral_range(&spec, Polarization::Ordinary, op.signal_center, T_OP)
            .unwrap();
        let window = (op.signal_center - 2.0 * fsr, op.signal_center + 2.0 * fsr);
        let coarse = signal_spectrum(&spec, op.pump_frequency, T_OP, window, 8192).unwrap();
        let fine = signal_spectrum(&spec, op.pump_frequency, T_OP, window, 16384).unwrap();
        let c1 = refined_peak(&coarse.frequencies, &coarse.values);
        let c2 = refined_peak(&fine.frequencies, &fine.values);
        let lw = resonance_linewidth(&spec, Polarization::Ordinary, op.signal_center, T_OP)
            .unwrap();
        assert!((c1 - c2).abs() < lw / 10.0, "shift {:.3e} Hz", (c1 - c2).abs());
        assert_abs_diff_eq!(c1, op.signal_center, epsilon = lw / 4.0);
    }

    #[test]
    fn pump_map_finds_first_hop_location() {
        let (spec, op) = demo_setpoint();
        let fsr = free_spectral_range(&spec, Polarization::Ordinary, op.signal_center, T_OP)
            .unwrap();
        let window = (op.signal_center - 2.5 * fsr, op.signal_center + 2.5 * fsr);
        let detunings: Vec<f64> = (-30..=30).map(|k| k as f64 * 10e6).collect();
        let map = pump_detuning_map(&spec, op.pump_frequency, T_OP, &detunings, window, 8192)
            .unwrap();
        // Zero detuning reproduces the setpoint resonance.
        let at_zero = map.dominant_centers[30];
        assert_abs_diff_eq!(at_zero, op.signal_center, epsilon = 10e6);
        // First hops on both sides near the frozen location, 160 MHz.
        let up_hop = map
            .hop_indices
            .iter()
            .map(|&i| detunings[i])
            .find(|d| *d > 0.0)
            .unwrap();
        let down_hop = map
            .hop_indices
            .iter()
            .map(|&i| detunings[i - 1])
            .filter(|d| *d < 0.0)
            .next_back()
            .unwrap();
        assert_abs_diff_eq!(up_hop, 160e6, epsilon = 10e6 + 1.0);
        assert_abs_diff_eq!(down_hop, -160e6, epsilon = 10e6 + 1.0);

        // Halving the step moves the detected hop by at most one coarse step.
        let fine: Vec<f64> = (0..=60).map(|k| k as f64 * 5e6).collect();
        let fine_map =
            pump_detuning_map(&spec, op.pump_frequency, T_OP, &fine, window, 8192).unwrap();
        let fine_up = fine_map.hop_indices.iter().map(|&i| fine[i]).next().unwrap();
        assert!((fine_up - up_hop).abs() <= 10e6 + 1.0);
    }

    #[test]
    fn temperature_map_drifts_between_hops() {
        let (spec, op) = demo_setpoint();
        let fsr = free_spectral_range(&spec, Polarization::Ordinary, op.signal_center, T_OP)
            .unwrap();
        let window = (op.signal_center - 2.5 * fsr, op.signal_center + 2.5 * fsr);
        let temps: Vec<f64> = (-8..=8).map(|k| T_OP + k as f64 * 1e-3).collect();
        let map = temperature_map(&spec, op.pump_frequency, &temps, window, 8192).unwrap();
        assert!(map.hop_indices.is_empty(), "hops at {:?}", map.hop_indices);
        let slope = map.drift_slope.unwrap();
        // The dominant line rides its comb line, which the thermo-optic
        // response pushes to lower frequencies at a few GHz per kelvin.
        assert!(slope < 0.0, "slope = {slope:.3e}");
        assert!((1e9..20e9).contains(&slope.abs()), "slope = {slope:.3e}");
        let at_setpoint = map.dominant_centers[8];
        assert_abs_diff_eq!(at_setpoint, op.signal_center, epsilon = 10e6);
    }

    #[test]
    fn demonstrator_stability_windows() {
        let (spec, op) = demo_setpoint();
        let report = stability_windows(&spec, op.pump_frequency, T_OP).unwrap();
        assert_eq!(report.pump.parameter, StabilityParameter::PumpFrequency);
        assert_eq!(report.temperature.parameter, StabilityParameter::Temperature);
        // Frozen: dominance holds to ~55 MHz of pump detuning and ~3.5 mK.
        assert_abs_diff_eq!(report.pump.halfwidth, 54.5e6, epsilon = 3e6);
        assert_abs_diff_eq!(report.temperature.halfwidth, 3.5e-3, epsilon = 0.7e-3);
        assert!(report.pump.halfwidth > 0.0 && report.temperature.halfwidth > 0.0);
    }

    #[test]
    fn detuned_setpoint_is_rejected() {
        let (spec, op) = demo_setpoint();
        let fsr_i = free_spectral_range(&spec, Polarization::Extraordinary, op.idler_center, T_OP)
            .unwrap();
        // Half an idler FSR away no single pair dominates.
        let err = stability_windows(&spec, op.pump_frequency + fsr_i / 2.0, T_OP).unwrap_err();
        assert!(matches!(err, Error::UnstableSetpoint { .. }));
    }

    #[test]
    fn symmetric_toy_has_symmetric_stability() {
        // Constant indices keep the comb vernier but remove dispersion, so
        // the dominance loss is symmetric in both scan directions.
        let spec = SourceSpec {
            length_l0: 5e-3,
            poling_period: SPEED_OF_LIGHT / (0.2 * 220e12),
            mirrors_signal: MirrorPair { r1: 0.97, r2: 0.97 },
            mirrors_idler: MirrorPair { r1: 0.97, r2: 0.97 },
            loss_signal_db_per_cm: 0.02,
            loss_idler_db_per_cm: 0.02,
            reference_temperature: 50.0,
            dispersion: DispersionModel::constant(2.2, 2.0),
            thermal: ThermalModel::new(1.5e-5, 50.0),
        };
        let op = OperatingPoint::anchor(&spec, 560e12, 50.0).unwrap();
        let (window, _) = stability_window_grid(&spec, op.pump_frequency, 50.0).unwrap();
        let (t_up, t_down) = first_crossing(
            |d| dominant_line_fraction(&spec, op.pump_frequency, 50.0 + d, window),
            TEMP_SCAN_STEP,
            TEMP_SCAN_MAX,
            TEMP_BISECT_TOL,
        )
        .unwrap();
        assert_relative_eq!(t_up, t_down, max_relative = 0.05);
        let (p_up, p_down) = first_crossing(
            |d| dominant_line_fraction(&spec, op.pump_frequency + d, 50.0, window),
            PUMP_SCAN_STEP,
            PUMP_SCAN_MAX,
            PUMP_BISECT_TOL,
        )
        .unwrap();
        assert_relative_eq!(p_up, p_down, max_relative = 0.05);
    }
}
