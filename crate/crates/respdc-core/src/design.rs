//! Parameter maps over waveguide length and output-coupler reflectivity, and
//! a design search that proposes a source configuration for a target quantum
//! memory: poling period from phasematching, (length, reflectivity) from the
//! bandwidth map, pump bandwidth from the spectral-purity crossover.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brightness::{enhancement_factor, escape_probability, BrightnessReport};
use crate::cavity::{resonance_linewidth, MirrorPair, SourceSpec};
use crate::dispersion::{
    refractive_index, DispersionModel, Polarization, ThermalModel, SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};
use crate::jsa::{
    purity_report_at, purity_vs_pump_bandwidth, streamed_dominant_pair, PumpSpec, PurityReport,
};
use crate::operating_point::OperatingPoint;
use crate::phasematch::{cluster_spacing_estimate, solve_poling_period, PhasematchPoint};
use crate::spectrum::{stability_windows, StabilityReport};

/// Operating and phasematching temperature for proposed designs, degC.
pub const DESIGN_TEMPERATURE: f64 = 148.14;
/// Input couplers are fixed; only the shared exit coupler is searched.
const INPUT_REFLECTIVITY: f64 = 0.99;
const LOSS_SIGNAL_DB_PER_CM: f64 = 0.016;
const LOSS_IDLER_DB_PER_CM: f64 = 0.022;
const EXPANSION_COEFFICIENT: f64 = 1.5e-5;
/// Memory-photon linewidth must land within this fraction of the target.
const BANDWIDTH_TOLERANCE: f64 = 0.20;
/// Search grid for the waveguide length, m.
const SEARCH_LENGTHS: [f64; 14] = [
    2.0e-3, 2.5e-3, 3.0e-3, 3.5e-3, 4.0e-3, 5.0e-3, 7.0e-3, 10.0e-3, 14.0e-3, 20.0e-3, 28.0e-3,
    40.0e-3, 56.0e-3, 80.0e-3,
];
/// Search grid for the shared exit-coupler reflectivity.
const SEARCH_REFLECTIVITIES: [f64; 13] = [
    0.70, 0.75, 0.80, 0.85, 0.88, 0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99,
];
/// Pump-bandwidth ladder in units of the larger resonance linewidth.
const SIGMA_LADDER: [f64; 10] = [1.0, 1.25, 1.6, 2.0, 2.5, 3.2, 4.0, 5.0, 6.3, 8.0];
/// Acceptable target bandwidths, Hz.
const BANDWIDTH_RANGE: (f64, f64) = (1.0e6, 5.0e9);
const DEFAULT_PUMP_WAVELENGTH: f64 = 532e-9;

/// A scalar property evaluated over a (length, reflectivity) grid; `values`
/// is row-major with one row per length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignMap {
    /// Waveguide lengths at the reference temperature, m.
    pub lengths: Vec<f64>,
    /// Signal exit-coupler reflectivities.
    pub reflectivities: Vec<f64>,
    pub values: Vec<f64>,
}

impl DesignMap {
    pub fn get(&self, length_index: usize, reflectivity_index: usize) -> f64 {
        self.values[length_index * self.reflectivities.len() + reflectivity_index]
    }
}

/// Evenly spaced axis helper for building map grids from a range.
pub fn linear_axis(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(hi > lo) {
        return Err(Error::Config(
            "a linear axis needs at least two steps and an increasing range".into(),
        ));
    }
    let step = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k == steps - 1 { hi } else { lo + step * k as f64 })
        .collect())
}

fn check_axes(lengths: &[f64], reflectivities: &[f64]) -> Result<()> {
    if lengths.is_empty() || reflectivities.is_empty() {
        return Err(Error::Config("map axes must be non-empty".into()));
    }
    Ok(())
}

/// Cell spec for the maps: the length and the signal exit coupler move, every
/// other parameter stays at its base value.
fn map_cell_spec(base: &SourceSpec, length: f64, reflectivity: f64) -> Result<SourceSpec> {
    let mut spec = base.clone();
    spec.length_l0 = length;
    spec.mirrors_signal = MirrorPair::new(base.mirrors_signal.r1, reflectivity)?;
    spec.validate()?;
    Ok(spec)
}

/// Signal resonance linewidth over the (length, reflectivity) grid, evaluated
/// at the given signal frequency.
pub fn bandwidth_map(
    base: &SourceSpec,
    signal_frequency: f64,
    temperature: f64,
    lengths: &[f64],
    reflectivities: &[f64],
) -> Result<DesignMap> {
    check_axes(lengths, reflectivities)?;
    let cells: Vec<(usize, usize)> = (0..lengths.len())
        .flat_map(|i| (0..reflectivities.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let spec = map_cell_spec(base, lengths[i], reflectivities[j])?;
            resonance_linewidth(&spec, Polarization::Ordinary, signal_frequency, temperature)
        })
        .collect::<Result<_>>()?;
    Ok(DesignMap {
        lengths: lengths.to_vec(),
        reflectivities: reflectivities.to_vec(),
        values,
    })
}

/// Mode-excitation probability of one map cell: anchored dominant-pair weight
/// fraction with the default cluster filter (the pair window is clamped to
/// one cluster spacing around the anchored idler line; a window already
/// narrower than a cluster is unaffected).
fn cell_mode_excitation(spec: &SourceSpec, pump: &PumpSpec, temperature: f64) -> Result<f64> {
    let op = OperatingPoint::anchor(spec, pump.central_frequency, temperature)?;
    let point =
        PhasematchPoint::for_spec(spec, op.pump_frequency, op.signal_center, temperature)?;
    let cap = match cluster_spacing_estimate(spec, &point) {
        Ok(spacing) => Some(spacing / 2.0),
        Err(Error::GroupVelocityMatched) => None,
        Err(e) => return Err(e),
    };
    Ok(streamed_dominant_pair(spec, pump, temperature, cap)?.mode_excitation)
}

/// Mode-excitation probability over the (length, reflectivity) grid under the
/// given pump, each cell anchored at its own operating point.
pub fn purity_map(
    base: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
    lengths: &[f64],
    reflectivities: &[f64],
) -> Result<DesignMap> {
    check_axes(lengths, reflectivities)?;
    pump.validate()?;
    let cells: Vec<(usize, usize)> = (0..lengths.len())
        .flat_map(|i| (0..reflectivities.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let spec = map_cell_spec(base, lengths[i], reflectivities[j])?;
            cell_mode_excitation(&spec, pump, temperature)
        })
        .collect::<Result<_>>()?;
    Ok(DesignMap {
        lengths: lengths.to_vec(),
        reflectivities: reflectivities.to_vec(),
        values,
    })
}

/// A quantum-memory transition the source should feed: the wavelength of the
/// photon sent to the memory, the linewidth it should have, and the purity
/// floor for the heralded partner.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MemoryTarget {
    /// Wavelength of the memory-coupled photon, m.
    pub signal_wavelength: f64,
    /// Desired memory-photon linewidth (FWHM), Hz.
    pub desired_bandwidth: f64,
    /// Required total purity of the heralded single photon.
    pub minimum_total_purity: f64,
    /// Pump wavelength, m.
    #[serde(default = "default_pump_wavelength")]
    pub pump_wavelength: f64,
}

fn default_pump_wavelength() -> f64 {
    DEFAULT_PUMP_WAVELENGTH
}

impl MemoryTarget {
    pub fn new(
        signal_wavelength: f64,
        desired_bandwidth: f64,
        minimum_total_purity: f64,
    ) -> Self {
        MemoryTarget {
            signal_wavelength,
            desired_bandwidth,
            minimum_total_purity,
            pump_wavelength: DEFAULT_PUMP_WAVELENGTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.desired_bandwidth >= BANDWIDTH_RANGE.0
            && self.desired_bandwidth <= BANDWIDTH_RANGE.1)
        {
            return Err(Error::OutOfRange {
                quantity: "desired bandwidth",
                value: self.desired_bandwidth,
                min: BANDWIDTH_RANGE.0,
                max: BANDWIDTH_RANGE.1,
                unit: "Hz",
            });
        }
        if !(self.minimum_total_purity >= 0.0 && self.minimum_total_purity <= 1.0) {
            return Err(Error::OutOfRange {
                quantity: "minimum total purity",
                value: self.minimum_total_purity,
                min: 0.0,
                max: 1.0,
                unit: "",
            });
        }
        if !(self.signal_wavelength > self.pump_wavelength) {
            return Err(Error::OutOfRange {
                quantity: "memory wavelength",
                value: self.signal_wavelength,
                min: self.pump_wavelength,
                max: f64::INFINITY,
                unit: "m",
            });
        }
        Ok(())
    }
}

/// Pins for the design search; a pinned axis is taken as given instead of
/// searched, so a fully pinned call evaluates exactly one configuration.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct DesignOverrides {
    /// Waveguide length at the reference temperature, m.
    pub length: Option<f64>,
    /// Shared exit-coupler reflectivity.
    pub exit_reflectivity: Option<f64>,
    /// Pump bandwidth (FWHM), Hz.
    pub pump_bandwidth: Option<f64>,
}

/// Predicted performance of a proposed design at its operating point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignPrediction {
    pub purity: PurityReport,
    /// Signal (higher-frequency photon) resonance linewidth, Hz.
    pub signal_linewidth: f64,
    /// Idler resonance linewidth, Hz.
    pub idler_linewidth: f64,
    /// Linewidth of whichever photon feeds the memory, Hz.
    pub memory_linewidth: f64,
    /// Absent when the setpoint misses the dominance threshold, i.e. the
    /// proposed device has no single-line stability window to report.
    pub stability: Option<StabilityReport>,
    pub brightness: BrightnessReport,
}

/// A proposed source configuration with its predicted performance. A result
/// that misses a constraint is returned with `feasible` false and the binding
/// constraint named, never silently degraded.
#[derive(Clone, Debug)]
pub struct DesignResult {
    pub source: SourceSpec,
    pub pump: PumpSpec,
    pub poling_period: f64,
    pub operating: OperatingPoint,
    /// Signal (higher-frequency, Ordinary) photon wavelength, m.
    pub signal_wavelength: f64,
    /// Idler (Extraordinary) photon wavelength, m.
    pub idler_wavelength: f64,
    /// False when the memory couples to the idler and the roles are swapped.
    pub memory_is_signal: bool,
    pub feasible: bool,
    pub binding_constraint: Option<&'static str>,
    pub binding_detail: Option<String>,
    /// Conventions baked into the proposal.
    pub assumptions: Vec<String>,
    pub predicted: DesignPrediction,
}

fn platform_spec(length: f64, exit_reflectivity: f64, poling_period: f64) -> Result<SourceSpec> {
    let mirrors = MirrorPair::new(INPUT_REFLECTIVITY, exit_reflectivity)?;
    let spec = SourceSpec {
        length_l0: length,
        poling_period,
        mirrors_signal: mirrors,
        mirrors_idler: mirrors,
        loss_signal_db_per_cm: LOSS_SIGNAL_DB_PER_CM,
        loss_idler_db_per_cm: LOSS_IDLER_DB_PER_CM,
        reference_temperature: DESIGN_TEMPERATURE,
        dispersion: DispersionModel::default_model()?,
        thermal: ThermalModel::new(EXPANSION_COEFFICIENT, DESIGN_TEMPERATURE),
    };
    spec.validate()?;
    Ok(spec)
}

/// Memory-photon linewidth of one candidate (length, reflectivity) cell.
fn candidate_linewidth(
    period: f64,
    length: f64,
    reflectivity: f64,
    memory_pol: Polarization,
    memory_frequency: f64,
) -> Result<f64> {
    let spec = platform_spec(length, reflectivity, period)?;
    resonance_linewidth(&spec, memory_pol, memory_frequency, DESIGN_TEMPERATURE)
}

/// Bisection on a monotone-decreasing linewidth along one search axis.
fn bisect_axis<F>(mut lo: f64, mut hi: f64, desired: f64, mut linewidth_at: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if linewidth_at(mid)? > desired {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-12 * hi.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Design a source for a memory target, searching length and reflectivity.
pub fn design_for_memory(target: &MemoryTarget) -> Result<DesignResult> {
    design_with_overrides(target, &DesignOverrides::default())
}

/// Design a source for a memory target with some axes pinned.
///
/// Steps: (1) the poling period phasematches the target pair at the design
/// temperature; (2) the (length, exit-reflectivity) grid is filtered to cells
/// whose memory-photon linewidth lands within 20% of the request (with a
/// bisection refinement along the free axis when no grid cell qualifies) and
/// the cell with the largest mode-excitation probability wins, escape
/// probability breaking ties; (3) the pump bandwidth is the smallest ladder
/// entry whose spectral purity reaches the even split of the purity floor;
/// (4) the full prediction is evaluated at the anchored operating point.
pub fn design_with_overrides(
    target: &MemoryTarget,
    overrides: &DesignOverrides,
) -> Result<DesignResult> {
    target.validate()?;
    let nu_pump = SPEED_OF_LIGHT / target.pump_wavelength;
    let nu_memory = SPEED_OF_LIGHT / target.signal_wavelength;
    // The memory photon is the signal when it is the higher-frequency
    // (Ordinary) photon; otherwise the roles are swapped by relabeling and
    // the pipeline's signal is the partner.
    let memory_is_signal = nu_memory > nu_pump / 2.0;
    let (nu_signal, memory_pol) = if memory_is_signal {
        (nu_memory, Polarization::Ordinary)
    } else {
        (nu_pump - nu_memory, Polarization::Extraordinary)
    };
    let lambda_signal = SPEED_OF_LIGHT / nu_signal;

    // Step 1: poling period at the design temperature. The bootstrap spec
    // only supplies the material models; its own period is irrelevant.
    let bootstrap = platform_spec(10.0e-3, 0.90, 5.0e-6)?;
    for (pol, nu) in [
        (Polarization::Ordinary, nu_pump),
        (Polarization::Ordinary, nu_signal),
        (Polarization::Extraordinary, nu_pump - nu_signal),
    ] {
        refractive_index(
            &bootstrap.dispersion,
            pol,
            SPEED_OF_LIGHT / nu,
            DESIGN_TEMPERATURE,
        )?;
    }
    let period = solve_poling_period(
        &bootstrap,
        target.pump_wavelength,
        lambda_signal,
        DESIGN_TEMPERATURE,
    )?;

    // Step 2: candidate cells within the bandwidth tolerance.
    let lengths: Vec<f64> = match overrides.length {
        Some(l) => vec![l],
        None => SEARCH_LENGTHS.to_vec(),
    };
    let reflectivities: Vec<f64> = match overrides.exit_reflectivity {
        Some(r) => vec![r],
        None => SEARCH_REFLECTIVITIES.to_vec(),
    };
    let desired = target.desired_bandwidth;
    let fully_pinned = overrides.length.is_some() && overrides.exit_reflectivity.is_some();
    let mut grid = Vec::with_capacity(lengths.len() * reflectivities.len());
    for &l in &lengths {
        for &r in &reflectivities {
            let lw = candidate_linewidth(period, l, r, memory_pol, nu_memory)?;
            grid.push((l, r, lw));
        }
    }
    let mut candidates: Vec<(f64, f64)> = if fully_pinned {
        vec![(lengths[0], reflectivities[0])]
    } else {
        grid.iter()
            .filter(|&&(_, _, lw)| (lw - desired).abs() <= BANDWIDTH_TOLERANCE * desired)
            .map(|&(l, r, _)| (l, r))
            .collect()
    };
    if candidates.is_empty() {
        // Refine along the free axis: the linewidth decreases monotonically
        // in both length and reflectivity, so a sign change over the grid
        // range brackets an exact hit.
        if overrides.length.is_none() {
            for &r in &reflectivities {
                let widest =
                    candidate_linewidth(period, SEARCH_LENGTHS[0], r, memory_pol, nu_memory)?;
                let narrowest = candidate_linewidth(
                    period,
                    SEARCH_LENGTHS[SEARCH_LENGTHS.len() - 1],
                    r,
                    memory_pol,
                    nu_memory,
                )?;
                if desired <= widest && desired >= narrowest {
                    let l = bisect_axis(
                        SEARCH_LENGTHS[0],
                        SEARCH_LENGTHS[SEARCH_LENGTHS.len() - 1],
                        desired,
                        |mid| candidate_linewidth(period, mid, r, memory_pol, nu_memory),
                    )?;
                    candidates.push((l, r));
                }
            }
        } else if overrides.exit_reflectivity.is_none() {
            let l = lengths[0];
            let lo_r = SEARCH_REFLECTIVITIES[0];
            let hi_r = SEARCH_REFLECTIVITIES[SEARCH_REFLECTIVITIES.len() - 1];
            let widest = candidate_linewidth(period, l, lo_r, memory_pol, nu_memory)?;
            let narrowest = candidate_linewidth(period, l, hi_r, memory_pol, nu_memory)?;
            if desired <= widest && desired >= narrowest {
                let r = bisect_axis(lo_r, hi_r, desired, |mid| {
                    candidate_linewidth(period, l, mid, memory_pol, nu_memory)
                })?;
                candidates.push((lengths[0], r));
            }
        }
    }
    if candidates.is_empty() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(_, _, lw) in &grid {
            lo = lo.min(lw);
            hi = hi.max(lw);
        }
        return Err(Error::Infeasible {
            binding: "desired_bandwidth",
            detail: format!(
                "achievable memory-photon linewidths span {:.6e} to {:.6e} Hz, \
                 target is {:.6e} Hz",
                lo, hi, desired
            ),
        });
    }

    // Rank candidates by mode excitation at a reference pump bandwidth
    // (pinned bandwidth if given, else twice the target linewidth, the
    // spectral-purity crossover scale).
    let (best_l, best_r) = if candidates.len() == 1 {
        candidates[0]
    } else {
        let sigma_ref = overrides.pump_bandwidth.unwrap_or(2.0 * desired);
        let ranking_pump = PumpSpec::gaussian(nu_pump, sigma_ref)?;
        let mut best = None;
        for &(l, r) in &candidates {
            let spec = platform_spec(l, r, period)?;
            let m = cell_mode_excitation(&spec, &ranking_pump, DESIGN_TEMPERATURE)?;
            let eta = escape_probability(&spec, DESIGN_TEMPERATURE);
            best = match best {
                None => Some((l, r, m, eta)),
                Some((bl, br, bm, be)) => {
                    if m > bm + 1e-12 || ((m - bm).abs() <= 1e-12 && eta > be) {
                        Some((l, r, m, eta))
                    } else {
                        Some((bl, br, bm, be))
                    }
                }
            };
        }
        let (l, r, _, _) = best.expect("candidates are non-empty");
        (l, r)
    };
    let spec = platform_spec(best_l, best_r, period)?;

    // Step 3: smallest pump bandwidth whose spectral purity reaches the even
    // geometric split of the purity floor (P = M * S shared evenly).
    let op = OperatingPoint::anchor(&spec, nu_pump, DESIGN_TEMPERATURE)?;
    let lw_s = resonance_linewidth(
        &spec,
        Polarization::Ordinary,
        op.signal_center,
        DESIGN_TEMPERATURE,
    )?;
    let lw_i = resonance_linewidth(
        &spec,
        Polarization::Extraordinary,
        op.idler_center,
        DESIGN_TEMPERATURE,
    )?;
    let mut sigma_shortfall = None;
    let sigma = match overrides.pump_bandwidth {
        Some(s) => s,
        None => {
            let split = target.minimum_total_purity.sqrt();
            let unit = lw_s.max(lw_i);
            let ladder: Vec<f64> = SIGMA_LADDER.iter().map(|&x| x * unit).collect();
            let tables =
                purity_vs_pump_bandwidth(&spec, nu_pump, DESIGN_TEMPERATURE, &ladder, &[])?;
            let rows = &tables[0].rows;
            match rows.iter().find(|row| row.spectral_purity >= split) {
                Some(row) => row.pump_bandwidth,
                None => {
                    let last = rows.last().expect("ladder is non-empty");
                    sigma_shortfall = Some(format!(
                        "spectral purity reaches only {:.4} at the widest searched pump \
                         bandwidth {:.6e} Hz; the even split needs {:.4}",
                        last.spectral_purity, last.pump_bandwidth, split
                    ));
                    last.pump_bandwidth
                }
            }
        }
    };
    let pump = PumpSpec::gaussian(nu_pump, sigma)?;

    // Step 4: full prediction at the anchored operating point.
    let purity = purity_report_at(&spec, &pump, DESIGN_TEMPERATURE)?;
    let stability = match stability_windows(&spec, op.pump_frequency, DESIGN_TEMPERATURE) {
        Ok(report) => Some(report),
        Err(Error::UnstableSetpoint { .. }) => None,
        Err(e) => return Err(e),
    };
    let point =
        PhasematchPoint::for_spec(&spec, op.pump_frequency, op.signal_center, DESIGN_TEMPERATURE)?;
    let brightness = enhancement_factor(&spec, &point, DESIGN_TEMPERATURE)?;
    let memory_linewidth = if memory_is_signal { lw_s } else { lw_i };

    let mut feasible = true;
    let mut binding_constraint = None;
    let mut binding_detail = None;
    if (memory_linewidth - desired).abs() > BANDWIDTH_TOLERANCE * desired {
        feasible = false;
        binding_constraint = Some("desired_bandwidth");
        binding_detail = Some(format!(
            "memory-photon linewidth {:.6e} Hz misses the target {:.6e} Hz by more than {:.0}%",
            memory_linewidth,
            desired,
            BANDWIDTH_TOLERANCE * 100.0
        ));
    } else if let Some(detail) = sigma_shortfall {
        feasible = false;
        binding_constraint = Some("minimum_total_purity");
        binding_detail = Some(detail);
    } else if purity.total_purity < target.minimum_total_purity {
        feasible = false;
        binding_constraint = Some("minimum_total_purity");
        binding_detail = Some(format!(
            "predicted total purity {:.4} is below the floor {:.4}",
            purity.total_purity, target.minimum_total_purity
        ));
    }

    Ok(DesignResult {
        source: spec,
        pump,
        poling_period: period,
        operating: op,
        signal_wavelength: SPEED_OF_LIGHT / op.signal_center,
        idler_wavelength: SPEED_OF_LIGHT / op.idler_center,
        memory_is_signal,
        feasible,
        binding_constraint,
        binding_detail,
        assumptions: vec![
            "shared exit coupler: idler mirrors equal the signal mirrors".into(),
            format!(
                "input couplers {:.2}, losses {:.3}/{:.3} dB/cm, operated at {:.2} degC",
                INPUT_REFLECTIVITY, LOSS_SIGNAL_DB_PER_CM, LOSS_IDLER_DB_PER_CM,
                DESIGN_TEMPERATURE
            ),
            "candidate ranking used the default cluster filter".into(),
        ],
        predicted: DesignPrediction {
            purity,
            signal_linewidth: lw_s,
            idler_linewidth: lw_i,
            memory_linewidth,
            stability,
            brightness,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::group_index;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const T_OP: f64 = 148.14;
    const PERIOD: f64 = 4.543485772824805e-6;

    fn demo_spec() -> SourceSpec {
        SourceSpec {
            length_l0: 12.3e-3,
            poling_period: PERIOD,
            mirrors_signal: MirrorPair { r1: 0.99, r2: 0.98 },
            mirrors_idler: MirrorPair { r1: 0.99, r2: 0.98 },
            loss_signal_db_per_cm: 0.016,
            loss_idler_db_per_cm: 0.022,
            reference_temperature: T_OP,
            dispersion: DispersionModel::default_model().unwrap(),
            thermal: ThermalModel::new(1.5e-5, T_OP),
        }
    }

    fn nu_signal() -> f64 {
        SPEED_OF_LIGHT / 890e-9
    }

    fn nu_pump() -> f64 {
        SPEED_OF_LIGHT / 532e-9
    }

    /// Acceptance-style coarse grid.
    fn coarse_lengths() -> Vec<f64> {
        [2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 20.0, 40.0, 70.0]
            .iter()
            .map(|l| l * 1e-3)
            .collect()
    }

    fn coarse_reflectivities() -> Vec<f64> {
        vec![0.70, 0.80, 0.85, 0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98]
    }

    #[test]
    fn map_cell_matches_single_point_call() {
        let base = demo_spec();
        let map = bandwidth_map(
            &base,
            nu_signal(),
            T_OP,
            &[10.0e-3, 12.3e-3],
            &[0.95, 0.98],
        )
        .unwrap();
        let direct =
            resonance_linewidth(&base, Polarization::Ordinary, nu_signal(), T_OP).unwrap();
        assert_eq!(map.get(1, 1), direct);
        // Demonstrator linewidth lands in the tens of MHz.
        assert!(direct > 20e6 && direct < 60e6);
    }

    #[test]
    fn map_cells_do_not_depend_on_evaluation_order() {
        let base = demo_spec();
        let lengths = [5.0e-3, 12.3e-3, 40.0e-3];
        let refls = [0.80, 0.92, 0.98];
        let map = bandwidth_map(&base, nu_signal(), T_OP, &lengths, &refls).unwrap();
        // Reverse-order single-cell evaluation must reproduce the matrix
        // bitwise.
        for i in (0..lengths.len()).rev() {
            for j in (0..refls.len()).rev() {
                let spec = map_cell_spec(&base, lengths[i], refls[j]).unwrap();
                let direct =
                    resonance_linewidth(&spec, Polarization::Ordinary, nu_signal(), T_OP)
                        .unwrap();
                assert_eq!(map.get(i, j), direct);
            }
        }
    }

    #[test]
    fn bandwidth_map_is_monotone() {
        let base = demo_spec();
        let lengths = coarse_lengths();
        let refls = coarse_reflectivities();
        let map = bandwidth_map(&base, nu_signal(), T_OP, &lengths, &refls).unwrap();
        for i in 0..lengths.len() {
            for j in 0..refls.len() {
                if i + 1 < lengths.len() {
                    assert!(map.get(i + 1, j) < map.get(i, j));
                }
                if j + 1 < refls.len() {
                    assert!(map.get(i, j + 1) < map.get(i, j));
                }
            }
        }
    }

    #[test]
    fn gigahertz_bandwidths_need_short_waveguides() {
        let base = demo_spec();
        let lengths = coarse_lengths();
        let refls = coarse_reflectivities();
        let map = bandwidth_map(&base, nu_signal(), T_OP, &lengths, &refls).unwrap();
        for i in 0..lengths.len() {
            for j in 0..refls.len() {
                if map.get(i, j) > 1e9 {
                    assert!(
                        lengths[i] < 5.0e-3,
                        "{:.0} mm cell has {:.3} GHz",
                        lengths[i] * 1e3,
                        map.get(i, j) / 1e9
                    );
                }
            }
        }
        // Widest cell of the 5 mm row stays below 1 GHz.
        let five = lengths.iter().position(|&l| l == 5.0e-3).unwrap();
        assert!(map.get(five, 0) > 0.70e9 && map.get(five, 0) < 0.82e9);
    }

    #[test]
    fn purity_map_reproduces_frozen_trend_cells() {
        let base = demo_spec();
        let pump = PumpSpec::gaussian(nu_pump(), 100e6).unwrap();
        let map = purity_map(
            &base,
            &pump,
            T_OP,
            &[10.0e-3, 70.0e-3],
            &[0.70, 0.95],
        )
        .unwrap();
        let m_10_95 = map.get(0, 1);
        let m_70_95 = map.get(1, 1);
        let m_10_70 = map.get(0, 0);
        assert_abs_diff_eq!(m_10_95, 0.945206, epsilon = 1e-6);
        assert_abs_diff_eq!(m_70_95, 0.415249, epsilon = 1e-6);
        assert_abs_diff_eq!(m_10_70, 0.673375, epsilon = 1e-6);
        assert!(m_10_95 > m_70_95 && m_10_95 > m_10_70);
    }

    #[test]
    fn high_purity_region_reaches_broad_bandwidths() {
        let base = demo_spec();
        let pump = PumpSpec::gaussian(nu_pump(), 100e6).unwrap();
        // Boundary cell of the M > 0.95 region on the acceptance grid.
        let m = purity_map(&base, &pump, T_OP, &[2.0e-3], &[0.94]).unwrap();
        assert!(m.get(0, 0) > 0.95, "M = {:.4}", m.get(0, 0));
        let bw = bandwidth_map(&base, nu_signal(), T_OP, &[2.0e-3], &[0.94]).unwrap();
        assert!(
            bw.get(0, 0) > 280e6 && bw.get(0, 0) < 420e6,
            "boundary bandwidth {:.1} MHz",
            bw.get(0, 0) / 1e6
        );
    }

    #[test]
    fn cluster_filter_never_lowers_mode_excitation() {
        let base = demo_spec();
        // Narrow pump: the pair window sits inside one cluster and the
        // default filter admits everything.
        let narrow = PumpSpec::gaussian(nu_pump(), 100e6).unwrap();
        let filtered = cell_mode_excitation(&base, &narrow, T_OP).unwrap();
        let whole = streamed_dominant_pair(&base, &narrow, T_OP, None)
            .unwrap()
            .mode_excitation;
        assert_eq!(filtered, whole);
        // Broad pump: the window spans several clusters and rejecting the
        // side clusters strictly raises the dominant fraction.
        let broad = PumpSpec::gaussian(nu_pump(), 3e9).unwrap();
        let filtered = cell_mode_excitation(&base, &broad, T_OP).unwrap();
        let whole = streamed_dominant_pair(&base, &broad, T_OP, None)
            .unwrap()
            .mode_excitation;
        assert!(
            filtered > whole,
            "filtered {:.4} vs whole-window {:.4}",
            filtered,
            whole
        );
    }

    #[test]
    fn linear_axis_spans_range() {
        let axis = linear_axis(2.0, 10.0, 5).unwrap();
        assert_eq!(axis, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        assert!(linear_axis(2.0, 2.0, 5).is_err());
        assert!(linear_axis(2.0, 10.0, 1).is_err());
    }

    fn cesium_target() -> MemoryTarget {
        MemoryTarget::new(852e-9, 500e6, 0.90)
    }

    #[test]
    fn cesium_quoted_configuration() {
        let overrides = DesignOverrides {
            length: Some(2.5e-3),
            exit_reflectivity: Some(0.90),
            pump_bandwidth: Some(1e9),
        };
        let result = design_with_overrides(&cesium_target(), &overrides).unwrap();
        assert!(result.memory_is_signal);
        assert_abs_diff_eq!(result.idler_wavelength, 1416.5e-9, epsilon = 2e-9);
        assert_abs_diff_eq!(result.predicted.purity.total_purity, 0.6871, epsilon = 2e-3);
        // Linewidth lands inside the 20% band around 500 MHz.
        assert_abs_diff_eq!(result.predicted.memory_linewidth, 477.7e6, epsilon = 2e6);
        assert!(result.feasible == false);
        assert_eq!(result.binding_constraint, Some("minimum_total_purity"));
    }

    #[test]
    fn thulium_quoted_configuration() {
        let target = MemoryTarget::new(795e-9, 80e6, 0.90);
        let overrides = DesignOverrides {
            length: Some(10.0e-3),
            exit_reflectivity: Some(0.94),
            pump_bandwidth: Some(250e6),
        };
        let result = design_with_overrides(&target, &overrides).unwrap();
        assert!(result.memory_is_signal);
        assert_abs_diff_eq!(result.idler_wavelength, 1608.2e-9, epsilon = 2e-9);
        assert_abs_diff_eq!(result.predicted.purity.total_purity, 0.8560, epsilon = 2e-3);
        assert_abs_diff_eq!(result.predicted.memory_linewidth, 80.1e6, epsilon = 0.5e6);
        assert_eq!(result.binding_constraint, Some("minimum_total_purity"));
    }

    #[test]
    fn erbium_swaps_roles_by_relabeling() {
        // The 1536 nm photon is the lower-frequency (Extraordinary) one, so
        // the memory couples to the idler.
        let target = MemoryTarget::new(1536e-9, 15e6, 0.65);
        let overrides = DesignOverrides {
            length: Some(80.0e-3),
            exit_reflectivity: Some(0.98),
            pump_bandwidth: Some(60e6),
        };
        let swapped = design_with_overrides(&target, &overrides).unwrap();
        assert!(!swapped.memory_is_signal);
        assert_abs_diff_eq!(swapped.signal_wavelength, 813.896e-9, epsilon = 0.1e-9);
        assert_abs_diff_eq!(swapped.idler_wavelength, 1536e-9, epsilon = 0.3e-9);
        assert_abs_diff_eq!(swapped.predicted.purity.total_purity, 0.6635, epsilon = 2e-3);
        // Memory-photon linewidth is read from the idler leg.
        assert_eq!(
            swapped.predicted.memory_linewidth,
            swapped.predicted.idler_linewidth
        );
        assert!(swapped.feasible, "P = {:.4}", swapped.predicted.purity.total_purity);

        // Direct computation with exchanged parameters: target the Ordinary
        // partner wavelength instead. Identical device, identical metrics.
        let nu_p = SPEED_OF_LIGHT / target.pump_wavelength;
        let partner = SPEED_OF_LIGHT / (nu_p - SPEED_OF_LIGHT / target.signal_wavelength);
        let direct_target = MemoryTarget::new(partner, 11.3e6, 0.65);
        let direct = design_with_overrides(&direct_target, &overrides).unwrap();
        assert!(direct.memory_is_signal);
        assert_eq!(direct.poling_period, swapped.poling_period);
        assert_eq!(direct.operating.pump_frequency, swapped.operating.pump_frequency);
        assert_eq!(direct.signal_wavelength, swapped.signal_wavelength);
        assert_eq!(direct.idler_wavelength, swapped.idler_wavelength);
        let a = &direct.predicted;
        let b = &swapped.predicted;
        assert_eq!(a.purity.mode_excitation, b.purity.mode_excitation);
        assert_eq!(a.purity.schmidt_number, b.purity.schmidt_number);
        assert_eq!(a.purity.total_purity, b.purity.total_purity);
        assert_eq!(a.signal_linewidth, b.signal_linewidth);
        assert_eq!(a.idler_linewidth, b.idler_linewidth);
        assert_eq!(
            a.brightness.enhancement_proportional,
            b.brightness.enhancement_proportional
        );
        // The two targets read opposite legs as the memory photon.
        assert_eq!(a.memory_linewidth, b.signal_linewidth);
    }

    #[test]
    fn search_without_overrides_closes_on_itself() {
        let target = MemoryTarget::new(852e-9, 500e6, 0.50);
        let result = design_for_memory(&target).unwrap();
        assert!(result.feasible);
        assert!(result.binding_constraint.is_none());
        let lw = result.predicted.memory_linewidth;
        assert!(
            (lw - 500e6).abs() <= 0.2 * 500e6,
            "linewidth {:.1} MHz",
            lw / 1e6
        );
        // The pump satisfies the even purity split.
        assert!(result.predicted.purity.spectral_purity >= 0.50f64.sqrt());
        assert!(result.predicted.purity.total_purity >= 0.50);
        // Closure: feeding the proposal back through the pipeline reproduces
        // the prediction exactly.
        let purity = purity_report_at(&result.source, &result.pump, DESIGN_TEMPERATURE).unwrap();
        assert_eq!(purity.mode_excitation, result.predicted.purity.mode_excitation);
        assert_eq!(purity.schmidt_number, result.predicted.purity.schmidt_number);
        assert_eq!(purity.total_purity, result.predicted.purity.total_purity);
        let stability = stability_windows(
            &result.source,
            result.operating.pump_frequency,
            DESIGN_TEMPERATURE,
        );
        match &result.predicted.stability {
            Some(predicted) => {
                assert_eq!(stability.unwrap().pump.halfwidth, predicted.pump.halfwidth)
            }
            None => assert!(matches!(stability, Err(Error::UnstableSetpoint { .. }))),
        }
        let point = PhasematchPoint::for_spec(
            &result.source,
            result.operating.pump_frequency,
            result.operating.signal_center,
            DESIGN_TEMPERATURE,
        )
        .unwrap();
        let brightness =
            enhancement_factor(&result.source, &point, DESIGN_TEMPERATURE).unwrap();
        assert_eq!(
            brightness.relative_spectral_brightness,
            result.predicted.brightness.relative_spectral_brightness
        );
    }

    #[test]
    fn unreachable_bandwidth_names_the_binding_constraint() {
        // 4.9 GHz passes target validation but exceeds every grid cell.
        let target = MemoryTarget::new(852e-9, 4.9e9, 0.50);
        match design_for_memory(&target) {
            Err(Error::Infeasible { binding, .. }) => {
                assert_eq!(binding, "desired_bandwidth")
            }
            other => panic!("expected an infeasibility report, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn target_validation_rejects_out_of_range_requests() {
        assert!(MemoryTarget::new(852e-9, 0.5e6, 0.9).validate().is_err());
        assert!(MemoryTarget::new(852e-9, 6e9, 0.9).validate().is_err());
        assert!(MemoryTarget::new(852e-9, 500e6, 1.2).validate().is_err());
        assert!(MemoryTarget::new(400e-9, 500e6, 0.9).validate().is_err());
        assert!(MemoryTarget::new(852e-9, 500e6, 0.9).validate().is_ok());
    }

    #[test]
    fn refinement_hits_bandwidths_between_grid_cells() {
        // 333 MHz at 852 nm falls between coarse cells for most rows; the
        // refined proposal must still land within 20%.
        let target = MemoryTarget::new(852e-9, 333e6, 0.50);
        let result = design_for_memory(&target).unwrap();
        let lw = result.predicted.memory_linewidth;
        assert!(
            (lw - 333e6).abs() <= 0.2 * 333e6,
            "linewidth {:.1} MHz",
            lw / 1e6
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn bandwidth_map_monotone_and_consistent(
            l_lo in 3.0e-3..8.0e-3f64,
            l_span in 2.0e-3..30.0e-3f64,
            r_lo in 0.70..0.90f64,
            r_span in 0.02..0.08f64,
        ) {
            let base = demo_spec();
            let lengths = linear_axis(l_lo, l_lo + l_span, 3).unwrap();
            let refls = linear_axis(r_lo, r_lo + r_span, 3).unwrap();
            let map = bandwidth_map(&base, nu_signal(), T_OP, &lengths, &refls).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!(map.get(i, j) > 0.0);
                    if i + 1 < 3 {
                        prop_assert!(map.get(i + 1, j) < map.get(i, j));
                    }
                    if j + 1 < 3 {
                        prop_assert!(map.get(i, j + 1) < map.get(i, j));
                    }
                    let spec = map_cell_spec(&base, lengths[i], refls[j]).unwrap();
                    let direct = resonance_linewidth(
                        &spec,
                        Polarization::Ordinary,
                        nu_signal(),
                        T_OP,
                    ).unwrap();
                    prop_assert_eq!(map.get(i, j), direct);
                }
            }
            // Linewidth scales like FSR/finesse: quadrupling the length at
            // fixed finesse quarters the FSR, so the span of the map must
            // shrink accordingly.
            let ng = group_index(
                &base.dispersion,
                Polarization::Ordinary,
                890e-9,
                T_OP,
            ).unwrap();
            let fsr0 = SPEED_OF_LIGHT / (2.0 * ng * lengths[0]);
            prop_assert!(map.get(0, 0) < fsr0);
        }
    }
}
