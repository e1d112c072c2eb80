//! Joint spectral amplitude of the photon pair on a discrete frequency grid,
//! the idler cluster filter, and the purity bookkeeping derived from it:
//! mode-excitation probability, Schmidt number, spectral purity, total purity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    airy_amplitude, find_resonances, free_spectral_range, resonance_linewidth, SourceSpec,
};
use crate::dispersion::{propagation_constant, Polarization};
use crate::error::{Error, Result};
use crate::operating_point::OperatingPoint;
use crate::phasematch::{cluster_spacing_estimate, sinc, PhasematchPoint};
use crate::spectrum::{detect_clusters, SignalSpectrum};

/// Minimum grid samples per cavity linewidth on each axis.
const SAMPLES_PER_LINEWIDTH: f64 = 8.0;
/// The decomposition grid resolves the pump ridge with this many samples.
const SAMPLES_PER_PUMP_BANDWIDTH: f64 = 6.0;
/// Largest cell count build_jsa will materialize.
const MAX_GRID_CELLS: usize = 24_000_000;
/// Decomposition grids beyond this per-axis size are clipped to the
/// resonance core.
const MAX_DECOMP_POINTS: usize = 4200;
/// Clipped decomposition half-window, in cavity linewidths.
const DECOMP_CLIP_LINEWIDTHS: f64 = 12.0;
/// Extra comb-pair margin of the pump-adapted window, in FSRs.
const WINDOW_MARGIN_FSRS: f64 = 0.6;
/// Half-window of the monochromatic line restriction, in signal FSRs.
const LINE_HALF_FSRS: f64 = 2.6;
/// Hard cap on the pump-adapted window, in comb pairs per side.
const MAX_WINDOW_PAIRS: usize = 64;
/// Spectral purity defining the crossover pump bandwidth.
const CROSSOVER_PURITY: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PumpLineshape {
    Monochromatic,
    Gaussian,
}

/// Pump spectral model. `bandwidth_fwhm` is the intensity FWHM of the
/// Gaussian lineshape and is ignored for a monochromatic pump.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PumpSpec {
    /// Requested pump frequency in Hz; builders snap the ridge onto the
    /// nearest doubly resonant comb pair.
    pub central_frequency: f64,
    pub bandwidth_fwhm: f64,
    pub lineshape: PumpLineshape,
}

impl PumpSpec {
    pub fn gaussian(central_frequency: f64, bandwidth_fwhm: f64) -> Result<Self> {
        let pump = PumpSpec {
            central_frequency,
            bandwidth_fwhm,
            lineshape: PumpLineshape::Gaussian,
        };
        pump.validate()?;
        Ok(pump)
    }

    pub fn monochromatic(central_frequency: f64) -> Result<Self> {
        let pump = PumpSpec {
            central_frequency,
            bandwidth_fwhm: 0.0,
            lineshape: PumpLineshape::Monochromatic,
        };
        pump.validate()?;
        Ok(pump)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.central_frequency > 0.0 && self.central_frequency.is_finite()) {
            return Err(Error::OutOfRange {
                quantity: "pump central frequency",
                value: self.central_frequency,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "Hz",
            });
        }
        if self.lineshape == PumpLineshape::Gaussian
            && !(self.bandwidth_fwhm > 0.0 && self.bandwidth_fwhm.is_finite())
        {
            return Err(Error::OutOfRange {
                quantity: "pump bandwidth",
                value: self.bandwidth_fwhm,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "Hz",
            });
        }
        Ok(())
    }

    /// Spectral amplitude at a sum-frequency detuning from the ridge center,
    /// normalized to one on the ridge.
    fn ridge_amplitude(&self, detuning: f64) -> f64 {
        match self.lineshape {
            PumpLineshape::Monochromatic => 1.0,
            PumpLineshape::Gaussian => {
                let x = detuning / self.bandwidth_fwhm;
                (-2.0 * std::f64::consts::LN_2 * x * x).exp()
            }
        }
    }
}

/// Discretized pair amplitude. A Gaussian pump yields a dense signal x idler
/// grid stored row-major; a monochromatic pump restricts support to the
/// energy conservation line and stores one sample per signal frequency.
#[derive(Clone, Debug)]
pub enum JsaData {
    Grid {
        /// Row-major, signal rows by idler columns.
        amplitude: Vec<Complex64>,
        filter_mask: Vec<bool>,
    },
    Line {
        amplitude: Vec<Complex64>,
        filter_mask: Vec<bool>,
    },
}

#[derive(Clone, Debug)]
pub struct JointSpectrum {
    /// Uniform ascending signal grid, Hz.
    pub signal_grid: Vec<f64>,
    /// Uniform idler grid, Hz: ascending for grid data, the descending
    /// partner frequencies pump - signal for line data.
    pub idler_grid: Vec<f64>,
    pub data: JsaData,
    pub spec: SourceSpec,
    pub pump: PumpSpec,
    pub temperature: f64,
    /// Comb pair the window is anchored and indexed against; its pump sum is
    /// the ridge center.
    pub operating: OperatingPoint,
    pub signal_fsr: f64,
    pub idler_fsr: f64,
    /// Hz; infinite for a zero-finesse resonator.
    pub signal_linewidth: f64,
    pub idler_linewidth: f64,
}

impl JointSpectrum {
    /// Share of the squared amplitude admitted by the current filter mask.
    pub fn masked_weight_fraction(&self) -> f64 {
        let (amp, mask) = match &self.data {
            JsaData::Grid {
                amplitude,
                filter_mask,
            }
            | JsaData::Line {
                amplitude,
                filter_mask,
            } => (amplitude, filter_mask),
        };
        let mut kept = 0.0;
        let mut total = 0.0;
        for (z, &m) in amp.iter().zip(mask) {
            let w = z.norm_sqr();
            total += w;
            if m {
                kept += w;
            }
        }
        if total > 0.0 {
            kept / total
        } else {
            0.0
        }
    }
}

/// Which cells the Schmidt decomposition acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchmidtMode {
    /// Voronoi cell of the heaviest comb pair, as used by the purity report.
    DominantModeOnly,
    /// Bounding rectangle of every filtered-in cell.
    FullFiltered,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PurityReport {
    /// Share of the filtered pair intensity carried by the heaviest comb
    /// pair, in [0, 1].
    pub mode_excitation: f64,
    /// Participation Schmidt number of the dominant pair's amplitude.
    pub schmidt_number: f64,
    /// 1 / schmidt_number, exactly.
    pub spectral_purity: f64,
    /// mode_excitation * spectral_purity, exactly.
    pub total_purity: f64,
    /// Comb pair carrying the heaviest weight: (signal Hz, idler Hz).
    pub dominant_mode: (f64, f64),
}

/// One resonator geometry swept by purity_vs_pump_bandwidth: sample length
/// and the swept output-coupler reflectivity, applied to both photons.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryCase {
    pub label: String,
    pub length: f64,
    pub mirror_r2: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PumpBandwidthRow {
    pub pump_bandwidth: f64,
    pub schmidt_number: f64,
    pub spectral_purity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PumpBandwidthTable {
    pub label: String,
    pub rows: Vec<PumpBandwidthRow>,
    /// Smallest listed bandwidth whose spectral purity reaches 0.9.
    pub crossover_bandwidth: Option<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect()
}

fn check_axis_window(what: &'static str, window: (f64, f64)) -> Result<()> {
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(Error::OutOfRange {
            quantity: what,
            value: window.1 - window.0,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    Ok(())
}

/// Comb line nearest a target frequency.
fn nearest_line(
    spec: &SourceSpec,
    pol: Polarization,
    target: f64,
    temperature: f64,
) -> Result<f64> {
    let fsr = free_spectral_range(spec, pol, target, temperature)?;
    let comb = find_resonances(
        spec,
        pol,
        (target - 0.75 * fsr, target + 0.75 * fsr),
        temperature,
    )?;
    Ok(comb.nearest_center(target))
}

/// Linewidth in Hz, infinite for a zero-finesse resonator.
fn linewidth_or_infinite(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    match resonance_linewidth(spec, pol, frequency, temperature) {
        Ok(lw) => Ok(lw),
        Err(Error::DegenerateCavity { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Default grid step: the narrower finite linewidth over the samples-per-
/// linewidth rule; None when both resonators are degenerate.
fn default_step(signal_linewidth: f64, idler_linewidth: f64) -> Option<f64> {
    let narrow = signal_linewidth.min(idler_linewidth);
    narrow.is_finite().then(|| narrow / SAMPLES_PER_LINEWIDTH)
}

fn axis_points(width: f64, step: f64) -> usize {
    ((width / step).floor() as usize + 1).max(2)
}

/// The step must give at least SAMPLES_PER_LINEWIDTH points per finite
/// linewidth on the axis.
fn check_axis_resolution(
    what: &'static str,
    width: f64,
    linewidth: f64,
    step: f64,
) -> Result<()> {
    if linewidth.is_finite() && step > linewidth / SAMPLES_PER_LINEWIDTH * (1.0 + 1e-9) {
        return Err(Error::Resolution {
            what,
            points: axis_points(width, step),
            required: (width / linewidth * SAMPLES_PER_LINEWIDTH).ceil() as usize + 1,
        });
    }
    Ok(())
}

/// Comb-pair index of a frequency relative to an anchored comb line.
fn pair_bin(frequency: f64, center: f64, fsr: f64) -> i64 {
    ((frequency - center) / fsr).round() as i64
}

/// Per-row amplitude kernel shared by the materializing builder, the
/// streaming pair histogram, and the decomposition grids.
struct RowKernel<'a> {
    spec: &'a SourceSpec,
    temperature: f64,
    /// Thermally expanded grating wavenumber 2 pi / Lambda(T), rad/m.
    grating_k: f64,
    /// L(T) / 2, m.
    half_length: f64,
    pump: PumpSpec,
    /// Ridge center: the anchored comb-pair sum, Hz.
    pump_center: f64,
    idler_grid: &'a [f64],
    beta_idler: &'a [f64],
    airy_idler: &'a [Complex64],
}

impl RowKernel<'_> {
    fn new<'a>(
        spec: &'a SourceSpec,
        pump: &PumpSpec,
        temperature: f64,
        pump_center: f64,
        idler_grid: &'a [f64],
        beta_idler: &'a [f64],
        airy_idler: &'a [Complex64],
    ) -> RowKernel<'a> {
        RowKernel {
            spec,
            temperature,
            grating_k: 2.0 * std::f64::consts::PI / spec.poling_period_at(temperature),
            half_length: spec.length_at(temperature) / 2.0,
            pump: *pump,
            pump_center,
            idler_grid,
            beta_idler,
            airy_idler,
        }
    }

    /// One signal row against the idler grid.
    fn row_into(&self, nu_s: f64, out: &mut [Complex64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.idler_grid.len());
        let beta_s = propagation_constant(
            &self.spec.dispersion,
            Polarization::Ordinary,
            nu_s,
            self.temperature,
        )?;
        let a_s = airy_amplitude(self.spec, Polarization::Ordinary, nu_s, self.temperature)?;
        for (b, &nu_i) in self.idler_grid.iter().enumerate() {
            let u = nu_s + nu_i;
            let beta_p = propagation_constant(
                &self.spec.dispersion,
                Polarization::Ordinary,
                u,
                self.temperature,
            )?;
            let mismatch = beta_p - beta_s - self.beta_idler[b] - self.grating_k;
            let envelope = sinc(mismatch * self.half_length);
            let ridge = self.pump.ridge_amplitude(u - self.pump_center);
            out[b] = self.airy_idler[b] * a_s * (envelope * ridge);
        }
        Ok(())
    }
}

/// Idler-axis tables the row kernel consumes.
fn idler_tables(
    spec: &SourceSpec,
    temperature: f64,
    idler_grid: &[f64],
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut beta = Vec::with_capacity(idler_grid.len());
    let mut airy = Vec::with_capacity(idler_grid.len());
    for &nu in idler_grid {
        beta.push(propagation_constant(
            &spec.dispersion,
            Polarization::Extraordinary,
            nu,
            temperature,
        )?);
        airy.push(airy_amplitude(
            spec,
            Polarization::Extraordinary,
            nu,
            temperature,
        )?);
    }
    Ok((beta, airy))
}

/// Amplitude samples along the energy conservation line nu_i = pump - nu_s.
fn line_samples(
    spec: &SourceSpec,
    temperature: f64,
    pump_center: f64,
    signal_grid: &[f64],
) -> Result<Vec<Complex64>> {
    let grating_k = 2.0 * std::f64::consts::PI / spec.poling_period_at(temperature);
    let half_length = spec.length_at(temperature) / 2.0;
    let beta_p = propagation_constant(
        &spec.dispersion,
        Polarization::Ordinary,
        pump_center,
        temperature,
    )?;
    signal_grid
        .iter()
        .map(|&nu_s| {
            let nu_i = pump_center - nu_s;
            let beta_s = propagation_constant(
                &spec.dispersion,
                Polarization::Ordinary,
                nu_s,
                temperature,
            )?;
            let beta_i = propagation_constant(
                &spec.dispersion,
                Polarization::Extraordinary,
                nu_i,
                temperature,
            )?;
            let envelope = sinc((beta_p - beta_s - beta_i - grating_k) * half_length);
            let a_s = airy_amplitude(spec, Polarization::Ordinary, nu_s, temperature)?;
            let a_i = airy_amplitude(spec, Polarization::Extraordinary, nu_i, temperature)?;
            Ok(a_i * a_s * envelope)
        })
        .collect()
}

/// Builds the discretized pair amplitude over the given windows.
///
/// Each cell holds pump(nu_s + nu_i) * sinc(mismatch L/2) * A_s * A_i. The
/// combs are anchored at the window midpoints and the pump ridge is centered
/// on the anchored pair sum. `resolution` is the grid step in Hz; the default
/// resolves the narrower finite linewidth with eight samples. A monochromatic
/// pump produces the line restriction instead of a dense grid.
pub fn build_jsa(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
    signal_window: (f64, f64),
    idler_window: (f64, f64),
    resolution: Option<f64>,
) -> Result<JointSpectrum> {
    spec.validate()?;
    pump.validate()?;
    check_axis_window("signal window", signal_window)?;
    check_axis_window("idler window", idler_window)?;

    let signal_center = nearest_line(
        spec,
        Polarization::Ordinary,
        0.5 * (signal_window.0 + signal_window.1),
        temperature,
    )?;
    let idler_center = nearest_line(
        spec,
        Polarization::Extraordinary,
        0.5 * (idler_window.0 + idler_window.1),
        temperature,
    )?;
    let operating = OperatingPoint {
        pump_frequency: signal_center + idler_center,
        signal_center,
        idler_center,
        temperature,
    };
    let signal_fsr = free_spectral_range(spec, Polarization::Ordinary, signal_center, temperature)?;
    let idler_fsr =
        free_spectral_range(spec, Polarization::Extraordinary, idler_center, temperature)?;
    let signal_linewidth =
        linewidth_or_infinite(spec, Polarization::Ordinary, signal_center, temperature)?;
    let idler_linewidth =
        linewidth_or_infinite(spec, Polarization::Extraordinary, idler_center, temperature)?;

    let step = match resolution {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => {
            return Err(Error::OutOfRange {
                quantity: "grid resolution",
                value: s,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "Hz",
            })
        }
        None => default_step(signal_linewidth, idler_linewidth).ok_or_else(|| {
            Error::Config(
                "both resonators are degenerate; pass an explicit grid resolution".into(),
            )
        })?,
    };
    check_axis_resolution(
        "signal axis grid",
        signal_window.1 - signal_window.0,
        signal_linewidth,
        step,
    )?;
    check_axis_resolution(
        "idler axis grid",
        idler_window.1 - idler_window.0,
        idler_linewidth,
        step,
    )?;

    let frame = |signal_grid: Vec<f64>, idler_grid: Vec<f64>, data: JsaData| JointSpectrum {
        signal_grid,
        idler_grid,
        data,
        spec: spec.clone(),
        pump: *pump,
        temperature,
        operating,
        signal_fsr,
        idler_fsr,
        signal_linewidth,
        idler_linewidth,
    };

    match pump.lineshape {
        PumpLineshape::Monochromatic => {
            // The line must also resolve the idler comb it sweeps across.
            check_axis_resolution(
                "line grid",
                signal_window.1 - signal_window.0,
                idler_linewidth,
                step,
            )?;
            let lo = signal_window.0.max(operating.pump_frequency - idler_window.1);
            let hi = signal_window.1.min(operating.pump_frequency - idler_window.0);
            if !(hi > lo) {
                return Err(Error::Config(
                    "energy conservation line misses the signal/idler windows".into(),
                ));
            }
            let n = axis_points(hi - lo, step);
            let signal_grid = linspace(lo, hi, n);
            let idler_grid: Vec<f64> = signal_grid
                .iter()
                .map(|&nu| operating.pump_frequency - nu)
                .collect();
            let amplitude = line_samples(spec, temperature, operating.pump_frequency, &signal_grid)?;
            let filter_mask = vec![true; n];
            Ok(frame(
                signal_grid,
                idler_grid,
                JsaData::Line {
                    amplitude,
                    filter_mask,
                },
            ))
        }
        PumpLineshape::Gaussian => {
            let n_s = axis_points(signal_window.1 - signal_window.0, step);
            let n_i = axis_points(idler_window.1 - idler_window.0, step);
            if n_s.saturating_mul(n_i) > MAX_GRID_CELLS {
                return Err(Error::Config(format!(
                    "grid of {} x {} cells exceeds the {} cell materialization cap; \
                     narrow the windows or coarsen the resolution",
                    n_s, n_i, MAX_GRID_CELLS
                )));
            }
            let signal_grid = linspace(signal_window.0, signal_window.1, n_s);
            let idler_grid = linspace(idler_window.0, idler_window.1, n_i);
            let (beta_idler, airy_idler) = idler_tables(spec, temperature, &idler_grid)?;
            let kernel = RowKernel::new(
                spec,
                pump,
                temperature,
                operating.pump_frequency,
                &idler_grid,
                &beta_idler,
                &airy_idler,
            );
            let mut amplitude = vec![Complex64::new(0.0, 0.0); n_s * n_i];
            amplitude
                .par_chunks_mut(n_i)
                .zip(signal_grid.par_iter())
                .try_for_each(|(row, &nu_s)| kernel.row_into(nu_s, row))?;
            let filter_mask = vec![true; n_s * n_i];
            Ok(frame(
                signal_grid,
                idler_grid,
                JsaData::Grid {
                    amplitude,
                    filter_mask,
                },
            ))
        }
    }
}

/// Dense comb-pair histogram over a bounded index range.
struct PairHistogram {
    signal_lo: i64,
    idler_lo: i64,
    idler_n: usize,
    weights: Vec<f64>,
}

impl PairHistogram {
    fn new(signal_range: (i64, i64), idler_range: (i64, i64)) -> Self {
        let signal_n = (signal_range.1 - signal_range.0 + 1) as usize;
        let idler_n = (idler_range.1 - idler_range.0 + 1) as usize;
        PairHistogram {
            signal_lo: signal_range.0,
            idler_lo: idler_range.0,
            idler_n,
            weights: vec![0.0; signal_n * idler_n],
        }
    }

    fn add(&mut self, signal_bin: i64, idler_bin: i64, weight: f64) {
        let a = (signal_bin - self.signal_lo).clamp(0, i64::MAX) as usize;
        let b = (idler_bin - self.idler_lo).clamp(0, i64::MAX) as usize;
        let idx = (a * self.idler_n + b).min(self.weights.len() - 1);
        self.weights[idx] += weight;
    }

    fn merge(&mut self, other: &PairHistogram) {
        debug_assert_eq!(self.weights.len(), other.weights.len());
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
    }

    /// (heaviest weight, its pair, total weight); first index wins ties.
    fn dominant(&self) -> (f64, (i64, i64), f64) {
        let mut best = 0usize;
        let mut total = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            total += w;
            if w > self.weights[best] {
                best = i;
            }
        }
        let a = (best / self.idler_n) as i64 + self.signal_lo;
        let b = (best % self.idler_n) as i64 + self.idler_lo;
        (self.weights[best], (a, b), total)
    }
}

fn bin_range(grid: &[f64], center: f64, fsr: f64) -> (i64, i64) {
    let first = pair_bin(grid[0], center, fsr);
    let last = pair_bin(grid[grid.len() - 1], center, fsr);
    (first.min(last), first.max(last))
}

/// Mask-aware comb-pair histogram of the squared amplitude.
fn pair_histogram(js: &JointSpectrum) -> Result<PairHistogram> {
    let op = &js.operating;
    let mut hist = PairHistogram::new(
        bin_range(&js.signal_grid, op.signal_center, js.signal_fsr),
        bin_range(&js.idler_grid, op.idler_center, js.idler_fsr),
    );
    let mut kept = false;
    match &js.data {
        JsaData::Grid {
            amplitude,
            filter_mask,
        } => {
            let n_i = js.idler_grid.len();
            let idler_bins: Vec<i64> = js
                .idler_grid
                .iter()
                .map(|&nu| pair_bin(nu, op.idler_center, js.idler_fsr))
                .collect();
            for (a, &nu_s) in js.signal_grid.iter().enumerate() {
                let s_bin = pair_bin(nu_s, op.signal_center, js.signal_fsr);
                let row = &amplitude[a * n_i..(a + 1) * n_i];
                let mask = &filter_mask[a * n_i..(a + 1) * n_i];
                for b in 0..n_i {
                    if mask[b] {
                        kept = true;
                        hist.add(s_bin, idler_bins[b], row[b].norm_sqr());
                    }
                }
            }
        }
        JsaData::Line {
            amplitude,
            filter_mask,
        } => {
            for (k, z) in amplitude.iter().enumerate() {
                if filter_mask[k] {
                    kept = true;
                    hist.add(
                        pair_bin(js.signal_grid[k], op.signal_center, js.signal_fsr),
                        pair_bin(js.idler_grid[k], op.idler_center, js.idler_fsr),
                        z.norm_sqr(),
                    );
                }
            }
        }
    }
    if !kept {
        return Err(Error::EmptyMask);
    }
    Ok(hist)
}

/// Share of the filtered squared amplitude carried by the heaviest comb pair.
pub fn mode_excitation_probability(js: &JointSpectrum) -> Result<f64> {
    let (heaviest, _, total) = pair_histogram(js)?.dominant();
    if total <= 0.0 {
        return Err(Error::EmptyMask);
    }
    Ok(heaviest / total)
}

/// Participation Schmidt number of a magnitude matrix: with singular values
/// s_n and normalized weights l_n = s_n^2 / sum s^2, K = 1 / sum l_n^2.
pub fn schmidt_from_magnitude(magnitude: &DMatrix<f64>) -> Result<f64> {
    if magnitude.nrows() < 4 || magnitude.ncols() < 4 {
        return Err(Error::RegionTooSmall {
            rows: magnitude.nrows(),
            cols: magnitude.ncols(),
        });
    }
    let sv = nalgebra::linalg::SVD::new_unordered(magnitude.clone(), false, false)
        .singular_values;
    let sum2: f64 = sv.iter().map(|s| s * s).sum();
    let sum4: f64 = sv.iter().map(|s| s.powi(4)).sum();
    if !(sum4 > 0.0) {
        return Err(Error::Config("decomposition region carries no weight".into()));
    }
    Ok(sum2 * sum2 / sum4)
}

/// Contiguous index run where the comb-pair bin equals `want`.
fn bin_run(grid: &[f64], center: f64, fsr: f64, want: i64) -> (usize, usize) {
    let mut first = grid.len();
    let mut last = 0usize;
    for (i, &nu) in grid.iter().enumerate() {
        if pair_bin(nu, center, fsr) == want {
            if first == grid.len() {
                first = i;
            }
            last = i;
        }
    }
    (first, last)
}

/// Schmidt number of the selected region of the stored amplitude.
///
/// Grid data is decomposed by singular values of the magnitude matrix; line
/// data yields the sampling-defined participation ratio of the squared
/// amplitudes, which grows without bound as the sampling refines.
pub fn schmidt_number(js: &JointSpectrum, mode: SchmidtMode) -> Result<f64> {
    match &js.data {
        JsaData::Grid {
            amplitude,
            filter_mask,
        } => {
            let n_i = js.idler_grid.len();
            let (rows, cols) = match mode {
                SchmidtMode::DominantModeOnly => {
                    let (_, (s_bin, i_bin), _) = pair_histogram(js)?.dominant();
                    let rows = bin_run(
                        &js.signal_grid,
                        js.operating.signal_center,
                        js.signal_fsr,
                        s_bin,
                    );
                    let cols = bin_run(
                        &js.idler_grid,
                        js.operating.idler_center,
                        js.idler_fsr,
                        i_bin,
                    );
                    (rows, cols)
                }
                SchmidtMode::FullFiltered => {
                    let mut r = (js.signal_grid.len(), 0usize);
                    let mut c = (n_i, 0usize);
                    for a in 0..js.signal_grid.len() {
                        for b in 0..n_i {
                            if filter_mask[a * n_i + b] {
                                r = (r.0.min(a), r.1.max(a));
                                c = (c.0.min(b), c.1.max(b));
                            }
                        }
                    }
                    if r.0 > r.1 {
                        return Err(Error::EmptyMask);
                    }
                    (r, c)
                }
            };
            if rows.0 > rows.1 || cols.0 > cols.1 {
                return Err(Error::EmptyMask);
            }
            let magnitude = DMatrix::from_fn(
                rows.1 - rows.0 + 1,
                cols.1 - cols.0 + 1,
                |r, c| {
                    let idx = (rows.0 + r) * n_i + (cols.0 + c);
                    if filter_mask[idx] {
                        amplitude[idx].norm()
                    } else {
                        0.0
                    }
                },
            );
            schmidt_from_magnitude(&magnitude)
        }
        JsaData::Line {
            amplitude,
            filter_mask,
        } => {
            let selected: Vec<f64> = match mode {
                SchmidtMode::DominantModeOnly => {
                    let (_, pair, _) = pair_histogram(js)?.dominant();
                    amplitude
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| {
                            filter_mask[k]
                                && pair_bin(
                                    js.signal_grid[k],
                                    js.operating.signal_center,
                                    js.signal_fsr,
                                ) == pair.0
                                && pair_bin(
                                    js.idler_grid[k],
                                    js.operating.idler_center,
                                    js.idler_fsr,
                                ) == pair.1
                        })
                        .map(|(_, z)| z.norm_sqr())
                        .collect()
                }
                SchmidtMode::FullFiltered => amplitude
                    .iter()
                    .zip(filter_mask)
                    .filter(|&(_, &m)| m)
                    .map(|(z, _)| z.norm_sqr())
                    .collect(),
            };
            if selected.len() < 4 {
                return Err(Error::RegionTooSmall {
                    rows: selected.len(),
                    cols: 1,
                });
            }
            let sum: f64 = selected.iter().sum();
            let sum2: f64 = selected.iter().map(|w| w * w).sum();
            if !(sum2 > 0.0) {
                return Err(Error::Config("decomposition region carries no weight".into()));
            }
            Ok(sum * sum / sum2)
        }
    }
}

/// Schmidt number of the double-Lorentzian pair line; depends only on the
/// ratio of the two cavity linewidths.
fn cascade_schmidt(signal_linewidth: f64, idler_linewidth: f64) -> Result<f64> {
    if !signal_linewidth.is_finite() {
        return Err(Error::DegenerateCavity {
            pol: Polarization::Ordinary,
        });
    }
    if !idler_linewidth.is_finite() {
        return Err(Error::DegenerateCavity {
            pol: Polarization::Extraordinary,
        });
    }
    let sum = signal_linewidth + idler_linewidth;
    Ok(sum * sum / (2.0 * signal_linewidth * idler_linewidth))
}

/// Purity bookkeeping of a built joint spectrum: M from the comb-pair
/// histogram, K from the dominant pair (grid) or the resolution-independent
/// linewidth cascade (line), S = 1/K, P = M S.
pub fn purity_report(js: &JointSpectrum) -> Result<PurityReport> {
    let (heaviest, pair, total) = pair_histogram(js)?.dominant();
    if total <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let mode_excitation = heaviest / total;
    let schmidt = match &js.data {
        JsaData::Grid { .. } => schmidt_number(js, SchmidtMode::DominantModeOnly)?,
        JsaData::Line { .. } => cascade_schmidt(js.signal_linewidth, js.idler_linewidth)?,
    };
    let spectral_purity = 1.0 / schmidt;
    Ok(PurityReport {
        mode_excitation,
        schmidt_number: schmidt,
        spectral_purity,
        total_purity: mode_excitation * spectral_purity,
        dominant_mode: (
            js.operating.signal_center + pair.0 as f64 * js.signal_fsr,
            js.operating.idler_center + pair.1 as f64 * js.idler_fsr,
        ),
    })
}

/// Pump-adapted analysis windows around the anchored comb pair.
///
/// Comb pairs walk off the pump ridge by one FSR difference per index, so
/// pairs beyond 2 sigma / |FSR_s - FSR_i| carry negligible pump amplitude;
/// the window covers them plus a safety margin. A monochromatic pump gets the
/// fixed line half-window instead.
pub fn recommended_windows(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
) -> Result<(OperatingPoint, (f64, f64), (f64, f64))> {
    spec.validate()?;
    pump.validate()?;
    let op = OperatingPoint::anchor(spec, pump.central_frequency, temperature)?;
    let fsr_s =
        free_spectral_range(spec, Polarization::Ordinary, op.signal_center, temperature)?;
    let fsr_i =
        free_spectral_range(spec, Polarization::Extraordinary, op.idler_center, temperature)?;
    let (half_s, half_i) = match pump.lineshape {
        PumpLineshape::Monochromatic => {
            (LINE_HALF_FSRS * fsr_s, LINE_HALF_FSRS * fsr_s)
        }
        PumpLineshape::Gaussian => {
            let walkoff = (fsr_s - fsr_i).abs();
            let pairs = 2.0 * pump.bandwidth_fwhm / walkoff;
            if !pairs.is_finite() || pairs > MAX_WINDOW_PAIRS as f64 {
                return Err(Error::Config(format!(
                    "pump bandwidth spans more than {} comb pairs of walk-off; \
                     the pair window is unbounded",
                    MAX_WINDOW_PAIRS
                )));
            }
            let m_max = (pairs.ceil() as usize).max(1) as f64;
            (
                (m_max + WINDOW_MARGIN_FSRS) * fsr_s,
                (m_max + WINDOW_MARGIN_FSRS) * fsr_i,
            )
        }
    };
    Ok((
        op,
        (op.signal_center - half_s, op.signal_center + half_s),
        (op.idler_center - half_i, op.idler_center + half_i),
    ))
}

/// Decomposition grid for one comb-pair cell, clipped to the resonance core
/// when the pump ridge forces an oversized grid.
fn cell_schmidt(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
    cell_center: (f64, f64),
    fsr: (f64, f64),
    linewidth: (f64, f64),
) -> Result<f64> {
    if pump.lineshape != PumpLineshape::Gaussian {
        return Err(Error::Config(
            "the cell decomposition needs a finite pump bandwidth; \
             monochromatic pumps use the linewidth cascade"
                .into(),
        ));
    }
    let step = default_step(linewidth.0, linewidth.1).ok_or_else(|| Error::Config(
        "both resonators are degenerate; the cell decomposition is undefined".into(),
    ))?;
    let kstep = step.min(pump.bandwidth_fwhm / SAMPLES_PER_PUMP_BANDWIDTH);
    let mut half_s = fsr.0 / 2.0;
    let mut half_i = fsr.1 / 2.0;
    let mut n_s = axis_points(fsr.0, kstep);
    let mut n_i = axis_points(fsr.1, kstep);
    if n_s.max(n_i) > MAX_DECOMP_POINTS {
        half_s = half_s.min(DECOMP_CLIP_LINEWIDTHS * linewidth.0);
        half_i = half_i.min(DECOMP_CLIP_LINEWIDTHS * linewidth.1);
        n_s = axis_points(2.0 * half_s, kstep);
        n_i = axis_points(2.0 * half_i, kstep);
    }
    let signal_grid = linspace(cell_center.0 - half_s, cell_center.0 + half_s, n_s);
    let idler_grid = linspace(cell_center.1 - half_i, cell_center.1 + half_i, n_i);
    let (beta_idler, airy_idler) = idler_tables(spec, temperature, &idler_grid)?;
    let kernel = RowKernel::new(
        spec,
        pump,
        temperature,
        cell_center.0 + cell_center.1,
        &idler_grid,
        &beta_idler,
        &airy_idler,
    );
    let mut rows = vec![0.0f64; n_s * n_i];
    rows.par_chunks_mut(n_i)
        .zip(signal_grid.par_iter())
        .try_for_each(|(out, &nu_s)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); out.len()];
            kernel.row_into(nu_s, &mut buf)?;
            for (o, z) in out.iter_mut().zip(&buf) {
                *o = z.norm();
            }
            Ok(())
        })?;
    let magnitude = DMatrix::from_fn(n_s, n_i, |r, c| rows[r * n_i + c]);
    schmidt_from_magnitude(&magnitude)
}

/// Schmidt number of the anchored comb pair's cell under the given pump.
pub fn dominant_cell_schmidt(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
) -> Result<f64> {
    spec.validate()?;
    pump.validate()?;
    let op = OperatingPoint::anchor(spec, pump.central_frequency, temperature)?;
    let fsr_s =
        free_spectral_range(spec, Polarization::Ordinary, op.signal_center, temperature)?;
    let fsr_i =
        free_spectral_range(spec, Polarization::Extraordinary, op.idler_center, temperature)?;
    let lw_s =
        linewidth_or_infinite(spec, Polarization::Ordinary, op.signal_center, temperature)?;
    let lw_i =
        linewidth_or_infinite(spec, Polarization::Extraordinary, op.idler_center, temperature)?;
    cell_schmidt(
        spec,
        pump,
        temperature,
        (op.signal_center, op.idler_center),
        (fsr_s, fsr_i),
        (lw_s, lw_i),
    )
}

/// Streamed dominant-pair statistics over the pump-adapted window.
pub(crate) struct DominantPairStats {
    pub fsr: (f64, f64),
    pub linewidth: (f64, f64),
    pub mode_excitation: f64,
    /// Comb centers of the heaviest pair.
    pub cell_center: (f64, f64),
}

/// Streams the comb-pair histogram row by row so the full grid is never
/// materialized. A cap on the idler half-window implements cluster rejection
/// in pair space: pairs whose idler line falls outside the cap never enter
/// the histogram; a cap wider than the pump-adapted window changes nothing.
pub(crate) fn streamed_dominant_pair(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
    idler_half_cap: Option<f64>,
) -> Result<DominantPairStats> {
    if pump.lineshape != PumpLineshape::Gaussian {
        return Err(Error::Config(
            "the streamed pair histogram needs a finite pump bandwidth".into(),
        ));
    }
    let (op, signal_window, mut idler_window) = recommended_windows(spec, pump, temperature)?;
    if let Some(cap) = idler_half_cap {
        idler_window.0 = idler_window.0.max(op.idler_center - cap);
        idler_window.1 = idler_window.1.min(op.idler_center + cap);
    }
    let fsr_s =
        free_spectral_range(spec, Polarization::Ordinary, op.signal_center, temperature)?;
    let fsr_i = free_spectral_range(
        spec,
        Polarization::Extraordinary,
        op.idler_center,
        temperature,
    )?;
    let lw_s =
        linewidth_or_infinite(spec, Polarization::Ordinary, op.signal_center, temperature)?;
    let lw_i = linewidth_or_infinite(
        spec,
        Polarization::Extraordinary,
        op.idler_center,
        temperature,
    )?;
    let step = default_step(lw_s, lw_i).ok_or_else(|| Error::Config(
        "both resonators are degenerate; the pair histogram is undefined".into(),
    ))?;
    let n_s = axis_points(signal_window.1 - signal_window.0, step);
    let n_i = axis_points(idler_window.1 - idler_window.0, step);
    let signal_grid = linspace(signal_window.0, signal_window.1, n_s);
    let idler_grid = linspace(idler_window.0, idler_window.1, n_i);
    let (beta_idler, airy_idler) = idler_tables(spec, temperature, &idler_grid)?;
    let kernel = RowKernel::new(
        spec,
        pump,
        temperature,
        op.pump_frequency,
        &idler_grid,
        &beta_idler,
        &airy_idler,
    );
    let idler_bins: Vec<i64> = idler_grid
        .iter()
        .map(|&nu| pair_bin(nu, op.idler_center, fsr_i))
        .collect();
    let signal_range = bin_range(&signal_grid, op.signal_center, fsr_s);
    let idler_range = bin_range(&idler_grid, op.idler_center, fsr_i);
    // Row-chunked streaming: each chunk bins its rows locally and the
    // partial histograms merge in chunk order, so totals do not depend on
    // the thread schedule.
    let partials: Vec<PairHistogram> = signal_grid
        .par_chunks(256)
        .map(|rows| {
            let mut hist = PairHistogram::new(signal_range, idler_range);
            let mut buf = vec![Complex64::new(0.0, 0.0); n_i];
            for &nu_s in rows {
                kernel.row_into(nu_s, &mut buf)?;
                let s_bin = pair_bin(nu_s, op.signal_center, fsr_s);
                for (b, z) in buf.iter().enumerate() {
                    hist.add(s_bin, idler_bins[b], z.norm_sqr());
                }
            }
            Ok(hist)
        })
        .collect::<Result<_>>()?;
    let mut hist = PairHistogram::new(signal_range, idler_range);
    for p in &partials {
        hist.merge(p);
    }
    let (heaviest, pair, total) = hist.dominant();
    if total <= 0.0 {
        return Err(Error::EmptyMask);
    }
    Ok(DominantPairStats {
        fsr: (fsr_s, fsr_i),
        linewidth: (lw_s, lw_i),
        mode_excitation: heaviest / total,
        cell_center: (
            op.signal_center + pair.0 as f64 * fsr_s,
            op.idler_center + pair.1 as f64 * fsr_i,
        ),
    })
}

/// Purity report at the anchored operating point over the pump-adapted
/// window, streaming the pair histogram row by row so the full grid is never
/// materialized; only the dominant pair's cell is densified for the
/// decomposition.
pub fn purity_report_at(
    spec: &SourceSpec,
    pump: &PumpSpec,
    temperature: f64,
) -> Result<PurityReport> {
    match pump.lineshape {
        PumpLineshape::Monochromatic => {
            let (_, signal_window, idler_window) =
                recommended_windows(spec, pump, temperature)?;
            let js = build_jsa(spec, pump, temperature, signal_window, idler_window, None)?;
            purity_report(&js)
        }
        PumpLineshape::Gaussian => {
            let stats = streamed_dominant_pair(spec, pump, temperature, None)?;
            let schmidt = cell_schmidt(
                spec,
                pump,
                temperature,
                stats.cell_center,
                stats.fsr,
                stats.linewidth,
            )?;
            let spectral_purity = 1.0 / schmidt;
            Ok(PurityReport {
                mode_excitation: stats.mode_excitation,
                schmidt_number: schmidt,
                spectral_purity,
                total_purity: stats.mode_excitation * spectral_purity,
                dominant_mode: stats.cell_center,
            })
        }
    }
}

/// Top-hat idler filter centered on the predominant cluster.
///
/// The cluster is found on the idler marginal, mirrored onto partner signal
/// frequencies so the cluster machinery sees its usual axis; windows too
/// narrow to resolve cluster structure fall back to the marginal's tallest
/// sample. The default width is the closed-form cluster spacing. A filter at
/// least as wide as the idler extent admits every cell; a strictly wider one
/// is an error.
pub fn apply_cluster_filter(
    mut js: JointSpectrum,
    filter_fwhm: Option<f64>,
) -> Result<JointSpectrum> {
    let pump = js.operating.pump_frequency;
    let temperature = js.temperature;
    // Marginal over the idler axis as a function of partner signal frequency.
    let (partner, marginal): (Vec<f64>, Vec<f64>) = match &js.data {
        JsaData::Grid { amplitude, .. } => {
            let n_i = js.idler_grid.len();
            let mut m = vec![0.0f64; n_i];
            for row in amplitude.chunks(n_i) {
                for (b, z) in row.iter().enumerate() {
                    m[b] += z.norm_sqr();
                }
            }
            // Idler ascending maps to partner descending; mirror both.
            let partner: Vec<f64> = js.idler_grid.iter().rev().map(|&nu| pump - nu).collect();
            m.reverse();
            (partner, m)
        }
        JsaData::Line { amplitude, .. } => (
            js.signal_grid.clone(),
            amplitude.iter().map(|z| z.norm_sqr()).collect(),
        ),
    };
    let peak = marginal.iter().cloned().fold(0.0f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyMask);
    }
    let values: Vec<f64> = marginal.iter().map(|v| v / peak).collect();
    let center_idler = match detect_clusters(
        &SignalSpectrum {
            frequencies: partner.clone(),
            values: values.clone(),
            pump_frequency: pump,
            temperature,
        },
        &js.spec,
    ) {
        Ok(report) => pump - report.clusters[report.central_cluster_index].center,
        Err(Error::WindowTooNarrow { .. }) => {
            let mut best = 0usize;
            for (i, v) in values.iter().enumerate() {
                if *v > values[best] {
                    best = i;
                }
            }
            pump - partner[best]
        }
        Err(e) => return Err(e),
    };

    let width = match filter_fwhm {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => {
            return Err(Error::OutOfRange {
                quantity: "filter width",
                value: w,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "Hz",
            })
        }
        None => {
            let point =
                PhasematchPoint::for_spec(&js.spec, pump, js.operating.signal_center, temperature)?;
            cluster_spacing_estimate(&js.spec, &point)?
        }
    };
    let span = partner[partner.len() - 1] - partner[0];
    if width > span {
        return Err(Error::FilterTooWide { width, window: span });
    }
    let admits = |nu_i: f64| width >= span || (nu_i - center_idler).abs() <= width / 2.0;

    let mut kept = false;
    match &mut js.data {
        JsaData::Grid { filter_mask, .. } => {
            let n_i = js.idler_grid.len();
            let col_ok: Vec<bool> = js.idler_grid.iter().map(|&nu| admits(nu)).collect();
            kept = col_ok.iter().any(|&ok| ok);
            for row in filter_mask.chunks_mut(n_i) {
                row.copy_from_slice(&col_ok);
            }
        }
        JsaData::Line { filter_mask, .. } => {
            for (k, m) in filter_mask.iter_mut().enumerate() {
                *m = admits(js.idler_grid[k]);
                kept |= *m;
            }
        }
    }
    if !kept {
        return Err(Error::EmptyMask);
    }
    Ok(js)
}

/// Schmidt number and spectral purity versus pump bandwidth for a set of
/// resonator geometries; both output couplers take each case's reflectivity.
/// An empty case list evaluates the spec itself.
pub fn purity_vs_pump_bandwidth(
    spec: &SourceSpec,
    pump_frequency: f64,
    temperature: f64,
    sigma_list: &[f64],
    cases: &[GeometryCase],
) -> Result<Vec<PumpBandwidthTable>> {
    if sigma_list.is_empty() {
        return Err(Error::Config("empty pump bandwidth list".into()));
    }
    for pair in sigma_list.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::Config(
                "pump bandwidth list must be strictly ascending".into(),
            ));
        }
    }
    if !(sigma_list[0] > 0.0) {
        return Err(Error::Config("pump bandwidths must be positive".into()));
    }
    let base = vec![GeometryCase {
        label: "base".into(),
        length: spec.length_l0,
        mirror_r2: spec.mirrors_signal.r2,
    }];
    let cases = if cases.is_empty() { &base } else { cases };
    let mut tables = Vec::with_capacity(cases.len());
    for case in cases {
        let mut geometry = spec.clone();
        geometry.length_l0 = case.length;
        geometry.mirrors_signal.r2 = case.mirror_r2;
        geometry.mirrors_idler.r2 = case.mirror_r2;
        geometry.validate()?;
        let mut rows = Vec::with_capacity(sigma_list.len());
        let mut crossover = None;
        for &sigma in sigma_list {
            let pump = PumpSpec::gaussian(pump_frequency, sigma)?;
            let schmidt = dominant_cell_schmidt(&geometry, &pump, temperature)?;
            let spectral_purity = 1.0 / schmidt;
            if crossover.is_none() && spectral_purity >= CROSSOVER_PURITY {
                crossover = Some(sigma);
            }
            rows.push(PumpBandwidthRow {
                pump_bandwidth: sigma,
                schmidt_number: schmidt,
                spectral_purity,
            });
        }
        tables.push(PumpBandwidthTable {
            label: case.label.clone(),
            rows,
            crossover_bandwidth: crossover,
        });
    }
    Ok(tables)
}
