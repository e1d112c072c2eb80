//! Fabry-Perot response of the coated waveguide, one comb per polarization:
//! complex Airy amplitude, free spectral range, finesse, linewidth, and
//! resonance locations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{
    group_index, refractive_index, sample_length, DispersionModel, Polarization, ThermalModel,
    SPEED_OF_LIGHT,
};
use crate::error::{Error, Result};

/// Power reflectivities of the two facets, each in [0, 1).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MirrorPair {
    pub r1: f64,
    pub r2: f64,
}

impl MirrorPair {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        for (name, r) in [("R1", r1), ("R2", r2)] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::OutOfRange {
                    quantity: if name == "R1" {
                        "mirror reflectivity R1"
                    } else {
                        "mirror reflectivity R2"
                    },
                    value: r,
                    min: 0.0,
                    max: 1.0,
                    unit: "",
                });
            }
        }
        Ok(MirrorPair { r1, r2 })
    }
}

/// Complete physical description of one source: geometry at the reference
/// temperature, coatings, propagation losses, and the material models.
///
/// The signal photon is the Ordinary mode, the idler the Extraordinary mode;
/// `mirrors` and `loss` resolve polarization to the matching pair.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    /// Waveguide length in m at `reference_temperature`.
    pub length_l0: f64,
    /// Poling period in m at `reference_temperature`.
    pub poling_period: f64,
    pub mirrors_signal: MirrorPair,
    pub mirrors_idler: MirrorPair,
    /// Power propagation loss in dB/cm.
    pub loss_signal_db_per_cm: f64,
    pub loss_idler_db_per_cm: f64,
    /// degC at which length and poling period are quoted.
    pub reference_temperature: f64,
    pub dispersion: DispersionModel,
    pub thermal: ThermalModel,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length_l0 <= 0.0 {
            return Err(Error::OutOfRange {
                quantity: "length_L0",
                value: self.length_l0,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "m",
            });
        }
        if self.poling_period <= 0.0 {
            return Err(Error::OutOfRange {
                quantity: "poling_period",
                value: self.poling_period,
                min: f64::MIN_POSITIVE,
                max: f64::INFINITY,
                unit: "m",
            });
        }
        MirrorPair::new(self.mirrors_signal.r1, self.mirrors_signal.r2)?;
        MirrorPair::new(self.mirrors_idler.r1, self.mirrors_idler.r2)?;
        for loss in [self.loss_signal_db_per_cm, self.loss_idler_db_per_cm] {
            if loss < 0.0 {
                return Err(Error::OutOfRange {
                    quantity: "propagation loss",
                    value: loss,
                    min: 0.0,
                    max: f64::INFINITY,
                    unit: "dB/cm",
                });
            }
        }
        Ok(())
    }

    pub fn mirrors(&self, pol: Polarization) -> MirrorPair {
        match pol {
            Polarization::Ordinary => self.mirrors_signal,
            Polarization::Extraordinary => self.mirrors_idler,
        }
    }

    pub fn loss_db_per_cm(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Ordinary => self.loss_signal_db_per_cm,
            Polarization::Extraordinary => self.loss_idler_db_per_cm,
        }
    }

    /// Power attenuation coefficient in 1/m: (dB/cm) * ln(10)/10 * 100.
    pub fn attenuation(&self, pol: Polarization) -> f64 {
        self.loss_db_per_cm(pol) * std::f64::consts::LN_10 / 10.0 * 100.0
    }

    /// Thermally expanded length L(T) in m.
    pub fn length_at(&self, temperature: f64) -> f64 {
        sample_length(&self.thermal, self.length_l0, temperature)
    }

    /// Thermally expanded poling period in m (grating lives in the crystal).
    pub fn poling_period_at(&self, temperature: f64) -> f64 {
        self.poling_period * self.thermal.expansion_factor(temperature)
    }

    /// Round-trip intensity survival rho = sqrt(R1 R2) e^(-alpha L(T)).
    pub fn round_trip_survival(&self, pol: Polarization, temperature: f64) -> f64 {
        let m = self.mirrors(pol);
        (m.r1 * m.r2).sqrt() * (-self.attenuation(pol) * self.length_at(temperature)).exp()
    }
}

/// Round-trip phase phi = 4 pi nu n(nu, T) L(T) / c in rad (unwrapped).
pub(crate) fn round_trip_phase_cycles(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    let n = refractive_index(&spec.dispersion, pol, SPEED_OF_LIGHT / frequency, temperature)?;
    Ok(2.0 * frequency * n * spec.length_at(temperature) / SPEED_OF_LIGHT)
}

/// Resonances of one polarization inside a frequency window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceComb {
    pub polarization: Polarization,
    /// Strictly increasing resonance centers in Hz.
    pub centers: Vec<f64>,
    /// Local FSR in Hz at the comb center.
    pub fsr: f64,
    /// FWHM linewidth in Hz; infinite when finesse is zero.
    pub linewidth_fwhm: f64,
    pub finesse: f64,
}

impl ResonanceComb {
    /// Center closest to a given frequency.
    pub fn nearest_center(&self, frequency: f64) -> f64 {
        debug_assert!(!self.centers.is_empty());
        let idx = self.nearest_index(frequency);
        self.centers[idx]
    }

    pub fn nearest_index(&self, frequency: f64) -> usize {
        let i = self.centers.partition_point(|&c| c < frequency);
        if i == 0 {
            return 0;
        }
        if i >= self.centers.len() {
            return self.centers.len() - 1;
        }
        if (frequency - self.centers[i - 1]) <= (self.centers[i] - frequency) {
            i - 1
        } else {
            i
        }
    }
}

/// Complex single-pass cavity amplitude
/// A = sqrt((1-R1)(1-R2)) e^(-alpha L/2) / (1 - sqrt(R1 R2) e^(-alpha L) e^(i phi)).
pub fn airy_amplitude(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<Complex64> {
    if frequency <= 0.0 {
        return Err(Error::OutOfRange {
            quantity: "frequency",
            value: frequency,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    let m = spec.mirrors(pol);
    let alpha = spec.attenuation(pol);
    let length = spec.length_at(temperature);
    let phi = 2.0 * std::f64::consts::PI
        * round_trip_phase_cycles(spec, pol, frequency, temperature)?;
    let numerator = ((1.0 - m.r1) * (1.0 - m.r2)).sqrt() * (-alpha * length / 2.0).exp();
    let rho = (m.r1 * m.r2).sqrt() * (-alpha * length).exp();
    let denominator = Complex64::new(1.0, 0.0) - rho * Complex64::from_polar(1.0, phi);
    Ok(numerator / denominator)
}

/// FSR = c / (2 n_g L(T)) in Hz, with the group index at c/frequency.
pub fn free_spectral_range(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    let ng = group_index(&spec.dispersion, pol, SPEED_OF_LIGHT / frequency, temperature)?;
    Ok(SPEED_OF_LIGHT / (2.0 * ng * spec.length_at(temperature)))
}

/// F = pi sqrt(rho) / (1 - rho) with rho = sqrt(R1 R2) e^(-alpha L(T)).
pub fn finesse(spec: &SourceSpec, pol: Polarization, temperature: f64) -> f64 {
    let rho = spec.round_trip_survival(pol, temperature);
    std::f64::consts::PI * rho.sqrt() / (1.0 - rho)
}

/// FWHM linewidth = FSR / finesse in Hz.
pub fn resonance_linewidth(
    spec: &SourceSpec,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    let f = finesse(spec, pol, temperature);
    if f <= 0.0 {
        return Err(Error::DegenerateCavity { pol });
    }
    Ok(free_spectral_range(spec, pol, frequency, temperature)? / f)
}

/// Wrapped round-trip phase residual in rad at a comb-center candidate.
const PHASE_TOLERANCE_RAD: f64 = 1e-6;
const NEWTON_MAX_ITERATIONS: usize = 50;
/// Seed grid spacing as a fraction of the FSR; guarantees one root per cell.
const SEED_FRACTION: f64 = 8.0;

/// All resonance centers inside the window, each satisfying
/// |phi mod 2pi| < 1e-6 rad, refined by bracketed Newton iteration with
/// d(phi)/d(nu) = 4 pi n_g L / c.
pub fn find_resonances(
    spec: &SourceSpec,
    pol: Polarization,
    frequency_window: (f64, f64),
    temperature: f64,
) -> Result<ResonanceComb> {
    let (lo, hi) = frequency_window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::OutOfRange {
            quantity: "frequency window",
            value: hi - lo,
            min: 0.0,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    let mid = 0.5 * (lo + hi);
    let fsr_mid = free_spectral_range(spec, pol, mid, temperature)?;
    if hi - lo < fsr_mid {
        return Err(Error::WindowTooNarrow {
            what: "resonance search",
            width: hi - lo,
            need: fsr_mid,
            unit: "Hz",
        });
    }

    // Seed grid at FSR/8: the phase gains 1/8 cycle per cell, so every
    // integer-cycle crossing is bracketed by one cell.
    let step = fsr_mid / SEED_FRACTION;
    let n_cells = ((hi - lo) / step).ceil() as usize;
    let mut grid_nu = Vec::with_capacity(n_cells + 1);
    let mut grid_cycles = Vec::with_capacity(n_cells + 1);
    for k in 0..=n_cells {
        let nu = if k == n_cells { hi } else { lo + step * k as f64 };
        grid_nu.push(nu);
        grid_cycles.push(round_trip_phase_cycles(spec, pol, nu, temperature)?);
    }

    let length = spec.length_at(temperature);
    let mut centers = Vec::new();
    for cell in 0..n_cells {
        let (ga, gb) = (grid_cycles[cell], grid_cycles[cell + 1]);
        let (mut a, mut b) = (grid_nu[cell], grid_nu[cell + 1]);
        // Phase is strictly increasing in frequency.
        let m_first = ga.floor() + 1.0;
        let mut m = m_first;
        while m <= gb {
            // Newton on h(nu) = cycles(nu) - m, bracket-safeguarded.
            let mut nu = a + (b - a) * (m - ga) / (gb - ga);
            let seed = nu;
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITERATIONS {
                let h = round_trip_phase_cycles(spec, pol, nu, temperature)? - m;
                if h.abs() * 2.0 * std::f64::consts::PI < PHASE_TOLERANCE_RAD {
                    converged = true;
                    break;
                }
                if h > 0.0 {
                    b = nu;
                } else {
                    a = nu;
                }
                let ng = group_index(
                    &spec.dispersion,
                    pol,
                    SPEED_OF_LIGHT / nu,
                    temperature,
                )?;
                let slope = 2.0 * ng * length / SPEED_OF_LIGHT;
                let next = nu - h / slope;
                nu = if next > a && next < b { next } else { 0.5 * (a + b) };
            }
            if !converged {
                return Err(Error::NoConvergence {
                    what: "resonance refinement",
                    iterations: NEWTON_MAX_ITERATIONS,
                    seed,
                });
            }
            if nu >= lo && nu <= hi {
                centers.push(nu);
            }
            m += 1.0;
            a = grid_nu[cell];
            b = grid_nu[cell + 1];
        }
    }
    centers.sort_by(|x, y| x.partial_cmp(y).unwrap());
    centers.dedup_by(|x, y| (*x - *y).abs() < 1.0);

    // Metadata evaluated at the found center nearest the window midpoint.
    let reference = centers
        .iter()
        .copied()
        .min_by(|x, y| (x - mid).abs().partial_cmp(&(y - mid).abs()).unwrap())
        .unwrap_or(mid);
    let fsr = free_spectral_range(spec, pol, reference, temperature)?;
    let f = finesse(spec, pol, temperature);
    let linewidth_fwhm = if f > 0.0 { fsr / f } else { f64::INFINITY };
    Ok(ResonanceComb {
        polarization: pol,
        centers,
        fsr,
        linewidth_fwhm,
        finesse: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Demonstrator geometry; poling period value is irrelevant to cavity ops.
    fn demo_spec() -> SourceSpec {
        SourceSpec {
            length_l0: 12.3e-3,
            poling_period: 4.54e-6,
            mirrors_signal: MirrorPair { r1: 0.99, r2: 0.98 },
            mirrors_idler: MirrorPair { r1: 0.99, r2: 0.98 },
            loss_signal_db_per_cm: 0.016,
            loss_idler_db_per_cm: 0.022,
            reference_temperature: 148.14,
            dispersion: DispersionModel::default_model().unwrap(),
            thermal: ThermalModel::new(1.5e-5, 148.14),
        }
    }

    fn constant_spec(n: f64, length: f64) -> SourceSpec {
        SourceSpec {
            length_l0: length,
            poling_period: 4.54e-6,
            mirrors_signal: MirrorPair { r1: 0.9, r2: 0.9 },
            mirrors_idler: MirrorPair { r1: 0.9, r2: 0.9 },
            loss_signal_db_per_cm: 0.0,
            loss_idler_db_per_cm: 0.0,
            reference_temperature: 50.0,
            dispersion: DispersionModel::constant(n, n),
            thermal: ThermalModel::new(1.5e-5, 50.0),
        }
    }

    const T_OP: f64 = 148.14;
    const NU_S: f64 = SPEED_OF_LIGHT / 890e-9;
    const NU_I: f64 = SPEED_OF_LIGHT / 1.3225698324022352e-6;

    #[test]
    fn lossless_mirrorless_cavity_is_transparent() {
        let mut spec = constant_spec(2.0, 7.5e-3);
        spec.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        for k in 0..5 {
            let nu = 200e12 + 1e9 * k as f64;
            let a = airy_amplitude(&spec, Polarization::Ordinary, nu, 50.0).unwrap();
            assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lossless_balanced_cavity_peaks_at_unity() {
        let spec = constant_spec(2.0, 7.5e-3);
        // Exact resonance of the constant-index comb: nu = m c / (2 n L).
        let fsr = SPEED_OF_LIGHT / (2.0 * 2.0 * 7.5e-3);
        let nu = 20_000.0 * fsr;
        let a = airy_amplitude(&spec, Polarization::Ordinary, nu, 50.0).unwrap();
        assert_abs_diff_eq!(a.norm_sqr(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn contrast_ratio_matches_closed_form() {
        // Dense scan over one FSR: max/min of |A|^2 equals ((1+rho)/(1-rho))^2.
        let spec = demo_spec();
        let pol = Polarization::Ordinary;
        let fsr = free_spectral_range(&spec, pol, NU_S, T_OP).unwrap();
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for k in 0..100_000 {
            let nu = NU_S + fsr * (k as f64) / 100_000.0;
            let v = airy_amplitude(&spec, pol, nu, T_OP).unwrap().norm_sqr();
            max = max.max(v);
            min = min.min(v);
        }
        let rho = spec.round_trip_survival(pol, T_OP);
        let expected = ((1.0 + rho) / (1.0 - rho)).powi(2);
        assert_relative_eq!(max / min, expected, max_relative = 1e-3);
    }

    #[test]
    fn demonstrator_comb_constants() {
        // Frozen reference values for the demonstrator at its setpoint.
        let spec = demo_spec();
        let fsr_s = free_spectral_range(&spec, Polarization::Ordinary, NU_S, T_OP).unwrap();
        let fsr_i = free_spectral_range(&spec, Polarization::Extraordinary, NU_I, T_OP).unwrap();
        assert_relative_eq!(fsr_s, 5.226351e9, max_relative = 1e-6);
        assert_relative_eq!(fsr_i, 5.545899e9, max_relative = 1e-6);
        assert_relative_eq!(fsr_i - fsr_s, 319.5484e6, max_relative = 1e-5);

        let f_s = finesse(&spec, Polarization::Ordinary, T_OP);
        let f_i = finesse(&spec, Polarization::Extraordinary, T_OP);
        assert_relative_eq!(f_s, 159.8098, max_relative = 1e-6);
        assert_relative_eq!(f_i, 147.0940, max_relative = 1e-6);

        let lw_s = resonance_linewidth(&spec, Polarization::Ordinary, NU_S, T_OP).unwrap();
        let lw_i = resonance_linewidth(&spec, Polarization::Extraordinary, NU_I, T_OP).unwrap();
        assert_relative_eq!(lw_s, 32.7036e6, max_relative = 1e-5);
        assert_relative_eq!(lw_i, 37.7031e6, max_relative = 1e-5);
    }

    #[test]
    fn linewidth_matches_numeric_fwhm() {
        // FSR/F linewidth vs half-maximum crossings of a dense |A|^2 scan.
        let spec = demo_spec();
        let pol = Polarization::Ordinary;
        let comb = find_resonances(&spec, pol, (NU_S - 8e9, NU_S + 8e9), T_OP).unwrap();
        let center = comb.nearest_center(NU_S);
        let lw = resonance_linewidth(&spec, pol, center, T_OP).unwrap();
        let peak = airy_amplitude(&spec, pol, center, T_OP).unwrap().norm_sqr();
        let half = peak / 2.0;
        let scan = |from: f64, step: f64| -> f64 {
            let mut nu = from;
            loop {
                nu += step;
                let v = airy_amplitude(&spec, pol, nu, T_OP).unwrap().norm_sqr();
                if v < half {
                    return nu;
                }
            }
        };
        let right = scan(center, lw / 400.0);
        let left = scan(center, -lw / 400.0);
        assert_relative_eq!(right - left, lw, max_relative = 1e-2);
    }

    #[test]
    fn closed_form_finesse() {
        let mut spec = constant_spec(2.25, 12.3e-3);
        spec.mirrors_signal = MirrorPair { r1: 0.98, r2: 0.98 };
        let f = finesse(&spec, Polarization::Ordinary, 50.0);
        assert_relative_eq!(
            f,
            std::f64::consts::PI * 0.98f64.sqrt() / 0.02,
            max_relative = 1e-12
        );

        spec.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        assert_eq!(finesse(&spec, Polarization::Ordinary, 50.0), 0.0);
        assert!(matches!(
            resonance_linewidth(&spec, Polarization::Ordinary, 200e12, 50.0),
            Err(Error::DegenerateCavity { .. })
        ));
    }

    #[test]
    fn fsr_closed_form_and_scaling() {
        let spec = constant_spec(2.25, 12.3e-3);
        let fsr = free_spectral_range(&spec, Polarization::Ordinary, 300e12, 50.0).unwrap();
        assert_relative_eq!(
            fsr,
            SPEED_OF_LIGHT / (2.0 * 2.25 * 12.3e-3),
            max_relative = 1e-9
        );
        let double = constant_spec(2.25, 24.6e-3);
        let fsr2 = free_spectral_range(&double, Polarization::Ordinary, 300e12, 50.0).unwrap();
        assert_relative_eq!(fsr, 2.0 * fsr2, max_relative = 1e-9);
    }

    #[test]
    fn analytic_comb_on_constant_model() {
        let spec = constant_spec(2.0, 7.5e-3);
        let comb =
            find_resonances(&spec, Polarization::Ordinary, (199.9e12, 200.1e12), 50.0).unwrap();
        let fsr = SPEED_OF_LIGHT / (2.0 * 2.0 * 7.5e-3);
        assert!(!comb.centers.is_empty());
        let expected = ((200.1e12 - 199.9e12) / fsr).floor();
        assert!((comb.centers.len() as f64 - expected).abs() <= 1.0);
        for c in &comb.centers {
            let m = c * 2.0 * 2.0 * 7.5e-3 / SPEED_OF_LIGHT;
            assert!(
                (m - m.round()).abs() * 2.0 * std::f64::consts::PI < 1e-6,
                "center off-integer: {m}"
            );
        }
        for pair in comb.centers.windows(2) {
            assert_relative_eq!(pair[1] - pair[0], fsr, max_relative = 1e-9);
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn demonstrator_comb_spacing_matches_fsr() {
        let spec = demo_spec();
        let comb =
            find_resonances(&spec, Polarization::Ordinary, (NU_S - 30e9, NU_S + 30e9), T_OP)
                .unwrap();
        assert!(comb.centers.len() >= 10);
        let fsr = free_spectral_range(&spec, Polarization::Ordinary, NU_S, T_OP).unwrap();
        for pair in comb.centers.windows(2) {
            let spacing = pair[1] - pair[0];
            assert!((spacing - fsr).abs() / fsr < 5e-3);
        }
        assert_relative_eq!(comb.linewidth_fwhm, comb.fsr / comb.finesse, max_relative = 1e-2);
    }

    #[test]
    fn airy_peaks_at_comb_centers() {
        // Grid maximum of |A| must sit within one grid step of a found center.
        let spec = demo_spec();
        let pol = Polarization::Extraordinary;
        let window = (NU_I - 9e9, NU_I + 9e9);
        let comb = find_resonances(&spec, pol, window, T_OP).unwrap();
        let n = 6000usize;
        let step = (window.1 - window.0) / n as f64;
        let mut best = (0.0f64, 0.0f64);
        for k in 0..=n {
            let nu = window.0 + step * k as f64;
            let v = airy_amplitude(&spec, pol, nu, T_OP).unwrap().norm();
            if v > best.1 {
                best = (nu, v);
            }
        }
        let nearest = comb.nearest_center(best.0);
        assert!((best.0 - nearest).abs() <= step);
    }

    #[test]
    fn airy_is_periodic_in_round_trip_phase() {
        let spec = constant_spec(2.0, 7.5e-3);
        let fsr = SPEED_OF_LIGHT / (2.0 * 2.0 * 7.5e-3);
        for k in 0..7 {
            let nu = 200e12 + fsr * 0.137 * k as f64;
            let a = airy_amplitude(&spec, Polarization::Ordinary, nu, 50.0).unwrap();
            let b = airy_amplitude(&spec, Polarization::Ordinary, nu + fsr, 50.0).unwrap();
            assert_abs_diff_eq!(a.norm(), b.norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn loss_degrades_finesse_and_widens_linewidth() {
        let mut spec = demo_spec();
        let mut prev_f = f64::INFINITY;
        let mut prev_lw = 0.0;
        for loss in [0.0, 0.016, 0.05, 0.2, 1.0] {
            spec.loss_signal_db_per_cm = loss;
            let f = finesse(&spec, Polarization::Ordinary, T_OP);
            let lw = resonance_linewidth(&spec, Polarization::Ordinary, NU_S, T_OP).unwrap();
            assert!(f < prev_f);
            assert!(lw > prev_lw);
            prev_f = f;
            prev_lw = lw;
        }
    }

    #[test]
    fn finesse_grows_as_exit_mirror_closes() {
        let mut spec = demo_spec();
        let mut prev = 0.0;
        for r2 in [0.5, 0.8, 0.95, 0.99, 0.999] {
            spec.mirrors_signal.r2 = r2;
            let f = finesse(&spec, Polarization::Ordinary, T_OP);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn narrow_window_is_rejected() {
        let spec = demo_spec();
        let err = find_resonances(&spec, Polarization::Ordinary, (NU_S, NU_S + 1e9), T_OP)
            .unwrap_err();
        assert!(matches!(err, Error::WindowTooNarrow { .. }));
    }

    #[test]
    fn mirror_pair_rejects_unit_reflectivity() {
        assert!(MirrorPair::new(1.0, 0.5).is_err());
        assert!(MirrorPair::new(-0.1, 0.5).is_err());
        assert!(MirrorPair::new(0.99, 0.98).is_ok());
    }
}
