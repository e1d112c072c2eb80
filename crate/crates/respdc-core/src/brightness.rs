//! Resonant-enhancement bookkeeping: clustering factor, photon-pair escape
//! probability, the total enhancement product, and spectral brightness
//! relative to a caller-supplied single-pass reference.

use serde::{Deserialize, Serialize};

use crate::cavity::{finesse, SourceSpec};
use crate::dispersion::{group_index, Polarization, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::phasematch::{cluster_spacing_estimate, PhasematchPoint};

/// Dimensionless enhancement bookkeeping of one source. The enhancement is a
/// proportionality, never an absolute pair rate; `relative_spectral_brightness`
/// compares the on-resonance spectral density per photon pair against the
/// same waveguide without mirrors.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BrightnessReport {
    /// Resonant signal modes per cluster, n_gs / |n_gs - n_gi|.
    pub clustering_factor: f64,
    pub finesse_signal: f64,
    pub finesse_idler: f64,
    /// Probability that both photons of a pair leave through the output
    /// couplers, in [0, 1].
    pub escape_probability: f64,
    /// clustering_factor * finesse_signal * finesse_idler * escape_probability.
    pub enhancement_proportional: f64,
    /// Peak-spectral-density gain of the pair over the mirrorless waveguide.
    pub relative_spectral_brightness: f64,
}

/// Number of doubly resonant signal modes inside one cluster:
/// 2 n_gs L(T) spacing / c, which closes to n_gs / |n_gs - n_gi| because the
/// spacing itself is c / (2 L(T) |walkoff|).
pub fn clustering_factor(spec: &SourceSpec, point: &PhasematchPoint) -> Result<f64> {
    let spacing = cluster_spacing_estimate(spec, point)?;
    let ng_signal = group_index(
        &spec.dispersion,
        Polarization::Ordinary,
        SPEED_OF_LIGHT / point.signal_frequency(),
        point.temperature(),
    )?;
    let length = spec.length_at(point.temperature());
    Ok(2.0 * ng_signal * length * spacing / SPEED_OF_LIGHT)
}

/// Probability that both photons of a generated pair exit through the output
/// couplers: per photon, (1 - R2) / (1 - R1 R2 e^(-2 alpha L)).
pub fn escape_probability(spec: &SourceSpec, temperature: f64) -> f64 {
    let length = spec.length_at(temperature);
    let mut eta = 1.0;
    for pol in [Polarization::Ordinary, Polarization::Extraordinary] {
        let mirrors = spec.mirrors(pol);
        let survival = (-2.0 * spec.attenuation(pol) * length).exp();
        eta *= (1.0 - mirrors.r2) / (1.0 - mirrors.r1 * mirrors.r2 * survival);
    }
    eta
}

/// On-resonance spectral density of one photon relative to the mirrorless
/// waveguide: Airy peak intensity through the output coupler,
/// (1 - R2) e^(-alpha L) / (1 - rho)^2.
fn peak_density_gain(spec: &SourceSpec, pol: Polarization, temperature: f64) -> f64 {
    let mirrors = spec.mirrors(pol);
    let single_pass = (-spec.attenuation(pol) * spec.length_at(temperature)).exp();
    let rho = spec.round_trip_survival(pol, temperature);
    (1.0 - mirrors.r2) * single_pass / ((1.0 - rho) * (1.0 - rho))
}

/// Assembles the enhancement report. A mirrorless resonator yields zero
/// finesse and therefore a zero enhancement product; the degenerate case
/// shows up as 0, it is not normalized away.
pub fn enhancement_factor(
    spec: &SourceSpec,
    point: &PhasematchPoint,
    temperature: f64,
) -> Result<BrightnessReport> {
    let clustering = clustering_factor(spec, point)?;
    let finesse_signal = finesse(spec, Polarization::Ordinary, temperature);
    let finesse_idler = finesse(spec, Polarization::Extraordinary, temperature);
    let escape = escape_probability(spec, temperature);
    let relative = peak_density_gain(spec, Polarization::Ordinary, temperature)
        * peak_density_gain(spec, Polarization::Extraordinary, temperature);
    Ok(BrightnessReport {
        clustering_factor: clustering,
        finesse_signal,
        finesse_idler,
        escape_probability: escape,
        enhancement_proportional: clustering * finesse_signal * finesse_idler * escape,
        relative_spectral_brightness: relative,
    })
}

/// Absolute spectral brightness from a caller-supplied single-pass reference
/// in pairs/(s mW MHz): reference times the relative gain. The model never
/// produces absolute rates on its own.
pub fn spectral_brightness_estimate(
    spec: &SourceSpec,
    point: &PhasematchPoint,
    temperature: f64,
    reference_brightness: f64,
) -> Result<f64> {
    if !(reference_brightness > 0.0 && reference_brightness.is_finite()) {
        return Err(Error::OutOfRange {
            quantity: "reference brightness",
            value: reference_brightness,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "pairs/(s mW MHz)",
        });
    }
    let report = enhancement_factor(spec, point, temperature)?;
    Ok(reference_brightness * report.relative_spectral_brightness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::MirrorPair;
    use crate::dispersion::{DispersionModel, ThermalModel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    fn demo_point(spec: &SourceSpec) -> PhasematchPoint {
        PhasematchPoint::for_spec(
            spec,
            SPEED_OF_LIGHT / 532e-9,
            SPEED_OF_LIGHT / 890e-9,
            T_OP,
        )
        .unwrap()
    }

    #[test]
    fn clustering_factor_closes_to_group_index_ratio() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        let n0 = clustering_factor(&spec, &point).unwrap();
        let ng_s = group_index(&spec.dispersion, Polarization::Ordinary, 890e-9, T_OP).unwrap();
        let ng_i = group_index(
            &spec.dispersion,
            Polarization::Extraordinary,
            SPEED_OF_LIGHT / point.idler_frequency(),
            T_OP,
        )
        .unwrap();
        assert_relative_eq!(n0, ng_s / (ng_s - ng_i).abs(), max_relative = 1e-12);
        assert_relative_eq!(n0, 17.355424722978245, max_relative = 1e-9);
        assert!(n0 > 13.0 && n0 < 23.0);
    }

    #[test]
    fn clustering_factor_ignores_mirrors_and_losses() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        let n0 = clustering_factor(&spec, &point).unwrap();
        let mut bare = spec.clone();
        bare.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        bare.mirrors_idler = MirrorPair { r1: 0.0, r2: 0.0 };
        bare.loss_signal_db_per_cm = 1.3;
        bare.loss_idler_db_per_cm = 0.7;
        assert_eq!(clustering_factor(&bare, &point).unwrap(), n0);
    }

    #[test]
    fn clustering_factor_independent_of_length() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        let n0 = clustering_factor(&spec, &point).unwrap();
        for length_mm in [2.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
            let mut other = spec.clone();
            other.length_l0 = length_mm * 1e-3;
            assert_relative_eq!(
                clustering_factor(&other, &point).unwrap(),
                n0,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn demonstrator_escape_probability_frozen() {
        let spec = demo_spec();
        let eta = escape_probability(&spec, T_OP);
        assert_relative_eq!(eta, 0.24812214206794683, max_relative = 1e-12);
        // Same quantity assembled term by term along an independent grouping.
        let l = spec.length_at(T_OP);
        let numerator = (1.0 - spec.mirrors_signal.r2) * (1.0 - spec.mirrors_idler.r2);
        let denominator = (1.0
            - spec.mirrors_signal.r1
                * spec.mirrors_signal.r2
                * (-2.0 * spec.attenuation(Polarization::Ordinary) * l).exp())
            * (1.0
                - spec.mirrors_idler.r1
                    * spec.mirrors_idler.r2
                    * (-2.0 * spec.attenuation(Polarization::Extraordinary) * l).exp());
        assert_relative_eq!(eta, numerator / denominator, max_relative = 1e-14);
    }

    #[test]
    fn escape_probability_limits() {
        // No mirrors: every pair leaves.
        let mut spec = demo_spec();
        spec.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        spec.mirrors_idler = MirrorPair { r1: 0.0, r2: 0.0 };
        assert_eq!(escape_probability(&spec, T_OP), 1.0);
        // Perfect back mirrors and no loss: the output coupler is the only
        // exit, so every pair still leaves.
        let mut ideal = demo_spec();
        ideal.mirrors_signal = MirrorPair { r1: 1.0, r2: 0.98 };
        ideal.mirrors_idler = MirrorPair { r1: 1.0, r2: 0.90 };
        ideal.loss_signal_db_per_cm = 0.0;
        ideal.loss_idler_db_per_cm = 0.0;
        assert_abs_diff_eq!(escape_probability(&ideal, T_OP), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn escape_probability_bounded_over_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..10_000 {
            let mut spec = demo_spec();
            spec.length_l0 = rng.gen_range(1e-3..100e-3);
            spec.mirrors_signal = MirrorPair {
                r1: rng.gen_range(0.0..1.0),
                r2: rng.gen_range(0.0..1.0),
            };
            spec.mirrors_idler = MirrorPair {
                r1: rng.gen_range(0.0..1.0),
                r2: rng.gen_range(0.0..1.0),
            };
            spec.loss_signal_db_per_cm = rng.gen_range(0.0..5.0);
            spec.loss_idler_db_per_cm = rng.gen_range(0.0..5.0);
            let eta = escape_probability(&spec, T_OP);
            assert!((0.0..=1.0).contains(&eta), "eta_pp = {} out of bounds", eta);
        }
    }

    #[test]
    fn demonstrator_enhancement_frozen() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        let report = enhancement_factor(&spec, &point, T_OP).unwrap();
        assert_abs_diff_eq!(report.finesse_signal, 159.8098, epsilon = 1e-3);
        assert_abs_diff_eq!(report.finesse_idler, 147.0940, epsilon = 1e-3);
        assert_relative_eq!(
            report.enhancement_proportional,
            101227.62447287954,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            report.relative_spectral_brightness,
            2338.81453822472,
            max_relative = 1e-9
        );
        assert!(report.relative_spectral_brightness > 1000.0);
        assert!(report.relative_spectral_brightness < 3000.0);
        assert!(report.escape_probability <= 1.0);
    }

    #[test]
    fn mirrorless_enhancement_is_zero() {
        let mut spec = demo_spec();
        spec.mirrors_signal = MirrorPair { r1: 0.0, r2: 0.0 };
        spec.mirrors_idler = MirrorPair { r1: 0.0, r2: 0.0 };
        let point = demo_point(&spec);
        let report = enhancement_factor(&spec, &point, T_OP).unwrap();
        assert_eq!(report.finesse_signal, 0.0);
        assert_eq!(report.enhancement_proportional, 0.0);
        assert!(report.relative_spectral_brightness <= 1.0);
    }

    #[test]
    fn finesse_grows_with_back_reflectivity() {
        let spec = demo_spec();
        let mut low = spec.clone();
        low.mirrors_signal.r1 = 0.90;
        let f_low = finesse(&low, Polarization::Ordinary, T_OP);
        let mut high = spec.clone();
        high.mirrors_signal.r1 = 0.99;
        let f_high = finesse(&high, Polarization::Ordinary, T_OP);
        assert!(f_high > f_low);
    }

    #[test]
    fn enhancement_invariant_under_photon_label_swap() {
        // Mirrors and losses swap between the photons; the material model
        // stays put, so the clustering factor is shared and the symmetric
        // products are unchanged.
        let spec = demo_spec();
        let mut swapped = spec.clone();
        std::mem::swap(&mut swapped.mirrors_signal, &mut swapped.mirrors_idler);
        std::mem::swap(
            &mut swapped.loss_signal_db_per_cm,
            &mut swapped.loss_idler_db_per_cm,
        );
        let point = demo_point(&spec);
        let a = enhancement_factor(&spec, &point, T_OP).unwrap();
        let b = enhancement_factor(&swapped, &point, T_OP).unwrap();
        assert_relative_eq!(
            a.enhancement_proportional,
            b.enhancement_proportional,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            a.relative_spectral_brightness,
            b.relative_spectral_brightness,
            epsilon = 1e-12
        );
        assert_eq!(a.finesse_signal, b.finesse_idler);
    }

    #[test]
    fn brightness_scales_linearly_with_reference() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        let at_15 = spectral_brightness_estimate(&spec, &point, T_OP, 15.0).unwrap();
        assert_relative_eq!(at_15, 35082.2180733708, max_relative = 1e-9);
        // A mid-range single-pass reference lands near 3e4 pairs/(s mW MHz).
        assert!(at_15 > 1.5e4 && at_15 < 6e4);
        let at_milli = spectral_brightness_estimate(&spec, &point, T_OP, 0.015).unwrap();
        assert_relative_eq!(at_15, at_milli * 1000.0, max_relative = 1e-12);
        // Total rate inside one ~66 MHz wide resonance.
        let rate = at_15 * 66.0;
        assert!(rate > 1e6 && rate < 4e6, "rate {:.3e}", rate);
    }

    #[test]
    fn nonpositive_reference_is_rejected() {
        let spec = demo_spec();
        let point = demo_point(&spec);
        for bad in [0.0, -3.0, f64::NAN] {
            assert!(spectral_brightness_estimate(&spec, &point, T_OP, bad).is_err());
        }
    }
}
