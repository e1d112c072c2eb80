//! Temperature-dependent effective refractive indices, group indices,
//! propagation constants, and thermally expanded sample length for both
//! polarizations.
//!
//! Public interfaces use optical frequency nu in Hz and wavelength in metres;
//! angular frequency appears only inside formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Temperatures outside this range (degC) are rejected rather than extrapolated.
pub const TEMPERATURE_RANGE_C: (f64, f64) = (0.0, 250.0);

/// Relative finite-difference step for wavelength derivatives.
const DERIVATIVE_REL_STEP: f64 = 1e-4;

/// The two waveguide polarizations. The signal photon is Ordinary and the
/// idler Extraordinary throughout this library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

/// One polarization's temperature-dependent Sellmeier fit:
///
/// ```text
/// n^2 = a1 + (a2 + b1 f)/(lambda^2 - (a3 + b2 f)^2) + b3 f - a4 lambda^2
/// f   = (T - f_t1)(T + f_t2),   lambda in um, T in degC
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SellmeierSet {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub f_t1: f64,
    pub f_t2: f64,
    /// Wavelength validity range in um.
    pub valid_wavelength_um: (f64, f64),
    pub citation: String,
}

impl SellmeierSet {
    fn evaluate(&self, lam_um: f64, t_c: f64) -> f64 {
        let f = (t_c - self.f_t1) * (t_c + self.f_t2);
        let l2 = lam_um * lam_um;
        let res = self.a3 + self.b2 * f;
        let n2 = self.a1 + (self.a2 + self.b1 * f) / (l2 - res * res) + self.b3 * f - self.a4 * l2;
        n2.sqrt()
    }
}

#[derive(Clone, Debug)]
enum IndexForm {
    Sellmeier(SellmeierSet),
    /// Dispersionless index, used by toy models and tests; n_g = n exactly.
    Constant(f64),
}

impl IndexForm {
    fn evaluate(&self, lam_um: f64, t_c: f64) -> f64 {
        match self {
            IndexForm::Sellmeier(s) => s.evaluate(lam_um, t_c),
            IndexForm::Constant(n) => *n,
        }
    }

    fn valid_wavelength_um(&self) -> (f64, f64) {
        match self {
            IndexForm::Sellmeier(s) => s.valid_wavelength_um,
            IndexForm::Constant(_) => (1e-3, 1e3),
        }
    }
}

/// Map (polarization, wavelength, temperature) -> effective refractive index.
///
/// The per-polarization `mode_offset` is a constant additive correction to the
/// material index, absorbing the first-order waveguide contribution.
#[derive(Clone, Debug)]
pub struct DispersionModel {
    ordinary: IndexForm,
    extraordinary: IndexForm,
    pub mode_offset_ordinary: f64,
    pub mode_offset_extraordinary: f64,
}

/// On-disk shape of the coefficient data file.
#[derive(Deserialize)]
struct SellmeierFile {
    ordinary: SellmeierSet,
    extraordinary: SellmeierSet,
}

/// Default coefficient data compiled into the library.
const DEFAULT_DATA: &str = include_str!("../data/cln_sellmeier.toml");

/// Name of the coefficient file looked up under `RESPDC_DATA_DIR`.
pub const DATA_FILE_NAME: &str = "cln_sellmeier.toml";

impl DispersionModel {
    /// Parses a coefficient data file (TOML, one table per polarization).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SellmeierFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad dispersion data file: {e}")))?;
        Ok(DispersionModel {
            ordinary: IndexForm::Sellmeier(file.ordinary),
            extraordinary: IndexForm::Sellmeier(file.extraordinary),
            mode_offset_ordinary: 0.0,
            mode_offset_extraordinary: 0.0,
        })
    }

    /// The built-in congruent-lithium-niobate model, overridable by placing a
    /// `cln_sellmeier.toml` in the directory named by `RESPDC_DATA_DIR`.
    pub fn default_model() -> Result<Self> {
        if let Ok(dir) = std::env::var("RESPDC_DATA_DIR") {
            let path = std::path::Path::new(&dir).join(DATA_FILE_NAME);
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            return Self::from_toml_str(&text);
        }
        Self::from_toml_str(DEFAULT_DATA)
    }

    /// Dispersionless model with fixed indices per polarization (toy/testing).
    pub fn constant(n_ordinary: f64, n_extraordinary: f64) -> Self {
        DispersionModel {
            ordinary: IndexForm::Constant(n_ordinary),
            extraordinary: IndexForm::Constant(n_extraordinary),
            mode_offset_ordinary: 0.0,
            mode_offset_extraordinary: 0.0,
        }
    }

    pub fn with_mode_offsets(mut self, ordinary: f64, extraordinary: f64) -> Self {
        self.mode_offset_ordinary = ordinary;
        self.mode_offset_extraordinary = extraordinary;
        self
    }

    fn form(&self, pol: Polarization) -> &IndexForm {
        match pol {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        }
    }

    fn mode_offset(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Ordinary => self.mode_offset_ordinary,
            Polarization::Extraordinary => self.mode_offset_extraordinary,
        }
    }

    /// Wavelength validity range in metres for one polarization.
    pub fn valid_wavelength(&self, pol: Polarization) -> (f64, f64) {
        let (lo, hi) = self.form(pol).valid_wavelength_um();
        (lo * 1e-6, hi * 1e-6)
    }

    fn check_domain(&self, pol: Polarization, wavelength: f64, temperature: f64) -> Result<()> {
        let (lo, hi) = self.valid_wavelength(pol);
        if !(wavelength >= lo && wavelength <= hi) {
            return Err(Error::OutOfRange {
                quantity: "wavelength",
                value: wavelength,
                min: lo,
                max: hi,
                unit: "m",
            });
        }
        let (tlo, thi) = TEMPERATURE_RANGE_C;
        if !(temperature >= tlo && temperature <= thi) {
            return Err(Error::OutOfRange {
                quantity: "temperature",
                value: temperature,
                min: tlo,
                max: thi,
                unit: "degC",
            });
        }
        Ok(())
    }
}

/// Linear thermal expansion of the sample (and its poling period).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThermalModel {
    /// Expansion coefficient in 1/K.
    pub expansion_coefficient: f64,
    /// degC at which lengths are quoted.
    pub reference_temperature: f64,
}

impl ThermalModel {
    pub fn new(expansion_coefficient: f64, reference_temperature: f64) -> Self {
        assert!(expansion_coefficient > 0.0, "expansion coefficient must be positive");
        ThermalModel {
            expansion_coefficient,
            reference_temperature,
        }
    }

    /// Relative length factor L(T)/L0.
    pub fn expansion_factor(&self, temperature: f64) -> f64 {
        1.0 + self.expansion_coefficient * (temperature - self.reference_temperature)
    }
}

/// Effective refractive index n_eff = n_material + mode_offset.
pub fn refractive_index(
    model: &DispersionModel,
    pol: Polarization,
    wavelength: f64,
    temperature: f64,
) -> Result<f64> {
    model.check_domain(pol, wavelength, temperature)?;
    Ok(model.form(pol).evaluate(wavelength * 1e6, temperature) + model.mode_offset(pol))
}

/// Group index n_g = n - lambda dn/dlambda.
///
/// The derivative is a central finite difference with relative step 1e-4 of
/// the wavelength, Richardson-extrapolated once.
pub fn group_index(
    model: &DispersionModel,
    pol: Polarization,
    wavelength: f64,
    temperature: f64,
) -> Result<f64> {
    let h = DERIVATIVE_REL_STEP * wavelength;
    // The stencil reaches lambda +- h; both ends must stay in the validity range.
    model.check_domain(pol, wavelength - h, temperature)?;
    model.check_domain(pol, wavelength + h, temperature)?;
    let n = refractive_index(model, pol, wavelength, temperature)?;
    let central = |step: f64| -> Result<f64> {
        let hi = refractive_index(model, pol, wavelength + step, temperature)?;
        let lo = refractive_index(model, pol, wavelength - step, temperature)?;
        Ok((hi - lo) / (2.0 * step))
    };
    let d_h = central(h)?;
    let d_h2 = central(0.5 * h)?;
    let dn_dlam = (4.0 * d_h2 - d_h) / 3.0;
    Ok(n - wavelength * dn_dlam)
}

/// Propagation constant beta = 2 pi nu n / c in rad/m.
pub fn propagation_constant(
    model: &DispersionModel,
    pol: Polarization,
    frequency: f64,
    temperature: f64,
) -> Result<f64> {
    if frequency <= 0.0 {
        return Err(Error::OutOfRange {
            quantity: "frequency",
            value: frequency,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
            unit: "Hz",
        });
    }
    let wavelength = SPEED_OF_LIGHT / frequency;
    let n = refractive_index(model, pol, wavelength, temperature)?;
    Ok(2.0 * std::f64::consts::PI * frequency * n / SPEED_OF_LIGHT)
}

/// Thermally expanded sample length L(T) = L0 (1 + a (T - T_ref)).
pub fn sample_length(thermal: &ThermalModel, l0: f64, temperature: f64) -> f64 {
    debug_assert!(l0 > 0.0);
    l0 * thermal.expansion_factor(temperature)
}
