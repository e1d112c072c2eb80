//! TOML run configuration: unit-suffixed keys, file-or-inline source and pump
//! tables, per-subcommand parameter tables, and resolution into core types.
//! The resolved configuration can be dumped back as TOML for provenance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use respdc_core::{
    solve_poling_period, DispersionModel, MirrorPair, PumpSpec, SourceSpec, ThermalModel,
    SPEED_OF_LIGHT,
};

use crate::error::{CliError, CliResult};

/// A table that may live inline or in its own TOML file next to the config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableRef<T> {
    Path(String),
    Inline(T),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorTable {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTable {
    pub length_mm: f64,
    /// Poling period at the reference temperature; omit to phasematch the
    /// configured pump and signal wavelengths instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poling_period_um: Option<f64>,
    pub mirrors_signal: MirrorTable,
    /// Defaults to the signal mirrors (shared couplers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirrors_idler: Option<MirrorTable>,
    #[serde(default)]
    pub loss_signal_db_per_cm: f64,
    #[serde(default)]
    pub loss_idler_db_per_cm: f64,
    /// Temperature at which length and period are quoted, degC.
    pub reference_temperature_c: f64,
    #[serde(default = "default_expansion")]
    pub expansion_coefficient_per_k: f64,
    #[serde(default)]
    pub mode_offset_ordinary: f64,
    #[serde(default)]
    pub mode_offset_extraordinary: f64,
}

fn default_expansion() -> f64 {
    1.5e-5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpTable {
    /// Exactly one of wavelength_nm / frequency_thz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_thz: Option<f64>,
    /// Intensity FWHM; omit or set 0 for a monochromatic pump.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_mhz: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingTable {
    /// Defaults to the source reference temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    /// Signal (higher-frequency photon) wavelength used for phasematching
    /// and map evaluation; defaults to the anchored resonance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_wavelength_nm: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_directory: Option<String>,
    /// csv | json | both.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTable {
    /// Half-width of the scan in units of the cluster spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_spacings: Option<f64>,
    /// Explicit half-width override, GHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsaTable {
    /// Full window widths centered on the anchored lines; omit for the
    /// pump-adapted defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_window_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_window_ghz: Option<f64>,
    /// Grid step; omit for one eighth of the narrower linewidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_mhz: Option<f64>,
    /// Apply the signal-marginal cluster filter before exporting.
    #[serde(default)]
    pub cluster_filter: bool,
    /// Filter FWHM; omit for the default (signal linewidth based) width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_fwhm_ghz: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths_mm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_range_mm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectivities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectivity_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectivity_steps: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryCaseTable {
    pub label: String,
    pub length_mm: f64,
    pub exit_reflectivity: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurityVsPumpTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_bandwidths_mhz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<GeometryCaseTable>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTuneTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_offset_ghz: Option<f64>,
    /// Number of schedule entries; odd counts center the sweep on zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignTable {
    pub memory_wavelength_nm: f64,
    pub desired_bandwidth_mhz: f64,
    pub minimum_total_purity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_reflectivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_bandwidth_mhz: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<TableRef<SourceTable>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<TableRef<PumpTable>>,
    #[serde(default)]
    pub operating: OperatingTable,
    #[serde(default)]
    pub run: RunTable,
    #[serde(default)]
    pub spectrum: SpectrumTable,
    #[serde(default)]
    pub jsa: JsaTable,
    #[serde(default)]
    pub map: MapTable,
    #[serde(default)]
    pub purity_vs_pump: PurityVsPumpTable,
    #[serde(default)]
    pub fine_tune: FineTuneTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignTable>,
}

/// Configuration with file references inlined, units converted, and the
/// poling period solved when it was left out.
pub struct ResolvedConfig {
    /// Fully inline view for provenance dumps.
    pub file: FileConfig,
    pub source: Option<SourceSpec>,
    pub pump: Option<PumpSpec>,
    /// Operating temperature, degC.
    pub temperature: f64,
}

impl ResolvedConfig {
    pub fn source(&self) -> CliResult<&SourceSpec> {
        self.source
            .as_ref()
            .ok_or_else(|| CliError::usage("this subcommand needs a [source] table"))
    }

    pub fn pump(&self) -> CliResult<&PumpSpec> {
        self.pump
            .as_ref()
            .ok_or_else(|| CliError::usage("this subcommand needs a [pump] table"))
    }

    /// Signal frequency for phasematching and maps: the configured
    /// wavelength, Hz.
    pub fn signal_frequency(&self) -> Option<f64> {
        self.file
            .operating
            .signal_wavelength_nm
            .map(|nm| SPEED_OF_LIGHT / (nm * 1e-9))
    }
}

pub fn load(path: &Path) -> CliResult<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

fn load_ref<T>(reference: TableRef<T>, base: &Path, what: &str) -> CliResult<T>
where
    T: serde::de::DeserializeOwned,
{
    match reference {
        TableRef::Inline(table) => Ok(table),
        TableRef::Path(rel) => {
            let path = base.join(&rel);
            let text = fs::read_to_string(&path).map_err(|e| {
                CliError::usage(format!("cannot read {what} file {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::usage(format!("{what} file {}: {e}", path.display())))
        }
    }
}

fn pump_frequency(table: &PumpTable) -> CliResult<f64> {
    match (table.wavelength_nm, table.frequency_thz) {
        (Some(nm), None) => Ok(SPEED_OF_LIGHT / (nm * 1e-9)),
        (None, Some(thz)) => Ok(thz * 1e12),
        (Some(_), Some(_)) => Err(CliError::usage(
            "[pump] sets both wavelength_nm and frequency_thz; pick one",
        )),
        (None, None) => Err(CliError::usage(
            "[pump] needs wavelength_nm or frequency_thz",
        )),
    }
}

fn build_pump(table: &PumpTable) -> CliResult<PumpSpec> {
    let central = pump_frequency(table)?;
    match table.bandwidth_mhz {
        Some(mhz) if mhz > 0.0 => Ok(PumpSpec::gaussian(central, mhz * 1e6)?),
        _ => Ok(PumpSpec::monochromatic(central)?),
    }
}

/// Inlines file references, converts unit-suffixed values to SI, and solves
/// the poling period against the configured pump and signal wavelengths when
/// the source left it out. `base` anchors relative file references.
pub fn resolve(config: FileConfig, base: &Path) -> CliResult<ResolvedConfig> {
    let mut file = config;
    let source_table = match file.source.take() {
        Some(reference) => Some(load_ref(reference, base, "source")?),
        None => None,
    };
    let pump_table = match file.pump.take() {
        Some(reference) => Some(load_ref(reference, base, "pump")?),
        None => None,
    };
    let pump = match &pump_table {
        Some(table) => Some(build_pump(table)?),
        None => None,
    };

    let (source, source_table) = match source_table {
        None => (None, None),
        Some(mut table) => {
            let mirrors_signal = MirrorPair::new(table.mirrors_signal.r1, table.mirrors_signal.r2)?;
            let mirrors_idler = match &table.mirrors_idler {
                Some(m) => MirrorPair::new(m.r1, m.r2)?,
                None => mirrors_signal,
            };
            let dispersion = DispersionModel::default_model()?
                .with_mode_offsets(table.mode_offset_ordinary, table.mode_offset_extraordinary);
            let mut spec = SourceSpec {
                length_l0: table.length_mm * 1e-3,
                // Placeholder until the period is known; the solver only
                // reads material models and geometry.
                poling_period: table.poling_period_um.unwrap_or(5.0) * 1e-6,
                mirrors_signal,
                mirrors_idler,
                loss_signal_db_per_cm: table.loss_signal_db_per_cm,
                loss_idler_db_per_cm: table.loss_idler_db_per_cm,
                reference_temperature: table.reference_temperature_c,
                dispersion,
                thermal: ThermalModel::new(
                    table.expansion_coefficient_per_k,
                    table.reference_temperature_c,
                ),
            };
            if table.poling_period_um.is_none() {
                let temperature = file
                    .operating
                    .temperature_c
                    .unwrap_or(table.reference_temperature_c);
                let pump_table = pump_table.as_ref().ok_or_else(|| {
                    CliError::usage(
                        "[source] omits poling_period_um, so a [pump] wavelength is needed \
                         to phasematch",
                    )
                })?;
                let signal_nm = file.operating.signal_wavelength_nm.ok_or_else(|| {
                    CliError::usage(
                        "[source] omits poling_period_um, so operating.signal_wavelength_nm \
                         is needed to phasematch",
                    )
                })?;
                let pump_nu = pump_frequency(pump_table)?;
                spec.poling_period = solve_poling_period(
                    &spec,
                    SPEED_OF_LIGHT / pump_nu,
                    signal_nm * 1e-9,
                    temperature,
                )?;
                table.poling_period_um = Some(spec.poling_period * 1e6);
            }
            spec.validate()?;
            (Some(spec), Some(table))
        }
    };

    let temperature = file.operating.temperature_c.unwrap_or_else(|| {
        source_table
            .as_ref()
            .map(|t| t.reference_temperature_c)
            .unwrap_or(respdc_core::design::DESIGN_TEMPERATURE)
    });
    file.operating.temperature_c = Some(temperature);
    file.source = source_table.map(TableRef::Inline);
    file.pump = pump_table.map(TableRef::Inline);

    Ok(ResolvedConfig {
        file,
        source,
        pump,
        temperature,
    })
}

/// Provenance dump of the resolved configuration.
pub fn emit(resolved: &ResolvedConfig) -> CliResult<String> {
    toml::to_string_pretty(&resolved.file)
        .map_err(|e| CliError::usage(format!("cannot serialize resolved config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
[source]
length_mm = 12.3
poling_period_um = 4.543485772824805
mirrors_signal = { r1 = 0.99, r2 = 0.98 }
loss_signal_db_per_cm = 0.016
loss_idler_db_per_cm = 0.022
reference_temperature_c = 148.14

[pump]
wavelength_nm = 532.0
bandwidth_mhz = 100.0
"#;

    #[test]
    fn inline_source_and_pump_resolve() {
        let cfg: FileConfig = toml::from_str(DEMO).unwrap();
        let resolved = resolve(cfg, Path::new(".")).unwrap();
        let spec = resolved.source().unwrap();
        assert_eq!(spec.length_l0, 12.3e-3);
        assert_eq!(spec.mirrors_idler.r2, 0.98);
        let pump = resolved.pump().unwrap();
        assert_eq!(pump.bandwidth_fwhm, 100e6);
        assert_eq!(resolved.temperature, 148.14);
    }

    #[test]
    fn missing_period_is_solved_from_wavelengths() {
        let text = r#"
[source]
length_mm = 12.3
mirrors_signal = { r1 = 0.99, r2 = 0.98 }
reference_temperature_c = 148.14

[pump]
wavelength_nm = 532.0

[operating]
signal_wavelength_nm = 890.0
"#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        let resolved = resolve(cfg, Path::new(".")).unwrap();
        let spec = resolved.source().unwrap();
        let expected = 4.543485772824805e-6;
        assert!(
            ((spec.poling_period - expected) / expected).abs() < 1e-12,
            "period {}",
            spec.poling_period
        );
        // The provenance view records the solved value.
        let dump = emit(&resolved).unwrap();
        assert!(dump.contains("poling_period_um"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[source]\nlenght_mm = 12.3\n";
        assert!(toml::from_str::<FileConfig>(text).is_err());
    }

    #[test]
    fn pump_requires_exactly_one_frequency_key() {
        let both = PumpTable {
            wavelength_nm: Some(532.0),
            frequency_thz: Some(563.5),
            bandwidth_mhz: None,
        };
        assert!(build_pump(&both).is_err());
        let neither = PumpTable {
            wavelength_nm: None,
            frequency_thz: None,
            bandwidth_mhz: None,
        };
        assert!(build_pump(&neither).is_err());
    }

    #[test]
    fn resolved_dump_round_trips() {
        let cfg: FileConfig = toml::from_str(DEMO).unwrap();
        let resolved = resolve(cfg, Path::new(".")).unwrap();
        let dump = emit(&resolved).unwrap();
        let reparsed: FileConfig = toml::from_str(&dump).unwrap();
        let re_resolved = resolve(reparsed, Path::new(".")).unwrap();
        assert_eq!(
            resolved.source().unwrap().poling_period,
            re_resolved.source().unwrap().poling_period
        );
        assert_eq!(emit(&re_resolved).unwrap(), dump);
    }
}
