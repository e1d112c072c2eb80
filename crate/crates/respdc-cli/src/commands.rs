//! One handler per subcommand. Each runs the corresponding core operation,
//! writes the requested artifacts, and returns a one-line summary with the
//! headline metric.

use std::path::Path;

use serde::Serialize;

use respdc_core::jsa::JsaData;
use respdc_core::{
    apply_cluster_filter, bandwidth_map, build_jsa, cluster_spacing_estimate,
    cotuning_coefficients, design_with_overrides, detect_clusters, enhancement_factor,
    fine_tune_schedule, linear_axis, purity_map, purity_report_at, purity_vs_pump_bandwidth,
    recommended_windows, signal_spectrum, stability_windows, ClusterReport, DesignMap,
    DesignOverrides, GeometryCase, MemoryTarget, OperatingPoint, PhasematchPoint, SignalSpectrum,
};

use crate::config::{MapTable, ResolvedConfig};
use crate::emit::{num, sorted_json, write_artifact, Csv, OutputFormat};
use crate::error::{CliError, CliResult};

/// Operating point anchored on the nearest doubly resonant pair at the
/// configured pump and temperature.
fn anchored(resolved: &ResolvedConfig) -> CliResult<OperatingPoint> {
    let spec = resolved.source()?;
    let pump = resolved.pump()?;
    Ok(OperatingPoint::anchor(
        spec,
        pump.central_frequency,
        resolved.temperature,
    )?)
}

fn anchored_point(resolved: &ResolvedConfig) -> CliResult<(OperatingPoint, PhasematchPoint)> {
    let op = anchored(resolved)?;
    let point = PhasematchPoint::for_spec(
        resolved.source()?,
        op.pump_frequency,
        op.signal_center,
        resolved.temperature,
    )?;
    Ok((op, point))
}

fn ghz(hz: f64) -> f64 {
    hz / 1e9
}

// --- spectrum / clusters ---------------------------------------------------

#[derive(Serialize)]
struct SpectrumArtifact<'a> {
    pump_frequency_hz: f64,
    temperature_c: f64,
    window_hz: [f64; 2],
    points: usize,
    clusters: &'a ClusterReport,
}

fn scan_spectrum(resolved: &ResolvedConfig) -> CliResult<(SignalSpectrum, ClusterReport)> {
    let spec = resolved.source()?;
    let t = resolved.temperature;
    let table = &resolved.file.spectrum;
    let op = anchored(resolved)?;
    let half = match table.window_ghz {
        Some(g) => g * 1e9,
        None => {
            let (_, point) = anchored_point(resolved)?;
            let spacing = cluster_spacing_estimate(spec, &point)?;
            table.window_spacings.unwrap_or(1.5) * spacing
        }
    };
    let points = table.points.unwrap_or(65_537);
    let s = signal_spectrum(
        spec,
        op.pump_frequency,
        t,
        (op.signal_center - half, op.signal_center + half),
        points,
    )?;
    let report = detect_clusters(&s, spec)?;
    Ok((s, report))
}

fn spacing_text(report: &ClusterReport) -> String {
    match report.spacing_measured {
        Some(d) => format!("{:.2} GHz", ghz(d)),
        None => "n/a".into(),
    }
}

pub fn spectrum(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let (s, report) = scan_spectrum(resolved)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["signal_frequency_hz", "relative_intensity"]);
        for (nu, v) in s.frequencies.iter().zip(&s.values) {
            csv.row([num(*nu), num(*v)]);
        }
        write_artifact(out, "spectrum.csv", &csv.finish())?;
    }
    if format.wants_json() {
        let artifact = SpectrumArtifact {
            pump_frequency_hz: s.pump_frequency,
            temperature_c: s.temperature,
            window_hz: [s.frequencies[0], s.frequencies[s.frequencies.len() - 1]],
            points: s.frequencies.len(),
            clusters: &report,
        };
        write_artifact(out, "spectrum.json", &sorted_json(&artifact)?)?;
    }
    Ok(format!(
        "spectrum: {} clusters, central fraction {:.3}, spacing {} ({} points)",
        report.clusters.len(),
        report.central_fraction,
        spacing_text(&report),
        s.frequencies.len()
    ))
}

pub fn clusters(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let (_, report) = scan_spectrum(resolved)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["center_hz", "integrated_weight", "peak_count"]);
        for c in &report.clusters {
            csv.row([num(c.center), num(c.integrated_weight), c.peak_count.to_string()]);
        }
        write_artifact(out, "clusters.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "clusters.json", &sorted_json(&report)?)?;
    }
    Ok(format!(
        "clusters: {} found, central fraction {:.3}, spacing {}",
        report.clusters.len(),
        report.central_fraction,
        spacing_text(&report)
    ))
}

// --- jsa ---------------------------------------------------------------

#[derive(Serialize)]
struct JsaArtifact<'a> {
    operating: &'a OperatingPoint,
    signal_grid_hz: &'a [f64],
    idler_grid_hz: &'a [f64],
    signal_fsr_hz: f64,
    idler_fsr_hz: f64,
    signal_linewidth_hz: f64,
    idler_linewidth_hz: f64,
    masked_weight_fraction: f64,
    /// One '0'/'1' string per signal row ('1' = admitted by the filter).
    mask_rows: Vec<String>,
}

pub fn jsa(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let spec = resolved.source()?;
    let pump = resolved.pump()?;
    let t = resolved.temperature;
    let table = &resolved.file.jsa;
    let (op, mut signal_window, mut idler_window) = recommended_windows(spec, pump, t)?;
    if let Some(w) = table.signal_window_ghz {
        signal_window = (op.signal_center - w * 0.5e9, op.signal_center + w * 0.5e9);
    }
    if let Some(w) = table.idler_window_ghz {
        idler_window = (op.idler_center - w * 0.5e9, op.idler_center + w * 0.5e9);
    }
    let resolution = table.resolution_mhz.map(|m| m * 1e6);
    let mut js = build_jsa(spec, pump, t, signal_window, idler_window, resolution)?;
    if table.cluster_filter {
        js = apply_cluster_filter(js, table.filter_fwhm_ghz.map(|g| g * 1e9))?;
    }

    let (shape, mask_rows): ((usize, usize), Vec<String>) = match &js.data {
        JsaData::Grid { filter_mask, .. } => {
            let n_i = js.idler_grid.len();
            let rows = filter_mask
                .chunks(n_i)
                .map(|row| row.iter().map(|&b| if b { '1' } else { '0' }).collect())
                .collect();
            ((js.signal_grid.len(), n_i), rows)
        }
        JsaData::Line { filter_mask, .. } => {
            let row = filter_mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
            ((js.signal_grid.len(), 1), vec![row])
        }
    };

    if format.wants_csv() {
        let mut csv = Csv::new();
        match &js.data {
            JsaData::Grid { amplitude, .. } => {
                let mut header = vec!["signal_hz_by_idler_hz".to_string()];
                header.extend(js.idler_grid.iter().map(|&nu| num(nu)));
                csv.row(header);
                let n_i = js.idler_grid.len();
                for (a, row) in amplitude.chunks(n_i).enumerate() {
                    let mut cells = vec![num(js.signal_grid[a])];
                    cells.extend(row.iter().map(|z| num(z.norm_sqr())));
                    csv.row(cells);
                }
            }
            JsaData::Line { amplitude, .. } => {
                csv.row(["signal_hz", "idler_hz", "intensity"]);
                for (k, z) in amplitude.iter().enumerate() {
                    csv.row([
                        num(js.signal_grid[k]),
                        num(js.idler_grid[k]),
                        num(z.norm_sqr()),
                    ]);
                }
            }
        }
        write_artifact(out, "jsa.csv", &csv.finish())?;
    }
    if format.wants_json() {
        let artifact = JsaArtifact {
            operating: &js.operating,
            signal_grid_hz: &js.signal_grid,
            idler_grid_hz: &js.idler_grid,
            signal_fsr_hz: js.signal_fsr,
            idler_fsr_hz: js.idler_fsr,
            signal_linewidth_hz: js.signal_linewidth,
            idler_linewidth_hz: js.idler_linewidth,
            masked_weight_fraction: js.masked_weight_fraction(),
            mask_rows,
        };
        write_artifact(out, "jsa.json", &sorted_json(&artifact)?)?;
    }
    Ok(format!(
        "jsa: {}x{} grid, masked weight fraction {:.4}",
        shape.0,
        shape.1,
        js.masked_weight_fraction()
    ))
}

// --- purity ------------------------------------------------------------

pub fn purity(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let report = purity_report_at(resolved.source()?, resolved.pump()?, resolved.temperature)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["metric", "value"]);
        csv.row(["mode_excitation".into(), num(report.mode_excitation)]);
        csv.row(["schmidt_number".into(), num(report.schmidt_number)]);
        csv.row(["spectral_purity".into(), num(report.spectral_purity)]);
        csv.row(["total_purity".into(), num(report.total_purity)]);
        csv.row(["dominant_signal_hz".into(), num(report.dominant_mode.0)]);
        csv.row(["dominant_idler_hz".into(), num(report.dominant_mode.1)]);
        write_artifact(out, "purity.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "purity.json", &sorted_json(&report)?)?;
    }
    Ok(format!(
        "purity: M={:.4}, K={:.4}, S={:.4}, P={:.4}",
        report.mode_excitation,
        report.schmidt_number,
        report.spectral_purity,
        report.total_purity
    ))
}

// --- maps ----------------------------------------------------------------

fn map_axes(table: &MapTable) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let lengths = match (&table.lengths_mm, table.length_range_mm, table.length_steps) {
        (Some(list), _, _) => list.iter().map(|l| l * 1e-3).collect(),
        (None, Some([lo, hi]), Some(steps)) => linear_axis(lo * 1e-3, hi * 1e-3, steps)?,
        _ => {
            return Err(CliError::usage(
                "[map] needs lengths_mm or length_range_mm with length_steps",
            ))
        }
    };
    let reflectivities = match (
        &table.reflectivities,
        table.reflectivity_range,
        table.reflectivity_steps,
    ) {
        (Some(list), _, _) => list.clone(),
        (None, Some([lo, hi]), Some(steps)) => linear_axis(lo, hi, steps)?,
        _ => {
            return Err(CliError::usage(
                "[map] needs reflectivities or reflectivity_range with reflectivity_steps",
            ))
        }
    };
    Ok((lengths, reflectivities))
}

fn map_signal_frequency(resolved: &ResolvedConfig) -> CliResult<f64> {
    match resolved.signal_frequency() {
        Some(nu) => Ok(nu),
        None => Ok(anchored(resolved)?.signal_center),
    }
}

fn map_csv(map: &DesignMap, value_name: &str) -> String {
    let mut csv = Csv::new();
    let mut header = vec![format!("length_mm_by_r2_{value_name}")];
    header.extend(map.reflectivities.iter().map(|r| format!("{r}")));
    csv.row(header);
    for (i, l) in map.lengths.iter().enumerate() {
        let mut cells = vec![format!("{}", l * 1e3)];
        cells.extend(
            (0..map.reflectivities.len()).map(|j| num(map.get(i, j))),
        );
        csv.row(cells);
    }
    csv.finish()
}

pub fn bandwidth_map_cmd(
    resolved: &ResolvedConfig,
    out: &Path,
    format: OutputFormat,
) -> CliResult<String> {
    let (lengths, reflectivities) = map_axes(&resolved.file.map)?;
    let nu_s = map_signal_frequency(resolved)?;
    let map = bandwidth_map(
        resolved.source()?,
        nu_s,
        resolved.temperature,
        &lengths,
        &reflectivities,
    )?;
    if format.wants_csv() {
        write_artifact(out, "bandwidth_map.csv", &map_csv(&map, "linewidth_hz"))?;
    }
    if format.wants_json() {
        write_artifact(out, "bandwidth_map.json", &sorted_json(&map)?)?;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &map.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(format!(
        "bandwidth-map: {}x{} cells, {:.2} MHz to {:.2} MHz",
        map.lengths.len(),
        map.reflectivities.len(),
        lo / 1e6,
        hi / 1e6
    ))
}

pub fn purity_map_cmd(
    resolved: &ResolvedConfig,
    out: &Path,
    format: OutputFormat,
) -> CliResult<String> {
    let (lengths, reflectivities) = map_axes(&resolved.file.map)?;
    let map = purity_map(
        resolved.source()?,
        resolved.pump()?,
        resolved.temperature,
        &lengths,
        &reflectivities,
    )?;
    if format.wants_csv() {
        write_artifact(out, "purity_map.csv", &map_csv(&map, "mode_excitation"))?;
    }
    if format.wants_json() {
        write_artifact(out, "purity_map.json", &sorted_json(&map)?)?;
    }
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..map.lengths.len() {
        for j in 0..map.reflectivities.len() {
            if map.get(i, j) > best.2 {
                best = (i, j, map.get(i, j));
            }
        }
    }
    Ok(format!(
        "purity-map: {}x{} cells, max M {:.4} at L {} mm, R2 {}",
        map.lengths.len(),
        map.reflectivities.len(),
        best.2,
        map.lengths[best.0] * 1e3,
        map.reflectivities[best.1]
    ))
}

// --- purity-vs-pump ------------------------------------------------------

pub fn purity_vs_pump(
    resolved: &ResolvedConfig,
    out: &Path,
    format: OutputFormat,
) -> CliResult<String> {
    let table = &resolved.file.purity_vs_pump;
    let sigmas: Vec<f64> = table
        .pump_bandwidths_mhz
        .as_ref()
        .ok_or_else(|| CliError::usage("[purity_vs_pump] needs pump_bandwidths_mhz"))?
        .iter()
        .map(|m| m * 1e6)
        .collect();
    let cases: Vec<GeometryCase> = table
        .cases
        .iter()
        .map(|c| GeometryCase {
            label: c.label.clone(),
            length: c.length_mm * 1e-3,
            mirror_r2: c.exit_reflectivity,
        })
        .collect();
    let tables = purity_vs_pump_bandwidth(
        resolved.source()?,
        resolved.pump()?.central_frequency,
        resolved.temperature,
        &sigmas,
        &cases,
    )?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["case", "pump_bandwidth_hz", "schmidt_number", "spectral_purity"]);
        for t in &tables {
            for row in &t.rows {
                csv.row([
                    t.label.clone(),
                    num(row.pump_bandwidth),
                    num(row.schmidt_number),
                    num(row.spectral_purity),
                ]);
            }
        }
        write_artifact(out, "purity_vs_pump.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "purity_vs_pump.json", &sorted_json(&tables)?)?;
    }
    let crossings: Vec<String> = tables
        .iter()
        .map(|t| match t.crossover_bandwidth {
            Some(b) => format!("{}: {:.1} MHz", t.label, b / 1e6),
            None => format!("{}: none", t.label),
        })
        .collect();
    Ok(format!(
        "purity-vs-pump: {} bandwidths, crossover to S >= 0.9 at {}",
        sigmas.len(),
        crossings.join(", ")
    ))
}

// --- brightness / stability ----------------------------------------------

pub fn brightness(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let (_, point) = anchored_point(resolved)?;
    let report = enhancement_factor(resolved.source()?, &point, resolved.temperature)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["metric", "value"]);
        csv.row(["clustering_factor".into(), num(report.clustering_factor)]);
        csv.row(["finesse_signal".into(), num(report.finesse_signal)]);
        csv.row(["finesse_idler".into(), num(report.finesse_idler)]);
        csv.row(["escape_probability".into(), num(report.escape_probability)]);
        csv.row([
            "enhancement_proportional".into(),
            num(report.enhancement_proportional),
        ]);
        csv.row([
            "relative_spectral_brightness".into(),
            num(report.relative_spectral_brightness),
        ]);
        write_artifact(out, "brightness.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "brightness.json", &sorted_json(&report)?)?;
    }
    Ok(format!(
        "brightness: enhancement {:.4e}, escape probability {:.4}, relative spectral brightness {:.4e}",
        report.enhancement_proportional,
        report.escape_probability,
        report.relative_spectral_brightness
    ))
}

pub fn stability(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let op = anchored(resolved)?;
    let report = stability_windows(resolved.source()?, op.pump_frequency, resolved.temperature)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["parameter", "setpoint", "halfwidth"]);
        csv.row([
            "pump_frequency_hz".into(),
            num(report.pump.setpoint),
            num(report.pump.halfwidth),
        ]);
        csv.row([
            "temperature_c".into(),
            num(report.temperature.setpoint),
            num(report.temperature.halfwidth),
        ]);
        write_artifact(out, "stability.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "stability.json", &sorted_json(&report)?)?;
    }
    Ok(format!(
        "stability: pump halfwidth {:.2} MHz, temperature halfwidth {:.2} mK",
        report.pump.halfwidth / 1e6,
        report.temperature.halfwidth * 1e3
    ))
}

// --- fine-tune -------------------------------------------------------------

pub fn fine_tune(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let table = &resolved.file.fine_tune;
    let max = table.max_offset_ghz.unwrap_or(2.3) * 1e9;
    let steps = table.steps.unwrap_or(47);
    let offsets = linear_axis(-max, max, steps)?;
    let (_, point) = anchored_point(resolved)?;
    let spec = resolved.source()?;
    let schedule = fine_tune_schedule(spec, &point, resolved.temperature, &offsets)?;
    let coefficients = cotuning_coefficients(spec, &point, resolved.temperature)?;
    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["offset_ghz", "temperature_c", "pump_offset_ghz"]);
        for e in &schedule.entries {
            csv.row([
                num(ghz(e.signal_offset)),
                num(e.temperature),
                num(ghz(e.pump_frequency - schedule.setpoint.pump_frequency)),
            ]);
        }
        write_artifact(out, "fine_tune.csv", &csv.finish())?;
    }
    if format.wants_json() {
        write_artifact(out, "fine_tune.json", &sorted_json(&schedule)?)?;
    }
    Ok(format!(
        "fine-tune: {} points over +-{:.2} GHz, dT/dnu_s = {:.4} K/GHz, dnu_p/dnu_s = {:.4}",
        schedule.entries.len(),
        ghz(max),
        coefficients.dt_dnu_s * 1e9,
        coefficients.dnu_p_dnu_s
    ))
}

// --- design ----------------------------------------------------------------

#[derive(Serialize)]
struct DesignArtifact<'a> {
    feasible: bool,
    binding_constraint: Option<&'static str>,
    binding_detail: &'a Option<String>,
    memory_is_signal: bool,
    length_mm: f64,
    poling_period_um: f64,
    input_reflectivity: f64,
    exit_reflectivity_signal: f64,
    exit_reflectivity_idler: f64,
    loss_signal_db_per_cm: f64,
    loss_idler_db_per_cm: f64,
    operating_temperature_c: f64,
    pump_frequency_hz: f64,
    pump_bandwidth_hz: f64,
    signal_wavelength_nm: f64,
    idler_wavelength_nm: f64,
    operating: &'a OperatingPoint,
    assumptions: &'a [String],
    predicted: &'a respdc_core::DesignPrediction,
}

pub fn design(resolved: &ResolvedConfig, out: &Path, format: OutputFormat) -> CliResult<String> {
    let table = resolved
        .file
        .design
        .as_ref()
        .ok_or_else(|| CliError::usage("this subcommand needs a [design] table"))?;
    let mut target = MemoryTarget::new(
        table.memory_wavelength_nm * 1e-9,
        table.desired_bandwidth_mhz * 1e6,
        table.minimum_total_purity,
    );
    if let Some(nm) = table.pump_wavelength_nm {
        target.pump_wavelength = nm * 1e-9;
    }
    let overrides = DesignOverrides {
        length: table.length_mm.map(|l| l * 1e-3),
        exit_reflectivity: table.exit_reflectivity,
        pump_bandwidth: table.pump_bandwidth_mhz.map(|m| m * 1e6),
    };
    let result = design_with_overrides(&target, &overrides)?;

    if format.wants_csv() {
        let mut csv = Csv::new();
        csv.row(["metric", "value"]);
        csv.row(["feasible".into(), result.feasible.to_string()]);
        csv.row([
            "binding_constraint".into(),
            result.binding_constraint.unwrap_or("").to_string(),
        ]);
        csv.row(["length_mm".into(), num(result.source.length_l0 * 1e3)]);
        csv.row([
            "exit_reflectivity".into(),
            num(result.source.mirrors_signal.r2),
        ]);
        csv.row(["poling_period_um".into(), num(result.poling_period * 1e6)]);
        csv.row([
            "pump_bandwidth_mhz".into(),
            num(result.pump.bandwidth_fwhm / 1e6),
        ]);
        csv.row([
            "signal_wavelength_nm".into(),
            num(result.signal_wavelength * 1e9),
        ]);
        csv.row([
            "idler_wavelength_nm".into(),
            num(result.idler_wavelength * 1e9),
        ]);
        csv.row([
            "mode_excitation".into(),
            num(result.predicted.purity.mode_excitation),
        ]);
        csv.row([
            "schmidt_number".into(),
            num(result.predicted.purity.schmidt_number),
        ]);
        csv.row([
            "spectral_purity".into(),
            num(result.predicted.purity.spectral_purity),
        ]);
        csv.row([
            "total_purity".into(),
            num(result.predicted.purity.total_purity),
        ]);
        csv.row([
            "signal_linewidth_hz".into(),
            num(result.predicted.signal_linewidth),
        ]);
        csv.row([
            "idler_linewidth_hz".into(),
            num(result.predicted.idler_linewidth),
        ]);
        csv.row([
            "memory_linewidth_hz".into(),
            num(result.predicted.memory_linewidth),
        ]);
        csv.row([
            "escape_probability".into(),
            num(result.predicted.brightness.escape_probability),
        ]);
        csv.row([
            "enhancement_proportional".into(),
            num(result.predicted.brightness.enhancement_proportional),
        ]);
        write_artifact(out, "design.csv", &csv.finish())?;
    }
    if format.wants_json() {
        let artifact = DesignArtifact {
            feasible: result.feasible,
            binding_constraint: result.binding_constraint,
            binding_detail: &result.binding_detail,
            memory_is_signal: result.memory_is_signal,
            length_mm: result.source.length_l0 * 1e3,
            poling_period_um: result.poling_period * 1e6,
            input_reflectivity: result.source.mirrors_signal.r1,
            exit_reflectivity_signal: result.source.mirrors_signal.r2,
            exit_reflectivity_idler: result.source.mirrors_idler.r2,
            loss_signal_db_per_cm: result.source.loss_signal_db_per_cm,
            loss_idler_db_per_cm: result.source.loss_idler_db_per_cm,
            operating_temperature_c: result.operating.temperature,
            pump_frequency_hz: result.pump.central_frequency,
            pump_bandwidth_hz: result.pump.bandwidth_fwhm,
            signal_wavelength_nm: result.signal_wavelength * 1e9,
            idler_wavelength_nm: result.idler_wavelength * 1e9,
            operating: &result.operating,
            assumptions: &result.assumptions,
            predicted: &result.predicted,
        };
        write_artifact(out, "design.json", &sorted_json(&artifact)?)?;
    }
    let verdict = if result.feasible {
        "feasible".to_string()
    } else {
        format!(
            "infeasible ({})",
            result.binding_constraint.unwrap_or("unspecified")
        )
    };
    let memory_nm = if result.memory_is_signal {
        result.signal_wavelength * 1e9
    } else {
        result.idler_wavelength * 1e9
    };
    let partner_nm = if result.memory_is_signal {
        result.idler_wavelength * 1e9
    } else {
        result.signal_wavelength * 1e9
    };
    Ok(format!(
        "design: {verdict}, P={:.3}, memory {:.1} nm / partner {:.1} nm, L={} mm, R2={}, sigma={:.1} MHz",
        result.predicted.purity.total_purity,
        memory_nm,
        partner_nm,
        result.source.length_l0 * 1e3,
        result.source.mirrors_signal.r2,
        result.pump.bandwidth_fwhm / 1e6
    ))
}
