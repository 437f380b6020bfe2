//! The experiment kinds: parameter schemas, per-point execution, and
//! whole-run artifact assembly. Each kind owns a strict schema so unknown
//! keys in a config fail before any solver starts.

pub mod budget;
pub mod cavity;
pub mod gc;
pub mod pump;
pub mod snspd;
pub mod thermal;

use backlight::fdtd::{recommended_resolution_um, FdtdConfig, CELLS_PER_WAVELENGTH};
use backlight::geometry::Scene;
use backlight::MaterialDb;
use serde::de::DeserializeOwned;

use crate::cache::JobOutput;
use crate::config::ExperimentKind;

pub enum ParsedParams {
    Budget(budget::BudgetParams),
    Pump(pump::PumpParams),
    Gc(gc::GcParams),
    Snspd(snspd::SnspdParams),
    Cavity(cavity::CavityParams),
    Thermal(thermal::ThermalParams),
}

pub(crate) fn strict<T: DeserializeOwned>(point: &toml::Value) -> Result<T, String> {
    point.clone().try_into().map_err(|e: toml::de::Error| e.to_string())
}

pub fn parse(kind: ExperimentKind, point: &toml::Value) -> Result<ParsedParams, String> {
    Ok(match kind {
        ExperimentKind::Budget => ParsedParams::Budget(budget::parse(point)?),
        ExperimentKind::PumpAttenuation => ParsedParams::Pump(pump::parse(point)?),
        ExperimentKind::GcTransmission => ParsedParams::Gc(gc::parse(point)?),
        ExperimentKind::SnspdFdtdSweep => ParsedParams::Snspd(snspd::parse(point)?),
        ExperimentKind::CavityMap => ParsedParams::Cavity(cavity::parse(point)?),
        ExperimentKind::Thermal => ParsedParams::Thermal(thermal::parse(point)?),
    })
}

/// Columns of the combined CSV; empty when a kind speaks only through
/// per-job artifacts.
pub fn columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Budget => budget::COLUMNS,
        ExperimentKind::PumpAttenuation => pump::COLUMNS,
        ExperimentKind::GcTransmission => gc::COLUMNS,
        ExperimentKind::SnspdFdtdSweep => snspd::COLUMNS,
        ExperimentKind::CavityMap => &[],
        ExperimentKind::Thermal => thermal::COLUMNS,
    }
}

pub fn run_point(params: &ParsedParams) -> Result<JobOutput, String> {
    match params {
        ParsedParams::Budget(p) => budget::run(p),
        ParsedParams::Pump(p) => pump::run(p),
        ParsedParams::Gc(p) => gc::run(p),
        ParsedParams::Snspd(p) => snspd::run(p),
        ParsedParams::Cavity(p) => cavity::run(p),
        ParsedParams::Thermal(p) => thermal::run(p),
    }
}

/// Whole-run outputs built from the per-job results, in job-index order.
/// Failed jobs appear as `None`; the combined artifacts cover what finished.
pub fn finalize(
    kind: ExperimentKind,
    jobs: &[(String, Option<&JobOutput>)],
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let rows: Vec<Vec<f64>> = jobs
        .iter()
        .filter_map(|(_, out)| out.map(|o| o.rows.clone()))
        .flatten()
        .collect();
    match kind {
        ExperimentKind::Budget => budget::finalize(&rows, jobs),
        ExperimentKind::PumpAttenuation => pump::finalize(&rows),
        ExperimentKind::GcTransmission => gc::finalize(&rows, jobs),
        ExperimentKind::SnspdFdtdSweep => snspd::finalize(&rows),
        ExperimentKind::CavityMap => cavity::finalize(jobs),
        ExperimentKind::Thermal => thermal::finalize(&rows, jobs),
    }
}

/// Regenerate the plot artifacts from the CSVs a previous run left on disk.
pub fn replot(
    kind: ExperimentKind,
    dir: &std::path::Path,
    manifest: &crate::manifest::RunManifest,
) -> Result<Vec<(String, Vec<u8>)>, String> {
    match kind {
        ExperimentKind::Budget => Ok(Vec::new()),
        ExperimentKind::PumpAttenuation => pump::replot(dir),
        ExperimentKind::GcTransmission => gc::replot(dir, manifest),
        ExperimentKind::SnspdFdtdSweep => snspd::replot(dir),
        ExperimentKind::CavityMap => {
            cavity::replot(dir, &per_job_artifacts(manifest, "absorbance.csv"))
        }
        ExperimentKind::Thermal => {
            thermal::replot(dir, &per_job_artifacts(manifest, "temperature.csv"))
        }
    }
}

fn per_job_artifacts(manifest: &crate::manifest::RunManifest, suffix: &str) -> Vec<String> {
    manifest
        .jobs
        .iter()
        .flat_map(|j| j.artifacts.iter())
        .filter(|a| a.path.ends_with(suffix))
        .map(|a| a.path.clone())
        .collect()
}

/// FDTD config at `cells_per_wavelength` resolution in the densest scene
/// material, metals excluded (they are resolved by skin depth handling, not
/// by the bulk-index rule).
pub(crate) fn fdtd_config(
    db: &MaterialDb,
    scene: &Scene,
    wavelength_nm: f64,
    cells_per_wavelength: f64,
    fractional_bandwidth: f64,
    cpml_cells: usize,
    exclude: &[String],
) -> Result<FdtdConfig, String> {
    if !(cells_per_wavelength >= 4.0) {
        return Err(format!(
            "cells_per_wavelength must be >= 4, got {cells_per_wavelength}"
        ));
    }
    let base = recommended_resolution_um(db, scene, &[wavelength_nm], exclude)
        .map_err(|e| e.to_string())?;
    let res = base * CELLS_PER_WAVELENGTH / cells_per_wavelength;
    let mut config = FdtdConfig::new(res, vec![wavelength_nm]);
    config.fractional_bandwidth = fractional_bandwidth;
    config.cpml_cells = cpml_cells;
    Ok(config)
}
