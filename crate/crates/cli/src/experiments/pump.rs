//! Plane-wave attenuation through a uniform absorbing slab: calibrated
//! transmission at a ladder of depths, then a dB-per-µm line fit.
//!
//! The source line spans the full scene width so it continues through the
//! side absorbers; its ends still shed a weak cylindrical wave off the
//! conductor ring, so configs should keep the monitor band far enough from
//! the side walls that the corner cone cannot reach the deepest monitor.

use backlight::fdtd::{run_scene, MonitorSpec, SourceSpec};
use backlight::geometry::Scene;
use backlight::MaterialDb;
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::fit::attenuation_fit;
use crate::svg::{line_plot, Series};
use crate::tables::{read_csv, write_csv};

pub const COLUMNS: &[&str] = &["depth_um", "transmission", "transmission_db"];

fn d_material() -> String {
    "Si".into()
}
fn d_wavelength() -> f64 {
    780.0
}
fn d_source_depth() -> f64 {
    0.6
}
fn d_cpw() -> f64 {
    20.0
}
fn d_bandwidth() -> f64 {
    0.3
}
fn d_cpml() -> usize {
    12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpParams {
    #[serde(default = "d_material")]
    pub substrate_material: String,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
    pub width_um: f64,
    pub height_um: f64,
    #[serde(default = "d_source_depth")]
    pub source_depth_um: f64,
    pub monitor_depths_um: Vec<f64>,
    pub monitor_x0_um: f64,
    pub monitor_x1_um: f64,
    #[serde(default = "d_cpw")]
    pub cells_per_wavelength: f64,
    #[serde(default = "d_bandwidth")]
    pub fractional_bandwidth: f64,
    #[serde(default = "d_cpml")]
    pub cpml_cells: usize,
}

pub fn parse(point: &toml::Value) -> Result<PumpParams, String> {
    let p: PumpParams = super::strict(point)?;
    if !(p.width_um > 0.0 && p.height_um > 0.0) {
        return Err("scene extent must be > 0".into());
    }
    if p.monitor_depths_um.len() < 3 {
        return Err("need at least 3 monitor depths for a slope fit".into());
    }
    for &d in &p.monitor_depths_um {
        if !(d > p.source_depth_um && d < p.height_um) {
            return Err(format!(
                "monitor depth {d} must lie between the source ({}) and the scene bottom ({})",
                p.source_depth_um, p.height_um
            ));
        }
    }
    if !(p.monitor_x0_um >= 0.0 && p.monitor_x1_um <= p.width_um && p.monitor_x0_um < p.monitor_x1_um)
    {
        return Err("monitor span must lie inside the scene".into());
    }
    Ok(p)
}

pub fn run(p: &PumpParams) -> Result<JobOutput, String> {
    let db = MaterialDb::builtin();
    let scene = Scene::new(
        p.substrate_material.clone(),
        (0.0, 0.0, p.width_um, p.height_um),
    )
    .map_err(|e| e.to_string())?;
    let config = super::fdtd_config(
        &db,
        &scene,
        p.wavelength_nm,
        p.cells_per_wavelength,
        p.fractional_bandwidth,
        p.cpml_cells,
        &[],
    )?;
    let src = SourceSpec::PlaneWave {
        y_um: p.source_depth_um,
        x0_um: 0.0,
        x1_um: p.width_um,
    };
    let monitors: Vec<MonitorSpec> = p
        .monitor_depths_um
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            MonitorSpec::horizontal(format!("t{i:02}"), d, p.monitor_x0_um, p.monitor_x1_um)
        })
        .collect();
    let result = run_scene(&scene, &db, &config, &src, &monitors).map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(monitors.len());
    for i in 0..monitors.len() {
        let rec = &result.records[&format!("t{i:02}")];
        let t = rec.flux[0];
        let db_val = 10.0 * t.max(1e-300).log10();
        rows.push(vec![rec.line_position_um, t, db_val]);
    }
    Ok(JobOutput {
        rows,
        artifacts: Vec::new(),
        summary: serde_json::json!({
            "steps": result.steps,
            "residual_ratio": result.residual_ratio,
            "unconverged": result.unconverged,
        }),
    })
}

fn plot(rows: &[Vec<f64>]) -> Result<(Vec<u8>, serde_json::Value), String> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[2])).collect();
    let fit = attenuation_fit(&pts).map_err(|e| e.to_string())?;
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
            (a.0.min(p.0), a.1.max(p.0))
        });
    let line = [
        (x0, fit.intercept + fit.slope * x0),
        (x1, fit.intercept + fit.slope * x1),
    ];
    let svg = line_plot(
        "Transmission vs depth",
        "depth (um)",
        "transmission (dB)",
        &[
            Series {
                label: "measured",
                points: &pts,
            },
            Series {
                label: "fit",
                points: &line,
            },
        ],
    );
    let summary = serde_json::json!({
        "slope_db_per_um": fit.slope,
        "intercept_db": fit.intercept,
        "r_squared": fit.r_squared,
    });
    Ok((svg.into_bytes(), summary))
}

pub fn finalize(rows: &[Vec<f64>]) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = vec![(
        "attenuation.csv".to_string(),
        write_csv(COLUMNS, rows).into_bytes(),
    )];
    if rows.len() >= 3 {
        let (svg, summary) = plot(rows)?;
        out.push(("attenuation.svg".to_string(), svg));
        out.push((
            "summary.json".to_string(),
            serde_json::to_vec_pretty(&summary).map_err(|e| e.to_string())?,
        ));
    }
    Ok(out)
}

pub fn replot(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let (_, rows) = read_csv(&dir.join("attenuation.csv")).map_err(|e| e.to_string())?;
    if rows.len() < 3 {
        return Ok(Vec::new());
    }
    let (svg, _) = plot(&rows)?;
    Ok(vec![("attenuation.svg".to_string(), svg)])
}
