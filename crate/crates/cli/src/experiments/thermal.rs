//! Steady-state substrate heating for the device-scale dissipation problem:
//! absorbed pump power under the coupler, cold-plate anchor on half the
//! backside, temperature-dependent cryogenic conductivity.

use backlight::thermal::{solve_steady, ThermalProblem};
use backlight::MaterialDb;
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::svg::{line_plot, Series};
use crate::tables::{parse_csv, write_csv};

pub const COLUMNS: &[&str] = &[
    "power_mw",
    "base_temperature_k",
    "hotspot_rise_k",
    "backside_center_rise_k",
    "outflow_mw",
];

const FIELD_FILE: &str = "temperature.csv";

fn d_power() -> f64 {
    0.33
}
fn d_base() -> f64 {
    2.2
}
fn d_material() -> String {
    "Si".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    #[serde(default = "d_power")]
    pub power_mw: f64,
    #[serde(default = "d_base")]
    pub base_temperature_k: f64,
    #[serde(default = "d_material")]
    pub conductivity_material: String,
}

pub fn parse(point: &toml::Value) -> Result<ThermalParams, String> {
    let p: ThermalParams = super::strict(point)?;
    if p.power_mw < 0.0 {
        return Err("power_mw must be >= 0".into());
    }
    if !(p.base_temperature_k > 0.0) {
        return Err("base_temperature_k must be > 0".into());
    }
    Ok(p)
}

pub fn run(p: &ThermalParams) -> Result<JobOutput, String> {
    let db = MaterialDb::builtin();
    let cond = db
        .thermal(&p.conductivity_material)
        .map_err(|e| e.to_string())?
        .clone();
    let problem = ThermalProblem::paper_scale(cond, p.power_mw, p.base_temperature_k);
    let field = solve_steady(&problem).map_err(|e| e.to_string())?;
    let backside = field.rise_at(problem.width_um / 2.0, problem.height_um);
    Ok(JobOutput {
        rows: vec![vec![
            p.power_mw,
            p.base_temperature_k,
            field.max_temperature() - p.base_temperature_k,
            backside,
            field.boundary_outflow_mw,
        ]],
        artifacts: vec![(FIELD_FILE.to_string(), field.to_csv().into_bytes())],
        summary: serde_json::json!({
            "iterations": field.outer_iterations,
            "linear_residual": field.linear_residual,
        }),
    })
}

/// Backside temperature cut from the stored field: the deepest row of cells.
fn backside_plot(text: &str) -> Result<(String, Vec<u8>), String> {
    let (_, rows) = parse_csv(text).map_err(|e| e.to_string())?;
    let y_max = rows
        .iter()
        .map(|r| r[1])
        .fold(f64::MIN, f64::max);
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| (r[1] - y_max).abs() < 1e-9)
        .map(|r| (r[0], r[2]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let svg = line_plot(
        "Backside temperature",
        "x (um)",
        "T (K)",
        &[Series {
            label: "backside",
            points: &pts,
        }],
    );
    Ok(("backside_profile.svg".to_string(), svg.into_bytes()))
}

pub fn finalize(
    rows: &[Vec<f64>],
    jobs: &[(String, Option<&JobOutput>)],
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = vec![(
        "thermal.csv".to_string(),
        write_csv(COLUMNS, rows).into_bytes(),
    )];
    let done: Vec<&JobOutput> = jobs.iter().filter_map(|(_, j)| *j).collect();
    if done.len() == 1 {
        if let Some((_, bytes)) = done[0].artifacts.iter().find(|(n, _)| n == FIELD_FILE) {
            let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
            out.push(backside_plot(text)?);
        }
    }
    Ok(out)
}

pub fn replot(dir: &std::path::Path, field_names: &[String]) -> Result<Vec<(String, Vec<u8>)>, String> {
    if field_names.len() != 1 {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(dir.join(&field_names[0])).map_err(|e| e.to_string())?;
    Ok(vec![backside_plot(&text)?])
}
