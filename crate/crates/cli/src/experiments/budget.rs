//! Closed-form pump-filter budget: suppression and CAR per substrate
//! thickness, absorption depths, and the pair-probability operating point.

use backlight::budget::{
    depth_for_absorbed_fraction, pair_rate_budget, pump_suppression_db, CarCalibration,
    PAIR_CALIBRATION_MW, PAIR_CALIBRATION_PROBABILITY,
};
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::tables::write_csv;

pub const COLUMNS: &[&str] = &["thickness_um", "suppression_db", "car"];

fn d_attenuation() -> f64 {
    0.55
}
fn d_thicknesses() -> Vec<f64> {
    vec![100.0, 200.0, 300.0, 400.0]
}
fn d_fractions() -> Vec<f64> {
    vec![0.99]
}
fn d_pump() -> f64 {
    0.33
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetParams {
    #[serde(default = "d_attenuation")]
    pub attenuation_db_per_um: f64,
    #[serde(default = "d_thicknesses")]
    pub thicknesses_um: Vec<f64>,
    #[serde(default = "d_fractions")]
    pub absorbed_fractions: Vec<f64>,
    #[serde(default = "d_pump")]
    pub pump_power_mw: f64,
}

pub fn parse(point: &toml::Value) -> Result<BudgetParams, String> {
    let p: BudgetParams = super::strict(point)?;
    if !(p.attenuation_db_per_um > 0.0) {
        return Err("attenuation_db_per_um must be > 0".into());
    }
    if p.thicknesses_um.is_empty() {
        return Err("thicknesses_um must not be empty".into());
    }
    for &t in &p.thicknesses_um {
        if !(t > 0.0) {
            return Err(format!("thickness {t} must be > 0"));
        }
    }
    for &f in &p.absorbed_fractions {
        if !(0.0..1.0).contains(&f) {
            return Err(format!("absorbed fraction {f} must be in [0, 1)"));
        }
    }
    Ok(p)
}

pub fn run(p: &BudgetParams) -> Result<JobOutput, String> {
    let car = CarCalibration::device_default();
    let rows: Vec<Vec<f64>> = p
        .thicknesses_um
        .iter()
        .map(|&t| {
            let s = pump_suppression_db(t, p.attenuation_db_per_um);
            vec![t, s, car.estimate(s).car]
        })
        .collect();
    let mut depth_rows = Vec::new();
    for &f in &p.absorbed_fractions {
        let d = depth_for_absorbed_fraction(p.attenuation_db_per_um, f)
            .map_err(|e| e.to_string())?;
        depth_rows.push(vec![f, d]);
    }
    let pair = pair_rate_budget(
        p.pump_power_mw,
        PAIR_CALIBRATION_MW,
        PAIR_CALIBRATION_PROBABILITY,
    )
    .map_err(|e| e.to_string())?;
    let artifacts = vec![(
        "depths.csv".to_string(),
        write_csv(&["absorbed_fraction", "depth_um"], &depth_rows).into_bytes(),
    )];
    Ok(JobOutput {
        rows,
        artifacts,
        summary: serde_json::json!({
            "pair_probability": pair.probability,
            "pair_saturated": pair.saturated,
            "attenuation_db_per_um": p.attenuation_db_per_um,
        }),
    })
}

pub fn finalize(
    rows: &[Vec<f64>],
    jobs: &[(String, Option<&JobOutput>)],
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = vec![(
        "budget.csv".to_string(),
        write_csv(COLUMNS, rows).into_bytes(),
    )];
    let summaries: Vec<&serde_json::Value> = jobs
        .iter()
        .filter_map(|(_, o)| o.map(|o| &o.summary))
        .collect();
    if let Some(first) = summaries.first() {
        out.push((
            "summary.json".to_string(),
            serde_json::to_vec_pretty(first).map_err(|e| e.to_string())?,
        ));
    }
    Ok(out)
}
