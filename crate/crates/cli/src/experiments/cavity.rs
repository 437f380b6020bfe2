//! Detector-stack absorbance map over (cavity, AR) thickness via the layered
//! matrix solver. One job produces the whole grid as a CSV plus its argmax.

use backlight::tmm::{
    cavity_sweep, detector_stack, PolarizationSP, DETECTOR_MIRROR_LAYER, DETECTOR_NANOWIRE_LAYER,
};
use backlight::MaterialDb;
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::svg::heatmap;
use crate::tables::parse_csv;

use super::snspd::DetectorGeom;

const GRID_FILE: &str = "absorbance.csv";

/// Layer index of the cavity spacer inside the detector stack.
const CAVITY_LAYER: usize = 2;
/// Layer index of the AR coat inside the detector stack.
const AR_LAYER: usize = 0;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeSpec {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

impl Default for RangeSpec {
    fn default() -> Self {
        Self {
            start_nm: 150.0,
            stop_nm: 350.0,
            step_nm: 5.0,
        }
    }
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        if !(self.step_nm > 0.0) || !(self.stop_nm >= self.start_nm) || self.start_nm <= 0.0 {
            return Err(format!(
                "range {}..{} step {} is not a positive ascending grid",
                self.start_nm, self.stop_nm, self.step_nm
            ));
        }
        let n = ((self.stop_nm - self.start_nm) / self.step_nm).round() as usize + 1;
        Ok((0..n).map(|i| self.start_nm + i as f64 * self.step_nm).collect())
    }
}

fn d_wavelength() -> f64 {
    1560.0
}
fn d_incidence() -> String {
    "Si".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    #[serde(default)]
    pub detector: DetectorGeom,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "d_incidence")]
    pub incidence_material: String,
    #[serde(default)]
    pub cavity_range: RangeSpec,
    #[serde(default)]
    pub ar_range: RangeSpec,
}

pub fn parse(point: &toml::Value) -> Result<CavityParams, String> {
    let p: CavityParams = super::strict(point)?;
    p.cavity_range.values()?;
    p.ar_range.values()?;
    if !(p.wavelength_nm > 0.0) {
        return Err("wavelength_nm must be > 0".into());
    }
    Ok(p)
}

pub fn run(p: &CavityParams) -> Result<JobOutput, String> {
    let db = MaterialDb::builtin();
    let spec = p.detector.to_spec(15.0, 0.0);
    let base = detector_stack(
        &db,
        &spec,
        &p.incidence_material,
        p.wavelength_nm,
        PolarizationSP::S,
    )
    .map_err(|e| e.to_string())?;
    let t_c = p.cavity_range.values()?;
    let t_ar = p.ar_range.values()?;
    let sweep = cavity_sweep(
        &base,
        CAVITY_LAYER,
        &t_c,
        AR_LAYER,
        &t_ar,
        DETECTOR_NANOWIRE_LAYER,
        DETECTOR_MIRROR_LAYER,
    )
    .map_err(|e| e.to_string())?;
    Ok(JobOutput {
        rows: Vec::new(),
        artifacts: vec![(GRID_FILE.to_string(), sweep.to_csv().into_bytes())],
        summary: serde_json::json!({
            "argmax_t_cavity_nm": sweep.argmax.0,
            "argmax_t_ar_nm": sweep.argmax.1,
            "max_absorbance": sweep.argmax.2,
        }),
    })
}

fn plot_from_grid(text: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let (_, rows) = parse_csv(text).map_err(|e| e.to_string())?;
    let mut t_c: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let mut t_ar: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    t_c.sort_by(f64::total_cmp);
    t_c.dedup();
    t_ar.sort_by(f64::total_cmp);
    t_ar.dedup();
    if t_c.len() * t_ar.len() != rows.len() {
        return Err("absorbance grid is not a full cartesian product".into());
    }
    let mut values = vec![0.0; rows.len()];
    let mut best = (t_c[0], t_ar[0], f64::MIN);
    for r in &rows {
        let ic = t_c.partition_point(|v| *v < r[0]);
        let ia = t_ar.partition_point(|v| *v < r[1]);
        values[ic * t_ar.len() + ia] = r[4];
        if r[4] > best.2 {
            best = (r[0], r[1], r[4]);
        }
    }
    let svg = heatmap(
        "Nanowire absorbance",
        "AR thickness (nm)",
        "cavity thickness (nm)",
        &t_ar,
        &t_c,
        &values,
        Some((best.1, best.0)),
    );
    let summary = serde_json::json!({
        "argmax_t_cavity_nm": best.0,
        "argmax_t_ar_nm": best.1,
        "max_absorbance": best.2,
    });
    Ok(vec![
        ("heatmap.svg".to_string(), svg.into_bytes()),
        (
            "summary.json".to_string(),
            serde_json::to_vec_pretty(&summary).map_err(|e| e.to_string())?,
        ),
    ])
}

pub fn finalize(jobs: &[(String, Option<&JobOutput>)]) -> Result<Vec<(String, Vec<u8>)>, String> {
    // Only a single-job map gets a combined plot; sweeps keep per-job grids.
    let done: Vec<&JobOutput> = jobs.iter().filter_map(|(_, j)| *j).collect();
    if done.len() != 1 {
        return Ok(Vec::new());
    }
    let grid = done[0]
        .artifacts
        .iter()
        .find(|(name, _)| name == GRID_FILE)
        .ok_or("cavity job produced no absorbance grid")?;
    let text = std::str::from_utf8(&grid.1).map_err(|e| e.to_string())?;
    plot_from_grid(text)
}

pub fn replot(dir: &std::path::Path, grid_names: &[String]) -> Result<Vec<(String, Vec<u8>)>, String> {
    if grid_names.len() != 1 {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(dir.join(&grid_names[0])).map_err(|e| e.to_string())?;
    plot_from_grid(&text)
}
