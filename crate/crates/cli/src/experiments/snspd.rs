//! Backside detector efficiency: the grating scene plus the detector stack
//! on the substrate backside, with a closed monitor box around the stack.
//! The nanowire layer enters the 2D solver as its effective medium for E
//! along the wires, matching the layered-stack solver's s-polarization.

use backlight::fdtd::{run_scene, snspd_efficiency, MonitorSpec};
use backlight::geometry::{build_source_scene, SnspdStackSpec, NANOWIRE_EM_MATERIAL};
use backlight::materials::OpticalMaterial;
use backlight::tmm::{effective_medium, WireField};
use backlight::MaterialDb;
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::svg::{line_plot, Series};
use crate::tables::{read_csv, write_csv};

use super::gc::{guided_source, GcGeom};

pub const COLUMNS: &[&str] = &[
    "detector_length_um",
    "offset_x_um",
    "eta",
    "entering",
    "leaving_left",
    "leaving_right",
    "leaving_bottom",
];

/// Detector stack knobs, defaulting to the reference design.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorGeom {
    pub t_ar_nm: f64,
    pub t_nbn_nm: f64,
    pub w_nbn_nm: f64,
    pub pitch_s_nm: f64,
    pub t_cavity_nm: f64,
    pub t_reflector_nm: f64,
    pub nanowire_n: f64,
    pub nanowire_k: f64,
}

impl Default for DetectorGeom {
    fn default() -> Self {
        let r = SnspdStackSpec::reference_design();
        Self {
            t_ar_nm: r.t_ar_nm,
            t_nbn_nm: r.t_nbn_nm,
            w_nbn_nm: r.w_nbn_nm,
            pitch_s_nm: r.pitch_s_nm,
            t_cavity_nm: r.t_cavity_nm,
            t_reflector_nm: r.t_reflector_nm,
            nanowire_n: r.nanowire_n,
            nanowire_k: r.nanowire_k,
        }
    }
}

impl DetectorGeom {
    pub fn to_spec(&self, detector_length_um: f64, offset_x_um: f64) -> SnspdStackSpec {
        let mut s = SnspdStackSpec::reference_design();
        s.t_ar_nm = self.t_ar_nm;
        s.t_nbn_nm = self.t_nbn_nm;
        s.w_nbn_nm = self.w_nbn_nm;
        s.pitch_s_nm = self.pitch_s_nm;
        s.t_cavity_nm = self.t_cavity_nm;
        s.t_reflector_nm = self.t_reflector_nm;
        s.nanowire_n = self.nanowire_n;
        s.nanowire_k = self.nanowire_k;
        s.detector_length_um = detector_length_um;
        s.detector_offset_x_um = offset_x_um;
        s
    }
}

fn d_wavelength() -> f64 {
    1560.0
}
fn d_cpw() -> f64 {
    20.0
}
fn d_bandwidth() -> f64 {
    0.25
}
fn d_cpml() -> usize {
    12
}
fn d_length() -> f64 {
    15.0
}
fn d_margin() -> f64 {
    0.15
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnspdParams {
    #[serde(default)]
    pub geometry: GcGeom,
    #[serde(default)]
    pub detector: DetectorGeom,
    #[serde(default = "d_length")]
    pub detector_length_um: f64,
    /// Left edge of the detector; omitted means centered under the grating.
    #[serde(default)]
    pub detector_offset_x_um: Option<f64>,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "d_cpw")]
    pub cells_per_wavelength: f64,
    #[serde(default = "d_bandwidth")]
    pub fractional_bandwidth: f64,
    #[serde(default = "d_cpml")]
    pub cpml_cells: usize,
    #[serde(default = "d_margin")]
    pub monitor_margin_um: f64,
}

pub fn parse(point: &toml::Value) -> Result<SnspdParams, String> {
    let p: SnspdParams = super::strict(point)?;
    p.geometry.to_spec().validate().map_err(|e| e.to_string())?;
    if !(p.detector_length_um > 0.0) {
        return Err("detector_length_um must be > 0".into());
    }
    if !(p.monitor_margin_um > 0.0 && p.monitor_margin_um < 0.3) {
        return Err("monitor_margin_um must sit in (0, 0.3)".into());
    }
    Ok(p)
}

/// Register the homogenized nanowire layer so the rasterizer can resolve it.
pub fn register_nanowire_medium(
    db: &mut MaterialDb,
    spec: &SnspdStackSpec,
    wavelength_nm: f64,
) -> Result<(), String> {
    let host = db
        .optical(&spec.cavity_material)
        .and_then(|m| m.refractive_index(wavelength_nm))
        .map_err(|e| e.to_string())?;
    let em = effective_medium(
        spec.w_nbn_nm,
        spec.pitch_s_nm,
        spec.nanowire_index(),
        host,
        WireField::Parallel,
        wavelength_nm,
    )
    .map_err(|e| e.to_string())?;
    db.insert_optical(OpticalMaterial::constant(
        NANOWIRE_EM_MATERIAL,
        em.index.re,
        em.index.im,
    ));
    Ok(())
}

pub fn run(p: &SnspdParams) -> Result<JobOutput, String> {
    let mut db = MaterialDb::builtin();
    let spec = p.geometry.to_spec();
    let offset = p
        .detector_offset_x_um
        .unwrap_or_else(|| SnspdStackSpec::centered_offset_um(&spec, p.detector_length_um));
    let det = p.detector.to_spec(p.detector_length_um, offset);
    register_nanowire_medium(&mut db, &det, p.wavelength_nm)?;
    let scene = build_source_scene(&spec, Some(&det)).map_err(|e| e.to_string())?;
    let config = super::fdtd_config(
        &db,
        &scene,
        p.wavelength_nm,
        p.cells_per_wavelength,
        p.fractional_bandwidth,
        p.cpml_cells,
        &[
            spec.reflector_material.clone(),
            NANOWIRE_EM_MATERIAL.to_string(),
        ],
    )?;
    let src = guided_source(&db, &spec, p.wavelength_nm, 1.0)?;
    let backside = spec.backside_y_um();
    let stack_bottom = backside + det.stack_thickness_nm() * 1e-3;
    let m = p.monitor_margin_um;
    let (x0, x1) = (offset - m, offset + p.detector_length_um + m);
    if x0 < scene.x0_um || x1 > scene.x1_um {
        return Err(format!(
            "detector box [{x0:.2}, {x1:.2}] um extends outside the scene"
        ));
    }
    let monitors = vec![
        MonitorSpec::horizontal("top", backside - m, x0, x1),
        MonitorSpec::horizontal("bottom", stack_bottom + m, x0, x1),
        MonitorSpec::vertical("left", x0, backside - m, stack_bottom + m),
        MonitorSpec::vertical("right", x1, backside - m, stack_bottom + m),
    ];
    let result = run_scene(&scene, &db, &config, &src, &monitors).map_err(|e| e.to_string())?;
    let r = &result.records;
    let report = snspd_efficiency(&r["top"], &r["left"], &r["right"], &r["bottom"])
        .map_err(|e| e.to_string())?;
    Ok(JobOutput {
        rows: vec![vec![
            p.detector_length_um,
            offset,
            report.eta[0],
            report.entering[0],
            report.leaving_left[0],
            report.leaving_right[0],
            report.leaving_bottom[0],
        ]],
        artifacts: Vec::new(),
        summary: serde_json::json!({
            "steps": result.steps,
            "residual_ratio": result.residual_ratio,
        }),
    })
}

fn plot(rows: &[Vec<f64>]) -> Option<(String, Vec<u8>)> {
    if rows.len() < 2 {
        return None;
    }
    // Plot eta against whichever geometric knob the sweep actually varied.
    let varies = |col: usize| {
        rows.iter()
            .any(|r| (r[col] - rows[0][col]).abs() > 1e-12)
    };
    let (col, label) = if varies(0) {
        (0, "detector length (um)")
    } else {
        (1, "detector offset (um)")
    };
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[col], r[2])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let svg = line_plot(
        "Detection efficiency",
        label,
        "eta",
        &[Series {
            label: "eta",
            points: &pts,
        }],
    );
    Some(("eta.svg".to_string(), svg.into_bytes()))
}

pub fn finalize(rows: &[Vec<f64>]) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = vec![("eta.csv".to_string(), write_csv(COLUMNS, rows).into_bytes())];
    if let Some(best) = rows
        .iter()
        .max_by(|a, b| a[2].total_cmp(&b[2]))
    {
        let summary = serde_json::json!({
            "best_eta": best[2],
            "best_length_um": best[0],
            "best_offset_um": best[1],
        });
        out.push((
            "summary.json".to_string(),
            serde_json::to_vec_pretty(&summary).map_err(|e| e.to_string())?,
        ));
    }
    out.extend(plot(rows));
    Ok(out)
}

pub fn replot(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let (_, rows) = read_csv(&dir.join("eta.csv")).map_err(|e| e.to_string())?;
    Ok(plot(&rows).into_iter().collect())
}
