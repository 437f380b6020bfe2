//! Grating-coupler transmission: launch the film's guided mode at the
//! coupling waveguide, measure the power radiated down into the substrate,
//! and profile the beam at chosen depths below the buried oxide.

use backlight::fdtd::{run_scene, MonitorSpec, SourceSpec};
use backlight::geometry::{build_source_scene, GratingSpec};
use backlight::modes::{solve_modes, Polarization, SlabStack};
use backlight::MaterialDb;
use serde::Deserialize;

use crate::cache::JobOutput;
use crate::manifest::RunManifest;
use crate::svg::{line_plot, Series};
use crate::tables::{parse_csv, write_csv};

pub const COLUMNS: &[&str] = &[
    "depth_um",
    "centroid_um",
    "width_um",
    "gaussian_residual",
    "peak_intensity",
];

/// Grating cross-section knobs, defaulting to the reference device on a
/// desk-scale 25 µm substrate.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcGeom {
    pub pitch_um: f64,
    pub ff_start: f64,
    pub apodization: f64,
    pub num_teeth: usize,
    pub film_nm: f64,
    pub etch_nm: f64,
    pub clad_um: f64,
    pub reflector_nm: f64,
    pub box_um: f64,
    pub substrate_um: f64,
    pub waveguide_um: f64,
    pub tail_um: f64,
}

impl Default for GcGeom {
    fn default() -> Self {
        let r = GratingSpec::reference_design();
        Self {
            pitch_um: r.pitch_um,
            ff_start: r.ff_start,
            apodization: r.apodization,
            num_teeth: r.num_teeth,
            film_nm: r.film_thickness_nm,
            etch_nm: r.etch_depth_nm,
            clad_um: r.clad_thickness_um,
            reflector_nm: r.top_reflector_nm,
            box_um: r.box_thickness_um,
            substrate_um: 25.0,
            waveguide_um: r.coupling_waveguide_length_um,
            tail_um: r.tail_margin_um,
        }
    }
}

impl GcGeom {
    pub fn to_spec(&self) -> GratingSpec {
        let mut s = GratingSpec::reference_design();
        s.pitch_um = self.pitch_um;
        s.ff_start = self.ff_start;
        s.apodization = self.apodization;
        s.num_teeth = self.num_teeth;
        s.film_thickness_nm = self.film_nm;
        s.etch_depth_nm = self.etch_nm;
        s.clad_thickness_um = self.clad_um;
        s.top_reflector_nm = self.reflector_nm;
        s.box_thickness_um = self.box_um;
        s.substrate_thickness_um = self.substrate_um;
        s.coupling_waveguide_length_um = self.waveguide_um;
        s.tail_margin_um = self.tail_um;
        s
    }

    /// Scene y of the oxide/substrate interface.
    pub fn substrate_top_um(&self) -> f64 {
        self.film_nm * 1e-3 + self.box_um
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
fn d_depths() -> Vec<f64> {
    vec![2.0, 24.8]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcParams {
    #[serde(default)]
    pub geometry: GcGeom,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "d_cpw")]
    pub cells_per_wavelength: f64,
    #[serde(default = "d_bandwidth")]
    pub fractional_bandwidth: f64,
    #[serde(default = "d_cpml")]
    pub cpml_cells: usize,
    /// Depths below the oxide/substrate interface to profile the beam at.
    #[serde(default = "d_depths")]
    pub profile_depths_um: Vec<f64>,
}

pub fn parse(point: &toml::Value) -> Result<GcParams, String> {
    let p: GcParams = super::strict(point)?;
    p.geometry.to_spec().validate().map_err(|e| e.to_string())?;
    for &d in &p.profile_depths_um {
        if !(d > 0.0 && d < p.geometry.substrate_um) {
            return Err(format!(
                "profile depth {d} must lie inside the {} um substrate",
                p.geometry.substrate_um
            ));
        }
    }
    Ok(p)
}

/// Fundamental TE mode of the film between its claddings, placed in scene
/// coordinates (film top at y = 0) inside the coupling waveguide.
pub fn guided_source(
    db: &MaterialDb,
    spec: &GratingSpec,
    wavelength_nm: f64,
    x_um: f64,
) -> Result<SourceSpec, String> {
    let stack = SlabStack::from_materials(
        db,
        &spec.clad_material,
        &[(&spec.film_material, spec.film_thickness_nm)],
        &spec.box_material,
        wavelength_nm,
        Polarization::TE,
    )
    .map_err(|e| e.to_string())?;
    let modes = solve_modes(&stack).map_err(|e| e.to_string())?;
    let mode = modes.first().ok_or("film guides no mode")?;
    Ok(SourceSpec::GuidedMode {
        x_um,
        profile_origin_y_um: 0.0,
        profile: mode.profile.clone(),
        n_eff: mode.n_eff,
    })
}

fn beam_artifact_name(index: usize, depth_um: f64) -> String {
    format!("beam_depth{index}_{depth_um:.2}um.csv")
}

pub fn run(p: &GcParams) -> Result<JobOutput, String> {
    let db = MaterialDb::builtin();
    let spec = p.geometry.to_spec();
    let scene = build_source_scene(&spec, None).map_err(|e| e.to_string())?;
    let config = super::fdtd_config(
        &db,
        &scene,
        p.wavelength_nm,
        p.cells_per_wavelength,
        p.fractional_bandwidth,
        p.cpml_cells,
        &[spec.reflector_material.clone()],
    )?;
    let src = guided_source(&db, &spec, p.wavelength_nm, 1.0)?;
    let top = p.geometry.substrate_top_um();
    let x_max = scene.x1_um;
    let span = (0.3, x_max - 0.3);
    let mut monitors = vec![
        MonitorSpec::horizontal("down", top + 0.5, span.0, span.1),
        MonitorSpec::vertical("back", 0.45, -1.4, top),
    ];
    for (i, &d) in p.profile_depths_um.iter().enumerate() {
        monitors.push(MonitorSpec::horizontal(
            format!("beam{i}"),
            top + d,
            span.0,
            span.1,
        ));
    }
    let result = run_scene(&scene, &db, &config, &src, &monitors).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for (i, &d) in p.profile_depths_um.iter().enumerate() {
        let rec = &result.records[&format!("beam{i}")];
        let profile = rec.beam_profile(0).map_err(|e| e.to_string())?;
        rows.push(vec![
            d,
            profile.centroid_um,
            profile.width_um,
            profile.gaussian_residual,
            profile.peak_intensity,
        ]);
        artifacts.push((beam_artifact_name(i, d), rec.to_csv(0).into_bytes()));
    }
    Ok(JobOutput {
        rows,
        artifacts,
        summary: serde_json::json!({
            "downward_transmission": result.records["down"].flux[0],
            "backward_flux": result.records["back"].flux[0],
            "steps": result.steps,
            "residual_ratio": result.residual_ratio,
        }),
    })
}

fn profiles_svg(curves: &[(String, Vec<(f64, f64)>)]) -> Vec<u8> {
    let series: Vec<Series> = curves
        .iter()
        .map(|(label, pts)| Series {
            label,
            points: pts,
        })
        .collect();
    line_plot(
        "Radiated beam profiles",
        "x (um)",
        "normalized intensity",
        &series,
    )
    .into_bytes()
}

fn curve_from_beam_csv(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let (cols, rows) = parse_csv(text)?;
    let xi = cols.iter().position(|c| c == "position_um").ok_or("no position column")?;
    let ii = cols.iter().position(|c| c == "intensity").ok_or("no intensity column")?;
    let peak = rows.iter().map(|r| r[ii]).fold(0.0f64, f64::max).max(1e-300);
    Ok(rows.iter().map(|r| (r[xi], r[ii] / peak)).collect())
}

pub fn finalize(
    rows: &[Vec<f64>],
    jobs: &[(String, Option<&JobOutput>)],
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = vec![("gc.csv".to_string(), write_csv(COLUMNS, rows).into_bytes())];
    let mut curves = Vec::new();
    for (label, output) in jobs {
        let Some(output) = output else { continue };
        for ((name, bytes), row) in output.artifacts.iter().zip(&output.rows) {
            let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
            let tag = if jobs.len() > 1 {
                format!("{label} {:.1} um", row[0])
            } else {
                format!("depth {:.1} um", row[0])
            };
            let _ = name;
            curves.push((tag, curve_from_beam_csv(text)?));
        }
    }
    if !curves.is_empty() {
        out.push(("profiles.svg".to_string(), profiles_svg(&curves)));
    }
    let summaries: Vec<serde_json::Value> = jobs
        .iter()
        .filter_map(|(label, o)| o.map(|o| serde_json::json!({"job": label, "result": o.summary})))
        .collect();
    out.push((
        "summary.json".to_string(),
        serde_json::to_vec_pretty(&summaries).map_err(|e| e.to_string())?,
    ));
    Ok(out)
}

pub fn replot(
    dir: &std::path::Path,
    manifest: &RunManifest,
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut curves = Vec::new();
    for job in &manifest.jobs {
        for artifact in &job.artifacts {
            if !artifact.path.contains("beam_depth") {
                continue;
            }
            let text = std::fs::read_to_string(dir.join(&artifact.path))
                .map_err(|e| format!("{}: {e}", artifact.path))?;
            curves.push((artifact.path.clone(), curve_from_beam_csv(&text)?));
        }
    }
    if curves.is_empty() {
        return Ok(Vec::new());
    }
    Ok(vec![("profiles.svg".to_string(), profiles_svg(&curves))])
}
