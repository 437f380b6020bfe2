//! Parametric device cross-section: apodized grating coupler in a thin film,
//! oxide cladding with a top metal reflector, buried oxide, thick substrate,
//! and an optional backside detector stack.
//!
//! Coordinates are in µm. x runs along the waveguide, y runs downward with
//! y = 0 at the top surface of the guiding film, so "into the substrate" is
//! +y. Scenes are disjoint axis-aligned rectangles over a background
//! material; rectangles are half-open in both axes, which makes point lookup
//! unambiguous on shared edges.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid grating spec: {0}")]
    InvalidGrating(String),
    #[error("invalid detector spec: {0}")]
    InvalidDetector(String),
    #[error("rectangles {a} and {b} of different materials overlap")]
    Overlap { a: String, b: String },
    #[error("grid spacing must be > 0, got dx={dx} dy={dy}")]
    BadSpacing { dx: f64, dy: f64 },
    #[error("scene has no extent")]
    EmptyScene,
}

/// Apodized grating-coupler cross-section parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GratingSpec {
    pub pitch_um: f64,
    pub ff_start: f64,
    pub ff_end: f64,
    /// Fill-factor decrement per tooth.
    pub apodization: f64,
    pub num_teeth: usize,
    pub film_thickness_nm: f64,
    pub etch_depth_nm: f64,
    pub clad_thickness_um: f64,
    pub top_reflector_nm: f64,
    pub box_thickness_um: f64,
    pub substrate_thickness_um: f64,
    pub coupling_waveguide_length_um: f64,
    /// Gap between waveguide end and first tooth.
    pub waveguide_gap_um: f64,
    /// Extra film/clad run-out after the last tooth.
    pub tail_margin_um: f64,
    pub film_material: String,
    pub clad_material: String,
    pub box_material: String,
    pub reflector_material: String,
    pub substrate_material: String,
    pub background_material: String,
}

impl Default for GratingSpec {
    fn default() -> Self {
        Self::reference_design()
    }
}

impl GratingSpec {
    /// The study's grating: 0.71 µm pitch, fill factor ramped from 0.72 by
    /// 0.012 per tooth over 40 teeth, 600 nm film with 350 nm etch, 1.02 µm
    /// oxide clad under a 200 nm gold mirror. Substrate defaults to the full
    /// 400 µm chip; simulation presets override it.
    pub fn reference_design() -> Self {
        Self {
            pitch_um: 0.71,
            ff_start: 0.72,
            ff_end: 0.2,
            apodization: 0.012,
            num_teeth: 40,
            film_thickness_nm: 600.0,
            etch_depth_nm: 350.0,
            clad_thickness_um: 1.02,
            top_reflector_nm: 200.0,
            // Odd quarter-wave multiple at 1560 nm in the oxide so the
            // direct and substrate-reflected downward waves add in phase.
            box_thickness_um: 1.8906,
            substrate_thickness_um: 400.0,
            coupling_waveguide_length_um: 3.0,
            waveguide_gap_um: 0.0,
            tail_margin_um: 4.0,
            film_material: "LN-TE".into(),
            clad_material: "SiO2".into(),
            box_material: "SiO2".into(),
            reflector_material: "Au".into(),
            substrate_material: "Si".into(),
            background_material: "Air".into(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidGrating(m));
        if !(self.ff_end > 0.0 && self.ff_end <= self.ff_start && self.ff_start < 1.0) {
            return bad(format!(
                "need 0 < ff_end <= ff_start < 1, got ff_start={} ff_end={}",
                self.ff_start, self.ff_end
            ));
        }
        if self.apodization < 0.0 {
            return bad(format!("apodization must be >= 0, got {}", self.apodization));
        }
        if self.etch_depth_nm > self.film_thickness_nm {
            return bad(format!(
                "etch depth {} nm exceeds film {} nm",
                self.etch_depth_nm, self.film_thickness_nm
            ));
        }
        if self.num_teeth == 0 {
            return bad("need at least one tooth".into());
        }
        for (name, v) in [
            ("pitch_um", self.pitch_um),
            ("film_thickness_nm", self.film_thickness_nm),
            ("etch_depth_nm", self.etch_depth_nm),
            ("clad_thickness_um", self.clad_thickness_um),
            ("top_reflector_nm", self.top_reflector_nm),
            ("box_thickness_um", self.box_thickness_um),
            ("substrate_thickness_um", self.substrate_thickness_um),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if self.coupling_waveguide_length_um < 0.0
            || self.waveguide_gap_um < 0.0
            || self.tail_margin_um < 0.0
        {
            return bad("lengths must be >= 0".into());
        }
        Ok(())
    }

    /// Fill factors FF_1..FF_n: start value, decremented by the apodization
    /// each tooth, floored at ff_end.
    pub fn fill_factors(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_teeth);
        let mut ff = self.ff_start;
        for _ in 0..self.num_teeth {
            out.push(ff);
            ff = (ff - self.apodization).max(self.ff_end);
        }
        out
    }

    /// Tooth widths d_i = FF_i · pitch.
    pub fn tooth_widths_um(&self) -> Vec<f64> {
        self.fill_factors().iter().map(|ff| ff * self.pitch_um).collect()
    }

    /// x of the first tooth's left edge.
    pub fn grating_start_um(&self) -> f64 {
        self.coupling_waveguide_length_um + self.waveguide_gap_um
    }

    pub fn grating_extent_um(&self) -> f64 {
        self.num_teeth as f64 * self.pitch_um
    }

    /// y of the substrate backside (top film surface is y = 0).
    pub fn backside_y_um(&self) -> f64 {
        self.film_thickness_nm * 1e-3 + self.box_thickness_um + self.substrate_thickness_um
    }
}

/// Backside cavity-coupled nanowire detector stack parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnspdStackSpec {
    pub t_ar_nm: f64,
    pub t_nbn_nm: f64,
    pub w_nbn_nm: f64,
    pub pitch_s_nm: f64,
    pub t_cavity_nm: f64,
    pub t_reflector_nm: f64,
    /// Index of the nanowire metal itself; the in-plane layer uses the
    /// effective medium derived from it.
    pub nanowire_n: f64,
    pub nanowire_k: f64,
    pub detector_length_um: f64,
    /// Scene x of the detector's left edge.
    pub detector_offset_x_um: f64,
    pub ar_material: String,
    pub cavity_material: String,
    pub reflector_material: String,
}

/// Scene material name for the homogenized nanowire layer; the caller
/// registers its effective index under this name before simulating.
pub const NANOWIRE_EM_MATERIAL: &str = "nanowire-em";

impl Default for SnspdStackSpec {
    fn default() -> Self {
        Self::reference_design()
    }
}

impl SnspdStackSpec {
    /// The study's detector: 275 nm alumina AR coat, 5.5 nm NbN wires of
    /// 100 nm width on a 200 nm pitch, 230 nm oxide cavity, 200 nm gold
    /// mirror.
    pub fn reference_design() -> Self {
        Self {
            t_ar_nm: 275.0,
            t_nbn_nm: 5.5,
            w_nbn_nm: 100.0,
            pitch_s_nm: 200.0,
            t_cavity_nm: 230.0,
            t_reflector_nm: 200.0,
            nanowire_n: 5.23,
            nanowire_k: 5.82,
            detector_length_um: 15.0,
            detector_offset_x_um: 0.0,
            ar_material: "Al2O3".into(),
            cavity_material: "SiO2".into(),
            reflector_material: "Au".into(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidDetector(m));
        if !(self.w_nbn_nm > 0.0 && self.w_nbn_nm <= self.pitch_s_nm) {
            return bad(format!(
                "need 0 < wire width <= pitch, got w={} pitch={}",
                self.w_nbn_nm, self.pitch_s_nm
            ));
        }
        for (name, v) in [
            ("t_ar_nm", self.t_ar_nm),
            ("t_nbn_nm", self.t_nbn_nm),
            ("t_cavity_nm", self.t_cavity_nm),
            ("t_reflector_nm", self.t_reflector_nm),
            ("detector_length_um", self.detector_length_um),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn nanowire_index(&self) -> Complex64 {
        Complex64::new(self.nanowire_n, self.nanowire_k)
    }

    pub fn fill_fraction(&self) -> f64 {
        self.w_nbn_nm / self.pitch_s_nm
    }

    /// Total stack thickness below the substrate backside.
    pub fn stack_thickness_nm(&self) -> f64 {
        self.t_ar_nm + self.t_nbn_nm + self.t_cavity_nm + self.t_reflector_nm
    }

    /// Left edge that centers the detector under the grating.
    pub fn centered_offset_um(grating: &GratingSpec, detector_length_um: f64) -> f64 {
        grating.grating_start_um() + 0.5 * (grating.grating_extent_um() - detector_length_um)
    }
}

/// Axis-aligned half-open rectangle of one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRect {
    pub material: String,
    pub x0_um: f64,
    pub y0_um: f64,
    pub x1_um: f64,
    pub y1_um: f64,
}

impl SceneRect {
    pub fn new(material: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            material: material.into(),
            x0_um: x0,
            y0_um: y0,
            x1_um: x1,
            y1_um: y1,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0_um && x < self.x1_um && y >= self.y0_um && y < self.y1_um
    }

    pub fn width_um(&self) -> f64 {
        self.x1_um - self.x0_um
    }

    pub fn height_um(&self) -> f64 {
        self.y1_um - self.y0_um
    }

    pub fn area_um2(&self) -> f64 {
        self.width_um() * self.height_um()
    }

    fn overlaps_open(&self, other: &Self) -> bool {
        self.x0_um < other.x1_um
            && other.x0_um < self.x1_um
            && self.y0_um < other.y1_um
            && other.y0_um < self.y1_um
    }
}

/// Disjoint material rectangles over a background, with explicit bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub rects: Vec<SceneRect>,
    pub background: String,
    pub x0_um: f64,
    pub y0_um: f64,
    pub x1_um: f64,
    pub y1_um: f64,
}

impl Scene {
    pub fn new(
        background: impl Into<String>,
        bounds: (f64, f64, f64, f64),
    ) -> Result<Self, GeometryError> {
        let (x0, y0, x1, y1) = bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(GeometryError::EmptyScene);
        }
        Ok(Self {
            rects: Vec::new(),
            background: background.into(),
            x0_um: x0,
            y0_um: y0,
            x1_um: x1,
            y1_um: y1,
        })
    }

    /// Add a rectangle, rejecting overlap with any differently-named rect.
    pub fn push(&mut self, rect: SceneRect) -> Result<(), GeometryError> {
        for existing in &self.rects {
            if existing.material != rect.material && existing.overlaps_open(&rect) {
                return Err(GeometryError::Overlap {
                    a: existing.material.clone(),
                    b: rect.material.clone(),
                });
            }
        }
        self.rects.push(rect);
        Ok(())
    }

    pub fn width_um(&self) -> f64 {
        self.x1_um - self.x0_um
    }

    pub fn height_um(&self) -> f64 {
        self.y1_um - self.y0_um
    }

    /// Material at a point; background where no rectangle contains it.
    pub fn material_at(&self, x: f64, y: f64) -> &str {
        for rect in &self.rects {
            if rect.contains(x, y) {
                return &rect.material;
            }
        }
        &self.background
    }

    /// Every material name the scene can produce.
    pub fn material_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rects.iter().map(|r| r.material.clone()).collect();
        names.push(self.background.clone());
        names.sort();
        names.dedup();
        names
    }

    /// Rectangles thinner than a grid cell in y, which the simulation medium
    /// treats as conductance-preserving sheets.
    pub fn subcell_sheets(&self, dy_um: f64) -> Vec<&SceneRect> {
        self.rects
            .iter()
            .filter(|r| r.height_um() > 0.0 && r.height_um() < dy_um)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Build the device cross-section: coupling waveguide, apodized grating,
/// trench-filling clad, top clad and metal mirror, buried oxide, substrate,
/// and the optional backside detector stack.
pub fn build_source_scene(
    spec: &GratingSpec,
    detector: Option<&SnspdStackSpec>,
) -> Result<Scene, GeometryError> {
    spec.validate()?;
    if let Some(det) = detector {
        det.validate()?;
    }
    let t_f = spec.film_thickness_nm * 1e-3;
    let t_w = spec.etch_depth_nm * 1e-3;
    let slab_top = t_w; // unetched film below the trench floor
    let grating_x0 = spec.grating_start_um();
    let grating_x1 = grating_x0 + spec.grating_extent_um();
    let x_max = grating_x1 + spec.tail_margin_um;
    let y_top = -(spec.clad_thickness_um + spec.top_reflector_nm * 1e-3 + 0.3);
    let backside = spec.backside_y_um();
    let y_bottom = match detector {
        Some(det) => backside + det.stack_thickness_nm() * 1e-3 + 0.3,
        None => backside, // substrate runs to the scene edge
    };

    let mut scene = Scene::new(spec.background_material.clone(), (0.0, y_top, x_max, y_bottom))?;
    let film = spec.film_material.clone();
    let clad = spec.clad_material.clone();

    // Film: full-height waveguide and tail, etched region split into a
    // continuous lower slab plus full-height teeth with clad-filled trenches.
    if spec.coupling_waveguide_length_um > 0.0 {
        scene.push(SceneRect::new(film.clone(), 0.0, 0.0, spec.coupling_waveguide_length_um, t_f))?;
    }
    if spec.waveguide_gap_um > 0.0 {
        scene.push(SceneRect::new(clad.clone(), spec.coupling_waveguide_length_um, 0.0, grating_x0, slab_top))?;
    }
    if t_w < t_f {
        // The unetched slab also runs under the waveguide gap.
        scene.push(SceneRect::new(film.clone(), spec.coupling_waveguide_length_um, slab_top, grating_x1, t_f))?;
    }
    // Tooth edges come from multiplication, not accumulation, so adjacent
    // rectangles share bit-identical coordinates.
    for (i, d) in spec.tooth_widths_um().iter().enumerate() {
        let x0 = grating_x0 + i as f64 * spec.pitch_um;
        let x1 = grating_x0 + (i + 1) as f64 * spec.pitch_um;
        scene.push(SceneRect::new(film.clone(), x0, 0.0, x0 + d, slab_top))?;
        if x0 + d < x1 {
            scene.push(SceneRect::new(clad.clone(), x0 + d, 0.0, x1, slab_top))?;
        }
    }
    if spec.tail_margin_um > 0.0 {
        scene.push(SceneRect::new(film.clone(), grating_x1, 0.0, x_max, t_f))?;
    }

    // Clad above the film, metal mirror above the clad.
    scene.push(SceneRect::new(clad.clone(), 0.0, -spec.clad_thickness_um, x_max, 0.0))?;
    scene.push(SceneRect::new(
        spec.reflector_material.clone(),
        0.0,
        -(spec.clad_thickness_um + spec.top_reflector_nm * 1e-3),
        x_max,
        -spec.clad_thickness_um,
    ))?;

    // Buried oxide and substrate below the film.
    let box_y1 = t_f + spec.box_thickness_um;
    scene.push(SceneRect::new(spec.box_material.clone(), 0.0, t_f, x_max, box_y1))?;
    scene.push(SceneRect::new(spec.substrate_material.clone(), 0.0, box_y1, x_max, backside))?;

    // Backside detector stack, laterally limited to the detector length.
    if let Some(det) = detector {
        let dx0 = det.detector_offset_x_um;
        let dx1 = dx0 + det.detector_length_um;
        let mut y = backside;
        for (material, t_nm) in [
            (det.ar_material.clone(), det.t_ar_nm),
            (NANOWIRE_EM_MATERIAL.to_string(), det.t_nbn_nm),
            (det.cavity_material.clone(), det.t_cavity_nm),
            (det.reflector_material.clone(), det.t_reflector_nm),
        ] {
            let y1 = y + t_nm * 1e-3;
            scene.push(SceneRect::new(material, dx0, y, dx1, y1))?;
            y = y1;
        }
    }
    Ok(scene)
}

/// Uniform rectilinear grid of cell centers. Cell (i, j) has its center at
/// (x0 + (i + 1/2)·dx, y0 + (j + 1/2)·dy); arrays are row-major in j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dx_um: f64,
    pub dy_um: f64,
    pub nx: usize,
    pub ny: usize,
    pub x0_um: f64,
    pub y0_um: f64,
}

impl Grid {
    pub fn cover(
        bounds: (f64, f64, f64, f64),
        dx_um: f64,
        dy_um: f64,
    ) -> Result<Self, GeometryError> {
        if !(dx_um > 0.0 && dy_um > 0.0) {
            return Err(GeometryError::BadSpacing { dx: dx_um, dy: dy_um });
        }
        let (x0, y0, x1, y1) = bounds;
        if !(x1 > x0 && y1 > y0) {
            return Err(GeometryError::EmptyScene);
        }
        let nx = ((x1 - x0) / dx_um).ceil().max(1.0) as usize;
        let ny = ((y1 - y0) / dy_um).ceil().max(1.0) as usize;
        Ok(Self { dx_um, dy_um, nx, ny, x0_um: x0, y0_um: y0 })
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x0_um + (i as f64 + 0.5) * self.dx_um
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.y0_um + (j as f64 + 0.5) * self.dy_um
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column whose center is nearest to x.
    pub fn nearest_i(&self, x: f64) -> usize {
        let i = ((x - self.x0_um) / self.dx_um - 0.5).round();
        (i.max(0.0) as usize).min(self.nx - 1)
    }

    /// Row whose center is nearest to y.
    pub fn nearest_j(&self, y: f64) -> usize {
        let j = ((y - self.y0_um) / self.dy_um - 0.5).round();
        (j.max(0.0) as usize).min(self.ny - 1)
    }
}

/// Material-id raster of a scene on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityMap {
    pub grid: Grid,
    /// Index into `materials`, one per cell, row-major.
    pub ids: Vec<u16>,
    pub materials: Vec<String>,
}

impl PermittivityMap {
    pub fn material_name(&self, i: usize, j: usize) -> &str {
        &self.materials[self.ids[self.grid.idx(i, j)] as usize]
    }

    /// Cell count per material, in `materials` order.
    pub fn census(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.materials.len()];
        for &id in &self.ids {
            counts[id as usize] += 1;
        }
        counts
    }
}

/// Rasterize by cell-center sampling. Deterministic for identical inputs;
/// the cost of skipping sub-pixel averaging is bounded by the grid
/// convergence checks in the simulation tests.
///
/// The covering grid may overhang the scene by up to one cell per axis.
/// Sample points are clamped just inside the bounds so overhang cells repeat
/// the edge material instead of inventing a background seam, which would
/// terminate structures meant to run through the wall into the absorber.
pub fn rasterize(scene: &Scene, dx_um: f64, dy_um: f64) -> Result<PermittivityMap, GeometryError> {
    let grid = Grid::cover((scene.x0_um, scene.y0_um, scene.x1_um, scene.y1_um), dx_um, dy_um)?;
    let materials = scene.material_names();
    let id_of = |name: &str| -> u16 {
        materials.iter().position(|m| m == name).expect("name listed") as u16
    };
    let background_id = id_of(&scene.background);
    let mut ids = vec![background_id; grid.len()];
    let x_max = scene.x1_um - 1e-9 * dx_um;
    let y_max = scene.y1_um - 1e-9 * dy_um;
    for j in 0..grid.ny {
        let y = grid.y_center(j).min(y_max);
        // Only rects crossing this row matter; the scan per cell stays short.
        let row_rects: Vec<(&SceneRect, u16)> = scene
            .rects
            .iter()
            .filter(|r| y >= r.y0_um && y < r.y1_um)
            .map(|r| (r, id_of(&r.material)))
            .collect();
        let row = &mut ids[j * grid.nx..(j + 1) * grid.nx];
        for (i, cell) in row.iter_mut().enumerate() {
            let x = grid.x_center(i).min(x_max);
            for (rect, id) in &row_rects {
                if x >= rect.x0_um && x < rect.x1_um {
                    *cell = *id;
                    break;
                }
            }
        }
    }
    Ok(PermittivityMap { grid, ids, materials })
}
