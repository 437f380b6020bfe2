//! Per-cell update coefficients from a scene and material database.
//!
//! Loss is narrowband: each material's conductivity is chosen so the cell's
//! complex permittivity matches (n + ik)^2 at the primary wavelength. Cells
//! whose real permittivity falls below one carry a single-pole Drude current
//! instead, which keeps the explicit update stable for metals and for thin
//! metallic sheets blended into a dielectric cell. Materials on the PEC list
//! pin the out-of-plane field to zero.

use crate::geometry::{Grid, Scene};
use crate::materials::MaterialDb;
use num_complex::Complex64;

use super::FdtdError;

/// Sparse Drude current cell; rows with `jb = 0` never exist here.
#[derive(Debug, Clone)]
pub(crate) struct DrudeCell {
    pub idx: usize,
    pub ja: f64,
    pub jb: f64,
    pub jz: f64,
}

pub(crate) struct CellMedium {
    /// Padded dimensions: interior grid plus `npml` cells on every side.
    pub nx: usize,
    pub ny: usize,
    pub ca: Vec<f64>,
    pub cb: Vec<f64>,
    pub eps_inf: Vec<f64>,
    pub drude: Vec<DrudeCell>,
}

/// One material's update model at the primary frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum MatParams {
    Pec,
    Cond { eps: f64, sigma: f64 },
    Drude { gamma: f64, wp2: f64 },
}

pub(crate) fn params_from_eps(eps: Complex64, omega0: f64) -> MatParams {
    if eps.re >= 1.0 {
        MatParams::Cond {
            eps: eps.re,
            sigma: eps.im * omega0,
        }
    } else {
        let a = 1.0 - eps.re;
        let b = eps.im;
        MatParams::Drude {
            gamma: if a > 0.0 { omega0 * b / a } else { 0.0 },
            wp2: omega0 * omega0 * (a * a + b * b) / a,
        }
    }
}

/// Complex permittivity the Drude parameters reproduce at `omega`; used by
/// tests to confirm the pole matches the target material exactly.
#[cfg(test)]
pub(crate) fn drude_eps_at(gamma: f64, wp2: f64, omega: f64) -> Complex64 {
    let denom = Complex64::new(gamma, -omega);
    Complex64::new(1.0, 0.0) + Complex64::i() * wp2 / (omega * denom)
}

/// Cell-resolved complex permittivity of the interior grid, with rectangles
/// thinner than a cell blended by thickness weighting (the out-of-plane
/// field is parallel to such sheets, so arithmetic averaging of epsilon is
/// the consistent zeroth-order rule and preserves sigma times thickness).
fn interior_eps(
    scene: &Scene,
    grid: &Grid,
    db: &MaterialDb,
    wavelength_nm: f64,
    pec: &[String],
) -> Result<Vec<Option<Complex64>>, FdtdError> {
    let map = crate::geometry::rasterize(scene, grid.dx_um, grid.dy_um)?;
    let is_pec = |name: &str| pec.iter().any(|p| p == name);
    let mut by_id: Vec<Option<Complex64>> = Vec::with_capacity(map.materials.len());
    for name in &map.materials {
        if is_pec(name) {
            by_id.push(None);
        } else {
            by_id.push(Some(db.optical(name)?.refractive_index(wavelength_nm)?.powi(2)));
        }
    }
    let mut eps: Vec<Option<Complex64>> =
        map.ids.iter().map(|&id| by_id[id as usize]).collect();

    for sheet in scene.subcell_sheets(grid.dy_um) {
        let j0 = ((sheet.y0_um - grid.y0_um) / grid.dy_um).floor().max(0.0) as usize;
        let j1 = (((sheet.y1_um - grid.y0_um) / grid.dy_um).ceil() as usize).min(grid.ny);
        for j in j0..j1 {
            let (yc0, yc1) = (grid.y0_um + j as f64 * grid.dy_um, grid.y0_um + (j + 1) as f64 * grid.dy_um);
            let overlap = sheet.y1_um.min(yc1) - sheet.y0_um.max(yc0);
            if overlap <= 0.0 {
                continue;
            }
            for i in 0..grid.nx {
                // Clamp like the rasterizer so grid overhang keeps the edge
                // material.
                let x = grid.x_center(i).min(scene.x1_um - 1e-9 * grid.dx_um);
                if x < sheet.x0_um || x >= sheet.x1_um {
                    continue;
                }
                let p = grid.idx(i, j);
                if eps[p].is_none() {
                    continue; // PEC wins
                }
                // Partition the cell column at the sheet edges and average
                // the parts' permittivities by thickness.
                let cuts = [yc0, sheet.y0_um.max(yc0), sheet.y1_um.min(yc1), yc1];
                let mut acc = Complex64::new(0.0, 0.0);
                for w in cuts.windows(2) {
                    let h = w[1] - w[0];
                    if h <= 0.0 {
                        continue;
                    }
                    let name = scene.material_at(x, 0.5 * (w[0] + w[1]));
                    if is_pec(name) {
                        // A PEC sliver shorts the whole cell.
                        acc = Complex64::new(f64::NAN, 0.0);
                        break;
                    }
                    let e = db.optical(name)?.refractive_index(wavelength_nm)?.powi(2);
                    acc += e * (h / grid.dy_um);
                }
                eps[p] = if acc.re.is_nan() { None } else { Some(acc) };
            }
        }
    }
    Ok(eps)
}

/// Assemble padded per-cell coefficients. The PML pads continue the interior
/// by clamping to the nearest edge cell, so absorbers sit in the same medium
/// the wave arrives in.
pub(crate) fn build_medium(
    scene: &Scene,
    db: &MaterialDb,
    grid: &Grid,
    npml: usize,
    wavelength_nm: f64,
    pec: &[String],
    dt: f64,
) -> Result<CellMedium, FdtdError> {
    let omega0 = 2.0 * std::f64::consts::PI / (wavelength_nm * 1e-3);
    let eps = interior_eps(scene, grid, db, wavelength_nm, pec)?;
    let params: Vec<MatParams> = eps
        .iter()
        .map(|e| match e {
            None => MatParams::Pec,
            Some(e) => params_from_eps(*e, omega0),
        })
        .collect();

    let (nx, ny) = (grid.nx + 2 * npml, grid.ny + 2 * npml);
    let mut med = CellMedium {
        nx,
        ny,
        ca: vec![0.0; nx * ny],
        cb: vec![0.0; nx * ny],
        eps_inf: vec![1.0; nx * ny],
        drude: Vec::new(),
    };
    for j in 0..ny {
        let jj = j.saturating_sub(npml).min(grid.ny - 1);
        for i in 0..nx {
            let ii = i.saturating_sub(npml).min(grid.nx - 1);
            let p = j * nx + i;
            match params[grid.idx(ii, jj)] {
                MatParams::Pec => {
                    med.ca[p] = 0.0;
                    med.cb[p] = 0.0;
                    med.eps_inf[p] = 1.0;
                }
                MatParams::Cond { eps, sigma } => {
                    let x = sigma * dt / (2.0 * eps);
                    med.ca[p] = (1.0 - x) / (1.0 + x);
                    med.cb[p] = (dt / eps) / (1.0 + x);
                    med.eps_inf[p] = eps;
                }
                MatParams::Drude { gamma, wp2 } => {
                    med.ca[p] = 1.0;
                    med.cb[p] = dt;
                    med.eps_inf[p] = 1.0;
                    med.drude.push(DrudeCell {
                        idx: p,
                        ja: (1.0 - gamma * dt / 2.0) / (1.0 + gamma * dt / 2.0),
                        jb: wp2 * dt / (1.0 + gamma * dt / 2.0),
                        jz: 0.0,
                    });
                }
            }
        }
    }
    Ok(med)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneRect;
    use crate::materials::OpticalMaterial;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn db_with(materials: &[(&str, f64, f64)]) -> MaterialDb {
        let mut db = MaterialDb::builtin();
        for (name, n, k) in materials {
            db.insert_optical(OpticalMaterial::constant(*name, *n, *k));
        }
        db
    }

    #[test]
    fn drude_pole_reproduces_target_permittivity() {
        let omega0 = 2.0 * std::f64::consts::PI / 1.56;
        for eps in [
            Complex64::new(0.27, 11.2),
            Complex64::new(-2.2, 30.4),
            Complex64::new(0.9, 0.0),
        ] {
            match params_from_eps(eps, omega0) {
                MatParams::Drude { gamma, wp2 } => {
                    let back = drude_eps_at(gamma, wp2, omega0);
                    assert_relative_eq!(back.re, eps.re, max_relative = 1e-12);
                    assert_abs_diff_eq!(back.im, eps.im, epsilon = 1e-12);
                }
                other => panic!("expected Drude for eps {eps}, got {other:?}"),
            }
        }
    }

    #[test]
    fn conductivity_matches_imaginary_permittivity() {
        let omega0 = 2.0 * std::f64::consts::PI / 0.78;
        match params_from_eps(Complex64::new(13.66, 0.0581), omega0) {
            MatParams::Cond { eps, sigma } => {
                assert_relative_eq!(eps, 13.66, max_relative = 1e-12);
                assert_relative_eq!(sigma, 0.0581 * omega0, max_relative = 1e-12);
            }
            other => panic!("expected conductivity model, got {other:?}"),
        }
    }

    #[test]
    fn subcell_sheet_blends_by_thickness() {
        let db = db_with(&[("host", 1.5, 0.0), ("wire", 2.0, 3.0)]);
        let mut scene = Scene::new("host", (0.0, 0.0, 1.0, 1.0)).unwrap();
        // 5 nm sheet inside a 25 nm cell row.
        scene.push(SceneRect::new("wire", 0.0, 0.500, 1.0, 0.505)).unwrap();
        let grid = Grid::cover((0.0, 0.0, 1.0, 1.0), 0.025, 0.025).unwrap();
        let eps = interior_eps(&scene, &grid, &db, 1560.0, &[]).unwrap();
        let j = grid.nearest_j(0.5025);
        let got = eps[grid.idx(10, j)].unwrap();
        let f = 0.005 / 0.025;
        let want = Complex64::new(2.0, 3.0).powi(2) * f + Complex64::new(2.25, 0.0) * (1.0 - f);
        assert_relative_eq!(got.re, want.re, max_relative = 1e-9);
        assert_relative_eq!(got.im, want.im, max_relative = 1e-9);
        // A row the sheet does not touch stays pure host.
        let clean = eps[grid.idx(10, 2)].unwrap();
        assert_abs_diff_eq!(clean.re, 2.25, epsilon = 1e-12);
    }

    #[test]
    fn pec_material_zeroes_the_update() {
        let db = db_with(&[("metal", 0.5, 11.0)]);
        let mut scene = Scene::new("Air", (0.0, 0.0, 1.0, 1.0)).unwrap();
        scene.push(SceneRect::new("metal", 0.0, 0.4, 1.0, 0.6)).unwrap();
        let grid = Grid::cover((0.0, 0.0, 1.0, 1.0), 0.1, 0.1).unwrap();
        let med = build_medium(&scene, &db, &grid, 4, 1560.0, &["metal".into()], 0.01).unwrap();
        let nx = grid.nx + 8;
        let p = (4 + 5) * nx + (4 + 5);
        assert_eq!(med.ca[p], 0.0);
        assert_eq!(med.cb[p], 0.0);
        assert!(med.drude.is_empty());
    }

    #[test]
    fn pads_clamp_the_edge_cells() {
        let db = db_with(&[("stuff", 3.0, 0.0)]);
        let mut scene = Scene::new("Air", (0.0, 0.0, 1.0, 1.0)).unwrap();
        scene.push(SceneRect::new("stuff", 0.0, 0.5, 1.0, 1.0)).unwrap();
        let grid = Grid::cover((0.0, 0.0, 1.0, 1.0), 0.1, 0.1).unwrap();
        let med = build_medium(&scene, &db, &grid, 3, 1560.0, &[], 0.01).unwrap();
        let nx = grid.nx + 6;
        // Top pad rows repeat the top interior row's material.
        let inside = med.eps_inf[(3 + 9) * nx + 8];
        let pad = med.eps_inf[(3 + 12) * nx + 8];
        assert_abs_diff_eq!(inside, 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pad, 9.0, epsilon = 1e-12);
        // Bottom pad rows repeat the bottom interior row (air).
        assert_abs_diff_eq!(med.eps_inf[nx + 8], 1.0, epsilon = 1e-12);
    }
}
