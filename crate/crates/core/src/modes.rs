//! Guided modes of lossless 1D multilayer slabs.
//!
//! The dispersion relation is evaluated by propagating the transverse field
//! and its (polarization-weighted) derivative through each layer with 2x2
//! transfer matrices, then demanding pure decay in both semi-infinite
//! claddings. Roots in n_eff are bracketed on a uniform pre-grid and polished
//! by bisection, so the solver never depends on derivative information.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("slab stack needs at least one finite layer")]
    NoLayers,
    #[error("layer {index} ({name}) is lossy (k = {k}); mode solving needs lossless indices, pass the real part explicitly if that is intended")]
    LossyLayer { index: usize, name: String, k: f64 },
    #[error("invalid slab stack: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    /// Electric field out of the stack plane.
    TE,
    /// Magnetic field out of the stack plane.
    TM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabLayer {
    pub index: f64,
    pub thickness_nm: f64,
}

/// Finite layers between two semi-infinite claddings, ordered along the
/// profile axis; `first_clad` sits at y < 0, `last_clad` above the last
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabStack {
    pub first_clad_index: f64,
    pub layers: Vec<SlabLayer>,
    pub last_clad_index: f64,
    pub wavelength_nm: f64,
    pub polarization: Polarization,
    /// Profile sample spacing override; `None` picks one from the geometry.
    pub profile_spacing_nm: Option<f64>,
}

impl SlabStack {
    pub fn new(
        first_clad_index: f64,
        layers: Vec<SlabLayer>,
        last_clad_index: f64,
        wavelength_nm: f64,
        polarization: Polarization,
    ) -> Result<Self, ModeError> {
        if layers.is_empty() {
            return Err(ModeError::NoLayers);
        }
        for (i, layer) in layers.iter().enumerate() {
            if !(layer.thickness_nm > 0.0) {
                return Err(ModeError::Invalid(format!(
                    "layer {i} thickness must be > 0, got {}",
                    layer.thickness_nm
                )));
            }
            if !(layer.index > 0.0) {
                return Err(ModeError::Invalid(format!(
                    "layer {i} index must be > 0, got {}",
                    layer.index
                )));
            }
        }
        if !(first_clad_index > 0.0 && last_clad_index > 0.0 && wavelength_nm > 0.0) {
            return Err(ModeError::Invalid("claddings and wavelength must be > 0".into()));
        }
        Ok(Self {
            first_clad_index,
            layers,
            last_clad_index,
            wavelength_nm,
            polarization,
            profile_spacing_nm: None,
        })
    }

    /// Resolve named materials from a database, rejecting lossy layers.
    pub fn from_materials(
        db: &crate::materials::MaterialDb,
        first_clad: &str,
        layers: &[(&str, f64)],
        last_clad: &str,
        wavelength_nm: f64,
        polarization: Polarization,
    ) -> Result<Self, ModeError> {
        let resolve = |index: usize, name: &str| -> Result<f64, ModeError> {
            let idx = db
                .optical(name)
                .and_then(|m| m.refractive_index(wavelength_nm))
                .map_err(|e| ModeError::Invalid(e.to_string()))?;
            if idx.im.abs() >= 1e-6 {
                return Err(ModeError::LossyLayer {
                    index,
                    name: name.into(),
                    k: idx.im,
                });
            }
            Ok(idx.re)
        };
        let first = resolve(0, first_clad)?;
        let last = resolve(layers.len() + 1, last_clad)?;
        let mut slab_layers = Vec::with_capacity(layers.len());
        for (i, (name, t)) in layers.iter().enumerate() {
            slab_layers.push(SlabLayer {
                index: resolve(i + 1, name)?,
                thickness_nm: *t,
            });
        }
        Self::new(first, slab_layers, last, wavelength_nm, polarization)
    }

    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_nm).sum()
    }

    fn max_clad_index(&self) -> f64 {
        self.first_clad_index.max(self.last_clad_index)
    }

    fn max_core_index(&self) -> f64 {
        self.layers.iter().map(|l| l.index).fold(0.0, f64::max)
    }
}

/// Uniformly sampled transverse field, zero outside its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub y0_nm: f64,
    pub dy_nm: f64,
    pub values: Vec<f64>,
}

impl ModeProfile {
    pub fn end_nm(&self) -> f64 {
        self.y0_nm + (self.values.len() as f64 - 1.0) * self.dy_nm
    }

    /// Linear interpolation inside the span, zero outside.
    pub fn value_at(&self, y_nm: f64) -> f64 {
        let t = (y_nm - self.y0_nm) / self.dy_nm;
        if t < 0.0 || t > self.values.len() as f64 - 1.0 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// `position_nm,field_value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position_nm,field_value\n");
        for (i, v) in self.values.iter().enumerate() {
            let y = self.y0_nm + i as f64 * self.dy_nm;
            out.push_str(&format!("{y:.3},{v:.9e}\n"));
        }
        out
    }

    fn normalize_power(&mut self) {
        let power: f64 = self.values.iter().map(|v| v * v).sum::<f64>() * self.dy_nm;
        if power > 0.0 {
            let scale = 1.0 / power.sqrt();
            // Sign convention: peak positive.
            let peak = self
                .values
                .iter()
                .cloned()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let scale = if peak < 0.0 { -scale } else { scale };
            for v in &mut self.values {
                *v *= scale;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabMode {
    pub n_eff: f64,
    pub polarization: Polarization,
    pub profile: ModeProfile,
}

const PRE_GRID: usize = 2000;
const BISECT_TOL: f64 = 1e-12;

/// cos(kappa t) and sin(kappa t)/kappa for kappa^2 of either sign, smooth
/// through zero.
fn cs(kappa2: f64, t: f64) -> (f64, f64) {
    let z = kappa2 * t * t;
    if z.abs() < 1e-12 {
        (1.0 - 0.5 * z, t * (1.0 - z / 6.0))
    } else if kappa2 > 0.0 {
        let k = kappa2.sqrt();
        ((k * t).cos(), (k * t).sin() / k)
    } else {
        let g = (-kappa2).sqrt();
        ((g * t).cosh(), (g * t).sinh() / g)
    }
}

struct Dispersion<'a> {
    stack: &'a SlabStack,
    k0: f64, // 1/µm
}

impl<'a> Dispersion<'a> {
    fn new(stack: &'a SlabStack) -> Self {
        Self {
            stack,
            k0: 2.0 * std::f64::consts::PI / (stack.wavelength_nm * 1e-3),
        }
    }

    fn weight(&self, n: f64) -> f64 {
        match self.stack.polarization {
            Polarization::TE => 1.0,
            Polarization::TM => 1.0 / (n * n),
        }
    }

    /// Field and weighted derivative after each layer, starting from pure
    /// decay in the first cladding with F(0) = 1.
    fn propagate(&self, n_eff: f64) -> Vec<(f64, f64)> {
        let gamma_b = self.k0 * (n_eff * n_eff - self.stack.first_clad_index.powi(2)).max(0.0).sqrt();
        let mut f = 1.0;
        let mut d = gamma_b * self.weight(self.stack.first_clad_index);
        let mut states = Vec::with_capacity(self.stack.layers.len() + 1);
        states.push((f, d));
        for layer in &self.stack.layers {
            let t = layer.thickness_nm * 1e-3;
            let kappa2 = self.k0 * self.k0 * (layer.index * layer.index - n_eff * n_eff);
            let (c, s) = cs(kappa2, t);
            let w = self.weight(layer.index);
            let (nf, nd) = (c * f + (s / w) * d, -kappa2 * w * s * f + c * d);
            f = nf;
            d = nd;
            states.push((f, d));
        }
        states
    }

    fn eval(&self, n_eff: f64) -> f64 {
        let states = self.propagate(n_eff);
        let (f, d) = *states.last().unwrap();
        let gamma_t = self.k0 * (n_eff * n_eff - self.stack.last_clad_index.powi(2)).max(0.0).sqrt();
        d + gamma_t * self.weight(self.stack.last_clad_index) * f
    }
}

/// All guided modes, sorted by descending effective index.
pub fn solve_modes(stack: &SlabStack) -> Result<Vec<SlabMode>, ModeError> {
    if stack.layers.is_empty() {
        return Err(ModeError::NoLayers);
    }
    let lo = stack.max_clad_index() + 1e-9;
    let hi = stack.max_core_index() - 1e-9;
    if hi <= lo {
        return Ok(Vec::new());
    }
    let disp = Dispersion::new(stack);
    let mut roots = Vec::new();
    let step = (hi - lo) / (PRE_GRID as f64 - 1.0);
    let mut prev_x = lo;
    let mut prev_f = disp.eval(lo);
    for i in 1..PRE_GRID {
        let x = lo + i as f64 * step;
        let fx = disp.eval(x);
        if prev_f == 0.0 {
            roots.push(prev_x);
        } else if prev_f.signum() != fx.signum() && fx != 0.0 {
            let (mut a, mut b, mut fa) = (prev_x, x, prev_f);
            while b - a > BISECT_TOL {
                let m = 0.5 * (a + b);
                let fm = disp.eval(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                } else if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_x = x;
        prev_f = fx;
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let modes = roots
        .into_iter()
        .map(|n_eff| SlabMode {
            n_eff,
            polarization: stack.polarization,
            profile: sample_profile(&disp, stack, n_eff),
        })
        .collect();
    Ok(modes)
}

fn sample_profile(disp: &Dispersion<'_>, stack: &SlabStack, n_eff: f64) -> ModeProfile {
    let k0 = disp.k0;
    let gamma_b = k0 * (n_eff * n_eff - stack.first_clad_index.powi(2)).max(1e-18).sqrt();
    let gamma_t = k0 * (n_eff * n_eff - stack.last_clad_index.powi(2)).max(1e-18).sqrt();
    let total_nm = stack.total_thickness_nm();
    // Extend into each cladding by five decay lengths, capped.
    let ext_b_nm = (5.0 / gamma_b * 1e3).min(5000.0);
    let ext_t_nm = (5.0 / gamma_t * 1e3).min(5000.0);
    let dy_nm = stack.profile_spacing_nm.unwrap_or_else(|| {
        let lam_in_core = stack.wavelength_nm / stack.max_core_index();
        (lam_in_core / 40.0).clamp(1.0, 25.0)
    });
    let y0 = -ext_b_nm;
    let count = ((total_nm + ext_b_nm + ext_t_nm) / dy_nm).ceil() as usize + 1;
    let states = disp.propagate(n_eff);
    let boundaries: Vec<f64> = std::iter::once(0.0)
        .chain(stack.layers.iter().scan(0.0, |acc, l| {
            *acc += l.thickness_nm;
            Some(*acc)
        }))
        .collect();
    let (f_top, _) = *states.last().unwrap();
    let mut values = Vec::with_capacity(count);
    for s in 0..count {
        let y_nm = y0 + s as f64 * dy_nm;
        let v = if y_nm <= 0.0 {
            (gamma_b * y_nm * 1e-3).exp()
        } else if y_nm >= total_nm {
            f_top * (-gamma_t * (y_nm - total_nm) * 1e-3).exp()
        } else {
            let m = boundaries.partition_point(|b| *b <= y_nm) - 1;
            let m = m.min(stack.layers.len() - 1);
            let layer = &stack.layers[m];
            let local = (y_nm - boundaries[m]) * 1e-3;
            let kappa2 = k0 * k0 * (layer.index * layer.index - n_eff * n_eff);
            let (c, s_ok) = cs(kappa2, local);
            let (f, d) = states[m];
            c * f + (s_ok / disp.weight(layer.index)) * d
        };
        values.push(v);
    }
    let mut profile = ModeProfile { y0_nm: y0, dy_nm, values };
    profile.normalize_power();
    profile
}

/// Power-coupling overlap |∫ab|² / (∫a² ∫b²) of two sampled profiles,
/// evaluated on the finer grid over the union of spans.
pub fn mode_overlap(a: &ModeProfile, b: &ModeProfile) -> f64 {
    let dy = a.dy_nm.min(b.dy_nm);
    let y0 = a.y0_nm.min(b.y0_nm);
    let y1 = a.end_nm().max(b.end_nm());
    let count = ((y1 - y0) / dy).ceil() as usize + 1;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..count {
        let y = y0 + i as f64 * dy;
        let va = a.value_at(y);
        let vb = b.value_at(y);
        sab += va * vb;
        saa += va * va;
        sbb += vb * vb;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab * sab) / (saa * sbb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Independent oracle: symmetric-slab transcendental equations,
    /// tan(u) = w/u (even TE), tan(u) = -u/w (odd TE), with the TM variants
    /// carrying the index-squared weight. u = kappa t/2, w = gamma t/2.
    fn symmetric_slab_n_eff(
        n_core: f64,
        n_clad: f64,
        t_nm: f64,
        lam_nm: f64,
        pol: Polarization,
        even: bool,
    ) -> Option<f64> {
        let k0 = 2.0 * std::f64::consts::PI / (lam_nm * 1e-3);
        let half = 0.5 * t_nm * 1e-3;
        let weight = match pol {
            Polarization::TE => 1.0,
            Polarization::TM => (n_core / n_clad).powi(2),
        };
        let f = |n_eff: f64| {
            let u = k0 * half * (n_core * n_core - n_eff * n_eff).sqrt();
            let w = k0 * half * (n_eff * n_eff - n_clad * n_clad).sqrt();
            if even {
                u * u.tan() - weight * w
            } else {
                u / u.tan() + weight * w
            }
        };
        // Bracket on a fine scan, avoiding tan poles by rejecting huge values.
        let (lo, hi) = (n_clad + 1e-9, n_core - 1e-9);
        let n = 20000;
        let mut prev = (lo, f(lo));
        for i in 1..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let fx = f(x);
            if prev.1.is_finite()
                && fx.is_finite()
                && prev.1.abs() < 1e4
                && fx.abs() < 1e4
                && prev.1.signum() != fx.signum()
            {
                let (mut a, mut b, mut fa) = (prev.0, x, prev.1);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = (x, fx);
        }
        None
    }

    fn stack(n_core: f64, n_clad: f64, t_nm: f64, lam_nm: f64, pol: Polarization) -> SlabStack {
        SlabStack::new(
            n_clad,
            vec![SlabLayer { index: n_core, thickness_nm: t_nm }],
            n_clad,
            lam_nm,
            pol,
        )
        .unwrap()
    }

    #[test]
    fn te_fundamental_matches_analytic() {
        let s = stack(3.5, 1.5, 220.0, 1550.0, Polarization::TE);
        let modes = solve_modes(&s).unwrap();
        assert_eq!(modes.len(), 1);
        let oracle = symmetric_slab_n_eff(3.5, 1.5, 220.0, 1550.0, Polarization::TE, true).unwrap();
        assert_abs_diff_eq!(modes[0].n_eff, oracle, epsilon = 1e-6);
    }

    #[test]
    fn tm_fundamental_matches_analytic() {
        let s = stack(3.5, 1.5, 340.0, 1550.0, Polarization::TM);
        let modes = solve_modes(&s).unwrap();
        assert!(!modes.is_empty());
        let oracle = symmetric_slab_n_eff(3.5, 1.5, 340.0, 1550.0, Polarization::TM, true).unwrap();
        assert_abs_diff_eq!(modes[0].n_eff, oracle, epsilon = 1e-6);
    }

    #[test]
    fn no_confinement_no_modes() {
        let s = stack(1.5, 1.5, 500.0, 1550.0, Polarization::TE);
        assert!(solve_modes(&s).unwrap().is_empty());
    }

    #[test]
    fn guiding_film_supports_a_te_mode() {
        let db = crate::materials::MaterialDb::builtin();
        let s = SlabStack::from_materials(
            &db,
            "SiO2",
            &[("LN-TE", 600.0)],
            "SiO2",
            1560.0,
            Polarization::TE,
        )
        .unwrap();
        let modes = solve_modes(&s).unwrap();
        assert!(!modes.is_empty());
        let n_core = db.optical("LN-TE").unwrap().refractive_index(1560.0).unwrap().re;
        let n_clad = db.optical("SiO2").unwrap().refractive_index(1560.0).unwrap().re;
        let oracle =
            symmetric_slab_n_eff(n_core, n_clad, 600.0, 1560.0, Polarization::TE, true).unwrap();
        assert_abs_diff_eq!(modes[0].n_eff, oracle, epsilon = 1e-6);
    }

    #[test]
    fn lossy_layer_rejected() {
        let db = crate::materials::MaterialDb::builtin();
        let err = SlabStack::from_materials(
            &db,
            "SiO2",
            &[("NbN", 600.0)],
            "SiO2",
            1560.0,
            Polarization::TE,
        )
        .unwrap_err();
        assert!(matches!(err, ModeError::LossyLayer { .. }));
    }

    #[test]
    fn multimode_slab_sorted_and_orthogonal() {
        let s = stack(3.5, 1.5, 800.0, 1550.0, Polarization::TE);
        let modes = solve_modes(&s).unwrap();
        assert!(modes.len() >= 2);
        for pair in modes.windows(2) {
            assert!(pair[0].n_eff > pair[1].n_eff);
        }
        let cross = mode_overlap(&modes[0].profile, &modes[1].profile);
        assert!(cross < 1e-6, "cross overlap {cross}");
        assert_abs_diff_eq!(mode_overlap(&modes[0].profile, &modes[0].profile), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn overlap_of_shifted_gaussians() {
        let w_nm = 400.0;
        let make = |shift: f64| {
            let dy = 4.0;
            let values: Vec<f64> = (0..2000)
                .map(|i| {
                    let y = -4000.0 + i as f64 * dy;
                    (-(y - shift) * (y - shift) / (w_nm * w_nm)).exp()
                })
                .collect();
            ModeProfile { y0_nm: -4000.0, dy_nm: dy, values }
        };
        let a = make(0.0);
        let b = make(3.0 * w_nm);
        let got = mode_overlap(&a, &b);
        let expect = (-9.0f64).exp(); // closed-form |∫ab|²/(∫a²∫b²) at d = 3w
        assert_relative_eq!(got, expect, max_relative = 1e-3);
        assert!(got < 0.01);
        assert_relative_eq!(mode_overlap(&b, &a), got, max_relative = 1e-9);
    }

    #[test]
    fn n_eff_monotone_in_core_thickness() {
        let mut last = 0.0;
        for t in [150.0, 250.0, 400.0, 700.0] {
            let s = stack(3.0, 1.5, t, 1550.0, Polarization::TE);
            let modes = solve_modes(&s).unwrap();
            assert!(!modes.is_empty(), "no mode at t = {t}");
            assert!(modes[0].n_eff > last);
            last = modes[0].n_eff;
        }
    }

    #[test]
    fn sampling_density_does_not_move_n_eff() {
        let mut s = stack(3.5, 1.5, 300.0, 1550.0, Polarization::TE);
        let coarse = solve_modes(&s).unwrap();
        s.profile_spacing_nm = Some(coarse[0].profile.dy_nm / 2.0);
        let fine = solve_modes(&s).unwrap();
        assert_eq!(coarse[0].n_eff, fine[0].n_eff);
        let self_overlap = mode_overlap(&coarse[0].profile, &fine[0].profile);
        assert!((self_overlap - 1.0).abs() < 1e-6, "overlap {self_overlap}");
    }

    #[test]
    fn cladding_decay_is_monotone() {
        let s = stack(3.5, 1.5, 220.0, 1550.0, Polarization::TE);
        let mode = &solve_modes(&s).unwrap()[0];
        let p = &mode.profile;
        let mut y = p.y0_nm;
        let mut prev = p.value_at(y).abs();
        while y < -p.dy_nm {
            y += p.dy_nm;
            let v = p.value_at(y).abs();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn profile_csv_has_header_and_rows() {
        let s = stack(3.5, 1.5, 220.0, 1550.0, Polarization::TE);
        let mode = &solve_modes(&s).unwrap()[0];
        let csv = mode.profile.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "position_nm,field_value");
        assert!(lines.count() == mode.profile.values.len());
    }
}
