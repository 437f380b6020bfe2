//! Optical dispersion and thermal-conductivity tables.
//!
//! Materials are sampled datasets, not model fits: piecewise-linear
//! interpolation between strictly increasing sample points, exact at the
//! points, and a hard error outside the sampled range. The crate bundles the
//! CSVs under `materials/` at the repo root; their headers cite the datasets.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// 10·log10(e)·4π, so attenuation in dB/µm is `DB_PER_UM_FACTOR · k / λ_µm`.
const DB_PER_UM_FACTOR: f64 = 54.575097704929896;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("material {material}: wavelength {wavelength_nm} nm outside sampled range [{min_nm}, {max_nm}] nm")]
    WavelengthOutOfRange {
        material: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("thermal material {material}: temperature {temperature_k} K outside table range [{min_k}, {max_k}] K")]
    TemperatureOutOfRange {
        material: String,
        temperature_k: f64,
        min_k: f64,
        max_k: f64,
    },
    #[error("{file}, line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid material {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("no material named {0}")]
    NotFound(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub wavelength_nm: f64,
    pub n: f64,
    pub k: f64,
}

/// Complex refractive index vs wavelength for one material.
#[derive(Debug, Clone)]
pub struct OpticalMaterial {
    name: String,
    source: Option<String>,
    samples: Vec<DispersionSample>,
    bandgap_ev: Option<f64>,
}

impl OpticalMaterial {
    pub fn new(
        name: impl Into<String>,
        samples: Vec<DispersionSample>,
        bandgap_ev: Option<f64>,
    ) -> Result<Self, MaterialError> {
        let name = name.into();
        let invalid = |message: String| MaterialError::Invalid {
            name: name.clone(),
            message,
        };
        if samples.is_empty() {
            return Err(invalid("no dispersion samples".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].wavelength_nm <= pair[0].wavelength_nm {
                return Err(invalid(format!(
                    "wavelengths must be strictly increasing ({} nm then {} nm)",
                    pair[0].wavelength_nm, pair[1].wavelength_nm
                )));
            }
        }
        for s in &samples {
            if !(s.wavelength_nm > 0.0) || !s.n.is_finite() || !s.k.is_finite() {
                return Err(invalid(format!("non-finite sample at {} nm", s.wavelength_nm)));
            }
            if s.n <= 0.0 {
                return Err(invalid(format!("n must be > 0, got {} at {} nm", s.n, s.wavelength_nm)));
            }
            if s.k < 0.0 {
                return Err(invalid(format!("k must be >= 0, got {} at {} nm", s.k, s.wavelength_nm)));
            }
        }
        Ok(Self {
            name,
            source: None,
            samples,
            bandgap_ev,
        })
    }

    /// Fixed-index convenience for tests and synthetic scenes.
    pub fn constant(name: impl Into<String>, n: f64, k: f64) -> Self {
        Self::new(
            name,
            vec![
                DispersionSample { wavelength_nm: 1.0, n, k },
                DispersionSample { wavelength_nm: 1.0e7, n, k },
            ],
            None,
        )
        .expect("constant material is valid")
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn bandgap_ev(&self) -> Option<f64> {
        self.bandgap_ev
    }

    pub fn samples(&self) -> &[DispersionSample] {
        &self.samples
    }

    pub fn wavelength_range_nm(&self) -> (f64, f64) {
        (
            self.samples.first().unwrap().wavelength_nm,
            self.samples.last().unwrap().wavelength_nm,
        )
    }

    /// Complex index n + i·k at `wavelength_nm`, linear in both parts.
    /// Bit-exact at sample points.
    pub fn refractive_index(&self, wavelength_nm: f64) -> Result<Complex64, MaterialError> {
        let (min_nm, max_nm) = self.wavelength_range_nm();
        if !(wavelength_nm >= min_nm && wavelength_nm <= max_nm) {
            return Err(MaterialError::WavelengthOutOfRange {
                material: self.name.clone(),
                wavelength_nm,
                min_nm,
                max_nm,
            });
        }
        let idx = self
            .samples
            .partition_point(|s| s.wavelength_nm < wavelength_nm);
        if let Some(s) = self.samples.get(idx) {
            if s.wavelength_nm == wavelength_nm {
                return Ok(Complex64::new(s.n, s.k));
            }
        }
        let hi = &self.samples[idx];
        let lo = &self.samples[idx - 1];
        let t = (wavelength_nm - lo.wavelength_nm) / (hi.wavelength_nm - lo.wavelength_nm);
        Ok(Complex64::new(
            lo.n + t * (hi.n - lo.n),
            lo.k + t * (hi.k - lo.k),
        ))
    }

    /// Bulk intensity attenuation at `wavelength_nm` in dB/µm.
    pub fn attenuation_db_per_um(&self, wavelength_nm: f64) -> Result<f64, MaterialError> {
        let index = self.refractive_index(wavelength_nm)?;
        Ok(k_to_db_per_um(index.im, wavelength_nm))
    }
}

/// Beer-Lambert conversion: extinction coefficient to intensity dB/µm.
pub fn k_to_db_per_um(k: f64, wavelength_nm: f64) -> f64 {
    DB_PER_UM_FACTOR * k / (wavelength_nm * 1.0e-3)
}

/// Inverse of [`k_to_db_per_um`].
pub fn db_per_um_to_k(db_per_um: f64, wavelength_nm: f64) -> f64 {
    db_per_um * (wavelength_nm * 1.0e-3) / DB_PER_UM_FACTOR
}

/// Temperature-dependent thermal conductivity table.
#[derive(Debug, Clone)]
pub struct ThermalMaterial {
    name: String,
    source: Option<String>,
    /// (temperature K, conductivity W/(m·K)), strictly increasing in T.
    points: Vec<(f64, f64)>,
}

impl ThermalMaterial {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self, MaterialError> {
        let name = name.into();
        let invalid = |message: String| MaterialError::Invalid {
            name: name.clone(),
            message,
        };
        if points.is_empty() {
            return Err(invalid("no conductivity samples".into()));
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(invalid(format!(
                    "temperatures must be strictly increasing ({} K then {} K)",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(t, k) in &points {
            if !t.is_finite() || !k.is_finite() || k <= 0.0 {
                return Err(invalid(format!("conductivity must be > 0, got {k} at {t} K")));
            }
        }
        Ok(Self {
            name,
            source: None,
            points,
        })
    }

    pub fn constant(name: impl Into<String>, k: f64) -> Self {
        Self::new(name, vec![(0.001, k), (1.0e6, k)]).expect("constant conductivity is valid")
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn temperature_range_k(&self) -> (f64, f64) {
        (self.points.first().unwrap().0, self.points.last().unwrap().0)
    }

    /// Conductivity in W/(m·K) at `temperature_k`, linear between samples and
    /// bit-exact at them.
    pub fn conductivity(&self, temperature_k: f64) -> Result<f64, MaterialError> {
        let (min_k, max_k) = self.temperature_range_k();
        if !(temperature_k >= min_k && temperature_k <= max_k) {
            return Err(MaterialError::TemperatureOutOfRange {
                material: self.name.clone(),
                temperature_k,
                min_k,
                max_k,
            });
        }
        let idx = self.points.partition_point(|p| p.0 < temperature_k);
        if let Some(&(t, k)) = self.points.get(idx) {
            if t == temperature_k {
                return Ok(k);
            }
        }
        let (t_hi, k_hi) = self.points[idx];
        let (t_lo, k_lo) = self.points[idx - 1];
        Ok(k_lo + (temperature_k - t_lo) / (t_hi - t_lo) * (k_hi - k_lo))
    }
}

/// Named collection of optical and thermal materials.
#[derive(Debug, Clone, Default)]
pub struct MaterialDb {
    optical: BTreeMap<String, OpticalMaterial>,
    thermal: BTreeMap<String, ThermalMaterial>,
}

impl MaterialDb {
    /// The datasets bundled with the repo (`materials/*.csv`), compiled in so
    /// library users need no filesystem layout.
    pub fn builtin() -> Self {
        let mut db = Self::default();
        let files: [(&str, &str); 9] = [
            ("Air.csv", include_str!("../../../materials/Air.csv")),
            ("Al2O3.csv", include_str!("../../../materials/Al2O3.csv")),
            ("Au.csv", include_str!("../../../materials/Au.csv")),
            ("LN-TE.csv", include_str!("../../../materials/LN-TE.csv")),
            ("LN-TM.csv", include_str!("../../../materials/LN-TM.csv")),
            ("NbN.csv", include_str!("../../../materials/NbN.csv")),
            ("Si.csv", include_str!("../../../materials/Si.csv")),
            ("Si-cryo.csv", include_str!("../../../materials/Si-cryo.csv")),
            ("SiO2.csv", include_str!("../../../materials/SiO2.csv")),
        ];
        for (file, text) in files {
            let mat = parse_optical_csv(file, text).expect("bundled CSV parses");
            db.insert_optical(mat);
        }
        let thermal = parse_thermal_csv(
            "thermal/Si.csv",
            include_str!("../../../materials/thermal/Si.csv"),
        )
        .expect("bundled CSV parses");
        db.insert_thermal(thermal);
        db
    }

    /// Load every `*.csv` under `dir` (optical) and `dir/thermal` (thermal),
    /// replacing same-named builtins when layered on top of them.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), MaterialError> {
        let io_err = |path: &Path, source: std::io::Error| MaterialError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let mat = parse_optical_csv(&path.display().to_string(), &text)?;
            self.insert_optical(mat);
        }
        let thermal_dir = dir.join("thermal");
        if thermal_dir.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(&thermal_dir)
                .map_err(|e| io_err(&thermal_dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            entries.sort();
            for path in entries {
                let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                let mat = parse_thermal_csv(&path.display().to_string(), &text)?;
                self.insert_thermal(mat);
            }
        }
        Ok(())
    }

    pub fn insert_optical(&mut self, material: OpticalMaterial) {
        self.optical.insert(material.name.clone(), material);
    }

    pub fn insert_thermal(&mut self, material: ThermalMaterial) {
        self.thermal.insert(material.name.clone(), material);
    }

    pub fn optical(&self, name: &str) -> Result<&OpticalMaterial, MaterialError> {
        self.optical
            .get(name)
            .ok_or_else(|| MaterialError::NotFound(name.into()))
    }

    pub fn thermal(&self, name: &str) -> Result<&ThermalMaterial, MaterialError> {
        self.thermal
            .get(name)
            .ok_or_else(|| MaterialError::NotFound(format!("{name} (thermal)")))
    }

    pub fn optical_materials(&self) -> impl Iterator<Item = &OpticalMaterial> {
        self.optical.values()
    }

    pub fn thermal_materials(&self) -> impl Iterator<Item = &ThermalMaterial> {
        self.thermal.values()
    }
}

impl fmt::Display for OpticalMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.wavelength_range_nm();
        write!(f, "{}: {} samples over {lo}-{hi} nm", self.name, self.samples.len())?;
        if let Some(eg) = self.bandgap_ev {
            write!(f, ", bandgap {eg} eV")?;
        }
        Ok(())
    }
}

struct HeaderMeta {
    name: Option<String>,
    source: Option<String>,
    bandgap_ev: Option<f64>,
}

fn parse_header_comment(line: &str) -> HeaderMeta {
    let mut meta = HeaderMeta {
        name: None,
        source: None,
        bandgap_ev: None,
    };
    let body = line.trim_start_matches('#').trim();
    for field in body.split(';') {
        let Some((key, value)) = field.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "material" => meta.name = Some(value.to_string()),
            "source" => meta.source = Some(value.to_string()),
            "bandgap_eV" => {
                if value != "none" {
                    meta.bandgap_ev = value.parse().ok();
                }
            }
            _ => {}
        }
    }
    meta
}

fn numeric_fields<'a>(
    file: &str,
    line_no: usize,
    line: &'a str,
    expected: usize,
) -> Result<Vec<f64>, MaterialError> {
    let mut out = Vec::with_capacity(expected);
    let mut column = 1;
    for field in line.split(',') {
        let trimmed = field.trim();
        let value: f64 = trimmed.parse().map_err(|_| MaterialError::Parse {
            file: file.into(),
            line: line_no,
            column,
            message: format!("expected a number, found {trimmed:?}"),
        })?;
        out.push(value);
        column += field.len() + 1;
    }
    if out.len() != expected {
        return Err(MaterialError::Parse {
            file: file.into(),
            line: line_no,
            column: 1,
            message: format!("expected {expected} comma-separated values, found {}", out.len()),
        });
    }
    Ok(out)
}

/// `true` for a column-header row such as `wavelength_nm,n,k`.
fn is_label_row(line: &str) -> bool {
    line.split(',')
        .all(|f| f.trim().parse::<f64>().is_err() && !f.trim().is_empty())
}

/// Parse one optical CSV: `# material: <name>; source: <citation>;
/// bandgap_eV: <num|none>` then `wavelength_nm,n,k` rows.
pub fn parse_optical_csv(file: &str, text: &str) -> Result<OpticalMaterial, MaterialError> {
    let mut meta = HeaderMeta {
        name: None,
        source: None,
        bandgap_ev: None,
    };
    let mut samples = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rest.contains("material:") {
                meta = parse_header_comment(line);
            }
            continue;
        }
        if !seen_data && is_label_row(line) {
            continue;
        }
        let v = numeric_fields(file, line_no, line, 3)?;
        seen_data = true;
        samples.push(DispersionSample {
            wavelength_nm: v[0],
            n: v[1],
            k: v[2],
        });
    }
    let name = meta.name.unwrap_or_else(|| {
        Path::new(file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.to_string())
    });
    let mut mat = OpticalMaterial::new(name, samples, meta.bandgap_ev).map_err(|e| match e {
        MaterialError::Invalid { name, message } => MaterialError::Parse {
            file: file.into(),
            line: 1,
            column: 1,
            message: format!("material {name}: {message}"),
        },
        other => other,
    })?;
    if let Some(source) = meta.source {
        mat = mat.with_source(source);
    }
    Ok(mat)
}

/// Parse one thermal CSV: optional `# material:` comment, then
/// `temperature_K,k_W_per_mK` rows.
pub fn parse_thermal_csv(file: &str, text: &str) -> Result<ThermalMaterial, MaterialError> {
    let mut meta = HeaderMeta {
        name: None,
        source: None,
        bandgap_ev: None,
    };
    let mut points = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rest.contains("material:") {
                meta = parse_header_comment(line);
            }
            continue;
        }
        if !seen_data && is_label_row(line) {
            continue;
        }
        let v = numeric_fields(file, line_no, line, 2)?;
        seen_data = true;
        points.push((v[0], v[1]));
    }
    let name = meta.name.unwrap_or_else(|| {
        Path::new(file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.to_string())
    });
    let mut mat = ThermalMaterial::new(name, points).map_err(|e| match e {
        MaterialError::Invalid { name, message } => MaterialError::Parse {
            file: file.into(),
            line: 1,
            column: 1,
            message: format!("material {name}: {message}"),
        },
        other => other,
    })?;
    if let Some(source) = meta.source {
        mat = mat.with_source(source);
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_sample() -> OpticalMaterial {
        OpticalMaterial::new(
            "pair",
            vec![
                DispersionSample { wavelength_nm: 1000.0, n: 2.0, k: 0.0 },
                DispersionSample { wavelength_nm: 2000.0, n: 3.0, k: 0.0 },
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn nbn_design_value() {
        let db = MaterialDb::builtin();
        let idx = db.optical("NbN").unwrap().refractive_index(1560.0).unwrap();
        assert_eq!(idx.re, 5.23);
        assert_eq!(idx.im, 5.82);
    }

    #[test]
    fn vacuum_is_unity() {
        let db = MaterialDb::builtin();
        let air = db.optical("Air").unwrap();
        for lam in [300.0, 780.0, 1560.0, 4000.0] {
            let idx = air.refractive_index(lam).unwrap();
            assert_eq!(idx, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn midpoint_interpolation() {
        let idx = two_sample().refractive_index(1500.0).unwrap();
        assert_abs_diff_eq!(idx.re, 2.5, epsilon = 1e-15);
        assert_eq!(idx.im, 0.0);
    }

    #[test]
    fn out_of_range_is_an_error_naming_the_material() {
        let err = two_sample().refractive_index(900.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pair"), "{msg}");
        assert!(msg.contains("900"), "{msg}");
        assert!(two_sample().refractive_index(2000.5).is_err());
    }

    #[test]
    fn interpolation_exact_at_sample_points() {
        let db = MaterialDb::builtin();
        for mat in db.optical_materials() {
            for s in mat.samples() {
                let idx = mat.refractive_index(s.wavelength_nm).unwrap();
                assert_eq!(idx.re, s.n, "{} at {}", mat.name(), s.wavelength_nm);
                assert_eq!(idx.im, s.k, "{} at {}", mat.name(), s.wavelength_nm);
            }
        }
    }

    #[test]
    fn lossless_attenuation_is_zero() {
        assert_eq!(two_sample().attenuation_db_per_um(1234.0).unwrap(), 0.0);
    }

    #[test]
    fn silicon_pump_attenuation() {
        let db = MaterialDb::builtin();
        let att = db.optical("Si").unwrap().attenuation_db_per_um(780.0).unwrap();
        assert_relative_eq!(att, 0.55, max_relative = 0.005);
        let cryo = db.optical("Si-cryo").unwrap().attenuation_db_per_um(780.0).unwrap();
        assert_relative_eq!(cryo, att / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn nbn_attenuation_near_204() {
        let att = k_to_db_per_um(5.82, 1560.0);
        assert_relative_eq!(att, 203.6, max_relative = 0.002);
        let db = MaterialDb::builtin();
        let via_material = db.optical("NbN").unwrap().attenuation_db_per_um(1560.0).unwrap();
        assert_eq!(att, via_material);
    }

    #[test]
    fn attenuation_round_trip() {
        for &k in &[1.0e-6, 0.00786, 0.5, 5.82] {
            for &lam in &[400.0, 780.0, 1560.0, 2500.0] {
                let back = db_per_um_to_k(k_to_db_per_um(k, lam), lam);
                assert_relative_eq!(back, k, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn attenuation_monotonicity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let k1: f64 = rng.gen_range(0.0..5.0);
            let k2: f64 = k1 + rng.gen_range(1e-6..1.0);
            let lam1: f64 = rng.gen_range(300.0..2000.0);
            let lam2: f64 = lam1 + rng.gen_range(1.0..500.0);
            assert!(k_to_db_per_um(k2, lam1) > k_to_db_per_um(k1, lam1));
            if k1 > 0.0 {
                assert!(k_to_db_per_um(k1, lam2) < k_to_db_per_um(k1, lam1));
            }
        }
    }

    #[test]
    fn thermal_midpoint() {
        let mat = ThermalMaterial::new("rod", vec![(2.0, 500.0), (4.0, 1500.0)]).unwrap();
        assert_abs_diff_eq!(mat.conductivity(3.0).unwrap(), 1000.0, epsilon = 1e-12);
    }

    #[test]
    fn thermal_single_point_answers_only_at_the_point() {
        let mat = ThermalMaterial::new("point", vec![(2.0, 500.0)]).unwrap();
        assert_eq!(mat.conductivity(2.0).unwrap(), 500.0);
        assert!(mat.conductivity(2.1).is_err());
        assert!(mat.conductivity(1.9).is_err());
    }

    #[test]
    fn bundled_thermal_table_exact_at_samples() {
        let db = MaterialDb::builtin();
        let si = db.thermal("Si").unwrap();
        for &(t, k) in si.points() {
            assert_eq!(si.conductivity(t).unwrap(), k);
        }
        assert_eq!(si.conductivity(2.2).unwrap(), 34.8);
    }

    #[test]
    fn parse_errors_carry_location() {
        let text = "# material: broken; source: test; bandgap_eV: none\nwavelength_nm,n,k\n500,1.5,0\n600,oops,0\n";
        let err = parse_optical_csv("broken.csv", text).unwrap_err();
        match err {
            MaterialError::Parse { file, line, column, .. } => {
                assert_eq!(file, "broken.csv");
                assert_eq!(line, 4);
                assert_eq!(column, 5);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn non_increasing_wavelengths_rejected() {
        let text = "500,1.5,0\n500,1.6,0\n";
        assert!(parse_optical_csv("dup.csv", text).is_err());
    }

    #[test]
    fn header_metadata_parsed() {
        let db = MaterialDb::builtin();
        let si = db.optical("Si").unwrap();
        assert_eq!(si.bandgap_ev(), Some(1.1));
        assert!(si.source().unwrap().contains("Green"));
        assert_eq!(db.optical("SiO2").unwrap().bandgap_ev(), None);
    }

    #[test]
    fn builtin_has_all_device_materials() {
        let db = MaterialDb::builtin();
        for name in ["Air", "Al2O3", "Au", "LN-TE", "LN-TM", "NbN", "Si", "Si-cryo", "SiO2"] {
            assert!(db.optical(name).is_ok(), "{name} missing");
        }
        assert!(db.optical("Unobtainium").is_err());
    }
}
