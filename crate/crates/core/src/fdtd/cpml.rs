//! Convolutional PML coefficients and auxiliary fields.
//!
//! Quartic-graded stretching on all four edges with kappa_max = 3 and the
//! standard 0.8(m+1)/spacing conductivity scale, divided by the strongest
//! refractive index found along each wall. The scale must be uniform along
//! a wall: a stretch that varied across a guided mode's cross-section would
//! break the matching and reflect by mode conversion, so per-cell index
//! scaling is deliberately avoided. The outermost node ring is never
//! updated, which backs the absorber with a perfect conductor.

const GRADE: i32 = 4;
const KAPPA_MAX: f64 = 3.0;
const ALPHA_MAX: f64 = 0.2;

pub(crate) struct Cpml {
    /// 1/kappa per column or row; unity outside the absorber.
    pub inv_kex: Vec<f64>,
    pub inv_key: Vec<f64>,
    pub inv_khx: Vec<f64>,
    pub inv_khy: Vec<f64>,
    /// Recursion coefficients, full-size but meaningful only on the strips.
    pub bex: Vec<f64>,
    pub aex: Vec<f64>,
    pub bey: Vec<f64>,
    pub aey: Vec<f64>,
    pub bhx: Vec<f64>,
    pub ahx: Vec<f64>,
    pub bhy: Vec<f64>,
    pub ahy: Vec<f64>,
    pub psi_ezx: Vec<f64>,
    pub psi_ezy: Vec<f64>,
    pub psi_hyx: Vec<f64>,
    pub psi_hxy: Vec<f64>,
    /// Strip index sets: columns for x-direction terms, rows for y.
    pub cols_e: Vec<usize>,
    pub cols_h: Vec<usize>,
    pub rows_e: Vec<usize>,
    pub rows_h: Vec<usize>,
}

/// sigma, kappa, alpha at normalized absorber depth p in (0, 1].
fn profile(p: f64, spacing: f64, n_local: f64) -> (f64, f64, f64) {
    let g = p.powi(GRADE);
    let sigma = 0.8 * (GRADE as f64 + 1.0) / spacing * g / n_local;
    let kappa = 1.0 + (KAPPA_MAX - 1.0) * g;
    let alpha = ALPHA_MAX * (1.0 - p);
    (sigma, kappa, alpha)
}

fn recursion(sigma: f64, kappa: f64, alpha: f64, dt: f64) -> (f64, f64) {
    let b = (-(sigma / kappa + alpha) * dt).exp();
    let denom = kappa * (sigma + kappa * alpha);
    let a = if denom > 0.0 { sigma * (b - 1.0) / denom } else { 0.0 };
    (b, a)
}

/// Normalized depth of a position `u` (in cell units along one axis) inside
/// the absorber, or None in the interior. The absorber spans `[0, npml]`
/// and `[n - npml, n]` in cell-boundary coordinates.
fn depth(u: f64, n: usize, npml: usize) -> Option<f64> {
    let npml_f = npml as f64;
    if u < npml_f {
        Some((npml_f - u) / npml_f)
    } else if u > n as f64 - npml_f {
        Some((u - (n as f64 - npml_f)) / npml_f)
    } else {
        None
    }
}

pub(crate) fn build(
    nx: usize,
    ny: usize,
    npml: usize,
    dx: f64,
    dy: f64,
    dt: f64,
    eps_inf: &[f64],
) -> Cpml {
    let size = nx * ny;
    let mut c = Cpml {
        inv_kex: vec![1.0; nx],
        inv_key: vec![1.0; ny],
        inv_khx: vec![1.0; nx],
        inv_khy: vec![1.0; ny],
        bex: vec![0.0; size],
        aex: vec![0.0; size],
        bey: vec![0.0; size],
        aey: vec![0.0; size],
        bhx: vec![0.0; size],
        ahx: vec![0.0; size],
        bhy: vec![0.0; size],
        ahy: vec![0.0; size],
        psi_ezx: vec![0.0; size],
        psi_ezy: vec![0.0; size],
        psi_hyx: vec![0.0; size],
        psi_hxy: vec![0.0; size],
        cols_e: Vec::new(),
        cols_h: Vec::new(),
        rows_e: Vec::new(),
        rows_h: Vec::new(),
    };

    // Node positions: the out-of-plane field at index i sits at u = i + 0.5;
    // the staggered magnetic sample between i and i + 1 sits at u = i + 1.
    for i in 1..nx - 1 {
        if let Some(p) = depth(i as f64 + 0.5, nx, npml) {
            c.cols_e.push(i);
            c.inv_kex[i] = 1.0 / (1.0 + (KAPPA_MAX - 1.0) * p.powi(GRADE));
        }
    }
    for i in 0..nx - 1 {
        if let Some(p) = depth(i as f64 + 1.0, nx, npml) {
            if p > 0.0 {
                c.cols_h.push(i);
                c.inv_khx[i] = 1.0 / (1.0 + (KAPPA_MAX - 1.0) * p.powi(GRADE));
            }
        }
    }
    for j in 1..ny - 1 {
        if let Some(p) = depth(j as f64 + 0.5, ny, npml) {
            c.rows_e.push(j);
            c.inv_key[j] = 1.0 / (1.0 + (KAPPA_MAX - 1.0) * p.powi(GRADE));
        }
    }
    for j in 0..ny - 1 {
        if let Some(p) = depth(j as f64 + 1.0, ny, npml) {
            if p > 0.0 {
                c.rows_h.push(j);
                c.inv_khy[j] = 1.0 / (1.0 + (KAPPA_MAX - 1.0) * p.powi(GRADE));
            }
        }
    }

    // One conductivity scale per wall, taken from the strongest index on
    // that wall. The pads clamp interior edge cells, so the outermost
    // column and row already carry the materials the absorber continues.
    let n_at = |p: usize| eps_inf[p].max(1.0).sqrt();
    let (mut n_x0, mut n_x1, mut n_y0, mut n_y1) = (1.0f64, 1.0f64, 1.0f64, 1.0f64);
    for j in 0..ny {
        n_x0 = n_x0.max(n_at(j * nx));
        n_x1 = n_x1.max(n_at(j * nx + nx - 1));
    }
    for i in 0..nx {
        n_y0 = n_y0.max(n_at(i));
        n_y1 = n_y1.max(n_at((ny - 1) * nx + i));
    }
    let n_x = |i: usize| if i < nx / 2 { n_x0 } else { n_x1 };
    let n_y = |j: usize| if j < ny / 2 { n_y0 } else { n_y1 };
    for j in 0..ny {
        for &i in &c.cols_e {
            let p = depth(i as f64 + 0.5, nx, npml).unwrap();
            let idx = j * nx + i;
            let (s, k, al) = profile(p, dx, n_x(i));
            let (b, a) = recursion(s, k, al, dt);
            c.bex[idx] = b;
            c.aex[idx] = a;
        }
        for &i in &c.cols_h {
            let p = depth(i as f64 + 1.0, nx, npml).unwrap();
            let idx = j * nx + i;
            let (s, k, al) = profile(p, dx, n_x(i));
            let (b, a) = recursion(s, k, al, dt);
            c.bhx[idx] = b;
            c.ahx[idx] = a;
        }
    }
    for &j in &c.rows_e {
        let p = depth(j as f64 + 0.5, ny, npml).unwrap();
        let (s, k, al) = profile(p, dy, n_y(j));
        let (b, a) = recursion(s, k, al, dt);
        for i in 0..nx {
            let idx = j * nx + i;
            c.bey[idx] = b;
            c.aey[idx] = a;
        }
    }
    for &j in &c.rows_h {
        let p = depth(j as f64 + 1.0, ny, npml).unwrap();
        let (s, k, al) = profile(p, dy, n_y(j));
        let (b, a) = recursion(s, k, al, dt);
        for i in 0..nx {
            let idx = j * nx + i;
            c.bhy[idx] = b;
            c.ahy[idx] = a;
        }
    }
    c
}
