//! Time-domain oracle for normal-incidence stack response.
//!
//! Completely independent of the matrix solver: a 1D Yee grid with graded
//! matched absorbers at both ends, a soft pulsed source in the incidence
//! medium, and single-frequency DFT monitors. Reflection is isolated by a
//! second reference run in the uniform incidence medium and subtracting its
//! recorded field, so the two solvers share no numerics.

use super::{Layer1D, LayerStack1D, StackResponse, TmmError};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct Fdtd1dOptions {
    /// Grid pitch. Every layer thickness must be an integer multiple.
    pub dz_nm: f64,
    pub courant: f64,
    /// Gaussian envelope width in optical periods.
    pub pulse_periods: f64,
    /// Free cells between absorber, source, monitors, and the stack.
    pub gap_cells: usize,
    pub absorber_cells: usize,
    pub max_steps: usize,
    /// Stop once field energy falls below this fraction of its peak.
    pub shutoff: f64,
}

impl Default for Fdtd1dOptions {
    fn default() -> Self {
        Self {
            dz_nm: 0.5,
            courant: 0.95,
            pulse_periods: 3.0,
            gap_cells: 1200,
            absorber_cells: 400,
            max_steps: 400_000,
            shutoff: 1e-10,
        }
    }
}

/// Per-cell material parameters. A cell with `wp2 > 0` carries a single-pole
/// Drude current so media with Re(eps) < 1 stay stable; everything else uses
/// a plain conductivity whose loss is exact at the monitor frequency.
#[derive(Debug, Clone, Copy, Default)]
struct CellParams {
    eps_inf: f64,
    sigma: f64,
    sigma_h: f64,
    wp2: f64,
    gamma: f64,
}

fn cell_params(index: Complex64, omega0: f64) -> CellParams {
    let eps = index * index;
    if eps.re >= 1.0 {
        CellParams {
            eps_inf: eps.re,
            sigma: eps.im * omega0,
            ..Default::default()
        }
    } else {
        let a = 1.0 - eps.re;
        let b = eps.im;
        CellParams {
            eps_inf: 1.0,
            gamma: if a > 0.0 { omega0 * b / a } else { 0.0 },
            wp2: omega0 * omega0 * (a * a + b * b) / a,
            ..Default::default()
        }
    }
}

struct MonitorAcc {
    node: usize,
    e: Complex64,
    h_left: Complex64,
    h_right: Complex64,
}

impl MonitorAcc {
    fn new(node: usize) -> Self {
        Self {
            node,
            e: Complex64::new(0.0, 0.0),
            h_left: Complex64::new(0.0, 0.0),
            h_right: Complex64::new(0.0, 0.0),
        }
    }

    /// Forward power flux at the node; H is averaged from the flanking
    /// half-cells so E and H are collocated.
    fn flux(&self) -> f64 {
        (self.e * (0.5 * (self.h_left + self.h_right)).conj()).re * 0.5
    }
}

struct Lattice {
    /// Node-centered E coefficients.
    ca: Vec<f64>,
    cb: Vec<f64>,
    /// Half-cell H coefficients.
    da: Vec<f64>,
    db: Vec<f64>,
    /// Drude current coefficients per node; zero rows are inert.
    ja: Vec<f64>,
    jb: Vec<f64>,
}

/// Build node and half-cell update coefficients from per-cell parameters.
/// Node values average the two flanking cells, which keeps material
/// interfaces second-order accurate.
fn build_lattice(cells: &[CellParams], dt: f64, dz: f64) -> Lattice {
    let n_nodes = cells.len() + 1;
    let mut ca = vec![0.0; n_nodes];
    let mut cb = vec![0.0; n_nodes];
    let mut ja = vec![0.0; n_nodes];
    let mut jb = vec![0.0; n_nodes];
    for i in 0..n_nodes {
        let left = cells[i.saturating_sub(1).min(cells.len() - 1)];
        let right = cells[i.min(cells.len() - 1)];
        let eps = 0.5 * (left.eps_inf + right.eps_inf);
        let sigma = 0.5 * (left.sigma + right.sigma);
        let wp2 = 0.5 * (left.wp2 + right.wp2);
        // Drude media never abut each other in these stacks, so the pole
        // rate comes from whichever side carries the current.
        let gamma = if left.wp2 > 0.0 { left.gamma } else { right.gamma };
        let x = sigma * dt / (2.0 * eps);
        ca[i] = (1.0 - x) / (1.0 + x);
        cb[i] = (dt / eps) / (1.0 + x);
        ja[i] = (1.0 - gamma * dt / 2.0) / (1.0 + gamma * dt / 2.0);
        jb[i] = wp2 * dt / (1.0 + gamma * dt / 2.0);
    }
    let mut da = vec![0.0; cells.len()];
    let mut db = vec![0.0; cells.len()];
    for (i, c) in cells.iter().enumerate() {
        let x = c.sigma_h * dt / 2.0;
        da[i] = (1.0 - x) / (1.0 + x);
        db[i] = (dt / dz) / (1.0 + x);
    }
    Lattice { ca, cb, da, db, ja, jb }
}

/// Quartic-graded conductivity over the absorber cells, impedance-matched to
/// the local permittivity so the ramp itself does not reflect.
fn grade_absorbers(cells: &mut [CellParams], n_abs: usize, dz: f64) {
    let total = cells.len();
    let sigma_max = |eps: f64| 0.05 * 5.0 * eps.sqrt() / dz;
    for k in 0..n_abs {
        let depth = (k + 1) as f64 / n_abs as f64;
        let g = depth.powi(4);
        let left = n_abs - 1 - k;
        cells[left].sigma += sigma_max(cells[left].eps_inf) * g;
        cells[left].sigma_h = cells[left].sigma / cells[left].eps_inf;
        let right = total - n_abs + k;
        cells[right].sigma += sigma_max(cells[right].eps_inf) * g;
        cells[right].sigma_h = cells[right].sigma / cells[right].eps_inf;
    }
}

/// One time-domain run; returns the monitors with their accumulated spectra.
fn run(
    cells: &[CellParams],
    dz: f64,
    dt: f64,
    omega0: f64,
    source_node: usize,
    pulse_tau: f64,
    monitor_nodes: &[usize],
    max_steps: usize,
    shutoff: f64,
) -> Result<Vec<MonitorAcc>, TmmError> {
    let lat = build_lattice(cells, dt, dz);
    let n_nodes = cells.len() + 1;
    let mut e = vec![0.0f64; n_nodes];
    let mut h = vec![0.0f64; cells.len()];
    let mut j = vec![0.0f64; n_nodes];
    let mut monitors: Vec<MonitorAcc> = monitor_nodes.iter().map(|&n| MonitorAcc::new(n)).collect();

    let t0 = 5.0 * pulse_tau;
    let source_done = t0 + 5.0 * pulse_tau;
    let mut peak_energy = 0.0f64;
    for step in 0..max_steps {
        let t_e = (step + 1) as f64 * dt;
        let t_h = (step as f64 + 0.5) * dt;
        for i in 0..n_nodes {
            if lat.jb[i] != 0.0 {
                j[i] = lat.ja[i] * j[i] + lat.jb[i] * e[i];
            }
        }
        for i in 0..h.len() {
            h[i] = lat.da[i] * h[i] - lat.db[i] * (e[i + 1] - e[i]);
        }
        for i in 1..n_nodes - 1 {
            e[i] = lat.ca[i] * e[i] + lat.cb[i] * (-(h[i] - h[i - 1]) / dz - j[i]);
        }
        let arg = (t_e - t0) / pulse_tau;
        e[source_node] += (omega0 * (t_e - t0)).sin() * (-arg * arg).exp();

        let ph_e = Complex64::from_polar(dt, omega0 * t_e);
        let ph_h = Complex64::from_polar(dt, omega0 * t_h);
        for m in monitors.iter_mut() {
            m.e += e[m.node] * ph_e;
            m.h_left += h[m.node - 1] * ph_h;
            m.h_right += h[m.node] * ph_h;
        }

        if step % 500 == 499 {
            let energy: f64 = e.iter().map(|v| v * v).sum();
            if !energy.is_finite() {
                return Err(TmmError::Invalid(format!(
                    "time-domain run diverged at step {step}"
                )));
            }
            peak_energy = peak_energy.max(energy);
            if t_e > source_done && energy < shutoff * peak_energy {
                break;
            }
        }
    }
    Ok(monitors)
}

/// Simulate a stack at normal incidence and report the same quantities as
/// the matrix solver. The exit medium must be lossless so transmitted flux
/// is well-defined at the final interface.
pub fn simulate_stack_1d(
    stack: &LayerStack1D,
    options: Fdtd1dOptions,
) -> Result<StackResponse, TmmError> {
    if stack.angle_deg != 0.0 {
        return Err(TmmError::Invalid(
            "time-domain oracle handles normal incidence only".into(),
        ));
    }
    if stack.exit_index.im.abs() > 1e-12 {
        return Err(TmmError::Invalid(
            "time-domain oracle needs a lossless exit medium".into(),
        ));
    }
    if !(options.dz_nm > 0.0) || !(options.courant > 0.0 && options.courant <= 1.0) {
        return Err(TmmError::Invalid("bad grid options".into()));
    }
    let dz = options.dz_nm * 1e-3;
    let mut layer_cells = Vec::with_capacity(stack.layers.len());
    for layer in &stack.layers {
        let cells = layer.thickness_nm / options.dz_nm;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-6 {
            return Err(TmmError::Invalid(format!(
                "layer {} thickness {} nm is not a multiple of dz = {} nm",
                layer.name, layer.thickness_nm, options.dz_nm
            )));
        }
        layer_cells.push(rounded as usize);
    }
    let stack_cells: usize = layer_cells.iter().sum();
    let n_abs = options.absorber_cells;
    let gap = options.gap_cells;
    let total_cells = 2 * (n_abs + gap) + stack_cells;
    let omega0 = 2.0 * std::f64::consts::PI / (stack.wavelength_nm * 1e-3);
    let dt = options.courant * dz;
    let pulse_tau = options.pulse_periods * stack.wavelength_nm * 1e-3;

    let source_node = n_abs + gap / 3;
    let reference_node = n_abs + 2 * gap / 3;
    let stack_start = n_abs + gap;
    let mut boundaries = vec![stack_start];
    let mut acc = stack_start;
    for c in &layer_cells {
        acc += c;
        boundaries.push(acc);
    }

    let n0 = Complex64::new(stack.incidence_index, 0.0);

    // Reference run: the incidence medium fills the whole domain.
    let mut ref_cells = vec![cell_params(n0, omega0); total_cells];
    grade_absorbers(&mut ref_cells, n_abs, dz);
    let ref_monitors = run(
        &ref_cells,
        dz,
        dt,
        omega0,
        source_node,
        pulse_tau,
        &[reference_node],
        options.max_steps,
        options.shutoff,
    )?;
    let p_inc = ref_monitors[0].flux();
    if !(p_inc > 0.0) {
        return Err(TmmError::Invalid("reference run recorded no flux".into()));
    }

    // Stack run: identical upstream of the stack, layered downstream.
    let mut cells = vec![cell_params(n0, omega0); total_cells];
    for (idx, layer) in stack.layers.iter().enumerate() {
        let params = cell_params(layer.index, omega0);
        for c in cells.iter_mut().take(boundaries[idx + 1]).skip(boundaries[idx]) {
            *c = params;
        }
    }
    let exit_params = cell_params(stack.exit_index, omega0);
    for c in cells.iter_mut().skip(*boundaries.last().unwrap()) {
        *c = exit_params;
    }
    grade_absorbers(&mut cells, n_abs, dz);

    // Flux planes: interpolating H across a strong permittivity jump biases
    // the interface flux by O(dz * delta-eps), so each boundary's flux is
    // read at the midpoint of an adjacent lossless region instead, where the
    // Poynting flux is position-independent and equals the interface value.
    // Only a junction of two lossy layers falls back to the interface node.
    let m = stack.layers.len();
    let lossless = |l: &Layer1D| l.index.im.abs() < 1e-12;
    let mut boundary_nodes = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let left_ok = j == 0 || lossless(&stack.layers[j - 1]);
        let node = if left_ok {
            if j == 0 {
                reference_node
            } else {
                (boundaries[j - 1] + boundaries[j]) / 2
            }
        } else if j == m {
            boundaries[m] + gap / 2
        } else if lossless(&stack.layers[j]) {
            (boundaries[j] + boundaries[j + 1]) / 2
        } else {
            boundaries[j]
        };
        boundary_nodes.push(node);
    }
    let mut monitor_nodes = vec![reference_node];
    monitor_nodes.extend_from_slice(&boundary_nodes);
    let monitors = run(
        &cells,
        dz,
        dt,
        omega0,
        source_node,
        pulse_tau,
        &monitor_nodes,
        options.max_steps,
        options.shutoff,
    )?;

    // Subtracting the reference spectrum at the upstream monitor leaves only
    // the field reflected off the stack.
    let sub = MonitorAcc {
        node: reference_node,
        e: monitors[0].e - ref_monitors[0].e,
        h_left: monitors[0].h_left - ref_monitors[0].h_left,
        h_right: monitors[0].h_right - ref_monitors[0].h_right,
    };
    let reflectance = (-sub.flux() / p_inc).max(0.0);
    let boundary_flux: Vec<f64> = monitors[1..].iter().map(|m| m.flux() / p_inc).collect();
    let transmittance = *boundary_flux.last().unwrap();
    let layer_absorbance = boundary_flux.windows(2).map(|w| w[0] - w[1]).collect();
    Ok(StackResponse {
        reflectance,
        transmittance,
        layer_absorbance,
    })
}
