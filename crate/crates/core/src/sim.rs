//! Finite-volume IMEX integrator for the full nonlinear system on an
//! interval with zero-flux boundaries, plus the discrete reduction
//! cross-check.
//!
//! Diffusion is treated implicitly (backward Euler, one tridiagonal solve
//! per field and step); the chemotactic flux and the kinetics are explicit.
//! The chemotactic face flux upwinds the transported density on the sign of
//! the chemoattractant gradient, and boundary faces carry zero flux, so the
//! scheme conserves the total population exactly up to solver roundoff.

use nalgebra::{DMatrix, DVector};

use crate::eigen;
use crate::error::{Error, Result};
use crate::model::{DomainSpec, ModelSpec};
use crate::spectral::{build_mode_matrix, mode_spectrum};
use crate::steady::SteadyState;

/// Fields larger than this are treated as blown up.
const BLOWUP_LIMIT: f64 = 1e12;
/// Safety factor of the advertised step bound `dt <= 0.4 h^2 / max D`.
const DT_SAFETY: f64 = 0.4;
/// Dense-solve cost guard for the cross-check operator.
const CROSS_CHECK_MAX_N: usize = 128;

/// Cell-centered grid on `[0, L]`: `n` cells of width `h = L/n` with centers
/// `x_j = (j + 1/2) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    /// At least 8 cells; the finite-volume layout makes zero-flux boundaries
    /// exact.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Precondition(format!("grid needs n >= 8 cells, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Precondition("grid length must be positive".into()));
        }
        Ok(Grid1D { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h()
    }
}

/// Cell averages of the population `u` and the chemicals `v` (one row per
/// chemical) at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: DVector<f64>,
    /// `N x n`: row `k` holds chemical `k` on the grid.
    pub v: DMatrix<f64>,
    pub t: f64,
}

impl State {
    /// Spatially constant state at the homogeneous steady state.
    pub fn homogeneous(model: &ModelSpec, ss: &SteadyState, grid: &Grid1D) -> State {
        let n = grid.n();
        let nv = model.n_species();
        let mut v = DMatrix::zeros(nv, n);
        for k in 0..nv {
            v.row_mut(k).fill(ss.v_star[k]);
        }
        State {
            u: DVector::from_element(n, ss.u_star),
            v,
            t: 0.0,
        }
    }

    /// Adds `amplitude * cos(mode pi x / L)` to the population field, the
    /// standard single-mode seed for growth-rate measurements.
    pub fn seed_cosine(mut self, grid: &Grid1D, mode: usize, amplitude: f64) -> State {
        let k = mode as f64 * std::f64::consts::PI / grid.length();
        for j in 0..grid.n() {
            self.u[j] += amplitude * (k * grid.center(j)).cos();
        }
        self
    }
}

/// Time-stepping parameters. `track_mode` selects the cosine mode whose
/// amplitude the trajectory records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub track_mode: usize,
    /// Retain full field snapshots at every sample.
    pub keep_snapshots: bool,
}

/// Sampled observables of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Total population `h * sum(u)` per sample.
    pub mass: Vec<f64>,
    /// Tracked cosine-mode amplitude of `u` per sample.
    pub mode_amplitude: Vec<f64>,
    /// Max-norm distance from the reference state per sample.
    pub max_deviation: Vec<f64>,
    /// Spatial mean of each chemical per sample.
    pub species_means: Vec<Vec<f64>>,
    /// Time at which the run blew up, if it did; the trajectory is truncated
    /// there.
    pub diverged: Option<f64>,
    /// Full fields per sample (`u` then each chemical, `n` doubles each)
    /// when snapshots were kept.
    pub snapshots: Option<Vec<f64>>,
    pub n: usize,
    pub length: f64,
    pub track_mode: usize,
}

/// The advertised stability bound on the time step.
pub fn max_stable_dt(model: &ModelSpec, grid: &Grid1D) -> f64 {
    let dmax = model
        .chem_diffusion
        .iter()
        .fold(model.cell_diffusion, |m, &d| m.max(d));
    DT_SAFETY * grid.h() * grid.h() / dmax
}

/// Prefactored backward-Euler tridiagonal solve `(I - dt d Lap_h) x = b`
/// with zero-flux boundary rows.
struct DiffusionSolve {
    denom: Vec<f64>,
    cp: Vec<f64>,
    lower: f64,
}

impl DiffusionSolve {
    fn new(n: usize, r: f64) -> Self {
        // Row j: -r x_{j-1} + b_j x_j - r x_{j+1} = rhs_j, with b = 1 + 2r in
        // the interior and 1 + r at both boundary rows.
        let b = |j: usize| {
            if j == 0 || j == n - 1 {
                1.0 + r
            } else {
                1.0 + 2.0 * r
            }
        };
        let mut denom = vec![0.0; n];
        let mut cp = vec![0.0; n];
        denom[0] = b(0);
        cp[0] = -r / denom[0];
        for j in 1..n {
            denom[j] = b(j) + r * cp[j - 1];
            if j < n - 1 {
                cp[j] = -r / denom[j];
            }
        }
        DiffusionSolve { denom, cp, lower: -r }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.denom.len();
        x[0] /= self.denom[0];
        for j in 1..n {
            x[j] = (x[j] - self.lower * x[j - 1]) / self.denom[j];
        }
        for j in (0..n - 1).rev() {
            x[j] -= self.cp[j] * x[j + 1];
        }
    }
}

/// Integrates the model from `ic` to `t_end`, sampling observables every
/// `sample_every` steps. `reference` supplies the state the deviation
/// observable measures against (typically the steady state); without it the
/// initial spatial means are used.
pub fn simulate(
    model: &ModelSpec,
    grid: &Grid1D,
    ic: &State,
    cfg: &SimConfig,
    reference: Option<&SteadyState>,
) -> Result<Trajectory> {
    let n = grid.n();
    let nv = model.n_species();
    if !matches!(model.domain, DomainSpec::Interval { .. }) {
        return Err(Error::Precondition("the simulator is 1D: interval domains only".into()));
    }
    if ic.u.len() != n {
        return Err(Error::Dimension { expected: n, got: ic.u.len() });
    }
    if ic.v.nrows() != nv || ic.v.ncols() != n {
        return Err(Error::Dimension { expected: nv * n, got: ic.v.nrows() * ic.v.ncols() });
    }
    let dt_max = max_stable_dt(model, grid);
    if !(cfg.dt > 0.0) || cfg.dt > dt_max {
        return Err(Error::Precondition(format!(
            "dt = {} violates the stability bound; maximal admissible dt = {dt_max}",
            cfg.dt
        )));
    }
    if cfg.sample_every == 0 {
        return Err(Error::Precondition("sample_every must be positive".into()));
    }
    if ic.u.iter().chain(ic.v.iter()).any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::Precondition("initial state must be finite and nonnegative".into()));
    }

    let h = grid.h();
    let dt = cfg.dt;
    let steps = (cfg.t_end / dt).round() as usize;

    let u_solve = DiffusionSolve::new(n, dt * model.cell_diffusion / (h * h));
    let v_solves: Vec<DiffusionSolve> = (0..nv)
        .map(|k| DiffusionSolve::new(n, dt * model.chem_diffusion[k] / (h * h)))
        .collect();

    // Deviation reference: supplied steady state or the initial means.
    let (ref_u, ref_v): (f64, DVector<f64>) = match reference {
        Some(ss) => (ss.u_star, ss.v_star.clone()),
        None => (
            ic.u.mean(),
            DVector::from_fn(nv, |k, _| ic.v.row(k).mean()),
        ),
    };

    let mut state = ic.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        mass: Vec::new(),
        mode_amplitude: Vec::new(),
        max_deviation: Vec::new(),
        species_means: Vec::new(),
        diverged: None,
        snapshots: cfg.keep_snapshots.then(Vec::new),
        n,
        length: grid.length(),
        track_mode: cfg.track_mode,
    };

    let mut flux = vec![0.0; n + 1];
    let mut vcell = vec![0.0; nv];
    let mut gcell = vec![0.0; nv];

    sample(&mut traj, model, grid, &state, ref_u, &ref_v, cfg.track_mode);
    for step in 1..=steps {
        // Explicit chemotactic transport of u: upwind donor-cell fluxes on
        // the chemoattractant gradient, zero at the boundary faces.
        let vn = state.v.row(model.chemoattractant);
        flux[0] = 0.0;
        flux[n] = 0.0;
        for f in 1..n {
            let grad = (vn[f] - vn[f - 1]) / h;
            let donor = if grad > 0.0 { state.u[f - 1] } else { state.u[f] };
            flux[f] = model.chi * donor * grad;
        }
        for j in 0..n {
            state.u[j] -= dt / h * (flux[j + 1] - flux[j]);
        }

        // Explicit kinetics and production of v.
        for j in 0..n {
            for k in 0..nv {
                vcell[k] = state.v[(k, j)];
            }
            model.network.kinetics_into(&vcell, &mut gcell);
            let uj = state.u[j];
            for k in 0..nv {
                state.v[(k, j)] += dt * (model.alpha[k] * uj + gcell[k]);
            }
        }

        // Implicit diffusion, one tridiagonal solve per field.
        u_solve.solve_in_place(state.u.as_mut_slice());
        for k in 0..nv {
            let mut row: Vec<f64> = state.v.row(k).iter().copied().collect();
            v_solves[k].solve_in_place(&mut row);
            for j in 0..n {
                state.v[(k, j)] = row[j];
            }
        }

        state.t = step as f64 * dt;

        let finite = state.u.iter().chain(state.v.iter()).all(|x| x.is_finite());
        if !finite || state.u.amax() > BLOWUP_LIMIT {
            traj.diverged = Some(state.t);
            break;
        }
        if step % cfg.sample_every == 0 || step == steps {
            sample(&mut traj, model, grid, &state, ref_u, &ref_v, cfg.track_mode);
        }
    }
    Ok(traj)
}

fn sample(
    traj: &mut Trajectory,
    model: &ModelSpec,
    grid: &Grid1D,
    state: &State,
    ref_u: f64,
    ref_v: &DVector<f64>,
    mode: usize,
) {
    let n = grid.n();
    traj.times.push(state.t);
    traj.mass.push(total_mass(state, grid));
    traj.mode_amplitude.push(mode_amplitude(state, grid, mode));
    let mut dev = state.u.iter().fold(0.0f64, |m, &x| m.max((x - ref_u).abs()));
    for k in 0..model.n_species() {
        for j in 0..n {
            dev = dev.max((state.v[(k, j)] - ref_v[k]).abs());
        }
    }
    traj.max_deviation.push(dev);
    traj.species_means
        .push((0..model.n_species()).map(|k| state.v.row(k).mean()).collect());
    if let Some(snaps) = &mut traj.snapshots {
        snaps.extend(state.u.iter());
        for k in 0..model.n_species() {
            snaps.extend(state.v.row(k).iter());
        }
    }
}

/// Total population `h * sum_j u_j`; the conservative flux form keeps it
/// constant along trajectories.
pub fn total_mass(state: &State, grid: &Grid1D) -> f64 {
    grid.h() * state.u.sum()
}

/// Amplitude of `cos(mode pi x / L)` in the population field (the mean for
/// mode 0).
pub fn mode_amplitude(state: &State, grid: &Grid1D, mode: usize) -> f64 {
    let n = grid.n();
    let l = grid.length();
    if mode == 0 {
        return state.u.sum() / n as f64;
    }
    let k = mode as f64 * std::f64::consts::PI / l;
    let mut acc = 0.0;
    for j in 0..n {
        acc += state.u[j] * (k * grid.center(j)).cos();
    }
    2.0 / l * grid.h() * acc
}

/// Least-squares slope of `log(amplitude)` over the sample window
/// `t0 <= t <= t1`. Errors on nonpositive amplitudes or fewer than two
/// samples in the window.
pub fn growth_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &a) in traj.times.iter().zip(&traj.mode_amplitude) {
        if t >= t0 && t <= t1 {
            if !(a > 0.0) {
                return Err(Error::Precondition(format!(
                    "mode amplitude {a} at t = {t} is not positive"
                )));
            }
            ts.push(t);
            ys.push(a.ln());
        }
    }
    if ts.len() < 2 {
        return Err(Error::Precondition(format!(
            "growth window [{t0}, {t1}] contains {} samples; need at least 2",
            ts.len()
        )));
    }
    let tbar = ts.iter().sum::<f64>() / ts.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    Ok(num / den)
}

/// Outcome of the discrete reduction cross-check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CrossCheckReport {
    /// Hausdorff distance between the discretized-operator spectrum and the
    /// union of the mode-matrix spectra.
    pub hausdorff_distance: f64,
    /// Dimension `(N+1) n` of the discretized operator.
    pub operator_dim: usize,
    /// Number of discrete Laplacian modes in the union.
    pub modes: usize,
}

/// Builds the `(N+1)n x (N+1)n` discretized linearized operator (the same
/// spatial scheme as the simulator, linearized at the steady state),
/// computes its full spectrum, and compares it against the union of the
/// mode-matrix spectra over the discrete Neumann Laplacian eigenvalues
/// `mu_i^h = -(4/h^2) sin^2(i pi / (2n))`.
pub fn discrete_cross_check(
    model: &ModelSpec,
    ss: &SteadyState,
    n: usize,
) -> Result<CrossCheckReport> {
    let length = match model.domain {
        DomainSpec::Interval { length } => length,
        _ => {
            return Err(Error::Precondition(
                "the discrete cross-check needs an interval domain".into(),
            ))
        }
    };
    if n < 2 {
        return Err(Error::Precondition("cross-check needs at least 2 cells".into()));
    }
    if n > CROSS_CHECK_MAX_N {
        return Err(Error::Precondition(format!(
            "n = {n} exceeds the dense-solve guard {CROSS_CHECK_MAX_N}"
        )));
    }
    let nv = model.n_species();
    if ss.v_star.len() != nv {
        return Err(Error::Dimension { expected: nv, got: ss.v_star.len() });
    }
    let h = length / n as f64;
    let jac = model.network.jacobian(&ss.v_star)?;

    // Field-major layout: block 0 is u, block 1+k is chemical k.
    let dim = (nv + 1) * n;
    let mut op = DMatrix::zeros(dim, dim);
    let lap = |i: usize, j: usize| -> f64 {
        let inv_h2 = 1.0 / (h * h);
        if i == j {
            if i == 0 || i == n - 1 {
                -inv_h2
            } else {
                -2.0 * inv_h2
            }
        } else if i.abs_diff(j) == 1 {
            inv_h2
        } else {
            0.0
        }
    };
    for i in 0..n {
        for j in 0..n {
            let l = lap(i, j);
            if l != 0.0 {
                op[(i, j)] += model.cell_diffusion * l;
                op[(i, (1 + model.chemoattractant) * n + j)] += -model.chi * ss.u_star * l;
                for k in 0..nv {
                    op[((1 + k) * n + i, (1 + k) * n + j)] += model.chem_diffusion[k] * l;
                }
            }
        }
        for k in 0..nv {
            op[((1 + k) * n + i, i)] += model.alpha[k];
            for l in 0..nv {
                op[((1 + k) * n + i, (1 + l) * n + i)] += jac[(k, l)];
            }
        }
    }
    let full_spectrum = eigen::eigenvalues(&op)?;

    let mut union = Vec::with_capacity(dim);
    for i in 0..n {
        let s = (i as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
        let mu = -4.0 / (h * h) * s * s;
        let mm = build_mode_matrix(model, ss, mu)?;
        union.extend(mode_spectrum(&mm)?);
    }

    Ok(CrossCheckReport {
        hausdorff_distance: eigen::hausdorff(&full_spectrum, &union),
        operator_dim: dim,
        modes: n,
    })
}

/// Trajectory CSV: `t,mass,mode_amplitude,max_deviation` then one mean
/// column per chemical.
pub fn trajectory_to_csv(traj: &Trajectory, model: &ModelSpec) -> String {
    let mut out = String::from("t,mass,mode_amplitude,max_deviation");
    for sp in &model.network.species {
        out.push_str(&format!(",mean_{}", sp.name));
    }
    out.push('\n');
    for (i, &t) in traj.times.iter().enumerate() {
        out.push_str(&format!(
            "{t},{},{},{}",
            traj.mass[i], traj.mode_amplitude[i], traj.max_deviation[i]
        ));
        for mean in &traj.species_means[i] {
            out.push_str(&format!(",{mean}"));
        }
        out.push('\n');
    }
    out
}

/// Flat binary snapshot layout: header of three little-endian u64 (`n`,
/// `N`, sample count), then per sample the `u` field and each chemical,
/// `n` little-endian doubles each.
pub fn snapshots_to_bytes(traj: &Trajectory, n_species: usize) -> Option<Vec<u8>> {
    let snaps = traj.snapshots.as_ref()?;
    let per_sample = (n_species + 1) * traj.n;
    let samples = snaps.len() / per_sample;
    let mut bytes = Vec::with_capacity(24 + snaps.len() * 8);
    bytes.extend((traj.n as u64).to_le_bytes());
    bytes.extend((n_species as u64).to_le_bytes());
    bytes.extend((samples as u64).to_le_bytes());
    for x in snaps {
        bytes.extend(x.to_le_bytes());
    }
    Some(bytes)
}
