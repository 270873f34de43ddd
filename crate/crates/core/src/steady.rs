//! Homogeneous steady states `(u*, v*)` solving `alpha u* + g(v*) = 0`:
//! closed form for purely unimolecular (linear) networks, damped Newton
//! otherwise. Degenerate steady-state families are selected by pinning
//! chosen components.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::m_matrix_check;
use crate::model::{ModelSpec, ReactionNetwork};

/// Residual threshold relative to `max(1, |v|_inf)`.
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 200;
const BACKTRACK_STEPS: u32 = 20;
/// Slack below zero tolerated by the nonnegativity flag (roundoff in exact
/// zeros of the solve).
const NONNEG_SLACK: f64 = 1e-12;

/// A homogeneous steady state together with its solve quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub u_star: f64,
    pub v_star: DVector<f64>,
    /// Max-norm of `alpha u* + g(v*)`.
    pub residual_norm: f64,
    /// All `v*` entries nonnegative (up to roundoff slack).
    pub nonnegative: bool,
}

impl SteadyState {
    fn from_solution(model_alpha_g: (&DVector<f64>, &ReactionNetwork), u_star: f64, v_star: DVector<f64>) -> Result<Self> {
        let (alpha, net) = model_alpha_g;
        let residual = (alpha * u_star + net.kinetics(&v_star)?).amax();
        let floor = -NONNEG_SLACK * v_star.amax().max(1.0);
        let nonnegative = v_star.iter().all(|&x| x >= floor);
        Ok(SteadyState {
            u_star,
            v_star,
            residual_norm: residual,
            nonnegative,
        })
    }

    /// Strict positivity of the whole state, as the destabilization theorems
    /// require.
    pub fn is_positive(&self) -> bool {
        self.u_star > 0.0 && self.v_star.iter().all(|&x| x > 0.0)
    }
}

/// The matrix of a purely unimolecular network, `g(v) = -A v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart {
    pub a: DMatrix<f64>,
}

/// Returns `A` with `g(v) = -A v` when every reaction is a unimolecular
/// conversion or decay (single reactant, product coefficients at most one);
/// `None` otherwise. Constant sources (`0 -> v`) make `g` affine rather than
/// linear, so they disqualify.
pub fn extract_linear(net: &ReactionNetwork) -> Option<LinearPart> {
    for r in &net.reactions {
        if r.order() != 1 || r.products.values().any(|&c| c > 1) {
            return None;
        }
    }
    let n = net.n_species();
    let mut a = DMatrix::zeros(n, n);
    for r in &net.reactions {
        let (&i, _) = r.reactants.iter().next().expect("order-1 reaction");
        a[(i, i)] += r.rate;
        for &k in r.products.keys() {
            a[(k, i)] -= r.rate;
        }
    }
    Some(LinearPart { a })
}

/// Closed-form steady state `v* = u* A^-1 alpha` of a linear network.
/// Fails with the specific sub-check when `A` is not a nonsingular M-matrix
/// (sign pattern, singularity, or a negative inverse entry).
pub fn linear_steady_state(
    a: &DMatrix<f64>,
    alpha: &DVector<f64>,
    u_star: f64,
) -> Result<SteadyState> {
    if !(u_star > 0.0) {
        return Err(Error::Precondition("u* must be positive".into()));
    }
    if alpha.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: alpha.len(),
        });
    }
    let inv = m_matrix_check(a).map_err(Error::NotMMatrix)?;
    let v_star = inv * alpha * u_star;
    let residual = (a * &v_star - alpha * u_star).amax();
    let floor = -NONNEG_SLACK * v_star.amax().max(1.0);
    let nonnegative = v_star.iter().all(|&x| x >= floor);
    Ok(SteadyState {
        u_star,
        v_star,
        residual_norm: residual,
        nonnegative,
    })
}

/// Extra equation `v[species] = value` appended to the steady-state system,
/// selecting one member of a degenerate steady-state family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub species: usize,
    pub value: f64,
}

/// Damped Newton for `alpha u* + g(v) = 0` (plus any pin equations).
///
/// Steps solve `J delta = -F` (least squares through the pinned rows), with
/// backtracking halvings until the residual decreases. Converged when the
/// residual max-norm drops below `1e-12 * max(1, |v|_inf)`. The default
/// initial guess is the steady state of the linearization at zero when that
/// is a nonsingular M-matrix, the all-ones vector otherwise.
pub fn newton_steady_state(
    model: &ModelSpec,
    u_star: f64,
    v0: Option<&DVector<f64>>,
    pins: &[Pin],
) -> Result<SteadyState> {
    if !(u_star > 0.0) {
        return Err(Error::Precondition("u* must be positive".into()));
    }
    let net = &model.network;
    let n = net.n_species();
    for pin in pins {
        if pin.species >= n {
            return Err(Error::Precondition(format!(
                "pin references species {} of {}",
                pin.species, n
            )));
        }
    }
    let mut v = match v0 {
        Some(v) => {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Precondition("initial guess must be finite".into()));
            }
            v.clone()
        }
        None => default_guess(model, u_star)?,
    };

    let rows = n + pins.len();
    let residual = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let g = net.kinetics(v)?;
        let mut f = DVector::zeros(rows);
        for k in 0..n {
            f[k] = model.alpha[k] * u_star + g[k];
        }
        for (r, pin) in pins.iter().enumerate() {
            f[n + r] = v[pin.species] - pin.value;
        }
        Ok(f)
    };

    let mut best = f64::INFINITY;
    for _iter in 0..NEWTON_MAX_ITER {
        let f = residual(&v)?;
        let res = f.amax();
        best = best.min(res);
        if res <= NEWTON_TOL * v.amax().max(1.0) {
            return SteadyState::from_solution((&model.alpha, net), u_star, v);
        }

        let jac = net.jacobian(&v)?;
        let delta = newton_step(&jac, pins, &f, &v)?;

        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..=BACKTRACK_STEPS {
            let trial = &v + &delta * step;
            let trial_res = residual(&trial)?.amax();
            if trial_res < res {
                v = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: _iter + 1,
                best_residual: best,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        best_residual: best,
    })
}

fn newton_step(
    jac: &DMatrix<f64>,
    pins: &[Pin],
    f: &DVector<f64>,
    iterate: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = jac.nrows();
    let singular = || Error::SingularJacobian {
        iterate: iterate.iter().copied().collect(),
    };
    if pins.is_empty() {
        let lu = jac.clone().full_piv_lu();
        let u = lu.u();
        let tol = (n as f64) * f64::EPSILON * jac.amax().max(f64::MIN_POSITIVE);
        if (0..n).any(|i| u[(i, i)].abs() <= tol) {
            return Err(singular());
        }
        lu.solve(&(-f)).ok_or_else(singular)
    } else {
        let mut aug = DMatrix::zeros(n + pins.len(), n);
        aug.view_mut((0, 0), (n, n)).copy_from(jac);
        for (r, pin) in pins.iter().enumerate() {
            aug[(n + r, pin.species)] = 1.0;
        }
        let svd = aug.svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > smax * 1e-12)
            .count();
        if rank < n {
            return Err(singular());
        }
        svd.solve(&(-f), smax * 1e-13).map_err(|_| singular())
    }
}

fn default_guess(model: &ModelSpec, u_star: f64) -> Result<DVector<f64>> {
    let n = model.n_species();
    let j0 = model.network.jacobian(&DVector::zeros(n))?;
    if let Ok(inv) = m_matrix_check(&(-j0)) {
        Ok(inv * &model.alpha * u_star)
    } else {
        Ok(DVector::from_element(n, 1.0))
    }
}

/// Steady state through the appropriate route: closed form for linear
/// networks without pins, damped Newton otherwise.
pub fn solve_steady_state(model: &ModelSpec, u_star: f64, pins: &[Pin]) -> Result<SteadyState> {
    if pins.is_empty() {
        if let Some(lin) = extract_linear(&model.network) {
            return linear_steady_state(&lin.a, &model.alpha, u_star);
        }
    }
    newton_steady_state(model, u_star, None, pins)
}
