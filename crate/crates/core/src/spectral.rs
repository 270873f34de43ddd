//! The spectral reduction: Neumann Laplacian eigenvalues, the mode matrix
//! `M(mu)`, per-mode spectra, the Metzler/path sufficient conditions for
//! destabilization, critical-sensitivity search, and the Routh-Hurwitz
//! cubic test.
//!
//! For each Laplacian eigenvalue `mu <= 0` the `(N+1) x (N+1)` matrix
//!
//! ```text
//! M(mu) = [ D mu    kappa^t     ]      kappa^t = (0, ..., -chi u* mu, ..., 0)
//!         [ alpha   J + mu D~   ]
//! ```
//!
//! (the `-chi u* mu` sits in the chemoattractant's column) carries the whole
//! linearized eigenproblem: a number is an eigenvalue of the linearization
//! at `(u*, v*)` exactly when it is an eigenvalue of some `M(mu_i)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::eigen;
use crate::error::{Error, Result};
use crate::matrix::{digraph, has_path, is_irreducible, is_metzler};
use crate::model::{DomainSpec, ModelSpec};
use crate::steady::SteadyState;

/// Real parts within this band of zero are reported as neutral (the mu = 0
/// mode always carries one exact zero from mass conservation).
pub const NEUTRAL_BAND: f64 = 1e-9;

/// Bracket for the critical-sensitivity search.
const CHI_BRACKET: (f64, f64) = (1e-8, 1e8);
const CHI_SCAN_POINTS: usize = 64;
const CHI_BISECT_ITER: usize = 60;
const CHI_REL_WIDTH: f64 = 1e-12;

/// Identifier of a Neumann Laplacian mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeId {
    Interval(usize),
    Rectangle(usize, usize),
}

impl std::fmt::Display for ModeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ModeId::Interval(i) => write!(f, "{i}"),
            ModeId::Rectangle(i, j) => write!(f, "{i}x{j}"),
        }
    }
}

impl Serialize for ModeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeumannMode {
    pub id: ModeId,
    pub mu: f64,
}

/// The `count` Neumann Laplacian eigenvalues closest to zero, nonincreasing,
/// starting with `mu_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSpectrum {
    pub domain: DomainSpec,
    pub modes: Vec<NeumannMode>,
}

/// Closed-form Neumann spectrum: `-(i pi / L)^2` on an interval and lattice
/// sums on a rectangle, merged in decreasing order.
pub fn neumann_eigenvalues(domain: &DomainSpec, count: usize) -> Result<NeumannSpectrum> {
    if count == 0 {
        return Err(Error::Precondition("mode count must be at least 1".into()));
    }
    domain.validate()?;
    let modes = match *domain {
        DomainSpec::Interval { length } => (0..count)
            .map(|i| NeumannMode {
                id: ModeId::Interval(i),
                mu: interval_mu(i, length),
            })
            .collect(),
        DomainSpec::Rectangle { lx, ly } => {
            let mut lattice: Vec<NeumannMode> = (0..count)
                .flat_map(|i| {
                    (0..count).map(move |j| NeumannMode {
                        id: ModeId::Rectangle(i, j),
                        mu: interval_mu(i, lx) + interval_mu(j, ly),
                    })
                })
                .collect();
            // Descending mu; ties resolved by the lattice indices so the
            // enumeration is deterministic.
            lattice.sort_by(|a, b| {
                let (ai, aj) = match a.id {
                    ModeId::Rectangle(i, j) => (i, j),
                    _ => unreachable!(),
                };
                let (bi, bj) = match b.id {
                    ModeId::Rectangle(i, j) => (i, j),
                    _ => unreachable!(),
                };
                (-a.mu, aj, ai)
                    .partial_cmp(&(-b.mu, bj, bi))
                    .expect("non-finite Laplacian eigenvalue")
            });
            lattice.truncate(count);
            lattice
        }
    };
    Ok(NeumannSpectrum {
        domain: *domain,
        modes,
    })
}

fn interval_mu(i: usize, length: f64) -> f64 {
    if i == 0 {
        0.0
    } else {
        let k = i as f64 * std::f64::consts::PI / length;
        -(k * k)
    }
}

/// The mode matrix `M(mu)` for one Laplacian eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    pub mu: f64,
    pub matrix: DMatrix<f64>,
    /// The chemotactic coupling `K = -mu chi u*` entering the first row.
    pub coupling: f64,
}

/// Assembles `M(mu)` at the steady state, with `J` evaluated exactly.
pub fn build_mode_matrix(model: &ModelSpec, ss: &SteadyState, mu: f64) -> Result<ModeMatrix> {
    mode_matrix_with_chi(model, ss, mu, model.chi)
}

fn mode_matrix_with_chi(
    model: &ModelSpec,
    ss: &SteadyState,
    mu: f64,
    chi: f64,
) -> Result<ModeMatrix> {
    if mu > 0.0 {
        return Err(Error::Precondition(format!(
            "Laplacian eigenvalues are nonpositive, got mu = {mu}"
        )));
    }
    let n = model.n_species();
    if ss.v_star.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: ss.v_star.len(),
        });
    }
    let jac = model.network.jacobian(&ss.v_star)?;
    let coupling = -mu * chi * ss.u_star;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = model.cell_diffusion * mu;
    m[(0, 1 + model.chemoattractant)] = coupling;
    for k in 0..n {
        m[(1 + k, 0)] = model.alpha[k];
        for l in 0..n {
            m[(1 + k, 1 + l)] = jac[(k, l)];
        }
        m[(1 + k, 1 + k)] += mu * model.chem_diffusion[k];
    }
    Ok(ModeMatrix {
        mu,
        matrix: m,
        coupling,
    })
}

/// All `N+1` eigenvalues of a mode matrix.
pub fn mode_spectrum(mm: &ModeMatrix) -> Result<Vec<Complex64>> {
    eigen::eigenvalues(&mm.matrix)
}

fn serialize_eigs<S: Serializer>(
    eigs: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct C {
        re: f64,
        im: f64,
    }
    s.collect_seq(eigs.iter().map(|e| C { re: e.re, im: e.im }))
}

/// Spectrum of one mode together with its dominant real part.
#[derive(Debug, Clone, Serialize)]
pub struct ModeAnalysis {
    pub id: ModeId,
    pub mu: f64,
    #[serde(serialize_with = "serialize_eigs")]
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    /// |Im| of the eigenvalue attaining `max_re`.
    pub im_at_max: f64,
}

/// Outcome of one sufficient-condition check. `applicable` is the
/// conjunction of all recorded sub-conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `u* > 0` and `v* > 0` strictly, as the theorems assume.
    pub positive_state: bool,
    /// Some production rate `alpha_i > 0` (for the path variant: one that
    /// also reaches the chemoattractant).
    pub alpha_positive: bool,
    pub metzler: bool,
    /// Irreducibility of `J` (set by the strong-form check only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irreducible: Option<bool>,
    /// A directed path in `G(J^t)` from the produced chemical to the
    /// chemoattractant (set by the path-form check only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_exists: Option<bool>,
    /// Smallest qualifying produced-species index.
    pub i_star: Option<usize>,
    pub applicable: bool,
}

/// Strong-form sufficient condition: some `alpha_i > 0`, `J` irreducible,
/// `J` Metzler. When it applies, large enough `chi u*` or `alpha_i` forces
/// instability.
pub fn check_suff1(model: &ModelSpec, ss: &SteadyState) -> Result<ConditionReport> {
    let jac = model.network.jacobian(&ss.v_star)?;
    let positive_state = ss.is_positive();
    let i_star = (0..model.n_species()).find(|&i| model.alpha[i] > 0.0);
    let alpha_positive = i_star.is_some();
    let irreducible = is_irreducible(&jac);
    let metzler = is_metzler(&jac);
    Ok(ConditionReport {
        positive_state,
        alpha_positive,
        metzler,
        irreducible: Some(irreducible),
        path_exists: None,
        i_star,
        applicable: positive_state && alpha_positive && irreducible && metzler,
    })
}

/// Path-form sufficient condition: some produced chemical reaches the
/// chemoattractant along a directed path of `G(J^t)`, and `J` is Metzler.
pub fn check_suff2(model: &ModelSpec, ss: &SteadyState) -> Result<ConditionReport> {
    let jac = model.network.jacobian(&ss.v_star)?;
    let positive_state = ss.is_positive();
    let alpha_positive = (0..model.n_species()).any(|i| model.alpha[i] > 0.0);
    let metzler = is_metzler(&jac);
    let gt = digraph(&jac.transpose());
    let mut i_star = None;
    for i in 0..model.n_species() {
        if model.alpha[i] > 0.0 && has_path(&gt, i, model.chemoattractant)? {
            i_star = Some(i);
            break;
        }
    }
    let path_exists = i_star.is_some();
    Ok(ConditionReport {
        positive_state,
        alpha_positive,
        metzler,
        irreducible: None,
        path_exists: Some(path_exists),
        i_star,
        applicable: positive_state && path_exists && metzler,
    })
}

/// Gershgorin tail bound. After scaling row/column 0 by `s = 2 chi u* / D`,
/// the first row's disc sits in `Re < 0` for every `mu < 0`, and row `k`'s
/// disc does once
/// `mu < -(J_kk + s alpha_k + sum_{l != k} |J_kl|) / D~_k`.
/// Modes beyond the computed range are certified stable when the last
/// computed `mu` lies strictly below that cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCertificate {
    pub cutoff_mu: f64,
    pub certified: bool,
}

fn tail_certificate(model: &ModelSpec, ss: &SteadyState, mu_last: f64) -> Result<TailCertificate> {
    let jac = model.network.jacobian(&ss.v_star)?;
    let n = model.n_species();
    let scale = 2.0 * model.chi * ss.u_star / model.cell_diffusion;
    let mut cutoff = f64::INFINITY;
    for k in 0..n {
        let off_row: f64 = (0..n).filter(|&l| l != k).map(|l| jac[(k, l)].abs()).sum();
        let bound = -(jac[(k, k)] + scale * model.alpha[k] + off_row) / model.chem_diffusion[k];
        cutoff = cutoff.min(bound);
    }
    Ok(TailCertificate {
        cutoff_mu: cutoff,
        certified: mu_last < cutoff,
    })
}

/// Full linear stability verdict over a truncated Neumann spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub per_mode: Vec<ModeAnalysis>,
    pub overall_max_re: f64,
    /// True when some mode's dominant real part exceeds the neutral band.
    pub unstable: bool,
    pub dominant_mode: ModeId,
    /// Modes whose dominant real part sits inside the neutral band
    /// (mass-conservation zeros, reported separately from instability).
    pub neutral_modes: Vec<ModeId>,
    pub suff1: ConditionReport,
    pub suff2: ConditionReport,
    pub tail: TailCertificate,
}

/// Computes per-mode spectra over the `mode_count` largest Laplacian
/// eigenvalues and aggregates the verdict, the sufficient-condition reports,
/// and the truncation certificate.
pub fn stability_verdict(
    model: &ModelSpec,
    ss: &SteadyState,
    mode_count: usize,
) -> Result<StabilityReport> {
    if mode_count < 2 {
        return Err(Error::Precondition(
            "mode count must include mu_0 = 0 and at least one negative mode".into(),
        ));
    }
    let spectrum = neumann_eigenvalues(&model.domain, mode_count)?;
    let mut per_mode = Vec::with_capacity(mode_count);
    for mode in &spectrum.modes {
        let mm = build_mode_matrix(model, ss, mode.mu)?;
        let eigenvalues = mode_spectrum(&mm)?;
        let dominant = eigen::dominant(&eigenvalues).ok_or(Error::EigenFailure)?;
        per_mode.push(ModeAnalysis {
            id: mode.id,
            mu: mode.mu,
            eigenvalues,
            max_re: dominant.re,
            im_at_max: dominant.im.abs(),
        });
    }

    let mut overall_max_re = f64::NEG_INFINITY;
    let mut dominant_mode = per_mode[0].id;
    for m in &per_mode {
        if m.max_re > overall_max_re {
            overall_max_re = m.max_re;
            dominant_mode = m.id;
        }
    }
    let neutral_modes = per_mode
        .iter()
        .filter(|m| m.max_re.abs() <= NEUTRAL_BAND)
        .map(|m| m.id)
        .collect();
    let mu_last = spectrum.modes.last().expect("mode_count >= 2").mu;

    Ok(StabilityReport {
        overall_max_re,
        unstable: overall_max_re > NEUTRAL_BAND,
        dominant_mode,
        neutral_modes,
        suff1: check_suff1(model, ss)?,
        suff2: check_suff2(model, ss)?,
        tail: tail_certificate(model, ss, mu_last)?,
        per_mode,
    })
}

/// Result of the critical-sensitivity search at a fixed `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "chi")]
pub enum ChiThreshold {
    /// The dominant real part crosses zero at this sensitivity.
    Crossing(f64),
    /// Already unstable at the bracket minimum `1e-8`.
    UnstableAtBracketMin,
    /// No sign change anywhere in `[1e-8, 1e8]`.
    NoCrossing,
}

/// Smallest `chi` in `[1e-8, 1e8]` where `max Re lambda(M(mu))` crosses
/// zero: a 64-point log grid brackets the first crossing from below, then
/// bisection shrinks it to relative width `1e-12`. Monotonicity is not
/// assumed.
pub fn critical_chi(model: &ModelSpec, ss: &SteadyState, mu: f64) -> Result<ChiThreshold> {
    if !(mu < 0.0) {
        return Err(Error::Precondition(format!(
            "critical_chi needs mu < 0, got {mu}"
        )));
    }
    let objective = |chi: f64| -> Result<f64> {
        let mm = mode_matrix_with_chi(model, ss, mu, chi)?;
        Ok(eigen::max_real_part(&mode_spectrum(&mm)?))
    };

    let (lo, hi) = CHI_BRACKET;
    let ratio = (hi / lo).powf(1.0 / (CHI_SCAN_POINTS as f64 - 1.0));
    let mut prev_chi = lo;
    let mut prev_f = objective(lo)?;
    if prev_f > 0.0 {
        return Ok(ChiThreshold::UnstableAtBracketMin);
    }
    let mut bracket = None;
    for k in 1..CHI_SCAN_POINTS {
        let chi = lo * ratio.powi(k as i32);
        let f = objective(chi)?;
        if prev_f < 0.0 && f >= 0.0 {
            bracket = Some((prev_chi, chi));
            break;
        }
        prev_chi = chi;
        prev_f = f;
    }
    let (mut a, mut b) = match bracket {
        Some(br) => br,
        None => return Ok(ChiThreshold::NoCrossing),
    };
    for _ in 0..CHI_BISECT_ITER {
        if (b - a) <= CHI_REL_WIDTH * b {
            break;
        }
        let mid = 0.5 * (a + b);
        if objective(mid)? >= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(ChiThreshold::Crossing(0.5 * (a + b)))
}

/// Routh-Hurwitz test for `lambda^3 + b2 lambda^2 + b1 lambda + b0`:
/// all roots lie in the open left half-plane iff `b2 > 0`, `b0 > 0` and
/// `b1 b2 - b0 > 0`.
pub fn routh_hurwitz_cubic(b2: f64, b1: f64, b0: f64) -> bool {
    b2 > 0.0 && b0 > 0.0 && b1 * b2 - b0 > 0.0
}

/// Coefficients `(b2, b1, b0)` of the characteristic polynomial
/// `lambda^3 + b2 lambda^2 + b1 lambda + b0` of a 3x3 matrix.
pub fn cubic_characteristic(m: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    if m.nrows() != 3 || m.ncols() != 3 {
        return Err(Error::Precondition("cubic characteristic needs 3x3".into()));
    }
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)];
    Ok((-tr, minors, -m.determinant()))
}

/// Shape data of the pair-binding network `p + q <-> r` with decay of `p`,
/// production on `p` only and chemoattractant `r`.
struct PairBinding {
    produced: usize,
    partner: usize,
    bind_rate: f64,
}

fn match_pair_binding(model: &ModelSpec) -> Option<PairBinding> {
    let net = &model.network;
    if net.n_species() != 3 || net.reactions.len() != 3 {
        return None;
    }
    let forward = net.reactions.iter().find(|r| {
        r.order() == 2 && r.reactants.len() == 2 && r.products.len() == 1
    })?;
    let mut reactant_pair = forward.reactants.keys().copied();
    let (a, b) = (reactant_pair.next()?, reactant_pair.next()?);
    let (&c, &cc) = forward.products.iter().next()?;
    if cc != 1 || c == a || c == b {
        return None;
    }
    net.reactions.iter().find(|r| {
        r.reactants.len() == 1
            && r.reactants.get(&c) == Some(&1)
            && r.products.get(&a) == Some(&1)
            && r.products.get(&b) == Some(&1)
            && r.products.len() == 2
    })?;
    let decay = net
        .reactions
        .iter()
        .find(|r| r.products.is_empty() && r.order() == 1)?;
    let (&produced, _) = decay.reactants.iter().next()?;
    if produced != a && produced != b {
        return None;
    }
    let partner = if produced == a { b } else { a };
    if !(model.alpha[produced] > 0.0)
        || model.alpha[partner] != 0.0
        || model.alpha[c] != 0.0
        || model.chemoattractant != c
    {
        return None;
    }
    Some(PairBinding {
        produced,
        partner,
        bind_rate: forward.rate,
    })
}

/// Determinant of the pair-binding mode matrix with the chemotactic
/// coupling overridden to `coupling`, verified against its closed affine
/// form `C + coupling * alpha_p k1 v*_q mu D~_q` (`C` = determinant at zero
/// coupling).
pub fn example3_determinant(
    model: &ModelSpec,
    ss: &SteadyState,
    mu: f64,
    coupling: f64,
) -> Result<f64> {
    if !(mu < 0.0) {
        return Err(Error::Precondition(format!(
            "determinant check needs mu < 0, got {mu}"
        )));
    }
    if coupling < 0.0 {
        return Err(Error::Precondition("coupling must be nonnegative".into()));
    }
    let shape = match_pair_binding(model).ok_or_else(|| {
        Error::Precondition(
            "model is not the pair-binding network p + q <-> r with decay of p".into(),
        )
    })?;
    let mut mm = build_mode_matrix(model, ss, mu)?;
    let col = 1 + model.chemoattractant;
    mm.matrix[(0, col)] = coupling;
    let det = mm.matrix.determinant();

    let mut at_zero = mm.matrix.clone();
    at_zero[(0, col)] = 0.0;
    let c0 = at_zero.determinant();
    let slope = model.alpha[shape.produced]
        * shape.bind_rate
        * ss.v_star[shape.partner]
        * mu
        * model.chem_diffusion[shape.partner];
    let predicted = c0 + coupling * slope;
    let tol = 1e-9 * det.abs().max(c0.abs()).max(1.0);
    if (det - predicted).abs() > tol {
        return Err(Error::Validation(format!(
            "mode-matrix determinant {det} deviates from affine form {predicted}"
        )));
    }
    Ok(det)
}

/// CSV rendering of a stability report: one row per mode.
pub fn report_to_csv(report: &StabilityReport) -> String {
    let mut out = String::from("mode_id,mu,max_re_lambda,abs_im_at_max\n");
    for m in &report.per_mode {
        out.push_str(&format!("{},{},{},{}\n", m.id, m.mu, m.max_re, m.im_at_max));
    }
    out
}

/// JSON rendering of a stability report.
pub fn report_to_json(report: &StabilityReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

impl Serialize for NeumannSpectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("NeumannSpectrum", 1)?;
        st.serialize_field("modes", &self.modes)?;
        st.end()
    }
}
