//! Leading-order tail asymptotics of `P(X > t_n)`.
//!
//! For thresholds `t_n` close to `u_n·b*` the probability behaves like
//! `constant · λ_n^exponent · F̄(ũ_n)` with `ũ_n = u_n‖b_I‖`,
//! `λ_n = ũ_n·w(ũ_n)`. The constant depends on the QP solution, on the
//! index sets `L = {i : α_i ≠ 1/2, (Cb*)_i = 0}` and `M = L^c`, and on an
//! orthant integral that is evaluated numerically.

pub mod integrals;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{positions, submatrix, SpdFactor};
use crate::model::ModelSpec;
use crate::qp::{solve, QpProblem, QpSolution};
use crate::radial::RadialLaw;
use crate::special::gamma_q;
use statrs::function::gamma::ln_gamma;

use integrals::{
    kotz_orthant_probability_mc, ExponentialOrthantIntegral, GaussianOrthantIntegral, IntegralEstimate,
    IntegralMethod, LinearForm, MAX_QUADRATURE_DIM,
};

/// `|(Cb*)_i| ≤ ZERO_TOL·‖Cb*‖∞` counts as zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Values between [`ZERO_TOL`] and this bound are reported as ambiguous.
pub const GRAY_TOL: f64 = 1e-8;
/// Relative tolerance of the quadrature backend.
pub const QUAD_REL_TOL: f64 = 1e-9;
/// Largest relative disagreement accepted by [`IntegrationBackend::CrossCheck`].
pub const CROSS_CHECK_TOL: f64 = 0.01;
/// Monte Carlo sample size for the constants `τ` in automatic mode.
pub const TAU_MC_SAMPLES: u64 = 10_000_000;
/// Monte Carlo sample size for orthant probabilities in automatic mode.
pub const ORTHANT_MC_SAMPLES: u64 = 1_000_000;

const HALF_TOL: f64 = 1e-12;

/// The index sets of the asymptotic expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSplit {
    #[serde(rename = "I")]
    pub index_i: Vec<usize>,
    #[serde(rename = "J")]
    pub index_j: Vec<usize>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    /// `α̃`: `1/2` on `M`, `α` on `L`.
    pub alpha_tilde: Vec<f64>,
    /// `C b*`.
    pub cb_star: Vec<f64>,
}

impl IndexSplit {
    pub fn l_subset_of_j(&self) -> bool {
        self.l.iter().all(|i| self.index_j.contains(i))
    }
}

/// Compute `L`, `M` and `α̃` for a solved QP.
pub fn index_split(spec: &ModelSpec, sol: &QpSolution) -> Result<IndexSplit> {
    let k = spec.dim();
    if sol.b_star.len() != k {
        return Err(Error::arg("QP solution and model disagree in dimension"));
    }
    let cb = spec.mixing.c() * DVector::from_column_slice(&sol.b_star);
    let scale = cb.amax();
    let mut l = Vec::new();
    let mut m = Vec::new();
    for i in 0..k {
        let a = spec.alpha.get(i);
        let rel = cb[i].abs() / scale;
        let not_half = (a - 0.5).abs() > HALF_TOL;
        if not_half && rel > ZERO_TOL && rel <= GRAY_TOL {
            return Err(Error::Ambiguous(format!(
                "|(Cb*)_{i}| = {:e} is within the gray zone ({ZERO_TOL:e}, {GRAY_TOL:e}] relative to ‖Cb*‖∞",
                cb[i].abs()
            )));
        }
        if not_half && rel <= ZERO_TOL {
            l.push(i);
        } else {
            m.push(i);
        }
    }
    let alpha_tilde = (0..k)
        .map(|i| if l.contains(&i) { spec.alpha.get(i) } else { 0.5 })
        .collect();
    Ok(IndexSplit {
        index_i: sol.index_i.clone(),
        index_j: sol.index_j.clone(),
        l,
        m,
        alpha_tilde,
        cb_star: cb.iter().copied().collect(),
    })
}

/// How the limits `q_I`, `q_J` of the normalised thresholds are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `t_n = u_n·b`.
    PlainRay,
    /// User supplied limits; `q_J` entries may be `-∞` (`null` in JSON).
    Custom {
        q_i: Vec<f64>,
        #[serde(with = "neg_inf_vec")]
        q_j: Vec<f64>,
    },
}

/// Normalised threshold limits together with the QP data needed to map them
/// back to threshold vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub b: Vec<f64>,
    /// `u = b/‖b_I‖`.
    pub u_dir: Vec<f64>,
    pub b_star: Vec<f64>,
    #[serde(rename = "I")]
    pub index_i: Vec<usize>,
    #[serde(rename = "J")]
    pub index_j: Vec<usize>,
    #[serde(rename = "norm_bI")]
    pub norm_bi: f64,
    pub q_i: Vec<f64>,
    #[serde(with = "neg_inf_vec")]
    pub q_j: Vec<f64>,
}

impl ThresholdSpec {
    /// The threshold vector at level `u`:
    /// `t_I = u b*_I + q_I/w̃`, `t_J = u b*_J + q_J √(ũ/w̃)`, with `ũ = u‖b_I‖`
    /// and `w̃ = w(ũ)`. Where `q_j = -∞` the plain threshold `u b_j` is used.
    pub fn threshold_at(&self, u: f64, law: &RadialLaw) -> Vec<f64> {
        let ut = u * self.norm_bi;
        let w = law.hazard(ut);
        let mut t: Vec<f64> = self.b_star.iter().map(|v| u * v).collect();
        for (pos, &i) in self.index_i.iter().enumerate() {
            t[i] += self.q_i[pos] / w;
        }
        for (pos, &j) in self.index_j.iter().enumerate() {
            let q = self.q_j[pos];
            t[j] = if q == f64::NEG_INFINITY {
                u * self.b[j]
            } else {
                t[j] + q * (ut / w).sqrt()
            };
        }
        t
    }
}

/// Limits of the normalised thresholds.
pub fn threshold_normalize(sol: &QpSolution, b: &[f64], mode: &ThresholdMode) -> Result<ThresholdSpec> {
    if b.len() != sol.b_star.len() {
        return Err(Error::arg("b and QP solution disagree in dimension"));
    }
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (q_i, q_j) = match mode {
        ThresholdMode::PlainRay => {
            let q_j = sol
                .index_j
                .iter()
                .map(|&j| {
                    if sol.b_star[j] - b[j] > 1e-10 * scale {
                        f64::NEG_INFINITY
                    } else {
                        0.0
                    }
                })
                .collect();
            (vec![0.0; sol.index_i.len()], q_j)
        }
        ThresholdMode::Custom { q_i, q_j } => {
            if q_i.len() != sol.index_i.len() || q_j.len() != sol.index_j.len() {
                return Err(Error::arg(format!(
                    "custom limits need |q_I| = {} and |q_J| = {}",
                    sol.index_i.len(),
                    sol.index_j.len()
                )));
            }
            if q_i.iter().any(|q| !q.is_finite()) {
                return Err(Error::arg("q_I entries must be finite"));
            }
            if q_j.iter().any(|q| q.is_nan() || *q == f64::INFINITY) {
                return Err(Error::arg("q_J entries must lie in [-∞, ∞)"));
            }
            (q_i.clone(), q_j.clone())
        }
    };
    Ok(ThresholdSpec {
        b: b.to_vec(),
        u_dir: b.iter().map(|v| v / sol.norm_bi).collect(),
        b_star: sol.b_star.clone(),
        index_i: sol.index_i.clone(),
        index_j: sol.index_j.clone(),
        norm_bi: sol.norm_bi,
        q_i,
        q_j,
    })
}

/// Backend for the orthant integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrationBackend {
    /// Quadrature up to three dimensions, Monte Carlo above.
    #[default]
    Auto,
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
    /// Both; fails with an accuracy error on more than 1% disagreement and
    /// returns the quadrature value otherwise.
    CrossCheck { samples: u64, seed: u64 },
}

fn run_backend(
    backend: IntegrationBackend,
    dim: usize,
    default_samples: u64,
    quad: impl FnOnce() -> Result<IntegralEstimate>,
    mc: impl FnOnce(u64, u64) -> Result<IntegralEstimate>,
) -> Result<IntegralEstimate> {
    match backend {
        IntegrationBackend::Auto if dim <= MAX_QUADRATURE_DIM => quad(),
        IntegrationBackend::Auto => mc(default_samples, 0),
        IntegrationBackend::Quadrature => quad(),
        IntegrationBackend::MonteCarlo { samples, seed } => mc(samples, seed),
        IntegrationBackend::CrossCheck { samples, seed } => {
            let q = quad()?;
            let m = mc(samples, seed)?;
            let rel = (q.value - m.value).abs() / q.value.abs();
            if !(rel <= CROSS_CHECK_TOL) {
                return Err(Error::Accuracy(format!(
                    "quadrature {} and Monte Carlo {} ± {} disagree by {:.3}%",
                    q.value,
                    m.value,
                    m.error,
                    100.0 * rel
                )));
            }
            Ok(q)
        }
    }
}

fn require_positive(name: &str, e: IntegralEstimate) -> Result<IntegralEstimate> {
    if e.value > 0.0 && e.value.is_finite() {
        Ok(e)
    } else {
        Err(Error::Accuracy(format!("{name} evaluated to {} ({:?})", e.value, e.method)))
    }
}

/// `τ_{J,L} = ∫_{y_J > q_J} ∏_{i∈L} |(C_JJ y_J)_i|^{2α_i-1} exp(-y_Jᵀ(Σ⁻¹)_JJ y_J/2) dy_J`.
pub fn tau_jl(spec: &ModelSpec, split: &IndexSplit, q_j: &[f64], backend: IntegrationBackend) -> Result<IntegralEstimate> {
    let j = &split.index_j;
    if j.is_empty() {
        return Err(Error::arg("τ_{J,L} needs a non-empty J"));
    }
    if !split.l_subset_of_j() {
        return Err(Error::Unsupported(format!("L = {:?} is not contained in J = {j:?}", split.l)));
    }
    if q_j.len() != j.len() {
        return Err(Error::arg("q_J has the wrong length"));
    }
    let precision = submatrix(spec.mixing.sigma_inv(), j, j);
    let c_jj = submatrix(spec.mixing.c(), j, j);
    let forms = positions(&split.l, j)
        .into_iter()
        .zip(&split.l)
        .map(|(pos, &i)| LinearForm {
            coefficients: c_jj.row(pos).iter().copied().collect(),
            exponent: 2.0 * spec.alpha.get(i) - 1.0,
        })
        .collect();
    let g = GaussianOrthantIntegral::new(precision, q_j.to_vec(), forms)?;
    let e = run_backend(
        backend,
        j.len(),
        TAU_MC_SAMPLES,
        || g.quadrature(QUAD_REL_TOL),
        |n, seed| g.monte_carlo(n, seed),
    )?;
    require_positive("τ_{J,L}", e)
}

/// `ln τ*_M = Σ_{i∈M} ((1-2α_i) ln‖b_I‖ + (2α_i-1) ln|(Cb*)_i|)`.
pub fn ln_tau_star_m(spec: &ModelSpec, split: &IndexSplit, norm_bi: f64) -> f64 {
    split
        .m
        .iter()
        .map(|&i| {
            let e = 2.0 * spec.alpha.get(i) - 1.0;
            if e == 0.0 {
                0.0
            } else {
                e * (split.cb_star[i].abs().ln() - norm_bi.ln())
            }
        })
        .sum()
}

pub fn tau_star_m(spec: &ModelSpec, split: &IndexSplit, norm_bi: f64) -> f64 {
    ln_tau_star_m(spec, split, norm_bi).exp()
}

/// `τ_L = ∫_{y > q} ∏_{i∈L} |(Cy)_i|^{2α_i-1} exp(-uᵀΣ⁻¹y) dy` for `J = ∅`.
pub fn tau_l_full(
    spec: &ModelSpec,
    split: &IndexSplit,
    u_dir: &[f64],
    q: &[f64],
    backend: IntegrationBackend,
) -> Result<IntegralEstimate> {
    if !split.index_j.is_empty() {
        return Err(Error::arg("τ_L is only defined for empty J"));
    }
    let k = spec.dim();
    if u_dir.len() != k || q.len() != k {
        return Err(Error::arg("u and q must have k entries"));
    }
    let rate = spec.mixing.sigma_inv() * DVector::from_column_slice(u_dir);
    let c = spec.mixing.c();
    let forms = split
        .l
        .iter()
        .map(|&i| LinearForm {
            coefficients: c.row(i).iter().copied().collect(),
            exponent: 2.0 * spec.alpha.get(i) - 1.0,
        })
        .collect();
    let e = ExponentialOrthantIntegral::new(rate, q.to_vec(), forms)?;
    let est = run_backend(
        backend,
        e.quadrature_dim(),
        TAU_MC_SAMPLES,
        || e.quadrature(QUAD_REL_TOL),
        |n, seed| e.monte_carlo(n, seed),
    )?;
    require_positive("τ_L", est)
}

/// Which result produced a [`TailAsymptotics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `J` non-empty, `L ⊂ J`.
    #[serde(rename = "thm-a")]
    TheoremA,
    /// `J` empty.
    #[serde(rename = "thm-b")]
    TheoremB,
    #[serde(rename = "cor-2")]
    Corollary2,
}

/// Everything needed to evaluate the asymptotics for one model and direction.
#[derive(Debug, Clone)]
pub struct TailProblem {
    pub spec: ModelSpec,
    pub solution: QpSolution,
    pub split: IndexSplit,
    pub thresholds: ThresholdSpec,
    pub backend: IntegrationBackend,
}

impl TailProblem {
    pub fn new(spec: ModelSpec, b: &[f64], mode: &ThresholdMode) -> Result<Self> {
        if b.len() != spec.dim() {
            return Err(Error::arg(format!("b has {} entries, model has k = {}", b.len(), spec.dim())));
        }
        let qp = QpProblem::from_slices(spec.mixing.sigma(), b)?;
        let solution = solve(&qp)?;
        let split = index_split(&spec, &solution)?;
        let thresholds = threshold_normalize(&solution, b, mode)?;
        Ok(Self {
            spec,
            solution,
            split,
            thresholds,
            backend: IntegrationBackend::Auto,
        })
    }

    pub fn with_backend(mut self, backend: IntegrationBackend) -> Self {
        self.backend = backend;
        self
    }

    /// `a = Σ_II⁻¹ u_I`.
    pub fn a_i(&self) -> Result<Vec<f64>> {
        let a: Vec<f64> = self.solution.dual_i.iter().map(|d| d / self.solution.norm_bi).collect();
        if a.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Invariant {
                name: "qp.positivity",
                detail: format!("Σ_II⁻¹u_I = {a:?} is not positive"),
            });
        }
        Ok(a)
    }

    /// Threshold vector at level `u`.
    pub fn threshold_at(&self, u: f64) -> Vec<f64> {
        self.thresholds.threshold_at(u, &self.spec.radial)
    }
}

/// Intermediate quantities of a constant, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// `τ_{J,L}` or `τ_L`.
    pub tau: Option<IntegralEstimate>,
    pub tau_star_m: f64,
    /// `P(Y_J > q_J)` for the corollary form.
    pub orthant_probability: Option<IntegralEstimate>,
    /// `Σ_II⁻¹ u_I`.
    pub a_i: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAsymptotics {
    pub branch: Branch,
    pub constant: f64,
    pub ln_constant: f64,
    /// Power of `λ_n`.
    pub lambda_exponent: f64,
    /// `‖b_I‖`, so that `ũ = u·radius_scale`.
    pub radius_scale: f64,
    pub law: RadialLaw,
    pub split: IndexSplit,
    pub components: Components,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub u: f64,
    pub value: f64,
    pub log_value: f64,
    pub lambda: f64,
    /// `ũ` lies at or beyond the law's calibration point.
    pub in_tail_region: bool,
}

impl TailAsymptotics {
    /// `constant · λ(ũ)^exponent · F̄(ũ)` with `ũ = u·radius_scale`.
    pub fn evaluate(&self, u: f64) -> Result<Evaluation> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::arg(format!("u must be positive, got {u}")));
        }
        let ut = u * self.radius_scale;
        let lambda = ut * self.law.hazard(ut);
        let log_value = self.ln_constant + self.lambda_exponent * lambda.ln() + self.law.ln_survival(ut)?;
        Ok(Evaluation {
            u,
            value: log_value.exp(),
            log_value,
            lambda,
            in_tail_region: ut >= self.law.calibration_min(),
        })
    }
}

fn ln_common(spec: &ModelSpec) -> f64 {
    ln_gamma(spec.alpha.alpha_bar())
        - spec.alpha.values().iter().map(|&a| ln_gamma(a)).sum::<f64>()
        - std::f64::consts::LN_2
        - 0.5 * spec.mixing.ln_det_sigma()
}

/// Main result: part (a) for non-empty `J`, part (b) for empty `J`.
pub fn theorem31(p: &TailProblem) -> Result<TailAsymptotics> {
    let spec = &p.spec;
    let split = &p.split;
    let k = spec.dim();
    let a = p.a_i()?;
    let norm = p.solution.norm_bi;
    let ln_star = ln_tau_star_m(spec, split, norm);
    let l_sum = spec.alpha.sum_over(&split.l);
    let nl = split.l.len() as f64;
    let (branch, tau, ln_constant, exponent) = if split.index_j.is_empty() {
        let mut q = vec![0.0; k];
        for (pos, &i) in split.index_i.iter().enumerate() {
            q[i] = p.thresholds.q_i[pos];
        }
        let tau = tau_l_full(spec, split, &p.thresholds.u_dir, &q, p.backend)?;
        let ln_c = ln_common(spec) + ln_star + tau.value.ln();
        (Branch::TheoremB, tau, ln_c, 1.0 - k as f64 + nl - 2.0 * l_sum)
    } else {
        if !split.l_subset_of_j() {
            return Err(Error::Unsupported(format!(
                "L = {:?} is not contained in J = {:?}",
                split.l, split.index_j
            )));
        }
        let tau = tau_jl(spec, split, &p.thresholds.q_j, p.backend)?;
        let qa: f64 = p.thresholds.q_i.iter().zip(&a).map(|(q, a)| q * a).sum();
        let ln_a: f64 = a.iter().map(|v| v.ln()).sum();
        let ln_c = ln_common(spec) + ln_star + tau.value.ln() - qa - ln_a;
        let ni = split.index_i.len() as f64;
        let nj = split.index_j.len() as f64;
        (Branch::TheoremA, tau, ln_c, 1.0 - ni - nj / 2.0 + nl / 2.0 - l_sum)
    };
    Ok(TailAsymptotics {
        branch,
        constant: ln_constant.exp(),
        ln_constant,
        lambda_exponent: exponent,
        radius_scale: norm,
        law: spec.radial,
        split: split.clone(),
        components: Components {
            tau: Some(tau),
            tau_star_m: ln_star.exp(),
            orthant_probability: None,
            a_i: a,
        },
    })
}

/// Largest deviation in `C_JJᵀC_JJ = (Σ⁻¹)_JJ`, relative to `max|(Σ⁻¹)_JJ|`.
///
/// This is the identity under which `C_JJ⁻¹ Y*` with `Y*` standard Kotz has
/// the density proportional to the integrand of `τ_{J,L}`. It holds exactly
/// when `C_IJ = 0`.
pub fn cjj_condition_residual(spec: &ModelSpec, index_j: &[usize]) -> f64 {
    let c_jj = submatrix(spec.mixing.c(), index_j, index_j);
    let p = submatrix(spec.mixing.sigma_inv(), index_j, index_j);
    (c_jj.transpose() * &c_jj - &p).amax() / p.amax()
}

/// Tolerance for [`cjj_condition_residual`].
pub const CJJ_TOL: f64 = 1e-10;

/// `P(Y_J > q_J)` where `Y_J = D·Y*`, `Y*` standard Kotz with parameter `α̃_J`
/// and `D D ᵀ`-structure fixed by `C_JJ` (or the Gaussian factor when `L = ∅`).
pub fn orthant_probability(
    spec: &ModelSpec,
    split: &IndexSplit,
    q_j: &[f64],
    backend: IntegrationBackend,
) -> Result<IntegralEstimate> {
    let j = &split.index_j;
    if j.is_empty() {
        return Ok(IntegralEstimate {
            value: 1.0,
            error: 0.0,
            method: IntegralMethod::ClosedForm,
        });
    }
    if q_j.len() != j.len() {
        return Err(Error::arg("q_J has the wrong length"));
    }
    let alpha_t: Vec<f64> = j.iter().map(|&i| split.alpha_tilde[i]).collect();
    let precision = submatrix(spec.mixing.sigma_inv(), j, j);
    if q_j.iter().all(|&q| q == f64::NEG_INFINITY) {
        return Ok(IntegralEstimate {
            value: 1.0,
            error: 0.0,
            method: IntegralMethod::ClosedForm,
        });
    }
    if j.len() == 1 {
        // Y = Y*/√P with Y*² ~ Gamma(α̃, 1/2), symmetric.
        let t = q_j[0] * precision[(0, 0)].sqrt();
        let half = 0.5 * gamma_q(alpha_t[0], t * t / 2.0);
        let value = if t >= 0.0 { half } else { 1.0 - half };
        return Ok(IntegralEstimate {
            value,
            error: 0.0,
            method: IntegralMethod::ClosedForm,
        });
    }
    let c_jj = submatrix(spec.mixing.c(), j, j);
    let d: DMatrix<f64> = if split.l.is_empty() {
        SpdFactor::new(&precision)?.inverse().cholesky().map(|c| c.l()).ok_or_else(|| {
            Error::Matrix("covariance of Y_J is not positive definite".into())
        })?
    } else {
        c_jj.clone()
            .try_inverse()
            .ok_or_else(|| Error::Matrix("C_JJ is singular".into()))?
    };
    let pos_l = positions(&split.l, j);
    let forms: Vec<LinearForm> = pos_l
        .iter()
        .map(|&pos| LinearForm {
            coefficients: c_jj.row(pos).iter().copied().collect(),
            exponent: 2.0 * alpha_t[pos] - 1.0,
        })
        .collect();
    let ln_det_p = SpdFactor::new(&precision)?.ln_determinant();
    let alpha_sum: f64 = alpha_t.iter().sum();
    let ln_norm = 0.5 * ln_det_p - alpha_sum * std::f64::consts::LN_2 - alpha_t.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    let g = GaussianOrthantIntegral::new(precision, q_j.to_vec(), forms)?;
    let e = run_backend(
        backend,
        j.len(),
        ORTHANT_MC_SAMPLES,
        || {
            g.quadrature(QUAD_REL_TOL).map(|e| IntegralEstimate {
                value: e.value * ln_norm.exp(),
                error: e.error * ln_norm.exp(),
                method: e.method,
            })
        },
        |n, seed| Ok(kotz_orthant_probability_mc(&d, &alpha_t, q_j, n, seed)),
    )?;
    require_positive("P(Y_J > q_J)", e)
}

/// Corollary form of part (a), with `P(Y_J > q_J)` in place of `τ_{J,L}`.
///
/// Needs `L = ∅` or `C_JJᵀC_JJ = (Σ⁻¹)_JJ`. With `J = ∅` (and then `L = ∅`)
/// it reduces to part (b).
pub fn corollary2(p: &TailProblem) -> Result<TailAsymptotics> {
    let spec = &p.spec;
    let split = &p.split;
    let j = &split.index_j;
    let i_set = &split.index_i;
    if !split.l_subset_of_j() {
        return Err(Error::Unsupported(format!(
            "L = {:?} is not contained in J = {j:?}",
            split.l
        )));
    }
    if !split.l.is_empty() {
        let r = cjj_condition_residual(spec, j);
        if !(r <= CJJ_TOL) {
            return Err(Error::Contract(format!(
                "L is non-empty and C_JJᵀC_JJ differs from (Σ⁻¹)_JJ by {r:e}"
            )));
        }
    }
    let a = p.a_i()?;
    let norm = p.solution.norm_bi;
    let ln_star = ln_tau_star_m(spec, split, norm);
    let prob = orthant_probability(spec, split, &p.thresholds.q_j, p.backend)?;
    let alpha_t_j: f64 = j.iter().map(|&i| split.alpha_tilde[i]).sum();
    let s_ii = submatrix(spec.mixing.sigma(), i_set, i_set);
    let ln_det_sii = SpdFactor::new(&s_ii)?.ln_determinant();
    let qa: f64 = p.thresholds.q_i.iter().zip(&a).map(|(q, a)| q * a).sum();
    let ln_a: f64 = a.iter().map(|v| v.ln()).sum();
    let ln_half = ln_gamma(0.5);
    let j_not_l: f64 = j
        .iter()
        .filter(|i| !split.l.contains(i))
        .map(|&i| ln_half - ln_gamma(spec.alpha.get(i)))
        .sum();
    let ln_constant = ln_star + (alpha_t_j - 1.0) * std::f64::consts::LN_2 + ln_gamma(spec.alpha.alpha_bar()) - qa
        + prob.value.ln()
        - spec.alpha.ln_gamma_sum(i_set)
        - 0.5 * ln_det_sii
        - ln_a
        + j_not_l;
    let nl = split.l.len() as f64;
    let exponent = 1.0 - i_set.len() as f64 - j.len() as f64 / 2.0 + nl / 2.0 - spec.alpha.sum_over(&split.l);
    Ok(TailAsymptotics {
        branch: Branch::Corollary2,
        constant: ln_constant.exp(),
        ln_constant,
        lambda_exponent: exponent,
        radius_scale: norm,
        law: spec.radial,
        split: split.clone(),
        components: Components {
            tau: None,
            tau_star_m: ln_star.exp(),
            orthant_probability: Some(prob),
            a_i: a,
        },
    })
}

/// Serialise `-∞` entries as `null`; accept `null`, `"-inf"` and numbers.
mod neg_inf_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<serde_json::Value> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|v| match v {
                serde_json::Value::Null => Ok(f64::NEG_INFINITY),
                serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| serde::de::Error::custom("bad number")),
                serde_json::Value::String(s) if matches!(s.to_ascii_lowercase().as_str(), "-inf" | "-infinity") => {
                    Ok(f64::NEG_INFINITY)
                }
                other => Err(serde::de::Error::custom(format!("expected a number, null or \"-inf\", got {other}"))),
            })
            .collect()
    }
}
