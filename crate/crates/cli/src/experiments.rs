//! End-to-end runs of the equicorrelated and bivariate worked examples.

use gsd_tail::asymptotics::{corollary2, theorem31, Branch, TailAsymptotics, TailProblem, ThresholdMode};
use gsd_tail::model::{AlphaVector, MixingMatrix, ModelSpec};
use gsd_tail::sampler::{chunked, conditional_excess, conditional_limit, mc_tail_at, GsdSampler};
use gsd_tail::special::{inv_gamma_q_ln, ln_gamma};
use gsd_tail::{Error, Estimator, Result};
use nalgebra::dmatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::report::{
    Check, ConditionalPoint, ConditionalReport, ExperimentReport, IndependencePoint, IndependenceReport, ReportRow,
};

pub const EXAMPLE1: &str = "example1";
pub const EXAMPLE2: &str = "example2";

/// Exact identities (Σ⁻¹1, √|Σ|, ‖1‖², Cholesky pattern).
pub const IDENTITY_TOL: f64 = 1e-12;
/// Entries of `C` compared against each other.
pub const PATTERN_TOL: f64 = 1e-10;
/// Quadrature-based constants against closed forms.
pub const TAU_TOL: f64 = 1e-6;
pub const DISPLAY_TOL: f64 = 1e-7;
/// Corollary constant against the theorem constant.
pub const AGREEMENT_TOL: f64 = 1e-5;
pub const CONDITIONAL_TOL: f64 = 0.05;
pub const MIN_CONDITIONAL_HITS: u64 = 5_000;
pub const INDEPENDENCE_LIMIT: f64 = 0.1;

fn default_samples() -> u64 {
    1_000_000
}

fn default_estimator() -> Estimator {
    Estimator::tilt()
}

/// Distinct seeds for the separate Monte Carlo runs of one experiment.
fn sub_seed(seed: u64, block: u64, i: u64) -> u64 {
    seed.wrapping_add(block.wrapping_mul(1_000_003)).wrapping_add(i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Config {
    pub k: usize,
    pub rho: f64,
    pub p: f64,
    pub u_grid: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
}

impl Example1Config {
    pub fn new(k: usize, rho: f64, p: f64, u_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            k,
            rho,
            p,
            u_grid,
            seed,
            n_samples: default_samples(),
            estimator: default_estimator(),
        }
    }
}

/// The equicorrelated model with identical `α_i = p` and the standard Kotz radius.
pub fn example1_model(k: usize, rho: f64, p: f64) -> Result<ModelSpec> {
    if k < 2 {
        return Err(Error::arg(format!("k must be at least 2, got {k}")));
    }
    let lo = -1.0 / (k as f64 - 1.0);
    if !(rho > lo && rho < 1.0) {
        return Err(Error::arg(format!("ρ must lie in ({lo}, 1), got {rho}")));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::arg(format!("p must be positive, got {p}")));
    }
    ModelSpec::standard_kotz(AlphaVector::constant(k, p)?, MixingMatrix::equicorrelated(k, rho)?)
}

fn mc_rows(
    problem: &TailProblem,
    asym: &TailAsymptotics,
    u_grid: &[f64],
    n: u64,
    seed: u64,
    estimator: Estimator,
) -> Result<Vec<ReportRow>> {
    u_grid
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let eval = asym.evaluate(u)?;
            let t = problem.threshold_at(u);
            let est = mc_tail_at(&problem.spec, &t, n, sub_seed(seed, 0, i as u64), estimator)?;
            Ok(ReportRow::new(&est, &eval))
        })
        .collect()
}

fn max_abs_dev(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Structural checks of the equicorrelated model that need no sampling.
pub fn example1_checks(spec: &ModelSpec, problem: &TailProblem, asym: &TailAsymptotics, p: f64) -> Vec<Check> {
    let k = spec.dim();
    let kf = k as f64;
    let rho = spec.mixing.sigma()[(0, 1)];
    let denom = 1.0 + (kf - 1.0) * rho;
    let mut checks = Vec::new();

    let row_sums: Vec<f64> = spec.mixing.sigma_inv().row_iter().map(|r| r.sum()).collect();
    checks.push(Check::at_most(
        "inverse_row_sums",
        max_abs_dev(row_sums.iter().copied(), std::iter::repeat(1.0 / denom)),
        IDENTITY_TOL,
        format!("Σ⁻¹1 = {row_sums:?}, expected {}", 1.0 / denom),
    ));

    let split = &problem.split;
    checks.push(Check::flag(
        "l_empty",
        split.l.is_empty() && split.index_j.is_empty(),
        format!("I = {:?}, J = {:?}, L = {:?}", split.index_i, split.index_j, split.l),
    ));

    // C lower triangular with c_ij = c_i1 for 1 ≤ j < i (1-based), so that
    // (C1)_i = c_ii + (i-1)c_i1, and C1 > 0.
    let c = spec.mixing.c();
    let scale = c.amax();
    let mut dev: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if j > i {
                dev = dev.max(c[(i, j)].abs() / scale);
            } else if j > 0 && j < i {
                dev = dev.max((c[(i, j)] - c[(i, 0)]).abs() / scale);
            }
        }
    }
    let c1: Vec<f64> = (0..k)
        .map(|i| c[(i, i)] + if i > 0 { i as f64 * c[(i, 0)] } else { 0.0 })
        .collect();
    dev = dev.max(max_abs_dev(c1.iter().copied(), split.cb_star.iter().copied()) / scale);
    let positive = c1.iter().all(|&v| v > 0.0);
    let mut pattern = Check::at_most("cholesky_pattern", dev, PATTERN_TOL, format!("C1 = {c1:?}"));
    pattern.passed &= positive;
    checks.push(pattern);

    let norm2 = problem.solution.min_value;
    checks.push(Check::relative("norm_closed_form", norm2, kf / denom, IDENTITY_TOL));
    let sqrt_det = (0.5 * spec.mixing.ln_det_sigma()).exp();
    let sqrt_det_expect = (1.0 - rho).powf((kf - 1.0) / 2.0) * denom.sqrt();
    checks.push(Check::relative("sqrt_det_closed_form", sqrt_det, sqrt_det_expect, IDENTITY_TOL));

    let e1 = 1.0 / denom;
    let tau_expect = (norm2.sqrt() / e1).powf(kf);
    match &asym.components.tau {
        Some(t) => checks.push(Check::relative("tau_l_closed_form", t.value, tau_expect, TAU_TOL)),
        None => checks.push(Check::flag("tau_l_closed_form", false, "no τ_L component")),
    }

    // Γ(kp)/(2Γ(p)^k √|Σ|) · τ_L · ‖1‖^{k(1-2p)} · ∏(C1)_i^{2p-1}
    let ln_expect = tau_expect.ln() + ln_gamma(kf * p) + kf * (0.5 - p) * norm2.ln()
        + c1.iter().map(|v| (2.0 * p - 1.0) * v.ln()).sum::<f64>()
        - LN_2
        - kf * ln_gamma(p)
        - sqrt_det_expect.ln();
    checks.push(Check::at_most(
        "general_display",
        (asym.ln_constant - ln_expect).abs(),
        DISPLAY_TOL,
        format!("ln constant {} vs closed form {ln_expect}", asym.ln_constant),
    ));
    checks.push(Check::flag(
        "branch",
        asym.branch == Branch::TheoremB && (asym.lambda_exponent - (1.0 - kf)).abs() < 1e-12,
        format!("{:?} with λ exponent {}", asym.branch, asym.lambda_exponent),
    ));

    if p == 0.5 {
        // Γ(k/2)/(2π^{k/2}√|Σ|) · ‖1‖/(1ᵀΣ⁻¹e₁)^k, stated against λ(u) rather than λ(u‖1‖).
        let display = (ln_gamma(kf / 2.0) - LN_2 - kf / 2.0 * PI.ln()).exp() / sqrt_det_expect * norm2.sqrt()
            / e1.powf(kf);
        let ours = asym.constant * norm2.sqrt().powf(asym.lambda_exponent);
        checks.push(Check::relative("elliptical_display", ours, display, DISPLAY_TOL));
    }
    checks
}

pub fn run_example1(cfg: &Example1Config) -> Result<ExperimentReport> {
    let spec = example1_model(cfg.k, cfg.rho, cfg.p)?;
    let b = vec![1.0; cfg.k];
    let problem = TailProblem::new(spec.clone(), &b, &ThresholdMode::PlainRay)?;
    let asym = theorem31(&problem)?;
    let checks = example1_checks(&spec, &problem, &asym, cfg.p);
    let rows = mc_rows(&problem, &asym, &cfg.u_grid, cfg.n_samples, cfg.seed, cfg.estimator)?;
    Ok(ExperimentReport {
        experiment: EXAMPLE1.into(),
        inputs: serde_json::to_value(cfg).map_err(|e| Error::arg(e.to_string()))?,
        model: spec.to_json_value(),
        b,
        asymptotics: asym,
        alternative: None,
        rows,
        checks,
        conditional: None,
        independence: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example2Case {
    RhoBelowA,
    RhoEqualsA,
    RhoAboveA,
}

impl Example2Case {
    pub fn classify(rho: f64, a: f64) -> Self {
        if (a - rho).abs() <= 1e-12 {
            Example2Case::RhoEqualsA
        } else if rho < a {
            Example2Case::RhoBelowA
        } else {
            Example2Case::RhoAboveA
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalConfig {
    /// Target `P(X₁ > u)`.
    pub tail_prob: f64,
    pub x_grid: Vec<f64>,
    pub n_samples: u64,
}

impl Default for ConditionalConfig {
    fn default() -> Self {
        Self {
            tail_prob: 1e-3,
            x_grid: vec![-1.0, 0.0, 1.0],
            n_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub n_pilot: u64,
    pub levels: Vec<f64>,
    pub n_samples: u64,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        Self {
            n_pilot: 10_000_000,
            levels: vec![1e2, 1e3, 1e4],
            n_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Config {
    pub alpha1: f64,
    pub alpha2: f64,
    pub rho: f64,
    pub a: f64,
    pub u_grid: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// Limit of the normalised second threshold in the case `ρ = a`.
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub conditional: Option<ConditionalConfig>,
    #[serde(default)]
    pub independence: Option<IndependenceConfig>,
}

impl Example2Config {
    pub fn new(alpha1: f64, alpha2: f64, rho: f64, a: f64, u_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            alpha1,
            alpha2,
            rho,
            a,
            u_grid,
            seed,
            n_samples: default_samples(),
            estimator: default_estimator(),
            q: 0.0,
            conditional: None,
            independence: None,
        }
    }
}

/// `A = [[1, ρ], [0, √(1-ρ²)]]` with the standard Kotz radius.
pub fn example2_model(alpha1: f64, alpha2: f64, rho: f64) -> Result<ModelSpec> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::arg(format!("ρ must lie in (-1, 1), got {rho}")));
    }
    let a = dmatrix![1.0, rho; 0.0, (1.0 - rho * rho).sqrt()];
    ModelSpec::standard_kotz(AlphaVector::new(vec![alpha1, alpha2])?, MixingMatrix::from_a(a)?)
}

/// `ln[Γ(ᾱ)/(2Γ(α₁)Γ(α₂)) · (1-ρ²)^{2-α₂}/((1-ρa)(a-ρ)^{2-2α₂}) · c^{3-2ᾱ}]`.
pub fn example2_below_display_ln(alpha1: f64, alpha2: f64, rho: f64, a: f64) -> f64 {
    let c = example2_c(rho, a);
    ln_gamma(alpha1 + alpha2) - ln_gamma(alpha1) - ln_gamma(alpha2) - LN_2
        + (2.0 - alpha2) * (1.0 - rho * rho).ln()
        - (1.0 - rho * a).ln()
        - (2.0 - 2.0 * alpha2) * (a - rho).ln()
        + (3.0 - 2.0 * alpha1 - 2.0 * alpha2) * c.ln()
}

/// The `a = 1` form: `c = √(2/(1+ρ))` and `(1-ρ)^{α₂-1}(1+ρ)^{2-α₂}`.
pub fn example2_a1_display_ln(alpha1: f64, alpha2: f64, rho: f64) -> f64 {
    let c = (2.0 / (1.0 + rho)).sqrt();
    ln_gamma(alpha1 + alpha2) - ln_gamma(alpha1) - ln_gamma(alpha2) - LN_2
        + (alpha2 - 1.0) * (1.0 - rho).ln()
        + (2.0 - alpha2) * (1.0 + rho).ln()
        + (3.0 - 2.0 * alpha1 - 2.0 * alpha2) * c.ln()
}

/// `c = √((1-2ρa+a²)/(1-ρ²))`.
pub fn example2_c(rho: f64, a: f64) -> f64 {
    ((1.0 - 2.0 * rho * a + a * a) / (1.0 - rho * rho)).sqrt()
}

/// `2^{α₂-1}Γ(ᾱ)/Γ(α₁) · prob`.
pub fn example2_single_j_constant(alpha1: f64, alpha2: f64, prob: f64) -> f64 {
    ((alpha2 - 1.0) * LN_2 + ln_gamma(alpha1 + alpha2) - ln_gamma(alpha1)).exp() * prob
}

fn json_err(e: serde_json::Error) -> Error {
    Error::arg(e.to_string())
}

pub fn run_example2(cfg: &Example2Config) -> Result<ExperimentReport> {
    let (a1, a2, rho, a) = (cfg.alpha1, cfg.alpha2, cfg.rho, cfg.a);
    if !(a <= 1.0) {
        return Err(Error::arg(format!("a must not exceed 1, got {a}")));
    }
    let spec = example2_model(a1, a2, rho)?;
    let b = vec![1.0, a];
    let case = Example2Case::classify(rho, a);
    let mut checks = vec![Check::flag("case", true, format!("{case:?}"))];
    let (problem, asym, alternative) = match case {
        Example2Case::RhoBelowA => {
            let problem = TailProblem::new(spec.clone(), &b, &ThresholdMode::PlainRay)?;
            let asym = theorem31(&problem)?;
            let c = example2_c(rho, a);
            checks.push(Check::relative("radius_scale", asym.radius_scale, c, IDENTITY_TOL));
            let ours_ln = asym.ln_constant + asym.lambda_exponent * c.ln();
            let display_ln = example2_below_display_ln(a1, a2, rho, a);
            checks.push(Check::at_most(
                "display_constant",
                (ours_ln - display_ln).abs(),
                DISPLAY_TOL,
                format!("ln constant {ours_ln} vs display {display_ln}"),
            ));
            if a == 1.0 {
                let special = example2_a1_display_ln(a1, a2, rho);
                checks.push(Check::at_most(
                    "a1_display",
                    (ours_ln - special).abs(),
                    DISPLAY_TOL,
                    format!("ln constant {ours_ln} vs a = 1 display {special}"),
                ));
            }
            (problem, asym, None)
        }
        Example2Case::RhoEqualsA => {
            let mode = ThresholdMode::Custom {
                q_i: vec![0.0],
                q_j: vec![cfg.q],
            };
            let problem = TailProblem::new(spec.clone(), &b, &mode)?;
            let cor = corollary2(&problem)?;
            let thm = theorem31(&problem)?;
            checks.push(Check::relative("corollary_vs_theorem", cor.constant, thm.constant, AGREEMENT_TOL));
            let expect = example2_single_j_constant(a1, a2, conditional_limit(rho, a2, cfg.q));
            checks.push(Check::relative("display_constant", cor.constant, expect, DISPLAY_TOL));
            (problem, cor, Some(thm))
        }
        Example2Case::RhoAboveA => {
            let problem = TailProblem::new(spec.clone(), &b, &ThresholdMode::PlainRay)?;
            let thm = theorem31(&problem)?;
            let expect = example2_single_j_constant(a1, a2, 1.0);
            checks.push(Check::relative("display_constant", thm.constant, expect, DISPLAY_TOL));
            let cor = corollary2(&problem).ok();
            (problem, thm, cor)
        }
    };
    checks.push(Check::at_most(
        "lambda_exponent",
        (asym.lambda_exponent - expected_exponent(case, a2)).abs(),
        1e-12,
        format!("{}", asym.lambda_exponent),
    ));

    let rows = mc_rows(&problem, &asym, &cfg.u_grid, cfg.n_samples, cfg.seed, cfg.estimator)?;

    let conditional = match &cfg.conditional {
        Some(cc) => {
            let rep = conditional_check(&spec, rho, a2, cc, sub_seed(cfg.seed, 1, 0))?;
            let worst = rep.points.iter().fold(0.0f64, |m, p| m.max(p.abs_deviation));
            checks.push(Check::at_most(
                "conditional_limit",
                worst,
                CONDITIONAL_TOL,
                format!("u = {}, deviations {:?}", rep.u, rep.points.iter().map(|p| p.abs_deviation).collect::<Vec<_>>()),
            ));
            checks.push(Check::flag(
                "conditional_hits",
                rep.hits >= MIN_CONDITIONAL_HITS,
                format!("{} conditioning hits", rep.hits),
            ));
            Some(rep)
        }
        None => None,
    };

    let independence = match &cfg.independence {
        Some(ic) => {
            let rep = independence_check(&spec, ic, cfg.estimator, sub_seed(cfg.seed, 2, 0))?;
            let np: Vec<f64> = rep.points.iter().map(|p| p.n_times_p).collect();
            let decreasing = np.windows(2).all(|w| w[1] < w[0]);
            checks.push(Check::flag("independence_decreasing", decreasing, format!("n·P = {np:?}")));
            let last = np.last().copied().unwrap_or(f64::NAN);
            checks.push(Check::at_most("independence_small", last, INDEPENDENCE_LIMIT, format!("n·P = {last}")));
            Some(rep)
        }
        None => None,
    };

    Ok(ExperimentReport {
        experiment: EXAMPLE2.into(),
        inputs: serde_json::to_value(cfg).map_err(json_err)?,
        model: spec.to_json_value(),
        b,
        asymptotics: asym,
        alternative,
        rows,
        checks,
        conditional,
        independence,
    })
}

fn expected_exponent(case: Example2Case, a2: f64) -> f64 {
    match case {
        Example2Case::RhoBelowA => -1.0,
        _ => -a2,
    }
}

/// The `u` with `P(X₁ > u) = p`. Under the standard Kotz radius and a first
/// column `e₁` of `A`, `X₁² ~ Gamma(α₁, 1/2)`.
pub fn marginal_level(alpha1: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::arg(format!("tail probability must lie in (0, 1/2), got {p}")));
    }
    Ok((2.0 * inv_gamma_q_ln(alpha1, (2.0 * p).ln())).sqrt())
}

pub fn conditional_check(
    spec: &ModelSpec,
    rho: f64,
    alpha2: f64,
    cfg: &ConditionalConfig,
    seed: u64,
) -> Result<ConditionalReport> {
    let u = marginal_level(spec.alpha.get(0), cfg.tail_prob)?;
    let ex = conditional_excess(spec, u, &cfg.x_grid, cfg.n_samples, seed)?;
    let points = ex
        .points
        .iter()
        .map(|p| {
            let limit = conditional_limit(rho, alpha2, p.x);
            ConditionalPoint {
                x: p.x,
                estimate: p.estimate,
                std_err: p.std_err,
                limit,
                abs_deviation: (p.estimate - limit).abs(),
            }
        })
        .collect();
    Ok(ConditionalReport {
        u,
        marginal_tail: cfg.tail_prob,
        hits: ex.hits,
        n_samples: ex.n_samples,
        points,
    })
}

/// Empirical `(1 - 1/n)` quantiles of coordinate `coord` for every `n` in `levels`.
pub fn pilot_quantiles(spec: &ModelSpec, coord: usize, levels: &[f64], n_pilot: u64, seed: u64) -> Result<Vec<f64>> {
    if coord >= spec.dim() {
        return Err(Error::arg(format!("coordinate {coord} out of range")));
    }
    if levels.iter().any(|&n| !(n > 1.0) || n > n_pilot as f64) {
        return Err(Error::arg("quantile levels must lie in (1, n_pilot]"));
    }
    let sampler = GsdSampler::new(spec);
    let parts = chunked(seed, n_pilot, |rng, count| {
        (0..count).map(|_| sampler.sample(rng)[coord]).collect::<Vec<f64>>()
    });
    let mut all = Vec::with_capacity(n_pilot as usize);
    for p in parts {
        all.extend(p);
    }
    let len = all.len();
    Ok(levels
        .iter()
        .map(|&n| {
            // index of the (1 - 1/n) order statistic
            let above = ((len as f64) / n).round().max(1.0) as usize;
            let idx = len - above;
            let (_, v, _) = all.select_nth_unstable_by(idx, f64::total_cmp);
            *v
        })
        .collect())
}

pub fn independence_check(
    spec: &ModelSpec,
    cfg: &IndependenceConfig,
    estimator: Estimator,
    seed: u64,
) -> Result<IndependenceReport> {
    if spec.dim() != 2 {
        return Err(Error::arg("the independence check needs a bivariate model"));
    }
    let q1 = pilot_quantiles(spec, 0, &cfg.levels, cfg.n_pilot, sub_seed(seed, 0, 0))?;
    let q2 = pilot_quantiles(spec, 1, &cfg.levels, cfg.n_pilot, sub_seed(seed, 0, 1))?;
    let points = cfg
        .levels
        .iter()
        .zip(q1.iter().zip(&q2))
        .enumerate()
        .map(|(i, (&n, (&b1, &b2)))| {
            let est = mc_tail_at(spec, &[b1, b2], cfg.n_samples, sub_seed(seed, 1, i as u64), estimator)?;
            Ok(IndependencePoint {
                n,
                b1,
                b2,
                p_hat: est.p_hat,
                std_err: est.std_err,
                n_times_p: n * est.p_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndependenceReport {
        n_pilot: cfg.n_pilot,
        n_samples: cfg.n_samples,
        points,
    })
}

/// Re-run an experiment from the `inputs` block of its report.
pub fn rerun(report: &ExperimentReport) -> Result<ExperimentReport> {
    match report.experiment.as_str() {
        EXAMPLE1 => run_example1(&serde_json::from_value(report.inputs.clone()).map_err(json_err)?),
        EXAMPLE2 => run_example2(&serde_json::from_value(report.inputs.clone()).map_err(json_err)?),
        other => Err(Error::arg(format!("unknown experiment `{other}`"))),
    }
}
