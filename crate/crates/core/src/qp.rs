//! The quadratic program `minimise xᵀΣ⁻¹x subject to x ≥ b`.
//!
//! The solution is `b*` with `b*_I = b_I` on the minimal index set `I` and
//! `b*_J = Σ_JI Σ_II⁻¹ b_I ≥ b_J` on the complement, where `I` is the unique
//! set with `Σ_II⁻¹ b_I > 0` componentwise for which that inequality holds.
//! The minimum is `b_Iᵀ Σ_II⁻¹ b_I`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complement, submatrix, subvector, SpdFactor};

/// Relative margin for the strict positivity of `Σ_II⁻¹ b_I`.
pub const STRICT_TOL: f64 = 1e-10;

/// Largest dimension handled by exhaustive enumeration.
pub const MAX_ENUMERATION_DIM: usize = 20;

#[derive(Debug, Clone)]
pub struct QpProblem {
    sigma: DMatrix<f64>,
    b: DVector<f64>,
    factor: SpdFactor,
}

impl QpProblem {
    pub fn new(sigma: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if sigma.nrows() != b.len() {
            return Err(Error::arg(format!(
                "Σ is {}x{} but b has {} entries",
                sigma.nrows(),
                sigma.ncols(),
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("b has non-finite entries"));
        }
        if !b.iter().any(|&v| v > 0.0) {
            return Err(Error::arg("b must have at least one positive component"));
        }
        let factor = SpdFactor::new(&sigma)?;
        Ok(Self { sigma, b, factor })
    }

    pub fn from_slices(sigma: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        Self::new(sigma.clone(), DVector::from_column_slice(b))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn sigma_inv(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    fn scale(&self) -> f64 {
        self.b.amax().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub b_star: Vec<f64>,
    /// Minimal index set, sorted, 0-based.
    #[serde(rename = "I")]
    pub index_i: Vec<usize>,
    #[serde(rename = "J")]
    pub index_j: Vec<usize>,
    pub min_value: f64,
    /// `‖b_I‖ = √min_value`.
    #[serde(rename = "norm_bI")]
    pub norm_bi: f64,
    /// `Σ_II⁻¹ b_I`, aligned with `index_i`.
    pub dual_i: Vec<f64>,
}

/// Outcome of testing one candidate index set.
#[derive(Debug, Clone)]
struct Candidate {
    set: Vec<usize>,
    dual: DVector<f64>,
    b_star: DVector<f64>,
    min_value: f64,
    /// Worst relative violation over positivity and feasibility; ≤ 0 certifies.
    violation: f64,
    residuals: Vec<f64>,
}

fn evaluate_candidate(p: &QpProblem, set: &[usize]) -> Option<Candidate> {
    let k = p.dim();
    let jset = complement(set, k);
    let s_ii = submatrix(&p.sigma, set, set);
    let f = SpdFactor::new(&s_ii).ok()?;
    let b_i = subvector(&p.b, set);
    let dual = f.solve(&b_i);
    let min_value = b_i.dot(&dual);
    let dual_scale = dual.amax().max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(k);
    let mut violation = f64::NEG_INFINITY;
    for &d in dual.iter() {
        // positive residual = violation
        let r = STRICT_TOL - d / dual_scale;
        residuals.push(r);
        violation = violation.max(r);
    }
    let mut b_star = p.b.clone();
    if !jset.is_empty() {
        let s_ji = submatrix(&p.sigma, &jset, set);
        let bj = &s_ji * &dual;
        let scale = p.scale();
        for (pos, &j) in jset.iter().enumerate() {
            b_star[j] = bj[pos];
            let r = (p.b[j] - bj[pos]) / scale - STRICT_TOL;
            residuals.push(r);
            violation = violation.max(r);
        }
    }
    Some(Candidate {
        set: set.to_vec(),
        dual,
        b_star,
        min_value,
        violation,
        residuals,
    })
}

fn into_solution(p: &QpProblem, c: Candidate) -> QpSolution {
    QpSolution {
        b_star: c.b_star.iter().copied().collect(),
        index_j: complement(&c.set, p.dim()),
        index_i: c.set,
        norm_bi: c.min_value.sqrt(),
        min_value: c.min_value,
        dual_i: c.dual.iter().copied().collect(),
    }
}

/// Test whether `set` satisfies the characterisation, returning the solution
/// it induces.
pub fn certify(p: &QpProblem, set: &[usize]) -> Option<QpSolution> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let c = evaluate_candidate(p, &sorted)?;
    (c.violation <= 0.0 && c.min_value > 0.0).then(|| into_solution(p, c))
}

/// Solve the QP.
pub fn solve(p: &QpProblem) -> Result<QpSolution> {
    let k = p.dim();
    let full: Vec<usize> = (0..k).collect();
    if let Some(sol) = certify(p, &full) {
        return Ok(sol);
    }
    if let Some(set) = active_set(p) {
        if let Some(sol) = certify(p, &set) {
            return Ok(sol);
        }
    }
    if k > MAX_ENUMERATION_DIM {
        return Err(Error::Degenerate {
            message: format!("active set did not certify and k = {k} is too large to enumerate"),
            candidate: Vec::new(),
            residuals: Vec::new(),
        });
    }
    solve_by_enumeration(p)
}

/// Solve by scanning all non-empty index sets in order of size.
pub fn solve_by_enumeration(p: &QpProblem) -> Result<QpSolution> {
    let k = p.dim();
    if k > MAX_ENUMERATION_DIM {
        return Err(Error::arg(format!("enumeration limited to k ≤ {MAX_ENUMERATION_DIM}")));
    }
    let mut best: Option<Candidate> = None;
    for size in 1..=k {
        for set in subsets_of_size(k, size) {
            let Some(c) = evaluate_candidate(p, &set) else { continue };
            if c.violation <= 0.0 && c.min_value > 0.0 {
                return Ok(into_solution(p, c));
            }
            if best.as_ref().map_or(true, |b| c.violation < b.violation) {
                best = Some(c);
            }
        }
    }
    let best = best.expect("at least one principal submatrix factors");
    Err(Error::Degenerate {
        message: "no index set satisfies the characterisation within tolerance".into(),
        candidate: best.set,
        residuals: best.residuals,
    })
}

/// Every non-empty index set that certifies (for uniqueness checks).
pub fn enumerate_certified_sets(p: &QpProblem) -> Result<Vec<Vec<usize>>> {
    let k = p.dim();
    if k > MAX_ENUMERATION_DIM {
        return Err(Error::arg(format!("enumeration limited to k ≤ {MAX_ENUMERATION_DIM}")));
    }
    Ok((1..=k)
        .flat_map(|size| subsets_of_size(k, size))
        .filter(|set| certify(p, set).is_some())
        .collect())
}

fn subsets_of_size(k: usize, size: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1u32 << k))
        .filter(move |m| m.count_ones() as usize == size)
        .map(move |m| (0..k).filter(|i| m & (1 << i) != 0).collect())
}

// Lawson–Hanson active set for the dual problem
//   min ½νᵀΣν − bᵀν, ν ≥ 0,
// whose solution has x = Σν and support equal to I.
fn active_set(p: &QpProblem) -> Option<Vec<usize>> {
    let k = p.dim();
    let mut nu = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * p.scale();
    for _outer in 0..3 * k + 10 {
        let grad = &p.b - &p.sigma * &nu;
        let next = (0..k)
            .filter(|&i| !passive[i] && grad[i] > tol)
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        let Some(j) = next else {
            let set: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            return (!set.is_empty()).then_some(set);
        };
        passive[j] = true;
        for _inner in 0..k + 1 {
            let set: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let f = SpdFactor::new(&submatrix(&p.sigma, &set, &set)).ok()?;
            let z = f.solve(&subvector(&p.b, &set));
            if z.iter().all(|&v| v > 0.0) {
                nu.fill(0.0);
                for (pos, &i) in set.iter().enumerate() {
                    nu[i] = z[pos];
                }
                break;
            }
            let mut step = f64::INFINITY;
            for (pos, &i) in set.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let denom = nu[i] - z[pos];
                    if denom > 0.0 {
                        step = step.min(nu[i] / denom);
                    }
                }
            }
            if !step.is_finite() {
                step = 0.0;
            }
            for (pos, &i) in set.iter().enumerate() {
                nu[i] += step * (z[pos] - nu[i]);
                if nu[i] <= 1e-15 * p.scale() {
                    nu[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&x| x) {
                break;
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest violation; zero or negative means comfortably satisfied.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Verify a claimed solution with a fixed internal seed for check (4).
pub fn verify_solution(p: &QpProblem, sol: &QpSolution, tol: f64) -> VerificationReport {
    verify_solution_with_seed(p, sol, tol, 0x5eed)
}

/// Checks: `feasibility` (`b* ≥ b`), `positivity` (`Σ_II⁻¹b_I > 0`),
/// `j_block` (`b*_I = b_I`, `b*_J = Σ_JIΣ_II⁻¹b_I`), `inner_product`
/// (`xᵀΣ⁻¹b* = x_IᵀΣ_II⁻¹b_I` for 10 random `x`) and `min_value`.
pub fn verify_solution_with_seed(p: &QpProblem, sol: &QpSolution, tol: f64, seed: u64) -> VerificationReport {
    let k = p.dim();
    let scale = p.scale();
    let mut checks = Vec::new();
    let shapes_ok = sol.b_star.len() == k && sol.index_i.len() + sol.index_j.len() == k && !sol.index_i.is_empty();
    if !shapes_ok {
        checks.push(Check {
            name: "shape".into(),
            passed: false,
            residual: f64::INFINITY,
        });
        return VerificationReport { checks, passed: false };
    }
    let b_star = DVector::from_column_slice(&sol.b_star);
    let set = &sol.index_i;
    let jset = &sol.index_j;

    let feas = (0..k).map(|i| (p.b[i] - b_star[i]) / scale).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "feasibility".into(),
        passed: feas <= tol,
        residual: feas,
    });

    let s_ii = submatrix(&p.sigma, set, set);
    let Ok(f) = SpdFactor::new(&s_ii) else {
        checks.push(Check {
            name: "positivity".into(),
            passed: false,
            residual: f64::INFINITY,
        });
        return VerificationReport { checks, passed: false };
    };
    let b_i = subvector(&p.b, set);
    let dual = f.solve(&b_i);
    let min_dual = dual.min();
    checks.push(Check {
        name: "positivity".into(),
        passed: min_dual > 0.0,
        residual: -min_dual,
    });

    let mut jres = set.iter().map(|&i| (b_star[i] - p.b[i]).abs()).fold(0.0, f64::max);
    if !jset.is_empty() {
        let bj = submatrix(&p.sigma, jset, set) * &dual;
        for (pos, &j) in jset.iter().enumerate() {
            jres = jres.max((b_star[j] - bj[pos]).abs() / scale);
        }
    }
    checks.push(Check {
        name: "j_block".into(),
        passed: jres <= tol,
        residual: jres,
    });

    let q = p.sigma_inv();
    let qb = &q * &b_star;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ip = 0.0f64;
    for _ in 0..10 {
        let x = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let lhs = x.dot(&qb);
        let rhs = subvector(&x, set).dot(&dual);
        let s = x.norm() * qb.norm() + 1.0;
        ip = ip.max((lhs - rhs).abs() / s);
    }
    checks.push(Check {
        name: "inner_product".into(),
        passed: ip <= tol,
        residual: ip,
    });

    let v1 = b_i.dot(&dual);
    let v2 = b_star.dot(&qb);
    let mres = ((sol.min_value - v1).abs()).max((sol.min_value - v2).abs()) / v1.abs().max(f64::MIN_POSITIVE);
    checks.push(Check {
        name: "min_value".into(),
        passed: mres <= tol && sol.min_value > 0.0,
        residual: mres,
    });

    let passed = checks.iter().all(|c| c.passed);
    VerificationReport { checks, passed }
}

/// `b*_J` in the precision form `-((Σ⁻¹)_JJ)⁻¹ (Σ⁻¹)_JI b_I`.
pub fn j_block_precision_form(p: &QpProblem, sol: &QpSolution) -> Result<Vec<f64>> {
    if sol.index_j.is_empty() {
        return Ok(Vec::new());
    }
    let q = p.sigma_inv();
    let qjj = submatrix(&q, &sol.index_j, &sol.index_j);
    let qji = submatrix(&q, &sol.index_j, &sol.index_i);
    let f = SpdFactor::new(&qjj)?;
    let rhs = -(qji * subvector(&p.b, &sol.index_i));
    Ok(f.solve(&rhs).iter().copied().collect())
}

/// Independent oracle: FISTA projected gradient from 50 random feasible
/// starts. Test use only.
pub fn brute_force_min(p: &QpProblem, max_iters: usize) -> Result<f64> {
    let k = p.dim();
    let q = p.sigma_inv();
    let lmax = q.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / (2.0 * lmax);
    let project = |x: &DVector<f64>| x.zip_map(&p.b, f64::max);
    let objective = |x: &DVector<f64>| x.dot(&(&q * x));
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
    let mut best = f64::INFINITY;
    for _ in 0..50 {
        let mut x = DVector::from_fn(k, |i, _| p.b[i].max(0.0) + rng.random_range(0.0..3.0));
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut fx = objective(&x);
        let mut converged = false;
        for _ in 0..max_iters {
            let grad = 2.0 * (&q * &y);
            let x_new = project(&(&y - step * grad));
            let f_new = objective(&x_new);
            let moved = (&x_new - &x).amax();
            if moved <= 1e-13 * (1.0 + x.amax()) {
                converged = true;
                break;
            }
            // Adaptive restart. A plain gradient step (t = 1) is a descent step
            // in exact arithmetic, so an increase there is rounding and is accepted.
            if f_new > fx && t > 1.0 {
                t = 1.0;
                y = x.clone();
                continue;
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + ((t - 1.0) / t_new) * (&x_new - &x);
            x = x_new;
            fx = f_new;
            t = t_new;
        }
        if !converged {
            return Err(Error::OracleFailure(format!("projected gradient did not converge in {max_iters} iterations")));
        }
        best = best.min(fx);
    }
    Ok(best)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn equi(k: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho })
    }

    fn problem(sigma: DMatrix<f64>, b: &[f64]) -> QpProblem {
        QpProblem::new(sigma, DVector::from_column_slice(b)).unwrap()
    }

    /// Random correlation matrix from normalised Gaussian columns.
    pub(crate) fn random_correlation(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
        loop {
            let mut a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            for mut c in a.column_iter_mut() {
                let n = c.norm();
                c /= n;
            }
            let s = a.transpose() * &a;
            let s = (&s + s.transpose()) * 0.5;
            if let Ok(f) = SpdFactor::new(&s) {
                if f.condition() < 1e4 {
                    return s;
                }
            }
        }
    }

    #[test]
    fn documented_examples() {
        let s = solve(&problem(equi(3, 0.5), &[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s.index_i, vec![0, 1, 2]);
        assert_relative_eq!(s.min_value, 1.5, max_relative = 1e-14);

        let s = solve(&problem(DMatrix::identity(2, 2), &[1.0, 1.0])).unwrap();
        assert_eq!(s.index_i, vec![0, 1]);
        assert_relative_eq!(s.min_value, 2.0, max_relative = 1e-14);

        let s = solve(&problem(equi(2, 0.5), &[1.0, 0.5])).unwrap();
        assert_eq!(s.index_i, vec![0]);
        assert_eq!(s.index_j, vec![1]);
        assert_relative_eq!(s.b_star[1], 0.5, max_relative = 1e-14);
        assert_relative_eq!(s.min_value, 1.0, max_relative = 1e-14);

        let s = solve(&problem(DMatrix::identity(2, 2), &[1.0, 0.5])).unwrap();
        assert_eq!(s.index_i, vec![0, 1]);
        assert_relative_eq!(s.min_value, 1.25, max_relative = 1e-14);
    }

    #[test]
    fn invalid_problems() {
        assert!(QpProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, 0.0])).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            QpProblem::new(indefinite, DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::Matrix(_))
        ));
    }

    #[test]
    fn brute_force_examples() {
        let v = brute_force_min(&problem(equi(3, 0.5), &[1.0, 1.0, 1.0]), 100_000).unwrap();
        assert!((v - 1.5).abs() < 1e-6);
        let v = brute_force_min(&problem(DMatrix::identity(2, 2), &[-1.0, 1.0]), 100_000).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_j_block_fails() {
        let p = problem(equi(2, 0.8), &[1.0, 0.2]);
        let mut s = solve(&p).unwrap();
        assert_eq!(s.index_j, vec![1]);
        assert!(verify_solution(&p, &s, 1e-9).passed);
        s.b_star[1] += 1e-3;
        let r = verify_solution(&p, &s, 1e-9);
        assert!(!r.check("j_block").unwrap().passed);
    }

    #[test]
    fn random_instances_agree_with_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 0..200 {
            let k = 2 + n % 4;
            let sigma = random_correlation(&mut rng, k);
            let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.5)).collect();
            if b.iter().all(|&v| v <= 0.0) {
                b[0] = 0.7;
            }
            let p = problem(sigma, &b);
            let s = solve(&p).unwrap();
            let e = solve_by_enumeration(&p).unwrap();
            assert_eq!(s.index_i, e.index_i);
            assert_eq!(enumerate_certified_sets(&p).unwrap(), vec![s.index_i.clone()]);
            let report = verify_solution(&p, &s, 1e-9);
            assert!(report.passed, "{report:?}");
            let bf = brute_force_min(&p, 200_000).unwrap();
            assert!((bf - s.min_value).abs() <= 1e-8 * s.min_value, "{bf} vs {}", s.min_value);
            let pf = j_block_precision_form(&p, &s).unwrap();
            for (pos, &j) in s.index_j.iter().enumerate() {
                assert!((pf[pos] - s.b_star[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_direction_needs_two_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 0..100 {
            let k = 2 + n % 5;
            let p = problem(random_correlation(&mut rng, k), &vec![1.3; k]);
            assert!(solve(&p).unwrap().index_i.len() >= 2);
        }
    }

    #[test]
    fn larger_dimension_fast_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let k = 14;
            let p = problem(
                random_correlation(&mut rng, k),
                &(0..k).map(|_| rng.random_range(-0.5..1.0)).collect::<Vec<_>>(),
            );
            let s = solve(&p).unwrap();
            assert!(verify_solution(&p, &s, 1e-9).passed);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 2 + (seed % 4) as usize;
            let sigma = random_correlation(&mut rng, k);
            let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            b[0] = b[0].abs() + 0.1;
            let s1 = solve(&problem(sigma.clone(), &b)).unwrap();
            let cb: Vec<f64> = b.iter().map(|v| c * v).collect();
            let s2 = solve(&problem(sigma, &cb)).unwrap();
            prop_assert_eq!(&s1.index_i, &s2.index_i);
            prop_assert!((s2.min_value - c * c * s1.min_value).abs() <= 1e-10 * s2.min_value);
            for i in 0..k {
                prop_assert!((s2.b_star[i] - c * s1.b_star[i]).abs() <= 1e-10 * c * (1.0 + s1.b_star[i].abs()));
            }
        }

        #[test]
        fn min_value_is_quadratic_form_of_b_star(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 2 + (seed % 4) as usize;
            let sigma = random_correlation(&mut rng, k);
            let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            b[k - 1] = b[k - 1].abs() + 0.1;
            let p = problem(sigma, &b);
            let s = solve(&p).unwrap();
            let bs = DVector::from_column_slice(&s.b_star);
            let v = bs.dot(&(p.sigma_inv() * &bs));
            prop_assert!((v - s.min_value).abs() <= 1e-10 * s.min_value);
        }
    }
}
