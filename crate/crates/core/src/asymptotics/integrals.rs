//! Orthant integrals with power-of-linear-form factors.
//!
//! Two weights occur in the asymptotic constants:
//!
//! * Gaussian: `∫_{y>q} ∏_m |l_mᵀy|^{e_m} exp(-yᵀPy/2) dy`, with `q` entries
//!   allowed to be `-∞`;
//! * exponential: `∫_{y>q} ∏_m |l_mᵀy|^{e_m} exp(-vᵀy) dy` with `v > 0`.
//!
//! Up to three dimensions they are evaluated by iterated adaptive
//! quadrature. Variables that appear in no linear form are integrated in
//! closed form where possible and the others are ordered first. Any
//! dimension can be estimated by Monte Carlo.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::sampler::chunked_moments;
use crate::special::normal_sf;

/// Largest number of coordinates integrated numerically. Coordinates of an
/// exponential weight that appear in no form are done in closed form and
/// do not count.
pub const MAX_QUADRATURE_DIM: usize = 3;

/// Largest total dimension.
const Y_CAP: usize = 32;

/// Half-width of the Gaussian integration window in conditional standard
/// deviations.
const GAUSS_WINDOW: f64 = 12.0;

/// Length of the exponential window in units of `1/v_d`.
const EXP_WINDOW: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub coefficients: Vec<f64>,
    pub exponent: f64,
}

/// Value of an integral together with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    /// Quadrature error estimate or Monte Carlo standard error.
    pub error: f64,
    pub method: IntegralMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone)]
enum Weight {
    Gaussian { precision: DMatrix<f64> },
    Exponential { rate: DVector<f64> },
}

#[derive(Debug, Clone)]
struct OrthantIntegral {
    lower: Vec<f64>,
    forms: Vec<LinearForm>,
    weight: Weight,
}

fn check_forms(forms: &[LinearForm], d: usize) -> Result<()> {
    for f in forms {
        if f.coefficients.len() != d {
            return Err(Error::arg(format!("linear form has {} coefficients, expected {d}", f.coefficients.len())));
        }
        if !(f.exponent > -1.0) {
            return Err(Error::Diverged(format!("exponent {} ≤ -1 is not integrable", f.exponent)));
        }
    }
    Ok(())
}

fn forms_product(forms: &[LinearForm], y: &[f64]) -> f64 {
    let mut p = 1.0;
    for f in forms {
        let t: f64 = f.coefficients.iter().zip(y).map(|(c, v)| c * v).sum();
        p *= t.abs().powf(f.exponent);
    }
    p
}

/// `∫_{y>q} ∏|l_mᵀy|^{e_m} exp(-yᵀPy/2) dy`.
#[derive(Debug, Clone)]
pub struct GaussianOrthantIntegral {
    inner: OrthantIntegral,
}

impl GaussianOrthantIntegral {
    pub fn new(precision: DMatrix<f64>, lower: Vec<f64>, forms: Vec<LinearForm>) -> Result<Self> {
        let d = lower.len();
        if precision.nrows() != d || precision.ncols() != d || d == 0 {
            return Err(Error::arg("precision matrix and lower limits disagree in dimension"));
        }
        SpdFactor::new(&precision)?;
        if lower.iter().any(|q| q.is_nan() || *q == f64::INFINITY) {
            return Err(Error::arg("lower limits must lie in [-∞, ∞)"));
        }
        check_forms(&forms, d)?;
        Ok(Self {
            inner: OrthantIntegral {
                lower,
                forms,
                weight: Weight::Gaussian { precision },
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.lower.len()
    }

    pub fn quadrature(&self, rel_tol: f64) -> Result<IntegralEstimate> {
        self.inner.quadrature(rel_tol)
    }

    pub fn monte_carlo(&self, samples: u64, seed: u64) -> Result<IntegralEstimate> {
        self.inner.monte_carlo(samples, seed)
    }
}

/// `∫_{y>q} ∏|l_mᵀy|^{e_m} exp(-vᵀy) dy` with finite `q` and `v > 0`.
#[derive(Debug, Clone)]
pub struct ExponentialOrthantIntegral {
    inner: OrthantIntegral,
}

impl ExponentialOrthantIntegral {
    pub fn new(rate: DVector<f64>, lower: Vec<f64>, forms: Vec<LinearForm>) -> Result<Self> {
        let d = lower.len();
        if rate.len() != d || d == 0 {
            return Err(Error::arg("rate vector and lower limits disagree in dimension"));
        }
        if let Some(i) = (0..d).find(|&i| !(rate[i] > 0.0)) {
            return Err(Error::Diverged(format!(
                "linear tilt has non-positive component {} at index {i}",
                rate[i]
            )));
        }
        if lower.iter().any(|q| !q.is_finite()) {
            return Err(Error::arg("exponential orthant integral needs finite lower limits"));
        }
        check_forms(&forms, d)?;
        Ok(Self {
            inner: OrthantIntegral {
                lower,
                forms,
                weight: Weight::Exponential { rate },
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.lower.len()
    }

    /// Number of coordinates that need numerical integration.
    pub fn quadrature_dim(&self) -> usize {
        self.inner.quadrature_dim()
    }

    pub fn quadrature(&self, rel_tol: f64) -> Result<IntegralEstimate> {
        self.inner.quadrature(rel_tol)
    }

    pub fn monte_carlo(&self, samples: u64, seed: u64) -> Result<IntegralEstimate> {
        self.inner.monte_carlo(samples, seed)
    }
}

/// The integral after reordering variables so that the ones touched by a
/// linear form come first.
struct Prepared {
    d: usize,
    lower: Vec<f64>,
    forms: Vec<LinearForm>,
    /// For each level, the forms whose last non-zero coefficient sits there.
    breaks_at: Vec<Vec<usize>>,
    kind: PreparedWeight,
    /// Variables from this index on appear in no form.
    free_from: usize,
}

enum PreparedWeight {
    Gaussian {
        precision: DMatrix<f64>,
        /// Marginal precision of the first `d+1` variables, per level.
        marginal: Vec<DMatrix<f64>>,
    },
    Exponential {
        rate: Vec<f64>,
    },
}

impl OrthantIntegral {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn prepare(&self) -> Result<Prepared> {
        let d = self.dim();
        let used: Vec<bool> = (0..d)
            .map(|i| self.forms.iter().any(|f| f.coefficients[i] != 0.0))
            .collect();
        let order: Vec<usize> = (0..d).filter(|&i| used[i]).chain((0..d).filter(|&i| !used[i])).collect();
        let free_from = used.iter().filter(|&&u| u).count();
        let lower: Vec<f64> = order.iter().map(|&i| self.lower[i]).collect();
        let forms: Vec<LinearForm> = self
            .forms
            .iter()
            .map(|f| LinearForm {
                coefficients: order.iter().map(|&i| f.coefficients[i]).collect(),
                exponent: f.exponent,
            })
            .collect();
        let mut breaks_at = vec![Vec::new(); d];
        for (m, f) in forms.iter().enumerate() {
            if let Some(last) = (0..d).rev().find(|&i| f.coefficients[i] != 0.0) {
                breaks_at[last].push(m);
            }
        }
        let kind = match &self.weight {
            Weight::Gaussian { precision } => {
                let p = DMatrix::from_fn(d, d, |i, j| precision[(order[i], order[j])]);
                let cov = SpdFactor::new(&p)?.inverse();
                let marginal = (0..d)
                    .map(|l| {
                        let sub = cov.view((0, 0), (l + 1, l + 1)).into_owned();
                        SpdFactor::new(&sub).map(|f| f.inverse())
                    })
                    .collect::<Result<Vec<_>>>()?;
                PreparedWeight::Gaussian { precision: p, marginal }
            }
            Weight::Exponential { rate } => PreparedWeight::Exponential {
                rate: order.iter().map(|&i| rate[i]).collect(),
            },
        };
        Ok(Prepared {
            d,
            lower,
            forms,
            breaks_at,
            kind,
            free_from,
        })
    }

    fn quadrature_dim(&self) -> usize {
        match self.weight {
            Weight::Exponential { .. } => (0..self.dim())
                .filter(|&i| self.forms.iter().any(|f| f.coefficients[i] != 0.0))
                .count(),
            Weight::Gaussian { .. } => self.dim(),
        }
    }

    fn quadrature(&self, rel_tol: f64) -> Result<IntegralEstimate> {
        let d = self.dim();
        let qd = self.quadrature_dim();
        if qd > MAX_QUADRATURE_DIM || d > Y_CAP {
            return Err(Error::Unsupported(format!(
                "quadrature backend handles at most {MAX_QUADRATURE_DIM} dimensions, got {qd}"
            )));
        }
        let p = self.prepare()?;
        let mut err = 0.0;
        let value = p.level(0, [0.0; Y_CAP], rel_tol, &mut err);
        if !value.is_finite() {
            return Err(Error::Accuracy(format!("quadrature produced {value}")));
        }
        let separable = matches!(self.weight, Weight::Exponential { .. }) || d == 1;
        let method = if self.forms.is_empty() && separable {
            IntegralMethod::ClosedForm
        } else {
            IntegralMethod::Quadrature
        };
        Ok(IntegralEstimate {
            value,
            error: err,
            method,
        })
    }

    fn monte_carlo(&self, samples: u64, seed: u64) -> Result<IntegralEstimate> {
        if samples < 2 {
            return Err(Error::arg("Monte Carlo needs at least two samples"));
        }
        let d = self.dim();
        let lower = self.lower.clone();
        let forms = self.forms.clone();
        let (scale, moments) = match &self.weight {
            Weight::Gaussian { precision } => {
                let f = SpdFactor::new(precision)?;
                // Y = L⁻ᵀ Z has covariance P⁻¹ when P = LLᵀ.
                let lt_inv = f
                    .lower()
                    .transpose()
                    .try_inverse()
                    .ok_or_else(|| Error::Matrix("triangular factor is singular".into()))?;
                let scale = (0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * f.ln_determinant()).exp();
                let m = chunked_moments(seed, samples, |rng| {
                    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let y = &lt_inv * z;
                    if (0..d).any(|i| !(y[i] > lower[i])) {
                        return 0.0;
                    }
                    forms_product(&forms, y.as_slice())
                });
                (scale, m)
            }
            Weight::Exponential { rate } => {
                let rate: Vec<f64> = rate.iter().copied().collect();
                let scale = (0..d).map(|i| (-rate[i] * lower[i]).exp() / rate[i]).product::<f64>();
                let m = chunked_moments(seed, samples, |rng| {
                    let y: Vec<f64> = (0..d)
                        .map(|i| {
                            let e: f64 = Exp1.sample(rng);
                            lower[i] + e / rate[i]
                        })
                        .collect();
                    forms_product(&forms, &y)
                });
                (scale, m)
            }
        };
        Ok(IntegralEstimate {
            value: scale * moments.mean(),
            error: scale * moments.std_err(),
            method: IntegralMethod::MonteCarlo,
        })
    }
}

impl Prepared {
    fn quad_opts(&self, rel_tol: f64) -> QuadOptions {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol,
            max_subdivisions: 400,
        }
    }

    // Integral over variables level.. given the earlier coordinates in y.
    fn level(&self, l: usize, y: [f64; Y_CAP], rel_tol: f64, err: &mut f64) -> f64 {
        if l == self.d {
            return self.integrand(&y[..self.d]);
        }
        if l >= self.free_from {
            if let Some(v) = self.closed_form_tail(l, &y) {
                return v;
            }
        }
        let (lo, hi) = self.window(l, &y);
        if !(hi > lo) {
            return 0.0;
        }
        let breaks: Vec<f64> = self.breaks_at[l]
            .iter()
            .map(|&m| {
                let c = &self.forms[m].coefficients;
                -(0..l).map(|j| c[j] * y[j]).sum::<f64>() / c[l]
            })
            .collect();
        let mut inner_err = 0.0;
        let r = integrate_with_breaks(
            |t| {
                let mut yy = y;
                yy[l] = t;
                self.level(l + 1, yy, rel_tol, &mut inner_err)
            },
            lo,
            hi,
            &breaks,
            self.quad_opts(rel_tol),
        );
        if l == 0 {
            *err += r.error;
        }
        r.value
    }

    fn window(&self, l: usize, y: &[f64; Y_CAP]) -> (f64, f64) {
        match &self.kind {
            PreparedWeight::Gaussian { marginal, .. } => {
                let q = &marginal[l];
                let qll = q[(l, l)];
                let mu = -(0..l).map(|j| q[(l, j)] * y[j]).sum::<f64>() / qll;
                let sd = 1.0 / qll.sqrt();
                let lo = (mu - GAUSS_WINDOW * sd).max(self.lower[l]);
                let hi = mu.max(self.lower[l]) + GAUSS_WINDOW * sd;
                (lo, hi)
            }
            PreparedWeight::Exponential { rate } => {
                (self.lower[l], self.lower[l] + EXP_WINDOW / rate[l])
            }
        }
    }

    // Variables from `l` on appear in no form. Returns the integral over them
    // when it has a closed form.
    fn closed_form_tail(&self, l: usize, y: &[f64; Y_CAP]) -> Option<f64> {
        match &self.kind {
            PreparedWeight::Exponential { rate } => {
                // separable: the free coordinates contribute exp(-v q)/v each,
                // and the earlier ones their exponential factor.
                let mut ln = 0.0;
                for j in 0..l {
                    ln -= rate[j] * y[j];
                }
                for j in l..self.d {
                    ln += -rate[j] * self.lower[j] - rate[j].ln();
                }
                Some(self.forms_at(&y[..self.d]) * ln.exp())
            }
            PreparedWeight::Gaussian { precision, .. } => {
                if l != self.d - 1 {
                    return None;
                }
                let pll = precision[(l, l)];
                let mu = -(0..l).map(|j| precision[(l, j)] * y[j]).sum::<f64>() / pll;
                let mut yy = *y;
                yy[l] = mu;
                let quad: f64 = (0..self.d)
                    .map(|i| (0..self.d).map(|j| yy[i] * precision[(i, j)] * yy[j]).sum::<f64>())
                    .sum();
                let tail = if self.lower[l] == f64::NEG_INFINITY {
                    1.0
                } else {
                    normal_sf((self.lower[l] - mu) * pll.sqrt())
                };
                let gauss = (2.0 * std::f64::consts::PI / pll).sqrt() * tail;
                Some(self.forms_at(&yy[..self.d]) * (-quad / 2.0).exp() * gauss)
            }
        }
    }

    // Forms only involve variables before free_from, so any value of the free
    // coordinates gives the same product.
    fn forms_at(&self, y: &[f64]) -> f64 {
        forms_product(&self.forms, y)
    }

    fn integrand(&self, y: &[f64]) -> f64 {
        let w = match &self.kind {
            PreparedWeight::Gaussian { precision, .. } => {
                let v = DVector::from_column_slice(y);
                (-v.dot(&(precision * &v)) / 2.0).exp()
            }
            PreparedWeight::Exponential { rate } => (-rate.iter().zip(y).map(|(r, v)| r * v).sum::<f64>()).exp(),
        };
        if w == 0.0 {
            return 0.0;
        }
        w * forms_product(&self.forms, y)
    }
}

/// Draw a standard Kotz Type I vector with parameter `alpha`:
/// independent `Y_i = S_i √(2 G_i)` with `G_i ~ Gamma(α_i, 1)`.
pub fn sample_standard_kotz<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .map(|&a| {
            let g: f64 = rand_distr::Gamma::new(a, 1.0).expect("positive shape").sample(rng);
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * (2.0 * g).sqrt()
        })
        .collect()
}

/// `P(D·Y* > q)` for `Y*` standard Kotz with parameter `alpha`, by Monte Carlo.
pub fn kotz_orthant_probability_mc(
    d: &DMatrix<f64>,
    alpha: &[f64],
    lower: &[f64],
    samples: u64,
    seed: u64,
) -> IntegralEstimate {
    let n = alpha.len();
    let m = chunked_moments(seed, samples, |rng| {
        let ys = DVector::from_vec(sample_standard_kotz(rng, alpha));
        let y = d * ys;
        if (0..n).all(|i| y[i] > lower[i]) {
            1.0
        } else {
            0.0
        }
    });
    IntegralEstimate {
        value: m.mean(),
        error: m.std_err(),
        method: IntegralMethod::MonteCarlo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gauss(p: &[f64], d: usize, lower: Vec<f64>, forms: Vec<LinearForm>) -> GaussianOrthantIntegral {
        GaussianOrthantIntegral::new(DMatrix::from_row_slice(d, d, p), lower, forms).unwrap()
    }

    #[test]
    fn one_dimensional_gaussian() {
        let s = 2.5;
        let full = gauss(&[s], 1, vec![f64::NEG_INFINITY], vec![]).quadrature(1e-10).unwrap();
        assert_relative_eq!(full.value, (2.0 * PI / s).sqrt(), max_relative = 1e-12);
        let half = gauss(&[s], 1, vec![0.0], vec![]).quadrature(1e-10).unwrap();
        assert_relative_eq!(half.value, 0.5 * (2.0 * PI / s).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_second_moment() {
        // ∫ |c y|² e^{-σ y²/2} dy = c² √(2π) σ^{-3/2}
        let (rho, a2): (f64, f64) = (0.5, 1.5);
        let var = 1.0 - rho * rho;
        let c = 1.0 / var.sqrt();
        let form = LinearForm {
            coefficients: vec![c],
            exponent: 2.0 * a2 - 1.0,
        };
        let g = gauss(&[1.0 / var], 1, vec![f64::NEG_INFINITY], vec![form]);
        let v = g.quadrature(1e-10).unwrap().value;
        assert_relative_eq!(v, (2.0 * PI * var).sqrt(), max_relative = 1e-9);
        let mc = g.monte_carlo(2_000_000, 1).unwrap();
        assert!((mc.value - v).abs() < 4.0 * mc.error);
    }

    #[test]
    fn bivariate_orthant_probability() {
        // P(Y > 0) for correlation r is 1/4 + asin(r)/(2π).
        let r: f64 = 0.3;
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        let p = cov.try_inverse().unwrap();
        let g = GaussianOrthantIntegral::new(p.clone(), vec![0.0, 0.0], vec![]).unwrap();
        let norm = 2.0 * PI * (1.0 - r * r).sqrt();
        let v = g.quadrature(1e-10).unwrap().value / norm;
        assert_relative_eq!(v, 0.25 + r.asin() / (2.0 * PI), max_relative = 1e-8);
    }

    #[test]
    fn trivariate_with_forms_matches_mc() {
        let p = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 1.5, 0.4, -0.2, 0.4, 1.2]);
        let forms = vec![
            LinearForm {
                coefficients: vec![1.0, -0.5, 0.0],
                exponent: 1.0,
            },
            LinearForm {
                coefficients: vec![0.0, 0.7, 0.2],
                exponent: -0.4,
            },
        ];
        let g = GaussianOrthantIntegral::new(p, vec![-0.3, f64::NEG_INFINITY, 0.1], forms).unwrap();
        let q = g.quadrature(1e-8).unwrap();
        let mc = g.monte_carlo(4_000_000, 3).unwrap();
        assert!((q.value - mc.value).abs() < 4.0 * mc.error, "{q:?} {mc:?}");
    }

    #[test]
    fn exponential_product() {
        let e = ExponentialOrthantIntegral::new(
            DVector::from_vec(vec![1.0 / 2f64.sqrt(); 2]),
            vec![0.0, 0.0],
            vec![],
        )
        .unwrap();
        assert_relative_eq!(e.quadrature(1e-10).unwrap().value, 2.0, max_relative = 1e-12);
        assert!(matches!(
            ExponentialOrthantIntegral::new(DVector::from_vec(vec![1.0, -0.1]), vec![0.0, 0.0], vec![]),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn exponential_with_form_matches_mc() {
        let form = LinearForm {
            coefficients: vec![1.0, -1.0],
            exponent: 1.0,
        };
        let e = ExponentialOrthantIntegral::new(DVector::from_vec(vec![1.0, 2.0]), vec![0.0, 0.0], vec![form]).unwrap();
        // E|X - Y| = EX + EY - 2E min(X, Y) = 5/6 for X ~ Exp(1), Y ~ Exp(2); times 1/2
        let v = e.quadrature(1e-10).unwrap().value;
        assert_relative_eq!(v, 5.0 / 12.0, max_relative = 1e-9);
        let mc = e.monte_carlo(1_000_000, 9).unwrap();
        assert!((mc.value - v).abs() < 4.0 * mc.error);
    }

    #[test]
    fn standard_kotz_squares_are_gamma() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| sample_standard_kotz(&mut rng, &[1.5])[0].powi(2)).sum::<f64>() / n as f64;
        // E Y² = 2α
        assert!((mean - 3.0).abs() < 0.05);
    }
}
