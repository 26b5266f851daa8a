//! Exact samplers and Monte Carlo estimators.
//!
//! `U ~ SD(k, α)` is drawn as `U_i = S_i √(G_i / ΣG_j)` with independent
//! `G_i ~ Gamma(α_i, 1)` and fair random signs `S_i`.
//!
//! Estimators split the sample into chunks of [`CHUNK`] draws. Chunk `c`
//! uses the ChaCha stream `c` of the given seed and chunk results are merged
//! in stream order, so estimates are bit-identical for any thread count.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlphaVector, ModelSpec};
use crate::qp::{solve, QpProblem};
use crate::special::gamma_q;

/// Draws per parallel chunk.
pub const CHUNK: u64 = 1 << 16;

/// Conditioning hits below which [`conditional_excess`] refuses to answer.
pub const MIN_CONDITIONING_HITS: u64 = 500;

/// A reproducible random stream: a 64-bit seed and a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

/// Run `f(rng, count)` on consecutive chunks of `n` draws, returning the
/// per-chunk results in stream order.
pub fn chunked<T, F>(seed: u64, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n - c * CHUNK);
            let mut rng = RngStream::new(seed, c).rng();
            f(&mut rng, count)
        })
        .collect()
}

/// Sample mean and variance accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
    /// Number of non-zero draws.
    pub nonzero: u64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
        if v != 0.0 {
            self.nonzero += 1;
        }
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.nonzero += o.nonzero;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq / n - m * m) * n / (n - 1.0)).max(0.0)
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Moments of `f(rng)` over `n` draws.
pub fn chunked_moments<F>(seed: u64, n: u64, f: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let parts = chunked(seed, n, |rng, count| {
        let mut m = Moments::default();
        for _ in 0..count {
            m.push(f(rng));
        }
        m
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Pre-built `Gamma(α_i, 1)` samplers for one `α`.
#[derive(Debug, Clone)]
pub struct SdSampler {
    gammas: Vec<Gamma<f64>>,
}

impl SdSampler {
    pub fn new(alpha: &AlphaVector) -> Self {
        Self {
            gammas: alpha
                .values()
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("alpha entries are positive"))
                .collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let g: Vec<f64> = self.gammas.iter().map(|d| d.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        g.iter()
            .map(|&gi| {
                let v = (gi / total).sqrt();
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }
}

/// `n` draws of `U ~ SD(k, α)`.
pub fn sample_sd<R: Rng + ?Sized>(alpha: &AlphaVector, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let s = SdSampler::new(alpha);
    (0..n).map(|_| s.sample(rng)).collect()
}

/// Draws `X = R·AᵀU`, optionally with `R` conditioned on `R > r0`.
#[derive(Debug, Clone)]
pub struct GsdSampler {
    sd: SdSampler,
    at: DMatrix<f64>,
    spec: ModelSpec,
}

impl GsdSampler {
    pub fn new(spec: &ModelSpec) -> Self {
        Self {
            sd: SdSampler::new(&spec.alpha),
            at: spec.mixing.a().transpose(),
            spec: spec.clone(),
        }
    }

    fn compose(&self, r: f64, u: Vec<f64>) -> DVector<f64> {
        (&self.at * DVector::from_vec(u)) * r
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let r = self.spec.radial.sample(rng);
        self.compose(r, self.sd.sample(rng))
    }

    pub fn sample_beyond<R: Rng + ?Sized>(&self, rng: &mut R, r0: f64) -> DVector<f64> {
        let r = self.spec.radial.sample_beyond(rng, r0);
        self.compose(r, self.sd.sample(rng))
    }
}

/// `n` draws of the GSD vector `X = R·AᵀU`.
pub fn sample_gsd<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R, n: usize) -> Vec<DVector<f64>> {
    let s = GsdSampler::new(spec);
    (0..n).map(|_| s.sample(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    Crude,
    /// Sample `R` conditioned on `R > (1-δ)·r_min`, where `r_min` is the
    /// smallest radius compatible with the event, and weight by `F̄`.
    RadialTilt { delta: f64 },
}

impl Estimator {
    pub const DEFAULT_DELTA: f64 = 0.2;

    pub fn tilt() -> Self {
        Estimator::RadialTilt {
            delta: Self::DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub hits: u64,
    pub estimator: Estimator,
    pub seed: u64,
    /// Radius the sampler was conditioned on (0 for crude).
    pub tilt_radius: f64,
    /// Set when no sample hit the event: a one-sided 95% bound (rule of three).
    pub upper_bound: Option<f64>,
}

impl McEstimate {
    pub fn relative_std_err(&self) -> f64 {
        if self.p_hat > 0.0 {
            self.std_err / self.p_hat
        } else {
            f64::INFINITY
        }
    }

    pub fn no_hits(&self) -> bool {
        self.hits == 0
    }
}

/// Estimate `P(X > u·b)`.
pub fn mc_tail(spec: &ModelSpec, b: &[f64], u: f64, n: u64, seed: u64, estimator: Estimator) -> Result<McEstimate> {
    if !(u >= 0.0) {
        return Err(Error::arg(format!("u must be non-negative, got {u}")));
    }
    let t: Vec<f64> = b.iter().map(|v| u * v).collect();
    mc_tail_at(spec, &t, n, seed, estimator)
}

/// Estimate `P(X > t)` for a threshold vector `t`.
pub fn mc_tail_at(spec: &ModelSpec, t: &[f64], n: u64, seed: u64, estimator: Estimator) -> Result<McEstimate> {
    let k = spec.dim();
    if t.len() != k {
        return Err(Error::arg(format!("threshold has {} entries, expected {k}", t.len())));
    }
    if n < 1000 {
        return Err(Error::arg(format!("need at least 1000 samples, got {n}")));
    }
    let r0 = match estimator {
        Estimator::Crude => 0.0,
        Estimator::RadialTilt { delta } => {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::arg(format!("tilt margin δ must lie in [0, 1), got {delta}")));
            }
            if t.iter().any(|&v| v > 0.0) {
                let p = QpProblem::from_slices(spec.mixing.sigma(), t)?;
                (1.0 - delta) * solve(&p)?.norm_bi
            } else {
                0.0
            }
        }
    };
    let weight = if r0 > 0.0 { spec.radial.survival(r0)? } else { 1.0 };
    let sampler = GsdSampler::new(spec);
    let tv = DVector::from_column_slice(t);
    let parts = chunked(seed, n, |rng, count| {
        let mut hits = 0u64;
        for _ in 0..count {
            let x = sampler.sample_beyond(rng, r0);
            if x.iter().zip(tv.iter()).all(|(a, b)| a > b) {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = parts.iter().sum();
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / (n as f64 - 1.0)).sqrt();
    Ok(McEstimate {
        p_hat: weight * p,
        std_err: weight * se,
        n_samples: n,
        hits,
        estimator,
        seed,
        tilt_radius: r0,
        upper_bound: (hits == 0).then(|| weight * 3.0 / n as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessPoint {
    pub x: f64,
    pub threshold: f64,
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalExcess {
    pub u: f64,
    pub hits: u64,
    pub n_samples: u64,
    pub points: Vec<ExcessPoint>,
}

/// Estimate `P(X₂ > ρu + x·√(u/w(u)) | X₁ > u)` for a bivariate model,
/// with `ρ = Σ₁₂`. The radius is always sampled beyond `u/√Σ₁₁`, the
/// smallest radius compatible with `X₁ > u`.
pub fn conditional_excess(spec: &ModelSpec, u: f64, x_grid: &[f64], n: u64, seed: u64) -> Result<ConditionalExcess> {
    if spec.dim() != 2 {
        return Err(Error::arg("conditional excess needs a bivariate model"));
    }
    if !(u > 0.0) {
        return Err(Error::arg(format!("u must be positive, got {u}")));
    }
    let sigma = spec.mixing.sigma();
    let rho = sigma[(0, 1)];
    let r0 = u / sigma[(0, 0)].sqrt();
    let w = spec.radial.hazard(u);
    let scale = (u / w).sqrt();
    let thresholds: Vec<f64> = x_grid.iter().map(|&x| rho * u + x * scale).collect();
    let sampler = GsdSampler::new(spec);
    let m = thresholds.len();
    let parts = chunked(seed, n, |rng, count| {
        let mut hits = 0u64;
        let mut above = vec![0u64; m];
        for _ in 0..count {
            let x = sampler.sample_beyond(rng, r0);
            if x[0] > u {
                hits += 1;
                for (a, &t) in above.iter_mut().zip(&thresholds) {
                    if x[1] > t {
                        *a += 1;
                    }
                }
            }
        }
        (hits, above)
    });
    let mut hits = 0;
    let mut above = vec![0u64; m];
    for (h, a) in &parts {
        hits += h;
        for (t, v) in above.iter_mut().zip(a) {
            *t += v;
        }
    }
    if hits < MIN_CONDITIONING_HITS {
        return Err(Error::InsufficientSamples {
            hits,
            required: MIN_CONDITIONING_HITS,
        });
    }
    let points = x_grid
        .iter()
        .zip(&thresholds)
        .zip(&above)
        .map(|((&x, &threshold), &a)| {
            let p = a as f64 / hits as f64;
            ExcessPoint {
                x,
                threshold,
                estimate: p,
                std_err: (p * (1.0 - p) / hits as f64).sqrt(),
            }
        })
        .collect();
    Ok(ConditionalExcess {
        u,
        hits,
        n_samples: n,
        points,
    })
}

/// `P(√(1-ρ²)·Y > x)` for symmetric `Y` with `Y² ~ Gamma(α, 1/2)`.
pub fn conditional_limit(rho: f64, alpha: f64, x: f64) -> f64 {
    let t = x / (1.0 - rho * rho).sqrt();
    let half = 0.5 * gamma_q(alpha, t * t / 2.0);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof::{ks_p_value, ks_statistic};
    use crate::model::MixingMatrix;
    use crate::radial::RadialLaw;
    use crate::special::{gamma_p, normal_sf};
    use statrs::distribution::{Beta, ContinuousCDF};

    fn alpha(v: &[f64]) -> AlphaVector {
        AlphaVector::new(v.to_vec()).unwrap()
    }

    fn gaussian2() -> ModelSpec {
        ModelSpec::new(alpha(&[0.5, 0.5]), MixingMatrix::identity(2), RadialLaw::chi(2.0)).unwrap()
    }

    #[test]
    fn unit_norm() {
        let mut rng = RngStream::new(1, 0).rng();
        for u in sample_sd(&alpha(&[0.3, 1.0, 2.5]), &mut rng, 10_000) {
            let n: f64 = u.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_coordinate_moments() {
        let n = 100_000;
        for (a, want) in [(vec![0.5, 0.5], 0.5), (vec![2.0, 3.0], 0.4)] {
            let mut rng = RngStream::new(2, 0).rng();
            let xs: Vec<f64> = sample_sd(&alpha(&a), &mut rng, n).iter().map(|u| u[0] * u[0]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - want).abs() < 3.0 * (var / n as f64).sqrt(), "{a:?}: {mean}");
        }
    }

    #[test]
    fn squared_coordinates_are_beta() {
        let a = alpha(&[1.0, 1.5]);
        let mut rng = RngStream::new(3, 0).rng();
        let mut xs: Vec<f64> = sample_sd(&a, &mut rng, 20_000).iter().map(|u| u[1] * u[1]).collect();
        let beta = Beta::new(1.5, 1.0).unwrap();
        let d = ks_statistic(&mut xs, |x| beta.cdf(x));
        assert!(ks_p_value(d, 20_000) > 0.01);
    }

    #[test]
    fn standard_kotz_coordinates_are_gamma() {
        let spec = ModelSpec::standard_kotz(alpha(&[1.0, 0.7]), MixingMatrix::identity(2)).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let mut xs: Vec<f64> = sample_gsd(&spec, &mut rng, 20_000).iter().map(|x| x[1] * x[1]).collect();
        let d = ks_statistic(&mut xs, |x| gamma_p(0.7, x / 2.0));
        assert!(ks_p_value(d, 20_000) > 0.01);
    }

    #[test]
    fn gaussian_orthant_and_symmetry() {
        let spec = gaussian2();
        let e = mc_tail(&spec, &[1.0, 1.0], 1.0, 400_000, 5, Estimator::Crude).unwrap();
        let want = normal_sf(1.0).powi(2);
        assert!((e.p_hat - want).abs() < 3.0 * e.std_err, "{e:?}");
        let e = mc_tail(&spec, &[1.0, 1.0], 0.0, 100_000, 6, Estimator::Crude).unwrap();
        assert!((e.p_hat - 0.25).abs() < 3.0 * e.std_err);

        let mut rng = RngStream::new(7, 0).rng();
        let xs = sample_gsd(&spec, &mut rng, 100_000);
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / 1e5;
        assert!(mean.abs() < 3.0 / 1e5f64.sqrt());
    }

    #[test]
    fn tilt_agrees_with_crude() {
        let spec = ModelSpec::standard_kotz(alpha(&[1.0, 1.5]), MixingMatrix::identity(2)).unwrap();
        let c = mc_tail(&spec, &[1.0, 0.5], 2.0, 400_000, 8, Estimator::Crude).unwrap();
        let t = mc_tail(&spec, &[1.0, 0.5], 2.0, 400_000, 9, Estimator::tilt()).unwrap();
        let se = (c.std_err.powi(2) + t.std_err.powi(2)).sqrt();
        assert!((c.p_hat - t.p_hat).abs() < 3.0 * se, "{c:?} {t:?}");
        assert!(t.std_err < c.std_err);
    }

    #[test]
    fn zero_hits_rule_of_three() {
        let e = mc_tail(&gaussian2(), &[1.0, 1.0], 8.0, 10_000, 1, Estimator::Crude).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.upper_bound, Some(3e-4));
    }

    #[test]
    fn reproducible() {
        let spec = gaussian2();
        let a = mc_tail(&spec, &[1.0, 1.0], 1.5, 200_000, 42, Estimator::tilt()).unwrap();
        let b = mc_tail(&spec, &[1.0, 1.0], 1.5, 200_000, 42, Estimator::tilt()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_excess_examples() {
        let spec = gaussian2();
        let r = conditional_excess(&spec, 2.0, &[-6.0, 0.0], 200_000, 3).unwrap();
        assert!(r.points[0].estimate > 0.999);
        assert!((r.points[1].estimate - 0.5).abs() < 4.0 * r.points[1].std_err);
        assert_eq!(conditional_limit(0.0, 0.5, 0.0), 0.5);
        // ρ = 0.5, α₂ = 1.5, x = 1: P(Y > 1/√0.75) = Q(1.5, 1/1.5)/2
        let v = conditional_limit(0.5, 1.5, 1.0);
        assert!((v - 0.5 * gamma_q(1.5, 1.0 / 1.5)).abs() < 1e-15);
        assert!(matches!(
            conditional_excess(&spec, 2.0, &[0.0], 1000, 3),
            Err(Error::InsufficientSamples { .. })
        ));
    }
}
