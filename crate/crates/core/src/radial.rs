//! Radial laws in the Gumbel max-domain of attraction.
//!
//! Every built-in law is a power transform of a gamma variable: there are
//! constants `shape`, `scale`, `power` with `scale·R^power ~ Gamma(shape, 1)`.
//! That gives closed forms for the survival function, density, quantile and
//! exact samplers (including samplers conditioned on `R > r0`).
//!
//! The scaling function is the von Mises choice `w = f / F̄`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{inv_gamma_q_ln, ln_gamma_pdf, ln_gamma_q};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialLaw {
    /// `R²` is chi-squared with `dof` degrees of freedom.
    Chi { dof: f64 },
    /// Radius of a Kotz Type I GSD vector with generator `c·x^N·exp(-r·x^s)`
    /// and Dirichlet parameter sum `alpha_bar`.
    Kotz {
        #[serde(rename = "N")]
        n: f64,
        r: f64,
        s: f64,
        alpha_bar: f64,
    },
    /// `F̄(u) = exp(-c·u^tau)`.
    WeibullTail { c: f64, tau: f64 },
}

/// `scale·R^power ~ Gamma(shape, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaForm {
    pub shape: f64,
    pub scale: f64,
    pub power: f64,
}

impl RadialLaw {
    pub fn chi(dof: f64) -> Self {
        RadialLaw::Chi { dof }
    }

    /// Radius of the standardised Kotz vector (`N = 0`, `2r = s = 1`).
    pub fn standard_kotz(alpha_bar: f64) -> Self {
        RadialLaw::Kotz {
            n: 0.0,
            r: 0.5,
            s: 1.0,
            alpha_bar,
        }
    }

    pub fn weibull_tail(c: f64, tau: f64) -> Self {
        RadialLaw::WeibullTail { c, tau }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialLaw::Chi { dof } => dof > 0.0 && dof.is_finite(),
            RadialLaw::Kotz { n, r, s, alpha_bar } => {
                r > 0.0 && s > 0.0 && alpha_bar > 0.0 && n > -alpha_bar && n.is_finite()
            }
            RadialLaw::WeibullTail { c, tau } => c > 0.0 && tau > 0.0 && c.is_finite() && tau.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invariant {
                name: "radial.params",
                detail: format!("{self:?}"),
            })
        }
    }

    pub fn gamma_form(&self) -> GammaForm {
        match *self {
            RadialLaw::Chi { dof } => GammaForm {
                shape: dof / 2.0,
                scale: 0.5,
                power: 2.0,
            },
            RadialLaw::Kotz { n, r, s, alpha_bar } => GammaForm {
                shape: (n + alpha_bar) / s,
                scale: r,
                power: 2.0 * s,
            },
            RadialLaw::WeibullTail { c, tau } => GammaForm {
                shape: 1.0,
                scale: c,
                power: tau,
            },
        }
    }

    fn check_arg(u: f64) -> Result<()> {
        if u < 0.0 || u.is_nan() {
            Err(Error::arg(format!("radius must be non-negative, got {u}")))
        } else {
            Ok(())
        }
    }

    /// `ln F̄(u)`.
    pub fn ln_survival(&self, u: f64) -> Result<f64> {
        Self::check_arg(u)?;
        Ok(self.ln_survival_unchecked(u))
    }

    pub fn survival(&self, u: f64) -> Result<f64> {
        self.ln_survival(u).map(f64::exp)
    }

    pub(crate) fn ln_survival_unchecked(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let g = self.gamma_form();
        ln_gamma_q(g.shape, g.scale * u.powf(g.power))
    }

    pub fn ln_density(&self, u: f64) -> Result<f64> {
        Self::check_arg(u)?;
        Ok(self.ln_density_unchecked(u))
    }

    pub fn density(&self, u: f64) -> Result<f64> {
        self.ln_density(u).map(f64::exp)
    }

    pub(crate) fn ln_density_unchecked(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let g = self.gamma_form();
        let t = g.scale * u.powf(g.power);
        (g.power * g.scale).ln() + (g.power - 1.0) * u.ln() + ln_gamma_pdf(g.shape, t)
    }

    /// Hazard rate `f(u)/F̄(u)` without the tail-region check.
    pub fn hazard(&self, u: f64) -> f64 {
        match *self {
            RadialLaw::WeibullTail { c, tau } => c * tau * u.powf(tau - 1.0),
            _ => (self.ln_density_unchecked(u) - self.ln_survival_unchecked(u)).exp(),
        }
    }

    /// Smallest `u` with `F̄(u) < 0.1`; the scaling function is only
    /// defined from here on.
    pub fn calibration_min(&self) -> f64 {
        self.inverse_survival_ln(0.1f64.ln())
    }

    /// Default top of the calibrated grid: `ln F̄(u_hi) = -10⁴`.
    ///
    /// The second-order Gumbel error at `x` is of order `e^{-x} x²/|ln F̄(u)|`
    /// for the built-in laws, which is what pushes the top this far out.
    pub fn calibration_max(&self) -> f64 {
        self.inverse_survival_ln(-1.0e4)
    }

    /// The scaling function `w(u) = f(u)/F̄(u)` on the tail region.
    pub fn scaling_w(&self, u: f64) -> Result<f64> {
        let u_min = self.calibration_min();
        if !(u >= u_min) {
            return Err(Error::OutOfDomain(format!(
                "u = {u} (below u_min = {u_min:.6})"
            )));
        }
        Ok(self.hazard(u))
    }

    /// `u` with `ln F̄(u) = ln_p`.
    pub fn inverse_survival_ln(&self, ln_p: f64) -> f64 {
        let g = self.gamma_form();
        let t = inv_gamma_q_ln(g.shape, ln_p);
        (t / g.scale).powf(1.0 / g.power)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::arg(format!("quantile level must lie in [0, 1), got {p}")));
        }
        Ok(self.inverse_survival_ln((-p).ln_1p()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.gamma_form();
        let t = Gamma::new(g.shape, 1.0)
            .expect("validated gamma shape")
            .sample(rng);
        (t / g.scale).powf(1.0 / g.power)
    }

    /// Sample `R` conditioned on `R > r0`.
    pub fn sample_beyond<R: Rng + ?Sized>(&self, rng: &mut R, r0: f64) -> f64 {
        if r0 <= 0.0 {
            return self.sample(rng);
        }
        let g = self.gamma_form();
        let t0 = g.scale * r0.powf(g.power);
        let t = sample_gamma_tail(rng, g.shape, t0);
        (t / g.scale).powf(1.0 / g.power)
    }
}

/// Exact draw from `Gamma(shape, 1)` conditioned on exceeding `t0`.
///
/// Beyond the mode the conditional density is dominated by a shifted
/// exponential with rate `1 - (shape-1)/t0`, which gives an acceptance
/// rate close to one far in the tail. Below the mode plain rejection from
/// the unconditioned law is used.
pub fn sample_gamma_tail<R: Rng + ?Sized>(rng: &mut R, shape: f64, t0: f64) -> f64 {
    let mode = (shape - 1.0).max(0.0);
    if t0 <= mode + 1.0 {
        let gamma = Gamma::new(shape, 1.0).expect("validated gamma shape");
        loop {
            let t = gamma.sample(rng);
            if t > t0 {
                return t;
            }
        }
    }
    let rate = if shape > 1.0 { 1.0 - (shape - 1.0) / t0 } else { 1.0 };
    loop {
        let e: f64 = Exp1.sample(rng);
        let t = t0 + e / rate;
        // log acceptance: (shape-1) ln(t/t0) - (1-rate)(t-t0) ≤ 0
        let log_acc = (shape - 1.0) * (t / t0).ln() - (1.0 - rate) * (t - t0);
        let v: f64 = rng.random();
        if v.ln() <= log_acc {
            return t;
        }
    }
}

/// Grids and tuning for [`mda_certificate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub x_grid: Vec<f64>,
    pub u_grid: Vec<f64>,
    /// Ratio `r > 1` in `(u w(u))^η F̄(r u) / F̄(u)`.
    pub r: f64,
    pub eta: f64,
    /// Threshold the tail-ratio sequence must fall below at the top.
    pub epsilon: f64,
    /// Gumbel-limit tolerance at the top of the `u` grid.
    pub gumbel_tol: f64,
    /// Upper end of the `s` range for the envelope fit.
    pub s_max: f64,
}

impl CertificateParams {
    /// Geometric `u` grid of 40 points on `[u_min, u_hi]`, `x ∈ [-3, 3]`.
    pub fn default_for(law: &RadialLaw) -> Self {
        let lo = law.calibration_min();
        let hi = law.calibration_max();
        let n = 40;
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        let u_grid = (0..n).map(|i| lo * ratio.powi(i)).collect();
        let x_grid = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
        Self {
            x_grid,
            u_grid,
            r: 1.1,
            eta: 2.0,
            epsilon: 1e-6,
            gumbel_tol: 0.02,
            s_max: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdaCertificate {
    pub law: RadialLaw,
    pub u_top: f64,
    /// `max_x |F̄(u + x/w(u))/F̄(u) - e^{-x}|` at `u_top`.
    pub gumbel_max_deviation: f64,
    pub gumbel_pass: bool,
    /// `(u, (u w(u))^η F̄(r u)/F̄(u))` along the `u` grid.
    pub tail_ratio: Vec<(f64, f64)>,
    pub tail_ratio_pass: bool,
    pub envelope: Option<EnvelopeFit>,
    pub envelope_pass: bool,
    /// `max_x |w(u + x/w(u))/w(u) - 1|` at `u_top`.
    pub self_neglecting_deviation: f64,
    pub pass: bool,
}

/// Finite-`u` diagnostics of the Gumbel max-domain-of-attraction property.
pub fn mda_certificate(law: &RadialLaw, params: &CertificateParams) -> Result<MdaCertificate> {
    law.validate()?;
    if params.u_grid.is_empty() || params.x_grid.is_empty() {
        return Err(Error::arg("certificate grids must be non-empty"));
    }
    if !(params.r > 1.0) {
        return Err(Error::arg("tail ratio needs r > 1"));
    }
    let u_top = params.u_grid.iter().copied().fold(f64::MIN, f64::max);
    let w_top = law.scaling_w(u_top)?;
    let ln_top = law.ln_survival_unchecked(u_top);

    let gumbel_max_deviation = params
        .x_grid
        .iter()
        .map(|&x| {
            let v = law.ln_survival_unchecked((u_top + x / w_top).max(0.0)) - ln_top;
            (v.exp() - (-x).exp()).abs()
        })
        .fold(0.0, f64::max);

    let self_neglecting_deviation = params
        .x_grid
        .iter()
        .map(|&x| (law.hazard(u_top + x / w_top) / w_top - 1.0).abs())
        .fold(0.0, f64::max);

    let mut grid = params.u_grid.clone();
    grid.sort_by(f64::total_cmp);
    let tail_ratio: Vec<(f64, f64)> = grid
        .iter()
        .map(|&u| {
            let w = law.hazard(u);
            let ln_v = params.eta * (u * w).ln() + law.ln_survival_unchecked(params.r * u)
                - law.ln_survival_unchecked(u);
            (u, ln_v.exp())
        })
        .collect();
    let upper = &tail_ratio[tail_ratio.len() / 2..];
    let decreasing = upper.windows(2).all(|p| p[1].1 <= p[0].1);
    let tail_ratio_pass = decreasing && tail_ratio.last().map_or(false, |t| t.1 < params.epsilon);

    let envelope = fit_envelope(law, &grid[grid.len() / 2..], params.s_max);
    let envelope_pass = envelope
        .as_ref()
        .map_or(false, |e| e.c.is_finite() && e.epsilon > 0.0 && e.epsilon < 1.0);
    let gumbel_pass = gumbel_max_deviation < params.gumbel_tol;

    Ok(MdaCertificate {
        law: *law,
        u_top,
        gumbel_max_deviation,
        gumbel_pass,
        tail_ratio,
        tail_ratio_pass,
        envelope,
        envelope_pass,
        self_neglecting_deviation,
        pass: gumbel_pass && tail_ratio_pass && envelope_pass,
    })
}

// Smallest c over a grid of ε such that
// F̄(u + s/w(u))/F̄(u) ≤ c (1 + ε s)^{-1/ε} for all grid u and s ∈ [0, s_max].
fn fit_envelope(law: &RadialLaw, us: &[f64], s_max: f64) -> Option<EnvelopeFit> {
    let s_grid: Vec<f64> = (0..=500).map(|i| s_max * i as f64 / 500.0).collect();
    let ln_ratios: Vec<Vec<f64>> = us
        .iter()
        .map(|&u| {
            let w = law.hazard(u);
            let base = law.ln_survival_unchecked(u);
            s_grid
                .iter()
                .map(|&s| law.ln_survival_unchecked(u + s / w) - base)
                .collect()
        })
        .collect();
    let mut best: Option<EnvelopeFit> = None;
    for k in 1..50 {
        let eps = k as f64 / 50.0;
        let ln_c = ln_ratios
            .iter()
            .flat_map(|row| {
                row.iter()
                    .zip(&s_grid)
                    .map(|(lr, &s)| lr + (eps * s).ln_1p() / eps)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let c = ln_c.exp();
        if c.is_finite() && best.as_ref().map_or(true, |b| c < b.c) {
            best = Some(EnvelopeFit { c, epsilon: eps });
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRatioPoint {
    pub u: f64,
    pub ln_ratio: f64,
    pub ratio: f64,
}

/// `F̄₁(u)/F̄₂(u)` along `u_grid`, formed in log space.
pub fn tail_equivalence_ratio(
    law1: &RadialLaw,
    law2: &RadialLaw,
    u_grid: &[f64],
) -> Result<Vec<TailRatioPoint>> {
    law1.validate()?;
    law2.validate()?;
    u_grid
        .iter()
        .map(|&u| {
            let ln_ratio = law1.ln_survival(u)? - law2.ln_survival(u)?;
            Ok(TailRatioPoint {
                u,
                ln_ratio,
                ratio: ln_ratio.exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_to_infinity, QuadOptions};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

    fn builtins() -> Vec<RadialLaw> {
        vec![
            RadialLaw::chi(2.0),
            RadialLaw::chi(3.0),
            RadialLaw::chi(5.0),
            RadialLaw::standard_kotz(1.25),
            RadialLaw::Kotz {
                n: 1.0,
                r: 1.0,
                s: 2.0,
                alpha_bar: 1.5,
            },
            RadialLaw::weibull_tail(1.0, 1.0),
            RadialLaw::weibull_tail(0.5, 2.0),
            RadialLaw::weibull_tail(1.0, 0.5),
        ]
    }

    #[test]
    fn survival_examples() {
        let u = (2.0 * std::f64::consts::LN_2).sqrt();
        assert_relative_eq!(RadialLaw::chi(2.0).survival(u).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            RadialLaw::weibull_tail(1.0, 1.0).survival(1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-14
        );
        assert!(RadialLaw::chi(2.0).survival(-1.0).is_err());
        assert_eq!(RadialLaw::chi(2.0).survival(0.0).unwrap(), 1.0);
    }

    #[test]
    fn chi_survival_matches_gaussian_asymptote() {
        // F̄(u) ≈ u^{k-2} e^{-u²/2} / (2^{k/2-1} Γ(k/2)), k = 4
        let u: f64 = 6.0;
        let approx = u * u * (-u * u / 2.0).exp() / 2.0;
        let exact = RadialLaw::chi(4.0).survival(u).unwrap();
        // Exact: e^{-u²/2}(1 + u²/2), so the ratio is 1 + 2/u² = 19/18 here.
        assert_relative_eq!(exact, (-18.0f64).exp() * 19.0, max_relative = 1e-12);
        assert_relative_eq!(exact / approx, 19.0 / 18.0, max_relative = 1e-12);
        let far = RadialLaw::chi(4.0).survival(30.0).unwrap() / (900.0 * (-450.0f64).exp() / 2.0);
        assert!((far - 1.0).abs() < 0.005);
    }

    #[test]
    fn scaling_function_closed_forms() {
        let chi2 = RadialLaw::chi(2.0);
        for &u in &[2.5, 5.0, 17.0] {
            assert_relative_eq!(chi2.scaling_w(u).unwrap(), u, max_relative = 1e-12);
        }
        let gauss = RadialLaw::weibull_tail(0.5, 2.0);
        assert_relative_eq!(gauss.scaling_w(6.0).unwrap(), 6.0, max_relative = 1e-14);
        assert!(matches!(chi2.scaling_w(0.1), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn kotz_scaling_against_quadrature() {
        // Kotz(0, 1/2, 1, ᾱ = 1.25): density from the generator, survival by quadrature.
        let law = RadialLaw::standard_kotz(1.25);
        let ab: f64 = 1.25;
        let dens = |r: f64| {
            // f(r) = 2^{1-ᾱ} r^{2ᾱ-1} e^{-r²/2} / Γ(ᾱ)
            (2f64.powf(1.0 - ab) * r.powf(2.0 * ab - 1.0) * (-r * r / 2.0).exp())
                / crate::special::ln_gamma(ab).exp()
        };
        let u = 8.0;
        let sf = integrate_to_infinity(dens, u, QuadOptions::with_rel_tol(1e-13)).value;
        assert_relative_eq!(law.survival(u).unwrap(), sf, max_relative = 1e-10);
        let w = dens(u) / sf;
        assert_relative_eq!(law.scaling_w(u).unwrap(), w, max_relative = 1e-9);
        assert!((w / u - 1.0).abs() < 0.05);
    }

    #[test]
    fn density_is_minus_survival_derivative() {
        for law in builtins() {
            let lo = law.calibration_min();
            for &u in &[lo, 1.5 * lo, 2.0 * lo] {
                let h = 1e-5 * u;
                let d = (law.survival(u - h).unwrap() - law.survival(u + h).unwrap()) / (2.0 * h);
                assert_relative_eq!(d, law.density(u).unwrap(), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn w_positive_and_lambda_increasing() {
        for law in builtins() {
            let lo = law.calibration_min();
            let hi = law.calibration_max();
            let mut prev = 0.0;
            for i in 0..1000 {
                let u = lo + (hi - lo) * i as f64 / 999.0;
                let w = law.scaling_w(u).unwrap();
                assert!(w > 0.0 && w.is_finite(), "{law:?} at {u}");
                let lambda = u * w;
                assert!(lambda > prev, "{law:?}: λ not increasing at {u}");
                prev = lambda;
            }
        }
    }

    #[test]
    fn certificate_examples() {
        let chi3 = RadialLaw::chi(3.0);
        let mut p = CertificateParams::default_for(&chi3);
        p.u_grid = vec![4.0, 6.0, 8.0];
        p.x_grid = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let c = mda_certificate(&chi3, &p).unwrap();
        // Oracle: R² ~ χ²₃, f_R(u) = 2u f_χ²(u²).
        let chi_sq = ChiSquared::new(3.0).unwrap();
        let sf = |u: f64| chi_sq.sf(u * u);
        let w8 = 16.0 * chi_sq.pdf(64.0) / sf(8.0);
        let oracle = p
            .x_grid
            .iter()
            .map(|&x| (sf(8.0 + x / w8) / sf(8.0) - (-x).exp()).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(c.gumbel_max_deviation, oracle, max_relative = 1e-6);
        // The second-order term x²/(2u²) is still visible at u = 8.
        assert!(c.gumbel_max_deviation > 0.2);

        let expo = RadialLaw::weibull_tail(1.0, 1.0);
        let c = mda_certificate(&expo, &CertificateParams::default_for(&expo)).unwrap();
        // Only the rounding of u_top + x remains.
        assert!(c.gumbel_max_deviation < 1e-10, "{}", c.gumbel_max_deviation);

        let chi2 = RadialLaw::chi(2.0);
        let mut p = CertificateParams::default_for(&chi2);
        p.u_grid = vec![5.0, 10.0, 20.0];
        let c = mda_certificate(&chi2, &p).unwrap();
        let (u, v) = *c.tail_ratio.last().unwrap();
        assert_eq!(u, 20.0);
        assert_relative_eq!(v, 20f64.powi(4) * (-0.105 * 400.0f64).exp(), max_relative = 1e-9);
        assert!(v < 1e-6);
    }

    #[test]
    fn all_builtins_certify_and_self_neglect() {
        for law in builtins() {
            let c = mda_certificate(&law, &CertificateParams::default_for(&law)).unwrap();
            assert!(c.pass, "{law:?}: {c:?}");
            assert!(c.self_neglecting_deviation < 0.05, "{law:?}");
        }
    }

    #[test]
    fn tail_ratios() {
        let grid = [3.0, 6.0, 10.0];
        let same = tail_equivalence_ratio(&RadialLaw::chi(2.0), &RadialLaw::chi(2.0), &grid).unwrap();
        assert!(same.iter().all(|p| p.ratio == 1.0));
        let twin =
            tail_equivalence_ratio(&RadialLaw::chi(2.0), &RadialLaw::weibull_tail(0.5, 2.0), &grid)
                .unwrap();
        assert!(twin.iter().all(|p| (p.ratio - 1.0).abs() < 1e-12));
        let r = tail_equivalence_ratio(&RadialLaw::chi(4.0), &RadialLaw::chi(2.0), &[10.0]).unwrap();
        let scaled = r[0].ratio / 50.0;
        assert!(scaled > 0.9 && scaled < 1.1);
    }

    #[test]
    fn conditional_sampler_matches_survival() {
        let law = RadialLaw::chi(5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r0 = 4.0;
        let n = 200_000;
        let r1 = 4.5;
        let hits = (0..n)
            .filter(|_| {
                let r = law.sample_beyond(&mut rng, r0);
                assert!(r > r0);
                r > r1
            })
            .count() as f64;
        let want = (law.ln_survival(r1).unwrap() - law.ln_survival(r0).unwrap()).exp();
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((hits / n as f64 - want).abs() < 4.0 * se);
    }

    #[test]
    fn quantile_inverts_survival() {
        for law in builtins() {
            for &p in &[0.1, 0.5, 0.9, 0.999] {
                let q = law.quantile(p).unwrap();
                assert_relative_eq!(1.0 - law.survival(q).unwrap(), p, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn json_shape() {
        let law: RadialLaw = serde_json::from_str(r#"{"kind":"weibull_tail","c":1.0,"tau":2.0}"#).unwrap();
        assert_eq!(law, RadialLaw::weibull_tail(1.0, 2.0));
        let s = serde_json::to_string(&RadialLaw::chi(3.0)).unwrap();
        assert_eq!(s, r#"{"kind":"chi","dof":3.0}"#);
    }
}
