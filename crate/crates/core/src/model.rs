//! Model types and density formulas.
//!
//! A GSD vector is `X = R·AᵀU` where `U ~ SD(k, α)` lives on the unit sphere
//! and `R > 0` is independent of `U`. With `Σ = AᵀA` and `C = (Aᵀ)⁻¹` we have
//! `CᵀC = Σ⁻¹`, so `XᵀΣ⁻¹X = R²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, SpdFactor};
use crate::quadrature::{integrate, QuadOptions};
use crate::radial::RadialLaw;
use crate::special::ln_gamma;

/// Dirichlet parameters `α ∈ (0, ∞)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    alpha: Vec<f64>,
    alpha_bar: f64,
}

impl AlphaVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(bad) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Invariant {
                name: "alpha.positive",
                detail: format!("entry {bad} is not a positive finite number"),
            });
        }
        let alpha_bar = alpha.iter().sum();
        Ok(Self { alpha, alpha_bar })
    }

    /// `α = c·1_k`.
    pub fn constant(k: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; k])
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    pub fn get(&self, i: usize) -> f64 {
        self.alpha[i]
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    /// `ᾱ_K = Σ_{i∈K} α_i` with the convention `ᾱ_∅ = 1`.
    ///
    /// The convention only makes sense inside product-form constants. Use
    /// [`AlphaVector::sum_over`] where the partial sum enters an exponent.
    pub fn partial_sum(&self, set: &[usize]) -> f64 {
        if set.is_empty() {
            1.0
        } else {
            self.sum_over(set)
        }
    }

    /// Plain sum over `set`, zero when empty.
    pub fn sum_over(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.alpha[i]).sum()
    }

    /// `Σ_{i∈set} ln Γ(α_i)`.
    pub fn ln_gamma_sum(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| ln_gamma(self.alpha[i])).sum()
    }

    /// `ln(∏Γ(α_i) / Γ(ᾱ))`, the log of the Dirichlet normaliser `K`.
    pub fn ln_dirichlet_norm(&self) -> f64 {
        self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(self.alpha_bar)
    }
}

/// The mixing matrix `A` with its derived quantities.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    c: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    ln_det_sigma: f64,
    allow_non_correlation: bool,
}

impl PartialEq for MixingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.allow_non_correlation == other.allow_non_correlation
    }
}

const DIAG_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-10;

impl MixingMatrix {
    /// Build from `A`, requiring `diag(AᵀA) = 1`.
    pub fn from_a(a: DMatrix<f64>) -> Result<Self> {
        Self::build(a, false)
    }

    /// Build from `A` without the unit-diagonal requirement.
    pub fn from_a_unnormalized(a: DMatrix<f64>) -> Result<Self> {
        Self::build(a, true)
    }

    /// Build from `Σ` with `A` the transposed lower Cholesky factor, so that
    /// `A` is upper and `C` lower triangular.
    pub fn from_sigma(sigma: &DMatrix<f64>, allow_non_correlation: bool) -> Result<Self> {
        let f = SpdFactor::new(sigma).map_err(|e| Error::Invariant {
            name: "mixing.positive_definite",
            detail: e.to_string(),
        })?;
        Self::build(f.lower().transpose(), allow_non_correlation)
    }

    pub fn identity(k: usize) -> Self {
        Self::build(DMatrix::identity(k, k), false).expect("identity is a valid mixing matrix")
    }

    /// Equicorrelation matrix `(1-ρ)I + ρ11ᵀ` via its Cholesky factor.
    pub fn equicorrelated(k: usize, rho: f64) -> Result<Self> {
        let sigma = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho });
        Self::from_sigma(&sigma, false)
    }

    fn build(a: DMatrix<f64>, allow_non_correlation: bool) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Invariant {
                name: "mixing.square",
                detail: format!("A is {}x{}", a.nrows(), a.ncols()),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant {
                name: "mixing.finite",
                detail: "A has non-finite entries".into(),
            });
        }
        let k = a.nrows();
        let det_a = a.determinant();
        let scale = a.column_iter().map(|c| c.norm()).product::<f64>();
        if !(det_a.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Invariant {
                name: "mixing.nonsingular",
                detail: format!("det A = {det_a:e}"),
            });
        }
        let sigma = a.transpose() * &a;
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let factor = SpdFactor::new(&sigma).map_err(|e| Error::Invariant {
            name: "mixing.positive_definite",
            detail: e.to_string(),
        })?;
        if !allow_non_correlation {
            if let Some(i) = (0..k).find(|&i| (sigma[(i, i)] - 1.0).abs() > DIAG_TOL) {
                return Err(Error::Invariant {
                    name: "mixing.unit_diagonal",
                    detail: format!("Σ[{i},{i}] = {}", sigma[(i, i)]),
                });
            }
        }
        let c = a
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Invariant {
                name: "mixing.nonsingular",
                detail: "Aᵀ is not invertible".into(),
            })?;
        let sigma_inv = factor.inverse();
        let ctc = c.transpose() * &c;
        let dev = (&ctc - &sigma_inv).amax();
        if dev > INVERSE_TOL * sigma_inv.amax().max(1.0) {
            return Err(Error::Invariant {
                name: "mixing.inverse_consistency",
                detail: format!("max |CᵀC - Σ⁻¹| = {dev:e}"),
            });
        }
        Ok(Self {
            a,
            sigma,
            c,
            sigma_inv,
            ln_det_sigma: factor.ln_determinant(),
            allow_non_correlation,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `C = (Aᵀ)⁻¹`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn det_sigma(&self) -> f64 {
        self.ln_det_sigma.exp()
    }

    pub fn ln_det_sigma(&self) -> f64 {
        self.ln_det_sigma
    }

    pub fn allows_non_correlation(&self) -> bool {
        self.allow_non_correlation
    }

    pub fn is_identity(&self) -> bool {
        let k = self.dim();
        (&self.a - DMatrix::<f64>::identity(k, k)).amax() == 0.0
    }
}

/// Kotz Type I generator parameters: `g(x) = c·x^N·exp(-r·x^s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KotzParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub r: f64,
    pub s: f64,
}

impl KotzParams {
    /// `N = 0, 2r = s = 1`.
    pub const STANDARD: KotzParams = KotzParams {
        n: 0.0,
        r: 0.5,
        s: 1.0,
    };

    pub fn validate(&self, alpha: &AlphaVector) -> Result<()> {
        if self.r > 0.0 && self.s > 0.0 && self.n > -alpha.alpha_bar() && self.n.is_finite() {
            Ok(())
        } else {
            Err(Error::Invariant {
                name: "kotz.params",
                detail: format!("{self:?} with ᾱ = {}", alpha.alpha_bar()),
            })
        }
    }

    pub fn is_standard(&self) -> bool {
        *self == Self::STANDARD
    }

    /// `ln c` for the generator normalised to a density on `R^k`.
    pub fn ln_normalizer(&self, alpha: &AlphaVector) -> f64 {
        let a = (self.n + alpha.alpha_bar()) / self.s;
        self.s.ln() + a * self.r.ln() - alpha.ln_dirichlet_norm() - ln_gamma(a)
    }

    pub fn ln_generator(&self, alpha: &AlphaVector, x: f64) -> f64 {
        let ln_pow = if self.n == 0.0 { 0.0 } else { self.n * x.ln() };
        self.ln_normalizer(alpha) + ln_pow - self.r * x.powf(self.s)
    }

    pub fn generator(&self, alpha: &AlphaVector) -> impl Fn(f64) -> f64 {
        let p = *self;
        let ln_c = self.ln_normalizer(alpha);
        move |x: f64| {
            let ln_pow = if p.n == 0.0 { 0.0 } else { p.n * x.ln() };
            (ln_c + ln_pow - p.r * x.powf(p.s)).exp()
        }
    }

    pub fn radial_law(&self, alpha: &AlphaVector) -> RadialLaw {
        RadialLaw::Kotz {
            n: self.n,
            r: self.r,
            s: self.s,
            alpha_bar: alpha.alpha_bar(),
        }
    }
}

/// A density value that may sit on a singularity of the formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityValue {
    Finite(f64),
    /// The density formula is `+∞` at this point.
    Infinite,
}

impl DensityValue {
    fn from_ln(ln: f64) -> Self {
        if ln == f64::INFINITY {
            DensityValue::Infinite
        } else {
            DensityValue::Finite(ln.exp())
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            DensityValue::Finite(v) => v,
            DensityValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, DensityValue::Infinite)
    }

    /// The finite value, or `None` on a singularity.
    pub fn finite(&self) -> Option<f64> {
        match *self {
            DensityValue::Finite(v) => Some(v),
            DensityValue::Infinite => None,
        }
    }
}

// ln |t|^{2α-1}, with the limits at t = 0
fn ln_power_factor(t: f64, alpha: f64) -> f64 {
    let e = 2.0 * alpha - 1.0;
    if e == 0.0 {
        0.0
    } else if t == 0.0 {
        if e > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        e * t.abs().ln()
    }
}

// Sum of log factors where +∞ dominates -∞ is never needed: callers stop at
// the first zero factor.
fn ln_product(factors: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut infinite = false;
    for f in factors {
        if f == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        if f == f64::INFINITY {
            infinite = true;
        } else {
            acc += f;
        }
    }
    if infinite {
        f64::INFINITY
    } else {
        acc
    }
}

/// The full GSD model: `α`, `A` and the radial law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub alpha: AlphaVector,
    pub mixing: MixingMatrix,
    pub radial: RadialLaw,
}

#[derive(Serialize, Deserialize)]
struct ModelSpecJson {
    alpha: Vec<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma", default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<Vec<f64>>>,
    radial: serde_json::Value,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_non_correlation: bool,
}

impl ModelSpec {
    pub fn new(alpha: AlphaVector, mixing: MixingMatrix, radial: RadialLaw) -> Result<Self> {
        let k = alpha.len();
        if k < 2 {
            return Err(Error::Invariant {
                name: "spec.dimension",
                detail: format!("k = {k}, need k ≥ 2"),
            });
        }
        if mixing.dim() != k {
            return Err(Error::Invariant {
                name: "spec.dimension",
                detail: format!("alpha has {k} entries but A is {0}x{0}", mixing.dim()),
            });
        }
        radial.validate()?;
        if let RadialLaw::Kotz { alpha_bar, .. } = radial {
            if (alpha_bar - alpha.alpha_bar()).abs() > 1e-12 * alpha.alpha_bar() {
                return Err(Error::Invariant {
                    name: "radial.kotz_alpha_bar",
                    detail: format!("law has ᾱ = {alpha_bar}, model has {}", alpha.alpha_bar()),
                });
            }
        }
        Ok(Self {
            alpha,
            mixing,
            radial,
        })
    }

    /// Standardised Kotz model (`N = 0, 2r = s = 1`) with mixing matrix `mixing`.
    pub fn standard_kotz(alpha: AlphaVector, mixing: MixingMatrix) -> Result<Self> {
        let law = KotzParams::STANDARD.radial_law(&alpha);
        Self::new(alpha, mixing, law)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModelSpecJson =
            serde_json::from_str(text).map_err(|e| Error::arg(format!("model JSON: {e}")))?;
        Self::from_raw(raw)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: ModelSpecJson =
            serde_json::from_value(value).map_err(|e| Error::arg(format!("model JSON: {e}")))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: ModelSpecJson) -> Result<Self> {
        let alpha = AlphaVector::new(raw.alpha)?;
        let mixing = match (raw.a, raw.sigma) {
            (Some(a), None) => {
                let a = matrix_from_rows(&a)?;
                MixingMatrix::build(a, raw.allow_non_correlation)?
            }
            (None, Some(s)) => MixingMatrix::from_sigma(&matrix_from_rows(&s)?, raw.allow_non_correlation)?,
            _ => return Err(Error::arg("model JSON needs exactly one of \"A\" and \"Sigma\"")),
        };
        let mut radial = raw.radial;
        if radial.get("kind").and_then(|k| k.as_str()) == Some("kotz") {
            if let Some(obj) = radial.as_object_mut() {
                obj.entry("alpha_bar")
                    .or_insert_with(|| serde_json::json!(alpha.alpha_bar()));
            }
        }
        let radial: RadialLaw =
            serde_json::from_value(radial).map_err(|e| Error::arg(format!("radial law: {e}")))?;
        Self::new(alpha, mixing, radial)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = ModelSpecJson {
            alpha: self.alpha.values().to_vec(),
            a: Some(matrix_to_rows(self.mixing.a())),
            sigma: None,
            radial: serde_json::to_value(self.radial).expect("radial law serialises"),
            allow_non_correlation: self.mixing.allows_non_correlation(),
        };
        serde_json::to_value(raw).expect("model serialises")
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        ModelSpec::from_json_value(v).map_err(serde::de::Error::custom)
    }
}

/// Density of the first `k-1` coordinates of `U ~ SD(k, α)`.
pub fn sd_density(alpha: &AlphaVector, u: &[f64]) -> Result<DensityValue> {
    let k = alpha.len();
    if u.len() + 1 != k {
        return Err(Error::arg(format!(
            "SD({k}) density takes {} coordinates, got {}",
            k - 1,
            u.len()
        )));
    }
    let s: f64 = u.iter().map(|x| x * x).sum();
    if s > 1.0 {
        return Ok(DensityValue::Finite(0.0));
    }
    let ak = alpha.get(k - 1);
    let rest = 1.0 - s;
    let ln_rest = if ak == 1.0 {
        0.0
    } else if rest == 0.0 {
        if ak < 1.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (ak - 1.0) * rest.ln()
    };
    let ln = ln_product(
        std::iter::once(ln_rest).chain(u.iter().enumerate().map(|(i, &x)| ln_power_factor(x, alpha.get(i)))),
    );
    Ok(DensityValue::from_ln(ln - alpha.ln_dirichlet_norm()))
}

fn check_point(x: &[f64], k: usize) -> Result<()> {
    if x.len() != k {
        return Err(Error::arg(format!("expected a point in R^{k}, got {} coordinates", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("point has non-finite coordinates"));
    }
    Ok(())
}

/// `g(Σ x_i²)·∏|x_i|^{2α_i-1}` for a model with `A = I`.
pub fn gsd_joint_density<G: Fn(f64) -> f64>(spec: &ModelSpec, g: G, x: &[f64]) -> Result<DensityValue> {
    if !spec.mixing.is_identity() {
        return Err(Error::Unsupported(
            "the generator form of the joint density needs A = I".into(),
        ));
    }
    check_point(x, spec.dim())?;
    let s: f64 = x.iter().map(|v| v * v).sum();
    let gv = g(s);
    if !(gv >= 0.0) {
        return Err(Error::Contract(format!("density generator returned {gv} at {s}")));
    }
    let ln = ln_product(
        std::iter::once(gv.ln()).chain(x.iter().enumerate().map(|(i, &v)| ln_power_factor(v, spec.alpha.get(i)))),
    );
    Ok(DensityValue::from_ln(ln))
}

/// Kotz Type I joint density.
///
/// The standardised generator is supported under any `A` (the density of
/// `AᵀX`); other parameters only with `A = I`.
pub fn kotz_density(spec: &ModelSpec, kotz: &KotzParams, x: &[f64]) -> Result<DensityValue> {
    kotz.validate(&spec.alpha)?;
    check_point(x, spec.dim())?;
    let alpha = &spec.alpha;
    if kotz.is_standard() {
        let xv = DVector::from_column_slice(x);
        let cx = spec.mixing.c() * &xv;
        let q = xv.dot(&(spec.mixing.sigma_inv() * &xv));
        let ln_norm = -alpha.alpha_bar() * std::f64::consts::LN_2
            - alpha.values().iter().map(|&a| ln_gamma(a)).sum::<f64>()
            - 0.5 * spec.mixing.ln_det_sigma();
        let ln = ln_product(
            std::iter::once(ln_norm - q / 2.0)
                .chain(cx.iter().enumerate().map(|(i, &v)| ln_power_factor(v, alpha.get(i)))),
        );
        return Ok(DensityValue::from_ln(ln));
    }
    if !spec.mixing.is_identity() {
        return Err(Error::Unsupported(
            "general Kotz parameters are only supported with A = I".into(),
        ));
    }
    let s: f64 = x.iter().map(|v| v * v).sum();
    let ln_g = if s == 0.0 && kotz.n != 0.0 {
        if kotz.n > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        kotz.ln_generator(alpha, s)
    };
    let ln = ln_product(
        std::iter::once(ln_g).chain(x.iter().enumerate().map(|(i, &v)| ln_power_factor(v, alpha.get(i)))),
    );
    Ok(DensityValue::from_ln(ln))
}

/// Radius density `2K·g(r²)·r^{2ᾱ-1}` with `K = ∏Γ(α_i)/Γ(ᾱ)`.
pub fn radial_density_from_generator<G: Fn(f64) -> f64>(g: G, alpha: &AlphaVector, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {r}")));
    }
    let gv = g(r * r);
    if !(gv >= 0.0) {
        return Err(Error::Contract(format!("density generator returned {gv}")));
    }
    Ok(2.0 * (alpha.ln_dirichlet_norm() + (2.0 * alpha.alpha_bar() - 1.0) * r.ln()).exp() * gv)
}

fn check_subset(set: &[usize], k: usize) -> Result<()> {
    if set.is_empty() || set.len() >= k {
        return Err(Error::arg(format!(
            "index set must be a proper non-empty subset of 0..{k}, got {set:?}"
        )));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != set.len() || sorted.iter().any(|&i| i >= k) {
        return Err(Error::arg(format!("invalid index set {set:?} for k = {k}")));
    }
    Ok(())
}

// ∫_ρ^∞ (r² - ρ²)^{β-1} r^{-2(ᾱ-1)} f(r) dr, through v = (r² - ρ²)^β.
fn radial_kernel(law: &RadialLaw, alpha_bar: f64, beta: f64, rho: f64) -> f64 {
    let ln_tail = law.ln_survival_unchecked(rho) + (1e-14f64).ln();
    let z_max = law.inverse_survival_ln(ln_tail).max(rho * (1.0 + 1e-8) + 1e-8);
    let v_max = (z_max * z_max - rho * rho).powf(beta);
    let rho2 = rho * rho;
    let r = integrate(
        |v: f64| {
            let r = (rho2 + v.powf(1.0 / beta)).sqrt();
            if r <= 0.0 {
                return 0.0;
            }
            let ln = law.ln_density_unchecked(r) - 2.0 * (alpha_bar - 1.0) * r.ln() - (2.0 * beta * r).ln();
            ln.exp()
        },
        0.0,
        v_max,
        QuadOptions::with_rel_tol(1e-11),
    );
    r.value
}

/// Density of `R_I = ‖X_I‖` for `X = R·U`, `U ~ SD(k, α)`.
pub fn subvector_radial_density(spec: &ModelSpec, set: &[usize], z: f64) -> Result<f64> {
    let k = spec.dim();
    check_subset(set, k)?;
    if !(z > 0.0) {
        return Err(Error::arg(format!("z must be positive, got {z}")));
    }
    let ab = spec.alpha.alpha_bar();
    let ai = spec.alpha.sum_over(set);
    let beta = ab - ai;
    let j = radial_kernel(&spec.radial, ab, beta, z);
    let ln_pre = std::f64::consts::LN_2 + (2.0 * ai - 1.0) * z.ln() + ln_gamma(ab) - ln_gamma(ai) - ln_gamma(beta);
    Ok(ln_pre.exp() * j)
}

/// Density of `A_subᵀ X_I` for `X = R·U`, `U ~ SD(k, α)`.
///
/// The model's own mixing matrix is not used: the formula concerns the
/// spherical part `R·U` and the `m×m` matrix `a_sub`.
pub fn subvector_joint_density(
    spec: &ModelSpec,
    set: &[usize],
    a_sub: &DMatrix<f64>,
    x: &[f64],
) -> Result<DensityValue> {
    let k = spec.dim();
    check_subset(set, k)?;
    let m = set.len();
    if a_sub.nrows() != m || a_sub.ncols() != m {
        return Err(Error::arg(format!("A_sub must be {m}x{m}")));
    }
    check_point(x, m)?;
    let sub = MixingMatrix::from_a_unnormalized(a_sub.clone())?;
    let xv = DVector::from_column_slice(x);
    let cx = sub.c() * &xv;
    let rho = cx.norm();
    let ab = spec.alpha.alpha_bar();
    let ai = spec.alpha.sum_over(set);
    let beta = ab - ai;
    let j = radial_kernel(&spec.radial, ab, beta, rho);
    let ln_pre = ln_gamma(ab) - spec.alpha.ln_gamma_sum(set) - ln_gamma(beta) - 0.5 * sub.ln_det_sigma();
    let ln = ln_product(
        std::iter::once(ln_pre + j.ln())
            .chain(cx.iter().zip(set).map(|(&v, &i)| ln_power_factor(v, spec.alpha.get(i)))),
    );
    Ok(DensityValue::from_ln(ln))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_real_line, integrate_to_infinity};
    use crate::special::gamma_p;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn alpha(v: &[f64]) -> AlphaVector {
        AlphaVector::new(v.to_vec()).unwrap()
    }

    fn identity_spec(a: &[f64], law: RadialLaw) -> ModelSpec {
        ModelSpec::new(alpha(a), MixingMatrix::identity(a.len()), law).unwrap()
    }

    fn std_kotz(a: &[f64]) -> ModelSpec {
        ModelSpec::standard_kotz(alpha(a), MixingMatrix::identity(a.len())).unwrap()
    }

    #[test]
    fn alpha_invariants() {
        assert!(matches!(
            AlphaVector::new(vec![1.0, 0.0]),
            Err(Error::Invariant { name: "alpha.positive", .. })
        ));
        let a = alpha(&[0.5, 1.0, 2.0]);
        assert_eq!(a.alpha_bar(), 3.5);
        assert_eq!(a.partial_sum(&[]), 1.0);
        assert_eq!(a.sum_over(&[]), 0.0);
        assert_eq!(a.partial_sum(&[0, 2]), 2.5);
    }

    #[test]
    fn mixing_invariants() {
        let m = MixingMatrix::equicorrelated(3, 0.5).unwrap();
        let ctc = m.c().transpose() * m.c();
        assert!((ctc - m.sigma_inv()).amax() < 1e-10);
        assert_relative_eq!(m.det_sigma(), m.a().determinant().powi(2), max_relative = 1e-12);
        // C is lower triangular
        assert!(m.c()[(0, 1)] == 0.0 && m.c()[(0, 2)] == 0.0 && m.c()[(1, 2)] == 0.0);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            MixingMatrix::from_a(a.clone()),
            Err(Error::Invariant { name: "mixing.unit_diagonal", .. })
        ));
        assert!(MixingMatrix::from_a_unnormalized(a).is_ok());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(MixingMatrix::from_a_unnormalized(singular).is_err());
    }

    #[test]
    fn json_round_trip_and_invariant_names() {
        let text = r#"{"alpha":[1.0,1.5],"A":[[1.0,0.5],[0.0,0.8660254037844386]],"radial":{"kind":"kotz","N":0.0,"r":0.5,"s":1.0}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        assert_eq!(spec.radial, RadialLaw::standard_kotz(2.5));
        let again = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.to_json(), spec.to_json());

        let bad = r#"{"alpha":[1.0,-1.0],"A":[[1,0],[0,1]],"radial":{"kind":"chi","dof":2}}"#;
        let err = ModelSpec::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("alpha.positive"), "{err}");

        let bad = r#"{"alpha":[1.0,1.0],"Sigma":[[1,0.5],[0.5,2]],"radial":{"kind":"chi","dof":2}}"#;
        let err = ModelSpec::from_json(bad).unwrap_err();
        assert!(err.to_string().contains("mixing.unit_diagonal"), "{err}");

        let one = r#"{"alpha":[1.0],"A":[[1]],"radial":{"kind":"chi","dof":2}}"#;
        let err = ModelSpec::from_json(one).unwrap_err();
        assert!(err.to_string().contains("spec.dimension"), "{err}");
    }

    #[test]
    fn sd_density_examples() {
        let v = sd_density(&alpha(&[0.5, 0.5]), &[0.0]).unwrap();
        assert_relative_eq!(v.value(), 1.0 / PI, max_relative = 1e-14);
        let v = sd_density(&alpha(&[1.0, 1.0]), &[0.0]).unwrap();
        assert_eq!(v.value(), 0.0);
        assert_eq!(sd_density(&alpha(&[0.5, 0.5]), &[1.2]).unwrap().value(), 0.0);
        assert!(sd_density(&alpha(&[0.5, 0.5]), &[1.0]).unwrap().is_infinite());
        assert!(sd_density(&alpha(&[0.5, 0.5]), &[0.1, 0.2]).is_err());
    }

    // ∫ over the unit disk, with u₂ = √(1-u₁²)·sin θ absorbing the boundary singularity.
    fn disk_integral(a: &AlphaVector) -> f64 {
        let opts = QuadOptions::with_rel_tol(1e-10);
        integrate(
            |u1: f64| {
                let rad = (1.0 - u1 * u1).sqrt();
                integrate(
                    |t: f64| {
                        let u2 = rad * t.sin();
                        let jac = rad * t.cos();
                        let d = sd_density(a, &[u1, u2]).unwrap();
                        d.finite().unwrap_or(0.0) * jac
                    },
                    -PI / 2.0,
                    PI / 2.0,
                    opts,
                )
                .value
            },
            -1.0,
            1.0,
            opts,
        )
        .value
    }

    #[test]
    fn sd_density_normalises() {
        let a = alpha(&[0.5, 0.5, 0.5]);
        let v = sd_density(&a, &[0.5, 0.5]).unwrap().value();
        // Γ(3/2)/π^{3/2} · (1/2)^{-1/2}
        assert_relative_eq!(v, (0.5 * PI.sqrt()) / PI.powf(1.5) * 2f64.sqrt(), max_relative = 1e-13);
        assert!((disk_integral(&a) - 1.0).abs() < 1e-6);
        assert!((disk_integral(&alpha(&[1.0, 1.5, 0.7])) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn joint_density_examples() {
        let spec = std_kotz(&[0.5, 0.5]);
        let g = KotzParams::STANDARD.generator(&spec.alpha);
        let v = gsd_joint_density(&spec, &g, &[0.0, 0.0]).unwrap().value();
        assert_relative_eq!(v, 1.0 / (2.0 * PI), max_relative = 1e-14);

        let spec = std_kotz(&[1.0, 0.5]);
        let g = KotzParams::STANDARD.generator(&spec.alpha);
        assert_eq!(gsd_joint_density(&spec, &g, &[0.0, 0.3]).unwrap().value(), 0.0);
        assert!(matches!(
            gsd_joint_density(&spec, |_| -1.0, &[1.0, 1.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn kotz_density_examples() {
        let spec = std_kotz(&[0.5, 0.5]);
        let v = kotz_density(&spec, &KotzParams::STANDARD, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(v.value(), 1.0 / (2.0 * PI), max_relative = 1e-14);

        // |X_i|² ~ Gamma(α_i, 1/2) independent: density of X_i is
        // |x|^{2α-1} e^{-x²/2} / (2^α Γ(α)).
        let spec = std_kotz(&[1.0, 1.0]);
        let v = kotz_density(&spec, &KotzParams::STANDARD, &[1.0, 1.0]).unwrap().value();
        let marginal = |x: f64, a: f64| x.abs().powf(2.0 * a - 1.0) * (-x * x / 2.0).exp() / (2f64.powf(a) * ln_gamma(a).exp());
        assert_relative_eq!(v, (-1.0f64).exp() / 4.0, max_relative = 1e-14);
        assert_relative_eq!(v, marginal(1.0, 1.0) * marginal(1.0, 1.0), max_relative = 1e-14);

        let general = KotzParams { n: 1.0, r: 1.0, s: 2.0 };
        let rotated = ModelSpec::standard_kotz(alpha(&[1.0, 1.0]), MixingMatrix::equicorrelated(2, 0.3).unwrap()).unwrap();
        assert!(matches!(
            kotz_density(&rotated, &general, &[1.0, 1.0]),
            Err(Error::Unsupported(_))
        ));
    }

    fn plane_integral<F: Fn(f64, f64) -> f64>(f: F) -> f64 {
        let opts = QuadOptions::with_rel_tol(1e-10);
        integrate_real_line(|x| integrate_real_line(|y| f(x, y), opts).value, opts).value
    }

    #[test]
    fn kotz_density_normalises() {
        let spec = std_kotz(&[1.0, 1.5]);
        let total = plane_integral(|x, y| kotz_density(&spec, &KotzParams::STANDARD, &[x, y]).unwrap().value());
        assert!((total - 1.0).abs() < 1e-6, "{total}");

        let mixed = ModelSpec::standard_kotz(alpha(&[1.0, 1.5]), MixingMatrix::equicorrelated(2, 0.5).unwrap()).unwrap();
        let total = plane_integral(|x, y| kotz_density(&mixed, &KotzParams::STANDARD, &[x, y]).unwrap().value());
        assert!((total - 1.0).abs() < 1e-6, "{total}");

        let general = KotzParams { n: 0.7, r: 1.3, s: 1.7 };
        let spec = identity_spec(&[1.0, 1.5], general.radial_law(&alpha(&[1.0, 1.5])));
        let total = plane_integral(|x, y| kotz_density(&spec, &general, &[x, y]).unwrap().value());
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn radial_from_generator_examples() {
        let a = alpha(&[0.5, 0.5]);
        let g = KotzParams::STANDARD.generator(&a);
        assert_relative_eq!(radial_density_from_generator(&g, &a, 1.0).unwrap(), (-0.5f64).exp(), max_relative = 1e-14);
        assert!(radial_density_from_generator(&g, &a, 1e-12).unwrap() < 1e-11);
        assert!(radial_density_from_generator(&g, &a, 0.0).is_err());

        let a = alpha(&[1.0, 1.5, 0.7]);
        let p = KotzParams { n: 0.4, r: 0.8, s: 1.3 };
        let g = p.generator(&a);
        let total = integrate_to_infinity(|r| if r > 0.0 { radial_density_from_generator(&g, &a, r).unwrap() } else { 0.0 }, 0.0, QuadOptions::with_rel_tol(1e-11)).value;
        assert!((total - 1.0).abs() < 1e-6);
        // matches the closed-form law
        let law = p.radial_law(&a);
        for &r in &[0.3, 1.0, 2.2] {
            assert_relative_eq!(radial_density_from_generator(&g, &a, r).unwrap(), law.density(r).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn radial_consistency_with_chi() {
        for k in 2..=4 {
            let a = AlphaVector::constant(k, 0.5).unwrap();
            let g = KotzParams::STANDARD.generator(&a);
            let chi = RadialLaw::chi(k as f64);
            for i in 1..=20 {
                let r = 0.25 * i as f64;
                assert_relative_eq!(radial_density_from_generator(&g, &a, r).unwrap(), chi.density(r).unwrap(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn subvector_radial_examples() {
        let spec = identity_spec(&[0.5, 0.5], RadialLaw::chi(2.0));
        let v = subvector_radial_density(&spec, &[0], 1.0).unwrap();
        let half_normal = 2.0 / (2.0 * PI).sqrt() * (-0.5f64).exp();
        assert_relative_eq!(v, half_normal, max_relative = 1e-8);
        assert!((v - 0.48394).abs() < 1e-5);

        let total = integrate_to_infinity(|z| if z > 0.0 { subvector_radial_density(&spec, &[0], z).unwrap() } else { 0.0 }, 0.0, QuadOptions::with_rel_tol(1e-8)).value;
        assert!((total - 1.0).abs() < 1e-5, "{total}");

        assert!(subvector_radial_density(&spec, &[], 1.0).is_err());
        assert!(subvector_radial_density(&spec, &[0, 1], 1.0).is_err());
    }

    #[test]
    fn subvector_radial_matches_gamma_marginal() {
        // Standardised Kotz: X₁² ~ Gamma(α₁, 1/2), so P(|X₁| ≤ z) = P(α₁, z²/2).
        let spec = std_kotz(&[1.0, 1.5, 0.7]);
        for &z in &[0.5, 1.0, 2.0] {
            let h = 1e-4;
            let d = (gamma_p(1.0, (z + h) * (z + h) / 2.0) - gamma_p(1.0, (z - h) * (z - h) / 2.0)) / (2.0 * h);
            let v = subvector_radial_density(&spec, &[0], z).unwrap();
            assert!((v - d).abs() < 1e-6, "z={z}: {v} vs {d}");
        }
    }

    #[test]
    fn subvector_joint_examples() {
        let spec = identity_spec(&[0.5, 0.5], RadialLaw::chi(2.0));
        let one = DMatrix::from_element(1, 1, 1.0);
        let v = subvector_joint_density(&spec, &[1], &one, &[0.0]).unwrap().value();
        assert_relative_eq!(v, 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-8);
        let v = subvector_joint_density(&spec, &[1], &one, &[1.3]).unwrap().value();
        assert_relative_eq!(v, (-0.845f64).exp() / (2.0 * PI).sqrt(), max_relative = 1e-8);

        let spec = std_kotz(&[1.0, 1.5, 0.7]);
        let a_sub = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 0.9]);
        let opts = QuadOptions::with_rel_tol(1e-8);
        let total = integrate_real_line(
            |x| integrate_real_line(|y| subvector_joint_density(&spec, &[0, 2], &a_sub, &[x, y]).unwrap().value(), opts).value,
            opts,
        )
        .value;
        assert!((total - 1.0).abs() < 1e-5, "{total}");
    }

    #[test]
    fn subvector_joint_is_marginal_of_joint() {
        let spec = std_kotz(&[1.0, 1.5, 0.7]);
        let g = KotzParams::STANDARD.generator(&spec.alpha);
        let id = DMatrix::identity(2, 2);
        for &(x0, x1) in &[(0.3, 0.8), (1.0, -0.5), (-1.7, 1.2)] {
            let marginal = integrate_real_line(
                |x2| gsd_joint_density(&spec, &g, &[x0, x1, x2]).unwrap().value(),
                QuadOptions::with_rel_tol(1e-10),
            )
            .value;
            let v = subvector_joint_density(&spec, &[0, 1], &id, &[x0, x1]).unwrap().value();
            assert!((v - marginal).abs() < 1e-4 * marginal.max(1e-3), "{v} vs {marginal}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn generator_consistency(
            a1 in 0.2f64..3.0, a2 in 0.2f64..3.0,
            n in 0.0f64..2.0, r in 0.2f64..2.0, s in 0.3f64..2.5,
            x in -3.0f64..3.0, y in -3.0f64..3.0,
        ) {
            let al = alpha(&[a1, a2]);
            let p = KotzParams { n, r, s };
            let spec = identity_spec(&[a1, a2], p.radial_law(&al));
            let g = p.generator(&al);
            let lhs = kotz_density(&spec, &p, &[x, y]).unwrap().value();
            let rhs = gsd_joint_density(&spec, &g, &[x, y]).unwrap().value();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
        }

        #[test]
        fn sign_symmetry(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let spec = ModelSpec::standard_kotz(alpha(&[1.0, 1.5]), MixingMatrix::identity(2)).unwrap();
            let f = |p: [f64; 2]| kotz_density(&spec, &KotzParams::STANDARD, &p).unwrap().value();
            prop_assert_eq!(f([x, y]), f([-x, y]));
            prop_assert_eq!(f([x, y]), f([x, -y]));
        }
    }
}
