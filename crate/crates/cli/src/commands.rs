//! Subcommand definitions and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gsd_tail::asymptotics::{corollary2, theorem31, IntegrationBackend, TailProblem, ThresholdMode};
use gsd_tail::model::{kotz_density, sd_density, subvector_radial_density, AlphaVector, KotzParams, ModelSpec};
use gsd_tail::qp::{solve, verify_solution_with_seed, QpProblem};
use gsd_tail::radial::{mda_certificate, CertificateParams, RadialLaw};
use gsd_tail::sampler::mc_tail;
use gsd_tail::Estimator;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::experiments::{
    run_example1, run_example2, ConditionalConfig, Example1Config, Example2Config, IndependenceConfig,
};
use crate::report::{encode, write_output, Format};
use crate::load_json_arg;

#[derive(Debug, Parser)]
#[command(name = "gsd-tail", version, about = "Tail asymptotics of GSD random vectors")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    /// Seed for every random component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output encoding. CSV is available for example reports only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve min xᵀΣ⁻¹x subject to x ≥ b and verify the solution.
    #[command(allow_negative_numbers = true)]
    QpSolve {
        /// JSON `{"Sigma": [[..]], "b": [..]}`, inline or a file path.
        #[arg(long)]
        input: String,
        /// Tolerance for the verification checks.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Leading-order asymptotics of P(X > t(u)).
    Asym(AsymArgs),
    /// Monte Carlo estimate of P(X > u·b).
    #[command(allow_negative_numbers = true)]
    McEstimate {
        #[arg(long)]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<f64>,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, value_enum, default_value_t = EstimatorKind::Tilt)]
        estimator: EstimatorKind,
        /// Tilt margin δ.
        #[arg(long, default_value_t = Estimator::DEFAULT_DELTA)]
        delta: f64,
    },
    /// Finite-u diagnostics of the Gumbel domain of attraction.
    #[command(allow_negative_numbers = true)]
    MdaCheck {
        /// Radial law JSON, e.g. `{"kind":"chi","dof":3}`, inline or a path.
        #[arg(long)]
        law: String,
        /// Certificate parameters JSON; defaults depend on the law.
        #[arg(long)]
        params: Option<String>,
    },
    /// Equicorrelated model with α = p·1 and b = 1.
    Example1(Example1Args),
    /// Bivariate model with A = [[1, ρ], [0, √(1-ρ²)]] and b = (1, a).
    Example2(Example2Args),
    /// Pointwise density evaluation.
    #[command(allow_negative_numbers = true)]
    Densities {
        #[arg(long, value_enum)]
        kind: DensityKind,
        /// Model JSON (joint, radial, subvector-radial).
        #[arg(long)]
        model: Option<String>,
        /// Dirichlet parameters (sd).
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Evaluation point; a single radius for radial kinds.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        /// 0-based index set (subvector-radial).
        #[arg(long, value_delimiter = ',')]
        set: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Crude,
    Tilt,
}

impl EstimatorKind {
    pub fn build(self, delta: f64) -> Estimator {
        match self {
            EstimatorKind::Crude => Estimator::Crude,
            EstimatorKind::Tilt => Estimator::RadialTilt { delta },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Theorem,
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Auto,
    Quadrature,
    Mc,
    CrossCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityKind {
    /// Kotz joint density of X.
    Joint,
    /// Symmetrised Dirichlet density of the first k-1 coordinates.
    Sd,
    /// Density of R.
    Radial,
    /// Density of ‖U_I‖·R.
    SubvectorRadial,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct AsymArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<f64>,
    /// Threshold mode JSON, e.g. `{"mode":"custom","q_i":[0],"q_j":[null]}`.
    /// Defaults to the plain ray t = u·b.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub u: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Method::Theorem)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = BackendKind::Auto)]
    pub backend: BackendKind,
    /// Monte Carlo sample size for the mc and cross-check backends.
    #[arg(long, default_value_t = 10_000_000)]
    pub samples: u64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct Example1Args {
    /// Full configuration JSON (for instance the `inputs` block of a
    /// report); overrides every other flag.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    pub u: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Tilt)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = Estimator::DEFAULT_DELTA)]
    pub delta: f64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct Example2Args {
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 1.5)]
    pub alpha2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 3.0, 4.0])]
    pub u: Vec<f64>,
    /// Limit of the normalised second threshold when ρ = a.
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Tilt)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = Estimator::DEFAULT_DELTA)]
    pub delta: f64,
    /// Also estimate the conditional excess law (ρ = a).
    #[arg(long)]
    pub conditional: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [-1.0, 0.0, 1.0])]
    pub x: Vec<f64>,
    /// Also run the asymptotic independence check.
    #[arg(long)]
    pub independence: bool,
    #[arg(long, default_value_t = 10_000_000)]
    pub n_pilot: u64,
}

#[derive(Debug, Deserialize)]
struct QpInput {
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct AsymOutput {
    asymptotics: gsd_tail::TailAsymptotics,
    thresholds: gsd_tail::ThresholdSpec,
    evaluations: Vec<AsymPoint>,
}

#[derive(Debug, Serialize)]
struct AsymPoint {
    #[serde(flatten)]
    evaluation: gsd_tail::asymptotics::Evaluation,
    threshold: Vec<f64>,
}

fn load_model(arg: &str) -> anyhow::Result<ModelSpec> {
    Ok(ModelSpec::from_json_value(load_json_arg(arg)?)?)
}

fn pretty<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn matrix(rows: &[Vec<f64>]) -> anyhow::Result<DMatrix<f64>> {
    Ok(gsd_tail::linalg::matrix_from_rows(rows)?)
}

fn backend(kind: BackendKind, samples: u64, seed: u64) -> IntegrationBackend {
    match kind {
        BackendKind::Auto => IntegrationBackend::Auto,
        BackendKind::Quadrature => IntegrationBackend::Quadrature,
        BackendKind::Mc => IntegrationBackend::MonteCarlo { samples, seed },
        BackendKind::CrossCheck => IntegrationBackend::CrossCheck { samples, seed },
    }
}

fn example1_config(args: &Example1Args, seed: u64) -> anyhow::Result<Example1Config> {
    if let Some(c) = &args.config {
        return Ok(serde_json::from_value(load_json_arg(c)?).context("example1 configuration")?);
    }
    Ok(Example1Config {
        n_samples: args.n,
        estimator: args.estimator.build(args.delta),
        ..Example1Config::new(args.k, args.rho, args.p, args.u.clone(), seed)
    })
}

fn example2_config(args: &Example2Args, seed: u64) -> anyhow::Result<Example2Config> {
    if let Some(c) = &args.config {
        return Ok(serde_json::from_value(load_json_arg(c)?).context("example2 configuration")?);
    }
    Ok(Example2Config {
        n_samples: args.n,
        estimator: args.estimator.build(args.delta),
        q: args.q,
        conditional: args.conditional.then(|| ConditionalConfig {
            x_grid: args.x.clone(),
            n_samples: args.n,
            ..ConditionalConfig::default()
        }),
        independence: args.independence.then(|| IndependenceConfig {
            n_pilot: args.n_pilot,
            n_samples: args.n,
            ..IndependenceConfig::default()
        }),
        ..Example2Config::new(args.alpha1, args.alpha2, args.rho, args.a, args.u.clone(), seed)
    })
}

/// Render the output of one parsed invocation.
pub fn execute(cli: &Cli) -> anyhow::Result<String> {
    let json_only = |name: &str| -> anyhow::Result<()> {
        if cli.format == Format::Csv {
            bail!("{name} writes JSON only; CSV is available for example reports");
        }
        Ok(())
    };
    match &cli.command {
        Command::QpSolve { input, tol } => {
            json_only("qp-solve")?;
            let raw: QpInput = serde_json::from_value(load_json_arg(input)?).context("qp-solve input")?;
            let p = QpProblem::new(matrix(&raw.sigma)?, nalgebra::DVector::from_vec(raw.b))?;
            let sol = solve(&p)?;
            let report = verify_solution_with_seed(&p, &sol, *tol, cli.seed);
            pretty(&json!({ "solution": sol, "verification": report }))
        }
        Command::Asym(a) => {
            json_only("asym")?;
            let spec = load_model(&a.model)?;
            let mode: ThresholdMode = match &a.problem {
                Some(p) => serde_json::from_value(load_json_arg(p)?).context("threshold mode")?,
                None => ThresholdMode::PlainRay,
            };
            let problem = TailProblem::new(spec, &a.b, &mode)?.with_backend(backend(a.backend, a.samples, cli.seed));
            let asymptotics = match a.method {
                Method::Theorem => theorem31(&problem)?,
                Method::Corollary => corollary2(&problem)?,
            };
            let evaluations = a
                .u
                .iter()
                .map(|&u| {
                    Ok(AsymPoint {
                        evaluation: asymptotics.evaluate(u)?,
                        threshold: problem.threshold_at(u),
                    })
                })
                .collect::<gsd_tail::Result<Vec<_>>>()?;
            pretty(&AsymOutput {
                asymptotics,
                thresholds: problem.thresholds.clone(),
                evaluations,
            })
        }
        Command::McEstimate {
            model,
            b,
            u,
            n,
            estimator,
            delta,
        } => {
            json_only("mc-estimate")?;
            let spec = load_model(model)?;
            let est = mc_tail(&spec, b, *u, *n, cli.seed, estimator.build(*delta))?;
            pretty(&est)
        }
        Command::MdaCheck { law, params } => {
            json_only("mda-check")?;
            let law: RadialLaw = serde_json::from_value(load_json_arg(law)?).context("radial law")?;
            law.validate()?;
            let params = match params {
                Some(p) => serde_json::from_value(load_json_arg(p)?).context("certificate parameters")?,
                None => CertificateParams::default_for(&law),
            };
            pretty(&mda_certificate(&law, &params)?)
        }
        Command::Example1(args) => {
            let report = run_example1(&example1_config(args, cli.seed)?)?;
            encode(&report, cli.format)
        }
        Command::Example2(args) => {
            let report = run_example2(&example2_config(args, cli.seed)?)?;
            encode(&report, cli.format)
        }
        Command::Densities {
            kind,
            model,
            alpha,
            x,
            set,
        } => {
            json_only("densities")?;
            let need_model = || -> anyhow::Result<ModelSpec> {
                match model {
                    Some(m) => load_model(m),
                    None => bail!("--model is required for this density"),
                }
            };
            let scalar = || -> anyhow::Result<f64> {
                match x.as_slice() {
                    [v] => Ok(*v),
                    _ => bail!("expected a single value in --x"),
                }
            };
            let value = match kind {
                DensityKind::Joint => {
                    let spec = need_model()?;
                    // chi(2ᾱ) is the standard Kotz radius
                    let kotz = match spec.radial {
                        RadialLaw::Kotz { n, r, s, .. } => KotzParams { n, r, s },
                        RadialLaw::Chi { dof } if dof == 2.0 * spec.alpha.alpha_bar() => KotzParams::STANDARD,
                        other => bail!("joint density needs a Kotz radial law, got {other:?}"),
                    };
                    serde_json::to_value(kotz_density(&spec, &kotz, x)?)?
                }
                DensityKind::Sd => {
                    let alpha = AlphaVector::new(alpha.clone())?;
                    serde_json::to_value(sd_density(&alpha, x)?)?
                }
                DensityKind::Radial => json!({ "finite": need_model()?.radial.density(scalar()?)? }),
                DensityKind::SubvectorRadial => {
                    json!({ "finite": subvector_radial_density(&need_model()?, set, scalar()?)? })
                }
            };
            pretty(&json!({ "kind": format!("{kind:?}"), "x": x, "density": value }))
        }
    }
}

/// Parse, execute and write. Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { crate::EXIT_ARGUMENT } else { crate::EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|text| write_output(&text, cli.output.as_deref())) {
        Ok(()) => crate::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            crate::exit_code(&e)
        }
    }
}
