//! Experiment configuration, read from TOML.
//!
//! Every section is optional; a subcommand fails validation when its own
//! section is missing. Unknown keys are rejected.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use seqemp::arrays::Model;
use seqemp::bracketing::{bracketing_converges, NFn};
use seqemp::fclasses::{ClassKind, FunctionClass};
use seqemp::growth::{index_threshold, is_admissible_index};
use seqemp::verify::check_kappa;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "Model::iid_uniform")]
    pub model: Model,
    #[serde(default = "FunctionClass::halfline")]
    pub class: FunctionClass,
    /// Used when `--seed` is not given.
    pub seed: Option<u64>,
    pub simulate: Option<Simulate>,
    pub verify_maximal: Option<VerifyMaximal>,
    pub moment_fit: Option<MomentFit>,
    pub covariance: Option<Covariance>,
    pub chaining_scaling: Option<ChainingScaling>,
    pub aec: Option<Aec>,
    pub lipschitz: Option<Lipschitz>,
    pub bracketing: Option<Bracketing>,
    pub pipeline: Option<Pipeline>,
    pub cusum: Option<Cusum>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub n: usize,
    #[serde(default = "one")]
    pub rows: usize,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Walsh sign patterns times two-valued innovations.
    #[default]
    TwoValued,
    /// Centered half-line or class evaluations on simulated rows.
    Array,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Dyadic,
    All,
}

fn minus_one() -> f64 {
    -1.0
}
fn plus_one() -> f64 {
    1.0
}
fn eight() -> usize {
    8
}
fn sixteen() -> usize {
    16
}
fn sixty_four() -> usize {
    64
}
fn two() -> f64 {
    2.0
}
fn default_epsilon() -> f64 {
    seqemp::diagnostics::DEFAULT_AEC_EPSILON
}
fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyMaximal {
    #[serde(default)]
    pub source: SourceKind,
    pub n: usize,
    #[serde(default = "eight")]
    pub family_size: usize,
    #[serde(default = "minus_one")]
    pub lo: f64,
    #[serde(default = "plus_one")]
    pub hi: f64,
    #[serde(default = "sixteen")]
    pub net_points: usize,
    pub nu: f64,
    /// Defaults to `nu / 2`.
    pub alpha: Option<f64>,
    #[serde(default)]
    pub grid: GridKind,
    pub replicates: u64,
    /// Enumerate all innovation paths instead of sampling.
    #[serde(default)]
    pub exact: bool,
}

impl VerifyMaximal {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(self.nu / 2.0)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MomentFit {
    pub nu: f64,
    pub lambda: f64,
    pub block_lengths: Vec<usize>,
    #[serde(default = "sixteen")]
    pub net_points: usize,
    pub replicates: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Covariance {
    /// Class parameters of the factors, one per index.
    pub parameters: Vec<f64>,
    pub indices: Vec<usize>,
    pub split: usize,
    pub lambda: f64,
    pub replicates: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChainingScaling {
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub entropy: Option<NFn>,
    pub block_lengths: Vec<usize>,
    pub deltas: Vec<f64>,
    pub replicates: u64,
}

impl ChainingScaling {
    pub fn entropy(&self) -> NFn {
        self.entropy.clone().unwrap_or(NFn::CeilPower { c: 1.0, a: 2.0 })
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Aec {
    #[serde(default = "sixty_four")]
    pub net_points: usize,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "sequential")]
    pub process: seqemp::diagnostics::ProcessKind,
    pub deltas: Vec<f64>,
    pub ns: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub replicates: u64,
}

fn sequential() -> seqemp::diagnostics::ProcessKind {
    seqemp::diagnostics::ProcessKind::Sequential
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Lipschitz {
    pub n: usize,
    /// `[u1, v1, u2, v2]` for the sets `(u1, v1]` and `(u2, v2]`.
    #[serde(default)]
    pub set_pairs: Vec<[f64; 4]>,
    /// Class parameter of the member used for set-direction pairs.
    pub set_parameter: f64,
    /// Class parameters of function-direction pairs.
    #[serde(default)]
    pub function_pairs: Vec<[f64; 2]>,
    #[serde(default = "unit_interval")]
    pub function_set: [f64; 2],
    #[serde(default = "two")]
    pub p: f64,
    pub replicates: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Bracketing {
    pub epsilons: Vec<f64>,
    /// Count function for the integrals; derived from the class if omitted.
    pub entropy: Option<NFn>,
    pub lambdas: Vec<f64>,
    pub nus: Vec<f64>,
    #[serde(default = "plus_one")]
    pub eta: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub moment_cap: f64,
    pub eta: f64,
    pub block_lengths: Vec<usize>,
    pub replicates: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Cusum {
    pub n: usize,
    #[serde(default = "eight")]
    pub net_points: usize,
    pub replicates: u64,
    /// Rows are also drawn from this model when present; centering always
    /// uses the main model.
    pub alternative: Option<Model>,
}

pub fn parse(text: &str) -> Result<Config> {
    toml::from_str(text).context("invalid configuration")
}

/// Count-function exponent `a` in `N(eps) ~ eps^{-a}` of the configured class.
pub fn class_entropy_power(class: &FunctionClass) -> f64 {
    match class.kind {
        ClassKind::HalflineIndicators => 2.0,
        ClassKind::LipschitzBall => 1.0,
        ClassKind::FiniteExplicit { .. } => 0.0,
    }
}

fn require_even(nu: f64) -> Result<()> {
    ensure!(
        nu >= 2.0 && nu.fract() == 0.0 && (nu as u64) % 2 == 0,
        "nu = {nu}: the moment bound under mixing requires an even integer nu >= 2"
    );
    Ok(())
}

fn require_convergent(lambda: f64, nu: f64, a: f64) -> Result<()> {
    ensure!(lambda > 0.0, "lambda = {lambda} must be positive");
    ensure!(
        bracketing_converges(lambda, nu, a),
        "lambda = {lambda}, nu = {nu}: bracketing integral diverges since lambda/(2+lambda) + {a}/nu = {} >= 1",
        lambda / (2.0 + lambda) + a / nu
    );
    Ok(())
}

fn require_replicates(r: u64) -> Result<()> {
    ensure!(r > 0, "replicates must be positive");
    Ok(())
}

/// Checks that run before any simulation.
pub fn validate(cfg: &Config, subcommand: &str) -> Result<()> {
    cfg.model.validate().context("model")?;
    macro_rules! section {
        ($field:ident) => {
            match &cfg.$field {
                Some(s) => s,
                None => bail!("missing [{}] section for subcommand {subcommand}", stringify!($field)),
            }
        };
    }
    match subcommand {
        "simulate" => {
            let s = section!(simulate);
            ensure!(s.n > 0 && s.rows > 0, "simulate: n and rows must be positive");
        }
        "verify-maximal" => {
            let s = section!(verify_maximal);
            ensure!(s.n > 0 && s.family_size > 0, "verify_maximal: n and family_size must be positive");
            ensure!(s.nu >= 1.0, "verify_maximal: nu = {} must be >= 1", s.nu);
            let alpha = s.alpha();
            ensure!(
                alpha > 1.0 && is_admissible_index(1.0, alpha),
                "verify_maximal: alpha = {alpha} is inadmissible (need Q = 1 < 2^((alpha-1)/alpha) = {})",
                index_threshold(alpha)
            );
            if s.exact {
                ensure!(s.source == SourceKind::TwoValued, "verify_maximal: exact enumeration needs source = \"two_valued\"");
                ensure!(s.n <= seqemp::verify::MAX_ORACLE_N, "verify_maximal: exact enumeration supports n <= {}", seqemp::verify::MAX_ORACLE_N);
            } else {
                require_replicates(s.replicates)?;
            }
        }
        "moment-fit" => {
            let s = section!(moment_fit);
            require_even(s.nu)?;
            ensure!(s.lambda > 0.0, "moment_fit: lambda must be positive");
            ensure!(!s.block_lengths.is_empty() && !s.block_lengths.contains(&0), "moment_fit: block_lengths must be positive");
            require_replicates(s.replicates)?;
        }
        "covariance" => {
            let s = section!(covariance);
            ensure!(s.parameters.len() == s.indices.len(), "covariance: one parameter per index");
            ensure!(s.lambda > 0.0, "covariance: lambda must be positive");
            require_replicates(s.replicates)?;
        }
        "chaining-scaling" => {
            let s = section!(chaining_scaling);
            ensure!(
                cfg.model == Model::iid_uniform() && cfg.class.kind == ClassKind::HalflineIndicators,
                "chaining_scaling: the exact supremum is implemented for independent uniform rows and half-line indicators"
            );
            ensure!(s.nu > 2.0, "chaining_scaling: nu = {} must exceed 2", s.nu);
            check_kappa(s.kappa, s.nu, s.lambda).context("chaining_scaling")?;
            require_convergent(s.lambda, s.nu, s.entropy().leading_power())?;
            require_replicates(s.replicates)?;
        }
        "aec" => {
            let s = section!(aec);
            ensure!(s.epsilon > 0.0, "aec: epsilon must be positive");
            ensure!(!s.deltas.is_empty() && !s.ns.is_empty(), "aec: deltas and ns must be nonempty");
            require_replicates(s.replicates)?;
        }
        "lipschitz" => {
            let s = section!(lipschitz);
            ensure!(s.p >= 1.0, "lipschitz: p must be >= 1");
            require_replicates(s.replicates)?;
        }
        "bracketing" => {
            let s = section!(bracketing);
            ensure!(s.epsilons.iter().all(|e| *e > 0.0), "bracketing: epsilons must be positive");
            ensure!(s.eta > 0.0, "bracketing: eta must be positive");
        }
        "pipeline" => {
            let s = section!(pipeline);
            require_even(s.nu)?;
            ensure!(s.eta > 0.0 && s.eta <= 1.0, "pipeline: eta must lie in (0, 1]");
            // kappa and divergence are reported as failed hypotheses in the
            // verdict bundle, before any simulation
            require_replicates(s.replicates)?;
        }
        "cusum" => {
            let s = section!(cusum);
            ensure!(s.n > 0, "cusum: n must be positive");
            if let Some(alt) = &s.alternative {
                alt.validate().context("cusum alternative model")?;
            }
            require_replicates(s.replicates)?;
        }
        other => bail!("unknown subcommand {other}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = parse("[simulate]\nn = 10\n").unwrap();
        assert_eq!(cfg.model, Model::iid_uniform());
        assert_eq!(cfg.simulate.as_ref().unwrap().rows, 1);
        validate(&cfg, "simulate").unwrap();
        assert!(validate(&cfg, "aec").is_err());
        let err = parse("[simulate]\nn = 10\nlength = 3\n").unwrap_err();
        assert!(format!("{err:#}").contains("length"));
        assert!(parse("[model]\nkind = \"mystery\"\n").is_err());
    }

    #[test]
    fn class_and_model_tables() {
        let cfg = parse(
            "[model]\nkind = \"tv_ar1\"\ninnovation_sd = 1.0\ncoef = { kind = \"constant\", value = 0.5 }\n\
             [class]\nkind = \"lipschitz_ball\"\ninclude_zero = true\n",
        )
        .unwrap();
        assert!(cfg.class.include_zero);
        assert!(matches!(cfg.model, Model::TvAr1 { .. }));
    }

    #[test]
    fn rejects_before_simulation() {
        let odd = parse("[moment_fit]\nnu = 3\nlambda = 1.0\nblock_lengths = [16]\nreplicates = 1000\n").unwrap();
        let msg = format!("{:#}", validate(&odd, "moment-fit").unwrap_err());
        assert!(msg.contains("even integer"), "{msg}");
        let alpha = parse("[verify_maximal]\nn = 8\nnu = 2\nreplicates = 1000\n").unwrap();
        assert!(format!("{:#}", validate(&alpha, "verify-maximal").unwrap_err()).contains("inadmissible"));
        let kappa = parse(
            "[chaining_scaling]\nnu = 4\nlambda = 0.6666666666666666\nkappa = 0.3\nblock_lengths = [64]\ndeltas = [0.1]\nreplicates = 1000\n",
        )
        .unwrap();
        assert!(format!("{:#}", validate(&kappa, "chaining-scaling").unwrap_err()).contains("kappa"));
        let diverge = parse(
            "[chaining_scaling]\nnu = 4\nlambda = 2.0\nkappa = 0.1\nblock_lengths = [64]\ndeltas = [0.1]\nreplicates = 1000\n",
        )
        .unwrap();
        assert!(format!("{:#}", validate(&diverge, "chaining-scaling").unwrap_err()).contains("diverges"));
    }
}
