//! Subcommand execution and artifact emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use seqemp::arrays::{Model, TriangularArrayRow};
use seqemp::bracketing::{bracketing_integral, bracketing_number, feasibility_region, NFn};
use seqemp::diagnostics::{
    aec_table, changepoint_cusum, lipschitz_increments, pipeline_check, AecConfig, LipschitzConfig,
    PipelineConfig,
};
use seqemp::fclasses::{CenteringTable, FunctionClass, Member};
use seqemp::rng::replicate_seed;
use seqemp::verify::{
    check_covariance_inequality, exact_small_oracle, fit_moment_constant, scaling_check,
    verify_maximal_inequality, ArraySource, ChainingSpec, IncrementSource, PairGrid, TwoValued,
};

use crate::config::{self, Config, GridKind, SourceKind};

pub const SUBCOMMANDS: [&str; 10] = [
    "simulate",
    "verify-maximal",
    "moment-fit",
    "covariance",
    "chaining-scaling",
    "aec",
    "lipschitz",
    "bracketing",
    "pipeline",
    "cusum",
];

/// Everything a run needs besides the configuration itself.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub subcommand: String,
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub replicates: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config_hash: &'a str,
    seed: u64,
    replicates_override: Option<u64>,
    threads: usize,
    versions: Versions,
    artifacts: Vec<String>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Versions {
    seqemp: &'static str,
    seqemp_cli: &'static str,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    subcommand: &'a str,
    config_hash: &'a str,
    seed: u64,
    result: T,
}

struct Writer<'a> {
    dir: &'a Path,
    subcommand: &'a str,
    hash: &'a str,
    seed: u64,
    written: Vec<String>,
}

impl Writer<'_> {
    fn json<T: Serialize>(&mut self, name: &str, result: T) -> Result<()> {
        let body = serde_json::to_string_pretty(&Envelope {
            subcommand: self.subcommand,
            config_hash: self.hash,
            seed: self.seed,
            result,
        })?;
        self.put(name, body + "\n")
    }

    /// CSV with `config_hash` and `seed` appended to every row.
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header.iter().copied().chain(["config_hash", "seed"]))?;
        let seed = self.seed.to_string();
        for row in rows {
            w.write_record(row.iter().map(String::as_str).chain([self.hash, seed.as_str()]))?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
        self.put(name, String::from_utf8(bytes)?)
    }

    fn put(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn override_replicates(r: u64, opt: &RunOptions) -> u64 {
    opt.replicates.unwrap_or(r)
}

/// Hex SHA-256 of the configuration text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn run(opt: &RunOptions) -> Result<()> {
    let started = Instant::now();
    let text = fs::read_to_string(&opt.config_path)
        .with_context(|| format!("cannot read config {}", opt.config_path.display()))?;
    let cfg = config::parse(&text)?;
    config::validate(&cfg, &opt.subcommand)?;
    let seed = opt.seed.or(cfg.seed).unwrap_or(0);
    let hash = config_hash(&text);
    fs::create_dir_all(&opt.out).with_context(|| format!("cannot create output directory {}", opt.out.display()))?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = opt.threads {
            b = b.num_threads(t);
        }
        b.build()?
    };
    let mut w = Writer {
        dir: &opt.out,
        subcommand: &opt.subcommand,
        hash: &hash,
        seed,
        written: Vec::new(),
    };
    pool.install(|| dispatch(&cfg, opt, seed, &mut w))?;
    let manifest = Manifest {
        subcommand: &opt.subcommand,
        config_hash: &hash,
        seed,
        replicates_override: opt.replicates,
        threads: pool.current_num_threads(),
        versions: Versions {
            seqemp: seqemp::VERSION,
            seqemp_cli: env!("CARGO_PKG_VERSION"),
        },
        artifacts: w.written.clone(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let path = opt.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn net_of(class: &FunctionClass, points: usize) -> Result<Vec<Member>> {
    Ok(class.parameter_grid(points)?)
}

fn dispatch(cfg: &Config, opt: &RunOptions, seed: u64, w: &mut Writer) -> Result<()> {
    match opt.subcommand.as_str() {
        "simulate" => {
            let s = cfg.simulate.as_ref().expect("validated");
            let mut rows = Vec::new();
            for r in 0..s.rows {
                let row = TriangularArrayRow::generate(&cfg.model, s.n, replicate_seed(seed, r as u64))?;
                for (i, x) in row.values.iter().enumerate() {
                    rows.push(vec![r.to_string(), (i + 1).to_string(), num(*x)]);
                }
            }
            w.csv("rows.csv", &["row", "index", "value"], rows)
        }
        "verify-maximal" => {
            let s = cfg.verify_maximal.as_ref().expect("validated");
            let grid = match s.grid {
                GridKind::Dyadic => PairGrid::Dyadic,
                GridKind::All => PairGrid::All,
            };
            let two_valued = || TwoValued::walsh(s.n, s.family_size, s.lo, s.hi);
            let report = if s.exact {
                exact_small_oracle(&two_valued()?, s.nu, s.alpha(), &grid)?
            } else {
                let source = match s.source {
                    SourceKind::TwoValued => IncrementSource::TwoValued(two_valued()?),
                    SourceKind::Array => IncrementSource::Array(ArraySource::new(
                        cfg.model.clone(),
                        net_of(&cfg.class, s.net_points)?,
                        s.n,
                    )?),
                };
                verify_maximal_inequality(&source, s.nu, s.alpha(), &grid, override_replicates(s.replicates, opt), seed)?
            };
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.i.to_string(),
                        r.j.to_string(),
                        num(r.s_moment),
                        num(r.s_se),
                        num(r.m_moment),
                        num(r.m_se),
                        num(r.bound),
                        num(r.margin),
                    ]
                })
                .collect();
            w.csv(
                "verify_maximal.csv",
                &["i", "j", "sum_moment", "sum_se", "max_moment", "max_se", "bound", "margin"],
                rows,
            )?;
            w.json("verify_maximal.json", report)
        }
        "moment-fit" => {
            let s = cfg.moment_fit.as_ref().expect("validated");
            let fit = fit_moment_constant(
                &cfg.model,
                net_of(&cfg.class, s.net_points)?,
                s.nu,
                s.lambda,
                &s.block_lengths,
                override_replicates(s.replicates, opt),
                seed,
            )?;
            let rows = fit
                .rows
                .iter()
                .map(|r| vec![r.m.to_string(), num(r.norm), num(r.norm_se), num(r.c_hat)])
                .collect();
            w.csv("moment_fit.csv", &["m", "norm", "norm_se", "c_hat"], rows)?;
            w.json("moment_fit.json", fit)
        }
        "covariance" => {
            let s = cfg.covariance.as_ref().expect("validated");
            let factors = s
                .parameters
                .iter()
                .map(|p| cfg.class.member(*p))
                .collect::<seqemp::Result<Vec<_>>>()?;
            let report = check_covariance_inequality(
                &cfg.model,
                &factors,
                &s.indices,
                s.split,
                s.lambda,
                override_replicates(s.replicates, opt),
                seed,
            )?;
            w.json("covariance.json", report)
        }
        "chaining-scaling" => {
            let s = cfg.chaining_scaling.as_ref().expect("validated");
            let spec = ChainingSpec::new(s.entropy(), s.nu, s.lambda, s.kappa, 1.0)?;
            let report = scaling_check(&spec, &s.block_lengths, &s.deltas, override_replicates(s.replicates, opt), seed)?;
            let rows = report
                .rows
                .iter()
                .map(|r| vec![r.m.to_string(), num(r.delta), num(r.eta), num(r.lhs), num(r.lhs_se), num(r.rhs), num(r.c_hat)])
                .collect();
            w.csv("chaining_scaling.csv", &["m", "delta", "eta", "lhs", "lhs_se", "rhs", "c_hat"], rows)?;
            w.json("chaining_scaling.json", report)
        }
        "aec" => {
            let s = cfg.aec.as_ref().expect("validated");
            let table = aec_table(&AecConfig {
                model: cfg.model.clone(),
                net: net_of(&cfg.class, s.net_points)?,
                p: s.p,
                process: s.process,
                deltas: s.deltas.clone(),
                ns: s.ns.clone(),
                epsilon: s.epsilon,
                replicates: override_replicates(s.replicates, opt),
                seed,
            })?;
            let rows = table
                .iter()
                .map(|r| vec![num(r.delta), r.n.to_string(), num(r.p_hat), num(r.se), num(r.split1), num(r.split2)])
                .collect();
            w.csv("aec.csv", &["delta", "n", "p_hat", "se", "split1", "split2"], rows)?;
            w.json("aec.json", table)
        }
        "lipschitz" => {
            let s = cfg.lipschitz.as_ref().expect("validated");
            let function_pairs = s
                .function_pairs
                .iter()
                .map(|[a, b]| Ok((cfg.class.member(*a)?, cfg.class.member(*b)?)))
                .collect::<seqemp::Result<Vec<_>>>()?;
            let report = lipschitz_increments(&LipschitzConfig {
                model: cfg.model.clone(),
                n: s.n,
                set_pairs: s.set_pairs.iter().map(|[a, b, c, d]| ((*a, *b), (*c, *d))).collect(),
                set_member: cfg.class.member(s.set_parameter)?,
                function_pairs,
                function_set: (s.function_set[0], s.function_set[1]),
                p: s.p,
                replicates: override_replicates(s.replicates, opt),
                seed,
            })?;
            let mut rows = Vec::new();
            for (direction, list) in [("set", &report.set_rows), ("function", &report.function_rows)] {
                for r in list.iter() {
                    rows.push(vec![
                        direction.to_string(),
                        num(r.distance),
                        num(r.norm),
                        num(r.se),
                        r.ratio.map(num).unwrap_or_default(),
                    ]);
                }
            }
            w.csv("lipschitz.csv", &["direction", "distance", "norm", "se", "ratio"], rows)?;
            w.json("lipschitz.json", report)
        }
        "bracketing" => {
            let s = cfg.bracketing.as_ref().expect("validated");
            let marginal = cfg.model.marginals(1)?[0];
            let counts = s
                .epsilons
                .iter()
                .map(|e| Ok(vec![num(*e), bracketing_number(&cfg.class, *e, &marginal)?.to_string()]))
                .collect::<seqemp::Result<Vec<_>>>()?;
            w.csv("bracketing_numbers.csv", &["epsilon", "count"], counts)?;
            let entropy = s.entropy.clone().unwrap_or(NFn::CeilPower {
                c: 1.0,
                a: config::class_entropy_power(&cfg.class),
            });
            let a = entropy.leading_power();
            let region = feasibility_region(&s.lambdas, &s.nus, a);
            let mut integrals = Vec::new();
            for &(lambda, nu, converges) in &region {
                let value = if converges {
                    bracketing_integral(&entropy, lambda, nu, s.eta).ok().map(|q| q.value)
                } else {
                    None
                };
                integrals.push(vec![
                    num(lambda),
                    num(nu),
                    num(a),
                    converges.to_string(),
                    value.map(num).unwrap_or_default(),
                ]);
            }
            w.csv("feasibility.csv", &["lambda", "nu", "a", "converges", "integral"], integrals)?;
            w.json("bracketing.json", (&entropy, s.eta, &region))
        }
        "pipeline" => {
            let s = cfg.pipeline.as_ref().expect("validated");
            let report = pipeline_check(&PipelineConfig {
                model: cfg.model.clone(),
                class: cfg.class.clone(),
                nu: s.nu,
                lambda: s.lambda,
                kappa: s.kappa,
                moment_cap: s.moment_cap,
                eta: s.eta,
                block_lengths: s.block_lengths.clone(),
                replicates: override_replicates(s.replicates, opt),
                seed,
            })?;
            w.json("pipeline.json", report)
        }
        "cusum" => {
            let s = cfg.cusum.as_ref().expect("validated");
            let net = net_of(&cfg.class, s.net_points)?;
            let table = CenteringTable::new(&net, &cfg.model.marginals(s.n)?);
            let replicates = override_replicates(s.replicates, opt);
            let mut models: Vec<(&str, &Model)> = vec![("null", &cfg.model)];
            if let Some(alt) = &s.alternative {
                models.push(("alternative", alt));
            }
            let mut rows = Vec::new();
            let mut medians = Vec::new();
            for (label, model) in models {
                let mut stats = Vec::with_capacity(replicates as usize);
                for r in 0..replicates {
                    let row = TriangularArrayRow::generate(model, s.n, replicate_seed(seed, r))?;
                    let stat = changepoint_cusum(&row, &net, &table)?;
                    rows.push(vec![label.to_string(), r.to_string(), num(stat)]);
                    stats.push(stat);
                }
                stats.sort_by(f64::total_cmp);
                medians.push((label, stats[stats.len() / 2]));
            }
            w.csv("cusum.csv", &["model", "replicate", "statistic"], rows)?;
            w.json("cusum.json", medians)
        }
        other => Err(anyhow!("unknown subcommand {other}")),
    }
}
