mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use fixop::params::{self, ChainVerdict};
use fixop::solver::{IterationTrace, Status};
use fixop::verify::{self, Property, Sampler, Verdict};
use fixop::{Point, PrimitiveSet};

use config::{ExperimentConfig, VerifyConfig};

#[derive(Parser)]
#[command(name = "fixop", version, about = "Fixed-point operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of an experiment config and write the traces.
    Run {
        config: PathBuf,
        /// Run the methods concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Parameter calculus queries.
    Params {
        #[command(subcommand)]
        query: ParamsQuery,
    },
    /// Sample an operator class inequality and print the report as JSON.
    Verify { config: PathBuf },
    /// Constructions showing where the composition rules stop holding.
    Counterexample {
        #[command(subcommand)]
        name: Counterexample,
    },
}

#[derive(Subcommand)]
enum ParamsQuery {
    /// ν(λ, μ) = 4(λ + μ − λμ)/(4 − λμ).
    Nu { lambda: f64, mu: f64 },
    /// Full composition verdict as JSON.
    Verdict { lambda: f64, mu: f64 },
    /// ν over a square grid, as CSV.
    NuGrid {
        #[arg(long, default_value_t = 0.1)]
        min: f64,
        #[arg(long, default_value_t = 3.9)]
        max: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// αβ/(α + β) for an α-SPC and a β-SPC.
    #[command(allow_negative_numbers = true)]
    Gamma { alpha: f64, beta: f64 },
    /// (Σ 1/α_i)^{-1} for a chain of demicontractions.
    #[command(allow_negative_numbers = true)]
    Chain {
        #[arg(required = true, num_args = 1..)]
        alphas: Vec<f64>,
    },
    RfneToSpc { lambda: f64 },
    #[command(allow_negative_numbers = true)]
    SpcToRfne { alpha: f64 },
    /// Constant of the μ-relaxation of an α-demicontraction.
    #[command(allow_negative_numbers = true)]
    RelaxDemicontraction { alpha: f64, mu: f64 },
    /// Σ w_i λ_i; pass `--weights` and `--values` with equal lengths.
    ConvexLambda {
        #[arg(long, num_args = 1.., required = true)]
        weights: Vec<f64>,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// 1 − (Σ w_i/(1 − α_i))^{-1}.
    #[command(allow_negative_numbers = true)]
    ConvexAlpha {
        #[arg(long, num_args = 1.., required = true)]
        weights: Vec<f64>,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum Counterexample {
    /// Violation of the ρ-relaxed-cutter inequality for some ρ < ν*.
    Sharpness {
        #[arg(default_value_t = 3.0)]
        lambda: f64,
        #[arg(default_value_t = 1.0)]
        mu: f64,
        #[arg(default_value_t = 3.9)]
        rho: f64,
    },
    /// Two relaxed projections onto one hyperplane composing to the identity.
    FixCollapse {
        #[arg(default_value_t = 3.0)]
        lambda: f64,
        #[arg(default_value_t = 1.5)]
        mu: f64,
    },
    /// A composition that is no relaxed cutter for λμ > 4.
    NotRelaxedCutter {
        #[arg(default_value_t = 3.0)]
        lambda: f64,
        #[arg(default_value_t = 1.6)]
        mu: f64,
    },
    /// Fixed points of the composition on the lines x₂ = 0 and x₂ = offset.
    Fixv {
        #[arg(default_value_t = 2.0)]
        lambda: f64,
        #[arg(default_value_t = 2.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        offset: f64,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, parallel } => run(&config, parallel),
        Command::Params { query } => params_query(query),
        Command::Verify { config } => verify_cmd(&config),
        Command::Counterexample { name } => counterexample(name),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn seed_override(seed: u64) -> Result<u64> {
    match std::env::var("FP_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("FP_SEED: not an integer: {s:?}")),
        Err(_) => Ok(seed),
    }
}

fn run(path: &Path, parallel: bool) -> Result<ExitCode> {
    let mut cfg: ExperimentConfig = config::load(path)?;
    cfg.seed = seed_override(cfg.seed)?;
    if cfg.methods.is_empty() {
        bail!("methods: at least one method is required");
    }
    let world = cfg.problem.build(cfg.seed)?;
    let presets = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, m)| m.build(&world, &format!("methods[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    for (i, preset) in presets.iter().enumerate() {
        if preset.v_base.dim() != cfg.x0.dim() {
            bail!(
                "x0: dimension {} does not match methods[{i}] (dimension {})",
                cfg.x0.dim(),
                preset.v_base.dim()
            );
        }
    }
    let stop = cfg.stopping.build()?;
    let reference = cfg.reference.as_ref();
    let run_one = |p: &fixop::solver::Preset| p.run(&stop, &cfg.x0, reference);
    let traces: Vec<IterationTrace> = if parallel {
        presets.par_iter().map(run_one).collect::<fixop::Result<_>>()?
    } else {
        presets.iter().map(run_one).collect::<fixop::Result<_>>()?
    };
    let echo = serde_json::to_value(&cfg)?;
    let mut ok = true;
    for (method, trace) in cfg.methods.iter().zip(&traces) {
        if let Some(t) = &cfg.output.csv {
            output::write_atomic(Path::new(&output::expand(t, &method.name)), &trace.to_csv())?;
        }
        if let Some(t) = &cfg.output.json {
            output::write_atomic(Path::new(&output::expand(t, &method.name)), &trace.to_json(&echo))?;
        }
        println!("{}", trace.summary());
        ok &= match trace.status {
            Status::Converged => true,
            Status::MaxIters => cfg.allow_max_iters,
            Status::Stalled | Status::Diverged => false,
        };
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn params_query(q: ParamsQuery) -> Result<ExitCode> {
    match q {
        ParamsQuery::Nu { lambda, mu } => {
            let v = params::nu_star(lambda, mu)?;
            match v.nu_star {
                None => {
                    println!("no solution: lambda * mu = 4");
                    return Ok(ExitCode::FAILURE);
                }
                Some(nu) => {
                    println!("{nu}");
                    if !v.certified {
                        eprintln!("note: lambda * mu > 4, the value is not a composition constant ({:?})", v.note);
                    }
                }
            }
        }
        ParamsQuery::Verdict { lambda, mu } => print_json(&params::nu_star(lambda, mu)?)?,
        ParamsQuery::NuGrid { min, max, step } => {
            let mut out = String::from("lambda,mu,nu\n");
            for row in params::nu_grid(min, max, step)? {
                let nu = row.nu.map(|v| format!("{v:.16e}")).unwrap_or_default();
                out.push_str(&format!("{:.16e},{:.16e},{nu}\n", row.lambda, row.mu));
            }
            print!("{out}");
        }
        ParamsQuery::Gamma { alpha, beta } => println!("{}", params::gamma_star(alpha, beta)?),
        ParamsQuery::Chain { alphas } => match params::chain_gamma(&alphas)? {
            ChainVerdict::Accepted { gamma } => println!("{gamma}"),
            ChainVerdict::ZeroReciprocalSum => {
                println!("undefined: the reciprocal sum is zero");
                return Ok(ExitCode::FAILURE);
            }
            ChainVerdict::NotBelowOne { gamma } => {
                println!("not certified: gamma = {gamma} is not below 1");
                return Ok(ExitCode::FAILURE);
            }
            ChainVerdict::NegativeWithPositiveMember { gamma } => {
                println!("not certified: gamma = {gamma} is negative although one constant is positive");
                return Ok(ExitCode::FAILURE);
            }
        },
        ParamsQuery::RfneToSpc { lambda } => println!("{}", params::rfne_to_spc(lambda)?),
        ParamsQuery::SpcToRfne { alpha } => println!("{}", params::spc_to_rfne(alpha)?),
        ParamsQuery::RelaxDemicontraction { alpha, mu } => {
            println!("{}", params::relax_demicontraction(alpha, mu)?)
        }
        ParamsQuery::ConvexLambda { weights, values } => {
            println!("{}", params::convex_lambda(&weights, &values)?)
        }
        ParamsQuery::ConvexAlpha { weights, values } => {
            println!("{}", params::convex_alpha(&weights, &values)?)
        }
    }
    Ok(ExitCode::SUCCESS)
}

const DRAWN_FIX_POINTS: usize = 16;

fn verify_cmd(path: &Path) -> Result<ExitCode> {
    let mut cfg: VerifyConfig = config::load(path)?;
    cfg.seed = seed_override(cfg.seed)?;
    let world = cfg.problem.build(cfg.seed)?;
    let op = world.operator(&cfg.operator, "operator")?;
    let cert = match &cfg.property {
        Some(p) => p.build()?,
        None => op
            .certificate()
            .ok_or_else(|| anyhow!("property: the operator carries no certificate, name one explicitly"))?,
    };
    let sampler = match (&cfg.sampler.centers, &cfg.sampler.radii) {
        (Some(c), r) => Sampler::new(c.clone(), r.clone().unwrap_or(verify::DEFAULT_RADII.to_vec()))
            .context("sampler")?,
        (None, None) => {
            let sets: Vec<PrimitiveSet> = world.sets();
            if sets.is_empty() {
                Sampler::origin(op.dim())
            } else {
                Sampler::around_sets(&sets).context("sampler")?
            }
        }
        (None, Some(_)) => bail!("sampler.radii: needs sampler.centers"),
    };
    let fix_points = match &cfg.fix_points {
        Some(f) => f.clone(),
        None if cert.is_pair_class() => Vec::new(),
        None => {
            let fix = op
                .fix_set()
                .ok_or_else(|| anyhow!("fix_points: the operator has no known fixed-point set, list points explicitly"))?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..DRAWN_FIX_POINTS)
                .map(|_| fix.pull_in(&sampler.sample(&mut rng)))
                .collect::<fixop::Result<Vec<Point>>>()?
        }
    };
    let report = verify::check_class(&op, &Property::Class(cert), &sampler, &fix_points, cfg.samples, cfg.seed)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &cfg.output {
        Some(p) => output::write_atomic(Path::new(p), &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{}: {:?}, worst slack {:.3e} over {} samples",
        report.property, report.verdict, report.worst_slack, report.samples
    );
    Ok(match report.verdict {
        Verdict::PassedSampling => ExitCode::SUCCESS,
        Verdict::ViolationFound => ExitCode::FAILURE,
    })
}

fn counterexample(name: Counterexample) -> Result<ExitCode> {
    match name {
        Counterexample::Sharpness { lambda, mu, rho } => print_json(&verify::sharpness_witness(lambda, mu, rho)?)?,
        Counterexample::FixCollapse { lambda, mu } => {
            let seed = seed_override(0)?;
            print_json(&verify::fix_collapse_witness(lambda, mu, 1000, seed)?)?
        }
        Counterexample::NotRelaxedCutter { lambda, mu } => {
            print_json(&verify::not_relaxed_cutter_witness(lambda, mu)?)?
        }
        Counterexample::Fixv { lambda, mu, offset, iterations } => {
            let a = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0])?, 0.0)?;
            let b = PrimitiveSet::hyperplane(Point::new(vec![0.0, 1.0])?, offset)?;
            print_json(&verify::fixv_characterization(&a, &b, lambda, mu, iterations)?)?
        }
    }
    Ok(ExitCode::SUCCESS)
}
