use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use twoweight::cantor::{boundary_sweep, divergence_sweep, growth_exponent, rows_to_csv, summarize, CantorConfig};
use twoweight::lattice::{random_instance, RandomParams};
use twoweight::prooftools::rubio_majorant;
use twoweight::testing::{norm_ascent, norm_exact_p2q2, verdict, AscentOptions, ReportDocument, TestingReport, DEFAULT_THRESHOLD};
use twoweight::{Instance, SimpleFunction};

mod verify;

use verify::{aggregate, verify_instance, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "twoweight", version, about = "Two-weight testing constants for vector-valued positive lattice operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random instance document.
    Gen(GenArgs),
    /// Run the invariant suite on one instance or a batch of seeds.
    Verify(VerifyArgs),
    /// Estimate the operator norm and report the testing constants.
    Norm(NormArgs),
    /// Sweep the Cantor construction over depths and emit CSV.
    Cantor(CantorArgs),
    /// Build the Rubio de Francia majorant of a function.
    Rubio(RubioArgs),
}

#[derive(clap::Args, Debug)]
struct ShapeArgs {
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 0.1)]
    mass_zero_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha_zero_fraction: f64,
}

impl ShapeArgs {
    fn params(&self) -> RandomParams {
        RandomParams {
            branching: self.branching,
            depth: self.depth as usize,
            p: self.p,
            q: self.q,
            mass_zero_fraction: self.mass_zero_fraction,
            alpha_zero_fraction: self.alpha_zero_fraction,
        }
    }
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    /// Instance document; omit to verify a seed batch.
    instance: Option<PathBuf>,
    /// Batch of seeds, `A..B` (inclusive) or a single seed.
    #[arg(long, conflicts_with = "instance")]
    seeds: Option<String>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Random test functions per instance.
    #[arg(long, default_value_t = 10)]
    functions: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Exact,
    Ascent,
}

#[derive(clap::Args, Debug)]
struct NormArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Ascent)]
    method: Method,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ratio of the estimate to `C₁` above which `C₁` is reported insufficient.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct CantorArgs {
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 0.7)]
    r: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    depths: Vec<usize>,
    /// Depths up to this one are also evaluated on the materialized instance.
    #[arg(long, default_value_t = 8)]
    materialize_up_to: usize,
    /// Accept r ≥ 1/q, where the construction stops diverging.
    #[arg(long)]
    allow_boundary: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct RubioArgs {
    instance: PathBuf,
    /// Function document mapping leaf labels to values.
    function: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    /// Exit 1.
    Compute(anyhow::Error),
    /// Exit 2.
    Invalid(anyhow::Error),
    /// Exit 3.
    Violation(String),
}

impl From<twoweight::Error> for Failure {
    fn from(e: twoweight::Error) -> Self {
        match e {
            twoweight::Error::NonFinite { .. } => Failure::Compute(e.into()),
            other => Failure::Invalid(other.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Invalid)?;
    Instance::from_json(&text)
        .with_context(|| format!("invalid instance {}", path.display()))
        .map_err(Failure::Invalid)
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    let write = || -> anyhow::Result<()> {
        match out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    };
    write().map_err(Failure::Compute)
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

fn parse_seeds(range: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Invalid(anyhow::anyhow!("--seeds expects A..B or a single seed, got {range:?}"));
    match range.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![range.trim().parse().map_err(|_| bad())?]),
    }
}

fn cmd_gen(args: &GenArgs) -> Outcome {
    let inst = random_instance(args.seed, &args.shape.params())?;
    let mut text = inst.to_json();
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    eprintln!("{} cells, {} leaves", inst.lattice().len(), inst.lattice().num_leaves());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let opts = VerifyOptions {
        functions: args.functions,
        tol: args.tol,
        restarts: args.restarts,
        function_seed: args.seed,
    };
    let runs = match (&args.instance, &args.seeds) {
        (Some(path), _) => {
            let inst = read_instance(path)?;
            vec![(None, verify_instance(&inst, &opts)?)]
        }
        (None, Some(range)) => {
            let seeds = parse_seeds(range)?;
            let params = args.shape.params();
            seeds
                .par_iter()
                .map(|&seed| {
                    let inst = random_instance(seed, &params)?;
                    let opts = VerifyOptions { function_seed: opts.function_seed ^ seed, ..opts };
                    Ok((Some(seed), verify_instance(&inst, &opts)?))
                })
                .collect::<twoweight::Result<Vec<_>>>()?
        }
        (None, None) => {
            return Err(Failure::Invalid(anyhow::anyhow!("give an instance path or --seeds A..B")));
        }
    };
    let instances = runs.len();
    let checks = aggregate(runs);
    let all_hold = checks.iter().all(|c| c.holds);
    let report = json!({ "instances": instances, "all_hold": all_hold, "checks": checks });
    emit(args.out.as_deref(), &pretty(&report))?;
    for c in &checks {
        eprintln!(
            "{:<18} {} over {} cases, worst slack {}",
            c.check,
            if c.holds { "holds" } else { "FAILS" },
            c.count,
            c.worst_slack.map_or("-".to_string(), |s| format!("{s:.3e}"))
        );
    }
    if all_hold {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.holds).map(|c| c.check).collect();
        Err(Failure::Violation(format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_norm(args: &NormArgs) -> Outcome {
    let inst = read_instance(&args.instance)?;
    let estimate = match args.method {
        Method::Exact => norm_exact_p2q2(&inst)?,
        Method::Ascent => norm_ascent(
            &inst,
            &AscentOptions { restarts: args.restarts, tol: args.tol, seed: args.seed, ..Default::default() },
        )?,
    };
    let report = TestingReport::compute(&inst)?;
    let v = verdict(&inst, &report, &estimate, args.threshold);
    emit(args.out.as_deref(), &pretty(&ReportDocument::new(&inst, &report, &estimate, v)))
}

fn cmd_cantor(args: &CantorArgs) -> Outcome {
    let config = if args.allow_boundary {
        CantorConfig::boundary(1, args.p, args.q, args.r)
    } else {
        CantorConfig::new(1, args.p, args.q, args.r)
    }?;
    if args.depths.is_empty() || args.depths.contains(&0) {
        return Err(Failure::Invalid(anyhow::anyhow!("--depths must list depths ≥ 1")));
    }
    let sweep = if args.allow_boundary { boundary_sweep } else { divergence_sweep };
    // rows are independent; the sweep helper also fills ratio_to_prev, so
    // evaluate each depth alone in parallel and then recompute ratios in order
    let mut rows = args
        .depths
        .par_iter()
        .map(|&d| sweep(args.p, args.q, args.r, &[d], args.materialize_up_to).map(|mut r| r.remove(0)))
        .collect::<twoweight::Result<Vec<_>>>()?;
    for k in 1..rows.len() {
        rows[k].ratio_to_prev = Some(rows[k].lhs_lower / rows[k - 1].lhs_lower);
    }
    emit(args.out.as_deref(), &rows_to_csv(&rows))?;
    let tail = &rows[rows.len().saturating_sub(4)..];
    match growth_exponent(tail) {
        Some(g) => eprintln!(
            "fitted growth exponent of lhs_lower over the last {} rows: {g:.4} (predicted {})",
            tail.len(),
            config.divergence_exponent().map_or("none: r ≥ 1/q".to_string(), |e| format!("{e:.4}"))
        ),
        None => eprintln!("need at least two depths to fit a growth exponent"),
    }
    if let Some(s) = summarize(&config, &rows) {
        eprintln!(
            "C₁ band [{:.4}, {:.4}], ‖f‖_p limit {:.4}, lhs_lower growth ×{:.3}, C₁ insufficient: {}",
            s.c1_low, s.c1_high, s.f_norm_limit, s.lhs_lower_growth, s.c1_insufficient
        );
    }
    Ok(())
}

fn cmd_rubio(args: &RubioArgs) -> Outcome {
    let inst = read_instance(&args.instance)?;
    let text = fs::read_to_string(&args.function)
        .with_context(|| format!("reading {}", args.function.display()))
        .map_err(Failure::Invalid)?;
    let f = SimpleFunction::from_json(inst.lattice(), &text)?;
    let r = rubio_majorant(&inst, &f, args.tol)?;
    let doc = json!({
        "truncation_k": r.truncation_k,
        "norm_ratio": r.norm_ratio,
        "a1_constant": r.a1_constant,
        "a1_bound": r.a1_bound(),
        "weight": r.weight,
        "tail_norm_bound": r.tail_norm_bound,
        "tail_sup": r.tail_sup,
        "measured_maximal_ratio": r.measured_maximal_ratio,
        "a1_violations": r.a1_violations(&inst, 1e-10).iter().map(|&c| inst.lattice().label(c)).collect::<Vec<_>>(),
        "majorant": r.majorant.to_document(inst.lattice()),
    });
    emit(args.out.as_deref(), &pretty(&doc))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Cantor(a) => cmd_cantor(a),
        Command::Rubio(a) => cmd_rubio(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(3)
        }
    }
}
