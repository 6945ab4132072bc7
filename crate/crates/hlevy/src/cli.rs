//! Command-line interface: simulate paths, tabulate limit laws, run
//! convergence experiments, and re-render reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 threshold
//! violation under `compare --check`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::burgers::LimitLaw;
use crate::ensemble::{build_matrix_params, sample_path};
use crate::error::{Error, Result};
use crate::export;
use crate::harness::{
    check_summary, parse_preset, report, run_experiment, run_gap_diagnostics, ResolvedPair,
    RunConfig, RunSummary,
};
use crate::measures::GeneratingPair;

#[derive(Parser, Debug)]
#[command(
    name = "hlevy",
    version,
    about = "Hermitian Lévy ensembles, their spectra, and the limiting free Lévy laws"
)]
struct Cli {
    /// Master seed for anything random.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct PairArgs {
    /// Named preset: semicircle:σ², free_poisson:λ, or mixed:σ²,λ,jump.
    #[arg(long, conflicts_with = "pair_json")]
    preset: Option<String>,
    /// JSON file holding an inline generating pair.
    #[arg(long)]
    pair_json: Option<PathBuf>,
}

impl PairArgs {
    fn resolve(&self) -> Result<ResolvedPair> {
        match (&self.preset, &self.pair_json) {
            (Some(p), None) => parse_preset(p),
            (None, Some(path)) => {
                let pair: GeneratingPair =
                    serde_json::from_str(&std::fs::read_to_string(path)?)
                        .map_err(|e| Error::Usage(format!("bad pair JSON: {e}")))?;
                pair.validate()?;
                Ok(ResolvedPair {
                    pair,
                    kind: crate::harness::ReferenceKind::Solver,
                    label: "inline".into(),
                })
            }
            _ => Err(Error::Usage(
                "exactly one of --preset / --pair-json is required".into(),
            )),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one matrix path and write its skeleton (CSV + binary dump).
    Simulate {
        #[command(flatten)]
        pair: PairArgs,
        /// Matrix dimension.
        #[arg(long)]
        n: usize,
        /// Time horizon.
        #[arg(long = "T", value_name = "T")]
        horizon: f64,
        /// Truncation exponent α ∈ (0, 1/2).
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Uniform grid points on (0, T].
        #[arg(long, default_value_t = 10)]
        n_grid: usize,
    },
    /// Tabulate density and CDF of the limit law at one time.
    Limit {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        t: f64,
        /// Evaluation grid lo:hi:count.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Run a Monte Carlo convergence experiment from a JSON config.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Exit with code 3 when thresholds are violated.
        #[arg(long, default_value_t = false)]
        check: bool,
    },
    /// Eigenvalue gap / repulsion-moment diagnostics on Hermitian
    /// Brownian-motion samples.
    Diagnose {
        /// Dimensions, comma separated.
        #[arg(long, default_value = "25,50,100", value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
    },
    /// Re-render the summary of a finished run directory from artifacts.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::Simulate {
            pair,
            n,
            horizon,
            alpha,
            n_grid,
        } => cmd_simulate(pair, *n, *horizon, *alpha, *n_grid, cli.seed, &out_dir, cli.quiet),
        Command::Limit { pair, t, grid } => cmd_limit(pair, *t, grid, &out_dir, cli.quiet),
        Command::Compare { config, check } => cmd_compare(config, *check, cli, &out_dir),
        Command::Diagnose {
            n_list,
            t,
            samples,
            p,
        } => cmd_diagnose(n_list, *t, *samples, *p, cli.seed, &out_dir, cli.quiet),
        Command::Report { run } => {
            let summary = report(run)?;
            if !cli.quiet {
                print_summary(&summary);
            }
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    pair: &PairArgs,
    n: usize,
    horizon: f64,
    alpha: f64,
    n_grid: usize,
    seed: u64,
    out_dir: &Path,
    quiet: bool,
) -> Result<i32> {
    let resolved = pair.resolve()?;
    let params = build_matrix_params(&resolved.pair, n, alpha)?;
    let path = sample_path(&params, horizon, n_grid, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let dump_name = "path_matrices.bin";
    let mut dump = Vec::new();
    export::write_matrix_dump(
        &mut dump,
        n,
        path.skeleton.iter().map(|p| &p.matrix),
    )?;
    std::fs::write(out_dir.join(dump_name), dump)?;
    std::fs::write(out_dir.join("path.csv"), export::path_csv(&path, dump_name))?;
    export::write_json(&out_dir.join("params.json"), &params)?;
    if !quiet {
        println!(
            "wrote {} skeleton states ({} jumps) to {}",
            path.skeleton.len(),
            path.jump_events.len(),
            out_dir.display()
        );
    }
    Ok(0)
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("grid must be lo:hi:count, got {spec:?}")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Usage(format!("bad grid lo {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Usage(format!("bad grid hi {:?}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Usage(format!("bad grid count {:?}", parts[2])))?;
    if !(lo < hi) || count < 2 {
        return Err(Error::Usage("grid needs lo < hi and count >= 2".into()));
    }
    Ok((0..count)
        .map(|i| {
            let s = i as f64 / (count - 1) as f64;
            lo * (1.0 - s) + hi * s
        })
        .collect())
}

fn cmd_limit(pair: &PairArgs, t: f64, grid: &str, out_dir: &Path, quiet: bool) -> Result<i32> {
    let resolved = pair.resolve()?;
    let xs = parse_grid(grid)?;
    let law = LimitLaw::new(resolved.pair, t)?;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        rows.push((t, x, law.density(x)?, law.cdf(x)?));
    }
    std::fs::create_dir_all(out_dir)?;
    let file = out_dir.join("limit.csv");
    std::fs::write(&file, export::limit_table_csv(&rows))?;
    if !quiet {
        println!("wrote {} rows to {}", rows.len(), file.display());
    }
    Ok(0)
}

fn cmd_compare(config: &Path, check: bool, cli: &Cli, _out: &Path) -> Result<i32> {
    let cfg = RunConfig::from_json(&std::fs::read_to_string(config)?)?;
    let summary = run_experiment(&cfg, cli.out.as_deref())?;
    if !cli.quiet {
        print_summary(&summary);
    }
    if check {
        let violations = check_summary(&summary, &cfg.tolerances);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("threshold violation: {v}");
            }
            return Ok(3);
        }
    }
    Ok(0)
}

fn cmd_diagnose(
    n_list: &[usize],
    t: f64,
    samples: usize,
    p: f64,
    seed: u64,
    out_dir: &Path,
    quiet: bool,
) -> Result<i32> {
    let out = run_gap_diagnostics(n_list, t, samples, p, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let file = out_dir.join("diagnostics.json");
    export::write_json(&file, &out)?;
    if !quiet {
        for o in &out {
            println!(
                "n = {:>4}: repulsion estimate {:.6} (se {:.6}), min gap {:.3e} over {} samples",
                o.n,
                o.diagnostics.repulsion_estimate,
                o.diagnostics.stderr,
                o.diagnostics.min_gap,
                o.diagnostics.n_samples
            );
        }
        println!("wrote {}", file.display());
    }
    Ok(0)
}

fn print_summary(summary: &RunSummary) {
    println!(
        "experiment {:?} (pair {}, seed {}, {} failed paths)",
        summary.experiment, summary.pair_label, summary.master_seed, summary.failed_paths
    );
    println!(
        "{:>6} {:>8} {:>10} {:>10} {:>10} {:>10} {:>12}",
        "n", "t", "ks_mean", "ks_se", "w1_mean", "psi_dev", "min_gap"
    );
    for c in &summary.cells {
        println!(
            "{:>6} {:>8.4} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>12.3e}",
            c.n, c.t, c.ks_mean, c.ks_se, c.w1_mean, c.transform_dev_max, c.min_gap
        );
    }
}
