use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nadisc::experiments::{self, Command, ExperimentConfig, ScalingModel};
use nadisc::Error;

/// Seeded multi-color discrepancy experiments. Flags override `--config`.
#[derive(Parser, Debug)]
#[command(name = "nadisc", version)]
struct Cli {
    /// TOML file with an experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// split | round | disc | transfer | subsidy | sweep
    #[arg(long)]
    command: Option<Command>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// additive-uniform | additive-signed | coverage | table-random-lipschitz | file
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    output_path: Option<PathBuf>,
    #[arg(long)]
    instance_path: Option<PathBuf>,
    #[arg(long)]
    audit_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    timing: bool,
    /// Command run in each sweep cell.
    #[arg(long)]
    sweep_command: Option<Command>,
    #[arg(long, value_delimiter = ',')]
    sweep_n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sweep_m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sweep_seeds: Option<Vec<u64>>,
    /// Print a scaling fit of the results (sqrt-nlog-nk | n-sqrt-nlogn) to stderr.
    #[arg(long)]
    fit: Option<ScalingModel>,
}

fn build_config(cli: Cli) -> Result<(ExperimentConfig, Option<ScalingModel>), Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = cli.$field { cfg.$field = v; })* };
    }
    set!(command, n, m, k, family, seed, trials, restarts, tol, max_iters, workers);
    if cli.output_path.is_some() {
        cfg.output_path = cli.output_path;
    }
    if cli.instance_path.is_some() {
        cfg.instance_path = cli.instance_path;
    }
    if cli.audit_dir.is_some() {
        cfg.audit_dir = cli.audit_dir;
    }
    cfg.timing |= cli.timing;
    if let Some(c) = cli.sweep_command {
        cfg.sweep.command = c;
    }
    if let Some(v) = cli.sweep_n {
        cfg.sweep.n = v;
    }
    if let Some(v) = cli.sweep_k {
        cfg.sweep.k = v;
    }
    if let Some(v) = cli.sweep_m {
        cfg.sweep.m = v;
    }
    if let Some(v) = cli.sweep_seeds {
        cfg.sweep.seeds = v;
    }
    cfg.validate()?;
    Ok((cfg, cli.fit))
}

fn main() -> ExitCode {
    let (cfg, fit) = match build_config(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let records = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.output_path.is_none() {
        if let Err(e) = experiments::write_csv(io::stdout().lock(), &records) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if let Some(model) = fit {
        match experiments::fit_scaling(&records, model) {
            Ok(f) => eprintln!("fit: coefficient {} residual {}", f.coefficient, f.residual),
            Err(e) => eprintln!("fit skipped: {e}"),
        }
    }
    let failed = records.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs did not converge", records.len());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
