//! `fembem`: experiment driver for the hybrid FEM/BEM solver.

mod check;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hybrid_fembem::coupling::{error_norms, CoupledConfig, CoupledMethod};
use hybrid_fembem::harness::{run_convergence, run_jacobi_study, run_tau_sweep, ExperimentConfig, Level, ResultTable};

#[derive(Parser)]
#[command(name = "fembem", version, about = "Hybrid Nitsche FEM/BEM coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Error and iteration table over mesh levels.
    Convergence,
    /// Errors and iterations for every penalty value and level.
    TauSweep,
    /// Relaxed Jacobi iteration for every relaxation value and level.
    Jacobi,
    /// One solve on the first level; prints the errors and solver statistics as JSON.
    Solve,
    /// Operator and solver invariants on coarse meshes.
    Check,
}

#[derive(Args)]
struct Options {
    /// Experiment configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path: CSV table, or the solution bundle for `solve`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Test case: sphere or cube.
    #[arg(long, global = true, value_parser = ["sphere", "cube"])]
    case: Option<String>,
    /// Coupled solver: schur-cg, schur-gmres or direct.
    #[arg(long, global = true)]
    method: Option<CoupledMethod>,
    /// Penalty values, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Vec<f64>,
    /// Relaxation values, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Vec<f64>,
    /// Mesh levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Vec<usize>,
    /// Seed for the randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

fn load_config(opts: &Options, command: &Command) -> Result<ExperimentConfig> {
    let mut config = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let mut c = ExperimentConfig::new(opts.case.as_deref().unwrap_or("sphere"), vec![1, 2, 3]);
            match command {
                Command::TauSweep => c.tau = vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
                Command::Jacobi => {
                    c.levels = vec![1];
                    c.sigma = vec![0.01, 0.1, 1.0, 10.0, 100.0];
                }
                Command::Solve => c.levels = vec![1],
                _ => {}
            }
            c
        }
    };
    if let (Some(case), Some(_)) = (&opts.case, &opts.config) {
        config.case = case.clone();
    }
    if let Some(m) = opts.method {
        config.solver = CoupledConfig::new(m);
    }
    if !opts.tau.is_empty() {
        config.tau = opts.tau.clone();
    }
    if !opts.sigma.is_empty() {
        config.sigma = opts.sigma.clone();
    }
    if !opts.levels.is_empty() {
        config.levels = opts.levels.clone();
    }
    if let Some(out) = &opts.out {
        if !matches!(command, Command::Solve) {
            config.output = Some(out.clone());
        }
    }
    config.validate()?;
    Ok(config)
}

fn emit(table: &ResultTable, config: &ExperimentConfig) -> Result<()> {
    match &config.output {
        Some(path) => eprintln!("wrote {}", path.display()),
        None => print!("{}", table.to_csv()?),
    }
    Ok(())
}

fn solve(config: &ExperimentConfig, out: Option<&PathBuf>) -> Result<()> {
    let case = config.manufactured_case()?;
    let level = config.levels[0];
    let tau = config.tau[0];
    let lv = Level::new(config, &case, level)?;
    let (row, bundle) = lv.solve(&case, tau, &config.solver)?;
    let norms = match &case.exact {
        Some(exact) => {
            let system = lv.assembly.system(tau, false)?;
            Some(error_norms(&system, &bundle, exact)?)
        }
        None => None,
    };
    let summary = serde_json::json!({
        "case": case.name,
        "level": level,
        "tau": tau,
        "method": bundle.method,
        "row": row,
        "errors": norms,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(path) = out {
        std::fs::write(path, bundle.to_json()?).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Command::Check = cli.command {
        let failures = check::run(cli.opts.seed)?;
        if failures > 0 {
            bail!("{failures} check(s) failed");
        }
        return Ok(());
    }
    let config = load_config(&cli.opts, &cli.command)?;
    match cli.command {
        Command::Convergence => emit(&run_convergence(&config)?, &config),
        Command::TauSweep => emit(&run_tau_sweep(&config)?, &config),
        Command::Jacobi => emit(&run_jacobi_study(&config)?, &config),
        Command::Solve => solve(&config, cli.opts.out.as_ref()),
        Command::Check => unreachable!(),
    }
}
