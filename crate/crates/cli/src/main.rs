use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use pdncg_cli::experiment::{run_ablation, run_solve, run_spectrum, run_sweep};
use pdncg_cli::ExperimentConfig;

#[derive(Parser)]
#[command(name = "pdncg", version, about = "Primal-dual Newton CG reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct one problem and write image, trace and summary.
    Solve(RunArgs),
    /// Dense spectra of every Newton system, with and without preconditioning.
    Spectrum(RunArgs),
    /// One reconstruction per `sweep_mu` value.
    Sweep(RunArgs),
    /// Continuation × preconditioning comparison.
    Ablation(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Further settings as `--key value`; these win over the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_flags(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.set("seed", &seed.to_string())?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            let s = run_solve(&cfg)?;
            let quality = match s.psnr {
                Some(p) => format!("PSNR {:.2} dB", p.value()),
                None => format!("SNR {:.2} dB", s.snr.value()),
            };
            println!(
                "{quality}, relative error {:.3e}, {} outer iterations, {} CG iterations, {} stage(s), {}; wrote {}",
                s.relative_error,
                s.outer_iterations,
                s.total_cg,
                s.stages,
                s.status,
                cfg.out.display()
            );
        }
        Command::Spectrum(args) => {
            let cfg = args.resolve()?;
            let rows = run_spectrum(&cfg)?;
            let (cg, pcg): (usize, usize) = rows
                .iter()
                .fold((0, 0), |(a, b), r| (a + r.cg_iterations, b + r.pcg_iterations));
            println!(
                "{} systems, CG {cg} vs PCG {pcg} iterations; wrote {}",
                rows.len(),
                cfg.out.display()
            );
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let results = run_sweep(&cfg)?;
            for (mu, s) in cfg.sweep_mu.iter().zip(&results) {
                let q = s.psnr.unwrap_or(s.snr).value();
                println!("mu {mu:e}: {q:.2} dB, {} CG iterations, {}", s.total_cg, s.status);
            }
        }
        Command::Ablation(args) => {
            let cfg = args.resolve()?;
            let rows = run_ablation(&cfg)?;
            for (name, ..) in pdncg_cli::experiment::ABLATION_SETTINGS {
                if let Some(last) = rows.iter().rev().find(|r| r.setting == name) {
                    println!(
                        "{name}: {} CG iterations, relative error {:.3e}",
                        last.cumulative_cg, last.relative_error
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
