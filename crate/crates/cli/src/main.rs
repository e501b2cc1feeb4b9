use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ppp_energy::LoadModel;
use ppp_energy_cli::{run, Command, ConfigError, ExperimentConfig, RunOptions};

/// Energy efficiency of PPP cellular networks: closed forms, optimizers and
/// Monte Carlo validation. Writes CSV.
#[derive(Debug, Parser)]
#[command(name = "ppp-energy", version)]
struct Cli {
    command: Command,

    /// Configuration overrides as key=value, applied after --config.
    overrides: Vec<String>,

    /// Configuration file with one key=value per line.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Named parameter preset applied before the configuration file.
    #[arg(long)]
    preset: Option<String>,

    /// Output CSV path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for Monte Carlo draws and random initial guesses.
    #[arg(long)]
    seed: Option<u64>,

    /// Restrict to one load model.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    load_model: Option<u8>,

    #[arg(long)]
    mc_realizations: Option<usize>,

    /// Relative EE tolerance of the joint optimizer.
    #[arg(long)]
    eps: Option<f64>,
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, RunOptions), ConfigError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = &cli.preset {
        cfg.apply_preset(p)?;
    }
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: o.clone() })?;
        cfg.set(k, v)?;
    }
    if let Some(eps) = cli.eps {
        cfg.eps = eps;
    }
    let mut opts = RunOptions::default();
    if let Some(k) = cli.load_model {
        opts.loads = vec![LoadModel::from_index(k).expect("range checked by clap")];
    }
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    if let Some(n) = cli.mc_realizations {
        opts.mc_realizations = n;
    }
    Ok((cfg, opts))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure(&cli).and_then(|(cfg, opts)| run(cli.command, &cfg, &opts));
    let table = match result {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => File::create(path)
            .map_err(csv::Error::from)
            .and_then(|f| table.write_csv(BufWriter::new(f))),
        None => table.write_csv(io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
