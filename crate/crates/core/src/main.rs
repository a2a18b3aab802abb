use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kpzlat::harness::{self, ExperimentConfig, Kind, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "kpzlat", version, about = "Lattice diffusions, fluctuation fields and the coupled Burgers reference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to KPZLAT_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set sbe.modes=128` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Coupling tensors and frame conditions.
    Tensors,
    /// Audit the potential's standing assumptions.
    CheckPotential,
    /// Draw single-site samples and run integration-by-parts checks.
    Sample,
    /// Lattice trajectories with conservation and Lyapunov diagnostics.
    Simulate,
    /// Fluctuation fields and their decomposition terms.
    Fields,
    /// Second-order Boltzmann-Gibbs statistic against the window length.
    BgTest,
    /// Spectral solutions of the coupled Burgers equation.
    Sbe,
    /// Lattice against Burgers time autocovariances.
    Compare,
    /// Scaling sweep over the lattice sizes.
    Sweep,
}

impl Command {
    fn kind(self) -> Kind {
        match self {
            Command::Tensors => Kind::Tensors,
            Command::CheckPotential => Kind::CheckPotential,
            Command::Sample => Kind::Sample,
            Command::Simulate => Kind::Simulate,
            Command::Fields => Kind::Fields,
            Command::BgTest => Kind::BgTest,
            Command::Sbe => Kind::Sbe,
            Command::Compare => Kind::Compare,
            Command::Sweep => Kind::Sweep,
        }
    }
}

fn resolve(cli: &Cli) -> kpzlat::Result<ExperimentConfig> {
    let g = &cli.global;
    let mut overrides = g.set.clone();
    if let Some(s) = g.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(t) = g.threads {
        overrides.push(format!("threads={t}"));
    }
    let mut cfg = ExperimentConfig::load(g.config.as_deref(), &overrides)?.with_kind(cli.command.kind())?;
    if let Some(out) = &g.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if cli.global.dry_run {
        match cfg.to_toml_string() {
            Ok(s) => print!("{s}"),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        }
        return ExitCode::SUCCESS;
    }
    ExitCode::from(harness::execute(&cfg) as u8)
}
