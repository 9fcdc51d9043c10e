use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ifedcrowd::equilibrium::GridSpec;
use ifedcrowd::harness::{
    build_simulation, emit, run_sweep, sample_population, verify_scenario, OutputFormat, SweepAxis,
    SweepSpec,
};
use ifedcrowd::{compute_equilibrium, feasible_rate_box, MechanismKind, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "ifedcrowd",
    version,
    about = "Incentive mechanism for federated crowdsourcing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium rates and strategies for one sampled population, as JSON.
    Equilibrium {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Which run's population to use.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Sweep one axis and write the per-cell summary table.
    Sweep {
        #[arg(long)]
        axis: AxisArg,
        #[arg(long, default_value = "all")]
        mechanism: MechanismArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: FormatArg,
    },
    /// Run the round simulation and write one JSON report per line.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `rounds` from the config.
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Check every run's equilibrium for profitable deviations. Exits 0
    /// only if none are found.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid points per rate axis on the leader side.
        #[arg(long, default_value_t = 50)]
        rate_points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Gamma,
    Delta,
    Workers,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Ifedcrowd,
    Random,
    Max,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => {
            ScenarioConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
        None => Ok(ScenarioConfig::default()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn equilibrium(config: Option<&Path>, out: Option<&Path>, run: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let profiles = sample_population(&cfg, run)?;
    let rate_box = feasible_rate_box(&profiles, cfg.r2_cap)?;
    let result = compute_equilibrium(&profiles, &cfg.params()?, &rate_box)?;
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &result)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sweep(
    axis: AxisArg,
    mechanism: MechanismArg,
    config: Option<&Path>,
    out: &Path,
    format: FormatArg,
) -> Result<()> {
    let cfg = load_config(config)?;
    let axis = match axis {
        AxisArg::Gamma => SweepAxis::Gamma,
        AxisArg::Delta => SweepAxis::Delta,
        AxisArg::Workers => SweepAxis::Workers,
    };
    let mechanisms = match mechanism {
        MechanismArg::Ifedcrowd => vec![MechanismKind::IFedCrowd],
        MechanismArg::Random => vec![MechanismKind::Random],
        MechanismArg::Max => vec![MechanismKind::Max],
        MechanismArg::All => MechanismKind::ALL.to_vec(),
    };
    let outcome = run_sweep(&SweepSpec::new(axis, cfg).with_mechanisms(mechanisms))?;
    for f in &outcome.failures {
        let mech = f.mechanism.map_or("-".to_string(), |m| m.to_string());
        eprintln!(
            "cell {} {mech} run {} failed: {}",
            f.axis_value, f.run_index, f.error
        );
    }
    let format = match format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    emit(&outcome.table, format, out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn simulate(
    config: Option<&Path>,
    rounds: Option<usize>,
    out: Option<&Path>,
    run: usize,
) -> Result<()> {
    let cfg = load_config(config)?;
    let rounds = rounds.unwrap_or(cfg.rounds);
    let mut sim = build_simulation(&cfg, run)?;
    let mut w = output(out)?;
    for _ in 0..rounds {
        let report = sim.run_round()?;
        for c in report.clients.iter().filter(|c| c.failure.is_some()) {
            eprintln!(
                "round {} client {}: {}",
                report.round_index,
                c.client_id,
                c.failure.as_deref().unwrap_or("")
            );
        }
        serde_json::to_writer(&mut w, &report)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn verify(config: Option<&Path>, out: Option<&Path>, rate_points: usize) -> Result<bool> {
    let cfg = load_config(config)?;
    if rate_points < 2 {
        bail!("--rate-points must be at least 2");
    }
    let grid = GridSpec {
        rate_points,
        ..GridSpec::default()
    };
    let reports = verify_scenario(&cfg, &grid)?;
    let mut clean = true;
    for r in &reports {
        let client = r.clients.iter().map(|c| c.violations).sum::<usize>();
        eprintln!(
            "run {}: r1 {:.6} r2 {:.6} | client violations {} | leader violations frozen {} (worst gain {:.3e}), stackelberg {} (worst gain {:.3e})",
            r.run_index,
            r.rates.r1(),
            r.rates.r2(),
            client,
            r.server.frozen.violations,
            r.server.frozen.worst_gain,
            r.server.stackelberg.violations,
            r.server.stackelberg.worst_gain,
        );
        clean &= r.violations() == 0;
    }
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &reports)?;
    writeln!(w)?;
    w.flush()?;
    Ok(clean)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Equilibrium { config, out, run } => {
            equilibrium(config.as_deref(), out.as_deref(), *run).map(|_| true)
        }
        Command::Sweep {
            axis,
            mechanism,
            config,
            out,
            format,
        } => sweep(*axis, *mechanism, config.as_deref(), out, *format).map(|_| true),
        Command::Simulate {
            config,
            rounds,
            out,
            run,
        } => simulate(config.as_deref(), *rounds, out.as_deref(), *run).map(|_| true),
        Command::Verify {
            config,
            out,
            rate_points,
        } => verify(config.as_deref(), out.as_deref(), *rate_points),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
