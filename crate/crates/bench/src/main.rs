use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use starris_bench::plot::{plot, Figure};
use starris_bench::records::{self, summarize};
use starris_bench::run::{adapt_seed, run_schemes, simulate, sweep, write_records, write_runs};
use starris_bench::{BenchError, ExperimentConfig, Scheme};
use starris_core::agents::Checkpoint;

#[derive(Parser)]
#[command(name = "starris", version, about = "Active STAR-RIS SWIPT energy-efficiency experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment configuration (TOML). Without it the desk preset is used.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from the full simulation-table preset instead of the desk one.
    #[arg(long, conflicts_with = "config")]
    full: bool,
    /// Override any key by dotted path, e.g. `--set system.e_min_w=2.5e-15`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated seeds, replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory, replacing the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::preset(self.full),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the convex stage for the neutral surface and check every constraint.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Train the configured schemes on every seed.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated scheme ids; defaults to the configured scheme.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Adapt a saved meta-checkpoint to each seed's evaluation placement.
    Adapt {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// One full run per swept value, scheme and seed.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Dotted key path; defaults to `[sweep] parameter`.
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated values; default to `[sweep] values`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<Scheme>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render a figure from exported records (.csv or .json).
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a configuration file and print the effective configuration.
    ValidateConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn print_summary(recs: &[records::ResultRecord]) {
    println!("{:<10} {:>12} {:>6} {:>12} {:>12} {:>12} {:>10}", "scheme", "sweep", "seed", "first_rew", "final_rew", "final_ee", "viol_rate");
    for s in summarize(recs) {
        let v = s.sweep_value.map(|v| format!("{v:e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<10} {:>12} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>10.3}",
            s.scheme, v, s.seed, s.first_reward, s.final_reward, s.final_ee, s.final_violation_rate
        );
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::ValidateConfig { cfg } => {
            let c = cfg.load()?;
            print!("{}", c.to_toml_string());
            eprintln!("configuration ok");
        }
        Command::Simulate { cfg, scheme } => {
            let c = cfg.load()?;
            let scheme = scheme.unwrap_or(c.scheme);
            let mut first_bad = None;
            for &seed in &c.seeds {
                let r = simulate(&c, scheme, seed)?;
                println!("{}", serde_json::to_string(&r).expect("report serialises"));
                if !r.feasible() && first_bad.is_none() {
                    first_bad = Some(format!("seed {seed}: first violated constraint {}", r.first_violated.unwrap_or_default()));
                }
            }
            if let Some(m) = first_bad {
                return Err(BenchError::Infeasible(m));
            }
        }
        Command::Train { cfg, schemes, jobs } => {
            let c = cfg.load()?;
            let schemes = schemes.unwrap_or_else(|| vec![c.scheme]);
            let runs = run_schemes(&c, &schemes, jobs)?;
            let recs = write_runs(&c.output_dir, &runs)?;
            write_records(&c.output_dir, "results", &recs)?;
            records::write(&c.output_dir.join("config.toml"), &c.to_toml_string())?;
            print_summary(&recs);
            println!("records digest {}", records::digest(&recs));
        }
        Command::Adapt { cfg, checkpoint, scheme } => {
            let c = cfg.load()?;
            let cp = Checkpoint::load(&checkpoint)?;
            let scheme = scheme.unwrap_or(c.scheme);
            let runs = c.seeds.iter().map(|&s| adapt_seed(&c, scheme, s, &cp)).collect::<Result<Vec<_>, _>>()?;
            let recs: Vec<_> = runs.iter().flat_map(|r| r.records(None)).collect();
            for r in &runs {
                records::write(&c.output_dir.join(format!("adapt_{}_seed{}_log.jsonl", r.scheme.id(), r.seed)), &r.log.to_jsonl())?;
            }
            write_records(&c.output_dir, "adapt_results", &recs)?;
            print_summary(&recs);
        }
        Command::Sweep { cfg, parameter, values, schemes, jobs } => {
            let c = cfg.load()?;
            let spec = c.sweep.clone();
            let parameter = parameter
                .or_else(|| spec.as_ref().map(|s| s.parameter.clone()))
                .ok_or_else(|| BenchError::Config("no sweep parameter given (--parameter or [sweep])".into()))?;
            let values = values.or_else(|| spec.map(|s| s.values)).unwrap_or_default();
            let schemes = schemes.unwrap_or_else(|| vec![c.scheme]);
            let recs = sweep(&c, &schemes, &parameter, &values, jobs)?;
            write_records(&c.output_dir, "sweep", &recs)?;
            print_summary(&recs);
            println!("records digest {}", records::digest(&recs));
        }
        Command::Plot { input, figure, output } => {
            let recs = records::load(&input)?;
            let series = plot(&recs, figure, &output)?;
            eprintln!("wrote {} ({} series)", output.display(), series.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
