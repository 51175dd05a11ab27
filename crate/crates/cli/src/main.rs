use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use focused_skills::downstream::RewardMode;
use focused_skills::experiments::{self, load_config};
use focused_skills::{Algorithm, EnvKind, ExperimentConfig, ExperimentError};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("invalid --lengths {0:?}: expected `1..K` or `K` with K >= 1")]
    Lengths(String),
}

#[derive(Parser, Debug)]
#[command(name = "focused-skills", version, about = "Focused skill discovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(env) = self.env {
            cfg.env = env;
        }
        if let Some(algorithm) = self.algorithm {
            cfg.algorithm = algorithm;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct TaskArgs {
    /// Downstream reward: `true` or `proxy`.
    #[arg(long)]
    task: Option<RewardMode>,
    /// Independent skill-selection runs.
    #[arg(long)]
    runs: Option<u32>,
    /// Downstream training episodes per run.
    #[arg(long)]
    task_episodes: Option<u64>,
}

impl TaskArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(mode) = self.task {
            cfg.task.mode = mode;
        }
        if let Some(runs) = self.runs {
            cfg.task.runs = runs;
        }
        if let Some(e) = self.task_episodes {
            cfg.task.episodes = e;
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a skill set and write its checkpoint.
    Discover {
        #[command(flatten)]
        common: Common,
        /// Penalty strength for focused algorithms.
        #[arg(long)]
        lambda: Option<f64>,
        /// Discovery episodes.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Learn downstream skill-selection policies on a checkpoint's skills.
    Downstream {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Measure skill-chain coverage of a checkpoint.
    Coverage {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Chain lengths, as `1..K`.
        #[arg(long)]
        lengths: Option<String>,
        /// Number of random start states.
        #[arg(long)]
        starts: Option<usize>,
    },
    /// MudWorld penalty-strength sweep.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated penalty strengths.
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        /// Discovery episodes per strength.
        #[arg(long)]
        episodes: Option<u64>,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Aggregate every CSV in a directory into means and 90% intervals.
    Report {
        /// Directory holding the CSVs.
        #[arg(long, default_value = "results")]
        dir: PathBuf,
        /// Where to write the report; defaults to `--dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trailing episodes averaged for the end-of-training summary.
        #[arg(long, default_value_t = 200)]
        window: usize,
    },
    /// Print an environment's grid.
    Layout {
        #[arg(long, default_value = "fourrooms")]
        env: EnvKind,
    },
}

fn parse_lengths(text: &str) -> Result<usize, CliError> {
    let err = || CliError::Lengths(text.to_string());
    let max = match text.split_once("..") {
        Some((lo, hi)) => {
            if lo.trim() != "1" {
                return Err(err());
            }
            hi.trim().trim_start_matches('=').parse::<usize>().map_err(|_| err())?
        }
        None => text.trim().parse::<usize>().map_err(|_| err())?,
    };
    if max == 0 {
        return Err(err());
    }
    Ok(max)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Discover { common, lambda, episodes } => {
            let mut cfg = common.load()?;
            if lambda.is_some() {
                cfg.discovery.lambda = lambda;
            }
            if let Some(e) = episodes {
                cfg.discovery.episodes = e;
            }
            let out = experiments::cmd_discover(&cfg)?;
            Ok(vec![out.checkpoint, out.trace])
        }
        Command::Downstream { common, checkpoint, task } => {
            let mut cfg = common.load()?;
            task.apply(&mut cfg);
            Ok(vec![experiments::cmd_downstream(&cfg, &checkpoint)?])
        }
        Command::Coverage { common, checkpoint, lengths, starts } => {
            let mut cfg = common.load()?;
            if let Some(text) = lengths {
                cfg.coverage.max_length = parse_lengths(&text)?;
            }
            if let Some(s) = starts {
                cfg.coverage.starts = s;
            }
            let out = experiments::cmd_coverage(&cfg, &checkpoint)?;
            Ok(vec![out.csv, out.json])
        }
        Command::Ablate { common, lambda, episodes, task } => {
            let mut cfg = common.load()?;
            task.apply(&mut cfg);
            if let Some(e) = episodes {
                cfg.discovery.episodes = e;
            }
            let lambdas = if lambda.is_empty() { cfg.ablation.lambdas.clone() } else { lambda };
            Ok(experiments::cmd_ablate(&cfg, &lambdas)?)
        }
        Command::Report { dir, out, window } => {
            let out = out.unwrap_or_else(|| dir.clone());
            Ok(vec![experiments::cmd_report(&dir, &out, window)?])
        }
        Command::Layout { env } => {
            print!("{}", env.build().layout_string());
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_forms() {
        assert_eq!(parse_lengths("1..4").unwrap(), 4);
        assert_eq!(parse_lengths("1..=3").unwrap(), 3);
        assert_eq!(parse_lengths("2").unwrap(), 2);
        assert!(parse_lengths("2..4").is_err());
        assert!(parse_lengths("0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
