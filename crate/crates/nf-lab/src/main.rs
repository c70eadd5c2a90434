use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nf_lab::experiments::simulate::run_simulate;
use nf_lab::experiments::{CriterionSummary, run_criterion};
use nf_lab::io::write_json;
use nf_lab::report::collect;
use nf_lab::{Context, ExperimentConfig, LabError};

#[derive(Parser)]
#[command(name = "nflab", version, about = "Stochastic neural-field front lab")]
struct Cli {
    /// TOML config path, or `default` for the builtin one.
    #[arg(long, global = true, default_value = "default")]
    config: String,
    /// Overrides output_dir from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the front and check it (criterion 1).
    Wave,
    /// Adjoint, density and spectral gap (criteria 2 and 3).
    Adjoint,
    /// Simulate sample paths and run the numerics checks (criterion 10).
    Simulate {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Expansion experiments (criteria 4 to 8).
    Expand {
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        epsilon_ladder: Option<Vec<f64>>,
        /// Paths per epsilon for the residual scaling.
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Experiment::All)]
        experiment: Experiment,
    },
    /// Tail rates and density constants (criterion 9).
    VerifyAsymptotics,
    /// Verdict table over the criterion summaries in the output dir.
    Report,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    All,
    ResidualScaling,
    PhaseDiffusion,
    Ou,
    MConvergence,
    Optimality,
}

impl Experiment {
    fn criteria(self) -> Vec<u8> {
        match self {
            Experiment::All => vec![4, 5, 6, 7, 8],
            Experiment::ResidualScaling => vec![4],
            Experiment::PhaseDiffusion => vec![5],
            Experiment::Ou => vec![6],
            Experiment::MConvergence => vec![7],
            Experiment::Optimality => vec![8],
        }
    }
}

fn run_all(ctx: &Context, criteria: &[u8]) -> Result<Vec<CriterionSummary>, LabError> {
    ctx.save_artifacts()?;
    criteria
        .iter()
        .map(|&k| {
            let s = run_criterion(ctx, k)?;
            println!("{}", s.line());
            Ok(s)
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode, LabError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    let criteria = match cli.command {
        Command::Wave => vec![1],
        Command::Adjoint => vec![2, 3],
        Command::VerifyAsymptotics => vec![9],
        Command::Simulate { paths, seed, epsilon } => {
            if let Some(p) = paths {
                cfg.sim.n_paths = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epsilon {
                cfg.sim.epsilon = e;
            }
            cfg.validate()?;
            let ctx = Context::new(cfg);
            ctx.save_artifacts()?;
            let summary = run_simulate(&ctx)?;
            write_json(&ctx.output_dir().join("simulate.json"), &ctx.envelope("simulate", &summary))?;
            for p in &summary.paths {
                println!(
                    "path {:>3} tau {:>8.4} final |v| {:.4e} C0 {:+.5e} C1 {:+.5e}",
                    p.path, p.tau, p.final_l2, p.final_c0, p.final_c1
                );
            }
            run_all(&ctx, &[10])?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Expand {
            epsilon_ladder,
            paths,
            seed,
            experiment,
        } => {
            if let Some(l) = epsilon_ladder {
                cfg.expansion.epsilon_ladder = l;
            }
            if let Some(p) = paths {
                cfg.expansion.n_paths = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            experiment.criteria()
        }
        Command::Report => {
            let table = collect(&cfg.output_dir)?;
            print!("{}", table.render());
            write_json(&cfg.output_dir.join("report.json"), &table)?;
            return Ok(if table.all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    };
    cfg.validate()?;
    let ctx = Context::new(cfg);
    run_all(&ctx, &criteria)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nflab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
