use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mfh_workbench::commands::{
    cmd_compare, cmd_eval, cmd_gen_data, cmd_grad_check, cmd_inspect_graph, cmd_train, load_config, output_dir,
};
use mfh_workbench::report_io::{report_to_csv, report_to_json};
use mfh_workbench::{Error, Result};

#[derive(Parser)]
#[command(name = "mfh", version, about = "Build, train and compare multi-task sharing networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print this artifact to stdout instead of the summary.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset as CSV plus a manifest.
    GenData(Common),
    /// Train one run and write parameters and metrics.
    Train(Common),
    /// Score saved parameters.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Parameter file written by `train`.
        #[arg(long)]
        params: PathBuf,
    },
    /// Train several configs over their shared seeds and tabulate medians.
    Compare {
        /// Configs to compare; the first is the baseline.
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Build and validate the graph; write JSON and DOT exports.
    InspectGraph(Common),
    /// Finite-difference gradient check at toy sizes.
    GradCheck(Common),
}

fn unsupported(verb: &str, format: Format) -> Error {
    let name = match format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Dot => "dot",
    };
    Error::Invalid(vec![format!("{verb} cannot print --format {name}")])
}

fn out_of(cfg: &mfh_workbench::ExperimentConfig, out: &Option<PathBuf>) -> PathBuf {
    output_dir(cfg, out.as_deref())
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            if let Some(f) = c.format {
                return Err(unsupported("gen-data", f));
            }
            Ok(cmd_gen_data(&cfg, &out_of(&cfg, &c.out))?.to_string())
        }
        Command::Train(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            let outcome = cmd_train(&cfg, &out_of(&cfg, &c.out))?;
            match c.format {
                None => Ok(outcome.to_string()),
                Some(Format::Json) => Ok(report_to_json(&outcome.report)),
                Some(Format::Csv) => Ok(report_to_csv(&outcome.report)),
                Some(f) => Err(unsupported("train", f)),
            }
        }
        Command::Eval { common: c, params } => {
            let cfg = load_config(&c.config, c.seed)?;
            let outcome = cmd_eval(&cfg, &params, &out_of(&cfg, &c.out))?;
            match c.format {
                None => Ok(outcome.to_string()),
                Some(Format::Json) => Ok(report_to_json(&outcome.report)),
                Some(Format::Csv) => Ok(report_to_csv(&outcome.report)),
                Some(f) => Err(unsupported("eval", f)),
            }
        }
        Command::Compare {
            configs,
            seed,
            out,
            format,
        } => {
            let cfgs = configs
                .iter()
                .map(|p| load_config(p, seed))
                .collect::<Result<Vec<_>>>()?;
            let out = out_of(&cfgs[0], &out);
            let comparison = cmd_compare(&cfgs, &out)?;
            match format {
                None => Ok(comparison.to_string()),
                Some(Format::Json) => Ok(serde_json::to_string_pretty(&comparison).expect("serializable") + "\n"),
                Some(Format::Csv) => Ok(comparison.to_csv()),
                Some(f) => Err(unsupported("compare", f)),
            }
        }
        Command::InspectGraph(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            let outcome = cmd_inspect_graph(&cfg, &out_of(&cfg, &c.out))?;
            match c.format {
                None => Ok(outcome.to_string()),
                Some(Format::Json) => Ok(outcome.json),
                Some(Format::Dot) => Ok(outcome.dot),
                Some(f) => Err(unsupported("inspect-graph", f)),
            }
        }
        Command::GradCheck(c) => {
            let cfg = load_config(&c.config, c.seed)?;
            if let Some(f) = c.format {
                return Err(unsupported("grad-check", f));
            }
            Ok(cmd_grad_check(&cfg)?.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(mut text) => {
            if !text.ends_with('\n') {
                text.push('\n');
            }
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

