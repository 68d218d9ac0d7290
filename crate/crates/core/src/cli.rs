//! Command-line interface.
//!
//! Exit status is 0 on success, 1 on a data or model error and 2 on a usage
//! error. Errors print one line to stderr:
//! `error kind=<kind> message=<json string>`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::dataset::{load_micro_csv, marginals_of, Schema};
use crate::error::{Error, Result};
use crate::metrics::{default_exclusions, evaluate, EvaluationInput, MAX_PROJECTION};
use crate::pipeline::{
    make_transfer_benchmark, run_experiment, run_permutation_study, write_benchmark, SynthesisConfig,
    BENCHMARK_DIM, BENCHMARK_SOURCE_ROWS, BENCHMARK_TARGET_ROWS,
};

#[derive(Debug, Parser)]
#[command(name = "popsynth", version, about = "Synthetic populations with marginal transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one synthesis experiment from a JSON config.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare a synthetic table against a reference table.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Schema of the synthetic table, when it differs from `--schema`.
        #[arg(long)]
        syn_schema: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        population: Option<PathBuf>,
        /// Variables to drop from zero and coverage counts.
        #[arg(long, value_delimiter = ',')]
        exclude: Option<Vec<String>>,
        #[arg(long, default_value_t = MAX_PROJECTION)]
        max_n: usize,
        /// Print the full JSON report instead of the summary table.
        #[arg(long)]
        json: bool,
    },
    /// Write the one-way marginal counts of a microdata table.
    Marginals {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infer a schema from a CSV file.
    InferSchema {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the copula generator under random categorical label orders.
    PermuteStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Write a synthetic transfer benchmark and a ready-to-run config.
    Benchmark {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        skew: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = BENCHMARK_DIM)]
        dim: usize,
        #[arg(long, default_value_t = BENCHMARK_SOURCE_ROWS)]
        source_rows: usize,
        #[arg(long, default_value_t = BENCHMARK_TARGET_ROWS)]
        target_rows: usize,
    },
}

/// Formats an error as the single stderr line.
pub fn error_line(err: &Error) -> String {
    let msg = serde_json::Value::String(err.to_string()).to_string();
    format!("error kind={} message={}", err.kind(), msg)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config } => {
            let config = SynthesisConfig::load(&config)?;
            let out = run_experiment(&config)?;
            for n in &out.notices {
                eprintln!("notice: {n}");
            }
            print!("{}", out.report.summary_table());
        }
        Command::Evaluate {
            reference,
            syn,
            schema,
            syn_schema,
            train,
            population,
            exclude,
            max_n,
            json,
        } => {
            let schema = Schema::from_json_file(&schema)?;
            let syn_schema = match syn_schema {
                Some(p) => Schema::from_json_file(&p)?,
                None => schema.clone(),
            };
            schema.ensure_same(&syn_schema)?;
            let reference = load_micro_csv(&reference, &schema)?;
            let synthetic = load_micro_csv(&syn, &syn_schema)?;
            let train = train.map(|p| load_micro_csv(&p, &schema)).transpose()?;
            let population = population.map(|p| load_micro_csv(&p, &schema)).transpose()?;
            let exclude = match exclude {
                Some(names) => names
                    .iter()
                    .map(|n| schema.index_of(n).ok_or_else(|| Error::UnknownVariable(n.clone())))
                    .collect::<Result<Vec<_>>>()?,
                None => default_exclusions(&schema),
            };
            let report = evaluate(
                "external",
                EvaluationInput {
                    reference: &reference,
                    training: train.as_ref(),
                    synthetic: &synthetic,
                    population: population.as_ref(),
                    exclude: &exclude,
                    max_n,
                },
            )?;
            if json {
                println!("{}", report.to_json_string());
            } else {
                print!("{}", report.summary_table());
            }
        }
        Command::Marginals { data, schema, out } => {
            let schema = Schema::from_json_file(&schema)?;
            let table = load_micro_csv(&data, &schema)?;
            marginals_of(&table)?.save_csv(&out)?;
        }
        Command::InferSchema { data, out } => {
            let schema = Schema::infer_from_csv(&data)?;
            std::fs::write(&out, schema.to_json_string()).map_err(|e| Error::io(&out, e))?;
        }
        Command::PermuteStudy { config, n } => {
            let config = SynthesisConfig::load(&config)?;
            let summary = run_permutation_study(&config, n)?;
            print!("{}", summary.summary_table());
        }
        Command::Benchmark {
            out,
            skew,
            seed,
            dim,
            source_rows,
            target_rows,
        } => {
            let bench = make_transfer_benchmark(seed, dim, source_rows, target_rows, skew)?;
            write_benchmark(&out, &bench, seed)?;
            println!("wrote benchmark to {}", out.display());
        }
    }
    Ok(())
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_line_is_single_line() {
        let e = Error::invalid("two\nlines");
        let line = error_line(&e);
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=invalid_argument message=\""));
    }
}
