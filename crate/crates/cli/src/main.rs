//! `llabench`: run list-labeling experiments and write CSV results.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lla_core::harness::{
    emit_csv, load_dataset, run_learning_curve, run_robustness, run_scaling, run_synthetic,
    run_table, write_csv, DatasetSpec, Delimiter, ExperimentResult, HarnessError, Structure,
    SynthKind, SynthParams, ValueKind,
};

#[derive(Parser, Debug)]
#[command(name = "llabench", version, about = "List-labeling array benchmarks")]
struct Cli {
    /// Structures to run.
    #[arg(long, global = true, value_enum, default_value_t = StructureArg::All)]
    structure: StructureArg,

    /// CSV output path; stdout if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Pma,
    Apma,
    LearnedPma,
    LearnedApma,
    All,
}

impl StructureArg {
    fn structures(self) -> Vec<Structure> {
        match self {
            StructureArg::Pma => vec![Structure::Pma],
            StructureArg::Apma => vec![Structure::Apma],
            StructureArg::LearnedPma => vec![Structure::LearnedPma],
            StructureArg::LearnedApma => vec![Structure::LearnedApma],
            StructureArg::All => Structure::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DelimiterArg {
    Whitespace,
    Comma,
    Tab,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Input file, one row per arriving element.
    #[arg(long)]
    dataset: PathBuf,

    /// 0-based column holding the element's value.
    #[arg(long)]
    value_col: usize,

    /// 0-based column giving the arrival order.
    #[arg(long)]
    ts_col: Option<usize>,

    #[arg(long, value_enum, default_value_t = DelimiterArg::Whitespace)]
    delimiter: DelimiterArg,

    /// Read values as plain integers instead of decimals.
    #[arg(long)]
    integer: bool,

    /// Leading rows to skip (headers).
    #[arg(long, default_value_t = 0)]
    skip_rows: usize,

    /// Keep at most this many rows after ordering.
    #[arg(long)]
    max_rows: Option<usize>,

    /// Label for the dataset column; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
}

impl DatasetArgs {
    fn spec(&self) -> DatasetSpec {
        let mut spec = DatasetSpec::new(&self.dataset, self.value_col)
            .delimiter(match self.delimiter {
                DelimiterArg::Whitespace => Delimiter::Whitespace,
                DelimiterArg::Comma => Delimiter::Comma,
                DelimiterArg::Tab => Delimiter::Tab,
            })
            .value_kind(if self.integer {
                ValueKind::Integer
            } else {
                ValueKind::Decimal
            })
            .skip_rows(self.skip_rows);
        if let Some(c) = self.ts_col {
            spec = spec.timestamp(c);
        }
        if let Some(m) = self.max_rows {
            spec = spec.max_rows(m);
        }
        spec
    }

    fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec().name())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on the first 2^k rows, test on the next 2^k.
    Table {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        k: u32,
    },
    /// The table setup for every k in a range.
    Scaling {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        k_min: u32,
        #[arg(long)]
        k_max: u32,
    },
    /// Vary the training size relative to a fixed test slice.
    Curve {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        test_k: u32,
        /// Training sizes as percentages of the test size.
        #[arg(long, value_delimiter = ',', default_value = "5,10,25,50,100")]
        fractions: Vec<u32>,
    },
    /// Corrupt a percentage of the predictions and repeat.
    Robustness {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        k: u32,
        /// Corruption percentages.
        #[arg(long, value_delimiter = ',', default_value = "0,10,25,50")]
        t: Vec<u32>,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        /// First seed; repeats use consecutive seeds.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generated streams with controlled prediction error.
    Synth {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Uniform prediction error bound.
        #[arg(long, default_value_t = 0, conflicts_with_all = ["mu", "s"])]
        eta: usize,
        /// Mean of the normal prediction error.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Standard deviation of the normal prediction error.
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: &Cli) -> Result<Vec<ExperimentResult>, HarnessError> {
    let structures = cli.structure.structures();
    match &cli.command {
        Command::Table { data, k } => {
            let keys = load_dataset(&data.spec())?;
            run_table(&keys, &data.label(), *k, &structures)
        }
        Command::Scaling { data, k_min, k_max } => {
            if k_min > k_max {
                return Err(HarnessError::Config(format!(
                    "--k-min {k_min} exceeds --k-max {k_max}"
                )));
            }
            let keys = load_dataset(&data.spec())?;
            let ks: Vec<u32> = (*k_min..=*k_max).collect();
            run_scaling(&keys, &data.label(), &ks, &structures)
        }
        Command::Curve {
            data,
            test_k,
            fractions,
        } => {
            let keys = load_dataset(&data.spec())?;
            run_learning_curve(&keys, &data.label(), *test_k, fractions, &structures)
        }
        Command::Robustness {
            data,
            k,
            t,
            repeats,
            seed,
        } => {
            let keys = load_dataset(&data.spec())?;
            run_robustness(&keys, &data.label(), *k, t, *repeats, *seed, &structures)
        }
        Command::Synth {
            kind,
            n,
            eta,
            mu,
            s,
            seed,
        } => {
            let kind = SynthKind::parse(kind).ok_or_else(|| {
                let names: Vec<&str> = SynthKind::ALL.iter().map(|k| k.name()).collect();
                HarnessError::Config(format!(
                    "unknown kind {kind:?}; expected one of {}",
                    names.join(", ")
                ))
            })?;
            let params = SynthParams {
                eta: *eta,
                mu: *mu,
                s: *s,
            };
            run_synthetic(kind, *n, params, *seed, &structures)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|rows| {
        for r in &rows {
            eprintln!(
                "{:<13} {:<28} cost {:>9.4}  merges {:>6}  {:.2?}",
                r.structure, r.dataset, r.amortized_cost, r.merges, r.wall_time
            );
            if r.witness_failures > 0 {
                eprintln!(
                    "  {} of {} merges had no witness key",
                    r.witness_failures, r.witness_checks
                );
            }
        }
        match &cli.out {
            Some(path) => emit_csv(&rows, path),
            None => {
                let stdout = std::io::stdout();
                write_csv(&rows, stdout.lock())?;
                stdout.lock().flush().ok();
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("llabench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
