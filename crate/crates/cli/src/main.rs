//! `pfst`: select features from a CSV, benchmark the selectors, or generate
//! synthetic data.
//!
//! Exit codes: 0 success, 1 timeout, 2 configuration error, 3 data error,
//! 4 numerical error, 5 no admissible feature.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pfst_core::io::{write_csv, CsvOptions, LabelColumn};
use pfst_core::pfst::THREADS_ENV;
use pfst_core::run::{BenchSpec, Source};
use pfst_core::synth::{generate, SyntheticSpec};
use pfst_core::{run_benchmark, run_select, Error, Method, PfstConfig, RunSpec};

#[derive(Parser)]
#[command(name = "pfst", version, about = "Trace-criterion feature selection for classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select features from a CSV file and cross-validate LDA on them.
    Select(SelectArgs),
    /// Time several methods on CSV files and synthetic instances.
    Bench(BenchArgs),
    /// Write a synthetic dataset with planted informative features as CSV.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct CsvArgs {
    /// Label column, by header name or 0-based index.
    #[arg(long, default_value = "label")]
    label: String,
    /// Field delimiter (a single byte).
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Skip rows whose feature cells are all empty or null.
    #[arg(long)]
    drop_null_rows: bool,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label: self.label.parse::<LabelColumn>().unwrap_or_else(|never| match never {}),
            delimiter: self.delimiter,
            drop_null_rows: self.drop_null_rows,
        }
    }
}

#[derive(Args)]
struct SelectionArgs {
    /// Minimum criterion gain for admitting a feature.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Removal is accepted while the criterion loss is below this.
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Early-dropping threshold (PFST only).
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Number of feature blocks (PFST only); defaults to the worker count.
    #[arg(long)]
    blocks: Option<usize>,
    /// Re-forward rounds after early dropping (PFST only).
    #[arg(long, default_value_t = 1)]
    max_ref: usize,
    #[arg(long)]
    max_features: Option<usize>,
    /// Seed for block partitions, folds and jitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standardize columns before selecting (default).
    #[arg(long, overrides_with = "no_standardize")]
    standardize: bool,
    #[arg(long, overrides_with = "standardize")]
    no_standardize: bool,
    /// Folds for LDA cross-validation; 0 disables it.
    #[arg(long, default_value_t = 5)]
    cv: usize,
    /// Per-run time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Worker threads for PFST.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

impl SelectionArgs {
    fn config(&self) -> PfstConfig {
        PfstConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            blocks: self.blocks,
            max_ref: self.max_ref,
            seed: self.seed,
            standardize: self.standardize || !self.no_standardize,
            max_features: self.max_features,
            ..PfstConfig::default()
        }
    }

    fn cv_folds(&self) -> Option<usize> {
        (self.cv > 0).then_some(self.cv)
    }

    fn timeout(&self) -> Result<Option<Duration>, Error> {
        self.timeout
            .map(|s| Duration::try_from_secs_f64(s).map_err(|_| Error::InvalidConfig(format!("bad timeout {s}"))))
            .transpose()
    }
}

#[derive(Args)]
struct SelectArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    #[arg(long, default_value = "pfst")]
    method: Method,
    #[command(flatten)]
    csv: CsvArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Add seeded Gaussian noise with this standard deviation before selecting.
    #[arg(long)]
    jitter: Option<f64>,
    /// Ridge added to the pooled LDA covariance.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    p: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 5)]
    informative: usize,
    #[arg(long, default_value_t = 0)]
    redundant: usize,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl SyntheticArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n: self.n,
            p: self.p,
            classes: self.classes,
            informative: self.informative,
            redundant: self.redundant,
            separation: self.separation,
            seed: self.data_seed,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    /// CSV datasets to include.
    inputs: Vec<PathBuf>,
    /// Also benchmark a synthetic instance.
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    synth: SyntheticArgs,
    #[arg(long, value_delimiter = ',', default_value = "pfst,forward,backward,stepwise")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[command(flatten)]
    csv: CsvArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synth: SyntheticArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] => Ok(*b),
        _ if s == "\\t" || s == "tab" => Ok(b'\t'),
        _ => Err(format!("delimiter must be a single byte, got `{s}`")),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn apply_threads(selection: &SelectionArgs) {
    if let Some(n) = selection.threads {
        // Read back by the PFST worker pool; set before any pool exists.
        std::env::set_var(THREADS_ENV, n.to_string());
    }
}

fn select(args: SelectArgs) -> Result<(), Error> {
    apply_threads(&args.selection);
    let source = Source::Csv {
        path: args.input,
        options: args.csv.options(),
    };
    let spec = RunSpec {
        params: args.selection.config(),
        cv_folds: args.selection.cv_folds(),
        jitter: args.jitter,
        ridge: args.ridge,
        timeout: args.selection.timeout()?,
        ..RunSpec::new(source, args.method)
    };
    let doc = run_select(&spec)?;
    let text = match args.format {
        Format::Table => doc.to_table(),
        Format::Json => doc.to_json()? + "\n",
    };
    emit(args.output.as_deref(), &text)
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    apply_threads(&args.selection);
    let mut sources: Vec<Source> = args
        .inputs
        .iter()
        .map(|path| Source::Csv {
            path: path.clone(),
            options: args.csv.options(),
        })
        .collect();
    if args.synthetic || sources.is_empty() {
        sources.push(Source::Synthetic(args.synth.spec()));
    }
    let spec = BenchSpec {
        sources,
        methods: args.methods,
        repeats: args.repeats,
        timeout: args.selection.timeout()?,
        params: args.selection.config(),
        cv_folds: args.selection.cv_folds(),
    };
    let report = run_benchmark(&spec)?;
    let text = match args.format {
        Format::Table => report.to_table(),
        Format::Json => report.to_json()? + "\n",
    };
    emit(args.output.as_deref(), &text)
}

fn generate_csv(args: GenerateArgs) -> Result<(), Error> {
    let synthetic = generate(&args.synth.spec())?;
    match args.output {
        Some(path) => write_csv(&synthetic.data, "label", File::create(path)?),
        None => write_csv(&synthetic.data, "label", io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(args) => select(args),
        Command::Bench(args) => bench(args),
        Command::Generate(args) => generate_csv(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
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
    fn delimiters() {
        assert_eq!(parse_delimiter(";"), Ok(b';'));
        assert_eq!(parse_delimiter("tab"), Ok(b'\t'));
        assert!(parse_delimiter("ab").is_err());
    }

    #[test]
    fn standardize_flags_override_each_other() {
        let parse = |extra: &[&str]| {
            let mut args = vec!["pfst", "select", "x.csv"];
            args.extend(extra);
            match Cli::try_parse_from(args).unwrap().command {
                Command::Select(s) => s.selection.config().standardize,
                _ => unreachable!(),
            }
        };
        assert!(parse(&[]));
        assert!(!parse(&["--no-standardize"]));
        assert!(parse(&["--no-standardize", "--standardize"]));
    }
}
