use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphvec::config::RunConfig;
use graphvec::error::{EngineError, Result};
use graphvec::run::{self, OrderingSweep};
use graphvec::store::{self, Dataset, IngestOptions, LayoutOptions, Split};
use graphvec_core::OrderingKind;

#[derive(Parser)]
#[command(name = "graphvec", version, about = "Partitioned multi-relation graph embedding trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a text edge list into a partitioned dataset directory.
    Preprocess(PreprocessArgs),
    /// Train embeddings as described by a run configuration.
    Train(RunArgs),
    /// Rank held-out edges with trained embeddings.
    Eval(EvalArgs),
    /// Tabulate partition swaps for bucket orderings.
    SimulateOrdering(SimulateArgs),
    /// Write trained node embeddings as text.
    Export(ExportArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Single edge list to shuffle and split.
    #[arg(long, conflicts_with_all = ["train", "valid", "test"])]
    input: Option<PathBuf>,
    #[arg(long, requires_all = ["valid", "test"])]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    partitions: u32,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, valid and test fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.05,0.05")]
    split: Vec<f64>,
    /// Column separator; whitespace when omitted.
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set staleness_bound=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    staleness_bound: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut o = self.overrides.clone();
        if let Some(b) = self.staleness_bound {
            o.push(format!("staleness_bound={b}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(e) = self.epochs {
            o.push(format!("epochs={e}"));
        }
        RunConfig::load(self.config.as_deref(), &o)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "test")]
    split: String,
    /// Parameter directory; defaults to the run directory's trained parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// CSV file to append the result to.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 if MRR falls below this value.
    #[arg(long)]
    assert_mrr_min: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    partitions: Vec<u32>,
    /// Buffer capacities; defaults to `capacity_ratio * p`.
    #[arg(long, value_delimiter = ',')]
    capacity: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0.25)]
    capacity_ratio: f64,
    #[arg(long, value_delimiter = ',', default_value = "elimination,hilbert,hilbert-symmetric,random")]
    orderings: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    partition_bytes: u64,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step bucket and buffer trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| EngineError::io(path, e))
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    if a.out.join("meta.json").exists() && !a.force {
        return Err(EngineError::AlreadyExists(a.out));
    }
    let raw = match (a.input, a.train, a.valid, a.test) {
        (Some(input), ..) => {
            let split: [f64; 3] =
                a.split.try_into().map_err(|_| EngineError::Config("--split takes three fractions".into()))?;
            store::ingest_file(&input, &IngestOptions { delimiter: a.delimiter, split, seed: a.seed })?
        }
        (None, Some(tr), Some(va), Some(te)) => store::ingest_presplit([&tr, &va, &te], a.delimiter)?,
        _ => return Err(EngineError::Config("give --input or all of --train/--valid/--test".into())),
    };
    let layout = LayoutOptions { partitions: a.partitions, dim: a.dim, seed: a.seed };
    let ds = Dataset::create(&a.out, raw, layout, a.force)?;
    let m = &ds.meta;
    println!(
        "{} nodes, {} relations, {} edges (train {}, valid {}, test {}) in {} partitions",
        m.num_nodes,
        m.num_relations,
        m.num_edges,
        m.split_sizes[0],
        m.split_sizes[1],
        m.split_sizes[2],
        m.num_partitions
    );
    Ok(())
}

fn train(a: RunArgs) -> Result<()> {
    let cfg = a.load()?;
    let out = run::train(&cfg)?;
    if let Some(last) = out.epochs.last() {
        println!(
            "trained {} epochs; final loss {:.4}; parameters in {}",
            out.epochs.len(),
            last.loss,
            out.params_dir.display()
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let cfg = a.run.load()?;
    let ds = Dataset::open(&cfg.resolved_data_dir())?;
    let split: Split = a.split.parse()?;
    let params = a.params.unwrap_or_else(|| cfg.run_dir.join("params"));
    let result = run::evaluate_params(&ds, &params, split, &cfg.eval_settings()?)?;
    println!("{}: {}", split.as_str(), result.report);
    if let Some(out) = a.out {
        let mut text = if out.exists() { String::new() } else { format!("{}\n", run::EVAL_CSV_HEADER) };
        text.push_str(&run::eval_csv_row(split, &result.report));
        text.push('\n');
        let mut f =
            fs::OpenOptions::new().create(true).append(true).open(&out).map_err(|e| EngineError::io(&out, e))?;
        std::io::Write::write_all(&mut f, text.as_bytes()).map_err(|e| EngineError::io(&out, e))?;
    }
    if let Some(min) = a.assert_mrr_min {
        if result.report.mrr < min {
            eprintln!("MRR {:.4} is below the required {min:.4}", result.report.mrr);
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let kinds = a
        .orderings
        .iter()
        .map(|s| s.parse::<OrderingKind>().map_err(|_| EngineError::Config(format!("unknown ordering `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let sweep = OrderingSweep {
        kinds,
        partitions: a.partitions,
        capacities: a.capacity,
        ratio: a.capacity_ratio,
        seeds: a.seeds,
        partition_bytes: a.partition_bytes,
    };
    let mut trace = a.trace.as_ref().map(|_| String::new());
    let rows = run::ordering_sweep(&sweep, trace.as_mut());
    let mut csv = format!("{}\n", run::SWEEP_CSV_HEADER);
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    match a.out {
        Some(p) => write_file(&p, &csv)?,
        None => print!("{csv}"),
    }
    if let (Some(p), Some(t)) = (a.trace, trace) {
        write_file(&p, &t)?;
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let ds = Dataset::open(&a.data)?;
    let files = store::ParamFiles::new(&a.params, &ds.meta)?;
    store::export_embeddings(&files, &a.data.join("nodes.tsv"), &a.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => preprocess(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => train(a).map(|_| ExitCode::SUCCESS),
        Command::Eval(a) => eval(a),
        Command::SimulateOrdering(a) => simulate(a).map(|_| ExitCode::SUCCESS),
        Command::Export(a) => export(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
