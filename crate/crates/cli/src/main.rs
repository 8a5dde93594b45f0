use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hyperbolic_procrustes::bench::{
    run_benchmark, synth_pair, trial_rng, write_summary_json, write_trials_csv, BenchmarkConfig,
};
use hyperbolic_procrustes::io::{
    read_pointset, read_weights, write_json, write_pointset, AlignmentReport, FileFormat,
    IsometryReport, Model, ReadOptions,
};
use hyperbolic_procrustes::{align, refine, Error, GdConfig, Result, Weights};

#[derive(Parser)]
#[command(
    name = "hyproc",
    version,
    about = "Procrustes alignment of point sets in hyperbolic space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InModel {
    Loid,
    Poincare,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutModel {
    Loid,
    Poincare,
}

impl From<InModel> for Model {
    fn from(m: InModel) -> Self {
        match m {
            InModel::Loid => Model::Loid,
            InModel::Poincare => Model::Poincare,
            InModel::Euclidean => Model::Euclidean,
        }
    }
}

impl From<OutModel> for Model {
    fn from(m: OutModel) -> Self {
        match m {
            OutModel::Loid => Model::Loid,
            OutModel::Poincare => Model::Poincare,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the isometry taking the source set onto the target set.
    Align {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        source: PathBuf,
        /// Positive per-point weights (CSV/whitespace list or JSON array).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Model of CSV rows; JSON files carry their own tag.
        #[arg(long, value_enum)]
        model: Option<InModel>,
        /// Fine-tune the closed-form estimate by gradient descent.
        #[arg(long)]
        refine: bool,
        /// Put slightly off-sheet hyperboloid rows back on the sheet.
        #[arg(long)]
        relift: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the synthetic benchmark described by a JSON config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving trials.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a point set between models.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        from: InModel,
        #[arg(long, value_enum)]
        to: OutModel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a random noisy pair and the isometry that relates them.
    Synth {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes <prefix>_target.json, <prefix>_source.json, <prefix>_R_true.json.
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

fn read_set(
    path: &Path,
    model: Option<Model>,
    relift: bool,
) -> Result<hyperbolic_procrustes::PointSet> {
    let format = FileFormat::from_path(path);
    // JSON documents carry their own model tag.
    let model = if format == FileFormat::Json {
        None
    } else {
        model
    };
    read_pointset(path, format, &ReadOptions { model, relift }).map_err(at(path))
}

/// Names the offending file in I/O errors.
fn at(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io(io) => Error::Io(io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, BufWriter::new(File::create(path)?)),
        None => write_json(value, io::stdout().lock()),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Align {
            target,
            source,
            weights,
            model,
            refine: do_refine,
            relift,
            out,
        } => {
            let model = model.map(Model::from);
            let target = read_set(&target, model, relift)?;
            let source = read_set(&source, model, relift)?;
            let weights = match weights {
                Some(path) => Weights::new(read_weights(&path).map_err(at(&path))?)?,
                None => Weights::uniform(target.len()),
            };
            let closed = align(&target, &source, &weights)?;
            let report = if do_refine {
                let run = refine(&target, &source, &closed.isometry, &GdConfig::default())?;
                let mut alignment = run.alignment;
                alignment.rotation = closed.rotation;
                alignment.target_centroid = closed.target_centroid;
                alignment.source_centroid = closed.source_centroid;
                AlignmentReport::new(&alignment, Some(run.iterations))?
            } else {
                AlignmentReport::new(&closed, None)?
            };
            emit(&report, out.as_deref())
        }
        Command::Benchmark { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| at(&config)(e.into()))?;
            let cfg: BenchmarkConfig = serde_json::from_str(&text)?;
            let result = run_benchmark(&cfg)?;
            fs::create_dir_all(&out)?;
            let mut trials = BufWriter::new(File::create(out.join("trials.csv"))?);
            write_trials_csv(&result.records, &mut trials)?;
            trials.flush()?;
            write_summary_json(
                &result.summary,
                BufWriter::new(File::create(out.join("summary.json"))?),
            )
        }
        Command::Convert {
            input,
            from,
            to,
            out,
        } => {
            let set = read_set(&input, Some(from.into()), false)?;
            write_pointset(&out, FileFormat::from_path(&out), to.into(), &set)
        }
        Command::Synth {
            d,
            n,
            sigma,
            seed,
            out_prefix,
        } => {
            let pair = synth_pair(n, d, sigma, &mut trial_rng(seed, d, n, 0))?;
            write_pointset(
                &with_suffix(&out_prefix, "_target.json"),
                FileFormat::Json,
                Model::Loid,
                &pair.target,
            )?;
            write_pointset(
                &with_suffix(&out_prefix, "_source.json"),
                FileFormat::Json,
                Model::Loid,
                &pair.source,
            )?;
            emit(
                &IsometryReport::new(&pair.truth)?,
                Some(&with_suffix(&out_prefix, "_R_true.json")),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("hyproc: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}
