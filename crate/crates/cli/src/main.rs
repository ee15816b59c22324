use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrcg2::experiments::{
    read_dataset, write_dataset, write_json_atomic, Dataset, ExperimentConfig, Pipeline,
    ReportDocument,
};
use qrcg2::oracle::{run_oracles, OracleOptions};
use qrcg2::{Error, ErrorKind};

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "qrcg2",
    version,
    about = "Estimate g2(0) of light sources with a quantum reservoir and tree ensembles"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate datasets and write CSV files with JSON manifests.
    Gen {
        /// Dataset names (default: every dataset in the config).
        #[arg(long = "dataset")]
        datasets: Vec<String>,
    },
    /// Train with and without the reservoir and report the test error.
    TrainEval {
        #[arg(long = "dataset")]
        datasets: Vec<String>,
    },
    /// Cross-evaluate every family's model on every family's test split.
    Cross,
    /// Score one model on contiguous segments of other datasets.
    Partition,
    /// Train on several values of one parameter and test on a held-out value.
    Sweep,
    /// Compare numerics against closed-form results.
    OracleCheck {
        /// Fock truncation used for the photon-added states.
        #[arg(long)]
        squeezed_truncation: Option<usize>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the fully resolved config as JSON.
    Config,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_config(opts: &GlobalOpts) -> Result<ExperimentConfig, Failure> {
    let mut config = match &opts.config {
        None => ExperimentConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("cannot parse config {}: {e}", p.display())))?
        }
    };
    if let Some(s) = opts.seed {
        config.root_seed = s;
    }
    if let Some(o) = &opts.out {
        config.output_dir = o.clone();
    }
    Ok(config.resolve()?)
}

fn names_or_all(config: &ExperimentConfig, names: &[String]) -> Vec<String> {
    if names.is_empty() {
        config
            .datasets
            .iter()
            .map(|d| d.name().to_string())
            .collect()
    } else {
        names.to_vec()
    }
}

fn load(dir: &Path, names: &[String]) -> Result<Vec<Dataset>, Failure> {
    names.iter().map(|n| Ok(read_dataset(dir, n)?.0)).collect()
}

fn write_report<T: serde::Serialize>(
    pipeline: &Pipeline,
    file: &str,
    kind: &str,
    body: T,
) -> Result<(), Failure> {
    let config = pipeline.config();
    let path = config.output_dir.join(file);
    write_json_atomic(&path, &ReportDocument::new(kind, config, body))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Command::OracleCheck {
        squeezed_truncation,
        json,
    } = &cli.command
    {
        let mut opts = OracleOptions::default();
        if let Some(t) = squeezed_truncation {
            opts.squeezed_truncation = *t;
        }
        let report = run_oracles(&opts);
        for c in &report.checks {
            let dev = c
                .max_deviation
                .map_or("n/a".to_string(), |d| format!("{d:.3e}"));
            println!(
                "{} {:<36} max deviation {dev} (tolerance {:.0e}, {} cases)",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.tolerance,
                c.cases
            );
            for f in &c.failures {
                println!("     {f}");
            }
        }
        if let Some(p) = json {
            write_json_atomic(p, &report)?;
        }
        return Ok(report.all_passed);
    }

    let config = load_config(&cli.global)?;
    if let Command::Config = cli.command {
        println!(
            "{}",
            serde_json::to_string_pretty(&config).map_err(Error::from)?
        );
        return Ok(true);
    }
    let pipeline = Pipeline::new(config)?;
    let config = pipeline.config().clone();
    let out = config.output_dir.clone();
    match cli.command {
        Command::Gen { datasets } => {
            for name in names_or_all(&config, &datasets) {
                let ds = pipeline.generate(&name)?;
                write_dataset(&out, &ds, &config)?;
                println!(
                    "wrote {} ({} samples)",
                    out.join(format!("{name}.csv")).display(),
                    ds.len()
                );
            }
        }
        Command::TrainEval { datasets } => {
            for name in names_or_all(&config, &datasets) {
                let ds = load(&out, std::slice::from_ref(&name))?.remove(0);
                let reports = pipeline.train_eval(&ds)?;
                for r in &reports {
                    println!(
                        "{name} {:?}: mse {:.6e} (n_test {})",
                        r.mode, r.mse, r.n_test
                    );
                }
                write_report(
                    &pipeline,
                    &format!("train-eval-{name}.json"),
                    "train-eval",
                    reports,
                )?;
            }
        }
        Command::Cross => {
            let ds = load(&out, &config.cross.datasets)?;
            let m = pipeline.cross(&ds)?;
            println!("rows: test, columns: train ({})", m.datasets.join(", "));
            for (name, row) in m.datasets.iter().zip(&m.mse) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.4e}")).collect();
                println!("{name:>14} {}", cells.join(" "));
            }
            write_report(&pipeline, "cross.json", "cross", m)?;
        }
        Command::Partition => {
            let mut names = vec![config.partition.model.clone()];
            names.extend(config.partition.targets.iter().cloned());
            let ds = load(&out, &names)?;
            let p = pipeline.partition(&ds)?;
            for (name, seg) in &p.segments {
                let cells: Vec<String> = seg.iter().map(|v| format!("{v:.4e}")).collect();
                println!("{name:>14} {}", cells.join(" "));
            }
            write_report(&pipeline, "partition.json", "partition", p)?;
        }
        Command::Sweep => {
            let g = pipeline.generalization()?;
            println!(
                "{} = {:?} -> {}: mse {:.6e}",
                g.param, g.train_values, g.test_value, g.report.mse
            );
            write_report(&pipeline, "generalization.json", "generalization", g)?;
        }
        Command::OracleCheck { .. } | Command::Config => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERICAL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Numerical => EXIT_NUMERICAL,
                ErrorKind::Io => EXIT_USAGE,
            })
        }
    }
}
