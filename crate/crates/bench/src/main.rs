use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fids::{FidsConfig, ForestParams, MetricChoice, MetricFamily, TreeParams};
use fids_bench::manifest::{FileStatus, Manifest};
use fids_bench::run::prepare;
use fids_bench::{report, run_benchmark, run_detailed, BenchError, BenchReport, Cap, Result, RunConfig};

#[derive(Parser)]
#[command(name = "fids-bench", version, about = "Z-score KNN versus FIDS-weighted KNN on UCI datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List dataset URLs and checksums and verify the local copies.
    Fetch {
        #[command(flatten)]
        data: DataArgs,
        /// Also write the URL list (url, local path, sha256) to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full comparison over the benchmark datasets.
    Bench {
        #[command(flatten)]
        opts: RunArgs,
        /// Comma-separated dataset names (defaults to the six benchmark sets).
        #[arg(long, value_delimiter = ',')]
        datasets: Vec<String>,
        /// Interleave datasets on the thread pool; row order is unchanged.
        #[arg(long)]
        parallel_datasets: bool,
        /// Directory for report.txt, report.jsonl and timings.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the comparison on one dataset.
    Run {
        dataset: String,
        #[command(flatten)]
        opts: RunArgs,
        /// Directory for the report files and the fitted model text.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the permutation importance of every feature on a training split.
    Importance {
        dataset: String,
        #[command(flatten)]
        opts: RunArgs,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Extra manifest files; one whose name matches a built-in replaces it.
    #[arg(long = "manifest")]
    manifests: Vec<PathBuf>,
    #[arg(long)]
    allow_checksum_mismatch: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Index {
    None,
    Kdtree,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// euclidean, manhattan, minkowski, chebyshev, std-euclidean or mahalanobis.
    #[arg(long, default_value = "euclidean")]
    metric: String,
    #[arg(long, default_value_t = 3.0)]
    minkowski_p: f64,
    #[arg(long, default_value_t = 200)]
    n_trees: usize,
    /// Candidate features per split (default floor(sqrt(d))).
    #[arg(long)]
    mtry: Option<usize>,
    /// Forest seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 7)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    importance_floor: f64,
    /// Row cap for every dataset, replacing manifest defaults.
    #[arg(long, conflicts_with = "full")]
    subsample: Option<usize>,
    /// Ignore manifest row caps.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value = "none")]
    index: Index,
}

fn manifests(args: &DataArgs) -> Result<Vec<Manifest>> {
    let mut out: Vec<Manifest> = Manifest::builtin_names()
        .map(|n| Manifest::builtin(n).expect("built-in"))
        .collect();
    for path in &args.manifests {
        let m = Manifest::load(path)?;
        match out.iter_mut().find(|o| o.name == m.name) {
            Some(slot) => *slot = m,
            None => out.push(m),
        }
    }
    Ok(out)
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let family = MetricFamily::parse(&args.metric).ok_or_else(|| {
        let names: Vec<&str> = MetricFamily::ALL.iter().map(|f| f.name()).collect();
        BenchError::Usage(format!("unknown metric `{}`; expected one of {}", args.metric, names.join(", ")))
    })?;
    let mut config = RunConfig::new(manifests(&args.data)?, &args.data.data_dir);
    config.fids = FidsConfig {
        k: args.k,
        metric: MetricChoice::from_family(family, args.minkowski_p),
        forest: ForestParams {
            n_trees: args.n_trees,
            tree: TreeParams {
                mtry: args.mtry,
                ..TreeParams::default()
            },
            seed: args.seed,
            parallel: true,
        },
        importance_floor: args.importance_floor,
        use_index: matches!(args.index, Index::Kdtree),
        ..FidsConfig::default()
    };
    config.test_fraction = args.test_fraction;
    config.split_seed = args.split_seed;
    config.cap = match (args.subsample, args.full) {
        (Some(n), _) => Cap::Rows(n),
        (None, true) => Cap::Full,
        (None, false) => Cap::ManifestDefault,
    };
    config.allow_checksum_mismatch = args.data.allow_checksum_mismatch;
    Ok(config)
}

fn emit(report: &BenchReport, out: Option<&Path>) -> Result<()> {
    print!("{}", report::to_text(report));
    if let Some(dir) = out {
        report::write_all(report, dir)?;
        eprintln!("reports written to {}", dir.display());
    }
    Ok(())
}

fn fetch(args: &DataArgs, out: Option<&Path>) -> Result<()> {
    let mut listing = String::new();
    let mut problems = 0;
    for m in manifests(args)? {
        println!("{}: {}", m.name, m.description);
        for f in &m.files {
            let status = match f.status(&args.data_dir)? {
                FileStatus::Missing if f.required => {
                    problems += 1;
                    "MISSING".to_string()
                }
                FileStatus::Missing => "missing (optional)".to_string(),
                FileStatus::Verified => "ok".to_string(),
                FileStatus::Unverified(actual) => format!("present, no recorded checksum (sha256 {actual})"),
                FileStatus::Mismatch { actual, .. } => {
                    problems += 1;
                    format!("CHECKSUM MISMATCH (sha256 {actual})")
                }
            };
            println!("  {} <- {}\n    {status}", f.local_path(&args.data_dir).display(), f.url);
            listing.push_str(&format!(
                "{}\t{}\t{}\n",
                f.url,
                f.local_path(&args.data_dir).display(),
                f.sha256.as_deref().unwrap_or("-")
            ));
        }
    }
    if let Some(path) = out {
        std::fs::write(path, listing).map_err(BenchError::io(format!("writing {}", path.display())))?;
    }
    if problems > 0 {
        return Err(BenchError::Data(format!(
            "{problems} required file(s) missing or failing verification"
        )));
    }
    Ok(())
}

fn importance(name: &str, args: &RunArgs) -> Result<()> {
    let config = run_config(args)?;
    let (data, split) = prepare(config.manifest(name)?, &config)?;
    let train = data.subset(&split.train);
    let model = fids::fit_fids(&train, &config.fids)?;
    let imp = model.importance();
    println!(
        "{name}: {} training rows, {} trees evaluated out of bag",
        train.n(),
        imp.evaluated_trees.len()
    );
    let width = train.feature_names().iter().map(String::len).max().unwrap_or(7).max(7);
    println!("{:<width$}  {:>13}  {:>10}", "feature", "average_error", "weight");
    for ((name, e), w) in train
        .feature_names()
        .iter()
        .zip(&imp.average_error)
        .zip(model.weights().as_slice())
    {
        println!("{name:<width$}  {e:>13.6}  {w:>10.6}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fetch { data, out } => fetch(&data, out.as_deref()),
        Command::Bench {
            opts,
            datasets,
            parallel_datasets,
            out,
        } => {
            let mut config = run_config(&opts)?;
            config.parallel_datasets = parallel_datasets;
            let names: Vec<&str> = if datasets.is_empty() {
                fids_bench::BENCHMARK_DATASETS.to_vec()
            } else {
                datasets.iter().map(String::as_str).collect()
            };
            emit(&run_benchmark(&names, &config)?, out.as_deref())
        }
        Command::Run { dataset, opts, out } => {
            let config = run_config(&opts)?;
            let outcome = run_detailed(&dataset, &config)?;
            let report = BenchReport {
                config: fids_bench::run::ConfigEcho::new(&config),
                rows: vec![outcome.row],
                seconds: vec![outcome.seconds],
            };
            emit(&report, out.as_deref())?;
            if let Some(dir) = out {
                let path = dir.join(format!("{dataset}.fids"));
                let reference = format!("{dataset} train split {}", report.rows[0].split_hash);
                std::fs::write(&path, outcome.model.to_text(&reference))
                    .map_err(BenchError::io(format!("writing {}", path.display())))?;
            }
            Ok(())
        }
        Command::Importance { dataset, opts } => importance(&dataset, &opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
