//! `reefhc` command-line tool.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reefhc::cover::Annotation;
use reefhc::experiment::CurveMetric;
use reefhc::metrics::HierAveraging;
use reefhc::synth::{SampleCounts, SynthSpec};
use reefhc::tree::validate_document;
use reefhc::{
    cover_at_level, cover_error, emit_results, fit_flat, fit_lcpn, run_learning_curve, stratified_split,
    AnnotationSet, CurveConfig, Dataset, LabelTree, MetricsReport, Model, Optimizer, TrainConfig,
};

/// Tree argument value that selects the built-in Rio do Fogo hierarchy.
const BUNDLED: &str = "bundled";

#[derive(Parser)]
#[command(name = "reefhc", version, about = "Hierarchical classification toolkit for benthic point annotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label tree utilities
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Dataset utilities
    #[command(subcommand)]
    Data(DataCmd),
    /// Generate a synthetic hierarchical dataset
    Synth(SynthArgs),
    /// Train a flat or hierarchical model
    Train(TrainArgs),
    /// Predict leaf labels with a trained model
    Predict(PredictArgs),
    /// Score predictions against ground truth
    Eval(EvalArgs),
    /// Flat vs hierarchical learning curve
    Curve(CurveArgs),
    /// Cover proportions per category at given tree levels
    Cover(CoverArgs),
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Check a tree document; prints OK or one line per violation
    Validate { path: PathBuf },
    /// Print a tree in normalized form with a summary on stderr
    Show {
        /// Tree file, or `bundled`
        path: String,
        #[arg(long)]
        json: bool,
    },
    /// Write the bundled Rio do Fogo tree, header included
    Bundled {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Class histogram, most frequent first
    Stats {
        path: PathBuf,
        /// Check every label against this tree (`bundled` allowed)
        #[arg(long)]
        tree: Option<String>,
    },
    /// Stratified train/test split
    Split {
        path: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Children per node at each depth, e.g. 3,3,3
    #[arg(long, value_delimiter = ',', required = true)]
    branching: Vec<usize>,
    /// Mean displacement per depth, e.g. 3,2,1 (default: 3,2,1,1,...)
    #[arg(long, value_delimiter = ',')]
    spread: Option<Vec<f64>>,
    /// Use raw N(0, I) mean displacements instead of unit-length ones
    #[arg(long)]
    raw_displacement: bool,
    /// Per-dimension sample noise
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Power-law exponent; requires --n
    #[arg(long, requires = "n")]
    alpha: Option<f64>,
    /// Total samples under a power law (alpha 0 when --alpha is absent)
    #[arg(long, conflicts_with = "per_leaf")]
    n: Option<usize>,
    /// Samples per leaf
    #[arg(long)]
    per_leaf: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives tree.txt and data.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Hier,
    Flat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

/// Training flags. Unset flags fall back to `--config`, then to defaults.
#[derive(Args)]
struct TrainFlags {
    /// JSON training config
    #[arg(long, env = "REEFHC_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Hidden layer widths, e.g. 200,100
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Inverse-frequency class weights
    #[arg(long)]
    class_weighting: bool,
    /// Skip feature standardization
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Tree file, or `bundled`
    #[arg(long)]
    tree: String,
    #[arg(long)]
    data: PathBuf,
    /// Model bundle directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct PredictArgs {
    /// Model bundle directory
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append the top-down path as `node>node>leaf`
    #[arg(long)]
    emit_path: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Tree file, or `bundled`
    #[arg(long)]
    tree: String,
    /// Table whose first three columns are image_id, point_id, label
    #[arg(long)]
    truth: PathBuf,
    /// Prediction table with the same keys
    #[arg(long)]
    pred: PathBuf,
    /// Print the JSON report instead of the key/value table
    #[arg(long)]
    json: bool,
    /// Average hierarchical scores per sample instead of pooling
    #[arg(long)]
    per_sample: bool,
}

#[derive(Args)]
struct CurveArgs {
    /// Tree file, or `bundled`
    #[arg(long)]
    tree: String,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Training sizes (default: 5 log-spaced sizes)
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metrics to record, e.g. macro_f1,h_f1
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    #[arg(long)]
    per_sample: bool,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Results table; a summary goes next to it
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train_flags: TrainFlags,
}

#[derive(Args)]
struct CoverArgs {
    /// Tree file, or `bundled`
    #[arg(long)]
    tree: String,
    /// Tree depth; repeat for several levels
    #[arg(long = "level", required = true)]
    levels: Vec<usize>,
    #[arg(long)]
    truth: PathBuf,
    /// Predictions; adds per-category absolute errors
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Write one table per level here instead of printing
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// A domain failure: stable code plus message.
struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new("E_IO", format!("{}: {e}", path.display()))
    }
}

impl<E: Into<reefhc::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: reefhc::Error = e.into();
        Failure::new(e.code(), e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            let message = f.message.replace('\n', " ");
            eprintln!("error[{}]: {message}", f.code);
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult<ExitCode> {
    match command {
        Command::Tree(c) => tree_cmd(c),
        Command::Data(c) => data_cmd(c).map(|_| ExitCode::SUCCESS),
        Command::Synth(a) => synth(a).map(|_| ExitCode::SUCCESS),
        Command::Train(a) => train(a).map(|_| ExitCode::SUCCESS),
        Command::Predict(a) => predict(a).map(|_| ExitCode::SUCCESS),
        Command::Eval(a) => eval(a).map(|_| ExitCode::SUCCESS),
        Command::Curve(a) => curve(a).map(|_| ExitCode::SUCCESS),
        Command::Cover(a) => cover(a).map(|_| ExitCode::SUCCESS),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn load_tree(arg: &str) -> CliResult<LabelTree> {
    if arg == BUNDLED {
        return Ok(reefhc::bundled_tree());
    }
    Ok(LabelTree::parse_any(&read(Path::new(arg))?)?)
}

fn tree_cmd(cmd: TreeCmd) -> CliResult<ExitCode> {
    match cmd {
        TreeCmd::Validate { path } => {
            let text = read(&path)?;
            let errors = if text.trim_start().starts_with('{') {
                LabelTree::from_json(&text).err().into_iter().collect()
            } else {
                validate_document(&text)
            };
            if errors.is_empty() {
                println!("OK");
                return Ok(ExitCode::SUCCESS);
            }
            for e in &errors {
                println!("{}: {e}", e.code());
            }
            eprintln!("error[{}]: {} violation(s) in {}", errors[0].code(), errors.len(), path.display());
            Ok(ExitCode::from(1))
        }
        TreeCmd::Show { path, json } => {
            let tree = load_tree(&path)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&tree.to_json_node()).expect("tree serializes"));
            } else {
                print!("{}", tree.to_document());
            }
            eprintln!(
                "{} nodes, {} leaves, depth {}",
                tree.len(),
                tree.leaf_count(),
                tree.max_depth()
            );
            Ok(ExitCode::SUCCESS)
        }
        TreeCmd::Bundled { out } => {
            match out {
                Some(p) => write(&p, reefhc::BUNDLED_TREE)?,
                None => print!("{}", reefhc::BUNDLED_TREE),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn data_cmd(cmd: DataCmd) -> CliResult {
    match cmd {
        DataCmd::Stats { path, tree } => {
            let tree = tree.as_deref().map(load_tree).transpose()?;
            let data = load_data(&path, tree.as_ref())?;
            let hist = data.sorted_histogram();
            let width = hist.iter().map(|(l, _)| l.len()).max().unwrap_or(5).max(5);
            println!("{:<width$} {:>8} {:>8}", "label", "count", "share");
            for (label, n) in &hist {
                println!("{label:<width$} {n:>8} {:>7.2}%", 100.0 * *n as f64 / data.len() as f64);
            }
            println!(
                "{} samples, {} classes, {} features",
                data.len(),
                hist.len(),
                data.feature_dim()
            );
        }
        DataCmd::Split {
            path,
            test_fraction,
            seed,
            train_out,
            test_out,
        } => {
            let data = load_data(&path, None)?;
            let (train, test) = stratified_split(&data, test_fraction, seed)?;
            train.save(&train_out)?;
            test.save(&test_out)?;
            println!("train {} / test {}", train.len(), test.len());
        }
    }
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let tree = reefhc::gen_tree(&a.branching)?;
    let mut spec = SynthSpec::new(tree, a.seed);
    spec.feature_dim = a.dim;
    spec.noise_sigma = a.noise;
    spec.unit_displacement = !a.raw_displacement;
    if let Some(s) = a.spread {
        spec.level_spread = s;
    }
    spec.counts = match (a.n, a.per_leaf) {
        (Some(total), _) => SampleCounts::PowerLaw {
            total,
            alpha: a.alpha.unwrap_or(0.0),
        },
        (None, Some(n)) => SampleCounts::PerLeaf(n),
        (None, None) => spec.counts,
    };
    let data = reefhc::gen_samples(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    write(&a.out.join("tree.txt"), &spec.tree.to_document())?;
    data.save(a.out.join("data.csv"))?;
    println!(
        "{} samples over {} leaves written to {}",
        data.len(),
        spec.tree.leaf_count(),
        a.out.display()
    );
    Ok(())
}

fn train_config(flags: &TrainFlags, seed: Option<u64>) -> CliResult<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| Failure::new("E_CONFIG", format!("{}: {e}", p.display())))?,
        None => TrainConfig::default(),
    };
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.l2 {
        cfg.l2 = v;
    }
    if let Some(v) = &flags.hidden {
        cfg.hidden = v.clone();
    }
    match flags.optimizer {
        Some(OptimizerArg::Adam) => cfg.optimizer = Optimizer::default(),
        Some(OptimizerArg::Sgd) => cfg.optimizer = Optimizer::Sgd,
        None => {}
    }
    cfg.class_weighting |= flags.class_weighting;
    if flags.no_standardize {
        cfg.standardize = false;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> CliResult {
    let tree = load_tree(&a.tree)?;
    let data = load_data(&a.data, Some(&tree))?;
    let cfg = train_config(&a.train, a.seed)?;
    let model = match a.model {
        ModelArg::Hier => Model::Hier(fit_lcpn(&tree, &data, &cfg)?),
        ModelArg::Flat => Model::Flat(fit_flat(&tree, &data, &cfg)?),
    };
    model.save(&a.out)?;
    let kind = match a.model {
        ModelArg::Hier => "hierarchical",
        ModelArg::Flat => "flat",
    };
    println!("trained {kind} model on {} samples; bundle in {}", data.len(), a.out.display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn predict(a: PredictArgs) -> CliResult {
    let model = Model::load(&a.model)?;
    let data = load_data(&a.data, None)?;
    let paths = model.predict_paths(data.feature_matrix().view())?;
    let tree = model.tree();
    let mut out = String::from("image_id,point_id,predicted_label");
    if a.emit_path {
        out.push_str(",path");
    }
    out.push('\n');
    for (s, p) in data.samples().iter().zip(&paths) {
        out.push_str(&format!(
            "{},{},{}",
            csv_field(&s.image_id),
            s.point_id,
            csv_field(tree.name(p.leaf))
        ));
        if a.emit_path {
            let names: Vec<&str> = p.nodes.iter().map(|&n| tree.name(n)).collect();
            out.push(',');
            out.push_str(&csv_field(&names.join(">")));
        }
        out.push('\n');
    }
    match a.out {
        Some(p) => write(&p, &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

/// Predicted labels reordered to follow the truth records.
fn aligned(truth: &AnnotationSet, pred: &AnnotationSet) -> CliResult<Vec<String>> {
    let by_key: BTreeMap<(&str, u32), &str> = pred
        .records()
        .iter()
        .map(|r| ((r.image_id.as_str(), r.point_id), r.label.as_str()))
        .collect();
    if by_key.len() != truth.len() {
        return Err(Failure::new(
            "E_KEY_MISMATCH",
            format!("truth has {} points, predictions have {}", truth.len(), by_key.len()),
        ));
    }
    truth
        .records()
        .iter()
        .map(|Annotation { image_id, point_id, .. }| {
            by_key
                .get(&(image_id.as_str(), *point_id))
                .map(|l| l.to_string())
                .ok_or_else(|| {
                    Failure::new("E_KEY_MISMATCH", format!("no prediction for ({image_id}, {point_id})"))
                })
        })
        .collect()
}

/// Domain error prefixed with the file it came from.
fn located(path: &Path, e: impl Into<reefhc::Error>) -> Failure {
    let f = Failure::from(e);
    Failure::new(f.code, format!("{}: {}", path.display(), f.message))
}

fn load_annotations(path: &Path) -> CliResult<AnnotationSet> {
    AnnotationSet::load(path).map_err(|e| located(path, e))
}

fn load_data(path: &Path, tree: Option<&LabelTree>) -> CliResult<Dataset> {
    Dataset::load(path, tree).map_err(|e| located(path, e))
}

fn eval(a: EvalArgs) -> CliResult {
    let tree = load_tree(&a.tree)?;
    let truth = load_annotations(&a.truth)?;
    let pred = load_annotations(&a.pred)?;
    let pred_labels = aligned(&truth, &pred)?;
    let true_labels: Vec<String> = truth.records().iter().map(|r| r.label.clone()).collect();
    let averaging = if a.per_sample {
        HierAveraging::PerSample
    } else {
        HierAveraging::Pooled
    };
    let report = MetricsReport::evaluate(&tree, &true_labels, &pred_labels, None, averaging)?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        let f = &report.flat;
        let h = &report.hier;
        println!("[flat]");
        println!("accuracy     {:.6}", f.accuracy);
        println!("macro_f1     {:.6}", f.macro_f1);
        println!("micro_f1     {:.6}", f.micro_f1);
        println!("weighted_f1  {:.6}", f.weighted_f1);
        println!();
        println!("[hierarchical]");
        println!("h_precision  {:.6}", h.h_precision);
        println!("h_recall     {:.6}", h.h_recall);
        println!("h_f1         {:.6}", h.h_f1);
        println!();
        print!("{}", report.to_kv_table());
    }
    Ok(())
}

fn curve(a: CurveArgs) -> CliResult {
    let tree = load_tree(&a.tree)?;
    let train = load_data(&a.train, Some(&tree))?;
    let test = load_data(&a.test, Some(&tree))?;
    let sizes = a.sizes.unwrap_or_else(|| CurveConfig::default_sizes(train.len()));
    let mut cfg = CurveConfig::new(sizes, a.repeats, a.seed);
    cfg.train_config = train_config(&a.train_flags, None)?;
    cfg.threads = a.threads;
    if a.per_sample {
        cfg.averaging = HierAveraging::PerSample;
    }
    if let Some(names) = &a.metrics {
        cfg.metrics = names
            .iter()
            .map(|n| n.parse::<CurveMetric>().map_err(|e| Failure::new("E_CONFIG", e)))
            .collect::<CliResult<_>>()?;
    }
    let curve = run_learning_curve(&tree, &train, &test, &cfg)?;
    emit_results(&curve.points, &a.out)?;
    print!("{}", reefhc::experiment::summary_table(&curve.points));
    Ok(())
}

fn cover(a: CoverArgs) -> CliResult {
    let tree = load_tree(&a.tree)?;
    let truth = load_annotations(&a.truth)?;
    let pred = a.pred.as_deref().map(load_annotations).transpose()?;
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    for &level in &a.levels {
        let table = match &pred {
            Some(p) => cover_error(&tree, &truth, p, level)?.to_table(),
            None => cover_at_level(&tree, &truth, level)?.to_table(),
        };
        match &a.out_dir {
            Some(dir) => write(&dir.join(format!("cover_level{level}.csv")), &table)?,
            None => {
                println!("# level {level}");
                print!("{table}");
            }
        }
    }
    Ok(())
}
