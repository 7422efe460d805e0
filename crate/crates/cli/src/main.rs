//! `fnd` — ingestion, training, evaluation, the four experiment protocols,
//! attention heatmaps, and model file round-trips, from one binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fnd_core::config::RunConfig;
use fnd_core::corpus::{
    self, corpus_stats, ingest, stratified_split, write_canonical_tsv, Dataset, DatasetKind,
    IngestFormat,
};
use fnd_core::embeddings::write_contextual_file;
use fnd_core::error::Error;
use fnd_core::experiments::{
    extract_errors, run_cross_domain, run_leave_one_out, run_multi_domain, run_per_domain,
    traces_from_prediction, write_heatmap, ExperimentReport, HeatmapMode, ProtocolKind,
};
use fnd_core::models::{evaluate, load_model, save_model, Model, ModelKind};

/// Environment variable holding the default config file path.
const CONFIG_ENV: &str = "FND_CONFIG";

#[derive(Parser)]
#[command(
    name = "fnd",
    about = "Multi-domain fake news classifiers: corpus tooling, training, and experiment protocols",
    version,
    long_about = None,
    after_help = "Setting precedence: built-in defaults, then the config file \
                  (--config or $FND_CONFIG), then command-line flags."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    CanonicalTsv,
    DirectoryTree,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    FakenewsAmt,
    Celebrity,
}

impl From<DatasetArg> for DatasetKind {
    fn from(d: DatasetArg) -> DatasetKind {
        match d {
            DatasetArg::FakenewsAmt => DatasetKind::FakenewsAmt,
            DatasetArg::Celebrity => DatasetKind::Celebrity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Model1,
    Model2,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Model1 => ModelKind::Model1,
            ModelArg::Model2 => ModelKind::Model2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    MultiDomain,
    CrossDomain,
    LeaveOneDomainOut,
    PerDomain,
}

impl From<ProtocolArg> for ProtocolKind {
    fn from(p: ProtocolArg) -> ProtocolKind {
        match p {
            ProtocolArg::MultiDomain => ProtocolKind::MultiDomain,
            ProtocolArg::CrossDomain => ProtocolKind::CrossDomain,
            ProtocolArg::LeaveOneDomainOut => ProtocolKind::LeaveOneDomainOut,
            ProtocolArg::PerDomain => ProtocolKind::PerDomain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Html,
    Text,
}

/// Configuration layering shared by the commands that build or train
/// models.
#[derive(Args)]
struct ConfigArgs {
    /// Config file; defaults to $FND_CONFIG when set.
    #[arg(long, global = false)]
    config: Option<PathBuf>,
    /// Extra settings as `section.key=value`; applied after the file.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Base seed (also the first protocol seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Which model to build.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Number of protocol seeds (seed, seed+1, ..).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f32>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    topic_cap: Option<usize>,
    #[arg(long)]
    body_cap: Option<usize>,
    /// Pretrained word vector file (text format with `count dim` header).
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Contextual vector file for Model 2 (`#dim D` header).
    #[arg(long)]
    contextual: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::default();
        let file = self.config.clone().or_else(|| {
            std::env::var(CONFIG_ENV)
                .ok()
                .filter(|p| !p.is_empty())
                .map(PathBuf::from)
        });
        if let Some(path) = file {
            cfg.merge_file(&path)?;
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects section.key=value, got {kv:?}")))?;
            let (section, key) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("--set expects section.key=value, got {kv:?}")))?;
            cfg.set(section, key, value.trim())?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.model {
            cfg.model = v.into();
        }
        if let Some(v) = self.seeds {
            cfg.seed_count = v;
        }
        if let Some(v) = self.max_epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.embedding_dim {
            cfg.embedding_dim = v;
        }
        if let Some(v) = self.topic_cap {
            cfg.topic_cap = v;
        }
        if let Some(v) = self.body_cap {
            cfg.body_cap = v;
        }
        if let Some(v) = &self.vectors {
            cfg.vectors_path = Some(v.display().to_string());
        }
        if let Some(v) = &self.contextual {
            cfg.contextual_path = Some(v.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset, write it as canonical TSV, and print its
    /// class-distribution statistics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Dataset tag; required for directory trees.
        #[arg(long, value_enum)]
        dataset: Option<DatasetArg>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the bundled synthetic datasets and fixture files.
    GenFixtures {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = corpus::DEFAULT_FIXTURE_SEED)]
        seed: u64,
    },
    /// Train a model on a stratified split of a dataset and save it.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a saved model over every example of a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run one of the four evaluation protocols and write its report.
    Experiment {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(long)]
        input: PathBuf,
        /// Target dataset of the cross-domain protocol.
        #[arg(long)]
        input2: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Also write a misclassification dossier with the top-k errors.
        #[arg(long)]
        errors_top: Option<usize>,
        #[arg(long)]
        errors_output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render the attention heatmap of one example under a trained model.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Example id to visualize.
        #[arg(long)]
        id: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "html")]
        mode: ModeArg,
    },
    /// Round-trip a model file (integrity check plus canonical rewrite).
    ConvertModel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn read_dataset(path: &Path) -> Result<Dataset, Error> {
    ingest(path, IngestFormat::CanonicalTsv)
        .map_err(|e| wrap_path_error(e, "dataset", path))
}

fn wrap_path_error(e: Error, what: &str, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Data(format!("cannot read {what} {}: {io}", path.display())),
        other => other,
    }
}

fn load_model_at(path: &Path) -> Result<(Model, serde_json::Value), Error> {
    load_model(path).map_err(|e| wrap_path_error(e, "model file", path))
}

fn cmd_ingest(
    input: &Path,
    format: FormatArg,
    dataset: Option<DatasetArg>,
    output: &Path,
) -> Result<(), Error> {
    let format = match format {
        FormatArg::CanonicalTsv => IngestFormat::CanonicalTsv,
        FormatArg::DirectoryTree => {
            let kind = dataset.ok_or_else(|| {
                Error::Usage("--dataset is required for directory-tree input".into())
            })?;
            IngestFormat::DirectoryTree(kind.into())
        }
    };
    let ds = ingest(input, format).map_err(|e| wrap_path_error(e, "input", input))?;
    write_canonical_tsv(&ds, output)?;
    let stats = corpus_stats(&ds)?;
    println!("ingested {} examples -> {}", ds.len(), output.display());
    print!("{}", stats.render());
    Ok(())
}

fn cmd_gen_fixtures(output: &Path, seed: u64) -> Result<(), Error> {
    std::fs::create_dir_all(output)?;
    let amt = corpus::generate_fakenews_amt(seed);
    write_canonical_tsv(&amt, &output.join("fakenews_amt.tsv"))?;
    let celebrity = corpus::generate_celebrity(seed);
    write_canonical_tsv(&celebrity, &output.join("celebrity.tsv"))?;
    let mini = corpus::generate_mini(seed);
    write_canonical_tsv(&mini, &output.join("mini.tsv"))?;
    corpus::write_directory_tree(&mini, &output.join("mini_tree"))?;

    // Small pretrained-vector fixture in the standard text format.
    let words = ["president", "officials", "confirmed", "shocking", "market", "team"];
    let mut vec_file = format!("{} 8\n", words.len());
    for (i, w) in words.iter().enumerate() {
        vec_file.push_str(w);
        for j in 0..8 {
            let v = if j == i { 1.0 } else { 0.25 * ((i + j) % 3) as f32 };
            vec_file.push_str(&format!(" {v}"));
        }
        vec_file.push('\n');
    }
    std::fs::write(output.join("vectors_mini.vec"), vec_file)?;

    // Contextual-vector fixture covering the mini dataset, derived from the
    // fallback provider so the file path can be exercised end to end.
    let table = fnd_core::embeddings::EmbeddingTable::with_config(16, 1 << 16, 3, 6, seed)?;
    let provider = fnd_core::embeddings::ContextualProvider::fallback(table);
    let mut records = Vec::new();
    for e in &mini.examples {
        let (t, b) = provider.vectors(e)?;
        records.push((e.id.clone(), "topic", t));
        records.push((e.id.clone(), "body", b));
    }
    write_contextual_file(&output.join("contextual_mini.tsv"), 16, &records)?;

    println!(
        "wrote fakenews_amt.tsv, celebrity.tsv, mini.tsv, mini_tree/, vectors_mini.vec, contextual_mini.tsv under {} (seed {seed})",
        output.display()
    );
    Ok(())
}

fn cmd_train(input: &Path, output: &Path, config: &ConfigArgs) -> Result<(), Error> {
    let cfg = config.resolve()?;
    let ds = read_dataset(input)?;
    let split = stratified_split(&ds, &cfg.split_plan(cfg.seed))?;
    eprintln!(
        "training {} on {} ({} train / {} val / {} test), fingerprint {}",
        cfg.model.as_str(),
        input.display(),
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        cfg.fingerprint()
    );
    let started = Instant::now();
    let (model, history) =
        fnd_core::experiments::build_and_train(&ds, &split.train, &split.validation, &cfg, cfg.seed)?;
    for e in &history.epochs {
        eprintln!(
            "epoch {:>3}  loss {:.4}  val {:.4}",
            e.epoch, e.mean_train_loss, e.val_accuracy
        );
    }
    let test = evaluate(model.as_classifier(), &ds, &split.test)?;
    save_model(&model, &cfg.echo_json(), output)?;
    println!(
        "trained in {:.1?}; best epoch {} (val {:.4}); test accuracy {:.4}; model -> {}",
        started.elapsed(),
        history.best_epoch,
        history.best_val_accuracy,
        test.accuracy,
        output.display()
    );
    Ok(())
}

fn cmd_evaluate(model_path: &Path, input: &Path) -> Result<(), Error> {
    let (model, meta) = load_model_at(model_path)?;
    let ds = read_dataset(input)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let result = evaluate(model.as_classifier(), &ds, &all)?;
    let mut confusion = [[0usize; 2]; 2];
    for p in &result.predictions {
        confusion[p.gold.class_index()][p.predicted.class_index()] += 1;
    }
    println!(
        "model {} over {} examples: accuracy {:.4}",
        model.kind().as_str(),
        ds.len(),
        result.accuracy
    );
    println!(
        "confusion (rows gold fake/legit, columns predicted): [{} {}] [{} {}]",
        confusion[0][0], confusion[0][1], confusion[1][0], confusion[1][1]
    );
    if let Some(fp) = meta.get("fingerprint").and_then(|v| v.as_str()) {
        println!("model config fingerprint: {fp}");
    }
    Ok(())
}

fn cmd_experiment(
    protocol: ProtocolArg,
    input: &Path,
    input2: Option<&PathBuf>,
    output: &Path,
    errors_top: Option<usize>,
    errors_output: Option<&PathBuf>,
    config: &ConfigArgs,
) -> Result<(), Error> {
    let cfg = config.resolve()?;
    let ds = read_dataset(input)?;
    let started = Instant::now();
    let report: ExperimentReport = match ProtocolKind::from(protocol) {
        ProtocolKind::MultiDomain => run_multi_domain(&ds, &cfg, &cfg.protocol_seeds())?,
        ProtocolKind::CrossDomain => {
            let target_path = input2.ok_or_else(|| {
                Error::Usage("--input2 (target dataset) is required for cross_domain".into())
            })?;
            let target = read_dataset(target_path)?;
            run_cross_domain(&ds, &target, &cfg, &cfg.protocol_seeds())?
        }
        ProtocolKind::LeaveOneDomainOut => run_leave_one_out(&ds, &cfg, cfg.seed)?,
        ProtocolKind::PerDomain => run_per_domain(&ds, &cfg, cfg.seed)?,
    };
    report.write(output)?;
    print!("{}", report.render());
    println!("report -> {} ({:.1?})", output.display(), started.elapsed());
    if let Some(k) = errors_top {
        let dossier_path = errors_output
            .cloned()
            .unwrap_or_else(|| output.with_extension("errors.json"));
        let dossier = extract_errors(&report, &ds, k)?;
        std::fs::write(
            &dossier_path,
            serde_json::to_string_pretty(&dossier)
                .map_err(|e| Error::Data(format!("dossier serialization failed: {e}")))?
                + "\n",
        )?;
        print!("{}", dossier.render());
        println!("dossier -> {}", dossier_path.display());
    }
    Ok(())
}

fn cmd_heatmap(
    model_path: &Path,
    input: &Path,
    id: &str,
    output: &Path,
    mode: ModeArg,
) -> Result<(), Error> {
    let (model, _) = load_model_at(model_path)?;
    let ds = read_dataset(input)?;
    let example = ds
        .examples
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::Lookup(format!("no example with id {id:?} in {}", input.display())))?;
    let prediction = model.predict(example)?;
    let traces = traces_from_prediction(example, &prediction)?;
    let mode = match mode {
        ModeArg::Html => HeatmapMode::Html,
        ModeArg::Text => HeatmapMode::Text,
    };
    write_heatmap(&traces, output, mode)?;
    println!(
        "heatmap for {id} (predicted {}, gold {}) -> {}",
        prediction.label.as_str(),
        example.label.as_str(),
        output.display()
    );
    Ok(())
}

fn cmd_convert_model(input: &Path, output: &Path) -> Result<(), Error> {
    let (model, meta) = load_model_at(input)?;
    save_model(&model, &meta, output)?;
    println!(
        "round-tripped {} model: {} -> {}",
        model.kind().as_str(),
        input.display(),
        output.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Ingest {
            input,
            format,
            dataset,
            output,
        } => cmd_ingest(input, *format, *dataset, output),
        Command::GenFixtures { output, seed } => cmd_gen_fixtures(output, *seed),
        Command::Train {
            input,
            output,
            config,
        } => cmd_train(input, output, config),
        Command::Evaluate { model, input } => cmd_evaluate(model, input),
        Command::Experiment {
            protocol,
            input,
            input2,
            output,
            errors_top,
            errors_output,
            config,
        } => cmd_experiment(
            *protocol,
            input,
            input2.as_ref(),
            output,
            *errors_top,
            errors_output.as_ref(),
            config,
        ),
        Command::Heatmap {
            model,
            input,
            id,
            output,
            mode,
        } => cmd_heatmap(model, input, id, output, *mode),
        Command::ConvertModel { input, output } => cmd_convert_model(input, output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
