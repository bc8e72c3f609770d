//! The `deck` command line. [`run_cli`] returns the process exit status:
//! 0 on success, 1 on domain errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use deck_core::augment::{
    build_augmented_corpus, compare_ood, select_worst_dir_tests, AssignmentPolicy, AugmentationPlan, EvalRecord,
};
use deck_core::baseline::{train_baseline, BaselineConfig};
use deck_core::corpus::{clean_corpus, Split, SplitSelector};
use deck_core::model::Scorer;
use deck_core::runner::{compare_case_logs, run_suite, RunOptions, TestCaseResult, DEFAULT_BATCH_SIZE};
use deck_core::shift::{export_projection, shift_matrix, EmbeddingSet, DEFAULT_PROJECTIONS};
use deck_core::suite::vet_suite;
use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterOptions, ModelHandle};
use crate::corpus_io::{load_cleaning_config, load_corpus, write_corpus_jsonl, CorpusFormat};
use crate::embeddings::{load_embeddings, write_projection_csv};
use crate::manifest::Manifest;
use crate::report::{read_report, render_combined, render_markdown, report_to_json};
use crate::suite_io::{load_suite, suite_to_json};
use crate::{DeckError, Result};

#[derive(Parser, Debug)]
#[command(name = "deck", version, about = "Behavioral testing of depression classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a corpus, optionally clean it, and write canonical JSONL.
    Ingest(IngestArgs),
    /// Train the builtin bag-of-words baseline on a corpus's train split.
    TrainBaseline(TrainArgs),
    /// Run a suite against a model and write a run directory.
    Run(RunArgs),
    /// Render one or more run reports as Markdown.
    Report(ReportArgs),
    /// Pairwise distribution shift between embedding files.
    Shift(ShiftArgs),
    /// Append sentences of poorly handled DIR tests to train/dev texts.
    Augment(AugmentArgs),
    /// Compare two evaluations with McNemar's test.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Cleaning tables: `builtin` or a JSON file. No cleaning when omitted.
    #[arg(long)]
    pub clean: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// TOML file with learning_rate, epochs, hash_dim, l2, ngram.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub hash_dim: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Dev,
    Test,
    All,
}

impl SplitArg {
    pub fn selector(self) -> SplitSelector {
        match self {
            SplitArg::Train => SplitSelector::Only(Split::Train),
            SplitArg::Dev => SplitSelector::Only(Split::Dev),
            SplitArg::Test => SplitSelector::Only(Split::Test),
            SplitArg::All => SplitSelector::All,
        }
    }
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// `builtin` or a suite file (.json or .toml).
    #[arg(long, default_value = "builtin")]
    pub suite: String,
    /// builtin:<model.json>, cmd:<command>, replay:<file> or http(s)://<url>.
    #[arg(long)]
    pub model: String,
    /// Run directory; must not exist yet.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Recorded in the report; the run itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub batch_size: usize,
    /// Replaces the confidence threshold of every DIR test.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Free-form timestamp to record; omitted by default so reports stay
    /// byte-reproducible.
    #[arg(long)]
    pub timestamp: Option<String>,
    /// Bearer token for HTTP backends.
    #[arg(long)]
    #[serde(skip)]
    pub token: Option<String>,
    /// Vet presence-sentence pools with these models first (at least 3).
    #[arg(long = "vet-model")]
    pub vet_models: Vec<String>,
    /// Score the unperturbed texts only, writing metrics and predictions.
    #[arg(long)]
    pub metrics_only: bool,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Run directories or report.json files; several give one accuracy
    /// column each.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Markdown output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct ShiftArgs {
    /// Embedding files (JSONL or headerless CSV), one per corpus.
    #[arg(long = "embeddings", required = true, num_args = 1..)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PROJECTIONS)]
    pub projections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; must not exist yet.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    LabelConsistent,
    Uniform,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct AugmentArgs {
    /// Report whose DIR rows drive the selection.
    #[arg(long, required_unless_present = "select")]
    pub report: Option<PathBuf>,
    /// Explicit comma-separated test ids instead of a report.
    #[arg(long, value_delimiter = ',')]
    pub select: Option<Vec<String>>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "builtin")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "label-consistent")]
    pub policy: PolicyArg,
    /// Output corpus (JSONL). `plan.json` is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareKind {
    /// Per-sample correctness from predictions.jsonl.
    Ood,
    /// Per-case pass/fail from cases.jsonl.
    Cases,
}

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "ood")]
    pub kind: CompareKind,
    /// Run directory or log file of the earlier evaluation.
    #[arg(long)]
    pub before: PathBuf,
    #[arg(long)]
    pub after: PathBuf,
    /// Also write the comparison as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (program name first) and executes the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(&a),
        Command::TrainBaseline(a) => train(&a),
        Command::Run(a) => run(&a),
        Command::Report(a) => report(&a),
        Command::Shift(a) => shift(&a),
        Command::Augment(a) => augment(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// `<file>.manifest.json` next to a single-file output.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| DeckError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("values serialize") + "\n"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| DeckError::io(p, e)),
        _ => Ok(()),
    }
}

/// Output directory that only appears under its final name once complete.
struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
}

impl StagedDir {
    fn new(target: &Path) -> Result<Self> {
        if target.exists() {
            return Err(DeckError::Invalid(format!(
                "output directory {} already exists",
                target.display()
            )));
        }
        ensure_parent(target)?;
        let name = target
            .file_name()
            .ok_or_else(|| DeckError::Invalid(format!("{} is not a directory name", target.display())))?;
        let mut staging_name = OsString::from(".");
        staging_name.push(name);
        staging_name.push(format!(".tmp-{}", std::process::id()));
        let staging = target.with_file_name(staging_name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| DeckError::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| DeckError::io(&staging, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.staging.join(file)
    }

    fn commit(self) -> Result<()> {
        fs::rename(&self.staging, &self.target).map_err(|e| DeckError::io(&self.target, e))
    }

    /// Keeps what was written under `<target>.partial` for inspection.
    fn abandon(self) -> PathBuf {
        let mut name = self.target.file_name().map(OsString::from).unwrap_or_default();
        name.push(".partial");
        let partial = self.target.with_file_name(name);
        if !partial.exists() && fs::rename(&self.staging, &partial).is_ok() {
            partial
        } else {
            self.staging
        }
    }
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let format = match a.format {
        Some(FormatArg::Jsonl) => CorpusFormat::Jsonl,
        Some(FormatArg::Csv) => CorpusFormat::Csv,
        None => CorpusFormat::from_path(&a.input),
    };
    let corpus = load_corpus(&a.input, format)?;
    let mut manifest = Manifest::new("ingest", config_json(a));
    manifest.add_input(&path_str(&a.input))?;
    let (corpus, dropped) = match &a.clean {
        Some(spec) => {
            let config = load_cleaning_config(spec)?;
            if spec != "builtin" {
                manifest.add_input(spec)?;
            }
            clean_corpus(&corpus, &config)
        }
        None => (corpus, Vec::new()),
    };
    ensure_parent(&a.out)?;
    write_corpus_jsonl(&corpus, &a.out)?;
    let counts: Vec<serde_json::Value> = corpus
        .split_counts()
        .iter()
        .map(|(split, c)| {
            serde_json::json!({
                "split": split.as_str(),
                "depressed": c.depressed,
                "non_depressed": c.non_depressed,
            })
        })
        .collect();
    manifest.results = Some(serde_json::json!({
        "n_samples": corpus.len(),
        "splits": counts,
        "dropped_empty_after_cleaning": dropped,
    }));
    manifest.write(&sibling(&a.out, ".manifest.json"))?;
    println!("wrote {} samples to {}", corpus.len(), a.out.display());
    if !dropped.is_empty() {
        println!("dropped {} samples whose text was empty after cleaning", dropped.len());
    }
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
            toml::from_str::<BaselineConfig>(&text).map_err(|e| DeckError::parse(path, 0, e.to_string()))?
        }
        None => BaselineConfig::default(),
    };
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.hash_dim {
        config.hash_dim = v;
    }
    if let Some(v) = a.l2 {
        config.l2 = v;
    }
    let corpus = load_corpus(&a.corpus, CorpusFormat::from_path(&a.corpus))?;
    let (model, log) = train_baseline(&corpus, &config, a.seed)?;
    ensure_parent(&a.out)?;
    write_text(&a.out, &(serde_json::to_string(&model).expect("models serialize") + "\n"))?;
    let mut manifest = Manifest::new("train-baseline", config_json(a));
    manifest.add_input(&path_str(&a.corpus))?;
    if let Some(c) = &a.config {
        manifest.add_input(&path_str(c))?;
    }
    manifest.seed = Some(a.seed);
    let d = model.descriptor();
    manifest.model_id = Some(format!("{}@{}", d.name, d.version));
    manifest.results = Some(serde_json::json!({
        "hyperparameters": config,
        "n_train": log.n_train,
        "initial_loss": log.losses.first(),
        "final_loss": log.losses.last(),
    }));
    manifest.write(&sibling(&a.out, ".manifest.json"))?;
    println!(
        "trained {}@{} on {} samples; loss {:.4} -> {:.4}",
        d.name,
        d.version,
        log.n_train,
        log.losses.first().copied().unwrap_or(f64::NAN),
        log.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn model_input(locator: &str) -> Option<&str> {
    locator
        .strip_prefix("builtin:")
        .or_else(|| locator.strip_prefix("replay:"))
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    sample_id: &'a str,
    label: deck_core::model::Label,
    p_depressed: f64,
    hard_label: deck_core::model::Label,
}

fn run(a: &RunArgs) -> Result<()> {
    if let Some(t) = a.theta {
        if !(t.is_finite() && t >= 0.0) {
            return Err(DeckError::Invalid(format!("--theta must be a non-negative number, got {t}")));
        }
    }
    if !a.vet_models.is_empty() && a.vet_models.len() < deck_core::suite::MIN_VETTING_MODELS {
        return Err(DeckError::Invalid(format!(
            "--vet-model needs at least {} models, got {}",
            deck_core::suite::MIN_VETTING_MODELS,
            a.vet_models.len()
        )));
    }
    let corpus = load_corpus(&a.corpus, CorpusFormat::from_path(&a.corpus))?;
    let mut suite = load_suite(&a.suite)?;
    let options = AdapterOptions {
        batch_size: a.batch_size,
        token: a.token.clone(),
        ..AdapterOptions::from_env()
    };

    let mut manifest = Manifest::new("run", config_json(a));
    manifest.add_input(&path_str(&a.corpus))?;
    manifest.add_input(&a.suite)?;
    if let Some(p) = model_input(&a.model) {
        manifest.add_input(p)?;
    }
    manifest.seed = Some(a.seed);
    manifest.timestamp = a.timestamp.clone();

    let vetting = if a.vet_models.is_empty() {
        None
    } else {
        let mut handles = a
            .vet_models
            .iter()
            .map(|m| ModelHandle::open(m, &options))
            .collect::<Result<Vec<_>>>()?;
        let mut refs: Vec<&mut dyn Scorer> = handles.iter_mut().map(|h| h as &mut dyn Scorer).collect();
        let (vetted, reports) = vet_suite(&suite, &mut refs)?;
        suite = vetted;
        Some((reports, handles.iter().map(|h| h.model_id().to_string()).collect::<Vec<_>>()))
    };
    if a.metrics_only {
        suite.tests.clear();
    }

    let mut handle = ModelHandle::open(&a.model, &options)?;
    manifest.model_id = Some(handle.model_id().to_string());
    let staged = StagedDir::new(&a.out)?;
    let cases_path = staged.path("cases.jsonl");
    let file = fs::File::create(&cases_path).map_err(|e| DeckError::io(&cases_path, e))?;
    let mut cases_out = BufWriter::new(file);
    let run_options = RunOptions {
        split: a.split.selector(),
        batch_size: a.batch_size,
        theta: a.theta,
    };
    let mut sink = |r: &TestCaseResult| -> deck_core::Result<()> {
        let line = serde_json::to_string(r).expect("case results serialize");
        writeln!(cases_out, "{line}").map_err(|e| deck_core::Error::Backend(format!("writing the case log: {e}")))
    };
    let result = run_suite(&suite, &corpus, &mut handle, &run_options, &mut sink);
    let flushed = cases_out.flush();
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            let partial = staged.abandon();
            return Err(DeckError::Invalid(format!(
                "{e} (partial case log kept in {})",
                partial.display()
            )));
        }
    };
    flushed.map_err(|e| DeckError::io(&cases_path, e))?;

    let mut report = output.report;
    report.metadata.seed = Some(a.seed);
    report.metadata.timestamp = a.timestamp.clone();
    write_text(&staged.path("report.json"), &report_to_json(&report))?;
    write_text(&staged.path("report.md"), &render_markdown(&report))?;

    let mut preds = String::new();
    let samples = corpus.select(run_options.split);
    for (s, p) in samples.zip(&output.originals) {
        let line = PredictionLine {
            sample_id: &s.id,
            label: s.label,
            p_depressed: p.p_depressed,
            hard_label: p.hard_label,
        };
        preds.push_str(&serde_json::to_string(&line).expect("predictions serialize"));
        preds.push('\n');
    }
    write_text(&staged.path("predictions.jsonl"), &preds)?;

    if let Some((reports, models)) = &vetting {
        write_json(
            &staged.path("vetting.json"),
            &serde_json::json!({ "models": models, "tests": reports }),
        )?;
        write_text(&staged.path("suite.json"), &suite_to_json(&suite))?;
    }
    manifest.results = Some(serde_json::json!({
        "n_cases": output.cases.len(),
        "backend_calls": handle.backend_calls(),
        "backend_items": handle.backend_items(),
    }));
    manifest.write(&staged.path("manifest.json"))?;
    staged.commit()?;

    let evaluated: usize = report.rows.iter().map(|r| r.n_evaluated).sum();
    let failed: usize = report.rows.iter().map(|r| r.n_failed).sum();
    println!(
        "{}: {} tests, {evaluated} cases evaluated, {failed} failed; wrote {}",
        report.metadata.model_id,
        report.rows.len(),
        a.out.display()
    );
    Ok(())
}

/// A run directory stands for the named file inside it.
fn resolve_in_dir(path: &Path, file: &str) -> PathBuf {
    if path.is_dir() {
        path.join(file)
    } else {
        path.to_path_buf()
    }
}

fn report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .runs
        .iter()
        .map(|p| read_report(&resolve_in_dir(p, "report.json")))
        .collect::<Result<Vec<_>>>()?;
    let md = if reports.len() == 1 {
        render_markdown(&reports[0])
    } else {
        render_combined(&reports)
    };
    match &a.out {
        Some(out) => {
            ensure_parent(out)?;
            write_text(out, &md)
        }
        None => {
            print!("{md}");
            Ok(())
        }
    }
}

fn shift_markdown(m: &deck_core::shift::ShiftMatrix) -> String {
    let mut out = String::from("| |");
    for n in &m.names {
        out.push_str(&format!(" {n} |"));
    }
    out.push_str("\n|---|");
    for _ in &m.names {
        out.push_str("---|");
    }
    out.push('\n');
    for (i, n) in m.names.iter().enumerate() {
        out.push_str(&format!("| {n} |"));
        for d in &m.distances[i] {
            out.push_str(&format!(" {d:.4} |"));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "\nSliced 1-Wasserstein, {} projections, seed {}. Absolute values depend on the estimator; compare orderings only.\n",
        m.n_projections, m.seed
    ));
    out
}

fn shift(a: &ShiftArgs) -> Result<()> {
    let sets = a
        .embeddings
        .iter()
        .map(|p| load_embeddings(p))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = sets.iter().map(|s| s.name()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(DeckError::Invalid(format!(
            "two embedding files share the corpus name {:?}",
            w[0]
        )));
    }
    let matrix = shift_matrix(&sets, a.projections, a.seed)?;
    // one joint projection so all corpora share the same axes
    let joint: Vec<Vec<f64>> = sets.iter().flat_map(|s| s.vectors().iter().cloned()).collect();
    let points = export_projection(&EmbeddingSet::new("joint", joint)?)?;
    let mut projections = Vec::with_capacity(sets.len());
    let mut offset = 0;
    for s in &sets {
        projections.push((s.name().to_string(), points[offset..offset + s.len()].to_vec()));
        offset += s.len();
    }

    let staged = StagedDir::new(&a.out)?;
    write_json(&staged.path("shift.json"), &matrix)?;
    write_text(&staged.path("shift.md"), &shift_markdown(&matrix))?;
    write_projection_csv(&staged.path("projection.csv"), &projections)?;
    let mut manifest = Manifest::new("shift", config_json(a));
    for p in &a.embeddings {
        manifest.add_input(&path_str(p))?;
    }
    manifest.seed = Some(a.seed);
    manifest.write(&staged.path("manifest.json"))?;
    staged.commit()?;
    print!("{}", shift_markdown(&matrix));
    Ok(())
}

fn augment(a: &AugmentArgs) -> Result<()> {
    let suite = load_suite(&a.suite)?;
    let selected = match (&a.select, &a.report) {
        (Some(ids), _) => ids.clone(),
        (None, Some(path)) => select_worst_dir_tests(&read_report(&resolve_in_dir(path, "report.json"))?)?,
        (None, None) => unreachable!("clap requires --report or --select"),
    };
    if selected.is_empty() {
        return Err(DeckError::Invalid(
            "no DIR test is below the mean accuracy; nothing to augment with".into(),
        ));
    }
    let policy = match a.policy {
        PolicyArg::LabelConsistent => AssignmentPolicy::LabelConsistent,
        PolicyArg::Uniform => AssignmentPolicy::Uniform,
    };
    let plan = AugmentationPlan::new(&suite, &selected, policy, a.seed)?;
    let corpus = load_corpus(&a.corpus, CorpusFormat::from_path(&a.corpus))?;
    let augmented = build_augmented_corpus(&corpus, &plan)?;
    if a.out.exists() && fs::canonicalize(&a.out).ok() == fs::canonicalize(&a.corpus).ok() {
        return Err(DeckError::Invalid("--out must not overwrite the input corpus".into()));
    }
    ensure_parent(&a.out)?;
    write_corpus_jsonl(&augmented, &a.out)?;
    write_json(&a.out.with_file_name("plan.json"), &plan)?;
    let mut manifest = Manifest::new("augment", config_json(a));
    manifest.add_input(&path_str(&a.corpus))?;
    if let Some(r) = &a.report {
        manifest.add_input(&path_str(&resolve_in_dir(r, "report.json")))?;
    }
    manifest.add_input(&a.suite)?;
    manifest.seed = Some(a.seed);
    manifest.results = Some(serde_json::json!({
        "selected_test_ids": plan.selected_test_ids,
        "provenance": augmented.provenance,
    }));
    manifest.write(&sibling(&a.out, ".manifest.json"))?;
    println!(
        "augmented {} with {} ({} pool sentences); wrote {}",
        corpus.name(),
        plan.selected_test_ids.join(","),
        plan.pool.len(),
        a.out.display()
    );
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| DeckError::parse(path, i as u64 + 1, e.to_string())))
        .collect()
}

fn compare(a: &CompareArgs) -> Result<()> {
    let json = match a.kind {
        CompareKind::Ood => {
            let before: Vec<EvalRecord> = read_jsonl(&resolve_in_dir(&a.before, "predictions.jsonl"))?;
            let after: Vec<EvalRecord> = read_jsonl(&resolve_in_dir(&a.after, "predictions.jsonl"))?;
            let c = compare_ood(&before, &after)?;
            println!(
                "F1 {:.2}% -> {:.2}%{} ({:+.2} pp) over {} samples; McNemar p = {:.4} ({}, discordant {} vs {})",
                c.before.f1 * 100.0,
                c.after.f1 * 100.0,
                c.stars,
                c.f1_delta_pp,
                c.n,
                c.mcnemar.p_value,
                c.mcnemar.method,
                c.only_before_correct,
                c.only_after_correct
            );
            serde_json::to_value(&c)
        }
        CompareKind::Cases => {
            let before: Vec<TestCaseResult> = read_jsonl(&resolve_in_dir(&a.before, "cases.jsonl"))?;
            let after: Vec<TestCaseResult> = read_jsonl(&resolve_in_dir(&a.after, "cases.jsonl"))?;
            let c = compare_case_logs(&before, &after)?;
            println!(
                "pass rate {:.2}% -> {:.2}%{} over {} shared cases; McNemar p = {:.4} ({}, discordant {} vs {})",
                c.accuracy_a * 100.0,
                c.accuracy_b * 100.0,
                c.stars,
                c.n_common,
                c.mcnemar.p_value,
                c.mcnemar.method,
                c.only_a_pass,
                c.only_b_pass
            );
            serde_json::to_value(&c)
        }
    }
    .expect("comparisons serialize");
    if let Some(out) = &a.out {
        ensure_parent(out)?;
        write_json(out, &json)?;
    }
    Ok(())
}
