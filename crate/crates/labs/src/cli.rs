//! Command-line pipeline wiring: annotate -> train-ngram -> decode ->
//! select -> evaluate -> bench. The `labs` binary is a thin wrapper around
//! [`run`].

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::core::{LengthTag, SourceUtterance};
use crate::decode::{labs_decode, standard_beam_decode, BeamConfig, DecodeRecord};
use crate::duration::{DurationProfile, Selection, SelectionCandidate, SelectionPolicy};
use crate::lengthtag::{annotate_corpus, G2PLexicon, TaggedExample, UnitKind};
use crate::metrics::{corpus_bleu, latency_bench, length_ratio, src_metric, EvalReport, EvalRow};
use crate::scoring::{load_model, model_to_json, train_ngram, NGramConfig, SavedModel, ScoringModel};

/// Process exit codes: 0 success, 2 config error, 3 partial failure,
/// 4 total failure.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_TOTAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "labs",
    about = "Length-aware beam search decoding and dubbing-alignment evaluation",
    version
)]
pub struct Cli {
    /// Worker threads for corpus-level parallelism (0 = rayon default).
    /// Output order always matches input order.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign length tags to a TSV corpus of source/target pairs.
    Annotate(AnnotateArgs),
    /// Train the tag-conditioned n-gram scoring model.
    TrainNgram(TrainArgs),
    /// Decode utterances (single multi-length pass or a single-tag baseline).
    Decode(DecodeArgs),
    /// Pick the duration-matched hypothesis per utterance.
    Select(SelectArgs),
    /// Score a selection file: SRC, length ratio, BLEU.
    Evaluate(EvaluateArgs),
    /// Compare one multi-length pass against single-tag passes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Phoneme,
    Character,
}

impl From<UnitArg> for UnitKind {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Phoneme => UnitKind::Phoneme,
            UnitArg::Character => UnitKind::Character,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Labs,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagArg {
    Short,
    Normal,
    Long,
}

impl From<TagArg> for LengthTag {
    fn from(t: TagArg) -> Self {
        match t {
            TagArg::Short => LengthTag::Short,
            TagArg::Normal => LengthTag::Normal,
            TagArg::Long => LengthTag::Long,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// TSV input: one `source<TAB>target` pair per line.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Length unit for the ratio.
    #[arg(long, value_enum, default_value_t = UnitArg::Phoneme)]
    pub unit: UnitArg,
    /// Tag threshold on the length ratio.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Source-side lexicon TSV (phoneme unit only).
    #[arg(long)]
    pub src_lexicon: Option<PathBuf>,
    /// Source-side letter fallback rules TSV.
    #[arg(long)]
    pub src_rules: Option<PathBuf>,
    /// Target-side lexicon TSV (phoneme unit only).
    #[arg(long)]
    pub tgt_lexicon: Option<PathBuf>,
    /// Target-side letter fallback rules TSV.
    #[arg(long)]
    pub tgt_rules: Option<PathBuf>,
    /// Annotated corpus output (JSONL, one example per line).
    #[arg(long)]
    pub out: PathBuf,
    /// Tag-distribution report output (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Annotated corpus (JSONL of tagged examples).
    #[arg(long)]
    pub corpus: PathBuf,
    /// n-gram order.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Comma-separated interpolation weights, highest order first
    /// (default: 0.7,0.2,0.1 at order 3, halving otherwise).
    #[arg(long)]
    pub weights: Option<String>,
    /// Uniform-floor mass.
    #[arg(long, default_value_t = 1e-3)]
    pub floor: f64,
    /// Comma-separated source-length bucket edges (strictly increasing).
    #[arg(long)]
    pub bucket_edges: Option<String>,
    /// Model output (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the vocabulary in the line-oriented format.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Scoring model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Utterances (JSONL: id, phonemes, ref_duration_s, reference?).
    #[arg(long)]
    pub input: PathBuf,
    /// `labs` decodes all tags in one pass; `standard` runs one tag.
    #[arg(long, value_enum, default_value_t = ModeArg::Labs)]
    pub mode: ModeArg,
    /// Tag for `--mode standard`.
    #[arg(long, value_enum)]
    pub tag: Option<TagArg>,
    /// Beam size N.
    #[arg(long, default_value_t = 9)]
    pub beam: usize,
    /// Guaranteed incomplete slots per tag while pruning.
    #[arg(long, default_value_t = 3)]
    pub per_tag: usize,
    /// Maximum tokens per hypothesis (tag excluded, EOS included).
    #[arg(long, default_value_t = 24)]
    pub max_len: usize,
    /// Disable early stopping.
    #[arg(long, default_value_t = false)]
    pub no_early_stop: bool,
    /// Final-ranking length penalty (0 disables it).
    #[arg(long, default_value_t = 0.0)]
    pub length_penalty: f64,
    /// Decode output (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Decode output (JSONL).
    #[arg(long)]
    pub decoded: PathBuf,
    /// The utterances that were decoded (for reference durations).
    #[arg(long)]
    pub input: PathBuf,
    /// Duration profile (JSON).
    #[arg(long)]
    pub profile: PathBuf,
    /// Target-side lexicon TSV.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Target-side letter fallback rules TSV.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Compliance threshold on |ratio - 1|.
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Score margin for non-normal candidates (0 disables the gate).
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Selection output (JSONL).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Selection output (JSONL).
    #[arg(long)]
    pub selected: PathBuf,
    /// The utterances behind the selection (for reference translations).
    #[arg(long)]
    pub input: PathBuf,
    /// SRC compliance threshold.
    #[arg(long, default_value_t = 0.2)]
    pub src_threshold: f64,
    /// Report output (JSON). The table also prints to stdout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scoring model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Utterances (JSONL).
    #[arg(long)]
    pub input: PathBuf,
    /// Beam size N for the multi-length pass.
    #[arg(long, default_value_t = 9)]
    pub beam: usize,
    /// Guaranteed incomplete slots per tag.
    #[arg(long, default_value_t = 3)]
    pub per_tag: usize,
    /// Maximum tokens per hypothesis.
    #[arg(long, default_value_t = 24)]
    pub max_len: usize,
    /// Timed repeats per configuration (one extra warm-up pass runs first).
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Bench a random subset of this many utterances.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Seed for the subset draw; echoed in the report.
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Bench report output (JSON). The table also prints to stdout.
    #[arg(long)]
    pub out: PathBuf,
}

/// Machine-readable failure record printed to stderr.
#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    kind: &'a str,
}

struct CliFailure {
    exit: i32,
    message: String,
}

impl CliFailure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn total(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_TOTAL,
            message: message.into(),
        }
    }
}

impl<E: std::error::Error> From<E> for CliFailure {
    fn from(e: E) -> Self {
        CliFailure::total(e.to_string())
    }
}

/// Parse argv and run the corresponding pipeline stage.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version by "erroring" with the text
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(exit) => exit,
        Err(failure) => {
            let kind = match failure.exit {
                EXIT_CONFIG => "config",
                EXIT_PARTIAL => "partial",
                _ => "total",
            };
            let record = ErrorRecord {
                error: &failure.message,
                kind,
            };
            eprintln!(
                "{}",
                serde_json::to_string(&record).unwrap_or_else(|_| failure.message.clone())
            );
            failure.exit
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliFailure> {
    if cli.jobs > 0 {
        // a per-run pool keeps --jobs scoped to this invocation
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| CliFailure::config(e.to_string()))?;
        pool.install(|| dispatch_command(cli.command))
    } else {
        dispatch_command(cli.command)
    }
}

fn dispatch_command(command: Command) -> Result<i32, CliFailure> {
    match command {
        Command::Annotate(args) => cmd_annotate(args),
        Command::TrainNgram(args) => cmd_train(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Select(args) => cmd_select(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

// ---------------------------------------------------------------------------
// file helpers

/// Write atomically: temp file in the destination directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}.{}", std::process::id(), n));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliFailure> {
    std::fs::read_to_string(path)
        .map_err(|e| CliFailure::config(format!("cannot read {}: {e}", path.display())))
}

fn jsonl_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serialization cannot fail"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliFailure> {
    let text = read_to_string(path)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| {
            CliFailure::config(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

fn load_lexicon(
    entries: Option<&PathBuf>,
    rules: Option<&PathBuf>,
) -> Result<Option<G2PLexicon>, CliFailure> {
    match entries {
        None => Ok(None),
        Some(path) => {
            let lex = G2PLexicon::load(path, rules.map(PathBuf::as_path))
                .map_err(|e| CliFailure::config(format!("{}: {e}", path.display())))?;
            Ok(Some(lex))
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliFailure>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|e| CliFailure::config(format!("bad {what} {part:?}: {e}")))
        })
        .collect()
}

fn read_utterances(path: &Path) -> Result<Vec<SourceUtterance>, CliFailure> {
    let utterances: Vec<SourceUtterance> = read_jsonl(path)?;
    for u in &utterances {
        u.validate()
            .map_err(|e| CliFailure::config(e.to_string()))?;
    }
    Ok(utterances)
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_annotate(args: AnnotateArgs) -> Result<i32, CliFailure> {
    let text = read_to_string(&args.pairs)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| {
            CliFailure::config(format!(
                "{}:{}: expected 'source<TAB>target'",
                args.pairs.display(),
                i + 1
            ))
        })?;
        pairs.push((src.to_string(), tgt.to_string()));
    }
    let src_lex = load_lexicon(args.src_lexicon.as_ref(), args.src_rules.as_ref())?;
    let tgt_lex = load_lexicon(args.tgt_lexicon.as_ref(), args.tgt_rules.as_ref())?;
    let outcome = annotate_corpus(
        &pairs,
        args.unit.into(),
        args.alpha,
        src_lex.as_ref(),
        tgt_lex.as_ref(),
    )
    .map_err(|e| CliFailure::config(e.to_string()))?;

    write_atomic(&args.out, &jsonl_string(&outcome.examples))?;
    if let Some(report_path) = &args.report {
        let mut json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        json.push('\n');
        write_atomic(report_path, &json)?;
    }
    print!("{}", outcome.report.render_text());
    for failure in &outcome.failures {
        eprintln!("pair {}: {}", failure.index, failure.reason);
    }
    if outcome.examples.is_empty() {
        Err(CliFailure::total("every pair failed annotation"))
    } else if !outcome.failures.is_empty() {
        Ok(EXIT_PARTIAL)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_train(args: TrainArgs) -> Result<i32, CliFailure> {
    let corpus: Vec<TaggedExample> = read_jsonl(&args.corpus)?;
    let mut config = NGramConfig::new(args.order);
    if let Some(w) = &args.weights {
        config = config.with_weights(parse_list(w, "weight")?);
    }
    config = config.with_floor(args.floor);
    if let Some(edges) = &args.bucket_edges {
        config = config.with_bucket_edges(parse_list(edges, "bucket edge")?);
    }
    let model = train_ngram(&corpus, &config).map_err(|e| CliFailure::config(e.to_string()))?;
    if let Some(vocab_out) = &args.vocab_out {
        write_atomic(vocab_out, &model.vocab().to_file_string())?;
    }
    let saved = SavedModel::Ngram(model);
    write_atomic(&args.out, &model_to_json(&saved))?;
    println!(
        "trained order-{} model on {} examples -> {}",
        args.order,
        corpus.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_decode(args: DecodeArgs) -> Result<i32, CliFailure> {
    let model = load_model(&args.model).map_err(|e| CliFailure::config(e.to_string()))?;
    let utterances = read_utterances(&args.input)?;
    if utterances.is_empty() {
        return Err(CliFailure::config("no utterances to decode"));
    }
    enum Plan {
        Labs(BeamConfig),
        Standard(LengthTag),
    }
    let plan = match args.mode {
        ModeArg::Labs => {
            let cfg = BeamConfig::new(args.beam, args.per_tag, args.max_len, LengthTag::ALL.to_vec())
                .map_err(|e| CliFailure::config(e.to_string()))?
                .with_early_stop(!args.no_early_stop)
                .with_length_penalty(args.length_penalty);
            Plan::Labs(cfg)
        }
        ModeArg::Standard => {
            let tag = args
                .tag
                .ok_or_else(|| CliFailure::config("--mode standard requires --tag"))?;
            Plan::Standard(tag.into())
        }
    };

    let results: Vec<Result<DecodeRecord, String>> = utterances
        .par_iter()
        .map(|src| {
            let result = match &plan {
                Plan::Labs(cfg) => labs_decode(&model, src, cfg),
                Plan::Standard(tag) => {
                    standard_beam_decode(&model, src, *tag, args.beam, args.max_len)
                }
            };
            result
                .map(|r| DecodeRecord::from_result(&src.id, &r, model.vocab()))
                .map_err(|e| format!("{}: {e}", src.id))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(e),
        }
    }
    write_atomic(&args.out, &jsonl_string(&records))?;
    for f in &failures {
        eprintln!("{f}");
    }
    println!(
        "decoded {} utterances ({} failed) -> {}",
        records.len(),
        failures.len(),
        args.out.display()
    );
    if records.is_empty() {
        Err(CliFailure::total("every utterance failed to decode"))
    } else if !failures.is_empty() {
        Ok(EXIT_PARTIAL)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_select(args: SelectArgs) -> Result<i32, CliFailure> {
    let records: Vec<DecodeRecord> = read_jsonl(&args.decoded)?;
    let utterances = read_utterances(&args.input)?;
    let by_id: std::collections::HashMap<&str, &SourceUtterance> =
        utterances.iter().map(|u| (u.id.as_str(), u)).collect();
    let profile =
        DurationProfile::load(&args.profile).map_err(|e| CliFailure::config(e.to_string()))?;
    let lexicon = G2PLexicon::load(&args.lexicon, args.rules.as_deref())
        .map_err(|e| CliFailure::config(e.to_string()))?;
    let policy = SelectionPolicy {
        epsilon: args.epsilon,
        delta: args.delta,
        ..SelectionPolicy::default()
    };
    policy
        .validate()
        .map_err(|e| CliFailure::config(e.to_string()))?;

    let results: Vec<Result<Selection, String>> = records
        .par_iter()
        .map(|record| {
            let src = by_id
                .get(record.id.as_str())
                .ok_or_else(|| format!("{}: not in {}", record.id, args.input.display()))?;
            select_from_record(record, src, &profile, &policy, &lexicon)
                .map_err(|e| format!("{}: {e}", record.id))
        })
        .collect();

    let mut selections = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => selections.push(s),
            Err(e) => failures.push(e),
        }
    }
    write_atomic(&args.out, &jsonl_string(&selections))?;
    for f in &failures {
        eprintln!("{f}");
    }
    println!(
        "selected {} utterances ({} failed) -> {}",
        selections.len(),
        failures.len(),
        args.out.display()
    );
    if selections.is_empty() {
        Err(CliFailure::total("every utterance failed selection"))
    } else if !failures.is_empty() {
        Ok(EXIT_PARTIAL)
    } else {
        Ok(EXIT_OK)
    }
}

/// Selection over a decode record read back from JSONL.
fn select_from_record(
    record: &DecodeRecord,
    src: &SourceUtterance,
    profile: &DurationProfile,
    policy: &SelectionPolicy,
    lexicon: &G2PLexicon,
) -> Result<Selection, String> {
    let candidates: Vec<SelectionCandidate> = record
        .tags
        .iter()
        .flat_map(|tag_rec| {
            tag_rec.hypotheses.iter().map(|h| SelectionCandidate {
                tag: tag_rec.tag,
                text: h.text.clone(),
                score: h.score,
                tokens: h.tokens.clone(),
            })
        })
        .collect();
    crate::duration::select_from_candidates(
        &record.id,
        &candidates,
        src.ref_duration_s,
        profile,
        policy,
        lexicon,
    )
    .map_err(|e| e.to_string())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32, CliFailure> {
    let selections: Vec<Selection> = read_jsonl(&args.selected)?;
    if selections.is_empty() {
        return Err(CliFailure::config("selection file is empty"));
    }
    let utterances = read_utterances(&args.input)?;
    let by_id: std::collections::HashMap<&str, &SourceUtterance> =
        utterances.iter().map(|u| (u.id.as_str(), u)).collect();

    let mut rows = Vec::new();
    let mut hyp_texts = Vec::new();
    let mut ref_texts = Vec::new();
    let mut missing_references = 0usize;
    for sel in &selections {
        let reference = by_id.get(sel.id.as_str()).and_then(|u| u.reference.clone());
        let (hyp_tokens, ref_tokens) = match &reference {
            Some(r) => {
                let h = crate::metrics::bleu_tokenize(&sel.text);
                let rt = crate::metrics::bleu_tokenize(r);
                hyp_texts.push(sel.text.clone());
                ref_texts.push(r.clone());
                (h.len(), rt.len())
            }
            None => {
                missing_references += 1;
                (crate::metrics::bleu_tokenize(&sel.text).len(), 0)
            }
        };
        rows.push(EvalRow {
            id: sel.id.clone(),
            ratio: sel.ratio,
            compliant: (sel.ratio - 1.0).abs() <= args.src_threshold,
            hyp_tokens,
            ref_tokens,
        });
    }

    let duration_rows: Vec<(f64, f64)> = selections
        .iter()
        .map(|s| (s.ref_s, s.estimated_s))
        .collect();
    let src_percent = src_metric(&duration_rows, args.src_threshold)
        .map_err(|e| CliFailure::config(e.to_string()))?;
    let (lr, bleu) = if hyp_texts.is_empty() {
        (None, None)
    } else {
        let hyp_tok: Vec<Vec<String>> = hyp_texts.iter().map(|t| crate::metrics::bleu_tokenize(t)).collect();
        let ref_tok: Vec<Vec<String>> = ref_texts.iter().map(|t| crate::metrics::bleu_tokenize(t)).collect();
        (
            Some(length_ratio(&hyp_tok, &ref_tok).map_err(|e| CliFailure::total(e.to_string()))?),
            Some(corpus_bleu(&hyp_texts, &ref_texts).map_err(|e| CliFailure::total(e.to_string()))?),
        )
    };
    let report = EvalReport {
        epsilon: args.src_threshold,
        unit: "seconds".to_string(),
        utterances: selections.len(),
        src_percent,
        length_ratio: lr,
        bleu,
        missing_references,
        rows,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_atomic(&args.out, &json)?;
    print!("{}", report.render_text());
    Ok(EXIT_OK)
}

fn cmd_bench(args: BenchArgs) -> Result<i32, CliFailure> {
    let model = load_model(&args.model).map_err(|e| CliFailure::config(e.to_string()))?;
    let mut utterances = read_utterances(&args.input)?;
    if let Some(sample) = args.sample {
        if sample == 0 {
            return Err(CliFailure::config("--sample must be >= 1"));
        }
        if sample < utterances.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            utterances.shuffle(&mut rng);
            utterances.truncate(sample);
        }
    }
    let cfg = BeamConfig::new(args.beam, args.per_tag, args.max_len, LengthTag::ALL.to_vec())
        .map_err(|e| CliFailure::config(e.to_string()))?;
    let report = latency_bench(&model, &utterances, &cfg, args.repeats)
        .map_err(|e| CliFailure::config(e.to_string()))?;

    #[derive(Serialize)]
    struct BenchDoc<'a> {
        seed: u64,
        sampled: usize,
        #[serde(flatten)]
        report: &'a crate::metrics::BenchReport,
    }
    let doc = BenchDoc {
        seed: args.seed,
        sampled: utterances.len(),
        report: &report,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("report serializes");
    json.push('\n');
    write_atomic(&args.out, &json)?;
    print!("{}", report.render_text());
    Ok(EXIT_OK)
}
