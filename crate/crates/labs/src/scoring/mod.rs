//! Conditional scoring models: the trait the decoders query, an exact table
//! model for oracle testing, and a tag-conditioned interpolated n-gram.

mod ngram;
mod table;

pub use ngram::{train_ngram, NGramConfig, NGramModel};
pub use table::{TableModel, TableModelBuilder};

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{SourceUtterance, TokenId, Vocabulary};

/// Sentinel standing in for log 0. Stored and compared exactly; anything
/// scored `LOG_ZERO` is never expanded, so NaNs cannot enter score sums.
pub const LOG_ZERO: f64 = -1.0e9;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("prefix must start with a length-tag token (got {0:?})")]
    PrefixWithoutTag(Option<TokenId>),
    #[error("prefix contains EOS or a tag token after position 0")]
    MalformedPrefix,
    #[error("distribution for context {context:?} sums to {sum} (want 1 within 1e-9)")]
    NotNormalized { context: String, sum: f64 },
    #[error("distribution for context {context:?} assigns {p} to tag token {token:?}")]
    MassOnTag {
        context: String,
        token: String,
        p: f64,
    },
    #[error("negative probability {p} for token {token:?} in context {context:?}")]
    NegativeProbability {
        context: String,
        token: String,
        p: f64,
    },
    #[error("unknown token {0:?} in model file")]
    UnknownToken(String),
    #[error("interpolation weights {0:?} must be non-negative and sum to 1")]
    BadWeights(Vec<f64>),
    #[error("n-gram order must be >= 2 (got {0})")]
    BadOrder(usize),
    #[error("uniform floor {0} must lie in [0, 1)")]
    BadFloor(f64),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Conditional next-token distribution over the whole vocabulary.
///
/// Implementations are pure and immutable after construction: identical
/// queries return bit-identical vectors, and a model may be shared across
/// any number of concurrent decoders.
pub trait ScoringModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Natural-log probability for every vocabulary token given the source
    /// and a hypothesis prefix (leading tag token included).
    ///
    /// Tag tokens always come back as [`LOG_ZERO`]; the returned values
    /// exponentiate and sum to 1 within 1e-9.
    fn next_log_probs(
        &self,
        src: &SourceUtterance,
        prefix: &[TokenId],
    ) -> Result<Vec<f64>, ScoringError>;
}

/// Checks the prefix contract shared by all models: a leading tag token,
/// and no EOS or tag tokens afterwards.
pub(crate) fn check_prefix(vocab: &Vocabulary, prefix: &[TokenId]) -> Result<(), ScoringError> {
    match prefix.first() {
        Some(&t) if vocab.is_tag_token(t) => {}
        other => return Err(ScoringError::PrefixWithoutTag(other.copied())),
    }
    for &t in &prefix[1..] {
        if t == vocab.eos() || vocab.is_tag_token(t) {
            return Err(ScoringError::MalformedPrefix);
        }
    }
    Ok(())
}

/// Wrapper that counts queries to an inner model; used by the latency bench
/// and the single-pass cost checks.
pub struct CountingModel<'a> {
    inner: &'a dyn ScoringModel,
    queries: AtomicU64,
}

impl<'a> CountingModel<'a> {
    pub fn new(inner: &'a dyn ScoringModel) -> Self {
        Self {
            inner,
            queries: AtomicU64::new(0),
        }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }
}

impl ScoringModel for CountingModel<'_> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn next_log_probs(
        &self,
        src: &SourceUtterance,
        prefix: &[TokenId],
    ) -> Result<Vec<f64>, ScoringError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.next_log_probs(src, prefix)
    }
}

/// On-disk model envelope: a single self-describing JSON document.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ModelKindDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ModelKindDoc {
    Table(table::TableDoc),
    Ngram(ngram::NgramDoc),
}

const MODEL_FORMAT: &str = "labs-model";
const MODEL_VERSION: u32 = 1;

/// A model loaded from disk; dispatches to the concrete implementation.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Table(TableModel),
    Ngram(NGramModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Table(_) => "table",
            SavedModel::Ngram(_) => "ngram",
        }
    }
}

impl ScoringModel for SavedModel {
    fn vocab(&self) -> &Vocabulary {
        match self {
            SavedModel::Table(m) => m.vocab(),
            SavedModel::Ngram(m) => m.vocab(),
        }
    }

    fn next_log_probs(
        &self,
        src: &SourceUtterance,
        prefix: &[TokenId],
    ) -> Result<Vec<f64>, ScoringError> {
        match self {
            SavedModel::Table(m) => m.next_log_probs(src, prefix),
            SavedModel::Ngram(m) => m.next_log_probs(src, prefix),
        }
    }
}

/// Serialize a model into the versioned JSON envelope.
pub fn model_to_json(model: &SavedModel) -> String {
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: match model {
            SavedModel::Table(m) => ModelKindDoc::Table(m.to_doc()),
            SavedModel::Ngram(m) => ModelKindDoc::Ngram(m.to_doc()),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model serialization cannot fail");
    s.push('\n');
    s
}

/// Parse and validate a model from the JSON envelope.
pub fn model_from_json(json: &str) -> Result<SavedModel, ScoringError> {
    let doc: ModelDoc =
        serde_json::from_str(json).map_err(|e| ScoringError::Format(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(ScoringError::Format(format!(
            "expected format {MODEL_FORMAT:?}, got {:?}",
            doc.format
        )));
    }
    if doc.version != MODEL_VERSION {
        return Err(ScoringError::Format(format!(
            "unsupported model version {} (this build reads version {MODEL_VERSION})",
            doc.version
        )));
    }
    match doc.model {
        ModelKindDoc::Table(d) => Ok(SavedModel::Table(TableModel::from_doc(d)?)),
        ModelKindDoc::Ngram(d) => Ok(SavedModel::Ngram(NGramModel::from_doc(d)?)),
    }
}

pub fn save_model(model: &SavedModel, path: &std::path::Path) -> Result<(), ScoringError> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: &std::path::Path) -> Result<SavedModel, ScoringError> {
    let s = std::fs::read_to_string(path)?;
    model_from_json(&s)
}

/// Shared wire form for a vocabulary embedded in a model file.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct VocabDoc {
    tokens: Vec<String>,
    eos: String,
    short: String,
    normal: String,
    long: String,
}

impl VocabDoc {
    pub(crate) fn from_vocab(v: &Vocabulary) -> Self {
        let s = v.specials();
        Self {
            tokens: v.tokens().to_vec(),
            eos: s.eos.clone(),
            short: s.short.clone(),
            normal: s.normal.clone(),
            long: s.long.clone(),
        }
    }

    pub(crate) fn into_vocab(self) -> Result<Vocabulary, ScoringError> {
        Ok(Vocabulary::new(
            self.tokens,
            crate::core::SpecialTokens {
                eos: self.eos,
                short: self.short,
                normal: self.normal,
                long: self.long,
            },
        )?)
    }
}
