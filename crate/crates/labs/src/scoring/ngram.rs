//! Tag-conditioned interpolated n-gram model, the desk-scale stand-in for a
//! neural translation model. The tag token sits in the first context
//! position, so length behavior conditioned on the tag is learnable.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::core::{SourceUtterance, TokenId, Vocabulary};
use crate::lengthtag::TaggedExample;

use super::{check_prefix, ScoringError, ScoringModel, LOG_ZERO};

/// Training configuration for [`train_ngram`].
#[derive(Debug, Clone)]
pub struct NGramConfig {
    /// Model order n >= 2.
    pub order: usize,
    /// Interpolation weights, highest order first; non-negative, sum 1.
    pub weights: Vec<f64>,
    /// Mass mixed onto the uniform distribution over non-tag tokens.
    pub uniform_floor: f64,
    /// Sorted source-length thresholds; empty means no source conditioning.
    /// A source of length L falls into bucket `#edges <= L`.
    pub bucket_edges: Vec<usize>,
}

impl NGramConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            weights: default_weights(order),
            uniform_floor: 1e-3,
            bucket_edges: Vec::new(),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.uniform_floor = floor;
        self
    }

    pub fn with_bucket_edges(mut self, edges: Vec<usize>) -> Self {
        self.bucket_edges = edges;
        self
    }
}

/// Default interpolation weights: 0.7/0.2/0.1 at order 3, otherwise a
/// normalized halving series (highest order first).
pub fn default_weights(order: usize) -> Vec<f64> {
    if order == 3 {
        return vec![0.7, 0.2, 0.1];
    }
    let raw: Vec<f64> = (0..order).map(|i| 0.5f64.powi(i as i32)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Interpolated n-gram scoring model over whole target tokens.
///
/// `P(v | ctx) = (1 - floor) * sum_i w'_i * count(ctx_i, v) / count(ctx_i)
/// + floor / |non-tag tokens|`, where the sum runs over orders whose
/// context has been observed and `w'` renormalizes their weights. When no
/// order has been observed the interpolated part falls back to uniform.
#[derive(Debug, Clone)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    weights: Vec<f64>,
    uniform_floor: f64,
    bucket_edges: Vec<usize>,
    /// Keyed by (source bucket, context tokens); context length = order - 1.
    counts: HashMap<(usize, Vec<TokenId>), ContextCounts>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bucket_of(&self, src_len: usize) -> usize {
        self.bucket_edges.partition_point(|&e| e <= src_len)
    }

    fn allowed_count(&self) -> usize {
        self.vocab.len() - 3
    }

    pub(crate) fn to_doc(&self) -> NgramDoc {
        let mut counts: Vec<CountDoc> = self
            .counts
            .iter()
            .map(|((bucket, ctx), c)| CountDoc {
                bucket: *bucket,
                context: ctx.iter().map(|&id| self.vocab.token(id).to_string()).collect(),
                next: c
                    .next
                    .iter()
                    .map(|(&id, &n)| (self.vocab.token(id).to_string(), n))
                    .collect(),
            })
            .collect();
        counts.sort_by(|a, b| {
            (a.bucket, a.context.len(), &a.context).cmp(&(b.bucket, b.context.len(), &b.context))
        });
        NgramDoc {
            order: self.order,
            weights: self.weights.clone(),
            uniform_floor: self.uniform_floor,
            bucket_edges: self.bucket_edges.clone(),
            vocab: super::VocabDoc::from_vocab(&self.vocab),
            counts,
        }
    }

    pub(crate) fn from_doc(doc: NgramDoc) -> Result<Self, ScoringError> {
        let vocab = doc.vocab.into_vocab()?;
        validate_params(doc.order, &doc.weights, doc.uniform_floor, &doc.bucket_edges)?;
        let mut counts: HashMap<(usize, Vec<TokenId>), ContextCounts> = HashMap::new();
        for c in doc.counts {
            let ctx: Vec<TokenId> = c
                .context
                .iter()
                .map(|t| {
                    vocab
                        .id_of(t)
                        .ok_or_else(|| ScoringError::UnknownToken(t.clone()))
                })
                .collect::<Result<_, _>>()?;
            if ctx.len() >= doc.order {
                return Err(ScoringError::Format(format!(
                    "context {:?} longer than order {} allows",
                    c.context, doc.order
                )));
            }
            let entry = counts.entry((c.bucket, ctx)).or_default();
            for (t, n) in c.next {
                let id = vocab
                    .id_of(&t)
                    .ok_or_else(|| ScoringError::UnknownToken(t.clone()))?;
                *entry.next.entry(id).or_insert(0) += n;
                entry.total += n;
            }
        }
        Ok(Self {
            vocab,
            order: doc.order,
            weights: doc.weights,
            uniform_floor: doc.uniform_floor,
            bucket_edges: doc.bucket_edges,
            counts,
        })
    }
}

fn validate_params(
    order: usize,
    weights: &[f64],
    floor: f64,
    bucket_edges: &[usize],
) -> Result<(), ScoringError> {
    if order < 2 {
        return Err(ScoringError::BadOrder(order));
    }
    if weights.len() != order
        || weights.iter().any(|&w| w < 0.0)
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(ScoringError::BadWeights(weights.to_vec()));
    }
    if !(0.0..1.0).contains(&floor) {
        return Err(ScoringError::BadFloor(floor));
    }
    if bucket_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ScoringError::Format(
            "bucket edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Train an n-gram model on an annotated corpus. The vocabulary is the
/// default specials followed by corpus target tokens in first-seen order;
/// maximum-likelihood counts match the corpus exactly.
pub fn train_ngram(
    corpus: &[TaggedExample],
    config: &NGramConfig,
) -> Result<NGramModel, ScoringError> {
    if corpus.is_empty() {
        return Err(ScoringError::EmptyCorpus);
    }
    validate_params(
        config.order,
        &config.weights,
        config.uniform_floor,
        &config.bucket_edges,
    )?;

    let mut seen = std::collections::HashSet::new();
    let mut regular: Vec<&str> = Vec::new();
    for ex in corpus {
        for tok in ex.target.split_whitespace() {
            if seen.insert(tok) {
                regular.push(tok);
            }
        }
    }
    let vocab = Vocabulary::with_default_specials(regular.iter().map(|s| s.to_string()))?;

    let mut model = NGramModel {
        vocab,
        order: config.order,
        weights: config.weights.clone(),
        uniform_floor: config.uniform_floor,
        bucket_edges: config.bucket_edges.clone(),
        counts: HashMap::new(),
    };

    for ex in corpus {
        let bucket = model.bucket_of(ex.src_units);
        let mut seq: Vec<TokenId> = vec![model.vocab.tag_token_id(ex.tag)];
        for tok in ex.target.split_whitespace() {
            seq.push(model.vocab.id_of(tok).expect("token was added above"));
        }
        seq.push(model.vocab.eos());
        for pos in 1..seq.len() {
            let next = seq[pos];
            for ctx_len in 0..model.order {
                if ctx_len > pos {
                    break;
                }
                let ctx = seq[pos - ctx_len..pos].to_vec();
                let entry = model.counts.entry((bucket, ctx)).or_default();
                entry.total += 1;
                *entry.next.entry(next).or_insert(0) += 1;
            }
        }
    }
    Ok(model)
}

impl ScoringModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_log_probs(
        &self,
        src: &SourceUtterance,
        prefix: &[TokenId],
    ) -> Result<Vec<f64>, ScoringError> {
        check_prefix(&self.vocab, prefix)?;
        let bucket = self.bucket_of(src.phonemes.len());

        // Renormalize weights over the orders whose context is observed.
        let mut available: Vec<(f64, &ContextCounts)> = Vec::with_capacity(self.order);
        let mut weight_sum = 0.0;
        for ctx_len in 0..self.order {
            if ctx_len > prefix.len() {
                break;
            }
            let w = self.weights[self.order - 1 - ctx_len];
            if w == 0.0 {
                continue;
            }
            let ctx = &prefix[prefix.len() - ctx_len..];
            if let Some(c) = self.counts.get(&(bucket, ctx.to_vec())) {
                if c.total > 0 {
                    available.push((w, c));
                    weight_sum += w;
                }
            }
        }

        let n_allowed = self.allowed_count() as f64;
        let uniform = 1.0 / n_allowed;
        let mut probs = vec![0.0f64; self.vocab.len()];
        if weight_sum > 0.0 {
            for (w, c) in &available {
                let scale = w / weight_sum / c.total as f64;
                for (&tok, &n) in &c.next {
                    probs[tok as usize] += scale * n as f64;
                }
            }
        } else {
            for (id, p) in probs.iter_mut().enumerate() {
                if !self.vocab.is_tag_token(id as TokenId) {
                    *p = uniform;
                }
            }
        }

        let floor = self.uniform_floor;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(id, &p)| {
                if self.vocab.is_tag_token(id as TokenId) {
                    LOG_ZERO
                } else {
                    let mixed = (1.0 - floor) * p + floor * uniform;
                    if mixed > 0.0 {
                        mixed.ln()
                    } else {
                        LOG_ZERO
                    }
                }
            })
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NgramDoc {
    order: usize,
    weights: Vec<f64>,
    uniform_floor: f64,
    bucket_edges: Vec<usize>,
    vocab: super::VocabDoc,
    counts: Vec<CountDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountDoc {
    bucket: usize,
    context: Vec<String>,
    next: BTreeMap<String, u64>,
}
