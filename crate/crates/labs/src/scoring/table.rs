//! Exact table-backed scoring model, the oracle substrate for decoder tests.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::core::{LengthTag, SourceUtterance, TokenId, Vocabulary};

use super::{check_prefix, ScoringError, ScoringModel, LOG_ZERO};

type ContextKey = (LengthTag, Vec<TokenId>);

/// Scoring model backed by explicit next-token distributions.
///
/// A context is the hypothesis tag plus the last `order` prefix tokens;
/// contexts without a stored distribution fall back to the default one.
/// Distributions are validated at construction: non-negative, zero mass on
/// tag tokens, and summing to 1 within 1e-9.
#[derive(Debug, Clone)]
pub struct TableModel {
    vocab: Vocabulary,
    order: usize,
    contexts: HashMap<ContextKey, Vec<f64>>,
    default_dist: Vec<f64>,
}

impl TableModel {
    pub fn builder(vocab: Vocabulary, order: usize) -> TableModelBuilder {
        TableModelBuilder {
            vocab,
            order,
            contexts: Vec::new(),
            default_dist: None,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn context_of(&self, tag: LengthTag, prefix: &[TokenId]) -> ContextKey {
        let k = self.order.min(prefix.len());
        (tag, prefix[prefix.len() - k..].to_vec())
    }

    pub(crate) fn to_doc(&self) -> TableDoc {
        let dist_doc = |dist: &[f64]| -> BTreeMap<String, f64> {
            dist.iter()
                .enumerate()
                .filter(|&(_, &p)| p > 0.0)
                .map(|(id, &p)| (self.vocab.token(id as TokenId).to_string(), p))
                .collect()
        };
        let mut contexts: Vec<TableContextDoc> = self
            .contexts
            .iter()
            .map(|((tag, ctx), dist)| TableContextDoc {
                tag: tag.label().to_string(),
                context: ctx.iter().map(|&id| self.vocab.token(id).to_string()).collect(),
                dist: dist_doc(dist),
            })
            .collect();
        contexts.sort_by(|a, b| (&a.tag, &a.context).cmp(&(&b.tag, &b.context)));
        TableDoc {
            order: self.order,
            vocab: super::VocabDoc::from_vocab(&self.vocab),
            default: dist_doc(&self.default_dist),
            contexts,
        }
    }

    pub(crate) fn from_doc(doc: TableDoc) -> Result<Self, ScoringError> {
        let vocab = doc.vocab.into_vocab()?;
        let mut b = TableModel::builder(vocab, doc.order);
        b = b.default_dist_named(doc.default)?;
        for c in doc.contexts {
            let tag = LengthTag::parse(&c.tag)
                .ok_or_else(|| ScoringError::Format(format!("unknown tag {:?}", c.tag)))?;
            b = b.context_named(tag, &c.context, c.dist)?;
        }
        b.build()
    }
}

impl ScoringModel for TableModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_log_probs(
        &self,
        _src: &SourceUtterance,
        prefix: &[TokenId],
    ) -> Result<Vec<f64>, ScoringError> {
        check_prefix(&self.vocab, prefix)?;
        let tag = self.vocab.tag_of(prefix[0]).expect("checked by check_prefix");
        let key = self.context_of(tag, prefix);
        let dist = self.contexts.get(&key).unwrap_or(&self.default_dist);
        Ok(dist
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { LOG_ZERO })
            .collect())
    }
}

/// Builder accepting distributions as (token, probability) pairs.
pub struct TableModelBuilder {
    vocab: Vocabulary,
    order: usize,
    contexts: Vec<(ContextKey, Vec<f64>)>,
    default_dist: Option<Vec<f64>>,
}

impl TableModelBuilder {
    /// Default distribution used for contexts without an explicit entry.
    pub fn default_dist(self, pairs: &[(&str, f64)]) -> Result<Self, ScoringError> {
        let named: BTreeMap<String, f64> =
            pairs.iter().map(|&(t, p)| (t.to_string(), p)).collect();
        self.default_dist_named(named)
    }

    fn default_dist_named(mut self, named: BTreeMap<String, f64>) -> Result<Self, ScoringError> {
        let dist = self.dense(&named, "<default>")?;
        self.default_dist = Some(dist);
        Ok(self)
    }

    /// Distribution for one (tag, context tokens) pair.
    pub fn context(
        self,
        tag: LengthTag,
        context: &[&str],
        pairs: &[(&str, f64)],
    ) -> Result<Self, ScoringError> {
        let ctx: Vec<String> = context.iter().map(|s| s.to_string()).collect();
        let named: BTreeMap<String, f64> =
            pairs.iter().map(|&(t, p)| (t.to_string(), p)).collect();
        self.context_named(tag, &ctx, named)
    }

    fn context_named(
        mut self,
        tag: LengthTag,
        context: &[String],
        named: BTreeMap<String, f64>,
    ) -> Result<Self, ScoringError> {
        let label = format!("{} {:?}", tag.label(), context);
        let ids: Vec<TokenId> = context
            .iter()
            .map(|t| {
                self.vocab
                    .id_of(t)
                    .ok_or_else(|| ScoringError::UnknownToken(t.clone()))
            })
            .collect::<Result<_, _>>()?;
        let dist = self.dense(&named, &label)?;
        self.contexts.push(((tag, ids), dist));
        Ok(self)
    }

    /// Same distribution for a context under every tag.
    pub fn context_all_tags(
        mut self,
        context: &[&str],
        pairs: &[(&str, f64)],
    ) -> Result<Self, ScoringError> {
        for tag in LengthTag::ALL {
            self = self.context(tag, context, pairs)?;
        }
        Ok(self)
    }

    /// Dense per-id probability vector from a (token name -> p) map.
    fn dense(&self, named: &BTreeMap<String, f64>, label: &str) -> Result<Vec<f64>, ScoringError> {
        let mut dist = vec![0.0; self.vocab.len()];
        let mut sum = 0.0;
        for (token, &p) in named {
            let id = self
                .vocab
                .id_of(token)
                .ok_or_else(|| ScoringError::UnknownToken(token.clone()))?;
            if p < 0.0 {
                return Err(ScoringError::NegativeProbability {
                    context: label.to_string(),
                    token: token.clone(),
                    p,
                });
            }
            if self.vocab.is_tag_token(id) && p != 0.0 {
                return Err(ScoringError::MassOnTag {
                    context: label.to_string(),
                    token: token.clone(),
                    p,
                });
            }
            dist[id as usize] = p;
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScoringError::NotNormalized {
                context: label.to_string(),
                sum,
            });
        }
        Ok(dist)
    }

    pub fn build(self) -> Result<TableModel, ScoringError> {
        let default_dist = self.default_dist.ok_or_else(|| {
            ScoringError::Format("table model needs a default distribution".into())
        })?;
        Ok(TableModel {
            vocab: self.vocab,
            order: self.order,
            contexts: self.contexts.into_iter().collect(),
            default_dist,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TableDoc {
    order: usize,
    vocab: super::VocabDoc,
    default: BTreeMap<String, f64>,
    contexts: Vec<TableContextDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableContextDoc {
    tag: String,
    context: Vec<String>,
    dist: BTreeMap<String, f64>,
}
