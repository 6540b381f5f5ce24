//! Shared domain vocabulary: tokens, length tags, hypotheses, and decode results.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer id of a vocabulary token.
pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("special token {0:?} is not in the token list")]
    MissingSpecial(String),
    #[error("special tokens must be mutually distinct (offender: {0:?})")]
    SpecialClash(String),
    #[error("vocabulary file: {0}")]
    VocabFormat(String),
    #[error("utterance {id:?}: {reason}")]
    BadUtterance { id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Length control token, assigned from the target/source length ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthTag {
    Short,
    Normal,
    Long,
}

impl LengthTag {
    /// All three tags, in canonical order.
    pub const ALL: [LengthTag; 3] = [LengthTag::Short, LengthTag::Normal, LengthTag::Long];

    pub fn index(self) -> usize {
        match self {
            LengthTag::Short => 0,
            LengthTag::Normal => 1,
            LengthTag::Long => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LengthTag::Short => "short",
            LengthTag::Normal => "normal",
            LengthTag::Long => "long",
        }
    }

    pub fn parse(s: &str) -> Option<LengthTag> {
        match s {
            "short" => Some(LengthTag::Short),
            "normal" => Some(LengthTag::Normal),
            "long" => Some(LengthTag::Long),
            _ => None,
        }
    }
}

impl fmt::Display for LengthTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Fixed-size container holding one value per length tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerTag<T> {
    items: [T; 3],
}

impl<T> PerTag<T> {
    pub fn new(short: T, normal: T, long: T) -> Self {
        Self {
            items: [short, normal, long],
        }
    }

    pub fn from_fn(mut f: impl FnMut(LengthTag) -> T) -> Self {
        Self {
            items: [
                f(LengthTag::Short),
                f(LengthTag::Normal),
                f(LengthTag::Long),
            ],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (LengthTag, &T)> {
        LengthTag::ALL.iter().map(move |&t| (t, &self.items[t.index()]))
    }
}

impl<T> Index<LengthTag> for PerTag<T> {
    type Output = T;
    fn index(&self, tag: LengthTag) -> &T {
        &self.items[tag.index()]
    }
}

impl<T> IndexMut<LengthTag> for PerTag<T> {
    fn index_mut(&mut self, tag: LengthTag) -> &mut T {
        &mut self.items[tag.index()]
    }
}

/// Names of the special tokens a vocabulary must declare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub eos: String,
    pub short: String,
    pub normal: String,
    pub long: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            eos: "<eos>".to_string(),
            short: "<short>".to_string(),
            normal: "<normal>".to_string(),
            long: "<long>".to_string(),
        }
    }
}

/// Immutable token table with declared EOS and length-tag tokens.
///
/// Token ids are assigned by position in the token list. The three tag
/// tokens live inside the vocabulary like any other token, but scoring
/// models suppress them everywhere except position 0 of a hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVocab", into = "RawVocab")]
pub struct Vocabulary {
    tokens: Vec<String>,
    specials: SpecialTokens,
    eos: TokenId,
    tag_ids: [TokenId; 3],
}

/// Wire form of [`Vocabulary`]; re-validated on deserialization.
#[derive(Serialize, Deserialize)]
struct RawVocab {
    tokens: Vec<String>,
    eos: String,
    short: String,
    normal: String,
    long: String,
}

impl From<Vocabulary> for RawVocab {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens,
            eos: v.specials.eos,
            short: v.specials.short,
            normal: v.specials.normal,
            long: v.specials.long,
        }
    }
}

impl TryFrom<RawVocab> for Vocabulary {
    type Error = CoreError;
    fn try_from(raw: RawVocab) -> Result<Self, CoreError> {
        Vocabulary::new(
            raw.tokens,
            SpecialTokens {
                eos: raw.eos,
                short: raw.short,
                normal: raw.normal,
                long: raw.long,
            },
        )
    }
}

impl Vocabulary {
    /// Build a vocabulary from an ordered token list and declared specials.
    ///
    /// Every special must appear in the list; all four must be distinct.
    pub fn new(tokens: Vec<String>, specials: SpecialTokens) -> Result<Self, CoreError> {
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(CoreError::DuplicateToken(t.clone()));
            }
        }
        let names = [
            &specials.eos,
            &specials.short,
            &specials.normal,
            &specials.long,
        ];
        for (i, a) in names.iter().enumerate() {
            for b in names.iter().skip(i + 1) {
                if a == b {
                    return Err(CoreError::SpecialClash((*a).clone()));
                }
            }
        }
        let find = |name: &str| -> Result<TokenId, CoreError> {
            tokens
                .iter()
                .position(|t| t == name)
                .map(|i| i as TokenId)
                .ok_or_else(|| CoreError::MissingSpecial(name.to_string()))
        };
        let eos = find(&specials.eos)?;
        let tag_ids = [
            find(&specials.short)?,
            find(&specials.normal)?,
            find(&specials.long)?,
        ];
        Ok(Self {
            tokens,
            specials,
            eos,
            tag_ids,
        })
    }

    /// Convenience constructor: default special names at ids 0..=3 followed
    /// by the given regular tokens.
    pub fn with_default_specials<I, S>(regular: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let specials = SpecialTokens::default();
        let mut tokens = vec![
            specials.eos.clone(),
            specials.short.clone(),
            specials.normal.clone(),
            specials.long.clone(),
        ];
        tokens.extend(regular.into_iter().map(Into::into));
        Self::new(tokens, specials)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.tokens.iter().position(|t| t == token).map(|i| i as TokenId)
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    /// Id of the token that seeds hypotheses for `tag`.
    pub fn tag_token_id(&self, tag: LengthTag) -> TokenId {
        self.tag_ids[tag.index()]
    }

    /// Inverse of [`tag_token_id`](Self::tag_token_id); `None` for non-tag tokens.
    pub fn tag_of(&self, id: TokenId) -> Option<LengthTag> {
        LengthTag::ALL
            .iter()
            .copied()
            .find(|&t| self.tag_ids[t.index()] == id)
    }

    pub fn is_tag_token(&self, id: TokenId) -> bool {
        self.tag_of(id).is_some()
    }

    /// Serialize to the line-oriented vocabulary format (version 1):
    ///
    /// ```text
    /// labs-vocab v1
    /// eos <eos>
    /// short <short>
    /// normal <normal>
    /// long <long>
    /// <token 0>
    /// <token 1>
    /// ...
    /// ```
    pub fn to_file_string(&self) -> String {
        let mut out = String::from("labs-vocab v1\n");
        out.push_str(&format!("eos {}\n", self.specials.eos));
        out.push_str(&format!("short {}\n", self.specials.short));
        out.push_str(&format!("normal {}\n", self.specials.normal));
        out.push_str(&format!("long {}\n", self.specials.long));
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Parse the format produced by [`to_file_string`](Self::to_file_string).
    pub fn from_file_string(s: &str) -> Result<Self, CoreError> {
        let mut lines = s.lines();
        match lines.next() {
            Some("labs-vocab v1") => {}
            other => {
                return Err(CoreError::VocabFormat(format!(
                    "expected header 'labs-vocab v1', got {other:?}"
                )))
            }
        }
        let mut special = |key: &str| -> Result<String, CoreError> {
            let line = lines
                .next()
                .ok_or_else(|| CoreError::VocabFormat(format!("missing '{key}' header line")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(CoreError::VocabFormat(format!(
                    "expected '{key} <token>', got {line:?}"
                ))),
            }
        };
        let specials = SpecialTokens {
            eos: special("eos")?,
            short: special("short")?,
            normal: special("normal")?,
            long: special("long")?,
        };
        let tokens: Vec<String> = lines.map(str::to_string).collect();
        Self::new(tokens, specials)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CoreError> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CoreError> {
        let s = std::fs::read_to_string(path)?;
        Self::from_file_string(&s)
    }
}

/// A partial or completed token sequence with its cumulative log-probability.
///
/// `tokens[0]` is always the tag token for `tag`; `score` is the running
/// sum of per-step natural-log probabilities, hence never positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tag: LengthTag,
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub completed: bool,
}

impl Hypothesis {
    /// Seed hypothesis holding only the tag token, score 0.
    pub fn seed(tag: LengthTag, vocab: &Vocabulary) -> Self {
        Self {
            tag,
            tokens: vec![vocab.tag_token_id(tag)],
            score: 0.0,
            completed: false,
        }
    }

    /// Child hypothesis extended by one token.
    pub fn extend(&self, token: TokenId, log_prob: f64, is_eos: bool) -> Self {
        let mut tokens = Vec::with_capacity(self.tokens.len() + 1);
        tokens.extend_from_slice(&self.tokens);
        tokens.push(token);
        Self {
            tag: self.tag,
            tokens,
            score: self.score + log_prob,
            completed: is_eos,
        }
    }

    /// Number of tokens after the leading tag token (EOS included).
    pub fn len_after_tag(&self) -> usize {
        self.tokens.len().saturating_sub(1)
    }

    /// Generated tokens as strings, tag and EOS stripped.
    pub fn surface_tokens<'a>(&self, vocab: &'a Vocabulary) -> Vec<&'a str> {
        let body = &self.tokens[1..];
        let body = match body.last() {
            Some(&id) if id == vocab.eos() => &body[..body.len() - 1],
            _ => body,
        };
        body.iter().map(|&id| vocab.token(id)).collect()
    }

    /// Detokenized text: surface tokens joined by single spaces.
    pub fn text(&self, vocab: &Vocabulary) -> String {
        self.surface_tokens(vocab).join(" ")
    }
}

/// Deterministic ranking order: score descending, then lexicographically
/// smaller token-id sequence first.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .expect("hypothesis scores are finite")
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Outcome marker for one tag's slice of a decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagStatus {
    /// At least one completed hypothesis was found for the tag.
    Ok,
    /// No hypothesis for the tag completed within the length budget.
    LengthExhausted,
}

/// Completed hypotheses for one tag, ranked by score descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagResult {
    pub tag: LengthTag,
    pub status: TagStatus,
    pub hypotheses: Vec<Hypothesis>,
}

/// Result of one decode call: per-tag ranked completions plus cost counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// One entry per requested tag, in canonical tag order.
    pub entries: Vec<TagResult>,
    /// Number of hypotheses expanded (= scoring-model queries issued).
    pub expansions: u64,
    /// Wall time of the decode in seconds.
    pub wall_time_s: f64,
}

impl DecodeResult {
    pub fn for_tag(&self, tag: LengthTag) -> Option<&TagResult> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    /// All completed hypotheses across tags, in entry order.
    pub fn all_hypotheses(&self) -> impl Iterator<Item = &Hypothesis> {
        self.entries.iter().flat_map(|e| e.hypotheses.iter())
    }

    /// Best-scoring hypothesis across all tags, ties broken lexicographically.
    pub fn best_overall(&self) -> Option<&Hypothesis> {
        self.all_hypotheses().min_by(|a, b| rank_order(a, b))
    }
}

/// One input utterance: source phonemes plus its silence-trimmed duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUtterance {
    pub id: String,
    /// Source phoneme sequence; also the conditioning context for scoring.
    pub phonemes: Vec<String>,
    /// Reference duration in seconds, already silence-trimmed.
    pub ref_duration_s: f64,
    /// Optional reference translation, used by evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl SourceUtterance {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.phonemes.is_empty() {
            return Err(CoreError::BadUtterance {
                id: self.id.clone(),
                reason: "phoneme sequence is empty".into(),
            });
        }
        if !(self.ref_duration_s >= 0.0) {
            return Err(CoreError::BadUtterance {
                id: self.id.clone(),
                reason: format!("reference duration {} is negative", self.ref_duration_s),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::with_default_specials(["a", "b"]).unwrap()
    }

    #[test]
    fn default_layout_puts_tags_at_ids_1_2_3() {
        let v = vocab();
        assert_eq!(v.eos(), 0);
        assert_eq!(v.tag_token_id(LengthTag::Short), 1);
        assert_eq!(v.tag_token_id(LengthTag::Normal), 2);
        assert_eq!(v.tag_token_id(LengthTag::Long), 3);
    }

    #[test]
    fn tag_token_id_round_trips() {
        let v = vocab();
        for tag in LengthTag::ALL {
            assert_eq!(v.tag_of(v.tag_token_id(tag)), Some(tag));
        }
        assert_eq!(v.tag_of(v.eos()), None);
    }

    #[test]
    fn duplicate_tokens_rejected() {
        let err = Vocabulary::with_default_specials(["a", "a"]).unwrap_err();
        assert!(matches!(err, CoreError::DuplicateToken(_)));
    }

    #[test]
    fn missing_special_rejected() {
        let err = Vocabulary::new(
            vec!["<eos>".into(), "<short>".into(), "<normal>".into()],
            SpecialTokens::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::MissingSpecial(_)));
    }

    #[test]
    fn clashing_specials_rejected() {
        let specials = SpecialTokens {
            eos: "<eos>".into(),
            short: "<eos>".into(),
            normal: "<normal>".into(),
            long: "<long>".into(),
        };
        let err = Vocabulary::new(
            vec!["<eos>".into(), "<normal>".into(), "<long>".into()],
            specials,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::SpecialClash(_)));
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let v = Vocabulary::with_default_specials(["alpha", "beta", "gamma"]).unwrap();
        let s = v.to_file_string();
        let reloaded = Vocabulary::from_file_string(&s).unwrap();
        assert_eq!(reloaded, v);
        assert_eq!(reloaded.to_file_string(), s);
    }

    #[test]
    fn file_header_is_validated() {
        assert!(Vocabulary::from_file_string("garbage\n").is_err());
        assert!(Vocabulary::from_file_string("labs-vocab v1\neos <eos>\n").is_err());
    }

    #[test]
    fn hypothesis_text_strips_tag_and_eos() {
        let v = vocab();
        let h = Hypothesis {
            tag: LengthTag::Short,
            tokens: vec![1, 4, 5, 0],
            score: -1.0,
            completed: true,
        };
        assert_eq!(h.text(&v), "a b");
        assert_eq!(h.len_after_tag(), 3);
    }

    #[test]
    fn rank_order_breaks_ties_lexicographically() {
        let a = Hypothesis {
            tag: LengthTag::Short,
            tokens: vec![1, 4, 0],
            score: -1.0,
            completed: true,
        };
        let b = Hypothesis {
            tag: LengthTag::Short,
            tokens: vec![1, 5, 0],
            score: -1.0,
            completed: true,
        };
        assert_eq!(rank_order(&a, &b), std::cmp::Ordering::Less);
        let mut v = vec![b.clone(), a.clone()];
        v.sort_by(rank_order);
        assert_eq!(v, vec![a, b]);
    }

    #[test]
    fn utterance_validation() {
        let good = SourceUtterance {
            id: "u1".into(),
            phonemes: vec!["A".into()],
            ref_duration_s: 1.0,
            reference: None,
        };
        assert!(good.validate().is_ok());
        let empty = SourceUtterance {
            phonemes: vec![],
            ..good.clone()
        };
        assert!(empty.validate().is_err());
        let negative = SourceUtterance {
            ref_duration_s: -0.5,
            ..good
        };
        assert!(negative.validate().is_err());
    }
}
