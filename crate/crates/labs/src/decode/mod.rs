//! Beam-search decoding: the single-pass multi-length search, the classic
//! single-tag baseline, and an exhaustive oracle for verification.
//!
//! Scores are cumulative natural-log probabilities; no length normalization
//! is applied during search. Ranking everywhere is score descending with
//! ties broken by lexicographically smaller token-id sequence, which makes
//! every decode bit-reproducible.

mod oracle;

pub use oracle::{enumerate_oracle, enumerate_oracle_capped, OracleRanking, DEFAULT_ORACLE_CAP};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    rank_order, DecodeResult, Hypothesis, LengthTag, PerTag, SourceUtterance, TagResult,
    TagStatus, TokenId, Vocabulary,
};
use crate::scoring::{ScoringError, ScoringModel, LOG_ZERO};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("beam config: {0}")]
    BadConfig(String),
    #[error("oracle would visit {needed} prefixes, above the cap of {cap}")]
    OracleCapExceeded { needed: u128, cap: u64 },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
}

/// Beam-search configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Beam size N: active hypotheses kept after each prune.
    pub beam_size: usize,
    /// Guaranteed incomplete slots per tag during pruning.
    pub per_tag: usize,
    /// Maximum tokens per hypothesis, tag token excluded, EOS included.
    pub max_len: usize,
    /// Tags to explore, canonical order, deduplicated.
    pub tags: Vec<LengthTag>,
    /// Stop once every tag has a completion and no active hypothesis can
    /// still beat its tag's best finished score. On by default.
    pub early_stop: bool,
    /// Final-ranking length penalty alpha; 0 disables it. When enabled the
    /// n-best is ordered by `score / len^alpha` instead of raw score.
    pub length_penalty: f64,
}

impl BeamConfig {
    /// Beam of 9 with 3 guaranteed slots per tag, all tags explored.
    pub fn labs_default(max_len: usize) -> Self {
        Self::new(9, 3, max_len, LengthTag::ALL.to_vec()).expect("defaults are valid")
    }

    /// Validates sizes and deduplicates tags. A `per_tag` guarantee that
    /// cannot fit (`per_tag * |tags| > beam_size`) degrades to
    /// `beam_size / |tags|` with a warning.
    pub fn new(
        beam_size: usize,
        per_tag: usize,
        max_len: usize,
        tags: Vec<LengthTag>,
    ) -> Result<Self, DecodeError> {
        let mut tags = tags;
        tags.sort_by_key(|t| t.index());
        tags.dedup();
        if tags.is_empty() {
            return Err(DecodeError::BadConfig("tag set is empty".into()));
        }
        if beam_size == 0 {
            return Err(DecodeError::BadConfig("beam size must be >= 1".into()));
        }
        if max_len == 0 {
            return Err(DecodeError::BadConfig("max length must be >= 1".into()));
        }
        let mut per_tag = per_tag;
        if per_tag * tags.len() > beam_size {
            let degraded = beam_size / tags.len();
            log::warn!(
                "per-tag guarantee {per_tag} x {} tags exceeds beam {beam_size}; degrading to {degraded}",
                tags.len()
            );
            per_tag = degraded;
        }
        Ok(Self {
            beam_size,
            per_tag,
            max_len,
            tags,
            early_stop: true,
            length_penalty: 0.0,
        })
    }

    pub fn with_early_stop(mut self, on: bool) -> Self {
        self.early_stop = on;
        self
    }

    pub fn with_length_penalty(mut self, alpha: f64) -> Self {
        self.length_penalty = alpha;
        self
    }

    fn validate(&self) -> Result<(), DecodeError> {
        if self.tags.is_empty() {
            return Err(DecodeError::BadConfig("tag set is empty".into()));
        }
        if self.beam_size == 0 || self.max_len == 0 {
            return Err(DecodeError::BadConfig("beam size and max length must be >= 1".into()));
        }
        if self.per_tag * self.tags.len() > self.beam_size {
            return Err(DecodeError::BadConfig(format!(
                "per-tag guarantee {} x {} tags exceeds beam {}",
                self.per_tag,
                self.tags.len(),
                self.beam_size
            )));
        }
        if self.length_penalty < 0.0 {
            return Err(DecodeError::BadConfig("length penalty must be >= 0".into()));
        }
        Ok(())
    }

    /// Ranking order under this config's length penalty.
    fn final_order(&self) -> impl Fn(&Hypothesis, &Hypothesis) -> std::cmp::Ordering + '_ {
        move |a, b| {
            if self.length_penalty == 0.0 {
                rank_order(a, b)
            } else {
                let key = |h: &Hypothesis| {
                    h.score / (h.len_after_tag().max(1) as f64).powf(self.length_penalty)
                };
                key(b)
                    .partial_cmp(&key(a))
                    .expect("penalized scores are finite")
                    .then_with(|| a.tokens.cmp(&b.tokens))
            }
        }
    }
}

/// Search state between steps: incomplete hypotheses partitioned from the
/// completed pools.
#[derive(Debug, Clone)]
pub struct BeamState {
    pub step: usize,
    pub active: Vec<Hypothesis>,
    pub finished: PerTag<Vec<Hypothesis>>,
}

impl BeamState {
    /// Initial beam: one tag-token seed per requested tag, score 0.
    pub fn seed(cfg: &BeamConfig, vocab: &Vocabulary) -> Self {
        Self {
            step: 0,
            active: cfg.tags.iter().map(|&t| Hypothesis::seed(t, vocab)).collect(),
            finished: PerTag::default(),
        }
    }
}

/// Extend every active hypothesis by every finite-probability token.
/// Extensions ending in EOS are marked complete.
pub fn expand(
    state: &BeamState,
    model: &dyn ScoringModel,
    src: &SourceUtterance,
) -> Result<Vec<Hypothesis>, DecodeError> {
    let vocab = model.vocab();
    let eos = vocab.eos();
    let mut candidates = Vec::new();
    for h in &state.active {
        let log_probs = model.next_log_probs(src, &h.tokens)?;
        for (id, &lp) in log_probs.iter().enumerate() {
            if lp == LOG_ZERO {
                continue;
            }
            let id = id as TokenId;
            candidates.push(h.extend(id, lp, id == eos));
        }
    }
    Ok(candidates)
}

/// Result of pruning one step's candidates.
#[derive(Debug, Clone)]
pub struct Pruned {
    /// Incomplete survivors, ranked, at most `beam_size` of them.
    pub active: Vec<Hypothesis>,
    /// Completed candidates; these are always retained.
    pub finished: Vec<Hypothesis>,
}

/// Length-aware pruning:
///
/// 1. completed candidates move to the finished pool and never compete for
///    beam slots;
/// 2. the top `per_tag` incomplete candidates of every tag are reserved;
/// 3. remaining slots up to `beam_size` are filled globally by score.
///
/// A tag with fewer incomplete candidates than its guarantee consumes only
/// what it has; unused reserved slots return to the global fill.
pub fn prune(candidates: Vec<Hypothesis>, cfg: &BeamConfig) -> Pruned {
    let mut finished = Vec::new();
    let mut incomplete = Vec::new();
    for c in candidates {
        if c.completed {
            finished.push(c);
        } else {
            incomplete.push(c);
        }
    }
    incomplete.sort_by(rank_order);

    let mut picked = vec![false; incomplete.len()];
    let mut chosen: Vec<usize> = Vec::with_capacity(cfg.beam_size.min(incomplete.len()));
    for &tag in &cfg.tags {
        let mut taken = 0;
        for (i, h) in incomplete.iter().enumerate() {
            if taken == cfg.per_tag {
                break;
            }
            if !picked[i] && h.tag == tag {
                picked[i] = true;
                chosen.push(i);
                taken += 1;
            }
        }
    }
    for i in 0..incomplete.len() {
        if chosen.len() >= cfg.beam_size {
            break;
        }
        if !picked[i] {
            picked[i] = true;
            chosen.push(i);
        }
    }
    chosen.sort_unstable();

    let mut active = Vec::with_capacity(chosen.len());
    let mut iter = chosen.into_iter().peekable();
    for (i, h) in incomplete.into_iter().enumerate() {
        if iter.peek() == Some(&i) {
            iter.next();
            active.push(h);
        }
    }
    Pruned { active, finished }
}

/// Assemble the final n-best from the finished pools: first the single best
/// hypothesis per non-empty tag, then remaining slots filled globally by
/// score, up to `beam_size` total. Tags whose pool is empty are flagged
/// length-exhausted.
pub fn select_nbest(finished: PerTag<Vec<Hypothesis>>, cfg: &BeamConfig) -> DecodeResult {
    let order = cfg.final_order();
    let mut pools = finished;
    let had_any = PerTag::from_fn(|t| !pools[t].is_empty());
    for &tag in &cfg.tags {
        pools[tag].sort_by(&order);
    }

    // Representation picks: the head of every non-empty pool, best first.
    let mut reps: Vec<LengthTag> = cfg
        .tags
        .iter()
        .copied()
        .filter(|&t| had_any[t])
        .collect();
    reps.sort_by(|&a, &b| order(&pools[a][0], &pools[b][0]));

    let mut selected: PerTag<Vec<Hypothesis>> = PerTag::default();
    let mut rest: Vec<Hypothesis> = Vec::new();
    for (slot, tag) in reps.iter().copied().enumerate() {
        let mut pool = std::mem::take(&mut pools[tag]);
        let tail = pool.split_off(1);
        rest.extend(tail);
        if slot < cfg.beam_size {
            selected[tag].push(pool.pop().expect("non-empty head"));
        }
    }
    let remaining = cfg.beam_size.saturating_sub(reps.len());

    rest.sort_by(&order);
    for h in rest.into_iter().take(remaining) {
        selected[h.tag].push(h);
    }

    let entries = cfg
        .tags
        .iter()
        .map(|&tag| {
            let mut hypotheses = std::mem::take(&mut selected[tag]);
            hypotheses.sort_by(&order);
            let status = if had_any[tag] {
                TagStatus::Ok
            } else {
                TagStatus::LengthExhausted
            };
            TagResult {
                tag,
                status,
                hypotheses,
            }
        })
        .collect();
    DecodeResult {
        entries,
        expansions: 0,
        wall_time_s: 0.0,
    }
}

fn early_stop_reached(state: &BeamState, cfg: &BeamConfig) -> bool {
    let all_represented = cfg.tags.iter().all(|&t| !state.finished[t].is_empty());
    if !all_represented {
        return false;
    }
    state.active.iter().all(|h| {
        let best = state.finished[h.tag]
            .iter()
            .map(|f| f.score)
            .fold(f64::NEG_INFINITY, f64::max);
        h.score < best
    })
}

/// Single-pass multi-length beam search.
///
/// The beam is seeded with one hypothesis per requested tag. Each step
/// extends every active hypothesis over the vocabulary, moves completions
/// to per-tag finished pools, and prunes with per-tag guaranteed slots.
/// The loop ends at `max_len`, when no active hypotheses remain, or (with
/// `early_stop`) once every tag has a completion that no active hypothesis
/// can still beat.
pub fn labs_decode(
    model: &dyn ScoringModel,
    src: &SourceUtterance,
    cfg: &BeamConfig,
) -> Result<DecodeResult, DecodeError> {
    cfg.validate()?;
    src.validate()?;
    let start = Instant::now();
    let mut state = BeamState::seed(cfg, model.vocab());
    let mut expansions = 0u64;
    for step in 1..=cfg.max_len {
        if state.active.is_empty() {
            break;
        }
        state.step = step;
        expansions += state.active.len() as u64;
        let candidates = expand(&state, model, src)?;
        let pruned = prune(candidates, cfg);
        for h in pruned.finished {
            state.finished[h.tag].push(h);
        }
        state.active = pruned.active;
        debug_assert!(state.active.len() <= cfg.beam_size);
        if cfg.early_stop && early_stop_reached(&state, cfg) {
            break;
        }
    }
    let mut result = select_nbest(state.finished, cfg);
    result.expansions = expansions;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Classic beam search seeded with a single tag token.
///
/// Keeps the top `width` incomplete expansions by cumulative score each
/// step and runs until `max_len` or until no active hypotheses remain;
/// returns up to `width` completed hypotheses ranked by score.
pub fn standard_beam_decode(
    model: &dyn ScoringModel,
    src: &SourceUtterance,
    tag: LengthTag,
    width: usize,
    max_len: usize,
) -> Result<DecodeResult, DecodeError> {
    if width == 0 {
        return Err(DecodeError::BadConfig("beam width must be >= 1".into()));
    }
    if max_len == 0 {
        return Err(DecodeError::BadConfig("max length must be >= 1".into()));
    }
    src.validate()?;
    let start = Instant::now();
    let vocab = model.vocab();
    let eos = vocab.eos();
    let mut active = vec![Hypothesis::seed(tag, vocab)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut expansions = 0u64;
    for _step in 1..=max_len {
        if active.is_empty() {
            break;
        }
        expansions += active.len() as u64;
        let mut incomplete = Vec::new();
        for h in &active {
            let log_probs = model.next_log_probs(src, &h.tokens)?;
            for (id, &lp) in log_probs.iter().enumerate() {
                if lp == LOG_ZERO {
                    continue;
                }
                let id = id as TokenId;
                let child = h.extend(id, lp, id == eos);
                if child.completed {
                    finished.push(child);
                } else {
                    incomplete.push(child);
                }
            }
        }
        incomplete.sort_by(rank_order);
        incomplete.truncate(width);
        active = incomplete;
    }
    finished.sort_by(rank_order);
    finished.truncate(width);
    let status = if finished.is_empty() {
        TagStatus::LengthExhausted
    } else {
        TagStatus::Ok
    };
    Ok(DecodeResult {
        entries: vec![TagResult {
            tag,
            status,
            hypotheses: finished,
        }],
        expansions,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// One decode output record, as written to JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub id: String,
    pub tags: Vec<TagRecord>,
    pub expansions: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagRecord {
    pub tag: LengthTag,
    pub status: TagStatus,
    pub hypotheses: Vec<HypothesisRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisRecord {
    /// Full token strings, tag and EOS included.
    pub tokens: Vec<String>,
    /// Detokenized surface text (tag and EOS stripped).
    pub text: String,
    pub score: f64,
}

impl DecodeRecord {
    pub fn from_result(id: &str, result: &DecodeResult, vocab: &Vocabulary) -> Self {
        Self {
            id: id.to_string(),
            tags: result
                .entries
                .iter()
                .map(|e| TagRecord {
                    tag: e.tag,
                    status: e.status,
                    hypotheses: e
                        .hypotheses
                        .iter()
                        .map(|h| HypothesisRecord {
                            tokens: h.tokens.iter().map(|&t| vocab.token(t).to_string()).collect(),
                            text: h.text(vocab),
                            score: h.score,
                        })
                        .collect(),
                })
                .collect(),
            expansions: result.expansions,
            wall_time_s: result.wall_time_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Vocabulary;
    use crate::scoring::{TableModel, LOG_ZERO};

    fn vocab() -> Vocabulary {
        Vocabulary::with_default_specials(["a", "b"]).unwrap()
    }

    fn utt() -> SourceUtterance {
        SourceUtterance {
            id: "u".into(),
            phonemes: vec!["X".into()],
            ref_duration_s: 1.0,
            reference: None,
        }
    }

    fn hyp(tag: LengthTag, tokens: &[TokenId], score: f64, completed: bool) -> Hypothesis {
        Hypothesis {
            tag,
            tokens: tokens.to_vec(),
            score,
            completed,
        }
    }

    /// Model where every context forces EOS.
    fn eos_model() -> TableModel {
        TableModel::builder(vocab(), 1)
            .default_dist(&[("<eos>", 1.0)])
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn expand_yields_one_candidate_per_finite_token() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.5), ("b", 0.25), ("<eos>", 0.25)])
            .unwrap()
            .build()
            .unwrap();
        let cfg = BeamConfig::labs_default(4);
        let mut state = BeamState::seed(&cfg, m.vocab());
        state.active.truncate(1);
        let candidates = expand(&state, &m, &utt()).unwrap();
        assert_eq!(candidates.len(), 3);
        assert!(candidates.iter().all(|c| c.score <= 0.0));
    }

    #[test]
    fn expand_scores_add_parent_and_step() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", (-0.5f64).exp()), ("<eos>", 1.0 - (-0.5f64).exp())])
            .unwrap()
            .build()
            .unwrap();
        let cfg = BeamConfig::labs_default(4);
        let mut state = BeamState::seed(&cfg, m.vocab());
        state.active = vec![hyp(LengthTag::Short, &[1, 4], -1.0, false)];
        let candidates = expand(&state, &m, &utt()).unwrap();
        let a_child = candidates.iter().find(|c| c.tokens == vec![1, 4, 4]).unwrap();
        assert!((a_child.score - (-1.5)).abs() < 1e-12);
        // log-probabilities never raise a score above the parent's
        assert!(candidates.iter().all(|c| c.score <= -1.0));
    }

    #[test]
    fn expand_marks_eos_extensions_complete() {
        let m = eos_model();
        let cfg = BeamConfig::labs_default(4);
        let state = BeamState::seed(&cfg, m.vocab());
        let candidates = expand(&state, &m, &utt()).unwrap();
        assert_eq!(candidates.len(), 3);
        assert!(candidates.iter().all(|c| c.completed));
    }

    #[test]
    fn prune_reserves_per_tag_then_fills_globally() {
        let cfg = BeamConfig::new(4, 1, 6, LengthTag::ALL.to_vec()).unwrap();
        let candidates = vec![
            hyp(LengthTag::Short, &[1, 4], -1.0, false),
            hyp(LengthTag::Short, &[1, 5], -2.0, false),
            hyp(LengthTag::Short, &[1, 4, 4], -3.0, false),
            hyp(LengthTag::Normal, &[2, 4], -5.0, false),
            hyp(LengthTag::Long, &[3, 4], -6.0, false),
        ];
        let pruned = prune(candidates, &cfg);
        let scores: Vec<f64> = pruned.active.iter().map(|h| h.score).collect();
        assert_eq!(scores, vec![-1.0, -2.0, -5.0, -6.0]);
        assert!(pruned.finished.is_empty());
    }

    #[test]
    fn prune_never_discards_completed_candidates() {
        let cfg = BeamConfig::new(1, 0, 6, vec![LengthTag::Short]).unwrap();
        let candidates = vec![
            hyp(LengthTag::Short, &[1, 0], -9.0, true),
            hyp(LengthTag::Short, &[1, 4, 0], -8.0, true),
            hyp(LengthTag::Short, &[1, 4], -1.0, false),
            hyp(LengthTag::Short, &[1, 5], -2.0, false),
        ];
        let pruned = prune(candidates, &cfg);
        assert_eq!(pruned.finished.len(), 2);
        assert_eq!(pruned.active.len(), 1);
        assert_eq!(pruned.active[0].score, -1.0);
    }

    #[test]
    fn prune_tie_break_is_lexicographic_and_order_independent() {
        let cfg = BeamConfig::new(1, 0, 6, vec![LengthTag::Short]).unwrap();
        let a = hyp(LengthTag::Short, &[1, 4], -1.0, false);
        let b = hyp(LengthTag::Short, &[1, 5], -1.0, false);
        let survivor = prune(vec![a.clone(), b.clone()], &cfg).active[0].clone();
        let survivor_permuted = prune(vec![b, a.clone()], &cfg).active[0].clone();
        assert_eq!(survivor, a);
        assert_eq!(survivor_permuted, a);
    }

    #[test]
    fn prune_unused_guarantee_returns_to_global_pool() {
        // Long has no incomplete candidates; its reserved slot goes back to
        // the global fill, which takes the third-best short candidate.
        let cfg = BeamConfig::new(3, 1, 6, LengthTag::ALL.to_vec()).unwrap();
        let candidates = vec![
            hyp(LengthTag::Short, &[1, 4], -1.0, false),
            hyp(LengthTag::Short, &[1, 5], -2.0, false),
            hyp(LengthTag::Short, &[1, 4, 4], -3.0, false),
            hyp(LengthTag::Normal, &[2, 4], -5.0, false),
        ];
        let pruned = prune(candidates, &cfg);
        let scores: Vec<f64> = pruned.active.iter().map(|h| h.score).collect();
        assert_eq!(scores, vec![-1.0, -2.0, -5.0]);
    }

    #[test]
    fn select_nbest_keeps_every_tag_despite_globally_worst_score() {
        let cfg = BeamConfig::new(3, 1, 6, LengthTag::ALL.to_vec()).unwrap();
        let finished = PerTag::new(
            vec![hyp(LengthTag::Short, &[1, 0], -2.0, true)],
            vec![hyp(LengthTag::Normal, &[2, 0], -1.0, true)],
            vec![hyp(LengthTag::Long, &[3, 0], -9.0, true)],
        );
        let result = select_nbest(finished, &cfg);
        for entry in &result.entries {
            assert_eq!(entry.hypotheses.len(), 1, "tag {} missing", entry.tag);
            assert_eq!(entry.status, TagStatus::Ok);
        }
    }

    #[test]
    fn select_nbest_fills_remaining_slots_globally() {
        let cfg = BeamConfig::new(3, 1, 6, LengthTag::ALL.to_vec()).unwrap();
        let finished = PerTag::new(
            vec![
                hyp(LengthTag::Short, &[1, 4, 0], -2.0, true),
                hyp(LengthTag::Short, &[1, 5, 0], -2.5, true),
            ],
            vec![hyp(LengthTag::Normal, &[2, 0], -1.0, true)],
            vec![],
        );
        let result = select_nbest(finished, &cfg);
        let short = result.for_tag(LengthTag::Short).unwrap();
        let normal = result.for_tag(LengthTag::Normal).unwrap();
        let long = result.for_tag(LengthTag::Long).unwrap();
        assert_eq!(
            short.hypotheses.iter().map(|h| h.score).collect::<Vec<_>>(),
            vec![-2.0, -2.5]
        );
        assert_eq!(normal.hypotheses[0].score, -1.0);
        assert_eq!(long.status, TagStatus::LengthExhausted);
        assert!(long.hypotheses.is_empty());
    }

    #[test]
    fn select_nbest_budget_dominates_representation() {
        let cfg = BeamConfig::new(1, 0, 6, LengthTag::ALL.to_vec()).unwrap();
        let finished = PerTag::new(
            vec![hyp(LengthTag::Short, &[1, 0], -2.0, true)],
            vec![hyp(LengthTag::Normal, &[2, 0], -1.0, true)],
            vec![hyp(LengthTag::Long, &[3, 0], -3.0, true)],
        );
        let result = select_nbest(finished, &cfg);
        let total: usize = result.entries.iter().map(|e| e.hypotheses.len()).sum();
        assert_eq!(total, 1);
        assert_eq!(
            result.for_tag(LengthTag::Normal).unwrap().hypotheses[0].score,
            -1.0
        );
        // tags with completions that lost the budget race are still Ok
        assert_eq!(result.for_tag(LengthTag::Short).unwrap().status, TagStatus::Ok);
    }

    #[test]
    fn select_nbest_flags_empty_pools() {
        let cfg = BeamConfig::new(3, 1, 6, LengthTag::ALL.to_vec()).unwrap();
        let result = select_nbest(PerTag::default(), &cfg);
        assert!(result
            .entries
            .iter()
            .all(|e| e.status == TagStatus::LengthExhausted && e.hypotheses.is_empty()));
    }

    #[test]
    fn forced_eos_gives_one_completion_per_tag() {
        let m = eos_model();
        let cfg = BeamConfig::labs_default(6);
        let result = labs_decode(&m, &utt(), &cfg).unwrap();
        for (entry, tag) in result.entries.iter().zip(LengthTag::ALL) {
            assert_eq!(entry.tag, tag);
            assert_eq!(entry.hypotheses.len(), 1);
            let h = &entry.hypotheses[0];
            assert_eq!(h.tokens, vec![m.vocab().tag_token_id(tag), 0]);
            assert_eq!(h.score, 0.0); // log P(EOS | tag) = log 1
        }
        assert_eq!(result.expansions, 3);
    }

    #[test]
    fn tag_that_cannot_complete_is_flagged_not_crashed() {
        // <long> never sees EOS mass, so it exhausted the length budget.
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("<eos>", 0.5), ("a", 0.5)])
            .unwrap()
            .context(LengthTag::Long, &["<long>"], &[("a", 1.0)])
            .unwrap()
            .context(LengthTag::Long, &["a"], &[("a", 1.0)])
            .unwrap()
            .build()
            .unwrap();
        let cfg = BeamConfig::labs_default(4);
        let result = labs_decode(&m, &utt(), &cfg).unwrap();
        assert_eq!(
            result.for_tag(LengthTag::Long).unwrap().status,
            TagStatus::LengthExhausted
        );
        assert_eq!(result.for_tag(LengthTag::Short).unwrap().status, TagStatus::Ok);
    }

    #[test]
    fn singleton_tag_with_zero_guarantee_reduces_to_standard_search() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.4), ("b", 0.35), ("<eos>", 0.25)])
            .unwrap()
            .build()
            .unwrap();
        let u = utt();
        let cfg = BeamConfig::new(4, 0, 5, vec![LengthTag::Normal])
            .unwrap()
            .with_early_stop(false);
        let labs = labs_decode(&m, &u, &cfg).unwrap();
        let standard = standard_beam_decode(&m, &u, LengthTag::Normal, 4, 5).unwrap();
        assert_eq!(labs.entries, standard.entries);
        assert_eq!(labs.expansions, standard.expansions);
    }

    #[test]
    fn width_one_standard_search_is_greedy() {
        // argmax chain: <short> -> a -> b -> EOS
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.6), ("b", 0.3), ("<eos>", 0.1)])
            .unwrap()
            .context_all_tags(&["a"], &[("b", 0.7), ("<eos>", 0.3)])
            .unwrap()
            .context_all_tags(&["b"], &[("<eos>", 0.9), ("a", 0.1)])
            .unwrap()
            .build()
            .unwrap();
        let result = standard_beam_decode(&m, &utt(), LengthTag::Short, 1, 8).unwrap();
        let best = &result.entries[0].hypotheses[0];
        assert_eq!(best.tokens, vec![1, 4, 5, 0]);
        let expected = 0.6f64.ln() + 0.7f64.ln() + 0.9f64.ln();
        assert!((best.score - expected).abs() < 1e-12);
    }

    #[test]
    fn standard_decode_is_deterministic() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.4), ("b", 0.4), ("<eos>", 0.2)])
            .unwrap()
            .build()
            .unwrap();
        let u = utt();
        let first = standard_beam_decode(&m, &u, LengthTag::Normal, 3, 5).unwrap();
        let second = standard_beam_decode(&m, &u, LengthTag::Normal, 3, 5).unwrap();
        assert_eq!(first.entries, second.entries);
        assert_eq!(first.expansions, second.expansions);
    }

    #[test]
    fn config_degrades_oversized_guarantee() {
        let cfg = BeamConfig::new(4, 3, 6, LengthTag::ALL.to_vec()).unwrap();
        assert_eq!(cfg.per_tag, 1);
        let cfg = BeamConfig::new(2, 3, 6, LengthTag::ALL.to_vec()).unwrap();
        assert_eq!(cfg.per_tag, 0);
    }

    #[test]
    fn config_rejects_empty_and_zero() {
        assert!(BeamConfig::new(0, 0, 6, vec![LengthTag::Short]).is_err());
        assert!(BeamConfig::new(4, 0, 0, vec![LengthTag::Short]).is_err());
        assert!(BeamConfig::new(4, 0, 6, vec![]).is_err());
    }
}
