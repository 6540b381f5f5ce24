//! Duration estimation without audio synthesis, and duration-matched
//! selection of one hypothesis from a multi-length n-best list.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{DecodeResult, Hypothesis, LengthTag, SourceUtterance, Vocabulary};
use crate::lengthtag::{g2p, G2PLexicon, LengthTagError};

#[derive(Debug, Error)]
pub enum DurationError {
    #[error("phoneme {0:?} is missing from the duration profile")]
    UnknownPhoneme(String),
    #[error("profile duration for {0:?} must be > 0 ms")]
    NonPositiveDuration(String),
    #[error("pause allowance must be >= 0 ms")]
    NegativeAllowance,
    #[error("epsilon must be > 0 and delta >= 0")]
    BadPolicy,
    #[error("decode result contains no completed hypotheses")]
    EmptyResult,
    #[error("reference duration must be > 0 (got {0})")]
    BadReference(f64),
    #[error(transparent)]
    G2p(#[from] LengthTagError),
    #[error("profile file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-phoneme expected spoken durations plus a fixed per-utterance pause
/// allowance. Estimation is additive over phoneme concatenation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DurationProfile {
    pub id: String,
    /// Phoneme -> expected duration in milliseconds, all strictly positive.
    pub phoneme_ms: BTreeMap<String, f64>,
    /// Fixed allowance added once per utterance, in milliseconds.
    #[serde(default)]
    pub allowance_ms: f64,
}

impl DurationProfile {
    pub fn new(id: &str, phoneme_ms: BTreeMap<String, f64>, allowance_ms: f64) -> Result<Self, DurationError> {
        let profile = Self {
            id: id.to_string(),
            phoneme_ms,
            allowance_ms,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), DurationError> {
        for (p, &ms) in &self.phoneme_ms {
            if !(ms > 0.0) {
                return Err(DurationError::NonPositiveDuration(p.clone()));
            }
        }
        if !(self.allowance_ms >= 0.0) {
            return Err(DurationError::NegativeAllowance);
        }
        Ok(())
    }

    /// Duration of a phoneme sequence in seconds, allowance included.
    pub fn duration_of(&self, phonemes: &[String]) -> Result<f64, DurationError> {
        let mut ms = self.allowance_ms;
        for p in phonemes {
            ms += self
                .phoneme_ms
                .get(p)
                .copied()
                .ok_or_else(|| DurationError::UnknownPhoneme(p.clone()))?;
        }
        Ok(ms / 1000.0)
    }

    pub fn save(&self, path: &Path) -> Result<(), DurationError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| DurationError::Format(e.to_string()))?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DurationError> {
        let s = std::fs::read_to_string(path)?;
        let profile: Self =
            serde_json::from_str(&s).map_err(|e| DurationError::Format(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Estimated spoken duration of `text` in seconds: G2P then the profile's
/// per-phoneme durations plus the fixed allowance.
pub fn estimate_duration(
    profile: &DurationProfile,
    text: &str,
    lexicon: &G2PLexicon,
) -> Result<f64, DurationError> {
    let phonemes = g2p(lexicon, text)?;
    profile.duration_of(&phonemes)
}

/// Rules applied when picking one hypothesis from the n-best list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionPolicy {
    /// Compliance threshold on |ratio - 1|.
    pub epsilon: f64,
    /// Score margin for non-normal candidates; 0 disables the gate. When
    /// enabled, a non-normal candidate is eligible only if its score is
    /// within `delta` of the best overall score.
    pub delta: f64,
    /// What to do when no candidate is eligible.
    pub fallback: FallbackRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackRule {
    /// Pick the candidate with the ratio closest to 1 regardless of gates.
    ClosestRatio,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            delta: 0.0,
            fallback: FallbackRule::ClosestRatio,
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), DurationError> {
        if !(self.epsilon > 0.0) || !(self.delta >= 0.0) {
            return Err(DurationError::BadPolicy);
        }
        Ok(())
    }
}

/// Diagnostics for one candidate considered during selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateDiagnostic {
    pub tag: LengthTag,
    pub text: String,
    pub score: f64,
    /// Estimated duration in seconds; absent when the duration could not be
    /// computed (empty text), which also makes the candidate ineligible.
    pub estimated_s: Option<f64>,
    pub ratio: Option<f64>,
    pub eligible: bool,
    pub compliant: bool,
}

/// Outcome of duration-matched selection for one utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub id: String,
    pub tag: LengthTag,
    pub text: String,
    pub score: f64,
    pub estimated_s: f64,
    pub ref_s: f64,
    pub ratio: f64,
    pub compliant: bool,
    /// True when the eligibility gate excluded everything and the fallback
    /// rule produced the choice.
    pub fallback_used: bool,
    /// Every input candidate, exactly once, in result order.
    pub candidates: Vec<CandidateDiagnostic>,
}

/// One candidate offered to [`select_from_candidates`]: a decoded
/// hypothesis reduced to what selection needs.
#[derive(Debug, Clone)]
pub struct SelectionCandidate {
    pub tag: LengthTag,
    pub text: String,
    pub score: f64,
    /// Token strings used for the deterministic tie-break.
    pub tokens: Vec<String>,
}

impl SelectionCandidate {
    pub fn from_hypothesis(h: &Hypothesis, vocab: &Vocabulary) -> Self {
        Self {
            tag: h.tag,
            text: h.text(vocab),
            score: h.score,
            tokens: h.tokens.iter().map(|&t| vocab.token(t).to_string()).collect(),
        }
    }
}

/// Pick the candidate whose estimated duration best matches the reference
/// duration `ref_s`.
///
/// Among eligible candidates the winner minimizes `|estimated/ref - 1|`;
/// ties break toward the higher score, then the lexicographically smaller
/// token sequence. Candidates whose duration cannot be estimated (empty
/// text) are ineligible but still reported in the diagnostics. When the
/// score gate leaves nothing eligible, the fallback rule applies over all
/// candidates and the selection is flagged.
pub fn select_from_candidates(
    id: &str,
    candidates: &[SelectionCandidate],
    ref_s: f64,
    profile: &DurationProfile,
    policy: &SelectionPolicy,
    lexicon: &G2PLexicon,
) -> Result<Selection, DurationError> {
    policy.validate()?;
    profile.validate()?;
    if !(ref_s > 0.0) {
        return Err(DurationError::BadReference(ref_s));
    }
    if candidates.is_empty() {
        return Err(DurationError::EmptyResult);
    }

    let best_score = candidates
        .iter()
        .map(|c| c.score)
        .fold(f64::NEG_INFINITY, f64::max);

    struct Scored {
        estimated: Option<f64>,
        ratio: Option<f64>,
        gate_ok: bool,
    }

    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let estimated = if c.text.is_empty() {
            None
        } else {
            Some(estimate_duration(profile, &c.text, lexicon)?)
        };
        let ratio = estimated.map(|e| e / ref_s);
        let gate_ok = policy.delta == 0.0
            || c.tag == LengthTag::Normal
            || c.score >= best_score - policy.delta;
        scored.push(Scored {
            estimated,
            ratio,
            gate_ok,
        });
    }

    let pick = |pool: &[usize]| -> Option<usize> {
        pool.iter()
            .copied()
            .filter(|&i| scored[i].ratio.is_some())
            .min_by(|&a, &b| {
                let ka = (scored[a].ratio.unwrap() - 1.0).abs();
                let kb = (scored[b].ratio.unwrap() - 1.0).abs();
                ka.partial_cmp(&kb)
                    .expect("ratios are finite")
                    .then_with(|| {
                        candidates[b]
                            .score
                            .partial_cmp(&candidates[a].score)
                            .expect("scores are finite")
                    })
                    .then_with(|| candidates[a].tokens.cmp(&candidates[b].tokens))
            })
    };

    let eligible: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].gate_ok).collect();
    let everyone: Vec<usize> = (0..scored.len()).collect();
    let (chosen_idx, fallback_used) = match pick(&eligible) {
        Some(i) => (i, false),
        None => match policy.fallback {
            FallbackRule::ClosestRatio => {
                let i = pick(&everyone).ok_or(DurationError::EmptyResult)?;
                (i, true)
            }
        },
    };

    let chosen = &candidates[chosen_idx];
    let estimated_s = scored[chosen_idx]
        .estimated
        .expect("chosen candidate has a duration");
    let ratio = scored[chosen_idx].ratio.expect("chosen candidate has a ratio");
    let diagnostics = candidates
        .iter()
        .zip(&scored)
        .map(|(c, s)| CandidateDiagnostic {
            tag: c.tag,
            text: c.text.clone(),
            score: c.score,
            estimated_s: s.estimated,
            ratio: s.ratio,
            eligible: s.gate_ok && s.ratio.is_some(),
            compliant: s
                .ratio
                .map(|r| (r - 1.0).abs() <= policy.epsilon)
                .unwrap_or(false),
        })
        .collect();

    Ok(Selection {
        id: id.to_string(),
        tag: chosen.tag,
        text: chosen.text.clone(),
        score: chosen.score,
        estimated_s,
        ref_s,
        ratio,
        compliant: (ratio - 1.0).abs() <= policy.epsilon,
        fallback_used,
        candidates: diagnostics,
    })
}

/// [`select_from_candidates`] over a live decode result.
pub fn select_hypothesis(
    result: &DecodeResult,
    src: &SourceUtterance,
    profile: &DurationProfile,
    policy: &SelectionPolicy,
    lexicon: &G2PLexicon,
    vocab: &Vocabulary,
) -> Result<Selection, DurationError> {
    let candidates: Vec<SelectionCandidate> = result
        .all_hypotheses()
        .map(|h| SelectionCandidate::from_hypothesis(h, vocab))
        .collect();
    select_from_candidates(
        &src.id,
        &candidates,
        src.ref_duration_s,
        profile,
        policy,
        lexicon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{TagResult, TagStatus};

    fn profile() -> DurationProfile {
        let mut map = BTreeMap::new();
        map.insert("A".to_string(), 80.0);
        map.insert("B".to_string(), 120.0);
        DurationProfile::new("test", map, 0.0).unwrap()
    }

    fn lexicon() -> G2PLexicon {
        let mut lex = G2PLexicon::new();
        lex.insert_rule('w', vec!["A".into()]).unwrap();
        lex.insert("aba", vec!["A".into(), "B".into(), "A".into()])
            .unwrap();
        lex
    }

    #[test]
    fn duration_is_the_phoneme_sum() {
        let p = profile();
        let d = p
            .duration_of(&["A".into(), "B".into(), "A".into()])
            .unwrap();
        assert!((d - 0.280).abs() < 1e-12);
    }

    #[test]
    fn allowance_shifts_duration_by_a_constant() {
        let mut with = profile();
        with.allowance_ms = 100.0;
        let lex = lexicon();
        let base = estimate_duration(&profile(), "aba", &lex).unwrap();
        let shifted = estimate_duration(&with, "aba", &lex).unwrap();
        assert!((shifted - base - 0.100).abs() < 1e-12);
    }

    #[test]
    fn duration_is_additive_over_concatenation() {
        let p = profile();
        let lex = lexicon();
        let one = estimate_duration(&p, "w", &lex).unwrap();
        let two = estimate_duration(&p, "w w", &lex).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn missing_phoneme_is_named() {
        let p = profile();
        let mut lex = G2PLexicon::new();
        lex.insert_rule('q', vec!["Q".into()]).unwrap();
        match estimate_duration(&p, "q", &lex) {
            Err(DurationError::UnknownPhoneme(ph)) => assert_eq!(ph, "Q"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    // Selection fixtures: vocabulary words that map to fixed phoneme counts
    // so estimated durations are word-count multiples of 100 ms.
    fn selection_fixture() -> (Vocabulary, G2PLexicon, DurationProfile) {
        let vocab = Vocabulary::with_default_specials(["w"]).unwrap();
        let mut lex = G2PLexicon::new();
        lex.insert_rule('w', vec!["P".into()]).unwrap();
        let mut map = BTreeMap::new();
        map.insert("P".to_string(), 100.0);
        let profile = DurationProfile::new("fixture", map, 0.0).unwrap();
        (vocab, lex, profile)
    }

    fn word_hyp(tag: LengthTag, words: usize, score: f64) -> Hypothesis {
        let mut tokens = vec![match tag {
            LengthTag::Short => 1,
            LengthTag::Normal => 2,
            LengthTag::Long => 3,
        }];
        tokens.extend(std::iter::repeat(4).take(words));
        tokens.push(0);
        Hypothesis {
            tag,
            tokens,
            score,
            completed: true,
        }
    }

    fn result_of(hyps: Vec<Hypothesis>) -> DecodeResult {
        let mut entries = Vec::new();
        for tag in LengthTag::ALL {
            let tagged: Vec<Hypothesis> =
                hyps.iter().filter(|h| h.tag == tag).cloned().collect();
            let status = if tagged.is_empty() {
                TagStatus::LengthExhausted
            } else {
                TagStatus::Ok
            };
            entries.push(TagResult {
                tag,
                status,
                hypotheses: tagged,
            });
        }
        DecodeResult {
            entries,
            expansions: 0,
            wall_time_s: 0.0,
        }
    }

    fn src(ref_s: f64) -> SourceUtterance {
        SourceUtterance {
            id: "u".into(),
            phonemes: vec!["P".into()],
            ref_duration_s: ref_s,
            reference: None,
        }
    }

    #[test]
    fn nearest_ratio_wins() {
        let (vocab, lex, profile) = selection_fixture();
        // reference 2.0 s; candidates at 1.4 s, 2.1 s, 2.6 s
        let result = result_of(vec![
            word_hyp(LengthTag::Short, 14, -1.0),
            word_hyp(LengthTag::Normal, 21, -1.5),
            word_hyp(LengthTag::Long, 26, -2.0),
        ]);
        let sel = select_hypothesis(
            &result,
            &src(2.0),
            &profile,
            &SelectionPolicy::default(),
            &lex,
            &vocab,
        )
        .unwrap();
        assert_eq!(sel.tag, LengthTag::Normal);
        assert!((sel.estimated_s - 2.1).abs() < 1e-9);
        assert!((sel.ratio - 1.05).abs() < 1e-9);
        assert!(sel.compliant);
        assert_eq!(sel.candidates.len(), 3);
    }

    #[test]
    fn single_candidate_is_chosen_and_flagged() {
        let (vocab, lex, profile) = selection_fixture();
        let result = result_of(vec![word_hyp(LengthTag::Long, 30, -1.0)]);
        let sel = select_hypothesis(
            &result,
            &src(2.0),
            &profile,
            &SelectionPolicy::default(),
            &lex,
            &vocab,
        )
        .unwrap();
        assert_eq!(sel.tag, LengthTag::Long);
        assert!(!sel.compliant); // ratio 1.5 is outside epsilon = 0.2
        assert!(!sel.fallback_used);
    }

    #[test]
    fn delta_gate_excludes_low_scoring_non_normal_candidates() {
        let (vocab, lex, profile) = selection_fixture();
        // long candidate has the better ratio (1.02) but trails the best
        // score by 0.9 > delta; the normal candidate (ratio 1.15) wins.
        let result = result_of(vec![
            word_hyp(LengthTag::Normal, 23, -1.0),
            word_hyp(LengthTag::Long, 20, -1.9),
        ]);
        let policy = SelectionPolicy {
            delta: 0.5,
            ..SelectionPolicy::default()
        };
        let sel =
            select_hypothesis(&result, &src(2.0), &profile, &policy, &lex, &vocab).unwrap();
        assert_eq!(sel.tag, LengthTag::Normal);
        assert!((sel.ratio - 1.15).abs() < 1e-9);
        let long_diag = sel
            .candidates
            .iter()
            .find(|c| c.tag == LengthTag::Long)
            .unwrap();
        assert!(!long_diag.eligible);
    }

    #[test]
    fn chosen_ratio_is_never_beaten_by_an_eligible_candidate() {
        let (vocab, lex, profile) = selection_fixture();
        let result = result_of(vec![
            word_hyp(LengthTag::Short, 10, -1.0),
            word_hyp(LengthTag::Normal, 18, -1.2),
            word_hyp(LengthTag::Long, 25, -1.4),
        ]);
        let sel = select_hypothesis(
            &result,
            &src(2.0),
            &profile,
            &SelectionPolicy::default(),
            &lex,
            &vocab,
        )
        .unwrap();
        let chosen_closeness = (sel.ratio - 1.0).abs();
        for c in sel.candidates.iter().filter(|c| c.eligible) {
            assert!(chosen_closeness <= (c.ratio.unwrap() - 1.0).abs() + 1e-12);
        }
    }

    #[test]
    fn profile_scale_covariance_leaves_the_choice_unchanged() {
        let (vocab, lex, profile) = selection_fixture();
        let hyps = vec![
            word_hyp(LengthTag::Short, 12, -1.0),
            word_hyp(LengthTag::Normal, 19, -1.2),
            word_hyp(LengthTag::Long, 27, -1.4),
        ];
        let result = result_of(hyps);
        let sel = select_hypothesis(
            &result,
            &src(2.0),
            &profile,
            &SelectionPolicy::default(),
            &lex,
            &vocab,
        )
        .unwrap();
        let mut scaled = profile.clone();
        for v in scaled.phoneme_ms.values_mut() {
            *v *= 3.0;
        }
        let sel_scaled = select_hypothesis(
            &result,
            &src(6.0),
            &scaled,
            &SelectionPolicy::default(),
            &lex,
            &vocab,
        )
        .unwrap();
        assert_eq!(sel.tag, sel_scaled.tag);
        assert_eq!(sel.text, sel_scaled.text);
    }

    #[test]
    fn empty_result_is_an_error() {
        let (vocab, lex, profile) = selection_fixture();
        let result = result_of(vec![]);
        assert!(matches!(
            select_hypothesis(
                &result,
                &src(2.0),
                &profile,
                &SelectionPolicy::default(),
                &lex,
                &vocab
            ),
            Err(DurationError::EmptyResult)
        ));
    }

    #[test]
    fn bad_reference_duration_is_an_error() {
        let (vocab, lex, profile) = selection_fixture();
        let result = result_of(vec![word_hyp(LengthTag::Normal, 5, -1.0)]);
        assert!(matches!(
            select_hypothesis(
                &result,
                &src(0.0),
                &profile,
                &SelectionPolicy::default(),
                &lex,
                &vocab
            ),
            Err(DurationError::BadReference(_))
        ));
    }

    #[test]
    fn profile_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.json");
        let p = profile();
        p.save(&path).unwrap();
        let loaded = DurationProfile::load(&path).unwrap();
        assert_eq!(loaded.id, p.id);
        assert_eq!(loaded.phoneme_ms, p.phoneme_ms);
    }
}
