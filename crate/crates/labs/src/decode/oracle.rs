//! Brute-force enumeration decoder used to verify the beam searches.

use crate::core::{rank_order, Hypothesis, LengthTag, SourceUtterance};
use crate::scoring::{ScoringModel, LOG_ZERO};

use super::DecodeError;

/// Default bound on the number of prefixes the oracle may visit.
pub const DEFAULT_ORACLE_CAP: u64 = 10_000_000;

/// Every completed sequence for one tag, exactly ranked.
#[derive(Debug, Clone)]
pub struct OracleRanking {
    pub tag: LengthTag,
    /// All completions of length <= the requested maximum, ranked by score
    /// descending with lexicographic tie-break.
    pub hypotheses: Vec<Hypothesis>,
}

impl OracleRanking {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }
}

/// Exhaustively score every complete sequence of up to `max_len` tokens
/// (tag excluded, EOS included) beginning with the tag token, using the
/// default prefix cap.
pub fn enumerate_oracle(
    model: &dyn ScoringModel,
    src: &SourceUtterance,
    tag: LengthTag,
    max_len: usize,
) -> Result<OracleRanking, DecodeError> {
    enumerate_oracle_capped(model, src, tag, max_len, DEFAULT_ORACLE_CAP)
}

/// [`enumerate_oracle`] with an explicit cap; refuses instances whose
/// worst-case prefix count exceeds it.
pub fn enumerate_oracle_capped(
    model: &dyn ScoringModel,
    src: &SourceUtterance,
    tag: LengthTag,
    max_len: usize,
    cap: u64,
) -> Result<OracleRanking, DecodeError> {
    if max_len == 0 {
        return Err(DecodeError::BadConfig("max length must be >= 1".into()));
    }
    src.validate()?;
    let vocab = model.vocab();
    // Worst case: prefixes of 0..max_len non-EOS, non-tag tokens.
    let branching = (vocab.len().saturating_sub(4)) as u128;
    let mut needed: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..max_len {
        needed = needed.saturating_add(layer);
        layer = layer.saturating_mul(branching);
        if needed > cap as u128 {
            return Err(DecodeError::OracleCapExceeded { needed, cap });
        }
    }

    let eos = vocab.eos();
    let mut completions = Vec::new();
    let mut stack = vec![Hypothesis::seed(tag, vocab)];
    while let Some(prefix) = stack.pop() {
        let log_probs = model.next_log_probs(src, &prefix.tokens)?;
        let len = prefix.len_after_tag();
        for (id, &lp) in log_probs.iter().enumerate() {
            if lp == LOG_ZERO {
                continue;
            }
            let id = id as u32;
            if id == eos {
                completions.push(prefix.extend(id, lp, true));
            } else if len + 1 < max_len {
                // a non-EOS extension at len + 1 == max_len could never
                // reach EOS within the budget, so it is not visited
                stack.push(prefix.extend(id, lp, false));
            }
        }
    }
    completions.sort_by(rank_order);
    Ok(OracleRanking {
        tag,
        hypotheses: completions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Vocabulary;
    use crate::decode::{labs_decode, standard_beam_decode, BeamConfig};
    use crate::scoring::TableModel;

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

    #[test]
    fn point_mass_model_yields_single_completion_with_score_zero() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("<eos>", 1.0)])
            .unwrap()
            .build()
            .unwrap();
        let ranking = enumerate_oracle(&m, &utt(), LengthTag::Short, 4).unwrap();
        assert_eq!(ranking.hypotheses.len(), 1);
        assert_eq!(ranking.best().unwrap().tokens, vec![1, 0]);
        assert_eq!(ranking.best().unwrap().score, 0.0);
    }

    #[test]
    fn uniform_model_enumerates_all_complete_sequences() {
        let third = 1.0 / 3.0;
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", third), ("b", third), ("<eos>", third)])
            .unwrap()
            .build()
            .unwrap();
        let ranking = enumerate_oracle(&m, &utt(), LengthTag::Normal, 2).unwrap();
        // "eos", "a eos", "b eos"
        assert_eq!(ranking.hypotheses.len(), 3);
        let forms: Vec<Vec<u32>> = ranking.hypotheses.iter().map(|h| h.tokens.clone()).collect();
        assert!(forms.contains(&vec![2, 0]));
        assert!(forms.contains(&vec![2, 4, 0]));
        assert!(forms.contains(&vec![2, 5, 0]));
        // the single-step completion scores highest: ln(1/3) > 2 ln(1/3)
        assert_eq!(ranking.best().unwrap().tokens, vec![2, 0]);
    }

    #[test]
    fn cap_is_enforced() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("<eos>", 1.0)])
            .unwrap()
            .build()
            .unwrap();
        let err = enumerate_oracle_capped(&m, &utt(), LengthTag::Short, 40, 100).unwrap_err();
        assert!(matches!(err, DecodeError::OracleCapExceeded { .. }));
    }

    #[test]
    fn exhaustive_beam_matches_oracle_ranking_exactly() {
        // peaked distributions so rankings are nontrivial
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.5), ("b", 0.3), ("<eos>", 0.2)])
            .unwrap()
            .context_all_tags(&["a"], &[("b", 0.6), ("<eos>", 0.4)])
            .unwrap()
            .context_all_tags(&["b"], &[("<eos>", 0.7), ("a", 0.3)])
            .unwrap()
            .build()
            .unwrap();
        let u = utt();
        let max_len = 5;
        // beam large enough that no incomplete candidate is ever dropped:
        // 3 tags x 2^4 live prefixes, plus slack
        let cfg = BeamConfig::new(256, 1, max_len, LengthTag::ALL.to_vec())
            .unwrap()
            .with_early_stop(false);
        let result = labs_decode(&m, &u, &cfg).unwrap();
        for tag in LengthTag::ALL {
            let oracle = enumerate_oracle(&m, &u, tag, max_len).unwrap();
            let beam = &result.for_tag(tag).unwrap().hypotheses;
            assert_eq!(beam.len(), oracle.hypotheses.len());
            for (b, o) in beam.iter().zip(&oracle.hypotheses) {
                assert_eq!(b.tokens, o.tokens);
                assert_eq!(b.score, o.score);
            }
        }
    }

    #[test]
    fn wide_standard_beam_matches_oracle_argmax() {
        let m = TableModel::builder(vocab(), 1)
            .default_dist(&[("a", 0.45), ("b", 0.3), ("<eos>", 0.25)])
            .unwrap()
            .context_all_tags(&["b"], &[("<eos>", 0.8), ("a", 0.2)])
            .unwrap()
            .build()
            .unwrap();
        let u = utt();
        let oracle = enumerate_oracle(&m, &u, LengthTag::Long, 4).unwrap();
        // width >= |V|^T guarantees nothing is pruned
        let result = standard_beam_decode(&m, &u, LengthTag::Long, 81, 4).unwrap();
        let best = &result.entries[0].hypotheses[0];
        assert_eq!(best.tokens, oracle.best().unwrap().tokens);
        assert_eq!(best.score, oracle.best().unwrap().score);
    }
}
