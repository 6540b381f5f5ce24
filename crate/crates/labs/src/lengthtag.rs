//! Grapheme-to-phoneme conversion, length-unit counting, and length-tag
//! assignment for corpus annotation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::LengthTag;

#[derive(Debug, Error)]
pub enum LengthTagError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("no grapheme fallback rule for character {0:?}")]
    NoRuleForChar(char),
    #[error("lexicon entry for {0:?} has an empty phoneme sequence")]
    EmptyLexiconEntry(String),
    #[error("lexicon file line {line}: {reason}")]
    LexiconFormat { line: usize, reason: String },
    #[error("unit counts must be >= 1 (src={src}, tgt={tgt})")]
    ZeroCount { src: usize, tgt: usize },
    #[error("alpha must lie strictly between 0 and 1 (got {0})")]
    BadAlpha(f64),
    #[error("phoneme mode requires a lexicon for both sides")]
    MissingLexicon,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which unit the length ratio is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Phoneme,
    Character,
}

impl UnitKind {
    pub fn label(self) -> &'static str {
        match self {
            UnitKind::Phoneme => "phoneme",
            UnitKind::Character => "character",
        }
    }
}

/// Word-to-phoneme lexicon with letter-level fallback rules for words the
/// lexicon does not list.
#[derive(Debug, Clone, Default)]
pub struct G2PLexicon {
    entries: BTreeMap<String, Vec<String>>,
    fallback: BTreeMap<char, Vec<String>>,
}

impl G2PLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a word entry. Words are stored lowercased.
    pub fn insert(&mut self, word: &str, phonemes: Vec<String>) -> Result<(), LengthTagError> {
        if phonemes.is_empty() {
            return Err(LengthTagError::EmptyLexiconEntry(word.to_string()));
        }
        self.entries.insert(word.to_lowercase(), phonemes);
        Ok(())
    }

    /// Add a letter-to-phoneme fallback rule.
    pub fn insert_rule(&mut self, letter: char, phonemes: Vec<String>) -> Result<(), LengthTagError> {
        if phonemes.is_empty() {
            return Err(LengthTagError::EmptyLexiconEntry(letter.to_string()));
        }
        self.fallback
            .insert(letter.to_lowercase().next().unwrap_or(letter), phonemes);
        Ok(())
    }

    pub fn lookup(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Parse entries from TSV: `word<TAB>phoneme phoneme ...`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_entries(&mut self, tsv: &str) -> Result<(), LengthTagError> {
        for (i, line) in tsv.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, phonemes) =
                line.split_once('\t')
                    .ok_or_else(|| LengthTagError::LexiconFormat {
                        line: i + 1,
                        reason: "expected 'word<TAB>phonemes'".into(),
                    })?;
            let seq: Vec<String> = phonemes.split_whitespace().map(str::to_string).collect();
            if seq.is_empty() {
                return Err(LengthTagError::LexiconFormat {
                    line: i + 1,
                    reason: format!("no phonemes for {word:?}"),
                });
            }
            self.insert(word, seq)?;
        }
        Ok(())
    }

    /// Parse fallback rules from TSV: `letter<TAB>phoneme phoneme ...`.
    pub fn parse_rules(&mut self, tsv: &str) -> Result<(), LengthTagError> {
        for (i, line) in tsv.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (letter, phonemes) =
                line.split_once('\t')
                    .ok_or_else(|| LengthTagError::LexiconFormat {
                        line: i + 1,
                        reason: "expected 'letter<TAB>phonemes'".into(),
                    })?;
            let mut chars = letter.chars();
            let (c, rest) = (chars.next(), chars.next());
            let c = match (c, rest) {
                (Some(c), None) => c,
                _ => {
                    return Err(LengthTagError::LexiconFormat {
                        line: i + 1,
                        reason: format!("rule key {letter:?} must be a single character"),
                    })
                }
            };
            let seq: Vec<String> = phonemes.split_whitespace().map(str::to_string).collect();
            if seq.is_empty() {
                return Err(LengthTagError::LexiconFormat {
                    line: i + 1,
                    reason: format!("no phonemes for rule {letter:?}"),
                });
            }
            self.insert_rule(c, seq)?;
        }
        Ok(())
    }

    pub fn load(entries_path: &Path, rules_path: Option<&Path>) -> Result<Self, LengthTagError> {
        let mut lex = Self::new();
        lex.parse_entries(&std::fs::read_to_string(entries_path)?)?;
        if let Some(p) = rules_path {
            lex.parse_rules(&std::fs::read_to_string(p)?)?;
        }
        Ok(lex)
    }

    /// Word entries as TSV, sorted by word.
    pub fn entries_tsv(&self) -> String {
        let mut out = String::new();
        for (word, phonemes) in &self.entries {
            out.push_str(word);
            out.push('\t');
            out.push_str(&phonemes.join(" "));
            out.push('\n');
        }
        out
    }

    /// Fallback rules as TSV, sorted by letter.
    pub fn rules_tsv(&self) -> String {
        let mut out = String::new();
        for (letter, phonemes) in &self.fallback {
            out.push(*letter);
            out.push('\t');
            out.push_str(&phonemes.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Lowercase and strip punctuation: characters that are neither alphanumeric
/// nor whitespace are removed. Declared normalization for all unit counting.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect()
}

/// Convert text to a phoneme sequence: lexicon hit per word, else the
/// letter fallback rules.
pub fn g2p(lexicon: &G2PLexicon, text: &str) -> Result<Vec<String>, LengthTagError> {
    let normalized = normalize(text);
    let mut out = Vec::new();
    let mut saw_word = false;
    for word in normalized.split_whitespace() {
        saw_word = true;
        if let Some(seq) = lexicon.lookup(word) {
            out.extend_from_slice(seq);
        } else {
            for c in word.chars() {
                let seq = lexicon
                    .fallback
                    .get(&c)
                    .ok_or(LengthTagError::NoRuleForChar(c))?;
                out.extend_from_slice(seq);
            }
        }
    }
    if !saw_word {
        return Err(LengthTagError::EmptyText);
    }
    Ok(out)
}

/// Length of `text` in the requested unit. Phoneme mode counts `g2p` output;
/// character mode counts non-whitespace characters after normalization.
pub fn count_units(
    text: &str,
    unit: UnitKind,
    lexicon: Option<&G2PLexicon>,
) -> Result<usize, LengthTagError> {
    match unit {
        UnitKind::Phoneme => {
            let lex = lexicon.ok_or(LengthTagError::MissingLexicon)?;
            Ok(g2p(lex, text)?.len())
        }
        UnitKind::Character => {
            let normalized = normalize(text);
            let n = normalized.chars().filter(|c| !c.is_whitespace()).count();
            if n == 0 {
                return Err(LengthTagError::EmptyText);
            }
            Ok(n)
        }
    }
}

/// Length ratio and tag for a source/target unit-count pair.
///
/// `r = tgt / src`; the tag is short when `r < 1 - alpha`, long when
/// `r > 1 + alpha`, and normal on the closed band in between (both
/// boundaries inclusive to normal).
pub fn assign_tag(
    src_units: usize,
    tgt_units: usize,
    alpha: f64,
) -> Result<(f64, LengthTag), LengthTagError> {
    if src_units == 0 || tgt_units == 0 {
        return Err(LengthTagError::ZeroCount {
            src: src_units,
            tgt: tgt_units,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LengthTagError::BadAlpha(alpha));
    }
    let r = tgt_units as f64 / src_units as f64;
    let tag = if r < 1.0 - alpha {
        LengthTag::Short
    } else if r <= 1.0 + alpha {
        LengthTag::Normal
    } else {
        LengthTag::Long
    };
    Ok((r, tag))
}

/// A source/target pair annotated with its length ratio and tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedExample {
    pub source: String,
    pub target: String,
    pub src_units: usize,
    pub tgt_units: usize,
    pub ratio: f64,
    pub tag: LengthTag,
    pub unit: UnitKind,
}

/// One pair that could not be annotated, with its input position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFailure {
    pub index: usize,
    pub reason: String,
}

/// Per-tag counts and a ratio histogram over the annotated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagReport {
    pub unit: UnitKind,
    pub alpha: f64,
    pub total: usize,
    pub failed: usize,
    pub short: usize,
    pub normal: usize,
    pub long: usize,
    /// Histogram of r in 0.1-wide bins over [0, 2), plus an overflow bin.
    pub ratio_histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub label: String,
    pub count: usize,
}

impl TagReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "annotated {} pairs ({} failed), unit={}, alpha={}\n",
            self.total,
            self.failed,
            self.unit.label(),
            self.alpha
        ));
        s.push_str(&format!(
            "tags: short={} normal={} long={}\n",
            self.short, self.normal, self.long
        ));
        s.push_str("ratio histogram:\n");
        for bin in &self.ratio_histogram {
            if bin.count > 0 {
                s.push_str(&format!("  {:>10}  {}\n", bin.label, bin.count));
            }
        }
        s
    }
}

/// Result of annotating a pair list; order of `examples` follows the input
/// with failed pairs left out (and listed in `failures`).
#[derive(Debug, Clone)]
pub struct AnnotationOutcome {
    pub examples: Vec<TaggedExample>,
    pub failures: Vec<PairFailure>,
    pub report: TagReport,
}

/// Annotate source/target pairs with Length tags. Per-pair failures are
/// recorded and the run continues.
pub fn annotate_corpus(
    pairs: &[(String, String)],
    unit: UnitKind,
    alpha: f64,
    src_lexicon: Option<&G2PLexicon>,
    tgt_lexicon: Option<&G2PLexicon>,
) -> Result<AnnotationOutcome, LengthTagError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LengthTagError::BadAlpha(alpha));
    }
    if unit == UnitKind::Phoneme && (src_lexicon.is_none() || tgt_lexicon.is_none()) {
        return Err(LengthTagError::MissingLexicon);
    }
    let mut examples = Vec::new();
    let mut failures = Vec::new();
    for (index, (source, target)) in pairs.iter().enumerate() {
        let annotated = (|| -> Result<TaggedExample, LengthTagError> {
            let src_units = count_units(source, unit, src_lexicon)?;
            let tgt_units = count_units(target, unit, tgt_lexicon)?;
            let (ratio, tag) = assign_tag(src_units, tgt_units, alpha)?;
            Ok(TaggedExample {
                source: source.clone(),
                target: target.clone(),
                src_units,
                tgt_units,
                ratio,
                tag,
                unit,
            })
        })();
        match annotated {
            Ok(ex) => examples.push(ex),
            Err(e) => failures.push(PairFailure {
                index,
                reason: e.to_string(),
            }),
        }
    }
    let report = build_report(&examples, failures.len(), unit, alpha);
    Ok(AnnotationOutcome {
        examples,
        failures,
        report,
    })
}

fn build_report(
    examples: &[TaggedExample],
    failed: usize,
    unit: UnitKind,
    alpha: f64,
) -> TagReport {
    let mut bins: Vec<HistogramBin> = (0..20)
        .map(|i| HistogramBin {
            label: format!("[{:.1},{:.1})", i as f64 / 10.0, (i + 1) as f64 / 10.0),
            count: 0,
        })
        .collect();
    bins.push(HistogramBin {
        label: ">=2.0".into(),
        count: 0,
    });
    let mut short = 0;
    let mut normal = 0;
    let mut long = 0;
    for ex in examples {
        match ex.tag {
            LengthTag::Short => short += 1,
            LengthTag::Normal => normal += 1,
            LengthTag::Long => long += 1,
        }
        let idx = if ex.ratio >= 2.0 {
            20
        } else {
            (ex.ratio * 10.0).floor() as usize
        };
        bins[idx].count += 1;
    }
    TagReport {
        unit,
        alpha,
        total: examples.len() + failed,
        failed,
        short,
        normal,
        long,
        ratio_histogram: bins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat_lexicon() -> G2PLexicon {
        let mut lex = G2PLexicon::new();
        lex.insert("cat", vec!["K".into(), "AE".into(), "T".into()])
            .unwrap();
        lex.insert_rule('z', vec!["Z".into()]).unwrap();
        lex.insert_rule('b', vec!["B".into()]).unwrap();
        lex
    }

    #[test]
    fn g2p_lexicon_hit() {
        let lex = cat_lexicon();
        assert_eq!(g2p(&lex, "cat").unwrap(), vec!["K", "AE", "T"]);
    }

    #[test]
    fn g2p_concatenates_words() {
        let lex = cat_lexicon();
        assert_eq!(
            g2p(&lex, "cat cat").unwrap(),
            vec!["K", "AE", "T", "K", "AE", "T"]
        );
    }

    #[test]
    fn g2p_fallback_rules_apply_per_letter() {
        let lex = cat_lexicon();
        assert_eq!(g2p(&lex, "zb").unwrap(), vec!["Z", "B"]);
    }

    #[test]
    fn g2p_unknown_letter_is_an_error() {
        let lex = cat_lexicon();
        assert!(matches!(
            g2p(&lex, "qq"),
            Err(LengthTagError::NoRuleForChar('q'))
        ));
    }

    #[test]
    fn g2p_empty_after_normalization_is_an_error() {
        let lex = cat_lexicon();
        assert!(matches!(g2p(&lex, "  ?! "), Err(LengthTagError::EmptyText)));
    }

    #[test]
    fn g2p_is_case_insensitive_and_strips_punctuation() {
        let lex = cat_lexicon();
        assert_eq!(g2p(&lex, "Cat!").unwrap(), vec!["K", "AE", "T"]);
    }

    #[test]
    fn count_units_phoneme_matches_g2p() {
        let lex = cat_lexicon();
        assert_eq!(
            count_units("cat", UnitKind::Phoneme, Some(&lex)).unwrap(),
            3
        );
    }

    #[test]
    fn count_units_character_excludes_whitespace() {
        assert_eq!(count_units("a b", UnitKind::Character, None).unwrap(), 2);
    }

    #[test]
    fn count_units_additive_over_concatenation() {
        let lex = cat_lexicon();
        let a = count_units("cat", UnitKind::Phoneme, Some(&lex)).unwrap();
        let b = count_units("zb", UnitKind::Phoneme, Some(&lex)).unwrap();
        let joined = count_units("cat zb", UnitKind::Phoneme, Some(&lex)).unwrap();
        assert_eq!(joined, a + b);
    }

    #[test]
    fn assign_tag_boundary_cases() {
        assert_eq!(assign_tag(10, 9, 0.1).unwrap(), (0.9, LengthTag::Normal));
        assert_eq!(assign_tag(10, 8, 0.1).unwrap().1, LengthTag::Short);
        assert_eq!(assign_tag(8, 10, 0.1).unwrap(), (1.25, LengthTag::Long));
        assert_eq!(assign_tag(10, 11, 0.1).unwrap().1, LengthTag::Normal);
    }

    #[test]
    fn assign_tag_rejects_bad_inputs() {
        assert!(matches!(
            assign_tag(0, 5, 0.1),
            Err(LengthTagError::ZeroCount { .. })
        ));
        assert!(matches!(
            assign_tag(5, 5, 0.0),
            Err(LengthTagError::BadAlpha(_))
        ));
        assert!(matches!(
            assign_tag(5, 5, 1.0),
            Err(LengthTagError::BadAlpha(_))
        ));
    }

    #[test]
    fn annotate_hits_every_branch() {
        let pairs = vec![
            ("aaaa aaaa aa".to_string(), "aaaa aaaa".to_string()), // 10 -> 8: short
            ("aaaa aaaa aa".to_string(), "aaaa aaaa a".to_string()), // 10 -> 9: normal
            ("aaaa aaaa".to_string(), "aaaa aaaa aa".to_string()), // 8 -> 10: long
        ];
        let out = annotate_corpus(&pairs, UnitKind::Character, 0.1, None, None).unwrap();
        assert_eq!(out.failures.len(), 0);
        let tags: Vec<LengthTag> = out.examples.iter().map(|e| e.tag).collect();
        assert_eq!(
            tags,
            vec![LengthTag::Short, LengthTag::Normal, LengthTag::Long]
        );
        assert_eq!(
            (out.report.short, out.report.normal, out.report.long),
            (1, 1, 1)
        );
    }

    #[test]
    fn annotate_identity_pair_is_normal() {
        let pairs = vec![("same text".to_string(), "same text".to_string())];
        let out = annotate_corpus(&pairs, UnitKind::Character, 0.1, None, None).unwrap();
        assert_eq!(out.examples[0].ratio, 1.0);
        assert_eq!(out.examples[0].tag, LengthTag::Normal);
    }

    #[test]
    fn annotate_records_failures_and_continues() {
        let pairs = vec![
            ("good".to_string(), "good".to_string()),
            ("!!".to_string(), "bad".to_string()),
            ("also good".to_string(), "also good".to_string()),
        ];
        let out = annotate_corpus(&pairs, UnitKind::Character, 0.1, None, None).unwrap();
        assert_eq!(out.examples.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].index, 1);
        assert_eq!(out.report.total, 3);
        assert_eq!(out.report.failed, 1);
    }

    // Character and phoneme modes can assign different tags to the same
    // pair. Source "ab" and target "xy": characters give r = 1 (normal);
    // with a one-phoneme source alphabet and a lexicon mapping "xy" to four
    // phonemes, phonemes give r = 4/2 = 2 (long). Counts by hand: src
    // chars 2, tgt chars 2; src phonemes 2, tgt phonemes 4.
    #[test]
    fn unit_choice_changes_the_tag() {
        let mut src_lex = G2PLexicon::new();
        src_lex.insert_rule('a', vec!["A".into()]).unwrap();
        src_lex.insert_rule('b', vec!["B".into()]).unwrap();
        let mut tgt_lex = G2PLexicon::new();
        tgt_lex
            .insert("xy", vec!["K".into(), "S".into(), "IY".into(), "W".into()])
            .unwrap();

        let pairs = vec![("ab".to_string(), "xy".to_string())];
        let by_char = annotate_corpus(&pairs, UnitKind::Character, 0.1, None, None).unwrap();
        assert_eq!(by_char.examples[0].tag, LengthTag::Normal);
        assert_eq!(by_char.examples[0].ratio, 1.0);

        let by_phoneme = annotate_corpus(
            &pairs,
            UnitKind::Phoneme,
            0.1,
            Some(&src_lex),
            Some(&tgt_lex),
        )
        .unwrap();
        assert_eq!(by_phoneme.examples[0].tag, LengthTag::Long);
        assert_eq!(by_phoneme.examples[0].ratio, 2.0);
    }

    #[test]
    fn lexicon_tsv_round_trip() {
        let mut lex = G2PLexicon::new();
        lex.parse_entries("cat\tK AE T\n# comment\ndog\tD AO G\n")
            .unwrap();
        lex.parse_rules("z\tZ\n").unwrap();
        assert_eq!(lex.lookup("cat").unwrap(), &["K", "AE", "T"]);
        assert_eq!(g2p(&lex, "z").unwrap(), vec!["Z"]);
        assert!(lex.parse_entries("nodelimiter\n").is_err());
        assert!(lex.parse_rules("ab\tX\n").is_err());
    }
}
