//! Seeded synthetic models and corpora for experiments and verification:
//! random table models for decoder stress tests, and a dubbing-style corpus
//! whose tags correlate with target length.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{LengthTag, SourceUtterance, Vocabulary};
use crate::duration::DurationProfile;
use crate::lengthtag::{assign_tag, G2PLexicon, TaggedExample, UnitKind};
use crate::scoring::TableModel;

const REGULAR_NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// Random table model over `regular_tokens` expandable tokens (2..=4) plus
/// EOS, with one explicit distribution per (tag, last token) context.
/// Distribution supports are sparse at random, so some tags may be unable
/// to complete within a small length budget.
pub fn random_table_model<R: Rng>(rng: &mut R, regular_tokens: usize) -> TableModel {
    assert!(
        (2..=REGULAR_NAMES.len()).contains(&regular_tokens),
        "regular_tokens must be in 2..=4"
    );
    let names = &REGULAR_NAMES[..regular_tokens];
    let vocab = Vocabulary::with_default_specials(names.iter().copied()).unwrap();

    let mut choices: Vec<&str> = vec!["<eos>"];
    choices.extend(names.iter().copied());

    let random_dist = |rng: &mut R| -> Vec<(&str, f64)> {
        let mut picked: Vec<&str> = choices
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.65))
            .collect();
        if picked.is_empty() {
            let i = rng.random_range(0..choices.len());
            picked.push(choices[i]);
        }
        let weights: Vec<f64> = picked.iter().map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = weights.iter().sum();
        picked
            .into_iter()
            .zip(weights)
            .map(|(t, w)| (t, w / total))
            .collect()
    };

    let mut builder = TableModel::builder(vocab, 1)
        .default_dist(&random_dist(rng))
        .unwrap();
    for tag in LengthTag::ALL {
        let tag_name = match tag {
            LengthTag::Short => "<short>",
            LengthTag::Normal => "<normal>",
            LengthTag::Long => "<long>",
        };
        builder = builder
            .context(tag, &[tag_name], &random_dist(rng))
            .unwrap();
        for &t in names {
            builder = builder.context(tag, &[t], &random_dist(rng)).unwrap();
        }
    }
    builder.build().unwrap()
}

/// Convenience: a seeded instance of [`random_table_model`].
pub fn seeded_table_model(seed: u64, regular_tokens: usize) -> TableModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_table_model(&mut rng, regular_tokens)
}

/// Shape of a synthetic dubbing corpus.
#[derive(Debug, Clone)]
pub struct DubbingParams {
    pub train_pairs: usize,
    pub eval_utterances: usize,
    /// Source lengths are drawn uniformly from this inclusive range.
    pub min_src_phonemes: usize,
    pub max_src_phonemes: usize,
}

impl Default for DubbingParams {
    fn default() -> Self {
        Self {
            train_pairs: 600,
            eval_utterances: 200,
            min_src_phonemes: 6,
            max_src_phonemes: 14,
        }
    }
}

/// A complete synthetic setup: parallel text, its annotation, evaluation
/// utterances with reference durations from the profile, and the lexicons
/// the pipeline needs.
#[derive(Debug, Clone)]
pub struct DubbingCorpus {
    /// Raw (source, target) text pairs, ready for annotation.
    pub pairs: Vec<(String, String)>,
    /// The same pairs annotated with Eq-consistent tags.
    pub examples: Vec<TaggedExample>,
    /// Held-out utterances with silence-trimmed reference durations.
    pub eval: Vec<SourceUtterance>,
    pub src_lexicon: G2PLexicon,
    pub tgt_lexicon: G2PLexicon,
    pub profile: DurationProfile,
    /// Source-length bucket edges matched to the corpus length range.
    pub bucket_edges: Vec<usize>,
}

fn tag_letter(tag: LengthTag) -> char {
    match tag {
        LengthTag::Short => 's',
        LengthTag::Normal => 'n',
        LengthTag::Long => 'l',
    }
}

fn chain_text(bucket: usize, tag: LengthTag, len: usize) -> String {
    (1..=len)
        .map(|j| format!("u{bucket}{}{j}", tag_letter(tag)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bucket_of(edges: &[usize], len: usize) -> usize {
    edges.partition_point(|&e| e <= len)
}

/// Build a corpus where tags correlate with target length: every pair draws
/// a target/source ratio around 0.8x (short), 1.0x (normal), or 1.2x (long)
/// and the tag follows from the actual phoneme counts. Target sentences are
/// word chains specific to each (source bucket, tag) group, so an n-gram
/// can learn group-typical lengths. Deterministic for a fixed seed.
pub fn dubbing_corpus(params: &DubbingParams, seed: u64) -> DubbingCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = params.max_src_phonemes - params.min_src_phonemes;
    let lo = params.min_src_phonemes + span.div_ceil(3);
    let hi = params.min_src_phonemes + 2 * span.div_ceil(3);
    let bucket_edges = vec![lo, hi];

    let draw_pair = |rng: &mut ChaCha8Rng| -> (usize, usize, LengthTag, usize) {
        let m = rng.random_range(params.min_src_phonemes..=params.max_src_phonemes);
        let rho: f64 = rng.random_range(0.68..1.38);
        let k = ((rho * m as f64).round() as usize).max(1);
        let (_, tag) = assign_tag(m, k, 0.1).expect("counts are positive");
        (m, k, tag, bucket_of(&bucket_edges, m))
    };

    let mut pairs = Vec::with_capacity(params.train_pairs);
    let mut examples = Vec::with_capacity(params.train_pairs);
    for _ in 0..params.train_pairs {
        let (m, k, tag, bucket) = draw_pair(&mut rng);
        let source = vec!["s"; m].join(" ");
        let target = chain_text(bucket, tag, k);
        pairs.push((source.clone(), target.clone()));
        examples.push(TaggedExample {
            source,
            target,
            src_units: m,
            tgt_units: k,
            ratio: k as f64 / m as f64,
            tag,
            unit: UnitKind::Phoneme,
        });
    }

    let mut phoneme_ms = BTreeMap::new();
    phoneme_ms.insert("S".to_string(), 100.0);
    phoneme_ms.insert("P".to_string(), 100.0);
    let profile = DurationProfile::new("synthetic-voice", phoneme_ms, 0.0).unwrap();

    let mut eval = Vec::with_capacity(params.eval_utterances);
    for i in 0..params.eval_utterances {
        let (m, k, tag, bucket) = draw_pair(&mut rng);
        let phonemes = vec!["S".to_string(); m];
        let ref_duration_s = profile.duration_of(&phonemes).unwrap();
        eval.push(SourceUtterance {
            id: format!("utt-{i:04}"),
            phonemes,
            ref_duration_s,
            reference: Some(chain_text(bucket, tag, k)),
        });
    }

    let mut src_lexicon = G2PLexicon::new();
    src_lexicon.insert("s", vec!["S".into()]).unwrap();
    let mut tgt_lexicon = G2PLexicon::new();
    let max_k = (1.38 * params.max_src_phonemes as f64).round() as usize + 1;
    for bucket in 0..=bucket_edges.len() {
        for tag in LengthTag::ALL {
            for j in 1..=max_k {
                let word = format!("u{bucket}{}{j}", tag_letter(tag));
                tgt_lexicon.insert(&word, vec!["P".into()]).unwrap();
            }
        }
    }

    DubbingCorpus {
        pairs,
        examples,
        eval,
        src_lexicon,
        tgt_lexicon,
        profile,
        bucket_edges,
    }
}
