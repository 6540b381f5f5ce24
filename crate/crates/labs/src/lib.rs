//! Length-aware beam search and dubbing-alignment evaluation.
//!
//! This crate decodes short, normal, and long translation variants in a
//! single beam-search pass over a pluggable scoring model, estimates the
//! spoken duration of each hypothesis without synthesizing audio, selects
//! the variant closest to the source-audio duration, and scores the result
//! with speech-rate compliance, length-ratio, and BLEU metrics plus a
//! single-pass vs. multi-pass latency bench.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```text
//! cargo run --release -p labs --example annotate        # length-tag a corpus
//! cargo run --release -p labs --example train_ngram     # fit the n-gram model
//! cargo run --release -p labs --example decode_labs     # one pass, all lengths
//! cargo run --release -p labs --example oracle_check    # beam vs. brute force
//! cargo run --release -p labs --example select_duration # duration-matched pick
//! cargo run --release -p labs --example evaluate        # SRC / LR / BLEU
//! cargo run --release -p labs --example bench_latency   # one pass vs. three
//! cargo run --release -p labs --example full_pipeline   # everything end to end
//! ```
//!
//! The same steps are scriptable through the thin `labs` binary
//! (`labs annotate | train-ngram | decode | select | evaluate | bench`).

pub mod cli;
pub mod core;
pub mod decode;
pub mod duration;
pub mod lengthtag;
pub mod metrics;
pub mod scoring;
pub mod synth;

pub use core::{
    DecodeResult, Hypothesis, LengthTag, PerTag, SourceUtterance, TagResult, TagStatus, TokenId,
    Vocabulary,
};
pub use decode::{
    enumerate_oracle, labs_decode, standard_beam_decode, BeamConfig, DecodeError, DecodeRecord,
};
pub use duration::{estimate_duration, select_hypothesis, DurationProfile, Selection, SelectionPolicy};
pub use lengthtag::{annotate_corpus, assign_tag, count_units, g2p, G2PLexicon, TaggedExample, UnitKind};
pub use metrics::{corpus_bleu, latency_bench, length_ratio, src_metric, BenchReport, EvalReport};
pub use scoring::{train_ngram, NGramConfig, NGramModel, ScoringModel, TableModel, LOG_ZERO};
