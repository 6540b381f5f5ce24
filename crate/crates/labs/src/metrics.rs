//! Evaluation metrics (speech-rate compliance, length ratio, corpus BLEU)
//! and the single-pass vs. multi-pass latency bench.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{LengthTag, SourceUtterance};
use crate::decode::{labs_decode, standard_beam_decode, BeamConfig, DecodeError};
use crate::scoring::{CountingModel, ScoringModel};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric input is empty")]
    EmptyInput,
    #[error("hypothesis and reference lists differ in length ({hyps} vs {refs})")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("epsilon must lie strictly between 0 and 1 (got {0})")]
    BadEpsilon(f64),
    #[error("durations must be > 0 (row {0})")]
    BadDuration(usize),
    #[error("bench needs repeats >= 3 (got {0})")]
    TooFewRepeats(usize),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Percentage of rows whose hypothesis/reference duration ratio deviates
/// from 1 by at most `epsilon` (boundary inclusive).
pub fn src_metric(rows: &[(f64, f64)], epsilon: f64) -> Result<f64, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MetricsError::BadEpsilon(epsilon));
    }
    let mut compliant = 0usize;
    for (i, &(reference, hypothesis)) in rows.iter().enumerate() {
        if !(reference > 0.0 && hypothesis > 0.0) {
            return Err(MetricsError::BadDuration(i));
        }
        if (hypothesis / reference - 1.0).abs() <= epsilon {
            compliant += 1;
        }
    }
    Ok(100.0 * compliant as f64 / rows.len() as f64)
}

/// Corpus-level length ratio: total hypothesis tokens over total reference
/// tokens.
pub fn length_ratio<T, U>(hyps: &[Vec<T>], refs: &[Vec<U>]) -> Result<f64, MetricsError> {
    if hyps.is_empty() || refs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    let hyp_total: usize = hyps.iter().map(Vec::len).sum();
    let ref_total: usize = refs.iter().map(Vec::len).sum();
    if ref_total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(hyp_total as f64 / ref_total as f64)
}

/// BLEU tokenizer: every character that is neither alphanumeric nor
/// whitespace becomes its own token; the rest splits on whitespace. No case
/// folding.
pub fn bleu_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 with brevity penalty: the geometric mean of modified
/// n-gram precisions for n = 1..4, with add-one smoothing on n >= 2.
/// A zero unigram precision yields 0.
pub fn corpus_bleu(hyps: &[String], refs: &[String]) -> Result<f64, MetricsError> {
    if hyps.is_empty() || refs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    const MAX_N: usize = 4;
    let mut matches = [0u64; MAX_N];
    let mut totals = [0u64; MAX_N];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in hyps.iter().zip(refs) {
        let hyp_tokens = bleu_tokenize(hyp);
        let ref_tokens = bleu_tokenize(reference);
        hyp_len += hyp_tokens.len() as u64;
        ref_len += ref_tokens.len() as u64;
        for n in 1..=MAX_N {
            let hyp_ngrams = ngram_counts(&hyp_tokens, n);
            let ref_ngrams = ngram_counts(&ref_tokens, n);
            for (gram, &count) in &hyp_ngrams {
                totals[n - 1] += count;
                let clip = ref_ngrams.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
        }
    }
    if hyp_len == 0 || totals[0] == 0 {
        return Ok(0.0);
    }
    let p1 = matches[0] as f64 / totals[0] as f64;
    if p1 == 0.0 {
        return Ok(0.0);
    }
    let mut log_sum = p1.ln();
    for n in 2..=MAX_N {
        // add-one smoothing for the higher orders
        let p = (matches[n - 1] + 1) as f64 / (totals[n - 1] + 1) as f64;
        log_sum += p.ln();
    }
    let geometric_mean = (log_sum / MAX_N as f64).exp();
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * geometric_mean)
}

/// Per-utterance evaluation row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub ratio: f64,
    pub compliant: bool,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
}

/// Corpus-level evaluation report; every aggregate is recomputable from the
/// per-utterance rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub epsilon: f64,
    pub unit: String,
    pub utterances: usize,
    pub src_percent: f64,
    /// Corpus length ratio over BLEU-tokenized texts; absent when no
    /// references were available.
    pub length_ratio: Option<f64>,
    pub bleu: Option<f64>,
    /// Utterances skipped by BLEU/LR because they had no reference.
    pub missing_references: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "utterances: {}  (epsilon={}, unit={})\n",
            self.utterances, self.epsilon, self.unit
        ));
        s.push_str(&format!("SRC: {:.2}%\n", self.src_percent));
        match self.length_ratio {
            Some(lr) => s.push_str(&format!("length ratio: {lr:.4}\n")),
            None => s.push_str("length ratio: n/a (no references)\n"),
        }
        match self.bleu {
            Some(b) => s.push_str(&format!("BLEU: {b:.2}\n")),
            None => s.push_str("BLEU: n/a (no references)\n"),
        }
        if self.missing_references > 0 {
            s.push_str(&format!(
                "missing references: {}\n",
                self.missing_references
            ));
        }
        s
    }
}

/// Wall-time and query-count samples for one bench configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfigReport {
    pub name: String,
    /// Total wall time per repeat, seconds.
    pub samples_s: Vec<f64>,
    pub median_s_per_utt: f64,
    pub mean_s_per_utt: f64,
    /// Scoring-model queries issued by one pass over all inputs.
    pub model_queries: u64,
}

/// Latency comparison of one multi-length pass against single-tag passes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub beam_size: usize,
    pub per_tag: usize,
    pub max_len: usize,
    pub single_width: usize,
    pub repeats: usize,
    pub utterances: usize,
    pub configurations: Vec<BenchConfigReport>,
}

impl BenchReport {
    pub fn configuration(&self, name: &str) -> Option<&BenchConfigReport> {
        self.configurations.iter().find(|c| c.name == name)
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "latency bench: N={} g={} T={} single-pass width={} over {} utterances, {} timed repeats\n",
            self.beam_size, self.per_tag, self.max_len, self.single_width, self.utterances, self.repeats
        );
        s.push_str(&format!(
            "{:<14} {:>14} {:>14} {:>12}\n",
            "configuration", "median s/utt", "mean s/utt", "queries"
        ));
        for c in &self.configurations {
            s.push_str(&format!(
                "{:<14} {:>14.6} {:>14.6} {:>12}\n",
                c.name, c.median_s_per_utt, c.mean_s_per_utt, c.model_queries
            ));
        }
        s
    }
}

fn median(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Time one multi-length pass (at `cfg`) against (a) three sequential
/// single-tag passes at width `ceil(N/3)` and (b) one single-tag pass at
/// that width, on identical inputs.
///
/// Each configuration runs one untimed warm-up pass (during which its model
/// queries are counted) followed by `repeats` timed passes; all passes run
/// sequentially on one thread.
pub fn latency_bench(
    model: &dyn ScoringModel,
    inputs: &[SourceUtterance],
    cfg: &BeamConfig,
    repeats: usize,
) -> Result<BenchReport, MetricsError> {
    if inputs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if repeats < 3 {
        return Err(MetricsError::TooFewRepeats(repeats));
    }
    let single_width = cfg.beam_size.div_ceil(3);

    let run_labs = |m: &dyn ScoringModel| -> Result<(), MetricsError> {
        for src in inputs {
            labs_decode(m, src, cfg)?;
        }
        Ok(())
    };
    let run_three = |m: &dyn ScoringModel| -> Result<(), MetricsError> {
        for src in inputs {
            for tag in LengthTag::ALL {
                standard_beam_decode(m, src, tag, single_width, cfg.max_len)?;
            }
        }
        Ok(())
    };
    let run_single = |m: &dyn ScoringModel| -> Result<(), MetricsError> {
        for src in inputs {
            standard_beam_decode(m, src, LengthTag::Normal, single_width, cfg.max_len)?;
        }
        Ok(())
    };

    let mut configurations = Vec::new();
    let runners: [(&str, &dyn Fn(&dyn ScoringModel) -> Result<(), MetricsError>); 3] = [
        ("labs", &run_labs),
        ("three-pass", &run_three),
        ("single-pass", &run_single),
    ];
    for (name, run) in runners {
        let counting = CountingModel::new(model);
        run(&counting)?; // warm-up, also fixes the query count
        let model_queries = counting.queries();
        let mut samples_s = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            run(model)?;
            samples_s.push(start.elapsed().as_secs_f64());
        }
        let per_utt: Vec<f64> = samples_s.iter().map(|s| s / inputs.len() as f64).collect();
        configurations.push(BenchConfigReport {
            name: name.to_string(),
            median_s_per_utt: median(&per_utt),
            mean_s_per_utt: per_utt.iter().sum::<f64>() / per_utt.len() as f64,
            samples_s,
            model_queries,
        });
    }

    Ok(BenchReport {
        beam_size: cfg.beam_size,
        per_tag: cfg.per_tag,
        max_len: cfg.max_len,
        single_width,
        repeats,
        utterances: inputs.len(),
        configurations,
    })
}
