//! Automatic evaluation of generated reasoning against references:
//! BLEU-4 and ROUGE-L computed natively, embedding similarity, entailment,
//! and generation likelihood through pluggable scorer contracts.
//!
//! Every function here is pure and deterministic; fixture values in the
//! tests were computed by hand or by independent brute-force oracles
//! before this implementation existed.

pub mod scorers;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel::map_limit;
pub use scorers::{
    Embedder, HashedBagEmbedder, LexicalOverlapNli, LikelihoodScorer, NliScorer,
    UnigramLikelihood,
};

/// Smoothing constant substituted for zero n-gram counts in BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Bit-exact tokenization rule, so scores are reproducible anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizationSpec {
    pub lowercase: bool,
}

impl Default for TokenizationSpec {
    fn default() -> Self {
        Self { lowercase: true }
    }
}

/// Split on whitespace, then detach leading and trailing ASCII punctuation
/// of each chunk into separate tokens. Joining with single spaces and
/// re-tokenizing is a fixed point.
pub fn tokenize(text: &str, spec: &TokenizationSpec) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        let mut leading = Vec::new();
        while let Some(c) = rest.chars().next().filter(|c| c.is_ascii_punctuation()) {
            leading.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next_back().filter(|c| c.is_ascii_punctuation()) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        tokens.extend(leading);
        if !rest.is_empty() {
            tokens.push(if spec.lowercase { rest.to_lowercase() } else { rest.to_string() });
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n && n > 0 {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU-4 with add-epsilon smoothing.
///
/// Modified n-gram precisions for n = 1..4 are clipped against the maximum
/// reference count per n-gram; zero numerators are replaced by
/// [`BLEU_EPSILON`], and a candidate shorter than n scores a bare epsilon
/// for that order. The brevity penalty compares against the reference
/// length closest to the candidate's (ties prefer the shorter reference).
/// An empty candidate scores 0 by definition.
pub fn bleu4(candidate: &[String], references: &[Vec<String>]) -> f64 {
    if candidate.is_empty() || references.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand_counts = ngram_counts(candidate, n);
        let total: usize = cand_counts.values().sum();
        let p_n = if total == 0 {
            BLEU_EPSILON
        } else {
            let mut clipped = 0usize;
            for (gram, &count) in &cand_counts {
                let max_ref = references
                    .iter()
                    .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                clipped += count.min(max_ref);
            }
            if clipped == 0 { BLEU_EPSILON / total as f64 } else { clipped as f64 / total as f64 }
        };
        log_sum += 0.25 * p_n.ln();
    }

    let c = candidate.len();
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let brevity = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    brevity * log_sum.exp()
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(row[j]) };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L precision, recall, and F (β = 1) from the exact LCS.
///
/// Empty inputs contribute 0 to the affected components; two empty inputs
/// give (0, 0, 0) by convention.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> (f64, f64, f64) {
    let lcs = lcs_length(candidate, reference) as f64;
    let p = if candidate.is_empty() { 0.0 } else { lcs / candidate.len() as f64 };
    let r = if reference.is_empty() { 0.0 } else { lcs / reference.len() as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy token-matching embedding similarity, reported in [0, 100].
///
/// Precision is the mean over candidate tokens of the maximum cosine
/// against any reference token; recall is the converse; the result is the
/// harmonic mean ×100. Identical token sequences score exactly 100 under
/// any embedder; an empty side scores 0.
pub fn embed_similarity(
    candidate: &str,
    reference: &str,
    embedder: &dyn Embedder,
    spec: &TokenizationSpec,
) -> f64 {
    let cand_tokens = tokenize(candidate, spec);
    let ref_tokens = tokenize(reference, spec);
    if cand_tokens.is_empty() || ref_tokens.is_empty() {
        return 0.0;
    }
    // Equal inputs must score exactly 100; floating-point cosine chains
    // cannot be trusted to hit it bit-exactly.
    if cand_tokens == ref_tokens {
        return 100.0;
    }
    let cand_vecs = embedder.embed(&cand_tokens);
    let ref_vecs = embedder.embed(&ref_tokens);
    let mean_max = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|v| to.iter().map(|w| cosine(v, w)).fold(f64::MIN, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    let p = mean_max(&cand_vecs, &ref_vecs);
    let r = mean_max(&ref_vecs, &cand_vecs);
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * 2.0 * p * r / (p + r)
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no (generated, reference) pairs to evaluate")]
    EmptyPairList,
    #[error("scorer {scorer} returned {value}, outside [0, 100]")]
    ScorerContract { scorer: String, value: f64 },
    #[error("scorer {scorer} returned {value}, expected a value ≤ 0")]
    LikelihoodContract { scorer: String, value: f64 },
    #[error("report i/o failure")]
    Io(#[from] std::io::Error),
    #[error("csv serialization failure")]
    Csv(#[from] csv::Error),
}

/// Validate and pass through an NLI scorer's entailment percentage.
pub fn entailment_score(
    premise: &str,
    hypothesis: &str,
    scorer: &dyn NliScorer,
) -> Result<f64, MetricsError> {
    let value = scorer.entailment(premise, hypothesis);
    if !(0.0..=100.0).contains(&value) {
        return Err(MetricsError::ScorerContract { scorer: scorer.id(), value });
    }
    Ok(value)
}

/// One (generated, reference) pair to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub generated: String,
    pub reference: String,
}

/// Scores for one pair. Optional fields are absent exactly when the
/// corresponding scorer is unconfigured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub id: String,
    pub bleu4: f64,
    pub rouge_l_p: f64,
    pub rouge_l_r: f64,
    pub rouge_l_f: f64,
    pub embed_sim: Option<f64>,
    pub gen_likelihood: Option<f64>,
    /// Entailment percentage per configured NLI scorer id.
    pub entailment: BTreeMap<String, f64>,
}

/// Arithmetic means over the per-pair scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub bleu4: f64,
    pub rouge_l_p: f64,
    pub rouge_l_r: f64,
    pub rouge_l_f: f64,
    pub embed_sim: Option<f64>,
    pub gen_likelihood: Option<f64>,
    pub entailment: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub per_pair: Vec<PairScores>,
    pub aggregate: SimilarityReport,
}

/// The pluggable scorers for a run; all optional.
#[derive(Default)]
pub struct ScorerSet<'a> {
    pub embedder: Option<&'a dyn Embedder>,
    pub nli: Vec<&'a dyn NliScorer>,
    pub likelihood: Option<&'a dyn LikelihoodScorer>,
}

/// Guards that serialize calls to scorers which are not concurrency-safe.
struct ScorerGuards {
    embedder: Option<Mutex<()>>,
    nli: Vec<Option<Mutex<()>>>,
    likelihood: Option<Mutex<()>>,
}

fn guard(unsafe_scorer: bool) -> Option<Mutex<()>> {
    unsafe_scorer.then(|| Mutex::new(()))
}

fn locked<T>(mutex: &Option<Mutex<()>>, call: impl FnOnce() -> T) -> T {
    match mutex {
        Some(m) => {
            let _held = m.lock().expect("scorer guard poisoned");
            call()
        }
        None => call(),
    }
}

/// Score every pair and aggregate by arithmetic mean.
///
/// Pairs are scored on up to `concurrency_limit` threads; scorers that
/// declare themselves concurrency-unsafe are serialized behind a lock, and
/// the output order always matches the input order.
pub fn evaluate_reasoning_set(
    pairs: &[EvalPair],
    scorers: &ScorerSet<'_>,
    spec: &TokenizationSpec,
    concurrency_limit: usize,
) -> Result<EvalOutcome, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyPairList);
    }
    let guards = ScorerGuards {
        embedder: guard(scorers.embedder.is_some_and(|e| !e.concurrency_safe())),
        nli: scorers.nli.iter().map(|s| guard(!s.concurrency_safe())).collect(),
        likelihood: guard(scorers.likelihood.is_some_and(|s| !s.concurrency_safe())),
    };

    let results = map_limit(pairs, concurrency_limit, |pair| {
        score_pair(pair, scorers, &guards, spec)
    });
    let mut per_pair = Vec::with_capacity(results.len());
    for result in results {
        per_pair.push(result?);
    }

    let n = per_pair.len() as f64;
    let mean = |f: fn(&PairScores) -> f64| per_pair.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: fn(&PairScores) -> Option<f64>| {
        let values: Vec<f64> = per_pair.iter().filter_map(f).collect();
        if values.len() == per_pair.len() {
            Some(values.iter().sum::<f64>() / n)
        } else {
            None
        }
    };
    let mut entailment = BTreeMap::new();
    for scorer in &scorers.nli {
        let id = scorer.id();
        let total: f64 = per_pair.iter().map(|p| p.entailment[&id]).sum();
        entailment.insert(id, total / n);
    }
    let aggregate = SimilarityReport {
        bleu4: mean(|p| p.bleu4),
        rouge_l_p: mean(|p| p.rouge_l_p),
        rouge_l_r: mean(|p| p.rouge_l_r),
        rouge_l_f: mean(|p| p.rouge_l_f),
        embed_sim: mean_opt(|p| p.embed_sim),
        gen_likelihood: mean_opt(|p| p.gen_likelihood),
        entailment,
    };
    Ok(EvalOutcome { per_pair, aggregate })
}

fn score_pair(
    pair: &EvalPair,
    scorers: &ScorerSet<'_>,
    guards: &ScorerGuards,
    spec: &TokenizationSpec,
) -> Result<PairScores, MetricsError> {
    let cand = tokenize(&pair.generated, spec);
    let reference = tokenize(&pair.reference, spec);
    let (rouge_l_p, rouge_l_r, rouge_l_f) = rouge_l(&cand, &reference);
    let bleu = bleu4(&cand, std::slice::from_ref(&reference));

    let embed_sim = scorers.embedder.map(|embedder| {
        locked(&guards.embedder, || {
            embed_similarity(&pair.generated, &pair.reference, embedder, spec)
        })
    });

    let gen_likelihood = match scorers.likelihood {
        None => None,
        Some(scorer) => {
            let value =
                locked(&guards.likelihood, || scorer.likelihood(&pair.reference, &pair.generated));
            if value > 0.0 {
                return Err(MetricsError::LikelihoodContract { scorer: scorer.id(), value });
            }
            Some(value)
        }
    };

    let mut entailment = BTreeMap::new();
    for (scorer, guard) in scorers.nli.iter().zip(&guards.nli) {
        let value = locked(guard, || entailment_score(&pair.generated, &pair.reference, *scorer))?;
        entailment.insert(scorer.id(), value);
    }

    Ok(PairScores {
        id: pair.id.clone(),
        bleu4: bleu,
        rouge_l_p,
        rouge_l_r,
        rouge_l_f,
        embed_sim,
        gen_likelihood,
        entailment,
    })
}

fn format_cell(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Write per-pair rows plus a final `mean` row as CSV with columns
/// `pair,bleu4,rouge_l_f,embed_sim,gen_likelihood,entailment_<id>…`.
pub fn write_report_csv<W: Write>(outcome: &EvalOutcome, writer: W) -> Result<(), MetricsError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let nli_ids: Vec<&String> = outcome.aggregate.entailment.keys().collect();
    let mut header = vec![
        "pair".to_string(),
        "bleu4".to_string(),
        "rouge_l_f".to_string(),
        "embed_sim".to_string(),
        "gen_likelihood".to_string(),
    ];
    header.extend(nli_ids.iter().map(|id| format!("entailment_{id}")));
    csv_writer.write_record(&header)?;

    let mut write_row = |label: &str,
                         bleu: f64,
                         rouge_f: f64,
                         embed: Option<f64>,
                         gen: Option<f64>,
                         entailment: &BTreeMap<String, f64>|
     -> Result<(), MetricsError> {
        let mut row = vec![
            label.to_string(),
            format_cell(Some(bleu)),
            format_cell(Some(rouge_f)),
            format_cell(embed),
            format_cell(gen),
        ];
        row.extend(nli_ids.iter().map(|id| format_cell(entailment.get(*id).copied())));
        csv_writer.write_record(&row)?;
        Ok(())
    };

    for scores in &outcome.per_pair {
        write_row(
            &scores.id,
            scores.bleu4,
            scores.rouge_l_f,
            scores.embed_sim,
            scores.gen_likelihood,
            &scores.entailment,
        )?;
    }
    let agg = &outcome.aggregate;
    write_row("mean", agg.bleu4, agg.rouge_l_f, agg.embed_sim, agg.gen_likelihood, &agg.entailment)?;
    Ok(())
}

/// Write the full outcome (per-pair and aggregate) as pretty JSON.
pub fn write_report_json<W: Write>(outcome: &EvalOutcome, mut writer: W) -> Result<(), MetricsError> {
    serde_json::to_writer_pretty(&mut writer, outcome).map_err(std::io::Error::from)?;
    writer.write_all(b"\n")?;
    Ok(())
}
