//! Corpus annotation and training-data export.
//!
//! Annotation runs the expert over every seeker→supporter turn pair and
//! attaches the parsed reasoning. Export flattens annotated pairs into
//! training examples whose input carries the recent history, the seeker
//! utterance, and the reasoning between explicit delimiters, optionally
//! interleaved 1:1 with a secondary corpus.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{extract_turn_pairs, Corpus, Role, TurnPair, Utterance};
use crate::expert::{
    consult, parse_reasoning, request_fingerprint, CueConfig, DecodingParams, ExpertBackend,
    FileCache, ParsedReasoning, RetryPolicy,
};
use crate::parallel::map_limit;
use crate::prompt::{render_prompt, Exemplar, PromptSpec};

/// One turn pair with its expert reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTurnPair {
    pub pair: TurnPair,
    pub reasoning: ParsedReasoning,
    /// Content hash of the exact expert request; doubles as the cache key,
    /// so it is re-derivable from the pair and the prompt configuration.
    pub prompt_fingerprint: String,
}

/// A pair the expert could not annotate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureRecord {
    pub pair: TurnPair,
    pub error: String,
}

/// Wire form of a failure, as written to the failure report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReportLine {
    pub conversation_id: String,
    pub turn_index: usize,
    pub error: String,
}

impl FailureRecord {
    pub fn report_line(&self) -> FailureReportLine {
        FailureReportLine {
            conversation_id: self.pair.conversation_id.clone(),
            turn_index: self.pair.turn_index,
            error: self.error.clone(),
        }
    }
}

/// Outcome of an annotation run; failures are data, not errors, as long as
/// they stay under the configured rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRun {
    pub annotated: Vec<AnnotatedTurnPair>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub prompt: PromptSpec,
    /// Pre-selected exemplar batch; see [`crate::prompt::select_exemplars`].
    pub exemplars: Vec<Exemplar>,
    pub decoding: DecodingParams,
    pub cues: CueConfig,
    pub retry: RetryPolicy,
    pub concurrency_limit: usize,
    /// Run-level error when failed / total exceeds this fraction.
    pub failure_threshold: f64,
}

impl AnnotateOptions {
    pub fn new(prompt: PromptSpec, exemplars: Vec<Exemplar>) -> Self {
        Self {
            prompt,
            exemplars,
            decoding: DecodingParams::default(),
            cues: CueConfig::default(),
            retry: RetryPolicy::default(),
            concurrency_limit: 1,
            failure_threshold: 0.2,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("{failed} of {total} pairs failed, above the threshold of {threshold}")]
    TooManyFailures { failed: usize, total: usize, threshold: f64 },
}

/// Annotate every turn pair in the corpus, in corpus order.
///
/// Backend calls run on up to `concurrency_limit` threads, but the output
/// order never depends on completion order. With a warm cache and a
/// deterministic backend, re-runs make zero backend calls and reproduce
/// the previous output byte for byte.
pub fn annotate_corpus(
    corpus: &Corpus,
    backend: &dyn ExpertBackend,
    options: &AnnotateOptions,
    cache: Option<&FileCache>,
) -> Result<AnnotationRun, AnnotateError> {
    let pairs: Vec<TurnPair> = corpus.conversations.iter().flat_map(extract_turn_pairs).collect();
    let backend_id = backend.id();

    let results = map_limit(&pairs, options.concurrency_limit, |pair| {
        annotate_pair(pair, backend, &backend_id, options, cache)
    });

    let total = pairs.len();
    let mut run = AnnotationRun { annotated: Vec::new(), failures: Vec::new() };
    for result in results {
        match result {
            Ok(a) => run.annotated.push(a),
            Err(f) => run.failures.push(f),
        }
    }
    if total > 0 && run.failures.len() as f64 > options.failure_threshold * total as f64 {
        return Err(AnnotateError::TooManyFailures {
            failed: run.failures.len(),
            total,
            threshold: options.failure_threshold,
        });
    }
    Ok(run)
}

fn annotate_pair(
    pair: &TurnPair,
    backend: &dyn ExpertBackend,
    backend_id: &str,
    options: &AnnotateOptions,
    cache: Option<&FileCache>,
) -> Result<AnnotatedTurnPair, FailureRecord> {
    let fail = |error: String| FailureRecord { pair: pair.clone(), error };

    // The prompt context is the history plus the seeker utterance the
    // reasoning is about.
    let mut context = pair.history.clone();
    context.push(Utterance::new(Role::Seeker, &pair.seeker_text));

    let rendered = render_prompt(&options.prompt, &options.exemplars, &context)
        .map_err(|e| fail(format!("prompt rendering failed: {e}")))?;
    let request = options.decoding.request(rendered.text);
    let prompt_fingerprint = request_fingerprint(backend_id, &request);

    let consultation = consult(backend, &request, &options.retry, cache)
        .map_err(|e| fail(e.to_string()))?;
    let reasoning = parse_reasoning(&consultation.raw_text, &options.cues)
        .map_err(|e| fail(e.to_string()))?;

    Ok(AnnotatedTurnPair { pair: pair.clone(), reasoning, prompt_fingerprint })
}

/// Markers wrapped around the reasoning inside a training input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelimiterConfig {
    pub open: String,
    pub close: String,
}

impl Default for DelimiterConfig {
    fn default() -> Self {
        Self { open: "\n[REASONING]\n".into(), close: "\n[/REASONING]".into() }
    }
}

/// One line of the training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    #[serde(rename = "source")]
    pub source_corpus: String,
}

#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub delimiters: DelimiterConfig,
    /// Most recent history utterances flattened into the input.
    pub history_horizon: usize,
    pub primary_tag: String,
    pub secondary_tag: String,
    /// Also export failed pairs, reasoning-free, after the annotated ones.
    pub include_failed: bool,
    /// Seed for the equal-weight interleave with a secondary corpus.
    pub seed: u64,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self {
            delimiters: DelimiterConfig::default(),
            history_horizon: 3,
            primary_tag: "primary".into(),
            secondary_tag: "secondary".into(),
            include_failed: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(
        "delimiter collision in conversation {conversation_id} turn {turn_index}: \
         {field} contains the {which} delimiter"
    )]
    DelimiterCollision {
        conversation_id: String,
        turn_index: usize,
        field: String,
        which: String,
    },
    #[error(
        "conversation {conversation_id} turn {turn_index}: {field} contains a newline, \
         which the line-oriented input format cannot represent"
    )]
    EmbeddedNewline { conversation_id: String, turn_index: usize, field: String },
    #[error("input text is not in the training format: {0}")]
    MalformedInput(String),
}

fn check_text(
    text: &str,
    field: &str,
    pair: &TurnPair,
    delims: &DelimiterConfig,
    allow_newlines: bool,
) -> Result<(), ExportError> {
    for (which, marker) in [("opening", &delims.open), ("closing", &delims.close)] {
        if text.contains(marker.as_str()) {
            return Err(ExportError::DelimiterCollision {
                conversation_id: pair.conversation_id.clone(),
                turn_index: pair.turn_index,
                field: field.to_string(),
                which: which.to_string(),
            });
        }
    }
    if !allow_newlines && text.contains('\n') {
        return Err(ExportError::EmbeddedNewline {
            conversation_id: pair.conversation_id.clone(),
            turn_index: pair.turn_index,
            field: field.to_string(),
        });
    }
    Ok(())
}

fn build_input(
    pair: &TurnPair,
    reasoning: Option<&str>,
    opts: &ExportOptions,
) -> Result<String, ExportError> {
    let start = pair.history.len().saturating_sub(opts.history_horizon);
    let mut input = String::new();
    for (i, u) in pair.history[start..].iter().enumerate() {
        check_text(&u.text, &format!("history[{}]", start + i), pair, &opts.delimiters, false)?;
        input.push_str(u.speaker.as_str());
        input.push_str(": ");
        input.push_str(&u.text);
        input.push('\n');
    }
    check_text(&pair.seeker_text, "seeker utterance", pair, &opts.delimiters, false)?;
    input.push_str(&pair.seeker_text);
    if let Some(raw) = reasoning {
        // Reasoning may span lines; it only needs to be delimiter-free.
        check_text(raw, "reasoning", pair, &opts.delimiters, true)?;
        input.push_str(&opts.delimiters.open);
        input.push_str(raw);
        input.push_str(&opts.delimiters.close);
    }
    Ok(input)
}

fn pair_example(
    pair: &TurnPair,
    reasoning: Option<&str>,
    tag: &str,
    opts: &ExportOptions,
) -> Result<TrainingExample, ExportError> {
    Ok(TrainingExample {
        input_text: build_input(pair, reasoning, opts)?,
        target_text: pair.supporter_text.clone(),
        source_corpus: tag.to_string(),
    })
}

/// Invert [`build_input`]: recover the flattened history, the seeker
/// utterance, and the raw reasoning (when present) exactly.
pub fn recover_training_input(
    input_text: &str,
    delims: &DelimiterConfig,
) -> Result<(Vec<Utterance>, String, Option<String>), ExportError> {
    let (head, reasoning) = match input_text.split_once(delims.open.as_str()) {
        Some((head, rest)) => {
            let raw = rest.strip_suffix(delims.close.as_str()).ok_or_else(|| {
                ExportError::MalformedInput("reasoning lacks its closing delimiter".into())
            })?;
            (head, Some(raw.to_string()))
        }
        None => (input_text, None),
    };
    let mut lines: Vec<&str> = head.split('\n').collect();
    let seeker_text = lines.pop().unwrap_or_default().to_string();
    let mut history = Vec::with_capacity(lines.len());
    for line in lines {
        let (role, text) = line
            .split_once(": ")
            .ok_or_else(|| ExportError::MalformedInput(format!("unlabeled history line {line:?}")))?;
        let speaker = match role {
            "seeker" => Role::Seeker,
            "supporter" => Role::Supporter,
            other => {
                return Err(ExportError::MalformedInput(format!("unknown speaker {other:?}")))
            }
        };
        history.push(Utterance { speaker, text: text.to_string() });
    }
    Ok((history, seeker_text, reasoning))
}

/// Flatten annotations (and optionally a secondary corpus) into training
/// examples.
///
/// With a secondary corpus the two sources are mixed at equal weight: the
/// smaller side is upsampled by cycling a seeded shuffle, then the streams
/// alternate strictly, so every prefix holds source counts within one of
/// each other. Equal seeds give equal output.
pub fn export_training(
    annotated: &[AnnotatedTurnPair],
    failed: &[FailureRecord],
    secondary: Option<&Corpus>,
    opts: &ExportOptions,
) -> Result<Vec<TrainingExample>, ExportError> {
    let mut primary = Vec::with_capacity(annotated.len());
    for a in annotated {
        primary.push(pair_example(&a.pair, Some(&a.reasoning.raw_text), &opts.primary_tag, opts)?);
    }
    if opts.include_failed {
        for f in failed {
            primary.push(pair_example(&f.pair, None, &opts.primary_tag, opts)?);
        }
    }

    let secondary_examples = match secondary {
        None => Vec::new(),
        Some(corpus) => {
            let mut out = Vec::new();
            for conv in &corpus.conversations {
                for pair in extract_turn_pairs(conv) {
                    out.push(pair_example(&pair, None, &opts.secondary_tag, opts)?);
                }
            }
            out
        }
    };

    if secondary_examples.is_empty() {
        return Ok(primary);
    }
    Ok(interleave_equal_weight(primary, secondary_examples, opts.seed))
}

/// Strictly alternate two example streams after equalizing their lengths;
/// the smaller stream is upsampled by cycling a seeded shuffle of itself.
fn interleave_equal_weight(
    primary: Vec<TrainingExample>,
    secondary: Vec<TrainingExample>,
    seed: u64,
) -> Vec<TrainingExample> {
    let n = primary.len().max(secondary.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upsample = |examples: Vec<TrainingExample>, rng: &mut ChaCha8Rng| {
        if examples.len() >= n || examples.is_empty() {
            return examples;
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(rng);
        let mut out = examples.clone();
        out.extend(order.iter().cycle().take(n - examples.len()).map(|&i| examples[i].clone()));
        out
    };
    let primary = upsample(primary, &mut rng);
    let secondary = upsample(secondary, &mut rng);
    let mut out = Vec::with_capacity(2 * n);
    for (p, s) in primary.into_iter().zip(secondary) {
        out.push(p);
        out.push(s);
    }
    out
}

/// Write examples as JSONL with the `{"input","target","source"}` schema.
pub fn write_training_jsonl<W: Write>(
    examples: &[TrainingExample],
    mut writer: W,
) -> std::io::Result<()> {
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_training_jsonl<R: BufRead>(reader: R) -> std::io::Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Write the failure report as JSONL with the
/// `{"conversation_id","turn_index","error"}` schema.
pub fn write_failure_report<W: Write>(
    failures: &[FailureRecord],
    mut writer: W,
) -> std::io::Result<()> {
    for failure in failures {
        serde_json::to_writer(&mut writer, &failure.report_line())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
