//! Corpus ingestion, turn normalization, and deterministic splitting.
//!
//! Input corpora are newline-delimited JSON, one conversation per line:
//!
//! ```json
//! {"id": "c1", "emotion": "anxiety", "problem_type": "job crisis",
//!  "situation": "...", "dialog": [{"speaker": "seeker", "text": "..."}, ...]}
//! ```
//!
//! Ingested text is NFC-normalized and trimmed. A normalized conversation
//! strictly alternates between the two roles; [`merge_consecutive_utterances`]
//! produces that form by joining same-speaker runs with a single space.

use std::collections::BTreeSet;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// The two dialogue roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seeker,
    Supporter,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Seeker => "seeker",
            Role::Supporter => "supporter",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single utterance. Text is NFC-normalized with no surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Role,
    pub text: String,
}

impl Utterance {
    /// Build an utterance, applying the same normalization as ingestion.
    pub fn new(speaker: Role, text: impl AsRef<str>) -> Self {
        Self {
            speaker,
            text: normalize_text(text.as_ref()),
        }
    }
}

/// NFC-normalize and trim surrounding whitespace.
pub fn normalize_text(text: &str) -> String {
    text.trim().nfc().collect()
}

/// A conversation with its corpus-level annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub emotion_label: String,
    pub problem_type: String,
    #[serde(default)]
    pub situation: String,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    /// True when speakers strictly alternate.
    pub fn is_alternating(&self) -> bool {
        self.utterances
            .windows(2)
            .all(|w| w[0].speaker != w[1].speaker)
    }
}

/// An ordered collection of conversations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub conversations: Vec<Conversation>,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>) -> Self {
        Self { conversations }
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }
}

/// An adjacent (seeker, supporter) exchange with everything said before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnPair {
    /// All utterances preceding the pair; ends with a supporter turn or is empty.
    pub history: Vec<Utterance>,
    pub seeker_text: String,
    pub supporter_text: String,
    pub conversation_id: String,
    pub turn_index: usize,
}

/// The label vocabularies a corpus is validated against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSets {
    pub emotions: Vec<String>,
    pub problems: Vec<String>,
}

impl LabelSets {
    pub fn contains_emotion(&self, label: &str) -> bool {
        self.emotions.iter().any(|e| e == label)
    }

    pub fn contains_problem(&self, label: &str) -> bool {
        self.problems.iter().any(|p| p == label)
    }
}

impl Default for LabelSets {
    /// Placeholder 5+5 vocabulary; override with the label sets of the corpus
    /// actually being ingested.
    fn default() -> Self {
        Self {
            emotions: [
                "anxiety",
                "depression",
                "sadness",
                "anger",
                "fear",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            problems: [
                "ongoing depression",
                "job crisis",
                "academic pressure",
                "problems with friends",
                "breakup with partner",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

/// Supported corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
}

/// An exact fraction in (0, 1), used for split ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, CorpusError> {
        if den == 0 || num == 0 || num >= den {
            return Err(CorpusError::InvalidSplit(format!(
                "ratio {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(Self { num, den })
    }

    /// floor(n * self), computed exactly in integers.
    pub fn floor_of(&self, n: usize) -> usize {
        ((n as u128 * self.num as u128) / self.den as u128) as usize
    }
}

/// Train/valid/test ratios plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Ratio,
    pub valid: Ratio,
    pub test: Ratio,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: Ratio, valid: Ratio, test: Ratio, seed: u64) -> Result<Self, CorpusError> {
        // Exact rational sum check: n1/d1 + n2/d2 + n3/d3 == 1.
        let (n1, d1) = (train.num as u128, train.den as u128);
        let (n2, d2) = (valid.num as u128, valid.den as u128);
        let (n3, d3) = (test.num as u128, test.den as u128);
        if n1 * d2 * d3 + n2 * d1 * d3 + n3 * d1 * d2 != d1 * d2 * d3 {
            return Err(CorpusError::InvalidSplit(
                "split ratios must sum to exactly 1".into(),
            ));
        }
        Ok(Self {
            train,
            valid,
            test,
            seed,
        })
    }

    /// Convenience constructor for percentage ratios, e.g. 70/10/20.
    pub fn from_percentages(
        train: u64,
        valid: u64,
        test: u64,
        seed: u64,
    ) -> Result<Self, CorpusError> {
        Self::new(
            Ratio::new(train, 100)?,
            Ratio::new(valid, 100)?,
            Ratio::new(test, 100)?,
            seed,
        )
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("record {record}: unknown {field} label {value:?}")]
    UnknownLabel {
        record: String,
        field: &'static str,
        value: String,
    },
    #[error("record {record}: utterance {index} is empty")]
    EmptyUtterance { record: String, index: usize },
    #[error("record {record}: dialog is empty")]
    EmptyConversation { record: String },
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct RawUtterance {
    speaker: String,
    text: String,
}

#[derive(Deserialize)]
struct RawConversation {
    id: String,
    emotion: String,
    problem_type: String,
    #[serde(default)]
    situation: String,
    dialog: Vec<RawUtterance>,
}

/// Parse a newline-delimited corpus stream, validating every record against
/// the configured label sets. An empty stream yields an empty corpus.
pub fn parse_corpus(
    reader: impl BufRead,
    format: CorpusFormat,
    labels: &LabelSets,
) -> Result<Corpus, CorpusError> {
    let CorpusFormat::Jsonl = format;
    let mut conversations = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawConversation =
            serde_json::from_str(&line).map_err(|source| CorpusError::Malformed {
                line: idx + 1,
                source,
            })?;
        conversations.push(validate_record(raw, labels)?);
    }
    Ok(Corpus::new(conversations))
}

fn validate_record(raw: RawConversation, labels: &LabelSets) -> Result<Conversation, CorpusError> {
    if !labels.contains_emotion(&raw.emotion) {
        return Err(CorpusError::UnknownLabel {
            record: raw.id,
            field: "emotion",
            value: raw.emotion,
        });
    }
    if !labels.contains_problem(&raw.problem_type) {
        return Err(CorpusError::UnknownLabel {
            record: raw.id,
            field: "problem_type",
            value: raw.problem_type,
        });
    }
    if raw.dialog.is_empty() {
        return Err(CorpusError::EmptyConversation { record: raw.id });
    }
    let mut utterances = Vec::with_capacity(raw.dialog.len());
    for (index, turn) in raw.dialog.into_iter().enumerate() {
        let speaker = match turn.speaker.as_str() {
            "seeker" => Role::Seeker,
            "supporter" => Role::Supporter,
            other => {
                return Err(CorpusError::UnknownLabel {
                    record: raw.id,
                    field: "speaker",
                    value: other.to_string(),
                })
            }
        };
        let text = normalize_text(&turn.text);
        if text.is_empty() {
            return Err(CorpusError::EmptyUtterance {
                record: raw.id,
                index,
            });
        }
        utterances.push(Utterance { speaker, text });
    }
    Ok(Conversation {
        id: raw.id,
        emotion_label: raw.emotion,
        problem_type: raw.problem_type,
        situation: normalize_text(&raw.situation),
        utterances,
    })
}

/// Join consecutive same-speaker utterances with a single space so that
/// speakers strictly alternate. Idempotent; no text is lost.
pub fn merge_consecutive_utterances(conv: &Conversation) -> Conversation {
    let mut merged: Vec<Utterance> = Vec::new();
    for utt in &conv.utterances {
        match merged.last_mut() {
            Some(last) if last.speaker == utt.speaker => {
                last.text.push(' ');
                last.text.push_str(&utt.text);
            }
            _ => merged.push(utt.clone()),
        }
    }
    Conversation {
        utterances: merged,
        ..conv.clone()
    }
}

/// Extract one [`TurnPair`] per adjacent (seeker, supporter) exchange.
///
/// Expects an alternating conversation; pairs are ordered by `turn_index`
/// and each history reconstructs the exact prefix before its seeker turn.
pub fn extract_turn_pairs(conv: &Conversation) -> Vec<TurnPair> {
    let utts = &conv.utterances;
    let mut pairs = Vec::new();
    for i in 0..utts.len().saturating_sub(1) {
        if utts[i].speaker == Role::Seeker && utts[i + 1].speaker == Role::Supporter {
            pairs.push(TurnPair {
                history: utts[..i].to_vec(),
                seeker_text: utts[i].text.clone(),
                supporter_text: utts[i + 1].text.clone(),
                conversation_id: conv.id.clone(),
                turn_index: pairs.len(),
            });
        }
    }
    pairs
}

/// Partition a corpus at conversation granularity.
///
/// Sizes are `floor(N * ratio)` with the remainder assigned to train;
/// membership is deterministic for a fixed seed and conversations keep
/// their original corpus order within each split.
pub fn split_corpus(
    corpus: &Corpus,
    spec: &SplitSpec,
) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len();
    let n_valid = spec.valid.floor_of(n);
    let n_test = spec.test.floor_of(n);
    let n_train = n - n_valid - n_test; // floor(train) plus the remainder

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);

    let train_ids: BTreeSet<usize> = indices[..n_train].iter().copied().collect();
    let valid_ids: BTreeSet<usize> = indices[n_train..n_train + n_valid].iter().copied().collect();

    let mut train = Vec::with_capacity(n_train);
    let mut valid = Vec::with_capacity(n_valid);
    let mut test = Vec::with_capacity(n_test);
    for (i, conv) in corpus.conversations.iter().enumerate() {
        if train_ids.contains(&i) {
            train.push(conv.clone());
        } else if valid_ids.contains(&i) {
            valid.push(conv.clone());
        } else {
            test.push(conv.clone());
        }
    }
    Ok((Corpus::new(train), Corpus::new(valid), Corpus::new(test)))
}
