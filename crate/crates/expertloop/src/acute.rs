//! Pairwise human evaluation of dialogue transcripts: build blinded
//! model-vs-human comparison tasks, ingest crowd judgments, filter them,
//! measure inter-rater agreement, keep only high-agreement questions, and
//! aggregate per-dimension net win rates.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::selfchat::Transcript;

/// The win-rate definition, embedded in every report for transparency.
pub const NET_WIN_RATE_FORMULA: &str =
    "net_win_rate = 100 * (model_wins - human_wins) / total_judgments";

/// Default minimum task-completion time; faster submissions are dropped.
pub const DEFAULT_MIN_DURATION_S: u64 = 300;

/// Default inter-rater agreement bar a question must clear (strictly).
pub const DEFAULT_AGREEMENT_THRESHOLD: f64 = 85.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Engagingness,
    Humanness,
    Empathy,
    Specificity,
    Helpfulness,
    Experience,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Engagingness,
        Dimension::Humanness,
        Dimension::Empathy,
        Dimension::Specificity,
        Dimension::Helpfulness,
        Dimension::Experience,
    ];
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Engagingness => "engagingness",
            Dimension::Humanness => "humanness",
            Dimension::Empathy => "empathy",
            Dimension::Specificity => "specificity",
            Dimension::Helpfulness => "helpfulness",
            Dimension::Experience => "experience",
        };
        f.write_str(name)
    }
}

/// One binary comparison question. `selected` marks membership in the
/// default high-agreement subset; [`select_questions`] recomputes it from
/// observed agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub dimension: Dimension,
    pub text: String,
    pub selected: bool,
}

fn question(id: &str, dimension: Dimension, text: &str, selected: bool) -> Question {
    Question { id: id.into(), dimension, text: text.into(), selected }
}

/// The stock bank: 17 questions, 2-3 per dimension. The `selected` flags
/// mark the nine questions that historically cleared the 85% agreement
/// bar.
pub fn default_question_bank() -> Vec<Question> {
    use Dimension::*;
    vec![
        question("q01", Engagingness, "Which supporter is more engaging to talk to?", false),
        question("q02", Engagingness, "Who would you prefer to talk to for a long conversation?", true),
        question("q03", Engagingness, "Which supporter do you think is more captivating?", false),
        question("q04", Humanness, "Which supporter sounds more human?", false),
        question(
            "q05",
            Humanness,
            "If you had to guess that one supporter is human and one is a bot, which do you think is human?",
            true,
        ),
        question("q06", Humanness, "Which supporter sounds more like a real person?", true),
        question("q07", Empathy, "Which supporter understands the feelings of the seeker better?", true),
        question(
            "q08",
            Empathy,
            "If you had to say one of these supporters understands human emotion better, who would you say is better?",
            true,
        ),
        question("q09", Empathy, "Which supporter shows more empathy on the seeker?", false),
        question("q10", Specificity, "Which supporter responds more specifically?", false),
        question("q11", Specificity, "The responses of which supporter are less out-of-context?", false),
        question("q12", Specificity, "Which supporter do you think cares more about the seeker's problem?", true),
        question("q13", Helpfulness, "Which supporter gets a stronger urge to help?", false),
        question("q14", Helpfulness, "Which supporter would you prefer to get suggestions from?", true),
        question(
            "q15",
            Helpfulness,
            "For the suggestions given by the two supporters, which one is a better fit for the seeker?",
            true,
        ),
        question("q16", Experience, "Which supporter shares better similar experience?", true),
        question(
            "q17",
            Experience,
            "If you were the seeker, after hearing the experience of which supporter would you feel better?",
            false,
        ),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Model,
    Human,
}

impl Source {
    fn swapped(self) -> Source {
        match self {
            Source::Model => Source::Human,
            Source::Human => Source::Model,
        }
    }
}

/// A transcript identifier with its topic tag, the only parts of a
/// transcript the pairing logic needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRef {
    pub id: String,
    pub topic: String,
}

impl TranscriptRef {
    pub fn from_transcript(transcript: &Transcript) -> Self {
        Self { id: transcript.config_fingerprint.clone(), topic: transcript.topic.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSide {
    pub source: Source,
    pub transcript_id: String,
}

/// One blinded side-by-side comparison. Which source sits on the left is
/// a pure function of `presentation_seed` (even → model on the left).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTask {
    pub task_id: String,
    pub left_source: TaskSide,
    pub right_source: TaskSide,
    pub presentation_seed: u64,
}

impl ComparisonTask {
    pub fn source_of(&self, choice: Choice) -> Source {
        match choice {
            Choice::Left => self.left_source.source,
            Choice::Right => self.right_source.source,
        }
    }

    /// Relabel the model transcript as human and vice versa, keeping the
    /// presentation fixed.
    pub fn with_swapped_labels(&self) -> ComparisonTask {
        let mut task = self.clone();
        task.left_source.source = task.left_source.source.swapped();
        task.right_source.source = task.right_source.source.swapped();
        task
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
}

/// One annotator's answer to one question on one task. `duration_s` is
/// the whole task submission's completion time, repeated on each of the
/// submission's judgments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub task_id: String,
    pub worker_id: String,
    pub question_id: String,
    pub choice: Choice,
    #[serde(default)]
    pub justification: String,
    pub duration_s: u64,
    pub submitted_at: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterCounts {
    pub kept: usize,
    pub filtered_duration: usize,
    pub filtered_justification: usize,
}

/// Exact three-way partition of the input judgments.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<Judgment>,
    pub removed_duration: Vec<Judgment>,
    pub removed_justification: Vec<Judgment>,
}

impl FilterOutcome {
    pub fn counts(&self) -> FilterCounts {
        FilterCounts {
            kept: self.kept.len(),
            filtered_duration: self.removed_duration.len(),
            filtered_justification: self.removed_justification.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub formula: String,
    pub per_dimension_net_win_rate: BTreeMap<Dimension, f64>,
    /// Absent when no kept judgment touches a selected question.
    pub total_net_win_rate: Option<f64>,
    pub per_question_agreement: BTreeMap<String, f64>,
    pub counts: FilterCounts,
}

#[derive(Debug, Error)]
pub enum AcuteError {
    #[error("no {side} transcripts to pair")]
    NoTranscripts { side: &'static str },
    #[error("no human transcripts share topic {topic:?}")]
    UnpairableTopic { topic: String },
    #[error(
        "agreement threshold left no questions in dimension(s): {}",
        .dimensions.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
    )]
    EmptiedDimensions { dimensions: Vec<Dimension> },
    #[error("judgment references unknown task {task_id:?}")]
    UnknownTask { task_id: String },
    #[error("judgment references unknown question {question_id:?}")]
    UnknownQuestion { question_id: String },
    #[error("judgments line {line}: malformed record")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("judgment csv failure")]
    Csv(#[from] csv::Error),
    #[error("json failure")]
    Json(#[from] serde_json::Error),
    #[error("i/o failure")]
    Io(#[from] std::io::Error),
}

/// Pair every model transcript with a same-topic human transcript.
///
/// Partners cycle through the same-topic human transcripts in input
/// order, so the pairing itself does not depend on the seed; the seed
/// only draws each task's `presentation_seed`, which decides the
/// left/right arrangement. A model topic with no human transcripts is a
/// pairing error naming the topic.
pub fn build_tasks(
    model_transcripts: &[TranscriptRef],
    human_transcripts: &[TranscriptRef],
    pairing_seed: u64,
) -> Result<Vec<ComparisonTask>, AcuteError> {
    if model_transcripts.is_empty() {
        return Err(AcuteError::NoTranscripts { side: "model" });
    }
    if human_transcripts.is_empty() {
        return Err(AcuteError::NoTranscripts { side: "human" });
    }
    let mut humans_by_topic: BTreeMap<&str, Vec<&TranscriptRef>> = BTreeMap::new();
    for human in human_transcripts {
        humans_by_topic.entry(&human.topic).or_default().push(human);
    }
    let mut next_partner: BTreeMap<&str, usize> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(pairing_seed);
    let mut tasks = Vec::with_capacity(model_transcripts.len());
    for (index, model) in model_transcripts.iter().enumerate() {
        let partners = humans_by_topic
            .get(model.topic.as_str())
            .ok_or_else(|| AcuteError::UnpairableTopic { topic: model.topic.clone() })?;
        let cursor = next_partner.entry(&model.topic).or_insert(0);
        let human = partners[*cursor % partners.len()];
        *cursor += 1;

        let presentation_seed = rng.next_u64();
        let model_side = TaskSide { source: Source::Model, transcript_id: model.id.clone() };
        let human_side = TaskSide { source: Source::Human, transcript_id: human.id.clone() };
        let (left_source, right_source) = if presentation_seed % 2 == 0 {
            (model_side, human_side)
        } else {
            (human_side, model_side)
        };
        tasks.push(ComparisonTask {
            task_id: format!("task-{index:04}"),
            left_source,
            right_source,
            presentation_seed,
        });
    }
    Ok(tasks)
}

/// Drop judgments from too-fast submissions and from submissions flagged
/// for invalid justifications. A judgment failing both tests counts as a
/// duration removal. The three output groups partition the input exactly.
pub fn filter_judgments(
    judgments: &[Judgment],
    min_duration_s: u64,
    invalid_justification_ids: &[(String, String)],
) -> FilterOutcome {
    let invalid: HashSet<(&str, &str)> = invalid_justification_ids
        .iter()
        .map(|(task, worker)| (task.as_str(), worker.as_str()))
        .collect();
    let mut outcome = FilterOutcome::default();
    for judgment in judgments {
        if judgment.duration_s < min_duration_s {
            outcome.removed_duration.push(judgment.clone());
        } else if invalid.contains(&(judgment.task_id.as_str(), judgment.worker_id.as_str())) {
            outcome.removed_justification.push(judgment.clone());
        } else {
            outcome.kept.push(judgment.clone());
        }
    }
    outcome
}

/// Pairwise percent agreement per question.
///
/// Within each (task, question) group of k ≥ 2 annotators, agreement is
/// the fraction of the k(k−1)/2 annotator pairs that chose the same side;
/// a question's agreement is the mean over its multi-annotator tasks,
/// ×100. Questions with no multi-annotator task are absent from the map.
pub fn compute_agreement(judgments: &[Judgment]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for judgment in judgments {
        let (left, right) = groups
            .entry(&judgment.question_id)
            .or_default()
            .entry(&judgment.task_id)
            .or_default();
        match judgment.choice {
            Choice::Left => *left += 1,
            Choice::Right => *right += 1,
        }
    }
    let mut agreements = BTreeMap::new();
    for (question_id, tasks) in groups {
        let mut per_task = Vec::new();
        for &(left, right) in tasks.values() {
            let k = left + right;
            if k < 2 {
                continue;
            }
            let agreeing = left * (left.saturating_sub(1)) / 2 + right * (right.saturating_sub(1)) / 2;
            let total = k * (k - 1) / 2;
            per_task.push(agreeing as f64 / total as f64);
        }
        if !per_task.is_empty() {
            let mean = per_task.iter().sum::<f64>() / per_task.len() as f64;
            agreements.insert(question_id.to_string(), 100.0 * mean);
        }
    }
    agreements
}

/// Keep questions whose agreement strictly exceeds the threshold.
///
/// A question with no recorded agreement cannot clear the bar. If any
/// dimension present in the bank loses all its questions, that is a
/// selection error listing the emptied dimensions.
pub fn select_questions(
    questions: &[Question],
    agreements: &BTreeMap<String, f64>,
    threshold: f64,
) -> Result<Vec<Question>, AcuteError> {
    let selected: Vec<Question> = questions
        .iter()
        .filter(|q| agreements.get(&q.id).is_some_and(|a| *a > threshold))
        .map(|q| Question { selected: true, ..q.clone() })
        .collect();
    let mut emptied = Vec::new();
    for q in questions {
        let survives = selected.iter().any(|s| s.dimension == q.dimension);
        if !survives && !emptied.contains(&q.dimension) {
            emptied.push(q.dimension);
        }
    }
    if emptied.is_empty() {
        Ok(selected)
    } else {
        Err(AcuteError::EmptiedDimensions { dimensions: emptied })
    }
}

/// Check that every judgment references a known question and task.
pub fn validate_judgments(
    judgments: &[Judgment],
    questions: &[Question],
    tasks: &[ComparisonTask],
) -> Result<(), AcuteError> {
    let question_ids: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    let task_ids: HashSet<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    for judgment in judgments {
        if !question_ids.contains(judgment.question_id.as_str()) {
            return Err(AcuteError::UnknownQuestion { question_id: judgment.question_id.clone() });
        }
        if !task_ids.contains(judgment.task_id.as_str()) {
            return Err(AcuteError::UnknownTask { task_id: judgment.task_id.clone() });
        }
    }
    Ok(())
}

/// Net win rates from kept judgments over the selected questions.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRates {
    pub per_dimension: BTreeMap<Dimension, f64>,
    pub total: Option<f64>,
}

/// Resolve each judgment's left/right choice to model/human through its
/// task's presentation and tally `100 × (model_wins − human_wins) /
/// total` per dimension and overall. Judgments on unselected questions
/// are ignored; a dimension with no judgments is absent rather than zero.
pub fn aggregate_win_rates(
    kept: &[Judgment],
    selected: &[Question],
    tasks: &[ComparisonTask],
) -> Result<WinRates, AcuteError> {
    let dimension_of: HashMap<&str, Dimension> =
        selected.iter().map(|q| (q.id.as_str(), q.dimension)).collect();
    let task_by_id: HashMap<&str, &ComparisonTask> =
        tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();

    let mut tallies: BTreeMap<Dimension, (u64, u64)> = BTreeMap::new();
    for judgment in kept {
        let Some(&dimension) = dimension_of.get(judgment.question_id.as_str()) else {
            continue;
        };
        let task = task_by_id
            .get(judgment.task_id.as_str())
            .ok_or_else(|| AcuteError::UnknownTask { task_id: judgment.task_id.clone() })?;
        let (model_wins, human_wins) = tallies.entry(dimension).or_default();
        match task.source_of(judgment.choice) {
            Source::Model => *model_wins += 1,
            Source::Human => *human_wins += 1,
        }
    }

    let net = |model: u64, human: u64| {
        100.0 * (model as f64 - human as f64) / (model + human) as f64
    };
    let per_dimension: BTreeMap<Dimension, f64> =
        tallies.iter().map(|(&d, &(m, h))| (d, net(m, h))).collect();
    let model_total: u64 = tallies.values().map(|&(m, _)| m).sum();
    let human_total: u64 = tallies.values().map(|&(_, h)| h).sum();
    let total =
        (model_total + human_total > 0).then(|| net(model_total, human_total));
    Ok(WinRates { per_dimension, total })
}

/// Thresholds and flag lists steering [`evaluate_judgments`].
#[derive(Debug, Clone, PartialEq)]
pub struct AcuteOptions {
    pub min_duration_s: u64,
    pub agreement_threshold_percent: f64,
    /// (task_id, worker_id) submissions flagged by human review.
    pub invalid_justifications: Vec<(String, String)>,
}

impl Default for AcuteOptions {
    fn default() -> Self {
        Self {
            min_duration_s: DEFAULT_MIN_DURATION_S,
            agreement_threshold_percent: DEFAULT_AGREEMENT_THRESHOLD,
            invalid_justifications: Vec::new(),
        }
    }
}

/// Full pipeline: validate, filter, measure agreement, select questions,
/// aggregate.
pub fn evaluate_judgments(
    questions: &[Question],
    tasks: &[ComparisonTask],
    judgments: &[Judgment],
    options: &AcuteOptions,
) -> Result<AggregateReport, AcuteError> {
    validate_judgments(judgments, questions, tasks)?;
    let filtered =
        filter_judgments(judgments, options.min_duration_s, &options.invalid_justifications);
    let agreements = compute_agreement(&filtered.kept);
    let selected = select_questions(questions, &agreements, options.agreement_threshold_percent)?;
    let rates = aggregate_win_rates(&filtered.kept, &selected, tasks)?;
    Ok(AggregateReport {
        formula: NET_WIN_RATE_FORMULA.to_string(),
        per_dimension_net_win_rate: rates.per_dimension,
        total_net_win_rate: rates.total,
        per_question_agreement: agreements,
        counts: filtered.counts(),
    })
}

pub fn read_judgments_jsonl<R: BufRead>(reader: R) -> Result<Vec<Judgment>, AcuteError> {
    let mut judgments = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let judgment = serde_json::from_str(&line)
            .map_err(|source| AcuteError::MalformedLine { line: index + 1, source })?;
        judgments.push(judgment);
    }
    Ok(judgments)
}

pub fn read_judgments_csv<R: Read>(reader: R) -> Result<Vec<Judgment>, AcuteError> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut judgments = Vec::new();
    for record in csv_reader.deserialize() {
        judgments.push(record?);
    }
    Ok(judgments)
}

pub fn read_question_bank_json<R: Read>(reader: R) -> Result<Vec<Question>, AcuteError> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_tasks_json<W: Write>(tasks: &[ComparisonTask], mut writer: W) -> Result<(), AcuteError> {
    serde_json::to_writer_pretty(&mut writer, tasks)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_tasks_json<R: Read>(reader: R) -> Result<Vec<ComparisonTask>, AcuteError> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_acute_report_json<W: Write>(
    report: &AggregateReport,
    mut writer: W,
) -> Result<(), AcuteError> {
    serde_json::to_writer_pretty(&mut writer, report)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Flat CSV with `section,name,value` rows: the formula, per-dimension
/// and total net win rates, per-question agreement, and filter counts.
pub fn write_acute_report_csv<W: Write>(
    report: &AggregateReport,
    writer: W,
) -> Result<(), AcuteError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["section", "name", "value"])?;
    csv_writer.write_record(["formula", "net_win_rate", &report.formula])?;
    for (dimension, rate) in &report.per_dimension_net_win_rate {
        csv_writer.write_record([
            "net_win_rate",
            &dimension.to_string(),
            &format!("{rate:.6}"),
        ])?;
    }
    if let Some(total) = report.total_net_win_rate {
        csv_writer.write_record(["net_win_rate", "total", &format!("{total:.6}")])?;
    }
    for (question_id, agreement) in &report.per_question_agreement {
        csv_writer.write_record(["agreement", question_id, &format!("{agreement:.6}")])?;
    }
    let counts = report.counts;
    csv_writer.write_record(["count", "kept", &counts.kept.to_string()])?;
    csv_writer.write_record(["count", "filtered_duration", &counts.filtered_duration.to_string()])?;
    csv_writer.write_record([
        "count",
        "filtered_justification",
        &counts.filtered_justification.to_string(),
    ])?;
    Ok(())
}
