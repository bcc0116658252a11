//! Expert-facing prompt construction.
//!
//! A prompt is a guideline, a balanced batch of in-context exemplars, the
//! context conversation, and a style-specific completion stub, assembled
//! within a length budget. The guideline and exemplars are never trimmed;
//! when the assembled text exceeds the budget, the oldest context
//! utterances are dropped one at a time.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Conversation, LabelSets, Role, TurnPair, Utterance};

/// How the expert is asked to produce the reasoning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Completion of a sentence stem.
    TextGeneration,
    /// Explicit question-answer block.
    QuestionAnswering,
}

/// Whether exemplars and context are full dialogues or two-turn exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLevel {
    Dialogue,
    Utterance,
}

/// Unit used for budget accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    Characters,
    WhitespaceTokens,
}

/// Role names as they appear in rendered prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleLabels {
    pub seeker: String,
    pub supporter: String,
}

impl Default for RoleLabels {
    fn default() -> Self {
        Self {
            seeker: Role::Seeker.as_str().into(),
            supporter: Role::Supporter.as_str().into(),
        }
    }
}

impl RoleLabels {
    fn label(&self, role: Role) -> &str {
        match role {
            Role::Seeker => &self.seeker,
            Role::Supporter => &self.supporter,
        }
    }
}

/// The conversation material behind an exemplar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarSource {
    Dialogue(Conversation),
    Exchange(TurnPair),
}

/// One in-context instance: a conversation plus its gold reasoning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub source: ExemplarSource,
    pub reasoning_text: String,
    pub emotion_label: String,
    pub problem_type: String,
}

impl Exemplar {
    /// Number of turns in the underlying conversation.
    pub fn turn_count(&self) -> usize {
        match &self.source {
            ExemplarSource::Dialogue(c) => c.utterances.len(),
            ExemplarSource::Exchange(_) => 2,
        }
    }

    fn combination(&self) -> (String, String) {
        (self.emotion_label.clone(), self.problem_type.clone())
    }

    fn utterances(&self) -> Vec<Utterance> {
        match &self.source {
            ExemplarSource::Dialogue(c) => c.utterances.clone(),
            ExemplarSource::Exchange(p) => vec![
                Utterance::new(Role::Seeker, &p.seeker_text),
                Utterance::new(Role::Supporter, &p.supporter_text),
            ],
        }
    }
}

/// Everything needed to build a prompt except the exemplars and context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub style: PromptStyle,
    pub level: PromptLevel,
    pub guideline: String,
    pub exemplar_count: usize,
    pub budget: usize,
    pub length_unit: LengthUnit,
    #[serde(default)]
    pub roles: RoleLabels,
}

impl PromptSpec {
    /// Default exemplar batch size for a level: 8 dialogue-level instances
    /// or 16 two-turn instances.
    pub fn default_exemplar_count(level: PromptLevel) -> usize {
        match level {
            PromptLevel::Dialogue => 8,
            PromptLevel::Utterance => 16,
        }
    }

    pub fn new(
        style: PromptStyle,
        level: PromptLevel,
        guideline: impl Into<String>,
        budget: usize,
        length_unit: LengthUnit,
    ) -> Self {
        Self {
            style,
            level,
            guideline: guideline.into(),
            exemplar_count: Self::default_exemplar_count(level),
            budget,
            length_unit,
            roles: RoleLabels::default(),
        }
    }
}

/// A rendered prompt with its accounting metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// Length in the configured unit; always within budget.
    pub length: usize,
    /// Context utterances omitted from the rendered text.
    pub trimmed_utterance_count: usize,
    /// Exemplar ids in rendered order.
    pub exemplar_ids: Vec<String>,
}

/// How to arrange an exemplar batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExemplarOrdering {
    /// Explicit permutation of batch indices.
    Permutation(Vec<usize>),
    /// Deterministic seeded shuffle.
    Seeded(u64),
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(
        "pool provides {available} distinct (emotion, problem) combinations, need {needed}; \
         missing from pool: {}", missing.join(", ")
    )]
    InsufficientCombinations {
        needed: usize,
        available: usize,
        missing: Vec<String>,
    },
    #[error("pool provides {available} two-turn exemplars, need {needed}")]
    InsufficientTwoTurn { needed: usize, available: usize },
    #[error("permutation has length {got}, batch has length {expected}")]
    PermutationLength { expected: usize, got: usize },
    #[error("not a permutation: index {0} repeated or out of range")]
    InvalidPermutation(usize),
    #[error("guideline and exemplars require {required} {unit:?}, budget is {budget}")]
    BudgetExceeded {
        budget: usize,
        required: usize,
        unit: LengthUnit,
    },
    #[error("exemplar {0} has empty reasoning text")]
    EmptyReasoning(String),
}

/// Measure text in the given unit.
pub fn measure(text: &str, unit: LengthUnit) -> usize {
    match unit {
        LengthUnit::Characters => text.chars().count(),
        LengthUnit::WhitespaceTokens => text.split_whitespace().count(),
    }
}

/// Select a balanced exemplar batch, deterministically for a fixed seed.
///
/// At dialogue level the batch holds `exemplar_count` exemplars with
/// pairwise-distinct (emotion, problem) combinations; at utterance level it
/// holds `exemplar_count` two-turn exemplars.
pub fn select_exemplars(
    pool: &[Exemplar],
    spec: &PromptSpec,
    labels: &LabelSets,
    seed: u64,
) -> Result<Vec<Exemplar>, PromptError> {
    for e in pool {
        if e.reasoning_text.trim().is_empty() {
            return Err(PromptError::EmptyReasoning(e.id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.level {
        PromptLevel::Dialogue => {
            // Group by combination, preserving pool order within a group.
            let mut combos: Vec<(String, String)> = Vec::new();
            let mut groups: Vec<Vec<&Exemplar>> = Vec::new();
            for e in pool {
                let key = e.combination();
                match combos.iter().position(|c| *c == key) {
                    Some(i) => groups[i].push(e),
                    None => {
                        combos.push(key);
                        groups.push(vec![e]);
                    }
                }
            }
            if combos.len() < spec.exemplar_count {
                let missing = missing_combinations(&combos, labels);
                return Err(PromptError::InsufficientCombinations {
                    needed: spec.exemplar_count,
                    available: combos.len(),
                    missing,
                });
            }
            let mut order: Vec<usize> = (0..combos.len()).collect();
            order.shuffle(&mut rng);
            let batch = order[..spec.exemplar_count]
                .iter()
                .map(|&i| {
                    let group = &groups[i];
                    group[rng.gen_range(0..group.len())].clone()
                })
                .collect();
            Ok(batch)
        }
        PromptLevel::Utterance => {
            let candidates: Vec<&Exemplar> =
                pool.iter().filter(|e| e.turn_count() == 2).collect();
            if candidates.len() < spec.exemplar_count {
                return Err(PromptError::InsufficientTwoTurn {
                    needed: spec.exemplar_count,
                    available: candidates.len(),
                });
            }
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.shuffle(&mut rng);
            Ok(order[..spec.exemplar_count]
                .iter()
                .map(|&i| candidates[i].clone())
                .collect())
        }
    }
}

fn missing_combinations(present: &[(String, String)], labels: &LabelSets) -> Vec<String> {
    let mut missing = Vec::new();
    for emotion in &labels.emotions {
        for problem in &labels.problems {
            let combo = (emotion.clone(), problem.clone());
            if !present.contains(&combo) {
                missing.push(format!("({emotion}, {problem})"));
            }
        }
    }
    missing
}

/// Rearrange a batch by explicit permutation or seeded shuffle.
pub fn order_exemplars(
    batch: &[Exemplar],
    ordering: &ExemplarOrdering,
) -> Result<Vec<Exemplar>, PromptError> {
    match ordering {
        ExemplarOrdering::Permutation(perm) => {
            if perm.len() != batch.len() {
                return Err(PromptError::PermutationLength {
                    expected: batch.len(),
                    got: perm.len(),
                });
            }
            let mut seen = vec![false; batch.len()];
            for &i in perm {
                if i >= batch.len() || seen[i] {
                    return Err(PromptError::InvalidPermutation(i));
                }
                seen[i] = true;
            }
            Ok(perm.iter().map(|&i| batch[i].clone()).collect())
        }
        ExemplarOrdering::Seeded(seed) => {
            let mut out = batch.to_vec();
            out.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            Ok(out)
        }
    }
}

/// The exact text the expert is asked to continue.
///
/// Text-generation style yields a sentence stem; question-answering style
/// yields the three-question block covering emotion, cause, and supporter
/// action. Byte-stable across calls.
pub fn completion_stub(style: PromptStyle, roles: &RoleLabels) -> String {
    match style {
        PromptStyle::TextGeneration => {
            format!("In this conversation, the {} feels", roles.seeker)
        }
        PromptStyle::QuestionAnswering => format!(
            "Q1: How did the {seeker} feel?\nQ2: Why did the {seeker} feel that way?\nQ3: What could the {supporter} do?",
            seeker = roles.seeker,
            supporter = roles.supporter,
        ),
    }
}

fn conversation_block(utterances: &[Utterance], roles: &RoleLabels) -> String {
    let mut block = String::from("Conversation:");
    for u in utterances {
        block.push('\n');
        block.push_str(roles.label(u.speaker));
        block.push_str(": ");
        block.push_str(&u.text);
    }
    block
}

fn exemplar_block(exemplar: &Exemplar, roles: &RoleLabels) -> String {
    let mut block = conversation_block(&exemplar.utterances(), roles);
    block.push_str("\nAnalysis: ");
    block.push_str(&exemplar.reasoning_text);
    block
}

fn assemble(
    spec: &PromptSpec,
    exemplar_blocks: &[String],
    context: &[Utterance],
    stub: &str,
) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(exemplar_blocks.len() + 2);
    parts.push(spec.guideline.clone());
    parts.extend(exemplar_blocks.iter().cloned());
    let mut last = conversation_block(context, &spec.roles);
    match spec.style {
        PromptStyle::TextGeneration => {
            last.push_str("\nAnalysis: ");
            last.push_str(stub);
        }
        PromptStyle::QuestionAnswering => {
            last.push('\n');
            last.push_str(stub);
        }
    }
    parts.push(last);
    parts.join("\n\n")
}

/// Render a prompt within budget.
///
/// The guideline and exemplars appear verbatim and are never trimmed; if
/// the assembled text exceeds the budget the oldest retained context
/// utterances are dropped one at a time. At utterance level the rendered
/// context is first reduced to the final two turns. Deterministic: equal
/// inputs give byte-identical text.
pub fn render_prompt(
    spec: &PromptSpec,
    exemplars: &[Exemplar],
    context: &[Utterance],
) -> Result<RenderedPrompt, PromptError> {
    let stub = completion_stub(spec.style, &spec.roles);
    let exemplar_blocks: Vec<String> = exemplars
        .iter()
        .map(|e| exemplar_block(e, &spec.roles))
        .collect();

    let max_context = match spec.level {
        PromptLevel::Dialogue => context.len(),
        PromptLevel::Utterance => context.len().min(2),
    };

    let mut retained = max_context;
    loop {
        let tail = &context[context.len() - retained..];
        let text = assemble(spec, &exemplar_blocks, tail, &stub);
        let length = measure(&text, spec.length_unit);
        if length <= spec.budget {
            return Ok(RenderedPrompt {
                text,
                length,
                trimmed_utterance_count: context.len() - retained,
                exemplar_ids: exemplars.iter().map(|e| e.id.clone()).collect(),
            });
        }
        if retained == 0 {
            return Err(PromptError::BudgetExceeded {
                budget: spec.budget,
                required: length,
                unit: spec.length_unit,
            });
        }
        retained -= 1;
    }
}
