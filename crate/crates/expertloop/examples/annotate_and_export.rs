//! Annotate every turn pair of a small corpus with expert reasoning, then
//! export delimiter-framed training examples and recover the dialogue from
//! one of them.
//!
//! Run with: cargo run --example annotate_and_export

use expertloop::annotate::{
    annotate_corpus, export_training, recover_training_input, AnnotateOptions, ExportOptions,
};
use expertloop::corpus::{Conversation, Corpus, LabelSets, Role, Utterance};
use expertloop::expert::MockExpert;
use expertloop::prompt::{
    select_exemplars, Exemplar, ExemplarSource, LengthUnit, PromptLevel, PromptSpec, PromptStyle,
};

fn conversation(id: usize, emotion: &str, problem: &str, detail: &str) -> Conversation {
    Conversation {
        id: format!("conv-{id}"),
        emotion_label: emotion.to_string(),
        problem_type: problem.to_string(),
        situation: String::new(),
        utterances: vec![
            Utterance::new(Role::Seeker, format!("I am dealing with {detail}.")),
            Utterance::new(Role::Supporter, "I hear you. How long has it been going on?"),
            Utterance::new(Role::Seeker, "A few weeks now and it keeps getting worse."),
            Utterance::new(Role::Supporter, "You could talk it through with someone you trust."),
        ],
    }
}

fn main() -> anyhow::Result<()> {
    let labels = LabelSets::default();
    let corpus = Corpus::new(vec![
        conversation(0, "anxiety", "job crisis", "constant deadline pressure"),
        conversation(1, "sadness", "breakup with partner", "a sudden breakup"),
    ]);

    // Utterance-level prompts want 16 two-turn exemplars; build a pool
    // from short exchanges with hand-written analyses.
    let pool: Vec<Exemplar> = (0..16)
        .map(|i| {
            let emotion = &labels.emotions[i % labels.emotions.len()];
            let problem = &labels.problems[i % labels.problems.len()];
            let conv = conversation(100 + i, emotion, problem, "an ongoing struggle");
            let pair = expertloop::corpus::extract_turn_pairs(&conv)[0].clone();
            Exemplar {
                id: format!("ex-{i}"),
                source: ExemplarSource::Exchange(pair),
                reasoning_text: format!(
                    "The seeker feels {emotion} because of {problem}. \
                     The supporter could acknowledge the feeling."
                ),
                emotion_label: emotion.clone(),
                problem_type: problem.clone(),
            }
        })
        .collect();

    let spec = PromptSpec::new(
        PromptStyle::TextGeneration,
        PromptLevel::Utterance,
        "Analyze how the seeker feels, why, and what the supporter could do.",
        8000,
        LengthUnit::Characters,
    );
    let exemplars = select_exemplars(&pool, &spec, &labels, 3)?;
    let options = AnnotateOptions::new(spec, exemplars);

    let expert = MockExpert::new(7);
    let run = annotate_corpus(&corpus, &expert, &options, None)?;
    println!("annotated {} turn pairs, {} failures", run.annotated.len(), run.failures.len());
    let sample = &run.annotated[0];
    println!(
        "\npair {}#{} reasoning:\n  {}",
        sample.pair.conversation_id, sample.pair.turn_index, sample.reasoning.raw_text
    );
    println!("  parsed emotion: {}", sample.reasoning.emotion);
    println!("  prompt fingerprint: {}...", &sample.prompt_fingerprint[..16]);

    // Export as training text with [REASONING] frames.
    let examples = export_training(&run.annotated, &[], None, &ExportOptions::default())?;
    println!("\nexported {} training examples; the first input:", examples.len());
    println!("---\n{}\n---", examples[0].input_text);

    // The framing is reversible: recover history, seeker text, reasoning.
    let (history, seeker_text, reasoning) = recover_training_input(
        &examples[0].input_text,
        &ExportOptions::default().delimiters,
    )?;
    println!("\nrecovered {} history utterances", history.len());
    println!("recovered seeker text: {seeker_text}");
    println!("recovered reasoning: {}", reasoning.unwrap_or_default());
    Ok(())
}
