//! Assemble few-shot prompts: guideline, balanced exemplars, context, and
//! a completion stub, trimmed to a length budget.
//!
//! Run with: cargo run --example build_prompt

use expertloop::corpus::{Conversation, Role, Utterance};
use expertloop::prompt::{
    render_prompt, select_exemplars, Exemplar, ExemplarSource, LengthUnit, PromptLevel,
    PromptSpec, PromptStyle,
};

fn exemplar(id: usize, emotion: &str, problem: &str) -> Exemplar {
    let conversation = Conversation {
        id: format!("ex-{id}"),
        emotion_label: emotion.to_string(),
        problem_type: problem.to_string(),
        situation: String::new(),
        utterances: vec![
            Utterance::new(Role::Seeker, format!("I keep struggling with {problem}.")),
            Utterance::new(Role::Supporter, "Tell me more about that."),
        ],
    };
    Exemplar {
        id: format!("ex-{id}"),
        source: ExemplarSource::Dialogue(conversation),
        reasoning_text: format!(
            "In this conversation, the seeker feels {emotion} because of {problem}. \
             The supporter could listen patiently."
        ),
        emotion_label: emotion.to_string(),
        problem_type: problem.to_string(),
    }
}

fn main() -> anyhow::Result<()> {
    // A pool covering 8 distinct (emotion, problem) combinations, so a
    // dialogue-level prompt can draw one exemplar per combination.
    let labels = expertloop::corpus::LabelSets::default();
    let mut pool = Vec::new();
    let mut id = 0;
    for emotion in &labels.emotions {
        for problem in labels.problems.iter().take(2) {
            pool.push(exemplar(id, emotion, problem));
            id += 1;
        }
    }

    let spec = PromptSpec::new(
        PromptStyle::TextGeneration,
        PromptLevel::Dialogue,
        "The following conversations are between a help seeker and a supporter. \
         Analyze how the seeker feels, why, and what the supporter could do.",
        4000,
        LengthUnit::Characters,
    );
    let batch = select_exemplars(&pool, &spec, &labels, 11)?;
    println!(
        "selected {} exemplars covering distinct label combinations: {:?}",
        batch.len(),
        batch.iter().map(|e| e.id.as_str()).collect::<Vec<_>>()
    );

    let context = vec![
        Utterance::new(Role::Seeker, "I failed my exam and I cannot sleep."),
        Utterance::new(Role::Supporter, "That sounds hard. When did this start?"),
        Utterance::new(Role::Seeker, "Last week. I feel like I let everyone down."),
    ];
    let rendered = render_prompt(&spec, &batch, &context)?;
    println!(
        "\ntext-generation prompt: {} characters, {} context utterances trimmed",
        rendered.length, rendered.trimmed_utterance_count
    );
    let tail: String = rendered.text.chars().rev().take(120).collect::<Vec<_>>().iter().rev().collect();
    println!("prompt tail:\n...{tail}");

    // The question-answering style swaps the stem for explicit questions.
    let qa_spec = PromptSpec {
        style: PromptStyle::QuestionAnswering,
        ..spec.clone()
    };
    let qa = render_prompt(&qa_spec, &batch, &context)?;
    let qa_tail: String = qa.text.lines().rev().take(3).collect::<Vec<_>>().iter().rev().cloned().collect::<Vec<_>>().join("\n");
    println!("\nquestion-answering stub:\n{qa_tail}");

    // A tight budget drops the oldest context utterances first.
    let tight = PromptSpec { budget: rendered.length - 1, ..spec };
    let trimmed = render_prompt(&tight, &batch, &context)?;
    println!(
        "\nwith a budget of {} the renderer trimmed {} oldest context utterance(s)",
        tight.budget, trimmed.trimmed_utterance_count
    );
    Ok(())
}
