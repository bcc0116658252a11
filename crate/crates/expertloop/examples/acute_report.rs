//! Pairwise human evaluation end to end: build blinded comparison tasks,
//! simulate judgments, filter them, measure agreement, select questions,
//! and aggregate net win rates.
//!
//! Run with: cargo run --example acute_report

use expertloop::acute::{
    build_tasks, default_question_bank, evaluate_judgments, write_acute_report_csv,
    AcuteOptions, Choice, Judgment, Source, TranscriptRef,
};

fn transcript_refs(prefix: &str, topics: &[&str], per_topic: usize) -> Vec<TranscriptRef> {
    let mut refs = Vec::new();
    for topic in topics {
        for i in 0..per_topic {
            refs.push(TranscriptRef {
                id: format!("{prefix}-{topic}-{i}"),
                topic: topic.to_string(),
            });
        }
    }
    refs
}

fn main() -> anyhow::Result<()> {
    let topics = ["job crisis", "breakup"];
    let models = transcript_refs("model", &topics, 3);
    let humans = transcript_refs("human", &topics, 2);
    let tasks = build_tasks(&models, &humans, 5)?;
    println!("built {} blinded comparison tasks:", tasks.len());
    for task in &tasks {
        println!(
            "  {}: left={:?} right={:?} (seed {})",
            task.task_id,
            task.left_source.transcript_id,
            task.right_source.transcript_id,
            task.presentation_seed
        );
    }

    // Simulate three annotators per task. They lean toward the model
    // transcript on the selected questions, answer fast on one submission
    // (filtered), and one submission is flagged for a junk justification.
    let bank = default_question_bank();
    let mut judgments = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        let model_choice = if task.left_source.source == Source::Model {
            Choice::Left
        } else {
            Choice::Right
        };
        let other = match model_choice {
            Choice::Left => Choice::Right,
            Choice::Right => Choice::Left,
        };
        for question in bank.iter().filter(|q| q.selected) {
            for worker in 0..3 {
                // The third annotator dissents on odd tasks, so agreement
                // lands at 2/3 of tasks unanimous.
                let choice = if worker < 2 || t % 2 == 0 { model_choice } else { other };
                judgments.push(Judgment {
                    task_id: task.task_id.clone(),
                    worker_id: format!("worker-{worker}"),
                    question_id: question.id.clone(),
                    choice,
                    justification: "the replies felt more specific".into(),
                    duration_s: if worker == 2 && t == 0 { 120 } else { 420 },
                    submitted_at: "2024-03-01T10:00:00Z".into(),
                });
            }
        }
    }

    let options = AcuteOptions {
        agreement_threshold_percent: 60.0,
        invalid_justifications: vec![("task-0002".into(), "worker-0".into())],
        ..AcuteOptions::default()
    };
    let report = evaluate_judgments(&bank, &tasks, &judgments, &options)?;

    println!("\nformula: {}", report.formula);
    println!(
        "kept {} judgments ({} filtered for duration, {} for justification)",
        report.counts.kept, report.counts.filtered_duration, report.counts.filtered_justification
    );
    println!("\nper-dimension net win rates (positive: the model wins):");
    for (dimension, rate) in &report.per_dimension_net_win_rate {
        println!("  {dimension}: {rate:+.2}");
    }
    if let Some(total) = report.total_net_win_rate {
        println!("total: {total:+.2}");
    }

    let mut csv = Vec::new();
    write_acute_report_csv(&report, &mut csv)?;
    println!("\nCSV report:\n{}", String::from_utf8(csv)?);
    Ok(())
}
