//! `export-train`: turn annotations into training examples, optionally
//! interleaved 1:1 with a reasoning-free secondary corpus.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::annotate::{export_training, AnnotatedTurnPair, FailureRecord, FailureReportLine};
use crate::config::Config;
use crate::corpus::{extract_turn_pairs, Corpus, TurnPair};

use super::{
    create_writer, load_split, open_reader, read_corpus_jsonl, CliError, SplitName,
};

fn read_annotations(config: &Config, split: SplitName) -> Result<Vec<AnnotatedTurnPair>, CliError> {
    let path = config
        .resolve(&config.annotate.output_dir)
        .join(format!("annotations-{}.jsonl", split.as_str()));
    let reader = open_reader(&path)?;
    let mut annotated = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotatedTurnPair = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), index + 1)))?;
        annotated.push(record);
    }
    Ok(annotated)
}

/// Rebuild full failure records by joining the failure report against the
/// split's turn pairs. Only needed when failed pairs are exported too.
fn read_failures(
    config: &Config,
    split: SplitName,
    corpus: &Corpus,
) -> Result<Vec<FailureRecord>, CliError> {
    let path = config
        .resolve(&config.annotate.output_dir)
        .join(format!("failures-{}.jsonl", split.as_str()));
    let reader = open_reader(&path)?;
    let pairs: HashMap<(String, usize), TurnPair> = corpus
        .conversations
        .iter()
        .flat_map(extract_turn_pairs)
        .map(|p| ((p.conversation_id.clone(), p.turn_index), p))
        .collect();
    let mut failures = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let report: FailureReportLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), index + 1)))?;
        let key = (report.conversation_id.clone(), report.turn_index);
        let pair = pairs.get(&key).ok_or_else(|| {
            CliError::Data(format!(
                "failure report names unknown pair {}#{}",
                report.conversation_id, report.turn_index
            ))
        })?;
        failures.push(FailureRecord { pair: pair.clone(), error: report.error });
    }
    Ok(failures)
}

pub fn cmd_export_train(
    config: &Config,
    split: SplitName,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let annotated = read_annotations(config, split)?;
    let failed = if config.export.include_failed {
        let corpus = load_split(config, split)?;
        read_failures(config, split, &corpus)?
    } else {
        Vec::new()
    };
    let secondary = match &config.export.secondary_corpus {
        None => None,
        Some(path) => {
            let path = config.resolve(path);
            Some(read_corpus_jsonl(open_reader(&path)?, &path)?)
        }
    };

    let examples =
        export_training(&annotated, &failed, secondary.as_ref(), &config.export.to_options())
            .map_err(|e| CliError::Data(e.to_string()))?;

    let output = config.resolve(&config.export.output);
    let writer = create_writer(&output)?;
    crate::annotate::write_training_jsonl(&examples, writer)
        .map_err(|e| CliError::Data(e.to_string()))?;

    writeln!(out, "exported {} training examples -> {}", examples.len(), output.display())
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
