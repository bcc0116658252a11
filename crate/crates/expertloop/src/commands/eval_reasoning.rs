//! `eval-reasoning`: score generated reasoning texts against references
//! aligned by id and write per-pair + aggregate reports.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Deserialize;

use crate::config::Config;
use crate::metrics::{
    evaluate_reasoning_set, write_report_csv, write_report_json, EvalPair, HashedBagEmbedder,
    LexicalOverlapNli, ScorerSet, TokenizationSpec, UnigramLikelihood,
};

use super::{create_writer, open_reader, CliError};

/// One line of the generated / reference JSONL files.
#[derive(Debug, Deserialize)]
struct TextLine {
    id: String,
    text: String,
}

fn read_text_lines(path: &Path) -> Result<Vec<TextLine>, CliError> {
    let reader = open_reader(path)?;
    let mut lines = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TextLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), index + 1)))?;
        lines.push(parsed);
    }
    Ok(lines)
}

/// Pair generated and reference texts by id, erroring on duplicates and
/// listing every orphan id present on only one side.
fn align(generated: Vec<TextLine>, reference: Vec<TextLine>) -> Result<Vec<EvalPair>, CliError> {
    let mut references: BTreeMap<String, String> = BTreeMap::new();
    for line in reference {
        if references.insert(line.id.clone(), line.text).is_some() {
            return Err(CliError::Data(format!("duplicate reference id {:?}", line.id)));
        }
    }
    let mut pairs = Vec::with_capacity(generated.len());
    let mut orphans = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for line in generated {
        if !seen.insert(line.id.clone()) {
            return Err(CliError::Data(format!("duplicate generated id {:?}", line.id)));
        }
        match references.remove(&line.id) {
            Some(reference_text) => pairs.push(EvalPair {
                id: line.id,
                generated: line.text,
                reference: reference_text,
            }),
            None => orphans.push(format!("{} (generated only)", line.id)),
        }
    }
    orphans.extend(references.into_keys().map(|id| format!("{id} (reference only)")));
    if !orphans.is_empty() {
        return Err(CliError::Data(format!("unpaired ids: {}", orphans.join(", "))));
    }
    Ok(pairs)
}

pub fn cmd_eval_reasoning(
    config: &Config,
    generated_path: &Path,
    reference_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let generated = read_text_lines(&config.resolve(generated_path))?;
    let reference = read_text_lines(&config.resolve(reference_path))?;
    let pairs = align(generated, reference)?;

    let embedder = HashedBagEmbedder::new(config.metrics.embedder_dim);
    let nli = LexicalOverlapNli::default();
    let likelihood = UnigramLikelihood::default();
    let scorers = ScorerSet {
        embedder: config.metrics.embedder.then_some(&embedder as _),
        nli: if config.metrics.entailment { vec![&nli] } else { Vec::new() },
        likelihood: config.metrics.likelihood.then_some(&likelihood as _),
    };
    let spec = TokenizationSpec { lowercase: config.metrics.lowercase };
    let outcome = evaluate_reasoning_set(&pairs, &scorers, &spec, config.concurrency_limit.0)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let dir = config.resolve(&config.metrics.output_dir);
    let csv_path = dir.join("reasoning-report.csv");
    write_report_csv(&outcome, create_writer(&csv_path)?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let json_path = dir.join("reasoning-report.json");
    write_report_json(&outcome, create_writer(&json_path)?)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let aggregate = &outcome.aggregate;
    writeln!(
        out,
        "scored {} pairs: bleu4 {:.4} rouge_l_f {:.4} -> {}",
        outcome.per_pair.len(),
        aggregate.bleu4,
        aggregate.rouge_l_f,
        csv_path.display()
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
