//! `ingest`: parse and normalize a raw corpus, then write the normalized
//! JSONL plus one id manifest per split.

use std::io::Write;
use std::path::Path;

use crate::config::Config;
use crate::corpus::{parse_corpus, split_corpus, Corpus, CorpusFormat};

use super::{
    create_writer, manifest_path, normalized_corpus_path, open_reader, write_corpus_jsonl,
    CliError, SplitManifest, SplitName,
};

fn write_manifest(config: &Config, split: SplitName, corpus: &Corpus) -> Result<(), CliError> {
    let manifest = SplitManifest {
        split: split.as_str().to_string(),
        count: corpus.len(),
        conversation_ids: corpus.conversations.iter().map(|c| c.id.clone()).collect(),
    };
    let path = manifest_path(config, split);
    let mut writer = create_writer(&path)?;
    serde_json::to_writer_pretty(&mut writer, &manifest)
        .map_err(|e| CliError::Data(e.to_string()))?;
    writer.write_all(b"\n").map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}

pub fn cmd_ingest(
    config: &Config,
    input_override: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let input = config.resolve(input_override.unwrap_or(&config.corpus.input));
    let corpus = parse_corpus(open_reader(&input)?, CorpusFormat::Jsonl, &config.labels)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let spec = config.corpus.split_spec()?;
    let (train, valid, test) =
        split_corpus(&corpus, &spec).map_err(|e| CliError::Data(e.to_string()))?;

    let normalized = normalized_corpus_path(config);
    write_corpus_jsonl(&corpus, create_writer(&normalized)?)?;
    write_manifest(config, SplitName::Train, &train)?;
    write_manifest(config, SplitName::Valid, &valid)?;
    write_manifest(config, SplitName::Test, &test)?;

    writeln!(out, "ingested {} conversations from {}", corpus.len(), input.display())
        .map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(
        out,
        "splits: train {} valid {} test {} -> {}",
        train.len(),
        valid.len(),
        test.len(),
        config.resolve(&config.corpus.output_dir).display()
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
