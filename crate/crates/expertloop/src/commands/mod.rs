//! Subcommand implementations behind the thin binary.
//!
//! Every command takes a validated [`Config`](crate::config::Config) plus
//! a writer for its status output, so the whole surface is testable
//! without spawning processes. Errors carry one of three exit classes:
//! usage/config (1), data (2), backend/transport (3).

mod annotate;
mod chat;
mod eval_acute;
mod eval_reasoning;
mod export_train;
mod ingest;
mod selfchat;

pub use annotate::cmd_annotate;
pub use chat::cmd_chat;
pub use eval_acute::cmd_eval_acute;
pub use eval_reasoning::cmd_eval_reasoning;
pub use export_train::cmd_export_train;
pub use ingest::cmd_ingest;
pub use selfchat::cmd_selfchat;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::corpus::{Conversation, Corpus};
use crate::expert::FileCache;
use crate::prompt::{select_exemplars, Exemplar};

/// Exit code 0 is success; these are the failure classes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Malformed or inconsistent data (exit 2).
    #[error("{0}")]
    Data(String),
    /// Backend or transport failure (exit 3).
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(error: ConfigError) -> Self {
        CliError::Usage(error.to_string())
    }
}

/// Which corpus split a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

impl FromStr for SplitName {
    type Err = CliError;

    fn from_str(value: &str) -> Result<Self, CliError> {
        match value {
            "train" => Ok(SplitName::Train),
            "valid" => Ok(SplitName::Valid),
            "test" => Ok(SplitName::Test),
            other => Err(CliError::Usage(format!(
                "unknown split {other:?}; expected train, valid, or test"
            ))),
        }
    }
}

/// Conversation ids belonging to one split, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: String,
    pub count: usize,
    pub conversation_ids: Vec<String>,
}

pub(crate) fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Create (or truncate) a file, making parent directories first.
pub(crate) fn create_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn normalized_corpus_path(config: &Config) -> std::path::PathBuf {
    config.resolve(&config.corpus.output_dir).join("normalized.jsonl")
}

pub(crate) fn manifest_path(config: &Config, split: SplitName) -> std::path::PathBuf {
    config.resolve(&config.corpus.output_dir).join(format!("split-{}.json", split.as_str()))
}

/// Write conversations in the normalized schema, one JSON object per line.
pub(crate) fn write_corpus_jsonl<W: Write>(corpus: &Corpus, mut writer: W) -> Result<(), CliError> {
    for conversation in &corpus.conversations {
        let line = serde_json::to_string(conversation)
            .map_err(|e| CliError::Data(format!("cannot serialize conversation: {e}")))?;
        writeln!(writer, "{line}").map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

/// Read a normalized-schema corpus back (the output of `ingest`).
pub(crate) fn read_corpus_jsonl<R: BufRead>(reader: R, origin: &Path) -> Result<Corpus, CliError> {
    let mut conversations = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let conversation: Conversation = serde_json::from_str(&line).map_err(|e| {
            CliError::Data(format!("{} line {}: {e}", origin.display(), index + 1))
        })?;
        conversations.push(conversation);
    }
    Ok(Corpus::new(conversations))
}

/// Load the normalized conversations belonging to one split.
pub(crate) fn load_split(config: &Config, split: SplitName) -> Result<Corpus, CliError> {
    let corpus_path = normalized_corpus_path(config);
    let corpus = read_corpus_jsonl(open_reader(&corpus_path)?, &corpus_path)?;
    let manifest_file = manifest_path(config, split);
    let manifest: SplitManifest = serde_json::from_reader(open_reader(&manifest_file)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_file.display())))?;
    let wanted: std::collections::HashSet<&str> =
        manifest.conversation_ids.iter().map(String::as_str).collect();
    let conversations: Vec<Conversation> = corpus
        .conversations
        .into_iter()
        .filter(|c| wanted.contains(c.id.as_str()))
        .collect();
    if conversations.len() != manifest.count {
        return Err(CliError::Data(format!(
            "{} names {} conversations but {} were found in the normalized corpus",
            manifest_file.display(),
            manifest.count,
            conversations.len()
        )));
    }
    Ok(Corpus::new(conversations))
}

/// Load the exemplar pool file and select the configured batch.
pub(crate) fn load_exemplar_batch(config: &Config) -> Result<Vec<Exemplar>, CliError> {
    let Some(file) = &config.prompt.exemplars_file else {
        return Err(CliError::Usage(
            "prompt.exemplars_file must be set for this command".into(),
        ));
    };
    let path = config.resolve(file);
    let pool: Vec<Exemplar> = serde_json::from_reader(open_reader(&path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    select_exemplars(&pool, &config.prompt.to_spec(), &config.labels, config.prompt.exemplar_seed)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Open the configured response cache, if any.
pub(crate) fn build_cache(config: &Config) -> Result<Option<FileCache>, CliError> {
    match &config.expert.cache_dir {
        None => Ok(None),
        Some(dir) => {
            let path = config.resolve(dir);
            FileCache::new(&path)
                .map(Some)
                .map_err(|e| CliError::Data(format!("cannot open cache {}: {e}", path.display())))
        }
    }
}
