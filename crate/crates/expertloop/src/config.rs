//! Single TOML configuration shared by every subcommand.
//!
//! Unknown keys are rejected, all semantic checks run before any
//! subcommand does work, and every random decision in the pipeline flows
//! from a seed written here. Backend credentials never appear in the
//! file: config carries only the *names* of environment variables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::acute::AcuteOptions;
use crate::annotate::{AnnotateOptions, DelimiterConfig, ExportOptions};
use crate::corpus::{LabelSets, SplitSpec};
use crate::expert::{
    CueConfig, DecodingParams, ExpertBackend, HttpExpert, MockExpert, RetryPolicy,
};
use crate::prompt::{Exemplar, LengthUnit, PromptLevel, PromptSpec, PromptStyle, RoleLabels};
use crate::selfchat::{AgentEndpoint, CampaignTopic, HttpAgent, ScriptedAgent};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(message.into())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Every relative path below resolves against this directory.
    pub workspace_root: PathBuf,
    /// Upper bound on worker threads for any parallel stage.
    pub concurrency_limit: Limit,
    pub corpus: CorpusSection,
    pub labels: LabelSets,
    pub prompt: PromptSection,
    pub expert: ExpertSection,
    pub annotate: AnnotateSection,
    pub export: ExportSection,
    pub selfchat: SelfChatSection,
    pub metrics: MetricsSection,
    pub acute: AcuteSection,
    pub chat: ChatSection,
}

/// Newtype so the default limit (1) survives `#[serde(default)]` on the
/// containing struct.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(transparent)]
pub struct Limit(pub usize);

impl Default for Limit {
    fn default() -> Self {
        Limit(1)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub input: PathBuf,
    /// Normalized corpus and split manifests land here.
    pub output_dir: PathBuf,
    pub split_seed: u64,
    pub train_percent: u64,
    pub valid_percent: u64,
    pub test_percent: u64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            input: "corpus.jsonl".into(),
            output_dir: "data".into(),
            split_seed: 7,
            train_percent: 70,
            valid_percent: 10,
            test_percent: 20,
        }
    }
}

impl CorpusSection {
    pub fn split_spec(&self) -> Result<SplitSpec, ConfigError> {
        SplitSpec::from_percentages(
            self.train_percent,
            self.valid_percent,
            self.test_percent,
            self.split_seed,
        )
        .map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub style: PromptStyle,
    pub level: PromptLevel,
    pub guideline: String,
    /// Absent → the level's standard batch size (8 dialogue, 16 utterance).
    pub exemplar_count: Option<usize>,
    pub budget: usize,
    pub length_unit: LengthUnit,
    pub seeker_label: String,
    pub supporter_label: String,
    pub exemplar_seed: u64,
    /// JSON file holding the exemplar pool with hand-written analyses.
    pub exemplars_file: Option<PathBuf>,
}

impl Default for PromptSection {
    fn default() -> Self {
        let roles = RoleLabels::default();
        Self {
            style: PromptStyle::TextGeneration,
            level: PromptLevel::Dialogue,
            guideline: "The following conversations are between a help seeker and a supporter. \
                        Analyze how the seeker feels, why, and what the supporter could do."
                .into(),
            exemplar_count: None,
            budget: 6000,
            length_unit: LengthUnit::Characters,
            seeker_label: roles.seeker,
            supporter_label: roles.supporter,
            exemplar_seed: 11,
            exemplars_file: None,
        }
    }
}

impl PromptSection {
    pub fn to_spec(&self) -> PromptSpec {
        PromptSpec {
            style: self.style,
            level: self.level,
            guideline: self.guideline.clone(),
            exemplar_count: self
                .exemplar_count
                .unwrap_or_else(|| PromptSpec::default_exemplar_count(self.level)),
            budget: self.budget,
            length_unit: self.length_unit,
            roles: RoleLabels {
                seeker: self.seeker_label.clone(),
                supporter: self.supporter_label.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertSection {
    pub kind: BackendKind,
    /// Completion endpoint, required for `kind = "http"`.
    pub url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: Option<String>,
    pub timeout_s: u64,
    pub mock_seed: u64,
    pub max_retries: u32,
    pub base_delay_ms: u64,
    /// Response cache directory; no caching when absent.
    pub cache_dir: Option<PathBuf>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl Default for ExpertSection {
    fn default() -> Self {
        let decoding = DecodingParams::default();
        Self {
            kind: BackendKind::Mock,
            url: None,
            auth_env: None,
            timeout_s: 30,
            mock_seed: 0,
            max_retries: RetryPolicy::default().max_retries,
            base_delay_ms: RetryPolicy::default().base_delay_ms,
            cache_dir: None,
            max_tokens: decoding.max_tokens,
            temperature: decoding.temperature,
            stop: decoding.stop,
        }
    }
}

impl ExpertSection {
    pub fn build_backend(&self) -> Box<dyn ExpertBackend> {
        match self.kind {
            BackendKind::Mock => Box::new(MockExpert::new(self.mock_seed)),
            BackendKind::Http => {
                let url = self.url.clone().unwrap_or_default();
                let expert = HttpExpert::with_timeout(
                    url,
                    std::time::Duration::from_secs(self.timeout_s),
                );
                match &self.auth_env {
                    Some(var) => Box::new(expert.with_auth_env(var.clone())),
                    None => Box::new(expert),
                }
            }
        }
    }

    pub fn decoding(&self) -> DecodingParams {
        DecodingParams {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: self.stop.clone(),
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy { max_retries: self.max_retries, base_delay_ms: self.base_delay_ms }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    /// Run-level error when failed / total exceeds this fraction.
    pub failure_threshold: f64,
    pub cues: CueConfig,
    /// Annotation and failure files land here.
    pub output_dir: PathBuf,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        Self { failure_threshold: 0.2, cues: CueConfig::default(), output_dir: "annotations".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub history_horizon: usize,
    pub open_delimiter: String,
    pub close_delimiter: String,
    pub include_failed: bool,
    /// Seed for the equal-weight interleave with the secondary corpus.
    pub seed: u64,
    /// Reasoning-free corpus to mix in 1:1, when present.
    pub secondary_corpus: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for ExportSection {
    fn default() -> Self {
        let delimiters = DelimiterConfig::default();
        Self {
            history_horizon: 3,
            open_delimiter: delimiters.open,
            close_delimiter: delimiters.close,
            include_failed: false,
            seed: 0,
            secondary_corpus: None,
            output: "training.jsonl".into(),
        }
    }
}

impl ExportSection {
    pub fn to_options(&self) -> ExportOptions {
        ExportOptions {
            delimiters: DelimiterConfig {
                open: self.open_delimiter.clone(),
                close: self.close_delimiter.clone(),
            },
            history_horizon: self.history_horizon,
            include_failed: self.include_failed,
            seed: self.seed,
            ..ExportOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub kind: AgentKind,
    pub seed: u64,
    pub url: Option<String>,
    pub auth_env: Option<String>,
    /// Scripted agents signal the end of the session after this many turns.
    pub end_after: Option<usize>,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self { kind: AgentKind::Scripted, seed: 1, url: None, auth_env: None, end_after: None }
    }
}

impl AgentSection {
    pub fn build_agent(&self) -> Box<dyn AgentEndpoint> {
        match self.kind {
            AgentKind::Scripted => {
                let mut agent = ScriptedAgent::new(self.seed);
                if let Some(turns) = self.end_after {
                    agent = agent.with_end_after(turns);
                }
                Box::new(agent)
            }
            AgentKind::Http => {
                let agent = HttpAgent::new(self.url.clone().unwrap_or_default());
                match &self.auth_env {
                    Some(var) => Box::new(agent.with_auth_env(var.clone())),
                    None => Box::new(agent),
                }
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), ConfigError> {
        if self.kind == AgentKind::Http && self.url.is_none() {
            return Err(invalid(format!("{name}: kind = \"http\" requires url")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicSection {
    pub name: String,
    pub openers: Vec<String>,
}

impl Default for TopicSection {
    fn default() -> Self {
        Self { name: String::new(), openers: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfChatSection {
    pub max_turns: usize,
    pub seed: u64,
    pub expert_enabled: bool,
    pub seeker: AgentSection,
    pub supporter: AgentSection,
    pub topics: Vec<TopicSection>,
    pub output_dir: PathBuf,
}

impl Default for SelfChatSection {
    fn default() -> Self {
        Self {
            max_turns: 16,
            seed: 99,
            expert_enabled: true,
            seeker: AgentSection { seed: 1, ..AgentSection::default() },
            supporter: AgentSection { seed: 2, ..AgentSection::default() },
            topics: Vec::new(),
            output_dir: "selfchat".into(),
        }
    }
}

impl SelfChatSection {
    pub fn campaign_topics(&self) -> Vec<CampaignTopic> {
        self.topics
            .iter()
            .map(|t| CampaignTopic { name: t.name.clone(), openers: t.openers.clone() })
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub lowercase: bool,
    pub embedder: bool,
    pub embedder_dim: usize,
    pub entailment: bool,
    pub likelihood: bool,
    pub output_dir: PathBuf,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            lowercase: true,
            embedder: true,
            embedder_dim: 4096,
            entailment: true,
            likelihood: true,
            output_dir: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcuteSection {
    pub min_duration_s: u64,
    pub agreement_threshold: f64,
    pub pairing_seed: u64,
    pub tasks_file: PathBuf,
    /// Custom question bank; the built-in 17-question bank when absent.
    pub question_bank: Option<PathBuf>,
    /// (task_id, worker_id) submissions flagged by justification review.
    pub invalid_justifications: Vec<(String, String)>,
    pub output_dir: PathBuf,
}

impl Default for AcuteSection {
    fn default() -> Self {
        let defaults = AcuteOptions::default();
        Self {
            min_duration_s: defaults.min_duration_s,
            agreement_threshold: defaults.agreement_threshold_percent,
            pairing_seed: 5,
            tasks_file: "acute/tasks.json".into(),
            question_bank: None,
            invalid_justifications: Vec::new(),
            output_dir: "acute".into(),
        }
    }
}

impl AcuteSection {
    pub fn to_options(&self) -> AcuteOptions {
        AcuteOptions {
            min_duration_s: self.min_duration_s,
            agreement_threshold_percent: self.agreement_threshold,
            invalid_justifications: self.invalid_justifications.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSection {
    pub topic: String,
    pub seed: u64,
    pub expert_enabled: bool,
    pub transcript: PathBuf,
}

impl Default for ChatSection {
    fn default() -> Self {
        Self {
            topic: "interactive".into(),
            seed: 0,
            expert_enabled: true,
            transcript: "chat-transcript.jsonl".into(),
        }
    }
}

impl Config {
    /// Read, parse, and validate; nothing else may run on a config that
    /// fails here.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Unreadable { path: path.to_path_buf(), source })?;
        let config: Config = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.concurrency_limit.0 == 0 {
            return Err(invalid("concurrency_limit must be at least 1"));
        }
        self.corpus.split_spec()?;
        if self.labels.emotions.is_empty() || self.labels.problems.is_empty() {
            return Err(invalid("labels: emotion and problem sets must be non-empty"));
        }
        if self.prompt.budget == 0 {
            return Err(invalid("prompt.budget must be positive"));
        }
        if self.prompt.exemplar_count == Some(0) {
            return Err(invalid("prompt.exemplar_count must be positive when set"));
        }
        if self.expert.kind == BackendKind::Http && self.expert.url.is_none() {
            return Err(invalid("expert: kind = \"http\" requires url"));
        }
        if !self.expert.temperature.is_finite() || self.expert.temperature < 0.0 {
            return Err(invalid("expert.temperature must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.annotate.failure_threshold) {
            return Err(invalid("annotate.failure_threshold must lie in [0, 1]"));
        }
        if self.selfchat.max_turns < 2 || self.selfchat.max_turns % 2 != 0 {
            return Err(invalid("selfchat.max_turns must be an even number of at least 2"));
        }
        self.selfchat.seeker.validate("selfchat.seeker")?;
        self.selfchat.supporter.validate("selfchat.supporter")?;
        for topic in &self.selfchat.topics {
            if topic.name.trim().is_empty() {
                return Err(invalid("selfchat.topics: every topic needs a name"));
            }
        }
        if self.metrics.embedder_dim == 0 {
            return Err(invalid("metrics.embedder_dim must be positive"));
        }
        if !(0.0..=100.0).contains(&self.acute.agreement_threshold) {
            return Err(invalid("acute.agreement_threshold must lie in [0, 100]"));
        }
        Ok(())
    }

    /// Resolve a configured path against the workspace root.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.workspace_root.join(path)
        }
    }

    pub fn annotate_options(&self, exemplars: Vec<Exemplar>) -> AnnotateOptions {
        AnnotateOptions {
            prompt: self.prompt.to_spec(),
            exemplars,
            decoding: self.expert.decoding(),
            cues: self.annotate.cues.clone(),
            retry: self.expert.retry(),
            concurrency_limit: self.concurrency_limit.0,
            failure_threshold: self.annotate.failure_threshold,
        }
    }
}
