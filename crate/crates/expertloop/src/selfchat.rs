//! Self-chat simulation between two agent endpoints, with optional expert
//! consultation before every supporter turn.
//!
//! A session starts from a pre-defined opener, alternates seeker and
//! supporter turns, and stops at `max_turns` or when an agent signals the
//! end of the conversation. Campaigns sweep a topic × opener grid and
//! derive one seed per session from the campaign seed.

use std::time::Duration;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Conversation, Role, Utterance};
use crate::expert::{
    consult, parse_reasoning, CueConfig, DecodingParams, ExpertBackend, FileCache,
    ParsedReasoning, RetryPolicy,
};
use crate::prompt::{render_prompt, Exemplar, PromptSpec};

/// One reply from an agent endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub text: String,
    /// End-of-conversation marker; the turn still counts.
    pub end: bool,
}

#[derive(Debug, Error)]
pub enum AgentError {
    /// Network-level failure; the session is truncated, not aborted.
    #[error("agent transport failure: {message}")]
    Transport { message: String },
    /// Contract violation in the reply; surfaces as a session error.
    #[error("agent protocol failure: {message}")]
    Protocol { message: String },
}

impl AgentError {
    pub fn transport(message: impl Into<String>) -> Self {
        Self::Transport { message: message.into() }
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        Self::Protocol { message: message.into() }
    }
}

/// A dialogue agent: produces the next utterance for a role given the
/// conversation so far and, for supporters, the expert's reasoning text.
pub trait AgentEndpoint: Send + Sync {
    fn next_turn(
        &self,
        role: Role,
        history: &[Utterance],
        reasoning: Option<&str>,
    ) -> Result<AgentTurn, AgentError>;

    /// Stable identity recorded in config fingerprints.
    fn id(&self) -> String;
}

const SEEKER_LINES: [&str; 6] = [
    "I keep coming back to it no matter what I try.",
    "It has been on my mind all week.",
    "I am not sure talking will change anything.",
    "Some days are fine, but today feels heavy.",
    "I suppose I could give that a try.",
    "That makes sense, though it still feels like a lot.",
];

const SUPPORTER_LINES: [&str; 6] = [
    "That sounds really difficult to carry.",
    "Thank you for telling me. How long has this been going on?",
    "It takes courage to talk about this.",
    "What usually helps you feel even a little better?",
    "Would it help to take this one small step at a time?",
    "I hear you. You are not alone in this.",
];

/// Offline agent: the reply is a pure function of `(history, seed)`; the
/// reasoning argument is deliberately ignored so the purity contract holds
/// whether or not an expert is attached.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    seed: u64,
    /// Signal `end` on the turn that brings the conversation to this length.
    end_after: Option<usize>,
}

impl ScriptedAgent {
    pub fn new(seed: u64) -> Self {
        Self { seed, end_after: None }
    }

    pub fn with_end_after(mut self, turns: usize) -> Self {
        self.end_after = Some(turns);
        self
    }
}

impl AgentEndpoint for ScriptedAgent {
    fn next_turn(
        &self,
        role: Role,
        history: &[Utterance],
        _reasoning: Option<&str>,
    ) -> Result<AgentTurn, AgentError> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update([role as u8]);
        for u in history {
            hasher.update([u.speaker as u8, 0x1f]);
            hasher.update(u.text.as_bytes());
            hasher.update([0x1e]);
        }
        let h = hasher.finalize();
        let lines: &[&str] = match role {
            Role::Seeker => &SEEKER_LINES,
            Role::Supporter => &SUPPORTER_LINES,
        };
        Ok(AgentTurn {
            text: lines[h[0] as usize % lines.len()].to_string(),
            end: self.end_after.is_some_and(|n| history.len() + 1 >= n),
        })
    }

    fn id(&self) -> String {
        format!("scripted:{}", self.seed)
    }
}

#[derive(Serialize)]
struct WireAgentRequest<'a> {
    history: &'a [Utterance],
    reasoning: Option<&'a str>,
}

#[derive(Deserialize)]
struct WireAgentReply {
    text: String,
    end: bool,
}

/// Dialogue model reachable over HTTP: `POST endpoint` with
/// `{"history": [{"speaker","text"},…], "reasoning": str|null}`, replying
/// `{"text": str, "end": bool}`.
pub struct HttpAgent {
    endpoint: String,
    auth_env: Option<String>,
    agent: ureq::Agent,
}

impl HttpAgent {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(30))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_env: None,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Send a bearer token read from the named environment variable; only
    /// the name is stored.
    pub fn with_auth_env(mut self, var_name: impl Into<String>) -> Self {
        self.auth_env = Some(var_name.into());
        self
    }
}

impl AgentEndpoint for HttpAgent {
    fn next_turn(
        &self,
        _role: Role,
        history: &[Utterance],
        reasoning: Option<&str>,
    ) -> Result<AgentTurn, AgentError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(name) = &self.auth_env {
            let token = std::env::var(name).map_err(|_| {
                AgentError::protocol(format!("auth environment variable {name} is not set"))
            })?;
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let response = match call.send_json(&WireAgentRequest { history, reasoning }) {
            Ok(resp) => resp,
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                return Err(AgentError::transport(format!("server returned status {code}")));
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(AgentError::protocol(format!("server returned status {code}")));
            }
            Err(ureq::Error::Transport(t)) => return Err(AgentError::transport(t.to_string())),
        };
        let reply: WireAgentReply = response
            .into_json()
            .map_err(|e| AgentError::protocol(format!("reply violates the contract: {e}")))?;
        Ok(AgentTurn { text: reply.text, end: reply.end })
    }

    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}

/// Expert wiring for a session: how to build the prompt, whom to ask, and
/// where to cache replies.
pub struct ExpertLink<'a> {
    pub backend: &'a dyn ExpertBackend,
    pub prompt: PromptSpec,
    pub exemplars: Vec<Exemplar>,
    pub decoding: DecodingParams,
    pub cues: CueConfig,
    pub retry: RetryPolicy,
    pub cache: Option<&'a FileCache>,
}

/// One turn of a finished session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub speaker: Role,
    pub text: String,
    /// Present only on supporter turns of expert-assisted sessions.
    pub reasoning: Option<ParsedReasoning>,
    pub expert_latency_ms: Option<u64>,
    pub flags: Vec<String>,
}

/// A finished self-chat session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub topic: String,
    pub opener: String,
    pub turns: Vec<TranscriptTurn>,
    pub session_seed: u64,
    pub config_fingerprint: String,
    pub flags: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SelfChatError {
    #[error("self-chat configuration error: {0}")]
    Config(String),
    #[error("{role} agent protocol failure: {message}")]
    Agent { role: Role, message: String },
}

#[derive(Serialize)]
struct FingerprintRecord<'a> {
    topic: &'a str,
    opener: &'a str,
    max_turns: usize,
    seed: u64,
    seeker: String,
    supporter: String,
    expert: Option<String>,
}

fn config_fingerprint(
    topic: &str,
    opener: &str,
    max_turns: usize,
    seed: u64,
    seeker: &dyn AgentEndpoint,
    supporter: &dyn AgentEndpoint,
    expert: Option<&ExpertLink<'_>>,
) -> String {
    let record = FingerprintRecord {
        topic,
        opener,
        max_turns,
        seed,
        seeker: seeker.id(),
        supporter: supporter.id(),
        expert: expert.map(|e| e.backend.id()),
    };
    let encoded = serde_json::to_vec(&record).expect("fingerprint record serializes");
    hex::encode(Sha256::digest(&encoded))
}

/// Consult the linked expert on a conversation history: render the prompt,
/// complete it, and parse the reasoning. Errors are flattened to strings
/// because callers record them as turn flags rather than aborting.
pub fn consult_for_turn(
    expert: &ExpertLink<'_>,
    history: &[Utterance],
) -> Result<(ParsedReasoning, Option<u64>), String> {
    let rendered = render_prompt(&expert.prompt, &expert.exemplars, history)
        .map_err(|e| format!("prompt rendering failed: {e}"))?;
    let request = expert.decoding.request(rendered.text);
    let consultation = consult(expert.backend, &request, &expert.retry, expert.cache)
        .map_err(|e| e.to_string())?;
    let parsed =
        parse_reasoning(&consultation.raw_text, &expert.cues).map_err(|e| e.to_string())?;
    Ok((parsed, consultation.latency_ms))
}

/// Run one self-chat session.
///
/// The transcript opens with the pre-defined seeker utterance, alternates
/// speakers, and ends at `max_turns`, on an agent's end marker, or — when
/// an agent's transport fails — truncated at the last complete
/// seeker/supporter exchange with a `truncated:` flag. When an expert is
/// linked, it is consulted on the history before every supporter turn; the
/// reasoning is attached to the turn and handed to the supporter agent. An
/// expert failure only flags the turn.
pub fn run_selfchat(
    seeker: &dyn AgentEndpoint,
    supporter: &dyn AgentEndpoint,
    expert: Option<&ExpertLink<'_>>,
    opener: &str,
    topic: &str,
    max_turns: usize,
    seed: u64,
) -> Result<Transcript, SelfChatError> {
    if max_turns < 2 || max_turns % 2 != 0 {
        return Err(SelfChatError::Config(format!(
            "max_turns must be an even number of at least 2, got {max_turns}"
        )));
    }
    let fingerprint =
        config_fingerprint(topic, opener, max_turns, seed, seeker, supporter, expert);

    let mut transcript = Transcript {
        topic: topic.to_string(),
        opener: opener.to_string(),
        turns: vec![TranscriptTurn {
            speaker: Role::Seeker,
            text: opener.to_string(),
            reasoning: None,
            expert_latency_ms: None,
            flags: Vec::new(),
        }],
        session_seed: seed,
        config_fingerprint: fingerprint,
        flags: Vec::new(),
    };

    while transcript.turns.len() < max_turns {
        let speaker =
            if transcript.turns.len() % 2 == 0 { Role::Seeker } else { Role::Supporter };
        let history: Vec<Utterance> = transcript
            .turns
            .iter()
            .map(|t| Utterance { speaker: t.speaker, text: t.text.clone() })
            .collect();

        let mut reasoning = None;
        let mut latency = None;
        let mut turn_flags = Vec::new();
        if speaker == Role::Supporter {
            if let Some(link) = expert {
                match consult_for_turn(link, &history) {
                    Ok((parsed, consult_latency)) => {
                        reasoning = Some(parsed);
                        latency = consult_latency;
                    }
                    Err(message) => turn_flags.push(format!("expert_failure: {message}")),
                }
            }
        }

        let agent = match speaker {
            Role::Seeker => seeker,
            Role::Supporter => supporter,
        };
        let raw_reasoning = reasoning.as_ref().map(|r: &ParsedReasoning| r.raw_text.as_str());
        match agent.next_turn(speaker, &history, raw_reasoning) {
            Ok(turn) => {
                let end = turn.end;
                transcript.turns.push(TranscriptTurn {
                    speaker,
                    text: turn.text,
                    reasoning,
                    expert_latency_ms: latency,
                    flags: turn_flags,
                });
                if end {
                    break;
                }
            }
            Err(AgentError::Transport { message }) => {
                // Drop a dangling seeker turn so the transcript ends on a
                // complete exchange; the opener always survives.
                while transcript.turns.len() > 1
                    && transcript.turns.last().is_some_and(|t| t.speaker == Role::Seeker)
                {
                    transcript.turns.pop();
                }
                transcript.flags.push(format!("truncated: {speaker} {message}"));
                break;
            }
            Err(AgentError::Protocol { message }) => {
                return Err(SelfChatError::Agent { role: speaker, message });
            }
        }
    }
    Ok(transcript)
}

/// One topic of a campaign with its pre-defined openers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignTopic {
    pub name: String,
    pub openers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub topics: Vec<CampaignTopic>,
    pub max_turns: usize,
    pub seed: u64,
}

/// Sweep the topic × opener grid, deriving one session seed per cell from
/// the campaign seed; `session` runs a single self-chat. Validation happens
/// before any session executes, and the transcript order follows the
/// configuration order.
pub fn run_campaign<F>(cfg: &CampaignConfig, mut session: F) -> Result<Vec<Transcript>, SelfChatError>
where
    F: FnMut(&str, &str, u64) -> Result<Transcript, SelfChatError>,
{
    for topic in &cfg.topics {
        if topic.openers.is_empty() {
            return Err(SelfChatError::Config(format!(
                "topic {:?} supplies no openers",
                topic.name
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut transcripts = Vec::new();
    for topic in &cfg.topics {
        for opener in &topic.openers {
            let session_seed = rng.next_u64();
            transcripts.push(session(&topic.name, opener, session_seed)?);
        }
    }
    Ok(transcripts)
}

/// Campaign manifest: which transcript landed in which file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub seed: u64,
    pub max_turns: usize,
    pub sessions: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub topic: String,
    pub opener: String,
    pub session_seed: u64,
    pub config_fingerprint: String,
    pub file: String,
}

#[derive(Serialize, Deserialize)]
struct TranscriptHeader {
    topic: String,
    opener: String,
    session_seed: u64,
    config_fingerprint: String,
    flags: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TranscriptFormatError {
    #[error("transcript is empty")]
    Empty,
    #[error("transcript line {line} is malformed: {source}")]
    Malformed { line: usize, source: serde_json::Error },
}

/// Serialize a transcript as JSONL: a header line with the session
/// metadata, then one line per turn.
pub fn transcript_to_jsonl(transcript: &Transcript) -> String {
    let header = TranscriptHeader {
        topic: transcript.topic.clone(),
        opener: transcript.opener.clone(),
        session_seed: transcript.session_seed,
        config_fingerprint: transcript.config_fingerprint.clone(),
        flags: transcript.flags.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for turn in &transcript.turns {
        out.push_str(&serde_json::to_string(turn).expect("turn serializes"));
        out.push('\n');
    }
    out
}

pub fn transcript_from_jsonl(text: &str) -> Result<Transcript, TranscriptFormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines.next().ok_or(TranscriptFormatError::Empty)?;
    let header: TranscriptHeader = serde_json::from_str(header_line)
        .map_err(|source| TranscriptFormatError::Malformed { line: 1, source })?;
    let mut turns = Vec::new();
    for (i, line) in lines {
        let turn: TranscriptTurn = serde_json::from_str(line)
            .map_err(|source| TranscriptFormatError::Malformed { line: i + 1, source })?;
        turns.push(turn);
    }
    Ok(Transcript {
        topic: header.topic,
        opener: header.opener,
        turns,
        session_seed: header.session_seed,
        config_fingerprint: header.config_fingerprint,
        flags: header.flags,
    })
}

impl Transcript {
    /// View a corpus conversation as a transcript, so human dialogues can
    /// enter pairwise evaluation alongside self-chats. Expects a merged
    /// (alternating) conversation.
    pub fn from_conversation(conversation: &Conversation, topic: impl Into<String>) -> Self {
        let topic = topic.into();
        let turns: Vec<TranscriptTurn> = conversation
            .utterances
            .iter()
            .map(|u| TranscriptTurn {
                speaker: u.speaker,
                text: u.text.clone(),
                reasoning: None,
                expert_latency_ms: None,
                flags: Vec::new(),
            })
            .collect();
        let mut hasher = Sha256::new();
        hasher.update(topic.as_bytes());
        hasher.update([0x1e]);
        hasher.update(conversation.id.as_bytes());
        Self {
            topic,
            opener: turns.first().map(|t| t.text.clone()).unwrap_or_default(),
            turns,
            session_seed: 0,
            config_fingerprint: hex::encode(hasher.finalize()),
            flags: vec![format!("source:{}", conversation.id)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSets;
    use crate::expert::MockExpert;
    use crate::prompt::{
        select_exemplars, ExemplarSource, LengthUnit, PromptLevel, PromptStyle,
    };
    use std::sync::Mutex;

    fn expert_link(backend: &MockExpert) -> ExpertLink<'_> {
        let labels = LabelSets::default();
        let spec = PromptSpec::new(
            PromptStyle::TextGeneration,
            PromptLevel::Dialogue,
            "Advise the supporter.",
            100_000,
            LengthUnit::Characters,
        );
        let pool: Vec<Exemplar> = labels
            .emotions
            .iter()
            .flat_map(|e| {
                labels.problems.iter().map(move |p| Exemplar {
                    id: format!("{e}|{p}"),
                    source: ExemplarSource::Dialogue(Conversation {
                        id: "x".into(),
                        emotion_label: e.clone(),
                        problem_type: p.clone(),
                        situation: String::new(),
                        utterances: vec![
                            Utterance::new(Role::Seeker, "sample"),
                            Utterance::new(Role::Supporter, "reply"),
                        ],
                    }),
                    reasoning_text: "The seeker feels sad because of work. The supporter could listen.".into(),
                    emotion_label: e.clone(),
                    problem_type: p.clone(),
                })
            })
            .collect();
        let exemplars = select_exemplars(&pool, &spec, &labels, 3).unwrap();
        ExpertLink {
            backend,
            prompt: spec,
            exemplars,
            decoding: DecodingParams::default(),
            cues: CueConfig::default(),
            retry: RetryPolicy::immediate(1),
            cache: None,
        }
    }

    fn run(max_turns: usize, expert: Option<&ExpertLink<'_>>) -> Transcript {
        run_selfchat(
            &ScriptedAgent::new(11),
            &ScriptedAgent::new(22),
            expert,
            "I have been feeling anxious about work for weeks.",
            "job crisis",
            max_turns,
            5,
        )
        .unwrap()
    }

    #[test]
    fn four_turn_session_alternates_from_the_opener() {
        let t = run(4, None);
        assert_eq!(t.turns.len(), 4);
        assert_eq!(t.turns[0].text, "I have been feeling anxious about work for weeks.");
        let speakers: Vec<Role> = t.turns.iter().map(|u| u.speaker).collect();
        assert_eq!(speakers, vec![Role::Seeker, Role::Supporter, Role::Seeker, Role::Supporter]);
    }

    #[test]
    fn expert_reasoning_lands_on_every_supporter_turn() {
        let backend = MockExpert::new(3);
        let link = expert_link(&backend);
        let t = run(6, Some(&link));
        for turn in &t.turns {
            match turn.speaker {
                Role::Supporter => {
                    let reasoning = turn.reasoning.as_ref().expect("supporter turn has reasoning");
                    // Stored structure matches a fresh parse of the raw text.
                    let reparsed = parse_reasoning(&reasoning.raw_text, &link.cues).unwrap();
                    assert_eq!(*reasoning, reparsed);
                    assert_eq!(turn.expert_latency_ms, None);
                }
                Role::Seeker => assert!(turn.reasoning.is_none()),
            }
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let backend = MockExpert::new(3);
        let link = expert_link(&backend);
        let a = transcript_to_jsonl(&run(8, Some(&link)));
        let b = transcript_to_jsonl(&run(8, Some(&link)));
        assert_eq!(a, b);
    }

    #[test]
    fn odd_or_tiny_max_turns_is_a_config_error() {
        for bad in [0usize, 1, 3, 7] {
            let err = run_selfchat(
                &ScriptedAgent::new(1),
                &ScriptedAgent::new(2),
                None,
                "opener",
                "topic",
                bad,
                0,
            )
            .unwrap_err();
            assert!(matches!(err, SelfChatError::Config(_)), "max_turns {bad}");
        }
    }

    #[test]
    fn end_marker_stops_the_session_early() {
        let t = run_selfchat(
            &ScriptedAgent::new(1),
            &ScriptedAgent::new(2).with_end_after(4),
            None,
            "opener text",
            "topic",
            10,
            0,
        )
        .unwrap();
        assert_eq!(t.turns.len(), 4);
        assert_eq!(t.turns.last().unwrap().speaker, Role::Supporter);
    }

    /// Agent that fails with a transport error on its nth call.
    struct FailsOnCall {
        inner: ScriptedAgent,
        fail_on: u32,
        calls: std::sync::atomic::AtomicU32,
    }

    impl AgentEndpoint for FailsOnCall {
        fn next_turn(
            &self,
            role: Role,
            history: &[Utterance],
            reasoning: Option<&str>,
        ) -> Result<AgentTurn, AgentError> {
            let call = self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
            if call == self.fail_on {
                return Err(AgentError::transport("connection reset"));
            }
            self.inner.next_turn(role, history, reasoning)
        }
        fn id(&self) -> String {
            self.inner.id()
        }
    }

    #[test]
    fn transport_failure_truncates_at_the_last_complete_exchange() {
        // The seeker fails on its 2nd call, i.e. when producing turn 5
        // (s p s p s...): the transcript must fall back to 4 turns.
        let seeker = FailsOnCall {
            inner: ScriptedAgent::new(1),
            fail_on: 2,
            calls: std::sync::atomic::AtomicU32::new(0),
        };
        let t = run_selfchat(&seeker, &ScriptedAgent::new(2), None, "op", "t", 10, 0).unwrap();
        assert_eq!(t.turns.len(), 4);
        assert_eq!(t.turns.last().unwrap().speaker, Role::Supporter);
        assert!(t.flags.iter().any(|f| f.starts_with("truncated:")), "{:?}", t.flags);
    }

    #[test]
    fn supporter_failure_right_after_the_opener_keeps_the_opener() {
        let supporter = FailsOnCall {
            inner: ScriptedAgent::new(2),
            fail_on: 1,
            calls: std::sync::atomic::AtomicU32::new(0),
        };
        let t = run_selfchat(&ScriptedAgent::new(1), &supporter, None, "op", "t", 10, 0).unwrap();
        assert_eq!(t.turns.len(), 1);
        assert_eq!(t.turns[0].text, "op");
        assert!(t.flags.iter().any(|f| f.starts_with("truncated:")));
    }

    /// Agent that violates the reply contract once.
    struct ProtocolBreaker;

    impl AgentEndpoint for ProtocolBreaker {
        fn next_turn(
            &self,
            _role: Role,
            _history: &[Utterance],
            _reasoning: Option<&str>,
        ) -> Result<AgentTurn, AgentError> {
            Err(AgentError::protocol("missing text field"))
        }
        fn id(&self) -> String {
            "breaker".into()
        }
    }

    #[test]
    fn protocol_failure_is_a_session_error() {
        let err = run_selfchat(&ScriptedAgent::new(1), &ProtocolBreaker, None, "op", "t", 4, 0)
            .unwrap_err();
        assert!(matches!(err, SelfChatError::Agent { role: Role::Supporter, .. }));
    }

    /// Expert that always fails at the transport level.
    struct DownExpert;

    impl ExpertBackend for DownExpert {
        fn complete(
            &self,
            _request: &crate::expert::ExpertRequest,
        ) -> Result<String, crate::expert::ExpertError> {
            Err(crate::expert::ExpertError::transport("expert offline"))
        }
        fn id(&self) -> String {
            "down".into()
        }
    }

    #[test]
    fn expert_failure_flags_the_turn_and_continues() {
        let backend = MockExpert::new(3);
        let mut link = expert_link(&backend);
        let down = DownExpert;
        link.backend = &down;
        link.retry = RetryPolicy::immediate(0);
        let t = run(4, Some(&link));
        assert_eq!(t.turns.len(), 4);
        for turn in &t.turns {
            if turn.speaker == Role::Supporter {
                assert!(turn.reasoning.is_none());
                assert!(turn.flags.iter().any(|f| f.starts_with("expert_failure:")));
            }
        }
    }

    /// Records the reasoning argument handed to the supporter endpoint.
    struct RecordingAgent {
        inner: ScriptedAgent,
        seen: Mutex<Vec<Option<String>>>,
    }

    impl AgentEndpoint for RecordingAgent {
        fn next_turn(
            &self,
            role: Role,
            history: &[Utterance],
            reasoning: Option<&str>,
        ) -> Result<AgentTurn, AgentError> {
            self.seen.lock().unwrap().push(reasoning.map(str::to_string));
            self.inner.next_turn(role, history, reasoning)
        }
        fn id(&self) -> String {
            self.inner.id()
        }
    }

    #[test]
    fn supporter_endpoint_receives_the_raw_reasoning() {
        let backend = MockExpert::new(3);
        let link = expert_link(&backend);
        let supporter =
            RecordingAgent { inner: ScriptedAgent::new(22), seen: Mutex::new(Vec::new()) };
        let t = run_selfchat(
            &ScriptedAgent::new(11),
            &supporter,
            Some(&link),
            "opener",
            "topic",
            6,
            0,
        )
        .unwrap();
        let seen = supporter.seen.lock().unwrap();
        let raw: Vec<Option<String>> = t
            .turns
            .iter()
            .filter(|turn| turn.speaker == Role::Supporter)
            .map(|turn| turn.reasoning.as_ref().map(|r| r.raw_text.clone()))
            .collect();
        assert_eq!(*seen, raw);
        assert!(seen.iter().all(|r| r.is_some()));
    }

    #[test]
    fn transcript_jsonl_round_trips_byte_identically() {
        let backend = MockExpert::new(3);
        let link = expert_link(&backend);
        let t = run(6, Some(&link));
        let serialized = transcript_to_jsonl(&t);
        let reparsed = transcript_from_jsonl(&serialized).unwrap();
        assert_eq!(reparsed, t);
        assert_eq!(transcript_to_jsonl(&reparsed), serialized);
    }

    #[test]
    fn malformed_transcript_lines_are_rejected() {
        assert!(matches!(transcript_from_jsonl(""), Err(TranscriptFormatError::Empty)));
        let t = run(2, None);
        let mut text = transcript_to_jsonl(&t);
        text.push_str("{not json\n");
        assert!(matches!(
            transcript_from_jsonl(&text),
            Err(TranscriptFormatError::Malformed { .. })
        ));
    }

    fn campaign_config() -> CampaignConfig {
        CampaignConfig {
            topics: vec![
                CampaignTopic {
                    name: "academic pressure".into(),
                    openers: vec!["Exams are crushing me.".into(), "I failed a midterm.".into()],
                },
                CampaignTopic {
                    name: "breakup with partner".into(),
                    openers: vec![
                        "My partner left last month.".into(),
                        "I cannot stop replaying the breakup.".into(),
                        "Being alone feels impossible.".into(),
                    ],
                },
            ],
            max_turns: 4,
            seed: 99,
        }
    }

    fn scripted_session(topic: &str, opener: &str, seed: u64) -> Result<Transcript, SelfChatError> {
        run_selfchat(
            &ScriptedAgent::new(seed),
            &ScriptedAgent::new(seed.wrapping_add(1)),
            None,
            opener,
            topic,
            4,
            seed,
        )
    }

    #[test]
    fn campaign_runs_the_full_topic_opener_grid() {
        let transcripts = run_campaign(&campaign_config(), scripted_session).unwrap();
        assert_eq!(transcripts.len(), 5);
        let by_topic: Vec<(&str, usize)> = [
            ("academic pressure", 2),
            ("breakup with partner", 3),
        ]
        .to_vec();
        for (topic, expected) in by_topic {
            assert_eq!(transcripts.iter().filter(|t| t.topic == topic).count(), expected);
        }
    }

    #[test]
    fn single_cell_campaign_runs_one_session() {
        let cfg = CampaignConfig {
            topics: vec![CampaignTopic { name: "t".into(), openers: vec!["o".into()] }],
            max_turns: 4,
            seed: 1,
        };
        let transcripts = run_campaign(&cfg, scripted_session).unwrap();
        assert_eq!(transcripts.len(), 1);
        assert_eq!(transcripts[0].opener, "o");
    }

    #[test]
    fn missing_openers_fail_before_any_session_runs() {
        let mut cfg = campaign_config();
        cfg.topics.push(CampaignTopic { name: "empty".into(), openers: vec![] });
        let mut sessions_run = 0;
        let err = run_campaign(&cfg, |topic, opener, seed| {
            sessions_run += 1;
            scripted_session(topic, opener, seed)
        })
        .unwrap_err();
        assert!(matches!(err, SelfChatError::Config(_)));
        assert_eq!(sessions_run, 0);
    }

    #[test]
    fn campaign_output_is_a_pure_function_of_config_and_seed() {
        let a = run_campaign(&campaign_config(), scripted_session).unwrap();
        let b = run_campaign(&campaign_config(), scripted_session).unwrap();
        let serialize =
            |ts: &[Transcript]| ts.iter().map(transcript_to_jsonl).collect::<Vec<_>>().join("");
        assert_eq!(serialize(&a), serialize(&b));
    }

    #[test]
    fn conversations_convert_to_alternating_transcripts() {
        let conv = Conversation {
            id: "c9".into(),
            emotion_label: "anxiety".into(),
            problem_type: "job crisis".into(),
            situation: String::new(),
            utterances: vec![
                Utterance::new(Role::Seeker, "I lost my job."),
                Utterance::new(Role::Supporter, "I am sorry to hear that."),
            ],
        };
        let t = Transcript::from_conversation(&conv, "job crisis");
        assert_eq!(t.opener, "I lost my job.");
        assert_eq!(t.turns.len(), 2);
        assert!(t.flags.iter().any(|f| f == "source:c9"));
        // Deterministic fingerprint for identical input.
        let again = Transcript::from_conversation(&conv, "job crisis");
        assert_eq!(t.config_fingerprint, again.config_fingerprint);
    }
}
