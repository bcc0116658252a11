//! Deterministic mock backends for offline runs and tests.

use std::sync::atomic::{AtomicU32, Ordering};

use sha2::{Digest, Sha256};

use super::{ExpertBackend, ExpertError, ExpertRequest};

const EMOTIONS: [&str; 8] = [
    "overwhelmed",
    "anxious",
    "sad",
    "frustrated",
    "lonely",
    "hopeless",
    "stressed",
    "discouraged",
];

const TOPICS: [&str; 6] = [
    "an upcoming exam",
    "a recent breakup",
    "pressure at work",
    "a conflict with a close friend",
    "financial strain",
    "a family argument",
];

const SUGGESTIONS: [&str; 5] = [
    "suggest a short daily routine",
    "recommend talking things through with a close friend",
    "mention a support group",
    "encourage a conversation with a counselor",
    "propose writing the feelings down",
];

/// Offline expert: a pure function of `(prompt_text, seed)` that emits a
/// reasoning paragraph in the shape the cue-phrase parser expects, echoing
/// a salient word from the last seeker utterance in the prompt.
#[derive(Debug, Clone)]
pub struct MockExpert {
    seed: u64,
}

impl MockExpert {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Longest alphabetic word (at least four letters) from the last
    /// "seeker:" line of the prompt, if any.
    fn salient_word(prompt: &str) -> Option<&str> {
        let line = prompt.lines().rev().find(|l| l.trim_start().starts_with("seeker: "))?;
        line.split_whitespace()
            .skip(1)
            .map(|w| w.trim_matches(|c: char| !c.is_alphabetic()))
            .filter(|w| w.len() >= 4 && w.chars().all(|c| c.is_alphabetic()))
            .max_by_key(|w| w.len())
    }
}

impl ExpertBackend for MockExpert {
    fn complete(&self, request: &ExpertRequest) -> Result<String, ExpertError> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(request.prompt_text.as_bytes());
        let h = hasher.finalize();

        let first = EMOTIONS[h[0] as usize % EMOTIONS.len()];
        let mut second = EMOTIONS[h[1] as usize % EMOTIONS.len()];
        if second == first {
            second = EMOTIONS[(h[1] as usize + 1) % EMOTIONS.len()];
        }
        let topic = TOPICS[h[2] as usize % TOPICS.len()];
        let suggest = SUGGESTIONS[h[3] as usize % SUGGESTIONS.len()];
        let also = SUGGESTIONS[(h[3] as usize + 1 + h[4] as usize % (SUGGESTIONS.len() - 1))
            % SUGGESTIONS.len()];
        let cause = match Self::salient_word(&request.prompt_text) {
            Some(word) => format!("because of {topic}, especially the part about {word}"),
            None => format!("because of {topic}"),
        };

        Ok(format!(
            "The seeker feels {first} and {second} {cause}. \
             The supporter could {suggest}. The supporter should also {also}."
        ))
    }

    fn id(&self) -> String {
        format!("mock:{}", self.seed)
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Which error a [`FlakyExpert`] raises while failing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlakyFailure {
    Transport,
    Protocol,
}

/// Wrapper that fails a fixed number of times before delegating, counting
/// every attempt; for exercising retry behavior.
#[derive(Debug)]
pub struct FlakyExpert<B> {
    inner: B,
    failures: u32,
    failure: FlakyFailure,
    attempts: AtomicU32,
}

impl<B> FlakyExpert<B> {
    pub fn new(inner: B, failures: u32, failure: FlakyFailure) -> Self {
        Self { inner, failures, failure, attempts: AtomicU32::new(0) }
    }

    /// Total `complete` calls observed so far.
    pub fn attempts(&self) -> u32 {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl<B: ExpertBackend> ExpertBackend for FlakyExpert<B> {
    fn complete(&self, request: &ExpertRequest) -> Result<String, ExpertError> {
        let attempt = self.attempts.fetch_add(1, Ordering::SeqCst);
        if attempt < self.failures {
            return Err(match self.failure {
                FlakyFailure::Transport => {
                    ExpertError::transport(format!("injected failure {}", attempt + 1))
                }
                FlakyFailure::Protocol => {
                    ExpertError::protocol(format!("injected failure {}", attempt + 1))
                }
            });
        }
        self.inner.complete(request)
    }

    fn id(&self) -> String {
        self.inner.id()
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}
