//! Shared helpers for the integration tests.
//!
//! The metric oracles here are deliberately written from the declared
//! formulas using a different style than the library: position-scan
//! n-gram counting instead of count maps, and exhaustive subsequence
//! enumeration instead of dynamic programming. They are only feasible for
//! short inputs, which is all the sweeps need.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use expertloop::corpus::{Conversation, Corpus, LabelSets, Role, TurnPair, Utterance};
use expertloop::expert::{ExpertBackend, ExpertError, ExpertRequest};
use expertloop::prompt::{Exemplar, ExemplarSource};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod oracle {
    /// Occurrences of `gram` in `hay`, counted by scanning every start
    /// position.
    fn occurrences(hay: &[u8], gram: &[u8]) -> usize {
        if gram.is_empty() || hay.len() < gram.len() {
            return 0;
        }
        (0..=hay.len() - gram.len()).filter(|&i| &hay[i..i + gram.len()] == gram).count()
    }

    /// Clipped matches and candidate total for order-`n` grams. Distinct
    /// grams are recognized by their first occurrence; each contributes
    /// `min(candidate count, reference count)`.
    fn clipped_and_total(cand: &[u8], reference: &[u8], n: usize) -> (usize, usize) {
        if cand.len() < n {
            return (0, 0);
        }
        let total = cand.len() - n + 1;
        let mut clipped = 0;
        for i in 0..total {
            let gram = &cand[i..i + n];
            let first = (0..total).find(|&j| &cand[j..j + n] == gram).expect("gram exists");
            if first == i {
                clipped += occurrences(cand, gram).min(occurrences(reference, gram));
            }
        }
        (clipped, total)
    }

    /// Reference BLEU-4 for one candidate and one reference: add-epsilon
    /// smoothed modified precisions (a zero numerator becomes
    /// `epsilon / total`, an order longer than the candidate scores a bare
    /// `epsilon`) under a brevity penalty, combined as the fourth root of
    /// the precision product. An empty candidate scores 0.
    pub fn bleu4(cand: &[u8], reference: &[u8], epsilon: f64) -> f64 {
        if cand.is_empty() {
            return 0.0;
        }
        let mut product = 1.0;
        for n in 1..=4 {
            let (clipped, total) = clipped_and_total(cand, reference, n);
            let p = if total == 0 {
                epsilon
            } else if clipped == 0 {
                epsilon / total as f64
            } else {
                clipped as f64 / total as f64
            };
            product *= p;
        }
        let c = cand.len() as f64;
        let r = reference.len() as f64;
        let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        brevity * product.powf(0.25)
    }

    /// Longest common subsequence length found by enumerating every
    /// subsequence of the shorter side and testing it against the longer.
    pub fn lcs_by_enumeration(a: &[u8], b: &[u8]) -> usize {
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        assert!(short.len() <= 20, "enumeration oracle only handles short sequences");
        let mut best = 0usize;
        for mask in 0u32..1u32 << short.len() {
            let picked = mask.count_ones() as usize;
            if picked <= best {
                continue;
            }
            let mut j = 0usize;
            let mut contained = true;
            for (i, &sym) in short.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    continue;
                }
                match long[j..].iter().position(|&h| h == sym) {
                    Some(offset) => j += offset + 1,
                    None => {
                        contained = false;
                        break;
                    }
                }
            }
            if contained {
                best = picked;
            }
        }
        best
    }

    /// Reference ROUGE-L precision, recall, and F (β = 1).
    pub fn rouge_l(cand: &[u8], reference: &[u8]) -> (f64, f64, f64) {
        let lcs = lcs_by_enumeration(cand, reference) as f64;
        let p = if cand.is_empty() { 0.0 } else { lcs / cand.len() as f64 };
        let r = if reference.is_empty() { 0.0 } else { lcs / reference.len() as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

pub const ALPHABET: [&str; 3] = ["a", "b", "c"];

/// All sequences of the given length over a `k`-symbol alphabet, in
/// lexicographic order.
pub fn all_sequences(k: u8, len: usize) -> Vec<Vec<u8>> {
    let count = (k as usize).pow(len as u32);
    let mut out = Vec::with_capacity(count);
    for seed in 0..count {
        let mut code = seed;
        let mut seq = vec![0u8; len];
        for slot in seq.iter_mut().rev() {
            *slot = (code % k as usize) as u8;
            code /= k as usize;
        }
        out.push(seq);
    }
    out
}

/// Symbol indices rendered as single-letter tokens.
pub fn symbol_tokens(seq: &[u8]) -> Vec<String> {
    seq.iter().map(|&s| ALPHABET[s as usize].to_string()).collect()
}

/// A conversation of strictly alternating turns starting with the seeker.
pub fn alternating_conversation(id: &str, turns: usize, emotion: &str, problem: &str) -> Conversation {
    let utterances = (0..turns)
        .map(|i| {
            let role = if i % 2 == 0 { Role::Seeker } else { Role::Supporter };
            Utterance::new(role, format!("{id} turn {i} about {problem}"))
        })
        .collect();
    Conversation {
        id: id.to_string(),
        emotion_label: emotion.to_string(),
        problem_type: problem.to_string(),
        situation: format!("situation for {id}"),
        utterances,
    }
}

/// `n` alternating conversations cycling through the default label sets.
pub fn synthetic_corpus(n: usize) -> Corpus {
    let labels = LabelSets::default();
    let conversations = (0..n)
        .map(|i| {
            alternating_conversation(
                &format!("conv-{i:04}"),
                4 + i % 5,
                &labels.emotions[i % labels.emotions.len()],
                &labels.problems[i % labels.problems.len()],
            )
        })
        .collect();
    Corpus { conversations }
}

/// A conversation with random speaker runs, for merge testing. Texts are
/// unique per utterance so merged joins can be checked byte-exactly.
pub fn run_heavy_conversation(rng: &mut ChaCha8Rng, id: &str) -> Conversation {
    let len = rng.gen_range(1..=14);
    let utterances = (0..len)
        .map(|i| {
            let role = if rng.gen_bool(0.5) { Role::Seeker } else { Role::Supporter };
            Utterance::new(role, format!("line{i} of {id}"))
        })
        .collect();
    Conversation {
        id: id.to_string(),
        emotion_label: "anxiety".to_string(),
        problem_type: "job crisis".to_string(),
        situation: String::new(),
        utterances,
    }
}

/// One dialogue-level exemplar per (emotion, problem) combination.
pub fn dialogue_pool(labels: &LabelSets) -> Vec<Exemplar> {
    let mut pool = Vec::new();
    for (i, emotion) in labels.emotions.iter().enumerate() {
        for (j, problem) in labels.problems.iter().enumerate() {
            let id = format!("dlg-{i}{j}");
            pool.push(Exemplar {
                id: id.clone(),
                source: ExemplarSource::Dialogue(alternating_conversation(&id, 4, emotion, problem)),
                reasoning_text: format!(
                    "The seeker feels {emotion}. The supporter could talk about {problem}."
                ),
                emotion_label: emotion.clone(),
                problem_type: problem.clone(),
            });
        }
    }
    pool
}

/// `count` two-turn exchange exemplars cycling through the label sets.
pub fn exchange_pool(labels: &LabelSets, count: usize) -> Vec<Exemplar> {
    (0..count)
        .map(|i| {
            let emotion = &labels.emotions[i % labels.emotions.len()];
            let problem = &labels.problems[i % labels.problems.len()];
            let id = format!("exch-{i:02}");
            pool_exchange(&id, emotion, problem)
        })
        .collect()
}

fn pool_exchange(id: &str, emotion: &str, problem: &str) -> Exemplar {
    Exemplar {
        id: id.to_string(),
        source: ExemplarSource::Exchange(TurnPair {
            history: Vec::new(),
            seeker_text: format!("{id} seeker line about {problem}"),
            supporter_text: format!("{id} supporter line"),
            conversation_id: format!("conv-{id}"),
            turn_index: 0,
        }),
        reasoning_text: format!(
            "The seeker feels {emotion}. The supporter could ask about {problem}."
        ),
        emotion_label: emotion.to_string(),
        problem_type: problem.to_string(),
    }
}

/// Renders conversations in the ingest wire schema: one JSON object per
/// line with a `dialog` array of `speaker`/`text` entries.
pub fn to_raw_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for conv in &corpus.conversations {
        let dialog: Vec<serde_json::Value> = conv
            .utterances
            .iter()
            .map(|u| serde_json::json!({ "speaker": u.speaker.as_str(), "text": u.text }))
            .collect();
        let line = serde_json::json!({
            "id": conv.id,
            "emotion": conv.emotion_label,
            "problem_type": conv.problem_type,
            "situation": conv.situation,
            "dialog": dialog,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// One request captured by [`spawn_server`].
pub struct CapturedRequest {
    /// Request line and headers, up to the blank line.
    pub head: String,
    pub body: String,
}

impl CapturedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.head.lines().find_map(|line| {
            let (key, value) = line.split_once(':')?;
            key.eq_ignore_ascii_case(name).then(|| value.trim())
        })
    }
}

/// A loopback HTTP server that answers a fixed queue of replies, one
/// connection each, and hands back the captured requests on join.
pub struct TestServer {
    pub url: String,
    handle: std::thread::JoinHandle<Vec<CapturedRequest>>,
}

impl TestServer {
    pub fn join(self) -> Vec<CapturedRequest> {
        self.handle.join().expect("server thread panicked")
    }
}

/// Serve `replies` as `(status, body)` pairs in order, then stop.
pub fn spawn_server(replies: Vec<(u16, String)>) -> TestServer {
    use std::io::Write;

    let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let url = format!("http://{}/complete", listener.local_addr().expect("local addr"));
    let handle = std::thread::spawn(move || {
        let mut captured = Vec::new();
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().expect("accept");
            captured.push(read_request(&mut stream));
            let reply = format!(
                "HTTP/1.1 {status} Reply\r\nContent-Type: application/json\r\n\
                 Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).expect("write reply");
        }
        captured
    });
    TestServer { url, handle }
}

fn read_request(stream: &mut std::net::TcpStream) -> CapturedRequest {
    use std::io::Read;

    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut chunk).expect("read request");
        assert!(n > 0, "client closed before finishing the request");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length = head
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length").then(|| value.trim())
        })
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "client closed before finishing the body");
        buf.extend_from_slice(&chunk[..n]);
    }
    let body = String::from_utf8_lossy(&buf[header_end..header_end + content_length]).to_string();
    CapturedRequest { head, body }
}

/// Wraps a backend and counts raw completion calls, so tests can prove a
/// warm cache short-circuits the backend entirely.
pub struct CountingExpert<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B> CountingExpert<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ExpertBackend> ExpertBackend for CountingExpert<B> {
    fn complete(&self, request: &ExpertRequest) -> Result<String, ExpertError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }

    fn id(&self) -> String {
        self.inner.id()
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }
}
