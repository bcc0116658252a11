//! `chat`: a terminal REPL where the human types the seeker side and the
//! configured agent answers as the supporter, with the expert's analysis
//! shown before each reply. The session is saved as a standard transcript.

use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::corpus::{Role, Utterance};
use crate::selfchat::{consult_for_turn, transcript_to_jsonl, ExpertLink, Transcript, TranscriptTurn};

use super::{build_cache, create_writer, load_exemplar_batch, CliError};

fn chat_fingerprint(config: &Config, supporter_id: &str, expert_id: Option<&str>) -> String {
    let record = serde_json::json!({
        "topic": config.chat.topic,
        "seed": config.chat.seed,
        "supporter": supporter_id,
        "expert": expert_id,
    });
    hex::encode(Sha256::digest(record.to_string().as_bytes()))
}

pub fn cmd_chat(
    config: &Config,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let supporter = config.selfchat.supporter.build_agent();
    let backend = config.expert.build_backend();
    let cache = build_cache(config)?;
    let exemplars = match &config.prompt.exemplars_file {
        Some(_) => load_exemplar_batch(config)?,
        None => Vec::new(),
    };
    let link = config.chat.expert_enabled.then(|| ExpertLink {
        backend: backend.as_ref(),
        prompt: config.prompt.to_spec(),
        exemplars,
        decoding: config.expert.decoding(),
        cues: config.annotate.cues.clone(),
        retry: config.expert.retry(),
        cache: cache.as_ref(),
    });

    let io_err = |e: std::io::Error| CliError::Data(e.to_string());
    writeln!(out, "type a seeker message; /quit or end-of-input finishes the session")
        .map_err(io_err)?;

    let mut history: Vec<Utterance> = Vec::new();
    let mut turns: Vec<TranscriptTurn> = Vec::new();
    let mut session_flags: Vec<String> = Vec::new();
    let mut opener = String::new();
    let mut line = String::new();
    loop {
        write!(out, "seeker> ").map_err(io_err)?;
        out.flush().map_err(io_err)?;
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" {
            break;
        }
        if opener.is_empty() {
            opener = text.to_string();
        }
        history.push(Utterance::new(Role::Seeker, text));
        turns.push(TranscriptTurn {
            speaker: Role::Seeker,
            text: text.to_string(),
            reasoning: None,
            expert_latency_ms: None,
            flags: Vec::new(),
        });

        let mut turn_flags = Vec::new();
        let mut reasoning = None;
        let mut latency = None;
        if let Some(link) = &link {
            match consult_for_turn(link, &history) {
                Ok((parsed, consult_latency)) => {
                    writeln!(out, "[analysis] {}", parsed.raw_text.trim()).map_err(io_err)?;
                    reasoning = Some(parsed);
                    latency = consult_latency;
                }
                Err(message) => {
                    writeln!(out, "[analysis unavailable: {message}]").map_err(io_err)?;
                    turn_flags.push(format!("expert_failure: {message}"));
                }
            }
        }

        let raw_reasoning = reasoning.as_ref().map(|r| r.raw_text.clone());
        match supporter.next_turn(Role::Supporter, &history, raw_reasoning.as_deref()) {
            Ok(turn) => {
                writeln!(out, "supporter> {}", turn.text).map_err(io_err)?;
                history.push(Utterance::new(Role::Supporter, &turn.text));
                turns.push(TranscriptTurn {
                    speaker: Role::Supporter,
                    text: turn.text,
                    reasoning,
                    expert_latency_ms: latency,
                    flags: turn_flags,
                });
                if turn.end {
                    writeln!(out, "[the supporter ended the session]").map_err(io_err)?;
                    break;
                }
            }
            Err(error) => {
                // Graceful end: drop the dangling seeker turn (keeping the
                // opener) and save what completed.
                writeln!(out, "[supporter unavailable: {error}; ending session]")
                    .map_err(io_err)?;
                while turns.len() > 1 && turns.last().is_some_and(|t| t.speaker == Role::Seeker) {
                    turns.pop();
                }
                session_flags.push(format!("truncated: supporter {error}"));
                break;
            }
        }
    }

    let expert_id = link.as_ref().map(|l| l.backend.id());
    let transcript = Transcript {
        topic: config.chat.topic.clone(),
        opener,
        turns,
        session_seed: config.chat.seed,
        config_fingerprint: chat_fingerprint(config, &supporter.id(), expert_id.as_deref()),
        flags: session_flags,
    };
    let path = config.resolve(&config.chat.transcript);
    let mut writer = create_writer(&path)?;
    writer.write_all(transcript_to_jsonl(&transcript).as_bytes()).map_err(io_err)?;
    writeln!(out, "saved {} turns -> {}", transcript.turns.len(), path.display())
        .map_err(io_err)?;
    Ok(())
}
