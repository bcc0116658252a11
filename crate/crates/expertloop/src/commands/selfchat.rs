//! `selfchat`: run the configured topic × opener campaign and write one
//! transcript file per session plus a campaign manifest.

use std::io::Write;

use crate::config::Config;
use crate::selfchat::{
    run_campaign, run_selfchat, transcript_to_jsonl, CampaignConfig, CampaignManifest,
    ExpertLink, ManifestEntry, SelfChatError,
};

use super::{build_cache, create_writer, load_exemplar_batch, CliError};

fn map_selfchat_error(error: SelfChatError) -> CliError {
    match error {
        SelfChatError::Config(message) => CliError::Usage(message),
        SelfChatError::Agent { .. } => CliError::Backend(error.to_string()),
    }
}

pub fn cmd_selfchat(config: &Config, out: &mut dyn Write) -> Result<(), CliError> {
    if config.selfchat.topics.is_empty() {
        return Err(CliError::Usage("selfchat.topics is empty; nothing to run".into()));
    }
    let seeker = config.selfchat.seeker.build_agent();
    let supporter = config.selfchat.supporter.build_agent();
    let backend = config.expert.build_backend();
    let cache = build_cache(config)?;
    // The expert link is optional; exemplars come from the configured pool
    // when one is given, otherwise prompts carry guideline + context only.
    let exemplars = match &config.prompt.exemplars_file {
        Some(_) => load_exemplar_batch(config)?,
        None => Vec::new(),
    };
    let link = config.selfchat.expert_enabled.then(|| ExpertLink {
        backend: backend.as_ref(),
        prompt: config.prompt.to_spec(),
        exemplars,
        decoding: config.expert.decoding(),
        cues: config.annotate.cues.clone(),
        retry: config.expert.retry(),
        cache: cache.as_ref(),
    });

    let campaign = CampaignConfig {
        topics: config.selfchat.campaign_topics(),
        max_turns: config.selfchat.max_turns,
        seed: config.selfchat.seed,
    };
    let transcripts = run_campaign(&campaign, |topic, opener, session_seed| {
        run_selfchat(
            seeker.as_ref(),
            supporter.as_ref(),
            link.as_ref(),
            opener,
            topic,
            campaign.max_turns,
            session_seed,
        )
    })
    .map_err(map_selfchat_error)?;

    let dir = config.resolve(&config.selfchat.output_dir);
    let mut sessions = Vec::with_capacity(transcripts.len());
    for (index, transcript) in transcripts.iter().enumerate() {
        let file = format!("session-{index:03}.jsonl");
        let mut writer = create_writer(&dir.join(&file))?;
        writer
            .write_all(transcript_to_jsonl(transcript).as_bytes())
            .map_err(|e| CliError::Data(e.to_string()))?;
        sessions.push(ManifestEntry {
            topic: transcript.topic.clone(),
            opener: transcript.opener.clone(),
            session_seed: transcript.session_seed,
            config_fingerprint: transcript.config_fingerprint.clone(),
            file,
        });
    }
    let manifest = CampaignManifest {
        seed: campaign.seed,
        max_turns: campaign.max_turns,
        sessions,
    };
    let mut manifest_writer = create_writer(&dir.join("campaign.json"))?;
    serde_json::to_writer_pretty(&mut manifest_writer, &manifest)
        .map_err(|e| CliError::Data(e.to_string()))?;
    manifest_writer.write_all(b"\n").map_err(|e| CliError::Data(e.to_string()))?;

    writeln!(out, "ran {} self-chat sessions -> {}", transcripts.len(), dir.display())
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
