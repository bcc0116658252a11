//! Run a small self-chat campaign: two scripted agents converse over a
//! topic × opener grid, with a mock expert analyzing the conversation
//! before every supporter turn.
//!
//! Run with: cargo run --example selfchat_campaign

use expertloop::expert::{CueConfig, DecodingParams, MockExpert, RetryPolicy};
use expertloop::prompt::{LengthUnit, PromptLevel, PromptSpec, PromptStyle};
use expertloop::selfchat::{
    run_campaign, run_selfchat, transcript_from_jsonl, transcript_to_jsonl, CampaignConfig,
    CampaignTopic, ExpertLink, ScriptedAgent,
};

fn main() -> anyhow::Result<()> {
    let expert = MockExpert::new(3);
    let link = ExpertLink {
        backend: &expert,
        prompt: PromptSpec::new(
            PromptStyle::TextGeneration,
            PromptLevel::Dialogue,
            "Analyze how the seeker feels, why, and what the supporter could do.",
            4000,
            LengthUnit::Characters,
        ),
        exemplars: Vec::new(),
        decoding: DecodingParams::default(),
        cues: CueConfig::default(),
        retry: RetryPolicy::immediate(3),
        cache: None,
    };
    let seeker = ScriptedAgent::new(1);
    let supporter = ScriptedAgent::new(2);

    let campaign = CampaignConfig {
        topics: vec![
            CampaignTopic {
                name: "job crisis".into(),
                openers: vec![
                    "I think I am about to be laid off.".into(),
                    "My manager keeps criticizing everything I do.".into(),
                ],
            },
            CampaignTopic {
                name: "breakup".into(),
                openers: vec!["My partner left me last month.".into()],
            },
        ],
        max_turns: 6,
        seed: 99,
    };

    let transcripts = run_campaign(&campaign, |topic, opener, seed| {
        run_selfchat(&seeker, &supporter, Some(&link), opener, topic, campaign.max_turns, seed)
    })?;
    println!("campaign produced {} sessions\n", transcripts.len());

    let first = &transcripts[0];
    println!("topic {:?}, session seed {}", first.topic, first.session_seed);
    for turn in &first.turns {
        println!("  {}: {}", turn.speaker.as_str(), turn.text);
        if let Some(reasoning) = &turn.reasoning {
            println!("    [analysis] {}", reasoning.raw_text);
        }
    }

    // Transcripts serialize to JSONL and round-trip byte-identically.
    let encoded = transcript_to_jsonl(first);
    let decoded = transcript_from_jsonl(&encoded)?;
    assert_eq!(&decoded, first);
    assert_eq!(transcript_to_jsonl(&decoded), encoded);
    println!("\ntranscript JSONL round-trips byte-identically ({} bytes)", encoded.len());

    // Same campaign, same seed: byte-identical output.
    let again = run_campaign(&campaign, |topic, opener, seed| {
        run_selfchat(&seeker, &supporter, Some(&link), opener, topic, campaign.max_turns, seed)
    })?;
    assert_eq!(transcripts, again);
    println!("re-running the campaign with the same seed reproduces every session");
    Ok(())
}
