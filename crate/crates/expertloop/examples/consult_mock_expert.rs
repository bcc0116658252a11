//! Consult an expert backend with retries and a content-addressed cache,
//! then parse the reasoning into emotion / cause / suggestions.
//!
//! Run with: cargo run --example consult_mock_expert

use expertloop::expert::{
    consult, parse_reasoning, CueConfig, DecodingParams, FileCache, FlakyExpert, FlakyFailure,
    MockExpert, RetryPolicy,
};

fn main() -> anyhow::Result<()> {
    let prompt = "Conversation:\nseeker: I am exhausted because my manager keeps moving deadlines.\n\nAnalysis: In this conversation, the seeker feels";
    let request = DecodingParams::default().request(prompt);

    // 1. A deterministic mock expert.
    let expert = MockExpert::new(42);
    let cache_dir = tempfile::tempdir()?;
    let cache = FileCache::new(cache_dir.path())?;
    let first = consult(&expert, &request, &RetryPolicy::default(), Some(&cache))?;
    println!("backend {} replied:\n  {}", first.backend_id, first.raw_text);
    println!("served from cache: {}", first.from_cache);

    // 2. The same request again: answered from the cache.
    let second = consult(&expert, &request, &RetryPolicy::default(), Some(&cache))?;
    assert!(second.from_cache);
    assert_eq!(first.raw_text, second.raw_text);
    println!("second call served from cache: {}", second.from_cache);

    // 3. A backend that fails twice with transport errors before
    //    succeeding: the retry policy rides it out.
    let flaky = FlakyExpert::new(MockExpert::new(42), 2, FlakyFailure::Transport);
    let policy = RetryPolicy::immediate(3);
    let recovered = consult(&flaky, &request, &policy, None)?;
    println!(
        "\nflaky backend needed {} attempts; got the same text: {}",
        flaky.attempts(),
        recovered.raw_text == first.raw_text
    );

    // 4. Parse the reasoning into its three pieces.
    let parsed = parse_reasoning(&first.raw_text, &CueConfig::default())?;
    println!("\nparsed reasoning:");
    println!("  emotion: {}", parsed.emotion);
    println!("  cause: {}", parsed.cause);
    for suggestion in &parsed.suggestions {
        println!("  suggestion: {suggestion}");
    }
    Ok(())
}
