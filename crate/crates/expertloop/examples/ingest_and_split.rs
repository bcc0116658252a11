//! Parse a raw JSONL corpus, normalize it, and split it 70/10/20.
//!
//! Run with: cargo run --example ingest_and_split

use expertloop::corpus::{
    extract_turn_pairs, parse_corpus, split_corpus, CorpusFormat, LabelSets, SplitSpec,
};

fn main() -> anyhow::Result<()> {
    // Ten tiny conversations in the raw wire schema. Note the consecutive
    // seeker lines in the first one: ingestion merges them.
    let mut raw = String::new();
    for i in 0..10 {
        raw.push_str(&format!(
            concat!(
                "{{\"id\":\"conv-{i}\",\"emotion\":\"anxiety\",\"problem_type\":\"job crisis\",",
                "\"situation\":\"I may lose my job.\",\"dialog\":[",
                "{{\"speaker\":\"seeker\",\"text\":\"Hi, I am worried about work.\"}},",
                "{{\"speaker\":\"seeker\",\"text\":\"Layoffs were announced today.\"}},",
                "{{\"speaker\":\"supporter\",\"text\":\"That sounds stressful. What happened?\"}},",
                "{{\"speaker\":\"seeker\",\"text\":\"My team might be cut.\"}},",
                "{{\"speaker\":\"supporter\",\"text\":\"You could update your resume this week.\"}}",
                "]}}\n"
            ),
            i = i
        ));
    }

    let labels = LabelSets::default();
    let corpus = parse_corpus(raw.as_bytes(), CorpusFormat::Jsonl, &labels)?;
    println!("parsed {} conversations", corpus.len());

    let first = &corpus.conversations[0];
    println!("\nfirst conversation after normalization (merged same-speaker turns):");
    for utterance in &first.utterances {
        println!("  {}: {}", utterance.speaker.as_str(), utterance.text);
    }

    let pairs = extract_turn_pairs(first);
    println!("\n{} (seeker, supporter) turn pairs; the second one:", pairs.len());
    println!("  history: {} utterances", pairs[1].history.len());
    println!("  seeker: {}", pairs[1].seeker_text);
    println!("  supporter: {}", pairs[1].supporter_text);

    let spec = SplitSpec::from_percentages(70, 10, 20, 7)?;
    let (train, valid, test) = split_corpus(&corpus, &spec)?;
    println!("\nsplit sizes: train {} valid {} test {}", train.len(), valid.len(), test.len());

    // The same seed always produces the same membership.
    let (train2, _, _) = split_corpus(&corpus, &spec)?;
    assert_eq!(train.conversations, train2.conversations);
    println!("re-running the split with the same seed reproduces it exactly");
    Ok(())
}
