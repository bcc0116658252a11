//! Score generated reasoning against references: BLEU-4, ROUGE-L, and the
//! pluggable embedding / entailment / likelihood scorers, with CSV and
//! JSON reports.
//!
//! Run with: cargo run --example evaluate_reasoning

use expertloop::metrics::{
    bleu4, evaluate_reasoning_set, rouge_l, tokenize, write_report_csv, EvalPair,
    HashedBagEmbedder, LexicalOverlapNli, ScorerSet, TokenizationSpec, UnigramLikelihood,
};

fn main() -> anyhow::Result<()> {
    let spec = TokenizationSpec::default();

    // Tokenization detaches punctuation and lowercases.
    let tokens = tokenize("The seeker feels anxious, even hopeless.", &spec);
    println!("tokens: {tokens:?}");

    // Sentence-level overlap metrics on a hand-checkable pair.
    let candidate = tokenize("the seeker feels sad because of the breakup", &spec);
    let reference = tokenize("the seeker feels lonely because of the breakup", &spec);
    let bleu = bleu4(&candidate, std::slice::from_ref(&reference));
    let (p, r, f) = rouge_l(&candidate, &reference);
    println!("\nbleu4 {bleu:.4}  rouge-l P {p:.4} R {r:.4} F {f:.4}");

    // A batch of (generated, reference) pairs with the full scorer set.
    let pairs = vec![
        EvalPair {
            id: "pair-0".into(),
            generated: "The seeker feels anxious because of the layoffs. The supporter could listen.".into(),
            reference: "The seeker feels anxious because of the layoffs. The supporter could listen.".into(),
        },
        EvalPair {
            id: "pair-1".into(),
            generated: "The seeker feels angry about the exam results.".into(),
            reference: "The seeker feels worried because the exam went badly.".into(),
        },
        EvalPair {
            id: "pair-2".into(),
            generated: "The supporter could suggest a walk outside.".into(),
            reference: "The seeker feels exhausted because of night shifts.".into(),
        },
    ];
    let embedder = HashedBagEmbedder::default();
    let nli = LexicalOverlapNli::default();
    let likelihood = UnigramLikelihood::default();
    let scorers = ScorerSet {
        embedder: Some(&embedder),
        nli: vec![&nli],
        likelihood: Some(&likelihood),
    };
    let outcome = evaluate_reasoning_set(&pairs, &scorers, &spec, 2)?;

    println!("\nper-pair scores:");
    for scores in &outcome.per_pair {
        println!(
            "  {}: bleu4 {:.4} rouge_l_f {:.4} embed {:.1} likelihood {:.3}",
            scores.id,
            scores.bleu4,
            scores.rouge_l_f,
            scores.embed_sim.unwrap_or_default(),
            scores.gen_likelihood.unwrap_or_default(),
        );
    }
    let aggregate = &outcome.aggregate;
    println!(
        "aggregate: bleu4 {:.4} rouge_l_f {:.4} embed {:.1}",
        aggregate.bleu4,
        aggregate.rouge_l_f,
        aggregate.embed_sim.unwrap_or_default()
    );

    let mut csv = Vec::new();
    write_report_csv(&outcome, &mut csv)?;
    println!("\nCSV report:\n{}", String::from_utf8(csv)?);
    Ok(())
}
