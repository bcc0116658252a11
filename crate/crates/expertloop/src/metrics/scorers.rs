//! Pluggable scorer contracts and their deterministic reference mocks.
//!
//! Neural scorers (sentence embedders, NLI models, likelihood models) are
//! out of scope; these traits pin the plumbing and the mocks make the full
//! pipeline testable offline. Every scorer declares whether it may be
//! called from several threads at once; the evaluator serializes the ones
//! that may not.

use sha2::{Digest, Sha256};

use super::{tokenize, TokenizationSpec};

/// Token-sequence embedder: one vector per token.
pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, tokens: &[String]) -> Vec<Vec<f64>>;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Natural-language-inference scorer: entailment percentage in [0, 100].
pub trait NliScorer: Send + Sync {
    fn id(&self) -> String;
    fn entailment(&self, premise: &str, hypothesis: &str) -> f64;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Average log-likelihood of one text under a model of the other; values
/// are ≤ 0. Implementations must state their direction in `id`.
pub trait LikelihoodScorer: Send + Sync {
    fn id(&self) -> String;
    fn likelihood(&self, reference: &str, candidate: &str) -> f64;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Mock embedder: every token maps to a one-hot vector at a stable hash
/// index, so equal tokens have cosine 1 and (collision aside) different
/// tokens have cosine 0.
#[derive(Debug, Clone)]
pub struct HashedBagEmbedder {
    dim: usize,
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        Self { dim: 4096 }
    }
}

impl HashedBagEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    /// Stable one-hot index for a token; exposed so tests can check for
    /// collisions in their fixtures.
    pub fn index(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(raw) % self.dim as u64) as usize
    }
}

impl Embedder for HashedBagEmbedder {
    fn id(&self) -> String {
        format!("hashed-bag-{}", self.dim)
    }

    fn embed(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        tokens
            .iter()
            .map(|token| {
                let mut v = vec![0.0; self.dim];
                v[self.index(token)] = 1.0;
                v
            })
            .collect()
    }
}

/// Mock NLI scorer: percentage of the hypothesis' distinct tokens that
/// also appear in the premise. Identical texts score 100, disjoint ones 0.
#[derive(Debug, Clone, Default)]
pub struct LexicalOverlapNli {
    spec: TokenizationSpec,
}

impl NliScorer for LexicalOverlapNli {
    fn id(&self) -> String {
        "lexical-overlap".into()
    }

    fn entailment(&self, premise: &str, hypothesis: &str) -> f64 {
        let premise_tokens: std::collections::BTreeSet<String> =
            tokenize(premise, &self.spec).into_iter().collect();
        let hypothesis_tokens: std::collections::BTreeSet<String> =
            tokenize(hypothesis, &self.spec).into_iter().collect();
        if hypothesis_tokens.is_empty() {
            return 0.0;
        }
        let shared = hypothesis_tokens.iter().filter(|t| premise_tokens.contains(*t)).count();
        100.0 * shared as f64 / hypothesis_tokens.len() as f64
    }
}

/// Mock likelihood scorer: mean log-probability of the candidate's tokens
/// under an add-one-smoothed unigram model of the reference. The id names
/// the direction: the reference models the candidate.
#[derive(Debug, Clone, Default)]
pub struct UnigramLikelihood {
    spec: TokenizationSpec,
}

impl LikelihoodScorer for UnigramLikelihood {
    fn id(&self) -> String {
        "unigram-ref-to-cand".into()
    }

    fn likelihood(&self, reference: &str, candidate: &str) -> f64 {
        let reference_tokens = tokenize(reference, &self.spec);
        let candidate_tokens = tokenize(candidate, &self.spec);
        if candidate_tokens.is_empty() {
            return 0.0;
        }
        let mut counts = std::collections::BTreeMap::new();
        for t in &reference_tokens {
            *counts.entry(t.as_str()).or_insert(0usize) += 1;
        }
        let vocab: std::collections::BTreeSet<&str> = reference_tokens
            .iter()
            .map(String::as_str)
            .chain(candidate_tokens.iter().map(String::as_str))
            .collect();
        let denom = (reference_tokens.len() + vocab.len()) as f64;
        candidate_tokens
            .iter()
            .map(|t| {
                let count = counts.get(t.as_str()).copied().unwrap_or(0);
                (((count + 1) as f64) / denom).ln()
            })
            .sum::<f64>()
            / candidate_tokens.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_bag_is_one_hot_and_stable() {
        let embedder = HashedBagEmbedder::default();
        let a = embedder.embed(&["alpha".into()]);
        let b = embedder.embed(&["alpha".into()]);
        assert_eq!(a, b);
        assert_eq!(a[0].iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(a[0][embedder.index("alpha")], 1.0);
    }

    #[test]
    fn distinct_fixture_tokens_do_not_collide() {
        let embedder = HashedBagEmbedder::default();
        let tokens = ["shared", "alpha", "omega", "the", "cat", "sat", "mat"];
        for (i, a) in tokens.iter().enumerate() {
            for b in &tokens[i + 1..] {
                assert_ne!(embedder.index(a), embedder.index(b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn lexical_overlap_is_100_on_identity_and_0_on_disjoint() {
        let nli = LexicalOverlapNli::default();
        assert_eq!(nli.entailment("the seeker feels sad", "the seeker feels sad"), 100.0);
        assert_eq!(nli.entailment("alpha beta", "gamma delta"), 0.0);
        assert_eq!(nli.entailment("anything", ""), 0.0);
    }

    #[test]
    fn lexical_overlap_counts_distinct_hypothesis_tokens() {
        let nli = LexicalOverlapNli::default();
        // Hypothesis has distinct tokens {a, b}; only "a" appears in the premise.
        assert_eq!(nli.entailment("a c", "a b a"), 50.0);
    }

    #[test]
    fn unigram_likelihood_is_nonpositive_and_orders_sensibly() {
        let scorer = UnigramLikelihood::default();
        let close = scorer.likelihood("the cat sat on the mat", "the cat sat");
        let far = scorer.likelihood("the cat sat on the mat", "quantum flux capacitor");
        assert!(close <= 0.0);
        assert!(far <= 0.0);
        assert!(close > far, "{close} vs {far}");
        assert_eq!(scorer.likelihood("anything", ""), 0.0);
    }

    #[test]
    fn likelihood_id_declares_its_direction() {
        assert!(UnigramLikelihood::default().id().contains("ref-to-cand"));
    }
}
