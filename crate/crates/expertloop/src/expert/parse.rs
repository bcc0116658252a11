//! Cue-phrase parser for expert reasoning text.
//!
//! Reasoning paragraphs follow a loose template — an emotion statement, a
//! cause, and supporter suggestions — so a small set of configurable cue
//! phrases recovers the three fields. Text without cues yields empty
//! fields; only empty input is an error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cue phrases steering the parse. Matching is ASCII-case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CueConfig {
    /// Introduce the emotion clause, e.g. "feels".
    pub feeling_cues: Vec<String>,
    /// Mark a cause sentence, e.g. "because".
    pub causal_cues: Vec<String>,
    /// Modal verbs that, after the supporter label, mark a suggestion.
    pub suggestion_modals: Vec<String>,
    /// Role word preceding a suggestion modal.
    pub supporter_label: String,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            feeling_cues: vec!["feels".into(), "is feeling".into()],
            causal_cues: vec!["because".into(), "worried about".into(), "due to".into()],
            suggestion_modals: vec!["could".into(), "should".into(), "may".into()],
            supporter_label: "supporter".into(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("reasoning text is empty")]
    EmptyInput,
}

/// Structured view over one reasoning paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedReasoning {
    /// Emotion clause, e.g. "overwhelmed and stressed"; empty when absent.
    pub emotion: String,
    /// Cause sentence without its terminator; empty when absent.
    pub cause: String,
    /// Suggestion sentences, verbatim.
    pub suggestions: Vec<String>,
    /// The unmodified input.
    pub raw_text: String,
}

impl ParsedReasoning {
    /// True when no field could be recovered.
    pub fn is_empty(&self) -> bool {
        self.emotion.is_empty() && self.cause.is_empty() && self.suggestions.is_empty()
    }
}

/// Earliest ASCII-case-insensitive occurrence of `needle` in `haystack`.
fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack
        .as_bytes()
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(needle.as_bytes()))
}

fn earliest_cue(haystack: &str, cues: &[String]) -> Option<(usize, usize)> {
    cues.iter()
        .filter_map(|cue| find_ci(haystack, cue).map(|pos| (pos, cue.len())))
        .min_by_key(|&(pos, _)| pos)
}

/// Split into sentences at `.`, `!`, or `?`; a trailing fragment without a
/// terminator is kept. Abbreviations are not special-cased.
fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        if matches!(ch, '.' | '!' | '?') {
            let end = i + ch.len_utf8();
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

fn is_suggestion(sentence: &str, cues: &CueConfig) -> bool {
    cues.suggestion_modals.iter().any(|modal| {
        let cue = format!("{} {}", cues.supporter_label, modal);
        find_ci(sentence, &cue).is_some()
    })
}

fn strip_terminator(sentence: &str) -> &str {
    sentence.trim_end_matches(['.', '!', '?']).trim_end()
}

fn extract_emotion(text: &str, cues: &CueConfig) -> String {
    let Some((pos, len)) = earliest_cue(text, &cues.feeling_cues) else {
        return String::new();
    };
    let rest = &text[pos + len..];
    let clause_end = rest
        .char_indices()
        .find(|(_, ch)| matches!(ch, '.' | '!' | '?'))
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    let mut clause = &rest[..clause_end];
    if let Some((cut, _)) = earliest_cue(clause, &cues.causal_cues) {
        clause = &clause[..cut];
    }
    clause.trim().trim_end_matches([',', ';', ':']).trim_end().to_string()
}

fn extract_cause(sentences: &[&str], cues: &CueConfig) -> String {
    for s in sentences {
        if !is_suggestion(s, cues) && earliest_cue(s, &cues.causal_cues).is_some() {
            return strip_terminator(s).to_string();
        }
    }
    // Template fallback: reasoning usually states the emotion first and the
    // cause second, so take the second sentence unless it is a suggestion.
    match sentences.get(1) {
        Some(s) if !is_suggestion(s, cues) => strip_terminator(s).to_string(),
        _ => String::new(),
    }
}

/// Parse a reasoning paragraph into emotion, cause, and suggestions.
///
/// The emotion is the clause after the first feeling cue, cut at any causal
/// cue and at the sentence end. The cause is the first non-suggestion
/// sentence holding a causal cue, falling back to the second sentence when
/// no causal cue appears anywhere. Suggestions are all sentences in which
/// the supporter label is followed by a suggestion modal. Unmatched fields
/// come back empty; only empty input fails.
pub fn parse_reasoning(raw_text: &str, cues: &CueConfig) -> Result<ParsedReasoning, ParseError> {
    if raw_text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let sentences = split_sentences(raw_text);
    Ok(ParsedReasoning {
        emotion: extract_emotion(raw_text, cues),
        cause: extract_cause(&sentences, cues),
        suggestions: sentences
            .iter()
            .filter(|s| is_suggestion(s, cues))
            .map(|s| s.to_string())
            .collect(),
        raw_text: raw_text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> ParsedReasoning {
        parse_reasoning(text, &CueConfig::default()).unwrap()
    }

    #[test]
    fn full_template_paragraph_parses_into_all_fields() {
        let text = "The seeker feels overwhelmed and stressed. He is worried about his \
                    upcoming test. The supporter should mention the idea of a study group \
                    or a zoom study group. The supporter could also mention Facetime with \
                    friends.";
        let parsed = parse(text);
        assert_eq!(parsed.emotion, "overwhelmed and stressed");
        assert_eq!(parsed.cause, "He is worried about his upcoming test");
        assert_eq!(
            parsed.suggestions,
            vec![
                "The supporter should mention the idea of a study group or a zoom study group."
                    .to_string(),
                "The supporter could also mention Facetime with friends.".to_string(),
            ]
        );
        assert_eq!(parsed.raw_text, text);
    }

    #[test]
    fn stem_completion_without_cause_leaves_cause_empty() {
        // A completion that continues the "… the seeker feels" stem and
        // jumps straight to a suggestion: the second-sentence fallback must
        // not mistake the suggestion for a cause.
        let text = "In this conversation, the seeker feels lonely and frustrated. \
                    The supporter could suggest the seeker to talk to a marriage counselor.";
        let parsed = parse(text);
        assert_eq!(parsed.emotion, "lonely and frustrated");
        assert_eq!(parsed.cause, "");
        assert_eq!(
            parsed.suggestions,
            vec!["The supporter could suggest the seeker to talk to a marriage counselor."
                .to_string()]
        );
    }

    #[test]
    fn bare_completion_starting_at_the_cue_still_parses() {
        let text = "feels lonely and frustrated. The supporter could suggest the seeker \
                    to talk to a marriage counselor.";
        let parsed = parse(text);
        assert_eq!(parsed.emotion, "lonely and frustrated");
    }

    #[test]
    fn worried_about_marks_the_cause_even_in_the_first_sentence() {
        let text = "In this conversation, the seeker is worried about losing the job and \
                    getting laid off. The supporter could share some related knowledge and \
                    advice.";
        let parsed = parse(text);
        assert_eq!(parsed.emotion, "");
        assert_eq!(
            parsed.cause,
            "In this conversation, the seeker is worried about losing the job and getting laid off"
        );
        assert_eq!(parsed.suggestions.len(), 1);
    }

    #[test]
    fn is_feeling_cue_is_recognized() {
        let parsed = parse("The seeker is feeling anxious today. She has an exam soon.");
        assert_eq!(parsed.emotion, "anxious today");
        assert_eq!(parsed.cause, "She has an exam soon");
    }

    #[test]
    fn emotion_clause_is_cut_at_a_causal_cue() {
        let parsed = parse("The seeker feels sad because his dog is sick.");
        assert_eq!(parsed.emotion, "sad");
        assert_eq!(parsed.cause, "The seeker feels sad because his dog is sick");
    }

    #[test]
    fn emotion_strips_trailing_commas() {
        let parsed = parse("The seeker feels alone, due to the move.");
        assert_eq!(parsed.emotion, "alone");
    }

    #[test]
    fn cueless_text_parses_to_empty() {
        let parsed = parse("A plain sentence. Another plain sentence here.");
        assert_eq!(parsed.emotion, "");
        // Fallback still offers the second sentence as a cause candidate.
        assert_eq!(parsed.cause, "Another plain sentence here");
        assert!(parsed.suggestions.is_empty());
        let single = parse("Nothing useful");
        assert!(single.is_empty());
    }

    #[test]
    fn matching_is_case_insensitive() {
        let parsed = parse("The seeker FEELS hopeless. The Supporter COULD listen closely.");
        assert_eq!(parsed.emotion, "hopeless");
        assert_eq!(parsed.suggestions, vec!["The Supporter COULD listen closely.".to_string()]);
    }

    #[test]
    fn custom_cue_lists_are_honored() {
        let cues = CueConfig {
            causal_cues: vec!["since".into()],
            ..CueConfig::default()
        };
        let parsed =
            parse_reasoning("The seeker feels low since the layoff. Hard times.", &cues)
                .unwrap();
        assert_eq!(parsed.emotion, "low");
        assert_eq!(parsed.cause, "The seeker feels low since the layoff");
    }

    #[test]
    fn empty_or_blank_input_is_an_error() {
        let cues = CueConfig::default();
        assert_eq!(parse_reasoning("", &cues).unwrap_err(), ParseError::EmptyInput);
        assert_eq!(parse_reasoning("  \n\t ", &cues).unwrap_err(), ParseError::EmptyInput);
    }

    // Normalize whitespace so substring containment ignores line wrapping.
    fn collapse(text: &str) -> String {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    proptest! {
        #[test]
        fn parser_never_fabricates_text(text in ".{0,300}") {
            let cues = CueConfig::default();
            match parse_reasoning(&text, &cues) {
                Err(ParseError::EmptyInput) => prop_assert!(text.trim().is_empty()),
                Ok(parsed) => {
                    prop_assert_eq!(parsed.raw_text.as_str(), text.as_str());
                    let raw = collapse(&text);
                    for field in [&parsed.emotion, &parsed.cause] {
                        if !field.is_empty() {
                            prop_assert!(raw.contains(&collapse(field)));
                        }
                    }
                    for s in &parsed.suggestions {
                        prop_assert!(is_suggestion(s, &cues));
                        prop_assert!(raw.contains(&collapse(s)));
                    }
                }
            }
        }

        #[test]
        fn find_ci_agrees_with_lowercase_find_on_ascii(
            haystack in "[ -~]{0,80}",
            needle in "[ -~]{1,8}",
        ) {
            let expected = haystack.to_ascii_lowercase().find(&needle.to_ascii_lowercase());
            prop_assert_eq!(find_ci(&haystack, &needle), expected);
        }
    }
}
