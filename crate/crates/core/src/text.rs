//! Tokenization and rule-based sentence segmentation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::model::Sentence;

/// Version tag of the tokenizer, recorded in report metadata.
pub const TOKENIZER_VERSION: &str = "lower-nopunct-ws/1";

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Multiset of tokens in a text together with its support.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag {
    tokens: Vec<String>,
    distinct: BTreeSet<String>,
}

impl TokenBag {
    /// Tokens in input order, repeats included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn distinct(&self) -> &BTreeSet<String> {
        &self.distinct
    }

    pub fn count(&self, token: &str) -> usize {
        self.tokens.iter().filter(|t| t.as_str() == token).count()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }

    /// Adds every token of `other` to this bag.
    pub fn extend(&mut self, other: &TokenBag) {
        self.tokens.extend(other.tokens.iter().cloned());
        self.distinct.extend(other.distinct.iter().cloned());
    }
}

/// Lowercases, deletes every Unicode punctuation character, and splits on
/// whitespace.
pub fn tokenize(text: &str) -> TokenBag {
    let cleaned: String = nfc(text)
        .to_lowercase()
        .chars()
        .filter(|c| !is_punctuation(*c))
        .collect();
    // Dropping punctuation can leave combining marks adjacent and out of
    // canonical order, so normalize once more.
    let cleaned = nfc(&cleaned);
    let tokens: Vec<String> = cleaned.split_whitespace().map(String::from).collect();
    let distinct = tokens.iter().cloned().collect();
    TokenBag { tokens, distinct }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits a paragraph after `.`, `!` or `?` when followed by whitespace
/// (closing quotes and brackets stay with the sentence). Sentences get
/// positional ids `s0`, `s1`, ...
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    split_sentences(text)
        .into_iter()
        .enumerate()
        .map(|(i, t)| Sentence::new(format!("s{i}"), t))
        .collect()
}

/// Segmentation without id assignment.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((idx, c)) = iter.next() {
        if !is_terminal(c) {
            continue;
        }
        let mut end = idx + c.len_utf8();
        while let Some(&(j, next)) = iter.peek() {
            if is_terminal(next) || is_closer(next) {
                end = j + next.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        match iter.peek() {
            Some(&(_, next)) if next.is_whitespace() => {
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
            _ => {}
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece);
    }
}
