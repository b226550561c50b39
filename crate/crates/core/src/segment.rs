//! Rule-based sentence segmentation.
//!
//! A boundary is placed after a run of `.`, `!` or `?` (plus any closing
//! quotes or brackets) when it is followed by whitespace and the next visible
//! character is uppercase, a digit, or an opening quote. Newlines always end
//! a sentence. Ellipses and a small set of abbreviations never end one.
//!
//! Offsets are counted in Unicode scalar values, not bytes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

const ABBREVIATIONS: &[&str] = &["mr.", "mrs.", "ms.", "dr.", "e.g.", "i.e.", "etc."];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opening_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}' | '(')
}

/// Splits `text` into sentences.
pub fn segment(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            cuts.push(i);
            i += 1;
            continue;
        }
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j]) {
            j += 1;
        }
        let cluster = &chars[i..j];
        let dots = cluster.iter().filter(|&&c| c == '.').count();
        let mut k = j;
        while k < chars.len() && is_closing(chars[k]) {
            k += 1;
        }
        if dots >= 2 || !ends_sentence(&chars, i, j, k) {
            i = k.max(i + 1);
            continue;
        }
        cuts.push(k);
        i = k;
    }
    cuts.push(chars.len());

    let mut out = Vec::new();
    let mut start = 0;
    for cut in cuts {
        push_trimmed(&chars, start, cut, &mut out);
        start = cut;
    }
    out
}

fn ends_sentence(chars: &[char], term_start: usize, term_end: usize, after_closing: usize) -> bool {
    match chars.get(after_closing) {
        None => return true,
        Some(c) if !c.is_whitespace() => return false,
        Some(_) => {}
    }
    let next = chars[after_closing..].iter().find(|c| !c.is_whitespace() || **c == '\n');
    match next {
        None | Some('\n') => return true,
        Some(&c) if c.is_uppercase() || c.is_ascii_digit() || is_opening_quote(c) => {}
        Some(_) => return false,
    }
    if term_end - term_start == 1 && chars[term_start] == '.' {
        let word_start = chars[..term_start]
            .iter()
            .rposition(|c| c.is_whitespace())
            .map_or(0, |p| p + 1);
        let word: String = chars[word_start..=term_start]
            .iter()
            .skip_while(|c| is_opening_quote(**c))
            .flat_map(|c| c.to_lowercase())
            .collect();
        if ABBREVIATIONS.contains(&word.as_str()) {
            return false;
        }
    }
    true
}

fn push_trimmed(chars: &[char], start: usize, end: usize, out: &mut Vec<Sentence>) {
    let piece = &chars[start..end];
    let Some(first) = piece.iter().position(|c| !c.is_whitespace()) else {
        return;
    };
    let last = piece.iter().rposition(|c| !c.is_whitespace()).unwrap();
    out.push(Sentence {
        text: piece[first..=last].iter().collect(),
        start: start + first,
        end: start + last + 1,
    });
}
