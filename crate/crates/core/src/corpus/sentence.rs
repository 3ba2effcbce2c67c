use serde::{Deserialize, Serialize};

use crate::interval::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    /// Character span; consecutive sentence spans tile the text.
    pub span: Span,
}

const TERMINALS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 6] = ['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const ABBREVIATIONS: [&str; 12] = ["mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "approx"];

/// Split text into sentences on `.`, `!` or `?` followed by whitespace.
///
/// Trailing whitespace belongs to the sentence it follows, so the spans
/// partition the text exactly. A single `.` after a known abbreviation does
/// not end a sentence.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }

    let mut starts = vec![0usize];
    let mut i = 0;
    while i < n {
        if !TERMINALS.contains(&chars[i]) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < n && TERMINALS.contains(&chars[j]) {
            j += 1;
        }
        let run_end = j;
        while j < n && CLOSERS.contains(&chars[j]) {
            j += 1;
        }
        if j >= n || !chars[j].is_whitespace() {
            i = j.max(i + 1);
            continue;
        }
        if run_end - i == 1 && chars[i] == '.' && follows_abbreviation(&chars, i) {
            i = j;
            continue;
        }
        let mut k = j;
        while k < n && chars[k].is_whitespace() {
            k += 1;
        }
        if k < n {
            starts.push(k);
        }
        i = k;
    }

    starts
        .iter()
        .enumerate()
        .map(|(index, &start)| {
            let end = starts.get(index + 1).copied().unwrap_or(n);
            Sentence { index, span: Span::new(start, end) }
        })
        .collect()
}

fn follows_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String =
        chars[start..dot].iter().skip_while(|c| !c.is_alphanumeric()).flat_map(|c| c.to_lowercase()).collect();
    ABBREVIATIONS.contains(&word.as_str())
}
