use serde::{Deserialize, Serialize};

use super::porter;
use super::stopwords::is_stopword;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PunctMode {
    Keep,
    Strip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub punct_mode: PunctMode,
    pub stemmed: bool,
}

/// A token made only of punctuation characters.
pub fn is_punct_token(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>, punct_mode: PunctMode) -> Self {
        TokenSequence { tokens, punct_mode, stemmed: false }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of non-punctuation tokens.
    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| !is_punct_token(t)).count()
    }

    pub fn strip_punct(&self) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens.iter().filter(|t| !is_punct_token(t)).cloned().collect(),
            punct_mode: PunctMode::Strip,
            stemmed: self.stemmed,
        }
    }

    pub fn without_stopwords(&self) -> TokenSequence {
        TokenSequence { tokens: self.tokens.iter().filter(|t| !is_stopword(t)).cloned().collect(), ..self.clone() }
    }

    /// Concatenate sequences sharing the same preprocessing.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a TokenSequence>, punct_mode: PunctMode) -> TokenSequence {
        let mut out = TokenSequence::new(Vec::new(), punct_mode);
        let mut stemmed = None;
        for p in parts {
            stemmed.get_or_insert(p.stemmed);
            out.tokens.extend(p.tokens.iter().cloned());
        }
        out.stemmed = stemmed.unwrap_or(false);
        out
    }
}

/// Lowercase and split text into word and punctuation tokens.
///
/// Words are runs of alphanumerics, with apostrophes kept when they sit
/// between two alphanumerics. Every other non-space character is a
/// standalone punctuation token, emitted only in [`PunctMode::Keep`].
pub fn tokenize(text: &str, punct_mode: PunctMode) -> TokenSequence {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        let inner_apostrophe =
            (c == '\'' || c == '\u{2019}') && !word.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if inner_apostrophe {
            word.push('\'');
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() && punct_mode == PunctMode::Keep {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence::new(tokens, punct_mode)
}

/// Replace every token by its Porter stem.
///
/// The stemmer is re-applied until the token stops changing, which makes the
/// operation idempotent (a single Porter pass is not, e.g. `agreed` → `agre` → `agr`).
pub fn stem_tokens(tokens: &TokenSequence) -> TokenSequence {
    TokenSequence {
        tokens: tokens.tokens.iter().map(|t| stem_to_fixpoint(t)).collect(),
        punct_mode: tokens.punct_mode,
        stemmed: true,
    }
}

fn stem_to_fixpoint(token: &str) -> String {
    let mut current = token.to_string();
    // Porter rewrites never lengthen a word; the cap bounds same-length cycles.
    for _ in 0..16 {
        let next = porter::stem(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &TokenSequence) -> Vec<&str> {
        s.tokens.iter().map(String::as_str).collect()
    }

    #[test]
    fn keep_and_strip() {
        assert_eq!(toks(&tokenize("Great, really?", PunctMode::Keep)), ["great", ",", "really", "?"]);
        assert_eq!(toks(&tokenize("Great, really?", PunctMode::Strip)), ["great", "really"]);
        assert!(tokenize("", PunctMode::Keep).is_empty());
    }

    #[test]
    fn apostrophes_inside_words() {
        assert_eq!(toks(&tokenize("I don't 'know'", PunctMode::Keep)), ["i", "don't", "'", "know", "'"]);
    }

    #[test]
    fn stemming_examples() {
        let s = stem_tokens(&tokenize("playing played caresses the", PunctMode::Strip));
        assert_eq!(toks(&s), ["play", "play", "caress", "the"]);
        assert!(s.stemmed);
    }

    #[test]
    fn word_count_ignores_punctuation() {
        assert_eq!(tokenize("Oh, wow... yes!", PunctMode::Keep).word_count(), 3);
    }

    proptest! {
        #[test]
        fn strip_equals_keep_without_punct(text in "[a-zA-Z ,.!?'\\-]{0,60}") {
            let keep = tokenize(&text, PunctMode::Keep);
            let strip = tokenize(&text, PunctMode::Strip);
            prop_assert_eq!(&keep.strip_punct().tokens, &strip.tokens);
            prop_assert!(strip.tokens.iter().all(|t| !is_punct_token(t)));
        }

        #[test]
        fn stemming_is_idempotent(word in "[a-z]{1,14}") {
            let once = stem_tokens(&TokenSequence::new(vec![word], PunctMode::Strip));
            let twice = stem_tokens(&once);
            prop_assert_eq!(once, twice);
        }
    }
}
