use std::io::{BufRead, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::sentence::{split_sentences, Sentence};
use crate::error::{Error, Result};
use crate::interval::Span;

/// One interview or focus-group transcript with its user clips.
///
/// Clip spans and sentence spans are character offsets into `text`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub id: String,
    pub text: String,
    pub recorded_at: DateTime<Utc>,
    pub clips: Vec<Span>,
    pub sentences: Vec<Sentence>,
    byte_offsets: Vec<usize>,
}

impl Transcript {
    /// Build a transcript, segmenting sentences. Clips must already be valid.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        recorded_at: DateTime<Utc>,
        clips: Vec<Span>,
    ) -> Result<Self> {
        let text = text.into();
        let byte_offsets = char_byte_offsets(&text);
        let len = byte_offsets.len() - 1;
        if let Some(bad) = clips.iter().find(|c| c.start >= c.end || c.end > len) {
            return Err(Error::InvalidInput(format!("clip {}..{} outside text of length {len}", bad.start, bad.end)));
        }
        let sentences = split_sentences(&text);
        Ok(Transcript { id: id.into(), text, recorded_at, clips, sentences, byte_offsets })
    }

    /// Length of the text in characters.
    pub fn char_len(&self) -> usize {
        self.byte_offsets.len() - 1
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text[self.byte_offsets[span.start]..self.byte_offsets[span.end]]
    }

    pub fn sentence_text(&self, index: usize) -> &str {
        self.slice(self.sentences[index].span)
    }

    /// Sentence span with surrounding whitespace trimmed; `None` for blank sentences.
    pub fn sentence_content_span(&self, index: usize) -> Option<Span> {
        let span = self.sentences[index].span;
        let chars: Vec<char> = self.slice(span).chars().collect();
        let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
        let trail = chars.iter().rev().take_while(|c| c.is_whitespace()).count();
        if lead + trail >= chars.len() {
            None
        } else {
            Some(Span::new(span.start + lead, span.end - trail))
        }
    }
}

pub(crate) fn char_byte_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}

#[derive(Debug, Serialize, Deserialize)]
struct ClipRecord {
    start_char: i64,
    end_char: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptRecord {
    id: String,
    text: String,
    recorded_at: String,
    #[serde(default)]
    clips: Vec<ClipRecord>,
}

/// A problem tied to a line of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub transcripts: Vec<Transcript>,
    /// Repairs applied to otherwise usable records (clamped clips etc).
    pub warnings: Vec<LineIssue>,
    /// Records that could not be used at all.
    pub skipped: Vec<LineIssue>,
}

impl ParsedCorpus {
    /// The skipped records as recoverable parse errors.
    pub fn errors(&self) -> impl Iterator<Item = Error> + '_ {
        self.skipped.iter().map(|i| Error::Parse { line: i.line, message: i.message.clone() })
    }
}

/// Parse line-delimited JSON transcript records.
///
/// Malformed lines are skipped and reported with their 1-based line number.
/// Clip offsets outside the text are clamped; clips that become empty are
/// dropped. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TranscriptRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                out.skipped.push(LineIssue { line: line_no, message: e.to_string() });
                continue;
            }
        };
        let recorded_at = match DateTime::parse_from_rfc3339(&record.recorded_at) {
            Ok(t) => t.with_timezone(&Utc),
            Err(e) => {
                out.skipped
                    .push(LineIssue { line: line_no, message: format!("recorded_at {:?}: {e}", record.recorded_at) });
                continue;
            }
        };
        let len = record.text.chars().count() as i64;
        let mut clips = Vec::with_capacity(record.clips.len());
        for c in &record.clips {
            let start = c.start_char.clamp(0, len);
            let end = c.end_char.clamp(0, len);
            if (start, end) != (c.start_char, c.end_char) {
                out.warnings.push(LineIssue {
                    line: line_no,
                    message: format!("clip {}..{} clamped to {start}..{end}", c.start_char, c.end_char),
                });
            }
            if start < end {
                clips.push(Span::new(start as usize, end as usize));
            } else {
                out.warnings.push(LineIssue {
                    line: line_no,
                    message: format!("clip {}..{} is empty and was dropped", c.start_char, c.end_char),
                });
            }
        }
        out.transcripts.push(Transcript::new(record.id, record.text, recorded_at, clips)?);
    }
    Ok(out)
}

/// Write transcripts in the same line-delimited format `parse_corpus` reads.
pub fn write_corpus<W: Write>(mut out: W, transcripts: &[Transcript]) -> Result<()> {
    for t in transcripts {
        let record = TranscriptRecord {
            id: t.id.clone(),
            text: t.text.clone(),
            recorded_at: t.recorded_at.to_rfc3339_opts(SecondsFormat::Secs, true),
            clips: t.clips.iter().map(|c| ClipRecord { start_char: c.start as i64, end_char: c.end as i64 }).collect(),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_with_two_clips() {
        let input = r#"{"id":"a","text":"Hello there. I love it!","recorded_at":"2019-03-01T10:00:00Z","clips":[{"start_char":0,"end_char":5},{"start_char":13,"end_char":23}]}"#;
        let parsed = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(parsed.transcripts.len(), 1);
        let t = &parsed.transcripts[0];
        assert_eq!(t.clips, vec![Span::new(0, 5), Span::new(13, 23)]);
        assert_eq!(t.slice(t.clips[1]), "I love it!");
        assert!(parsed.warnings.is_empty());
        assert_eq!(t.sentences.len(), 2);
    }

    #[test]
    fn overlong_clip_is_clamped() {
        let input = r#"{"id":"a","text":"0123456789","recorded_at":"2019-03-01T10:00:00Z","clips":[{"start_char":4,"end_char":25}]}"#;
        let parsed = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(parsed.transcripts[0].clips, vec![Span::new(4, 10)]);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].line, 1);
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        let parsed = parse_corpus(&b""[..]).unwrap();
        assert!(parsed.transcripts.is_empty());
        assert!(parsed.warnings.is_empty());
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn malformed_lines_are_skipped_with_line_numbers() {
        let input = "{\"id\":\"a\",\"text\":\"x\",\"recorded_at\":\"2019-03-01T10:00:00Z\"}\nnot json\n{\"id\":\"b\",\"text\":\"y\",\"recorded_at\":\"yesterday\"}\n";
        let parsed = parse_corpus(input.as_bytes()).unwrap();
        assert_eq!(parsed.transcripts.len(), 1);
        let lines: Vec<usize> = parsed.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, vec![2, 3]);
        assert!(matches!(parsed.errors().next(), Some(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn write_then_parse_preserves_records() {
        let t = Transcript::new(
            "x",
            "Ünïcode text. Second one?",
            "2020-01-02T03:04:05Z".parse().unwrap(),
            vec![Span::new(2, 9)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, std::slice::from_ref(&t)).unwrap();
        let back = parse_corpus(&buf[..]).unwrap();
        assert_eq!(back.transcripts, vec![t]);
    }
}
