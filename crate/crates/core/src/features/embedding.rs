use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::Vocabulary;
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HLE1";

/// Word vectors with a mean `<UNK>` vector for unknown words.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    words: Vec<String>,
    /// Row-major, `words.len() * dimension`.
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    /// Build from rows; the first occurrence of a repeated word wins.
    pub fn from_rows(dimension: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("embedding table has no vectors"));
        }
        if dimension == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        let mut words = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dimension);
        let mut index = HashMap::with_capacity(rows.len());
        for (line, (word, v)) in rows.into_iter().enumerate() {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch { line: line + 1, expected: dimension, found: v.len() });
            }
            if index.contains_key(&word) {
                continue;
            }
            index.insert(word.clone(), words.len());
            words.push(word);
            vectors.extend(v);
        }
        let n = words.len() as f64;
        let unk = (0..dimension).map(|d| vectors.iter().skip(d).step_by(dimension).sum::<f64>() / n).collect();
        Ok(EmbeddingTable { dimension, words, vectors, index, unk })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Vector for a word, falling back to the `<UNK>` vector.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.index_of(word).map_or(&self.unk, |i| self.row(i))
    }

    /// Binary cache: magic, u32 dimension, u64 count, then per word a
    /// u32-length-prefixed UTF-8 string and `dimension` little-endian f64s.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.dimension as u32).to_le_bytes())?;
        out.write_all(&(self.words.len() as u64).to_le_bytes())?;
        for (i, w) in self.words.iter().enumerate() {
            out.write_all(&(w.len() as u32).to_le_bytes())?;
            out.write_all(w.as_bytes())?;
            for v in self.row(i) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an HLE1 embedding cache".into()));
        }
        let dimension = read_u32(&mut input)? as usize;
        let count = read_u64(&mut input)?;
        let mut rows = Vec::new();
        for _ in 0..count {
            let len = read_u32(&mut input)? as usize;
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf)?;
            let word = String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?;
            let mut v = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                let mut b = [0u8; 8];
                input.read_exact(&mut b)?;
                v.push(f64::from_le_bytes(b));
            }
            rows.push((word, v));
        }
        Self::from_rows(dimension, rows)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Parse the text format: one `word v1 v2 ... vK` entry per line.
///
/// The dimension is taken from the first entry. Blank lines are ignored.
pub fn load_embedding_table<R: BufRead>(input: R) -> Result<EmbeddingTable> {
    let mut rows = Vec::new();
    let mut dimension = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let v = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| Error::Parse { line: lineno, message: format!("bad component {p:?}: {e}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *dimension.get_or_insert(v.len());
        if v.len() != expected || expected == 0 {
            return Err(Error::DimensionMismatch { line: lineno, expected, found: v.len() });
        }
        rows.push((word.to_string(), v));
    }
    let Some(dimension) = dimension else {
        return Err(Error::Empty("embedding file has no entries"));
    };
    EmbeddingTable::from_rows(dimension, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedScheme {
    Mean,
    Tfidf,
}

/// Weighted bag of embeddings `Σ c_w · tf_w · v_w` over the distinct tokens `w`.
///
/// `tf_w` is the token's share of the document. With `Mean`, `c_w = 1`; with
/// `Tfidf`, `c_w` is the unigram idf from `vocab`, or the vocabulary's largest
/// idf for unseen words. Words missing from the table use the `<UNK>` vector.
/// An empty document maps to the zero vector.
pub fn embed_document(
    tokens: &TokenSequence,
    table: &EmbeddingTable,
    scheme: EmbedScheme,
    vocab: Option<&Vocabulary>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; table.dimension()];
    if tokens.is_empty() {
        return Ok(out);
    }
    let vocab = match (scheme, vocab) {
        (EmbedScheme::Tfidf, None) => {
            return Err(Error::InvalidInput("tfidf embedding needs a vocabulary".into()));
        }
        (_, v) => v,
    };
    let max_idf = vocab.map_or(1.0, Vocabulary::max_idf);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tokens.tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let n = tokens.len() as f64;
    for (word, count) in counts {
        let c = match (scheme, vocab) {
            (EmbedScheme::Tfidf, Some(v)) => v.index_of(word).map_or(max_idf, |i| v.idf(i)),
            _ => 1.0,
        };
        let weight = c * count as f64 / n;
        for (o, x) in out.iter_mut().zip(table.lookup(word)) {
            *o += weight * x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PunctMode;
    use crate::features::build_vocabulary;
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn doc(s: &str) -> TokenSequence {
        TokenSequence::new(s.split_whitespace().map(String::from).collect(), PunctMode::Strip)
    }

    fn table(text: &str) -> EmbeddingTable {
        load_embedding_table(text.as_bytes()).unwrap()
    }

    #[test]
    fn unk_is_mean() {
        let t = table("a 1 0\nb 0 1\n");
        assert_eq!(t.unk_vector(), [0.5, 0.5]);
        assert_eq!(t.lookup("zzz"), [0.5, 0.5]);
    }

    #[test]
    fn loader_errors() {
        assert!(matches!(load_embedding_table("".as_bytes()), Err(Error::Empty(_))));
        assert!(matches!(
            load_embedding_table("a 1 2\nb 1 2 3\n".as_bytes()),
            Err(Error::DimensionMismatch { line: 2, expected: 2, found: 3 })
        ));
        assert!(matches!(load_embedding_table("a 1 x\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn binary_cache_is_bit_exact() {
        let mut rng = rng::substream(8, "emb", 0);
        let rows: Vec<(String, Vec<f64>)> =
            (0..10_000).map(|i| (format!("w{i}"), (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
        let t = EmbeddingTable::from_rows(8, rows).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        let back = EmbeddingTable::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert!(EmbeddingTable::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn mean_scheme_examples() {
        let t = table("a 1 0\nb 0 1\n");
        assert_eq!(embed_document(&doc("a"), &t, EmbedScheme::Mean, None).unwrap(), [1.0, 0.0]);
        assert_eq!(embed_document(&doc("a b"), &t, EmbedScheme::Mean, None).unwrap(), [0.5, 0.5]);
        assert_eq!(embed_document(&doc(""), &t, EmbedScheme::Mean, None).unwrap(), [0.0, 0.0]);
        assert!(embed_document(&doc("a"), &t, EmbedScheme::Tfidf, None).is_err());
    }

    #[test]
    fn tfidf_with_unknown_word_by_hand() {
        let t = table("good 1 0 0\nbad 0 1 0\nok 0 0 1\n");
        let vocab = build_vocabulary(&[doc("good ok"), doc("good bad"), doc("ok")], 100, 1, 1).unwrap();
        // D = 3, df: good 2, ok 2, bad 1; max idf = ln 2 + 1
        let idf2 = (4.0f64 / 3.0).ln() + 1.0;
        let idf1 = 2.0f64.ln() + 1.0;
        let unk = [1.0 / 3.0; 3];
        // "good good bad zzz ok": tf good 2/5, bad 1/5, zzz 1/5, ok 1/5
        let got = embed_document(&doc("good good bad zzz ok"), &t, EmbedScheme::Tfidf, Some(&vocab)).unwrap();
        let want =
            [idf2 * 0.4 + idf1 * 0.2 * unk[0], idf1 * 0.2 + idf1 * 0.2 * unk[1], idf2 * 0.2 + idf1 * 0.2 * unk[2]];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn mean_weights_sum_to_one_and_order_is_irrelevant(
            words in prop::collection::vec(0usize..6, 1..30),
            seed in 0u64..100,
        ) {
            // one-hot table: mean embedding components are exactly the tf weights
            let rows: Vec<(String, Vec<f64>)> = (0..6)
                .map(|i| (format!("w{i}"), (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect()))
                .collect();
            let t = EmbeddingTable::from_rows(6, rows).unwrap();
            let d = TokenSequence::new(words.iter().map(|i| format!("w{i}")).collect(), PunctMode::Strip);
            let e = embed_document(&d, &t, EmbedScheme::Mean, None).unwrap();
            prop_assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mut shuffled = d.clone();
            shuffled.tokens.shuffle(&mut rng::substream(seed, "shuffle", 1));
            prop_assert_eq!(e, embed_document(&shuffled, &t, EmbedScheme::Mean, None).unwrap());
        }
    }
}
