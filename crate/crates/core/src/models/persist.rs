//! `HLM1` model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "HLM1" u32 version u8 family
//! u8 punct u8 stem u8 stopwords f64 threshold
//! u32 tables  { u32 dim u64 rows { str word, dim × f64 } }
//! u32 members { u8 tag, gbm | lstm body }
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8. Pretrained embedding
//! tables are stored once and referenced by index from members.

use std::io::{Read, Write};
use std::sync::Arc;

use super::classifier::{Classifier, Family, Featurizer, Member, Preprocessing};
use super::ensemble::EnsembleModel;
use super::gbm::{GbmModel, Node, Tree};
use super::lstm::{EmbeddingSource, LstmConfig, LstmModel};
use crate::corpus::PunctMode;
use crate::error::{Error, Result};
use crate::features::{EmbedScheme, EmbeddingTable, Vocabulary, WeightScheme};

const MAGIC: &[u8; 4] = b"HLM1";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_model<W: Write>(model: &EnsembleModel, out: W) -> Result<()> {
    let mut w = Writer { out, tables: Vec::new() };
    w.model(model)
}

pub fn load_model<R: Read>(input: R) -> Result<EnsembleModel> {
    Reader { input, tables: Vec::new() }.model()
}

pub fn model_to_bytes(model: &EnsembleModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save_model(model, &mut buf)?;
    Ok(buf)
}

fn member_tables(m: &Member) -> Option<&Arc<EmbeddingTable>> {
    match &m.classifier {
        Classifier::Gbm { featurizer: Featurizer::Embedding { table, .. }, .. } => Some(table),
        Classifier::Lstm(l) => match &l.embedding {
            EmbeddingSource::Pretrained(t) => Some(t),
            EmbeddingSource::Trainable { .. } => None,
        },
        _ => None,
    }
}

struct Writer<W> {
    out: W,
    tables: Vec<Arc<EmbeddingTable>>,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out.write_all(b)?;
        Ok(())
    }

    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn table_index(&self, t: &Arc<EmbeddingTable>) -> usize {
        self.tables.iter().position(|x| Arc::ptr_eq(x, t) || **x == **t).expect("table registered")
    }

    fn model(&mut self, m: &EnsembleModel) -> Result<()> {
        self.bytes(MAGIC)?;
        self.bytes(&FORMAT_VERSION.to_le_bytes())?;
        self.u8(match m.family {
            Family::Gbm => 0,
            Family::Lstm => 1,
        })?;
        self.u8(match m.preprocessing.punct {
            PunctMode::Keep => 0,
            PunctMode::Strip => 1,
        })?;
        self.u8(m.preprocessing.stem as u8)?;
        self.u8(m.preprocessing.stopwords as u8)?;
        self.f64(m.threshold)?;

        for t in m.members.iter().filter_map(member_tables) {
            if !self.tables.iter().any(|x| Arc::ptr_eq(x, t) || **x == **t) {
                self.tables.push(t.clone());
            }
        }
        let tables = self.tables.clone();
        self.u32(tables.len())?;
        for t in &tables {
            self.table(t)?;
        }
        self.u32(m.members.len())?;
        for member in &m.members {
            match &member.classifier {
                Classifier::Gbm { featurizer, model } => {
                    self.u8(0)?;
                    self.featurizer(featurizer)?;
                    self.gbm(model)?;
                }
                Classifier::Lstm(l) => {
                    self.u8(1)?;
                    self.lstm(l)?;
                }
            }
        }
        self.out.flush()?;
        Ok(())
    }

    fn table(&mut self, t: &EmbeddingTable) -> Result<()> {
        self.u32(t.dimension())?;
        self.u64(t.len() as u64)?;
        for (i, w) in t.words().iter().enumerate() {
            self.str(w)?;
            for &v in t.row(i) {
                self.f64(v)?;
            }
        }
        Ok(())
    }

    fn vocab(&mut self, v: &Vocabulary) -> Result<()> {
        self.u64(v.ngram_min as u64)?;
        self.u64(v.ngram_max as u64)?;
        self.u64(v.corpus_doc_count)?;
        self.u64(v.len() as u64)?;
        for (i, term) in v.terms().iter().enumerate() {
            self.str(term)?;
            self.u64(v.document_frequency(i))?;
        }
        Ok(())
    }

    fn featurizer(&mut self, f: &Featurizer) -> Result<()> {
        match f {
            Featurizer::Ngrams { vocab, scheme } => {
                self.u8(0)?;
                self.u8(match scheme {
                    WeightScheme::Count => 0,
                    WeightScheme::Tfidf => 1,
                })?;
                self.vocab(vocab)
            }
            Featurizer::Embedding { table, scheme, vocab } => {
                self.u8(1)?;
                let idx = self.table_index(table);
                self.u32(idx)?;
                self.u8(match scheme {
                    EmbedScheme::Mean => 0,
                    EmbedScheme::Tfidf => 1,
                })?;
                match vocab {
                    Some(v) => {
                        self.u8(1)?;
                        self.vocab(v)
                    }
                    None => self.u8(0),
                }
            }
        }
    }

    fn gbm(&mut self, m: &GbmModel) -> Result<()> {
        self.f64(m.base_score)?;
        self.f64(m.learning_rate)?;
        self.u32(m.trees.len())?;
        for t in &m.trees {
            self.u32(t.nodes.len())?;
            for n in &t.nodes {
                match *n {
                    Node::Leaf(v) => {
                        self.u8(0)?;
                        self.f64(v)?;
                    }
                    Node::Split { feature, threshold, left, right } => {
                        self.u8(1)?;
                        self.u32(feature as usize)?;
                        self.f64(threshold)?;
                        self.u32(left as usize)?;
                        self.u32(right as usize)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn lstm(&mut self, m: &LstmModel) -> Result<()> {
        let c = &m.config;
        for v in [
            c.hidden_size,
            c.attention_size,
            c.embedding_dim,
            c.max_vocab,
            c.min_count,
            c.max_sequence,
            c.batch_size,
            c.max_epochs,
            c.early_stop_epochs,
        ] {
            self.u64(v as u64)?;
        }
        self.u8(c.bidirectional as u8)?;
        self.u8(c.attention as u8)?;
        self.f64(c.learning_rate)?;
        match &m.embedding {
            EmbeddingSource::Trainable { vocab } => {
                self.u8(0)?;
                self.u64(vocab.len() as u64)?;
                for w in vocab {
                    self.str(w)?;
                }
            }
            EmbeddingSource::Pretrained(t) => {
                self.u8(1)?;
                let idx = self.table_index(t);
                self.u32(idx)?;
            }
        }
        self.u64(m.params.len() as u64)?;
        for &p in &m.params {
            self.f64(p)?;
        }
        Ok(())
    }
}

struct Reader<R> {
    input: R,
    tables: Vec<Arc<EmbeddingTable>>,
}

fn bad(what: &str, v: u8) -> Error {
    Error::Format(format!("invalid {what} tag {v}"))
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.input.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated model file: {e}")))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(bad(what, v)),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|e| Error::Format(e.to_string()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = Vec::new();
        (&mut self.input).take(len as u64).read_to_end(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
        if buf.len() != len {
            return Err(Error::Format("truncated model file".into()));
        }
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    fn table_ref(&mut self) -> Result<Arc<EmbeddingTable>> {
        let i = self.u32()? as usize;
        self.tables.get(i).cloned().ok_or_else(|| Error::Format(format!("embedding table index {i} out of range")))
    }

    fn model(mut self) -> Result<EnsembleModel> {
        if &self.array::<4>()? != MAGIC {
            return Err(Error::Format("not an HLM1 model file".into()));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {version}")));
        }
        let family = match self.u8()? {
            0 => Family::Gbm,
            1 => Family::Lstm,
            v => return Err(bad("family", v)),
        };
        let punct = match self.u8()? {
            0 => PunctMode::Keep,
            1 => PunctMode::Strip,
            v => return Err(bad("punct", v)),
        };
        let preprocessing = Preprocessing { punct, stem: self.flag("stem")?, stopwords: self.flag("stopwords")? };
        let threshold = self.f64()?;
        for _ in 0..self.u32()? {
            let t = self.table()?;
            self.tables.push(Arc::new(t));
        }
        let n = self.u32()?;
        let mut members = Vec::new();
        for _ in 0..n {
            let classifier = match self.u8()? {
                0 => {
                    let featurizer = self.featurizer()?;
                    Classifier::Gbm { featurizer, model: self.gbm()? }
                }
                1 => Classifier::Lstm(self.lstm()?),
                v => return Err(bad("member", v)),
            };
            members.push(Member { preprocessing, classifier });
        }
        let mut rest = [0u8; 1];
        if self.input.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(EnsembleModel { family, preprocessing, members, threshold })
    }

    fn table(&mut self) -> Result<EmbeddingTable> {
        let dim = self.u32()? as usize;
        let rows = self.usize()?;
        let mut out = Vec::new();
        for _ in 0..rows {
            let w = self.str()?;
            let v = (0..dim).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            out.push((w, v));
        }
        EmbeddingTable::from_rows(dim, out)
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let ngram_min = self.usize()?;
        let ngram_max = self.usize()?;
        let docs = self.u64()?;
        let n = self.usize()?;
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for _ in 0..n {
            terms.push(self.str()?);
            df.push(self.u64()?);
        }
        Ok(Vocabulary::from_parts(terms, df, ngram_min, ngram_max, docs))
    }

    fn featurizer(&mut self) -> Result<Featurizer> {
        match self.u8()? {
            0 => {
                let scheme = match self.u8()? {
                    0 => WeightScheme::Count,
                    1 => WeightScheme::Tfidf,
                    v => return Err(bad("weight scheme", v)),
                };
                Ok(Featurizer::Ngrams { vocab: self.vocab()?, scheme })
            }
            1 => {
                let table = self.table_ref()?;
                let scheme = match self.u8()? {
                    0 => EmbedScheme::Mean,
                    1 => EmbedScheme::Tfidf,
                    v => return Err(bad("embedding scheme", v)),
                };
                let vocab = if self.flag("vocabulary")? { Some(self.vocab()?) } else { None };
                Ok(Featurizer::Embedding { table, scheme, vocab })
            }
            v => Err(bad("featurizer", v)),
        }
    }

    fn gbm(&mut self) -> Result<GbmModel> {
        let base_score = self.f64()?;
        let learning_rate = self.f64()?;
        let n = self.u32()?;
        let mut trees = Vec::new();
        for _ in 0..n {
            let count = self.u32()?;
            let mut nodes = Vec::new();
            for _ in 0..count {
                nodes.push(match self.u8()? {
                    0 => Node::Leaf(self.f64()?),
                    1 => {
                        let feature = self.u32()?;
                        let threshold = self.f64()?;
                        let left = self.u32()?;
                        let right = self.u32()?;
                        if left >= count || right >= count {
                            return Err(Error::Format("tree child index out of range".into()));
                        }
                        Node::Split { feature, threshold, left, right }
                    }
                    v => return Err(bad("tree node", v)),
                });
            }
            if nodes.is_empty() {
                return Err(Error::Format("empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        Ok(GbmModel { trees, learning_rate, base_score })
    }

    fn lstm(&mut self) -> Result<LstmModel> {
        let mut ints = [0usize; 9];
        for v in &mut ints {
            *v = self.usize()?;
        }
        let [hidden_size, attention_size, embedding_dim, max_vocab, min_count, max_sequence, batch_size, max_epochs, early_stop_epochs] =
            ints;
        let config = LstmConfig {
            hidden_size,
            attention_size,
            embedding_dim,
            max_vocab,
            min_count,
            max_sequence,
            batch_size,
            max_epochs,
            early_stop_epochs,
            bidirectional: self.flag("bidirectional")?,
            attention: self.flag("attention")?,
            learning_rate: self.f64()?,
        };
        let embedding = match self.u8()? {
            0 => {
                let n = self.usize()?;
                EmbeddingSource::Trainable { vocab: (0..n).map(|_| self.str()).collect::<Result<_>>()? }
            }
            1 => EmbeddingSource::Pretrained(self.table_ref()?),
            v => return Err(bad("embedding source", v)),
        };
        let n = self.usize()?;
        let params = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        LstmModel::from_parts(config, embedding, params)
    }
}
