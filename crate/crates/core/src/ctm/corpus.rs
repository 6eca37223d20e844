use crate::error::{Error, Result};

/// Bag of documents over a fixed vocabulary; each document is a token-id sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Vec<u32>>,
    vocab_size: usize,
}

impl Corpus {
    pub fn new(docs: Vec<Vec<u32>>, vocab_size: usize) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Data("vocabulary is empty".into()));
        }
        for (d, doc) in docs.iter().enumerate() {
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(Error::Data(format!("document {d} has token id {w} outside vocabulary of {vocab_size}")));
            }
        }
        Ok(Self { docs, vocab_size })
    }

    /// Parses one document per line of whitespace-separated token ids.
    ///
    /// Without an explicit vocabulary size the largest id plus one is used.
    pub fn parse(text: &str, vocab_size: Option<usize>) -> Result<Self> {
        let mut docs = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let doc = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u32>()
                        .map_err(|_| Error::Data(format!("line {}: `{tok}` is not a token id", line_no + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            docs.push(doc);
        }
        let v = match vocab_size {
            Some(v) => v,
            None => docs.iter().flatten().map(|&w| w as usize + 1).max().unwrap_or(1),
        };
        Self::new(docs, v)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            let line: Vec<String> = doc.iter().map(|w| w.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn doc(&self, d: usize) -> &[u32] {
        &self.docs[d]
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Subset of documents by index, sharing the vocabulary.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self { docs: idx.iter().map(|&d| self.docs[d].clone()).collect(), vocab_size: self.vocab_size }
    }

    /// First `n` documents and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.docs.len());
        let (a, b) = self.docs.split_at(n);
        (Self { docs: a.to_vec(), vocab_size: self.vocab_size }, Self { docs: b.to_vec(), vocab_size: self.vocab_size })
    }
}

/// Reads a vocabulary sidecar: one word per line, line number is the id.
pub fn parse_vocab(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect()
}

/// Lowercased alphabetic words of a raw text, apostrophes kept inside words.
pub fn tokenize_words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphabetic() || c == '\''))
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Maps words to ids: the `vocab_size - 1` most frequent words of `fit_words`
/// plus an out-of-vocabulary token, all ordered by descending frequency
/// (ties broken alphabetically).
pub fn build_vocab(fit_words: &[String], vocab_size: usize, oov: &str) -> Result<Vec<String>> {
    if vocab_size < 2 {
        return Err(Error::Data("vocabulary needs room for at least one word and the OOV token".into()));
    }
    let mut freq = std::collections::HashMap::<&str, u64>::new();
    for w in fit_words {
        *freq.entry(w.as_str()).or_default() += 1;
    }
    let mut words: Vec<(&str, u64)> = freq.into_iter().collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let kept: Vec<(&str, u64)> = words.iter().take(vocab_size - 1).copied().collect();
    let oov_count: u64 = words.iter().skip(vocab_size - 1).map(|w| w.1).sum();
    let mut entries: Vec<(String, u64)> = kept.into_iter().map(|(w, c)| (w.to_string(), c)).collect();
    entries.push((oov.to_string(), oov_count));
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(entries.into_iter().map(|e| e.0).collect())
}

/// Token ids of `words` under `vocab`; unknown words map to the `oov` entry.
pub fn encode_words(words: &[String], vocab: &[String], oov: &str) -> Result<Vec<u32>> {
    let index: std::collections::HashMap<&str, u32> =
        vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let oov_id = *index.get(oov).ok_or_else(|| Error::Data(format!("vocabulary lacks the `{oov}` token")))?;
    Ok(words.iter().map(|w| *index.get(w.as_str()).unwrap_or(&oov_id)).collect())
}
