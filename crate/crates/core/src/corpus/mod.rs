//! Corpus ingestion and the integer-id world every other module works in.
//!
//! Documents, queries and relevance judgments are parsed from the JSONL
//! and qrels formats described in the README, tokenized (lowercase,
//! punctuation stripped, Porter-stemmed), and indexed against a shared
//! vocabulary. A corpus is immutable after load and safe to share across
//! threads.

pub mod porter;
pub mod segment;
pub mod stopwords;
pub mod tokenize;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langmodel::{CountVector, UnigramModel};

pub use segment::{segment_sentences, SentenceSpan};
pub use tokenize::{tokenize, TokenizeOptions};

/// Uniform mass mixed into background models so they are strictly
/// positive and always usable as a smoothing target.
pub const BACKGROUND_FLOOR: f64 = 1e-10;

/// Bidirectional mapping between token strings and dense 0-based ids.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    stopword: Vec<bool>,
}

impl Vocab {
    /// Build from the final token list. `stemmed` tells the stopword
    /// marker whether vocabulary entries are stems or surface forms.
    pub fn from_tokens(tokens: Vec<String>, stemmed: bool) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let stopword = tokens
            .iter()
            .map(|t| {
                stopwords::raw_set().contains(t.as_str())
                    || (stemmed && stopwords::stemmed_set().contains(t))
            })
            .collect();
        Self {
            tokens,
            index,
            stopword,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn is_stopword(&self, id: u32) -> bool {
        self.stopword[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A preprocessed sentence: token ids, the byte span it occupied in its
/// source document, and its ordinal position within the document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<u32>,
    pub span: (usize, usize),
    pub position: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

/// The four query text fields, in canonical order.
pub const FIELD_NAMES: [&str; 4] = ["title", "description", "summary", "concepts"];

/// A subset of query fields. The empty subset is legal: it is the
/// judgments-only condition in which a model sees no query text at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSet {
    pub title: bool,
    pub description: bool,
    pub summary: bool,
    pub concepts: bool,
}

impl FieldSet {
    pub const ALL: FieldSet = FieldSet {
        title: true,
        description: true,
        summary: true,
        concepts: true,
    };
    pub const NONE: FieldSet = FieldSet {
        title: false,
        description: false,
        summary: false,
        concepts: false,
    };
    pub const TITLE: FieldSet = FieldSet {
        title: true,
        description: false,
        summary: false,
        concepts: false,
    };

    fn flags(&self) -> [bool; 4] {
        [self.title, self.description, self.summary, self.concepts]
    }

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }

    /// Parse a comma-separated field list; `none` (or an empty string)
    /// selects no fields. `desc` is accepted for `description`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(Self::NONE);
        }
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::ALL);
        }
        let mut set = Self::NONE;
        for part in s.split([',', '+']) {
            match part.trim().to_ascii_lowercase().as_str() {
                "title" => set.title = true,
                "description" | "desc" => set.description = true,
                "summary" => set.summary = true,
                "concepts" => set.concepts = true,
                other => {
                    return Err(Error::InvalidConfig(format!("unknown query field '{other}'")))
                }
            }
        }
        Ok(set)
    }
}

impl std::fmt::Display for FieldSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = FIELD_NAMES
            .iter()
            .zip(self.flags())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join("+"))
        }
    }
}

/// A query with its four optional fields held as token-id sequences.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    /// Token ids per field, in [`FIELD_NAMES`] order.
    pub field_tokens: [Vec<u32>; 4],
}

impl Query {
    /// Concatenated tokens of the selected fields, in canonical field order.
    pub fn tokens_for(&self, fields: FieldSet) -> Vec<u32> {
        let mut out = Vec::new();
        for (tokens, on) in self.field_tokens.iter().zip(fields.flags()) {
            if on {
                out.extend_from_slice(tokens);
            }
        }
        out
    }
}

/// D x Q binary relevance, stored as per-query sorted lists of document
/// indices (and the transpose for mask construction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceMatrix {
    per_query: Vec<Vec<u32>>,
    per_doc: Vec<Vec<u32>>,
}

impl RelevanceMatrix {
    /// Build from (doc, query) index pairs; duplicates collapse.
    pub fn from_pairs(pairs: &[(u32, u32)], num_docs: usize, num_queries: usize) -> Self {
        let mut per_query: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); num_queries];
        let mut per_doc: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); num_docs];
        for &(d, q) in pairs {
            per_query[q as usize].insert(d);
            per_doc[d as usize].insert(q);
        }
        Self {
            per_query: per_query.into_iter().map(|s| s.into_iter().collect()).collect(),
            per_doc: per_doc.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn relevant_docs(&self, query: u32) -> &[u32] {
        &self.per_query[query as usize]
    }

    pub fn relevant_queries(&self, doc: u32) -> &[u32] {
        &self.per_doc[doc as usize]
    }

    pub fn is_relevant(&self, doc: u32, query: u32) -> bool {
        self.per_query[query as usize].binary_search(&doc).is_ok()
    }

    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    pub fn num_docs(&self) -> usize {
        self.per_doc.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.per_query.iter().map(Vec::len).sum()
    }
}

/// How the corpus text was preprocessed; fixed after construction and
/// serialized with the archive for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PreprocessDescriptor {
    pub tokenize: TokenizeOptions,
    pub min_count: usize,
    pub stopword_hash: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub tokenize: TokenizeOptions,
    /// Tokens occurring fewer than this many times corpus-wide are
    /// dropped. The default of 1 keeps everything.
    pub min_count: usize,
}

impl LoadOptions {
    fn min_count(&self) -> usize {
        self.min_count.max(1)
    }
}

/// The fully indexed corpus: vocabulary, documents, queries, relevance.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocab: Vocab,
    documents: Vec<Document>,
    queries: Vec<Query>,
    relevance: RelevanceMatrix,
    descriptor: PreprocessDescriptor,
    doc_index: HashMap<String, u32>,
    query_index: HashMap<String, u32>,
    total_words: u64,
    warnings: Vec<String>,
}

impl Corpus {
    /// Assemble a corpus from already-indexed parts, validating every
    /// cross-reference invariant.
    pub fn from_parts(
        vocab: Vocab,
        documents: Vec<Document>,
        queries: Vec<Query>,
        per_query_relevance: Vec<Vec<u32>>,
        descriptor: PreprocessDescriptor,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let v = vocab.len() as u32;
        let mut doc_index = HashMap::new();
        let mut total_words = 0u64;
        for (k, doc) in documents.iter().enumerate() {
            if doc.sentences.is_empty() {
                return Err(Error::EmptyDocument(doc.id.clone()));
            }
            if doc_index.insert(doc.id.clone(), k as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate document id '{}'", doc.id)));
            }
            let mut prev = None;
            for s in &doc.sentences {
                if s.tokens.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "document '{}' contains an empty sentence",
                        doc.id
                    )));
                }
                if s.tokens.iter().any(|&t| t >= v) {
                    return Err(Error::InvalidConfig(format!(
                        "document '{}' references a token id outside the vocabulary",
                        doc.id
                    )));
                }
                if prev.is_some_and(|p| s.position <= p) {
                    return Err(Error::InvalidConfig(format!(
                        "document '{}' has non-increasing sentence positions",
                        doc.id
                    )));
                }
                prev = Some(s.position);
                total_words += s.tokens.len() as u64;
            }
        }
        let mut query_index = HashMap::new();
        for (j, q) in queries.iter().enumerate() {
            if query_index.insert(q.id.clone(), j as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate query id '{}'", q.id)));
            }
            if q.field_tokens.iter().flatten().any(|&t| t >= v) {
                return Err(Error::InvalidConfig(format!(
                    "query '{}' references a token id outside the vocabulary",
                    q.id
                )));
            }
        }
        if per_query_relevance.len() != queries.len() {
            return Err(Error::DimensionMismatch {
                left: per_query_relevance.len(),
                right: queries.len(),
            });
        }
        let mut pairs = Vec::new();
        for (j, docs) in per_query_relevance.iter().enumerate() {
            for &d in docs {
                if d as usize >= documents.len() {
                    return Err(Error::UnknownId {
                        kind: "document",
                        ids: format!("index {d} in relevance row {j}"),
                    });
                }
                pairs.push((d, j as u32));
            }
        }
        let relevance = RelevanceMatrix::from_pairs(&pairs, documents.len(), queries.len());
        Ok(Self {
            vocab,
            documents,
            queries,
            relevance,
            descriptor,
            doc_index,
            query_index,
            total_words,
            warnings,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn doc(&self, k: u32) -> &Document {
        &self.documents[k as usize]
    }

    pub fn query(&self, j: u32) -> &Query {
        &self.queries[j as usize]
    }

    pub fn doc_idx(&self, id: &str) -> Option<u32> {
        self.doc_index.get(id).copied()
    }

    pub fn query_idx(&self, id: &str) -> Option<u32> {
        self.query_index.get(id).copied()
    }

    pub fn relevance(&self) -> &RelevanceMatrix {
        &self.relevance
    }

    pub fn descriptor(&self) -> &PreprocessDescriptor {
        &self.descriptor
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    pub fn total_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Tokens of a sentence with stopwords removed.
    pub fn filtered_tokens(&self, sentence: &Sentence) -> Vec<u32> {
        sentence
            .tokens
            .iter()
            .copied()
            .filter(|&t| !self.vocab.is_stopword(t))
            .collect()
    }

    pub fn filter_tokens(&self, tokens: &[u32]) -> Vec<u32> {
        tokens
            .iter()
            .copied()
            .filter(|&t| !self.vocab.is_stopword(t))
            .collect()
    }

    /// Corpus-wide word counts over document text.
    pub fn word_counts(&self, remove_stopwords: bool) -> CountVector {
        let mut counts = CountVector::new();
        for doc in &self.documents {
            for s in &doc.sentences {
                for &t in &s.tokens {
                    if !remove_stopwords || !self.vocab.is_stopword(t) {
                        counts.add(t, 1.0);
                    }
                }
            }
        }
        counts
    }

    /// Corpus-wide unigram model with a strictly-positive floor, the
    /// background every smoothed model leans on.
    pub fn background_model(&self, remove_stopwords: bool) -> Result<UnigramModel> {
        let counts = self.word_counts(remove_stopwords);
        Ok(UnigramModel::mle(&counts, self.vocab_size())?.with_floor(BACKGROUND_FLOOR))
    }

    /// Number of documents containing each token at least once.
    pub fn doc_frequencies(&self) -> Vec<u32> {
        let mut df = vec![0u32; self.vocab_size()];
        for doc in &self.documents {
            let mut seen = BTreeSet::new();
            for s in &doc.sentences {
                seen.extend(s.tokens.iter().copied());
            }
            for t in seen {
                df[t as usize] += 1;
            }
        }
        df
    }

    /// The same corpus under a different relevance matrix (used by
    /// noisy-judgment runs, where synthetic qrels replace the truth).
    pub fn with_relevance(&self, per_query: Vec<Vec<u32>>) -> Result<Self> {
        Corpus::from_parts(
            self.vocab.clone(),
            self.documents.clone(),
            self.queries.clone(),
            per_query,
            self.descriptor.clone(),
            self.warnings.clone(),
        )
    }

    pub fn save_archive<W: Write>(&self, w: W) -> Result<()> {
        let repr = Archive {
            format: ARCHIVE_FORMAT.to_string(),
            descriptor: self.descriptor.clone(),
            vocab: self.vocab.tokens.clone(),
            documents: self.documents.clone(),
            queries: self.queries.clone(),
            relevance: (0..self.num_queries())
                .map(|j| self.relevance.relevant_docs(j as u32).to_vec())
                .collect(),
            warnings: self.warnings.clone(),
        };
        serde_json::to_writer(w, &repr)?;
        Ok(())
    }

    pub fn load_archive<R: Read>(r: R) -> Result<Self> {
        let repr: Archive = serde_json::from_reader(r)?;
        if repr.format != ARCHIVE_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported corpus archive format '{}'",
                repr.format
            )));
        }
        let stemmed = repr.descriptor.tokenize.stem;
        Corpus::from_parts(
            Vocab::from_tokens(repr.vocab, stemmed),
            repr.documents,
            repr.queries,
            repr.relevance,
            repr.descriptor,
            repr.warnings,
        )
    }

    pub fn load_archive_path(path: &Path) -> Result<Self> {
        Self::load_archive(BufReader::new(File::open(path)?))
    }
}

const ARCHIVE_FORMAT: &str = "bayesum-corpus-v1";

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    descriptor: PreprocessDescriptor,
    vocab: Vec<String>,
    documents: Vec<Document>,
    queries: Vec<Query>,
    relevance: Vec<Vec<u32>>,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    #[serde(default)]
    sentences: Option<Vec<String>>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawQuery {
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    summary: Option<String>,
    #[serde(default)]
    concepts: Option<String>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load and index a corpus from the JSONL document and query files and a
/// TREC-like qrels file. Vocabulary ids are assigned in a deterministic
/// single-threaded pass (documents in file order, then queries), so the
/// same inputs always produce the same corpus.
pub fn load_corpus(
    doc_path: &Path,
    query_path: &Path,
    qrels_path: &Path,
    opts: &LoadOptions,
) -> Result<Corpus> {
    // Pass 1: parse and tokenize everything to strings.
    let mut raw_docs: Vec<(String, Vec<((usize, usize), Vec<String>)>)> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(doc_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line)
            .map_err(|e| parse_err(doc_path, lineno + 1, e.to_string()))?;
        let sentences: Vec<((usize, usize), Vec<String>)> = match (raw.sentences, raw.text) {
            (Some(sents), None) => {
                let mut offset = 0usize;
                sents
                    .iter()
                    .map(|s| {
                        let span = (offset, offset + s.len());
                        offset += s.len() + 1;
                        (span, tokenize(s, &opts.tokenize))
                    })
                    .collect()
            }
            (None, Some(text)) => segment_sentences(&text)
                .into_iter()
                .map(|(span, s)| ((span.start, span.end), tokenize(s, &opts.tokenize)))
                .collect(),
            _ => {
                return Err(parse_err(
                    doc_path,
                    lineno + 1,
                    "document must have exactly one of 'sentences' or 'text'",
                ))
            }
        };
        raw_docs.push((raw.id, sentences));
    }

    let mut raw_queries: Vec<(String, [Vec<String>; 4])> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(query_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuery = serde_json::from_str(&line)
            .map_err(|e| parse_err(query_path, lineno + 1, e.to_string()))?;
        let fields = [raw.title, raw.description, raw.summary, raw.concepts]
            .map(|f| tokenize(f.as_deref().unwrap_or(""), &opts.tokenize));
        raw_queries.push((raw.id, fields));
    }

    // Corpus-wide frequencies feed the min-count cutoff. Queries share
    // the vocabulary so query models and sentence models have the same
    // support, and query-only words still get ids.
    let min_count = opts.min_count();
    let mut freq: HashMap<String, usize> = HashMap::new();
    if min_count > 1 {
        for (_, sents) in &raw_docs {
            for (_, tokens) in sents {
                for t in tokens {
                    *freq.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        for (_, fields) in &raw_queries {
            for field in fields {
                for t in field {
                    *freq.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
    }
    let keep = |t: &str| min_count <= 1 || freq.get(t).copied().unwrap_or(0) >= min_count;

    // Pass 2: deterministic id assignment and index construction.
    let mut tokens: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let intern = |t: &str, tokens: &mut Vec<String>, index: &mut HashMap<String, u32>| {
        if let Some(&id) = index.get(t) {
            id
        } else {
            let id = tokens.len() as u32;
            tokens.push(t.to_string());
            index.insert(t.to_string(), id);
            id
        }
    };

    let mut warnings = Vec::new();
    let mut documents = Vec::new();
    for (id, sents) in raw_docs {
        let mut sentences = Vec::new();
        for (position, (span, words)) in sents.into_iter().enumerate() {
            let ids: Vec<u32> = words
                .iter()
                .filter(|t| keep(t))
                .map(|t| intern(t, &mut tokens, &mut index))
                .collect();
            if ids.is_empty() {
                let w = format!(
                    "document '{}': sentence {} empty after preprocessing, dropped",
                    id, position
                );
                log::warn!("{w}");
                warnings.push(w);
                continue;
            }
            sentences.push(Sentence {
                tokens: ids,
                span,
                position: position as u32,
            });
        }
        if sentences.is_empty() {
            return Err(Error::EmptyDocument(id));
        }
        documents.push(Document { id, sentences });
    }

    let mut queries = Vec::new();
    for (id, fields) in raw_queries {
        let field_tokens = fields.map(|field| {
            field
                .iter()
                .filter(|t| keep(t))
                .map(|t| intern(t, &mut tokens, &mut index))
                .collect::<Vec<u32>>()
        });
        queries.push(Query { id, field_tokens });
    }

    // Qrels.
    let doc_index: HashMap<&str, u32> = documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i as u32))
        .collect();
    let query_index: HashMap<&str, u32> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| (q.id.as_str(), i as u32))
        .collect();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(qrels_path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_err(
                qrels_path,
                lineno + 1,
                format!("expected 3 tab-separated columns, got {}", cols.len()),
            ));
        }
        let rel = match cols[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(
                    qrels_path,
                    lineno + 1,
                    format!("relevance must be 0 or 1, got '{other}'"),
                ))
            }
        };
        let q = query_index.get(cols[0]);
        let d = doc_index.get(cols[1]);
        if q.is_none() {
            unknown.push(format!("query '{}' ({}:{})", cols[0], qrels_path.display(), lineno + 1));
        }
        if d.is_none() {
            unknown.push(format!("document '{}' ({}:{})", cols[1], qrels_path.display(), lineno + 1));
        }
        if let (Some(&q), Some(&d)) = (q, d) {
            if rel {
                pairs.push((d, q));
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownId {
            kind: "qrels",
            ids: unknown.join(", "),
        });
    }

    let relevance = RelevanceMatrix::from_pairs(&pairs, documents.len(), queries.len());
    let per_query = (0..queries.len())
        .map(|j| relevance.relevant_docs(j as u32).to_vec())
        .collect();

    let corpus = Corpus::from_parts(
        Vocab::from_tokens(tokens, opts.tokenize.stem),
        documents,
        queries,
        per_query,
        PreprocessDescriptor {
            tokenize: opts.tokenize,
            min_count,
            stopword_hash: stopwords::list_hash(),
        },
        warnings,
    )?;

    log::info!(
        "corpus loaded: J={} queries, K={} documents, {} sentences, {} words, {} relevant pairs",
        corpus.num_queries(),
        corpus.num_docs(),
        corpus.total_sentences(),
        corpus.total_words(),
        corpus.relevance().num_pairs(),
    );
    Ok(corpus)
}

/// Parse a qrels file against an existing corpus, returning per-query
/// sorted relevant-document index lists. Unknown ids are an error.
pub fn read_qrels_for(path: &Path, corpus: &Corpus) -> Result<Vec<Vec<u32>>> {
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected 3 tab-separated columns, got {}", cols.len()),
            ));
        }
        let rel = match cols[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("relevance must be 0 or 1, got '{other}'"),
                ))
            }
        };
        let q = corpus.query_idx(cols[0]);
        let d = corpus.doc_idx(cols[1]);
        if q.is_none() {
            unknown.push(format!("query '{}' ({}:{})", cols[0], path.display(), lineno + 1));
        }
        if d.is_none() {
            unknown.push(format!("document '{}' ({}:{})", cols[1], path.display(), lineno + 1));
        }
        if let (Some(q), Some(d)) = (q, d) {
            if rel {
                pairs.push((d, q));
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownId {
            kind: "qrels",
            ids: unknown.join(", "),
        });
    }
    let matrix = RelevanceMatrix::from_pairs(&pairs, corpus.num_docs(), corpus.num_queries());
    Ok((0..corpus.num_queries())
        .map(|j| matrix.relevant_docs(j as u32).to_vec())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn tiny_corpus() -> (tempfile::TempDir, Corpus) {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(
            &dir,
            "docs.jsonl",
            r#"{"id":"d1","sentences":["The cat sat on the mat.","Dogs run fast."]}
{"id":"d2","text":"Fish swim. Birds fly south."}
"#,
        );
        let queries = write_file(
            &dir,
            "queries.jsonl",
            r#"{"id":"q1","title":"cat mat","description":"where cats sit"}
{"id":"q2","title":"flying birds"}
"#,
        );
        let qrels = write_file(&dir, "qrels.tsv", "q1\td1\t1\nq2\td2\t1\nq1\td2\t0\n");
        let corpus = load_corpus(&docs, &queries, &qrels, &LoadOptions::default()).unwrap();
        (dir, corpus)
    }

    #[test]
    fn indexes_minimal_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(&dir, "d.jsonl", r#"{"id":"d1","sentences":["one two"]}"#);
        let queries = write_file(&dir, "q.jsonl", r#"{"id":"q1","title":"one"}"#);
        let qrels = write_file(&dir, "r.tsv", "q1\td1\t1\n");
        let c = load_corpus(&docs, &queries, &qrels, &LoadOptions::default()).unwrap();
        assert_eq!(c.num_docs(), 1);
        assert_eq!(c.num_queries(), 1);
        assert!(c.relevance().is_relevant(0, 0));
    }

    #[test]
    fn qrels_referencing_unknown_doc_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(&dir, "d.jsonl", r#"{"id":"d1","sentences":["one two"]}"#);
        let queries = write_file(&dir, "q.jsonl", r#"{"id":"q1","title":"one"}"#);
        let qrels = write_file(&dir, "r.tsv", "q1\tdX\t1\n");
        let err = load_corpus(&docs, &queries, &qrels, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownId { .. }), "{err}");
        assert!(err.to_string().contains("dX"));
    }

    #[test]
    fn malformed_document_line_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(&dir, "d.jsonl", "{\"id\":\"d1\",\"sentences\":[\"ok\"]}\nnot json\n");
        let queries = write_file(&dir, "q.jsonl", r#"{"id":"q1"}"#);
        let qrels = write_file(&dir, "r.tsv", "");
        let err = load_corpus(&docs, &queries, &qrels, &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("d.jsonl:2"), "{msg}");
    }

    #[test]
    fn empty_sentences_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(
            &dir,
            "d.jsonl",
            r#"{"id":"d1","sentences":["real words here","...","more words"]}"#,
        );
        let queries = write_file(&dir, "q.jsonl", r#"{"id":"q1","title":"words"}"#);
        let qrels = write_file(&dir, "r.tsv", "q1\td1\t1\n");
        let c = load_corpus(&docs, &queries, &qrels, &LoadOptions::default()).unwrap();
        assert_eq!(c.doc(0).sentences.len(), 2);
        assert_eq!(c.warnings().len(), 1);
        // Positions keep their original ordinals.
        assert_eq!(c.doc(0).sentences[1].position, 2);
    }

    #[test]
    fn vocab_round_trip_and_query_only_words() {
        let (_dir, c) = tiny_corpus();
        for id in 0..c.vocab_size() as u32 {
            let t = c.vocab().token(id).to_string();
            assert_eq!(c.vocab().id(&t), Some(id));
        }
        // "flying" only occurs in a query; it still has an id (stemmed to "fly").
        assert!(c.vocab().id("fly").is_some());
    }

    #[test]
    fn word_totals_consistent() {
        let (_dir, c) = tiny_corpus();
        let recomputed: u64 = c
            .documents()
            .iter()
            .flat_map(|d| &d.sentences)
            .map(|s| s.tokens.len() as u64)
            .sum();
        assert_eq!(recomputed, c.total_words());
        assert_eq!(c.word_counts(false).total(), c.total_words() as f64);
    }

    #[test]
    fn archive_round_trip_is_byte_stable() {
        let (_dir, c) = tiny_corpus();
        let mut bytes = Vec::new();
        c.save_archive(&mut bytes).unwrap();
        let reloaded = Corpus::load_archive(&bytes[..]).unwrap();
        let mut bytes2 = Vec::new();
        reloaded.save_archive(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
        assert_eq!(reloaded.total_words(), c.total_words());
        assert_eq!(reloaded.vocab_size(), c.vocab_size());
    }

    #[test]
    fn min_count_prunes_rare_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let docs = write_file(
            &dir,
            "d.jsonl",
            r#"{"id":"d1","sentences":["common common rare","common again common"]}"#,
        );
        let queries = write_file(&dir, "q.jsonl", r#"{"id":"q1","title":"common"}"#);
        let qrels = write_file(&dir, "r.tsv", "q1\td1\t1\n");
        let opts = LoadOptions {
            min_count: 2,
            ..Default::default()
        };
        let c = load_corpus(&docs, &queries, &qrels, &opts).unwrap();
        assert!(c.vocab().id("rare").is_none());
        assert!(c.vocab().id("common").is_some());
    }

    #[test]
    fn field_set_parse_and_display() {
        assert_eq!(FieldSet::parse("none").unwrap(), FieldSet::NONE);
        assert_eq!(FieldSet::parse("all").unwrap(), FieldSet::ALL);
        let td = FieldSet::parse("title,desc").unwrap();
        assert!(td.title && td.description && !td.summary);
        assert_eq!(td.to_string(), "title+description");
        assert_eq!(FieldSet::parse(&td.to_string()).unwrap(), td);
        assert!(FieldSet::parse("bogus").is_err());
    }

    #[test]
    fn stopword_flags_respect_stemming() {
        let (_dir, c) = tiny_corpus();
        let the = c.vocab().id("the").unwrap();
        assert!(c.vocab().is_stopword(the));
        let cat = c.vocab().id("cat").unwrap();
        assert!(!c.vocab().is_stopword(cat));
    }
}
