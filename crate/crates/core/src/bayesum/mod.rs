//! The Bayesian query-focused sentence model.
//!
//! Every word of every sentence is attributed to one of 1+K+J unigram
//! components: general English (index 0), the sentence's own document
//! background (indices 1..=K), or one of the queries the document is
//! relevant to (indices K+1..=K+J). Sentences mix these components with
//! their own Dirichlet-distributed degrees. Fitting the model with
//! approximate inference yields per-query language models that are then
//! used to rank sentences by KL divergence.

mod em;
mod ep;
mod exact;
mod sample;
mod score;
mod variational;

pub use em::{em_fit, em_fit_from, infer_sentence, init_params, log_evidence, TraceEntry};
pub use exact::{
    exact_log_evidence, infer_exact, log_evidence_exact, EXACT_COMPONENT_CAP, EXACT_WORD_CAP,
};
pub use sample::{block_params, round_robin_relevance, sample_corpus, SampleShape, SyntheticTruth};
pub use score::{query_model, score_sentences, ScoreMethod};

use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{FieldSet, RelevanceMatrix};
use crate::error::{Error, Result};
use crate::langmodel::UnigramModel;

/// Layout of the 1+K+J mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentIndex {
    num_docs: usize,
    num_queries: usize,
}

/// What a component id stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    General,
    Doc(u32),
    Query(u32),
}

impl ComponentIndex {
    pub fn new(num_docs: usize, num_queries: usize) -> Self {
        Self {
            num_docs,
            num_queries,
        }
    }

    pub fn total(&self) -> usize {
        1 + self.num_docs + self.num_queries
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn num_queries(&self) -> usize {
        self.num_queries
    }

    pub fn general(&self) -> u32 {
        0
    }

    pub fn doc(&self, k: u32) -> u32 {
        debug_assert!((k as usize) < self.num_docs);
        1 + k
    }

    pub fn query(&self, j: u32) -> u32 {
        debug_assert!((j as usize) < self.num_queries);
        1 + self.num_docs as u32 + j
    }

    pub fn label(&self, component: u32) -> Component {
        let c = component as usize;
        if c == 0 {
            Component::General
        } else if c <= self.num_docs {
            Component::Doc(component - 1)
        } else {
            debug_assert!(c < self.total());
            Component::Query(component - 1 - self.num_docs as u32)
        }
    }
}

/// The components a sentence of one document may draw from: general
/// English, the document's own background, and the queries the document
/// is relevant to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowedMask {
    components: Vec<u32>,
}

impl AllowedMask {
    /// Arbitrary component set; index 0 must be present. Test-only.
    #[cfg(test)]
    pub(crate) fn from_components(mut components: Vec<u32>) -> Self {
        components.sort_unstable();
        components.dedup();
        debug_assert!(components.first() == Some(&0));
        Self { components }
    }

    pub fn for_doc(index: &ComponentIndex, doc: u32, relevance: &RelevanceMatrix) -> Self {
        let mut components = vec![index.general(), index.doc(doc)];
        components.extend(relevance.relevant_queries(doc).iter().map(|&j| index.query(j)));
        components.sort_unstable();
        Self { components }
    }

    /// Sorted, duplicate-free component ids; index 0 is always present.
    pub fn components(&self) -> &[u32] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, component: u32) -> bool {
        self.components.binary_search(&component).is_ok()
    }

    pub fn to_bools(&self, total: usize) -> Vec<bool> {
        let mut mask = vec![false; total];
        for &c in &self.components {
            mask[c as usize] = true;
        }
        mask
    }
}

/// The full parameter set: the Dirichlet prior over sentence degrees and
/// one unigram model per component.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub index: ComponentIndex,
    /// Positive prior weights, one per component; masked per sentence at
    /// use time.
    pub alpha: Vec<f64>,
    pub general: UnigramModel,
    pub docs: Vec<UnigramModel>,
    pub queries: Vec<UnigramModel>,
}

impl ModelParams {
    pub fn component_model(&self, component: u32) -> &UnigramModel {
        match self.index.label(component) {
            Component::General => &self.general,
            Component::Doc(k) => &self.docs[k as usize],
            Component::Query(j) => &self.queries[j as usize],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.general.len()
    }

    /// Prior weights restricted to a mask, in mask order.
    pub fn alpha_masked(&self, mask: &AllowedMask) -> Vec<f64> {
        mask.components()
            .iter()
            .map(|&c| self.alpha[c as usize])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.index.total() {
            return Err(Error::DimensionMismatch {
                left: self.alpha.len(),
                right: self.index.total(),
            });
        }
        if let Some(i) = self.alpha.iter().position(|&a| !(a > 0.0)) {
            return Err(Error::NonPositiveAlpha(i));
        }
        if self.docs.len() != self.index.num_docs()
            || self.queries.len() != self.index.num_queries()
        {
            return Err(Error::ModelFormat(
                "component model counts do not match the layout".into(),
            ));
        }
        let v = self.general.len();
        if self.docs.iter().chain(&self.queries).any(|m| m.len() != v) {
            return Err(Error::ModelFormat(
                "component models have differing vocabulary sizes".into(),
            ));
        }
        Ok(())
    }

    /// Serialize to a directory: meta.json plus one sparse TSV per
    /// component model.
    pub fn save_dir(&self, dir: &Path, config_hash: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = ParamsMeta {
            format: PARAMS_FORMAT.to_string(),
            num_docs: self.index.num_docs(),
            num_queries: self.index.num_queries(),
            vocab_size: self.vocab_size(),
            alpha: self.alpha.clone(),
            config_hash: config_hash.to_string(),
        };
        let mut f = fs::File::create(dir.join("meta.json"))?;
        serde_json::to_writer(&mut f, &meta)?;
        f.flush()?;
        let write_model = |name: String, m: &UnigramModel| -> Result<()> {
            let mut f = fs::File::create(dir.join(name))?;
            m.write_tsv(&mut f)?;
            f.flush()?;
            Ok(())
        };
        write_model("g.tsv".into(), &self.general)?;
        for (k, m) in self.docs.iter().enumerate() {
            write_model(format!("d{k}.tsv"), m)?;
        }
        for (j, m) in self.queries.iter().enumerate() {
            write_model(format!("q{j}.tsv"), m)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let meta: ParamsMeta = serde_json::from_reader(BufReader::new(fs::File::open(&meta_path)?))?;
        if meta.format != PARAMS_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported model format '{}'",
                meta.format
            )));
        }
        let read_model = |name: String| -> Result<UnigramModel> {
            let path = dir.join(&name);
            let f = fs::File::open(&path)?;
            UnigramModel::read_tsv(BufReader::new(f), meta.vocab_size, &path.display().to_string())
        };
        let params = ModelParams {
            index: ComponentIndex::new(meta.num_docs, meta.num_queries),
            alpha: meta.alpha,
            general: read_model("g.tsv".into())?,
            docs: (0..meta.num_docs)
                .map(|k| read_model(format!("d{k}.tsv")))
                .collect::<Result<_>>()?,
            queries: (0..meta.num_queries)
                .map(|j| read_model(format!("q{j}.tsv")))
                .collect::<Result<_>>()?,
        };
        params.validate()?;
        Ok(params)
    }
}

const PARAMS_FORMAT: &str = "bayesum-params-v1";

#[derive(Serialize, Deserialize)]
struct ParamsMeta {
    format: String,
    num_docs: usize,
    num_queries: usize,
    vocab_size: usize,
    alpha: Vec<f64>,
    config_hash: String,
}

/// Approximate posterior for one sentence: Dirichlet parameters over the
/// allowed components, per-word responsibilities, and a log-evidence
/// estimate. Components outside the mask carry exactly zero
/// responsibility by construction.
#[derive(Debug, Clone)]
pub struct SentencePosterior {
    components: Vec<u32>,
    /// Dirichlet parameters over `components`, all positive.
    pub gamma: Vec<f64>,
    /// One row per word, aligned with `components`; rows sum to one.
    pub responsibilities: Vec<Vec<f64>>,
    /// Estimate of the log marginal likelihood of the sentence's words.
    pub log_evidence: f64,
}

impl SentencePosterior {
    pub(crate) fn new(
        mask: &AllowedMask,
        gamma: Vec<f64>,
        responsibilities: Vec<Vec<f64>>,
        log_evidence: f64,
    ) -> Self {
        Self {
            components: mask.components().to_vec(),
            gamma,
            responsibilities,
            log_evidence,
        }
    }

    /// Component ids the posterior lives on (the sentence's mask).
    pub fn components(&self) -> &[u32] {
        &self.components
    }

    /// Posterior mean of the mixture degrees over the allowed components.
    pub fn pi_mean(&self) -> Vec<f64> {
        let total: f64 = self.gamma.iter().sum();
        self.gamma.iter().map(|&g| g / total).collect()
    }

    /// Posterior mean expanded to the full component vector, with exact
    /// zeros on masked-out components.
    pub fn pi_mean_full(&self, total_components: usize) -> Vec<f64> {
        let mut full = vec![0.0; total_components];
        for (&c, &p) in self.components.iter().zip(&self.pi_mean()) {
            full[c as usize] = p;
        }
        full
    }

    /// One word's responsibilities expanded to the full component vector.
    pub fn responsibilities_full(&self, word: usize, total_components: usize) -> Vec<f64> {
        let mut full = vec![0.0; total_components];
        for (&c, &r) in self.components.iter().zip(&self.responsibilities[word]) {
            full[c as usize] = r;
        }
        full
    }

    /// Posterior mean of a single component, zero when masked out.
    pub fn pi_mean_of(&self, component: u32) -> f64 {
        match self.components.binary_search(&component) {
            Ok(i) => self.pi_mean()[i],
            Err(_) => 0.0,
        }
    }
}

/// Which approximate inference engine runs the E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Mean-field variational fixed point; the reference engine.
    Variational,
    /// Expectation propagation with Dirichlet term approximations.
    Ep,
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variational" => Ok(Engine::Variational),
            "ep" => Ok(Engine::Ep),
            other => Err(Error::InvalidConfig(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaUpdate {
    Fixed,
    Learned,
}

/// Fitting configuration. `max_iters = 0` is allowed and means "no EM":
/// the fit returns the initialization untouched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub engine: Engine,
    /// Outer EM iterations.
    pub max_iters: usize,
    /// Inner fixed-point iterations (or EP sweeps) per sentence.
    pub inner_iters: usize,
    /// Relative change of the evidence bound that counts as converged.
    pub tolerance: f64,
    pub alpha_update: AlphaUpdate,
    pub seed: u64,
    /// Query fields whose words anchor the query components.
    pub fields: FieldSet,
    /// Interpolation toward the general model applied to every re-estimated
    /// document and query model.
    pub lambda_smooth: f64,
    /// Weight of each observed query word in the M-step counts.
    pub query_word_weight: f64,
    /// Initial prior weight of the general-English component.
    pub alpha_general: f64,
    /// Initial prior weight of every other component.
    pub alpha_other: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            engine: Engine::Variational,
            max_iters: 30,
            inner_iters: 50,
            tolerance: 1e-4,
            alpha_update: AlphaUpdate::Fixed,
            seed: 0,
            fields: FieldSet::ALL,
            lambda_smooth: 0.1,
            query_word_weight: 1.0,
            alpha_general: 2.0,
            alpha_other: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.lambda_smooth > 0.0 && self.lambda_smooth < 1.0) {
            return Err(Error::InvalidSmoothingWeight(self.lambda_smooth));
        }
        if !(self.query_word_weight >= 0.0) {
            return Err(Error::InvalidConfig("query_word_weight must be >= 0".into()));
        }
        if !(self.alpha_general > 0.0 && self.alpha_other > 0.0) {
            return Err(Error::InvalidConfig("alpha values must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized configuration, recorded in model
    /// directories.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_layout() {
        let idx = ComponentIndex::new(4, 2);
        assert_eq!(idx.total(), 7);
        assert_eq!(idx.general(), 0);
        assert_eq!(idx.doc(0), 1);
        assert_eq!(idx.doc(3), 4);
        assert_eq!(idx.query(0), 5);
        assert_eq!(idx.query(1), 6);
        assert_eq!(idx.label(0), Component::General);
        assert_eq!(idx.label(4), Component::Doc(3));
        assert_eq!(idx.label(6), Component::Query(1));
    }

    #[test]
    fn mask_contains_general_own_doc_and_relevant_queries() {
        let idx = ComponentIndex::new(3, 2);
        // doc 0 relevant to query 1 only.
        let rel = RelevanceMatrix::from_pairs(&[(0, 1), (2, 0)], 3, 2);
        let mask = AllowedMask::for_doc(&idx, 0, &rel);
        assert_eq!(mask.components(), &[0, idx.doc(0), idx.query(1)]);
        assert!(mask.contains(0));
        assert!(!mask.contains(idx.doc(1)));
        let bools = mask.to_bools(idx.total());
        assert_eq!(bools.iter().filter(|&&b| b).count(), 3);
        // doc 1 relevant to nothing: just general + itself.
        let mask = AllowedMask::for_doc(&idx, 1, &rel);
        assert_eq!(mask.components(), &[0, idx.doc(1)]);
    }

    #[test]
    fn params_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let params = ModelParams {
            index: ComponentIndex::new(1, 1),
            alpha: vec![2.0, 1.0, 1.0],
            general: UnigramModel::new(vec![0.5, 0.25, 0.25]).unwrap(),
            docs: vec![UnigramModel::new(vec![0.1, 0.6, 0.3]).unwrap()],
            queries: vec![UnigramModel::new(vec![0.2, 0.2, 0.6]).unwrap()],
        };
        params.save_dir(dir.path(), "deadbeef").unwrap();
        let back = ModelParams::load_dir(dir.path()).unwrap();
        assert_eq!(back.alpha, params.alpha);
        assert_eq!(back.general, params.general);
        assert_eq!(back.docs[0], params.docs[0]);
        assert_eq!(back.queries[0], params.queries[0]);
    }

    #[test]
    fn config_hash_tracks_contents() {
        let a = FitConfig::default();
        let mut b = FitConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.max_iters = 5;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let mut c = FitConfig::default();
        c.max_iters = 0;
        assert!(c.validate().is_ok());
        c.inner_iters = 0;
        assert!(c.validate().is_err());
        let mut c = FitConfig::default();
        c.lambda_smooth = 1.0;
        assert!(c.validate().is_err());
    }
}
