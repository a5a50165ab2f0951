//! The fixed English stopword list shipped with the crate.
//!
//! The list is a versioned data file; its SHA-256 is recorded in every
//! corpus descriptor so preprocessing provenance survives serialization.

use std::collections::HashSet;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

const STOPWORDS_RAW: &str = include_str!("../../data/stopwords.txt");

/// Raw (unstemmed, lowercase) stopword set.
pub fn raw_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_RAW.split_whitespace().collect())
}

/// Stems of the stopwords, for marking entries of a stemmed vocabulary.
pub fn stemmed_set() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .split_whitespace()
            .map(super::porter::stem)
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    raw_set().contains(word)
}

/// Hex SHA-256 of the stopword data file.
pub fn list_hash() -> String {
    let mut hasher = Sha256::new();
    hasher.update(STOPWORDS_RAW.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn common_fillers_present() {
        assert!(is_stopword("the"));
        assert!(is_stopword("of"));
        assert!(is_stopword("and"));
        assert!(!is_stopword("cat"));
    }

    #[test]
    fn hash_is_stable_hex() {
        let h = list_hash();
        assert_eq!(h.len(), 64);
        assert_eq!(h, list_hash());
    }
}
