//! Heuristic sentence segmentation: split on terminal punctuation
//! followed by whitespace and a capital letter, with an abbreviation
//! guard list. Used only when documents arrive as raw text; the JSONL
//! `sentences` form bypasses it entirely.

/// A sentence located in its source text. `start..end` are byte offsets;
/// spans are non-overlapping, ordered, and cover all sentence-bearing
/// text (inter-sentence whitespace is excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "sen", "rep", "st", "jr", "sr", "vs", "etc",
    "fig", "figs", "eq", "no", "nos", "inc", "ltd", "co", "corp", "dept", "est", "approx", "al",
    "ed", "eds", "vol", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec",
];

/// Split text into sentence spans with their text.
pub fn segment_sentences(text: &str) -> Vec<(SentenceSpan, &str)> {
    let mut sentences = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < n {
        let (pos, ch) = chars[i];
        if start.is_none() && !ch.is_whitespace() {
            start = Some(pos);
        }
        if start.is_some() && matches!(ch, '.' | '!' | '?') {
            // Consume the whole terminal run (e.g. "?!", "...").
            let mut last = i;
            while last + 1 < n && matches!(chars[last + 1].1, '.' | '!' | '?') {
                last += 1;
            }
            let guarded = ch == '.' && last == i && is_abbreviation(text, &chars, i);
            if !guarded && is_boundary(&chars, last) {
                let end = chars[last].0 + chars[last].1.len_utf8();
                let s = start.take().unwrap();
                sentences.push((SentenceSpan { start: s, end }, &text[s..end]));
            }
            i = last + 1;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        // Trailing text without terminal punctuation is still a sentence.
        let end = trim_end_offset(text, s);
        if end > s {
            sentences.push((SentenceSpan { start: s, end }, &text[s..end]));
        }
    }
    sentences
}

/// A terminal run at `last` ends a sentence when followed by end of text
/// or by whitespace and then an uppercase (or opening-quote) character.
fn is_boundary(chars: &[(usize, char)], last: usize) -> bool {
    let mut k = last + 1;
    if k >= chars.len() {
        return true;
    }
    if !chars[k].1.is_whitespace() {
        return false;
    }
    while k < chars.len() && chars[k].1.is_whitespace() {
        k += 1;
    }
    if k >= chars.len() {
        return true;
    }
    let next = chars[k].1;
    next.is_uppercase() || matches!(next, '"' | '\'' | '(' | '[')
}

/// True when the word immediately before the period at `i` is a known
/// abbreviation or a single letter (an initial).
fn is_abbreviation(text: &str, chars: &[(usize, char)], i: usize) -> bool {
    let mut k = i;
    while k > 0 && chars[k - 1].1.is_alphabetic() {
        k -= 1;
    }
    if k == i {
        return false;
    }
    let word: String = text[chars[k].0..chars[i].0].to_lowercase();
    word.chars().count() == 1 || ABBREVIATIONS.contains(&word.as_str())
}

fn trim_end_offset(text: &str, start: usize) -> usize {
    let trimmed = text[start..].trim_end();
    start + trimmed.len()
}
