//! Small text helpers shared by the parser and the corpus index.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Lowercases, strips diacritics, replaces punctuation with spaces and
/// collapses whitespace.
pub fn normalize_title(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    let mut pending_space = false;
    for c in title.nfd().filter(|c| !is_combining_mark(*c)) {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Tokens of a normalized title.
pub fn title_tokens(title: &str) -> Vec<String> {
    normalize_title(title).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Surname folded to lowercase ASCII letters, used in author-year keys.
pub fn fold_surname(name: &str) -> String {
    name.nfd().filter(|c| !is_combining_mark(*c)).filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect()
}

/// Converts byte offsets into unicode scalar offsets for one string.
pub(crate) struct CharIndex {
    byte_starts: Vec<usize>,
}

impl CharIndex {
    pub fn new(s: &str) -> Self {
        let mut byte_starts: Vec<usize> = s.char_indices().map(|(b, _)| b).collect();
        byte_starts.push(s.len());
        Self { byte_starts }
    }

    pub fn char_offset(&self, byte: usize) -> usize {
        self.byte_starts.binary_search(&byte).expect("byte offset on a char boundary")
    }
}

/// Substring by unicode scalar offsets.
pub fn char_slice(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_title("A Great  Title!"), "a great title");
        assert_eq!(normalize_title("Éxample—Title"), "example title");
        assert_eq!(normalize_title(""), "");
        assert_eq!(normalize_title("  --  "), "");
        assert_eq!(normalize_title("BERT: Pre-training"), "bert pre training");
    }

    #[test]
    fn normalize_is_idempotent() {
        for t in ["Über die Möglichkeit", "x  y", "Naïve Bayes, revisited."] {
            let once = normalize_title(t);
            assert_eq!(normalize_title(&once), once);
        }
    }

    #[test]
    fn surname_folding() {
        assert_eq!(fold_surname("Müller"), "muller");
        assert_eq!(fold_surname("O'Neil"), "oneil");
        assert_eq!(fold_surname("García-López"), "garcialopez");
    }

    #[test]
    fn char_index_maps_multibyte() {
        let s = "é[1]";
        let idx = CharIndex::new(s);
        assert_eq!(idx.char_offset(0), 0);
        assert_eq!(idx.char_offset(2), 1);
        assert_eq!(idx.char_offset(s.len()), 4);
        assert_eq!(char_slice(s, 1, 4), "[1]");
    }
}
