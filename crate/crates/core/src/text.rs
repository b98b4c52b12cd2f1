//! String normalization shared by gazetteers, rules and the surrogate maps.

use unicode_normalization::UnicodeNormalization;

/// NFC, optionally lower-cased, with whitespace runs collapsed to one space.
pub fn normalize(s: &str, case_sensitive: bool) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.trim().nfc() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        if case_sensitive {
            out.push(c);
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Case-folded NFC form; the key used by context-term matching.
pub fn fold(s: &str) -> String {
    s.nfc().flat_map(char::to_lowercase).collect()
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_and_folds() {
        assert_eq!(normalize("  Boston\t Children's  ", false), "boston children's");
        assert_eq!(normalize("Boston  Children's", true), "Boston Children's");
        // decomposed e + combining acute composes under NFC
        assert_eq!(normalize("Jose\u{301}", true), "Jos\u{e9}");
        assert_eq!(fold("MRN"), "mrn");
    }
}
