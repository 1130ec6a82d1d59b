use std::collections::BTreeSet;

use unicode_normalization::{char::is_combining_mark, UnicodeNormalization};

/// NFKD, combining marks removed, lowercased, punctuation to spaces,
/// whitespace collapsed.
pub fn normalize_name(name: &str) -> String {
    let folded: String = name
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn trigrams(normalized: &str) -> BTreeSet<[char; 3]> {
    let padded: Vec<char> = format!("  {normalized} ").chars().collect();
    padded.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
}

/// Jaccard similarity of padded character trigrams of two names.
pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize_name(a), normalize_name(b));
    if a == b {
        return 1.0;
    }
    let (ta, tb) = (trigrams(&a), trigrams(&b));
    let inter = ta.intersection(&tb).count();
    let union = ta.len() + tb.len() - inter;
    if union == 0 { 1.0 } else { inter as f64 / union as f64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("  Irène   CELINO "), "irene celino");
        assert_eq!(normalize_name("J. Smith"), "j smith");
        assert_eq!(normalize_name("Jean-Luc Dœ"), "jean luc dœ");
    }

    #[test]
    fn similarity_bounds() {
        assert_eq!(trigram_jaccard("Irene Celino", "irène celino"), 1.0);
        assert_eq!(trigram_jaccard("abc", "xyz"), 0.0);
        let s = trigram_jaccard("Jonathan Smith", "Jon Smith");
        assert!(s > 0.3 && s < 1.0);
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_bounded(a in "[a-zA-Z .-]{0,20}", b in "[a-zA-Z .-]{0,20}") {
            let x = trigram_jaccard(&a, &b);
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert_eq!(x, trigram_jaccard(&b, &a));
        }

        #[test]
        fn normalize_idempotent(a in "\\PC{0,30}") {
            let n = normalize_name(&a);
            prop_assert_eq!(normalize_name(&n), n);
        }
    }
}
