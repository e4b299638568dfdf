//! Token counting. Hosted models count byte-pair tokens; the default counter
//! here approximates that as `ceil(bytes / 4)` and every budget in the crate
//! is expressed in counted tokens, so an exact tokenizer can be swapped in.

pub const EMBEDDING_TOKEN_LIMIT: usize = 8_191;
pub const PROMPT_TOKEN_LIMIT: usize = 4_096;

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Longest prefix of `text` that counts at most `max_tokens`.
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ApproxTokenCounter;

impl TokenCounter for ApproxTokenCounter {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }

    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        let mut end = text.len().min(max_tokens.saturating_mul(4));
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        &text[..end]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_round_up() {
        let c = ApproxTokenCounter;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("abc"), 1);
        assert_eq!(c.count("abcde"), 2);
    }

    proptest! {
        #[test]
        fn truncation_fits_and_is_a_prefix(s in "\\PC{0,200}", n in 0usize..60) {
            let c = ApproxTokenCounter;
            let t = c.truncate(&s, n);
            prop_assert!(c.count(t) <= n);
            prop_assert!(s.starts_with(t));
            if c.count(&s) <= n {
                prop_assert_eq!(t, s.as_str());
            }
        }
    }
}
