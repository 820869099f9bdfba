//! Token modality: delimiter-based lexing and identifier splitting.

use serde::{Deserialize, Serialize};

/// Maximum number of tokens kept from a function body.
pub const MAX_BODY_TOKENS: usize = 100;
/// Maximum number of sub-tokens kept from a method name.
pub const MAX_NAME_TOKENS: usize = 50;

/// Characters that separate tokens besides whitespace.
///
/// The published list is `. , " ; ) ( !`; braces are added so that block
/// delimiters never end up glued to identifiers.
pub const DELIMITERS: &[char] = &['.', ',', '"', ';', ')', '(', '!', '{', '}'];

/// Lowercased token stream of one snippet.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || DELIMITERS.contains(&c)
}

/// Splits `source` on whitespace and [`DELIMITERS`], lowercases, and keeps at
/// most [`MAX_BODY_TOKENS`] tokens.
pub fn lex(source: &str) -> TokenSequence {
    lex_with_cap(source, MAX_BODY_TOKENS)
}

pub fn lex_with_cap(source: &str, cap: usize) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut truncated = false;
    for piece in source.split(is_delimiter).filter(|p| !p.is_empty()) {
        if tokens.len() == cap {
            truncated = true;
            break;
        }
        tokens.push(piece.to_lowercase());
    }
    TokenSequence { tokens, truncated }
}

/// Splits an identifier at underscores and lower-to-upper camel-case
/// transitions, lowercasing each part. At most [`MAX_NAME_TOKENS`] parts are kept.
pub fn split_identifier(name: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for chunk in name.split('_').filter(|c| !c.is_empty()) {
        let mut current = String::new();
        let mut prev_lower = false;
        for c in chunk.chars() {
            if prev_lower && c.is_uppercase() && !current.is_empty() {
                parts.push(std::mem::take(&mut current).to_lowercase());
            }
            prev_lower = c.is_lowercase();
            current.push(c);
        }
        if !current.is_empty() {
            parts.push(current.to_lowercase());
        }
    }
    parts.truncate(MAX_NAME_TOKENS);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lex_drops_delimiters_and_braces() {
        assert_eq!(lex("if(x){").tokens, vec!["if", "x"]);
        assert_eq!(
            lex("printf(\"Hi!\"); a.b = C;").tokens,
            vec!["printf", "hi", "a", "b", "=", "c"]
        );
    }

    #[test]
    fn lex_empty() {
        let t = lex("");
        assert!(t.is_empty());
        assert!(!t.truncated);
    }

    #[test]
    fn lex_truncates_at_cap() {
        let body: Vec<String> = (0..150).map(|i| format!("id{i}")).collect();
        let t = lex(&body.join(" "));
        assert_eq!(t.len(), 100);
        assert!(t.truncated);
        assert_eq!(t.tokens[99], "id99");
        let exact = lex(&body[..100].join(" "));
        assert!(!exact.truncated);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_identifier("print_message"), vec!["print", "message"]);
        assert_eq!(split_identifier("getMaxValue"), vec!["get", "max", "value"]);
        assert_eq!(split_identifier("main"), vec!["main"]);
        assert_eq!(split_identifier("__init__"), vec!["init"]);
        assert_eq!(split_identifier("HTTPServer"), vec!["httpserver"]);
        assert_eq!(
            split_identifier("readXML_file"),
            vec!["read", "xml", "file"]
        );
    }

    proptest! {
        #[test]
        fn lex_is_idempotent(src in "[a-zA-Z0-9_ .,\";()!{}+*=<>\\[\\]\n\t-]{0,200}") {
            let once = lex_with_cap(&src, usize::MAX);
            let again = lex_with_cap(&once.tokens.join(" "), usize::MAX);
            prop_assert_eq!(&once.tokens, &again.tokens);
            for t in &once.tokens {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(is_delimiter));
                prop_assert_eq!(t.to_lowercase(), t.clone());
            }
        }

        #[test]
        fn split_concatenation_matches_input(name in "[a-zA-Z][a-zA-Z0-9_]{0,30}") {
            let parts = split_identifier(&name);
            let expected: String = name.to_lowercase().chars().filter(|&c| c != '_').collect();
            prop_assert_eq!(parts.concat(), expected);
            prop_assert!(parts.iter().all(|p| !p.is_empty()));
        }
    }
}
