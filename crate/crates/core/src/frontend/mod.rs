//! Mini-C frontend: lexical tokens, syntax trees and documentation descriptions.

pub mod ast;
pub mod clex;
mod description;
mod parser;
mod tokens;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{NodeKind, RawAst, RawNode};
pub use description::{
    extract_description, extract_description_with_cap, tokenize_text, DescriptionSequence,
    MAX_DESCRIPTION_TOKENS,
};
pub use parser::parse;
pub use tokens::{
    lex, lex_with_cap, split_identifier, TokenSequence, DELIMITERS, MAX_BODY_TOKENS,
    MAX_NAME_TOKENS,
};

/// Position-tagged syntax error for input outside the supported subset.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("comment block contains no description")]
    NoDescription,
}

/// One raw snippet as it enters the pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub source_text: String,
    pub comment_block: Option<String>,
}

/// Source text of the function body: everything from the first `{` on.
/// Comments are blanked out so they do not leak into the token stream.
pub fn function_body(source: &str) -> &str {
    match source.find('{') {
        Some(i) => &source[i..],
        None => source,
    }
}

/// Replaces `/* */` and `//` comments with spaces, leaving string and
/// character literals alone.
pub fn strip_comments(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let mut chars = source.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match (c, chars.peek()) {
            ('"' | '\'', _) => {
                quote = Some(c);
                out.push(c);
            }
            ('/', Some('/')) => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            ('/', Some('*')) => {
                chars.next();
                let mut prev = ' ';
                for n in chars.by_ref() {
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
                out.push(' ');
            }
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests;
