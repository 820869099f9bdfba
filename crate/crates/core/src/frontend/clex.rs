//! Character-level scanner for the supported C subset.

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Number(String),
    Char(String),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "&",
    "|", "^", "~", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
];

struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Scanner {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let start = self.error("unterminated block comment");
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(start),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn quoted(&mut self, quote: char) -> Result<String, ParseError> {
        let start = self.error("unterminated literal");
        let mut text = String::new();
        text.push(self.bump().expect("opening quote"));
        loop {
            match self.bump() {
                Some('\\') => {
                    text.push('\\');
                    match self.bump() {
                        Some(c) => text.push(c),
                        None => return Err(start),
                    }
                }
                Some('\n') | None => return Err(start),
                Some(c) => {
                    text.push(c);
                    if c == quote {
                        return Ok(text);
                    }
                }
            }
        }
    }

    fn number(&mut self) -> String {
        let mut text = String::new();
        while let Some(c) = self.peek(0) {
            let exponent_sign = (c == '+' || c == '-')
                && matches!(text.chars().last(), Some('e' | 'E' | 'p' | 'P'))
                && !text.starts_with("0x")
                && !text.starts_with("0X");
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || exponent_sign {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        text
    }
}

/// Scans `source` into tokens, ending with [`TokenKind::Eof`].
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut s = Scanner {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        s.skip_trivia()?;
        let (line, column) = (s.line, s.column);
        let Some(c) = s.peek(0) else {
            out.push(Token {
                kind: TokenKind::Eof,
                line,
                column,
            });
            return Ok(out);
        };
        let kind = if c.is_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(c) = s.peek(0) {
                if c.is_alphanumeric() || c == '_' {
                    text.push(c);
                    s.bump();
                } else {
                    break;
                }
            }
            TokenKind::Ident(text)
        } else if c.is_ascii_digit() || (c == '.' && s.peek(1).is_some_and(|d| d.is_ascii_digit()))
        {
            TokenKind::Number(s.number())
        } else if c == '"' {
            TokenKind::Str(s.quoted('"')?)
        } else if c == '\'' {
            TokenKind::Char(s.quoted('\'')?)
        } else if c == '#' {
            return Err(s.error("preprocessor directives are not supported"));
        } else {
            let punct = PUNCTUATORS
                .iter()
                .find(|p| p.chars().enumerate().all(|(i, pc)| s.peek(i) == Some(pc)));
            match punct {
                Some(p) => {
                    for _ in 0..p.len() {
                        s.bump();
                    }
                    TokenKind::Punct(p)
                }
                None => return Err(s.error(format!("unexpected character `{c}`"))),
            }
        };
        out.push(Token { kind, line, column });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn scans_operators_longest_first() {
        assert_eq!(
            kinds("a<<=b->c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct("<<="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct("->"),
                TokenKind::Ident("c".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn skips_comments_and_tracks_position() {
        let toks = tokenize("/* c */\n  // x\n  foo").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Ident("foo".into()));
        assert_eq!((toks[0].line, toks[0].column), (3, 3));
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds(r#"1.5e-3 0x1F 'a' "s\"t""#),
            vec![
                TokenKind::Number("1.5e-3".into()),
                TokenKind::Number("0x1F".into()),
                TokenKind::Char("'a'".into()),
                TokenKind::Str(r#""s\"t""#.into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn rejects_preprocessor() {
        let err = tokenize("int x;\n#define A 1").unwrap_err();
        assert_eq!((err.line, err.column), (2, 1));
    }
}
