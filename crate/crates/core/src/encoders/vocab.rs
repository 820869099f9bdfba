use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::EncoderError;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";

/// Token/index bijection with two reserved entries: 0 = `<PAD>`, 1 = `<UNK>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocabulary {
    /// Vocabulary holding the reserved entries followed by `tokens` in order.
    /// Repeated tokens keep their first index.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(PAD_TOKEN.to_string(), PAD);
        v.index.insert(UNK_TOKEN.to_string(), UNK);
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// Most frequent tokens first (ties alphabetical), at most `max_size`
    /// entries including the two reserved ones.
    pub fn build<'a, I, S>(sequences: I, max_size: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a String>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for t in seq {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| *t != PAD_TOKEN && *t != UNK_TOKEN)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_size.saturating_sub(2));
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Writes `index<TAB>token` lines. Backslash, tab and newline inside
    /// tokens are escaped as `\\`, `\t` and `\n`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{i}\t{}", escape(t))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("vocabulary is UTF-8")
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, EncoderError> {
        let mut tokens = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| EncoderError::Vocabulary(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| EncoderError::Vocabulary(format!("line {}: {msg}", lineno + 1));
            let (idx, tok) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != tokens.len() {
                return Err(bad("indices are not contiguous"));
            }
            tokens.push(unescape(tok));
        }
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN)
            || tokens.get(1).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(EncoderError::Vocabulary("reserved entries missing".into()));
        }
        let v = Self::from_tokens(tokens[2..].iter().cloned());
        if v.len() != tokens.len() {
            return Err(EncoderError::Vocabulary("duplicate tokens".into()));
        }
        Ok(v)
    }

    pub fn from_text(text: &str) -> Result<Self, EncoderError> {
        Self::read_from(text.as_bytes())
    }
}

fn escape(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    let mut chars = t.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}
