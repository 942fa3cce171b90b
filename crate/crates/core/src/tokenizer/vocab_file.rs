//! Plain-text vocabulary format:
//!
//! ```text
//! #codemodal-bpe v1 tokens=<N> reserved=<R> merges=<M>
//! <token 0>
//! ...
//! <token N-1>
//! #merges
//! <left> <right>
//! ...
//! ```
//!
//! Line `k` after the header holds token id `k`. Backslash, space, tab, CR
//! and LF inside tokens are escaped as `\\`, `\s`, `\t`, `\r`, `\n`.

use super::Vocab;
use crate::error::{Error, Result};

const MAGIC: &str = "#codemodal-bpe v1";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match it.next() {
            Some('\\') => '\\',
            Some('s') => ' ',
            Some('t') => '\t',
            Some('r') => '\r',
            Some('n') => '\n',
            other => {
                return Err(Error::Tokenizer(format!("bad escape \\{other:?} in {s:?}")));
            }
        });
    }
    Ok(out)
}

pub(super) fn write(v: &Vocab) -> String {
    let mut out = format!("{MAGIC} tokens={} reserved={} merges={}\n", v.tokens.len(), v.num_reserved, v.merges.len());
    for t in &v.tokens {
        out.push_str(&escape(t));
        out.push('\n');
    }
    out.push_str("#merges\n");
    for (l, r) in &v.merges {
        out.push_str(&format!("{} {}\n", escape(l), escape(r)));
    }
    out
}

fn header_field(header: &str, name: &str) -> Result<usize> {
    header
        .split_whitespace()
        .find_map(|f| f.strip_prefix(name)?.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Tokenizer(format!("vocab header missing `{name}`")))
}

#[allow(clippy::type_complexity)]
pub(super) fn read(s: &str) -> Result<(Vec<String>, Vec<(String, String)>, usize)> {
    let mut lines = s.lines();
    let header = lines
        .next()
        .filter(|h| h.starts_with(MAGIC))
        .ok_or_else(|| Error::Tokenizer("not a vocab file (bad header)".into()))?;
    let n = header_field(header, "tokens")?;
    let reserved = header_field(header, "reserved")?;
    let m = header_field(header, "merges")?;
    if reserved > n {
        return Err(Error::Tokenizer("reserved count exceeds token count".into()));
    }
    let tokens = (0..n)
        .map(|i| {
            lines.next().ok_or_else(|| Error::Tokenizer(format!("vocab truncated at token {i}"))).and_then(unescape)
        })
        .collect::<Result<Vec<_>>>()?;
    if lines.next() != Some("#merges") {
        return Err(Error::Tokenizer("missing #merges section".into()));
    }
    let merges = (0..m)
        .map(|i| {
            let line = lines.next().ok_or_else(|| Error::Tokenizer(format!("vocab truncated at merge {i}")))?;
            let (l, r) = line.split_once(' ').ok_or_else(|| Error::Tokenizer(format!("bad merge line {line:?}")))?;
            Ok((unescape(l)?, unescape(r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tokens, merges, reserved))
}
