//! Flat `key = value` text files. Blank lines and lines starting with `#`
//! are ignored; there are no inline comments (grid rows contain `#`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, found `{line}`"),
        })?;
        out.push(Entry {
            line: i + 1,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

impl Entry {
    pub fn parse<T: std::str::FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| {
            Error::config(format!(
                "line {}: invalid value `{}` for key `{}`",
                self.line, self.value, self.key
            ))
        })
    }

    pub fn unknown(&self) -> Error {
        Error::config(format!("line {}: unknown key `{}`", self.line, self.key))
    }
}
