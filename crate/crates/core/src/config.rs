//! Plain-text `key=value` documents used for config files and manifests.
//!
//! One pair per line, whitespace around keys and values trimmed, `#` starts a
//! comment line, blank lines ignored. List values are comma-separated. Later
//! duplicates of a key replace earlier ones.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    /// Pairs in insertion order with their source line (0 when built in code).
    entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn new() -> Self {
        KeyValues::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got {line:?}")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(i + 1, "empty key"));
            }
            kv.insert_at(k, v.trim(), i + 1);
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        KeyValues::parse(&std::fs::read_to_string(path)?)
    }

    fn insert_at(&mut self, key: &str, value: &str, line: usize) {
        match self.entries.iter_mut().find(|(k, _, _)| k == key) {
            Some(e) => {
                e.1 = value.to_string();
                e.2 = line;
            }
            None => self
                .entries
                .push((key.to_string(), value.to_string(), line)),
        }
    }

    /// Sets `key`, replacing an existing value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.insert_at(key, &value.to_string(), 0);
    }

    /// Sets `key` to comma-joined values.
    pub fn set_list<T: ToString>(&mut self, key: &str, values: &[T]) {
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.set(key, joined.join(","));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _, _)| k == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|(v, _)| v)
    }

    fn entry(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn bad(line: usize, key: &str, value: &str) -> Error {
        let msg = format!("bad value {value:?} for {key}");
        if line == 0 {
            Error::Config(msg)
        } else {
            Error::parse(line, msg)
        }
    }

    /// Parsed value of `key`, or `None` when absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| Self::bad(line, key, v)),
        }
    }

    /// Parsed value of `key`; absence is an error.
    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entry(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Self::bad(line, key, t)))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get_list(key)?
            .ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    /// `key=value` lines in insertion order.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v, _)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_lists_and_overrides() {
        let kv =
            KeyValues::parse("# header\n\n m = 576 \nhidden=64, 64\nm=128\nname=a=b\n").unwrap();
        assert_eq!(kv.require::<usize>("m").unwrap(), 128);
        assert_eq!(kv.require_list::<usize>("hidden").unwrap(), vec![64, 64]);
        assert_eq!(kv.raw("name"), Some("a=b"));
        assert_eq!(kv.get::<f64>("missing").unwrap(), None);
        assert_eq!(kv.keys().collect::<Vec<_>>(), ["m", "hidden", "name"]);
    }

    #[test]
    fn errors_name_the_line() {
        let err = KeyValues::parse("a=1\nnot a pair\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let kv = KeyValues::parse("a=1\nm=lots\n").unwrap();
        let err = kv.require::<usize>("m").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(kv.require::<usize>("n").is_err());
        assert!(KeyValues::parse("=3").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trips(pairs in proptest::collection::btree_map("[a-z_.]{1,8}", "[a-zA-Z0-9.,:/ -]{0,12}", 0..8)) {
            let mut kv = KeyValues::new();
            for (k, v) in &pairs {
                kv.set(k, v);
            }
            let back = KeyValues::parse(&kv.to_text()).unwrap();
            for (k, v) in &pairs {
                prop_assert_eq!(back.raw(k), Some(v.trim()));
            }
        }
    }
}
