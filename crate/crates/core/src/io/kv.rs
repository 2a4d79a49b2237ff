//! Line-oriented `key = value` files with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::DatasetError;

/// Ordered key/value pairs; duplicate keys are rejected on parse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", i + 1));
            };
            let k = k.trim();
            // Trailing comments are allowed after the value.
            let v = v.split('#').next().unwrap_or("").trim();
            if k.is_empty() {
                return Err(format!("line {}: empty key", i + 1));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{k}`", i + 1));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                DatasetError::Data(format!("missing file {}", path.display()))
            } else {
                DatasetError::io(path, e)
            }
        })?;
        Self::parse(&text).map_err(|m| DatasetError::Data(format!("{}: {m}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, String> {
        let raw = self.get(key).ok_or_else(|| format!("missing key `{key}`"))?;
        raw.parse()
            .map_err(|_| format!("key `{key}`: cannot parse `{raw}`"))
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, String> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| format!("key `{key}`: cannot parse `{raw}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let kv = KeyValues::parse("# header\nfps = 30\n\n  name=orbit # trailing\n").unwrap();
        assert_eq!(kv.get("fps"), Some("30"));
        assert_eq!(kv.get("name"), Some("orbit"));
        assert_eq!(kv.require::<u32>("fps").unwrap(), 30);
        assert!(kv.require::<u32>("name").is_err());
        assert_eq!(kv.get_or("missing", 5u32).unwrap(), 5);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = KeyValues::parse("a = 1\nnot a pair\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(KeyValues::parse("a = 1\na = 2\n").unwrap_err().contains("duplicate"));
    }

    #[test]
    fn text_round_trip() {
        let mut kv = KeyValues::new();
        kv.set("b", 2.5);
        kv.set("a", "x,y");
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
    }
}
