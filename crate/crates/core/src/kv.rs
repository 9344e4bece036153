//! Minimal `key = value` text files used for calibration and gain records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_vec3(&mut self, key: &str, v: &Vector3<f64>) -> &mut Self {
        self.set(key, format!("{} {} {}", v.x, v.y, v.z))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing key {key:?}")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| Error::Config(format!("key {key:?}: {e}")))
    }

    pub fn vec3(&self, key: &str) -> Result<Vector3<f64>> {
        let raw = self.require(key)?;
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("key {key:?}: {e}")))?;
        match parts.as_slice() {
            [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
            _ => Err(Error::Config(format!("key {key:?}: expected 3 values, got {}", parts.len()))),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl FromStr for KvFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i as u64 + 1, message: format!("expected key = value, got {raw:?}") })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut kv = KvFile::new();
        kv.set("mode", "G").set_vec3("bias", &Vector3::new(0.1, -2.0, 1e-17));
        let back: KvFile = kv.render().parse().unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.vec3("bias").unwrap(), Vector3::new(0.1, -2.0, 1e-17));
        assert!(back.vec3("mode").is_err());
        assert!(back.require("nope").is_err());
    }

    #[test]
    fn rejects_garbage_line() {
        assert!(matches!("# c\nfoo\n".parse::<KvFile>(), Err(Error::Parse { line: 2, .. })));
    }
}
