use std::fs;
use std::path::Path;

use morpi::morpi::MorpiConfig;
use morpi::Error;
use serde::de::DeserializeOwned;

/// Reads a TOML or JSON file (by extension) into `T`.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn load(path: Option<&Path>) -> Result<MorpiConfig, Error> {
    match path {
        Some(p) => read_structured(p),
        None => Ok(MorpiConfig::default()),
    }
}
