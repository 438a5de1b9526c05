//! Curated data files: embedded defaults, overridable with `BRAUERKIT_DATA`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

pub const DATA_ENV: &str = "BRAUERKIT_DATA";

const EMBEDDED: &[(&str, &str)] = &[
    ("facts.json", include_str!("../data/facts.json")),
    ("tmf_pages.json", include_str!("../data/tmf_pages.json")),
    ("citations.json", include_str!("../data/citations.json")),
    ("rings/Z.json", include_str!("../data/rings/Z.json")),
    ("rings/Z_omega_17.json", include_str!("../data/rings/Z_omega_17.json")),
    (
        "rings/Z_half_zeta4.json",
        include_str!("../data/rings/Z_half_zeta4.json"),
    ),
    (
        "rings/Z_third_zeta3.json",
        include_str!("../data/rings/Z_third_zeta3.json"),
    ),
    ("rings/Z_sixth.json", include_str!("../data/rings/Z_sixth.json")),
];

#[derive(Clone, Debug)]
pub struct DataFile {
    pub name: String,
    pub text: String,
    pub origin: String,
    pub version: String,
}

fn version_of(text: &str) -> String {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("version").and_then(|x| x.as_str()).map(String::from))
        .unwrap_or_else(|| "unversioned".into())
}

/// Loads `name` from the override directory when set, else the embedded copy.
pub fn load(name: &str) -> Result<DataFile> {
    if let Some(dir) = std::env::var_os(DATA_ENV) {
        let path = PathBuf::from(dir).join(name);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            return Ok(DataFile {
                name: name.into(),
                version: version_of(&text),
                origin: path.display().to_string(),
                text,
            });
        }
    }
    EMBEDDED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, t)| DataFile {
            name: n.to_string(),
            text: t.to_string(),
            origin: "embedded".into(),
            version: version_of(t),
        })
        .ok_or_else(|| Error::NoFact(format!("data file {name}")))
}

pub fn embedded_names() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(n, _)| *n)
}

/// Version string of every data file that `names` resolves to.
pub fn data_versions(names: &[&str]) -> Result<BTreeMap<String, String>> {
    names
        .iter()
        .map(|n| load(n).map(|f| (f.name, format!("{}@{}", f.version, f.origin))))
        .collect()
}

static CITATIONS: std::sync::OnceLock<BTreeMap<String, String>> = std::sync::OnceLock::new();

/// Resolves a citation key from `citations.json`; unknown keys come back verbatim.
pub fn cite(key: &str) -> String {
    let labels = CITATIONS.get_or_init(|| {
        load("citations.json")
            .ok()
            .and_then(|f| serde_json::from_str::<serde_json::Value>(&f.text).ok())
            .and_then(|v| serde_json::from_value(v["labels"].clone()).ok())
            .unwrap_or_default()
    });
    labels.get(key).cloned().unwrap_or_else(|| key.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_files_parse() {
        for name in embedded_names() {
            let f = load(name).unwrap();
            serde_json::from_str::<serde_json::Value>(&f.text).unwrap();
            assert_ne!(f.version, "unversioned", "{name}");
        }
        assert!(load("missing.json").is_err());
    }
}
