//! Dataset manifests: where a dataset comes from, which local files hold it,
//! and how each CSV column is interpreted.

use std::path::{Path, PathBuf};

use fids::dataset::validate_schema;
use fids::ColumnSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// The benchmark datasets in report order.
pub const BENCHMARK_DATASETS: [&str; 6] = [
    "abalone",
    "balance-scale",
    "breast-cancer",
    "covertype",
    "income",
    "iris",
];

const BUILTIN: [(&str, &str); 8] = [
    ("abalone", include_str!("../manifests/abalone.toml")),
    ("balance-scale", include_str!("../manifests/balance-scale.toml")),
    ("breast-cancer", include_str!("../manifests/breast-cancer.toml")),
    (
        "breast-cancer-wisconsin",
        include_str!("../manifests/breast-cancer-wisconsin.toml"),
    ),
    ("breast-cancer-wdbc", include_str!("../manifests/breast-cancer-wdbc.toml")),
    ("covertype", include_str!("../manifests/covertype.toml")),
    ("income", include_str!("../manifests/income.toml")),
    ("iris", include_str!("../manifests/iris.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    Categorical,
    TargetClass,
    TargetNumeric,
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnEntry {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub categories: Vec<String>,
    /// Expands to `repeat` columns named `name1`, `name2`, ...
    #[serde(default)]
    pub repeat: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Relative to the data directory.
    pub path: String,
    pub url: String,
    #[serde(default)]
    pub sha256: Option<String>,
    #[serde(default = "yes")]
    pub required: bool,
    #[serde(default)]
    pub gzip: bool,
    /// Leading lines to drop before parsing.
    #[serde(default)]
    pub skip_lines: usize,
    /// Removed from the end of every target cell.
    #[serde(default)]
    pub strip_target_suffix: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub version: u32,
    pub description: String,
    pub source: String,
    #[serde(default)]
    pub missing_marker: Option<String>,
    /// Row cap applied unless the run overrides it.
    #[serde(default)]
    pub default_subsample: Option<usize>,
    pub files: Vec<FileEntry>,
    pub columns: Vec<ColumnEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Manifest> {
        let m: Manifest =
            toml::from_str(text).map_err(|e| BenchError::Data(format!("bad manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(BenchError::io(format!("reading manifest {}", path.display())))?;
        Self::parse(&text).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))
    }

    pub fn builtin(name: &str) -> Option<Manifest> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text).expect("built-in manifests are valid"))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Data(format!("manifest `{}`: {msg}", self.name)));
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported manifest version {}", self.version));
        }
        if self.files.is_empty() || !self.files.iter().any(|f| f.required) {
            return bad("at least one required file is needed".into());
        }
        if let Some(f) = self.files.iter().find(|f| {
            f.sha256
                .as_ref()
                .is_some_and(|h| h.len() != 64 || !h.bytes().all(|b| b.is_ascii_hexdigit()))
        }) {
            return bad(format!("`{}` has a malformed sha256", f.path));
        }
        if self.columns.iter().any(|c| c.repeat == Some(0)) {
            return bad("repeat must be at least 1".into());
        }
        validate_schema(&self.schema()).or_else(|e| bad(e.to_string()))
    }

    /// Column schemas in file order, with repeats expanded and the missing
    /// marker attached.
    pub fn schema(&self) -> Vec<ColumnSchema> {
        let mut out = Vec::new();
        for c in &self.columns {
            let names: Vec<String> = match c.repeat {
                Some(r) => (1..=r).map(|i| format!("{}{i}", c.name)).collect(),
                None => vec![c.name.clone()],
            };
            for name in names {
                let mut col = match c.kind {
                    Kind::Numeric => ColumnSchema::numeric(name),
                    Kind::Categorical => ColumnSchema::categorical(name, c.categories.iter().cloned()),
                    Kind::TargetClass => ColumnSchema::target_class(name),
                    Kind::TargetNumeric => ColumnSchema::target_numeric(name),
                    Kind::Ignored => ColumnSchema::ignored(name),
                };
                if let Some(marker) = &self.missing_marker {
                    col = col.with_missing_marker(marker.clone());
                }
                out.push(col);
            }
        }
        out
    }

    pub fn target_column(&self) -> usize {
        self.schema()
            .iter()
            .position(|c| c.kind.is_target())
            .expect("validated manifests have a target")
    }

    /// The URL to cite when the first required file is missing.
    pub fn primary_url(&self) -> &str {
        &self.files.iter().find(|f| f.required).expect("validated").url
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileStatus {
    Missing,
    /// Present; no checksum recorded in the manifest.
    Unverified(String),
    Verified,
    Mismatch { expected: String, actual: String },
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(BenchError::io(format!("reading {}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl FileEntry {
    pub fn local_path(&self, data_dir: &Path) -> PathBuf {
        data_dir.join(&self.path)
    }

    pub fn status(&self, data_dir: &Path) -> Result<FileStatus> {
        let path = self.local_path(data_dir);
        if !path.exists() {
            return Ok(FileStatus::Missing);
        }
        let actual = sha256_file(&path)?;
        Ok(match &self.sha256 {
            None => FileStatus::Unverified(actual),
            Some(expected) if expected.eq_ignore_ascii_case(&actual) => FileStatus::Verified,
            Some(expected) => FileStatus::Mismatch {
                expected: expected.clone(),
                actual,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fids::ColumnKind;

    #[test]
    fn builtins_parse() {
        for name in Manifest::builtin_names() {
            let m = Manifest::builtin(name).unwrap();
            assert_eq!(m.name, name);
        }
        for name in BENCHMARK_DATASETS {
            assert!(Manifest::builtin(name).is_some(), "{name}");
        }
    }

    #[test]
    fn repeats_expand() {
        let m = Manifest::builtin("covertype").unwrap();
        let schema = m.schema();
        assert_eq!(schema.len(), 55);
        assert_eq!(schema[14].name, "soil_type1");
        assert_eq!(schema[53].name, "soil_type40");
        assert_eq!(m.target_column(), 54);
    }

    #[test]
    fn abalone_width() {
        // 7 numeric measurements plus a 3-way one-hot for sex.
        let schema = Manifest::builtin("abalone").unwrap().schema();
        let numeric = schema.iter().filter(|c| c.kind == ColumnKind::Numeric).count();
        assert_eq!(numeric, 7);
        assert_eq!(schema[0].categories.len(), 3);
    }

    #[test]
    fn rejects_bad_manifests() {
        let good = include_str!("../manifests/iris.toml");
        assert!(Manifest::parse(&good.replace("version = 1", "version = 2")).is_err());
        assert!(Manifest::parse(&good.replace("target_class", "numeric")).is_err());
        assert!(Manifest::parse(&format!("{good}\nbogus = 1\n")).is_err());
        assert!(Manifest::parse(&good.replace("6f608b71", "zz")).is_err());
    }

    #[test]
    fn file_status() {
        let dir = std::env::temp_dir().join(format!("fids-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.csv"), b"abc").unwrap();
        let mut entry = FileEntry {
            path: "a.csv".into(),
            url: "http://example.invalid/a.csv".into(),
            sha256: None,
            required: true,
            gzip: false,
            skip_lines: 0,
            strip_target_suffix: None,
        };
        let abc = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";
        assert_eq!(entry.status(&dir).unwrap(), FileStatus::Unverified(abc.into()));
        entry.sha256 = Some(abc.to_uppercase());
        assert_eq!(entry.status(&dir).unwrap(), FileStatus::Verified);
        entry.sha256 = Some("0".repeat(64));
        assert!(matches!(entry.status(&dir).unwrap(), FileStatus::Mismatch { .. }));
        entry.path = "b.csv".into();
        assert_eq!(entry.status(&dir).unwrap(), FileStatus::Missing);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
