//! Manifest-driven loading: read the local files, parse, impute, encode.

use std::io::Read;
use std::path::Path;

use fids::{encode, impute_mean, parse_csv, Dataset, RawTable};
use flate2::read::GzDecoder;

use crate::error::{BenchError, Result};
use crate::manifest::{FileEntry, FileStatus, Manifest};

/// An encoded dataset together with what went into it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    /// Rows read from each file that was present, in manifest order.
    pub rows_per_file: Vec<(String, usize)>,
    pub imputed_cells: usize,
}

fn read_text(entry: &FileEntry, path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(BenchError::io(format!("reading {}", path.display())))?;
    let text = if entry.gzip {
        let mut out = String::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_string(&mut out)
            .map_err(BenchError::io(format!("decompressing {}", path.display())))?;
        out
    } else {
        String::from_utf8(bytes)
            .map_err(|_| BenchError::Data(format!("{} is not UTF-8 text", path.display())))?
    };
    Ok(text.lines().skip(entry.skip_lines).collect::<Vec<_>>().join("\n"))
}

/// Reads every present manifest file under `data_dir`. A missing required
/// file is an error naming the URL to download; a checksum mismatch is an
/// error unless `allow_mismatch` is set.
pub fn load_table(manifest: &Manifest, data_dir: &Path, allow_mismatch: bool) -> Result<(RawTable, Vec<(String, usize)>)> {
    let schema = manifest.schema();
    let target = manifest.target_column();
    let mut table: Option<RawTable> = None;
    let mut counts = Vec::new();
    for entry in &manifest.files {
        let path = entry.local_path(data_dir);
        match entry.status(data_dir)? {
            FileStatus::Missing if entry.required => {
                return Err(BenchError::Data(format!(
                    "dataset `{}` is missing {}; download it from {} (run `fids-bench fetch` for the full list)",
                    manifest.name,
                    path.display(),
                    entry.url
                )));
            }
            FileStatus::Missing => continue,
            FileStatus::Mismatch { expected, actual } if !allow_mismatch => {
                return Err(BenchError::Data(format!(
                    "{} has sha256 {actual}, manifest `{}` expects {expected}; \
                     pass --allow-checksum-mismatch to use it anyway",
                    path.display(),
                    manifest.name
                )));
            }
            _ => {}
        }
        let text = read_text(entry, &path)?;
        let mut part = parse_csv(&text, &schema, false)
            .map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        if let Some(suffix) = &entry.strip_target_suffix {
            part.map_column(target, |v| v.strip_suffix(suffix.as_str()).unwrap_or(v).to_string());
        }
        counts.push((entry.path.clone(), part.n_rows()));
        match &mut table {
            None => table = Some(part),
            Some(t) => t.append(part)?,
        }
    }
    let table = table.expect("validated manifests have a required file");
    Ok((table, counts))
}

pub fn load(manifest: &Manifest, data_dir: &Path, allow_mismatch: bool) -> Result<Loaded> {
    let (table, rows_per_file) = load_table(manifest, data_dir, allow_mismatch)?;
    let imputed_cells = table.count_missing();
    let filled = impute_mean(&table)?;
    let data = encode(&filled, &manifest.schema())
        .map_err(|e| BenchError::Data(format!("dataset `{}`: {e}", manifest.name)))?;
    Ok(Loaded {
        data,
        rows_per_file,
        imputed_cells,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use flate2::write::GzEncoder;
    use flate2::Compression;

    use super::*;

    const MANIFEST: &str = r#"
name = "toy"
version = 1
description = "toy"
source = "http://example.invalid"
missing_marker = "?"

[[files]]
path = "toy/train.csv"
url = "http://example.invalid/train.csv"

[[files]]
path = "toy/test.csv.gz"
url = "http://example.invalid/test.csv.gz"
required = false
gzip = true
skip_lines = 1
strip_target_suffix = "."

[[columns]]
name = "x"
kind = "numeric"

[[columns]]
name = "c"
kind = "categorical"
categories = ["a", "b"]

[[columns]]
name = "y"
kind = "target_class"
"#;

    fn scratch(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("fids-load-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(dir.join("toy")).unwrap();
        dir
    }

    #[test]
    fn optional_gzip_file_with_comment_and_suffix() {
        let dir = scratch("gz");
        std::fs::write(dir.join("toy/train.csv"), "1, a, yes\n?, b, no\n3, ?, yes\n").unwrap();
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(b"|comment line\n5, b, no.\n").unwrap();
        std::fs::write(dir.join("toy/test.csv.gz"), gz.finish().unwrap()).unwrap();

        let m = Manifest::parse(MANIFEST).unwrap();
        let loaded = load(&m, &dir, false).unwrap();
        assert_eq!(loaded.rows_per_file, vec![("toy/train.csv".into(), 3), ("toy/test.csv.gz".into(), 1)]);
        assert_eq!(loaded.imputed_cells, 2);
        let data = loaded.data;
        assert_eq!(data.class_labels(), ["no", "yes"]);
        assert_eq!(data.labels().unwrap(), [1, 0, 1, 0]);
        // x mean of {1, 3, 5} = 3; c mode over {a, b, b} is b.
        assert_eq!(data.row(1), [3.0, 0.0, 1.0]);
        assert_eq!(data.row(2), [3.0, 0.0, 1.0]);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn missing_required_file_names_the_url() {
        let dir = scratch("missing");
        let m = Manifest::parse(MANIFEST).unwrap();
        let err = load(&m, &dir, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("http://example.invalid/train.csv"), "{err}");
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_category_is_a_data_error() {
        let dir = scratch("cat");
        std::fs::write(dir.join("toy/train.csv"), "1, a, yes\n2, z, no\n").unwrap();
        let m = Manifest::parse(MANIFEST).unwrap();
        let err = load(&m, &dir, false).unwrap_err();
        assert!(matches!(err, BenchError::Data(_)));
        assert!(err.to_string().contains('z'));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn checksum_mismatch_needs_opt_in() {
        let dir = scratch("sum");
        std::fs::write(dir.join("toy/train.csv"), "1, a, yes\n2, b, no\n").unwrap();
        let text = MANIFEST.replacen(
            "url = \"http://example.invalid/train.csv\"",
            &format!("url = \"http://example.invalid/train.csv\"\nsha256 = \"{}\"", "0".repeat(64)),
            1,
        );
        let m = Manifest::parse(&text).unwrap();
        assert!(load(&m, &dir, false).is_err());
        assert_eq!(load(&m, &dir, true).unwrap().data.n(), 2);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
