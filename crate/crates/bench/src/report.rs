//! Report rendering: an aligned text table for people and line-delimited
//! JSON for machines. Timings live in their own file so that the JSON
//! report is a pure function of the configuration.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::run::{BenchReport, ConfigEcho, ReportRow};

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Config(&'a ConfigEcho),
    Row(&'a ReportRow),
}

#[derive(Serialize)]
struct Timing<'a> {
    dataset: &'a str,
    seconds: f64,
}

pub fn to_jsonl(report: &BenchReport) -> String {
    let mut out = String::new();
    let mut push = |r: Record| {
        out.push_str(&serde_json::to_string(&r).expect("report records serialize"));
        out.push('\n');
    };
    push(Record::Config(&report.config));
    for row in &report.rows {
        push(Record::Row(row));
    }
    out
}

pub fn timings_jsonl(report: &BenchReport) -> String {
    report
        .rows
        .iter()
        .zip(&report.seconds)
        .map(|(row, &seconds)| {
            let t = Timing {
                dataset: &row.dataset,
                seconds,
            };
            serde_json::to_string(&t).expect("timings serialize") + "\n"
        })
        .collect()
}

pub fn to_text(report: &BenchReport) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "{}", c.tool_version);
    let p = c.minkowski_p.map(|p| format!(" p={p}")).unwrap_or_default();
    let _ = writeln!(
        out,
        "k={} metric={}{p} scaler={} trees={} forest_seed={} floor={} index={} test_fraction={} split_seed={} cap={:?}",
        c.k, c.metric, c.scaler, c.n_trees, c.forest_seed, c.importance_floor, c.index,
        c.test_fraction, c.split_seed, c.cap
    );
    let _ = writeln!(out);
    let header = [
        "dataset", "n", "d", "train", "test", "z-score", "fids", "delta", "seconds", "split",
    ];
    let mut lines: Vec<[String; 10]> = vec![header.map(String::from)];
    for (row, secs) in report.rows.iter().zip(&report.seconds) {
        lines.push([
            row.dataset.clone(),
            row.n_used.to_string(),
            row.d.to_string(),
            row.n_train.to_string(),
            row.n_test.to_string(),
            format!("{:.6}", row.baseline_accuracy),
            format!("{:.6}", row.fids_accuracy),
            format!("{:+.6}", row.delta),
            format!("{secs:.2}"),
            row.split_hash[..12.min(row.split_hash.len())].to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..10)
        .map(|j| lines.iter().map(|l| l[j].len()).max().unwrap_or(0))
        .collect();
    for line in &lines {
        let mut s = String::new();
        for (j, cell) in line.iter().enumerate() {
            if j == 0 || j == 9 {
                let _ = write!(s, "{cell:<w$}  ", w = widths[j]);
            } else {
                let _ = write!(s, "{cell:>w$}  ", w = widths[j]);
            }
        }
        let _ = writeln!(out, "{}", s.trim_end());
    }
    out
}

/// Writes `report.txt`, `report.jsonl` and `timings.jsonl` into `dir`.
pub fn write_all(report: &BenchReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(BenchError::io(format!("creating {}", dir.display())))?;
    for (name, body) in [
        ("report.txt", to_text(report)),
        ("report.jsonl", to_jsonl(report)),
        ("timings.jsonl", timings_jsonl(report)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(BenchError::io(format!("writing {}", path.display())))?;
    }
    Ok(())
}
