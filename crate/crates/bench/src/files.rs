//! Atomic file writes and timing-agnostic CSV comparison.

use std::io;
use std::path::{Path, PathBuf};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// Timing columns carry wall-clock values and are excluded from
/// reproducibility checks.
pub fn is_timing_column(name: &str) -> bool {
    name.ends_with("_s") || name.ends_with("_ms") || name.contains("_ms_")
}

/// CSV text with timing columns removed.
pub fn csv_payload(text: &str) -> csv::Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !is_timing_column(&headers[i])).collect();
    let mut rows = vec![keep.iter().map(|&i| headers[i].to_string()).collect()];
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(keep.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
    }
    Ok(rows)
}

/// All CSV files below `root`, relative and sorted, skipping the cost table
/// and the dataset cache.
pub fn payload_csvs(root: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let rel = path.strip_prefix(root).expect("below root").to_path_buf();
        if path.is_dir() {
            if rel != Path::new("cache") {
                walk(root, &path, out)?;
            }
        } else if path.extension().is_some_and(|e| e == "csv") && path.file_name() != Some("costs.csv".as_ref()) {
            out.push(rel);
        }
    }
    Ok(())
}

/// Relative paths whose timing-free payloads differ between two bundles,
/// including files present in only one of them.
pub fn diff_bundles(a: &Path, b: &Path) -> io::Result<Vec<PathBuf>> {
    let fa = payload_csvs(a)?;
    let fb = payload_csvs(b)?;
    let mut diffs: Vec<PathBuf> = fa.iter().filter(|p| !fb.contains(p)).cloned().collect();
    diffs.extend(fb.iter().filter(|p| !fa.contains(p)).cloned());
    for rel in fa.iter().filter(|p| fb.contains(p)) {
        let ta = std::fs::read_to_string(a.join(rel))?;
        let tb = std::fs::read_to_string(b.join(rel))?;
        let same = matches!((csv_payload(&ta), csv_payload(&tb)), (Ok(x), Ok(y)) if x == y);
        if !same {
            diffs.push(rel.clone());
        }
    }
    diffs.sort();
    Ok(diffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_columns_are_dropped() {
        let a = csv_payload("x,training_s,inference_ms_mean\n1,2.5,0.1\n").unwrap();
        let b = csv_payload("x,training_s,inference_ms_mean\n1,9.0,0.7\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], vec!["x"]);
        assert_ne!(a, csv_payload("x,training_s\n2,2.5\n").unwrap());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
