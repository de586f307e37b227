//! Result files: a JSON document and flat CSV tables, written atomically.

use super::{ExperimentResult, Table, TraceRow};
use crate::error::{GapError, Result};
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Environment variable naming the output directory.
pub const OUTPUT_ENV: &str = "GAPKIT_OUT";

const DEFAULT_DIR: &str = "gapkit-out";

/// Explicit directory, else `$GAPKIT_OUT`, else `./gapkit-out`.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_DIR),
    }
}

/// `{generated_at_unix_ms, result}`; the timestamp is the only
/// nondeterministic field.
pub fn result_document(result: &ExperimentResult) -> serde_json::Value {
    let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
    json!({ "generated_at_unix_ms": ms, "result": result })
}

/// Paths of the files written for one result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WrittenFiles {
    pub json: PathBuf,
    pub csv: Option<PathBuf>,
    pub tables: Vec<PathBuf>,
}

/// Writes `<stem>.json`, `<stem>.csv` (when a trace exists) and
/// `<stem>_<table>.csv` for each extra table into `dir`.
pub fn write_result(dir: &Path, stem: &str, result: &ExperimentResult) -> Result<WrittenFiles> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let mut doc = serde_json::to_string_pretty(&result_document(result)).map_err(|e| GapError::Io(e.to_string()))?;
    doc.push('\n');
    atomic_write(&json_path, doc.as_bytes())?;
    let csv = if result.rows.is_empty() {
        None
    } else {
        let path = dir.join(format!("{stem}.csv"));
        atomic_write(&path, trace_csv(&result.rows).as_bytes())?;
        Some(path)
    };
    let mut tables = Vec::new();
    for t in &result.tables {
        let path = dir.join(format!("{stem}_{}.csv", t.name));
        atomic_write(&path, table_csv(t).as_bytes())?;
        tables.push(path);
    }
    Ok(WrittenFiles { json: json_path, csv, tables })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// `k,dist_to_solution,dist_A,dist_B,face_label`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("k,dist_to_solution,dist_A,dist_B,face_label\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            opt(r.dist_to_solution),
            opt(r.dist_a),
            opt(r.dist_b),
            r.face_label
        ));
    }
    out
}

fn table_csv(t: &Table) -> String {
    let mut out = t.header.join(",");
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn io(path: &Path, e: std::io::Error) -> GapError {
    GapError::Io(format!("{}: {e}", path.display()))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io(path, e))?;
    tmp.persist(path).map_err(|e| io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = vec![
            TraceRow { k: 0, dist_to_solution: Some(1.0), dist_a: Some(0.5), dist_b: None, face_label: "start".into() },
            TraceRow { k: 1, dist_to_solution: None, dist_a: Some(0.0), dist_b: Some(0.25), face_label: "boundary|inside".into() },
        ];
        assert_eq!(
            trace_csv(&rows),
            "k,dist_to_solution,dist_A,dist_B,face_label\n0,1e0,5e-1,,start\n1,,0e0,2.5e-1,boundary|inside\n"
        );
    }

    #[test]
    fn explicit_dir_wins() {
        assert_eq!(output_dir(Some(Path::new("/tmp/x"))), PathBuf::from("/tmp/x"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
