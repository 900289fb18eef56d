//! Structured report records (JSON lines or CSV) plus the human summary.
//! Wall time appears only in the stdout summary so output files stay
//! byte-identical for a fixed config and seed.

use lcf_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("format must be json or csv, got {other:?}"))),
        }
    }
}

/// Digest identifying the exact configuration (file bytes plus CLI
/// overrides) a report was produced from.
pub fn config_digest(config_bytes: &[u8], overrides: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    h.update(overrides.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// One report: a meta record followed by data records, all sharing flat
/// string/number maps so they serialize to JSON lines or CSV rows.
pub struct Report {
    pub command: String,
    pub digest: String,
    pub seed: u64,
    pub records: Vec<serde_json::Map<String, serde_json::Value>>,
    pub summary: Vec<String>,
}

impl Report {
    pub fn new(command: &str, digest: String, seed: u64) -> Self {
        Report {
            command: command.to_string(),
            digest,
            seed,
            records: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push_record<T: Serialize>(&mut self, kind: &str, payload: &T) -> Result<()> {
        let value = serde_json::to_value(payload).map_err(|e| Error::Config(e.to_string()))?;
        let mut map = serde_json::Map::new();
        map.insert("record".into(), kind.into());
        match value {
            serde_json::Value::Object(obj) => {
                for (k, v) in obj {
                    map.insert(k, v);
                }
            }
            other => {
                map.insert("value".into(), other);
            }
        }
        self.records.push(map);
        Ok(())
    }

    pub fn note(&mut self, line: String) {
        self.summary.push(line);
    }

    fn meta(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("record".into(), "meta".into());
        m.insert("command".into(), self.command.clone().into());
        m.insert("config_digest".into(), self.digest.clone().into());
        m.insert("seed".into(), self.seed.into());
        m
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut out = String::new();
                out.push_str(&serde_json::Value::Object(self.meta()).to_string());
                out.push('\n');
                for r in &self.records {
                    out.push_str(&serde_json::Value::Object(r.clone()).to_string());
                    out.push('\n');
                }
                out
            }
            Format::Csv => {
                // union of keys, stable order: record first then sorted
                let mut keys: Vec<String> = Vec::new();
                let mut seen = std::collections::BTreeSet::new();
                for r in std::iter::once(&self.meta()).chain(self.records.iter()) {
                    for k in r.keys() {
                        if seen.insert(k.clone()) {
                            keys.push(k.clone());
                        }
                    }
                }
                keys.sort();
                if let Some(pos) = keys.iter().position(|k| k == "record") {
                    keys.remove(pos);
                    keys.insert(0, "record".into());
                }
                let mut out = String::new();
                out.push_str(&keys.join(","));
                out.push('\n');
                for r in std::iter::once(&self.meta()).chain(self.records.iter()) {
                    let row: Vec<String> = keys
                        .iter()
                        .map(|k| match r.get(k) {
                            None => String::new(),
                            Some(serde_json::Value::String(s)) => csv_quote(s),
                            Some(v) => csv_quote(&v.to_string()),
                        })
                        .collect();
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                out
            }
        }
    }

    pub fn write(&self, path: Option<&Path>, format: Format) -> Result<()> {
        let body = self.render(format);
        match path {
            Some(p) => {
                let mut f = std::fs::File::create(p)
                    .map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?;
                f.write_all(body.as_bytes())
                    .map_err(|e| Error::Config(format!("write failed: {e}")))?;
            }
            None => {
                print!("{body}");
            }
        }
        Ok(())
    }

    pub fn print_summary(&self, wall: std::time::Duration) {
        println!("# {} (config {})", self.command, &self.digest[..12.min(self.digest.len())]);
        for line in &self.summary {
            println!("{line}");
        }
        println!("# wall time: {:.3}s", wall.as_secs_f64());
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_changes_with_overrides() {
        let a = config_digest(b"x", "seed=1");
        let b = config_digest(b"x", "seed=2");
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn render_json_and_csv() {
        let mut r = Report::new("simulate", "ff".into(), 4);
        #[derive(Serialize)]
        struct Row {
            trial: usize,
            value: f64,
        }
        r.push_record("trial", &Row { trial: 0, value: 0.5 }).unwrap();
        let json = r.render(Format::Json);
        assert_eq!(json.lines().count(), 2);
        assert!(json.contains("\"record\":\"meta\""));
        let csv = r.render(Format::Csv);
        assert!(csv.starts_with("record,"));
        assert_eq!(csv.lines().count(), 3);
    }
}
