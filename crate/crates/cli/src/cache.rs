//! On-disk results cache: an append-only CSV ledger, cached Pe curves and
//! generator sidecars.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use faultyde::analysis::PeCurve;
use serde::{Deserialize, Serialize};

use crate::CliResult;

/// Environment variable overriding the default cache location.
pub const CACHE_ENV: &str = "FAULTYDE_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".faultyde-cache";
const LEDGER: &str = "results.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub config_hash: String,
    pub command: String,
    /// Channel parameter or other point label; empty when not applicable.
    pub point: String,
    pub quantity: String,
    pub value: f64,
    pub flags: String,
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    /// Explicit directory, else the environment override, else the default.
    pub fn resolve(explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
    }

    pub fn open(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(root.join("curves"))?;
        fs::create_dir_all(root.join("generators"))?;
        Ok(Cache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn generators(&self) -> PathBuf {
        self.root.join("generators")
    }

    fn curve_path(&self, key: &str) -> PathBuf {
        self.root.join("curves").join(format!("{key}.json"))
    }

    /// A cached curve, or `None` when absent or unreadable.
    pub fn load_curve(&self, key: &str) -> Option<PeCurve> {
        let text = fs::read_to_string(self.curve_path(key)).ok()?;
        match serde_json::from_str(&text) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("ignoring corrupt cached curve {key}: {e}");
                None
            }
        }
    }

    pub fn store_curve(&self, key: &str, curve: &PeCurve) -> CliResult<()> {
        let path = self.curve_path(key);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(curve)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.root.join(LEDGER)
    }

    pub fn append(&self, rows: &[LedgerRow]) -> CliResult<()> {
        let path = self.ledger_path();
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Ledger rows recorded for a config hash.
    pub fn lookup(&self, config_hash: &str) -> CliResult<Vec<LedgerRow>> {
        let path = self.ledger_path();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for row in r.deserialize() {
            let row: LedgerRow = row?;
            if row.config_hash == config_hash {
                out.push(row);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_appends_and_filters() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::open(dir.path().to_path_buf()).unwrap();
        let row = |h: &str, v| LedgerRow {
            config_hash: h.into(),
            command: "threshold".into(),
            point: String::new(),
            quantity: "threshold".into(),
            value: v,
            flags: String::new(),
        };
        c.append(&[row("a", 1.0)]).unwrap();
        c.append(&[row("b", 2.0), row("a", 3.0)]).unwrap();
        let got = c.lookup("a").unwrap();
        assert_eq!(got.iter().map(|r| r.value).collect::<Vec<_>>(), vec![1.0, 3.0]);
        let text = fs::read_to_string(c.ledger_path()).unwrap();
        assert_eq!(text.matches("config_hash").count(), 1);
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::open(dir.path().to_path_buf()).unwrap();
        assert!(c.load_curve("k").is_none());
        let curve = PeCurve::new(vec![0.0, 0.1, 0.2], vec![0.0, 0.01, 0.1]).unwrap();
        c.store_curve("k", &curve).unwrap();
        assert_eq!(c.load_curve("k").unwrap(), curve);
    }
}
