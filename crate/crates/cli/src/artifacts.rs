//! Artifact files of one run and the manifest that vouches for them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.csv";

/// Text form of a number used in every CSV: shortest round-trip decimal,
/// switching to exponent notation for very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files of a run, held in memory until the run has succeeded.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn table<R, I>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), Failure>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(Failure::io)?;
        for row in rows {
            w.write_record(row).map_err(Failure::io)?;
        }
        let bytes = w.into_inner().map_err(Failure::io)?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// A two-column `key,value` table.
    pub fn key_values(&mut self, name: &str, pairs: &[(String, String)]) -> Result<(), Failure> {
        self.table(name, &["key", "value"], pairs.iter().map(|(k, v)| [k.clone(), v.clone()]))
    }

    pub fn text(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content.into_bytes()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.0.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }
}

/// What a previous manifest in the output directory says.
#[derive(Debug, Default)]
struct Previous {
    config_hash: Option<String>,
    hashes: BTreeMap<String, String>,
}

fn read_previous(dir: &Path) -> Result<Option<Previous>, Failure> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_path(&path).map_err(Failure::io)?;
    let mut prev = Previous::default();
    for rec in rdr.records() {
        let rec = rec.map_err(Failure::io)?;
        let (k, v) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
        if k == "config_sha256" {
            prev.config_hash = Some(v.to_string());
        } else if let Some(file) = k.strip_prefix("artifact:") {
            prev.hashes.insert(file.to_string(), v.to_string());
        }
    }
    Ok(Some(prev))
}

/// Header entries of the manifest, before the artifact hashes.
pub struct RunInfo<'a> {
    pub experiment: &'a str,
    pub seed: u64,
    pub config: &'a str,
    pub wall_time_s: f64,
}

/// Write every artifact and `manifest.csv` into `dir`.
///
/// When `dir` already holds a manifest for the same configuration, the new
/// artifacts must hash to the recorded values; on a mismatch nothing is
/// overwritten and the run fails.
pub fn commit(artifacts: &Artifacts, dir: &Path, info: &RunInfo) -> Result<bool, Failure> {
    let config_hash = sha256_hex(info.config.as_bytes());
    let mut verified = false;
    if let Some(prev) = read_previous(dir)? {
        if prev.config_hash.as_deref() == Some(config_hash.as_str()) {
            for (name, bytes) in &artifacts.files {
                if let Some(old) = prev.hashes.get(name) {
                    if *old != sha256_hex(bytes) {
                        return Err(Failure::solver(
                            "lab",
                            format!("{name} differs from the previous run with the same configuration and seed"),
                        ));
                    }
                }
            }
            verified = true;
        }
    }
    fs::create_dir_all(dir).map_err(Failure::io)?;
    let mut entries = vec![
        ("tool".to_string(), format!("hlab {}", env!("CARGO_PKG_VERSION"))),
        ("experiment".to_string(), info.experiment.to_string()),
        ("seed".to_string(), info.seed.to_string()),
        ("config_sha256".to_string(), config_hash),
        ("wall_time_s".to_string(), format!("{:.3}", info.wall_time_s)),
        ("verified_against_previous".to_string(), verified.to_string()),
    ];
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes).map_err(Failure::io)?;
        entries.push((format!("artifact:{name}"), sha256_hex(bytes)));
    }
    let mut manifest = Artifacts::default();
    manifest.key_values(MANIFEST, &entries)?;
    fs::write(dir.join(MANIFEST), &manifest.files[0].1).map_err(Failure::io)?;
    Ok(verified)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -0.25, 1e-7, 3.0e20, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.0), "2");
        assert_eq!(num(1e-7), "1e-7");
    }

    #[test]
    fn tables_are_plain_csv() {
        let mut a = Artifacts::default();
        a.table("t.csv", &["x", "value"], [[num(0.5), num(-1.0)]]).unwrap();
        assert_eq!(a.get("t.csv").unwrap(), b"x,value\n0.5,-1\n");
    }
}
