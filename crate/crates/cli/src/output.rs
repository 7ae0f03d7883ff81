use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind};

/// A named output file held in memory until the run succeeds.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to rerun an experiment: the resolved config and the text of every input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub command: Kind,
    pub config: ExperimentConfig,
    pub inputs: BTreeMap<String, String>,
    pub config_sha256: String,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the canonical config and its inputs.
pub fn config_hash(config: &ExperimentConfig, inputs: &BTreeMap<String, String>) -> String {
    let body = serde_json::to_vec(&(config.canonical(), inputs)).expect("config serializes");
    sha256_hex(&body)
}

/// `%.12g`: twelve significant digits, trailing zeros dropped.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if (-5..12).contains(&exp) {
        let s = if exp >= 0 {
            let (int, frac) = digits.split_at(exp as usize + 1);
            format!("{int}.{frac}")
        } else {
            format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
        };
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let m = if rest.is_empty() { lead.to_string() } else { format!("{lead}.{rest}") };
        format!("{m}e{exp}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn csv(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(Artifact {
        name: name.to_string(),
        bytes: w.into_inner().context("flushing CSV")?,
    })
}

pub fn json(name: &str, value: &impl Serialize) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

/// Writes the artifacts and returns their records.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<OutputRecord>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.bytes).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(OutputRecord {
                file: a.name.clone(),
                bytes: a.bytes.len(),
                sha256: sha256_hex(&a.bytes),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.811278124459133), "0.811278124459");
        assert_eq!(num(2.0), "2");
        assert_eq!(num(-1.5), "-1.5");
        assert_eq!(num(1234567.0), "1234567");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(-2.5e15), "-2.5e15");
        assert_eq!(num(0.000123), "0.000123");
        assert_eq!(num(9.9999999999999), "10");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
    }

    #[test]
    fn round_trip_precision() {
        for &x in &[std::f64::consts::PI, -0.305758086, 1.0 / 3.0, 6.02214076e23] {
            let back: f64 = num(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {}", num(x));
        }
    }

    #[test]
    fn hash_ignores_threads() {
        let a = ExperimentConfig {
            threads: 8,
            ..Default::default()
        };
        let inputs = BTreeMap::new();
        assert_eq!(config_hash(&a, &inputs), config_hash(&ExperimentConfig::default(), &inputs));
        let b = ExperimentConfig {
            seed: 1,
            ..Default::default()
        };
        assert_ne!(config_hash(&b, &inputs), config_hash(&a, &inputs));
    }
}
