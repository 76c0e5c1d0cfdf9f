//! Report files. Every writer is deterministic: no timestamps, no timings,
//! fixed column order, struct field order in JSON.

use std::path::{Path, PathBuf};

use plap_core::exponents::RegionScan;
use serde::Serialize;
use serde_json::Value;

use crate::LabError;

pub const SUMMARY: &str = "summary.json";
pub const PROFILE: &str = "profile.csv";
pub const REGION: &str = "region.csv";
pub const SOLUTION: &str = "solution.bin";
pub const FINAL_SLICE: &str = "final_slice.csv";

pub const PROFILE_HEADER: [&str; 7] = ["center", "k", "rho", "theta_k", "S_k", "bound_k", "ratio"];
pub const REGION_HEADER: [&str; 5] = ["q", "r", "n_over_q_plus_2_over_r", "admissible", "violations"];

/// Top level of `summary.json`. `predicted` holds closed-form values,
/// `measured` anything computed from a grid.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub subcommand: String,
    pub config_hash: String,
    pub predicted: Value,
    pub measured: Value,
}

/// One row of `profile.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub center: usize,
    pub k: u32,
    pub rho: f64,
    pub theta_k: f64,
    pub s_k: f64,
    pub bound_k: f64,
    pub ratio: f64,
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, LabError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| LabError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| LabError::io(path, e))
    }

    pub fn summary(&self, s: &Summary) -> Result<(), LabError> {
        let mut text = serde_json::to_string_pretty(s).expect("summary serialises");
        text.push('\n');
        self.write(SUMMARY, text.as_bytes())
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    fill(&mut w).expect("in-memory csv");
    w.into_inner().expect("in-memory csv")
}

pub fn profile_csv(rows: &[ProfileRow]) -> Vec<u8> {
    csv_bytes(&PROFILE_HEADER, |w| {
        for r in rows {
            w.write_record([
                r.center.to_string(),
                r.k.to_string(),
                r.rho.to_string(),
                r.theta_k.to_string(),
                r.s_k.to_string(),
                r.bound_k.to_string(),
                r.ratio.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// One row per `(q, r)` sample; violations are `;`-separated names.
pub fn region_csv(scan: &RegionScan) -> Vec<u8> {
    let n = scan.n as f64;
    csv_bytes(&REGION_HEADER, |w| {
        for s in &scan.samples {
            let violations: Vec<&str> = s.violations.iter().map(|v| v.name()).collect();
            w.write_record([
                s.q.to_string(),
                s.r.to_string(),
                (n / s.q + 2.0 / s.r).to_string(),
                s.admissible.to_string(),
                violations.join(";"),
            ])?;
        }
        Ok(())
    })
}

/// Boundary curves of the admissible region as `curve,q,r` rows.
pub fn curves_csv(scan: &RegionScan) -> Vec<u8> {
    csv_bytes(&["curve", "q", "r"], |w| {
        let lower = scan.lower_curve.iter().flatten().map(|c| ("lower", c));
        for (name, (q, r)) in scan.upper_curve.iter().map(|c| ("upper", c)).chain(lower) {
            w.write_record([name.to_string(), q.to_string(), r.to_string()])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_fixed() {
        let text = String::from_utf8(profile_csv(&[])).unwrap();
        assert_eq!(text, "center,k,rho,theta_k,S_k,bound_k,ratio\n");
        let scan = plap_core::exponents::admissible_region(2.0, 2, 3).unwrap();
        let text = String::from_utf8(region_csv(&scan)).unwrap();
        assert!(text.starts_with("q,r,n_over_q_plus_2_over_r,admissible,violations\n"));
        assert_eq!(text.lines().count(), 1 + scan.samples.len());
    }
}
