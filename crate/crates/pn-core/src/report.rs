//! Structured check reports: one record per check, deterministic ordering,
//! JSON and CSV emission.

use serde::{Deserialize, Serialize};

/// One check outcome. `anchor` names the mathematical identity being
//  tested so reports are self-documenting.
/// Status is `pass` iff `max_residual ≤ tolerance`; `skipped` records carry
/// the reason in `anchor` context and residual 0; `info` rows assert
/// nothing. `runtime_ms` is 0 by default so identical inputs produce
/// byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub status: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
    pub runtime_ms: u64,
}

impl CheckRecord {
    pub fn evaluated(
        name: &str,
        anchor: &str,
        max_residual: f64,
        tolerance: f64,
        samples: usize,
        seed: u64,
    ) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            status: if max_residual <= tolerance { "pass" } else { "fail" }.into(),
            max_residual,
            tolerance,
            samples,
            seed,
            runtime_ms: 0,
        }
    }

    pub fn skipped(name: &str, reason: &str, seed: u64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            anchor: reason.into(),
            status: "skipped".into(),
            max_residual: 0.0,
            tolerance: 0.0,
            samples: 0,
            seed,
            runtime_ms: 0,
        }
    }

    pub fn info(name: &str, anchor: &str, value: f64, samples: usize, seed: u64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            status: "info".into(),
            max_residual: value,
            tolerance: 0.0,
            samples,
            seed,
            runtime_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub verdict: String,
    pub records: Vec<CheckRecord>,
}

impl Report {
    /// Sort records by name (stable by insertion for equal names) and set
    /// the verdict: pass iff no record failed.
    pub fn assemble(mut records: Vec<CheckRecord>) -> Report {
        records.sort_by(|a, b| a.name.cmp(&b.name));
        let verdict = if records.iter().any(|r| r.status == "fail") {
            "fail"
        } else {
            "pass"
        };
        Report {
            verdict: verdict.into(),
            records,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// Flat residual table for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,status,max_residual,tolerance,samples,seed\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:e},{:e},{},{}\n",
                r.name, r.status, r.max_residual, r.tolerance, r.samples, r.seed
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_and_ordering() {
        let rep = Report::assemble(vec![
            CheckRecord::evaluated("z-check", "id", 1e-10, 1e-8, 5, 42),
            CheckRecord::evaluated("a-check", "id", 1.0, 1e-8, 5, 42),
            CheckRecord::skipped("m-check", "no data", 42),
        ]);
        assert_eq!(rep.verdict, "fail");
        let names: Vec<&str> = rep.records.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, vec!["a-check", "m-check", "z-check"]);
        assert_eq!(rep.records[0].status, "fail");
        assert_eq!(rep.records[2].status, "pass");
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let rep = Report::assemble(vec![CheckRecord::evaluated(
            "check", "id", 1.25e-9, 1e-8, 3, 7,
        )]);
        let j1 = rep.to_json();
        let back: Report = serde_json::from_str(&j1).unwrap();
        assert_eq!(j1, back.to_json());
    }
}
