//! JSON problem files: schema, validation, and conversion to field bundles.
//!
//! All indices in files are 1-based (`"1,2"` keys for bivector entries,
//! `"1,2,3"` for connection entries, 1-based excluded coordinate indices);
//! they are shifted to 0-based internally.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};
use crate::expr;
use crate::fields::{
    BivectorField, ConnectionField, EndomorphismField, FieldBundle, Patch,
};

/// Numeric knobs shared by every command; the defaults are the documented
/// baseline tolerances of the check hierarchy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_steps")]
    pub rk4_steps: usize,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// pointwise algebraic identities (Schouten, torsion, intertwining, …)
    #[serde(default = "default_tol_algebra")]
    pub tol_algebra: f64,
    /// flow/quadrature identities (zero-section formulas, projection, …)
    #[serde(default = "default_tol_flow")]
    pub tol_flow: f64,
    /// finite differences of quadrature quantities (closedness)
    #[serde(default = "default_tol_fd")]
    pub tol_fd: f64,
    /// finite-difference torsion of the recursion operator
    #[serde(default = "default_tol_torsion")]
    pub tol_torsion: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_steps() -> usize {
    200
}
fn default_y_max() -> f64 {
    0.1
}
fn default_fd_step() -> f64 {
    1e-5
}
fn default_tol_algebra() -> f64 {
    1e-8
}
fn default_tol_flow() -> f64 {
    1e-6
}
fn default_tol_fd() -> f64 {
    1e-4
}
fn default_tol_torsion() -> f64 {
    1e-3
}
fn default_samples() -> usize {
    100
}
fn default_seed() -> u64 {
    42
}

impl Default for Numerics {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    /// 1-based coordinate indices whose zero hyperplanes are excluded.
    #[serde(default)]
    pub excluded: Vec<usize>,
}

/// How Γ is supplied: `"explicit"` with entries, `"zero"`, or `"solve"`
/// (pointwise least-squares from N; no smooth global field is produced).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub mode: String,
    /// `"k,i,j"` (1-based, i ≤ j) → expression for Γ^k_{ij}.
    #[serde(default)]
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionMode {
    Explicit,
    Zero,
    Solve,
    Absent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    /// Coordinate display names; expressions always use x1..xn.
    #[serde(default)]
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// `"i,j"` (1-based, i < j) → expression for Π^{ij}.
    #[serde(default)]
    pub poisson: BTreeMap<String, String>,
    /// Dense n×n rows of expressions for ν^i_j.
    #[serde(default)]
    pub nijenhuis: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub connection: Option<ConnectionSpec>,
    pub patch: PatchSpec,
    #[serde(default)]
    pub numerics: Numerics,
}

fn parse_key(key: &str, arity: usize, n: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != arity {
        return Err(Error::Problem(format!(
            "index key `{}` must have {} comma-separated parts",
            key, arity
        )));
    }
    parts
        .iter()
        .map(|p| {
            let v: usize = p.trim().parse().map_err(|_| {
                Error::Problem(format!("invalid index `{}` in key `{}`", p, key))
            })?;
            if v == 0 || v > n {
                return Err(Error::Problem(format!(
                    "index {} in key `{}` outside 1..={}",
                    v, key, n
                )));
            }
            Ok(v - 1)
        })
        .collect()
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile> {
        serde_json::from_str(text).map_err(|e| Error::Problem(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn connection_mode(&self) -> Result<ConnectionMode> {
        match &self.connection {
            None => Ok(ConnectionMode::Absent),
            Some(spec) => match spec.mode.as_str() {
                "explicit" => Ok(ConnectionMode::Explicit),
                "zero" => Ok(ConnectionMode::Zero),
                "solve" => Ok(ConnectionMode::Solve),
                other => Err(Error::Problem(format!(
                    "unknown connection mode `{}` (expected explicit | zero | solve)",
                    other
                ))),
            },
        }
    }

    /// Validate the file and build the field bundle. In `solve` mode the
    /// bundle carries no Γ; callers that need a smooth connection must
    /// reject that mode themselves.
    pub fn to_bundle(&self) -> Result<(FieldBundle, ConnectionMode)> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::Problem("dimension must be positive".into()));
        }
        if !self.coordinates.is_empty() && self.coordinates.len() != n {
            return Err(Error::Problem(format!(
                "{} coordinate names for dimension {}",
                self.coordinates.len(),
                n
            )));
        }

        let mut pi = BivectorField::zero(n);
        for (key, src) in &self.poisson {
            let idx = parse_key(key, 2, n)?;
            if idx[0] >= idx[1] {
                return Err(Error::Problem(format!(
                    "bivector key `{}` must satisfy i < j",
                    key
                )));
            }
            pi.set_entry(idx[0], idx[1], expr::parse(src, n, &self.constants)?);
        }

        let nij = match &self.nijenhuis {
            None => None,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Problem(format!(
                        "nijenhuis must be a dense {}×{} matrix of expressions",
                        n, n
                    )));
                }
                let mut f = EndomorphismField::zero(n);
                for (i, row) in rows.iter().enumerate() {
                    for (j, src) in row.iter().enumerate() {
                        f.set_entry(i, j, expr::parse(src, n, &self.constants)?);
                    }
                }
                Some(f)
            }
        };

        let mode = self.connection_mode()?;
        let gamma = match mode {
            ConnectionMode::Absent | ConnectionMode::Solve => None,
            ConnectionMode::Zero => Some(ConnectionField::zero(n)),
            ConnectionMode::Explicit => {
                let spec = self.connection.as_ref().unwrap();
                let mut f = ConnectionField::zero(n);
                for (key, src) in &spec.entries {
                    let idx = parse_key(key, 3, n)?;
                    f.set_entry(idx[0], idx[1], idx[2], expr::parse(src, n, &self.constants)?);
                }
                Some(f)
            }
        };
        if mode == ConnectionMode::Zero || mode == ConnectionMode::Solve {
            if let Some(spec) = &self.connection {
                if !spec.entries.is_empty() {
                    return Err(Error::Problem(format!(
                        "connection mode `{}` must not carry entries",
                        spec.mode
                    )));
                }
            }
        }
        if mode == ConnectionMode::Solve && nij.is_none() {
            return Err(Error::Problem(
                "connection mode `solve` needs the nijenhuis field".into(),
            ));
        }

        if self.patch.center.len() != n || self.patch.half_widths.len() != n {
            return Err(Error::Problem(format!(
                "patch center/half_widths must have length {}",
                n
            )));
        }
        if self.patch.half_widths.iter().any(|h| *h <= 0.0) {
            return Err(Error::Problem("patch half-widths must be positive".into()));
        }
        let mut excluded = Vec::new();
        for &e in &self.patch.excluded {
            if e == 0 || e > n {
                return Err(Error::Problem(format!(
                    "excluded index {} outside 1..={}",
                    e, n
                )));
            }
            excluded.push(e - 1);
        }

        if self.numerics.rk4_steps < 10 {
            return Err(Error::Problem("numerics.rk4_steps must be ≥ 10".into()));
        }
        if self.numerics.y_max <= 0.0 || self.numerics.fd_step <= 0.0 {
            return Err(Error::Problem(
                "numerics.y_max and numerics.fd_step must be positive".into(),
            ));
        }

        Ok((
            FieldBundle {
                pi,
                nij,
                gamma,
                patch: Patch {
                    center: self.patch.center.clone(),
                    half_widths: self.patch.half_widths.clone(),
                    excluded,
                },
            },
            mode,
        ))
    }
}

/// Serialize a catalog entry to the problem-file format (round-trips to an
/// identical bundle).
pub fn problem_from_catalog(entry: &CatalogEntry) -> ProblemFile {
    let b = &entry.bundle;
    let n = b.dim();

    let mut poisson = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(e) = b.pi.entry(i, j) {
                if !e.is_zero_literal() {
                    poisson.insert(format!("{},{}", i + 1, j + 1), e.to_string());
                }
            }
        }
    }

    let nijenhuis = b.nij.as_ref().map(|f| {
        (0..n)
            .map(|i| (0..n).map(|j| f.entry(i, j).to_string()).collect())
            .collect()
    });

    let connection = b.gamma.as_ref().map(|f| {
        let mut entries = BTreeMap::new();
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let e = f.entry(k, i, j);
                    if !e.is_zero_literal() {
                        entries.insert(format!("{},{},{}", k + 1, i + 1, j + 1), e.to_string());
                    }
                }
            }
        }
        let mode = if entries.is_empty() { "zero" } else { "explicit" };
        ConnectionSpec {
            mode: mode.into(),
            entries,
        }
    });

    ProblemFile {
        dimension: n,
        coordinates: (1..=n).map(|i| format!("x{}", i)).collect(),
        constants: BTreeMap::new(),
        poisson,
        nijenhuis,
        connection,
        patch: PatchSpec {
            center: b.patch.center.clone(),
            half_widths: b.patch.half_widths.clone(),
            excluded: b.patch.excluded.iter().map(|i| i + 1).collect(),
        },
        numerics: Numerics::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::fields::sample_points;

    #[test]
    fn minimal_file_parses_with_defaults() {
        let text = r#"{
            "dimension": 2,
            "poisson": {"1,2": "1"},
            "patch": {"center": [0, 0], "half_widths": [1, 1]}
        }"#;
        let pf = ProblemFile::from_json(text).unwrap();
        assert_eq!(pf.numerics.rk4_steps, 200);
        assert_eq!(pf.numerics.seed, 42);
        let (b, mode) = pf.to_bundle().unwrap();
        assert_eq!(mode, ConnectionMode::Absent);
        assert!(b.nij.is_none() && b.gamma.is_none());
        assert_eq!(b.pi.value(&[0.0, 0.0]).unwrap()[(0, 1)], 1.0);
    }

    #[test]
    fn constants_are_inlined() {
        let text = r#"{
            "dimension": 2,
            "constants": {"lambda": 2.5},
            "poisson": {"1,2": "lambda * x1"},
            "patch": {"center": [1, 0], "half_widths": [0.5, 1]}
        }"#;
        let (b, _) = ProblemFile::from_json(text).unwrap().to_bundle().unwrap();
        assert_eq!(b.pi.value(&[2.0, 0.0]).unwrap()[(0, 1)], 5.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let base = r#"{
            "dimension": 2,
            "poisson": {"2,1": "1"},
            "patch": {"center": [0, 0], "half_widths": [1, 1]}
        }"#;
        assert!(matches!(
            ProblemFile::from_json(base).unwrap().to_bundle(),
            Err(Error::Problem(_))
        ));
        let bad_mode = r#"{
            "dimension": 2,
            "poisson": {"1,2": "1"},
            "connection": {"mode": "guess"},
            "patch": {"center": [0, 0], "half_widths": [1, 1]}
        }"#;
        assert!(matches!(
            ProblemFile::from_json(bad_mode).unwrap().to_bundle(),
            Err(Error::Problem(_))
        ));
        let bad_excluded = r#"{
            "dimension": 2,
            "poisson": {"1,2": "1"},
            "patch": {"center": [0, 0], "half_widths": [1, 1], "excluded": [3]}
        }"#;
        assert!(matches!(
            ProblemFile::from_json(bad_excluded).unwrap().to_bundle(),
            Err(Error::Problem(_))
        ));
        assert!(ProblemFile::from_json("{\"dimension\": 2}").is_err());
    }

    #[test]
    fn solve_mode_requires_n() {
        let text = r#"{
            "dimension": 2,
            "poisson": {"1,2": "1"},
            "connection": {"mode": "solve"},
            "patch": {"center": [0, 0], "half_widths": [1, 1]}
        }"#;
        assert!(matches!(
            ProblemFile::from_json(text).unwrap().to_bundle(),
            Err(Error::Problem(_))
        ));
    }

    #[test]
    fn catalog_round_trip_is_exact() {
        for name in catalog::NAMES {
            let entry = catalog::by_name(name).unwrap();
            let pf = problem_from_catalog(&entry);
            let text = pf.to_json();
            let (b2, _) = ProblemFile::from_json(&text).unwrap().to_bundle().unwrap();
            let b1 = &entry.bundle;
            for x in sample_points(&b1.patch, 10, 99).unwrap() {
                assert_eq!(b1.pi.value(&x).unwrap(), b2.pi.value(&x).unwrap());
                if let Some(n1) = &b1.nij {
                    let n2 = b2.nij.as_ref().unwrap();
                    assert_eq!(n1.value(&x).unwrap(), n2.value(&x).unwrap());
                }
                if let Some(g1) = &b1.gamma {
                    let g2 = b2.gamma.as_ref().unwrap();
                    let (t1, t2) = (g1.value(&x).unwrap(), g2.value(&x).unwrap());
                    let n = b1.dim();
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                assert_eq!(t1.get(k, i, j), t2.get(k, i, j), "{}", name);
                            }
                        }
                    }
                }
            }
        }
    }
}
