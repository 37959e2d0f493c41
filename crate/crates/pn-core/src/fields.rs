//! Coordinate tensor fields on a box patch.
//!
//! A [`FieldBundle`] holds a bivector field Π (strictly upper-triangular
//! storage, so antisymmetry of the evaluated matrix is structural), an
//! optional endomorphism field N (dense) and an optional torsion-free
//! connection Γ (stored for lower indices i ≤ j only, so the lower symmetry
//! is structural too). Evaluation produces dense value/derivative arrays
//! via second-order jets.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tensor::{Tensor3, Tensor4};

/// Index into the strictly-upper-triangular storage, i < j.
fn ut_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Index into symmetric-pair storage, i <= j.
fn sym_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Antisymmetric bivector field; only entries Π^{ij} with i < j are stored.
#[derive(Debug, Clone)]
pub struct BivectorField {
    pub n: usize,
    upper: Vec<Expr>,
}

impl BivectorField {
    pub fn zero(n: usize) -> Self {
        BivectorField {
            n,
            upper: vec![Expr::zero(); n * (n - 1) / 2],
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&Expr> {
        if i < j {
            Some(&self.upper[ut_index(self.n, i, j)])
        } else {
            None
        }
    }

    pub fn set_entry(&mut self, i: usize, j: usize, e: Expr) {
        assert!(i < j, "only strictly upper entries are stored");
        self.upper[ut_index(self.n, i, j)] = e;
    }

    /// Value-only evaluation (used by finite-difference oracles).
    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.upper[ut_index(n, i, j)].eval(x)?;
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Ok(m)
    }
}

/// Dense (1,1)-tensor field; entry (i, j) is ν^i_j (row = output index).
#[derive(Debug, Clone)]
pub struct EndomorphismField {
    pub n: usize,
    entries: Vec<Expr>,
}

impl EndomorphismField {
    pub fn zero(n: usize) -> Self {
        EndomorphismField {
            n,
            entries: vec![Expr::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut f = Self::zero(n);
        for i in 0..n {
            f.set_entry(i, i, Expr::Const(1.0));
        }
        f
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, e: Expr) {
        self.entries[i * self.n + j] = e;
    }

    /// Add `c` to every diagonal entry (the `I + N` nondegeneracy shift).
    pub fn shift_diagonal(&self, c: f64) -> EndomorphismField {
        let mut out = self.clone();
        for i in 0..self.n {
            out.set_entry(i, i, self.entry(i, i).plus_const(c));
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entries[i * n + j].eval(x)?;
            }
        }
        Ok(m)
    }
}

/// Torsion-free connection; Γ^k_{ij} stored for i ≤ j only.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub n: usize,
    entries: Vec<Expr>,
}

impl ConnectionField {
    pub fn zero(n: usize) -> Self {
        ConnectionField {
            n,
            entries: vec![Expr::zero(); n * n * (n + 1) / 2],
        }
    }

    pub fn entry(&self, k: usize, i: usize, j: usize) -> &Expr {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[k * self.n * (self.n + 1) / 2 + sym_index(self.n, a, b)]
    }

    pub fn set_entry(&mut self, k: usize, i: usize, j: usize, e: Expr) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries[k * self.n * (self.n + 1) / 2 + sym_index(self.n, a, b)] = e;
    }

    /// Value-only evaluation: t(k, i, j) = Γ^k_{ij}(x).
    pub fn value(&self, x: &[f64]) -> Result<Tensor3> {
        let n = self.n;
        let mut t = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = self.entry(k, i, j).eval(x)?;
                    t.set(k, i, j, v);
                    t.set(k, j, i, v);
                }
            }
        }
        Ok(t)
    }
}

/// Axis-aligned box with excluded coordinate hyperplanes {x^i = 0}.
#[derive(Debug, Clone)]
pub struct Patch {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    /// 0-based coordinate indices whose zero sets are excluded.
    pub excluded: Vec<usize>,
}

impl Patch {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Box containment with a multiplicative slack on the half-widths.
    /// Flow integration uses slack > 1 so finite-difference perturbations of
    /// boundary samples do not trip spurious escapes.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(&self.center)
            .zip(&self.half_widths)
            .all(|((xi, ci), hi)| (xi - ci).abs() <= hi * slack + 1e-12)
            && self.excluded.iter().all(|&i| x[i].abs() > 1e-9)
    }

    /// Concentric patch with scaled half-widths; start points for flow-based
    /// checks are drawn from the interior so trajectories stay inside.
    pub fn shrink(&self, factor: f64) -> Patch {
        Patch {
            center: self.center.clone(),
            half_widths: self.half_widths.iter().map(|h| h * factor).collect(),
            excluded: self.excluded.clone(),
        }
    }
}

/// The (Π, N, Γ) data of one problem instance on one patch.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    pub pi: BivectorField,
    pub nij: Option<EndomorphismField>,
    pub gamma: Option<ConnectionField>,
    pub patch: Patch,
}

/// Dense values and derivatives of all fields at one point.
///
/// Index conventions: `dpi.get(k,i,j)` = ∂Π^{ij}/∂x^k,
/// `d2pi.get(k,l,i,j)` = ∂²Π^{ij}/∂x^k∂x^l, `dn.get(k,i,j)` = ∂ν^i_j/∂x^k,
/// `gamma.get(k,i,j)` = Γ^k_{ij}, `dgamma.get(m,k,i,j)` = ∂Γ^k_{ij}/∂x^m.
#[derive(Debug, Clone)]
pub struct FieldEval {
    pub x: Vec<f64>,
    pub pi: DMatrix<f64>,
    pub dpi: Tensor3,
    pub d2pi: Tensor4,
    pub nij: Option<DMatrix<f64>>,
    pub dn: Option<Tensor3>,
    pub gamma: Option<Tensor3>,
    pub dgamma: Option<Tensor4>,
}

impl FieldBundle {
    pub fn dim(&self) -> usize {
        self.pi.n
    }

    pub fn require_gamma(&self) -> Result<&ConnectionField> {
        self.gamma
            .as_ref()
            .ok_or_else(|| Error::MissingConnection("this operation needs Γ".into()))
    }

    pub fn require_n(&self) -> Result<&EndomorphismField> {
        self.nij
            .as_ref()
            .ok_or_else(|| Error::MissingN("this operation needs N".into()))
    }

    /// Evaluate every present field with derivatives at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<FieldEval> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, fields have {}",
                x.len(),
                n
            )));
        }
        let mut pi = DMatrix::zeros(n, n);
        let mut dpi = Tensor3::zeros(n);
        let mut d2pi = Tensor4::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let jet = self.pi.entry(i, j).unwrap().eval_jet2(x)?;
                pi[(i, j)] = jet.value;
                pi[(j, i)] = -jet.value;
                for k in 0..n {
                    dpi.set(k, i, j, jet.grad[k]);
                    dpi.set(k, j, i, -jet.grad[k]);
                    for l in 0..n {
                        d2pi.set(k, l, i, j, jet.h(k, l));
                        d2pi.set(k, l, j, i, -jet.h(k, l));
                    }
                }
            }
        }

        let (nij, dn) = match &self.nij {
            Some(f) => {
                let mut m = DMatrix::zeros(n, n);
                let mut d = Tensor3::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        let jet = f.entry(i, j).eval_jet2(x)?;
                        m[(i, j)] = jet.value;
                        for k in 0..n {
                            d.set(k, i, j, jet.grad[k]);
                        }
                    }
                }
                (Some(m), Some(d))
            }
            None => (None, None),
        };

        let (gamma, dgamma) = match &self.gamma {
            Some(f) => {
                let mut g = Tensor3::zeros(n);
                let mut dg = Tensor4::zeros(n);
                for k in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let jet = f.entry(k, i, j).eval_jet2(x)?;
                            g.set(k, i, j, jet.value);
                            g.set(k, j, i, jet.value);
                            for m in 0..n {
                                dg.set(m, k, i, j, jet.grad[m]);
                                dg.set(m, k, j, i, jet.grad[m]);
                            }
                        }
                    }
                }
                (Some(g), Some(dg))
            }
            None => (None, None),
        };

        Ok(FieldEval {
            x: x.to_vec(),
            pi,
            dpi,
            d2pi,
            nij,
            dn,
            gamma,
            dgamma,
        })
    }

    /// Scale factor 1 + max |field entry| over the samples, for
    /// relative-tolerance residual checks on unbounded fields.
    pub fn magnitude_scale(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let mut m = 0.0f64;
        for x in samples {
            m = m.max(self.pi.value(x)?.abs().max());
            if let Some(f) = &self.nij {
                m = m.max(f.value(x)?.abs().max());
            }
            if let Some(f) = &self.gamma {
                m = m.max(f.value(x)?.max_abs());
            }
        }
        Ok(1.0 + m)
    }
}

/// Deterministic uniform samples in the patch box, staying a fixed fraction
/// of the half-width away from every excluded hyperplane.
pub fn sample_points(patch: &Patch, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = patch.dim();
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    let budget = 1000 * count.max(1);
    while out.len() < count {
        if draws >= budget {
            return Err(Error::Sampling(format!(
                "gave up after {} draws; patch is almost entirely excluded",
                budget
            )));
        }
        draws += 1;
        let x: Vec<f64> = (0..n)
            .map(|i| patch.center[i] + patch.half_widths[i] * rng.gen_range(-1.0..1.0))
            .collect();
        let ok = patch
            .excluded
            .iter()
            .all(|&i| x[i].abs() >= (0.1 * patch.half_widths[i]).max(1e-12));
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}

/// Seeded (x, y) samples: base points in the patch, covectors uniform in
/// the box |y|_∞ ≤ y_max.
pub fn sample_states(
    patch: &Patch,
    count: usize,
    y_max: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let xs = sample_points(patch, count, seed)?;
    // independent stream for the fiber coordinates
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let n = patch.dim();
    Ok(xs
        .into_iter()
        .map(|x| {
            let y: Vec<f64> = (0..n).map(|_| y_max * rng.gen_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect())
}
