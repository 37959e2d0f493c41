//! Pointwise structure checks: Schouten brackets, Nijenhuis torsion, the
//! Magri–Morosi concomitant, intertwining, the bivector hierarchy, and the
//! bracket of 1-forms.
//!
//! Index conventions used throughout (frozen once, calibrated on the
//! constant-bivector case): the matrix of Π has `P[(i,j)] = Π^{ij}`; the
//! anchor acts by `Π^#(θ)^i = θ_k Π^{ki}`, i.e. `Pᵀθ`; the pairing
//! `Π(α,β) = αᵀPβ`; and `Π₁ = PNᵀ` so that `Π₁^# = N ∘ Π₀^#`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::{BivectorField, EndomorphismField, FieldEval};
use crate::tensor::Tensor3;

/// Fully antisymmetric 3-tensor; only components with i < j < k are stored.
#[derive(Debug, Clone)]
pub struct Trivector {
    n: usize,
    comps: Vec<f64>,
}

impl Trivector {
    pub fn zeros(n: usize) -> Self {
        let count = if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 };
        Trivector {
            n,
            comps: vec![0.0; count],
        }
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        // position of (i,j,k), i<j<k, in lexicographic order
        let n = self.n;
        let before_i: usize = (0..i).map(|a| (n - 1 - a) * (n - 2 - a) / 2).sum();
        let before_j: usize = ((i + 1)..j).map(|b| n - 1 - b).sum();
        before_i + before_j + (k - j - 1)
    }

    pub fn set_independent(&mut self, i: usize, j: usize, k: usize, v: f64) {
        assert!(i < j && j < k);
        let idx = self.index(i, j, k);
        self.comps[idx] = v;
    }

    /// Signed component for arbitrary index order; zero on repeated indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j || j == k || i == k {
            return 0.0;
        }
        let mut idx = [i, j, k];
        let mut sign = 1.0;
        // sort 3 elements, tracking parity
        if idx[0] > idx[1] {
            idx.swap(0, 1);
            sign = -sign;
        }
        if idx[1] > idx[2] {
            idx.swap(1, 2);
            sign = -sign;
        }
        if idx[0] > idx[1] {
            idx.swap(0, 1);
            sign = -sign;
        }
        sign * self.comps[self.index(idx[0], idx[1], idx[2])]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// (1,2)-tensor antisymmetric in the lower pair; T^i_{jk} stored for j < k.
#[derive(Debug, Clone)]
pub struct VectorValued2Tensor {
    n: usize,
    data: Vec<f64>,
}

impl VectorValued2Tensor {
    pub fn zeros(n: usize) -> Self {
        VectorValued2Tensor {
            n,
            data: vec![0.0; n * n * (n - 1) / 2],
        }
    }

    fn pair_index(&self, j: usize, k: usize) -> usize {
        j * (2 * self.n - j - 1) / 2 + (k - j - 1)
    }

    pub fn set_upper(&mut self, i: usize, j: usize, k: usize, v: f64) {
        assert!(j < k);
        let idx = i * self.n * (self.n - 1) / 2 + self.pair_index(j, k);
        self.data[idx] = v;
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        use std::cmp::Ordering::*;
        match j.cmp(&k) {
            Equal => 0.0,
            Less => self.data[i * self.n * (self.n - 1) / 2 + self.pair_index(j, k)],
            Greater => -self.data[i * self.n * (self.n - 1) / 2 + self.pair_index(k, j)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Values and first derivatives of a bivector field at a point:
/// `(P, dP)` with `dP.get(k,i,j) = ∂Π^{ij}/∂x^k`.
pub fn bivector_jets(f: &BivectorField, x: &[f64]) -> Result<(DMatrix<f64>, Tensor3)> {
    let n = f.n;
    let mut p = DMatrix::zeros(n, n);
    let mut dp = Tensor3::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let jet = f.entry(i, j).unwrap().eval_jet2(x)?;
            p[(i, j)] = jet.value;
            p[(j, i)] = -jet.value;
            for k in 0..n {
                dp.set(k, i, j, jet.grad[k]);
                dp.set(k, j, i, -jet.grad[k]);
            }
        }
    }
    Ok((p, dp))
}

/// Schouten bracket of two bivector fields at a point.
///
/// Computed as the full antisymmetrization of
/// `T(a,b,c) = Σ_l (P^{la} ∂_l Q^{bc} + Q^{la} ∂_l P^{bc})`;
/// for antisymmetric inputs this equals the cyclic sum over (a,b,c).
/// Only vanishing is ever asserted downstream, so the overall normalization
/// is a fixed internal convention.
pub fn schouten_bracket(p: &BivectorField, q: &BivectorField, x: &[f64]) -> Result<Trivector> {
    if p.n != q.n {
        return Err(Error::Dimension(format!(
            "bivector dimensions differ: {} vs {}",
            p.n, q.n
        )));
    }
    let n = p.n;
    let (pm, dp) = bivector_jets(p, x)?;
    let (qm, dq) = bivector_jets(q, x)?;
    let t = |a: usize, b: usize, c: usize| -> f64 {
        (0..n)
            .map(|l| pm[(l, a)] * dq.get(l, b, c) + qm[(l, a)] * dp.get(l, b, c))
            .sum()
    };
    let mut out = Trivector::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let v = 0.5
                    * (t(i, j, k) + t(j, k, i) + t(k, i, j)
                        - t(j, i, k)
                        - t(i, k, j)
                        - t(k, j, i));
                out.set_independent(i, j, k, v);
            }
        }
    }
    Ok(out)
}

/// Nijenhuis torsion components on coordinate frames:
/// `T^i_{jk} = ν^l_j ∂_l ν^i_k − ν^l_k ∂_l ν^i_j + ν^i_l ∂_k ν^l_j − ν^i_l ∂_j ν^l_k`.
pub fn nijenhuis_torsion(f: &EndomorphismField, x: &[f64]) -> Result<VectorValued2Tensor> {
    let n = f.n;
    let mut nm = DMatrix::zeros(n, n);
    let mut dn = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let jet = f.entry(i, j).eval_jet2(x)?;
            nm[(i, j)] = jet.value;
            for k in 0..n {
                dn.set(k, i, j, jet.grad[k]);
            }
        }
    }
    let mut out = VectorValued2Tensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += nm[(l, j)] * dn.get(l, i, k) - nm[(l, k)] * dn.get(l, i, j)
                        + nm[(i, l)] * (dn.get(k, l, j) - dn.get(j, l, k));
                }
                out.set_upper(i, j, k, v);
            }
        }
    }
    Ok(out)
}

/// `N(x)·Π(x) − Π(x)·N(x)ᵀ`; zero iff the anchor intertwining holds at x.
pub fn intertwine_residual(pi: &DMatrix<f64>, nmat: &DMatrix<f64>) -> DMatrix<f64> {
    nmat * pi - pi * nmat.transpose()
}

/// Magri–Morosi concomitant components on flat coordinate coframes.
///
/// Returned as `C.get(k, i, j)` = k-th component of C(dx^i, dx^j). With
/// `A_k(i,j) = Π^{im}∂_m ν^j_k + ν^j_m ∂_k Π^{im} − ν^m_k ∂_m Π^{ij}`
/// (the Lie-derivative-of-ᵗN term), the components are
/// `C_k(i,j) = A_k(i,j) − A_k(j,i) + ν^m_k ∂_m Π^{ij} − ∂_k(Π^{im} ν^j_m)`.
pub fn concomitant(ev: &FieldEval) -> Result<Tensor3> {
    let n = ev.pi.nrows();
    let nm = ev
        .nij
        .as_ref()
        .ok_or_else(|| Error::MissingN("concomitant needs N".into()))?;
    let dn = ev.dn.as_ref().unwrap();
    let a = |k: usize, i: usize, j: usize| -> f64 {
        (0..n)
            .map(|m| {
                ev.pi[(i, m)] * dn.get(m, j, k) + nm[(j, m)] * ev.dpi.get(k, i, m)
                    - nm[(m, k)] * ev.dpi.get(m, i, j)
            })
            .sum()
    };
    let mut out = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = a(k, i, j) - a(k, j, i);
                for m in 0..n {
                    v += nm[(m, k)] * ev.dpi.get(m, i, j);
                    // −∂_k(Π^{im} ν^j_m)
                    v -= ev.dpi.get(k, i, m) * nm[(j, m)] + ev.pi[(i, m)] * dn.get(k, j, m);
                }
                out.set(k, i, j, v);
            }
        }
    }
    Ok(out)
}

/// `Π_k = N^k Π₀` at a point, antisymmetrized; the second return value is
/// the asymmetry of the raw product, which must vanish when the
/// intertwining condition holds.
pub fn hierarchy(
    pi: &DMatrix<f64>,
    nmat: &DMatrix<f64>,
    k: i32,
) -> Result<(DMatrix<f64>, f64)> {
    let n = pi.nrows();
    let base = if k >= 0 {
        nmat.clone()
    } else {
        let svd = nmat.clone().svd(false, false);
        let smin = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
        if smin < 1e-10 {
            return Err(Error::Singular(format!(
                "N has minimal singular value {:.3e}; negative hierarchy needs N invertible",
                smin
            )));
        }
        nmat.clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("N not invertible".into()))?
    };
    let mut nk = DMatrix::identity(n, n);
    for _ in 0..k.unsigned_abs() {
        nk = &nk * &base;
    }
    let raw = &nk * pi;
    let asym = (&raw + raw.transpose()).abs().max() * 0.5;
    let anti = 0.5 * (&raw - raw.transpose());
    Ok((anti, asym))
}

/// Bracket of 1-forms `[α,β]_Π = L_{Π^#α}β − L_{Π^#β}α − d(Π(α,β))`, with
/// α, β given as expression coefficient rows (α = a_i dx^i).
pub fn one_form_bracket(
    pi: &BivectorField,
    alpha: &[Expr],
    beta: &[Expr],
    x: &[f64],
) -> Result<DVector<f64>> {
    let n = pi.n;
    if alpha.len() != n || beta.len() != n {
        return Err(Error::Dimension("covector coefficient rows must have length n".into()));
    }
    let (pm, dp) = bivector_jets(pi, x)?;
    let ja: Vec<_> = alpha.iter().map(|e| e.eval_jet2(x)).collect::<Result<_>>()?;
    let jb: Vec<_> = beta.iter().map(|e| e.eval_jet2(x)).collect::<Result<_>>()?;
    // X = Π^#α: X^m = a_l Π^{lm}; ∂_k X^m = ∂_k a_l Π^{lm} + a_l ∂_k Π^{lm}
    let xv = |m: usize| -> f64 { (0..n).map(|l| ja[l].value * pm[(l, m)]).sum() };
    let dxv = |k: usize, m: usize| -> f64 {
        (0..n)
            .map(|l| ja[l].grad[k] * pm[(l, m)] + ja[l].value * dp.get(k, l, m))
            .sum()
    };
    let yv = |m: usize| -> f64 { (0..n).map(|l| jb[l].value * pm[(l, m)]).sum() };
    let dyv = |k: usize, m: usize| -> f64 {
        (0..n)
            .map(|l| jb[l].grad[k] * pm[(l, m)] + jb[l].value * dp.get(k, l, m))
            .sum()
    };
    let mut out = DVector::zeros(n);
    for k in 0..n {
        let mut v = 0.0;
        for m in 0..n {
            // (L_X β)_k − (L_Y α)_k
            v += xv(m) * jb[k].grad[m] + jb[m].value * dxv(k, m);
            v -= yv(m) * ja[k].grad[m] + ja[m].value * dyv(k, m);
            // −∂_k(a_i Π^{im} b_m)
            for i in 0..n {
                v -= ja[i].grad[k] * pm[(i, m)] * jb[m].value
                    + ja[i].value * dp.get(k, i, m) * jb[m].value
                    + ja[i].value * pm[(i, m)] * jb[m].grad[k];
            }
        }
        out[k] = v;
    }
    Ok(out)
}

/// Return N unchanged if nondegenerate on the samples, else the shifted
/// field I + N; error if even the shift stays degenerate.
pub fn make_nondegenerate(
    f: &EndomorphismField,
    samples: &[Vec<f64>],
) -> Result<EndomorphismField> {
    let min_det = |g: &EndomorphismField| -> Result<f64> {
        let mut m = f64::MAX;
        for x in samples {
            m = m.min(g.value(x)?.determinant().abs());
        }
        Ok(m)
    };
    if min_det(f)? > 1e-8 {
        return Ok(f.clone());
    }
    let shifted = f.shift_diagonal(1.0);
    if min_det(&shifted)? > 1e-8 {
        return Ok(shifted);
    }
    Err(Error::Degenerate(
        "I + N is still degenerate on the patch samples; shift manually by λI + N".into(),
    ))
}
