//! Integrated 2-forms on a neighborhood of the zero section of T*M and
//! every certification built on them: zero-section closed formulas, the
//! boundary-term cross-check, closedness, nondegeneracy, the recursion
//! operator, and the Poisson-map property of the bundle projection.
//!
//! Conventions (calibrated once on the constant-Π case and frozen):
//! `Ω(u, w) = wᵀ Ω̂ u`; the musical isomorphism satisfies Ω^♭ = −Ω̂, so
//! `R = Ω̂₀⁻¹ Ω̂₁` and the inverse bivector is read off `Ω̂⁻¹` with the
//! projected block appearing as the negative of the base bivector matrix.

use nalgebra::{DMatrix, DVector};

use crate::algebra::hierarchy;
use crate::connection::hv_split;
use crate::error::{Error, Result};
use crate::fields::FieldBundle;
use crate::lift::omega_k;
use crate::spray::flow;

/// One realized 2-form matrix at a cotangent state, with quadrature
/// metadata. `matrix` is exactly antisymmetric.
#[derive(Debug, Clone)]
pub struct RealizedForm {
    pub k: i32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub m: usize,
    pub matrix: DMatrix<f64>,
}

/// Ω̂_k(ξ) = composite Simpson over the flow grid of J(t)ᵀ ω̂_k(φ_t(ξ)) J(t).
pub fn realized_form(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    k: i32,
    m: usize,
) -> Result<RealizedForm> {
    let n = bundle.dim();
    let fr = flow(bundle, x, y, m, true, &[])?;
    let js = fr.jacobians.as_ref().unwrap();
    let h = 1.0 / (2 * m) as f64;
    let mut acc = DMatrix::zeros(2 * n, 2 * n);
    for (j, ((xs, ys), jm)) in fr.states.iter().zip(js).enumerate() {
        let ev = bundle.eval(xs)?;
        let (w, _) = omega_k(&ev, ys, k)?;
        let weight = if j == 0 || j == 2 * m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += jm.transpose() * w * jm * (weight * h / 3.0);
    }
    let matrix = (&acc - acc.transpose()) * 0.5;
    Ok(RealizedForm {
        k,
        x: x.to_vec(),
        y: y.to_vec(),
        m,
        matrix,
    })
}

fn n_power(nmat: &DMatrix<f64>, k: i32) -> Result<DMatrix<f64>> {
    let n = nmat.nrows();
    let base = if k >= 0 {
        nmat.clone()
    } else {
        nmat.clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("N not invertible".into()))?
    };
    let mut out = DMatrix::identity(n, n);
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    Ok(out)
}

/// Closed formula for Ω̂_k on the zero section:
/// `Ω_k(0_x)(u, w) = ⟨θ_w, N^k ū⟩ − ⟨θ_u, N^k w̄⟩ + Π_k(θ_u, θ_w)`,
/// as the block matrix `[[0, −(N^k)ᵀ], [N^k, N^k Πᵀ]]`.
pub fn zero_section_matrix(bundle: &FieldBundle, x: &[f64], k: i32) -> Result<DMatrix<f64>> {
    let n = bundle.dim();
    let pm = bundle.pi.value(x)?;
    let nmat = bundle.require_n()?.value(x)?;
    let nk = n_power(&nmat, k)?;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, n), (n, n)).copy_from(&(-nk.transpose()));
    out.view_mut((n, 0), (n, n)).copy_from(&nk);
    out.view_mut((n, n), (n, n)).copy_from(&(&nk * pm.transpose()));
    Ok(out)
}

/// Max entry difference between the quadrature form at (x, 0) and the
/// closed zero-section formula.
pub fn zero_section_formula_residual(
    bundle: &FieldBundle,
    x: &[f64],
    k: i32,
    m: usize,
) -> Result<f64> {
    let n = bundle.dim();
    let rf = realized_form(bundle, x, &vec![0.0; n], k, m)?;
    let zs = zero_section_matrix(bundle, x, k)?;
    Ok((rf.matrix - zs).abs().max())
}

/// Second, independent computation of Ω_k(ξ)(u, w): transport θ̃ along the
/// trajectory with sources from the split of J(t)u, J(t)w and evaluate
/// `(⟨θ̃_{w_t}, N^k ū_t⟩ − ⟨θ̃_{u_t}, N^k w̄_t⟩ − Π_k(θ̃_{u_t}, θ̃_{w_t}))|₀¹`.
pub fn boundary_term_form(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    u: &DVector<f64>,
    w: &DVector<f64>,
    k: i32,
    m: usize,
) -> Result<f64> {
    let n = bundle.dim();
    let zero = DVector::zeros(n);
    let fr = flow(
        bundle,
        x,
        y,
        m,
        true,
        &[(zero.clone(), u.clone()), (zero, w.clone())],
    )?;
    let js = fr.jacobians.as_ref().unwrap();
    let endpoint = |idx: usize| -> Result<f64> {
        let (xs, ys) = &fr.states[idx];
        let ev = bundle.eval(xs)?;
        let (ubar, _) = hv_split(&ev, ys, &(&js[idx] * u))?;
        let (wbar, _) = hv_split(&ev, ys, &(&js[idx] * w))?;
        let tu = &fr.transports[0][idx];
        let tw = &fr.transports[1][idx];
        let nmat = bundle.require_n()?.value(xs)?;
        let nk = n_power(&nmat, k)?;
        let (pk, _) = hierarchy(&ev.pi, &nmat, k)?;
        let g = tw.dot(&(&nk * &ubar)) - tu.dot(&(&nk * &wbar)) - (tu.transpose() * pk * tw)[(0, 0)];
        Ok(g)
    };
    Ok(endpoint(2 * m)? - endpoint(0)?)
}

/// Max over coordinate triples (a < b < c) of the closedness cocycle
/// `∂_a Ω_{bc} + ∂_b Ω_{ca} + ∂_c Ω_{ab}` with central differences in the
/// 2n cotangent coordinates, each entry recomputed by quadrature.
pub fn closedness_residual(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    k: i32,
    fd_step: f64,
    m: usize,
) -> Result<f64> {
    let n = bundle.dim();
    let d = 2 * n;
    let mut grads: Vec<DMatrix<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
        let (mut xm, mut ym) = (x.to_vec(), y.to_vec());
        if a < n {
            xp[a] += fd_step;
            xm[a] -= fd_step;
        } else {
            yp[a - n] += fd_step;
            ym[a - n] -= fd_step;
        }
        let fp = realized_form(bundle, &xp, &yp, k, m)?;
        let fm = realized_form(bundle, &xm, &ym, k, m)?;
        grads.push((fp.matrix - fm.matrix) / (2.0 * fd_step));
    }
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                let v = grads[a][(b, c)] + grads[b][(c, a)] + grads[c][(a, b)];
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Singular-value summary of the realized matrix: (σ_min, σ_max/σ_min).
pub fn nondegeneracy_report(form: &RealizedForm) -> (f64, f64) {
    let sv = form.matrix.clone().svd(false, false).singular_values;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    (smin, if smin > 0.0 { smax / smin } else { f64::INFINITY })
}

/// Recursion operator `R = Ω̂₀⁻¹ Ω̂₁` from the two realized matrices.
pub fn recursion_operator(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    m: usize,
) -> Result<DMatrix<f64>> {
    let f0 = realized_form(bundle, x, y, 0, m)?;
    let f1 = realized_form(bundle, x, y, 1, m)?;
    let (smin, _) = nondegeneracy_report(&f0);
    if smin < 1e-10 {
        return Err(Error::Singular(format!(
            "realized base form has σ_min = {:.3e}",
            smin
        )));
    }
    let inv = f0
        .matrix
        .try_inverse()
        .ok_or_else(|| Error::Singular("realized base form not invertible".into()))?;
    Ok(inv * f1.matrix)
}

/// Nijenhuis torsion residual of the recursion operator as a matrix field
/// over the 2n cotangent coordinates, by central finite differences; each
/// evaluation of R runs a full flow + quadrature for both forms.
pub fn recursion_torsion_residual(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    m: usize,
    fd_step: f64,
) -> Result<f64> {
    let n = bundle.dim();
    let d = 2 * n;
    let value = recursion_operator(bundle, x, y, m)?;
    let mut dr: Vec<DMatrix<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
        let (mut xm, mut ym) = (x.to_vec(), y.to_vec());
        if a < n {
            xp[a] += fd_step;
            xm[a] -= fd_step;
        } else {
            yp[a - n] += fd_step;
            ym[a - n] -= fd_step;
        }
        let rp = recursion_operator(bundle, &xp, &yp, m)?;
        let rm = recursion_operator(bundle, &xm, &ym, m)?;
        dr.push((rp - rm) / (2.0 * fd_step));
    }
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for kk in (j + 1)..d {
                let mut t = 0.0;
                for l in 0..d {
                    t += value[(l, j)] * dr[l][(i, kk)] - value[(l, kk)] * dr[l][(i, j)];
                    t += value[(i, l)] * (dr[kk][(l, j)] - dr[j][(l, kk)]);
                }
                worst = worst.max(t.abs());
            }
        }
    }
    Ok(worst)
}

/// Residual of the chain identity Ω̂₂ = Ω̂₀ R² against the directly
/// realized k=2 form.
pub fn chain_identity_residual(
    bundle: &FieldBundle,
    x: &[f64],
    y: &[f64],
    m: usize,
) -> Result<f64> {
    let r = recursion_operator(bundle, x, y, m)?;
    let f0 = realized_form(bundle, x, y, 0, m)?;
    let f2 = realized_form(bundle, x, y, 2, m)?;
    let predicted = f0.matrix * (&r * &r);
    Ok((f2.matrix - predicted).abs().max())
}

/// Projection property of π: the inverse of the realized matrix, restricted
/// to pulled-back covectors (components (θ, 0)) and pushed forward, must
/// reproduce the base structure Π_{−k}. Under the frozen conventions this
/// reads: upper-left n×n block of Ω̂_k⁻¹ equals −(Π_{−k} matrix).
pub fn poisson_map_residual(
    bundle: &FieldBundle,
    x: &[f64],
    y_probe: &[f64],
    k: i32,
    m: usize,
) -> Result<f64> {
    let n = bundle.dim();
    let form = realized_form(bundle, x, y_probe, k, m)?;
    let (smin, _) = nondegeneracy_report(&form);
    if smin < 1e-10 {
        return Err(Error::Singular(format!(
            "realized form singular (σ_min = {:.3e})",
            smin
        )));
    }
    let inv = form
        .matrix
        .try_inverse()
        .ok_or_else(|| Error::Singular("realized form not invertible".into()))?;
    let nmat = bundle.require_n()?.value(x)?;
    let pm = bundle.pi.value(x)?;
    let (pmk, _) = hierarchy(&pm, &nmat, -k)?;
    let block = inv.view((0, 0), (n, n)).into_owned();
    Ok((block + pmk).abs().max())
}
