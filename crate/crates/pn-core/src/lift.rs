//! Lifts of the base endomorphism N to the cotangent bundle and the closed
//! 2-form family ω_k on T*M.
//!
//! All 2n×2n matrices act on tangent vectors of T*M in the (∂x, ∂y)
//! coordinate frame; bilinear forms follow the evaluation convention
//! `Ω(u, w) = wᵀ Ω̂ u`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{FieldBundle, FieldEval};

/// The canonical symplectic matrix: `ω_can(u, w) = ⟨w_y, u_x⟩ − ⟨w_x, u_y⟩`.
pub fn omega_can(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

/// Complete (cotangent) lift of N at the state (x, y):
/// blocks `[[N, 0], [A, Nᵀ]]` with `A_{jk} = y_i (∂_k ν^i_j − ∂_j ν^i_k)`.
pub fn complete_lift_n(ev: &FieldEval, y: &[f64]) -> Result<DMatrix<f64>> {
    let n = ev.pi.nrows();
    let nm = ev
        .nij
        .as_ref()
        .ok_or_else(|| Error::MissingN("complete lift needs N".into()))?;
    let dn = ev.dn.as_ref().unwrap();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            m[(j, k)] = nm[(j, k)];
            m[(n + j, n + k)] = nm[(k, j)];
            let a: f64 = (0..n)
                .map(|i| y[i] * (dn.get(k, i, j) - dn.get(j, i, k)))
                .sum();
            m[(n + j, k)] = a;
        }
    }
    Ok(m)
}

/// Vertical lift of N as a vector field on T*M: the vector (0, Nᵀy) at (x, y).
pub fn vertical_lift_n(ev: &FieldEval, y: &[f64]) -> Result<DVector<f64>> {
    let n = ev.pi.nrows();
    let nm = ev
        .nij
        .as_ref()
        .ok_or_else(|| Error::MissingN("vertical lift needs N".into()))?;
    let mut v = DVector::zeros(2 * n);
    for j in 0..n {
        v[n + j] = (0..n).map(|k| nm[(k, j)] * y[k]).sum();
    }
    Ok(v)
}

/// Integer power of the complete lift, with the negative branch computed
/// block-wise: `(N^c)⁻¹ = [[N⁻¹, 0], [−N⁻ᵀ A N⁻¹, N⁻ᵀ]]`.
pub fn complete_lift_power(ev: &FieldEval, y: &[f64], k: i32) -> Result<DMatrix<f64>> {
    let n = ev.pi.nrows();
    let nc = complete_lift_n(ev, y)?;
    let base = if k >= 0 {
        nc
    } else {
        let nm = ev.nij.as_ref().unwrap();
        let svd_min = nm
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if svd_min < 1e-10 {
            return Err(Error::Singular(format!(
                "N is numerically singular (σ_min = {:.3e})",
                svd_min
            )));
        }
        let ninv = nm
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("N is not invertible".into()))?;
        let a = nc.view((n, 0), (n, n)).into_owned();
        let ninv_t = ninv.transpose();
        let lower = -(&ninv_t * &a * &ninv);
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&ninv);
        m.view_mut((n, 0), (n, n)).copy_from(&lower);
        m.view_mut((n, n), (n, n)).copy_from(&ninv_t);
        m
    };
    let mut out = DMatrix::identity(2 * n, 2 * n);
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    Ok(out)
}

/// The 2-form matrix `ω̂_k = antisym(ω̂_can · (N^c)^k)` at the state (x, y),
/// together with the asymmetry of the raw product. N^c is ω_can-symmetric,
/// so the asymmetry is pure roundoff whenever the data are consistent.
pub fn omega_k(ev: &FieldEval, y: &[f64], k: i32) -> Result<(DMatrix<f64>, f64)> {
    let n = ev.pi.nrows();
    let raw = if k == 0 {
        omega_can(n)
    } else {
        omega_can(n) * complete_lift_power(ev, y, k)?
    };
    let asym = (&raw + raw.transpose()).abs().max();
    Ok(((&raw - raw.transpose()) * 0.5, asym))
}

/// Max component of the Nijenhuis torsion of the complete lift on T*M,
/// computed by central finite differences of the lifted matrix field.
/// Vanishes (to FD accuracy) exactly when the base N is torsion-free.
pub fn nc_torsion_residual(bundle: &FieldBundle, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    let n = bundle.dim();
    let d = 2 * n;
    let at = |x: &[f64], y: &[f64]| -> Result<DMatrix<f64>> {
        complete_lift_n(&bundle.eval(x)?, y)
    };
    let value = at(x, y)?;
    // dnu[l] = ∂(N^c)/∂ξ^l, ξ = (x, y)
    let mut dnu: Vec<DMatrix<f64>> = Vec::with_capacity(d);
    for l in 0..d {
        let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
        let (mut xm, mut ym) = (x.to_vec(), y.to_vec());
        if l < n {
            xp[l] += h;
            xm[l] -= h;
        } else {
            yp[l - n] += h;
            ym[l - n] -= h;
        }
        dnu.push((at(&xp, &yp)? - at(&xm, &ym)?) / (2.0 * h));
    }
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut t = 0.0;
                for l in 0..d {
                    t += value[(l, j)] * dnu[l][(i, k)] - value[(l, k)] * dnu[l][(i, j)];
                    t += value[(i, l)] * (dnu[k][(l, j)] - dnu[j][(l, k)]);
                }
                worst = worst.max(t.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::connection::horizontal_lift;
    use crate::fields::{sample_points, sample_states};
    use approx::assert_abs_diff_eq;

    #[test]
    fn complete_lift_is_omega_can_symmetric() {
        for entry in [
            catalog::diagonal_quadratic_default(),
            catalog::toda_volterra(),
        ] {
            let b = &entry.bundle;
            for (x, y) in sample_states(&b.patch, 10, 0.3, 42).unwrap() {
                let ev = b.eval(&x).unwrap();
                let (_, asym) = omega_k(&ev, &y, 1).unwrap();
                assert!(asym < 1e-12, "{}: asymmetry {}", entry.name, asym);
                let (_, asym2) = omega_k(&ev, &y, 2).unwrap();
                assert!(asym2 < 1e-12);
            }
        }
    }

    #[test]
    fn omega_k_identity_n_is_canonical() {
        let entry = catalog::constant_symplectic(2).unwrap();
        let ev = entry.bundle.eval(&[0.1, -0.2]).unwrap();
        for k in [-2, -1, 0, 1, 3] {
            let (w, asym) = omega_k(&ev, &[0.4, 0.5], k).unwrap();
            assert_eq!(asym, 0.0);
            assert_eq!(w, omega_can(2));
        }
    }

    #[test]
    fn negative_power_inverts_the_lift() {
        let entry = catalog::diagonal_quadratic_default();
        let b = &entry.bundle;
        let x = [1.1, 0.9, 1.2];
        let y = [0.2, -0.3, 0.1];
        let ev = b.eval(&x).unwrap();
        let p1 = complete_lift_power(&ev, &y, 1).unwrap();
        let m1 = complete_lift_power(&ev, &y, -1).unwrap();
        let prod = &p1 * &m1;
        assert!((prod - DMatrix::identity(6, 6)).abs().max() < 1e-12);
        let m2 = complete_lift_power(&ev, &y, -2).unwrap();
        assert!((&m1 * &m1 - m2).abs().max() < 1e-12);
    }

    #[test]
    fn horizontal_lifts_are_omega_can_lagrangian() {
        // symmetry of Γ makes ω_can vanish on pairs of horizontal lifts
        let entry = catalog::toda_volterra();
        let b = &entry.bundle;
        let x = [1.0, 1.1, 0.9, 0.1, -0.05, 0.2];
        let y = [0.3, -0.2, 0.1, 0.25, -0.15, 0.05];
        let ev = b.eval(&x).unwrap();
        let wc = omega_can(6);
        for a in 0..6 {
            for c in 0..6 {
                let mut ea = DVector::zeros(6);
                ea[a] = 1.0;
                let mut ec = DVector::zeros(6);
                ec[c] = 1.0;
                let ha = horizontal_lift(&ev, &y, &ea).unwrap();
                let hc = horizontal_lift(&ev, &y, &ec).unwrap();
                let v = (hc.transpose() * &wc * &ha)[(0, 0)];
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn complete_lift_preserves_horizontal_under_compatibility() {
        // N^c(X^h) = (NX)^h exactly when ∇N satisfies the compatibility system
        for entry in [
            catalog::diagonal_quadratic_default(),
            catalog::toda_volterra(),
        ] {
            let b = &entry.bundle;
            for (x, y) in sample_states(&b.patch, 8, 0.3, 7).unwrap() {
                let ev = b.eval(&x).unwrap();
                let nm = ev.nij.clone().unwrap();
                let nc = complete_lift_n(&ev, &y).unwrap();
                let n = b.dim();
                for a in 0..n {
                    let mut ea = DVector::zeros(n);
                    ea[a] = 1.0;
                    let lifted = &nc * horizontal_lift(&ev, &y, &ea).unwrap();
                    let expect = horizontal_lift(&ev, &y, &(&nm * &ea)).unwrap();
                    assert!(
                        (lifted - expect).abs().max() < 1e-11,
                        "{}: column {} not horizontal",
                        entry.name,
                        a
                    );
                }
            }
        }
    }

    #[test]
    fn vertical_lift_components() {
        let entry = catalog::diagonal_quadratic_default();
        let x = [1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0];
        let ev = entry.bundle.eval(&x).unwrap();
        let v = vertical_lift_n(&ev, &y).unwrap();
        let nm = ev.nij.as_ref().unwrap();
        for j in 0..3 {
            assert_eq!(v[j], 0.0);
            let expect: f64 = (0..3).map(|k| nm[(k, j)] * y[k]).sum();
            assert_abs_diff_eq!(v[3 + j], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn lifted_torsion_vanishes_for_torsion_free_base() {
        for entry in [
            catalog::diagonal_quadratic_default(),
            catalog::toda_volterra(),
        ] {
            let b = &entry.bundle;
            for x in sample_points(&b.patch, 3, 11).unwrap() {
                let y: Vec<f64> = (0..b.dim()).map(|i| 0.05 * (i as f64 + 1.0)).collect();
                let r = nc_torsion_residual(b, &x, &y, 1e-5).unwrap();
                assert!(r < 1e-5, "{}: lifted torsion {}", entry.name, r);
            }
        }
    }

    #[test]
    fn lifted_torsion_detects_torsionful_base() {
        // N = diag(x2, x1) has nonvanishing torsion; the lift inherits it
        let mut nf = crate::fields::EndomorphismField::zero(2);
        nf.set_entry(0, 0, crate::expr::parse("x2", 2, &Default::default()).unwrap());
        nf.set_entry(1, 1, crate::expr::parse("x1", 2, &Default::default()).unwrap());
        let entry = catalog::zero_poisson(2);
        let mut b = entry.bundle.clone();
        b.nij = Some(nf);
        let r = nc_torsion_residual(&b, &[0.7, 0.2], &[0.1, 0.3], 1e-5).unwrap();
        assert!(r > 1e-3, "expected torsion, got {}", r);
    }
}
