//! Connection machinery: the compatibility system linking Γ and N, the
//! pointwise least-squares connection solver, the induced contravariant
//! coefficients on the cotangent side, horizontal lifts and the
//! horizontal/vertical splitting, and covector transport along cotangent
//! paths.

use nalgebra::{DMatrix, DVector};

use crate::algebra::VectorValued2Tensor;
use crate::error::{Error, Result};
use crate::fields::{EndomorphismField, FieldBundle, FieldEval};
use crate::tensor::Tensor3;

/// Residual of the local compatibility system
/// `∂ν^i_j/∂x^k − ∂ν^i_k/∂x^j − (Γ^i_{jl} ν^l_k − Γ^i_{kl} ν^l_j)`,
/// computed from raw value arrays.
pub fn nabla_n_residual_raw(
    nmat: &DMatrix<f64>,
    dn: &Tensor3,
    gamma: &Tensor3,
) -> VectorValued2Tensor {
    let n = nmat.nrows();
    let mut out = VectorValued2Tensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let mut v = dn.get(k, i, j) - dn.get(j, i, k);
                for l in 0..n {
                    v -= gamma.get(i, j, l) * nmat[(l, k)] - gamma.get(i, k, l) * nmat[(l, j)];
                }
                out.set_upper(i, j, k, v);
            }
        }
    }
    out
}

/// Compatibility residual of the bundle's own Γ with its N at `x`.
pub fn nabla_n_residual(bundle: &FieldBundle, x: &[f64]) -> Result<VectorValued2Tensor> {
    bundle.require_gamma()?;
    bundle.require_n()?;
    let ev = bundle.eval(x)?;
    Ok(nabla_n_residual_raw(
        ev.nij.as_ref().unwrap(),
        ev.dn.as_ref().unwrap(),
        ev.gamma.as_ref().unwrap(),
    ))
}

/// Pointwise least-squares solve of the compatibility system for Γ at one
/// point: for each i, `Γ^i N − ᵗN Γ^i = (∂ν^i_j/∂x^k − ∂ν^i_k/∂x^j)_{jk}`
/// over symmetric matrices Γ^i. The system is under-determined (n(n−1)/2
/// equations, n(n+1)/2 unknowns), so the minimal-norm solution is returned
/// together with the residual norm; a large residual flags incompatibility.
pub fn solve_connection_pointwise(
    nf: &EndomorphismField,
    x: &[f64],
) -> Result<(Tensor3, f64)> {
    let n = nf.n;
    let mut nmat = DMatrix::zeros(n, n);
    let mut dn = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let jet = nf.entry(i, j).eval_jet2(x)?;
            nmat[(i, j)] = jet.value;
            for k in 0..n {
                dn.set(k, i, j, jet.grad[k]);
            }
        }
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |k| (j, k)))
        .collect();
    let syms: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a..n).map(move |b| (a, b)))
        .collect();

    let mut gamma = Tensor3::zeros(n);
    let mut max_residual = 0.0f64;
    for i in 0..n {
        // column for unknown G_{ab}: entries of (E_{ab} N − Nᵀ E_{ab}) at (j,k)
        let mut m = DMatrix::zeros(pairs.len(), syms.len());
        for (col, &(a, b)) in syms.iter().enumerate() {
            for (row, &(j, k)) in pairs.iter().enumerate() {
                let mut v = 0.0;
                // (G N)_{jk} = G_{jl} N_{lk}; G = e_a e_bᵀ + e_b e_aᵀ (or e_a e_aᵀ)
                if j == a {
                    v += nmat[(b, k)];
                }
                if j == b && a != b {
                    v += nmat[(a, k)];
                }
                // −(Nᵀ G)_{jk} = −N_{lj} G_{lk}
                if k == b {
                    v -= nmat[(a, j)];
                }
                if k == a && a != b {
                    v -= nmat[(b, j)];
                }
                m[(row, col)] = v;
            }
        }
        let rhs = DVector::from_iterator(
            pairs.len(),
            pairs.iter().map(|&(j, k)| dn.get(k, i, j) - dn.get(j, i, k)),
        );
        // minimal-norm solution via M⁺ = Mᵀ(MMᵀ)⁺ with the Gram pseudoinverse
        // from a symmetric eigendecomposition (more accurate than a direct
        // SVD of the wide matrix)
        let gram = &m * m.transpose();
        let eig = gram.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = lmax * 1e-12;
        let mut w = eig.eigenvectors.transpose() * &rhs;
        for q in 0..w.len() {
            let l = eig.eigenvalues[q];
            w[q] = if l > cutoff { w[q] / l } else { 0.0 };
        }
        let sol = m.transpose() * (&eig.eigenvectors * w);
        let residual = (&m * &sol - &rhs).abs().max();
        max_residual = max_residual.max(residual);
        for (col, &(a, b)) in syms.iter().enumerate() {
            gamma.set(i, a, b, sol[col]);
            gamma.set(i, b, a, sol[col]);
        }
    }
    Ok((gamma, max_residual))
}

/// Contravariant coefficients `Γ̃_k^{ij} = Γ^i_{kl} Π^{lj} + ∂Π^{ij}/∂x^k`,
/// returned as `t.get(k, i, j)`.
pub fn contravariant_coeffs(ev: &FieldEval) -> Result<Tensor3> {
    let n = ev.pi.nrows();
    let gamma = ev
        .gamma
        .as_ref()
        .ok_or_else(|| Error::MissingConnection("contravariant coefficients need Γ".into()))?;
    let mut t = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = ev.dpi.get(k, i, j);
                for l in 0..n {
                    v += gamma.get(i, k, l) * ev.pi[(l, j)];
                }
                t.set(k, i, j, v);
            }
        }
    }
    Ok(t)
}

/// Cheap evaluation of Γ̃ at a point without the second-derivative arrays.
pub fn tilde_coeffs_at(bundle: &FieldBundle, x: &[f64]) -> Result<Tensor3> {
    let gamma_f = bundle.require_gamma()?;
    let (pm, dp) = crate::algebra::bivector_jets(&bundle.pi, x)?;
    let g = gamma_f.value(x)?;
    let n = bundle.dim();
    let mut t = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = dp.get(k, i, j);
                for l in 0..n {
                    v += g.get(i, k, l) * pm[(l, j)];
                }
                t.set(k, i, j, v);
            }
        }
    }
    Ok(t)
}

/// Coefficients of the induced contravariant derivative on vector paths,
/// obtained by expanding its defining relation on coordinate frames:
/// `B.get(i, j, l) = −Γ^i_{jk} Π^{kl} − ∂Π^{il}/∂x^j`, so that along a
/// cotangent path `(∇̄_a ū)^l = dū^l/dt + a_i ū^j B^i{}_j{}^l`.
pub fn bar_coeffs(ev: &FieldEval) -> Result<Tensor3> {
    let n = ev.pi.nrows();
    let gamma = ev
        .gamma
        .as_ref()
        .ok_or_else(|| Error::MissingConnection("vector transport needs Γ".into()))?;
    let mut t = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let mut v = -ev.dpi.get(j, i, l);
                for k in 0..n {
                    v -= gamma.get(i, j, k) * ev.pi[(k, l)];
                }
                t.set(i, j, l, v);
            }
        }
    }
    Ok(t)
}

/// Horizontal lift of the vector X at ξ = (x, y): components
/// `(X, y_k Γ^k_{·j} X^j)` in the (∂x, ∂y) frame.
pub fn horizontal_lift(ev: &FieldEval, y: &[f64], xvec: &DVector<f64>) -> Result<DVector<f64>> {
    let n = ev.pi.nrows();
    let gamma = ev
        .gamma
        .as_ref()
        .ok_or_else(|| Error::MissingConnection("horizontal lift needs Γ".into()))?;
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = xvec[i];
        let mut v = 0.0;
        for k in 0..n {
            for j in 0..n {
                v += y[k] * gamma.get(k, i, j) * xvec[j];
            }
        }
        out[n + i] = v;
    }
    Ok(out)
}

/// Split a tangent vector u of T*M at ξ = (x, y) into its horizontal part
/// (represented by the base vector ū) and vertical part θ_u:
/// `ū = u_x`, `θ_u = u_y − (vertical part of ū^h)`.
pub fn hv_split(ev: &FieldEval, y: &[f64], u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = ev.pi.nrows();
    let ubar = DVector::from_iterator(n, (0..n).map(|i| u[i]));
    let lift = horizontal_lift(ev, y, &ubar)?;
    let theta = DVector::from_iterator(n, (0..n).map(|i| u[n + i] - lift[n + i]));
    Ok((ubar, theta))
}

/// Integrate the covector transport ODE
/// `dθ̃_k/dt = θ_k(t) − Γ̃_k^{ij}(x(t)) y_i(t) θ̃_j` with RK4 along a
/// cotangent path sampled on a uniform half-step grid over [0,1]
/// (2m+1 nodes, so stage evaluations use exact midpoint states).
/// Returns θ̃ at the m+1 coarse nodes.
pub fn contravariant_derivative_along(
    bundle: &FieldBundle,
    fine_states: &[(Vec<f64>, Vec<f64>)],
    fine_sources: &[DVector<f64>],
    theta0: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    if fine_states.len() != fine_sources.len() {
        return Err(Error::GridMismatch(format!(
            "{} states vs {} sources",
            fine_states.len(),
            fine_sources.len()
        )));
    }
    if fine_states.len() < 3 || fine_states.len() % 2 == 0 {
        return Err(Error::GridMismatch(
            "need an odd number ≥ 3 of half-step nodes".into(),
        ));
    }
    let n = bundle.dim();
    let m = (fine_states.len() - 1) / 2;
    let h = 1.0 / m as f64;

    // Γ̃ contracted with the path covector at every fine node:
    // b[(k, j)] = Γ̃_k^{ij} y_i
    let mut bs: Vec<DMatrix<f64>> = Vec::with_capacity(fine_states.len());
    for (x, y) in fine_states {
        let t = tilde_coeffs_at(bundle, x)?;
        let mut b = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                b[(k, j)] = (0..n).map(|i| t.get(k, i, j) * y[i]).sum();
            }
        }
        bs.push(b);
    }

    let rhs = |node: usize, theta: &DVector<f64>| -> DVector<f64> {
        &fine_sources[node] - &bs[node] * theta
    };

    let mut out = Vec::with_capacity(m + 1);
    let mut theta = theta0.clone();
    out.push(theta.clone());
    for step in 0..m {
        let n0 = 2 * step;
        let k1 = rhs(n0, &theta);
        let k2 = rhs(n0 + 1, &(&theta + &k1 * (h / 2.0)));
        let k3 = rhs(n0 + 1, &(&theta + &k2 * (h / 2.0)));
        let k4 = rhs(n0 + 2, &(&theta + &k3 * h));
        theta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(theta.clone());
    }
    Ok(out)
}

/// Max residual over coordinate coframe pairs of the parallelism of ᵗN for
/// the contravariant derivative:
/// `ν^j_l Γ̃_k^{il} + Π^{im} ∂_m ν^j_k − ν^l_k Γ̃_l^{ij}` over all i, j, k.
pub fn tilde_nabla_parallel_residual(bundle: &FieldBundle, x: &[f64]) -> Result<f64> {
    bundle.require_n()?;
    let ev = bundle.eval(x)?;
    let ct = contravariant_coeffs(&ev)?;
    let nm = ev.nij.as_ref().unwrap();
    let dn = ev.dn.as_ref().unwrap();
    let n = bundle.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += nm[(j, l)] * ct.get(k, i, l) - nm[(l, k)] * ct.get(l, i, j);
                }
                for m in 0..n {
                    v += ev.pi[(i, m)] * dn.get(m, j, k);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}
