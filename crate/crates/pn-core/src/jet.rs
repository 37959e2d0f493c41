//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value, a gradient and a (symmetric) Hessian and
//! propagates all three exactly through rational arithmetic. This is enough
//! for everything downstream: the spray Jacobian needs first derivatives of
//! the connection coefficients and second derivatives of the Poisson tensor
//! entries; nothing needs third derivatives.

/// Value, gradient and Hessian of a scalar function at a point.
///
/// The Hessian is stored as a full row-major `n x n` block and is kept
/// symmetric by construction: every operation writes `h[i][j]` and `h[j][i]`
/// from the same arithmetic expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Jet2 {
            value: c,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    /// The jet of the coordinate function `x^k` (0-based index).
    pub fn coordinate(n: usize, k: usize, xk: f64) -> Self {
        let mut j = Jet2::constant(n, xk);
        j.grad[k] = 1.0;
        j
    }

    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    pub fn add(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + rhs.value,
            grad: zip_with(&self.grad, &rhs.grad, |a, b| a + b),
            hess: zip_with(&self.hess, &rhs.hess, |a, b| a + b),
        }
    }

    pub fn sub(&self, rhs: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - rhs.value,
            grad: zip_with(&self.grad, &rhs.grad, |a, b| a - b),
            hess: zip_with(&self.hess, &rhs.hess, |a, b| a - b),
        }
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|a| -a).collect(),
            hess: self.hess.iter().map(|a| -a).collect(),
        }
    }

    pub fn mul(&self, rhs: &Jet2) -> Jet2 {
        let n = self.dim();
        let value = self.value * rhs.value;
        let mut grad = vec![0.0; n];
        for k in 0..n {
            grad[k] = self.grad[k] * rhs.value + self.value * rhs.grad[k];
        }
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = self.h(i, j) * rhs.value
                    + self.value * rhs.h(i, j)
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        Jet2 { value, grad, hess }
    }

    /// Reciprocal. The caller guards against a zero value.
    pub fn recip(&self) -> Jet2 {
        let n = self.dim();
        let v = 1.0 / self.value;
        let v2 = v * v;
        let v3 = v2 * v;
        let mut grad = vec![0.0; n];
        for k in 0..n {
            grad[k] = -self.grad[k] * v2;
        }
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] =
                    -self.h(i, j) * v2 + 2.0 * self.grad[i] * self.grad[j] * v3;
            }
        }
        Jet2 {
            value: v,
            grad,
            hess,
        }
    }

    pub fn div(&self, rhs: &Jet2) -> Jet2 {
        self.mul(&rhs.recip())
    }

    /// Integer power by repeated multiplication; negative exponents go
    /// through the reciprocal.
    pub fn powi(&self, e: i32) -> Jet2 {
        let n = self.dim();
        if e == 0 {
            return Jet2::constant(n, 1.0);
        }
        let base = if e < 0 { self.recip() } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }

    /// Largest asymmetry of the stored Hessian; zero up to round-off.
    pub fn hess_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                m = m.max((self.h(i, j) - self.h(j, i)).abs());
            }
        }
        m
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_rule_is_exact() {
        // f = x1, g = x2 at (2,3): (fg)' must match the jet product.
        let f = Jet2::coordinate(2, 0, 2.0);
        let g = Jet2::coordinate(2, 1, 3.0);
        let p = f.mul(&g);
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad, vec![3.0, 2.0]);
        assert_eq!(p.h(0, 1), 1.0);
        assert_eq!(p.h(1, 0), 1.0);
        assert_eq!(p.h(0, 0), 0.0);
    }

    #[test]
    fn reciprocal_derivatives() {
        let x = Jet2::coordinate(1, 0, 2.0);
        let r = x.recip();
        assert_abs_diff_eq!(r.value, 0.5);
        assert_abs_diff_eq!(r.grad[0], -0.25);
        assert_abs_diff_eq!(r.h(0, 0), 0.25);
    }

    #[test]
    fn negative_power() {
        let x = Jet2::coordinate(1, 0, 2.0);
        let p = x.powi(-2);
        assert_abs_diff_eq!(p.value, 0.25);
        assert_abs_diff_eq!(p.grad[0], -0.25); // d/dx x^-2 = -2 x^-3
        assert_abs_diff_eq!(p.h(0, 0), 0.375); // 6 x^-4
    }
}
