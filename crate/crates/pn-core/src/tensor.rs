//! Dense little tensors with 3 and 4 indices.
//!
//! nalgebra covers the matrix work; these cover the derivative arrays
//! (∂Π, ∂²Π, ∂N, Γ, ∂Γ) where every axis has length n.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.n + b) * self.n + c] = v;
    }

    #[inline]
    pub fn add_to(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.n + b) * self.n + c] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.n + b) * self.n + c) * self.n + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
