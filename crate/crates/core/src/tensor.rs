//! Minimal row-major dense matrix used by the reference model.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Mat) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `x · wᵀ`: `x` is `n×in`, `w` is `out×in`, result `n×out`.
pub fn matmul_nt(x: &Mat, w: &Mat) -> Mat {
    assert_eq!(x.cols, w.cols, "matmul_nt inner dimension");
    let mut y = Mat::zeros(x.rows, w.rows);
    for i in 0..x.rows {
        let xr = x.row(i);
        let yr = y.row_mut(i);
        for (o, yv) in yr.iter_mut().enumerate() {
            let wr = w.row(o);
            let mut acc = 0.0;
            for (a, b) in xr.iter().zip(wr) {
                acc += a * b;
            }
            *yv = acc;
        }
    }
    y
}

/// `a · b`: `a` is `n×k`, `b` is `k×m`.
pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul_nn inner dimension");
    let mut y = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let ar = a.row(i);
        let yr = &mut y.data[i * b.cols..(i + 1) * b.cols];
        for (k, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let br = b.row(k);
            for (yv, bv) in yr.iter_mut().zip(br) {
                *yv += av * bv;
            }
        }
    }
    y
}

/// Accumulate `dyᵀ · x` into `grad`: `dy` is `n×out`, `x` is `n×in`,
/// `grad` is `out×in`.
pub fn accumulate_tn(grad: &mut Mat, dy: &Mat, x: &Mat) {
    assert_eq!(dy.rows, x.rows, "accumulate_tn rows");
    assert_eq!(grad.rows, dy.cols);
    assert_eq!(grad.cols, x.cols);
    for t in 0..dy.rows {
        let dyr = dy.row(t);
        let xr = x.row(t);
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let gr = &mut grad.data[o * x.cols..(o + 1) * x.cols];
            for (gv, xv) in gr.iter_mut().zip(xr) {
                *gv += g * xv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree() {
        let x = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = Mat::from_vec(2, 3, vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5]);
        let y = matmul_nt(&x, &w);
        assert_eq!(y.data, vec![-2.0, 3.0, -2.0, 7.5]);
        // w transposed explicitly
        let wt = Mat::from_vec(3, 2, vec![1.0, 0.5, 0.0, 0.5, -1.0, 0.5]);
        assert_eq!(matmul_nn(&x, &wt), y);
        let mut g = Mat::zeros(2, 3);
        accumulate_tn(&mut g, &y, &x);
        // g = yᵀ x
        assert_eq!(g.data, vec![-10.0, -14.0, -18.0, 33.0, 43.5, 54.0]);
    }
}
