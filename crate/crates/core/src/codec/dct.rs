//! Orthonormal 2D DCT-II on square blocks, plus zig-zag coefficient order.

use std::f64::consts::PI;

/// Separable orthonormal DCT-II of an `n x n` block.
///
/// Orthonormality means coefficient-domain energy equals pixel-domain energy,
/// which is what lets embedding strength be reasoned about in pixel units.
#[derive(Debug, Clone)]
pub struct BlockDct {
    n: usize,
    // basis[k * n + x] = a(k) cos(pi (2x + 1) k / 2n)
    basis: Vec<f64>,
}

impl BlockDct {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let nf = n as f64;
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for x in 0..n {
                basis[k * n + x] = a * (PI * (2 * x + 1) as f64 * k as f64 / (2.0 * nf)).cos();
            }
        }
        BlockDct { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Row-major pixels in, row-major coefficients `[v * n + u]` out.
    pub fn forward(&self, block: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut tmp = vec![0.0; n * n];
        // rows: tmp[y][u] = sum_x basis[u][x] * block[y][x]
        for y in 0..n {
            for u in 0..n {
                tmp[y * n + u] = (0..n).map(|x| self.basis[u * n + x] * block[y * n + x]).sum();
            }
        }
        // columns: out[v][u] = sum_y basis[v][y] * tmp[y][u]
        for v in 0..n {
            for u in 0..n {
                out[v * n + u] = (0..n).map(|y| self.basis[v * n + y] * tmp[y * n + u]).sum();
            }
        }
    }

    pub fn inverse(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut tmp = vec![0.0; n * n];
        for y in 0..n {
            for u in 0..n {
                tmp[y * n + u] = (0..n).map(|v| self.basis[v * n + y] * coeffs[v * n + u]).sum();
            }
        }
        for y in 0..n {
            for x in 0..n {
                out[y * n + x] = (0..n).map(|u| self.basis[u * n + x] * tmp[y * n + u]).sum();
            }
        }
    }
}

/// Zig-zag scan of an `n x n` block as row-major offsets (`row * n + col`).
pub fn zigzag(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n * n);
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        if s % 2 == 1 {
            for row in lo..=hi {
                order.push(row * n + (s - row));
            }
        } else {
            for row in (lo..=hi).rev() {
                order.push(row * n + (s - row));
            }
        }
    }
    order
}
