//! Finite-difference fluxonium on a phase grid, shared by the oracle tests.

#![allow(dead_code)]

use core::f64::consts::PI;

/// Fluxonium on a uniform grid over [−6π, 6π] with Dirichlet walls and a
/// three-point Laplacian. Energies in GHz (E/h).
pub struct PhaseGrid {
    pub h: f64,
    diag: Vec<f64>,
    off: f64,
}

impl PhaseGrid {
    pub fn device(points: usize, flux: f64) -> Self {
        Self::new(points, flux, (3.82, 0.865, 0.822))
    }

    /// `(E_J, E_C, E_L)` in GHz.
    pub fn new(points: usize, flux: f64, (ej, ec, el): (f64, f64, f64)) -> Self {
        let lo = -6.0 * PI;
        let h = 12.0 * PI / (points - 1) as f64;
        // interior points only
        let diag = (1..points - 1)
            .map(|k| {
                let phi = lo + k as f64 * h;
                8.0 * ec / (h * h) - ej * (phi - 2.0 * PI * flux).cos() + 0.5 * el * phi * phi
            })
            .collect();
        Self {
            h,
            diag,
            off: -4.0 * ec / (h * h),
        }
    }

    /// Number of eigenvalues below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for (k, a) in self.diag.iter().enumerate() {
            d = if k == 0 {
                a - x
            } else {
                a - x - self.off * self.off / d
            };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = (-10.0f64, 200.0f64);
        while hi - lo > 1e-13 * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Normalized eigenvector by inverse iteration (Thomas algorithm).
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = lambda + 1e-10;
        let mut x = vec![1.0; n];
        for _ in 0..3 {
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let b0 = self.diag[0] - shift;
            c[0] = self.off / b0;
            d[0] = x[0] / b0;
            for k in 1..n {
                let m = self.diag[k] - shift - self.off * c[k - 1];
                c[k] = self.off / m;
                d[k] = (x[k] - self.off * d[k - 1]) / m;
            }
            let mut y = vec![0.0; n];
            y[n - 1] = d[n - 1];
            for k in (0..n - 1).rev() {
                y[k] = d[k] - c[k] * y[k + 1];
            }
            let norm = (y.iter().map(|v| v * v).sum::<f64>() * self.h).sqrt();
            x = y.into_iter().map(|v| v / norm).collect();
        }
        x
    }

    /// |⟨i| −i d/dφ |j⟩| by central differences.
    pub fn charge(&self, a: &[f64], b: &[f64]) -> f64 {
        self.derivative(a, b).abs()
    }

    /// `⟨i| d/dφ |j⟩`, real and antisymmetric for real eigenvectors.
    pub fn derivative(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let mut s = 0.0;
        for k in 0..n {
            let up = if k + 1 < n { b[k + 1] } else { 0.0 };
            let down = if k > 0 { b[k - 1] } else { 0.0 };
            s += a[k] * (up - down) / (2.0 * self.h) * self.h;
        }
        s
    }
}
