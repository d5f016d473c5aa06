//! Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm-sequence
//! bisection.

/// Number of eigenvalues strictly below `x`, from the signs of the pivots of
/// the `LDLᵀ` factorization of `T - xI`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `index`-th smallest eigenvalue (0-based).
///
/// # Panics
/// If `diag` is empty, `off.len() + 1 != diag.len()`, or `index` is out of
/// range.
pub fn eigenvalue(diag: &[f64], off: &[f64], index: usize) -> f64 {
    assert!(!diag.is_empty() && off.len() + 1 == diag.len() && index < diag.len());
    let (mut lo, mut hi) = gershgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    while hi - lo > 4.0 * f64::EPSILON * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn smallest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    eigenvalue(diag, off, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn discrete_laplacian() {
        let n = 50;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        for j in 0..n {
            let exact = 2.0 - 2.0 * (PI * (j + 1) as f64 / (n + 1) as f64).cos();
            assert!((eigenvalue(&diag, &off, j) - exact).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn agrees_with_dense_solver(
            diag in proptest::collection::vec(-5.0f64..5.0, 2..30),
            seed in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let n = diag.len();
            let off = &seed[..n - 1];
            let mut m = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = diag[i];
                if i + 1 < n {
                    m[(i, i + 1)] = off[i];
                    m[(i + 1, i)] = off[i];
                }
            }
            let eig = SymmetricEigen::new(m).eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!((smallest_eigenvalue(&diag, off) - min).abs() < 1e-10);
        }
    }
}
