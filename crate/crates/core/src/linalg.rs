//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection.

use crate::scalar::Real;

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// `(diag, off)` that are strictly less than `x`.
pub(crate) fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let tiny = T::min_positive_value() / T::epsilon();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        // e (e / q) rather than e^2 / q keeps tiny couplings from underflowing
        q = diag[i] - x - if i == 0 { T::zero() } else { off[i - 1] * (off[i - 1] / q) };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based), bisected to relative accuracy.
pub(crate) fn tridiag_eigenvalue<T: Real>(diag: &[T], off: &[T], k: usize) -> T {
    let n = diag.len();
    assert!(k < n && off.len() + 1 >= n);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { T::zero() })
            + (if i + 1 < n { off[i].abs() } else { T::zero() });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = (hi - lo).abs() * T::epsilon() + T::min_positive_value();
    lo = lo - pad;
    hi = hi + pad;
    for _ in 0..2000 {
        let mid = lo + (hi - lo) / (T::one() + T::one());
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= T::epsilon() * (lo.abs().max(hi.abs())) {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + (hi - lo) / (T::one() + T::one())
}

pub(crate) fn tridiag_max_eigenvalue<T: Real>(diag: &[T], off: &[T]) -> T {
    tridiag_eigenvalue(diag, off, diag.len() - 1)
}
