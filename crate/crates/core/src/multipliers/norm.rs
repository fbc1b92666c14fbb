//! Weighted operator norms of finite sections.
//!
//! With `D = diag(w(x_j))` the weighted norm of `M` equals the Euclidean norm
//! of `A = D M D^{-1}`. `A` is compressed to the window `[-W, W]` and the top
//! eigenvalue of `A^H A` is found by Lanczos with full reorthogonalisation.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{MultiplierOp, Stencil, FFT_THRESHOLD};
use crate::error::{Error, Result};
use crate::function_space::Grid;
use crate::linalg::tridiag_max_eigenvalue;
use crate::scalar::{lit, Real};
use crate::weights::Weight;

pub const DEFAULT_REL_TOL: f64 = 1e-6;
const MAX_ITER: usize = 400;
const SEED: u64 = 0x5eed_0001;
/// Above this spread of `ln w` over the window the FFT matvec would lose
/// too many digits to the diagonal scaling.
const FFT_LOG_RANGE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormEstimate<T: Real> {
    pub value: T,
    pub relative_tol: T,
    pub iterations: usize,
    pub window_l: T,
    pub converged: bool,
    /// Relative change of the last Ritz value; the bracket when not converged.
    pub last_change: T,
}

/// Norm of `M` on `L^2_w` over the whole grid window.
pub fn operator_norm<T: Real>(
    m: &MultiplierOp<T>,
    w: &Weight<T>,
    grid: &Grid<T>,
    rel_tol: T,
) -> Result<NormEstimate<T>> {
    operator_norm_window(m, w, grid, grid.half_width(), rel_tol)
}

/// Norm of the compression of `M` to `[-window, window]`.
pub fn operator_norm_window<T: Real>(
    m: &MultiplierOp<T>,
    w: &Weight<T>,
    grid: &Grid<T>,
    window: T,
    rel_tol: T,
) -> Result<NormEstimate<T>> {
    if !(rel_tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("rel_tol {rel_tol} must be > 0")));
    }
    if !(window > T::zero()) {
        return Err(Error::InvalidArgument(format!("window {window} must be > 0")));
    }
    let st = m.stencil(grid)?;
    let half = (window * T::from_usize_lossy(grid.per_unit()))
        .round()
        .to_usize()
        .unwrap_or(usize::MAX)
        .min(grid.center());
    let lo = grid.center() - half;
    let n = 2 * half + 1;
    let lw: Vec<T> = (0..n).map(|i| w.log_weight(grid.x(lo + i))).collect();
    if lw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidWeight("non-finite log weight in the window".into()));
    }
    let op = WindowOp::new(&st, lw);
    let window_l = T::from_usize_lossy(half) / T::from_usize_lossy(grid.per_unit());
    let (theta, iterations, converged, last_change) = lanczos_top(&op, n, rel_tol);
    Ok(NormEstimate {
        value: theta.max(T::zero()).sqrt(),
        relative_tol: rel_tol,
        iterations,
        window_l,
        converged,
        last_change,
    })
}

enum WindowOp<T: Real> {
    Dia {
        offsets: Vec<isize>,
        /// `diags[k][i] = c_k e^{lw_i - lw_{i - d_k}}` for row `i`.
        diags: Vec<Vec<Complex<T>>>,
        n: usize,
    },
    Fft {
        scale: Vec<T>,
        fwd: Arc<dyn Fft<T>>,
        inv: Arc<dyn Fft<T>>,
        /// Transforms of the stencil and its adjoint.
        k: Vec<Complex<T>>,
        k_adj: Vec<Complex<T>>,
        dmin: isize,
        dmin_adj: isize,
        len: usize,
        n: usize,
    },
}

impl<T: Real> WindowOp<T> {
    fn new(st: &Stencil<T>, lw: Vec<T>) -> Self {
        let n = lw.len();
        let (lmin, lmax) = lw
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
        if st.is_contiguous() && st.len() >= FFT_THRESHOLD && lmax - lmin <= lit(FFT_LOG_RANGE) {
            let mid = (lmin + lmax) / lit(2.0);
            let scale = lw.iter().map(|&v| (v - mid).exp()).collect();
            let (dmin, dmax) = st.span();
            let len = n + (dmax - dmin) as usize;
            let mut planner = FftPlanner::<T>::new();
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let mut k = vec![Complex::new(T::zero(), T::zero()); len];
            let mut k_adj = k.clone();
            for (&d, &c) in st.offsets.iter().zip(&st.coefs) {
                k[(d - dmin) as usize] = c;
                k_adj[(dmax - d) as usize] = c.conj();
            }
            fwd.process(&mut k);
            fwd.process(&mut k_adj);
            return WindowOp::Fft {
                scale,
                fwd,
                inv,
                k,
                k_adj,
                dmin,
                dmin_adj: -dmax,
                len,
                n,
            };
        }
        let diags = st
            .offsets
            .iter()
            .zip(&st.coefs)
            .map(|(&d, &c)| {
                (0..n)
                    .map(|i| {
                        let src = i as isize - d;
                        if (0..n as isize).contains(&src) {
                            c * (lw[i] - lw[src as usize]).exp()
                        } else {
                            Complex::new(T::zero(), T::zero())
                        }
                    })
                    .collect()
            })
            .collect();
        WindowOp::Dia {
            offsets: st.offsets.clone(),
            diags,
            n,
        }
    }

    /// `y = A^H A x`.
    fn normal_apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        match self {
            WindowOp::Dia { offsets, diags, n } => {
                let n = *n as isize;
                let mut y = vec![Complex::new(T::zero(), T::zero()); x.len()];
                for (&d, a) in offsets.iter().zip(diags) {
                    let (i0, i1) = (d.max(0), (n + d).min(n));
                    for i in i0..i1 {
                        y[i as usize] = y[i as usize] + a[i as usize] * x[(i - d) as usize];
                    }
                }
                let mut z = vec![Complex::new(T::zero(), T::zero()); x.len()];
                for (&d, a) in offsets.iter().zip(diags) {
                    let (i0, i1) = (d.max(0), (n + d).min(n));
                    for i in i0..i1 {
                        let j = (i - d) as usize;
                        z[j] = z[j] + a[i as usize].conj() * y[i as usize];
                    }
                }
                z
            }
            WindowOp::Fft {
                scale,
                fwd,
                inv,
                k,
                k_adj,
                dmin,
                dmin_adj,
                len,
                n,
            } => {
                let conv = |v: &[Complex<T>], kf: &[Complex<T>], d0: isize| -> Vec<Complex<T>> {
                    let mut buf = vec![Complex::new(T::zero(), T::zero()); *len];
                    buf[..*n].copy_from_slice(v);
                    fwd.process(&mut buf);
                    for (b, k) in buf.iter_mut().zip(kf) {
                        *b = *b * *k;
                    }
                    inv.process(&mut buf);
                    let s = T::one() / T::from_usize_lossy(*len);
                    // row i of the compression is entry i - d0 of the full product
                    (0..*n)
                        .map(|i| buf[(i as isize - d0) as usize] * s)
                        .collect()
                };
                let u: Vec<_> = x.iter().zip(scale).map(|(v, s)| *v / *s).collect();
                let y: Vec<_> = conv(&u, k, *dmin)
                    .into_iter()
                    .zip(scale)
                    .map(|(v, s)| v * *s)
                    .collect();
                let u: Vec<_> = y.iter().zip(scale).map(|(v, s)| *v * *s).collect();
                conv(&u, k_adj, *dmin_adj)
                    .into_iter()
                    .zip(scale)
                    .map(|(v, s)| v / *s)
                    .collect()
            }
        }
    }
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y)
}

fn norm2<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
}

/// Largest eigenvalue of the Hermitian positive semidefinite `A^H A`.
fn lanczos_top<T: Real>(op: &WindowOp<T>, n: usize, rel_tol: T) -> (T, usize, bool, T) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut v: Vec<Complex<T>> = (0..n)
        .map(|_| {
            Complex::new(
                T::lit(rng.random_range(-1.0..1.0)),
                T::lit(rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);

    let mut basis: Vec<Vec<Complex<T>>> = vec![v];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut theta = T::zero();
    let mut change = T::infinity();
    let mut calm = 0;
    let max_iter = MAX_ITER.min(n);
    for k in 0..max_iter {
        let mut wv = op.normal_apply(&basis[k]);
        let a = dot(&basis[k], &wv).re;
        // full reorthogonalisation, twice
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &wv);
                for (x, y) in wv.iter_mut().zip(q) {
                    *x = *x - c * *y;
                }
            }
        }
        alpha.push(a);
        let t = tridiag_max_eigenvalue(&alpha, &beta);
        change = if t > T::zero() {
            (t - theta).abs() / t
        } else {
            T::zero()
        };
        theta = t;
        if change < rel_tol {
            calm += 1;
        } else {
            calm = 0;
        }
        let b = norm2(&wv);
        if b <= T::epsilon() * lit(16.0) * theta.max(T::min_positive_value()) {
            // invariant subspace: the Ritz value is exact
            return (theta, k + 1, true, T::zero());
        }
        if calm >= 3 && k >= 4 {
            return (theta, k + 1, true, change);
        }
        beta.push(b);
        wv.iter_mut().for_each(|x| *x = *x / b);
        basis.push(wv);
    }
    (theta, max_iter, false, change)
}
