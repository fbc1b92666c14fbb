//! Translation-invariant operators on the sampled weighted space.
//!
//! Every shipped multiplier acts on the grid as a Toeplitz stencil
//! `(M f)_j = sum_d c_d f_{j-d}`, so it commutes exactly with index shifts.

mod norm;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{
    log_weighted_norm, make_test_function, read_csv, shift_samples, translate, weighted_norm, write_csv,
    Grid, SampledFunction, TestFunction, TRUNCATION_TOL,
};
use crate::scalar::{lit, Real};
use crate::shift_analysis::{analyze_strip, Direction, NormSequence, StripAnalysis, DEFAULT_N_MAX};
use crate::weights::{Interval, Sampling, Weight};

pub use norm::{operator_norm, operator_norm_window, NormEstimate, DEFAULT_REL_TOL};

/// Kernels whose support spans at least this many samples are applied via FFT.
pub const FFT_THRESHOLD: usize = 64;

/// A compactly supported convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T: Real> {
    phi: SampledFunction<T>,
}

impl<T: Real> Kernel<T> {
    /// Requires a declared support.
    pub fn new(phi: SampledFunction<T>) -> Result<Self> {
        if phi.support().is_none() {
            return Err(Error::InvalidArgument("kernel needs a compact support".into()));
        }
        Ok(Self { phi })
    }

    /// Discrete delta: `1/h` at `x = 0`.
    pub fn delta(grid: Grid<T>) -> Self {
        let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        values[grid.center()] = Complex::new(T::from_usize_lossy(grid.per_unit()), T::zero());
        let phi = SampledFunction::from_values(grid, values, Some(Interval::new(T::zero(), T::zero())))
            .expect("delta fits any grid");
        Self { phi }
    }

    /// Unit-mass hat `(1 - |x|/r)/r` on `[-r, r]`.
    pub fn triangle(grid: Grid<T>, half_width: T) -> Result<Self> {
        if !(half_width > T::zero()) {
            return Err(Error::InvalidArgument(format!("half width {half_width} must be > 0")));
        }
        let phi = SampledFunction::from_fn(grid, Some(Interval::symmetric(half_width)), |x| {
            Complex::new((T::one() - x.abs() / half_width).max(T::zero()) / half_width, T::zero())
        })?;
        Ok(Self { phi })
    }

    pub fn indicator(grid: Grid<T>, lo: T, hi: T) -> Result<Self> {
        Self::new(make_test_function(grid, TestFunction::Indicator { lo, hi })?)
    }

    /// Raised-cosine bump of the given width, peak 1.
    pub fn bump(grid: Grid<T>, center: T, width: T) -> Result<Self> {
        Self::new(make_test_function(grid, TestFunction::bump(center, width))?)
    }

    pub fn function(&self) -> &SampledFunction<T> {
        &self.phi
    }

    pub fn grid(&self) -> &Grid<T> {
        self.phi.grid()
    }

    pub fn support(&self) -> Interval<T> {
        self.phi.support().expect("kernels carry a support")
    }

    /// Trapezoid integral `∫ phi`.
    pub fn mass(&self) -> Complex<T> {
        self.phi.integral()
    }

    /// Stencil `c_d = h phi(x_d)` over the sampled support.
    pub fn stencil(&self) -> Stencil<T> {
        let g = self.grid();
        let h = g.step();
        let s = self.support();
        let (a, b) = (g.ceil_index(s.lo), g.floor_index(s.hi));
        let c = g.center() as isize;
        let (offsets, coefs) = (a..=b)
            .map(|j| (j as isize - c, self.phi.values()[j] * h))
            .unzip();
        Stencil { offsets, coefs }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.phi, out)
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        Self::new(read_csv(input)?)
    }
}

/// Sparse Toeplitz stencil, offsets in grid samples, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil<T: Real> {
    pub offsets: Vec<isize>,
    pub coefs: Vec<Complex<T>>,
}

impl<T: Real> Stencil<T> {
    pub fn shift(k: isize) -> Self {
        Self {
            offsets: vec![k],
            coefs: vec![Complex::new(T::one(), T::zero())],
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn span(&self) -> (isize, isize) {
        (
            self.offsets.first().copied().unwrap_or(0),
            self.offsets.last().copied().unwrap_or(0),
        )
    }

    /// Offsets form a contiguous run.
    pub fn is_contiguous(&self) -> bool {
        let (lo, hi) = self.span();
        (hi - lo + 1) as usize == self.offsets.len()
    }

    /// Stencil of the product `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut acc: BTreeMap<isize, Complex<T>> = BTreeMap::new();
        for (da, ca) in self.offsets.iter().zip(&self.coefs) {
            for (db, cb) in other.offsets.iter().zip(&other.coefs) {
                let e = acc.entry(da + db).or_insert(Complex::new(T::zero(), T::zero()));
                *e = *e + *ca * *cb;
            }
        }
        let (offsets, coefs) = acc.into_iter().unzip();
        Self { offsets, coefs }
    }

    /// `sum_d c_d e^{-i z d h}`: the symbol of the stencil at `z`.
    pub fn symbol(&self, step: T, z: Complex<T>) -> Complex<T> {
        self.offsets
            .iter()
            .zip(&self.coefs)
            .map(|(&d, &c)| c * crate::scalar::cexp(-Complex::new(T::zero(), T::one()) * z * (T::from_isize_lossy(d) * step)))
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }
}

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Full (untruncated) stencil output over indices `start..start+len`.
fn stencil_direct<T: Real>(st: &Stencil<T>, src: &[Complex<T>]) -> Vec<Complex<T>> {
    let (dmin, dmax) = st.span();
    let len = src.len() + (dmax - dmin) as usize;
    let mut out = vec![zero::<T>(); len];
    for (&d, &c) in st.offsets.iter().zip(&st.coefs) {
        let base = (d - dmin) as usize;
        for (i, v) in src.iter().enumerate() {
            out[base + i] = out[base + i] + c * *v;
        }
    }
    out
}

fn stencil_fft<T: Real>(st: &Stencil<T>, src: &[Complex<T>]) -> Vec<Complex<T>> {
    let (dmin, dmax) = st.span();
    let klen = (dmax - dmin + 1) as usize;
    let len = src.len() + klen - 1;
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut a = vec![zero::<T>(); len];
    a[..src.len()].copy_from_slice(src);
    let mut b = vec![zero::<T>(); len];
    for (&d, &c) in st.offsets.iter().zip(&st.coefs) {
        b[(d - dmin) as usize] = c;
    }
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y;
    }
    inv.process(&mut a);
    let scale = T::one() / T::from_usize_lossy(len);
    a.iter().map(|v| *v * scale).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionPath {
    Auto,
    Direct,
    Fft,
}

/// Applies a stencil, erroring if more than `TRUNCATION_TOL` of the result
/// falls off the grid.
pub fn apply_stencil<T: Real>(
    st: &Stencil<T>,
    f: &SampledFunction<T>,
    path: ConvolutionPath,
) -> Result<SampledFunction<T>> {
    let grid = *f.grid();
    let Some((a, b)) = f.nonzero_range() else {
        return Ok(SampledFunction::zeros(grid));
    };
    if st.is_empty() {
        return Ok(SampledFunction::zeros(grid));
    }
    let src = &f.values()[a..=b];
    let use_fft = match path {
        ConvolutionPath::Direct => false,
        ConvolutionPath::Fft => true,
        ConvolutionPath::Auto => st.is_contiguous() && st.len() >= FFT_THRESHOLD,
    };
    let full = if use_fft {
        stencil_fft(st, src)
    } else {
        stencil_direct(st, src)
    };
    let (dmin, dmax) = st.span();
    let start = a as isize + dmin;
    let n = grid.len() as isize;
    let mut values = vec![zero::<T>(); grid.len()];
    let mut kept = T::zero();
    let mut lost = T::zero();
    for (i, v) in full.iter().enumerate() {
        let j = start + i as isize;
        if (0..n).contains(&j) {
            values[j as usize] = *v;
            kept = kept + v.norm_sqr();
        } else {
            lost = lost + v.norm_sqr();
        }
    }
    if lost > T::zero() && (lost / (lost + kept)).sqrt() > lit(TRUNCATION_TOL) {
        return Err(Error::Truncation(format!(
            "output support leaves [-{0}, {0}]",
            grid.half_width()
        )));
    }
    let h = grid.step();
    let (s0, s1) = match f.effective_support() {
        Some(s) => (s.lo, s.hi),
        None => (grid.x(a), grid.x(b)),
    };
    let lo = (s0 + T::from_isize_lossy(dmin) * h).max(-grid.half_width());
    let hi = (s1 + T::from_isize_lossy(dmax) * h).min(grid.half_width());
    SampledFunction::from_values(grid, values, Some(Interval::new(lo, hi)))
}

/// `(M_phi f)(x) = ∫ f(x - y) phi(y) dy` as a discrete convolution with
/// quadrature weight `h`.
pub fn apply_convolution<T: Real>(phi: &Kernel<T>, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    apply_convolution_with(phi, f, ConvolutionPath::Auto)
}

pub fn apply_convolution_with<T: Real>(
    phi: &Kernel<T>,
    f: &SampledFunction<T>,
    path: ConvolutionPath,
) -> Result<SampledFunction<T>> {
    if !phi.grid().same_as(f.grid()) {
        return Err(Error::GridMismatch);
    }
    apply_stencil(&phi.stencil(), f, path)
}

/// `phi * psi` as a kernel, so that `M_phi M_psi = M_{phi * psi}`.
pub fn convolve_kernels<T: Real>(phi: &Kernel<T>, psi: &Kernel<T>) -> Result<Kernel<T>> {
    let prod = apply_convolution(phi, psi.function())?;
    let (p, q) = (phi.support(), psi.support());
    let g = *prod.grid();
    let s = Interval::new(p.lo + q.lo, p.hi + q.hi);
    if !g.contains_interval(&s) {
        return Err(Error::SupportOutsideGrid(format!("[{}, {}]", s.lo, s.hi)));
    }
    Kernel::new(prod.with_support(Some(s))?)
}

/// An operator acting on sampled functions.
pub trait GridOperator<T: Real>: Send + Sync {
    fn apply(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>>;

    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventBranch {
    /// `|z| > r_out`: `-sum z^{-(n+1)} S_n`.
    Outer,
    /// `|z| < r_in`: `sum z^n S_{-(n+1)}`.
    Inner,
}

/// Truncated Neumann series for `(S - z)^{-1}` with a fixed number of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOp<T: Real> {
    pub z: Complex<T>,
    pub branch: ResolventBranch,
    pub terms: usize,
    /// Rigorous bound on the operator norm of the omitted tail.
    pub tail_bound: T,
}

impl<T: Real> ResolventOp<T> {
    /// Chooses the branch from the annulus and the number of terms from the
    /// operator tail bound `sum_{n >= N} ||S_{±n}|| / |z|^{n+1} <= tail_tol`.
    pub fn new(analysis: &StripAnalysis<T>, z: Complex<T>, tail_tol: T) -> Result<Self> {
        let branch = select_branch(analysis, z)?;
        let seq = match branch {
            ResolventBranch::Outer => &analysis.forward.sequence,
            ResolventBranch::Inner => &analysis.backward.sequence,
        };
        let (terms, tail_bound) = neumann_terms(seq, branch, z.norm(), tail_tol).ok_or_else(|| {
            Error::InsideSpectrum {
                modulus: z.norm().as_f64(),
                r_in: analysis.annulus.r_in.as_f64(),
                r_out: analysis.annulus.r_out.as_f64(),
            }
        })?;
        Ok(Self {
            z,
            branch,
            terms,
            tail_bound,
        })
    }

    /// `(shift in units, coefficient)` for each retained term.
    pub fn terms_iter(&self) -> impl Iterator<Item = (isize, Complex<T>)> + '_ {
        let z = self.z;
        let mut c = match self.branch {
            ResolventBranch::Outer => -z.inv(),
            ResolventBranch::Inner => Complex::new(T::one(), T::zero()),
        };
        (0..self.terms).map(move |n| {
            let out = match self.branch {
                ResolventBranch::Outer => (n as isize, c),
                ResolventBranch::Inner => (-(n as isize) - 1, c),
            };
            c = match self.branch {
                ResolventBranch::Outer => c / z,
                ResolventBranch::Inner => c * z,
            };
            out
        })
    }

    pub fn stencil(&self, grid: &Grid<T>) -> Stencil<T> {
        let pu = grid.per_unit() as isize;
        let mut pairs: Vec<(isize, Complex<T>)> =
            self.terms_iter().map(|(k, c)| (k * pu, c)).collect();
        pairs.sort_by_key(|p| p.0);
        let (offsets, coefs) = pairs.into_iter().unzip();
        Stencil { offsets, coefs }
    }
}

pub(crate) fn select_branch<T: Real>(an: &StripAnalysis<T>, z: Complex<T>) -> Result<ResolventBranch> {
    let (lo, hi) = an.annulus.inflated(lit(3.0));
    let r = z.norm();
    if r > hi {
        Ok(ResolventBranch::Outer)
    } else if r < lo && r > T::zero() {
        Ok(ResolventBranch::Inner)
    } else {
        Err(Error::InsideSpectrum {
            modulus: r.as_f64(),
            r_in: an.annulus.r_in.as_f64(),
            r_out: an.annulus.r_out.as_f64(),
        })
    }
}

/// Smallest `N` with a rigorous tail bound `<= tail_tol`, using
/// submultiplicativity over blocks of length `m`:
/// `sum_{n >= J m} ||S_n|| / r^{n+1} <= C_m q_m^J / (1 - q_m)` with
/// `q_m = ||S_m|| / r^m`, `C_m = sum_{k<m} ||S_k|| / r^{k+1}`.
/// For the inner branch `r` is `1/|z|` and the norms are those of `S^{-n}`.
pub fn neumann_terms<T: Real>(
    seq: &NormSequence<T>,
    branch: ResolventBranch,
    modulus: T,
    tail_tol: T,
) -> Option<(usize, T)> {
    // log of ||S_{±k}|| / rho^k with rho = |z| (outer) or 1/|z| (inner)
    let ln_r = match branch {
        ResolventBranch::Outer => modulus.ln(),
        ResolventBranch::Inner => -modulus.ln(),
    };
    let ln_coef = |k: usize, log_norm: T| log_norm - T::from_usize_lossy(k) * ln_r;
    let mut logs = vec![T::zero()];
    logs.extend(seq.entries.iter().map(|e| ln_coef(e.n, e.log_norm)));
    let mut best: Option<(usize, T)> = None;
    let ln_tol = tail_tol.ln();
    for m in 1..logs.len() {
        let ln_q = logs[m];
        if ln_q >= T::zero() {
            continue;
        }
        // both branches carry a common factor 1/|z|
        let peak = logs[..m].iter().copied().fold(T::neg_infinity(), T::max);
        let s: T = logs[..m].iter().map(|&l| (l - peak).exp()).sum();
        let ln_c = peak + s.ln() - modulus.ln();
        let ln_den = (-(ln_q.exp_m1())).ln();
        // need ln_c + J ln_q - ln_den <= ln_tol
        let need = ((ln_tol - ln_c + ln_den) / ln_q).ceil().max(T::zero());
        let Some(j) = need.to_usize() else { continue };
        let n = j * m;
        let bound = (ln_c + T::from_usize_lossy(j) * ln_q - ln_den).exp();
        if best.is_none_or(|(bn, _)| n < bn) {
            best = Some((n.max(1), bound));
        }
    }
    best
}

/// Multiplier kinds shipped with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierOp<T: Real> {
    Convolution(Kernel<T>),
    /// Translation `S_t` by a grid multiple.
    Shift(T),
    Resolvent(ResolventOp<T>),
    /// Product of the factors; the last factor is applied first.
    Composition(Vec<MultiplierOp<T>>),
}

impl<T: Real> MultiplierOp<T> {
    pub fn identity() -> Self {
        MultiplierOp::Shift(T::zero())
    }

    pub fn stencil(&self, grid: &Grid<T>) -> Result<Stencil<T>> {
        match self {
            MultiplierOp::Convolution(k) => {
                if !k.grid().same_as(grid) {
                    return Err(Error::GridMismatch);
                }
                Ok(k.stencil())
            }
            MultiplierOp::Shift(t) => Ok(Stencil::shift(grid.steps(*t)?)),
            MultiplierOp::Resolvent(r) => Ok(r.stencil(grid)),
            MultiplierOp::Composition(ops) => {
                let mut acc = Stencil::shift(0);
                for op in ops {
                    acc = acc.compose(&op.stencil(grid)?);
                }
                Ok(acc)
            }
        }
    }
}

impl<T: Real> GridOperator<T> for MultiplierOp<T> {
    fn apply(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
        match self {
            MultiplierOp::Convolution(k) => apply_convolution(k, f),
            MultiplierOp::Shift(t) => translate(f, *t)?.exact(),
            MultiplierOp::Resolvent(r) => apply_stencil(&r.stencil(f.grid()), f, ConvolutionPath::Direct),
            MultiplierOp::Composition(ops) => ops
                .iter()
                .rev()
                .try_fold(f.clone(), |g, op| op.apply(&g)),
        }
    }

    fn label(&self) -> String {
        match self {
            MultiplierOp::Convolution(_) => "convolution".into(),
            MultiplierOp::Shift(t) => format!("shift({t})"),
            MultiplierOp::Resolvent(r) => format!("resolvent(z={}{:+}i)", r.z.re, r.z.im),
            MultiplierOp::Composition(ops) => format!(
                "composition[{}]",
                ops.iter().map(|o| o.label()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

/// Multiplication by `x`: bounded on the window but not translation
/// invariant. Kept as a negative control for commutation tests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PositionMultiplier;

impl<T: Real> GridOperator<T> for PositionMultiplier {
    fn apply(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
        let g = *f.grid();
        let values = f
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| *v * g.x(j))
            .collect();
        SampledFunction::from_values(g, values, f.support())
    }

    fn label(&self) -> String {
        "position (non-multiplier)".into()
    }
}

/// `max_f ||M S_t f - S_t M f||_w / ||f||_w`. Any truncation is an error.
pub fn commutation_residual<T: Real>(
    m: &dyn GridOperator<T>,
    t: T,
    probes: &[SampledFunction<T>],
    w: &Weight<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for f in probes {
        let lhs = m.apply(&translate(f, t)?.exact()?)?;
        let rhs = translate(&m.apply(f)?, t)?.exact()?;
        let r = (log_weighted_norm(&lhs.sub(&rhs)?, w) - log_weighted_norm(f, w)).exp();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `phi_n = psi * j_n`, `j_n` a raised-cosine bump of width `1/n` with unit
/// discrete mass.
pub fn mollifier_sequence<T: Real>(psi: &Kernel<T>, n: usize) -> Result<Kernel<T>> {
    let grid = *psi.grid();
    let j = mollifier(grid, n)?;
    convolve_kernels(psi, &j)
}

/// The mollifier `j_n` itself.
pub fn mollifier<T: Real>(grid: Grid<T>, n: usize) -> Result<Kernel<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("mollifier index must be >= 1".into()));
    }
    let width = T::one() / T::from_usize_lossy(n);
    if width < grid.step() {
        return Err(Error::MollifierUnresolved {
            width: width.as_f64(),
            step: grid.step().as_f64(),
        });
    }
    let bump = make_test_function(grid, TestFunction::bump(T::zero(), width))?;
    let mass = bump.integral().re;
    Kernel::new(bump.scale(Complex::new(mass.recip(), T::zero())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MollifierStep<T: Real> {
    pub n: usize,
    pub strong_residual: T,
    pub norm: T,
    pub norm_ratio: T,
    pub mass_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MollifierDemo<T: Real> {
    pub base_norm: T,
    pub steps: Vec<MollifierStep<T>>,
    pub monotone: bool,
    /// Observed `max_n ||M_{phi_n}|| / ||M_psi||`.
    pub observed_constant: T,
}

/// Strong convergence `M_{phi_n} f -> M_psi f` and the norm ratios along
/// `ns`. `window` is the half width used for the norm estimates.
pub fn mollifier_demo<T: Real>(
    psi: &Kernel<T>,
    w: &Weight<T>,
    probes: &[SampledFunction<T>],
    ns: &[usize],
    window: T,
    rel_tol: T,
) -> Result<MollifierDemo<T>> {
    let grid = *psi.grid();
    let base_op = MultiplierOp::Convolution(psi.clone());
    let base_norm = operator_norm_window(&base_op, w, &grid, window, rel_tol)?.value;
    let base_out: Vec<_> = probes
        .iter()
        .map(|f| apply_convolution(psi, f))
        .collect::<Result<_>>()?;
    let mut steps = Vec::with_capacity(ns.len());
    for &n in ns {
        let phi = mollifier_sequence(psi, n)?;
        let mut res = T::zero();
        for (f, base) in probes.iter().zip(&base_out) {
            let d = apply_convolution(&phi, f)?.sub(base)?;
            res = res.max(weighted_norm(&d, w) / weighted_norm(f, w));
        }
        let op = MultiplierOp::Convolution(phi.clone());
        let norm = operator_norm_window(&op, w, &grid, window, rel_tol)?.value;
        steps.push(MollifierStep {
            n,
            strong_residual: res,
            norm,
            norm_ratio: norm / base_norm,
            mass_error: (phi.mass() - psi.mass()).norm(),
        });
    }
    let monotone = steps.windows(2).all(|p| p[1].strong_residual < p[0].strong_residual);
    let observed_constant = steps.iter().map(|s| s.norm_ratio).fold(T::zero(), T::max);
    Ok(MollifierDemo {
        base_norm,
        steps,
        monotone,
        observed_constant,
    })
}

/// Summed Neumann series applied to one function.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannResult<T: Real> {
    pub value: SampledFunction<T>,
    pub branch: ResolventBranch,
    pub terms: usize,
    /// `||remainder||_w / ||f||_w` at truncation.
    pub tail: T,
    /// `||(S - z) T f - f||_w / ||f||_w`.
    pub residual: T,
}

/// `(S - e^alpha)^{-1} f` by the Neumann series on the side of the annulus
/// that `e^alpha` lies on.
pub fn resolvent_neumann<T: Real>(
    w: &Weight<T>,
    alpha: Complex<T>,
    f: &SampledFunction<T>,
    tail_tol: T,
) -> Result<NeumannResult<T>> {
    let an = analyze_strip(w, DEFAULT_N_MAX)?;
    resolvent_neumann_with(&an, w, crate::scalar::cexp(alpha), f, tail_tol)
}

/// As [`resolvent_neumann`], with a precomputed annulus and `z = e^alpha`.
pub fn resolvent_neumann_with<T: Real>(
    an: &StripAnalysis<T>,
    w: &Weight<T>,
    z: Complex<T>,
    f: &SampledFunction<T>,
    tail_tol: T,
) -> Result<NeumannResult<T>> {
    let branch = select_branch(an, z)?;
    let grid = *f.grid();
    let pu = grid.per_unit() as isize;
    let ln_f = log_weighted_norm(f, w);
    if ln_f == T::neg_infinity() {
        return Ok(NeumannResult {
            value: SampledFunction::zeros(grid),
            branch,
            terms: 0,
            tail: T::zero(),
            residual: T::zero(),
        });
    }
    let one = Complex::new(T::one(), T::zero());
    let ln_tol = tail_tol.ln();
    let mut sum = SampledFunction::zeros(grid);
    // coefficient of the next term and of the remainder z^{∓N} S_{±N} f
    let (mut c_term, mut c_rem) = match branch {
        ResolventBranch::Outer => (-z.inv(), one),
        ResolventBranch::Inner => (one, one),
    };
    let max_terms = 1_000_000usize;
    for n in 0..max_terms {
        let (k_term, k_rem) = match branch {
            ResolventBranch::Outer => (n as isize, n as isize),
            ResolventBranch::Inner => (-(n as isize) - 1, -(n as isize)),
        };
        let rem = shift_samples(f, k_rem * pu).exact()?;
        let ln_rem = log_weighted_norm(&rem, w) + c_rem.norm().ln() - ln_f;
        let term = shift_samples(f, k_term * pu).exact()?;
        let ln_term = log_weighted_norm(&term, w) + c_term.norm().ln() - ln_f;
        if n > 0 && ln_rem <= ln_tol && ln_term <= ln_tol {
            let value = sum.with_support(None)?;
            let value = trim_support(value);
            let lhs = translate(&value, T::one())?
                .exact()?
                .axpy(-z, &value)?
                .sub(f)?;
            let residual = (log_weighted_norm(&lhs, w) - ln_f).exp();
            return Ok(NeumannResult {
                value,
                branch,
                terms: n,
                tail: ln_rem.exp(),
                residual,
            });
        }
        sum = sum.axpy(c_term, &term)?;
        match branch {
            ResolventBranch::Outer => {
                c_term = c_term / z;
                c_rem = c_rem / z;
            }
            ResolventBranch::Inner => {
                c_term = c_term * z;
                c_rem = c_rem * z;
            }
        }
    }
    Err(Error::Truncation("Neumann series did not reach the tail tolerance".into()))
}

fn trim_support<T: Real>(f: SampledFunction<T>) -> SampledFunction<T> {
    let s = f.effective_support();
    f.with_support(s).expect("hull of samples lies on the grid")
}

/// Norm sequence direction used by a branch.
pub fn branch_direction(b: ResolventBranch) -> Direction {
    match b {
        ResolventBranch::Outer => Direction::Forward,
        ResolventBranch::Inner => Direction::Backward,
    }
}

/// Default sampling for ratio sups used by the resolvent machinery.
pub fn default_sampling<T: Real>() -> Sampling<T> {
    Sampling::default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::make_builtin_weight;

    fn wt(name: &str, p: &[f64]) -> Weight<f64> {
        make_builtin_weight(name, p).unwrap()
    }

    fn grid() -> Grid<f64> {
        Grid::new(32.0, 1.0 / 16.0).unwrap()
    }

    fn bump(g: Grid<f64>, c: f64, w: f64) -> SampledFunction<f64> {
        make_test_function(g, TestFunction::bump(c, w)).unwrap()
    }

    fn max_diff(a: &SampledFunction<f64>, b: &SampledFunction<f64>) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn delta_is_identity() {
        let g = grid();
        let f = bump(g, 0.3, 2.0);
        let out = apply_convolution(&Kernel::delta(g), &f).unwrap();
        assert!(max_diff(&out, &f) < 1e-12);
    }

    #[test]
    fn indicator_convolution_is_a_hat() {
        let g = grid();
        let chi = Kernel::indicator(g, 0.0, 1.0).unwrap();
        let out = apply_convolution(&chi, chi.function()).unwrap();
        for j in 0..g.len() {
            let x = g.x(j);
            let hat = (1.0 - (x - 1.0).abs()).max(0.0);
            // endpoint samples of both indicators carry weight h
            assert!((out.values()[j].re - hat).abs() <= 2.0 * g.step() + 1e-12, "x={x}");
        }
        let peak = out.values()[g.index_of(1.0).unwrap()].re;
        assert!((peak - 1.0).abs() <= g.step() + 1e-12);
        assert_eq!(out.support(), Some(Interval::new(0.0, 2.0)));
    }

    #[test]
    fn bump_kernel_sifts() {
        let g = grid();
        let k = Kernel::bump(g, 1.5, 1.0).unwrap();
        let out = apply_convolution(&k, Kernel::delta(g).function()).unwrap();
        assert!(max_diff(&out, k.function()) < 1e-12);
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let g = grid();
        let k = Kernel::bump(g, 0.2, 6.0).unwrap();
        assert!(k.stencil().len() >= FFT_THRESHOLD);
        let f = crate::function_space::modulate(&bump(g, -1.0, 3.0), 0.7);
        let a = apply_convolution_with(&k, &f, ConvolutionPath::Direct).unwrap();
        let b = apply_convolution_with(&k, &f, ConvolutionPath::Fft).unwrap();
        assert!(max_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn truncation_is_an_error() {
        let g = grid();
        let k = Kernel::indicator(g, 0.0, 4.0).unwrap();
        let f = bump(g, 30.0, 2.0);
        assert!(matches!(apply_convolution(&k, &f), Err(Error::Truncation(_))));
    }

    #[test]
    fn kernel_algebra_matches_composition() {
        let g = grid();
        let phi = Kernel::triangle(g, 1.0).unwrap();
        let psi = Kernel::bump(g, 0.5, 2.0).unwrap();
        let f = bump(g, -2.0, 3.0);
        let seq = apply_convolution(&phi, &apply_convolution(&psi, &f).unwrap()).unwrap();
        let direct = apply_convolution(&convolve_kernels(&phi, &psi).unwrap(), &f).unwrap();
        assert!(max_diff(&seq, &direct) <= 1e-9 * seq.max_abs());

        let d = convolve_kernels(&Kernel::delta(g), &psi).unwrap();
        assert!(max_diff(d.function(), psi.function()) < 1e-12);

        let bb = convolve_kernels(&psi, &psi).unwrap();
        let c = g.index_of(1.0).unwrap();
        for k in 0..40 {
            assert!((bb.function().values()[c + k] - bb.function().values()[c - k]).norm() < 1e-12);
        }
    }

    #[test]
    fn commutation_examples() {
        let g = grid();
        let w = wt("exp_poly", &[0.0]);
        let probes = vec![bump(g, 0.0, 2.0), bump(g, 3.0, 1.0)];
        let conv = MultiplierOp::Convolution(Kernel::triangle(g, 1.0).unwrap());
        assert!(commutation_residual(&conv, 1.0, &probes, &w).unwrap() <= 1e-10);
        let comp = MultiplierOp::Composition(vec![
            conv.clone(),
            MultiplierOp::Convolution(Kernel::bump(g, 0.5, 1.0).unwrap()),
        ]);
        assert!(commutation_residual(&comp, -2.0, &probes, &w).unwrap() <= 1e-10);

        let c = wt("constant", &[]);
        let f = vec![bump(g, 0.0, 2.0)];
        let r = commutation_residual(&PositionMultiplier, 1.0, &f, &c).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn mollifier_examples() {
        let g = Grid::new(8.0, 1.0 / 128.0).unwrap();
        let psi = Kernel::triangle(g, 1.0).unwrap();
        let phi = mollifier_sequence(&psi, 16).unwrap();
        assert!((phi.mass() - psi.mass()).norm() < 1e-9);

        let delta = Kernel::delta(g);
        let phi = mollifier_sequence(&delta, 8).unwrap();
        let j8 = mollifier(g, 8).unwrap();
        assert!(max_diff(phi.function(), j8.function()) < 1e-9);

        let coarse = Grid::new(8.0, 1.0 / 16.0).unwrap();
        assert!(matches!(
            mollifier(coarse, 32),
            Err(Error::MollifierUnresolved { .. })
        ));
    }

    #[test]
    fn neumann_term_counts() {
        let an = analyze_strip(&wt("constant", &[]), 16).unwrap();
        let (n, b) = neumann_terms(&an.forward.sequence, ResolventBranch::Outer, 2.0, 1e-10).unwrap();
        assert_eq!(n, 34);
        assert!(b <= 1e-10);
        assert!(neumann_terms(&an.forward.sequence, ResolventBranch::Outer, 1.0, 1e-10).is_none());
    }

    #[test]
    fn resolvent_examples() {
        let g = Grid::new(64.0, 1.0 / 16.0).unwrap();
        let f = bump(g, -20.0, 2.0);
        let c = wt("constant", &[]);
        let r = resolvent_neumann(&c, Complex::new(2f64.ln(), 0.0), &f, 1e-10).unwrap();
        assert_eq!(r.branch, ResolventBranch::Outer);
        assert!(r.residual <= 1e-9, "{}", r.residual);

        assert!(matches!(
            resolvent_neumann(&c, Complex::new(0.0, 0.0), &f, 1e-10),
            Err(Error::InsideSpectrum { .. })
        ));

        let f = bump(g, 20.0, 2.0);
        let e = wt("exp_linear", &[]);
        let r = resolvent_neumann(&e, Complex::new(0.0, 0.0), &f, 1e-10).unwrap();
        assert_eq!(r.branch, ResolventBranch::Inner);
        assert!(r.residual <= 1e-9);
        assert!(r.terms < 40);
    }

    #[test]
    fn resolvent_op_inverts_shift_minus_z() {
        let g = Grid::new(64.0, 1.0 / 16.0).unwrap();
        let an = analyze_strip(&wt("constant", &[]), 16).unwrap();
        let op = ResolventOp::new(&an, Complex::new(0.0, 2.0), 1e-12).unwrap();
        let m = MultiplierOp::Resolvent(op);
        let f = bump(g, -10.0, 2.0);
        let tf = m.apply(&f).unwrap();
        let back = translate(&tf, 1.0)
            .unwrap()
            .exact()
            .unwrap()
            .axpy(Complex::new(0.0, -2.0), &tf)
            .unwrap();
        assert!(max_diff(&back, &f) < 1e-11);
    }
}
