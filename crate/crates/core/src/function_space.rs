//! Uniform-grid discretisation of `L^2_w(R)`.
//!
//! Grids are symmetric, `x_j = -L + j h`, with `1/h` and `L/h` integers so
//! that `x = 0` is a sample and integer translations are exact index shifts.

use std::io::{BufRead, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cexp, cis, lit, Real};
use crate::weights::{Interval, Weight};

/// Relative (unweighted) norm of samples pushed off the grid above which a
/// translation or convolution is considered truncated.
pub const TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Grid<T: Real> {
    half_width: T,
    step: T,
    count: usize,
    per_unit: usize,
    half_count: usize,
}

impl<T: Real> Default for Grid<T> {
    /// `L = 256`, `h = 1/16`, 8193 points.
    fn default() -> Self {
        Self::new(lit(256.0), lit(1.0 / 16.0)).expect("default grid is valid")
    }
}

impl<T: Real> Grid<T> {
    pub fn new(half_width: T, step: T) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step h = {step} must be > 0")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half width L = {half_width} must be > 0"
            )));
        }
        let inv = T::one() / step;
        let per_unit = inv.round();
        if (per_unit - inv).abs() > lit::<T>(1e-9) * inv || per_unit < T::one() {
            return Err(Error::InvalidGrid(format!(
                "1/h = {inv} must be an integer so integer shifts are exact"
            )));
        }
        let hc = half_width * per_unit;
        let half_count = hc.round();
        if (half_count - hc).abs() > lit::<T>(1e-6) {
            return Err(Error::InvalidGrid(format!(
                "L/h = {hc} must be an integer"
            )));
        }
        let per_unit = per_unit.to_usize().expect("positive");
        let half_count = half_count.to_usize().expect("positive");
        Ok(Self {
            half_width: T::from_usize_lossy(half_count) / T::from_usize_lossy(per_unit),
            step: T::one() / T::from_usize_lossy(per_unit),
            count: 2 * half_count + 1,
            per_unit,
            half_count,
        })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn step(&self) -> T {
        self.step
    }

    /// Number of samples `N = 2L/h + 1`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Samples per unit length, `1/h`.
    pub fn per_unit(&self) -> usize {
        self.per_unit
    }

    /// Index of `x = 0`.
    pub fn center(&self) -> usize {
        self.half_count
    }

    #[inline]
    pub fn x(&self, j: usize) -> T {
        T::from_isize_lossy(j as isize - self.half_count as isize)
            / T::from_usize_lossy(self.per_unit)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(move |j| self.x(j))
    }

    /// Trapezoid quadrature weight of sample `j`.
    #[inline]
    pub fn quad_weight(&self, j: usize) -> T {
        if j == 0 || j + 1 == self.count {
            self.step / lit(2.0)
        } else {
            self.step
        }
    }

    /// Exact grid index of `x`, if `x` is a sample.
    pub fn index_of(&self, x: T) -> Option<usize> {
        let r = x * T::from_usize_lossy(self.per_unit) + T::from_usize_lossy(self.half_count);
        let k = r.round();
        if (r - k).abs() > lit::<T>(1e-9) * r.abs().max(T::one()) {
            return None;
        }
        let k = k.to_isize()?;
        (0..self.count as isize).contains(&k).then_some(k as usize)
    }

    /// First index with `x_j >= x` (clamped to the grid).
    pub fn ceil_index(&self, x: T) -> usize {
        let r = (x * T::from_usize_lossy(self.per_unit) + T::from_usize_lossy(self.half_count)
            - lit(1e-9))
        .ceil();
        r.max(T::zero()).to_usize().unwrap_or(0).min(self.count - 1)
    }

    /// Last index with `x_j <= x` (clamped to the grid).
    pub fn floor_index(&self, x: T) -> usize {
        let r = (x * T::from_usize_lossy(self.per_unit) + T::from_usize_lossy(self.half_count)
            + lit(1e-9))
        .floor();
        r.max(T::zero()).to_usize().unwrap_or(0).min(self.count - 1)
    }

    /// Number of grid steps in a shift by `t`; errors for off-grid shifts.
    pub fn steps(&self, t: T) -> Result<isize> {
        let r = t * T::from_usize_lossy(self.per_unit);
        let k = r.round();
        if (r - k).abs() > lit::<T>(1e-9) * r.abs().max(T::one()) {
            return Err(Error::OffGridShift(t.as_f64()));
        }
        k.to_isize().ok_or(Error::OffGridShift(t.as_f64()))
    }

    pub fn interval(&self) -> Interval<T> {
        Interval::symmetric(self.half_width)
    }

    pub fn contains_interval(&self, iv: &Interval<T>) -> bool {
        let eps = self.step * lit(1e-9);
        iv.lo >= -self.half_width - eps && iv.hi <= self.half_width + eps
    }

    /// Same step and same half width.
    pub fn same_as(&self, other: &Self) -> bool {
        self.per_unit == other.per_unit && self.half_count == other.half_count
    }
}

/// Complex samples of a function on a [`Grid`], optionally tagged with a
/// compact support outside of which every sample is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction<T: Real> {
    grid: Grid<T>,
    values: Vec<Complex<T>>,
    support: Option<Interval<T>>,
}

impl<T: Real> SampledFunction<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            grid,
            values: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            support: None,
        }
    }

    /// Wraps raw samples. Samples outside `support` are cleared.
    pub fn from_values(
        grid: Grid<T>,
        mut values: Vec<Complex<T>>,
        support: Option<Interval<T>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(s) = support {
            check_support(&grid, &s)?;
            for (j, v) in values.iter_mut().enumerate() {
                if !s.contains(grid.x(j)) {
                    *v = Complex::new(T::zero(), T::zero());
                }
            }
        }
        Ok(Self {
            grid,
            values,
            support,
        })
    }

    /// Evaluates `f` at every sample inside `support` (or everywhere).
    pub fn from_fn<F>(grid: Grid<T>, support: Option<Interval<T>>, f: F) -> Result<Self>
    where
        F: Fn(T) -> Complex<T>,
    {
        let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        let range = match support {
            Some(s) => {
                check_support(&grid, &s)?;
                grid.ceil_index(s.lo)..grid.floor_index(s.hi) + 1
            }
            None => 0..grid.len(),
        };
        for j in range {
            let x = grid.x(j);
            if support.is_none_or(|s| s.contains(x)) {
                values[j] = f(x);
            }
        }
        Ok(Self {
            grid,
            values,
            support,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn support(&self) -> Option<Interval<T>> {
        self.support
    }

    pub fn with_support(mut self, support: Option<Interval<T>>) -> Result<Self> {
        if let Some(s) = support {
            check_support(&self.grid, &s)?;
            for j in 0..self.values.len() {
                if !s.contains(self.grid.x(j)) {
                    self.values[j] = Complex::new(T::zero(), T::zero());
                }
            }
        }
        self.support = support;
        Ok(self)
    }

    /// Indices of the first and last non-zero sample.
    pub fn nonzero_range(&self) -> Option<(usize, usize)> {
        let zero = Complex::new(T::zero(), T::zero());
        let first = self.values.iter().position(|v| *v != zero)?;
        let last = self.values.iter().rposition(|v| *v != zero)?;
        Some((first, last))
    }

    /// Declared support, or the hull of the non-zero samples.
    pub fn effective_support(&self) -> Option<Interval<T>> {
        self.support.or_else(|| {
            self.nonzero_range()
                .map(|(a, b)| Interval::new(self.grid.x(a), self.grid.x(b)))
        })
    }

    /// Trapezoid integral of the samples.
    pub fn integral(&self) -> Complex<T> {
        self.values
            .iter()
            .enumerate()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (j, v)| {
                acc + *v * self.grid.quad_weight(j)
            })
    }

    /// Unweighted discrete `L^2` norm.
    pub fn l2_norm(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v.norm_sqr() * self.grid.quad_weight(j))
            .sum::<T>()
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| *v * c).collect(),
            support: self.support,
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex<T>, other: &Self) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a + *b * c)
            .collect();
        let support = match (self.support, other.support) {
            (Some(a), Some(b)) => Some(Interval::new(a.lo.min(b.lo), a.hi.max(b.hi))),
            _ => None,
        };
        Ok(Self {
            grid: self.grid,
            values,
            support,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex::new(-T::one(), T::zero()), other)
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }
}

fn check_support<T: Real>(grid: &Grid<T>, s: &Interval<T>) -> Result<()> {
    if !(s.lo <= s.hi) {
        return Err(Error::InvalidArgument(format!(
            "empty support [{}, {}]",
            s.lo, s.hi
        )));
    }
    if !grid.contains_interval(s) {
        return Err(Error::SupportOutsideGrid(format!(
            "[{}, {}] not inside [-{}, {}]",
            s.lo,
            s.hi,
            grid.half_width(),
            grid.half_width()
        )));
    }
    Ok(())
}

/// `ln ||f||_w`, computed with a running maximum so that neither `|f|` nor
/// `w` has to be representable squared. Returns `-inf` for `f = 0`.
pub fn log_weighted_norm<T: Real>(f: &SampledFunction<T>, w: &Weight<T>) -> T {
    let g = f.grid();
    let mut terms: Vec<T> = Vec::new();
    let mut peak = T::neg_infinity();
    for (j, v) in f.values().iter().enumerate() {
        let m = v.norm();
        if m == T::zero() {
            continue;
        }
        let e = lit::<T>(2.0) * (m.ln() + w.log_weight(g.x(j))) + g.quad_weight(j).ln();
        peak = peak.max(e);
        terms.push(e);
    }
    if terms.is_empty() {
        return T::neg_infinity();
    }
    let s: T = terms.iter().map(|&e| (e - peak).exp()).sum();
    (peak + s.ln()) / lit(2.0)
}

/// `(∫ |f|^2 w^2 dx)^{1/2}` by the composite trapezoid rule.
pub fn weighted_norm<T: Real>(f: &SampledFunction<T>, w: &Weight<T>) -> T {
    log_weighted_norm(f, w).exp()
}

/// `∫ f conj(g) w^2 dx` by the trapezoid rule.
pub fn weighted_inner<T: Real>(
    f: &SampledFunction<T>,
    g: &SampledFunction<T>,
    w: &Weight<T>,
) -> Result<Complex<T>> {
    if !f.grid().same_as(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    let mut acc = Complex::new(T::zero(), T::zero());
    for (j, (a, b)) in f.values().iter().zip(g.values()).enumerate() {
        let p = *a * b.conj();
        if p.re == T::zero() && p.im == T::zero() {
            continue;
        }
        let ww = (lit::<T>(2.0) * w.log_weight(grid.x(j))).exp() * grid.quad_weight(j);
        acc = acc + p * ww;
    }
    Ok(acc)
}

/// Result of an exact translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation<T: Real> {
    pub function: SampledFunction<T>,
    /// Unweighted norm of the samples pushed off the grid, relative to `||f||`.
    pub lost_fraction: T,
}

impl<T: Real> Translation<T> {
    pub fn is_truncated(&self) -> bool {
        self.lost_fraction > lit(TRUNCATION_TOL)
    }

    /// The translated function, or a truncation error.
    pub fn exact(self) -> Result<SampledFunction<T>> {
        if self.is_truncated() {
            Err(Error::Truncation(format!(
                "translation dropped {:e} of the norm off the grid",
                self.lost_fraction.as_f64()
            )))
        } else {
            Ok(self.function)
        }
    }
}

/// `(S_t f)(x) = f(x - t)` for a shift `t` that is a multiple of the step.
pub fn translate<T: Real>(f: &SampledFunction<T>, t: T) -> Result<Translation<T>> {
    let grid = *f.grid();
    let k = grid.steps(t)?;
    Ok(shift_samples(f, k))
}

/// Exact index shift by `k` samples with zero fill.
pub fn shift_samples<T: Real>(f: &SampledFunction<T>, k: isize) -> Translation<T> {
    let grid = *f.grid();
    let n = grid.len() as isize;
    let zero = Complex::new(T::zero(), T::zero());
    let mut values = vec![zero; grid.len()];
    let mut lost = T::zero();
    let mut total = T::zero();
    match f.nonzero_range() {
        None => {}
        Some((a, b)) => {
            for j in a..=b {
                let v = f.values()[j];
                let m2 = v.norm_sqr() * grid.quad_weight(j);
                total = total + m2;
                let dst = j as isize + k;
                if (0..n).contains(&dst) {
                    values[dst as usize] = v;
                } else {
                    lost = lost + m2;
                }
            }
        }
    }
    let t = T::from_isize_lossy(k) / T::from_usize_lossy(grid.per_unit());
    let support = f.support().and_then(|s| {
        let lo = (s.lo + t).max(-grid.half_width());
        let hi = (s.hi + t).min(grid.half_width());
        (lo <= hi).then(|| Interval::new(lo, hi))
    });
    let lost_fraction = if total > T::zero() {
        (lost / total).sqrt()
    } else {
        T::zero()
    };
    Translation {
        function: SampledFunction {
            grid,
            values,
            support,
        },
        lost_fraction,
    }
}

/// Off-grid translation by linear interpolation. Only meant for diagnostics:
/// it does not commute exactly with convolution.
pub fn translate_interp<T: Real>(f: &SampledFunction<T>, t: T) -> SampledFunction<T> {
    let grid = *f.grid();
    let zero = Complex::new(T::zero(), T::zero());
    let r = t * T::from_usize_lossy(grid.per_unit());
    let whole = r.floor();
    let frac = r - whole;
    let k = whole.to_isize().unwrap_or(0);
    let n = grid.len() as isize;
    let at = |i: isize| -> Complex<T> {
        if (0..n).contains(&i) {
            f.values()[i as usize]
        } else {
            zero
        }
    };
    let values = (0..n)
        .map(|j| at(j - k) * (T::one() - frac) + at(j - k - 1) * frac)
        .collect();
    let support = f.support().and_then(|s| {
        let lo = (s.lo + t - grid.step()).max(-grid.half_width());
        let hi = (s.hi + t + grid.step()).min(grid.half_width());
        (lo <= hi).then(|| Interval::new(lo, hi))
    });
    SampledFunction {
        grid,
        values,
        support,
    }
}

/// `(T_alpha f)(x) = f(x) e^{i alpha x}`.
pub fn modulate<T: Real>(f: &SampledFunction<T>, alpha: T) -> SampledFunction<T> {
    let grid = *f.grid();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            if v.re == T::zero() && v.im == T::zero() {
                *v
            } else {
                *v * cis(alpha * grid.x(j))
            }
        })
        .collect();
    SampledFunction {
        grid,
        values,
        support: f.support(),
    }
}

/// `(f)_a(x) = f(x) e^{a x}`.
pub fn scale_exp<T: Real>(f: &SampledFunction<T>, a: T) -> Result<SampledFunction<T>> {
    let grid = *f.grid();
    check_exp_range(a, grid.half_width())?;
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| *v * (a * grid.x(j)).exp())
        .collect();
    Ok(SampledFunction {
        grid,
        values,
        support: f.support(),
    })
}

pub(crate) fn check_exp_range<T: Real>(a: T, half_width: T) -> Result<()> {
    if a.abs() * half_width >= T::max_exp_arg() {
        return Err(Error::ScalingOverflow {
            a: a.as_f64(),
            half_width: half_width.as_f64(),
        });
    }
    Ok(())
}

/// Compactly supported test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum TestFunction<T: Real> {
    /// Raised-cosine bump `(1 + cos(2 pi (x - c) / width)) / 2` on
    /// `[c - width/2, c + width/2]`.
    Bump { center: T, width: T },
    /// `exp(-(x - c)^2 / (2 sigma^2))`, cut at `6 sigma`.
    GaussianTruncated { center: T, sigma: T },
    /// `exp((a + i b) x)` on `[-L0, L0]` with raised-cosine edges of width
    /// `taper`; `taper = 0` gives a sharp window.
    PlaneWaveWindow { a: T, b: T, half_length: T, taper: T },
    /// Indicator of `[lo, hi]`; end samples on a jump take the value 1/2.
    Indicator { lo: T, hi: T },
}

impl<T: Real> TestFunction<T> {
    pub fn bump(center: T, width: T) -> Self {
        TestFunction::Bump { center, width }
    }

    pub fn support(&self) -> Interval<T> {
        match *self {
            TestFunction::Bump { center, width } => {
                Interval::new(center - width / lit(2.0), center + width / lit(2.0))
            }
            TestFunction::GaussianTruncated { center, sigma } => {
                Interval::new(center - sigma * lit(6.0), center + sigma * lit(6.0))
            }
            TestFunction::PlaneWaveWindow { half_length, .. } => Interval::symmetric(half_length),
            TestFunction::Indicator { lo, hi } => Interval::new(lo, hi),
        }
    }
}

/// Raised-cosine ramp from 0 (at `s = 0`) to 1 (at `s = 1`).
#[inline]
fn ramp<T: Real>(s: T) -> T {
    (T::one() - (T::PI() * s).cos()) / lit(2.0)
}

pub fn make_test_function<T: Real>(grid: Grid<T>, kind: TestFunction<T>) -> Result<SampledFunction<T>> {
    let support = kind.support();
    let zero = T::zero();
    match kind {
        TestFunction::Bump { center, width } => {
            if !(width > zero) {
                return Err(Error::InvalidArgument(format!("bump width {width} must be > 0")));
            }
            SampledFunction::from_fn(grid, Some(support), |x| {
                let u = lit::<T>(2.0) * T::PI() * (x - center) / width;
                Complex::new((T::one() + u.cos()) / lit(2.0), zero)
            })
        }
        TestFunction::GaussianTruncated { center, sigma } => {
            if !(sigma > zero) {
                return Err(Error::InvalidArgument(format!("sigma {sigma} must be > 0")));
            }
            SampledFunction::from_fn(grid, Some(support), |x| {
                let u = (x - center) / sigma;
                Complex::new((-u * u / lit(2.0)).exp(), zero)
            })
        }
        TestFunction::PlaneWaveWindow {
            a,
            b,
            half_length,
            taper,
        } => {
            if !(half_length > zero) || taper < zero || taper > half_length {
                return Err(Error::InvalidArgument(format!(
                    "window half length {half_length} and taper {taper} are inconsistent"
                )));
            }
            check_exp_range(a, half_length)?;
            SampledFunction::from_fn(grid, Some(support), |x| {
                let edge = half_length - x.abs();
                let env = if taper == zero || edge >= taper {
                    T::one()
                } else {
                    ramp(edge / taper)
                };
                cexp(Complex::new(a, b) * x) * env
            })
        }
        TestFunction::Indicator { lo, hi } => {
            SampledFunction::from_fn(grid, Some(support), |x| {
                let v = if x == lo || x == hi { lit(0.5) } else { T::one() };
                Complex::new(v, zero)
            })
        }
    }
}

/// Writes `# L=<L> h=<h>` followed by `x,re,im` rows.
pub fn write_csv<T: Real, W: Write>(f: &SampledFunction<T>, mut out: W) -> Result<()> {
    let g = f.grid();
    writeln!(out, "# L={} h={}", g.half_width(), g.step())?;
    writeln!(out, "x,re,im")?;
    for (j, v) in f.values().iter().enumerate() {
        writeln!(out, "{},{},{}", g.x(j), v.re, v.im)?;
    }
    Ok(())
}

/// Reads the format produced by [`write_csv`]. The support is recovered as
/// the hull of the non-zero samples.
pub fn read_csv<T: Real, R: BufRead>(mut input: R) -> Result<SampledFunction<T>> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let header = header.trim();
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `# L=<L> h=<h>` header".into()))?;
    let mut half = None;
    let mut step = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("L=") {
            half = v.parse::<f64>().ok();
        } else if let Some(v) = tok.strip_prefix("h=") {
            step = v.parse::<f64>().ok();
        }
    }
    let (half, step) = match (half, step) {
        (Some(l), Some(h)) => (l, h),
        _ => return Err(Error::Parse(format!("bad grid header `{header}`"))),
    };
    let grid = Grid::new(T::lit(half), T::lit(step))?;
    let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!("row {} must have 3 columns", row + 1)));
        }
        let nums: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|s| s.parse::<f64>()).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
        };
        let j = grid
            .index_of(T::lit(nums[0]))
            .ok_or_else(|| Error::Parse(format!("x = {} is not a grid point", nums[0])))?;
        values[j] = Complex::new(T::lit(nums[1]), T::lit(nums[2]));
    }
    let f = SampledFunction::from_values(grid, values, None)?;
    let support = f.effective_support();
    f.with_support(support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::make_builtin_weight;

    fn constant() -> Weight<f64> {
        make_builtin_weight("constant", &[]).unwrap()
    }

    fn indicator(g: Grid<f64>, lo: f64, hi: f64) -> SampledFunction<f64> {
        make_test_function(g, TestFunction::Indicator { lo, hi }).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = Grid::<f64>::default();
        assert_eq!(g.len(), 8193);
        assert_eq!(g.x(0), -256.0);
        assert_eq!(g.x(g.center()), 0.0);
        assert_eq!(g.x(8192), 256.0);
        assert_eq!(g.index_of(1.0), Some(g.center() + 16));
        assert_eq!(g.index_of(0.03), None);
        assert_eq!(g.steps(-2.0).unwrap(), -32);
        assert!(matches!(g.steps(0.01), Err(Error::OffGridShift(_))));
    }

    #[test]
    fn grid_rejects_non_integer_steps() {
        assert!(Grid::<f64>::new(10.0, 0.3).is_err());
        assert!(Grid::<f64>::new(10.05, 0.1).is_err());
        assert!(Grid::<f64>::new(-1.0, 0.5).is_err());
        assert!(Grid::<f64>::new(10.0, 0.01).is_ok());
    }

    #[test]
    fn norm_examples() {
        let g = Grid::new(4.0, 0.01).unwrap();
        let chi = indicator(g, -1.0, 1.0);
        assert!((weighted_norm(&chi, &constant()) - 2f64.sqrt()).abs() < 1e-2);
        assert_eq!(weighted_norm(&SampledFunction::zeros(g), &constant()), 0.0);

        let g = Grid::new(16.0, 0.01).unwrap();
        let f = SampledFunction::from_fn(g, Some(Interval::new(0.0, 10.0)), |x: f64| {
            Complex::new((-x).exp(), 0.0)
        })
        .unwrap();
        let w = make_builtin_weight("exp_linear", &[]).unwrap();
        assert!((weighted_norm(&f, &w) - 10f64.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn log_norm_survives_huge_weights() {
        let g = Grid::new(512.0, 0.5).unwrap();
        let w = make_builtin_weight("exp_linear", &[]).unwrap();
        let f = indicator(g, 400.0, 500.0);
        let ln = log_weighted_norm(&f, &w);
        assert!(ln.is_finite() && ln > 499.0 && ln < 501.0);
    }

    #[test]
    fn translate_examples() {
        let g = Grid::new(8.0, 0.25).unwrap();
        let f = make_test_function(g, TestFunction::bump(0.0, 1.0)).unwrap();
        let moved = translate(&f, 1.0).unwrap().exact().unwrap();
        let expect = make_test_function(g, TestFunction::bump(1.0, 1.0)).unwrap();
        for (a, b) in moved.values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(translate(&f, 0.0).unwrap().function, f);

        let chi = indicator(g, -1.0, 1.0);
        let moved = translate(&chi, 0.5).unwrap().exact().unwrap();
        let direct = indicator(g, -0.5, 1.5);
        assert_eq!(moved.values(), direct.values());
        assert_eq!(moved.support(), Some(Interval::new(-0.5, 1.5)));

        assert!(matches!(translate(&chi, 0.1), Err(Error::OffGridShift(_))));
    }

    #[test]
    fn translation_off_the_grid_is_flagged() {
        let g = Grid::new(4.0, 0.25).unwrap();
        let f = indicator(g, 2.0, 3.0);
        let tr = translate(&f, 2.0).unwrap();
        assert!(tr.is_truncated());
        assert!(tr.exact().is_err());
        assert!(!translate(&f, 1.0).unwrap().is_truncated());
    }

    #[test]
    fn interpolated_translation_matches_exact_on_grid_multiples() {
        let g = Grid::new(8.0, 0.25).unwrap();
        let f = make_test_function(g, TestFunction::bump(0.0, 2.0)).unwrap();
        let a = translate_interp(&f, 1.0);
        let b = translate(&f, 1.0).unwrap().function;
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).norm() < 1e-15);
        }
        let half = translate_interp(&f, 0.125);
        let j = g.index_of(0.0).unwrap();
        let expect = (f.values()[j] + f.values()[j - 1]) / 2.0;
        assert!((half.values()[j] - expect).norm() < 1e-15);
    }

    #[test]
    fn modulate_examples() {
        let g = Grid::new(8.0, 0.125).unwrap();
        let f = make_test_function(g, TestFunction::bump(0.5, 2.0)).unwrap();
        assert_eq!(modulate(&f, 0.0), f);
        let m = modulate(&f, std::f64::consts::PI);
        let (n0, n1) = (weighted_norm(&f, &constant()), weighted_norm(&m, &constant()));
        assert!((n0 - n1).abs() <= 1e-15 * n0);

        let chi = indicator(g, 0.0, 1.0);
        let m = modulate(&chi, 2.0 * std::f64::consts::PI);
        for j in 0..g.len() {
            let x = g.x(j);
            let phase = 2.0 * std::f64::consts::PI * x;
            let expect = chi.values()[j] * Complex::new(phase.cos(), phase.sin());
            assert!((m.values()[j] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn scale_exp_examples() {
        let g = Grid::new(8.0, 0.125).unwrap();
        let f = make_test_function(g, TestFunction::bump(0.0, 2.0)).unwrap();
        assert_eq!(scale_exp(&f, 0.0).unwrap(), f);
        let chi = indicator(g, 0.0, 1.0);
        let s = scale_exp(&chi, 1.0).unwrap();
        for j in 0..g.len() {
            let x = g.x(j);
            let e = chi.values()[j].re * x.exp();
            assert!((s.values()[j].re - e).abs() < 1e-14);
        }
        // ||(f)_1||_{L^2} equals ||f|| under the weight e^x
        let f = make_test_function(g, TestFunction::bump(0.3, 3.0)).unwrap();
        let lhs = weighted_norm(&scale_exp(&f, 1.0).unwrap(), &constant());
        let rhs = weighted_norm(&f, &make_builtin_weight("exp_linear", &[]).unwrap());
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
        assert!(matches!(scale_exp(&f, 1e4), Err(Error::ScalingOverflow { .. })));
    }

    #[test]
    fn test_function_examples() {
        let g = Grid::<f64>::default();
        let b = make_test_function(g, TestFunction::bump(0.0, 2.0)).unwrap();
        assert!(b.integral().re > 0.0);
        assert_eq!(b.support(), Some(Interval::new(-1.0, 1.0)));

        let w = make_test_function(
            g,
            TestFunction::PlaneWaveWindow { a: 0.0, b: 0.0, half_length: 100.0, taper: 1.0 },
        )
        .unwrap();
        assert_eq!(w.values()[g.index_of(50.0).unwrap()], Complex::new(1.0, 0.0));
        assert!(w.values()[g.index_of(-99.5).unwrap()].re < 1.0);
        assert_eq!(w.values()[g.index_of(100.5).unwrap()], Complex::new(0.0, 0.0));

        let gs = make_test_function(g, TestFunction::GaussianTruncated { center: 0.0, sigma: 1.0 })
            .unwrap();
        let n2 = weighted_norm(&gs, &constant()).powi(2);
        assert!((n2 - std::f64::consts::PI.sqrt()).abs() < 1e-6);

        assert!(matches!(
            make_test_function(g, TestFunction::bump(255.5, 2.0)),
            Err(Error::SupportOutsideGrid(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(4.0, 0.25).unwrap();
        let f = modulate(&make_test_function(g, TestFunction::bump(0.5, 2.0)).unwrap(), 1.3);
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# L=4 h=0.25\n"));
        let back: SampledFunction<f64> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
        assert!(read_csv::<f64, _>("x,re,im\n".as_bytes()).is_err());
    }

    #[test]
    fn single_precision_grid_and_norm() {
        let g = Grid::<f32>::new(8.0, 0.125).unwrap();
        let f = make_test_function(g, TestFunction::Indicator { lo: -1.0, hi: 1.0 }).unwrap();
        let w = make_builtin_weight::<f32>("constant", &[]).unwrap();
        assert!((weighted_norm(&f, &w) - 2.0f32.sqrt()).abs() < 0.1);
    }
}
