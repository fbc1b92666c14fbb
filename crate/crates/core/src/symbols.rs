//! Fourier transforms along horizontal lines `Im z = a`, symbol extraction
//! for grid operators, and checks of the symbol calculus.
//!
//! Convention: `f^(t) = ∫ f(x) e^{-itx} dx` with no `2 pi` factor. On the line
//! `a` the transform is applied to `f(x) e^{ax}`, so `S` has symbol
//! `e^{a - it} = e^{-iz}` at `z = t + ia`.

use std::io::Write;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{
    check_exp_range, make_test_function, modulate, Grid, SampledFunction, TestFunction,
};
use crate::multipliers::{operator_norm_window, GridOperator, Kernel, MultiplierOp, DEFAULT_REL_TOL};
use crate::scalar::{cexp, cis, lit, simpson, Real};
use crate::shift_analysis::Strip;
use crate::weights::Weight;

pub const DEFAULT_FLOOR: f64 = 1e-8;
pub const DEFAULT_T_COUNT: usize = 2048;
/// Probe ratios agreeing to this relative spread are accepted.
pub const SPREAD_TOL: f64 = 1e-6;
const CROSS_CHECK_TOL: f64 = 1e-9;
const CROSS_CHECK_SAMPLES: usize = 4;

/// `count` uniform points on `[-8 pi, 8 pi]`.
pub fn default_t_grid<T: Real>(count: usize) -> Vec<T> {
    uniform_grid(-lit::<T>(8.0) * T::PI(), lit::<T>(8.0) * T::PI(), count)
}

pub fn uniform_grid<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let d = (hi - lo) / T::from_usize_lossy(count - 1);
            (0..count).map(|k| lo + d * T::from_usize_lossy(k)).collect()
        }
    }
}

/// Samples `g_j = w_j f_j e^{a x_j}` over the non-zero range, with
/// trapezoid weights `w_j`. Both transform paths and `kernel_symbol` use it.
fn weighted_samples<T: Real>(f: &SampledFunction<T>, a: T) -> Option<(usize, Vec<Complex<T>>)> {
    let g = f.grid();
    let (lo, hi) = f.nonzero_range()?;
    let vals = (lo..=hi)
        .map(|j| {
            let x = g.x(j);
            f.values()[j] * (g.quad_weight(j) * (a * x).exp())
        })
        .collect();
    Some((lo, vals))
}

fn direct_sum<T: Real>(grid: &Grid<T>, start: usize, g: &[Complex<T>], t: T) -> Complex<T> {
    g.iter()
        .enumerate()
        .fold(Complex::new(T::zero(), T::zero()), |acc, (m, v)| {
            acc + *v * cis(-t * grid.x(start + m))
        })
}

fn uniform_step<T: Real>(t: &[T]) -> Option<T> {
    if t.len() < 2 {
        return None;
    }
    let d = (t[t.len() - 1] - t[0]) / T::from_usize_lossy(t.len() - 1);
    if !(d > T::zero()) {
        return None;
    }
    let scale = t[0].abs().max(t[t.len() - 1].abs()).max(d);
    t.iter()
        .enumerate()
        .all(|(k, &v)| (v - (t[0] + d * T::from_usize_lossy(k))).abs() <= lit::<T>(1e-12) * scale)
        .then_some(d)
}

/// Bluestein evaluation of `F_k = sum_m g_m e^{-i t_k x_m}` for uniform
/// `t_k = t0 + k dt` and `x_m = x_s + m h`.
fn chirp_z<T: Real>(x_start: T, h: T, g: &[Complex<T>], t0: T, dt: T, count: usize) -> Vec<Complex<T>> {
    let m_len = g.len();
    let theta = dt * h;
    let half = lit::<T>(0.5);
    // (theta n^2 / 2) reduced mod 2 pi with n^2 taken exactly in integers
    let chirp = |n: i64| -> Complex<T> {
        let n2 = (n * n) as f64;
        cis(theta * half * T::lit(n2))
    };
    let len = (m_len + count - 1).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut a = vec![Complex::new(T::zero(), T::zero()); len];
    for (m, v) in g.iter().enumerate() {
        a[m] = *v * cis(-t0 * h * T::from_usize_lossy(m)) * chirp(m as i64).conj();
    }
    let mut b = vec![Complex::new(T::zero(), T::zero()); len];
    for n in 0..count {
        b[n] = chirp(n as i64);
    }
    for n in 1..m_len {
        b[len - n] = chirp(n as i64);
    }
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x = *x * *y;
    }
    inv.process(&mut a);
    let s = T::one() / T::from_usize_lossy(len);
    (0..count)
        .map(|k| {
            let tk = t0 + dt * T::from_usize_lossy(k);
            a[k] * s * chirp(k as i64).conj() * cis(-tk * x_start)
        })
        .collect()
}

/// `∫ f(x) e^{ax} e^{-itx} dx` on `t_grid` by the trapezoid rule.
///
/// Uniform `t` grids go through a chirp-z transform, cross-checked against
/// direct quadrature at a few seeded random frequencies.
pub fn weighted_ft<T: Real>(f: &SampledFunction<T>, a: T, t_grid: &[T]) -> Result<Vec<Complex<T>>> {
    let grid = *f.grid();
    check_exp_range(a, grid.half_width())?;
    let Some((start, g)) = weighted_samples(f, a) else {
        return Ok(vec![Complex::new(T::zero(), T::zero()); t_grid.len()]);
    };
    let Some(dt) = uniform_step(t_grid).filter(|_| t_grid.len() >= 16) else {
        return Ok(t_grid
            .iter()
            .map(|&t| direct_sum(&grid, start, &g, t))
            .collect());
    };
    let out = chirp_z(grid.x(start), grid.step(), &g, t_grid[0], dt, t_grid.len());
    let peak = out.iter().map(|v| v.norm()).fold(T::zero(), T::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0xf7_c4ec);
    for _ in 0..CROSS_CHECK_SAMPLES {
        let k = rng.random_range(0..t_grid.len());
        let d = direct_sum(&grid, start, &g, t_grid[k]);
        let dev = (d - out[k]).norm();
        if dev > lit::<T>(CROSS_CHECK_TOL) * peak.max(T::min_positive_value()) {
            return Err(Error::CrossCheck {
                deviation: (dev / peak).as_f64(),
            });
        }
    }
    Ok(out)
}

/// `∫ phi(x) e^{-izx} dx` for complex `z`, by the same quadrature as
/// [`weighted_ft`] with `a = Im z`.
pub fn kernel_symbol<T: Real>(phi: &Kernel<T>, z: Complex<T>) -> Complex<T> {
    let f = phi.function();
    match weighted_samples(f, z.im) {
        Some((start, g)) => direct_sum(f.grid(), start, &g, z.re),
        None => Complex::new(T::zero(), T::zero()),
    }
}

/// `1 / (e^{-iz} - e^alpha)` at `z = t + ia`.
pub fn resolvent_symbol<T: Real>(alpha: Complex<T>, z: Complex<T>) -> Result<Complex<T>> {
    let s = cexp(Complex::new(z.im, -z.re));
    let e = cexp(alpha);
    let d = s - e;
    if d.norm() <= lit::<T>(1e-14) * e.norm().max(T::one()) {
        return Err(Error::SymbolPole {
            a: z.im.as_f64(),
            t: z.re.as_f64(),
        });
    }
    Ok(d.inv())
}

/// Sampled `mu_(a)(t)` on one horizontal line.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolLine<T: Real> {
    pub a: T,
    pub t_grid: Vec<T>,
    pub values: Vec<Complex<T>>,
    pub mask: Vec<bool>,
    /// Largest relative probe spread over the mask.
    pub max_spread: T,
}

impl<T: Real> SymbolLine<T> {
    pub fn coverage(&self) -> f64 {
        self.mask.iter().filter(|m| **m).count() as f64 / self.mask.len().max(1) as f64
    }

    /// `sup |mu|` over the mask.
    pub fn sup_abs(&self) -> T {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.norm())
            .fold(T::zero(), T::max)
    }

    pub fn record(&self) -> SymbolLineRecord<T> {
        SymbolLineRecord {
            a: self.a,
            t: self.t_grid.clone(),
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
            mask: self.mask.clone(),
        }
    }
}

/// JSON layout of a line: `{a, t[], re[], im[], mask[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SymbolLineRecord<T: Real> {
    pub a: T,
    pub t: Vec<T>,
    pub re: Vec<T>,
    pub im: Vec<T>,
    pub mask: Vec<bool>,
}

fn median<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / lit(2.0)
    }
}

/// `mu_(a)(t)` as the probe median of `F[(Mf)_a] / F[(f)_a]`, keeping only
/// probes with `|F[(f)_a](t)| > floor * max_t |F[(f)_a]|`.
pub fn extract_symbol<T: Real>(
    m: &dyn GridOperator<T>,
    a: T,
    probes: &[SampledFunction<T>],
    t_grid: &[T],
    floor: T,
) -> Result<SymbolLine<T>> {
    let mut num = Vec::with_capacity(probes.len());
    let mut den = Vec::with_capacity(probes.len());
    for f in probes {
        let d = weighted_ft(f, a, t_grid)?;
        let n = weighted_ft(&m.apply(f)?, a, t_grid)?;
        let peak = d.iter().map(|v| v.norm()).fold(T::zero(), T::max);
        num.push(n);
        den.push((d, peak * floor));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let mut mask = Vec::with_capacity(t_grid.len());
    let mut max_spread = T::zero();
    for k in 0..t_grid.len() {
        let ratios: Vec<Complex<T>> = num
            .iter()
            .zip(&den)
            .filter(|(_, (d, cut))| d[k].norm() > *cut && *cut > T::zero())
            .map(|(n, (d, _))| n[k] / d[k])
            .collect();
        if ratios.is_empty() {
            values.push(Complex::new(T::nan(), T::nan()));
            mask.push(false);
            continue;
        }
        let v = Complex::new(
            median(&mut ratios.iter().map(|r| r.re).collect::<Vec<_>>()),
            median(&mut ratios.iter().map(|r| r.im).collect::<Vec<_>>()),
        );
        let spread = ratios.iter().map(|r| (r - v).norm()).fold(T::zero(), T::max)
            / (T::one() + v.norm());
        let ok = spread < lit(SPREAD_TOL) && v.re.is_finite() && v.im.is_finite();
        if ok {
            max_spread = max_spread.max(spread);
        }
        values.push(v);
        mask.push(ok);
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::ProbesDoNotCover);
    }
    Ok(SymbolLine {
        a,
        t_grid: t_grid.to_vec(),
        values,
        mask,
        max_spread,
    })
}

/// Sampled symbol on several lines sharing one `t` grid, `a` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStrip<T: Real> {
    pub lines: Vec<SymbolLine<T>>,
}

impl<T: Real> SymbolStrip<T> {
    pub fn records(&self) -> Vec<SymbolLineRecord<T>> {
        self.lines.iter().map(|l| l.record()).collect()
    }

    pub fn t_grid(&self) -> &[T] {
        &self.lines[0].t_grid
    }

    /// Gnuplot blocks `t a |mu| arg(mu)` over masked samples, one block per line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# t\ta\tabs_mu\targ_mu")?;
        for line in &self.lines {
            for ((t, v), m) in line.t_grid.iter().zip(&line.values).zip(&line.mask) {
                if *m {
                    writeln!(out, "{}\t{}\t{}\t{}", t, line.a, v.norm(), v.arg())?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Chebyshev-Lobatto heights on `[a_min, a_max]`, ascending, endpoints
/// included. A degenerate interval gives the single line `a_min`.
pub fn chebyshev_lines<T: Real>(a_min: T, a_max: T, count: usize) -> Vec<T> {
    if a_max <= a_min || count < 2 {
        return vec![a_min];
    }
    let c = (a_min + a_max) / lit(2.0);
    let r = (a_max - a_min) / lit(2.0);
    (0..count)
        .map(|k| {
            if k == 0 {
                a_min
            } else if k + 1 == count {
                a_max
            } else {
                c - r * (T::PI() * T::from_usize_lossy(k) / T::from_usize_lossy(count - 1)).cos()
            }
        })
        .collect()
}

/// Extracts the symbol on Chebyshev lines across `[a_min, a_max]`.
pub fn extract_strip<T: Real>(
    m: &dyn GridOperator<T>,
    a_min: T,
    a_max: T,
    line_count: usize,
    probes: &[SampledFunction<T>],
    t_grid: &[T],
    floor: T,
) -> Result<SymbolStrip<T>> {
    let lines = chebyshev_lines(a_min, a_max, line_count)
        .into_par_iter()
        .map(|a| extract_symbol(m, a, probes, t_grid, floor))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymbolStrip { lines })
}

/// Compact probes with overlapping frequency content: bumps of unrelated
/// widths, one of them modulated, centred near the origin.
pub fn standard_probes<T: Real>(grid: Grid<T>) -> Result<Vec<SampledFunction<T>>> {
    let specs = [(0.0, 1.0, 0.0), (0.3, 1.7, 0.0), (-0.2, 0.6, 0.0), (0.1, 1.3, 2.5)];
    specs
        .iter()
        .map(|&(c, w, m)| {
            let f = make_test_function(grid, TestFunction::bump(T::lit(c), T::lit(w)))?;
            Ok(modulate(&f, T::lit(m)))
        })
        .collect()
}

/// Axis-aligned rectangle `[t0, t1] x [a0, a1]` in the `z = t + ia` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Rect<T: Real> {
    pub t0: T,
    pub t1: T,
    pub a0: T,
    pub a1: T,
}

fn barycentric_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    (0..nodes.len())
        .map(|j| {
            let p = nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .fold(T::one(), |acc, (_, &x)| acc * (nodes[j] - x));
            p.recip()
        })
        .collect()
}

/// Lagrange basis values at `a` in barycentric form.
fn lagrange_row<T: Real>(nodes: &[T], bw: &[T], a: T) -> Vec<T> {
    if let Some(j) = nodes.iter().position(|&x| x == a) {
        let mut row = vec![T::zero(); nodes.len()];
        row[j] = T::one();
        return row;
    }
    let terms: Vec<T> = nodes.iter().zip(bw).map(|(&x, &w)| w / (a - x)).collect();
    let s: T = terms.iter().copied().sum();
    terms.into_iter().map(|v| v / s).collect()
}

/// Composite Boole rule when the interval count is a multiple of four,
/// Simpson otherwise.
fn newton_cotes<T: Real>(v: &[Complex<T>], dx: T) -> Complex<T> {
    let n = v.len();
    if n >= 5 && (n - 1).is_multiple_of(4) {
        let c = [7.0, 32.0, 12.0, 32.0, 7.0];
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut i = 0;
        while i + 4 < n {
            for (k, ck) in c.iter().enumerate() {
                acc = acc + v[i + k] * lit::<T>(*ck);
            }
            i += 4;
        }
        acc * (dx * lit::<T>(2.0) / lit(45.0))
    } else {
        simpson(v, dx)
    }
}

/// Sub-intervals used along vertical edges.
const VERTICAL_PANELS: usize = 1000;

/// Discrete Morera test: `|∮ mu dz| / (perimeter * max |mu|)` around `rect`.
///
/// The symbol is interpolated in `a` through all lines (barycentric
/// Lagrange on the Chebyshev nodes) and integrated in `t` on the shared grid;
/// the `t` edges are snapped to grid points.
pub fn holomorphy_residual<T: Real>(s: &SymbolStrip<T>, rect: Rect<T>) -> Result<T> {
    if s.lines.len() < 2 {
        return Err(Error::InvalidRectangle("strip has no interior".into()));
    }
    let nodes: Vec<T> = s.lines.iter().map(|l| l.a).collect();
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    if !(rect.a0 > lo && rect.a1 < hi && rect.a0 < rect.a1) {
        return Err(Error::InvalidRectangle(format!(
            "a-range [{}, {}] must lie strictly inside ({lo}, {hi})",
            rect.a0, rect.a1
        )));
    }
    let t = s.t_grid();
    let snap = |x: T| -> usize {
        t.iter()
            .enumerate()
            .min_by(|p, q| (*p.1 - x).abs().partial_cmp(&(*q.1 - x).abs()).expect("finite"))
            .map(|p| p.0)
            .unwrap_or(0)
    };
    let (k0, mut k1) = (snap(rect.t0), snap(rect.t1));
    if k1 <= k0 + 4 {
        return Err(Error::InvalidRectangle("t-range spans fewer than 4 grid steps".into()));
    }
    // prefer a Boole-compatible interval count
    while (k1 - k0) % 4 != 0 && k1 > k0 + 4 {
        k1 -= 1;
    }
    for line in &s.lines {
        if line.mask[k0..=k1].iter().any(|m| !*m) {
            return Err(Error::InvalidRectangle(format!(
                "rectangle crosses masked samples on line a = {}",
                line.a
            )));
        }
    }
    let bw = barycentric_weights(&nodes);
    let at = |row: &[T], k: usize| -> Complex<T> {
        s.lines
            .iter()
            .zip(row)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (l, &c)| acc + l.values[k] * c)
    };
    let dt = (t[k1] - t[k0]) / T::from_usize_lossy(k1 - k0);
    let horizontal = |a: T| -> (Complex<T>, T) {
        let row = lagrange_row(&nodes, &bw, a);
        let v: Vec<_> = (k0..=k1).map(|k| at(&row, k)).collect();
        let peak = v.iter().map(|x| x.norm()).fold(T::zero(), T::max);
        (newton_cotes(&v, dt), peak)
    };
    let da = (rect.a1 - rect.a0) / T::from_usize_lossy(VERTICAL_PANELS);
    let vertical = |k: usize| -> (Complex<T>, T) {
        let v: Vec<_> = (0..=VERTICAL_PANELS)
            .map(|i| {
                let a = rect.a0 + da * T::from_usize_lossy(i);
                at(&lagrange_row(&nodes, &bw, a), k)
            })
            .collect();
        let peak = v.iter().map(|x| x.norm()).fold(T::zero(), T::max);
        (newton_cotes(&v, da), peak)
    };
    let (bottom, p0) = horizontal(rect.a0);
    let (top, p1) = horizontal(rect.a1);
    let (right, p2) = vertical(k1);
    let (left, p3) = vertical(k0);
    let i = Complex::new(T::zero(), T::one());
    // counter-clockwise: bottom (t up), right (a up), top (t down), left (a down)
    let contour = bottom + i * right - top - i * left;
    let perimeter = lit::<T>(2.0) * ((t[k1] - t[k0]) + (rect.a1 - rect.a0));
    let peak = p0.max(p1).max(p2).max(p3);
    if peak == T::zero() {
        return Ok(T::zero());
    }
    Ok(contour.norm() / (perimeter * peak))
}

/// Samples `t + i a` on the lines `a = a_min` and `a = a_max` of a strip.
pub fn strip_line_samples<T: Real>(strip: &Strip<T>, t_grid: &[T]) -> Vec<Complex<T>> {
    let mut out: Vec<Complex<T>> = t_grid.iter().map(|&t| Complex::new(t, strip.a_min)).collect();
    if strip.a_max > strip.a_min {
        out.extend(t_grid.iter().map(|&t| Complex::new(t, strip.a_max)));
    }
    out
}

/// Outcome of comparing `sup |phi^(z)|` over strip samples with `||M_phi||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Thm4Report<T: Real> {
    pub bound: T,
    pub argmax: Complex<T>,
    pub norm: T,
    pub norm_doubled: T,
    pub window: T,
    pub margin: T,
    pub margin_doubled: T,
    pub monotone: bool,
    pub rel_slack: T,
    pub pass: bool,
    /// Samples with `|phi^(z)| > ||M_phi|| (1 + rel_slack)`.
    pub violations: Vec<Complex<T>>,
}

/// Checks `|phi^(z)| <= ||M_phi||` on strip samples, using finite sections on
/// `[-W, W]` and `[-2W, 2W]`. Passes when the bound holds within `rel_slack`
/// at `W` and the margin `N/B - 1` does not worsen when the window doubles.
pub fn verify_thm4_bound<T: Real>(
    phi: &Kernel<T>,
    w: &Weight<T>,
    samples: &[Complex<T>],
    rel_slack: T,
    window: T,
) -> Result<Thm4Report<T>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no strip samples".into()));
    }
    let grid = *phi.grid();
    if lit::<T>(2.0) * window > grid.half_width() + grid.step() * lit(0.5) {
        return Err(Error::InvalidArgument(format!(
            "doubled window {} exceeds the grid half width {}",
            lit::<T>(2.0) * window,
            grid.half_width()
        )));
    }
    let values: Vec<(Complex<T>, T)> = samples
        .par_iter()
        .map(|&z| (z, kernel_symbol(phi, z).norm()))
        .collect();
    let (argmax, bound) = values
        .iter()
        .copied()
        .fold((samples[0], T::neg_infinity()), |acc, (z, v)| if v > acc.1 { (z, v) } else { acc });
    let op = MultiplierOp::Convolution(phi.clone());
    let tol = lit(DEFAULT_REL_TOL * 1e-3);
    let norm = operator_norm_window(&op, w, &grid, window, tol)?.value;
    let norm_doubled = operator_norm_window(&op, w, &grid, lit::<T>(2.0) * window, tol)?.value;
    let cap = norm * (T::one() + rel_slack);
    let violations: Vec<_> = values.iter().filter(|(_, v)| *v > cap).map(|(z, _)| *z).collect();
    let margin = norm / bound - T::one();
    let margin_doubled = norm_doubled / bound - T::one();
    let monotone = margin_doubled >= margin - lit::<T>(1e-9) * (T::one() + margin.abs());
    Ok(Thm4Report {
        bound,
        argmax,
        norm,
        norm_doubled,
        window,
        margin,
        margin_doubled,
        monotone,
        rel_slack,
        pass: violations.is_empty() && monotone,
        violations,
    })
}
