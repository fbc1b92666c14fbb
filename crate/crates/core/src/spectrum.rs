//! Two-sided numerical certificates for the spectrum of the unit shift.
//!
//! Inside points are certified by approximate eigenvectors of `S` or of its
//! weighted adjoint `S* g = w^{-2} (w^2 g)(. + 1)`; since
//! `sigma(S) = sigma_ap(S) ∪ conj(sigma_ap(S*))`, either family suffices.
//! Outside points are certified by a convergent Neumann series for the
//! resolvent with a rigorous operator tail bound.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{
    log_weighted_norm, make_test_function, translate, Grid, SampledFunction, TestFunction,
};
use crate::linalg::tridiag_eigenvalue;
use crate::multipliers::{
    apply_stencil, neumann_terms, select_branch, ConvolutionPath, ResolventBranch, ResolventOp,
};
use crate::scalar::{linear_fit, lit, Real};
use crate::shift_analysis::{analyze_strip, Annulus, StripAnalysis, DEFAULT_N_MAX};
use crate::weights::Weight;

pub const SLOPE_THRESHOLD: f64 = -0.4;
pub const FINAL_RESIDUAL_MAX: f64 = 0.1;
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
pub const MAX_PSEUDO_N: usize = 4096;

pub const PSEUDO_CAVEAT: &str = "DIAGNOSTIC ONLY: finite sections of the two-sided shift are \
nilpotent-like truncations whose pseudospectra fill a disk rather than the annulus; they are \
polluted and are not a spectral certificate";

/// Shared per-weight data for the certifiers.
#[derive(Debug, Clone)]
pub struct SpectrumContext<T: Real> {
    pub weight: Weight<T>,
    pub grid: Grid<T>,
    pub analysis: StripAnalysis<T>,
    pub schedule: Vec<T>,
    pub taper: T,
    pub tail_tol: T,
}

impl<T: Real> SpectrumContext<T> {
    pub fn new(weight: Weight<T>, grid: Grid<T>) -> Result<Self> {
        Self::with_n_max(weight, grid, DEFAULT_N_MAX)
    }

    pub fn with_n_max(weight: Weight<T>, grid: Grid<T>, n_max: usize) -> Result<Self> {
        let analysis = analyze_strip(&weight, n_max)?;
        Ok(Self::from_analysis(weight, grid, analysis))
    }

    /// Schedule `(L - 1) / 8, .., L - 1` (sharp windows) and tail `1e-10`.
    pub fn from_analysis(weight: Weight<T>, grid: Grid<T>, analysis: StripAnalysis<T>) -> Self {
        let l = grid.half_width() - T::one();
        let schedule = [8.0, 4.0, 2.0, 1.0]
            .iter()
            .map(|d| (l / lit(*d)).floor())
            .collect();
        Self {
            weight,
            grid,
            analysis,
            schedule,
            taper: T::zero(),
            tail_tol: lit(DEFAULT_TAIL_TOL),
        }
    }

    pub fn annulus(&self) -> &Annulus<T> {
        &self.analysis.annulus
    }
}

fn polar<T: Real>(z: Complex<T>) -> (T, T) {
    (z.norm().ln(), z.arg())
}

fn check_window<T: Real>(grid: &Grid<T>, l0: T, taper: T) -> Result<()> {
    if l0 + T::one() + taper > grid.half_width() {
        return Err(Error::InvalidArgument(format!(
            "window L0 = {l0} plus shift and taper exceeds the grid half width {}",
            grid.half_width()
        )));
    }
    Ok(())
}

/// `||S f - z f||_w / ||f||_w` for the windowed eigenfunction
/// `f = e^{-(a + ib) x}` of `S` on `[-L0, L0]`, `z = e^{a + ib}`.
pub fn weyl_residual<T: Real>(w: &Weight<T>, grid: Grid<T>, z: Complex<T>, l0: T, taper: T) -> Result<T> {
    check_window(&grid, l0, taper)?;
    let (a, b) = polar(z);
    let f = make_test_function(
        grid,
        TestFunction::PlaneWaveWindow { a: -a, b: -b, half_length: l0, taper },
    )?;
    let r = translate(&f, T::one())?.exact()?.axpy(-z, &f)?;
    Ok((log_weighted_norm(&r, w) - log_weighted_norm(&f, w)).exp())
}

/// Residual of `S* - conj(z)` on `g = w^{-2} G`, `G = e^{(a - ib) x}` on
/// `[-L0, L0]`. Equals `||G(. + 1) - conj(z) G||_{1/w} / ||G||_{1/w}`.
pub fn adjoint_weyl_residual<T: Real>(
    w: &Weight<T>,
    grid: Grid<T>,
    z: Complex<T>,
    l0: T,
    taper: T,
) -> Result<T> {
    check_window(&grid, l0, taper)?;
    let (a, b) = polar(z);
    let big_g = make_test_function(
        grid,
        TestFunction::PlaneWaveWindow { a, b: -b, half_length: l0, taper },
    )?;
    let inv = w.reciprocal();
    let r = translate(&big_g, -T::one())?.exact()?.axpy(-z.conj(), &big_g)?;
    Ok((log_weighted_norm(&r, &inv) - log_weighted_norm(&big_g, &inv)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedInside,
    CertifiedOutside,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeylKind {
    /// Approximate eigenvector of `S`.
    Primal,
    /// Approximate eigenvector of `S*` for `conj(z)`.
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WeylFit<T: Real> {
    pub kind: WeylKind,
    pub slope: T,
    pub final_residual: T,
    /// `(L0, residual)`.
    pub table: Vec<(T, T)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum Evidence<T: Real> {
    Weyl {
        primal: WeylFit<T>,
        adjoint: WeylFit<T>,
    },
    Neumann {
        branch: ResolventBranch,
        terms: usize,
        tail_bound: T,
        residual: T,
    },
    Margin {
        modulus: T,
        r_in: T,
        r_out: T,
        u: T,
        reason: String,
    },
}

impl<T: Real> Evidence<T> {
    /// One number for rasters: best slope, Neumann residual, or modulus.
    pub fn value(&self) -> T {
        match self {
            Evidence::Weyl { primal, adjoint } => primal.slope.min(adjoint.slope),
            Evidence::Neumann { residual, .. } => *residual,
            Evidence::Margin { modulus, .. } => *modulus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumClassification<T: Real> {
    pub z: Complex<T>,
    pub verdict: Verdict,
    pub evidence: Evidence<T>,
}

/// `scale` divides the final residual before the threshold test.
fn fit_table<T: Real>(kind: WeylKind, table: Vec<(T, T)>, scale: T) -> WeylFit<T> {
    let xs: Vec<T> = table.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<T> = table
        .iter()
        .map(|p| p.1.max(T::min_positive_value()).ln())
        .collect();
    let (_, slope, _) = linear_fit(&xs, &ys);
    let final_residual = table.last().map(|p| p.1).unwrap_or(T::infinity());
    WeylFit {
        kind,
        slope,
        final_residual,
        pass: slope <= lit(SLOPE_THRESHOLD) && final_residual / scale < lit(FINAL_RESIDUAL_MAX),
        table,
    }
}

/// Certifies `z ∈ sigma(S)` when a Weyl family has residual slope
/// `<= -0.4` in `ln L0` and final residual `< 0.1 |z|`, i.e. the family is
/// approximately an eigenvector of `S / z` for the eigenvalue 1.
pub fn certify_inside<T: Real>(
    ctx: &SpectrumContext<T>,
    z: Complex<T>,
    schedule: &[T],
    taper: T,
) -> Result<SpectrumClassification<T>> {
    if schedule.len() < 4 || schedule.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument(
            "window schedule must be increasing with at least 4 entries".into(),
        ));
    }
    let a = z.norm().ln();
    let (lo, hi) = ctx.analysis.strip.inflated(T::one());
    let slack = lit::<T>(1e-12) * (T::one() + a.abs());
    if !(a >= lo - slack && a <= hi + slack) {
        return Err(Error::NotInsideCandidate {
            log_modulus: a.as_f64(),
            a_min: ctx.analysis.strip.a_min.as_f64(),
            a_max: ctx.analysis.strip.a_max.as_f64(),
        });
    }
    let mut primal = Vec::with_capacity(schedule.len());
    let mut adjoint = Vec::with_capacity(schedule.len());
    for &l0 in schedule {
        primal.push((l0, weyl_residual(&ctx.weight, ctx.grid, z, l0, taper)?));
        adjoint.push((l0, adjoint_weyl_residual(&ctx.weight, ctx.grid, z, l0, taper)?));
    }
    let primal = fit_table(WeylKind::Primal, primal, z.norm());
    let adjoint = fit_table(WeylKind::Adjoint, adjoint, z.norm());
    let verdict = if primal.pass || adjoint.pass {
        Verdict::CertifiedInside
    } else {
        Verdict::Undecided
    };
    Ok(SpectrumClassification {
        z,
        verdict,
        evidence: Evidence::Weyl { primal, adjoint },
    })
}

fn margin<T: Real>(an: &Annulus<T>, z: Complex<T>, reason: &str) -> Evidence<T> {
    Evidence::Margin {
        modulus: z.norm(),
        r_in: an.r_in,
        r_out: an.r_out,
        u: an.u,
        reason: reason.to_string(),
    }
}

/// Certifies `z ∉ sigma(S)`: the operator tail of the Neumann series is
/// bounded below `tail_tol` and the resolvent identity holds on the probe to
/// `10 tail_tol`. Inside the inflated annulus the verdict is undecided.
pub fn certify_outside<T: Real>(
    ctx: &SpectrumContext<T>,
    z: Complex<T>,
    tail_tol: T,
    probe: Option<&SampledFunction<T>>,
) -> Result<SpectrumClassification<T>> {
    let an = &ctx.analysis;
    let undecided = |reason: &str| SpectrumClassification {
        z,
        verdict: Verdict::Undecided,
        evidence: margin(&an.annulus, z, reason),
    };
    let branch = match select_branch(an, z) {
        Ok(b) => b,
        Err(_) => return Ok(undecided("inside the inflated annulus")),
    };
    let (seq, remainder_factor) = match branch {
        ResolventBranch::Outer => (&an.forward.sequence, z.norm().max(T::one())),
        ResolventBranch::Inner => (
            &an.backward.sequence,
            // remainder z^N S_{-N} f is at most ||S_1|| times the tail bound
            an.forward.sequence.entries[0].log_norm.exp().max(T::one()),
        ),
    };
    let Some((terms, tail_bound)) = neumann_terms(seq, branch, z.norm(), tail_tol / remainder_factor)
    else {
        return Ok(undecided("tail bound does not contract within n_max"));
    };
    let grid = ctx.grid;
    let reach = T::from_usize_lossy(terms + 1);
    let default_probe;
    let f = match probe {
        Some(p) => p,
        None => {
            let half = reach / lit(2.0);
            let center = match branch {
                ResolventBranch::Outer => -half.floor(),
                ResolventBranch::Inner => half.floor(),
            };
            if half + lit(2.0) > grid.half_width() {
                return Ok(undecided("probe and its shifts do not fit on the grid"));
            }
            default_probe = make_test_function(grid, TestFunction::bump(center, lit(2.0)))?;
            &default_probe
        }
    };
    let op = ResolventOp {
        z,
        branch,
        terms,
        tail_bound,
    };
    let tf = match apply_stencil(&op.stencil(&grid), f, ConvolutionPath::Direct) {
        Ok(v) => v,
        Err(Error::Truncation(_)) => return Ok(undecided("probe shifts leave the grid")),
        Err(e) => return Err(e),
    };
    let lhs = match translate(&tf, T::one())?.exact() {
        Ok(v) => v,
        Err(Error::Truncation(_)) => return Ok(undecided("probe shifts leave the grid")),
        Err(e) => return Err(e),
    };
    let r = lhs.axpy(-z, &tf)?.sub(f)?;
    let residual = (log_weighted_norm(&r, &ctx.weight) - log_weighted_norm(f, &ctx.weight)).exp();
    let ok = tail_bound <= tail_tol && residual <= lit::<T>(10.0) * tail_tol;
    Ok(SpectrumClassification {
        z,
        verdict: if ok {
            Verdict::CertifiedOutside
        } else {
            Verdict::Undecided
        },
        evidence: Evidence::Neumann {
            branch,
            terms,
            tail_bound,
            residual,
        },
    })
}

/// Polar sample grid; `extra_radii` are merged into the radial nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PolarRaster<T: Real> {
    pub r_min: T,
    pub r_max: T,
    pub n_r: usize,
    pub n_theta: usize,
    pub extra_radii: Vec<T>,
}

impl<T: Real> PolarRaster<T> {
    /// 64 radii by 32 angles.
    pub fn new(r_min: T, r_max: T) -> Self {
        Self {
            r_min,
            r_max,
            n_r: 64,
            n_theta: 32,
            extra_radii: Vec::new(),
        }
    }

    pub fn with_extra_radii(mut self, radii: impl IntoIterator<Item = T>) -> Self {
        self.extra_radii.extend(radii);
        self
    }

    pub fn cell(&self) -> T {
        (self.r_max - self.r_min) / T::from_usize_lossy(self.n_r.max(2) - 1)
    }

    pub fn radii(&self) -> Vec<T> {
        let mut r: Vec<T> = (0..self.n_r)
            .map(|k| self.r_min + self.cell() * T::from_usize_lossy(k))
            .collect();
        r.extend(
            self.extra_radii
                .iter()
                .copied()
                .filter(|x| *x >= self.r_min && *x <= self.r_max),
        );
        r.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
        r.dedup_by(|a, b| (*a - *b).abs() <= lit::<T>(1e-12) * b.abs().max(T::one()));
        r
    }

    pub fn points(&self) -> Vec<Complex<T>> {
        let tau = lit::<T>(2.0) * T::PI();
        self.radii()
            .into_iter()
            .flat_map(|r| {
                (0..self.n_theta).map(move |k| {
                    Complex::from_polar(r, tau * T::from_usize_lossy(k) / T::from_usize_lossy(self.n_theta))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MapCell<T: Real> {
    pub z: Complex<T>,
    pub verdict: Verdict,
    pub evidence_value: T,
    /// Both certifiers claimed the point.
    pub contradiction: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub certified_inside: usize,
    pub certified_outside: usize,
    pub undecided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumMap<T: Real> {
    pub weight: String,
    pub annulus: Annulus<T>,
    pub cells: Vec<MapCell<T>>,
    pub counts: VerdictCounts,
    pub contradictions: usize,
}

impl<T: Real> SpectrumMap<T> {
    /// `re im verdict evidence` rows.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# re_z\tim_z\tverdict\tevidence")?;
        for c in &self.cells {
            let v = match c.verdict {
                Verdict::CertifiedInside => "certified_inside",
                Verdict::CertifiedOutside => "certified_outside",
                Verdict::Undecided => "undecided",
            };
            writeln!(out, "{}\t{}\t{}\t{}", c.z.re, c.z.im, v, c.evidence_value)?;
        }
        Ok(())
    }

    /// Moduli of certified-inside cells, `(min, max)`.
    pub fn inside_band(&self) -> Option<(T, T)> {
        self.cells
            .iter()
            .filter(|c| c.verdict == Verdict::CertifiedInside)
            .map(|c| c.z.norm())
            .fold(None, |acc, r| match acc {
                None => Some((r, r)),
                Some((lo, hi)) => Some((lo.min(r), hi.max(r))),
            })
    }

    /// The inside band agrees with the annulus up to `cell + u`, and every
    /// sampled radius in `[r_in, r_out]` is certified at all angles.
    pub fn band_matches(&self, cell: T) -> bool {
        let an = &self.annulus;
        let tol = cell + an.u + lit::<T>(1e-9);
        let Some((lo, hi)) = self.inside_band() else {
            return false;
        };
        let within = (lo - an.r_in).abs() <= tol && (hi - an.r_out).abs() <= tol;
        let eps = lit::<T>(1e-9) * an.r_out.max(T::one());
        let filled = self
            .cells
            .iter()
            .filter(|c| {
                let r = c.z.norm();
                r >= an.r_in - eps && r <= an.r_out + eps
            })
            .all(|c| c.verdict == Verdict::CertifiedInside);
        within && filled
    }
}

/// Classifies every point with both certifiers.
pub fn spectrum_map<T: Real>(ctx: &SpectrumContext<T>, z_grid: &[Complex<T>]) -> Result<SpectrumMap<T>> {
    let cells = z_grid
        .par_iter()
        .map(|&z| classify(ctx, z))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = VerdictCounts::default();
    let mut contradictions = 0;
    for c in &cells {
        match c.verdict {
            Verdict::CertifiedInside => counts.certified_inside += 1,
            Verdict::CertifiedOutside => counts.certified_outside += 1,
            Verdict::Undecided => counts.undecided += 1,
        }
        contradictions += usize::from(c.contradiction);
    }
    Ok(SpectrumMap {
        weight: ctx.weight.id().to_string(),
        annulus: ctx.analysis.annulus,
        cells,
        counts,
        contradictions,
    })
}

fn classify<T: Real>(ctx: &SpectrumContext<T>, z: Complex<T>) -> Result<MapCell<T>> {
    let inside = match certify_inside(ctx, z, &ctx.schedule, ctx.taper) {
        Ok(c) => Some(c),
        Err(Error::NotInsideCandidate { .. }) => None,
        Err(e) => return Err(e),
    };
    let outside = certify_outside(ctx, z, ctx.tail_tol, None)?;
    let is_in = inside
        .as_ref()
        .is_some_and(|c| c.verdict == Verdict::CertifiedInside);
    let is_out = outside.verdict == Verdict::CertifiedOutside;
    let (verdict, evidence) = match (is_in, is_out) {
        (true, false) => (Verdict::CertifiedInside, inside.expect("present").evidence.value()),
        (false, true) => (Verdict::CertifiedOutside, outside.evidence.value()),
        _ => (Verdict::Undecided, outside.evidence.value()),
    };
    Ok(MapCell {
        z,
        verdict,
        evidence_value: evidence,
        contradiction: is_in && is_out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PseudoEntry<T: Real> {
    pub z: Complex<T>,
    pub s_min: T,
    pub in_pseudospectrum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PseudoRaster<T: Real> {
    pub label: String,
    pub caveat: String,
    pub n: usize,
    pub epsilon: T,
    pub entries: Vec<PseudoEntry<T>>,
}

/// Smallest singular value of `z I - S_n`, where `S_n` is the `n x n`
/// section of `S` on the unit lattice in the weighted orthonormal basis:
/// lower bidiagonal with diagonal `z` and subdiagonal
/// `-w(x_{k+1}) / w(x_k)`.
pub fn section_min_singular_value<T: Real>(w: &Weight<T>, n: usize, z: Complex<T>) -> T {
    let half = T::from_usize_lossy(n / 2);
    let x = |k: usize| T::from_usize_lossy(k) - half;
    let d = z.norm();
    // Golub-Kahan form: zero diagonal, couplings |d1|, |e1|, |d2|, ..., |dn|
    let mut off = Vec::with_capacity(2 * n - 1);
    for k in 0..n {
        off.push(d);
        if k + 1 < n {
            off.push((w.log_weight(x(k + 1)) - w.log_weight(x(k))).exp());
        }
    }
    let diag = vec![T::zero(); 2 * n];
    tridiag_eigenvalue(&diag, &off, n).max(T::zero())
}

/// DIAGNOSTIC: finite-section pseudospectrum. See [`PSEUDO_CAVEAT`].
pub fn finite_section_pseudospectrum<T: Real>(
    w: &Weight<T>,
    n: usize,
    z_grid: &[Complex<T>],
    epsilon: T,
) -> Result<PseudoRaster<T>> {
    if n == 0 || n > MAX_PSEUDO_N {
        return Err(Error::InvalidArgument(format!(
            "section size {n} must be in 1..={MAX_PSEUDO_N}"
        )));
    }
    let entries = z_grid
        .par_iter()
        .map(|&z| {
            let s_min = section_min_singular_value(w, n, z);
            PseudoEntry {
                z,
                s_min,
                in_pseudospectrum: s_min < epsilon,
            }
        })
        .collect();
    Ok(PseudoRaster {
        label: "DIAGNOSTIC".into(),
        caveat: PSEUDO_CAVEAT.into(),
        n,
        epsilon,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::make_builtin_weight;

    fn ctx(name: &str, p: &[f64]) -> SpectrumContext<f64> {
        let w = make_builtin_weight(name, p).unwrap();
        SpectrumContext::with_n_max(w, Grid::new(256.0, 1.0 / 16.0).unwrap(), 64).unwrap()
    }

    #[test]
    fn weyl_residual_examples() {
        let c = ctx("constant", &[]);
        let r = weyl_residual(&c.weight, c.grid, Complex::new(1.0, 0.0), 100.0, 0.0).unwrap();
        assert!((r - 0.1).abs() < 1e-3, "{r}");
        let rb = weyl_residual(&c.weight, c.grid, Complex::from_polar(1.0, 0.7), 100.0, 0.0).unwrap();
        assert!((r - rb).abs() < 1e-6);

        let e = ctx("exp_linear", &[]);
        let z = Complex::from_polar(1f64.exp(), 0.3);
        let table: Vec<_> = [16.0, 32.0, 64.0, 128.0]
            .iter()
            .map(|&l| (l, weyl_residual(&e.weight, e.grid, z, l, 0.0).unwrap()))
            .collect();
        let fit = fit_table(WeylKind::Primal, table, z.norm());
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
        assert!(fit.pass);
    }

    #[test]
    fn certify_inside_examples() {
        let c = ctx("constant", &[]);
        let s = certify_inside(&c, Complex::new(0.0, 1.0), &c.schedule, 0.0).unwrap();
        assert_eq!(s.verdict, Verdict::CertifiedInside);
        if let Evidence::Weyl { primal, .. } = &s.evidence {
            assert!((primal.slope + 0.5).abs() < 0.05);
        }
        assert!(matches!(
            certify_inside(&c, Complex::new(2.0, 0.0), &c.schedule, 0.0),
            Err(Error::NotInsideCandidate { .. })
        ));
        let e = ctx("exp_poly", &[0.0]);
        let s = certify_inside(&e, Complex::new(0.5f64.exp(), 0.0), &e.schedule, 0.0).unwrap();
        assert_eq!(s.verdict, Verdict::CertifiedInside);
    }

    #[test]
    fn certify_outside_examples() {
        let c = ctx("constant", &[]);
        let s = certify_outside(&c, Complex::new(2.0, 0.0), 1e-10, None).unwrap();
        assert_eq!(s.verdict, Verdict::CertifiedOutside);
        if let Evidence::Neumann { residual, .. } = s.evidence {
            assert!(residual <= 1e-9);
        }
        let s = certify_outside(&c, Complex::new(1.0, 0.0), 1e-10, None).unwrap();
        assert_eq!(s.verdict, Verdict::Undecided);
        let e = ctx("exp_linear", &[]);
        let s = certify_outside(&e, Complex::new(1.0, 0.0), 1e-10, None).unwrap();
        assert_eq!(s.verdict, Verdict::CertifiedOutside);
        assert!(matches!(s.evidence, Evidence::Neumann { branch: ResolventBranch::Inner, .. }));
    }

    #[test]
    fn constant_weight_ring() {
        let c = ctx("constant", &[]);
        let raster = PolarRaster { n_r: 11, n_theta: 4, ..PolarRaster::new(0.5, 1.5) }.with_extra_radii([1.0]);
        let map = spectrum_map(&c, &raster.points()).unwrap();
        assert_eq!(map.contradictions, 0);
        let (lo, hi) = map.inside_band().unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!(map.band_matches(raster.cell()));
    }

    #[test]
    fn exp_linear_and_exp_poly_bands() {
        let e = ctx("exp_linear", &[]);
        let r = PolarRaster { n_r: 13, n_theta: 3, ..PolarRaster::new(1.0, 4.0) }
            .with_extra_radii([1f64.exp()]);
        let map = spectrum_map(&e, &r.points()).unwrap();
        assert_eq!(map.contradictions, 0);
        assert!(map.band_matches(r.cell()), "{:?}", map.inside_band());

        let p = ctx("exp_poly", &[1.0]);
        let r = PolarRaster { n_r: 12, n_theta: 3, ..PolarRaster::new(0.2, 3.5) }
            .with_extra_radii([(-1f64).exp(), 1f64.exp()]);
        let map = spectrum_map(&p, &r.points()).unwrap();
        assert_eq!(map.contradictions, 0);
        assert!(map.band_matches(r.cell()), "{:?}", map.inside_band());
        assert!(map.counts.certified_outside > 0);
    }

    #[test]
    fn pseudospectrum_examples() {
        let w = make_builtin_weight::<f64>("constant", &[]).unwrap();
        let p = finite_section_pseudospectrum(&w, 512, &[Complex::new(0.0, 0.0), Complex::new(1.5, 0.0)], 1e-3)
            .unwrap();
        assert_eq!(p.label, "DIAGNOSTIC");
        assert!(p.entries[0].s_min < 1e-12);
        assert!(p.entries[1].s_min >= 0.5 - 1e-3);
        let s: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&n| section_min_singular_value(&w, n, Complex::new(0.9, 0.0)))
            .collect();
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
        assert!(finite_section_pseudospectrum(&w, 5000, &[], 1e-3).is_err());
    }
}
