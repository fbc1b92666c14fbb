//! Norms of the translation group, spectral radii of the unit shift and the
//! resulting strip `a_min <= Im z <= a_max` and annulus `r_in <= |z| <= r_out`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::weights::{log_ratio_sup, Interval, Sampling, Weight, WeightFamily};

pub const DEFAULT_N_MAX: usize = 256;

/// Name of the flag raised for stretched exponential weights, whose norm
/// sequence has Gelfand limit 1 even though the weight grows like
/// `e^{a |x|^b}`; the annulus `e^{-a} <= |z| <= e^a` sometimes quoted for
/// this family is not what the norms give.
pub const STRETCHED_EXP_FLAG: &str = "stretched-exp-annulus-discrepancy";

/// `||S_t|| = sup_x w(x + t) / w(x)` on the sampled domain.
pub fn shift_norm<T: Real>(w: &Weight<T>, t: T, domain: &Interval<T>, step: T) -> Result<T> {
    Ok(log_ratio_sup(w, t, domain, step)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Powers of `S`.
    Forward,
    /// Powers of `S^{-1}`.
    Backward,
}

impl Direction {
    fn sign(self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormEntry<T: Real> {
    pub n: usize,
    pub log_norm: T,
}

/// `ln ||S^{±n}||` for `n = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormSequence<T: Real> {
    pub entries: Vec<NormEntry<T>>,
}

impl<T: Real> NormSequence<T> {
    pub fn compute(w: &Weight<T>, dir: Direction, n_max: usize, sampling: &Sampling<T>) -> Result<Self> {
        let entries = (1..=n_max)
            .into_par_iter()
            .map(|n| {
                let t = T::from_isize_lossy((dir.sign() * n as i64) as isize);
                let log_norm = log_ratio_sup(w, t, &sampling.domain, sampling.step)?;
                if !log_norm.is_finite() {
                    return Err(Error::InvalidWeight(format!(
                        "ln ||S^{}|| is not finite",
                        dir.sign() * n as i64
                    )));
                }
                Ok(NormEntry { n, log_norm })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `ln ||S^n|| / n`.
    pub fn rates(&self) -> Vec<T> {
        self.entries
            .iter()
            .map(|e| e.log_norm / T::from_usize_lossy(e.n))
            .collect()
    }

    /// `min_n ln ||S^n|| / n`, an upper bound for the Gelfand limit.
    pub fn fekete_bound(&self) -> T {
        self.rates().into_iter().fold(T::infinity(), T::min)
    }

    /// Largest `ln||S^{n+m}|| - ln||S^n|| - ln||S^m||` over stored pairs.
    pub fn subadditivity_violation(&self) -> T {
        let by_n: std::collections::HashMap<usize, T> =
            self.entries.iter().map(|e| (e.n, e.log_norm)).collect();
        let mut worst = T::neg_infinity();
        for a in &self.entries {
            for b in &self.entries {
                if b.n < a.n {
                    continue;
                }
                if let Some(&s) = by_n.get(&(a.n + b.n)) {
                    worst = worst.max(s - a.log_norm - b.log_norm);
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    FeketeLimit,
    FitExtrapolation,
}

/// Correction term `g(n)` in `ln||S^n||/n ≈ r + c g(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "kind", rename_all = "snake_case")]
pub enum DecayModel<T: Real> {
    /// Sequence is constant; no correction.
    Constant,
    InverseN,
    LogNOverN,
    /// `n^{beta - 1}`.
    Power { beta: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectralRadiusEstimate<T: Real> {
    pub direction: Direction,
    pub value: T,
    pub log_value: T,
    pub uncertainty: T,
    pub method: EstimateMethod,
    pub model: DecayModel<T>,
    /// Intercept of the selected model before the Fekete cap.
    pub fitted: T,
    pub fekete_bound: T,
    pub sequence: NormSequence<T>,
}

/// Spectral radius of `S` (forward) or `S^{-1}` (backward) on the default
/// sampling.
pub fn spectral_radius<T: Real>(
    w: &Weight<T>,
    dir: Direction,
    n_max: usize,
) -> Result<SpectralRadiusEstimate<T>> {
    spectral_radius_with(w, dir, n_max, &Sampling::default())
}

pub fn spectral_radius_with<T: Real>(
    w: &Weight<T>,
    dir: Direction,
    n_max: usize,
    sampling: &Sampling<T>,
) -> Result<SpectralRadiusEstimate<T>> {
    if n_max < 8 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must be >= 8")));
    }
    let seq = NormSequence::compute(w, dir, n_max, sampling)?;
    Ok(estimate_from_sequence(seq, dir, w.has_closed_form()))
}

/// Extrapolates the Gelfand limit from a norm sequence.
pub fn estimate_from_sequence<T: Real>(
    seq: NormSequence<T>,
    dir: Direction,
    closed_form: bool,
) -> SpectralRadiusEstimate<T> {
    let q = seq.rates();
    let fekete = seq.fekete_bound();
    let (lo, hi) = q
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = T::one() + fekete.abs();
    if hi - lo <= lit::<T>(1e-12) * scale {
        let method = if closed_form {
            EstimateMethod::ClosedForm
        } else {
            EstimateMethod::FeketeLimit
        };
        return SpectralRadiusEstimate {
            direction: dir,
            value: fekete.exp(),
            log_value: fekete,
            uncertainty: (hi - lo) / lit(2.0),
            method,
            model: DecayModel::Constant,
            fitted: fekete,
            fekete_bound: fekete,
            sequence: seq,
        };
    }

    let start = seq.len() / 2;
    let ns: Vec<T> = seq.entries[start..]
        .iter()
        .map(|e| T::from_usize_lossy(e.n))
        .collect();
    let qs = &q[start..];
    let (model, fitted) = select_model(&ns, qs);
    let log_value = fitted.min(fekete);
    SpectralRadiusEstimate {
        direction: dir,
        value: log_value.exp(),
        log_value,
        uncertainty: (fekete - log_value) / lit(2.0),
        method: EstimateMethod::FitExtrapolation,
        model,
        fitted,
        fekete_bound: fekete,
        sequence: seq,
    }
}

fn fit_with<T: Real>(ns: &[T], qs: &[T], g: impl Fn(T) -> T) -> (T, T) {
    let gs: Vec<T> = ns.iter().map(|&n| g(n)).collect();
    let (c0, _, sse) = crate::scalar::linear_fit(&gs, qs);
    (c0, sse)
}

fn power_sse<T: Real>(ns: &[T], qs: &[T], beta: T) -> (T, T) {
    fit_with(ns, qs, |n| n.powf(beta - T::one()))
}

fn select_model<T: Real>(ns: &[T], qs: &[T]) -> (DecayModel<T>, T) {
    let mut best = {
        let (r, sse) = fit_with(ns, qs, |n| n.recip());
        (DecayModel::InverseN, r, sse)
    };
    let (r, sse) = fit_with(ns, qs, |n| n.ln() / n);
    if sse < best.2 {
        best = (DecayModel::LogNOverN, r, sse);
    }

    // coarse scan, then golden-section refinement around the best node
    let nodes = 49;
    let node = |k: usize| lit::<T>(0.02) + lit::<T>(0.96) * T::from_usize_lossy(k) / lit(48.0);
    let mut k_best = 0;
    let mut s_best = T::infinity();
    for k in 0..nodes {
        let (_, s) = power_sse(ns, qs, node(k));
        if s < s_best {
            s_best = s;
            k_best = k;
        }
    }
    let mut a = node(k_best.saturating_sub(1));
    let mut b = node((k_best + 1).min(nodes - 1));
    let phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (power_sse(ns, qs, c).1, power_sse(ns, qs, d).1);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = power_sse(ns, qs, c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = power_sse(ns, qs, d).1;
        }
    }
    let beta = (a + b) / lit(2.0);
    let (r, sse) = power_sse(ns, qs, beta);
    let (r, sse, beta) = if s_best < sse {
        let (r0, s0) = power_sse(ns, qs, node(k_best));
        (r0, s0, node(k_best))
    } else {
        (r, sse, beta)
    };
    // a strictly better fit is required to prefer the extra parameter
    if sse < best.2 * lit(0.999) {
        best = (DecayModel::Power { beta }, r, sse);
    }
    (best.0, best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Strip<T: Real> {
    pub a_min: T,
    pub a_max: T,
    pub u_min: T,
    pub u_max: T,
    pub interior_nonempty: bool,
    /// Raw estimates had `a_min > a_max` and both were moved to the midpoint.
    pub projected: bool,
}

impl<T: Real> Strip<T> {
    pub fn from_estimates(fwd: &SpectralRadiusEstimate<T>, bwd: &SpectralRadiusEstimate<T>) -> Self {
        let mut a_max = fwd.log_value;
        let mut a_min = -bwd.log_value;
        let mut u_max = fwd.uncertainty;
        let mut u_min = bwd.uncertainty;
        let mut projected = false;
        if a_min > a_max {
            let mid = (a_min + a_max) / lit(2.0);
            let gap = (a_min - a_max) / lit(2.0);
            u_max = u_max + gap;
            u_min = u_min + gap;
            a_min = mid;
            a_max = mid;
            projected = true;
        }
        Strip {
            a_min,
            a_max,
            u_min,
            u_max,
            interior_nonempty: a_max - a_min > u_min + u_max,
            projected,
        }
    }

    /// Combined uncertainty `max(u_min, u_max)` on the log scale.
    pub fn uncertainty(&self) -> T {
        self.u_min.max(self.u_max)
    }

    pub fn contains(&self, a: T) -> bool {
        a >= self.a_min && a <= self.a_max
    }

    /// The strip widened by `k` times its uncertainty on each side.
    pub fn inflated(&self, k: T) -> (T, T) {
        (self.a_min - k * self.u_min, self.a_max + k * self.u_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Annulus<T: Real> {
    pub r_in: T,
    pub r_out: T,
    /// Radial uncertainty.
    pub u: T,
    /// Log-scale uncertainty of the inner and outer radius.
    pub log_u_in: T,
    pub log_u_out: T,
}

impl<T: Real> Annulus<T> {
    pub fn from_strip(s: &Strip<T>) -> Self {
        let r_in = s.a_min.exp();
        let r_out = s.a_max.exp();
        let u = (r_out * s.u_max.exp_m1()).max(-r_in * (-s.u_min).exp_m1());
        Annulus {
            r_in,
            r_out,
            u,
            log_u_in: s.u_min,
            log_u_out: s.u_max,
        }
    }

    /// `[r_in e^{-k u_in}, r_out e^{k u_out}]`.
    pub fn inflated(&self, k: T) -> (T, T) {
        (
            self.r_in * (-k * self.log_u_in).exp(),
            self.r_out * (k * self.log_u_out).exp(),
        )
    }
}

/// Both radii, the strip and the annulus from a shared computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StripAnalysis<T: Real> {
    pub forward: SpectralRadiusEstimate<T>,
    pub backward: SpectralRadiusEstimate<T>,
    pub strip: Strip<T>,
    pub annulus: Annulus<T>,
}

pub fn analyze_strip<T: Real>(w: &Weight<T>, n_max: usize) -> Result<StripAnalysis<T>> {
    analyze_strip_with(w, n_max, &Sampling::default())
}

pub fn analyze_strip_with<T: Real>(
    w: &Weight<T>,
    n_max: usize,
    sampling: &Sampling<T>,
) -> Result<StripAnalysis<T>> {
    let forward = spectral_radius_with(w, Direction::Forward, n_max, sampling)?;
    let backward = spectral_radius_with(w, Direction::Backward, n_max, sampling)?;
    let strip = Strip::from_estimates(&forward, &backward);
    let annulus = Annulus::from_strip(&strip);
    Ok(StripAnalysis {
        forward,
        backward,
        strip,
        annulus,
    })
}

pub fn strip<T: Real>(w: &Weight<T>, n_max: usize) -> Result<Strip<T>> {
    Ok(analyze_strip(w, n_max)?.strip)
}

pub fn annulus<T: Real>(w: &Weight<T>, n_max: usize) -> Result<Annulus<T>> {
    Ok(analyze_strip(w, n_max)?.annulus)
}

/// Records the gap between the norm-sequence estimate and the annulus
/// `e^{-a} <= |z| <= e^a` for `w = e^{a |x|^b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Discrepancy<T: Real> {
    pub flag: String,
    /// Closed-form `ln ||S^n|| = a n^b`, so `ln rho = lim a n^{b-1} = 0`.
    pub oracle_log_radius: T,
    pub estimated_log_radius: T,
    pub claimed_r_in: T,
    pub claimed_r_out: T,
    pub note: String,
}

pub fn stretched_exp_discrepancy<T: Real>(
    w: &Weight<T>,
    est: &SpectralRadiusEstimate<T>,
) -> Option<Discrepancy<T>> {
    if w.family() != WeightFamily::StretchedExp {
        return None;
    }
    let a = w.param("a")?;
    if a <= T::zero() {
        return None;
    }
    Some(Discrepancy {
        flag: STRETCHED_EXP_FLAG.to_string(),
        oracle_log_radius: T::zero(),
        estimated_log_radius: est.log_value,
        claimed_r_in: (-a).exp(),
        claimed_r_out: a.exp(),
        note: "ln||S^n|| = a n^b grows sublinearly, so the Gelfand limit is 1 \
               and the norms give the unit circle, not e^-a <= |z| <= e^a"
            .to_string(),
    })
}

/// Serializable radius report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RadiusReport<T: Real> {
    pub weight: String,
    pub direction: Direction,
    pub sequence: Vec<NormEntry<T>>,
    pub estimate: T,
    pub log_estimate: T,
    pub uncertainty: T,
    pub method: EstimateMethod,
    pub model: DecayModel<T>,
    pub fekete_bound: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<Discrepancy<T>>,
}

impl<T: Real> RadiusReport<T> {
    pub fn new(w: &Weight<T>, est: &SpectralRadiusEstimate<T>) -> Self {
        RadiusReport {
            weight: w.id().to_string(),
            direction: est.direction,
            sequence: est.sequence.entries.clone(),
            estimate: est.value,
            log_estimate: est.log_value,
            uncertainty: est.uncertainty,
            method: est.method,
            model: est.model,
            fekete_bound: est.fekete_bound,
            discrepancy: stretched_exp_discrepancy(w, est),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::make_builtin_weight;

    fn wt(name: &str, p: &[f64]) -> Weight<f64> {
        make_builtin_weight(name, p).unwrap()
    }

    #[test]
    fn shift_norm_examples() {
        let d = Interval::symmetric(50.0);
        let n = shift_norm(&wt("exp_linear", &[]), 3.0, &d, 0.01).unwrap();
        assert!((n - 3f64.exp()).abs() < 1e-12);
        assert_eq!(shift_norm(&wt("constant", &[]), -5.0, &d, 0.01).unwrap(), 1.0);
        let n = shift_norm(&wt("stretched_exp", &[1.0, 0.5]), 4.0, &d, 0.01).unwrap();
        assert!((n - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn radius_examples() {
        let e = spectral_radius(&wt("exp_linear", &[]), Direction::Forward, 64).unwrap();
        assert!((e.value - 1f64.exp()).abs() < 1e-9);
        assert!(e.uncertainty < 1e-9);
        assert_eq!(e.method, EstimateMethod::ClosedForm);
        assert_eq!(e.model, DecayModel::Constant);

        let b = spectral_radius(&wt("exp_linear", &[]), Direction::Backward, 64).unwrap();
        assert!((b.value - (-1f64).exp()).abs() < 1e-9);

        for dir in [Direction::Forward, Direction::Backward] {
            let c = spectral_radius(&wt("constant", &[]), dir, 8).unwrap();
            assert_eq!(c.value, 1.0);
            assert_eq!(c.uncertainty, 0.0);
        }

        let p = spectral_radius(&wt("polynomial", &[2.0]), Direction::Forward, 512).unwrap();
        assert!((p.value - 1.0).abs() < 1e-2, "{}", p.value);
        assert_eq!(p.method, EstimateMethod::FitExtrapolation);

        assert!(spectral_radius(&wt("constant", &[]), Direction::Forward, 7).is_err());
    }

    #[test]
    fn fekete_cap_holds() {
        for (name, p) in [
            ("polynomial", vec![2.0]),
            ("stretched_exp", vec![1.0, 0.5]),
            ("exp_over_log", vec![]),
            ("exp_poly", vec![1.0]),
        ] {
            let e = spectral_radius(&wt(name, &p), Direction::Forward, 64).unwrap();
            assert!(e.log_value <= e.sequence.fekete_bound() + 1e-9, "{name}");
            assert!(e.uncertainty >= 0.0);
            assert!(e.sequence.subadditivity_violation() <= 1e-9, "{name}");
        }
    }

    #[test]
    fn stretched_exp_picks_power_model() {
        let w = wt("stretched_exp", &[1.0, 0.5]);
        let e = spectral_radius(&w, Direction::Forward, 256).unwrap();
        match e.model {
            DecayModel::Power { beta } => assert!((beta - 0.5).abs() < 1e-3, "{beta}"),
            m => panic!("model {m:?}"),
        }
        assert!(e.log_value.abs() < 1e-3);
        for entry in &e.sequence.entries {
            assert!((entry.log_norm - (entry.n as f64).sqrt()).abs() < 1e-9);
        }
        let r = RadiusReport::new(&w, &e);
        assert_eq!(r.discrepancy.unwrap().flag, STRETCHED_EXP_FLAG);
        assert!(RadiusReport::new(&wt("exp_linear", &[]), &e).discrepancy.is_none());
    }

    #[test]
    fn strip_examples() {
        let s = strip(&wt("exp_linear", &[]), 64).unwrap();
        assert!((s.a_min - 1.0).abs() < 1e-9 && (s.a_max - 1.0).abs() < 1e-9);
        assert!(!s.interior_nonempty);

        let s = strip(&wt("constant", &[]), 16).unwrap();
        assert_eq!((s.a_min, s.a_max), (0.0, 0.0));

        let s = strip(&wt("exp_poly", &[0.0]), 64).unwrap();
        assert!((s.a_min + 1.0).abs() < 1e-9 && (s.a_max - 1.0).abs() < 1e-9);
        assert!(s.interior_nonempty);
    }

    #[test]
    fn annulus_matches_strip() {
        let an = analyze_strip(&wt("exp_linear", &[]), 64).unwrap();
        assert_eq!(an.annulus.r_out, an.strip.a_max.exp());
        assert_eq!(an.annulus.r_in, an.strip.a_min.exp());
        assert!((an.annulus.r_in - 1f64.exp()).abs() < 1e-6);

        let a = annulus(&wt("constant", &[]), 8).unwrap();
        assert_eq!((a.r_in, a.r_out), (1.0, 1.0));

        let a = annulus(&wt("polynomial", &[2.0]), 512).unwrap();
        assert!((a.r_in - 1.0).abs() < 1e-2 && (a.r_out - 1.0).abs() < 1e-2);
    }

    #[test]
    fn exp_over_log_strip_is_ordered() {
        let s = strip(&wt("exp_over_log", &[]), 64).unwrap();
        assert!(s.a_min <= s.a_max + 1e-9);
    }

    #[test]
    fn report_serializes() {
        let w = wt("exp_linear", &[]);
        let e = spectral_radius(&w, Direction::Forward, 8).unwrap();
        let r = RadiusReport::new(&w, &e);
        assert_eq!(r.sequence.len(), 8);
        assert_eq!(r.weight, w.id());
    }
}
