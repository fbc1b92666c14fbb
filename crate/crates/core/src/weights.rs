//! Weight functions on the real line and the checks that make them usable as
//! weights of an `L^2_w(R)` space.
//!
//! A weight is stored through its logarithm `ln w(x)`, which keeps every
//! ratio `w(x + t) / w(x)` computable as a difference without overflow. The
//! translation `S_t` on `L^2_w` has norm `sup_x w(x + t) / w(x)`, so the
//! sampled supremum of the log ratio is the quantity everything downstream is
//! built on.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

type LogFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Interval<T: Real> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half: T) -> Self {
        Self { lo: -half, hi: half }
    }

    pub fn doubled(&self) -> Self {
        let mid = (self.lo + self.hi) / lit(2.0);
        let half = self.hi - self.lo;
        Self {
            lo: mid - half,
            hi: mid + half,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Uniform sampling used for every sampled supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Sampling<T: Real> {
    pub domain: Interval<T>,
    pub step: T,
}

impl<T: Real> Default for Sampling<T> {
    fn default() -> Self {
        Self {
            domain: Interval::symmetric(lit(200.0)),
            step: lit(1e-2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamily {
    Constant,
    ExpLinear,
    Polynomial,
    StretchedExp,
    ExpOverLog,
    ExpPoly,
    Table,
    Custom,
}

impl WeightFamily {
    pub fn catalogue_name(self) -> &'static str {
        match self {
            WeightFamily::Constant => "constant",
            WeightFamily::ExpLinear => "exp_linear",
            WeightFamily::Polynomial => "polynomial",
            WeightFamily::StretchedExp => "stretched_exp",
            WeightFamily::ExpOverLog => "exp_over_log",
            WeightFamily::ExpPoly => "exp_poly",
            WeightFamily::Table => "table",
            WeightFamily::Custom => "custom",
        }
    }

    /// Positional parameter names of the catalogue families.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            WeightFamily::Polynomial => &["alpha"],
            WeightFamily::StretchedExp => &["a", "b"],
            WeightFamily::ExpPoly => &["n"],
            _ => &[],
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "constant" => WeightFamily::Constant,
            "exp_linear" => WeightFamily::ExpLinear,
            "polynomial" => WeightFamily::Polynomial,
            "stretched_exp" => WeightFamily::StretchedExp,
            "exp_over_log" => WeightFamily::ExpOverLog,
            "exp_poly" => WeightFamily::ExpPoly,
            _ => return None,
        })
    }
}

/// A positive weight `w` on `R`, represented by `ln w`.
#[derive(Clone)]
pub struct Weight<T: Real> {
    id: String,
    family: WeightFamily,
    params: Vec<(String, T)>,
    log_weight: LogFn<T>,
    closed_form: Option<LogFn<T>>,
}

impl<T: Real> fmt::Debug for Weight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("id", &self.id)
            .field("family", &self.family)
            .field("params", &self.params)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl<T: Real> Weight<T> {
    /// Weight from an arbitrary log-weight function.
    pub fn from_log_fn<F>(id: impl Into<String>, log_weight: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            family: WeightFamily::Custom,
            params: Vec::new(),
            log_weight: Arc::new(log_weight),
            closed_form: None,
        }
    }

    /// Attaches `t -> sup_x [ln w(x + t) - ln w(x)]` in closed form.
    pub fn with_closed_form<F>(mut self, ratio_sup: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        self.closed_form = Some(Arc::new(ratio_sup));
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn params(&self) -> &[(String, T)] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<T> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    #[inline]
    pub fn log_weight(&self, x: T) -> T {
        (self.log_weight)(x)
    }

    #[inline]
    pub fn weight(&self, x: T) -> T {
        self.log_weight(x).exp()
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn closed_form_log_ratio_sup(&self, t: T) -> Option<T> {
        self.closed_form.as_ref().map(|f| f(t))
    }

    /// The weight `1 / w`. Norms of `L^2_{1/w}` describe the adjoint of a
    /// translation on `L^2_w`.
    pub fn reciprocal(&self) -> Self {
        let lw = self.log_weight.clone();
        let closed = self.closed_form.clone().map(|cf| {
            let f: LogFn<T> = Arc::new(move |t: T| cf(-t));
            f
        });
        Self {
            id: format!("1/{}", self.id),
            family: WeightFamily::Custom,
            params: self.params.clone(),
            log_weight: Arc::new(move |x| -lw(x)),
            closed_form: closed,
        }
    }

    /// Tabulated weight: linear interpolation of `ln w` between the points,
    /// held constant beyond the first and last abscissa.
    pub fn from_log_table(id: impl Into<String>, mut points: Vec<(T, T)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidWeight(
                "a weight table needs at least two rows".into(),
            ));
        }
        for &(x, lw) in &points {
            if !x.is_finite() || !lw.is_finite() {
                return Err(Error::InvalidWeight(format!(
                    "non-finite table entry ln w({}) = {}",
                    x, lw
                )));
            }
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        if points.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidWeight(
                "duplicate abscissa in weight table".into(),
            ));
        }
        let xs: Vec<T> = points.iter().map(|p| p.0).collect();
        let ys: Vec<T> = points.iter().map(|p| p.1).collect();
        let lookup = move |x: T| -> T {
            let n = xs.len();
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let i = xs.partition_point(|&v| v <= x) - 1;
            let s = (x - xs[i]) / (xs[i + 1] - xs[i]);
            ys[i] + s * (ys[i + 1] - ys[i])
        };
        Ok(Self {
            id: id.into(),
            family: WeightFamily::Table,
            params: Vec::new(),
            log_weight: Arc::new(lookup),
            closed_form: None,
        })
    }

    /// Reads a two-column CSV table. Rows are `x, ln w(x)`. A header row whose
    /// second column is named `omega` (or `w`) switches to raw weight values,
    /// which must then be strictly positive. Lines starting with `#` are
    /// ignored.
    pub fn from_table_csv<R: Read>(id: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut raw_values = false;
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!(
                    "weight table row {} has {} columns, expected 2",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(v)) => {
                    let lw = if raw_values {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::InvalidWeight(format!(
                                "weight sample w({x}) = {v} is not positive"
                            )));
                        }
                        v.ln()
                    } else {
                        v
                    };
                    points.push((T::lit(x), T::lit(lw)));
                }
                _ if row == 0 => {
                    let col = rec[1].to_ascii_lowercase();
                    raw_values = col == "omega" || col == "w";
                }
                _ => {
                    return Err(Error::Parse(format!(
                        "weight table row {} is not numeric",
                        row + 1
                    )))
                }
            }
        }
        Self::from_log_table(id, points)
    }
}

/// Largest value of `(1 + (x + t)^2) / (1 + x^2)` over `x`; the positive root
/// of `l^2 - (t^2 + 2) l + 1 = 0`.
fn quadratic_ratio_max<T: Real>(t: T) -> T {
    let t2 = t * t;
    ((t2 + lit(2.0)) + t.abs() * (t2 + lit(4.0)).sqrt()) / lit(2.0)
}

/// Builds one of the catalogue weights.
///
/// | name | params | `ln w(x)` |
/// |---|---|---|
/// | `constant` | – | `0` |
/// | `exp_linear` | – | `x` |
/// | `polynomial` | `alpha >= 0` | `ln(1 + |x|^alpha)` |
/// | `stretched_exp` | `a >= 0, 0 < b < 1` | `a |x|^b` |
/// | `exp_over_log` | – | `|x| / ln(2 + |x|)` |
/// | `exp_poly` | `n >= 0` | `|x| + n ln(1 + x^2)` |
pub fn make_builtin_weight<T: Real>(name: &str, params: &[T]) -> Result<Weight<T>> {
    let family = WeightFamily::from_name(name).ok_or_else(|| Error::UnknownWeight(name.into()))?;
    let names = family.param_names();
    let bad = |reason: String| Error::InvalidParams {
        family: name.into(),
        reason,
    };
    if params.len() != names.len() {
        return Err(bad(format!(
            "expected {} parameter(s) {:?}, got {}",
            names.len(),
            names,
            params.len()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(bad("parameters must be finite".into()));
    }
    let named: Vec<(String, T)> = names
        .iter()
        .zip(params)
        .map(|(n, v)| (n.to_string(), *v))
        .collect();
    let id = if named.is_empty() {
        name.to_string()
    } else {
        let body: Vec<String> = named.iter().map(|(n, v)| format!("{n}={v}")).collect();
        format!("{name}({})", body.join(","))
    };

    let (log_weight, closed): (LogFn<T>, Option<LogFn<T>>) = match family {
        WeightFamily::Constant => (Arc::new(|_| T::zero()), Some(Arc::new(|_| T::zero()))),
        WeightFamily::ExpLinear => (Arc::new(|x| x), Some(Arc::new(|t| t))),
        WeightFamily::Polynomial => {
            let alpha = params[0];
            if alpha < T::zero() {
                return Err(bad(format!(
                    "alpha = {alpha} < 0 makes w unbounded at 0 and the ratio sup infinite"
                )));
            }
            let lw: LogFn<T> = if alpha == T::zero() {
                Arc::new(|_| lit::<T>(2.0).ln())
            } else {
                Arc::new(move |x: T| x.abs().powf(alpha).ln_1p())
            };
            let closed: Option<LogFn<T>> = if alpha == T::zero() {
                Some(Arc::new(|_| T::zero()))
            } else if alpha <= T::one() {
                // |x + t|^alpha <= |x|^alpha + |t|^alpha, equality at x = 0
                Some(Arc::new(move |t: T| t.abs().powf(alpha).ln_1p()))
            } else if alpha == lit(2.0) {
                Some(Arc::new(|t: T| quadratic_ratio_max(t).ln()))
            } else {
                None
            };
            (lw, closed)
        }
        WeightFamily::StretchedExp => {
            let (a, b) = (params[0], params[1]);
            if a < T::zero() {
                return Err(bad(format!("a = {a} must be >= 0")));
            }
            if !(b > T::zero() && b < T::one()) {
                return Err(bad(format!("b = {b} must lie in (0, 1)")));
            }
            // concavity of |.|^b: sup_x |x + t|^b - |x|^b = |t|^b at x = 0
            (
                Arc::new(move |x: T| a * x.abs().powf(b)),
                Some(Arc::new(move |t: T| a * t.abs().powf(b))),
            )
        }
        WeightFamily::ExpOverLog => (
            Arc::new(|x: T| x.abs() / (lit::<T>(2.0) + x.abs()).ln()),
            None,
        ),
        WeightFamily::ExpPoly => {
            let n = params[0];
            if n < T::zero() {
                return Err(bad(format!("n = {n} must be >= 0")));
            }
            // both terms peak on the same side of the origin
            (
                Arc::new(move |x: T| x.abs() + n * (x * x).ln_1p()),
                Some(Arc::new(move |t: T| {
                    if n == T::zero() {
                        t.abs()
                    } else {
                        t.abs() + n * quadratic_ratio_max(t).ln()
                    }
                })),
            )
        }
        WeightFamily::Table | WeightFamily::Custom => unreachable!("not a catalogue name"),
    };

    Ok(Weight {
        id,
        family,
        params: named,
        log_weight,
        closed_form: closed,
    })
}

fn grid_indices<T: Real>(domain: &Interval<T>, step: T) -> Result<(i64, i64)> {
    if !(step > T::zero()) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step {step} must be > 0")));
    }
    if !(domain.lo <= domain.hi) {
        return Err(Error::InvalidArgument(format!(
            "empty domain [{}, {}]",
            domain.lo, domain.hi
        )));
    }
    let k0 = (domain.lo / step).ceil().to_i64().unwrap_or(i64::MIN);
    let k1 = (domain.hi / step).floor().to_i64().unwrap_or(i64::MAX);
    if k1 < k0 {
        return Err(Error::InvalidArgument(
            "domain contains no sample point".into(),
        ));
    }
    Ok((k0, k1))
}

/// `max_x [ln w(x + t) - ln w(x)]` over the points `x = k * step` in `domain`.
///
/// Sampling at integer multiples of `step` keeps `x = 0` on the grid, where
/// several catalogue weights attain their supremum.
pub fn log_ratio_sup<T: Real>(w: &Weight<T>, t: T, domain: &Interval<T>, step: T) -> Result<T> {
    let (k0, k1) = grid_indices(domain, step)?;
    let mut best = T::neg_infinity();
    for k in k0..=k1 {
        let x = T::from_i64(k).expect("index") * step;
        let d = w.log_weight(x + t) - w.log_weight(x);
        if !d.is_finite() {
            return Err(Error::InvalidWeight(format!(
                "{}: non-finite log ratio at x = {}, t = {}",
                w.id(),
                x,
                t
            )));
        }
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct WeightConditionEntry<T: Real> {
    pub offset: T,
    pub sup: T,
    pub sup_doubled: T,
    pub relative_change: T,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct WeightConditionReport<T: Real> {
    pub weight: String,
    pub domain: Interval<T>,
    pub step: T,
    pub entries: Vec<WeightConditionEntry<T>>,
    pub all_stable: bool,
}

/// Relative change under which a sampled supremum counts as converged when
/// the probe domain is doubled.
pub const STABILITY_TOL: f64 = 1e-3;

/// Samples the weight condition `sup_x w(x + y) / w(x) < inf` for each offset
/// on `domain` and on the doubled domain.
///
/// A sampled check can only falsify the condition; stability under domain
/// doubling is what gets reported.
pub fn check_weight_condition<T: Real>(
    w: &Weight<T>,
    offsets: &[T],
    domain: &Interval<T>,
) -> Result<WeightConditionReport<T>> {
    check_weight_condition_with(w, offsets, domain, Sampling::<T>::default().step)
}

pub fn check_weight_condition_with<T: Real>(
    w: &Weight<T>,
    offsets: &[T],
    domain: &Interval<T>,
    step: T,
) -> Result<WeightConditionReport<T>> {
    let doubled = domain.doubled();
    let mut entries = Vec::with_capacity(offsets.len());
    for &y in offsets {
        let sup = log_ratio_sup(w, y, domain, step)?;
        let sup_doubled = log_ratio_sup(w, y, &doubled, step)?;
        let diff = (sup_doubled - sup).abs();
        let scale = sup.abs().max(sup_doubled.abs());
        let relative_change = if diff == T::zero() {
            T::zero()
        } else {
            diff / scale
        };
        entries.push(WeightConditionEntry {
            offset: y,
            sup,
            sup_doubled,
            relative_change,
            stable: relative_change < lit(STABILITY_TOL),
        });
    }
    let all_stable = entries.iter().all(|e| e.stable);
    Ok(WeightConditionReport {
        weight: w.id().to_string(),
        domain: *domain,
        step,
        entries,
        all_stable,
    })
}

/// Growth bound `ln ||S_t|| <= log_c + m |t|` fitted on a set of offsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct H4Fit<T: Real> {
    pub log_c: T,
    pub m: T,
    /// Amount the fitted intercept was raised so the bound holds at every
    /// probed offset.
    pub intercept_slack: T,
    /// Largest remaining excess `ln ||S_t|| - log_c - m |t|` (clamped at 0).
    pub max_violation: T,
    pub t_range: Interval<T>,
}

/// Fits the exponential growth bound of the translation group.
///
/// The data are `ln ||S_t||` folded onto `s = |t|` by taking the larger of the
/// two signs. The line is the least-gap upper envelope: among all lines lying
/// above every point it minimises the summed gap, which is the supporting
/// line of the upper convex hull at the mean of `s`. The intercept slack then
/// absorbs rounding so the bound holds pointwise.
pub fn fit_h4<T: Real>(w: &Weight<T>, t_grid: &[T], domain: &Interval<T>) -> Result<H4Fit<T>> {
    fit_h4_with(w, t_grid, domain, Sampling::<T>::default().step)
}

pub fn fit_h4_with<T: Real>(
    w: &Weight<T>,
    t_grid: &[T],
    domain: &Interval<T>,
    step: T,
) -> Result<H4Fit<T>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let has_neg = t_grid.iter().any(|&t| t < T::zero());
    let has_pos = t_grid.iter().any(|&t| t > T::zero());
    if !(has_neg && has_pos) {
        return Err(Error::InvalidArgument(
            "t grid must contain offsets of both signs".into(),
        ));
    }
    let mut samples: Vec<(T, T)> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        samples.push((t, log_ratio_sup(w, t, domain, step)?));
    }

    // envelope e(s) = max over t with |t| = s
    let mut env: Vec<(T, T)> = samples.iter().map(|&(t, y)| (t.abs(), y)).collect();
    env.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let mut folded: Vec<(T, T)> = Vec::new();
    for (s, y) in env {
        match folded.last_mut() {
            Some(last) if last.0 == s => last.1 = last.1.max(y),
            _ => folded.push((s, y)),
        }
    }
    // upper hull (monotone chain)
    let mut hull: Vec<(T, T)> = Vec::new();
    for p in folded {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let n = T::from_usize_lossy(samples.len());
    let mean_s = samples.iter().map(|&(t, _)| t.abs()).sum::<T>() / n;
    let (mut log_c, m) = if hull.len() == 1 {
        (hull[0].1, T::zero())
    } else {
        let idx = hull
            .windows(2)
            .position(|e| e[0].0 <= mean_s && mean_s <= e[1].0)
            .unwrap_or(hull.len() - 2);
        let (a, b) = (hull[idx], hull[idx + 1]);
        let slope = (b.1 - a.1) / (b.0 - a.0);
        (a.1 - slope * a.0, slope)
    };
    let excess = samples
        .iter()
        .map(|&(t, y)| y - log_c - m * t.abs())
        .fold(T::neg_infinity(), T::max);
    let intercept_slack = excess.max(T::zero());
    log_c = log_c + intercept_slack;
    let max_violation = samples
        .iter()
        .map(|&(t, y)| y - log_c - m * t.abs())
        .fold(T::zero(), T::max);
    let lo = t_grid.iter().copied().fold(T::infinity(), T::min);
    let hi = t_grid.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(H4Fit {
        log_c,
        m,
        intercept_slack,
        max_violation,
        t_range: Interval::new(lo, hi),
    })
}
