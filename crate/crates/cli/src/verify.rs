//! The aggregated invariant suite behind `annulus-kit verify`.

use annulus_core::function_space::{
    make_test_function, modulate, scale_exp, translate, weighted_norm, TestFunction,
};
use annulus_core::multipliers::{
    apply_convolution, commutation_residual, convolve_kernels, mollifier_demo, operator_norm_window,
    resolvent_neumann_with, GridOperator, Kernel, MultiplierOp, PositionMultiplier, ResolventOp,
};
use annulus_core::shift_analysis::analyze_strip;
use annulus_core::spectrum::{
    section_min_singular_value, spectrum_map, weyl_residual, PolarRaster, SpectrumContext,
};
use annulus_core::symbols::{extract_symbol, kernel_symbol, standard_probes, uniform_grid, weighted_ft};
use annulus_core::weights::{fit_h4, log_ratio_sup, make_builtin_weight, Interval};
use annulus_core::{Grid64, Weight64};
use num_complex::Complex64;
use serde::Serialize;

use crate::commands::{Outcome, COMMUTATION_TOL};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// `(measured, threshold, pass)`.
type Measured = (f64, f64, bool);

fn run(name: &str, weight: Option<&str>, f: impl FnOnce() -> Result<Measured, CliError>) -> Check {
    let (measured, threshold, pass, detail) = match f() {
        Ok((m, t, p)) => (m, t, p, None),
        Err(e) => (f64::NAN, f64::NAN, false, Some(e.to_string())),
    };
    Check {
        name: name.into(),
        weight: weight.map(str::to_string),
        measured,
        threshold,
        pass,
        detail,
    }
}

fn at_most(measured: f64, threshold: f64) -> Measured {
    (measured, threshold, measured <= threshold)
}

const RATIO_STEP: f64 = 0.01;

fn weight_checks(w: &Weight64, config: &RunConfig, checks: &mut Vec<Check>) {
    let id = Some(w.id());
    let domain = Interval::symmetric(100.0);
    let grid = config.grid();

    checks.push(run("ratio_sup_zero_offset", id, || {
        let v = log_ratio_sup(w, 0.0, &domain, RATIO_STEP)?;
        Ok((v.abs(), 0.0, v == 0.0))
    }));
    checks.push(run("ratio_sup_submultiplicative", id, || {
        let offsets = [-2.0, -1.0, -0.5, 0.5, 1.0, 3.0];
        let sups: Vec<f64> = offsets
            .iter()
            .map(|&t| log_ratio_sup(w, t, &domain, RATIO_STEP))
            .collect::<Result<_, _>>()?;
        let mut worst = f64::NEG_INFINITY;
        for (i, &t) in offsets.iter().enumerate() {
            for (j, &s) in offsets.iter().enumerate().skip(i) {
                let joint = log_ratio_sup(w, t + s, &domain, RATIO_STEP)?;
                worst = worst.max(joint - sups[i] - sups[j]);
            }
        }
        Ok(at_most(worst, 1e-9))
    }));
    if w.has_closed_form() {
        checks.push(run("closed_form_agreement", id, || {
            let mut worst: f64 = 0.0;
            for t in [-5.0, -2.0, -1.0, 1.0, 2.0, 5.0] {
                let exact = w.closed_form_log_ratio_sup(t).expect("closed form present");
                worst = worst.max((exact - log_ratio_sup(w, t, &domain, 1e-3)?).abs());
            }
            Ok(at_most(worst, 1e-6))
        }));
    }
    checks.push(run("growth_bound_holds", id, || {
        let t: Vec<f64> = (-20..=20).filter(|k| *k != 0).map(|k| f64::from(k) / 2.0).collect();
        Ok(at_most(fit_h4(w, &t, &domain)?.max_violation, 1e-12))
    }));
    let analysis = analyze_strip(w, config.n_max);
    checks.push(run("fekete_bound", id, || {
        let an = analysis.clone()?;
        let excess = [&an.forward, &an.backward]
            .iter()
            .map(|e| e.log_value - e.sequence.fekete_bound())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(at_most(excess, 1e-9))
    }));
    checks.push(run("strip_annulus_consistency", id, || {
        let an = analysis.clone()?;
        let (s, a) = (an.strip, an.annulus);
        let ok = s.a_min <= s.a_max && a.r_out == s.a_max.exp() && a.r_in == s.a_min.exp();
        Ok((s.a_max - s.a_min, 0.0, ok))
    }));
    checks.push(run("translation_norm_bound", id, || {
        let f = make_test_function(grid, TestFunction::GaussianTruncated { center: 0.0, sigma: 0.7 })?;
        let nf = weighted_norm(&f, w);
        let mut worst: f64 = 0.0;
        for t in [-2.0, -1.0, 1.0, 2.0] {
            let tf = translate(&f, t)?.exact()?;
            let cap = log_ratio_sup(w, t, &domain, grid.step())?.exp() * nf;
            worst = worst.max(weighted_norm(&tf, w) - cap);
        }
        Ok(at_most(worst, 1e-9))
    }));
    checks.push(run("modulation_isometry", id, || {
        let f = make_test_function(grid, TestFunction::bump(0.3, 2.0))?;
        let n0 = weighted_norm(&f, w);
        let worst = [1.3, -7.0]
            .iter()
            .map(|&a| (weighted_norm(&modulate(&f, a), w) - n0).abs() / n0)
            .fold(0.0, f64::max);
        Ok(at_most(worst, 1e-12))
    }));
}

fn builtin(name: &str, params: &[f64]) -> Result<Weight64, CliError> {
    Ok(make_builtin_weight(name, params)?)
}

fn space_checks(grid: Grid64, checks: &mut Vec<Check>) {
    checks.push(run("translation_composition", None, || {
        let f = make_test_function(grid, TestFunction::bump(0.5, 2.0))?;
        let two = translate(&translate(&f, 1.5)?.exact()?, -3.0)?.exact()?;
        let one = translate(&f, -1.5)?.exact()?;
        let d = two.sub(&one)?.max_abs();
        Ok((d, 0.0, d == 0.0))
    }));
    checks.push(run("exponential_scaling_round_trip", None, || {
        let f = make_test_function(grid, TestFunction::bump(-0.4, 3.0))?;
        let back = scale_exp(&scale_exp(&f, 2.0)?, -2.0)?;
        Ok(at_most(back.sub(&f)?.max_abs() / f.max_abs(), 1e-14))
    }));
}

fn multiplier_checks(config: &RunConfig, ks: &[(String, Kernel<f64>)], checks: &mut Vec<Check>) {
    let grid = config.grid();
    let shifts = [1.0, -1.0, 2.0, -2.0, 5.0, -5.0];
    checks.push(run("kernel_multiplicativity", None, || {
        let f = make_test_function(grid, TestFunction::bump(0.2, 1.5))?;
        let mut worst: f64 = 0.0;
        for (i, (_, phi)) in ks.iter().enumerate() {
            for (_, psi) in &ks[i..] {
                let two = apply_convolution(phi, &apply_convolution(psi, &f)?)?;
                let one = apply_convolution(&convolve_kernels(phi, psi)?, &f)?;
                worst = worst.max(two.sub(&one)?.max_abs() / one.max_abs().max(f64::MIN_POSITIVE));
            }
        }
        Ok(at_most(worst, 1e-9))
    }));
    let probes = standard_probes(grid);
    let e_abs = make_builtin_weight::<f64>("exp_poly", &[0.0]);
    let commutator = |op: &dyn GridOperator<f64>| -> Result<f64, CliError> {
        let (probes, w) = (probes.clone()?, e_abs.clone()?);
        let mut worst: f64 = 0.0;
        for t in shifts {
            worst = worst.max(commutation_residual(op, t, &probes, &w)?);
        }
        Ok(worst)
    };
    let kinds = || -> Result<Vec<MultiplierOp<f64>>, CliError> {
        let constant = builtin("constant", &[])?;
        let an = analyze_strip(&constant, 64)?;
        let mut ops: Vec<MultiplierOp<f64>> =
            ks.iter().map(|(_, k)| MultiplierOp::Convolution(k.clone())).collect();
        ops.push(MultiplierOp::Shift(1.5));
        ops.push(MultiplierOp::Resolvent(ResolventOp::new(
            &an,
            Complex64::new(2.0, 0.0),
            config.tolerances.tail_tol,
        )?));
        ops.push(MultiplierOp::Composition(ops[..2.min(ops.len())].to_vec()));
        Ok(ops)
    };
    checks.push(run("multipliers_commute", None, || {
        let mut worst: f64 = 0.0;
        for op in kinds()? {
            worst = worst.max(commutator(&op)?);
        }
        Ok(at_most(worst, COMMUTATION_TOL))
    }));
    checks.push(run("non_multiplier_detected", None, || {
        let r = commutator(&PositionMultiplier)?;
        Ok((r, 1e-2, r >= 1e-2))
    }));
    checks.push(run("convolution_theorem", None, || {
        let f = make_test_function(grid, TestFunction::bump(-0.3, 1.2))?;
        let t = uniform_grid(-10.0, 10.0, 81);
        let mut worst: f64 = 0.0;
        for (_, phi) in ks {
            let out = apply_convolution(phi, &f)?;
            for a in [-0.5, 0.0, 0.5] {
                let lhs = weighted_ft(&out, a, &t)?;
                let ff = weighted_ft(&f, a, &t)?;
                let rhs: Vec<Complex64> = t
                    .iter()
                    .zip(&ff)
                    .map(|(&tk, v)| kernel_symbol(phi, Complex64::new(tk, a)) * v)
                    .collect();
                let peak = rhs.iter().map(|v| v.norm()).fold(f64::MIN_POSITIVE, f64::max);
                for (l, r) in lhs.iter().zip(&rhs) {
                    worst = worst.max((l - r).norm() / peak);
                }
            }
        }
        Ok(at_most(worst, 1e-8))
    }));
    checks.push(run("kernel_symbol_real_line", None, || {
        let mut worst: f64 = 0.0;
        for (_, phi) in ks {
            for t in [-3.0, 0.0, 0.7, 5.0] {
                let a = kernel_symbol(phi, Complex64::new(t, 0.0));
                let b = weighted_ft(phi.function(), 0.0, &[t])?[0];
                worst = worst.max((a - b).norm());
            }
        }
        Ok((worst, 0.0, worst == 0.0))
    }));
    checks.push(run("symbol_probe_independence", None, || {
        let probes = probes.clone()?;
        let t = uniform_grid(-10.0, 10.0, 129);
        let mut worst: f64 = 0.0;
        for (_, phi) in ks {
            let op = MultiplierOp::Convolution(phi.clone());
            for a in [-0.5, 0.0, 0.5] {
                let line = extract_symbol(&op, a, &probes, &t, config.tolerances.floor)?;
                worst = worst.max(line.max_spread);
            }
        }
        Ok((worst, 1e-6, worst < 1e-6))
    }));
    checks.push(run("triangle_symbol_closed_form", None, || {
        let tri = Kernel::triangle(grid, 1.0)?;
        let worst = uniform_grid(-4.0, 4.0, 81)
            .into_iter()
            .map(|t: f64| {
                let exact = if t == 0.0 { 1.0 } else { ((t / 2.0).sin() / (t / 2.0)).powi(2) };
                (kernel_symbol(&tri, Complex64::new(t, 0.0)) - exact).norm()
            })
            .fold(0.0, f64::max);
        Ok(at_most(worst, 5e-3))
    }));
    checks.push(run("mollifier_strong_convergence", None, || {
        let psi = Kernel::bump(grid, 0.0, 1.0)?;
        let w = builtin("constant", &[])?;
        let window = (grid.half_width() / 2.0).min(16.0);
        let demo = mollifier_demo(&psi, &w, &probes.clone()?, &[1, 2, 4], window, 1e-8)?;
        let first = demo.steps.first().map_or(f64::NAN, |s| s.strong_residual);
        let last = demo.steps.last().map_or(f64::NAN, |s| s.strong_residual);
        Ok((last, first, demo.monotone))
    }));
    checks.push(run("norm_window_monotone", None, || {
        let w = builtin("exp_poly", &[1.0])?;
        let op = MultiplierOp::Convolution(Kernel::triangle(grid, 1.0)?);
        let l = grid.half_width();
        let norms: Vec<f64> = [l / 8.0, l / 4.0, l / 2.0]
            .iter()
            .map(|&win| Ok(operator_norm_window(&op, &w, &grid, win, 1e-9)?.value))
            .collect::<Result<_, CliError>>()?;
        let drop = norms.windows(2).map(|p| (p[0] - p[1]) / p[0]).fold(f64::NEG_INFINITY, f64::max);
        Ok(at_most(drop, 1e-8))
    }));
}

fn spectrum_checks(config: &RunConfig, checks: &mut Vec<Check>) {
    let grid = config.grid();
    let tail_tol = config.tolerances.tail_tol;
    checks.push(run("resolvent_identity", None, || {
        let w = builtin("constant", &[])?;
        let an = analyze_strip(&w, 64)?;
        let mut worst: f64 = 0.0;
        for z in [2.0, 0.5] {
            for f in standard_probes(grid)? {
                let r = resolvent_neumann_with(&an, &w, Complex64::new(z, 0.0), &f, tail_tol)?;
                worst = worst.max(r.residual);
            }
        }
        Ok(at_most(worst, 10.0 * tail_tol))
    }));
    checks.push(run("weyl_residual_law", None, || {
        let w = builtin("constant", &[])?;
        let mut worst: f64 = 0.0;
        for l0 in [64.0, 100.0] {
            for b in [0.0, 1.0, 2.5] {
                let r = weyl_residual(&w, grid, Complex64::from_polar(1.0, b), l0, 0.0)?;
                worst = worst.max((r * f64::sqrt(l0) - 1.0).abs());
            }
        }
        Ok((worst, 0.02, worst < 0.02))
    }));
    checks.push(run("certifier_consistency", None, || {
        let mut contradictions = 0;
        for (name, p) in [("constant", vec![]), ("exp_linear", vec![]), ("exp_poly", vec![0.0])] {
            let ctx = SpectrumContext::with_n_max(builtin(name, &p)?, grid, 64)?;
            let a = ctx.annulus();
            let raster = PolarRaster {
                n_r: 9,
                n_theta: 4,
                ..PolarRaster::new(a.r_in / 2.0, a.r_out * 1.5)
            }
            .with_extra_radii([a.r_in, a.r_out]);
            contradictions += spectrum_map(&ctx, &raster.points())?.contradictions;
        }
        Ok((contradictions as f64, 0.0, contradictions == 0))
    }));
    checks.push(run("finite_section_pollution", None, || {
        let w = builtin("constant", &[])?;
        let at_zero = section_min_singular_value(&w, 256, Complex64::new(0.0, 0.0));
        let outside = section_min_singular_value(&w, 256, Complex64::new(1.5, 0.0));
        Ok((at_zero, 1e-12, at_zero < 1e-12 && outside >= 0.5 - 1e-3))
    }));
}

#[derive(Debug, Serialize)]
pub struct VerifyBody {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

pub fn run_checks(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let grid = config.grid();
    let weights: Vec<Weight64> = config.weights.iter().map(|w| w.build()).collect::<Result<_, _>>()?;
    if config.kernels.is_empty() {
        return Err(CliError::Config("no kernels configured".into()));
    }
    let mut checks = Vec::new();
    for w in &weights {
        weight_checks(w, config, &mut checks);
    }
    space_checks(grid, &mut checks);
    match config
        .kernels
        .iter()
        .map(|k| Ok((k.to_string(), k.build(grid)?)))
        .collect::<Result<Vec<_>, CliError>>()
    {
        Ok(ks) => multiplier_checks(config, &ks, &mut checks),
        Err(e) => checks.push(run("kernels_build", None, || Err(e))),
    }
    spectrum_checks(config, &mut checks);
    Ok(checks)
}

pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, CliError> {
    let checks = run_checks(config)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let lines = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}{} measured={:e} threshold={:e}{}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.weight.as_deref().map(|w| format!(" [{w}]")).unwrap_or_default(),
                c.measured,
                c.threshold,
                c.detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
            )
        })
        .collect();
    let body = VerifyBody {
        passed: checks.len() - failed,
        failed,
        checks,
    };
    let pass = failed == 0;
    let report = Report::new("verify", config, pass, body).write(&config.out)?;
    Ok(Outcome { pass, lines, report })
}
