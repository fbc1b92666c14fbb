use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use annulus_core::multipliers::{commutation_residual, operator_norm, Kernel, MultiplierOp};
use annulus_core::shift_analysis::{analyze_strip, RadiusReport, StripAnalysis};
use annulus_core::spectrum::{
    finite_section_pseudospectrum, spectrum_map, PolarRaster, PseudoRaster, SpectrumContext, VerdictCounts,
};
use annulus_core::symbols::{
    extract_strip, standard_probes, strip_line_samples, verify_thm4_bound, SymbolLineRecord, Thm4Report,
};
use annulus_core::weights::{check_weight_condition, fit_h4, H4Fit, Interval, WeightConditionReport};
use annulus_core::{Annulus, Strip, Weight64};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{artifact_dir, Report};

/// What a command hands back to `main`.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub lines: Vec<String>,
    pub report: PathBuf,
}

fn weights(config: &RunConfig) -> Result<Vec<Weight64>, CliError> {
    config.weights.iter().map(|w| w.build()).collect()
}

fn kernels(config: &RunConfig) -> Result<Vec<(String, Kernel<f64>)>, CliError> {
    if config.kernels.is_empty() {
        return Err(CliError::Config("no kernels configured".into()));
    }
    let grid = config.grid();
    config
        .kernels
        .iter()
        .map(|k| Ok((k.to_string(), k.build(grid)?)))
        .collect()
}

fn finish<B: Serialize>(
    command: &str,
    config: &RunConfig,
    pass: bool,
    body: B,
    lines: Vec<String>,
) -> Result<Outcome, CliError> {
    let report = Report::new(command, config, pass, body).write(&config.out)?;
    Ok(Outcome { pass, lines, report })
}

#[derive(Debug, Serialize)]
pub struct WeightEntry {
    pub weight: String,
    pub condition: WeightConditionReport<f64>,
    pub h4: H4Fit<f64>,
    pub bound_holds: bool,
    pub pass: bool,
}

/// Offsets `-5..=5` on `[-100, 100]` for the condition, `|t| <= 10` in steps
/// of `1/2` for the growth bound.
pub fn cmd_weight(config: &RunConfig) -> Result<Outcome, CliError> {
    let offsets: Vec<f64> = (-5..=5).map(f64::from).collect();
    let t_grid: Vec<f64> = (-20..=20).filter(|k| *k != 0).map(|k| f64::from(k) / 2.0).collect();
    let domain = Interval::symmetric(100.0);
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for w in weights(config)? {
        let condition = check_weight_condition(&w, &offsets, &domain)?;
        let h4 = fit_h4(&w, &t_grid, &domain)?;
        let bound_holds = h4.max_violation <= 1e-12;
        let pass = condition.all_stable && bound_holds;
        lines.push(format!(
            "{:<24} stable={} C=e^{:.6} m={:.6} {}",
            w.id(),
            condition.all_stable,
            h4.log_c,
            h4.m,
            if pass { "ok" } else { "FAIL" }
        ));
        entries.push(WeightEntry {
            weight: w.id().into(),
            condition,
            h4,
            bound_holds,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    finish("weight", config, pass, entries, lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumWhat {
    Radius,
    Strip,
    Annulus,
}

#[derive(Debug, Serialize)]
pub struct RadiusEntry {
    pub forward: RadiusReport<f64>,
    pub backward: RadiusReport<f64>,
}

#[derive(Debug, Serialize)]
pub struct StripEntry {
    pub weight: String,
    pub strip: Strip<f64>,
    pub forward_log_radius: f64,
    pub backward_log_radius: f64,
}

#[derive(Debug, Serialize)]
pub struct AnnulusEntry {
    pub weight: String,
    pub annulus: Annulus<f64>,
}

fn analyses(config: &RunConfig) -> Result<Vec<(Weight64, StripAnalysis<f64>)>, CliError> {
    weights(config)?
        .into_iter()
        .map(|w| {
            let an = analyze_strip(&w, config.n_max)?;
            Ok((w, an))
        })
        .collect()
}

pub fn cmd_spectrum(config: &RunConfig, what: SpectrumWhat) -> Result<Outcome, CliError> {
    let all = analyses(config)?;
    let mut lines = Vec::new();
    match what {
        SpectrumWhat::Radius => {
            let body: Vec<RadiusEntry> = all
                .iter()
                .map(|(w, an)| {
                    let e = RadiusEntry {
                        forward: RadiusReport::new(w, &an.forward),
                        backward: RadiusReport::new(w, &an.backward),
                    };
                    lines.push(format!(
                        "{:<24} rho(S)={:.9} rho(S^-1)={:.9}{}",
                        w.id(),
                        e.forward.estimate,
                        e.backward.estimate,
                        e.forward
                            .discrepancy
                            .as_ref()
                            .map(|d| format!(" [{}]", d.flag))
                            .unwrap_or_default()
                    ));
                    e
                })
                .collect();
            finish("spectrum radius", config, true, body, lines)
        }
        SpectrumWhat::Strip => {
            let body: Vec<StripEntry> = all
                .iter()
                .map(|(w, an)| {
                    let s = an.strip;
                    lines.push(format!(
                        "{:<24} a in [{:.9}, {:.9}] +- ({:.2e}, {:.2e}){}",
                        w.id(),
                        s.a_min,
                        s.a_max,
                        s.u_min,
                        s.u_max,
                        if s.projected { " projected" } else { "" }
                    ));
                    StripEntry {
                        weight: w.id().into(),
                        strip: s,
                        forward_log_radius: an.forward.log_value,
                        backward_log_radius: an.backward.log_value,
                    }
                })
                .collect();
            let pass = body.iter().all(|e| e.strip.a_min <= e.strip.a_max);
            finish("spectrum strip", config, pass, body, lines)
        }
        SpectrumWhat::Annulus => {
            let body: Vec<AnnulusEntry> = all
                .iter()
                .map(|(w, an)| {
                    let a = an.annulus;
                    lines.push(format!(
                        "{:<24} r in [{:.9}, {:.9}] +- {:.2e}",
                        w.id(),
                        a.r_in,
                        a.r_out,
                        a.u
                    ));
                    AnnulusEntry {
                        weight: w.id().into(),
                        annulus: a,
                    }
                })
                .collect();
            finish("spectrum annulus", config, true, body, lines)
        }
    }
}

/// Raster options shared by `map` and `pseudo`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RasterOptions {
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub n_r: Option<usize>,
    pub n_theta: Option<usize>,
}

impl RasterOptions {
    /// Defaults to `[r_in / 2, 3 r_out / 2]` with the annulus radii added.
    fn raster(&self, an: &Annulus<f64>) -> Result<PolarRaster<f64>, CliError> {
        let r_min = self.r_min.unwrap_or(an.r_in / 2.0);
        let r_max = self.r_max.unwrap_or(an.r_out * 1.5);
        if !(r_min >= 0.0 && r_min < r_max) {
            return Err(CliError::Config(format!("raster radii [{r_min}, {r_max}] are empty")));
        }
        let mut raster = PolarRaster::new(r_min, r_max).with_extra_radii([an.r_in, an.r_out]);
        raster.n_r = self.n_r.unwrap_or(raster.n_r).max(2);
        raster.n_theta = self.n_theta.unwrap_or(raster.n_theta).max(1);
        Ok(raster)
    }
}

#[derive(Debug, Serialize)]
pub struct MapEntry {
    pub weight: String,
    pub annulus: Annulus<f64>,
    pub raster: PolarRaster<f64>,
    pub counts: VerdictCounts,
    pub contradictions: usize,
    pub inside_band: Option<(f64, f64)>,
    pub band_matches: bool,
    pub raster_file: PathBuf,
}

pub fn cmd_spectrum_map(config: &RunConfig, opts: RasterOptions) -> Result<Outcome, CliError> {
    let grid = config.grid();
    let all = analyses(config)?;
    let many = all.len() > 1;
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for (w, an) in all {
        let raster = opts.raster(&an.annulus)?;
        let mut ctx = SpectrumContext::from_analysis(w, grid, an);
        ctx.tail_tol = config.tolerances.tail_tol;
        let map = spectrum_map(&ctx, &raster.points())?;
        let dir = artifact_dir(&config.out, ctx.weight.id(), many)?;
        let raster_file = dir.join("raster.tsv");
        let mut out = BufWriter::new(File::create(&raster_file)?);
        map.write_tsv(&mut out)?;
        out.flush()?;
        let band_matches = map.band_matches(raster.cell());
        lines.push(format!(
            "{:<24} inside={} outside={} undecided={} contradictions={} band={:?} matches={}",
            map.weight,
            map.counts.certified_inside,
            map.counts.certified_outside,
            map.counts.undecided,
            map.contradictions,
            map.inside_band(),
            band_matches
        ));
        body.push(MapEntry {
            weight: map.weight.clone(),
            annulus: map.annulus,
            inside_band: map.inside_band(),
            raster,
            counts: map.counts,
            contradictions: map.contradictions,
            band_matches,
            raster_file,
        });
    }
    let pass = body.iter().all(|e| e.contradictions == 0);
    finish("spectrum map", config, pass, body, lines)
}

#[derive(Debug, Serialize)]
pub struct PseudoEntry {
    pub weight: String,
    pub annulus: Annulus<f64>,
    pub raster: PolarRaster<f64>,
    pub result: PseudoRaster<f64>,
    pub raster_file: PathBuf,
}

pub fn cmd_spectrum_pseudo(
    config: &RunConfig,
    opts: RasterOptions,
    size: usize,
    epsilon: f64,
) -> Result<Outcome, CliError> {
    if !(epsilon > 0.0) {
        return Err(CliError::Config(format!("epsilon = {epsilon} must be > 0")));
    }
    let all = analyses(config)?;
    let many = all.len() > 1;
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for (w, an) in all {
        let raster = opts.raster(&an.annulus)?;
        let result = finite_section_pseudospectrum(&w, size, &raster.points(), epsilon)?;
        let dir = artifact_dir(&config.out, w.id(), many)?;
        let raster_file = dir.join("pseudo.tsv");
        let mut out = BufWriter::new(File::create(&raster_file)?);
        writeln!(out, "# {}: {}", result.label, result.caveat)?;
        writeln!(out, "# re_z\tim_z\ts_min\tin_pseudospectrum")?;
        for e in &result.entries {
            writeln!(out, "{}\t{}\t{}\t{}", e.z.re, e.z.im, e.s_min, u8::from(e.in_pseudospectrum))?;
        }
        out.flush()?;
        let hits = result.entries.iter().filter(|e| e.in_pseudospectrum).count();
        lines.push(format!(
            "{:<24} DIAGNOSTIC n={} eps={:e}: {}/{} points with s_min < eps",
            w.id(),
            size,
            epsilon,
            hits,
            result.entries.len()
        ));
        body.push(PseudoEntry {
            weight: w.id().into(),
            annulus: an.annulus,
            raster,
            result,
            raster_file,
        });
    }
    finish("spectrum pseudo", config, true, body, lines)
}

#[derive(Debug, Serialize)]
pub struct NormEntry {
    pub weight: String,
    pub kernel: String,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn cmd_multiplier_norm(config: &RunConfig) -> Result<Outcome, CliError> {
    let grid = config.grid();
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for w in weights(config)? {
        for (name, k) in kernels(config)? {
            let est = operator_norm(&MultiplierOp::Convolution(k), &w, &grid, config.tolerances.rel_tol)?;
            lines.push(format!("{:<24} {:<20} ||M|| = {:.9}", w.id(), name, est.value));
            body.push(NormEntry {
                weight: w.id().into(),
                kernel: name,
                value: est.value,
                iterations: est.iterations,
                converged: est.converged,
            });
        }
    }
    let pass = body.iter().all(|e| e.converged);
    finish("multiplier norm", config, pass, body, lines)
}

pub const COMMUTATION_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
pub struct CommuteEntry {
    pub weight: String,
    pub kernel: String,
    pub shift: f64,
    pub residual: f64,
    pub pass: bool,
}

pub fn cmd_multiplier_commute(config: &RunConfig, shifts: &[f64]) -> Result<Outcome, CliError> {
    let grid = config.grid();
    let probes = standard_probes(grid)?;
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for w in weights(config)? {
        for (name, k) in kernels(config)? {
            let op = MultiplierOp::Convolution(k);
            for &t in shifts {
                let residual = commutation_residual(&op, t, &probes, &w)?;
                let pass = residual <= COMMUTATION_TOL;
                lines.push(format!("{:<24} {:<20} t={:<5} residual={:.3e}", w.id(), name, t, residual));
                body.push(CommuteEntry {
                    weight: w.id().into(),
                    kernel: name.clone(),
                    shift: t,
                    residual,
                    pass,
                });
            }
        }
    }
    let pass = body.iter().all(|e| e.pass);
    finish("multiplier commute", config, pass, body, lines)
}

#[derive(Debug, Serialize)]
pub struct SymbolEntry {
    pub weight: String,
    pub kernel: String,
    pub lines: Vec<f64>,
    pub coverage: Vec<f64>,
    pub max_spread: f64,
    pub json_file: PathBuf,
    pub tsv_file: PathBuf,
}

/// Lines span the strip shrunk by its uncertainty (a single midline if that
/// leaves nothing).
pub fn cmd_multiplier_symbol(config: &RunConfig) -> Result<Outcome, CliError> {
    let grid = config.grid();
    let probes = standard_probes(grid)?;
    let t_grid = config.t_grid.points();
    let all = analyses(config)?;
    let ks = kernels(config)?;
    let many = all.len() * ks.len() > 1;
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for (w, an) in &all {
        let s = an.strip;
        let (lo, hi) = (s.a_min + s.u_min, s.a_max - s.u_max);
        let (lo, hi, count) = if lo < hi {
            (lo, hi, config.line_count)
        } else {
            let mid = (s.a_min + s.a_max) / 2.0;
            (mid, mid, 1)
        };
        for (name, k) in &ks {
            let op = MultiplierOp::Convolution(k.clone());
            let strip = extract_strip(&op, lo, hi, count, &probes, &t_grid, config.tolerances.floor)?;
            let dir = artifact_dir(&config.out, &format!("{}-{}", w.id(), name), many)?;
            let json_file = dir.join("symbol_strip.json");
            let records: Vec<SymbolLineRecord<f64>> = strip.records();
            std::fs::write(&json_file, serde_json::to_string(&records)?)?;
            let tsv_file = dir.join("symbol_strip.tsv");
            let mut out = BufWriter::new(File::create(&tsv_file)?);
            strip.write_tsv(&mut out)?;
            out.flush()?;
            let coverage: Vec<f64> = strip.lines.iter().map(|l| l.coverage()).collect();
            let max_spread = strip.lines.iter().map(|l| l.max_spread).fold(0.0, f64::max);
            lines.push(format!(
                "{:<24} {:<20} {} lines, min coverage {:.3}, spread {:.2e}",
                w.id(),
                name,
                strip.lines.len(),
                coverage.iter().copied().fold(1.0, f64::min),
                max_spread
            ));
            body.push(SymbolEntry {
                weight: w.id().into(),
                kernel: name.clone(),
                lines: strip.lines.iter().map(|l| l.a).collect(),
                coverage,
                max_spread,
                json_file,
                tsv_file,
            });
        }
    }
    finish("multiplier symbol", config, true, body, lines)
}

#[derive(Debug, Serialize)]
pub struct Thm4Entry {
    pub weight: String,
    pub kernel: String,
    pub report: Thm4Report<f64>,
}

/// Bound check on the strip boundary lines with finite sections on
/// `[-W, W]` and `[-2W, 2W]`; `W` defaults to `L / 2`.
pub fn cmd_multiplier_thm4(config: &RunConfig, window: Option<f64>) -> Result<Outcome, CliError> {
    let t_grid = config.t_grid.points();
    let window = window.unwrap_or(config.grid.half_width / 2.0);
    let mut body = Vec::new();
    let mut lines = Vec::new();
    for (w, an) in analyses(config)? {
        let samples = strip_line_samples(&an.strip, &t_grid);
        for (name, k) in kernels(config)? {
            let report = verify_thm4_bound(&k, &w, &samples, config.tolerances.rel_slack, window)?;
            lines.push(format!(
                "{:<24} {:<20} B={:.9} N={:.9} margin={:.3e} monotone={} {}",
                w.id(),
                name,
                report.bound,
                report.norm,
                report.margin,
                report.monotone,
                if report.pass { "ok" } else { "FAIL" }
            ));
            body.push(Thm4Entry {
                weight: w.id().into(),
                kernel: name,
                report,
            });
        }
    }
    let pass = body.iter().all(|e| e.report.pass);
    finish("multiplier thm4", config, pass, body, lines)
}
