//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p annulus-kit --test acceptance`.

use std::f64::consts::{E, PI};
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use annulus_core::multipliers::{
    commutation_residual, mollifier_demo, GridOperator, Kernel, MultiplierOp, PositionMultiplier,
    ResolventOp,
};
use annulus_core::shift_analysis::{analyze_strip, STRETCHED_EXP_FLAG};
use annulus_core::spectrum::{spectrum_map, weyl_residual, PolarRaster, SpectrumContext};
use annulus_core::symbols::{
    default_t_grid, extract_strip, extract_symbol, holomorphy_residual, kernel_symbol, standard_probes,
    strip_line_samples, verify_thm4_bound, Rect, DEFAULT_FLOOR,
};
use annulus_core::weights::make_builtin_weight;
use annulus_core::{Grid64, Weight64};
use num_complex::Complex64;
use serde_json::Value;

type Res<T> = Result<T, Box<dyn std::error::Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Res<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn criterion(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Res<Verdict>) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let (pass, detail) = match out {
        Ok(v) => (v.pass && in_time, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} AC{id:<2} {name}: {detail}; {:.2} s (limit {} s){}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { " TIMEOUT" }
    );
    pass
}

fn weight(name: &str, params: &[f64]) -> Res<Weight64> {
    Ok(make_builtin_weight(name, params)?)
}

fn grid(half_width: f64, step: f64) -> Res<Grid64> {
    Ok(Grid64::new(half_width, step)?)
}

fn kit_report(args: &[&str]) -> Res<Value> {
    let dir = tempfile::tempdir()?;
    let out = dir.path().to_str().ok_or("non-utf8 temp path")?;
    let status = Command::new(env!("CARGO_BIN_EXE_annulus-kit"))
        .args(["--out", out])
        .args(args)
        .output()?
        .status;
    if !status.success() {
        return Err(format!("annulus-kit {args:?} exited with {status}").into());
    }
    Ok(serde_json::from_str(&fs::read_to_string(dir.path().join("report.json"))?)?)
}

fn ac1() -> Res<Verdict> {
    let r = kit_report(&["--weight", "exp_linear", "spectrum", "annulus"])?;
    let a = &r["body"][0]["annulus"];
    let (r_in, r_out) = (
        a["r_in"].as_f64().ok_or("missing r_in")?,
        a["r_out"].as_f64().ok_or("missing r_out")?,
    );
    let err = (r_in - E).abs().max((r_out - E).abs());
    verdict(err <= 1e-6, format!("r_in={r_in:.12} r_out={r_out:.12} |r-e|={err:.1e} <= 1e-6"))
}

fn ac2() -> Res<Verdict> {
    let w = weight("polynomial", &[2.0])?;
    let an = analyze_strip(&w, 512)?;
    let (r_in, r_out) = (an.annulus.r_in, an.annulus.r_out);
    let ok = [r_in, r_out].iter().all(|r| (0.99..=1.01).contains(r));
    verdict(ok, format!("r_in={r_in:.6} r_out={r_out:.6} in [0.99, 1.01]"))
}

fn ac3() -> Res<Verdict> {
    let r = kit_report(&["--weight", "stretched_exp:1,0.5", "--n-max", "256", "spectrum", "radius"])?;
    let fwd = &r["body"][0]["forward"];
    let seq = fwd["sequence"].as_array().ok_or("missing sequence")?;
    let mut worst: f64 = 0.0;
    for e in seq {
        let n = e["n"].as_f64().ok_or("missing n")?;
        let v = e["log_norm"].as_f64().ok_or("missing log_norm")?;
        worst = worst.max((v - n.sqrt()).abs());
    }
    let flag = fwd["discrepancy"]["flag"] == STRETCHED_EXP_FLAG;
    verdict(
        seq.len() == 256 && worst <= 1e-9 && flag,
        format!("n<={} max|ln||S^n|| - n^1/2|={worst:.1e} <= 1e-9, flag present={flag}", seq.len()),
    )
}

fn ac4() -> Res<Verdict> {
    let g = grid(64.0, 1.0 / 16.0)?;
    let w = weight("constant", &[])?;
    let strip = analyze_strip(&w, 256)?.strip;
    let samples = strip_line_samples(&strip, &default_t_grid(2048));
    let rep = verify_thm4_bound(&Kernel::triangle(g, 1.0)?, &w, &samples, 1e-2, 32.0)?;
    let ok = (rep.bound - 1.0).abs() <= 1e-3
        && (rep.norm - 1.0).abs() <= 1e-3
        && (rep.bound - rep.norm).abs() <= 1e-3
        && rep.monotone;
    verdict(
        ok,
        format!(
            "B={:.6} N={:.6} |B-N|={:.1e} <= 1e-3, margin {:.2e} -> {:.2e} on doubling",
            rep.bound,
            rep.norm,
            (rep.bound - rep.norm).abs(),
            rep.margin,
            rep.margin_doubled
        ),
    )
}

fn ac5() -> Res<Verdict> {
    let g = grid(64.0, 1.0 / 16.0)?;
    let w = weight("exp_poly", &[0.0])?;
    let strip = analyze_strip(&w, 256)?.strip;
    let samples = strip_line_samples(&strip, &default_t_grid(2048));
    let lines_ok = (strip.a_min + 1.0).abs() < 1e-9 && (strip.a_max - 1.0).abs() < 1e-9;
    let mut ok = lines_ok;
    let mut worst_margin = f64::INFINITY;
    for (c, width) in [(0.0, 1.0), (0.5, 2.0), (-1.0, 1.5)] {
        let rep = verify_thm4_bound(&Kernel::bump(g, c, width)?, &w, &samples, 1e-2, 32.0)?;
        ok &= rep.pass;
        worst_margin = worst_margin.min(rep.margin);
    }
    verdict(
        ok,
        format!(
            "3 bumps on lines a={:.3}, {:.3}, worst N/B-1={worst_margin:.2e} >= -1e-2",
            strip.a_min, strip.a_max
        ),
    )
}

fn ac6() -> Res<Verdict> {
    let g = grid(32.0, 1.0 / 16.0)?;
    let probes = standard_probes(g)?;
    let t = default_t_grid(2048);
    let pairs = [
        (Kernel::triangle(g, 1.0)?, weight("exp_poly", &[0.0])?),
        (Kernel::bump(g, 0.0, 1.0)?, weight("exp_poly", &[0.0])?),
        (Kernel::indicator(g, -0.5, 0.5)?, weight("exp_poly", &[0.0])?),
        (Kernel::bump(g, 0.5, 2.0)?, weight("exp_poly", &[1.0])?),
        (Kernel::triangle(g, 2.0)?, weight("exp_poly", &[1.0])?),
    ];
    let (mut worst_frac, mut worst_spread): (f64, f64) = (1.0, 0.0);
    for (phi, w) in &pairs {
        let s = analyze_strip(w, 256)?.strip;
        let op = MultiplierOp::Convolution(phi.clone());
        for a in [s.a_min, (s.a_min + s.a_max) / 2.0, s.a_max] {
            let line = extract_symbol(&op, a, &probes, &t, DEFAULT_FLOOR)?;
            let (mut good, mut total) = (0usize, 0usize);
            for ((&tk, v), &m) in t.iter().zip(&line.values).zip(&line.mask) {
                if !m {
                    continue;
                }
                let exact = kernel_symbol(phi, Complex64::new(tk, a));
                total += 1;
                good += usize::from((v - exact).norm() <= 1e-6 * exact.norm());
            }
            worst_frac = worst_frac.min(good as f64 / total.max(1) as f64);
            worst_spread = worst_spread.max(line.max_spread);
        }
    }
    verdict(
        worst_frac >= 0.9 && worst_spread < 1e-6,
        format!("5 pairs x 3 lines, worst agreeing fraction={worst_frac:.4} >= 0.9, spread={worst_spread:.1e} < 1e-6"),
    )
}

fn ac7() -> Res<Verdict> {
    let g = grid(32.0, 1.0 / 16.0)?;
    let w = weight("exp_poly", &[0.0])?;
    let s = analyze_strip(&w, 256)?.strip;
    let probes = standard_probes(g)?;
    let t = default_t_grid(2048);
    let rect = Rect { t0: -4.0, t1: 4.0, a0: -0.5, a1: 0.5 };
    let morera = |op: &MultiplierOp<f64>, lines: usize| -> Res<f64> {
        let strip = extract_strip(op, s.a_min, s.a_max, lines, &probes, &t, DEFAULT_FLOOR)?;
        Ok(holomorphy_residual(&strip, rect)?)
    };
    let shift = MultiplierOp::Shift(1.0);
    // the extracted shift symbol against its closed form e^{a - it}
    let oracle = extract_strip(&shift, s.a_min, s.a_max, 5, &probes, &t, DEFAULT_FLOOR)?
        .lines
        .iter()
        .flat_map(|l| {
            l.t_grid.iter().zip(&l.values).zip(&l.mask).filter(|p| *p.1).map(move |((&tk, v), _)| {
                let exact = Complex64::new(l.a, -tk).exp();
                (v - exact).norm() / exact.norm()
            })
        })
        .fold(0.0, f64::max);
    let conv = MultiplierOp::Convolution(Kernel::bump(g, 0.0, 1.0)?);
    let (s4, s8) = (morera(&shift, 4)?, morera(&shift, 8)?);
    let (m4, m8) = (morera(&conv, 4)?, morera(&conv, 8)?);
    verdict(
        oracle <= 1e-9 && s8 <= 1e-6 && m8 <= 1e-4 && s8 <= s4 / 2.0 && m8 <= m4 / 2.0,
        format!(
            "S: {s4:.1e} -> {s8:.1e} <= 1e-6, M_phi: {m4:.1e} -> {m8:.1e} <= 1e-4 \
             (4 -> 8 lines), |mu_S - e^(a-it)|={oracle:.1e}"
        ),
    )
}

fn ac8() -> Res<Verdict> {
    let g = grid(64.0, 1.0 / 16.0)?;
    let w = weight("constant", &[])?;
    let an = analyze_strip(&w, 256)?;
    let op = MultiplierOp::Resolvent(ResolventOp::new(&an, Complex64::new(2.0, 0.0), 1e-12)?);
    let t = default_t_grid(2048);
    let line = extract_symbol(&op, 0.0, &standard_probes(g)?, &t, DEFAULT_FLOOR)?;
    let worst = t
        .iter()
        .zip(&line.values)
        .zip(&line.mask)
        .filter(|p| *p.1)
        .map(|((&tk, v), _)| (v * (Complex64::new(0.0, -tk).exp() - 2.0) - 1.0).norm())
        .fold(0.0, f64::max);
    verdict(
        worst <= 1e-6,
        format!("max|mu (e^-it - 2) - 1|={worst:.1e} <= 1e-6 on {:.1}% of t", 100.0 * line.coverage()),
    )
}

fn ac9() -> Res<Verdict> {
    let g = grid(160.0, 1.0 / 16.0)?;
    let w = weight("constant", &[])?;
    let l0s = [64.0f64, 100.0, 144.0];
    let (mut worst_rel, mut slope_lo, mut slope_hi): (f64, f64, f64) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for b in [0.0, 0.7, PI / 2.0, 2.5, PI] {
        let z = Complex64::from_polar(1.0, b);
        let pts: Vec<(f64, f64)> = l0s
            .iter()
            .map(|&l0| Ok((l0.ln(), weyl_residual(&w, g, z, l0, 0.0)?.ln())))
            .collect::<Res<_>>()?;
        for &(x, y) in &pts {
            worst_rel = worst_rel.max((y.exp() * x.exp().sqrt() - 1.0).abs());
        }
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        slope_lo = slope_lo.min(slope);
        slope_hi = slope_hi.max(slope);
    }
    verdict(
        worst_rel < 0.02 && slope_lo >= -0.55 && slope_hi <= -0.45,
        format!("max|r sqrt(L0) - 1|={worst_rel:.2e} < 0.02, slopes in [{slope_lo:.4}, {slope_hi:.4}]"),
    )
}

fn ac10() -> Res<Verdict> {
    let g = grid(128.0, 1.0 / 16.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p) in [("constant", vec![]), ("exp_linear", vec![]), ("exp_poly", vec![0.0])] {
        let ctx = SpectrumContext::with_n_max(weight(name, &p)?, g, 256)?;
        let a = *ctx.annulus();
        let raster = PolarRaster::new(a.r_in / 2.0, a.r_out * 1.5).with_extra_radii([a.r_in, a.r_out]);
        let map = spectrum_map(&ctx, &raster.points())?;
        let matches = map.band_matches(raster.cell());
        ok &= map.contradictions == 0 && matches;
        let band = map
            .inside_band()
            .map_or("none".to_string(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
        parts.push(format!("{name}: {} contradictions, band {band}", map.contradictions));
    }
    verdict(ok, parts.join("; "))
}

fn ac11() -> Res<Verdict> {
    let g = grid(128.0, 1.0 / 16.0)?;
    let w = weight("exp_poly", &[0.0])?;
    let an = analyze_strip(&w, 256)?;
    let probes = standard_probes(g)?;
    let tri = MultiplierOp::Convolution(Kernel::triangle(g, 1.0)?);
    let ops = vec![
        MultiplierOp::Convolution(Kernel::delta(g)),
        tri.clone(),
        MultiplierOp::Convolution(Kernel::bump(g, 0.0, 1.0)?),
        MultiplierOp::Convolution(Kernel::indicator(g, -0.5, 0.5)?),
        MultiplierOp::Shift(1.5),
        MultiplierOp::Resolvent(ResolventOp::new(&an, Complex64::new(6.0, 0.0), 1e-12)?),
        MultiplierOp::Resolvent(ResolventOp::new(&an, Complex64::new(0.1, 0.0), 1e-12)?),
        MultiplierOp::Composition(vec![tri, MultiplierOp::Shift(-2.0)]),
    ];
    let shifts = [1.0, -1.0, 2.0, -2.0, 5.0, -5.0];
    let worst_of = |op: &dyn GridOperator<f64>| -> Res<f64> {
        let mut worst: f64 = 0.0;
        for t in shifts {
            worst = worst.max(commutation_residual(op, t, &probes, &w)?);
        }
        Ok(worst)
    };
    let mut worst: f64 = 0.0;
    for op in &ops {
        worst = worst.max(worst_of(op)?);
    }
    let position = worst_of(&PositionMultiplier)?;
    let tol = 1e-10;
    verdict(
        worst <= tol && position >= 1e8 * tol,
        format!(
            "{} kinds: worst={worst:.1e} <= 1e-10; position diagnostic={position:.2e} (x{:.1e} over tolerance)",
            ops.len(),
            position / tol
        ),
    )
}

fn ac12() -> Res<Verdict> {
    let g = grid(16.0, 1.0 / 256.0)?;
    let w = weight("exp_poly", &[0.0])?;
    let probes = standard_probes(g)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, psi) in [
        ("bump", Kernel::bump(g, 0.0, 1.0)?),
        ("triangle", Kernel::triangle(g, 1.0)?),
        ("indicator", Kernel::indicator(g, -0.5, 0.5)?),
    ] {
        let demo = mollifier_demo(&psi, &w, &probes, &[4, 8, 16, 32], 4.0, 1e-8)?;
        ok &= demo.monotone && demo.observed_constant <= 2.0;
        let res: Vec<String> = demo.steps.iter().map(|s| format!("{:.1e}", s.strong_residual)).collect();
        parts.push(format!("{label}: [{}] ratio {:.4}", res.join(" "), demo.observed_constant));
    }
    verdict(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "exp_linear annulus is |z| = e", s(1), ac1),
        criterion(2, "polynomial weight annulus is the unit circle", s(5), ac2),
        criterion(3, "stretched-exponential norm oracle", s(5), ac3),
        criterion(4, "triangle symbol bound equality", s(10), ac4),
        criterion(5, "symbol bound on the e^|x| strip", s(30), ac5),
        criterion(6, "extracted symbols match kernel symbols", s(30), ac6),
        criterion(7, "Morera holomorphy residuals", s(30), ac7),
        criterion(8, "resolvent symbol identity", s(10), ac8),
        criterion(9, "Weyl residual law", s(10), ac9),
        criterion(10, "two-sided certification consistency", s(120), ac10),
        criterion(11, "multiplier commutation", s(10), ac11),
        criterion(12, "mollifier strong convergence", s(30), ac12),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
