//! The acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs with `cargo test -p lrisp-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use common::{b_one_antiderivative, b_rho_quadrature, c_rho_quadrature, gamma, rel, vrel};
use lrisp::geometry::{norm, reject, Direction};
use lrisp::phase::{grad_phase, grad_phase_term, phase_integral, theta_pm, GaugePhase, PhaseOptions, Sign, TangentPoint};
use lrisp::potential::fixtures::p3;
use lrisp::potential::{HomogeneousTerm, Mode, PotentialModel};
use lrisp::quad::QuadOptions;
use lrisp::radon::{invert_at_origin, FnPlanar, RadonGrid, Sinogram};
use lrisp::reconstruct::{reconstruct_all, PipelineConfig, ReconstructionReport};
use lrisp::separation::{consensus, sample_ray, DetectOptions, ExtractedGradient, RadialGrid};
use lrisp::symbol::{extract_grad_phase, make_synthetic_oracle, Energy, PerturbationSpec, SymbolOracle, DEFAULT_STEP};
use lrisp_cli::{cmd_roundtrip, RunConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn tp(omega: &[f64], y: &[f64]) -> TangentPoint {
    TangentPoint::new(Direction::normalize(omega).unwrap(), y).unwrap()
}

fn radial(rho: f64) -> PotentialModel {
    PotentialModel::new(3, vec![HomogeneousTerm::radial(rho, 1.0)], None, 1.0, Mode::Bare).unwrap()
}

fn oracle(model: &PotentialModel, eps: f64, seed: u64) -> Result<SymbolOracle, String> {
    make_synthetic_oracle(model, Energy::new(1.0).map_err(e)?, &PerturbationSpec::new(eps, seed)).map_err(e)
}

/// Grids for the criteria that compare runs rather than accuracy.
fn reduced() -> PipelineConfig {
    PipelineConfig {
        probe_rays: 4,
        radon: RadonGrid {
            angles: 8,
            offsets: 33,
            s_max: 8.0,
            band: 4.0,
            radial_nodes: 16,
        },
        tail_radii: vec![1.0],
        ..PipelineConfig::default()
    }
}

fn c1_closed_form_phase() -> Outcome {
    let start = Instant::now();
    let c = c_rho_quadrature(0.75);
    let m = radial(0.75);
    let mut worst: f64 = 0.0;
    for r in [1.0, 10.0, 100.0] {
        let phi = phase_integral(&m, &tp(&[0.0, 0.6, 0.8], &[r, 0.0, 0.0]), &PhaseOptions::default()).map_err(e)?;
        worst = worst.max(rel(phi.value, c * r.powf(0.25)));
    }
    let t = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-6 && t < 5.0, format!("max rel error {worst:.2e} (≤ 1e-6), {t:.2} s (< 5 s)"))
}

fn c2_coulomb_gradient() -> Outcome {
    let start = Instant::now();
    let b1 = b_one_antiderivative();
    let m = radial(1.0);
    let mut worst: f64 = 0.0;
    for (w, y) in [
        ([0.0, 0.0, 1.0], [3.0, 4.0, 0.0]),
        ([1.0, 2.0, 2.0], [2.0, -1.0, 0.0]),
        ([0.0, 1.0, 0.0], [0.0, 0.0, 50.0]),
    ] {
        let p = tp(&w, &y);
        let r = p.radius();
        let g = grad_phase(&m, &p, &PhaseOptions::default()).map_err(e)?;
        let want: Vec<f64> = p.y.iter().map(|yi| -b1 * yi / (r * r)).collect();
        worst = worst.max(vrel(&g, &want));
    }
    let t = start.elapsed().as_secs_f64();
    verdict(
        b1 == 2.0 && worst <= 1e-8 && t < 1.0,
        format!("B(1) = {b1}, max rel error {worst:.2e} (≤ 1e-8), {t:.3} s (< 1 s)"),
    )
}

fn c3_cross_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for rho in [0.6, 0.75, 0.9] {
        let (c, b) = (c_rho_quadrature(rho), b_rho_quadrature(rho));
        worst = worst.max(((1.0 - rho) * c + rho * b).abs() / (rho * b));
        // and as the library computes them: (1-ρ)Φ/|y| = ⟨∇Φ, ŷ⟩
        let m = radial(rho);
        let p = tp(&[0.0, 0.0, 1.0], &[0.0, 2.5, 0.0]);
        let phi = phase_integral(&m, &p, &PhaseOptions::with_tol(1e-12)).map_err(e)?;
        let g = grad_phase(&m, &p, &PhaseOptions::default()).map_err(e)?;
        worst = worst.max(rel((1.0 - rho) * phi.value / 2.5, g[1]));
    }
    verdict(worst <= 1e-8, format!("max rel defect {worst:.2e} (≤ 1e-8) for ρ ∈ {{0.6, 0.75, 0.9}}"))
}

/// Largest `|a - b| / (1 + |a|)` over the numbers of two JSON trees; `None`
/// if their shapes differ.
fn json_distance(a: &serde_json::Value, b: &serde_json::Value) -> Option<f64> {
    use serde_json::Value::*;
    match (a, b) {
        (Number(x), Number(y)) => {
            let (x, y) = (x.as_f64()?, y.as_f64()?);
            Some((x - y).abs() / (1.0 + x.abs()))
        }
        (Array(x), Array(y)) if x.len() == y.len() => x.iter().zip(y).try_fold(0.0f64, |m, (p, q)| Some(m.max(json_distance(p, q)?))),
        (Object(x), Object(y)) if x.len() == y.len() => x.iter().try_fold(0.0f64, |m, (k, p)| Some(m.max(json_distance(p, y.get(k)?)?))),
        _ => (a == b).then_some(0.0),
    }
}

fn c4_gauge_invariance() -> Outcome {
    let m = p3(Mode::Cutoff);
    let sr = m.short_range().copied().ok_or("P3 has a short-range term")?;
    let xi = [0.0, 0.0, 1.0];
    let tp_ = theta_pm(&sr, &xi, Sign::Plus, &QuadOptions::with_tol(1e-13)).map_err(e)?.value;
    let tm = theta_pm(&sr, &xi, Sign::Minus, &QuadOptions::with_tol(1e-13)).map_err(e)?.value;
    let theta_err = (tp_ - PI / 4.0).abs().max((tm + PI / 4.0).abs());
    let o = oracle(&m, 0.05, 7)?;
    let g = o.with_gauge(GaugePhase::from_model(&m));
    let targets = [vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.8]];
    let (a, _) = reconstruct_all(&o, &targets, &reduced(), None).map_err(e)?;
    let (b, _) = reconstruct_all(&g, &targets, &reduced(), None).map_err(e)?;
    // `conditioning` is a diagnostic of the fit design; it moves with the
    // weakly identified remainder powers and is reported, not compared
    let js = |r: &ReconstructionReport| {
        let mut v = serde_json::from_str::<serde_json::Value>(&r.to_json()).unwrap();
        v.as_object_mut().unwrap().remove("conditioning");
        v
    };
    let d = json_distance(&js(&a), &js(&b)).ok_or("reports differ in shape")?;
    let dc = rel(b.conditioning, a.conditioning);
    verdict(
        theta_err <= 1e-10 && d <= 1e-8 && a.n_hat == 2,
        format!(
            "θ± = ±π/4 within {theta_err:.1e}; max report difference {d:.2e} (≤ 1e-8), N̂ = {}; design conditioning differs by {dc:.1e} (not compared)",
            a.n_hat
        ),
    )
}

fn c5_radon_roundtrip() -> Outcome {
    let start = Instant::now();
    let grid = RadonGrid::default();
    let gauss = FnPlanar {
        f: |q: [f64; 2]| (-(q[0] * q[0] + q[1] * q[1])).exp(),
        decay: 10.0,
    };
    let sg = Sinogram::from_planar(&gauss, &grid, &QuadOptions::default()).map_err(e)?;
    let eg = (invert_at_origin(&sg, &grid).map_err(e)?.value - 1.0).abs();
    // v = (1 + |p|²)^{-(γ+1)/2}, projections ∝ (1 + s²)^{-γ/2}, γ = 0.75
    let gam = 0.75;
    let proj = |s: f64| (1.0 + s * s).powf(-0.5 * gam) * PI.sqrt() * gamma(0.5 * gam) / gamma(0.5 * (gam + 1.0));
    let mut sp = Sinogram::tabulate(&grid, &grid.angle_list(), |_, s| Ok(proj(s))).map_err(e)?;
    sp.fit_tails(Some(gam)).map_err(e)?;
    let ep = (invert_at_origin(&sp, &grid).map_err(e)?.value - 1.0).abs();
    let t = start.elapsed().as_secs_f64();
    verdict(
        eg <= 1e-3 && ep <= 1e-2 && t < 30.0,
        format!("Gaussian rel error {eg:.2e} (≤ 1e-3), power law {ep:.2e} (≤ 1e-2), {t:.1} s (< 30 s)"),
    )
}

/// Points at radius `r` in `Π_ω` for a few incidence directions.
fn ring(r: f64) -> Vec<TangentPoint> {
    let mut out = vec![];
    for w in [[0.0, 0.0, 1.0], [0.0, 0.6, 0.8], [0.48, -0.6, 0.64]] {
        let w = Direction::normalize(&w).unwrap();
        for (b, (c, s)) in w.tangent_basis().iter().zip([(0.8, 0.6), (0.6, -0.8)]) {
            let other = reject(&[s, c, 0.3], w.as_slice());
            let v: Vec<f64> = b.iter().zip(&other).map(|(x, y)| c * x + s * y / norm(&other)).collect();
            let n = norm(&v);
            out.push(TangentPoint::new(w.clone(), &v.iter().map(|x| r * x / n).collect::<Vec<_>>()).unwrap());
        }
    }
    out
}

fn c6_extraction_decay() -> Outcome {
    let o = oracle(&p3(Mode::Cutoff), 0.05, 11)?;
    let opts = PhaseOptions::with_tol(1e-12);
    let radii: Vec<f64> = (0..7).map(|i| 10f64 * 10f64.powf(i as f64 / 3.0)).collect();
    let mut errs = vec![];
    for &r in &radii {
        let mut worst: f64 = 0.0;
        for p in ring(r) {
            let got = extract_grad_phase(&o, &p, DEFAULT_STEP).map_err(e)?;
            let want = grad_phase(o.model(), &p, &opts).map_err(e)?;
            worst = worst.max(norm(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>()));
        }
        errs.push(worst);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = radii.iter().zip(&errs).map(|(r, e)| (r.ln(), e.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    verdict(slope <= -1.1, format!("log-log slope {slope:.3} (≤ -1.1) over |y| ∈ [10, 1e3]"))
}

fn c7_exponent_detection() -> Outcome {
    let m = p3(Mode::Cutoff);
    let o = oracle(&m, 0.0, 0)?;
    let g = ExtractedGradient {
        source: &o,
        step: DEFAULT_STEP,
    };
    let rays = [
        ([0.3, -0.2, 0.9], [1.0, 0.4, 0.0], [0.2, 1.0, 0.5]),
        ([0.0, 0.0, 1.0], [0.6, 0.8, 0.0], [0.6, 0.8, 0.0]),
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.6, 0.8]),
    ];
    let mut samples = vec![];
    let mut frames = vec![];
    for (w, u, ev) in rays {
        let omega = Direction::normalize(&w).map_err(e)?;
        let u = Direction::normalize(&reject(&u, omega.as_slice())).map_err(e)?;
        let ev = Direction::normalize(&reject(&ev, omega.as_slice())).map_err(e)?;
        samples.push(sample_ray(&g, &omega, u.as_slice(), ev.as_slice(), &RadialGrid::default()).map_err(e)?);
        frames.push((omega, u, ev));
    }
    let d = consensus(&samples, &DetectOptions::default()).map_err(e)?;
    if d.len() != 2 {
        return Err(format!("N̂ = {} (want 2), exponents {:?}", d.len(), d.exponents));
    }
    let rho_err = (d.exponents[0] - 0.6).abs().max((d.exponents[1] - 1.0).abs());
    // true ĉ_j = ⟨∇Φ(u, ω; V_j), e⟩ by homogeneity
    let opts = PhaseOptions::with_tol(1e-12);
    let mut coef_err: f64 = 0.0;
    for (fit, (omega, u, ev)) in d.rays.iter().zip(&frames) {
        let p = TangentPoint::new(omega.clone(), u.as_slice()).map_err(e)?;
        for (j, term) in m.terms().iter().enumerate() {
            let want = lrisp::geometry::dot(&grad_phase_term(term, &p, &opts).map_err(e)?, ev.as_slice());
            coef_err = coef_err.max(rel(fit.coeffs[j], want));
        }
    }
    verdict(
        rho_err <= 0.02 && coef_err <= 0.01,
        format!(
            "N̂ = 2, ρ̂ = {:.6?} (error {rho_err:.1e} ≤ 0.02), max coefficient rel error {coef_err:.1e} (≤ 1%)",
            d.exponents
        ),
    )
}

fn c8_end_to_end() -> Outcome {
    let start = Instant::now();
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/p3_roundtrip.json")).map_err(e)?;
    let cfg = RunConfig::from_json(&text).map_err(e)?;
    if cfg.perturbation.eps != 0.05 || cfg.targets.len() != 3 || cfg.pipeline != PipelineConfig::default() {
        return Err("configs/p3_roundtrip.json is not the criterion's setup".into());
    }
    let dir = tempfile::tempdir().map_err(e)?;
    let out = cmd_roundtrip(&cfg, dir.path()).map_err(e)?;
    let report: ReconstructionReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).map_err(e)?).map_err(e)?;
    let errors = std::fs::read_to_string(dir.path().join("errors.csv")).map_err(e)?;
    let worst = errors
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    let diffs: Vec<f64> = report
        .targets
        .iter()
        .flat_map(|t| &t.components)
        .map(|c| c.euler_tail_rel_diff.unwrap_or(f64::INFINITY))
        .collect();
    let worst_diff = diffs.iter().copied().fold(0.0f64, f64::max);
    let t = start.elapsed().as_secs_f64();
    verdict(
        out.code == 0 && errors.lines().count() == 7 && worst <= 0.02 && worst_diff <= 0.01 && t < 300.0,
        format!("max rel error {worst:.2e} (≤ 2%), Euler vs tail {worst_diff:.2e} (≤ 1%), {t:.0} s (< 300 s)"),
    )
}

fn c9_null_test() -> Outcome {
    let o = oracle(&PotentialModel::zero(3), 0.0, 0)?;
    let (rep, _) = reconstruct_all(&o, &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]], &reduced(), None).map_err(e)?;
    let biggest = rep
        .targets
        .iter()
        .flat_map(|t| &t.components)
        .map(|c| c.v_euler.abs())
        .fold(0.0f64, f64::max);
    verdict(
        rep.n_hat == 0 && rep.all_ok() && biggest <= 1e-6,
        format!("N̂ = {}, largest |V̂| = {biggest:.1e} (≤ 1e-6)", rep.n_hat),
    )
}

fn c10_determinism() -> Outcome {
    let mut cfg = RunConfig::from_json(r#"{"model": "p3", "perturbation": {"eps": 0.05, "seed": 7}, "targets": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]}"#)
        .map_err(e)?;
    cfg.pipeline = reduced();
    let dir = tempfile::tempdir().map_err(e)?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_roundtrip(&cfg, &a).map_err(e)?;
    cmd_roundtrip(&cfg, &b).map_err(e)?;
    let (ra, rb) = (
        std::fs::read(a.join("report.json")).map_err(e)?,
        std::fs::read(b.join("report.json")).map_err(e)?,
    );
    verdict(
        !ra.is_empty() && ra == rb,
        format!("report.json byte-identical across runs ({} bytes)", ra.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form phase", c1_closed_form_phase),
        ("closed-form gradient", c2_coulomb_gradient),
        ("cross-identity", c3_cross_identity),
        ("gauge invariance", c4_gauge_invariance),
        ("Radon roundtrip", c5_radon_roundtrip),
        ("symbol extraction decay", c6_extraction_decay),
        ("exponent detection", c7_exponent_detection),
        ("end-to-end roundtrip", c8_end_to_end),
        ("uniqueness null test", c9_null_test),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d}", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
