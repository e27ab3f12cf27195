mod common;

use common::rel;
use lrisp::geometry::{dot, norm, Direction};
use lrisp::phase::{GaugePhase, TangentPoint};
use lrisp::potential::fixtures::{p1, p3};
use lrisp::potential::{HomogeneousTerm, Mode, PotentialModel};
use lrisp::quad::QuadOptions;
use lrisp::radon::{angle_frame, xray_forward, FnPlanar, PlaneFrame, RadonGrid};
use lrisp::reconstruct::{
    build_component_sinogram, build_component_sinograms, detect_components, reconstruct_all, reconstruct_partial, reconstruct_value, PipelineConfig,
    ReconstructionFrame, ValueMode,
};
use lrisp::symbol::{extract_directional, make_synthetic_oracle, CapFamily, Energy, PerturbationSpec, SymbolOracle, SymbolSource};

/// Small grids: enough for invariance checks, a few percent for values.
fn quick() -> PipelineConfig {
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

/// Grids fine enough for percent-level values.
fn medium() -> PipelineConfig {
    PipelineConfig {
        probe_rays: 4,
        radon: RadonGrid {
            angles: 16,
            offsets: 129,
            s_max: 20.0,
            band: 8.0,
            radial_nodes: 32,
        },
        tail_radii: vec![1.0, 2.0],
        ..PipelineConfig::default()
    }
}

fn oracle(model: &PotentialModel, eps: f64) -> SymbolOracle {
    make_synthetic_oracle(model, Energy::new(1.0).unwrap(), &PerturbationSpec::new(eps, 7)).unwrap()
}

/// `V̂_j` (Euler) of every detected component at the frame target.
fn euler_values<S: SymbolSource + ?Sized>(src: &S, frame: &ReconstructionFrame, cfg: &PipelineConfig) -> Vec<(f64, f64)> {
    let d = detect_components(src, std::slice::from_ref(frame), cfg).unwrap();
    let sinos = build_component_sinograms(src, frame, &d, cfg).unwrap();
    let x1 = norm(&frame.target);
    d.exponents
        .iter()
        .zip(&sinos)
        .map(|(&rho, s)| {
            let partial = reconstruct_partial(s, &cfg.radon).unwrap().value;
            (rho, reconstruct_value(rho, x1, &[x1], &[partial], ValueMode::Euler).unwrap())
        })
        .collect()
}

#[test]
fn radial_sinogram_matches_direct_xray_transform() {
    let m = p1(Mode::Bare);
    let o = oracle(&m, 0.0);
    let cfg = quick();
    let x = [1.0, 0.0, 0.0];
    let frame = ReconstructionFrame::new(&x, 4).unwrap();
    let d = detect_components(&o, std::slice::from_ref(&frame), &cfg).unwrap();
    assert_eq!(d.len(), 1);
    let sino = build_component_sinogram(&o, &frame, &d, 0, &cfg).unwrap();
    // v(ȳ) = ∂_{x₁}|x + ȳ|^{-ρ} = -ρ x₁ |x + ȳ|^{-ρ-2} on Λ_x
    let plane = frame.plane.clone();
    let v = FnPlanar {
        f: move |p: [f64; 2]| {
            let z: Vec<f64> = plane.origin.iter().zip(plane.embed(p)).map(|(o, d)| o + d).collect();
            -0.75 * z[0] * norm(&z).powf(-2.75)
        },
        decay: 1.75,
    };
    let opts = QuadOptions::with_tol(1e-12);
    for (m_idx, &th) in sino.angles.iter().enumerate() {
        let (xi, w) = angle_frame(th);
        for (n_idx, &s) in sino.offsets.iter().enumerate().step_by(4) {
            let want = xray_forward(&v, [s * xi[0], s * xi[1]], w, &opts).unwrap();
            let got = sino.row(m_idx)[n_idx];
            assert!(rel(got, want) <= 1e-4, "θ = {th}, s = {s}: {got} vs {want}");
        }
    }
}

#[test]
fn line_data_are_even_in_omega() {
    let o = oracle(&p3(Mode::Cutoff), 0.0);
    let frame = ReconstructionFrame::new(&[0.0, 0.6, 0.8], 4).unwrap();
    let e = frame.axis.as_slice();
    for (th, s) in [(0.3, 0.0), (1.2, 2.5), (2.9, -6.0)] {
        let (w, point) = frame.line(th, s);
        let w = Direction::normalize(&w).unwrap();
        assert!(dot(&point, w.as_slice()).abs() <= 1e-12);
        let minus = Direction::normalize(&w.as_slice().iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
        let a = extract_directional(&o, &TangentPoint::new(w, &point).unwrap(), e, 1e-4).unwrap();
        let b = extract_directional(&o, &TangentPoint::new(minus, &point).unwrap(), e, 1e-4).unwrap();
        assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

#[test]
fn radial_partial_and_value_at_unit_target() {
    let cfg = medium();
    let (rep, _) = reconstruct_all(&oracle(&p1(Mode::Cutoff), 0.0), &[vec![1.0, 0.0, 0.0]], &cfg, Some(&p1(Mode::Cutoff))).unwrap();
    assert_eq!(rep.n_hat, 1);
    assert!((rep.exponents[0] - 0.75).abs() <= 0.01);
    let c = &rep.targets[0].components[0];
    assert!((c.partials[0] + 0.75).abs() <= 0.01 * 0.75, "{c:?}");
    assert!((c.v_euler - 1.0).abs() <= 0.01, "{c:?}");
    assert!(c.euler_tail_rel_diff.unwrap() <= 0.01, "{c:?}");
    assert!(!c.flagged);
    // Euler consistency of the report
    assert!((c.v_euler + c.partials[0] / c.rho_hat).abs() <= 1e-12);
}

#[test]
fn zero_potential_gives_nothing() {
    let (rep, _) = reconstruct_all(
        &oracle(&PotentialModel::zero(3), 0.0),
        &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]],
        &quick(),
        None,
    )
    .unwrap();
    assert_eq!(rep.n_hat, 0);
    assert_eq!(rep.note.as_deref(), Some("no long-range part detected"));
    for t in &rep.targets {
        assert!(t.ok());
        assert!(t.components.iter().all(|c| c.v_euler.abs() <= 1e-6));
    }
}

#[test]
fn doubling_the_potential_doubles_the_values() {
    let cfg = quick();
    let frame = ReconstructionFrame::new(&[1.0, 0.0, 0.0], 4).unwrap();
    let m = p1(Mode::Cutoff);
    let a = euler_values(&oracle(&m, 0.0), &frame, &cfg);
    let b = euler_values(&oracle(&m.scaled(2.0), 0.0), &frame, &cfg);
    assert_eq!(a.len(), 1);
    assert_eq!(b.len(), 1);
    assert!((a[0].0 - b[0].0).abs() <= 1e-8);
    assert!(rel(b[0].1, 2.0 * a[0].1) <= 1e-6, "{a:?} {b:?}");
}

#[test]
fn gauge_leaves_the_report_unchanged() {
    let m = p3(Mode::Cutoff);
    let o = oracle(&m, 0.05);
    let g = o.with_gauge(GaugePhase::from_model(&m));
    let targets = [vec![1.0, 0.0, 0.0]];
    let (a, _) = reconstruct_all(&o, &targets, &quick(), None).unwrap();
    let (b, _) = reconstruct_all(&g, &targets, &quick(), None).unwrap();
    assert_eq!(a.n_hat, b.n_hat);
    for (x, y) in a.exponents.iter().zip(&b.exponents) {
        assert!((x - y).abs() <= 1e-8);
    }
    for (ca, cb) in a.targets[0].components.iter().zip(&b.targets[0].components) {
        assert!((ca.v_euler - cb.v_euler).abs() <= 1e-8 * (1.0 + ca.v_euler.abs()), "{ca:?} vs {cb:?}");
    }
}

#[test]
fn caps_covering_the_target_circle_suffice() {
    let o = oracle(&p3(Mode::Cutoff), 0.05);
    let x = [0.0, 0.0, 1.0];
    let frame = ReconstructionFrame::new(&x, 4).unwrap();
    let fam = CapFamily::covering_circle(&o, &frame.plane.f1, &frame.plane.f2, 32, 0.1).unwrap();
    let (a, _) = reconstruct_all(&o, &[x.to_vec()], &quick(), None).unwrap();
    let (b, _) = reconstruct_all(&fam, &[x.to_vec()], &quick(), None).unwrap();
    assert!(b.targets[0].ok(), "{}", b.targets[0].status);
    assert_eq!(a.exponents, b.exponents);
    for (ca, cb) in a.targets[0].components.iter().zip(&b.targets[0].components) {
        assert!((ca.v_euler - cb.v_euler).abs() <= 1e-8);
    }
    // a target whose circle leaves the caps fails
    assert!(reconstruct_all(&fam, &[vec![1.0, 0.0, 0.0]], &quick(), None).is_err());
}

/// `R` rotating `e₃` to `(0.6, 0, 0.8)` about `e₂`.
fn rotate(v: &[f64]) -> Vec<f64> {
    let (c, s) = (0.8, 0.6);
    vec![c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]]
}

#[test]
fn rotating_model_and_target_together_changes_nothing() {
    let term = |axis: Direction| HomogeneousTerm::axial(0.6, axis, vec![1.0, 0.0, 0.5], 1.0);
    let m = PotentialModel::new(3, vec![term(Direction::axis(3, 2))], None, 1.0, Mode::Bare).unwrap();
    let rm = PotentialModel::new(
        3,
        vec![term(Direction::normalize(&rotate(&[0.0, 0.0, 1.0])).unwrap())],
        None,
        1.0,
        Mode::Bare,
    )
    .unwrap();
    let x = [0.6, 0.0, 0.8];
    let plane = PlaneFrame::new(&x).unwrap();
    let rplane = PlaneFrame {
        origin: rotate(&plane.origin),
        f1: rotate(&plane.f1),
        f2: rotate(&plane.f2),
    };
    let cfg = quick();
    let a = euler_values(&oracle(&m, 0.0), &ReconstructionFrame::with_plane(plane, 4).unwrap(), &cfg);
    let b = euler_values(&oracle(&rm, 0.0), &ReconstructionFrame::with_plane(rplane, 4).unwrap(), &cfg);
    assert_eq!(a.len(), 1);
    assert_eq!(b.len(), 1);
    assert!(rel(a[0].1, b[0].1) <= 1e-6, "{a:?} vs {b:?}");
}

#[test]
fn values_scale_with_the_target() {
    let cfg = medium();
    let o = oracle(&p1(Mode::Cutoff), 0.0);
    let (rep, _) = reconstruct_all(&o, &[vec![0.0, 1.0, 0.0], vec![0.0, 2.0, 0.0]], &cfg, None).unwrap();
    let (c1, c2) = (&rep.targets[0].components[0], &rep.targets[1].components[0]);
    let rho = rep.exponents[0];
    let tol = (c1.error_estimate + c2.error_estimate) / c1.v_euler.abs();
    assert!(
        rel(c2.v_euler, 2f64.powf(-rho) * c1.v_euler) <= tol,
        "{} {} tol {tol}",
        c1.v_euler,
        c2.v_euler
    );
    assert!(rel(c2.v_euler, 2f64.powf(-rho) * c1.v_euler) <= 0.01);
}
