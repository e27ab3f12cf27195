use lrisp::geometry::{norm, Direction};
use lrisp::phase::{grad_phase, phase_integral, PhaseOptions, TangentPoint};
use lrisp::potential::{HomogeneousTerm, Mode, PotentialModel};
use lrisp::quad::QuadOptions;
use lrisp::radon::{invert_at_origin, FnPlanar, RadonGrid, Sinogram};
use lrisp::special::{radial_gradient_constant, radial_phase_constant};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, err: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        pass: err <= tol,
        detail: format!("error {err:.3e} (tolerance {tol:.0e})"),
    }
}

fn failed(name: impl Into<String>, e: impl std::fmt::Display) -> Check {
    Check {
        name: name.into(),
        pass: false,
        detail: e.to_string(),
    }
}

fn radial(rho: f64) -> PotentialModel {
    PotentialModel::new(3, vec![HomogeneousTerm::radial(rho, 1.0)], None, 1.0, Mode::Bare).expect("valid radial model")
}

fn point(r: f64) -> TangentPoint {
    TangentPoint::new(Direction::axis(3, 2), &[0.6 * r, 0.8 * r, 0.0]).expect("tangent point")
}

/// Closed-form checks: `C(ρ)`, `B(ρ)`, `B(1) = 2` and the Gaussian Radon roundtrip.
pub fn run() -> Vec<Check> {
    let opts = PhaseOptions::with_tol(1e-11);
    let mut out = vec![];
    for rho in [0.6, 0.75, 0.9] {
        let m = radial(rho);
        let mut worst_phi: f64 = 0.0;
        let mut worst_grad: f64 = 0.0;
        let mut failure = None;
        for r in [1.0, 10.0, 100.0] {
            let p = point(r);
            match (phase_integral(&m, &p, &opts), grad_phase(&m, &p, &opts)) {
                (Ok(phi), Ok(g)) => {
                    let want = radial_phase_constant(rho) * r.powf(1.0 - rho);
                    worst_phi = worst_phi.max((phi.value - want).abs() / want.abs());
                    let gw = -rho * radial_gradient_constant(rho) * r.powf(-rho);
                    let diff: Vec<f64> = g.iter().zip(&p.y).map(|(a, y)| a - gw * y / r).collect();
                    worst_grad = worst_grad.max(norm(&diff) / gw.abs());
                }
                (Err(e), _) | (_, Err(e)) => failure = Some(e),
            }
        }
        match failure {
            Some(e) => out.push(failed(format!("C({rho}) / B({rho})"), e)),
            None => {
                out.push(check(format!("phase = C({rho})|y|^(1-ρ)"), worst_phi, 1e-6));
                out.push(check(format!("gradient = -ρB({rho})|y|^(-ρ)ŷ"), worst_grad, 1e-8));
            }
        }
    }
    let m = radial(1.0);
    let p = point(7.0);
    match grad_phase(&m, &p, &opts) {
        Ok(g) => {
            let diff: Vec<f64> = g.iter().zip(&p.y).map(|(a, y)| a + 2.0 * y / 49.0).collect();
            out.push(check("Coulomb gradient = -2ŷ/|y|", norm(&diff) / (2.0 / 7.0), 1e-8));
        }
        Err(e) => out.push(failed("Coulomb gradient = -2ŷ/|y|", e)),
    }
    let gauss = FnPlanar {
        f: |q: [f64; 2]| (-(q[0] * q[0] + q[1] * q[1])).exp(),
        decay: 10.0,
    };
    let grid = RadonGrid::default();
    match Sinogram::from_planar(&gauss, &grid, &QuadOptions::default()).and_then(|s| invert_at_origin(&s, &grid)) {
        Ok(inv) => out.push(check("Gaussian Radon roundtrip v(0) = 1", (inv.value - 1.0).abs(), 1e-3)),
        Err(e) => out.push(failed("Gaussian Radon roundtrip v(0) = 1", e)),
    }
    out
}
