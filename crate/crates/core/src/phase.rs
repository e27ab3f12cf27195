//! The phase function `Φ(y, ω) = ∫ (V(y + tω) - V(tω)) dt`, its tangential
//! gradient, and the gauge phases `θ±` that shift `Φ` by a `y`-independent
//! constant.
//!
//! `Φ` is computed as
//!
//! * an inner piece over `|t| <= R₀` where the cutoff (or the bare
//!   singularity of `V(tω)`) lives; in bare mode the subtracted homogeneous
//!   part is integrated in closed form,
//! * an outer piece over `R₀ <= |t| <= T`, `T = 8·max(R₀, |y|)`, by adaptive
//!   Gauss–Kronrod,
//! * the tail beyond `T`, where the integrand decays like `|t|^{-ρ₁-1}`,
//!   through a change of variables that turns that power law into a
//!   constant.
//!
//! `∇_yΦ` never differentiates the `Φ` quadrature. It integrates `∇V` along
//! the line, which converges absolutely, as `∇V(y + tω) = A(t)(y + tω) +
//! Σ_j B_j(t)·axis_j`; only the scalar coefficients are integrated.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, reject, Direction};
use crate::potential::{smooth_switch, HomogeneousTerm, Mode, PotentialModel, ShortRangeTerm};
use crate::quad::{integrate, integrate_power_tail, integrate_with_points, QuadOptions};

/// An impact parameter `y ∈ Π_ω` together with its direction `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub omega: Direction,
    pub y: Vec<f64>,
}

impl TangentPoint {
    /// Projects `y` onto `Π_ω`.
    pub fn new(omega: Direction, y: &[f64]) -> Result<Self> {
        if y.len() != omega.dim() {
            return Err(Error::Domain(format!(
                "impact parameter has dimension {}, direction has {}",
                y.len(),
                omega.dim()
            )));
        }
        let mut y = reject(y, omega.as_slice());
        // second pass removes the residual left by cancellation
        let c = dot(&y, omega.as_slice());
        y = axpy(&y, -c, omega.as_slice());
        Ok(TangentPoint { omega, y })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn radius(&self) -> f64 {
        norm(&self.y)
    }

    /// Same direction, impact parameter moved by `s·v` (re-projected).
    pub fn shifted(&self, s: f64, v: &[f64]) -> Self {
        TangentPoint::new(self.omega.clone(), &axpy(&self.y, s, v)).expect("same dimension")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `Φ`, `∇_yΦ` and the combined quadrature error estimate at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseValue {
    pub value: f64,
    pub grad: Vec<f64>,
    pub est_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub quad: QuadOptions,
    /// Outer quadrature range is `[R₀, tail_factor·max(R₀, |y|)]`.
    pub tail_factor: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            quad: QuadOptions::with_tol(1e-9),
            tail_factor: 8.0,
        }
    }
}

impl PhaseOptions {
    pub fn with_tol(tol: f64) -> Self {
        PhaseOptions {
            quad: QuadOptions::with_tol(tol),
            ..Default::default()
        }
    }
}

fn check_dims(model: &PotentialModel, p: &TangentPoint) -> Result<()> {
    if model.dim() != p.dim() {
        return Err(Error::Domain(format!("point has dimension {}, model has {}", p.dim(), model.dim())));
    }
    Ok(())
}

/// Decay rate `α` of the line integrands, `|t|^{-α-1}`.
fn tail_alpha(model: &PotentialModel) -> f64 {
    match (model.leading_rho(), model.short_range()) {
        (Some(rho), _) => rho,
        (None, Some(sr)) => sr.rho_sr,
        (None, None) => 1.0,
    }
}

thread_local! {
    static MOMENTS: RefCell<HashMap<[u64; 3], (f64, f64)>> = RefCell::new(HashMap::new());
}

/// `∫_{a/2}^{a} χ(t)·t^{-ρ} dt`, memoized per thread: it depends on neither
/// `y` nor `ω`.
fn cutoff_moment(rho: f64, a: f64, q: &QuadOptions) -> Result<(f64, f64)> {
    let key = [rho.to_bits(), a.to_bits(), q.rel_tol.min(q.abs_tol).to_bits()];
    if let Some(v) = MOMENTS.with(|m| m.borrow().get(&key).copied()) {
        return Ok(v);
    }
    let r = integrate(|t| smooth_switch(t, a).0 * t.powf(-rho), 0.5 * a, a, q)?;
    let v = (r.value, r.error);
    MOMENTS.with(|m| m.borrow_mut().insert(key, v));
    Ok(v)
}

/// `Φ(y, ω)` for the whole model.
///
/// Bare models containing a `ρ = 1` term are rejected: `V(tω) ~ |t|^{-1}`
/// is not integrable at `t = 0`.
pub fn phase_integral(model: &PotentialModel, p: &TangentPoint, opts: &PhaseOptions) -> Result<Estimate> {
    check_dims(model, p)?;
    let ry = p.radius();
    if ry == 0.0 {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if model.mode() == Mode::Bare && model.terms().iter().any(|t| t.rho >= 1.0 && t.coupling != 0.0) {
        return Err(Error::Domain(
            "Φ is non-integrable at t = 0 for a bare ρ = 1 term; use cutoff mode".into(),
        ));
    }
    let w = p.omega.as_slice();
    let line = model.line(&p.y, w);
    let a = model.cutoff_radius();
    let q = &opts.quad;

    // inner: ∫_{-a}^{a} V(y + tω) dt
    let mut pts = vec![-a, a];
    if ry < a {
        pts.extend([-ry, 0.0, ry]);
    }
    if model.mode() == Mode::Cutoff {
        for r in [0.5 * a, a] {
            if r > ry {
                let t = (r * r - ry * ry).sqrt();
                pts.extend([-t, t]);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let inner = integrate_with_points(|t| line.value(t), &pts, q)?;

    // inner subtracted: ∫_{-a}^{a} V(tω) dt, term by term; the profile only
    // sees μ = ±⟨ω, axis⟩ on this segment
    let mut sub_value = 0.0;
    let mut sub_error = 0.0;
    for term in model.terms() {
        let (pp, pm) = match term.profile.axis() {
            Some(ax) => {
                let c = dot(ax.as_slice(), w);
                (term.profile.eval_mu(c).0, term.profile.eval_mu(-c).0)
            }
            None => {
                let c = term.profile.eval_mu(0.0).0;
                (c, c)
            }
        };
        let radial = match model.mode() {
            Mode::Bare => a.powf(1.0 - term.rho) / (1.0 - term.rho),
            Mode::Cutoff => {
                let (value, error) = cutoff_moment(term.rho, a, q)?;
                sub_error += error * (term.coupling * (pp + pm)).abs();
                value
            }
        };
        sub_value += term.coupling * (pp + pm) * radial;
    }
    if let Some(sr) = model.short_range() {
        let r = integrate(|t| sr.eval_r2(t * t), 0.0, a, q)?;
        sub_value += 2.0 * r.value;
        sub_error += 2.0 * r.error;
    }

    // outer, folded: ∫_a^∞ [f(t) + f(-t)] dt with f(t) = V(y+tω) - V(tω)
    let folded = |t: f64| line.folded_diff(t);
    let big = opts.tail_factor * a.max(ry);
    // geometric breakpoints resolve the t^{-ρ} behaviour for a <= t << |y|
    let mut pts = vec![a];
    let mut t = 4.0 * a;
    while t < ry {
        pts.push(t);
        t *= 4.0;
    }
    if ry > a {
        pts.push(ry);
    }
    pts.push(big);
    let outer = integrate_with_points(folded, &pts, q)?;
    let tail = integrate_power_tail(folded, big, tail_alpha(model), q)?;

    let value = inner.value - sub_value + outer.value + tail.value;
    let error = inner.error + sub_error + outer.error + tail.error;
    if !value.is_finite() {
        return Err(Error::Quadrature {
            message: "phase integral is not finite".into(),
            estimate: value,
            error,
        });
    }
    Ok(Estimate { value, error })
}

/// Tangential gradient `∇_yΦ(y, ω)` with its quadrature error estimate.
pub fn grad_phase_estimate(model: &PotentialModel, p: &TangentPoint, opts: &PhaseOptions) -> Result<(Vec<f64>, f64)> {
    check_dims(model, p)?;
    let ry = p.radius();
    let has_hom = model.terms().iter().any(|t| t.coupling != 0.0);
    if ry == 0.0 && model.mode() == Mode::Bare && has_hom {
        return Err(Error::Domain("∇Φ at y = 0 is undefined for a bare model".into()));
    }
    let w = p.omega.as_slice();
    let line = model.line(&p.y, w);
    let q = &opts.quad;
    let scale = ry.max(model.cutoff_radius());
    let big = opts.tail_factor * scale;

    let mut pts = vec![-big, 0.0, big];
    if ry > 0.0 && ry < big {
        pts.extend([-ry, ry]);
    }
    if model.mode() == Mode::Cutoff {
        let r0 = model.cutoff_radius();
        for r in [0.5 * r0, r0] {
            if r > ry {
                let t = (r * r - ry * ry).sqrt();
                pts.extend([-t, t]);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let core = integrate_with_points(|t| line.grad_coeffs(t), &pts, q)?;
    let alpha = tail_alpha(model);
    let right = integrate_power_tail(|t| line.grad_coeffs(t), big, alpha, q)?;
    let left = integrate_power_tail(|t| line.grad_coeffs(-t), big, alpha, q)?;

    let mut coeffs = core.value;
    for (c, (r, l)) in coeffs.iter_mut().zip(right.value.iter().zip(&left.value)) {
        *c += r + l;
    }
    let mut g: Vec<f64> = p.y.iter().map(|yi| coeffs[0] * yi).collect();
    for (term, c) in model.terms().iter().zip(&coeffs[1..]) {
        if let Some(ax) = term.profile.axis() {
            let tangential = reject(ax.as_slice(), w);
            for (gi, ai) in g.iter_mut().zip(&tangential) {
                *gi += c * ai;
            }
        }
    }
    Ok((g, core.error + right.error + left.error))
}

pub fn grad_phase(model: &PotentialModel, p: &TangentPoint, opts: &PhaseOptions) -> Result<Vec<f64>> {
    grad_phase_estimate(model, p, opts).map(|(g, _)| g)
}

/// `∇_yΦ(y, ω; V_j)` of one bare homogeneous term; homogeneous of order `-ρ_j` in `y`.
pub fn grad_phase_term(term: &HomogeneousTerm, p: &TangentPoint, opts: &PhaseOptions) -> Result<Vec<f64>> {
    if p.radius() == 0.0 {
        return Err(Error::Domain("∇Φ of a homogeneous term needs y != 0".into()));
    }
    let model = PotentialModel::new(p.dim(), vec![term.clone()], None, 1.0, Mode::Bare)?;
    grad_phase(&model, p, opts)
}

/// `Φ`, `∇Φ` and error estimate in one call.
pub fn phase_value(model: &PotentialModel, p: &TangentPoint, opts: &PhaseOptions) -> Result<PhaseValue> {
    let phi = phase_integral(model, p, opts)?;
    let (grad, gerr) = grad_phase_estimate(model, p, opts)?;
    Ok(PhaseValue {
        value: phi.value,
        grad,
        est_error: phi.error + gerr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// `θ±(ξ) = ½ ∫_0^{±∞} V_sr(ξs) ds`, an oriented integral: for even `V_sr`
/// this gives `θ₋ = -θ₊`.
pub fn theta_pm(sr: &ShortRangeTerm, xi: &[f64], sign: Sign, opts: &QuadOptions) -> Result<Estimate> {
    let n = norm(xi);
    if n == 0.0 {
        return Err(Error::Domain("θ± needs ξ != 0".into()));
    }
    if !(sr.rho_sr > 1.0) {
        return Err(Error::Domain(format!("θ± diverges for ρ_sr = {}", sr.rho_sr)));
    }
    let s_sign = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    // ∫_0^{±∞} f(s) ds = ±∫_0^∞ f(±s) ds
    let f = |s: f64| {
        let x: Vec<f64> = xi.iter().map(|v| s_sign * s * v).collect();
        sr.eval(&x)
    };
    let knee = 1.0 / n;
    let head = integrate_with_points(f, &[0.0, knee], opts)?;
    let tail = integrate_power_tail(f, knee, sr.rho_sr - 1.0, opts)?;
    Ok(Estimate {
        value: s_sign * 0.5 * (head.value + tail.value),
        error: 0.5 * (head.error + tail.error),
    })
}

/// The pair `θ±` of a short-range term; an absent term gives `θ± ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugePhase {
    pub short_range: Option<ShortRangeTerm>,
    pub quad: QuadOptions,
}

impl GaugePhase {
    pub fn new(short_range: Option<ShortRangeTerm>) -> Self {
        GaugePhase {
            short_range,
            quad: QuadOptions::with_tol(1e-13),
        }
    }

    pub fn from_model(model: &PotentialModel) -> Self {
        GaugePhase::new(model.short_range().copied())
    }

    pub fn theta(&self, xi: &[f64], sign: Sign) -> Result<f64> {
        match &self.short_range {
            None => Ok(0.0),
            Some(sr) if sr.g == 0.0 => Ok(0.0),
            Some(sr) => theta_pm(sr, xi, sign, &self.quad).map(|e| e.value),
        }
    }

    /// `2kθ₊(kω) - 2kθ₋(kω)`, the constant added to `Φ`.
    pub fn shift(&self, k: f64, omega: &Direction) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("wave number must be positive, got {k}")));
        }
        let xi: Vec<f64> = omega.as_slice().iter().map(|w| k * w).collect();
        Ok(2.0 * k * (self.theta(&xi, Sign::Plus)? - self.theta(&xi, Sign::Minus)?))
    }
}

/// `Φ̃ = Φ + 2kθ₊(kω) - 2kθ₋(kω)`; the gradient is returned untouched.
pub fn gauge_shifted_phase(phi: &PhaseValue, gauge: &GaugePhase, k: f64, omega: &Direction) -> Result<PhaseValue> {
    let shift = gauge.shift(k, omega)?;
    Ok(PhaseValue {
        value: phi.value + shift,
        grad: phi.grad.clone(),
        est_error: phi.est_error,
    })
}
