//! Sampled scattering-matrix symbols `a(y, ω; λ) = e^{-iΦ(y,ω)/(2k)}(1 + b(y, ω))`
//! and recovery of `∇_yΦ` from them through
//! `Re(i·2k·∇a/a) = ∇Φ - 2k·Im(∇b/(1 + b))`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Direction};
use crate::phase::{phase_integral, GaugePhase, PhaseOptions, TangentPoint};
use crate::potential::PotentialModel;

/// Fixed energy `λ` and wave number `k = √λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub lambda: f64,
    pub k: f64,
}

impl Energy {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("energy must be positive, got {lambda}")));
        }
        Ok(Energy { lambda, k: lambda.sqrt() })
    }
}

/// `e^{-iφ/(2k)}`.
pub fn principal_symbol(phi: f64, energy: Energy) -> Complex64 {
    Complex64::from_polar(1.0, -phi / (2.0 * energy.k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSample {
    pub point: TangentPoint,
    pub value: Complex64,
}

/// Parameters of the synthetic remainder `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub eps: f64,
    /// Decay order; `None` means `2ρ₁ - 1` (or 1 when there is no long-range part).
    #[serde(default)]
    pub p_b: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            eps: 0.0,
            p_b: None,
            seed: 0,
        }
    }

    pub fn new(eps: f64, seed: u64) -> Self {
        PerturbationSpec { eps, p_b: None, seed }
    }

    pub fn decay_for(&self, model: &PotentialModel) -> f64 {
        self.p_b.unwrap_or_else(|| model.leading_rho().map_or(1.0, |r| 2.0 * r - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Wave {
    c: Complex64,
    a: Vec<f64>,
    w: Vec<f64>,
}

/// `b(y, ω) = ε·2^{-p/2}(1 + |y|²)^{-p/2}·T(y/√(1+|y|²), ω)` with `T` a
/// random trigonometric polynomial, `sup |T| <= 1`. Hence
/// `|b| <= ε(1 + |y|)^{-p}` and `|∇b| = O(ε(1 + |y|)^{-p-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub eps: f64,
    pub p_b: f64,
    waves: Vec<Wave>,
}

const WAVES: usize = 6;
const FREQ: f64 = 3.0;

impl Perturbation {
    pub fn new(dim: usize, eps: f64, p_b: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Domain(format!("perturbation amplitude must lie in [0, 1), got {eps}")));
        }
        if !(p_b > 0.0) {
            return Err(Error::Domain(format!("decay order p_b must be positive, got {p_b}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| FREQ * rng.gen_range(-1.0..1.0)).collect::<Vec<_>>();
        let mut waves = Vec::with_capacity(WAVES);
        for _ in 0..WAVES {
            let a = vec(&mut rng);
            let w = vec(&mut rng);
            let c = Complex64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..2.0 * PI));
            waves.push(Wave { c, a, w });
        }
        let total: f64 = waves.iter().map(|w| w.c.norm()).sum();
        for w in &mut waves {
            w.c /= total;
        }
        Ok(Perturbation { eps, p_b, waves })
    }

    pub fn envelope(&self, r: f64) -> f64 {
        self.eps * (0.5 * (1.0 + r * r)).powf(-0.5 * self.p_b)
    }

    pub fn value(&self, y: &[f64], omega: &[f64]) -> Complex64 {
        if self.eps == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let r2 = dot(y, y);
        let s = (1.0 + r2).sqrt();
        let mut t = Complex64::new(0.0, 0.0);
        for w in &self.waves {
            let arg = dot(&w.a, y) / s + dot(&w.w, omega);
            t += w.c * Complex64::from_polar(1.0, arg);
        }
        self.envelope(r2.sqrt()) * t
    }
}

/// Anything that answers symbol queries at a fixed energy.
pub trait SymbolSource: Send + Sync {
    fn energy(&self) -> Energy;
    fn dim(&self) -> usize;
    fn sample(&self, p: &TangentPoint) -> Result<Complex64>;
}

/// A geodesic cap `{ω : dist(ω, ω₀) <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cap {
    pub omega0: Direction,
    pub radius: f64,
}

impl Cap {
    pub fn new(omega0: Direction, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= PI / 4.0 + 1e-15) {
            return Err(Error::Domain(format!("cap radius must lie in (0, π/4], got {radius}")));
        }
        Ok(Cap { omega0, radius })
    }

    pub fn contains(&self, omega: &Direction) -> bool {
        self.omega0.geodesic_distance(omega) <= self.radius + 1e-12
    }
}

/// Model-backed symbol sampler, optionally gauge-shifted and localized.
#[derive(Debug, Clone)]
pub struct SymbolOracle {
    model: Arc<PotentialModel>,
    energy: Energy,
    perturbation: Perturbation,
    gauge: Option<GaugePhase>,
    caps: Vec<Cap>,
    phase: PhaseOptions,
}

/// Tolerance of the oracle's own `Φ` quadrature; tight because extraction
/// divides differences of `a` by the stencil step.
pub const ORACLE_PHASE_TOL: f64 = 1e-12;

pub fn make_synthetic_oracle(model: &PotentialModel, energy: Energy, pert: &PerturbationSpec) -> Result<SymbolOracle> {
    let perturbation = Perturbation::new(model.dim(), pert.eps, pert.decay_for(model), pert.seed)?;
    Ok(SymbolOracle {
        model: Arc::new(model.clone()),
        energy,
        perturbation,
        gauge: None,
        caps: vec![],
        phase: PhaseOptions::with_tol(ORACLE_PHASE_TOL),
    })
}

impl SymbolOracle {
    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn cap(&self) -> Option<&Cap> {
        self.caps.last()
    }

    /// Same oracle with `Φ` replaced by `Φ + 2kθ₊(kω) - 2kθ₋(kω)`.
    pub fn with_gauge(&self, gauge: GaugePhase) -> Self {
        SymbolOracle {
            gauge: Some(gauge),
            ..self.clone()
        }
    }

    pub fn with_phase_options(&self, phase: PhaseOptions) -> Self {
        SymbolOracle { phase, ..self.clone() }
    }

    /// Restriction to a cap: equal to the parent on the cap, an error elsewhere.
    pub fn localized(&self, omega0: &Direction, radius: f64) -> Result<Self> {
        let cap = Cap::new(omega0.clone(), radius)?;
        let mut caps = self.caps.clone();
        caps.push(cap);
        Ok(SymbolOracle { caps, ..self.clone() })
    }

    pub fn covers(&self, omega: &Direction) -> bool {
        self.caps.iter().all(|c| c.contains(omega))
    }

    fn check(&self, p: &TangentPoint) -> Result<()> {
        if p.dim() != self.model.dim() {
            return Err(Error::Domain(format!("query has dimension {}, oracle has {}", p.dim(), self.model.dim())));
        }
        if !self.covers(&p.omega) {
            return Err(Error::OutOfDomain(format!("ω = {:?} lies outside the oracle's cap", p.omega.as_slice())));
        }
        Ok(())
    }

    pub fn sample_point(&self, p: &TangentPoint) -> Result<SymbolSample> {
        Ok(SymbolSample {
            point: p.clone(),
            value: self.sample(p)?,
        })
    }
}

impl SymbolSource for SymbolOracle {
    fn energy(&self) -> Energy {
        self.energy
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn sample(&self, p: &TangentPoint) -> Result<Complex64> {
        self.check(p)?;
        let mut phi = phase_integral(&self.model, p, &self.phase)?.value;
        if let Some(g) = &self.gauge {
            phi += g.shift(self.energy.k, &p.omega)?;
        }
        let b = self.perturbation.value(&p.y, p.omega.as_slice());
        Ok(principal_symbol(phi, self.energy) * (1.0 + b))
    }
}

/// Several localized oracles; a query goes to the first cap containing `ω`.
#[derive(Debug, Clone)]
pub struct CapFamily {
    members: Vec<SymbolOracle>,
}

impl CapFamily {
    pub fn new(members: Vec<SymbolOracle>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Domain("a cap family needs at least one member".into()))?;
        let (e, d) = (first.energy, first.dim());
        if members.iter().any(|m| m.energy != e || m.dim() != d) {
            return Err(Error::Domain("cap family members disagree on energy or dimension".into()));
        }
        Ok(CapFamily { members })
    }

    /// `count` caps of angular radius `radius` centred on the great circle
    /// spanned by the orthonormal pair `(f1, f2)`; they cover it when
    /// `count·radius >= π`.
    pub fn covering_circle(parent: &SymbolOracle, f1: &[f64], f2: &[f64], count: usize, radius: f64) -> Result<Self> {
        if count == 0 || (count as f64) * radius < PI {
            return Err(Error::Domain(format!("{count} caps of radius {radius} do not cover a great circle")));
        }
        let mut members = Vec::with_capacity(count);
        for i in 0..count {
            let phi = 2.0 * PI * i as f64 / count as f64;
            let c: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect();
            members.push(parent.localized(&Direction::normalize(&c)?, radius)?);
        }
        CapFamily::new(members)
    }

    pub fn members(&self) -> &[SymbolOracle] {
        &self.members
    }
}

impl SymbolSource for CapFamily {
    fn energy(&self) -> Energy {
        self.members[0].energy
    }

    fn dim(&self) -> usize {
        self.members[0].dim()
    }

    fn sample(&self, p: &TangentPoint) -> Result<Complex64> {
        match self.members.iter().find(|m| m.covers(&p.omega)) {
            Some(m) => m.sample(p),
            None => Err(Error::OutOfDomain(format!("no cap of the family contains ω = {:?}", p.omega.as_slice()))),
        }
    }
}

/// Default relative stencil step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// `Re(i·2k·∂a/a)` with `∂a/a = ∂ log a` differenced on `log(a±/a₀)`.
/// Differencing `a` itself would add a relative error `≈ δ²/6`,
/// `δ = step·|∇Φ|/(2k)`, which grows like `|y|^{1-ρ}` and breaks homogeneity.
fn log_derivative(k: f64, a0: Complex64, ap: Complex64, am: Complex64, step: f64) -> Result<f64> {
    if [a0, ap, am].iter().any(|a| a.norm() == 0.0 || !a.is_finite()) {
        return Err(Error::Numerical("symbol vanishes at a stencil point".into()));
    }
    let (lp, lm) = ((ap / a0).ln(), (am / a0).ln());
    if (lp.im.abs().max(lm.im.abs())) > 1.0 {
        return Err(Error::Numerical(format!(
            "stencil step {step} turns the phase by more than a radian; reduce it"
        )));
    }
    let z = 2.0 * k * (lp - lm) / (2.0 * step);
    Ok((Complex64::i() * z).re)
}

/// Directional estimate `⟨∇Φ(y, ω), e⟩ ≈ Re(i·2k·∂_e a/a)` for a unit
/// `e ∈ Π_ω`, with central differences of step `h·max(1, |y|)`.
pub fn extract_directional<S: SymbolSource + ?Sized>(src: &S, p: &TangentPoint, e: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("stencil step must be positive, got {h}")));
    }
    let en = norm(e);
    if (en - 1.0).abs() > 1e-10 || dot(e, p.omega.as_slice()).abs() > 1e-10 {
        return Err(Error::Domain("probe direction must be a unit vector in Π_ω".into()));
    }
    let step = h * p.radius().max(1.0);
    let a0 = src.sample(p)?;
    let ap = src.sample(&p.shifted(step, e))?;
    let am = src.sample(&p.shifted(-step, e))?;
    log_derivative(src.energy().k, a0, ap, am, step)
}

/// Full tangential estimate of `∇Φ(y, ω)` over an orthonormal basis of `Π_ω`.
pub fn extract_grad_phase<S: SymbolSource + ?Sized>(src: &S, p: &TangentPoint, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("stencil step must be positive, got {h}")));
    }
    let step = h * p.radius().max(1.0);
    let k = src.energy().k;
    let a0 = src.sample(p)?;
    let mut g = vec![0.0; p.dim()];
    for b in p.omega.tangent_basis() {
        let ap = src.sample(&p.shifted(step, &b))?;
        let am = src.sample(&p.shifted(-step, &b))?;
        let c = log_derivative(k, a0, ap, am, step)?;
        for (gi, bi) in g.iter_mut().zip(&b) {
            *gi += c * bi;
        }
    }
    Ok(g)
}

/// JSON form of an oracle's configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub lambda: f64,
    #[serde(default = "PerturbationSpec::none")]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub gauge: bool,
    #[serde(default)]
    pub cap: Option<Cap>,
}

impl OracleConfig {
    pub fn build(&self, model: &PotentialModel) -> Result<SymbolOracle> {
        let mut o = make_synthetic_oracle(model, Energy::new(self.lambda)?, &self.perturbation)?;
        if self.gauge {
            o = o.with_gauge(GaugePhase::from_model(model));
        }
        if let Some(c) = &self.cap {
            o = o.localized(&c.omega0, c.radius)?;
        }
        Ok(o)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle config serializes")
    }
}
