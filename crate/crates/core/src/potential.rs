//! Long-range potential models: a finite sum of homogeneous terms of orders
//! `-ρ_j`, `1/2 < ρ_1 < … < ρ_N <= 1`, plus a short-range term, optionally
//! smoothed near the origin by a `C^∞` switch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Direction};

/// Angular factor of a homogeneous term, a polynomial in `x̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Rotation-invariant profile with constant value.
    Radial(f64),
    /// `Σ_k coeffs[k]·⟨x̂, axis⟩^k`.
    Axial { axis: Direction, coeffs: Vec<f64> },
}

impl Profile {
    /// Profile value and its derivative with respect to `μ = ⟨x̂, axis⟩`.
    #[inline]
    pub fn eval_mu(&self, mu: f64) -> (f64, f64) {
        match self {
            Profile::Radial(c) => (*c, 0.0),
            Profile::Axial { coeffs, .. } => {
                // Horner for p and p'
                let mut p = 0.0;
                let mut dp = 0.0;
                for &c in coeffs.iter().rev() {
                    dp = dp * mu + p;
                    p = p * mu + c;
                }
                (p, dp)
            }
        }
    }

    /// `P(μ) - P(μ₀)` given an accurately computed `dμ = μ - μ₀`.
    pub fn diff_mu(&self, mu: f64, mu0: f64, dmu: f64) -> f64 {
        match self {
            Profile::Radial(_) => 0.0,
            Profile::Axial { coeffs, .. } => {
                // Σ c_k (μ^k - μ₀^k) = dμ · Σ c_k h_{k-1}, h_m = Σ_i μ^i μ₀^{m-i}
                let mut h = 1.0;
                let mut p0 = 1.0;
                let mut acc = 0.0;
                for &c in coeffs.iter().skip(1) {
                    acc += c * h;
                    p0 *= mu0;
                    h = mu * h + p0;
                }
                dmu * acc
            }
        }
    }

    pub fn axis(&self) -> Option<&Direction> {
        match self {
            Profile::Radial(_) => None,
            Profile::Axial { axis, .. } => Some(axis),
        }
    }

    /// Value on the unit sphere.
    pub fn at(&self, xhat: &[f64]) -> f64 {
        let mu = self.axis().map_or(0.0, |a| dot(a.as_slice(), xhat));
        self.eval_mu(mu).0
    }
}

/// `V_j(x) = coupling · profile(x̂) · |x|^{-ρ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTerm {
    pub rho: f64,
    pub profile: Profile,
    pub coupling: f64,
}

/// Value of a term split as `V`, plus `∇V = a·x̂ + b·axis` from `(r, μ)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TermParts {
    pub value: f64,
    pub along_xhat: f64,
    pub along_axis: f64,
}

impl HomogeneousTerm {
    pub fn radial(rho: f64, coupling: f64) -> Self {
        HomogeneousTerm {
            rho,
            profile: Profile::Radial(1.0),
            coupling,
        }
    }

    pub fn axial(rho: f64, axis: Direction, coeffs: Vec<f64>, coupling: f64) -> Self {
        HomogeneousTerm {
            rho,
            profile: Profile::Axial { axis, coeffs },
            coupling,
        }
    }

    #[inline]
    pub(crate) fn parts(&self, r: f64, mu: f64) -> TermParts {
        let (p, dp) = self.profile.eval_mu(mu);
        let rp = r.powf(-self.rho);
        let c = self.coupling;
        TermParts {
            value: c * p * rp,
            along_xhat: -c * (dp * mu + self.rho * p) * rp / r,
            along_axis: c * dp * rp / r,
        }
    }

    fn mu(&self, x: &[f64], r: f64) -> f64 {
        self.profile.axis().map_or(0.0, |a| dot(a.as_slice(), x) / r)
    }

    /// Bare (uncut) value; `x = 0` is a domain error.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if r == 0.0 {
            return Err(Error::Domain("homogeneous term evaluated at the origin".into()));
        }
        Ok(self.parts(r, self.mu(x, r)).value)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm(x);
        if r == 0.0 {
            return Err(Error::Domain("homogeneous term differentiated at the origin".into()));
        }
        let p = self.parts(r, self.mu(x, r));
        let mut g: Vec<f64> = x.iter().map(|xi| p.along_xhat * xi / r).collect();
        if let Some(a) = self.profile.axis() {
            for (gi, ai) in g.iter_mut().zip(a.as_slice()) {
                *gi += p.along_axis * ai;
            }
        }
        Ok(g)
    }
}

/// Relative homogeneity defect `|V(tx) - t^{-ρ}V(x)| / |V(x)|`.
pub fn verify_homogeneity(term: &HomogeneousTerm, x: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("scaling factor must be positive, got {t}")));
    }
    let v = term.eval(x)?;
    let tx: Vec<f64> = x.iter().map(|xi| t * xi).collect();
    let vt = term.eval(&tx)?;
    let diff = (vt - t.powf(-term.rho) * v).abs();
    if v == 0.0 {
        return Ok(if vt == 0.0 { 0.0 } else { diff });
    }
    Ok(diff / v.abs())
}

/// `g·(1 + |x|²)^{-ρ_sr/2}` with `ρ_sr > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortRangeTerm {
    pub rho_sr: f64,
    pub g: f64,
}

impl ShortRangeTerm {
    #[inline]
    pub fn eval_r2(&self, r2: f64) -> f64 {
        self.g * (1.0 + r2).powf(-0.5 * self.rho_sr)
    }

    /// `∇V_sr(x) = factor · x`; returns `factor`.
    #[inline]
    pub fn grad_factor_r2(&self, r2: f64) -> f64 {
        -self.g * self.rho_sr * (1.0 + r2).powf(-0.5 * self.rho_sr - 1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_r2(dot(x, x))
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let f = self.grad_factor_r2(dot(x, x));
        x.iter().map(|xi| f * xi).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Homogeneous terms used as is; singular at the origin.
    Bare,
    /// Homogeneous terms multiplied by the smooth switch `χ(|x|)`.
    Cutoff,
}

/// `C^∞` switch: 0 on `[0, R₀/2]`, 1 on `[R₀, ∞)`. Returns `(χ, χ')`.
pub fn smooth_switch(r: f64, r0: f64) -> (f64, f64) {
    let half = 0.5 * r0;
    if r <= half {
        return (0.0, 0.0);
    }
    if r >= r0 {
        return (1.0, 0.0);
    }
    let s = (r - half) / half;
    let f = |u: f64| (-1.0 / u).exp();
    let df = |u: f64| (-1.0 / u).exp() / (u * u);
    let (a, b) = (f(s), f(1.0 - s));
    let (da, db) = (df(s), -df(1.0 - s));
    let den = a + b;
    let chi = a / den;
    let dchi = (da * den - a * (da + db)) / (den * den);
    (chi, dchi / half)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    dim: usize,
    terms: Vec<HomogeneousTerm>,
    short_range: Option<ShortRangeTerm>,
    cutoff_radius: f64,
    mode: Mode,
}

/// Everything needed to evaluate the model along `t ↦ y + tω` with only
/// scalar arithmetic.
#[derive(Debug, Clone)]
pub(crate) struct LineView<'a> {
    model: &'a PotentialModel,
    y2: f64,
    /// per term: (⟨y, a⟩, ⟨ω, a⟩)
    proj: Vec<(f64, f64)>,
}

impl PotentialModel {
    pub fn new(dim: usize, terms: Vec<HomogeneousTerm>, short_range: Option<ShortRangeTerm>, cutoff_radius: f64, mode: Mode) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Construction(format!("dimension must be >= 3, got {dim}")));
        }
        if !(cutoff_radius > 0.0) || !cutoff_radius.is_finite() {
            return Err(Error::Construction(format!("cutoff radius must be positive, got {cutoff_radius}")));
        }
        let mut prev = 0.5;
        for (j, t) in terms.iter().enumerate() {
            if !(t.rho > prev) || t.rho > 1.0 {
                return Err(Error::Construction(format!(
                    "exponents must satisfy 1/2 < ρ_1 < … < ρ_N <= 1; term {j} has ρ = {} after {prev}",
                    t.rho
                )));
            }
            prev = t.rho;
            if !t.coupling.is_finite() {
                return Err(Error::Construction(format!("term {j} has non-finite coupling")));
            }
            if let Profile::Axial { axis, coeffs } = &t.profile {
                if axis.dim() != dim {
                    return Err(Error::Construction(format!(
                        "term {j} axis has dimension {}, model has {dim}",
                        axis.dim()
                    )));
                }
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Construction(format!("term {j} has an empty or non-finite profile")));
                }
            }
        }
        if let Some(sr) = &short_range {
            if !(sr.rho_sr > 1.0) || !sr.g.is_finite() {
                return Err(Error::Construction(format!(
                    "short-range term needs ρ_sr > 1 and finite g, got ρ_sr = {}",
                    sr.rho_sr
                )));
            }
        }
        Ok(PotentialModel {
            dim,
            terms,
            short_range,
            cutoff_radius,
            mode,
        })
    }

    /// The identically vanishing potential.
    pub fn zero(dim: usize) -> Self {
        PotentialModel::new(dim, vec![], None, 1.0, Mode::Cutoff).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn terms(&self) -> &[HomogeneousTerm] {
        &self.terms
    }
    pub fn short_range(&self) -> Option<&ShortRangeTerm> {
        self.short_range.as_ref()
    }
    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        PotentialModel { mode, ..self.clone() }
    }

    /// Same model with every coupling (and the short-range amplitude) multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.terms.iter_mut().for_each(|t| t.coupling *= s);
        if let Some(sr) = m.short_range.as_mut() {
            sr.g *= s;
        }
        m
    }

    /// Model containing a single homogeneous term of this one, bare, without short-range part.
    pub fn single_term(&self, j: usize) -> Self {
        PotentialModel {
            terms: vec![self.terms[j].clone()],
            short_range: None,
            mode: Mode::Bare,
            ..self.clone()
        }
    }

    /// Only the short-range part.
    pub fn short_range_part(&self) -> Self {
        PotentialModel {
            terms: vec![],
            ..self.clone()
        }
    }

    /// `ρ_1`, the slowest decay order, if any term exists.
    pub fn leading_rho(&self) -> Option<f64> {
        self.terms.first().map(|t| t.rho)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coupling == 0.0) && self.short_range.is_none_or(|s| s.g == 0.0)
    }

    fn check_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!("point has dimension {}, model has {}", x.len(), self.dim)));
        }
        let r = norm(x);
        if r == 0.0 && self.mode == Mode::Bare && !self.terms.is_empty() {
            return Err(Error::Domain("bare model evaluated at the origin".into()));
        }
        Ok(r)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = self.check_point(x)?;
        let sr = self.short_range.map_or(0.0, |s| s.eval_r2(r * r));
        let chi = match self.mode {
            Mode::Bare => 1.0,
            Mode::Cutoff => smooth_switch(r, self.cutoff_radius).0,
        };
        if chi == 0.0 {
            return Ok(sr);
        }
        let hom: f64 = self.terms.iter().map(|t| t.parts(r, t.mu(x, r)).value).sum();
        Ok(chi * hom + sr)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.check_point(x)?;
        let mut g = self.short_range.map_or(vec![0.0; self.dim], |s| s.grad(x));
        let (chi, dchi) = match self.mode {
            Mode::Bare => (1.0, 0.0),
            Mode::Cutoff => smooth_switch(r, self.cutoff_radius),
        };
        if chi == 0.0 && dchi == 0.0 {
            return Ok(g);
        }
        for t in &self.terms {
            let p = t.parts(r, t.mu(x, r));
            let radial = (chi * p.along_xhat + dchi * p.value) / r;
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += radial * xi;
            }
            if let Some(a) = t.profile.axis() {
                for (gi, ai) in g.iter_mut().zip(a.as_slice()) {
                    *gi += chi * p.along_axis * ai;
                }
            }
        }
        Ok(g)
    }

    /// Evaluator for points `y + tω` (with `y ⊥ ω`).
    pub(crate) fn line<'a>(&'a self, y: &[f64], omega: &[f64]) -> LineView<'a> {
        let proj = self
            .terms
            .iter()
            .map(|t| match t.profile.axis() {
                Some(a) => (dot(y, a.as_slice()), dot(omega, a.as_slice())),
                None => (0.0, 0.0),
            })
            .collect();
        LineView {
            model: self,
            y2: dot(y, y),
            proj,
        }
    }
}

impl LineView<'_> {
    fn switch(&self, r: f64) -> (f64, f64) {
        match self.model.mode {
            Mode::Bare => (1.0, 0.0),
            Mode::Cutoff => smooth_switch(r, self.model.cutoff_radius),
        }
    }

    /// `V(y + tω)`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let r2 = self.y2 + t * t;
        let sr = self.model.short_range.map_or(0.0, |s| s.eval_r2(r2));
        let r = r2.sqrt();
        let (chi, _) = self.switch(r);
        if chi == 0.0 {
            return sr;
        }
        let mut hom = 0.0;
        for (term, &(ya, wa)) in self.model.terms.iter().zip(&self.proj) {
            hom += term.parts(r, (ya + t * wa) / r).value;
        }
        chi * hom + sr
    }

    /// `[V(y + tω) - V(tω)] + [V(y - tω) - V(-tω)]` for `t > 0`, homogeneous
    /// terms uncut, evaluated without cancellation so that it stays accurate
    /// for `t ≫ |y|` (where it decays like `t^{-ρ-2}`).
    pub fn folded_diff(&self, t: f64) -> f64 {
        // |tω| = t and |y ± tω|² = t²(1 + q) with q = |y|²/t², on both sides
        let lq = (self.y2 / (t * t)).ln_1p();
        let lt = t.ln();
        let mut v = self.model.short_range.map_or(0.0, |s| {
            let base = 1.0 + t * t;
            let e = -0.5 * s.rho_sr;
            2.0 * s.g * (e * base.ln()).exp() * (e * (self.y2 / base).ln_1p()).exp_m1()
        });
        if self.model.terms.is_empty() {
            return v;
        }
        // 1/r - 1/t
        let inv_r = 1.0 / (t * (0.5 * lq).exp());
        let inv_r_diff = (-0.5 * lq).exp_m1() / t;
        for (term, &(ya, wa)) in self.model.terms.iter().zip(&self.proj) {
            let rho = term.rho;
            let pt = (-rho * lt).exp();
            let em = (-0.5 * rho * lq).exp_m1();
            let pr = pt * (1.0 + em);
            let d = match &term.profile {
                Profile::Radial(c) => 2.0 * c * pt * em,
                profile => {
                    let mut acc = 0.0;
                    for sgn in [1.0, -1.0] {
                        let mu0 = sgn * wa;
                        let mu = (ya + sgn * t * wa) * inv_r;
                        let dmu = ya * inv_r + sgn * t * wa * inv_r_diff;
                        acc += profile.diff_mu(mu, mu0, dmu) * pr + profile.eval_mu(mu0).0 * pt * em;
                    }
                    acc
                }
            };
            v += term.coupling * d;
        }
        v
    }

    /// Coefficients of `∇V(y + tω) = A·(y + tω) + Σ_j B_j·axis_j`, packed as
    /// `[A, B_1, …, B_N]` (B is zero for radial terms).
    pub fn grad_coeffs(&self, t: f64) -> Vec<f64> {
        let r2 = self.y2 + t * t;
        let r = r2.sqrt();
        let mut out = vec![0.0; 1 + self.model.terms.len()];
        out[0] = self.model.short_range.map_or(0.0, |s| s.grad_factor_r2(r2));
        let (chi, dchi) = self.switch(r);
        if chi == 0.0 && dchi == 0.0 {
            return out;
        }
        for (j, (term, &(ya, wa))) in self.model.terms.iter().zip(&self.proj).enumerate() {
            let p = term.parts(r, (ya + t * wa) / r);
            out[0] += (chi * p.along_xhat + dchi * p.value) / r;
            out[1 + j] = chi * p.along_axis;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ProfileDoc {
    Radial {
        #[serde(default)]
        coeffs: Vec<f64>,
    },
    Axial {
        axis: Vec<f64>,
        coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    rho: f64,
    profile: ProfileDoc,
    coupling: f64,
}

/// JSON form of a [`PotentialModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    dim: usize,
    terms: Vec<TermDoc>,
    short_range: Option<ShortRangeTerm>,
    cutoff_radius: f64,
    mode: Mode,
}

impl From<&PotentialModel> for ModelDoc {
    fn from(m: &PotentialModel) -> Self {
        ModelDoc {
            dim: m.dim,
            terms: m
                .terms
                .iter()
                .map(|t| TermDoc {
                    rho: t.rho,
                    coupling: t.coupling,
                    profile: match &t.profile {
                        Profile::Radial(c) => ProfileDoc::Radial { coeffs: vec![*c] },
                        Profile::Axial { axis, coeffs } => ProfileDoc::Axial {
                            axis: axis.as_slice().to_vec(),
                            coeffs: coeffs.clone(),
                        },
                    },
                })
                .collect(),
            short_range: m.short_range,
            cutoff_radius: m.cutoff_radius,
            mode: m.mode,
        }
    }
}

impl TryFrom<ModelDoc> for PotentialModel {
    type Error = Error;
    fn try_from(doc: ModelDoc) -> Result<Self> {
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in doc.terms {
            let profile = match t.profile {
                ProfileDoc::Radial { coeffs } => match coeffs.as_slice() {
                    [] => Profile::Radial(1.0),
                    [c] => Profile::Radial(*c),
                    _ => return Err(Error::Construction("radial profile takes at most one coefficient".into())),
                },
                ProfileDoc::Axial { axis, coeffs } => Profile::Axial {
                    axis: Direction::normalize(&axis)?,
                    coeffs,
                },
            };
            terms.push(HomogeneousTerm {
                rho: t.rho,
                profile,
                coupling: t.coupling,
            });
        }
        PotentialModel::new(doc.dim, terms, doc.short_range, doc.cutoff_radius, doc.mode)
    }
}

impl Serialize for PotentialModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PotentialModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        PotentialModel::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl PotentialModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }
}

/// Reference models shared by tests, examples and the CLI.
pub mod fixtures {
    use super::*;

    /// Default origin cutoff radius `R₀`.
    pub const R0: f64 = 1.0;

    /// `|x|^{-3/4}`.
    pub fn p1(mode: Mode) -> PotentialModel {
        PotentialModel::new(3, vec![HomogeneousTerm::radial(0.75, 1.0)], None, R0, mode).expect("valid fixture")
    }

    fn p2_term() -> HomogeneousTerm {
        HomogeneousTerm::axial(0.6, Direction::axis(3, 2), vec![1.0, 0.0, 0.5], 1.0)
    }

    /// `(1 + ½⟨x̂, e₃⟩²)|x|^{-0.6}`.
    pub fn p2(mode: Mode) -> PotentialModel {
        PotentialModel::new(3, vec![p2_term()], None, R0, mode).expect("valid fixture")
    }

    /// P2's term, `½|x|^{-1}` and `(1 + |x|²)^{-1}`.
    pub fn p3(mode: Mode) -> PotentialModel {
        PotentialModel::new(
            3,
            vec![p2_term(), HomogeneousTerm::radial(1.0, 0.5)],
            Some(ShortRangeTerm { rho_sr: 2.0, g: 1.0 }),
            R0,
            mode,
        )
        .expect("valid fixture")
    }

    pub fn by_name(name: &str, mode: Mode) -> Option<PotentialModel> {
        match name.to_ascii_lowercase().as_str() {
            "p1" => Some(p1(mode)),
            "p2" => Some(p2(mode)),
            "p3" => Some(p3(mode)),
            "zero" => Some(PotentialModel::zero(3).with_mode(mode)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    /// Independent evaluator: spells out the formulas with no shared helpers.
    fn p2_by_hand(x: &[f64]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let c = x[2] / r;
        (1.0 + 0.5 * c * c) * r.powf(-0.6)
    }

    #[test]
    fn line_difference_matches_direct_evaluation() {
        let m = p3(Mode::Bare);
        let w = Direction::normalize(&[0.3, -0.2, 0.9]).unwrap();
        let y = crate::geometry::reject(&[1.0, 2.0, -0.5], w.as_slice());
        let line = m.line(&y, w.as_slice());
        for t in [30.0, 2.0, 1.5, 10.0] {
            let x: Vec<f64> = y.iter().zip(w.as_slice()).map(|(a, b)| a + t * b).collect();
            let x0: Vec<f64> = w.as_slice().iter().map(|b| t * b).collect();
            let want = m.eval(&x).unwrap() - m.eval(&x0).unwrap();
            let x: Vec<f64> = y.iter().zip(w.as_slice()).map(|(a, b)| a - t * b).collect();
            let want = want + m.eval(&x).unwrap() - m.eval(&x0.iter().map(|v| -v).collect::<Vec<_>>()).unwrap();
            assert!((line.folded_diff(t) - want).abs() < 1e-13, "t = {t}");
        }
        // far out the difference decays like t^{-ρ-2} without rounding noise
        let d = line.folded_diff(1e12);
        assert!(d.abs() < 1e-24 && d != 0.0);
    }

    #[test]
    fn p1_bare_power_law() {
        let v = p1(Mode::Bare).eval(&[0.0, 2.0, 0.0]).unwrap();
        assert!((v - 2f64.powf(-0.75)).abs() < 1e-15);
    }

    #[test]
    fn cutoff_vanishes_at_origin_and_bare_fails() {
        assert_eq!(p1(Mode::Cutoff).eval(&[0.0; 3]).unwrap(), 0.0);
        assert!(matches!(p1(Mode::Bare).eval(&[0.0; 3]), Err(Error::Domain(_))));
        assert_eq!(p1(Mode::Cutoff).grad(&[0.1, 0.2, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn p2_matches_independent_evaluator() {
        let m = p2(Mode::Bare);
        let x = [0.0, 0.0, 2.0];
        assert!((m.eval(&x).unwrap() - 2f64.powf(-0.6) * 1.5).abs() < 1e-15);
        for x in [[0.3, -1.2, 0.7], [5.0, 1.0, -3.0], [1e-3, 2e-3, 0.0]] {
            let a = m.eval(&x).unwrap();
            assert!((a - p2_by_hand(&x)).abs() <= 1e-14 * a.abs());
        }
    }

    #[test]
    fn radial_gradient_closed_form() {
        let m = p1(Mode::Bare);
        let x = [0.4, -1.0, 2.0];
        let r = norm(&x);
        let g = m.grad(&x).unwrap();
        for i in 0..3 {
            let want = -0.75 * r.powf(-2.75) * x[i];
            assert!((g[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let u = [0.48, -0.6, 0.64];
        for mode in [Mode::Bare, Mode::Cutoff] {
            let m = p3(mode);
            for x in [[0.2, 0.9, 0.1], [0.9, 0.2, 0.1], [3.0, -1.0, 2.0], [-40.0, 10.0, 5.0]] {
                let h = 1e-5;
                let fd = (m.eval(&crate::geometry::axpy(&x, h, &u)).unwrap() - m.eval(&crate::geometry::axpy(&x, -h, &u)).unwrap()) / (2.0 * h);
                let g = dot(&m.grad(&x).unwrap(), &u);
                assert!((fd - g).abs() <= 1e-8 * g.abs().max(1e-3), "{mode:?} {x:?}: {fd} vs {g}");
            }
        }
    }

    #[test]
    fn homogeneity_residuals() {
        let t1 = p1(Mode::Bare).terms()[0].clone();
        let t1 = &t1;
        assert!(verify_homogeneity(t1, &[0.3, 0.2, -0.9], 3.0).unwrap() <= 1e-14);
        let t2 = p2(Mode::Bare).terms()[0].clone();
        let t2 = &t2;
        assert!(verify_homogeneity(t2, &[1.0, 0.0, 1.0], 0.5).unwrap() <= 1e-14);
        let mut bad = t1.clone();
        let x = [1.0, 0.0, 0.0];
        bad.rho += 1e-3;
        // evaluate the corrupted term against the declared exponent
        let v = bad.eval(&x).unwrap();
        let vt = bad.eval(&[10.0, 0.0, 0.0]).unwrap();
        let res = (vt - 10f64.powf(-0.75) * v).abs() / v.abs();
        let want = 10f64.powf(-0.75) * (10f64.powf(-1e-3) - 1.0).abs();
        assert!((res - want).abs() < 1e-14);
    }

    #[test]
    fn construction_rejects_bad_exponents() {
        let t = |r| HomogeneousTerm::radial(r, 1.0);
        assert!(PotentialModel::new(3, vec![t(0.5)], None, 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(3, vec![t(0.8), t(0.7)], None, 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(3, vec![t(0.8), t(0.8)], None, 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(3, vec![t(1.1)], None, 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(2, vec![t(0.8)], None, 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(3, vec![], Some(ShortRangeTerm { rho_sr: 1.0, g: 1.0 }), 1.0, Mode::Bare).is_err());
        assert!(PotentialModel::new(3, vec![], None, 1.0, Mode::Bare).is_ok());
    }

    #[test]
    fn switch_is_smooth_step() {
        assert_eq!(smooth_switch(0.5, 1.0), (0.0, 0.0));
        assert_eq!(smooth_switch(1.0, 1.0), (1.0, 0.0));
        let (c, _) = smooth_switch(0.75, 1.0);
        assert!((c - 0.5).abs() < 1e-15);
        for r in [0.55, 0.7, 0.9, 0.99] {
            let h = 1e-6;
            let fd = (smooth_switch(r + h, 1.0).0 - smooth_switch(r - h, 1.0).0) / (2.0 * h);
            assert!((fd - smooth_switch(r, 1.0).1).abs() < 1e-6);
        }
    }

    #[test]
    fn json_roundtrip_and_unknown_keys() {
        let m = p3(Mode::Cutoff);
        let back = PotentialModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"dim":3,"terms":[],"short_range":null,"cutoff_radius":1.0,"mode":"bare","extra":1}"#;
        assert!(PotentialModel::from_json(bad).is_err());
        let unsorted = r#"{"dim":3,"terms":[{"rho":0.9,"profile":{"kind":"radial"},"coupling":1},
            {"rho":0.7,"profile":{"kind":"radial"},"coupling":1}],"short_range":null,"cutoff_radius":1.0,"mode":"bare"}"#;
        assert!(matches!(PotentialModel::from_json(unsorted), Err(Error::Format(_))));
    }
}
