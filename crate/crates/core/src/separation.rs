//! Splitting ray samples `g(s) = ⟨∇Φ(s·u, ω), e⟩` into homogeneous
//! components `ĉ_j·s^{-ρ̂_j}` (`1/2 < ρ̂_j <= 1`) and a faster remainder.
//!
//! Detection works in three passes:
//!
//! 1. *Peeling.* On a geometric grid `s_i = s_min·q^i` the filter
//!    `h_i ← h_i - q^ρ·h_{i+1}` annihilates `s^{-ρ}` exactly. The leading
//!    exponent is read off the log-log slope at the largest radii
//!    (Aitken-extrapolated over blocks), its power is filtered out, and the
//!    step repeats until the slope leaves the model class.
//! 2. *Joint refinement.* All exponents are refit together by variable
//!    projection: Levenberg–Marquardt over the exponents, linear least
//!    squares for the coefficients. The remainder is modelled as a power at
//!    `2ρ̂₁` (the symbol remainder class) plus a few free powers `>= 1 + δ`;
//!    their number grows while the fit improves tenfold.
//! 3. *Consensus.* Exponents are global, so several probe rays are detected
//!    independently, merged by medians, and refit jointly with shared
//!    exponents and per-ray coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Direction};
use crate::phase::{grad_phase, PhaseOptions, TangentPoint};
use crate::potential::PotentialModel;
use crate::symbol::{extract_directional, SymbolSource};

/// Geometric radius grid `s_min·q^i`, `i = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid {
            s_min: 10.0,
            s_max: 1e4,
            points: 64,
        }
    }
}

impl RadialGrid {
    pub fn new(s_min: f64, s_max: f64, points: usize) -> Result<Self> {
        let g = RadialGrid { s_min, s_max, points };
        g.validate()?;
        Ok(g)
    }

    /// Grid over `[s_min, ~s_max]` with a prescribed ratio.
    pub fn with_ratio(s_min: f64, s_max: f64, q: f64) -> Result<Self> {
        if !(q > 1.0) {
            return Err(Error::Domain(format!("grid ratio must exceed 1, got {q}")));
        }
        let n = ((s_max / s_min).ln() / q.ln()).round() as usize + 1;
        RadialGrid::new(s_min, s_min * q.powi(n as i32 - 1), n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_max > self.s_min && self.points >= 2) {
            return Err(Error::Domain(format!(
                "radial grid needs 0 < s_min < s_max and >= 2 points, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        (self.s_max / self.s_min).powf(1.0 / (self.points - 1) as f64)
    }

    pub fn radii(&self) -> Vec<f64> {
        let q = self.ratio();
        (0..self.points).map(|i| self.s_min * q.powi(i as i32)).collect()
    }
}

/// Something that returns `⟨∇Φ(y, ω), e⟩`.
pub trait GradientSource: Sync {
    fn directional(&self, p: &TangentPoint, e: &[f64]) -> Result<f64>;
}

/// `∇Φ` by direct quadrature of the model.
pub struct ModelGradient<'a> {
    pub model: &'a PotentialModel,
    pub opts: PhaseOptions,
}

impl GradientSource for ModelGradient<'_> {
    fn directional(&self, p: &TangentPoint, e: &[f64]) -> Result<f64> {
        Ok(dot(&grad_phase(self.model, p, &self.opts)?, e))
    }
}

/// `∇Φ` recovered from symbol samples.
pub struct ExtractedGradient<'a, S: SymbolSource + ?Sized> {
    pub source: &'a S,
    pub step: f64,
}

impl<S: SymbolSource + ?Sized> GradientSource for ExtractedGradient<'_, S> {
    fn directional(&self, p: &TangentPoint, e: &[f64]) -> Result<f64> {
        extract_directional(self.source, p, e, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySamples {
    pub omega: Direction,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_tangent(omega: &Direction, v: &[f64], name: &str) -> Result<()> {
    if v.len() != omega.dim() || (norm(v) - 1.0).abs() > 1e-12 || dot(v, omega.as_slice()).abs() > 1e-12 {
        return Err(Error::Domain(format!("{name} must be a unit vector orthogonal to ω")));
    }
    Ok(())
}

/// `g(s_i) = ⟨∇Φ(s_i·u, ω), e⟩` over the grid.
pub fn sample_ray<G: GradientSource + ?Sized>(src: &G, omega: &Direction, u: &[f64], e: &[f64], grid: &RadialGrid) -> Result<RaySamples> {
    grid.validate()?;
    check_tangent(omega, u, "ray direction u")?;
    check_tangent(omega, e, "probe direction e")?;
    let radii = grid.radii();
    let mut values = Vec::with_capacity(radii.len());
    for &s in &radii {
        let y: Vec<f64> = u.iter().map(|v| s * v).collect();
        values.push(src.directional(&TangentPoint::new(omega.clone(), &y)?, e)?);
    }
    Ok(RaySamples {
        omega: omega.clone(),
        u: u.to_vec(),
        e: e.to_vec(),
        radii,
        values,
    })
}

/// Result of a linear fit against fixed powers.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual (unweighted).
    pub residual: f64,
    /// Condition number of the column-normalized weighted design.
    pub condition: f64,
}

/// Largest condition number accepted by the linear fits.
pub const MAX_CONDITION: f64 = 1e10;

/// Weighted least squares of `values` against `{s^{-x}}` with row weights
/// `s^{weight_power}`.
pub fn fit_powers(radii: &[f64], values: &[f64], exponents: &[f64], weight_power: f64) -> Result<LinearFit> {
    let (m, k) = (radii.len(), exponents.len());
    if k == 0 {
        let residual = (values.iter().map(|v| v * v).sum::<f64>() / m.max(1) as f64).sqrt();
        return Ok(LinearFit {
            coeffs: vec![],
            residual,
            condition: 1.0,
        });
    }
    if m < k {
        return Err(Error::Conditioning {
            message: format!("{m} samples cannot determine {k} coefficients"),
            condition: f64::INFINITY,
        });
    }
    let w: Vec<f64> = radii.iter().map(|s| s.powf(weight_power)).collect();
    let mut a = DMatrix::from_fn(m, k, |i, j| w[i] * radii[i].powf(-exponents[j]));
    let scale: Vec<f64> = a.column_iter().map(|c| if c.norm() > 0.0 { c.norm() } else { 1.0 }).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(m, values.iter().zip(&w).map(|(v, wi)| v * wi));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning {
            message: format!("power basis {exponents:?} is numerically dependent on this grid"),
            condition,
        });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let coeffs: Vec<f64> = (0..k).map(|j| x[j] / scale[j]).collect();
    let mut ss = 0.0;
    for (&s, &v) in radii.iter().zip(values) {
        let fit: f64 = coeffs.iter().zip(exponents).map(|(c, x)| c * s.powf(-x)).sum();
        ss += (v - fit) * (v - fit);
    }
    Ok(LinearFit {
        coeffs,
        residual: (ss / m as f64).sqrt(),
        condition,
    })
}

/// Unweighted least squares against known exponents.
pub fn fit_known_exponents(samples: &RaySamples, exponents: &[f64]) -> Result<LinearFit> {
    for (i, x) in exponents.iter().enumerate() {
        if !(*x > 0.0 && *x <= 1.0) {
            return Err(Error::Domain(format!("exponent {x} outside (0, 1]")));
        }
        if exponents[..i].contains(x) {
            return Err(Error::Domain(format!("repeated exponent {x}")));
        }
    }
    if samples.radii.len() < exponents.len() + 2 {
        return Err(Error::Domain(format!(
            "{} samples are too few for {} exponents",
            samples.radii.len(),
            exponents.len()
        )));
    }
    fit_powers(&samples.radii, &samples.values, exponents, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectOptions {
    /// Remainder margin: remainder powers decay at least like `s^{-1-δ}`.
    pub delta: f64,
    /// Exponents closer than this are merged.
    pub gap_min: f64,
    /// Most components searched for.
    pub max_components: usize,
    /// Most free remainder powers besides the `2ρ̂₁` one.
    pub max_remainder: usize,
    /// Data with `max |g| <=` this are treated as identically zero.
    pub zero_tol: f64,
    /// Peeling stops once the filtered data drop below this fraction of the input.
    pub peel_floor: f64,
    /// A joint fit whose squared residual exceeds this fraction of the squared
    /// data is searched for one more component.
    pub augment_tol: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            delta: 0.05,
            gap_min: 0.05,
            max_components: 4,
            max_remainder: 3,
            zero_tol: 1e-12,
            peel_floor: 1e-6,
            augment_tol: 1e-24,
        }
    }
}

/// Per-ray coefficients of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayFit {
    pub omega: Direction,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    /// `ĉ_j`, one per component.
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousDecomposition {
    /// `ρ̂_1 < … < ρ̂_N̂`.
    pub exponents: Vec<f64>,
    /// Powers used to model the remainder.
    pub remainder_exponents: Vec<f64>,
    /// Slope of the slowest significant remainder power; `None` without remainder.
    pub remainder_slope: Option<f64>,
    pub conditioning: f64,
    pub rays: Vec<RayFit>,
}

impl HomogeneousDecomposition {
    pub fn empty() -> Self {
        HomogeneousDecomposition {
            exponents: vec![],
            remainder_exponents: vec![],
            remainder_slope: None,
            conditioning: 1.0,
            rays: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// All powers of the fitting basis: components first, then remainder.
    pub fn basis(&self) -> Vec<f64> {
        let mut b = self.exponents.clone();
        b.extend(&self.remainder_exponents);
        b
    }

    /// Weight power used by the fits, `s^{ρ̂₁}`.
    pub fn weight_power(&self) -> f64 {
        self.exponents.first().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `ĉ_j·s^{-ρ̂_j}` for ray `ray` and component `j` (zero-based).
pub fn evaluate_component(decomp: &HomogeneousDecomposition, ray: usize, j: usize, s: f64) -> Result<f64> {
    let rho = decomp
        .exponents
        .get(j)
        .ok_or_else(|| Error::Domain(format!("component {j} out of range (N̂ = {})", decomp.len())))?;
    let fit = decomp
        .rays
        .get(ray)
        .ok_or_else(|| Error::Domain(format!("ray {ray} out of range ({} rays)", decomp.rays.len())))?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {s}")));
    }
    Ok(fit.coeffs[j] * s.powf(-rho))
}

/// Leading log-log slope at the top of the data, Aitken-extrapolated over
/// blocks of `m` grid steps.
/// Returns `(extrapolated, last raw slope)`.
fn top_slope(radii: &[f64], h: &[f64]) -> Option<(f64, f64)> {
    let n = h.len();
    let m = ((n - 1) / 6).clamp(1, 5);
    if n < 3 * m + 1 {
        return None;
    }
    let idx = [n - 1 - 3 * m, n - 1 - 2 * m, n - 1 - m, n - 1];
    if idx.iter().any(|&i| h[i] == 0.0) {
        return None;
    }
    let lh: Vec<f64> = idx.iter().map(|&i| h[i].abs().ln()).collect();
    let ls: Vec<f64> = idx.iter().map(|&i| radii[i].ln()).collect();
    let sl: Vec<f64> = (0..3).map(|k| (lh[k + 1] - lh[k]) / (ls[k + 1] - ls[k])).collect();
    let (d1, d2) = (sl[1] - sl[0], sl[2] - sl[1]);
    let den = d2 - d1;
    if den.abs() < 1e-14 || d1 * d2 <= 0.0 {
        return Some((sl[2], sl[2]));
    }
    Some((sl[2] - d2 * d2 / den, sl[2]))
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

fn annihilate(h: &[f64], q: f64, rho: f64) -> Vec<f64> {
    let f = q.powf(rho);
    h.windows(2).map(|w| w[0] - f * w[1]).collect()
}

const SLOW_SEED: f64 = 0.52;

/// Component exponents found by peeling (seeds for the joint fit).
fn peel(radii: &[f64], values: &[f64], opts: &DetectOptions, extrapolate: bool) -> Vec<f64> {
    let q = radii[1] / radii[0];
    let top = |v: &[f64]| rms(&v[v.len().saturating_sub(8)..]);
    let reference = top(values);
    let mut h = values.to_vec();
    let mut exps: Vec<f64> = vec![];
    while exps.len() < opts.max_components {
        if h.len() < 8 || top(&h) < opts.peel_floor * reference {
            break;
        }
        let Some((slope, raw)) = top_slope(&radii[..h.len()], &h) else {
            break;
        };
        let slope = if extrapolate { slope } else { raw };
        if slope.max(raw) > -0.5 && !exps.is_empty() {
            break;
        }
        // a slow leading slope may come from cancelling neighbours: seed at the
        // bound and let the joint fit decide
        let rho = if slope <= -0.5 { -slope } else { (-raw).max(SLOW_SEED) };
        // extrapolation can also overshoot past the remainder margin
        let rho = if rho > 1.0 + opts.delta && -raw <= 1.0 { -raw } else { rho };
        if rho > 1.0 + opts.delta {
            break;
        }
        let rho = if rho >= 1.0 {
            // boundary case: a ρ = 1 component only if removing it helps tenfold
            let filtered = annihilate(&h, q, 1.0);
            if top(&filtered) * 10.0 > top(&h[..filtered.len()]) {
                break;
            }
            1.0
        } else {
            rho
        };
        h = annihilate(&h, q, rho);
        exps.push(rho);
    }
    exps
}

/// Exponent layout of the joint model.
#[derive(Debug, Clone, Copy)]
struct Layout {
    components: usize,
    tied: bool,
    free: usize,
}

impl Layout {
    fn exponents(&self, p: &[f64]) -> Vec<f64> {
        let mut e = p[..self.components].to_vec();
        if self.tied {
            e.push(2.0 * p[0]);
        }
        e.extend_from_slice(&p[self.components..]);
        e
    }

    fn bounds(&self, delta: f64) -> Vec<(f64, f64)> {
        let mut b = vec![(0.5 + 1e-6, 1.0); self.components];
        b.extend(std::iter::repeat_n((1.0 + delta, 6.0), self.free));
        b
    }
}

#[derive(Clone, Copy)]
struct Ray<'a> {
    radii: &'a [f64],
    values: &'a [f64],
}

/// Sum of squared weighted residuals of the variable-projection problem.
fn projected_residuals(rays: &[Ray], exps: &[f64], weight_power: f64) -> Option<Vec<f64>> {
    let mut out = vec![];
    for r in rays {
        let fit = fit_powers(r.radii, r.values, exps, weight_power).ok()?;
        for (&s, &v) in r.radii.iter().zip(r.values) {
            let model: f64 = fit.coeffs.iter().zip(exps).map(|(c, x)| c * s.powf(-x)).sum();
            out.push((v - model) * s.powf(weight_power));
        }
    }
    Some(out)
}

fn cost(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

/// Levenberg–Marquardt over the exponents with box constraints (projection).
fn varpro(rays: &[Ray], layout: Layout, seed: &[f64], weight_power: f64, delta: f64) -> Option<(Vec<f64>, f64)> {
    let bounds = layout.bounds(delta);
    let clamp = |p: &mut Vec<f64>| {
        for (x, (lo, hi)) in p.iter_mut().zip(&bounds) {
            *x = x.clamp(*lo, *hi);
        }
    };
    let mut p = seed.to_vec();
    clamp(&mut p);
    let eval = |p: &[f64]| projected_residuals(rays, &layout.exponents(p), weight_power);
    let mut res = eval(&p)?;
    let mut c = cost(&res);
    let n = p.len();
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if n == 0 {
            break;
        }
        // central-difference Jacobian
        let m = res.len();
        let mut jac = DMatrix::zeros(m, n);
        for k in 0..n {
            let h = 1e-6;
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[k] += h;
            pm[k] -= h;
            let (rp, rm) = (eval(&pp)?, eval(&pm)?);
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let r = DVector::from_vec(res.clone());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            clamp(&mut trial);
            if let Some(tr) = eval(&trial) {
                let tc = cost(&tr);
                if tc < c {
                    let moved = trial.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let rel_gain = (c - tc) / c.max(1e-300);
                    p = trial;
                    res = tr;
                    c = tc;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = moved > 1e-13 && rel_gain > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some((p, c))
}

/// Components, remainder powers and fit cost of the best joint model.
struct JointFit {
    exponents: Vec<f64>,
    remainder: Vec<f64>,
}

/// Joint fit from `seeds`, returned with its cost relative to the data.
/// `augment` searches for components missing from `seeds`.
fn joint_fit(rays: &[Ray], seeds: &[f64], opts: &DetectOptions, augment: bool) -> (JointFit, f64) {
    let weight_power = seeds.first().copied().unwrap_or(0.0);
    let Some((mut fit, mut c)) = solvable_subset(rays, seeds, weight_power, opts) else {
        let fit = JointFit {
            exponents: seeds.to_vec(),
            remainder: vec![],
        };
        return (fit, f64::INFINITY);
    };
    let scale = cost(&projected_residuals(rays, &[], weight_power).unwrap_or_default());
    // a component hidden from peeling (near-cancelling neighbours) shows up as a large
    // residual; a cancelling pair may only help jointly, so pairs are tried next
    'augment: while augment && c > opts.augment_tol * scale {
        for add in 1..=2 {
            if fit.exponents.len() + add > opts.max_components {
                break;
            }
            let trial = augment_candidates(rays, &fit, add, weight_power, opts)
                .into_iter()
                .filter_map(|extra| {
                    let mut more = fit.exponents.clone();
                    more.extend(extra);
                    more.sort_by(f64::total_cmp);
                    best_layout(rays, &more, weight_power, opts).filter(|(f, _)| f.exponents.windows(2).all(|w| w[1] - w[0] >= opts.gap_min))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((f, ck)) = trial.filter(|t| t.1 * 4.0 < c) {
                fit = f;
                c = ck;
                continue 'augment;
            }
        }
        break;
    }
    // drop components the data do not need (e.g. a spurious peel seed between two true ones)
    'prune: while fit.exponents.len() > 1 {
        for j in 0..fit.exponents.len() {
            let mut fewer = fit.exponents.clone();
            fewer.remove(j);
            if let Some((f, cj)) = best_layout(rays, &fewer, weight_power, opts) {
                if cj <= 4.0 * c + 1e-24 * scale {
                    fit = f;
                    c = cj;
                    continue 'prune;
                }
            }
        }
        break;
    }
    (fit, c / scale.max(f64::MIN_POSITIVE))
}

/// The four most promising sets of `add` new exponents on a coarse grid,
/// ranked by the residual with everything else frozen.
fn augment_candidates(rays: &[Ray], fit: &JointFit, add: usize, weight_power: f64, opts: &DetectOptions) -> Vec<Vec<f64>> {
    let grid: Vec<f64> = (0..20)
        .map(|k| 0.525 + 0.025 * k as f64)
        .filter(|x| fit.exponents.iter().all(|e| (e - x).abs() >= opts.gap_min))
        .collect();
    let sets: Vec<Vec<f64>> = match add {
        1 => grid.iter().map(|&x| vec![x]).collect(),
        _ => grid
            .iter()
            .enumerate()
            .flat_map(|(i, &x)| grid[i + 1..].iter().filter(move |&&y| y - x >= opts.gap_min).map(move |&y| vec![x, y]))
            .collect(),
    };
    let mut scan: Vec<(Vec<f64>, f64)> = sets
        .into_iter()
        .filter_map(|extra| {
            let mut basis = fit.exponents.clone();
            basis.extend(&extra);
            // remainder powers pinned together at a bound would make the scan singular
            for &r in &fit.remainder {
                if basis.iter().all(|b| (b - r).abs() >= 1e-3) {
                    basis.push(r);
                }
            }
            projected_residuals(rays, &basis, weight_power).map(|r| (extra, cost(&r)))
        })
        .collect();
    scan.sort_by(|a, b| a.1.total_cmp(&b.1));
    scan.into_iter().take(4).map(|(e, _)| e).collect()
}

/// Best joint fit over `seeds`, dropping seeds one at a time while the model
/// is numerically singular.
fn solvable_subset(rays: &[Ray], seeds: &[f64], weight_power: f64, opts: &DetectOptions) -> Option<(JointFit, f64)> {
    if let Some(fit) = best_layout(rays, seeds, weight_power, opts) {
        return Some(fit);
    }
    if seeds.len() <= 1 {
        return None;
    }
    (0..seeds.len())
        .filter_map(|j| {
            let mut fewer = seeds.to_vec();
            fewer.remove(j);
            solvable_subset(rays, &fewer, weight_power, opts)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn best_layout(rays: &[Ray], seeds: &[f64], weight_power: f64, opts: &DetectOptions) -> Option<(JointFit, f64)> {
    let nc = seeds.len();
    let tied = nc > 0 && 2.0 * seeds[0] - seeds[nc - 1] >= opts.gap_min;
    let mut fits: Vec<(Vec<f64>, f64, Layout)> = vec![];
    for free in 0..=opts.max_remainder {
        let layout = Layout { components: nc, tied, free };
        let mut seed = seeds.to_vec();
        seed.extend((0..free).map(|i| 2.0 + i as f64));
        let Some((p, c)) = varpro(rays, layout, &seed, weight_power, opts.delta) else {
            break;
        };
        fits.push((p, c, layout));
    }
    // fewest remainder powers within a factor 10 of the best cost
    let cmin = fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let best = fits.into_iter().find(|f| f.1 <= 10.0 * cmin);
    best.map(|(p, c, layout)| {
        let all = layout.exponents(&p);
        (
            JointFit {
                exponents: all[..nc].to_vec(),
                remainder: all[nc..].to_vec(),
            },
            c,
        )
    })
}

/// Merge exponents closer than `gap_min` (keeping their mean).
fn merge_close(exps: &mut Vec<f64>, gap_min: f64) {
    exps.sort_by(f64::total_cmp);
    let mut i = 1;
    while i < exps.len() {
        if exps[i] - exps[i - 1] < gap_min {
            log::warn!("exponents {:.4} and {:.4} are closer than {gap_min}; merged", exps[i - 1], exps[i]);
            exps[i - 1] = 0.5 * (exps[i - 1] + exps[i]);
            exps.remove(i);
        } else {
            i += 1;
        }
    }
}

fn finish(rays_in: &[&RaySamples], exponents: Vec<f64>, remainder: Vec<f64>) -> Result<HomogeneousDecomposition> {
    let mut d = HomogeneousDecomposition {
        exponents,
        remainder_exponents: remainder,
        remainder_slope: None,
        conditioning: 1.0,
        rays: vec![],
    };
    let basis = d.basis();
    let wp = d.weight_power();
    let nc = d.len();
    let mut slow: Option<f64> = None;
    for r in rays_in {
        let fit = fit_powers(&r.radii, &r.values, &basis, wp)?;
        d.conditioning = d.conditioning.max(fit.condition);
        let s_top = *r.radii.last().expect("non-empty grid");
        let contrib: Vec<f64> = fit.coeffs[nc..]
            .iter()
            .zip(&d.remainder_exponents)
            .map(|(c, x)| (c * s_top.powf(-x)).abs())
            .collect();
        let biggest = contrib.iter().cloned().fold(0.0, f64::max);
        for (c, x) in contrib.iter().zip(&d.remainder_exponents) {
            if biggest > 0.0 && *c >= 1e-6 * biggest {
                slow = Some(slow.map_or(*x, |s: f64| s.min(*x)));
            }
        }
        d.rays.push(RayFit {
            omega: r.omega.clone(),
            u: r.u.clone(),
            e: r.e.clone(),
            coeffs: fit.coeffs[..nc].to_vec(),
            residual: fit.residual,
        });
    }
    d.remainder_slope = slow.map(|x| -x);
    Ok(d)
}

/// A leading exponent pinned at the lower bound means the data decay slower than `s^{-1/2}`.
fn check_model_class(jf: &JointFit) -> Result<()> {
    match jf.exponents.first() {
        Some(&r) if r < 0.5 + 1e-3 => Err(Error::NotInModelClass(format!(
            "leading exponent {r:.4} sits at the s^(-1/2) bound; the data decay too slowly"
        ))),
        _ => Ok(()),
    }
}

fn is_zero(s: &RaySamples, opts: &DetectOptions) -> bool {
    s.values.iter().all(|v| v.abs() <= opts.zero_tol)
}

fn check_grid(s: &RaySamples) -> Result<()> {
    let r = &s.radii;
    if r.len() < 8 || r.len() != s.values.len() {
        return Err(Error::Domain("ray needs at least 8 samples on a geometric grid".into()));
    }
    let q = r[1] / r[0];
    if !(q > 1.0) || r.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9) {
        return Err(Error::Domain("ray radii must form a geometric grid".into()));
    }
    Ok(())
}

/// Detect exponents and coefficients on a single ray.
pub fn detect_exponents(samples: &RaySamples, opts: &DetectOptions) -> Result<HomogeneousDecomposition> {
    check_grid(samples)?;
    if is_zero(samples, opts) {
        return Ok(HomogeneousDecomposition::empty());
    }
    // Two starts: slowly converging slopes make the extrapolated peel
    // overshoot. An empty peel still goes through the joint fit, which may
    // find components hidden by a zero crossing just beyond the grid.
    let ray = Ray {
        radii: &samples.radii,
        values: &samples.values,
    };
    let mut best: Option<(JointFit, f64)> = None;
    for extrapolate in [true, false] {
        let mut seeds = peel(&samples.radii, &samples.values, opts, extrapolate);
        merge_close(&mut seeds, opts.gap_min);
        let (jf, c) = joint_fit(&[ray], &seeds, opts, true);
        if best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((jf, c));
        }
    }
    let (mut jf, _) = best.expect("two starts");
    merge_close(&mut jf.exponents, opts.gap_min);
    check_model_class(&jf)?;
    finish(&[samples], jf.exponents, jf.remainder)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Exponents shared by several rays: per-ray detection, median merge, then
/// a joint refit with shared exponents and per-ray coefficients.
pub fn consensus(samples: &[RaySamples], opts: &DetectOptions) -> Result<HomogeneousDecomposition> {
    if samples.is_empty() {
        return Err(Error::Domain("consensus needs at least one ray".into()));
    }
    let mut singles = vec![];
    for s in samples {
        singles.push(detect_exponents(s, opts)?);
    }
    let mut counts: Vec<usize> = singles.iter().map(|d| d.len()).collect();
    counts.sort_unstable();
    let n = counts[(counts.len() - 1) / 2];
    if n == 0 {
        return Ok(HomogeneousDecomposition::empty());
    }
    let agreeing: Vec<&HomogeneousDecomposition> = singles.iter().filter(|d| d.len() == n).collect();
    let mut seeds: Vec<f64> = (0..n)
        .map(|j| median(&mut agreeing.iter().map(|d| d.exponents[j]).collect::<Vec<_>>()))
        .collect();
    merge_close(&mut seeds, opts.gap_min);
    let active: Vec<&RaySamples> = samples.iter().filter(|s| !is_zero(s, opts)).collect();
    let rays: Vec<Ray> = active
        .iter()
        .map(|s| Ray {
            radii: &s.radii,
            values: &s.values,
        })
        .collect();
    // seeds already come from augmented single-ray fits
    let (mut jf, _) = joint_fit(&rays, &seeds, opts, false);
    merge_close(&mut jf.exponents, opts.gap_min);
    check_model_class(&jf)?;
    finish(&samples.iter().collect::<Vec<_>>(), jf.exponents, jf.remainder)
}

/// Coefficients `ĉ_j` of a new ray against already detected exponents.
pub fn fit_ray(decomp: &HomogeneousDecomposition, samples: &RaySamples) -> Result<RayFit> {
    let fit = fit_powers(&samples.radii, &samples.values, &decomp.basis(), decomp.weight_power())?;
    Ok(RayFit {
        omega: samples.omega.clone(),
        u: samples.u.clone(),
        e: samples.e.clone(),
        coeffs: fit.coeffs[..decomp.len()].to_vec(),
        residual: fit.residual,
    })
}
