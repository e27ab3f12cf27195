//! Planar X-ray transform and point inversion through the Fourier slice
//! theorem.
//!
//! Conventions, in plane coordinates: for an angle `θ`, `ξ̂ = (cos θ, sin θ)`
//! and `ω_ξ = (-sin θ, cos θ)`; the sinogram holds `r(s·ξ̂, ω_ξ) = ∫ v(s·ξ̂ + t·ω_ξ) dt`.
//! The Fourier transform is `v̂(ξ) = (2π)^{-1} ∬ e^{-i⟨ξ,x⟩} v(x) dx`, so
//! `v̂(ρξ̂) = (2π)^{-1} ∫ e^{-iρs} r(s·ξ̂, ω_ξ) ds` and
//! `v(0) = (2π)^{-1} ∬ v̂(ξ) dξ = π^{-1} ∫_0^π ∫_0^∞ Re v̂(ρξ̂) ρ dρ dθ`.
//!
//! Projections of the functions met in reconstruction decay like `|s|^{-γ}`
//! with `γ <= 1`, so the `s`-integral only converges conditionally. Each
//! angle carries a tail model `m(s) = c|s|^{-γ} + d|s|^{-γ-1}` fitted on the
//! outer offsets; the data are blended into `m` by a smooth taper before the
//! ends of the window and `m` is integrated analytically beyond it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, Direction};
use crate::quad::{gauss_legendre, integrate_power_tail, integrate_semi_infinite, integrate_with_points, QuadOptions};

/// The plane `Λ_x` through `x`, orthogonal to `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFrame {
    pub origin: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl PlaneFrame {
    pub fn new(x: &[f64]) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::Domain("plane frames need d >= 3".into()));
        }
        if norm(x) == 0.0 {
            return Err(Error::Domain("the plane Λ_x needs x != 0".into()));
        }
        let xhat = Direction::normalize(x)?;
        let basis = xhat.tangent_basis();
        Ok(PlaneFrame {
            origin: x.to_vec(),
            f1: basis[0].clone(),
            f2: basis[1].clone(),
        })
    }

    /// Frame with a prescribed first in-plane axis (projected and normalized).
    pub fn with_axis(x: &[f64], f1: &[f64]) -> Result<Self> {
        let xhat = Direction::normalize(x)?;
        let a = Direction::normalize(&crate::geometry::reject(f1, xhat.as_slice()))?;
        // f2: the tangent vector least aligned with f1, orthogonalized against it
        let b = xhat
            .tangent_basis()
            .into_iter()
            .map(|c| crate::geometry::reject(&c, a.as_slice()))
            .max_by(|p, q| norm(p).total_cmp(&norm(q)))
            .ok_or_else(|| Error::Domain("plane frames need d >= 3".into()))?;
        let b = Direction::normalize(&b)?.as_slice().to_vec();
        Ok(PlaneFrame {
            origin: x.to_vec(),
            f1: a.as_slice().to_vec(),
            f2: b,
        })
    }

    /// `c₁f₁ + c₂f₂` (a vector in `R^d`, relative to the origin).
    pub fn embed(&self, c: [f64; 2]) -> Vec<f64> {
        self.f1.iter().zip(&self.f2).map(|(a, b)| c[0] * a + c[1] * b).collect()
    }

    pub fn gram_defect(&self) -> f64 {
        let xh: Vec<f64> = {
            let n = norm(&self.origin);
            self.origin.iter().map(|v| v / n).collect()
        };
        let vs = [&self.f1, &self.f2, &xh];
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(vs[i], vs[j]) - want).abs());
            }
        }
        worst
    }
}

/// A function on the plane with known decay order.
pub trait PlanarFunction: Sync {
    fn eval(&self, p: [f64; 2]) -> f64;
    /// `|v(p)| = O(|p|^{-decay})`.
    fn decay(&self) -> f64;
}

pub struct FnPlanar<F> {
    pub f: F,
    pub decay: f64,
}

impl<F: Fn([f64; 2]) -> f64 + Sync> PlanarFunction for FnPlanar<F> {
    fn eval(&self, p: [f64; 2]) -> f64 {
        (self.f)(p)
    }
    fn decay(&self) -> f64 {
        self.decay
    }
}

/// `ξ̂(θ)` and `ω_ξ(θ)`.
pub fn angle_frame(theta: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    ([c, s], [-s, c])
}

/// `∫ v(y + tω) dt` for `y ⊥ ω` in the plane.
pub fn xray_forward<V: PlanarFunction + ?Sized>(v: &V, y: [f64; 2], omega: [f64; 2], opts: &QuadOptions) -> Result<f64> {
    if !(v.decay() > 1.0) {
        return Err(Error::Domain(format!("X-ray transform needs decay > 1, got {}", v.decay())));
    }
    let wn = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
    let yn = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if (wn - 1.0).abs() > 1e-12 || (y[0] * omega[0] + y[1] * omega[1]).abs() > 1e-12 * yn.max(1.0) {
        return Err(Error::Domain("X-ray transform needs a unit ω orthogonal to y".into()));
    }
    let f = |t: f64| v.eval([y[0] + t * omega[0], y[1] + t * omega[1]]);
    let big = 8.0 * yn.max(1.0);
    let core = integrate_with_points(f, &[-big, -yn.min(big), 0.0, yn.min(big), big], opts)?;
    let alpha = v.decay() - 1.0;
    let right = integrate_power_tail(f, big, alpha, opts)?;
    let left = integrate_power_tail(|t| f(-t), big, alpha, opts)?;
    Ok(core.value + right.value + left.value)
}

/// Tail model `c|s|^{-γ} + d|s|^{-γ-1}` on each side of one projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub theta: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub gamma: f64,
    #[serde(default)]
    pub d_plus: f64,
    #[serde(default)]
    pub d_minus: f64,
}

impl TailModel {
    pub fn zero(theta: f64) -> Self {
        TailModel {
            theta,
            c_plus: 0.0,
            c_minus: 0.0,
            gamma: 1.0,
            d_plus: 0.0,
            d_minus: 0.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let a = s.abs();
        let (c, d) = if s >= 0.0 {
            (self.c_plus, self.d_plus)
        } else {
            (self.c_minus, self.d_minus)
        };
        c * a.powf(-self.gamma) + d * a.powf(-self.gamma - 1.0)
    }
}

/// Sampled projections over `angles × offsets`, angle-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub s_max: f64,
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    pub tails: Vec<TailModel>,
}

/// Sinogram grid sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadonGrid {
    pub angles: usize,
    pub offsets: usize,
    pub s_max: f64,
    pub band: f64,
    /// Gauss nodes of the radial frequency rule.
    pub radial_nodes: usize,
}

impl Default for RadonGrid {
    fn default() -> Self {
        RadonGrid {
            angles: 32,
            offsets: 257,
            s_max: 40.0,
            band: 8.0,
            radial_nodes: 48,
        }
    }
}

impl RadonGrid {
    pub fn validate(&self) -> Result<()> {
        if self.angles < 2
            || self.offsets < 11
            || self.offsets.is_multiple_of(2)
            || !(self.s_max > 0.0)
            || !(self.band > 0.0)
            || self.radial_nodes < 4
        {
            return Err(Error::Domain(format!(
                "invalid Radon grid {self:?}: need >= 2 angles, an odd number >= 11 of offsets, S > 0, Ξ > 0, >= 4 radial nodes"
            )));
        }
        let nyquist = PI * (self.offsets - 1) as f64 / (2.0 * self.s_max);
        if self.band >= nyquist {
            return Err(Error::Domain(format!(
                "band Ξ = {} is not below the offset Nyquist frequency {nyquist:.3}",
                self.band
            )));
        }
        Ok(())
    }

    pub fn angle_list(&self) -> Vec<f64> {
        (0..self.angles).map(|m| PI * m as f64 / self.angles as f64).collect()
    }

    pub fn offset_list(&self) -> Vec<f64> {
        let n = self.offsets - 1;
        (0..=n).map(|i| self.s_max * (2.0 * i as f64 / n as f64 - 1.0)).collect()
    }
}

/// Fraction of the offsets (on each side) used for the tail fit and the taper.
const TAIL_FRACTION: f64 = 0.2;

impl Sinogram {
    /// Evaluate `f(θ, s)` over the grid; angles are processed in parallel.
    pub fn tabulate<F>(grid: &RadonGrid, angles: &[f64], f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        grid.validate()?;
        let offsets = grid.offset_list();
        let rows: Vec<Result<Vec<f64>>> = angles.par_iter().map(|&th| offsets.iter().map(|&s| f(th, s)).collect()).collect();
        let mut values = Vec::with_capacity(angles.len() * offsets.len());
        for r in rows {
            values.extend(r?);
        }
        Ok(Sinogram {
            s_max: grid.s_max,
            angles: angles.to_vec(),
            tails: angles.iter().map(|&t| TailModel::zero(t)).collect(),
            offsets,
            values,
        })
    }

    /// Projections of a planar function.
    pub fn from_planar<V: PlanarFunction + ?Sized>(v: &V, grid: &RadonGrid, opts: &QuadOptions) -> Result<Self> {
        let mut s = Sinogram::tabulate(grid, &grid.angle_list(), |th, s| {
            let (xi, w) = angle_frame(th);
            xray_forward(v, [s * xi[0], s * xi[1]], w, opts)
        })?;
        s.fit_tails(Some(v.decay() - 1.0))?;
        Ok(s)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let n = self.offsets.len();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= a);
        for t in &mut s.tails {
            t.c_plus *= a;
            t.c_minus *= a;
            t.d_plus *= a;
            t.d_minus *= a;
        }
        s
    }

    /// `a·self + b·other` on identical grids (tails are refitted).
    pub fn combine(&self, a: f64, other: &Sinogram, b: f64, gamma: Option<f64>) -> Result<Self> {
        if self.angles != other.angles || self.offsets != other.offsets {
            return Err(Error::Domain("sinograms live on different grids".into()));
        }
        let mut s = self.clone();
        for (v, w) in s.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        s.fit_tails(gamma)?;
        Ok(s)
    }

    /// Fit the tail models on the outer offsets; `gamma` fixes the exponent.
    pub fn fit_tails(&mut self, gamma: Option<f64>) -> Result<()> {
        let n = self.offsets.len();
        let k = ((n as f64 * TAIL_FRACTION).round() as usize).max(3);
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for m in 0..self.angles.len() {
            let row = self.row(m).to_vec();
            let plus: Vec<(f64, f64)> = (n - k..n).map(|i| (self.offsets[i], row[i])).collect();
            let minus: Vec<(f64, f64)> = (0..k).map(|i| (-self.offsets[i], row[i])).collect();
            let negligible = |side: &[(f64, f64)]| side.iter().all(|(_, v)| v.abs() <= 1e-14 * peak.max(1e-300));
            if negligible(&plus) && negligible(&minus) {
                self.tails[m] = TailModel::zero(self.angles[m]);
                continue;
            }
            let g = match gamma {
                Some(g) => g,
                None => fit_gamma(&plus, &minus)?,
            };
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Truncation(format!("tail exponent γ = {g} is not positive")));
            }
            let (c_plus, d_plus) = if negligible(&plus) { (0.0, 0.0) } else { fit_tail_coeffs(&plus, g)? };
            let (c_minus, d_minus) = if negligible(&minus) { (0.0, 0.0) } else { fit_tail_coeffs(&minus, g)? };
            self.tails[m] = TailModel {
                theta: self.angles[m],
                c_plus,
                c_minus,
                gamma: g,
                d_plus,
                d_minus,
            };
        }
        Ok(())
    }

    /// For angle sets closed under `θ → θ + π`, replace each value by the
    /// mean of `r(y, ω)` and `r(y, -ω)`, i.e. of `(θ, s)` and `(θ + π, -s)`.
    pub fn symmetrize(&self) -> Result<Self> {
        let n = self.offsets.len();
        let mut out = self.clone();
        for (m, &th) in self.angles.iter().enumerate() {
            let partner = self
                .angles
                .iter()
                .position(|&t| angle_gap(t, th + PI) < 1e-9)
                .ok_or_else(|| Error::Domain(format!("angle {th} has no partner θ + π")))?;
            for i in 0..n {
                let a = self.values[m * n + i];
                let b = self.values[partner * n + (n - 1 - i)];
                out.values[m * n + i] = 0.5 * (a + b);
            }
        }
        Ok(out)
    }

    /// CSV with columns `theta,s,r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,s,r\n");
        let n = self.offsets.len();
        for (m, th) in self.angles.iter().enumerate() {
            for (i, s) in self.offsets.iter().enumerate() {
                out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", th, s, self.values[m * n + i]));
            }
        }
        out
    }

    /// JSON sidecar `{"S": .., "tails": [..]}`.
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            #[serde(rename = "S")]
            s: f64,
            tails: &'a [TailModel],
        }
        serde_json::to_string_pretty(&Sidecar {
            s: self.s_max,
            tails: &self.tails,
        })
        .expect("sidecar serializes")
    }

    pub fn from_csv(csv: &str, sidecar: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Sidecar {
            #[serde(rename = "S")]
            s: f64,
            tails: Vec<TailModel>,
        }
        let side: Sidecar = serde_json::from_str(sidecar)?;
        let mut lines = csv.lines();
        if lines.next().map(str::trim) != Some("theta,s,r") {
            return Err(Error::Format("sinogram CSV must start with the header theta,s,r".into()));
        }
        let mut angles: Vec<f64> = vec![];
        let mut offsets: Vec<f64> = vec![];
        let mut values = vec![];
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", ln + 2)))?;
            if f.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 columns", ln + 2)));
            }
            if angles.last() != Some(&f[0]) {
                angles.push(f[0]);
            }
            if angles.len() == 1 {
                offsets.push(f[1]);
            }
            values.push(f[2]);
        }
        if angles.is_empty() || values.len() != angles.len() * offsets.len() || side.tails.len() != angles.len() {
            return Err(Error::Format("sinogram CSV is not a full angle × offset grid".into()));
        }
        Ok(Sinogram {
            s_max: side.s,
            angles,
            offsets,
            values,
            tails: side.tails,
        })
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Log-log regression of `|r|` on both outer sides.
fn fit_gamma(plus: &[(f64, f64)], minus: &[(f64, f64)]) -> Result<f64> {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut n = 0.0;
    for &(s, v) in plus.iter().chain(minus) {
        if v == 0.0 {
            continue;
        }
        let (x, y) = (s.ln(), v.abs().ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    let den = n * sxx - sx * sx;
    if n < 3.0 || den.abs() < 1e-300 {
        return Err(Error::Truncation("too few nonzero tail samples to fit γ".into()));
    }
    Ok(-(n * sxy - sx * sy) / den)
}

/// Least squares for `(c, d)` in `c·s^{-γ} + d·s^{-γ-1}`.
fn fit_tail_coeffs(side: &[(f64, f64)], g: f64) -> Result<(f64, f64)> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, v) in side {
        // scale rows by s^γ so both basis functions are O(1)
        let (p, q) = (1.0, 1.0 / s);
        let r = v * s.powf(g);
        a11 += p * p;
        a12 += p * q;
        a22 += q * q;
        b1 += p * r;
        b2 += q * r;
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-14 * a11 * a22) {
        return Err(Error::Truncation("tail fit is degenerate".into()));
    }
    Ok(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// `∫_S^∞ e^{-iρs} s^{-γ} ds` for `ρ > 0`, by rotating the contour to
/// `s = S - iτ`: `-i e^{-iρS} ∫_0^∞ e^{-ρτ} (S - iτ)^{-γ} dτ`.
pub fn oscillatory_tail(rho: f64, s: f64, gamma: f64, opts: &QuadOptions) -> Result<Complex64> {
    if !(rho > 0.0 && s > 0.0) {
        return Err(Error::Domain("oscillatory tail needs ρ > 0 and S > 0".into()));
    }
    let f = |tau: f64| (-rho * tau).exp() * Complex64::new(s, -tau).powf(-gamma);
    let r = integrate_semi_infinite(f, 0.0, 1.0 / rho, opts)?;
    Ok(-Complex64::i() * Complex64::from_polar(1.0, -rho * s) * r.value)
}

/// `C^∞` step: 0 for `x <= 0`, 1 for `x >= 1`.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

/// `v̂(ρ·ξ̂(θ_m))` for the `m`-th angle.
pub fn slice_value(sino: &Sinogram, m: usize, rho: f64, opts: &QuadOptions) -> Result<Complex64> {
    let n = sino.offsets.len();
    let s_max = sino.s_max;
    let h = 2.0 * s_max / (n - 1) as f64;
    let inner = s_max * (1.0 - TAIL_FRACTION);
    let tail = &sino.tails[m];
    let taper = |s: f64| smooth_step((s.abs() - inner) / (s_max - inner));
    let row = sino.row(m);
    // trapezoid of e^{-iρs}(r - σm): the bracket vanishes smoothly at ±S
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, (&s, &r)) in sino.offsets.iter().zip(row).enumerate() {
        let sig = taper(s);
        let f = if sig == 0.0 { r } else { r - sig * tail.eval(s) };
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * f * Complex64::from_polar(1.0, -rho * s);
    }
    acc *= h;
    // σm on the taper zones, by composite Gauss–Legendre
    let has_tail = tail.c_plus != 0.0 || tail.c_minus != 0.0 || tail.d_plus != 0.0 || tail.d_minus != 0.0;
    if has_tail {
        let (x, w) = gauss_legendre(24);
        let panels = 1 + ((rho * (s_max - inner)) / PI).ceil() as usize;
        let width = (s_max - inner) / panels as f64;
        for p in 0..panels {
            let a = inner + p as f64 * width;
            for (xk, wk) in x.iter().zip(&w) {
                let s = a + 0.5 * width * (xk + 1.0);
                let sig = taper(s);
                let val = 0.5 * width * wk * sig;
                acc += val * tail.eval(s) * Complex64::from_polar(1.0, -rho * s);
                acc += val * tail.eval(-s) * Complex64::from_polar(1.0, rho * s);
            }
        }
        // m beyond ±S; the negative side is the conjugate integral
        for (c_p, c_m, g) in [(tail.c_plus, tail.c_minus, tail.gamma), (tail.d_plus, tail.d_minus, tail.gamma + 1.0)] {
            if c_p == 0.0 && c_m == 0.0 {
                continue;
            }
            let t = oscillatory_tail(rho, s_max, g, opts)?;
            acc += c_p * t + c_m * t.conj();
        }
    } else {
        let edge = row[0].abs().max(row[n - 1].abs());
        let peak = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if edge > 1e-10 * peak.max(1e-300) {
            return Err(Error::Truncation(format!(
                "projection at θ = {} is {edge:e} at the window edge and has no tail model",
                sino.angles[m]
            )));
        }
    }
    Ok(acc / (2.0 * PI))
}

/// `v̂(ξ)` for `ξ` along one of the sampled angles (or their opposites).
pub fn fourier_slice(sino: &Sinogram, xi: [f64; 2], opts: &QuadOptions) -> Result<Complex64> {
    let rho = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
    if rho == 0.0 {
        return Err(Error::Domain("fourier_slice needs ξ != 0".into()));
    }
    let th = xi[1].atan2(xi[0]);
    for (m, &a) in sino.angles.iter().enumerate() {
        if angle_gap(a, th) < 1e-9 {
            return slice_value(sino, m, rho, opts);
        }
        if angle_gap(a + PI, th) < 1e-9 {
            return Ok(slice_value(sino, m, rho, opts)?.conj());
        }
    }
    Err(Error::Domain(format!("direction θ = {th} is not a sampled angle")))
}

/// A reconstructed value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub value: f64,
    pub error: f64,
}

fn band_integral(sino: &Sinogram, p: [f64; 2], band: f64, nodes: usize, opts: &QuadOptions) -> Result<f64> {
    // ρ = Ξu², which tames the |ρ|^{γ-1} behaviour of v̂ at the origin
    let (x, w) = gauss_legendre(nodes);
    let per_angle: Vec<Result<f64>> = (0..sino.angles.len())
        .into_par_iter()
        .map(|m| {
            let (xi, _) = angle_frame(sino.angles[m]);
            let shift = xi[0] * p[0] + xi[1] * p[1];
            let mut acc = 0.0;
            for (xk, wk) in x.iter().zip(&w) {
                let u = 0.5 * (xk + 1.0);
                let rho = band * u * u;
                let jac = 2.0 * band * u * 0.5;
                let vh = slice_value(sino, m, rho, opts)? * Complex64::from_polar(1.0, rho * shift);
                acc += wk * jac * vh.re * rho;
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for r in per_angle {
        total += r?;
    }
    // trapezoid in θ over [0, π) (periodic integrand), times 1/π
    Ok(total / sino.angles.len() as f64)
}

/// `v(p) ≈ (2π)^{-1} ∫_{|ξ|<=Ξ} v̂(ξ) e^{i⟨ξ,p⟩} dξ`; the error estimate is
/// the change from band `Ξ/2` to `Ξ`.
pub fn invert_at(sino: &Sinogram, p: [f64; 2], grid: &RadonGrid) -> Result<Inversion> {
    if !(grid.band > 0.0) {
        return Err(Error::Domain("band must be positive".into()));
    }
    let opts = QuadOptions::with_tol(1e-10);
    let full = band_integral(sino, p, grid.band, grid.radial_nodes, &opts)?;
    let half = band_integral(sino, p, 0.5 * grid.band, grid.radial_nodes, &opts)?;
    if !full.is_finite() {
        return Err(Error::Inversion("inverse Fourier integral is not finite".into()));
    }
    Ok(Inversion {
        value: full,
        error: (full - half).abs(),
    })
}

pub fn invert_at_origin(sino: &Sinogram, grid: &RadonGrid) -> Result<Inversion> {
    invert_at(sino, [0.0, 0.0], grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian() -> FnPlanar<impl Fn([f64; 2]) -> f64> {
        FnPlanar {
            f: |p: [f64; 2]| (-(p[0] * p[0] + p[1] * p[1])).exp(),
            decay: 10.0,
        }
    }

    #[test]
    fn gaussian_line_integral() {
        let v = gaussian();
        let (xi, w) = angle_frame(0.3);
        let r = xray_forward(&v, [0.7 * xi[0], 0.7 * xi[1]], w, &QuadOptions::default()).unwrap();
        assert!((r - PI.sqrt() * (-0.49f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn slow_decay_rejected() {
        let v = FnPlanar {
            f: |_: [f64; 2]| 1.0,
            decay: 1.0,
        };
        assert!(xray_forward(&v, [0.0, 0.0], [1.0, 0.0], &QuadOptions::default()).is_err());
    }

    #[test]
    fn gaussian_slice_and_origin() {
        let grid = RadonGrid::default();
        let sino = Sinogram::from_planar(&gaussian(), &grid, &QuadOptions::default()).unwrap();
        let opts = QuadOptions::default();
        for rho in [0.5, 2.0, 5.0] {
            let (xi, _) = angle_frame(sino.angles[3]);
            let v = fourier_slice(&sino, [rho * xi[0], rho * xi[1]], &opts).unwrap();
            assert!((v.re - 0.5 * (-rho * rho / 4.0).exp()).abs() < 1e-10);
            assert!(v.im.abs() < 1e-8);
        }
        let inv = invert_at_origin(&sino, &grid).unwrap();
        assert!((inv.value - 1.0).abs() < 1e-3, "{inv:?}");
    }

    #[test]
    fn oscillatory_tail_matches_direct_sum() {
        // γ = 2: ∫_S^∞ e^{-iρs}s^{-2} ds, compare against adaptive quadrature on a long range + remainder bound
        let (rho, s, g) = (1.3, 5.0, 2.0);
        let t = oscillatory_tail(rho, s, g, &QuadOptions::with_tol(1e-12)).unwrap();
        let f = |x: f64| Complex64::from_polar(x.powf(-g), -rho * x);
        let pts: Vec<f64> = (0..=4000).map(|k| s + k as f64 * 0.5).collect();
        let direct = integrate_with_points(f, &pts, &QuadOptions::with_tol(1e-12)).unwrap().value;
        // remainder beyond 2005 is below 1/(ρ·2005²)
        assert!((t - direct).norm() < 1e-6, "{t} vs {direct}");
    }

    #[test]
    fn frame_is_orthonormal() {
        let f = PlaneFrame::new(&[0.3, -1.0, 2.0]).unwrap();
        assert!(f.gram_defect() < 1e-12);
        assert!(PlaneFrame::new(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let grid = RadonGrid {
            angles: 4,
            offsets: 21,
            s_max: 4.0,
            band: 2.0,
            radial_nodes: 8,
        };
        let sino = Sinogram::from_planar(&gaussian(), &grid, &QuadOptions::default()).unwrap();
        let back = Sinogram::from_csv(&sino.to_csv(), &sino.sidecar_json()).unwrap();
        assert_eq!(back, sino);
    }
}
