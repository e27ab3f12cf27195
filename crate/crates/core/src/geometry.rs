//! Small dense-vector helpers and the unit-sphere types shared by every stage.
//!
//! Dimensions are runtime values (`d >= 3`), so points are plain `Vec<f64>`
//! and the helpers below work on slices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|ω| - 1` accepted by [`Direction::new`].
pub const UNIT_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Component of `v` orthogonal to the unit vector `u`.
pub fn reject(v: &[f64], u: &[f64]) -> Vec<f64> {
    axpy(v, -dot(v, u), u)
}

/// Unit basis vector `e_i` in `R^d`.
pub fn basis(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// A point of the unit sphere `S^{d-1}`, `d >= 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Accepts only vectors already normalised to within [`UNIT_TOL`].
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::Construction(format!("directions need d >= 3, got d = {}", v.len())));
        }
        let n = norm(&v);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Construction(format!("|ω| = {n} is not 1")));
        }
        Ok(Direction(v))
    }

    /// Normalises an arbitrary non-zero vector.
    pub fn normalize(v: &[f64]) -> Result<Self> {
        let n = norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("cannot normalise a zero vector".into()));
        }
        let mut u = scale(v, 1.0 / n);
        // One Newton step on the norm keeps |u| within a few ulps of 1.
        let m = norm(&u);
        u.iter_mut().for_each(|x| *x /= m);
        Direction::new(u)
    }

    pub fn axis(d: usize, i: usize) -> Self {
        Direction(basis(d, i))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn neg(&self) -> Self {
        Direction(self.0.iter().map(|x| -x).collect())
    }

    /// Great-circle distance to `other`, in radians.
    pub fn geodesic_distance(&self, other: &Direction) -> f64 {
        // atan2 form stays accurate for nearly equal and nearly antipodal pairs
        let c = dot(&self.0, &other.0);
        let s = norm(&reject(&other.0, &self.0));
        s.atan2(c)
    }

    /// Orthonormal basis of the hyperplane `Π_ω` orthogonal to this direction.
    ///
    /// Gram-Schmidt over the standard basis, skipping the axis most aligned
    /// with `ω`, so the result is deterministic.
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let skip = (0..d).max_by(|&i, &j| self.0[i].abs().total_cmp(&self.0[j].abs())).unwrap_or(0);
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
        for i in (0..d).filter(|&i| i != skip) {
            let mut v = reject(&basis(d, i), &self.0);
            for b in &out {
                v = reject(&v, b);
            }
            let n = norm(&v);
            out.push(scale(&v, 1.0 / n));
        }
        out
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.0
    }
}

impl AsRef<[f64]> for Direction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Rotation of `R^d` given by a proper orthogonal matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    rows: Vec<f64>,
}

impl Rotation {
    /// Rotation by `angle` in the oriented plane spanned by axes `i` and `j`.
    pub fn plane(dim: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut rows = vec![0.0; dim * dim];
        for k in 0..dim {
            rows[k * dim + k] = 1.0;
        }
        let (s, c) = angle.sin_cos();
        rows[i * dim + i] = c;
        rows[i * dim + j] = -s;
        rows[j * dim + i] = s;
        rows[j * dim + j] = c;
        Rotation { dim, rows }
    }

    pub fn then(&self, next: &Rotation) -> Rotation {
        let d = self.dim;
        let mut rows = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                rows[r * d + c] = (0..d).map(|k| next.rows[r * d + k] * self.rows[k * d + c]).sum();
            }
        }
        Rotation { dim: d, rows }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|r| dot(&self.rows[r * d..(r + 1) * d], v)).collect()
    }

    pub fn apply_dir(&self, v: &Direction) -> Direction {
        Direction::normalize(&self.apply(v.as_slice())).expect("rotation preserves norm")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_and_low_dimension() {
        assert!(Direction::new(vec![1.0, 0.0]).is_err());
        assert!(Direction::new(vec![1.0, 1.0, 0.0]).is_err());
        assert!(Direction::new(vec![0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_orthogonal_to_omega() {
        let w = Direction::normalize(&[0.3, -0.5, 0.8, 0.1]).unwrap();
        let b = w.tangent_basis();
        assert_eq!(b.len(), 3);
        for (i, u) in b.iter().enumerate() {
            assert!(dot(u, w.as_slice()).abs() < 1e-14);
            for (j, v) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn geodesic_distance_of_quarter_turn() {
        let a = Direction::axis(3, 0);
        let b = Direction::axis(3, 1);
        assert!((a.geodesic_distance(&b) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(a.geodesic_distance(&a), 0.0);
    }
}
