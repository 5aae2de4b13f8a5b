use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// A point `(x, y, z)` of `H_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return usage(format!(
                "x and y blocks must have equal positive length, got {} and {}",
                x.len(),
                y.len()
            ));
        }
        if !x.iter().chain(&y).all(|v| v.is_finite()) || !z.is_finite() {
            return Err(Error::Domain("group point has non-finite entries".into()));
        }
        Ok(Self { x, y, z })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: 0.0,
        }
    }

    /// Builds a point from the stacked coordinates `(x_1..x_n, y_1..y_n, z)`.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len().is_multiple_of(2) {
            return usage(format!(
                "stacked coordinates must have odd length 2n+1 >= 3, got {}",
                coords.len()
            ));
        }
        let n = (coords.len() - 1) / 2;
        Self::new(coords[..n].to_vec(), coords[n..2 * n].to_vec(), coords[2 * n])
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Stacked coordinates `(x_1..x_n, y_1..y_n, z)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n() + 1);
        out.extend_from_slice(&self.x);
        out.extend_from_slice(&self.y);
        out.push(self.z);
        out
    }

    pub fn horizontal(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn max_abs_diff(&self, other: &GroupPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same_n(p: &GroupPoint, q: &GroupPoint) -> Result<()> {
    if p.n() != q.n() {
        return usage(format!("dimension mismatch: n={} vs n={}", p.n(), q.n()));
    }
    Ok(())
}

/// The symplectic form `ω(v, v') = Σ_i (x_i y'_i − x'_i y_i)` on stacked
/// horizontal vectors `v = (x, y)`.
pub fn omega(v: &[f64], v_prime: &[f64]) -> Result<f64> {
    if v.len() != v_prime.len() || v.is_empty() || !v.len().is_multiple_of(2) {
        return usage(format!(
            "omega needs two vectors of equal even length, got {} and {}",
            v.len(),
            v_prime.len()
        ));
    }
    let n = v.len() / 2;
    Ok(omega_blocks(&v[..n], &v[n..], &v_prime[..n], &v_prime[n..]))
}

#[inline]
pub(crate) fn omega_blocks(x: &[f64], y: &[f64], xp: &[f64], yp: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(xp.iter().zip(yp))
        .map(|((xi, yi), (xpi, ypi))| xi * ypi - xpi * yi)
        .sum()
}

/// Group law `(v, z) ⋆ (v', z') = (v + v', z + z' + ½ω(v, v'))`.
pub fn star(p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
    check_same_n(p, q)?;
    Ok(star_unchecked(p, q))
}

pub(crate) fn star_unchecked(p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
    let x = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
    let y = p.y.iter().zip(&q.y).map(|(a, b)| a + b).collect();
    let z = p.z + q.z + 0.5 * omega_blocks(&p.x, &p.y, &q.x, &q.y);
    GroupPoint { x, y, z }
}

/// `p^{-1} = (−v, −z)`, since `ω(v, v) = 0`.
pub fn inverse(p: &GroupPoint) -> GroupPoint {
    GroupPoint {
        x: p.x.iter().map(|v| -v).collect(),
        y: p.y.iter().map(|v| -v).collect(),
        z: -p.z,
    }
}

/// The mirror map `A(x, y, z) = (−x, −y, z)`. It is an involutive
/// automorphism: `A(p ⋆ q) = Ap ⋆ Aq`.
pub fn mirror(p: &GroupPoint) -> GroupPoint {
    GroupPoint {
        x: p.x.iter().map(|v| -v).collect(),
        y: p.y.iter().map(|v| -v).collect(),
        z: p.z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], y: &[f64], z: f64) -> GroupPoint {
        GroupPoint::new(x.to_vec(), y.to_vec(), z).unwrap()
    }

    #[test]
    fn omega_examples() {
        let v = [0.3, -1.2, 2.0, 0.7];
        assert_eq!(omega(&v, &v).unwrap(), 0.0);
        assert_eq!(omega(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(omega(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(omega(&[1.0, 0.0], &[1.0, 0.0, 0.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn star_examples() {
        let q = pt(&[0.4], &[-2.0], 1.5);
        assert_eq!(star(&GroupPoint::identity(1), &q).unwrap(), q);
        let e1 = pt(&[1.0], &[0.0], 0.0);
        let e2 = pt(&[0.0], &[1.0], 0.0);
        assert_eq!(star(&e1, &e2).unwrap(), pt(&[1.0], &[1.0], 0.5));
        assert_eq!(star(&e2, &e1).unwrap(), pt(&[1.0], &[1.0], -0.5));
        assert!(star(&e1, &GroupPoint::identity(2)).is_err());
    }

    #[test]
    fn inverse_and_mirror_examples() {
        assert_eq!(inverse(&GroupPoint::identity(1)), GroupPoint::identity(1));
        let p = pt(&[1.0], &[2.0], 3.0);
        assert_eq!(inverse(&p), pt(&[-1.0], &[-2.0], -3.0));
        assert_eq!(star(&p, &inverse(&p)).unwrap(), GroupPoint::identity(1));
        assert_eq!(mirror(&p), pt(&[-1.0], &[-2.0], 3.0));
        assert_eq!(mirror(&GroupPoint::identity(1)), GroupPoint::identity(1));
    }

    #[test]
    fn rejects_bad_points() {
        assert!(GroupPoint::new(vec![1.0], vec![], 0.0).is_err());
        assert!(GroupPoint::new(vec![f64::NAN], vec![0.0], 0.0).is_err());
        assert!(GroupPoint::from_coords(&[1.0, 2.0]).is_err());
        let p = GroupPoint::from_coords(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p, pt(&[1.0, 2.0], &[3.0, 4.0], 5.0));
    }
}
