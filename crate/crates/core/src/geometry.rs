//! Planar points and curves.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point or vector in the plane: `x` is (normalized) time, `y` magnitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Scalar>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x = self.x + rhs.x;
        self.y = self.y + rhs.y;
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x = self.x - rhs.x;
        self.y = self.y - rhs.y;
    }
}

/// `out[i] += a[i] * s`
#[inline]
pub(crate) fn axpy<T: Scalar>(out: &mut [Vec2<T>], s: T, a: &[Vec2<T>]) {
    for (o, v) in out.iter_mut().zip(a) {
        *o += *v * s;
    }
}

/// Largest absolute coordinate of a point set.
pub fn max_abs<T: Scalar>(pts: &[Vec2<T>]) -> T {
    pts.iter()
        .fold(T::zero(), |m, p| m.max(p.x.abs()).max(p.y.abs()))
}

/// Tolerance on the `[-1, 1]` box for normalized curves.
pub const BOX_TOL: f64 = 1e-9;

/// Ordered planar polyline, one subject-visit activity profile in
/// normalized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve<T> {
    points: Vec<Vec2<T>>,
}

impl<T: Scalar> Curve<T> {
    /// Builds a validated curve: at least 4 points, strictly increasing `x`,
    /// all coordinates inside `[-1, 1]`.
    pub fn new(points: Vec<Vec2<T>>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidCurve(format!(
                "need at least 4 points, got {}",
                points.len()
            )));
        }
        let tol = T::lit(BOX_TOL);
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidCurve(format!("non-finite point at index {i}")));
            }
            if p.x.abs() > T::one() + tol || p.y.abs() > T::one() + tol {
                return Err(Error::InvalidCurve(format!(
                    "point {i} = ({}, {}) outside [-1, 1]",
                    p.x, p.y
                )));
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].x <= w[0].x) {
            return Err(Error::InvalidCurve(format!(
                "x not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { points })
    }

    /// Wraps a point list without validation (deformed curves may leave the
    /// unit box).
    pub fn new_unchecked(points: Vec<Vec2<T>>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Vec2<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec2<T>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when `x` is strictly increasing along the polyline.
    pub fn is_x_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].x > w[0].x)
    }

    pub fn cast<U: Scalar>(&self) -> Curve<U> {
        Curve {
            points: self.points.iter().map(|p| p.cast()).collect(),
        }
    }

    /// Linear interpolation of `y` at abscissa `x`, clamped to the end values
    /// outside the curve's range. Requires monotone `x`.
    pub fn interpolate_y(&self, x: T) -> T {
        let pts = &self.points;
        let n = pts.len();
        if x <= pts[0].x {
            return pts[0].y;
        }
        if x >= pts[n - 1].x {
            return pts[n - 1].y;
        }
        let hi = pts.partition_point(|p| p.x <= x).min(n - 1);
        let (a, b) = (pts[hi - 1], pts[hi]);
        let w = (x - a.x) / (b.x - a.x);
        a.y + (b.y - a.y) * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Vec<Vec2<f64>> {
        (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                Vec2::new(x, 0.5 * x)
            })
            .collect()
    }

    #[test]
    fn curve_validation() {
        assert!(Curve::new(line(4)).is_ok());
        assert!(Curve::new(line(3)).is_err());
        let mut bad = line(5);
        bad[2].x = bad[1].x;
        assert!(Curve::new(bad).is_err());
        let mut out = line(5);
        out[4].y = 1.1;
        assert!(Curve::new(out).is_err());
        let mut edge = line(5);
        edge[4].x = 1.0 + 5e-10;
        assert!(Curve::new(edge).is_ok());
    }

    #[test]
    fn interpolation() {
        let c = Curve::new(line(5)).unwrap();
        assert!((c.interpolate_y(0.25) - 0.125).abs() < 1e-15);
        assert_eq!(c.interpolate_y(-3.0), -0.5);
        assert_eq!(c.interpolate_y(2.0), 0.5);
        assert_eq!(c.interpolate_y(0.5), 0.25);
    }
}
