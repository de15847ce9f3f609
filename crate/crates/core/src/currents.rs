//! Currents representation of discretized curves and the kernel
//! dissimilarity used as the data-attachment term.
//!
//! A polyline becomes a set of oriented segments: midpoints `c_s` and
//! (unnormalized) tangents `t_s = P_{s+1} - P_s`. The squared distance is
//!
//! ```text
//! g(a, b) = <a, a> - 2 <a, b> + <b, b>,   <a, b> = sum_{s, r} k_W(c_s, d_r) t_s . u_r
//! ```
//!
//! with a Gaussian spatial kernel of width `sigma_w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kernel::{gauss, inv_two_sigma_sq};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttachmentConfig<T> {
    pub sigma_w: T,
}

impl<T: Scalar> AttachmentConfig<T> {
    pub fn new(sigma_w: T) -> Result<Self> {
        if !(sigma_w.is_finite() && sigma_w > T::zero()) {
            return Err(Error::Config(format!("sigma_w must be finite and > 0, got {sigma_w}")));
        }
        Ok(Self { sigma_w })
    }
}

impl Default for AttachmentConfig<f64> {
    fn default() -> Self {
        Self { sigma_w: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentRep<T> {
    pub centers: Vec<Vec2<T>>,
    pub tangents: Vec<Vec2<T>>,
}

impl<T: Scalar> CurrentRep<T> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Segment midpoints and difference vectors of a polyline.
pub fn curve_to_current<T: Scalar>(points: &[Vec2<T>]) -> CurrentRep<T> {
    let half = T::lit(0.5);
    let (centers, tangents) = points
        .windows(2)
        .map(|w| ((w[0] + w[1]) * half, w[1] - w[0]))
        .unzip();
    CurrentRep { centers, tangents }
}

fn inner<T: Scalar>(a: &CurrentRep<T>, b: &CurrentRep<T>, c: T) -> T {
    let mut acc = T::zero();
    for (ca, ta) in a.centers.iter().zip(&a.tangents) {
        for (cb, tb) in b.centers.iter().zip(&b.tangents) {
            acc = acc + gauss(*ca, *cb, c) * ta.dot(*tb);
        }
    }
    acc
}

/// Squared currents distance between two representations, clamped at 0.
pub fn current_distance_sq<T: Scalar>(a: &CurrentRep<T>, b: &CurrentRep<T>, sigma_w: T) -> T {
    let c = inv_two_sigma_sq(sigma_w);
    let g = inner(a, a, c) - T::lit(2.0) * inner(a, b, c) + inner(b, b, c);
    g.max(T::zero())
}

/// Convenience wrapper over polylines.
pub fn curve_distance_sq<T: Scalar>(a: &[Vec2<T>], b: &[Vec2<T>], sigma_w: T) -> T {
    current_distance_sq(&curve_to_current(a), &curve_to_current(b), sigma_w)
}

/// Distance and its gradient with respect to the vertices of `a`.
///
/// The gradient is that of the unclamped expression. When `a` and `b` are
/// the same polyline the tangent part cancels exactly, so the gradient is
/// exactly zero there.
pub fn curve_distance_sq_grad<T: Scalar>(
    a: &[Vec2<T>],
    b: &[Vec2<T>],
    sigma_w: T,
) -> (T, Vec<Vec2<T>>) {
    let ra = curve_to_current(a);
    let rb = curve_to_current(b);
    let c = inv_two_sigma_sq(sigma_w);
    let is2 = T::one() / (sigma_w * sigma_w);
    let two = T::lit(2.0);
    let ns = ra.len();
    let mut g_c = vec![Vec2::zero(); ns];
    let mut g_t = vec![Vec2::zero(); ns];
    let mut aa = T::zero();
    let mut ab = T::zero();
    for s in 0..ns {
        let (cs, ts) = (ra.centers[s], ra.tangents[s]);
        // d/dt_s and d/dc_s of <a,a> and -2<a,b>, accumulated separately so
        // identical inputs cancel term by term
        let mut self_t = Vec2::zero();
        let mut self_c = Vec2::zero();
        for r in 0..ns {
            let d = cs - ra.centers[r];
            let k = gauss(cs, ra.centers[r], c);
            let tt = ts.dot(ra.tangents[r]);
            aa = aa + k * tt;
            self_t += ra.tangents[r] * k;
            self_c -= d * (k * tt * is2);
        }
        let mut cross_t = Vec2::zero();
        let mut cross_c = Vec2::zero();
        for r in 0..rb.len() {
            let d = cs - rb.centers[r];
            let k = gauss(cs, rb.centers[r], c);
            let tt = ts.dot(rb.tangents[r]);
            ab = ab + k * tt;
            cross_t += rb.tangents[r] * k;
            cross_c -= d * (k * tt * is2);
        }
        g_t[s] = (self_t - cross_t) * two;
        g_c[s] = (self_c - cross_c) * two;
    }
    let bb = inner(&rb, &rb, c);
    let g = (aa - two * ab + bb).max(T::zero());

    let half = T::lit(0.5);
    let mut grad = vec![Vec2::zero(); a.len()];
    for s in 0..ns {
        let gc = g_c[s] * half;
        grad[s] += gc - g_t[s];
        grad[s + 1] += gc + g_t[s];
    }
    (g, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn random_curve(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2<f64>> {
        (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                v(x, 0.3 * (3.0 * x).sin() + rng.random_range(-0.1..0.1))
            })
            .collect()
    }

    #[test]
    fn two_point_current() {
        let r = curve_to_current(&[v(0.0, 0.0), v(1.0, 0.0)]);
        assert_eq!(r.centers, vec![v(0.5, 0.0)]);
        assert_eq!(r.tangents, vec![v(1.0, 0.0)]);
    }

    #[test]
    fn reversal_negates_tangents() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_curve(&mut rng, 9);
        let mut rev = c.clone();
        rev.reverse();
        let a = curve_to_current(&c);
        let b = curve_to_current(&rev);
        for s in 0..a.len() {
            assert_eq!(b.tangents[a.len() - 1 - s], -a.tangents[s]);
        }
    }

    #[test]
    fn subdividing_a_straight_segment() {
        // Midpoint sampling makes subdivision invariance hold up to
        // O((len / sigma_w)^2); at desk-scale segment lengths it is below 1e-10.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let other = random_curve(&mut rng, 12);
        for (len, tol) in [(1e-4, 1e-10), (1e-2, 1e-5)] {
            let p0 = v(-0.2, 0.1);
            let dir = v(0.8, 0.6);
            let coarse = [p0, p0 + dir * len];
            let halves = [p0, p0 + dir * (len / 2.0), p0 + dir * len];
            let fixed = [other[3], other[4], other[5], other[6]];
            let g1 = curve_distance_sq(&coarse, &fixed, 0.1);
            let g2 = curve_distance_sq(&halves, &fixed, 0.1);
            assert!((g1 - g2).abs() <= tol, "len {len}: {g1} vs {g2}");
        }
    }

    #[test]
    fn identical_curves_have_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_curve(&mut rng, 30);
        assert!(curve_distance_sq(&c, &c, 0.1) <= 1e-12);
        let (g, grad) = curve_distance_sq_grad(&c, &c, 0.1);
        assert!(g <= 1e-12);
        assert!(grad.iter().all(|z| *z == Vec2::zero()));
    }

    #[test]
    fn distant_unit_segments() {
        let a = [v(-0.5, 0.0), v(0.5, 0.0)];
        let b = [v(99.5, 50.0), v(100.5, 50.0)];
        assert_relative_eq!(curve_distance_sq(&a, &b, 0.1), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_decreases_under_approach() {
        let a = [v(-0.05, 0.0), v(0.05, 0.0)];
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let off = 0.8 * (1.0 - i as f64 / 40.0);
            let b = [v(-0.05 + off, 0.6 * off), v(0.05 + off, 0.6 * off)];
            let g = curve_distance_sq(&a, &b, 0.1);
            assert!(g <= prev + 1e-15, "step {i}: {g} > {prev}");
            prev = g;
        }
        assert!(prev <= 1e-15);
    }

    #[test]
    fn translation_invariance_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_curve(&mut rng, 15);
            let b = random_curve(&mut rng, 11);
            let shift = v(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let at: Vec<_> = a.iter().map(|&p| p + shift).collect();
            let bt: Vec<_> = b.iter().map(|&p| p + shift).collect();
            let g = curve_distance_sq(&a, &b, 0.1);
            assert!((g - curve_distance_sq(&at, &bt, 0.1)).abs() <= 1e-12);
            assert!((g - curve_distance_sq(&b, &a, 0.1)).abs() <= 1e-12);
            assert!(g >= 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_curve(&mut rng, 14);
        let b = random_curve(&mut rng, 17);
        let (_, grad) = curve_distance_sq_grad(&a, &b, 0.1);
        let h = 1e-6;
        for i in 0..a.len() {
            for c in 0..2 {
                let mut ap = a.clone();
                let mut am = a.clone();
                if c == 0 {
                    ap[i].x += h;
                    am[i].x -= h;
                } else {
                    ap[i].y += h;
                    am[i].y -= h;
                }
                let fd = (curve_distance_sq(&ap, &b, 0.1) - curve_distance_sq(&am, &b, 0.1)) / (2.0 * h);
                let an = if c == 0 { grad[i].x } else { grad[i].y };
                assert!((an - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{an} vs {fd}");
            }
        }
    }
}
