//! Gaussian isotropic reproducing kernel and the vector fields it spans.
//!
//! A deformation velocity is `v(z) = sum_j k(q_j, z) p_j` with
//! `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))` acting as `k * I_2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig<T> {
    /// Rigidity (width) of the deformation kernel.
    pub sigma_v: T,
}

impl<T: Scalar> KernelConfig<T> {
    pub fn new(sigma_v: T) -> Result<Self> {
        if !(sigma_v.is_finite() && sigma_v > T::zero()) {
            return Err(Error::Config(format!("sigma_v must be finite and > 0, got {sigma_v}")));
        }
        Ok(Self { sigma_v })
    }
}

impl Default for KernelConfig<f64> {
    fn default() -> Self {
        Self { sigma_v: 0.2 }
    }
}

/// Control points carrying the momenta of a deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlPoints<T>(pub Vec<Vec2<T>>);

impl<T: Scalar> ControlPoints<T> {
    pub fn new(points: Vec<Vec2<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Dimension("control point set is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Dimension("non-finite control point".into()));
        }
        Ok(Self(points))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Vec2<T>] {
        &self.0
    }
}

/// `exp(-|x - y|^2 / (2 sigma^2))`
#[inline]
pub fn kernel_scalar<T: Scalar>(x: Vec2<T>, y: Vec2<T>, sigma: T) -> T {
    gauss(x, y, inv_two_sigma_sq(sigma))
}

#[inline]
pub(crate) fn inv_two_sigma_sq<T: Scalar>(sigma: T) -> T {
    T::one() / (T::lit(2.0) * sigma * sigma)
}

#[inline]
pub(crate) fn gauss<T: Scalar>(x: Vec2<T>, y: Vec2<T>, inv_2s2: T) -> T {
    (-(x - y).norm_sq() * inv_2s2).exp()
}

/// Evaluates the velocity field `v(z) = sum_j k(q_j, z) p_j` at each target.
pub fn eval_vector_field<T: Scalar>(
    targets: &[Vec2<T>],
    q: &[Vec2<T>],
    p: &[Vec2<T>],
    sigma_v: T,
) -> Result<Vec<Vec2<T>>> {
    if q.len() != p.len() {
        return Err(Error::Dimension(format!(
            "{} control points but {} momenta",
            q.len(),
            p.len()
        )));
    }
    let c = inv_two_sigma_sq(sigma_v);
    Ok(targets
        .iter()
        .map(|&z| {
            q.iter()
                .zip(p)
                .fold(Vec2::zero(), |acc, (&qj, &pj)| acc + pj * gauss(qj, z, c))
        })
        .collect())
}

/// Dense symmetric Gram matrix `K[a][b] = k(q_a, q_b)`, row-major.
pub fn gram_matrix<T: Scalar>(q: &[Vec2<T>], sigma_v: T) -> Vec<T> {
    let n = q.len();
    let c = inv_two_sigma_sq(sigma_v);
    let mut k = vec![T::zero(); n * n];
    for a in 0..n {
        k[a * n + a] = T::one();
        for b in (a + 1)..n {
            let v = gauss(q[a], q[b], c);
            k[a * n + b] = v;
            k[b * n + a] = v;
        }
    }
    k
}

/// `K p` for a row-major Gram matrix.
pub fn gram_apply<T: Scalar>(gram: &[T], p: &[Vec2<T>]) -> Vec<Vec2<T>> {
    let n = p.len();
    (0..n)
        .map(|a| {
            let row = &gram[a * n..(a + 1) * n];
            row.iter()
                .zip(p)
                .fold(Vec2::zero(), |acc, (&k, &pb)| acc + pb * k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    #[test]
    fn scalar_kernel_values() {
        assert_eq!(kernel_scalar(v(0.3, -0.2), v(0.3, -0.2), 0.2), 1.0);
        let k = kernel_scalar(v(0.0, 0.0), v(0.12, 0.16), 0.2);
        assert_relative_eq!(k, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(k, 0.606_530_659_712_633, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let b = v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert_eq!(kernel_scalar(a, b, 0.3), kernel_scalar(b, a, 0.3));
        }
    }

    #[test]
    fn field_examples() {
        let q = [v(0.0, 0.0), v(0.5, 0.1)];
        let zero = [Vec2::zero(); 2];
        let out = eval_vector_field(&[v(0.1, 0.1), v(-0.4, 0.9)], &q, &zero, 0.2).unwrap();
        assert!(out.iter().all(|w| *w == Vec2::zero()));

        let p1 = v(0.7, -0.3);
        let out = eval_vector_field(&[q[0]], &q[..1], &[p1], 0.2).unwrap();
        assert_eq!(out[0], p1);

        // target equidistant (distance sigma) from two control points
        let s = 0.2;
        let q = [v(-s, 0.0), v(s, 0.0)];
        let p = [v(1.0, 2.0), v(-0.5, 0.25)];
        let out = eval_vector_field(&[v(0.0, 0.0)], &q, &p, s).unwrap();
        let e = (-0.5f64).exp();
        assert_relative_eq!(out[0].x, e * 0.5, epsilon = 1e-15);
        assert_relative_eq!(out[0].y, e * 2.25, epsilon = 1e-15);

        assert!(eval_vector_field(&[v(0.0, 0.0)], &q, &p[..1], s).is_err());
    }

    #[test]
    fn gram_is_psd_and_matches_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 5, 20, 50] {
            let q: Vec<_> = (0..n)
                .map(|_| v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let p: Vec<_> = (0..n)
                .map(|_| v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let g = gram_matrix(&q, 0.2);
            let m = DMatrix::from_row_slice(n, n, &g);
            let eig = SymmetricEigen::new(m.clone());
            assert!(eig.eigenvalues.min() >= -1e-10);
            assert_eq!(m, m.transpose());
            let a = gram_apply(&g, &p);
            let b = eval_vector_field(&q, &q, &p, 0.2).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x.x - y.x).abs() <= 1e-12 && (x.y - y.y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_precision() {
        let k = kernel_scalar(Vec2::<f32>::new(0.0, 0.0), Vec2::new(0.2, 0.0), 0.2);
        assert!((k - (-0.5f32).exp()).abs() < 1e-6);
    }
}
