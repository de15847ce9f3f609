//! Cubic B-spline basis with equally spaced knots.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    n_basis: usize,
}

pub const DEGREE: usize = 3;

impl BSplineBasis {
    /// `n_basis >= 4` cubic B-splines on `[lo, hi]`.
    pub fn new(lo: f64, hi: f64, n_basis: usize) -> Result<Self> {
        if n_basis < DEGREE + 1 {
            return Err(Error::Config(format!("need at least 4 cubic basis functions, got {n_basis}")));
        }
        if !(hi > lo) {
            return Err(Error::Config(format!("empty basis interval [{lo}, {hi}]")));
        }
        let n_int = n_basis - DEGREE; // number of knot intervals
        let mut knots = vec![lo; DEGREE];
        knots.extend((0..=n_int).map(|k| lo + (hi - lo) * k as f64 / n_int as f64));
        knots.extend(vec![hi; DEGREE]);
        Ok(Self { knots, n_basis })
    }

    pub fn len(&self) -> usize {
        self.n_basis
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values of every basis function at `t` (Cox-de Boor).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let k = &self.knots;
        let lo = k[DEGREE];
        let hi = k[k.len() - 1 - DEGREE];
        let t = t.clamp(lo, hi);
        // knot span with k[span] <= t < k[span + 1], closing the last span
        let mut span = DEGREE;
        while span < self.n_basis - 1 && t >= k[span + 1] {
            span += 1;
        }
        let mut n = [0.0; DEGREE + 1];
        n[0] = 1.0;
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        for j in 1..=DEGREE {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; self.n_basis];
        for (r, v) in n.iter().enumerate() {
            out[span - DEGREE + r] = *v;
        }
        out
    }

    /// `len(ts) x n_basis` evaluation matrix, row-major.
    pub fn design(&self, ts: &[f64]) -> Vec<Vec<f64>> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }
}

/// `D'D` for the second-difference operator on `n` coefficients.
pub fn second_difference_penalty(n: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; n]; n];
    for r in 0..n.saturating_sub(2) {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(a, va) in &d {
            for &(b, vb) in &d {
                p[a][b] += va * vb;
            }
        }
    }
    p
}
