//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions<T> {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `max_i |grad_i| <= grad_tol`.
    pub grad_tol: T,
    /// Armijo sufficient-decrease constant.
    pub c1: T,
    pub max_backtracks: usize,
}

impl<T: Scalar> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 500,
            grad_tol: T::lit(1e-6),
            c1: T::lit(1e-4),
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    /// The objective or gradient evaluated to an error at the start point.
    EvaluationFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad_inf: T,
    /// Objective after each accepted iterate, starting with the initial point.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub termination: Termination,
}

impl<T> LbfgsResult<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn inf_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Minimizes `f` from `x0`. `f` returns `None` when the point is not
/// admissible (e.g. the forward model blew up); the line search treats that
/// as an infinite objective.
pub fn minimize<T, F>(mut f: F, x0: Vec<T>, opts: &LbfgsOptions<T>) -> LbfgsResult<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Option<(T, Vec<T>)>,
{
    let Some((mut fx, mut g)) = f(&x0) else {
        return LbfgsResult {
            value: T::infinity(),
            grad_inf: T::infinity(),
            x: x0,
            trace: Vec::new(),
            iterations: 0,
            termination: Termination::EvaluationFailed,
        };
    };
    let mut x = x0;
    let mut trace = vec![fx];
    let mut hist: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(opts.memory);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        iterations = it + 1;

        // two-loop recursion
        let mut d: Vec<T> = g.iter().map(|&v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = *rho * dot(s, &d);
            for (di, &yi) in d.iter_mut().zip(y) {
                *di = *di - a * yi;
            }
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            // first step: unit step of length ~ 1e-2 in the steepest direction
            None => T::lit(1e-2) / inf_norm(&g),
        };
        for di in d.iter_mut() {
            *di = *di * gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &d);
            for (di, &si) in d.iter_mut().zip(s) {
                *di = *di + (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            // not a descent direction: reset to steepest descent
            hist.clear();
            let scale = T::lit(1e-2) / inf_norm(&g);
            d = g.iter().map(|&v| -v * scale).collect();
            slope = dot(&g, &d);
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + opts.c1 * step * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step = step * T::lit(0.5);
        }
        let Some((xn, fn_, gn)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, T::one() / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
    }
    if termination == Termination::MaxIterations && inf_norm(&g) <= opts.grad_tol {
        termination = Termination::GradientTolerance;
    }
    LbfgsResult {
        grad_inf: inf_norm(&g),
        x,
        value: fx,
        trace,
        iterations,
        termination,
    }
}
