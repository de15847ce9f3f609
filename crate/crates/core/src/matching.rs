//! Estimation of initial momenta that deform a source curve onto a target.
//!
//! The objective over initial momenta `p0` is
//!
//! ```text
//! J(p0) = gamma_w / 2 * g(flow(source), target) + gamma_v / 2 * 2 H(q0, p0)
//! ```
//!
//! where the energy of the geodesic, `int |v_t|^2 dt`, equals `2 H(q0, p0)`.
//! Gradients come from the discrete adjoint of the RK4 integrator, so they
//! are exact for the discretized objective.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::currents::curve_distance_sq_grad;
use crate::error::{Error, Result};
use crate::geometry::{Curve, Vec2};
use crate::kernel::{gram_apply, gram_matrix, ControlPoints};
use crate::optim::{minimize, LbfgsOptions, Termination};
use crate::scalar::Scalar;
use crate::shooting::{adjoint, hamiltonian, integrate, integrate_taped, MomentaField, State, DEFAULT_STEPS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig<T> {
    pub gamma_v: T,
    pub gamma_w: T,
    pub n_steps: usize,
    pub sigma_v: T,
    pub sigma_w: T,
    pub control_stride: usize,
    pub max_iters: usize,
    pub grad_tol: T,
}

impl<T: Scalar> Default for MatchConfig<T> {
    fn default() -> Self {
        Self {
            gamma_v: T::lit(0.01),
            gamma_w: T::one(),
            n_steps: DEFAULT_STEPS,
            sigma_v: T::lit(0.2),
            sigma_w: T::lit(0.1),
            control_stride: 1,
            max_iters: 500,
            grad_tol: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> MatchConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        pos("gamma_v", self.gamma_v)?;
        pos("gamma_w", self.gamma_w)?;
        pos("sigma_v", self.sigma_v)?;
        pos("sigma_w", self.sigma_w)?;
        pos("grad_tol", self.grad_tol)?;
        if self.n_steps == 0 || self.control_stride == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "n_steps, control_stride and max_iters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`match_curves`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchResult<T> {
    pub momenta: MomentaField<T>,
    pub objective_trace: Vec<T>,
    pub final_attachment: T,
    pub final_energy: T,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

/// Indices of every `stride`-th vertex, always including both ends.
pub fn control_indices(n_points: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 {
        return Err(Error::Config("control_stride must be >= 1".into()));
    }
    if n_points < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 control points, curve has {n_points} vertices"
        )));
    }
    let mut idx: Vec<usize> = (0..n_points).step_by(stride).collect();
    if *idx.last().unwrap() != n_points - 1 {
        idx.push(n_points - 1);
    }
    Ok(idx)
}

/// Every `stride`-th source vertex plus the last one.
pub fn select_control_points<T: Scalar>(source: &Curve<T>, stride: usize) -> Result<ControlPoints<T>> {
    let idx = control_indices(source.len(), stride)?;
    ControlPoints::new(idx.iter().map(|&i| source.points()[i]).collect())
}

/// A source/target pair with its control layout fixed.
pub struct MatchProblem<'a, T> {
    source: &'a [Vec2<T>],
    target: &'a [Vec2<T>],
    cfg: MatchConfig<T>,
    control: Vec<usize>,
    passive: Vec<usize>,
    q0: Vec<Vec2<T>>,
    gram: Vec<T>,
}

impl<'a, T: Scalar> MatchProblem<'a, T> {
    pub fn new(source: &'a [Vec2<T>], target: &'a [Vec2<T>], cfg: MatchConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if target.len() < 2 {
            return Err(Error::Dimension("target curve needs at least 2 points".into()));
        }
        if source.iter().chain(target).any(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve("non-finite coordinate in source or target".into()));
        }
        let control = control_indices(source.len(), cfg.control_stride)?;
        let mut is_control = vec![false; source.len()];
        for &i in &control {
            is_control[i] = true;
        }
        let passive = (0..source.len()).filter(|&i| !is_control[i]).collect();
        let q0: Vec<_> = control.iter().map(|&i| source[i]).collect();
        let gram = gram_matrix(&q0, cfg.sigma_v);
        Ok(Self { source, target, cfg, control, passive, q0, gram })
    }

    pub fn control_points(&self) -> ControlPoints<T> {
        ControlPoints(self.q0.clone())
    }

    pub fn n_control(&self) -> usize {
        self.q0.len()
    }

    fn check_momenta(&self, m: &MomentaField<T>) -> Result<()> {
        if m.q0.0 != self.q0 {
            return Err(Error::Dimension(
                "momenta control points are not the source vertices selected by control_stride".into(),
            ));
        }
        Ok(())
    }

    fn passive_points(&self) -> Vec<Vec2<T>> {
        self.passive.iter().map(|&i| self.source[i]).collect()
    }

    fn assemble(&self, q: &[Vec2<T>], x: &[Vec2<T>]) -> Vec<Vec2<T>> {
        let mut out = vec![Vec2::zero(); self.source.len()];
        for (k, &i) in self.control.iter().enumerate() {
            out[i] = q[k];
        }
        for (k, &i) in self.passive.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    /// Source curve deformed by the geodesic from `p0`.
    pub fn deformed_source(&self, p0: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
        let states = integrate(&self.q0, p0, &self.passive_points(), self.cfg.n_steps, self.cfg.sigma_v)?;
        let last = states.last().expect("non-empty trajectory");
        Ok(self.assemble(&last.q, &last.x))
    }

    /// `gamma_v / 2 * int |v|^2 = gamma_v * H(q0, p0)` and its gradient `gamma_v K p0`.
    fn energy_term(&self, p0: &[Vec2<T>]) -> (T, Vec<Vec2<T>>) {
        let kp = gram_apply(&self.gram, p0);
        let h = p0.iter().zip(&kp).map(|(a, b)| a.dot(*b)).sum::<T>() * T::lit(0.5);
        (self.cfg.gamma_v * h, kp.into_iter().map(|v| v * self.cfg.gamma_v).collect())
    }

    /// Returns `(objective, attachment g, energy 2H)`.
    pub fn evaluate(&self, p0: &[Vec2<T>]) -> Result<(T, T, T)> {
        let deformed = self.deformed_source(p0)?;
        let (g, _) = curve_distance_sq_grad(&deformed, self.target, self.cfg.sigma_w);
        let (e, _) = self.energy_term(p0);
        let half = T::lit(0.5);
        Ok((half * self.cfg.gamma_w * g + e, g, e / self.cfg.gamma_v * T::lit(2.0)))
    }

    pub fn value_and_gradient(&self, p0: &[Vec2<T>]) -> Result<(T, Vec<Vec2<T>>)> {
        let tape = integrate_taped(&self.q0, p0, &self.passive_points(), self.cfg.n_steps, self.cfg.sigma_v)?;
        let last = tape.end();
        let deformed = self.assemble(&last.q, &last.x);
        let (g, dg) = curve_distance_sq_grad(&deformed, self.target, self.cfg.sigma_w);
        let w = T::lit(0.5) * self.cfg.gamma_w;
        let cot = State {
            q: self.control.iter().map(|&i| dg[i] * w).collect(),
            p: vec![Vec2::zero(); self.q0.len()],
            x: self.passive.iter().map(|&i| dg[i] * w).collect(),
        };
        let lam = adjoint(&tape, self.cfg.sigma_v, cot);
        let (e, de) = self.energy_term(p0);
        let grad = lam.p.iter().zip(&de).map(|(a, b)| *a + *b).collect();
        Ok((w * g + e, grad))
    }
}

fn to_flat<T: Scalar>(p: &[Vec2<T>]) -> Vec<T> {
    p.iter().flat_map(|v| [v.x, v.y]).collect()
}

fn from_flat<T: Scalar>(f: &[T]) -> Vec<Vec2<T>> {
    f.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Penalized matching objective at `p0`.
pub fn objective<T: Scalar>(
    p0: &MomentaField<T>,
    source: &Curve<T>,
    target: &Curve<T>,
    cfg: &MatchConfig<T>,
) -> Result<T> {
    let prob = MatchProblem::new(source.points(), target.points(), *cfg)?;
    prob.check_momenta(p0)?;
    Ok(prob.evaluate(&p0.p0)?.0)
}

/// Gradient of [`objective`] with respect to the initial momenta.
pub fn objective_gradient<T: Scalar>(
    p0: &MomentaField<T>,
    source: &Curve<T>,
    target: &Curve<T>,
    cfg: &MatchConfig<T>,
) -> Result<Vec<Vec2<T>>> {
    let prob = MatchProblem::new(source.points(), target.points(), *cfg)?;
    prob.check_momenta(p0)?;
    Ok(prob.value_and_gradient(&p0.p0)?.1)
}

/// Quasi-Newton descent on the initial momenta starting from zero.
pub fn match_curves<T: Scalar>(
    source: &Curve<T>,
    target: &Curve<T>,
    cfg: &MatchConfig<T>,
) -> Result<MatchResult<T>> {
    match_points(source.points(), target.points(), cfg)
}

/// [`match_curves`] on raw point lists.
pub fn match_points<T: Scalar>(
    source: &[Vec2<T>],
    target: &[Vec2<T>],
    cfg: &MatchConfig<T>,
) -> Result<MatchResult<T>> {
    let prob = MatchProblem::new(source, target, *cfg)?;
    let mut diagnostics = Vec::new();
    let (_, g0, _) = prob.evaluate(&vec![Vec2::zero(); prob.n_control()])?;
    if g0 < T::lit(1e-10) {
        let msg = format!("source and target nearly identical (g = {}); momenta will be ~0", g0.as_f64());
        warn!("{msg}");
        diagnostics.push(msg);
    }

    let opts = LbfgsOptions {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        ..LbfgsOptions::default()
    };
    let x0 = vec![T::zero(); 2 * prob.n_control()];
    let res = minimize(
        |x| {
            prob.value_and_gradient(&from_flat(x))
                .ok()
                .map(|(v, g)| (v, to_flat(&g)))
        },
        x0,
        &opts,
    );
    if res.termination == Termination::EvaluationFailed {
        return Err(Error::Degenerate("objective could not be evaluated at zero momenta".into()));
    }
    if res.termination == Termination::LineSearchFailed {
        diagnostics.push(format!(
            "line search failed after {} iterations; returning best iterate",
            res.iterations
        ));
    }
    let p = from_flat(&res.x);
    let (_, attachment, energy) = prob.evaluate(&p)?;
    let deformed = Curve::new_unchecked(prob.deformed_source(&p)?);
    if !deformed.is_x_monotone() {
        let msg = "deformed source is not monotone in time (curve folded)".to_string();
        warn!("{msg}");
        diagnostics.push(msg);
    }
    Ok(MatchResult {
        momenta: MomentaField::new(prob.control_points(), p)?,
        objective_trace: res.trace,
        final_attachment: attachment,
        final_energy: energy,
        converged: res.termination == Termination::GradientTolerance,
        iterations: res.iterations,
        diagnostics,
    })
}

/// Energy `int |v_t|^2 dt = 2 H(q0, p0)` of a momenta field.
pub fn geodesic_energy<T: Scalar>(m: &MomentaField<T>, sigma_v: T) -> T {
    T::lit(2.0) * hamiltonian(&m.q0.0, &m.p0, sigma_v)
}
