//! Hamiltonian geodesic shooting for kernel-parameterized deformations.
//!
//! With `H(q, p) = 1/2 sum_ab (p_a . p_b) k(q_a, q_b)` the control points and
//! momenta evolve by
//!
//! ```text
//! dq_j/dt =  sum_l k(q_j, q_l) p_l
//! dp_j/dt =  1/sigma^2 sum_l (p_j . p_l) k(q_j, q_l) (q_j - q_l)
//! ```
//!
//! and any other point `z` is carried by `dz/dt = sum_l k(z, q_l) p_l`.
//! Integration uses the classical fourth-order Runge-Kutta scheme on a
//! uniform grid over `t in [0, 1]`. The discrete adjoint of that scheme is
//! implemented here as well so the matching objective can be differentiated
//! exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axpy, max_abs, Vec2};
use crate::kernel::{gauss, gram_apply, gram_matrix, inv_two_sigma_sq, ControlPoints};
use crate::scalar::Scalar;

/// Coordinates beyond this magnitude (normalized units) abort integration.
pub const BLOW_UP_LIMIT: f64 = 1e3;

/// Default number of flow steps.
pub const DEFAULT_STEPS: usize = 11;

/// Initial momenta attached to control points; fully determines a geodesic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentaField<T> {
    pub q0: ControlPoints<T>,
    pub p0: Vec<Vec2<T>>,
}

impl<T: Scalar> MomentaField<T> {
    pub fn new(q0: ControlPoints<T>, p0: Vec<Vec2<T>>) -> Result<Self> {
        if q0.len() != p0.len() {
            return Err(Error::Dimension(format!(
                "{} control points but {} momenta",
                q0.len(),
                p0.len()
            )));
        }
        if p0.iter().any(|p| !p.is_finite()) {
            return Err(Error::Dimension("non-finite momentum".into()));
        }
        Ok(Self { q0, p0 })
    }

    /// Zero momenta on the given control points.
    pub fn zeros(q0: ControlPoints<T>) -> Self {
        let n = q0.len();
        Self { q0, p0: vec![Vec2::zero(); n] }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            q0: self.q0.clone(),
            p0: self.p0.iter().map(|&p| p * c).collect(),
        }
    }

    /// Flattens as x-block then y-block (length `2 n_g`).
    pub fn to_flat(&self) -> Vec<T> {
        self.p0.iter().map(|p| p.x).chain(self.p0.iter().map(|p| p.y)).collect()
    }

    pub fn from_flat(q0: ControlPoints<T>, flat: &[T]) -> Result<Self> {
        let n = q0.len();
        if flat.len() != 2 * n {
            return Err(Error::Dimension(format!(
                "flat momenta of length {} for {n} control points",
                flat.len()
            )));
        }
        let p0 = (0..n).map(|j| Vec2::new(flat[j], flat[n + j])).collect();
        Self::new(q0, p0)
    }
}

/// One snapshot `(q_t, p_t)` of a geodesic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState<T> {
    pub q: Vec<Vec2<T>>,
    pub p: Vec<Vec2<T>>,
}

/// Discretized geodesic: `n_steps + 1` snapshots at `t_k = k / n_steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath<T> {
    pub steps: Vec<GeodesicState<T>>,
    pub sigma_v: T,
}

impl<T: Scalar> GeodesicPath<T> {
    pub fn n_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn start(&self) -> &GeodesicState<T> {
        &self.steps[0]
    }

    pub fn end(&self) -> &GeodesicState<T> {
        self.steps.last().expect("path has at least one snapshot")
    }
}

/// `H(q, p) = 1/2 sum_ab (p_a . p_b) k(q_a, q_b)`.
pub fn hamiltonian<T: Scalar>(q: &[Vec2<T>], p: &[Vec2<T>], sigma_v: T) -> T {
    assert_eq!(q.len(), p.len(), "hamiltonian: |q| != |p|");
    let k = gram_matrix(q, sigma_v);
    let kp = gram_apply(&k, p);
    let h = p.iter().zip(&kp).map(|(a, b)| a.dot(*b)).sum::<T>() * T::lit(0.5);
    h.max(T::zero())
}

/// Integrates the geodesic equations from `m` over `n_steps` RK4 steps.
pub fn integrate_geodesic<T: Scalar>(
    m: &MomentaField<T>,
    n_steps: usize,
    sigma_v: T,
) -> Result<GeodesicPath<T>> {
    let states = integrate(&m.q0.0, &m.p0, &[], n_steps, sigma_v)?;
    Ok(GeodesicPath {
        steps: states
            .into_iter()
            .map(|s| GeodesicState { q: s.q, p: s.p })
            .collect(),
        sigma_v,
    })
}

/// Transports `pts` through the velocity fields of `path`.
///
/// Each step is recomputed from the stored snapshot with the same RK4
/// stages used to build the path, so passive points see exactly the
/// intermediate fields the control points saw.
pub fn flow_points<T: Scalar>(path: &GeodesicPath<T>, pts: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
    let n_steps = path.n_steps();
    if n_steps == 0 {
        return Ok(pts.to_vec());
    }
    let sys = System::new(path.sigma_v);
    let h = T::one() / T::lit(n_steps as f64);
    let mut x = pts.to_vec();
    for (k, snap) in path.steps[..n_steps].iter().enumerate() {
        let s = State { q: snap.q.clone(), p: snap.p.clone(), x };
        x = sys.rk4_step(&s, h).x;
        if !x.iter().all(|v| v.is_finite()) || max_abs(&x) > T::lit(BLOW_UP_LIMIT) {
            return Err(Error::BlowUp { step: k + 1 });
        }
    }
    Ok(x)
}

/// Shoots `m` and flows `pts` along the resulting geodesic.
pub fn shoot_and_flow<T: Scalar>(
    m: &MomentaField<T>,
    pts: &[Vec2<T>],
    n_steps: usize,
    sigma_v: T,
) -> Result<Vec<Vec2<T>>> {
    let states = integrate(&m.q0.0, &m.p0, pts, n_steps, sigma_v)?;
    Ok(states.into_iter().last().map(|s| s.x).unwrap_or_default())
}

/// Joint state: control points, momenta, passive points.
#[derive(Clone, Debug)]
pub(crate) struct State<T> {
    pub q: Vec<Vec2<T>>,
    pub p: Vec<Vec2<T>>,
    pub x: Vec<Vec2<T>>,
}

impl<T: Scalar> State<T> {
    fn zeros_like(other: &Self) -> Self {
        Self {
            q: vec![Vec2::zero(); other.q.len()],
            p: vec![Vec2::zero(); other.p.len()],
            x: vec![Vec2::zero(); other.x.len()],
        }
    }

    /// `self + s * d`
    fn offset(&self, s: T, d: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(s, d);
        out
    }

    fn axpy(&mut self, s: T, d: &Self) {
        axpy(&mut self.q, s, &d.q);
        axpy(&mut self.p, s, &d.p);
        axpy(&mut self.x, s, &d.x);
    }

    fn check(&self, step: usize) -> Result<()> {
        let lim = T::lit(BLOW_UP_LIMIT);
        let finite = [&self.q, &self.p, &self.x]
            .iter()
            .all(|v| v.iter().all(|z| z.is_finite()));
        let ok = finite && max_abs(&self.q) <= lim && max_abs(&self.x) <= lim;
        if ok {
            Ok(())
        } else {
            Err(Error::BlowUp { step })
        }
    }
}

/// Integrates control points, momenta and passive points jointly and returns
/// every snapshot (`n_steps + 1` of them).
pub(crate) fn integrate<T: Scalar>(
    q0: &[Vec2<T>],
    p0: &[Vec2<T>],
    x0: &[Vec2<T>],
    n_steps: usize,
    sigma_v: T,
) -> Result<Vec<State<T>>> {
    if q0.len() != p0.len() {
        return Err(Error::Dimension(format!(
            "{} control points but {} momenta",
            q0.len(),
            p0.len()
        )));
    }
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be >= 1".into()));
    }
    let sys = System::new(sigma_v);
    let h = T::one() / T::lit(n_steps as f64);
    let mut states = Vec::with_capacity(n_steps + 1);
    let s0 = State { q: q0.to_vec(), p: p0.to_vec(), x: x0.to_vec() };
    s0.check(0)?;
    states.push(s0);
    for k in 0..n_steps {
        let next = sys.rk4_step(&states[k], h);
        next.check(k + 1)?;
        states.push(next);
    }
    Ok(states)
}

/// RK4 stage states of one step together with their kernel values.
pub(crate) struct TapeStep<T> {
    stages: [State<T>; 4],
    kernels: [Kernels<T>; 4],
}

/// Forward trajectory recorded for [`adjoint`].
pub(crate) struct Tape<T> {
    steps: Vec<TapeStep<T>>,
    end: State<T>,
}

impl<T> Tape<T> {
    pub fn end(&self) -> &State<T> {
        &self.end
    }
}

/// [`integrate`] keeping every stage so the adjoint needs no kernel
/// evaluations.
pub(crate) fn integrate_taped<T: Scalar>(
    q0: &[Vec2<T>],
    p0: &[Vec2<T>],
    x0: &[Vec2<T>],
    n_steps: usize,
    sigma_v: T,
) -> Result<Tape<T>> {
    if q0.len() != p0.len() {
        return Err(Error::Dimension(format!(
            "{} control points but {} momenta",
            q0.len(),
            p0.len()
        )));
    }
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be >= 1".into()));
    }
    let sys = System::new(sigma_v);
    let h = T::one() / T::lit(n_steps as f64);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let third = h / T::lit(3.0);
    let mut cur = State { q: q0.to_vec(), p: p0.to_vec(), x: x0.to_vec() };
    cur.check(0)?;
    let mut steps = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let kn1 = sys.kernels(&cur);
        let k1 = sys.rhs_with(&cur, &kn1);
        let s2 = cur.offset(half, &k1);
        let kn2 = sys.kernels(&s2);
        let k2 = sys.rhs_with(&s2, &kn2);
        let s3 = cur.offset(half, &k2);
        let kn3 = sys.kernels(&s3);
        let k3 = sys.rhs_with(&s3, &kn3);
        let s4 = cur.offset(h, &k3);
        let kn4 = sys.kernels(&s4);
        let k4 = sys.rhs_with(&s4, &kn4);
        let mut next = cur.clone();
        next.axpy(sixth, &k1);
        next.axpy(third, &k2);
        next.axpy(third, &k3);
        next.axpy(sixth, &k4);
        next.check(k + 1)?;
        steps.push(TapeStep {
            stages: [cur, s2, s3, s4],
            kernels: [kn1, kn2, kn3, kn4],
        });
        cur = next;
    }
    Ok(Tape { steps, end: cur })
}

/// Reverse-mode sweep through a recorded RK4 trajectory.
///
/// `cot` is the cotangent of the final state; the return value is the
/// cotangent of the initial state, i.e. the gradient of a scalar function of
/// the endpoint with respect to `(q0, p0, x0)`.
pub(crate) fn adjoint<T: Scalar>(tape: &Tape<T>, sigma_v: T, cot: State<T>) -> State<T> {
    let n_steps = tape.steps.len();
    let sys = System::new(sigma_v);
    let h = T::one() / T::lit(n_steps as f64);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let third = h / T::lit(3.0);
    let mut lam = cot;
    for step in tape.steps.iter().rev() {
        let [s1, s2, s3, s4] = &step.stages;
        let [kn1, kn2, kn3, kn4] = &step.kernels;
        let mut a_k1 = State::zeros_like(&lam);
        a_k1.axpy(sixth, &lam);
        let mut a_k2 = State::zeros_like(&lam);
        a_k2.axpy(third, &lam);
        let mut a_k3 = a_k2.clone();
        let mut a_k4 = State::zeros_like(&lam);
        a_k4.axpy(sixth, &lam);

        let mut out = lam;
        let l4 = sys.vjp_with(s4, &a_k4, kn4);
        out.axpy(T::one(), &l4);
        a_k3.axpy(h, &l4);
        let l3 = sys.vjp_with(s3, &a_k3, kn3);
        out.axpy(T::one(), &l3);
        a_k2.axpy(half, &l3);
        let l2 = sys.vjp_with(s2, &a_k2, kn2);
        out.axpy(T::one(), &l2);
        a_k1.axpy(half, &l2);
        let l1 = sys.vjp_with(s1, &a_k1, kn1);
        out.axpy(T::one(), &l1);
        lam = out;
    }
    lam
}

/// Kernel values `k(q_j, q_l)` for `j < l` in loop order and `k(x_i, q_l)`
/// row-major.
struct Kernels<T> {
    qq: Vec<T>,
    xq: Vec<T>,
}

struct System<T> {
    inv_2s2: T,
    inv_s2: T,
}

impl<T: Scalar> System<T> {
    fn new(sigma: T) -> Self {
        Self {
            inv_2s2: inv_two_sigma_sq(sigma),
            inv_s2: T::one() / (sigma * sigma),
        }
    }

    fn rk4_step(&self, s: &State<T>, h: T) -> State<T> {
        let half = h * T::lit(0.5);
        let k1 = self.rhs(s);
        let k2 = self.rhs(&s.offset(half, &k1));
        let k3 = self.rhs(&s.offset(half, &k2));
        let k4 = self.rhs(&s.offset(h, &k3));
        let sixth = h / T::lit(6.0);
        let third = h / T::lit(3.0);
        let mut out = s.clone();
        out.axpy(sixth, &k1);
        out.axpy(third, &k2);
        out.axpy(third, &k3);
        out.axpy(sixth, &k4);
        out
    }

    fn kernels(&self, s: &State<T>) -> Kernels<T> {
        let n = s.q.len();
        let mut qq = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for j in 0..n {
            for l in (j + 1)..n {
                qq.push(gauss(s.q[j], s.q[l], self.inv_2s2));
            }
        }
        let mut xq = Vec::with_capacity(s.x.len() * n);
        for &z in &s.x {
            xq.extend(s.q.iter().map(|&ql| gauss(z, ql, self.inv_2s2)));
        }
        Kernels { qq, xq }
    }

    fn rhs(&self, s: &State<T>) -> State<T> {
        self.rhs_with(s, &self.kernels(s))
    }

    fn rhs_with(&self, s: &State<T>, kern: &Kernels<T>) -> State<T> {
        let n = s.q.len();
        let mut dq = vec![Vec2::zero(); n];
        let mut dp = vec![Vec2::zero(); n];
        let mut ks = kern.qq.iter();
        for j in 0..n {
            dq[j] += s.p[j];
            for l in (j + 1)..n {
                let k = *ks.next().expect("kernel cache size");
                let d = s.q[j] - s.q[l];
                dq[j] += s.p[l] * k;
                dq[l] += s.p[j] * k;
                let f = d * (s.p[j].dot(s.p[l]) * k * self.inv_s2);
                dp[j] += f;
                dp[l] -= f;
            }
        }
        let dx = if n == 0 {
            vec![Vec2::zero(); s.x.len()]
        } else {
            kern.xq
                .chunks_exact(n)
                .map(|row| row.iter().zip(&s.p).fold(Vec2::zero(), |acc, (&k, &pl)| acc + pl * k))
                .collect()
        };
        State { q: dq, p: dp, x: dx }
    }

    /// Vector-Jacobian product of [`Self::rhs`] at `s` with cotangent `a`.
    fn vjp_with(&self, s: &State<T>, a: &State<T>, kern: &Kernels<T>) -> State<T> {
        let n = s.q.len();
        let is2 = self.inv_s2;
        let mut g = State::zeros_like(s);
        let mut ks = kern.qq.iter();
        for j in 0..n {
            // diagonal term of dq: k(q_j, q_j) = 1
            g.p[j] += a.q[j];
            for l in (j + 1)..n {
                let k = *ks.next().expect("kernel cache size");
                let d = s.q[j] - s.q[l];
                let (pj, pl) = (s.p[j], s.p[l]);
                let (aqj, aql) = (a.q[j], a.q[l]);
                let (apj, apl) = (a.p[j], a.p[l]);

                // dq_j += k p_l ; dq_l += k p_j
                g.p[l] += aqj * k;
                g.p[j] += aql * k;
                let c = -(aqj.dot(pl) + aql.dot(pj)) * k * is2;
                let mut gqj = d * c;

                // dp_j += f ; dp_l -= f with f = (p_j.p_l) k d / s^2
                let pp = pj.dot(pl);
                let da = apj - apl;
                let ad = da.dot(d);
                let w = k * ad * is2;
                g.p[j] += pl * w;
                g.p[l] += pj * w;
                gqj += (da - d * (ad * is2)) * (pp * k * is2);

                g.q[j] += gqj;
                g.q[l] -= gqj;
            }
        }
        if n > 0 {
            for (i, (&z, row)) in s.x.iter().zip(kern.xq.chunks_exact(n)).enumerate() {
                let ax = a.x[i];
                let mut gx = Vec2::zero();
                for (l, &k) in row.iter().enumerate() {
                    let e = z - s.q[l];
                    g.p[l] += ax * k;
                    let c = -ax.dot(s.p[l]) * k * is2;
                    gx += e * c;
                    g.q[l] -= e * c;
                }
                g.x[i] += gx;
            }
        }
        g
    }
}
