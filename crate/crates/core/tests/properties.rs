use actigeo_core::currents::curve_distance_sq;
use actigeo_core::fpca::{fit_pca, MomentaMatrix};
use actigeo_core::ingest::{denormalize_curve, normalize_curve, MinuteSeries, ScaleParams};
use actigeo_core::kernel::{gram_matrix, kernel_scalar, ControlPoints};
use actigeo_core::matching::{objective, select_control_points};
use actigeo_core::shooting::{flow_points, hamiltonian, integrate_geodesic, shoot_and_flow};
use actigeo_core::spline::{smooth_with_df, SmoothingSpline};
use actigeo_core::stats::funreg::trapezoid_weights;
use actigeo_core::stats::lasso::{fit_lasso_cv, kkt_violation, LassoOptions};
use actigeo_core::stats::DesignMatrix;
use actigeo_core::{Curve, Curve32, GeodesicPath, MatchConfig, MatchConfig32, MomentaField, MomentaField32, Point};
use proptest::prelude::*;

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

/// Graph curve on an even grid with heights `ys`.
fn graph(ys: &[f64]) -> Curve {
    Curve::new(grid(ys.len()).into_iter().zip(ys).map(|(x, &y)| Point::new(x, y)).collect()).unwrap()
}

fn heights(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..0.9, n)
}

fn field(c: &Curve, p: &[(f64, f64)]) -> MomentaField {
    let q = select_control_points(c, 1).unwrap();
    MomentaField::new(q, p.iter().map(|&(a, b)| Point::new(a, b)).collect()).unwrap()
}

fn curve_and_momenta(amp: f64) -> impl Strategy<Value = (Curve, Vec<(f64, f64)>)> {
    (4usize..25).prop_flat_map(move |n| {
        (
            heights(n..n + 1).prop_map(|ys| graph(&ys)),
            prop::collection::vec((-amp..amp, -amp..amp), n),
        )
    })
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn normalization_round_trips(values in prop::collection::vec(0.0f64..3000.0, 4..50), start in 0u32..600) {
        let minutes: Vec<u32> = (start..start + values.len() as u32).collect();
        let series = MinuteSeries { minutes: minutes.clone(), values: values.clone() };
        let scale = ScaleParams::new(start as f64, (start + values.len() as u32 - 1) as f64, 3000.0).unwrap();
        let c = normalize_curve(&series, &scale).unwrap();
        prop_assert!(c.points().iter().all(|p| p.x.abs() <= 1.0 + 1e-12 && p.y.abs() <= 1.0 + 1e-12));
        for ((t, v), (m, w)) in denormalize_curve(&c, &scale).into_iter().zip(minutes.iter().zip(&values)) {
            prop_assert!((t - *m as f64).abs() < 1e-9);
            prop_assert!((v - w).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_is_symmetric_and_bounded(ax in -2.0f64..2.0, ay in -2.0f64..2.0, bx in -2.0f64..2.0, by in -2.0f64..2.0, s in 0.05f64..1.0) {
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        let k = kernel_scalar(a, b, s);
        prop_assert_eq!(k, kernel_scalar(b, a, s));
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert_eq!(kernel_scalar(a, a, s), 1.0);
    }

    #[test]
    fn gram_matrix_is_symmetric_with_unit_diagonal(ys in heights(4..30)) {
        let c = graph(&ys);
        let n = c.len();
        let k = gram_matrix(c.points(), 0.2);
        for i in 0..n {
            prop_assert_eq!(k[i * n + i], 1.0);
            for j in 0..n {
                prop_assert_eq!(k[i * n + j], k[j * n + i]);
            }
        }
    }

    #[test]
    fn current_distance_is_a_translation_invariant_pseudometric(
        a in heights(4..30),
        b in heights(4..30),
        dx in -0.5f64..0.5,
        dy in -0.5f64..0.5,
    ) {
        let (ca, cb) = (graph(&a), graph(&b));
        let g = curve_distance_sq(ca.points(), cb.points(), 0.1);
        prop_assert!(g >= 0.0);
        prop_assert!((g - curve_distance_sq(cb.points(), ca.points(), 0.1)).abs() <= 1e-12 * g.max(1.0));
        prop_assert!(curve_distance_sq(ca.points(), ca.points(), 0.1) <= 1e-12);
        let shift = |c: &Curve| -> Vec<Point> { c.points().iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect() };
        let moved = curve_distance_sq(&shift(&ca), &shift(&cb), 0.1);
        prop_assert!((g - moved).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn hamiltonian_is_conserved((c, p) in curve_and_momenta(0.1)) {
        let m = field(&c, &p);
        let h0 = hamiltonian(&m.q0.0, &m.p0, 0.2);
        prop_assume!(h0 > 1e-8);
        let path = integrate_geodesic(&m, 11, 0.2).unwrap();
        for s in &path.steps {
            prop_assert!((hamiltonian(&s.q, &s.p, 0.2) - h0).abs() <= 1e-6 * h0);
        }
    }

    #[test]
    fn flowing_keeps_graphs_monotone((c, p) in curve_and_momenta(0.02)) {
        let m = field(&c, &p);
        let out = Curve::new_unchecked(shoot_and_flow(&m, c.points(), 11, 0.2).unwrap());
        prop_assert!(out.is_x_monotone());
    }

    #[test]
    fn passive_flow_matches_joint_integration((c, p) in curve_and_momenta(0.1), extra in heights(5..20)) {
        let m = field(&c, &p);
        let pts = graph(&extra).into_points();
        let path = integrate_geodesic(&m, 11, 0.2).unwrap();
        let a = flow_points(&path, &pts).unwrap();
        let b = shoot_and_flow(&m, &pts, 11, 0.2).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u.x - v.x).abs() <= 1e-12 && (u.y - v.y).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_is_half_attachment_at_zero_momenta(a in heights(4..20), b in heights(4..20)) {
        let (s, t) = (graph(&a), graph(&b));
        let zero = MomentaField::zeros(select_control_points(&s, 1).unwrap());
        let j = objective(&zero, &s, &t, &MatchConfig::default()).unwrap();
        let g = curve_distance_sq(s.points(), t.points(), 0.1);
        prop_assert!((j - 0.5 * g).abs() <= 1e-14 * g.max(1.0));
    }

    #[test]
    fn single_precision_objective_tracks_double((c, p) in curve_and_momenta(0.05), b in heights(4..20)) {
        let t = graph(&b);
        let m = field(&c, &p);
        let j64 = objective(&m, &c, &t, &MatchConfig::default()).unwrap();
        let m32 = MomentaField32::new(ControlPoints(m.q0.0.iter().map(|v| v.cast()).collect()), m.p0.iter().map(|v| v.cast()).collect()).unwrap();
        let c32: Curve32 = c.cast();
        let t32: Curve32 = t.cast();
        let j32 = objective(&m32, &c32, &t32, &MatchConfig32::default()).unwrap();
        prop_assert!((j32 as f64 - j64).abs() <= 1e-4 * j64.max(1e-3));
    }

    #[test]
    fn pca_contract_holds(n in 4usize..15, g in 2usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..2 * g).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let data = MomentaMatrix::new((0..n).map(|i| i.to_string()).collect(), grid(g), rows).unwrap();
        let k = (n - 1).min(2 * g);
        let m = fit_pca(&data, k).unwrap();
        for l in 0..k {
            let col: Vec<f64> = m.scores.iter().map(|r| r[l]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            prop_assert!(mean.abs() <= 1e-10);
            prop_assert!((sd - 1.0).abs() <= 1e-9);
        }
        prop_assert!(m.var_explained.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        for (row, s) in data.rows.iter().zip(&m.scores) {
            let p = m.project_flat(row).unwrap();
            prop_assert!(p.iter().zip(s).all(|(a, b)| (a - b).abs() <= 1e-9));
        }
    }

    #[test]
    fn smoother_df_decreases_with_penalty(n in 10usize..200, a in -10i32..3, b in -10i32..3) {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let s = SmoothingSpline::new(&x).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        let d_lo = s.df(10f64.powi(lo)).unwrap();
        let d_hi = s.df(10f64.powi(hi)).unwrap();
        prop_assert!(d_hi <= d_lo + 1e-9);
        prop_assert!(d_hi >= 2.0 - 1e-9 && d_lo <= n as f64 + 1e-9);
    }

    #[test]
    fn smoother_reproduces_lines(n in 10usize..120, c0 in -5.0f64..5.0, c1 in -1.0f64..1.0, df in 2.5f64..8.0) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 1.5).collect();
        let y: Vec<f64> = x.iter().map(|v| c0 + c1 * v).collect();
        let f = smooth_with_df(&x, &y, df).unwrap();
        prop_assert!((f.df - df).abs() <= 1e-3);
        prop_assert!(f.fitted.iter().zip(&y).all(|(a, b)| (a - b).abs() <= 1e-8 * (1.0 + b.abs())));
    }

    #[test]
    fn trapezoid_integrates_lines(mut t in prop::collection::vec(-5.0f64..5.0, 2..30), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        t.sort_by(f64::total_cmp);
        t.dedup();
        prop_assume!(t.len() >= 2);
        let w = trapezoid_weights(&t);
        let (lo, hi) = (t[0], t[t.len() - 1]);
        let exact = a * (hi - lo) + 0.5 * b * (hi * hi - lo * lo);
        let got: f64 = w.iter().zip(&t).map(|(w, x)| w * (a + b * x)).sum();
        prop_assert!((got - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn lasso_satisfies_kkt(seed in any::<u64>(), p in 2usize..12) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                cols[0][i] - 0.5 * cols[p - 1][i] + 0.5 * e
            })
            .collect();
        let x = DesignMatrix::new((0..p).map(|j| format!("x{j}")).collect(), cols).unwrap();
        let fit = fit_lasso_cv(&x, &y, &LassoOptions { folds: 5, seed, ..LassoOptions::default() }).unwrap();
        prop_assert!(kkt_violation(&x, &y, &fit).unwrap() <= 1e-8);
    }
}

#[test]
fn geodesic_path_survives_json() {
    let c = graph(&[0.1, -0.2, 0.3, 0.0, -0.4]);
    let m = field(&c, &[(0.05, 0.0), (0.0, 0.02), (-0.03, 0.01), (0.0, 0.0), (0.01, -0.02)]);
    let path = integrate_geodesic(&m, 11, 0.2).unwrap();
    let text = serde_json::to_string(&path).unwrap();
    let back: GeodesicPath = serde_json::from_str(&text).unwrap();
    assert_eq!(back, path);
    assert_eq!(back.n_steps(), 11);
}
