use geoplan::expansion::{expand, expand_straight, natural_gradient, ExpansionParams, Termination};
use geoplan::geodesy::midpoint_distance;
use geoplan::metrics::{Se2Weights, TwoLinkParams};
use geoplan::{Configuration, Manifold, Retraction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn curved() -> Vec<Manifold> {
    vec![
        Manifold::two_link(TwoLinkParams::default()).unwrap(),
        Manifold::se2(Se2Weights::new(1.0, 100.0, 1.0), Retraction::Se2Exponential).unwrap(),
        Manifold::se2(Se2Weights::new(1.0, 4.0, 0.5), Retraction::Chart).unwrap(),
    ]
}

/// `G⁻¹∇φ` with `φ(u) = ½ d̂(R_q(u), q†)²`, differentiated by Richardson
/// extrapolation of second-order central differences in each tangent axis.
fn reference_gradient(m: &Manifold, q: &Configuration, target: &Configuration) -> DVector<f64> {
    let n = m.dim();
    let phi = |u: &[f64]| {
        let p = m.retract(q, &m.tangent(q, u).unwrap()).unwrap();
        let d = midpoint_distance(m, &p, target).unwrap();
        0.5 * d * d
    };
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let central = |h: f64| {
            let mut up = vec![0.0; n];
            let mut dn = vec![0.0; n];
            up[i] = h;
            dn[i] = -h;
            (phi(&up) - phi(&dn)) / (2.0 * h)
        };
        let h = 1e-3;
        let (d1, d2, d4) = (central(h), central(h / 2.0), central(h / 4.0));
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d4 - d2) / 3.0;
        grad[i] = (16.0 * r2 - r1) / 15.0;
    }
    m.metric_at(q).unwrap().solve(&grad).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_richardson_reference(
        which in 0usize..3,
        q in prop::collection::vec(-1.2f64..1.2, 3),
        t in prop::collection::vec(-1.2f64..1.2, 3),
    ) {
        let m = &curved()[which];
        let q = m.configuration(&q[..m.dim()]).unwrap();
        let t = m.configuration(&t[..m.dim()]).unwrap();
        prop_assume!(midpoint_distance(m, &q, &t).unwrap() > 0.05);
        let got = natural_gradient(m, &q, &t, 1e-3).unwrap();
        let want = reference_gradient(m, &q, &t);
        let err = (got.components() - &want).norm() / want.norm();
        prop_assert!(err <= 1e-5, "relative error {err}");
    }

    #[test]
    fn gradient_is_the_chart_difference_on_constant_metrics(
        dim in 1usize..5,
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        q in prop::collection::vec(-2.0f64..2.0, 4),
        t in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let a = DMatrix::from_row_slice(dim, dim, &entries[..dim * dim]);
        let g = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
        let m = Manifold::constant(g).unwrap();
        let qc = m.configuration(&q[..dim]).unwrap();
        let tc = m.configuration(&t[..dim]).unwrap();
        let got = natural_gradient(&m, &qc, &tc, geoplan::expansion::default_fd_step(&qc)).unwrap();
        let want = DVector::from_column_slice(&q[..dim]) - DVector::from_column_slice(&t[..dim]);
        prop_assume!(want.norm() > 1e-3);
        prop_assert!((got.components() - &want).norm() <= 1e-10 * want.norm());
    }

    #[test]
    fn expansion_invariants(
        which in 0usize..3,
        a in prop::collection::vec(-1.5f64..1.5, 3),
        b in prop::collection::vec(-1.5f64..1.5, 3),
        s in 0.02f64..0.2,
    ) {
        let m = &curved()[which];
        let qa = m.configuration(&a[..m.dim()]).unwrap();
        let qb = m.configuration(&b[..m.dim()]).unwrap();
        let d0 = midpoint_distance(m, &qa, &qb).unwrap();
        let params = ExpansionParams::with_step(s);
        let t = expand(m, &qa, &qb, &params).unwrap();
        prop_assert_eq!(&t.waypoints[0], &qa);
        prop_assert!(t.d <= 3.0 * d0 * (1.0 + 1e-9) + 1e-12);
        prop_assert_eq!(t.step_lengths.len() + 1, t.waypoints.len());
        let mut prev = d0;
        for (k, w) in t.waypoints.iter().enumerate().skip(1) {
            prop_assert!(t.step_lengths[k - 1] <= params.lambda * t.steps_used[k - 1]);
            prop_assert!(t.steps_used[k - 1] <= s);
            let d = midpoint_distance(m, w, &qb).unwrap();
            prop_assert!(d < prev);
            prev = d;
        }
        if t.reason == Termination::Reached {
            prop_assert!(prev <= t.steps_used.last().copied().unwrap_or(s) * (1.0 + 1e-9));
        }
        let sum: f64 = t.step_lengths.iter().sum();
        prop_assert!((sum - t.d).abs() <= 1e-12 * t.d.max(1.0));
    }

    #[test]
    fn expansion_follows_the_chord_on_constant_metrics(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        a in prop::collection::vec(-2.0f64..2.0, 3),
        b in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let x = DMatrix::from_row_slice(3, 3, &entries);
        let m = Manifold::constant(&x * x.transpose() + DMatrix::identity(3, 3) * 0.5).unwrap();
        let qa = m.configuration(&a).unwrap();
        let qb = m.configuration(&b).unwrap();
        let t = expand(&m, &qa, &qb, &ExpansionParams::with_step(0.1)).unwrap();
        let pa = DVector::from_column_slice(&a);
        let dir = DVector::from_column_slice(&b) - &pa;
        for w in &t.waypoints {
            let off = w.coords() - &pa;
            let along = off.dot(&dir) / dir.norm_squared();
            prop_assert!((off - &dir * along).amax() <= 1e-9);
        }
        prop_assert_eq!(t.reason, Termination::Reached);
    }

    #[test]
    fn straight_expansion_matches_gradient_expansion_on_identity(
        a in prop::collection::vec(-2.0f64..2.0, 2),
        b in prop::collection::vec(-2.0f64..2.0, 2),
        s in 0.05f64..0.3,
    ) {
        let m = Manifold::euclidean(2);
        let qa = m.configuration(&a).unwrap();
        let qb = m.configuration(&b).unwrap();
        let g = expand(&m, &qa, &qb, &ExpansionParams::with_step(s)).unwrap();
        let st = expand_straight(&m, &qa, &qb, s, None).unwrap();
        prop_assert_eq!(g.waypoints.len(), st.waypoints.len());
        for (x, y) in g.waypoints.iter().zip(&st.waypoints) {
            prop_assert!((x.coords() - y.coords()).amax() <= 1e-9);
        }
    }
}
