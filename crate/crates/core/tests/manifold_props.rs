use std::sync::Arc;

use geoplan::geodesy::{midpoint_distance, retraction_midpoint};
use geoplan::metrics::{Se2Weights, StereographicSphereMetric, TwoLinkParams};
use geoplan::{Manifold, Retraction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn manifolds() -> Vec<Manifold> {
    vec![
        Manifold::euclidean(3),
        Manifold::constant(DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0])).unwrap(),
        Manifold::two_link(TwoLinkParams::default()).unwrap(),
        Manifold::se2(Se2Weights::new(1.0, 100.0, 1.0), Retraction::Chart).unwrap(),
        Manifold::se2(Se2Weights::new(1.0, 100.0, 1.0), Retraction::Se2Exponential).unwrap(),
        Manifold::euclidean(2).with_metric(Arc::new(StereographicSphereMetric::new(2, 1.0).unwrap())).unwrap(),
    ]
}

fn pick(m: &Manifold, raw: &[f64]) -> Vec<f64> {
    raw[..m.dim()].to_vec()
}

fn spd(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(dim, dim, &entries[..dim * dim]);
    &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5
}

proptest! {
    #[test]
    fn inverse_retraction_undoes_retraction(
        which in 0usize..6,
        q in prop::collection::vec(-1.5f64..1.5, 3),
        v in prop::collection::vec(-0.4f64..0.4, 3),
    ) {
        let m = &manifolds()[which];
        let q = m.configuration(&pick(m, &q)).unwrap();
        let v = m.tangent(&q, &pick(m, &v)).unwrap();
        let p = m.retract(&q, &v).unwrap();
        let back = m.inverse_retract(&q, &p).unwrap();
        prop_assert!((back.components() - v.components()).amax() <= 1e-9);
        let again = m.retract(&q, &back).unwrap();
        prop_assert!(m.chart_difference(&p, &again).unwrap().amax() <= 1e-9);
    }

    #[test]
    fn midpoint_distance_is_nearly_symmetric(
        which in 2usize..6,
        q in prop::collection::vec(-1.5f64..1.5, 3),
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        h in 0.01f64..0.2,
    ) {
        let m = &manifolds()[which];
        let d: Vec<f64> = pick(m, &dir);
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let a = m.configuration(&pick(m, &q)).unwrap();
        let step = m.tangent(&a, &d.iter().map(|x| x * h / n).collect::<Vec<_>>()).unwrap();
        let b = m.retract(&a, &step).unwrap();
        let ab = midpoint_distance(m, &a, &b).unwrap();
        let ba = midpoint_distance(m, &b, &a).unwrap();
        // third order in the chart separation
        prop_assert!((ab - ba).abs() <= 50.0 * h.powi(3), "{ab} {ba} h {h}");
    }

    #[test]
    fn constant_metric_distance_is_exact(
        dim in 1usize..6,
        entries in prop::collection::vec(-1.0f64..1.0, 25),
        a in prop::collection::vec(-3.0f64..3.0, 5),
        b in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        let g = spd(dim, &entries);
        let m = Manifold::constant(g.clone()).unwrap();
        let qa = m.configuration(&a[..dim]).unwrap();
        let qb = m.configuration(&b[..dim]).unwrap();
        let delta = DVector::from_column_slice(&b[..dim]) - DVector::from_column_slice(&a[..dim]);
        let want = delta.dot(&(&g * &delta)).sqrt();
        let got = midpoint_distance(&m, &qa, &qb).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "{got} vs {want}");
        let mid = retraction_midpoint(&m, &qa, &qb).unwrap();
        let want_mid = (DVector::from_column_slice(&a[..dim]) + DVector::from_column_slice(&b[..dim])) * 0.5;
        prop_assert!((mid.coords() - &want_mid).amax() <= 1e-12 * want_mid.amax().max(1.0));
    }

    #[test]
    fn distance_is_zero_on_the_diagonal(which in 0usize..6, q in prop::collection::vec(-1.5f64..1.5, 3)) {
        let m = &manifolds()[which];
        let q = m.configuration(&pick(m, &q)).unwrap();
        prop_assert_eq!(midpoint_distance(m, &q, &q).unwrap(), 0.0);
    }
}

#[test]
fn se2_anisotropy_examples() {
    let m = Manifold::se2(Se2Weights::new(1.0, 100.0, 1.0), Retraction::Se2Exponential).unwrap();
    let o = m.configuration(&[0.0, 0.0, 0.0]).unwrap();
    let lateral = m.configuration(&[0.0, 0.1, 0.0]).unwrap();
    let forward = m.configuration(&[0.5, 0.0, 0.0]).unwrap();
    assert!((midpoint_distance(&m, &o, &lateral).unwrap() - 1.0).abs() < 1e-12);
    assert!((midpoint_distance(&m, &o, &forward).unwrap() - 0.5).abs() < 1e-12);
}
