//! Concrete Riemannian metric fields and Christoffel symbols.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};

/// Default central finite-difference step for metric derivatives.
pub const DEFAULT_CHRISTOFFEL_STEP: f64 = 1e-5;

/// A smooth field `q ↦ G_q` of SPD matrices over chart coordinates.
///
/// Implementations must be pure: the same coordinates always give the same
/// matrix. Angular coordinates may be passed unwrapped, so fields that
/// depend on them must be periodic.
pub trait MetricField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64>;
}

/// Distance-to-nearest-obstacle over chart coordinates, zero in collision.
pub trait ClearanceField: Send + Sync + fmt::Debug {
    fn clearance(&self, q: &DVector<f64>) -> f64;
}

#[derive(Debug, Clone)]
pub struct ConstantMetric {
    g: DMatrix<f64>,
}

impl ConstantMetric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        crate::manifold::MetricTensor::new(g.clone())?;
        Ok(Self { g })
    }
}

impl MetricField for ConstantMetric {
    fn dim(&self) -> usize {
        self.g.nrows()
    }
    fn eval(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        self.g.clone()
    }
}

/// Body-frame cost weights on longitudinal, lateral and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Se2Weights {
    pub w_x: f64,
    pub w_y: f64,
    pub w_theta: f64,
}

impl Se2Weights {
    pub fn new(w_x: f64, w_y: f64, w_theta: f64) -> Self {
        Self { w_x, w_y, w_theta }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.w_x, self.w_y, self.w_theta].iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("SE(2) weights must be strictly positive".into()))
        }
    }
}

/// Left-invariant SE(2) metric `G(θ) = A(θ)ᵀ W A(θ)`, where `A(θ)` maps
/// chart velocities `(ẋ, ẏ, θ̇)` to body velocities.
#[derive(Debug, Clone)]
pub struct Se2LeftInvariantMetric {
    weights: Se2Weights,
}

impl Se2LeftInvariantMetric {
    pub fn new(weights: Se2Weights) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> Se2Weights {
        self.weights
    }
}

pub fn se2_left_invariant_metric(w: &Se2Weights, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let gxx = w.w_x * c * c + w.w_y * s * s;
    let gyy = w.w_x * s * s + w.w_y * c * c;
    let gxy = (w.w_x - w.w_y) * s * c;
    DMatrix::from_row_slice(3, 3, &[gxx, gxy, 0.0, gxy, gyy, 0.0, 0.0, 0.0, w.w_theta])
}

impl MetricField for Se2LeftInvariantMetric {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        se2_left_invariant_metric(&self.weights, q[2])
    }
}

/// Link parameters of a planar two-link arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLinkParams {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
}

impl TwoLinkParams {
    /// Two identical uniform slender rods with centres of mass at the
    /// midpoints.
    pub fn uniform_rods(length: f64, mass: f64) -> Self {
        let i = mass * length * length / 12.0;
        Self { l1: length, l2: length, m1: mass, m2: mass, lc1: length / 2.0, lc2: length / 2.0, i1: i, i2: i }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.l1, self.l2, self.m1, self.m2];
        let nonneg = [self.lc1, self.lc2, self.i1, self.i2];
        if positive.iter().all(|x| x.is_finite() && *x > 0.0) && nonneg.iter().all(|x| x.is_finite() && *x >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("two-link lengths and masses must be positive".into()))
        }
    }
}

impl Default for TwoLinkParams {
    fn default() -> Self {
        Self::uniform_rods(1.0, 1.0)
    }
}

/// Analytic joint-space mass matrix of the two-link arm (depends on `q2`).
pub fn two_link_mass_matrix(p: &TwoLinkParams, q2: f64) -> DMatrix<f64> {
    let c = q2.cos();
    let m11 = p.m1 * p.lc1 * p.lc1 + p.i1 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c) + p.i2;
    let m12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c) + p.i2;
    let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
    DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
}

#[derive(Debug, Clone)]
pub struct TwoLinkMassMatrix {
    params: TwoLinkParams,
}

impl TwoLinkMassMatrix {
    pub fn new(params: TwoLinkParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &TwoLinkParams {
        &self.params
    }
}

impl MetricField for TwoLinkMassMatrix {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        two_link_mass_matrix(&self.params, q[1])
    }
}

/// Conformal metric of a sphere of radius `r` under stereographic
/// projection: `G(q) = 4r² / (1 + |q|²)² · I`.
#[derive(Debug, Clone)]
pub struct StereographicSphereMetric {
    dim: usize,
    radius: f64,
}

impl StereographicSphereMetric {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter("sphere radius must be positive".into()));
        }
        Ok(Self { dim, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl MetricField for StereographicSphereMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let s = 1.0 + q.norm_squared();
        let f = 4.0 * self.radius * self.radius / (s * s);
        DMatrix::from_diagonal_element(self.dim, self.dim, f)
    }
}

/// Exponential barrier amplitude and decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BarrierParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("barrier alpha and beta must be nonnegative".into()))
        }
    }

    /// `1 + β·exp(−α·clearance)`.
    pub fn factor(&self, clearance: f64) -> f64 {
        1.0 + self.beta * (-self.alpha * clearance.max(0.0)).exp()
    }
}

/// `G_b(q) = (1 + β·exp(−α·clearance(q))) · G(q)`.
#[derive(Debug, Clone)]
pub struct BarrierMetric {
    base: Arc<dyn MetricField>,
    clearance: Arc<dyn ClearanceField>,
    params: BarrierParams,
}

impl BarrierMetric {
    pub fn new(base: Arc<dyn MetricField>, clearance: Arc<dyn ClearanceField>, params: BarrierParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { base, clearance, params })
    }
}

impl MetricField for BarrierMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let g = self.base.eval(q);
        if self.params.beta == 0.0 {
            return g;
        }
        g * self.params.factor(self.clearance.clearance(q))
    }
}

/// Evaluates a barrier-reshaped metric at one configuration.
pub fn barrier_reshaped_metric(
    base: &dyn MetricField,
    env: &dyn ClearanceField,
    b: &BarrierParams,
    q: &Configuration,
) -> DMatrix<f64> {
    let g = base.eval(q.coords());
    if b.beta == 0.0 {
        return g;
    }
    g * b.factor(env.clearance(q.coords()))
}

/// Christoffel symbols of the second kind, indexed `[k][i][j]` for `Γᵏᵢⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// `Γᵏᵢⱼ vⁱ vʲ` for every `k`.
    pub fn contract(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.get(k, i, j) * v[i] * v[j];
                }
            }
            acc
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `Γᵏᵢⱼ = ½ Gᵏˡ (∂ⱼG_il + ∂ᵢG_jl − ∂ₗG_ij)` with central finite
/// differences of the metric field.
pub fn christoffel_at(m: &Manifold, q: &Configuration, fd_step: f64) -> Result<Christoffel> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParameter("fd_step must be positive".into()));
    }
    let g = m.metric_at(q)?;
    let chol = g.matrix().clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(christoffel_raw(m, q.coords(), fd_step, &chol.inverse()))
}

pub(crate) fn christoffel_raw(m: &Manifold, q: &DVector<f64>, h: f64, g_inv: &DMatrix<f64>) -> Christoffel {
    let n = q.len();
    // dg[l] = ∂G/∂q^l
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|l| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[l] += h;
            qm[l] -= h;
            (m.metric_raw(&qp) - m.metric_raw(&qm)) / (2.0 * h)
        })
        .collect();
    let mut data = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i..n {
            // first-kind symbol Γ_{l,ij}
            let first: Vec<f64> = (0..n).map(|l| 0.5 * (dg[j][(i, l)] + dg[i][(j, l)] - dg[l][(i, j)])).collect();
            for k in 0..n {
                let val: f64 = (0..n).map(|l| g_inv[(k, l)] * first[l]).sum();
                data[(k * n + i) * n + j] = val;
                data[(k * n + j) * n + i] = val;
            }
        }
    }
    Christoffel { dim: n, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Retraction;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn mat(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, v.len() / rows, v)
    }

    #[test]
    fn two_link_examples() {
        let p = TwoLinkParams::default();
        assert_abs_diff_eq!(
            two_link_mass_matrix(&p, 0.0),
            mat(2, &[8.0 / 3.0, 5.0 / 6.0, 5.0 / 6.0, 1.0 / 3.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            two_link_mass_matrix(&p, PI / 2.0),
            mat(2, &[5.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            two_link_mass_matrix(&p, PI),
            mat(2, &[2.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0, 1.0 / 3.0]),
            epsilon = 1e-12
        );
    }

    /// Mass matrix from the kinetic energy of the two rods, built from the
    /// centre-of-mass Jacobians rather than the closed-form entries.
    fn lagrangian_mass_matrix(p: &TwoLinkParams, q1: f64, q2: f64) -> DMatrix<f64> {
        let (s1, c1) = q1.sin_cos();
        let (s12, c12) = (q1 + q2).sin_cos();
        let j1 = mat(2, &[-p.lc1 * s1, 0.0, p.lc1 * c1, 0.0]);
        let j2 = mat(2, &[-p.l1 * s1 - p.lc2 * s12, -p.lc2 * s12, p.l1 * c1 + p.lc2 * c12, p.lc2 * c12]);
        let jw1 = mat(1, &[1.0, 0.0]);
        let jw2 = mat(1, &[1.0, 1.0]);
        j1.transpose() * &j1 * p.m1
            + j2.transpose() * &j2 * p.m2
            + jw1.transpose() * &jw1 * p.i1
            + jw2.transpose() * &jw2 * p.i2
    }

    #[test]
    fn two_link_matches_lagrangian_derivation() {
        let p = TwoLinkParams::default();
        for k in 0..36 {
            let q1 = -PI + 0.37 * k as f64;
            let q2 = -PI + 0.173 * k as f64;
            assert_abs_diff_eq!(two_link_mass_matrix(&p, q2), lagrangian_mass_matrix(&p, q1, q2), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_link_is_spd_over_full_range() {
        let p = TwoLinkParams::default();
        for deg in -180..=180 {
            let g = two_link_mass_matrix(&p, (deg as f64).to_radians());
            assert!(g.cholesky().is_some(), "not SPD at {deg}°");
        }
    }

    #[test]
    fn se2_metric_examples() {
        let w = Se2Weights::new(1.0, 100.0, 1.0);
        assert_abs_diff_eq!(
            se2_left_invariant_metric(&w, 0.0),
            mat(3, &[1.0, 0.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.0, 1.0]),
            epsilon = 1e-12
        );
        let iso = Se2Weights::new(1.0, 1.0, 1.0);
        for th in [-2.0, 0.3, 1.7, 3.1] {
            assert_abs_diff_eq!(se2_left_invariant_metric(&iso, th), DMatrix::identity(3, 3), epsilon = 1e-12);
        }
        // At θ = π/4 the heading is (1, 1)/√2, so that direction must be the
        // cheap one and the off-diagonal term is negative.
        let g = se2_left_invariant_metric(&w, PI / 4.0);
        assert_abs_diff_eq!(g, mat(3, &[50.5, -49.5, 0.0, -49.5, 50.5, 0.0, 0.0, 0.0, 1.0]), epsilon = 1e-12);
    }

    #[test]
    fn se2_metric_agrees_with_body_velocity_cost() {
        // chart velocity of the curve t ↦ q ∘ exp(tξ), by finite differences
        let w = Se2Weights::new(1.0, 100.0, 1.0);
        let m = Manifold::se2(w, Retraction::Chart).unwrap();
        for (th, xi) in [(0.0, [1.0, 0.0, 0.0]), (0.9, [0.2, 0.7, -0.4]), (-2.4, [0.0, 1.0, 0.3])] {
            let q = m.configuration(&[1.0, -2.0, th]).unwrap();
            let h = 1e-6;
            let pose = |t: f64| {
                let g = crate::manifold::se2_exp([xi[0] * t, xi[1] * t, xi[2] * t]);
                let (s, c) = th.sin_cos();
                [1.0 + c * g[0] - s * g[1], -2.0 + s * g[0] + c * g[1], th + g[2]]
            };
            let (a, b) = (pose(h), pose(-h));
            let v = DVector::from_fn(3, |i, _| (a[i] - b[i]) / (2.0 * h));
            let g = m.metric_at(&q).unwrap();
            let want = w.w_x * xi[0] * xi[0] + w.w_y * xi[1] * xi[1] + w.w_theta * xi[2] * xi[2];
            assert_abs_diff_eq!(g.inner(&v, &v), want, epsilon = 1e-6);
        }
    }

    #[test]
    fn se2_metric_ignores_translation() {
        let w = Se2Weights::new(1.0, 100.0, 1.0);
        let f = Se2LeftInvariantMetric::new(w);
        let a = f.eval(&DVector::from_vec(vec![0.0, 0.0, 0.7]));
        let b = f.eval(&DVector::from_vec(vec![-5.0, 12.0, 0.7]));
        assert_eq!(a, b);
    }

    #[derive(Debug)]
    struct ConstClearance(f64);
    impl ClearanceField for ConstClearance {
        fn clearance(&self, _q: &DVector<f64>) -> f64 {
            self.0
        }
    }

    #[test]
    fn barrier_examples() {
        let base = Se2LeftInvariantMetric::new(Se2Weights::new(1.0, 100.0, 1.0));
        let q = Configuration::new(vec![0.0, 0.0, 0.4]).unwrap();
        let zero = BarrierParams { alpha: 2.0, beta: 0.0 };
        assert_eq!(barrier_reshaped_metric(&base, &ConstClearance(0.0), &zero, &q), base.eval(q.coords()));
        let b = BarrierParams { alpha: 2.0, beta: 10.0 };
        assert_abs_diff_eq!(b.factor(1.0), 1.0 + 10.0 * (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.factor(1.0), 2.3534, epsilon = 1e-4);
        assert_abs_diff_eq!(b.factor(1e6), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.factor(0.0), 11.0, epsilon = 1e-15);
        let g = barrier_reshaped_metric(&base, &ConstClearance(1.0), &b, &q);
        assert_abs_diff_eq!(g, base.eval(q.coords()) * b.factor(1.0), epsilon = 1e-12);
    }

    #[test]
    fn christoffel_vanishes_for_constant_metrics() {
        let m = Manifold::constant(mat(2, &[4.0, 1.0, 1.0, 2.0])).unwrap();
        let q = m.configuration(&[0.3, -0.2]).unwrap();
        assert!(christoffel_at(&m, &q, 1e-5).unwrap().max_abs() < 1e-8);
        let s = Manifold::se2(Se2Weights::new(1.0, 1.0, 1.0), Retraction::Chart).unwrap();
        let q = s.configuration(&[0.3, -0.2, 1.2]).unwrap();
        assert!(christoffel_at(&s, &q, 1e-5).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn two_link_christoffel_matches_analytic() {
        let p = TwoLinkParams::default();
        let m = Manifold::two_link(p).unwrap();
        for q2 in [PI / 2.0, 0.3, -1.9] {
            let q = m.configuration(&[0.1, q2]).unwrap();
            let gam = christoffel_at(&m, &q, 1e-5).unwrap();
            // dM/dq2
            let a = p.l1 * p.lc2 * p.m2 * q2.sin();
            let d2 = mat(2, &[-2.0 * a, -a, -a, 0.0]);
            let dg = [DMatrix::zeros(2, 2), d2];
            let ginv = two_link_mass_matrix(&p, q2).try_inverse().unwrap();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let want: f64 =
                            (0..2).map(|l| 0.5 * ginv[(k, l)] * (dg[j][(i, l)] + dg[i][(j, l)] - dg[l][(i, j)])).sum();
                        assert_abs_diff_eq!(gam.get(k, i, j), want, epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_step_halving_is_second_order() {
        let m = Manifold::two_link(TwoLinkParams::default()).unwrap();
        let q = m.configuration(&[0.2, 0.8]).unwrap();
        let exact = christoffel_at(&m, &q, 1e-5).unwrap();
        let coarse = christoffel_at(&m, &q, 0.04).unwrap();
        let fine = christoffel_at(&m, &q, 0.02).unwrap();
        let err = |c: &Christoffel| (0..8).map(|ix| (c.data[ix] - exact.data[ix]).abs()).fold(0.0, f64::max);
        let ratio = err(&coarse) / err(&fine);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn metric_fields_fd_converge_second_order() {
        let arm = Manifold::two_link(TwoLinkParams::default()).unwrap();
        let se2 = Manifold::se2(Se2Weights::new(1.0, 100.0, 1.0), Retraction::Chart).unwrap();
        for (m, q, l) in [(&arm, vec![0.1, 0.7], 1usize), (&se2, vec![0.0, 0.0, 0.6], 2usize)] {
            let q = DVector::from_vec(q);
            let d = |h: f64| {
                let mut a = q.clone();
                let mut b = q.clone();
                a[l] += h;
                b[l] -= h;
                (m.metric_raw(&a) - m.metric_raw(&b)) / (2.0 * h)
            };
            let reference = d(1e-5);
            let e1 = (d(0.1) - &reference).amax();
            let e2 = (d(0.05) - &reference).amax();
            let slope = (e1 / e2).log2();
            assert!((1.8..2.2).contains(&slope), "slope {slope}");
        }
    }

    #[test]
    fn sphere_metric_value() {
        let f = StereographicSphereMetric::new(2, 0.5).unwrap();
        let g = f.eval(&DVector::from_vec(vec![1.0, 0.0]));
        assert_abs_diff_eq!(g[(0, 0)], 0.25, epsilon = 1e-15);
    }
}
