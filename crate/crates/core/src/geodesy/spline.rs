//! Not-a-knot cubic interpolating splines on uniform knots `t_j = j/(N−1)`.

use nalgebra::{DMatrix, DVector};

/// Five-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub(crate) const GAUSS_5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_45),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Linear map from knot values to the spline's second derivatives, and the
/// resulting evaluation rows.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    knots: usize,
    h: f64,
    /// `M = S·y`.
    s: DMatrix<f64>,
}

impl SplineBasis {
    /// Requires `knots ≥ 4`.
    pub fn new(knots: usize) -> Self {
        assert!(knots >= 4, "not-a-knot spline needs at least four knots");
        let n = knots;
        let h = 1.0 / (n - 1) as f64;
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        // third derivative continuous across knots 1 and n−2
        a[(0, 0)] = 1.0;
        a[(0, 1)] = -2.0;
        a[(0, 2)] = 1.0;
        a[(n - 1, n - 3)] = 1.0;
        a[(n - 1, n - 2)] = -2.0;
        a[(n - 1, n - 1)] = 1.0;
        let k = 6.0 / (h * h);
        for i in 1..n - 1 {
            a[(i, i - 1)] = 1.0;
            a[(i, i)] = 4.0;
            a[(i, i + 1)] = 1.0;
            b[(i, i - 1)] = k;
            b[(i, i)] = -2.0 * k;
            b[(i, i + 1)] = k;
        }
        let s = a.lu().solve(&b).expect("not-a-knot system is nonsingular");
        Self { knots, h, s }
    }

    pub fn knots(&self) -> usize {
        self.knots
    }

    pub fn knot(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, 1.0);
        let j = ((t / self.h).floor() as usize).min(self.knots - 2);
        (j, t / self.h - j as f64)
    }

    /// Rows `(α, β)` with `p(t) = αᵀy` and `p'(t) = βᵀy`.
    pub fn rows(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        let (j, u) = self.locate(t);
        let h = self.h;
        let w = 1.0 - u;
        let mut pos = DVector::zeros(self.knots);
        let mut vel = DVector::zeros(self.knots);
        pos[j] += w;
        pos[j + 1] += u;
        vel[j] -= 1.0 / h;
        vel[j + 1] += 1.0 / h;
        let (cj, cj1) = (h * h / 6.0 * (w * w * w - w), h * h / 6.0 * (u * u * u - u));
        let (dj, dj1) = (h / 6.0 * (1.0 - 3.0 * w * w), h / 6.0 * (3.0 * u * u - 1.0));
        for i in 0..self.knots {
            pos[i] += cj * self.s[(j, i)] + cj1 * self.s[(j + 1, i)];
            vel[i] += dj * self.s[(j, i)] + dj1 * self.s[(j + 1, i)];
        }
        (pos, vel)
    }

    /// Quadrature weights and evaluation matrices over all intervals,
    /// five Gauss points each.
    pub(crate) fn quadrature(&self) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
        let nq = 5 * (self.knots - 1);
        let mut w = Vec::with_capacity(nq);
        let mut p = DMatrix::zeros(nq, self.knots);
        let mut v = DMatrix::zeros(nq, self.knots);
        let mut r = 0;
        for j in 0..self.knots - 1 {
            for (x, wt) in GAUSS_5 {
                let (pr, vr) = self.rows((j as f64 + x) * self.h);
                p.set_row(r, &pr.transpose());
                v.set_row(r, &vr.transpose());
                w.push(wt * self.h);
                r += 1;
            }
        }
        (w, p, v)
    }
}

/// A spline curve in chart coordinates: knot values stored row-wise.
#[derive(Debug, Clone)]
pub struct SplineCurve {
    basis: SplineBasis,
    values: DMatrix<f64>,
}

impl SplineCurve {
    pub fn new(basis: SplineBasis, values: DMatrix<f64>) -> Self {
        assert_eq!(values.nrows(), basis.knots());
        Self { basis, values }
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn knot_values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Unwrapped chart coordinates at `t ∈ [0, 1]`.
    pub fn point(&self, t: f64) -> DVector<f64> {
        let (p, _) = self.basis.rows(t);
        self.values.transpose() * p
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        let (_, v) = self.basis.rows(t);
        self.values.transpose() * v
    }
}
