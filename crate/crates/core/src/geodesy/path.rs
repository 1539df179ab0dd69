//! Polylines of configurations, their length and energy, and unit-speed
//! resampling.

use nalgebra::DVector;
use serde::Serialize;

use super::distance::distance_raw;
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};

/// Ordered configurations joined by retraction curves, with cached
/// per-segment midpoint distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPolyline {
    waypoints: Vec<Configuration>,
    lengths: Vec<f64>,
}

impl PathPolyline {
    pub fn new(m: &Manifold, waypoints: Vec<Configuration>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidParameter("a polyline needs at least two waypoints".into()));
        }
        for w in &waypoints {
            m.check_dim(w)?;
        }
        let lengths =
            waypoints.windows(2).map(|p| distance_raw(m, p[0].coords(), p[1].coords())).collect::<Result<Vec<_>>>()?;
        Ok(Self { waypoints, lengths })
    }

    /// Builds a polyline from waypoints whose segment lengths are already
    /// known.
    pub(crate) fn from_parts(waypoints: Vec<Configuration>, lengths: Vec<f64>) -> Self {
        debug_assert!(waypoints.len() >= 2 && lengths.len() + 1 == waypoints.len());
        Self { waypoints, lengths }
    }

    pub fn waypoints(&self) -> &[Configuration] {
        &self.waypoints
    }

    pub fn segment_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn num_segments(&self) -> usize {
        self.lengths.len()
    }

    pub fn first(&self) -> &Configuration {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Configuration {
        self.waypoints.last().expect("nonempty")
    }

    /// Sum of cached segment lengths.
    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn push(&mut self, m: &Manifold, q: Configuration) -> Result<()> {
        m.check_dim(&q)?;
        let d = distance_raw(m, self.last().coords(), q.coords())?;
        self.lengths.push(d);
        self.waypoints.push(q);
        Ok(())
    }

    /// Appends `other`, whose first waypoint must equal this path's last.
    pub fn concat(&mut self, other: &PathPolyline) -> Result<()> {
        if other.first() != self.last() {
            return Err(Error::InvalidParameter("concatenated paths must share an endpoint".into()));
        }
        self.waypoints.extend_from_slice(&other.waypoints[1..]);
        self.lengths.extend_from_slice(&other.lengths);
        Ok(())
    }

    /// Keeps the first `n ≥ 2` waypoints.
    pub fn truncate(&mut self, n: usize) {
        let n = n.max(2);
        self.waypoints.truncate(n);
        self.lengths.truncate(n - 1);
    }

    pub fn reversed(&self, m: &Manifold) -> Result<Self> {
        let mut w = self.waypoints.clone();
        w.reverse();
        Self::new(m, w)
    }

    /// Point at fraction `t ∈ [0, 1]` along segment `i`, following the
    /// retraction curve `R_a(t·R⁻¹_a(b))`.
    pub fn point_on_segment(&self, m: &Manifold, i: usize, t: f64) -> Result<Configuration> {
        let a = self.waypoints[i].coords();
        let b = self.waypoints[i + 1].coords();
        let v = m.inverse_retract_raw(a, b)?;
        Ok(Configuration::from_raw(m.retract_raw(a, &(v * t))))
    }
}

/// Sum of per-segment midpoint distances, recomputed from the waypoints.
pub fn path_length(m: &Manifold, p: &PathPolyline) -> Result<f64> {
    p.waypoints.windows(2).map(|w| distance_raw(m, w[0].coords(), w[1].coords())).sum()
}

/// Discrete energy `½·K·Σ dᵢ²` of a `K`-segment polyline traversed with
/// uniform time per segment; equals `L²/2` when all segments are equal.
pub fn path_energy(p: &PathPolyline) -> f64 {
    let k = p.num_segments() as f64;
    0.5 * k * p.lengths.iter().map(|d| d * d).sum::<f64>()
}

/// A parameterisation of a polyline by `τ ∈ [0, K]`: segment `⌊τ⌋` at local
/// fraction `τ − ⌊τ⌋`.
struct Curve<'a> {
    m: &'a Manifold,
    starts: Vec<DVector<f64>>,
    tangents: Vec<DVector<f64>>,
    end: DVector<f64>,
}

impl<'a> Curve<'a> {
    fn new(m: &'a Manifold, p: &PathPolyline) -> Result<Self> {
        let mut starts = Vec::with_capacity(p.num_segments());
        let mut tangents = Vec::with_capacity(p.num_segments());
        for w in p.waypoints.windows(2) {
            tangents.push(m.inverse_retract_raw(w[0].coords(), w[1].coords())?);
            starts.push(w[0].coords().clone());
        }
        Ok(Self { m, starts, tangents, end: p.last().coords().clone() })
    }

    fn span(&self) -> f64 {
        self.starts.len() as f64
    }

    fn at(&self, tau: f64) -> DVector<f64> {
        if tau >= self.span() {
            return self.end.clone();
        }
        let i = (tau.max(0.0).floor() as usize).min(self.starts.len() - 1);
        let t = tau - i as f64;
        self.m.retract_raw(&self.starts[i], &(&self.tangents[i] * t))
    }

    fn chord(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        distance_raw(self.m, a, b)
    }
}

/// Root of `f` bracketed by `a` (negative) and `b` (nonnegative) by the
/// Illinois variant of regula falsi; returns the last abscissa and value.
fn illinois(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: (f64, f64),
    b: (f64, f64),
    f_tol: f64,
    x_tol: f64,
) -> Result<(f64, f64)> {
    let ((mut xa, mut fa), (mut xb, mut fb)) = (a, b);
    let mut side = 0i8;
    let mut last = (xb, fb);
    for _ in 0..200 {
        let mut x = (xa * fb - xb * fa) / (fb - fa);
        if !(x > xa.min(xb) && x < xa.max(xb)) {
            x = 0.5 * (xa + xb);
        }
        let fx = f(x)?;
        last = (x, fx);
        if fx.abs() <= f_tol || (xb - xa).abs() <= x_tol {
            break;
        }
        if fx < 0.0 {
            xa = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            xb = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(last)
}

/// Result of marching equal chords of length `ell` along the curve.
enum March {
    /// Ran out of curve before placing all interior points.
    Short,
    /// All interior points placed; the final chord has this length.
    Done { taus: Vec<f64>, remainder: f64 },
}

fn march(curve: &Curve<'_>, dense: &[(f64, DVector<f64>)], n_out: usize, ell: f64) -> Result<March> {
    let mut taus = Vec::with_capacity(n_out);
    taus.push(0.0);
    let mut cur_tau = 0.0;
    let mut cur = dense[0].1.clone();
    let mut k = 0usize;
    for _ in 1..(n_out - 1) {
        // first dense sample beyond the current point whose chord exceeds ell
        while k < dense.len() && dense[k].0 <= cur_tau {
            k += 1;
        }
        let mut lo = cur_tau;
        let mut hi = None;
        let mut j = k;
        while j < dense.len() {
            if curve.chord(&cur, &dense[j].1)? >= ell {
                hi = Some(dense[j].0);
                break;
            }
            lo = dense[j].0;
            j += 1;
        }
        let Some(hi) = hi else {
            return Ok(March::Short);
        };
        let f = |tau: f64| -> Result<f64> { Ok(curve.chord(&cur, &curve.at(tau))? - ell) };
        let f_lo = if lo == cur_tau { -ell } else { f(lo)? };
        cur_tau = illinois(f, (lo, f_lo), (hi, f(hi)?), 1e-13 * ell, 1e-15 * curve.span().max(1.0))?.0;
        cur = curve.at(cur_tau);
        taus.push(cur_tau);
    }
    let remainder = curve.chord(&cur, &curve.end)?;
    taus.push(curve.span());
    Ok(March::Done { taus, remainder })
}

/// Resamples `p` into `n_out` waypoints on the same curve with equal
/// consecutive midpoint distances (unit speed under uniform timing).
///
/// Each output waypoint lies on an input segment's retraction curve and the
/// endpoints are preserved exactly.
pub fn reparameterize_unit_speed(m: &Manifold, p: &PathPolyline, n_out: usize) -> Result<PathPolyline> {
    if n_out < 2 {
        return Err(Error::InvalidParameter("n_out must be at least 2".into()));
    }
    let curve = Curve::new(m, p)?;
    let coarse = p.length();
    if coarse < 1e-12 {
        return Err(Error::DegeneratePath);
    }
    let segments = n_out - 1;
    // dense samples, spaced about a quarter of the target chord
    let piece = coarse / segments as f64 / 4.0;
    let mut dense: Vec<(f64, DVector<f64>)> = vec![(0.0, curve.starts[0].clone())];
    for (i, &d) in p.lengths.iter().enumerate() {
        let k = ((d / piece).ceil() as usize).clamp(1, 1 << 16);
        for j in 1..=k {
            let tau = i as f64 + j as f64 / k as f64;
            let q = if j == k && i + 1 == p.num_segments() { curve.end.clone() } else { curve.at(tau) };
            dense.push((tau, q));
        }
    }
    let mut fine = 0.0;
    for w in dense.windows(2) {
        fine += curve.chord(&w[0].1, &w[1].1)?;
    }
    if fine < 1e-12 {
        return Err(Error::DegeneratePath);
    }
    if segments == 1 {
        return PathPolyline::new(m, vec![p.first().clone(), p.last().clone()]);
    }

    // g(ell) = remainder − ell is decreasing; Short counts as negative.
    let eval = |ell: f64| -> Result<(f64, Option<Vec<f64>>)> {
        Ok(match march(&curve, &dense, n_out, ell)? {
            March::Short => (-ell, None),
            March::Done { taus, remainder } => (remainder - ell, Some(taus)),
        })
    };
    let nominal = fine / segments as f64;
    let mut lo = 0.5 * nominal;
    let mut hi = 1.05 * nominal;
    let (mut g_lo, _) = eval(lo)?;
    while g_lo < 0.0 && lo > 1e-6 * nominal {
        lo *= 0.5;
        g_lo = eval(lo)?.0;
    }
    let (mut g_hi, _) = eval(hi)?;
    while g_hi > 0.0 {
        hi *= 1.5;
        g_hi = eval(hi)?.0;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut track = |ell: f64| -> Result<f64> {
        let (g, taus) = eval(ell)?;
        if let Some(t) = taus {
            let err = (g / ell).abs();
            if best.as_ref().map_or(true, |(e, _)| err < *e) {
                best = Some((err, t));
            }
        }
        Ok(g)
    };
    illinois(&mut track, (hi, g_hi), (lo, g_lo), 1e-11 * nominal, 1e-14 * nominal)?;
    let (_, taus) = best.ok_or(Error::DegeneratePath)?;
    let mut out = Vec::with_capacity(n_out);
    for (i, &tau) in taus.iter().enumerate() {
        if i == 0 {
            out.push(p.first().clone());
        } else if i + 1 == taus.len() {
            out.push(p.last().clone());
        } else {
            out.push(Configuration::from_raw(curve.at(tau)));
        }
    }
    PathPolyline::new(m, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TwoLinkParams;
    use approx::assert_abs_diff_eq;

    fn poly(m: &Manifold, pts: &[&[f64]]) -> PathPolyline {
        PathPolyline::new(m, pts.iter().map(|p| m.configuration(p).unwrap()).collect()).unwrap()
    }

    fn spread(p: &PathPolyline) -> f64 {
        let l = p.segment_lengths();
        let max = l.iter().cloned().fold(f64::MIN, f64::max);
        let min = l.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    #[test]
    fn length_examples() {
        let e = Manifold::euclidean(2);
        let p = poly(&e, &[&[0.0, 0.0], &[3.0, 4.0]]);
        assert_abs_diff_eq!(path_length(&e, &p).unwrap(), 5.0, epsilon = 1e-15);
        let p = poly(&e, &[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        assert_abs_diff_eq!(path_length(&e, &p).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.length(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn length_is_additive() {
        let m = Manifold::two_link(TwoLinkParams::default()).unwrap();
        let a = poly(&m, &[&[0.0, 0.0], &[0.1, 0.2], &[0.3, 0.1]]);
        let b = poly(&m, &[&[0.3, 0.1], &[0.5, -0.2]]);
        let mut ab = a.clone();
        ab.concat(&b).unwrap();
        assert_abs_diff_eq!(
            path_length(&m, &ab).unwrap(),
            path_length(&m, &a).unwrap() + path_length(&m, &b).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn energy_examples() {
        let e = Manifold::euclidean(1);
        let p = poly(&e, &[&[0.0], &[1.0], &[2.0]]);
        assert_abs_diff_eq!(path_energy(&p), 2.0, epsilon = 1e-15);
        let q = poly(&e, &[&[0.0], &[2.0], &[2.0]]);
        assert_abs_diff_eq!(path_energy(&q), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn refinement_changes_length_at_third_order() {
        let m = Manifold::two_link(TwoLinkParams::default()).unwrap();
        let a = m.configuration(&[0.2, 0.4]).unwrap();
        let mut diffs = Vec::new();
        for h in [0.2, 0.1, 0.05] {
            let b = m.configuration(&[0.2 + h * 0.6, 0.4 + h * 0.8]).unwrap();
            let coarse = PathPolyline::new(&m, vec![a.clone(), b.clone()]).unwrap();
            let mid = coarse.point_on_segment(&m, 0, 0.5).unwrap();
            let fine = PathPolyline::new(&m, vec![a.clone(), mid, b]).unwrap();
            diffs.push((fine.length() - coarse.length()).abs());
        }
        let slope1 = (diffs[0] / diffs[1]).log2();
        let slope2 = (diffs[1] / diffs[2]).log2();
        assert!(slope1 > 2.7 && slope2 > 2.7, "{slope1} {slope2}");
    }

    #[test]
    fn reparameterize_examples() {
        let e = Manifold::euclidean(1);
        let p = poly(&e, &[&[0.0], &[2.0], &[2.0]]);
        let r = reparameterize_unit_speed(&e, &p, 3).unwrap();
        let xs: Vec<f64> = r.waypoints().iter().map(|q| q.as_slice()[0]).collect();
        assert_abs_diff_eq!(xs[0], 0.0);
        assert_abs_diff_eq!(xs[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(xs[2], 2.0);

        let e2 = Manifold::euclidean(2);
        let p = poly(&e2, &[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        let r = reparameterize_unit_speed(&e2, &p, 3).unwrap();
        for (a, b) in r.waypoints().iter().zip(p.waypoints()) {
            assert_abs_diff_eq!(a.coords(), b.coords(), epsilon = 1e-9);
        }
    }

    #[test]
    fn reparameterize_rejects_degenerate() {
        let e = Manifold::euclidean(2);
        let p = poly(&e, &[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(reparameterize_unit_speed(&e, &p, 5), Err(Error::DegeneratePath));
    }

    #[test]
    fn reparameterize_curved_polyline_is_unit_speed() {
        let m = Manifold::two_link(TwoLinkParams::default()).unwrap();
        let pts: Vec<Configuration> = (0..=12)
            .map(|k| {
                let t = k as f64 / 12.0;
                let x = -0.8 + 2.4 * t;
                let y = -0.8 + 2.4 * t * t + 0.3 * (5.0 * t).sin();
                m.configuration(&[x, y]).unwrap()
            })
            .collect();
        let p = PathPolyline::new(&m, pts).unwrap();
        let r = reparameterize_unit_speed(&m, &p, 400).unwrap();
        assert!(spread(&r) <= 1.001, "spread {}", spread(&r));
        assert!((r.length() - p.length()).abs() / p.length() <= 1e-3);
        let e = path_energy(&r);
        let l = r.length();
        assert!((e - 0.5 * l * l).abs() / e <= 1e-3);
        assert_eq!(r.first(), p.first());
        assert_eq!(r.last(), p.last());
    }
}
