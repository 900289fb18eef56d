//! Feasible curves: zig-zag construction from per-user breakpoints and the
//! per-coordinate straightening splice that turns any feasible curve from
//! the origin into a coordinatewise non-decreasing one.

use crate::analysis::AnalysisConfig;
use crate::real::Real;
use crate::{Error, Result};

/// A parameterized polyline in [0,1]^L.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleCurve<R> {
    vertices: Vec<Vec<R>>,
}

impl<R: Real> FeasibleCurve<R> {
    pub fn from_vertices(vertices: Vec<Vec<R>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidArgument("a curve needs at least two vertices".into()));
        }
        let l = vertices[0].len();
        if vertices.iter().any(|v| v.len() != l) {
            return Err(Error::InvalidArgument("curve vertices of mixed dimension".into()));
        }
        Ok(FeasibleCurve { vertices })
    }

    pub fn vertices(&self) -> &[Vec<R>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn start(&self) -> &[R] {
        &self.vertices[0]
    }

    pub fn end(&self) -> &[R] {
        self.vertices.last().unwrap()
    }

    pub fn is_monotone(&self) -> bool {
        self.vertices
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    /// Points sampled densely along every segment (including all vertices).
    pub fn sample(&self, per_segment: usize) -> Vec<Vec<R>> {
        let mut out = Vec::new();
        for w in self.vertices.windows(2) {
            for j in 0..per_segment {
                let t = R::of(j as f64 / per_segment as f64);
                out.push(
                    w[0].iter()
                        .zip(&w[1])
                        .map(|(&a, &b)| a + (b - a) * t)
                        .collect(),
                );
            }
        }
        out.push(self.end().to_vec());
        out
    }
}

/// Builds the axis-aligned zig-zag polyline through the given breakpoint
/// ladders: at step t, user A advances to its t-th breakpoint, then B, then
/// C, and so on. `breakpoints[s]` must be non-decreasing and start at 0; its
/// last entry is the target. Returns the curve plus per-vertex feasibility
/// under the supplied analysis configuration.
pub fn zigzag_curve<R: Real>(
    cfg: &AnalysisConfig<R>,
    breakpoints: &[Vec<R>],
) -> Result<(FeasibleCurve<R>, Vec<bool>)> {
    let curve = zigzag_vertices(breakpoints)?;
    let feas = curve.vertices().iter().map(|v| cfg.is_feasible(v)).collect();
    Ok((curve, feas))
}

/// The vertex list of the zig-zag curve, without feasibility checks.
pub fn zigzag_vertices<R: Real>(breakpoints: &[Vec<R>]) -> Result<FeasibleCurve<R>> {
    let l = breakpoints.len();
    if l == 0 {
        return Err(Error::InvalidArgument("no users".into()));
    }
    let steps = breakpoints[0].len();
    if steps < 2 {
        return Err(Error::InvalidArgument("need at least t_max = 1 breakpoints".into()));
    }
    for (s, bp) in breakpoints.iter().enumerate() {
        if bp.len() != steps {
            return Err(Error::InvalidArgument("breakpoint ladders of unequal length".into()));
        }
        if bp[0] != R::zero() {
            return Err(Error::InvalidArgument(format!("user {s} ladder must start at 0")));
        }
        if bp.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!(
                "user {s} breakpoints are not non-decreasing"
            )));
        }
    }
    let mut current: Vec<R> = vec![R::zero(); l];
    let mut vertices = vec![current.clone()];
    for t in 1..steps {
        for (s, bp) in breakpoints.iter().enumerate() {
            if bp[t] > current[s] {
                current[s] = bp[t];
                vertices.push(current.clone());
            }
        }
    }
    if vertices.len() < 2 {
        vertices.push(current);
    }
    FeasibleCurve::from_vertices(vertices)
}

/// Straightens a feasible curve from the origin into a coordinatewise
/// non-decreasing feasible curve with the same endpoints. Coordinates are
/// processed in user order; each pass pins the coordinate once it first
/// reaches its final value and splices every local maximum flat until the
/// path last returns to that level.
pub fn straighten_curve<R: Real>(
    cfg: &AnalysisConfig<R>,
    curve: &FeasibleCurve<R>,
) -> Result<FeasibleCurve<R>> {
    let l = curve.dim();
    if curve.start().iter().any(|&v| v != R::zero()) {
        return Err(Error::InvalidArgument("curve must start at the origin".into()));
    }
    for v in curve.sample(8) {
        if !cfg.is_feasible(&v) {
            return Err(Error::InvalidArgument("input curve is not feasible".into()));
        }
    }
    // densify so the per-coordinate splice sees fine-grained motion
    let mut pts = curve.sample(32);
    let n = pts.len();
    for s in 0..l {
        let target = pts[n - 1][s];
        // pin after the first time the coordinate reaches its target
        if let Some(first) = (0..n).find(|&i| pts[i][s] >= target) {
            for p in pts.iter_mut().skip(first) {
                p[s] = target;
            }
        }
        // local-maximum splice
        let mut i = 0usize;
        while i + 1 < n {
            if pts[i + 1][s] < pts[i][s] {
                let level = pts[i][s];
                // hold until the last index at or below the level
                let mut k = i + 1;
                for j in (i + 1)..n {
                    if pts[j][s] <= level {
                        k = j;
                    }
                }
                for p in pts.iter_mut().take(k + 1).skip(i) {
                    p[s] = level;
                }
                i = k;
            } else {
                i += 1;
            }
        }
    }
    let out = FeasibleCurve::from_vertices(pts)?;
    debug_assert!(out.is_monotone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TransferMatrixDistribution;
    use crate::lif::{LifKind, LifTable};
    use crate::analysis::Poly;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cfg_lc2() -> AnalysisConfig<f64> {
        let g = TransferMatrixDistribution::from_catalog_probs(2, 2, &[0.2, 0.2, 0.4, 0.0])
            .unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        let psi: Poly<f64> = Poly::from_pairs(&[(1, 0.2), (2, 0.7), (9, 0.1)]);
        AnalysisConfig::new(vec![psi.clone(), psi], vec![0.35, 0.35], table).unwrap()
    }

    #[test]
    fn zigzag_vertex_order_two_users() {
        let bp = vec![
            vec![0.0, 0.3, 0.6],
            vec![0.0, 0.2, 0.5],
        ];
        let curve = zigzag_vertices::<f64>(&bp).unwrap();
        assert_eq!(
            curve.vertices(),
            &[
                vec![0.0, 0.0],
                vec![0.3, 0.0],
                vec![0.3, 0.2],
                vec![0.6, 0.2],
                vec![0.6, 0.5],
            ]
        );
    }

    #[test]
    fn zigzag_vertex_order_three_users() {
        let bp = vec![
            vec![0.0, 0.4],
            vec![0.0, 0.5],
            vec![0.0, 0.6],
        ];
        let curve = zigzag_vertices::<f64>(&bp).unwrap();
        assert_eq!(
            curve.vertices(),
            &[
                vec![0.0, 0.0, 0.0],
                vec![0.4, 0.0, 0.0],
                vec![0.4, 0.5, 0.0],
                vec![0.4, 0.5, 0.6],
            ]
        );
    }

    #[test]
    fn zigzag_rejects_non_monotone() {
        let bp = vec![vec![0.0, 0.5, 0.4], vec![0.0, 0.1, 0.2]];
        assert!(matches!(
            zigzag_vertices::<f64>(&bp),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn already_increasing_curve_unchanged_in_shape() {
        let cfg = cfg_lc2();
        let limit = crate::analysis::fixed_point(&cfg).unwrap().limit;
        let mid: Vec<f64> = limit.iter().map(|v| v * 0.5).collect();
        let curve =
            FeasibleCurve::from_vertices(vec![vec![0.0, 0.0], mid, limit.clone()]).unwrap();
        let out = straighten_curve(&cfg, &curve).unwrap();
        assert!(out.is_monotone());
        assert_eq!(out.end(), curve.end());
        // every output sample stays on the original polyline (same shape)
        for v in out.vertices() {
            assert!(v[0] <= limit[0] + 1e-12 && v[1] <= limit[1] + 1e-12);
        }
    }

    #[test]
    fn wiggly_feasible_curves_straighten() {
        let cfg = cfg_lc2();
        let limit = crate::analysis::fixed_point(&cfg).unwrap().limit;
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            // random monotone base curve toward a scaled-down limit, with
            // the deepest dip in one coordinate that stays feasible
            let scale: f64 = 0.5 + 0.45 * rng.random::<f64>();
            let target: Vec<f64> = limit.iter().map(|v| v * scale).collect();
            let mid1: Vec<f64> = target.iter().map(|v| v * 0.7).collect();
            let coord = rng.random_range(0..2);
            let mut dip = mid1.clone();
            for depth in [0.3f64, 0.5, 0.7, 0.85, 0.95, 1.0] {
                let mut cand = mid1.clone();
                cand[coord] *= depth;
                if cfg.is_feasible(&cand) {
                    dip = cand;
                    break;
                }
            }
            let curve = FeasibleCurve::from_vertices(vec![
                vec![0.0, 0.0],
                mid1.clone(),
                dip,
                mid1,
                target.clone(),
            ])
            .unwrap();
            let out = straighten_curve(&cfg, &curve).unwrap();
            assert!(out.is_monotone());
            assert_eq!(out.start(), &[0.0, 0.0]);
            let end = out.end();
            assert!((end[0] - target[0]).abs() < 1e-12);
            assert!((end[1] - target[1]).abs() < 1e-12);
            for v in out.sample(4) {
                assert!(cfg.is_feasible(&v), "straightened point {v:?} infeasible");
            }
        }
    }

    #[test]
    fn straighten_rejects_infeasible_input() {
        let cfg = cfg_lc2();
        let curve =
            FeasibleCurve::from_vertices(vec![vec![0.0, 0.0], vec![0.99, 0.99]]).unwrap();
        assert!(matches!(
            straighten_curve(&cfg, &curve),
            Err(Error::InvalidArgument(_))
        ));
    }
}
