//! Asymptotic decoder analysis: the per-user boundary function F_s, its
//! induced recovery map f_s, fixed-point iteration from the origin, first
//! intersections and point feasibility. Everything is generic over the
//! scalar type; `f64` is the shipped default.

use crate::lif::LifTable;
use crate::lt::DegreeDistribution;
use crate::real::Real;
use crate::{Error, Result};
use rand::Rng;

/// Degree polynomial with scalar-typed coefficients: coeffs[d-1] weights x^d.
#[derive(Debug, Clone)]
pub struct Poly<R> {
    coeffs: Vec<R>,
}

impl<R: Real> Poly<R> {
    pub fn from_distribution(dist: &DegreeDistribution) -> Self {
        Poly {
            coeffs: dist.probs().iter().map(|&p| R::of(p)).collect(),
        }
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Self {
        let max_d = pairs.iter().map(|&(d, _)| d).max().unwrap_or(1);
        let mut coeffs = vec![R::zero(); max_d];
        for &(d, p) in pairs {
            coeffs[d - 1] = coeffs[d - 1] + R::of(p);
        }
        Poly { coeffs }
    }

    /// sum_d coeffs[d] x^d
    pub fn eval(&self, x: R) -> R {
        let mut acc = R::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc * x
    }

    /// sum_d d coeffs[d] x^(d-1)
    pub fn deriv(&self, x: R) -> R {
        let mut acc = R::zero();
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * x + R::of((i + 1) as f64) * c;
        }
        acc
    }

    /// Probability of degree 1 (the value of the derivative at zero).
    pub fn first_coeff(&self) -> R {
        self.coeffs.first().copied().unwrap_or_else(R::zero)
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Nonzero coefficients as (degree, value) pairs.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > R::zero())
            .map(|(i, &c)| (i + 1, c.as_f64()))
            .collect()
    }
}

/// Numeric knobs for the boundary scan and fixed-point iteration.
#[derive(Debug, Clone)]
pub struct NumericParams<R> {
    /// Grid points for the first scan of F_s over [0, 1).
    pub grid: usize,
    /// Bisection stops when the bracket is narrower than this.
    pub bisect_tol: R,
    /// Slack on >= 0 comparisons.
    pub slack: R,
    /// Fixed-point iteration cap.
    pub max_iterations: usize,
    /// Fixed-point convergence threshold on the max coordinate change.
    pub converge_tol: R,
    /// Tolerance for on-surface verification of intersections.
    pub surface_tol: R,
}

impl<R: Real> Default for NumericParams<R> {
    fn default() -> Self {
        NumericParams {
            grid: 2048,
            bisect_tol: R::default_tol(),
            slack: R::feasibility_slack(),
            max_iterations: 10_000,
            converge_tol: R::default_tol(),
            surface_tol: R::of(1e-6).max(R::default_tol()),
        }
    }
}

/// Everything the analysis needs about one system: the degree polynomials,
/// the per-user rate parameters C_s and the g-weighted LIF table.
pub struct AnalysisConfig<R> {
    psi: Vec<Poly<R>>,
    c: Vec<R>,
    table: LifTable,
    pub params: NumericParams<R>,
}

impl<R: Real> AnalysisConfig<R> {
    pub fn new(psi: Vec<Poly<R>>, c: Vec<f64>, table: LifTable) -> Result<Self> {
        let l = table.users();
        if psi.len() != l || c.len() != l {
            return Err(Error::Config(format!(
                "expected {l} degree polynomials and C values, got {}/{}",
                psi.len(),
                c.len()
            )));
        }
        if c.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::Config("rate parameters C_s must be positive".into()));
        }
        Ok(AnalysisConfig {
            psi,
            c: c.iter().map(|&v| R::of(v)).collect(),
            table,
            params: NumericParams::default(),
        })
    }

    pub fn users(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self, s: usize) -> &Poly<R> {
        &self.psi[s]
    }

    pub fn table(&self) -> &LifTable {
        &self.table
    }

    fn knowledge_probs(&self, y: &[R]) -> Vec<R> {
        self.psi
            .iter()
            .zip(y)
            .map(|(p, &v)| p.eval(v.min(R::one()).max(R::zero())))
            .collect()
    }

    /// Denominator of the second F_s term: `sum_H g(H) Gamma_s(H, Psi(y))`.
    pub fn denominator(&self, s: usize, y: &[R]) -> R {
        let probs = self.knowledge_probs(y);
        self.table.aggregate_gamma(s, &probs)
    }

    /// The boundary function
    /// `F_s(x, y) = Psi_s'(x) + C_s / denom(y) * ln(1-x)`.
    /// A zero denominator means no batch ever informs user s: F_s is minus
    /// infinity right of zero, which drives f_s to zero.
    pub fn big_f(&self, s: usize, x: R, y: &[R]) -> R {
        let denom = self.denominator(s, y);
        self.big_f_with_denom(s, x, denom)
    }

    fn big_f_with_denom(&self, s: usize, x: R, denom: R) -> R {
        if x <= R::zero() {
            return self.psi[s].first_coeff();
        }
        if denom <= R::zero() {
            return R::neg_infinity();
        }
        let cap = R::one() - R::of(1e-12);
        let xc = x.min(cap);
        self.psi[s].deriv(xc) + self.c[s] / denom * (R::one() - xc).ln()
    }

    /// `f_s(y) = max { z : F_s(x, y) >= 0 for all x in [0, z] }`, located by
    /// a grid scan for the first sign change and bisection refinement.
    pub fn little_f(&self, s: usize, y: &[R]) -> R {
        let denom = self.denominator(s, y);
        let slack = self.params.slack;
        let cap = R::one() - R::of(1e-12);
        let n = self.params.grid;
        let mut lo = R::zero();
        let mut hi = None;
        for j in 1..=n {
            let x = (R::of(j as f64) / R::of(n as f64)) * cap;
            if self.big_f_with_denom(s, x, denom) < -slack {
                hi = Some(x);
                break;
            }
            lo = x;
        }
        let Some(mut hi) = hi else {
            return lo; // F_s never dips below the slack before the cap
        };
        for _ in 0..200 {
            if hi - lo <= self.params.bisect_tol {
                break;
            }
            let mid = (lo + hi) / R::of(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.big_f_with_denom(s, mid, denom) >= -slack {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// A point is feasible when every coordinate is at most its f_s value
    /// (within the configured slack).
    pub fn is_feasible(&self, point: &[R]) -> bool {
        (0..self.users()).all(|s| point[s] <= self.little_f(s, point) + self.params.slack)
    }
}

/// Iterates of the recovery fixed point and its limit.
#[derive(Debug, Clone)]
pub struct FixedPointTrace<R> {
    /// z[i] per iteration, starting with the origin.
    pub iterates: Vec<Vec<R>>,
    pub limit: Vec<R>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs `z_s[i] = f_s(z_r[i-1])` from the origin until the maximum
/// coordinate change drops below the convergence tolerance.
pub fn fixed_point<R: Real>(cfg: &AnalysisConfig<R>) -> Result<FixedPointTrace<R>> {
    let l = cfg.users();
    let mut z = vec![R::zero(); l];
    let mut iterates = vec![z.clone()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.params.max_iterations {
        iterations += 1;
        let mut next = vec![R::zero(); l];
        let mut delta = R::zero();
        for s in 0..l {
            let v = cfg.little_f(s, &z);
            if v < z[s] - R::of(1e-7) {
                return Err(Error::Corruption(format!(
                    "fixed-point iterate decreased for user {s}: {} -> {}",
                    z[s], v
                )));
            }
            let v = v.max(z[s]);
            delta = delta.max(v - z[s]);
            next[s] = v;
        }
        z = next;
        iterates.push(z.clone());
        if delta < cfg.params.converge_tol {
            converged = true;
            break;
        }
    }
    Ok(FixedPointTrace {
        limit: z,
        iterates,
        iterations,
        converged,
    })
}

/// The componentwise-minimal intersection of the surfaces z_s = f_s: the
/// fixed-point limit, checked to lie on every surface, and (diagnostically)
/// checked against intersections reached from random starting points.
pub fn first_intersection<R: Real, G: Rng + ?Sized>(
    cfg: &AnalysisConfig<R>,
    multistart: usize,
    rng: &mut G,
) -> Result<FixedPointTrace<R>> {
    let trace = fixed_point(cfg)?;
    let l = cfg.users();
    for s in 0..l {
        let f = cfg.little_f(s, &trace.limit);
        if (trace.limit[s] - f).abs() > cfg.params.surface_tol {
            return Err(Error::Corruption(format!(
                "limit is off the user-{s} surface by {}",
                (trace.limit[s] - f).abs()
            )));
        }
    }
    for _ in 0..multistart {
        let mut z: Vec<R> = (0..l).map(|_| R::of(rng.random::<f64>())).collect();
        let mut settled = false;
        for _ in 0..cfg.params.max_iterations.min(2000) {
            let next: Vec<R> = (0..l).map(|s| cfg.little_f(s, &z)).collect();
            let delta = next
                .iter()
                .zip(&z)
                .map(|(a, b)| (*a - *b).abs())
                .fold(R::zero(), R::max);
            z = next;
            if delta < cfg.params.converge_tol {
                settled = true;
                break;
            }
        }
        if !settled {
            continue;
        }
        // only compare against genuine intersections
        if (0..l).all(|s| (z[s] - cfg.little_f(s, &z)).abs() <= cfg.params.surface_tol) {
            for s in 0..l {
                if trace.limit[s] > z[s] + cfg.params.surface_tol {
                    return Err(Error::Corruption(format!(
                        "found an intersection below the origin limit in coordinate {s}"
                    )));
                }
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TransferMatrixDistribution;
    use crate::lif::LifKind;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn lc2_table(probs: [f64; 4]) -> (TransferMatrixDistribution, LifTable) {
        let g = TransferMatrixDistribution::from_catalog_probs(2, 2, &probs).unwrap();
        let t = LifTable::build(&g, LifKind::Full);
        (g, t)
    }

    fn poly(pairs: &[(usize, f64)]) -> Poly<f64> {
        Poly::from_pairs(pairs)
    }

    #[test]
    fn big_f_at_zero_is_first_coefficient() {
        let (_, table) = lc2_table([0.2, 0.2, 0.4, 0.0]);
        let cfg = AnalysisConfig::new(
            vec![poly(&[(1, 0.3), (2, 0.7)]), poly(&[(1, 0.3), (2, 0.7)])],
            vec![0.3, 0.3],
            table,
        )
        .unwrap();
        assert_eq!(cfg.big_f(0, 0.0, &[0.0, 0.0]), 0.3);
    }

    #[test]
    fn lc2_denominator_matches_closed_form() {
        // Sum_H g(H) Gamma_A = g1 + g3 * Psi_B(y) + g4
        let (_, table) = lc2_table([0.15, 0.2, 0.3, 0.25]);
        let psi_b = poly(&[(1, 0.4), (2, 0.6)]);
        let cfg = AnalysisConfig::new(
            vec![poly(&[(1, 1.0)]), psi_b.clone()],
            vec![0.3, 0.3],
            table,
        )
        .unwrap();
        for y in [0.0f64, 0.25, 0.7, 1.0] {
            let got = cfg.denominator(0, &[0.0, y]);
            let expect = 0.15 + 0.3 * psi_b.eval(y) + 0.25;
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_user_degenerate_closed_form() {
        // L=1, Psi = x: F = 1 + (C/c) ln(1-x) with c = 1, so
        // f = 1 - exp(-c/C)
        let g = TransferMatrixDistribution::from_catalog_probs(1, 2, &[1.0]).unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        for c_rate in [0.5f64, 0.8, 1.2] {
            let cfg =
                AnalysisConfig::new(vec![poly(&[(1, 1.0)])], vec![c_rate], table.clone()).unwrap();
            let f = cfg.little_f(0, &[0.0]);
            let expect = 1.0 - (-1.0 / c_rate).exp();
            assert!((f - expect).abs() < 1e-6, "C={c_rate}: {f} vs {expect}");
        }
    }

    #[test]
    fn little_f_monotone_in_y() {
        let (_, table) = lc2_table([0.2, 0.2, 0.4, 0.0]);
        let psi = poly(&[(1, 0.2), (2, 0.6), (5, 0.2)]);
        let cfg = AnalysisConfig::new(vec![psi.clone(), psi], vec![0.35, 0.35], table).unwrap();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let y1: f64 = rng.random();
            let y2: f64 = rng.random();
            let (lo, hi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
            let f_lo = cfg.little_f(0, &[0.0, lo]);
            let f_hi = cfg.little_f(0, &[0.0, hi]);
            assert!(f_lo <= f_hi + 1e-9, "f must be nondecreasing in y");
        }
    }

    #[test]
    fn decoupled_fixed_point_equals_independent_limits() {
        let (_, table) = lc2_table([0.4, 0.4, 0.0, 0.0]);
        let psi = poly(&[(1, 0.2), (2, 0.8)]);
        let cfg =
            AnalysisConfig::new(vec![psi.clone(), psi.clone()], vec![0.25, 0.25], table).unwrap();
        let trace = fixed_point(&cfg).unwrap();
        assert!(trace.converged);
        // independent single-user limit with denominator 0.4
        let g1 = TransferMatrixDistribution::from_catalog_probs(1, 2, &[0.4]).unwrap();
        let t1 = LifTable::build(&g1, LifKind::Full);
        let cfg1 = AnalysisConfig::new(vec![psi], vec![0.25], t1).unwrap();
        let solo = cfg1.little_f(0, &[0.0]);
        for s in 0..2 {
            assert!((trace.limit[s] - solo).abs() < 1e-7);
        }
    }

    #[test]
    fn degree_one_symmetric_matches_scalar_oracle() {
        // All degree-1, symmetric LC-2: f(y) = 1 - exp(-(a + ab*y)/C), so the
        // limit solves z = 1 - exp(-(a + ab z)/C); iterate the scalar map
        let (a, ab, c) = (0.3f64, 0.4, 0.45);
        let (_, table) = lc2_table([a, a, ab, 0.0]);
        let cfg = AnalysisConfig::new(
            vec![poly(&[(1, 1.0)]), poly(&[(1, 1.0)])],
            vec![c, c],
            table,
        )
        .unwrap();
        let trace = fixed_point(&cfg).unwrap();
        let mut z = 0.0f64;
        for _ in 0..10_000 {
            let next = 1.0 - (-(a + ab * z) / c).exp();
            if (next - z).abs() < 1e-13 {
                break;
            }
            z = next;
        }
        for s in 0..2 {
            assert!((trace.limit[s] - z).abs() < 1e-6, "{} vs {z}", trace.limit[s]);
        }
    }

    #[test]
    fn iterates_are_monotone() {
        let (_, table) = lc2_table([0.2, 0.2, 0.4, 0.0]);
        let psi = poly(&[(1, 0.11), (2, 0.79), (14, 0.1)]);
        let cfg = AnalysisConfig::new(vec![psi.clone(), psi], vec![0.38, 0.38], table).unwrap();
        let trace = fixed_point(&cfg).unwrap();
        for w in trace.iterates.windows(2) {
            for s in 0..2 {
                assert!(w[0][s] <= w[1][s] + 1e-12);
            }
        }
        // limit satisfies the fixed-point equation
        for s in 0..2 {
            assert!((trace.limit[s] - cfg.little_f(s, &trace.limit)).abs() < 1e-6);
        }
    }

    #[test]
    fn origin_always_feasible() {
        let (_, table) = lc2_table([0.25, 0.25, 0.25, 0.0]);
        let psi = poly(&[(2, 1.0)]);
        let cfg = AnalysisConfig::new(vec![psi.clone(), psi], vec![0.4, 0.4], table).unwrap();
        assert!(cfg.is_feasible(&[0.0, 0.0]));
    }

    #[test]
    fn trace_points_are_feasible() {
        let (_, table) = lc2_table([0.2, 0.2, 0.4, 0.0]);
        let psi = poly(&[(1, 0.2), (2, 0.7), (9, 0.1)]);
        let cfg = AnalysisConfig::new(vec![psi.clone(), psi], vec![0.4, 0.4], table).unwrap();
        let trace = fixed_point(&cfg).unwrap();
        for z in trace.iterates.iter().step_by(5) {
            assert!(cfg.is_feasible(z));
        }
    }

    #[test]
    fn restart_equivalence() {
        let (_, table) = lc2_table([0.2, 0.25, 0.35, 0.1]);
        let psi = poly(&[(1, 0.15), (2, 0.65), (7, 0.2)]);
        let cfg = AnalysisConfig::new(vec![psi.clone(), psi], vec![0.42, 0.42], table).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let trace = first_intersection(&cfg, 6, &mut rng).unwrap();
        assert!(trace.converged);
        // iterating from a componentwise-smaller feasible start converges to
        // the same point
        let start: Vec<f64> = trace.limit.iter().map(|v| v * 0.5).collect();
        let mut z = start;
        for _ in 0..cfg.params.max_iterations {
            let next: Vec<f64> = (0..2).map(|s| cfg.little_f(s, &z)).collect();
            let delta = next
                .iter()
                .zip(&z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            z = next;
            if delta < 1e-10 {
                break;
            }
        }
        for s in 0..2 {
            assert!((z[s] - trace.limit[s]).abs() < 1e-6);
        }
    }

    #[test]
    fn f32_pipeline_runs() {
        let (_, table) = lc2_table([0.2, 0.2, 0.4, 0.0]);
        let psi32: Poly<f32> = Poly::from_pairs(&[(1, 0.2), (2, 0.8)]);
        let cfg = AnalysisConfig::<f32>::new(vec![psi32.clone(), psi32], vec![0.35, 0.35], table)
            .unwrap();
        let trace = fixed_point(&cfg).unwrap();
        assert!(trace.converged);
        assert!(trace.limit[0] > 0.0 && trace.limit[0] < 1.0);
    }
}
