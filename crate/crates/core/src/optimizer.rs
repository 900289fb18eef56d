//! Degree-distribution design for the binary two- and three-user systems:
//! single-rate and sum-rate maximization over zig-zag staircases.
//!
//! With breakpoints fixed and the coupling multipliers frozen at the current
//! iterate, every staircase constraint is linear in one user's degree
//! coefficients and its rate parameter theta, so each pass solves small
//! per-user linear programs. An annealed reward on the degree polynomial's
//! value at the breakpoints steers early passes toward shapes that feed the
//! other users' multipliers; every proposal is then verified densely and the
//! thetas shrunk to the certified level before it can become the incumbent.

use crate::analysis::{AnalysisConfig, Poly};
use crate::channel::{ProfileAlphas, SystemProfile, TransferMatrixDistribution};
use crate::curve::zigzag_curve;
use crate::lif::{LifKind, LifTable};
use crate::lt::DegreeDistribution;
use crate::simplex::{solve as lp_solve, Constraint, LinearProgram, LpOutcome, Relation};
use crate::{Error, Result};
use rand::Rng;

/// Which decoder the design targets: the batched second stage (full
/// elimination) or the ordinary substitution-only one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderTarget {
    Batched,
    Ordinary,
}

impl DecoderTarget {
    fn lif_kind(self) -> LifKind {
        match self {
            DecoderTarget::Batched => LifKind::Full,
            DecoderTarget::Ordinary => LifKind::Ordinary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximize one user's normalized rate with the other users' rates
    /// pinned (beta-normalized C values, one per non-target user).
    MaxRate { target: usize, fixed: Vec<(usize, f64)> },
    /// Maximize the normalized sum rate.
    MaxSumRate,
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub profile: SystemProfile,
    pub target: DecoderTarget,
    pub objective: Objective,
    /// Recovery targets eta_s in (0, 1).
    pub eta: Vec<f64>,
    /// Staircase steps.
    pub t_max: usize,
    /// Interpolation points per staircase segment.
    pub m_points: usize,
    /// Per-user degree caps; zero means the ceil(1/(1-eta)) - 1 threshold
    /// beyond which extra degrees cannot help.
    pub degree_cap: Vec<usize>,
}

impl OptimizationProblem {
    pub fn users(&self) -> usize {
        self.profile.users
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.users();
        if !matches!(
            self.profile.alphas,
            ProfileAlphas::TwoUser { .. } | ProfileAlphas::ThreeUser { .. }
        ) {
            return Err(Error::Config(
                "degree design needs a binary two- or three-user profile".into(),
            ));
        }
        if self.eta.len() != l {
            return Err(Error::Config("eta list must have one entry per user".into()));
        }
        if self.eta.iter().any(|&e| !(0.0..1.0).contains(&e) || e <= 0.0) {
            return Err(Error::Config("eta must lie in (0, 1)".into()));
        }
        if self.t_max < 1 || self.m_points < 2 {
            return Err(Error::Config("need t_max >= 1 and M >= 2".into()));
        }
        if let Objective::MaxRate { target, fixed } = &self.objective {
            if *target >= l {
                return Err(Error::Config("target user out of range".into()));
            }
            for s in 0..l {
                if s != *target && !fixed.iter().any(|&(u, _)| u == s) {
                    return Err(Error::Config(format!(
                        "missing fixed rate for non-target user {s}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Effective degree cap for user s (the folding threshold by default).
    pub fn cap(&self, s: usize) -> usize {
        let explicit = self.degree_cap.get(s).copied().unwrap_or(0);
        if explicit > 0 {
            explicit
        } else {
            degree_threshold(self.eta[s])
        }
    }
}

/// `ceil(1/(1-eta)) - 1`: degrees above this cannot improve the staircase
/// objectives. The small backoff keeps 1/(1-eta) stable at representable
/// eta values.
pub fn degree_threshold(eta: f64) -> usize {
    (((1.0 / (1.0 - eta)) - 1e-9).ceil() as usize)
        .saturating_sub(1)
        .max(1)
}

/// Folds all probability mass above the threshold for `eta` into the
/// threshold degree.
pub fn degree_cap_transform(dist: &DegreeDistribution, eta: f64) -> DegreeDistribution {
    let cap = degree_threshold(eta);
    if dist.max_degree() <= cap {
        return dist.clone();
    }
    let mut probs = dist.probs()[..cap].to_vec();
    let tail: f64 = dist.probs()[cap - 1..].iter().sum();
    probs[cap - 1] = tail;
    DegreeDistribution::new_rounded(probs).expect("mass is preserved")
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Verification {
    VerifiedFeasible,
    /// Dense verification initially failed; thetas were shrunk by the given
    /// multiplicative factor (per user) to restore feasibility.
    Repaired { shrink: Vec<f64> },
    Infeasible,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OptimizationResult {
    /// Beta-normalized rate parameters theta_s = C_s / beta.
    pub theta: Vec<f64>,
    /// Degree distributions as (degree, probability) pairs.
    pub psi: Vec<Vec<(usize, f64)>>,
    /// Per-user staircase breakpoints (t_max + 1 entries each).
    pub breakpoints: Vec<Vec<f64>>,
    /// The achieved objective: eta-weighted rate (single) or sum of
    /// eta_s * theta_s.
    pub objective: f64,
    pub verification: Verification,
    pub restarts_run: usize,
}

impl OptimizationResult {
    pub fn distributions(&self) -> Result<Vec<DegreeDistribution>> {
        self.psi
            .iter()
            .map(|pairs| DegreeDistribution::from_pairs_rounded(pairs))
            .collect()
    }
}

/// One linear constraint of the relaxed staircase system, kept with its
/// provenance for diagnostics.
#[derive(Debug, Clone)]
pub struct RelaxedConstraint {
    pub user: usize,
    pub segment: usize,
    pub x: f64,
    /// Coefficients on (psi_user[1..=cap], theta_user); the constraint is
    /// `coeffs . vars + constant >= 0`.
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

/// The unit-beta canonical transfer distribution realizing a profile: all
/// singleton mass on the one-column matrices, pair mass on the printed pair
/// columns, and the non-autonomous mass on the three two-column cases.
pub fn canonical_distribution(profile: &SystemProfile) -> Result<TransferMatrixDistribution> {
    match &profile.alphas {
        ProfileAlphas::TwoUser { a, b, ab } => {
            TransferMatrixDistribution::from_catalog_probs(2, 2, &[*a, *b, *ab, 0.0])
        }
        ProfileAlphas::ThreeUser {
            single,
            pair,
            triple,
            bar,
        } => {
            let mut probs = [0.0f64; 17];
            probs[0] = single[0];
            probs[1] = single[1];
            probs[2] = single[2];
            probs[7] = pair[0]; // A+B column
            probs[8] = pair[1]; // A+C
            probs[9] = pair[2]; // B+C
            probs[10] = *triple;
            probs[15] = bar[0]; // the two-column case sharing user A
            probs[16] = bar[1]; // sharing user B
            probs[14] = bar[2]; // sharing user C
            TransferMatrixDistribution::from_catalog_probs(3, 2, &probs)
        }
        ProfileAlphas::General => Err(Error::Config(
            "canonical distributions exist for the binary L in {2,3} profiles".into(),
        )),
    }
}

/// The coupling multiplier for user `s` at staircase step `t`: users before
/// s are evaluated at their step-t breakpoint, users after s at step t-1.
fn multiplier(
    table: &LifTable,
    psis: &[Poly<f64>],
    breakpoints: &[Vec<f64>],
    s: usize,
    t: usize,
) -> f64 {
    let l = psis.len();
    let probs: Vec<f64> = (0..l)
        .map(|r| {
            if r == s {
                0.0
            } else {
                let tt = if r < s { t } else { t - 1 };
                psis[r].eval(breakpoints[r][tt])
            }
        })
        .collect();
    table.aggregate_gamma(s, &probs)
}

/// Emits the M-point relaxation of user `s`'s staircase constraints, linear
/// in (psi_s, theta_s) once the other users' polynomials and breakpoints are
/// fixed. Set `theta_fixed` to pin theta and move its term to the constant.
pub fn relaxed_constraints(
    problem: &OptimizationProblem,
    table: &LifTable,
    psis: &[Poly<f64>],
    breakpoints: &[Vec<f64>],
    s: usize,
    theta_fixed: Option<f64>,
) -> Vec<RelaxedConstraint> {
    let cap = problem.cap(s);
    let m = problem.m_points;
    let mut out = Vec::new();
    for t in 1..=problem.t_max {
        let mult = multiplier(table, psis, breakpoints, s, t);
        let lo = breakpoints[s][t - 1];
        let hi = breakpoints[s][t];
        for j in 1..=m {
            let x = lo + (hi - lo) * j as f64 / m as f64;
            if x <= 1e-12 || (x - lo).abs() < 1e-15 {
                continue;
            }
            let ln_term = (1.0 - x).ln();
            let mut coeffs = Vec::with_capacity(cap + 1);
            for d in 1..=cap {
                coeffs.push(mult * d as f64 * x.powi(d as i32 - 1));
            }
            let constant = match theta_fixed {
                Some(th) => {
                    coeffs.push(0.0);
                    th * ln_term
                }
                None => {
                    coeffs.push(ln_term);
                    0.0
                }
            };
            out.push(RelaxedConstraint {
                user: s,
                segment: t,
                x,
                coeffs,
                constant,
            });
        }
    }
    out
}

/// The exact best theta for user `s` given everyone's shapes and the
/// breakpoints: the minimum over a dense grid of
/// `mult_s(t) Psi_s'(x) / (-ln(1-x))`.
fn certified_theta(
    problem: &OptimizationProblem,
    table: &LifTable,
    psis: &[Poly<f64>],
    breakpoints: &[Vec<f64>],
    s: usize,
    dense: usize,
) -> f64 {
    let mut best = f64::INFINITY;
    for t in 1..=problem.t_max {
        let mult = multiplier(table, psis, breakpoints, s, t);
        let lo = breakpoints[s][t - 1];
        let hi = breakpoints[s][t];
        if hi - lo < 1e-15 {
            continue;
        }
        for j in 1..=dense {
            let x = lo + (hi - lo) * j as f64 / dense as f64;
            if x <= 1e-12 {
                continue;
            }
            let v = mult * psis[s].deriv(x) / -(1.0 - x).ln();
            best = best.min(v);
        }
    }
    if best.is_finite() {
        best.max(0.0)
    } else {
        0.0
    }
}

/// Dense re-check of every staircase constraint at the given thetas.
/// On violation the optimized thetas are shrunk multiplicatively (factor
/// 0.999 per step, per-user) until the constraints hold; shrinking below
/// half the original value declares the candidate infeasible.
pub fn verify(
    problem: &OptimizationProblem,
    table: &LifTable,
    psis: &[Poly<f64>],
    breakpoints: &[Vec<f64>],
    theta: &mut [f64],
    dense: usize,
) -> Verification {
    let l = problem.users();
    let optimized: Vec<bool> = match &problem.objective {
        Objective::MaxSumRate => vec![true; l],
        Objective::MaxRate { target, .. } => (0..l).map(|s| s == *target).collect(),
    };
    let mut shrink = vec![1.0f64; l];
    let mut repaired = false;
    for s in 0..l {
        let max_theta = certified_theta(problem, table, psis, breakpoints, s, dense);
        if theta[s] <= max_theta + 1e-12 {
            continue;
        }
        if !optimized[s] {
            return Verification::Infeasible; // a pinned rate fails densely
        }
        repaired = true;
        let mut steps = ((theta[s] / max_theta.max(1e-300)).ln() / -(0.999f64).ln()).ceil();
        if !steps.is_finite() {
            steps = f64::INFINITY;
        }
        let factor = 0.999f64.powf(steps.min(1e6));
        if theta[s] * factor < 0.5 * theta[s] || !(theta[s] * factor <= max_theta + 1e-12) {
            return Verification::Infeasible;
        }
        theta[s] *= factor;
        shrink[s] = factor;
    }
    if repaired {
        Verification::Repaired { shrink }
    } else {
        Verification::VerifiedFeasible
    }
}

fn objective_value(problem: &OptimizationProblem, theta: &[f64]) -> f64 {
    match &problem.objective {
        Objective::MaxSumRate => theta
            .iter()
            .zip(&problem.eta)
            .map(|(&t, &e)| t * e)
            .sum(),
        Objective::MaxRate { target, .. } => problem.eta[*target] * theta[*target],
    }
}

/// One annealed cycle of per-user LP passes: the progress weight decays by
/// step, pinned-rate users keep a floor. Every intermediate proposal is
/// certified and may become the global incumbent.
#[allow(clippy::too_many_arguments)]
fn anneal_cycle(
    problem: &OptimizationProblem,
    table: &LifTable,
    fixed_theta: &[Option<f64>],
    psis: &mut [Poly<f64>],
    breakpoints: &[Vec<f64>],
    steps: usize,
    w0: f64,
    evaluate: &impl Fn(&[Poly<f64>], &[Vec<f64>]) -> Option<(f64, Vec<f64>)>,
    best: &mut Option<(f64, Vec<Poly<f64>>, Vec<f64>, Vec<Vec<f64>>, Verification)>,
) {
    let l = psis.len();
    for k in 0..steps {
        let w = w0 * 0.55f64.powi(k as i32);
        for s in 0..l {
            let w_s = if fixed_theta[s].is_some() { w.max(0.05) } else { w };
            if let Some((poly, _)) =
                lp_pass(problem, table, psis, breakpoints, s, fixed_theta[s], w_s)
            {
                psis[s] = poly;
            }
        }
        if let Some((value, cert)) = evaluate(psis, breakpoints) {
            if best.as_ref().is_none_or(|(b, ..)| value > *b) {
                *best = Some((
                    value,
                    psis.to_vec(),
                    cert,
                    breakpoints.to_vec(),
                    Verification::VerifiedFeasible,
                ));
            }
        }
    }
}

fn jitter_grid<R: Rng + ?Sized>(g: &mut [f64], eta: f64, rng: &mut R) {
    let last = g.len() - 1;
    for t in 1..last {
        let f = 0.6 + 0.8 * rng.random::<f64>();
        g[t] = (g[t] * f).min(eta);
    }
    g[0] = 0.0;
    g[last] = eta;
    for t in 1..last {
        g[t] = g[t].max(g[t - 1]);
    }
}

fn power_grid(eta: f64, t_max: usize, kappa: f64) -> Vec<f64> {
    (0..=t_max)
        .map(|t| eta * (t as f64 / t_max as f64).powf(kappa))
        .collect()
}

fn geometric_grid(eta: f64, t_max: usize, ratio: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=t_max)
        .map(|t| {
            if t == 0 {
                0.0
            } else {
                eta * ratio.powi((t_max - t) as i32)
            }
        })
        .collect();
    g[t_max] = eta;
    g
}

/// One LP pass for user `s`: maximize theta_s (when optimized) plus the
/// annealed breakpoint-progress reward, under the frozen multipliers.
fn lp_pass(
    problem: &OptimizationProblem,
    table: &LifTable,
    psis: &[Poly<f64>],
    breakpoints: &[Vec<f64>],
    s: usize,
    theta_fixed: Option<f64>,
    progress_weight: f64,
) -> Option<(Poly<f64>, f64)> {
    let cap = problem.cap(s);
    let nvars = cap + 1; // psi coefficients then theta
    let rows = relaxed_constraints(problem, table, psis, breakpoints, s, theta_fixed);
    let mut constraints: Vec<Constraint<f64>> = rows
        .iter()
        .map(|r| Constraint {
            coeffs: r.coeffs.clone(),
            relation: Relation::Ge,
            rhs: -r.constant,
        })
        .collect();
    let mut simplex_row = vec![1.0f64; cap];
    simplex_row.push(0.0);
    constraints.push(Constraint {
        coeffs: simplex_row,
        relation: Relation::Eq,
        rhs: 1.0,
    });
    let mut objective = vec![0.0f64; nvars];
    if theta_fixed.is_none() {
        objective[cap] = 1.0;
    }
    for t in 1..=problem.t_max {
        let w = progress_weight * (problem.t_max - t + 1) as f64 / problem.t_max as f64;
        let x = breakpoints[s][t];
        if x <= 0.0 {
            continue;
        }
        for d in 1..=cap {
            objective[d - 1] += w * x.powi(d as i32);
        }
    }
    // a purely zero objective still needs a well-posed LP
    if objective.iter().all(|&v| v == 0.0) {
        objective[0] = 1e-9;
    }
    let lp = LinearProgram {
        nvars,
        objective,
        constraints,
    };
    match lp_solve(&lp) {
        Ok(LpOutcome::Optimal { x, .. }) => {
            let pairs: Vec<(usize, f64)> = (1..=cap)
                .filter(|&d| x[d - 1] > 1e-12)
                .map(|d| (d, x[d - 1]))
                .collect();
            if pairs.is_empty() {
                return None;
            }
            let theta = match theta_fixed {
                Some(t) => t,
                None => x[cap],
            };
            Some((Poly::from_pairs(&pairs), theta))
        }
        _ => None,
    }
}

/// Truncates the fixed-point trajectory of the current design into fresh
/// breakpoint ladders (arc-length resampled, clipped to eta).
fn respace_from_trajectory(
    problem: &OptimizationProblem,
    table: &LifTable,
    psis: &[Poly<f64>],
    theta: &[f64],
) -> Option<Vec<Vec<f64>>> {
    let l = problem.users();
    let c: Vec<f64> = theta.iter().map(|&t| t.max(1e-9)).collect();
    let cfg = AnalysisConfig::<f64>::new(psis.to_vec(), c, table.clone()).ok()?;
    let trace = crate::analysis::fixed_point(&cfg).ok()?;
    let pts: Vec<Vec<f64>> = trace
        .iterates
        .iter()
        .map(|z| {
            z.iter()
                .zip(&problem.eta)
                .map(|(&v, &e)| v.min(e))
                .collect()
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let mut arc = vec![0.0f64];
    for w in pts.windows(2) {
        let step: f64 = w[0]
            .iter()
            .zip(&w[1])
            .map(|(a, b)| (b - a).abs())
            .sum();
        arc.push(arc.last().unwrap() + step);
    }
    let total = *arc.last().unwrap();
    if total <= 1e-9 {
        return None;
    }
    let t_max = problem.t_max;
    let mut out = vec![vec![0.0f64; t_max + 1]; l];
    let mut j = 0usize;
    for t in 0..=t_max {
        let target = total * t as f64 / t_max as f64;
        while j + 1 < pts.len() && arc[j + 1] < target {
            j += 1;
        }
        for s in 0..l {
            let v = if j + 1 < pts.len() && arc[j + 1] > arc[j] {
                let w = (target - arc[j]) / (arc[j + 1] - arc[j]);
                pts[j][s] + w * (pts[j + 1][s] - pts[j][s])
            } else {
                pts[pts.len() - 1][s]
            };
            out[s][t] = v;
        }
    }
    for (s, ladder) in out.iter_mut().enumerate() {
        ladder[0] = 0.0;
        ladder[t_max] = problem.eta[s];
        for t in 1..=t_max {
            ladder[t] = ladder[t].max(ladder[t - 1]).min(problem.eta[s]);
        }
    }
    Some(out)
}

/// Multistart staircase search. Per restart: pick a breakpoint family,
/// initialize the degree polynomials, run annealed LP passes cycling the
/// users (refreshing the frozen multipliers after each pass), certify every
/// proposal densely, and occasionally re-space the breakpoints along the
/// current design's decoding trajectory. The best certified configuration
/// across restarts wins.
pub fn solve<R: Rng + ?Sized>(
    problem: &OptimizationProblem,
    rng: &mut R,
    restarts: usize,
) -> Result<OptimizationResult> {
    problem.validate()?;
    let l = problem.users();
    let g = canonical_distribution(&problem.profile)?;
    let table = LifTable::build(&g, problem.target.lif_kind());
    let fixed_theta: Vec<Option<f64>> = match &problem.objective {
        Objective::MaxSumRate => vec![None; l],
        Objective::MaxRate { target, fixed } => (0..l)
            .map(|s| {
                if s == *target {
                    None
                } else {
                    fixed.iter().find(|&&(u, _)| u == s).map(|&(_, v)| v)
                }
            })
            .collect(),
    };

    let mut best: Option<(f64, Vec<Poly<f64>>, Vec<f64>, Vec<Vec<f64>>, Verification)> = None;
    let dense = 400usize;

    // certified objective for the current shapes and ladders, or None when a
    // pinned rate fails its dense check
    let evaluate = |psis: &[Poly<f64>], bps: &[Vec<f64>]| -> Option<(f64, Vec<f64>)> {
        let mut cert = vec![0.0f64; l];
        for s in 0..l {
            let c = certified_theta(problem, &table, psis, bps, s, dense);
            match fixed_theta[s] {
                Some(f) => {
                    if c < f - 1e-9 {
                        return None;
                    }
                    cert[s] = f;
                }
                None => cert[s] = c,
            }
        }
        Some((objective_value(problem, &cert), cert))
    };

    for restart in 0..restarts.max(1) {
        // breakpoint family for this restart, jittered after the first pass
        // over the base shapes
        let mut breakpoints: Vec<Vec<f64>> = (0..l)
            .map(|s| {
                // pinned-rate users climb early so the optimized users see
                // large multipliers sooner
                let front_loaded = fixed_theta[s].is_some() && restart % 2 == 1;
                let mut g = if front_loaded {
                    power_grid(problem.eta[s], problem.t_max, 0.2 + 0.2 * rng.random::<f64>())
                } else {
                    match restart % 4 {
                        0 => power_grid(problem.eta[s], problem.t_max, 1.0),
                        1 => power_grid(problem.eta[s], problem.t_max, 2.0),
                        2 => geometric_grid(problem.eta[s], problem.t_max, 0.65),
                        _ => {
                            let kappa = 1.0 + 2.5 * rng.random::<f64>();
                            power_grid(problem.eta[s], problem.t_max, kappa)
                        }
                    }
                };
                if restart >= 4 {
                    jitter_grid(&mut g, problem.eta[s], rng);
                }
                g
            })
            .collect();
        // random simplex-ish start concentrated on low degrees
        let mut psis: Vec<Poly<f64>> = (0..l)
            .map(|_| {
                let a = 0.1 + 0.4 * rng.random::<f64>();
                Poly::from_pairs(&[(1, a), (2, 1.0 - a)])
            })
            .collect();

        // annealed LP phases with trajectory re-spacing between them
        for phase in 0..3 {
            anneal_cycle(
                problem, &table, &fixed_theta, &mut psis, &breakpoints, 16, 0.5, &evaluate,
                &mut best,
            );
            if phase < 2 {
                let thetas_for_traj: Vec<f64> = (0..l)
                    .map(|s| match fixed_theta[s] {
                        Some(f) => f,
                        None => certified_theta(problem, &table, &psis, &breakpoints, s, dense)
                            .max(1e-6),
                    })
                    .collect();
                match respace_from_trajectory(problem, &table, &psis, &thetas_for_traj) {
                    Some(bp) => breakpoints = bp,
                    None => break,
                }
            }
        }

        // local breakpoint perturbation, accepted on certified improvement
        // (needs interior breakpoints to move)
        if problem.t_max < 2 {
            continue;
        }
        let mut current = evaluate(&psis, &breakpoints).map(|(v, _)| v).unwrap_or(0.0);
        for _ in 0..30 {
            let mut trial_bps = breakpoints.clone();
            for _ in 0..=rng.random_range(0..3) {
                let s = rng.random_range(0..l);
                let t = rng.random_range(1..problem.t_max);
                let lo = trial_bps[s][t - 1];
                let hi = trial_bps[s][t + 1];
                trial_bps[s][t] = lo + (hi - lo) * (0.1 + 0.8 * rng.random::<f64>());
            }
            let mut trial_psis = psis.clone();
            anneal_cycle(
                problem, &table, &fixed_theta, &mut trial_psis, &trial_bps, 4, 0.1, &evaluate,
                &mut best,
            );
            if let Some((v, _)) = evaluate(&trial_psis, &trial_bps) {
                if v > current {
                    current = v;
                    breakpoints = trial_bps;
                    psis = trial_psis;
                }
            }
        }
    }

    let Some((_, psis, theta, breakpoints, verification)) = best else {
        return Ok(OptimizationResult {
            theta: vec![0.0; l],
            psi: vec![Vec::new(); l],
            breakpoints: Vec::new(),
            objective: 0.0,
            verification: Verification::Infeasible,
            restarts_run: restarts,
        });
    };
    // final verification pass at high density
    let mut theta = theta;
    let verification = match verify(problem, &table, &psis, &breakpoints, &mut theta, 1000) {
        Verification::Infeasible => Verification::Infeasible,
        Verification::Repaired { shrink } => Verification::Repaired { shrink },
        Verification::VerifiedFeasible => verification,
    };
    let psi: Vec<Vec<(usize, f64)>> = psis.iter().map(|p| p.pairs()).collect();
    let objective = if matches!(verification, Verification::Infeasible) {
        0.0
    } else {
        objective_value(problem, &theta)
    };
    Ok(OptimizationResult {
        theta,
        psi,
        breakpoints,
        objective,
        verification,
        restarts_run: restarts,
    })
}

/// Certifies the result against the analysis module: every zig-zag vertex
/// of the returned breakpoints must be feasible at C_s = theta_s under the
/// unit-beta canonical distribution.
pub fn certify_with_analysis(
    problem: &OptimizationProblem,
    result: &OptimizationResult,
) -> Result<bool> {
    if matches!(result.verification, Verification::Infeasible) {
        return Ok(false);
    }
    let g = canonical_distribution(&problem.profile)?;
    let table = LifTable::build(&g, problem.target.lif_kind());
    let psis: Vec<Poly<f64>> = result
        .psi
        .iter()
        .map(|pairs| Poly::from_pairs(pairs))
        .collect();
    let c: Vec<f64> = result.theta.iter().map(|&t| t.max(1e-12)).collect();
    let cfg = AnalysisConfig::<f64>::new(psis, c, table)?;
    let bps: Vec<Vec<f64>> = result.breakpoints.clone();
    let (_, feas) = zigzag_curve(&cfg, &bps)?;
    Ok(feas.into_iter().all(|f| f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::derive_profile;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn lc2_profile(ab: f64, a: f64, b: f64) -> SystemProfile {
        SystemProfile {
            users: 2,
            beta: 1.0,
            alphas: ProfileAlphas::TwoUser { a, b, ab },
        }
    }

    #[test]
    fn degree_threshold_values() {
        assert_eq!(degree_threshold(0.98), 49);
        assert_eq!(degree_threshold(0.5), 1);
        assert_eq!(degree_threshold(0.9), 9);
    }

    #[test]
    fn cap_transform_folds_tail() {
        let d = DegreeDistribution::from_pairs(&[(1, 0.3), (2, 0.3), (3, 0.4)]).unwrap();
        let capped = degree_cap_transform(&d, 0.5); // cap = 1
        assert_eq!(capped.max_degree(), 1);
        assert!((capped.prob(1) - 1.0).abs() < 1e-12);
        // untouched when no mass above the cap
        let d2 = DegreeDistribution::from_pairs(&[(1, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(degree_cap_transform(&d2, 0.98), d2);
    }

    #[test]
    fn cap_transform_pointwise_dominance() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let mut pairs = Vec::new();
            let mut total = 0.0;
            for d in [1usize, 2, 7, 30, 60, 80] {
                let w: f64 = rng.random();
                pairs.push((d, w));
                total += w;
            }
            let pairs: Vec<(usize, f64)> =
                pairs.into_iter().map(|(d, w)| (d, w / total)).collect();
            let dist = DegreeDistribution::from_pairs(&pairs).unwrap();
            let eta = 0.98;
            let capped = degree_cap_transform(&dist, eta);
            for i in 0..=100 {
                let x = eta * i as f64 / 100.0;
                assert!(capped.eval(x) >= dist.eval(x) - 1e-12);
                assert!(capped.eval_deriv(x) >= dist.eval_deriv(x) - 1e-12);
            }
        }
    }

    #[test]
    fn canonical_distribution_roundtrips_profile() {
        let p = lc2_profile(0.5, 0.25, 0.25);
        let g = canonical_distribution(&p).unwrap();
        let derived = derive_profile(&g).unwrap();
        assert!((derived.beta - 1.0).abs() < 1e-12);
        assert_eq!(derived.alphas, p.alphas);

        let p3 = SystemProfile {
            users: 3,
            beta: 1.0,
            alphas: ProfileAlphas::ThreeUser {
                single: [0.1, 0.1, 0.1],
                pair: [0.0, 0.0, 0.0],
                triple: 0.1,
                bar: [0.1, 0.1, 0.1],
            },
        };
        let g3 = canonical_distribution(&p3).unwrap();
        let derived3 = derive_profile(&g3).unwrap();
        assert!((derived3.beta - 1.0).abs() < 1e-12);
        assert_eq!(derived3.alphas, p3.alphas);
    }

    #[test]
    fn relaxed_constraint_counts_and_limits() {
        let problem = OptimizationProblem {
            profile: lc2_profile(0.5, 0.25, 0.25),
            target: DecoderTarget::Batched,
            objective: Objective::MaxSumRate,
            eta: vec![0.5, 0.5],
            t_max: 1,
            m_points: 2,
            degree_cap: vec![0, 0],
        };
        let g = canonical_distribution(&problem.profile).unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        let psis = vec![Poly::from_pairs(&[(1, 1.0)]), Poly::from_pairs(&[(1, 1.0)])];
        let bps = vec![vec![0.0, 0.5], vec![0.0, 0.5]];
        let rows = relaxed_constraints(&problem, &table, &psis, &bps, 0, None);
        assert_eq!(rows.len(), 2, "M=2 points for the single segment");
        // at the right endpoint with the other user at zero, the constraint
        // reduces to alpha_A * Psi_A'(x) + theta ln(1-x) >= 0
        let end = rows.iter().find(|r| (r.x - 0.5).abs() < 1e-12).unwrap();
        assert!((end.coeffs[0] - 0.25).abs() < 1e-12, "degree-1 coefficient");
        let ln_half = (1.0f64 - 0.5).ln();
        assert!((end.coeffs[problem.cap(0)] - ln_half).abs() < 1e-12);
    }

    #[test]
    fn smoke_solve_trivial() {
        // t_max = 1, eta = 0.5, decoupled profile: completes quickly and
        // verifies
        let problem = OptimizationProblem {
            profile: lc2_profile(0.0, 0.5, 0.5),
            target: DecoderTarget::Batched,
            objective: Objective::MaxSumRate,
            eta: vec![0.5, 0.5],
            t_max: 1,
            m_points: 4,
            degree_cap: vec![0, 0],
        };
        let mut rng = StdRng::seed_from_u64(7);
        let r = solve(&problem, &mut rng, 2).unwrap();
        assert!(r.objective > 0.1, "objective {}", r.objective);
        assert!(!matches!(r.verification, Verification::Infeasible));
        assert!(certify_with_analysis(&problem, &r).unwrap());
    }

    #[test]
    fn verify_shrinks_inflated_theta() {
        let problem = OptimizationProblem {
            profile: lc2_profile(0.5, 0.25, 0.25),
            target: DecoderTarget::Batched,
            objective: Objective::MaxSumRate,
            eta: vec![0.9, 0.9],
            t_max: 4,
            m_points: 4,
            degree_cap: vec![0, 0],
        };
        let g = canonical_distribution(&problem.profile).unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        let psis = vec![
            Poly::from_pairs(&[(1, 0.2), (2, 0.8)]),
            Poly::from_pairs(&[(1, 0.2), (2, 0.8)]),
        ];
        let bps: Vec<Vec<f64>> = vec![power_grid(0.9, 4, 1.0), power_grid(0.9, 4, 1.0)];
        let honest = certified_theta(&problem, &table, &psis, &bps, 0, 800);
        let mut theta = vec![honest * 1.02, honest * 1.02];
        let v = verify(&problem, &table, &psis, &bps, &mut theta, 800);
        match v {
            Verification::Repaired { shrink } => {
                assert!(shrink[0] < 1.0);
                assert!(theta[0] <= honest + 1e-9);
            }
            other => panic!("expected repair, got {other:?}"),
        }
        // shrinking all the way to zero always verifies
        let mut zero = vec![0.0, 0.0];
        assert_eq!(
            verify(&problem, &table, &psis, &bps, &mut zero, 200),
            Verification::VerifiedFeasible
        );
    }
}
