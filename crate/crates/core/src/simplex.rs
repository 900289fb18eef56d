//! Dense two-phase primal simplex over nonnegative variables. Sized for the
//! degree-design subproblems (a few hundred rows, dozens of variables);
//! Bland's rule kicks in after a run of degenerate pivots.

use crate::real::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<R> {
    pub coeffs: Vec<R>,
    pub relation: Relation,
    pub rhs: R,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<R> {
    pub nvars: usize,
    /// Maximized objective coefficients, one per variable.
    pub objective: Vec<R>,
    pub constraints: Vec<Constraint<R>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<R> {
    Optimal { x: Vec<R>, value: R },
    Infeasible,
    Unbounded,
}

struct Tableau<R> {
    rows: Vec<Vec<R>>, // m x (ncols + 1), last column is the RHS
    obj: Vec<R>,       // ncols + 1
    basis: Vec<usize>,
    ncols: usize,
    banned: Vec<bool>,
}

impl<R: Real> Tableau<R> {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = R::one() / self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v = *v * inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, rr) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = rr[col];
            if f != R::zero() {
                for (v, &p) in rr.iter_mut().zip(&pivot_row) {
                    *v = *v - f * p;
                }
            }
        }
        let f = self.obj[col];
        if f != R::zero() {
            for (v, &p) in self.obj.iter_mut().zip(&pivot_row) {
                *v = *v - f * p;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations until optimality, unboundedness or the
    /// iteration cap. Returns false on unboundedness.
    fn optimize(&mut self, tol: R) -> Result<bool> {
        let max_iters = 50 * (self.rows.len() + self.ncols) + 2000;
        let mut stall = 0usize;
        let mut last_value = self.obj[self.ncols];
        for iter in 0..max_iters {
            let bland = stall > 40;
            // entering column
            let mut enter: Option<usize> = None;
            let mut best = -tol;
            for j in 0..self.ncols {
                if self.banned[j] {
                    continue;
                }
                let c = self.obj[j];
                if c < -tol {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if c < best {
                        best = c;
                        enter = Some(j);
                    }
                }
            }
            let Some(col) = enter else {
                return Ok(true);
            };
            // ratio test
            let mut leave: Option<usize> = None;
            let mut best_ratio = R::infinity();
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a <= tol {
                    continue;
                }
                let ratio = row[self.ncols] / a;
                let take = match leave {
                    None => true,
                    Some(l) => {
                        if bland {
                            // break ratio ties toward the smallest basis index
                            ratio < best_ratio - tol
                                || (ratio <= best_ratio + tol && self.basis[r] < self.basis[l])
                        } else {
                            ratio < best_ratio
                        }
                    }
                };
                if take {
                    best_ratio = best_ratio.min(ratio);
                    leave = Some(r);
                }
            }
            let Some(row) = leave else {
                return Ok(false);
            };
            self.pivot(row, col);
            let value = self.obj[self.ncols];
            if (value - last_value).abs() <= tol {
                stall += 1;
            } else {
                stall = 0;
                last_value = value;
            }
            let _ = iter;
        }
        Err(Error::Infeasible("simplex iteration cap reached".into()))
    }
}

pub fn solve<R: Real>(lp: &LinearProgram<R>) -> Result<LpOutcome<R>> {
    let n = lp.nvars;
    if lp.objective.len() != n {
        return Err(Error::InvalidArgument("objective length mismatch".into()));
    }
    let m = lp.constraints.len();
    let tol = R::of(1e-9).max(R::default_tol() * R::of(1e-3));

    // normalize rows to nonnegative RHS (flipping zero-RHS >= rows into <=
    // rows so they start with a basic slack instead of an artificial)
    let flip_of = |c: &Constraint<R>| c.rhs < R::zero() || (c.rhs == R::zero() && c.relation == Relation::Ge);
    let rel_of = |c: &Constraint<R>| {
        let flip = flip_of(c);
        match (c.relation, flip) {
            (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
            (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            (Relation::Eq, _) => Relation::Eq,
        }
    };
    let mut nslack = 0usize;
    let mut nart = 0usize;
    for c in &lp.constraints {
        if c.coeffs.len() != n {
            return Err(Error::InvalidArgument("constraint length mismatch".into()));
        }
        match rel_of(c) {
            Relation::Le => nslack += 1,
            Relation::Ge => {
                nslack += 1;
                nart += 1;
            }
            Relation::Eq => nart += 1,
        }
    }
    let ncols = n + nslack + nart;
    let mut rows: Vec<Vec<R>> = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    let mut slack_at = n;
    let mut art_at = n + nslack;
    let mut art_cols: Vec<usize> = Vec::new();
    for (i, c) in lp.constraints.iter().enumerate() {
        let flip = flip_of(c);
        let sign = if flip { -R::one() } else { R::one() };
        let mut row = vec![R::zero(); ncols + 1];
        for (j, &v) in c.coeffs.iter().enumerate() {
            row[j] = v * sign;
        }
        row[ncols] = c.rhs * sign;
        match rel_of(c) {
            Relation::Le => {
                row[slack_at] = R::one();
                basis[i] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                row[slack_at] = -R::one();
                slack_at += 1;
                row[art_at] = R::one();
                basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
            Relation::Eq => {
                row[art_at] = R::one();
                basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
        }
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        obj: vec![R::zero(); ncols + 1],
        basis,
        ncols,
        banned: vec![false; ncols],
    };

    // phase 1: minimize the artificial sum
    if !art_cols.is_empty() {
        for &a in &art_cols {
            t.obj[a] = R::one();
        }
        // price out the basic artificials
        for r in 0..m {
            if art_cols.contains(&t.basis[r]) {
                let row = t.rows[r].clone();
                for (v, &p) in t.obj.iter_mut().zip(&row) {
                    *v = *v - p;
                }
            }
        }
        if !t.optimize(tol)? {
            return Err(Error::Infeasible("phase 1 unbounded".into()));
        }
        let infeas = -t.obj[ncols];
        if infeas.abs() > R::of(1e-7).max(tol) {
            return Ok(LpOutcome::Infeasible);
        }
        // drive out basic artificials where possible, ban all of them
        for r in 0..m {
            if art_cols.contains(&t.basis[r]) {
                if let Some(col) = (0..n + nslack).find(|&j| t.rows[r][j].abs() > tol) {
                    t.pivot(r, col);
                }
            }
        }
        for &a in &art_cols {
            t.banned[a] = true;
        }
    }

    // phase 2: the real objective
    t.obj = vec![R::zero(); ncols + 1];
    for j in 0..n {
        t.obj[j] = -lp.objective[j];
    }
    for r in 0..m {
        let b = t.basis[r];
        let f = t.obj[b];
        if f != R::zero() {
            let row = t.rows[r].clone();
            for (v, &p) in t.obj.iter_mut().zip(&row) {
                *v = *v - f * p;
            }
        }
    }
    if !t.optimize(tol)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![R::zero(); n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rows[r][ncols].max(R::zero());
        }
    }
    let value = x
        .iter()
        .zip(&lp.objective)
        .fold(R::zero(), |acc, (&xi, &ci)| acc + xi * ci);
    Ok(LpOutcome::Optimal { x, value })
}
