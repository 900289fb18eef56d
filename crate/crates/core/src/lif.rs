//! Local information functions and their algebra.
//!
//! For a user s and transfer matrix H, a (partial) LIF maps H to the family
//! of user subsets S such that knowing {v_r : r in S} lets the second-stage
//! solver recover v_s. The families are upward closed, so they are stored as
//! the antichain of their minimal elements. Three LIFs are implemented:
//! the exact `gamma_star` (Gaussian elimination), the substitution-only
//! `gamma_o`, and the depth-bounded `gamma_b` characterizing i in-batch BP
//! iterations.

use crate::channel::{TransferMatrix, TransferMatrixDistribution};
use crate::real::Real;
use crate::{Error, Result};

/// An upward-closed family of subsets of the ground set, stored as the
/// antichain of its minimal elements. Sets are bitmasks over user indices;
/// the ground set excludes the owner `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneFamily {
    ground: u32,
    minimal: Vec<u32>,
}

impl MonotoneFamily {
    /// The empty family over the given ground set.
    pub fn empty(ground: u32) -> Self {
        MonotoneFamily {
            ground,
            minimal: Vec::new(),
        }
    }

    /// The full powerset (minimal antichain {empty set}).
    pub fn full(ground: u32) -> Self {
        MonotoneFamily {
            ground,
            minimal: vec![0],
        }
    }

    /// Builds the upward closure of the given generator sets.
    pub fn from_generators<I: IntoIterator<Item = u32>>(ground: u32, gens: I) -> Result<Self> {
        let mut fam = MonotoneFamily::empty(ground);
        for g in gens {
            if g & !ground != 0 {
                return Err(Error::InvalidArgument(
                    "generator set outside the ground set".into(),
                ));
            }
            fam.insert(g);
        }
        Ok(fam)
    }

    pub fn ground(&self) -> u32 {
        self.ground
    }

    /// Minimal elements, sorted.
    pub fn minimal_sets(&self) -> &[u32] {
        &self.minimal
    }

    pub fn is_empty(&self) -> bool {
        self.minimal.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.minimal == [0]
    }

    /// Membership: S is in the family iff it contains some minimal set.
    pub fn contains(&self, set: u32) -> bool {
        self.minimal.iter().any(|&m| m & !set == 0)
    }

    /// Inserts a set, keeping the antichain minimal.
    pub fn insert(&mut self, set: u32) {
        debug_assert_eq!(set & !self.ground, 0);
        if self.contains(set) {
            return;
        }
        self.minimal.retain(|&m| set & !m != 0); // drop supersets of `set`
        self.minimal.push(set);
        self.minimal.sort_unstable();
    }

    pub fn union_with(&mut self, other: &MonotoneFamily) {
        debug_assert_eq!(self.ground, other.ground);
        for &m in &other.minimal {
            self.insert(m);
        }
    }

    /// Is this family a subset of `other` (pointwise on all member sets)?
    pub fn subset_of(&self, other: &MonotoneFamily) -> bool {
        self.minimal.iter().all(|&m| other.contains(m))
    }

    /// The probability that a random knowledge pattern lies in the family:
    /// each user r is independently known with probability `probs[r]`
    /// (entries outside the ground set are ignored). Direct enumeration over
    /// the subsets of the ground set.
    pub fn gamma<R: Real>(&self, probs: &[R]) -> R {
        if self.minimal.is_empty() {
            return R::zero();
        }
        if self.is_full() {
            return R::one();
        }
        let members: Vec<usize> = (0..32).filter(|&i| self.ground & (1 << i) != 0).collect();
        let n = members.len();
        let mut total = R::zero();
        for pattern in 0u32..(1 << n) {
            let mut set = 0u32;
            let mut weight = R::one();
            for (bit, &user) in members.iter().enumerate() {
                let p = probs[user];
                if pattern & (1 << bit) != 0 {
                    set |= 1 << user;
                    weight = weight * p;
                } else {
                    weight = weight * (R::one() - p);
                }
            }
            if self.contains(set) {
                total = total + weight;
            }
        }
        total
    }
}

/// Ground-set mask for user `s` in an `l`-user system.
pub fn ground_mask(l: usize, s: usize) -> u32 {
    (((1u64 << l) - 1) as u32) & !(1 << s)
}

/// Exact LIF: S is in `gamma_star(H, s)` iff v_s is uniquely solvable from
/// the batch outputs once {v_r : r in S} are known. Computed by elimination
/// over the unknown-row submatrix for every S.
pub fn gamma_star(h: &TransferMatrix, s: usize) -> MonotoneFamily {
    let l = h.users();
    let ground = ground_mask(l, s);
    let mut fam = MonotoneFamily::empty(ground);
    // enumerate subsets of the ground set; skip sets already covered
    let members: Vec<usize> = (0..l).filter(|&u| u != s).collect();
    for pattern in 0u32..(1 << members.len()) {
        let mut set = 0u32;
        for (bit, &u) in members.iter().enumerate() {
            if pattern & (1 << bit) != 0 {
                set |= 1 << u;
            }
        }
        if fam.contains(set) {
            continue;
        }
        let unknown: Vec<usize> = (0..l).filter(|&u| set & (1 << u) == 0).collect();
        let sub = h.matrix().select_rows(&unknown);
        let target = unknown.iter().position(|&u| u == s).expect("s is unknown");
        if sub.solve_unit_combination(target).is_some() {
            fam.insert(set);
        }
    }
    fam
}

/// Substitution-only LIF: the span of the column supports containing s,
/// minus s itself. Characterizes one in-batch substitution pass.
pub fn gamma_o(h: &TransferMatrix, s: usize) -> MonotoneFamily {
    let ground = ground_mask(h.users(), s);
    let mut fam = MonotoneFamily::empty(ground);
    for col in 0..h.outputs() {
        let support = h.matrix().column_support(col);
        if support.contains(&s) {
            let mut mask = 0u32;
            for &u in &support {
                if u != s {
                    mask |= 1 << u;
                }
            }
            fam.insert(mask);
        }
    }
    fam
}

/// Depth-bounded BP LIFs for all users at once: `result[i-1][s]` is
/// `gamma_b(H, s, i)` for i = 1..=depth. Depth 1 is `gamma_o`.
pub fn gamma_b_all(h: &TransferMatrix, depth: usize) -> Vec<Vec<MonotoneFamily>> {
    let l = h.users();
    let base: Vec<MonotoneFamily> = (0..l).map(|s| gamma_o(h, s)).collect();
    let mut levels = vec![base.clone()];
    for _ in 1..depth {
        let prev = levels.last().unwrap();
        let mut next = prev.clone();
        for s in 0..l {
            // union over T in gamma_o(H, s) of the unions of T_r choices;
            // minimal T suffice, as do minimal valid T_r
            for &t_set in base[s].minimal_sets() {
                let users_in_t: Vec<usize> =
                    (0..l).filter(|&u| t_set & (1 << u) != 0).collect();
                if users_in_t.is_empty() {
                    continue; // empty T contributes the empty union, already a member
                }
                // minimal choices per r: minimal sets of gamma_b(H, r, i-1)
                // not containing s
                let choices: Vec<Vec<u32>> = users_in_t
                    .iter()
                    .map(|&r| {
                        prev[r]
                            .minimal_sets()
                            .iter()
                            .copied()
                            .filter(|&m| m & (1 << s) == 0)
                            .collect()
                    })
                    .collect();
                if choices.iter().any(|c| c.is_empty()) {
                    continue;
                }
                let mut stack = vec![(0usize, 0u32)];
                while let Some((idx, acc)) = stack.pop() {
                    if idx == choices.len() {
                        next[s].insert(acc);
                        continue;
                    }
                    for &m in &choices[idx] {
                        stack.push((idx + 1, acc | m));
                    }
                }
            }
        }
        levels.push(next);
    }
    levels
}

/// Which partial LIF a decoder instance consults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifKind {
    /// gamma_o: one substitution pass.
    Ordinary,
    /// gamma_b with the given in-batch iteration bound (1 coincides with
    /// `Ordinary`).
    Bp(usize),
    /// gamma_star: full per-batch Gaussian elimination.
    Full,
}

/// Per-(matrix, user) families for one transfer-matrix distribution.
#[derive(Debug, Clone)]
pub struct LifTable {
    users: usize,
    kind: LifKind,
    /// Aligned with the distribution support: weights[i] = g(H_i).
    weights: Vec<f64>,
    families: Vec<Vec<MonotoneFamily>>,
}

impl LifTable {
    pub fn build(g: &TransferMatrixDistribution, kind: LifKind) -> LifTable {
        let l = g.users();
        let mut weights = Vec::with_capacity(g.support().len());
        let mut families = Vec::with_capacity(g.support().len());
        for (h, p) in g.support() {
            weights.push(*p);
            families.push(families_for(h, kind));
        }
        LifTable {
            users: l,
            kind,
            weights,
            families,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn kind(&self) -> LifKind {
        self.kind
    }

    pub fn family(&self, matrix_index: usize, s: usize) -> &MonotoneFamily {
        &self.families[matrix_index][s]
    }

    /// `sum_H g(H) Gamma_s(H, probs)`: the expected per-batch probability
    /// that v_s becomes resolvable under the table's LIF.
    pub fn aggregate_gamma<R: Real>(&self, s: usize, probs: &[R]) -> R {
        let mut total = R::zero();
        for (w, fams) in self.weights.iter().zip(&self.families) {
            if *w == 0.0 {
                continue;
            }
            total = total + R::of(*w) * fams[s].gamma(probs);
        }
        total
    }

    /// Diagnostic listing of every (matrix, user) family.
    pub fn describe(&self, g: &TransferMatrixDistribution) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (i, (h, p)) in g.support().iter().enumerate() {
            let _ = writeln!(out, "H[{i}] p={p} rows={:?}", h.to_digit_rows());
            for s in 0..self.users {
                let sets: Vec<String> = self.families[i][s]
                    .minimal_sets()
                    .iter()
                    .map(|&m| {
                        let users: String = (0..self.users)
                            .filter(|&u| m & (1 << u) != 0)
                            .map(crate::channel::user_label)
                            .collect();
                        if users.is_empty() {
                            "{}".to_string()
                        } else {
                            format!("{{{users}}}")
                        }
                    })
                    .collect();
                let _ = writeln!(
                    out,
                    "  user {}: minimal {}",
                    crate::channel::user_label(s),
                    if sets.is_empty() {
                        "(empty family)".to_string()
                    } else {
                        sets.join(" ")
                    }
                );
            }
        }
        out
    }
}

/// Families of the chosen kind for a single transfer matrix, all users.
pub fn families_for(h: &TransferMatrix, kind: LifKind) -> Vec<MonotoneFamily> {
    let l = h.users();
    match kind {
        LifKind::Ordinary => (0..l).map(|s| gamma_o(h, s)).collect(),
        LifKind::Bp(depth) => {
            let levels = gamma_b_all(h, depth.max(1));
            levels.last().unwrap().clone()
        }
        LifKind::Full => (0..l).map(|s| gamma_star(h, s)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    fn spec2() -> FieldSpec {
        FieldSpec::new(2, 1).unwrap()
    }

    fn mask(users: &[usize]) -> u32 {
        users.iter().fold(0, |m, &u| m | (1 << u))
    }

    /// The worked four-user example: rows A,B,C,D; columns give
    /// u1 = vA + vD, u2 = vB + vD, u3 = vC.
    fn worked_example() -> TransferMatrix {
        TransferMatrix::from_digit_rows(spec2(), &["100", "010", "001", "110"]).unwrap()
    }

    #[test]
    fn monotone_family_ops() {
        let mut fam = MonotoneFamily::empty(0b1110);
        fam.insert(mask(&[1, 2]));
        fam.insert(mask(&[1, 2, 3])); // superset, absorbed
        assert_eq!(fam.minimal_sets(), &[mask(&[1, 2])]);
        fam.insert(mask(&[3]));
        assert!(fam.contains(mask(&[1, 2, 3])));
        assert!(fam.contains(mask(&[3])));
        assert!(!fam.contains(mask(&[1])));
        assert!(!fam.contains(0));
        fam.insert(0);
        assert!(fam.is_full());
        assert_eq!(fam.minimal_sets(), &[0]);
    }

    #[test]
    fn gamma_star_worked_example() {
        let h = worked_example();
        // gamma_A* has minimal antichain {{B},{D}}
        let ga = gamma_star(&h, 0);
        assert_eq!(ga.minimal_sets(), &[mask(&[1]), mask(&[3])]);
        // equivalently: the powerset of {B,C,D} minus {C} and the empty set
        assert!(!ga.contains(0));
        assert!(!ga.contains(mask(&[2])));
        assert!(ga.contains(mask(&[1])));
        assert!(ga.contains(mask(&[2, 3])));
        let gb = gamma_star(&h, 1);
        assert_eq!(gb.minimal_sets(), &[mask(&[0]), mask(&[3])]);
        let gc = gamma_star(&h, 2);
        assert!(gc.is_full());
        let gd = gamma_star(&h, 3);
        assert_eq!(gd.minimal_sets(), &[mask(&[0]), mask(&[1])]);
    }

    #[test]
    fn gamma_star_zero_row_is_empty() {
        let h = TransferMatrix::from_digit_rows(spec2(), &["1", "0"]).unwrap();
        assert!(gamma_star(&h, 1).is_empty());
    }

    #[test]
    fn gamma_o_worked_example() {
        let h = worked_example();
        assert_eq!(gamma_o(&h, 0).minimal_sets(), &[mask(&[3])]);
        assert_eq!(gamma_o(&h, 1).minimal_sets(), &[mask(&[3])]);
        assert!(gamma_o(&h, 2).is_full());
        assert_eq!(gamma_o(&h, 3).minimal_sets(), &[mask(&[0]), mask(&[1])]);
    }

    #[test]
    fn gamma_o_identity_column_gives_full_family() {
        let h = TransferMatrix::from_digit_rows(spec2(), &["1", "0"]).unwrap();
        assert!(gamma_o(&h, 0).is_full());
    }

    #[test]
    fn gamma_b_chains_through_h17() {
        // rows A,B,C: u1 = vA+vB, u2 = vB+vC
        let h17 = TransferMatrix::from_digit_rows(spec2(), &["10", "11", "01"]).unwrap();
        let levels = gamma_b_all(&h17, 3);
        let c = 2usize;
        assert!(!levels[0][c].contains(mask(&[0])), "depth 1 cannot chain");
        assert!(levels[1][c].contains(mask(&[0])), "depth 2 chains via vB");
        // and for the batched decoder this matches full elimination
        for s in 0..3 {
            assert_eq!(levels[1][s], gamma_star(&h17, s));
        }
    }

    #[test]
    fn bp_never_reaches_star_on_the_two_column_example() {
        // rows A,B,C,D with u1 = vA+vC+vD, u2 = vB+vC+vD: GE recovers vB from
        // {A}, in-batch BP never does
        let h = TransferMatrix::from_digit_rows(spec2(), &["10", "01", "11", "11"]).unwrap();
        let star = gamma_star(&h, 1);
        assert!(star.contains(mask(&[0])));
        let levels = gamma_b_all(&h, 4);
        for level in &levels {
            assert!(!level[1].contains(mask(&[0])));
            assert!(level[1].subset_of(&star));
        }
    }

    #[test]
    fn lc2_star_equals_ordinary() {
        for h in crate::channel::catalog(2, 2).unwrap() {
            for s in 0..2 {
                assert_eq!(gamma_star(&h, s), gamma_o(&h, s));
            }
        }
    }

    #[test]
    fn gamma_star_invariant_under_column_operations() {
        use crate::matrix::Matrix;
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        for spec in [spec2(), FieldSpec::new(3, 1).unwrap()] {
            for _ in 0..40 {
                let l = rng.random_range(2..=4);
                let h = loop {
                    let b = rng.random_range(1..=l);
                    let mut m = Matrix::zero(spec, l, b);
                    for r in 0..l {
                        for c in 0..b {
                            m.set(r, c, rng.random_range(0..spec.q() as u16));
                        }
                    }
                    if m.is_full_column_rank() {
                        break TransferMatrix::new(m).unwrap();
                    }
                };
                // invertible phi: the column-operation matrix of the echelon
                // reduction is one by construction
                let (_, phi) = h.matrix().reduced_column_echelon();
                let transformed =
                    TransferMatrix::new(h.matrix().matmul(&phi).unwrap()).unwrap();
                for s in 0..l {
                    assert_eq!(gamma_star(&h, s), gamma_star(&transformed, s));
                }
            }
        }
    }

    #[test]
    fn non_autonomous_catalog_matrices_share_gamma_star() {
        // the three two-output non-autonomous cases describe equivalent
        // linear systems; their exact LIFs agree (their substitution-only
        // LIFs do not)
        let h15 = TransferMatrix::from_digit_rows(spec2(), &["10", "01", "11"]).unwrap();
        let h16 = TransferMatrix::from_digit_rows(spec2(), &["11", "01", "10"]).unwrap();
        let h17 = TransferMatrix::from_digit_rows(spec2(), &["10", "11", "01"]).unwrap();
        for s in 0..3 {
            assert_eq!(gamma_star(&h15, s), gamma_star(&h16, s));
            assert_eq!(gamma_star(&h15, s), gamma_star(&h17, s));
        }
        assert_ne!(gamma_o(&h15, 0), gamma_o(&h16, 0));
    }

    #[test]
    fn gamma_value_extremes() {
        let ground = 0b110u32;
        assert_eq!(MonotoneFamily::empty(ground).gamma(&[0.5f64, 0.5, 0.5]), 0.0);
        assert_eq!(MonotoneFamily::full(ground).gamma(&[0.3f64, 0.3, 0.3]), 1.0);
    }

    #[test]
    fn gamma_value_single_pair() {
        // LC-2 coupled matrix: gamma_A*(H3) = {{B}} upward closed
        let h3 = TransferMatrix::from_digit_rows(spec2(), &["1", "1"]).unwrap();
        let fam = gamma_star(&h3, 0);
        let pb = 0.37f64;
        assert!((fam.gamma(&[0.0, pb]) - pb).abs() < 1e-12);
    }

    #[test]
    fn aggregate_matches_lc2_closed_form() {
        let g = TransferMatrixDistribution::from_catalog_probs(2, 2, &[0.15, 0.2, 0.3, 0.25])
            .unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        for pb in [0.0f64, 0.3, 0.8, 1.0] {
            let got = table.aggregate_gamma(0, &[0.0, pb]);
            let expect = 0.15 + 0.3 * pb + 0.25;
            assert!((got - expect).abs() < 1e-12);
        }
        for pa in [0.0f64, 0.45, 1.0] {
            let got = table.aggregate_gamma(1, &[pa, 0.0]);
            let expect = 0.2 + 0.3 * pa + 0.25;
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn describe_lists_minimal_sets() {
        let g = TransferMatrixDistribution::from_catalog_probs(2, 2, &[0.5, 0.0, 0.5, 0.0])
            .unwrap();
        let table = LifTable::build(&g, LifKind::Full);
        let text = table.describe(&g);
        assert!(text.contains("user A"));
        assert!(text.contains("{B}"));
    }
}
