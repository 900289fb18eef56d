//! The linear multiple-access channel abstraction: transfer-matrix catalogs,
//! the empirical distribution g over them, batch generation from the users'
//! coded packets, and the derived system parameters (beta, the alpha
//! fractions) and outer rate-region bounds.

use crate::field::FieldSpec;
use crate::lt::{degree_sequence, encode_with_degree, largest_remainder, CodedPacket, DegreeDistribution, DegreeSchedule};
use crate::matrix::Matrix;
use crate::packet::Packet;
use crate::{Error, Result};
use rand::Rng;

/// Standard user labels in Theta order.
pub fn user_label(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// Full-column-rank L-row matrix over the base field GF(q), tying the L
/// transmitted coded packets of one timeslot to its B decoded outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferMatrix(Matrix);

impl TransferMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.spec().m() != 1 {
            return Err(Error::Config("transfer matrices live over the base field".into()));
        }
        if m.cols() == 0 || m.cols() > m.rows() {
            return Err(Error::Config(format!(
                "transfer matrix must have 1..=L columns, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_full_column_rank() {
            return Err(Error::Config("transfer matrix must have full column rank".into()));
        }
        Ok(TransferMatrix(m))
    }

    pub fn from_digit_rows(spec: FieldSpec, rows: &[&str]) -> Result<Self> {
        TransferMatrix::new(Matrix::from_digit_rows(spec.base(), rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn users(&self) -> usize {
        self.0.rows()
    }

    pub fn outputs(&self) -> usize {
        self.0.cols()
    }

    pub fn rank(&self) -> usize {
        self.0.cols() // full column rank by construction
    }

    /// One digit string per user row, e.g. `["10", "01", "11"]`.
    pub fn to_digit_rows(&self) -> Vec<String> {
        (0..self.0.rows())
            .map(|r| self.0.row(r).iter().map(|v| v.to_string()).collect())
            .collect()
    }
}

/// Named binary catalogs where the printed case lists exist, canonical
/// reduced-column-echelon representatives otherwise.
pub fn catalog(l: usize, q: u8) -> Result<Vec<TransferMatrix>> {
    let spec = FieldSpec::new(q, 1)?;
    if q == 2 && l == 2 {
        return ["1;0", "0;1", "1;1", "10;01"]
            .iter()
            .map(|s| {
                let rows: Vec<&str> = s.split(';').collect();
                TransferMatrix::from_digit_rows(spec, &rows)
            })
            .collect();
    }
    if q == 2 && l == 3 {
        return [
            "1;0;0", "0;1;0", "0;0;1", // single clean
            "10;01;00", "10;00;01", "00;10;01", // two clean
            "100;010;001", // all three
            "1;1;0", "1;0;1", "0;1;1", // one pair
            "1;1;1", // triple
            "10;01;10", "10;01;01", "10;10;01", // pair plus clean
            "10;01;11", "11;01;10", "10;11;01", // non-autonomous
        ]
        .iter()
        .map(|s| {
            let rows: Vec<&str> = s.split(';').collect();
            TransferMatrix::from_digit_rows(spec, &rows)
        })
        .collect();
    }
    // general: enumerate reduced-column-echelon representatives, one per
    // column space, B = 1..=L
    let mut out = Vec::new();
    for b in 1..=l {
        enumerate_rcef(spec, l, b, &mut out)?;
    }
    Ok(out)
}

fn enumerate_rcef(spec: FieldSpec, l: usize, b: usize, out: &mut Vec<TransferMatrix>) -> Result<()> {
    // choose pivot rows p_0 < ... < p_{b-1}
    let mut pivots: Vec<usize> = (0..b).collect();
    loop {
        // free cells: (row r, col j) with r > pivots[j] and r not a pivot row
        let mut free: Vec<(usize, usize)> = Vec::new();
        for (j, &p) in pivots.iter().enumerate() {
            for r in (p + 1)..l {
                if !pivots.contains(&r) {
                    free.push((r, j));
                }
            }
        }
        let q = spec.q() as u64;
        let combos = q.pow(free.len() as u32);
        for enc in 0..combos {
            let mut m = Matrix::zero(spec, l, b);
            for (j, &p) in pivots.iter().enumerate() {
                m.set(p, j, 1);
            }
            let mut acc = enc;
            for &(r, j) in &free {
                m.set(r, j, (acc % q) as u16);
                acc /= q;
            }
            out.push(TransferMatrix::new(m)?);
        }
        // next pivot combination
        let mut i = b;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if pivots[i] + (b - i) < l {
                pivots[i] += 1;
                for k in (i + 1)..b {
                    pivots[k] = pivots[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Distribution g over transfer matrices; the mass not on the support is the
/// probability that a timeslot decodes nothing.
#[derive(Debug, Clone)]
pub struct TransferMatrixDistribution {
    users: usize,
    spec: FieldSpec,
    support: Vec<(TransferMatrix, f64)>,
    residual: f64,
}

impl TransferMatrixDistribution {
    pub fn new(support: Vec<(TransferMatrix, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Config("distribution needs at least one transfer matrix".into()));
        }
        let users = support[0].0.users();
        let spec = support[0].0.matrix().spec();
        let mut total = 0.0;
        for (h, p) in &support {
            if h.users() != users || h.matrix().spec() != spec {
                return Err(Error::Config("all transfer matrices must share L and q".into()));
            }
            if *p < 0.0 || !p.is_finite() {
                return Err(Error::Config("probabilities must be nonnegative".into()));
            }
            total += p;
        }
        if total > 1.0 + 1e-9 {
            return Err(Error::Config(format!("probabilities sum to {total} > 1")));
        }
        Ok(TransferMatrixDistribution {
            users,
            spec,
            support,
            residual: (1.0 - total).max(0.0),
        })
    }

    /// Builds over the named catalog for (l, q) given per-matrix
    /// probabilities in catalog order.
    pub fn from_catalog_probs(l: usize, q: u8, probs: &[f64]) -> Result<Self> {
        let cat = catalog(l, q)?;
        if probs.len() != cat.len() {
            return Err(Error::Config(format!(
                "expected {} probabilities for the (L={l}, q={q}) catalog, got {}",
                cat.len(),
                probs.len()
            )));
        }
        TransferMatrixDistribution::new(
            cat.into_iter()
                .zip(probs.iter().copied())
                .filter(|&(_, p)| p > 0.0)
                .collect(),
        )
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn support(&self) -> &[(TransferMatrix, f64)] {
        &self.support
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Expected decoded rank per timeslot (the outer bound on sum rate).
    pub fn beta(&self) -> f64 {
        self.support.iter().map(|(h, p)| p * h.rank() as f64).sum()
    }

    /// Samples a support index, or None for the empty outcome.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let mut u: f64 = rng.random();
        for (i, (_, p)) in self.support.iter().enumerate() {
            if u < *p {
                return Some(i);
            }
            u -= p;
        }
        None
    }

    /// Deterministic per-slot assignment for exact-counts mode:
    /// largest-remainder quotas, then a seeded shuffle. `None` entries are
    /// empty slots.
    pub fn exact_count_assignment<R: Rng + ?Sized>(
        &self,
        slots: usize,
        rng: &mut R,
    ) -> Vec<Option<usize>> {
        let mut weights: Vec<f64> = self.support.iter().map(|(_, p)| *p).collect();
        weights.push(self.residual);
        let counts = largest_remainder(&weights, slots);
        let mut assignment: Vec<Option<usize>> = Vec::with_capacity(slots);
        for (i, &c) in counts.iter().enumerate() {
            let v = if i < self.support.len() { Some(i) } else { None };
            assignment.extend(std::iter::repeat(v).take(c));
        }
        for i in (1..assignment.len()).rev() {
            let j = rng.random_range(0..=i);
            assignment.swap(i, j);
        }
        assignment
    }
}

/// System fractions derived from g for the binary two- and three-user cases.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileAlphas {
    TwoUser {
        a: f64,
        b: f64,
        ab: f64,
    },
    ThreeUser {
        single: [f64; 3],
        pair: [f64; 3], // indexed AB, AC, BC
        triple: f64,
        bar: [f64; 3],
    },
    /// Larger L or non-binary base fields: only beta is derived.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemProfile {
    pub users: usize,
    pub beta: f64,
    pub alphas: ProfileAlphas,
}

impl SystemProfile {
    /// Sum of the non-autonomous fractions (zero unless three users).
    pub fn bar_total(&self) -> f64 {
        match &self.alphas {
            ProfileAlphas::ThreeUser { bar, .. } => bar.iter().sum(),
            _ => 0.0,
        }
    }
}

/// How one batch contributes to the alpha accounting.
enum BatchClass {
    /// Autonomous outputs with the given user-support sets.
    Autonomous(Vec<Vec<usize>>),
    /// Two non-autonomous outputs sharing the given user.
    NonAutonomous(usize),
}

fn classify(h: &TransferMatrix) -> Result<BatchClass> {
    let m = h.matrix();
    let b = m.cols();
    if b == 1 {
        return Ok(BatchClass::Autonomous(vec![m.column_support(0)]));
    }
    if b == m.rows() {
        // full rank square: everything decodes clean
        return Ok(BatchClass::Autonomous((0..m.rows()).map(|r| vec![r]).collect()));
    }
    // b == 2, L == 3 is the only remaining shape in the binary three-user
    // catalog; handle it (and reject anything wider).
    if b == 2 && m.rows() == 3 && m.spec().q() == 2 {
        let f = m.spec().field();
        let c1 = m.column(0);
        let c2 = m.column(1);
        let mut sum = c1.clone();
        for (i, &v) in c2.iter().enumerate() {
            sum[i] = f.add(sum[i], v);
        }
        let vecs = [c1, c2, sum];
        let support = |v: &Vec<u16>| -> Vec<usize> {
            v.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, _)| i).collect()
        };
        // look for a disjoint-support basis among the three nonzero vectors
        for i in 0..3 {
            for j in (i + 1)..3 {
                let si = support(&vecs[i]);
                let sj = support(&vecs[j]);
                if si.iter().all(|u| !sj.contains(u)) {
                    return Ok(BatchClass::Autonomous(vec![si, sj]));
                }
            }
        }
        // non-autonomous: the literal columns share exactly one user
        let s0 = support(&vecs[0]);
        let s1 = support(&vecs[1]);
        let shared: Vec<usize> = s0.iter().copied().filter(|u| s1.contains(u)).collect();
        if shared.len() == 1 {
            return Ok(BatchClass::NonAutonomous(shared[0]));
        }
        return Err(Error::Config("unclassifiable three-user transfer matrix".into()));
    }
    Err(Error::Config(format!(
        "alpha accounting is defined for the binary L in {{2,3}} catalogs, got {}x{} over GF({})",
        m.rows(),
        b,
        m.spec().q()
    )))
}

/// Computes beta and the alpha fractions from g.
pub fn derive_profile(g: &TransferMatrixDistribution) -> Result<SystemProfile> {
    let beta = g.beta();
    if beta <= 0.0 {
        return Err(Error::Config("degenerate channel: beta is zero".into()));
    }
    let l = g.users();
    if g.spec().q() != 2 || (l != 2 && l != 3) {
        return Ok(SystemProfile {
            users: l,
            beta,
            alphas: ProfileAlphas::General,
        });
    }
    if l == 2 {
        let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
        for (h, p) in g.support() {
            match classify(h)? {
                BatchClass::Autonomous(sets) => {
                    for s in sets {
                        match s.as_slice() {
                            [0] => a += p,
                            [1] => b += p,
                            [0, 1] => ab += p,
                            _ => unreachable!("two-user supports"),
                        }
                    }
                }
                BatchClass::NonAutonomous(_) => {
                    unreachable!("two-user batches are always autonomous")
                }
            }
        }
        return Ok(SystemProfile {
            users: 2,
            beta,
            alphas: ProfileAlphas::TwoUser {
                a: a / beta,
                b: b / beta,
                ab: ab / beta,
            },
        });
    }
    let mut single = [0.0f64; 3];
    let mut pair = [0.0f64; 3];
    let mut triple = 0.0f64;
    let mut bar = [0.0f64; 3];
    for (h, p) in g.support() {
        match classify(h)? {
            BatchClass::Autonomous(sets) => {
                for s in sets {
                    match s.as_slice() {
                        [u] => single[*u] += p,
                        [0, 1] => pair[0] += p,
                        [0, 2] => pair[1] += p,
                        [1, 2] => pair[2] += p,
                        [0, 1, 2] => triple += p,
                        other => {
                            return Err(Error::Config(format!(
                                "unexpected output support {other:?}"
                            )))
                        }
                    }
                }
            }
            BatchClass::NonAutonomous(shared) => bar[shared] += p,
        }
    }
    for v in single.iter_mut().chain(pair.iter_mut()).chain(bar.iter_mut()) {
        *v /= beta;
    }
    triple /= beta;
    Ok(SystemProfile {
        users: 3,
        beta,
        alphas: ProfileAlphas::ThreeUser {
            single,
            pair,
            triple,
            bar,
        },
    })
}

/// Outer bounds: for every nonempty user subset S, the sum of the rates in S
/// is at most `sum_H g(H) rank(H^S)`.
pub fn rate_region_bounds(g: &TransferMatrixDistribution) -> Vec<(Vec<usize>, f64)> {
    let l = g.users();
    let mut out = Vec::new();
    for mask in 1u32..(1 << l) {
        let rows: Vec<usize> = (0..l).filter(|&u| mask & (1 << u) != 0).collect();
        let bound: f64 = g
            .support()
            .iter()
            .map(|(h, p)| p * h.matrix().select_rows(&rows).rank() as f64)
            .sum();
        out.push((rows, bound));
    }
    out
}

/// Per-user encoder parameters for batch generation.
#[derive(Debug, Clone)]
pub struct UserConfig {
    pub dist: DegreeDistribution,
    pub schedule: DegreeSchedule,
}

/// One timeslot's decoded output: the transfer matrix, the neighbor sets of
/// the embedded coded packets (payloads are implicit), and the B output
/// payloads satisfying `[v_s] H = [u_b]`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub slot: u64,
    pub matrix: TransferMatrix,
    /// Per-user neighbor lists of the embedded coded packets.
    pub embedded: Vec<Vec<u32>>,
    pub outputs: Vec<Packet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Each transfer matrix occurs exactly round(g(H) N) times
    /// (largest-remainder), slot order randomized.
    Exact,
    /// Transfer matrices drawn independently per slot.
    Iid,
}

/// Generates the batches of `slots` timeslots. Every slot consumes one
/// fresh coded packet per user; slots whose physical-layer outcome is empty
/// produce no batch.
pub fn generate_batches<R: Rng + ?Sized>(
    inputs: &[Vec<Packet>],
    users: &[UserConfig],
    g: &TransferMatrixDistribution,
    slots: usize,
    mode: CountMode,
    rng: &mut R,
) -> Result<Vec<Batch>> {
    let l = g.users();
    if inputs.len() != l || users.len() != l {
        return Err(Error::Config(format!(
            "expected {l} users worth of inputs/configs, got {}/{}",
            inputs.len(),
            users.len()
        )));
    }
    for (s, (user_inputs, cfg)) in inputs.iter().zip(users).enumerate() {
        if user_inputs.len() < cfg.dist.max_degree() {
            return Err(Error::Config(format!(
                "user {}: K={} smaller than max degree {}",
                user_label(s),
                user_inputs.len(),
                cfg.dist.max_degree()
            )));
        }
    }
    let assignment: Vec<Option<usize>> = match mode {
        CountMode::Exact => g.exact_count_assignment(slots, rng),
        CountMode::Iid => (0..slots).map(|_| g.sample(rng)).collect(),
    };
    let degree_seqs: Vec<Vec<usize>> = users
        .iter()
        .map(|cfg| degree_sequence(&cfg.dist, slots, cfg.schedule, rng))
        .collect();

    let spec = inputs[0][0].spec();
    let packet_len = inputs[0][0].len();
    let field = spec.field();
    let mut batches = Vec::new();
    for (slot, h_idx) in assignment.iter().enumerate() {
        // one coded packet per user per slot, even when nothing is decoded
        let coded: Vec<CodedPacket> = (0..l)
            .map(|s| encode_with_degree(&inputs[s], s, degree_seqs[s][slot], rng))
            .collect::<Result<_>>()?;
        let Some(h_idx) = h_idx else { continue };
        let h = &g.support()[*h_idx].0;
        let hm = h.matrix();
        let mut outputs = Vec::with_capacity(h.outputs());
        for col in 0..h.outputs() {
            let mut u = Packet::zero(spec, packet_len);
            for (s, cp) in coded.iter().enumerate() {
                let coeff = hm.get(s, col);
                if coeff == 0 {
                    continue;
                }
                if coeff == 1 {
                    u.add_assign(&cp.payload)?;
                } else {
                    let mut scaled = cp.payload.clone();
                    scaled.scale_assign(coeff as u8);
                    u.add_assign(&scaled)?;
                }
            }
            let _ = field; // outputs already in the extension field
            outputs.push(u);
        }
        batches.push(Batch {
            slot: slot as u64,
            matrix: h.clone(),
            embedded: coded.into_iter().map(|c| c.neighbors).collect(),
            outputs,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn g_lc2(p: [f64; 4]) -> TransferMatrixDistribution {
        TransferMatrixDistribution::from_catalog_probs(2, 2, &p).unwrap()
    }

    #[test]
    fn catalog_counts() {
        assert_eq!(catalog(2, 2).unwrap().len(), 4);
        assert_eq!(catalog(3, 2).unwrap().len(), 17);
        for h in catalog(3, 2).unwrap() {
            assert!(h.matrix().is_full_column_rank());
        }
        // general enumeration counts subspaces: L=3 q=2 -> 7+7+1
        assert_eq!(catalog(3, 3).unwrap().len(), 13 + 13 + 1);
        assert_eq!(catalog(4, 2).unwrap().len(), 15 + 35 + 15 + 1);
        assert_eq!(catalog(1, 2).unwrap().len(), 1);
    }

    #[test]
    fn profile_hand_example() {
        let g = g_lc2([0.2, 0.2, 0.4, 0.0]);
        let p = derive_profile(&g).unwrap();
        assert!((p.beta - 0.8).abs() < 1e-12);
        let ProfileAlphas::TwoUser { a, b, ab } = p.alphas else {
            panic!()
        };
        assert!((a - 0.25).abs() < 1e-12);
        assert!((b - 0.25).abs() < 1e-12);
        assert!((ab - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_single_atom() {
        let g = g_lc2([0.0, 0.0, 0.0, 0.5]);
        let p = derive_profile(&g).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-12);
        let ProfileAlphas::TwoUser { a, b, ab } = p.alphas else {
            panic!()
        };
        assert!((a - 0.5).abs() < 1e-12);
        assert!((b - 0.5).abs() < 1e-12);
        assert_eq!(ab, 0.0);
    }

    #[test]
    fn profile_triple_only() {
        let mut probs = [0.0; 17];
        probs[10] = 1.0; // the all-ones column
        let g = TransferMatrixDistribution::from_catalog_probs(3, 2, &probs).unwrap();
        let p = derive_profile(&g).unwrap();
        assert!((p.beta - 1.0).abs() < 1e-12);
        let ProfileAlphas::ThreeUser { single, pair, triple, bar } = p.alphas else {
            panic!()
        };
        assert_eq!(single, [0.0; 3]);
        assert_eq!(pair, [0.0; 3]);
        assert!((triple - 1.0).abs() < 1e-12);
        assert_eq!(bar, [0.0; 3]);
    }

    #[test]
    fn three_user_identity_on_random_g() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let mut probs = [0.0f64; 17];
            let mut total = 0.0;
            for p in probs.iter_mut() {
                *p = rng.random::<f64>();
                total += *p;
            }
            let scale = rng.random::<f64>() / total; // leave room for residual
            for p in probs.iter_mut() {
                *p *= scale;
            }
            let g = TransferMatrixDistribution::from_catalog_probs(3, 2, &probs).unwrap();
            let prof = derive_profile(&g).unwrap();
            let ProfileAlphas::ThreeUser { single, pair, triple, bar } = prof.alphas else {
                panic!()
            };
            let sum: f64 = single.iter().sum::<f64>()
                + pair.iter().sum::<f64>()
                + triple
                + 2.0 * bar.iter().sum::<f64>();
            assert!((sum - 1.0).abs() < 1e-12, "identity violated: {sum}");
        }
    }

    #[test]
    fn degenerate_channel_rejected() {
        let g = TransferMatrixDistribution::from_catalog_probs(2, 2, &[0.0; 4]);
        // empty support is rejected at construction
        assert!(g.is_err());
    }

    #[test]
    fn rate_bounds_match_printed_identities() {
        let g = g_lc2([0.15, 0.2, 0.3, 0.2]);
        let p = derive_profile(&g).unwrap();
        let bounds = rate_region_bounds(&g);
        let full = bounds.iter().find(|(s, _)| s.len() == 2).unwrap();
        assert!((full.1 - p.beta).abs() < 1e-12);
        let ProfileAlphas::TwoUser { a, b: _, ab } = p.alphas else {
            panic!()
        };
        let ra = bounds.iter().find(|(s, _)| s == &vec![0]).unwrap();
        assert!((ra.1 - p.beta * (a + ab)).abs() < 1e-12);

        // three-user: {A,B} bound equals beta(1 - alpha_C); {A} bound equals
        // beta(alpha_A + alpha_AB + alpha_AC + alpha_ABC + bar)
        let mut probs = [0.0f64; 17];
        for (i, p) in probs.iter_mut().enumerate() {
            *p = 0.9 * (i as f64 + 1.0) / 153.0;
        }
        let g3 = TransferMatrixDistribution::from_catalog_probs(3, 2, &probs).unwrap();
        let p3 = derive_profile(&g3).unwrap();
        let ProfileAlphas::ThreeUser { single, pair, triple, bar } = p3.alphas else {
            panic!()
        };
        let bounds3 = rate_region_bounds(&g3);
        let ab_bound = bounds3.iter().find(|(s, _)| s == &vec![0, 1]).unwrap();
        assert!(
            (ab_bound.1 - p3.beta * (1.0 - single[2])).abs() < 1e-9,
            "{} vs {}",
            ab_bound.1,
            p3.beta * (1.0 - single[2])
        );
        let a_bound = bounds3.iter().find(|(s, _)| s == &vec![0]).unwrap();
        let expect = p3.beta * (single[0] + pair[0] + pair[1] + triple + bar.iter().sum::<f64>());
        assert!((a_bound.1 - expect).abs() < 1e-9);
    }

    #[test]
    fn bounds_monotone_in_subset() {
        let g = g_lc2([0.1, 0.25, 0.3, 0.15]);
        let bounds = rate_region_bounds(&g);
        for (s1, b1) in &bounds {
            for (s2, b2) in &bounds {
                if s1.iter().all(|u| s2.contains(u)) {
                    assert!(b1 <= &(b2 + 1e-12));
                }
            }
        }
    }

    fn tiny_inputs(l: usize, k: usize, t: usize, rng: &mut StdRng) -> Vec<Vec<Packet>> {
        let spec = FieldSpec::new(2, 8).unwrap();
        (0..l)
            .map(|_| (0..k).map(|_| Packet::random(spec, t, rng)).collect())
            .collect()
    }

    fn uniform_users(l: usize) -> Vec<UserConfig> {
        (0..l)
            .map(|_| UserConfig {
                dist: DegreeDistribution::from_pairs(&[(1, 0.3), (2, 0.5), (3, 0.2)]).unwrap(),
                schedule: DegreeSchedule::Iid,
            })
            .collect()
    }

    #[test]
    fn clean_channel_generates_all_outputs() {
        let mut rng = StdRng::seed_from_u64(1);
        let inputs = tiny_inputs(2, 30, 2, &mut rng);
        let g = g_lc2([0.0, 0.0, 0.0, 1.0]);
        let batches =
            generate_batches(&inputs, &uniform_users(2), &g, 100, CountMode::Exact, &mut rng)
                .unwrap();
        assert_eq!(batches.len(), 100);
        let total_outputs: usize = batches.iter().map(|b| b.outputs.len()).sum();
        assert_eq!(total_outputs, 200);
    }

    #[test]
    fn exact_counts_are_exact() {
        let mut rng = StdRng::seed_from_u64(2);
        let inputs = tiny_inputs(2, 30, 1, &mut rng);
        let g = g_lc2([0.3, 0.2, 0.4, 0.0]);
        let batches =
            generate_batches(&inputs, &uniform_users(2), &g, 10, CountMode::Exact, &mut rng)
                .unwrap();
        let coupled = batches
            .iter()
            .filter(|b| b.matrix.to_digit_rows() == vec!["1", "1"])
            .count();
        assert_eq!(coupled, 4);
        assert_eq!(batches.len(), 9); // one slot in ten is the empty outcome
    }

    #[test]
    fn batch_equation_holds_on_recomputation() {
        let mut rng = StdRng::seed_from_u64(3);
        let spec = FieldSpec::new(2, 8).unwrap();
        let inputs = tiny_inputs(3, 25, 3, &mut rng);
        let mut probs = [0.0f64; 17];
        probs[6] = 0.2;
        probs[10] = 0.3;
        probs[14] = 0.3;
        probs[0] = 0.2;
        let g = TransferMatrixDistribution::from_catalog_probs(3, 2, &probs).unwrap();
        let batches =
            generate_batches(&inputs, &uniform_users(3), &g, 50, CountMode::Iid, &mut rng)
                .unwrap();
        assert!(!batches.is_empty());
        for b in &batches {
            // recompute coded payloads from neighbor lists, then check eq
            let coded: Vec<Packet> = b
                .embedded
                .iter()
                .enumerate()
                .map(|(s, ns)| {
                    let mut p = Packet::zero(spec, 3);
                    for &n in ns {
                        p.add_assign(&inputs[s][n as usize]).unwrap();
                    }
                    p
                })
                .collect();
            for (col, u) in b.outputs.iter().enumerate() {
                let mut expect = Packet::zero(spec, 3);
                for (s, cp) in coded.iter().enumerate() {
                    if b.matrix.matrix().get(s, col) != 0 {
                        expect.add_assign(cp).unwrap();
                    }
                }
                assert_eq!(&expect, u);
            }
        }
    }

    #[test]
    fn iid_histogram_converges() {
        let mut rng = StdRng::seed_from_u64(4);
        let g = g_lc2([0.25, 0.25, 0.25, 0.15]);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            match g.sample(&mut rng) {
                Some(i) => counts[i] += 1,
                None => counts[4] += 1,
            }
        }
        let expect = [0.25, 0.25, 0.25, 0.15, 0.10];
        for (i, &c) in counts.iter().enumerate() {
            let p = expect[i];
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (c as f64 - n as f64 * p).abs() < 3.0 * sigma,
                "outcome {i}: {c} vs {}",
                n as f64 * p
            );
        }
    }
}
