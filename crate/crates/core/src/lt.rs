//! Single-user LT machinery: degree distributions, the encoder with recorded
//! neighbor sets, and the peeling decoder used as stage 1 of every round.

use crate::field::FieldSpec;
use crate::packet::Packet;
use crate::{Error, Result};
use rand::Rng;
use std::collections::VecDeque;

/// Probability vector over check degrees 1..=D.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    /// probs[d-1] is the probability of degree d.
    probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Strict constructor: probabilities must be nonnegative and sum to 1
    /// within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, 1e-9)
    }

    /// Accepts rounded coefficient lists (as published tables tend to be)
    /// whose total mass is within 1e-2 of 1. Coefficients are kept verbatim;
    /// only degree sampling normalizes internally.
    pub fn new_rounded(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, 1e-2)
    }

    fn with_tolerance(mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::Config("degree distribution must be nonempty".into()));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Config("degree probabilities must be nonnegative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Config(format!(
                "degree probabilities sum to {sum}, expected 1 within {tol}"
            )));
        }
        Ok(DegreeDistribution { probs })
    }

    /// Builds from sparse (degree, probability) pairs.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::pairs_with_tolerance(pairs, 1e-9)
    }

    /// Sparse-pair variant of [`DegreeDistribution::new_rounded`].
    pub fn from_pairs_rounded(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::pairs_with_tolerance(pairs, 1e-2)
    }

    fn pairs_with_tolerance(pairs: &[(usize, f64)], tol: f64) -> Result<Self> {
        let max_d = pairs.iter().map(|&(d, _)| d).max().unwrap_or(0);
        if pairs.iter().any(|&(d, _)| d == 0) {
            return Err(Error::Config("degree 0 is not allowed".into()));
        }
        let mut probs = vec![0.0; max_d];
        for &(d, p) in pairs {
            probs[d - 1] += p;
        }
        Self::with_tolerance(probs, tol)
    }

    /// Probability of a single degree 1.
    pub fn degenerate_one() -> Self {
        DegreeDistribution { probs: vec![1.0] }
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, degree: usize) -> f64 {
        if degree == 0 || degree > self.probs.len() {
            0.0
        } else {
            self.probs[degree - 1]
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Sparse view: (degree, probability) pairs with nonzero mass.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i + 1, p))
            .collect()
    }

    /// Polynomial evaluation: sum_d probs[d] x^d (Horner).
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &p in self.probs.iter().rev() {
            acc = acc * x + p;
        }
        acc * x
    }

    /// Derivative evaluation: sum_d d * probs[d] x^(d-1).
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate().rev() {
            acc = acc * x + (i + 1) as f64 * p;
        }
        acc
    }

    /// Inverse-CDF degree sampler over a precomputed cumulative table.
    pub fn sampler(&self) -> DegreeSampler {
        let total: f64 = self.probs.iter().sum();
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p / total;
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        DegreeSampler { cum }
    }
}

/// Precomputed cumulative table for inverse-CDF degree sampling.
#[derive(Debug, Clone)]
pub struct DegreeSampler {
    cum: Vec<f64>,
}

impl DegreeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        match self.cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) | Err(i) => (i + 1).min(self.cum.len()),
        }
    }
}

/// How encoder degrees are drawn across a block of coded packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeSchedule {
    /// Independent draws per packet.
    Iid,
    /// Deterministic quota per degree (largest-remainder allocation of the
    /// block length), shuffled into a random order.
    Exact,
}

/// Draws a degree sequence of length `n` under the given schedule.
pub fn degree_sequence<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    n: usize,
    schedule: DegreeSchedule,
    rng: &mut R,
) -> Vec<usize> {
    match schedule {
        DegreeSchedule::Iid => {
            let s = dist.sampler();
            (0..n).map(|_| s.sample(rng)).collect()
        }
        DegreeSchedule::Exact => {
            let total: f64 = dist.probs().iter().sum();
            let quotas = largest_remainder(
                &dist
                    .probs()
                    .iter()
                    .map(|&p| p / total)
                    .collect::<Vec<_>>(),
                n,
            );
            let mut seq = Vec::with_capacity(n);
            for (i, &count) in quotas.iter().enumerate() {
                seq.extend(std::iter::repeat(i + 1).take(count));
            }
            // Fisher-Yates
            for i in (1..seq.len()).rev() {
                let j = rng.random_range(0..=i);
                seq.swap(i, j);
            }
            seq
        }
    }
}

/// Largest-remainder apportionment of `n` items to `weights` (weights sum
/// to 1 within rounding).
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let exact = w * n as f64;
        let floor = exact.floor() as usize;
        counts.push(floor);
        assigned += floor;
        remainders.push((exact - floor as f64, i));
    }
    // ties broken by index for determinism
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut left = n.saturating_sub(assigned);
    for &(_, i) in &remainders {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// One coded packet: its owner's input-packet neighbor set plus the payload
/// (the field sum of those inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPacket {
    pub owner: usize,
    pub neighbors: Vec<u32>,
    pub payload: Packet,
}

/// Samples `count` distinct indices uniformly from 0..k (Floyd's algorithm).
pub fn sample_distinct<R: Rng + ?Sized>(k: usize, count: usize, rng: &mut R) -> Vec<u32> {
    debug_assert!(count <= k);
    let mut chosen: Vec<u32> = Vec::with_capacity(count);
    for j in (k - count)..k {
        let t = rng.random_range(0..=j as u32);
        if chosen.contains(&t) {
            chosen.push(j as u32);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Encodes one coded packet for user `owner` with a pre-drawn degree.
pub fn encode_with_degree<R: Rng + ?Sized>(
    inputs: &[Packet],
    owner: usize,
    degree: usize,
    rng: &mut R,
) -> Result<CodedPacket> {
    if degree == 0 || degree > inputs.len() {
        return Err(Error::Config(format!(
            "degree {degree} out of range for {} input packets",
            inputs.len()
        )));
    }
    let neighbors = sample_distinct(inputs.len(), degree, rng);
    let spec = inputs[0].spec();
    let len = inputs[0].len();
    let mut payload = Packet::zero(spec, len);
    for &i in &neighbors {
        payload.add_assign(&inputs[i as usize])?;
    }
    Ok(CodedPacket {
        owner,
        neighbors,
        payload,
    })
}

/// Samples a degree from the distribution and encodes one coded packet.
pub fn encode<R: Rng + ?Sized>(
    inputs: &[Packet],
    owner: usize,
    dist: &DegreeDistribution,
    rng: &mut R,
) -> Result<CodedPacket> {
    if inputs.len() < dist.max_degree() {
        return Err(Error::Config(format!(
            "need at least D={} input packets, have {}",
            dist.max_degree(),
            inputs.len()
        )));
    }
    let degree = dist.sampler().sample(rng);
    encode_with_degree(inputs, owner, degree, rng)
}

struct ResidualCheck {
    /// Undecoded neighbor indices (unsorted; order irrelevant).
    unresolved: Vec<u32>,
    /// Original payload minus the sum of decoded neighbors.
    payload: Packet,
}

/// Incremental peeling state for one user's LT code. Checks accumulate
/// across rounds; decoded values persist.
pub struct PeelingState {
    spec: FieldSpec,
    packet_len: usize,
    decoded: Vec<Option<Packet>>,
    decoded_count: usize,
    checks: Vec<ResidualCheck>,
    /// input index -> residual checks currently containing it
    incidence: Vec<Vec<u32>>,
    ready: VecDeque<u32>,
    /// Symbol operations performed during substitution.
    ops: u64,
}

impl PeelingState {
    pub fn new(spec: FieldSpec, packet_len: usize, k: usize) -> Self {
        PeelingState {
            spec,
            packet_len,
            decoded: vec![None; k],
            decoded_count: 0,
            checks: Vec::new(),
            incidence: vec![Vec::new(); k],
            ready: VecDeque::new(),
            ops: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.decoded.len()
    }

    pub fn decoded_count(&self) -> usize {
        self.decoded_count
    }

    pub fn decoded(&self, index: usize) -> Option<&Packet> {
        self.decoded[index].as_ref()
    }

    pub fn decoded_fraction(&self) -> f64 {
        self.decoded_count as f64 / self.decoded.len().max(1) as f64
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    pub fn into_decoded(self) -> Vec<Option<Packet>> {
        self.decoded
    }

    /// Adds a check (neighbor set + payload), reducing it against already
    /// decoded inputs first.
    pub fn add_check(&mut self, neighbors: &[u32], payload: Packet) -> Result<()> {
        let mut reduced = payload;
        let mut unresolved = Vec::with_capacity(neighbors.len());
        for &n in neighbors {
            let n_us = n as usize;
            if n_us >= self.decoded.len() {
                return Err(Error::Config(format!(
                    "check references input {n} beyond K={}",
                    self.decoded.len()
                )));
            }
            match &self.decoded[n_us] {
                Some(v) => {
                    self.ops += reduced.sub_assign(v)? as u64;
                }
                None => unresolved.push(n),
            }
        }
        let id = self.checks.len() as u32;
        if unresolved.is_empty() {
            if !reduced.is_zero() {
                return Err(Error::Corruption(
                    "fully-reduced check has nonzero residual payload".into(),
                ));
            }
            self.checks.push(ResidualCheck {
                unresolved,
                payload: reduced,
            });
            return Ok(());
        }
        for &n in &unresolved {
            self.incidence[n as usize].push(id);
        }
        let degree_one = unresolved.len() == 1;
        self.checks.push(ResidualCheck {
            unresolved,
            payload: reduced,
        });
        if degree_one {
            self.ready.push_back(id);
        }
        Ok(())
    }

    /// Runs peeling to exhaustion. Returns the indices decoded by this call.
    pub fn run(&mut self) -> Result<Vec<u32>> {
        let mut newly = Vec::new();
        while let Some(id) = self.ready.pop_front() {
            let check = &self.checks[id as usize];
            if check.unresolved.len() != 1 {
                continue;
            }
            let target = check.unresolved[0];
            let value = check.payload.clone();
            let t_us = target as usize;
            match &self.decoded[t_us] {
                Some(existing) => {
                    if *existing != value {
                        return Err(Error::Corruption(format!(
                            "conflicting values decoded for input packet {target}"
                        )));
                    }
                    self.checks[id as usize].unresolved.clear();
                    continue;
                }
                None => {
                    self.decoded[t_us] = Some(value);
                    self.decoded_count += 1;
                    newly.push(target);
                }
            }
            self.checks[id as usize].unresolved.clear();
            let touched = std::mem::take(&mut self.incidence[t_us]);
            let value = self.decoded[t_us].as_ref().unwrap().clone();
            for cid in touched {
                let c = &mut self.checks[cid as usize];
                if let Some(pos) = c.unresolved.iter().position(|&n| n == target) {
                    c.unresolved.swap_remove(pos);
                    self.ops += c.payload.sub_assign(&value)? as u64;
                    match c.unresolved.len() {
                        1 => self.ready.push_back(cid),
                        0 if !c.payload.is_zero() => {
                            return Err(Error::Corruption(format!(
                                "check {cid} reduced to zero degree with nonzero payload"
                            )));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(newly)
    }

    /// Convenience: add a batch of checks then peel to exhaustion.
    pub fn peel(&mut self, checks: &[(Vec<u32>, Packet)]) -> Result<Vec<u32>> {
        for (neighbors, payload) in checks {
            self.add_check(neighbors, payload.clone())?;
        }
        self.run()
    }

    pub fn packet_len(&self) -> usize {
        self.packet_len
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn spec() -> FieldSpec {
        FieldSpec::new(2, 8).unwrap()
    }

    fn bytes(vals: &[u16]) -> Packet {
        Packet::from_values(spec(), vals.to_vec()).unwrap()
    }

    #[test]
    fn poly_eval_basics() {
        let d = DegreeDistribution::degenerate_one();
        assert_eq!(d.eval(0.3), 0.3);
        assert_eq!(d.eval_deriv(0.77), 1.0);
        let d = DegreeDistribution::from_pairs(&[(1, 0.4), (3, 0.6)]).unwrap();
        assert!((d.eval(1.0) - 1.0).abs() < 1e-12);
        let x: f64 = 0.5;
        assert!((d.eval(x) - (0.4 * x + 0.6 * x.powi(3))).abs() < 1e-12);
        assert!((d.eval_deriv(x) - (0.4 + 1.8 * x * x)).abs() < 1e-12);
    }

    #[test]
    fn published_two_user_poly_value() {
        // rounded published coefficients: literal evaluation, no rescaling
        let a = DegreeDistribution::from_pairs_rounded(&[
            (1, 0.1040),
            (2, 0.8362),
            (26, 0.0582),
            (27, 0.0007),
        ])
        .unwrap();
        assert!((a.eval(0.5) - 0.2611).abs() < 1e-4);
        assert!(DegreeDistribution::from_pairs(&[(1, 0.1040), (2, 0.8362)]).is_err());
    }

    #[test]
    fn degenerate_encoding_copies_inputs() {
        let inputs: Vec<Packet> = (0..5).map(|i| bytes(&[i as u16, 2 * i as u16])).collect();
        let d = DegreeDistribution::degenerate_one();
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..20 {
            let c = encode(&inputs, 0, &d, &mut rng).unwrap();
            assert_eq!(c.neighbors.len(), 1);
            assert_eq!(&c.payload, &inputs[c.neighbors[0] as usize]);
        }
    }

    #[test]
    fn encode_rejects_small_k() {
        let inputs: Vec<Packet> = (0..2).map(|_| bytes(&[0])).collect();
        let d = DegreeDistribution::from_pairs(&[(3, 1.0)]).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        assert!(matches!(encode(&inputs, 0, &d, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn payload_definition_holds() {
        let mut rng = StdRng::seed_from_u64(9);
        let inputs: Vec<Packet> = (0..40).map(|_| Packet::random(spec(), 4, &mut rng)).collect();
        let d = DegreeDistribution::from_pairs(&[(1, 0.2), (2, 0.5), (5, 0.3)]).unwrap();
        for _ in 0..200 {
            let c = encode(&inputs, 0, &d, &mut rng).unwrap();
            let mut sum = Packet::zero(spec(), 4);
            for &n in &c.neighbors {
                sum.add_assign(&inputs[n as usize]).unwrap();
            }
            assert_eq!(sum, c.payload);
            // distinct, sorted neighbors
            for w in c.neighbors.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn degree_histogram_matches_distribution() {
        let d = DegreeDistribution::from_pairs(&[(1, 0.25), (2, 0.55), (7, 0.2)]).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let n = 100_000usize;
        let seq = degree_sequence(&d, n, DegreeSchedule::Iid, &mut rng);
        let mut counts = [0usize; 8];
        for deg in seq {
            counts[deg] += 1;
        }
        // chi-square with 2 dof; 3-sigma-ish acceptance (chi2_{0.997,2} ~ 11.6)
        let mut chi2 = 0.0;
        for &(deg, p) in [(1usize, 0.25f64), (2, 0.55), (7, 0.2)].iter() {
            let expect = p * n as f64;
            let diff = counts[deg] as f64 - expect;
            chi2 += diff * diff / expect;
        }
        assert!(chi2 < 11.6, "chi2={chi2}");
    }

    #[test]
    fn exact_schedule_quotas() {
        let d = DegreeDistribution::from_pairs(&[(1, 0.25), (2, 0.55), (7, 0.2)]).unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        let seq = degree_sequence(&d, 1000, DegreeSchedule::Exact, &mut rng);
        assert_eq!(seq.len(), 1000);
        assert_eq!(seq.iter().filter(|&&x| x == 1).count(), 250);
        assert_eq!(seq.iter().filter(|&&x| x == 2).count(), 550);
        assert_eq!(seq.iter().filter(|&&x| x == 7).count(), 200);
    }

    #[test]
    fn three_step_hand_peel() {
        // K=3 with checks {1}, {1,2}, {2,3} decodes everything
        let mut rng = StdRng::seed_from_u64(5);
        let inputs: Vec<Packet> = (0..3).map(|_| Packet::random(spec(), 3, &mut rng)).collect();
        let mut st = PeelingState::new(spec(), 3, 3);
        let mk = |ns: &[u32]| {
            let mut p = Packet::zero(spec(), 3);
            for &n in ns {
                p.add_assign(&inputs[n as usize]).unwrap();
            }
            (ns.to_vec(), p)
        };
        let newly = st
            .peel(&[mk(&[0]), mk(&[0, 1]), mk(&[1, 2])])
            .unwrap();
        assert_eq!(st.decoded_count(), 3);
        assert_eq!(newly.len(), 3);
        for i in 0..3 {
            assert_eq!(st.decoded(i), Some(&inputs[i]));
        }
    }

    #[test]
    fn no_degree_one_no_progress() {
        let mut rng = StdRng::seed_from_u64(6);
        let inputs: Vec<Packet> = (0..2).map(|_| Packet::random(spec(), 2, &mut rng)).collect();
        let mut st = PeelingState::new(spec(), 2, 2);
        let mut p = inputs[0].clone();
        p.add_assign(&inputs[1]).unwrap();
        st.peel(&[(vec![0, 1], p)]).unwrap();
        assert_eq!(st.decoded_count(), 0);
    }

    #[test]
    fn order_invariance() {
        let mut rng = StdRng::seed_from_u64(7);
        let k = 60usize;
        let inputs: Vec<Packet> = (0..k).map(|_| Packet::random(spec(), 2, &mut rng)).collect();
        let d = DegreeDistribution::from_pairs(&[(1, 0.2), (2, 0.5), (4, 0.3)]).unwrap();
        let checks: Vec<(Vec<u32>, Packet)> = (0..80)
            .map(|_| {
                let c = encode(&inputs, 0, &d, &mut rng).unwrap();
                (c.neighbors, c.payload)
            })
            .collect();
        let reference: Vec<usize> = {
            let mut st = PeelingState::new(spec(), 2, k);
            st.peel(&checks).unwrap();
            (0..k).filter(|&i| st.decoded(i).is_some()).collect()
        };
        for round in 0..8 {
            let mut shuffled = checks.clone();
            let mut r2 = StdRng::seed_from_u64(100 + round);
            for i in (1..shuffled.len()).rev() {
                let j = r2.random_range(0..=i);
                shuffled.swap(i, j);
            }
            let mut st = PeelingState::new(spec(), 2, k);
            st.peel(&shuffled).unwrap();
            let got: Vec<usize> = (0..k).filter(|&i| st.decoded(i).is_some()).collect();
            assert_eq!(got, reference, "terminal decoded set must not depend on order");
        }
    }

    #[test]
    fn corrupted_check_detected() {
        let mut rng = StdRng::seed_from_u64(8);
        let inputs: Vec<Packet> = (0..2).map(|_| Packet::random(spec(), 2, &mut rng)).collect();
        let mut st = PeelingState::new(spec(), 2, 2);
        let bogus = Packet::random(spec(), 2, &mut rng);
        let mut sum = inputs[0].clone();
        sum.add_assign(&inputs[1]).unwrap();
        // consistent degree-1 checks, then a corrupted pair check
        st.add_check(&[0], inputs[0].clone()).unwrap();
        st.add_check(&[1], inputs[1].clone()).unwrap();
        st.add_check(&[0, 1], bogus.clone()).unwrap();
        let r = st.run();
        if sum != bogus {
            assert!(matches!(r, Err(Error::Corruption(_))));
        }
    }
}
