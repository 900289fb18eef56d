//! Shared helpers for the integration and acceptance suites: random
//! instances and independent brute-force oracles.

#![allow(dead_code)]

use lcf_core::channel::{TransferMatrix, TransferMatrixDistribution};
use lcf_core::field::FieldSpec;
use lcf_core::lif::{ground_mask, MonotoneFamily};
use lcf_core::matrix::Matrix;
use rand::rngs::StdRng;
use rand::Rng;

/// The tuned degree distributions for the symmetric half-coupled two-user
/// design at eta = 0.98 (coefficients as published, mass not rescaled).
pub fn tuned_psi_a() -> Vec<(usize, f64)> {
    vec![(1, 0.1040), (2, 0.8362), (26, 0.0582), (27, 0.0007)]
}

pub fn tuned_psi_b() -> Vec<(usize, f64)> {
    vec![(1, 0.1133), (2, 0.7902), (13, 0.0662), (14, 0.0284), (15, 0.0020)]
}

/// Uniformly random full-column-rank transfer matrix by rejection.
pub fn random_transfer_matrix(
    l: usize,
    q: u8,
    rng: &mut StdRng,
) -> TransferMatrix {
    let spec = FieldSpec::new(q, 1).unwrap();
    loop {
        let b = rng.random_range(1..=l);
        let mut m = Matrix::zero(spec, l, b);
        for r in 0..l {
            for c in 0..b {
                m.set(r, c, rng.random_range(0..q as u16));
            }
        }
        if m.is_full_column_rank() {
            return TransferMatrix::new(m).unwrap();
        }
    }
}

/// Random distribution over a handful of random matrices (plus residual).
pub fn random_distribution(l: usize, q: u8, rng: &mut StdRng) -> TransferMatrixDistribution {
    let atoms = rng.random_range(2..=5);
    let mut weights: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum::<f64>() * (1.0 + rng.random::<f64>());
    for w in weights.iter_mut() {
        *w /= total;
    }
    let support: Vec<(TransferMatrix, f64)> = weights
        .into_iter()
        .map(|w| (random_transfer_matrix(l, q, rng), w))
        .collect();
    TransferMatrixDistribution::new(support).unwrap()
}

/// Brute-force LIF oracle: S is solvable for user `s` iff some column
/// combination of the unknown-row submatrix equals the unit vector at s.
/// Enumerates all q^B combination vectors directly.
pub fn gamma_star_oracle(h: &TransferMatrix, s: usize) -> MonotoneFamily {
    let m = h.matrix();
    let spec = m.spec();
    let field = spec.field();
    let l = m.rows();
    let b = m.cols();
    let q = spec.q() as u64;
    let mut fam = MonotoneFamily::empty(ground_mask(l, s));
    let members: Vec<usize> = (0..l).filter(|&u| u != s).collect();
    for pattern in 0u32..(1 << members.len()) {
        let mut set = 0u32;
        for (bit, &u) in members.iter().enumerate() {
            if pattern & (1 << bit) != 0 {
                set |= 1 << u;
            }
        }
        let unknown: Vec<usize> = (0..l).filter(|&u| set & (1 << u) == 0).collect();
        let target = unknown.iter().position(|&u| u == s).unwrap();
        let mut solvable = false;
        'combos: for combo in 0..q.pow(b as u32) {
            let mut w = Vec::with_capacity(b);
            let mut acc = combo;
            for _ in 0..b {
                w.push((acc % q) as u16);
                acc /= q;
            }
            for (i, &row) in unknown.iter().enumerate() {
                let mut v = 0u16;
                for (c, &wc) in w.iter().enumerate() {
                    v = field.add(v, field.mul(wc, m.get(row, c)));
                }
                let expect = if i == target { 1 } else { 0 };
                if v != expect {
                    continue 'combos;
                }
            }
            solvable = true;
            break;
        }
        if solvable {
            fam.insert(set);
        }
    }
    fam
}

/// Random upward-closed family over `l` users excluding `s`.
pub fn random_family(l: usize, s: usize, rng: &mut StdRng) -> MonotoneFamily {
    let ground = ground_mask(l, s);
    let members: Vec<u32> = (0..l as u32).filter(|&u| u as usize != s).collect();
    let gens = rng.random_range(0..=3);
    let mut fam = MonotoneFamily::empty(ground);
    for _ in 0..gens {
        let mut set = 0u32;
        for &u in &members {
            if rng.random::<f64>() < 0.5 {
                set |= 1 << u;
            }
        }
        fam.insert(set);
    }
    fam
}
