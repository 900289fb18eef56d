//! The generic round-based batched BP decoder, parameterized by a partial
//! LIF, plus the whole-system elimination oracle used on small instances.
//!
//! Each round runs two stages. Stage 1 peels every user's LT code on the
//! clean packets released so far. Stage 2 walks the batches: a user's coded
//! packet is released from a batch exactly when the set of already-known
//! embedded packets is a member of the instance's LIF family for that
//! (matrix, user) pair. A coded packet counts as known once it was resolved
//! by an earlier stage-2 round or once all of its LT neighbors are decoded.
//! Decoding stops when a round releases nothing new.

use crate::channel::Batch;
use crate::lif::{families_for, LifKind, MonotoneFamily};
use crate::lt::PeelingState;
use crate::packet::Packet;
use crate::trace::TraceHeader;
use crate::{Error, Result};
use std::collections::HashMap;

/// Which second-stage solver the decoder runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderInstance {
    /// Substitute known packets, then scan for single-user columns.
    Substitution,
    /// In-batch BP with the given iteration bound.
    Bp(usize),
    /// Per-batch Gaussian elimination.
    GaussianElimination,
}

impl DecoderInstance {
    pub fn lif_kind(self) -> LifKind {
        match self {
            DecoderInstance::Substitution => LifKind::Ordinary,
            DecoderInstance::Bp(i) => LifKind::Bp(i),
            DecoderInstance::GaussianElimination => LifKind::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub instance: DecoderInstance,
}

/// Summary of one decode session.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecodeReport {
    /// Rounds executed (stage-1/stage-2 pairs after the initial clean pass).
    pub rounds: usize,
    /// Clean packets available before round 1 (direct physical-layer output).
    pub initial_clean: usize,
    /// Stage-2 releases per round.
    pub releases_per_round: Vec<usize>,
    pub decoded_counts: Vec<usize>,
    pub decoded_fractions: Vec<f64>,
    /// Field-operation estimate (symbol and base-field operations).
    pub field_ops: u64,
}

#[derive(Debug)]
pub struct DecodeOutcome {
    pub report: DecodeReport,
    /// Per user, per input index: the recovered payload if decoded.
    pub recovered: Vec<Vec<Option<Packet>>>,
}

struct BatchState {
    families: std::sync::Arc<Vec<MonotoneFamily>>,
    known_mask: u32,
    released_mask: u32,
    adjusted: Vec<Packet>,
    known_payloads: Vec<Option<Packet>>,
    /// Per user: undecoded LT neighbors of the embedded coded packet.
    pending_neighbors: Vec<usize>,
}

/// One clean packet released for stage 1: (user, neighbor list, payload).
type Release = (usize, Vec<u32>, Packet);

pub fn decode(
    header: &TraceHeader,
    batches: &[Batch],
    config: &DecoderConfig,
) -> Result<DecodeOutcome> {
    let l = header.users;
    let spec = header.spec;
    let t = header.packet_len;
    if header.k.len() != l {
        return Err(Error::Config("header user count disagrees with K list".into()));
    }
    for b in batches {
        if b.matrix.users() != l || b.embedded.len() != l {
            return Err(Error::Config(format!(
                "batch at slot {} has {} users, trace header says {l}",
                b.slot,
                b.matrix.users()
            )));
        }
    }

    let mut ops: u64 = 0;
    let mut peeling: Vec<PeelingState> = header
        .k
        .iter()
        .map(|&k| PeelingState::new(spec, t, k as usize))
        .collect();

    // family cache keyed by the matrix contents
    let mut family_cache: HashMap<Vec<u16>, std::sync::Arc<Vec<MonotoneFamily>>> = HashMap::new();
    let kind = config.instance.lif_kind();

    // input (user, index) -> batches embedding it
    let mut incidence: Vec<Vec<Vec<u32>>> = header
        .k
        .iter()
        .map(|&k| vec![Vec::new(); k as usize])
        .collect();

    let mut states: Vec<BatchState> = Vec::with_capacity(batches.len());
    for (bi, b) in batches.iter().enumerate() {
        let key: Vec<u16> = {
            let m = b.matrix.matrix();
            let mut k = Vec::with_capacity(2 + m.rows() * m.cols());
            k.push(m.rows() as u16);
            k.push(m.cols() as u16);
            for r in 0..m.rows() {
                k.extend_from_slice(m.row(r));
            }
            k
        };
        let families = family_cache
            .entry(key)
            .or_insert_with(|| std::sync::Arc::new(families_for(&b.matrix, kind)))
            .clone();
        for (s, ns) in b.embedded.iter().enumerate() {
            for &n in ns {
                if n as u64 >= header.k[s] {
                    return Err(Error::Config(format!(
                        "batch at slot {} references input {n} beyond K", b.slot
                    )));
                }
                incidence[s][n as usize].push(bi as u32);
            }
        }
        states.push(BatchState {
            families,
            known_mask: 0,
            released_mask: 0,
            adjusted: b.outputs.clone(),
            known_payloads: vec![None; l],
            pending_neighbors: b.embedded.iter().map(|ns| ns.len()).collect(),
        });
    }

    let full_mask: u32 = ((1u64 << l) - 1) as u32;

    // mark user s known in batch bi with the given payload, substituting it
    // out of the adjusted outputs
    let substitute = |states: &mut Vec<BatchState>,
                      bi: usize,
                      s: usize,
                      payload: Packet,
                      ops: &mut u64|
     -> Result<()> {
        let st = &mut states[bi];
        if st.known_mask & (1 << s) != 0 {
            // already known through the other path: payloads must agree
            if st.known_payloads[s].as_ref() != Some(&payload) {
                return Err(Error::Corruption(format!(
                    "batch at slot {} disagrees on the value of user {}'s coded packet",
                    batches[bi].slot,
                    crate::channel::user_label(s)
                )));
            }
            return Ok(());
        }
        let hm = batches[bi].matrix.matrix();
        for col in 0..hm.cols() {
            let c = hm.get(s, col);
            if c != 0 {
                *ops += st.adjusted[col].sub_scaled_assign(c as u8, &payload)? as u64;
            }
        }
        st.known_mask |= 1 << s;
        st.known_payloads[s] = Some(payload);
        if st.known_mask == full_mask {
            for (col, u) in st.adjusted.iter().enumerate() {
                if !u.is_zero() {
                    return Err(Error::Corruption(format!(
                        "batch at slot {} output {col} inconsistent after full substitution",
                        batches[bi].slot
                    )));
                }
            }
        }
        Ok(())
    };

    // stage-2 evaluation of one batch against its current known set
    let evaluate = |states: &mut Vec<BatchState>,
                    bi: usize,
                    releases: &mut Vec<(u32, Release)>,
                    ops: &mut u64|
     -> Result<()> {
        let entry_mask = states[bi].known_mask;
        let eligible: Vec<usize> = (0..l)
            .filter(|&s| {
                let bit = 1u32 << s;
                entry_mask & bit == 0
                    && states[bi].released_mask & bit == 0
                    && states[bi].families[s].contains(entry_mask)
            })
            .collect();
        if eligible.is_empty() {
            return Ok(());
        }
        let unknown: Vec<usize> = (0..l).filter(|&u| entry_mask & (1 << u) == 0).collect();
        let hm = batches[bi].matrix.matrix();
        let sub = hm.select_rows(&unknown);
        let field = sub.spec().field();
        for s in eligible {
            let target = unknown.iter().position(|&u| u == s).unwrap();
            // cheap path first: a single-user column needs no elimination
            let singleton = (0..sub.cols()).find_map(|col| {
                let support = sub.column_support(col);
                if support == [target] {
                    let inv = field.inv(sub.get(target, col)).ok()?;
                    let mut w = vec![0u16; sub.cols()];
                    w[col] = inv;
                    Some(w)
                } else {
                    None
                }
            });
            let w = match singleton {
                Some(w) => w,
                None => {
                    *ops += (sub.rows() * sub.cols() * sub.cols()) as u64;
                    sub.solve_unit_combination(target).ok_or_else(|| {
                        Error::Corruption(format!(
                            "LIF table says user {} is solvable in batch at slot {}, elimination disagrees",
                            crate::channel::user_label(s),
                            batches[bi].slot
                        ))
                    })?
                }
            };
            let mut value = Packet::zero(spec, t);
            for (col, &c) in w.iter().enumerate() {
                if c != 0 {
                    *ops += value.sub_scaled_assign(
                        spec.field().neg(c) as u8, // add c * adjusted
                        &states[bi].adjusted[col],
                    )? as u64;
                }
            }
            states[bi].released_mask |= 1 << s;
            releases.push((bi as u32, (s, batches[bi].embedded[s].clone(), value)));
        }
        Ok(())
    };

    // initial pass: physical-layer clean packets (and, for the elimination
    // instance, anything solvable from an empty known set)
    let mut pending: Vec<(u32, Release)> = Vec::new();
    for bi in 0..states.len() {
        evaluate(&mut states, bi, &mut pending, &mut ops)?;
    }
    let initial_clean = pending.len();

    let mut releases_per_round = Vec::new();
    let mut rounds = 0usize;
    while !pending.is_empty() {
        rounds += 1;
        // stage 1: feed releases as LT checks and peel to exhaustion
        let mut dirty: Vec<u32> = Vec::new();
        let mut dirty_flags = vec![false; states.len()];
        for (bi, (s, neighbors, payload)) in pending.drain(..) {
            // the release resolves this batch's own packet for later rounds
            substitute(&mut states, bi as usize, s, payload.clone(), &mut ops)?;
            if !dirty_flags[bi as usize] {
                dirty_flags[bi as usize] = true;
                dirty.push(bi);
            }
            peeling[s].add_check(&neighbors, payload)?;
        }
        for s in 0..l {
            let newly = peeling[s].run()?;
            for idx in newly {
                for &bi in &incidence[s][idx as usize] {
                    let st = &mut states[bi as usize];
                    st.pending_neighbors[s] -= 1;
                    if st.pending_neighbors[s] == 0 {
                        // coded packet is a combination of decoded inputs
                        let mut payload = Packet::zero(spec, t);
                        for &n in &batches[bi as usize].embedded[s] {
                            ops += payload
                                .add_assign(peeling[s].decoded(n as usize).expect("decoded"))?
                                as u64;
                        }
                        substitute(&mut states, bi as usize, s, payload, &mut ops)?;
                        if !dirty_flags[bi as usize] {
                            dirty_flags[bi as usize] = true;
                            dirty.push(bi);
                        }
                    }
                }
            }
        }
        // stage 2 over batches whose known set changed
        for bi in dirty {
            evaluate(&mut states, bi as usize, &mut pending, &mut ops)?;
        }
        releases_per_round.push(pending.len());
    }

    for p in &peeling {
        ops += p.ops();
    }
    let decoded_counts: Vec<usize> = peeling.iter().map(|p| p.decoded_count()).collect();
    let decoded_fractions: Vec<f64> = peeling
        .iter()
        .map(|p| p.decoded_fraction())
        .collect();
    Ok(DecodeOutcome {
        report: DecodeReport {
            rounds,
            initial_clean,
            releases_per_round,
            decoded_counts,
            decoded_fractions,
            field_ops: ops,
        },
        recovered: peeling.into_iter().map(|p| p.into_decoded()).collect(),
    })
}

/// Resolves everything currently solvable in one batch: substitutes the
/// known payloads, then releases every user `s` not in `known` whose family
/// contains the known set. Returns the newly resolved (user, payload) pairs.
pub fn resolve_batch(
    batch: &Batch,
    known: &[(usize, Packet)],
    families: &[MonotoneFamily],
) -> Result<Vec<(usize, Packet)>> {
    let l = batch.matrix.users();
    let targets: Vec<usize> = {
        let mask = known.iter().fold(0u32, |m, &(s, _)| m | (1 << s));
        (0..l)
            .filter(|&s| mask & (1 << s) == 0 && families[s].contains(mask))
            .collect()
    };
    resolve_users(batch, known, families, &targets)
}

/// Like [`resolve_batch`] but for explicit targets; requesting a user whose
/// family does not contain the known set is a contract violation.
pub fn resolve_users(
    batch: &Batch,
    known: &[(usize, Packet)],
    families: &[MonotoneFamily],
    targets: &[usize],
) -> Result<Vec<(usize, Packet)>> {
    let l = batch.matrix.users();
    let hm = batch.matrix.matrix();
    let spec = hm.spec();
    let mut known_mask = 0u32;
    let mut adjusted = batch.outputs.clone();
    for (s, payload) in known {
        known_mask |= 1 << s;
        for col in 0..hm.cols() {
            let c = hm.get(*s, col);
            if c != 0 {
                adjusted[col].sub_scaled_assign(c as u8, payload)?;
            }
        }
    }
    let unknown: Vec<usize> = (0..l).filter(|&u| known_mask & (1 << u) == 0).collect();
    let sub = hm.select_rows(&unknown);
    let mut out = Vec::new();
    for &s in targets {
        if known_mask & (1 << s) != 0 {
            return Err(Error::InvalidArgument(format!(
                "user {} is already known",
                crate::channel::user_label(s)
            )));
        }
        if !families[s].contains(known_mask) {
            return Err(Error::InvalidArgument(format!(
                "contract violation: known set is not in gamma for user {}",
                crate::channel::user_label(s)
            )));
        }
        let target = unknown.iter().position(|&u| u == s).unwrap();
        let w = sub
            .solve_unit_combination(target)
            .ok_or_else(|| Error::Corruption("family admits an unsolvable release".into()))?;
        let packet_len = batch.outputs.first().map_or(0, |p| p.len());
        let mut value = Packet::zero(spec_ext(batch), packet_len);
        for (col, &c) in w.iter().enumerate() {
            if c != 0 {
                value.sub_scaled_assign(spec.field().neg(c) as u8, &adjusted[col])?;
            }
        }
        out.push((s, value));
    }
    Ok(out)
}

fn spec_ext(batch: &Batch) -> crate::field::FieldSpec {
    batch
        .outputs
        .first()
        .map(|p| p.spec())
        .unwrap_or_else(|| batch.matrix.matrix().spec())
}

/// Small-instance oracle: stacks every batch into one global linear system
/// over all input packets and row-reduces it; returns every input packet the
/// whole system determines uniquely.
pub fn whole_system_ge_reference(
    header: &TraceHeader,
    batches: &[Batch],
) -> Result<Vec<Vec<Option<Packet>>>> {
    let l = header.users;
    let total_k: u64 = header.k.iter().sum();
    if total_k > 64 {
        return Err(Error::InvalidArgument(format!(
            "whole-system reference is for small instances (sum K <= 64), got {total_k}"
        )));
    }
    let nvars = total_k as usize;
    let offsets: Vec<usize> = header
        .k
        .iter()
        .scan(0usize, |acc, &k| {
            let o = *acc;
            *acc += k as usize;
            Some(o)
        })
        .collect();
    let base = header.spec.base();
    let field = base.field();
    let mut rows: Vec<Vec<u16>> = Vec::new();
    let mut rhs: Vec<Packet> = Vec::new();
    for b in batches {
        let hm = b.matrix.matrix();
        for col in 0..hm.cols() {
            let mut row = vec![0u16; nvars];
            for s in 0..l {
                let c = hm.get(s, col);
                if c == 0 {
                    continue;
                }
                for &n in &b.embedded[s] {
                    row[offsets[s] + n as usize] = field.add(row[offsets[s] + n as usize], c);
                }
            }
            rows.push(row);
            rhs.push(b.outputs[col].clone());
        }
    }
    // Gauss-Jordan over the base field with packet right-hand sides
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; nvars];
    let mut rank = 0usize;
    for col in 0..nvars {
        let Some(pr) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pr);
        rhs.swap(rank, pr);
        let inv = field.inv(rows[rank][col])?;
        if inv != 1 {
            for v in rows[rank].iter_mut() {
                *v = field.mul(inv, *v);
            }
            rhs[rank].scale_assign(inv as u8);
        }
        for r in 0..rows.len() {
            if r == rank || rows[r][col] == 0 {
                continue;
            }
            let c = rows[r][col];
            let (head, tail) = if r < rank {
                let (a, b) = rows.split_at_mut(rank);
                (&mut a[r], &b[0])
            } else {
                let (a, b) = rows.split_at_mut(r);
                (&mut b[0], &a[rank])
            };
            for (x, &y) in head.iter_mut().zip(tail.iter()) {
                *x = field.sub(*x, field.mul(c, y));
            }
            let pivot_rhs = rhs[rank].clone();
            rhs[r].sub_scaled_assign(c as u8, &pivot_rhs)?;
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // consistency: zero rows must have zero rhs
    for r in rank..rows.len() {
        if rows[r].iter().all(|&v| v == 0) && !rhs[r].is_zero() {
            return Err(Error::Corruption(
                "whole-system reference found an inconsistent trace".into(),
            ));
        }
    }
    let mut out: Vec<Vec<Option<Packet>>> = header
        .k
        .iter()
        .map(|&k| vec![None; k as usize])
        .collect();
    for (col, pivot) in pivot_of_col.iter().enumerate() {
        let Some(r) = pivot else { continue };
        // determined iff the pivot row is zero outside its pivot column
        if rows[*r]
            .iter()
            .enumerate()
            .all(|(j, &v)| j == col || v == 0)
        {
            let user = (0..l)
                .rfind(|&s| offsets[s] <= col)
                .expect("column maps to a user");
            out[user][col - offsets[user]] = Some(rhs[*r].clone());
        }
    }
    Ok(out)
}
