//! Binary batch-trace format: a header carrying the system parameters
//! followed by one record per non-empty batch.
//!
//! Layout (little-endian):
//! - magic `LCFT`, format version u16
//! - L u8, q u8, m u8
//! - T u32 (symbols per packet), N u64 (timeslots), batch count u64
//! - per user: K_s u64
//! - per batch: slot u64, B u8, L*B matrix digits (one byte each,
//!   row-major), then per user degree u16 + that many u32 neighbor indices,
//!   then B payloads of T symbols (1 or 2 bytes per symbol by field size).

use crate::channel::{Batch, TransferMatrix};
use crate::field::FieldSpec;
use crate::matrix::Matrix;
use crate::packet::Packet;
use crate::{Error, Result};

pub const TRACE_MAGIC: [u8; 4] = *b"LCFT";
pub const TRACE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub spec: FieldSpec,
    pub users: usize,
    pub packet_len: usize,
    pub slots: u64,
    pub k: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub header: TraceHeader,
    pub batches: Vec<Batch>,
}

pub fn write_trace(header: &TraceHeader, batches: &[Batch]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.push(header.users as u8);
    out.push(header.spec.q());
    out.push(header.spec.m());
    out.extend_from_slice(&(header.packet_len as u32).to_le_bytes());
    out.extend_from_slice(&header.slots.to_le_bytes());
    out.extend_from_slice(&(batches.len() as u64).to_le_bytes());
    for &k in &header.k {
        out.extend_from_slice(&k.to_le_bytes());
    }
    for b in batches {
        out.extend_from_slice(&b.slot.to_le_bytes());
        let cols = b.matrix.outputs();
        out.push(cols as u8);
        for r in 0..header.users {
            for c in 0..cols {
                out.push(b.matrix.matrix().get(r, c) as u8);
            }
        }
        for neighbors in &b.embedded {
            out.extend_from_slice(&(neighbors.len() as u16).to_le_bytes());
            for &n in neighbors {
                out.extend_from_slice(&n.to_le_bytes());
            }
        }
        for u in &b.outputs {
            u.write_bytes(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Parse {
                offset: self.pos,
                message: format!("truncated while reading {what}"),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let s = self.take(2, what)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let s = self.take(4, what)?;
        Ok(u32::from_le_bytes(s.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let s = self.take(8, what)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }
}

pub fn read_trace(data: &[u8]) -> Result<Trace> {
    let mut r = Reader { data, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != TRACE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "not a batch trace (bad magic)".into(),
        });
    }
    let version = r.u16("version")?;
    if version != TRACE_VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported trace version {version}, expected {TRACE_VERSION}"),
        });
    }
    let users = r.u8("user count")? as usize;
    let q = r.u8("field q")?;
    let m = r.u8("field m")?;
    let spec = FieldSpec::new(q, m).map_err(|e| Error::Parse {
        offset: r.pos,
        message: e.to_string(),
    })?;
    let packet_len = r.u32("packet length")? as usize;
    let slots = r.u64("slot count")?;
    let batch_count = r.u64("batch count")?;
    let mut k = Vec::with_capacity(users);
    for _ in 0..users {
        k.push(r.u64("per-user k")?);
    }
    let header = TraceHeader {
        spec,
        users,
        packet_len,
        slots,
        k,
    };
    let mut batches = Vec::with_capacity(batch_count.min(1 << 24) as usize);
    for _ in 0..batch_count {
        let slot = r.u64("batch slot")?;
        let cols = r.u8("batch width")? as usize;
        if cols == 0 || cols > users {
            return Err(Error::Parse {
                offset: r.pos - 1,
                message: format!("batch width {cols} out of range"),
            });
        }
        let mut mat = Matrix::zero(spec.base(), users, cols);
        for row in 0..users {
            for col in 0..cols {
                let d = r.u8("matrix digit")?;
                if d as u32 >= q as u32 {
                    return Err(Error::Parse {
                        offset: r.pos - 1,
                        message: format!("matrix digit {d} out of range for GF({q})"),
                    });
                }
                mat.set(row, col, d as u16);
            }
        }
        let matrix = TransferMatrix::new(mat).map_err(|e| Error::Parse {
            offset: r.pos,
            message: e.to_string(),
        })?;
        let mut embedded = Vec::with_capacity(users);
        for u in 0..users {
            let deg = r.u16("degree")? as usize;
            let mut ns = Vec::with_capacity(deg);
            for _ in 0..deg {
                let idx = r.u32("neighbor index")?;
                if idx as u64 >= header.k[u] {
                    return Err(Error::Parse {
                        offset: r.pos - 4,
                        message: format!("neighbor {idx} out of range for K={}", header.k[u]),
                    });
                }
                ns.push(idx);
            }
            embedded.push(ns);
        }
        let width = spec.symbol_width();
        let mut outputs = Vec::with_capacity(cols);
        for _ in 0..cols {
            let start = r.pos;
            let bytes = r.take(packet_len * width, "payload")?;
            outputs.push(Packet::from_bytes(spec, packet_len, bytes).map_err(|e| {
                Error::Parse {
                    offset: start,
                    message: e.to_string(),
                }
            })?);
        }
        batches.push(Batch {
            slot,
            matrix,
            embedded,
            outputs,
        });
    }
    if r.pos != data.len() {
        return Err(Error::Parse {
            offset: r.pos,
            message: "trailing bytes after the final batch".into(),
        });
    }
    Ok(Trace { header, batches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_batches, CountMode, TransferMatrixDistribution, UserConfig};
    use crate::lt::{DegreeDistribution, DegreeSchedule};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn sample_trace() -> (TraceHeader, Vec<Batch>) {
        let spec = FieldSpec::new(2, 8).unwrap();
        let mut rng = StdRng::seed_from_u64(10);
        let inputs: Vec<Vec<Packet>> = (0..2)
            .map(|_| (0..20).map(|_| Packet::random(spec, 3, &mut rng)).collect())
            .collect();
        let users: Vec<UserConfig> = (0..2)
            .map(|_| UserConfig {
                dist: DegreeDistribution::from_pairs(&[(1, 0.3), (2, 0.7)]).unwrap(),
                schedule: DegreeSchedule::Iid,
            })
            .collect();
        let g =
            TransferMatrixDistribution::from_catalog_probs(2, 2, &[0.25, 0.25, 0.25, 0.2]).unwrap();
        let batches = generate_batches(&inputs, &users, &g, 40, CountMode::Exact, &mut rng).unwrap();
        (
            TraceHeader {
                spec,
                users: 2,
                packet_len: 3,
                slots: 40,
                k: vec![20, 20],
            },
            batches,
        )
    }

    #[test]
    fn roundtrip() {
        let (header, batches) = sample_trace();
        let bytes = write_trace(&header, &batches);
        let trace = read_trace(&bytes).unwrap();
        assert_eq!(trace.header, header);
        assert_eq!(trace.batches.len(), batches.len());
        for (a, b) in trace.batches.iter().zip(&batches) {
            assert_eq!(a.slot, b.slot);
            assert_eq!(a.matrix, b.matrix);
            assert_eq!(a.embedded, b.embedded);
            assert_eq!(a.outputs, b.outputs);
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let (header, batches) = sample_trace();
        let bytes = write_trace(&header, &batches);
        for cut in [3usize, 10, 40, bytes.len() - 1] {
            match read_trace(&bytes[..cut]) {
                Err(Error::Parse { offset, .. }) => assert!(offset <= cut),
                other => panic!("expected parse error at cut {cut}, got {other:?}"),
            }
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let (header, batches) = sample_trace();
        let mut bytes = write_trace(&header, &batches);
        bytes[4] = 9;
        match read_trace(&bytes) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("version")),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
