//! Packets: column vectors of T symbols over GF(q^m), the unit of encoding
//! and transmission. Symbol-wise arithmetic distributes over the vector.

use crate::field::FieldSpec;
use crate::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Packet {
    spec: FieldSpec,
    data: Vec<u16>,
}

impl Packet {
    pub fn zero(spec: FieldSpec, len: usize) -> Self {
        Packet {
            spec,
            data: vec![0; len],
        }
    }

    pub fn from_values(spec: FieldSpec, data: Vec<u16>) -> Result<Self> {
        let size = spec.size();
        if let Some(&bad) = data.iter().find(|&&v| v as u32 >= size) {
            return Err(Error::Config(format!("symbol {bad} out of range for {spec}")));
        }
        Ok(Packet { spec, data })
    }

    pub fn random<R: Rng + ?Sized>(spec: FieldSpec, len: usize, rng: &mut R) -> Self {
        let size = spec.size();
        Packet {
            spec,
            data: (0..len).map(|_| rng.random_range(0..size) as u16).collect(),
        }
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[u16] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    fn check(&self, other: &Packet) -> Result<()> {
        if self.spec != other.spec || self.data.len() != other.data.len() {
            return Err(Error::InvalidArgument(
                "packet spec/length mismatch in arithmetic".into(),
            ));
        }
        Ok(())
    }

    /// self += other, symbol-wise. Returns the number of field operations.
    pub fn add_assign(&mut self, other: &Packet) -> Result<usize> {
        self.check(other)?;
        let f = self.spec.field();
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = f.add(*a, b);
        }
        Ok(self.data.len())
    }

    /// self -= other, symbol-wise. Returns the number of field operations.
    pub fn sub_assign(&mut self, other: &Packet) -> Result<usize> {
        self.check(other)?;
        let f = self.spec.field();
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = f.sub(*a, b);
        }
        Ok(self.data.len())
    }

    /// self -= c * other where c is a base-field scalar in [0, q).
    /// Returns the number of field operations.
    pub fn sub_scaled_assign(&mut self, c: u8, other: &Packet) -> Result<usize> {
        if c == 0 {
            return Ok(0);
        }
        self.check(other)?;
        let f = self.spec.field();
        let cv = f.embed_base(c);
        if cv == 1 {
            return self.sub_assign(other);
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = f.sub(*a, f.mul(cv, b));
        }
        Ok(2 * self.data.len())
    }

    /// self *= c for a base-field scalar. Returns field-operation count.
    pub fn scale_assign(&mut self, c: u8) -> usize {
        let f = self.spec.field();
        let cv = f.embed_base(c);
        if cv == 1 {
            return 0;
        }
        for a in self.data.iter_mut() {
            *a = f.mul(cv, *a);
        }
        self.data.len()
    }

    /// Serialized byte length for this packet.
    pub fn byte_len(&self) -> usize {
        self.data.len() * self.spec.symbol_width()
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        if self.spec.symbol_width() == 1 {
            out.extend(self.data.iter().map(|&v| v as u8));
        } else {
            for &v in &self.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub fn from_bytes(spec: FieldSpec, len: usize, bytes: &[u8]) -> Result<Self> {
        let width = spec.symbol_width();
        if bytes.len() != len * width {
            return Err(Error::Parse {
                offset: 0,
                message: format!("expected {} payload bytes, got {}", len * width, bytes.len()),
            });
        }
        let data: Vec<u16> = if width == 1 {
            bytes.iter().map(|&b| b as u16).collect()
        } else {
            bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        };
        Packet::from_values(spec, data)
    }
}
