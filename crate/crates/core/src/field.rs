//! Arithmetic over the base field GF(q) and extension fields GF(q^m).
//!
//! Elements are stored as `u16` encodings of their polynomial-basis digit
//! vectors: a value `v` encodes the polynomial `c_0 + c_1 x + ... +
//! c_{m-1} x^{m-1}` where `v = sum c_i q^i`. Addition is digit-wise mod q
//! (plain xor for q = 2); multiplication goes through precomputed
//! discrete-log tables, sized for q^m up to 2^16.
//!
//! The reduction polynomial for each (q, m) is pinned deterministically: the
//! monic degree-m polynomial whose non-leading coefficient encoding is the
//! smallest integer making it irreducible. The generator for the log tables
//! is the smallest-encoding primitive element under that polynomial. Pinned
//! values for common fields (encodings of the non-leading coefficients):
//!
//! | field    | reduction polynomial        | encoding |
//! |----------|-----------------------------|----------|
//! | GF(2^4)  | x^4 + x + 1                 | 3        |
//! | GF(2^8)  | x^8 + x^4 + x^3 + x + 1     | 27       |
//! | GF(2^16) | x^16 + x^5 + x^3 + x + 1    | 43       |
//! | GF(3^2)  | x^2 + 1                     | 1        |
//! | GF(5^2)  | x^2 + 2                     | 2        |
//! | GF(7^2)  | x^2 + 1                     | 1        |

use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Primes accepted as base-field orders.
pub const SUPPORTED_PRIMES: [u8; 4] = [2, 3, 5, 7];

/// Identifies a field GF(q^m): prime base order `q`, extension degree `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldSpec {
    q: u8,
    m: u8,
}

impl FieldSpec {
    /// Validates and builds a field specification. Requires a supported
    /// prime q, m >= 1 and q^m <= 2^16.
    pub fn new(q: u8, m: u8) -> Result<Self> {
        if !SUPPORTED_PRIMES.contains(&q) {
            return Err(Error::Config(format!(
                "base field order must be one of {SUPPORTED_PRIMES:?}, got {q}"
            )));
        }
        if m == 0 {
            return Err(Error::Config("extension degree must be >= 1".into()));
        }
        let mut size: u64 = 1;
        for _ in 0..m {
            size *= q as u64;
            if size > 65536 {
                return Err(Error::Config(format!("field size {q}^{m} exceeds 2^16")));
            }
        }
        Ok(FieldSpec { q, m })
    }

    /// The base field GF(q) of this spec.
    pub fn base(self) -> FieldSpec {
        FieldSpec { q: self.q, m: 1 }
    }

    pub fn q(self) -> u8 {
        self.q
    }

    pub fn m(self) -> u8 {
        self.m
    }

    /// Number of elements q^m.
    pub fn size(self) -> u32 {
        (self.q as u32).pow(self.m as u32)
    }

    /// Bytes used per symbol in serialized payloads: 1 if q^m <= 256, else 2.
    pub fn symbol_width(self) -> usize {
        if self.size() <= 256 {
            1
        } else {
            2
        }
    }

    /// Shared arithmetic tables for this field.
    pub fn field(self) -> &'static Field {
        Field::get(self)
    }
}

impl std::fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.m == 1 {
            write!(f, "GF({})", self.q)
        } else {
            write!(f, "GF({}^{})", self.q, self.m)
        }
    }
}

// ---------------------------------------------------------------------------
// polynomial helpers over GF(q), coefficients LSB-first
// ---------------------------------------------------------------------------

fn poly_rem(mut f: Vec<u8>, g: &[u8], q: u8) -> Vec<u8> {
    let dg = g.len() - 1;
    loop {
        let mut df = f.len() - 1;
        while df > 0 && f[df] == 0 {
            df -= 1;
        }
        if df < dg || (df == 0 && f[0] == 0) {
            break;
        }
        let c = f[df];
        // g is monic: subtract c * x^(df-dg) * g
        for (i, &gi) in g.iter().enumerate() {
            let idx = df - dg + i;
            let v = (f[idx] as i32 - c as i32 * gi as i32).rem_euclid(q as i32);
            f[idx] = v as u8;
        }
    }
    f
}

fn decode_digits(mut enc: u32, len: usize, q: u8) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for d in out.iter_mut() {
        *d = (enc % q as u32) as u8;
        enc /= q as u32;
    }
    out
}

fn is_irreducible(low: &[u8], q: u8) -> bool {
    let m = low.len();
    let mut f = low.to_vec();
    f.push(1);
    for d in 1..=m / 2 {
        for genc in 0..(q as u32).pow(d as u32) {
            let mut g = decode_digits(genc, d, q);
            g.push(1);
            let r = poly_rem(f.clone(), &g, q);
            if r.iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Field tables
// ---------------------------------------------------------------------------

/// Precomputed arithmetic for one GF(q^m): exp/log tables plus the pinned
/// reduction polynomial. Obtained via [`FieldSpec::field`]; instances are
/// cached for the life of the process.
pub struct Field {
    spec: FieldSpec,
    size: u32,
    /// Non-leading coefficients of the reduction polynomial, LSB-first.
    reduction: Vec<u8>,
    generator: u16,
    exp: Vec<u16>,
    log: Vec<u32>,
    q: u32,
}

static REGISTRY: OnceLock<Mutex<HashMap<FieldSpec, &'static Field>>> = OnceLock::new();

impl Field {
    pub fn get(spec: FieldSpec) -> &'static Field {
        let reg = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = reg.lock().unwrap();
        if let Some(f) = map.get(&spec) {
            return f;
        }
        let field: &'static Field = Box::leak(Box::new(Field::build(spec)));
        map.insert(spec, field);
        field
    }

    fn build(spec: FieldSpec) -> Field {
        let q = spec.q as u32;
        let m = spec.m as usize;
        let size = spec.size();
        // pinned reduction polynomial: smallest encoding that is irreducible
        let reduction = if m == 1 {
            vec![0u8]
        } else {
            let mut found = None;
            for enc in 0..size {
                let low = decode_digits(enc, m, spec.q);
                if is_irreducible(&low, spec.q) {
                    found = Some(low);
                    break;
                }
            }
            found.expect("an irreducible polynomial of any degree exists over GF(q)")
        };

        let mut field = Field {
            spec,
            size,
            reduction,
            generator: 0,
            exp: Vec::new(),
            log: Vec::new(),
            q,
        };

        let n = size - 1; // multiplicative group order
        let factors = prime_factors(n);
        let mut generator = 1u16;
        for cand in 1..size {
            let c = cand as u16;
            if field.pow_slow(c, n) != field.one_value() {
                continue;
            }
            if factors.iter().all(|&p| field.pow_slow(c, n / p) != 1) {
                generator = c;
                break;
            }
        }
        field.generator = generator;

        let mut exp = vec![0u16; n.max(1) as usize];
        let mut log = vec![0u32; size as usize];
        let mut acc: u16 = 1;
        for (i, e) in exp.iter_mut().enumerate() {
            *e = acc;
            log[acc as usize] = i as u32;
            acc = field.mul_slow(acc, generator);
        }
        field.exp = exp;
        field.log = log;
        field
    }

    fn one_value(&self) -> u16 {
        1
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn generator(&self) -> u16 {
        self.generator
    }

    /// Non-leading coefficients of the pinned reduction polynomial, LSB-first.
    pub fn reduction_polynomial(&self) -> &[u8] {
        &self.reduction
    }

    /// Digit-wise addition mod q; xor when q = 2.
    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        if self.q == 2 {
            return a ^ b;
        }
        let mut out = 0u32;
        let mut pow = 1u32;
        let (mut a, mut b) = (a as u32, b as u32);
        while a != 0 || b != 0 {
            let d = (a % self.q + b % self.q) % self.q;
            out += d * pow;
            pow *= self.q;
            a /= self.q;
            b /= self.q;
        }
        out as u16
    }

    /// Digit-wise negation; identity when q = 2.
    #[inline]
    pub fn neg(&self, a: u16) -> u16 {
        if self.q == 2 {
            return a;
        }
        let mut out = 0u32;
        let mut pow = 1u32;
        let mut a = a as u32;
        while a != 0 {
            let d = (self.q - a % self.q) % self.q;
            out += d * pow;
            pow *= self.q;
            a /= self.q;
        }
        out as u16
    }

    #[inline]
    pub fn sub(&self, a: u16, b: u16) -> u16 {
        self.add(a, self.neg(b))
    }

    /// Table-based multiplication.
    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        let n = (self.size - 1) as u64;
        if n == 0 {
            return a; // GF(2): only nonzero element is 1
        }
        let idx = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % n;
        self.exp[idx as usize]
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: u16) -> Result<u16> {
        if a == 0 {
            return Err(Error::InvalidArgument("division by zero field element".into()));
        }
        let n = self.size - 1;
        if n == 0 {
            return Ok(a);
        }
        let idx = (n - self.log[a as usize]) % n;
        Ok(self.exp[idx as usize])
    }

    pub fn div(&self, a: u16, b: u16) -> Result<u16> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Polynomial-basis multiplication without tables; used to build them and
    /// as an independent reference in tests.
    pub fn mul_slow(&self, a: u16, b: u16) -> u16 {
        let m = self.spec.m as usize;
        let ad = decode_digits(a as u32, m, self.spec.q);
        let bd = decode_digits(b as u32, m, self.spec.q);
        let mut conv = vec![0u32; 2 * m];
        for (i, &ai) in ad.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            for (j, &bj) in bd.iter().enumerate() {
                conv[i + j] += ai as u32 * bj as u32;
            }
        }
        for c in conv.iter_mut() {
            *c %= self.q;
        }
        // reduce by x^m = -reduction
        for i in (m..2 * m).rev() {
            let c = conv[i];
            if c == 0 {
                continue;
            }
            conv[i] = 0;
            for (j, &rj) in self.reduction.iter().enumerate() {
                let idx = i - m + j;
                let v = (conv[idx] as i64 - c as i64 * rj as i64).rem_euclid(self.q as i64);
                conv[idx] = v as u32;
            }
        }
        let mut out = 0u32;
        for i in (0..m).rev() {
            out = out * self.q + conv[i];
        }
        out as u16
    }

    fn pow_slow(&self, base: u16, mut e: u32) -> u16 {
        let mut acc: u16 = 1;
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, b);
            }
            b = self.mul_slow(b, b);
            e >>= 1;
        }
        acc
    }

    /// Embeds a base-field scalar c in [0, q) into this field (as the
    /// constant polynomial c).
    #[inline]
    pub fn embed_base(&self, c: u8) -> u16 {
        debug_assert!((c as u32) < self.q);
        c as u16
    }
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// ---------------------------------------------------------------------------
// Symbol
// ---------------------------------------------------------------------------

/// One element of GF(q^m), tagged with its field spec so cross-field
/// arithmetic is caught as a configuration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol {
    spec: FieldSpec,
    value: u16,
}

impl Symbol {
    pub fn new(spec: FieldSpec, value: u16) -> Result<Self> {
        if value as u32 >= spec.size() {
            return Err(Error::Config(format!(
                "symbol value {value} out of range for {spec}"
            )));
        }
        Ok(Symbol { spec, value })
    }

    pub fn zero(spec: FieldSpec) -> Self {
        Symbol { spec, value: 0 }
    }

    pub fn one(spec: FieldSpec) -> Self {
        Symbol { spec, value: 1 }
    }

    pub fn value(self) -> u16 {
        self.value
    }

    pub fn spec(self) -> FieldSpec {
        self.spec
    }

    fn check(self, other: Symbol) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::FieldMismatch {
                expected: (self.spec.q, self.spec.m),
                got: (other.spec.q, other.spec.m),
            });
        }
        Ok(())
    }

    pub fn checked_add(self, other: Symbol) -> Result<Symbol> {
        self.check(other)?;
        Ok(Symbol {
            spec: self.spec,
            value: self.spec.field().add(self.value, other.value),
        })
    }

    pub fn checked_sub(self, other: Symbol) -> Result<Symbol> {
        self.check(other)?;
        Ok(Symbol {
            spec: self.spec,
            value: self.spec.field().sub(self.value, other.value),
        })
    }

    pub fn checked_mul(self, other: Symbol) -> Result<Symbol> {
        self.check(other)?;
        Ok(Symbol {
            spec: self.spec,
            value: self.spec.field().mul(self.value, other.value),
        })
    }

    pub fn checked_div(self, other: Symbol) -> Result<Symbol> {
        self.check(other)?;
        Ok(Symbol {
            spec: self.spec,
            value: self.spec.field().div(self.value, other.value)?,
        })
    }

    pub fn inv(self) -> Result<Symbol> {
        Ok(Symbol {
            spec: self.spec,
            value: self.spec.field().inv(self.value)?,
        })
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }
}

impl std::ops::Add for Symbol {
    type Output = Symbol;
    fn add(self, rhs: Symbol) -> Symbol {
        self.checked_add(rhs).expect("symbol field mismatch")
    }
}

impl std::ops::Sub for Symbol {
    type Output = Symbol;
    fn sub(self, rhs: Symbol) -> Symbol {
        self.checked_sub(rhs).expect("symbol field mismatch")
    }
}

impl std::ops::Mul for Symbol {
    type Output = Symbol;
    fn mul(self, rhs: Symbol) -> Symbol {
        self.checked_mul(rhs).expect("symbol field mismatch")
    }
}
