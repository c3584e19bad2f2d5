//! Arithmetic over binary extension fields GF(2^r), 1 <= r <= 16.
//!
//! Elements are plain `u16` values wrapped in [`Fe`]; the [`Field`] they belong
//! to carries the log/antilog tables and performs every operation. Addition is
//! XOR, so every element is its own additive inverse.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_BITS: u32 = 16;

/// Primitive polynomials per degree (bit i is the coefficient of x^i).
const DEFAULT_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GaloisError {
    #[error("unsupported field size r = {0} (must be 1..=16)")]
    UnsupportedBits(u32),
    #[error("polynomial {poly:#x} is not of degree {bits}")]
    WrongDegree { poly: u32, bits: u32 },
    #[error("polynomial {0:#x} is reducible over GF(2)")]
    Reducible(u32),
    #[error("value {value} is not an element of GF(2^{bits})")]
    NotInField { value: u32, bits: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("zero cannot be raised to a negative power")]
    ZeroNegativePower,
    #[error("log/antilog table disagrees with carryless multiplication at {a} * {b}")]
    TableMismatch { a: u32, b: u32 },
}

/// A field element. Only meaningful together with the [`Field`] that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fe(pub u16);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

// characteristic 2: addition is XOR
#[allow(clippy::suspicious_arithmetic_impl)]
impl std::ops::Add for Fe {
    type Output = Fe;
    #[inline]
    fn add(self, rhs: Fe) -> Fe {
        Fe(self.0 ^ rhs.0)
    }
}

#[allow(clippy::suspicious_op_assign_impl)]
impl std::ops::AddAssign for Fe {
    #[inline]
    fn add_assign(&mut self, rhs: Fe) {
        self.0 ^= rhs.0;
    }
}

/// Static description of a field: degree, reduction polynomial and generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub bits: u32,
    pub poly: u32,
    pub generator: u16,
}

struct Tables {
    spec: FieldSpec,
    order: u32,
    // exp has 2 * (q - 1) entries so log sums need no reduction.
    exp: Vec<u16>,
    log: Vec<u16>,
}

/// GF(2^r) with precomputed tables. Cloning is cheap and the tables are shared.
#[derive(Clone)]
pub struct Field {
    inner: Arc<Tables>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}; poly={:#x})", self.bits(), self.poly())
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Field) -> bool {
        self.inner.spec == other.inner.spec
    }
}

impl Eq for Field {}

/// Polynomial product over GF(2) followed by reduction modulo `poly`.
pub fn carryless_mul_mod(a: u32, b: u32, poly: u32, bits: u32) -> u32 {
    let mut acc: u64 = 0;
    let mut a = a as u64;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    let poly = poly as u64;
    for shift in (0..bits).rev() {
        if acc & (1 << (shift + bits)) != 0 {
            acc ^= poly << shift;
        }
    }
    acc as u32
}

fn poly_degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn poly_rem_gf2(mut a: u32, b: u32) -> u32 {
    let db = poly_degree(b);
    while a != 0 && poly_degree(a) >= db {
        a ^= b << (poly_degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
pub fn is_irreducible(poly: u32) -> bool {
    let deg = poly_degree(poly);
    if deg < 1 {
        return false;
    }
    let limit = 1u32 << (deg / 2 + 1);
    (2..limit).all(|d| poly_rem_gf2(poly, d) != 0)
}

impl Field {
    /// GF(2^bits) with the crate's default primitive polynomial.
    pub fn new(bits: u32) -> Result<Field, GaloisError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(GaloisError::UnsupportedBits(bits));
        }
        Field::with_poly(bits, DEFAULT_POLYS[bits as usize])
    }

    /// GF(2^8) with x^8+x^4+x^3+x^2+1.
    pub fn gf256() -> Field {
        Field::new(8).expect("default GF(2^8)")
    }

    /// GF(2^16) with x^16+x^12+x^3+x+1.
    pub fn gf65536() -> Field {
        Field::new(16).expect("default GF(2^16)")
    }

    pub fn with_poly(bits: u32, poly: u32) -> Result<Field, GaloisError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(GaloisError::UnsupportedBits(bits));
        }
        if poly_degree(poly) != bits as i32 {
            return Err(GaloisError::WrongDegree { poly, bits });
        }
        if !is_irreducible(poly) {
            return Err(GaloisError::Reducible(poly));
        }
        let q = 1u32 << bits;
        let order = q - 1;
        // Smallest element of full multiplicative order.
        let generator = (1..q)
            .find(|&g| multiplicative_order(g, poly, bits) == order)
            .expect("an irreducible polynomial yields a cyclic multiplicative group");

        let mut exp = vec![0u16; 2 * order as usize];
        let mut log = vec![0u16; q as usize];
        let mut x = 1u32;
        for i in 0..order {
            exp[i as usize] = x as u16;
            exp[(i + order) as usize] = x as u16;
            log[x as usize] = i as u16;
            x = carryless_mul_mod(x, generator, poly, bits);
        }
        let field = Field {
            inner: Arc::new(Tables {
                spec: FieldSpec {
                    bits,
                    poly,
                    generator: generator as u16,
                },
                order,
                exp,
                log,
            }),
        };
        field.self_check()?;
        Ok(field)
    }

    /// Cross-check the tables against carryless multiplication: every pair for
    /// small fields, a deterministic stride of pairs for the rest.
    fn self_check(&self) -> Result<(), GaloisError> {
        let q = self.size();
        let (bits, poly) = (self.bits(), self.poly());
        let step = if bits <= 8 { 1 } else { (q / 97).max(1) | 1 };
        let mut a = 0u32;
        while a < q {
            let mut b = 0u32;
            while b < q {
                let want = carryless_mul_mod(a, b, poly, bits);
                if self.mul(Fe(a as u16), Fe(b as u16)).0 as u32 != want {
                    return Err(GaloisError::TableMismatch { a, b });
                }
                b += step;
            }
            a += step;
        }
        Ok(())
    }

    pub fn spec(&self) -> FieldSpec {
        self.inner.spec
    }

    pub fn bits(&self) -> u32 {
        self.inner.spec.bits
    }

    pub fn poly(&self) -> u32 {
        self.inner.spec.poly
    }

    /// Number of elements q = 2^r.
    pub fn size(&self) -> u32 {
        1 << self.inner.spec.bits
    }

    /// The primitive element alpha used for the tables.
    pub fn generator(&self) -> Fe {
        Fe(self.inner.spec.generator)
    }

    pub fn contains(&self, a: Fe) -> bool {
        (a.0 as u32) < self.size()
    }

    pub fn element(&self, value: u32) -> Result<Fe, GaloisError> {
        if value < self.size() {
            Ok(Fe(value as u16))
        } else {
            Err(GaloisError::NotInField {
                value,
                bits: self.bits(),
            })
        }
    }

    fn check(&self, a: Fe) -> Result<(), GaloisError> {
        self.element(a.0 as u32).map(|_| ())
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        a + b
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a.0 == 0 || b.0 == 0 {
            return Fe::ZERO;
        }
        let t = &self.inner;
        Fe(t.exp[t.log[a.0 as usize] as usize + t.log[b.0 as usize] as usize])
    }

    pub fn inv(&self, a: Fe) -> Result<Fe, GaloisError> {
        if a.0 == 0 {
            return Err(GaloisError::ZeroInverse);
        }
        let t = &self.inner;
        let l = t.log[a.0 as usize] as u32;
        Ok(Fe(t.exp[((t.order - l) % t.order) as usize]))
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe, GaloisError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Fe, k: i64) -> Result<Fe, GaloisError> {
        if k == 0 {
            return Ok(Fe::ONE);
        }
        if a.0 == 0 {
            return if k < 0 {
                Err(GaloisError::ZeroNegativePower)
            } else {
                Ok(Fe::ZERO)
            };
        }
        let t = &self.inner;
        let order = t.order as i64;
        let e = (t.log[a.0 as usize] as i64 * k).rem_euclid(order);
        Ok(Fe(t.exp[e as usize]))
    }

    /// alpha^k for any integer k.
    pub fn exp(&self, k: i64) -> Fe {
        let t = &self.inner;
        Fe(t.exp[k.rem_euclid(t.order as i64) as usize])
    }

    /// Discrete log base alpha; `None` for zero.
    pub fn log(&self, a: Fe) -> Option<u32> {
        (a.0 != 0).then(|| self.inner.log[a.0 as usize] as u32)
    }

    pub fn checked_add(&self, a: Fe, b: Fe) -> Result<Fe, GaloisError> {
        self.check(a)?;
        self.check(b)?;
        Ok(a + b)
    }

    pub fn checked_mul(&self, a: Fe, b: Fe) -> Result<Fe, GaloisError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    /// All field elements in value order.
    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.size()).map(|v| Fe(v as u16))
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fe> {
        (1..self.size()).map(|v| Fe(v as u16))
    }
}

fn multiplicative_order(g: u32, poly: u32, bits: u32) -> u32 {
    let mut x = g;
    let mut k = 1;
    while x != 1 {
        x = carryless_mul_mod(x, g, poly, bits);
        k += 1;
        if k > (1 << bits) {
            return 0;
        }
    }
    k
}
