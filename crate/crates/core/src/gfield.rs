//! GF(2^m) arithmetic over exp/log tables.
//!
//! Elements are represented in the polynomial basis as integers in
//! `[0, 2^m)`; addition is XOR and multiplication goes through the discrete
//! log with respect to the primitive element `x`.

use std::fmt;

use thiserror::Error;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 10;

/// Default primitive polynomials, indexed by `m`.
const DEFAULT_POLYS: [u32; 11] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409,
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field degree {0} outside 1..={MAX_DEGREE}")]
    Degree(u32),
    #[error("polynomial {poly:#x} does not have degree {m}")]
    PolyDegree { poly: u32, m: u32 },
    #[error("polynomial {0:#x} is not primitive")]
    NotPrimitive(u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("value {value} is not an element of GF({q})")]
    OutOfField { value: u32, q: usize },
}

/// A field element. Only meaningful together with the [`FieldSpec`] it
/// was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GfElem(pub u16);

impl GfElem {
    pub const ZERO: GfElem = GfElem(0);
    pub const ONE: GfElem = GfElem(1);

    #[inline]
    pub fn value(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for GfElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

/// GF(2^m) with a fixed primitive polynomial.
///
/// Immutable after construction and cheap to share by reference.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldSpec {
    m: u32,
    primitive_poly: u32,
    // doubled so that exp[log a + log b] never needs a modulo
    exp_table: Vec<u16>,
    log_table: Vec<u16>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("m", &self.m)
            .field("primitive_poly", &format_args!("{:#x}", self.primitive_poly))
            .finish()
    }
}

impl FieldSpec {
    /// GF(2^m) with the default primitive polynomial (0x11D for m = 8).
    pub fn new(m: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_DEGREE {
            return Err(FieldError::Degree(m));
        }
        Self::with_poly(m, DEFAULT_POLYS[m as usize])
    }

    /// GF(2^m) with an explicit polynomial, rejected unless `x` generates all
    /// `2^m - 1` nonzero elements.
    pub fn with_poly(m: u32, primitive_poly: u32) -> Result<Self, FieldError> {
        if m == 0 || m > MAX_DEGREE {
            return Err(FieldError::Degree(m));
        }
        if primitive_poly >> m != 1 {
            return Err(FieldError::PolyDegree { poly: primitive_poly, m });
        }
        let q = 1usize << m;
        let order = q - 1;
        let mut exp_table = vec![0u16; 2 * order];
        let mut log_table = vec![0u16; q];
        let mut seen = vec![false; q];
        let mut x: u32 = 1;
        for i in 0..order {
            if seen[x as usize] {
                return Err(FieldError::NotPrimitive(primitive_poly));
            }
            seen[x as usize] = true;
            exp_table[i] = x as u16;
            log_table[x as usize] = i as u16;
            x <<= 1;
            if x >> m != 0 {
                x ^= primitive_poly;
            }
        }
        if x != 1 {
            return Err(FieldError::NotPrimitive(primitive_poly));
        }
        for i in 0..order {
            exp_table[order + i] = exp_table[i];
        }
        Ok(FieldSpec {
            m,
            primitive_poly,
            exp_table,
            log_table,
        })
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field size q = 2^m.
    #[inline]
    pub fn q(&self) -> usize {
        1 << self.m
    }

    #[inline]
    pub fn primitive_poly(&self) -> u32 {
        self.primitive_poly
    }

    /// Checked conversion of an integer into a field element.
    pub fn elem(&self, value: u32) -> Result<GfElem, FieldError> {
        if (value as usize) < self.q() {
            Ok(GfElem(value as u16))
        } else {
            Err(FieldError::OutOfField { value, q: self.q() })
        }
    }

    /// `alpha^i` for the primitive element alpha = x.
    #[inline]
    pub fn exp(&self, i: usize) -> GfElem {
        GfElem(self.exp_table[i % (self.q() - 1)])
    }

    /// Discrete logarithm of a nonzero element.
    #[inline]
    pub fn log(&self, a: GfElem) -> Option<usize> {
        (a.0 != 0).then(|| self.log_table[a.value()] as usize)
    }

    #[inline]
    pub fn add(&self, a: GfElem, b: GfElem) -> GfElem {
        GfElem(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: GfElem, b: GfElem) -> GfElem {
        if a.0 == 0 || b.0 == 0 {
            return GfElem::ZERO;
        }
        let l = self.log_table[a.value()] as usize + self.log_table[b.value()] as usize;
        GfElem(self.exp_table[l])
    }

    pub fn inv(&self, a: GfElem) -> Result<GfElem, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let order = self.q() - 1;
        let l = self.log_table[a.value()] as usize;
        Ok(GfElem(self.exp_table[(order - l) % order]))
    }

    /// `a / b`; `b` must be nonzero.
    pub fn div(&self, a: GfElem, b: GfElem) -> Result<GfElem, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// All elements in increasing integer order.
    pub fn elements(&self) -> impl Iterator<Item = GfElem> {
        (0..self.q() as u16).map(GfElem)
    }

    /// Permutation table `j -> coeff * j` over all `q` values.
    pub fn mul_table_row(&self, coeff: GfElem) -> Vec<u16> {
        self.elements().map(|j| self.mul(coeff, j).0).collect()
    }
}
