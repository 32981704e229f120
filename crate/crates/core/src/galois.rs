//! Table-driven arithmetic in GF(2^m), 1 <= m <= 8.
//!
//! Elements are stored in the power basis as integers in `[0, q)`, so field
//! addition is a plain XOR. Multiplication goes through discrete log and
//! antilog tables built from a primitive polynomial.

use std::fmt;

use crate::error::{Error, Result};

/// An element of GF(2^m), stored by its power-basis integer representation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(pub u8);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<u8> for FieldElement {
    fn from(v: u8) -> Self {
        FieldElement(v)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

/// Arithmetic context for GF(2^m).
#[derive(Clone, PartialEq, Eq)]
pub struct Field {
    m: u32,
    prim_poly: u32,
    q: usize,
    /// `exp[i] = alpha^i`, stored for `i` in `0..2(q-1)` so products skip the modulo.
    exp: Vec<u8>,
    /// `log[x]` for `x != 0`; `log[0]` is unused.
    log: Vec<u16>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("m", &self.m)
            .field("prim_poly", &format_args!("{:#x}", self.prim_poly))
            .finish()
    }
}

/// Primitive polynomial used when a config does not name one.
pub fn default_primitive_poly(m: u32) -> Option<u32> {
    Some(match m {
        1 => 0x3,
        2 => 0x7,
        3 => 0xB,
        4 => 0x13,
        5 => 0x25,
        6 => 0x43,
        7 => 0x89,
        8 => 0x11D,
        _ => return None,
    })
}

impl Field {
    /// Builds GF(2^m) from `prim_poly`, given as a bit mask with bit `m` set.
    ///
    /// Fails when the polynomial does not have degree `m` or when `x` does
    /// not generate the whole multiplicative group modulo it.
    pub fn new(m: u32, prim_poly: u32) -> Result<Field> {
        if !(1..=8).contains(&m) {
            return Err(Error::InvalidDegree(m));
        }
        let not_primitive = Error::NotPrimitive { m, poly: prim_poly };
        if prim_poly >> m != 1 {
            return Err(not_primitive);
        }
        let q = 1usize << m;
        let order = q - 1;
        let mut exp = vec![0u8; 2 * order];
        let mut log = vec![0u16; q];
        let mut seen = vec![false; q];
        let mut x: u32 = 1;
        for i in 0..order {
            if seen[x as usize] || x == 0 {
                return Err(not_primitive);
            }
            seen[x as usize] = true;
            exp[i] = x as u8;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= prim_poly;
            }
        }
        // alpha^(q-1) must close the cycle back at 1.
        if x != 1 {
            return Err(not_primitive);
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Field {
            m,
            prim_poly,
            q,
            exp,
            log,
        })
    }

    /// GF(2^m) with the default primitive polynomial for `m`.
    pub fn with_default_poly(m: u32) -> Result<Field> {
        let poly = default_primitive_poly(m).ok_or(Error::InvalidDegree(m))?;
        Field::new(m, poly)
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn prim_poly(&self) -> u32 {
        self.prim_poly
    }

    /// Checked conversion from an integer representation.
    pub fn element(&self, value: u32) -> Result<FieldElement> {
        if (value as usize) < self.q {
            Ok(FieldElement(value as u8))
        } else {
            Err(Error::ElementOutOfRange { value, q: self.q })
        }
    }

    /// The primitive element alpha (the class of `x`).
    pub fn alpha(&self) -> FieldElement {
        FieldElement(self.exp[1 % (self.q - 1)])
    }

    /// `alpha^i`, with `i` taken modulo `q - 1`.
    pub fn exp(&self, i: usize) -> FieldElement {
        FieldElement(self.exp[i % (self.q - 1)])
    }

    /// Discrete logarithm of a nonzero element.
    pub fn log(&self, a: FieldElement) -> Result<usize> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.log[a.index()] as usize)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(|v| FieldElement(v as u8))
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FieldElement> {
        (1..self.q).map(|v| FieldElement(v as u8))
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.mul_raw(a.0, b.0))
    }

    /// Multiplication on raw representations; hot path for the decoders.
    #[inline]
    pub fn mul_raw(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let order = self.q - 1;
        let l = self.log[a.index()] as usize;
        Ok(FieldElement(self.exp[(order - l) % order]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        let b_inv = self.inv(b)?;
        Ok(self.mul(a, b_inv))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return FieldElement::ONE;
        }
        if a.is_zero() {
            return FieldElement::ZERO;
        }
        let order = (self.q - 1) as u64;
        let l = self.log[a.index()] as u64;
        FieldElement(self.exp[((l * (e % order)) % order) as usize])
    }

    /// Product of all elements of `values`.
    pub fn product(&self, values: &[FieldElement]) -> FieldElement {
        values.iter().fold(FieldElement::ONE, |acc, &v| self.mul(acc, v))
    }
}
