//! Arithmetic in GF(2^l) for 1 ≤ l ≤ 32.
//!
//! Elements are polynomials over GF(2) packed into a `u32`, bit `i` holding the
//! coefficient of `x^i`. Each width has one fixed low-weight irreducible
//! reduction polynomial, listed in [`REDUCTION_POLYS`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 32;

/// Reduction polynomial per width, as the list of exponents of the non-leading
/// terms (the constant term `x^0` is always present and included).
const REDUCTION_TERMS: [&[u32]; 32] = [
    &[0],          // 1: x + 1
    &[1, 0],       // 2
    &[1, 0],       // 3
    &[1, 0],       // 4
    &[2, 0],       // 5
    &[1, 0],       // 6
    &[1, 0],       // 7
    &[4, 3, 1, 0], // 8: the AES polynomial
    &[1, 0],       // 9
    &[3, 0],       // 10
    &[2, 0],       // 11
    &[3, 0],       // 12
    &[4, 3, 1, 0], // 13
    &[5, 0],       // 14
    &[1, 0],       // 15
    &[5, 3, 1, 0], // 16
    &[3, 0],       // 17
    &[3, 0],       // 18
    &[5, 2, 1, 0], // 19
    &[3, 0],       // 20
    &[2, 0],       // 21
    &[1, 0],       // 22
    &[5, 0],       // 23
    &[4, 3, 1, 0], // 24
    &[3, 0],       // 25
    &[4, 3, 1, 0], // 26
    &[5, 2, 1, 0], // 27
    &[1, 0],       // 28
    &[2, 0],       // 29
    &[1, 0],       // 30
    &[3, 0],       // 31
    &[7, 3, 2, 0], // 32
];

/// Full reduction polynomials (including the leading `x^l` term), index `l - 1`.
pub const REDUCTION_POLYS: [u64; 32] = {
    let mut out = [0u64; 32];
    let mut i = 0;
    while i < 32 {
        let mut p = 1u64 << (i + 1);
        let terms = REDUCTION_TERMS[i];
        let mut j = 0;
        while j < terms.len() {
            p |= 1u64 << terms[j];
            j += 1;
        }
        out[i] = p;
        i += 1;
    }
    out
};

/// A binary extension field GF(2^width).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaloisField {
    width: u32,
    modulus: u64,
}

impl GaloisField {
    pub fn new(width: u32) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::UnsupportedWidth(width));
        }
        Ok(GaloisField {
            width,
            modulus: REDUCTION_POLYS[width as usize - 1],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of field elements, `2^width`.
    pub fn order(&self) -> u64 {
        1u64 << self.width
    }

    #[inline]
    pub fn contains(&self, a: u32) -> bool {
        (a as u64) < self.order()
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        debug_assert!(self.contains(a) && self.contains(b));
        let mut prod = clmul(a, b);
        let l = self.width;
        // Clear bits from the top down; the product has degree ≤ 2l - 2.
        let mut bit = 2 * l - 2;
        while bit >= l {
            if (prod >> bit) & 1 == 1 {
                prod ^= self.modulus << (bit - l);
            }
            bit -= 1;
        }
        prod as u32
    }

    pub fn pow(&self, mut a: u32, mut e: u64) -> u32 {
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^l - 2)`; `None` for zero.
    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        Some(self.pow(a, self.order() - 2))
    }

    /// Horner evaluation of `coeffs` (low degree first) at `x`.
    #[inline]
    pub fn eval(&self, coeffs: &[u32], x: u32) -> u32 {
        coeffs
            .iter()
            .rev()
            .fold(0u32, |acc, &c| self.mul(acc, x) ^ c)
    }

    pub fn element(&self, value: u32) -> Result<FieldElement> {
        if !self.contains(value) {
            return Err(Error::IndexOutOfRange {
                index: value as u128,
                limit: format!("2^{}", self.width),
            });
        }
        Ok(FieldElement {
            value,
            width: self.width,
        })
    }
}

/// Carry-less product of two 32-bit polynomials.
#[inline]
fn clmul(a: u32, b: u32) -> u64 {
    let a = a as u64;
    let mut b = b;
    let mut acc = 0u64;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

/// An element of GF(2^width), tagged with its width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    pub value: u32,
    pub width: u32,
}

/// A polynomial over GF(2^width), coefficients low degree first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldPoly {
    pub coefficients: Vec<FieldElement>,
}

impl FieldPoly {
    pub fn new(coefficients: Vec<FieldElement>) -> Self {
        FieldPoly { coefficients }
    }
}

pub fn gf_mul(a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    if a.width != b.width {
        return Err(Error::WidthMismatch(a.width, b.width));
    }
    let f = GaloisField::new(a.width)?;
    f.element(a.value)?;
    f.element(b.value)?;
    Ok(FieldElement {
        value: f.mul(a.value, b.value),
        width: a.width,
    })
}

pub fn poly_eval(p: &FieldPoly, x: FieldElement) -> Result<FieldElement> {
    let f = GaloisField::new(x.width)?;
    f.element(x.value)?;
    let mut raw = Vec::with_capacity(p.coefficients.len());
    for c in &p.coefficients {
        if c.width != x.width {
            return Err(Error::WidthMismatch(c.width, x.width));
        }
        f.element(c.value)?;
        raw.push(c.value);
    }
    Ok(FieldElement {
        value: f.eval(&raw, x.value),
        width: x.width,
    })
}
