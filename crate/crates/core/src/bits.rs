//! Packed bit strings with LSB-first byte conversion.
//!
//! Bit `i` of a [`BitString`] lives in word `i / 64` at position `i % 64`.
//! Byte conversion uses the same order: bit `i` is bit `i % 8` of byte `i / 8`.

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// The low `len` bits of `value` (len ≤ 128).
    pub fn from_u128(value: u128, len: usize) -> Self {
        assert!(len <= 128, "from_u128 supports at most 128 bits");
        let mut s = Self::zeros(len);
        let masked = if len == 128 {
            value
        } else {
            value & ((1u128 << len) - 1)
        };
        if !s.words.is_empty() {
            s.words[0] = masked as u64;
        }
        if s.words.len() > 1 {
            s.words[1] = (masked >> 64) as u64;
        }
        s
    }

    pub fn from_u64(value: u64, len: usize) -> Self {
        Self::from_u128(value as u128, len)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Reads `len` bits from `bytes`, LSB-first within each byte.
    pub fn from_bytes_lsb(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::LengthMismatch {
                expected: len.div_ceil(8),
                actual: bytes.len(),
            });
        }
        let mut s = Self::zeros(len);
        for (w, chunk) in s.words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        s.clear_tail();
        Ok(s)
    }

    /// Packs LSB-first into `ceil(len / 8)` bytes, zero-padding the last byte.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The first `min(len, 128)` bits as an integer.
    pub fn low_u128(&self) -> u128 {
        let lo = self.words.first().copied().unwrap_or(0) as u128;
        let hi = self.words.get(1).copied().unwrap_or(0) as u128;
        lo | (hi << 64)
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "bit string longer than 64 bits");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        Ok(BitString {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &BitString) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

/// Read access to source bits, so that bit reads can be counted.
pub trait BitSource {
    fn bit_len(&self) -> usize;
    fn read_bit(&self, i: usize) -> bool;
}

impl BitSource for BitString {
    fn bit_len(&self) -> usize {
        self.len
    }

    #[inline]
    fn read_bit(&self, i: usize) -> bool {
        self.get(i)
    }
}

/// Wraps a source and counts every bit read.
pub struct CountingSource<'a, S: BitSource + ?Sized> {
    inner: &'a S,
    reads: Cell<u64>,
}

impl<'a, S: BitSource + ?Sized> CountingSource<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        CountingSource {
            inner,
            reads: Cell::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }

    pub fn reset(&self) {
        self.reads.set(0);
    }
}

impl<S: BitSource + ?Sized> BitSource for CountingSource<'_, S> {
    fn bit_len(&self) -> usize {
        self.inner.bit_len()
    }

    fn read_bit(&self, i: usize) -> bool {
        self.reads.set(self.reads.get() + 1);
        self.inner.read_bit(i)
    }
}

/// Relative Hamming distance as an exact fraction `(differing, length)`.
pub fn relative_distance(a: &BitString, b: &BitString) -> Result<num_rational::Ratio<u64>> {
    let d = a.hamming(b)?;
    if a.is_empty() {
        return Ok(num_rational::Ratio::new(0, 1));
    }
    Ok(num_rational::Ratio::new(d as u64, a.len() as u64))
}
