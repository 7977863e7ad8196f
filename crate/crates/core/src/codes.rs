//! Binary linear codes `C: {0,1}^N → {0,1}^{N̄}` with local bit evaluation.
//!
//! Three families:
//! - Hadamard: position `y` (an N-bit mask) holds `⟨x, y⟩ mod 2`.
//! - Reed-Solomon ∘ Hadamard: `x` is packed into a polynomial `p_x` over
//!   GF(2^l); position `y = (a, s)` holds `⟨p_x(a), s⟩ mod 2`.
//! - k-XOR: position `y` names a k-subset of `[N]` (lexicographic rank) and
//!   holds the parity of those bits. Ranks past `binom(N, k)` wrap modulo it so
//!   that `N̄` is a power of two.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::bits::relative_distance;
use crate::bits::{BitSource, BitString};
use crate::error::{Error, Result};
use crate::galois::GaloisField;

/// Default cap on `N̄` for full encoding (bits).
pub const DEFAULT_ENCODE_CAP: u128 = 1 << 26;

/// Largest message length accepted by brute-force list decoding.
pub const LIST_DECODE_MAX_N: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CodeKind {
    Hadamard,
    RsHadamard { width: u32, degree_bound: usize },
    XorK { k: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub kind: CodeKind,
    /// Message length N.
    pub message_len: usize,
    /// `n = log2 N̄`.
    pub index_bits: u32,
    /// Number of distinct k-subsets, `binom(N, k)` (xor only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<u128>,
}

impl CodeSpec {
    pub fn hadamard(message_len: usize) -> Result<Self> {
        if message_len == 0 || message_len > 128 {
            return Err(Error::InvalidArgument(format!(
                "Hadamard message length {message_len} outside 1..=128"
            )));
        }
        Ok(CodeSpec {
            kind: CodeKind::Hadamard,
            message_len,
            index_bits: message_len as u32,
            subsets: None,
        })
    }

    pub fn rs_hadamard(message_len: usize, width: u32, degree_bound: usize) -> Result<Self> {
        GaloisField::new(width)?;
        if message_len == 0 || degree_bound == 0 {
            return Err(Error::InvalidArgument("empty RS∘Hadamard code".into()));
        }
        if (degree_bound as u64) * (width as u64) < message_len as u64 {
            return Err(Error::InvalidArgument(format!(
                "d·l = {}·{} cannot hold {message_len} message bits",
                degree_bound, width
            )));
        }
        Ok(CodeSpec {
            kind: CodeKind::RsHadamard {
                width,
                degree_bound,
            },
            message_len,
            index_bits: 2 * width,
            subsets: None,
        })
    }

    /// RS∘Hadamard sized for margin `epsilon`: the least `l` with
    /// `2^l ≥ ⌈4d/ε²⌉` where `d = ⌈N/l⌉`.
    pub fn rs_hadamard_for_margin(message_len: usize, epsilon: f64) -> Result<Self> {
        let (width, degree_bound) = rs_hadamard_sizing(message_len, epsilon)?;
        Self::rs_hadamard(message_len, width, degree_bound)
    }

    pub fn xor(message_len: usize, k: usize) -> Result<Self> {
        if k == 0 || k > message_len {
            return Err(Error::InvalidArgument(format!(
                "XOR locality k = {k} outside 1..={message_len}"
            )));
        }
        let subsets = binomial(message_len as u64, k as u64).ok_or_else(|| Error::Refused {
            what: "k-XOR code index",
            required: format!("binom({message_len}, {k}) ≥ 2^128"),
            cap: "2^128".into(),
        })?;
        Ok(CodeSpec {
            kind: CodeKind::XorK { k },
            message_len,
            index_bits: ceil_log2_u128(subsets),
            subsets: Some(subsets),
        })
    }

    /// `N̄ = 2^n`, or `None` when it does not fit in a `u128`.
    pub fn codeword_len(&self) -> Option<u128> {
        1u128.checked_shl(self.index_bits)
    }

    fn check_index(&self, y: u128) -> Result<()> {
        if self.index_bits < 128 && y >> self.index_bits != 0 {
            return Err(Error::IndexOutOfRange {
                index: y,
                limit: format!("2^{}", self.index_bits),
            });
        }
        Ok(())
    }

    fn check_message<S: BitSource + ?Sized>(&self, x: &S) -> Result<()> {
        if x.bit_len() != self.message_len {
            return Err(Error::LengthMismatch {
                expected: self.message_len,
                actual: x.bit_len(),
            });
        }
        Ok(())
    }
}

/// `(l, d)` for the RS∘Hadamard sizing rule, without the field-width cap.
pub fn rs_hadamard_sizing_unbounded(message_len: usize, epsilon: f64) -> Result<(u32, usize)> {
    if !(epsilon > 0.0 && epsilon < 1.0) || message_len == 0 {
        return Err(Error::InvalidArgument(format!(
            "RS∘Hadamard sizing needs N ≥ 1 and 0 < ε < 1 (got N={message_len}, ε={epsilon})"
        )));
    }
    for width in 1u32..=1000 {
        let d = message_len.div_ceil(width as usize);
        let need = (4.0 * d as f64 / (epsilon * epsilon)).ceil();
        if 2f64.powi(width as i32) >= need {
            return Ok((width, d));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no RS∘Hadamard width fits ε = {epsilon}"
    )))
}

pub fn rs_hadamard_sizing(message_len: usize, epsilon: f64) -> Result<(u32, usize)> {
    let (width, d) = rs_hadamard_sizing_unbounded(message_len, epsilon)?;
    GaloisField::new(width)?;
    Ok((width, d))
}

/// `binom(n, k)` if it fits in a `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(p) => acc = p / (i + 1) as u128,
            None => return binomial_big(n, k).to_u128(),
        }
    }
    Some(acc)
}

pub fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `⌈log2 x⌉` for `x ≥ 1`.
pub fn ceil_log2_u128(x: u128) -> u32 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros()
    }
}

pub fn ceil_log2_big(x: &BigUint) -> u64 {
    if *x <= BigUint::one() {
        0
    } else {
        (x - 1u32).bits()
    }
}

/// The k-subset of `[n]` with the given lexicographic rank, ascending.
///
/// Uses the combinatorial number system on the reflected subset, so the cost
/// is `O(k log n)` binomial evaluations.
pub fn unrank_subset(n: usize, k: usize, rank: u128, total: u128) -> Vec<usize> {
    debug_assert!(rank < total);
    let mut rem = total - 1 - rank;
    let mut upper = n; // exclusive bound on the next reflected element
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let kk = (k - j) as u64;
        // Largest c in [kk - 1, upper) with binom(c, kk) ≤ rem.
        let (mut lo, mut hi) = (kk as usize - 1, upper - 1);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            let fits = binomial(mid as u64, kk).is_some_and(|b| b <= rem);
            if fits {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        rem -= binomial(lo as u64, kk).unwrap_or(0);
        out.push(n - 1 - lo);
        upper = lo;
    }
    out
}

/// Bit `y` of `C(x)`.
pub fn code_bit<S: BitSource + ?Sized>(spec: &CodeSpec, x: &S, y: u128) -> Result<bool> {
    spec.check_message(x)?;
    spec.check_index(y)?;
    Ok(Encoder::new(spec, x).bit(y))
}

/// Per-message evaluator; packs the RS polynomial once so that repeated bit
/// queries on one message stay cheap.
pub struct Encoder<'a, S: BitSource + ?Sized> {
    spec: &'a CodeSpec,
    source: &'a S,
    rs: Option<(GaloisField, Vec<u32>)>,
}

impl<'a, S: BitSource + ?Sized> Encoder<'a, S> {
    pub fn new(spec: &'a CodeSpec, source: &'a S) -> Self {
        let rs = match spec.kind {
            CodeKind::RsHadamard {
                width,
                degree_bound,
            } => {
                let field = GaloisField::new(width).expect("width validated at construction");
                Some((field, pack_coefficients(source, width, degree_bound)))
            }
            _ => None,
        };
        Encoder { spec, source, rs }
    }

    /// Assumes `y` already validated against `index_bits`.
    #[inline]
    pub fn bit(&self, y: u128) -> bool {
        match self.spec.kind {
            CodeKind::Hadamard => {
                let mut parity = false;
                let mut mask = y;
                while mask != 0 {
                    let i = mask.trailing_zeros() as usize;
                    parity ^= self.source.read_bit(i);
                    mask &= mask - 1;
                }
                parity
            }
            CodeKind::RsHadamard { width, .. } => {
                let (field, coeffs) = self.rs.as_ref().expect("packed at construction");
                let mask = (1u128 << width) - 1;
                let a = (y & mask) as u32;
                let s = ((y >> width) & mask) as u32;
                (field.eval(coeffs, a) & s).count_ones() & 1 == 1
            }
            CodeKind::XorK { k } => {
                let total = self.spec.subsets.expect("xor code carries its subset count");
                let subset = unrank_subset(self.spec.message_len, k, y % total, total);
                subset
                    .into_iter()
                    .fold(false, |acc, i| acc ^ self.source.read_bit(i))
            }
        }
    }
}

fn pack_coefficients<S: BitSource + ?Sized>(x: &S, width: u32, degree_bound: usize) -> Vec<u32> {
    let n = x.bit_len();
    (0..degree_bound)
        .map(|j| {
            (0..width as usize).fold(0u32, |acc, b| {
                let i = j * width as usize + b;
                if i < n && x.read_bit(i) {
                    acc | (1 << b)
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// The full codeword `C(x)`, refusing when `N̄` exceeds `cap` bits.
pub fn encode_full(spec: &CodeSpec, x: &BitString, cap: u128) -> Result<BitString> {
    spec.check_message(x)?;
    let len = spec
        .codeword_len()
        .filter(|&l| l <= cap)
        .ok_or_else(|| Error::Refused {
            what: "full encoding",
            required: format!("2^{} bits", spec.index_bits),
            cap: format!("{cap} bits"),
        })? as usize;
    let enc = Encoder::new(spec, x);
    let bits: Vec<bool> = (0..len).into_par_iter().map(|y| enc.bit(y as u128)).collect();
    Ok(BitString::from_bools(&bits))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ListDecodeResult {
    /// Representatives after δ-merging (all close messages when δ = 0).
    pub candidates: Vec<BitString>,
    /// Every message `z` with `Δ(word, C(z)) < 1/2 − ε`, in enumeration order.
    pub close_messages: Vec<BitString>,
    pub epsilon: f64,
    pub delta: f64,
    pub l_observed: usize,
}

/// Brute-force approximate list decoder over all `2^N` messages.
///
/// Messages are enumerated as integers `0..2^N` (bit `i` of the integer is
/// message bit `i`). Codewords are computed once and reused across words.
pub struct ListDecoder {
    spec: CodeSpec,
    messages: Vec<BitString>,
    codewords: Vec<BitString>,
}

impl ListDecoder {
    pub fn new(spec: &CodeSpec) -> Result<Self> {
        if spec.message_len > LIST_DECODE_MAX_N {
            return Err(Error::Refused {
                what: "brute-force list decoding",
                required: format!("2^{} messages", spec.message_len),
                cap: format!("2^{LIST_DECODE_MAX_N}"),
            });
        }
        let messages: Vec<BitString> = (0..1u64 << spec.message_len)
            .map(|z| BitString::from_u64(z, spec.message_len))
            .collect();
        let codewords = messages
            .iter()
            .map(|z| encode_full(spec, z, DEFAULT_ENCODE_CAP))
            .collect::<Result<Vec<_>>>()?;
        Ok(ListDecoder {
            spec: spec.clone(),
            messages,
            codewords,
        })
    }

    pub fn decode(&self, word: &BitString, epsilon: f64, delta: f64) -> Result<ListDecodeResult> {
        if !(epsilon > 0.0) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "list decoding needs ε > 0 and δ ∈ [0, 1] (got ε={epsilon}, δ={delta})"
            )));
        }
        let n_bar = self.spec.codeword_len().unwrap_or(u128::MAX) as usize;
        if word.len() != n_bar {
            return Err(Error::LengthMismatch {
                expected: n_bar,
                actual: word.len(),
            });
        }
        let threshold = (0.5 - epsilon) * n_bar as f64;
        let close_messages: Vec<BitString> = self
            .codewords
            .iter()
            .zip(&self.messages)
            .filter(|(c, _)| (word.hamming(c).expect("lengths checked") as f64) < threshold)
            .map(|(_, z)| z.clone())
            .collect();
        let radius = delta * self.spec.message_len as f64;
        let mut candidates: Vec<BitString> = Vec::new();
        for z in &close_messages {
            let covered = candidates
                .iter()
                .any(|r| r.hamming(z).expect("same length") as f64 <= radius);
            if !covered {
                candidates.push(z.clone());
            }
        }
        Ok(ListDecodeResult {
            l_observed: candidates.len(),
            candidates,
            close_messages,
            epsilon,
            delta,
        })
    }
}

pub fn list_decode_brute(
    spec: &CodeSpec,
    word: &BitString,
    epsilon: f64,
    delta: f64,
) -> Result<ListDecodeResult> {
    ListDecoder::new(spec)?.decode(word, epsilon, delta)
}
