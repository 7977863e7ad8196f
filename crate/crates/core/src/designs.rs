//! Weak combinatorial designs.
//!
//! A family `S_1, …, S_m ⊆ [t]` with `|S_i| = n` is a `(t, n, m, ρ)` weak design
//! when `Σ_{i<j} 2^{|S_i ∩ S_j|} ≤ ρ (m − 1)` for every `j`. Two constructions
//! are provided: graphs of polynomials over GF(q) and pairwise-disjoint blocks.
//! The stored ratio is always the exact achieved value, never an asymptotic
//! promise.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::GaloisField;

/// Largest field used by a materialized polynomial design (`t = q^2 ≤ 2^32`).
pub const MAX_POLY_FIELD_WIDTH: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    Polynomial { q: u64, degree_bound: usize },
    Disjoint,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakDesign {
    t: usize,
    n: usize,
    sets: Vec<Vec<u32>>,
    rho_achieved: BigRational,
    construction: Construction,
}

impl WeakDesign {
    /// Validates and canonicalizes an explicit set family, computing its ratio.
    pub fn from_sets(t: usize, n: usize, mut sets: Vec<Vec<u32>>) -> Result<Self> {
        for s in &mut sets {
            s.sort_unstable();
        }
        let mut d = WeakDesign {
            t,
            n,
            sets,
            rho_achieved: BigRational::one(),
            construction: Construction::Explicit,
        };
        d.rho_achieved = verify_design(&d)?;
        Ok(d)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<u32>] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &[u32] {
        &self.sets[i]
    }

    pub fn rho_achieved(&self) -> &BigRational {
        &self.rho_achieved
    }

    pub fn rho_f64(&self) -> f64 {
        self.rho_achieved.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn to_json(&self) -> DesignJson {
        DesignJson {
            t: self.t,
            n: self.n,
            m: self.m(),
            rho_achieved: self.rho_f64(),
            rho_exact: self.rho_achieved.to_string(),
            construction: self.construction,
            sets: self.sets.clone(),
        }
    }
}

/// Serialized form used by the `design` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignJson {
    pub t: usize,
    pub n: usize,
    pub m: usize,
    pub rho_achieved: f64,
    pub rho_exact: String,
    pub construction: Construction,
    pub sets: Vec<Vec<u32>>,
}

impl TryFrom<DesignJson> for WeakDesign {
    type Error = Error;

    fn try_from(j: DesignJson) -> Result<Self> {
        if j.sets.len() != j.m {
            return Err(Error::Structural(format!(
                "m = {} but {} sets given",
                j.m,
                j.sets.len()
            )));
        }
        let mut d = WeakDesign::from_sets(j.t, j.n, j.sets)?;
        d.construction = j.construction;
        Ok(d)
    }
}

/// `max_j Σ_{i<j} 2^{|S_i ∩ S_j|} / (m − 1)` by direct pairwise intersection;
/// 1 when `m ≤ 1`.
pub fn verify_design(d: &WeakDesign) -> Result<BigRational> {
    for (i, s) in d.sets.iter().enumerate() {
        if s.len() != d.n {
            return Err(Error::Structural(format!(
                "set {i} has size {}, expected {}",
                s.len(),
                d.n
            )));
        }
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural(format!("set {i} has repeated elements")));
        }
        if let Some(&last) = s.last() {
            if last as usize >= d.t {
                return Err(Error::Structural(format!(
                    "set {i} contains {last} outside universe [0, {})",
                    d.t
                )));
            }
        }
    }
    let m = d.sets.len();
    if m <= 1 {
        return Ok(BigRational::one());
    }
    let max_sum = (1..m)
        .into_par_iter()
        .map(|j| {
            let mut sum = BigUint::zero();
            for i in 0..j {
                sum += BigUint::one() << sorted_intersection(&d.sets[i], &d.sets[j]);
            }
            sum
        })
        .max()
        .unwrap_or_default();
    Ok(BigRational::new(
        BigInt::from(max_sum),
        BigInt::from(m as u64 - 1),
    ))
}

fn sorted_intersection(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Blocks `{(i−1)n, …, in−1}` in a universe of size `n·m`.
pub fn build_disjoint_design(n: usize, m: usize) -> Result<WeakDesign> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "disjoint design needs n, m ≥ 1".into(),
        ));
    }
    let t = n
        .checked_mul(m)
        .filter(|&t| t <= u32::MAX as usize + 1)
        .ok_or_else(|| Error::InvalidArgument(format!("universe n·m = {n}·{m} too large")))?;
    let sets = (0..m)
        .map(|i| ((i * n) as u32..((i + 1) * n) as u32).collect())
        .collect();
    Ok(WeakDesign {
        t,
        n,
        sets,
        rho_achieved: BigRational::one(),
        construction: Construction::Disjoint,
    })
}

/// Polynomial-graph design with `n = q` a power of two: `S_i` is the graph of
/// the `i`-th polynomial over GF(q), universe `GF(q) × GF(q)` (so `t = q²`).
pub fn build_poly_design(n: usize, m: usize) -> Result<WeakDesign> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "set size {n} is not a supported field size (power of two ≥ 2)"
        )));
    }
    PolyDesign::new(n, m)?.build()
}

/// Polynomial-graph design for any set size `n`: the field is the smallest
/// GF(q) with `q ≥ n` (and `q ≥ 2`), and each graph is restricted to the first
/// `n` field elements. Equals [`build_poly_design`] when `n` is a power of two.
pub fn build_poly_design_any(n: usize, m: usize) -> Result<WeakDesign> {
    PolyDesign::new(n, m)?.build()
}

/// Locally computable description of a polynomial-graph design.
///
/// Polynomials are ranked in degree-lexicographic order: rank `i` has base-`q`
/// digits `c_0 + c_1 q + …`, so all constants come first, then all polynomials
/// of degree ≤ 1, and so on. In characteristic 2 the difference of the
/// polynomials of rank `i` and `j` is the polynomial of rank `i ⊕ j`, which is
/// what makes the closed-form ratio in [`PolyDesign::rho`] possible.
#[derive(Clone, Copy, Debug)]
pub struct PolyDesign {
    n: usize,
    m: usize,
    width: u32,
    degree_bound: usize,
}

impl PolyDesign {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "polynomial design needs n, m ≥ 1".into(),
            ));
        }
        let q = n.next_power_of_two().max(2) as u128;
        let width = q.trailing_zeros();
        let mut degree_bound = 1usize;
        let mut count = q;
        while count < m as u128 {
            count = count.saturating_mul(q);
            degree_bound += 1;
        }
        if degree_bound as u128 > q {
            return Err(Error::InvalidArgument(format!(
                "m = {m} exceeds the q^q = {q}^{q} polynomials available"
            )));
        }
        Ok(PolyDesign {
            n,
            m,
            width,
            degree_bound,
        })
    }

    pub fn q(&self) -> u64 {
        1u64 << self.width
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn universe(&self) -> u128 {
        1u128 << (2 * self.width)
    }

    /// The coefficients (low degree first) of the polynomial of the given rank.
    pub fn coefficients(&self, rank: usize) -> Vec<u32> {
        let mask = (1u64 << self.width) - 1;
        let mut r = rank as u128;
        (0..self.degree_bound)
            .map(|_| {
                let c = (r as u64 & mask) as u32;
                r >>= self.width;
                c
            })
            .collect()
    }

    /// Set `S_i` alone, in time polynomial in `n` and `log m`.
    pub fn set(&self, i: usize) -> Result<Vec<u32>> {
        if i >= self.m {
            return Err(Error::IndexOutOfRange {
                index: i as u128,
                limit: self.m.to_string(),
            });
        }
        if self.width > MAX_POLY_FIELD_WIDTH {
            return Err(Error::Refused {
                what: "materializing a polynomial design",
                required: format!("GF(2^{})", self.width),
                cap: format!("GF(2^{MAX_POLY_FIELD_WIDTH})"),
            });
        }
        let field = GaloisField::new(self.width)?;
        let coeffs = self.coefficients(i);
        let q = self.q() as u32;
        Ok((0..self.n as u32)
            .map(|a| a * q + field.eval(&coeffs, a))
            .collect())
    }

    /// Exact achieved ratio without enumerating pairs.
    ///
    /// For set `j`, `Σ_{i<j} 2^{|S_i ∩ S_j|}` equals `Σ_{b ∈ bits(j)} W(b)`, where
    /// `W(b)` sums `2^{Z(r)}` over ranks `r ∈ [2^b, 2^{b+1})` and `Z(r)` counts
    /// the roots of polynomial `r` among the `n` evaluation points. Summing
    /// `2^{Z(r)}` over a prefix of ranks reduces to counting, for each subset
    /// of the points, the polynomials that vanish on it, and that count only
    /// depends on the subset's size.
    pub fn rho(&self) -> BigRational {
        if self.m <= 1 {
            return BigRational::one();
        }
        let top = usize::BITS - (self.m - 1).leading_zeros();
        let prefix: Vec<BigUint> = (0..=top).map(|c| self.prefix_weight(c as u64)).collect();
        let weights: Vec<BigUint> = prefix.windows(2).map(|w| &w[1] - &w[0]).collect();
        let weight_of = |j: usize| -> BigUint {
            (0..top as usize)
                .filter(|&b| (j >> b) & 1 == 1)
                .map(|b| weights[b].clone())
                .sum()
        };
        // Largest bit-weight over j ≤ m − 1: either m − 1 itself, or clear one of
        // its set bits and set every bit below it.
        let last = self.m - 1;
        let mut best = weight_of(last);
        for p in 0..top as usize {
            if (last >> p) & 1 == 1 {
                let cand = ((last >> p) << p) ^ (1 << p) | ((1 << p) - 1);
                if cand >= 1 {
                    best = best.max(weight_of(cand));
                }
            }
        }
        BigRational::new(BigInt::from(best), BigInt::from(self.m as u64 - 1))
    }

    /// `Σ_{r < 2^c} 2^{Z(r)}`.
    fn prefix_weight(&self, c: u64) -> BigUint {
        let l = self.width as u64;
        let full = (c / l) as usize;
        let partial = c % l;
        // Subsets larger than `full` admit only the zero-count term 1, so
        // they contribute 2^n minus the binomials already summed.
        let mut total = BigUint::zero();
        let mut covered = BigUint::zero();
        let mut binom = BigUint::one();
        for s in 0..=full.min(self.n) {
            if s > 0 {
                binom = binom * BigUint::from((self.n - s + 1) as u64) / BigUint::from(s as u64);
            }
            total += &binom << (partial + l * (full - s) as u64);
            covered += &binom;
        }
        total + ((BigUint::one() << self.n) - covered)
    }

    pub fn build(&self) -> Result<WeakDesign> {
        let t = self.universe();
        if self.width > MAX_POLY_FIELD_WIDTH {
            return Err(Error::Refused {
                what: "materializing a polynomial design",
                required: format!("universe 2^{}", 2 * self.width),
                cap: format!("2^{}", 2 * MAX_POLY_FIELD_WIDTH),
            });
        }
        let sets = (0..self.m)
            .into_par_iter()
            .map(|i| self.set(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeakDesign {
            t: t as usize,
            n: self.n,
            sets,
            rho_achieved: self.rho(),
            construction: Construction::Polynomial {
                q: self.q(),
                degree_bound: self.degree_bound,
            },
        })
    }
}
