//! The Nisan–Wigderson composition `Ext_C(x, y) = NW^{C(x)}(y)`.
//!
//! Output bit `i` reads the seed at the positions of design set `S_i`, forms a
//! code index from them (first position is the least significant bit), and
//! returns that bit of `C(x)`.

mod params;

pub use params::{
    binary_entropy, compute_params, qfac_bound, Constants, DesignChoice, ExtractorParams,
    FormulaTerms, InfeasibilityReport, Knobs, ParamsRequest, QfacFamily, Variant,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::{BitSource, BitString, CountingSource};
use crate::codes::{CodeKind, CodeSpec, Encoder};
use crate::designs::{build_disjoint_design, build_poly_design_any, WeakDesign};
use crate::error::{Error, Result};

/// A seeded function `{0,1}^N × {0,1}^t → {0,1}^m`.
pub trait Extractor: Sync {
    fn source_len(&self) -> usize;
    fn seed_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn evaluate(&self, x: &BitString, y: &BitString) -> Result<BitString>;
}

/// Wraps a closure over small integer encodings (bit `i` of the integer is
/// bit `i` of the string). Source, seed, and output must each fit in 64 bits.
pub struct FnExtractor<F> {
    pub source_len: usize,
    pub seed_len: usize,
    pub output_len: usize,
    pub f: F,
}

impl<F: Fn(u64, u64) -> u64 + Sync> Extractor for FnExtractor<F> {
    fn source_len(&self) -> usize {
        self.source_len
    }
    fn seed_len(&self) -> usize {
        self.seed_len
    }
    fn output_len(&self) -> usize {
        self.output_len
    }
    fn evaluate(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        Ok(BitString::from_u64(
            (self.f)(x.to_u64(), y.to_u64()),
            self.output_len,
        ))
    }
}

/// `E(x, y) = C(x)_y`, with the seed read as an `n`-bit index.
pub struct OneBitExtractor {
    pub code: CodeSpec,
}

impl Extractor for OneBitExtractor {
    fn source_len(&self) -> usize {
        self.code.message_len
    }
    fn seed_len(&self) -> usize {
        self.code.index_bits as usize
    }
    fn output_len(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        Ok(BitString::from_bools(&[one_bit_extract(
            &self.code,
            x,
            y.low_u128(),
        )?]))
    }
}

pub fn one_bit_extract<S: BitSource + ?Sized>(code: &CodeSpec, x: &S, y: u128) -> Result<bool> {
    crate::codes::code_bit(code, x, y)
}

#[derive(Clone, Debug)]
pub struct ExtractorInstance {
    params: Option<ExtractorParams>,
    design: WeakDesign,
    code: CodeSpec,
}

/// Source-bit read counters from an instrumented extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    pub total_reads: u64,
    pub min_reads_per_bit: u64,
    pub max_reads_per_bit: u64,
}

impl ExtractorInstance {
    /// Pairs a code with a design whose set size equals the code's index width.
    pub fn new(code: CodeSpec, design: WeakDesign) -> Result<Self> {
        if design.n() != code.index_bits as usize {
            return Err(Error::InvalidArgument(format!(
                "design set size {} differs from code index width {}",
                design.n(),
                code.index_bits
            )));
        }
        if code.index_bits > 128 {
            return Err(Error::InvalidArgument("code index wider than 128 bits".into()));
        }
        Ok(ExtractorInstance {
            params: None,
            design,
            code,
        })
    }

    /// Builds the code and design that `params` describes.
    pub fn from_params(params: ExtractorParams) -> Result<Self> {
        if params.diagnostic_zero_slack {
            return Err(Error::InvalidArgument(
                "diagnostic parameter sets do not describe a buildable instance".into(),
            ));
        }
        let code = match params.variant {
            Variant::RsHadamard => CodeSpec::rs_hadamard(
                params.source_len,
                params.field_width.unwrap_or(0),
                params.degree_bound.unwrap_or(0),
            )?,
            Variant::Xor => CodeSpec::xor(params.source_len, params.k.unwrap_or(0))?,
        };
        let n = code.index_bits as usize;
        let design = match params.design {
            DesignChoice::Polynomial => build_poly_design_any(n, params.m)?,
            DesignChoice::Disjoint => build_disjoint_design(n, params.m)?,
        };
        if design.t() as u128 != params.t || design.n() != params.n {
            return Err(Error::InvalidArgument(format!(
                "built design (t={}, n={}) disagrees with parameters (t={}, n={})",
                design.t(),
                design.n(),
                params.t,
                params.n
            )));
        }
        if design.rho_f64() > params.rho + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "design ratio {} exceeds parameter ρ = {}",
                design.rho_f64(),
                params.rho
            )));
        }
        let mut inst = Self::new(code, design)?;
        inst.params = Some(params);
        Ok(inst)
    }

    pub fn params(&self) -> Option<&ExtractorParams> {
        self.params.as_ref()
    }

    pub fn design(&self) -> &WeakDesign {
        &self.design
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    /// The code index `y_{S_i}`.
    pub fn seed_index(&self, y: &BitString, i: usize) -> u128 {
        self.design
            .set(i)
            .iter()
            .enumerate()
            .fold(0u128, |acc, (pos, &s)| {
                acc | ((y.get(s as usize) as u128) << pos)
            })
    }

    fn check_inputs<S: BitSource + ?Sized>(&self, x: &S, y: &BitString) -> Result<()> {
        if x.bit_len() != self.code.message_len {
            return Err(Error::LengthMismatch {
                expected: self.code.message_len,
                actual: x.bit_len(),
            });
        }
        if y.len() != self.design.t() {
            return Err(Error::LengthMismatch {
                expected: self.design.t(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    pub fn nw_bit<S: BitSource + ?Sized>(&self, x: &S, y: &BitString, i: usize) -> Result<bool> {
        self.check_inputs(x, y)?;
        if i >= self.design.m() {
            return Err(Error::IndexOutOfRange {
                index: i as u128,
                limit: self.design.m().to_string(),
            });
        }
        Ok(Encoder::new(&self.code, x).bit(self.seed_index(y, i)))
    }

    /// All `m` output bits, evaluated in parallel.
    pub fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        self.check_inputs(x, y)?;
        let enc = Encoder::new(&self.code, x);
        let bits: Vec<bool> = (0..self.design.m())
            .into_par_iter()
            .map(|i| enc.bit(self.seed_index(y, i)))
            .collect();
        Ok(BitString::from_bools(&bits))
    }

    /// Sequential extraction that counts source-bit reads per output bit.
    ///
    /// For RS∘Hadamard the whole message is read once to pack the polynomial;
    /// that cost is attributed to the first output bit.
    pub fn extract_instrumented(&self, x: &BitString, y: &BitString) -> Result<(BitString, ReadStats)> {
        self.check_inputs(x, y)?;
        let counter = CountingSource::new(x);
        let enc = Encoder::new(&self.code, &counter);
        let mut out = BitString::zeros(self.design.m());
        let mut stats = ReadStats {
            min_reads_per_bit: u64::MAX,
            ..Default::default()
        };
        let mut before = 0;
        for i in 0..self.design.m() {
            out.set(i, enc.bit(self.seed_index(y, i)));
            let used = counter.reads() - before;
            before = counter.reads();
            stats.min_reads_per_bit = stats.min_reads_per_bit.min(used);
            stats.max_reads_per_bit = stats.max_reads_per_bit.max(used);
        }
        stats.total_reads = counter.reads();
        if self.design.m() == 0 {
            stats.min_reads_per_bit = 0;
        }
        Ok((out, stats))
    }

    pub fn locality(&self) -> Option<usize> {
        match self.code.kind {
            CodeKind::XorK { k } => Some(k),
            _ => None,
        }
    }
}

impl Extractor for ExtractorInstance {
    fn source_len(&self) -> usize {
        self.code.message_len
    }
    fn seed_len(&self) -> usize {
        self.design.t()
    }
    fn output_len(&self) -> usize {
        self.design.m()
    }
    fn evaluate(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        self.extract(x, y)
    }
}
