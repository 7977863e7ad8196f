//! Exact desk-scale measurement of extractor security.
//!
//! Distances use half the L1 / trace norm, so a diagonal quantum state gives
//! the same number as the classical statistical distance.

use nalgebra::{Complex, DMatrix};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::codes::CodeSpec;
use crate::error::{Error, Result};
use crate::extract::{Extractor, OneBitExtractor};

/// Default cap on classical enumeration work (evaluations plus histogram cells).
pub const DEFAULT_BUDGET: u128 = 1 << 28;
/// Default cap on complex matrix entries held by one quantum computation.
pub const DEFAULT_QUANTUM_BUDGET: u128 = 1 << 22;
pub const STATE_TOLERANCE: f64 = 1e-9;
const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

pub type CMatrix = DMatrix<Complex<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub enum SourceForm {
    Flat(Vec<BitString>),
    Table(Vec<(BitString, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceDistribution {
    n: usize,
    form: SourceForm,
}

fn check_support<'a>(n: usize, xs: impl Iterator<Item = &'a BitString>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for x in xs {
        if x.len() != n {
            return Err(Error::InvalidDistribution(format!(
                "string of length {} in a source over {n} bits",
                x.len()
            )));
        }
        if !seen.insert(x) {
            return Err(Error::InvalidDistribution(format!("duplicate string {x:?}")));
        }
    }
    if seen.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    Ok(())
}

impl SourceDistribution {
    pub fn flat(n: usize, support: Vec<BitString>) -> Result<Self> {
        check_support(n, support.iter())?;
        Ok(SourceDistribution {
            n,
            form: SourceForm::Flat(support),
        })
    }

    pub fn table(n: usize, entries: Vec<(BitString, f64)>) -> Result<Self> {
        check_support(n, entries.iter().map(|(x, _)| x))?;
        if let Some((x, p)) = entries.iter().find(|(_, p)| !(*p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} for {x:?}"
            )));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(SourceDistribution {
            n,
            form: SourceForm::Table(entries),
        })
    }

    /// Uniform over `{0,1}^n`, `n ≤ 30`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n > 30 {
            return Err(Error::Refused {
                what: "uniform source",
                required: format!("2^{n} strings"),
                cap: "2^30".into(),
            });
        }
        Self::flat(n, (0..1u64 << n).map(|v| BitString::from_u64(v, n)).collect())
    }

    pub fn point_mass(x: BitString) -> Self {
        SourceDistribution {
            n: x.len(),
            form: SourceForm::Flat(vec![x]),
        }
    }

    /// A uniformly random flat source of `2^k` distinct `n`-bit strings.
    pub fn random_flat<R: Rng + ?Sized>(n: usize, k: u32, rng: &mut R) -> Result<Self> {
        if n > 30 || k as usize > n {
            return Err(Error::InvalidArgument(format!(
                "random flat source needs k ≤ n ≤ 30 (got n={n}, k={k})"
            )));
        }
        let support = sample(rng, 1usize << n, 1usize << k)
            .into_iter()
            .map(|v| BitString::from_u64(v as u64, n))
            .collect();
        Self::flat(n, support)
    }

    pub fn source_len(&self) -> usize {
        self.n
    }

    pub fn form(&self) -> &SourceForm {
        &self.form
    }

    pub fn support_size(&self) -> usize {
        match &self.form {
            SourceForm::Flat(s) => s.len(),
            SourceForm::Table(t) => t.len(),
        }
    }

    /// `(x, Pr[X = x])` for every support element.
    pub fn entries(&self) -> Vec<(&BitString, f64)> {
        match &self.form {
            SourceForm::Flat(s) => {
                let p = 1.0 / s.len() as f64;
                s.iter().map(|x| (x, p)).collect()
            }
            SourceForm::Table(t) => t.iter().map(|(x, p)| (x, *p)).collect(),
        }
    }

    pub fn summary(&self) -> SourceSummary {
        SourceSummary {
            source_len: self.n,
            form: match self.form {
                SourceForm::Flat(_) => "flat",
                SourceForm::Table(_) => "table",
            },
            support_size: self.support_size(),
            min_entropy: min_entropy(self),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceSummary {
    pub source_len: usize,
    pub form: &'static str,
    pub support_size: usize,
    pub min_entropy: f64,
}

/// `−log2 max_x Pr[X = x]`.
pub fn min_entropy(src: &SourceDistribution) -> f64 {
    match &src.form {
        SourceForm::Flat(s) => (s.len() as f64).log2(),
        SourceForm::Table(t) => {
            let pmax = t.iter().map(|(_, p)| *p).fold(0.0, f64::max);
            -pmax.log2()
        }
    }
}

fn check_small(ext: &dyn Extractor, src: &SourceDistribution) -> Result<()> {
    if src.source_len() != ext.source_len() {
        return Err(Error::LengthMismatch {
            expected: ext.source_len(),
            actual: src.source_len(),
        });
    }
    if ext.seed_len() > 40 || ext.output_len() > 40 {
        return Err(Error::Refused {
            what: "exhaustive enumeration",
            required: format!("2^{} seeds, 2^{} outputs", ext.seed_len(), ext.output_len()),
            cap: "2^40".into(),
        });
    }
    Ok(())
}

/// Work units for [`classical_distance`]: one per `(x, y)` evaluation plus
/// one per `(u, y)` histogram cell.
pub fn classical_budget_required(ext: &dyn Extractor, src: &SourceDistribution) -> u128 {
    let seeds = 1u128 << ext.seed_len().min(100);
    seeds * (src.support_size() as u128 + (1u128 << ext.output_len().min(100)))
}

fn refuse_over(required: u128, cap: u128) -> Result<()> {
    if required > cap {
        return Err(Error::BudgetExceeded { required, cap });
    }
    Ok(())
}

/// Statistical distance between `(Ext(X, Y), Y)` and uniform on `m + t` bits.
///
/// Flat sources are summed in exact integers; tables accumulate in `f64` with
/// a fixed summation order.
pub fn classical_distance(ext: &dyn Extractor, src: &SourceDistribution, budget: u128) -> Result<f64> {
    check_small(ext, src)?;
    refuse_over(classical_budget_required(ext, src), budget)?;
    let (t, m) = (ext.seed_len(), ext.output_len());
    let outputs = 1usize << m;
    let per_seed = |y: u64, mut visit: Box<dyn FnMut(usize, usize) + '_>| -> Result<()> {
        let ys = BitString::from_u64(y, t);
        for (i, (x, _)) in src.entries().into_iter().enumerate() {
            let u = ext.evaluate(x, &ys)?.to_u64() as usize;
            visit(i, u);
        }
        Ok(())
    };
    match &src.form {
        SourceForm::Flat(support) => {
            let s = support.len() as u128;
            let sums: Vec<u128> = (0..1u64 << t)
                .into_par_iter()
                .map(|y| {
                    let mut counts = vec![0u128; outputs];
                    per_seed(y, Box::new(|_, u| counts[u] += 1))?;
                    Ok(counts
                        .iter()
                        .map(|&c| (c << m).abs_diff(s))
                        .sum::<u128>())
                })
                .collect::<Result<_>>()?;
            let total: u128 = sums.iter().sum();
            // Σ |c·2^m − S| / (2 S 2^{m+t})
            Ok(total as f64 / (2.0 * s as f64 * (1u128 << (m + t)) as f64))
        }
        SourceForm::Table(entries) => {
            let ideal = 1.0 / outputs as f64;
            let sums: Vec<f64> = (0..1u64 << t)
                .into_par_iter()
                .map(|y| {
                    let mut mass = vec![0.0f64; outputs];
                    per_seed(y, Box::new(|i, u| mass[u] += entries[i].1))?;
                    Ok(mass.iter().map(|p| (p - ideal).abs()).sum::<f64>())
                })
                .collect::<Result<_>>()?;
            Ok(sums.iter().sum::<f64>() / (2.0 * (1u64 << t) as f64))
        }
    }
}

fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Average with the adjoint so rounding cannot produce complex eigenvalues.
fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn eigenvalues(a: &CMatrix) -> Vec<f64> {
    symmetrize(a).symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    let defect = hermitian_defect(a);
    if defect > STATE_TOLERANCE {
        return Err(Error::InvalidAdversary(format!(
            "matrix not Hermitian (defect {defect:e})"
        )));
    }
    Ok(eigenvalues(a).iter().map(|e| e.abs()).sum())
}

/// Checks that `rho` is a `2^b`-dimensional density matrix.
pub fn check_density_matrix(rho: &CMatrix, b: usize) -> Result<()> {
    let d = 1usize << b;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::InvalidAdversary(format!(
            "state is {}×{}, expected {d}×{d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let defect = hermitian_defect(rho);
    if defect > STATE_TOLERANCE {
        return Err(Error::InvalidAdversary(format!(
            "state not Hermitian (defect {defect:e})"
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
        return Err(Error::InvalidAdversary(format!("state trace {tr}")));
    }
    let min = eigenvalues(rho).into_iter().fold(f64::INFINITY, f64::min);
    if min < -STATE_TOLERANCE {
        return Err(Error::InvalidAdversary(format!(
            "state has eigenvalue {min:e}"
        )));
    }
    Ok(())
}

fn check_measurement(m0: &CMatrix, m1: &CMatrix, b: usize) -> Result<()> {
    let d = 1usize << b;
    if m0.shape() != (d, d) || m1.shape() != (d, d) {
        return Err(Error::InvalidAdversary("measurement has wrong dimension".into()));
    }
    let sum = m0.adjoint() * m0 + m1.adjoint() * m1;
    let defect = (sum - CMatrix::identity(d, d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if defect > STATE_TOLERANCE {
        return Err(Error::InvalidAdversary(format!(
            "measurement operators do not sum to identity (defect {defect:e})"
        )));
    }
    Ok(())
}

type StorageFn = dyn Fn(&BitString) -> CMatrix + Send + Sync;
type DistinguisherFn = dyn Fn(u64, u64) -> (CMatrix, CMatrix) + Send + Sync;

/// A storage map `x ↦ Ψ(x)` on `b` qubits, with an optional two-outcome
/// measurement `{M⁰_{u,y}, M¹_{u,y}}` for diagnostic advantage evaluation.
pub struct QuantumAdversary {
    b: usize,
    storage: Box<StorageFn>,
    distinguisher: Option<Box<DistinguisherFn>>,
}

impl QuantumAdversary {
    pub fn new(b: usize, storage: impl Fn(&BitString) -> CMatrix + Send + Sync + 'static) -> Self {
        QuantumAdversary {
            b,
            storage: Box::new(storage),
            distinguisher: None,
        }
    }

    /// Ψ(x) = σ for every x.
    pub fn constant(sigma: CMatrix) -> Result<Self> {
        let b = sigma.nrows().trailing_zeros() as usize;
        check_density_matrix(&sigma, b)?;
        Ok(Self::new(b, move |_| sigma.clone()))
    }

    pub fn with_distinguisher(
        mut self,
        d: impl Fn(u64, u64) -> (CMatrix, CMatrix) + Send + Sync + 'static,
    ) -> Self {
        self.distinguisher = Some(Box::new(d));
        self
    }

    pub fn qubits(&self) -> usize {
        self.b
    }

    /// Ψ(x), validated.
    pub fn state(&self, x: &BitString) -> Result<CMatrix> {
        let rho = (self.storage)(x);
        check_density_matrix(&rho, self.b)?;
        Ok(rho)
    }

    pub fn measurement(&self, u: u64, y: u64) -> Result<Option<(CMatrix, CMatrix)>> {
        match &self.distinguisher {
            None => Ok(None),
            Some(d) => {
                let (m0, m1) = d(u, y);
                check_measurement(&m0, &m1, self.b)?;
                Ok(Some((m0, m1)))
            }
        }
    }
}

/// `|v⟩⟨v|` for a basis vector `v = e_index` in dimension `2^b`.
pub fn basis_state(b: usize, index: usize) -> CMatrix {
    let d = 1usize << b;
    let mut m = CMatrix::zeros(d, d);
    m[(index, index)] = Complex::new(1.0, 0.0);
    m
}

/// Ψ(x) = |f(x)⟩⟨f(x)| for a classical `b`-bit storage function.
pub fn embed_classical_adversary(
    b: usize,
    f: impl Fn(&BitString) -> u64 + Send + Sync + 'static,
) -> QuantumAdversary {
    let mask = (1u64 << b) - 1;
    QuantumAdversary::new(b, move |x| basis_state(b, (f(x) & mask) as usize))
}

fn stream_id(x: &BitString) -> u64 {
    if x.len() <= 64 {
        return x.to_u64();
    }
    x.words().iter().fold(x.len() as u64, |h, &w| {
        (h ^ w).wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(29)
    })
}

/// Ψ(x) = |v_x⟩⟨v_x| with `v_x` a normalized vector of complex standard
/// normals drawn from stream `x` of a generator seeded by `seed`.
pub fn random_adversary(b: usize, seed: u64) -> QuantumAdversary {
    QuantumAdversary::new(b, move |x| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(x));
        let d = 1usize << b;
        let v: Vec<Complex<f64>> = (0..d)
            .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v = nalgebra::DVector::from_iterator(d, v.into_iter().map(|z| z / norm));
        &v * v.adjoint()
    })
}

/// Block-diagonal classical-quantum state: one `2^b × 2^b` block per
/// classical outcome, indexed `u + 2^m · y`.
#[derive(Clone, Debug)]
pub struct CqState {
    pub qubits: usize,
    pub blocks: Vec<CMatrix>,
}

impl CqState {
    pub fn dimension(&self) -> usize {
        self.blocks.len() << self.qubits
    }

    pub fn trace(&self) -> Complex<f64> {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn check(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
            return Err(Error::Structural(format!("cq-state trace {tr}")));
        }
        for blk in &self.blocks {
            if hermitian_defect(blk) > STATE_TOLERANCE {
                return Err(Error::Structural("cq-state block not Hermitian".into()));
            }
        }
        Ok(())
    }
}

pub fn quantum_budget_required(ext: &dyn Extractor, b: usize) -> u128 {
    let cells = 1u128 << (ext.seed_len() + ext.output_len()).min(100);
    2 * cells * (1u128 << (2 * b).min(100))
}

/// `Ext(X, U_t) ∘ Ψ(X) ∘ U_t` and `U_m ∘ Ψ(X) ∘ U_t`.
pub fn cq_states(
    ext: &dyn Extractor,
    src: &SourceDistribution,
    adv: &QuantumAdversary,
    budget: u128,
) -> Result<(CqState, CqState)> {
    check_small(ext, src)?;
    refuse_over(quantum_budget_required(ext, adv.qubits()), budget)?;
    let (t, m, b) = (ext.seed_len(), ext.output_len(), adv.qubits());
    let d = 1usize << b;
    let entries = src.entries();
    let states: Vec<CMatrix> = entries.iter().map(|(x, _)| adv.state(x)).collect::<Result<_>>()?;
    let mut avg = CMatrix::zeros(d, d);
    for ((_, p), s) in entries.iter().zip(&states) {
        avg += s.scale(*p);
    }
    let seed_weight = 1.0 / (1u64 << t) as f64;
    let ideal_block = avg.scale(seed_weight / (1u64 << m) as f64);
    let per_seed: Vec<Vec<CMatrix>> = (0..1u64 << t)
        .into_par_iter()
        .map(|y| {
            let ys = BitString::from_u64(y, t);
            let mut blocks = vec![CMatrix::zeros(d, d); 1 << m];
            for ((x, p), s) in entries.iter().zip(&states) {
                let u = ext.evaluate(x, &ys)?.to_u64() as usize;
                blocks[u] += s.scale(p * seed_weight);
            }
            Ok(blocks)
        })
        .collect::<Result<_>>()?;
    let real = CqState {
        qubits: b,
        blocks: per_seed.into_iter().flatten().collect(),
    };
    let ideal = CqState {
        qubits: b,
        blocks: vec![ideal_block; 1 << (m + t)],
    };
    real.check()?;
    ideal.check()?;
    Ok((real, ideal))
}

/// Half the trace norm between the real and ideal cq-states.
pub fn quantum_distance(
    ext: &dyn Extractor,
    src: &SourceDistribution,
    adv: &QuantumAdversary,
    budget: u128,
) -> Result<f64> {
    let (real, ideal) = cq_states(ext, src, adv, budget)?;
    let norms: Vec<f64> = real
        .blocks
        .par_iter()
        .zip(ideal.blocks.par_iter())
        .map(|(r, i)| trace_norm(&(r - i)))
        .collect::<Result<_>>()?;
    Ok(norms.iter().sum::<f64>() / 2.0)
}

/// `|Pr_real[outcome 0] − Pr_ideal[outcome 0]|` for the adversary's own
/// measurement. Never exceeds [`quantum_distance`].
pub fn distinguisher_advantage(
    ext: &dyn Extractor,
    src: &SourceDistribution,
    adv: &QuantumAdversary,
    budget: u128,
) -> Result<f64> {
    if adv.distinguisher.is_none() {
        return Err(Error::InvalidAdversary("adversary has no distinguisher".into()));
    }
    let (real, ideal) = cq_states(ext, src, adv, budget)?;
    let m = ext.output_len();
    let mut diff = 0.0;
    for (idx, (r, i)) in real.blocks.iter().zip(&ideal.blocks).enumerate() {
        let (u, y) = ((idx & ((1 << m) - 1)) as u64, (idx >> m) as u64);
        let (m0, _) = adv.measurement(u, y)?.expect("checked above");
        diff += ((m0.adjoint() * &m0) * (r - i)).trace().re;
    }
    Ok(diff.abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct OneBitScanReport {
    pub source_len: usize,
    pub min_entropy: u32,
    pub epsilon: f64,
    pub trials: usize,
    pub max_distance: f64,
    pub mean_distance: f64,
    pub pass: bool,
    pub distances: Vec<f64>,
}

/// Measures `E(x, y) = C(x)_y` on `trials` random flat sources of
/// min-entropy `k`.
pub fn one_bit_security_scan(
    code: &CodeSpec,
    k: u32,
    epsilon: f64,
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<OneBitScanReport> {
    let ext = OneBitExtractor { code: code.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut distances = Vec::with_capacity(trials);
    for _ in 0..trials {
        let src = SourceDistribution::random_flat(code.message_len, k, &mut rng)?;
        distances.push(classical_distance(&ext, &src, budget)?);
    }
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    let mean_distance = if trials == 0 {
        0.0
    } else {
        distances.iter().sum::<f64>() / trials as f64
    };
    Ok(OneBitScanReport {
        source_len: code.message_len,
        min_entropy: k,
        epsilon,
        trials,
        max_distance,
        mean_distance,
        pass: max_distance <= epsilon,
        distances,
    })
}
