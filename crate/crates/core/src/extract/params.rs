//! Parameter calculator for the quantum-storage-secure extractor.
//!
//! Output length is the largest `m` with
//!
//! ```text
//! m ≤ (K − b − t − h·N − log L − c_log (log(1/ε) + log N)) / (1 + ρ)
//! ```
//!
//! where `t`, `L`, `ρ`, and the per-bit entropy charge `h` are those of the
//! concrete code and design that `m` induces. Because they depend on `m`, the
//! solver iterates downward from `m = K` to a fixed point and then bisects
//! upward to the largest consistent value.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::codes::{binomial_big, ceil_log2_big, rs_hadamard_sizing_unbounded};
use crate::designs::PolyDesign;
use crate::error::{Error, Result};

const MAX_ITERATIONS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Reed-Solomon ∘ Hadamard code, logarithmic seed.
    RsHadamard,
    /// k-XOR code, locally computable.
    Xor,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignChoice {
    #[default]
    Polynomial,
    Disjoint,
}

/// The unspecified constants of the asymptotic bounds, made explicit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Multiplier on the `log(1/ε) + log N` slack.
    pub c_log: f64,
    /// Multiplier in `k = ⌈c_k ln(2m/ε) / δ²⌉`.
    pub c_k: f64,
    /// Multiplier on the RS∘Hadamard list size `4 (m/ε)²`.
    pub c_l: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            c_log: 4.0,
            c_k: 1.0,
            c_l: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Knobs {
    /// RS∘Hadamard: target `ρ = K^{γ/2}`.
    pub gamma: Option<f64>,
    /// RS∘Hadamard: explicit target ρ (overrides `gamma`).
    pub rho_target: Option<f64>,
    /// XOR: approximation parameter δ.
    pub delta: Option<f64>,
    pub constants: Constants,
    pub design: DesignChoice,
    /// Zero `t`, `log L`, and the logarithmic slack, and use the target ρ,
    /// leaving only the leading-order terms.
    pub diagnostic_zero_slack: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsRequest {
    pub source_len: u64,
    /// Min-entropy K in bits; defaults to `alpha · N`.
    pub min_entropy: Option<f64>,
    pub alpha: Option<f64>,
    pub storage: f64,
    /// Defaults to `N^{-error_exponent}`.
    pub epsilon: Option<f64>,
    pub error_exponent: f64,
    pub variant: Variant,
    pub knobs: Knobs,
}

impl ParamsRequest {
    pub fn new(source_len: u64, storage: f64, variant: Variant) -> Self {
        ParamsRequest {
            source_len,
            min_entropy: None,
            alpha: None,
            storage,
            epsilon: None,
            error_exponent: 1.0,
            variant,
            knobs: Knobs::default(),
        }
    }

    pub fn resolved_min_entropy(&self) -> Result<f64> {
        match (self.min_entropy, self.alpha) {
            (Some(k), _) => Ok(k),
            (None, Some(a)) => Ok(a * self.source_len as f64),
            (None, None) => Err(Error::InvalidArgument(
                "either min-entropy K or rate α is required".into(),
            )),
        }
    }

    pub fn resolved_epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| (self.source_len as f64).powf(-self.error_exponent))
    }
}

/// Each term of the output-length inequality, evaluated at one `m`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FormulaTerms {
    pub min_entropy: f64,
    pub storage: f64,
    pub seed_len: f64,
    pub entropy_loss: f64,
    pub log_list_size: f64,
    pub slack: f64,
    pub numerator: f64,
    pub one_plus_rho: f64,
    /// `numerator / (1 + ρ)`.
    pub m_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub reason: String,
    pub request: ParamsRequest,
    /// Terms at the smallest candidate tried (`m = 1` unless noted).
    pub terms: Option<FormulaTerms>,
    pub at_m: u64,
    pub constants: Constants,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (at m = {})", self.reason, self.at_m)?;
        if let Some(t) = &self.terms {
            write!(
                f,
                "; K={} b={} t={} H·N={} logL={} slack={} numerator={} 1+ρ={}",
                t.min_entropy,
                t.storage,
                t.seed_len,
                t.entropy_loss,
                t.log_list_size,
                t.slack,
                t.numerator,
                t.one_plus_rho
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams {
    pub variant: Variant,
    pub source_len: usize,
    pub min_entropy: f64,
    pub storage: f64,
    pub epsilon: f64,
    /// Security error of the resulting extractor, `2ε`.
    pub extractor_error: f64,
    pub m: usize,
    pub t: u128,
    /// Code index width `log2 N̄`.
    pub n: usize,
    pub rho: f64,
    pub rho_exact: String,
    pub rho_target: Option<f64>,
    pub gamma: Option<f64>,
    /// Approximation radius of the code at margin `ε/m`.
    pub delta: f64,
    /// `H(delta)`.
    pub entropy_delta: f64,
    /// Entropy charged per source bit; `≥ entropy_delta`.
    pub entropy_charge: f64,
    /// XOR knob δ.
    pub delta_target: Option<f64>,
    pub list_size: f64,
    pub log_list_size: f64,
    pub k: Option<usize>,
    pub field_width: Option<u32>,
    pub degree_bound: Option<usize>,
    pub design: DesignChoice,
    pub design_degree_bound: Option<usize>,
    pub constants: Constants,
    pub diagnostic_zero_slack: bool,
    pub terms: FormulaTerms,
    pub iterations: u32,
}

impl ExtractorParams {
    /// Re-evaluates the output-length inequality from the stored fields.
    pub fn satisfies_inequality(&self) -> bool {
        let n = self.source_len as f64;
        let slack = if self.diagnostic_zero_slack {
            0.0
        } else {
            self.constants.c_log * ((1.0 / self.epsilon).log2() + n.log2())
        };
        let (t, log_l) = if self.diagnostic_zero_slack {
            (0.0, 0.0)
        } else {
            (self.t as f64, self.list_size.log2())
        };
        let numerator =
            self.min_entropy - self.storage - t - self.entropy_charge * n - log_l - slack;
        let bound = numerator / (1.0 + self.rho);
        let entropy_ok = (binary_entropy(self.delta).unwrap_or(f64::NAN) - self.entropy_delta)
            .abs()
            <= 1e-12
            && self.entropy_charge + 1e-12 >= self.entropy_delta;
        self.m >= 1 && (self.m as f64) <= bound + 1e-9 && entropy_ok
    }
}

/// `H(p) = −p log p − (1−p) log(1−p)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "binary entropy argument {p} outside [0, 1]"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Which specialization of the access-code length bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum QfacFamily {
    /// `H(δ)N + b + log L + c_log log(1/ε)`.
    General { delta: f64, list_size: f64 },
    /// `b + c_log log(1/ε)`.
    RsHadamard,
    /// `b + H((1/k) ln(2/ε)) N + c_log log(1/ε)`.
    Xor { k: u64 },
}

/// Upper bound (bits) on `log |A|` for a set `A` admitting a `b`-qubit
/// functional access code with advantage `ε`.
pub fn qfac_bound(
    source_len: f64,
    storage: f64,
    epsilon: f64,
    family: QfacFamily,
    c_log: f64,
    diagnostic_zero_slack: bool,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} outside (0, 1/2]")));
    }
    if storage < 0.0 || source_len < 0.0 {
        return Err(Error::InvalidArgument("negative length or storage".into()));
    }
    let slack = if diagnostic_zero_slack {
        0.0
    } else {
        c_log * (1.0 / epsilon).log2()
    };
    match family {
        QfacFamily::General { delta, list_size } => {
            if !(0.0..=0.5).contains(&delta) || list_size < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "need δ ∈ [0, 1/2] and L ≥ 1 (got δ={delta}, L={list_size})"
                )));
            }
            Ok(binary_entropy(delta)? * source_len + storage + list_size.log2() + slack)
        }
        QfacFamily::RsHadamard => Ok(storage + slack),
        QfacFamily::Xor { k } => {
            if k == 0 {
                return Err(Error::InvalidArgument("k must be ≥ 1".into()));
            }
            let k = k as f64;
            // List decoding needs ε > 2k²/2^N.
            if epsilon.log2() <= 1.0 + 2.0 * k.log2() - source_len {
                return Err(Error::InvalidArgument(format!(
                    "ε = {epsilon} ≤ 2k²/2^N for k = {k}, N = {source_len}"
                )));
            }
            let delta = (2.0 / epsilon).ln() / k;
            if delta > 0.5 {
                return Err(Error::InvalidArgument(format!(
                    "radius (1/k) ln(2/ε) = {delta} exceeds 1/2"
                )));
            }
            Ok(storage + binary_entropy(delta)? * source_len + slack)
        }
    }
}

/// Code, design, and formula terms induced by one candidate `m`.
#[derive(Clone, Debug)]
struct Candidate {
    m: u64,
    t: u128,
    n: u64,
    rho: f64,
    rho_exact: String,
    design_degree_bound: Option<usize>,
    delta: f64,
    entropy_charge: f64,
    list_size: f64,
    k: Option<u64>,
    field_width: Option<u32>,
    degree_bound: Option<usize>,
    terms: FormulaTerms,
    /// Set when the code or design cannot exist at this `m`.
    invalid: Option<String>,
}

impl Candidate {
    fn feasible_m(&self) -> i128 {
        if self.invalid.is_some() || !self.terms.m_bound.is_finite() {
            return -1;
        }
        (self.terms.m_bound + 1e-9).floor().max(-1.0) as i128
    }
}

struct Solver<'a> {
    req: &'a ParamsRequest,
    n_bits: f64,
    min_entropy: f64,
    epsilon: f64,
    rho_target: Option<f64>,
}

impl Solver<'_> {
    fn evaluate(&self, m: u64) -> Result<Candidate> {
        let knobs = &self.req.knobs;
        let c = knobs.constants;
        let mf = m as f64;
        let margin = self.epsilon / mf;
        let mut cand = Candidate {
            m,
            t: 0,
            n: 0,
            rho: 1.0,
            rho_exact: "1".into(),
            design_degree_bound: None,
            delta: 0.0,
            entropy_charge: 0.0,
            list_size: 1.0,
            k: None,
            field_width: None,
            degree_bound: None,
            terms: FormulaTerms::default(),
            invalid: None,
        };

        match self.req.variant {
            Variant::RsHadamard => {
                let (l, d) = rs_hadamard_sizing_unbounded(self.req.source_len as usize, margin)?;
                cand.field_width = Some(l);
                cand.degree_bound = Some(d);
                cand.n = 2 * l as u64;
                cand.list_size = (4.0 * (mf / self.epsilon).powi(2) * c.c_l).ceil();
            }
            Variant::Xor => {
                let delta = knobs.delta.expect("validated");
                let ln_term = (2.0 * mf / self.epsilon).ln();
                let k = (c.c_k * ln_term / (delta * delta)).ceil().max(1.0) as u64;
                cand.k = Some(k);
                cand.delta = (ln_term / k as f64).min(1.0);
                cand.entropy_charge = (2.0 * delta).max(binary_entropy(cand.delta)?);
                cand.list_size = (4.0 * (mf / self.epsilon).powi(2)).ceil();
                if k > self.req.source_len {
                    cand.invalid = Some(format!("k = {k} exceeds N = {}", self.req.source_len));
                } else if margin.log2() <= 1.0 + 2.0 * (k as f64).log2() - self.n_bits {
                    cand.invalid = Some(format!("margin ε/m ≤ 2k²/2^N for k = {k}"));
                } else if !knobs.diagnostic_zero_slack {
                    cand.n = ceil_log2_big(&binomial_big(self.req.source_len, k));
                }
            }
        }

        if knobs.diagnostic_zero_slack {
            cand.rho = self.rho_target.unwrap_or(1.0);
            cand.rho_exact = cand.rho.to_string();
        } else if cand.invalid.is_none() {
            let n = cand.n as usize;
            match knobs.design {
                DesignChoice::Polynomial => {
                    if n == 0 {
                        cand.invalid = Some("code index width is 0".into());
                    } else {
                        let pd = PolyDesign::new(n, m as usize)?;
                        let rho = pd.rho();
                        cand.t = pd.universe();
                        cand.rho = rho.to_f64().unwrap_or(f64::INFINITY);
                        cand.rho_exact = rho.to_string();
                        cand.design_degree_bound = Some(pd.degree_bound());
                    }
                }
                DesignChoice::Disjoint => {
                    cand.t = n as u128 * m as u128;
                }
            }
        }

        let diag = knobs.diagnostic_zero_slack;
        let terms = &mut cand.terms;
        terms.min_entropy = self.min_entropy;
        terms.storage = self.req.storage;
        terms.seed_len = if diag { 0.0 } else { cand.t as f64 };
        terms.entropy_loss = cand.entropy_charge * self.n_bits;
        terms.log_list_size = if diag { 0.0 } else { cand.list_size.log2() };
        terms.slack = if diag {
            0.0
        } else {
            c.c_log * ((1.0 / self.epsilon).log2() + self.n_bits.log2())
        };
        terms.numerator = terms.min_entropy
            - terms.storage
            - terms.seed_len
            - terms.entropy_loss
            - terms.log_list_size
            - terms.slack;
        terms.one_plus_rho = 1.0 + cand.rho;
        terms.m_bound = terms.numerator / terms.one_plus_rho;
        Ok(cand)
    }

    fn infeasible(&self, reason: impl Into<String>, cand: Option<&Candidate>) -> Error {
        Error::Infeasible(Box::new(InfeasibilityReport {
            reason: reason.into(),
            request: self.req.clone(),
            terms: cand.map(|c| c.terms.clone()),
            at_m: cand.map(|c| c.m).unwrap_or(1),
            constants: self.req.knobs.constants,
        }))
    }

    fn solve(&self) -> Result<(Candidate, u32)> {
        if self.req.knobs.diagnostic_zero_slack {
            let probe = self.evaluate(1)?;
            let m = probe.feasible_m();
            if m < 1 {
                return Err(self.infeasible("leading-order terms leave no output", Some(&probe)));
            }
            return Ok((self.evaluate(m as u64)?, 1));
        }

        let mut m = (self.min_entropy.floor() as u64).max(1);
        let mut upper_infeasible: Option<u64> = None;
        let mut iterations = 0;
        let mut found = None;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let cand = self.evaluate(m)?;
            let fm = cand.feasible_m();
            if fm >= m as i128 {
                found = Some(cand);
                break;
            }
            upper_infeasible = Some(m);
            if m == 1 {
                let reason = cand
                    .invalid
                    .clone()
                    .unwrap_or_else(|| "no output length m ≥ 1 satisfies the bound".into());
                return Err(self.infeasible(reason, Some(&cand)));
            }
            m = (fm.max(1) as u64).min(m - 1);
        }
        let Some(mut best) = found else {
            return Err(self.infeasible(
                format!("no fixed point within {MAX_ITERATIONS} iterations"),
                None,
            ));
        };
        // The fixed-point step can undershoot; bisect toward the last infeasible m.
        if let Some(mut hi) = upper_infeasible {
            let mut lo = best.m;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let cand = self.evaluate(mid)?;
                iterations += 1;
                if cand.feasible_m() >= mid as i128 {
                    lo = mid;
                    best = cand;
                } else {
                    hi = mid;
                }
            }
        }
        Ok((best, iterations))
    }
}

/// Solves for the largest output length and fills every derived parameter.
pub fn compute_params(req: &ParamsRequest) -> Result<ExtractorParams> {
    let n_bits = req.source_len as f64;
    let min_entropy = req.resolved_min_entropy()?;
    let epsilon = req.resolved_epsilon();
    let knobs = &req.knobs;
    if req.source_len == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if !(min_entropy > 0.0 && min_entropy <= n_bits) {
        return Err(Error::InvalidArgument(format!(
            "K = {min_entropy} outside (0, N]"
        )));
    }
    if !(req.storage >= 0.0) {
        return Err(Error::InvalidArgument("storage b must be ≥ 0".into()));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} outside (0, 1/2)")));
    }
    let c = knobs.constants;
    if !(c.c_log >= 0.0 && c.c_k > 0.0 && c.c_l > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid constants {c:?}")));
    }
    let rho_target = match req.variant {
        Variant::RsHadamard => {
            if let Some(g) = knobs.gamma {
                if !(g > 0.0) {
                    return Err(Error::InvalidArgument(format!("γ = {g} must be > 0")));
                }
            }
            knobs
                .rho_target
                .or(knobs.gamma.map(|g| min_entropy.powf(g / 2.0)))
        }
        Variant::Xor => {
            match knobs.delta {
                Some(d) if d > 0.0 && d < 0.5 => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "XOR variant needs δ ∈ (0, 1/2), got {other:?}"
                    )))
                }
            }
            Some(1.0)
        }
    };
    if let Some(r) = rho_target {
        if !(r >= 1.0) {
            return Err(Error::InvalidArgument(format!("target ρ = {r} must be ≥ 1")));
        }
    }
    if req.storage >= min_entropy {
        let solver = Solver {
            req,
            n_bits,
            min_entropy,
            epsilon,
            rho_target,
        };
        let probe = solver.evaluate(1).ok();
        return Err(solver.infeasible("storage b ≥ min-entropy K", probe.as_ref()));
    }

    let solver = Solver {
        req,
        n_bits,
        min_entropy,
        epsilon,
        rho_target,
    };
    let (cand, iterations) = solver.solve()?;
    let params = ExtractorParams {
        variant: req.variant,
        source_len: req.source_len as usize,
        min_entropy,
        storage: req.storage,
        epsilon,
        extractor_error: 2.0 * epsilon,
        m: cand.m as usize,
        t: cand.t,
        n: cand.n as usize,
        rho: cand.rho,
        rho_exact: cand.rho_exact,
        rho_target,
        gamma: knobs.gamma,
        delta: cand.delta,
        entropy_delta: binary_entropy(cand.delta)?,
        entropy_charge: cand.entropy_charge,
        delta_target: knobs.delta.filter(|_| req.variant == Variant::Xor),
        list_size: cand.list_size,
        log_list_size: cand.list_size.log2(),
        k: cand.k.map(|k| k as usize),
        field_width: cand.field_width,
        degree_bound: cand.degree_bound,
        design: knobs.design,
        design_degree_bound: cand.design_degree_bound,
        constants: c,
        diagnostic_zero_slack: knobs.diagnostic_zero_slack,
        terms: cand.terms,
        iterations,
    };
    debug_assert!(params.satisfies_inequality());
    Ok(params)
}
