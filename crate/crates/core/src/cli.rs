//! Command-line surface: `params`, `design`, `extract`, `verify`, `bench`.
//!
//! Every command prints one JSON document on stdout. Exit codes: 0 ok,
//! 1 usage or input error, 2 infeasible parameters, 3 budget exceeded,
//! 4 a check failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::codes::{encode_full, CodeSpec, DEFAULT_ENCODE_CAP};
use crate::designs::{
    build_disjoint_design, build_poly_design, build_poly_design_any, verify_design, WeakDesign,
};
use crate::error::{Error, Result};
use crate::extract::{
    compute_params, Constants, DesignChoice, ExtractorInstance, ExtractorParams, FnExtractor,
    OneBitExtractor, ParamsRequest, ReadStats, Variant,
};
use crate::verify::{
    classical_distance, embed_classical_adversary, one_bit_security_scan, quantum_distance,
    random_adversary, QuantumAdversary, SourceDistribution, DEFAULT_BUDGET,
    DEFAULT_QUANTUM_BUDGET,
};

pub const THREADS_ENV: &str = "QSEXT_THREADS";
pub const BIT_ORDER: &str = "lsb-first";

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => exit::INFEASIBLE,
        Error::BudgetExceeded { .. } | Error::Refused { .. } => exit::BUDGET,
        _ => exit::USAGE,
    }
}

#[derive(Parser, Debug)]
#[command(name = "qsext", version, about = "Quantum-storage-secure randomness extractor")]
pub struct Cli {
    /// JSON file overriding the constants {c_log, c_k, c_l}.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: QSEXT_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for the largest secure output length.
    Params(ParamArgs),
    /// Build a weak design and optionally recheck its ratio.
    Design(DesignArgs),
    /// Extract bits from a source file.
    Extract(ExtractArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Time extraction on a 1 MiB source.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    RsHadamard,
    Xor,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::RsHadamard => Variant::RsHadamard,
            VariantArg::Xor => Variant::Xor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Poly,
    Disjoint,
}

impl From<DesignArg> for DesignChoice {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Poly => DesignChoice::Polynomial,
            DesignArg::Disjoint => DesignChoice::Disjoint,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Source length N in bits.
    #[arg(short = 'N', long = "source-len")]
    pub source_len: Option<u64>,
    /// Min-entropy K in bits.
    #[arg(short = 'K', long = "min-entropy")]
    pub min_entropy: Option<f64>,
    /// Entropy rate; K = α·N.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Adversary storage b in qubits.
    #[arg(short = 'b', long)]
    pub storage: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// ε = N^{-c} when --epsilon is absent.
    #[arg(long, default_value_t = 1.0)]
    pub error_exponent: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rho_target: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = DesignArg::Poly)]
    pub design: DesignArg,
    #[arg(long)]
    pub diagnostic_zero_slack: bool,
    #[arg(long)]
    pub c_log: Option<f64>,
    #[arg(long)]
    pub c_k: Option<f64>,
    #[arg(long)]
    pub c_l: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstructionArg {
    /// Polynomial design; n must be a power of two.
    Poly,
    /// Polynomial design truncated to any n.
    PolyAny,
    Disjoint,
}

#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    #[arg(short = 'n', long)]
    pub n: usize,
    #[arg(short = 'm', long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ConstructionArg::Poly)]
    pub construction: ConstructionArg,
    /// Recompute the ratio by brute force.
    #[arg(long)]
    pub check: bool,
    /// Omit the set list from the report.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output length; selects explicit mode (no parameter solving).
    #[arg(short = 'm', long)]
    pub m: Option<usize>,
    /// XOR locality in explicit mode.
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub field_width: Option<u32>,
    #[arg(long)]
    pub degree_bound: Option<usize>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Seed as hex; digit i holds seed bits 4i..4i+4, least significant first.
    #[arg(long)]
    pub seed: Option<String>,
    /// Draw the seed from the operating system and print it.
    #[arg(long)]
    pub fresh_seed: bool,
    /// Also write the manifest to this file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Design,
    Codes,
    Classical,
    Quantum,
    OneBit,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = DEFAULT_BUDGET as u64)]
    pub budget: u64,
    #[arg(long, default_value_t = DEFAULT_QUANTUM_BUDGET as u64)]
    pub quantum_budget: u64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Design suite set size.
    #[arg(short = 'n', long, default_value_t = 4)]
    pub n: usize,
    /// Design suite set count.
    #[arg(short = 'm', long, default_value_t = 16)]
    pub m: usize,
    /// One-bit suite trials.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// One-bit suite min-entropy.
    #[arg(long, default_value_t = 6)]
    pub entropy: u32,
    /// One-bit suite source length (Hadamard code).
    #[arg(long, default_value_t = 8)]
    pub source_len: usize,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1 << 20)]
    pub bytes: usize,
    #[arg(short = 'k', long, default_value_t = 4)]
    pub k: usize,
    #[arg(short = 'm', long, default_value_t = 1024)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

/// A command's JSON report and exit status.
pub struct Outcome {
    pub report: Value,
    pub code: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome {
            report,
            code: exit::OK,
        }
    }

    fn checked(report: Value, pass: bool) -> Self {
        Outcome {
            report,
            code: if pass { exit::OK } else { exit::CHECK_FAILED },
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // `extract --from-manifest` is accepted without the instance flags.
    if args.get(1).is_some_and(|a| a == "extract")
        && args.iter().any(|a| a == "--from-manifest")
    {
        return run_rerun(&args, out, err);
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    with_pool(cli.threads, out, err, |out| dispatch(&cli, out))
}

#[derive(Parser, Debug)]
#[command(name = "qsext extract")]
struct RerunCli {
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long)]
    from_manifest: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn run_rerun(args: &[OsString], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rest = std::iter::once(args[0].clone()).chain(args[2..].iter().cloned());
    let cli = match RerunCli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    with_pool(cli.threads, out, err, |_| {
        cmd_rerun(&cli.from_manifest, &cli.input, &cli.output)
    })
}

fn with_pool(
    threads: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> Result<Outcome> + Send,
) -> i32 {
    let threads = match threads {
        Some(t) => t,
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => match s.parse() {
                Ok(t) => t,
                Err(_) => {
                    let _ = writeln!(err, "error: {THREADS_ENV}={s:?} is not a thread count");
                    return exit::USAGE;
                }
            },
            Err(_) => 0,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return exit::USAGE;
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| f(&mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(o) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&o.report).unwrap());
            o.code
        }
        Err(e) => {
            if let Error::Infeasible(report) = &e {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&json!({ "feasible": false, "report": report }))
                        .unwrap()
                );
            }
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Params(a) => cmd_params(a, config),
        Command::Design(a) => cmd_design(a),
        Command::Extract(a) => cmd_extract(a, config, out),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

pub fn load_constants(config: Option<&Path>, a: &ParamArgs) -> Result<Constants> {
    let mut c = match config {
        None => Constants::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", p.display())))?
        }
    };
    if let Some(v) = a.c_log {
        c.c_log = v;
    }
    if let Some(v) = a.c_k {
        c.c_k = v;
    }
    if let Some(v) = a.c_l {
        c.c_l = v;
    }
    Ok(c)
}

fn request_from(a: &ParamArgs, config: Option<&Path>, source_len: u64) -> Result<ParamsRequest> {
    let storage = a
        .storage
        .ok_or_else(|| Error::InvalidArgument("storage -b is required".into()))?;
    let mut req = ParamsRequest::new(source_len, storage, a.variant.into());
    req.min_entropy = a.min_entropy;
    req.alpha = a.alpha;
    req.epsilon = a.epsilon;
    req.error_exponent = a.error_exponent;
    req.knobs.gamma = a.gamma;
    req.knobs.rho_target = a.rho_target;
    req.knobs.delta = a.delta;
    req.knobs.design = a.design.into();
    req.knobs.diagnostic_zero_slack = a.diagnostic_zero_slack;
    req.knobs.constants = load_constants(config, a)?;
    Ok(req)
}

pub fn cmd_params(a: &ParamArgs, config: Option<&Path>) -> Result<Outcome> {
    let n = a
        .source_len
        .ok_or_else(|| Error::InvalidArgument("source length -N is required".into()))?;
    let params = compute_params(&request_from(a, config, n)?)?;
    let consistent = params.satisfies_inequality();
    Ok(Outcome::checked(
        json!({ "feasible": true, "satisfies_inequality": consistent, "params": params }),
        consistent,
    ))
}

pub fn cmd_design(a: &DesignArgs) -> Result<Outcome> {
    let d = match a.construction {
        ConstructionArg::Poly => build_poly_design(a.n, a.m)?,
        ConstructionArg::PolyAny => build_poly_design_any(a.n, a.m)?,
        ConstructionArg::Disjoint => build_disjoint_design(a.n, a.m)?,
    };
    let mut report = serde_json::to_value(d.to_json()).expect("serializable");
    if a.summary {
        report.as_object_mut().unwrap().remove("sets");
    }
    let mut pass = true;
    if a.check {
        let recomputed = verify_design(&d)?;
        pass = &recomputed == d.rho_achieved();
        report["rho_recomputed"] = json!(recomputed.to_string());
        report["check_pass"] = json!(pass);
    }
    Ok(Outcome::checked(report, pass))
}

/// The inputs that determine an extractor instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub variant: Variant,
    pub source_len: usize,
    pub m: usize,
    pub k: Option<usize>,
    pub field_width: Option<u32>,
    pub degree_bound: Option<usize>,
    pub design: DesignChoice,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<ExtractorInstance> {
        let code = match self.variant {
            Variant::Xor => CodeSpec::xor(
                self.source_len,
                self.k
                    .ok_or_else(|| Error::InvalidArgument("XOR instance needs k".into()))?,
            )?,
            Variant::RsHadamard => match (self.field_width, self.degree_bound) {
                (Some(l), Some(d)) => CodeSpec::rs_hadamard(self.source_len, l, d)?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "RS∘Hadamard instance needs field width and degree bound".into(),
                    ))
                }
            },
        };
        let design = build_design(self.design, code.index_bits as usize, self.m)?;
        ExtractorInstance::new(code, design)
    }
}

fn build_design(choice: DesignChoice, n: usize, m: usize) -> Result<WeakDesign> {
    match choice {
        DesignChoice::Polynomial => build_poly_design_any(n, m),
        DesignChoice::Disjoint => build_disjoint_design(n, m),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub bit_order: String,
    pub instance: InstanceSpec,
    pub seed_len: usize,
    pub index_bits: u32,
    pub rho: f64,
    pub params: Option<ExtractorParams>,
    pub seed_hex: String,
    pub fresh_seed: bool,
    pub input_bytes: u64,
    pub input_sha256: String,
    pub output_bits: usize,
    pub output_sha256: String,
    pub reads: ReadStats,
    pub locality: Option<usize>,
}

/// Seed bit `4i + j` is bit `j` of hex digit `i`; exactly `⌈t/4⌉` digits.
pub fn parse_seed_hex(hex: &str, t: usize) -> Result<BitString> {
    let digits: Vec<char> = hex.trim().chars().collect();
    if digits.len() != t.div_ceil(4) {
        return Err(Error::InvalidArgument(format!(
            "seed needs exactly {} hex digits for t = {t}, got {}",
            t.div_ceil(4),
            digits.len()
        )));
    }
    let mut y = BitString::zeros(t);
    for (i, ch) in digits.iter().enumerate() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::InvalidArgument(format!("seed digit {ch:?} is not hex")))?;
        for j in 0..4 {
            let pos = 4 * i + j;
            let bit = (v >> j) & 1 == 1;
            if pos >= t {
                if bit {
                    return Err(Error::InvalidArgument(format!(
                        "seed sets bit {pos} beyond t = {t}"
                    )));
                }
            } else {
                y.set(pos, bit);
            }
        }
    }
    Ok(y)
}

pub fn format_seed_hex(y: &BitString) -> String {
    (0..y.len().div_ceil(4))
        .map(|i| {
            let v = (0..4)
                .filter(|&j| 4 * i + j < y.len() && y.get(4 * i + j))
                .fold(0u32, |acc, j| acc | 1 << j);
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_source(path: &Path, n: Option<usize>) -> Result<(Vec<u8>, BitString)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::InvalidArgument(format!("input {}: {e}", path.display())))?;
    let n = n.unwrap_or(bytes.len() * 8);
    if bytes.len() < n.div_ceil(8) {
        return Err(Error::InvalidArgument(format!(
            "input {} has {} bytes, N = {n} needs {}",
            path.display(),
            bytes.len(),
            n.div_ceil(8)
        )));
    }
    let x = BitString::from_bytes_lsb(&bytes, n)?;
    Ok((bytes, x))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("output {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn explicit_spec(a: &ExtractArgs, n: usize, m: usize) -> Result<InstanceSpec> {
    let variant: Variant = a.params.variant.into();
    let (k, field_width, degree_bound) = match variant {
        Variant::Xor => (
            Some(a.k.ok_or_else(|| {
                Error::InvalidArgument("explicit XOR extraction needs -k".into())
            })?),
            None,
            None,
        ),
        Variant::RsHadamard => match (a.field_width, a.degree_bound) {
            (Some(l), Some(d)) => (None, Some(l), Some(d)),
            _ => {
                let eps = a.params.epsilon.unwrap_or(1.0 / n as f64);
                let (l, d) = crate::codes::rs_hadamard_sizing(n, eps / m as f64)?;
                (None, Some(l), Some(d))
            }
        },
    };
    Ok(InstanceSpec {
        variant,
        source_len: n,
        m,
        k,
        field_width,
        degree_bound,
        design: a.params.design.into(),
    })
}

struct ExtractRun {
    manifest: RunManifest,
    output: BitString,
}

fn extract_with(
    spec: InstanceSpec,
    inst: &ExtractorInstance,
    params: Option<ExtractorParams>,
    bytes: &[u8],
    x: &BitString,
    y: &BitString,
    fresh_seed: bool,
) -> Result<ExtractRun> {
    let (output, reads) = inst.extract_instrumented(x, y)?;
    let out_bytes = output.to_bytes_lsb();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        bit_order: BIT_ORDER.into(),
        seed_len: inst.design().t(),
        index_bits: inst.code().index_bits,
        rho: inst.design().rho_f64(),
        instance: spec,
        params,
        seed_hex: format_seed_hex(y),
        fresh_seed,
        input_bytes: bytes.len() as u64,
        input_sha256: sha256_hex(bytes),
        output_bits: output.len(),
        output_sha256: sha256_hex(&out_bytes),
        reads,
        locality: inst.locality(),
    };
    Ok(ExtractRun { manifest, output })
}

pub fn cmd_extract(a: &ExtractArgs, config: Option<&Path>, out: &mut dyn Write) -> Result<Outcome> {
    let (bytes, x) = read_source(&a.input, a.params.source_len.map(|n| n as usize))?;
    let n = x.len();
    let (spec, inst, params) = match a.m {
        Some(m) => {
            let spec = explicit_spec(a, n, m)?;
            let inst = spec.build()?;
            (spec, inst, None)
        }
        None => {
            let params = compute_params(&request_from(&a.params, config, n as u64)?)?;
            let inst = ExtractorInstance::from_params(params.clone())?;
            let spec = InstanceSpec {
                variant: params.variant,
                source_len: n,
                m: params.m,
                k: params.k,
                field_width: params.field_width,
                degree_bound: params.degree_bound,
                design: params.design,
            };
            (spec, inst, Some(params))
        }
    };
    let t = inst.design().t();
    let y = match (&a.seed, a.fresh_seed) {
        (Some(_), true) => {
            return Err(Error::InvalidArgument(
                "--seed and --fresh-seed are mutually exclusive".into(),
            ))
        }
        (Some(hex), false) => parse_seed_hex(hex, t)?,
        (None, true) => {
            let mut y = BitString::zeros(t);
            for i in 0..t {
                y.set(i, OsRng.gen());
            }
            let _ = writeln!(out, "# fresh seed: {}", format_seed_hex(&y));
            y
        }
        (None, false) => {
            return Err(Error::InvalidArgument(
                "no seed given; pass --seed HEX or --fresh-seed".into(),
            ))
        }
    };
    let run = extract_with(spec, &inst, params, &bytes, &x, &y, a.fresh_seed)?;
    write_atomic(&a.output, &run.output.to_bytes_lsb())?;
    let report = serde_json::to_value(&run.manifest).expect("serializable");
    if let Some(p) = &a.manifest {
        write_atomic(p, serde_json::to_string_pretty(&report).unwrap().as_bytes())?;
    }
    Ok(Outcome::ok(report))
}

/// Rebuilds the instance in a manifest and checks the output digest.
pub fn cmd_rerun(manifest_path: &Path, input: &Path, output: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| {
        Error::InvalidArgument(format!("manifest {}: {e}", manifest_path.display()))
    })?;
    let old: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("manifest: {e}")))?;
    if old.bit_order != BIT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "manifest bit order {:?} unsupported",
            old.bit_order
        )));
    }
    let (bytes, x) = read_source(input, Some(old.instance.source_len))?;
    let inst = old.instance.build()?;
    let y = parse_seed_hex(&old.seed_hex, inst.design().t())?;
    let run = extract_with(old.instance.clone(), &inst, old.params.clone(), &bytes, &x, &y, false)?;
    write_atomic(output, &run.output.to_bytes_lsb())?;
    let input_match = run.manifest.input_sha256 == old.input_sha256;
    let output_match = run.manifest.output_sha256 == old.output_sha256;
    Ok(Outcome::checked(
        json!({
            "input_sha256_match": input_match,
            "output_sha256_match": output_match,
            "manifest": run.manifest,
        }),
        input_match && output_match,
    ))
}

fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitString {
    let mut s = BitString::zeros(len);
    for i in 0..len {
        s.set(i, rng.gen());
    }
    s
}

fn suite_design(a: &VerifyArgs) -> Result<Value> {
    let d = build_poly_design(a.n, a.m)?;
    let recomputed = verify_design(&d)?;
    let pass = &recomputed == d.rho_achieved();
    Ok(json!({
        "n": a.n, "m": a.m, "t": d.t(),
        "rho_achieved": d.rho_achieved().to_string(),
        "rho_recomputed": recomputed.to_string(),
        "pass": pass,
    }))
}

fn suite_codes(a: &VerifyArgs) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let codes = [
        ("hadamard", CodeSpec::hadamard(8)?),
        ("rs_hadamard", CodeSpec::rs_hadamard(12, 3, 4)?),
        ("xor", CodeSpec::xor(10, 3)?),
    ];
    let mut rows = vec![];
    let mut all = true;
    for (name, code) in &codes {
        let n = code.message_len;
        let nbar = code.codeword_len().unwrap();
        let mut local_ok = true;
        let mut linear_ok = true;
        for _ in 0..200 {
            let x = random_bits(&mut rng, n);
            let x2 = random_bits(&mut rng, n);
            let cw = encode_full(code, &x, DEFAULT_ENCODE_CAP)?;
            let y = rng.gen_range(0..nbar);
            local_ok &= crate::codes::code_bit(code, &x, y)? == cw.get(y as usize);
            let sum = encode_full(code, &x.xor(&x2)?, DEFAULT_ENCODE_CAP)?;
            linear_ok &= sum == cw.xor(&encode_full(code, &x2, DEFAULT_ENCODE_CAP)?)?;
        }
        all &= local_ok && linear_ok;
        rows.push(json!({ "code": name, "local_matches_full": local_ok, "linear": linear_ok }));
    }
    Ok(json!({ "codes": rows, "pass": all }))
}

fn suite_classical(a: &VerifyArgs) -> Result<Value> {
    let budget = a.budget as u128;
    let constant = FnExtractor {
        source_len: 3,
        seed_len: 2,
        output_len: 1,
        f: |_, _| 0,
    };
    let identity = FnExtractor {
        source_len: 3,
        seed_len: 1,
        output_len: 3,
        f: |x, _| x,
    };
    let hadamard = OneBitExtractor {
        code: CodeSpec::hadamard(8)?,
    };
    let cases = [
        ("constant_zero", classical_distance(&constant, &SourceDistribution::uniform(3)?, budget)?, 0.5),
        ("identity_uniform", classical_distance(&identity, &SourceDistribution::uniform(3)?, budget)?, 0.0),
        ("hadamard8_uniform", classical_distance(&hadamard, &SourceDistribution::uniform(8)?, budget)?, 1.0 / 512.0),
    ];
    let pass = cases.iter().all(|(_, got, want)| got == want);
    let rows: Vec<Value> = cases
        .iter()
        .map(|(name, got, want)| json!({ "case": name, "distance": got, "expected": want }))
        .collect();
    Ok(json!({ "cases": rows, "pass": pass }))
}

fn suite_quantum(a: &VerifyArgs) -> Result<Value> {
    let (budget, qbudget) = (a.budget as u128, a.quantum_budget as u128);
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let code = CodeSpec::xor(6, 2)?;
    let design = build_disjoint_design(code.index_bits as usize, 1)?;
    let inst = ExtractorInstance::new(code, design)?;
    let src = SourceDistribution::random_flat(6, 3, &mut rng)?;
    let sigma = random_adversary(2, a.rng_seed).state(&BitString::zeros(1))?;
    let constant = QuantumAdversary::constant(sigma)?;
    let q = quantum_distance(&inst, &src, &constant, qbudget)?;
    let c = classical_distance(&inst, &src, budget)?;
    let copy = FnExtractor {
        source_len: 1,
        seed_len: 0,
        output_len: 1,
        f: |x, _| x & 1,
    };
    let copy_adv = embed_classical_adversary(1, |x| x.get(0) as u64);
    let copy_d = quantum_distance(&copy, &SourceDistribution::uniform(1)?, &copy_adv, qbudget)?;
    let const_ok = (q - c).abs() <= 1e-9;
    let copy_ok = (copy_d - 0.5).abs() <= 1e-9;
    Ok(json!({
        "constant_adversary": { "quantum": q, "classical": c, "pass": const_ok },
        "copy_one_bit": { "quantum": copy_d, "expected": 0.5, "pass": copy_ok },
        "pass": const_ok && copy_ok,
    }))
}

fn suite_one_bit(a: &VerifyArgs) -> Result<Value> {
    let code = CodeSpec::hadamard(a.source_len)?;
    let report = one_bit_security_scan(
        &code,
        a.entropy,
        a.epsilon,
        a.trials,
        a.rng_seed,
        a.budget as u128,
    )?;
    let mut v = serde_json::to_value(&report).expect("serializable");
    v.as_object_mut().unwrap().remove("distances");
    Ok(v)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let suites: &[Suite] = match a.suite {
        Suite::All => &[
            Suite::Design,
            Suite::Codes,
            Suite::Classical,
            Suite::Quantum,
            Suite::OneBit,
        ],
        ref s => std::slice::from_ref(s),
    };
    let mut report = serde_json::Map::new();
    let mut pass = true;
    for s in suites {
        let (name, v) = match s {
            Suite::Design => ("design", suite_design(a)?),
            Suite::Codes => ("codes", suite_codes(a)?),
            Suite::Classical => ("classical", suite_classical(a)?),
            Suite::Quantum => ("quantum", suite_quantum(a)?),
            Suite::OneBit => ("one_bit", suite_one_bit(a)?),
            Suite::All => unreachable!(),
        };
        pass &= v["pass"].as_bool().unwrap_or(false);
        report.insert(name.into(), v);
    }
    report.insert("pass".into(), json!(pass));
    Ok(Outcome::checked(Value::Object(report), pass))
}

pub fn cmd_bench(a: &BenchArgs) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.rng_seed);
    let mut bytes = vec![0u8; a.bytes];
    rng.fill_bytes(&mut bytes);
    let n = a.bytes * 8;
    let spec = InstanceSpec {
        variant: Variant::Xor,
        source_len: n,
        m: a.m,
        k: Some(a.k),
        field_width: None,
        degree_bound: None,
        design: DesignChoice::Polynomial,
    };
    let build_start = Instant::now();
    let inst = spec.build()?;
    let build_seconds = build_start.elapsed().as_secs_f64();
    let x = BitString::from_bytes_lsb(&bytes, n)?;
    let y = random_bits(&mut rng, inst.design().t());
    let mut runs = vec![];
    let mut outputs = vec![];
    for _ in 0..a.runs.max(1) {
        let start = Instant::now();
        let out = inst.extract(&x, &y)?;
        let secs = start.elapsed().as_secs_f64();
        runs.push(json!({ "seconds": secs, "bits_per_second": a.m as f64 / secs.max(1e-12) }));
        outputs.push(out);
    }
    let (instrumented, reads) = inst.extract_instrumented(&x, &y)?;
    let identical = outputs.iter().all(|o| *o == outputs[0]) && instrumented == outputs[0];
    let reads_ok = reads.min_reads_per_bit == a.k as u64 && reads.max_reads_per_bit == a.k as u64;
    Ok(Outcome::checked(
        json!({
            "source_bits": n,
            "k": a.k,
            "m": a.m,
            "t": inst.design().t(),
            "index_bits": inst.code().index_bits,
            "build_seconds": build_seconds,
            "runs": runs,
            "reads": reads,
            "reads_per_output_bit_equals_k": reads_ok,
            "identical_outputs": identical,
            "output_sha256": sha256_hex(&outputs[0].to_bytes_lsb()),
        }),
        identical && reads_ok,
    ))
}
