//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsext::bits::CountingSource;
use qsext::cli::{self, InstanceSpec};
use qsext::codes::{code_bit, encode_full, CodeSpec, ListDecoder, DEFAULT_ENCODE_CAP};
use qsext::designs::{build_disjoint_design, build_poly_design, verify_design};
use qsext::extract::{
    compute_params, DesignChoice, Extractor, ExtractorInstance, FnExtractor, OneBitExtractor,
    ParamsRequest, Variant,
};
use qsext::verify::{
    classical_distance, embed_classical_adversary, one_bit_security_scan, quantum_distance,
    SourceDistribution, DEFAULT_BUDGET, DEFAULT_QUANTUM_BUDGET,
};
use qsext::BitString;

fn random_bits(rng: &mut impl Rng, len: usize) -> BitString {
    BitString::from_bools(&(0..len).map(|_| rng.gen()).collect::<Vec<_>>())
}

/// Design correctness with an exact per-set check of the weak-design sum.
fn design_correctness() -> String {
    let mut checked = 0;
    for n in [2usize, 4, 8] {
        for m in [2usize, 4, 16, 64] {
            let Ok(d) = build_poly_design(n, m) else {
                continue;
            };
            let rho = verify_design(&d).unwrap();
            assert_eq!(&rho, d.rho_achieved(), "n={n} m={m}");
            let (num, den) = (rho.numer().clone(), rho.denom().clone());
            for j in 0..m {
                let sum: BigInt = (0..j)
                    .map(|i| {
                        let common = d.set(i).iter().filter(|s| d.set(j).contains(s)).count();
                        BigInt::from(1u64 << common)
                    })
                    .sum();
                assert!(
                    sum * &den <= &num * BigInt::from(m as u64 - 1),
                    "n={n} m={m} j={j}"
                );
            }
            checked += 1;
        }
    }
    assert!(checked >= 9, "only {checked} supported (n, m) pairs");
    format!("{checked} (n, m) pairs, ratio recomputed exactly")
}

fn local_global_codes() -> Vec<(&'static str, CodeSpec)> {
    vec![
        ("hadamard", CodeSpec::hadamard(12).unwrap()),
        ("rs_hadamard", CodeSpec::rs_hadamard(64, 5, 13).unwrap()),
        ("xor", CodeSpec::xor(24, 3).unwrap()),
    ]
}

fn local_global_equivalence() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, code) in local_global_codes() {
        let nbar = code.codeword_len().unwrap();
        for _ in 0..1000 {
            let x = random_bits(&mut rng, code.message_len);
            let y = rng.gen_range(0..nbar);
            let full = encode_full(&code, &x, DEFAULT_ENCODE_CAP).unwrap();
            assert_eq!(code_bit(&code, &x, y).unwrap(), full.get(y as usize), "{name}");
        }
    }
    let code = CodeSpec::xor(64, 4).unwrap();
    let total = code.subsets.unwrap();
    for _ in 0..1000 {
        let x = random_bits(&mut rng, 64);
        let counter = CountingSource::new(&x);
        code_bit(&code, &counter, rng.gen_range(0..total)).unwrap();
        assert_eq!(counter.reads(), 4);
    }
    "3 kinds × 1000 (x, y); xor reads = k on N = 64".into()
}

fn linearity() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let codes = [
        CodeSpec::hadamard(8).unwrap(),
        CodeSpec::rs_hadamard(12, 3, 4).unwrap(),
        CodeSpec::xor(10, 3).unwrap(),
    ];
    for code in &codes {
        for _ in 0..10_000 {
            let x = random_bits(&mut rng, code.message_len);
            let x2 = random_bits(&mut rng, code.message_len);
            let lhs = encode_full(code, &x.xor(&x2).unwrap(), DEFAULT_ENCODE_CAP).unwrap();
            let rhs = encode_full(code, &x, DEFAULT_ENCODE_CAP)
                .unwrap()
                .xor(&encode_full(code, &x2, DEFAULT_ENCODE_CAP).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs, "{:?}", code.kind);
        }
    }
    "3 kinds × 10^4 pairs".into()
}

fn hadamard_list_size() -> String {
    let decoder = ListDecoder::new(&CodeSpec::hadamard(4).unwrap()).unwrap();
    let mut worst = 0;
    for w in 0..1u64 << 16 {
        let word = BitString::from_u64(w, 16);
        let r = decoder.decode(&word, 0.25, 0.0).unwrap();
        assert!(r.l_observed <= 4, "word {w:#06x}: L = {}", r.l_observed);
        worst = worst.max(r.l_observed);
    }
    format!("max L_observed = {worst} ≤ 4 over 2^16 words")
}

fn xor_list_decoding() -> String {
    let code = CodeSpec::xor(10, 3).unwrap();
    let decoder = ListDecoder::new(&code).unwrap();
    let eps = 0.125;
    let delta = (2.0f64 / eps).ln() / 3.0;
    let nbar = code.codeword_len().unwrap() as usize;
    let flips = ((0.5 - 2.0 * eps) * nbar as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut recovered = 0;
    let mut worst = 0;
    for _ in 0..100 {
        let z = random_bits(&mut rng, 10);
        let mut word = encode_full(&code, &z, DEFAULT_ENCODE_CAP).unwrap();
        for p in sample(&mut rng, nbar, flips) {
            word.set(p, !word.get(p));
        }
        let r = decoder.decode(&word, eps, delta).unwrap();
        worst = worst.max(r.l_observed);
        assert!(r.l_observed as f64 <= 4.0 / (eps * eps));
        if r
            .candidates
            .iter()
            .any(|c| c.hamming(&z).unwrap() as f64 <= delta * 10.0)
        {
            recovered += 1;
        }
    }
    assert!(recovered >= 95, "recovered {recovered}/100");
    format!("recovered {recovered}/100, max L_observed = {worst} ≤ 256")
}

/// Independent enumerator for the one-bit extractor `⟨x, y⟩`.
fn hadamard_distance_oracle(support: &[u64]) -> f64 {
    let mut total = 0.0;
    for y in 0u64..256 {
        let ones = support.iter().filter(|&&x| (x & y).count_ones() % 2 == 1).count() as f64;
        let p1 = ones / support.len() as f64 / 256.0;
        let p0 = 1.0 / 256.0 - p1;
        total += (p0 - 1.0 / 512.0).abs() + (p1 - 1.0 / 512.0).abs();
    }
    total / 2.0
}

fn one_bit_extractor() -> String {
    let code = CodeSpec::hadamard(8).unwrap();
    let report = one_bit_security_scan(&code, 6, 0.25, 100, 6, DEFAULT_BUDGET).unwrap();
    assert!(report.pass, "max distance {}", report.max_distance);
    assert!(report.distances.iter().all(|&d| d <= 0.25));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ext = OneBitExtractor { code };
    for _ in 0..5 {
        let src = SourceDistribution::random_flat(8, 6, &mut rng).unwrap();
        let support: Vec<u64> = src.entries().iter().map(|(x, _)| x.to_u64()).collect();
        let d = classical_distance(&ext, &src, DEFAULT_BUDGET).unwrap();
        assert!((d - hadamard_distance_oracle(&support)).abs() < 1e-15);
    }
    format!(
        "100 sources, max {:.6}, mean {:.6} ≤ 0.25",
        report.max_distance, report.mean_distance
    )
}

/// `½ Σ_{u,y} |Pr[Ext(X,Y)=u, Y=y] − 2^{-m-t}|` by direct enumeration.
fn classical_oracle(ext: &dyn Extractor, entries: &[(BitString, f64)]) -> f64 {
    let (t, m) = (ext.seed_len(), ext.output_len());
    let mut joint: HashMap<(u64, u64), f64> = HashMap::new();
    for (x, p) in entries {
        for y in 0..1u64 << t {
            let u = ext.evaluate(x, &BitString::from_u64(y, t)).unwrap().to_u64();
            *joint.entry((u, y)).or_default() += p / (1u64 << t) as f64;
        }
    }
    let cell = 1.0 / (1u64 << (m + t)) as f64;
    let mut total = 0.0;
    for y in 0..1u64 << t {
        for u in 0..1u64 << m {
            total += (joint.get(&(u, y)).copied().unwrap_or(0.0) - cell).abs();
        }
    }
    total / 2.0
}

fn random_source(rng: &mut ChaCha8Rng, n: usize) -> SourceDistribution {
    if rng.gen_bool(0.5) {
        let k = rng.gen_range(0..=n as u32);
        SourceDistribution::random_flat(n, k, rng).unwrap()
    } else {
        let size = rng.gen_range(1..=1usize << n);
        let xs = sample(rng, 1 << n, size);
        let w: Vec<f64> = (0..size).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        SourceDistribution::table(
            n,
            xs.into_iter()
                .zip(w)
                .map(|(x, w)| (BitString::from_u64(x as u64, n), w / total))
                .collect(),
        )
        .unwrap()
    }
}

fn table_extractor(
    rng: &mut ChaCha8Rng,
    n: usize,
    t: usize,
    m: usize,
) -> FnExtractor<impl Fn(u64, u64) -> u64 + Sync> {
    let table: Vec<u64> = (0..1usize << (n + t)).map(|_| rng.gen_range(0..1u64 << m)).collect();
    FnExtractor {
        source_len: n,
        seed_len: t,
        output_len: m,
        f: move |x, y| table[((x << t) | y) as usize],
    }
}

fn classical_oracle_equivalence() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let src;
        let got;
        let want;
        if i % 2 == 0 {
            let (n, t, m) = (rng.gen_range(1..=8), rng.gen_range(0..=6), rng.gen_range(1..=3));
            let ext = table_extractor(&mut rng, n, t, m);
            src = random_source(&mut rng, n);
            got = classical_distance(&ext, &src, DEFAULT_BUDGET).unwrap();
            let entries: Vec<_> = src.entries().into_iter().map(|(x, p)| (x.clone(), p)).collect();
            want = classical_oracle(&ext, &entries);
        } else {
            // NW instances: xor(N, 2) index widths ≤ 5 with disjoint sets
            let n = rng.gen_range(3..=8);
            let code = CodeSpec::xor(n, 2).unwrap();
            let w = code.index_bits as usize;
            let m = (6 / w).clamp(1, 3);
            let inst = ExtractorInstance::new(code, build_disjoint_design(w, m).unwrap()).unwrap();
            assert!(inst.design().t() <= 6);
            src = random_source(&mut rng, n);
            got = classical_distance(&inst, &src, DEFAULT_BUDGET).unwrap();
            let entries: Vec<_> = src.entries().into_iter().map(|(x, p)| (x.clone(), p)).collect();
            want = classical_oracle(&inst, &entries);
        }
        assert!((got - want).abs() <= 1e-12, "instance {i}: {got} vs {want}");
        worst = worst.max((got - want).abs());
    }
    format!("20 instances, max |Δ| = {worst:e}")
}

/// `½ Σ_{u,y,z} |Pr[u, y, f(X)=z] − 2^{-m-t} Pr[f(X)=z]|`.
fn side_information_oracle(
    ext: &dyn Extractor,
    f: &dyn Fn(u64) -> u64,
    entries: &[(BitString, f64)],
) -> f64 {
    let (t, m) = (ext.seed_len(), ext.output_len());
    let mut joint: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut pz: HashMap<u64, f64> = HashMap::new();
    for (x, p) in entries {
        let z = f(x.to_u64());
        *pz.entry(z).or_default() += p;
        for y in 0..1u64 << t {
            let u = ext.evaluate(x, &BitString::from_u64(y, t)).unwrap().to_u64();
            *joint.entry((u, y, z)).or_default() += p / (1u64 << t) as f64;
        }
    }
    let cell = 1.0 / (1u64 << (m + t)) as f64;
    let mut total = 0.0;
    for (&z, &p) in &pz {
        for y in 0..1u64 << t {
            for u in 0..1u64 << m {
                total += (joint.get(&(u, y, z)).copied().unwrap_or(0.0) - cell * p).abs();
            }
        }
    }
    total / 2.0
}

fn quantum_classical_consistency() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = rng.gen_range(1..=6);
        let (t, m, b) = (rng.gen_range(0..=4), rng.gen_range(1..=2), rng.gen_range(0..=2));
        let ext = table_extractor(&mut rng, n, t, m);
        let ftable: Vec<u64> = (0..1usize << n).map(|_| rng.gen_range(0..1u64 << b)).collect();
        let f = move |x: u64| ftable[x as usize];
        let src = random_source(&mut rng, n);
        let f2 = f.clone();
        let adv = embed_classical_adversary(b, move |x| f2(x.to_u64()));
        let q = quantum_distance(&ext, &src, &adv, DEFAULT_QUANTUM_BUDGET).unwrap();
        let entries: Vec<_> = src.entries().into_iter().map(|(x, p)| (x.clone(), p)).collect();
        let want = side_information_oracle(&ext, &f, &entries);
        assert!((q - want).abs() <= 1e-9, "instance {i}: {q} vs {want}");
        worst = worst.max((q - want).abs());
    }
    let copy = FnExtractor {
        source_len: 1,
        seed_len: 0,
        output_len: 1,
        f: |x, _| x & 1,
    };
    let adv = embed_classical_adversary(1, |x| x.get(0) as u64);
    let d = quantum_distance(&copy, &SourceDistribution::uniform(1).unwrap(), &adv, DEFAULT_QUANTUM_BUDGET)
        .unwrap();
    assert!((d - 0.5).abs() <= 1e-9, "copy-one-bit distance {d}");
    format!("50 instances, max |Δ| = {worst:e}; copy-one-bit = {d}")
}

fn parameter_self_consistency() -> String {
    let mut count = 0;
    let rs_tuples = [
        (0.25, 100.0, None),
        (0.5, 10_000.0, None),
        (0.9, 100.0, Some(1e-3)),
        (0.6, 1000.0, Some(0.01)),
        (0.75, 0.0, Some(1e-6)),
    ];
    for e in [18u32, 20, 22, 24, 26] {
        for &(alpha, b, eps) in &rs_tuples {
            let mut req = ParamsRequest::new(1 << e, b, Variant::RsHadamard);
            req.alpha = Some(alpha);
            req.epsilon = eps;
            let p = compute_params(&req).unwrap_or_else(|err| panic!("rs 2^{e} {alpha} {b}: {err}"));
            assert!(p.satisfies_inequality(), "rs 2^{e} α={alpha} b={b}");
            count += 1;
        }
    }
    let xor_tuples = [
        (0.9, 0.3, 1000.0),
        (0.8, 0.25, 1e5),
        (0.95, 0.35, 0.0),
        (0.7, 0.2, 1e6),
        (0.99, 0.4, 5e5),
    ];
    for e in [36u32, 38, 40, 42, 44] {
        for &(alpha, delta, b) in &xor_tuples {
            let mut req = ParamsRequest::new(1 << e, b, Variant::Xor);
            req.alpha = Some(alpha);
            req.knobs.delta = Some(delta);
            let p = compute_params(&req).unwrap_or_else(|err| panic!("xor 2^{e} {alpha}: {err}"));
            assert!(p.satisfies_inequality(), "xor 2^{e} α={alpha} δ={delta}");
            assert_eq!(p.design, DesignChoice::Polynomial);
            count += 1;
        }
    }
    assert_eq!(count, 50);
    let mut diag = Vec::new();
    for (alpha, delta, n, b, want) in [
        (0.5, 0.1, 1000u64, 100.0, 100usize),
        (0.8, 0.15, 2000, 200.0, 400),
        (0.6, 0.05, 10_000, 1000.0, 2000),
        (0.45, 0.2, 4000, 0.0, 100),
    ] {
        let mut req = ParamsRequest::new(n, b, Variant::Xor);
        req.alpha = Some(alpha);
        req.knobs.delta = Some(delta);
        req.knobs.diagnostic_zero_slack = true;
        let p = compute_params(&req).unwrap();
        assert_eq!(p.m, want, "α={alpha} δ={delta} N={n} b={b}");
        diag.push(p.m);
    }
    format!("{count} grid points consistent; diagnostic m = {diag:?}")
}

fn engineering() -> String {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("source.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bytes: Vec<u8> = (0..1 << 20).map(|_| rng.gen()).collect();
    std::fs::write(&input, &bytes).unwrap();
    let spec = InstanceSpec {
        variant: Variant::Xor,
        source_len: 1 << 23,
        m: 1024,
        k: Some(4),
        field_width: None,
        degree_bound: None,
        design: DesignChoice::Polynomial,
    };
    let t = spec.build().unwrap().design().t();
    let seed = cli::format_seed_hex(&random_bits(&mut rng, t));
    let mut outputs = vec![];
    let mut times = vec![];
    for run in 0..2 {
        let output = dir.path().join(format!("out{run}.bin"));
        let args = [
            "qsext", "extract", "--variant", "xor", "-k", "4", "-m", "1024", "--input",
            input.to_str().unwrap(), "--output", output.to_str().unwrap(), "--seed", &seed,
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let start = Instant::now();
        let code = cli::run(args, &mut out, &mut err);
        let elapsed = start.elapsed();
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        assert!(elapsed < Duration::from_secs(60), "run took {elapsed:?}");
        let manifest: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(manifest["reads"]["min_reads_per_bit"], 4);
        assert_eq!(manifest["reads"]["max_reads_per_bit"], 4);
        assert_eq!(manifest["bit_order"], "lsb-first");
        outputs.push(std::fs::read(&output).unwrap());
        times.push(elapsed);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].len(), 128);
    format!("1 MiB source, reads/bit = 4, identical outputs, runs {times:?}")
}

type Criterion = (&'static str, fn() -> String, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("design correctness", design_correctness, Duration::from_secs(10)),
        ("local/global code equivalence", local_global_equivalence, Duration::from_secs(10)),
        ("code linearity", linearity, Duration::MAX),
        ("Hadamard list size", hadamard_list_size, Duration::from_secs(60)),
        ("XOR approximate list decoding", xor_list_decoding, Duration::from_secs(300)),
        ("one-bit extractor", one_bit_extractor, Duration::from_secs(60)),
        ("classical oracle equivalence", classical_oracle_equivalence, Duration::MAX),
        ("quantum/classical consistency", quantum_classical_consistency, Duration::MAX),
        ("parameter self-consistency", parameter_self_consistency, Duration::MAX),
        ("engineering: 1 MiB extraction", engineering, Duration::from_secs(120)),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(detail) if elapsed <= *limit => (true, detail),
            Ok(detail) => (false, format!("{detail}; exceeded {limit:?}")),
            Err(e) => (
                false,
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()),
            ),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {:>2} {name}: {detail} ({:.2}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
