use std::path::Path;
use std::process::{Command, Output};

use qsext::cli::{format_seed_hex, parse_seed_hex, InstanceSpec};
use qsext::codes::{encode_full, DEFAULT_ENCODE_CAP};
use qsext::extract::{DesignChoice, Variant};
use qsext::BitString;
use serde_json::Value;

fn qsext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsext"))
        .args(args)
        .env_remove("QSEXT_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    serde_json::from_str(&body).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FIXTURE_SOURCE: [u8; 8] = [0x5a, 0x3c, 0x96, 0xe1, 0x0f, 0x78, 0x24, 0xc3];

fn fixture_spec() -> InstanceSpec {
    InstanceSpec {
        variant: Variant::Xor,
        source_len: 64,
        m: 16,
        k: Some(4),
        field_width: None,
        degree_bound: None,
        design: DesignChoice::Polynomial,
    }
}

fn fixture_seed() -> String {
    (0..256)
        .map(|i| char::from_digit(((i as u64 * 2654435761) >> 7) as u32 % 16, 16).unwrap())
        .collect()
}

#[test]
fn params_diagnostic_headline() {
    let out = qsext(&[
        "params", "--variant", "xor", "--alpha", "0.5", "--delta", "0.1", "-N", "1000", "-b", "100",
        "--diagnostic-zero-slack",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["params"]["m"], 100);
}

#[test]
fn params_storage_at_least_entropy_exits_2() {
    let out = qsext(&["params", "--variant", "rs-hadamard", "-N", "4096", "-K", "100", "-b", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["feasible"], false);
}

#[test]
fn params_rs_golden_is_infeasible_with_term_breakdown() {
    let out = qsext(&[
        "params", "--variant", "rs-hadamard", "-N", "65536", "-K", "4096", "-b", "256", "--epsilon",
        "0.001",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let terms = &json(&out)["report"]["terms"];
    // At m = 1: least l with 2^l ≥ ⌈4⌈N/l⌉/ε²⌉ is 33, so n = 66, q = 128, t = q².
    let l = (1u32..)
        .find(|&l| {
            let d = 65536u64.div_ceil(l as u64) as f64;
            2f64.powi(l as i32) >= (4.0 * d / (0.001f64 * 0.001)).ceil()
        })
        .unwrap();
    assert_eq!(l, 33);
    assert_eq!(terms["seed_len"], 16384.0);
    let log_l = (4.0f64 / 1e-6).ceil().log2();
    assert!((terms["log_list_size"].as_f64().unwrap() - log_l).abs() < 1e-12);
    let slack = 4.0 * (1000f64.log2() + 16.0);
    assert!((terms["slack"].as_f64().unwrap() - slack).abs() < 1e-9);
    let numerator = 4096.0 - 256.0 - 16384.0 - log_l - slack;
    assert!((terms["numerator"].as_f64().unwrap() - numerator).abs() < 1e-9);
    assert!((numerator - -12669.794705707973).abs() < 1e-9);
}

#[test]
fn params_rs_golden_leading_terms_with_rho_two() {
    let out = qsext(&[
        "params", "--variant", "rs-hadamard", "-N", "65536", "-K", "4096", "-b", "256", "--epsilon",
        "0.001", "--rho-target", "2", "--diagnostic-zero-slack",
    ]);
    assert_eq!(out.status.code(), Some(0));
    // ⌊(4096 − 256) / 3⌋
    assert_eq!(json(&out)["params"]["m"], 1280);
}

#[test]
fn config_file_overrides_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("constants.json");
    std::fs::write(&cfg, r#"{"c_log": 8.0}"#).unwrap();
    let base = ["params", "--variant", "rs-hadamard", "-N", "1048576", "--alpha", "0.5", "-b", "100"];
    let plain = json(&qsext(&base));
    let mut args = base.to_vec();
    args.extend(["--config", p(&cfg)]);
    let tuned = json(&qsext(&args));
    assert_eq!(tuned["params"]["constants"]["c_log"], 8.0);
    assert!(tuned["params"]["m"].as_u64() < plain["params"]["m"].as_u64());
}

#[test]
fn extract_golden_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (input, output) = (dir.path().join("src.bin"), dir.path().join("out.bin"));
    std::fs::write(&input, FIXTURE_SOURCE).unwrap();
    let seed = fixture_seed();
    let out = qsext(&[
        "extract", "--variant", "xor", "-k", "4", "-m", "16", "--input", p(&input), "--output",
        p(&output), "--seed", &seed,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&output).unwrap();

    // Recompute through the full codeword.
    let inst = fixture_spec().build().unwrap();
    assert_eq!(inst.design().t(), 1024);
    let x = BitString::from_bytes_lsb(&FIXTURE_SOURCE, 64).unwrap();
    let y = parse_seed_hex(&seed, 1024).unwrap();
    let full = encode_full(inst.code(), &x, DEFAULT_ENCODE_CAP).unwrap();
    let mut expected = vec![0u8; 2];
    for i in 0..16 {
        let idx = inst
            .design()
            .set(i)
            .iter()
            .enumerate()
            .fold(0usize, |acc, (pos, &s)| acc | (y.get(s as usize) as usize) << pos);
        expected[i / 8] |= (full.get(idx) as u8) << (i % 8);
    }
    assert_eq!(bytes, expected);
    assert_eq!(bytes, vec![0xd0, 0x67]);
    let manifest = json(&out);
    assert_eq!(manifest["locality"], 4);
    assert_eq!(manifest["seed_hex"], seed);
}

#[test]
fn all_zero_source_gives_all_zero_output() {
    let dir = tempfile::tempdir().unwrap();
    let (input, output) = (dir.path().join("zero.bin"), dir.path().join("out.bin"));
    std::fs::write(&input, [0u8; 64]).unwrap();
    for args in [
        vec!["--variant", "xor", "-k", "3", "-m", "40"],
        vec!["--variant", "rs-hadamard", "-m", "40", "--field-width", "6", "--degree-bound", "86"],
    ] {
        let mut full = vec!["extract", "--input", p(&input), "--output", p(&output), "--fresh-seed"];
        full.extend(args);
        let out = qsext(&full);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("# fresh seed: "));
        assert_eq!(std::fs::read(&output).unwrap(), vec![0u8; 5]);
    }
}

#[test]
fn extract_from_params_and_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("src.bin");
    let (out1, out2) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    let manifest = dir.path().join("run.json");
    let bytes: Vec<u8> = (0..4096u32).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
    std::fs::write(&input, &bytes).unwrap();
    // N = 32768 bits; solved RS∘Hadamard parameters land on GF(2^32)
    let out = qsext(&[
        "extract", "--variant", "rs-hadamard", "-K", "5000", "-b", "100", "--epsilon", "0.25",
        "--input", p(&input), "--output", p(&out1), "--fresh-seed", "--manifest", p(&manifest),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&out);
    assert!(m["params"]["m"].as_u64().unwrap() >= 1);
    assert_eq!(m["output_bits"], m["params"]["m"]);

    let rerun = qsext(&[
        "extract", "--from-manifest", p(&manifest), "--input", p(&input), "--output", p(&out2),
    ]);
    assert_eq!(rerun.status.code(), Some(0));
    assert_eq!(json(&rerun)["output_sha256_match"], true);
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());

    let mut tampered = bytes.clone();
    tampered[0] ^= 1;
    std::fs::write(&input, tampered).unwrap();
    let rerun = qsext(&[
        "extract", "--from-manifest", p(&manifest), "--input", p(&input), "--output", p(&out2),
    ]);
    assert_eq!(rerun.status.code(), Some(4));
    assert_eq!(json(&rerun)["input_sha256_match"], false);
}

#[test]
fn extract_input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (input, output) = (dir.path().join("src.bin"), dir.path().join("out.bin"));
    std::fs::write(&input, FIXTURE_SOURCE).unwrap();
    let base = ["extract", "--variant", "xor", "-k", "4", "-m", "8", "--input", p(&input), "--output", p(&output)];
    let run = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        qsext(&a).status.code()
    };
    assert_eq!(run(&[]), Some(1)); // no seed
    assert_eq!(run(&["--seed", "abc"]), Some(1)); // wrong digit count
    assert_eq!(run(&["--seed", &"z".repeat(256)]), Some(1));
    assert_eq!(run(&["-N", "128", "--seed", &fixture_seed()]), Some(1)); // short input
    assert_eq!(run(&["--seed", &fixture_seed(), "--fresh-seed"]), Some(1));
    assert!(!output.exists());
}

#[test]
fn extraction_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("src.bin");
    std::fs::write(&input, (0..2048u32).map(|i| (i * 37 % 251) as u8).collect::<Vec<_>>()).unwrap();
    let spec = InstanceSpec {
        source_len: 2048 * 8,
        m: 300,
        ..fixture_spec()
    };
    let t = spec.build().unwrap().design().t();
    let seed = format_seed_hex(&BitString::from_bools(&(0..t).map(|i| i % 3 == 0).collect::<Vec<_>>()));
    let mut digests = vec![];
    for threads in ["1", "4"] {
        let output = dir.path().join(format!("out{threads}.bin"));
        let out = Command::new(env!("CARGO_BIN_EXE_qsext"))
            .args(["extract", "--variant", "xor", "-k", "4", "-m", "300", "--input", p(&input)])
            .args(["--output", p(&output), "--seed", &seed])
            .env("QSEXT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        digests.push(json(&out)["output_sha256"].clone());
    }
    assert_eq!(digests[0], digests[1]);
    let bad = Command::new(env!("CARGO_BIN_EXE_qsext"))
        .args(["design", "-n", "4", "-m", "4"])
        .env("QSEXT_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn design_command_reports_ratio() {
    let out = qsext(&["design", "-n", "4", "-m", "16", "--check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rho_exact"], "9/5");
    assert_eq!(v["rho_recomputed"], "9/5");
    assert_eq!(v["sets"].as_array().unwrap().len(), 16);
    assert_eq!(qsext(&["design", "-n", "3", "-m", "4"]).status.code(), Some(1));
    let any = json(&qsext(&["design", "-n", "3", "-m", "4", "--construction", "poly-any", "--summary"]));
    assert!(any.get("sets").is_none());
}

#[test]
fn verify_suites() {
    let out = qsext(&["verify", "--suite", "design"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["design"]["rho_achieved"], "9/5");
    let out = qsext(&["verify", "--suite", "quantum"]);
    assert_eq!(out.status.code(), Some(0));
    let q = &json(&out)["quantum"]["constant_adversary"];
    assert!((q["quantum"].as_f64().unwrap() - q["classical"].as_f64().unwrap()).abs() < 1e-9);
    let out = qsext(&["verify", "--suite", "one-bit"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["one_bit"]["pass"], true);
    assert_eq!(qsext(&["verify", "--suite", "one-bit", "--budget", "1000"]).status.code(), Some(3));
    // a threshold the point-mass-free scan cannot meet
    assert_eq!(
        qsext(&["verify", "--suite", "one-bit", "--epsilon", "0.001"]).status.code(),
        Some(4)
    );
}

#[test]
fn bench_reports_locality() {
    let out = qsext(&["bench", "--bytes", "65536", "-k", "5", "-m", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reads"]["max_reads_per_bit"], 5);
    assert_eq!(v["reads"]["min_reads_per_bit"], 5);
    assert_eq!(v["identical_outputs"], true);
    let again = json(&qsext(&["bench", "--bytes", "65536", "-k", "5", "-m", "64"]));
    assert_eq!(v["output_sha256"], again["output_sha256"]);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(qsext(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qsext(&["params"]).status.code(), Some(1));
    assert_eq!(qsext(&["--help"]).status.code(), Some(0));
}
