//! Acceptance report: one PASS/FAIL line per headline criterion.
//!
//! The run always completes and prints every line. It exits non-zero on a
//! failed criterion only when `ACCEPTANCE_STRICT=1`, so a known, analysed
//! shortfall is reported rather than hidden or allowed to mask the others.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::Value;
use sketchprune::analysis::sketch_quality;
use sketchprune::arch::builtin;
use sketchprune::planner::{build_plan, sketch_model, subsample_columns, svd_truncate};
use sketchprune::sketch::fd_sketch;
use sketchprune::tensor::{load_archive, save_archive};
use sketchprune::testkit::{checksum, gaussian_matrix, random_archive, reference_fd, stream_seed, sweep_parameters, GoldenFile};
use sketchprune::Matrix;

const BIN: &str = env!("CARGO_BIN_EXE_sketchprune");
const SWEEP_SEED: u64 = 0xACC_0001;
const SCALE_SEED: u64 = 0xACC_0002;
const COMPARATOR_SEED: u64 = 0xACC_0003;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cli(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("SKETCHPRUNE_THREADS");
    if let Some(t) = threads {
        cmd.env("SKETCHPRUNE_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn cli_json(args: &[&str], threads: Option<&str>) -> Result<Value, String> {
    let out = cli(args, threads);
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| format!("{args:?}: {e}"))
}

/// Certificate and PSD sandwich share one sweep.
fn certificate_and_sandwich() -> [Outcome; 2] {
    let start = Instant::now();
    let mut violations = 0;
    let mut sandwich = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_min: f64 = 0.0;
    for (seed, d, c, ell) in sweep_parameters(SWEEP_SEED, 100) {
        let w = gaussian_matrix(seed, d, c);
        let q = sketch_quality(&w, &fd_sketch(&w, ell).unwrap().omega, ell).unwrap();
        violations += usize::from(!q.bound_satisfied);
        sandwich += usize::from(!q.psd_sandwich_holds());
        worst_ratio = worst_ratio.max(q.gram_err_spec / q.epsilon_bound);
        worst_min = worst_min.min(q.min_eig_diff / q.w_fro_sq);
    }
    let elapsed = start.elapsed().as_secs_f64();
    [
        Outcome {
            name: "spectral certificate",
            pass: violations == 0 && elapsed < 60.0,
            detail: format!("{violations}/100 violations, worst λmax/ε = {worst_ratio:.3}, {elapsed:.1}s (limit 60s)"),
        },
        Outcome {
            name: "psd sandwich",
            pass: sandwich == 0,
            detail: format!("{sandwich}/100 violations, smallest λmin/‖W‖² = {worst_min:.2e} (limit -1e-6)"),
        },
    ]
}

fn scale_equivariance() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for (seed, d, c, ell) in sweep_parameters(SCALE_SEED, 25) {
        let w = gaussian_matrix(seed, d, c);
        let base = fd_sketch(&w, ell).unwrap().omega;
        for beta in [0.5, 2.0, 10.0] {
            let scaled = fd_sketch(&w.scaled(beta), ell).unwrap().omega;
            let mut ok = true;
            for (x, y) in scaled.as_slice().iter().zip(base.scaled(beta).as_slice()) {
                let gap = (x - y).abs();
                ok &= gap <= 1e-5 * y.abs();
                if *y != 0.0 {
                    worst = worst.max(gap / y.abs());
                }
            }
            failures += usize::from(!ok);
        }
    }
    Outcome {
        name: "scale equivariance",
        pass: failures == 0,
        detail: format!("{failures}/75 (matrix, β) pairs off, worst relative gap {worst:.2e} (limit 1e-5)"),
    }
}

fn oracle_equivalence() -> Outcome {
    let golden = GoldenFile::committed();
    let results: Vec<(f64, bool)> = golden
        .cases
        .par_iter()
        .map(|case| {
            let w = gaussian_matrix(case.seed, case.d, case.c);
            let reference = reference_fd(&w, case.ell).unwrap();
            let pinned = checksum(&w) == case.input_checksum && checksum(&reference) == case.omega_checksum;
            (fd_sketch(&w, case.ell).unwrap().omega.sub(&reference).max_abs(), pinned)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let bad = results.iter().filter(|r| !(r.0 <= 1e-10 && r.1)).count();
    Outcome {
        name: "oracle equivalence",
        pass: results.len() == 100 && bad == 0,
        detail: format!("{bad}/{} golden cases off, worst elementwise gap {worst:.2e} (limit 1e-10)", results.len()),
    }
}

fn comparator_ordering() -> Outcome {
    let mut ordered = 0;
    let mut svd_first = 0;
    let mut decaying = 0;
    for (seed, d, c, ell) in sweep_parameters(COMPARATOR_SEED, 100) {
        let ell = ell.min(d);
        let w = gaussian_matrix(seed, d, c);
        let spec = |w: &Matrix<f64>, omega: &Matrix<f64>| sketch_quality(w, omega, ell).unwrap().gram_err_spec;
        let svd = spec(&w, &svd_truncate(&w, ell).unwrap());
        let fd = spec(&w, &fd_sketch(&w, ell).unwrap().omega);
        let random = spec(&w, &subsample_columns(&w, ell, stream_seed(seed, "random")).0);
        let slack = 1e-9 * w.frobenius_norm().powi(2);
        svd_first += usize::from(svd <= fd + slack);
        ordered += usize::from(svd <= fd + slack && fd <= random + slack);

        // same matrices with row i scaled by 1/(i+1): diagnostic only
        let decayed = Matrix::from_fn(d, c, |i, j| w[(i, j)] / (i + 1) as f64);
        let fd = spec(&decayed, &fd_sketch(&decayed, ell).unwrap().omega);
        let random = spec(&decayed, &subsample_columns(&decayed, ell, stream_seed(seed, "random")).0);
        decaying += usize::from(fd <= random);
    }
    Outcome {
        name: "comparator ordering",
        pass: ordered >= 95,
        detail: format!(
            "svd ≤ fd ≤ random on {ordered}/100 i.i.d. Gaussian trials (need 95); svd ≤ fd on {svd_first}/100; \
             fd ≤ random on {decaying}/100 after 1/(i+1) row decay"
        ),
    }
}

fn complexity() -> Outcome {
    let reference = [
        ("resnet56", 125.49e6, 0.85e6),
        ("resnet110", 252.89e6, 1.72e6),
        ("googlenet", 1.52e9, 6.15e6),
        ("resnet50", 4.09e9, 25.50e6),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (arch, flops, params) in reference {
        match cli_json(&["flops", "--arch", arch, "--format", "json"], None) {
            Ok(report) => {
                let macs = report["total_macs"].as_f64().unwrap_or(f64::NAN);
                let p = report["total_params"].as_f64().unwrap_or(f64::NAN);
                let (df, dp) = ((macs / flops - 1.0) * 100.0, (p / params - 1.0) * 100.0);
                pass &= df.abs() <= 2.0 && dp.abs() <= 2.0;
                parts.push(format!("{arch} {df:+.2}%/{dp:+.2}%"));
            }
            Err(e) => {
                pass = false;
                parts.push(e);
            }
        }
    }
    Outcome { name: "complexity accounting", pass, detail: format!("FLOPs/params vs reference figures: {}", parts.join(", ")) }
}

fn sketch_efficiency() -> Outcome {
    match cli_json(&["bench", "--arch", "resnet50", "--rate", "0.6", "--repeat", "1", "--format", "json"], Some("1")) {
        Ok(report) => {
            let secs = report["timing"]["best_seconds"].as_f64().unwrap_or(f64::INFINITY);
            let threads = report["threads"].as_u64().unwrap_or(0);
            Outcome {
                name: "sketch efficiency",
                pass: secs < 10.0 && threads == 1,
                detail: format!(
                    "resnet50 α=0.6 sketched in {secs:.2}s on {threads} thread(s), {} layers (limit 10s)",
                    report["layers_sketched"]
                ),
            }
        }
        Err(e) => Outcome { name: "sketch efficiency", pass: false, detail: e },
    }
}

fn pipeline_identity(scratch: &Path) -> Outcome {
    let mut identical = Vec::new();
    for arch in ["resnet56", "googlenet"] {
        let manifest = builtin(arch).unwrap();
        let archive = random_archive(&manifest, 7).unwrap();
        let plan = build_plan(&manifest, 1.0, &BTreeMap::new()).unwrap();
        let (out, _) = sketch_model(&archive, &plan).unwrap();
        identical.push((arch, out == archive));
    }

    let manifest = builtin("resnet56").unwrap();
    let archive = random_archive(&manifest, 56).unwrap();
    let plan = build_plan(&manifest, 0.6, &BTreeMap::new()).unwrap();
    let (pruned, report) = sketch_model(&archive, &plan).unwrap();
    let dir = scratch.join("identity-resnet56");
    save_archive(&pruned, &dir).unwrap();
    let reloaded = load_archive(&dir);
    let revalidates = matches!(&reloaded, Ok(a) if *a == pruned);
    let t = &report.totals;
    let certified = t.certificates_checked > 0 && t.certificate_violations == 0;

    Outcome {
        name: "pipeline identity",
        pass: identical.iter().all(|i| i.1) && revalidates && certified,
        detail: format!(
            "α=1.0 bit-identical: {}; resnet56 α=0.6 re-validates: {revalidates}, certificates {}/{} hold, FLOPs -{:.1}%",
            identical.iter().map(|(a, ok)| format!("{a}={ok}")).collect::<Vec<_>>().join(" "),
            t.certificates_checked - t.certificate_violations,
            t.certificates_checked,
            t.pruning_rate_flops,
        ),
    }
}

fn determinism(scratch: &Path) -> Outcome {
    let fail = |detail: String| Outcome { name: "determinism", pass: false, detail };
    let model = scratch.join("model");
    let model_s = model.to_str().unwrap();
    let gen = cli(&["generate", "--arch", "resnet56", "--seed", "3", "--out", model_s], None);
    if !gen.status.success() {
        return fail(format!("generate failed: {}", String::from_utf8_lossy(&gen.stderr)));
    }
    let mut payloads = Vec::new();
    let mut archives = Vec::new();
    for run in ["a", "b"] {
        let out = scratch.join(format!("pruned-{run}"));
        let o = cli(&["sketch", "--model", model_s, "--out", out.to_str().unwrap(), "--rate", "0.6", "--format", "json"], None);
        if !o.status.success() {
            return fail(format!("sketch run {run} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let mut report: Value = serde_json::from_slice(&fs::read(out.join("prune_report.json")).unwrap()).unwrap();
        report.as_object_mut().unwrap().remove("timing");
        payloads.push(serde_json::to_vec(&report).unwrap());
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap())
            .filter(|e| e.file_name() != "prune_report.json")
            .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
            .collect();
        files.sort();
        archives.push(files);
    }
    let same_payload = payloads[0] == payloads[1];
    let same_archive = archives[0] == archives[1];
    Outcome {
        name: "determinism",
        pass: same_payload && same_archive,
        detail: format!(
            "two `sketch` runs: payload identical = {same_payload} ({} bytes), archive identical = {same_archive} ({} files)",
            payloads[0].len(),
            archives[0].len()
        ),
    }
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let start = Instant::now();
    let mut outcomes = Vec::new();
    outcomes.extend(certificate_and_sandwich());
    outcomes.push(scale_equivariance());
    outcomes.push(oracle_equivalence());
    outcomes.push(comparator_ordering());
    outcomes.push(complexity());
    outcomes.push(sketch_efficiency());
    outcomes.push(pipeline_identity(scratch.path()));
    outcomes.push(determinism(scratch.path()));

    println!();
    for o in &outcomes {
        println!("{}  {:<22} {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass ({:.0}s)", outcomes.len(), start.elapsed().as_secs_f64());

    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != outcomes.len() {
        std::process::exit(1);
    }
}
