use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sketchprune::analysis::{compare_manifests, count_flops_params, sketch_quality, weight_stats};
use sketchprune::arch::{builtin, BUILTIN_ARCHS};
use sketchprune::planner::{build_plan, random_subsample_with, sketch_model_with, Method, SketchOptions};
use sketchprune::sketch::fd_sketch;
use sketchprune::tensor::{load_archive, save_archive, ModelManifest, MANIFEST_FILE};
use sketchprune::testkit::{checksum, gaussian_matrix, random_archive, reference_fd, sweep_parameters, GoldenFile, GOLDEN_FORMAT};

use crate::failure::Failure;
use crate::render;
use crate::{Baseline, BenchArgs, Format, SketchArgs, VerifyArgs};

/// Largest elementwise gap tolerated between the sketch and the oracle.
const ORACLE_TOLERANCE: f64 = 1e-10;

fn emit<T: Serialize>(value: &T, format: Format, table: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("report serializes")),
        Format::Table => print!("{}", table()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_vec_pretty(value).expect("report serializes");
    text.push(b'\n');
    fs::write(path, text).map_err(Failure::io(path))
}

/// Refuses to scatter tensors over an unrelated directory.
fn ensure_writable_dir(dir: &Path, force: bool) -> Result<(), Failure> {
    let occupied = fs::read_dir(dir).map(|mut entries| entries.next().is_some()).unwrap_or(false);
    if occupied && !force {
        return Err(Failure::Usage(format!("output directory {} is not empty (pass --force to reuse it)", dir.display())));
    }
    Ok(())
}

/// Built-in name, manifest file, or archive directory.
fn resolve_manifest(spec: &str) -> Result<ModelManifest, Failure> {
    if BUILTIN_ARCHS.contains(&spec) {
        return Ok(builtin(spec)?);
    }
    let mut path = PathBuf::from(spec);
    if path.is_dir() {
        path.push(MANIFEST_FILE);
    } else if !path.exists() {
        return Err(Failure::Usage(format!(
            "`{spec}` is neither a built-in architecture ({}) nor an existing path",
            BUILTIN_ARCHS.join(", ")
        )));
    }
    let text = fs::read_to_string(&path).map_err(Failure::io(&path))?;
    let manifest = ModelManifest::from_json(&text).map_err(|source| sketchprune::Error::Json { path, source })?;
    manifest.validate()?;
    Ok(manifest)
}

#[derive(Serialize)]
struct InspectReport {
    model: String,
    schema: String,
    input_spatial: [usize; 2],
    num_classes: usize,
    layers: BTreeMap<String, usize>,
    prunable_convs: usize,
    prune_groups: BTreeMap<String, usize>,
    tensors: usize,
    stored_values: usize,
    macs: u64,
    params: u64,
}

pub fn inspect(model: &Path, format: Format) -> Result<(), Failure> {
    let archive = load_archive(model)?;
    let m = &archive.manifest;
    let complexity = count_flops_params(m)?;
    let mut layers = BTreeMap::new();
    for l in &m.layers {
        *layers.entry(serde_json::to_value(l.kind).unwrap().as_str().unwrap_or("?").to_string()).or_insert(0) += 1;
    }
    let report = InspectReport {
        model: m.name.clone(),
        schema: m.schema.clone(),
        input_spatial: m.input_spatial,
        num_classes: m.num_classes,
        layers,
        prunable_convs: m.layers.iter().filter(|l| l.prunable).count(),
        prune_groups: m.prune_groups().into_iter().map(|(g, members)| (g, members.len())).collect(),
        tensors: archive.tensors.len(),
        stored_values: archive.parameter_count(),
        macs: complexity.total_macs,
        params: complexity.total_params,
    };
    emit(&report, format, || {
        let mut rows = vec![
            vec!["model".into(), report.model.clone()],
            vec!["input".into(), format!("{}x{}", report.input_spatial[0], report.input_spatial[1])],
            vec!["classes".into(), report.num_classes.to_string()],
        ];
        rows.extend(report.layers.iter().map(|(k, n)| vec![format!("{k} layers"), n.to_string()]));
        rows.push(vec!["prunable convs".into(), report.prunable_convs.to_string()]);
        rows.push(vec!["prune groups".into(), report.prune_groups.len().to_string()]);
        rows.push(vec!["tensors".into(), report.tensors.to_string()]);
        rows.push(vec!["FLOPs (MACs)".into(), render::count(report.macs)]);
        rows.push(vec!["params".into(), render::count(report.params)]);
        render::table(&["field", "value"], &rows)
    });
    Ok(())
}

pub fn sketch(args: &SketchArgs, format: Format) -> Result<(), Failure> {
    let overrides = args.override_map()?;
    if args.out == args.model {
        return Err(Failure::Usage("--out must differ from --model".into()));
    }
    ensure_writable_dir(&args.out, args.force)?;

    let archive = load_archive(&args.model)?;
    let plan = build_plan(&archive.manifest, args.rate, &overrides)?;
    let evaluate = !args.no_evaluate;
    let (pruned, report) = match args.baseline {
        Baseline::Fd => sketch_model_with(&archive, &plan, &SketchOptions { method: Method::Fd, evaluate })?,
        Baseline::Svdtrunc => sketch_model_with(&archive, &plan, &SketchOptions { method: Method::Svdtrunc, evaluate })?,
        Baseline::Random => random_subsample_with(&archive, &plan, args.seed, evaluate)?,
    };
    save_archive(&pruned, &args.out)?;
    let report_path = args.report.clone().unwrap_or_else(|| args.out.join("prune_report.json"));
    write_json(&report_path, &report)?;
    log::info!("wrote {} and {}", args.out.display(), report_path.display());

    emit(&report, format, || render::prune_report(&report));
    // random subsampling carries no guarantee; its violations are informational
    if args.baseline != Baseline::Random && !report.certificates_hold() {
        return Err(Failure::Certificate(format!(
            "{} of {} layer certificates violated (see {})",
            report.totals.certificate_violations,
            report.totals.certificates_checked,
            report_path.display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    cases: usize,
    tolerance: f64,
    max_deviation: f64,
    mismatches: Vec<u64>,
}

#[derive(Serialize)]
struct SweepSummary {
    seed: u64,
    cases: usize,
    certificate_violations: Vec<u64>,
    sandwich_violations: Vec<u64>,
    /// Largest `λ_max / ε` observed.
    worst_bound_ratio: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    oracle: OracleSummary,
    sweep: SweepSummary,
}

pub fn verify(args: &VerifyArgs, format: Format) -> Result<(), Failure> {
    let golden = match &args.golden {
        None => GoldenFile::committed(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(Failure::io(path))?;
            serde_json::from_str(&text).map_err(|source| sketchprune::Error::Json { path: path.clone(), source })?
        }
    };
    if golden.format != GOLDEN_FORMAT {
        return Err(Failure::Usage(format!("golden file format `{}`, expected `{GOLDEN_FORMAT}`", golden.format)));
    }

    let deviations = golden
        .cases
        .par_iter()
        .map(|case| -> Result<(u64, f64, bool), Failure> {
            let w = gaussian_matrix(case.seed, case.d, case.c);
            let reference = reference_fd(&w, case.ell)?;
            let omega = fd_sketch(&w, case.ell)?.omega;
            let pinned = checksum(&w) == case.input_checksum && checksum(&reference) == case.omega_checksum;
            Ok((case.seed, omega.sub(&reference).max_abs(), pinned))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let oracle = OracleSummary {
        cases: deviations.len(),
        tolerance: ORACLE_TOLERANCE,
        max_deviation: deviations.iter().map(|d| d.1).fold(0.0, f64::max),
        mismatches: deviations.iter().filter(|d| !(d.1 <= ORACLE_TOLERANCE && d.2)).map(|d| d.0).collect(),
    };

    let checks = sweep_parameters(args.seed, args.sweep)
        .into_par_iter()
        .map(|(seed, d, c, ell)| -> Result<_, Failure> {
            let w = gaussian_matrix(seed, d, c);
            let q = sketch_quality(&w, &fd_sketch(&w, ell)?.omega, ell)?;
            Ok((seed, q.bound_satisfied, q.psd_sandwich_holds(), q.gram_err_spec / q.epsilon_bound.max(f64::MIN_POSITIVE)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sweep = SweepSummary {
        seed: args.seed,
        cases: checks.len(),
        certificate_violations: checks.iter().filter(|c| !c.1).map(|c| c.0).collect(),
        sandwich_violations: checks.iter().filter(|c| !c.2).map(|c| c.0).collect(),
        worst_bound_ratio: checks.iter().map(|c| c.3).fold(0.0, f64::max),
    };

    let report = VerifyReport { oracle, sweep };
    emit(&report, format, || {
        let o = &report.oracle;
        let s = &report.sweep;
        let rows = vec![
            vec![
                "oracle".into(),
                o.cases.to_string(),
                o.mismatches.len().to_string(),
                format!("max deviation {:.2e} (tol {:.0e})", o.max_deviation, o.tolerance),
            ],
            vec![
                "certificate".into(),
                s.cases.to_string(),
                s.certificate_violations.len().to_string(),
                format!("worst λmax/ε {:.3}", s.worst_bound_ratio),
            ],
            vec!["psd sandwich".into(), s.cases.to_string(), s.sandwich_violations.len().to_string(), String::new()],
        ];
        render::table(&["check", "cases", "failures", "detail"], &rows)
    });

    if !report.oracle.mismatches.is_empty() {
        return Err(Failure::Numerical(format!("{} golden cases disagree with the reference", report.oracle.mismatches.len())));
    }
    let broken = report.sweep.certificate_violations.len() + report.sweep.sandwich_violations.len();
    if broken > 0 {
        return Err(Failure::Certificate(format!("{broken} certificate checks failed")));
    }
    Ok(())
}

pub fn stats(model: &Path, histogram: Option<&Path>, format: Format) -> Result<(), Failure> {
    let archive = load_archive(model)?;
    let stats = weight_stats(&archive);
    if let Some(path) = histogram {
        fs::write(path, stats.histogram_table()).map_err(Failure::io(path))?;
    }
    for l in stats.flagged() {
        log::warn!("layer `{}`: |mean| {:.3e} exceeds 0.1·std {:.3e}", l.layer, l.mean.abs(), l.std);
    }
    emit(&stats, format, || {
        let rows: Vec<Vec<String>> = stats
            .layers
            .iter()
            .map(|l| {
                vec![
                    l.layer.clone(),
                    l.count.to_string(),
                    format!("{:+.3e}", l.mean),
                    format!("{:.3e}", l.std),
                    format!("{:+.3e}", l.min),
                    format!("{:+.3e}", l.max),
                    if l.mean_flagged { "mean".into() } else { String::new() },
                ]
            })
            .collect();
        render::table(&["layer", "count", "mean", "std", "min", "max", "flag"], &rows)
    });
    Ok(())
}

pub fn flops(arch: &str, base: Option<&str>, format: Format) -> Result<(), Failure> {
    let manifest = resolve_manifest(arch)?;
    let report = match base {
        Some(base) => compare_manifests(&resolve_manifest(base)?, &manifest)?,
        None => count_flops_params(&manifest)?,
    };
    emit(&report, format, || {
        let mut rows = vec![
            vec!["model".into(), report.model.clone()],
            vec!["FLOPs (MACs)".into(), format!("{} ({})", render::count(report.total_macs), report.total_macs)],
            vec!["params".into(), format!("{} ({})", render::count(report.total_params), report.total_params)],
        ];
        if let (Some(f), Some(p)) = (report.pruning_rate_flops, report.pruning_rate_params) {
            rows.push(vec!["FLOPs removed".into(), format!("{f:.1}%")]);
            rows.push(vec!["params removed".into(), format!("{p:.1}%")]);
        }
        rows.push(vec!["convention".into(), report.convention.clone()]);
        render::table(&["field", "value"], &rows)
    });
    Ok(())
}

#[derive(Serialize)]
struct BenchTiming {
    generate_seconds: f64,
    sketch_seconds: Vec<f64>,
    best_seconds: f64,
}

#[derive(Serialize)]
struct BenchReport {
    arch: String,
    rate: f64,
    seed: u64,
    threads: usize,
    evaluate: bool,
    layers_sketched: usize,
    pruning_rate_flops: f64,
    timing: BenchTiming,
}

pub fn bench(args: &BenchArgs, threads: usize, format: Format) -> Result<(), Failure> {
    let manifest = builtin(&args.arch)?;
    let plan = build_plan(&manifest, args.rate, &BTreeMap::new())?;
    let start = Instant::now();
    let archive = random_archive(&manifest, args.seed)?;
    let generate_seconds = start.elapsed().as_secs_f64();

    let options = SketchOptions { method: Method::Fd, evaluate: args.evaluate };
    let mut sketch_seconds = Vec::new();
    let mut last = None;
    for _ in 0..args.repeat {
        let start = Instant::now();
        let (_, report) = sketch_model_with(&archive, &plan, &options)?;
        sketch_seconds.push(start.elapsed().as_secs_f64());
        last = Some(report);
    }
    let last = last.expect("at least one repeat");
    let best_seconds = sketch_seconds.iter().cloned().fold(f64::INFINITY, f64::min);
    let report = BenchReport {
        arch: args.arch.clone(),
        rate: args.rate,
        seed: args.seed,
        threads,
        evaluate: args.evaluate,
        layers_sketched: last.totals.layers_sketched,
        pruning_rate_flops: last.totals.pruning_rate_flops,
        timing: BenchTiming { generate_seconds, sketch_seconds, best_seconds },
    };
    emit(&report, format, || {
        let rows = vec![
            vec!["arch".into(), report.arch.clone()],
            vec!["rate".into(), report.rate.to_string()],
            vec!["threads".into(), report.threads.to_string()],
            vec!["layers sketched".into(), report.layers_sketched.to_string()],
            vec!["generate".into(), format!("{:.3}s", report.timing.generate_seconds)],
            vec!["sketch (best)".into(), format!("{:.3}s of {} runs", report.timing.best_seconds, report.timing.sketch_seconds.len())],
        ];
        render::table(&["field", "value"], &rows)
    });
    Ok(())
}

pub fn generate(arch: &str, out: &Path, seed: u64, format: Format) -> Result<(), Failure> {
    let manifest = builtin(arch)?;
    ensure_writable_dir(out, false)?;
    let archive = random_archive(&manifest, seed)?;
    save_archive(&archive, out)?;
    let summary = json!({
        "arch": arch,
        "seed": seed,
        "out": out.display().to_string(),
        "tensors": archive.tensors.len(),
        "stored_values": archive.parameter_count(),
    });
    emit(&summary, format, || {
        format!("wrote {} ({} tensors, {} values) to {}\n", arch, archive.tensors.len(), archive.parameter_count(), out.display())
    });
    Ok(())
}
