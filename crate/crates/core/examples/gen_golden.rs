//! Regenerates `data/golden_cases.json` from the reference implementation.
//!
//! cargo run -p sketchprune --release --example gen_golden [-- <out>]

use std::time::Instant;

use sketchprune::testkit::{generate_case, sweep_parameters, GoldenFile, GOLDEN_FORMAT};

const SWEEP_SEED: u64 = 0x5EED_F11E;
const CASES: usize = 100;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/golden_cases.json").to_string());
    let mut cases = Vec::with_capacity(CASES);
    for (seed, d, c, ell) in sweep_parameters(SWEEP_SEED, CASES) {
        let start = Instant::now();
        let (case, _) = generate_case(seed, d, c, ell)?;
        eprintln!("seed {seed} d={d} c={c} ℓ={ell}: {:.2}s", start.elapsed().as_secs_f64());
        cases.push(case);
    }
    let file = GoldenFile { format: GOLDEN_FORMAT.to_string(), cases };
    std::fs::write(&out, serde_json::to_string_pretty(&file)? + "\n")?;
    eprintln!("wrote {out}");
    Ok(())
}
