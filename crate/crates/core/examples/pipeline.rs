//! The full chain with artifacts on disk and a tolerance report:
//! limit cycle, transforms, trials, network VF, reduced coupling, compare.
//!
//!     cargo run --release --example pipeline -- [model] [out-dir]

use std::path::PathBuf;

use pharec::config::PipelineConfig;
use pharec::models::ModelKind;
use pharec::pipeline::run_pipeline;

fn main() -> pharec::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind = args
        .next()
        .map(|s| ModelKind::parse(&s))
        .transpose()?
        .unwrap_or(ModelKind::RadialIsochronClock);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("pharec_{}", kind.name())));
    let cfg = PipelineConfig::preset(kind);
    let report = run_pipeline(&cfg, &out)?;
    for r in &report.rows {
        println!(
            "{:<5} {:<44} {:.3e} (bound {:.1e})",
            if r.pass { "ok" } else { "FAIL" },
            r.name,
            r.value,
            r.bound
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!(
        "artifacts in {}; overall {}",
        out.display(),
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(())
}
