//! Acceptance run: the four-model pipeline (twice, for determinism) plus
//! direct checks of the ridge and averaging properties. One PASS/FAIL line
//! per criterion; exits nonzero if any criterion fails.

#![allow(clippy::vec_init_then_push)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pharec::averaging::{Averager, AveragingOptions};
use pharec::basis::PairBasisSpec;
use pharec::config::PipelineConfig;
use pharec::coupling::{
    fit_reduced_coupling, reduced_coupling_samples, sample_evaluation_grid, series_coefficients,
    RadiusStats, ReducedFrame,
};
use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{reduced_series, wrap_pi, Model, ModelKind};
use pharec::ode::planar_step;
use pharec::pipeline::{run_pipeline, Relation, Report, ReportRow};
use pharec::ridge::{gcv_score, ridge_fit, KappaPolicy, SvdContext};

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(id: usize, title: &str, o: &Outcome) {
    println!(
        "{} {id:>2} {title}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

/// Value over bound, flipped for lower bounds, so that ≤ 1 passes.
fn load(r: &ReportRow) -> f64 {
    match r.relation {
        Relation::AtMost if r.bound > 0.0 => r.value / r.bound,
        Relation::AtMost => {
            if r.value <= r.bound {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Relation::AtLeast => r.bound / r.value,
    }
}

/// Rows whose name starts with one of `prefixes`, in the reports of `kinds`,
/// each of which must contribute at least one row.
fn rows_criterion(
    reports: &HashMap<ModelKind, Report>,
    kinds: &[ModelKind],
    prefixes: &[&str],
) -> Outcome {
    let mut worst: Option<(f64, String)> = None;
    let mut count = 0;
    let mut failed = Vec::new();
    for kind in kinds {
        let Some(rep) = reports.get(kind) else {
            return Outcome {
                pass: false,
                detail: format!("no report for {}", kind.name()),
            };
        };
        let rows: Vec<&ReportRow> = rep
            .rows
            .iter()
            .filter(|r| prefixes.iter().any(|p| r.name.starts_with(p)))
            .collect();
        if rows.is_empty() {
            return Outcome {
                pass: false,
                detail: format!("{} has no {:?} rows", kind.name(), prefixes),
            };
        }
        for r in rows {
            count += 1;
            if !r.pass {
                failed.push(format!("{}:{}={:.3e}", kind.name(), r.name, r.value));
            }
            let l = load(r);
            if worst.as_ref().is_none_or(|w| l > w.0) {
                worst = Some((
                    l,
                    format!(
                        "{}:{} {:.3e} vs {:.1e}",
                        kind.name(),
                        r.name,
                        r.value,
                        r.bound
                    ),
                ));
            }
        }
    }
    let (_, w) = worst.unwrap_or_default();
    if failed.is_empty() {
        Outcome {
            pass: true,
            detail: format!("{count} rows, tightest {w}"),
        }
    } else {
        Outcome {
            pass: false,
            detail: format!("{count} rows, failing {}", failed.join(", ")),
        }
    }
}

fn and(a: Outcome, b: Outcome) -> Outcome {
    Outcome {
        pass: a.pass && b.pass,
        detail: format!("{}; {}", a.detail, b.detail),
    }
}

fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let (ta, tb) = (tree(a), tree(b));
    if ta != tb {
        return Err("file lists differ".into());
    }
    for f in &ta {
        if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap() {
            return Err(format!("{} differs", f.display()));
        }
    }
    Ok(ta.len())
}

/// Analytic transforms and analytic coupling against the printed series.
fn analytic_series(kind: ModelKind) -> Result<(usize, f64), String> {
    let m = Model::preset(kind).map_err(|e| e.to_string())?;
    let g = [m.analytic(0).unwrap(), m.analytic(1).unwrap()];
    let stats = RadiusStats { lo: 0.92, hi: 1.08 };
    let grid = sample_evaluation_grid(stats, stats, 4000, 3).map_err(|e| e.to_string())?;
    let fi = ReducedFrame {
        inverse: &g[1],
        sigma_range: None,
    };
    let fj = ReducedFrame {
        inverse: &g[0],
        sigma_range: None,
    };
    let s = reduced_coupling_samples(&m, &fi, &fj, 1, 0, &grid.points, 0.1);
    let spec = PairBasisSpec::reduced(2, 2, 2);
    let p = fit_reduced_coupling(&s, &spec, &KappaPolicy::default(), false, 1, 0)
        .map_err(|e| e.to_string())?;
    let printed = reduced_series(&m.spec, 1, 0)
        .unwrap()
        .scaled(g[1].amplitude_scale(), g[0].amplitude_scale());
    let eps = m.spec.coupling[1][0];
    let (mut n, mut worst) = (0, 0.0f64);
    for (terms, fit) in [
        (&printed.phase, &p.phase),
        (&printed.amplitude, &p.amplitude),
    ] {
        let want = series_coefficients(terms, &spec).map_err(|e| e.to_string())?;
        for (k, (w, f)) in want.iter().zip(&fit.coefficients).enumerate() {
            let t = spec.term(k);
            if w.abs() >= 0.1 * eps && t.power_i + t.power_j <= 1 {
                n += 1;
                worst = worst.max((w - f).abs() / w.abs());
            }
        }
    }
    Ok((n, worst))
}

fn ridge_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ols_err = 0.0f64;
    for _ in 0..10 {
        let a = DMatrix::from_fn(50, 20, |r, c| {
            rng.gen_range(-1.0..1.0) + if r == c { 2.0 } else { 0.0 }
        });
        let y: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fit = ridge_fit(&a, &y, &KappaPolicy::Fixed(0.0)).unwrap();
        let ata = a.transpose() * &a;
        let aty = a.transpose() * DVector::from_column_slice(&y);
        let ols = ata.cholesky().unwrap().solve(&aty);
        for (q, o) in fit.coefficients.iter().zip(ols.iter()) {
            ols_err = ols_err.max((q - o).abs());
        }
    }
    let mut violations = 0;
    for _ in 0..100 {
        let rows = rng.gen_range(10..60);
        let cols = rng.gen_range(2..rows.min(25));
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ctx = SvdContext::new(&a, &[&y]).unwrap();
        let mut prev = f64::INFINITY;
        for e in -60..=20 {
            let q = ctx.coefficients(0, 10f64.powf(e as f64 / 5.0));
            let n = q.iter().map(|v| v * v).sum::<f64>();
            if n > prev {
                violations += 1;
            }
            prev = n;
        }
    }
    let y: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ctx = SvdContext::new(&DMatrix::identity(7, 7), &[&y]).unwrap();
    let g: Vec<f64> = [1e-4, 1e-2, 1.0, 1e2, 1e4]
        .iter()
        .map(|&k| gcv_score(&ctx, 0, k).unwrap())
        .collect();
    let spread = g.iter().map(|v| (v - g[0]).abs()).fold(0.0, f64::max);
    Outcome {
        pass: ols_err < 1e-10 && violations == 0 && spread < 1e-10,
        detail: format!("κ=0 vs OLS {ols_err:.1e}; shrinkage violations {violations}/100 problems; identity GCV spread {spread:.1e}"),
    }
}

fn flow_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for kind in ModelKind::all() {
        let m = Model::preset(kind).unwrap();
        let a = &analyze_model(&m, &CycleOptions::default()).unwrap()[0];
        let f = m.uncoupled_field(0);
        let av =
            Averager::new(&f, &a.cycle, a.floquet.lambda, AveragingOptions::default()).unwrap();
        let shift = 3 * a.cycle.steps_per_period() / 10;
        let t = shift as f64 * a.cycle.step;
        for _ in 0..5 {
            let th = rng.gen_range(0.0..2.0 * PI);
            let r0 = rng.gen_range(0.8..1.25) * a.cycle.gamma_at(th);
            let (s0, s1) = match av.reduce(th, r0).and_then(|s0| {
                let mut x = [th, r0];
                for _ in 0..shift {
                    x = planar_step(&f, x, a.cycle.step);
                }
                Ok((s0, av.reduce(x[0], x[1])?))
            }) {
                Ok(v) => v,
                Err(e) => {
                    return Outcome {
                        pass: false,
                        detail: format!("{}: {e}", kind.name()),
                    }
                }
            };
            worst = worst.max(wrap_pi(s1.phi0 - s0.phi0 - a.cycle.omega * t).abs());
            worst = worst.max((s1.sigma0 - s0.sigma0 * (a.floquet.lambda * t).exp()).abs());
        }
    }
    Outcome {
        pass: worst < 1e-3,
        detail: format!("20 ICs, max deviation {worst:.2e} (bound 1e-3)"),
    }
}

fn main() {
    let all = ModelKind::all();
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut reports = HashMap::new();
    let mut errors = Vec::new();
    let mut first_pass = Duration::ZERO;
    let mut identical = Vec::new();
    let started = Instant::now();
    for kind in all {
        let cfg = PipelineConfig::preset(kind);
        let (a, b) = (
            tmp.path().join(format!("{}_a", kind.name())),
            tmp.path().join(format!("{}_b", kind.name())),
        );
        let t0 = Instant::now();
        let ra = run_pipeline(&cfg, &a);
        first_pass += t0.elapsed();
        match ra {
            Ok(r) => {
                reports.insert(kind, r);
            }
            Err(e) => {
                errors.push(format!("{}: {e}", kind.name()));
                continue;
            }
        }
        let same = run_pipeline(&cfg, &b)
            .map_err(|e| e.to_string())
            .and_then(|_| same_tree(&a, &b));
        identical.push((kind, same));
        let _ = fs::remove_dir_all(&a);
        let _ = fs::remove_dir_all(&b);
    }
    for e in &errors {
        println!("pipeline error: {e}");
    }

    use ModelKind::*;
    let analytic = [RadialIsochronClock, Canonical];
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((
        1,
        "Floquet exponents",
        and(
            rows_criterion(
                &reports,
                &analytic,
                &["floquet.lambda_rel", "floquet.log_slope_rel"],
            ),
            rows_criterion(&reports, &all, &["floquet.lambda_routes_rel"]),
        ),
    ));
    results.push((
        2,
        "inverse amplitude transform",
        rows_criterion(&reports, &analytic, &["transforms.inverse_amplitude"]),
    ));
    results.push((
        3,
        "inverse phase transform",
        rows_criterion(&reports, &analytic, &["transforms.inverse_phase"]),
    ));
    results.push((
        4,
        "invariance-equation residuals",
        rows_criterion(&reports, &all, &["transforms.pde_"]),
    ));
    results.push((
        5,
        "composition identity",
        rows_criterion(&reports, &all, &["transforms.composition"]),
    ));
    results.push((
        6,
        "VF reconstruction",
        and(
            rows_criterion(&reports, &all, &["vf.uncoupled_deviation"]),
            rows_criterion(&reports, &[RadialIsochronClock], &["vf.radial_"]),
        ),
    ));
    results.push((
        7,
        "directionality",
        rows_criterion(&reports, &all, &["directionality."]),
    ));
    let oracle = {
        let mut pass = true;
        let mut parts = Vec::new();
        for kind in analytic {
            match analytic_series(kind) {
                Ok((n, w)) => {
                    pass &= n > 0 && w <= 0.05;
                    parts.push(format!(
                        "{} oracle route {n} coefficients within {:.1}% (bound 5%)",
                        kind.name(),
                        100.0 * w
                    ));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{}: {e}", kind.name()));
                }
            }
        }
        Outcome {
            pass,
            detail: parts.join("; "),
        }
    };
    results.push((
        8,
        "reduced coupling structure",
        and(
            and(
                rows_criterion(
                    &reports,
                    &[RadialIsochronClock],
                    &["reduced.leading_", "reduced.sign_mismatches"],
                ),
                rows_criterion(&reports, &analytic, &["reduced.series_rel"]),
            ),
            oracle,
        ),
    ));
    results.push((
        9,
        "van der Pol factorization",
        rows_criterion(&reports, &[VanDerPol], &["reduced.rank_one_energy"]),
    ));
    results.push((10, "ridge/GCV properties", ridge_properties()));
    results.push((11, "averaging flow equivariance", flow_equivariance()));
    let det = {
        let mut pass = errors.is_empty() && identical.len() == all.len();
        let mut parts = Vec::new();
        for (kind, r) in &identical {
            match r {
                Ok(n) => parts.push(format!("{} {n} files identical", kind.name())),
                Err(e) => {
                    pass = false;
                    parts.push(format!("{}: {e}", kind.name()));
                }
            }
        }
        let limit = Duration::from_secs(30 * 60);
        pass &= first_pass < limit;
        parts.push(format!(
            "four-model pipeline {:.0}s (bound 1800s)",
            first_pass.as_secs_f64()
        ));
        Outcome {
            pass,
            detail: parts.join("; "),
        }
    };
    results.push((12, "end-to-end determinism and runtime", det));

    for (id, title, o) in &results {
        line(*id, title, o);
    }
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "{} of {} criteria pass ({:.0}s)",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
