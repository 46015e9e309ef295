//! Stage orchestration with JSON artifacts on disk. Every stage reads its
//! inputs from a source directory (computing missing upstream artifacts in
//! memory) and writes its own artifact to an output directory, so a single
//! stage re-run from a pipeline directory reproduces that stage's file.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::averaging::lambda_log_slope;
use crate::basis::Trig;
use crate::config::PipelineConfig;
use crate::coupling::{
    fit_reduced_coupling, heatmap_layout, rank_one_energy, reduced_coupling_samples,
    sample_evaluation_grid, series_coefficients, Equation, Heatmap, RadiusStats, ReducedCoupling,
    ReducedFrame,
};
use crate::error::{Error, Result};
use crate::io::{
    read_artifact, read_trials, write_artifact, write_heatmaps, write_trials, TRIAL_MANIFEST,
};
use crate::limit_cycle::{analyze_cycle, default_seed, k1_oracle, CycleAnalysis};
use crate::models::{reduced_series, wrap_pi, AnalyticGroundTruth, Model, ModelKind};
use crate::ode::{Planar, PlanarField};
use crate::transforms::{
    composition_error, fit_transforms, interior_grid, k1_alignment, pde_residuals, sample_reduced,
    PdeResiduals, TransformSet,
};
use crate::vf_reconstruction::{
    fit_network_vf, simulate_trials, uncoupled_deviation, NetworkVf, TrialSet,
};

pub const CONFIG_FILE: &str = "config.json";
pub const CYCLE_FILE: &str = "limit_cycle.json";
pub const TRANSFORMS_FILE: &str = "transforms.json";
pub const VF_FILE: &str = "network_vf.json";
pub const COUPLING_FILE: &str = "reduced_coupling.json";
pub const REPORT_FILE: &str = "report.json";
pub const TRIALS_DIR: &str = "trials";
pub const HEATMAP_DIR: &str = "heatmaps";

pub const CONFIG_SCHEMA: &str = "pharec.config/1";
pub const CYCLE_SCHEMA: &str = "pharec.limit_cycle/1";
pub const TRANSFORMS_SCHEMA: &str = "pharec.transforms/1";
pub const VF_SCHEMA: &str = "pharec.network_vf/1";
pub const COUPLING_SCHEMA: &str = "pharec.reduced_coupling/1";
pub const REPORT_SCHEMA: &str = "pharec.report/1";

/// Which uncoupled field the cycles and transforms were computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Model,
    Fitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleArtifact {
    pub source: FieldSource,
    pub oscillators: Vec<CycleAnalysis>,
    /// λ from the log-slope of the radial deviation, per oscillator.
    pub log_slope_lambda: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformDiagnostics {
    pub samples: usize,
    pub pde: PdeResiduals,
    pub composition: f64,
    /// Max |Σ| on the cycle over max |Σ| on the interior grid.
    pub sigma_on_cycle: f64,
    pub phase_anchor: f64,
    pub k1_alignment: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformArtifact {
    pub oscillators: Vec<TransformSet>,
    pub diagnostics: Vec<TransformDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VfArtifact {
    pub network: NetworkVf,
    pub radius: Vec<RadiusStats>,
    pub trials: usize,
    /// Max |fitted − analytic| of the uncoupled field per component, when a
    /// model is known.
    pub uncoupled_deviation: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub target: usize,
    pub source: usize,
    pub ranges: [(f64, f64); 2],
    pub fallback: [bool; 2],
    pub points: usize,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingArtifact {
    pub reduced: ReducedCoupling,
    pub grids: Vec<GridSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub relation: Relation,
}

impl ReportRow {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        ReportRow {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
            relation: Relation::AtMost,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        ReportRow {
            name: name.into(),
            value,
            bound,
            pass: value >= bound,
            relation: Relation::AtLeast,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: Option<String>,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

/// Uncoupled part of a fitted network field as a polar planar field.
pub struct FittedField<'a> {
    pub network: &'a NetworkVf,
    pub index: usize,
}

impl PlanarField for FittedField<'_> {
    fn eval(&self, s: Planar) -> Planar {
        self.network.eval_uncoupled(self.index, s)
    }
}

fn model_of(cfg: &PipelineConfig) -> Result<Option<Model>> {
    cfg.model_spec().map(Model::new).transpose()
}

fn need_model(cfg: &PipelineConfig, what: &str) -> Result<Model> {
    model_of(cfg)?.ok_or_else(|| Error::invalid_config("model", format!("{what} needs a model")))
}

/// The field each oscillator's cycle and transforms come from.
enum Fields {
    Model(Model),
    Fitted(NetworkVf),
}

impl Fields {
    fn resolve(cfg: &PipelineConfig, from: &Path) -> Result<Self> {
        match model_of(cfg)? {
            Some(m) => Ok(Fields::Model(m)),
            None => Ok(Fields::Fitted(load_vf(cfg, from)?.network)),
        }
    }

    fn len(&self) -> usize {
        match self {
            Fields::Model(m) => m.len(),
            Fields::Fitted(n) => n.len(),
        }
    }

    fn source(&self) -> FieldSource {
        match self {
            Fields::Model(_) => FieldSource::Model,
            Fields::Fitted(_) => FieldSource::Fitted,
        }
    }

    fn with_field<T>(&self, i: usize, f: impl FnOnce(&dyn PlanarField) -> T) -> T {
        match self {
            Fields::Model(m) => f(&m.uncoupled_field(i)),
            Fields::Fitted(n) => f(&FittedField {
                network: n,
                index: i,
            }),
        }
    }

    fn seed(&self, i: usize) -> Planar {
        match self {
            Fields::Model(m) => default_seed(m.kind()),
            Fields::Fitted(n) => {
                let (lo, hi) = n.oscillators[i].r_range;
                [0.0, 0.5 * (lo + hi)]
            }
        }
    }
}

pub fn compute_cycles(cfg: &PipelineConfig, from: &Path) -> Result<CycleArtifact> {
    let fields = Fields::resolve(cfg, from)?;
    let mut oscillators = Vec::new();
    let mut log_slope_lambda = Vec::new();
    for i in 0..fields.len() {
        let a = fields.with_field(i, |f| analyze_cycle(f, fields.seed(i), &cfg.cycle))?;
        log_slope_lambda
            .push(fields.with_field(i, |f| lambda_log_slope(f, &a.cycle, cfg.log_slope_scale))?);
        oscillators.push(a);
    }
    Ok(CycleArtifact {
        source: fields.source(),
        oscillators,
        log_slope_lambda,
    })
}

pub fn load_cycles(cfg: &PipelineConfig, from: &Path) -> Result<CycleArtifact> {
    let p = from.join(CYCLE_FILE);
    if p.exists() {
        read_artifact(&p, CYCLE_SCHEMA)
    } else {
        compute_cycles(cfg, from)
    }
}

pub fn compute_transforms(cfg: &PipelineConfig, from: &Path) -> Result<TransformArtifact> {
    let cycles = load_cycles(cfg, from)?;
    let fields = Fields::resolve(cfg, from)?;
    let opts = &cfg.transforms;
    let mut oscillators = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, a) in cycles.oscillators.iter().enumerate() {
        let (c, fl) = (&a.cycle, &a.floquet);
        let (ts, diag) = fields.with_field(i, |f| -> Result<_> {
            let samples = sample_reduced(f, c, fl.lambda, &opts.grid, &opts.averaging)?;
            let ts = fit_transforms(&samples, c, &opts.inverse, &opts.forward, &opts.kappa)?;
            let grid = interior_grid(&ts, c, 15);
            let smax = grid
                .iter()
                .map(|&(th, r)| ts.sigma(th, r).abs())
                .fold(0.0, f64::max);
            let on_cycle = (0..64)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / 64.0;
                    ts.sigma(th, c.gamma_at(th)).abs()
                })
                .fold(0.0, f64::max);
            let k1 = k1_oracle(f, c, fl).ok().map(|k| k1_alignment(&ts, &k));
            let diag = TransformDiagnostics {
                samples: samples.len(),
                pde: pde_residuals(&ts, f, &grid, c.omega, fl.lambda),
                composition: composition_error(&ts, &grid),
                sigma_on_cycle: on_cycle / smax,
                phase_anchor: wrap_pi(ts.phi(0.0, c.gamma_at(0.0))).abs(),
                k1_alignment: k1,
            };
            Ok((ts, diag))
        })?;
        oscillators.push(ts);
        diagnostics.push(diag);
    }
    Ok(TransformArtifact {
        oscillators,
        diagnostics,
    })
}

pub fn load_transforms(cfg: &PipelineConfig, from: &Path) -> Result<TransformArtifact> {
    let p = from.join(TRANSFORMS_FILE);
    if p.exists() {
        read_artifact(&p, TRANSFORMS_SCHEMA)
    } else {
        compute_transforms(cfg, from)
    }
}

pub fn compute_trials(cfg: &PipelineConfig, from: &Path) -> Result<TrialSet> {
    let model = need_model(cfg, "simulate")?;
    let cycles = load_cycles(cfg, from)?;
    let cyc: Vec<_> = cycles.oscillators.iter().map(|a| a.cycle.clone()).collect();
    simulate_trials(&model, &cyc, &cfg.trials)
}

/// Configured data directory, else trials under `from`, else a fresh
/// simulation.
pub fn load_trials(cfg: &PipelineConfig, from: &Path) -> Result<TrialSet> {
    if let Some(d) = &cfg.data {
        return read_trials(&d.trials_dir);
    }
    let dir = from.join(TRIALS_DIR);
    if dir.join(TRIAL_MANIFEST).exists() {
        read_trials(&dir)
    } else {
        compute_trials(cfg, from)
    }
}

pub fn compute_vf(cfg: &PipelineConfig, from: &Path) -> Result<VfArtifact> {
    let trials = load_trials(cfg, from)?;
    let network = fit_network_vf(&trials, &cfg.vf)?;
    let radius = (0..trials.n_oscillators)
        .map(|i| RadiusStats::from_trials(&trials, i, cfg.coupling.radius_quantile))
        .collect::<Result<Vec<_>>>()?;
    let uncoupled = model_of(cfg)?.map(|m| {
        (0..m.len())
            .map(|i| uncoupled_deviation(&network, &m, &trials, i))
            .collect()
    });
    Ok(VfArtifact {
        network,
        radius,
        trials: trials.trials.len(),
        uncoupled_deviation: uncoupled,
    })
}

pub fn load_vf(cfg: &PipelineConfig, from: &Path) -> Result<VfArtifact> {
    let p = from.join(VF_FILE);
    if p.exists() {
        read_artifact(&p, VF_SCHEMA)
    } else {
        compute_vf(cfg, from)
    }
}

pub fn compute_coupling(cfg: &PipelineConfig, from: &Path) -> Result<CouplingArtifact> {
    let vf = load_vf(cfg, from)?;
    let cycles = load_cycles(cfg, from)?;
    let ts = load_transforms(cfg, from)?;
    let n = vf.network.len();
    if ts.oscillators.len() != n || cycles.oscillators.len() != n {
        return Err(Error::ShapeMismatch(
            "artifacts disagree on the oscillator count".into(),
        ));
    }
    let opts = &cfg.coupling;
    let frames: Vec<ReducedFrame> = ts
        .oscillators
        .iter()
        .map(|t| ReducedFrame {
            inverse: t,
            sigma_range: Some((t.domain.sigma_lo, t.domain.sigma_hi)),
        })
        .collect();
    let mut pairs = Vec::new();
    let mut grids = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let seed = opts.seed.wrapping_add((i * n + j) as u64);
            let grid = sample_evaluation_grid(vf.radius[i], vf.radius[j], opts.count, seed)?;
            let samples = reduced_coupling_samples(
                &vf.network,
                &frames[i],
                &frames[j],
                i,
                j,
                &grid.points,
                opts.sigma_margin,
            );
            let excluded = samples.iter().filter(|s| !s.in_domain).count();
            pairs.push(fit_reduced_coupling(
                &samples,
                &opts.basis,
                &opts.kappa,
                opts.equilibrate,
                i,
                j,
            )?);
            grids.push(GridSummary {
                target: i,
                source: j,
                ranges: grid.ranges,
                fallback: grid.fallback,
                points: grid.points.len(),
                excluded,
            });
        }
    }
    let reduced = ReducedCoupling {
        omega: cycles.oscillators.iter().map(|a| a.cycle.omega).collect(),
        lambda: cycles
            .oscillators
            .iter()
            .map(|a| a.floquet.lambda)
            .collect(),
        pairs,
    };
    Ok(CouplingArtifact { reduced, grids })
}

pub fn heatmaps(rc: &ReducedCoupling) -> Result<Vec<Heatmap>> {
    let mut out = Vec::new();
    for p in &rc.pairs {
        for eq in [Equation::Phase, Equation::Amplitude] {
            out.push(heatmap_layout(rc, (p.target, p.source), eq)?);
        }
    }
    Ok(out)
}

/// Stage runners: read inputs from `from`, write the stage artifact to `out`.
pub fn run_limit_cycle(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<CycleArtifact> {
    let a = compute_cycles(cfg, from).map_err(|e| e.in_stage("limit-cycle"))?;
    write_artifact(&out.join(CYCLE_FILE), CYCLE_SCHEMA, &a)?;
    Ok(a)
}

pub fn run_transforms(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<TransformArtifact> {
    let a = compute_transforms(cfg, from).map_err(|e| e.in_stage("transforms"))?;
    write_artifact(&out.join(TRANSFORMS_FILE), TRANSFORMS_SCHEMA, &a)?;
    Ok(a)
}

pub fn run_simulate(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<TrialSet> {
    let t = compute_trials(cfg, from).map_err(|e| e.in_stage("simulate"))?;
    write_trials(
        &out.join(TRIALS_DIR),
        &t,
        cfg.model_spec().as_ref(),
        Some(cfg.trials.seed),
    )?;
    Ok(t)
}

pub fn run_vf(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<VfArtifact> {
    let a = compute_vf(cfg, from).map_err(|e| e.in_stage("reconstruct-vf"))?;
    write_artifact(&out.join(VF_FILE), VF_SCHEMA, &a)?;
    Ok(a)
}

pub fn run_coupling(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<CouplingArtifact> {
    let a = compute_coupling(cfg, from).map_err(|e| e.in_stage("reduce-coupling"))?;
    write_artifact(&out.join(COUPLING_FILE), COUPLING_SCHEMA, &a)?;
    write_heatmaps(&out.join(HEATMAP_DIR), &heatmaps(&a.reduced)?)?;
    Ok(a)
}

pub fn run_compare(cfg: &PipelineConfig, from: &Path, out: &Path) -> Result<Report> {
    let r = compare(cfg, from).map_err(|e| e.in_stage("compare"))?;
    write_artifact(&out.join(REPORT_FILE), REPORT_SCHEMA, &r)?;
    Ok(r)
}

pub fn write_config(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    write_artifact(&out.join(CONFIG_FILE), CONFIG_SCHEMA, cfg)
}

pub fn read_config(dir: &Path) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = read_artifact(&dir.join(CONFIG_FILE), CONFIG_SCHEMA)?;
    cfg.validate()?;
    Ok(cfg)
}

/// All stages in order, each reading what the previous ones wrote to `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<Report> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_config(cfg, out)?;
    if cfg.model.is_some() {
        run_limit_cycle(cfg, out, out)?;
        run_transforms(cfg, out, out)?;
        if cfg.data.is_none() {
            run_simulate(cfg, out, out)?;
        }
        run_vf(cfg, out, out)?;
    } else {
        run_vf(cfg, out, out)?;
        run_limit_cycle(cfg, out, out)?;
        run_transforms(cfg, out, out)?;
    }
    run_coupling(cfg, out, out)?;
    run_compare(cfg, out, out)
}

fn osc(name: &str, i: usize) -> String {
    format!("{name}[{}]", i + 1)
}

fn pair_name(name: &str, i: usize, j: usize) -> String {
    format!("{name}[{}<-{}]", i + 1, j + 1)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Tolerance rows from the artifacts in `from` and, where the model has
/// closed forms, the analytic oracles.
pub fn compare(cfg: &PipelineConfig, from: &Path) -> Result<Report> {
    let tol = &cfg.tolerances;
    let cycles = load_cycles(cfg, from)?;
    let ts = load_transforms(cfg, from)?;
    let vf = load_vf(cfg, from)?;
    let rc = if from.join(COUPLING_FILE).exists() {
        read_artifact::<CouplingArtifact>(&from.join(COUPLING_FILE), COUPLING_SCHEMA)?
    } else {
        compute_coupling(cfg, from)?
    };
    let model = model_of(cfg)?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let n = cycles.oscillators.len();
    let analytic: Vec<Option<AnalyticGroundTruth>> = (0..n)
        .map(|i| model.as_ref().and_then(|m| m.analytic(i).ok()))
        .collect();
    if analytic.iter().any(Option::is_none) {
        notes.push(
            "oracle unavailable: no closed-form transforms; analytic comparisons skipped".into(),
        );
    }

    for (i, a) in cycles.oscillators.iter().enumerate() {
        let lm = a.floquet.lambda;
        let ls = cycles.log_slope_lambda[i];
        rows.push(ReportRow::at_most(
            osc("floquet.lambda_routes_rel", i),
            rel(ls, lm),
            tol.lambda_routes_rel,
        ));
        if let Some(g) = &analytic[i] {
            rows.push(ReportRow::at_most(
                osc("floquet.lambda_rel", i),
                rel(lm, g.lambda()),
                tol.lambda_rel,
            ));
            rows.push(ReportRow::at_most(
                osc("floquet.log_slope_rel", i),
                rel(ls, g.lambda()),
                tol.log_slope_rel,
            ));
        }
    }

    for (i, d) in ts.diagnostics.iter().enumerate() {
        rows.push(ReportRow::at_most(
            osc("transforms.pde_phase", i),
            d.pde.phase,
            tol.pde_residual,
        ));
        rows.push(ReportRow::at_most(
            osc("transforms.pde_amplitude", i),
            d.pde.amplitude,
            tol.pde_residual,
        ));
        rows.push(ReportRow::at_most(
            osc("transforms.composition", i),
            d.composition,
            tol.composition,
        ));
        rows.push(ReportRow::at_most(
            osc("transforms.sigma_on_cycle", i),
            d.sigma_on_cycle,
            tol.sigma_on_cycle,
        ));
        rows.push(ReportRow::at_most(
            osc("transforms.phase_anchor", i),
            d.phase_anchor,
            1e-2,
        ));
        if let Some(k) = d.k1_alignment {
            rows.push(ReportRow::at_least(
                osc("transforms.k1_alignment", i),
                k,
                0.99,
            ));
        }
    }
    for (i, g) in analytic.iter().enumerate() {
        let Some(g) = g else { continue };
        let t = &ts.oscillators[i];
        match g {
            AnalyticGroundTruth::RadialIsochronClock { .. } => {
                let (s, p) = transform_errors(t, g, (0.8, 1.3), (0.8, 1.25));
                rows.push(ReportRow::at_most(
                    osc("transforms.inverse_amplitude_abs", i),
                    s.0,
                    tol.inverse_amplitude_abs,
                ));
                rows.push(ReportRow::at_most(
                    osc("transforms.inverse_phase", i),
                    p,
                    tol.inverse_phase_clock,
                ));
            }
            AnalyticGroundTruth::Canonical { .. } => {
                let (s, p) = transform_errors(t, g, (0.8, 1.3), (0.8, 1.25));
                rows.push(ReportRow::at_most(
                    osc("transforms.inverse_amplitude_scaled_rel", i),
                    s.1,
                    tol.inverse_amplitude_scaled_rel,
                ));
                rows.push(ReportRow::at_most(
                    osc("transforms.inverse_phase", i),
                    p,
                    tol.inverse_phase_canonical,
                ));
            }
        }
    }

    if let Some(dev) = &vf.uncoupled_deviation {
        for (i, d) in dev.iter().enumerate() {
            rows.push(ReportRow::at_most(
                osc("vf.uncoupled_deviation_theta", i),
                d[0],
                tol.vf_deviation,
            ));
            rows.push(ReportRow::at_most(
                osc("vf.uncoupled_deviation_r", i),
                d[1],
                tol.vf_deviation,
            ));
        }
    }
    for (i, g) in analytic.iter().enumerate() {
        if let Some(AnalyticGroundTruth::RadialIsochronClock { a }) = g {
            let o = &vf.network.oscillators[i];
            let spec = o.r.single_spec().expect("single basis");
            if spec.n_powers >= 3 {
                let c1 = o.r.coefficients[spec.index(1, 0, Trig::Const)];
                let c3 = o.r.coefficients[spec.index(3, 0, Trig::Const)];
                rows.push(ReportRow::at_most(
                    osc("vf.radial_linear_rel", i),
                    rel(c1, *a),
                    tol.vf_coefficient_rel,
                ));
                rows.push(ReportRow::at_most(
                    osc("vf.radial_cubic_rel", i),
                    rel(c3, -a),
                    tol.vf_coefficient_rel,
                ));
            }
        }
    }

    let reduced = &rc.reduced;
    match &model {
        Some(m) => {
            let eps = &m.spec.coupling;
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i && eps[i][j] != 0.0 && eps[j][i] == 0.0) {
                    let (dn, dr) = (vf.network.pair(i, j), vf.network.pair(j, i));
                    if let (Some(dn), Some(dr)) = (dn, dr) {
                        let sup = |p: &crate::vf_reconstruction::PairCoupling| {
                            p.theta.sup_norm().max(p.r.sup_norm())
                        };
                        rows.push(ReportRow::at_most(
                            pair_name("directionality.observable", i, j),
                            sup(dr) / sup(dn),
                            tol.directionality,
                        ));
                    }
                    let (pn, pr) = (reduced.pair(i, j)?, reduced.pair(j, i)?);
                    rows.push(ReportRow::at_most(
                        pair_name("directionality.reduced", i, j),
                        pr.sup_norm() / pn.sup_norm(),
                        tol.directionality,
                    ));
                    reduced_rows(m, reduced, i, j, &analytic, cfg, &mut rows)?;
                }
            }
        }
        None => notes.push("no model: directionality and reduced-series checks skipped".into()),
    }
    for g in rc.grids.iter().filter(|g| g.fallback.iter().any(|f| *f)) {
        notes.push(format!(
            "evaluation grid for {}<-{} used the widened radius range",
            g.target + 1,
            g.source + 1
        ));
    }

    let pass = rows.iter().all(|r| r.pass);
    Ok(Report {
        model: cfg.kind().map(|k| k.name().to_string()),
        rows,
        notes,
        pass,
    })
}

/// `((max abs Σ error, max rel error after the best positive scale), max
/// wrapped Φ error)` against the analytic maps on a 64-angle grid.
pub fn transform_errors(
    t: &TransformSet,
    g: &AnalyticGroundTruth,
    sigma_r: (f64, f64),
    phi_r: (f64, f64),
) -> ((f64, f64), f64) {
    let angles: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
    let radii = |(lo, hi): (f64, f64)| (0..=25).map(move |k| lo + (hi - lo) * k as f64 / 25.0);
    let mut pairs = Vec::new();
    for &th in &angles {
        for r in radii(sigma_r) {
            pairs.push((t.sigma(th, r), g.sigma_grad_scaled(th, r).0));
        }
    }
    let abs = pairs.iter().map(|(f, a)| (f - a).abs()).fold(0.0, f64::max);
    let num: f64 = pairs.iter().map(|(f, a)| f * a).sum();
    let den: f64 = pairs.iter().map(|(_, a)| a * a).sum();
    let c = (num / den).max(0.0);
    let amax = pairs.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
    let scaled = pairs
        .iter()
        .map(|(f, a)| (f - c * a).abs())
        .fold(0.0, f64::max)
        / amax;
    let mut phase = 0.0f64;
    for &th in &angles {
        for r in radii(phi_r) {
            phase = phase.max(wrap_pi(t.phi(th, r) - g.phi(th, r)).abs());
        }
    }
    ((abs, scaled), phase)
}

fn reduced_rows(
    m: &Model,
    rc: &ReducedCoupling,
    i: usize,
    j: usize,
    analytic: &[Option<AnalyticGroundTruth>],
    cfg: &PipelineConfig,
    rows: &mut Vec<ReportRow>,
) -> Result<()> {
    let tol = &cfg.tolerances;
    let p = rc.pair(i, j)?;
    let spec = *p.phase.pair_spec().expect("pair basis");
    if m.kind() == ModelKind::VanDerPol {
        rows.push(ReportRow::at_least(
            pair_name("reduced.rank_one_energy", i, j),
            rank_one_energy(&p.phase)?,
            tol.rank_one_energy,
        ));
    }
    let (Some(gi), Some(gj)) = (&analytic[i], &analytic[j]) else {
        return Ok(());
    };
    let eps = m.spec.coupling[i][j];
    let printed = reduced_series(&m.spec, i, j)?.scaled(gi.amplitude_scale(), gj.amplitude_scale());
    let amps = spec.amplitude_terms();
    for (label, terms, fit) in [
        ("phase", &printed.phase, &p.phase),
        ("amplitude", &printed.amplitude, &p.amplitude),
    ] {
        let want = series_coefficients(terms, &spec)?;
        let err = want
            .iter()
            .zip(&fit.coefficients)
            .enumerate()
            .filter(|(k, (w, _))| {
                let t = spec.term(*k);
                w.abs() >= 0.1 * eps.abs() && t.power_i + t.power_j <= 1
            })
            .map(|(_, (w, f))| rel(*f, *w))
            .fold(0.0, f64::max);
        rows.push(ReportRow::at_most(
            pair_name(&format!("reduced.series_rel.{label}"), i, j),
            err,
            tol.reduced_series_rel,
        ));
    }
    if m.kind() == ModelKind::RadialIsochronClock {
        let a00 = amps
            .iter()
            .position(|&x| x == (0, 0))
            .expect("constant amplitude term");
        let lead_idx = spec.index(a00, 1, 1);
        let lead = p.phase.coefficients[lead_idx];
        rows.push(ReportRow::at_most(
            pair_name("reduced.leading_rel", i, j),
            rel(lead, eps),
            tol.reduced_leading_rel,
        ));
        // Only the constant-amplitude panel: the printed series itself has
        // order-1 and order-2 terms of magnitude ε and 1.5ε.
        let panel = a00 * spec.n_own() * spec.n_input()..(a00 + 1) * spec.n_own() * spec.n_input();
        let other = panel
            .filter(|&k| k != lead_idx)
            .map(|k| p.phase.coefficients[k].abs())
            .fold(0.0, f64::max);
        rows.push(ReportRow::at_most(
            pair_name("reduced.leading_dominance", i, j),
            other / lead.abs(),
            1.0,
        ));
        let mut mismatches = 0;
        for t in printed.phase.iter().filter(|t| t.power_i + t.power_j == 1) {
            let a = amps
                .iter()
                .position(|&x| x == (t.power_i, t.power_j))
                .expect("order-1 term");
            let k = spec.index(
                a,
                if t.own_sin { 2 } else { 1 },
                if t.input_sin { 1 } else { 0 },
            );
            if p.phase.coefficients[k].signum() != t.coefficient.signum() {
                mismatches += 1;
            }
        }
        rows.push(ReportRow::at_most(
            pair_name("reduced.sign_mismatches", i, j),
            mismatches as f64,
            0.0,
        ));
    }
    Ok(())
}

/// Directory the pipeline writes to: explicit, else the config's, else
/// `artifacts`.
pub fn output_dir(cfg: &PipelineConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("artifacts"))
}
