//! Trials, finite-difference derivatives and the network vector field fit:
//! uncoupled Fourier-Taylor series per oscillator plus pairwise couplings.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, FittedSeries, PairBasisSpec, SingleBasisSpec};
use crate::error::{Error, Result};
use crate::limit_cycle::LimitCycle;
use crate::models::{Model, ModelKind};
use crate::ode::{integrate_system, Planar};
use crate::ridge::{ridge_fit_multi, ridge_fit_multi_equilibrated, KappaPolicy};

/// One realization; `theta[i][k]`, `r[i][k]` for oscillator `i` at `times[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub times: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_oscillators(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub n_oscillators: usize,
    pub metadata: String,
}

impl TrialSet {
    pub fn validate(&self) -> Result<()> {
        if self.n_oscillators == 0 {
            return Err(Error::invalid_config("trials", "no oscillators"));
        }
        let dt = self
            .trials
            .first()
            .and_then(|t| t.times.get(1).zip(t.times.first()).map(|(b, a)| b - a));
        for (p, t) in self.trials.iter().enumerate() {
            if t.n_oscillators() != self.n_oscillators || t.r.len() != self.n_oscillators {
                return Err(Error::ShapeMismatch(format!(
                    "trial {p} has {} oscillators",
                    t.n_oscillators()
                )));
            }
            if t.theta.iter().chain(&t.r).any(|c| c.len() != t.len()) {
                return Err(Error::ShapeMismatch(format!(
                    "trial {p} has ragged channels"
                )));
            }
            if let (Some(dt), Some(b), Some(a)) = (dt, t.times.get(1), t.times.first()) {
                if ((b - a) - dt).abs() > 1e-9 * dt.abs() {
                    return Err(Error::NonUniformSampling(format!(
                        "trial {p} uses a different step"
                    )));
                }
            }
            if t.r.iter().flatten().any(|r| !(*r > 0.0)) {
                return Err(Error::NonPositiveRadius(
                    t.r.iter().flatten().copied().fold(f64::INFINITY, f64::min),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialOptions {
    pub count: usize,
    /// Duration in units of the longest period.
    pub periods: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub steps_per_period: usize,
    /// Keep every n-th integration step.
    pub output_stride: usize,
    pub seed: u64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            count: 100,
            periods: 6.0,
            scale_lo: 0.75,
            scale_hi: 1.35,
            steps_per_period: 2000,
            output_stride: 1,
            seed: 1,
        }
    }
}

impl TrialOptions {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid_config("trials.count", "must be positive"));
        }
        if !(self.periods > 0.0) {
            return Err(Error::invalid_config("trials.periods", "must be positive"));
        }
        if !(self.scale_lo > 0.0 && self.scale_hi > self.scale_lo) {
            return Err(Error::invalid_config(
                "trials.scale_lo",
                "need 0 < scale_lo < scale_hi",
            ));
        }
        if self.steps_per_period < 10 || self.output_stride == 0 {
            return Err(Error::invalid_config(
                "trials.steps_per_period",
                "too coarse",
            ));
        }
        Ok(())
    }
}

/// Observable initial conditions per trial, drawn in order from one stream.
pub fn trial_initial_conditions(cycles: &[LimitCycle], opts: &TrialOptions) -> Vec<Vec<Planar>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.count)
        .map(|_| {
            cycles
                .iter()
                .map(|c| {
                    let th = rng.gen_range(0.0..2.0 * PI);
                    let s = rng.gen_range(opts.scale_lo..opts.scale_hi);
                    [th, s * c.gamma_at(th)]
                })
                .collect()
        })
        .collect()
}

/// Integrates the coupled model from random observable initial conditions
/// around each oscillator's uncoupled cycle.
pub fn simulate_trials(
    model: &Model,
    cycles: &[LimitCycle],
    opts: &TrialOptions,
) -> Result<TrialSet> {
    opts.validate()?;
    if cycles.len() != model.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} cycles for {} oscillators",
            cycles.len(),
            model.len()
        )));
    }
    let t_max = cycles.iter().map(|c| c.period).fold(0.0, f64::max);
    let t_min = cycles
        .iter()
        .map(|c| c.period)
        .fold(f64::INFINITY, f64::min);
    let step = t_min / opts.steps_per_period as f64;
    let n_steps = (opts.periods * t_max / step).round().max(1.0);
    let duration = n_steps * step;
    let ics = trial_initial_conditions(cycles, opts);
    let n = model.len();
    let trials = ics
        .into_par_iter()
        .map(|ic| {
            let x0: Vec<f64> = ic
                .iter()
                .enumerate()
                .flat_map(|(i, s)| model.from_observable(i, *s))
                .collect();
            let traj = integrate_system(
                |x, dx| model.native_rhs(x, dx),
                &x0,
                duration,
                step,
                opts.output_stride,
            )?;
            let len = traj.times.len();
            let mut theta = vec![Vec::with_capacity(len); n];
            let mut r = vec![Vec::with_capacity(len); n];
            for k in 0..len {
                let row = traj.row(k);
                for i in 0..n {
                    let o = model.to_observable(i, [row[2 * i], row[2 * i + 1]]);
                    if !(o[1] > 0.0) {
                        return Err(Error::NonPositiveRadius(o[1]));
                    }
                    theta[i].push(o[0].rem_euclid(2.0 * PI));
                    r[i].push(o[1]);
                }
            }
            Ok(Trial {
                times: traj.times,
                theta,
                r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let metadata = format!("simulated:{}", model.spec.kind.name());
    Ok(TrialSet {
        trials,
        n_oscillators: n,
        metadata,
    })
}

pub fn unwrap_angles(theta: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(theta.len());
    let mut offset = 0.0f64;
    for (k, &v) in theta.iter().enumerate() {
        if k > 0 {
            let d = v + offset - out[k - 1];
            offset -= 2.0 * PI * (d / (2.0 * PI)).round();
        }
        out.push(v + offset);
    }
    out
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 5 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples, need 5",
            times.len()
        )));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(h > 0.0)
        || times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h)
    {
        return Err(Error::NonUniformSampling("time base is not uniform".into()));
    }
    Ok(h)
}

/// Second-order central differences with one-sided second-order ends.
pub fn differentiate(times: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let h = uniform_step(times)?;
    if x.len() != times.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for {} times",
            x.len(),
            times.len()
        )));
    }
    let n = x.len();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
    for k in 1..n - 1 {
        d[k] = (x[k + 1] - x[k - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h);
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialDerivatives {
    pub dtheta: Vec<Vec<f64>>,
    pub dr: Vec<Vec<f64>>,
}

pub fn differentiate_trial(trial: &Trial) -> Result<TrialDerivatives> {
    let dtheta = trial
        .theta
        .iter()
        .map(|t| differentiate(&trial.times, &unwrap_angles(t)))
        .collect::<Result<_>>()?;
    let dr = trial
        .r
        .iter()
        .map(|r| differentiate(&trial.times, r))
        .collect::<Result<_>>()?;
    Ok(TrialDerivatives { dtheta, dr })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VfFitOptions {
    pub single: SingleBasisSpec,
    pub pair: PairBasisSpec,
    pub kappa: KappaPolicy,
    /// Samples dropped at each trial end after differencing.
    pub trim: usize,
    /// Keep every n-th sample as a regression row.
    pub row_stride: usize,
    pub coverage_bins: usize,
    pub min_filled_bins: usize,
    /// Scale design columns to unit RMS before the ridge fit.
    pub equilibrate: bool,
}

impl Default for VfFitOptions {
    fn default() -> Self {
        VfFitOptions {
            single: SingleBasisSpec::new(4, 5),
            pair: PairBasisSpec::observable(2, 2, 2),
            kappa: KappaPolicy::default(),
            trim: 2,
            row_stride: 32,
            coverage_bins: 12,
            min_filled_bins: 10,
            equilibrate: true,
        }
    }
}

impl VfFitOptions {
    /// Wilson–Cowan polar components carry a 1/r part around the centroid
    /// and need higher orders.
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::WilsonCowan => VfFitOptions {
                single: SingleBasisSpec::new(8, 12),
                pair: PairBasisSpec::observable(2, 3, 3),
                ..VfFitOptions::default()
            },
            _ => VfFitOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    /// Input oscillator `j`.
    pub source: usize,
    pub theta: FittedSeries,
    pub r: FittedSeries,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rows: usize,
    pub kappa: [f64; 2],
    pub residual_rms: [f64; 2],
    pub effective_dof: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorVf {
    pub theta: FittedSeries,
    pub r: FittedSeries,
    pub coupling: Vec<PairCoupling>,
    pub diagnostics: FitDiagnostics,
    /// Pooled radius range of the fitting data.
    pub r_range: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkVf {
    pub oscillators: Vec<OscillatorVf>,
}

impl NetworkVf {
    pub fn len(&self) -> usize {
        self.oscillators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    pub fn eval_uncoupled(&self, i: usize, s: Planar) -> Planar {
        let o = &self.oscillators[i];
        let spec = o.theta.single_spec().expect("single basis");
        let (a, b) = spec.eval2(&o.theta.coefficients, &o.r.coefficients, s[0], s[1]);
        [a, b]
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairCoupling> {
        self.oscillators
            .get(i)?
            .coupling
            .iter()
            .find(|c| c.source == j)
    }

    /// `G_ij(s_i, s_j)`; zero for pairs without a fitted series.
    pub fn eval_coupling(&self, i: usize, j: usize, si: Planar, sj: Planar) -> Planar {
        match self.pair(i, j) {
            Some(c) => {
                let spec = c.theta.pair_spec().expect("pair basis");
                let p = [si[0], si[1], sj[0], sj[1]];
                [
                    spec.eval(&c.theta.coefficients, p),
                    spec.eval(&c.r.coefficients, p),
                ]
            }
            None => [0.0, 0.0],
        }
    }

    pub fn eval(&self, states: &[Planar]) -> Result<Vec<Planar>> {
        if states.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} states for {} oscillators",
                states.len(),
                self.len()
            )));
        }
        Ok((0..self.len())
            .map(|i| {
                let mut d = self.eval_uncoupled(i, states[i]);
                for c in &self.oscillators[i].coupling {
                    let g = self.eval_coupling(i, c.source, states[i], states[c.source]);
                    d[0] += g[0];
                    d[1] += g[1];
                }
                d
            })
            .collect())
    }

    /// Drops the fitted coupling of input `j` into `i`.
    pub fn without_pair(&self, i: usize, j: usize) -> NetworkVf {
        let mut out = self.clone();
        if let Some(o) = out.oscillators.get_mut(i) {
            o.coupling.retain(|c| c.source != j);
        }
        out
    }

    pub fn coupling_sup_norm(&self, i: usize) -> f64 {
        self.oscillators[i]
            .coupling
            .iter()
            .map(|c| c.theta.sup_norm().max(c.r.sup_norm()))
            .fold(0.0, f64::max)
    }
}

struct Pooled {
    rows: Vec<usize>,
    theta: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    dtheta: Vec<f64>,
    dr: Vec<f64>,
}

fn pool(trials: &TrialSet, derivs: &[TrialDerivatives], i: usize, opts: &VfFitOptions) -> Pooled {
    let n = trials.n_oscillators;
    let mut p = Pooled {
        rows: Vec::new(),
        theta: vec![Vec::new(); n],
        r: vec![Vec::new(); n],
        dtheta: Vec::new(),
        dr: Vec::new(),
    };
    for (t, d) in trials.trials.iter().zip(derivs) {
        let len = t.len();
        if len <= 2 * opts.trim {
            continue;
        }
        for k in (opts.trim..len - opts.trim).step_by(opts.row_stride.max(1)) {
            p.rows.push(k);
            for j in 0..n {
                p.theta[j].push(t.theta[j][k]);
                p.r[j].push(t.r[j][k]);
            }
            p.dtheta.push(d.dtheta[i][k]);
            p.dr.push(d.dr[i][k]);
        }
    }
    p
}

fn coverage(theta: &[f64], bins: usize) -> usize {
    let mut filled = vec![false; bins];
    for t in theta {
        let b = ((t.rem_euclid(2.0 * PI)) / (2.0 * PI) * bins as f64) as usize;
        filled[b.min(bins - 1)] = true;
    }
    filled.iter().filter(|f| **f).count()
}

fn trial_key(t: &Trial) -> Vec<u64> {
    let mut k = vec![t.len() as u64];
    for k_ in 0..t.len().min(2) {
        k.push(t.times[k_].to_bits());
        for i in 0..t.n_oscillators() {
            k.push(t.theta[i][k_].to_bits());
            k.push(t.r[i][k_].to_bits());
        }
    }
    k
}

/// One joint ridge fit per oscillator over `[single | pair(j) for j ≠ i]`
/// with θ̇ and ṙ as targets.
pub fn fit_network_vf(trials: &TrialSet, opts: &VfFitOptions) -> Result<NetworkVf> {
    trials.validate()?;
    opts.single.validate()?;
    opts.pair.validate()?;
    if trials.trials.is_empty() {
        return Err(Error::InsufficientSamples("no trials".into()));
    }
    // canonical trial order, so the fit does not depend on how trials were listed
    let mut sorted = trials.clone();
    sorted.trials.sort_by_key(trial_key);
    let trials = &sorted;
    let derivs: Vec<TrialDerivatives> = trials
        .trials
        .par_iter()
        .map(differentiate_trial)
        .collect::<Result<_>>()?;
    let n = trials.n_oscillators;
    let ms = opts.single.size();
    let mp = opts.pair.size();
    let mut oscillators = Vec::with_capacity(n);
    for i in 0..n {
        let p = pool(trials, &derivs, i, opts);
        let filled = coverage(&p.theta[i], opts.coverage_bins);
        if filled < opts.min_filled_bins {
            return Err(Error::InsufficientCoverage {
                oscillator: i,
                filled,
            });
        }
        let inputs: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let cols = ms + mp * inputs.len();
        let rows = p.dtheta.len();
        if rows < cols {
            return Err(Error::InsufficientSamples(format!(
                "{rows} rows for {cols} columns"
            )));
        }
        let mut design = DMatrix::zeros(rows, cols);
        let mut srow = vec![0.0; ms];
        let mut prow = vec![0.0; mp];
        for k in 0..rows {
            let (ti, ri) = (p.theta[i][k], p.r[i][k]);
            opts.single.fill_row(ti, ri, &mut srow);
            for (c, v) in srow.iter().enumerate() {
                design[(k, c)] = *v;
            }
            for (b, &j) in inputs.iter().enumerate() {
                opts.pair
                    .fill_row(ti, ri, p.theta[j][k], p.r[j][k], &mut prow);
                for (c, v) in prow.iter().enumerate() {
                    design[(k, ms + b * mp + c)] = *v;
                }
            }
        }
        let fits = if opts.equilibrate {
            ridge_fit_multi_equilibrated(&design, &[&p.dtheta, &p.dr], &opts.kappa)?
        } else {
            ridge_fit_multi(&design, &[&p.dtheta, &p.dr], &opts.kappa)?
        };
        let split = |c: &[f64]| -> Result<(FittedSeries, Vec<FittedSeries>)> {
            let single = FittedSeries::new(BasisSpec::Single(opts.single), c[..ms].to_vec())?;
            let pairs = (0..inputs.len())
                .map(|b| {
                    FittedSeries::new(
                        BasisSpec::Pair(opts.pair),
                        c[ms + b * mp..ms + (b + 1) * mp].to_vec(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((single, pairs))
        };
        let (theta, ptheta) = split(&fits[0].coefficients)?;
        let (r, pr) = split(&fits[1].coefficients)?;
        let coupling = inputs
            .iter()
            .zip(ptheta.into_iter().zip(pr))
            .map(|(&j, (theta, r))| PairCoupling {
                source: j,
                theta,
                r,
            })
            .collect();
        let r_range = p.r[i]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let rms = |f: &crate::ridge::RidgeFit| f.residual_norm / (rows as f64).sqrt();
        oscillators.push(OscillatorVf {
            theta,
            r,
            coupling,
            diagnostics: FitDiagnostics {
                rows,
                kappa: [fits[0].kappa, fits[1].kappa],
                residual_rms: [rms(&fits[0]), rms(&fits[1])],
                effective_dof: [fits[0].effective_dof, fits[1].effective_dof],
            },
            r_range,
        });
    }
    Ok(NetworkVf { oscillators })
}

/// Max over the pooled data coordinates of `|fitted − analytic|` for the
/// uncoupled part, per component.
pub fn uncoupled_deviation(
    nvf: &NetworkVf,
    model: &Model,
    trials: &TrialSet,
    i: usize,
) -> [f64; 2] {
    let mut e = [0.0f64; 2];
    for t in &trials.trials {
        for k in 0..t.len() {
            let s = [t.theta[i][k], t.r[i][k]];
            let a = model.uncoupled_polar(i, s);
            let f = nvf.eval_uncoupled(i, s);
            e[0] = e[0].max((a[0] - f[0]).abs());
            e[1] = e[1].max((a[1] - f[1]).abs());
        }
    }
    e
}
