//! Observable-space couplings mapped into phase-amplitude space through the
//! inverse-transform gradients, fitted as reduced Fourier-Taylor series and
//! laid out as coefficient heatmaps.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, FittedSeries, PairBasisSpec, PairMode};
use crate::error::{Error, Result};
use crate::models::{Model, SeriesTerm};
use crate::ode::Planar;
use crate::ridge::{ridge_fit_multi, ridge_fit_multi_equilibrated, KappaPolicy};
use crate::transforms::InverseTransform;
use crate::vf_reconstruction::{NetworkVf, TrialSet};

/// Source of `G_ij` in observable coordinates.
pub trait CouplingField: Sync {
    fn coupling(&self, i: usize, j: usize, si: Planar, sj: Planar) -> Planar;
}

impl CouplingField for NetworkVf {
    fn coupling(&self, i: usize, j: usize, si: Planar, sj: Planar) -> Planar {
        self.eval_coupling(i, j, si, sj)
    }
}

impl CouplingField for Model {
    fn coupling(&self, i: usize, j: usize, si: Planar, sj: Planar) -> Planar {
        self.coupling_polar(i, j, si, sj)
    }
}

/// Robust radius range of an oscillator's data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusStats {
    pub lo: f64,
    pub hi: f64,
}

impl RadiusStats {
    /// Lower and upper `q`-quantiles of the values.
    pub fn from_values(values: &[f64], q: f64) -> Result<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Err(Error::EmptyRadiusData);
        }
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
            let k = pos.floor() as usize;
            let f = pos - k as f64;
            if k + 1 < v.len() {
                v[k] * (1.0 - f) + v[k + 1] * f
            } else {
                v[k]
            }
        };
        Ok(RadiusStats {
            lo: at(q),
            hi: at(1.0 - q),
        })
    }

    pub fn from_trials(trials: &TrialSet, i: usize, q: f64) -> Result<Self> {
        let all: Vec<f64> = trials
            .trials
            .iter()
            .flat_map(|t| t.r.get(i).into_iter().flatten().copied())
            .collect();
        Self::from_values(&all, q)
    }

    /// `[0.8·hi, 1.25·lo]`, or `[0.8·lo, 1.25·hi]` when that is empty;
    /// the flag marks the fallback.
    pub fn sampling_range(&self) -> ((f64, f64), bool) {
        let primary = (0.8 * self.hi, 1.25 * self.lo);
        if primary.0 < primary.1 {
            (primary, false)
        } else {
            ((0.8 * self.lo, 1.25 * self.hi), true)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    /// `(θ_i, r_i, θ_j, r_j)`.
    pub points: Vec<[f64; 4]>,
    pub ranges: [(f64, f64); 2],
    pub fallback: [bool; 2],
}

/// Cartesian product of two independent uniform point sets of
/// `⌈√count⌉` points each, one per oscillator. The product keeps the
/// empirical measure factorized, so a separable coupling stays separable
/// under least squares.
pub fn sample_evaluation_grid(
    stats_i: RadiusStats,
    stats_j: RadiusStats,
    count: usize,
    seed: u64,
) -> Result<EvaluationGrid> {
    for s in [stats_i, stats_j] {
        if !(s.lo > 0.0 && s.hi >= s.lo && s.hi.is_finite()) {
            return Err(Error::EmptyRadiusData);
        }
    }
    let (ri, fi) = stats_i.sampling_range();
    let (rj, fj) = stats_j.sampling_range();
    let n = (count as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.gen_range(0.0..2.0 * PI), rng.gen_range(lo..hi)])
            .collect()
    };
    let own = draw(ri);
    let input = draw(rj);
    let points = own
        .iter()
        .flat_map(|a| input.iter().map(move |b| [a[0], a[1], b[0], b[1]]))
        .collect();
    Ok(EvaluationGrid {
        points,
        ranges: [ri, rj],
        fallback: [fi, fj],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSample {
    pub phi_i: f64,
    pub sigma_i: f64,
    pub phi_j: f64,
    pub sigma_j: f64,
    pub g_phi: f64,
    pub g_sigma: f64,
    /// False when a reduced amplitude falls outside its transform domain.
    pub in_domain: bool,
}

/// Inverse transform of one oscillator plus the σ range it was fitted on.
pub struct ReducedFrame<'a> {
    pub inverse: &'a dyn InverseTransform,
    pub sigma_range: Option<(f64, f64)>,
}

impl ReducedFrame<'_> {
    fn contains(&self, sigma: f64, margin: f64) -> bool {
        match self.sigma_range {
            Some((lo, hi)) => {
                let w = (hi - lo) * margin;
                sigma >= lo - w && sigma <= hi + w
            }
            None => true,
        }
    }
}

/// `g^φ = ∇Φ_i·G_ij` and `g^σ = ∇Σ_i·G_ij` at every point.
pub fn reduced_coupling_samples(
    field: &(impl CouplingField + ?Sized),
    frame_i: &ReducedFrame,
    frame_j: &ReducedFrame,
    i: usize,
    j: usize,
    points: &[[f64; 4]],
    margin: f64,
) -> Vec<CouplingSample> {
    points
        .par_iter()
        .map(|p| {
            let g = field.coupling(i, j, [p[0], p[1]], [p[2], p[3]]);
            let (phi_i, pa, pb) = frame_i.inverse.phi_grad(p[0], p[1]);
            let (sigma_i, sa, sb) = frame_i.inverse.sigma_grad(p[0], p[1]);
            let (phi_j, _, _) = frame_j.inverse.phi_grad(p[2], p[3]);
            let (sigma_j, _, _) = frame_j.inverse.sigma_grad(p[2], p[3]);
            CouplingSample {
                phi_i: phi_i.rem_euclid(2.0 * PI),
                sigma_i,
                phi_j: phi_j.rem_euclid(2.0 * PI),
                sigma_j,
                g_phi: pa * g[0] + pb * g[1],
                g_sigma: sa * g[0] + sb * g[1],
                in_domain: frame_i.contains(sigma_i, margin) && frame_j.contains(sigma_j, margin),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Phase,
    Amplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReducedCoupling {
    pub target: usize,
    pub source: usize,
    pub phase: FittedSeries,
    pub amplitude: FittedSeries,
    pub kappa: [f64; 2],
    pub samples_used: usize,
}

impl PairReducedCoupling {
    pub fn series(&self, eq: Equation) -> &FittedSeries {
        match eq {
            Equation::Phase => &self.phase,
            Equation::Amplitude => &self.amplitude,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.phase.sup_norm().max(self.amplitude.sup_norm())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoupling {
    pub omega: Vec<f64>,
    pub lambda: Vec<f64>,
    pub pairs: Vec<PairReducedCoupling>,
}

impl ReducedCoupling {
    pub fn pair(&self, i: usize, j: usize) -> Result<&PairReducedCoupling> {
        self.pairs
            .iter()
            .find(|p| p.target == i && p.source == j)
            .ok_or(Error::UnknownPair(i, j))
    }

    /// Reduced network derivative `(φ̇_i, σ̇_i)`.
    pub fn eval(&self, states: &[Planar]) -> Result<Vec<Planar>> {
        if states.len() != self.omega.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} states for {} oscillators",
                states.len(),
                self.omega.len()
            )));
        }
        let mut out: Vec<Planar> = states
            .iter()
            .enumerate()
            .map(|(i, s)| [self.omega[i], self.lambda[i] * s[1]])
            .collect();
        for p in &self.pairs {
            let (si, sj) = (states[p.target], states[p.source]);
            let x = [si[0], si[1], sj[0], sj[1]];
            let spec = p.phase.pair_spec().expect("pair basis");
            out[p.target][0] += spec.eval(&p.phase.coefficients, x);
            out[p.target][1] += spec.eval(&p.amplitude.coefficients, x);
        }
        Ok(out)
    }
}

/// Ridge/GCV fit of both reduced equations over the in-domain samples.
/// Without equilibration the penalty acts on the raw coefficients, which
/// keeps the poorly determined high-σ-order terms small.
pub fn fit_reduced_coupling(
    samples: &[CouplingSample],
    spec: &PairBasisSpec,
    policy: &KappaPolicy,
    equilibrate: bool,
    target: usize,
    source: usize,
) -> Result<PairReducedCoupling> {
    spec.validate()?;
    if spec.mode != PairMode::Reduced {
        return Err(Error::invalid_config(
            "coupling.basis",
            "reduced coupling needs a reduced pair basis",
        ));
    }
    let used: Vec<&CouplingSample> = samples.iter().filter(|s| s.in_domain).collect();
    let m = spec.size();
    if used.len() < 10 * m {
        return Err(Error::InsufficientSamples(format!(
            "{} in-domain samples for a basis of size {m}",
            used.len()
        )));
    }
    let mut design = DMatrix::zeros(used.len(), m);
    let mut row = vec![0.0; m];
    for (k, s) in used.iter().enumerate() {
        spec.fill_row(s.phi_i, s.sigma_i, s.phi_j, s.sigma_j, &mut row);
        for (c, v) in row.iter().enumerate() {
            design[(k, c)] = *v;
        }
    }
    let gp: Vec<f64> = used.iter().map(|s| s.g_phi).collect();
    let gs: Vec<f64> = used.iter().map(|s| s.g_sigma).collect();
    let mut fits = if equilibrate {
        ridge_fit_multi_equilibrated(&design, &[&gp, &gs], policy)?
    } else {
        ridge_fit_multi(&design, &[&gp, &gs], policy)?
    };
    let b = fits.pop().unwrap();
    let a = fits.pop().unwrap();
    Ok(PairReducedCoupling {
        target,
        source,
        kappa: [a.kappa, b.kappa],
        phase: FittedSeries::new(BasisSpec::Pair(*spec), a.coefficients)?,
        amplitude: FittedSeries::new(BasisSpec::Pair(*spec), b.coefficients)?,
        samples_used: used.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub power_i: usize,
    pub power_j: usize,
    /// Own-oscillator factors, one per row.
    pub rows: Vec<String>,
    /// Input-oscillator factors, one per column.
    pub columns: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub target: usize,
    pub source: usize,
    pub equation: Equation,
    pub panels: Vec<Panel>,
}

impl Heatmap {
    /// Coefficients back in enumeration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.panels
            .iter()
            .flat_map(|p| p.cells.iter().flatten().copied())
            .collect()
    }
}

pub fn heatmap_layout(
    rc: &ReducedCoupling,
    pair: (usize, usize),
    equation: Equation,
) -> Result<Heatmap> {
    let p = rc.pair(pair.0, pair.1)?;
    let series = p.series(equation);
    let spec = series
        .pair_spec()
        .ok_or_else(|| Error::invalid_config("coupling.basis", "not a pair basis"))?;
    let (no, ni) = (spec.n_own(), spec.n_input());
    let vi = format!("phi{}", pair.0 + 1);
    let vj = format!("phi{}", pair.1 + 1);
    let rows: Vec<String> = (0..no).map(|o| spec.own_label(o, &vi)).collect();
    let columns: Vec<String> = (0..ni).map(|c| spec.input_label(c, &vj)).collect();
    let panels = spec
        .amplitude_terms()
        .into_iter()
        .enumerate()
        .map(|(a, (pi, pj))| Panel {
            power_i: pi,
            power_j: pj,
            rows: rows.clone(),
            columns: columns.clone(),
            cells: (0..no)
                .map(|o| {
                    (0..ni)
                        .map(|c| series.coefficients[spec.index(a, o, c)])
                        .collect()
                })
                .collect(),
        })
        .collect();
    Ok(Heatmap {
        target: pair.0,
        source: pair.1,
        equation,
        panels,
    })
}

/// Share of the squared Frobenius norm in the top singular component of the
/// coefficients arranged as own-basis rows `(n_i, own factor)` × input-basis
/// columns `(n_j, input factor)`.
pub fn rank_one_energy(series: &FittedSeries) -> Result<f64> {
    let spec = series
        .pair_spec()
        .ok_or_else(|| Error::invalid_config("coupling.basis", "not a pair basis"))?;
    let (no, ni, p) = (spec.n_own(), spec.n_input(), spec.max_power + 1);
    let mut m = DMatrix::zeros(p * no, p * ni);
    for (a, (pi, pj)) in spec.amplitude_terms().into_iter().enumerate() {
        for o in 0..no {
            for c in 0..ni {
                m[(pi * no + o, pj * ni + c)] = series.coefficients[spec.index(a, o, c)];
            }
        }
    }
    let total = m.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let top = m.singular_values().iter().fold(0.0f64, |a, b| a.max(*b));
    Ok(top * top / total)
}

/// Printed first-harmonic terms placed into a reduced basis coefficient vector.
pub fn series_coefficients(terms: &[SeriesTerm], spec: &PairBasisSpec) -> Result<Vec<f64>> {
    let amps = spec.amplitude_terms();
    let mut out = vec![0.0; spec.size()];
    for t in terms {
        let a = amps
            .iter()
            .position(|&x| x == (t.power_i, t.power_j))
            .ok_or_else(|| Error::invalid_config("coupling.basis", "series order exceeds basis"))?;
        if spec.own_harmonics < 1 {
            return Err(Error::invalid_config(
                "coupling.basis",
                "series needs one own harmonic",
            ));
        }
        let own = if t.own_sin { 2 } else { 1 };
        let input = if t.input_sin { 1 } else { 0 };
        out[spec.index(a, own, input)] += t.coefficient;
    }
    Ok(out)
}
