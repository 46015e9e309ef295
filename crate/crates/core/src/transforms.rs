//! Forward and inverse phase-amplitude transformations fitted from matched
//! observable and reduced coordinates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{Averager, AveragingOptions, ReducedSample};
use crate::basis::{BasisSpec, FittedSeries, SingleBasisSpec};
use crate::error::{Error, Result};
use crate::limit_cycle::{K1Curve, LimitCycle};
use crate::models::{wrap_pi, AnalyticGroundTruth, ModelKind};
use crate::ode::PlanarField;
use crate::ridge::{ridge_fit_multi_equilibrated, KappaPolicy, RidgeFit};

/// Initial conditions `r = s·γ(θ)` on an angle × scale grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcGrid {
    pub n_angles: usize,
    pub n_radii: usize,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl Default for IcGrid {
    fn default() -> Self {
        IcGrid {
            n_angles: 21,
            n_radii: 15,
            scale_lo: 0.75,
            scale_hi: 1.35,
        }
    }
}

impl IcGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_angles < 2 || self.n_radii < 2 {
            return Err(Error::invalid_config(
                "transforms.grid",
                "need at least 2 angles and 2 radii",
            ));
        }
        if !(self.scale_lo > 0.0 && self.scale_hi > self.scale_lo) {
            return Err(Error::invalid_config(
                "transforms.grid",
                "need 0 < scale_lo < scale_hi",
            ));
        }
        Ok(())
    }

    pub fn points(&self, cycle: &LimitCycle) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_angles * self.n_radii);
        for a in 0..self.n_angles {
            let th = 2.0 * PI * a as f64 / self.n_angles as f64;
            let g = cycle.gamma_at(th);
            for b in 0..self.n_radii {
                let s = self.scale_lo
                    + (self.scale_hi - self.scale_lo) * b as f64 / (self.n_radii - 1) as f64;
                out.push((th, s * g));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformOptions {
    pub grid: IcGrid,
    pub inverse: SingleBasisSpec,
    pub forward: SingleBasisSpec,
    pub kappa: KappaPolicy,
    pub averaging: AveragingOptions,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            grid: IcGrid::default(),
            inverse: SingleBasisSpec::new(4, 5),
            forward: SingleBasisSpec::new(4, 5),
            kappa: KappaPolicy::default(),
            averaging: AveragingOptions::default(),
        }
    }
}

impl TransformOptions {
    /// Defaults sized for each model family; strongly non-circular cycles
    /// need more harmonics and therefore a denser angle grid.
    pub fn for_kind(kind: ModelKind) -> Self {
        let dense = IcGrid {
            n_angles: 48,
            n_radii: 21,
            ..IcGrid::default()
        };
        match kind {
            ModelKind::RadialIsochronClock | ModelKind::Canonical => TransformOptions::default(),
            ModelKind::VanDerPol => TransformOptions {
                grid: dense,
                inverse: SingleBasisSpec::new(6, 16),
                forward: SingleBasisSpec::new(10, 12),
                ..TransformOptions::default()
            },
            ModelKind::WilsonCowan => TransformOptions {
                grid: dense,
                inverse: SingleBasisSpec::new(6, 16),
                forward: SingleBasisSpec::new(8, 12),
                ..TransformOptions::default()
            },
        }
    }
}

/// Reduced coordinates of every grid point, in grid order.
pub fn sample_reduced(
    vf: &(impl PlanarField + ?Sized),
    cycle: &LimitCycle,
    lambda: f64,
    grid: &IcGrid,
    opts: &AveragingOptions,
) -> Result<Vec<ReducedSample>> {
    grid.validate()?;
    let av = Averager::new(vf, cycle, lambda, opts.clone())?;
    grid.points(cycle)
        .into_par_iter()
        .map(|(th, r)| av.reduce(th, r))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformDomain {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Bounds of `r/γ(θ)` over the samples.
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSet {
    /// Φ(θ,r) − θ.
    pub inverse_phase: FittedSeries,
    pub inverse_amplitude: FittedSeries,
    /// K^θ(φ,σ) − φ.
    pub forward_angle: FittedSeries,
    pub forward_radius: FittedSeries,
    pub domain: TransformDomain,
    pub kappas: [f64; 4],
}

/// Gradients of an inverse map `(θ, r) → (φ, σ)`.
pub trait InverseTransform: Sync {
    /// `(Φ, ∂Φ/∂θ, ∂Φ/∂r)`.
    fn phi_grad(&self, theta: f64, r: f64) -> (f64, f64, f64);
    fn sigma_grad(&self, theta: f64, r: f64) -> (f64, f64, f64);
}

impl InverseTransform for TransformSet {
    fn phi_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        TransformSet::phi_grad(self, theta, r)
    }

    fn sigma_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        TransformSet::sigma_grad(self, theta, r)
    }
}

impl InverseTransform for AnalyticGroundTruth {
    fn phi_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        self.phi_grad_scaled(theta, r)
    }

    fn sigma_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        self.sigma_grad_scaled(theta, r)
    }
}

fn single(series: &FittedSeries) -> &SingleBasisSpec {
    series
        .single_spec()
        .expect("transform series use a single-oscillator basis")
}

impl TransformSet {
    pub fn phi(&self, theta: f64, r: f64) -> f64 {
        theta + single(&self.inverse_phase).eval(&self.inverse_phase.coefficients, theta, r)
    }

    pub fn phi_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        let (v, a, b) =
            single(&self.inverse_phase).eval_grad(&self.inverse_phase.coefficients, theta, r);
        (theta + v, 1.0 + a, b)
    }

    pub fn sigma(&self, theta: f64, r: f64) -> f64 {
        single(&self.inverse_amplitude).eval(&self.inverse_amplitude.coefficients, theta, r)
    }

    pub fn sigma_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        single(&self.inverse_amplitude).eval_grad(&self.inverse_amplitude.coefficients, theta, r)
    }

    /// `(θ, r)` from `(φ, σ)`.
    pub fn forward(&self, phi: f64, sigma: f64) -> (f64, f64) {
        let d = single(&self.forward_angle).eval(&self.forward_angle.coefficients, phi, sigma);
        let r = single(&self.forward_radius).eval(&self.forward_radius.coefficients, phi, sigma);
        (phi + d, r)
    }

    /// `∂(K^θ, K^r)/∂σ`.
    pub fn forward_sigma_derivative(&self, phi: f64, sigma: f64) -> (f64, f64) {
        let (_, _, a) =
            single(&self.forward_angle).eval_grad(&self.forward_angle.coefficients, phi, sigma);
        let (_, _, b) =
            single(&self.forward_radius).eval_grad(&self.forward_radius.coefficients, phi, sigma);
        (a, b)
    }

    pub fn contains_sigma(&self, sigma: f64, margin: f64) -> bool {
        let w = (self.domain.sigma_hi - self.domain.sigma_lo) * margin;
        sigma >= self.domain.sigma_lo - w && sigma <= self.domain.sigma_hi + w
    }
}

fn check_samples(
    samples: &[ReducedSample],
    spec: &SingleBasisSpec,
    angle: impl Fn(&ReducedSample) -> f64,
) -> Result<()> {
    spec.validate()?;
    if samples.len() < 3 * spec.size() {
        return Err(Error::InsufficientSamples(format!(
            "{} samples for a basis of size {}",
            samples.len(),
            spec.size()
        )));
    }
    let mut a: Vec<f64> = samples
        .iter()
        .map(|s| angle(s).rem_euclid(2.0 * PI))
        .collect();
    a.sort_by(f64::total_cmp);
    let mut gap = a[0] + 2.0 * PI - a[a.len() - 1];
    for w in a.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    if 2.0 * PI - gap < 0.9 * 2.0 * PI {
        return Err(Error::InsufficientSamples(format!(
            "angles span only {:.3} rad",
            2.0 * PI - gap
        )));
    }
    Ok(())
}

fn design(
    spec: &SingleBasisSpec,
    points: impl Iterator<Item = (f64, f64)>,
    n: usize,
) -> DMatrix<f64> {
    let m = spec.size();
    let mut d = DMatrix::zeros(n, m);
    let mut row = vec![0.0; m];
    for (k, (a, r)) in points.enumerate() {
        spec.fill_row(a, r, &mut row);
        for (c, v) in row.iter().enumerate() {
            d[(k, c)] = *v;
        }
    }
    d
}

fn pair_fit(
    spec: &SingleBasisSpec,
    design: &DMatrix<f64>,
    y1: &[f64],
    y2: &[f64],
    policy: &KappaPolicy,
) -> Result<(FittedSeries, FittedSeries, [f64; 2])> {
    let mut fits: Vec<RidgeFit> = ridge_fit_multi_equilibrated(design, &[y1, y2], policy)?;
    let b = fits.pop().unwrap();
    let a = fits.pop().unwrap();
    let kappas = [a.kappa, b.kappa];
    Ok((
        FittedSeries::new(BasisSpec::Single(*spec), a.coefficients)?,
        FittedSeries::new(BasisSpec::Single(*spec), b.coefficients)?,
        kappas,
    ))
}

/// `(Φ − θ, Σ)` over the observable coordinates.
pub fn fit_inverse_transform(
    samples: &[ReducedSample],
    spec: &SingleBasisSpec,
    policy: &KappaPolicy,
) -> Result<(FittedSeries, FittedSeries, [f64; 2])> {
    check_samples(samples, spec, |s| s.theta0)?;
    let d = design(
        spec,
        samples.iter().map(|s| (s.theta0, s.r0)),
        samples.len(),
    );
    let dphi: Vec<f64> = samples.iter().map(|s| wrap_pi(s.phi0 - s.theta0)).collect();
    let sig: Vec<f64> = samples.iter().map(|s| s.sigma0).collect();
    pair_fit(spec, &d, &dphi, &sig, policy)
}

/// `(K^θ − φ, K^r)` over the reduced coordinates.
pub fn fit_forward_transform(
    samples: &[ReducedSample],
    spec: &SingleBasisSpec,
    policy: &KappaPolicy,
) -> Result<(FittedSeries, FittedSeries, [f64; 2])> {
    check_samples(samples, spec, |s| s.phi0)?;
    let d = design(
        spec,
        samples.iter().map(|s| (s.phi0, s.sigma0)),
        samples.len(),
    );
    let dth: Vec<f64> = samples.iter().map(|s| wrap_pi(s.theta0 - s.phi0)).collect();
    let r: Vec<f64> = samples.iter().map(|s| s.r0).collect();
    pair_fit(spec, &d, &dth, &r, policy)
}

pub fn fit_transforms(
    samples: &[ReducedSample],
    cycle: &LimitCycle,
    inverse: &SingleBasisSpec,
    forward: &SingleBasisSpec,
    policy: &KappaPolicy,
) -> Result<TransformSet> {
    let (inverse_phase, inverse_amplitude, ki) = fit_inverse_transform(samples, inverse, policy)?;
    let (forward_angle, forward_radius, kf) = fit_forward_transform(samples, forward, policy)?;
    let fold = |init: (f64, f64), v: f64| (init.0.min(v), init.1.max(v));
    let inf = (f64::INFINITY, f64::NEG_INFINITY);
    let (r_lo, r_hi) = samples.iter().map(|s| s.r0).fold(inf, fold);
    let (scale_lo, scale_hi) = samples
        .iter()
        .map(|s| s.r0 / cycle.gamma_at(s.theta0))
        .fold(inf, fold);
    let (sigma_lo, sigma_hi) = samples.iter().map(|s| s.sigma0).fold(inf, fold);
    Ok(TransformSet {
        inverse_phase,
        inverse_amplitude,
        forward_angle,
        forward_radius,
        domain: TransformDomain {
            r_lo,
            r_hi,
            scale_lo,
            scale_hi,
            sigma_lo,
            sigma_hi,
        },
        kappas: [ki[0], ki[1], kf[0], kf[1]],
    })
}

/// `n × n` grid inside the fitted scale range shrunk by 10%.
pub fn interior_grid(ts: &TransformSet, cycle: &LimitCycle, n: usize) -> Vec<(f64, f64)> {
    let w = ts.domain.scale_hi - ts.domain.scale_lo;
    let lo = ts.domain.scale_lo + 0.05 * w;
    let hi = ts.domain.scale_hi - 0.05 * w;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        let th = 2.0 * PI * a as f64 / n as f64;
        let g = cycle.gamma_at(th);
        for b in 0..n {
            let s = lo + (hi - lo) * b as f64 / (n.max(2) - 1) as f64;
            out.push((th, s * g));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeResiduals {
    /// RMS of `F·∇Φ − ω` divided by ω.
    pub phase: f64,
    /// RMS of `F·∇Σ − λΣ` divided by `|λ|·max|Σ|`.
    pub amplitude: f64,
}

pub fn pde_residuals(
    inv: &impl InverseTransform,
    vf: &(impl PlanarField + ?Sized),
    grid: &[(f64, f64)],
    omega: f64,
    lambda: f64,
) -> PdeResiduals {
    let mut sp = 0.0;
    let mut ss = 0.0;
    let mut smax = 0.0f64;
    for &(th, r) in grid {
        let f = vf.eval([th, r]);
        let (_, pa, pb) = inv.phi_grad(th, r);
        let (s, sa, sb) = inv.sigma_grad(th, r);
        sp += (f[0] * pa + f[1] * pb - omega).powi(2);
        ss += (f[0] * sa + f[1] * sb - lambda * s).powi(2);
        smax = smax.max(s.abs());
    }
    let n = grid.len() as f64;
    PdeResiduals {
        phase: (sp / n).sqrt() / omega.abs(),
        amplitude: (ss / n).sqrt() / (lambda.abs() * smax),
    }
}

/// Max of `|K^θ(Φ,Σ) − θ|` (wrapped) and `|K^r(Φ,Σ) − r|` over the grid.
pub fn composition_error(ts: &TransformSet, grid: &[(f64, f64)]) -> f64 {
    grid.iter()
        .map(|&(th, r)| {
            let (t2, r2) = ts.forward(ts.phi(th, r), ts.sigma(th, r));
            wrap_pi(t2 - th).abs().max((r2 - r).abs())
        })
        .fold(0.0, f64::max)
}

/// Cosine similarity between the fitted order-1 forward response and the
/// linear-response curve.
pub fn k1_alignment(ts: &TransformSet, k1: &K1Curve) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (phi, v) in k1.phi.iter().zip(&k1.values) {
        let (a, b) = ts.forward_sigma_derivative(*phi, 0.0);
        dot += a * v[0] + b * v[1];
        na += a * a + b * b;
        nb += v[0] * v[0] + v[1] * v[1];
    }
    dot / (na * nb).sqrt()
}

/// Max of `|Σ(θ, γ(θ))|` over 64 angles.
pub fn sigma_on_cycle(ts: &TransformSet, cycle: &LimitCycle) -> f64 {
    (0..64)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / 64.0;
            ts.sigma(th, cycle.gamma_at(th)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_cycle::{analyze_cycle, k1_oracle, CycleAnalysis, CycleOptions};
    use crate::models::{Model, ModelKind, ModelSpec};

    fn build(
        kind: ModelKind,
        i: usize,
    ) -> (Model, CycleAnalysis, Vec<ReducedSample>, TransformSet) {
        let m = Model::new(ModelSpec::preset(kind).uncoupled()).unwrap();
        let seed = match kind {
            ModelKind::VanDerPol => [0.0, 2.0],
            ModelKind::WilsonCowan => [0.0, 0.25],
            _ => [0.0, 1.1],
        };
        let f = m.uncoupled_field(i);
        let a = analyze_cycle(&f, seed, &CycleOptions::default()).unwrap();
        let o = TransformOptions::for_kind(kind);
        let s = sample_reduced(&f, &a.cycle, a.floquet.lambda, &o.grid, &o.averaging).unwrap();
        let ts = fit_transforms(&s, &a.cycle, &o.inverse, &o.forward, &o.kappa).unwrap();
        (m, a, s, ts)
    }

    #[test]
    fn ric_inverse_against_closed_form() {
        let (_, _, _, ts) = build(ModelKind::RadialIsochronClock, 0);
        let mut es = 0f64;
        let mut ep = 0f64;
        for a in 0..21 {
            let th = 2.0 * PI * a as f64 / 21.0;
            for b in 0..21 {
                let r = 0.8 + 0.5 * b as f64 / 20.0;
                es = es.max((ts.sigma(th, r) - (r * r - 1.0) / (2.0 * r * r)).abs());
                ep = ep.max(wrap_pi(ts.phi(th, r) - th).abs());
            }
        }
        assert!(es < 5e-3, "{es}");
        assert!(ep < 5e-3, "{ep}");
    }

    #[test]
    fn canonical_phase_remainder() {
        let (_, _, _, ts) = build(ModelKind::Canonical, 1);
        let mut e = 0f64;
        for a in 0..21 {
            let th = 2.0 * PI * a as f64 / 21.0;
            for b in 0..21 {
                let r = 0.8 + 0.45 * b as f64 / 20.0;
                e = e.max(wrap_pi(ts.phi(th, r) - th - r.ln()).abs());
            }
        }
        assert!(e < 1e-2, "{e}");
    }

    #[test]
    fn ric_forward_radius() {
        let (_, _, _, ts) = build(ModelKind::RadialIsochronClock, 0);
        for k in 0..16 {
            let phi = 2.0 * PI * k as f64 / 16.0;
            for s in [-0.2, -0.1, 0.0, 0.1, 0.2] {
                let (_, r) = ts.forward(phi, s);
                assert!(
                    (r - (1.0 - 2.0 * s).powf(-0.5)).abs() < 1e-2,
                    "{phi} {s} {r}"
                );
            }
        }
    }

    #[test]
    fn canonical_forward_angle() {
        let (_, _, _, ts) = build(ModelKind::Canonical, 1);
        let (alpha, a) = (2.0, 1.0);
        for k in 0..16 {
            let phi = 2.0 * PI * k as f64 / 16.0;
            for s in [-0.1, 0.0, 0.1] {
                let (th, _) = ts.forward(phi, s);
                // σ here is scaled by α
                let exact = 0.5 * a * (1.0 - 2.0 * alpha * s / alpha).ln();
                assert!(wrap_pi(th - phi - exact).abs() < 2e-2, "{phi} {s}");
            }
        }
    }

    #[test]
    fn all_models_invariants() {
        for kind in ModelKind::all() {
            for i in 0..2 {
                let (m, a, _, ts) = build(kind, i);
                let grid = interior_grid(&ts, &a.cycle, 15);
                let f = m.uncoupled_field(i);
                let res = pde_residuals(&ts, &f, &grid, a.cycle.omega, a.floquet.lambda);
                assert!(
                    res.phase < 1e-2 && res.amplitude < 1e-2,
                    "{kind:?} {i} {res:?}"
                );
                let c = composition_error(&ts, &grid);
                assert!(c < 1e-2, "{kind:?} {i} composition {c}");
                let smax = grid
                    .iter()
                    .map(|&(t, r)| ts.sigma(t, r).abs())
                    .fold(0.0, f64::max);
                assert!(sigma_on_cycle(&ts, &a.cycle) < 1e-2 * smax);
                assert!(wrap_pi(ts.phi(0.0, a.cycle.gamma_at(0.0))).abs() < 1e-2);
                let k1 = k1_oracle(&f, &a.cycle, &a.floquet).unwrap();
                let cs = k1_alignment(&ts, &k1);
                assert!(cs > 0.99, "{kind:?} {i} k1 {cs}");
            }
        }
    }

    #[test]
    fn too_few_samples() {
        let s: Vec<ReducedSample> = (0..10)
            .map(|k| ReducedSample {
                theta0: k as f64,
                r0: 1.0,
                phi0: k as f64,
                sigma0: 0.0,
                lambda_used: -1.0,
            })
            .collect();
        let r = fit_inverse_transform(&s, &SingleBasisSpec::new(4, 5), &KappaPolicy::default());
        assert!(matches!(r, Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn narrow_angle_span() {
        let s: Vec<ReducedSample> = (0..400)
            .map(|k| {
                let th = (k % 20) as f64 * 0.1;
                ReducedSample {
                    theta0: th,
                    r0: 1.0 + (k / 20) as f64 * 0.01,
                    phi0: th,
                    sigma0: 0.0,
                    lambda_used: -1.0,
                }
            })
            .collect();
        let r = fit_inverse_transform(&s, &SingleBasisSpec::new(4, 5), &KappaPolicy::default());
        assert!(matches!(r, Err(Error::InsufficientSamples(_))));
    }
}
