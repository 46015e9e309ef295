//! Limit-cycle location by Poincaré returns, the radial Fourier profile
//! γ(θ), and Floquet analysis of the monodromy matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelKind};
use crate::ode::{
    integrate, integrate_with_tangent, planar_step, Coords, Mat2, Planar, PlanarField,
};
use crate::ridge::{ridge_fit, KappaPolicy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Minimum harmonic count of γ; doubled up to
    /// `max_gamma` until the profile reproduces the orbit.
    pub n_gamma: usize,
    pub max_gamma: usize,
    pub gamma_tolerance: f64,
    pub steps_per_period: usize,
    pub tolerance: f64,
    pub max_periods: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            n_gamma: 8,
            max_gamma: 128,
            gamma_tolerance: 1e-12,
            steps_per_period: 2000,
            tolerance: 1e-10,
            max_periods: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub period: f64,
    pub omega: f64,
    /// `[g_0, a_1, b_1, …]` with γ(θ) = g_0 + Σ a_k cos kθ + b_k sin kθ.
    pub gamma: Vec<f64>,
    pub n_gamma: usize,
    /// Radius where the cycle crosses θ = 0.
    pub section_radius: f64,
    pub step: f64,
    pub fit_rms: f64,
    pub fit_max: f64,
    pub returns: usize,
}

impl LimitCycle {
    pub fn gamma_at(&self, theta: f64) -> f64 {
        fourier_eval(&self.gamma, theta).0
    }

    pub fn gamma_grad(&self, theta: f64) -> (f64, f64) {
        fourier_eval(&self.gamma, theta)
    }

    pub fn steps_per_period(&self) -> usize {
        (self.period / self.step).round() as usize
    }

    /// Extremes of γ on a 720-point grid.
    pub fn gamma_range(&self) -> (f64, f64) {
        (0..720)
            .map(|k| self.gamma_at(2.0 * PI * k as f64 / 720.0))
            .fold((f64::INFINITY, 0.0), |(lo, hi), g| (lo.min(g), hi.max(g)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Floquet {
    pub lambda: f64,
    pub monodromy: Mat2,
    pub multipliers: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleAnalysis {
    pub cycle: LimitCycle,
    pub floquet: Floquet,
}

/// Value and derivative of `c_0 + Σ c_{2k−1} cos kθ + c_{2k} sin kθ`.
pub fn fourier_eval(coeffs: &[f64], theta: f64) -> (f64, f64) {
    let (s1, c1) = theta.sin_cos();
    let (mut ck, mut sk) = (1.0, 0.0);
    let mut v = coeffs[0];
    let mut d = 0.0;
    for k in 1..=(coeffs.len() - 1) / 2 {
        let c = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = c;
        let (a, b) = (coeffs[2 * k - 1], coeffs[2 * k]);
        let kf = k as f64;
        v += a * ck + b * sk;
        d += kf * (b * ck - a * sk);
    }
    (v, d)
}

fn fourier_row(theta: f64, n: usize) -> Vec<f64> {
    let mut row = vec![0.0; 2 * n + 1];
    row[0] = 1.0;
    let (s1, c1) = theta.sin_cos();
    let (mut ck, mut sk) = (1.0, 0.0);
    for k in 1..=n {
        let c = ck * c1 - sk * s1;
        sk = sk * c1 + ck * s1;
        ck = c;
        row[2 * k - 1] = ck;
        row[2 * k] = sk;
    }
    row
}

/// Integrates from `state` until θ reaches the next multiple of 2π,
/// locating the crossing by bisection on the RK4 sub-step. Returns the
/// elapsed time and the crossing state with θ reduced to 0.
pub fn section_return(
    vf: &(impl PlanarField + ?Sized),
    state: Planar,
    h: f64,
    max_steps: usize,
) -> Result<(f64, Planar)> {
    let goal = (state[0] / (2.0 * PI)).floor() * 2.0 * PI + 2.0 * PI;
    let mut x = state;
    for k in 0..max_steps {
        let y = planar_step(vf, x, h);
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFiniteState {
                time: (k + 1) as f64 * h,
            });
        }
        if y[0] >= goal {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if planar_step(vf, x, mid)[0] >= goal {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let z = planar_step(vf, x, hi);
            return Ok((k as f64 * h + hi, [z[0] - goal, z[1]]));
        }
        x = y;
    }
    Err(Error::NoConvergence("no section crossing".into()))
}

/// Returns to θ = 0 until successive crossing radii agree within the
/// tolerance. Returns (period, crossing radius, number of returns).
fn converge_returns(
    vf: &(impl PlanarField + ?Sized),
    start: Planar,
    h: f64,
    tol: f64,
    max_returns: usize,
    max_steps: usize,
) -> Result<(f64, f64, usize)> {
    let (_, mut s) = section_return(vf, start, h, max_steps)?;
    for n in 1..=max_returns {
        let (t, next) = section_return(vf, s, h, max_steps)?;
        let dr = (next[1] - s[1]).abs();
        s = next;
        if dr < tol {
            return Ok((t, s[1], n));
        }
    }
    Err(Error::NoConvergence(format!(
        "return map not converged after {max_returns} periods"
    )))
}

/// Locates the attracting cycle reachable from `seed` (observable polar
/// coordinates, θ increasing along the flow).
pub fn find_limit_cycle(
    vf: &(impl PlanarField + ?Sized),
    seed: Planar,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    let w = vf.eval(seed)[0];
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::NoConvergence(format!(
            "angular velocity {w} at the seed is not positive"
        )));
    }
    let coarse_h = 2.0 * PI / w / 500.0;
    let max_steps = 200_000;
    let (t0, r0, n0) = converge_returns(vf, seed, coarse_h, 1e-8, opts.max_periods, max_steps)?;
    let h = t0 / opts.steps_per_period as f64;
    let (_, r1, n1) = converge_returns(
        vf,
        [0.0, r0],
        h,
        opts.tolerance,
        opts.max_periods.saturating_sub(n0).max(2),
        max_steps,
    )?;
    let (period, end) = section_return(vf, [0.0, r1], h, max_steps)?;
    let section_radius = end[1];
    let step = period / opts.steps_per_period as f64;
    let tr = integrate(vf, [0.0, section_radius], period, step, Coords::Polar)?;
    let n = opts.steps_per_period;
    let radii: Vec<f64> = tr.states[..n].iter().map(|s| s[1]).collect();
    let scale = radii.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut n_gamma = opts.n_gamma;
    let (gamma, fit_rms, fit_max) = loop {
        let rows: Vec<Vec<f64>> = tr.states[..n]
            .iter()
            .map(|s| fourier_row(s[0], n_gamma))
            .collect();
        let design = DMatrix::from_fn(n, 2 * n_gamma + 1, |r, c| rows[r][c]);
        let fit = ridge_fit(&design, &radii, &KappaPolicy::Fixed(0.0))?;
        let fit_max = tr.states[..n]
            .iter()
            .map(|s| (fourier_eval(&fit.coefficients, s[0]).0 - s[1]).abs())
            .fold(0.0, f64::max);
        let rms = fit.residual_norm / (n as f64).sqrt();
        if fit_max <= opts.gamma_tolerance * scale || n_gamma >= opts.max_gamma.min(n / 4) {
            break (fit.coefficients, rms, fit_max);
        }
        n_gamma = (2 * n_gamma).min(opts.max_gamma.min(n / 4));
    };
    let cycle = LimitCycle {
        period,
        omega: 2.0 * PI / period,
        gamma,
        n_gamma,
        section_radius,
        step,
        fit_rms,
        fit_max,
        returns: n0 + n1 + 1,
    };
    if cycle.gamma_range().0 <= 0.0 {
        return Err(Error::NoConvergence(
            "fitted cycle profile is not positive".into(),
        ));
    }
    Ok(cycle)
}

fn eigen2(m: &Mat2) -> Result<[f64; 2]> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return Err(Error::ComplexMultiplier(format!("trace {tr}, det {det}")));
    }
    let big = tr / 2.0 + tr.signum() * disc.sqrt();
    let small = if big != 0.0 {
        det / big
    } else {
        tr / 2.0 - disc.sqrt()
    };
    Ok([big, small])
}

/// Monodromy over one period from the section point and the nontrivial
/// Floquet exponent.
pub fn floquet_from_monodromy(
    vf: &(impl PlanarField + ?Sized),
    cycle: &LimitCycle,
) -> Result<Floquet> {
    let tt = integrate_with_tangent(
        vf,
        [0.0, cycle.section_radius],
        cycle.period,
        cycle.step,
        Coords::Polar,
    )?;
    let m = *tt.tangent.last().expect("non-empty");
    let mu = eigen2(&m)?;
    let (trivial, other) = if (mu[0] - 1.0).abs() <= (mu[1] - 1.0).abs() {
        (mu[0], mu[1])
    } else {
        (mu[1], mu[0])
    };
    if !(other > 0.0) {
        return Err(Error::ComplexMultiplier(format!(
            "nontrivial multiplier {other}"
        )));
    }
    let nontrivial = if (trivial - 1.0).abs() > 1e-3 && trivial > 0.0 {
        trivial.min(other)
    } else {
        other
    };
    Ok(Floquet {
        lambda: nontrivial.ln() / cycle.period,
        monodromy: m,
        multipliers: [trivial, other],
    })
}

pub fn analyze_cycle(
    vf: &(impl PlanarField + ?Sized),
    seed: Planar,
    opts: &CycleOptions,
) -> Result<CycleAnalysis> {
    let cycle = find_limit_cycle(vf, seed, opts)?;
    let floquet = floquet_from_monodromy(vf, &cycle)?;
    Ok(CycleAnalysis { cycle, floquet })
}

/// Observable-frame seed inside the basin of each model family's cycle.
pub fn default_seed(kind: ModelKind) -> Planar {
    match kind {
        ModelKind::VanDerPol => [0.0, 2.0],
        ModelKind::WilsonCowan => [0.0, 0.25],
        ModelKind::RadialIsochronClock | ModelKind::Canonical => [0.0, 1.1],
    }
}

/// Cycle and Floquet analysis of every oscillator with its couplings removed.
pub fn analyze_model(model: &Model, opts: &CycleOptions) -> Result<Vec<CycleAnalysis>> {
    let seed = default_seed(model.spec.kind);
    (0..model.len())
        .map(|i| analyze_cycle(&model.uncoupled_field(i), seed, opts))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K1Curve {
    pub phi: Vec<f64>,
    /// `(K₁^θ, K₁^r)` at each φ.
    pub values: Vec<[f64; 2]>,
    /// K₁ after one full period.
    pub end_value: [f64; 2],
}

/// Linear-order forward response K₁(φ) = e^(−λt) M(t) K₁(0) on 256 phases.
pub fn k1_oracle(
    vf: &(impl PlanarField + ?Sized),
    cycle: &LimitCycle,
    floquet: &Floquet,
) -> Result<K1Curve> {
    let m = floquet.monodromy;
    let mu = floquet.lambda * cycle.period;
    let mu = mu.exp();
    let a = [m[0][1], mu - m[0][0]];
    let b = [mu - m[1][1], m[1][0]];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) {
        a
    } else {
        b
    };
    if v[1].abs() < 1e-14 {
        return Err(Error::ComplexMultiplier(
            "eigenvector has no radial component".into(),
        ));
    }
    let v = [v[0] / v[1], 1.0];
    let n = 2048;
    let tt = integrate_with_tangent(
        vf,
        [0.0, cycle.section_radius],
        cycle.period,
        cycle.period / n as f64,
        Coords::Polar,
    )?;
    let apply = |k: usize| {
        let mt = tt.tangent[k];
        let decay = (-floquet.lambda * tt.base.times[k]).exp();
        [
            decay * (mt[0][0] * v[0] + mt[0][1] * v[1]),
            decay * (mt[1][0] * v[0] + mt[1][1] * v[1]),
        ]
    };
    let phi = (0..256).map(|k| 2.0 * PI * k as f64 / 256.0).collect();
    let values = (0..256).map(|k| apply(8 * k)).collect();
    Ok(K1Curve {
        phi,
        values,
        end_value: apply(n),
    })
}
