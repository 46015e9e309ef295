//! Reduced coordinates of initial conditions by finite-window Fourier and
//! Laplace averages along simulated trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::LimitCycle;
use crate::ode::{planar_step, Planar, PlanarField, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingOptions {
    pub floor_abs: f64,
    pub floor_rel: f64,
    /// Multiple of the γ fit error added to the floor.
    pub floor_fit_factor: f64,
    pub min_periods: usize,
    pub max_periods: usize,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            floor_abs: 1e-12,
            floor_rel: 1e-12,
            floor_fit_factor: 100.0,
            min_periods: 4,
            max_periods: 400,
        }
    }
}

impl AveragingOptions {
    pub fn floor(&self, rho0: f64, cycle: &LimitCycle) -> f64 {
        self.floor_abs
            .max(self.floor_rel * rho0.abs())
            .max(self.floor_fit_factor * cycle.fit_max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableDeviation {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    /// Last sample with |ρ| above the floor.
    pub cutoff_index: usize,
    /// Half-open sample range `[t₁, t₂)`.
    pub window: (usize, usize),
    pub floor: f64,
    pub period_steps: usize,
    pub period: f64,
}

/// Locates the cutoff and the averaging window on a sampled ρ(t). The window
/// covers two periods, or one when only one fits before the cutoff.
pub fn deviation_from_rho(
    times: Vec<f64>,
    rho: Vec<f64>,
    period_steps: usize,
    period: f64,
    floor: f64,
) -> Result<ObservableDeviation> {
    let cutoff = rho.iter().rposition(|r| r.abs() >= floor && r.abs() > 0.0);
    let cutoff = match cutoff {
        Some(c) => c,
        None => {
            return Err(Error::TooShort(
                "no sample above the precision floor".into(),
            ))
        }
    };
    let window = window_for(cutoff, period_steps)?;
    Ok(ObservableDeviation {
        times,
        rho,
        cutoff_index: cutoff,
        window,
        floor,
        period_steps,
        period,
    })
}

fn window_for(cutoff: usize, n: usize) -> Result<(usize, usize)> {
    if cutoff >= 2 * n {
        Ok((cutoff - 2 * n, cutoff))
    } else if cutoff >= n {
        Ok((cutoff - n, cutoff))
    } else {
        Err(Error::TooShort(format!(
            "cutoff at sample {cutoff} precedes one period"
        )))
    }
}

pub fn observable_deviation(
    traj: &Trajectory,
    cycle: &LimitCycle,
    opts: &AveragingOptions,
) -> Result<ObservableDeviation> {
    let n = cycle.steps_per_period();
    if traj.len() < 4 * n {
        return Err(Error::TooShort(format!(
            "{} samples, need {}",
            traj.len(),
            4 * n
        )));
    }
    let rho: Vec<f64> = traj
        .states
        .iter()
        .map(|s| s[1] - cycle.gamma_at(s[0]))
        .collect();
    let floor = opts.floor(rho[0], cycle);
    deviation_from_rho(traj.times.clone(), rho, n, cycle.period, floor)
}

/// λ₀ plus the slope between the means of `log|ρ| − λ₀t` over the first and
/// last period of the window.
pub fn refine_lambda(dev: &ObservableDeviation, lambda0: f64) -> f64 {
    let n = dev.period_steps;
    let (t2, a) = (dev.window.1, dev.window.1.saturating_sub(2 * n));
    let b = t2 - n;
    if b <= a {
        return lambda0;
    }
    let mean = |s: usize| {
        (s..s + n)
            .map(|k| dev.rho[k].abs().ln() - lambda0 * dev.times[k])
            .sum::<f64>()
            / n as f64
    };
    lambda0 + (mean(b) - mean(a)) / (dev.times[b] - dev.times[a])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSample {
    pub theta0: f64,
    pub r0: f64,
    pub phi0: f64,
    /// In the units of `q^(r)_{1,0}·σ`.
    pub sigma0: f64,
    pub lambda_used: f64,
}

/// Averages against a fixed cycle and exponent; holds the phase anchor of
/// the reference trajectory from `(0, γ(0))`.
pub struct Averager<'a, F: PlanarField + ?Sized> {
    vf: &'a F,
    cycle: &'a LimitCycle,
    lambda: f64,
    opts: AveragingOptions,
    reference: f64,
    r_max: f64,
}

struct Run {
    theta: Vec<f64>,
    r: Vec<f64>,
    rho: Vec<f64>,
    floor: f64,
    cutoff: Option<usize>,
}

impl<'a, F: PlanarField + ?Sized> Averager<'a, F> {
    pub fn new(
        vf: &'a F,
        cycle: &'a LimitCycle,
        lambda: f64,
        opts: AveragingOptions,
    ) -> Result<Self> {
        let r_max = 10.0 * cycle.gamma_range().1;
        let mut av = Averager {
            vf,
            cycle,
            lambda,
            opts,
            reference: 0.0,
            r_max,
        };
        let n = cycle.steps_per_period();
        let run = av.simulate(0.0, cycle.gamma_at(0.0), 2 * n)?;
        av.reference = av.fourier_angle(&run, 0, 2 * n);
        Ok(av)
    }

    pub fn reference_angle(&self) -> f64 {
        self.reference
    }

    fn simulate(&self, theta0: f64, r0: f64, fixed: usize) -> Result<Run> {
        const PROBE: usize = 16;
        let n = self.cycle.steps_per_period();
        let h = self.cycle.step;
        let rho0 = r0 - self.cycle.gamma_at(theta0);
        let floor = self.opts.floor(rho0, self.cycle);
        let cap = self.opts.max_periods * n;
        let min = (self.opts.min_periods * n).max(fixed);
        let mut run = Run {
            theta: vec![theta0],
            r: vec![r0],
            rho: vec![f64::NAN],
            floor,
            cutoff: None,
        };
        let above = |rho: f64| rho.abs() >= floor && rho != 0.0;
        // coarse probe of the cutoff; refined below
        let mut last = if above(rho0) { Some(0) } else { None };
        let mut x: Planar = [theta0, r0];
        let mut k = 0;
        loop {
            let done_fixed = fixed > 0 && k >= fixed;
            let settled = fixed == 0 && k >= min && k >= last.map_or(0, |c| c + 2 * n + PROBE);
            if done_fixed || settled || k >= cap {
                break;
            }
            x = planar_step(self.vf, x, h);
            k += 1;
            let t = k as f64 * h;
            if !(x[0].is_finite() && x[1].is_finite()) {
                return Err(Error::NonFiniteState { time: t });
            }
            if !(x[1] > 0.0 && x[1] < self.r_max) {
                return Err(Error::BasinEscape {
                    time: t,
                    radius: x[1],
                });
            }
            if k % PROBE == 0 && above(x[1] - self.cycle.gamma_at(x[0])) {
                last = Some(k);
            }
            run.theta.push(x[0]);
            run.r.push(x[1]);
            run.rho.push(f64::NAN);
        }
        run.rho[0] = rho0;
        for j in (0..run.r.len()).rev() {
            let rho = self.rho_at(&run, j);
            run.rho[j] = rho;
            if above(rho) {
                run.cutoff = Some(j);
                break;
            }
        }
        Ok(run)
    }

    fn rho_at(&self, run: &Run, k: usize) -> f64 {
        run.r[k] - self.cycle.gamma_at(run.theta[k])
    }

    fn fill_rho(&self, run: &mut Run, a: usize, b: usize) {
        for k in a..b {
            if run.rho[k].is_nan() {
                run.rho[k] = self.rho_at(run, k);
            }
        }
    }

    /// Angle of the mean of `r cos θ · e^(−iωt)` over `[a, b)`.
    fn fourier_angle(&self, run: &Run, a: usize, b: usize) -> f64 {
        let w = self.cycle.omega;
        let h = self.cycle.step;
        let (mut re, mut im) = (0.0, 0.0);
        for k in a..b {
            let x = run.r[k] * run.theta[k].cos();
            let (s, c) = (w * k as f64 * h).sin_cos();
            re += x * c;
            im -= x * s;
        }
        im.atan2(re)
    }

    fn deviation(&self, run: &Run) -> Result<ObservableDeviation> {
        let n = self.cycle.steps_per_period();
        let times = (0..run.rho.len())
            .map(|k| k as f64 * self.cycle.step)
            .collect();
        let c = run
            .cutoff
            .ok_or_else(|| Error::TooShort("no sample above the precision floor".into()))?;
        Ok(ObservableDeviation {
            times,
            rho: run.rho.clone(),
            cutoff_index: c,
            window: window_for(c, n)?,
            floor: run.floor,
            period_steps: n,
            period: self.cycle.period,
        })
    }

    /// Deviation record of the trajectory from `(θ₀, r₀)`.
    pub fn observe(&self, theta0: f64, r0: f64) -> Result<ObservableDeviation> {
        let mut run = self.simulate(theta0, r0, 0)?;
        let len = run.r.len();
        self.fill_rho(&mut run, 0, len);
        self.deviation(&run)
    }

    pub fn reduce(&self, theta0: f64, r0: f64) -> Result<ReducedSample> {
        let n = self.cycle.steps_per_period();
        let mut run = self.simulate(theta0, r0, 0)?;
        let sigma0 = match run.cutoff.map(|c| window_for(c, n)) {
            Some(Ok((a, b))) => {
                self.fill_rho(&mut run, a, b);
                let h = self.cycle.step;
                let laplace = (a..b)
                    .map(|k| run.rho[k] * (-self.lambda * k as f64 * h).exp())
                    .sum::<f64>()
                    / (b - a) as f64;
                let sign = if run.rho[0] > 0.0 {
                    1.0
                } else if run.rho[0] < 0.0 {
                    -1.0
                } else {
                    laplace.signum()
                };
                sign * laplace.abs()
            }
            _ => 0.0,
        };
        // phase from the settled stretch after the cutoff
        let start = run
            .cutoff
            .unwrap_or(0)
            .min(run.r.len().saturating_sub(2 * n));
        let end = (start + 2 * n).min(run.r.len());
        let raw = self.fourier_angle(&run, start, end);
        Ok(ReducedSample {
            theta0,
            r0,
            phi0: wrap_2pi(raw - self.reference),
            sigma0,
            lambda_used: self.lambda,
        })
    }
}

pub fn wrap_2pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y >= 2.0 * PI {
        0.0
    } else {
        y
    }
}

pub fn reduced_coordinates(
    vf: &(impl PlanarField + ?Sized),
    cycle: &LimitCycle,
    lambda: f64,
    theta0: f64,
    r0: f64,
) -> Result<ReducedSample> {
    Averager::new(vf, cycle, lambda, AveragingOptions::default())?.reduce(theta0, r0)
}

/// λ from the log-slope of ρ starting at `(0, scale·γ(0))` with λ₀ = 0.
pub fn lambda_log_slope(
    vf: &(impl PlanarField + ?Sized),
    cycle: &LimitCycle,
    scale: f64,
) -> Result<f64> {
    let av = Averager::new(vf, cycle, 0.0, AveragingOptions::default())?;
    let dev = av.observe(0.0, scale * cycle.gamma_at(0.0))?;
    Ok(refine_lambda(&dev, 0.0))
}
