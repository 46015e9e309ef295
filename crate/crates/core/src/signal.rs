//! Instantaneous phase and amplitude of raw scalar signals through the
//! discrete analytic signal.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vf_reconstruction::Trial;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSignal {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RawSignal {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = RawSignal {
            label: label.into(),
            times,
            values,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} times, {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.len() < 8 {
            return Err(Error::TooShort(format!("{} samples", self.times.len())));
        }
        if self
            .values
            .iter()
            .chain(&self.times)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteState { time: f64::NAN });
        }
        let dt = self.dt();
        if !(dt > 0.0) {
            return Err(Error::NonUniformSampling("non-increasing times".into()));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
                return Err(Error::NonUniformSampling(format!(
                    "step {k} is {} against {dt}",
                    w[1] - w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAmplitude {
    pub label: String,
    pub times: Vec<f64>,
    /// Unwrapped angle.
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
    /// True for samples in the first or last 5% of the record.
    pub edge: Vec<bool>,
}

impl PhaseAmplitude {
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).filter(|&k| !self.edge[k])
    }
}

/// Analytic signal of a real sequence: zero the negative frequencies and
/// double the positive ones.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c * scale).collect()
}

/// Dominant frequency in cycles per unit time, from the power spectrum peak.
fn dominant_frequency(x: &[f64], dt: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2 + 1)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .unwrap_or(0);
    k as f64 / (n as f64 * dt)
}

pub fn extract_phase_amplitude(signal: &RawSignal) -> Result<PhaseAmplitude> {
    signal.validate()?;
    let n = signal.values.len();
    let mean = signal.values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = signal.values.iter().map(|v| v - mean).collect();
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var <= 1e-24 * (1.0 + mean * mean) {
        return Err(Error::ZeroVariance);
    }
    let dt = signal.dt();
    let f = dominant_frequency(&x, dt);
    let duration = n as f64 * dt;
    if f * duration < 4.0 {
        return Err(Error::TooShort(format!(
            "{:.2} periods in the record",
            f * duration
        )));
    }
    let z = analytic_signal(&x);
    let mut theta = Vec::with_capacity(n);
    let mut prev = 0.0f64;
    let mut acc = 0.0f64;
    for (k, c) in z.iter().enumerate() {
        let a = c.arg();
        if k > 0 {
            acc += crate::models::wrap_pi(a - prev);
        } else {
            acc = a;
        }
        prev = a;
        theta.push(acc);
    }
    let r = z.iter().map(|c| c.norm()).collect();
    let m = (0.05 * n as f64).ceil() as usize;
    let edge = (0..n).map(|k| k < m || k >= n - m).collect();
    Ok(PhaseAmplitude {
        label: signal.label.clone(),
        times: signal.times.clone(),
        theta,
        r,
        edge,
    })
}

/// One trial from extracted channels sharing a time base: edge samples are
/// dropped and angles wrapped to [0, 2π).
pub fn to_trial(channels: &[PhaseAmplitude]) -> Result<Trial> {
    let first = channels
        .first()
        .ok_or_else(|| Error::InsufficientSamples("no channels".into()))?;
    if channels.iter().any(|c| c.times != first.times) {
        return Err(Error::ShapeMismatch(
            "channels do not share a time base".into(),
        ));
    }
    let keep: Vec<usize> = (0..first.times.len())
        .filter(|&k| channels.iter().all(|c| !c.edge[k]))
        .collect();
    Ok(Trial {
        times: keep.iter().map(|&k| first.times[k]).collect(),
        theta: channels
            .iter()
            .map(|c| {
                keep.iter()
                    .map(|&k| c.theta[k].rem_euclid(2.0 * PI))
                    .collect()
            })
            .collect(),
        r: channels
            .iter()
            .map(|c| keep.iter().map(|&k| c.r[k]).collect())
            .collect(),
    })
}
